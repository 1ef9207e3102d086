//! A minimal HTTP server standing in for an external routing provider.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

#[derive(Debug, Clone)]
pub enum Behavior {
    Json(String),
    Status(u16),
    Hang(Duration),
}

pub struct Stub {
    pub base_url: String,
    hits: Arc<AtomicUsize>,
}

impl Stub {
    pub fn start(behavior: Behavior) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind stub");
        let base_url = format!("http://{}", listener.local_addr().unwrap());
        let hits = Arc::new(AtomicUsize::new(0));
        let counter = hits.clone();
        thread::spawn(move || {
            for stream in listener.incoming().flatten() {
                counter.fetch_add(1, Ordering::SeqCst);
                let behavior = behavior.clone();
                thread::spawn(move || serve(stream, &behavior));
            }
        });
        Self { base_url, hits }
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}

fn serve(mut stream: TcpStream, behavior: &Behavior) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut line = String::new();
    while reader.read_line(&mut line).is_ok_and(|n| n > 0) {
        if line == "\r\n" {
            break;
        }
        line.clear();
    }
    let (status, body) = match behavior {
        Behavior::Json(body) => (200, body.clone()),
        Behavior::Status(code) => (*code, "{\"code\":\"Error\"}".to_string()),
        Behavior::Hang(d) => {
            thread::sleep(*d);
            (200, "{\"code\":\"Ok\",\"routes\":[{\"duration\":1.0}]}".to_string())
        }
    };
    let _ = write!(
        stream,
        "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
}
