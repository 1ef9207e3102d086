//! Append-only event log and state reconstruction.
//!
//! The log is the single mutation point of the platform. World state is
//! always `replay(initial, log)`; nothing else is authoritative.

pub mod event;
mod transition;

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::WorldState;
use crate::error::StoreError;
pub use event::{
    Application, Audience, Author, ContextEvent, Dispatch, EventBody, EventKind, NeedTag,
    NewEvent, PointClaim, Verdict,
};
pub use transition::apply;

/// Durable backing for the log. The default is a newline-delimited JSON file.
pub trait EventSink: Send + Sync {
    fn persist(&mut self, ev: &ContextEvent) -> io::Result<()>;
}

/// Appends one JSON record per line and syncs after every write.
pub struct NdjsonFile {
    file: File,
}

impl NdjsonFile {
    pub fn open(path: &Path) -> io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self { file })
    }
}

impl EventSink for NdjsonFile {
    fn persist(&mut self, ev: &ContextEvent) -> io::Result<()> {
        let mut line = ev.to_json_line();
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.sync_data()
    }
}

pub struct EventLog {
    events: Vec<ContextEvent>,
    sink: Option<Box<dyn EventSink>>,
}

impl std::fmt::Debug for EventLog {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EventLog")
            .field("events", &self.events.len())
            .field("durable", &self.sink.is_some())
            .finish()
    }
}

impl Default for EventLog {
    fn default() -> Self {
        Self::in_memory()
    }
}

impl EventLog {
    pub fn in_memory() -> Self {
        Self { events: Vec::new(), sink: None }
    }

    pub fn from_events(events: Vec<ContextEvent>) -> Result<Self, StoreError> {
        check_sequence(&events)?;
        Ok(Self { events, sink: None })
    }

    pub fn with_sink(events: Vec<ContextEvent>, sink: Box<dyn EventSink>) -> Result<Self, StoreError> {
        check_sequence(&events)?;
        Ok(Self { events, sink: Some(sink) })
    }

    /// Opens (or creates) a file-backed log, loading whatever is on disk.
    ///
    /// A torn final record left by a crash mid-write is cut off so that
    /// subsequent appends start on a record boundary.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref();
        let (events, valid_len) = if path.exists() { read_log(path)? } else { (Vec::new(), 0) };
        if path.exists() && std::fs::metadata(path)?.len() != valid_len {
            OpenOptions::new().write(true).open(path)?.set_len(valid_len)?;
        }
        Self::with_sink(events, Box::new(NdjsonFile::open(path)?))
    }

    /// Reads a log file without opening it for writing.
    pub fn load(path: impl AsRef<Path>) -> Result<Vec<ContextEvent>, StoreError> {
        Ok(read_log(path.as_ref())?.0)
    }

    pub fn events(&self) -> &[ContextEvent] {
        &self.events
    }

    /// Events with `seq >= from`.
    pub fn since(&self, from: u64) -> &[ContextEvent] {
        let start = from.saturating_sub(1).min(self.events.len() as u64) as usize;
        &self.events[start..]
    }

    /// Events with `from <= seq <= to`.
    pub fn window(&self, from: u64, to: u64) -> &[ContextEvent] {
        let from = from.max(1);
        if to < from {
            return &[];
        }
        let start = (from - 1).min(self.events.len() as u64) as usize;
        let end = to.min(self.events.len() as u64) as usize;
        &self.events[start..end.max(start)]
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn last_seq(&self) -> u64 {
        self.events.last().map_or(0, |e| e.seq)
    }

    /// Appends after a schema check and returns the assigned sequence number.
    ///
    /// Nothing is recorded when the payload is invalid or the sink fails.
    pub fn append(&mut self, ev: NewEvent) -> Result<u64, StoreError> {
        ev.body.validate()?;
        let seq = self.last_seq() + 1;
        let ev = ContextEvent::with_seq(seq, ev);
        if let Some(sink) = self.sink.as_mut() {
            sink.persist(&ev)?;
        }
        self.events.push(ev);
        Ok(seq)
    }

    pub fn snapshot(&self, initial: &WorldState) -> WorldState {
        replay(initial, &self.events).world
    }

    /// Writes the whole log as newline-delimited JSON.
    pub fn write_ndjson(&self, mut out: impl Write) -> io::Result<()> {
        for ev in &self.events {
            writeln!(out, "{}", ev.to_json_line())?;
        }
        Ok(())
    }

    pub fn to_ndjson(&self) -> String {
        let mut buf = Vec::new();
        self.write_ndjson(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }
}

fn check_sequence(events: &[ContextEvent]) -> Result<(), StoreError> {
    for (i, ev) in events.iter().enumerate() {
        if ev.seq != i as u64 + 1 {
            return Err(StoreError::Corrupt {
                line: i + 1,
                message: format!("expected seq {}, found {}", i + 1, ev.seq),
            });
        }
    }
    Ok(())
}

/// Returns the parsed events and the byte length of the complete prefix.
fn read_log(path: &Path) -> Result<(Vec<ContextEvent>, u64), StoreError> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut events = Vec::new();
    let mut valid_len = 0u64;
    let mut line = String::new();
    let mut lineno = 0;
    loop {
        line.clear();
        let n = reader.read_line(&mut line)?;
        if n == 0 {
            break;
        }
        lineno += 1;
        if !line.ends_with('\n') {
            // torn tail from an interrupted write
            break;
        }
        let text = line.trim_end();
        if !text.is_empty() {
            let ev: ContextEvent = serde_json::from_str(text)
                .map_err(|e| StoreError::Corrupt { line: lineno, message: e.to_string() })?;
            events.push(ev);
        }
        valid_len += n as u64;
    }
    check_sequence(&events)?;
    Ok((events, valid_len))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Outcome {
    Applied,
    Rejected { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub seq: u64,
    pub kind: EventKind,
    #[serde(flatten)]
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    pub world: WorldState,
    pub audit: Vec<AuditEntry>,
}

impl Replay {
    pub fn rejected(&self) -> impl Iterator<Item = &AuditEntry> {
        self.audit.iter().filter(|a| matches!(a.outcome, Outcome::Rejected { .. }))
    }
}

/// Folds `events` over `initial`. Events whose transition would break an
/// invariant are skipped and recorded as rejected; replay never aborts.
pub fn replay(initial: &WorldState, events: &[ContextEvent]) -> Replay {
    let mut world = initial.clone();
    let mut audit = Vec::with_capacity(events.len());
    for ev in events {
        let outcome = match apply(&mut world, ev) {
            Ok(()) => Outcome::Applied,
            Err(e) => Outcome::Rejected { reason: e.0 },
        };
        audit.push(AuditEntry { seq: ev.seq, kind: ev.kind(), outcome });
    }
    Replay { world, audit }
}
