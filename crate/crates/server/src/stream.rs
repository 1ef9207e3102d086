use std::convert::Infallible;

use axum::extract::{Query, State};
use axum::http::HeaderMap;
use axum::response::sse::{Event, KeepAlive, Sse};
use corec_core::context::{NotificationFilter, Viewer};
use futures::Stream;
use serde::Deserialize;

use crate::error::ApiError;
use crate::routes::bearer;
use crate::state::AppState;

#[derive(Debug, Default, Deserialize)]
pub struct StreamParams {
    #[serde(default)]
    pub from: Option<u64>,
    /// For clients that cannot set headers on a stream request.
    #[serde(default)]
    pub token: Option<String>,
}

/// Role-filtered notifications with `seq >= from`, in order, then live.
/// A `Last-Event-ID` header resumes just after that sequence number.
pub async fn events(
    State(state): State<AppState>,
    headers: HeaderMap,
    Query(params): Query<StreamParams>,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let token = bearer(&headers).or(params.token.clone()).ok_or_else(ApiError::unauthorized)?;
    let session = state.authenticate(&token)?;
    let resume = headers
        .get("last-event-id")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.trim().parse::<u64>().ok())
        .map(|seq| seq + 1);
    let from = resume.into_iter().chain(params.from).max().unwrap_or(1);

    let mut filter = NotificationFilter::new(Viewer { id: session.participant_id, role: session.role });
    let mut rx = state.subscribe();
    let stream = async_stream::stream! {
        let mut next = 0usize;
        loop {
            rx.borrow_and_update();
            let batch = {
                let coord = state.read();
                coord.log().events()[next..].to_vec()
            };
            next += batch.len();
            for ev in &batch {
                let Some(note) = filter.observe(ev) else { continue };
                if note.seq < from {
                    continue;
                }
                let data = serde_json::to_string(&note).expect("notifications serialize");
                yield Ok(Event::default().id(note.seq.to_string()).event(note.kind().as_str()).data(data));
            }
            if rx.changed().await.is_err() {
                break;
            }
        }
    };
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}
