use std::collections::BTreeSet;

use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use corec_core::context::{DriverApplication, NotificationFilter, ReportClaim, ReportOutcome, ReportSubject, Viewer};
use corec_core::context::FieldReport;
use corec_core::domain::{Availability, Role, WorldState};
use corec_core::store::{Audience, Author, Verdict};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::ApiError;
use crate::state::{unix_now, AppState, Session};
use crate::stream;

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/register", post(register))
        .route("/registrations/{id}/vet", post(vet))
        .route("/world", get(world))
        .route("/reports", post(report))
        .route("/plans", post(propose))
        .route("/plans/{id}", get(plan))
        .route("/plans/{id}/dispatch", post(dispatch))
        .route("/units/{id}/status", post(unit_status))
        .route("/points/{id}/clear", post(clear))
        .route("/bulletins", post(bulletin))
        .route("/feedback", post(feedback))
        .route("/synthesis", get(synthesis))
        .route("/events", get(stream::events))
        .route("/healthz", get(healthz));
    Router::new().nest("/api/v1", api).with_state(state)
}

pub(crate) fn bearer(headers: &HeaderMap) -> Option<String> {
    let value = headers.get("authorization")?.to_str().ok()?;
    let token = value.strip_prefix("Bearer ").or_else(|| value.strip_prefix("bearer "))?;
    Some(token.trim().to_string())
}

fn session(state: &AppState, headers: &HeaderMap) -> Result<Session, ApiError> {
    state.authenticate(&bearer(headers).ok_or_else(ApiError::unauthorized)?)
}

fn require(state: &AppState, headers: &HeaderMap, role: Role) -> Result<Session, ApiError> {
    let s = session(state, headers)?;
    if s.role != role {
        return Err(ApiError::forbidden(format!("{} endpoint", role)));
    }
    Ok(s)
}

fn created(value: impl serde::Serialize) -> Response {
    (StatusCode::CREATED, Json(value)).into_response()
}

fn body<T: for<'de> Deserialize<'de>>(raw: &[u8]) -> Result<T, ApiError> {
    let de = &mut serde_json::Deserializer::from_slice(raw);
    serde_path_to_error::deserialize(de).map_err(|e| ApiError::bad_request(format!("{}: {}", e.path(), e.inner())))
}

fn stamp(c: &corec_core::Coordinator) -> u64 {
    unix_now().max(c.world().clock)
}

async fn healthz(State(state): State<AppState>) -> Json<Value> {
    let n = state.read().log().last_seq();
    Json(json!({ "status": "ok", "last_seq": n }))
}

async fn register(State(state): State<AppState>, raw: axum::body::Bytes) -> Result<Response, ApiError> {
    let app: DriverApplication = body(&raw)?;
    let reg = state.write(move |c| Ok(c.register_driver(stamp(c), app)?)).await?;
    Ok(created(reg))
}

#[derive(Deserialize)]
struct VetRequest {
    verdict: Verdict,
}

async fn vet(
    State(state): State<AppState>,
    headers: HeaderMap,
    Path(id): Path<String>,
    raw: axum::body::Bytes,
) -> Result<Response, ApiError> {
    let s = require(&state, &headers, Role::DecisionMaker)?;
    let req: VetRequest = body(&raw)?;
    let reg = state.write(move |c| Ok(c.vet_registration(stamp(c), &s.participant_id, &id, req.verdict)?)).await?;
    Ok(Json(reg).into_response())
}

/// The world as the caller's role may see it.
fn project(world: &WorldState, s: &Session, filter: Option<&NotificationFilter>) -> Value {
    match s.role {
        Role::DecisionMaker | Role::System => serde_json::to_value(world).expect("world serializes"),
        Role::Driver => {
            let assignment = world.current_plan().and_then(|p| {
                p.assignments.get(&s.participant_id).map(|a| json!({ "plan_id": p.id, "assignment": a }))
            });
            let destination = assignment
                .as_ref()
                .and_then(|a| a["assignment"]["point_id"].as_str())
                .and_then(|id| world.point(id));
            json!({
                "unit": world.unit(&s.participant_id),
                "assignment": assignment,
                "destination": destination,
                "shelters": world.shelters,
                "closures": world.closures,
            })
        }
        Role::Affected => {
            let mine = filter.map(|f| f.reported_points().clone()).unwrap_or_default();
            let points: Vec<_> = world.rescue_points.iter().filter(|p| mine.contains(&p.id)).collect();
            json!({ "rescue_points": points, "shelters": world.shelters })
        }
    }
}

async fn world(State(state): State<AppState>, headers: HeaderMap) -> Result<Json<Value>, ApiError> {
    let s = session(&state, &headers)?;
    let coord = state.read();
    let filter = (s.role == Role::Affected).then(|| {
        let mut f = NotificationFilter::new(Viewer { id: s.participant_id.clone(), role: s.role });
        coord.log().events().iter().for_each(|ev| {
            f.observe(ev);
        });
        f
    });
    Ok(Json(project(coord.world(), &s, filter.as_ref())))
}

#[derive(Deserialize)]
struct ReportRequest {
    subject: ReportSubject,
    claim: ReportClaim,
}

async fn report(State(state): State<AppState>, headers: HeaderMap, raw: axum::body::Bytes) -> Result<Response, ApiError> {
    let s = session(&state, &headers)?;
    let req: ReportRequest = body(&raw)?;
    let outcome = state
        .write(move |c| {
            let report = FieldReport { author: s.participant_id, at: stamp(c), subject: req.subject, claim: req.claim };
            Ok(c.submit_report(&report).0)
        })
        .await?;
    match outcome {
        ReportOutcome::Accepted { .. } => Ok(created(outcome)),
        ReportOutcome::Rejected { reason, detail } => Err(match reason.as_str() {
            "unregistered" => ApiError::new(StatusCode::FORBIDDEN, "unregistered", detail),
            "storage" => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "storage", detail),
            _ => ApiError::bad_request(detail),
        }),
    }
}

#[derive(Default, Deserialize)]
struct ProposeRequest {
    #[serde(default)]
    point_ids: Option<BTreeSet<String>>,
    #[serde(default)]
    dry_run: bool,
}

async fn propose(State(state): State<AppState>, headers: HeaderMap, raw: axum::body::Bytes) -> Result<Response, ApiError> {
    let s = require(&state, &headers, Role::DecisionMaker)?;
    let req: ProposeRequest = if raw.is_empty() { ProposeRequest::default() } else { body(&raw)? };
    let dry = req.dry_run;
    let plan = state
        .write(move |c| Ok(c.propose_plan(stamp(c), &s.participant_id, req.point_ids.as_ref(), req.dry_run)?))
        .await?;
    Ok(if dry { Json(plan).into_response() } else { created(plan) })
}

async fn plan(State(state): State<AppState>, headers: HeaderMap, Path(id): Path<String>) -> Result<Response, ApiError> {
    require(&state, &headers, Role::DecisionMaker)?;
    let coord = state.read();
    let plan = coord.plan(&id).ok_or_else(|| ApiError::not_found(format!("no plan {id}")))?;
    let current = coord.world().current_plan.as_deref() == Some(id.as_str());
    let mut value = serde_json::to_value(plan).expect("plan serializes");
    value["current"] = json!(current);
    Ok(Json(value).into_response())
}

#[derive(Deserialize)]
struct DispatchRequest {
    unit_ids: Vec<String>,
}

async fn dispatch(
    State(state): State<AppState>,
    headers: HeaderMap,
    Path(id): Path<String>,
    raw: axum::body::Bytes,
) -> Result<Response, ApiError> {
    let s = require(&state, &headers, Role::DecisionMaker)?;
    let req: DispatchRequest = body(&raw)?;
    let out = state.write(move |c| Ok(c.dispatch(stamp(c), &s.participant_id, &id, &req.unit_ids)?)).await?;
    Ok(Json(out).into_response())
}

#[derive(Deserialize)]
struct StatusRequest {
    availability: Availability,
}

async fn unit_status(
    State(state): State<AppState>,
    headers: HeaderMap,
    Path(id): Path<String>,
    raw: axum::body::Bytes,
) -> Result<Response, ApiError> {
    let s = session(&state, &headers)?;
    match s.role {
        Role::DecisionMaker => {}
        Role::Driver if s.participant_id == id => {}
        _ => return Err(ApiError::forbidden("only the unit's driver or a decision-maker")),
    }
    let req: StatusRequest = body(&raw)?;
    let ev = state.write(move |c| Ok(c.set_unit_status(stamp(c), &s.participant_id, &id, req.availability)?)).await?;
    Ok(created(json!({ "seq": ev.seq })))
}

#[derive(Default, Deserialize)]
struct ClearRequest {
    #[serde(default)]
    evacuated: Option<u32>,
}

async fn clear(
    State(state): State<AppState>,
    headers: HeaderMap,
    Path(id): Path<String>,
    raw: axum::body::Bytes,
) -> Result<Response, ApiError> {
    let s = require(&state, &headers, Role::DecisionMaker)?;
    let req: ClearRequest = if raw.is_empty() { ClearRequest::default() } else { body(&raw)? };
    let seq = state.write(move |c| Ok(c.clear_point(stamp(c), &s.participant_id, &id, req.evacuated)?)).await?;
    Ok(created(json!({ "seq": seq })))
}

#[derive(Deserialize)]
struct BulletinRequest {
    audience: Audience,
    text: String,
}

async fn bulletin(State(state): State<AppState>, headers: HeaderMap, raw: axum::body::Bytes) -> Result<Response, ApiError> {
    let s = require(&state, &headers, Role::DecisionMaker)?;
    let req: BulletinRequest = body(&raw)?;
    let seq = state
        .write(move |c| {
            let author = Author::new(s.participant_id, Role::DecisionMaker);
            Ok(c.publish_bulletin(stamp(c), author, req.audience, &req.text)?)
        })
        .await?;
    Ok(created(json!({ "seq": seq })))
}

#[derive(Deserialize)]
struct FeedbackRequest {
    rating: i64,
    #[serde(default)]
    text: String,
}

async fn feedback(State(state): State<AppState>, headers: HeaderMap, raw: axum::body::Bytes) -> Result<Response, ApiError> {
    let s = session(&state, &headers)?;
    let req: FeedbackRequest = body(&raw)?;
    let seq = state
        .write(move |c| Ok(c.submit_feedback(stamp(c), &s.participant_id, req.rating, &req.text)?))
        .await?;
    Ok(created(json!({ "seq": seq })))
}

#[derive(Deserialize)]
struct SynthesisParams {
    from: Option<u64>,
    to: Option<u64>,
}

async fn synthesis(
    State(state): State<AppState>,
    headers: HeaderMap,
    Query(q): Query<SynthesisParams>,
) -> Result<Response, ApiError> {
    require(&state, &headers, Role::DecisionMaker)?;
    let coord = state.read();
    let from = q.from.unwrap_or(1);
    let to = q.to.unwrap_or(coord.log().last_seq());
    if from > to && !coord.log().is_empty() {
        return Err(ApiError::bad_request(format!("from {from} is after to {to}")));
    }
    Ok(Json(coord.synthesis(from, to)).into_response())
}
