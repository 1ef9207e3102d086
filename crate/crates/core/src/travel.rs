//! Travel-time service: great-circle estimates, an OSRM-compatible client
//! and the filtered unit x point time matrix.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{GeoPoint, RescuePoint, RoadClosure, TransportMode, VolunteerUnit};

pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Great-circle distance in kilometres.
pub fn haversine_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    let h = h.clamp(0.0, 1.0);
    // atan2 stays well conditioned near antipodes where asin does not
    2.0 * EARTH_RADIUS_KM * h.sqrt().atan2((1.0 - h).sqrt())
}

/// Rounds a non-negative quantity to the nearest integer, halves upward.
pub fn round_half_up(x: f64) -> u64 {
    (x + 0.5).floor() as u64
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RoutingError {
    #[error("routing configuration: {0}")]
    Config(String),
    #[error("routing provider: {0}")]
    Provider(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    #[default]
    Offline,
    External,
}

fn default_timeout_ms() -> u64 {
    2000
}

fn default_speeds() -> BTreeMap<TransportMode, f64> {
    [(TransportMode::Road, 40.0), (TransportMode::Water, 15.0)].into()
}

fn default_max_response() -> u64 {
    3600
}

fn default_parallelism() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingConfig {
    #[serde(default)]
    pub kind: ProviderKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_url: Option<String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    /// km/h per mode for the offline estimate.
    #[serde(default = "default_speeds")]
    pub mode_speeds: BTreeMap<TransportMode, f64>,
    #[serde(default = "default_max_response")]
    pub max_response_s: u64,
    /// Concurrent external requests while building a matrix.
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
}

impl Default for RoutingConfig {
    fn default() -> Self {
        Self {
            kind: ProviderKind::Offline,
            base_url: None,
            timeout_ms: default_timeout_ms(),
            mode_speeds: default_speeds(),
            max_response_s: default_max_response(),
            parallelism: default_parallelism(),
        }
    }
}

impl RoutingConfig {
    pub fn external(base_url: impl Into<String>, timeout_ms: u64) -> Self {
        Self {
            kind: ProviderKind::External,
            base_url: Some(base_url.into()),
            timeout_ms,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), RoutingError> {
        if self.timeout_ms == 0 {
            return Err(RoutingError::Config("timeout_ms must be positive".into()));
        }
        if let Some((mode, _)) = self.mode_speeds.iter().find(|(_, &v)| !(v.is_finite() && v > 0.0)) {
            return Err(RoutingError::Config(format!("speed for {mode} must be positive")));
        }
        if self.kind == ProviderKind::External && self.base_url.as_deref().is_none_or(str::is_empty) {
            return Err(RoutingError::Config("external routing needs base_url".into()));
        }
        if self.parallelism == 0 {
            return Err(RoutingError::Config("parallelism must be positive".into()));
        }
        Ok(())
    }

    pub fn speed(&self, mode: TransportMode) -> Result<f64, RoutingError> {
        self.mode_speeds
            .get(&mode)
            .copied()
            .ok_or_else(|| RoutingError::Config(format!("no speed configured for {mode}")))
    }
}

/// Straight-line travel time at the configured speed for `mode`, in whole seconds.
pub fn estimate_offline(
    a: GeoPoint,
    b: GeoPoint,
    mode: TransportMode,
    cfg: &RoutingConfig,
) -> Result<u64, RoutingError> {
    let speed = cfg.speed(mode)?;
    if !(speed.is_finite() && speed > 0.0) {
        return Err(RoutingError::Config(format!("speed for {mode} must be positive")));
    }
    Ok(round_half_up(haversine_km(a, b) / speed * 3600.0))
}

#[derive(Deserialize)]
struct OsrmRoute {
    duration: f64,
}

#[derive(Deserialize)]
struct OsrmResponse {
    #[serde(default)]
    code: Option<String>,
    #[serde(default)]
    routes: Vec<OsrmRoute>,
}

pub fn route_url(base_url: &str, a: GeoPoint, b: GeoPoint) -> String {
    format!(
        "{}/route/v1/driving/{},{};{},{}?overview=false",
        base_url.trim_end_matches('/'),
        a.lon,
        a.lat,
        b.lon,
        b.lat
    )
}

fn agent_for(cfg: &RoutingConfig) -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_millis(cfg.timeout_ms)))
        .build()
        .into()
}

/// Parses an OSRM route response body into whole seconds.
pub fn parse_route_duration(body: &str) -> Result<u64, RoutingError> {
    let resp: OsrmResponse = serde_json::from_str(body)
        .map_err(|e| RoutingError::Provider(format!("malformed body: {e}")))?;
    if let Some(code) = resp.code.as_deref() {
        if code != "Ok" {
            return Err(RoutingError::Provider(format!("provider code {code}")));
        }
    }
    let duration = resp
        .routes
        .first()
        .ok_or_else(|| RoutingError::Provider("no routes in response".into()))?
        .duration;
    if !(duration.is_finite() && duration >= 0.0) {
        return Err(RoutingError::Provider(format!("bad duration {duration}")));
    }
    Ok(round_half_up(duration))
}

fn fetch_with(agent: &ureq::Agent, base_url: &str, a: GeoPoint, b: GeoPoint) -> Result<u64, RoutingError> {
    let url = route_url(base_url, a, b);
    let mut resp = agent.get(&url).call().map_err(|e| RoutingError::Provider(e.to_string()))?;
    let body = resp
        .body_mut()
        .read_to_string()
        .map_err(|e| RoutingError::Provider(e.to_string()))?;
    parse_route_duration(&body)
}

/// One OSRM-compatible route request. Errors on timeout, non-2xx status or a
/// body without a usable first route.
pub fn fetch_external(a: GeoPoint, b: GeoPoint, cfg: &RoutingConfig) -> Result<u64, RoutingError> {
    if cfg.kind != ProviderKind::External {
        return Err(RoutingError::Config("routing kind is not external".into()));
    }
    cfg.validate()?;
    let base = cfg.base_url.as_deref().expect("validated");
    fetch_with(&agent_for(cfg), base, a, b)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Estimate {
    pub seconds: u64,
    /// Set when the external provider failed and the offline estimate was used.
    pub degraded: Option<String>,
}

type CacheKey = (u64, u64, u64, u64, TransportMode);

fn cache_key(a: GeoPoint, b: GeoPoint, mode: TransportMode) -> CacheKey {
    (a.lat.to_bits(), a.lon.to_bits(), b.lat.to_bits(), b.lon.to_bits(), mode)
}

/// Travel-time provider with offline fallback and a read-through cache.
pub struct Router {
    cfg: RoutingConfig,
    agent: Option<ureq::Agent>,
    cache: Mutex<HashMap<CacheKey, u64>>,
}

impl std::fmt::Debug for Router {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Router").field("cfg", &self.cfg).finish_non_exhaustive()
    }
}

impl Router {
    pub fn new(cfg: RoutingConfig) -> Result<Self, RoutingError> {
        cfg.validate()?;
        let agent = (cfg.kind == ProviderKind::External).then(|| agent_for(&cfg));
        Ok(Self { cfg, agent, cache: Mutex::new(HashMap::new()) })
    }

    pub fn offline() -> Self {
        Self::new(RoutingConfig::default()).expect("default config is valid")
    }

    pub fn config(&self) -> &RoutingConfig {
        &self.cfg
    }

    /// Road legs go to the external provider when configured; water legs
    /// and provider failures use the offline estimate.
    pub fn travel_seconds(&self, a: GeoPoint, b: GeoPoint, mode: TransportMode) -> Result<Estimate, RoutingError> {
        let key = cache_key(a, b, mode);
        if let Some(&s) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(Estimate { seconds: s, degraded: None });
        }
        let est = match (&self.agent, mode) {
            (Some(agent), TransportMode::Road) => {
                let base = self.cfg.base_url.as_deref().expect("validated");
                match fetch_with(agent, base, a, b) {
                    Ok(s) => Estimate { seconds: s, degraded: None },
                    Err(e) => Estimate {
                        seconds: estimate_offline(a, b, mode, &self.cfg)?,
                        degraded: Some(e.to_string()),
                    },
                }
            }
            _ => Estimate { seconds: estimate_offline(a, b, mode, &self.cfg)?, degraded: None },
        };
        if est.degraded.is_none() {
            self.cache.lock().expect("cache lock").insert(key, est.seconds);
        }
        Ok(est)
    }
}

/// Travel times from every unit (row) to every rescue point (column).
/// `None` marks an unreachable pair.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TimeMatrix {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub cells: Vec<Vec<Option<u64>>>,
}

impl TimeMatrix {
    pub fn new(rows: Vec<String>, cols: Vec<String>) -> Self {
        let cells = vec![vec![None; cols.len()]; rows.len()];
        Self { rows, cols, cells }
    }

    pub fn row(&self, unit_id: &str) -> Option<usize> {
        self.rows.iter().position(|r| r == unit_id)
    }

    pub fn col(&self, point_id: &str) -> Option<usize> {
        self.cols.iter().position(|c| c == point_id)
    }

    pub fn get(&self, unit_id: &str, point_id: &str) -> Option<u64> {
        self.cells[self.row(unit_id)?][self.col(point_id)?]
    }

    pub fn set(&mut self, unit_id: &str, point_id: &str, value: Option<u64>) {
        let (r, c) = (self.row(unit_id).expect("known unit"), self.col(point_id).expect("known point"));
        self.cells[r][c] = value;
    }

    pub fn finite_cells(&self) -> usize {
        self.cells.iter().flatten().filter(|c| c.is_some()).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatrixBuild {
    pub matrix: TimeMatrix,
    /// Provider failures that fell back to the offline estimate.
    pub degraded: Vec<String>,
}

/// Builds the filtered matrix. A pair is unreachable when the point does
/// not accept the unit's mode or a closure blocks it; estimates above
/// `max_response_s` are dropped too.
pub fn build_time_matrix(
    units: &[VolunteerUnit],
    points: &[RescuePoint],
    closures: &BTreeSet<RoadClosure>,
    max_response_s: u64,
    router: &Router,
) -> Result<MatrixBuild, RoutingError> {
    let mut matrix = TimeMatrix::new(
        units.iter().map(|u| u.id.clone()).collect(),
        points.iter().map(|p| p.id.clone()).collect(),
    );

    let pairs: Vec<(usize, usize)> = units
        .iter()
        .enumerate()
        .flat_map(|(r, u)| points.iter().enumerate().map(move |(c, p)| (r, c, u, p)))
        .filter(|(_, _, u, p)| {
            p.accessible_modes.contains(&u.vehicle.mode) && !closures.iter().any(|c| c.blocks(u, p))
        })
        .map(|(r, c, _, _)| (r, c))
        .collect();

    let estimate = |&(r, c): &(usize, usize)| {
        router.travel_seconds(units[r].location, points[c].location, units[r].vehicle.mode)
    };
    let results: Vec<Result<Estimate, RoutingError>> = if router.agent.is_some() && pairs.len() > 1 {
        parallel_map(&pairs, router.cfg.parallelism, estimate)
    } else {
        pairs.iter().map(estimate).collect()
    };

    let mut degraded = Vec::new();
    for (&(r, c), res) in pairs.iter().zip(results) {
        let est = res?;
        if let Some(d) = est.degraded {
            degraded.push(format!("{} -> {}: {d}", units[r].id, points[c].id));
        }
        if est.seconds <= max_response_s {
            matrix.cells[r][c] = Some(est.seconds);
        }
    }
    Ok(MatrixBuild { matrix, degraded })
}

fn parallel_map<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers.min(items.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                *slots[i].lock().expect("slot lock") = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("slot lock").expect("every slot filled"))
        .collect()
}
