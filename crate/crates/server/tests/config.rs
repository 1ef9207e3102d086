use corec_core::domain::Role;
use corec_core::travel::ProviderKind;
use corec_server::{AppState, ServerConfig};

const SAMPLE: &str = r#"
listen_addr = "127.0.0.1:0"
event_log_path = "events.ndjson"
bulletin_path = "bulletins.ndjson"

[routing]
kind = "external"
base_url = "http://localhost:5000"
timeout_ms = 800

[[auth.tokens]]
token = "dm-secret"
participant_id = "dm-1"
role = "decision_maker"
name = "Duty officer"

[[auth.tokens]]
token = "res-secret"
participant_id = "aff-1"
role = "affected"
"#;

#[test]
fn loads_and_resolves_relative_paths() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("corec.toml");
    std::fs::write(&path, SAMPLE).unwrap();
    let cfg = ServerConfig::load(&path).unwrap();
    assert_eq!(cfg.event_log_path, dir.path().join("events.ndjson"));
    assert_eq!(cfg.routing.kind, ProviderKind::External);
    assert_eq!(cfg.routing.timeout_ms, 800);
    assert_eq!(cfg.auth.tokens[1].role, Role::Affected);

    let state = AppState::from_config(&cfg).unwrap();
    let coord = state.read();
    assert!(coord.world().is_registered("dm-1", Role::DecisionMaker));
    assert!(coord.world().is_registered("aff-1", Role::Affected));
    assert!(state.authenticate("dm-secret").is_ok());
    assert_eq!(state.authenticate("other").unwrap_err().status.as_u16(), 401);
}

#[test]
fn rejects_bad_configs() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("corec.toml");
    for bad in [
        SAMPLE.replace("kind = \"external\"\nbase_url = \"http://localhost:5000\"", "kind = \"external\""),
        SAMPLE.replace("res-secret", "dm-secret"),
        SAMPLE.replace("role = \"affected\"", "role = \"system\""),
        "listen_addr = 3".to_string(),
    ] {
        std::fs::write(&path, &bad).unwrap();
        assert!(ServerConfig::load(&path).is_err(), "{bad}");
    }
}
