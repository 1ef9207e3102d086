use std::collections::HashMap;
use std::path::{Path, PathBuf};

use corec_core::domain::{PriorityWeights, Role};
use corec_core::travel::RoutingConfig;
use serde::{Deserialize, Serialize};

use crate::ServerError;

fn default_listen() -> String {
    "127.0.0.1:8080".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenEntry {
    pub token: String,
    pub participant_id: String,
    pub role: Role,
    #[serde(default)]
    pub name: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AuthConfig {
    #[serde(default)]
    pub tokens: Vec<TokenEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerConfig {
    #[serde(default = "default_listen")]
    pub listen_addr: String,
    pub event_log_path: PathBuf,
    #[serde(default)]
    pub bulletin_path: Option<PathBuf>,
    /// Initial world (JSON). An empty world when absent.
    #[serde(default)]
    pub world_path: Option<PathBuf>,
    #[serde(default)]
    pub routing: RoutingConfig,
    #[serde(default)]
    pub weights: PriorityWeights,
    #[serde(default)]
    pub auth: AuthConfig,
}

impl ServerConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ServerError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ServerError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: ServerConfig =
            toml::from_str(&text).map_err(|e| ServerError::Config(format!("{}: {e}", path.display())))?;
        // relative paths are relative to the config file
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.event_log_path = base.join(&cfg.event_log_path);
        cfg.bulletin_path = cfg.bulletin_path.map(|p| base.join(p));
        cfg.world_path = cfg.world_path.map(|p| base.join(p));
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ServerError> {
        self.routing.validate().map_err(|e| ServerError::Config(e.to_string()))?;
        let mut seen = HashMap::new();
        for t in &self.auth.tokens {
            if t.token.is_empty() {
                return Err(ServerError::Config(format!("empty token for {}", t.participant_id)));
            }
            if t.role == Role::System {
                return Err(ServerError::Config(format!("token for {} cannot carry the system role", t.participant_id)));
            }
            if seen.insert(t.token.as_str(), ()).is_some() {
                return Err(ServerError::Config(format!("duplicate token for {}", t.participant_id)));
            }
        }
        Ok(())
    }
}
