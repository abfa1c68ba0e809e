//! Service settings: a TOML file, then `INFOPOWER_*` environment overrides,
//! then command-line flags.

use std::path::{Path, PathBuf};
use std::time::Duration;

use infopower_core::plant::PlantConfig;
use infopower_core::xai::XaiMode;
use serde::{Deserialize, Serialize};

use crate::ServiceError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServiceConfig {
    pub bind: String,
    pub port: u16,
    /// Tree file; the bundled tree if absent.
    pub tree: Option<PathBuf>,
    pub mode: XaiMode,
    /// Overrides the plant's step duration.
    pub step_seconds: Option<f64>,
    /// Where session journals live; journaling is off if absent.
    pub journal_dir: Option<PathBuf>,
    pub plant: PlantConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: "127.0.0.1".into(),
            port: 8080,
            tree: None,
            mode: XaiMode::UserAware,
            step_seconds: None,
            journal_dir: None,
            plant: PlantConfig::default(),
        }
    }
}

impl ServiceConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ServiceError> {
        let cfg: ServiceConfig = toml::from_str(text).map_err(|e| ServiceError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ServiceError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Apply `INFOPOWER_BIND`, `_PORT`, `_TREE`, `_MODE`, `_STEP_SECONDS`
    /// and `_JOURNAL_DIR` from `vars`.
    pub fn apply_env<I, K, V>(&mut self, vars: I) -> Result<(), ServiceError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let bad = |k: &str, v: &str| ServiceError::Config(format!("{k}={v:?} is invalid"));
        for (k, v) in vars {
            let (k, v) = (k.as_ref(), v.as_ref());
            match k {
                "INFOPOWER_BIND" => self.bind = v.to_string(),
                "INFOPOWER_PORT" => self.port = v.parse().map_err(|_| bad(k, v))?,
                "INFOPOWER_TREE" => self.tree = Some(v.into()),
                "INFOPOWER_MODE" => self.mode = v.parse().map_err(|_| bad(k, v))?,
                "INFOPOWER_STEP_SECONDS" => {
                    self.step_seconds = Some(v.parse().map_err(|_| bad(k, v))?)
                }
                "INFOPOWER_JOURNAL_DIR" => self.journal_dir = Some(v.into()),
                _ => {}
            }
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), ServiceError> {
        if let Some(s) = self.step_seconds {
            if !(s.is_finite() && s > 0.0) {
                return Err(ServiceError::Config(format!("step_seconds must be positive, got {s}")));
            }
        }
        self.plant.validate().map_err(|e| ServiceError::Config(e.to_string()))
    }

    pub fn step_duration(&self) -> Duration {
        Duration::from_secs_f64(self.step_seconds.unwrap_or(self.plant.step_seconds))
    }
}
