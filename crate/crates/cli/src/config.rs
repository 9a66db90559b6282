//! Backend and front-end settings shared by the commands and the service.

use std::path::Path;

use serde::{Deserialize, Serialize};

use procmon_core::llmclient::BackendConfig;
use procmon_core::nlfront::FrontendConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AppConfig {
    pub seed: u64,
    /// Answers operator questions.
    pub answer: BackendConfig,
    /// Turns answers into fluents.
    pub extractor: BackendConfig,
    /// Referring expressions, translation fallback and embeddings.
    pub nl: BackendConfig,
    pub frontend: FrontendConfig,
}

impl Default for AppConfig {
    fn default() -> Self {
        AppConfig {
            seed: 0,
            answer: BackendConfig::oracle(),
            extractor: BackendConfig::oracle(),
            nl: BackendConfig::oracle(),
            frontend: FrontendConfig::default(),
        }
    }
}

impl AppConfig {
    pub fn load(path: &Path) -> Result<AppConfig, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("bad config {}: {e}", path.display()))
    }

    /// Points every backend at `spec` (`mock`, `mock-lossy:0.3`, `http:URL`).
    /// Lossy and hallucinating mocks only affect answers; the other roles
    /// keep the oracle.
    pub fn with_backend(mut self, spec: &str) -> Result<AppConfig, String> {
        let b = BackendConfig::from_short(spec).map_err(|e| e.to_string())?;
        if b.is_mock() {
            self.answer = b;
        } else {
            self.answer = b.clone();
            self.extractor = b.clone();
            self.nl = b;
        }
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use procmon_core::llmclient::BackendKind;

    #[test]
    fn defaults_to_oracles() {
        let c: AppConfig = toml::from_str("").unwrap();
        assert_eq!(c, AppConfig::default());
        assert!(c.answer.is_mock() && c.extractor.is_mock() && c.nl.is_mock());
    }

    #[test]
    fn lossy_mock_only_touches_answers() {
        let c = AppConfig::default().with_backend("mock-lossy:0.3").unwrap();
        assert_eq!(c.answer.kind, BackendKind::MockLossy { rate: 0.3 });
        assert_eq!(c.extractor, BackendConfig::oracle());
        assert_eq!(c.nl, BackendConfig::oracle());
    }

    #[test]
    fn http_backend_serves_every_role() {
        let c = AppConfig::default().with_backend("http:http://localhost:9/v1").unwrap();
        assert!(!c.answer.is_mock() && !c.extractor.is_mock() && !c.nl.is_mock());
        assert!(AppConfig::default().with_backend("smoke-signals").is_err());
    }

    #[test]
    fn loads_from_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("procmon.toml");
        std::fs::write(&p, "seed = 9\n").unwrap();
        assert_eq!(AppConfig::load(&p).unwrap().seed, 9);
        assert!(AppConfig::load(&dir.path().join("missing.toml")).is_err());
    }
}
