//! Runtime configuration.
//!
//! Values are layered: environment first, then command-line flags, then a
//! TOML config file, each later layer overriding the earlier ones.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;

use forage_core::index::RemoteEmbeddingConfig;
use forage_core::llm::{ModelNames, RemoteLlmConfig};
use serde::Deserialize;
use thiserror::Error;

pub const DEFAULT_BIND: &str = "127.0.0.1:8484";
pub const DEFAULT_DATA_DIR: &str = "forage-data";
pub const DEFAULT_EMBED_MODEL: &str = "multi-qa-MiniLM-L6-cos-v1";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// One layer of optional settings. Field names double as TOML keys.
#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    pub bind: Option<String>,
    pub data_dir: Option<PathBuf>,
    pub llm_url: Option<String>,
    pub llm_key: Option<String>,
    pub fast_model: Option<String>,
    pub strong_model: Option<String>,
    /// `local` or `remote`.
    pub embedding: Option<String>,
    pub embed_url: Option<String>,
    pub embed_key: Option<String>,
    pub embed_model: Option<String>,
    pub fanout: Option<usize>,
    pub mock: Option<bool>,
    pub mock_fixtures: Option<PathBuf>,
}

impl ConfigLayer {
    /// Read the `FORAGE_*` variables from `vars`.
    pub fn from_env(vars: &HashMap<String, String>) -> Result<Self, ConfigError> {
        let get = |k: &str| vars.get(k).filter(|v| !v.is_empty()).cloned();
        let fanout = match get("FORAGE_FANOUT") {
            Some(v) => Some(v.parse().map_err(|_| ConfigError::Invalid(format!("FORAGE_FANOUT={v:?}")))?),
            None => None,
        };
        let mock = match get("FORAGE_MOCK").as_deref() {
            None => None,
            Some("1" | "true" | "yes") => Some(true),
            Some("0" | "false" | "no") => Some(false),
            Some(v) => return Err(ConfigError::Invalid(format!("FORAGE_MOCK={v:?}"))),
        };
        Ok(Self {
            bind: get("FORAGE_BIND"),
            data_dir: get("FORAGE_DATA_DIR").map(PathBuf::from),
            llm_url: get("FORAGE_LLM_URL"),
            llm_key: get("FORAGE_LLM_KEY"),
            fast_model: get("FORAGE_FAST_MODEL"),
            strong_model: get("FORAGE_STRONG_MODEL"),
            embedding: get("FORAGE_EMBEDDING"),
            embed_url: get("FORAGE_EMBED_URL"),
            embed_key: get("FORAGE_EMBED_KEY"),
            embed_model: get("FORAGE_EMBED_MODEL"),
            fanout,
            mock,
            mock_fixtures: get("FORAGE_MOCK_FIXTURES").map(PathBuf::from),
        })
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Invalid(format!("config file: {e}")))
    }

    /// `self` with every field set in `top` replaced.
    pub fn overlay(self, top: ConfigLayer) -> ConfigLayer {
        ConfigLayer {
            bind: top.bind.or(self.bind),
            data_dir: top.data_dir.or(self.data_dir),
            llm_url: top.llm_url.or(self.llm_url),
            llm_key: top.llm_key.or(self.llm_key),
            fast_model: top.fast_model.or(self.fast_model),
            strong_model: top.strong_model.or(self.strong_model),
            embedding: top.embedding.or(self.embedding),
            embed_url: top.embed_url.or(self.embed_url),
            embed_key: top.embed_key.or(self.embed_key),
            embed_model: top.embed_model.or(self.embed_model),
            fanout: top.fanout.or(self.fanout),
            mock: top.mock.or(self.mock),
            mock_fixtures: top.mock_fixtures.or(self.mock_fixtures),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EmbeddingChoice {
    Local,
    Remote(RemoteEmbeddingConfig),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LlmChoice {
    Remote(RemoteLlmConfig),
    Mock { fixtures: Option<PathBuf> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiConfig {
    pub bind: SocketAddr,
    pub data_dir: PathBuf,
    pub llm: LlmChoice,
    pub models: ModelNames,
    pub embedding: EmbeddingChoice,
    pub fanout: usize,
}

impl ApiConfig {
    /// Validate a merged layer. Without an LLM endpoint the mock backend is
    /// the only option, and it must be asked for explicitly.
    pub fn from_layer(layer: ConfigLayer) -> Result<Self, ConfigError> {
        let bind_text = layer.bind.unwrap_or_else(|| DEFAULT_BIND.to_string());
        let bind = bind_text.parse().map_err(|_| ConfigError::Invalid(format!("bind address {bind_text:?}")))?;
        let fanout = layer.fanout.unwrap_or(forage_core::engine::DEFAULT_FANOUT);
        if fanout == 0 {
            return Err(ConfigError::Invalid("fanout must be at least 1".into()));
        }
        let llm = match (layer.mock.unwrap_or(false), layer.llm_url) {
            (true, _) => LlmChoice::Mock { fixtures: layer.mock_fixtures },
            (false, Some(base_url)) => LlmChoice::Remote(RemoteLlmConfig {
                base_url,
                api_key: layer.llm_key,
                retries: 2,
                timeout_ms: 30_000,
            }),
            (false, None) => {
                return Err(ConfigError::Invalid(
                    "no LLM endpoint configured (FORAGE_LLM_URL); pass --mock to use the mock backend".into(),
                ))
            }
        };
        let defaults = ModelNames::default();
        let models = ModelNames {
            fast: layer.fast_model.unwrap_or(defaults.fast),
            strong: layer.strong_model.unwrap_or(defaults.strong),
        };
        let embedding = match layer.embedding.as_deref().unwrap_or(if layer.embed_url.is_some() { "remote" } else { "local" }) {
            "local" => EmbeddingChoice::Local,
            "remote" => {
                let base_url = layer
                    .embed_url
                    .ok_or_else(|| ConfigError::Invalid("remote embedding needs FORAGE_EMBED_URL".into()))?;
                EmbeddingChoice::Remote(RemoteEmbeddingConfig {
                    base_url,
                    api_key: layer.embed_key,
                    model: layer.embed_model.unwrap_or_else(|| DEFAULT_EMBED_MODEL.into()),
                    retries: 2,
                    timeout_ms: 30_000,
                })
            }
            other => return Err(ConfigError::Invalid(format!("embedding must be local or remote, got {other:?}"))),
        };
        Ok(Self {
            bind,
            data_dir: layer.data_dir.unwrap_or_else(|| PathBuf::from(DEFAULT_DATA_DIR)),
            llm,
            models,
            embedding,
            fanout,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(pairs: &[(&str, &str)]) -> HashMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn missing_credentials_need_mock_flag() {
        let err = ApiConfig::from_layer(ConfigLayer::default()).unwrap_err();
        assert!(err.to_string().contains("--mock"));
        let cfg = ApiConfig::from_layer(ConfigLayer { mock: Some(true), ..Default::default() }).unwrap();
        assert_eq!(cfg.llm, LlmChoice::Mock { fixtures: None });
        assert_eq!(cfg.embedding, EmbeddingChoice::Local);
        assert_eq!(cfg.fanout, 8);
    }

    #[test]
    fn layers_override_in_order() {
        let base = ConfigLayer::from_env(&env(&[
            ("FORAGE_LLM_URL", "http://env"),
            ("FORAGE_FANOUT", "4"),
            ("FORAGE_FAST_MODEL", "small"),
        ]))
        .unwrap();
        let flags = ConfigLayer { fanout: Some(6), bind: Some("0.0.0.0:9000".into()), ..Default::default() };
        let file = ConfigLayer::from_toml("fanout = 12\nstrong_model = \"big\"\n").unwrap();
        let cfg = ApiConfig::from_layer(base.overlay(flags).overlay(file)).unwrap();
        assert_eq!(cfg.fanout, 12);
        assert_eq!(cfg.bind.port(), 9000);
        assert_eq!(cfg.models, ModelNames { fast: "small".into(), strong: "big".into() });
        assert!(matches!(cfg.llm, LlmChoice::Remote(ref r) if r.base_url == "http://env"));
    }

    #[test]
    fn invalid_values() {
        assert!(ConfigLayer::from_env(&env(&[("FORAGE_FANOUT", "x")])).is_err());
        assert!(ConfigLayer::from_toml("nonsense = 1").is_err());
        let bad = |layer: ConfigLayer| ApiConfig::from_layer(ConfigLayer { mock: Some(true), ..layer }).is_err();
        assert!(bad(ConfigLayer { fanout: Some(0), ..Default::default() }));
        assert!(bad(ConfigLayer { bind: Some("nowhere".into()), ..Default::default() }));
        assert!(bad(ConfigLayer { embedding: Some("remote".into()), ..Default::default() }));
        assert!(bad(ConfigLayer { embedding: Some("gpu".into()), ..Default::default() }));
    }
}
