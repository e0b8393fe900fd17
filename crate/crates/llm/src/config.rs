//! Client configuration read from TOML, with the credential taken from the
//! environment.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::request::{DEFAULT_TEMPERATURE, DEFAULT_TOP_P};
use crate::LlmError;

/// Environment variable holding the API credential.
pub const CREDENTIAL_ENV: &str = "SGTP_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmConfig {
    pub endpoint_url: Option<String>,
    pub model: String,
    pub temperature: f64,
    pub top_p: f64,
    pub request_timeout_s: u64,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            endpoint_url: None,
            model: "gpt-4-turbo".into(),
            temperature: DEFAULT_TEMPERATURE,
            top_p: DEFAULT_TOP_P,
            request_timeout_s: 120,
        }
    }
}

impl LlmConfig {
    pub fn from_toml(text: &str) -> Result<Self, LlmError> {
        toml::from_str(text).map_err(|e| LlmError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path).map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn endpoint(&self) -> Result<&str, LlmError> {
        self.endpoint_url
            .as_deref()
            .filter(|u| !u.is_empty())
            .ok_or_else(|| LlmError::Config("endpoint_url is not set".into()))
    }
}

/// The credential from [`CREDENTIAL_ENV`].
pub fn credential_from_env() -> Result<String, LlmError> {
    match std::env::var(CREDENTIAL_ENV) {
        Ok(k) if !k.is_empty() => Ok(k),
        _ => Err(LlmError::Config(format!("{CREDENTIAL_ENV} is not set"))),
    }
}
