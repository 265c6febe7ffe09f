//! HTTP-backed generation and embedding providers.
//!
//! The wire contract is a minimal JSON POST API:
//!   POST {base_url}/generate {"model", "prompt"}  -> {"completion"}
//!   POST {base_url}/embed    {"model", "input"}   -> {"embedding": [..]}
//! Bearer auth comes from the environment variable named in the config.
//! Single-attempt by design: retry/backoff and concurrency limits are
//! enforced by the orchestration layer in the core crate.

use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::Deserialize;

use audit_core::corpus::{
    EmbeddingProvider, EmbeddingRequest, GenerationOutput, GenerationProvider, GenerationRequest,
};
use audit_core::error::{AuditError, Result};

pub struct HttpProvider {
    agent: ureq::Agent,
    base_url: String,
    model: String,
    token: Option<String>,
}

impl HttpProvider {
    pub fn new(base_url: &str, model: &str, auth_env: Option<&str>) -> Result<Self> {
        let token = match auth_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                AuditError::Config(format!("auth environment variable '{var}' is not set"))
            })?),
            None => None,
        };
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(120)))
            .build();
        Ok(HttpProvider {
            agent: ureq::Agent::new_with_config(config),
            base_url: base_url.trim_end_matches('/').to_string(),
            model: model.to_string(),
            token,
        })
    }

    fn post<T: for<'de> Deserialize<'de>>(
        &self,
        path: &str,
        body: serde_json::Value,
    ) -> Result<T> {
        let url = format!("{}/{path}", self.base_url);
        let mut request = self.agent.post(&url);
        if let Some(token) = &self.token {
            request = request.header("Authorization", &format!("Bearer {token}"));
        }
        let mut response = request
            .send_json(&body)
            .map_err(|e| AuditError::Provider(format!("POST {url}: {e}")))?;
        response
            .body_mut()
            .read_json::<T>()
            .map_err(|e| AuditError::Provider(format!("POST {url}: bad response body: {e}")))
    }
}

#[derive(Deserialize)]
struct GenerateResponse {
    completion: String,
}

#[derive(Deserialize)]
struct EmbedResponse {
    embedding: Vec<f64>,
}

impl GenerationProvider for HttpProvider {
    fn generate(&self, req: &GenerationRequest<'_>) -> Result<GenerationOutput> {
        let response: GenerateResponse = self.post(
            "generate",
            serde_json::json!({ "model": self.model, "prompt": req.prompt }),
        )?;
        Ok(GenerationOutput {
            completion: response.completion,
            model: self.model.clone(),
            timestamp: rfc3339_now(),
        })
    }

    fn model_id(&self) -> &str {
        &self.model
    }
}

impl EmbeddingProvider for HttpProvider {
    fn embed(&self, req: &EmbeddingRequest<'_>) -> Result<Vec<f64>> {
        let response: EmbedResponse = self.post(
            "embed",
            serde_json::json!({ "model": self.model, "input": req.text }),
        )?;
        Ok(response.embedding)
    }

    fn model_id(&self) -> &str {
        &self.model
    }
}

/// UTC timestamp without pulling in a date-time dependency.
fn rfc3339_now() -> String {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    rfc3339_from_unix(secs as i64)
}

fn rfc3339_from_unix(secs: i64) -> String {
    let days = secs.div_euclid(86_400);
    let rem = secs.rem_euclid(86_400);
    let (h, m, s) = (rem / 3600, (rem / 60) % 60, rem % 60);
    // Civil-from-days (Gregorian calendar arithmetic).
    let z = days + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z.rem_euclid(146_097);
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let y = yoe + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = doy - (153 * mp + 2) / 5 + 1;
    let month = if mp < 10 { mp + 3 } else { mp - 9 };
    let year = if month <= 2 { y + 1 } else { y };
    format!("{year:04}-{month:02}-{d:02}T{h:02}:{m:02}:{s:02}Z")
}
