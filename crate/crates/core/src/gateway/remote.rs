use serde_json::{json, Value};

use super::{CompletionRequest, GatewayError, Provider, ProviderConfig};

/// OpenAI-compatible chat-completions client.
pub struct RemoteProvider {
    endpoint: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl RemoteProvider {
    /// Reads the API key from the environment variable named in `config`.
    /// A missing key is not an error here; servers that need one will refuse
    /// the request.
    pub fn from_config(config: &ProviderConfig) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| GatewayError::ProviderUnreachable(e.to_string()))?;
        Ok(RemoteProvider {
            endpoint: config.endpoint.trim_end_matches('/').to_string(),
            api_key: std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty()),
            client,
        })
    }

    pub fn request_body(request: &CompletionRequest) -> Value {
        json!({
            "model": request.model,
            "temperature": request.temperature,
            "messages": request.messages,
            "response_format": {
                "type": "json_schema",
                "json_schema": {
                    "name": format!("{}_response", request.kind),
                    "strict": true,
                    "schema": request.schema,
                },
            },
        })
    }
}

impl Provider for RemoteProvider {
    fn complete(&self, request: &CompletionRequest) -> Result<String, GatewayError> {
        let mut req = self
            .client
            .post(format!("{}/chat/completions", self.endpoint))
            .timeout(request.timeout)
            .json(&Self::request_body(request));
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                GatewayError::Timeout(request.timeout)
            } else {
                GatewayError::ProviderUnreachable(e.to_string())
            }
        })?;
        let status = resp.status();
        let body: Value = resp.json().map_err(|e| {
            if e.is_timeout() {
                GatewayError::Timeout(request.timeout)
            } else {
                GatewayError::ProviderUnreachable(format!("unreadable response ({status}): {e}"))
            }
        })?;
        if !status.is_success() {
            return Err(GatewayError::ProviderUnreachable(format!("{status}: {body}")));
        }
        body["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| GatewayError::ProviderUnreachable(format!("no message content in {body}")))
    }
}
