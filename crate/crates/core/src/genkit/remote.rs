//! Generator reached over HTTP with the JSON request/response contract.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::backend::{Capabilities, GenerationRequest, GenerationResponse, GeneratorBackend};
use crate::error::{Error, Result};

/// Environment variable overriding the configured endpoint.
pub const ENDPOINT_ENV: &str = "GENREFINE_REMOTE_ENDPOINT";
/// Environment variable holding the bearer token, if any.
pub const API_KEY_ENV: &str = "GENREFINE_REMOTE_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteGeneratorConfig {
    pub endpoint: String,
    pub timeout_secs: u64,
    pub returns_token_probabilities: bool,
    pub is_deterministic: bool,
    pub concurrent_safe: bool,
}

impl Default for RemoteGeneratorConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://127.0.0.1:8080/generate".into(),
            timeout_secs: 120,
            returns_token_probabilities: false,
            is_deterministic: false,
            concurrent_safe: true,
        }
    }
}

pub struct RemoteGenerator {
    id: String,
    config: RemoteGeneratorConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl RemoteGenerator {
    pub fn new(config: RemoteGeneratorConfig, api_key: Option<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            id: format!("remote:{}", config.endpoint),
            config,
            api_key,
            agent,
        }
    }

    /// Build from config, letting the environment override endpoint and credentials.
    pub fn from_env(mut config: RemoteGeneratorConfig) -> Self {
        if let Ok(endpoint) = std::env::var(ENDPOINT_ENV) {
            config.endpoint = endpoint;
        }
        let key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        Self::new(config, key)
    }
}

impl GeneratorBackend for RemoteGenerator {
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            returns_token_probabilities: self.config.returns_token_probabilities,
            is_deterministic: self.config.is_deterministic,
            concurrent_safe: self.config.concurrent_safe,
        }
    }

    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse> {
        let mut req = self.agent.post(&self.config.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(request).map_err(|e| Error::backend(&self.id, e))?;
        let status = resp.status();
        if !status.is_success() {
            let body = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(Error::backend(&self.id, format!("HTTP {status}: {}", body.trim())));
        }
        let parsed: GenerationResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| Error::backend(&self.id, format!("bad response body: {e}")))?;
        if parsed.texts.is_empty() {
            return Err(Error::backend(&self.id, "response contains no texts"));
        }
        Ok(parsed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::mpsc;

    /// Serve `responses` to consecutive connections; send each request body back.
    fn serve(responses: Vec<(u16, String)>) -> (String, mpsc::Receiver<(String, String)>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/generate", listener.local_addr().unwrap());
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for (status, body) in responses {
                let (mut stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0;
                let mut auth = String::new();
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    let lower = line.to_ascii_lowercase();
                    if let Some(v) = lower.strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                    if lower.starts_with("authorization:") {
                        auth = line.trim().to_string();
                    }
                    if line == "\r\n" {
                        break;
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                tx.send((String::from_utf8(buf).unwrap(), auth)).unwrap();
                write!(
                    stream,
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                )
                .unwrap();
            }
        });
        (url, rx)
    }

    fn request() -> GenerationRequest {
        GenerationRequest {
            prompt: "intent `greeting'".into(),
            max_new_tokens: 32,
            temperature: 0.7,
            seed: 5,
            want_token_probabilities: true,
        }
    }

    #[test]
    fn round_trip_contract() {
        let (url, rx) = serve(vec![(
            200,
            r#"{"texts": ["hi there", "hello"], "token_probabilities": [[0.9, 0.8], [0.7]]}"#.into(),
        )]);
        let g = RemoteGenerator::new(
            RemoteGeneratorConfig {
                endpoint: url,
                returns_token_probabilities: true,
                ..Default::default()
            },
            Some("sekrit".into()),
        );
        let resp = g.generate(&request()).unwrap();
        assert_eq!(resp.texts, ["hi there", "hello"]);
        assert_eq!(resp.token_probabilities.unwrap()[1], vec![0.7]);
        let (body, auth) = rx.recv().unwrap();
        let sent: serde_json::Value = serde_json::from_str(&body).unwrap();
        assert_eq!(sent["prompt"], "intent `greeting'");
        assert_eq!(sent["seed"], 5);
        assert_eq!(sent["want_token_probabilities"], true);
        assert_eq!(sent["max_new_tokens"], 32);
        assert!(auth.ends_with("Bearer sekrit"));
        assert!(g.capabilities().returns_token_probabilities);
    }

    #[test]
    fn http_errors_are_backend_errors() {
        let (url, _rx) = serve(vec![(500, r#"{"error": "overloaded"}"#.into()), (200, r#"{"texts": []}"#.into())]);
        let g = RemoteGenerator::new(
            RemoteGeneratorConfig {
                endpoint: url,
                ..Default::default()
            },
            None,
        );
        match g.generate(&request()) {
            Err(Error::Backend { message, .. }) => assert!(message.contains("500"), "{message}"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(g.generate(&request()), Err(Error::Backend { .. })));
    }
}
