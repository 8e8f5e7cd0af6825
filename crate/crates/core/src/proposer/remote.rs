//! Chat-completion engine.
//!
//! Requests follow the common `/chat/completions` JSON shape with
//! temperature 0 and a JSON-object response format. Replies are decoded
//! against strict schemas; a reply that does not fit is retried like a
//! transport failure. The bearer token is read from an environment
//! variable and never written to the transcript.

use std::sync::Mutex;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    mechanism_of, Direction, EditKind, EditProposal, Exchange, Mechanism, MechanismClaim,
    MechanismSummary, Nomination, ProposalEngine, ProposerError, SpecProposal, Strength,
    TermEffect,
};
use crate::estim::FitResult;
use crate::gof::GofReport;
use crate::network::{Diagnostics, Metadata};
use crate::terms::{parse_lenient, ModelSpec, Term};

pub const PROMPT_TERMS: &str = include_str!("../../prompts/terms.txt");
pub const PROMPT_SPECS: &str = include_str!("../../prompts/specs.txt");
pub const PROMPT_EDIT: &str = include_str!("../../prompts/edit.txt");
pub const PROMPT_SYNTHESIS: &str = include_str!("../../prompts/synthesis.txt");

/// Environment variable holding the bearer token.
pub const DEFAULT_TOKEN_ENV: &str = "ERGM_SEARCH_API_KEY";

const SYSTEM: &str = "You are a careful network statistician. Answer with a single JSON object that follows the requested schema exactly.";

/// Replaces every `{{name}}` placeholder.
pub fn render_template(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = template.to_owned();
    for (k, v) in vars {
        out = out.replace(&format!("{{{{{k}}}}}"), v);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseFormat {
    #[serde(rename = "type")]
    pub kind: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub temperature: f64,
    pub response_format: ResponseFormat,
    pub messages: Vec<ChatMessage>,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChatMessage,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error("request failed: {0}")]
    Network(String),
    #[error("HTTP status {status}: {body}")]
    Status { status: u16, body: String },
}

/// Sends one serialized request body and returns the raw response body.
pub trait ChatTransport: Send + Sync {
    fn send(&self, body: &str) -> Result<String, TransportError>;
}

impl<F> ChatTransport for F
where
    F: Fn(&str) -> Result<String, TransportError> + Send + Sync,
{
    fn send(&self, body: &str) -> Result<String, TransportError> {
        self(body)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub model: String,
    pub token_env: String,
    pub max_attempts: u32,
    /// First retry delay; doubled on each further retry.
    pub backoff_ms: u64,
    pub timeout_secs: u64,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        RemoteConfig {
            endpoint: endpoint.into(),
            model: model.into(),
            token_env: DEFAULT_TOKEN_ENV.to_owned(),
            max_attempts: 3,
            backoff_ms: 500,
            timeout_secs: 120,
        }
    }
}

/// Blocking HTTP transport.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
    endpoint: String,
    token: Option<String>,
}

impl HttpTransport {
    pub fn new(
        endpoint: &str,
        token: Option<String>,
        timeout: Duration,
    ) -> Result<Self, ProposerError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ProposerError::Transport(e.to_string()))?;
        Ok(HttpTransport {
            client,
            endpoint: endpoint.to_owned(),
            token,
        })
    }

    /// Reads the token from `config.token_env`; a missing variable means no
    /// `Authorization` header, which suits local servers.
    pub fn from_config(config: &RemoteConfig) -> Result<Self, ProposerError> {
        let token = std::env::var(&config.token_env)
            .ok()
            .filter(|t| !t.is_empty());
        HttpTransport::new(
            &config.endpoint,
            token,
            Duration::from_secs(config.timeout_secs),
        )
    }
}

impl ChatTransport for HttpTransport {
    fn send(&self, body: &str) -> Result<String, TransportError> {
        let mut req = self
            .client
            .post(&self.endpoint)
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(body.to_owned());
        if let Some(t) = &self.token {
            req = req.bearer_auth(t);
        }
        let resp = req
            .send()
            .map_err(|e| TransportError::Network(e.without_url().to_string()))?;
        let status = resp.status();
        let text = resp
            .text()
            .map_err(|e| TransportError::Network(e.to_string()))?;
        if status.is_success() {
            Ok(text)
        } else {
            Err(TransportError::Status {
                status: status.as_u16(),
                body: text,
            })
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TermsReply {
    nominations: Vec<NominationWire>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NominationWire {
    term: String,
    mechanism: String,
    justification: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecsReply {
    specifications: Vec<SpecWire>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecWire {
    spec_id: String,
    included_terms: Vec<String>,
    formation_interpretation: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EditReply {
    edit_type: EditKind,
    #[serde(default)]
    term_removed: Option<String>,
    #[serde(default)]
    term_added: Option<String>,
    rationale: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SynthesisReply {
    mechanisms: Vec<ClaimWire>,
    summary: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ClaimWire {
    mechanism: String,
    direction: Direction,
    strength: Strength,
    terms: Vec<String>,
}

pub struct RemoteEngine<T: ChatTransport = HttpTransport> {
    config: RemoteConfig,
    transport: T,
    log: Mutex<Vec<Exchange>>,
}

impl RemoteEngine<HttpTransport> {
    pub fn from_config(config: RemoteConfig) -> Result<Self, ProposerError> {
        let transport = HttpTransport::from_config(&config)?;
        Ok(RemoteEngine::new(config, transport))
    }
}

fn theta_lines(spec: &ModelSpec, theta: &[f64]) -> String {
    spec.names()
        .iter()
        .zip(theta)
        .map(|(n, t)| format!("{n} = {t:.4}"))
        .collect::<Vec<_>>()
        .join("\n")
}

fn term_lines(terms: &[Term]) -> String {
    terms
        .iter()
        .map(Term::to_string)
        .collect::<Vec<_>>()
        .join("\n")
}

fn json<T: Serialize>(x: &T) -> String {
    serde_json::to_string_pretty(x).expect("plain data serializes")
}

impl<T: ChatTransport> RemoteEngine<T> {
    pub fn new(config: RemoteConfig, transport: T) -> Self {
        RemoteEngine {
            config,
            transport,
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn request(&self, prompt: String) -> String {
        let req = ChatRequest {
            model: self.config.model.clone(),
            temperature: 0.0,
            response_format: ResponseFormat {
                kind: "json_object".into(),
            },
            messages: vec![
                ChatMessage {
                    role: "system".into(),
                    content: SYSTEM.into(),
                },
                ChatMessage {
                    role: "user".into(),
                    content: prompt,
                },
            ],
        };
        serde_json::to_string(&req).expect("plain data serializes")
    }

    /// Sends `prompt`, decodes the reply with `decode`, retrying on any failure.
    fn ask<R, O>(
        &self,
        role: &str,
        prompt: String,
        decode: impl Fn(R) -> Result<O, String>,
    ) -> Result<O, ProposerError>
    where
        R: DeserializeOwned,
    {
        let body = self.request(prompt);
        let attempts = self.config.max_attempts.max(1);
        let mut last = String::new();
        for attempt in 1..=attempts {
            if attempt > 1 {
                let wait = self
                    .config
                    .backoff_ms
                    .saturating_mul(1 << (attempt - 2).min(16));
                std::thread::sleep(Duration::from_millis(wait));
            }
            let (response, outcome) = match self.transport.send(&body) {
                Err(e) => (None, Err(e.to_string())),
                Ok(text) => {
                    let decoded = serde_json::from_str::<ChatResponse>(&text)
                        .map_err(|e| format!("envelope: {e}"))
                        .and_then(|r| {
                            r.choices
                                .into_iter()
                                .next()
                                .map(|c| c.message.content)
                                .ok_or_else(|| "no choices in response".to_owned())
                        })
                        .and_then(|content| {
                            serde_json::from_str::<R>(&content).map_err(|e| format!("content: {e}"))
                        })
                        .and_then(&decode);
                    (Some(text), decoded)
                }
            };
            let error = outcome.as_ref().err().cloned();
            self.log.lock().unwrap().push(Exchange {
                role: role.to_owned(),
                attempt,
                request: body.clone(),
                response,
                error: error.clone(),
            });
            match outcome {
                Ok(v) => return Ok(v),
                Err(e) => last = e,
            }
        }
        Err(ProposerError::Exhausted { attempts, last })
    }
}

impl<T: ChatTransport> ProposalEngine for RemoteEngine<T> {
    fn id(&self) -> String {
        format!("remote:{}", self.config.model)
    }

    fn propose_terms(
        &self,
        diagnostics: &Diagnostics,
        metadata: &Metadata,
        query: &str,
    ) -> Result<Vec<Nomination>, ProposerError> {
        let prompt = render_template(
            PROMPT_TERMS,
            &[
                ("Q", query),
                ("d_G", &json(diagnostics)),
                ("m_G", &json(metadata)),
            ],
        );
        self.ask("terms", prompt, |r: TermsReply| {
            Ok(r.nominations
                .into_iter()
                .map(|n| Nomination {
                    term: n.term,
                    mechanism: n.mechanism,
                    justification: n.justification,
                })
                .collect())
        })
    }

    fn propose_specs(
        &self,
        admissible: &[Term],
        diagnostics: &Diagnostics,
        query: &str,
    ) -> Result<Vec<SpecProposal>, ProposerError> {
        let prompt = render_template(
            PROMPT_SPECS,
            &[
                ("Q", query),
                ("d_G", &json(diagnostics)),
                ("admissible", &term_lines(admissible)),
            ],
        );
        self.ask("specs", prompt, |r: SpecsReply| {
            Ok(r.specifications
                .into_iter()
                .map(|s| SpecProposal {
                    id: s.spec_id,
                    terms: s.included_terms,
                    rationale: s.formation_interpretation,
                })
                .collect())
        })
    }

    fn propose_edit(
        &self,
        spec: &ModelSpec,
        fit: &FitResult,
        gof: &GofReport,
        admissible: &[Term],
    ) -> Result<EditProposal, ProposerError> {
        let prompt = render_template(
            PROMPT_EDIT,
            &[
                ("spec", &spec.to_string()),
                ("theta", &theta_lines(spec, &fit.theta)),
                ("gof_table", &gof.to_tsv()),
                ("admissible", &term_lines(admissible)),
            ],
        );
        self.ask("edit", prompt, |r: EditReply| {
            let shape_ok = match r.edit_type {
                EditKind::Add => r.term_added.is_some() && r.term_removed.is_none(),
                EditKind::Remove => r.term_removed.is_some() && r.term_added.is_none(),
                EditKind::Replace => r.term_removed.is_some() && r.term_added.is_some(),
            };
            if !shape_ok {
                return Err(format!("{:?} edit with the wrong term fields", r.edit_type));
            }
            Ok(EditProposal {
                kind: r.edit_type,
                removed: r.term_removed,
                added: r.term_added,
                rationale: r.rationale,
            })
        })
    }

    fn synthesize(
        &self,
        spec: &ModelSpec,
        theta: &[f64],
        metadata: &Metadata,
    ) -> Result<MechanismSummary, ProposerError> {
        let prompt = render_template(
            PROMPT_SYNTHESIS,
            &[
                ("m_G", &json(metadata)),
                ("spec", &spec.to_string()),
                ("theta", &theta_lines(spec, theta)),
            ],
        );
        let summary = self.ask("synthesis", prompt, |r: SynthesisReply| {
            let mut claims = Vec::new();
            for c in r.mechanisms {
                let mechanism = Mechanism::from_name(&c.mechanism)
                    .ok_or_else(|| format!("unknown mechanism `{}`", c.mechanism))?;
                let terms = c
                    .terms
                    .iter()
                    .filter_map(|raw| parse_lenient(raw).ok())
                    .filter_map(|t| {
                        let k = spec.position(&t)?;
                        (mechanism_of(t.family()) == mechanism).then(|| TermEffect {
                            term: t.to_string(),
                            coefficient: theta[k],
                            direction: Direction::of(theta[k]),
                            strength: Strength::of(theta[k]),
                        })
                    })
                    .collect();
                claims.push(MechanismClaim {
                    mechanism,
                    direction: Some(c.direction),
                    strength: Some(c.strength),
                    terms,
                });
            }
            Ok(MechanismSummary {
                claims,
                text: r.summary,
            })
        })?;
        Ok(summary.filtered(spec))
    }

    fn transcript(&self) -> Vec<Exchange> {
        self.log.lock().unwrap().clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn envelope(content: &str) -> String {
        serde_json::json!({"choices": [{"message": {"role": "assistant", "content": content}}]})
            .to_string()
    }

    fn config() -> RemoteConfig {
        RemoteConfig {
            backoff_ms: 0,
            ..RemoteConfig::new("http://unused", "test-model")
        }
    }

    #[test]
    fn templates_have_placeholders() {
        assert!(
            PROMPT_TERMS.contains("{{Q}}")
                && PROMPT_TERMS.contains("{{d_G}}")
                && PROMPT_TERMS.contains("{{m_G}}")
        );
        assert!(PROMPT_SPECS.contains("{{admissible}}"));
        assert!(PROMPT_EDIT.contains("{{gof_table}}") && PROMPT_EDIT.contains("{{spec}}"));
        assert!(PROMPT_SYNTHESIS.contains("{{theta}}"));
        let r = render_template("a {{Q}} b {{Q}} {{x}}", &[("Q", "q")]);
        assert_eq!(r, "a q b q {{x}}");
    }

    #[test]
    fn request_shape() {
        let seen = Mutex::new(String::new());
        let engine = RemoteEngine::new(config(), |body: &str| {
            *seen.lock().unwrap() = body.to_owned();
            Ok(envelope(r#"{"specifications": []}"#))
        });
        let net = crate::network::Network::empty(3, false);
        engine
            .propose_specs(&[Term::Edges], &net.diagnostics(), "friends")
            .unwrap();
        let v: serde_json::Value = serde_json::from_str(&seen.lock().unwrap()).unwrap();
        assert_eq!(v["temperature"], 0.0);
        assert_eq!(v["response_format"]["type"], "json_object");
        assert_eq!(v["model"], "test-model");
        assert!(v["messages"][1]["content"]
            .as_str()
            .unwrap()
            .contains("friends"));
    }

    #[test]
    fn malformed_then_valid() {
        let calls = AtomicUsize::new(0);
        let engine = RemoteEngine::new(config(), |_: &str| {
            Ok(match calls.fetch_add(1, Ordering::SeqCst) {
                0 => envelope("not json"),
                1 => envelope(r#"{"nominations": [{"term": "edges"}]}"#),
                _ => envelope(
                    r#"{"nominations": [{"term": "edges", "mechanism": "baseline", "justification": "-"}]}"#,
                ),
            })
        });
        let net = crate::network::Network::empty(3, false);
        let noms = engine
            .propose_terms(&net.diagnostics(), &net.metadata(), "")
            .unwrap();
        assert_eq!(noms.len(), 1);
        let log = engine.transcript();
        assert_eq!(log.len(), 3);
        assert!(log[0].error.is_some() && log[1].error.is_some() && log[2].error.is_none());
    }

    #[test]
    fn gives_up() {
        let engine = RemoteEngine::new(config(), |_: &str| {
            Err(TransportError::Network("down".into()))
        });
        let net = crate::network::Network::empty(3, false);
        let err = engine
            .propose_terms(&net.diagnostics(), &net.metadata(), "")
            .unwrap_err();
        assert!(matches!(err, ProposerError::Exhausted { attempts: 3, .. }));
    }

    #[test]
    fn edit_shape_is_checked() {
        let engine = RemoteEngine::new(config(), |_: &str| {
            Ok(envelope(
                r#"{"edit_type": "add", "term_removed": "edges", "term_added": "mutual", "rationale": ""}"#,
            ))
        });
        let spec = ModelSpec::new(vec![Term::Edges]);
        let fit = crate::estim::fit_mple(
            &spec,
            &crate::network::Network::from_edges(3, false, [(0, 1)]).unwrap(),
        )
        .unwrap();
        let gof = GofReport {
            groups: vec![],
            max_abs_z: 0.0,
            tau: 2.5,
            adequate: true,
            sim_edge_mean: 1.0,
            observed_edges: 1,
            degenerate: false,
            draws_used: 1,
        };
        assert!(engine
            .propose_edit(&spec, &fit, &gof, &[Term::Edges])
            .is_err());
    }

    #[test]
    fn synthesis_is_filtered() {
        let engine = RemoteEngine::new(config(), |_: &str| {
            Ok(envelope(
                r#"{"mechanisms": [
                    {"mechanism": "closure", "direction": "increases", "strength": "strong", "terms": ["gwesp(0.5)"]},
                    {"mechanism": "reciprocity", "direction": "increases", "strength": "weak", "terms": ["mutual"]}
                ], "summary": "text"}"#,
            ))
        });
        let spec = ModelSpec::parse("edges, gwesp(decay=0.5)").unwrap();
        let net = crate::network::Network::empty(3, false);
        let s = engine
            .synthesize(&spec, &[-2.0, 1.2], &net.metadata())
            .unwrap();
        assert_eq!(s.mechanisms(), vec![Mechanism::Closure]);
        assert_eq!(s.claims[0].terms[0].coefficient, 1.2);
    }
}
