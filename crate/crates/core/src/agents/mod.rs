//! Agent backends.
//!
//! An [`Agent`] turns a [`PromptBundle`] into an [`AgentDecision`]. The
//! oracle answers from annotations (optionally perturbed by an
//! [`ErrorModel`]), the remote agent calls a chat-completions endpoint, and
//! [`DualAgent`] splits judging from acting across two backends.

mod dual;
mod oracle;
mod output;
mod remote;
mod scripted;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dual::DualAgent;
pub use oracle::{ErrorModel, OracleAgent};
pub use output::parse_agent_output;
pub use remote::{RemoteAgent, RemoteConfig, ENV_API_BASE, ENV_API_KEY, ENV_MODEL};
pub use scripted::ScriptedAgent;

use crate::action::Action;
use crate::dataset::{Dataset, ScenarioType};
use crate::prompt::PromptBundle;

/// A parsed model reply: the judged scenario and the emitted action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentDecision {
    pub scenario: ScenarioType,
    pub action: Action,
    pub raw_output: String,
}

impl AgentDecision {
    pub fn new(scenario: ScenarioType, action: Action) -> AgentDecision {
        let raw_output = format!("Scenario: {scenario}\nAction: {action}");
        AgentDecision { scenario, action, raw_output }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgentError {
    #[error("endpoint unreachable: {0}")]
    EndpointUnreachable(String),
    #[error("endpoint returned status {status}: {body_excerpt}")]
    EndpointError { status: u16, body_excerpt: String },
    #[error("unparseable output ({reason}): {raw:?}")]
    Unparseable { raw: String, reason: String },
    #[error("unknown instance `{0}`")]
    UnknownInstance(String),
    #[error("cannot read screenshot {path}: {message}")]
    Asset { path: PathBuf, message: String },
    #[error("bad backend spec: {0}")]
    BadBackendSpec(String),
}

impl AgentError {
    /// Machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            AgentError::EndpointUnreachable(_) => "endpoint-unreachable",
            AgentError::EndpointError { .. } => "endpoint-error",
            AgentError::Unparseable { .. } => "unparseable-output",
            AgentError::UnknownInstance(_) => "unknown-instance",
            AgentError::Asset { .. } => "asset-error",
            AgentError::BadBackendSpec(_) => "bad-backend-spec",
        }
    }
}

pub trait Agent: Send + Sync {
    fn decide(&self, bundle: &PromptBundle) -> Result<AgentDecision, AgentError>;

    /// Short descriptor used in reports.
    fn name(&self) -> String;
}

impl<A: Agent + ?Sized> Agent for Box<A> {
    fn decide(&self, bundle: &PromptBundle) -> Result<AgentDecision, AgentError> {
        (**self).decide(bundle)
    }

    fn name(&self) -> String {
        (**self).name()
    }
}

impl<A: Agent + ?Sized> Agent for Arc<A> {
    fn decide(&self, bundle: &PromptBundle) -> Result<AgentDecision, AgentError> {
        (**self).decide(bundle)
    }

    fn name(&self) -> String {
        (**self).name()
    }
}

/// How the interaction loop drives the agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", try_from = "String")]
pub enum Mode {
    /// Judge, ask when needed, then act on the answer.
    #[default]
    QueryDriven,
    /// Act directly; no answers are ever solicited.
    Autonomous,
    /// Single pass with the annotated query and answer already in the prompt.
    QaInjected,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::QueryDriven, Mode::Autonomous, Mode::QaInjected];

    pub fn label(self) -> &'static str {
        match self {
            Mode::QueryDriven => "query_driven",
            Mode::Autonomous => "autonomous",
            Mode::QaInjected => "qa_injected",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Mode {
    type Err = AgentError;

    /// Accepts `query`, `query-driven`, `autonomous`, `qa-injected` and the
    /// snake_case labels.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "query" | "query_driven" => Ok(Mode::QueryDriven),
            "autonomous" => Ok(Mode::Autonomous),
            "qa_injected" => Ok(Mode::QaInjected),
            _ => Err(AgentError::BadBackendSpec(format!("unknown mode `{s}`"))),
        }
    }
}

impl TryFrom<String> for Mode {
    type Error = AgentError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendVariant {
    Oracle {
        #[serde(default)]
        errors: ErrorModel,
        /// Act on the ground truth instead of asking.
        #[serde(default)]
        never_ask: bool,
    },
    Remote(RemoteConfig),
    Dual { scenario: Box<BackendVariant>, action: Box<BackendVariant> },
}

impl BackendVariant {
    /// Applies [`RemoteConfig::resolve_env`] to every remote part.
    pub fn resolve_env(self) -> BackendVariant {
        match self {
            BackendVariant::Remote(cfg) => BackendVariant::Remote(cfg.resolve_env()),
            BackendVariant::Dual { scenario, action } => BackendVariant::Dual {
                scenario: Box::new(scenario.resolve_env()),
                action: Box::new(action.resolve_env()),
            },
            oracle => oracle,
        }
    }
}

/// Serializable description of a backend plus the mode it runs in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendSpec {
    #[serde(flatten)]
    pub variant: BackendVariant,
    #[serde(default)]
    pub mode: Mode,
}

impl BackendSpec {
    pub fn oracle() -> BackendSpec {
        BackendSpec {
            variant: BackendVariant::Oracle { errors: ErrorModel::default(), never_ask: false },
            mode: Mode::QueryDriven,
        }
    }

    pub fn with_mode(mut self, mode: Mode) -> BackendSpec {
        self.mode = mode;
        self
    }

    /// Instantiates the backend. Oracles read their answer key from
    /// `dataset`; remote agents resolve screenshots against its root.
    pub fn build(&self, dataset: &Dataset) -> Result<Box<dyn Agent>, AgentError> {
        build_variant(&self.variant, dataset, false)
    }
}

fn build_variant(variant: &BackendVariant, dataset: &Dataset, nested: bool) -> Result<Box<dyn Agent>, AgentError> {
    match variant {
        BackendVariant::Oracle { errors, never_ask } => {
            errors.check()?;
            Ok(Box::new(OracleAgent::new(dataset.iter().cloned(), errors.clone()).never_ask(*never_ask)))
        }
        BackendVariant::Remote(cfg) => Ok(Box::new(RemoteAgent::new(cfg.clone(), dataset.root())?)),
        BackendVariant::Dual { .. } if nested => {
            Err(AgentError::BadBackendSpec("a dual backend cannot contain another dual backend".into()))
        }
        BackendVariant::Dual { scenario, action } => Ok(Box::new(DualAgent::new(
            build_variant(scenario, dataset, true)?,
            build_variant(action, dataset, true)?,
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_json_shapes() {
        let spec: BackendSpec = serde_json::from_str(r#"{"kind":"oracle"}"#).unwrap();
        assert_eq!(spec, BackendSpec::oracle());

        let spec: BackendSpec = serde_json::from_str(
            r#"{"kind":"dual","mode":"qa_injected","scenario":{"kind":"oracle"},"action":{"kind":"oracle","never_ask":true}}"#,
        )
        .unwrap();
        assert_eq!(spec.mode, Mode::QaInjected);
        assert!(matches!(spec.variant, BackendVariant::Dual { .. }));
        let back: BackendSpec = serde_json::from_value(serde_json::to_value(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn nested_dual_is_rejected() {
        let oracle = || Box::new(BackendVariant::Oracle { errors: ErrorModel::default(), never_ask: false });
        let inner = BackendVariant::Dual { scenario: oracle(), action: oracle() };
        let spec = BackendSpec {
            variant: BackendVariant::Dual { scenario: Box::new(inner), action: oracle() },
            mode: Mode::QueryDriven,
        };
        let err = spec.build(&Dataset::new(Vec::new(), ".")).err().unwrap();
        assert_eq!(err.code(), "bad-backend-spec");
    }

    #[test]
    fn mode_names() {
        assert_eq!("query".parse::<Mode>().unwrap(), Mode::QueryDriven);
        assert_eq!("qa-injected".parse::<Mode>().unwrap(), Mode::QaInjected);
        assert_eq!("Autonomous".parse::<Mode>().unwrap(), Mode::Autonomous);
        assert!("manual".parse::<Mode>().is_err());
        for m in Mode::ALL {
            assert_eq!(m.label().parse::<Mode>().unwrap(), m);
        }
    }
}
