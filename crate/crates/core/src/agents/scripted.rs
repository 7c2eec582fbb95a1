use super::{parse_agent_output, Agent, AgentDecision, AgentError};
use crate::prompt::PromptBundle;

type Script = dyn Fn(&PromptBundle) -> Result<String, AgentError> + Send + Sync;

/// Produces raw model text from a closure and parses it like a real reply.
pub struct ScriptedAgent {
    name: String,
    script: Box<Script>,
}

impl ScriptedAgent {
    pub fn new(
        name: impl Into<String>,
        script: impl Fn(&PromptBundle) -> Result<String, AgentError> + Send + Sync + 'static,
    ) -> ScriptedAgent {
        ScriptedAgent { name: name.into(), script: Box::new(script) }
    }
}

impl Agent for ScriptedAgent {
    fn decide(&self, bundle: &PromptBundle) -> Result<AgentDecision, AgentError> {
        parse_agent_output(&(self.script)(bundle)?)
    }

    fn name(&self) -> String {
        self.name.clone()
    }
}
