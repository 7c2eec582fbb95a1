use super::{Agent, AgentDecision, AgentError};
use crate::prompt::{PromptBundle, PromptStage};

/// One backend judges and asks; the other acts.
///
/// On the first pass the scenario agent's judgment stands. If it judges the
/// step normal, the action agent supplies the action for that same pass.
/// Every pass that carries an exchange goes to the action agent.
pub struct DualAgent {
    scenario: Box<dyn Agent>,
    action: Box<dyn Agent>,
}

impl DualAgent {
    pub fn new(scenario: Box<dyn Agent>, action: Box<dyn Agent>) -> DualAgent {
        DualAgent { scenario, action }
    }
}

impl Agent for DualAgent {
    fn decide(&self, bundle: &PromptBundle) -> Result<AgentDecision, AgentError> {
        if bundle.stage != PromptStage::First {
            return self.action.decide(bundle);
        }
        let judged = self.scenario.decide(bundle)?;
        if judged.scenario.is_untrustworthy() {
            return Ok(judged);
        }
        let acted = self.action.decide(bundle)?;
        Ok(AgentDecision {
            scenario: judged.scenario,
            action: acted.action,
            raw_output: format!("{}\n---\n{}", judged.raw_output, acted.raw_output),
        })
    }

    fn name(&self) -> String {
        format!("dual({}, {})", self.scenario.name(), self.action.name())
    }
}
