use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Agent, AgentDecision, AgentError};
use crate::action::Action;
use crate::dataset::{Instance, ScenarioType};
use crate::prompt::{PromptBundle, PromptStage};

/// Asked when an instance without an annotated query is judged
/// untrustworthy.
const FALLBACK_QUERY: &str = "Could you confirm how I should proceed?";

/// Deterministic perturbations applied by the oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ErrorModel {
    pub seed: u64,
    /// Row per true scenario: probability of each judged label. Rows that
    /// are absent judge correctly.
    pub misjudge: BTreeMap<ScenarioType, BTreeMap<ScenarioType, f64>>,
    /// Each coordinate moves by a uniform integer offset in `[-j, j]`.
    pub coord_jitter: u32,
    /// Probability of replacing the ground-truth action with a wrong one.
    pub wrong_action_rate: f64,
}

impl Default for ErrorModel {
    fn default() -> Self {
        ErrorModel { seed: 0, misjudge: BTreeMap::new(), coord_jitter: 0, wrong_action_rate: 0.0 }
    }
}

impl ErrorModel {
    pub fn zero() -> ErrorModel {
        ErrorModel::default()
    }

    pub fn with_seed(mut self, seed: u64) -> ErrorModel {
        self.seed = seed;
        self
    }

    /// Replaces the row for `truth` with a certain judgment of `judged`.
    pub fn always_judge(mut self, truth: ScenarioType, judged: ScenarioType) -> ErrorModel {
        self.misjudge.insert(truth, BTreeMap::from([(judged, 1.0)]));
        self
    }

    pub fn is_zero(&self) -> bool {
        self.coord_jitter == 0
            && self.wrong_action_rate == 0.0
            && self.misjudge.iter().all(|(truth, row)| row.iter().all(|(j, p)| *p == 0.0 || j == truth))
    }

    pub fn check(&self) -> Result<(), AgentError> {
        let bad = |m: String| Err(AgentError::BadBackendSpec(m));
        if !(0.0..=1.0).contains(&self.wrong_action_rate) {
            return bad(format!("wrong_action_rate {} is outside [0, 1]", self.wrong_action_rate));
        }
        for (truth, row) in &self.misjudge {
            if let Some((label, p)) = row.iter().find(|(_, p)| !(0.0..=1.0).contains(*p)) {
                return bad(format!("misjudge[{truth}][{label}] = {p} is outside [0, 1]"));
            }
            let sum: f64 = row.values().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return bad(format!("misjudge row for {truth} sums to {sum}, not 1"));
            }
        }
        Ok(())
    }

    /// Generator for one (instance, purpose) pair, independent of call order.
    fn rng(&self, stream: &str, id: &str) -> ChaCha8Rng {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update((stream.len() as u64).to_le_bytes());
        hasher.update(stream.as_bytes());
        hasher.update(id.as_bytes());
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&hasher.finalize());
        ChaCha8Rng::from_seed(seed)
    }

    fn judge(&self, inst: &Instance) -> ScenarioType {
        let Some(row) = self.misjudge.get(&inst.scenario) else {
            return inst.scenario;
        };
        let mut draw: f64 = self.rng("judge", &inst.id).random();
        for (label, p) in row {
            if draw < *p {
                return *label;
            }
            draw -= p;
        }
        // Rounding left a sliver of mass; give it to the last nonzero label.
        row.iter().rev().find(|(_, p)| **p > 0.0).map_or(inst.scenario, |(l, _)| *l)
    }

    fn act(&self, inst: &Instance) -> Action {
        let truth = &inst.ground_truth_action;
        let mut rng = self.rng("action", &inst.id);
        if self.wrong_action_rate > 0.0 && rng.random::<f64>() < self.wrong_action_rate {
            return match truth {
                Action::PressBack => Action::PressHome,
                _ => Action::PressBack,
            };
        }
        if self.coord_jitter == 0 {
            return truth.clone();
        }
        let j = i64::from(self.coord_jitter);
        let mut shift = |v: u32, side: u32| {
            let moved = i64::from(v) + rng.random_range(-j..=j);
            moved.clamp(0, i64::from(side.saturating_sub(1))) as u32
        };
        match *truth {
            Action::Click { x, y } => Action::click(shift(x, inst.screen.width()), shift(y, inst.screen.height())),
            Action::LongPress { x, y } => {
                Action::long_press(shift(x, inst.screen.width()), shift(y, inst.screen.height()))
            }
            _ => truth.clone(),
        }
    }
}

/// Answers from the annotations of a fixed set of instances.
#[derive(Debug, Clone)]
pub struct OracleAgent {
    key: HashMap<String, Instance>,
    errors: ErrorModel,
    never_ask: bool,
}

impl OracleAgent {
    pub fn new(instances: impl IntoIterator<Item = Instance>, errors: ErrorModel) -> OracleAgent {
        let key = instances.into_iter().map(|inst| (inst.id.clone(), inst)).collect();
        OracleAgent { key, errors, never_ask: false }
    }

    /// When set, the first pass acts on the ground truth even when the
    /// judgment is untrustworthy.
    pub fn never_ask(mut self, never_ask: bool) -> OracleAgent {
        self.never_ask = never_ask;
        self
    }

    pub fn errors(&self) -> &ErrorModel {
        &self.errors
    }
}

impl Agent for OracleAgent {
    fn decide(&self, bundle: &PromptBundle) -> Result<AgentDecision, AgentError> {
        let inst = self.key.get(&bundle.instance_id).ok_or_else(|| AgentError::UnknownInstance(bundle.instance_id.clone()))?;
        let judged = self.errors.judge(inst);
        let asks = bundle.stage == PromptStage::First && judged.is_untrustworthy() && !self.never_ask;
        let action = if asks {
            let query = inst.query.as_deref().filter(|_| inst.scenario.is_untrustworthy()).unwrap_or(FALLBACK_QUERY);
            Action::ask(query).map_err(|e| AgentError::Unparseable { raw: query.to_string(), reason: e.to_string() })?
        } else {
            self.errors.act(inst)
        };
        Ok(AgentDecision::new(judged, action))
    }

    fn name(&self) -> String {
        if self.errors.is_zero() {
            "oracle".into()
        } else {
            format!("oracle(seed={})", self.errors.seed)
        }
    }
}
