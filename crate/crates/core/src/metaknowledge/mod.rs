//! Meta-knowledge decoupling and training-set construction.
//!
//! Each instance yields a scenario-knowledge sample (judge the scenario and
//! pose the query) and an action-knowledge sample (act given the query and
//! answer). [`build_training_set`] orders those samples under one of four
//! arrangements and [`emit_training_file`] writes them as chat records for an
//! external fine-tuning trainer.

mod arrange;
mod emit;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use arrange::{build_training_set, two_stage_sets, Arrangement, TrainingSet};
pub use emit::{
    emit_training_file, emit_training_file_with, read_training_file, render_record, ChatMessage, ContentPart,
    EmitError, EmittedRecord, MessageContent, Role,
};

use crate::action::{parse_action, Action};
use crate::dataset::{Instance, ScenarioType};
use crate::prompt::Exchange;

/// Rendered in place of an absent query.
pub const NO_QUERY: &str = "NONE";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    /// Judge the scenario and pose the query.
    Scenario,
    /// Produce the action given the query and answer.
    Action,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SampleInput {
    pub system_prompt: String,
    pub instruction: String,
    pub screenshot: PathBuf,
    /// Present only on action samples of untrustworthy instances.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exchange: Option<Exchange>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetBody {
    /// `None` renders as [`NO_QUERY`].
    Query(Option<String>),
    Action(Action),
}

/// What the model should emit for a sample.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SampleTarget {
    pub scenario: ScenarioType,
    pub body: TargetBody,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed target text: {0}")]
pub struct TargetParseError(String);

impl SampleTarget {
    /// Two-line text: `Scenario: <label>` then `Query: <q|NONE>` or
    /// `Action: <action>`.
    pub fn render(&self) -> String {
        match &self.body {
            TargetBody::Query(q) => format!("Scenario: {}\nQuery: {}", self.scenario, q.as_deref().unwrap_or(NO_QUERY)),
            TargetBody::Action(a) => format!("Scenario: {}\nAction: {a}", self.scenario),
        }
    }

    pub fn parse(text: &str) -> Result<SampleTarget, TargetParseError> {
        let mut lines = text.lines();
        let scenario = lines
            .next()
            .and_then(|l| l.strip_prefix("Scenario: "))
            .ok_or_else(|| TargetParseError("missing `Scenario:` line".into()))?
            .parse::<ScenarioType>()
            .map_err(|e| TargetParseError(e.to_string()))?;
        let second = lines.next().ok_or_else(|| TargetParseError("missing second line".into()))?;
        if lines.next().is_some() {
            return Err(TargetParseError("more than two lines".into()));
        }
        let body = if let Some(q) = second.strip_prefix("Query: ") {
            TargetBody::Query((q != NO_QUERY).then(|| q.to_string()))
        } else if let Some(a) = second.strip_prefix("Action: ") {
            TargetBody::Action(parse_action(a).map_err(|e| TargetParseError(e.to_string()))?)
        } else {
            return Err(TargetParseError(format!("unexpected line `{second}`")));
        };
        Ok(SampleTarget { scenario, body })
    }
}

impl fmt::Display for SampleTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrainingSample {
    pub source_id: String,
    pub kind: SampleKind,
    pub input: SampleInput,
    pub target: SampleTarget,
}

/// Splits an instance into its scenario sample and its action sample. Both
/// inputs include the screenshot.
pub fn decouple(inst: &Instance) -> (TrainingSample, TrainingSample) {
    let input = |exchange: Option<Exchange>| SampleInput {
        system_prompt: inst.system_prompt.clone(),
        instruction: inst.instruction.clone(),
        screenshot: inst.screenshot.clone(),
        exchange,
    };
    let exchange = if inst.scenario.is_untrustworthy() {
        inst.qa_pair().map(|(q, h)| Exchange::new(q, h))
    } else {
        None
    };
    let scenario_query = if inst.scenario.is_untrustworthy() { inst.query.clone() } else { None };

    let scenario = TrainingSample {
        source_id: inst.id.clone(),
        kind: SampleKind::Scenario,
        input: input(None),
        target: SampleTarget { scenario: inst.scenario, body: TargetBody::Query(scenario_query) },
    };
    let action = TrainingSample {
        source_id: inst.id.clone(),
        kind: SampleKind::Action,
        input: input(exchange),
        target: SampleTarget { scenario: inst.scenario, body: TargetBody::Action(inst.ground_truth_action.clone()) },
    };
    (scenario, action)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PrepError {
    #[error("unknown arrangement `{0}` (expected interleaved, shuffled, rotating or phased)")]
    InvalidArrangement(String),
    #[error("no instances to build a training set from")]
    EmptyInput,
    #[error("epochs must be at least 1")]
    ZeroEpochs,
}

impl FromStr for Arrangement {
    type Err = PrepError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Arrangement::ALL
            .into_iter()
            .find(|a| a.label() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| PrepError::InvalidArrangement(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::ScreenDims;
    use crate::dataset::{Platform, Split};

    fn inst(scenario: ScenarioType) -> Instance {
        let untrustworthy = scenario.is_untrustworthy();
        Instance {
            id: "d".into(),
            platform: Platform::Mobile,
            system_prompt: "P".into(),
            instruction: "Book a flight".into(),
            screenshot: "s.png".into(),
            screen: ScreenDims::new(100, 100).unwrap(),
            scenario,
            ground_truth_action: Action::type_text("Paris").unwrap(),
            query: untrustworthy.then(|| "Which city?".to_string()),
            answer: untrustworthy.then(|| "Paris".to_string()),
            split: Split::Train,
        }
    }

    #[test]
    fn untrustworthy_decoupling() {
        let (d1, d2) = decouple(&inst(ScenarioType::InformationMissing));
        assert_eq!(d1.kind, SampleKind::Scenario);
        assert_eq!(d1.target.scenario, ScenarioType::InformationMissing);
        assert_eq!(d1.target.body, TargetBody::Query(Some("Which city?".into())));
        assert_eq!(d1.input.exchange, None);
        assert_eq!(d2.kind, SampleKind::Action);
        assert_eq!(d2.input.exchange, Some(Exchange::new("Which city?", "Paris")));
        assert_eq!(d2.target.body, TargetBody::Action(Action::type_text("Paris").unwrap()));
        assert_eq!(d1.source_id, "d");
        assert_eq!(d2.source_id, "d");
        assert_eq!(d1.input.screenshot, PathBuf::from("s.png"));
        assert_eq!(d2.input.screenshot, PathBuf::from("s.png"));
    }

    #[test]
    fn normal_decoupling() {
        let (d1, d2) = decouple(&inst(ScenarioType::Normal));
        assert_eq!(d1.target.render(), "Scenario: normal\nQuery: NONE");
        assert_eq!(d2.input.exchange, None);
        assert_eq!(d2.target.render(), "Scenario: normal\nAction: TYPE[Paris]");
    }

    #[test]
    fn decoupling_is_pure() {
        let i = inst(ScenarioType::MultipleChoice);
        assert_eq!(decouple(&i), decouple(&i));
    }

    #[test]
    fn target_text_round_trips() {
        for s in ScenarioType::ALL {
            let (d1, d2) = decouple(&inst(s));
            for t in [d1.target, d2.target] {
                assert_eq!(SampleTarget::parse(&t.render()).unwrap(), t);
            }
        }
        assert!(SampleTarget::parse("Scenario: normal").is_err());
        assert!(SampleTarget::parse("Scenario: weird\nQuery: NONE").is_err());
        assert!(SampleTarget::parse("Scenario: normal\nAction: FOO").is_err());
    }

    #[test]
    fn arrangement_names() {
        assert_eq!("Rotating".parse::<Arrangement>().unwrap(), Arrangement::Rotating);
        assert_eq!("random".parse::<Arrangement>(), Err(PrepError::InvalidArrangement("random".into())));
    }
}
