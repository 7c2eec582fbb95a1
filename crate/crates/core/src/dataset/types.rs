use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::action::{Action, ScreenDims};
use crate::error::InvalidValue;

/// Five-way scenario taxonomy. Declaration order is the report column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", try_from = "String")]
pub enum ScenarioType {
    MultipleChoice,
    InformationMissing,
    EnvironmentAnomaly,
    SensitiveAction,
    Normal,
}

impl ScenarioType {
    pub const ALL: [ScenarioType; 5] = [
        ScenarioType::MultipleChoice,
        ScenarioType::InformationMissing,
        ScenarioType::EnvironmentAnomaly,
        ScenarioType::SensitiveAction,
        ScenarioType::Normal,
    ];

    pub const UNTRUSTWORTHY: [ScenarioType; 4] = [
        ScenarioType::MultipleChoice,
        ScenarioType::InformationMissing,
        ScenarioType::EnvironmentAnomaly,
        ScenarioType::SensitiveAction,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ScenarioType::MultipleChoice => "multiple_choice",
            ScenarioType::InformationMissing => "information_missing",
            ScenarioType::EnvironmentAnomaly => "environment_anomaly",
            ScenarioType::SensitiveAction => "sensitive_action",
            ScenarioType::Normal => "normal",
        }
    }

    /// Column header used in reports.
    pub fn abbrev(self) -> &'static str {
        match self {
            ScenarioType::MultipleChoice => "MC",
            ScenarioType::InformationMissing => "IM",
            ScenarioType::EnvironmentAnomaly => "EA",
            ScenarioType::SensitiveAction => "SA",
            ScenarioType::Normal => "NS",
        }
    }

    pub fn is_normal(self) -> bool {
        self == ScenarioType::Normal
    }

    pub fn is_untrustworthy(self) -> bool {
        !self.is_normal()
    }

    pub fn index(self) -> usize {
        ScenarioType::ALL.iter().position(|s| *s == self).expect("listed")
    }
}

impl fmt::Display for ScenarioType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ScenarioType {
    type Err = InvalidValue;

    /// Case-insensitive; accepts the canonical label or the report
    /// abbreviation.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = s.trim();
        ScenarioType::ALL
            .into_iter()
            .find(|t| t.label().eq_ignore_ascii_case(wanted) || t.abbrev().eq_ignore_ascii_case(wanted))
            .ok_or_else(|| InvalidValue::new(format!("unknown scenario type `{wanted}`")))
    }
}

impl TryFrom<String> for ScenarioType {
    type Error = InvalidValue;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Platform {
    Mobile,
    Desktop,
    Web,
    Tablet,
}

impl Platform {
    pub const ALL: [Platform; 4] = [Platform::Mobile, Platform::Desktop, Platform::Web, Platform::Tablet];

    pub fn label(self) -> &'static str {
        match self {
            Platform::Mobile => "mobile",
            Platform::Desktop => "desktop",
            Platform::Web => "web",
            Platform::Tablet => "tablet",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn label(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl FromStr for Split {
    type Err = InvalidValue;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(InvalidValue::new(format!("unknown split `{other}`"))),
        }
    }
}

/// One annotated benchmark step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    pub platform: Platform,
    pub system_prompt: String,
    pub instruction: String,
    /// Relative to the dataset root.
    pub screenshot: PathBuf,
    pub screen: ScreenDims,
    pub scenario: ScenarioType,
    pub ground_truth_action: Action,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
    pub split: Split,
}

impl Instance {
    /// Annotated query and answer, when both are present.
    pub fn qa_pair(&self) -> Option<(&str, &str)> {
        match (&self.query, &self.answer) {
            (Some(q), Some(a)) => Some((q, a)),
            _ => None,
        }
    }
}

/// Ordered instances plus the directory screenshot paths resolve against.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub instances: Vec<Instance>,
    pub root: PathBuf,
}

impl Dataset {
    pub fn new(instances: Vec<Instance>, root: impl Into<PathBuf>) -> Dataset {
        Dataset { instances, root: root.into() }
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Instance> {
        self.instances.iter()
    }

    pub fn get(&self, id: &str) -> Option<&Instance> {
        self.instances.iter().find(|inst| inst.id == id)
    }

    /// Instances carrying the given split label, in order.
    pub fn subset(&self, split: Split) -> Dataset {
        self.retain(|inst| inst.split == split)
    }

    pub fn retain(&self, mut keep: impl FnMut(&Instance) -> bool) -> Dataset {
        Dataset {
            instances: self.instances.iter().filter(|inst| keep(inst)).cloned().collect(),
            root: self.root.clone(),
        }
    }

    pub fn asset_path(&self, inst: &Instance) -> PathBuf {
        self.root.join(&inst.screenshot)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }
}

impl<'a> IntoIterator for &'a Dataset {
    type Item = &'a Instance;
    type IntoIter = std::slice::Iter<'a, Instance>;

    fn into_iter(self) -> Self::IntoIter {
        self.instances.iter()
    }
}
