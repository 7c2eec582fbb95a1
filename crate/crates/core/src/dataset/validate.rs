use std::fmt;
use std::path::{Component, Path};

use serde::{Deserialize, Serialize};

use super::types::Instance;

/// Instance invariant that a record breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    EmptyId,
    /// Normal scenarios carry neither query nor answer.
    QueryOnNormal,
    AnswerOnNormal,
    /// Untrustworthy scenarios carry a non-empty query and answer.
    MissingQuery,
    MissingAnswer,
    AskAsGroundTruth,
    InvalidAction,
    ScreenshotPath,
    ScreenshotFormat,
    ScreenshotUnreadable,
    ScreenshotDimsMismatch,
}

impl Rule {
    pub fn as_str(self) -> &'static str {
        match self {
            Rule::EmptyId => "empty-id",
            Rule::QueryOnNormal => "query-on-normal",
            Rule::AnswerOnNormal => "answer-on-normal",
            Rule::MissingQuery => "missing-query",
            Rule::MissingAnswer => "missing-answer",
            Rule::AskAsGroundTruth => "ask-as-ground-truth",
            Rule::InvalidAction => "invalid-action",
            Rule::ScreenshotPath => "screenshot-path",
            Rule::ScreenshotFormat => "screenshot-format",
            Rule::ScreenshotUnreadable => "screenshot-unreadable",
            Rule::ScreenshotDimsMismatch => "screenshot-dims-mismatch",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: &'static str,
    pub rule: Rule,
    pub detail: String,
}

impl Violation {
    fn new(field: &'static str, rule: Rule, detail: impl Into<String>) -> Violation {
        Violation { field, rule, detail: detail.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} ({})", self.field, self.rule, self.detail)
    }
}

/// Checks every file-independent invariant of `inst`.
pub fn validate_instance(inst: &Instance) -> Vec<Violation> {
    let mut out = Vec::new();

    if inst.id.trim().is_empty() {
        out.push(Violation::new("id", Rule::EmptyId, "id must not be blank"));
    }

    if inst.scenario.is_normal() {
        if inst.query.is_some() {
            out.push(Violation::new("query", Rule::QueryOnNormal, "normal scenarios must not carry a query"));
        }
        if inst.answer.is_some() {
            out.push(Violation::new("answer", Rule::AnswerOnNormal, "normal scenarios must not carry an answer"));
        }
    } else {
        let blank = |v: &Option<String>| v.as_deref().is_none_or(|s| s.trim().is_empty());
        if blank(&inst.query) {
            out.push(Violation::new(
                "query",
                Rule::MissingQuery,
                format!("{} scenarios need a non-empty query", inst.scenario),
            ));
        }
        if blank(&inst.answer) {
            out.push(Violation::new(
                "answer",
                Rule::MissingAnswer,
                format!("{} scenarios need a non-empty answer", inst.scenario),
            ));
        }
    }

    if inst.ground_truth_action.is_ask() {
        out.push(Violation::new(
            "ground_truth_action",
            Rule::AskAsGroundTruth,
            "ground truth must operate the GUI, not ASK",
        ));
    } else if let Err(e) = inst.ground_truth_action.validate() {
        out.push(Violation::new("ground_truth_action", Rule::InvalidAction, e.message()));
    }

    let contained = !inst.screenshot.as_os_str().is_empty()
        && inst.screenshot.components().all(|c| matches!(c, Component::Normal(_) | Component::CurDir));
    if !contained {
        out.push(Violation::new(
            "screenshot",
            Rule::ScreenshotPath,
            format!("`{}` must be a relative path inside the dataset root", inst.screenshot.display()),
        ));
    }

    out
}

/// Checks that the screenshot exists under `root`, is PNG or JPEG, and has
/// the declared dimensions.
pub fn check_assets(inst: &Instance, root: &Path) -> Vec<Violation> {
    let path = root.join(&inst.screenshot);
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    if !matches!(ext.as_deref(), Some("png" | "jpg" | "jpeg")) {
        return vec![Violation::new(
            "screenshot",
            Rule::ScreenshotFormat,
            format!("`{}` is not a .png, .jpg or .jpeg file", inst.screenshot.display()),
        )];
    }
    match image::image_dimensions(&path) {
        Ok((w, h)) if w == inst.screen.width() && h == inst.screen.height() => Vec::new(),
        Ok((w, h)) => vec![Violation::new(
            "screen",
            Rule::ScreenshotDimsMismatch,
            format!("declared {} but `{}` is {w}x{h}", inst.screen, inst.screenshot.display()),
        )],
        Err(e) => vec![Violation::new(
            "screenshot",
            Rule::ScreenshotUnreadable,
            format!("`{}`: {e}", path.display()),
        )],
    }
}
