//! Prompt templates and rendering.
//!
//! A template file is a sequence of sections, each introduced by a header
//! line `### <name>`. Section bodies may reference `{instruction}`,
//! `{scenario_label_list}`, `{action_format_help}`, `{query}` and
//! `{answer}`; `{{` and `}}` produce literal braces. The `system` section is
//! used only for instances whose own system prompt is empty.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Instance, ScenarioType};

pub const DEFAULT_TEMPLATES: &str = include_str!("../templates/default.txt");

pub const ACTION_FORMAT_HELP: &str = "\
CLICK[x,y] - tap the screen at pixel (x, y)
TYPE[text] - enter text into the focused input field
SWIPE[UP/DOWN/LEFT/RIGHT] - swipe the screen in one direction
PRESS_BACK - go back to the previous screen
PRESS_HOME - go to the home screen
WAIT - wait for the screen to finish loading
LONG_PRESS[x,y] - press and hold at pixel (x, y)
TASK_COMPLETE[answer] - finish the task, optionally with an answer
ASK[query] - ask the user a clarifying question instead of acting";

pub fn scenario_label_list() -> String {
    ScenarioType::ALL
        .iter()
        .map(|s| {
            let hint = match s {
                ScenarioType::Normal => "nothing prevents acting on the screen directly",
                ScenarioType::EnvironmentAnomaly => "the screen shows a pop-up, error, crash or lost connection",
                ScenarioType::SensitiveAction => "the next step grants permissions, pays, deletes or shares data",
                ScenarioType::InformationMissing => "the task lacks a detail needed to continue",
                ScenarioType::MultipleChoice => "several options fit the task and the user must pick one",
            };
            format!("{} - {hint}", s.label())
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placeholder {
    Instruction,
    ScenarioLabelList,
    ActionFormatHelp,
    Query,
    Answer,
}

impl Placeholder {
    const ALL: [Placeholder; 5] = [
        Placeholder::Instruction,
        Placeholder::ScenarioLabelList,
        Placeholder::ActionFormatHelp,
        Placeholder::Query,
        Placeholder::Answer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Placeholder::Instruction => "instruction",
            Placeholder::ScenarioLabelList => "scenario_label_list",
            Placeholder::ActionFormatHelp => "action_format_help",
            Placeholder::Query => "query",
            Placeholder::Answer => "answer",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("template `{template}` uses unknown placeholder `{{{name}}}`")]
    UnknownPlaceholder { template: String, name: String },
    #[error("template `{template}`: unmatched `{brace}` at byte {position}")]
    Syntax { template: String, brace: char, position: usize },
    #[error("template `{0}` is not defined")]
    MissingTemplate(String),
    #[error("template `{template}` needs `{{{name}}}` but no query/answer exchange was given")]
    MissingExchange { template: String, name: &'static str },
    #[error("duplicate template section `{0}`")]
    DuplicateSection(String),
    #[error("cannot read template file {path}: {message}")]
    Io { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Text(String),
    Slot(Placeholder),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    name: String,
    segments: Vec<Segment>,
}

impl Template {
    pub fn parse(name: &str, source: &str) -> Result<Template, PromptError> {
        let mut segments = Vec::new();
        let mut text = String::new();
        let mut chars = source.char_indices().peekable();
        while let Some((pos, c)) = chars.next() {
            match c {
                '{' if chars.peek().map(|(_, n)| *n) == Some('{') => {
                    chars.next();
                    text.push('{');
                }
                '}' if chars.peek().map(|(_, n)| *n) == Some('}') => {
                    chars.next();
                    text.push('}');
                }
                '{' => {
                    let rest = &source[pos + 1..];
                    let close = rest.find('}').ok_or_else(|| PromptError::Syntax {
                        template: name.to_string(),
                        brace: '{',
                        position: pos,
                    })?;
                    let key = &rest[..close];
                    let slot = Placeholder::ALL.into_iter().find(|p| p.name() == key).ok_or_else(|| {
                        PromptError::UnknownPlaceholder { template: name.to_string(), name: key.to_string() }
                    })?;
                    if !text.is_empty() {
                        segments.push(Segment::Text(std::mem::take(&mut text)));
                    }
                    segments.push(Segment::Slot(slot));
                    for _ in 0..key.chars().count() + 1 {
                        chars.next();
                    }
                }
                '}' => {
                    return Err(PromptError::Syntax { template: name.to_string(), brace: '}', position: pos });
                }
                c => text.push(c),
            }
        }
        if !text.is_empty() {
            segments.push(Segment::Text(text));
        }
        Ok(Template { name: name.to_string(), segments })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn placeholders(&self) -> impl Iterator<Item = Placeholder> + '_ {
        self.segments.iter().filter_map(|s| match s {
            Segment::Slot(p) => Some(*p),
            Segment::Text(_) => None,
        })
    }

    fn render(&self, instruction: &str, exchange: Option<&Exchange>) -> Result<String, PromptError> {
        let mut out = String::new();
        for segment in &self.segments {
            match segment {
                Segment::Text(t) => out.push_str(t),
                Segment::Slot(Placeholder::Instruction) => out.push_str(instruction),
                Segment::Slot(Placeholder::ScenarioLabelList) => out.push_str(&scenario_label_list()),
                Segment::Slot(Placeholder::ActionFormatHelp) => out.push_str(ACTION_FORMAT_HELP),
                Segment::Slot(p @ (Placeholder::Query | Placeholder::Answer)) => {
                    let ex = exchange
                        .ok_or_else(|| PromptError::MissingExchange { template: self.name.clone(), name: p.name() })?;
                    out.push_str(if *p == Placeholder::Query { &ex.query } else { &ex.answer });
                }
            }
        }
        Ok(out)
    }
}

/// Which inference pass a prompt is for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptStage {
    /// Judge the scenario and act or ask.
    First,
    /// Act given the agent's query and the human answer.
    Second,
    /// Single pass with the annotated query/answer already in the prompt.
    QaInjected,
}

impl PromptStage {
    pub fn template_name(self) -> &'static str {
        match self {
            PromptStage::First => "first_pass",
            PromptStage::Second => "second_pass",
            PromptStage::QaInjected => "qa_injected",
        }
    }
}

/// One query/answer round.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Exchange {
    pub query: String,
    pub answer: String,
}

impl Exchange {
    pub fn new(query: impl Into<String>, answer: impl Into<String>) -> Exchange {
        Exchange { query: query.into(), answer: answer.into() }
    }
}

/// Everything a backend sees for one inference call.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub instance_id: String,
    pub stage: PromptStage,
    pub system: String,
    pub user_text: String,
    /// Screenshot path relative to the dataset root.
    pub image: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exchange: Option<Exchange>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    templates: BTreeMap<String, Template>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        TemplateSet::parse(DEFAULT_TEMPLATES).expect("bundled templates are valid")
    }
}

impl TemplateSet {
    pub fn parse(source: &str) -> Result<TemplateSet, PromptError> {
        let mut templates = BTreeMap::new();
        let mut current: Option<(String, Vec<&str>)> = None;
        let mut finish = |section: Option<(String, Vec<&str>)>| -> Result<(), PromptError> {
            if let Some((name, lines)) = section {
                let body = lines.join("\n");
                let template = Template::parse(&name, body.trim_end_matches('\n'))?;
                if templates.insert(name.clone(), template).is_some() {
                    return Err(PromptError::DuplicateSection(name));
                }
            }
            Ok(())
        };
        for line in source.lines() {
            if let Some(name) = line.strip_prefix("### ") {
                finish(current.take())?;
                current = Some((name.trim().to_string(), Vec::new()));
            } else if let Some((_, lines)) = current.as_mut() {
                lines.push(line);
            }
        }
        finish(current)?;
        Ok(TemplateSet { templates })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<TemplateSet, PromptError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| PromptError::Io { path: path.to_path_buf(), message: e.to_string() })?;
        TemplateSet::parse(&text)
    }

    pub fn get(&self, name: &str) -> Option<&Template> {
        self.templates.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }

    /// System text for `inst`: its own prompt, or the `system` section.
    pub fn system_for(&self, inst: &Instance) -> Result<String, PromptError> {
        self.system_text(&inst.system_prompt, &inst.instruction)
    }

    pub fn system_text(&self, system_prompt: &str, instruction: &str) -> Result<String, PromptError> {
        if !system_prompt.trim().is_empty() {
            return Ok(system_prompt.to_string());
        }
        match self.get("system") {
            Some(t) => t.render(instruction, None),
            None => Ok(String::new()),
        }
    }

    /// User text for `stage` without building a full bundle.
    pub fn user_text(
        &self,
        stage: PromptStage,
        instruction: &str,
        exchange: Option<&Exchange>,
    ) -> Result<String, PromptError> {
        let name = stage.template_name();
        let template = self.get(name).ok_or_else(|| PromptError::MissingTemplate(name.to_string()))?;
        template.render(instruction, exchange)
    }

    /// Renders the user text for `stage`. `exchange` feeds `{query}` and
    /// `{answer}` and is carried into the bundle unchanged.
    pub fn render_prompt(
        &self,
        stage: PromptStage,
        inst: &Instance,
        exchange: Option<&Exchange>,
    ) -> Result<PromptBundle, PromptError> {
        Ok(PromptBundle {
            instance_id: inst.id.clone(),
            stage,
            system: self.system_for(inst)?,
            user_text: self.user_text(stage, &inst.instruction, exchange)?,
            image: inst.screenshot.clone(),
            exchange: exchange.cloned(),
        })
    }
}

impl fmt::Display for Placeholder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
