use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{SampleKind, SampleTarget, TrainingSample, TrainingSet};
use crate::prompt::{PromptError, PromptStage, TemplateSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ContentPart {
    /// Relative screenshot path; the image itself is not inlined.
    Image { image: String },
    Text { text: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MessageContent {
    Text(String),
    Parts(Vec<ContentPart>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: MessageContent,
}

/// One line of a training file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmittedRecord {
    pub source_id: String,
    pub kind: SampleKind,
    pub messages: Vec<ChatMessage>,
}

impl EmittedRecord {
    pub fn assistant_text(&self) -> Option<&str> {
        self.messages.iter().find(|m| m.role == Role::Assistant).and_then(|m| match &m.content {
            MessageContent::Text(t) => Some(t.as_str()),
            MessageContent::Parts(_) => None,
        })
    }

    pub fn target(&self) -> Option<SampleTarget> {
        self.assistant_text().and_then(|t| SampleTarget::parse(t).ok())
    }
}

#[derive(Debug, Error)]
pub enum EmitError {
    #[error("training set is empty")]
    Empty,
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path} line {line}: {message}")]
    Malformed { path: PathBuf, line: usize, message: String },
}

/// Three-message chat transcript for one sample.
pub fn render_record(sample: &TrainingSample, templates: &TemplateSet) -> Result<EmittedRecord, PromptError> {
    let input = &sample.input;
    let stage = if sample.kind == SampleKind::Action && input.exchange.is_some() {
        PromptStage::Second
    } else {
        PromptStage::First
    };
    let user_text = templates.user_text(stage, &input.instruction, input.exchange.as_ref())?;
    let image = input.screenshot.to_string_lossy().replace('\\', "/");
    Ok(EmittedRecord {
        source_id: sample.source_id.clone(),
        kind: sample.kind,
        messages: vec![
            ChatMessage {
                role: Role::System,
                content: MessageContent::Text(templates.system_text(&input.system_prompt, &input.instruction)?),
            },
            ChatMessage {
                role: Role::User,
                content: MessageContent::Parts(vec![ContentPart::Image { image }, ContentPart::Text { text: user_text }]),
            },
            ChatMessage { role: Role::Assistant, content: MessageContent::Text(sample.target.render()) },
        ],
    })
}

/// Writes one JSON chat record per line using the bundled templates.
/// Returns the number of records written.
pub fn emit_training_file(ts: &TrainingSet, path: impl AsRef<Path>) -> Result<usize, EmitError> {
    emit_training_file_with(ts, &TemplateSet::default(), path)
}

pub fn emit_training_file_with(
    ts: &TrainingSet,
    templates: &TemplateSet,
    path: impl AsRef<Path>,
) -> Result<usize, EmitError> {
    if ts.is_empty() {
        return Err(EmitError::Empty);
    }
    let path = path.as_ref();
    let io_err = |source| EmitError::Io { path: path.to_path_buf(), source };
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    for sample in &ts.samples {
        let record = render_record(sample, templates)?;
        serde_json::to_writer(&mut out, &record).map_err(|e| io_err(e.into()))?;
        out.write_all(b"\n").map_err(io_err)?;
    }
    out.flush().map_err(io_err)?;
    Ok(ts.len())
}

pub fn read_training_file(path: impl AsRef<Path>) -> Result<Vec<EmittedRecord>, EmitError> {
    let path = path.as_ref();
    let io_err = |source| EmitError::Io { path: path.to_path_buf(), source };
    let reader = BufReader::new(File::open(path).map_err(io_err)?);
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        let record = serde_json::from_str(&line).map_err(|e| EmitError::Malformed {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(records)
}
