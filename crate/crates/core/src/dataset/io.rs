use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde_json::{Map, Value};
use thiserror::Error;

use super::types::{Dataset, Instance};
use super::validate::{check_assets, validate_instance};

const FIELDS: [&str; 11] = [
    "id",
    "platform",
    "system_prompt",
    "instruction",
    "screenshot",
    "screen",
    "scenario",
    "ground_truth_action",
    "query",
    "answer",
    "split",
];

/// One schema problem in a dataset file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaViolation {
    /// Position of the record in the file.
    pub index: usize,
    pub id: Option<String>,
    pub field: String,
    pub cause: String,
}

impl fmt::Display for SchemaViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.id {
            Some(id) => write!(f, "instance `{id}` (#{}) field `{}`: {}", self.index, self.field, self.cause),
            None => write!(f, "instance #{} field `{}`: {}", self.index, self.field, self.cause),
        }
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset file not found: {0}")]
    NotFound(PathBuf),
    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path} is not valid JSON: {source}")]
    Syntax { path: PathBuf, source: serde_json::Error },
    #[error("{} schema violation(s); first: {}", .0.len(), .0[0])]
    Schema(Vec<SchemaViolation>),
    #[error("duplicate instance id `{0}`")]
    DuplicateId(String),
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Verify each screenshot exists and matches the declared size.
    pub check_assets: bool,
    /// Used for records whose `system_prompt` is absent or empty.
    pub default_system_prompt: Option<String>,
}

/// Loads and validates a dataset file. Screenshot paths are resolved against
/// the file's directory.
pub fn load_dataset(path: impl AsRef<Path>, check_assets: bool) -> Result<Dataset, DatasetError> {
    load_dataset_with(path, &LoadOptions { check_assets, ..LoadOptions::default() })
}

pub fn load_dataset_with(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<Dataset, DatasetError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| match source.kind() {
        io::ErrorKind::NotFound => DatasetError::NotFound(path.to_path_buf()),
        _ => DatasetError::Io { path: path.to_path_buf(), source },
    })?;
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_dataset(&text, root, opts).map_err(|e| match e {
        ParseFailure::Syntax(source) => DatasetError::Syntax { path: path.to_path_buf(), source },
        ParseFailure::Dataset(e) => e,
    })
}

enum ParseFailure {
    Syntax(serde_json::Error),
    Dataset(DatasetError),
}

/// Parses dataset text already in memory. `root` is the asset directory.
pub fn parse_dataset_str(text: &str, root: impl Into<PathBuf>, opts: &LoadOptions) -> Result<Dataset, DatasetError> {
    parse_dataset(text, root.into(), opts).map_err(|e| match e {
        ParseFailure::Syntax(source) => DatasetError::Syntax { path: PathBuf::from("<memory>"), source },
        ParseFailure::Dataset(e) => e,
    })
}

fn parse_dataset(text: &str, root: PathBuf, opts: &LoadOptions) -> Result<Dataset, ParseFailure> {
    let value: Value = serde_json::from_str(text).map_err(ParseFailure::Syntax)?;
    let Value::Array(records) = value else {
        return Err(ParseFailure::Dataset(DatasetError::Schema(vec![SchemaViolation {
            index: 0,
            id: None,
            field: "<root>".into(),
            cause: "top level must be an array of instance objects".into(),
        }])));
    };

    let mut violations = Vec::new();
    let mut instances = Vec::with_capacity(records.len());
    for (index, record) in records.into_iter().enumerate() {
        match decode_record(index, record, opts) {
            Ok(inst) => {
                let mut found: Vec<_> = validate_instance(&inst);
                if opts.check_assets && found.is_empty() {
                    found.extend(check_assets(&inst, &root));
                }
                violations.extend(found.into_iter().map(|v| SchemaViolation {
                    index,
                    id: Some(inst.id.clone()),
                    field: v.field.to_string(),
                    cause: format!("{} ({})", v.rule, v.detail),
                }));
                instances.push(inst);
            }
            Err(mut errs) => violations.append(&mut errs),
        }
    }
    if !violations.is_empty() {
        return Err(ParseFailure::Dataset(DatasetError::Schema(violations)));
    }

    let mut seen = HashSet::new();
    for inst in &instances {
        if !seen.insert(inst.id.as_str()) {
            return Err(ParseFailure::Dataset(DatasetError::DuplicateId(inst.id.clone())));
        }
    }
    Ok(Dataset { instances, root })
}

fn decode_record(index: usize, record: Value, opts: &LoadOptions) -> Result<Instance, Vec<SchemaViolation>> {
    let Value::Object(mut obj) = record else {
        return Err(vec![SchemaViolation {
            index,
            id: None,
            field: "<record>".into(),
            cause: "instance must be an object".into(),
        }]);
    };
    let id = obj.get("id").and_then(Value::as_str).map(str::to_string);
    let mut errors = Vec::new();
    let mut fail = |field: &str, cause: String| {
        errors.push(SchemaViolation { index, id: id.clone(), field: field.to_string(), cause });
    };

    for key in obj.keys() {
        if !FIELDS.contains(&key.as_str()) {
            fail(key, "unknown field".into());
        }
    }

    macro_rules! required {
        ($name:literal) => {
            match take(&mut obj, $name) {
                Ok(Some(v)) => Some(v),
                Ok(None) => {
                    fail($name, "missing required field".into());
                    None
                }
                Err(e) => {
                    fail($name, e);
                    None
                }
            }
        };
    }
    macro_rules! optional {
        ($name:literal) => {
            match take(&mut obj, $name) {
                Ok(v) => v,
                Err(e) => {
                    fail($name, e);
                    None
                }
            }
        };
    }

    let parsed_id: Option<String> = required!("id");
    let platform = required!("platform");
    let system_prompt: Option<String> = optional!("system_prompt");
    let instruction = required!("instruction");
    let screenshot = required!("screenshot");
    let screen = required!("screen");
    let scenario = required!("scenario");
    let ground_truth_action = required!("ground_truth_action");
    let query = optional!("query");
    let answer = optional!("answer");
    let split = required!("split");

    if !errors.is_empty() {
        return Err(errors);
    }
    let system_prompt = match system_prompt {
        Some(p) if !p.is_empty() => p,
        _ => opts.default_system_prompt.clone().unwrap_or_default(),
    };
    // All required fields are present once `errors` is empty.
    Ok(Instance {
        id: parsed_id.expect("checked"),
        platform: platform.expect("checked"),
        system_prompt,
        instruction: instruction.expect("checked"),
        screenshot: screenshot.expect("checked"),
        screen: screen.expect("checked"),
        scenario: scenario.expect("checked"),
        ground_truth_action: ground_truth_action.expect("checked"),
        query,
        answer,
        split: split.expect("checked"),
    })
}

/// Removes and decodes `key`; JSON `null` counts as absent.
fn take<T: DeserializeOwned>(obj: &mut Map<String, Value>, key: &str) -> Result<Option<T>, String> {
    match obj.remove(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => serde_json::from_value(v).map(Some).map_err(|e| e.to_string()),
    }
}

/// Writes `ds` as a pretty-printed array, preserving instance order.
pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(&ds.instances).expect("instances serialize");
    text.push('\n');
    fs::write(path, text).map_err(|source| DatasetError::Io { path: path.to_path_buf(), source })
}
