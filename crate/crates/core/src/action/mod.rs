//! GUI action grammar.
//!
//! Every action has one canonical string form, `NAME` or `NAME[args]`, which
//! is the representation used in dataset files, training files and model
//! outputs:
//!
//! | Action         | Canonical form                |
//! |----------------|-------------------------------|
//! | click          | `CLICK[x,y]`                  |
//! | type text      | `TYPE[text]`                  |
//! | swipe          | `SWIPE[UP/DOWN/LEFT/RIGHT]`   |
//! | back           | `PRESS_BACK`                  |
//! | home           | `PRESS_HOME`                  |
//! | wait           | `WAIT`                        |
//! | long press     | `LONG_PRESS[x,y]`             |
//! | finish         | `TASK_COMPLETE[answer]`       |
//! | clarify        | `ASK[query]`                  |

mod matching;
mod parse;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use matching::{actions_match, text_similarity, MatchConfig, MatchReason, MatchVerdict};
pub use parse::{parse_action, ParseActionError, ParseErrorKind};

use crate::error::InvalidValue;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::Up, Direction::Down, Direction::Left, Direction::Right];

    pub fn token(self) -> &'static str {
        match self {
            Direction::Up => "UP",
            Direction::Down => "DOWN",
            Direction::Left => "LEFT",
            Direction::Right => "RIGHT",
        }
    }

    /// Exact, case-sensitive token lookup.
    pub fn from_token(token: &str) -> Option<Direction> {
        Direction::ALL.into_iter().find(|d| d.token() == token)
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// A GUI operation or the `ASK` meta-action.
///
/// Free-text payloads (`TYPE`, `TASK_COMPLETE`, `ASK`) never contain line
/// breaks, since agent output is parsed line by line. `TYPE` and `ASK` text
/// is also non-empty after trimming. Use the checked constructors
/// ([`Action::type_text`], [`Action::ask`], [`Action::task_complete`]) or
/// [`Action::validate`] before relying on these.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Action {
    Click { x: u32, y: u32 },
    Type { text: String },
    Swipe { direction: Direction },
    PressBack,
    PressHome,
    Wait,
    LongPress { x: u32, y: u32 },
    TaskComplete { answer: String },
    Ask { query: String },
}

/// Discriminant of an [`Action`], used for type comparisons and reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActionKind {
    Click,
    Type,
    Swipe,
    PressBack,
    PressHome,
    Wait,
    LongPress,
    TaskComplete,
    Ask,
}

impl ActionKind {
    pub const ALL: [ActionKind; 9] = [
        ActionKind::Click,
        ActionKind::Type,
        ActionKind::Swipe,
        ActionKind::PressBack,
        ActionKind::PressHome,
        ActionKind::Wait,
        ActionKind::LongPress,
        ActionKind::TaskComplete,
        ActionKind::Ask,
    ];

    /// Grammar keyword.
    pub fn name(self) -> &'static str {
        match self {
            ActionKind::Click => "CLICK",
            ActionKind::Type => "TYPE",
            ActionKind::Swipe => "SWIPE",
            ActionKind::PressBack => "PRESS_BACK",
            ActionKind::PressHome => "PRESS_HOME",
            ActionKind::Wait => "WAIT",
            ActionKind::LongPress => "LONG_PRESS",
            ActionKind::TaskComplete => "TASK_COMPLETE",
            ActionKind::Ask => "ASK",
        }
    }

    pub fn from_name(name: &str) -> Option<ActionKind> {
        ActionKind::ALL.into_iter().find(|k| k.name() == name)
    }
}

impl Action {
    pub fn click(x: u32, y: u32) -> Action {
        Action::Click { x, y }
    }

    pub fn long_press(x: u32, y: u32) -> Action {
        Action::LongPress { x, y }
    }

    pub fn swipe(direction: Direction) -> Action {
        Action::Swipe { direction }
    }

    pub fn type_text(text: impl Into<String>) -> Result<Action, InvalidValue> {
        let action = Action::Type { text: text.into() };
        action.validate()?;
        Ok(action)
    }

    pub fn ask(query: impl Into<String>) -> Result<Action, InvalidValue> {
        let action = Action::Ask { query: query.into() };
        action.validate()?;
        Ok(action)
    }

    pub fn task_complete(answer: impl Into<String>) -> Result<Action, InvalidValue> {
        let action = Action::TaskComplete { answer: answer.into() };
        action.validate()?;
        Ok(action)
    }

    pub fn kind(&self) -> ActionKind {
        match self {
            Action::Click { .. } => ActionKind::Click,
            Action::Type { .. } => ActionKind::Type,
            Action::Swipe { .. } => ActionKind::Swipe,
            Action::PressBack => ActionKind::PressBack,
            Action::PressHome => ActionKind::PressHome,
            Action::Wait => ActionKind::Wait,
            Action::LongPress { .. } => ActionKind::LongPress,
            Action::TaskComplete { .. } => ActionKind::TaskComplete,
            Action::Ask { .. } => ActionKind::Ask,
        }
    }

    pub fn is_ask(&self) -> bool {
        matches!(self, Action::Ask { .. })
    }

    /// The clarifying query, for `ASK`.
    pub fn query(&self) -> Option<&str> {
        match self {
            Action::Ask { query } => Some(query),
            _ => None,
        }
    }

    /// Point targeted by `CLICK` / `LONG_PRESS`.
    pub fn point(&self) -> Option<(u32, u32)> {
        match *self {
            Action::Click { x, y } | Action::LongPress { x, y } => Some((x, y)),
            _ => None,
        }
    }

    /// Checks the payload invariants that the type system does not carry.
    pub fn validate(&self) -> Result<(), InvalidValue> {
        let (field, text, must_be_non_empty) = match self {
            Action::Type { text } => ("text", text.as_str(), true),
            Action::Ask { query } => ("query", query.as_str(), true),
            Action::TaskComplete { answer } => ("answer", answer.as_str(), false),
            _ => return Ok(()),
        };
        if must_be_non_empty && text.trim().is_empty() {
            return Err(InvalidValue::new(format!("{} {field} must not be blank", self.kind().name())));
        }
        if text.contains(['\n', '\r']) {
            return Err(InvalidValue::new(format!("{} {field} must be a single line", self.kind().name())));
        }
        Ok(())
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = self.kind().name();
        match self {
            Action::Click { x, y } | Action::LongPress { x, y } => write!(f, "{name}[{x},{y}]"),
            Action::Type { text } => write!(f, "{name}[{text}]"),
            Action::Swipe { direction } => write!(f, "{name}[{direction}]"),
            Action::TaskComplete { answer } => write!(f, "{name}[{answer}]"),
            Action::Ask { query } => write!(f, "{name}[{query}]"),
            Action::PressBack | Action::PressHome | Action::Wait => f.write_str(name),
        }
    }
}

/// Canonical string form of `action`.
pub fn serialize_action(action: &Action) -> String {
    action.to_string()
}

impl FromStr for Action {
    type Err = ParseActionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_action(s)
    }
}

impl Serialize for Action {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Action {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_action(&text).map_err(serde::de::Error::custom)
    }
}

/// Screen size in pixels; both sides strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawDims")]
pub struct ScreenDims {
    width: u32,
    height: u32,
}

#[derive(Deserialize)]
struct RawDims {
    width: u32,
    height: u32,
}

impl TryFrom<RawDims> for ScreenDims {
    type Error = InvalidValue;

    fn try_from(raw: RawDims) -> Result<Self, Self::Error> {
        ScreenDims::new(raw.width, raw.height)
    }
}

impl ScreenDims {
    pub fn new(width: u32, height: u32) -> Result<ScreenDims, InvalidValue> {
        if width == 0 || height == 0 {
            return Err(InvalidValue::new(format!("screen dimensions must be positive, got {width}x{height}")));
        }
        Ok(ScreenDims { width, height })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }
}

impl fmt::Display for ScreenDims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}
