use thiserror::Error;

use super::{Action, ActionKind, Direction};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("empty action string")]
    Empty,
    #[error("unknown action name `{0}`")]
    UnknownName(String),
    #[error("unbalanced brackets")]
    UnbalancedBrackets,
    #[error("unexpected characters after closing bracket")]
    TrailingCharacters,
    #[error("{name} takes {expected} argument(s), found {found}")]
    WrongArity { name: &'static str, expected: usize, found: usize },
    #[error("coordinate `{0}` is not a non-negative integer")]
    InvalidCoordinate(String),
    #[error("unknown swipe direction `{0}` (expected UP, DOWN, LEFT or RIGHT)")]
    UnknownDirection(String),
    #[error("{0} argument must not be blank")]
    BlankArgument(&'static str),
    #[error("{0} argument must be a single line")]
    MultilineArgument(&'static str),
}

/// Malformed action string. `position` is a byte offset into the input.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed action at byte {position}: {kind}")]
pub struct ParseActionError {
    pub position: usize,
    pub kind: ParseErrorKind,
}

fn err(position: usize, kind: ParseErrorKind) -> ParseActionError {
    ParseActionError { position, kind }
}

/// Parses the canonical `NAME` / `NAME[args]` form. Whitespace around the
/// whole string is ignored; names are case-sensitive.
pub fn parse_action(input: &str) -> Result<Action, ParseActionError> {
    let start = input.len() - input.trim_start().len();
    let body = input.trim();
    if body.is_empty() {
        return Err(err(0, ParseErrorKind::Empty));
    }

    let (name, args) = match body.find('[') {
        Some(open) => {
            let rest = &body[open + 1..];
            let Some(inner) = rest.strip_suffix(']') else {
                return Err(match rest.rfind(']') {
                    Some(close) => err(start + open + 1 + close + 1, ParseErrorKind::TrailingCharacters),
                    None => err(start + body.len(), ParseErrorKind::UnbalancedBrackets),
                });
            };
            (&body[..open], Some((start + open + 1, inner)))
        }
        None => {
            if let Some(close) = body.find(']') {
                return Err(err(start + close, ParseErrorKind::UnbalancedBrackets));
            }
            (body, None)
        }
    };

    let kind = ActionKind::from_name(name).ok_or_else(|| err(start, ParseErrorKind::UnknownName(name.to_string())))?;

    match kind {
        ActionKind::PressBack | ActionKind::PressHome | ActionKind::Wait => {
            if let Some((pos, inner)) = args {
                let found = if inner.trim().is_empty() { 0 } else { inner.split(',').count() };
                return Err(err(pos - 1, ParseErrorKind::WrongArity { name: kind.name(), expected: 0, found }));
            }
            Ok(match kind {
                ActionKind::PressBack => Action::PressBack,
                ActionKind::PressHome => Action::PressHome,
                _ => Action::Wait,
            })
        }
        ActionKind::Click | ActionKind::LongPress => {
            let (pos, inner) = args.ok_or_else(|| {
                err(start + body.len(), ParseErrorKind::WrongArity { name: kind.name(), expected: 2, found: 0 })
            })?;
            let parts: Vec<&str> = inner.split(',').collect();
            if parts.len() != 2 {
                return Err(err(pos, ParseErrorKind::WrongArity { name: kind.name(), expected: 2, found: parts.len() }));
            }
            let x = parse_coordinate(parts[0], pos)?;
            let y = parse_coordinate(parts[1], pos + parts[0].len() + 1)?;
            Ok(if kind == ActionKind::Click { Action::Click { x, y } } else { Action::LongPress { x, y } })
        }
        ActionKind::Swipe => {
            let (pos, inner) = args.ok_or_else(|| {
                err(start + body.len(), ParseErrorKind::WrongArity { name: kind.name(), expected: 1, found: 0 })
            })?;
            let token = inner.trim();
            Direction::from_token(token)
                .map(|direction| Action::Swipe { direction })
                .ok_or_else(|| err(pos, ParseErrorKind::UnknownDirection(token.to_string())))
        }
        ActionKind::Type | ActionKind::Ask => {
            let (pos, inner) = args.ok_or_else(|| {
                err(start + body.len(), ParseErrorKind::WrongArity { name: kind.name(), expected: 1, found: 0 })
            })?;
            check_text(inner, pos, kind.name())?;
            if inner.trim().is_empty() {
                return Err(err(pos, ParseErrorKind::BlankArgument(kind.name())));
            }
            let text = inner.to_string();
            Ok(if kind == ActionKind::Type { Action::Type { text } } else { Action::Ask { query: text } })
        }
        ActionKind::TaskComplete => {
            // A bare TASK_COMPLETE carries an empty answer.
            let answer = match args {
                Some((pos, inner)) => {
                    check_text(inner, pos, kind.name())?;
                    inner.to_string()
                }
                None => String::new(),
            };
            Ok(Action::TaskComplete { answer })
        }
    }
}

fn parse_coordinate(raw: &str, pos: usize) -> Result<u32, ParseActionError> {
    let digits = raw.trim();
    let lead = raw.len() - raw.trim_start().len();
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(err(pos + lead, ParseErrorKind::InvalidCoordinate(digits.to_string())));
    }
    digits.parse().map_err(|_| err(pos + lead, ParseErrorKind::InvalidCoordinate(digits.to_string())))
}

fn check_text(inner: &str, pos: usize, name: &'static str) -> Result<(), ParseActionError> {
    match inner.find(['\n', '\r']) {
        Some(offset) => Err(err(pos + offset, ParseErrorKind::MultilineArgument(name))),
        None => Ok(()),
    }
}
