use serde::{Deserialize, Serialize};

use super::{Action, ScreenDims};
use crate::error::InvalidValue;
use crate::scalar::Scalar;

/// Tolerances for fuzzy action matching.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig<T = f64> {
    /// Largest per-axis error, as a fraction of the screen side, at which a
    /// point action still matches.
    coord_rel_tolerance: T,
    /// Smallest text similarity at which `TYPE` still matches (inclusive).
    text_sim_threshold: T,
}

impl<T: Scalar> MatchConfig<T> {
    pub fn new(coord_rel_tolerance: T, text_sim_threshold: T) -> Result<Self, InvalidValue> {
        for (name, value) in [("coord_rel_tolerance", coord_rel_tolerance), ("text_sim_threshold", text_sim_threshold)] {
            if !(value > T::zero() && value <= T::one()) {
                return Err(InvalidValue::new(format!("{name} must lie in (0, 1], got {value:?}")));
            }
        }
        Ok(MatchConfig { coord_rel_tolerance, text_sim_threshold })
    }

    pub fn coord_rel_tolerance(&self) -> T {
        self.coord_rel_tolerance
    }

    pub fn text_sim_threshold(&self) -> T {
        self.text_sim_threshold
    }
}

impl<T: Scalar> Default for MatchConfig<T> {
    /// 14% coordinate tolerance, 80% text similarity.
    fn default() -> Self {
        MatchConfig { coord_rel_tolerance: T::from_ratio(14, 100), text_sim_threshold: T::from_ratio(80, 100) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchReason {
    TypeMismatch,
    CoordOutOfTolerance,
    TextBelowThreshold,
    ExactMismatch,
    Matched,
}

impl MatchReason {
    pub fn as_str(self) -> &'static str {
        match self {
            MatchReason::TypeMismatch => "type-mismatch",
            MatchReason::CoordOutOfTolerance => "coord-out-of-tolerance",
            MatchReason::TextBelowThreshold => "text-below-threshold",
            MatchReason::ExactMismatch => "exact-mismatch",
            MatchReason::Matched => "matched",
        }
    }
}

/// Outcome of comparing a predicted action with the ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawVerdict")]
pub struct MatchVerdict {
    matched: bool,
    reason: MatchReason,
}

#[derive(Deserialize)]
struct RawVerdict {
    matched: bool,
    reason: MatchReason,
}

impl TryFrom<RawVerdict> for MatchVerdict {
    type Error = InvalidValue;

    fn try_from(raw: RawVerdict) -> Result<Self, Self::Error> {
        if raw.matched != (raw.reason == MatchReason::Matched) {
            return Err(InvalidValue::new(format!(
                "verdict matched={} contradicts reason {}",
                raw.matched,
                raw.reason.as_str()
            )));
        }
        Ok(MatchVerdict::from_reason(raw.reason))
    }
}

impl MatchVerdict {
    pub fn from_reason(reason: MatchReason) -> MatchVerdict {
        MatchVerdict { matched: reason == MatchReason::Matched, reason }
    }

    pub fn matched(&self) -> bool {
        self.matched
    }

    pub fn reason(&self) -> MatchReason {
        self.reason
    }
}

/// Normalized Levenshtein similarity over Unicode scalar values:
/// `1 - distance / max(len)`, and 1 when both strings are empty.
pub fn text_similarity<T: Scalar>(a: &str, b: &str) -> T {
    let longest = a.chars().count().max(b.chars().count()) as u64;
    if longest == 0 {
        return T::one();
    }
    let distance = strsim::levenshtein(a, b) as u64;
    T::from_ratio(longest - distance, longest)
}

/// Compares `predicted` against `ground_truth`.
///
/// Point actions match when each axis error, relative to the screen side on
/// that axis, is within the tolerance. `TYPE` matches on text similarity;
/// every other action needs equal arguments after trimming.
pub fn actions_match<T: Scalar>(
    predicted: &Action,
    ground_truth: &Action,
    screen: ScreenDims,
    cfg: &MatchConfig<T>,
) -> MatchVerdict {
    use MatchReason::*;

    if predicted.kind() != ground_truth.kind() {
        return MatchVerdict::from_reason(TypeMismatch);
    }
    let reason = match (predicted, ground_truth) {
        (Action::Click { x: px, y: py }, Action::Click { x: gx, y: gy })
        | (Action::LongPress { x: px, y: py }, Action::LongPress { x: gx, y: gy }) => {
            let within = |p: u32, g: u32, side: u32| T::from_ratio(p.abs_diff(g) as u64, side as u64) <= cfg.coord_rel_tolerance;
            if within(*px, *gx, screen.width()) && within(*py, *gy, screen.height()) {
                Matched
            } else {
                CoordOutOfTolerance
            }
        }
        (Action::Type { text: p }, Action::Type { text: g }) => {
            if text_similarity::<T>(p, g) >= cfg.text_sim_threshold {
                Matched
            } else {
                TextBelowThreshold
            }
        }
        (Action::Swipe { direction: p }, Action::Swipe { direction: g }) => exact(p == g),
        (Action::TaskComplete { answer: p }, Action::TaskComplete { answer: g }) => exact(p.trim() == g.trim()),
        (Action::Ask { query: p }, Action::Ask { query: g }) => exact(p.trim() == g.trim()),
        // Remaining same-kind pairs carry no arguments.
        _ => Matched,
    };
    MatchVerdict::from_reason(reason)
}

fn exact(equal: bool) -> MatchReason {
    if equal {
        MatchReason::Matched
    } else {
        MatchReason::ExactMismatch
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::Direction;
    use crate::Rational;

    fn screen() -> ScreenDims {
        ScreenDims::new(1000, 1000).unwrap()
    }

    fn verdict(p: Action, g: Action) -> MatchReason {
        actions_match(&p, &g, screen(), &MatchConfig::<f64>::default()).reason()
    }

    #[test]
    fn similarity_examples() {
        assert_eq!(text_similarity::<f64>("hello", "hello"), 1.0);
        assert_eq!(text_similarity::<f64>("helo", "hello"), 0.8);
        assert_eq!(text_similarity::<f64>("abc", "xyz"), 0.0);
        assert_eq!(text_similarity::<f64>("", ""), 1.0);
        assert_eq!(text_similarity::<Rational>("helo", "hello"), Rational::new(4, 5));
    }

    #[test]
    fn click_tolerance_is_per_axis() {
        assert_eq!(verdict(Action::click(500, 500), Action::click(500, 500)), MatchReason::Matched);
        assert_eq!(verdict(Action::click(560, 520), Action::click(500, 500)), MatchReason::Matched);
        assert_eq!(verdict(Action::click(650, 500), Action::click(500, 500)), MatchReason::CoordOutOfTolerance);
        // Each axis is within tolerance even though the Euclidean error is 0.198.
        assert_eq!(verdict(Action::click(640, 640), Action::click(500, 500)), MatchReason::Matched);
        assert_eq!(verdict(Action::long_press(500, 641), Action::long_press(500, 500)), MatchReason::CoordOutOfTolerance);
    }

    #[test]
    fn click_tolerance_uses_each_axis_side() {
        let wide = ScreenDims::new(2000, 1000).unwrap();
        let cfg = MatchConfig::<f64>::default();
        assert!(actions_match(&Action::click(280, 0), &Action::click(0, 0), wide, &cfg).matched());
        assert!(!actions_match(&Action::click(0, 280), &Action::click(0, 0), wide, &cfg).matched());
    }

    #[test]
    fn type_uses_similarity_threshold() {
        assert_eq!(verdict(Action::type_text("helo").unwrap(), Action::type_text("hello").unwrap()), MatchReason::Matched);
        assert_eq!(
            verdict(Action::type_text("hxlo").unwrap(), Action::type_text("hello").unwrap()),
            MatchReason::TextBelowThreshold
        );
    }

    #[test]
    fn other_actions_need_exact_arguments() {
        assert_eq!(verdict(Action::swipe(Direction::Up), Action::swipe(Direction::Down)), MatchReason::ExactMismatch);
        assert_eq!(
            verdict(Action::task_complete(" 42 ").unwrap(), Action::task_complete("42").unwrap()),
            MatchReason::Matched
        );
        assert_eq!(
            verdict(Action::task_complete("43").unwrap(), Action::task_complete("42").unwrap()),
            MatchReason::ExactMismatch
        );
        assert_eq!(verdict(Action::PressBack, Action::PressBack), MatchReason::Matched);
        assert_eq!(verdict(Action::PressBack, Action::PressHome), MatchReason::TypeMismatch);
        assert_eq!(verdict(Action::ask("q").unwrap(), Action::click(1, 1)), MatchReason::TypeMismatch);
    }

    #[test]
    fn config_bounds() {
        assert!(MatchConfig::<f64>::new(0.0, 0.5).is_err());
        assert!(MatchConfig::<f64>::new(0.5, 1.5).is_err());
        assert!(MatchConfig::<f64>::new(f64::NAN, 0.5).is_err());
        assert!(MatchConfig::<f64>::new(1.0, 1.0).is_ok());
        let exact = MatchConfig::<Rational>::default();
        assert_eq!(exact.coord_rel_tolerance(), Rational::new(7, 50));
    }

    #[test]
    fn verdict_deserialization_checks_consistency() {
        assert!(serde_json::from_str::<MatchVerdict>(r#"{"matched":true,"reason":"type-mismatch"}"#).is_err());
        let v: MatchVerdict = serde_json::from_str(r#"{"matched":true,"reason":"matched"}"#).unwrap();
        assert!(v.matched());
    }
}
