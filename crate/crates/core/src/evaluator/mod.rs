//! Step-wise scoring.
//!
//! [`evaluate`] runs every test instance through one interaction step and
//! [`aggregate`] reduces the outcomes to per-class success rates (keyed by
//! the true scenario) and scenario judgment accuracy.

mod report;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use report::{parse_report, render_report, ReportError, ReportFormat};

use crate::agents::{Agent, Mode};
use crate::dataset::{Dataset, ScenarioType};
use crate::interaction::{run_step, HumanResponder, SessionConfig, SessionError, StepOutcome, Violation};
use crate::scalar::Scalar;

/// Count of correct steps out of a total.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Tally {
    pub correct: u64,
    pub total: u64,
}

impl Tally {
    pub fn new(correct: u64, total: u64) -> Tally {
        assert!(correct <= total, "correct {correct} exceeds total {total}");
        Tally { correct, total }
    }

    pub fn record(&mut self, ok: bool) {
        self.total += 1;
        self.correct += u64::from(ok);
    }

    /// Unrounded percentage; `None` when the total is zero.
    pub fn rate<T: Scalar>(&self) -> Option<T> {
        (self.total > 0).then(|| T::from_ratio(100 * self.correct, self.total))
    }

    /// Percentage in hundredths, rounded half-up, computed in integers.
    pub fn hundredths(&self) -> Option<u64> {
        (self.total > 0).then(|| (20_000 * self.correct + self.total) / (2 * self.total))
    }

    /// Displayed percentage, two decimals.
    pub fn percent(&self) -> Option<f64> {
        self.hundredths().map(|h| h as f64 / 100.0)
    }

    /// `45.24`, or `—` for an empty tally.
    pub fn display(&self) -> String {
        match self.hundredths() {
            Some(h) => format!("{}.{:02}", h / 100, h % 100),
            None => "—".into(),
        }
    }
}

impl std::ops::Add for Tally {
    type Output = Tally;

    fn add(self, rhs: Tally) -> Tally {
        Tally { correct: self.correct + rhs.correct, total: self.total + rhs.total }
    }
}

/// A tally with its displayed rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub correct: u64,
    pub total: u64,
    /// Percentage rounded half-up to two decimals; null when total is 0.
    pub rate: Option<f64>,
}

impl From<Tally> for RateRow {
    fn from(t: Tally) -> RateRow {
        RateRow { correct: t.correct, total: t.total, rate: t.percent() }
    }
}

impl RateRow {
    pub fn tally(&self) -> Tally {
        Tally { correct: self.correct, total: self.total }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "report::RawReport")]
pub struct EvalReport {
    /// Step-wise success per true scenario, in report order.
    pub classes: BTreeMap<ScenarioType, RateRow>,
    pub total: RateRow,
    /// Scenario judgment accuracy over first-pass judgments.
    pub sja: RateRow,
    pub violations: BTreeMap<Violation, u64>,
    /// Steps whose first pass asked a question.
    pub asked: u64,
    pub backend_errors: u64,
    pub backend: String,
    pub mode: Mode,
    pub seed: Option<u64>,
}

impl EvalReport {
    /// Report from recorded counts alone; the total is their sum.
    pub fn from_counts(classes: impl IntoIterator<Item = (ScenarioType, Tally)>, sja: Tally) -> EvalReport {
        let mut tallies: BTreeMap<ScenarioType, Tally> = ScenarioType::ALL.into_iter().map(|s| (s, Tally::default())).collect();
        for (s, t) in classes {
            *tallies.get_mut(&s).expect("all scenarios seeded") = t;
        }
        let total = tallies.values().fold(Tally::default(), |acc, t| acc + *t);
        EvalReport {
            classes: tallies.into_iter().map(|(s, t)| (s, t.into())).collect(),
            total: total.into(),
            sja: sja.into(),
            violations: Violation::ALL.into_iter().map(|v| (v, 0)).collect(),
            asked: 0,
            backend_errors: 0,
            backend: String::new(),
            mode: Mode::default(),
            seed: None,
        }
    }

    pub fn with_descriptor(mut self, backend: impl Into<String>, mode: Mode, seed: Option<u64>) -> EvalReport {
        self.backend = backend.into();
        self.mode = mode;
        self.seed = seed;
        self
    }

    pub fn class(&self, s: ScenarioType) -> &RateRow {
        &self.classes[&s]
    }

    pub fn is_empty(&self) -> bool {
        self.total.total == 0
    }
}

/// Pure reduction of step outcomes; order does not matter.
pub fn aggregate<'a>(outcomes: impl IntoIterator<Item = &'a StepOutcome>) -> EvalReport {
    let mut classes: BTreeMap<ScenarioType, Tally> = BTreeMap::new();
    let mut sja = Tally::default();
    let mut violations: BTreeMap<Violation, u64> = Violation::ALL.into_iter().map(|v| (v, 0)).collect();
    let (mut asked, mut backend_errors) = (0, 0);
    for o in outcomes {
        classes.entry(o.scenario_true).or_default().record(o.success());
        sja.record(o.judged_correctly());
        for v in &o.violations {
            *violations.get_mut(v).expect("all violations seeded") += 1;
        }
        asked += u64::from(o.asked);
        backend_errors += u64::from(o.backend_error.is_some());
    }
    let mut report = EvalReport::from_counts(classes, sja);
    report.violations = violations;
    report.asked = asked;
    report.backend_errors = backend_errors;
    report
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("test set is empty")]
    EmptyTest,
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EvalOptions {
    /// Worker threads; 0 uses the global pool.
    pub width: usize,
    /// Recorded in the report.
    pub seed: Option<u64>,
}

/// Scores every instance of `test` as one step and returns the report with
/// the per-instance outcomes, in dataset order.
pub fn evaluate<T: Scalar>(
    test: &Dataset,
    agent: &dyn Agent,
    responder: &dyn HumanResponder,
    cfg: &SessionConfig<T>,
    opts: EvalOptions,
) -> Result<(EvalReport, Vec<StepOutcome>), EvalError> {
    if test.is_empty() {
        return Err(EvalError::EmptyTest);
    }
    let work = || -> Result<Vec<StepOutcome>, SessionError> {
        test.instances.par_iter().map(|inst| run_step(inst, agent, responder, cfg)).collect()
    };
    let outcomes = if opts.width == 0 {
        work()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(opts.width)
            .build()
            .map_err(|e| EvalError::Pool(e.to_string()))?
            .install(work)?
    };
    let report = aggregate(&outcomes).with_descriptor(agent.name(), cfg.mode, opts.seed);
    Ok((report, outcomes))
}
