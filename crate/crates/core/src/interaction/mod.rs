//! The two-pass ask/answer loop.
//!
//! A [`Session`] walks one or more instances through the phases
//! `awaiting_agent → (awaiting_answer → awaiting_agent) → step_done`, and
//! finally `terminated`. Protocol violations are recorded on the
//! [`StepOutcome`] and fail the step; they never abort the session.

mod responder;

use std::fmt;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use responder::{AnswerDesk, HumanResponder, InteractiveResponder, OracleResponder, PendingQuery, ResponderError};

use crate::action::{actions_match, Action, MatchConfig, MatchVerdict};
use crate::agents::{Agent, AgentDecision, AgentError, Mode};
use crate::dataset::{Instance, ScenarioType};
use crate::prompt::{Exchange, PromptError, PromptStage, TemplateSet};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct SessionConfig<T = f64> {
    max_steps: u32,
    pub mode: Mode,
    pub matching: MatchConfig<T>,
    pub templates: Arc<TemplateSet>,
}

impl<T: Scalar> SessionConfig<T> {
    pub fn new(max_steps: u32, mode: Mode) -> Result<SessionConfig<T>, SessionError> {
        if max_steps == 0 {
            return Err(SessionError::ZeroMaxSteps);
        }
        Ok(SessionConfig { max_steps, mode, matching: MatchConfig::default(), templates: Arc::default() })
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_matching(mut self, matching: MatchConfig<T>) -> Self {
        self.matching = matching;
        self
    }

    pub fn with_templates(mut self, templates: Arc<TemplateSet>) -> Self {
        self.templates = templates;
        self
    }

    pub fn max_steps(&self) -> u32 {
        self.max_steps
    }
}

impl<T: Scalar> Default for SessionConfig<T> {
    /// Ten steps, query-driven.
    fn default() -> Self {
        SessionConfig::new(10, Mode::QueryDriven).expect("nonzero")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    AwaitingAgent,
    AwaitingAnswer,
    StepDone,
    Terminated,
}

impl Phase {
    pub fn label(self) -> &'static str {
        match self {
            Phase::AwaitingAgent => "awaiting_agent",
            Phase::AwaitingAnswer => "awaiting_answer",
            Phase::StepDone => "step_done",
            Phase::Terminated => "terminated",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Violation {
    AskInNormal,
    NoAskInUntrustworthy,
    AskAfterAnswer,
    UnparseableOutput,
}

impl Violation {
    pub const ALL: [Violation; 4] =
        [Violation::AskInNormal, Violation::NoAskInUntrustworthy, Violation::AskAfterAnswer, Violation::UnparseableOutput];

    pub fn as_str(self) -> &'static str {
        match self {
            Violation::AskInNormal => "ask-in-normal",
            Violation::NoAskInUntrustworthy => "no-ask-in-untrustworthy",
            Violation::AskAfterAnswer => "ask-after-answer",
            Violation::UnparseableOutput => "unparseable-output",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Result of one step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub instance_id: String,
    pub step: u32,
    pub scenario_true: ScenarioType,
    /// First-pass judgment; absent when that pass failed.
    pub scenario_judged: Option<ScenarioType>,
    pub final_action: Option<Action>,
    /// Comparison of `final_action` with the ground truth.
    pub verdict: Option<MatchVerdict>,
    pub violations: Vec<Violation>,
    pub asked: bool,
    /// The exchange that took place, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exchange: Option<Exchange>,
    /// Transport, endpoint or responder failure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend_error: Option<String>,
}

impl StepOutcome {
    pub fn matched(&self) -> bool {
        self.verdict.is_some_and(|v| v.matched())
    }

    /// Counts as correct: matched, with no violation and no backend error.
    pub fn success(&self) -> bool {
        self.matched() && self.violations.is_empty() && self.backend_error.is_none()
    }

    pub fn judged_correctly(&self) -> bool {
        self.scenario_judged == Some(self.scenario_true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    TaskComplete,
    MaxSteps,
    EndOfEpisode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EventKind {
    StepStarted { instance_id: String },
    Decision { stage: PromptStage, decision: AgentDecision },
    BackendFailed { stage: PromptStage, code: String, message: String },
    Answered { query: String, answer: String },
    Violation { violation: Violation },
    Outcome { outcome: StepOutcome },
    Terminated { reason: Termination },
}

/// One transcript entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    /// Milliseconds since the Unix epoch.
    pub at_ms: u64,
    pub step: u32,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error("operation needs phase {expected}, session is {actual}")]
    WrongPhase { expected: Phase, actual: Phase },
    #[error("{0}")]
    OutOfOrder(&'static str),
    #[error("answer must not be empty")]
    EmptyAnswer,
    #[error("an episode needs at least one instance")]
    EmptyEpisode,
    #[error("max_steps must be at least 1")]
    ZeroMaxSteps,
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

impl SessionError {
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::WrongPhase { .. } | SessionError::OutOfOrder(_) => "wrong-phase",
            SessionError::EmptyAnswer => "empty-answer",
            SessionError::EmptyEpisode => "empty-episode",
            SessionError::ZeroMaxSteps => "bad-config",
            SessionError::Prompt(_) => "prompt-error",
        }
    }
}

/// Interaction state over an ordered run of instances, one step each.
#[derive(Debug, Clone)]
pub struct Session<T = f64> {
    steps: Vec<Instance>,
    cfg: SessionConfig<T>,
    step: u32,
    phase: Phase,
    pending: Option<AgentDecision>,
    exchange: Option<Exchange>,
    outcomes: Vec<StepOutcome>,
    transcript: Vec<Event>,
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

impl<T: Scalar> Session<T> {
    pub fn new(steps: Vec<Instance>, cfg: SessionConfig<T>) -> Result<Session<T>, SessionError> {
        if steps.is_empty() {
            return Err(SessionError::EmptyEpisode);
        }
        let mut session = Session {
            steps,
            cfg,
            step: 0,
            phase: Phase::AwaitingAgent,
            pending: None,
            exchange: None,
            outcomes: Vec::new(),
            transcript: Vec::new(),
        };
        session.start_step();
        Ok(session)
    }

    pub fn single(inst: Instance, cfg: SessionConfig<T>) -> Session<T> {
        Session::new(vec![inst], cfg).expect("one instance")
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn step(&self) -> u32 {
        self.step
    }

    pub fn config(&self) -> &SessionConfig<T> {
        &self.cfg
    }

    /// Every instance of the episode, in order.
    pub fn instances(&self) -> &[Instance] {
        &self.steps
    }

    /// Instance of the current step.
    pub fn instance(&self) -> &Instance {
        &self.steps[self.step as usize]
    }

    /// First-pass decision waiting on an answer.
    pub fn pending(&self) -> Option<&AgentDecision> {
        self.pending.as_ref()
    }

    pub fn pending_query(&self) -> Option<&str> {
        self.pending.as_ref().and_then(|d| d.action.query())
    }

    pub fn exchange(&self) -> Option<&Exchange> {
        self.exchange.as_ref()
    }

    /// Outcome of the current step once it is done.
    pub fn outcome(&self) -> Option<&StepOutcome> {
        self.outcomes.get(self.step as usize)
    }

    pub fn outcomes(&self) -> &[StepOutcome] {
        &self.outcomes
    }

    pub fn transcript(&self) -> &[Event] {
        &self.transcript
    }

    fn log(&mut self, kind: EventKind) {
        self.transcript.push(Event { at_ms: now_ms(), step: self.step, kind });
    }

    fn start_step(&mut self) {
        let instance_id = self.instance().id.clone();
        self.log(EventKind::StepStarted { instance_id });
    }

    fn expect_phase(&self, expected: Phase) -> Result<(), SessionError> {
        if self.phase == expected {
            Ok(())
        } else {
            Err(SessionError::WrongPhase { expected, actual: self.phase })
        }
    }

    /// Asks the backend; logs the decision or the failure.
    fn consult(
        &mut self,
        agent: &dyn Agent,
        stage: PromptStage,
        exchange: Option<&Exchange>,
    ) -> Result<Result<AgentDecision, AgentError>, SessionError> {
        let bundle = self.cfg.templates.render_prompt(stage, self.instance(), exchange)?;
        let result = agent.decide(&bundle);
        match &result {
            Ok(decision) => self.log(EventKind::Decision { stage, decision: decision.clone() }),
            Err(e) => self.log(EventKind::BackendFailed { stage, code: e.code().into(), message: e.to_string() }),
        }
        Ok(result)
    }

    fn finish(
        &mut self,
        judged: Option<ScenarioType>,
        final_action: Option<Action>,
        mut violations: Vec<Violation>,
        backend_error: Option<String>,
    ) -> &StepOutcome {
        violations.sort();
        violations.dedup();
        for &violation in &violations {
            self.log(EventKind::Violation { violation });
        }
        let inst = self.instance();
        let verdict = final_action
            .as_ref()
            .map(|a| actions_match(a, &inst.ground_truth_action, inst.screen, &self.cfg.matching));
        let outcome = StepOutcome {
            instance_id: inst.id.clone(),
            step: self.step,
            scenario_true: inst.scenario,
            scenario_judged: judged,
            final_action,
            verdict,
            violations,
            asked: self.pending.is_some(),
            exchange: self.exchange.clone(),
            backend_error,
        };
        self.log(EventKind::Outcome { outcome: outcome.clone() });
        self.outcomes.push(outcome);
        self.phase = Phase::StepDone;
        self.outcomes.last().expect("just pushed")
    }

    /// Splits a backend result into what `finish` records.
    fn failed(result: &AgentError) -> (Vec<Violation>, Option<String>) {
        match result {
            AgentError::Unparseable { .. } => (vec![Violation::UnparseableOutput], None),
            other => (Vec::new(), Some(format!("{}: {other}", other.code()))),
        }
    }

    /// First inference pass of the current step.
    ///
    /// Returns the new phase: `awaiting_answer` when the agent asked in an
    /// untrustworthy judgment under query-driven mode, otherwise
    /// `step_done`.
    pub fn agent_first_pass(&mut self, agent: &dyn Agent) -> Result<Phase, SessionError> {
        self.expect_phase(Phase::AwaitingAgent)?;
        if self.exchange.is_some() {
            return Err(SessionError::OutOfOrder("the first pass already ran; the second pass is due"));
        }
        let mode = self.cfg.mode;
        let injected = match mode {
            Mode::QaInjected => self
                .instance()
                .qa_pair()
                .filter(|_| self.instance().scenario.is_untrustworthy())
                .map(|(q, h)| Exchange::new(q, h)),
            _ => None,
        };
        let stage = if injected.is_some() { PromptStage::QaInjected } else { PromptStage::First };
        let decision = match self.consult(agent, stage, injected.as_ref())? {
            Ok(d) => d,
            Err(e) => {
                let (violations, backend_error) = Self::failed(&e);
                self.exchange = injected;
                self.finish(None, None, violations, backend_error);
                return Ok(self.phase);
            }
        };

        let judged = decision.scenario;
        let asks = decision.action.is_ask();
        let mut violations = Vec::new();
        match mode {
            Mode::QueryDriven if asks && judged.is_untrustworthy() => {
                self.pending = Some(decision);
                self.phase = Phase::AwaitingAnswer;
                return Ok(self.phase);
            }
            Mode::QueryDriven if asks => violations.push(Violation::AskInNormal),
            Mode::QueryDriven if judged.is_untrustworthy() => violations.push(Violation::NoAskInUntrustworthy),
            Mode::QaInjected if asks && injected.is_some() => violations.push(Violation::AskAfterAnswer),
            Mode::QaInjected if asks && judged.is_normal() => violations.push(Violation::AskInNormal),
            _ => {}
        }
        if asks {
            self.pending = Some(decision.clone());
        }
        self.exchange = injected;
        self.finish(Some(judged), Some(decision.action), violations, None);
        Ok(self.phase)
    }

    /// Records the human answer to the pending query.
    pub fn submit_answer(&mut self, answer: &str) -> Result<(), SessionError> {
        self.expect_phase(Phase::AwaitingAnswer)?;
        if answer.trim().is_empty() {
            return Err(SessionError::EmptyAnswer);
        }
        let query = self.pending_query().expect("awaiting_answer implies a pending ask").to_string();
        self.log(EventKind::Answered { query: query.clone(), answer: answer.to_string() });
        self.exchange = Some(Exchange::new(query, answer));
        self.phase = Phase::AwaitingAgent;
        Ok(())
    }

    /// Second inference pass, with the exchange in the prompt.
    pub fn agent_second_pass(&mut self, agent: &dyn Agent) -> Result<&StepOutcome, SessionError> {
        self.expect_phase(Phase::AwaitingAgent)?;
        let Some(exchange) = self.exchange.clone() else {
            return Err(SessionError::OutOfOrder("the second pass needs a submitted answer"));
        };
        let judged = self.pending.as_ref().map(|d| d.scenario);
        Ok(match self.consult(agent, PromptStage::Second, Some(&exchange))? {
            Ok(d) if d.action.is_ask() => self.finish(judged, Some(d.action), vec![Violation::AskAfterAnswer], None),
            Ok(d) => self.finish(judged, Some(d.action), Vec::new(), None),
            Err(e) => {
                let (violations, backend_error) = Self::failed(&e);
                self.finish(judged, None, violations, backend_error)
            }
        })
    }

    /// Runs whichever inference pass the session is waiting for.
    pub fn agent_pass(&mut self, agent: &dyn Agent) -> Result<Phase, SessionError> {
        if self.exchange.is_some() && self.phase == Phase::AwaitingAgent {
            self.agent_second_pass(agent)?;
            Ok(self.phase)
        } else {
            self.agent_first_pass(agent)
        }
    }

    /// Closes a finished step and moves to the next instance, or terminates
    /// on `TASK_COMPLETE`, at `max_steps`, or at the end of the run.
    pub fn advance(&mut self) -> Result<Phase, SessionError> {
        self.expect_phase(Phase::StepDone)?;
        let completed = matches!(self.outcome().and_then(|o| o.final_action.as_ref()), Some(Action::TaskComplete { .. }));
        let next = self.step + 1;
        let reason = if completed {
            Some(Termination::TaskComplete)
        } else if next >= self.cfg.max_steps {
            Some(Termination::MaxSteps)
        } else if next as usize >= self.steps.len() {
            Some(Termination::EndOfEpisode)
        } else {
            None
        };
        match reason {
            Some(reason) => {
                self.log(EventKind::Terminated { reason });
                self.phase = Phase::Terminated;
            }
            None => {
                self.step = next;
                self.pending = None;
                self.exchange = None;
                self.phase = Phase::AwaitingAgent;
                self.start_step();
            }
        }
        Ok(self.phase)
    }

    /// Drives the current step to completion, consulting `responder` when
    /// the agent asks.
    pub fn run_step(&mut self, agent: &dyn Agent, responder: &dyn HumanResponder) -> Result<StepOutcome, SessionError> {
        if self.agent_first_pass(agent)? == Phase::AwaitingAnswer {
            let query = self.pending_query().expect("pending ask").to_string();
            match responder.respond(self.instance(), &query) {
                Ok(answer) if !answer.trim().is_empty() => {
                    self.submit_answer(&answer)?;
                    self.agent_second_pass(agent)?;
                }
                Ok(_) => {
                    let judged = self.pending.as_ref().map(|d| d.scenario);
                    self.finish(judged, None, Vec::new(), Some("responder: empty answer".into()));
                }
                Err(e) => {
                    let judged = self.pending.as_ref().map(|d| d.scenario);
                    self.finish(judged, None, Vec::new(), Some(format!("responder: {e}")));
                }
            }
        }
        Ok(self.outcome().expect("step finished").clone())
    }

    /// Steps until termination and returns every outcome.
    pub fn run_episode(&mut self, agent: &dyn Agent, responder: &dyn HumanResponder) -> Result<&[StepOutcome], SessionError> {
        while self.phase != Phase::Terminated {
            if self.phase == Phase::StepDone {
                self.advance()?;
            } else {
                self.run_step(agent, responder)?;
            }
        }
        Ok(&self.outcomes)
    }
}

/// Evaluates a single instance as a one-step session.
pub fn run_step<T: Scalar>(
    inst: &Instance,
    agent: &dyn Agent,
    responder: &dyn HumanResponder,
    cfg: &SessionConfig<T>,
) -> Result<StepOutcome, SessionError> {
    Session::single(inst.clone(), cfg.clone()).run_step(agent, responder)
}
