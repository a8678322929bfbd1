//! Hierarchical run-to-completion state machines.
//!
//! An instance holds one active state per nesting level. Each dispatched
//! event is offered to the innermost (leaf) state; afterwards every eventless
//! transition is drained before the next queued event is looked at:
//!
//! * a choice leaf asks the [`ChoiceResolver`] for an option, once per entry;
//! * a simple leaf takes its first enabled `auto` arm.
//!
//! Composite states are left only through the declared exits of their
//! submachine. Each exit settles the decisions made inside the submachine
//! and the decision that selected it; a failure exit also queues
//! `power_lower` for the enclosing machine.
//!
//! Re-entering a choice node while its previous decision is still open
//! settles that decision as a failure and excludes the option for the rest
//! of the machine's activation. When every option has failed the machine
//! leaves through its first failure exit, or, if it has none, starts over
//! with all options.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::decision::{ChoiceOutcome, DecisionError};
use crate::dsl::{
    validate_scenario, ExitKind, MachineDef, ScenarioDef, StateKind, Target, FINAL_STATE,
};
use crate::guard::GuardContext;

/// Trigger of eventless transitions.
pub const AUTO: &str = "auto";
/// Queued after a failure exit.
pub const POWER_LOWER: &str = "power_lower";
/// Trigger recorded for transitions taken by a choice node.
pub const CHOICE_TRIGGER: &str = "choice";

/// Events the simulator may raise, valid in every scenario.
pub const BUILTIN_EVENTS: &[&str] = &[
    AUTO,
    "power_low",
    POWER_LOWER,
    "waitTimer_expired",
    "arrived",
    "lost",
    "detected",
    "engaged",
    "no_signal",
    "moved",
];

const MAX_EVENTLESS_STEPS: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FsmError {
    #[error("unknown event {0}")]
    UnknownEvent(String),
    #[error("unknown machine {0}")]
    UnknownMachine(String),
    #[error("machine {machine} has no state {state}")]
    UnknownState { machine: String, state: String },
    #[error("exit {exit} is not handled by state {state}")]
    UnhandledExit { exit: String, state: String },
    #[error("final state reached inside submachine {0}")]
    NestedFinal(String),
    #[error("no quiescent configuration after {0} eventless transitions")]
    Livelock(usize),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Decision(#[from] DecisionError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventId(String);

impl EventId {
    pub fn new(name: impl Into<String>) -> Self {
        Self(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EventId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Chooses options at choice nodes and learns from their outcomes.
pub trait ChoiceResolver {
    fn select(&mut self, node: &str, options: &[String]) -> Result<String, DecisionError>;
    fn settle(&mut self, node: &str, option: &str, outcome: ChoiceOutcome);
}

/// Validated machine definitions shared by instances.
#[derive(Debug, Clone)]
pub struct Statechart {
    machines: HashMap<String, MachineDef>,
    entry: String,
    vocabulary: BTreeSet<String>,
}

impl Statechart {
    pub fn from_scenario(s: &ScenarioDef) -> Result<Self, FsmError> {
        let errors: Vec<String> = validate_scenario(s)
            .into_iter()
            .filter(|d| d.is_error())
            .map(|d| d.to_string())
            .collect();
        if !errors.is_empty() {
            return Err(FsmError::Invalid(errors.join("; ")));
        }
        let mut vocabulary: BTreeSet<String> =
            BUILTIN_EVENTS.iter().map(|e| (*e).to_owned()).collect();
        for m in &s.machines {
            for st in &m.states {
                if matches!(st.kind, StateKind::Simple) {
                    vocabulary.extend(st.transitions.iter().map(|t| t.trigger.clone()));
                }
            }
        }
        Ok(Self {
            machines: s
                .machines
                .iter()
                .map(|m| (m.name.clone(), m.clone()))
                .collect(),
            entry: s.name().to_owned(),
            vocabulary,
        })
    }

    pub fn entry(&self) -> &str {
        &self.entry
    }

    pub fn machine(&self, name: &str) -> Result<&MachineDef, FsmError> {
        self.machines
            .get(name)
            .ok_or_else(|| FsmError::UnknownMachine(name.to_owned()))
    }

    pub fn knows_event(&self, name: &str) -> bool {
        self.vocabulary.contains(name)
    }

    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.vocabulary.iter().map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Status {
    Running,
    Exited(String),
    Finalized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRecord {
    pub step: u64,
    pub from: Vec<String>,
    pub to: Vec<String>,
    /// Event name, or [`CHOICE_TRIGGER`] for choice resolution.
    pub trigger: String,
    pub chosen_option: Option<String>,
    /// Submachine exit crossed by this transition, if any.
    pub exit: Option<(String, ExitKind)>,
    /// Set on no-op records, e.g. an event sent to a finished instance.
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpenDecision {
    pub node: String,
    pub option: String,
    /// Nesting level of the choice node (0 = outermost machine).
    pub depth: usize,
}

#[derive(Debug, Clone)]
struct Frame {
    machine: String,
    state: String,
    // options already pursued in this activation, keyed by choice node
    tried: HashMap<String, Vec<String>>,
}

impl Frame {
    fn new(machine: &str) -> Self {
        Self {
            machine: machine.to_owned(),
            state: String::new(),
            tried: HashMap::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MachineInstance {
    chart: Arc<Statechart>,
    frames: Vec<Frame>,
    status: Status,
    pending: VecDeque<EventId>,
    open: Vec<OpenDecision>,
    unsettled: Vec<(OpenDecision, ChoiceOutcome)>,
    step: u64,
}

impl MachineInstance {
    /// Enters `machine` at its initial state, descending through composite
    /// initials. Choice nodes are left unresolved until the first dispatch.
    pub fn start(chart: Arc<Statechart>, machine: &str) -> Result<Self, FsmError> {
        let def = chart.machine(machine)?;
        let initial = def.initial.clone().ok_or_else(|| FsmError::UnknownState {
            machine: machine.to_owned(),
            state: "initial".to_owned(),
        })?;
        let mut inst = Self {
            chart: Arc::clone(&chart),
            frames: vec![Frame::new(machine)],
            status: Status::Running,
            pending: VecDeque::new(),
            open: Vec::new(),
            unsettled: Vec::new(),
            step: 0,
        };
        inst.enter(&chart, 0, &initial)?;
        Ok(inst)
    }

    /// Starts the scenario's entry machine.
    pub fn start_entry(chart: Arc<Statechart>) -> Result<Self, FsmError> {
        let entry = chart.entry().to_owned();
        Self::start(chart, &entry)
    }

    pub fn status(&self) -> &Status {
        &self.status
    }

    pub fn is_running(&self) -> bool {
        self.status == Status::Running
    }

    /// Outermost machine name followed by the active state at each level.
    pub fn active_path(&self) -> Vec<String> {
        let mut path = vec![self.frames[0].machine.clone()];
        if self.status == Status::Running || self.status == Status::Finalized {
            path.extend(self.frames.iter().map(|f| f.state.clone()));
        }
        path
    }

    pub fn leaf(&self) -> Option<&str> {
        match self.status {
            Status::Exited(_) => None,
            _ => self.frames.last().map(|f| f.state.as_str()),
        }
    }

    pub fn pending_events(&self) -> impl Iterator<Item = &EventId> {
        self.pending.iter()
    }

    pub fn open_decisions(&self) -> &[OpenDecision] {
        &self.open
    }

    /// Tick index stamped on subsequent records.
    pub fn set_step(&mut self, step: u64) {
        self.step = step;
    }

    pub fn statechart(&self) -> &Arc<Statechart> {
        &self.chart
    }

    /// Processes `event` to completion.
    pub fn dispatch(
        &mut self,
        event: &str,
        ctx: &GuardContext,
        resolver: &mut dyn ChoiceResolver,
    ) -> Result<Vec<TransitionRecord>, FsmError> {
        if !self.chart.knows_event(event) {
            return Err(FsmError::UnknownEvent(event.to_owned()));
        }
        if !self.is_running() {
            let path = self.active_path();
            return Ok(vec![TransitionRecord {
                step: self.step,
                from: path.clone(),
                to: path,
                trigger: event.to_owned(),
                chosen_option: None,
                exit: None,
                warning: Some(format!("event {event} ignored: instance is not running")),
            }]);
        }
        let mut records = Vec::new();
        self.pending.push_back(EventId::new(event));
        while let Some(ev) = self.pending.pop_front() {
            if !self.is_running() {
                self.pending.clear();
                break;
            }
            self.fire_event(ev.as_str(), ctx, resolver, &mut records)?;
            self.drain_into(ctx, resolver, &mut records)?;
        }
        Ok(records)
    }

    /// Takes every enabled eventless transition. After a dispatch this
    /// returns an empty list under the same guard context.
    pub fn drain(
        &mut self,
        ctx: &GuardContext,
        resolver: &mut dyn ChoiceResolver,
    ) -> Result<Vec<TransitionRecord>, FsmError> {
        let mut records = Vec::new();
        self.drain_into(ctx, resolver, &mut records)?;
        Ok(records)
    }

    /// Settles every open decision with `outcome` and stops the instance in
    /// place. Used when the robot dies mid-pursuit.
    pub fn abandon(&mut self, outcome: ChoiceOutcome, resolver: &mut dyn ChoiceResolver) {
        self.settle_where(|_| true, outcome);
        self.flush(resolver);
        self.pending.clear();
    }

    fn fire_event(
        &mut self,
        event: &str,
        ctx: &GuardContext,
        resolver: &mut dyn ChoiceResolver,
        records: &mut Vec<TransitionRecord>,
    ) -> Result<(), FsmError> {
        let chart = Arc::clone(&self.chart);
        let depth = self.frames.len() - 1;
        let machine = chart.machine(&self.frames[depth].machine)?;
        let Some(state) = machine.state(&self.frames[depth].state) else {
            return Ok(());
        };
        if !matches!(state.kind, StateKind::Simple) {
            return Ok(());
        }
        let arm = state.transitions.iter().find(|t| {
            t.trigger == event && t.guard.as_deref().is_none_or(|g| ctx.eval_named(g))
        });
        if let Some(t) = arm {
            let target = t.target.clone();
            self.take(&chart, depth, &target, event, None, ctx, resolver, records)?;
        }
        Ok(())
    }

    fn drain_into(
        &mut self,
        ctx: &GuardContext,
        resolver: &mut dyn ChoiceResolver,
        records: &mut Vec<TransitionRecord>,
    ) -> Result<(), FsmError> {
        let chart = Arc::clone(&self.chart);
        for _ in 0..MAX_EVENTLESS_STEPS {
            if !self.is_running() {
                return Ok(());
            }
            let depth = self.frames.len() - 1;
            let machine = chart.machine(&self.frames[depth].machine)?;
            let leaf = self.frames[depth].state.clone();
            let Some(state) = machine.state(&leaf) else {
                return Ok(());
            };
            match &state.kind {
                StateKind::Choice { options } => {
                    self.resolve_choice(&chart, machine, depth, &leaf, options, ctx, resolver, records)?;
                }
                StateKind::Simple => {
                    let arm = state.transitions.iter().find(|t| {
                        t.trigger == AUTO && t.guard.as_deref().is_none_or(|g| ctx.eval_named(g))
                    });
                    match arm {
                        Some(t) => {
                            let target = t.target.clone();
                            self.take(&chart, depth, &target, AUTO, None, ctx, resolver, records)?;
                        }
                        None => return Ok(()),
                    }
                }
                StateKind::Composite { .. } | StateKind::Final => return Ok(()),
            }
        }
        Err(FsmError::Livelock(MAX_EVENTLESS_STEPS))
    }

    #[allow(clippy::too_many_arguments)]
    fn resolve_choice(
        &mut self,
        chart: &Statechart,
        machine: &MachineDef,
        depth: usize,
        node: &str,
        options: &[String],
        ctx: &GuardContext,
        resolver: &mut dyn ChoiceResolver,
        records: &mut Vec<TransitionRecord>,
    ) -> Result<(), FsmError> {
        // coming back here means the last pursuit from this node fell short
        self.settle_where(
            |d| d.depth == depth && d.node == node,
            ChoiceOutcome::Failure,
        );
        self.flush(resolver);

        let tried = self.frames[depth]
            .tried
            .get(node)
            .cloned()
            .unwrap_or_default();
        let mut available: Vec<String> = options
            .iter()
            .filter(|o| !tried.contains(o))
            .cloned()
            .collect();
        if available.is_empty() {
            if let Some(exit) = machine.first_failure_exit() {
                let target = Target::Exit(exit.name.clone());
                return self.take(chart, depth, &target, CHOICE_TRIGGER, None, ctx, resolver, records);
            }
            self.frames[depth].tried.remove(node);
            available = options.to_vec();
        }

        let chosen = resolver.select(node, &available)?;
        self.frames[depth]
            .tried
            .entry(node.to_owned())
            .or_default()
            .push(chosen.clone());
        self.open.push(OpenDecision {
            node: node.to_owned(),
            option: chosen.clone(),
            depth,
        });
        let target = Target::State(chosen.clone());
        self.take(chart, depth, &target, CHOICE_TRIGGER, Some(chosen), ctx, resolver, records)
    }

    #[allow(clippy::too_many_arguments)]
    fn take(
        &mut self,
        chart: &Statechart,
        depth: usize,
        target: &Target,
        trigger: &str,
        chosen_option: Option<String>,
        ctx: &GuardContext,
        resolver: &mut dyn ChoiceResolver,
        records: &mut Vec<TransitionRecord>,
    ) -> Result<(), FsmError> {
        let from = self.active_path();
        let exit = self.apply_target(chart, depth, target, ctx)?;
        self.flush(resolver);
        records.push(TransitionRecord {
            step: self.step,
            from,
            to: self.active_path(),
            trigger: trigger.to_owned(),
            chosen_option,
            exit,
            warning: None,
        });
        Ok(())
    }

    /// Moves the level at `depth` to `target`, unwinding through exits.
    /// Returns the first exit crossed.
    fn apply_target(
        &mut self,
        chart: &Statechart,
        depth: usize,
        target: &Target,
        ctx: &GuardContext,
    ) -> Result<Option<(String, ExitKind)>, FsmError> {
        match target {
            Target::State(name) => {
                self.enter(chart, depth, name)?;
                Ok(None)
            }
            Target::Final => {
                self.enter(chart, depth, FINAL_STATE)?;
                Ok(None)
            }
            Target::Exit(exit) => {
                let machine = chart.machine(&self.frames[depth].machine)?;
                let kind = machine
                    .exit(exit)
                    .map(|x| x.kind)
                    .ok_or_else(|| FsmError::UnknownState {
                        machine: machine.name.clone(),
                        state: format!("exit.{exit}"),
                    })?;
                let outcome = match kind {
                    ExitKind::Success => ChoiceOutcome::Success,
                    ExitKind::Failure => ChoiceOutcome::Failure,
                };
                self.settle_where(|d| d.depth >= depth, outcome);
                if depth == 0 {
                    self.frames.truncate(1);
                    self.status = Status::Exited(exit.clone());
                    return Ok(Some((exit.clone(), kind)));
                }
                self.frames.truncate(depth);
                let outer = depth - 1;
                let composite = self.frames[outer].state.clone();
                self.settle_where(
                    |d| d.depth == outer && d.option == composite,
                    outcome,
                );
                if kind == ExitKind::Failure {
                    self.pending.push_back(EventId::new(POWER_LOWER));
                }
                let outer_machine = chart.machine(&self.frames[outer].machine)?;
                let arm = outer_machine
                    .state(&composite)
                    .and_then(|st| {
                        st.transitions.iter().find(|t| {
                            t.trigger == *exit
                                && t.guard.as_deref().is_none_or(|g| ctx.eval_named(g))
                        })
                    })
                    .ok_or_else(|| FsmError::UnhandledExit {
                        exit: exit.clone(),
                        state: composite.clone(),
                    })?;
                let next = arm.target.clone();
                self.apply_target(chart, outer, &next, ctx)?;
                Ok(Some((exit.clone(), kind)))
            }
        }
    }

    fn enter(&mut self, chart: &Statechart, depth: usize, name: &str) -> Result<(), FsmError> {
        self.frames.truncate(depth + 1);
        self.frames[depth].state = name.to_owned();
        let machine = chart.machine(&self.frames[depth].machine)?;
        let kind = match machine.state(name) {
            Some(st) => &st.kind,
            None if name == FINAL_STATE => &StateKind::Final,
            None => {
                return Err(FsmError::UnknownState {
                    machine: machine.name.clone(),
                    state: name.to_owned(),
                })
            }
        };
        match kind {
            StateKind::Composite { machine: sub } => {
                let initial = chart
                    .machine(sub)?
                    .initial
                    .clone()
                    .ok_or_else(|| FsmError::UnknownState {
                        machine: sub.clone(),
                        state: "initial".to_owned(),
                    })?;
                self.frames.push(Frame::new(sub));
                self.enter(chart, depth + 1, &initial)
            }
            StateKind::Final if depth == 0 => {
                self.settle_where(|_| true, ChoiceOutcome::Success);
                self.status = Status::Finalized;
                Ok(())
            }
            StateKind::Final => Err(FsmError::NestedFinal(machine.name.clone())),
            StateKind::Simple | StateKind::Choice { .. } => Ok(()),
        }
    }

    fn settle_where(&mut self, pred: impl Fn(&OpenDecision) -> bool, outcome: ChoiceOutcome) {
        let (closed, still_open): (Vec<_>, Vec<_>) = self.open.drain(..).partition(|d| pred(d));
        self.open = still_open;
        self.unsettled
            .extend(closed.into_iter().map(|d| (d, outcome)));
    }

    fn flush(&mut self, resolver: &mut dyn ChoiceResolver) {
        for (d, outcome) in self.unsettled.drain(..) {
            resolver.settle(&d.node, &d.option, outcome);
        }
    }
}
