use std::collections::BTreeMap;
use std::fmt;

use crate::energy::EnergyProfile;
use crate::world::WorldMap;

/// Source position, 1-based. Two spans always compare equal so that
/// structural equality of parsed definitions ignores layout.
#[derive(Debug, Clone, Copy, Default, Eq)]
pub struct Span {
    pub line: usize,
    pub column: usize,
}

impl Span {
    pub fn new(line: usize, column: usize) -> Self {
        Self { line, column }
    }
}

impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExitKind {
    Success,
    Failure,
}

impl ExitKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExitKind::Success => "success",
            ExitKind::Failure => "failure",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExitDef {
    pub name: String,
    pub kind: ExitKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Target {
    State(String),
    Exit(String),
    /// The machine's implicit `Final` state.
    Final,
}

/// Name of the state that the `final` target keyword enters.
pub const FINAL_STATE: &str = "Final";

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::State(s) => f.write_str(s),
            Target::Exit(x) => write!(f, "exit.{x}"),
            Target::Final => f.write_str("final"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub target: Target,
    /// Triggering event, or the exit name for arms of a submachine state.
    pub trigger: String,
    pub guard: Option<String>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StateKind {
    Simple,
    Composite { machine: String },
    Choice { options: Vec<String> },
    Final,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateDef {
    pub name: String,
    pub kind: StateKind,
    pub transitions: Vec<Transition>,
    pub span: Span,
}

impl StateDef {
    pub fn simple(name: &str, transitions: Vec<Transition>) -> Self {
        Self {
            name: name.to_owned(),
            kind: StateKind::Simple,
            transitions,
            span: Span::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MachineDef {
    pub name: String,
    pub entry: bool,
    pub initial: Option<String>,
    pub states: Vec<StateDef>,
    pub exits: Vec<ExitDef>,
    pub span: Span,
    pub initial_span: Span,
}

impl MachineDef {
    pub fn state(&self, name: &str) -> Option<&StateDef> {
        self.states.iter().find(|s| s.name == name)
    }

    pub fn exit(&self, name: &str) -> Option<&ExitDef> {
        self.exits.iter().find(|x| x.name == name)
    }

    pub fn first_failure_exit(&self) -> Option<&ExitDef> {
        self.exits.iter().find(|x| x.kind == ExitKind::Failure)
    }

    /// True if any state is final or any transition targets `final`.
    pub fn can_finalize(&self) -> bool {
        self.states.iter().any(|s| {
            s.kind == StateKind::Final || s.transitions.iter().any(|t| t.target == Target::Final)
        }) || self.initial.as_deref() == Some(FINAL_STATE)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightSeed {
    pub node: String,
    pub option: String,
    pub w_pos: f64,
    pub w_neg: f64,
    pub span: Span,
}

/// Where section keys appeared, for diagnostics. Ignored by equality.
#[derive(Debug, Clone, Default)]
pub struct SourceMap {
    pub keys: BTreeMap<String, Span>,
    pub world: Option<Span>,
    pub energy: Option<Span>,
}

impl PartialEq for SourceMap {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl SourceMap {
    pub fn key(&self, key: &str) -> Span {
        self.keys
            .get(key)
            .copied()
            .or(self.world)
            .unwrap_or_else(|| Span::new(1, 1))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScenarioDef {
    pub machines: Vec<MachineDef>,
    pub world: WorldMap,
    pub energy: EnergyProfile,
    pub seed_weights: Vec<WeightSeed>,
    pub source: SourceMap,
}

impl ScenarioDef {
    pub fn machine(&self, name: &str) -> Option<&MachineDef> {
        self.machines.iter().find(|m| m.name == name)
    }

    pub fn entry_machine(&self) -> Option<&MachineDef> {
        self.machines.iter().find(|m| m.entry)
    }

    /// The scenario is known by its entry machine.
    pub fn name(&self) -> &str {
        self.entry_machine().map_or("", |m| m.name.as_str())
    }

    pub fn choice_nodes(&self) -> impl Iterator<Item = (&MachineDef, &StateDef, &[String])> {
        self.machines.iter().flat_map(|m| {
            m.states.iter().filter_map(move |s| match &s.kind {
                StateKind::Choice { options } => Some((m, s, options.as_slice())),
                _ => None,
            })
        })
    }
}
