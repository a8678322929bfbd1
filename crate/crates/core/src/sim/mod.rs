//! Episode loop.
//!
//! Each tick, in order:
//!
//! 1. threshold events observed at the end of the previous tick are
//!    dispatched, starting the entry machine if none is running;
//! 2. the active leaf's activity moves the robot and may raise an event,
//!    which is dispatched;
//! 3. the tick's drain is removed, then any charge is added;
//! 4. death is checked; a charging leaf whose charge is complete (or whose
//!    timer ran out) receives `waitTimer_expired`;
//! 5. a tick summary is traced and thresholds are observed.
//!
//! Choices resolved during a tick add processing drain to that tick.

mod activity;
mod monte_carlo;
mod persist;
mod trace;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::decision::{record_outcome, select_option, ChoiceOutcome, DecisionError, WeightEntry, WeightTable};
use crate::dsl::ScenarioDef;
use crate::energy::{
    apply_charge, mood_of, sensor_gain, tick_discharge, EnergyError,
    EnergyState, ThresholdMonitor,
};
use crate::fsm::{ChoiceResolver, FsmError, MachineInstance, Statechart, TransitionRecord};
use crate::guard::GuardContext;
use crate::world::{intensity_at, RobotPose};

pub use activity::{charge_complete, perform, Activity, StepEffect};
pub use monte_carlo::{behavioral_entropy, run_monte_carlo, stats_to_csv, write_stats, SurvivalStats};
pub use persist::{
    load_weights, load_weights_if_present, save_weights, weights_from_csv, weights_to_csv,
    WeightsError, WEIGHTS_HEADER,
};
pub use trace::{trace_to_jsonl, write_trace, TraceEvent};

/// Trace state label while no feeding behavior is running.
pub const IDLE_STATE: &str = "idle";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum MemoryMode {
    #[default]
    Volatile,
    Nonvolatile,
}

impl MemoryMode {
    pub fn as_str(self) -> &'static str {
        match self {
            MemoryMode::Volatile => "volatile",
            MemoryMode::Nonvolatile => "nonvolatile",
        }
    }
}

impl fmt::Display for MemoryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MemoryMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "volatile" => Ok(MemoryMode::Volatile),
            "nonvolatile" => Ok(MemoryMode::Nonvolatile),
            other => Err(format!("unknown memory mode {other}")),
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Machine(#[from] FsmError),
    #[error(transparent)]
    Weights(#[from] WeightsError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Decision(#[from] DecisionError),
    #[error("step {step}: {count} eventless transitions still enabled after dispatch")]
    RunToCompletion { step: u64, count: usize },
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub scenario: ScenarioDef,
    pub seed: u64,
    pub memory_mode: MemoryMode,
    pub max_steps: u64,
    /// Required in nonvolatile mode, rejected in volatile mode.
    pub weights_path: Option<PathBuf>,
}

impl SimConfig {
    pub const DEFAULT_STEPS: u64 = 10_000;

    pub fn new(scenario: ScenarioDef) -> Self {
        Self {
            scenario,
            seed: 0,
            memory_mode: MemoryMode::Volatile,
            max_steps: Self::DEFAULT_STEPS,
            weights_path: None,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.max_steps == 0 {
            return Err(SimError::Config("max_steps must be positive".into()));
        }
        match (self.memory_mode, &self.weights_path) {
            (MemoryMode::Nonvolatile, None) => {
                Err(SimError::Config("nonvolatile memory needs a weights path".into()))
            }
            (MemoryMode::Volatile, Some(_)) => {
                Err(SimError::Config("a weights path requires nonvolatile memory".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Survived,
    Died { step: u64 },
}

impl Outcome {
    pub fn survived(self) -> bool {
        self == Outcome::Survived
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Survived => "survived",
            Outcome::Died { .. } => "died",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub outcome: Outcome,
    /// Ticks lived: the death step, or the whole horizon.
    pub lifetime: u64,
    pub choices_made: BTreeMap<(String, String), u64>,
    /// Every (node, option) selection in order.
    pub choice_sequence: Vec<(String, String)>,
    pub final_weights: WeightTable,
    pub recharges_station: u64,
    pub recharges_wireless: u64,
    pub final_energy: EnergyState,
}

impl EpisodeResult {
    pub fn first_choice_at(&self, node: &str) -> Option<&str> {
        self.choice_sequence
            .iter()
            .find(|(n, _)| n == node)
            .map(|(_, o)| o.as_str())
    }
}

/// Seed weights declared by the scenario.
pub fn seed_table(s: &ScenarioDef) -> Result<WeightTable, SimError> {
    let mut t = WeightTable::new();
    for w in &s.seed_weights {
        t.seed(&w.node, &w.option, w.w_pos, w.w_neg)?;
    }
    Ok(t)
}

/// Weights an episode starts from: the persisted table when nonvolatile
/// memory already holds one, otherwise the scenario's seeds.
pub fn initial_table(cfg: &SimConfig) -> Result<WeightTable, SimError> {
    if cfg.memory_mode == MemoryMode::Nonvolatile {
        if let Some(path) = &cfg.weights_path {
            if let Some(t) = load_weights_if_present(path)? {
                return Ok(t);
            }
        }
    }
    seed_table(&cfg.scenario)
}

/// Volatile memory loses everything; nonvolatile memory writes the table to
/// `path` and keeps it.
pub fn apply_death_consequence(
    t: &WeightTable,
    mode: MemoryMode,
    path: Option<&Path>,
) -> Result<WeightTable, SimError> {
    match mode {
        MemoryMode::Volatile => Ok(WeightTable::new()),
        MemoryMode::Nonvolatile => {
            let path = path.ok_or_else(|| {
                SimError::Config("nonvolatile memory needs a weights path".into())
            })?;
            save_weights(t, path)?;
            Ok(t.clone())
        }
    }
}

/// Runs one episode from the configured seed and memory.
pub fn run_episode(cfg: &SimConfig) -> Result<(EpisodeResult, Vec<TraceEvent>), SimError> {
    cfg.validate()?;
    let chart = Arc::new(Statechart::from_scenario(&cfg.scenario)?);
    let table = initial_table(cfg)?;
    let (mut result, trace) = simulate(cfg, &chart, cfg.seed, table, true)?;
    conclude(cfg, &mut result)?;
    Ok((result, trace))
}

/// Applies the end-of-life memory policy to a finished episode.
fn conclude(cfg: &SimConfig, result: &mut EpisodeResult) -> Result<(), SimError> {
    let path = cfg.weights_path.as_deref();
    match result.outcome {
        Outcome::Died { .. } => {
            result.final_weights =
                apply_death_consequence(&result.final_weights, cfg.memory_mode, path)?;
        }
        Outcome::Survived => {
            if let (MemoryMode::Nonvolatile, Some(p)) = (cfg.memory_mode, path) {
                save_weights(&result.final_weights, p)?;
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
struct Update {
    node: String,
    option: String,
    outcome: ChoiceOutcome,
    before: WeightEntry,
    after: WeightEntry,
}

struct Learner {
    table: WeightTable,
    rng: ChaCha8Rng,
    updates: Vec<Update>,
}

impl ChoiceResolver for Learner {
    fn select(&mut self, node: &str, options: &[String]) -> Result<String, DecisionError> {
        select_option(&self.table, node, options, &mut self.rng).map(str::to_owned)
    }

    fn settle(&mut self, node: &str, option: &str, outcome: ChoiceOutcome) {
        let before = self.table.get(node, option);
        let after = record_outcome(&mut self.table, node, option, outcome);
        self.updates.push(Update {
            node: node.to_owned(),
            option: option.to_owned(),
            outcome,
            before,
            after,
        });
    }
}

struct Episode<'a> {
    cfg: &'a SimConfig,
    chart: Arc<Statechart>,
    learner: Learner,
    instance: Option<MachineInstance>,
    energy: EnergyState,
    pose: RobotPose,
    step: u64,
    chose_this_tick: bool,
    trace: Option<Vec<TraceEvent>>,
    choices_made: BTreeMap<(String, String), u64>,
    choice_sequence: Vec<(String, String)>,
    recharges_station: u64,
    recharges_wireless: u64,
}

impl Episode<'_> {
    fn guard_context(&self) -> GuardContext {
        let w = &self.cfg.scenario.world;
        GuardContext {
            energy: self.energy,
            thresholds: self.cfg.scenario.energy.thresholds,
            intensity: intensity_at(w, self.pose.pos),
            i_min: w.beacon.as_ref().map(|b| b.i_min),
            at_station: w.station.as_ref().is_some_and(|s| s.pos == self.pose.pos),
        }
    }

    fn running(&self) -> Option<&MachineInstance> {
        self.instance.as_ref().filter(|i| i.is_running())
    }

    fn state_label(&self) -> String {
        match self.running() {
            Some(i) => i.active_path().join("/"),
            None => IDLE_STATE.to_owned(),
        }
    }

    fn dispatch(&mut self, event: &str) -> Result<(), SimError> {
        if self.running().is_none() {
            self.instance = Some(MachineInstance::start(
                Arc::clone(&self.chart),
                self.chart.entry(),
            )?);
        }
        let ctx = self.guard_context();
        let inst = self.instance.as_mut().expect("instance started above");
        inst.set_step(self.step);
        let records = inst.dispatch(event, &ctx, &mut self.learner)?;
        let leftover = inst.drain(&ctx, &mut self.learner)?;
        if !leftover.is_empty() {
            return Err(SimError::RunToCompletion {
                step: self.step,
                count: leftover.len(),
            });
        }
        self.absorb(&records);
        Ok(())
    }

    fn absorb(&mut self, records: &[TransitionRecord]) {
        for r in records {
            if let Some(w) = &r.warning {
                log::debug!("step {}: {w}", r.step);
                continue;
            }
            let mut ev = TraceEvent {
                step: self.step,
                state: r.to.join("/"),
                event: r.trigger.clone(),
                ..Default::default()
            };
            if let Some(option) = &r.chosen_option {
                let node = r.from.last().cloned().unwrap_or_default();
                let e = self.learner.table.get(&node, option);
                ev.node = Some(node.clone());
                ev.option = Some(option.clone());
                ev.w_pos_before = Some(e.w_pos);
                ev.w_pos_after = Some(e.w_pos);
                ev.w_neg_before = Some(e.w_neg);
                ev.w_neg_after = Some(e.w_neg);
                *self
                    .choices_made
                    .entry((node.clone(), option.clone()))
                    .or_default() += 1;
                self.choice_sequence.push((node, option.clone()));
                self.chose_this_tick = true;
            }
            let entered = r.to.last().map(|s| Activity::for_state(s));
            let left = r.from.last().map(|s| Activity::for_state(s));
            if entered != left {
                match entered {
                    Some(Activity::StationCharge) => self.recharges_station += 1,
                    Some(Activity::WirelessCharge) => self.recharges_wireless += 1,
                    _ => {}
                }
            }
            self.push(ev);
        }
        self.flush_updates();
    }

    fn flush_updates(&mut self) {
        let updates: Vec<Update> = self.learner.updates.drain(..).collect();
        let state = self.state_label();
        for u in updates {
            self.push(TraceEvent {
                step: self.step,
                state: state.clone(),
                event: u.outcome.as_str().to_owned(),
                node: Some(u.node),
                option: Some(u.option),
                w_pos_before: Some(u.before.w_pos),
                w_pos_after: Some(u.after.w_pos),
                w_neg_before: Some(u.before.w_neg),
                w_neg_after: Some(u.after.w_neg),
                ..Default::default()
            });
        }
    }

    fn push(&mut self, ev: TraceEvent) {
        if let Some(t) = &mut self.trace {
            t.push(ev);
        }
    }

    fn push_tick(&mut self) {
        let th = self.cfg.scenario.energy.thresholds;
        let ev = TraceEvent {
            step: self.step,
            state: self.state_label(),
            event: "tick".to_owned(),
            battery: Some(self.energy.battery),
            capacitor: Some(self.energy.capacitor),
            mood: Some(mood_of(&self.energy, &th)),
            x: Some(self.pose.pos.x),
            y: Some(self.pose.pos.y),
            ..Default::default()
        };
        self.push(ev);
    }
}

fn simulate(
    cfg: &SimConfig,
    chart: &Arc<Statechart>,
    seed: u64,
    table: WeightTable,
    keep_trace: bool,
) -> Result<(EpisodeResult, Vec<TraceEvent>), SimError> {
    let profile = cfg.scenario.energy;
    let world = &cfg.scenario.world;
    let mut ep = Episode {
        cfg,
        chart: Arc::clone(chart),
        learner: Learner {
            table,
            rng: ChaCha8Rng::seed_from_u64(seed),
            updates: Vec::new(),
        },
        instance: None,
        energy: profile.initial_state(),
        pose: RobotPose::at(world.robot_start),
        step: 0,
        chose_this_tick: false,
        trace: keep_trace.then(Vec::new),
        choices_made: BTreeMap::new(),
        choice_sequence: Vec::new(),
        recharges_station: 0,
        recharges_wireless: 0,
    };
    let mut monitor = ThresholdMonitor::default();
    let mut queued = monitor.observe(&ep.energy, &profile.thresholds);
    let mut last_path: Vec<String> = Vec::new();
    let mut ticks_in_state: u64 = 0;
    let mut outcome = Outcome::Survived;

    for step in 1..=cfg.max_steps {
        ep.step = step;
        ep.chose_this_tick = false;

        for ev in std::mem::take(&mut queued) {
            ep.dispatch(ev.event_name())?;
        }

        let path = ep.running().map(MachineInstance::active_path).unwrap_or_default();
        if !path.is_empty() && path == last_path {
            ticks_in_state += 1;
        } else {
            ticks_in_state = 0;
            last_path = path;
        }
        let activity = ep
            .running()
            .and_then(MachineInstance::leaf)
            .map_or(Activity::Idle, Activity::for_state);

        let gain = sensor_gain(&ep.energy, profile.gain_min);
        let fx = perform(activity, world, ep.pose, gain);
        ep.pose = fx.pose;
        if let Some(event) = fx.event {
            ep.dispatch(event)?;
        }

        let mut active = fx.active;
        if ep.chose_this_tick {
            active = active.union(activity::PROCESS);
        }
        ep.energy = tick_discharge(ep.energy, active, &profile.rates);
        if let Some((source, power)) = fx.charge {
            ep.energy = apply_charge(ep.energy, source, power, 1.0)?;
        }

        if ep.energy.is_dead() {
            ep.energy.charging_source = None;
            outcome = Outcome::Died { step };
            ep.push_tick();
            if let Some(inst) = ep.instance.as_mut() {
                inst.abandon(ChoiceOutcome::Failure, &mut ep.learner);
            }
            ep.flush_updates();
            break;
        }

        if activity.is_charging()
            && (charge_complete(activity, &ep.energy) || ticks_in_state + 1 >= profile.max_charge_ticks)
        {
            ep.dispatch("waitTimer_expired")?;
        }
        let still_charging = ep
            .running()
            .and_then(MachineInstance::leaf)
            .is_some_and(|l| Activity::for_state(l).is_charging());
        if !still_charging {
            ep.energy.charging_source = None;
        }

        ep.push_tick();
        queued = monitor.observe(&ep.energy, &profile.thresholds);
    }

    let lifetime = match outcome {
        Outcome::Died { step } => step,
        Outcome::Survived => cfg.max_steps,
    };
    let result = EpisodeResult {
        outcome,
        lifetime,
        choices_made: ep.choices_made,
        choice_sequence: ep.choice_sequence,
        final_weights: ep.learner.table,
        recharges_station: ep.recharges_station,
        recharges_wireless: ep.recharges_wireless,
        final_energy: ep.energy,
    };
    Ok((result, ep.trace.unwrap_or_default()))
}
