//! Acceptance criteria. Runs as a plain binary so that every criterion
//! prints its own PASS/FAIL line; exits non-zero if any fails.

use std::fs;
use std::panic;
use std::sync::Arc;
use std::time::{Duration, Instant};

use feedsim::decision::{record_outcome, select_option, ChoiceOutcome, DecisionError, WeightTable};
use feedsim::dsl::{parse_scenario, serialize_scenario, ScenarioDef};
use feedsim::energy::{EnergyProfile, Thresholds};
use feedsim::fsm::{ChoiceResolver, MachineInstance, Statechart};
use feedsim::guard::GuardContext;
use feedsim::library;
use feedsim::sim::{
    apply_death_consequence, run_episode, run_monte_carlo, write_trace,
    MemoryMode, Outcome, SimConfig,
};
use feedsim::world::{step_seek_intensity, Beacon, Cell, RobotPose, WorldMap};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

const LEARNING: &str = include_str!("fixtures/learning.scn");

fn scenario(text: &str) -> ScenarioDef {
    parse_scenario(text).unwrap_or_else(|d| panic!("fixture does not parse: {d:?}"))
}

fn table(entries: &[(&str, &str, f64, f64)]) -> WeightTable {
    let mut t = WeightTable::new();
    for &(node, option, p, n) in entries {
        t.seed(node, option, p, n).unwrap();
    }
    t
}

fn main() {
    let criteria: [(&str, fn() -> Check, Option<Duration>); 9] = [
        ("signal beats track on every seed", signal_beats_track, Some(Duration::from_secs(1))),
        ("wireless at seek, poll at discover", seek_and_discover, None),
        ("weight update arithmetic and selection sweep", update_arithmetic, Some(Duration::from_secs(10))),
        ("death time matches the energy oracle", death_time, None),
        ("learning across lives", learning_across_lives, Some(Duration::from_secs(30))),
        ("volatile death erases memory", volatile_erase, None),
        ("identical runs give identical traces", determinism, None),
        ("run to completion and round trip", rtc_and_round_trip, None),
        ("intensity climb converges", seek_convergence, Some(Duration::from_secs(5))),
    ];

    let mut failed = 0;
    for (i, (name, check, budget)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let result = panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| (*s).to_owned()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let result = match (result, budget) {
            (Ok(detail), Some(b)) if elapsed > b => {
                Err(format!("{detail}; took {elapsed:.2?}, budget {b:?}"))
            }
            (r, _) => r,
        };
        match result {
            Ok(detail) => println!("PASS criterion {}: {name} ({elapsed:.2?}) {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {}: {name} ({elapsed:.2?}) {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all 9 criteria passed");
}

// 1

fn signal_beats_track() -> Check {
    let t = table(&[
        ("decision_flow", "follow_ir_signal", 0.8, 0.1),
        ("decision_flow", "follow_track_path", 0.2, 0.7),
    ]);
    let options = ["follow_ir_signal", "follow_track_path"];
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pick = select_option(&t, "decision_flow", &options, &mut rng).map_err(|e| e.to_string())?;
        ensure!(pick == "follow_ir_signal", "seed {seed} picked {pick}");
    }
    Ok("100/100 seeds".into())
}

// 2

fn seek_and_discover() -> Check {
    let seek = table(&[
        ("seek", "find_charging_station", 0.2, 0.3),
        ("seek", "find_wireless_power", 0.8, 0.2),
    ]);
    let discover = table(&[
        ("discover", "poll_power_beacon", 0.75, 0.4),
        ("discover", "engage_resonance", 0.8, 0.7),
    ]);
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = select_option(&seek, "seek", &["find_charging_station", "find_wireless_power"], &mut rng)
            .map_err(|e| e.to_string())?;
        ensure!(s == "find_wireless_power", "seek picked {s} on seed {seed}");
        let d = select_option(&discover, "discover", &["poll_power_beacon", "engage_resonance"], &mut rng)
            .map_err(|e| e.to_string())?;
        ensure!(d == "poll_power_beacon", "discover picked {d} on seed {seed}");
    }

    // the same preferences drive the full dual-source scenario
    let mut cfg = SimConfig::new(scenario(library::DUAL_SOURCE));
    cfg.max_steps = 2000;
    for seed in 0..10 {
        cfg.seed = seed;
        let (r, _) = run_episode(&cfg).map_err(|e| e.to_string())?;
        ensure!(
            r.first_choice_at("seek") == Some("find_wireless_power"),
            "seed {seed}: first seek choice {:?}",
            r.first_choice_at("seek")
        );
        ensure!(
            r.first_choice_at("discover") == Some("poll_power_beacon"),
            "seed {seed}: first discover choice {:?}",
            r.first_choice_at("discover")
        );
    }
    Ok("100 seeds direct, 10 seeds through dual_source".into())
}

// 3

/// Selection rule on integer weights in twentieths: candidates lie within
/// two steps of the best positive weight; fewest negatives wins; exact ties
/// draw an index from the tied options in order.
fn rule_pick(pos: &[u32], neg: &[u32], rng: &mut ChaCha8Rng) -> usize {
    let best = *pos.iter().max().unwrap();
    let cand: Vec<usize> = (0..pos.len()).filter(|&i| best - pos[i] <= 2).collect();
    if cand.len() == 1 {
        return cand[0];
    }
    let least = cand.iter().map(|&i| neg[i]).min().unwrap();
    let tied: Vec<usize> = cand.into_iter().filter(|&i| neg[i] == least).collect();
    if tied.len() == 1 {
        tied[0]
    } else {
        tied[rng.gen_range(0..tied.len())]
    }
}

/// Every way `n` values can be ordered, ties included, as ranks 0..r.
fn weak_orders(n: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let total = (n as u32).pow(n as u32);
    for code in 0..total {
        let ranks: Vec<u32> = (0..n).map(|i| code / (n as u32).pow(i as u32) % n as u32).collect();
        let max = *ranks.iter().max().unwrap();
        if (0..=max).all(|r| ranks.contains(&r)) {
            out.push(ranks);
        }
    }
    out
}

fn tuples(n: usize, values: u32) -> impl Iterator<Item = Vec<u32>> {
    (0..values.pow(n as u32)).map(move |code| (0..n).map(|i| code / values.pow(i as u32) % values).collect())
}

const OPTION_NAMES: [&str; 4] = ["a", "b", "c", "d"];

fn compare_case(t: &mut WeightTable, pos: &[u32], neg: &[u32], seed: u64) -> Result<(), String> {
    let n = pos.len();
    for i in 0..n {
        t.seed("n", OPTION_NAMES[i], pos[i] as f64 / 20.0, neg[i] as f64 / 20.0)
            .map_err(|e| e.to_string())?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let got = select_option(t, "n", &OPTION_NAMES[..n], &mut rng).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let want = OPTION_NAMES[rule_pick(pos, neg, &mut rng)];
    if got != want {
        return Err(format!("pos {pos:?} neg {neg:?} (twentieths): got {got}, rule says {want}"));
    }
    Ok(())
}

fn update_arithmetic() -> Check {
    let mut t = table(&[("n", "x", 0.8, 0.1)]);
    let once = record_outcome(&mut t, "n", "x", ChoiceOutcome::Failure);
    let twice = record_outcome(&mut t, "n", "x", ChoiceOutcome::Failure);
    ensure!(once.w_pos == 0.4 && twice.w_pos == 0.2, "halving gave {} then {}", once.w_pos, twice.w_pos);

    for k0 in 0..=20u32 {
        let w0 = k0 as f64 / 20.0;
        let mut t = table(&[("n", "x", w0, 0.0)]);
        for k in 1..=40 {
            let w = record_outcome(&mut t, "n", "x", ChoiceOutcome::Success).w_pos;
            let closed = 1.0 - (1.0 - w0) / 2f64.powi(k);
            ensure!((w - closed).abs() <= 1e-12, "w0={w0} k={k}: {w} vs {closed}");
        }
    }

    let mut cases = 0u64;
    let mut t = WeightTable::new();
    // two options: every pair of grid points
    for pos in tuples(2, 21) {
        for neg in tuples(2, 21) {
            compare_case(&mut t, &pos, &neg, cases)?;
            cases += 1;
        }
    }
    // three and four options: every positive tuple against every ordering of
    // the negatives, which is all the rule can observe of them
    let spreads: [[u32; 4]; 3] = [[0, 1, 2, 3], [5, 9, 14, 20], [2, 3, 17, 19]];
    for n in [3, 4] {
        let orders = weak_orders(n);
        for pos in tuples(n, 21) {
            for (j, order) in orders.iter().enumerate() {
                let spread = spreads[(cases as usize + j) % spreads.len()];
                let neg: Vec<u32> = order.iter().map(|&r| spread[r as usize]).collect();
                compare_case(&mut t, &pos, &neg, cases)?;
                cases += 1;
            }
        }
    }
    Ok(format!("{cases} selection cases agree"))
}

// 4

fn tenths(s: &str) -> u64 {
    let (whole, frac) = s.split_once('.').unwrap_or((s, "0"));
    whole.parse::<u64>().unwrap() * 10 + frac.parse::<u64>().unwrap()
}

fn no_source_scenario(battery: &str, capacitor: &str, drain: &str) -> String {
    let machines = library::DUAL_SOURCE.split("[world]").next().unwrap();
    format!(
        "{machines}[world]\ngrid = 16 16\nrobot.start = 3 3\n\n[energy]\n\
         initial.battery = {battery}\ninitial.capacitor = {capacitor}\n\
         rate.idle = {drain}\nrate.move = 0\nrate.sense = 0\nrate.process = 0\n"
    )
}

fn death_time() -> Check {
    let mut seen = Vec::new();
    for (b, c, d) in [("100", "10", "0.5"), ("0", "10", "0.3"), ("50", "10", "0.7")] {
        let (bt, ct, dt) = (tenths(b), tenths(c), tenths(d));
        let expected = (bt + ct).div_ceil(dt);
        let mut cfg = SimConfig::new(scenario(&no_source_scenario(b, c, d)));
        cfg.max_steps = 1000;
        let (r, trace) = run_episode(&cfg).map_err(|e| e.to_string())?;
        ensure!(
            r.outcome == Outcome::Died { step: expected },
            "B={b} C={c} d={d}: {:?}, expected death at {expected}",
            r.outcome
        );
        ensure!(
            r.final_energy.battery == 0.0 && r.final_energy.capacitor == 0.0,
            "energy left at death: {:?}",
            r.final_energy
        );
        ensure!(
            trace.iter().all(|e| e.step <= expected),
            "trace continues after death"
        );
        seen.push(format!("({b},{c},{d})->{expected}"));
    }
    Ok(seen.join(" "))
}

// 5

fn learning_across_lives() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = SimConfig::new(scenario(LEARNING));
    cfg.seed = 1;
    cfg.max_steps = 5000;
    cfg.memory_mode = MemoryMode::Nonvolatile;
    cfg.weights_path = Some(dir.path().join("weights.csv"));
    let stats = run_monte_carlo(&cfg, 100).map_err(|e| e.to_string())?;

    let seeded = stats.results[0].first_choice_at("seek");
    ensure!(seeded == Some("find_charging_station"), "episode 1 chose {seeded:?}");
    let flip = stats
        .results
        .iter()
        .position(|r| r.first_choice_at("seek") != seeded)
        .map(|i| i + 1);
    ensure!(flip.is_some_and(|f| f <= 10), "first choice flipped at episode {flip:?}");
    let early = stats.survival_between(0..50);
    let late = stats.survival_between(50..100);
    ensure!(late > early, "survival 51-100 = {late}, 1-50 = {early}");
    Ok(format!("flip at episode {}, survival {early} -> {late}", flip.unwrap()))
}

// 6

fn volatile_erase() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = SimConfig::new(scenario(LEARNING));
    cfg.max_steps = 5000;
    let (r, _) = run_episode(&cfg).map_err(|e| e.to_string())?;
    ensure!(matches!(r.outcome, Outcome::Died { .. }), "expected a death, got {:?}", r.outcome);
    ensure!(r.final_weights.is_empty(), "weights survive death: {:?}", r.final_weights);

    let stats = run_monte_carlo(&cfg, 20).map_err(|e| e.to_string())?;
    for (i, r) in stats.results.iter().enumerate() {
        ensure!(!r.outcome.survived(), "episode {} survived", i + 1);
        ensure!(r.final_weights.is_all_zero(), "episode {} kept weights", i + 1);
    }

    let fig4 = table(&[
        ("decision_flow", "follow_ir_signal", 0.8, 0.1),
        ("decision_flow", "follow_track_path", 0.2, 0.7),
    ]);
    let erased = apply_death_consequence(&fig4, MemoryMode::Volatile, None).map_err(|e| e.to_string())?;
    ensure!(erased.is_all_zero(), "consequence kept {erased:?}");

    let leftovers = fs::read_dir(dir.path()).map_err(|e| e.to_string())?.count();
    ensure!(leftovers == 0, "{leftovers} files written");
    Ok("table empty after every death, nothing written".into())
}

// 7

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut compared = 0;
    let fixtures = library::ALL.into_iter().chain([("learning", LEARNING)]);
    for (name, text) in fixtures {
        for mode in [MemoryMode::Volatile, MemoryMode::Nonvolatile] {
            let mut files = Vec::new();
            for run in 0..2 {
                let mut cfg = SimConfig::new(scenario(text));
                cfg.seed = 7;
                cfg.max_steps = 5000;
                cfg.memory_mode = mode;
                if mode == MemoryMode::Nonvolatile {
                    cfg.weights_path = Some(dir.path().join(format!("{name}-{run}.csv")));
                }
                let (_, trace) = run_episode(&cfg).map_err(|e| e.to_string())?;
                let path = dir.path().join(format!("{name}-{mode}-{run}.jsonl"));
                write_trace(&trace, &path).map_err(|e| e.to_string())?;
                files.push(fs::read(&path).map_err(|e| e.to_string())?);
            }
            ensure!(files[0] == files[1], "{name} ({mode}) traces differ");
            ensure!(!files[0].is_empty(), "{name} ({mode}) trace is empty");
            compared += 1;
        }
    }
    Ok(format!("{compared} trace pairs byte-identical"))
}

// 8

struct Fuzzer {
    table: WeightTable,
    rng: ChaCha8Rng,
}

impl ChoiceResolver for Fuzzer {
    fn select(&mut self, node: &str, options: &[String]) -> Result<String, DecisionError> {
        select_option(&self.table, node, options, &mut self.rng).map(str::to_owned)
    }

    fn settle(&mut self, node: &str, option: &str, outcome: ChoiceOutcome) {
        record_outcome(&mut self.table, node, option, outcome);
    }
}

fn random_context(rng: &mut ChaCha8Rng) -> GuardContext {
    let mut energy = EnergyProfile::default().initial_state();
    energy.battery = rng.gen_range(0..=100) as f64;
    energy.capacitor = rng.gen_range(0..=10) as f64;
    GuardContext {
        energy,
        thresholds: Thresholds::default(),
        intensity: rng.gen_range(0.0..6.0),
        i_min: Some(2.0),
        at_station: rng.gen_bool(0.2),
    }
}

fn fuzz_dispatch(text: &str, seed: u64, ticks: u64) -> Result<u64, String> {
    let s = scenario(text);
    let chart = Arc::new(Statechart::from_scenario(&s).map_err(|e| e.to_string())?);
    let events: Vec<String> = chart.vocabulary().map(str::to_owned).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut resolver = Fuzzer {
        table: feedsim::sim::seed_table(&s).map_err(|e| e.to_string())?,
        rng: ChaCha8Rng::seed_from_u64(seed ^ 0x5eed),
    };
    let mut inst = MachineInstance::start_entry(Arc::clone(&chart)).map_err(|e| e.to_string())?;
    let mut dispatches = 0;
    for tick in 0..ticks {
        if !inst.is_running() {
            inst = MachineInstance::start_entry(Arc::clone(&chart)).map_err(|e| e.to_string())?;
        }
        inst.set_step(tick);
        let ctx = random_context(&mut rng);
        let event = events.choose(&mut rng).unwrap();
        inst.dispatch(event, &ctx, &mut resolver)
            .map_err(|e| format!("tick {tick}, event {event}: {e}"))?;
        let again = inst.drain(&ctx, &mut resolver).map_err(|e| e.to_string())?;
        ensure!(again.is_empty(), "tick {tick}: second drain fired {again:?}");
        dispatches += 1;
    }
    Ok(dispatches)
}

/// Random scenario that is valid by construction. Machine `m{i}` only
/// nests machines with larger indices, so nesting cannot cycle.
fn random_scenario(rng: &mut ChaCha8Rng) -> String {
    const TRIGGERS: [&str; 6] = ["go", "arrived", "lost", "moved", "power_lower", "tick2"];
    const GUARDS: [&str; 4] = ["batteryFull", "batteryLow", "atStation", "isSignalSufficient"];
    let machines = rng.gen_range(1..=4usize);
    let exits: Vec<Vec<(String, bool)>> = (0..machines)
        .map(|i| {
            let count = if i == 0 { rng.gen_range(0..=1) } else { rng.gen_range(1..=2) };
            (0..count).map(|k| (format!("x{k}"), rng.gen_bool(0.5))).collect()
        })
        .collect();
    let mut out = String::new();
    let mut choices: Vec<(String, Vec<String>)> = Vec::new();
    for i in 0..machines {
        let entry = if i == 0 { " entry" } else { "" };
        out.push_str(&format!("[machine m{i}{entry}]\n"));
        let n = rng.gen_range(2..=6usize);
        let names: Vec<String> = (0..n).map(|k| format!("s{k}")).collect();
        out.push_str("initial -> s0\n");
        let target = |rng: &mut ChaCha8Rng| -> String {
            let roll = rng.gen_range(0..10);
            if roll < 2 && !exits[i].is_empty() {
                format!("exit.{}", exits[i][rng.gen_range(0..exits[i].len())].0)
            } else if roll < 3 && i == 0 {
                "final".to_owned()
            } else {
                names[rng.gen_range(0..n)].clone()
            }
        };
        let arm = |rng: &mut ChaCha8Rng, trigger: &str| -> String {
            let mut a = format!("{} on {trigger}", target(rng));
            if rng.gen_bool(0.3) {
                a.push_str(&format!(" if {}", GUARDS[rng.gen_range(0..GUARDS.len())]));
            }
            a
        };
        for (k, name) in names.iter().enumerate() {
            let kind = if k == 0 { 0 } else { rng.gen_range(0..4) };
            match kind {
                1 if n >= 3 => {
                    let mut opts: Vec<String> = names.iter().filter(|o| *o != name).cloned().collect();
                    opts.shuffle(rng);
                    opts.truncate(rng.gen_range(2..=opts.len().min(4)));
                    out.push_str(&format!("choice {name} : {}\n", opts.join(" | ")));
                    choices.push((name.clone(), opts));
                }
                2 if i + 1 < machines => {
                    let sub = rng.gen_range(i + 1..machines);
                    let arms: Vec<String> = exits[sub].iter().map(|(x, _)| arm(rng, x)).collect();
                    out.push_str(&format!("submachine {name} = m{sub} -> {}\n", arms.join(", ")));
                }
                3 if i == 0 => out.push_str(&format!("final {name}\n")),
                _ => {
                    let count = rng.gen_range(0..=3);
                    let arms: Vec<String> = (0..count)
                        .map(|_| {
                            let trig = if rng.gen_bool(0.2) { "auto" } else { TRIGGERS[rng.gen_range(0..TRIGGERS.len())] };
                            arm(rng, trig)
                        })
                        .collect();
                    if arms.is_empty() {
                        out.push_str(&format!("state {name}\n"));
                    } else {
                        out.push_str(&format!("state {name} -> {}\n", arms.join(", ")));
                    }
                }
            }
        }
        if i == 0 && exits[0].is_empty() {
            out.push_str("final done\n");
        }
        for (x, success) in &exits[i] {
            let kind = if *success { "success" } else { "failure" };
            out.push_str(&format!("exit {x} ({kind})\n"));
        }
        out.push('\n');
    }

    let (w, h) = (rng.gen_range(4..40i64), rng.gen_range(4..40i64));
    out.push_str(&format!("[world]\ngrid = {w} {h}\n"));
    let cell = |rng: &mut ChaCha8Rng| (rng.gen_range(0..w), rng.gen_range(0..h));
    let (rx, ry) = cell(rng);
    out.push_str(&format!("robot.start = {rx} {ry}\n"));
    if rng.gen_bool(0.6) {
        let (sx, sy) = cell(rng);
        out.push_str(&format!(
            "station.pos = {sx} {sy}\nstation.ir_radius = {}\nstation.power = {}\n",
            rng.gen_range(1..200) as f64 / 10.0,
            rng.gen_range(0..100) as f64 / 8.0
        ));
        if rng.gen_bool(0.5) {
            let (tx, ty) = cell(rng);
            out.push_str(&format!("station.track = {tx} {ty} {sx} {ty} {sx} {sy}\n"));
            if rng.gen_bool(0.5) {
                out.push_str(&format!("track.gap = {sx} {ty}\n"));
            }
        }
    }
    if rng.gen_bool(0.6) {
        let (bx, by) = cell(rng);
        out.push_str(&format!(
            "beacon.pos = {bx} {by}\nbeacon.tx_power = {}\nbeacon.d0 = {}\nbeacon.resonance_radius = {}\nbeacon.poll_radius = {}\nbeacon.i_min = {}\n",
            rng.gen_range(0..1000) as f64 / 100.0,
            rng.gen_range(1..50) as f64 / 10.0,
            rng.gen_range(1..80) as f64 / 16.0,
            rng.gen_range(1..300) as f64 / 10.0,
            rng.gen_range(0..500) as f64 / 1000.0,
        ));
    }

    if rng.gen_bool(0.7) {
        let cap = rng.gen_range(1..500) as f64 / 4.0;
        let ccap = rng.gen_range(0..100) as f64 / 8.0;
        let low = rng.gen_range(2..99) as f64 / 100.0;
        let lower = rng.gen_range(1..(low * 100.0) as u32) as f64 / 100.0;
        out.push_str(&format!(
            "\n[energy]\nbattery_capacity = {cap}\ncapacitor_capacity = {ccap}\ninitial.battery = {}\ninitial.capacitor = {}\nrate.idle = {}\nrate.move = {}\nthreshold.low = {low}\nthreshold.lower = {lower}\ngain_min = {}\nmax_charge_ticks = {}\n",
            cap * rng.gen_range(0..=8) as f64 / 8.0,
            ccap * rng.gen_range(0..=4) as f64 / 4.0,
            rng.gen_range(0..1000) as f64 / 1000.0,
            rng.gen_range(0..1000) as f64 / 1000.0,
            rng.gen_range(1..=100) as f64 / 100.0,
            rng.gen_range(1..1000),
        ));
    }

    if !choices.is_empty() && rng.gen_bool(0.8) {
        out.push_str("\n[weights]\n");
        let mut seen = std::collections::HashSet::new();
        for (node, opts) in &choices {
            for o in opts {
                if seen.insert((node.clone(), o.clone())) && rng.gen_bool(0.7) {
                    out.push_str(&format!(
                        "{node}.{o} = {} {}\n",
                        rng.gen_range(0..=100) as f64 / 100.0,
                        rng.gen_range(0..=1000) as f64 / 1000.0
                    ));
                }
            }
        }
    }
    out
}

fn round_trips(text: &str) -> Result<(), String> {
    let s = parse_scenario(text).map_err(|d| {
        let msgs: Vec<String> = d.iter().map(ToString::to_string).collect();
        format!("does not parse: {}\n{text}", msgs.join("; "))
    })?;
    let canonical = serialize_scenario(&s);
    let again = parse_scenario(&canonical).map_err(|d| format!("canonical form rejected: {d:?}\n{canonical}"))?;
    ensure!(again == s, "round trip changed the scenario\n{text}");
    ensure!(serialize_scenario(&again) == canonical, "serialization is not stable\n{canonical}");
    Ok(())
}

fn rtc_and_round_trip() -> Check {
    let fixtures: Vec<(&str, &str)> = library::ALL.into_iter().chain([("learning", LEARNING)]).collect();
    let mut dispatches = 0;
    for (i, (name, text)) in fixtures.iter().enumerate() {
        dispatches += fuzz_dispatch(text, i as u64, 10_000).map_err(|e| format!("{name}: {e}"))?;
    }
    // the simulator checks every dispatch itself and fails on a violation
    let mut cfg = SimConfig::new(scenario(library::DUAL_SOURCE));
    for seed in 0..3 {
        cfg.seed = seed;
        run_episode(&cfg).map_err(|e| format!("dual_source seed {seed}: {e}"))?;
    }

    for (name, text) in &fixtures {
        round_trips(text).map_err(|e| format!("{name}: {e}"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..1000 {
        round_trips(&random_scenario(&mut rng))?;
    }
    Ok(format!("{dispatches} fuzzed dispatches, {} fixtures and 1000 random scenarios round trip", fixtures.len()))
}

// 9

fn seek_convergence() -> Check {
    let mut worst = 0;
    for (bx, by) in [(0, 0), (63, 63), (31, 32), (17, 50), (63, 0)] {
        let w = WorldMap {
            width: 64,
            height: 64,
            robot_start: Cell::new(0, 0),
            station: None,
            beacon: Some(Beacon {
                pos: Cell::new(bx, by),
                tx_power: 8.0,
                d0: 2.0,
                resonance_radius: 3.0,
                poll_radius: 14.0,
                i_min: 2.0,
            }),
        };
        for x in 0..64 {
            for y in 0..64 {
                let mut pose = RobotPose::at(Cell::new(x, y));
                let mut steps = 0;
                while pose.pos != Cell::new(bx, by) {
                    ensure!(steps < 128, "from ({x},{y}) to ({bx},{by}) not reached in 128 steps");
                    pose = step_seek_intensity(&w, &pose);
                    steps += 1;
                }
                worst = worst.max(steps);
            }
        }
    }
    Ok(format!("5 beacon positions x 4096 cells, longest climb {worst} steps"))
}
