use std::fs;

use feedsim::decision::{ChoiceOutcome, WeightTable};
use feedsim::dsl::parse_scenario;
use feedsim::library;
use feedsim::sim::{
    apply_death_consequence, load_weights, run_episode, run_monte_carlo, save_weights,
    stats_to_csv, trace_to_jsonl, MemoryMode, Outcome, SimConfig, SimError, SurvivalStats,
};

const LEARNING: &str = include_str!("fixtures/learning.scn");

fn config(text: &str) -> SimConfig {
    SimConfig::new(parse_scenario(text).unwrap())
}

fn fig4() -> WeightTable {
    let mut t = WeightTable::new();
    t.seed("decision_flow", "follow_ir_signal", 0.8, 0.1).unwrap();
    t.seed("decision_flow", "follow_track_path", 0.2, 0.7).unwrap();
    t
}

#[test]
fn dual_source_first_seeks_wireless_power() {
    let (r, trace) = run_episode(&config(library::DUAL_SOURCE)).unwrap();
    assert_eq!(r.first_choice_at("seek"), Some("find_wireless_power"));
    let first = trace.iter().find(|e| e.event == "choice").unwrap();
    assert_eq!(first.node.as_deref(), Some("seek"));
    assert_eq!(first.w_pos_before, Some(0.8));
    assert!(r.outcome.survived());
    assert!(r.recharges_wireless > 0);
    assert_eq!(r.recharges_station, 0);
}

#[test]
fn station_only_recharges_at_the_station() {
    let (r, _) = run_episode(&config(library::STATION_ONLY)).unwrap();
    assert!(r.outcome.survived());
    assert!(r.recharges_station > 0);
    // the IR cue is out of range from the start, so the track takes over
    assert!(r.final_weights.get("decision_flow", "follow_track_path").successes > 0);
    assert_eq!(r.final_weights.get("decision_flow", "follow_ir_signal").failures, 1);
}

#[test]
fn constant_drain_dies_on_the_closed_form_step() {
    let machines = library::DUAL_SOURCE.split("[world]").next().unwrap();
    let text = format!(
        "{machines}[world]\ngrid = 8 8\n\n[energy]\nrate.idle = 0.5\nrate.move = 0\nrate.sense = 0\nrate.process = 0\n"
    );
    let (r, trace) = run_episode(&config(&text)).unwrap();
    assert_eq!(r.outcome, Outcome::Died { step: 220 });
    assert_eq!(r.lifetime, 220);
    let last = trace.iter().filter(|e| e.event == "tick").last().unwrap();
    assert_eq!((last.step, last.battery, last.capacitor), (220, Some(0.0), Some(0.0)));
    assert_eq!(last.mood.unwrap().as_str(), "dead");
    assert!(trace.iter().all(|e| e.step <= 220));
}

#[test]
fn trace_steps_never_go_back() {
    let (_, trace) = run_episode(&config(library::DUAL_SOURCE)).unwrap();
    assert!(trace.windows(2).all(|w| w[0].step <= w[1].step));
    let ticks = trace.iter().filter(|e| e.event == "tick").count();
    assert_eq!(ticks, 10_000);
}

#[test]
fn trace_lines_parse_as_json_with_ordered_keys() {
    let (_, trace) = run_episode(&config(library::WIRELESS_ONLY)).unwrap();
    let text = trace_to_jsonl(&trace);
    let order = [
        "step", "state", "event", "node", "option", "w_pos_before", "w_pos_after", "w_neg_before",
        "w_neg_after", "battery", "capacitor", "mood", "x", "y",
    ];
    for line in text.lines().take(2000) {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v.get("step").is_some());
        let positions: Vec<usize> = order.iter().filter_map(|k| line.find(&format!("\"{k}\":"))).collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]), "{line}");
    }
}

#[test]
fn same_seed_same_trace() {
    let mut cfg = config(library::DUAL_SOURCE);
    cfg.seed = 7;
    cfg.max_steps = 5000;
    let a = trace_to_jsonl(&run_episode(&cfg).unwrap().1);
    let b = trace_to_jsonl(&run_episode(&cfg).unwrap().1);
    assert_eq!(a, b);
}

#[test]
fn failure_exits_are_charged_to_one_option() {
    // with no sources every finder fails; each failure exit of the wireless
    // finder adds exactly one failure at seek
    let machines = library::DUAL_SOURCE.split("[world]").next().unwrap();
    let text = format!("{machines}[world]\ngrid = 8 8\n");
    let (r, trace) = run_episode(&config(&text)).unwrap();
    assert!(matches!(r.outcome, Outcome::Died { .. }));
    let failures_at_seek = trace
        .iter()
        .filter(|e| e.event == "failure" && e.node.as_deref() == Some("seek"))
        .count() as u64;
    let entries: u64 = ["find_wireless_power", "find_charging_station"]
        .iter()
        .map(|o| r.choices_made.get(&("seek".to_owned(), (*o).to_owned())).copied().unwrap_or(0))
        .sum();
    // every pursuit from seek ends in exactly one failure (the last one by death)
    assert_eq!(failures_at_seek, entries);
}

#[test]
fn volatile_death_leaves_nothing() {
    let mut cfg = config(LEARNING);
    cfg.max_steps = 2000;
    let (r, _) = run_episode(&cfg).unwrap();
    assert!(matches!(r.outcome, Outcome::Died { .. }));
    assert!(r.final_weights.is_empty());
    assert!(apply_death_consequence(&fig4(), MemoryMode::Volatile, None).unwrap().is_empty());
}

#[test]
fn nonvolatile_consequence_writes_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.csv");
    let kept = apply_death_consequence(&fig4(), MemoryMode::Nonvolatile, Some(&path)).unwrap();
    assert_eq!(kept, fig4());
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.contains("decision_flow,follow_ir_signal,0.8,0.1,"), "{text}");
}

#[test]
fn unwritable_weights_path_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("missing-dir").join("w.csv");
    let t = fig4();
    let err = apply_death_consequence(&t, MemoryMode::Nonvolatile, Some(&path)).unwrap_err();
    assert!(matches!(err, SimError::Weights(_)), "{err}");
    assert_eq!(t, fig4());
}

#[test]
fn nonvolatile_episode_resumes_from_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.csv");
    let mut cfg = config(LEARNING);
    cfg.max_steps = 2000;
    cfg.memory_mode = MemoryMode::Nonvolatile;
    cfg.weights_path = Some(path.clone());

    let (first, _) = run_episode(&cfg).unwrap();
    assert_eq!(first.first_choice_at("seek"), Some("find_charging_station"));
    assert_eq!(load_weights(&path).unwrap(), first.final_weights);
    let (second, _) = run_episode(&cfg).unwrap();
    assert_eq!(
        second.final_weights.get("seek", "find_charging_station").failures,
        2,
        "the second life starts from the first life's table"
    );
}

#[test]
fn nonvolatile_monte_carlo_threads_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(LEARNING);
    cfg.max_steps = 2000;
    cfg.memory_mode = MemoryMode::Nonvolatile;
    cfg.weights_path = Some(dir.path().join("w.csv"));
    let stats = run_monte_carlo(&cfg, 6).unwrap();
    for pair in stats.results.windows(2) {
        let before = &pair[0].final_weights;
        let after = &pair[1].final_weights;
        let total = |t: &WeightTable| t.iter().map(|(_, _, e)| e.successes + e.failures).sum::<u64>();
        assert!(total(after) >= total(before));
    }
    let last = &stats.results.last().unwrap().final_weights;
    assert_eq!(&load_weights(cfg.weights_path.as_ref().unwrap()).unwrap(), last);
}

#[test]
fn volatile_monte_carlo_matches_single_episodes() {
    let mut cfg = config(library::DUAL_SOURCE);
    cfg.max_steps = 3000;
    cfg.seed = 11;
    let stats = run_monte_carlo(&cfg, 4).unwrap();
    for (i, r) in stats.results.iter().enumerate() {
        let mut one = cfg.clone();
        one.seed = 11 + i as u64;
        assert_eq!(&run_episode(&one).unwrap().0, r);
    }
}

#[test]
fn one_episode_stats_equal_the_episode() {
    let mut cfg = config(LEARNING);
    cfg.max_steps = 2000;
    let stats = run_monte_carlo(&cfg, 1).unwrap();
    let (r, _) = run_episode(&cfg).unwrap();
    assert_eq!(stats.episodes, 1);
    assert_eq!(stats.survival_fraction, 0.0);
    assert_eq!(stats.mean_lifetime, r.lifetime as f64);
    assert_eq!(stats.results, vec![r]);
}

#[test]
fn single_option_choices_have_zero_entropy() {
    let (r, _) = run_episode(&config(library::WIRELESS_ONLY)).unwrap();
    assert_eq!(r.choices_made.len(), 1, "{:?}", r.choices_made);
    let stats = SurvivalStats::from_results(vec![r.clone(), r]);
    assert_eq!(stats.behavioral_entropy, 0.0);
}

#[test]
fn stats_csv_has_a_row_per_episode() {
    let mut cfg = config(library::DUAL_SOURCE);
    cfg.max_steps = 1000;
    let stats = run_monte_carlo(&cfg, 5).unwrap();
    let csv = stats_to_csv(&stats);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "episode,outcome,lifetime,recharges_station,recharges_wireless");
    assert_eq!(lines.len(), 6);
    assert!(lines[1].starts_with("1,survived,1000,"));
}

#[test]
fn config_contract() {
    let mut cfg = config(library::DUAL_SOURCE);
    cfg.memory_mode = MemoryMode::Nonvolatile;
    assert!(matches!(run_episode(&cfg), Err(SimError::Config(_))));
    cfg.memory_mode = MemoryMode::Volatile;
    cfg.weights_path = Some("w.csv".into());
    assert!(matches!(run_episode(&cfg), Err(SimError::Config(_))));
    cfg.weights_path = None;
    cfg.max_steps = 0;
    assert!(matches!(run_episode(&cfg), Err(SimError::Config(_))));
    cfg.max_steps = 10;
    assert!(matches!(run_monte_carlo(&cfg, 0), Err(SimError::Config(_))));
}

#[test]
fn saved_weights_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.csv");
    let mut t = fig4();
    feedsim::decision::record_outcome(&mut t, "decision_flow", "follow_track_path", ChoiceOutcome::Failure);
    save_weights(&t, &path).unwrap();
    assert_eq!(load_weights(&path).unwrap(), t);
}
