use std::fmt::Write;

use super::model::*;
use crate::world::Cell;

/// Decimal with at most 9 fractional digits and no trailing zeros.
pub fn fmt_number(v: f64) -> String {
    let mut s = format!("{v:.9}");
    if s.contains('.') {
        s.truncate(s.trim_end_matches('0').trim_end_matches('.').len());
    }
    if s == "-0" {
        s = "0".to_owned();
    }
    s
}

fn cells(cs: &[Cell]) -> String {
    cs.iter()
        .map(|c| format!("{} {}", c.x, c.y))
        .collect::<Vec<_>>()
        .join(" ")
}

fn arm(t: &Transition) -> String {
    let mut s = format!("{} on {}", t.target, t.trigger);
    if let Some(g) = &t.guard {
        write!(s, " if {g}").unwrap();
    }
    s
}

fn arms(ts: &[Transition]) -> String {
    ts.iter().map(arm).collect::<Vec<_>>().join(", ")
}

pub(crate) fn serialize(s: &ScenarioDef) -> String {
    let mut out = String::new();
    for m in &s.machines {
        let entry = if m.entry { " entry" } else { "" };
        writeln!(out, "[machine {}{entry}]", m.name).unwrap();
        if let Some(i) = &m.initial {
            writeln!(out, "initial -> {i}").unwrap();
        }
        for st in &m.states {
            match &st.kind {
                StateKind::Simple if st.transitions.is_empty() => {
                    writeln!(out, "state {}", st.name).unwrap();
                }
                StateKind::Simple => {
                    writeln!(out, "state {} -> {}", st.name, arms(&st.transitions)).unwrap();
                }
                StateKind::Composite { machine } => {
                    writeln!(
                        out,
                        "submachine {} = {machine} -> {}",
                        st.name,
                        arms(&st.transitions)
                    )
                    .unwrap();
                }
                StateKind::Choice { options } => {
                    writeln!(out, "choice {} : {}", st.name, options.join(" | ")).unwrap();
                }
                StateKind::Final => {
                    writeln!(out, "final {}", st.name).unwrap();
                }
            }
        }
        for x in &m.exits {
            writeln!(out, "exit {} ({})", x.name, x.kind.as_str()).unwrap();
        }
        out.push('\n');
    }

    let w = &s.world;
    out.push_str("[world]\n");
    writeln!(out, "grid = {} {}", w.width, w.height).unwrap();
    writeln!(out, "robot.start = {} {}", w.robot_start.x, w.robot_start.y).unwrap();
    if let Some(st) = &w.station {
        writeln!(out, "station.pos = {} {}", st.pos.x, st.pos.y).unwrap();
        writeln!(out, "station.ir_radius = {}", fmt_number(st.ir_radius)).unwrap();
        writeln!(out, "station.power = {}", fmt_number(st.power)).unwrap();
        if !st.track.is_empty() {
            writeln!(out, "station.track = {}", cells(&st.track)).unwrap();
        }
        if !st.gaps.is_empty() {
            writeln!(out, "track.gap = {}", cells(&st.gaps)).unwrap();
        }
    }
    if let Some(b) = &w.beacon {
        writeln!(out, "beacon.pos = {} {}", b.pos.x, b.pos.y).unwrap();
        for (key, v) in [
            ("tx_power", b.tx_power),
            ("d0", b.d0),
            ("resonance_radius", b.resonance_radius),
            ("poll_radius", b.poll_radius),
            ("i_min", b.i_min),
        ] {
            writeln!(out, "beacon.{key} = {}", fmt_number(v)).unwrap();
        }
    }
    out.push('\n');

    let e = &s.energy;
    out.push_str("[energy]\n");
    for (key, v) in [
        ("battery_capacity", e.battery_capacity),
        ("capacitor_capacity", e.capacitor_capacity),
        ("initial.battery", e.initial_battery),
        ("initial.capacitor", e.initial_capacitor),
        ("rate.idle", e.rates.idle),
        ("rate.move", e.rates.movement),
        ("rate.sense", e.rates.sensing),
        ("rate.process", e.rates.processing),
        ("threshold.low", e.thresholds.low_frac),
        ("threshold.lower", e.thresholds.lower_frac),
        ("gain_min", e.gain_min),
    ] {
        writeln!(out, "{key} = {}", fmt_number(v)).unwrap();
    }
    writeln!(out, "max_charge_ticks = {}", e.max_charge_ticks).unwrap();

    if !s.seed_weights.is_empty() {
        out.push_str("\n[weights]\n");
        for w in &s.seed_weights {
            writeln!(
                out,
                "{}.{} = {} {}",
                w.node,
                w.option,
                fmt_number(w.w_pos),
                fmt_number(w.w_neg)
            )
            .unwrap();
        }
    }
    out
}
