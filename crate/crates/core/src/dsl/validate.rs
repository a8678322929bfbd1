use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use super::model::*;
use super::parser::RESERVED;
use super::Diagnostic;
use crate::energy::EnergyProfile;
use crate::guard::Guard;

pub(crate) fn validate(s: &ScenarioDef) -> Vec<Diagnostic> {
    let mut d = Vec::new();

    let entries: Vec<&MachineDef> = s.machines.iter().filter(|m| m.entry).collect();
    match entries.as_slice() {
        [] => d.push(Diagnostic::error(Span::new(1, 1), "no entry machine declared".into())),
        [first, rest @ ..] => {
            for extra in rest {
                d.push(Diagnostic::error(
                    extra.span,
                    format!("more than one entry machine ({} and {})", first.name, extra.name),
                ));
            }
        }
    }

    let mut by_name: HashMap<&str, &MachineDef> = HashMap::new();
    for m in &s.machines {
        if by_name.contains_key(m.name.as_str()) {
            d.push(Diagnostic::error(m.span, format!("duplicate machine name {}", m.name)));
        } else {
            by_name.insert(&m.name, m);
        }
    }

    let mut referenced: HashSet<&str> = HashSet::new();
    for m in &s.machines {
        check_machine(m, &by_name, &mut d);
        for st in &m.states {
            if let StateKind::Composite { machine } = &st.kind {
                referenced.insert(machine);
                if let Some(sub) = by_name.get(machine.as_str()) {
                    if sub.entry {
                        d.push(Diagnostic::error(
                            st.span,
                            format!("entry machine {} cannot be used as a submachine", sub.name),
                        ));
                    }
                    if sub.can_finalize() {
                        d.push(Diagnostic::error(
                            st.span,
                            format!(
                                "submachine {} must leave through an exit, not a final state",
                                sub.name
                            ),
                        ));
                    }
                }
            }
        }
    }
    check_cycles(s, &by_name, &mut d);

    for m in &s.machines {
        if !m.entry && !referenced.contains(m.name.as_str()) {
            d.push(Diagnostic::warning(m.span, format!("machine {} is never used", m.name)));
        }
    }

    check_weights(s, &mut d);

    for (key, message) in s.world.problems() {
        d.push(Diagnostic::error(s.source.key(key), message));
    }
    for (key, message) in energy_problems(&s.energy) {
        let span = s
            .source
            .keys
            .get(key)
            .copied()
            .or(s.source.energy)
            .unwrap_or(Span::new(1, 1));
        d.push(Diagnostic::error(span, message));
    }

    d.sort_by_key(|x| (x.line, x.column));
    d
}

fn check_machine(m: &MachineDef, machines: &HashMap<&str, &MachineDef>, d: &mut Vec<Diagnostic>) {
    let mut names: HashSet<&str> = HashSet::new();
    for st in &m.states {
        if !names.insert(&st.name) {
            d.push(Diagnostic::error(
                st.span,
                format!("duplicate state {} in machine {}", st.name, m.name),
            ));
        }
        if RESERVED.contains(&st.name.as_str()) {
            d.push(Diagnostic::error(st.span, format!("`{}` is a reserved word", st.name)));
        }
        if st.name == FINAL_STATE && st.kind != StateKind::Final {
            d.push(Diagnostic::error(
                st.span,
                format!("`{FINAL_STATE}` may only name a final state"),
            ));
        }
    }
    let mut exit_names: HashSet<&str> = HashSet::new();
    for x in &m.exits {
        if !exit_names.insert(&x.name) {
            d.push(Diagnostic::error(
                x.span,
                format!("duplicate exit {} in machine {}", x.name, m.name),
            ));
        }
    }

    match &m.initial {
        None => d.push(Diagnostic::error(
            m.span,
            format!("machine {} has no initial state", m.name),
        )),
        Some(i) if m.state(i).is_none() => d.push(Diagnostic::error(
            m.initial_span,
            format!("unresolved reference {i}"),
        )),
        Some(_) => {}
    }

    if m.exits.is_empty() && !m.can_finalize() {
        d.push(Diagnostic::error(
            m.span,
            format!("machine {} has no exit or final state", m.name),
        ));
    }

    for st in &m.states {
        match &st.kind {
            StateKind::Simple | StateKind::Final => {
                for t in &st.transitions {
                    check_target(m, t, d);
                }
            }
            StateKind::Composite { machine } => {
                let Some(sub) = machines.get(machine.as_str()) else {
                    d.push(Diagnostic::error(st.span, format!("unresolved reference {machine}")));
                    continue;
                };
                for t in &st.transitions {
                    if sub.exit(&t.trigger).is_none() {
                        d.push(Diagnostic::error(
                            t.span,
                            format!("unknown exit {} of machine {}", t.trigger, sub.name),
                        ));
                    }
                    check_target(m, t, d);
                }
                for x in &sub.exits {
                    if !st.transitions.iter().any(|t| t.trigger == x.name) {
                        d.push(Diagnostic::warning(
                            st.span,
                            format!("exit {} of machine {} is not handled", x.name, sub.name),
                        ));
                    }
                }
            }
            StateKind::Choice { options } => {
                if options.len() < 2 {
                    d.push(Diagnostic::error(st.span, "choice requires ≥2 options".into()));
                }
                let mut seen = HashSet::new();
                for o in options {
                    if !seen.insert(o) {
                        d.push(Diagnostic::error(st.span, format!("duplicate option {o}")));
                    }
                    if m.state(o).is_none() {
                        d.push(Diagnostic::error(st.span, format!("unresolved reference {o}")));
                    } else if o == &st.name {
                        d.push(Diagnostic::error(
                            st.span,
                            format!("choice {} cannot select itself", st.name),
                        ));
                    }
                }
            }
        }
    }

    for name in unreachable_states(m) {
        if let Some(st) = m.state(name) {
            d.push(Diagnostic::warning(st.span, format!("unreachable state {name}")));
        }
    }
}

fn check_target(m: &MachineDef, t: &Transition, d: &mut Vec<Diagnostic>) {
    match &t.target {
        Target::State(s) if m.state(s).is_none() => {
            d.push(Diagnostic::error(t.span, format!("unresolved reference {s}")));
        }
        Target::Exit(x) if m.exit(x).is_none() => {
            d.push(Diagnostic::error(t.span, format!("unresolved reference exit.{x}")));
        }
        _ => {}
    }
    if let Some(g) = &t.guard {
        if Guard::from_name(g).is_none() {
            d.push(Diagnostic::error(t.span, format!("unknown guard {g}")));
        }
    }
}

fn unreachable_states(m: &MachineDef) -> Vec<&str> {
    let Some(initial) = m.initial.as_deref() else {
        return Vec::new();
    };
    let mut seen: HashSet<&str> = HashSet::new();
    let mut queue = VecDeque::from([initial]);
    while let Some(name) = queue.pop_front() {
        if !seen.insert(name) {
            continue;
        }
        let Some(st) = m.state(name) else { continue };
        for t in &st.transitions {
            if let Target::State(next) = &t.target {
                queue.push_back(next);
            }
        }
        if let StateKind::Choice { options } = &st.kind {
            queue.extend(options.iter().map(String::as_str));
        }
    }
    m.states
        .iter()
        .map(|s| s.name.as_str())
        .filter(|n| !seen.contains(n))
        .collect()
}

fn check_cycles(s: &ScenarioDef, machines: &HashMap<&str, &MachineDef>, d: &mut Vec<Diagnostic>) {
    fn subs<'a>(m: &'a MachineDef) -> impl Iterator<Item = &'a str> {
        m.states.iter().filter_map(|st| match &st.kind {
            StateKind::Composite { machine } => Some(machine.as_str()),
            _ => None,
        })
    }
    // a machine is on a cycle if it can reach itself through submachine references
    let mut reported = BTreeSet::new();
    for m in &s.machines {
        let mut seen: HashSet<&str> = HashSet::new();
        let mut stack: Vec<&str> = subs(m).collect();
        while let Some(name) = stack.pop() {
            if name == m.name {
                if reported.insert(m.name.as_str()) {
                    d.push(Diagnostic::error(
                        m.span,
                        format!("submachine cycle through {}", m.name),
                    ));
                }
                break;
            }
            if !seen.insert(name) {
                continue;
            }
            if let Some(next) = machines.get(name) {
                stack.extend(subs(next));
            }
        }
    }
}

fn check_weights(s: &ScenarioDef, d: &mut Vec<Diagnostic>) {
    let choices: HashMap<&str, &[String]> = s
        .choice_nodes()
        .map(|(_, st, opts)| (st.name.as_str(), opts))
        .collect();
    let mut seen = HashSet::new();
    for w in &s.seed_weights {
        if !seen.insert((w.node.as_str(), w.option.as_str())) {
            d.push(Diagnostic::error(
                w.span,
                format!("duplicate weight for {}.{}", w.node, w.option),
            ));
        }
        for v in [w.w_pos, w.w_neg] {
            if !(0.0..=1.0).contains(&v) {
                d.push(Diagnostic::error(w.span, format!("weight out of range [0,1]: {v}")));
            }
        }
        match choices.get(w.node.as_str()) {
            None => d.push(Diagnostic::warning(
                w.span,
                format!("weights for unknown choice node {}", w.node),
            )),
            Some(opts) if !opts.contains(&w.option) => d.push(Diagnostic::warning(
                w.span,
                format!("{} is not an option of {}", w.option, w.node),
            )),
            Some(_) => {}
        }
    }
}

pub(crate) fn energy_problems(e: &EnergyProfile) -> Vec<(&'static str, String)> {
    let mut out = Vec::new();
    if !(e.battery_capacity > 0.0) {
        out.push(("battery_capacity", "battery capacity must be positive".to_owned()));
    }
    if !(e.capacitor_capacity >= 0.0) {
        out.push(("capacitor_capacity", "capacitor capacity must be non-negative".to_owned()));
    }
    if !(0.0..=e.battery_capacity).contains(&e.initial_battery) {
        out.push(("initial.battery", "initial battery must lie within [0, capacity]".to_owned()));
    }
    if !(0.0..=e.capacitor_capacity).contains(&e.initial_capacitor) {
        out.push((
            "initial.capacitor",
            "initial capacitor must lie within [0, capacity]".to_owned(),
        ));
    }
    for (key, v) in [
        ("rate.idle", e.rates.idle),
        ("rate.move", e.rates.movement),
        ("rate.sense", e.rates.sensing),
        ("rate.process", e.rates.processing),
    ] {
        if !(v >= 0.0) {
            out.push((key, format!("{key} must be non-negative")));
        }
    }
    let th = e.thresholds;
    if !(0.0 < th.lower_frac && th.lower_frac < th.low_frac && th.low_frac < 1.0) {
        out.push((
            "threshold.low",
            "thresholds must satisfy 0 < lower < low < 1".to_owned(),
        ));
    }
    if !(e.gain_min > 0.0 && e.gain_min <= 1.0) {
        out.push(("gain_min", "gain_min must lie in (0, 1]".to_owned()));
    }
    if e.max_charge_ticks == 0 {
        out.push(("max_charge_ticks", "max_charge_ticks must be positive".to_owned()));
    }
    out
}
