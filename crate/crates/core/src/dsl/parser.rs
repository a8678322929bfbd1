use std::collections::BTreeMap;

use super::lexer::{lex_line, Tok, Token};
use super::model::*;
use super::Diagnostic;
use crate::energy::EnergyProfile;
use crate::world::{Beacon, Cell, Station, WorldMap};

/// Words that introduce statements or arms and cannot name a state.
pub const RESERVED: [&str; 8] = [
    "initial",
    "state",
    "submachine",
    "choice",
    "exit",
    "final",
    "on",
    "if",
];

struct Cursor<'a> {
    toks: &'a [Token],
    pos: usize,
    line_no: usize,
    line_len: usize,
}

type PResult<T> = Result<T, Diagnostic>;

impl<'a> Cursor<'a> {
    fn end_span(&self) -> Span {
        Span::new(self.line_no, self.line_len + 1)
    }

    fn peek(&self) -> Option<&'a Token> {
        self.toks.get(self.pos)
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn unexpected(&self, wanted: &str) -> Diagnostic {
        match self.peek() {
            Some(t) => Diagnostic::error(t.span, format!("expected {wanted}, found {}", t.tok.describe())),
            None => Diagnostic::error(self.end_span(), format!("expected {wanted}, found end of line")),
        }
    }

    fn ident(&mut self, wanted: &str) -> PResult<(String, Span)> {
        match self.peek() {
            Some(Token {
                tok: Tok::Ident(s),
                span,
            }) => {
                self.pos += 1;
                Ok((s.clone(), *span))
            }
            _ => Err(self.unexpected(wanted)),
        }
    }

    fn keyword(&mut self, kw: &str) -> PResult<Span> {
        match self.peek() {
            Some(Token {
                tok: Tok::Ident(s),
                span,
            }) if s == kw => {
                self.pos += 1;
                Ok(*span)
            }
            _ => Err(self.unexpected(&format!("`{kw}`"))),
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Token { tok: Tok::Ident(s), .. }) if s == kw)
    }

    fn punct(&mut self, want: Tok) -> PResult<Span> {
        match self.peek() {
            Some(t) if t.tok == want => {
                self.pos += 1;
                Ok(t.span)
            }
            _ => Err(self.unexpected(&want.describe())),
        }
    }

    fn eat(&mut self, want: Tok) -> bool {
        if self.peek().is_some_and(|t| t.tok == want) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn finish(&self) -> PResult<()> {
        if self.at_end() {
            Ok(())
        } else {
            Err(self.unexpected("end of line"))
        }
    }

    fn numbers(&mut self) -> PResult<Vec<(f64, Span)>> {
        let mut out = Vec::new();
        while let Some(Token {
            tok: Tok::Number(n),
            span,
        }) = self.peek()
        {
            out.push((*n, *span));
            self.pos += 1;
        }
        if out.is_empty() {
            return Err(self.unexpected("a number"));
        }
        self.finish()?;
        Ok(out)
    }

    fn dotted_key(&mut self) -> PResult<(String, Span)> {
        let (mut key, span) = self.ident("a key")?;
        while self.eat(Tok::Dot) {
            let (part, _) = self.ident("a key segment after `.`")?;
            key.push('.');
            key.push_str(&part);
        }
        Ok((key, span))
    }
}

#[derive(Clone, Copy)]
enum Section {
    None,
    Machine(usize),
    World,
    Energy,
    Weights,
}

type KvMap = BTreeMap<String, (Vec<(f64, Span)>, Span)>;

#[derive(Default)]
struct Builder {
    machines: Vec<MachineDef>,
    world_kv: KvMap,
    energy_kv: KvMap,
    weights: Vec<WeightSeed>,
    source: SourceMap,
    diags: Vec<Diagnostic>,
}

/// Parses `text` into a scenario plus any syntax diagnostics.
///
/// The scenario is built on a best-effort basis even when errors are present;
/// callers must not trust it unless the diagnostic list holds no errors.
pub(crate) fn parse(text: &str) -> (ScenarioDef, Vec<Diagnostic>) {
    let mut b = Builder::default();
    let mut section = Section::None;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let toks = match lex_line(line, line_no) {
            Ok(t) => t,
            Err(e) => {
                b.diags.push(Diagnostic::error(e.span, e.message));
                continue;
            }
        };
        if toks.is_empty() {
            continue;
        }
        let mut cur = Cursor {
            toks: &toks,
            pos: 0,
            line_no,
            line_len: line.chars().count(),
        };
        let result = if toks[0].tok == Tok::LBracket {
            b.section_header(&mut cur).map(|s| section = s)
        } else {
            match section {
                Section::None => Err(Diagnostic::error(
                    toks[0].span,
                    "statement outside of any section".to_owned(),
                )),
                Section::Machine(m) => b.machine_stmt(m, &mut cur),
                Section::World => kv_line(&mut cur, &mut b.world_kv),
                Section::Energy => kv_line(&mut cur, &mut b.energy_kv),
                Section::Weights => b.weight_line(&mut cur),
            }
        };
        if let Err(d) = result {
            b.diags.push(d);
        }
    }
    b.finish()
}

fn kv_line(cur: &mut Cursor, map: &mut KvMap) -> PResult<()> {
    let (key, span) = cur.dotted_key()?;
    cur.punct(Tok::Eq)?;
    let values = cur.numbers()?;
    if map.contains_key(&key) {
        return Err(Diagnostic::error(span, format!("duplicate key {key}")));
    }
    map.insert(key, (values, span));
    Ok(())
}

impl Builder {
    fn section_header(&mut self, cur: &mut Cursor) -> PResult<Section> {
        let open = cur.punct(Tok::LBracket)?;
        let (kind, _) = cur.ident("a section name")?;
        let section = match kind.as_str() {
            "machine" => {
                let (name, _) = cur.ident("a machine name")?;
                let entry = if cur.is_keyword("entry") {
                    cur.keyword("entry")?;
                    true
                } else {
                    false
                };
                cur.punct(Tok::RBracket)?;
                cur.finish()?;
                self.machines.push(MachineDef {
                    name,
                    entry,
                    initial: None,
                    states: Vec::new(),
                    exits: Vec::new(),
                    span: open,
                    initial_span: open,
                });
                return Ok(Section::Machine(self.machines.len() - 1));
            }
            "world" => {
                if self.source.world.replace(open).is_some() {
                    return Err(Diagnostic::error(open, "duplicate [world] section".into()));
                }
                Section::World
            }
            "energy" => {
                if self.source.energy.replace(open).is_some() {
                    return Err(Diagnostic::error(open, "duplicate [energy] section".into()));
                }
                Section::Energy
            }
            "weights" => Section::Weights,
            other => {
                return Err(Diagnostic::error(open, format!("unknown section `{other}`")));
            }
        };
        cur.punct(Tok::RBracket)?;
        cur.finish()?;
        Ok(section)
    }

    fn machine_stmt(&mut self, m: usize, cur: &mut Cursor) -> PResult<()> {
        let (kw, kw_span) = cur.ident("a statement keyword")?;
        let machine = &mut self.machines[m];
        match kw.as_str() {
            "initial" => {
                cur.punct(Tok::Arrow)?;
                let (target, span) = cur.ident("the initial state")?;
                cur.finish()?;
                if machine.initial.is_some() {
                    return Err(Diagnostic::error(
                        kw_span,
                        format!("machine {} declares more than one initial", machine.name),
                    ));
                }
                machine.initial = Some(target);
                machine.initial_span = span;
            }
            "state" => {
                let (name, span) = state_name(cur)?;
                let transitions = if cur.eat(Tok::Arrow) {
                    arms(cur)?
                } else {
                    Vec::new()
                };
                cur.finish()?;
                machine.states.push(StateDef {
                    name,
                    kind: StateKind::Simple,
                    transitions,
                    span,
                });
            }
            "submachine" => {
                let (name, span) = state_name(cur)?;
                cur.punct(Tok::Eq)?;
                let (sub, _) = cur.ident("a machine name")?;
                cur.punct(Tok::Arrow)?;
                let transitions = arms(cur)?;
                cur.finish()?;
                machine.states.push(StateDef {
                    name,
                    kind: StateKind::Composite { machine: sub },
                    transitions,
                    span,
                });
            }
            "choice" => {
                let (name, span) = state_name(cur)?;
                cur.punct(Tok::Colon)?;
                let mut options = vec![cur.ident("an option state")?.0];
                while cur.eat(Tok::Pipe) {
                    options.push(cur.ident("an option state")?.0);
                }
                cur.finish()?;
                machine.states.push(StateDef {
                    name,
                    kind: StateKind::Choice { options },
                    transitions: Vec::new(),
                    span,
                });
            }
            "exit" => {
                let (name, span) = cur.ident("an exit name")?;
                cur.punct(Tok::LParen)?;
                let kind = if cur.is_keyword("success") {
                    cur.keyword("success")?;
                    ExitKind::Success
                } else if cur.is_keyword("failure") {
                    cur.keyword("failure")?;
                    ExitKind::Failure
                } else {
                    return Err(cur.unexpected("`success` or `failure`"));
                };
                cur.punct(Tok::RParen)?;
                cur.finish()?;
                machine.exits.push(ExitDef { name, kind, span });
            }
            "final" => {
                let (name, span) = state_name(cur)?;
                cur.finish()?;
                machine.states.push(StateDef {
                    name,
                    kind: StateKind::Final,
                    transitions: Vec::new(),
                    span,
                });
            }
            other => {
                return Err(Diagnostic::error(kw_span, format!("unknown statement `{other}`")));
            }
        }
        Ok(())
    }

    fn weight_line(&mut self, cur: &mut Cursor) -> PResult<()> {
        let (node, span) = cur.ident("a choice node")?;
        cur.punct(Tok::Dot)?;
        let (option, _) = cur.ident("an option")?;
        cur.punct(Tok::Eq)?;
        let values = cur.numbers()?;
        if values.len() != 2 {
            return Err(Diagnostic::error(
                span,
                format!("weight line needs 2 numbers (positive, negative), found {}", values.len()),
            ));
        }
        for &(v, vspan) in &values {
            if !(0.0..=1.0).contains(&v) {
                return Err(Diagnostic::error(vspan, format!("weight out of range [0,1]: {v}")));
            }
        }
        self.weights.push(WeightSeed {
            node,
            option,
            w_pos: values[0].0,
            w_neg: values[1].0,
            span,
        });
        Ok(())
    }

    fn finish(mut self) -> (ScenarioDef, Vec<Diagnostic>) {
        let world = self.build_world();
        let energy = self.build_energy();
        for (key, (_, span)) in self.world_kv.iter().chain(self.energy_kv.iter()) {
            self.source.keys.insert(key.clone(), *span);
        }
        let scenario = ScenarioDef {
            machines: self.machines,
            world,
            energy,
            seed_weights: self.weights,
            source: self.source,
        };
        (scenario, self.diags)
    }

    fn build_world(&mut self) -> WorldMap {
        let mut r = KvReader {
            kv: &self.world_kv,
            diags: &mut self.diags,
            section: self.source.world.unwrap_or_default(),
        };
        let mut w = WorldMap::default();
        if let Some([x, y]) = r.ints::<2>("grid") {
            w.width = x;
            w.height = y;
        }
        if let Some([x, y]) = r.ints::<2>("robot.start") {
            w.robot_start = Cell::new(x, y);
        }

        let has_station = r.any_prefixed("station.") || r.has("track.gap");
        if has_station {
            let pos = r.required_cell("station.pos");
            let ir_radius = r.required_scalar("station.ir_radius");
            let track = r.cells("station.track").unwrap_or_default();
            let gaps = r.cells("track.gap").unwrap_or_default();
            let power = r.scalar("station.power").unwrap_or(Station::DEFAULT_POWER);
            if let (Some(pos), Some(ir_radius)) = (pos, ir_radius) {
                w.station = Some(Station {
                    pos,
                    ir_radius,
                    track,
                    gaps,
                    power,
                });
            }
        }

        if r.any_prefixed("beacon.") {
            let pos = r.required_cell("beacon.pos");
            let tx_power = r.required_scalar("beacon.tx_power");
            let d0 = r.required_scalar("beacon.d0");
            let resonance_radius = r.required_scalar("beacon.resonance_radius");
            let poll_radius = r.required_scalar("beacon.poll_radius");
            let i_min = r.required_scalar("beacon.i_min");
            if let (Some(pos), Some(tx_power), Some(d0), Some(resonance_radius), Some(poll_radius), Some(i_min)) =
                (pos, tx_power, d0, resonance_radius, poll_radius, i_min)
            {
                w.beacon = Some(Beacon {
                    pos,
                    tx_power,
                    d0,
                    resonance_radius,
                    poll_radius,
                    i_min,
                });
            }
        }
        r.reject_unknown(WORLD_KEYS);
        w
    }

    fn build_energy(&mut self) -> EnergyProfile {
        let mut r = KvReader {
            kv: &self.energy_kv,
            diags: &mut self.diags,
            section: self.source.energy.unwrap_or_default(),
        };
        let mut e = EnergyProfile::default();
        if let Some(v) = r.scalar("battery_capacity") {
            e.battery_capacity = v;
        }
        if let Some(v) = r.scalar("capacitor_capacity") {
            e.capacitor_capacity = v;
        }
        e.initial_battery = r.scalar("initial.battery").unwrap_or(e.battery_capacity);
        e.initial_capacitor = r.scalar("initial.capacitor").unwrap_or(e.capacitor_capacity);
        for (key, slot) in [
            ("rate.idle", &mut e.rates.idle),
            ("rate.move", &mut e.rates.movement),
            ("rate.sense", &mut e.rates.sensing),
            ("rate.process", &mut e.rates.processing),
            ("threshold.low", &mut e.thresholds.low_frac),
            ("threshold.lower", &mut e.thresholds.lower_frac),
            ("gain_min", &mut e.gain_min),
        ] {
            if let Some(v) = r.scalar(key) {
                *slot = v;
            }
        }
        if let Some([n]) = r.ints::<1>("max_charge_ticks") {
            if n < 0 {
                r.error_at("max_charge_ticks", "max_charge_ticks must be positive".into());
            } else {
                e.max_charge_ticks = n as u64;
            }
        }
        r.reject_unknown(ENERGY_KEYS);
        e
    }
}

pub const WORLD_KEYS: &[&str] = &[
    "grid",
    "robot.start",
    "station.pos",
    "station.ir_radius",
    "station.track",
    "station.power",
    "track.gap",
    "beacon.pos",
    "beacon.tx_power",
    "beacon.d0",
    "beacon.resonance_radius",
    "beacon.poll_radius",
    "beacon.i_min",
];

pub const ENERGY_KEYS: &[&str] = &[
    "battery_capacity",
    "capacitor_capacity",
    "initial.battery",
    "initial.capacitor",
    "rate.idle",
    "rate.move",
    "rate.sense",
    "rate.process",
    "threshold.low",
    "threshold.lower",
    "gain_min",
    "max_charge_ticks",
];

struct KvReader<'a> {
    kv: &'a KvMap,
    diags: &'a mut Vec<Diagnostic>,
    section: Span,
}

impl KvReader<'_> {
    fn has(&self, key: &str) -> bool {
        self.kv.contains_key(key)
    }

    fn any_prefixed(&self, prefix: &str) -> bool {
        self.kv.keys().any(|k| k.starts_with(prefix))
    }

    fn error_at(&mut self, key: &str, message: String) {
        let span = self.kv.get(key).map_or(self.section, |(_, s)| *s);
        self.diags.push(Diagnostic::error(span, message));
    }

    fn values(&mut self, key: &str) -> Option<&[(f64, Span)]> {
        self.kv.get(key).map(|(v, _)| v.as_slice())
    }

    fn scalar(&mut self, key: &str) -> Option<f64> {
        let vals = self.values(key)?.to_vec();
        if vals.len() != 1 {
            self.error_at(key, format!("{key} takes 1 value, found {}", vals.len()));
            return None;
        }
        Some(vals[0].0)
    }

    fn required_scalar(&mut self, key: &str) -> Option<f64> {
        if !self.has(key) {
            self.diags
                .push(Diagnostic::error(self.section, format!("missing key {key}")));
            return None;
        }
        self.scalar(key)
    }

    fn int_values(&mut self, key: &str) -> Option<Vec<i64>> {
        let vals = self.values(key)?.to_vec();
        let mut out = Vec::with_capacity(vals.len());
        for (v, span) in vals {
            if v.fract() != 0.0 || v.abs() > 1e15 {
                self.diags
                    .push(Diagnostic::error(span, format!("{key} expects integers, found {v}")));
                return None;
            }
            out.push(v as i64);
        }
        Some(out)
    }

    fn ints<const N: usize>(&mut self, key: &str) -> Option<[i64; N]> {
        let vals = self.int_values(key)?;
        match <[i64; N]>::try_from(vals.as_slice()) {
            Ok(a) => Some(a),
            Err(_) => {
                self.error_at(key, format!("{key} takes {N} values, found {}", vals.len()));
                None
            }
        }
    }

    fn required_cell(&mut self, key: &str) -> Option<Cell> {
        if !self.has(key) {
            self.diags
                .push(Diagnostic::error(self.section, format!("missing key {key}")));
            return None;
        }
        self.ints::<2>(key).map(|[x, y]| Cell::new(x, y))
    }

    fn cells(&mut self, key: &str) -> Option<Vec<Cell>> {
        let vals = self.int_values(key)?;
        if vals.len() % 2 != 0 {
            self.error_at(key, format!("{key} takes x y pairs, found {} values", vals.len()));
            return None;
        }
        Some(vals.chunks(2).map(|c| Cell::new(c[0], c[1])).collect())
    }

    fn reject_unknown(&mut self, known: &[&str]) {
        let unknown: Vec<String> = self
            .kv
            .keys()
            .filter(|k| !known.contains(&k.as_str()))
            .cloned()
            .collect();
        for key in unknown {
            self.error_at(&key, format!("unknown key {key}"));
        }
    }
}

fn state_name(cur: &mut Cursor) -> PResult<(String, Span)> {
    let (name, span) = cur.ident("a state name")?;
    if RESERVED.contains(&name.as_str()) {
        return Err(Diagnostic::error(span, format!("`{name}` is a reserved word")));
    }
    Ok((name, span))
}

fn arms(cur: &mut Cursor) -> PResult<Vec<Transition>> {
    let mut out = vec![arm(cur)?];
    while cur.eat(Tok::Comma) {
        out.push(arm(cur)?);
    }
    Ok(out)
}

fn arm(cur: &mut Cursor) -> PResult<Transition> {
    let (first, span) = cur.ident("a transition target")?;
    let target = match first.as_str() {
        "exit" => {
            cur.punct(Tok::Dot)?;
            Target::Exit(cur.ident("an exit name")?.0)
        }
        "final" => Target::Final,
        _ => Target::State(first),
    };
    cur.keyword("on")?;
    let (trigger, _) = cur.ident("a trigger event")?;
    let guard = if cur.is_keyword("if") {
        cur.keyword("if")?;
        Some(cur.ident("a guard name")?.0)
    } else {
        None
    };
    Ok(Transition {
        target,
        trigger,
        guard,
        span,
    })
}
