//! Grid world: a charging station reachable by IR beacon or track, and a
//! wireless power beacon with a falling intensity field.
//!
//! The grid is 4-connected with unit steps and no obstacles. `y` grows
//! southward, so `N` is `y - 1`.

use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Cell {
    pub x: i64,
    pub y: i64,
}

impl Cell {
    pub const fn new(x: i64, y: i64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Cell) -> f64 {
        let dx = (self.x - other.x) as f64;
        let dy = (self.y - other.y) as f64;
        dx.hypot(dy)
    }

    pub fn step(self, heading: Heading) -> Cell {
        let (dx, dy) = heading.delta();
        Cell::new(self.x + dx, self.y + dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Heading {
    #[default]
    N,
    E,
    S,
    W,
}

impl Heading {
    /// Tie-break order for every neighbour scan.
    pub const ALL: [Heading; 4] = [Heading::N, Heading::E, Heading::S, Heading::W];

    pub fn delta(self) -> (i64, i64) {
        match self {
            Heading::N => (0, -1),
            Heading::E => (1, 0),
            Heading::S => (0, 1),
            Heading::W => (-1, 0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Station {
    pub pos: Cell,
    pub ir_radius: f64,
    /// Polyline vertices ending at `pos`. Empty when the station has no track.
    pub track: Vec<Cell>,
    /// Track cells that are physically missing and cannot be sensed.
    pub gaps: Vec<Cell>,
    /// Charge delivered per tick while docked.
    pub power: f64,
}

impl Station {
    pub const DEFAULT_POWER: f64 = 5.0;

    /// Track cells in travel order. Each segment walks along x, then y.
    pub fn track_cells(&self) -> Vec<Cell> {
        let mut cells: Vec<Cell> = Vec::new();
        for &vertex in &self.track {
            let mut cur = match cells.last() {
                Some(&c) => c,
                None => {
                    cells.push(vertex);
                    continue;
                }
            };
            while cur != vertex {
                if cur.x != vertex.x {
                    cur.x += (vertex.x - cur.x).signum();
                } else {
                    cur.y += (vertex.y - cur.y).signum();
                }
                cells.push(cur);
            }
        }
        cells
    }

    fn is_gap(&self, c: Cell) -> bool {
        self.gaps.contains(&c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Beacon {
    pub pos: Cell,
    pub tx_power: f64,
    /// Distance at which intensity falls to a quarter of `tx_power`.
    pub d0: f64,
    pub resonance_radius: f64,
    pub poll_radius: f64,
    pub i_min: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldMap {
    pub width: i64,
    pub height: i64,
    pub robot_start: Cell,
    pub station: Option<Station>,
    pub beacon: Option<Beacon>,
}

impl Default for WorldMap {
    fn default() -> Self {
        Self {
            width: 32,
            height: 32,
            robot_start: Cell::new(0, 0),
            station: None,
            beacon: None,
        }
    }
}

impl WorldMap {
    pub fn contains(&self, c: Cell) -> bool {
        (0..self.width).contains(&c.x) && (0..self.height).contains(&c.y)
    }

    /// Structural problems, each as `(key, message)`.
    pub fn problems(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        if self.width <= 0 || self.height <= 0 {
            out.push(("grid", "grid dimensions must be positive".to_owned()));
            return out;
        }
        if !self.contains(self.robot_start) {
            out.push(("robot.start", "robot start lies outside the grid".to_owned()));
        }
        if let Some(st) = &self.station {
            if !self.contains(st.pos) {
                out.push(("station.pos", "station lies outside the grid".to_owned()));
            }
            if !(st.ir_radius > 0.0) {
                out.push(("station.ir_radius", "radius must be positive".to_owned()));
            }
            if !(st.power >= 0.0) {
                out.push(("station.power", "station power must be non-negative".to_owned()));
            }
            if st.track.iter().any(|&c| !self.contains(c)) {
                out.push(("station.track", "track leaves the grid".to_owned()));
            }
            if let Some(&end) = st.track.last() {
                if end != st.pos {
                    out.push(("station.track", "track must end at the station".to_owned()));
                }
            }
            if st.gaps.iter().any(|&c| !self.contains(c)) {
                out.push(("track.gap", "gap cell outside the grid".to_owned()));
            }
        }
        if let Some(b) = &self.beacon {
            if !self.contains(b.pos) {
                out.push(("beacon.pos", "beacon lies outside the grid".to_owned()));
            }
            for (key, v) in [
                ("beacon.d0", b.d0),
                ("beacon.resonance_radius", b.resonance_radius),
                ("beacon.poll_radius", b.poll_radius),
            ] {
                if !(v > 0.0) {
                    out.push((key, "radius must be positive".to_owned()));
                }
            }
            if !(b.tx_power >= 0.0) {
                out.push(("beacon.tx_power", "power must be non-negative".to_owned()));
            }
            if !(b.i_min >= 0.0) {
                out.push(("beacon.i_min", "threshold must be non-negative".to_owned()));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct RobotPose {
    pub pos: Cell,
    pub heading: Heading,
}

impl RobotPose {
    pub fn at(pos: Cell) -> Self {
        Self {
            pos,
            heading: Heading::N,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CueReading {
    /// Bearing to the station in radians, when its IR signal is seen.
    pub ir: Option<f64>,
    /// Nearest visible track cell.
    pub track: Option<Cell>,
    pub beacon_poll: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cue {
    Ir,
    Track,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FollowStatus {
    Progressing,
    Arrived,
    Lost,
}

/// `tx_power * (d0 / (d0 + d))^2`; zero without a beacon.
pub fn intensity_at(w: &WorldMap, pos: Cell) -> f64 {
    match &w.beacon {
        Some(b) => {
            let d = pos.distance(b.pos);
            let k = b.d0 / (b.d0 + d);
            b.tx_power * k * k
        }
        None => 0.0,
    }
}

/// Lorentzian roll-off inside the resonance radius, zero outside.
pub fn coupling_efficiency(w: &WorldMap, pos: Cell) -> f64 {
    match &w.beacon {
        Some(b) => {
            let d = pos.distance(b.pos);
            if d <= b.resonance_radius {
                let r = d / b.resonance_radius;
                1.0 / (1.0 + r * r)
            } else {
                0.0
            }
        }
        None => 0.0,
    }
}

/// Power absorbed per tick at `pos`.
pub fn wireless_charge_power(w: &WorldMap, pos: Cell) -> f64 {
    w.beacon
        .as_ref()
        .map_or(0.0, |b| coupling_efficiency(w, pos) * b.tx_power)
}

pub fn is_signal_sufficient(w: &WorldMap, pos: Cell) -> bool {
    w.beacon
        .as_ref()
        .is_some_and(|b| intensity_at(w, pos) >= b.i_min)
}

pub fn poll_beacon(w: &WorldMap, p: &RobotPose, gain: f64) -> Option<f64> {
    let b = w.beacon.as_ref()?;
    (p.pos.distance(b.pos) <= b.poll_radius * gain).then(|| intensity_at(w, p.pos))
}

fn visible_track_near(st: &Station, pos: Cell) -> Option<(usize, Cell)> {
    // nearest sensed cell; ties go to the cell further along the track
    st.track_cells()
        .into_iter()
        .enumerate()
        .filter(|&(_, c)| !st.is_gap(c) && c.distance(pos) <= 1.0)
        .min_by(|a, b| {
            a.1.distance(pos)
                .total_cmp(&b.1.distance(pos))
                .then(b.0.cmp(&a.0))
        })
}

pub fn detect_station_cues(w: &WorldMap, p: &RobotPose, gain: f64) -> CueReading {
    let Some(st) = &w.station else {
        return CueReading::default();
    };
    let ir = (p.pos.distance(st.pos) <= st.ir_radius * gain).then(|| {
        let dx = (st.pos.x - p.pos.x) as f64;
        let dy = (st.pos.y - p.pos.y) as f64;
        if dx == 0.0 && dy == 0.0 {
            0.0
        } else {
            dy.atan2(dx).rem_euclid(2.0 * PI)
        }
    });
    CueReading {
        ir,
        track: visible_track_near(st, p.pos).map(|(_, c)| c),
        beacon_poll: None,
    }
}

/// Station cues plus a beacon poll.
pub fn read_cues(w: &WorldMap, p: &RobotPose, gain: f64) -> CueReading {
    CueReading {
        beacon_poll: poll_beacon(w, p, gain),
        ..detect_station_cues(w, p, gain)
    }
}

fn move_toward(w: &WorldMap, p: &RobotPose, target: Cell) -> RobotPose {
    let here = p.pos.distance(target);
    let mut best: Option<(Heading, Cell, f64)> = None;
    for h in Heading::ALL {
        let c = p.pos.step(h);
        if !w.contains(c) {
            continue;
        }
        let d = c.distance(target);
        if d < here && best.is_none_or(|(_, _, bd)| d < bd) {
            best = Some((h, c, d));
        }
    }
    match best {
        Some((heading, pos, _)) => RobotPose { pos, heading },
        None => *p,
    }
}

/// One step along the chosen station cue.
pub fn step_follow(w: &WorldMap, p: &RobotPose, cue: Cue, gain: f64) -> (RobotPose, FollowStatus) {
    let Some(st) = &w.station else {
        return (*p, FollowStatus::Lost);
    };
    if p.pos == st.pos {
        return (*p, FollowStatus::Arrived);
    }
    let next = match cue {
        Cue::Ir => move_toward(w, p, st.pos),
        Cue::Track => {
            let cells = st.track_cells();
            match cells.iter().rposition(|&c| c == p.pos) {
                Some(i) if i + 1 < cells.len() => move_toward(w, p, cells[i + 1]),
                Some(_) => *p,
                None => match visible_track_near(st, p.pos) {
                    Some((_, c)) => move_toward(w, p, c),
                    None => return (*p, FollowStatus::Lost),
                },
            }
        }
    };
    if next.pos == st.pos {
        return (next, FollowStatus::Arrived);
    }
    let still_seen = match cue {
        Cue::Ir => next.pos.distance(st.pos) <= st.ir_radius * gain,
        Cue::Track => visible_track_near(st, next.pos).is_some(),
    };
    let status = if still_seen {
        FollowStatus::Progressing
    } else {
        FollowStatus::Lost
    };
    (next, status)
}

/// Greedy climb of the intensity field; stays put at a local maximum.
pub fn step_seek_intensity(w: &WorldMap, p: &RobotPose) -> RobotPose {
    let mut best_i = intensity_at(w, p.pos);
    let mut best: Option<RobotPose> = None;
    for h in Heading::ALL {
        let c = p.pos.step(h);
        if !w.contains(c) {
            continue;
        }
        let i = intensity_at(w, c);
        if i > best_i {
            best_i = i;
            best = Some(RobotPose { pos: c, heading: h });
        }
    }
    best.unwrap_or(*p)
}
