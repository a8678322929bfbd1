//! Onboard energy: main battery, countdown capacitor, and the derived mood.
//!
//! The battery is drained first; the capacitor is a reserve that only the
//! wireless source can refill. Levels below [`ENERGY_EPSILON`] are snapped to
//! zero so that repeated decimal drains reach empty on the expected tick.

use std::fmt;

use thiserror::Error;

pub const ENERGY_EPSILON: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnergyError {
    #[error("charging power must be a non-negative number, got {0}")]
    InvalidPower(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ChargeSource {
    Station,
    Wireless,
}

impl ChargeSource {
    pub fn as_str(self) -> &'static str {
        match self {
            ChargeSource::Station => "station",
            ChargeSource::Wireless => "wireless",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyState {
    pub battery: f64,
    pub battery_capacity: f64,
    pub capacitor: f64,
    pub capacitor_capacity: f64,
    pub charging_source: Option<ChargeSource>,
}

impl EnergyState {
    pub fn total(&self) -> f64 {
        self.battery + self.capacitor
    }

    pub fn battery_fraction(&self) -> f64 {
        if self.battery_capacity > 0.0 {
            self.battery / self.battery_capacity
        } else {
            0.0
        }
    }

    pub fn is_dead(&self) -> bool {
        self.battery == 0.0 && self.capacitor == 0.0
    }

    pub fn battery_full(&self) -> bool {
        self.battery >= self.battery_capacity
    }

    pub fn capacitor_full(&self) -> bool {
        self.capacitor >= self.capacitor_capacity
    }
}

/// Drain per tick for each kind of activity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DischargeProfile {
    pub idle: f64,
    pub movement: f64,
    pub sensing: f64,
    pub processing: f64,
}

impl Default for DischargeProfile {
    fn default() -> Self {
        Self {
            idle: 0.1,
            movement: 0.5,
            sensing: 0.2,
            processing: 0.2,
        }
    }
}

/// Activities performed during one tick. Idle drain always applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ActivitySet {
    pub movement: bool,
    pub sensing: bool,
    pub processing: bool,
}

impl ActivitySet {
    pub const IDLE: ActivitySet = ActivitySet {
        movement: false,
        sensing: false,
        processing: false,
    };

    pub fn union(self, other: ActivitySet) -> ActivitySet {
        ActivitySet {
            movement: self.movement || other.movement,
            sensing: self.sensing || other.sensing,
            processing: self.processing || other.processing,
        }
    }

    pub fn drain(&self, profile: &DischargeProfile) -> f64 {
        let mut d = profile.idle;
        if self.movement {
            d += profile.movement;
        }
        if self.sensing {
            d += profile.sensing;
        }
        if self.processing {
            d += profile.processing;
        }
        d
    }
}

/// Battery fractions at which `power_low` and `power_lower` fire.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub low_frac: f64,
    pub lower_frac: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            low_frac: 0.3,
            lower_frac: 0.15,
        }
    }
}

/// Everything the `[energy]` section of a scenario configures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyProfile {
    pub battery_capacity: f64,
    pub capacitor_capacity: f64,
    pub initial_battery: f64,
    pub initial_capacitor: f64,
    pub rates: DischargeProfile,
    pub thresholds: Thresholds,
    pub gain_min: f64,
    pub max_charge_ticks: u64,
}

impl Default for EnergyProfile {
    fn default() -> Self {
        Self {
            battery_capacity: 100.0,
            capacitor_capacity: 10.0,
            initial_battery: 100.0,
            initial_capacitor: 10.0,
            rates: DischargeProfile::default(),
            thresholds: Thresholds::default(),
            gain_min: 0.2,
            max_charge_ticks: 200,
        }
    }
}

impl EnergyProfile {
    pub fn initial_state(&self) -> EnergyState {
        EnergyState {
            battery: self.initial_battery,
            battery_capacity: self.battery_capacity,
            capacitor: self.initial_capacitor,
            capacitor_capacity: self.capacitor_capacity,
            charging_source: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mood {
    Normal,
    Seeking,
    Charging,
    Distressed,
    Dead,
}

impl Mood {
    pub fn as_str(self) -> &'static str {
        match self {
            Mood::Normal => "normal",
            Mood::Seeking => "seeking",
            Mood::Charging => "charging",
            Mood::Distressed => "distressed",
            Mood::Dead => "dead",
        }
    }
}

impl fmt::Display for Mood {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DifferentialReading {
    pub operating_power: f64,
    pub countdown_value: f64,
    pub delta: f64,
}

fn snap(level: f64) -> f64 {
    if level < ENERGY_EPSILON {
        0.0
    } else {
        level
    }
}

/// Removes one tick's drain, battery first, then the capacitor.
pub fn tick_discharge(s: EnergyState, active: ActivitySet, profile: &DischargeProfile) -> EnergyState {
    let drain = active.drain(profile);
    let mut next = s;
    if next.battery >= drain {
        next.battery = snap(next.battery - drain);
    } else {
        let spill = drain - next.battery;
        next.battery = 0.0;
        next.capacitor = snap((next.capacitor - spill).max(0.0));
    }
    next
}

/// Adds `power * dt` from `source`.
///
/// The station fills the battery only. Wireless power fills the battery and
/// sends the surplus into the capacitor.
pub fn apply_charge(
    s: EnergyState,
    source: ChargeSource,
    power: f64,
    dt: f64,
) -> Result<EnergyState, EnergyError> {
    if power.is_nan() || power < 0.0 {
        return Err(EnergyError::InvalidPower(power));
    }
    let mut next = s;
    let incoming = power * dt.max(0.0);
    let room = (s.battery_capacity - s.battery).max(0.0);
    let into_battery = incoming.min(room);
    next.battery = (s.battery + into_battery).min(s.battery_capacity);
    if source == ChargeSource::Wireless {
        let surplus = incoming - into_battery;
        next.capacitor = (s.capacitor + surplus).min(s.capacitor_capacity);
    }
    next.charging_source = Some(source);
    Ok(next)
}

pub fn differential_reading(s: &EnergyState) -> DifferentialReading {
    DifferentialReading {
        operating_power: s.battery,
        countdown_value: s.capacitor,
        delta: s.battery - s.capacitor,
    }
}

/// Precedence: dead, charging, distressed, seeking, normal.
pub fn mood_of(s: &EnergyState, th: &Thresholds) -> Mood {
    let frac = s.battery_fraction();
    if s.is_dead() {
        Mood::Dead
    } else if s.charging_source.is_some() {
        Mood::Charging
    } else if s.battery == 0.0 || frac < th.lower_frac {
        Mood::Distressed
    } else if frac < th.low_frac {
        Mood::Seeking
    } else {
        Mood::Normal
    }
}

/// Sensing gain falls with the battery, floored at `gain_min`.
pub fn sensor_gain(s: &EnergyState, gain_min: f64) -> f64 {
    s.battery_fraction().clamp(0.0, 1.0).max(gain_min)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ThresholdEvent {
    PowerLow,
    PowerLower,
}

impl ThresholdEvent {
    pub fn event_name(self) -> &'static str {
        match self {
            ThresholdEvent::PowerLow => "power_low",
            ThresholdEvent::PowerLower => "power_lower",
        }
    }
}

/// Fires each threshold once per downward crossing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ThresholdMonitor {
    low_armed: bool,
    lower_armed: bool,
}

impl Default for ThresholdMonitor {
    fn default() -> Self {
        Self {
            low_armed: true,
            lower_armed: true,
        }
    }
}

impl ThresholdMonitor {
    pub fn observe(&mut self, s: &EnergyState, th: &Thresholds) -> Vec<ThresholdEvent> {
        let frac = s.battery_fraction();
        let mut fired = Vec::new();
        for (armed, level, event) in [
            (&mut self.low_armed, th.low_frac, ThresholdEvent::PowerLow),
            (&mut self.lower_armed, th.lower_frac, ThresholdEvent::PowerLower),
        ] {
            if *armed && frac < level {
                *armed = false;
                fired.push(event);
            } else if !*armed && frac > level {
                *armed = true;
            }
        }
        fired
    }
}
