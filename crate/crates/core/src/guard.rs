//! Named guard predicates usable in transition arms (`... on e if name`).

use crate::energy::{EnergyState, Thresholds};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Guard {
    IsSignalSufficient,
    BatteryFull,
    CapacitorFull,
    BatteryLow,
    BatteryLower,
    AtStation,
}

impl Guard {
    pub const ALL: [Guard; 6] = [
        Guard::IsSignalSufficient,
        Guard::BatteryFull,
        Guard::CapacitorFull,
        Guard::BatteryLow,
        Guard::BatteryLower,
        Guard::AtStation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Guard::IsSignalSufficient => "isSignalSufficient",
            Guard::BatteryFull => "batteryFull",
            Guard::CapacitorFull => "capacitorFull",
            Guard::BatteryLow => "batteryLow",
            Guard::BatteryLower => "batteryLower",
            Guard::AtStation => "atStation",
        }
    }

    pub fn from_name(name: &str) -> Option<Guard> {
        Guard::ALL.into_iter().find(|g| g.name() == name)
    }
}

/// Read-only snapshot of what the robot senses when a dispatch happens.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuardContext {
    pub energy: EnergyState,
    pub thresholds: Thresholds,
    /// Wireless intensity at the robot's cell.
    pub intensity: f64,
    /// Charging threshold of the beacon, if the world has one.
    pub i_min: Option<f64>,
    pub at_station: bool,
}

impl GuardContext {
    pub fn eval(&self, guard: Guard) -> bool {
        let frac = self.energy.battery_fraction();
        match guard {
            Guard::IsSignalSufficient => self.i_min.is_some_and(|m| self.intensity >= m),
            Guard::BatteryFull => self.energy.battery_full(),
            Guard::CapacitorFull => self.energy.capacitor_full(),
            Guard::BatteryLow => frac < self.thresholds.low_frac,
            Guard::BatteryLower => frac < self.thresholds.lower_frac,
            Guard::AtStation => self.at_station,
        }
    }

    /// Evaluates a guard by name; unknown names are never satisfied.
    pub fn eval_named(&self, name: &str) -> bool {
        Guard::from_name(name).is_some_and(|g| self.eval(g))
    }
}
