//! What the robot does while a given leaf state is active.
//!
//! Activities are bound by state name. Each tick the active leaf moves the
//! robot, reports which subsystems were busy, and may raise one event.

use crate::energy::{ActivitySet, ChargeSource, EnergyState};
use crate::world::{
    coupling_efficiency, detect_station_cues, poll_beacon, step_follow, step_seek_intensity,
    wireless_charge_power, Cue, FollowStatus, RobotPose, WorldMap,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activity {
    FollowCue(Cue),
    PollBeacon,
    EngageResonance,
    NavigateProximity,
    StationCharge,
    WirelessCharge,
    Idle,
}

impl Activity {
    pub fn for_state(name: &str) -> Activity {
        match name {
            "follow_ir_signal" => Activity::FollowCue(Cue::Ir),
            "follow_track_path" => Activity::FollowCue(Cue::Track),
            "poll_power_beacon" => Activity::PollBeacon,
            "engage_resonance" => Activity::EngageResonance,
            "navigate_proximity" | "seek_intensity" => Activity::NavigateProximity,
            "recharge" | "feeding" => Activity::StationCharge,
            "charge" => Activity::WirelessCharge,
            _ => Activity::Idle,
        }
    }

    pub fn is_charging(self) -> bool {
        matches!(self, Activity::StationCharge | Activity::WirelessCharge)
    }
}

const SENSE_PROCESS: ActivitySet = ActivitySet {
    movement: false,
    sensing: true,
    processing: true,
};

const ACTIVE: ActivitySet = ActivitySet {
    movement: true,
    sensing: true,
    processing: true,
};

pub const PROCESS: ActivitySet = ActivitySet {
    movement: false,
    sensing: false,
    processing: true,
};

#[derive(Debug, Clone, PartialEq)]
pub struct StepEffect {
    pub pose: RobotPose,
    pub active: ActivitySet,
    pub event: Option<&'static str>,
    pub charge: Option<(ChargeSource, f64)>,
}

/// Whether a charging activity has filled what its source can fill: the
/// battery for the station, battery and capacitor for wireless power.
pub fn charge_complete(activity: Activity, energy: &EnergyState) -> bool {
    match activity {
        Activity::StationCharge => energy.battery_full(),
        Activity::WirelessCharge => energy.battery_full() && energy.capacitor_full(),
        _ => false,
    }
}

/// One tick of `activity`. Charging activities report the power they
/// receive; ending the charge is up to the caller.
pub fn perform(activity: Activity, world: &WorldMap, pose: RobotPose, gain: f64) -> StepEffect {
    let mut fx = StepEffect {
        pose,
        active: ActivitySet::IDLE,
        event: None,
        charge: None,
    };
    match activity {
        Activity::FollowCue(cue) => {
            let seen = detect_station_cues(world, &pose, gain);
            let visible = match cue {
                Cue::Ir => seen.ir.is_some(),
                Cue::Track => seen.track.is_some(),
            };
            let at_station = world.station.as_ref().is_some_and(|s| s.pos == pose.pos);
            if !visible && !at_station {
                fx.active = SENSE_PROCESS;
                fx.event = Some("lost");
                return fx;
            }
            let (next, status) = step_follow(world, &pose, cue, gain);
            fx.active = ACTIVE;
            fx.pose = next;
            fx.event = match status {
                FollowStatus::Arrived => Some("arrived"),
                FollowStatus::Lost => Some("lost"),
                FollowStatus::Progressing => None,
            };
        }
        Activity::PollBeacon => {
            fx.active = SENSE_PROCESS;
            if poll_beacon(world, &pose, gain).is_none() {
                fx.event = Some("no_signal");
            } else if coupling_efficiency(world, pose.pos) > 0.0 {
                fx.event = Some("detected");
            } else {
                let next = step_seek_intensity(world, &pose);
                if next.pos == pose.pos {
                    fx.event = Some("no_signal");
                } else {
                    fx.active = ACTIVE;
                    fx.pose = next;
                }
            }
        }
        Activity::EngageResonance => {
            fx.active = PROCESS;
            fx.event = Some(if coupling_efficiency(world, pose.pos) > 0.0 {
                "engaged"
            } else {
                "no_signal"
            });
        }
        Activity::NavigateProximity => {
            fx.active = ACTIVE;
            fx.pose = step_seek_intensity(world, &pose);
            fx.event = Some("moved");
        }
        Activity::StationCharge => {
            fx.charge = world
                .station
                .as_ref()
                .filter(|s| s.pos == pose.pos)
                .map(|s| (ChargeSource::Station, s.power));
        }
        Activity::WirelessCharge => {
            let p = wireless_charge_power(world, pose.pos);
            fx.charge = (p > 0.0).then_some((ChargeSource::Wireless, p));
        }
        Activity::Idle => {}
    }
    fx
}
