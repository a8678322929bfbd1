//! Scenarios shipped with the crate.

pub const STATION_ONLY: &str = include_str!("../scenarios/station_only.scn");
pub const WIRELESS_ONLY: &str = include_str!("../scenarios/wireless_only.scn");
pub const DUAL_SOURCE: &str = include_str!("../scenarios/dual_source.scn");

pub const ALL: [(&str, &str); 3] = [
    ("station_only", STATION_ONLY),
    ("wireless_only", WIRELESS_ONLY),
    ("dual_source", DUAL_SOURCE),
];

/// Looks a shipped scenario up by file stem.
pub fn builtin(name: &str) -> Option<&'static str> {
    ALL.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}
