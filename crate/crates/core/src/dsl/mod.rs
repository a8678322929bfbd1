//! Scenario language: state machines, world layout, energy profile and seed
//! weights in one line-oriented text file.
//!
//! ```text
//! [machine top entry]
//! initial -> seek_charge_source
//! state seek_charge_source -> seek on auto
//! choice seek : find_charging_station | find_wireless_power
//! ...
//! [world]
//! grid = 32 32
//! [energy]
//! threshold.low = 0.3
//! [weights]
//! seek.find_wireless_power = 0.8 0.2
//! ```

mod lexer;
mod model;
mod parser;
mod serialize;
mod validate;

use std::fmt;

pub use lexer::MAX_FRACTION_DIGITS;
pub use model::*;
pub use parser::{ENERGY_KEYS, RESERVED, WORLD_KEYS};
pub use serialize::fmt_number;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl Diagnostic {
    pub fn error(span: Span, message: String) -> Self {
        Self {
            severity: Severity::Error,
            line: span.line,
            column: span.column,
            message,
        }
    }

    pub fn warning(span: Span, message: String) -> Self {
        Self {
            severity: Severity::Warning,
            ..Self::error(span, message)
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}:{}: {sev}: {}", self.line, self.column, self.message)
    }
}

/// Parses and validates a scenario.
///
/// On failure the returned list holds every diagnostic (errors and warnings),
/// sorted by position.
pub fn parse_scenario(text: &str) -> Result<ScenarioDef, Vec<Diagnostic>> {
    let (scenario, mut diags) = parser::parse(text);
    diags.extend(validate::validate(&scenario));
    diags.sort_by_key(|d| (d.line, d.column));
    if diags.iter().any(Diagnostic::is_error) {
        Err(diags)
    } else {
        Ok(scenario)
    }
}

/// Structural checks. An empty list means the scenario is sound; warnings
/// flag suspicious but runnable definitions such as unreachable states.
pub fn validate_scenario(s: &ScenarioDef) -> Vec<Diagnostic> {
    validate::validate(s)
}

/// Canonical text for `s`. Parsing the result yields an equal scenario.
pub fn serialize_scenario(s: &ScenarioDef) -> String {
    serialize::serialize(s)
}
