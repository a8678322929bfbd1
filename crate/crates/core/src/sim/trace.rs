//! JSON-lines episode trace.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use crate::dsl::fmt_number;
use crate::energy::Mood;

/// One trace line. `step` is the tick the record belongs to; a tick may
/// carry several records (transitions, weight updates, then its summary).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceEvent {
    pub step: u64,
    pub state: String,
    pub event: String,
    pub node: Option<String>,
    pub option: Option<String>,
    pub w_pos_before: Option<f64>,
    pub w_pos_after: Option<f64>,
    pub w_neg_before: Option<f64>,
    pub w_neg_after: Option<f64>,
    pub battery: Option<f64>,
    pub capacitor: Option<f64>,
    pub mood: Option<Mood>,
    pub x: Option<i64>,
    pub y: Option<i64>,
}

fn quoted(s: &str) -> String {
    serde_json::to_string(s).expect("string serialization")
}

impl TraceEvent {
    /// Keys in fixed order; absent values are left out.
    pub fn to_json_line(&self) -> String {
        let mut out = format!(
            "{{\"step\":{},\"state\":{},\"event\":{}",
            self.step,
            quoted(&self.state),
            quoted(&self.event)
        );
        for (key, v) in [("node", &self.node), ("option", &self.option)] {
            if let Some(v) = v {
                write!(out, ",\"{key}\":{}", quoted(v)).unwrap();
            }
        }
        for (key, v) in [
            ("w_pos_before", self.w_pos_before),
            ("w_pos_after", self.w_pos_after),
            ("w_neg_before", self.w_neg_before),
            ("w_neg_after", self.w_neg_after),
            ("battery", self.battery),
            ("capacitor", self.capacitor),
        ] {
            if let Some(v) = v {
                write!(out, ",\"{key}\":{}", fmt_number(v)).unwrap();
            }
        }
        if let Some(m) = self.mood {
            write!(out, ",\"mood\":{}", quoted(m.as_str())).unwrap();
        }
        for (key, v) in [("x", self.x), ("y", self.y)] {
            if let Some(v) = v {
                write!(out, ",\"{key}\":{v}").unwrap();
            }
        }
        out.push('}');
        out
    }
}

pub fn trace_to_jsonl(trace: &[TraceEvent]) -> String {
    let mut out = String::new();
    for ev in trace {
        out.push_str(&ev.to_json_line());
        out.push('\n');
    }
    out
}

pub fn write_trace(trace: &[TraceEvent], path: &Path) -> io::Result<()> {
    fs::write(path, trace_to_jsonl(trace))
}
