//! Verdict rendering and saved witness files.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::checker::{Stats, Status, Trace, Verdict};

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct VerdictReport<'a> {
    pub property: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub formula: Option<&'a str>,
    pub status: &'static str,
    pub states_visited: u64,
    pub transitions_taken: u64,
    /// Seconds.
    pub wall_time: f64,
    pub depth: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<&'a Trace>,
}

impl<'a> VerdictReport<'a> {
    pub fn new(v: &'a Verdict, formula: Option<&'a str>) -> Self {
        let (value, reason) = match &v.status {
            Status::Extremum { value, .. } => (Some(*value), None),
            Status::Inconclusive { reason } => (None, Some(reason.as_str())),
            _ => (None, None),
        };
        Self {
            property: &v.property,
            formula,
            status: v.status.name(),
            states_visited: v.stats.states_visited,
            transitions_taken: v.stats.transitions_taken,
            wall_time: v.stats.wall_time.as_secs_f64(),
            depth: v.stats.depth,
            value,
            reason,
            trace: v.trace(),
        }
    }
}

pub fn stats_line(s: &Stats) -> String {
    format!(
        "states={} transitions={} depth={} time={:.3}s",
        s.states_visited,
        s.transitions_taken,
        s.depth,
        s.wall_time.as_secs_f64()
    )
}

pub fn trace_text(t: &Trace) -> String {
    let mut s = String::new();
    if t.is_empty() {
        s.push_str("    (initial state)\n");
    }
    for (i, l) in t.labels.iter().enumerate() {
        let flag = if l.reverted { "  [reverted]" } else { "" };
        let _ = writeln!(s, "    {:>2}. {}{flag}", i + 1, l.process);
        for e in &l.events {
            let args: Vec<String> = e.payload.iter().map(i64::to_string).collect();
            let _ = writeln!(s, "          {}[{}]", e.name, args.join(", "));
        }
    }
    s
}

pub fn verdict_text(v: &Verdict) -> String {
    let mut s = match &v.status {
        Status::Extremum { value, .. } => format!("{:<24} {} = {value}", v.property, v.status.name()),
        Status::Inconclusive { reason } => format!("{:<24} {} ({reason})", v.property, v.status.name()),
        _ => format!("{:<24} {}", v.property, v.status.name()),
    };
    let _ = writeln!(s, "  {}", stats_line(&v.stats));
    if let Some(t) = v.trace() {
        s.push_str(&trace_text(t));
    }
    s
}

/// A witness that replays without any other input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TraceFile {
    /// Scenario in normal form.
    pub scenario: String,
    pub property: String,
    pub formula: String,
    pub trace: Trace,
}
