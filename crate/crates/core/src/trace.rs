//! Execution traces, stored as JSON lines.
//!
//! Every event carries the allocation right after the step, so a trace can
//! be checked on its own and also compared against a fresh re-run.

use serde::{Deserialize, Serialize};

use crate::allocation::{Allocation, Bundle};
use crate::error::{Error, Result};
use crate::fairness::group_minima;
use crate::instance::{Agent, Instance};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub algo: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub strict: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub iter: usize,
    pub step: String,
    pub actors: Vec<Agent>,
    pub pool_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    pub group_minima: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_before: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_after: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pool_delta: Option<i64>,
    pub bundles: Vec<Bundle>,
    pub pool: Bundle,
}

impl TraceEvent {
    pub fn new(inst: &Instance, iter: usize, step: impl Into<String>, actors: Vec<Agent>, after: &Allocation) -> Self {
        TraceEvent {
            iter,
            step: step.into(),
            actors,
            pool_size: after.pool.len(),
            config_hash: None,
            group_minima: group_minima(inst, after).iter().map(|v| v.base().to_string()).collect(),
            phi_before: None,
            phi_after: None,
            pool_delta: None,
            bundles: after.bundles.clone(),
            pool: after.pool.clone(),
        }
    }

    pub fn allocation(&self) -> Allocation {
        Allocation {
            bundles: self.bundles.clone(),
            pool: self.pool.clone(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Trace {
    pub header: Option<TraceHeader>,
    pub events: Vec<TraceEvent>,
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    header: TraceHeader,
}

impl Trace {
    pub fn with_header(header: TraceHeader) -> Self {
        Trace {
            header: Some(header),
            events: Vec::new(),
        }
    }

    pub fn push(&mut self, ev: TraceEvent) {
        self.events.push(ev);
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        if let Some(h) = &self.header {
            out.push_str(&serde_json::to_string(&HeaderLine { header: h.clone() }).expect("header serialises"));
            out.push('\n');
        }
        for ev in &self.events {
            out.push_str(&serde_json::to_string(ev).expect("event serialises"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(s: &str) -> Result<Trace> {
        let mut trace = Trace::default();
        for (no, line) in s.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let raw: serde_json::Value =
                serde_json::from_str(line).map_err(|e| Error::input(format!("trace line {}: {e}", no + 1)))?;
            if raw.get("header").is_some() {
                if trace.header.is_some() || !trace.events.is_empty() {
                    return Err(Error::input(format!("trace line {}: misplaced header", no + 1)));
                }
                let h: HeaderLine =
                    serde_json::from_value(raw).map_err(|e| Error::input(format!("trace header: {e}")))?;
                trace.header = Some(h.header);
            } else {
                let ev: TraceEvent = serde_json::from_value(raw)
                    .map_err(|e| Error::input(format!("trace line {}: {e}", no + 1)))?;
                trace.events.push(ev);
            }
        }
        Ok(trace)
    }
}
