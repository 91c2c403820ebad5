//! Batches of random traces replayed against the implementation.

use crate::error::ConformanceError;
use crate::mapping::ActionMapping;
use crate::replay::{replay_with, ReplayOptions, ReplayResult, ReplayStatus};
use mgcheck_core::{random_walk, ComposedSpec, WalkBudget};
use mgcheck_sim::{BugFlags, Scenario};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write;

pub const REPORT_HEADER: &str = "mgcheck-conformance v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunBudget {
    pub max_traces: usize,
    pub max_steps: usize,
    pub step_budget: usize,
}

impl Default for RunBudget {
    fn default() -> Self {
        RunBudget {
            max_traces: 200,
            max_steps: 30,
            step_budget: crate::replay::DEFAULT_STEP_BUDGET,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub trace_id: String,
    pub trace_len: usize,
    pub result: ReplayResult,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConformanceReport {
    pub spec: String,
    pub seed: u64,
    pub flags: Vec<String>,
    pub entries: Vec<ReportEntry>,
}

impl ConformanceReport {
    pub fn count(&self, status: ReplayStatus) -> usize {
        self.entries.iter().filter(|e| e.result.status == status).count()
    }

    /// Entries that are not conformant.
    pub fn problems(&self) -> impl Iterator<Item = &ReportEntry> {
        self.entries.iter().filter(|e| !e.result.is_conformant())
    }

    pub fn is_clean(&self) -> bool {
        self.problems().next().is_none()
    }

    /// Header line, then one tab-separated line per trace:
    /// trace-id, status, step, detail.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{REPORT_HEADER} spec={} seed={} flags={} traces={} conformant={} discrepancies={} timeouts={} faults={}\n",
            self.spec,
            self.seed,
            if self.flags.is_empty() { "none".to_string() } else { self.flags.join(",") },
            self.entries.len(),
            self.count(ReplayStatus::Conformant),
            self.count(ReplayStatus::ValueDiscrepancy),
            self.count(ReplayStatus::ActionTimeout),
            self.count(ReplayStatus::ImplFault),
        );
        for e in &self.entries {
            let r = &e.result;
            let detail = match &r.action {
                Some(a) if !r.detail.is_empty() => format!("{a}: {}", r.detail),
                Some(a) => a.clone(),
                None => r.detail.clone(),
            };
            let _ = writeln!(s, "{}\t{}\t{}\t{}", e.trace_id, r.status, r.step, detail);
        }
        s
    }
}

/// Implementation setup matching a spec's granularity: only the concurrent
/// sync variant models the follower's reply to UPTODATE.
pub fn scenario_for(spec: &ComposedSpec, flags: BugFlags) -> Scenario {
    let mut s = Scenario::new(spec.scale.nodes, flags);
    s.uptodate_ack = spec
        .selections
        .get(mgcheck_zab::sync::SYNC_MODULE)
        .is_some_and(|g| g == mgcheck_zab::SyncStyle::FineConcurrent.label());
    s
}

pub fn trace_id(k: usize) -> String {
    format!("t{k:04}")
}

/// Random walks from `seed`, each replayed on a fresh cluster. The report
/// depends only on the inputs, not on scheduling across workers.
pub fn conformance_run(
    spec: &ComposedSpec,
    scenario: &Scenario,
    mapping: &ActionMapping,
    seed: u64,
    budget: RunBudget,
) -> Result<ConformanceReport, ConformanceError> {
    mapping.covers(spec)?;
    let traces = random_walk(
        spec,
        seed,
        WalkBudget {
            max_steps: budget.max_steps,
            max_traces: budget.max_traces,
        },
    )?;
    let opts = ReplayOptions {
        step_budget: budget.step_budget,
    };
    let results: Result<Vec<ReplayResult>, ConformanceError> = traces
        .par_iter()
        .map(|t| replay_with(t, scenario, mapping, opts).map(|r| r.result))
        .collect();
    let entries = results?
        .into_iter()
        .zip(&traces)
        .enumerate()
        .map(|(k, (result, t))| ReportEntry {
            trace_id: trace_id(k),
            trace_len: t.len(),
            result,
        })
        .collect();
    Ok(ConformanceReport {
        spec: spec.name.clone(),
        seed,
        flags: scenario.flags.enabled().iter().map(|s| s.to_string()).collect(),
        entries,
    })
}
