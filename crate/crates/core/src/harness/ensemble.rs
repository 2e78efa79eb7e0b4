//! Seeded ensembles: member `i` runs with `base_seed + i` in its own
//! directory, so members are independent and their order of execution
//! cannot affect any artifact.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::config::ExperimentConfig;
use super::run::{run_experiment, RunSummary};
use super::{create_dir, fmt_f64, write_bytes, write_json, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    Sequential,
    Parallel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MemberOutcome {
    pub member: usize,
    pub seed: u64,
    pub summary: Option<RunSummary>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleOutcome {
    pub members: Vec<MemberOutcome>,
}

impl EnsembleOutcome {
    pub fn failures(&self) -> Vec<&MemberOutcome> {
        self.members.iter().filter(|m| m.error.is_some()).collect()
    }
}

pub fn member_dir_name(i: usize) -> String {
    format!("member_{i:03}")
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Runs all members, continuing past failures, then writes
/// `aggregate.csv` and `ensemble.json` into `out`. Configuration errors
/// are reported before any member starts.
pub fn run_ensemble(cfg: &ExperimentConfig, base_seed: u64, out: &Path, schedule: Schedule) -> Result<EnsembleOutcome> {
    cfg.prepare()?;
    create_dir(out)?;
    let member = |i: usize| {
        let seed = base_seed.wrapping_add(i as u64);
        let r = run_experiment(cfg, seed, &out.join(member_dir_name(i)));
        MemberOutcome {
            member: i,
            seed,
            error: r.as_ref().err().map(|e| e.to_string()),
            summary: r.ok(),
        }
    };
    let members: Vec<MemberOutcome> = match schedule {
        Schedule::Sequential => (0..cfg.ensemble).map(member).collect(),
        Schedule::Parallel => (0..cfg.ensemble).into_par_iter().map(member).collect(),
    };

    let mut csv = String::from(
        "member,seed,status,casimir_drift,energy_excursion,circulation_drift,budget_residual\n",
    );
    for m in &members {
        let (status, cas, en, circ, bud) = match &m.summary {
            Some(s) => (
                "ok",
                fmt_f64(s.casimir_drift.iter().copied().fold(0.0, f64::max)),
                fmt_f64(s.energy_excursion),
                opt(s.circulation_drift),
                opt(s.budget_residual),
            ),
            None => ("failed", String::new(), String::new(), String::new(), String::new()),
        };
        csv.push_str(&format!("{},{},{status},{cas},{en},{circ},{bud}\n", m.member, m.seed));
    }
    write_bytes(&out.join("aggregate.csv"), csv.as_bytes())?;
    let outcome = EnsembleOutcome { members };
    let failures: Vec<_> = outcome
        .failures()
        .iter()
        .map(|m| serde_json::json!({ "member": m.member, "seed": m.seed, "error": m.error }))
        .collect();
    write_json(
        &out.join("ensemble.json"),
        &serde_json::json!({
            "members": cfg.ensemble,
            "base_seed": base_seed,
            "failures": failures,
        }),
    )?;
    Ok(outcome)
}
