//! Parallel execution of member schedules with per-member failure isolation.

use std::panic::{catch_unwind, AssertUnwindSafe};

use burgulence::dynamics::TrajectoryRecord;
use burgulence::noise::RngStream;
use burgulence::Error;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::plan::Member;

/// Environment variable consulted when `--workers` is absent.
pub const WORKERS_ENV: &str = "BURGULENCE_WORKERS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberFailure {
    pub nu: f64,
    pub master_seed: u64,
    pub stream: u64,
    /// Simulation time of the failure, when the error carries one.
    pub t: Option<f64>,
    pub message: String,
}

/// Records of the members that finished, in schedule order, and the failures.
#[derive(Debug, Clone, Default)]
pub struct EnsembleOutcome {
    pub records: Vec<TrajectoryRecord>,
    pub failures: Vec<MemberFailure>,
}

impl EnsembleOutcome {
    pub fn degraded(&self) -> bool {
        !self.failures.is_empty()
    }

    /// Records with viscosity `nu`.
    pub fn at(&self, nu: f64) -> Vec<TrajectoryRecord> {
        self.records.iter().filter(|r| r.nu == nu).cloned().collect()
    }
}

fn failure_time(e: &Error) -> Option<f64> {
    match *e {
        Error::BlowUp { t } | Error::StepRejected { t, .. } => Some(t),
        _ => None,
    }
}

/// Runs `job` for every member on the current rayon pool. A member that errors
/// or panics is reported and dropped; the others are unaffected.
pub fn run_members<F>(members: &[Member], master_seed: u64, job: F) -> EnsembleOutcome
where
    F: Fn(&Member, RngStream) -> burgulence::Result<TrajectoryRecord> + Sync,
{
    let results: Vec<std::result::Result<TrajectoryRecord, MemberFailure>> = members
        .par_iter()
        .map(|m| {
            let fail = |t, message| MemberFailure { nu: m.nu, master_seed, stream: m.stream, t, message };
            match catch_unwind(AssertUnwindSafe(|| job(m, RngStream::new(master_seed, m.stream)))) {
                Ok(Ok(r)) => Ok(r),
                Ok(Err(e)) => Err(fail(failure_time(&e), e.to_string())),
                Err(panic) => {
                    let msg = panic
                        .downcast_ref::<&str>()
                        .map(|s| s.to_string())
                        .or_else(|| panic.downcast_ref::<String>().cloned())
                        .unwrap_or_else(|| "panic".to_string());
                    Err(fail(None, format!("panicked: {msg}")))
                }
            }
        })
        .collect();
    let mut out = EnsembleOutcome::default();
    for r in results {
        match r {
            Ok(rec) => out.records.push(rec),
            Err(f) => out.failures.push(f),
        }
    }
    out
}

/// Worker count from the flag, then the environment, then rayon's default.
pub fn resolve_workers(flag: Option<usize>) -> Result<Option<usize>> {
    if let Some(w) = flag {
        return Ok(Some(w));
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| HarnessError::Invalid(format!("{WORKERS_ENV}={v:?} is not a worker count"))),
        Err(_) => Ok(None),
    }
}

/// Runs `f` inside a dedicated pool of `workers` threads (rayon's default when `None`).
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == Some(0) {
        return Err(HarnessError::Invalid("worker count must be at least 1".into()));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w);
    }
    let pool = builder.build().map_err(|e| HarnessError::Invalid(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}
