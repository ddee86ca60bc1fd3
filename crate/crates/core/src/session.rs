//! Batch runs and interactive sessions.
//!
//! Both go through [`Session::flip`], so a human clicking "flip" one instance
//! at a time sees exactly the statistics a headless run would produce.

use serde::{Deserialize, Serialize};

use crate::analysis::{sequential_step, CheatFractionEstimate, Decision, SequentialTest};
use crate::config::SessionConfig;
use crate::error::{Error, Result};
use crate::protocol::{Engine, FlipRecord};
use crate::stats::{SessionStats, StatsTracker};

/// Written once when a session stops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalReport {
    pub reason: String,
    pub seed: u64,
    pub profile: String,
    pub config: String,
    pub stats: SessionStats,
    pub estimate_f: Option<CheatFractionEstimate>,
    pub decision: Decision,
}

pub struct Session {
    config: SessionConfig,
    engine: Engine,
    tracker: StatsTracker,
    report: Option<FinalReport>,
}

impl Session {
    pub fn new(config: SessionConfig) -> Result<Self> {
        Ok(Session {
            engine: Engine::new(&config)?,
            tracker: StatsTracker::new(&config)?,
            config,
            report: None,
        })
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn is_closed(&self) -> bool {
        self.report.is_some()
    }

    /// Runs exactly one instance.
    pub fn flip(&mut self) -> Result<(FlipRecord, SessionStats)> {
        if self.is_closed() {
            return Err(Error::SessionClosed);
        }
        let record = self.engine.run_instance()?;
        self.tracker.push(&record);
        Ok((record, self.tracker.snapshot()))
    }

    /// `count` single flips, each with the snapshot taken right after it.
    pub fn flip_many(&mut self, count: u64) -> Result<Vec<(FlipRecord, SessionStats)>> {
        (0..count).map(|_| self.flip()).collect()
    }

    pub fn stats(&self) -> SessionStats {
        self.tracker.snapshot()
    }

    pub fn decision(&self) -> Decision {
        self.tracker.decision()
    }

    /// Closes the session. Stopping twice returns the first report.
    pub fn stop(&mut self, reason: &str) -> FinalReport {
        if let Some(r) = &self.report {
            return r.clone();
        }
        let stats = self.tracker.snapshot();
        let report = FinalReport {
            reason: reason.to_string(),
            seed: self.config.seed,
            profile: self.config.profile.label(),
            config: self.config.canonical_text(),
            estimate_f: stats.estimate_f,
            decision: self.tracker.decision(),
            stats,
        };
        self.report = Some(report.clone());
        report
    }
}

/// Decides when a batch or networked session ends. Every party can run one
/// from the shared config and the public verdicts alone.
#[derive(Debug, Clone)]
pub struct StopTracker {
    n: u64,
    max: u64,
    on_decision: bool,
    test: Option<SequentialTest>,
}

impl StopTracker {
    pub fn new(config: &SessionConfig) -> Result<Self> {
        Ok(StopTracker {
            n: 0,
            max: config.max_flips(),
            on_decision: config.stops_on_decision(),
            test: config.sequential_test()?,
        })
    }

    pub fn is_done(&self) -> bool {
        if self.n >= self.max {
            return true;
        }
        self.on_decision && self.test.is_some_and(|t| t.decision != Decision::Continue)
    }

    /// Records one verdict and reports whether the session is over.
    pub fn push(&mut self, mismatch: bool) -> bool {
        self.n += 1;
        if let Some(t) = &mut self.test {
            sequential_step(t, mismatch);
        }
        self.is_done()
    }
}

/// Runs a session under its stop policy, handing each record to `sink`.
pub fn run_session_with<F>(config: &SessionConfig, mut sink: F) -> Result<SessionStats>
where
    F: FnMut(&FlipRecord),
{
    let mut session = Session::new(config.clone())?;
    let mut stop = StopTracker::new(config)?;
    while !stop.is_done() {
        let record = session.engine.run_instance()?;
        session.tracker.push(&record);
        sink(&record);
        stop.push(record.verdict.is_mismatch());
    }
    Ok(session.stats())
}

pub struct SessionRun {
    pub stats: SessionStats,
    pub records: Vec<FlipRecord>,
}

pub fn run_session(config: &SessionConfig) -> Result<SessionRun> {
    let mut records = Vec::new();
    let stats = run_session_with(config, |r| records.push(r.clone()))?;
    Ok(SessionRun { stats, records })
}
