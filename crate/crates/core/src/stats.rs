//! Running per-instance statistics.

use serde::{Deserialize, Serialize};

use crate::analysis::{
    estimate_cheat_fraction, predict, sequential_step, CheatFractionEstimate, Decision,
    SequentialTest,
};
use crate::config::SessionConfig;
use crate::error::Result;
use crate::protocol::{FlipRecord, Verdict};

/// Snapshot of a session after `n` instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionStats {
    pub n: u64,
    pub accepted0: u64,
    pub accepted1: u64,
    pub mismatches: u64,
    pub attempts: u64,
    pub p0: f64,
    pub p1: f64,
    pub p_star: f64,
    pub cheat_success: Option<f64>,
    pub estimate_f: Option<CheatFractionEstimate>,
    pub test: Option<SequentialTest>,
}

impl SessionStats {
    /// One binomial standard deviation of a rate `p` at this sample size.
    pub fn sigma(&self, p: f64) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (p * (1.0 - p) / self.n as f64).sqrt()
        }
    }

    pub fn decision(&self) -> Decision {
        self.test.map(|t| t.decision).unwrap_or(Decision::Continue)
    }
}

/// Accumulates records into [`SessionStats`].
#[derive(Debug, Clone)]
pub struct StatsTracker {
    n: u64,
    accepted: [u64; 2],
    mismatches: u64,
    attempts: u64,
    cheat_successes: u64,
    has_cheater: bool,
    rates: Option<(f64, f64)>,
    test: Option<SequentialTest>,
}

impl StatsTracker {
    pub fn new(config: &SessionConfig) -> Result<Self> {
        let pred = predict(config.phi, config.source.visibility)?;
        let (eps, m) = (pred.pstar_honest, pred.min_cheat_rate());
        Ok(StatsTracker {
            n: 0,
            accepted: [0; 2],
            mismatches: 0,
            attempts: 0,
            cheat_successes: 0,
            has_cheater: config.profile.has_cheater(),
            rates: (eps < m).then_some((eps, m)),
            test: config.sequential_test()?,
        })
    }

    pub fn push(&mut self, record: &FlipRecord) -> Decision {
        self.n += 1;
        self.attempts += record.attempts;
        match record.verdict {
            Verdict::Accepted(c) => self.accepted[c as usize] += 1,
            Verdict::Mismatch => self.mismatches += 1,
        }
        if record.cheat_succeeded() {
            self.cheat_successes += 1;
        }
        match &mut self.test {
            Some(t) => sequential_step(t, record.verdict.is_mismatch()),
            None => Decision::Continue,
        }
    }

    pub fn decision(&self) -> Decision {
        self.test.map(|t| t.decision).unwrap_or(Decision::Continue)
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn snapshot(&self) -> SessionStats {
        let rate = |k: u64| {
            if self.n == 0 {
                0.0
            } else {
                k as f64 / self.n as f64
            }
        };
        let estimate_f = match self.rates {
            Some((eps, m)) if self.n > 0 => {
                estimate_cheat_fraction(self.mismatches, self.n, eps, m).ok()
            }
            _ => None,
        };
        SessionStats {
            n: self.n,
            accepted0: self.accepted[0],
            accepted1: self.accepted[1],
            mismatches: self.mismatches,
            attempts: self.attempts,
            p0: rate(self.accepted[0]),
            p1: rate(self.accepted[1]),
            p_star: rate(self.mismatches),
            cheat_success: (self.has_cheater && self.n > 0).then(|| rate(self.cheat_successes)),
            estimate_f,
            test: self.test,
        }
    }
}
