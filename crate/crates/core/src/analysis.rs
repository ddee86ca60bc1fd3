//! Closed-form cheating probabilities, the fair angle, predicted mismatch
//! rates, cheat-fraction estimation and sequential stopping rules.

use std::f64::consts::FRAC_PI_4;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

fn check_phi(phi: f64) -> Result<()> {
    if !phi.is_finite() || phi <= 0.0 || phi > FRAC_PI_4 + 1e-12 {
        return Err(Error::PhiOutOfRange(phi));
    }
    Ok(())
}

fn check_visibility(v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::VisibilityOutOfRange(v));
    }
    Ok(())
}

/// Alice's optimal probability of fixing the outcome:
/// `1/2 + cos²(π/4 − φ/2)/2`.
pub fn p_alice_opt(phi: f64) -> Result<f64> {
    check_phi(phi)?;
    Ok(0.5 + 0.5 * (FRAC_PI_4 - phi / 2.0).cos().powi(2))
}

/// Bob's optimal probability of fixing the outcome: `cos²(φ/2)`.
pub fn p_bob_opt(phi: f64) -> Result<f64> {
    check_phi(phi)?;
    Ok((phi / 2.0).cos().powi(2))
}

/// The angle where both cheaters do equally well, by bisection of
/// `p_alice_opt − p_bob_opt` on `(0, π/4]`.
pub fn find_fair_phi() -> f64 {
    let gap = |phi: f64| p_alice_opt(phi).unwrap() - p_bob_opt(phi).unwrap();
    let (mut lo, mut hi) = (1e-9, FRAC_PI_4);
    let (g_lo, g_hi) = (gap(lo), gap(hi));
    assert!(
        g_lo < 0.0 && g_hi > 0.0,
        "fairness gap does not change sign"
    );
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let g = gap(mid);
        if g.abs() < 1e-13 || hi - lo < 1e-16 {
            return mid;
        }
        if g < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Per-instance rates predicted for one `(φ, V)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioPrediction {
    pub phi_deg: f64,
    pub visibility: f64,
    pub p_a: f64,
    pub p_b: f64,
    pub pstar_honest: f64,
    pub pstar_cheat_alice: f64,
    pub pstar_cheat_bob: f64,
}

impl ScenarioPrediction {
    /// Lowest mismatch rate a full-time cheater in either role would cause.
    pub fn min_cheat_rate(&self) -> f64 {
        self.pstar_cheat_alice.min(self.pstar_cheat_bob)
    }
}

/// Rates under depolarizing noise of visibility `v`. Each cheater's
/// success is diluted toward 1/2 on the fraction of flips where the noise
/// randomizes the click.
pub fn predict(phi: f64, v: f64) -> Result<ScenarioPrediction> {
    check_phi(phi)?;
    check_visibility(v)?;
    let noise = (1.0 - v) / 2.0;
    let p_a = 0.5 + 0.5 * (v * (FRAC_PI_4 - phi / 2.0).cos().powi(2) + noise);
    let p_b = v * (phi / 2.0).cos().powi(2) + noise;
    Ok(ScenarioPrediction {
        phi_deg: phi.to_degrees(),
        visibility: v,
        p_a,
        p_b,
        pstar_honest: (1.0 - v) / 4.0,
        pstar_cheat_alice: 1.0 - p_a,
        pstar_cheat_bob: 1.0 - p_b,
    })
}

/// Default two-sided confidence for cheat-fraction intervals.
pub const DEFAULT_CONFIDENCE: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheatFractionEstimate {
    pub fraction: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub confidence: f64,
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = if k == 0 {
        0.0
    } else {
        (center - half).max(0.0)
    };
    let hi = if k as f64 == n {
        1.0
    } else {
        (center + half).min(1.0)
    };
    (lo, hi)
}

fn z_for(confidence: f64) -> f64 {
    Normal::standard().inverse_cdf(0.5 + confidence / 2.0)
}

/// Fraction of flips a cheater fixed, from `k` mismatches in `n` instances,
/// honest rate `epsilon` and full-cheat rate `m`.
pub fn estimate_cheat_fraction(
    k: u64,
    n: u64,
    epsilon: f64,
    m: f64,
) -> Result<CheatFractionEstimate> {
    estimate_cheat_fraction_at(k, n, epsilon, m, DEFAULT_CONFIDENCE)
}

pub fn estimate_cheat_fraction_at(
    k: u64,
    n: u64,
    epsilon: f64,
    m: f64,
    confidence: f64,
) -> Result<CheatFractionEstimate> {
    if n == 0 {
        return Err(Error::NoInstances);
    }
    if k > n {
        return Err(Error::Config(format!(
            "{k} mismatches exceed {n} instances"
        )));
    }
    if !(0.0..=1.0).contains(&epsilon) || !(0.0..=1.0).contains(&m) || epsilon >= m {
        return Err(Error::RatesNotOrdered {
            honest: epsilon,
            cheat: m,
        });
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::ProbabilityOutOfRange {
            name: "confidence",
            value: confidence,
        });
    }
    let scale = |p: f64| ((p - epsilon) / (m - epsilon)).clamp(0.0, 1.0);
    let (lo, hi) = wilson_interval(k, n, z_for(confidence));
    Ok(CheatFractionEstimate {
        fraction: scale(k as f64 / n as f64),
        ci_lo: scale(lo),
        ci_hi: scale(hi),
        confidence,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestKind {
    Threshold {
        tau: f64,
        min_samples: u64,
    },
    Sprt {
        p0: f64,
        p1: f64,
        alpha: f64,
        beta: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Continue,
    StopSuspectCheating,
    StopLooksHonest,
}

/// A running stopping rule over the mismatch stream. The first stop
/// decision is latched.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequentialTest {
    pub kind: TestKind,
    pub n: u64,
    pub k: u64,
    pub decision: Decision,
}

impl SequentialTest {
    pub fn new(kind: TestKind) -> Result<Self> {
        match kind {
            TestKind::Threshold { tau, .. } => {
                if !(0.0..=1.0).contains(&tau) {
                    return Err(Error::ProbabilityOutOfRange {
                        name: "tau",
                        value: tau,
                    });
                }
            }
            TestKind::Sprt {
                p0,
                p1,
                alpha,
                beta,
            } => {
                if !(0.0 <= p0 && p0 < p1 && p1 <= 1.0) {
                    return Err(Error::RatesNotOrdered {
                        honest: p0,
                        cheat: p1,
                    });
                }
                for (name, v) in [("alpha", alpha), ("beta", beta)] {
                    if !(v > 0.0 && v < 0.5) {
                        return Err(Error::ProbabilityOutOfRange { name, value: v });
                    }
                }
            }
        }
        Ok(SequentialTest {
            kind,
            n: 0,
            k: 0,
            decision: Decision::Continue,
        })
    }

    /// Wald's cumulative log-likelihood ratio, `None` for threshold tests.
    pub fn log_likelihood_ratio(&self) -> Option<f64> {
        let TestKind::Sprt { p0, p1, .. } = self.kind else {
            return None;
        };
        let term = |count: u64, num: f64, den: f64| {
            if count == 0 {
                0.0
            } else {
                count as f64 * (num / den).ln()
            }
        };
        Some(term(self.k, p1, p0) + term(self.n - self.k, 1.0 - p1, 1.0 - p0))
    }

    fn evaluate(&self) -> Decision {
        match self.kind {
            TestKind::Threshold { tau, min_samples } => {
                if self.n >= min_samples && self.n > 0 && self.k as f64 / self.n as f64 > tau {
                    Decision::StopSuspectCheating
                } else {
                    Decision::Continue
                }
            }
            TestKind::Sprt { alpha, beta, .. } => {
                let llr = self.log_likelihood_ratio().expect("sprt");
                if llr >= ((1.0 - beta) / alpha).ln() {
                    Decision::StopSuspectCheating
                } else if llr <= (beta / (1.0 - alpha)).ln() {
                    Decision::StopLooksHonest
                } else {
                    Decision::Continue
                }
            }
        }
    }
}

/// Feeds one instance to the test.
pub fn sequential_step(test: &mut SequentialTest, mismatch: bool) -> Decision {
    test.n += 1;
    if mismatch {
        test.k += 1;
    }
    if test.decision == Decision::Continue {
        test.decision = test.evaluate();
    }
    test.decision
}
