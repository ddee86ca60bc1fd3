//! The round engine.
//!
//! One instance runs: Alice prepares, the channel delivers (or loses), and
//! on loss everything restarts with a fresh preparation. Once Bob keeps a
//! detection he commits `b`, Alice reveals `(x, a)`, and Bob gives a verdict.
//! Alice fixes her state before seeing `b`; Bob fixes `b` before seeing the
//! reveal. The strategy traits make any other order impossible to express.

use serde::{Deserialize, Serialize};

use crate::config::SessionConfig;
use crate::error::{Error, Result};
use crate::quantum::{ProtocolStateSet, StateAngle};
use crate::rng::{stream, StreamId};
use crate::source::{Channel, MeasurementPlan};
use crate::strategies::{
    alice_strategy, bob_strategy, guess_from_outcome, infer_conclusive, multiphoton_plan,
    AliceProfile, AliceStrategy, BobProfile, BobStrategy, StrategyProfile,
};

/// Upper bound on send attempts for one instance.
pub const MAX_ATTEMPTS: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Reveal {
    pub x: u8,
    pub a: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Accepted(u8),
    Mismatch,
}

impl Verdict {
    /// Wire code: 0 = accept 0, 1 = accept 1, 2 = mismatch.
    pub fn code(self) -> u8 {
        match self {
            Verdict::Accepted(c) => c,
            Verdict::Mismatch => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Verdict> {
        match code {
            0 | 1 => Some(Verdict::Accepted(code)),
            2 => Some(Verdict::Mismatch),
            _ => None,
        }
    }

    pub fn is_mismatch(self) -> bool {
        self == Verdict::Mismatch
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BobAction {
    /// Ask Alice for another state, whether or not anything clicked.
    DeclareLost,
    Commit(u8),
}

/// Honest Bob's check of a reveal against his own measurement.
pub fn verify(reveal: Reveal, b: u8, y: u8, outcome: u8) -> Verdict {
    if y == reveal.x && outcome != reveal.a {
        Verdict::Mismatch
    } else {
        Verdict::Accepted(reveal.a ^ b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AliceSecret {
    Honest { x: u8, a: u8 },
    Cheat { r: u8 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BobBasis {
    Honest { y: u8 },
    Angle { theta_deg: f64 },
    Alternating,
}

/// One coin-flip instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlipRecord {
    pub index: u64,
    /// Send attempts, including losses and false loss claims.
    pub attempts: u64,
    pub alice: AliceSecret,
    pub bob_basis: BobBasis,
    /// Bob's raw outcome, or his inferred bit for the multi-photon attack.
    pub bob_outcome: u8,
    /// Photons detected on the final attempt.
    pub photons: u32,
    pub b: u8,
    pub reveal: Reveal,
    pub verdict: Verdict,
    /// The cheater's target outcome, if anyone cheats.
    pub desired_outcome: Option<u8>,
}

impl FlipRecord {
    pub fn cheat_succeeded(&self) -> bool {
        matches!((self.desired_outcome, self.verdict), (Some(d), Verdict::Accepted(c)) if c == d)
    }

    pub fn outcome(&self) -> Option<u8> {
        match self.verdict {
            Verdict::Accepted(c) => Some(c),
            Verdict::Mismatch => None,
        }
    }
}

/// Everything a referee in the middle can see for one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub attempts: u64,
    pub prepared: StateAngle,
    pub plan: MeasurementPlan,
    pub outcomes: Vec<u8>,
    pub b: u8,
    pub reveal: Reveal,
    pub verdict: Verdict,
}

/// Turns observations into records. Private fields (Alice's `(x, a)` or `r`,
/// the cheater's target) follow from the observation and the profile.
#[derive(Debug, Clone)]
pub struct RecordBook {
    set: ProtocolStateSet,
    profile: StrategyProfile,
    next_index: u64,
}

impl RecordBook {
    pub fn new(set: ProtocolStateSet, profile: StrategyProfile) -> Self {
        RecordBook {
            set,
            profile,
            next_index: 0,
        }
    }

    fn nearest(candidates: &[(StateAngle, u8)], s: StateAngle) -> u8 {
        candidates
            .iter()
            .min_by(|p, q| s.distance(p.0).partial_cmp(&s.distance(q.0)).unwrap())
            .map(|p| p.1)
            .expect("non-empty candidates")
    }

    pub fn record(&mut self, obs: &Observation) -> FlipRecord {
        let set = &self.set;
        let alice = match self.profile.alice {
            AliceProfile::Honest | AliceProfile::AttenuatedHonest => {
                let cands: Vec<(StateAngle, u8)> = (0..4u8)
                    .map(|i| (set.honest_state(i >> 1, i & 1), i))
                    .collect();
                let i = Self::nearest(&cands, obs.prepared);
                AliceSecret::Honest {
                    x: i >> 1,
                    a: i & 1,
                }
            }
            AliceProfile::Cheating => {
                let cands = [(set.alice_cheat[0], 0), (set.alice_cheat[1], 1)];
                AliceSecret::Cheat {
                    r: Self::nearest(&cands, obs.prepared),
                }
            }
        };
        let first = obs.plan.angle_for(0);
        let raw = obs.outcomes[0];
        let (bob_basis, bob_outcome, bob_target) = match self.profile.bob {
            BobProfile::Honest => {
                let cands = [(set.basis_angle(0), 0), (set.basis_angle(1), 1)];
                (
                    BobBasis::Honest {
                        y: Self::nearest(&cands, first),
                    },
                    raw,
                    None,
                )
            }
            BobProfile::Cheating | BobProfile::SelectiveAbort { .. } => {
                let g = guess_from_outcome(set.phi.radians(), first, raw);
                (
                    BobBasis::Angle {
                        theta_deg: first.degrees(),
                    },
                    raw,
                    Some(obs.b ^ g),
                )
            }
            BobProfile::Multiphoton => {
                let g = infer_conclusive(set, &multiphoton_plan(set), &obs.outcomes).unwrap_or(raw);
                (BobBasis::Alternating, g, Some(obs.b ^ g))
            }
        };
        let desired_outcome = if self.profile.alice_cheats() {
            Some(obs.reveal.a ^ obs.b)
        } else {
            bob_target
        };
        let rec = FlipRecord {
            index: self.next_index,
            attempts: obs.attempts,
            alice,
            bob_basis,
            bob_outcome,
            photons: obs.outcomes.len() as u32,
            b: obs.b,
            reveal: obs.reveal,
            verdict: obs.verdict,
            desired_outcome,
        };
        self.next_index += 1;
        rec
    }
}

/// In-process engine: both strategies and the channel in one loop.
pub struct Engine {
    alice: Box<dyn AliceStrategy>,
    bob: Box<dyn BobStrategy>,
    channel: Channel,
    book: RecordBook,
}

impl Engine {
    pub fn new(config: &SessionConfig) -> Result<Self> {
        config.validate()?;
        let set = config.state_set()?;
        let seed = config.seed;
        Ok(Engine {
            alice: alice_strategy(&config.profile, set, stream(seed, StreamId::Alice)),
            bob: bob_strategy(&config.profile, set, stream(seed, StreamId::Bob)),
            channel: Channel::new(
                config.source,
                config.eta,
                set,
                stream(seed, StreamId::Source),
                stream(seed, StreamId::Physics),
            )?,
            book: RecordBook::new(set, config.profile),
        })
    }

    /// Runs one instance to a verdict, restarting on every loss.
    pub fn run_instance(&mut self) -> Result<FlipRecord> {
        let mut attempts = 0u64;
        loop {
            attempts += 1;
            if attempts > MAX_ATTEMPTS {
                return Err(Error::AttemptLimit(MAX_ATTEMPTS));
            }
            let prepared = self.alice.prepare();
            let plan = self.bob.plan();
            let outcomes = self.channel.transmit(prepared, &plan);
            if outcomes.is_empty() {
                continue;
            }
            let b = match self.bob.on_detection(&outcomes) {
                BobAction::DeclareLost => continue,
                BobAction::Commit(b) => b,
            };
            let reveal = self.alice.reveal(b);
            let verdict = self.bob.verdict(reveal, b);
            return Ok(self.book.record(&Observation {
                attempts,
                prepared,
                plan,
                outcomes,
                b,
                reveal,
                verdict,
            }));
        }
    }
}
