//! Honest and adversarial behaviour for both roles.
//!
//! Strategies only ever see what their role may see: Alice is told `b` and
//! nothing else, Bob is told his own detector clicks and, after he has
//! committed `b`, Alice's reveal. Each strategy owns its random stream.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::{verify, BobAction, Reveal, Verdict};
use crate::quantum::{
    measure, overlap_prob, posterior_zero, CircleDensity, ProtocolStateSet, StateAngle,
};
use crate::rng::StreamRng;
use crate::source::MeasurementPlan;

/// Outcome set for which a selective-abort Bob keeps the instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptRule {
    pub zero: bool,
    pub one: bool,
}

impl AcceptRule {
    pub const BOTH: AcceptRule = AcceptRule {
        zero: true,
        one: true,
    };

    pub fn new(zero: bool, one: bool) -> Result<Self> {
        if !zero && !one {
            return Err(Error::EmptyAcceptRule);
        }
        Ok(AcceptRule { zero, one })
    }

    pub fn from_outcomes(outcomes: &[u8]) -> Result<Self> {
        if outcomes.iter().any(|&o| o > 1) {
            return Err(Error::Config(format!(
                "accept rule outcomes must be 0 or 1, got {outcomes:?}"
            )));
        }
        AcceptRule::new(outcomes.contains(&0), outcomes.contains(&1))
    }

    pub fn outcomes(&self) -> Vec<u8> {
        let mut v = Vec::new();
        if self.zero {
            v.push(0);
        }
        if self.one {
            v.push(1);
        }
        v
    }

    pub fn accepts(&self, outcome: u8) -> bool {
        if outcome == 0 {
            self.zero
        } else {
            self.one
        }
    }

    pub fn all() -> [AcceptRule; 3] {
        [
            AcceptRule {
                zero: true,
                one: false,
            },
            AcceptRule {
                zero: false,
                one: true,
            },
            AcceptRule::BOTH,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AliceProfile {
    Honest,
    Cheating,
    /// Honest behaviour behind an attenuated-pulse source.
    AttenuatedHonest,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BobProfile {
    Honest,
    Cheating,
    SelectiveAbort {
        theta: StateAngle,
        accept: AcceptRule,
    },
    Multiphoton,
}

/// What a cheating Bob does once the reveal shows he missed his target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnhappyAction {
    #[default]
    Mismatch,
    Accept,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyProfile {
    pub alice: AliceProfile,
    pub bob: BobProfile,
    pub unhappy: UnhappyAction,
}

impl StrategyProfile {
    pub const HONEST: StrategyProfile = StrategyProfile {
        alice: AliceProfile::Honest,
        bob: BobProfile::Honest,
        unhappy: UnhappyAction::Mismatch,
    };

    pub fn cheating_alice() -> Self {
        StrategyProfile {
            alice: AliceProfile::Cheating,
            ..Self::HONEST
        }
    }

    pub fn cheating_bob() -> Self {
        StrategyProfile {
            bob: BobProfile::Cheating,
            ..Self::HONEST
        }
    }

    pub fn alice_cheats(&self) -> bool {
        self.alice == AliceProfile::Cheating
    }

    pub fn bob_cheats(&self) -> bool {
        self.bob != BobProfile::Honest
    }

    pub fn has_cheater(&self) -> bool {
        self.alice_cheats() || self.bob_cheats()
    }

    pub fn validate(&self) -> Result<()> {
        if self.alice_cheats() && self.bob_cheats() {
            return Err(Error::Config("at most one party may cheat".into()));
        }
        Ok(())
    }

    pub fn alice_label(&self) -> &'static str {
        match self.alice {
            AliceProfile::Honest => "honest",
            AliceProfile::Cheating => "cheating",
            AliceProfile::AttenuatedHonest => "attenuated-honest",
        }
    }

    pub fn bob_label(&self) -> &'static str {
        match self.bob {
            BobProfile::Honest => "honest",
            BobProfile::Cheating => "cheating",
            BobProfile::SelectiveAbort { .. } => "selective-abort",
            BobProfile::Multiphoton => "multiphoton",
        }
    }

    /// `alice/bob`, e.g. `cheating/honest`.
    pub fn label(&self) -> String {
        format!("{}/{}", self.alice_label(), self.bob_label())
    }
}

fn random_bit(rng: &mut StreamRng) -> u8 {
    rng.random_range(0..2u8)
}

/// Alice's side of one instance.
pub trait AliceStrategy: Send {
    /// State for the next send attempt. Called again after every loss.
    fn prepare(&mut self) -> StateAngle;
    /// Opens the commitment of the last prepared state once `b` is known.
    fn reveal(&mut self, b: u8) -> Reveal;
}

/// Bob's side of one instance.
pub trait BobStrategy: Send {
    /// Detector settings for the next send attempt.
    fn plan(&mut self) -> MeasurementPlan;
    /// Called with the clicks of an attempt in which at least one photon was
    /// detected. Bob either commits `b` or claims the photon was lost.
    fn on_detection(&mut self, outcomes: &[u8]) -> BobAction;
    /// Verdict on Alice's reveal.
    fn verdict(&mut self, reveal: Reveal, b: u8) -> Verdict;
}

/// Uniform `(x, a)` and the matching honest state.
pub fn honest_alice_prepare(set: &ProtocolStateSet, rng: &mut StreamRng) -> (u8, u8, StateAngle) {
    let x = random_bit(rng);
    let a = random_bit(rng);
    (x, a, set.honest_state(x, a))
}

/// Uniform `r` and the cheat state `A_r`.
pub fn cheating_alice_prepare(set: &ProtocolStateSet, rng: &mut StreamRng) -> (u8, StateAngle) {
    let r = random_bit(rng);
    (r, set.alice_cheat[r as usize])
}

/// Claim the honest state next to `A_r` that carries `a = c ⊕ b`.
pub fn cheating_alice_reveal(r: u8, b: u8, desired: u8) -> Reveal {
    let a = desired ^ b;
    Reveal { x: 1 ^ r ^ a, a }
}

/// Bob's best guess of `a` after outcome `o` along `theta`.
pub fn guess_from_outcome(phi: f64, theta: StateAngle, outcome: u8) -> u8 {
    if posterior_zero(phi, theta.radians()) >= 0.5 {
        outcome
    } else {
        1 - outcome
    }
}

/// Bits carried by the honest states consistent with every click, when they
/// agree. A state is inconsistent with a click if it is orthogonal to the
/// projector that fired.
pub fn infer_conclusive(
    set: &ProtocolStateSet,
    plan: &MeasurementPlan,
    outcomes: &[u8],
) -> Option<u8> {
    const TOL: f64 = 1e-9;
    let mut bits = [false; 2];
    for x in 0..2u8 {
        for a in 0..2u8 {
            let s = set.honest_state(x, a);
            let consistent = outcomes.iter().enumerate().all(|(i, &o)| {
                let p0 = overlap_prob(s, plan.angle_for(i));
                if o == 0 {
                    p0 > TOL
                } else {
                    1.0 - p0 > TOL
                }
            });
            if consistent {
                bits[a as usize] = true;
            }
        }
    }
    match bits {
        [true, false] => Some(0),
        [false, true] => Some(1),
        _ => None,
    }
}

/// Bob's detectors for the multi-photon attack: alternate bases 0, 1, 0, ….
pub fn multiphoton_plan(set: &ProtocolStateSet) -> MeasurementPlan {
    MeasurementPlan::cycling(vec![set.basis_angle(0), set.basis_angle(1)]).expect("two angles")
}

/// Measures a multi-photon pulse with the honest apparatus and returns Alice's
/// bit when the clicks pin it down.
pub fn multiphoton_bob(
    set: &ProtocolStateSet,
    photons: &[CircleDensity],
    rng: &mut StreamRng,
) -> Option<u8> {
    if photons.len() < 2 {
        return None;
    }
    let plan = multiphoton_plan(set);
    let outcomes: Vec<u8> = photons
        .iter()
        .enumerate()
        .map(|(i, p)| measure(p, plan.angle_for(i), rng))
        .collect();
    infer_conclusive(set, &plan, &outcomes)
}

pub struct HonestAlice {
    set: ProtocolStateSet,
    rng: StreamRng,
    pending: (u8, u8),
}

impl HonestAlice {
    pub fn new(set: ProtocolStateSet, rng: StreamRng) -> Self {
        HonestAlice {
            set,
            rng,
            pending: (0, 0),
        }
    }
}

impl AliceStrategy for HonestAlice {
    fn prepare(&mut self) -> StateAngle {
        let (x, a, s) = honest_alice_prepare(&self.set, &mut self.rng);
        self.pending = (x, a);
        s
    }

    fn reveal(&mut self, _b: u8) -> Reveal {
        Reveal {
            x: self.pending.0,
            a: self.pending.1,
        }
    }
}

pub struct CheatingAlice {
    set: ProtocolStateSet,
    rng: StreamRng,
    r: u8,
}

impl CheatingAlice {
    pub fn new(set: ProtocolStateSet, rng: StreamRng) -> Self {
        CheatingAlice { set, rng, r: 0 }
    }
}

impl AliceStrategy for CheatingAlice {
    fn prepare(&mut self) -> StateAngle {
        let (r, s) = cheating_alice_prepare(&self.set, &mut self.rng);
        self.r = r;
        s
    }

    fn reveal(&mut self, b: u8) -> Reveal {
        let desired = random_bit(&mut self.rng);
        cheating_alice_reveal(self.r, b, desired)
    }
}

pub struct HonestBob {
    set: ProtocolStateSet,
    rng: StreamRng,
    y: u8,
    outcome: u8,
}

impl HonestBob {
    pub fn new(set: ProtocolStateSet, rng: StreamRng) -> Self {
        HonestBob {
            set,
            rng,
            y: 0,
            outcome: 0,
        }
    }
}

impl BobStrategy for HonestBob {
    fn plan(&mut self) -> MeasurementPlan {
        self.y = random_bit(&mut self.rng);
        MeasurementPlan::single(self.set.basis_angle(self.y))
    }

    fn on_detection(&mut self, outcomes: &[u8]) -> BobAction {
        self.outcome = outcomes[0];
        BobAction::Commit(random_bit(&mut self.rng))
    }

    fn verdict(&mut self, reveal: Reveal, b: u8) -> Verdict {
        verify(reveal, b, self.y, self.outcome)
    }
}

/// Shared by every adversarial Bob: measure, guess `a`, steer `b`.
pub struct CheatingBob {
    phi: f64,
    set: ProtocolStateSet,
    rng: StreamRng,
    mode: CheatMode,
    unhappy: UnhappyAction,
    guess: u8,
}

#[derive(Debug, Clone, Copy)]
enum CheatMode {
    Straight,
    SelectiveAbort {
        theta: StateAngle,
        accept: AcceptRule,
    },
    Multiphoton,
}

impl CheatingBob {
    pub fn optimal(set: ProtocolStateSet, rng: StreamRng, unhappy: UnhappyAction) -> Self {
        Self::with_mode(set, rng, unhappy, CheatMode::Straight)
    }

    pub fn selective_abort(
        set: ProtocolStateSet,
        rng: StreamRng,
        unhappy: UnhappyAction,
        theta: StateAngle,
        accept: AcceptRule,
    ) -> Self {
        Self::with_mode(
            set,
            rng,
            unhappy,
            CheatMode::SelectiveAbort { theta, accept },
        )
    }

    pub fn multiphoton(set: ProtocolStateSet, rng: StreamRng, unhappy: UnhappyAction) -> Self {
        Self::with_mode(set, rng, unhappy, CheatMode::Multiphoton)
    }

    fn with_mode(
        set: ProtocolStateSet,
        rng: StreamRng,
        unhappy: UnhappyAction,
        mode: CheatMode,
    ) -> Self {
        CheatingBob {
            phi: set.phi.radians(),
            set,
            rng,
            mode,
            unhappy,
            guess: 0,
        }
    }

    fn steer(&mut self, guess: u8) -> BobAction {
        self.guess = guess;
        let desired = random_bit(&mut self.rng);
        BobAction::Commit(desired ^ guess)
    }
}

impl BobStrategy for CheatingBob {
    fn plan(&mut self) -> MeasurementPlan {
        match self.mode {
            CheatMode::Straight => MeasurementPlan::single(self.set.bob_cheat),
            CheatMode::SelectiveAbort { theta, .. } => MeasurementPlan::single(theta),
            CheatMode::Multiphoton => multiphoton_plan(&self.set),
        }
    }

    fn on_detection(&mut self, outcomes: &[u8]) -> BobAction {
        match self.mode {
            CheatMode::Straight => self.steer(outcomes[0]),
            CheatMode::SelectiveAbort { theta, accept } => {
                if !accept.accepts(outcomes[0]) {
                    return BobAction::DeclareLost;
                }
                let g = guess_from_outcome(self.phi, theta, outcomes[0]);
                self.steer(g)
            }
            CheatMode::Multiphoton => {
                if outcomes.len() < 2 {
                    return BobAction::DeclareLost;
                }
                match infer_conclusive(&self.set, &multiphoton_plan(&self.set), outcomes) {
                    Some(a) => self.steer(a),
                    None => BobAction::DeclareLost,
                }
            }
        }
    }

    fn verdict(&mut self, reveal: Reveal, b: u8) -> Verdict {
        if reveal.a != self.guess && self.unhappy == UnhappyAction::Mismatch {
            Verdict::Mismatch
        } else {
            Verdict::Accepted(reveal.a ^ b)
        }
    }
}

pub fn alice_strategy(
    profile: &StrategyProfile,
    set: ProtocolStateSet,
    rng: StreamRng,
) -> Box<dyn AliceStrategy> {
    match profile.alice {
        AliceProfile::Honest | AliceProfile::AttenuatedHonest => {
            Box::new(HonestAlice::new(set, rng))
        }
        AliceProfile::Cheating => Box::new(CheatingAlice::new(set, rng)),
    }
}

pub fn bob_strategy(
    profile: &StrategyProfile,
    set: ProtocolStateSet,
    rng: StreamRng,
) -> Box<dyn BobStrategy> {
    let unhappy = profile.unhappy;
    match profile.bob {
        BobProfile::Honest => Box::new(HonestBob::new(set, rng)),
        BobProfile::Cheating => Box::new(CheatingBob::optimal(set, rng, unhappy)),
        BobProfile::SelectiveAbort { theta, accept } => Box::new(CheatingBob::selective_abort(
            set, rng, unhappy, theta, accept,
        )),
        BobProfile::Multiphoton => Box::new(CheatingBob::multiphoton(set, rng, unhappy)),
    }
}
