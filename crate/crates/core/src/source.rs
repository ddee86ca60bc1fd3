//! Photon sources and the lossy channel between Alice and Bob.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{depolarize, measure, CircleDensity, ProtocolStateSet, StateAngle};
use crate::rng::StreamRng;

/// Largest supported mean photon number.
pub const MAX_MU: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceKind {
    /// Ideal source: every attempt emits exactly one photon.
    SinglePhoton,
    /// Heralded entangled pairs. Alice's projection heralds at least one pair;
    /// the pair count is Poisson(μ) conditioned on being nonzero. Only the
    /// heralded pair carries the prepared state.
    EntangledPair,
    /// Attenuated laser pulse: Poisson(μ) photons, all in the prepared state.
    AttenuatedPulse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceModel {
    pub kind: SourceKind,
    pub mu: f64,
    pub visibility: f64,
}

impl SourceModel {
    pub fn single_photon(visibility: f64) -> Self {
        SourceModel {
            kind: SourceKind::SinglePhoton,
            mu: 1.0,
            visibility,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.visibility) {
            return Err(Error::VisibilityOutOfRange(self.visibility));
        }
        if !(0.0..=MAX_MU).contains(&self.mu) {
            return Err(Error::Config(format!(
                "mu must lie in [0, {MAX_MU}], got {}",
                self.mu
            )));
        }
        Ok(())
    }

    /// Number of photons (or pairs) emitted in one attempt. One uniform draw.
    pub fn sample_count(&self, rng: &mut StreamRng) -> u32 {
        match self.kind {
            SourceKind::SinglePhoton => 1,
            SourceKind::AttenuatedPulse => sample_photon_count(self.mu, rng),
            SourceKind::EntangledPair => sample_heralded_count(self.mu, rng),
        }
    }

    /// Photons leaving Alice's lab for one attempt, already depolarized.
    pub fn emit(
        &self,
        prepared: StateAngle,
        set: &ProtocolStateSet,
        rng: &mut StreamRng,
    ) -> Vec<CircleDensity> {
        let count = self.sample_count(rng);
        let noisy = |s: StateAngle| {
            depolarize(CircleDensity::pure(s), self.visibility).expect("visibility validated")
        };
        let mut photons = Vec::with_capacity(count as usize);
        for i in 0..count {
            let state = match self.kind {
                SourceKind::EntangledPair if i > 0 => {
                    let x = rng.random_range(0..2u8);
                    let a = rng.random_range(0..2u8);
                    set.honest_state(x, a)
                }
                _ => prepared,
            };
            photons.push(noisy(state));
        }
        photons
    }
}

/// Inverse-CDF Poisson sampler over `[start, ∞)` given the mass already
/// skipped. Consumes exactly one uniform draw.
fn poisson_from(mu: f64, u: f64) -> u32 {
    let mut k = 0u32;
    let mut pmf = (-mu).exp();
    let mut cdf = pmf;
    while u >= cdf {
        k += 1;
        pmf *= mu / k as f64;
        cdf += pmf;
        if pmf < 1e-300 && k as f64 > mu {
            break;
        }
    }
    k
}

/// Poisson-distributed photon number with mean `mu`.
pub fn sample_photon_count<R: Rng + ?Sized>(mu: f64, rng: &mut R) -> u32 {
    let u: f64 = rng.random();
    if mu <= 0.0 {
        return 0;
    }
    poisson_from(mu, u)
}

/// Poisson(μ) conditioned on at least one pair. `mu = 0` is the limit of
/// exactly one pair.
pub fn sample_heralded_count<R: Rng + ?Sized>(mu: f64, rng: &mut R) -> u32 {
    let u: f64 = rng.random();
    if mu <= 0.0 {
        return 1;
    }
    let p0 = (-mu).exp();
    poisson_from(mu, p0 + u * (1.0 - p0)).max(1)
}

/// Each photon independently survives with probability `eta`. One draw per photon.
pub fn apply_loss<R: Rng + ?Sized>(photons: &mut Vec<CircleDensity>, eta: f64, rng: &mut R) {
    photons.retain(|_| rng.random::<f64>() < eta);
}

/// Plan for Bob's detectors: surviving photon `i` is measured along
/// `angles[i % angles.len()]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementPlan {
    angles: Vec<StateAngle>,
}

impl MeasurementPlan {
    pub fn single(angle: StateAngle) -> Self {
        MeasurementPlan {
            angles: vec![angle],
        }
    }

    pub fn cycling(angles: Vec<StateAngle>) -> Result<Self> {
        if angles.is_empty() {
            return Err(Error::Config(
                "measurement plan needs at least one angle".into(),
            ));
        }
        Ok(MeasurementPlan { angles })
    }

    pub fn angles(&self) -> &[StateAngle] {
        &self.angles
    }

    pub fn angle_for(&self, photon: usize) -> StateAngle {
        self.angles[photon % self.angles.len()]
    }
}

/// Simulated physics between the parties: source, lossy link and Bob's
/// detectors. Owns the source and physics random streams.
#[derive(Debug, Clone)]
pub struct Channel {
    source: SourceModel,
    eta: f64,
    set: ProtocolStateSet,
    source_rng: StreamRng,
    physics_rng: StreamRng,
}

impl Channel {
    pub fn new(
        source: SourceModel,
        eta: f64,
        set: ProtocolStateSet,
        source_rng: StreamRng,
        physics_rng: StreamRng,
    ) -> Result<Self> {
        source.validate()?;
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::ProbabilityOutOfRange {
                name: "eta",
                value: eta,
            });
        }
        Ok(Channel {
            source,
            eta,
            set,
            source_rng,
            physics_rng,
        })
    }

    /// One send attempt: emit, lose, measure. An empty result means nothing
    /// reached Bob's detectors.
    pub fn transmit(&mut self, prepared: StateAngle, plan: &MeasurementPlan) -> Vec<u8> {
        let mut photons = self.source.emit(prepared, &self.set, &mut self.source_rng);
        apply_loss(&mut photons, self.eta, &mut self.physics_rng);
        photons
            .iter()
            .enumerate()
            .map(|(i, p)| measure(p, plan.angle_for(i), &mut self.physics_rng))
            .collect()
    }
}
