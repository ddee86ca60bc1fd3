//! Qubit states on the real great circle of the Bloch sphere.
//!
//! Every state the protocol uses has real amplitudes, so a pure state is a
//! single Hilbert-space angle `theta` (`cos θ|0⟩ + sin θ|1⟩`) and a mixed state
//! adds a purity (the length of the Bloch vector). Measurements are rank-1
//! projectors onto one of these pure states and its orthogonal partner.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A pure real qubit state, stored as its angle canonicalized into `[0, π)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct StateAngle(f64);

impl StateAngle {
    pub const ZERO: StateAngle = StateAngle(0.0);
    pub const ONE: StateAngle = StateAngle(FRAC_PI_2);

    /// Builds a state from an angle in radians. Angles differing by π are the
    /// same physical state and map to the same value.
    pub fn new(theta: f64) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::NonFiniteAngle(theta));
        }
        Ok(StateAngle(canonical(theta)))
    }

    pub fn from_degrees(deg: f64) -> Result<Self> {
        Self::new(deg.to_radians())
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    pub fn degrees(self) -> f64 {
        self.0.to_degrees()
    }

    /// `(⟨0|ψ⟩, ⟨1|ψ⟩)`.
    pub fn amplitudes(self) -> (f64, f64) {
        (self.0.cos(), self.0.sin())
    }

    /// The orthogonal partner, `θ + π/2`.
    pub fn orthogonal(self) -> StateAngle {
        StateAngle(canonical(self.0 + FRAC_PI_2))
    }

    pub fn rotated(self, delta: f64) -> StateAngle {
        StateAngle(canonical(self.0 + delta))
    }

    /// Distance between the two states on the projective circle, in `[0, π/2]`.
    pub fn distance(self, other: StateAngle) -> f64 {
        let d = (self.0 - other.0).abs();
        d.min(PI - d)
    }
}

impl TryFrom<f64> for StateAngle {
    type Error = Error;

    fn try_from(theta: f64) -> Result<Self> {
        StateAngle::new(theta)
    }
}

impl From<StateAngle> for f64 {
    fn from(s: StateAngle) -> f64 {
        s.0
    }
}

fn canonical(theta: f64) -> f64 {
    let t = theta.rem_euclid(PI);
    if t >= PI {
        0.0
    } else {
        t
    }
}

pub fn state_from_angle(theta: f64) -> Result<StateAngle> {
    StateAngle::new(theta)
}

/// Born-rule overlap `|⟨s|t⟩|² = cos²(s − t)`.
pub fn overlap_prob(s: StateAngle, t: StateAngle) -> f64 {
    let c = (s.0 - t.0).cos();
    c * c
}

/// A possibly mixed real qubit state: Bloch direction plus purity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleDensity {
    pub theta: StateAngle,
    purity: f64,
}

impl CircleDensity {
    pub fn pure(theta: StateAngle) -> Self {
        CircleDensity { theta, purity: 1.0 }
    }

    pub fn new(theta: StateAngle, purity: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&purity) {
            return Err(Error::ProbabilityOutOfRange {
                name: "purity",
                value: purity,
            });
        }
        Ok(CircleDensity { theta, purity })
    }

    pub fn maximally_mixed() -> Self {
        CircleDensity {
            theta: StateAngle::ZERO,
            purity: 0.0,
        }
    }

    pub fn purity(&self) -> f64 {
        self.purity
    }

    /// Real symmetric 2×2 density matrix `p|ψ⟩⟨ψ| + (1−p)·I/2`.
    pub fn matrix(&self) -> [[f64; 2]; 2] {
        let (c, s) = self.theta.amplitudes();
        let p = self.purity;
        let mix = (1.0 - p) / 2.0;
        [[p * c * c + mix, p * c * s], [p * c * s, p * s * s + mix]]
    }

    /// Probability that a projective measurement along `basis` returns 0.
    pub fn prob_zero(&self, basis: StateAngle) -> f64 {
        self.purity * overlap_prob(self.theta, basis) + (1.0 - self.purity) / 2.0
    }
}

impl From<StateAngle> for CircleDensity {
    fn from(theta: StateAngle) -> Self {
        CircleDensity::pure(theta)
    }
}

/// Depolarizing channel with visibility `v`: the Bloch vector shrinks by `v`.
pub fn depolarize(state: CircleDensity, v: f64) -> Result<CircleDensity> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::VisibilityOutOfRange(v));
    }
    Ok(CircleDensity {
        theta: state.theta,
        purity: state.purity * v,
    })
}

/// Projective measurement along `basis`. Outcome 0 is the projection onto
/// `|basis⟩`. Consumes exactly one `f64` draw from `rng`.
pub fn measure<R: Rng + ?Sized>(state: &CircleDensity, basis: StateAngle, rng: &mut R) -> u8 {
    let u: f64 = rng.random();
    if u < state.prob_zero(basis) {
        0
    } else {
        1
    }
}

/// The honest four states plus both cheaters' optimal states for one `φ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProtocolStateSet {
    pub phi: StateAngle,
    /// Indexed `[x][a]`.
    pub honest: [[StateAngle; 2]; 2],
    /// `A₀` and `A₁`.
    pub alice_cheat: [StateAngle; 2],
    /// Bob's cheating basis `B₀`; `B₁` is its orthogonal partner.
    pub bob_cheat: StateAngle,
}

impl ProtocolStateSet {
    pub fn new(phi: f64) -> Result<Self> {
        if !phi.is_finite() || phi <= 0.0 || phi > FRAC_PI_4 + 1e-12 {
            return Err(Error::PhiOutOfRange(phi));
        }
        let phi = phi.min(FRAC_PI_4);
        let a0 = (phi + FRAC_PI_2) / 2.0;
        let st = |t: f64| StateAngle(canonical(t));
        Ok(ProtocolStateSet {
            phi: st(phi),
            honest: [[st(0.0), st(FRAC_PI_2)], [st(phi), st(phi + FRAC_PI_2)]],
            alice_cheat: [st(a0), st(a0 + FRAC_PI_2)],
            bob_cheat: st(phi / 2.0),
        })
    }

    pub fn honest_state(&self, x: u8, a: u8) -> StateAngle {
        self.honest[x as usize][a as usize]
    }

    /// Measurement angle for honest basis `y`: outcome 0 means `a = 0`.
    pub fn basis_angle(&self, y: u8) -> StateAngle {
        self.honest[y as usize][0]
    }

    /// Uniform ensembles of the honest states carrying `a = 0` and `a = 1`.
    pub fn bit_ensembles(&self) -> [Vec<(StateAngle, f64)>; 2] {
        [
            vec![(self.honest[0][0], 0.5), (self.honest[1][0], 0.5)],
            vec![(self.honest[0][1], 0.5), (self.honest[1][1], 0.5)],
        ]
    }
}

pub fn protocol_state_set(phi: f64) -> Result<ProtocolStateSet> {
    ProtocolStateSet::new(phi)
}

/// Result of optimal two-hypothesis discrimination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Helstrom {
    pub success: f64,
    /// Outcome 0 of a projector along this angle means "ensemble 0".
    pub basis: StateAngle,
}

fn ensemble_matrix(ensemble: &[(StateAngle, f64)]) -> Result<[[f64; 2]; 2]> {
    if ensemble.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let total: f64 = ensemble.iter().map(|(_, w)| w).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::WeightsNotNormalized(total));
    }
    let mut m = [[0.0; 2]; 2];
    for (s, w) in ensemble {
        let r = CircleDensity::pure(*s).matrix();
        for i in 0..2 {
            for j in 0..2 {
                m[i][j] += w * r[i][j];
            }
        }
    }
    Ok(m)
}

/// Helstrom bound `1/2 + ‖ρ₀ − ρ₁‖₁/4` for two equiprobable ensembles.
pub fn helstrom_guess_prob(
    ensemble0: &[(StateAngle, f64)],
    ensemble1: &[(StateAngle, f64)],
) -> Result<Helstrom> {
    let r0 = ensemble_matrix(ensemble0)?;
    let r1 = ensemble_matrix(ensemble1)?;
    let p = r0[0][0] - r1[0][0];
    let q = r0[0][1] - r1[0][1];
    let r = r0[1][1] - r1[1][1];
    let mean = (p + r) / 2.0;
    let rad = ((p - r) / 2.0).hypot(q);
    let trace_norm = (mean + rad).abs() + (mean - rad).abs();
    // Eigenvector of the larger eigenvalue of [[p, q], [q, r]].
    let angle = 0.5 * (2.0 * q).atan2(p - r);
    Ok(Helstrom {
        success: 0.5 + trace_norm / 4.0,
        basis: StateAngle(canonical(angle)),
    })
}

/// Posterior weight `q(θ) = [cos²θ + cos²(θ−φ)]/2` that a click along `θ`
/// came from an `a = 0` state, with uniform priors over the four honest states.
pub fn posterior_zero(phi: f64, theta: f64) -> f64 {
    let c0 = theta.cos();
    let c1 = (theta - phi).cos();
    (c0 * c0 + c1 * c1) / 2.0
}

/// Confidence of the best guess of `a` after a projective click along `θ`.
pub fn max_confidence(phi: f64, theta: f64) -> f64 {
    let q = posterior_zero(phi, theta);
    q.max(1.0 - q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const EPS: f64 = 1e-12;

    fn fair_phi() -> f64 {
        0.8f64.acos()
    }

    #[test]
    fn state_amplitudes() {
        let (c, s) = state_from_angle(0.0).unwrap().amplitudes();
        assert_eq!((c, s), (1.0, 0.0));
        let (c, s) = state_from_angle(FRAC_PI_2).unwrap().amplitudes();
        assert!(c.abs() < EPS && (s - 1.0).abs() < EPS);
        let (c, s) = state_from_angle(FRAC_PI_4).unwrap().amplitudes();
        let h = 2f64.sqrt() / 2.0;
        assert!((c - h).abs() < EPS && (s - h).abs() < EPS);
    }

    #[test]
    fn canonicalization() {
        assert_eq!(StateAngle::new(PI).unwrap().radians(), 0.0);
        assert!((StateAngle::new(-FRAC_PI_2).unwrap().radians() - FRAC_PI_2).abs() < EPS);
        assert!((StateAngle::new(3.0 * PI + 0.25).unwrap().radians() - 0.25).abs() < 1e-9);
        assert!(StateAngle::new(f64::NAN).is_err());
        assert!(StateAngle::new(f64::INFINITY).is_err());
    }

    #[test]
    fn overlaps() {
        let z = StateAngle::ZERO;
        assert_eq!(overlap_prob(z, z), 1.0);
        assert!(overlap_prob(z, StateAngle::ONE) < EPS);
        let a0 = StateAngle::from_degrees(67.5).unwrap();
        let p10 = StateAngle::from_degrees(45.0).unwrap();
        assert!((overlap_prob(a0, p10) - (2.0 + 2f64.sqrt()) / 4.0).abs() < EPS);
        assert!((overlap_prob(p10, a0) - overlap_prob(a0, p10)).abs() < EPS);
    }

    #[test]
    fn state_sets() {
        let bb84 = protocol_state_set(FRAC_PI_4).unwrap();
        let deg = |s: StateAngle| s.degrees();
        assert!((deg(bb84.honest[0][0]) - 0.0).abs() < 1e-9);
        assert!((deg(bb84.honest[0][1]) - 90.0).abs() < 1e-9);
        assert!((deg(bb84.honest[1][0]) - 45.0).abs() < 1e-9);
        assert!((deg(bb84.honest[1][1]) - 135.0).abs() < 1e-9);
        assert!((deg(bb84.alice_cheat[0]) - 67.5).abs() < 1e-9);
        assert!((deg(bb84.alice_cheat[1]) - 157.5).abs() < 1e-9);
        assert!((deg(bb84.bob_cheat) - 22.5).abs() < 1e-9);

        let fair = protocol_state_set(fair_phi()).unwrap();
        assert!((deg(fair.alice_cheat[0]) - 63.43).abs() < 0.01);
        assert!((deg(fair.bob_cheat) - 18.43).abs() < 0.01);

        let s30 = protocol_state_set(30f64.to_radians()).unwrap();
        assert!((deg(s30.alice_cheat[0]) - 60.0).abs() < 1e-9);
        assert!((deg(s30.bob_cheat) - 15.0).abs() < 1e-9);

        assert!(protocol_state_set(0.0).is_err());
        assert!(protocol_state_set(FRAC_PI_4 + 0.01).is_err());
        assert!(protocol_state_set(-0.3).is_err());
    }

    #[test]
    fn cheat_states_are_equidistant() {
        for deg in [5.0, 20.0, 36.0, 45.0] {
            let set = protocol_state_set(f64::to_radians(deg)).unwrap();
            let d = (FRAC_PI_2 - set.phi.radians()) / 2.0;
            let [a0, a1] = set.alice_cheat;
            assert!((a0.distance(set.honest[1][0]) - d).abs() < 1e-12);
            assert!((a0.distance(set.honest[0][1]) - d).abs() < 1e-12);
            assert!((a1.distance(set.honest[1][1]) - d).abs() < 1e-12);
            assert!((a1.distance(set.honest[0][0]) - d).abs() < 1e-12);
        }
    }

    #[test]
    fn depolarize_examples() {
        let s = CircleDensity::pure(StateAngle::new(0.3).unwrap());
        assert_eq!(depolarize(s, 1.0).unwrap(), s);
        assert_eq!(depolarize(s, 0.0).unwrap().purity(), 0.0);
        assert!(depolarize(s, 1.1).is_err());
        assert!(depolarize(s, -0.1).is_err());

        // Direct density-matrix arithmetic: V|0⟩⟨0| + (1−V)I/2, read ⟨1|ρ|1⟩.
        let v = 0.92;
        let rho11 = v * 0.0 + (1.0 - v) / 2.0;
        let d = depolarize(CircleDensity::pure(StateAngle::ZERO), v).unwrap();
        assert!((1.0 - d.prob_zero(StateAngle::ZERO) - rho11).abs() < EPS);
        assert!((rho11 - 0.04).abs() < EPS);
    }

    #[test]
    fn measure_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let z = CircleDensity::pure(StateAngle::ZERO);
        assert!((0..1000).all(|_| measure(&z, StateAngle::ZERO, &mut rng) == 0));
        let d = CircleDensity::pure(StateAngle::from_degrees(45.0).unwrap());
        assert!((d.prob_zero(StateAngle::ZERO) - 0.5).abs() < EPS);
        let fair = protocol_state_set(fair_phi()).unwrap();
        let p = CircleDensity::pure(fair.honest[1][0]).prob_zero(fair.bob_cheat);
        assert!((p - 0.9).abs() < 1e-12);
    }

    #[test]
    fn helstrom_examples() {
        let bb84 = protocol_state_set(FRAC_PI_4).unwrap();
        let [e0, e1] = bb84.bit_ensembles();
        let h = helstrom_guess_prob(&e0, &e1).unwrap();
        assert!((h.success - (2.0 + 2f64.sqrt()) / 4.0).abs() < EPS);
        assert!((h.basis.degrees() - 22.5).abs() < 1e-9);

        let same = helstrom_guess_prob(&e0, &e0).unwrap();
        assert!((same.success - 0.5).abs() < EPS);

        let z = [(StateAngle::ZERO, 1.0)];
        let o = [(StateAngle::ONE, 1.0)];
        assert!((helstrom_guess_prob(&z, &o).unwrap().success - 1.0).abs() < EPS);

        assert_eq!(helstrom_guess_prob(&[], &o), Err(Error::EmptyEnsemble));
        assert!(matches!(
            helstrom_guess_prob(&[(StateAngle::ZERO, 0.4)], &o),
            Err(Error::WeightsNotNormalized(_))
        ));
    }

    /// Independent route: scan projective measurements and keep the best.
    fn brute_force_guess(e0: &[(StateAngle, f64)], e1: &[(StateAngle, f64)]) -> f64 {
        (0..20_000)
            .map(|i| {
                let b = StateAngle::new(PI * i as f64 / 20_000.0).unwrap();
                let p0: f64 = e0.iter().map(|(s, w)| w * overlap_prob(*s, b)).sum();
                let p1: f64 = e1
                    .iter()
                    .map(|(s, w)| w * (1.0 - overlap_prob(*s, b)))
                    .sum();
                (p0 + p1) / 2.0
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn helstrom_matches_brute_force() {
        for deg in [3.0, 17.0, 30.0, 36.87, 45.0] {
            let set = protocol_state_set(f64::to_radians(deg)).unwrap();
            let [e0, e1] = set.bit_ensembles();
            let h = helstrom_guess_prob(&e0, &e1).unwrap();
            assert!((h.success - brute_force_guess(&e0, &e1)).abs() < 1e-7);
            assert!(h.basis.distance(set.bob_cheat) < 1e-9);
        }
    }

    /// Enumerate the four likelihoods of a click along θ with uniform priors.
    fn enumerated_confidence(phi: f64, theta: f64) -> f64 {
        let set = protocol_state_set(phi).unwrap();
        let b = StateAngle::new(theta).unwrap();
        let l = |x: u8, a: u8| overlap_prob(set.honest_state(x, a), b) / 4.0;
        let click0 = l(0, 0) + l(1, 0) + l(0, 1) + l(1, 1);
        let post_a0 = (l(0, 0) + l(1, 0)) / click0;
        post_a0.max(1.0 - post_a0)
    }

    #[test]
    fn max_confidence_examples() {
        let fair = fair_phi();
        assert!((max_confidence(fair, fair / 2.0) - 0.9).abs() < 1e-12);
        assert!((enumerated_confidence(fair, fair / 2.0) - 0.9).abs() < 1e-12);
        let q45 = max_confidence(FRAC_PI_4, FRAC_PI_4 / 2.0);
        assert!((q45 - (2.0 + 2f64.sqrt()) / 4.0).abs() < 1e-12);
        assert!((q45 - enumerated_confidence(FRAC_PI_4, FRAC_PI_4 / 2.0)).abs() < 1e-12);
        for i in 0..50 {
            let theta = 0.07 * i as f64;
            assert!((max_confidence(0.4, theta) - enumerated_confidence(0.4, theta)).abs() < 1e-12);
        }
        // q averaged over a uniform grid of θ is 1/2.
        let n = 4096;
        let mean: f64 = (0..n)
            .map(|i| posterior_zero(0.5, PI * i as f64 / n as f64))
            .sum::<f64>()
            / n as f64;
        assert!((mean - 0.5).abs() < 1e-12);
    }
}
