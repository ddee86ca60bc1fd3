mod common;

use common::assert_within;
use qcoin_core::config::fair_phi;
use qcoin_core::quantum::protocol_state_set;
use qcoin_core::rng::{stream, StreamId};
use qcoin_core::source::{apply_loss, sample_photon_count, SourceKind, SourceModel};
use qcoin_core::{CircleDensity, SessionConfig, StateAngle};

#[test]
fn poisson_pair_statistics() {
    let n = 1_000_000u64;
    let mut rng = stream(8, StreamId::Source);
    let mut counts = [0u64; 4];
    for _ in 0..n {
        let k = sample_photon_count(0.05, &mut rng) as usize;
        counts[k.min(3)] += 1;
    }
    let p1 = 0.05 * (-0.05f64).exp();
    let p2 = 0.05f64.powi(2) / 2.0 * (-0.05f64).exp();
    assert!((p1 - 0.048).abs() < 0.0005 && (p2 - 0.0012).abs() < 0.00005);
    assert_within(
        counts[0] as f64 / n as f64,
        (-0.05f64).exp(),
        n,
        3.0,
        "P(0)",
    );
    assert_within(counts[1] as f64 / n as f64, p1, n, 3.0, "P(1)");
    assert_within(counts[2] as f64 / n as f64, p2, n, 3.0, "P(2)");
}

fn mutual_information(joint: &[[u64; 4]; 4]) -> f64 {
    let n: u64 = joint.iter().flatten().sum();
    let n = n as f64;
    let rows: Vec<f64> = joint
        .iter()
        .map(|r| r.iter().sum::<u64>() as f64 / n)
        .collect();
    let cols: Vec<f64> = (0..4)
        .map(|j| joint.iter().map(|r| r[j]).sum::<u64>() as f64 / n)
        .collect();
    let mut mi = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            let p = joint[i][j] as f64 / n;
            if p > 0.0 {
                mi += p * (p / (rows[i] * cols[j])).ln();
            }
        }
    }
    mi
}

fn second_photon_table(kind: SourceKind) -> [[u64; 4]; 4] {
    let set = protocol_state_set(fair_phi()).unwrap();
    let src = SourceModel {
        kind,
        mu: 3.0,
        visibility: 1.0,
    };
    let mut rng = stream(9, StreamId::Source);
    let mut alice = stream(9, StreamId::Alice);
    let index = |s: StateAngle| {
        (0..4)
            .find(|&i| set.honest_state(i >> 1, i & 1) == s)
            .expect("honest state")
    };
    let mut table = [[0u64; 4]; 4];
    let mut filled = 0;
    while filled < 100_000 {
        let (x, a, s) = qcoin_core::strategies::honest_alice_prepare(&set, &mut alice);
        let photons = src.emit(s, &set, &mut rng);
        if photons.len() >= 2 {
            assert_eq!(photons[0].theta, s);
            table[(2 * x + a) as usize][index(photons[1].theta) as usize] += 1;
            filled += 1;
        }
    }
    table
}

#[test]
fn entangled_extra_pairs_are_uncorrelated() {
    let mi = mutual_information(&second_photon_table(SourceKind::EntangledPair));
    // Plug-in bias is about 9 / (2·10⁵) nats.
    assert!(mi < 1e-3, "mutual information {mi}");
    let mi = mutual_information(&second_photon_table(SourceKind::AttenuatedPulse));
    assert!(
        (mi - 4f64.ln()).abs() < 1e-2,
        "pulse copies carry everything: {mi}"
    );
}

#[test]
fn loss_survival_fraction() {
    let n = 100_000;
    let mut rng = stream(10, StreamId::Physics);
    let mut photons = vec![CircleDensity::pure(StateAngle::ZERO); n];
    apply_loss(&mut photons, 0.5, &mut rng);
    assert_within(
        photons.len() as f64 / n as f64,
        0.5,
        n as u64,
        3.0,
        "survival",
    );
}

#[test]
fn visibility_sets_honest_error_rate() {
    let n = 200_000;
    let c = SessionConfig::builder(17)
        .fair()
        .visibility(0.92)
        .count(n)
        .build()
        .unwrap();
    let s = common::run(&c);
    assert_within(s.p_star, 0.02, n, 3.0, "honest P* at V = 0.92");
}
