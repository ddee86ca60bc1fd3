#![allow(dead_code)]

use qcoin_core::config::{fair_phi, BobKind, BB84_PHI};
use qcoin_core::session::run_session_with;
use qcoin_core::strategies::AliceProfile;
use qcoin_core::{SessionConfig, SessionStats};

pub fn sigma(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

pub fn assert_within(observed: f64, expected: f64, n: u64, k_sigma: f64, what: &str) {
    let s = sigma(expected, n).max(1e-12);
    assert!(
        (observed - expected).abs() <= k_sigma * s,
        "{what}: observed {observed}, expected {expected} ± {k_sigma}σ (σ = {s})"
    );
}

pub fn run(config: &SessionConfig) -> SessionStats {
    run_session_with(config, |_| {}).unwrap()
}

pub fn phis() -> [f64; 2] {
    [BB84_PHI, fair_phi()]
}

pub fn cheat_alice(seed: u64, phi_deg: f64, v: f64, n: u64) -> SessionConfig {
    SessionConfig::builder(seed)
        .phi_deg(phi_deg)
        .alice(AliceProfile::Cheating)
        .visibility(v)
        .count(n)
        .build()
        .unwrap()
}

pub fn cheat_bob(seed: u64, phi_deg: f64, v: f64, n: u64) -> SessionConfig {
    SessionConfig::builder(seed)
        .phi_deg(phi_deg)
        .bob(BobKind::Cheating)
        .visibility(v)
        .count(n)
        .build()
        .unwrap()
}
