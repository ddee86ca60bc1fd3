//! One-line CSV summaries of a session.

use crate::config::SessionConfig;
use crate::stats::SessionStats;

pub const SUMMARY_HEADER: &str =
    "phi_deg,V,eta,profile,n,p0,p1,pstar,cheat_success,f_hat,f_ci_lo,f_ci_hi,seed";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Columns as in [`SUMMARY_HEADER`]; absent values are empty fields.
pub fn summary_row(config: &SessionConfig, stats: &SessionStats) -> String {
    let f = stats.estimate_f;
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{}",
        config.phi.to_degrees(),
        config.source.visibility,
        config.eta,
        config.profile.label(),
        stats.n,
        stats.p0,
        stats.p1,
        stats.p_star,
        opt(stats.cheat_success),
        opt(f.map(|e| e.fraction)),
        opt(f.map(|e| e.ci_lo)),
        opt(f.map(|e| e.ci_hi)),
        config.seed,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::run_session;

    #[test]
    fn row_matches_header() {
        let c = SessionConfig::builder(3).fair().count(50).build().unwrap();
        let run = run_session(&c).unwrap();
        let row = summary_row(&c, &run.stats);
        assert_eq!(row.split(',').count(), SUMMARY_HEADER.split(',').count());
        let phi: f64 = row.split(',').next().unwrap().parse().unwrap();
        assert!((phi - 36.8699).abs() < 1e-4);
        assert!(row.contains(",1,1,honest/honest,50,"), "{row}");
        assert!(row.ends_with(",3"));
    }
}
