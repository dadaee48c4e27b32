//! Quick invariant and oracle checks behind the `check` command.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::secrecy_rate;
use crate::dcp::{matrix_phi, scalar_phi};
use crate::linalg::{ln_det_hpd, random_psd};
use crate::model::{sample_channels, BandwidthScheme, CompressionMode, NetworkConfig};
use crate::solver::{cccp, CccpOptions};

pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome { name, passed, detail }
}

fn check_secrecy() -> CheckOutcome {
    let ok = secrecy_rate(5e6, 2e6) == 3e6 && secrecy_rate(1e6, 2e6) == 0.0 && secrecy_rate(7e6, 0.0) == 7e6;
    outcome("secrecy rate identity", ok, String::new())
}

fn check_phi_bounds() -> CheckOutcome {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let mut worst_tangent: f64 = 0.0;
    let mut violations = 0;
    for _ in 0..100 {
        let x0: f64 = rng.random_range(0.1..10.0);
        let x: f64 = rng.random_range(0.1..10.0);
        worst_tangent = worst_tangent.max((scalar_phi(x0, x0).unwrap_or(f64::NAN) - x0.ln()).abs());
        if scalar_phi(x, x0).map_or(true, |v| v < x.ln() - 1e-12) {
            violations += 1;
        }
        let a0 = random_psd(3, &mut rng) + crate::linalg::cidentity(3).scale(0.1);
        let a = random_psd(3, &mut rng) + crate::linalg::cidentity(3).scale(0.1);
        let (Some(l0), Some(l)) = (ln_det_hpd(&a0), ln_det_hpd(&a)) else {
            violations += 1;
            continue;
        };
        worst_tangent = worst_tangent.max((matrix_phi(&a0, &a0).unwrap_or(f64::NAN) - l0).abs());
        if matrix_phi(&a, &a0).map_or(true, |v| v < l - 1e-10) {
            violations += 1;
        }
    }
    let ok = worst_tangent <= 1e-10 && violations == 0;
    outcome("log-det linearization bounds", ok, format!("tangency error {worst_tangent:.1e}, {violations} bound violations"))
}

fn check_solve() -> Vec<CheckOutcome> {
    let cfg = NetworkConfig::reference(10.0, 10e6);
    let ch = match sample_channels(&cfg, 1) {
        Ok(c) => c,
        Err(e) => return vec![outcome("reference solve", false, e.to_string())],
    };
    let opts = CccpOptions { restarts: 2, seed: 1, ..CccpOptions::default() };
    let solve = |scheme, mode, o: &CccpOptions| cccp(&ch, &cfg, scheme, mode, o);
    let mut out = Vec::new();
    match solve(BandwidthScheme::Optimized, CompressionMode::PointToPoint, &opts) {
        Ok(s) => {
            let monotone = s.objective_trace.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-6));
            let residual = s.report.max_residual();
            out.push(outcome("reference solve feasible", residual <= 1e-5, format!("max residual {residual:.2e}")));
            out.push(outcome("objective trace monotone", monotone, format!("{} iterations", s.iterations.len())));
            let again = solve(BandwidthScheme::Optimized, CompressionMode::PointToPoint, &opts);
            let same = again.is_ok_and(|a| a.objective == s.objective);
            out.push(outcome("solve determinism", same, format!("objective {:.6e} bit/s", s.objective)));
        }
        Err(e) => out.push(outcome("reference solve feasible", false, e.to_string())),
    }
    let frozen = CccpOptions { freeze_theta: true, ..opts.clone() };
    let ptp = solve(BandwidthScheme::EqualSplit, CompressionMode::PointToPoint, &opts);
    let mv = solve(BandwidthScheme::EqualSplit, CompressionMode::Multivariate, &frozen);
    let (ok, detail) = match (ptp, mv) {
        (Ok(a), Ok(b)) => {
            let rel = (a.objective - b.objective).abs() / a.objective.abs().max(1.0);
            (rel <= 1e-6, format!("relative gap {rel:.2e}"))
        }
        (Err(e), _) | (_, Err(e)) => (false, e.to_string()),
    };
    out.push(outcome("multivariate with zero correlation equals point-to-point", ok, detail));
    out
}

/// Runs every check; fast enough for interactive use.
pub fn self_check() -> Vec<CheckOutcome> {
    let mut out = vec![check_secrecy(), check_phi_bounds()];
    out.extend(check_solve());
    out
}
