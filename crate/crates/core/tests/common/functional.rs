use super::*;
use cranpool::metrics::{
    backhaul_rate, evaluate_constraints, fronthaul_rate, multivariate_joint_rate, phi_logdet, power_per_hz,
    privacy_leakage, rate_private, rate_shared, Band, DesignPoint,
};
use cranpool::linalg::{cidentity, CMat};
use cranpool::model::other;
use cranpool::{CompressionMode, ConstraintId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

const DRAWS: usize = 200;
const REL: f64 = 1e-8;

fn assert_rel(got: f64, want: f64, what: &str) {
    let tol = REL * want.abs().max(1.0);
    assert!((got - want).abs() <= tol, "{what}: got {got}, oracle {want}");
}

pub fn phi_closed_forms() {
    let i2 = cidentity(2);
    assert!((phi_logdet(&i2, &i2).unwrap() - 2.0).abs() < 1e-9);
    assert!(phi_logdet(&CMat::zeros(2, 2), &diag(&[0.3, 4.0])).unwrap().abs() < 1e-9);
    assert!((phi_logdet(&diag(&[3.0, 1.0]), &i2).unwrap() - 3.0).abs() < 1e-9);
}

pub fn private_rate_closed_forms() {
    let (cfg, st) = constant_siso(1, 1.0);
    let mut p = DesignPoint::zeros(&cfg, 0.0, CompressionMode::PointToPoint);
    p.vtil[0][0] = scalar(1.0);
    assert!((rate_private(0, 0, &p, &st).unwrap() - 1.0).abs() < 1e-9);

    let (cfg, st) = constant_siso(2, 1.0);
    let mut p = DesignPoint::zeros(&cfg, 0.0, CompressionMode::PointToPoint);
    p.vtil[0] = vec![scalar(1.0), scalar(1.0)];
    let want = 1.5f64.log2();
    for k in 0..2 {
        assert!((rate_private(0, k, &p, &st).unwrap() - want).abs() < 1e-9);
    }
}

pub fn shared_rate_closed_forms() {
    let (cfg, st) = constant_siso(1, 1.0);
    for mode in [CompressionMode::PointToPoint, CompressionMode::Multivariate] {
        let p = DesignPoint::zeros(&cfg, 0.5, mode);
        assert!(rate_shared(0, 0, &p, &st, mode).unwrap().abs() < 1e-9);
    }
    // unit power on the own RU only; the other operator interferes with unit power,
    // and each of the two RUs adds Ω + Σ = 2ε of quantization noise
    for eps in [0.0, 0.1, 0.25] {
        let mut p = DesignPoint::zeros(&cfg, eps, CompressionMode::PointToPoint);
        for i in 0..2 {
            p.util[i][0] = diag(&[1.0, 0.0]);
        }
        let want = (1.0 + 1.0 / (2.0 + 4.0 * eps)).log2();
        for i in 0..2 {
            assert!((rate_shared(i, 0, &p, &st, CompressionMode::PointToPoint).unwrap() - want).abs() < 1e-9);
        }
    }
}

pub fn shared_rate_zero_correlation_matches_point_to_point() {
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    for _ in 0..50 {
        let (cfg, st) = gaussian_scenario(1, 2, 2, 2, &mut rng);
        let mut p = random_point(&cfg, CompressionMode::Multivariate, &mut rng);
        p.theta = DesignPoint::zeros(&cfg, 0.0, CompressionMode::Multivariate).theta;
        for i in 0..2 {
            for k in 0..2 {
                let mv = rate_shared(i, k, &p, &st, CompressionMode::Multivariate).unwrap();
                let ptp = rate_shared(i, k, &p, &st, CompressionMode::PointToPoint).unwrap();
                assert!((mv - ptp).abs() <= 1e-12 * ptp.abs().max(1.0), "{mv} vs {ptp}");
            }
        }
    }
}

pub fn fronthaul_backhaul_privacy_closed_forms() {
    let (cfg, _) = constant_siso(1, 1.0);
    let mut p = DesignPoint::zeros(&cfg, 1.0, CompressionMode::PointToPoint);
    p.vtil[0][0] = scalar(1.0);
    assert!((fronthaul_rate(0, 0, Band::Private, &p, &cfg).unwrap() - 1.0).abs() < 1e-9);
    p.vtil[0][0] = scalar(3.0);
    assert!((fronthaul_rate(0, 0, Band::Private, &p, &cfg).unwrap() - 2.0).abs() < 1e-9);
    p.util[0][0] = diag(&[3.0, 0.0]);
    assert!((fronthaul_rate(0, 0, Band::Shared, &p, &cfg).unwrap() - 2.0).abs() < 1e-9);
    assert!(fronthaul_rate(1, 0, Band::Private, &p, &cfg).unwrap().abs() < 1e-9);
    assert!(fronthaul_rate(1, 0, Band::Shared, &p, &cfg).unwrap().abs() < 1e-9);

    // CP 0 forwards T̃ = 1 to RU (1, 0)
    let mut p = DesignPoint::zeros(&cfg, 1.0, CompressionMode::PointToPoint);
    assert!(backhaul_rate(1, 0, &p, &cfg).unwrap().abs() < 1e-9);
    p.util[0][0] = diag(&[0.0, 1.0]);
    assert!((backhaul_rate(1, 0, &p, &cfg).unwrap() - 1.0).abs() < 1e-9);
    p.sigma[1][0] = scalar(1.0 / 3.0);
    assert!((backhaul_rate(1, 0, &p, &cfg).unwrap() - 2.0).abs() < 1e-9);
    assert!(backhaul_rate(0, 0, &p, &cfg).unwrap().abs() < 1e-9);
}

pub fn privacy_closed_forms() {
    let (cfg, _) = constant_siso(1, 1.0);
    let mut p = DesignPoint::zeros(&cfg, 1.0, CompressionMode::PointToPoint);
    p.util[0][0] = diag(&[5.0, 0.0]);
    assert!(privacy_leakage(0, 0, &p, &cfg).unwrap().abs() < 1e-9);
    p.util[0][0] = diag(&[5.0, 1.0]);
    assert!((privacy_leakage(0, 0, &p, &cfg).unwrap() - 1.0).abs() < 1e-9);

    let (cfg, _) = constant_siso(2, 1.0);
    let mut p = DesignPoint::zeros(&cfg, 1.0, CompressionMode::PointToPoint);
    p.util[0] = vec![diag(&[0.0, 1.0]), diag(&[0.0, 1.0])];
    for k in 0..2 {
        assert!((privacy_leakage(0, k, &p, &cfg).unwrap() - 1.5f64.log2()).abs() < 1e-9);
    }
}

pub fn power_closed_forms() {
    let (cfg, _) = constant_siso(1, 1.0);
    let p = DesignPoint::zeros(&cfg, 0.0, CompressionMode::PointToPoint);
    for band in [Band::Private, Band::Shared] {
        assert!(power_per_hz(0, 0, band, &p, &cfg).unwrap().abs() < 1e-9);
    }
    let mut p = DesignPoint::zeros(&cfg, 0.5, CompressionMode::PointToPoint);
    p.vtil[0][0] = scalar(2.0);
    assert!((power_per_hz(0, 0, Band::Private, &p, &cfg).unwrap() - 2.5).abs() < 1e-9);
}

pub fn joint_rate_closed_forms() {
    let (cfg, _) = constant_siso(1, 1.0);
    let mut p = DesignPoint::zeros(&cfg, 1.0, CompressionMode::Multivariate);
    p.theta.as_mut().unwrap()[0] = scalar(0.5);
    assert!((multivariate_joint_rate(0, &p, &cfg).unwrap() + 0.75f64.log2()).abs() < 1e-9);

    let mut rng = ChaCha20Rng::seed_from_u64(3);
    for _ in 0..50 {
        let (cfg, _) = gaussian_scenario(1, 2, 2, 2, &mut rng);
        let mut p = random_point(&cfg, CompressionMode::Multivariate, &mut rng);
        p.theta = DesignPoint::zeros(&cfg, 0.0, CompressionMode::Multivariate).theta;
        for i in 0..2 {
            let sum = fronthaul_rate(i, 0, Band::Shared, &p, &cfg).unwrap() + backhaul_rate(other(i), 0, &p, &cfg).unwrap();
            assert!((multivariate_joint_rate(i, &p, &cfg).unwrap() - sum).abs() < 1e-9);
        }
    }
}

pub fn joint_rate_dominates_marginals() {
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    for _ in 0..DRAWS {
        let (a, u) = (rng.random_range(1..=3), rng.random_range(1..=2));
        let (cfg, _) = gaussian_scenario(1, u, a, 1, &mut rng);
        let p = random_point(&cfg, CompressionMode::Multivariate, &mut rng);
        for i in 0..2 {
            let sum = fronthaul_rate(i, 0, Band::Shared, &p, &cfg).unwrap() + backhaul_rate(other(i), 0, &p, &cfg).unwrap();
            assert!(multivariate_joint_rate(i, &p, &cfg).unwrap() >= sum - 1e-10);
        }
    }
}

fn random_shape<R: Rng>(rng: &mut R, mode: CompressionMode) -> (usize, usize, usize, usize) {
    let n_rus = if mode == CompressionMode::Multivariate { 1 } else { rng.random_range(1..=2) };
    (n_rus, rng.random_range(1..=2), rng.random_range(1..=2), rng.random_range(1..=2))
}

pub fn rates_match_covariance_assembly() {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    for draw in 0..DRAWS {
        let mode = if draw % 2 == 0 { CompressionMode::PointToPoint } else { CompressionMode::Multivariate };
        let (r, u, a, b) = random_shape(&mut rng, mode);
        let (cfg, st) = gaussian_scenario(r, u, a, b, &mut rng);
        let mut p = random_point(&cfg, mode, &mut rng);
        p.scale_precoders(rng.random_range(0.1..10.0));
        let shared = shared_covariance(&p, &cfg, mode);
        for i in 0..2 {
            let omega: Vec<&CMat> = p.omega_p[i].iter().collect();
            let private = sum(&p.vtil[i]) + blockdiag(&omega);
            let pi = to_global(&cfg, i);
            for k in 0..cfg.n_ues {
                let h = st.h_op(i, k, i);
                assert_rel(rate_private(i, k, &p, &st).unwrap(), rate_from_covariance(h, &private, &p.vtil[i][k]), "private rate");
                let own = &pi * &p.util[i][k] * pi.adjoint();
                let want = rate_from_covariance(&global_channel(&st, i, k), &shared, &own);
                assert_rel(rate_shared(i, k, &p, &st, mode).unwrap(), want, "shared rate");
            }
        }
    }
}

pub fn compression_rates_match_block_slicing() {
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    for _ in 0..DRAWS {
        let (r, u, a, b) = random_shape(&mut rng, CompressionMode::PointToPoint);
        let (cfg, _) = gaussian_scenario(r, u, a, b, &mut rng);
        let p = random_point(&cfg, CompressionMode::PointToPoint, &mut rng);
        let phi = |s: &CMat, n: &CMat| log2det(&(s + n)) - log2det(n);
        for i in 0..2 {
            let ib = other(i);
            let v = sum(&p.vtil[i]);
            let uo = sum(&p.util[i]);
            let uf = sum(&p.util[ib]);
            for r in 0..cfg.n_rus {
                let (off, n) = (cfg.ru_offset(i, r), cfg.n_ant_ru[i][r]);
                assert_rel(fronthaul_rate(i, r, Band::Private, &p, &cfg).unwrap(), phi(&block(&v, off, n), &p.omega_p[i][r]), "private fronthaul");
                assert_rel(fronthaul_rate(i, r, Band::Shared, &p, &cfg).unwrap(), phi(&block(&uo, off, n), &p.omega_s[i][r]), "shared fronthaul");
                let fwd = block(&uf, cfg.n_ru_total(ib) + off, n);
                assert_rel(backhaul_rate(i, r, &p, &cfg).unwrap(), phi(&fwd, &p.sigma[i][r]), "backhaul");
            }
            let (off, n) = (cfg.n_ru_total(i), cfg.n_ru_total(ib));
            let sig: Vec<&CMat> = p.sigma[ib].iter().collect();
            for k in 0..cfg.n_ues {
                let others: Vec<CMat> = (0..cfg.n_ues).filter(|&l| l != k).map(|l| block(&p.util[i][l], off, n)).collect();
                let mut noise = blockdiag(&sig);
                for o in &others {
                    noise += o;
                }
                assert_rel(privacy_leakage(i, k, &p, &cfg).unwrap(), phi(&block(&p.util[i][k], off, n), &noise), "privacy");
            }
        }
    }
}

pub fn power_matches_transmit_covariance() {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    for _ in 0..DRAWS {
        let (r, u, a, b) = random_shape(&mut rng, CompressionMode::PointToPoint);
        let (cfg, _) = gaussian_scenario(r, u, a, b, &mut rng);
        let p = random_point(&cfg, CompressionMode::PointToPoint, &mut rng);
        let shared = shared_covariance(&p, &cfg, CompressionMode::PointToPoint);
        for i in 0..2 {
            let omega: Vec<&CMat> = p.omega_p[i].iter().collect();
            let private = sum(&p.vtil[i]) + blockdiag(&omega);
            for r in 0..cfg.n_rus {
                let n = cfg.n_ant_ru[i][r];
                let off = cfg.ru_offset(i, r);
                let goff = if i == 0 { off } else { cfg.n_ru_total(0) + off };
                assert_rel(power_per_hz(i, r, Band::Private, &p, &cfg).unwrap(), block(&private, off, n).trace().re, "private power");
                assert_rel(power_per_hz(i, r, Band::Shared, &p, &cfg).unwrap(), block(&shared, goff, n).trace().re, "shared power");
            }
        }
    }
}

pub fn constraint_report_flags_targeted_violation() {
    let (cfg, st) = constant_siso(2, 1.0);
    for mode in [CompressionMode::PointToPoint, CompressionMode::Multivariate] {
        let mut p = DesignPoint::zeros(&cfg, 1.0, mode);
        p.wp = [4.0, 3.0];
        p.ws = 3.0;
        let rep = evaluate_constraints(&p, &st, &cfg, mode).unwrap();
        assert!(rep.residuals.values().all(|&r| r <= 0.0), "{:?}", rep.residuals);
        assert_eq!(rep.residuals.contains_key(&ConstraintId::MultivariateJoint), mode == CompressionMode::Multivariate);

        p.rp[1][0] = 0.5;
        let rep = evaluate_constraints(&p, &st, &cfg, mode).unwrap();
        let id = ConstraintId::RatePrivate { i: 1, k: 0 };
        assert!((rep.get(id).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(rep.worst.0, id);
        assert!(rep.residuals.iter().filter(|(&k, _)| k != id).all(|(_, &r)| r <= 0.0));
    }
}

/// Every check in this module, by name.
pub const CHECKS: &[(&str, fn())] = &[
    ("phi_closed_forms", phi_closed_forms),
    ("private_rate_closed_forms", private_rate_closed_forms),
    ("shared_rate_closed_forms", shared_rate_closed_forms),
    ("shared_rate_zero_correlation_matches_point_to_point", shared_rate_zero_correlation_matches_point_to_point),
    ("fronthaul_backhaul_privacy_closed_forms", fronthaul_backhaul_privacy_closed_forms),
    ("privacy_closed_forms", privacy_closed_forms),
    ("power_closed_forms", power_closed_forms),
    ("joint_rate_closed_forms", joint_rate_closed_forms),
    ("joint_rate_dominates_marginals", joint_rate_dominates_marginals),
    ("rates_match_covariance_assembly", rates_match_covariance_assembly),
    ("compression_rates_match_block_slicing", compression_rates_match_block_slicing),
    ("power_matches_transmit_covariance", power_matches_transmit_covariance),
    ("constraint_report_flags_targeted_violation", constraint_report_flags_targeted_violation),
];
