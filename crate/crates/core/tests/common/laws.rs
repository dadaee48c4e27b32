use super::*;
use cranpool::dcp::{
    build_subproblem, hat_backhaul, hat_fronthaul, hat_joint, hat_privacy, hat_rate_private, hat_rate_shared, matrix_phi,
    scalar_phi, ConvexSubproblem, Family, SubproblemOptions, VarShape,
};
use cranpool::linalg::{cidentity, ln_det_hpd, CMat};
use cranpool::metrics::{
    backhaul_rate, fronthaul_rate, multivariate_joint_rate, privacy_leakage, rate_private, rate_shared, Band, DesignPoint,
};
use cranpool::model::{sample_channels, StackedChannels};
use cranpool::solver::{initialize_feasible, quantization_floor};
use cranpool::{BandwidthScheme, CompressionMode, NetworkConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

const PERTURBATIONS: usize = 100;
const TANGENCY: f64 = 1e-10;

pub fn scalar_phi_laws() {
    assert!(scalar_phi(1.0, 1.0).unwrap().abs() < 1e-12);
    assert!((scalar_phi(2.0, 1.0).unwrap() - 1.0).abs() < 1e-12);
    assert!(scalar_phi(1.0, 0.0).is_err());
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    for _ in 0..PERTURBATIONS {
        let x0: f64 = rng.random_range(1e-3..1e3);
        let x: f64 = rng.random_range(1e-3..1e3);
        assert!((scalar_phi(x0, x0).unwrap() - x0.ln()).abs() <= TANGENCY);
        assert!(scalar_phi(x, x0).unwrap() >= x.ln() - 1e-12);
    }
}

pub fn matrix_phi_laws() {
    let i2 = cidentity(2);
    assert!((matrix_phi(&i2.scale(2.0), &i2).unwrap() - 2.0).abs() < 1e-12);
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    for _ in 0..PERTURBATIONS {
        let n = rng.random_range(1..=4);
        let a0 = random_pd(n, 0.05, &mut rng);
        let a = random_pd(n, 0.0, &mut rng).scale(rng.random_range(0.1..10.0));
        assert!((matrix_phi(&a0, &a0).unwrap() - ln_det_hpd(&a0).unwrap()).abs() <= TANGENCY);
        // ln det of a singular PSD matrix is −∞, so the bound only needs checking when A ≻ 0
        if let Some(l) = ln_det_hpd(&a) {
            assert!(matrix_phi(&a, &a0).unwrap() >= l - 1e-10);
        }
    }
}

/// `(1 − t)·a + t·b` on every design quantity.
fn mix(a: &DesignPoint, b: &DesignPoint, t: f64) -> DesignPoint {
    let m = |x: &CMat, y: &CMat| x.scale(1.0 - t) + y.scale(t);
    let mut out = a.clone();
    for i in 0..2 {
        for k in 0..a.vtil[i].len() {
            out.vtil[i][k] = m(&a.vtil[i][k], &b.vtil[i][k]);
            out.util[i][k] = m(&a.util[i][k], &b.util[i][k]);
        }
        for r in 0..a.omega_p[i].len() {
            out.omega_p[i][r] = m(&a.omega_p[i][r], &b.omega_p[i][r]);
            out.omega_s[i][r] = m(&a.omega_s[i][r], &b.omega_s[i][r]);
            out.sigma[i][r] = m(&a.sigma[i][r], &b.sigma[i][r]);
        }
    }
    if let (Some(ta), Some(tb)) = (&a.theta, &b.theta) {
        out.theta = Some([m(&ta[0], &tb[0]), m(&ta[1], &tb[1])]);
    }
    out
}

struct Case {
    cfg: NetworkConfig,
    st: StackedChannels,
    mode: CompressionMode,
    expansion: DesignPoint,
    point: DesignPoint,
}

fn cases(seed: u64) -> impl Iterator<Item = Case> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..PERTURBATIONS).map(move |n| {
        let mode = if n % 2 == 0 { CompressionMode::PointToPoint } else { CompressionMode::Multivariate };
        let n_rus = if mode == CompressionMode::Multivariate { 1 } else { rng.random_range(1..=2) };
        let (cfg, st) = gaussian_scenario(n_rus, rng.random_range(1..=2), rng.random_range(1..=2), rng.random_range(1..=2), &mut rng);
        let expansion = random_point(&cfg, mode, &mut rng);
        let far = random_point(&cfg, mode, &mut rng);
        // perturbation sizes from a few percent to a whole new point
        let t = 10f64.powf(rng.random_range(-2.0..0.0));
        let point = mix(&expansion, &far, t);
        Case { cfg, st, mode, expansion, point }
    })
}

pub fn rate_minorants_are_tight_and_below() {
    for c in cases(3) {
        for i in 0..2 {
            for k in 0..c.cfg.n_ues {
                let f = |p: &DesignPoint| rate_private(i, k, p, &c.st).unwrap();
                let hat = |p: &DesignPoint| hat_rate_private(i, k, p, &c.expansion, &c.st).unwrap();
                assert!((hat(&c.expansion) - f(&c.expansion)).abs() <= TANGENCY);
                assert!(hat(&c.point) <= f(&c.point) + 1e-10);

                let f = |p: &DesignPoint| rate_shared(i, k, p, &c.st, c.mode).unwrap();
                let hat = |p: &DesignPoint| hat_rate_shared(i, k, p, &c.expansion, &c.st, c.mode).unwrap();
                assert!((hat(&c.expansion) - f(&c.expansion)).abs() <= TANGENCY);
                assert!(hat(&c.point) <= f(&c.point) + 1e-10);
            }
        }
    }
}

pub fn compression_majorants_are_tight_and_above() {
    for c in cases(4) {
        let cfg = &c.cfg;
        for i in 0..2 {
            for r in 0..cfg.n_rus {
                for band in [Band::Private, Band::Shared] {
                    let g = |p: &DesignPoint| fronthaul_rate(i, r, band, p, cfg).unwrap();
                    let hat = |p: &DesignPoint| hat_fronthaul(i, r, band, p, &c.expansion, cfg).unwrap();
                    assert!((hat(&c.expansion) - g(&c.expansion)).abs() <= TANGENCY);
                    assert!(hat(&c.point) >= g(&c.point) - 1e-10);
                }
                let g = |p: &DesignPoint| backhaul_rate(i, r, p, cfg).unwrap();
                let hat = |p: &DesignPoint| hat_backhaul(i, r, p, &c.expansion, cfg).unwrap();
                assert!((hat(&c.expansion) - g(&c.expansion)).abs() <= TANGENCY);
                assert!(hat(&c.point) >= g(&c.point) - 1e-10);
            }
            for k in 0..cfg.n_ues {
                let b = |p: &DesignPoint| privacy_leakage(i, k, p, cfg).unwrap();
                let hat = |p: &DesignPoint| hat_privacy(i, k, p, &c.expansion, cfg).unwrap();
                assert!((hat(&c.expansion) - b(&c.expansion)).abs() <= TANGENCY);
                assert!(hat(&c.point) >= b(&c.point) - 1e-10);
            }
            if c.mode == CompressionMode::Multivariate {
                let j = |p: &DesignPoint| multivariate_joint_rate(i, p, cfg).unwrap();
                let hat = |p: &DesignPoint| hat_joint(i, p, &c.expansion, cfg).unwrap();
                assert!((hat(&c.expansion) - j(&c.expansion)).abs() <= TANGENCY);
                assert!(hat(&c.point) >= j(&c.point) - 1e-10);
            }
        }
    }
}

pub fn zero_signal_hats() {
    let (cfg, st) = constant_siso(1, 1.0);
    let p = DesignPoint::zeros(&cfg, 1.0, CompressionMode::PointToPoint);
    for i in 0..2 {
        assert!(hat_rate_private(i, 0, &p, &p, &st).unwrap().abs() < 1e-12);
        assert!(hat_rate_shared(i, 0, &p, &p, &st, CompressionMode::PointToPoint).unwrap().abs() < 1e-12);
        assert!(hat_fronthaul(i, 0, Band::Private, &p, &p, &cfg).unwrap() >= 0.0);
        assert!(hat_backhaul(i, 0, &p, &p, &cfg).unwrap() >= 0.0);
        assert!(hat_privacy(i, 0, &p, &p, &cfg).unwrap() >= 0.0);
    }
}

fn census(scheme: BandwidthScheme, mode: CompressionMode) -> ConvexSubproblem {
    let cfg = NetworkConfig::reference(10.0, 10e6).scaled();
    let ch = sample_channels(&cfg, 1).unwrap();
    let st = StackedChannels::new(&cfg, &ch).unwrap();
    let exp = initialize_feasible(&st, &cfg, mode, scheme, 0).unwrap();
    build_subproblem(&exp, &st, &cfg, SubproblemOptions::new(scheme, mode, quantization_floor(&cfg))).unwrap().0
}

fn matrix_dims(sp: &ConvexSubproblem) -> Vec<usize> {
    sp.variables
        .iter()
        .filter_map(|v| match v.shape {
            VarShape::Hermitian(n) => Some(n),
            VarShape::Scalar => None,
        })
        .collect()
}

/// Single-antenna, N_R = N_U = 1, point-to-point, optimized bandwidth.
///
/// Scalars (33):
///   rates R_{i,1,P}, R_{i,1,S}                          4
///   bandwidths W_P1, W_P2, W_S                          3
///   rate epigraphs t_f per rate                         4
///   per RU: t_g, g̃ for both bands, t_γ, γ̃               6 x 2 = 12
///   privacy epigraphs t_β per UE                         2
///   per RU: t_p, p̃ for both bands                       4 x 2 = 8
/// Matrices (10): Ṽ (1x1) and Ũ (2x2) per operator; Ω^P, Ω^S, Σ (1x1) per RU.
///   real parameters: 2·1 + 2·4 + 6·1 = 16, so n = 49.
/// Constraints (56):
///   rate epigraph + minorant per rate                   8
///   per RU: budget, 2 fronthaul epigraphs, 2 majorants,
///           backhaul epigraph, backhaul majorant       7 x 2 = 14
///   backhaul budget per CP                              2
///   privacy epigraph + majorant per UE                  4
///   per RU: power budget, 2 epigraphs, 2 linear bounds  5 x 2 = 10
///   bandwidth sum                                       1
///   positivity of 4 rates and 3 bandwidths              7
///   PSD membership of the 10 matrices                  10
pub fn siso_census_matches_hand_enumeration() {
    let sp = census(BandwidthScheme::Optimized, CompressionMode::PointToPoint);
    assert_eq!(sp.scalar_count(), 33);
    assert_eq!(sp.matrix_count(), 10);
    let mut dims = matrix_dims(&sp);
    dims.sort();
    assert_eq!(dims, vec![1, 1, 1, 1, 1, 1, 1, 1, 2, 2]);
    assert_eq!(sp.n, 49);
    assert_eq!(sp.constraints.len(), 56);
    let expected = [
        (Family::RateEpigraph, 4),
        (Family::RateMinorant, 4),
        (Family::FronthaulBudget, 2),
        (Family::FronthaulEpigraph, 4),
        (Family::FronthaulMajorant, 4),
        (Family::BackhaulEpigraph, 2),
        (Family::BackhaulMajorant, 2),
        (Family::BackhaulBudget, 2),
        (Family::PrivacyEpigraph, 2),
        (Family::PrivacyMajorant, 2),
        (Family::PowerBudget, 2),
        (Family::PowerEpigraph, 4),
        (Family::PowerLinear, 4),
        (Family::Bandwidth, 1),
        (Family::SchemeEquality, 0),
        (Family::LowerBound, 7),
        (Family::MultivariateJoint, 0),
        (Family::Psd, 10),
    ];
    for (family, n) in expected {
        assert_eq!(sp.count(family), n, "{family:?}");
    }
    sp.certify().unwrap();
}

pub fn equal_split_adds_three_equalities() {
    let opt = census(BandwidthScheme::Optimized, CompressionMode::PointToPoint);
    let eq = census(BandwidthScheme::EqualSplit, CompressionMode::PointToPoint);
    assert_eq!(eq.n, opt.n);
    assert_eq!(eq.constraints.len(), opt.constraints.len() + 3);
    assert_eq!(eq.count(Family::SchemeEquality), 3);
    let equalities = |sp: &ConvexSubproblem| sp.constraints.iter().filter(|c| c.is_equality()).count();
    assert_eq!(equalities(&eq), equalities(&opt) + 3);
}

pub fn no_pooling_has_no_shared_band_variables() {
    let sp = census(BandwidthScheme::NoPooling, CompressionMode::PointToPoint);
    for v in &sp.variables {
        let shared = v.name.ends_with('S') || ["W_S", "Util", "OmegaS", "Sigma", "gamma", "beta"].iter().any(|s| v.name.contains(s));
        assert!(!shared, "shared-band variable {}", v.name);
    }
    // per operator: R_P, t_f, W_P, t_g, g̃, t_p, p̃ and Ṽ, Ω^P
    assert_eq!(sp.scalar_count(), 14);
    assert_eq!(sp.matrix_count(), 4);
}

pub fn multivariate_census_replaces_shared_noise_by_joint_covariances() {
    let sp = census(BandwidthScheme::Optimized, CompressionMode::Multivariate);
    assert_eq!(sp.scalar_count(), 33);
    let mut dims = matrix_dims(&sp);
    dims.sort();
    // Ṽ, Ω^P per RU; Ũ and Λ (2x2) per operator
    assert_eq!(dims, vec![1, 1, 1, 1, 2, 2, 2, 2]);
    assert_eq!(sp.count(Family::MultivariateJoint), 2);
    assert!(sp.variables.iter().any(|v| v.name.starts_with("Lambda")));
}

/// Every check in this module, by name.
pub const CHECKS: &[(&str, fn())] = &[
    ("scalar_phi_laws", scalar_phi_laws),
    ("matrix_phi_laws", matrix_phi_laws),
    ("rate_minorants_are_tight_and_below", rate_minorants_are_tight_and_below),
    ("compression_majorants_are_tight_and_above", compression_majorants_are_tight_and_above),
    ("zero_signal_hats", zero_signal_hats),
    ("siso_census_matches_hand_enumeration", siso_census_matches_hand_enumeration),
    ("equal_split_adds_three_equalities", equal_split_adds_three_equalities),
    ("no_pooling_has_no_shared_band_variables", no_pooling_has_no_shared_band_variables),
    ("multivariate_census_replaces_shared_noise_by_joint_covariances", multivariate_census_replaces_shared_noise_by_joint_covariances),
];
