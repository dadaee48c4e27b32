//! Strictly feasible starting points.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::dcp::ExpansionPoint;
use crate::error::{Error, Result};
use crate::linalg::{cidentity, random_psd};
use crate::metrics::{functional_values, report_from_values, ConstraintId, DesignPoint};
use crate::model::{BandwidthScheme, CompressionMode, NetworkConfig, StackedChannels, N_OPERATORS};

/// Fraction of the per-Hz power budget given to each initial quantization covariance.
const INIT_QUANT_FRACTION: f64 = 0.05;

fn resource_worst(point: &DesignPoint, ch: &StackedChannels, config: &NetworkConfig, mode: CompressionMode) -> Result<(ConstraintId, f64)> {
    let v = functional_values(point, ch, config, mode)?;
    let report = report_from_values(&v, point, config);
    Ok(report
        .residuals
        .iter()
        .filter(|(id, _)| !matches!(id, ConstraintId::RatePrivate { .. } | ConstraintId::RateShared { .. } | ConstraintId::Bandwidth))
        .fold((ConstraintId::Bandwidth, f64::NEG_INFINITY), |acc, (&id, &r)| if r > acc.1 { (id, r) } else { acc }))
}

/// Largest `c` such that scaling all precoder covariances of `point` by `c`
/// keeps every resource constraint strictly satisfied (to bisection accuracy).
/// Returns `+∞` when the precoders are all zero.
pub fn max_feasible_scale(point: &DesignPoint, ch: &StackedChannels, config: &NetworkConfig, mode: CompressionMode) -> Result<f64> {
    let scaled = |c: f64| {
        let mut p = point.clone();
        p.scale_precoders(c);
        p
    };
    let ok = |c: f64| -> Result<bool> { Ok(resource_worst(&scaled(c), ch, config, mode)?.1 < 0.0) };
    let all_zero = (0..N_OPERATORS).all(|i| point.vtil[i].iter().chain(&point.util[i]).all(|m| m.iter().all(|z| z.norm() == 0.0)));
    if all_zero {
        return Ok(f64::INFINITY);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    // bracket
    if ok(hi)? {
        lo = hi;
        while ok(hi)? {
            lo = hi;
            hi *= 2.0;
            if hi > 1e30 {
                return Ok(f64::INFINITY);
            }
        }
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if ok(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Ok(lo)
}

/// Strictly feasible starting point in scaled units: the scheme's bandwidth
/// split, `Ω = Σ = δ I` with `δ` a small fraction of the per-Hz power, random
/// unit-trace precoder covariances scaled to half the largest feasible scale,
/// and rates at 90% of their achievable values.
pub fn initialize_feasible(
    ch: &StackedChannels,
    config: &NetworkConfig,
    mode: CompressionMode,
    scheme: BandwidthScheme,
    seed: u64,
) -> Result<ExpansionPoint> {
    config.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let w = config.total_bandwidth;
    let mut p = DesignPoint::zeros(config, 0.0, mode);
    match scheme {
        BandwidthScheme::NoPooling => {
            p.wp = [w / 2.0; 2];
            p.ws = 0.0;
        }
        _ => {
            p.wp = [w / 3.0; 2];
            p.ws = w / 3.0;
        }
    }
    for i in 0..N_OPERATORS {
        for r in 0..config.n_rus {
            let delta = INIT_QUANT_FRACTION * config.max_power[i][r] / w;
            let q = cidentity(config.n_ant_ru[i][r]).scale(delta);
            p.omega_p[i][r] = q.clone();
            p.omega_s[i][r] = q.clone();
            p.sigma[i][r] = q;
        }
    }
    for i in 0..N_OPERATORS {
        for k in 0..config.n_ues {
            // draw unconditionally so the stream does not depend on the channel values
            let v = random_psd(config.n_ru_total(i), &mut rng);
            let u = random_psd(config.n_stacked(i), &mut rng);
            if !ch.private_link_is_zero(i, k) {
                p.vtil[i][k] = v;
            }
            if scheme.has_shared_band() && !ch.shared_link_is_zero(i, k) {
                p.util[i][k] = u;
            }
        }
    }
    let c = max_feasible_scale(&p, ch, config, mode)?;
    if c.is_finite() {
        if !(c > 0.0) {
            let (id, _) = resource_worst(&p, ch, config, mode)?;
            return Err(Error::Initialization(id.to_string()));
        }
        p.scale_precoders(0.5 * c);
    } else {
        // all-zero precoders: the quantization floor alone must fit
        let (id, r) = resource_worst(&p, ch, config, mode)?;
        if !(r < 0.0) {
            return Err(Error::Initialization(id.to_string()));
        }
    }
    let v = functional_values(&p, ch, config, mode)?;
    for i in 0..N_OPERATORS {
        for k in 0..config.n_ues {
            if !ch.private_link_is_zero(i, k) {
                p.rp[i][k] = 0.9 * p.wp[i] * v.fp[i][k];
            }
            if scheme.has_shared_band() && !ch.shared_link_is_zero(i, k) {
                p.rs[i][k] = 0.9 * p.ws * v.fs[i][k];
            }
        }
    }
    ExpansionPoint::from_point(&p, ch, config, scheme, mode)
}
