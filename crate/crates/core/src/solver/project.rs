//! Rank projection of the lifted covariances and post-projection repair.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::linalg::{check_hermitian, eigh, CMat, C64};
use crate::metrics::{functional_values, report_from_values, ConstraintId, DesignPoint};
use crate::model::{BandwidthScheme, CompressionMode, NetworkConfig, StackedChannels, N_OPERATORS};

/// Rotates `v` so that its first non-negligible entry is real positive.
fn normalize_phase(v: &mut nalgebra::DVector<C64>) {
    let scale = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if let Some(z) = v.iter().find(|z| z.norm() > 1e-12 * scale.max(1e-300)).copied() {
        let rot = z.conj() / z.norm();
        v.iter_mut().for_each(|e| *e *= rot);
    }
}

fn lex_cmp(a: &nalgebra::DVector<C64>, b: &nalgebra::DVector<C64>) -> Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        let o = x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im));
        if o != Ordering::Equal {
            return o.reverse();
        }
    }
    Ordering::Equal
}

/// `n x d` factor `F` built from the top-`d` eigenpairs, columns scaled by
/// `sqrt(λ)`, so that `F F^H` is the best rank-`d` approximation.
///
/// Eigenvalues within `1e-10` (relative) of each other are ordered by the
/// lexicographically larger phase-normalized eigenvector first.
pub fn rank_project(m: &CMat, d: usize) -> Result<CMat> {
    check_hermitian(m, "lifted covariance")?;
    let n = m.nrows();
    if d == 0 || d > n {
        return Err(Error::Argument(format!("rank {d} must lie in 1..={n}")));
    }
    let (vals, vecs) = eigh(m);
    let lmax = vals.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let tie = 1e-10 * lmax.max(1.0);
    let mut pairs: Vec<(f64, nalgebra::DVector<C64>)> = (0..n)
        .map(|j| {
            let mut v = vecs.column(j).into_owned();
            normalize_phase(&mut v);
            (vals[j], v)
        })
        .collect();
    pairs.sort_by(|a, b| {
        if (a.0 - b.0).abs() <= tie {
            lex_cmp(&a.1, &b.1)
        } else {
            b.0.total_cmp(&a.0)
        }
    });
    let mut f = CMat::zeros(n, d);
    for (c, (lam, v)) in pairs.iter().take(d).enumerate() {
        f.set_column(c, &(v * C64::new(lam.max(0.0).sqrt(), 0.0)));
    }
    Ok(f)
}

/// Replaces every lifted covariance by its rank-`min(d, n)` approximation.
pub fn project_point(point: &DesignPoint, config: &NetworkConfig) -> Result<DesignPoint> {
    let mut out = point.clone();
    let proj = |m: &CMat, d: usize| -> Result<CMat> {
        let f = rank_project(m, d.min(m.nrows()).max(1))?;
        Ok(&f * f.adjoint())
    };
    for i in 0..N_OPERATORS {
        for k in 0..config.n_ues {
            out.vtil[i][k] = proj(&point.vtil[i][k], config.stream_dim_private[i][k])?;
            out.util[i][k] = proj(&point.util[i][k], config.stream_dim_shared[i][k])?;
        }
    }
    Ok(out)
}

/// Residual ids that do not involve the rate variables.
fn is_resource(id: &ConstraintId) -> bool {
    !matches!(id, ConstraintId::RatePrivate { .. } | ConstraintId::RateShared { .. } | ConstraintId::Bandwidth)
}

fn with_exact_rates(
    point: &DesignPoint,
    ch: &StackedChannels,
    config: &NetworkConfig,
    scheme: BandwidthScheme,
    mode: CompressionMode,
) -> Result<(DesignPoint, f64)> {
    let v = functional_values(point, ch, config, mode)?;
    let mut p = point.clone();
    for i in 0..N_OPERATORS {
        for k in 0..config.n_ues {
            p.rp[i][k] = if ch.private_link_is_zero(i, k) { 0.0 } else { p.wp[i] * v.fp[i][k] };
            p.rs[i][k] =
                if !scheme.has_shared_band() || ch.shared_link_is_zero(i, k) { 0.0 } else { p.ws * v.fs[i][k] };
        }
    }
    let report = report_from_values(&v, &p, config);
    let worst = report.residuals.iter().filter(|(id, _)| is_resource(id)).map(|(_, &r)| r).fold(f64::NEG_INFINITY, f64::max);
    Ok((p, worst))
}

/// Shrinks all precoder covariances by the largest common factor in `(0, 1]`
/// that keeps fronthaul, backhaul, privacy, power (and joint-compression)
/// residuals non-positive, then sets every rate to its exact achievable value.
pub fn repair(
    point: &DesignPoint,
    ch: &StackedChannels,
    config: &NetworkConfig,
    scheme: BandwidthScheme,
    mode: CompressionMode,
) -> Result<DesignPoint> {
    let at = |c: f64| -> Result<(DesignPoint, f64)> {
        let mut p = point.clone();
        if c != 1.0 {
            p.scale_precoders(c);
        }
        with_exact_rates(&p, ch, config, scheme, mode)
    };
    let (p1, worst) = at(1.0)?;
    if worst <= 0.0 {
        return Ok(p1);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if at(mid)?.1 <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(at(lo)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{cidentity, random_psd};
    use rand::SeedableRng;

    #[test]
    fn diag_rank_one() {
        let mut m = cidentity(2);
        m[(0, 0)] = C64::new(4.0, 0.0);
        let f = rank_project(&m, 1).unwrap();
        assert!((f[(0, 0)] - C64::new(2.0, 0.0)).norm() < 1e-12);
        assert!(f[(1, 0)].norm() < 1e-12);
    }

    #[test]
    fn rank_bounds() {
        let m = cidentity(2);
        assert!(matches!(rank_project(&m, 3), Err(Error::Argument(_))));
        assert!(matches!(rank_project(&m, 0), Err(Error::Argument(_))));
    }

    #[test]
    fn full_rank_reproduces() {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(3);
        let m = random_psd(3, &mut rng);
        let f = rank_project(&m, 3).unwrap();
        assert!(crate::linalg::max_abs(&(&f * f.adjoint() - &m)) < 1e-12);
    }
}
