//! Hat-functions: concave minorants of the rates and convex majorants of the
//! compression, leakage and joint-compression rates, all in bit/s/Hz.

use std::f64::consts::LN_2;

use super::phi::matrix_phi;
use crate::error::{Error, Result};
use crate::linalg::{ln_det_hpd, CMat};
use crate::metrics::{exprs, Band, DesignPoint, PhiExpr};
use crate::model::{CompressionMode, NetworkConfig, StackedChannels};

fn ln_det(m: &CMat, what: &str) -> Result<f64> {
    ln_det_hpd(m).ok_or_else(|| Error::Domain(format!("{what} is not positive definite")))
}

/// `log2 det(S + N) − φ(N, N') / ln 2`.
fn minorant(e: &PhiExpr, point: &DesignPoint, expansion: &DesignPoint) -> Result<f64> {
    let n = e.noise.eval(point);
    let total = e.signal.eval(point) + &n;
    Ok((ln_det(&total, "signal plus interference")? - matrix_phi(&n, &e.noise.eval(expansion))?) / LN_2)
}

/// `φ(S + N, S' + N') / ln 2 − log2 det N`.
fn majorant(e: &PhiExpr, point: &DesignPoint, expansion: &DesignPoint) -> Result<f64> {
    let n = e.noise.eval(point);
    let total = e.signal.eval(point) + &n;
    let total0 = e.signal.eval(expansion) + e.noise.eval(expansion);
    Ok((matrix_phi(&total, &total0)? - ln_det(&n, "quantization covariance")?) / LN_2)
}

/// `f̂_{i,k,P}`.
pub fn hat_rate_private(i: usize, k: usize, point: &DesignPoint, expansion: &DesignPoint, ch: &StackedChannels) -> Result<f64> {
    minorant(&exprs::rate_private(i, k, ch)?, point, expansion)
}

/// `f̂_{i,k,S}`.
pub fn hat_rate_shared(
    i: usize,
    k: usize,
    point: &DesignPoint,
    expansion: &DesignPoint,
    ch: &StackedChannels,
    mode: CompressionMode,
) -> Result<f64> {
    minorant(&exprs::rate_shared(i, k, ch, mode)?, point, expansion)
}

/// `ĝ_{i,r}^{(m)}`.
pub fn hat_fronthaul(
    i: usize,
    r: usize,
    band: Band,
    point: &DesignPoint,
    expansion: &DesignPoint,
    config: &NetworkConfig,
) -> Result<f64> {
    majorant(&exprs::fronthaul(i, r, band, config)?, point, expansion)
}

/// `γ̂_{i,r}^{(S)}`.
pub fn hat_backhaul(i: usize, r: usize, point: &DesignPoint, expansion: &DesignPoint, config: &NetworkConfig) -> Result<f64> {
    majorant(&exprs::backhaul(i, r, config)?, point, expansion)
}

/// `β̂_{i,k,S}`, with the full signal-plus-noise covariance linearized.
pub fn hat_privacy(i: usize, k: usize, point: &DesignPoint, expansion: &DesignPoint, config: &NetworkConfig) -> Result<f64> {
    majorant(&exprs::privacy(i, k, config)?, point, expansion)
}

/// Majorant of the joint compression rate of CP `i`: both leading log-dets
/// linearized, `−log2 det Λ_i` kept exact.
pub fn hat_joint(i: usize, point: &DesignPoint, expansion: &DesignPoint, config: &NetworkConfig) -> Result<f64> {
    let (x, y, lam) = exprs::joint(i, config)?;
    let lin = matrix_phi(&x.eval(point), &x.eval(expansion))? + matrix_phi(&y.eval(point), &y.eval(expansion))?;
    Ok((lin - ln_det(&lam.eval(point), "Lambda")?) / LN_2)
}
