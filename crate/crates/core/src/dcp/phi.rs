use crate::error::{Error, Result};
use crate::linalg::{check_hermitian, inv_hpd, ln_det_hpd, trace_prod_re, CMat};

/// `ln x0 + (x − x0) / x0`, the tangent of `ln` at `x0`; an upper bound of `ln x`.
pub fn scalar_phi(x: f64, x0: f64) -> Result<f64> {
    if !(x0 > 0.0) || !x0.is_finite() {
        return Err(Error::Domain(format!("scalar_phi expansion point must be positive, got {x0}")));
    }
    Ok(x0.ln() + (x - x0) / x0)
}

/// `ln det A0 + tr(A0⁻¹ (A − A0))`; an upper bound of `ln det A`, tight at `A = A0`.
pub fn matrix_phi(a: &CMat, a0: &CMat) -> Result<f64> {
    check_hermitian(a, "A")?;
    check_hermitian(a0, "A0")?;
    if a.shape() != a0.shape() {
        return Err(Error::Dimension(format!("matrix_phi operands {:?} vs {:?}", a.shape(), a0.shape())));
    }
    let not_pd = || Error::Domain("matrix_phi expansion point is not positive definite".into());
    let ld = ln_det_hpd(a0).ok_or_else(not_pd)?;
    let inv = inv_hpd(a0).ok_or_else(not_pd)?;
    Ok(ld + trace_prod_re(&inv, &(a - a0)))
}
