//! Small dense complex linear-algebra helpers for Hermitian matrices.

use nalgebra::{DMatrix, Dyn, SymmetricEigen};
use nalgebra::Complex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;

/// Relative tolerance used when checking Hermitian symmetry of inputs.
pub const HERMITIAN_TOL: f64 = 1e-8;

pub fn czeros(rows: usize, cols: usize) -> CMat {
    CMat::zeros(rows, cols)
}

pub fn cidentity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn to_complex(m: &DMatrix<f64>) -> CMat {
    m.map(|x| C64::new(x, 0.0))
}

/// `l * x * l^H`
pub fn congruence(l: &CMat, x: &CMat) -> CMat {
    l * x * l.adjoint()
}

pub fn trace_re(a: &CMat) -> f64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)].re).sum()
}

/// `Re tr(a * b)` without forming the product.
pub fn trace_prod_re(a: &CMat, b: &CMat) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            let p = a[(i, k)] * b[(k, i)];
            acc += p.re;
        }
    }
    acc
}

pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn check_square(a: &CMat, what: &str) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension(format!(
            "{what} must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

/// Errors if `a` is not Hermitian within [`HERMITIAN_TOL`] relative to its largest entry.
pub fn check_hermitian(a: &CMat, what: &str) -> Result<()> {
    check_square(a, what)?;
    let scale = max_abs(a).max(1.0);
    let asym = max_abs(&(a - a.adjoint()));
    if asym > HERMITIAN_TOL * scale {
        return Err(Error::Argument(format!(
            "{what} is not Hermitian (asymmetry {asym:.3e})"
        )));
    }
    Ok(())
}

/// Lower Cholesky factor of a Hermitian matrix (lower triangle is read),
/// `None` unless every pivot is strictly positive.
pub fn cholesky_hpd(a: &CMat) -> Option<CMat> {
    let n = a.nrows();
    let mut l = CMat::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = C64::new(djj, 0.0);
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / djj;
        }
    }
    Some(l)
}

/// `ln det(L L^H)` from a Cholesky factor.
pub fn ln_det_from_cholesky(l: &CMat) -> f64 {
    2.0 * (0..l.nrows()).map(|i| l[(i, i)].re.ln()).sum::<f64>()
}

/// `(L L^H)⁻¹` from a Cholesky factor.
pub fn inv_from_cholesky(l: &CMat) -> CMat {
    let n = l.nrows();
    let linv = l.solve_lower_triangular(&cidentity(n)).expect("nonzero pivots");
    let inv = linv.adjoint() * linv;
    hermitian_part(&inv)
}

/// Natural log-determinant of a Hermitian positive-definite matrix, `None` if not PD.
pub fn ln_det_hpd(a: &CMat) -> Option<f64> {
    let l = cholesky_hpd(a)?;
    let v = ln_det_from_cholesky(&l);
    v.is_finite().then_some(v)
}

pub fn log2_det_hpd(a: &CMat) -> Option<f64> {
    ln_det_hpd(a).map(|v| v / std::f64::consts::LN_2)
}

/// Inverse of a Hermitian positive-definite matrix, `None` if not PD.
pub fn inv_hpd(a: &CMat) -> Option<CMat> {
    cholesky_hpd(a).map(|l| inv_from_cholesky(&l))
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues in ascending order.
pub fn eigh(a: &CMat) -> (Vec<f64>, CMat) {
    let eig = SymmetricEigen::<C64, Dyn>::new(hermitian_part(a));
    let n = a.nrows();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let vals = idx.iter().map(|&j| eig.eigenvalues[j]).collect();
    let mut vecs = CMat::zeros(n, n);
    for (c, &j) in idx.iter().enumerate() {
        vecs.set_column(c, &eig.eigenvectors.column(j));
    }
    (vals, vecs)
}

pub fn min_eigenvalue(a: &CMat) -> f64 {
    if a.nrows() == 0 {
        return f64::INFINITY;
    }
    eigh(a).0[0]
}

/// Matrix with i.i.d. CN(0, 1) entries.
pub fn complex_gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    // column-major fill, real part then imaginary part per entry
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(s * re, s * im)
    })
}

/// Random Hermitian PSD matrix `A A^H` with unit trace.
pub fn random_psd<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    let a = complex_gaussian(n, n, rng);
    let m = &a * a.adjoint();
    let tr = trace_re(&m);
    if tr > 0.0 {
        m.unscale(tr)
    } else {
        cidentity(n).unscale(n as f64)
    }
}

/// Block-diagonal matrix from square blocks.
pub fn block_diag(blocks: &[&CMat]) -> CMat {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMat::zeros(n, n);
    let mut off = 0;
    for b in blocks {
        out.view_mut((off, off), (b.nrows(), b.ncols())).copy_from(b);
        off += b.nrows();
    }
    out
}

/// Horizontal concatenation of blocks with equal row count.
pub fn hcat(blocks: &[&CMat]) -> CMat {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMat::zeros(rows, cols);
    let mut off = 0;
    for b in blocks {
        out.view_mut((0, off), (rows, b.ncols())).copy_from(b);
        off += b.ncols();
    }
    out
}

/// Number of real parameters of an `n x n` Hermitian matrix.
pub fn herm_params(n: usize) -> usize {
    n * n
}

/// Real coordinates of a Hermitian matrix: diagonal first, then `(Re, Im)` of
/// each strictly upper entry in row-major order.
pub fn herm_to_params(x: &CMat) -> Vec<f64> {
    let n = x.nrows();
    let mut out = Vec::with_capacity(n * n);
    for p in 0..n {
        out.push(x[(p, p)].re);
    }
    for p in 0..n {
        for q in (p + 1)..n {
            let z = 0.5 * (x[(p, q)] + x[(q, p)].conj());
            out.push(z.re);
            out.push(z.im);
        }
    }
    out
}

pub fn herm_from_params(n: usize, v: &[f64]) -> CMat {
    let mut x = CMat::zeros(n, n);
    for p in 0..n {
        x[(p, p)] = C64::new(v[p], 0.0);
    }
    let mut t = n;
    for p in 0..n {
        for q in (p + 1)..n {
            let z = C64::new(v[t], v[t + 1]);
            x[(p, q)] = z;
            x[(q, p)] = z.conj();
            t += 2;
        }
    }
    x
}

/// Basis matrix for coordinate `t` of [`herm_to_params`].
pub fn herm_basis(n: usize, t: usize) -> CMat {
    let mut v = vec![0.0; n * n];
    v[t] = 1.0;
    herm_from_params(n, &v)
}
