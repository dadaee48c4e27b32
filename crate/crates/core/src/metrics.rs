//! Exact covariance-domain evaluation of rates, compression rates, privacy
//! leakage, transmit power and the constraint report.
//!
//! Every matrix argument of a log-determinant is described once, symbolically,
//! as a [`MatExpr`]: a sum of congruences `c · L Q L^H` of design quantities
//! `Q` plus a multiple of the identity. The same descriptions are evaluated
//! numerically here and compiled into optimization variables by the `dcp`
//! module, so the two can never disagree about a formula.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{
    block_diag, check_hermitian, cidentity, congruence, ln_det_hpd, max_abs, to_complex, trace_re,
    CMat,
};
use crate::model::{
    other, selection_matrix, CompressionMode, NetworkConfig, SelectionKind, StackedChannels,
    N_OPERATORS,
};

/// Relative tolerance of the bandwidth-sum equality in [`evaluate_constraints`].
pub const BANDWIDTH_TOL: f64 = 1e-9;

/// Lifted design variables of one operating point.
///
/// Bandwidths and rates use whatever units the accompanying config uses; the
/// matrices are per-Hz quantities and unit-independent.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignPoint {
    /// `Ṽ_{i,k}`, `n_{R,i} x n_{R,i}`.
    pub vtil: [Vec<CMat>; 2],
    /// `Ũ_{i,k}`, stacked own-then-other RUs.
    pub util: [Vec<CMat>; 2],
    pub omega_p: [Vec<CMat>; 2],
    pub omega_s: [Vec<CMat>; 2],
    /// `Σ_{i,r}`: backhaul quantization noise on signals for RU `(i, r)`, added by CP `ī`.
    pub sigma: [Vec<CMat>; 2],
    /// `Θ_i`: correlation between `q_{i,1}` and `e_{ī,1}` (multivariate mode only).
    pub theta: Option<[CMat; 2]>,
    pub wp: [f64; 2],
    pub ws: f64,
    pub rp: [Vec<f64>; 2],
    pub rs: [Vec<f64>; 2],
}

/// Private or shared subband.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Band {
    Private,
    Shared,
}

impl DesignPoint {
    /// All-zero precoders, quantization covariances `floor · I`, zero rates.
    pub fn zeros(config: &NetworkConfig, floor: f64, mode: CompressionMode) -> Self {
        let vtil = [0, 1].map(|i| vec![CMat::zeros(config.n_ru_total(i), config.n_ru_total(i)); config.n_ues]);
        let util = [0, 1].map(|i| vec![CMat::zeros(config.n_stacked(i), config.n_stacked(i)); config.n_ues]);
        let per_ru = |i: usize| -> Vec<CMat> {
            config.n_ant_ru[i].iter().map(|&n| cidentity(n).scale(floor)).collect()
        };
        let theta = (mode == CompressionMode::Multivariate).then(|| {
            [0, 1].map(|i| CMat::zeros(config.n_ant_ru[i][0], config.n_ant_ru[other(i)][0]))
        });
        Self {
            vtil,
            util,
            omega_p: [per_ru(0), per_ru(1)],
            omega_s: [per_ru(0), per_ru(1)],
            sigma: [per_ru(0), per_ru(1)],
            theta,
            wp: [0.0; 2],
            ws: 0.0,
            rp: [vec![0.0; config.n_ues], vec![0.0; config.n_ues]],
            rs: [vec![0.0; config.n_ues], vec![0.0; config.n_ues]],
        }
    }

    /// Errors unless every block has the dimension dictated by `config`.
    pub fn check_dims(&self, config: &NetworkConfig) -> Result<()> {
        let dim = |m: &CMat, n: usize, what: String| {
            if m.shape() != (n, n) {
                Err(Error::Dimension(format!("{what} is {:?}, expected {n}x{n}", m.shape())))
            } else {
                Ok(())
            }
        };
        for i in 0..N_OPERATORS {
            if self.vtil[i].len() != config.n_ues
                || self.util[i].len() != config.n_ues
                || self.rp[i].len() != config.n_ues
                || self.rs[i].len() != config.n_ues
            {
                return Err(Error::Dimension(format!("per-UE lists of operator {i}")));
            }
            for k in 0..config.n_ues {
                dim(&self.vtil[i][k], config.n_ru_total(i), format!("Vtil[{i}][{k}]"))?;
                dim(&self.util[i][k], config.n_stacked(i), format!("Util[{i}][{k}]"))?;
            }
            for (name, list) in [("OmegaP", &self.omega_p), ("OmegaS", &self.omega_s), ("Sigma", &self.sigma)] {
                if list[i].len() != config.n_rus {
                    return Err(Error::Dimension(format!("{name} list of operator {i}")));
                }
                for r in 0..config.n_rus {
                    dim(&list[i][r], config.n_ant_ru[i][r], format!("{name}[{i}][{r}]"))?;
                }
            }
            if let Some(theta) = &self.theta {
                let want = (config.n_ant_ru[i][0], config.n_ant_ru[other(i)][0]);
                if theta[i].shape() != want {
                    return Err(Error::Dimension(format!("Theta[{i}] is {:?}, expected {want:?}", theta[i].shape())));
                }
            }
        }
        Ok(())
    }

    /// `Λ_i = [[Ω^S_{i,1}, Θ_i], [Θ_i^H, Σ_{ī,1}]]`; `Θ_i = 0` when absent.
    pub fn lambda(&self, i: usize) -> CMat {
        let ib = other(i);
        let mut lam = block_diag(&[&self.omega_s[i][0], &self.sigma[ib][0]]);
        if let Some(theta) = &self.theta {
            let (a, b) = theta[i].shape();
            lam.view_mut((0, a), (a, b)).copy_from(&theta[i]);
            lam.view_mut((a, 0), (b, a)).copy_from(&theta[i].adjoint());
        }
        lam
    }

    pub fn quantity(&self, q: Quantity) -> std::borrow::Cow<'_, CMat> {
        use std::borrow::Cow;
        match q {
            Quantity::Vtil(i, k) => Cow::Borrowed(&self.vtil[i][k]),
            Quantity::Util(i, k) => Cow::Borrowed(&self.util[i][k]),
            Quantity::OmegaP(i, r) => Cow::Borrowed(&self.omega_p[i][r]),
            Quantity::OmegaS(i, r) => Cow::Borrowed(&self.omega_s[i][r]),
            Quantity::Sigma(i, r) => Cow::Borrowed(&self.sigma[i][r]),
            Quantity::Lambda(i) => Cow::Owned(self.lambda(i)),
        }
    }

    /// `Σ_{i,k,m} R_{i,k,m}`.
    pub fn sum_rate(&self) -> f64 {
        (0..N_OPERATORS).map(|i| self.rp[i].iter().chain(&self.rs[i]).sum::<f64>()).sum()
    }

    /// Copy with bandwidths and rates multiplied by `factor` (unit change).
    pub fn rescaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.wp = self.wp.map(|w| w * factor);
        out.ws *= factor;
        for i in 0..N_OPERATORS {
            out.rp[i].iter_mut().chain(out.rs[i].iter_mut()).for_each(|r| *r *= factor);
        }
        out
    }

    /// Multiplies every lifted precoder covariance by `c`.
    pub fn scale_precoders(&mut self, c: f64) {
        for i in 0..N_OPERATORS {
            self.vtil[i].iter_mut().chain(self.util[i].iter_mut()).for_each(|m| *m = m.scale(c));
        }
    }
}

/// A design quantity appearing inside a functional.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Quantity {
    Vtil(usize, usize),
    Util(usize, usize),
    OmegaP(usize, usize),
    OmegaS(usize, usize),
    Sigma(usize, usize),
    Lambda(usize),
}

/// `coef · L Q L^H`.
#[derive(Clone, Debug)]
pub struct Term {
    pub coef: f64,
    pub left: CMat,
    pub q: Quantity,
}

/// `identity · I + Σ terms`, a Hermitian matrix affine in the design quantities.
#[derive(Clone, Debug)]
pub struct MatExpr {
    pub dim: usize,
    pub identity: f64,
    pub terms: Vec<Term>,
}

impl MatExpr {
    pub fn new(dim: usize, identity: f64) -> Self {
        Self { dim, identity, terms: Vec::new() }
    }

    pub fn push(&mut self, left: CMat, q: Quantity) {
        debug_assert_eq!(left.nrows(), self.dim);
        self.terms.push(Term { coef: 1.0, left, q });
    }

    pub fn plus(&self, other: &MatExpr) -> MatExpr {
        let mut out = self.clone();
        out.identity += other.identity;
        out.terms.extend(other.terms.iter().cloned());
        out
    }

    pub fn eval(&self, point: &DesignPoint) -> CMat {
        let mut m = cidentity(self.dim).scale(self.identity);
        for t in &self.terms {
            m += congruence(&t.left, &point.quantity(t.q)).scale(t.coef);
        }
        m
    }

    /// `tr` of the expression, linear in the quantities.
    pub fn trace(&self, point: &DesignPoint) -> f64 {
        trace_re(&self.eval(point))
    }
}

/// Numerator and denominator of a `Φ(A, B)` functional.
#[derive(Clone, Debug)]
pub struct PhiExpr {
    pub signal: MatExpr,
    pub noise: MatExpr,
}

impl PhiExpr {
    pub fn eval(&self, point: &DesignPoint) -> Result<f64> {
        phi_logdet(&self.signal.eval(point), &self.noise.eval(point))
    }
}

fn sel(kind: SelectionKind, i: usize, r: usize, config: &NetworkConfig) -> CMat {
    to_complex(&selection_matrix(kind, i, r, config).expect("indices validated by caller")).adjoint()
}

fn check_ue(config: &NetworkConfig, i: usize, k: usize) -> Result<()> {
    if i >= N_OPERATORS || k >= config.n_ues {
        return Err(Error::Argument(format!("UE index ({i}, {k}) out of range")));
    }
    Ok(())
}

fn check_ru(config: &NetworkConfig, i: usize, r: usize) -> Result<()> {
    if i >= N_OPERATORS || r >= config.n_rus {
        return Err(Error::Argument(format!("RU index ({i}, {r}) out of range")));
    }
    Ok(())
}

fn check_multivariate(config: &NetworkConfig) -> Result<()> {
    if config.n_rus != 1 {
        return Err(Error::UnsupportedMode(format!(
            "multivariate compression requires a single RU per operator, got {}",
            config.n_rus
        )));
    }
    Ok(())
}

/// Symbolic forms of every functional.
pub mod exprs {
    use super::*;

    /// `f_{i,k,P}`.
    pub fn rate_private(i: usize, k: usize, ch: &StackedChannels) -> Result<PhiExpr> {
        let config = &ch.config;
        check_ue(config, i, k)?;
        let n = config.n_ant_ue[i][k];
        let h = ch.h_op(i, k, i);
        let mut signal = MatExpr::new(n, 0.0);
        signal.push(h.clone(), Quantity::Vtil(i, k));
        let mut noise = MatExpr::new(n, 1.0);
        for l in (0..config.n_ues).filter(|&l| l != k) {
            noise.push(h.clone(), Quantity::Vtil(i, l));
        }
        for r in 0..config.n_rus {
            noise.push(ch.h_block(i, k, i, r).clone(), Quantity::OmegaP(i, r));
        }
        Ok(PhiExpr { signal, noise })
    }

    /// Quantization-noise part of the shared-band interference at UE `(i, k)`.
    pub fn shared_quantization(i: usize, k: usize, ch: &StackedChannels, mode: CompressionMode) -> Result<MatExpr> {
        let config = &ch.config;
        let mut q = MatExpr::new(config.n_ant_ue[i][k], 0.0);
        match mode {
            CompressionMode::PointToPoint => {
                for j in [i, other(i)] {
                    for r in 0..config.n_rus {
                        let h = ch.h_block(i, k, j, r);
                        q.push(h.clone(), Quantity::OmegaS(j, r));
                        q.push(h.clone(), Quantity::Sigma(j, r));
                    }
                }
            }
            CompressionMode::Multivariate => {
                check_multivariate(config)?;
                for j in [i, other(i)] {
                    q.push(ch.g(i, k, j).clone(), Quantity::Lambda(j));
                }
            }
        }
        Ok(q)
    }

    /// `f_{i,k,S}`.
    pub fn rate_shared(i: usize, k: usize, ch: &StackedChannels, mode: CompressionMode) -> Result<PhiExpr> {
        let config = &ch.config;
        check_ue(config, i, k)?;
        let n = config.n_ant_ue[i][k];
        let g_own = ch.g(i, k, i);
        let g_oth = ch.g(i, k, other(i));
        let mut signal = MatExpr::new(n, 0.0);
        signal.push(g_own.clone(), Quantity::Util(i, k));
        let mut noise = MatExpr::new(n, 1.0);
        for l in (0..config.n_ues).filter(|&l| l != k) {
            noise.push(g_own.clone(), Quantity::Util(i, l));
        }
        for l in 0..config.n_ues {
            noise.push(g_oth.clone(), Quantity::Util(other(i), l));
        }
        let noise = noise.plus(&shared_quantization(i, k, ch, mode)?);
        Ok(PhiExpr { signal, noise })
    }

    /// `g_{i,r}^{(m)}`.
    pub fn fronthaul(i: usize, r: usize, band: Band, config: &NetworkConfig) -> Result<PhiExpr> {
        check_ru(config, i, r)?;
        let n = config.n_ant_ru[i][r];
        let mut signal = MatExpr::new(n, 0.0);
        let mut noise = MatExpr::new(n, 0.0);
        match band {
            Band::Private => {
                let e = sel(SelectionKind::RuBlock, i, r, config);
                for k in 0..config.n_ues {
                    signal.push(e.clone(), Quantity::Vtil(i, k));
                }
                noise.push(cidentity(n), Quantity::OmegaP(i, r));
            }
            Band::Shared => {
                let e = sel(SelectionKind::OwnInStacked, i, r, config);
                for k in 0..config.n_ues {
                    signal.push(e.clone(), Quantity::Util(i, k));
                }
                noise.push(cidentity(n), Quantity::OmegaS(i, r));
            }
        }
        Ok(PhiExpr { signal, noise })
    }

    /// `γ_{i,r}^{(S)}`: signals for RU `(i, r)` quantized by CP `ī`.
    pub fn backhaul(i: usize, r: usize, config: &NetworkConfig) -> Result<PhiExpr> {
        check_ru(config, i, r)?;
        let ib = other(i);
        let n = config.n_ant_ru[i][r];
        let e = sel(SelectionKind::OtherInStacked, ib, r, config);
        let mut signal = MatExpr::new(n, 0.0);
        for k in 0..config.n_ues {
            signal.push(e.clone(), Quantity::Util(ib, k));
        }
        let mut noise = MatExpr::new(n, 0.0);
        noise.push(cidentity(n), Quantity::Sigma(i, r));
        Ok(PhiExpr { signal, noise })
    }

    /// `β_{i,k,S}`: leakage of UE `(i, k)`'s shared stream to CP `ī`.
    pub fn privacy(i: usize, k: usize, config: &NetworkConfig) -> Result<PhiExpr> {
        check_ue(config, i, k)?;
        let ib = other(i);
        let n = config.n_ru_total(ib);
        let e = sel(SelectionKind::OtherOperator, i, 0, config);
        let mut signal = MatExpr::new(n, 0.0);
        signal.push(e.clone(), Quantity::Util(i, k));
        let mut noise = MatExpr::new(n, 0.0);
        for l in (0..config.n_ues).filter(|&l| l != k) {
            noise.push(e.clone(), Quantity::Util(i, l));
        }
        for r in 0..config.n_rus {
            // E_{ī,r} embeds the per-RU block into Σ_ī
            let emb = sel(SelectionKind::RuBlock, ib, r, config).adjoint();
            noise.push(emb, Quantity::Sigma(ib, r));
        }
        Ok(PhiExpr { signal, noise })
    }

    /// Per-Hz transmit power of RU `(i, r)` on a band, as a trace of a [`MatExpr`].
    pub fn power(i: usize, r: usize, band: Band, config: &NetworkConfig) -> Result<MatExpr> {
        check_ru(config, i, r)?;
        let n = config.n_ant_ru[i][r];
        let mut m = MatExpr::new(n, 0.0);
        match band {
            Band::Private => {
                let e = sel(SelectionKind::RuBlock, i, r, config);
                for k in 0..config.n_ues {
                    m.push(e.clone(), Quantity::Vtil(i, k));
                }
                m.push(cidentity(n), Quantity::OmegaP(i, r));
            }
            Band::Shared => {
                let own = sel(SelectionKind::OwnInStacked, i, r, config);
                let fwd = sel(SelectionKind::OtherInStacked, other(i), r, config);
                for k in 0..config.n_ues {
                    m.push(own.clone(), Quantity::Util(i, k));
                    m.push(fwd.clone(), Quantity::Util(other(i), k));
                }
                m.push(cidentity(n), Quantity::OmegaS(i, r));
                m.push(cidentity(n), Quantity::Sigma(i, r));
            }
        }
        Ok(m)
    }

    /// `(X + Ω_{i,1}, Y + Σ_{ī,1}, Λ_i)` of the joint compression rate of CP `i`.
    pub fn joint(i: usize, config: &NetworkConfig) -> Result<(MatExpr, MatExpr, MatExpr)> {
        check_multivariate(config)?;
        if i >= N_OPERATORS {
            return Err(Error::Argument(format!("operator index {i} out of range")));
        }
        let ib = other(i);
        let x = fronthaul(i, 0, Band::Shared, config)?;
        let y = backhaul(ib, 0, config)?;
        let n = config.n_ant_ru[i][0] + config.n_ant_ru[ib][0];
        let mut lam = MatExpr::new(n, 0.0);
        lam.push(cidentity(n), Quantity::Lambda(i));
        Ok((x.signal.plus(&x.noise), y.signal.plus(&y.noise), lam))
    }
}

/// `Φ(A, B) = log2 det(A + B) − log2 det(B)`.
pub fn phi_logdet(a: &CMat, b: &CMat) -> Result<f64> {
    check_hermitian(a, "A")?;
    check_hermitian(b, "B")?;
    if a.shape() != b.shape() {
        return Err(Error::Dimension(format!("Phi operands {:?} vs {:?}", a.shape(), b.shape())));
    }
    let lb = ln_det_hpd(b).ok_or_else(|| Error::Domain("Phi denominator is not positive definite".into()))?;
    let lab = ln_det_hpd(&(a + b)).ok_or_else(|| Error::Domain("A + B is not positive definite".into()))?;
    Ok((lab - lb) / std::f64::consts::LN_2)
}

/// `f_{i,k,P}` in bit/s/Hz.
pub fn rate_private(i: usize, k: usize, point: &DesignPoint, ch: &StackedChannels) -> Result<f64> {
    exprs::rate_private(i, k, ch)?.eval(point)
}

/// `f_{i,k,S}` in bit/s/Hz.
pub fn rate_shared(i: usize, k: usize, point: &DesignPoint, ch: &StackedChannels, mode: CompressionMode) -> Result<f64> {
    exprs::rate_shared(i, k, ch, mode)?.eval(point)
}

/// `g_{i,r}^{(m)}` in bit/s/Hz.
pub fn fronthaul_rate(i: usize, r: usize, band: Band, point: &DesignPoint, config: &NetworkConfig) -> Result<f64> {
    exprs::fronthaul(i, r, band, config)?.eval(point)
}

/// `γ_{i,r}^{(S)}` in bit/s/Hz, for the signals CP `ī` forwards to RU `(i, r)`.
pub fn backhaul_rate(i: usize, r: usize, point: &DesignPoint, config: &NetworkConfig) -> Result<f64> {
    exprs::backhaul(i, r, config)?.eval(point)
}

/// `β_{i,k,S}` in bit/s/Hz.
pub fn privacy_leakage(i: usize, k: usize, point: &DesignPoint, config: &NetworkConfig) -> Result<f64> {
    exprs::privacy(i, k, config)?.eval(point)
}

/// `p_{i,r}^{(i)}` or `p_{i,r}^{(S)}`.
pub fn power_per_hz(i: usize, r: usize, band: Band, point: &DesignPoint, config: &NetworkConfig) -> Result<f64> {
    Ok(exprs::power(i, r, band, config)?.trace(point))
}

/// `log2 det(X + Ω) + log2 det(Y + Σ) − log2 det(Λ_i)`.
pub fn multivariate_joint_rate(i: usize, point: &DesignPoint, config: &NetworkConfig) -> Result<f64> {
    if point.theta.is_none() {
        return Err(Error::UnsupportedMode("joint rate needs a multivariate design point".into()));
    }
    let (x, y, lam) = exprs::joint(i, config)?;
    let ld = |m: &CMat, what: &str| {
        check_hermitian(m, what)?;
        ln_det_hpd(m).ok_or_else(|| Error::Domain(format!("{what} is not positive definite")))
    };
    let v = ld(&x.eval(point), "X + Omega")? + ld(&y.eval(point), "Y + Sigma")? - ld(&lam.eval(point), "Lambda")?;
    Ok(v / std::f64::consts::LN_2)
}

/// Identifier of one residual in a [`ConstraintReport`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConstraintId {
    RatePrivate { i: usize, k: usize },
    RateShared { i: usize, k: usize },
    Fronthaul { i: usize, r: usize },
    Backhaul { i: usize },
    Privacy { i: usize, k: usize },
    Power { i: usize, r: usize },
    Bandwidth,
    /// Allocation of the two joint-compression budgets (both CPs, single RU).
    MultivariateJoint,
}

impl fmt::Display for ConstraintId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintId::RatePrivate { i, k } => write!(f, "rate_private[{i}][{k}]"),
            ConstraintId::RateShared { i, k } => write!(f, "rate_shared[{i}][{k}]"),
            ConstraintId::Fronthaul { i, r } => write!(f, "fronthaul[{i}][{r}]"),
            ConstraintId::Backhaul { i } => write!(f, "backhaul[{i}]"),
            ConstraintId::Privacy { i, k } => write!(f, "privacy[{i}][{k}]"),
            ConstraintId::Power { i, r } => write!(f, "power[{i}][{r}]"),
            ConstraintId::Bandwidth => write!(f, "bandwidth"),
            ConstraintId::MultivariateJoint => write!(f, "multivariate_joint"),
        }
    }
}

/// Constraint residuals; a point is feasible iff every residual is `<= 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintReport {
    pub residuals: BTreeMap<ConstraintId, f64>,
    pub objective: f64,
    pub worst: (ConstraintId, f64),
}

impl ConstraintReport {
    pub fn max_residual(&self) -> f64 {
        self.worst.1
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        self.worst.1 <= tol
    }

    pub fn get(&self, id: ConstraintId) -> Option<f64> {
        self.residuals.get(&id).copied()
    }
}

/// Exact values of every functional at a point.
#[derive(Clone, Debug)]
pub struct FunctionalValues {
    pub fp: [Vec<f64>; 2],
    pub fs: [Vec<f64>; 2],
    pub gp: [Vec<f64>; 2],
    pub gs: [Vec<f64>; 2],
    pub gamma: [Vec<f64>; 2],
    pub beta: [Vec<f64>; 2],
    pub pp: [Vec<f64>; 2],
    pub ps: [Vec<f64>; 2],
    /// Joint compression rate per CP (multivariate mode only).
    pub joint: Option<[f64; 2]>,
}

pub fn functional_values(
    point: &DesignPoint,
    ch: &StackedChannels,
    config: &NetworkConfig,
    mode: CompressionMode,
) -> Result<FunctionalValues> {
    point.check_dims(config)?;
    if mode == CompressionMode::Multivariate {
        check_multivariate(config)?;
    }
    let per_ue = |f: &dyn Fn(usize, usize) -> Result<f64>| -> Result<[Vec<f64>; 2]> {
        let a = (0..config.n_ues).map(|k| f(0, k)).collect::<Result<Vec<_>>>()?;
        let b = (0..config.n_ues).map(|k| f(1, k)).collect::<Result<Vec<_>>>()?;
        Ok([a, b])
    };
    let per_ru = |f: &dyn Fn(usize, usize) -> Result<f64>| -> Result<[Vec<f64>; 2]> {
        let a = (0..config.n_rus).map(|r| f(0, r)).collect::<Result<Vec<_>>>()?;
        let b = (0..config.n_rus).map(|r| f(1, r)).collect::<Result<Vec<_>>>()?;
        Ok([a, b])
    };
    let joint = if mode == CompressionMode::Multivariate {
        let mut p = point.clone();
        if p.theta.is_none() {
            p.theta = DesignPoint::zeros(config, 0.0, mode).theta;
        }
        Some([multivariate_joint_rate(0, &p, config)?, multivariate_joint_rate(1, &p, config)?])
    } else {
        None
    };
    Ok(FunctionalValues {
        fp: per_ue(&|i, k| rate_private(i, k, point, ch))?,
        fs: per_ue(&|i, k| rate_shared(i, k, point, ch, mode))?,
        gp: per_ru(&|i, r| fronthaul_rate(i, r, Band::Private, point, config))?,
        gs: per_ru(&|i, r| fronthaul_rate(i, r, Band::Shared, point, config))?,
        gamma: per_ru(&|i, r| backhaul_rate(i, r, point, config))?,
        beta: per_ue(&|i, k| privacy_leakage(i, k, point, config))?,
        pp: per_ru(&|i, r| power_per_hz(i, r, Band::Private, point, config))?,
        ps: per_ru(&|i, r| power_per_hz(i, r, Band::Shared, point, config))?,
        joint,
    })
}

/// Slack data of the joint-compression budget allocation.
///
/// For each CP `i` the joint rate exceeds the sum of its individual
/// compression rates by `e_i`; the excess must be covered by raising the
/// fronthaul budget of RU `(i,1)` by `x_i = e_i − y_i` or the backhaul budget
/// towards RU `(ī,1)` by `y_i ∈ [0, e_i]`. The residual is the smallest
/// achievable worst violation of the two fronthaul and two backhaul budgets.
#[derive(Clone, Copy, Debug)]
pub struct JointAllocation {
    pub excess: [f64; 2],
    pub fronthaul_slack: [f64; 2],
    pub backhaul_slack: [f64; 2],
}

impl JointAllocation {
    pub fn new(v: &FunctionalValues, point: &DesignPoint, config: &NetworkConfig) -> Option<Self> {
        let joint = v.joint?;
        let mut out = Self { excess: [0.0; 2], fronthaul_slack: [0.0; 2], backhaul_slack: [0.0; 2] };
        for i in 0..N_OPERATORS {
            let ib = other(i);
            let gx = point.ws * v.gs[i][0];
            let gr = point.ws * v.gamma[ib][0];
            out.excess[i] = (point.ws * joint[i] - gx - gr).max(0.0);
            out.fronthaul_slack[i] =
                config.fronthaul_capacity[i][0] - point.wp[i] * v.gp[i][0] - gx - point.ws * v.gamma[i][0];
            out.backhaul_slack[i] = config.backhaul_capacity[i] - gr;
        }
        Some(out)
    }

    /// Budget violations `[F_0, F_1, B_0, B_1]` for backhaul shares `y`.
    ///
    /// RU `(i,1)` carries `x_i` on its fronthaul and `y_ī` (forwarded by CP `ī`).
    fn violations(&self, y: [f64; 2]) -> [f64; 4] {
        let e = self.excess;
        [
            e[0] - y[0] + y[1] - self.fronthaul_slack[0],
            e[1] - y[1] + y[0] - self.fronthaul_slack[1],
            y[0] - self.backhaul_slack[0],
            y[1] - self.backhaul_slack[1],
        ]
    }

    fn worst(&self, y: [f64; 2]) -> f64 {
        self.violations(y).into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Minimizer of the worst violation over `y ∈ [0, e_0] x [0, e_1]`.
    ///
    /// The objective is a maximum of four affine pieces, so the minimum is
    /// attained at a box vertex, at a point of a box edge where two pieces
    /// tie, or at an interior point where three pieces tie; all are enumerated.
    fn optimum(&self) -> ([f64; 2], f64) {
        let e = self.excess;
        // piece k: a_k · y + c_k
        let pieces: [([f64; 2], f64); 4] = [
            ([-1.0, 1.0], e[0] - self.fronthaul_slack[0]),
            ([1.0, -1.0], e[1] - self.fronthaul_slack[1]),
            ([1.0, 0.0], -self.backhaul_slack[0]),
            ([0.0, 1.0], -self.backhaul_slack[1]),
        ];
        let inside = |y: [f64; 2]| (0..2).all(|d| y[d] >= -1e-15 && y[d] <= e[d] + 1e-15);
        let clamp = |y: [f64; 2]| [y[0].clamp(0.0, e[0]), y[1].clamp(0.0, e[1])];
        let mut cands: Vec<[f64; 2]> = vec![[0.0, 0.0], [e[0], 0.0], [0.0, e[1]], [e[0], e[1]]];
        // edges: coordinate `d` fixed at a bound, free coordinate `f`
        for d in 0..2 {
            let f = 1 - d;
            for fixed in [0.0, e[d]] {
                for p in 0..4 {
                    for q in (p + 1)..4 {
                        let (ap, cp) = pieces[p];
                        let (aq, cq) = pieces[q];
                        let slope = ap[f] - aq[f];
                        if slope.abs() > 0.0 {
                            let mut y = [0.0; 2];
                            y[d] = fixed;
                            y[f] = -((ap[d] - aq[d]) * fixed + cp - cq) / slope;
                            if inside(y) {
                                cands.push(clamp(y));
                            }
                        }
                    }
                }
            }
        }
        // interior triple ties
        for p in 0..4 {
            for q in (p + 1)..4 {
                for r in (q + 1)..4 {
                    let (ap, cp) = pieces[p];
                    let (aq, cq) = pieces[q];
                    let (ar, cr) = pieces[r];
                    let m = [[ap[0] - aq[0], ap[1] - aq[1]], [ap[0] - ar[0], ap[1] - ar[1]]];
                    let rhs = [cq - cp, cr - cp];
                    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
                    if det.abs() > 0.0 {
                        let y = [
                            (rhs[0] * m[1][1] - m[0][1] * rhs[1]) / det,
                            (m[0][0] * rhs[1] - rhs[0] * m[1][0]) / det,
                        ];
                        if inside(y) {
                            cands.push(clamp(y));
                        }
                    }
                }
            }
        }
        cands
            .into_iter()
            .map(|y| (y, self.worst(y)))
            .fold(([0.0; 2], f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best })
    }

    pub fn residual(&self) -> f64 {
        self.optimum().1
    }

    /// Budget split `(x_i, y_i)` minimizing the worst violation.
    pub fn split(&self) -> [(f64, f64); 2] {
        let (y, _) = self.optimum();
        [0, 1].map(|i| (self.excess[i] - y[i], y[i]))
    }
}

/// Residuals of every constraint of the original problem at `point`.
pub fn evaluate_constraints(
    point: &DesignPoint,
    ch: &StackedChannels,
    config: &NetworkConfig,
    mode: CompressionMode,
) -> Result<ConstraintReport> {
    let v = functional_values(point, ch, config, mode)?;
    Ok(report_from_values(&v, point, config))
}

pub fn report_from_values(v: &FunctionalValues, point: &DesignPoint, config: &NetworkConfig) -> ConstraintReport {
    let mut res = BTreeMap::new();
    for i in 0..N_OPERATORS {
        for k in 0..config.n_ues {
            res.insert(ConstraintId::RatePrivate { i, k }, point.rp[i][k] - point.wp[i] * v.fp[i][k]);
            res.insert(ConstraintId::RateShared { i, k }, point.rs[i][k] - point.ws * v.fs[i][k]);
            res.insert(ConstraintId::Privacy { i, k }, point.ws * v.beta[i][k] - config.privacy_threshold);
        }
        for r in 0..config.n_rus {
            let load = point.wp[i] * v.gp[i][r] + point.ws * v.gs[i][r] + point.ws * v.gamma[i][r];
            res.insert(ConstraintId::Fronthaul { i, r }, load - config.fronthaul_capacity[i][r]);
            let p = point.wp[i] * v.pp[i][r] + point.ws * v.ps[i][r];
            res.insert(ConstraintId::Power { i, r }, p - config.max_power[i][r]);
        }
        let ib = other(i);
        let bh: f64 = (0..config.n_rus).map(|r| point.ws * v.gamma[ib][r]).sum();
        res.insert(ConstraintId::Backhaul { i }, bh - config.backhaul_capacity[i]);
    }
    let wsum = point.wp[0] + point.wp[1] + point.ws;
    res.insert(
        ConstraintId::Bandwidth,
        (wsum - config.total_bandwidth).abs() - BANDWIDTH_TOL * config.total_bandwidth,
    );
    if let Some(alloc) = JointAllocation::new(v, point, config) {
        res.insert(ConstraintId::MultivariateJoint, alloc.residual());
    }
    let worst = res
        .iter()
        .fold((ConstraintId::Bandwidth, f64::NEG_INFINITY), |acc, (&id, &r)| if r > acc.1 { (id, r) } else { acc });
    ConstraintReport { residuals: res, objective: point.sum_rate(), worst }
}

/// Largest absolute deviation from Hermitian symmetry across the point's blocks.
pub fn hermitian_defect(point: &DesignPoint) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..N_OPERATORS {
        for m in point.vtil[i].iter().chain(&point.util[i]).chain(&point.omega_p[i]).chain(&point.omega_s[i]).chain(&point.sigma[i]) {
            d = d.max(max_abs(&(m - m.adjoint())));
        }
    }
    d
}
