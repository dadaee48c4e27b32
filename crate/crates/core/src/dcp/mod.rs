//! DC reformulation: first-order majorizers of concave log terms, the
//! hat-functions built from them, and a solver-agnostic representation of one
//! convexified subproblem.
//!
//! All constraints are expressed with natural logarithms; bit-valued
//! epigraph variables are multiplied by `ln 2` where they meet a log-det.

mod build;
mod hat;
mod phi;

use std::fmt::Write as _;

pub use build::{build_subproblem, ExpansionPoint, Layout, ScalarKey, SubproblemOptions, VarSlot, LOWER_BOUND};
pub use hat::{
    hat_backhaul, hat_fronthaul, hat_joint, hat_privacy, hat_rate_private, hat_rate_shared,
};
pub use phi::{matrix_phi, scalar_phi};

use crate::error::{Error, Result};
use crate::linalg::{herm_from_params, herm_params, ln_det_hpd, min_eigenvalue, trace_prod_re, CMat};

/// Shape of an optimization variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarShape {
    Scalar,
    /// `n x n` Hermitian matrix stored as `n²` real parameters.
    Hermitian(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub name: String,
    pub shape: VarShape,
    /// First flat index.
    pub offset: usize,
}

impl Variable {
    pub fn len(&self) -> usize {
        match self.shape {
            VarShape::Scalar => 1,
            VarShape::Hermitian(n) => herm_params(n),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `constant + Σ coef · x[idx]`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AffineScalar {
    pub constant: f64,
    pub coeffs: Vec<(usize, f64)>,
}

impl AffineScalar {
    pub fn constant(c: f64) -> Self {
        Self { constant: c, coeffs: Vec::new() }
    }

    pub fn var(idx: usize, coef: f64) -> Self {
        Self { constant: 0.0, coeffs: vec![(idx, coef)] }
    }

    pub fn add_term(&mut self, idx: usize, coef: f64) -> &mut Self {
        self.coeffs.push((idx, coef));
        self
    }

    pub fn add(&mut self, other: &AffineScalar, scale: f64) -> &mut Self {
        self.constant += scale * other.constant;
        self.coeffs.extend(other.coeffs.iter().map(|&(i, c)| (i, scale * c)));
        self
    }

    /// Merges duplicate indices and drops zero coefficients.
    pub fn normalized(mut self) -> Self {
        self.coeffs.sort_by_key(|&(i, _)| i);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(self.coeffs.len());
        for (i, c) in self.coeffs {
            match out.last_mut() {
                Some(last) if last.0 == i => last.1 += c,
                _ => out.push((i, c)),
            }
        }
        out.retain(|&(_, c)| c != 0.0);
        self.coeffs = out;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.coeffs.iter().map(|&(i, c)| c * x[i]).sum::<f64>()
    }
}

/// Hermitian matrix `C + Σ x[idx] · D_idx`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineMatrix {
    pub dim: usize,
    pub constant: CMat,
    pub coeffs: Vec<(usize, CMat)>,
}

impl AffineMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, constant: CMat::zeros(dim, dim), coeffs: Vec::new() }
    }

    pub fn eval(&self, x: &[f64]) -> CMat {
        let mut m = self.constant.clone();
        for (i, d) in &self.coeffs {
            if x[*i] != 0.0 {
                m += d.scale(x[*i]);
            }
        }
        m
    }

    pub fn normalized(mut self) -> Self {
        self.coeffs.sort_by_key(|(i, _)| *i);
        let mut out: Vec<(usize, CMat)> = Vec::with_capacity(self.coeffs.len());
        for (i, d) in self.coeffs {
            match out.last_mut() {
                Some(last) if last.0 == i => last.1 += d,
                _ => out.push((i, d)),
            }
        }
        out.retain(|(_, d)| d.iter().any(|z| z.norm() != 0.0));
        self.coeffs = out;
        self
    }

    /// `φ(M(x), M0) = ln det M0 + tr(M0⁻¹ (M(x) − M0))` as an affine scalar.
    pub fn linearize_logdet(&self, m0: &CMat) -> Result<AffineScalar> {
        let inv = crate::linalg::inv_hpd(m0)
            .ok_or_else(|| Error::Precondition("expansion matrix is not positive definite".into()))?;
        let ld = ln_det_hpd(m0).ok_or_else(|| Error::Precondition("expansion matrix is not positive definite".into()))?;
        let constant = ld + trace_prod_re(&inv, &self.constant) - self.dim as f64;
        let coeffs = self.coeffs.iter().map(|(i, d)| (*i, trace_prod_re(&inv, d))).collect();
        Ok(AffineScalar { constant, coeffs }.normalized())
    }

    /// `tr M(x)` as an affine scalar.
    pub fn trace(&self) -> AffineScalar {
        let tr = |m: &CMat| (0..m.nrows()).map(|p| m[(p, p)].re).sum::<f64>();
        AffineScalar {
            constant: tr(&self.constant),
            coeffs: self.coeffs.iter().map(|(i, d)| (*i, tr(d))).collect(),
        }
        .normalized()
    }
}

/// Shape-certified constraint forms; every one describes a convex set.
#[derive(Clone, Debug, PartialEq)]
pub enum ConstraintKind {
    /// `a(x) = 0`.
    Equality(AffineScalar),
    /// `a(x) <= 0`.
    Inequality(AffineScalar),
    /// `lhs(x) <= Σ c_j ln b_j(x)` with every `c_j > 0` (concave right side).
    LogSum { lhs: AffineScalar, logs: Vec<(f64, AffineScalar)> },
    /// `lhs(x) <= Σ c_j ln det M_j(x)` with every `c_j > 0` (concave right side).
    LogDet { lhs: AffineScalar, logdets: Vec<(f64, AffineMatrix)> },
    /// `M(x) ⪰ floor · I`.
    Psd { expr: AffineMatrix, floor: f64 },
}

/// Which part of the problem a constraint encodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    /// `φ(R, R') <= ln W + ln t_f`.
    RateEpigraph,
    /// `t_f <= f̂`.
    RateMinorant,
    /// `Σ g̃ + γ̃ <= C_F`.
    FronthaulBudget,
    /// `φ(W, W') + φ(t_g, t_g') <= ln g̃`.
    FronthaulEpigraph,
    /// `ĝ <= t_g`.
    FronthaulMajorant,
    /// `φ(W_S, W_S') + φ(t_γ, t_γ') <= ln γ̃`.
    BackhaulEpigraph,
    /// `γ̂ <= t_γ`.
    BackhaulMajorant,
    /// `Σ_r γ̃ <= C_B`.
    BackhaulBudget,
    /// `φ(W_S, W_S') + φ(t_β, t_β') <= ln Γ`.
    PrivacyEpigraph,
    /// `β̂ <= t_β`.
    PrivacyMajorant,
    /// `Σ p̃ <= P`.
    PowerBudget,
    /// `φ(W, W') + φ(t_p, t_p') <= ln p̃`.
    PowerEpigraph,
    /// `p <= t_p`.
    PowerLinear,
    /// `W_P1 + W_P2 + W_S = W`.
    Bandwidth,
    /// Extra bandwidth equalities of the baseline schemes.
    SchemeEquality,
    /// `R >= ε`, `W >= ε`: keeps every linearization point positive.
    LowerBound,
    /// Joint compression-rate majorant of the multivariate mode.
    MultivariateJoint,
    /// Semidefinite membership of a matrix variable.
    Psd,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub label: String,
    pub family: Family,
    pub kind: ConstraintKind,
}

impl Constraint {
    pub fn new(label: impl Into<String>, family: Family, kind: ConstraintKind) -> Result<Self> {
        let c = Self { label: label.into(), family, kind };
        c.certify()?;
        Ok(c)
    }

    /// Checks the convexity certificate of the constraint shape.
    pub fn certify(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Argument(format!("constraint {}: {what}", self.label)));
        match &self.kind {
            ConstraintKind::LogSum { logs, .. } if logs.iter().any(|(c, _)| !(*c > 0.0)) => {
                bad("log coefficients must be positive")
            }
            ConstraintKind::LogDet { logdets, .. } if logdets.iter().any(|(c, _)| !(*c > 0.0)) => {
                bad("log-det coefficients must be positive")
            }
            ConstraintKind::LogDet { logdets, .. } if logdets.iter().any(|(_, m)| !is_hermitian_affine(m)) => {
                bad("log-det argument must be Hermitian")
            }
            ConstraintKind::Psd { expr, .. } if !is_hermitian_affine(expr) => bad("PSD argument must be Hermitian"),
            _ => Ok(()),
        }
    }

    pub fn is_equality(&self) -> bool {
        matches!(self.kind, ConstraintKind::Equality(_))
    }

    /// Signed violation in `<= 0` form (`|a|` for equalities); `+∞` outside the log domain.
    pub fn violation(&self, x: &[f64]) -> f64 {
        match &self.kind {
            ConstraintKind::Equality(a) => a.eval(x).abs(),
            ConstraintKind::Inequality(a) => a.eval(x),
            ConstraintKind::LogSum { lhs, logs } => {
                let mut rhs = 0.0;
                for (c, b) in logs {
                    let v = b.eval(x);
                    if !(v > 0.0) {
                        return f64::INFINITY;
                    }
                    rhs += c * v.ln();
                }
                lhs.eval(x) - rhs
            }
            ConstraintKind::LogDet { lhs, logdets } => {
                let mut rhs = 0.0;
                for (c, m) in logdets {
                    match ln_det_hpd(&m.eval(x)) {
                        Some(v) => rhs += c * v,
                        None => return f64::INFINITY,
                    }
                }
                lhs.eval(x) - rhs
            }
            ConstraintKind::Psd { expr, floor } => floor - min_eigenvalue(&expr.eval(x)),
        }
    }

    /// Barrier weight: 1 for scalar constraints, the matrix dimension for PSD memberships.
    pub fn barrier_degree(&self) -> usize {
        match &self.kind {
            ConstraintKind::Equality(_) => 0,
            ConstraintKind::Psd { expr, .. } => expr.dim,
            _ => 1,
        }
    }

    fn shape_name(&self) -> &'static str {
        match self.kind {
            ConstraintKind::Equality(_) => "affine ==",
            ConstraintKind::Inequality(_) => "affine <=",
            ConstraintKind::LogSum { .. } => "affine <= sum log",
            ConstraintKind::LogDet { .. } => "affine <= sum logdet",
            ConstraintKind::Psd { .. } => "psd",
        }
    }
}

fn is_hermitian_affine(m: &AffineMatrix) -> bool {
    let herm = |a: &CMat| crate::linalg::max_abs(&(a - a.adjoint())) <= 1e-10 * (1.0 + crate::linalg::max_abs(a));
    herm(&m.constant) && m.coeffs.iter().all(|(_, d)| herm(d))
}

/// One convexified subproblem: maximize `objective` over the constraint set.
#[derive(Clone, Debug)]
pub struct ConvexSubproblem {
    pub variables: Vec<Variable>,
    pub n: usize,
    pub objective: AffineScalar,
    pub constraints: Vec<Constraint>,
}

impl ConvexSubproblem {
    pub fn new() -> Self {
        Self { variables: Vec::new(), n: 0, objective: AffineScalar::default(), constraints: Vec::new() }
    }

    pub fn add_variable(&mut self, name: impl Into<String>, shape: VarShape) -> usize {
        let v = Variable { name: name.into(), shape, offset: self.n };
        self.n += v.len();
        self.variables.push(v);
        self.variables.len() - 1
    }

    pub fn push(&mut self, c: Constraint) {
        self.constraints.push(c);
    }

    pub fn scalar_count(&self) -> usize {
        self.variables.iter().filter(|v| v.shape == VarShape::Scalar).count()
    }

    pub fn matrix_count(&self) -> usize {
        self.variables.len() - self.scalar_count()
    }

    pub fn count(&self, family: Family) -> usize {
        self.constraints.iter().filter(|c| c.family == family).count()
    }

    /// Hermitian matrix value of variable `var` in `x`.
    pub fn matrix_value(&self, var: usize, x: &[f64]) -> CMat {
        let v = &self.variables[var];
        match v.shape {
            VarShape::Hermitian(n) => herm_from_params(n, &x[v.offset..v.offset + v.len()]),
            VarShape::Scalar => CMat::from_element(1, 1, crate::linalg::C64::new(x[v.offset], 0.0)),
        }
    }

    /// Largest violation over all constraints.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.constraints.iter().map(|c| c.violation(x)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Every inequality strictly satisfied and every equality within `eq_tol`.
    pub fn is_strictly_feasible(&self, x: &[f64], eq_tol: f64) -> bool {
        self.constraints.iter().all(|c| if c.is_equality() { c.violation(x) <= eq_tol } else { c.violation(x) < 0.0 })
    }

    pub fn certify(&self) -> Result<()> {
        for c in &self.constraints {
            c.certify()?;
            let idx = |i: usize| {
                if i >= self.n {
                    Err(Error::Argument(format!("constraint {} references undeclared index {i}", c.label)))
                } else {
                    Ok(())
                }
            };
            match &c.kind {
                ConstraintKind::Equality(a) | ConstraintKind::Inequality(a) => {
                    a.coeffs.iter().try_for_each(|&(i, _)| idx(i))?
                }
                ConstraintKind::LogSum { lhs, logs } => {
                    lhs.coeffs.iter().try_for_each(|&(i, _)| idx(i))?;
                    for (_, b) in logs {
                        b.coeffs.iter().try_for_each(|&(i, _)| idx(i))?;
                    }
                }
                ConstraintKind::LogDet { lhs, logdets } => {
                    lhs.coeffs.iter().try_for_each(|&(i, _)| idx(i))?;
                    for (_, m) in logdets {
                        m.coeffs.iter().try_for_each(|(i, _)| idx(*i))?;
                    }
                }
                ConstraintKind::Psd { expr, .. } => expr.coeffs.iter().try_for_each(|(i, _)| idx(*i))?,
            }
        }
        Ok(())
    }

    /// Human-readable variable and constraint tables.
    pub fn listing(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "variables ({} scalar, {} matrix, {} real parameters)", self.scalar_count(), self.matrix_count(), self.n);
        for v in &self.variables {
            let shape = match v.shape {
                VarShape::Scalar => "scalar".to_string(),
                VarShape::Hermitian(n) => format!("herm {n}x{n}"),
            };
            let _ = writeln!(s, "  {:<6} {:<24} {}", v.offset, v.name, shape);
        }
        let _ = writeln!(s, "objective: maximize {} terms", self.objective.coeffs.len());
        let _ = writeln!(s, "constraints ({})", self.constraints.len());
        for c in &self.constraints {
            let _ = writeln!(s, "  {:<22} {:<20} {}", format!("{:?}", c.family), c.shape_name(), c.label);
        }
        s
    }
}

impl Default for ConvexSubproblem {
    fn default() -> Self {
        Self::new()
    }
}
