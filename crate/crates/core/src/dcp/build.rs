//! Assembly of the convexified subproblem around an expansion point.

use std::collections::BTreeMap;
use std::f64::consts::LN_2;
use std::fmt;

use super::{AffineMatrix, AffineScalar, Constraint, ConstraintKind, ConvexSubproblem, Family, VarShape};
use crate::error::{Error, Result};
use crate::linalg::{herm_from_params, herm_params, herm_to_params, CMat, C64};
use crate::metrics::{
    exprs, functional_values, Band, DesignPoint, JointAllocation, MatExpr, Quantity,
};
use crate::model::{other, BandwidthScheme, CompressionMode, NetworkConfig, StackedChannels, N_OPERATORS};

/// Default `ε` lower bound of rates and bandwidths in scaled units.
pub const LOWER_BOUND: f64 = 1e-6;

/// Scalar variables of the subproblem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScalarKey {
    /// `R_{i,k,m}`.
    Rate { band: Band, i: usize, k: usize },
    /// `t_{f,i,k,m}`.
    RateEpi { band: Band, i: usize, k: usize },
    Wp(usize),
    Ws,
    /// `t_{g,i,r,m}`.
    FrontEpi { band: Band, i: usize, r: usize },
    /// `g̃_{i,r}^{(m)}`.
    FrontBudget { band: Band, i: usize, r: usize },
    /// `t_{γ,i,r,S}`.
    BackEpi { i: usize, r: usize },
    /// `γ̃_{i,r}^{(S)}`.
    BackBudget { i: usize, r: usize },
    /// `t_{β,i,k,S}`.
    PrivEpi { i: usize, k: usize },
    /// `t_{p,i,r,m}`.
    PowerEpi { band: Band, i: usize, r: usize },
    /// `p̃_{i,r}^{(m)}`.
    PowerBudget { band: Band, i: usize, r: usize },
}

fn band_tag(b: Band) -> &'static str {
    match b {
        Band::Private => "P",
        Band::Shared => "S",
    }
}

impl fmt::Display for ScalarKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ScalarKey::*;
        match *self {
            Rate { band, i, k } => write!(f, "R[{i}][{k}]{}", band_tag(band)),
            RateEpi { band, i, k } => write!(f, "t_f[{i}][{k}]{}", band_tag(band)),
            Wp(i) => write!(f, "W_P[{i}]"),
            Ws => write!(f, "W_S"),
            FrontEpi { band, i, r } => write!(f, "t_g[{i}][{r}]{}", band_tag(band)),
            FrontBudget { band, i, r } => write!(f, "g~[{i}][{r}]{}", band_tag(band)),
            BackEpi { i, r } => write!(f, "t_gamma[{i}][{r}]"),
            BackBudget { i, r } => write!(f, "gamma~[{i}][{r}]"),
            PrivEpi { i, k } => write!(f, "t_beta[{i}][{k}]"),
            PowerEpi { band, i, r } => write!(f, "t_p[{i}][{r}]{}", band_tag(band)),
            PowerBudget { band, i, r } => write!(f, "p~[{i}][{r}]{}", band_tag(band)),
        }
    }
}

fn quantity_name(q: Quantity) -> String {
    match q {
        Quantity::Vtil(i, k) => format!("Vtil[{i}][{k}]"),
        Quantity::Util(i, k) => format!("Util[{i}][{k}]"),
        Quantity::OmegaP(i, r) => format!("OmegaP[{i}][{r}]"),
        Quantity::OmegaS(i, r) => format!("OmegaS[{i}][{r}]"),
        Quantity::Sigma(i, r) => format!("Sigma[{i}][{r}]"),
        Quantity::Lambda(i) => format!("Lambda[{i}]"),
    }
}

/// What a subproblem variable represents.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarSlot {
    Scalar(ScalarKey),
    Matrix(Quantity),
}

/// Structural switches of the subproblem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubproblemOptions {
    pub scheme: BandwidthScheme,
    pub mode: CompressionMode,
    /// Multivariate mode with `Θ ≡ 0`: `Λ_i` is assembled from separate `Ω`/`Σ` variables.
    pub freeze_theta: bool,
    /// `ε` floor of every quantization covariance.
    pub floor: f64,
    /// `ε` lower bound of rates and bandwidths (scaled units).
    pub lower_bound: f64,
}

impl SubproblemOptions {
    pub fn new(scheme: BandwidthScheme, mode: CompressionMode, floor: f64) -> Self {
        Self { scheme, mode, freeze_theta: false, floor, lower_bound: LOWER_BOUND }
    }

    fn pooled(&self) -> bool {
        self.scheme.has_shared_band()
    }

    fn lambda_vars(&self) -> bool {
        self.pooled() && self.mode == CompressionMode::Multivariate && !self.freeze_theta
    }
}

/// Previous iterate: a design point plus every auxiliary epigraph value.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpansionPoint {
    pub point: DesignPoint,
    pub aux: BTreeMap<ScalarKey, f64>,
}

impl ExpansionPoint {
    pub fn value(&self, key: ScalarKey) -> Option<f64> {
        let p = &self.point;
        match key {
            ScalarKey::Rate { band: Band::Private, i, k } => Some(p.rp[i][k]),
            ScalarKey::Rate { band: Band::Shared, i, k } => Some(p.rs[i][k]),
            ScalarKey::Wp(i) => Some(p.wp[i]),
            ScalarKey::Ws => Some(p.ws),
            _ => self.aux.get(&key).copied(),
        }
    }

    /// Completes a strictly feasible design point with auxiliary values that
    /// split every capacity/power slack evenly, so the resulting subproblem
    /// starts strictly inside its feasible set.
    pub fn from_point(
        point: &DesignPoint,
        ch: &StackedChannels,
        config: &NetworkConfig,
        scheme: BandwidthScheme,
        mode: CompressionMode,
    ) -> Result<Self> {
        let pooled = scheme.has_shared_band();
        let v = functional_values(point, ch, config, mode)?;
        let fail = |what: String| Err(Error::Precondition(format!("expansion point not strictly feasible: {what}")));
        let mut aux = BTreeMap::new();
        let bands: &[Band] = if pooled { &[Band::Private, Band::Shared] } else { &[Band::Private] };
        let width = |b: Band, i: usize| match b {
            Band::Private => point.wp[i],
            Band::Shared => point.ws,
        };
        for &b in bands {
            for i in 0..N_OPERATORS {
                if !(width(b, i) > LOWER_BOUND) {
                    return fail(format!("bandwidth of band {b:?} operator {i} is not positive"));
                }
            }
        }

        for i in 0..N_OPERATORS {
            for k in 0..config.n_ues {
                for &b in bands {
                    if rate_removed(ch, b, i, k) {
                        continue;
                    }
                    let (r, f) = match b {
                        Band::Private => (point.rp[i][k], v.fp[i][k]),
                        Band::Shared => (point.rs[i][k], v.fs[i][k]),
                    };
                    let w = width(b, i);
                    if !(r > LOWER_BOUND && r < w * f) {
                        return fail(format!("rate ({i},{k}) {b:?} = {r} outside (0, {})", w * f));
                    }
                    aux.insert(ScalarKey::RateEpi { band: b, i, k }, 0.5 * (f + r / w));
                }
                if pooled {
                    let cap = config.privacy_threshold / point.ws;
                    if !(v.beta[i][k] < cap) {
                        return fail(format!("privacy ({i},{k})"));
                    }
                    aux.insert(ScalarKey::PrivEpi { i, k }, 0.5 * (v.beta[i][k] + cap));
                }
            }
        }

        // extra joint-compression budget (x_i on the fronthaul side, y_i on the backhaul side)
        let mut extra_front = [[0.0; 1]; 2];
        let mut extra_back = [[0.0; 1]; 2];
        if pooled && mode == CompressionMode::Multivariate {
            let alloc = JointAllocation::new(&v, point, config).expect("multivariate values present");
            if !(alloc.residual() < 0.0) {
                return fail("joint compression allocation".into());
            }
            for (i, (x, y)) in alloc.split().into_iter().enumerate() {
                extra_front[i][0] = x;
                extra_back[other(i)][0] = y;
            }
        }
        let extra = |arr: &[[f64; 1]; 2], i: usize, r: usize| if r == 0 { arr[i][0] } else { 0.0 };

        for i in 0..N_OPERATORS {
            for r in 0..config.n_rus {
                // fronthaul
                let mut loads = vec![(Band::Private, point.wp[i] * v.gp[i][r])];
                if pooled {
                    loads.push((Band::Shared, point.ws * v.gs[i][r] + extra(&extra_front, i, r)));
                }
                let back_load = point.ws * v.gamma[i][r] + extra(&extra_back, i, r);
                let total: f64 = loads.iter().map(|l| l.1).sum::<f64>() + if pooled { back_load } else { 0.0 };
                let slack = config.fronthaul_capacity[i][r] - total;
                if !(slack > 0.0) {
                    return fail(format!("fronthaul ({i},{r})"));
                }
                let share = slack / (loads.len() + usize::from(pooled) + 1) as f64;
                for &(b, load) in &loads {
                    aux.insert(ScalarKey::FrontBudget { band: b, i, r }, load + share);
                    aux.insert(ScalarKey::FrontEpi { band: b, i, r }, (load + 0.5 * share) / width(b, i));
                }
                if pooled {
                    let ib = other(i);
                    let used: f64 = (0..config.n_rus)
                        .map(|q| point.ws * v.gamma[i][q] + extra(&extra_back, i, q))
                        .sum();
                    let bslack = config.backhaul_capacity[ib] - used;
                    if !(bslack > 0.0) {
                        return fail(format!("backhaul of CP {ib}"));
                    }
                    let s = share.min(bslack / (config.n_rus + 1) as f64);
                    aux.insert(ScalarKey::BackBudget { i, r }, back_load + s);
                    aux.insert(ScalarKey::BackEpi { i, r }, (back_load + 0.5 * s) / point.ws);
                }
                // power
                let mut p = vec![(Band::Private, point.wp[i] * v.pp[i][r])];
                if pooled {
                    p.push((Band::Shared, point.ws * v.ps[i][r]));
                }
                let pslack = config.max_power[i][r] - p.iter().map(|l| l.1).sum::<f64>();
                if !(pslack > 0.0) {
                    return fail(format!("power ({i},{r})"));
                }
                let share = pslack / (p.len() + 1) as f64;
                for &(b, load) in &p {
                    aux.insert(ScalarKey::PowerBudget { band: b, i, r }, load + share);
                    aux.insert(ScalarKey::PowerEpi { band: b, i, r }, (load + 0.5 * share) / width(b, i));
                }
            }
        }
        Ok(Self { point: point.clone(), aux })
    }
}

fn rate_removed(ch: &StackedChannels, band: Band, i: usize, k: usize) -> bool {
    match band {
        Band::Private => ch.private_link_is_zero(i, k),
        Band::Shared => ch.shared_link_is_zero(i, k),
    }
}

/// Mapping between subproblem variables and design quantities.
#[derive(Clone, Debug)]
pub struct Layout {
    pub options: SubproblemOptions,
    pub slots: Vec<VarSlot>,
    scalars: BTreeMap<ScalarKey, usize>,
    matrices: BTreeMap<Quantity, usize>,
    offsets: Vec<usize>,
    dims: Vec<usize>,
    /// Total number of real parameters.
    pub n: usize,
}

impl Layout {
    /// Flat index of a scalar variable.
    pub fn scalar(&self, key: ScalarKey) -> Option<usize> {
        self.scalars.get(&key).copied()
    }

    /// Variable id of a matrix quantity.
    pub fn matrix(&self, q: Quantity) -> Option<usize> {
        self.matrices.get(&q).copied()
    }

    pub fn scalar_keys(&self) -> impl Iterator<Item = (&ScalarKey, &usize)> {
        self.scalars.iter()
    }

    /// `(variable, P)` pairs with `Q = Σ P X P^H`.
    fn resolve(&self, q: Quantity, config: &NetworkConfig) -> Result<Vec<(usize, CMat)>> {
        let eye = |n: usize| CMat::identity(n, n);
        let missing = || Error::Argument(format!("{} is not a variable of this subproblem", quantity_name(q)));
        if self.options.lambda_vars() {
            let block = |i: usize, top: bool| {
                let a = config.n_ant_ru[i][0];
                let b = config.n_ant_ru[other(i)][0];
                let mut p = CMat::zeros(if top { a } else { b }, a + b);
                let off = if top { 0 } else { a };
                for c in 0..p.nrows() {
                    p[(c, off + c)] = C64::new(1.0, 0.0);
                }
                p
            };
            match q {
                Quantity::OmegaS(i, 0) => return Ok(vec![(self.matrix(Quantity::Lambda(i)).ok_or_else(missing)?, block(i, true))]),
                Quantity::Sigma(i, 0) => {
                    let j = other(i);
                    return Ok(vec![(self.matrix(Quantity::Lambda(j)).ok_or_else(missing)?, block(j, false))]);
                }
                _ => {}
            }
        } else if let Quantity::Lambda(i) = q {
            let a = config.n_ant_ru[i][0];
            let b = config.n_ant_ru[other(i)][0];
            let mut top = CMat::zeros(a + b, a);
            let mut bottom = CMat::zeros(a + b, b);
            for c in 0..a {
                top[(c, c)] = C64::new(1.0, 0.0);
            }
            for c in 0..b {
                bottom[(a + c, c)] = C64::new(1.0, 0.0);
            }
            let om = self.matrix(Quantity::OmegaS(i, 0)).ok_or_else(missing)?;
            let sg = self.matrix(Quantity::Sigma(other(i), 0)).ok_or_else(missing)?;
            return Ok(vec![(om, top), (sg, bottom)]);
        }
        let var = self.matrix(q).ok_or_else(missing)?;
        Ok(vec![(var, eye(self.dims[var]))])
    }

    /// Compiles a symbolic matrix expression into `C + Σ x_t D_t`.
    pub fn compile(&self, e: &MatExpr, config: &NetworkConfig) -> Result<AffineMatrix> {
        let mut am = AffineMatrix::zeros(e.dim);
        am.constant = CMat::identity(e.dim, e.dim).scale(e.identity);
        for t in &e.terms {
            for (var, p) in self.resolve(t.q, config)? {
                let left = &t.left * p;
                let n = self.dims[var];
                let off = self.offsets[var];
                let col = |c: usize| left.column(c).into_owned();
                for d in 0..n {
                    let l = col(d);
                    am.coeffs.push((off + d, (&l * l.adjoint()).scale(t.coef)));
                }
                let mut idx = off + n;
                for a in 0..n {
                    for b in (a + 1)..n {
                        let la = col(a);
                        let lb = col(b);
                        let ab = &la * lb.adjoint();
                        let ba = &lb * la.adjoint();
                        am.coeffs.push((idx, (&ab + &ba).scale(t.coef)));
                        am.coeffs.push((idx + 1, (ab - ba).map(|z| z * C64::new(0.0, t.coef))));
                        idx += 2;
                    }
                }
            }
        }
        Ok(am.normalized())
    }

    /// Flat starting vector for an expansion point.
    pub fn x_from_expansion(&self, exp: &ExpansionPoint) -> Result<Vec<f64>> {
        let mut x = vec![0.0; self.n];
        for (var, slot) in self.slots.iter().enumerate() {
            let off = self.offsets[var];
            match *slot {
                VarSlot::Scalar(key) => {
                    x[off] = exp
                        .value(key)
                        .ok_or_else(|| Error::Precondition(format!("expansion lacks a value for {key}")))?;
                }
                VarSlot::Matrix(q) => {
                    let m = exp.point.quantity(q);
                    x[off..off + herm_params(self.dims[var])].copy_from_slice(&herm_to_params(&m));
                }
            }
        }
        Ok(x)
    }

    /// Expansion point read back from a subproblem solution; `base` supplies
    /// every quantity that is not a variable.
    pub fn expansion_from_x(&self, x: &[f64], base: &ExpansionPoint) -> ExpansionPoint {
        let mut out = base.clone();
        out.aux.clear();
        let p = &mut out.point;
        for i in 0..N_OPERATORS {
            p.rp[i].iter_mut().for_each(|r| *r = 0.0);
            p.rs[i].iter_mut().for_each(|r| *r = 0.0);
        }
        if !self.options.pooled() {
            p.ws = 0.0;
        }
        for (var, slot) in self.slots.iter().enumerate() {
            let off = self.offsets[var];
            match *slot {
                VarSlot::Scalar(key) => {
                    let v = x[off];
                    match key {
                        ScalarKey::Rate { band: Band::Private, i, k } => p.rp[i][k] = v,
                        ScalarKey::Rate { band: Band::Shared, i, k } => p.rs[i][k] = v,
                        ScalarKey::Wp(i) => p.wp[i] = v,
                        ScalarKey::Ws => p.ws = v,
                        _ => {
                            out.aux.insert(key, v);
                        }
                    }
                }
                VarSlot::Matrix(q) => {
                    let n = self.dims[var];
                    let m = herm_from_params(n, &x[off..off + herm_params(n)]);
                    match q {
                        Quantity::Vtil(i, k) => p.vtil[i][k] = m,
                        Quantity::Util(i, k) => p.util[i][k] = m,
                        Quantity::OmegaP(i, r) => p.omega_p[i][r] = m,
                        Quantity::OmegaS(i, r) => p.omega_s[i][r] = m,
                        Quantity::Sigma(i, r) => p.sigma[i][r] = m,
                        Quantity::Lambda(i) => {
                            let a = p.omega_s[i][0].nrows();
                            let b = n - a;
                            let ib = other(i);
                            p.omega_s[i][0] = m.view((0, 0), (a, a)).into_owned();
                            p.sigma[ib][0] = m.view((a, a), (b, b)).into_owned();
                            let theta = m.view((0, a), (a, b)).into_owned();
                            let t = p.theta.get_or_insert_with(|| {
                                [0, 1].map(|j| CMat::zeros(p.omega_s[j][0].nrows(), p.sigma[other(j)][0].nrows()))
                            });
                            t[i] = theta;
                        }
                    }
                }
            }
        }
        out
    }
}

/// `φ(v, v0)` of a scalar variable as an affine expression.
fn phi_var(idx: usize, v0: f64, what: ScalarKey) -> Result<AffineScalar> {
    if !(v0 > 0.0) || !v0.is_finite() {
        return Err(Error::Precondition(format!("expansion value of {what} must be positive, got {v0}")));
    }
    Ok(AffineScalar { constant: v0.ln() - 1.0, coeffs: vec![(idx, 1.0 / v0)] })
}

struct Builder<'a> {
    sp: ConvexSubproblem,
    layout: Layout,
    exp: &'a ExpansionPoint,
    config: &'a NetworkConfig,
}

impl Builder<'_> {
    fn add_scalar(&mut self, key: ScalarKey) -> usize {
        let id = self.sp.add_variable(key.to_string(), VarShape::Scalar);
        let off = self.sp.variables[id].offset;
        self.layout.slots.push(VarSlot::Scalar(key));
        self.layout.offsets.push(off);
        self.layout.dims.push(1);
        self.layout.scalars.insert(key, off);
        off
    }

    fn add_matrix(&mut self, q: Quantity, n: usize) {
        let id = self.sp.add_variable(quantity_name(q), VarShape::Hermitian(n));
        self.layout.slots.push(VarSlot::Matrix(q));
        self.layout.offsets.push(self.sp.variables[id].offset);
        self.layout.dims.push(n);
        self.layout.matrices.insert(q, id);
    }

    fn idx(&self, key: ScalarKey) -> usize {
        self.layout.scalars[&key]
    }

    fn phi(&self, key: ScalarKey) -> Result<AffineScalar> {
        let v0 = self
            .exp
            .value(key)
            .ok_or_else(|| Error::Precondition(format!("expansion lacks a value for {key}")))?;
        phi_var(self.idx(key), v0, key)
    }

    fn width_key(band: Band, i: usize) -> ScalarKey {
        match band {
            Band::Private => ScalarKey::Wp(i),
            Band::Shared => ScalarKey::Ws,
        }
    }

    fn push(&mut self, label: String, family: Family, kind: ConstraintKind) -> Result<()> {
        self.sp.push(Constraint::new(label, family, kind)?);
        Ok(())
    }

    fn compile(&self, e: &MatExpr) -> Result<AffineMatrix> {
        self.layout.compile(e, self.config)
    }

    /// `φ(M(x), M(x'))` with `M` the symbolic expression.
    fn linearized(&self, e: &MatExpr) -> Result<AffineScalar> {
        self.compile(e)?.linearize_logdet(&e.eval(&self.exp.point))
    }

    /// `φ(W) + φ(t) <= ln(budget)`.
    fn epigraph(&mut self, label: String, family: Family, w: ScalarKey, t: ScalarKey, budget: ScalarKey) -> Result<()> {
        let mut lhs = self.phi(w)?;
        lhs.add(&self.phi(t)?, 1.0);
        let b = AffineScalar::var(self.idx(budget), 1.0);
        self.push(label, family, ConstraintKind::LogSum { lhs: lhs.normalized(), logs: vec![(1.0, b)] })
    }

    /// `φ(S + N, S' + N') − ln2 · t <= ln det N`.
    fn majorant(&mut self, label: String, family: Family, e: &crate::metrics::PhiExpr, t: ScalarKey) -> Result<()> {
        let total = e.signal.plus(&e.noise);
        let mut lhs = self.linearized(&total)?;
        lhs.add_term(self.idx(t), -LN_2);
        let noise = self.compile(&e.noise)?;
        self.push(label, family, ConstraintKind::LogDet { lhs: lhs.normalized(), logdets: vec![(1.0, noise)] })
    }
}

/// Builds the convexified subproblem at `exp`. Channels and config must be in
/// the same (scaled) units as the expansion point.
pub fn build_subproblem(
    exp: &ExpansionPoint,
    ch: &StackedChannels,
    config: &NetworkConfig,
    options: SubproblemOptions,
) -> Result<(ConvexSubproblem, Layout)> {
    config.validate()?;
    exp.point.check_dims(config)?;
    let pooled = options.pooled();
    if pooled && options.mode == CompressionMode::Multivariate && config.n_rus != 1 {
        return Err(Error::UnsupportedMode("multivariate compression requires N_R = 1".into()));
    }
    let layout = Layout {
        options,
        slots: Vec::new(),
        scalars: BTreeMap::new(),
        matrices: BTreeMap::new(),
        offsets: Vec::new(),
        dims: Vec::new(),
        n: 0,
    };
    let mut b = Builder { sp: ConvexSubproblem::new(), layout, exp, config };
    let bands: Vec<Band> = if pooled { vec![Band::Private, Band::Shared] } else { vec![Band::Private] };
    let nu = config.n_ues;
    let nr = config.n_rus;

    // scalar variables
    for i in 0..N_OPERATORS {
        for k in 0..nu {
            for &band in &bands {
                if !rate_removed(ch, band, i, k) {
                    b.add_scalar(ScalarKey::Rate { band, i, k });
                }
            }
        }
    }
    for i in 0..N_OPERATORS {
        b.add_scalar(ScalarKey::Wp(i));
    }
    if pooled {
        b.add_scalar(ScalarKey::Ws);
    }
    for i in 0..N_OPERATORS {
        for k in 0..nu {
            for &band in &bands {
                if !rate_removed(ch, band, i, k) {
                    b.add_scalar(ScalarKey::RateEpi { band, i, k });
                }
            }
        }
    }
    for i in 0..N_OPERATORS {
        for r in 0..nr {
            for &band in &bands {
                b.add_scalar(ScalarKey::FrontEpi { band, i, r });
                b.add_scalar(ScalarKey::FrontBudget { band, i, r });
            }
            if pooled {
                b.add_scalar(ScalarKey::BackEpi { i, r });
                b.add_scalar(ScalarKey::BackBudget { i, r });
            }
        }
    }
    if pooled {
        for i in 0..N_OPERATORS {
            for k in 0..nu {
                b.add_scalar(ScalarKey::PrivEpi { i, k });
            }
        }
    }
    for i in 0..N_OPERATORS {
        for r in 0..nr {
            for &band in &bands {
                b.add_scalar(ScalarKey::PowerEpi { band, i, r });
                b.add_scalar(ScalarKey::PowerBudget { band, i, r });
            }
        }
    }

    // matrix variables
    for i in 0..N_OPERATORS {
        for k in 0..nu {
            b.add_matrix(Quantity::Vtil(i, k), config.n_ru_total(i));
        }
        if pooled {
            for k in 0..nu {
                b.add_matrix(Quantity::Util(i, k), config.n_stacked(i));
            }
        }
    }
    for i in 0..N_OPERATORS {
        for r in 0..nr {
            b.add_matrix(Quantity::OmegaP(i, r), config.n_ant_ru[i][r]);
        }
    }
    if options.lambda_vars() {
        for i in 0..N_OPERATORS {
            b.add_matrix(Quantity::Lambda(i), config.n_ant_ru[i][0] + config.n_ant_ru[other(i)][0]);
        }
    } else if pooled {
        for i in 0..N_OPERATORS {
            for r in 0..nr {
                b.add_matrix(Quantity::OmegaS(i, r), config.n_ant_ru[i][r]);
            }
        }
        for i in 0..N_OPERATORS {
            for r in 0..nr {
                b.add_matrix(Quantity::Sigma(i, r), config.n_ant_ru[i][r]);
            }
        }
    }

    // objective
    let mut obj = AffineScalar::default();
    for (key, &idx) in &b.layout.scalars {
        if matches!(key, ScalarKey::Rate { .. }) {
            obj.add_term(idx, 1.0);
        }
    }
    b.sp.objective = obj.normalized();

    // rates
    for i in 0..N_OPERATORS {
        for k in 0..nu {
            for &band in &bands {
                if rate_removed(ch, band, i, k) {
                    continue;
                }
                let rk = ScalarKey::Rate { band, i, k };
                let tk = ScalarKey::RateEpi { band, i, k };
                let w = Builder::width_key(band, i);
                let lhs = b.phi(rk)?;
                let logs = vec![(1.0, AffineScalar::var(b.idx(w), 1.0)), (1.0, AffineScalar::var(b.idx(tk), 1.0))];
                b.push(format!("rate epigraph {rk}"), Family::RateEpigraph, ConstraintKind::LogSum { lhs, logs })?;

                let e = match band {
                    Band::Private => exprs::rate_private(i, k, ch)?,
                    Band::Shared => exprs::rate_shared(i, k, ch, options.mode)?,
                };
                let mut lhs = b.linearized(&e.noise)?;
                lhs.add_term(b.idx(tk), LN_2);
                let total = b.compile(&e.signal.plus(&e.noise))?;
                b.push(
                    format!("rate minorant {tk}"),
                    Family::RateMinorant,
                    ConstraintKind::LogDet { lhs: lhs.normalized(), logdets: vec![(1.0, total)] },
                )?;
            }
        }
    }

    // fronthaul
    for i in 0..N_OPERATORS {
        for r in 0..nr {
            let mut budget = AffineScalar::constant(-config.fronthaul_capacity[i][r]);
            for &band in &bands {
                budget.add_term(b.idx(ScalarKey::FrontBudget { band, i, r }), 1.0);
            }
            if pooled {
                budget.add_term(b.idx(ScalarKey::BackBudget { i, r }), 1.0);
            }
            b.push(format!("fronthaul budget [{i}][{r}]"), Family::FronthaulBudget, ConstraintKind::Inequality(budget.normalized()))?;
            for &band in &bands {
                let t = ScalarKey::FrontEpi { band, i, r };
                let g = ScalarKey::FrontBudget { band, i, r };
                b.epigraph(format!("fronthaul epigraph {g}"), Family::FronthaulEpigraph, Builder::width_key(band, i), t, g)?;
                let e = exprs::fronthaul(i, r, band, config)?;
                b.majorant(format!("fronthaul majorant {t}"), Family::FronthaulMajorant, &e, t)?;
            }
            if pooled {
                let t = ScalarKey::BackEpi { i, r };
                let g = ScalarKey::BackBudget { i, r };
                b.epigraph(format!("backhaul epigraph {g}"), Family::BackhaulEpigraph, ScalarKey::Ws, t, g)?;
                let e = exprs::backhaul(i, r, config)?;
                b.majorant(format!("backhaul majorant {t}"), Family::BackhaulMajorant, &e, t)?;
            }
        }
    }
    if pooled {
        for i in 0..N_OPERATORS {
            let mut a = AffineScalar::constant(-config.backhaul_capacity[i]);
            for r in 0..nr {
                a.add_term(b.idx(ScalarKey::BackBudget { i: other(i), r }), 1.0);
            }
            b.push(format!("backhaul budget of CP {i}"), Family::BackhaulBudget, ConstraintKind::Inequality(a.normalized()))?;
        }
        for i in 0..N_OPERATORS {
            for k in 0..nu {
                let t = ScalarKey::PrivEpi { i, k };
                let mut a = b.phi(ScalarKey::Ws)?;
                a.add(&b.phi(t)?, 1.0);
                a.constant -= config.privacy_threshold.ln();
                b.push(format!("privacy epigraph {t}"), Family::PrivacyEpigraph, ConstraintKind::Inequality(a.normalized()))?;
                let e = exprs::privacy(i, k, config)?;
                b.majorant(format!("privacy majorant {t}"), Family::PrivacyMajorant, &e, t)?;
            }
        }
    }

    // power
    for i in 0..N_OPERATORS {
        for r in 0..nr {
            let mut a = AffineScalar::constant(-config.max_power[i][r]);
            for &band in &bands {
                a.add_term(b.idx(ScalarKey::PowerBudget { band, i, r }), 1.0);
            }
            b.push(format!("power budget [{i}][{r}]"), Family::PowerBudget, ConstraintKind::Inequality(a.normalized()))?;
            for &band in &bands {
                let t = ScalarKey::PowerEpi { band, i, r };
                let p = ScalarKey::PowerBudget { band, i, r };
                b.epigraph(format!("power epigraph {p}"), Family::PowerEpigraph, Builder::width_key(band, i), t, p)?;
                let mut lin = b.compile(&exprs::power(i, r, band, config)?)?.trace();
                lin.add_term(b.idx(t), -1.0);
                b.push(format!("power linear {t}"), Family::PowerLinear, ConstraintKind::Inequality(lin.normalized()))?;
            }
        }
    }

    // bandwidth
    let mut bw = AffineScalar::constant(-config.total_bandwidth);
    bw.add_term(b.idx(ScalarKey::Wp(0)), 1.0).add_term(b.idx(ScalarKey::Wp(1)), 1.0);
    if pooled {
        bw.add_term(b.idx(ScalarKey::Ws), 1.0);
    }
    b.push("bandwidth sum".into(), Family::Bandwidth, ConstraintKind::Equality(bw.normalized()))?;
    let fixed: Vec<(ScalarKey, f64)> = match options.scheme {
        BandwidthScheme::Optimized => vec![],
        BandwidthScheme::EqualSplit => {
            let w = config.total_bandwidth / 3.0;
            vec![(ScalarKey::Wp(0), w), (ScalarKey::Wp(1), w), (ScalarKey::Ws, w)]
        }
        BandwidthScheme::NoPooling => {
            let w = config.total_bandwidth / 2.0;
            vec![(ScalarKey::Wp(0), w), (ScalarKey::Wp(1), w)]
        }
    };
    for (key, w) in fixed {
        let mut a = AffineScalar::constant(-w);
        a.add_term(b.idx(key), 1.0);
        b.push(format!("scheme fixes {key}"), Family::SchemeEquality, ConstraintKind::Equality(a))?;
    }

    // positivity margins
    let margins: Vec<ScalarKey> = b
        .layout
        .scalars
        .keys()
        .filter(|k| matches!(k, ScalarKey::Rate { .. } | ScalarKey::Wp(_) | ScalarKey::Ws))
        .copied()
        .collect();
    for key in margins {
        let mut a = AffineScalar::constant(options.lower_bound);
        a.add_term(b.idx(key), -1.0);
        b.push(format!("{key} lower bound"), Family::LowerBound, ConstraintKind::Inequality(a))?;
    }

    // joint compression; with Θ frozen at zero it is the sum of the two
    // per-link majorants above and adds nothing
    if options.lambda_vars() {
        for i in 0..N_OPERATORS {
            let (x, y, lam) = exprs::joint(i, config)?;
            let mut lhs = b.linearized(&x)?;
            lhs.add(&b.linearized(&y)?, 1.0);
            lhs.add_term(b.idx(ScalarKey::FrontEpi { band: Band::Shared, i, r: 0 }), -LN_2);
            lhs.add_term(b.idx(ScalarKey::BackEpi { i: other(i), r: 0 }), -LN_2);
            let lam = b.compile(&lam)?;
            b.push(
                format!("joint compression of CP {i}"),
                Family::MultivariateJoint,
                ConstraintKind::LogDet { lhs: lhs.normalized(), logdets: vec![(1.0, lam)] },
            )?;
        }
    }

    // semidefinite memberships
    let mvars: Vec<(Quantity, usize)> = b.layout.matrices.iter().map(|(&q, &v)| (q, v)).collect();
    for (q, var) in mvars {
        let n = b.layout.dims[var];
        let mut e = MatExpr::new(n, 0.0);
        e.push(CMat::identity(n, n), q);
        let expr = b.compile(&e)?;
        let floor = match q {
            Quantity::Vtil(..) | Quantity::Util(..) => 0.0,
            _ => options.floor,
        };
        b.push(format!("{} psd", quantity_name(q)), Family::Psd, ConstraintKind::Psd { expr, floor })?;
    }

    b.sp.certify()?;
    b.layout.n = b.sp.n;
    Ok((b.sp, b.layout))
}
