//! Primal log-barrier interior-point method for the shapes of
//! [`ConvexSubproblem`]: affine (in)equalities, `affine <= Σ log(affine)`,
//! `affine <= Σ logdet(affine matrix)` and PSD memberships.
//!
//! Every inequality `F(x) >= 0` with `F` concave gets the barrier `−ln F`;
//! PSD memberships get `−ln det(M(x) − floor·I)`. Equalities are handled in
//! the Newton KKT system. A phase-I problem with a common shift variable is
//! solved first whenever the start is not strictly feasible.

use log::{debug, trace};
use nalgebra::{Cholesky, DMatrix, DVector};

use super::{SolveStatus, SubproblemResult, SubproblemSolver};
use crate::dcp::{AffineMatrix, AffineScalar, Constraint, ConstraintKind, ConvexSubproblem, Family};
use crate::error::Result;
use crate::linalg::{cholesky_hpd, inv_from_cholesky, ln_det_from_cholesky, CMat, C64};

#[derive(Clone, Debug)]
pub struct BarrierSolver {
    /// Stop once `m / t <= tol · (1 + |objective|)`.
    pub tol: f64,
    /// Barrier parameter growth factor.
    pub mu: f64,
    /// Total Newton step budget (phase I and II each).
    pub max_newton: usize,
}

impl Default for BarrierSolver {
    fn default() -> Self {
        Self { tol: 1e-9, mu: 20.0, max_newton: 800 }
    }
}

/// Local (dense) view of one matrix-valued affine expression.
struct LocalMat {
    c: CMat,
    d: Vec<(usize, CMat)>,
}

enum Shape {
    /// `F = −(c + a·x)`.
    Affine { a: Vec<(usize, f64)>, c: f64 },
    /// `F = Σ w_j ln(b_j) − lhs`.
    LogSum { lhs: Vec<(usize, f64)>, lhs_c: f64, logs: Vec<(f64, Vec<(usize, f64)>, f64)> },
    /// `F = Σ w_j ln det M_j − lhs`.
    LogDet { lhs: Vec<(usize, f64)>, lhs_c: f64, mats: Vec<(f64, LocalMat)> },
    /// Barrier `−ln det M`.
    Psd(LocalMat),
}

struct Compiled {
    /// Local index -> global index.
    idx: Vec<usize>,
    shape: Shape,
    degree: usize,
}

struct Local {
    value: f64,
    grad: DVector<f64>,
    hess: DMatrix<f64>,
}

fn localize(idx: &[usize], coeffs: &[(usize, f64)]) -> Vec<(usize, f64)> {
    coeffs.iter().map(|&(g, c)| (idx.binary_search(&g).expect("index collected"), c)).collect()
}

fn localize_mat(idx: &[usize], m: &AffineMatrix, floor: f64) -> LocalMat {
    let mut c = m.constant.clone();
    if floor != 0.0 {
        for p in 0..m.dim {
            c[(p, p)] -= C64::new(floor, 0.0);
        }
    }
    LocalMat { c, d: m.coeffs.iter().map(|(g, d)| (idx.binary_search(g).expect("index collected"), d.clone())).collect() }
}

fn compile(c: &Constraint) -> Option<Compiled> {
    let mut idx: Vec<usize> = Vec::new();
    let mut take = |a: &AffineScalar| idx.extend(a.coeffs.iter().map(|&(i, _)| i));
    match &c.kind {
        ConstraintKind::Equality(_) => return None,
        ConstraintKind::Inequality(a) => take(a),
        ConstraintKind::LogSum { lhs, logs } => {
            take(lhs);
            logs.iter().for_each(|(_, b)| take(b));
        }
        ConstraintKind::LogDet { lhs, logdets } => {
            take(lhs);
            for (_, m) in logdets {
                idx.extend(m.coeffs.iter().map(|(i, _)| *i));
            }
        }
        ConstraintKind::Psd { expr, .. } => idx.extend(expr.coeffs.iter().map(|(i, _)| *i)),
    }
    idx.sort_unstable();
    idx.dedup();
    let shape = match &c.kind {
        ConstraintKind::Equality(_) => unreachable!(),
        ConstraintKind::Inequality(a) => Shape::Affine { a: localize(&idx, &a.coeffs), c: a.constant },
        ConstraintKind::LogSum { lhs, logs } => Shape::LogSum {
            lhs: localize(&idx, &lhs.coeffs),
            lhs_c: lhs.constant,
            logs: logs.iter().map(|(w, b)| (*w, localize(&idx, &b.coeffs), b.constant)).collect(),
        },
        ConstraintKind::LogDet { lhs, logdets } => Shape::LogDet {
            lhs: localize(&idx, &lhs.coeffs),
            lhs_c: lhs.constant,
            mats: logdets.iter().map(|(w, m)| (*w, localize_mat(&idx, m, 0.0))).collect(),
        },
        ConstraintKind::Psd { expr, floor } => Shape::Psd(localize_mat(&idx, expr, *floor)),
    };
    Some(Compiled { idx, shape, degree: c.barrier_degree() })
}

fn affine(coeffs: &[(usize, f64)], c: f64, x: &[f64]) -> f64 {
    c + coeffs.iter().map(|&(i, a)| a * x[i]).sum::<f64>()
}

fn mat_eval(m: &LocalMat, x: &[f64]) -> CMat {
    let mut out = m.c.clone();
    for (i, d) in &m.d {
        if x[*i] != 0.0 {
            out += d.scale(x[*i]);
        }
    }
    out
}

/// `ln det M` and, when asked, gradient `Re tr(K D_t)` and Hessian `−Re tr(K D_t K D_u)`.
fn logdet(m: &LocalMat, x: &[f64], n: usize, derivs: bool) -> Option<(f64, Option<(DVector<f64>, DMatrix<f64>)>)> {
    let mv = mat_eval(m, x);
    let l = cholesky_hpd(&mv)?;
    let ld = ln_det_from_cholesky(&l);
    if !ld.is_finite() {
        return None;
    }
    if !derivs {
        return Some((ld, None));
    }
    let k = inv_from_cholesky(&l);
    let dim = k.nrows();
    let t = m.d.len();
    let mut grad = DVector::zeros(n);
    let mut p = DMatrix::<C64>::zeros(t, dim * dim);
    let mut q = DMatrix::<C64>::zeros(dim * dim, t);
    for (row, (i, d)) in m.d.iter().enumerate() {
        let a = &k * d;
        let mut tr = 0.0;
        for r in 0..dim {
            tr += a[(r, r)].re;
            for s in 0..dim {
                p[(row, r * dim + s)] = a[(r, s)];
                q[(s * dim + r, row)] = a[(r, s)];
            }
        }
        grad[*i] += tr;
    }
    let pq = p * q;
    let mut hess = DMatrix::zeros(n, n);
    for (a, (i, _)) in m.d.iter().enumerate() {
        for (b, (j, _)) in m.d.iter().enumerate() {
            hess[(*i, *j)] -= pq[(a, b)].re;
        }
    }
    Some((ld, Some((grad, hess))))
}

impl Compiled {
    /// Barrier value, optionally with local gradient and Hessian; `None` outside the domain.
    fn eval(&self, xg: &[f64], derivs: bool) -> Option<Local> {
        let x: Vec<f64> = self.idx.iter().map(|&g| xg[g]).collect();
        let n = x.len();
        // F and its derivatives; PSD handled directly
        let (f, gf, hf) = match &self.shape {
            Shape::Psd(m) => {
                let (ld, d) = logdet(m, &x, n, derivs)?;
                return Some(match d {
                    Some((g, h)) => Local { value: -ld, grad: -g, hess: -h },
                    None => Local { value: -ld, grad: DVector::zeros(0), hess: DMatrix::zeros(0, 0) },
                });
            }
            Shape::Affine { a, c } => {
                let f = -affine(a, *c, &x);
                let mut g = DVector::zeros(if derivs { n } else { 0 });
                if derivs {
                    a.iter().for_each(|&(i, v)| g[i] -= v);
                }
                (f, g, None)
            }
            Shape::LogSum { lhs, lhs_c, logs } => {
                let mut f = -affine(lhs, *lhs_c, &x);
                let mut g = DVector::zeros(if derivs { n } else { 0 });
                let mut h = DMatrix::zeros(if derivs { n } else { 0 }, if derivs { n } else { 0 });
                if derivs {
                    lhs.iter().for_each(|&(i, v)| g[i] -= v);
                }
                for (w, b, c) in logs {
                    let bv = affine(b, *c, &x);
                    if !(bv > 0.0) {
                        return None;
                    }
                    f += w * bv.ln();
                    if derivs {
                        for &(i, ai) in b {
                            g[i] += w * ai / bv;
                            for &(j, aj) in b {
                                h[(i, j)] -= w * ai * aj / (bv * bv);
                            }
                        }
                    }
                }
                (f, g, Some(h))
            }
            Shape::LogDet { lhs, lhs_c, mats } => {
                let mut f = -affine(lhs, *lhs_c, &x);
                let mut g = DVector::zeros(if derivs { n } else { 0 });
                let mut h = DMatrix::zeros(if derivs { n } else { 0 }, if derivs { n } else { 0 });
                if derivs {
                    lhs.iter().for_each(|&(i, v)| g[i] -= v);
                }
                for (w, m) in mats {
                    let (ld, d) = logdet(m, &x, n, derivs)?;
                    f += w * ld;
                    if let Some((gm, hm)) = d {
                        g.axpy(*w, &gm, 1.0);
                        h += hm * *w;
                    }
                }
                (f, g, Some(h))
            }
        };
        if !(f > 0.0) || !f.is_finite() {
            return None;
        }
        if !derivs {
            return Some(Local { value: -f.ln(), grad: DVector::zeros(0), hess: DMatrix::zeros(0, 0) });
        }
        let grad = -&gf / f;
        let mut hess = (&gf * gf.transpose()) / (f * f);
        if let Some(hf) = hf {
            hess -= hf / f;
        }
        Some(Local { value: -f.ln(), grad, hess })
    }
}

/// Independent rows of the equality system `A x = b`.
struct Equalities {
    a: DMatrix<f64>,
    b: DVector<f64>,
}

impl Equalities {
    fn new(sp: &ConvexSubproblem) -> Self {
        let mut rows: Vec<DVector<f64>> = Vec::new();
        let mut basis: Vec<DVector<f64>> = Vec::new();
        let mut rhs = Vec::new();
        for c in &sp.constraints {
            if let ConstraintKind::Equality(a) = &c.kind {
                let mut row = DVector::zeros(sp.n);
                a.coeffs.iter().for_each(|&(i, v)| row[i] += v);
                // Gram-Schmidt against accepted rows
                let mut r = row.clone();
                for q in &basis {
                    r -= q * q.dot(&r);
                }
                let nr = r.norm();
                if nr > 1e-10 * row.norm().max(1e-300) {
                    basis.push(r / nr);
                    rows.push(row);
                    rhs.push(-a.constant);
                }
            }
        }
        let mut a = DMatrix::zeros(rows.len(), sp.n);
        for (k, r) in rows.iter().enumerate() {
            a.set_row(k, &r.transpose());
        }
        Self { a, b: DVector::from_vec(rhs) }
    }

    fn residual(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.a * x - &self.b
    }

    /// Least-squares projection onto `A x = b`.
    fn project(&self, x: &mut DVector<f64>) {
        if self.a.nrows() == 0 {
            return;
        }
        let r = self.residual(x);
        let aat = &self.a * self.a.transpose();
        if let Some(ch) = Cholesky::new(aat) {
            *x -= self.a.transpose() * ch.solve(&r);
        }
    }
}

struct Problem<'a> {
    cons: Vec<Compiled>,
    c: DVector<f64>,
    eq: Equalities,
    m: f64,
    n: usize,
    sp: &'a ConvexSubproblem,
}

impl<'a> Problem<'a> {
    fn new(sp: &'a ConvexSubproblem) -> Self {
        let cons: Vec<Compiled> = sp.constraints.iter().filter_map(compile).collect();
        let m = cons.iter().map(|c| c.degree as f64).sum::<f64>().max(1.0);
        let mut c = DVector::zeros(sp.n);
        sp.objective.coeffs.iter().for_each(|&(i, v)| c[i] += v);
        Self { cons, c, eq: Equalities::new(sp), m, n: sp.n, sp }
    }

    fn objective(&self, x: &DVector<f64>) -> f64 {
        self.sp.objective.constant + self.c.dot(x)
    }

    fn value(&self, x: &DVector<f64>, t: f64) -> Option<f64> {
        let xs = x.as_slice();
        let mut v = -t * self.c.dot(x);
        for c in &self.cons {
            v += c.eval(xs, false)?.value;
        }
        v.is_finite().then_some(v)
    }

    fn derivatives(&self, x: &DVector<f64>, t: f64) -> Option<(f64, DVector<f64>, DMatrix<f64>)> {
        let xs = x.as_slice();
        let mut v = -t * self.c.dot(x);
        let mut g = -&self.c * t;
        let mut h = DMatrix::zeros(self.n, self.n);
        for c in &self.cons {
            let l = c.eval(xs, true)?;
            v += l.value;
            for (a, &ga) in c.idx.iter().enumerate() {
                g[ga] += l.grad[a];
                for (b, &gb) in c.idx.iter().enumerate() {
                    h[(ga, gb)] += l.hess[(a, b)];
                }
            }
        }
        Some((v, g, h))
    }

    /// Equality-constrained Newton step.
    fn newton_step(&self, x: &DVector<f64>, g: &DVector<f64>, h: &DMatrix<f64>) -> Option<DVector<f64>> {
        let n = self.n;
        let s = DVector::from_iterator(n, (0..n).map(|i| 1.0 / h[(i, i)].max(1e-300).sqrt()));
        let mut hs = h.clone();
        for i in 0..n {
            for j in 0..n {
                hs[(i, j)] *= s[i] * s[j];
            }
        }
        let mut reg = 0.0;
        let chol = loop {
            let mut m = hs.clone();
            for i in 0..n {
                m[(i, i)] += reg;
            }
            if let Some(c) = Cholesky::new(m) {
                break c;
            }
            reg = if reg == 0.0 { 1e-14 } else { reg * 100.0 };
            if reg > 1.0 {
                return None;
            }
        };
        let solve = |v: &DVector<f64>| -> DVector<f64> { s.component_mul(&chol.solve(&s.component_mul(v))) };
        let hg = solve(g);
        let p = self.eq.a.nrows();
        if p == 0 {
            return Some(-hg);
        }
        let at = self.eq.a.transpose();
        let mut y = DMatrix::zeros(n, p);
        for k in 0..p {
            y.set_column(k, &solve(&at.column(k).into_owned()));
        }
        let schur = &self.eq.a * &y;
        let r = self.eq.residual(x);
        let rhs = r - &self.eq.a * &hg;
        let nu = schur.lu().solve(&rhs)?;
        Some(-(hg + y * nu))
    }

    /// Barrier method from a strictly feasible `x`. `stop` is checked after
    /// every Newton step.
    fn run(&self, mut x: DVector<f64>, tol: f64, mu: f64, max_newton: usize, stop: &dyn Fn(&DVector<f64>) -> bool) -> (SolveStatus, DVector<f64>, usize) {
        let mut t = self.m / self.objective(&x).abs().max(1.0);
        let mut steps = 0;
        loop {
            // centering
            let mut stalled = false;
            loop {
                if steps >= max_newton {
                    return (SolveStatus::IterationLimit, x, steps);
                }
                let Some((v, g, h)) = self.derivatives(&x, t) else {
                    return (SolveStatus::NumericalFailure, x, steps);
                };
                let Some(dx) = self.newton_step(&x, &g, &h) else {
                    stalled = true;
                    break;
                };
                let slope = g.dot(&dx);
                let lambda2 = -slope;
                if !lambda2.is_finite() {
                    stalled = true;
                    break;
                }
                // the barrier value carries rounding noise of order eps·|v|
                let floor = 1e-10_f64.max(1e-15 * v.abs());
                if lambda2 / 2.0 <= floor {
                    break;
                }
                let mut alpha = 1.0;
                let accepted = loop {
                    let xn = &x + &dx * alpha;
                    if let Some(vn) = self.value(&xn, t) {
                        if vn <= v + 0.01 * alpha * slope.min(0.0) {
                            break Some(xn);
                        }
                    }
                    alpha *= 0.5;
                    if alpha < 1e-14 {
                        break None;
                    }
                };
                steps += 1;
                trace!("  newton {steps}: lambda2={lambda2:.3e} alpha={alpha:.3e} v={v:.12e}");
                match accepted {
                    Some(xn) => x = xn,
                    None if lambda2 <= 1e-6 => break,
                    None => {
                        stalled = true;
                        break;
                    }
                }
                // a damped step on an almost-centered point only chases rounding noise
                if alpha < 0.1 && lambda2 <= 1e-6 {
                    break;
                }
                // vanishing steps: the Newton direction is dominated by rounding
                if alpha < 1e-6 {
                    stalled = true;
                    break;
                }
                if stop(&x) {
                    return (SolveStatus::Optimal, x, steps);
                }
                if self.objective(&x) > 1e15 {
                    return (SolveStatus::Unbounded, x, steps);
                }
            }
            let gap = self.m / t;
            let scale = 1.0 + self.objective(&x).abs();
            trace!("barrier t={t:.3e} gap={gap:.3e} obj={:.9e} steps={steps}", self.objective(&x));
            if gap <= tol * scale {
                return (SolveStatus::Optimal, x, steps);
            }
            if stalled {
                // precision floor of the centering: accept if already close
                let status = if gap <= 1e-6 * scale { SolveStatus::Optimal } else { SolveStatus::NumericalFailure };
                debug!("barrier stalled at gap {gap:.3e} -> {status:?}");
                return (status, x, steps);
            }
            t *= mu;
        }
    }
}

/// Phase-I problem: every inequality shifted by a common `s`, minimize `s >= −1`.
fn phase_one(sp: &ConvexSubproblem) -> ConvexSubproblem {
    let s = sp.n;
    let mut out = sp.clone();
    out.n += 1;
    out.objective = AffineScalar::var(s, -1.0);
    for c in &mut out.constraints {
        match &mut c.kind {
            ConstraintKind::Equality(_) => {}
            ConstraintKind::Inequality(a) => {
                a.add_term(s, -1.0);
            }
            ConstraintKind::LogSum { lhs, .. } | ConstraintKind::LogDet { lhs, .. } => {
                lhs.add_term(s, -1.0);
            }
            ConstraintKind::Psd { expr, .. } => expr.coeffs.push((s, CMat::identity(expr.dim, expr.dim))),
        }
    }
    out.constraints.push(Constraint {
        label: "phase one shift bound".into(),
        family: Family::Psd,
        kind: ConstraintKind::Inequality(AffineScalar { constant: -1.0, coeffs: vec![(s, -1.0)] }),
    });
    out
}

impl BarrierSolver {
    fn find_interior(&self, sp: &ConvexSubproblem, x0: DVector<f64>) -> std::result::Result<(DVector<f64>, usize), SolveStatus> {
        let worst = sp
            .constraints
            .iter()
            .filter(|c| !c.is_equality())
            .map(|c| c.violation(x0.as_slice()))
            .fold(0.0_f64, f64::max);
        if !worst.is_finite() {
            // outside the log domains: the shift cannot repair this
            return Err(SolveStatus::NumericalFailure);
        }
        let aug = phase_one(sp);
        let prob = Problem::new(&aug);
        let mut z = DVector::zeros(aug.n);
        z.rows_mut(0, sp.n).copy_from(&x0);
        z[sp.n] = worst + 1.0;
        prob.eq.project(&mut z);
        let n = sp.n;
        let stop = |z: &DVector<f64>| z[n] < 0.0 && sp.is_strictly_feasible(&z.as_slice()[..n], f64::INFINITY);
        let (status, z, steps) = prob.run(z, self.tol, self.mu, self.max_newton, &stop);
        let x = z.rows(0, n).into_owned();
        if sp.is_strictly_feasible(x.as_slice(), f64::INFINITY) {
            Ok((x, steps))
        } else if status == SolveStatus::Optimal {
            Err(SolveStatus::Infeasible)
        } else {
            Err(status)
        }
    }
}

impl SubproblemSolver for BarrierSolver {
    fn solve(&self, sp: &ConvexSubproblem, x0: &[f64]) -> Result<SubproblemResult> {
        let prob = Problem::new(sp);
        let mut x = DVector::from_column_slice(x0);
        prob.eq.project(&mut x);
        let mut steps = 0;
        // the start has just been projected onto the equalities
        if !sp.is_strictly_feasible(x.as_slice(), f64::INFINITY) {
            debug!("start not strictly feasible (max violation {:.3e}); running phase I", sp.max_violation(x.as_slice()));
            match self.find_interior(sp, x) {
                Ok((xi, s)) => {
                    x = xi;
                    steps += s;
                }
                Err(status) => {
                    return Ok(SubproblemResult { status, objective: f64::NAN, x: x0.to_vec(), iterations: steps });
                }
            }
        }
        let (status, x, s) = prob.run(x, self.tol, self.mu, self.max_newton, &|_| false);
        steps += s;
        Ok(SubproblemResult { status, objective: prob.objective(&x), x: x.as_slice().to_vec(), iterations: steps })
    }
}
