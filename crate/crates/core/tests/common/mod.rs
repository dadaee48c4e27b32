#![allow(dead_code)]

pub mod functional;
pub mod laws;

use cranpool::linalg::{cidentity, complex_gaussian, random_psd, CMat, C64};
use cranpool::metrics::DesignPoint;
use cranpool::model::{other, ChannelRealization, Positions, StackedChannels};
use cranpool::{CompressionMode, NetworkConfig};
use nalgebra::DVector;
use rand::Rng;

pub fn scalar(v: f64) -> CMat {
    CMat::from_element(1, 1, C64::new(v, 0.0))
}

pub fn diag(v: &[f64]) -> CMat {
    CMat::from_diagonal(&DVector::from_iterator(v.len(), v.iter().map(|&x| C64::new(x, 0.0))))
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-12)
}

fn origin_positions(cfg: &NetworkConfig) -> Positions {
    Positions {
        ru: [vec![[0.0; 2]; cfg.n_rus], vec![[0.0; 2]; cfg.n_rus]],
        ue: [vec![[0.0; 2]; cfg.n_ues], vec![[0.0; 2]; cfg.n_ues]],
    }
}

/// Single-antenna scenario with every channel coefficient equal to `h`.
pub fn constant_siso(n_ues: usize, h: f64) -> (NetworkConfig, StackedChannels) {
    let cfg = NetworkConfig::uniform(1, n_ues, 1, 1, 100.0, 50.0, 10.0, 10.0, 20.0);
    let ch = ChannelRealization::from_fn(&cfg, origin_positions(&cfg), 0, |_, _, _, _| scalar(h)).unwrap();
    let st = StackedChannels::new(&cfg, &ch).unwrap();
    (cfg, st)
}

/// Unit-variance Gaussian channels of the given shape, no path loss.
pub fn gaussian_scenario<R: Rng>(n_rus: usize, n_ues: usize, ant_ru: usize, ant_ue: usize, rng: &mut R) -> (NetworkConfig, StackedChannels) {
    let cfg = NetworkConfig::uniform(n_rus, n_ues, ant_ru, ant_ue, 100.0, 50.0, 10.0, 10.0, 20.0);
    let ch = ChannelRealization::from_fn(&cfg, origin_positions(&cfg), 0, |i, k, j, r| {
        complex_gaussian(cfg.n_ant_ue[i][k], cfg.n_ant_ru[j][r], &mut *rng)
    })
    .unwrap();
    let st = StackedChannels::new(&cfg, &ch).unwrap();
    (cfg, st)
}

/// PD matrix with eigenvalues bounded below by `floor`.
pub fn random_pd<R: Rng>(n: usize, floor: f64, rng: &mut R) -> CMat {
    random_psd(n, rng) + cidentity(n).scale(floor)
}

/// Random design point with PD quantization covariances; in multivariate mode
/// `Θ_i` is scaled so that `Λ_i` stays PD.
pub fn random_point<R: Rng>(cfg: &NetworkConfig, mode: CompressionMode, rng: &mut R) -> DesignPoint {
    let mut p = DesignPoint::zeros(cfg, 0.0, mode);
    for i in 0..2 {
        for k in 0..cfg.n_ues {
            p.vtil[i][k] = random_psd(cfg.n_ru_total(i), rng);
            p.util[i][k] = random_psd(cfg.n_stacked(i), rng);
        }
        for r in 0..cfg.n_rus {
            let n = cfg.n_ant_ru[i][r];
            p.omega_p[i][r] = random_pd(n, 0.1, rng);
            p.omega_s[i][r] = random_pd(n, 0.1, rng);
            p.sigma[i][r] = random_pd(n, 0.1, rng);
        }
    }
    if let Some(theta) = &mut p.theta {
        for i in 0..2 {
            let (a, b) = (cfg.n_ant_ru[i][0], cfg.n_ant_ru[other(i)][0]);
            let t = complex_gaussian(a, b, rng);
            // ‖Θ‖ below sqrt(λmin(Ω) λmin(Σ)) keeps Λ PD; the Frobenius norm bounds the spectral one
            let lo = cranpool::linalg::min_eigenvalue(&p.omega_s[i][0]).min(cranpool::linalg::min_eigenvalue(&p.sigma[other(i)][0]));
            let fro = t.norm();
            let s: f64 = rng.random_range(0.0..0.95);
            theta[i] = t.scale(s * lo / fro.max(1e-12));
        }
    }
    p.wp = [3.0, 4.0];
    p.ws = 3.0;
    p
}

/// `log2 det` through the nalgebra Cholesky factor.
pub fn log2det(m: &CMat) -> f64 {
    let l = m.clone().cholesky().expect("positive definite").unpack();
    2.0 * l.diagonal().iter().map(|d| d.re.ln()).sum::<f64>() / std::f64::consts::LN_2
}

pub fn block(m: &CMat, off: usize, n: usize) -> CMat {
    m.view((off, off), (n, n)).into_owned()
}

pub fn sum(ms: &[CMat]) -> CMat {
    ms.iter().skip(1).fold(ms[0].clone(), |acc, m| acc + m)
}

/// Block-diagonal matrix assembled entry by entry.
pub fn blockdiag(blocks: &[&CMat]) -> CMat {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMat::zeros(n, n);
    let mut off = 0;
    for b in blocks {
        for r in 0..b.nrows() {
            for c in 0..b.ncols() {
                out[(off + r, off + c)] = b[(r, c)];
            }
        }
        off += b.nrows();
    }
    out
}

/// Permutation taking operator `i`'s stacked order (own RUs, then the other
/// operator's) to the global order (operator 0, then operator 1).
pub fn to_global(cfg: &NetworkConfig, i: usize) -> CMat {
    let (n0, n1) = (cfg.n_ru_total(0), cfg.n_ru_total(1));
    let n = n0 + n1;
    if i == 0 {
        return cidentity(n);
    }
    let mut p = CMat::zeros(n, n);
    for c in 0..n1 {
        p[(n0 + c, c)] = C64::new(1.0, 0.0);
    }
    for c in 0..n0 {
        p[(c, n1 + c)] = C64::new(1.0, 0.0);
    }
    p
}

/// Shared-band transmit covariance of every antenna in global order, with
/// quantization noise.
pub fn shared_covariance(p: &DesignPoint, cfg: &NetworkConfig, mode: CompressionMode) -> CMat {
    let n = cfg.n_ru_total(0) + cfg.n_ru_total(1);
    let mut c = CMat::zeros(n, n);
    for i in 0..2 {
        let pi = to_global(cfg, i);
        for k in 0..cfg.n_ues {
            c += &pi * &p.util[i][k] * pi.adjoint();
        }
    }
    match mode {
        CompressionMode::PointToPoint => {
            let q: Vec<CMat> = (0..2).flat_map(|j| (0..cfg.n_rus).map(move |r| (j, r))).map(|(j, r)| &p.omega_s[j][r] + &p.sigma[j][r]).collect();
            c += blockdiag(&q.iter().collect::<Vec<_>>());
        }
        CompressionMode::Multivariate => {
            for i in 0..2 {
                let pi = to_global(cfg, i);
                c += &pi * p.lambda(i) * pi.adjoint();
            }
        }
    }
    c
}

/// `[H^{0,1} ... H^{0,N_R} H^{1,1} ... H^{1,N_R}]` of UE `(i, k)`.
pub fn global_channel(st: &StackedChannels, i: usize, k: usize) -> CMat {
    let cfg = &st.config;
    let blocks: Vec<&CMat> = (0..2).flat_map(|j| (0..cfg.n_rus).map(move |r| (j, r))).map(|(j, r)| st.h_block(i, k, j, r)).collect();
    let rows = blocks[0].nrows();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut h = CMat::zeros(rows, cols);
    let mut off = 0;
    for b in blocks {
        h.view_mut((0, off), b.shape()).copy_from(b);
        off += b.ncols();
    }
    h
}

/// Rate of a UE seeing `h` with total covariance `c` and own-signal covariance `s`.
pub fn rate_from_covariance(h: &CMat, c: &CMat, s: &CMat) -> f64 {
    let eye = cidentity(h.nrows());
    log2det(&(&eye + h * c * h.adjoint())) - log2det(&(&eye + h * (c - s) * h.adjoint()))
}
