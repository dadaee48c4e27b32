//! Scenario definition, random geometry and channel generation, and the
//! stacking/selection bookkeeping shared by every functional.
//!
//! Operators are indexed `0` and `1`; [`other`] maps an operator to its peer.
//! Randomness comes from ChaCha20 (`rand_chacha::ChaCha20Rng::seed_from_u64`),
//! consumed in a fixed order: RU positions (operator-major, then RU), UE
//! positions (operator-major, then UE), then channel blocks in `(i, k, j, r)`
//! lexicographic order with entries filled column-major, real part first.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{complex_gaussian, hcat, CMat, C64};

pub const N_OPERATORS: usize = 2;

/// Multiplier between external units (Hz, bit/s) and the internal solver units (MHz, Mbit/s).
pub const UNIT_SCALE: f64 = 1e6;

/// The peer operator `ī`.
#[inline]
pub fn other(i: usize) -> usize {
    1 - i
}

/// Point-to-point or multivariate compression of shared-band signals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompressionMode {
    PointToPoint,
    Multivariate,
}

impl CompressionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CompressionMode::PointToPoint => "point_to_point",
            CompressionMode::Multivariate => "multivariate",
        }
    }
}

/// Bandwidth allocation scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthScheme {
    /// Private and shared bandwidths are optimization variables.
    Optimized,
    /// `W_P1 = W_P2 = W_S = W/3`.
    #[serde(rename = "equal")]
    EqualSplit,
    /// `W_P1 = W_P2 = W/2`, no shared subband.
    NoPooling,
}

impl BandwidthScheme {
    pub fn as_str(self) -> &'static str {
        match self {
            BandwidthScheme::Optimized => "optimized",
            BandwidthScheme::EqualSplit => "equal",
            BandwidthScheme::NoPooling => "no_pooling",
        }
    }

    pub fn has_shared_band(self) -> bool {
        !matches!(self, BandwidthScheme::NoPooling)
    }
}

/// Static scenario parameters.
///
/// Capacities are in bit/s, bandwidth in Hz, powers in power·Hz with unit
/// noise power spectral density. [`NetworkConfig::scaled`] converts to the
/// internal MHz / Mbit/s units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    /// RUs per operator, `N_R`.
    pub n_rus: usize,
    /// UEs per operator, `N_U`.
    pub n_ues: usize,
    /// Antennas of RU `(i, r)`.
    pub n_ant_ru: [Vec<usize>; 2],
    /// Antennas of UE `(i, k)`.
    pub n_ant_ue: [Vec<usize>; 2],
    /// Private-band stream dimension of UE `(i, k)`.
    pub stream_dim_private: [Vec<usize>; 2],
    /// Shared-band stream dimension of UE `(i, k)`.
    pub stream_dim_shared: [Vec<usize>; 2],
    /// Backhaul capacity from CP `i` to CP `ī`.
    pub backhaul_capacity: [f64; 2],
    /// Fronthaul capacity from CP `i` to RU `(i, r)`.
    pub fronthaul_capacity: [Vec<f64>; 2],
    /// Power budget of RU `(i, r)`.
    pub max_power: [Vec<f64>; 2],
    pub total_bandwidth: f64,
    pub privacy_threshold: f64,
    pub path_loss_exponent: f64,
    pub reference_distance: f64,
    pub area_radius: f64,
}

/// Power budget giving a per-Hz SNR of `snr_db` at unit channel gain under a flat allocation.
pub fn power_for_snr(total_bandwidth: f64, snr_db: f64) -> f64 {
    total_bandwidth * 10f64.powf(snr_db / 10.0)
}

impl NetworkConfig {
    /// Homogeneous scenario: every RU/UE gets the same antenna count and every
    /// link the same capacity. Stream dimensions default to the UE antenna count.
    #[allow(clippy::too_many_arguments)]
    pub fn uniform(
        n_rus: usize,
        n_ues: usize,
        n_ant_ru: usize,
        n_ant_ue: usize,
        backhaul_capacity: f64,
        fronthaul_capacity: f64,
        total_bandwidth: f64,
        snr_db: f64,
        privacy_threshold: f64,
    ) -> Self {
        let per_op = |n: usize, v: usize| [vec![v; n], vec![v; n]];
        let power = power_for_snr(total_bandwidth, snr_db);
        Self {
            n_rus,
            n_ues,
            n_ant_ru: per_op(n_rus, n_ant_ru),
            n_ant_ue: per_op(n_ues, n_ant_ue),
            stream_dim_private: per_op(n_ues, n_ant_ue),
            stream_dim_shared: per_op(n_ues, n_ant_ue),
            backhaul_capacity: [backhaul_capacity; 2],
            fronthaul_capacity: [vec![fronthaul_capacity; n_rus], vec![fronthaul_capacity; n_rus]],
            max_power: [vec![power; n_rus], vec![power; n_rus]],
            total_bandwidth,
            privacy_threshold,
            path_loss_exponent: 3.0,
            reference_distance: 50.0,
            area_radius: 100.0,
        }
    }

    /// Single-antenna, single-RU, single-UE setup with `C_B = 100` Mbit/s,
    /// `C_F = 50` Mbit/s and `W = 10` MHz.
    pub fn reference(snr_db: f64, privacy_threshold: f64) -> Self {
        Self::uniform(1, 1, 1, 1, 100e6, 50e6, 10e6, snr_db, privacy_threshold)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Argument(m));
        if self.n_rus == 0 || self.n_ues == 0 {
            return bad("n_rus and n_ues must be >= 1".into());
        }
        for i in 0..N_OPERATORS {
            if self.n_ant_ru[i].len() != self.n_rus
                || self.fronthaul_capacity[i].len() != self.n_rus
                || self.max_power[i].len() != self.n_rus
            {
                return bad(format!("per-RU vectors of operator {i} must have length {}", self.n_rus));
            }
            if self.n_ant_ue[i].len() != self.n_ues
                || self.stream_dim_private[i].len() != self.n_ues
                || self.stream_dim_shared[i].len() != self.n_ues
            {
                return bad(format!("per-UE vectors of operator {i} must have length {}", self.n_ues));
            }
            if self.n_ant_ru[i].iter().chain(&self.n_ant_ue[i]).any(|&n| n == 0) {
                return bad("antenna counts must be >= 1".into());
            }
            for k in 0..self.n_ues {
                let n = self.n_ant_ue[i][k];
                for (name, d) in [
                    ("stream_dim_private", self.stream_dim_private[i][k]),
                    ("stream_dim_shared", self.stream_dim_shared[i][k]),
                ] {
                    if d == 0 || d > n {
                        return bad(format!("{name}[{i}][{k}] = {d} must lie in 1..={n}"));
                    }
                }
            }
            let positive = self.fronthaul_capacity[i]
                .iter()
                .chain(&self.max_power[i])
                .chain(std::iter::once(&self.backhaul_capacity[i]))
                .all(|&v| v > 0.0 && v.is_finite());
            if !positive {
                return bad(format!("capacities and powers of operator {i} must be positive"));
            }
        }
        for (name, v) in [
            ("total_bandwidth", self.total_bandwidth),
            ("privacy_threshold", self.privacy_threshold),
            ("path_loss_exponent", self.path_loss_exponent),
            ("reference_distance", self.reference_distance),
            ("area_radius", self.area_radius),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        Ok(())
    }

    /// Copy with bandwidth, capacities, powers and privacy threshold divided by [`UNIT_SCALE`].
    pub fn scaled(&self) -> Self {
        let s = |v: f64| v / UNIT_SCALE;
        let mut out = self.clone();
        out.total_bandwidth = s(self.total_bandwidth);
        out.privacy_threshold = s(self.privacy_threshold);
        for i in 0..N_OPERATORS {
            out.backhaul_capacity[i] = s(self.backhaul_capacity[i]);
            out.fronthaul_capacity[i] = self.fronthaul_capacity[i].iter().map(|&v| s(v)).collect();
            out.max_power[i] = self.max_power[i].iter().map(|&v| s(v)).collect();
        }
        out
    }

    /// `n_{R,i}`: total RU antennas of operator `i`.
    pub fn n_ru_total(&self, i: usize) -> usize {
        self.n_ant_ru[i].iter().sum()
    }

    /// Row offset of RU `(i, r)` inside operator `i`'s stacked antenna vector.
    pub fn ru_offset(&self, i: usize, r: usize) -> usize {
        self.n_ant_ru[i][..r].iter().sum()
    }

    /// Dimension of the stacked shared-band covariance `Ũ_{i,k}`.
    pub fn n_stacked(&self, i: usize) -> usize {
        self.n_ru_total(i) + self.n_ru_total(other(i))
    }

    fn check_op(&self, i: usize) -> Result<()> {
        if i >= N_OPERATORS {
            return Err(Error::Argument(format!("operator index {i} out of range")));
        }
        Ok(())
    }

    fn check_ru(&self, i: usize, r: usize) -> Result<()> {
        self.check_op(i)?;
        if r >= self.n_rus {
            return Err(Error::Argument(format!("RU index {r} out of range (N_R = {})", self.n_rus)));
        }
        Ok(())
    }
}

/// 2-D coordinates in metres.
pub type Point = [f64; 2];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Positions {
    pub ru: [Vec<Point>; 2],
    pub ue: [Vec<Point>; 2],
}

fn uniform_in_disc<R: Rng>(radius: f64, rng: &mut R) -> Point {
    let u: f64 = rng.random();
    let v: f64 = rng.random();
    let rho = radius * u.sqrt();
    let theta = 2.0 * PI * v;
    [rho * theta.cos(), rho * theta.sin()]
}

fn draw_positions<R: Rng>(config: &NetworkConfig, rng: &mut R) -> Positions {
    let mut draw = |n: usize| -> Vec<Point> {
        (0..n).map(|_| uniform_in_disc(config.area_radius, rng)).collect()
    };
    let ru = [draw(config.n_rus), draw(config.n_rus)];
    let ue = [draw(config.n_ues), draw(config.n_ues)];
    Positions { ru, ue }
}

/// RU and UE positions, independently uniform over the disc of radius `area_radius`.
pub fn sample_positions(config: &NetworkConfig, seed: u64) -> Positions {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    draw_positions(config, &mut rng)
}

/// `1 / (1 + (D / D_0)^α)`.
pub fn path_loss(distance: f64, config: &NetworkConfig) -> f64 {
    1.0 / (1.0 + (distance / config.reference_distance).powf(config.path_loss_exponent))
}

fn distance(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// All per-link channel matrices `H_{i,k}^{j,r}` (UE `(i,k)` from RU `(j,r)`).
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    pub positions: Positions,
    pub seed: u64,
    n_rus: usize,
    n_ues: usize,
    blocks: Vec<CMat>,
}

impl ChannelRealization {
    fn index(n_ues: usize, n_rus: usize, i: usize, k: usize, j: usize, r: usize) -> usize {
        ((i * n_ues + k) * N_OPERATORS + j) * n_rus + r
    }

    /// Build from an explicit block function; every block is checked against the config.
    pub fn from_fn<F>(config: &NetworkConfig, positions: Positions, seed: u64, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize, usize, usize) -> CMat,
    {
        let mut blocks = Vec::new();
        for i in 0..N_OPERATORS {
            for k in 0..config.n_ues {
                for j in 0..N_OPERATORS {
                    for r in 0..config.n_rus {
                        let h = f(i, k, j, r);
                        let want = (config.n_ant_ue[i][k], config.n_ant_ru[j][r]);
                        if h.shape() != want {
                            return Err(Error::Dimension(format!(
                                "H[{i}][{k}][{j}][{r}] is {:?}, expected {want:?}",
                                h.shape()
                            )));
                        }
                        blocks.push(h);
                    }
                }
            }
        }
        Ok(Self { positions, seed, n_rus: config.n_rus, n_ues: config.n_ues, blocks })
    }

    /// All-zero channels with every node at the origin.
    pub fn zeros(config: &NetworkConfig) -> Self {
        let positions = Positions {
            ru: [vec![[0.0; 2]; config.n_rus], vec![[0.0; 2]; config.n_rus]],
            ue: [vec![[0.0; 2]; config.n_ues], vec![[0.0; 2]; config.n_ues]],
        };
        Self::from_fn(config, positions, 0, |i, k, j, r| {
            CMat::zeros(config.n_ant_ue[i][k], config.n_ant_ru[j][r])
        })
        .expect("shapes follow the config")
    }

    pub fn h(&self, i: usize, k: usize, j: usize, r: usize) -> &CMat {
        &self.blocks[Self::index(self.n_ues, self.n_rus, i, k, j, r)]
    }

    pub fn n_rus(&self) -> usize {
        self.n_rus
    }

    pub fn n_ues(&self) -> usize {
        self.n_ues
    }

    /// Checks every block dimension against `config`.
    pub fn check_dims(&self, config: &NetworkConfig) -> Result<()> {
        if self.n_rus != config.n_rus || self.n_ues != config.n_ues {
            return Err(Error::Dimension("realization counts differ from config".into()));
        }
        for i in 0..N_OPERATORS {
            for k in 0..self.n_ues {
                for j in 0..N_OPERATORS {
                    for r in 0..self.n_rus {
                        let want = (config.n_ant_ue[i][k], config.n_ant_ru[j][r]);
                        if self.h(i, k, j, r).shape() != want {
                            return Err(Error::Dimension(format!("H[{i}][{k}][{j}][{r}] shape")));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_dump(&self) -> ChannelDump {
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for i in 0..N_OPERATORS {
            for k in 0..self.n_ues {
                for j in 0..N_OPERATORS {
                    for r in 0..self.n_rus {
                        let h = self.h(i, k, j, r);
                        blocks.push(ChannelBlock {
                            i,
                            k,
                            j,
                            r,
                            rows: h.nrows(),
                            cols: h.ncols(),
                            re: h.iter().map(|z| z.re).collect(),
                            im: h.iter().map(|z| z.im).collect(),
                        });
                    }
                }
            }
        }
        ChannelDump { seed: self.seed, positions: self.positions.clone(), blocks }
    }

    pub fn from_dump(config: &NetworkConfig, dump: &ChannelDump) -> Result<Self> {
        let find = |i, k, j, r| {
            dump.blocks
                .iter()
                .find(|b| (b.i, b.k, b.j, b.r) == (i, k, j, r))
                .map(|b| {
                    let data = b.re.iter().zip(&b.im).map(|(&re, &im)| C64::new(re, im));
                    CMat::from_iterator(b.rows, b.cols, data)
                })
                .unwrap_or_else(|| CMat::zeros(0, 0))
        };
        Self::from_fn(config, dump.positions.clone(), dump.seed, find)
    }
}

/// Self-describing channel dump: one real/imaginary array pair per `(i, k, j, r)`, column-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelDump {
    pub seed: u64,
    pub positions: Positions,
    pub blocks: Vec<ChannelBlock>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelBlock {
    pub i: usize,
    pub k: usize,
    pub j: usize,
    pub r: usize,
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

/// `H_{i,k}^{j,r} = sqrt(ρ) H̃` with `H̃` i.i.d. CN(0, 1) and `ρ` the path loss of the link.
pub fn sample_channels(config: &NetworkConfig, seed: u64) -> Result<ChannelRealization> {
    config.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let positions = draw_positions(config, &mut rng);
    let pos = positions.clone();
    ChannelRealization::from_fn(config, positions, seed, |i, k, j, r| {
        let rho = path_loss(distance(pos.ue[i][k], pos.ru[j][r]), config);
        complex_gaussian(config.n_ant_ue[i][k], config.n_ant_ru[j][r], &mut rng).scale(rho.sqrt())
    })
}

/// Stacked channel views used by the rate functionals.
#[derive(Clone, Debug)]
pub struct StackedChannels {
    pub config: NetworkConfig,
    /// `H_{i,k}^j`, indexed `[i][k][j]`.
    h_op: Vec<Vec<[CMat; 2]>>,
    /// `G_{i,k}^j = [H_{i,k}^j  H_{i,k}^{j̄}]`, indexed `[i][k][j]`.
    g: Vec<Vec<[CMat; 2]>>,
    raw: ChannelRealization,
}

/// `H_{i,k}^j` (horizontal concatenation over RUs) and `G_{i,k}^j` (operator `j` first).
pub fn stack_channels(config: &NetworkConfig, ch: &ChannelRealization) -> Result<StackedChannels> {
    ch.check_dims(config)?;
    let mut h_op = Vec::with_capacity(2);
    let mut g = Vec::with_capacity(2);
    for i in 0..N_OPERATORS {
        let mut hi = Vec::with_capacity(config.n_ues);
        let mut gi = Vec::with_capacity(config.n_ues);
        for k in 0..config.n_ues {
            let per_op = |j: usize| {
                let blocks: Vec<&CMat> = (0..config.n_rus).map(|r| ch.h(i, k, j, r)).collect();
                hcat(&blocks)
            };
            let h = [per_op(0), per_op(1)];
            let gk = [hcat(&[&h[0], &h[1]]), hcat(&[&h[1], &h[0]])];
            hi.push(h);
            gi.push(gk);
        }
        h_op.push(hi);
        g.push(gi);
    }
    Ok(StackedChannels { config: config.clone(), h_op, g, raw: ch.clone() })
}

impl StackedChannels {
    pub fn new(config: &NetworkConfig, ch: &ChannelRealization) -> Result<Self> {
        stack_channels(config, ch)
    }

    /// `H_{i,k}^j`
    pub fn h_op(&self, i: usize, k: usize, j: usize) -> &CMat {
        &self.h_op[i][k][j]
    }

    /// `G_{i,k}^j`
    pub fn g(&self, i: usize, k: usize, j: usize) -> &CMat {
        &self.g[i][k][j]
    }

    /// `H_{i,k}^{j,r}`
    pub fn h_block(&self, i: usize, k: usize, j: usize, r: usize) -> &CMat {
        self.raw.h(i, k, j, r)
    }

    pub fn realization(&self) -> &ChannelRealization {
        &self.raw
    }

    /// True when UE `(i, k)` receives nothing from operator `i`'s RUs (private band).
    pub fn private_link_is_zero(&self, i: usize, k: usize) -> bool {
        self.h_op(i, k, i).iter().all(|z| z.norm() == 0.0)
    }

    /// True when UE `(i, k)` receives nothing from any RU (shared band).
    pub fn shared_link_is_zero(&self, i: usize, k: usize) -> bool {
        self.g(i, k, i).iter().all(|z| z.norm() == 0.0)
    }

    /// Same channels under a different (e.g. unit-scaled) config with identical dimensions.
    pub fn with_config(&self, config: &NetworkConfig) -> Self {
        let mut out = self.clone();
        out.config = config.clone();
        out
    }
}

/// Selection matrices of the stacked antenna vectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelectionKind {
    /// `E_{i,r}` (`n_{R,i} x n_{R,i,r}`): RU `(i, r)` inside operator `i`'s stack.
    RuBlock,
    /// `Ẽ_{i,r} = [E_{i,r}; 0]`: RU `(i, r)` inside the stacked shared vector of operator `i`.
    OwnInStacked,
    /// `Ē_{i,r} = [0; E_{ī,r}]`: RU `(ī, r)` inside the stacked shared vector of operator `i`.
    OtherInStacked,
    /// `Ē_i = [0; I]`: all of operator `ī`'s RUs inside operator `i`'s stacked vector. `r` is ignored.
    OtherOperator,
}

/// Zero/identity selection matrix of the given kind.
pub fn selection_matrix(
    kind: SelectionKind,
    i: usize,
    r: usize,
    config: &NetworkConfig,
) -> Result<DMatrix<f64>> {
    config.check_op(i)?;
    let ib = other(i);
    match kind {
        SelectionKind::OtherOperator => {}
        SelectionKind::OtherInStacked => config.check_ru(ib, r)?,
        _ => config.check_ru(i, r)?,
    }
    let (rows, row_off, cols) = match kind {
        SelectionKind::RuBlock => (config.n_ru_total(i), config.ru_offset(i, r), config.n_ant_ru[i][r]),
        SelectionKind::OwnInStacked => (config.n_stacked(i), config.ru_offset(i, r), config.n_ant_ru[i][r]),
        SelectionKind::OtherInStacked => (
            config.n_stacked(i),
            config.n_ru_total(i) + config.ru_offset(ib, r),
            config.n_ant_ru[ib][r],
        ),
        SelectionKind::OtherOperator => (config.n_stacked(i), config.n_ru_total(i), config.n_ru_total(ib)),
    };
    let mut m = DMatrix::zeros(rows, cols);
    for c in 0..cols {
        m[(row_off + c, c)] = 1.0;
    }
    Ok(m)
}
