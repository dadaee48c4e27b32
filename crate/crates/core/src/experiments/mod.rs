//! Monte-Carlo harness: sweeps over SNR and privacy threshold for each
//! bandwidth scheme and compression mode, aggregation, CSV and plot-series
//! output.
//!
//! Within one channel draw the grid is solved in a fixed order so that every
//! run can start from solutions of easier or nested problems:
//!
//! - thresholds in increasing order (a looser privacy constraint keeps the
//!   previous solution feasible);
//! - point-to-point before multivariate (`Θ = 0` embeds the former);
//! - equal split and no pooling before the optimized split.
//!
//! Seed points compete directly with the random restarts, so these orderings
//! make the corresponding dominance relations hold by construction.

mod check;
mod config;
mod io;

use std::collections::HashMap;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use check::{self_check, CheckOutcome};
pub use config::{ExperimentConfig, SweepSpec};
pub use io::{emit_plot_data, read_csv, write_aggregates, write_csv, write_traces, CSV_HEADER};

use crate::error::{Error, Result};
use crate::model::{sample_channels, BandwidthScheme, ChannelRealization, CompressionMode, NetworkConfig, N_OPERATORS};
use crate::solver::{cccp_seeded, CccpOptions, Solution};

/// `[R_U − Γ]^+`.
pub fn secrecy_rate(rate_per_ue: f64, gamma: f64) -> f64 {
    (rate_per_ue - gamma).max(0.0)
}

/// Outcome of one trial; the [`SolutionStatus`](crate::solver::SolutionStatus)
/// string, or `error` when no restart produced a solution.
pub const STATUS_ERROR: &str = "error";

/// One row of the results CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub scenario_id: String,
    pub seed: u64,
    pub snr_db: f64,
    pub gamma_privacy_bps: f64,
    pub scheme: BandwidthScheme,
    pub mode: CompressionMode,
    pub rate_per_ue_bps: f64,
    pub secrecy_rate_per_ue_bps: f64,
    pub w_p1_hz: f64,
    pub w_p2_hz: f64,
    pub w_s_hz: f64,
    pub iterations: usize,
    pub status: String,
}

impl TrialRecord {
    pub fn is_error(&self) -> bool {
        self.status == STATUS_ERROR
    }

    fn from_solution(id: String, seed: u64, snr_db: f64, config: &NetworkConfig, sol: &Solution) -> Self {
        Self {
            scenario_id: id,
            seed,
            snr_db,
            gamma_privacy_bps: config.privacy_threshold,
            scheme: sol.scheme,
            mode: sol.mode,
            rate_per_ue_bps: sol.per_ue_rate,
            secrecy_rate_per_ue_bps: secrecy_rate(sol.per_ue_rate, config.privacy_threshold),
            w_p1_hz: sol.point.wp[0],
            w_p2_hz: sol.point.wp[1],
            w_s_hz: sol.point.ws,
            iterations: sol.iterations.len(),
            status: sol.status.as_str().to_string(),
        }
    }

    /// Failed trial: zero rate, nominal bandwidth split of the scheme.
    fn failed(id: String, seed: u64, snr_db: f64, config: &NetworkConfig, scheme: BandwidthScheme, mode: CompressionMode) -> Self {
        let w = config.total_bandwidth;
        let (wp, ws) = if scheme.has_shared_band() { (w / 3.0, w - 2.0 * (w / 3.0)) } else { (w / 2.0, 0.0) };
        Self {
            scenario_id: id,
            seed,
            snr_db,
            gamma_privacy_bps: config.privacy_threshold,
            scheme,
            mode,
            rate_per_ue_bps: 0.0,
            secrecy_rate_per_ue_bps: 0.0,
            w_p1_hz: wp,
            w_p2_hz: wp,
            w_s_hz: ws,
            iterations: 0,
            status: STATUS_ERROR.to_string(),
        }
    }
}

/// `s{snr index}-g{threshold index}-t{trial}`.
pub fn scenario_id(snr_idx: usize, gamma_idx: usize, trial: usize) -> String {
    format!("s{snr_idx}-g{gamma_idx}-t{trial}")
}

/// Solves one cell. The optimized scheme is always seeded with the equal
/// split of the same drop and mode.
pub fn run_trial(
    config: &NetworkConfig,
    seed: u64,
    scheme: BandwidthScheme,
    mode: CompressionMode,
    options: &CccpOptions,
) -> Result<Solution> {
    let ch = sample_channels(config, seed)?;
    let opts = CccpOptions { seed, ..options.clone() };
    if scheme == BandwidthScheme::Optimized {
        let equal = cccp_seeded(&ch, config, BandwidthScheme::EqualSplit, mode, &opts, &[])?;
        cccp_seeded(&ch, config, scheme, mode, &opts, &[&equal])
    } else {
        cccp_seeded(&ch, config, scheme, mode, &opts, &[])
    }
}

/// Solved cell of a sweep.
#[derive(Clone, Debug)]
pub struct CellResult {
    pub record: TrialRecord,
    pub solution: Option<Solution>,
}

/// Mean quantities of one `(snr, Γ, scheme, mode)` cell over its successful trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub snr_db: f64,
    pub gamma_privacy_bps: f64,
    pub scheme: BandwidthScheme,
    pub mode: CompressionMode,
    pub trials: usize,
    pub failures: usize,
    pub mean_rate_per_ue_bps: f64,
    pub mean_secrecy_rate_per_ue_bps: f64,
    pub mean_private_fraction_1: f64,
    pub mean_private_fraction_2: f64,
    pub mean_shared_fraction: f64,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    /// Ordered by SNR, threshold, trial, scheme, mode (the config's list order).
    pub records: Vec<TrialRecord>,
    pub aggregates: Vec<Aggregate>,
    pub failures: usize,
}

impl SweepResult {
    /// `0` success, `2` more than 10% of the trials failed, `3` all failed.
    pub fn exit_code(&self) -> i32 {
        let n = self.records.len();
        if n > 0 && self.failures == n {
            3
        } else if self.failures * 10 > n {
            2
        } else {
            0
        }
    }
}

/// Sort order of the solve chain inside one drop (see the module docs).
fn chain_order(schemes: &[BandwidthScheme], modes: &[CompressionMode]) -> Vec<(BandwidthScheme, CompressionMode, bool)> {
    let mut out = Vec::new();
    for mode in [CompressionMode::PointToPoint, CompressionMode::Multivariate] {
        let wanted_mode = modes.contains(&mode);
        if !wanted_mode {
            continue;
        }
        for scheme in [BandwidthScheme::EqualSplit, BandwidthScheme::NoPooling, BandwidthScheme::Optimized] {
            let wanted = schemes.contains(&scheme);
            // the equal split is always solved when the optimized one is requested
            let needed = wanted || (scheme == BandwidthScheme::EqualSplit && schemes.contains(&BandwidthScheme::Optimized));
            if needed {
                out.push((scheme, mode, wanted));
            }
        }
    }
    out
}

/// All cells of one `(snr, trial)` drop, keyed by `(threshold index, scheme, mode)`.
fn solve_drop(
    cfg: &ExperimentConfig,
    snr_idx: usize,
    trial: usize,
    keep_solutions: bool,
) -> Result<Vec<((usize, BandwidthScheme, CompressionMode), CellResult)>> {
    let spec = &cfg.sweep;
    let snr = spec.snr_db[snr_idx];
    let seed = spec.base_seed.wrapping_add(trial as u64);
    let opts = CccpOptions { seed, ..cfg.cccp.clone() };
    let mut gamma_order: Vec<usize> = (0..spec.privacy_threshold.len()).collect();
    gamma_order.sort_by(|&a, &b| spec.privacy_threshold[a].total_cmp(&spec.privacy_threshold[b]));
    let chain = chain_order(&spec.schemes, &spec.modes);

    let ch: ChannelRealization = sample_channels(&cfg.network(snr, spec.privacy_threshold[0]), seed)?;
    let mut prev: HashMap<(BandwidthScheme, CompressionMode), Solution> = HashMap::new();
    let mut out = Vec::new();
    for &g in &gamma_order {
        let net = cfg.network(snr, spec.privacy_threshold[g]);
        let mut cur: HashMap<(BandwidthScheme, CompressionMode), Solution> = HashMap::new();
        for &(scheme, mode, wanted) in &chain {
            let id = scenario_id(snr_idx, g, trial);
            let result = if scheme == BandwidthScheme::NoPooling && prev.contains_key(&(scheme, mode)) {
                // without a shared band the privacy constraint is void: same problem as before
                Ok(prev[&(scheme, mode)].clone())
            } else {
                let mut seeds: Vec<&Solution> = Vec::new();
                seeds.extend(prev.get(&(scheme, mode)));
                if scheme == BandwidthScheme::Optimized {
                    seeds.extend(cur.get(&(BandwidthScheme::EqualSplit, mode)));
                }
                if mode == CompressionMode::Multivariate {
                    seeds.extend(cur.get(&(scheme, CompressionMode::PointToPoint)));
                }
                cccp_seeded(&ch, &net, scheme, mode, &opts, &seeds)
            };
            match result {
                Ok(sol) => {
                    if wanted {
                        let record = TrialRecord::from_solution(id, seed, snr, &net, &sol);
                        let solution = keep_solutions.then(|| sol.clone());
                        out.push(((g, scheme, mode), CellResult { record, solution }));
                    }
                    cur.insert((scheme, mode), sol);
                }
                Err(e) => {
                    warn!("{id} {}/{}: {e}", scheme.as_str(), mode.as_str());
                    if wanted {
                        let record = TrialRecord::failed(id, seed, snr, &net, scheme, mode);
                        out.push(((g, scheme, mode), CellResult { record, solution: None }));
                    }
                }
            }
        }
        // a failed cell keeps the older warm start
        for (k, v) in cur {
            prev.insert(k, v);
        }
    }
    Ok(out)
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Argument(format!("worker pool: {e}")))
}

/// Solves every cell of the grid; drops run in parallel, results are ordered
/// by grid position regardless of completion order.
pub fn run_cells(cfg: &ExperimentConfig, keep_solutions: bool) -> Result<Vec<CellResult>> {
    cfg.validate()?;
    let spec = &cfg.sweep;
    let drops: Vec<(usize, usize)> = (0..spec.snr_db.len()).flat_map(|s| (0..spec.trials).map(move |t| (s, t))).collect();
    let pool = thread_pool(cfg.workers)?;
    let solved: Vec<Result<Vec<_>>> = pool.install(|| {
        drops
            .par_iter()
            .map(|&(s, t)| {
                let r = solve_drop(cfg, s, t, keep_solutions);
                info!("drop snr={} trial={t} done", spec.snr_db[s]);
                r
            })
            .collect()
    });
    let mut cells = Vec::with_capacity(spec.n_records());
    for (&(s, t), res) in drops.iter().zip(solved) {
        let snr = spec.snr_db[s];
        let seed = spec.base_seed.wrapping_add(t as u64);
        let mut by_key: HashMap<_, _> = match res {
            Ok(v) => v.into_iter().collect(),
            Err(e) => {
                warn!("drop snr={snr} trial={t} failed: {e}");
                HashMap::new()
            }
        };
        for g in 0..spec.privacy_threshold.len() {
            for &scheme in &spec.schemes {
                for &mode in &spec.modes {
                    let cell = by_key.remove(&(g, scheme, mode)).unwrap_or_else(|| {
                        let net = cfg.network(snr, spec.privacy_threshold[g]);
                        CellResult { record: TrialRecord::failed(scenario_id(s, g, t), seed, snr, &net, scheme, mode), solution: None }
                    });
                    cells.push((s, g, t, cell));
                }
            }
        }
    }
    // canonical order: snr, threshold, trial, scheme, mode
    cells.sort_by_key(|&(s, g, t, _)| (s, g, t));
    Ok(cells.into_iter().map(|(_, _, _, c)| c).collect())
}

/// Full Monte-Carlo sweep with aggregates.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    let records: Vec<TrialRecord> = run_cells(cfg, false)?.into_iter().map(|c| c.record).collect();
    let failures = records.iter().filter(|r| r.is_error()).count();
    let aggregates = aggregate(&records);
    Ok(SweepResult { records, aggregates, failures })
}

/// Means per `(snr, Γ, scheme, mode)` over non-failed records, in order of
/// first appearance.
pub fn aggregate(records: &[TrialRecord]) -> Vec<Aggregate> {
    let mut order: Vec<(u64, u64, BandwidthScheme, CompressionMode)> = Vec::new();
    let mut groups: HashMap<(u64, u64, BandwidthScheme, CompressionMode), Vec<&TrialRecord>> = HashMap::new();
    for r in records {
        let key = (r.snr_db.to_bits(), r.gamma_privacy_bps.to_bits(), r.scheme, r.mode);
        groups.entry(key).or_insert_with(|| {
            order.push(key);
            Vec::new()
        });
        groups.get_mut(&key).expect("inserted").push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let all = &groups[&key];
            let ok: Vec<&&TrialRecord> = all.iter().filter(|r| !r.is_error()).collect();
            let mean = |f: &dyn Fn(&TrialRecord) -> f64| {
                if ok.is_empty() {
                    f64::NAN
                } else {
                    ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64
                }
            };
            Aggregate {
                snr_db: f64::from_bits(key.0),
                gamma_privacy_bps: f64::from_bits(key.1),
                scheme: key.2,
                mode: key.3,
                trials: all.len(),
                failures: all.len() - ok.len(),
                mean_rate_per_ue_bps: mean(&|r| r.rate_per_ue_bps),
                mean_secrecy_rate_per_ue_bps: mean(&|r| r.secrecy_rate_per_ue_bps),
                mean_private_fraction_1: mean(&|r| bandwidth_fractions(r)[0]),
                mean_private_fraction_2: mean(&|r| bandwidth_fractions(r)[1]),
                mean_shared_fraction: mean(&|r| bandwidth_fractions(r)[2]),
            }
        })
        .collect()
}

/// Aggregates of one `(snr, scheme, mode)` series sorted by increasing threshold.
pub fn series<'a>(aggs: &'a [Aggregate], snr_db: f64, scheme: BandwidthScheme, mode: CompressionMode) -> Vec<&'a Aggregate> {
    let mut s: Vec<&Aggregate> = aggs.iter().filter(|a| a.snr_db == snr_db && a.scheme == scheme && a.mode == mode).collect();
    s.sort_by(|a, b| a.gamma_privacy_bps.total_cmp(&b.gamma_privacy_bps));
    s
}

/// Mean `R_U` of a series at mean secrecy rate `target`, by linear
/// interpolation in the secrecy rate along the rate–privacy trade-off branch:
/// the bracketing pair of adjacent thresholds closest to the loose end.
pub fn rate_at_secrecy(series: &[&Aggregate], target: f64) -> Option<f64> {
    for w in series.windows(2).rev() {
        let (a, b) = (w[0], w[1]);
        let (xa, xb) = (a.mean_secrecy_rate_per_ue_bps, b.mean_secrecy_rate_per_ue_bps);
        let (ya, yb) = (a.mean_rate_per_ue_bps, b.mean_rate_per_ue_bps);
        if !(xa.is_finite() && xb.is_finite() && ya.is_finite() && yb.is_finite()) {
            continue;
        }
        if (xa - target) * (xb - target) <= 0.0 {
            if xa == xb {
                return Some(0.5 * (ya + yb));
            }
            return Some(ya + (target - xa) / (xb - xa) * (yb - ya));
        }
    }
    None
}

/// Fractions of the total bandwidth `[W_P1, W_P2, W_S] / W` of a record.
pub fn bandwidth_fractions(r: &TrialRecord) -> [f64; N_OPERATORS + 1] {
    let w = r.w_p1_hz + r.w_p2_hz + r.w_s_hz;
    [r.w_p1_hz / w, r.w_p2_hz / w, r.w_s_hz / w]
}
