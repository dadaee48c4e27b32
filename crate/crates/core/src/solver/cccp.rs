//! Concave-convex procedure: build, solve and re-expand until the sum rate
//! stalls; best of several restarts; rank projection and repair at the end.

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use super::{initialize_feasible, project_point, repair, BarrierSolver, SolveStatus, SubproblemSolver};
use crate::dcp::{build_subproblem, ExpansionPoint, SubproblemOptions};
use crate::error::{Error, Result};
use crate::metrics::{evaluate_constraints, ConstraintReport, DesignPoint};
use crate::model::{BandwidthScheme, ChannelRealization, CompressionMode, NetworkConfig, StackedChannels, N_OPERATORS, UNIT_SCALE};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CccpOptions {
    pub max_iter: usize,
    /// Stop when the relative sum-rate change over one iteration drops below this.
    pub rel_tol: f64,
    /// CCCP runs per solve; seeded runs (see [`cccp_seeded`]) count toward this.
    pub restarts: usize,
    /// Relative duality-gap target of each subproblem solve.
    pub solver_tolerance: f64,
    pub seed: u64,
    /// Multivariate mode only: keep `Θ ≡ 0`.
    pub freeze_theta: bool,
}

impl Default for CccpOptions {
    fn default() -> Self {
        Self { max_iter: 100, rel_tol: 1e-4, restarts: 5, solver_tolerance: 1e-9, seed: 0, freeze_theta: false }
    }
}

impl CccpOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::Argument("max_iter must be >= 1".into()));
        }
        if self.restarts == 0 {
            return Err(Error::Argument("restarts must be >= 1".into()));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::Argument("rel_tol must be positive".into()));
        }
        if !(self.solver_tolerance > 0.0) {
            return Err(Error::Argument("solver_tolerance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionStatus {
    Converged,
    IterLimit,
    SolverFailure,
}

impl SolutionStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolutionStatus::Converged => "converged",
            SolutionStatus::IterLimit => "iter_limit",
            SolutionStatus::SolverFailure => "solver_failure",
        }
    }
}

/// One line of the iteration trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    /// Sum rate in bit/s.
    pub objective: f64,
    /// Worst residual of the original problem at the iterate (scaled units).
    pub worst_residual: f64,
    pub status: SolveStatus,
}

#[derive(Clone, Debug)]
pub struct Solution {
    /// Rank-projected and repaired point, external units.
    pub point: DesignPoint,
    /// Last CCCP iterate before projection, external units.
    pub lifted_point: DesignPoint,
    /// Sum rate per iteration (entry 0 is the initial point), bit/s.
    pub objective_trace: Vec<f64>,
    pub iterations: Vec<IterationRecord>,
    pub status: SolutionStatus,
    /// Residuals of [`Solution::point`] in scaled units.
    pub report: ConstraintReport,
    /// Sum rate of [`Solution::point`], bit/s.
    pub objective: f64,
    /// Per-UE rate `R_U`, bit/s.
    pub per_ue_rate: f64,
    /// `[R_U − Γ]^+`, bit/s.
    pub secrecy_rate: f64,
    /// Last expansion point (scaled units); a valid warm start for related runs.
    pub final_state: ExpansionPoint,
    pub scheme: BandwidthScheme,
    pub mode: CompressionMode,
}

/// `ε` floor of the quantization covariances: `1e-8` times the largest per-Hz power budget.
pub fn quantization_floor(config: &NetworkConfig) -> f64 {
    let w = config.total_bandwidth;
    let p = config.max_power.iter().flatten().fold(0.0_f64, |a, &v| a.max(v));
    1e-8 * p / w
}

/// Equality residual (scaled units) tolerated in a non-optimal subproblem exit.
const EQ_TOL: f64 = 1e-9;

struct Run {
    state: ExpansionPoint,
    trace: Vec<f64>,
    iterations: Vec<IterationRecord>,
    status: SolutionStatus,
}

fn rel_change(new: f64, old: f64) -> f64 {
    (new - old).abs() / old.abs().max(1e-12)
}

fn run_from(
    start: ExpansionPoint,
    ch: &StackedChannels,
    config: &NetworkConfig,
    scheme: BandwidthScheme,
    mode: CompressionMode,
    opts: &CccpOptions,
    solver: &dyn SubproblemSolver,
) -> Result<Run> {
    let sub = SubproblemOptions {
        freeze_theta: opts.freeze_theta,
        ..SubproblemOptions::new(scheme, mode, quantization_floor(config))
    };
    let mut exp = start;
    let mut prev = exp.point.sum_rate();
    let mut trace = vec![prev * UNIT_SCALE];
    let mut iterations = Vec::new();
    let mut status = SolutionStatus::IterLimit;
    for it in 1..=opts.max_iter {
        let (sp, layout) = build_subproblem(&exp, ch, config, sub)?;
        let x0 = layout.x_from_expansion(&exp)?;
        let res = solver.solve(&sp, &x0)?;
        let usable = match res.status {
            SolveStatus::Optimal => true,
            // a strictly feasible improvement is still a valid CCCP step
            SolveStatus::NumericalFailure | SolveStatus::IterationLimit => {
                res.objective.is_finite() && res.objective >= prev && sp.is_strictly_feasible(&res.x, EQ_TOL)
            }
            _ => false,
        };
        if !usable {
            warn!("subproblem at iteration {it} returned {:?}", res.status);
            if it == 1 {
                return Err(Error::Subproblem { status: res.status, detail: format!("first CCCP iteration ({} Newton steps)", res.iterations) });
            }
            status = SolutionStatus::SolverFailure;
            break;
        }
        let next = layout.expansion_from_x(&res.x, &exp);
        let obj = next.point.sum_rate();
        let worst = evaluate_constraints(&next.point, ch, config, mode).map(|r| r.max_residual()).unwrap_or(f64::NAN);
        debug!("cccp iter {it}: objective {obj:.9} (scaled), worst residual {worst:.3e}, {} Newton steps", res.iterations);
        iterations.push(IterationRecord { iter: it, objective: obj * UNIT_SCALE, worst_residual: worst, status: res.status });
        trace.push(obj * UNIT_SCALE);
        exp = next;
        let done = rel_change(obj, prev) < opts.rel_tol;
        prev = obj;
        if done {
            status = SolutionStatus::Converged;
            break;
        }
    }
    Ok(Run { state: exp, trace, iterations, status })
}

fn finish(
    run: Run,
    ch: &StackedChannels,
    config: &NetworkConfig,
    scheme: BandwidthScheme,
    mode: CompressionMode,
) -> Result<Solution> {
    let lifted = run.state.point.clone();
    let projected = project_point(&lifted, config)?;
    let repaired = repair(&projected, ch, config, scheme, mode)?;
    let report = evaluate_constraints(&repaired, ch, config, mode)?;
    Ok(assemble(repaired, lifted, run, report, config, scheme, mode))
}

fn assemble(
    point: DesignPoint,
    lifted: DesignPoint,
    run: Run,
    report: ConstraintReport,
    config: &NetworkConfig,
    scheme: BandwidthScheme,
    mode: CompressionMode,
) -> Solution {
    let objective = point.sum_rate() * UNIT_SCALE;
    let per_ue_rate = objective / (N_OPERATORS * config.n_ues) as f64;
    let secrecy_rate = (per_ue_rate - config.privacy_threshold * UNIT_SCALE).max(0.0);
    Solution {
        point: point.rescaled(UNIT_SCALE),
        lifted_point: lifted.rescaled(UNIT_SCALE),
        objective_trace: run.trace,
        iterations: run.iterations,
        status: run.status,
        report,
        objective,
        per_ue_rate,
        secrecy_rate,
        final_state: run.state,
        scheme,
        mode,
    }
}

/// Adapts another run's final state to this run's scheme and mode.
fn adapt_state(state: &ExpansionPoint, config: &NetworkConfig, mode: CompressionMode) -> ExpansionPoint {
    let mut s = state.clone();
    if mode == CompressionMode::Multivariate && s.point.theta.is_none() {
        s.point.theta = DesignPoint::zeros(config, 0.0, mode).theta;
    }
    if mode == CompressionMode::PointToPoint {
        s.point.theta = None;
    }
    s
}

/// Algorithm entry point: `restarts` random initializations, best post-projection objective wins.
pub fn cccp(
    ch: &ChannelRealization,
    config: &NetworkConfig,
    scheme: BandwidthScheme,
    mode: CompressionMode,
    opts: &CccpOptions,
) -> Result<Solution> {
    cccp_seeded(ch, config, scheme, mode, opts, &[])
}

/// [`cccp`] with seeded restarts: each seed's final state takes one of the
/// `restarts` slots (random initializations fill the rest), and each seed's
/// own point competes directly when it is feasible for this scheme and mode
/// (the seed must solve a subset problem, e.g. the equal split for the
/// optimized scheme).
pub fn cccp_seeded(
    ch: &ChannelRealization,
    config: &NetworkConfig,
    scheme: BandwidthScheme,
    mode: CompressionMode,
    opts: &CccpOptions,
    seeds: &[&Solution],
) -> Result<Solution> {
    opts.validate()?;
    config.validate()?;
    let scaled = config.scaled();
    let st = StackedChannels::new(&scaled, ch)?;
    let solver = BarrierSolver { tol: opts.solver_tolerance, ..BarrierSolver::default() };
    let mut best: Option<Solution> = None;
    let mut failures = Vec::new();
    let mut consider = |cand: Result<Solution>, label: String| match cand {
        Ok(s) => {
            debug!("{label}: objective {:.6e} ({})", s.objective, s.status.as_str());
            if best.as_ref().is_none_or(|b| s.objective > b.objective) {
                best = Some(s);
            }
        }
        Err(e) => {
            debug!("{label} failed: {e}");
            failures.push(format!("{label}: {e}"));
        }
    };

    let random = opts.restarts.saturating_sub(seeds.len());
    for r in 0..random {
        let seed = opts.seed.wrapping_add(r as u64);
        let cand = initialize_feasible(&st, &scaled, mode, scheme, seed)
            .and_then(|start| run_from(start, &st, &scaled, scheme, mode, opts, &solver))
            .and_then(|run| finish(run, &st, &scaled, scheme, mode));
        consider(cand, format!("restart {r} (seed {seed})"));
    }
    for (j, s) in seeds.iter().enumerate() {
        let start = adapt_state(&s.final_state, &scaled, mode);
        let cand = run_from(start, &st, &scaled, scheme, mode, opts, &solver).and_then(|run| finish(run, &st, &scaled, scheme, mode));
        consider(cand, format!("seeded run {j}"));
        // the seed's own point, if admissible here
        let mut p = s.point.rescaled(1.0 / UNIT_SCALE);
        if mode == CompressionMode::Multivariate && p.theta.is_none() {
            p.theta = DesignPoint::zeros(&scaled, 0.0, mode).theta;
        }
        let admissible = (scheme.has_shared_band() || p.ws == 0.0) && p.check_dims(&scaled).is_ok();
        if admissible {
            let cand = evaluate_constraints(&p, &st, &scaled, mode).and_then(|report| {
                if report.max_residual() <= 1e-9 {
                    let run = Run {
                        state: adapt_state(&s.final_state, &scaled, mode),
                        trace: vec![p.sum_rate() * UNIT_SCALE],
                        iterations: Vec::new(),
                        status: s.status,
                    };
                    Ok(assemble(p.clone(), s.lifted_point.rescaled(1.0 / UNIT_SCALE), run, report, &scaled, scheme, mode))
                } else {
                    Err(Error::Precondition(format!("seed point infeasible here (residual {:.3e})", report.max_residual())))
                }
            });
            consider(cand, format!("seed point {j}"));
        }
    }
    match best {
        Some(s) => {
            info!("cccp {}/{}: objective {:.6e} bit/s", scheme.as_str(), mode.as_str(), s.objective);
            Ok(s)
        }
        None => Err(Error::AllRestartsFailed { restarts: random + seeds.len(), diagnostics: failures.join("; ") }),
    }
}
