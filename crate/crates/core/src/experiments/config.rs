//! Flat TOML experiment configuration.
//!
//! ```toml
//! snr_db = [10.0, 20.0]
//! privacy_threshold = [5e6, 10e6, 20e6]
//! trials = 20
//! ```
//!
//! `snr_db` and `privacy_threshold` are required; every other key has a
//! default (see [`ExperimentConfig::default`]). Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BandwidthScheme, CompressionMode, NetworkConfig};
use crate::solver::CccpOptions;

/// Sweep grid: SNRs × privacy thresholds × schemes × modes × trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub snr_db: Vec<f64>,
    /// bit/s.
    pub privacy_threshold: Vec<f64>,
    pub schemes: Vec<BandwidthScheme>,
    pub modes: Vec<CompressionMode>,
    pub trials: usize,
    /// Trial `t` uses seed `base_seed + t` for both the channel draw and the restarts.
    pub base_seed: u64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            snr_db: vec![10.0, 15.0, 20.0],
            privacy_threshold: [5.0, 7.5, 10.0, 12.5, 15.0, 17.5, 20.0, 30.0, 45.0, 60.0].iter().map(|m| m * 1e6).collect(),
            schemes: vec![BandwidthScheme::Optimized, BandwidthScheme::EqualSplit, BandwidthScheme::NoPooling],
            modes: vec![CompressionMode::PointToPoint, CompressionMode::Multivariate],
            trials: 20,
            base_seed: 0,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let key = |k: &str, m: &str| Err(Error::Config(format!("key `{k}`: {m}")));
        if self.snr_db.is_empty() {
            return key("snr_db", "must not be empty");
        }
        if self.snr_db.iter().any(|v| !v.is_finite()) {
            return key("snr_db", "values must be finite");
        }
        if self.privacy_threshold.is_empty() {
            return key("privacy_threshold", "must not be empty");
        }
        if self.privacy_threshold.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return key("privacy_threshold", "values must be finite and >= 0");
        }
        if self.schemes.is_empty() {
            return key("schemes", "must not be empty");
        }
        if self.modes.is_empty() {
            return key("modes", "must not be empty");
        }
        if self.trials == 0 {
            return key("trials", "must be >= 1");
        }
        Ok(())
    }

    /// Number of trial records a sweep produces.
    pub fn n_records(&self) -> usize {
        self.snr_db.len() * self.privacy_threshold.len() * self.trials * self.schemes.len() * self.modes.len()
    }
}

/// Homogeneous scenario parameters plus the sweep grid and CCCP options.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub n_rus: usize,
    pub n_ues: usize,
    pub n_ant_ru: usize,
    pub n_ant_ue: usize,
    /// Stream dimension `d` of every UE in both bands; defaults to `n_ant_ue`.
    pub stream_dim: Option<usize>,
    /// bit/s.
    pub backhaul_capacity: f64,
    /// bit/s.
    pub fronthaul_capacity: f64,
    /// Hz.
    pub total_bandwidth: f64,
    pub path_loss_exponent: f64,
    /// m.
    pub reference_distance: f64,
    /// m.
    pub area_radius: f64,
    pub sweep: SweepSpec,
    pub cccp: CccpOptions,
    /// Worker threads; `0` uses every core.
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_rus: 1,
            n_ues: 1,
            n_ant_ru: 1,
            n_ant_ue: 1,
            stream_dim: None,
            backhaul_capacity: 100e6,
            fronthaul_capacity: 50e6,
            total_bandwidth: 10e6,
            path_loss_exponent: 3.0,
            reference_distance: 50.0,
            area_radius: 100.0,
            sweep: SweepSpec::default(),
            cccp: CccpOptions::default(),
            workers: 0,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    n_rus: Option<usize>,
    n_ues: Option<usize>,
    n_ant_ru: Option<usize>,
    n_ant_ue: Option<usize>,
    stream_dim: Option<usize>,
    backhaul_capacity: Option<f64>,
    fronthaul_capacity: Option<f64>,
    total_bandwidth: Option<f64>,
    path_loss_exponent: Option<f64>,
    reference_distance: Option<f64>,
    area_radius: Option<f64>,
    snr_db: Vec<f64>,
    privacy_threshold: Vec<f64>,
    schemes: Option<Vec<BandwidthScheme>>,
    modes: Option<Vec<CompressionMode>>,
    trials: Option<usize>,
    base_seed: Option<u64>,
    max_iter: Option<usize>,
    rel_tol: Option<f64>,
    restarts: Option<usize>,
    solver_tolerance: Option<f64>,
    freeze_theta: Option<bool>,
    workers: Option<usize>,
}

impl ExperimentConfig {
    /// Parses a flat TOML document; errors name the offending key.
    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        let d = Self::default();
        let cfg = Self {
            n_rus: raw.n_rus.unwrap_or(d.n_rus),
            n_ues: raw.n_ues.unwrap_or(d.n_ues),
            n_ant_ru: raw.n_ant_ru.unwrap_or(d.n_ant_ru),
            n_ant_ue: raw.n_ant_ue.unwrap_or(d.n_ant_ue),
            stream_dim: raw.stream_dim.or(d.stream_dim),
            backhaul_capacity: raw.backhaul_capacity.unwrap_or(d.backhaul_capacity),
            fronthaul_capacity: raw.fronthaul_capacity.unwrap_or(d.fronthaul_capacity),
            total_bandwidth: raw.total_bandwidth.unwrap_or(d.total_bandwidth),
            path_loss_exponent: raw.path_loss_exponent.unwrap_or(d.path_loss_exponent),
            reference_distance: raw.reference_distance.unwrap_or(d.reference_distance),
            area_radius: raw.area_radius.unwrap_or(d.area_radius),
            sweep: SweepSpec {
                snr_db: raw.snr_db,
                privacy_threshold: raw.privacy_threshold,
                schemes: raw.schemes.unwrap_or(d.sweep.schemes),
                modes: raw.modes.unwrap_or(d.sweep.modes),
                trials: raw.trials.unwrap_or(d.sweep.trials),
                base_seed: raw.base_seed.unwrap_or(d.sweep.base_seed),
            },
            cccp: CccpOptions {
                max_iter: raw.max_iter.unwrap_or(d.cccp.max_iter),
                rel_tol: raw.rel_tol.unwrap_or(d.cccp.rel_tol),
                restarts: raw.restarts.unwrap_or(d.cccp.restarts),
                solver_tolerance: raw.solver_tolerance.unwrap_or(d.cccp.solver_tolerance),
                seed: d.cccp.seed,
                freeze_theta: raw.freeze_theta.unwrap_or(d.cccp.freeze_theta),
            },
            workers: raw.workers.unwrap_or(d.workers),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let key = |k: &str, m: &str| Err(Error::Config(format!("key `{k}`: {m}")));
        for (k, v) in [("n_rus", self.n_rus), ("n_ues", self.n_ues), ("n_ant_ru", self.n_ant_ru), ("n_ant_ue", self.n_ant_ue)] {
            if v == 0 {
                return key(k, "must be >= 1");
            }
        }
        if self.stream_dim == Some(0) {
            return key("stream_dim", "must be >= 1");
        }
        for (k, v) in [
            ("backhaul_capacity", self.backhaul_capacity),
            ("fronthaul_capacity", self.fronthaul_capacity),
            ("total_bandwidth", self.total_bandwidth),
            ("path_loss_exponent", self.path_loss_exponent),
            ("reference_distance", self.reference_distance),
            ("area_radius", self.area_radius),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return key(k, "must be finite and > 0");
            }
        }
        self.sweep.validate()?;
        self.cccp.validate().map_err(|e| Error::Config(e.to_string()))
    }

    /// Scenario at one grid point.
    pub fn network(&self, snr_db: f64, privacy_threshold: f64) -> NetworkConfig {
        let mut c = NetworkConfig::uniform(
            self.n_rus,
            self.n_ues,
            self.n_ant_ru,
            self.n_ant_ue,
            self.backhaul_capacity,
            self.fronthaul_capacity,
            self.total_bandwidth,
            snr_db,
            privacy_threshold,
        );
        if let Some(d) = self.stream_dim {
            c.stream_dim_private = [vec![d; self.n_ues], vec![d; self.n_ues]];
            c.stream_dim_shared = [vec![d; self.n_ues], vec![d; self.n_ues]];
        }
        c.path_loss_exponent = self.path_loss_exponent;
        c.reference_distance = self.reference_distance;
        c.area_radius = self.area_radius;
        c
    }
}
