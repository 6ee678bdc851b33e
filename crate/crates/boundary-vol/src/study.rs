//! Monte Carlo studies of the estimator: the empirical convergence rate
//! and robustness to jumps under truncation.

use crate::error::{Error, Result};
use crate::estimator::{estimate_iv, EstimatorConfig, ModelKind, TauMode};
use crate::exec::accumulate;
use crate::excursion::MCConfig;
use crate::observe::sample_bin_minima_direct_rep;
use crate::path::SamplePath;
use crate::psi::{calibrate_psi_ppp, PsiTable};
use crate::rng::{rng_for, StreamId};
use crate::stats::{ols_slope, MeanVar};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Shared configuration for the simulation studies.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyConfig {
    pub k: f64,
    pub kappa: f64,
    pub lambda: f64,
    pub seed: u64,
    /// Path nodes per bin; the same resolution is used for calibration so
    /// the tabulated law matches the sampled one exactly.
    pub nodes_per_bin: usize,
    /// Replications for the shared calibration table.
    pub table_replications: u64,
    /// Log-spaced sigma^2 grid (lo, hi, points per decade).
    pub table_grid: (f64, f64, usize),
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            k: 31.6,
            kappa: 2.0,
            lambda: 1.0,
            seed: 1,
            nodes_per_bin: 1024,
            table_replications: 100_000,
            table_grid: (0.02, 8.0, 60),
        }
    }
}

impl StudyConfig {
    /// Calibrates the shared moment table at the study's resolution.
    pub fn calibrate_table(&self) -> Result<PsiTable> {
        let grid = log_grid(self.table_grid.0, self.table_grid.1, self.table_grid.2);
        let cfg = MCConfig::new(
            self.table_replications,
            self.nodes_per_bin.max(1000),
            self.seed ^ 0x7ab1e,
            true,
        )?;
        calibrate_psi_ppp(self.k, &grid, &cfg)
    }
}

/// Log-spaced grid with the given number of points per decade.
pub fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let n = ((decades * per_decade as f64).ceil() as usize).max(2);
    (0..=n)
        .map(|i| lo * 10f64.powf(decades * i as f64 / n as f64))
        .collect()
}

/// One sample-size row of the rate study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateRow {
    pub n: u64,
    pub h_inv: u64,
    pub r_inv: u64,
    pub mean_iv: f64,
    pub bias: f64,
    pub rmse: f64,
    pub rmse_std_error: f64,
    pub replications: u64,
}

/// Result of the convergence-rate study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateReport {
    pub rows: Vec<RateRow>,
    /// Least-squares slope of log RMSE against log n.
    pub slope: f64,
    pub slope_std_error: f64,
    pub config: StudyConfig,
}

/// Empirical convergence rate: RMSE of the blockwise estimator against the
/// known truth (sigma = 1) across sample sizes, with a log-log slope fit.
pub fn rate_study(ns: &[u64], replications: u64, config: &StudyConfig) -> Result<RateReport> {
    if ns.len() < 4 {
        return Err(Error::config("rate study needs at least 4 sample sizes"));
    }
    if replications < 100 {
        return Err(Error::config("rate study needs at least 100 replications"));
    }
    let table = config.calibrate_table()?;
    let mut rows = Vec::with_capacity(ns.len());
    for (ni, &n) in ns.iter().enumerate() {
        let cfg = EstimatorConfig::resolve(n, config.lambda, config.k, config.kappa, ModelKind::Ppp, TauMode::None)?;
        let stats = run_brownian_batch(n, &cfg, &table, config, replications, ni as u64, 0.0)?;
        rows.push(make_row(n, &cfg, &stats, replications));
    }
    let xs: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.rmse.ln()).collect();
    let (slope, slope_std_error) = ols_slope(&xs, &ys);
    Ok(RateReport {
        rows,
        slope,
        slope_std_error,
        config: config.clone(),
    })
}

struct ErrStats {
    iv: MeanVar,
    sq_err: MeanVar,
}

impl ErrStats {
    fn new() -> Self {
        ErrStats {
            iv: MeanVar::default(),
            sq_err: MeanVar::default(),
        }
    }

    fn merge(&mut self, o: ErrStats) {
        self.iv.merge(o.iv);
        self.sq_err.merge(o.sq_err);
    }
}

fn make_row(n: u64, cfg: &EstimatorConfig, stats: &ErrStats, replications: u64) -> RateRow {
    let mse = stats.sq_err.mean();
    let rmse = mse.sqrt();
    // Delta method: se(rmse) = se(mse) / (2 rmse).
    let rmse_se = stats.sq_err.std_error() / (2.0 * rmse);
    RateRow {
        n,
        h_inv: cfg.grids.h_inv,
        r_inv: cfg.grids.r_inv,
        mean_iv: stats.iv.mean(),
        bias: stats.iv.mean() - 1.0,
        rmse,
        rmse_std_error: rmse_se,
        replications,
    }
}

/// Simulates unit-volatility Brownian boundaries, draws bin minima directly
/// and estimates; `jump_size` > 0 adds two boundary jumps (at t = 0.3, 0.7).
fn run_brownian_batch(
    n: u64,
    cfg: &EstimatorConfig,
    table: &PsiTable,
    config: &StudyConfig,
    replications: u64,
    stream_salt: u64,
    jump_size: f64,
) -> Result<ErrStats> {
    let h_inv = cfg.grids.h_inv as usize;
    let m = h_inv * config.nodes_per_bin;
    let seed = config.seed ^ (stream_salt.wrapping_mul(0x9e37_79b9));
    let lambda = config.lambda;
    let cfg = *cfg;
    let table = table.clone();
    let out = accumulate(
        replications,
        ErrStats::new,
        move |acc, rep| {
            let path = brownian_with_jumps(m, seed, rep, jump_size);
            let minima =
                sample_bin_minima_direct_rep(&path, n, lambda, h_inv, rep, seed).unwrap();
            let est = estimate_iv(&minima, &cfg, &table).unwrap();
            acc.iv.push(est.iv);
            acc.sq_err.push((est.iv - 1.0) * (est.iv - 1.0));
        },
        ErrStats::merge,
    );
    Ok(out)
}

fn brownian_with_jumps(m: usize, seed: u64, rep: u64, jump_size: f64) -> SamplePath {
    let mut rng = rng_for(seed, rep, StreamId::PATH_W);
    let dt = 1.0 / m as f64;
    let sqrt_dt = dt.sqrt();
    let j1 = (0.3 * m as f64).round() as usize;
    let j2 = (0.7 * m as f64).round() as usize;
    let mut times = Vec::with_capacity(m + 1);
    let mut x = Vec::with_capacity(m + 1);
    times.push(0.0);
    x.push(0.0);
    let mut w = 0.0;
    for i in 1..=m {
        w += sqrt_dt * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
        let mut v = w;
        if jump_size != 0.0 {
            if i >= j1 {
                v += jump_size;
            }
            if i >= j2 {
                v += jump_size;
            }
        }
        times.push(i as f64 * dt);
        x.push(v);
    }
    let jump_times = if jump_size != 0.0 {
        vec![j1 as f64 * dt, j2 as f64 * dt]
    } else {
        Vec::new()
    };
    SamplePath {
        id: seed ^ rep,
        times,
        x_values: x,
        sigma_values: vec![1.0; m + 1],
        jump_times_x: jump_times,
        jump_times_sigma: Vec::new(),
        sigma_clip_events: 0,
    }
}

/// Paired jump-robustness experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub n: u64,
    pub jump_size: f64,
    pub rmse_no_jump: f64,
    pub rmse_no_jump_truncated: f64,
    pub rmse_jump_untruncated: f64,
    pub rmse_jump_truncated: f64,
    /// rmse_jump_truncated / rmse_no_jump.
    pub truncated_ratio: f64,
    /// rmse_jump_untruncated / rmse_no_jump.
    pub untruncated_ratio: f64,
    /// Volatility-jump case: sigma jumps 1 -> 3 at t = 1/2 (IV = 5).
    pub vol_jump_rmse_truncated: f64,
    pub vol_jump_rel_error: f64,
    pub replications: u64,
    pub config: StudyConfig,
}

/// Runs paired (truncated, untruncated) estimates with and without two
/// injected boundary jumps of size `jump_multiplier * sqrt(h_n)`, plus a
/// volatility-jump control.
pub fn robustness_study(
    n: u64,
    jump_multiplier: f64,
    replications: u64,
    config: &StudyConfig,
) -> Result<RobustnessReport> {
    if replications < 100 {
        return Err(Error::config("robustness study needs >= 100 replications"));
    }
    let table = config.calibrate_table()?;
    let plain = EstimatorConfig::resolve(n, config.lambda, config.k, config.kappa, ModelKind::Ppp, TauMode::None)?;
    let trunc = EstimatorConfig {
        tau: TauMode::Adaptive,
        ..plain
    };
    let h_n = plain.grids.h_n();
    let jump_size = jump_multiplier * h_n.sqrt();

    let base = run_brownian_batch(n, &plain, &table, config, replications, 100, 0.0)?;
    let base_trunc = run_brownian_batch(n, &trunc, &table, config, replications, 100, 0.0)?;
    let jump_plain = run_brownian_batch(n, &plain, &table, config, replications, 100, jump_size)?;
    let jump_trunc = run_brownian_batch(n, &trunc, &table, config, replications, 100, jump_size)?;

    // Volatility jump: sigma = 1 on [0, 1/2), 3 on [1/2, 1]; IV = 5.
    let vol = vol_jump_batch(n, &trunc, &table, config, replications)?;

    let rmse_no_jump = base.sq_err.mean().sqrt();
    let report = RobustnessReport {
        n,
        jump_size,
        rmse_no_jump,
        rmse_no_jump_truncated: base_trunc.sq_err.mean().sqrt(),
        rmse_jump_untruncated: jump_plain.sq_err.mean().sqrt(),
        rmse_jump_truncated: jump_trunc.sq_err.mean().sqrt(),
        truncated_ratio: jump_trunc.sq_err.mean().sqrt() / rmse_no_jump,
        untruncated_ratio: jump_plain.sq_err.mean().sqrt() / rmse_no_jump,
        vol_jump_rmse_truncated: vol.sq_err.mean().sqrt(),
        vol_jump_rel_error: (vol.iv.mean() - 5.0).abs() / 5.0,
        replications,
        config: config.clone(),
    };
    Ok(report)
}

fn vol_jump_batch(
    n: u64,
    cfg: &EstimatorConfig,
    table: &PsiTable,
    config: &StudyConfig,
    replications: u64,
) -> Result<ErrStats> {
    let h_inv = cfg.grids.h_inv as usize;
    let m = h_inv * config.nodes_per_bin;
    let seed = config.seed ^ 0x5151;
    let lambda = config.lambda;
    let cfg = *cfg;
    let table = table.clone();
    let out = accumulate(
        replications,
        ErrStats::new,
        move |acc, rep| {
            let mut rng = rng_for(seed, rep, StreamId::PATH_W);
            let dt = 1.0 / m as f64;
            let sqrt_dt = dt.sqrt();
            let mut x = Vec::with_capacity(m + 1);
            let mut sigma_vals = Vec::with_capacity(m + 1);
            let mut times = Vec::with_capacity(m + 1);
            x.push(0.0);
            sigma_vals.push(1.0);
            times.push(0.0);
            let mut v = 0.0;
            let mut sq = 0.0; // pathwise integrated variance
            for i in 1..=m {
                let t_prev = (i - 1) as f64 * dt;
                let sig = if t_prev < 0.5 { 1.0 } else { 3.0 };
                v += sig
                    * sqrt_dt
                    * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
                sq += sig * sig * dt;
                x.push(v);
                sigma_vals.push(if (i as f64 * dt) < 0.5 { 1.0 } else { 3.0 });
                times.push(i as f64 * dt);
            }
            let path = SamplePath {
                id: seed ^ rep,
                times,
                x_values: x,
                sigma_values: sigma_vals,
                jump_times_x: Vec::new(),
                jump_times_sigma: vec![0.5],
                sigma_clip_events: 0,
            };
            let minima =
                sample_bin_minima_direct_rep(&path, n, lambda, h_inv, rep, seed).unwrap();
            let est = estimate_iv(&minima, &cfg, &table).unwrap();
            acc.iv.push(est.iv);
            acc.sq_err.push((est.iv - sq) * (est.iv - sq));
        },
        ErrStats::merge,
    );
    Ok(out)
}
