//! `bvol`: batch workflows for boundary-model volatility estimation.

mod svg;

use boundary_vol::error::Error;
use boundary_vol::estimator::{
    estimate_iv, estimate_iv_parametric, EstimatorConfig, ModelKind, TauMode,
};
use boundary_vol::excursion::{mc_exp_area_many, MCConfig};
use boundary_vol::observe::{
    bin_minima_from_points, read_ppp_csv, sample_ppp, sample_regression, write_ppp_csv,
    write_regression_csv, BinnedObservations, NoiseSpec,
};
use boundary_vol::path::{simulate_ito, Coeff, JumpSize, JumpSpec, PathConfig};
use boundary_vol::psi::{calibrate_psi_ppp, calibrate_psi_regression, PsiTable};
use boundary_vol::quotes::{
    estimate_day, ingest_quotes_csv, DayResult, QuoteSchema, QuoteSeries, RunReport, Side,
};
use boundary_vol::study::{log_grid, rate_study, robustness_study, StudyConfig};
use boundary_vol::airy;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Parser)]
#[command(name = "bvol", version, about = "Volatility estimation under one-sided errors")]
struct Cli {
    /// Base random seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker thread cap (results are identical for any value).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// TOML config file supplying defaults for the common flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

/// Defaults that can be supplied via `--config`.
#[derive(Debug, Default, Deserialize)]
struct FileConfig {
    seed: Option<u64>,
    k: Option<f64>,
    kappa: Option<f64>,
    lambda: Option<f64>,
    #[serde(default)]
    schema: Option<QuoteSchema>,
}

#[derive(Args, Debug)]
struct CommonEst {
    /// Bin-width constant of the rate-optimal rule.
    #[arg(long)]
    k: Option<f64>,
    /// Coarse-block constant (r_n = kappa n^(-1/3)).
    #[arg(long)]
    kappa: Option<f64>,
    /// Noise rate / intensity parameter.
    #[arg(long)]
    lambda: Option<f64>,
    /// Absolute truncation level for blockwise sigma^2.
    #[arg(long, conflicts_with = "tau_adaptive")]
    tau_abs: Option<f64>,
    /// Data-driven pair-increment truncation.
    #[arg(long)]
    tau_adaptive: bool,
}

impl CommonEst {
    fn tau(&self) -> TauMode {
        if let Some(tau) = self.tau_abs {
            TauMode::Abs { tau }
        } else if self.tau_adaptive {
            TauMode::Adaptive
        } else {
            TauMode::None
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum ModelArg {
    Ppp,
    Regression,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum NoiseArg {
    Exponential,
    Uniform,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum SideArg {
    Ask,
    Bid,
    Both,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a boundary path (CSV: t,x,sigma) and optionally observations.
    Simulate {
        #[arg(long, default_value_t = 20_000)]
        grid_points: usize,
        #[arg(long, default_value_t = 1.0)]
        sigma0: f64,
        #[arg(long, default_value_t = 0.0)]
        drift: f64,
        /// Jump intensity of the boundary (per unit time).
        #[arg(long, default_value_t = 0.0)]
        jump_intensity: f64,
        /// Fixed jump size used when the intensity is positive.
        #[arg(long, default_value_t = 0.0)]
        jump_size: f64,
        #[arg(long)]
        output: PathBuf,
        /// Also sample PPP observations to this CSV (columns t,y).
        #[arg(long)]
        emit_ppp: Option<PathBuf>,
        /// Also sample regression observations to this CSV (columns i,y).
        #[arg(long)]
        emit_regression: Option<PathBuf>,
        /// Sample size for emitted observations.
        #[arg(long, default_value_t = 10_000)]
        n: u64,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        /// Vertical band multiplier for the PPP sampler.
        #[arg(long, default_value_t = 50.0)]
        band_multiplier: f64,
        #[arg(long, value_enum, default_value_t = NoiseArg::Exponential)]
        noise: NoiseArg,
    },
    /// Calibrate a moment-function table and write it as JSON.
    CalibratePsi {
        #[arg(long)]
        k: Option<f64>,
        #[arg(long, default_value_t = 0.05)]
        grid_min: f64,
        #[arg(long, default_value_t = 10.0)]
        grid_max: f64,
        /// Grid points per decade of sigma^2.
        #[arg(long, default_value_t = 60)]
        points: usize,
        #[arg(long, default_value_t = 100_000)]
        reps: u64,
        #[arg(long, value_enum, default_value_t = ModelArg::Ppp)]
        model: ModelArg,
        /// Sample size (regression model only).
        #[arg(long)]
        n: Option<u64>,
        #[arg(long, value_enum, default_value_t = NoiseArg::Exponential)]
        noise: NoiseArg,
        #[arg(long)]
        lambda: Option<f64>,
        /// Time-grid nodes per unit bin.
        #[arg(long, default_value_t = 2000)]
        time_grid: usize,
        #[arg(long)]
        output: PathBuf,
    },
    /// Estimate integrated volatility from an observation CSV.
    Estimate {
        #[arg(long, value_enum)]
        model: ModelArg,
        #[arg(long)]
        psi_table: PathBuf,
        /// Observation CSV: t,y for the PPP model; i,y for regression.
        #[arg(long)]
        input: PathBuf,
        /// Sample size n (inferred from the file for regression input).
        #[arg(long)]
        n: Option<u64>,
        #[command(flatten)]
        common: CommonEst,
        /// Use the global (parametric) estimator instead of the blockwise one.
        #[arg(long)]
        parametric: bool,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Parse a quote CSV into a normalized QuoteSeries JSON.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        day_id: String,
        #[arg(long, default_value = "time")]
        time_col: String,
        #[arg(long, default_value = "ask_price")]
        ask_col: String,
        #[arg(long, default_value = "bid_price")]
        bid_col: String,
        #[arg(long, default_value_t = 1.0)]
        price_scale: f64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Day-wise estimation from ingested quotes (ask and/or bid side).
    EstimateDay {
        /// QuoteSeries JSON produced by `ingest`.
        #[arg(long)]
        quotes: PathBuf,
        #[arg(long)]
        psi_table: PathBuf,
        #[arg(long, value_enum, default_value_t = SideArg::Both)]
        side: SideArg,
        #[command(flatten)]
        common: CommonEst,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Empirical convergence-rate study (CSV + SVG + JSON report).
    RateStudy {
        /// Comma-separated sample sizes.
        #[arg(long, default_value = "4096,8192,16384,32768,65536,131072")]
        n_list: String,
        #[arg(long, default_value_t = 200)]
        reps: u64,
        #[command(flatten)]
        common: CommonEst,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Paired jump-robustness study (CSV + SVG + JSON report).
    RobustnessStudy {
        #[arg(long, default_value_t = 30_000)]
        n: u64,
        #[arg(long, default_value_t = 5.0)]
        jump_multiplier: f64,
        #[arg(long, default_value_t = 200)]
        reps: u64,
        #[command(flatten)]
        common: CommonEst,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Special-function oracle diagnostics as CSV (Wronskian, MC match).
    OracleCheck {
        #[arg(long, default_value_t = 4000)]
        reps: u64,
        #[arg(long, default_value_t = 2000)]
        time_grid: usize,
        /// Write CSVs here instead of stdout.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<FileConfig, Error> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p)?;
            toml::from_str(&text).map_err(|e| Error::Config(format!("config file: {e}")))
        }
    }
}

fn write_out(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, bytes)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    let file_cfg = load_config(&cli.config)?;
    if let Some(t) = cli.threads {
        boundary_vol::exec::configure_threads(t);
    }
    let seed = cli.seed.or(file_cfg.seed).unwrap_or(1);

    match cli.command {
        Command::Simulate {
            grid_points,
            sigma0,
            drift,
            jump_intensity,
            jump_size,
            output,
            emit_ppp,
            emit_regression,
            n,
            lambda,
            band_multiplier,
            noise,
        } => {
            let mut cfg = PathConfig::brownian(grid_points, sigma0, seed);
            cfg.drift = Coeff::Const(drift);
            cfg.drift_bound = drift.abs().max(1.0);
            if jump_intensity > 0.0 {
                cfg.jumps_x = Some(JumpSpec {
                    intensity: jump_intensity,
                    size: JumpSize::Fixed(jump_size),
                });
            }
            let path = simulate_ito(&cfg)?;
            let mut buf = Vec::new();
            path.write_csv(&mut buf)?;
            write_out(&output, &buf)?;
            if let Some(p) = emit_ppp {
                let shared = Arc::new(path.clone());
                let obs = sample_ppp(&shared, n, lambda, band_multiplier)?;
                let mut buf = Vec::new();
                write_ppp_csv(&obs, &mut buf)?;
                write_out(&p, &buf)?;
            }
            if let Some(p) = emit_regression {
                let noise = make_noise(noise, lambda);
                let obs = sample_regression(&path, n as usize, &noise, seed)?;
                let mut buf = Vec::new();
                write_regression_csv(&obs, &mut buf)?;
                write_out(&p, &buf)?;
            }
            Ok(())
        }

        Command::CalibratePsi {
            k,
            grid_min,
            grid_max,
            points,
            reps,
            model,
            n,
            noise,
            lambda,
            time_grid,
            output,
        } => {
            let k = k.or(file_cfg.k).unwrap_or(31.6);
            let lambda = lambda.or(file_cfg.lambda).unwrap_or(1.0);
            let grid = log_grid(grid_min, grid_max, points);
            let mc = MCConfig::new(reps, time_grid, seed, true)?;
            let table = match model {
                ModelArg::Ppp => calibrate_psi_ppp(k, &grid, &mc)?,
                ModelArg::Regression => {
                    let n = n.ok_or_else(|| {
                        Error::Config("--n is required for the regression model".into())
                    })?;
                    calibrate_psi_regression(k, n, &grid, &make_noise(noise, lambda), &mc)?
                }
            };
            let mut buf = Vec::new();
            table.to_json(&mut buf)?;
            write_out(&output, &buf)
        }

        Command::Estimate {
            model,
            psi_table,
            input,
            n,
            common,
            parametric,
            output,
        } => {
            let table = PsiTable::from_json(fs::File::open(&psi_table)?)?;
            let k = common.k.or(file_cfg.k).unwrap_or(table.k);
            let kappa = common.kappa.or(file_cfg.kappa).unwrap_or(2.0);
            let lambda = common.lambda.or(file_cfg.lambda).unwrap_or(1.0);
            let text = fs::File::open(&input)?;
            let est = match model {
                ModelArg::Ppp => {
                    let n = n.ok_or_else(|| {
                        Error::Config("--n is required for PPP observations".into())
                    })?;
                    let cfg = EstimatorConfig::resolve(
                        n,
                        lambda,
                        k,
                        kappa,
                        ModelKind::Ppp,
                        common.tau(),
                    )?;
                    let points = read_ppp_csv(text)?;
                    let minima = bin_minima_from_points(&points, cfg.grids.h_inv as usize)?;
                    if parametric {
                        estimate_iv_parametric(&minima, &cfg, &table)?
                    } else {
                        estimate_iv(&minima, &cfg, &table)?
                    }
                }
                ModelArg::Regression => {
                    let values = read_indexed_csv(text)?;
                    let n = (values.len() - 1) as u64;
                    let cfg = EstimatorConfig::resolve(
                        n,
                        lambda,
                        k,
                        kappa,
                        ModelKind::Regression,
                        common.tau(),
                    )?;
                    let h_inv = cfg.grids.h_inv as usize;
                    let usable = (n as usize / h_inv) * h_inv;
                    let obs = boundary_vol::observe::RegressionObservations {
                        y_values: values[..usable + 1].to_vec(),
                        noise_family: "imported".into(),
                        noise_rate: lambda,
                    };
                    let minima = obs.extract_bin_minima(h_inv)?;
                    if parametric {
                        estimate_iv_parametric(&minima, &cfg, &table)?
                    } else {
                        estimate_iv(&minima, &cfg, &table)?
                    }
                }
            };
            emit_json(output.as_deref(), &est)
        }

        Command::Ingest {
            input,
            day_id,
            time_col,
            ask_col,
            bid_col,
            price_scale,
            output,
        } => {
            let schema = file_cfg.schema.unwrap_or(QuoteSchema {
                time_col,
                ask_col,
                bid_col,
                price_scale,
            });
            let quotes = ingest_quotes_csv(fs::File::open(&input)?, &day_id, &schema)?;
            println!(
                "day {}: {} rows -> {} quotes ({} deduplicated, {} crossed), \
                 {} ask events, {} bid events",
                quotes.day_id,
                quotes.raw_rows,
                quotes.timestamps.len(),
                quotes.deduplicated,
                quotes.crossed_excluded,
                quotes.n_ask,
                quotes.n_bid
            );
            let buf = serde_json::to_vec_pretty(&quotes)?;
            write_out(&output, &buf)
        }

        Command::EstimateDay {
            quotes,
            psi_table,
            side,
            common,
            output,
        } => {
            let quotes: QuoteSeries = serde_json::from_reader(fs::File::open(&quotes)?)?;
            let table = PsiTable::from_json(fs::File::open(&psi_table)?)?;
            let k = common.k.or(file_cfg.k).unwrap_or(table.k);
            let kappa = common.kappa.or(file_cfg.kappa).unwrap_or(2.0);
            let lambda = common.lambda.or(file_cfg.lambda).unwrap_or(1.0);
            let tau = common.tau();
            let run_side = |s: Side| estimate_day(&quotes, s, k, kappa, lambda, tau, &table);
            let (ask, bid) = match side {
                SideArg::Ask => (Some(run_side(Side::Ask)?), None),
                SideArg::Bid => (None, Some(run_side(Side::Bid)?)),
                SideArg::Both => (Some(run_side(Side::Ask)?), Some(run_side(Side::Bid)?)),
            };
            for (label, est) in [("ask", &ask), ("bid", &bid)] {
                if let Some(e) = est {
                    println!(
                        "{} {label}: IV = {:.6e} ({} blocks, {} truncated, {} clamped)",
                        quotes.day_id,
                        e.iv,
                        e.block_sigma_sq.len(),
                        e.truncated_blocks.len(),
                        e.clamped_blocks.len()
                    );
                }
            }
            let report = RunReport {
                days: vec![DayResult {
                    day_id: quotes.day_id.clone(),
                    n_ask: quotes.n_ask,
                    n_bid: quotes.n_bid,
                    ask: ask
                        .clone()
                        .or_else(|| bid.clone())
                        .expect("at least one side estimated"),
                    bid: bid.or(ask).expect("at least one side estimated"),
                }],
                k,
                kappa,
                lambda,
                tau: format!("{tau:?}"),
                seed,
                emitted_files: output
                    .iter()
                    .map(|p| p.display().to_string())
                    .collect(),
            };
            emit_json(output.as_deref(), &report)
        }

        Command::RateStudy {
            n_list,
            reps,
            common,
            out_dir,
        } => {
            let ns: Vec<u64> = n_list
                .split(',')
                .map(|s| s.trim().parse::<u64>())
                .collect::<Result<_, _>>()
                .map_err(|e| Error::Config(format!("bad --n-list: {e}")))?;
            let config = StudyConfig {
                k: common.k.or(file_cfg.k).unwrap_or(31.6),
                kappa: common.kappa.or(file_cfg.kappa).unwrap_or(2.0),
                lambda: common.lambda.or(file_cfg.lambda).unwrap_or(1.0),
                seed,
                ..StudyConfig::default()
            };
            let report = rate_study(&ns, reps, &config)?;
            fs::create_dir_all(&out_dir)?;
            let mut csv = String::from("n,h_inv,r_inv,mean_iv,bias,rmse,rmse_std_error,replications\n");
            for r in &report.rows {
                csv.push_str(&format!(
                    "{},{},{},{:.8e},{:.8e},{:.8e},{:.8e},{}\n",
                    r.n, r.h_inv, r.r_inv, r.mean_iv, r.bias, r.rmse, r.rmse_std_error, r.replications
                ));
            }
            write_out(&out_dir.join("rate_study.csv"), csv.as_bytes())?;
            let rmse_pts: Vec<(f64, f64)> =
                report.rows.iter().map(|r| (r.n as f64, r.rmse)).collect();
            let c0 = report.rows[0].rmse * (report.rows[0].n as f64).powf(1.0 / 3.0);
            let guide: Vec<(f64, f64)> = report
                .rows
                .iter()
                .map(|r| (r.n as f64, c0 * (r.n as f64).powf(-1.0 / 3.0)))
                .collect();
            let svg = svg::log_log_plot(
                &format!("RMSE vs n (slope {:.3})", report.slope),
                &[
                    svg::Series {
                        label: "empirical RMSE",
                        points: rmse_pts,
                        color: "#1f77b4",
                    },
                    svg::Series {
                        label: "n^(-1/3) guide",
                        points: guide,
                        color: "#d62728",
                    },
                ],
            );
            write_out(&out_dir.join("rate_study.svg"), svg.as_bytes())?;
            println!(
                "slope = {:.4} +- {:.4} over n in {:?}",
                report.slope,
                report.slope_std_error,
                ns
            );
            let buf = serde_json::to_vec_pretty(&report)?;
            write_out(&out_dir.join("rate_study.json"), &buf)
        }

        Command::RobustnessStudy {
            n,
            jump_multiplier,
            reps,
            common,
            out_dir,
        } => {
            let config = StudyConfig {
                k: common.k.or(file_cfg.k).unwrap_or(31.6),
                kappa: common.kappa.or(file_cfg.kappa).unwrap_or(2.0),
                lambda: common.lambda.or(file_cfg.lambda).unwrap_or(1.0),
                seed,
                ..StudyConfig::default()
            };
            let report = robustness_study(n, jump_multiplier, reps, &config)?;
            fs::create_dir_all(&out_dir)?;
            let csv = format!(
                "quantity,value\nrmse_no_jump,{:.8e}\nrmse_no_jump_truncated,{:.8e}\n\
                 rmse_jump_untruncated,{:.8e}\nrmse_jump_truncated,{:.8e}\n\
                 truncated_ratio,{:.6}\nuntruncated_ratio,{:.6}\n\
                 vol_jump_rmse_truncated,{:.8e}\nvol_jump_rel_error,{:.6}\n",
                report.rmse_no_jump,
                report.rmse_no_jump_truncated,
                report.rmse_jump_untruncated,
                report.rmse_jump_truncated,
                report.truncated_ratio,
                report.untruncated_ratio,
                report.vol_jump_rmse_truncated,
                report.vol_jump_rel_error
            );
            write_out(&out_dir.join("robustness.csv"), csv.as_bytes())?;
            let svg = svg::log_log_plot(
                "RMSE: truncated vs untruncated under jumps",
                &[svg::Series {
                    label: "no-jump / trunc / untrunc",
                    points: vec![
                        (1.0, report.rmse_no_jump),
                        (2.0, report.rmse_jump_truncated),
                        (3.0, report.rmse_jump_untruncated),
                    ],
                    color: "#1f77b4",
                }],
            );
            write_out(&out_dir.join("robustness.svg"), svg.as_bytes())?;
            println!(
                "truncated ratio = {:.3}, untruncated ratio = {:.3}",
                report.truncated_ratio, report.untruncated_ratio
            );
            let buf = serde_json::to_vec_pretty(&report)?;
            write_out(&out_dir.join("robustness.json"), &buf)
        }

        Command::OracleCheck {
            reps,
            time_grid,
            out_dir,
        } => {
            let mut wronskian = String::from("x,wronskian,airy_integral,abs_error\n");
            for k in 0..50 {
                let x = -5.0 + 15.0 * k as f64 / 49.0;
                let lhs = std::f64::consts::PI
                    * (airy::scorer_gi_prime(x)? * airy::airy_ai(x)?
                        - airy::airy_ai_prime(x)? * airy::scorer_gi(x)?);
                let rhs = airy::airy_integral_ai(x)?;
                wronskian.push_str(&format!(
                    "{x:.6},{lhs:.12e},{rhs:.12e},{:.3e}\n",
                    (lhs - rhs).abs()
                ));
            }

            let mut mc_match = String::from(
                "x,theta,s,zeta_scaled,mc_quadrature,mc_std_error,abs_gap,within_3se\n",
            );
            let mc = MCConfig::new(reps, time_grid, seed, true)?;
            for &(x, theta, s) in &[(0.0, 1.0, 1.0), (0.5, 1.0, 2.0), (-0.5, 2.0, 1.0)] {
                let (quad, se) = laplace_quadrature(x, theta, s, &mc)?;
                let z = airy::zeta(&airy::ZetaParams::new(s, x, theta)?)?
                    * theta.powf(-2.0 / 3.0);
                let gap = (z - quad).abs();
                mc_match.push_str(&format!(
                    "{x:.3},{theta:.3},{s:.3},{z:.10e},{quad:.10e},{se:.3e},{gap:.3e},{}\n",
                    gap <= 3.0 * se
                ));
            }

            match out_dir {
                Some(dir) => {
                    fs::create_dir_all(&dir)?;
                    write_out(&dir.join("wronskian.csv"), wronskian.as_bytes())?;
                    write_out(&dir.join("laplace_mc_match.csv"), mc_match.as_bytes())?;
                }
                None => {
                    print!("{wronskian}");
                    println!();
                    print!("{mc_match}");
                }
            }
            Ok(())
        }
    }
}

/// MC side of the Laplace-transform identity: Simpson quadrature over the
/// horizon of e^(-s t) E[exp(-sqrt(2) theta area_t(x))], using Brownian
/// scaling to express the horizon-t functional through the unit-horizon one.
/// At t = 0 the integrand is exactly 1. The horizon is cut where
/// e^(-s t) < 1e-6.
fn laplace_quadrature(
    x: f64,
    theta: f64,
    s: f64,
    cfg: &MCConfig,
) -> Result<(f64, f64), Error> {
    let t_star = 13.8 / s;
    let nodes = 201usize;
    let h = t_star / (nodes - 1) as f64;
    let pairs: Vec<(f64, f64)> = (1..nodes)
        .map(|i| {
            let t = i as f64 * h;
            (x / t.sqrt(), 2f64.sqrt() * theta * t.powf(1.5))
        })
        .collect();
    let ests = mc_exp_area_many(&pairs, cfg)?;
    let weight = |i: usize| {
        if i == 0 || i == nodes - 1 {
            h / 3.0
        } else if i % 2 == 1 {
            4.0 * h / 3.0
        } else {
            2.0 * h / 3.0
        }
    };
    let mut integral = weight(0); // exact integrand 1 at t = 0
    let mut se = 0.0;
    for (i, est) in ests.iter().enumerate() {
        let t = (i + 1) as f64 * h;
        integral += weight(i + 1) * (-s * t).exp() * est.value;
        se += weight(i + 1) * (-s * t).exp() * est.std_error;
    }
    Ok((integral, se))
}

fn read_indexed_csv<R: std::io::Read>(r: R) -> Result<Vec<f64>, Error> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(r);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Data(format!("csv: {e}")))?;
        let y: f64 = rec
            .get(1)
            .ok_or_else(|| Error::Data("missing y column".into()))?
            .parse()
            .map_err(|e| Error::Data(format!("bad y value: {e}")))?;
        out.push(y);
    }
    if out.is_empty() {
        return Err(Error::Data("no observations".into()));
    }
    Ok(out)
}

fn make_noise(kind: NoiseArg, rate: f64) -> NoiseSpec {
    match kind {
        NoiseArg::Exponential => NoiseSpec::Exponential { rate },
        NoiseArg::Uniform => NoiseSpec::Uniform { rate },
    }
}

fn emit_json<T: serde::Serialize>(path: Option<&Path>, value: &T) -> Result<(), Error> {
    let buf = serde_json::to_vec_pretty(value)?;
    match path {
        Some(p) => write_out(p, &buf),
        None => {
            std::io::stdout().write_all(&buf)?;
            println!();
            Ok(())
        }
    }
}
