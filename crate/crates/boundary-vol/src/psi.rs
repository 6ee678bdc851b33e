//! Calibration of the moment function mapping squared volatility to the
//! normalized expected squared difference of adjacent bin minima, its
//! monotone inverse, and the discrete-maximum constants of the regression
//! model.
//!
//! The scaling relation behind the bin width choice makes the problem
//! scale-free: two unit bins on [0, 2], a boundary sigma W, and bin minima
//! whose conditional survival given the path is
//! exp(-K int_bin (z - sigma W_t)_+ dt). Calibration simulates exactly this
//! two-bin problem and tabulates E[(m_2 - m_1)^2] over a grid of sigma^2.

use crate::error::{Error, Result};
use crate::exec::accumulate;
use crate::excursion::{MCConfig, MCEstimate};
use crate::interp::MonotoneCubic;
use crate::observe::NoiseSpec;
use crate::rng::{rng_for, StreamId};
use crate::stats::MeanVar;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Observation model a table was calibrated for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PsiModel {
    Ppp,
    Regression { n: u64, h_n: f64 },
}

impl PsiModel {
    pub fn kind(&self) -> &'static str {
        match self {
            PsiModel::Ppp => "ppp",
            PsiModel::Regression { .. } => "regression",
        }
    }
}

/// Serialized form of a table: exactly the documented JSON schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsiTableRecord {
    pub model: PsiModel,
    pub k: f64,
    pub sigma_sq_grid: Vec<f64>,
    pub psi_values: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub mc_config: MCConfig,
}

/// Calibrated, invertible moment-function table.
#[derive(Debug, Clone)]
pub struct PsiTable {
    pub model: PsiModel,
    pub k: f64,
    pub sigma_sq_grid: Vec<f64>,
    pub psi_values: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub mc_config: MCConfig,
    /// Per-point 2 Var(R) diagnostic from the time-reversal identity
    /// E[(m_2 - m_1)^2] = 2 Var(R); not serialized.
    pub variance_route: Vec<f64>,
    interp: MonotoneCubic,
}

impl PsiTable {
    /// Builds a table from raw values, enforcing strict monotonicity.
    pub fn from_values(
        model: PsiModel,
        k: f64,
        sigma_sq_grid: Vec<f64>,
        psi_values: Vec<f64>,
        std_errors: Vec<f64>,
        mc_config: MCConfig,
    ) -> Result<Self> {
        if psi_values.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::CalibrationRejected(
                "psi values must be strictly positive".into(),
            ));
        }
        for w in psi_values.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::CalibrationRejected(
                    "calibrated psi is not strictly increasing; \
                     raise K or the replication count"
                        .into(),
                ));
            }
        }
        let interp = MonotoneCubic::new(sigma_sq_grid.clone(), psi_values.clone())?;
        let variance_route = psi_values.clone();
        Ok(PsiTable {
            model,
            k,
            sigma_sq_grid,
            psi_values,
            std_errors,
            mc_config,
            variance_route,
            interp,
        })
    }

    pub fn to_record(&self) -> PsiTableRecord {
        PsiTableRecord {
            model: self.model,
            k: self.k,
            sigma_sq_grid: self.sigma_sq_grid.clone(),
            psi_values: self.psi_values.clone(),
            std_errors: self.std_errors.clone(),
            mc_config: self.mc_config,
        }
    }

    pub fn from_record(rec: PsiTableRecord) -> Result<Self> {
        PsiTable::from_values(
            rec.model,
            rec.k,
            rec.sigma_sq_grid,
            rec.psi_values,
            rec.std_errors,
            rec.mc_config,
        )
    }

    pub fn to_json<W: std::io::Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, &self.to_record())?;
        Ok(())
    }

    pub fn from_json<R: std::io::Read>(r: R) -> Result<Self> {
        let rec: PsiTableRecord = serde_json::from_reader(r)?;
        PsiTable::from_record(rec)
    }

    /// Interpolated psi value (clamped to the tabulated range).
    pub fn psi(&self, sigma_sq: f64) -> f64 {
        self.interp.eval(sigma_sq)
    }

    /// Monotone-interpolant inverse; the flag reports clamping to the
    /// calibrated range.
    pub fn invert(&self, value: f64) -> (f64, bool) {
        self.interp.invert(value)
    }

    pub fn sigma_sq_min(&self) -> f64 {
        self.sigma_sq_grid[0]
    }

    pub fn sigma_sq_max(&self) -> f64 {
        *self.sigma_sq_grid.last().unwrap()
    }
}

/// Inverse lookup on a table (clamping flagged, never fatal).
pub fn invert_psi(table: &PsiTable, value: f64) -> (f64, bool) {
    table.invert(value)
}

/// Sorted bin nodes with prefix sums; areas for both the path and its mirror.
struct BinNodes {
    sorted: Vec<f64>,
    prefix: Vec<f64>,
    total: f64,
}

impl BinNodes {
    fn new(nodes: &[f64]) -> Self {
        let mut sorted = nodes.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut prefix = Vec::with_capacity(sorted.len());
        let mut run = 0.0;
        for &v in &sorted {
            run += v;
            prefix.push(run);
        }
        let total = run;
        BinNodes {
            sorted,
            prefix,
            total,
        }
    }

    /// mean over nodes of (z - W_i)_+.
    fn area(&self, z: f64) -> f64 {
        let idx = self.sorted.partition_point(|&v| v <= z);
        if idx == 0 {
            return 0.0;
        }
        (idx as f64 * z - self.prefix[idx - 1]) / self.sorted.len() as f64
    }

    /// mean over nodes of (z + W_i)_+, i.e. the mirrored path's area.
    fn area_mirror(&self, z: f64) -> f64 {
        let m = self.sorted.len();
        let idx = self.sorted.partition_point(|&v| v < -z);
        let cnt = m - idx;
        if cnt == 0 {
            return 0.0;
        }
        let above = self.total - if idx == 0 { 0.0 } else { self.prefix[idx - 1] };
        (cnt as f64 * z + above) / m as f64
    }

    fn min(&self) -> f64 {
        self.sorted[0]
    }

    fn mirror_min(&self) -> f64 {
        -*self.sorted.last().unwrap()
    }
}

/// Solves area(z) = target by bracketing and bisection; `lo` must satisfy
/// area(lo) = 0 and the area must be nondecreasing.
fn invert_area(area: impl Fn(f64) -> f64, lo0: f64, target: f64, tol: f64) -> Result<f64> {
    if target <= 0.0 {
        return Ok(lo0);
    }
    let mut step = 1.0f64;
    let mut hi = lo0 + step;
    let mut expansions = 0;
    while area(hi) < target {
        step *= 2.0;
        hi = lo0 + step;
        expansions += 1;
        if expansions > 60 {
            return Err(Error::numeric(0, "area inversion failed to bracket"));
        }
    }
    let mut lo = lo0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if area(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// One scale-free two-bin draw: minima of both unit bins and the boundary
/// value at the shared bin edge (time 1).
#[derive(Debug, Clone, Copy)]
pub struct ScaleFreeMinima {
    pub m1: f64,
    pub m2: f64,
    pub center: f64,
}

const INVERT_TOL: f64 = 1e-12;

fn two_bin_path<R: Rng>(rng: &mut R, m: usize) -> Vec<f64> {
    let sqrt_dt = (1.0 / m as f64).sqrt();
    let mut nodes = Vec::with_capacity(2 * m);
    let mut w = 0.0;
    nodes.push(0.0);
    for _ in 1..2 * m {
        w += sqrt_dt * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng);
        nodes.push(w);
    }
    nodes
}

/// Draws scale-free two-bin minima in the point-process model with intensity
/// parameter K and boundary sigma W (plain draws, one per replication).
pub fn sample_two_bin_ppp(
    k: f64,
    sigma_sq: f64,
    cfg: &MCConfig,
) -> Result<Vec<ScaleFreeMinima>> {
    cfg.validate()?;
    if !(k > 0.0) || !(sigma_sq > 0.0) {
        return Err(Error::config("sample_two_bin_ppp needs K > 0, sigma^2 > 0"));
    }
    let m = cfg.time_grid;
    let sigma = sigma_sq.sqrt();
    let seed = cfg.seed;
    let out = accumulate(
        cfg.replications,
        Vec::new,
        move |acc: &mut Vec<ScaleFreeMinima>, rep| {
            let mut rng = rng_for(seed, rep, StreamId::CALIBRATION);
            let nodes = two_bin_path(&mut rng, m);
            let center = sigma * nodes[m];
            let b1 = BinNodes::new(&nodes[..m]);
            let b2 = BinNodes::new(&nodes[m..]);
            let u1 = 1.0 - rng.random::<f64>();
            let u2 = 1.0 - rng.random::<f64>();
            let t1 = -u1.ln() / (k * sigma);
            let t2 = -u2.ln() / (k * sigma);
            let m1 = sigma * invert_area(|z| b1.area(z), b1.min(), t1, INVERT_TOL).unwrap();
            let m2 = sigma * invert_area(|z| b2.area(z), b2.min(), t2, INVERT_TOL).unwrap();
            acc.push(ScaleFreeMinima { m1, m2, center });
        },
        |a, mut b| a.append(&mut b),
    );
    Ok(out)
}

/// Geometry of the scale-free regression problem derived from (K, n, noise).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RegressionGeometry {
    /// Observations per bin, rounded so that n h_n is an integer.
    pub per_bin: usize,
    /// Effective bin width N / n after rounding.
    pub h_n: f64,
    /// Effective intensity parameter n lambda h_n^(3/2).
    pub k_eff: f64,
}

fn regression_geometry(k: f64, n: u64, lambda: f64) -> Result<RegressionGeometry> {
    if !(k > 0.0) || n == 0 || !(lambda > 0.0) {
        return Err(Error::config("regression geometry needs K > 0, n >= 1, lambda > 0"));
    }
    let h_target = k.powf(2.0 / 3.0) * (n as f64 * lambda).powf(-2.0 / 3.0);
    let per_bin = (n as f64 * h_target).round().max(2.0) as usize;
    let h_n = per_bin as f64 / n as f64;
    let k_eff = n as f64 * lambda * h_n.powf(1.5);
    Ok(RegressionGeometry {
        per_bin,
        h_n,
        k_eff,
    })
}

/// Draws scale-free two-bin minima in the regression model: per bin,
/// min over the discrete grid of sigma W_{i/N} + h_n^(-1/2) eps_i.
pub fn sample_two_bin_regression(
    k: f64,
    n: u64,
    sigma_sq: f64,
    noise: &NoiseSpec,
    cfg: &MCConfig,
) -> Result<(Vec<ScaleFreeMinima>, RegressionGeometry)> {
    noise.validate()?;
    if !(sigma_sq > 0.0) {
        return Err(Error::config("sigma^2 must be positive"));
    }
    if cfg.replications < 100 {
        return Err(Error::config("MCConfig needs >= 100 replications"));
    }
    let geo = regression_geometry(k, n, noise.rate())?;
    let m = geo.per_bin;
    let scale = geo.h_n.powf(-0.5);
    let sigma = sigma_sq.sqrt();
    let seed = cfg.seed;
    let noise = noise.clone();
    let out = accumulate(
        cfg.replications,
        Vec::new,
        move |acc: &mut Vec<ScaleFreeMinima>, rep| {
            let mut rng = rng_for(seed, rep, StreamId::CALIBRATION);
            let nodes = two_bin_path(&mut rng, m);
            let center = sigma * nodes[m];
            let mut m1 = f64::INFINITY;
            let mut m2 = f64::INFINITY;
            for (i, &w) in nodes.iter().enumerate() {
                let y = sigma * w + scale * noise.sample(&mut rng);
                if i < m {
                    m1 = m1.min(y);
                } else {
                    m2 = m2.min(y);
                }
            }
            acc.push(ScaleFreeMinima { m1, m2, center });
        },
        |a, mut b| a.append(&mut b),
    );
    Ok((out, geo))
}

struct Calib {
    diff_sq: Vec<MeanVar>,
    r_first: Vec<MeanVar>,
    r_second: Vec<MeanVar>,
}

impl Calib {
    fn new(g: usize) -> Self {
        Calib {
            diff_sq: vec![MeanVar::default(); g],
            r_first: vec![MeanVar::default(); g],
            r_second: vec![MeanVar::default(); g],
        }
    }

    fn merge(&mut self, other: Calib) {
        for (a, b) in self.diff_sq.iter_mut().zip(other.diff_sq) {
            a.merge(b);
        }
        for (a, b) in self.r_first.iter_mut().zip(other.r_first) {
            a.merge(b);
        }
        for (a, b) in self.r_second.iter_mut().zip(other.r_second) {
            a.merge(b);
        }
    }

    fn two_var_r(&self, g: usize) -> f64 {
        // Pooled Var(R) over both antithetic branches.
        let n1 = self.r_first[g].n as f64;
        let n2 = self.r_second[g].n.max(1) as f64;
        if self.r_second[g].n == 0 {
            return 2.0 * self.r_first[g].var();
        }
        let mean = (self.r_first[g].sum + self.r_second[g].sum) / (n1 + n2);
        let ex2 = (self.r_first[g].sum_sq + self.r_second[g].sum_sq) / (n1 + n2);
        2.0 * (ex2 - mean * mean)
    }
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::config("sigma^2 grid must not be empty"));
    }
    if !(grid[0] > 0.0) {
        return Err(Error::config("sigma^2 grid must be strictly positive"));
    }
    for w in grid.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::config("sigma^2 grid must be strictly increasing"));
        }
    }
    Ok(())
}

/// Calibrates the moment function in the point-process model over a grid of
/// sigma^2 values. All grid points share each replication's path and
/// survival draws (common random numbers), which keeps neighbouring table
/// entries tightly coupled and the table monotone at practical replication
/// counts.
pub fn calibrate_psi_ppp(k: f64, sigma_sq_grid: &[f64], cfg: &MCConfig) -> Result<PsiTable> {
    cfg.validate()?;
    if !(k > 0.0) {
        return Err(Error::config("calibrate_psi_ppp requires K > 0"));
    }
    validate_grid(sigma_sq_grid)?;
    let g = sigma_sq_grid.len();
    let m = cfg.time_grid;
    let seed = cfg.seed;
    let antithetic = cfg.antithetic;
    let sigmas: Vec<f64> = sigma_sq_grid.iter().map(|s| s.sqrt()).collect();

    let acc = accumulate(
        cfg.replications,
        || Calib::new(g),
        move |acc, rep| {
            let mut rng = rng_for(seed, rep, StreamId::CALIBRATION);
            let nodes = two_bin_path(&mut rng, m);
            let center = nodes[m];
            let b1 = BinNodes::new(&nodes[..m]);
            let b2 = BinNodes::new(&nodes[m..]);
            let u1 = 1.0 - rng.random::<f64>();
            let u2 = 1.0 - rng.random::<f64>();
            for (gi, &sigma) in sigmas.iter().enumerate() {
                let t1 = -u1.ln() / (k * sigma);
                let t2 = -u2.ln() / (k * sigma);
                let z1 = invert_area(|z| b1.area(z), b1.min(), t1, INVERT_TOL).unwrap();
                let z2 = invert_area(|z| b2.area(z), b2.min(), t2, INVERT_TOL).unwrap();
                let d = sigma * (z2 - z1);
                let r = sigma * (z2 - center);
                if antithetic {
                    let z1m =
                        invert_area(|z| b1.area_mirror(z), b1.mirror_min(), t1, INVERT_TOL)
                            .unwrap();
                    let z2m =
                        invert_area(|z| b2.area_mirror(z), b2.mirror_min(), t2, INVERT_TOL)
                            .unwrap();
                    let dm = sigma * (z2m - z1m);
                    acc.diff_sq[gi].push(0.5 * (d * d + dm * dm));
                    acc.r_first[gi].push(r);
                    acc.r_second[gi].push(sigma * (z2m + center));
                } else {
                    acc.diff_sq[gi].push(d * d);
                    acc.r_first[gi].push(r);
                }
            }
        },
        Calib::merge,
    );

    build_table(PsiModel::Ppp, k, sigma_sq_grid, cfg, &acc)
}

/// Calibrates the discrete-model moment function for sample size n and the
/// given one-sided noise. The bin width follows the rate-optimal rule and is
/// rounded so that observations per bin is an integer.
pub fn calibrate_psi_regression(
    k: f64,
    n: u64,
    sigma_sq_grid: &[f64],
    noise: &NoiseSpec,
    cfg: &MCConfig,
) -> Result<PsiTable> {
    if cfg.replications < 100 {
        return Err(Error::config("MCConfig needs >= 100 replications"));
    }
    if !(k > 0.0) {
        return Err(Error::config("calibrate_psi_regression requires K > 0"));
    }
    noise.validate()?;
    validate_grid(sigma_sq_grid)?;
    let geo = regression_geometry(k, n, noise.rate())?;
    let g = sigma_sq_grid.len();
    let m = geo.per_bin;
    let scale = geo.h_n.powf(-0.5);
    let seed = cfg.seed;
    let antithetic = cfg.antithetic;
    let sigmas: Vec<f64> = sigma_sq_grid.iter().map(|s| s.sqrt()).collect();
    let noise = noise.clone();

    let acc = accumulate(
        cfg.replications,
        || Calib::new(g),
        move |acc, rep| {
            let mut rng = rng_for(seed, rep, StreamId::CALIBRATION);
            let nodes = two_bin_path(&mut rng, m);
            let eps: Vec<f64> = (0..2 * m).map(|_| scale * noise.sample(&mut rng)).collect();
            let center = nodes[m];
            for (gi, &sigma) in sigmas.iter().enumerate() {
                let (mut m1, mut m2) = (f64::INFINITY, f64::INFINITY);
                let (mut m1m, mut m2m) = (f64::INFINITY, f64::INFINITY);
                for i in 0..2 * m {
                    let y = sigma * nodes[i] + eps[i];
                    let ym = -sigma * nodes[i] + eps[i];
                    if i < m {
                        m1 = m1.min(y);
                        m1m = m1m.min(ym);
                    } else {
                        m2 = m2.min(y);
                        m2m = m2m.min(ym);
                    }
                }
                let d = m2 - m1;
                if antithetic {
                    let dm = m2m - m1m;
                    acc.diff_sq[gi].push(0.5 * (d * d + dm * dm));
                    acc.r_first[gi].push(m2 - sigma * center);
                    acc.r_second[gi].push(m2m + sigma * center);
                } else {
                    acc.diff_sq[gi].push(d * d);
                    acc.r_first[gi].push(m2 - sigma * center);
                }
            }
        },
        Calib::merge,
    );

    build_table(
        PsiModel::Regression { n, h_n: geo.h_n },
        k,
        sigma_sq_grid,
        cfg,
        &acc,
    )
}

fn build_table(
    model: PsiModel,
    k: f64,
    grid: &[f64],
    cfg: &MCConfig,
    acc: &Calib,
) -> Result<PsiTable> {
    let psi_values: Vec<f64> = acc.diff_sq.iter().map(|mv| mv.mean()).collect();
    let std_errors: Vec<f64> = acc.diff_sq.iter().map(|mv| mv.std_error()).collect();
    let mut table = PsiTable::from_values(
        model,
        k,
        grid.to_vec(),
        psi_values,
        std_errors,
        *cfg,
    )?;
    table.variance_route = (0..grid.len()).map(|gi| acc.two_var_r(gi)).collect();
    // Time-reversal consistency: the two routes estimate the same quantity.
    for gi in 0..grid.len() {
        let a = table.psi_values[gi];
        let b = table.variance_route[gi];
        let tol = 8.0 * table.std_errors[gi] + 0.05 * a;
        if (a - b).abs() > tol {
            return Err(Error::CalibrationRejected(format!(
                "moment and variance routes disagree at sigma^2 = {}: {a} vs {b}",
                grid[gi]
            )));
        }
    }
    Ok(table)
}

/// Monte Carlo estimates of the discrete-maximum constants
///   B_1 = int_0^inf x P(max_i W_{i/N} >= x) dx = E[M^2] / 2,
///   B_2 = int_0^inf P(max_i W_{i/N} >= x) dx = E[M],
/// with M the maximum of W over the grid i/N, i = 0..N-1. They converge to
/// 1/2 and sqrt(2/pi) as N grows.
pub fn b_constants(nh_n: u64, cfg: &MCConfig) -> Result<(MCEstimate, MCEstimate)> {
    if nh_n < 2 {
        return Err(Error::config("b_constants requires nh_n >= 2"));
    }
    if cfg.replications < 100 {
        return Err(Error::config("MCConfig needs >= 100 replications"));
    }
    let n = nh_n as usize;
    let seed = cfg.seed;
    let antithetic = cfg.antithetic;
    let acc = accumulate(
        cfg.replications,
        || (MeanVar::default(), MeanVar::default()),
        move |acc, rep| {
            let mut rng = rng_for(seed, rep, StreamId::DISCRETE_MAX);
            let sqrt_dt = (1.0 / n as f64).sqrt();
            let mut w = 0.0;
            let mut max = 0.0f64;
            let mut min = 0.0f64;
            for _ in 1..n {
                w += sqrt_dt * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
                max = max.max(w);
                min = min.min(w);
            }
            if antithetic {
                // max of the mirrored path is -min of the original.
                acc.0.push(0.25 * (max * max + min * min));
                acc.1.push(0.5 * (max - min));
            } else {
                acc.0.push(0.5 * max * max);
                acc.1.push(max);
            }
        },
        |a, b| {
            a.0.merge(b.0);
            a.1.merge(b.1);
        },
    );
    let b1 = MCEstimate {
        value: acc.0.mean(),
        std_error: acc.0.std_error(),
        replications: cfg.replications,
        time_grid: n,
    };
    let b2 = MCEstimate {
        value: acc.1.mean(),
        std_error: acc.1.std_error(),
        replications: cfg.replications,
        time_grid: n,
    };
    Ok((b1, b2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::excursion::lambda_functionals;

    const PSI_LIMIT: f64 = 0.72676046642263; // 2 (1 - 2/pi)

    fn cfg(r: u64, m: usize, seed: u64) -> MCConfig {
        MCConfig::new(r, m, seed, true).unwrap()
    }

    #[test]
    fn large_k_matches_asymptotic_value_and_slope() {
        // At K = 1000 the limit constants are already inside the stated
        // tolerances; shared paths across the grid make the slope cheap.
        let table = calibrate_psi_ppp(
            1000.0,
            &[0.9025, 1.0, 1.1025, 4.0],
            &cfg(20_000, 2000, 42),
        )
        .unwrap();
        let se = table.std_errors[1];
        assert!(
            (table.psi_values[1] - PSI_LIMIT).abs() <= 0.05 + 3.0 * se,
            "Psi(1) = {} +- {se}",
            table.psi_values[1]
        );
        // d/dsigma of Psi(sigma^2) at sigma = 1: central difference over
        // sigma in {0.95, 1.05}.
        let slope = (table.psi_values[2] - table.psi_values[0]) / 0.1;
        let slope_se = (table.std_errors[2] + table.std_errors[0]) / 0.1;
        assert!(
            (slope - 2.0 * PSI_LIMIT).abs() <= 0.1 + 3.0 * slope_se,
            "slope = {slope} +- {slope_se}"
        );
        // Psi(4)/Psi(1) approaches 4.
        let ratio = table.psi_values[3] / table.psi_values[1];
        assert!((ratio - 4.0).abs() <= 0.1, "ratio = {ratio}");
    }

    #[test]
    fn near_linear_in_sigma_sq_at_moderate_k() {
        let grid: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let table = calibrate_psi_ppp(31.6, &grid, &cfg(10_000, 2000, 7)).unwrap();
        let n = grid.len() as f64;
        let mx = grid.iter().sum::<f64>() / n;
        let my = table.psi_values.iter().sum::<f64>() / n;
        let sxx: f64 = grid.iter().map(|x| (x - mx) * (x - mx)).sum();
        let sxy: f64 = grid
            .iter()
            .zip(&table.psi_values)
            .map(|(x, y)| (x - mx) * (y - my))
            .sum();
        let syy: f64 = table
            .psi_values
            .iter()
            .map(|y| (y - my) * (y - my))
            .sum();
        let r2 = sxy * sxy / (sxx * syy);
        assert!(r2 >= 0.99, "R^2 = {r2}");
        // Positivity and monotonicity come with table construction.
        assert!(table.psi_values.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn cross_route_against_lambda_decomposition() {
        // Direct two-bin calibration vs the hitting-time decomposition
        // 2 sigma^2 (2 L1 - L2^2) at sigma = 1, K = 31.6.
        let c = cfg(30_000, 2000, 11);
        let direct = calibrate_psi_ppp(31.6, &[0.5, 1.0, 2.0], &c).unwrap();
        let lf = lambda_functionals(1.0, 31.6, &c, None, 151).unwrap();
        let psi_lambda = lf.psi_tilde();
        let joint = (direct.std_errors[1].powi(2) + psi_lambda.std_error.powi(2)).sqrt();
        let gap = (direct.psi_values[1] - psi_lambda.value).abs();
        // small slack for the coarser grid bias at m = 2000
        assert!(
            gap <= 3.0 * joint + 0.012,
            "direct {} vs lambda {} (3 joint se = {})",
            direct.psi_values[1],
            psi_lambda.value,
            3.0 * joint
        );
    }

    #[test]
    fn regression_tends_to_ppp_table() {
        let c = cfg(6000, 2000, 5);
        let ppp = calibrate_psi_ppp(31.6, &[1.0, 2.0], &c).unwrap();
        let noise = NoiseSpec::Exponential { rate: 1.0 };
        let reg =
            calibrate_psi_regression(31.6, 1_000_000, &[1.0, 2.0], &noise, &c).unwrap();
        match reg.model {
            PsiModel::Regression { n, h_n } => {
                assert_eq!(n, 1_000_000);
                assert!((n as f64 * h_n - (n as f64 * h_n).round()).abs() < 1e-9);
            }
            _ => panic!("wrong model tag"),
        }
        for i in 0..2 {
            let joint = (ppp.std_errors[i].powi(2) + reg.std_errors[i].powi(2)).sqrt();
            assert!(
                (ppp.psi_values[i] - reg.psi_values[i]).abs() <= 0.02 + 3.0 * joint,
                "gap at point {i}: {} vs {}",
                ppp.psi_values[i],
                reg.psi_values[i]
            );
        }
        // At n = 1e5 the value stays within 10% of the PPP one.
        let reg5 = calibrate_psi_regression(31.6, 100_000, &[1.0, 2.0], &noise, &c).unwrap();
        assert!(
            (reg5.psi_values[0] - ppp.psi_values[0]).abs() <= 0.1 * ppp.psi_values[0],
            "n=1e5 value {} vs ppp {}",
            reg5.psi_values[0],
            ppp.psi_values[0]
        );
    }

    #[test]
    fn degenerate_boundary_reduces_to_noise_order_statistics() {
        // As sigma^2 -> 0 with exponential noise the minima become Exp(K_eff)
        // and Psi -> 2 / K_eff^2 (variance of the difference of two iid
        // exponential minima).
        let noise = NoiseSpec::Exponential { rate: 1.0 };
        let c = cfg(20_000, 1000, 9);
        let table =
            calibrate_psi_regression(31.6, 100_000, &[1e-10, 1.0], &noise, &c).unwrap();
        let geo = regression_geometry(31.6, 100_000, 1.0).unwrap();
        let want = 2.0 / (geo.k_eff * geo.k_eff);
        assert!(
            (table.psi_values[0] - want).abs() <= 3.0 * table.std_errors[0] + 0.02 * want,
            "degenerate Psi = {}, want {want}",
            table.psi_values[0]
        );
    }

    #[test]
    fn inverse_identities() {
        let c = cfg(100, 1000, 0);
        let grid: Vec<f64> = (1..=20).map(|i| 0.2 * i as f64).collect();
        let values: Vec<f64> = grid.iter().map(|s| 0.7 * s + 0.01 * s * s).collect();
        let table = PsiTable::from_values(
            PsiModel::Ppp,
            31.6,
            grid.clone(),
            values.clone(),
            vec![0.0; 20],
            c,
        )
        .unwrap();
        for (s, v) in grid.iter().zip(&values) {
            let (inv, clamped) = invert_psi(&table, *v);
            assert!(!clamped);
            assert!((inv - s).abs() <= 1e-6, "invert at node {s}: {inv}");
        }
        for k in 0..100 {
            let v = values[0] + (values[19] - values[0]) * (k as f64 + 0.5) / 100.0;
            let (inv, _) = table.invert(v);
            assert!((table.psi(inv) - v).abs() <= 1e-6 * (1.0 + v));
        }
        let (lo, flag) = table.invert(values[0] - 1.0);
        assert!(flag);
        assert_eq!(lo, grid[0]);
    }

    #[test]
    fn rejects_non_monotone_values() {
        let c = cfg(100, 1000, 0);
        let err = PsiTable::from_values(
            PsiModel::Ppp,
            31.6,
            vec![1.0, 2.0, 3.0],
            vec![1.0, 0.9, 1.2],
            vec![0.0; 3],
            c,
        )
        .unwrap_err();
        assert!(matches!(err, Error::CalibrationRejected(_)));
        assert!(calibrate_psi_ppp(31.6, &[2.0, 1.0], &cfg(100, 1000, 0)).is_err());
        assert!(calibrate_psi_ppp(0.0, &[1.0, 2.0], &cfg(100, 1000, 0)).is_err());
    }

    #[test]
    fn table_json_round_trip() {
        let table = calibrate_psi_ppp(31.6, &[0.5, 1.0, 2.0], &cfg(500, 1000, 3)).unwrap();
        let mut buf = Vec::new();
        table.to_json(&mut buf).unwrap();
        let back = PsiTable::from_json(&buf[..]).unwrap();
        assert_eq!(back.psi_values, table.psi_values);
        assert_eq!(back.model, table.model);
        let (a, _) = back.invert(table.psi_values[1]);
        assert!((a - 1.0).abs() < 1e-9);
    }

    #[test]
    fn b_constants_limits_and_refinement() {
        let c = cfg(20_000, 1000, 13);
        let (b1, b2) = b_constants(10_000, &c).unwrap();
        assert!(
            (b1.value - 0.5).abs() <= 0.02 + 3.0 * b1.std_error,
            "B1 = {} +- {}",
            b1.value,
            b1.std_error
        );
        assert!(
            (b2.value - 0.79788456080286536).abs() <= 0.02 + 3.0 * b2.std_error,
            "B2 = {} +- {}",
            b2.value,
            b2.std_error
        );
        // Coarse grids lie strictly below the limits.
        let (c1, c2) = b_constants(2, &c).unwrap();
        assert!(c1.value < 0.5 && c2.value < 0.79788456080286536);
        // Refinement is monotone within MC error.
        let (d1, d2) = b_constants(100, &c).unwrap();
        let j1 = 3.0 * (c1.std_error.powi(2) + d1.std_error.powi(2)).sqrt();
        let j2 = 3.0 * (c2.std_error.powi(2) + d2.std_error.powi(2)).sqrt();
        assert!(c1.value <= d1.value + j1);
        assert!(c2.value <= d2.value + j2);
        assert!(d1.value <= b1.value + 3.0 * (d1.std_error + b1.std_error));
        assert!(d2.value <= b2.value + 3.0 * (d2.std_error + b2.std_error));
        assert!(b_constants(1, &c).is_err());
    }

    #[test]
    fn survival_sampler_matches_exp_area_identity() {
        // P(R > x sigma) from the direct sampler equals
        // E[exp(-K sigma * Riemann area)] with the same grid; here against
        // the exact one-bin construction at matched discretization.
        let c = cfg(20_000, 1000, 21);
        let draws = sample_two_bin_ppp(31.6, 1.0, &c).unwrap();
        let mut surv = MeanVar::default();
        for d in &draws {
            surv.push(if d.m2 - d.center > 0.0 { 1.0 } else { 0.0 });
            surv.push(if d.m1 > 0.0 { 1.0 } else { 0.0 });
        }
        let mc = crate::excursion::mc_exp_area(0.0, 31.6, &c).unwrap();
        let joint = (surv.std_error().powi(2) + mc.std_error.powi(2)).sqrt();
        assert!(
            (surv.mean() - mc.value).abs() <= 3.0 * joint + 0.01,
            "survival {} vs exp-area {}",
            surv.mean(),
            mc.value
        );
    }
}
