//! Observation sampling above a boundary path: the Poisson point process
//! model, the one-sided regression model, and bin-wise minima extraction.

use crate::error::{Error, Result};
use crate::path::SamplePath;
use crate::rng::{rng_for, StreamId};
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::sync::Arc;

/// One-sided noise distribution with CDF linear at 0+ (density `rate` there).
#[derive(Clone)]
pub enum NoiseSpec {
    /// Exponential with the given rate.
    Exponential { rate: f64 },
    /// Uniform on (0, 1/rate).
    Uniform { rate: f64 },
    /// User-supplied distribution; `quantile` maps (0,1) to samples and `cdf`
    /// is used by the admissibility check.
    Custom {
        rate: f64,
        quantile: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        cdf: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl std::fmt::Debug for NoiseSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NoiseSpec::Exponential { rate } => write!(f, "Exponential(rate={rate})"),
            NoiseSpec::Uniform { rate } => write!(f, "Uniform(0, {})", 1.0 / rate),
            NoiseSpec::Custom { rate, .. } => write!(f, "Custom(rate={rate})"),
        }
    }
}

impl NoiseSpec {
    pub fn rate(&self) -> f64 {
        match self {
            NoiseSpec::Exponential { rate }
            | NoiseSpec::Uniform { rate }
            | NoiseSpec::Custom { rate, .. } => *rate,
        }
    }

    /// Checks rate > 0 and that the CDF behaves like `rate * x` at 0+:
    /// F(x)/(rate x) must lie in [0.9, 1.1] at x = 1e-6 / rate.
    pub fn validate(&self) -> Result<()> {
        let rate = self.rate();
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(Error::config("noise rate must be positive and finite"));
        }
        let x = 1e-6 / rate;
        let f = self.cdf(x);
        let ratio = f / (rate * x);
        if !(0.9..=1.1).contains(&ratio) {
            return Err(Error::config(format!(
                "noise CDF is not linear with density {rate} at 0+: F(x)/(rate x) = {ratio}"
            )));
        }
        Ok(())
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match self {
            NoiseSpec::Exponential { rate } => 1.0 - (-rate * x).exp(),
            NoiseSpec::Uniform { rate } => (rate * x).min(1.0),
            NoiseSpec::Custom { cdf, .. } => cdf(x),
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        match self {
            NoiseSpec::Exponential { rate } => -(1.0 - u).ln() / rate,
            NoiseSpec::Uniform { rate } => u / rate,
            NoiseSpec::Custom { quantile, .. } => quantile(u),
        }
    }

    /// Kind tag for serialization in provenance records.
    pub fn family_name(&self) -> &'static str {
        match self {
            NoiseSpec::Exponential { .. } => "exponential",
            NoiseSpec::Uniform { .. } => "uniform",
            NoiseSpec::Custom { .. } => "custom",
        }
    }
}

/// Poisson point process observations above a boundary path, truncated to a
/// band of finite height above the path (the model's intensity has infinite
/// total mass on the upper half-plane).
#[derive(Debug, Clone)]
pub struct PPPObservations {
    /// Observation points (t, y), sorted by t.
    pub points: Vec<(f64, f64)>,
    /// Intensity n * lambda.
    pub intensity_rate: f64,
    /// Vertical band height above the path.
    pub band_height: f64,
    /// Id of the generating path.
    pub boundary_ref: u64,
    pub(crate) boundary: Arc<SamplePath>,
}

/// Equidistant one-sided regression observations Y_i = X_{i/n} + eps_i.
#[derive(Debug, Clone)]
pub struct RegressionObservations {
    /// n + 1 values at times i/n.
    pub y_values: Vec<f64>,
    pub noise_family: String,
    pub noise_rate: f64,
}

impl RegressionObservations {
    pub fn n(&self) -> usize {
        self.y_values.len() - 1
    }
}

/// Bin-wise minima over an equi-spaced partition of [0, 1].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BinMinima {
    pub values: Vec<f64>,
    /// Bin width; `values.len()` equals `1 / h_n`.
    pub h_n: f64,
    /// PPP band-truncation fallback events (empty bins).
    pub bins_empty: u64,
}

impl BinMinima {
    pub fn h_inv(&self) -> usize {
        self.values.len()
    }
}

/// Samples the PPP with intensity `n * lambda` on the band
/// `{(t, y): X_t <= y <= X_t + c / (n lambda h_ref)}` where
/// `h_ref = (n lambda)^(-2/3)` is the reference bin width.
///
/// The band is a documented truncation of the infinite upper half-plane; the
/// probability that a bin minimum escapes above the band is bounded
/// analytically and must stay below 1e-6.
pub fn sample_ppp(
    path: &Arc<SamplePath>,
    n: u64,
    lambda: f64,
    band_multiplier: f64,
) -> Result<PPPObservations> {
    sample_ppp_rep(path, n, lambda, band_multiplier, 0, path.id)
}

/// Replication-indexed variant; `seed` keys the observation randomness.
pub fn sample_ppp_rep(
    path: &Arc<SamplePath>,
    n: u64,
    lambda: f64,
    band_multiplier: f64,
    replication: u64,
    seed: u64,
) -> Result<PPPObservations> {
    let rate = n as f64 * lambda;
    if !(rate > 0.0) {
        return Err(Error::config("sample_ppp requires n * lambda > 0"));
    }
    if band_multiplier < 10.0 {
        return Err(Error::config("band multiplier must be >= 10"));
    }
    let h_ref = rate.powf(-2.0 / 3.0);
    let band = band_multiplier / (rate * h_ref); // = c * (n lambda)^(-1/3)

    // Escape bound: conditional on the path, the survival of a bin minimum at
    // the band top is exp(-rate * integral over the bin of (top - X)_+) and
    // the integrand is at least band - osc on a bin of width h_ref, where osc
    // is the path oscillation over that bin. Hence
    //   P(escape) <= exp(-(c - osc * (n lambda)^(1/3))).
    let m = path.steps();
    let bins_ref = (1.0 / h_ref).ceil() as usize;
    let nodes_per = (m / bins_ref.max(1)).max(1);
    let mut osc_max: f64 = 0.0;
    for chunk in path.x_values.chunks(nodes_per) {
        let lo = chunk.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = chunk.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        osc_max = osc_max.max(hi - lo);
    }
    let exponent = band_multiplier - osc_max * rate.powf(1.0 / 3.0);
    let escape_bound = (-exponent).exp();
    if escape_bound > 1e-6 {
        let needed = (osc_max * rate.powf(1.0 / 3.0) + 14.0).ceil();
        return Err(Error::config(format!(
            "PPP band too small: escape bound {escape_bound:.2e} > 1e-6; \
             increase band multiplier to at least {needed}"
        )));
    }

    let mut rng = rng_for(seed, replication, StreamId::PPP);
    let mean = rate * band; // band area = band height * |[0,1]|
    let count = if mean > 0.0 {
        Poisson::new(mean)
            .map_err(|e| Error::config(format!("poisson: {e}")))?
            .sample(&mut rng) as usize
    } else {
        0
    };
    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        let t: f64 = rng.random();
        let offset: f64 = rng.random::<f64>() * band;
        let node = ((t * m as f64).round() as usize).min(m);
        points.push((t, path.x_values[node] + offset));
    }
    points.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    Ok(PPPObservations {
        points,
        intensity_rate: rate,
        band_height: band,
        boundary_ref: path.id,
        boundary: Arc::clone(path),
    })
}

/// Draws each bin minimum directly from its conditional law given the path,
/// by inverting the survival function
///   P(min > z | X) = exp(-n lambda * integral over bin of (z - X_t)_+ dt)
/// with bracketing and bisection. Marginally equal in law to the minimum of
/// the full PPP sample, without band truncation.
pub fn sample_bin_minima_direct(
    path: &SamplePath,
    n: u64,
    lambda: f64,
    h_inv: usize,
) -> Result<BinMinima> {
    sample_bin_minima_direct_rep(path, n, lambda, h_inv, 0, path.id)
}

/// Replication-indexed variant with explicit seed; per-bin RNG streams make
/// the draw order-independent across bins.
pub fn sample_bin_minima_direct_rep(
    path: &SamplePath,
    n: u64,
    lambda: f64,
    h_inv: usize,
    replication: u64,
    seed: u64,
) -> Result<BinMinima> {
    let rate = n as f64 * lambda;
    if !(rate > 0.0) {
        return Err(Error::config("bin minima need n * lambda > 0"));
    }
    if h_inv == 0 {
        return Err(Error::config("h_inv must be positive"));
    }
    let m = path.steps();
    if m % h_inv != 0 {
        return Err(Error::config(format!(
            "path grid ({m} steps) must be divisible by h_inv = {h_inv}"
        )));
    }
    let nodes_per_bin = m / h_inv;
    if nodes_per_bin < 100 {
        return Err(Error::config(format!(
            "each bin must be resolved by >= 100 path nodes, got {nodes_per_bin}"
        )));
    }
    let h_n = 1.0 / h_inv as f64;
    let dt = 1.0 / m as f64;
    let tol = 1e-12 * h_n.sqrt();

    let mut values = Vec::with_capacity(h_inv);
    for k in 0..h_inv {
        let nodes = &path.x_values[k * nodes_per_bin..(k + 1) * nodes_per_bin];
        let mut sorted: Vec<f64> = nodes.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut prefix = Vec::with_capacity(sorted.len());
        let mut run = 0.0;
        for &v in &sorted {
            run += v;
            prefix.push(run);
        }
        // Left-Riemann area of (z - X)_+ over the bin via the sorted prefix.
        let area = |z: f64| -> f64 {
            let cnt = sorted.partition_point(|&v| v <= z);
            if cnt == 0 {
                0.0
            } else {
                (cnt as f64 * z - prefix[cnt - 1]) * dt
            }
        };

        let mut rng = rng_for(seed, replication, StreamId::bin_minimum(k as u64));
        // u in (0, 1]; u -> 1 gives target area 0, i.e. the bin minimum of X.
        let u = 1.0 - rng.random::<f64>();
        let target = -u.ln() / rate;

        let lo0 = sorted[0];
        if target == 0.0 {
            values.push(lo0);
            continue;
        }
        let mut step = h_n.sqrt().max(1.0 / (rate * h_n));
        let mut hi = lo0 + step;
        let mut expansions = 0;
        while area(hi) < target {
            step *= 2.0;
            hi = lo0 + step;
            expansions += 1;
            if expansions > 60 {
                return Err(Error::numeric(
                    k,
                    "survival inversion failed to bracket the bin minimum",
                ));
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
        values.push(0.5 * (lo + hi));
    }

    Ok(BinMinima {
        values,
        h_n,
        bins_empty: 0,
    })
}

/// One-sided regression observations Y_i = X_{i/n} + eps_i, i = 0..=n.
/// The path grid must contain the observation times (grid steps divisible
/// by n).
pub fn sample_regression(
    path: &SamplePath,
    n: usize,
    noise: &NoiseSpec,
    seed: u64,
) -> Result<RegressionObservations> {
    sample_regression_rep(path, n, noise, seed, 0)
}

pub fn sample_regression_rep(
    path: &SamplePath,
    n: usize,
    noise: &NoiseSpec,
    seed: u64,
    replication: u64,
) -> Result<RegressionObservations> {
    noise.validate()?;
    if n == 0 {
        return Err(Error::config("sample_regression requires n >= 1"));
    }
    let m = path.steps();
    if m % n != 0 {
        return Err(Error::config(format!(
            "path grid ({m} steps) does not contain the observation times i/{n}; \
             choose the number of steps as a multiple of n"
        )));
    }
    let stride = m / n;
    let mut rng = rng_for(seed, replication, StreamId::NOISE);
    let mut y = Vec::with_capacity(n + 1);
    for i in 0..=n {
        y.push(path.x_values[i * stride] + noise.sample(&mut rng));
    }
    Ok(RegressionObservations {
        y_values: y,
        noise_family: noise.family_name().to_string(),
        noise_rate: noise.rate(),
    })
}

/// Common interface for bin-minima extraction from either observation model.
pub trait BinnedObservations {
    /// Extracts the `h_inv` bin minima (one-sided: observations never fall
    /// below the boundary).
    fn extract_bin_minima(&self, h_inv: usize) -> Result<BinMinima>;
}

impl BinnedObservations for PPPObservations {
    fn extract_bin_minima(&self, h_inv: usize) -> Result<BinMinima> {
        if h_inv == 0 {
            return Err(Error::config("h_inv must be positive"));
        }
        let h_n = 1.0 / h_inv as f64;
        let mut values = vec![f64::INFINITY; h_inv];
        for &(t, y) in &self.points {
            let k = ((t * h_inv as f64) as usize).min(h_inv - 1);
            if y < values[k] {
                values[k] = y;
            }
        }
        let mut bins_empty = 0;
        let m = self.boundary.steps();
        for (k, v) in values.iter_mut().enumerate() {
            if !v.is_finite() {
                // Fallback: the band ceiling over this bin. Downstream
                // estimation refuses contaminated runs unless overridden.
                let lo = (k as f64 * h_n * m as f64).round() as usize;
                let hi = (((k + 1) as f64 * h_n * m as f64).round() as usize).min(m);
                let top = self.boundary.x_values[lo..=hi]
                    .iter()
                    .cloned()
                    .fold(f64::NEG_INFINITY, f64::max)
                    + self.band_height;
                *v = top;
                bins_empty += 1;
            }
        }
        Ok(BinMinima {
            values,
            h_n,
            bins_empty,
        })
    }
}

impl BinnedObservations for RegressionObservations {
    fn extract_bin_minima(&self, h_inv: usize) -> Result<BinMinima> {
        if h_inv == 0 {
            return Err(Error::config("h_inv must be positive"));
        }
        let n = self.n();
        if n % h_inv != 0 {
            return Err(Error::config(format!(
                "bin count {h_inv} must divide the sample size {n}"
            )));
        }
        let per_bin = n / h_inv; // indices k*per_bin .. (k+1)*per_bin - 1
        let values = (0..h_inv)
            .map(|k| {
                self.y_values[k * per_bin..(k + 1) * per_bin]
                    .iter()
                    .cloned()
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        Ok(BinMinima {
            values,
            h_n: 1.0 / h_inv as f64,
            bins_empty: 0,
        })
    }
}

/// Bin minima from bare (t, y) points, e.g. observations imported from CSV.
/// Without the generating path there is no band-top fallback, so an empty
/// bin is a data error.
pub fn bin_minima_from_points(points: &[(f64, f64)], h_inv: usize) -> Result<BinMinima> {
    if h_inv == 0 {
        return Err(Error::config("h_inv must be positive"));
    }
    let mut values = vec![f64::INFINITY; h_inv];
    for &(t, y) in points {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::data(format!("observation time {t} outside [0, 1]")));
        }
        let k = ((t * h_inv as f64) as usize).min(h_inv - 1);
        if y < values[k] {
            values[k] = y;
        }
    }
    if let Some(k) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::data(format!(
            "bin {k} of {h_inv} contains no observations"
        )));
    }
    Ok(BinMinima {
        values,
        h_n: 1.0 / h_inv as f64,
        bins_empty: 0,
    })
}

/// Writes PPP observations as CSV with columns `t,y`.
pub fn write_ppp_csv<W: Write>(obs: &PPPObservations, mut w: W) -> Result<()> {
    writeln!(w, "t,y")?;
    for &(t, y) in &obs.points {
        writeln!(w, "{t:.12},{y:.12}")?;
    }
    Ok(())
}

/// Writes regression observations as CSV with columns `i,y`.
pub fn write_regression_csv<W: Write>(obs: &RegressionObservations, mut w: W) -> Result<()> {
    writeln!(w, "i,y")?;
    for (i, y) in obs.y_values.iter().enumerate() {
        writeln!(w, "{i},{y:.12}")?;
    }
    Ok(())
}

/// Reads PPP observations from CSV (`t,y` header).
pub fn read_ppp_csv<R: std::io::Read>(r: R) -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let t: f64 = rec
            .get(0)
            .ok_or_else(|| Error::data("missing t column"))?
            .parse()
            .map_err(|e| Error::data(format!("bad t value: {e}")))?;
        let y: f64 = rec
            .get(1)
            .ok_or_else(|| Error::data("missing y column"))?
            .parse()
            .map_err(|e| Error::data(format!("bad y value: {e}")))?;
        out.push((t, y));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::accumulate;
    use crate::path::{simulate_brownian, simulate_brownian_rep};
    use crate::stats::MeanVar;

    fn flat_path(m: usize) -> Arc<SamplePath> {
        let mut p = simulate_brownian(m, 0).unwrap();
        for v in p.x_values.iter_mut() {
            *v = 0.0;
        }
        Arc::new(p)
    }

    #[test]
    fn ppp_expected_count() {
        let path = flat_path(1000);
        let mv = accumulate(
            10_000,
            MeanVar::default,
            |acc, rep| {
                let obs = sample_ppp_rep(&path, 1000, 1.0, 50.0, rep, 5).unwrap();
                let area = obs.band_height;
                acc.push(obs.points.len() as f64 / (obs.intensity_rate * area));
            },
            |a, b| a.merge(b),
        );
        assert!(
            (mv.mean() - 1.0).abs() < 0.01,
            "normalized count = {}",
            mv.mean()
        );
    }

    #[test]
    fn ppp_all_points_above_boundary() {
        let path = Arc::new(simulate_brownian(2000, 3).unwrap());
        let obs = sample_ppp(&path, 2000, 1.0, 50.0).unwrap();
        let m = path.steps();
        for &(t, y) in &obs.points {
            let node = ((t * m as f64).round() as usize).min(m);
            assert!(y >= path.x_values[node] - 1e-12);
        }
        // sorted by t
        assert!(obs.points.windows(2).all(|w| w[0].0 <= w[1].0));
    }

    #[test]
    fn ppp_rejects_degenerate_and_small_band() {
        let path = flat_path(500);
        assert!(sample_ppp(&path, 0, 1.0, 50.0).is_err());
        assert!(sample_ppp(&path, 1000, 1.0, 9.0).is_err());
        // c = 10 passes the precondition but fails the escape bound.
        let err = sample_ppp(&path, 1000, 1.0, 10.0).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("increase band multiplier"), "{msg}");
    }

    #[test]
    fn ppp_bin_minimum_on_flat_boundary_is_exponential() {
        // With X = 0 and one bin, the bin minimum is Exp(n lambda h_n).
        let path = flat_path(1000);
        let n = 10_000u64;
        let h_inv = 1usize;
        let mv = accumulate(
            100_000,
            MeanVar::default,
            |acc, rep| {
                let obs = sample_ppp_rep(&path, n, 1.0, 50.0, rep, 1).unwrap();
                let minima = obs.extract_bin_minima(h_inv).unwrap();
                assert_eq!(minima.bins_empty, 0);
                acc.push(minima.values[0]);
            },
            |a, b| a.merge(b),
        );
        let want = 1.0 / (n as f64);
        assert!(
            (mv.mean() - want).abs() < 0.01 * want,
            "mean = {}, want {want}",
            mv.mean()
        );
    }

    #[test]
    fn direct_minima_flat_boundary_ks_against_exponential() {
        // Kolmogorov-Smirnov distance between the direct sampler's output and
        // the closed-form Exp(n lambda h_n) law, 1e5 draws.
        let path = flat_path(1000);
        let n = 10_000u64;
        let rate = n as f64; // h_inv = 1
        let draws = accumulate(
            100_000,
            Vec::new,
            |acc: &mut Vec<f64>, rep| {
                let m = sample_bin_minima_direct_rep(&path, n, 1.0, 1, rep, 2).unwrap();
                acc.push(m.values[0]);
            },
            |a, mut b| a.append(&mut b),
        );
        let mut sorted = draws.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n_draws = sorted.len() as f64;
        let mut ks: f64 = 0.0;
        for (i, &z) in sorted.iter().enumerate() {
            let emp_hi = (i + 1) as f64 / n_draws;
            let emp_lo = i as f64 / n_draws;
            let model = 1.0 - (-rate * z).exp();
            ks = ks.max((emp_hi - model).abs()).max((model - emp_lo).abs());
        }
        assert!(ks < 0.006, "KS = {ks}");
    }

    #[test]
    fn direct_minima_u_one_edge_gives_path_minimum() {
        // target area 0 solves to the bin minimum of X itself.
        let path = simulate_brownian(1200, 9).unwrap();
        let got = sample_bin_minima_direct(&path, 1_000_000_000, 1.0, 4);
        // With enormous intensity the minima collapse onto the path minima.
        let m = got.unwrap();
        for k in 0..4 {
            let lo = path.x_values[k * 300..(k + 1) * 300]
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            assert!((m.values[k] - lo).abs() < 1e-3);
            assert!(m.values[k] >= lo - 1e-12);
        }
    }

    #[test]
    fn direct_minima_requires_fine_grid() {
        let path = simulate_brownian(300, 1).unwrap();
        assert!(sample_bin_minima_direct(&path, 1000, 1.0, 4).is_err());
        let path = simulate_brownian(399, 1).unwrap();
        assert!(sample_bin_minima_direct(&path, 1000, 1.0, 4).is_err());
    }

    #[test]
    fn regression_pure_noise_mean() {
        let path = flat_path(1000);
        let noise = NoiseSpec::Exponential { rate: 50.0 };
        let mv = accumulate(
            200,
            MeanVar::default,
            |acc, rep| {
                let obs = sample_regression_rep(&path, 1000, &noise, 3, rep).unwrap();
                for &y in &obs.y_values {
                    acc.push(y);
                }
            },
            |a, b| a.merge(b),
        );
        let se = mv.std_error();
        assert!((mv.mean() - 0.02).abs() <= 3.0 * se, "mean = {}", mv.mean());
    }

    #[test]
    fn regression_noise_is_one_sided() {
        let path = Arc::new(simulate_brownian(1000, 17).unwrap());
        for rep in 0..50 {
            let obs =
                sample_regression_rep(&path, 500, &NoiseSpec::Uniform { rate: 5.0 }, 4, rep)
                    .unwrap();
            for (i, &y) in obs.y_values.iter().enumerate() {
                assert!(y >= path.x_values[i * 2]);
            }
        }
    }

    #[test]
    fn regression_uniform_bin_minimum_order_statistics() {
        // Bin of N points of pure Uniform(0, 1/rate) noise: the minimum has
        // mean 1/(rate (N+1)).
        let path = flat_path(1000);
        let rate = 2.0;
        let n = 1000usize;
        let h_inv = 10usize; // N = 100 per bin
        let noise = NoiseSpec::Uniform { rate };
        let mv = accumulate(
            20_000,
            MeanVar::default,
            |acc, rep| {
                let obs = sample_regression_rep(&path, n, &noise, 6, rep).unwrap();
                let minima = obs.extract_bin_minima(h_inv).unwrap();
                for v in minima.values {
                    acc.push(v);
                }
            },
            |a, b| a.merge(b),
        );
        let want = 1.0 / (rate * 101.0);
        assert!(
            (mv.mean() - want).abs() < 0.02 * want,
            "mean = {}, want {want}",
            mv.mean()
        );
    }

    #[test]
    fn regression_grid_mismatch_is_config_error() {
        let path = simulate_brownian(1000, 1).unwrap();
        assert!(sample_regression(&path, 999, &NoiseSpec::Exponential { rate: 1.0 }, 0).is_err());
    }

    #[test]
    fn extract_bin_minima_takes_minimum_and_bins_by_index() {
        // Three points in one bin.
        let path = flat_path(1000);
        let obs = PPPObservations {
            points: vec![(0.1, 0.5), (0.2, 0.2), (0.3, 0.9)],
            intensity_rate: 1.0,
            band_height: 1.0,
            boundary_ref: 0,
            boundary: path,
        };
        let m = obs.extract_bin_minima(1).unwrap();
        assert_eq!(m.values[0], 0.2);

        // Regression binning: h_n = 1/4, n = 8 gives index sets {0,1},{2,3},...
        let robs = RegressionObservations {
            y_values: vec![8.0, 1.0, 2.0, 7.0, 3.0, 6.0, 4.0, 5.0, 9.0],
            noise_family: "exponential".into(),
            noise_rate: 1.0,
        };
        let m = robs.extract_bin_minima(4).unwrap();
        assert_eq!(m.values, vec![1.0, 2.0, 3.0, 4.0]);
        // index 8 (= n) belongs to no bin
    }

    #[test]
    fn extract_is_permutation_invariant_within_bin() {
        let path = flat_path(100);
        let mut pts = vec![(0.05, 0.5), (0.15, 0.3), (0.25, 0.8), (0.35, 0.1)];
        let base = PPPObservations {
            points: pts.clone(),
            intensity_rate: 1.0,
            band_height: 1.0,
            boundary_ref: 0,
            boundary: Arc::clone(&path),
        };
        let want = base.extract_bin_minima(2).unwrap().values;
        pts.reverse();
        let perm = PPPObservations {
            points: pts,
            intensity_rate: 1.0,
            band_height: 1.0,
            boundary_ref: 0,
            boundary: path,
        };
        assert_eq!(perm.extract_bin_minima(2).unwrap().values, want);
    }

    #[test]
    fn empty_ppp_bin_falls_back_to_band_top() {
        let path = flat_path(100);
        let obs = PPPObservations {
            points: vec![(0.7, 0.4)],
            intensity_rate: 1.0,
            band_height: 2.5,
            boundary_ref: 0,
            boundary: path,
        };
        let m = obs.extract_bin_minima(2).unwrap();
        assert_eq!(m.bins_empty, 1);
        assert_eq!(m.values[0], 2.5); // flat boundary at 0 plus band height
        assert_eq!(m.values[1], 0.4);
    }

    #[test]
    fn noise_admissibility() {
        assert!(NoiseSpec::Exponential { rate: 50.0 }.validate().is_ok());
        assert!(NoiseSpec::Uniform { rate: 2.0 }.validate().is_ok());
        assert!(NoiseSpec::Exponential { rate: 0.0 }.validate().is_err());
        // Quadratic CDF at zero violates the linearity requirement.
        let bad = NoiseSpec::Custom {
            rate: 1.0,
            quantile: Arc::new(|u| u.sqrt()),
            cdf: Arc::new(|x| (x * x).min(1.0)),
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn deterministic_sampling() {
        let path = Arc::new(simulate_brownian_rep(1000, 8, 0).unwrap());
        let a = sample_ppp_rep(&path, 1000, 1.0, 50.0, 3, 9).unwrap();
        let b = sample_ppp_rep(&path, 1000, 1.0, 50.0, 3, 9).unwrap();
        assert_eq!(a.points, b.points);
        let c = sample_bin_minima_direct_rep(&path, 1000, 1.0, 5, 2, 9).unwrap();
        let d = sample_bin_minima_direct_rep(&path, 1000, 1.0, 5, 2, 9).unwrap();
        assert_eq!(c.values, d.values);
    }
}
