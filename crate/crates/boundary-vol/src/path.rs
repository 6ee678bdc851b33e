//! Boundary path simulation: Brownian motion and Ito semimartingales with
//! stochastic volatility and finite-activity jumps, discretized by
//! Euler-Maruyama on a uniform grid over [0, 1].

use crate::error::{Error, Result};
use crate::rng::{rng_for, StreamId};
use crate::stats::normal_sf;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::sync::Arc;

/// Time-dependent coefficient specification.
#[derive(Clone)]
pub enum Coeff {
    Const(f64),
    /// Sorted `(start_time, value)` pieces; the value of the last piece whose
    /// start does not exceed `t` applies.
    Piecewise(Vec<(f64, f64)>),
    Func(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for Coeff {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Coeff::Const(c) => write!(f, "Const({c})"),
            Coeff::Piecewise(p) => write!(f, "Piecewise({} pieces)", p.len()),
            Coeff::Func(_) => write!(f, "Func(..)"),
        }
    }
}

impl Coeff {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Coeff::Const(c) => *c,
            Coeff::Piecewise(pieces) => {
                let mut v = pieces[0].1;
                for &(start, val) in pieces {
                    if start <= t {
                        v = val;
                    } else {
                        break;
                    }
                }
                v
            }
            Coeff::Func(f) => f(t),
        }
    }

    pub fn zero() -> Self {
        Coeff::Const(0.0)
    }
}

/// Jump size sampler for a compound-Poisson component.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum JumpSize {
    Fixed(f64),
    Normal { mean: f64, std_dev: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl JumpSize {
    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            JumpSize::Fixed(v) => *v,
            JumpSize::Normal { mean, std_dev } => {
                mean + std_dev * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
            }
            JumpSize::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
        }
    }
}

/// Finite-activity jump component.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JumpSpec {
    /// Expected number of jumps per unit time; must be finite and >= 0.
    pub intensity: f64,
    pub size: JumpSize,
}

/// Volatility process specification.
#[derive(Debug, Clone)]
pub struct VolModel {
    pub sigma0: f64,
    /// Bounded drift of the volatility.
    pub drift: Coeff,
    /// Loading on the Brownian motion shared with the boundary (leverage).
    pub dw_loading: Coeff,
    /// Loading on the independent Brownian motion.
    pub dw_perp_loading: Coeff,
    /// Hard lower bound; the simulated volatility is clipped here.
    pub floor: f64,
}

impl VolModel {
    /// Constant volatility, no dynamics.
    pub fn constant(sigma: f64) -> Self {
        VolModel {
            sigma0: sigma,
            drift: Coeff::zero(),
            dw_loading: Coeff::zero(),
            dw_perp_loading: Coeff::zero(),
            floor: (sigma * 1e-3).min(1e-3),
        }
    }
}

/// Full configuration of one boundary path.
#[derive(Debug, Clone)]
pub struct PathConfig {
    /// Number of Euler steps on [0, 1]; the grid has `grid_points + 1` nodes.
    pub grid_points: usize,
    pub drift: Coeff,
    /// Declared bound on |drift|; evaluation outside it is a config error.
    pub drift_bound: f64,
    pub vol: VolModel,
    pub jumps_x: Option<JumpSpec>,
    pub jumps_sigma: Option<JumpSpec>,
    pub seed: u64,
}

impl PathConfig {
    pub fn brownian(grid_points: usize, sigma: f64, seed: u64) -> Self {
        PathConfig {
            grid_points,
            drift: Coeff::zero(),
            drift_bound: 1.0,
            vol: VolModel::constant(sigma),
            jumps_x: None,
            jumps_sigma: None,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.grid_points < 2 {
            return Err(Error::config("grid_points must be >= 2"));
        }
        if !(self.vol.sigma0 > 0.0) || !(self.vol.floor > 0.0) || self.vol.sigma0 < self.vol.floor
        {
            return Err(Error::config(
                "volatility needs sigma0 >= floor > 0 (uniform lower bound)",
            ));
        }
        if !(self.drift_bound > 0.0) {
            return Err(Error::config("drift_bound must be positive"));
        }
        for spec in [&self.jumps_x, &self.jumps_sigma].into_iter().flatten() {
            if !spec.intensity.is_finite() || spec.intensity < 0.0 {
                return Err(Error::config("jump intensity must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

/// A discretized realization of the boundary and its volatility.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplePath {
    /// Identifier derived from (seed, replication); referenced by observation sets.
    pub id: u64,
    pub times: Vec<f64>,
    pub x_values: Vec<f64>,
    pub sigma_values: Vec<f64>,
    pub jump_times_x: Vec<f64>,
    pub jump_times_sigma: Vec<f64>,
    /// Number of grid steps where the volatility floor clipped.
    pub sigma_clip_events: u64,
}

impl SamplePath {
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    /// Pathwise integrated squared volatility (left Riemann sum).
    pub fn integrated_variance(&self) -> f64 {
        let m = self.steps();
        let dt = 1.0 / m as f64;
        self.sigma_values[..m].iter().map(|s| s * s * dt).sum()
    }

    /// Writes the path as CSV with columns `t,x,sigma`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,x,sigma")?;
        for i in 0..self.times.len() {
            writeln!(
                w,
                "{:.12},{:.12},{:.12}",
                self.times[i], self.x_values[i], self.sigma_values[i]
            )?;
        }
        Ok(())
    }
}

fn path_id(seed: u64, replication: u64) -> u64 {
    // splitmix-style mix so ids spread even for small seeds
    let mut z = seed ^ replication.rotate_left(32) ^ 0xd1b5_4a32_d192_ed03;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Standard Brownian motion on the uniform grid; volatility identically one.
pub fn simulate_brownian(m: usize, seed: u64) -> Result<SamplePath> {
    simulate_brownian_rep(m, seed, 0)
}

/// Replication-indexed variant for Monte Carlo studies.
pub fn simulate_brownian_rep(m: usize, seed: u64, replication: u64) -> Result<SamplePath> {
    if m < 2 {
        return Err(Error::config("simulate_brownian requires m >= 2"));
    }
    let mut rng = rng_for(seed, replication, StreamId::PATH_W);
    let dt = 1.0 / m as f64;
    let sqrt_dt = dt.sqrt();
    let mut times = Vec::with_capacity(m + 1);
    let mut x = Vec::with_capacity(m + 1);
    times.push(0.0);
    x.push(0.0);
    for i in 1..=m {
        let z: f64 = StandardNormal.sample(&mut rng);
        times.push(i as f64 * dt);
        x.push(x[i - 1] + sqrt_dt * z);
    }
    Ok(SamplePath {
        id: path_id(seed, replication),
        times,
        x_values: x,
        sigma_values: vec![1.0; m + 1],
        jump_times_x: Vec::new(),
        jump_times_sigma: Vec::new(),
        sigma_clip_events: 0,
    })
}

/// Draws exponential-gap jump times on [0, 1], snapped to the nearest grid
/// node (snapping error at most half a step), together with their sizes.
fn draw_jumps<R: Rng>(spec: &JumpSpec, m: usize, rng: &mut R) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::new();
    let mut sizes = Vec::new();
    let mut times = Vec::new();
    if spec.intensity == 0.0 {
        return (nodes, sizes, times);
    }
    let mut t = 0.0;
    loop {
        let u: f64 = rng.random();
        t += -(1.0 - u).ln() / spec.intensity;
        if t >= 1.0 {
            break;
        }
        let size = spec.size.sample(rng);
        let node = ((t * m as f64).round() as usize).clamp(1, m);
        nodes.push(node);
        sizes.push(size);
        times.push(node as f64 / m as f64);
    }
    (nodes, sizes, times)
}

/// Euler-Maruyama simulation of the joint (boundary, volatility) system.
pub fn simulate_ito(config: &PathConfig) -> Result<SamplePath> {
    simulate_ito_rep(config, 0)
}

/// Replication-indexed variant for Monte Carlo studies.
pub fn simulate_ito_rep(config: &PathConfig, replication: u64) -> Result<SamplePath> {
    config.validate()?;
    let m = config.grid_points;
    let dt = 1.0 / m as f64;
    let sqrt_dt = dt.sqrt();
    let seed = config.seed;

    let mut rng_w = rng_for(seed, replication, StreamId::PATH_W);
    let mut rng_perp = rng_for(seed, replication, StreamId::PATH_W_PERP);

    let (jx_nodes, jx_sizes, jx_times) = match &config.jumps_x {
        Some(spec) => {
            let mut r = rng_for(seed, replication, StreamId::JUMPS_X);
            draw_jumps(spec, m, &mut r)
        }
        None => (Vec::new(), Vec::new(), Vec::new()),
    };
    let (js_nodes, js_sizes, js_times) = match &config.jumps_sigma {
        Some(spec) => {
            let mut r = rng_for(seed, replication, StreamId::JUMPS_SIGMA);
            draw_jumps(spec, m, &mut r)
        }
        None => (Vec::new(), Vec::new(), Vec::new()),
    };

    let mut times = Vec::with_capacity(m + 1);
    let mut x = Vec::with_capacity(m + 1);
    let mut sigma = Vec::with_capacity(m + 1);
    times.push(0.0);
    x.push(0.0);
    sigma.push(config.vol.sigma0);
    let mut clips = 0u64;

    let mut jx = 0usize;
    let mut js = 0usize;
    for i in 1..=m {
        let t_prev = (i - 1) as f64 * dt;
        let a = config.drift.eval(t_prev);
        if !a.is_finite() {
            return Err(Error::numeric(i, "drift evaluated to a non-finite value"));
        }
        if a.abs() > config.drift_bound {
            return Err(Error::config(format!(
                "drift {a} exceeds declared bound {} at t = {t_prev}",
                config.drift_bound
            )));
        }
        let s_prev = sigma[i - 1];
        let dw = sqrt_dt * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng_w);
        let dw_perp =
            sqrt_dt * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng_perp);

        let mut x_next = x[i - 1] + a * dt + s_prev * dw;
        while jx < jx_nodes.len() && jx_nodes[jx] == i {
            x_next += jx_sizes[jx];
            jx += 1;
        }

        let a_tilde = config.vol.drift.eval(t_prev);
        let s_tilde = config.vol.dw_loading.eval(t_prev);
        let eta_tilde = config.vol.dw_perp_loading.eval(t_prev);
        if !a_tilde.is_finite() || !s_tilde.is_finite() || !eta_tilde.is_finite() {
            return Err(Error::numeric(
                i,
                "volatility coefficient evaluated to a non-finite value",
            ));
        }
        let mut s_next = s_prev + a_tilde * dt + s_tilde * dw + eta_tilde * dw_perp;
        while js < js_nodes.len() && js_nodes[js] == i {
            s_next += js_sizes[js];
            js += 1;
        }
        if s_next < config.vol.floor {
            s_next = config.vol.floor;
            clips += 1;
        }
        if !x_next.is_finite() || !s_next.is_finite() {
            return Err(Error::numeric(i, "state evaluated to a non-finite value"));
        }

        times.push(i as f64 * dt);
        x.push(x_next);
        sigma.push(s_next);
    }

    Ok(SamplePath {
        id: path_id(seed, replication),
        times,
        x_values: x,
        sigma_values: sigma,
        jump_times_x: jx_times,
        jump_times_sigma: js_times,
        sigma_clip_events: clips,
    })
}

/// First-passage probability of standard Brownian motion to a negative level:
/// P(T_x <= l) = 2 (1 - Phi(|x| / sqrt(l))).
pub fn first_passage_prob(x: f64, l: f64) -> Result<f64> {
    if !(x < 0.0) {
        return Err(Error::domain("first_passage_prob requires x < 0"));
    }
    if !(l > 0.0 && l <= 1.0) {
        return Err(Error::domain("first_passage_prob requires 0 < l <= 1"));
    }
    Ok(2.0 * normal_sf(x.abs() / l.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::accumulate;
    use crate::stats::MeanVar;

    #[test]
    fn brownian_starts_at_zero_unit_vol() {
        let p = simulate_brownian(2, 42).unwrap();
        assert_eq!(p.x_values[0], 0.0);
        assert!(p.sigma_values.iter().all(|&s| s == 1.0));
        assert_eq!(p.times[0], 0.0);
        assert_eq!(*p.times.last().unwrap(), 1.0);
    }

    #[test]
    fn brownian_terminal_variance() {
        // Var(W_1) = 1, Monte Carlo over 1e5 replications.
        let mv = accumulate(
            100_000,
            MeanVar::default,
            |acc, rep| {
                let p = simulate_brownian_rep(1000, 7, rep).unwrap();
                acc.push(*p.x_values.last().unwrap());
            },
            |a, b| a.merge(b),
        );
        assert!((mv.var() - 1.0).abs() < 0.02, "Var(W_1) = {}", mv.var());
        assert!(mv.mean().abs() < 0.02);
    }

    #[test]
    fn brownian_max_dominates_endpoint() {
        let mut mean_max = 0.0;
        let mut mean_end = 0.0;
        let reps = 2000;
        for rep in 0..reps {
            let p = simulate_brownian_rep(1000, 11, rep).unwrap();
            mean_max += p.x_values.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
            mean_end += p.x_values.last().unwrap().abs();
        }
        mean_max /= reps as f64;
        mean_end /= reps as f64;
        assert!(mean_max.is_finite());
        assert!(mean_max >= mean_end);
    }

    #[test]
    fn brownian_rejects_tiny_grid() {
        assert!(simulate_brownian(1, 0).is_err());
    }

    #[test]
    fn ito_constant_vol_matches_scaled_brownian() {
        // sigma0 = 2, no drift, no vol noise: Var(X_1) = 4.
        let cfg = PathConfig::brownian(500, 2.0, 3);
        let mv = accumulate(
            100_000,
            MeanVar::default,
            |acc, rep| {
                let p = simulate_ito_rep(&cfg, rep).unwrap();
                acc.push(*p.x_values.last().unwrap());
            },
            |a, b| a.merge(b),
        );
        assert!((mv.var() - 4.0).abs() < 0.1, "Var(X_1) = {}", mv.var());
    }

    #[test]
    fn ito_drift_integrates_to_one() {
        let mut cfg = PathConfig::brownian(500, 1.0, 5);
        cfg.drift = Coeff::Const(1.0);
        cfg.drift_bound = 2.0;
        let mv = accumulate(
            100_000,
            MeanVar::default,
            |acc, rep| {
                let p = simulate_ito_rep(&cfg, rep).unwrap();
                acc.push(*p.x_values.last().unwrap());
            },
            |a, b| a.merge(b),
        );
        assert!((mv.mean() - 1.0).abs() < 0.02, "E[X_1] = {}", mv.mean());
    }

    #[test]
    fn jump_count_has_poisson_mean() {
        let mut cfg = PathConfig::brownian(500, 1.0, 9);
        cfg.jumps_x = Some(JumpSpec {
            intensity: 5.0,
            size: JumpSize::Fixed(1.0),
        });
        let mv = accumulate(
            10_000,
            MeanVar::default,
            |acc, rep| {
                let p = simulate_ito_rep(&cfg, rep).unwrap();
                acc.push(p.jump_times_x.len() as f64);
            },
            |a, b| a.merge(b),
        );
        assert!((mv.mean() - 5.0).abs() < 0.15, "jump mean = {}", mv.mean());
    }

    #[test]
    fn sigma_floor_is_enforced() {
        let mut cfg = PathConfig::brownian(2000, 0.5, 13);
        cfg.vol = VolModel {
            sigma0: 0.5,
            drift: Coeff::Const(-2.0),
            dw_loading: Coeff::Const(0.5),
            dw_perp_loading: Coeff::Const(0.5),
            floor: 0.3,
        };
        let p = simulate_ito(&cfg).unwrap();
        assert!(p.sigma_values.iter().all(|&s| s >= 0.3));
        assert!(p.sigma_clip_events > 0);
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = PathConfig::brownian(200, 1.0, 77);
        let a = simulate_ito_rep(&cfg, 4).unwrap();
        let b = simulate_ito_rep(&cfg, 4).unwrap();
        assert_eq!(a.x_values, b.x_values);
        assert_eq!(a.sigma_values, b.sigma_values);
    }

    #[test]
    fn brownian_covariance_structure() {
        // Cov(X_s, X_t) = sigma0^2 min(s, t) within 3 MC standard errors on a
        // 5x5 grid of times.
        let m = 200;
        let reps: u64 = 100_000;
        let idx: Vec<usize> = vec![40, 80, 120, 160, 200];
        #[derive(Clone)]
        struct Acc {
            sum: Vec<f64>,
            cross: Vec<f64>,
            cross_sq: Vec<f64>,
            n: u64,
        }
        let init = || Acc {
            sum: vec![0.0; 5],
            cross: vec![0.0; 25],
            cross_sq: vec![0.0; 25],
            n: 0,
        };
        let acc = accumulate(
            reps,
            init,
            |acc, rep| {
                let p = simulate_brownian_rep(m, 21, rep).unwrap();
                let v: Vec<f64> = idx.iter().map(|&i| p.x_values[i]).collect();
                for i in 0..5 {
                    acc.sum[i] += v[i];
                    for j in 0..5 {
                        let prod = v[i] * v[j];
                        acc.cross[i * 5 + j] += prod;
                        acc.cross_sq[i * 5 + j] += prod * prod;
                    }
                }
                acc.n += 1;
            },
            |a, b| {
                for i in 0..5 {
                    a.sum[i] += b.sum[i];
                }
                for k in 0..25 {
                    a.cross[k] += b.cross[k];
                    a.cross_sq[k] += b.cross_sq[k];
                }
                a.n += b.n;
            },
        );
        let n = acc.n as f64;
        for i in 0..5 {
            for j in 0..5 {
                let k = i * 5 + j;
                let mean_prod = acc.cross[k] / n;
                let cov = mean_prod - (acc.sum[i] / n) * (acc.sum[j] / n);
                let var_prod = (acc.cross_sq[k] / n - mean_prod * mean_prod).max(0.0);
                let se = (var_prod / n).sqrt();
                let want = (idx[i].min(idx[j]) as f64) / m as f64;
                assert!(
                    (cov - want).abs() <= 3.0 * se + 1e-6,
                    "cov({i},{j}) = {cov}, want {want}, se {se}"
                );
            }
        }
    }

    #[test]
    fn first_passage_values_and_monotonicity() {
        // 2 ( 1 - Phi(1) ) frozen reference.
        let p = first_passage_prob(-1.0, 1.0).unwrap();
        assert!((p - 0.31731050786291410).abs() < 1e-12);
        assert!(first_passage_prob(-10.0, 0.01).unwrap() < 1e-20);
        assert!((first_passage_prob(-1e-12, 1.0).unwrap() - 1.0).abs() < 1e-9);
        assert!(first_passage_prob(0.0, 1.0).is_err());
        assert!(first_passage_prob(-1.0, 0.0).is_err());
        assert!(first_passage_prob(-1.0, 1.5).is_err());

        // Decreasing in |x|, increasing in l.
        let levels = [-0.2, -0.5, -1.0, -2.0, -4.0];
        let horizons = [0.1, 0.25, 0.5, 0.75, 1.0];
        for w in levels.windows(2) {
            for &l in &horizons {
                assert!(
                    first_passage_prob(w[0], l).unwrap() >= first_passage_prob(w[1], l).unwrap()
                );
            }
        }
        for &x in &levels {
            for w in horizons.windows(2) {
                assert!(
                    first_passage_prob(x, w[0]).unwrap() <= first_passage_prob(x, w[1]).unwrap()
                );
            }
        }
    }

    #[test]
    fn csv_export_shape() {
        let p = simulate_brownian(4, 1).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,x,sigma\n"));
        assert_eq!(text.lines().count(), 6);
    }
}
