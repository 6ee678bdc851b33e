//! Monte Carlo estimators of Brownian positive-part area functionals.
//!
//! The bin-minimum law is driven by H(x) = int_0^1 (W_t + x)_+ dt through
//! survival probabilities of the form E[exp(-theta H(x))]. This module
//! estimates those exponential moments, the companion negative-part
//! functional I, and the two integral functionals whose combination
//! reproduces the moment function of the estimator.

use crate::error::{Error, Result};
use crate::exec::accumulate;
use crate::rng::{rng_for, StreamId};
use crate::stats::{normal_pdf, normal_sf, MeanVar};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Monte Carlo configuration for excursion functionals.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MCConfig {
    pub replications: u64,
    /// Time steps of the Riemann discretization on [0, 1].
    pub time_grid: usize,
    pub seed: u64,
    pub antithetic: bool,
}

impl MCConfig {
    pub fn new(replications: u64, time_grid: usize, seed: u64, antithetic: bool) -> Result<Self> {
        let cfg = MCConfig {
            replications,
            time_grid,
            seed,
            antithetic,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications < 100 {
            return Err(Error::config("MCConfig needs >= 100 replications"));
        }
        if self.time_grid < 1000 {
            return Err(Error::config("MCConfig needs >= 1000 time steps"));
        }
        Ok(())
    }
}

/// A Monte Carlo estimate with its standard error and provenance.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MCEstimate {
    pub value: f64,
    pub std_error: f64,
    pub replications: u64,
    pub time_grid: usize,
}

impl MCEstimate {
    fn from_meanvar(mv: &MeanVar, cfg: &MCConfig) -> Self {
        MCEstimate {
            value: mv.mean(),
            std_error: mv.std_error(),
            replications: cfg.replications,
            time_grid: cfg.time_grid,
        }
    }
}

/// Sorted left-endpoint path values with prefix sums; supports O(log m)
/// evaluation of positive-part area means for any offset.
struct SortedPath {
    values: Vec<f64>,
    prefix: Vec<f64>,
    total: f64,
}

impl SortedPath {
    fn generate(seed: u64, replication: u64, stream: StreamId, m: usize) -> Self {
        let mut rng = rng_for(seed, replication, stream);
        let sqrt_dt = (1.0 / m as f64).sqrt();
        let mut values = Vec::with_capacity(m);
        let mut w = 0.0;
        values.push(0.0);
        for _ in 1..m {
            w += sqrt_dt * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
            values.push(w);
        }
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut prefix = Vec::with_capacity(m);
        let mut run = 0.0;
        for &v in &values {
            run += v;
            prefix.push(run);
        }
        let total = run;
        SortedPath {
            values,
            prefix,
            total,
        }
    }

    /// mean over nodes of (W_i + x)_+.
    fn pos_area(&self, x: f64) -> f64 {
        let m = self.values.len();
        let idx = self.values.partition_point(|&v| v <= -x);
        let cnt = m - idx;
        if cnt == 0 {
            return 0.0;
        }
        let sum_above = self.total - if idx == 0 { 0.0 } else { self.prefix[idx - 1] };
        (sum_above + cnt as f64 * x) / m as f64
    }

    /// mean over nodes of (-W_i + x)_+, the mirrored path's area.
    fn pos_area_mirror(&self, x: f64) -> f64 {
        let m = self.values.len();
        let idx = self.values.partition_point(|&v| v < x);
        if idx == 0 {
            return 0.0;
        }
        (idx as f64 * x - self.prefix[idx - 1]) / m as f64
    }

}

/// E[exp(-theta H(x))] with H(x) = int_0^1 (W_t + x)_+ dt, by left-endpoint
/// Riemann sums over `cfg.time_grid` steps, averaged over replications.
/// Antithetic pairing (W, -W) when enabled.
pub fn mc_exp_area(x: f64, theta: f64, cfg: &MCConfig) -> Result<MCEstimate> {
    Ok(mc_exp_area_many(&[(x, theta)], cfg)?.pop().unwrap())
}

/// Batched variant sharing one set of paths across all `(x, theta)` pairs.
/// Estimates are therefore positively correlated across pairs; each is still
/// unbiased with the reported marginal standard error.
///
/// Small batches accumulate areas in a single streaming pass; large batches
/// (quadrature grids) sort each path once and answer every offset in
/// O(log m).
pub fn mc_exp_area_many(pairs: &[(f64, f64)], cfg: &MCConfig) -> Result<Vec<MCEstimate>> {
    cfg.validate()?;
    for &(_, theta) in pairs {
        if !(theta > 0.0) {
            return Err(Error::config("mc_exp_area requires theta > 0"));
        }
    }
    let m = cfg.time_grid;
    let antithetic = cfg.antithetic;
    let seed = cfg.seed;
    let n_pairs = pairs.len();
    let pairs_owned: Vec<(f64, f64)> = pairs.to_vec();
    let streaming = n_pairs <= 24;
    let acc = accumulate(
        cfg.replications,
        move || vec![MeanVar::default(); n_pairs],
        move |acc, rep| {
            if streaming {
                let mut rng = rng_for(seed, rep, StreamId::EXCURSION);
                let sqrt_dt = (1.0 / m as f64).sqrt();
                let mut h_plus = vec![0.0f64; n_pairs];
                let mut h_minus = vec![0.0f64; n_pairs];
                let mut w = 0.0f64;
                for i in 0..m {
                    if i > 0 {
                        w += sqrt_dt
                            * <StandardNormal as Distribution<f64>>::sample(
                                &StandardNormal,
                                &mut rng,
                            );
                    }
                    for (j, &(x, _)) in pairs_owned.iter().enumerate() {
                        h_plus[j] += (w + x).max(0.0);
                        h_minus[j] += (x - w).max(0.0);
                    }
                }
                for (j, &(_, theta)) in pairs_owned.iter().enumerate() {
                    let hp = h_plus[j] / m as f64;
                    let v = if antithetic {
                        let hm = h_minus[j] / m as f64;
                        0.5 * ((-theta * hp).exp() + (-theta * hm).exp())
                    } else {
                        (-theta * hp).exp()
                    };
                    acc[j].push(v);
                }
            } else {
                let path = SortedPath::generate(seed, rep, StreamId::EXCURSION, m);
                for (j, &(x, theta)) in pairs_owned.iter().enumerate() {
                    let hp = path.pos_area(x);
                    let v = if antithetic {
                        let hm = path.pos_area_mirror(x);
                        0.5 * ((-theta * hp).exp() + (-theta * hm).exp())
                    } else {
                        (-theta * hp).exp()
                    };
                    acc[j].push(v);
                }
            }
        },
        |a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                x.merge(y);
            }
        },
    );
    Ok(acc.iter().map(|mv| MCEstimate::from_meanvar(mv, cfg)).collect())
}

/// Survival law of the scaled centered bin minimum:
/// P(h^(-1/2) R > x sigma) = E[exp(-K sigma H(x))]. Delegates to
/// [`mc_exp_area`] with theta = K sigma.
pub fn survival_r(x: f64, sigma: f64, k: f64, cfg: &MCConfig) -> Result<MCEstimate> {
    if !(sigma > 0.0) || !(k > 0.0) {
        return Err(Error::config("survival_r requires sigma > 0 and K > 0"));
    }
    mc_exp_area(x, k * sigma, cfg)
}

/// I(K sigma, s) = E[exp(-K sigma (1-s)^(3/2) int_0^1 (W_t)_- dt)].
pub fn mc_i(k_sigma: f64, s: f64, cfg: &MCConfig) -> Result<MCEstimate> {
    Ok(mc_i_curve(k_sigma, &[s], cfg)?.pop().unwrap())
}

/// Batched I over an s-grid, sharing the negative-part area samples.
pub fn mc_i_curve(k_sigma: f64, s_grid: &[f64], cfg: &MCConfig) -> Result<Vec<MCEstimate>> {
    cfg.validate()?;
    if !(k_sigma >= 0.0) {
        return Err(Error::config("mc_i requires K sigma >= 0"));
    }
    for &s in s_grid {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::config("mc_i requires s in [0, 1]"));
        }
    }
    let m = cfg.time_grid;
    let antithetic = cfg.antithetic;
    let seed = cfg.seed;
    let scales: Vec<f64> = s_grid
        .iter()
        .map(|&s| k_sigma * (1.0 - s).powf(1.5))
        .collect();
    let n_scales = scales.len();
    let acc = accumulate(
        cfg.replications,
        move || vec![MeanVar::default(); n_scales],
        move |acc, rep| {
            let mut rng = rng_for(seed, rep, StreamId::EXCURSION);
            let sqrt_dt = (1.0 / m as f64).sqrt();
            let mut w = 0.0f64;
            let mut neg = 0.0f64;
            let mut pos = 0.0f64;
            for i in 0..m {
                if i > 0 {
                    w += sqrt_dt
                        * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
                }
                neg += (-w).max(0.0);
                pos += w.max(0.0);
            }
            let a_minus = neg / m as f64;
            let a_minus_mirror = pos / m as f64; // (W)_+ is (-W)_- of the mirror
            for (j, &lam) in scales.iter().enumerate() {
                let v = if antithetic {
                    0.5 * ((-lam * a_minus).exp() + (-lam * a_minus_mirror).exp())
                } else {
                    (-lam * a_minus).exp()
                };
                acc[j].push(v);
            }
        },
        |a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                x.merge(y);
            }
        },
    );
    Ok(acc.iter().map(|mv| MCEstimate::from_meanvar(mv, cfg)).collect())
}

/// Monte Carlo side of the Laplace-transform identity: Simpson quadrature of
/// e^(-s t) E[exp(-sqrt(2) theta int_0^t (x + W)_+ du)] over t, using the
/// Brownian scaling int_0^t (x + W_u)_+ du = t^(3/2) int_0^1 (x t^(-1/2) + W)_+ du
/// in law, so one set of unit-horizon paths serves every node. The horizon
/// is truncated where e^(-s t) < 1e-6; at t = 0 the integrand is exactly 1.
/// Matches theta^(-2/3) zeta_s(x, theta).
pub fn laplace_mc(x: f64, theta: f64, s: f64, cfg: &MCConfig) -> Result<MCEstimate> {
    if !(theta > 0.0) || !(s > 0.0) {
        return Err(Error::config("laplace_mc requires theta > 0 and s > 0"));
    }
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
    let mut integral = weight(0);
    let mut se = 0.0;
    for (i, est) in ests.iter().enumerate() {
        let t = (i + 1) as f64 * h;
        integral += weight(i + 1) * (-s * t).exp() * est.value;
        se += weight(i + 1) * (-s * t).exp() * est.std_error;
    }
    Ok(MCEstimate {
        value: integral,
        std_error: se,
        replications: cfg.replications,
        time_grid: cfg.time_grid,
    })
}

/// The two integral functionals of the hitting-time decomposition.
///
/// With q(x) = E[exp(-K sigma H(x))] and I as above:
///   Lambda_1 = int_0^inf x q(x) dx + (1 - int_0^1 I(Ks, s) ds) / 2,
///   Lambda_2 = sqrt(2/pi) (1 - int_0^1 I(Ks, v^2) dv) - int_0^inf q(x) dx.
///
/// The weight in the Lambda_2 noise term comes from integrating the
/// first-passage density over levels, int_0^inf f_{T_{-x}}(s) dx
/// = (2 pi s)^(-1/2); substituting s = v^2 removes the endpoint singularity
/// and turns the weighted integral into sqrt(2/pi) int_0^1 I(Ks, v^2) dv.
/// The moment function is recovered as 2 sigma^2 (2 Lambda_1 - Lambda_2^2).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LambdaFunctionals {
    pub lambda1: MCEstimate,
    pub lambda2: MCEstimate,
    pub k_sigma: f64,
    pub sigma: f64,
    pub x_max: f64,
}

impl LambdaFunctionals {
    /// The moment-function value 2 sigma^2 (2 Lambda_1 - Lambda_2^2), with a
    /// linearly propagated standard error.
    pub fn psi_tilde(&self) -> MCEstimate {
        let s2 = self.sigma * self.sigma;
        let value = 2.0 * s2 * (2.0 * self.lambda1.value - self.lambda2.value.powi(2));
        let std_error = 2.0
            * s2
            * (2.0 * self.lambda1.std_error
                + 2.0 * self.lambda2.value.abs() * self.lambda2.std_error);
        MCEstimate {
            value,
            std_error,
            replications: self.lambda1.replications,
            time_grid: self.lambda1.time_grid,
        }
    }
}

/// Closed-form bound on the tail int_{a}^inf (1 + x) q(x) dx used to verify
/// that the quadrature truncation contributes less than 1e-4.
///
/// From P(T_{-x/2} <= l) = 2(1 - Phi(x / (2 sqrt(l)))) and
/// q(x) <= P(T_{-x/2} <= l) + exp(-K sigma l x / 2) with l = (K sigma)^(-2/3).
fn lambda_tail_bound(k_sigma: f64, a: f64) -> f64 {
    let l = k_sigma.powf(-2.0 / 3.0);
    let c = 2.0 * l.sqrt();
    let beta = k_sigma * l / 2.0; // = (K sigma)^(1/3) / 2
    let b = a / c;
    // weighted, int_a^inf x * 2(1 - Phi(x/c)) dx <= 2 c^2 (1 - Phi(b)) (1 + b^2)
    let gauss_x = 2.0 * c * c * ((1.0 + b * b) * normal_sf(b) + b * normal_pdf(b));
    let exp_x = (a / beta + 1.0 / (beta * beta)) * (-beta * a).exp();
    // unweighted, int_a^inf 2(1 - Phi(x/c)) dx <= 2 c phi(b)
    let gauss_1 = 2.0 * c * normal_pdf(b);
    let exp_1 = (-beta * a).exp() / beta;
    gauss_x + exp_x + gauss_1 + exp_1
}

/// Composite-Simpson weights on [lo, hi] with `points` nodes (odd count).
fn simpson_weights(lo: f64, hi: f64, points: usize) -> (Vec<f64>, Vec<f64>) {
    let n = if points % 2 == 0 { points + 1 } else { points.max(3) };
    let h = (hi - lo) / (n - 1) as f64;
    let nodes: Vec<f64> = (0..n).map(|i| lo + i as f64 * h).collect();
    let mut weights = vec![0.0; n];
    for i in 0..n {
        weights[i] = if i == 0 || i == n - 1 {
            h / 3.0
        } else if i % 2 == 1 {
            4.0 * h / 3.0
        } else {
            2.0 * h / 3.0
        };
    }
    (nodes, weights)
}

/// Estimates (Lambda_1, Lambda_2) by Simpson quadrature of the Monte Carlo
/// curves. Standard errors are propagated linearly through the quadrature,
/// which is conservative (the node estimates share paths and are positively
/// correlated).
pub fn lambda_functionals(
    sigma: f64,
    k: f64,
    cfg: &MCConfig,
    x_max: Option<f64>,
    quad_points: usize,
) -> Result<LambdaFunctionals> {
    if !(sigma > 0.0) || !(k > 0.0) {
        return Err(Error::config("lambda_functionals needs sigma > 0, K > 0"));
    }
    cfg.validate()?;
    let ks = k * sigma;
    let a = x_max.unwrap_or(8.0 * ks.powf(-1.0 / 3.0) + 5.0);
    let bound = lambda_tail_bound(ks, a);
    if bound > 1e-4 {
        let mut suggestion = a;
        while lambda_tail_bound(ks, suggestion) > 5e-5 && suggestion < 1e4 {
            suggestion *= 1.25;
        }
        return Err(Error::config(format!(
            "x_max = {a} leaves a quadrature tail bound of {bound:.2e} > 1e-4; \
             use x_max >= {suggestion:.2}"
        )));
    }

    let (x_nodes, x_weights) = simpson_weights(0.0, a, quad_points);
    let pairs: Vec<(f64, f64)> = x_nodes.iter().map(|&x| (x, ks)).collect();
    let q = mc_exp_area_many(&pairs, cfg)?;

    // Plain and substituted I-curves share one MC pass.
    let (s_nodes, s_weights) = simpson_weights(0.0, 1.0, quad_points);
    let (v_nodes, v_weights) = simpson_weights(0.0, 1.0, quad_points);
    let mut all_s: Vec<f64> = s_nodes.clone();
    all_s.extend(v_nodes.iter().map(|&v| v * v));
    let i_vals = mc_i_curve(ks, &all_s, cfg)?;
    let (i_plain, i_subst) = i_vals.split_at(s_nodes.len());

    let mut int_xq = 0.0;
    let mut int_xq_se = 0.0;
    let mut int_q = 0.0;
    let mut int_q_se = 0.0;
    for ((&x, &w), est) in x_nodes.iter().zip(&x_weights).zip(&q) {
        int_xq += w * x * est.value;
        int_xq_se += w * x * est.std_error;
        int_q += w * est.value;
        int_q_se += w * est.std_error;
    }
    let mut int_i = 0.0;
    let mut int_i_se = 0.0;
    for (&w, est) in s_weights.iter().zip(i_plain) {
        int_i += w * est.value;
        int_i_se += w * est.std_error;
    }
    let mut int_iv = 0.0;
    let mut int_iv_se = 0.0;
    for (&w, est) in v_weights.iter().zip(i_subst) {
        int_iv += w * est.value;
        int_iv_se += w * est.std_error;
    }

    let sqrt_2_pi = (2.0 / std::f64::consts::PI).sqrt();
    let lambda1 = MCEstimate {
        value: int_xq + 0.5 * (1.0 - int_i),
        std_error: int_xq_se + 0.5 * int_i_se,
        replications: cfg.replications,
        time_grid: cfg.time_grid,
    };
    let lambda2 = MCEstimate {
        value: sqrt_2_pi * (1.0 - int_iv) - int_q,
        std_error: sqrt_2_pi * int_iv_se + int_q_se,
        replications: cfg.replications,
        time_grid: cfg.time_grid,
    };
    Ok(LambdaFunctionals {
        lambda1,
        lambda2,
        k_sigma: ks,
        sigma,
        x_max: a,
    })
}
