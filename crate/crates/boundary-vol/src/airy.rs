//! Airy function Ai, Scorer function Gi, the upper Airy integral AI and the
//! closed-form Laplace transform built from them.
//!
//! Branch layout, fixed by overlap cross-validation (each neighbouring pair
//! of branches agrees to better than 1e-9 inside its overlap window):
//!
//! * `Ai`, `Ai'`: Maclaurin series on [-5, 4.75]; 40-point generalized
//!   Gauss-Laguerre quadrature of the steepest-descent representation for
//!   x > 4.75 (algorithm of Gil, Segura & Temme); Taylor marching of the
//!   defining ODE from x = -5 for x < -5 (stable there, both homogeneous
//!   solutions oscillate).
//! * `Gi`, `Gi'`: Maclaurin series on [-5, 5]; rotated-contour integral
//!   evaluated by adaptive Simpson for x > 5; ODE marching for x < -5.
//! * `AI`: adaptive Simpson of `Ai` plus a closed-form integration-by-parts
//!   tail.
//!
//! Sign convention for the Scorer function, fixed numerically from the
//! integral definition rather than taken from any text: Gi'' - x Gi = -1/pi
//! (the residual test pins the constant through finite differences).

use crate::error::{Error, Result};
use once_cell::sync::Lazy;
use std::f64::consts::PI;

/// Supported argument range for the special functions.
pub const DOMAIN: (f64, f64) = (-20.0, 200.0);

// Seeds frozen from 30-digit arithmetic.
const AI_0: f64 = 0.35502805388781724; // 3^(-2/3)/Gamma(2/3)
const AIP_0: f64 = -0.25881940379280680; // -3^(-1/3)/Gamma(1/3)
const GAMMA_1_3: f64 = 2.6789385347077476;
const GAMMA_2_3: f64 = 1.3541179394264005;
// 1/(sqrt(pi) 48^(1/6) Gamma(5/6)), scale of the Laguerre representation.
const GL_SCALE: f64 = 0.26218399708832295;

const SERIES_MAX: f64 = 4.75; // Ai series upper end
const STATION_START: f64 = -5.0; // marching begins here
const STATION_STEP: f64 = 0.5;
const N_STATIONS: usize = 31; // -5.0, -5.5, ..., -20.0
const GI_SERIES_MAX: f64 = 5.0;

// 40-point generalized Gauss-Laguerre rule for weight t^(-1/6) e^(-t).
static GL_NODES: [f64; 40] = [
    2.838914179945677e-2,
    1.709853788600349e-1,
    4.358716783417705e-1,
    8.235182579130309e-1,
    1.334525432542274e+0,
    1.969682932064351e+0,
    2.729981340028599e+0,
    3.616621619161009e+0,
    4.631026110526541e+0,
    5.774851718305477e+0,
    7.050005686302187e+0,
    8.458664375132378e+0,
    1.000329552427494e+1,
    1.168668459477224e+1,
    1.351196593446936e+1,
    1.548265969593771e+1,
    1.760271568080691e+1,
    1.987656560227855e+1,
    2.230918567739628e+1,
    2.490617202129742e+1,
    2.767383207394972e+1,
    3.061929632950841e+1,
    3.375065608502399e+1,
    3.707713497083912e+1,
    4.060930496943413e+1,
    4.435936195160668e+1,
    4.834148224345283e+1,
    5.257229170785049e+1,
    5.707149458398093e+1,
    6.186273503855476e+1,
    6.697480787736505e+1,
    7.244341162998353e+1,
    7.831377964843565e+1,
    8.464480548222756e+1,
    9.151587398018528e+1,
    9.903899485517280e+1,
    1.073824762956655e+2,
    1.168236917656583e+2,
    1.278937448431646e+2,
    1.419607885990635e+2,
];

static GL_WEIGHTS: [f64; 40] = [
    1.437204088033139e-1,
    2.304075592418809e-1,
    2.422530455213276e-1,
    2.036366391034408e-1,
    1.437606306229214e-1,
    8.691288347060781e-2,
    4.541750018329159e-2,
    2.061180312060695e-2,
    8.142788212686070e-3,
    2.802660756633776e-3,
    8.403374416217193e-4,
    2.193037329077657e-4,
    4.974016590092524e-5,
    9.785080959209777e-6,
    1.665428246036952e-6,
    2.445027367996577e-7,
    3.085370342362143e-8,
    3.332960729372821e-9,
    3.067818923653773e-10,
    2.393313099090116e-11,
    1.572947076762871e-12,
    8.649360130178674e-14,
    3.948198167006651e-15,
    1.482711730481083e-16,
    4.533903748150563e-18,
    1.115479804520358e-19,
    2.177666605892262e-21,
    3.318788910579756e-23,
    3.872847904397466e-25,
    3.381185924262449e-27,
    2.146990618932626e-29,
    9.574538399305471e-32,
    2.868778345026473e-34,
    5.452034672917572e-37,
    6.082128006541067e-40,
    3.571351222207245e-43,
    9.375169717620775e-47,
    8.418177761921027e-51,
    1.554777624272071e-55,
    1.625726581852354e-61,
];

fn check_domain(x: f64, what: &str) -> Result<()> {
    if !x.is_finite() || x < DOMAIN.0 - 1e-12 || x > DOMAIN.1 + 1e-12 {
        return Err(Error::domain(format!(
            "{what}: argument {x} outside supported range [{}, {}]",
            DOMAIN.0, DOMAIN.1
        )));
    }
    Ok(())
}

/// Airy function of the first kind.
pub fn airy_ai(x: f64) -> Result<f64> {
    check_domain(x, "airy_ai")?;
    Ok(ai_aip(x).0)
}

/// Derivative of the Airy function.
pub fn airy_ai_prime(x: f64) -> Result<f64> {
    check_domain(x, "airy_ai_prime")?;
    Ok(ai_aip(x).1)
}

/// Scorer function Gi.
pub fn scorer_gi(x: f64) -> Result<f64> {
    check_domain(x, "scorer_gi")?;
    Ok(gi_gip(x).0)
}

/// Derivative of the Scorer function.
pub fn scorer_gi_prime(x: f64) -> Result<f64> {
    check_domain(x, "scorer_gi_prime")?;
    Ok(gi_gip(x).1)
}

fn ai_aip(x: f64) -> (f64, f64) {
    if x > SERIES_MAX {
        ai_laguerre(x)
    } else if x >= STATION_START {
        ai_series(x)
    } else {
        eval_from_stations(x, &AI_STATIONS, 0.0)
    }
}

fn gi_gip(x: f64) -> (f64, f64) {
    if x > GI_SERIES_MAX {
        gi_rotated(x)
    } else if x >= STATION_START {
        gi_series(x)
    } else {
        eval_from_stations(x, &GI_STATIONS, -1.0 / PI)
    }
}

/// Maclaurin series of Ai and Ai'.
fn ai_series(x: f64) -> (f64, f64) {
    let x3 = x * x * x;
    // f, g are the two standard entire solutions; Ai = AI_0 f + AIP_0 g.
    let mut f_term = 1.0;
    let mut f_sum = 1.0;
    let mut g_term = x;
    let mut g_sum = x;
    // Derivative series.
    let mut fp_term = 0.5 * x * x;
    let mut fp_sum = fp_term;
    let mut gp_term = 1.0;
    let mut gp_sum = 1.0;
    for k in 1..200 {
        let kf = k as f64;
        f_term *= x3 / ((3.0 * kf) * (3.0 * kf - 1.0));
        f_sum += f_term;
        g_term *= x3 / ((3.0 * kf + 1.0) * (3.0 * kf));
        g_sum += g_term;
        if k >= 2 {
            fp_term *= x3 / ((3.0 * kf - 1.0) * (3.0 * kf - 3.0));
            fp_sum += fp_term;
        }
        gp_term *= x3 / ((3.0 * kf) * (3.0 * kf - 2.0));
        gp_sum += gp_term;
        if f_term.abs() + g_term.abs() < 1e-18 * (f_sum.abs() + g_sum.abs() + 1e-300) {
            break;
        }
    }
    (
        AI_0 * f_sum + AIP_0 * g_sum,
        AI_0 * fp_sum + AIP_0 * gp_sum,
    )
}

/// Gauss-Laguerre evaluation of Ai and Ai' for positive arguments.
fn ai_laguerre(x: f64) -> (f64, f64) {
    let s = 2.0 * x.powf(1.5) / 3.0;
    let mut i0 = 0.0;
    let mut i1 = 0.0;
    for (t, w) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
        let base = 2.0 + t / s;
        let p = base.powf(-1.0 / 6.0);
        i0 += w * p;
        i1 += w * t * p / base; // (2 + t/s)^(-7/6) * t
    }
    i1 /= 6.0 * s * s;
    let scale = GL_SCALE * s.powf(-1.0 / 6.0) * (-s).exp();
    let ai = scale * i0;
    let aip = scale * x.sqrt() * (-(1.0 + 1.0 / (6.0 * s)) * i0 + i1);
    (ai, aip)
}

/// Maclaurin series of Gi and Gi'. Three interleaved sub-series (period-3
/// cosine factor 1/2, 1/2, -1).
fn gi_series(x: f64) -> (f64, f64) {
    let pref = 3f64.powf(-2.0 / 3.0) / PI;
    let t31 = 3f64.powf(1.0 / 3.0);
    let x3 = x * x * x;
    // Seeds k = 0, 1, 2 of Gamma((k+1)/3) (3^(1/3) x)^k / k!.
    let mut term = [GAMMA_1_3, GAMMA_2_3 * t31 * x, 0.5 * t31 * t31 * x * x];
    let mut dterm = [0.0, GAMMA_2_3 * t31, t31 * t31 * x];
    let cosf = [0.5, 0.5, -1.0];
    let mut sum = 0.0;
    let mut dsum = 0.0;
    for r in 0..3 {
        sum += cosf[r] * term[r];
        dsum += cosf[r] * dterm[r];
    }
    let mut k = 3usize;
    loop {
        let r = k % 3;
        let kf = k as f64;
        term[r] *= x3 / (kf * (kf - 1.0));
        // d/dx of c_k x^k relates to the previous derivative term of the
        // same residue class: ratio x^3 k / ((k-3) k (k-1)).
        dterm[r] = if k == 3 {
            // first derivative term of class 0: c_3 * 3 x^2
            term[r] * 3.0 / x
        } else {
            dterm[r] * x3 * kf / ((kf - 3.0) * kf * (kf - 1.0))
        };
        if x == 0.0 {
            dterm[r] = 0.0;
        }
        sum += cosf[r] * term[r];
        dsum += cosf[r] * dterm[r];
        if term.iter().map(|t| t.abs()).sum::<f64>() < 1e-18 * (sum.abs() + 1.0) && k > 12 {
            break;
        }
        k += 1;
        if k > 400 {
            break;
        }
    }
    (pref * sum, pref * dsum)
}

/// Rotated-contour integral for Gi, Gi' on the positive axis.
///
/// Rotating t -> e^{i pi/6} u in the defining oscillatory integral gives
///   Gi(x)  = (1/pi) int_0^inf e^{-u^3/3 - xu/2} [cos(bu)/2 + sqrt(3) sin(bu)/2] du
///   Gi'(x) = (1/pi) int_0^inf e^{-u^3/3 - xu/2} u [cos(bu)/2 - sqrt(3) sin(bu)/2] du
/// with b = sqrt(3) x / 2. The integrand decays monotonically, so plain
/// adaptive Simpson applies.
fn gi_rotated(x: f64) -> (f64, f64) {
    let beta = 3f64.sqrt() * x / 2.0;
    // Upper limit: u^3/3 + xu/2 = 42 makes the envelope < 6e-19.
    let mut lo = 0.0;
    let mut hi = 5.1;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if mid * mid * mid / 3.0 + x * mid / 2.0 > 42.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let upper = hi;
    let half_sqrt3 = 3f64.sqrt() / 2.0;
    let f_gi = |u: f64| {
        let env = (-u * u * u / 3.0 - x * u / 2.0).exp();
        env * (0.5 * (beta * u).cos() + half_sqrt3 * (beta * u).sin())
    };
    let f_gip = |u: f64| {
        let env = (-u * u * u / 3.0 - x * u / 2.0).exp();
        env * u * (0.5 * (beta * u).cos() - half_sqrt3 * (beta * u).sin())
    };
    let panels = ((8.0 * upper * beta / (2.0 * PI)).ceil() as usize).clamp(8, 4096);
    let gi = paneled_simpson(&f_gi, 0.0, upper, panels, 1e-13) / PI;
    let gip = paneled_simpson(&f_gip, 0.0, upper, panels, 1e-13) / PI;
    (gi, gip)
}

/// One Taylor step of y'' = x y + g from center `a` with values (y, y').
fn taylor_step(a: f64, y: f64, yp: f64, g: f64, delta: f64) -> (f64, f64) {
    const TERMS: usize = 40;
    let mut c = [0.0f64; TERMS];
    c[0] = y;
    c[1] = yp;
    c[2] = (a * c[0] + g) / 2.0;
    for k in 1..TERMS - 2 {
        c[k + 2] = (a * c[k] + c[k - 1]) / (((k + 2) * (k + 1)) as f64);
    }
    let mut val = 0.0;
    let mut der = 0.0;
    for k in (0..TERMS).rev() {
        val = val * delta + c[k];
        if k >= 1 {
            der = der * delta + c[k] * k as f64;
        }
    }
    (val, der)
}

type Stations = Vec<(f64, f64, f64)>; // (x, y, y')

fn build_stations(seed: (f64, f64), g: f64) -> Stations {
    let mut out = Vec::with_capacity(N_STATIONS);
    let (mut y, mut yp) = seed;
    let mut x = STATION_START;
    out.push((x, y, yp));
    for _ in 1..N_STATIONS {
        let stepped = taylor_step(x, y, yp, g, -STATION_STEP);
        x -= STATION_STEP;
        y = stepped.0;
        yp = stepped.1;
        out.push((x, y, yp));
    }
    out
}

static AI_STATIONS: Lazy<Stations> = Lazy::new(|| build_stations(ai_series(STATION_START), 0.0));
static GI_STATIONS: Lazy<Stations> =
    Lazy::new(|| build_stations(gi_series(STATION_START), -1.0 / PI));

fn eval_from_stations(x: f64, stations: &Stations, g: f64) -> (f64, f64) {
    let idx = (((STATION_START - x) / STATION_STEP).round() as usize).min(N_STATIONS - 1);
    let (xs, y, yp) = stations[idx];
    taylor_step(xs, y, yp, g, x - xs)
}

/// Adaptive Simpson over `panels` initial subdivisions.
fn paneled_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize, tol: f64) -> f64 {
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for i in 0..panels {
        let lo = a + i as f64 * h;
        total += adaptive_simpson(f, lo, lo + h, tol / panels as f64, 30);
    }
    total
}

fn simpson(a: f64, fa: f64, b: f64, fb: f64, fm: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    adaptive_inner(f, a, fa, b, fb, m, fm, simpson(a, fa, b, fb, fm), tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_inner(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    m: f64,
    fm: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> f64 {
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, fa, m, fm, flm);
    let right = simpson(m, fm, b, fb, frm);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        adaptive_inner(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)
            + adaptive_inner(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
    }
}

/// Upper Airy integral AI(x) = int_x^inf Ai(y) dy.
pub fn airy_integral_ai(x: f64) -> Result<f64> {
    if !x.is_finite() || x < DOMAIN.0 - 1e-12 {
        return Err(Error::domain(format!(
            "airy_integral_ai: argument {x} below supported minimum {}",
            DOMAIN.0
        )));
    }
    const TAIL_FROM: f64 = 19.0;
    if x >= TAIL_FROM {
        return Ok(ai_tail(x.min(DOMAIN.1)));
    }
    let f = |y: f64| ai_aip(y).0;
    // Resolve the oscillations on the negative axis before adapting.
    let span = TAIL_FROM - x;
    let freq = x.abs().max(1.0).sqrt();
    let panels = ((span * freq * 8.0 / (2.0 * PI)).ceil() as usize).clamp(16, 2048);
    let body = paneled_simpson(&f, x, TAIL_FROM, panels, 1e-12);
    Ok(body + ai_tail(TAIL_FROM))
}

/// Closed-form tail from repeated integration by parts against Ai'' = x Ai:
/// int_z^inf Ai = -Ai'(z)(1/z + 2/z^4 + 40/z^7) - Ai(z)(1/z^2 + 8/z^5 + 280/z^8)
/// with relative error below 1e-9 for z >= 19.
fn ai_tail(z: f64) -> f64 {
    let (ai, aip) = ai_aip(z);
    let z2 = z * z;
    let z4 = z2 * z2;
    -aip * (1.0 / z + 2.0 / z4 + 40.0 / (z4 * z2 * z))
        - ai * (1.0 / z2 + 8.0 / (z4 * z) + 280.0 / (z4 * z4))
}

/// Parameters of the Laplace-transform kernel.
#[derive(Debug, Clone, Copy)]
pub struct ZetaParams {
    /// Laplace variable (in time), s > 0.
    pub s: f64,
    /// Spatial offset of the reflected boundary.
    pub x: f64,
    /// Area-functional scale, theta > 0.
    pub theta: f64,
}

impl ZetaParams {
    pub fn new(s: f64, x: f64, theta: f64) -> Result<Self> {
        if !(s > 0.0) || !(theta > 0.0) || !s.is_finite() || !x.is_finite() || !theta.is_finite() {
            return Err(Error::config("zeta requires s > 0, theta > 0, finite x"));
        }
        Ok(ZetaParams { s, x, theta })
    }
}

/// Closed-form Laplace transform kernel zeta_s(x, theta).
///
/// For x >= 0:
///   zeta = B Ai(sqrt(2) theta^(1/3) x + theta^(-2/3) s)
///        + pi Gi(sqrt(2) theta^(1/3) x + theta^(-2/3) s)
/// and for x < 0:
///   zeta = A exp(sqrt(2 s) x) + theta^(2/3)/s,
/// with the connection constants
///   B = [pi (theta^(1/3) Gi'(u0) - sqrt(s) Gi(u0)) + theta^(2/3)/sqrt(s)]
///       / [sqrt(s) Ai(u0) - theta^(1/3) Ai'(u0)],
///   A = [theta^(2/3) Ai(u0)/sqrt(s) + theta^(1/3) AI(u0)]
///       / [sqrt(s) Ai(u0) - theta^(1/3) Ai'(u0)] - theta^(2/3)/s,
/// where u0 = theta^(-2/3) s. Both branches are checked for continuity at
/// x = 0 on every call.
pub fn zeta(params: &ZetaParams) -> Result<f64> {
    let ZetaParams { s, x, theta } = *params;
    let u0 = theta.powf(-2.0 / 3.0) * s;
    let t13 = theta.powf(1.0 / 3.0);
    let t23 = theta.powf(2.0 / 3.0);
    let sq_s = s.sqrt();

    let ai0 = airy_ai(u0)?;
    let aip0 = airy_ai_prime(u0)?;
    let gi0 = scorer_gi(u0)?;
    let gip0 = scorer_gi_prime(u0)?;

    let den = sq_s * ai0 - t13 * aip0;
    if den.abs() < 1e-12 {
        return Err(Error::numeric(
            0,
            format!("zeta denominator sqrt(s) Ai - theta^(1/3) Ai' = {den:.3e} too small"),
        ));
    }

    let b_const = (PI * (t13 * gip0 - sq_s * gi0) + t23 / sq_s) / den;
    let a_const = (t23 * ai0 / sq_s + t13 * airy_integral_ai(u0)?) / den - t23 / s;

    let minus_at_0 = a_const + t23 / s;
    let plus_at_0 = b_const * ai0 + PI * gi0;
    if (minus_at_0 - plus_at_0).abs() > 1e-7 {
        return Err(Error::numeric(
            0,
            format!(
                "zeta branches disagree at x=0: {minus_at_0:.12e} vs {plus_at_0:.12e}"
            ),
        ));
    }

    if x < 0.0 {
        Ok(a_const * ((2.0 * s).sqrt() * x).exp() + t23 / s)
    } else {
        let u = 2f64.sqrt() * t13 * x + u0;
        Ok(b_const * airy_ai(u)? + PI * scorer_gi(u)?)
    }
}
