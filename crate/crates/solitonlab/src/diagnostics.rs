//! The decay machinery: rate constants theta and kappa_{alpha,beta},
//! the monotonicity functional I, weighted residual functionals J and
//! moment integrals, region-wise pointwise decay fits, interaction
//! integrals, and the corrected energy F_s.
//!
//! Fitted constants (C0, C1, K_{s,n}, ...) are always the smallest values
//! consistent with the measured data over the stated window; none are
//! taken from theory, which proves existence only.
//!
//! Quadrature convention: trapezoid on the given grid (spectrally accurate
//! for periodic data), analytic tail completion where the integrand's
//! closed form is known, and a floor of 1e-28 below which sampled values
//! are treated as quadrature noise and excluded from fits. Diagnostics on
//! the exact determinant oracle use pointwise evaluations with full
//! relative accuracy instead, with a correspondingly lower floor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ComplexField, RealField};
use crate::integrable::KdvResidualOracle;
use crate::profiles::{NlsSolitonParams, SolitonParams};
use crate::solver::RunRecord;
use crate::spectral::{spectral_derivative, spectral_derivative_complex};
use crate::weights::WeightFamily;

pub const SAMPLED_QUADRATURE_FLOOR: f64 = 1e-28;

/// Universal exponential time rate: `min{c_1, speed gaps}^{3/2} / 32`.
pub fn theta(speeds: &[f64]) -> Result<f64> {
    validate_speeds(speeds)?;
    let mut m = speeds[0];
    for w in speeds.windows(2) {
        m = m.min(w[1] - w[0]);
    }
    Ok(m.powf(1.5) / 32.0)
}

/// Solitons-region spatial rate `min{sqrt(c_1), theta/(c_1 - alpha),
/// theta/(beta - c_N), theta/gaps}`.
pub fn kappa_alpha_beta(speeds: &[f64], alpha: f64, beta: f64) -> Result<f64> {
    validate_speeds(speeds)?;
    let c1 = speeds[0];
    let cn = *speeds.last().unwrap();
    if !(alpha > 0.0 && alpha < c1) {
        return Err(Error::invalid(format!(
            "alpha = {alpha} violates 0 < alpha < c_1 = {c1}"
        )));
    }
    if !(beta > cn) {
        return Err(Error::invalid(format!("beta = {beta} must exceed c_N = {cn}")));
    }
    let th = theta(speeds)?;
    let mut k = c1.sqrt().min(th / (c1 - alpha)).min(th / (beta - cn));
    for w in speeds.windows(2) {
        k = k.min(th / (w[1] - w[0]));
    }
    Ok(k)
}

fn validate_speeds(speeds: &[f64]) -> Result<()> {
    if speeds.is_empty() || speeds[0] <= 0.0 {
        return Err(Error::invalid("speeds must be positive and nonempty"));
    }
    for w in speeds.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::invalid("speeds must be strictly increasing"));
        }
    }
    Ok(())
}

/// Region/weight parameters with their admissibility constraints:
/// `0 < alpha < c_1`, `beta > c_N`, `eta in (0, c_1)`,
/// `kappa_alpha in (0, sqrt(alpha)/2)`, `kappa = 2 kappa_alpha`,
/// `delta in (0, alpha - kappa^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateParams {
    pub alpha: f64,
    pub beta: f64,
    pub eta: f64,
    pub kappa_alpha: f64,
    pub kappa: f64,
    pub delta: f64,
}

impl RateParams {
    /// Defaults: alpha = c_1/2, beta = c_N + 1, eta = c_1/2,
    /// kappa_alpha = sqrt(alpha)/4 (midpoint), kappa = 2 kappa_alpha,
    /// delta = (alpha - kappa^2)/2 (midpoint).
    pub fn defaults_for(speeds: &[f64]) -> Result<Self> {
        validate_speeds(speeds)?;
        let c1 = speeds[0];
        let cn = *speeds.last().unwrap();
        let alpha = c1 / 2.0;
        let kappa_alpha = alpha.sqrt() / 4.0;
        let kappa = 2.0 * kappa_alpha;
        let p = RateParams {
            alpha,
            beta: cn + 1.0,
            eta: c1 / 2.0,
            kappa_alpha,
            kappa,
            delta: (alpha - kappa * kappa) / 2.0,
        };
        p.validate(speeds)?;
        Ok(p)
    }

    pub fn validate(&self, speeds: &[f64]) -> Result<()> {
        validate_speeds(speeds)?;
        let c1 = speeds[0];
        let cn = *speeds.last().unwrap();
        if !(self.alpha > 0.0 && self.alpha < c1) {
            return Err(Error::invalid(format!(
                "alpha = {} violates 0 < alpha < c_1",
                self.alpha
            )));
        }
        if !(self.beta > cn) {
            return Err(Error::invalid(format!("beta = {} must exceed c_N", self.beta)));
        }
        if !(self.eta > 0.0 && self.eta < c1) {
            return Err(Error::invalid(format!(
                "eta = {} violates eta in (0, c_1)",
                self.eta
            )));
        }
        if !(self.kappa_alpha > 0.0 && self.kappa_alpha < self.alpha.sqrt() / 2.0) {
            return Err(Error::invalid(format!(
                "kappa_alpha = {} violates (0, sqrt(alpha)/2)",
                self.kappa_alpha
            )));
        }
        if !(self.delta > 0.0 && self.delta < self.alpha - self.kappa * self.kappa) {
            return Err(Error::invalid(format!(
                "delta = {} violates (0, alpha - kappa^2)",
                self.delta
            )));
        }
        Ok(())
    }
}

/// z = u - sum_j R_j(t) with the soliton sum sampled analytically.
pub fn residual_real(u: &RealField, params: &[SolitonParams], t: f64) -> RealField {
    let mut z = u.clone();
    for p in params {
        let prof = p.profile();
        let center = p.center(t);
        for (i, x) in u.grid.points().enumerate() {
            z.values[i] -= prof.eval(x - center);
        }
    }
    z
}

pub fn residual_complex(u: &ComplexField, params: &[NlsSolitonParams], t: f64) -> ComplexField {
    let mut z = u.clone();
    for p in params {
        let prof = p.profile();
        let center = p.center(t);
        let phase_t = (p.omega - p.v * p.v / 4.0) * t + p.gamma;
        for (i, x) in u.grid.points().enumerate() {
            let env = prof.eval(x - center);
            let phase = 0.5 * p.v * x + phase_t;
            z.values[i] -= num_complex::Complex64::from_polar(env, phase);
        }
    }
    z
}

/// Localized-mass functional
/// `I_{(t0,x0)}(t) = int u^2(t, x) phi(x - alpha t - x0 + delta (t - t0)) dx`
/// with the left (decreasing) weight at rate kappa.
pub fn i_functional(
    run: &RunRecord,
    t: f64,
    t0: f64,
    x0: f64,
    params: &RateParams,
) -> Result<f64> {
    let u = run.real_at(t)?;
    let w = WeightFamily::left(params.kappa)?;
    let arg_shift = params.alpha * t + x0 - params.delta * (t - t0);
    let dx = u.grid.dx();
    let mut total = 0.0;
    for (i, x) in u.grid.points().enumerate() {
        total += u.values[i] * u.values[i] * w.eval(x - arg_shift, 0)?;
    }
    let total = total * dx;
    // phi <= 1, so I is bounded by the mass
    let mass: f64 = u.values.iter().map(|v| v * v).sum::<f64>() * dx;
    debug_assert!(total <= mass * (1.0 + 1e-12));
    Ok(total)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub t0: f64,
    /// Smallest C1 with `I(t0) <= I(t) + C1 e^{kappa x0}` across all data.
    pub c1: f64,
    /// Smallest C0 with `dI/dt >= -C0 e^{-kappa(-x0 + delta (t - t0))}`.
    pub c0: f64,
    /// I_{(t0,0)} series over the run.
    pub series_x0_zero: Vec<(f64, f64)>,
    /// I_{(t0,0)}(t_end) / I_{(t0,0)}(t0).
    pub final_over_initial: f64,
}

/// Fit the monotonicity constants over snapshots `t >= t0` and the given
/// x0 sweep. Violations are data, not errors: C1 and C0 are reported as
/// the smallest constants that zero every margin.
pub fn monotonicity_check(
    run: &RunRecord,
    t0: f64,
    x0_list: &[f64],
    params: &RateParams,
) -> Result<MonotonicityReport> {
    let times: Vec<f64> = run.times().into_iter().filter(|&t| t >= t0 - 1e-9).collect();
    if times.len() < 2 {
        return Err(Error::invalid("need at least two snapshots past t0"));
    }
    let mut c1 = 0.0_f64;
    let mut c0 = 0.0_f64;
    for &x0 in x0_list {
        let series: Vec<f64> = times
            .iter()
            .map(|&t| i_functional(run, t, t0, x0, params))
            .collect::<Result<_>>()?;
        let i0 = series[0];
        for (i, &t) in times.iter().enumerate() {
            let drop = i0 - series[i];
            c1 = c1.max(drop * (-params.kappa * x0).exp());
            if i > 0 {
                let dt = t - times[i - 1];
                let slope = (series[i] - series[i - 1]) / dt;
                let t_mid = 0.5 * (t + times[i - 1]);
                let bound_arg = -x0 + params.delta * (t_mid - t0);
                c0 = c0.max((-slope).max(0.0) * (params.kappa * bound_arg).exp());
            }
        }
    }
    let series_zero: Vec<(f64, f64)> = times
        .iter()
        .map(|&t| Ok((t, i_functional(run, t, t0, 0.0, params)?)))
        .collect::<Result<_>>()?;
    let final_over_initial = series_zero.last().unwrap().1 / series_zero[0].1;
    Ok(MonotonicityReport {
        t0,
        c1,
        c0,
        series_x0_zero: series_zero,
        final_over_initial,
    })
}

/// Weighted derivative energy of a sampled residual:
/// `J_{s,x0}(t) = int (d^s z)^2 phi_[n](x - x0 - beta t) dx`.
///
/// For s >= 1 the derivative is spectral, so the field must be resolved at
/// order s (guarded).
pub fn j_functional(
    z: &RealField,
    s: usize,
    x0: f64,
    beta: f64,
    t: f64,
    weight: &WeightFamily,
    ladder_n: usize,
) -> Result<f64> {
    let ds = if s == 0 {
        z.clone()
    } else {
        crate::spectral::check_resolution(z)?;
        spectral_derivative(z, s)
    };
    let dx = z.grid.dx();
    let mut total = 0.0;
    for (i, x) in z.grid.points().enumerate() {
        let w = weight.ladder_eval(ladder_n, x - x0 - beta * t)?;
        total += ds.values[i] * ds.values[i] * w;
    }
    Ok(total * dx)
}

/// Radial (|x|) variant for NLS residuals, 1-D reduction.
pub fn j_functional_radial(
    z: &ComplexField,
    s: usize,
    x0: f64,
    beta: f64,
    t: f64,
    weight: &WeightFamily,
) -> Result<f64> {
    let ds = if s == 0 {
        z.clone()
    } else {
        spectral_derivative_complex(z, s)
    };
    let dx = z.grid.dx();
    let mut total = 0.0;
    for (i, x) in z.grid.points().enumerate() {
        let w = weight.eval(x.abs() - x0 - beta * t, 0)?;
        total += ds.values[i].norm_sqr() * w;
    }
    Ok(total * dx)
}

/// Same J, but from the exact residual oracle (pointwise analytic values,
/// retains relative accuracy at any magnitude). Integrates over
/// `[x_lo, x_hi]` at spacing `dx`.
pub fn j_functional_exact(
    oracle: &KdvResidualOracle,
    t: f64,
    s: usize,
    x0: f64,
    beta: f64,
    weight: &WeightFamily,
    ladder_n: usize,
    x_lo: f64,
    x_hi: f64,
    dx: f64,
) -> Result<f64> {
    let n = ((x_hi - x_lo) / dx).ceil() as usize;
    let mut total = 0.0;
    for i in 0..=n {
        let x = x_lo + i as f64 * dx;
        let z = oracle.z_derivatives(t, x, s)[s];
        let w = weight.ladder_eval(ladder_n, x - x0 - beta * t)?;
        let trapz = if i == 0 || i == n { 0.5 } else { 1.0 };
        total += trapz * z * z * w;
    }
    Ok(total * dx)
}

/// Right-region moment integral `int_{x >= beta t} (d^s z)^2 (x - beta t)^n dx`
/// from the exact oracle; the integrand dies like `e^{-2(x - beta t)}`, so a
/// fixed window past the front suffices.
pub fn moment_integral_exact(
    oracle: &KdvResidualOracle,
    t: f64,
    s: usize,
    n: usize,
    beta: f64,
    window: f64,
    dx: f64,
) -> f64 {
    let x_lo = beta * t;
    let steps = (window / dx).ceil() as usize;
    let mut total = 0.0;
    for i in 0..=steps {
        let x = x_lo + i as f64 * dx;
        let z = oracle.z_derivatives(t, x, s)[s];
        let trapz = if i == 0 || i == steps { 0.5 } else { 1.0 };
        total += trapz * z * z * (x - x_lo).powi(n as i32);
    }
    total * dx
}

/// Sampled version on a snapshot grid.
pub fn moment_integral_sampled(z: &RealField, s: usize, n: usize, beta: f64, t: f64) -> f64 {
    let ds = if s == 0 { z.clone() } else { spectral_derivative(z, s) };
    let dx = z.grid.dx();
    let mut total = 0.0;
    for (i, x) in z.grid.points().enumerate() {
        if x >= beta * t {
            total += ds.values[i] * ds.values[i] * (x - beta * t).powi(n as i32);
        }
    }
    total * dx
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FunctionalSeries {
    pub id: String,
    pub s: usize,
    pub x0: f64,
    pub n: usize,
    pub samples: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ExpFit {
    /// Decay rate r in `C e^{-r t}` (positive = decaying).
    pub rate: f64,
    pub ln_amplitude: f64,
    pub r2: f64,
    pub n_used: usize,
}

/// Least-squares fit of `ln y = ln C - r t`, excluding samples below
/// `floor`.
pub fn fit_exponential(samples: &[(f64, f64)], floor: f64) -> Result<ExpFit> {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(_, v)| *v > floor && v.is_finite())
        .map(|&(t, v)| (t, v.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::WindowEmpty {
            got: pts.len(),
            need: 3,
        });
    }
    let (slope, intercept, r2) = linear_fit(&pts);
    Ok(ExpFit {
        rate: -slope,
        ln_amplitude: intercept,
        r2,
        n_used: pts.len(),
    })
}

fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let mean_y = sy / n;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for &(x, y) in pts {
        let pred = intercept + slope * x;
        ss_res += (y - pred) * (y - pred);
        ss_tot += (y - mean_y) * (y - mean_y);
    }
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    (slope, intercept, r2)
}

/// Moment series over a set of times with their fitted decay rates; the
/// reported `K_{s,n}` is the smallest constant with
/// `moment(t) <= K e^{-rate_fit t}` over the window.
pub struct MomentFit {
    pub series: FunctionalSeries,
    pub fit: ExpFit,
    pub k_constant: f64,
}

pub fn weighted_decay_series_exact(
    oracle: &KdvResidualOracle,
    times: &[f64],
    s_max: usize,
    n_max: usize,
    beta: f64,
    floor: f64,
) -> Result<Vec<MomentFit>> {
    if times.len() < 8 {
        return Err(Error::invalid("need >= 8 snapshot times for moment fits"));
    }
    let mut out = Vec::new();
    for s in 0..=s_max {
        for n in 0..=n_max {
            let samples: Vec<(f64, f64)> = times
                .iter()
                .map(|&t| (t, moment_integral_exact(oracle, t, s, n, beta, 60.0, 0.05)))
                .collect();
            let fit = fit_exponential(&samples, floor)?;
            let mut k = 0.0_f64;
            for &(t, v) in &samples {
                if v > floor {
                    k = k.max(v * (fit.rate * t).exp());
                }
            }
            out.push(MomentFit {
                series: FunctionalSeries {
                    id: "moment".into(),
                    s,
                    x0: 0.0,
                    n,
                    samples,
                },
                fit,
                k_constant: k,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flank {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Left,
    /// One flank of the 1-based soliton index: the window runs from the
    /// crest out to the midpoint toward the neighbouring crest (or
    /// unbounded on the outermost side); the amplitude band does the rest.
    Soliton(usize, Flank),
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecayModel {
    Exponential,
    Algebraic,
}

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    /// Amplitudes below this are quadrature/roundoff noise.
    pub floor: f64,
    /// Amplitudes above this are out of the tail regime.
    pub cap: f64,
    pub min_points: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            floor: 1e-12,
            cap: 1e-3,
            min_points: 8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayFitResult {
    pub region: String,
    pub s: usize,
    pub model: DecayModel,
    /// Exponential: |d ln y / dx|. Algebraic: exponent n in `y ~ (x - beta t)^-n`.
    pub rate: f64,
    pub x_lo: f64,
    pub x_hi: f64,
    pub r2: f64,
    pub floor: f64,
    pub cap: f64,
    pub n_points: usize,
}

/// Fit the spatial decay of `|d^s u|` inside one region at time `t`.
///
/// `magnitudes` must hold the |d^s u| samples (the caller picks the
/// derivative route: spectral for solver output, analytic jets for the
/// determinant oracle, whose tails stay meaningful far below the FFT
/// noise floor).
pub fn pointwise_decay_fit(
    magnitudes: &RealField,
    t: f64,
    params: &RateParams,
    speeds: &[f64],
    region: Region,
    s: usize,
    model: DecayModel,
    opts: &FitOptions,
) -> Result<DecayFitResult> {
    let region_name = match region {
        Region::Left => "left".to_string(),
        Region::Soliton(j, Flank::Left) => format!("soliton_{j}_left"),
        Region::Soliton(j, Flank::Right) => format!("soliton_{j}_right"),
        Region::Right => "right".to_string(),
    };
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for (i, x) in magnitudes.grid.points().enumerate() {
        let v = magnitudes.values[i].abs();
        if v < opts.floor || v > opts.cap {
            continue;
        }
        let inside = match region {
            Region::Left => x <= params.alpha * t,
            Region::Right => x > params.beta * t,
            Region::Soliton(j, flank) => {
                let center = speeds[j - 1] * t;
                match flank {
                    Flank::Left => {
                        let lo = if j == 1 {
                            f64::NEG_INFINITY
                        } else {
                            (speeds[j - 2] * t + center) / 2.0
                        };
                        x > lo && x < center
                    }
                    Flank::Right => {
                        let hi = if j == speeds.len() {
                            f64::INFINITY
                        } else {
                            (speeds[j] * t + center) / 2.0
                        };
                        x > center && x < hi
                    }
                }
            }
        };
        if !inside {
            continue;
        }
        let abscissa = match model {
            DecayModel::Exponential => x,
            DecayModel::Algebraic => {
                let d = x - params.beta * t;
                if d <= 0.0 {
                    continue;
                }
                d.ln()
            }
        };
        pts.push((abscissa, v.ln()));
    }
    if pts.len() < opts.min_points {
        return Err(Error::WindowEmpty {
            got: pts.len(),
            need: opts.min_points,
        });
    }
    let (slope, _, r2) = linear_fit(&pts);
    let (x_lo, x_hi) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.0), hi.max(p.0))
        });
    Ok(DecayFitResult {
        region: region_name,
        s,
        model,
        rate: slope.abs(),
        x_lo,
        x_hi,
        r2,
        floor: opts.floor,
        cap: opts.cap,
        n_points: pts.len(),
    })
}

/// Soliton interaction integral
/// `int |d^s R(t,x)| e^{sqrt(eta)(x - beta t)} dx` for gKdV, or the radial
/// `e^{sqrt(eta)(|x| - beta t)}` variant for NLS (envelope only; phases have
/// modulus one and derivatives of the envelope bound the integrand up to a
/// (1 + |v|/2)^s factor which the caller can apply).
pub enum InteractionProfile {
    Gkdv(SolitonParams),
    Nls(NlsSolitonParams),
}

pub fn interaction_integral(
    profile: &InteractionProfile,
    s: usize,
    eta: f64,
    beta: f64,
    t: f64,
) -> Result<f64> {
    let (prof, center, rate_limit, speed_limit) = match profile {
        InteractionProfile::Gkdv(p) => (p.profile(), p.center(t), p.c, p.c),
        InteractionProfile::Nls(p) => (p.profile(), p.center(t), p.omega, p.v.abs()),
    };
    if !(eta > 0.0) || eta >= rate_limit {
        return Err(Error::invalid(format!(
            "eta = {eta} must lie in (0, {rate_limit}) for the integral to converge"
        )));
    }
    if !(beta > speed_limit) {
        return Err(Error::invalid(format!(
            "beta = {beta} must exceed the wave speed {speed_limit}"
        )));
    }
    let radial = matches!(profile, InteractionProfile::Nls(_));
    let root_eta = eta.sqrt();
    let decay = prof.decay_rate(); // sqrt(c) resp. sqrt(omega)
    let table = crate::profiles::sech_poly_table(prof.gamma, s);

    // |d^s prof| has kinks at the derivative zeros, so a fixed-step rule
    // stalls at O(h^2); adaptive Simpson refines around them
    let weight = |x: f64| {
        let arg = if radial { x.abs() } else { x };
        (root_eta * (arg - beta * t)).exp()
    };
    let f = |x: f64| prof.derivative_with_table(&table, s, x - center).abs() * weight(x);

    // window past which the flanks are pure exponentials at 1e-15 relative;
    // radially the |x| weight can grow on the left flank too
    let w_right = 36.0 / (decay - root_eta);
    let w_left = if radial {
        36.0 / (decay - root_eta)
    } else {
        36.0 / (decay + root_eta)
    };
    let mut splits = vec![center - w_left, center, center + w_right];
    if radial && -w_left < -center && -center < w_right {
        splits.push(0.0); // |x| kink
        splits.sort_by(|a, b| a.partial_cmp(b).unwrap());
    }
    let mut total = 0.0;
    for pair in splits.windows(2) {
        total += adaptive_simpson(&f, pair[0], pair[1], 1e-12, 48);
    }

    // analytic tail completion beyond the window
    let a_right = f(center + w_right);
    let a_left = f(center - w_left);
    total += a_right / (decay - root_eta);
    total += a_left / (decay + root_eta);
    Ok(total)
}

/// Recursive adaptive Simpson with relative tolerance on each panel.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64, depth: usize) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, rel_tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    rel_tol: f64,
    depth: usize,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let err = left + right - whole;
    if depth == 0 || err.abs() <= 15.0 * rel_tol * (left + right).abs().max(1e-300) {
        return left + right + err / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, rel_tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, rel_tol, depth - 1)
}

/// Corrected H^s energy
/// `F_s(t) = int (d^s z)^2 dx - (2s+1)/3 p int (d^{s-1} z)^2 R^{p-1} dx`
/// from the exact residual oracle, quadrature over a window covering the
/// crest train.
pub fn fs_functional_exact(
    oracle: &KdvResidualOracle,
    times: &[f64],
    s: usize,
    p: u32,
) -> Result<FunctionalSeries> {
    if s < 1 {
        return Err(Error::invalid("F_s needs s >= 1"));
    }
    let params = oracle.asymptotic_params().to_vec();
    let c_lo = params.first().unwrap().c;
    let c_hi = params.last().unwrap().c;
    let mut samples = Vec::with_capacity(times.len());
    for &t in times {
        let x_lo = c_lo * t - 60.0;
        let x_hi = c_hi * t + 60.0;
        let dx = 0.02;
        let n = ((x_hi - x_lo) / dx).ceil() as usize;
        let mut quad = 0.0;
        for i in 0..=n {
            let x = x_lo + i as f64 * dx;
            let z = oracle.z_derivatives(t, x, s);
            let r: f64 = params
                .iter()
                .map(|q| q.profile().eval(x - q.center(t)))
                .sum();
            let trapz = if i == 0 || i == n { 0.5 } else { 1.0 };
            quad += trapz
                * (z[s] * z[s]
                    - (2.0 * s as f64 + 1.0) / 3.0
                        * p as f64
                        * z[s - 1]
                        * z[s - 1]
                        * r.powi(p as i32 - 1));
        }
        samples.push((t, quad * dx));
    }
    Ok(FunctionalSeries {
        id: format!("F_{s}"),
        s,
        x0: 0.0,
        n: 0,
        samples,
    })
}

/// Sampled F_s on a run: spectral derivatives of the sampled residual.
pub fn fs_functional(
    run: &RunRecord,
    params: &[SolitonParams],
    s: usize,
    p: u32,
) -> Result<FunctionalSeries> {
    if s < 1 {
        return Err(Error::invalid("F_s needs s >= 1"));
    }
    let mut samples = Vec::new();
    for t in run.times() {
        let u = run.real_at(t)?;
        let z = residual_real(u, params, t);
        let ds = spectral_derivative(&z, s);
        let dsm1 = spectral_derivative(&z, s - 1);
        let dx = u.grid.dx();
        let mut quad = 0.0;
        for (i, x) in u.grid.points().enumerate() {
            let r: f64 = params
                .iter()
                .map(|q| q.profile().eval(x - q.center(t)))
                .sum();
            quad += ds.values[i] * ds.values[i]
                - (2.0 * s as f64 + 1.0) / 3.0
                    * p as f64
                    * dsm1.values[i]
                    * dsm1.values[i]
                    * r.powi(p as i32 - 1);
        }
        samples.push((t, quad * dx));
    }
    Ok(FunctionalSeries {
        id: format!("F_{s}"),
        s,
        x0: 0.0,
        n: 0,
        samples,
    })
}

/// |d^s u| sampled from the determinant oracle (derivatives by jets), for
/// decay fits that need relative accuracy below the FFT noise floor.
pub fn kdv_derivative_magnitudes(
    spec: &crate::integrable::KdvNSolitonSpec,
    t: f64,
    grid: crate::grid::Grid1D,
    s: usize,
) -> Result<RealField> {
    let mut values = Vec::with_capacity(grid.n);
    for x in grid.points() {
        values.push(crate::integrable::kdv_derivatives(spec, t, x, s)?[s].abs());
    }
    RealField::new(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::integrable::KdvNSolitonSpec;

    fn spec14() -> KdvNSolitonSpec {
        KdvNSolitonSpec::new(vec![1.0, 4.0], vec![0.0, 0.0]).unwrap()
    }

    #[test]
    fn theta_reference_values() {
        assert!((theta(&[1.0, 4.0]).unwrap() - 1.0 / 32.0).abs() < 1e-15);
        assert!((theta(&[1.0]).unwrap() - 1.0 / 32.0).abs() < 1e-15);
        assert!((theta(&[0.25]).unwrap() - 0.00390625).abs() < 1e-15);
        assert!(theta(&[4.0, 1.0]).is_err());
    }

    #[test]
    fn kappa_reference_values() {
        let k = kappa_alpha_beta(&[1.0, 4.0], 0.5, 5.0).unwrap();
        assert!((k - 1.0 / 96.0).abs() < 1e-12, "{k}");
        let k1 = kappa_alpha_beta(&[1.0], 0.5, 2.0).unwrap();
        assert!((k1 - 0.03125).abs() < 1e-12, "{k1}");
        // min structure: never above sqrt(c_1)
        for (a, b) in [(0.1, 4.5), (0.9, 100.0)] {
            let k = kappa_alpha_beta(&[1.0, 4.0], a, b).unwrap();
            assert!(k <= 1.0);
            assert!(k > 0.0);
        }
        assert!(kappa_alpha_beta(&[1.0, 4.0], 1.5, 5.0).is_err());
    }

    #[test]
    fn rate_param_defaults_validate() {
        let p = RateParams::defaults_for(&[1.0, 4.0]).unwrap();
        assert!((p.alpha - 0.5).abs() < 1e-15);
        assert!((p.beta - 5.0).abs() < 1e-15);
        assert!((p.eta - 0.5).abs() < 1e-15);
        assert!(p.validate(&[1.0, 4.0]).is_ok());
        let mut bad = p;
        bad.alpha = 2.0;
        assert!(bad.validate(&[1.0, 4.0]).is_err());
    }

    #[test]
    fn residual_of_exact_sum_is_zero() {
        let g = make_grid(-100.0, 100.0, 1024).unwrap();
        let params = vec![SolitonParams::new(2, 1.0, 0.0).unwrap()];
        let u = crate::profiles::soliton_field(&params[0], 3.0, g);
        let z = residual_real(&u, &params, 3.0);
        assert!(z.max_abs() < 1e-14);
    }

    #[test]
    fn residual_h1_decreases_on_exact_run() {
        // u = exact 2-soliton, R = asymptotic solitons: ||z||_{H^1}
        // decreasing for t >= 5
        let spec = spec14();
        let oracle = KdvResidualOracle::new(&spec).unwrap();
        let g = make_grid(-100.0, 300.0, 2048).unwrap();
        let mut prev = f64::INFINITY;
        for t in [5.0, 6.5, 8.0] {
            let u = crate::integrable::kdv_nsoliton_field(&spec, t, g).unwrap();
            let z = residual_real(&u, oracle.asymptotic_params(), t);
            let h1 = crate::profiles::hs_norm_sq_complex(
                &crate::grid::ComplexField::new(
                    g,
                    z.values.iter().map(|&v| num_complex::Complex64::new(v, 0.0)).collect(),
                )
                .unwrap(),
                1,
            )
            .unwrap();
            assert!(h1 < prev, "t={t}: {h1} !< {prev}");
            prev = h1;
        }
    }

    #[test]
    fn j_functional_bounded_by_l2() {
        // phi <= 1: J <= ||d^s z||^2
        let g = make_grid(-60.0, 60.0, 512).unwrap();
        let z = RealField::sample(g, |x| (-x * x / 8.0).exp());
        let w = WeightFamily::right(0.5).unwrap();
        for s in 0..=2usize {
            let j = j_functional(&z, s, 0.0, 2.0, 1.0, &w, 0).unwrap();
            let ds = spectral_derivative(&z, s);
            let l2: f64 = ds.values.iter().map(|v| v * v).sum::<f64>() * g.dx();
            assert!(j <= l2 * (1.0 + 1e-12), "s={s}");
            assert!(j >= 0.0);
        }
        let zero = RealField::zeros(g);
        assert_eq!(j_functional(&zero, 0, 0.0, 2.0, 1.0, &w, 0).unwrap(), 0.0);
    }

    #[test]
    fn j_functional_nonincreasing_in_x0() {
        let g = make_grid(-60.0, 60.0, 512).unwrap();
        let z = RealField::sample(g, |x| (-(x - 3.0) * (x - 3.0) / 5.0).exp());
        let w = WeightFamily::right(0.5).unwrap();
        let mut prev = f64::INFINITY;
        for x0 in [0.0, 2.0, 5.0, 11.0] {
            let j = j_functional(&z, 0, x0, 2.0, 0.0, &w, 0).unwrap();
            assert!(j <= prev);
            prev = j;
        }
    }

    #[test]
    fn sampled_and_exact_j_agree_at_moderate_time() {
        let spec = spec14();
        let oracle = KdvResidualOracle::new(&spec).unwrap();
        let g = make_grid(-100.0, 300.0, 4096).unwrap();
        let w = WeightFamily::right(0.5).unwrap();
        let t = 6.0;
        let u = crate::integrable::kdv_nsoliton_field(&spec, t, g).unwrap();
        let z = residual_real(&u, oracle.asymptotic_params(), t);
        let sampled = j_functional(&z, 0, 0.0, 5.0, t, &w, 0).unwrap();
        let exact = j_functional_exact(&oracle, t, 0, 0.0, 5.0, &w, 0, -100.0, 300.0, g.dx())
            .unwrap();
        let rel = (sampled - exact).abs() / exact;
        assert!(rel < 0.05, "sampled {sampled:.6e} vs exact {exact:.6e}");
    }

    #[test]
    fn i_functional_zero_field_and_mass_bound() {
        use crate::solver::{FieldData, RunRecord, RunStatus, Snapshot, SolverConfig, Equation, Scheme};
        let g = make_grid(-100.0, 100.0, 512).unwrap();
        let spec = spec14();
        let field = crate::integrable::kdv_nsoliton_field(&spec, 10.0, g).unwrap();
        let run = RunRecord {
            config: SolverConfig {
                equation: Equation::Gkdv { p: 2 },
                scheme: Scheme::Etdrk4,
                dt: 1.0,
                t_start: 10.0,
                t_end: 10.0,
                snapshot_times: vec![10.0],
                dealias: true,
                comoving_velocity: 0.0,
                blowup_factor: 10.0,
            },
            snapshots: vec![Snapshot {
                t: 10.0,
                field: FieldData::Real(field.clone()),
            }],
            conservation: vec![],
            status: RunStatus::Completed,
            warnings: vec![],
        };
        let params = RateParams::defaults_for(&[1.0, 4.0]).unwrap();
        let i = i_functional(&run, 10.0, 10.0, 0.0, &params).unwrap();
        let mass: f64 = field.values.iter().map(|v| v * v).sum::<f64>() * g.dx();
        assert!(i > 0.0 && i <= mass);
        assert!(matches!(
            i_functional(&run, 11.0, 10.0, 0.0, &params),
            Err(Error::SnapshotNotFound { .. })
        ));
    }

    #[test]
    fn exp_fit_recovers_rate() {
        let samples: Vec<(f64, f64)> = (0..20)
            .map(|i| {
                let t = 1.0 + i as f64;
                (t, 3.0 * (-0.7 * t).exp())
            })
            .collect();
        let fit = fit_exponential(&samples, 1e-300).unwrap();
        assert!((fit.rate - 0.7).abs() < 1e-9);
        assert!(fit.r2 > 0.999999);
    }

    #[test]
    fn decay_fit_single_soliton_self_calibration() {
        // pure single soliton recovers sqrt(c) within 2% at any t
        let params = RateParams {
            alpha: 0.5,
            beta: 2.0,
            eta: 0.5,
            kappa_alpha: 0.17,
            kappa: 0.34,
            delta: 0.19,
        };
        for (c, t) in [(1.0, 7.0), (2.25, 4.0)] {
            let spec = KdvNSolitonSpec::new(vec![c], vec![0.0]).unwrap();
            let g = make_grid(-120.0, 120.0, 4096).unwrap();
            let mags = kdv_derivative_magnitudes(&spec, t, g, 0).unwrap();
            for flank in [Flank::Left, Flank::Right] {
                let fit = pointwise_decay_fit(
                    &mags,
                    t,
                    &params,
                    &[c],
                    Region::Soliton(1, flank),
                    0,
                    DecayModel::Exponential,
                    &FitOptions::default(),
                )
                .unwrap();
                let rel = (fit.rate - c.sqrt()).abs() / c.sqrt();
                assert!(rel < 0.02, "c={c} {flank:?}: rate {} vs {}", fit.rate, c.sqrt());
            }
        }
    }

    #[test]
    fn decay_fit_window_empty_reports() {
        let g = make_grid(-50.0, 50.0, 256).unwrap();
        let mags = RealField::zeros(g);
        let params = RateParams::defaults_for(&[1.0]).unwrap();
        assert!(matches!(
            pointwise_decay_fit(
                &mags,
                5.0,
                &params,
                &[1.0],
                Region::Left,
                0,
                DecayModel::Exponential,
                &FitOptions::default()
            ),
            Err(Error::WindowEmpty { .. })
        ));
    }

    #[test]
    fn interaction_integral_reference_value() {
        // frozen 40-digit quadrature of int (3/2) sech^2(x/2) e^{x/sqrt(2)} dx
        let p = SolitonParams::new(2, 1.0, 0.0).unwrap();
        let v = interaction_integral(&InteractionProfile::Gkdv(p), 0, 0.5, 2.0, 0.0).unwrap();
        let expect = 16.750989939612708;
        assert!((v - expect).abs() / expect < 1e-10, "{v}");
    }

    #[test]
    fn interaction_integral_decreasing_in_t() {
        let p = SolitonParams::new(2, 1.0, 0.0).unwrap();
        let prof = InteractionProfile::Gkdv(p);
        let mut prev = f64::INFINITY;
        for i in 0..=10 {
            let t = 2.0 * i as f64;
            let v = interaction_integral(&prof, 0, 0.5, 2.0, t).unwrap();
            assert!(v <= prev * (1.0 + 1e-12), "t={t}");
            prev = v;
        }
        // sup over t equals the value at t=0
        let v0 = interaction_integral(&prof, 0, 0.5, 2.0, 0.0).unwrap();
        assert!(prev <= v0);
    }

    #[test]
    fn interaction_integral_parameter_guards() {
        let p = SolitonParams::new(2, 1.0, 0.0).unwrap();
        assert!(interaction_integral(&InteractionProfile::Gkdv(p), 0, 1.5, 2.0, 0.0).is_err());
        assert!(interaction_integral(&InteractionProfile::Gkdv(p), 0, 0.5, 0.5, 0.0).is_err());
    }

    #[test]
    fn fs_zero_residual_is_zero() {
        // a run whose snapshots equal the soliton sum exactly
        use crate::solver::{FieldData, RunRecord, RunStatus, Snapshot, SolverConfig, Equation, Scheme};
        let g = make_grid(-100.0, 100.0, 1024).unwrap();
        let params = vec![SolitonParams::new(2, 1.0, 0.0).unwrap()];
        let mk = |t: f64| Snapshot {
            t,
            field: FieldData::Real(crate::profiles::soliton_field(&params[0], t, g)),
        };
        let run = RunRecord {
            config: SolverConfig {
                equation: Equation::Gkdv { p: 2 },
                scheme: Scheme::Etdrk4,
                dt: 1.0,
                t_start: 0.0,
                t_end: 2.0,
                snapshot_times: vec![0.0, 1.0, 2.0],
                dealias: true,
                comoving_velocity: 0.0,
                blowup_factor: 10.0,
            },
            snapshots: vec![mk(0.0), mk(1.0), mk(2.0)],
            conservation: vec![],
            status: RunStatus::Completed,
            warnings: vec![],
        };
        let series = fs_functional(&run, &params, 2, 2).unwrap();
        for (_, v) in series.samples {
            assert!(v.abs() < 1e-12, "{v}");
        }
    }

    #[test]
    fn moment_integrals_sampled_vs_exact_at_moderate_time() {
        let spec = spec14();
        let oracle = KdvResidualOracle::new(&spec).unwrap();
        let g = make_grid(-100.0, 300.0, 4096).unwrap();
        let t = 6.0;
        let u = crate::integrable::kdv_nsoliton_field(&spec, t, g).unwrap();
        let z = residual_real(&u, oracle.asymptotic_params(), t);
        for (s, n) in [(0usize, 0usize), (0, 2), (1, 1)] {
            let sampled = moment_integral_sampled(&z, s, n, 5.0, t);
            let exact = moment_integral_exact(&oracle, t, s, n, 5.0, 60.0, 0.02);
            let rel = (sampled - exact).abs() / exact.abs().max(1e-300);
            // the sampled route quantizes the x >= beta t cutoff to the
            // grid, good to ~dx * decay_rate relative
            assert!(rel < 0.25, "s={s} n={n}: {sampled:.6e} vs {exact:.6e}");
        }
    }
}
