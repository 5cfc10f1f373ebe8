//! Ground states and traveling waves for gKdV and NLS, with their
//! derivatives and H^s norms.
//!
//! The gKdV ground state solves `Q'' + Q^p = Q`:
//!
//!   Q(x) = ( (p+1) / (2 cosh^2((p-1)x/2)) )^{1/(p-1)}
//!
//! and scales as `Q_c(x) = c^{1/(p-1)} Q(sqrt(c) x)`. The 1-D NLS ground
//! state for `Q'' + Q^p = w Q` is the same sech power with amplitude
//! `(w(p+1)/2)^{1/(p-1)}` and width `(p-1) sqrt(w)/2`.
//!
//! Derivatives come in two flavors: spectral (Fourier multiplier on a
//! sampled profile) and closed form. Closed-form derivatives use
//! `Q^(s)(x) = amp * b^s * sech^g(bx) * P_s(tanh(bx))` where the
//! polynomials P_s satisfy `P_{s+1} = (1 - T^2) P_s' - g T P_s`; they stay
//! at roundoff accuracy for derivative orders where the `k^s` amplification
//! of FFT noise would dominate a spectral evaluation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid1D, RealField};
use crate::jet::{factorial, Jet};
use crate::spectral::{check_resolution, spectral_derivative, spectral_derivative_filtered};
use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolitonParams {
    /// Integer nonlinearity exponent, p >= 2.
    pub p: u32,
    /// Speed, c > 0.
    pub c: f64,
    /// Center position at t = 0.
    pub x0: f64,
}

impl SolitonParams {
    pub fn new(p: u32, c: f64, x0: f64) -> Result<Self> {
        if p < 2 {
            return Err(Error::invalid(format!("p = {p} must be >= 2")));
        }
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::invalid(format!("speed c = {c} must be positive")));
        }
        Ok(SolitonParams { p, c, x0 })
    }

    pub fn profile(&self) -> SechProfile {
        SechProfile::gkdv(self.p, self.c)
    }

    pub fn center(&self, t: f64) -> f64 {
        self.c * t + self.x0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NlsSolitonParams {
    /// Real exponent p > 1 (odd integer for full-regularity runs).
    pub p: f64,
    /// Frequency, omega > 0.
    pub omega: f64,
    /// Velocity.
    pub v: f64,
    /// Phase.
    pub gamma: f64,
    /// Center position at t = 0.
    pub x0: f64,
}

impl NlsSolitonParams {
    pub fn new(p: f64, omega: f64, v: f64, gamma: f64, x0: f64) -> Result<Self> {
        if !(p > 1.0) {
            return Err(Error::invalid(format!("NLS exponent p = {p} must be > 1")));
        }
        if !(omega > 0.0) {
            return Err(Error::invalid(format!("omega = {omega} must be positive")));
        }
        Ok(NlsSolitonParams { p, omega, v, gamma, x0 })
    }

    pub fn profile(&self) -> SechProfile {
        SechProfile::nls(self.p, self.omega)
    }

    pub fn center(&self, t: f64) -> f64 {
        self.x0 + self.v * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EquationKind {
    Gkdv,
    Nls,
}

/// Which stationary problem a profile solves, with its scale parameter
/// (`c` for gKdV, `omega` for NLS).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundStateSpec {
    pub equation: EquationKind,
    pub p: f64,
    pub scale: f64,
}

impl GroundStateSpec {
    pub fn new(equation: EquationKind, p: f64, scale: f64) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(Error::invalid(format!("scale = {scale} must be positive")));
        }
        let min_p = match equation {
            EquationKind::Gkdv => 2.0,
            EquationKind::Nls => 1.0,
        };
        if !(p > min_p) && !(equation == EquationKind::Gkdv && p >= 2.0) {
            return Err(Error::invalid(format!("exponent p = {p} out of range")));
        }
        Ok(GroundStateSpec { equation, p, scale })
    }

    pub fn profile(&self) -> SechProfile {
        match self.equation {
            EquationKind::Gkdv => SechProfile::gkdv(self.p as u32, self.scale),
            EquationKind::Nls => SechProfile::nls(self.p, self.scale),
        }
    }
}

/// `amp * sech^gamma(b x)` together with exact derivatives of any order.
#[derive(Debug, Clone)]
pub struct SechProfile {
    pub amp: f64,
    pub b: f64,
    pub gamma: f64,
    /// Exponent of the defining ODE `Q'' + Q^p = scale * Q`.
    pub p: f64,
    pub scale: f64,
}

impl SechProfile {
    pub fn gkdv(p: u32, c: f64) -> Self {
        let pf = p as f64;
        let amp = (c * (pf + 1.0) / 2.0).powf(1.0 / (pf - 1.0));
        let b = (pf - 1.0) * c.sqrt() / 2.0;
        SechProfile { amp, b, gamma: 2.0 / (pf - 1.0), p: pf, scale: c }
    }

    pub fn nls(p: f64, omega: f64) -> Self {
        let amp = (omega * (p + 1.0) / 2.0).powf(1.0 / (p - 1.0));
        let b = (p - 1.0) * omega.sqrt() / 2.0;
        SechProfile { amp, b, gamma: 2.0 / (p - 1.0), p, scale: omega }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.amp * sech(self.b * x).powf(self.gamma)
    }

    /// Exponential decay rate of the tails, `sqrt(scale)`.
    pub fn decay_rate(&self) -> f64 {
        self.b * self.gamma
    }

    /// Closed-form s-th derivative at one point.
    pub fn derivative(&self, s: usize, x: f64) -> f64 {
        let table = sech_poly_table(self.gamma, s);
        self.derivative_with_table(&table, s, x)
    }

    /// Same, reusing a precomputed polynomial table (see [`sech_poly_table`]).
    pub fn derivative_with_table(&self, table: &[Vec<f64>], s: usize, x: f64) -> f64 {
        let y = self.b * x;
        let sh = sech(y);
        let t = y.tanh();
        self.amp * self.b.powi(s as i32) * sh.powf(self.gamma) * poly_eval(&table[s], t)
    }

    /// All derivatives 0..=s_max at one point.
    pub fn derivatives(&self, s_max: usize, x: f64) -> Vec<f64> {
        let table = sech_poly_table(self.gamma, s_max);
        (0..=s_max)
            .map(|s| self.derivative_with_table(&table, s, x))
            .collect()
    }

    /// Taylor jet of the profile at `x`, seeded from the closed form for the
    /// value and slope and propagated through the ODE
    /// `Q'' = scale * Q - Q^p`. Independent of the polynomial route; used as
    /// a cross-check oracle.
    pub fn ode_jet(&self, x: f64, order: usize) -> Jet {
        let q0 = self.eval(x);
        let q1 = self.derivative(1, x);
        let mut c = vec![0.0; order + 1];
        c[0] = q0;
        if order >= 1 {
            c[1] = q1;
        }
        for k in 0..order.saturating_sub(1) {
            // q^(k+2): from jet coefficients of scale*q - q^p up to order k
            let partial = Jet { c: c[..=k + 1].to_vec() };
            let qp = jet_pow(&partial, self.p);
            let rhs = self.scale * c[k] - qp.c[k];
            c[k + 2] = rhs / ((k + 1) as f64 * (k + 2) as f64);
        }
        Jet { c }
    }
}

pub fn sech(x: f64) -> f64 {
    1.0 / x.cosh()
}

/// `q^p` for a jet with positive leading value, via exp(p ln q).
fn jet_pow(q: &Jet, p: f64) -> Jet {
    if (p - p.round()).abs() < 1e-12 && p >= 1.0 {
        // integer powers by repeated multiplication: exact for small p
        let n = p.round() as usize;
        let mut out = q.clone();
        for _ in 1..n {
            out = out.mul(q);
        }
        return out;
    }
    q.ln().scale(p).exp()
}

/// P_s(T) coefficient tables for `d^s/dx^s sech^g(x) = sech^g(x) P_s(tanh x)`.
pub fn sech_poly_table(gamma: f64, s_max: usize) -> Vec<Vec<f64>> {
    let mut table: Vec<Vec<f64>> = Vec::with_capacity(s_max + 1);
    table.push(vec![1.0]);
    for s in 0..s_max {
        let prev = &table[s];
        let mut next = vec![0.0; prev.len() + 1];
        for (j, &a) in prev.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            // (1 - T^2) P' term
            if j >= 1 {
                next[j - 1] += j as f64 * a;
            }
            next[j + 1] -= j as f64 * a;
            // -gamma T P term
            next[j + 1] -= gamma * a;
        }
        table.push(next);
    }
    table
}

fn poly_eval(coeffs: &[f64], t: f64) -> f64 {
    let mut acc = 0.0;
    for &c in coeffs.iter().rev() {
        acc = acc * t + c;
    }
    acc
}

/// gKdV ground state `Q(x)`, p >= 2.
pub fn ground_state(p: u32, x: f64) -> Result<f64> {
    if p < 2 {
        return Err(Error::invalid(format!("p = {p} must be >= 2")));
    }
    Ok(SechProfile::gkdv(p, 1.0).eval(x))
}

/// Scaled ground state `Q_c(x) = c^{1/(p-1)} Q(sqrt(c) x)`.
pub fn ground_state_scaled(p: u32, c: f64, x: f64) -> Result<f64> {
    if p < 2 {
        return Err(Error::invalid(format!("p = {p} must be >= 2")));
    }
    if !(c > 0.0) {
        return Err(Error::invalid(format!("c = {c} must be positive")));
    }
    Ok(SechProfile::gkdv(p, c).eval(x))
}

/// Sampled traveling wave `R_{c,x0}(t, x) = Q_c(x - c t - x0)`.
pub fn soliton_field(params: &SolitonParams, t: f64, grid: Grid1D) -> RealField {
    let profile = params.profile();
    let center = params.center(t);
    RealField::sample(grid, |x| profile.eval(x - center))
}

/// s-th spatial derivative of the sampled soliton, by spectral
/// differentiation. Fails when the grid cannot resolve the profile.
pub fn soliton_derivative(
    params: &SolitonParams,
    t: f64,
    grid: Grid1D,
    s: usize,
) -> Result<RealField> {
    let field = soliton_field(params, t, grid);
    check_resolution(&field)?;
    Ok(spectral_derivative(&field, s))
}

/// Closed-form s-th derivative of the traveling wave at one point.
pub fn soliton_derivative_analytic(params: &SolitonParams, t: f64, x: f64, s: usize) -> f64 {
    params.profile().derivative(s, x - params.center(t))
}

/// 1-D NLS ground state `Q_omega(x)`.
pub fn nls_ground_state(p: f64, omega: f64, x: f64) -> Result<f64> {
    if !(p > 1.0) {
        return Err(Error::invalid(format!("p = {p} must be > 1")));
    }
    if !(omega > 0.0) {
        return Err(Error::invalid(format!("omega = {omega} must be positive")));
    }
    Ok(SechProfile::nls(p, omega).eval(x))
}

/// Boosted, phase-modulated NLS soliton
/// `Q_omega(x - x0 - v t) exp(i(v x / 2 + (omega - v^2/4) t + gamma))`.
pub fn nls_soliton_field(params: &NlsSolitonParams, t: f64, grid: Grid1D) -> ComplexField {
    let profile = params.profile();
    let center = params.center(t);
    let phase_t = (params.omega - params.v * params.v / 4.0) * t + params.gamma;
    ComplexField::sample(grid, |x| {
        let env = profile.eval(x - center);
        let phase = 0.5 * params.v * x + phase_t;
        Complex64::from_polar(env, phase)
    })
}

/// Squared Sobolev norm `sum_{j=0..s} ||d^j f||_L2^2` on the periodic grid.
///
/// Derivatives are spectral with the sub-roundoff modes zeroed (see
/// [`spectral_derivative_filtered`]); without the filter, orders above ~5
/// are dominated by `k^s`-amplified FFT noise.
pub fn hs_norm_sq(field: &RealField, s: usize) -> Result<f64> {
    check_resolution(field)?;
    let dx = field.grid.dx();
    let mut total = 0.0;
    for j in 0..=s {
        let d = spectral_derivative_filtered(field, j);
        total += d.values.iter().map(|v| v * v).sum::<f64>() * dx;
    }
    Ok(total)
}

pub fn hs_norm(field: &RealField, s: usize) -> Result<f64> {
    Ok(hs_norm_sq(field, s)?.sqrt())
}

pub fn hs_norm_sq_complex(field: &ComplexField, s: usize) -> Result<f64> {
    let dx = field.grid.dx();
    let mut total = 0.0;
    for j in 0..=s {
        let d = crate::spectral::spectral_derivative_complex(field, j);
        total += d.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * dx;
    }
    Ok(total)
}

/// Max pointwise residual of the derivative induction formula
///
///   Q^(s+2) = Q^(s) - sum_{i1+..+ip = s} multinomial(s; i) Q^(i1) .. Q^(ip)
///
/// with every factor evaluated in closed form on the grid. A spectral check
/// of the sampled top derivative guards against inadequate grids.
pub fn hs_recursion_residual(p: u32, s: usize, grid: Grid1D) -> Result<f64> {
    if p < 2 {
        return Err(Error::invalid(format!("p = {p} must be >= 2")));
    }
    let profile = SechProfile::gkdv(p, 1.0);
    let table = sech_poly_table(profile.gamma, s + 2);
    let n = grid.n;
    // derivs[j][i] = Q^(j)(x_i)
    let mut derivs: Vec<Vec<f64>> = Vec::with_capacity(s + 3);
    for j in 0..=s + 2 {
        derivs.push(
            grid.points()
                .map(|x| profile.derivative_with_table(&table, j, x))
                .collect(),
        );
    }
    check_resolution(&RealField::new(grid, derivs[s + 2].clone())?)?;

    let mut residual = vec![0.0; n];
    for i in 0..n {
        residual[i] = derivs[s + 2][i] - derivs[s][i];
    }
    for comp in compositions(s, p as usize) {
        let coef = multinomial(s, &comp);
        for i in 0..n {
            let mut term = coef;
            for &ij in &comp {
                term *= derivs[ij][i];
            }
            residual[i] += term;
        }
    }
    Ok(residual.iter().fold(0.0, |m, v| m.max(v.abs())))
}

/// Ratios `||Q||_{H^{s+2}} / (p^s ||Q||_{H^s}^p)` for s = 0..=s_max; the
/// induction bound says these stay below a single constant.
pub fn hs_growth_ratios(p: u32, s_max: usize, grid: Grid1D) -> Result<Vec<f64>> {
    let field = RealField::sample(grid, |x| SechProfile::gkdv(p, 1.0).eval(x));
    let mut norms = Vec::with_capacity(s_max + 3);
    for s in 0..=s_max + 2 {
        norms.push(hs_norm(&field, s)?);
    }
    Ok((0..=s_max)
        .map(|s| norms[s + 2] / ((p as f64).powi(s as i32) * norms[s].powi(p as i32)))
        .collect())
}

/// All compositions of `s` into `parts` nonnegative integers.
pub fn compositions(s: usize, parts: usize) -> Vec<Vec<usize>> {
    fn rec(s: usize, parts: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            prefix.push(s);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for i in 0..=s {
            prefix.push(i);
            rec(s - i, parts - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(s, parts, &mut Vec::new(), &mut out);
    out
}

pub fn multinomial(s: usize, parts: &[usize]) -> f64 {
    let mut v = factorial(s);
    for &i in parts {
        v /= factorial(i);
    }
    v
}
