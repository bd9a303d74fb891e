//! Closed-form two-port channel.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{check_lambda, Error, Result};
use crate::fock::{self, chi_unchecked, coherent_ket, Cutoff, DensityOperator, FockOperator};
use crate::linalg::CMatrix;

/// Tolerance for the internal m-series; far below anything the callers compare at.
pub(crate) const SERIES_TOL: f64 = 1e-17;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelParams {
    pub lambda_x: f64,
    pub lambda_y: f64,
    pub ports: usize,
}

impl ChannelParams {
    pub fn new(lambda_x: f64, lambda_y: f64, ports: usize) -> Result<Self> {
        check_lambda("lambda_x", lambda_x)?;
        check_lambda("lambda_y", lambda_y)?;
        if lambda_y == 0.0 {
            return Err(Error::Domain("lambda_y = 0 makes the measurement degenerate".into()));
        }
        if ports < 2 {
            return Err(Error::Domain(format!("need at least 2 ports, got {ports}")));
        }
        Ok(ChannelParams { lambda_x, lambda_y, ports })
    }

    pub fn two_port(lambda_x: f64, lambda_y: f64) -> Result<Self> {
        ChannelParams::new(lambda_x, lambda_y, 2)
    }

    pub fn tau(&self) -> f64 {
        (self.lambda_x * self.lambda_y).powi(2)
    }

    pub fn g(&self) -> f64 {
        (1.0 - self.lambda_x.powi(2)) * (1.0 - self.lambda_y.powi(2))
    }

    fn require_two_port(&self) -> Result<()> {
        if self.ports != 2 {
            return Err(Error::Invalid(format!("two-port formula called with {} ports", self.ports)));
        }
        Ok(())
    }
}

/// (1 - chi_{y,m}^2)^{-1/2}
pub fn measurement_weight(lambda_y: f64, m: usize) -> f64 {
    let c = chi_unchecked(lambda_y, m);
    // 1 - chi computed without cancellation at m = 0
    let one_minus = if m == 0 { lambda_y * lambda_y } else { 1.0 - c };
    1.0 / (one_minus * (1.0 + c)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedScalars {
    pub tau: f64,
    pub g: f64,
    pub omega: f64,
    pub omega_tail: f64,
}

/// Omega = sum_m chi_{x,m} (1 - chi_{y,m}^2)^{-1/2}, with a bound on the dropped tail.
pub fn omega(params: &ChannelParams, tol: f64) -> Result<(f64, f64)> {
    if params.lambda_y == 0.0 {
        return Err(Error::Domain("Omega diverges at lambda_y = 0".into()));
    }
    check_series_tol(tol)?;
    let (lx, ly) = (params.lambda_x, params.lambda_y);
    let mut sum = 0.0;
    let mut m = 0usize;
    loop {
        sum += chi_unchecked(lx, m) * measurement_weight(ly, m);
        let k = m + 1;
        let tail = measurement_weight(ly, k) * lx.powi(2 * k as i32);
        if tail < tol {
            return Ok((sum, tail));
        }
        m = k;
    }
}

/// S_1 = sum_m m chi_{x,m} (1 - chi_{y,m}^2)^{-1/2}, with a tail bound.
pub fn s1(params: &ChannelParams, tol: f64) -> Result<(f64, f64)> {
    check_series_tol(tol)?;
    let (lx, ly) = (params.lambda_x, params.lambda_y);
    let l2 = lx * lx;
    let mut sum = 0.0;
    let mut m = 0usize;
    loop {
        sum += m as f64 * chi_unchecked(lx, m) * measurement_weight(ly, m);
        let k = m + 1;
        let tail = measurement_weight(ly, k) * l2.powi(k as i32) * (k as f64 + l2 / (1.0 - l2));
        if tail < tol {
            return Ok((sum, tail));
        }
        m = k;
    }
}

fn check_series_tol(tol: f64) -> Result<()> {
    if tol.is_finite() && tol > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("series tolerance {tol} must be positive")))
    }
}

pub fn derived_scalars(params: &ChannelParams, tol: f64) -> Result<DerivedScalars> {
    let (omega, omega_tail) = omega(params, tol)?;
    Ok(DerivedScalars { tau: params.tau(), g: params.g(), omega, omega_tail })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    Positive,
    Negative,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Regime::Positive => write!(f, "positive"),
            Regime::Negative => write!(f, "negative"),
        }
    }
}

/// Positive iff (1 - lambda_y^2)^{-2} - 1 >= (1 - lambda_x^2)^2.
pub fn regime(params: &ChannelParams) -> Regime {
    let lhs = (1.0 - params.lambda_y.powi(2)).powi(-2) - 1.0;
    let rhs = (1.0 - params.lambda_x.powi(2)).powi(2);
    if lhs >= rhs {
        Regime::Positive
    } else {
        Regime::Negative
    }
}

/// Upper bound on 1 - Tr E[|a><a|] at this cutoff.
pub fn number_element_tail(params: &ChannelParams, cutoff: Cutoff) -> f64 {
    params.lambda_x.powi(2 * cutoff.levels() as i32)
}

/// E[|a><b|] for the two-port channel.
pub fn apply_number_element(a: usize, b: usize, params: &ChannelParams, cutoff: Cutoff) -> Result<FockOperator> {
    params.require_two_port()?;
    let d = cutoff.levels();
    for i in [a, b] {
        if i >= d {
            return Err(Error::Index { index: i, levels: d });
        }
    }
    let sc = derived_scalars(params, SERIES_TOL)?;
    let damp = (params.lambda_x * params.lambda_y).powi((a + b) as i32);
    let mut m = CMatrix::zeros(d, d);
    if a != b {
        m[(a, b)] = Complex64::new(sc.g * sc.omega * damp, 0.0);
        return FockOperator::new(m, 1, cutoff);
    }
    for (k, v) in number_diagonal(a, params, &sc, d).into_iter().enumerate() {
        m[(k, k)] = Complex64::new(v, 0.0);
    }
    FockOperator::new(m, 1, cutoff)?.mark_hermitian()
}

/// Diagonal of E[|a><a|]; the |a><a| weight combines chi_{x,a+m} lambda_x^{-a} terms
/// into lambda_x^{2a+2m} so nothing is raised to a negative power.
fn number_diagonal(a: usize, params: &ChannelParams, sc: &DerivedScalars, d: usize) -> Vec<f64> {
    let (lx, ly) = (params.lambda_x, params.lambda_y);
    let damp = sc.tau.powi(a as i32);
    let mut diag: Vec<f64> = (0..d)
        .map(|m| chi_unchecked(lx, m) * (1.0 - sc.g * damp * measurement_weight(ly, m)))
        .collect();
    if a < d {
        diag[a] += sc.g * damp * sc.omega;
    }
    diag
}

/// Output for a coherent input |alpha>.
pub fn apply_coherent(alpha: Complex64, params: &ChannelParams, cutoff: Cutoff) -> Result<DensityOperator> {
    params.require_two_port()?;
    if !(alpha.re.is_finite() && alpha.im.is_finite()) {
        return Err(Error::Domain("coherent amplitude is not finite".into()));
    }
    let sc = derived_scalars(params, SERIES_TOL)?;
    let u = alpha.norm_sqr();
    let decay = (-(1.0 - sc.tau) * u).exp();
    let weight = decay * sc.g * sc.omega;
    let beta = alpha * sc.tau.sqrt();
    let ket = coherent_ket(beta, cutoff);
    let amps = ket.amplitudes();
    let d = cutoff.levels();
    let mut m = CMatrix::from_fn(d, d, |i, j| amps[i] * amps[j].conj() * weight);
    for k in 0..d {
        let c = chi_unchecked(params.lambda_x, k) * (1.0 - decay * sc.g * measurement_weight(params.lambda_y, k));
        m[(k, k)] += Complex64::new(c, 0.0);
    }
    symmetrize(&mut m);
    let deficit = weight * fock::poisson_tail(beta.norm_sqr(), d) + number_element_tail(params, cutoff) + sc.omega_tail;
    DensityOperator::from_parts(FockOperator::new(m, 1, cutoff)?, deficit)
}

pub(crate) fn symmetrize(m: &mut CMatrix) {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)].im = 0.0;
        for j in (i + 1)..n {
            let z = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
}

/// Linear extension of E over the number basis.
pub fn apply_state(rho_in: &DensityOperator, params: &ChannelParams, cutoff: Cutoff) -> Result<DensityOperator> {
    params.require_two_port()?;
    let input = rho_in.op();
    let (out, deficit) = apply_operator(input, params, cutoff)?;
    DensityOperator::from_parts(out, rho_in.trace_deficit() + deficit)
}

/// E applied to an arbitrary single-mode operator (not necessarily a state).
/// Returns the output and the truncation tail relative to the input trace.
pub fn apply_operator(input: &FockOperator, params: &ChannelParams, cutoff: Cutoff) -> Result<(FockOperator, f64)> {
    params.require_two_port()?;
    if input.modes() != 1 {
        return Err(Error::Invalid("two-port channel acts on a single mode".into()));
    }
    let din = input.cutoff().levels();
    let d = cutoff.levels();
    if din > d {
        return Err(Error::Invalid(format!("input has {din} levels, output cutoff only {d}")));
    }
    let sc = derived_scalars(params, SERIES_TOL)?;
    let rate = params.lambda_x * params.lambda_y;
    let mut m = CMatrix::zeros(d, d);
    for a in 0..din {
        for b in 0..din {
            if a != b {
                m[(a, b)] = input.get(a, b) * (sc.g * sc.omega * rate.powi((a + b) as i32));
            }
        }
        let w = input.get(a, a);
        if w.norm() != 0.0 {
            for (k, v) in number_diagonal(a, params, &sc, d).into_iter().enumerate() {
                m[(k, k)] += w * v;
            }
        }
    }
    let mut op = FockOperator::new(m, 1, cutoff)?;
    if input.is_hermitian_flagged() {
        op = op.mark_hermitian()?;
    }
    Ok((op, number_element_tail(params, cutoff)))
}

/// Mean photon number of the output for a coherent input with |alpha|^2 = u.
pub fn output_energy(u: f64, params: &ChannelParams) -> Result<f64> {
    params.require_two_port()?;
    if !(u.is_finite() && u >= 0.0) {
        return Err(Error::Domain(format!("input energy {u} must be nonnegative")));
    }
    let sc = derived_scalars(params, SERIES_TOL)?;
    let (s1, _) = s1(params, SERIES_TOL)?;
    let l2 = params.lambda_x.powi(2);
    Ok((-(1.0 - sc.tau) * u).exp() * sc.g * (sc.tau * sc.omega * u - s1) + l2 / (1.0 - l2))
}

/// Input energy u* at which `output_energy` peaks; None when lambda_x = 0.
pub fn argmax_output_energy(params: &ChannelParams) -> Result<Option<f64>> {
    params.require_two_port()?;
    let tau = params.tau();
    if tau == 0.0 {
        return Ok(None);
    }
    let (om, _) = omega(params, SERIES_TOL)?;
    let (s1, _) = s1(params, SERIES_TOL)?;
    Ok(Some(1.0 / (1.0 - tau) + s1 / (tau * om)))
}

/// Largest output energy over all inputs.
pub fn max_output_energy(params: &ChannelParams) -> Result<f64> {
    params.require_two_port()?;
    let tau = params.tau();
    if tau == 0.0 {
        return Ok(0.0);
    }
    let sc = derived_scalars(params, SERIES_TOL)?;
    let (s1, _) = s1(params, SERIES_TOL)?;
    let l2 = params.lambda_x.powi(2);
    let peak = tau * sc.g * sc.omega / (1.0 - tau) * (-(1.0 + (1.0 - tau) * s1 / (tau * sc.omega))).exp();
    Ok(peak + l2 / (1.0 - l2))
}
