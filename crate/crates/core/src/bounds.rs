//! Comparison channels and distance bounds for the two-port channel.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{check_lambda, Error, Result};
use crate::fock::{self, chi_unchecked, coherent_ket, Cutoff, DensityOperator, FockOperator};
use crate::linalg::CMatrix;
use crate::two_port::{self, measurement_weight, regime, symmetrize, ChannelParams, Regime, SERIES_TOL};

/// Scan limit for m_c.
pub const MC_SCAN_CAP: usize = 10_000;

/// Distance of T(u) from its asymptote beyond which the envelope grid stops.
pub const ENVELOPE_ASYMPTOTE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossyChannel {
    pub tau: f64,
}

impl LossyChannel {
    pub fn new(tau: f64) -> Result<Self> {
        if tau.is_finite() && (0.0..=1.0).contains(&tau) {
            Ok(LossyChannel { tau })
        } else {
            Err(Error::Domain(format!("transmissivity {tau} must lie in [0, 1]")))
        }
    }

    /// Loss matched to the teleportation channel, tau = lambda_x^2 lambda_y^2.
    pub fn matched(params: &ChannelParams) -> Self {
        LossyChannel { tau: params.tau() }
    }
}

/// Pure-loss output |sqrt(tau) alpha><sqrt(tau) alpha|.
pub fn lossy_apply(alpha: Complex64, tau: f64, cutoff: Cutoff) -> Result<DensityOperator> {
    let ch = LossyChannel::new(tau)?;
    Ok(coherent_ket(alpha * ch.tau.sqrt(), cutoff).to_density())
}

fn require_regime(params: &ChannelParams, want: Regime) -> Result<()> {
    let got = regime(params);
    if got != want {
        return Err(Error::Regime(format!(
            "parameters (lambda_x = {}, lambda_y = {}) are in the {got} regime; this bound needs the {want} regime",
            params.lambda_x, params.lambda_y
        )));
    }
    Ok(())
}

fn check_energy(energy: f64) -> Result<()> {
    if energy.is_finite() && energy >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("energy constraint {energy} must be nonnegative")))
    }
}

/// 2(1 - e^{-E(1-tau)} g Omega), valid in the positive regime.
pub fn lossy_diamond_bound_positive(energy: f64, params: &ChannelParams) -> Result<f64> {
    check_energy(energy)?;
    require_regime(params, Regime::Positive)?;
    let sc = two_port::derived_scalars(params, SERIES_TOL)?;
    Ok(2.0 * (1.0 - (-energy * (1.0 - sc.tau)).exp() * sc.g * sc.omega))
}

/// Per-radius bound T(u), u = r^2, used in the negative regime.
pub fn lossy_negative_pointwise(u: f64, params: &ChannelParams) -> Result<f64> {
    check_energy(u)?;
    let sc = two_port::derived_scalars(params, SERIES_TOL)?;
    Ok(pointwise(u, params, &sc))
}

fn pointwise(u: f64, params: &ChannelParams, sc: &two_port::DerivedScalars) -> f64 {
    let chi0 = chi_unchecked(params.lambda_x, 0);
    let w0 = measurement_weight(params.lambda_y, 0);
    let omega_rest = sc.omega - chi0 * w0;
    let decay = (-u * (1.0 - sc.tau)).exp();
    let main = 2.0 * (1.0 - decay * sc.g * omega_rest);
    // sqrt((1 - e^{-u tau}) / (1 - chi_{y,0}^2)) = w0 sqrt(1 - e^{-u tau})
    let extra = 2.0 * decay * sc.g * chi0 * w0 * (-(-u * sc.tau).exp_m1()).sqrt();
    main + extra
}

/// Supremum of E_P[T(u)] over radial distributions with E_P[u] <= E, computed
/// as the upper concave envelope of T on a geometric grid.
pub fn lossy_diamond_bound_negative(energy: f64, params: &ChannelParams) -> Result<f64> {
    check_energy(energy)?;
    require_regime(params, Regime::Negative)?;
    let sc = two_port::derived_scalars(params, SERIES_TOL)?;
    // |T(u) - 2| <= 2 e^{-u(1-tau)} g Omega
    let u_far = ((2.0 * sc.g * sc.omega / ENVELOPE_ASYMPTOTE_TOL).ln() / (1.0 - sc.tau)).max(1.0);
    let grid = envelope_grid(u_far.max(energy), energy);
    let points: Vec<(f64, f64)> = grid.iter().map(|&u| (u, pointwise(u, params, &sc))).collect();
    let hull = upper_hull(&points);
    Ok(hull_max_up_to(&hull, energy))
}

fn envelope_grid(u_max: f64, energy: f64) -> Vec<f64> {
    let mut grid = vec![0.0];
    let mut u = 1e-10;
    while u < u_max {
        grid.push(u);
        u *= 1.01;
    }
    grid.push(u_max);
    grid.push(energy);
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// Upper convex hull of points sorted by abscissa.
fn upper_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(points.len());
    for &p in points {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

fn hull_max_up_to(hull: &[(f64, f64)], x: f64) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for w in hull.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if x0 > x {
            break;
        }
        best = best.max(y0);
        if x <= x1 {
            let t = if x1 > x0 { (x - x0) / (x1 - x0) } else { 0.0 };
            best = best.max(y0 + t * (y1 - y0));
        }
    }
    if let Some(&(xl, yl)) = hull.last() {
        if xl <= x {
            best = best.max(yl);
        }
    }
    best
}

/// Bound for either regime, reporting which branch was used.
pub fn lossy_diamond_bound(energy: f64, params: &ChannelParams) -> Result<(f64, Regime)> {
    match regime(params) {
        Regime::Positive => Ok((lossy_diamond_bound_positive(energy, params)?, Regime::Positive)),
        Regime::Negative => Ok((lossy_diamond_bound_negative(energy, params)?, Regime::Negative)),
    }
}

/// Energy-dependent replacement channel parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EdrcParams {
    pub kappa: f64,
    pub f: f64,
    pub tau: f64,
    pub h: f64,
}

impl EdrcParams {
    pub fn new(kappa: f64, f: f64, tau: f64, h: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa >= 0.0) {
            return Err(Error::Domain(format!("kappa = {kappa} must be nonnegative")));
        }
        if !(f.is_finite() && f >= 0.0) {
            return Err(Error::Domain(format!("f = {f} must be nonnegative")));
        }
        if !(tau.is_finite() && (0.0..1.0).contains(&tau)) {
            return Err(Error::Domain(format!("tau = {tau} must lie in [0, 1)")));
        }
        check_lambda("h", h)?;
        Ok(EdrcParams { kappa, f, tau, h })
    }

    /// kappa = 1 - tau, f = g Omega, h = lambda_x.
    pub fn matched(params: &ChannelParams) -> Result<Self> {
        let sc = two_port::derived_scalars(params, SERIES_TOL)?;
        EdrcParams::new(1.0 - sc.tau, sc.g * sc.omega, sc.tau, params.lambda_x)
    }
}

/// w |sqrt(tau) alpha><sqrt(tau) alpha| + (1 - w) thermal(h), w = f e^{-kappa |alpha|^2}.
pub fn edrc_apply(alpha: Complex64, p: &EdrcParams, cutoff: Cutoff) -> Result<DensityOperator> {
    let w = p.f * (-p.kappa * alpha.norm_sqr()).exp();
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::Invalid(format!("replacement weight {w} lies outside [0, 1]")));
    }
    let beta = alpha * p.tau.sqrt();
    let ket = coherent_ket(beta, cutoff);
    let amps = ket.amplitudes();
    let d = cutoff.levels();
    let mut m = CMatrix::from_fn(d, d, |i, j| amps[i] * amps[j].conj() * w);
    for k in 0..d {
        m[(k, k)] += Complex64::new((1.0 - w) * chi_unchecked(p.h, k), 0.0);
    }
    symmetrize(&mut m);
    let deficit = w * fock::poisson_tail(beta.norm_sqr(), d) + (1.0 - w) * p.h.powi(2 * d as i32);
    DensityOperator::from_parts(FockOperator::new(m, 1, cutoff)?, deficit)
}

/// Largest m with (1 - chi_{y,m}^2)^{-1/2} > Omega; -1 when no m qualifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct McIndex {
    pub m_c: i64,
    /// The scan hit `MC_SCAN_CAP` without the predicate failing.
    pub capped: bool,
}

pub fn mc_index(params: &ChannelParams) -> Result<McIndex> {
    let (om, _) = two_port::omega(params, SERIES_TOL)?;
    let mut m_c: i64 = -1;
    for m in 0..=MC_SCAN_CAP {
        if measurement_weight(params.lambda_y, m) > om {
            m_c = m as i64;
        } else {
            return Ok(McIndex { m_c, capped: false });
        }
    }
    Ok(McIndex { m_c, capped: true })
}

/// Exact diamond norm between the two-port channel and its matched replacement channel.
pub fn edrc_diamond_norm(params: &ChannelParams) -> Result<f64> {
    require_regime(params, Regime::Positive)?;
    let sc = two_port::derived_scalars(params, SERIES_TOL)?;
    let mc = mc_index(params)?;
    if mc.capped {
        return Err(Error::Numerical(format!("m_c scan reached the cap of {MC_SCAN_CAP}")));
    }
    let mut sum = 0.0;
    for m in 0..=mc.m_c.max(-1) {
        let m = m as usize;
        sum += chi_unchecked(params.lambda_x, m) * (measurement_weight(params.lambda_y, m) - sc.omega);
    }
    Ok(2.0 * sc.g * sum)
}

/// Fidelity between N copies of TMSV(lambda1) and N copies of TMSV(lambda2).
pub fn resource_fidelity(lambda1: f64, lambda2: f64, ports: usize) -> Result<f64> {
    check_lambda("lambda1", lambda1)?;
    check_lambda("lambda2", lambda2)?;
    let single = (1.0 - lambda1 * lambda1) * (1.0 - lambda2 * lambda2) / (1.0 - lambda1 * lambda2).powi(2);
    Ok(single.powi(ports as i32))
}

/// Base point lambda_x = lambda_y = 2^{-1/4} of the discrimination example.
pub fn sim_example_base() -> ChannelParams {
    let l = 2f64.powf(-0.25);
    ChannelParams { lambda_x: l, lambda_y: l, ports: 2 }
}

/// Bound on the distance between the channels whose resources have
/// lambda_x = base.lambda_x +- delta / 2 (measurement lambda_y shared).
pub fn sim_example_bound(delta: f64, base: &ChannelParams) -> Result<f64> {
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::Domain(format!("delta = {delta} must be nonnegative")));
    }
    let plus = ChannelParams::new(base.lambda_x + delta / 2.0, base.lambda_y, 2)?;
    let minus = ChannelParams::new(base.lambda_x - delta / 2.0, base.lambda_y, 2)?;
    let fid = resource_fidelity(plus.lambda_x, minus.lambda_x, 2)?.min(1.0);
    Ok(edrc_diamond_norm(&plus)? + edrc_diamond_norm(&minus)? + 2.0 * (1.0 - fid).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::trace_norm;
    use crate::two_port::apply_coherent;
    use approx::assert_abs_diff_eq;

    fn p(lx: f64, ly: f64) -> ChannelParams {
        ChannelParams::two_port(lx, ly).unwrap()
    }

    fn cut(d: usize) -> Cutoff {
        Cutoff::new(d).unwrap()
    }

    #[test]
    fn lossy_examples() {
        let c = cut(40);
        let alpha = Complex64::new(1.3, 0.4);
        let id = lossy_apply(alpha, 1.0, c).unwrap();
        let coh = coherent_ket(alpha, c).to_density();
        assert!(crate::linalg::max_abs(&(id.matrix() - coh.matrix())) < 1e-15);
        let vac = lossy_apply(alpha, 0.0, c).unwrap();
        assert_eq!(vac.matrix()[(0, 0)].re, 1.0);
        let matched = LossyChannel::matched(&p(0.5, 0.5));
        assert_abs_diff_eq!(matched.tau, 0.0625, epsilon = 1e-16);
        let out = lossy_apply(Complex64::new(2.0, 0.0), matched.tau, c).unwrap();
        let half = coherent_ket(Complex64::new(0.5, 0.0), c).to_density();
        assert!(crate::linalg::max_abs(&(out.matrix() - half.matrix())) < 1e-15);
    }

    #[test]
    fn positive_bound_shape() {
        let params = p(0.5, 0.5);
        let sc = two_port::derived_scalars(&params, SERIES_TOL).unwrap();
        let b0 = lossy_diamond_bound_positive(0.0, &params).unwrap();
        assert_abs_diff_eq!(b0, 2.0 * (1.0 - sc.g * sc.omega), epsilon = 1e-15);
        assert_abs_diff_eq!(lossy_diamond_bound_positive(1e4, &params).unwrap(), 2.0, epsilon = 1e-12);
        let mut last = b0;
        for k in 1..50 {
            let b = lossy_diamond_bound_positive(k as f64 * 0.3, &params).unwrap();
            assert!(b >= last);
            last = b;
        }
    }

    #[test]
    fn positive_bound_rejects_negative_regime() {
        let params = p(0.2, 0.1);
        assert_eq!(regime(&params), Regime::Negative);
        assert!(matches!(lossy_diamond_bound_positive(1.0, &params), Err(Error::Regime(_))));
    }

    #[test]
    fn negative_bound_at_zero_energy() {
        let params = p(0.2, 0.1);
        let sc = two_port::derived_scalars(&params, SERIES_TOL).unwrap();
        let omega_rest = sc.omega - chi_unchecked(0.2, 0) * measurement_weight(0.1, 0);
        let t0 = lossy_negative_pointwise(0.0, &params).unwrap();
        assert_abs_diff_eq!(t0, 2.0 * (1.0 - sc.g * omega_rest), epsilon = 1e-14);
        assert_abs_diff_eq!(lossy_diamond_bound_negative(0.0, &params).unwrap(), t0, epsilon = 1e-14);
    }

    #[test]
    fn negative_envelope_dominates_pointwise() {
        let params = p(0.3, 0.15);
        for e in [0.0, 0.01, 0.1, 0.5, 1.0, 3.0, 10.0] {
            let env = lossy_diamond_bound_negative(e, &params).unwrap();
            assert!(env >= lossy_negative_pointwise(e, &params).unwrap() - 1e-15);
        }
    }

    #[test]
    fn negative_envelope_equals_pointwise_when_concave_increasing() {
        let params = p(0.6, 0.3);
        let e = 1.2;
        // check on a fine grid that T is increasing and concave on [0, 2e]
        let ts: Vec<f64> = (0..=400).map(|k| lossy_negative_pointwise(2.0 * e * k as f64 / 400.0, &params).unwrap()).collect();
        let incr = ts.windows(2).all(|w| w[1] >= w[0]);
        let concave = ts.windows(3).all(|w| w[0] + w[2] <= 2.0 * w[1] + 1e-14);
        if incr && concave {
            assert_abs_diff_eq!(
                lossy_diamond_bound_negative(e, &params).unwrap(),
                lossy_negative_pointwise(e, &params).unwrap(),
                epsilon = 1e-12
            );
        } else {
            panic!("test parameters no longer give a concave increasing T");
        }
    }

    #[test]
    fn negative_envelope_nondecreasing_in_energy() {
        let params = p(0.45, 0.2);
        assert_eq!(regime(&params), Regime::Negative);
        let mut last = 0.0;
        for k in 0..40 {
            let b = lossy_diamond_bound_negative(k as f64 * 0.25, &params).unwrap();
            assert!(b >= last - 1e-15);
            last = b;
        }
    }

    #[test]
    fn hull_of_convex_points_is_chord() {
        let pts: Vec<(f64, f64)> = (0..=10).map(|k| (k as f64, (k as f64 - 5.0).powi(2))).collect();
        let hull = upper_hull(&pts);
        assert_eq!(hull.len(), 2);
        assert_abs_diff_eq!(hull_max_up_to(&hull, 5.0), 25.0, epsilon = 1e-15);
    }

    #[test]
    fn edrc_examples() {
        let c = cut(30);
        let off = EdrcParams::new(0.3, 0.0, 0.2, 0.4).unwrap();
        let th = fock::thermal_state(0.4, c).unwrap();
        let out = edrc_apply(Complex64::new(1.0, 1.0), &off, c).unwrap();
        assert!(crate::linalg::max_abs(&(out.matrix() - th.matrix())) < 1e-15);
        let on = EdrcParams::new(0.5, 0.8, 0.2, 0.4).unwrap();
        let far = edrc_apply(Complex64::new(12.0, 0.0), &on, cut(60)).unwrap();
        let th = fock::thermal_state(0.4, cut(60)).unwrap();
        assert!(crate::linalg::max_abs(&(far.matrix() - th.matrix())) < 1e-12);
        let bad = EdrcParams::new(0.0, 1.5, 0.2, 0.4).unwrap();
        assert!(edrc_apply(Complex64::new(0.1, 0.0), &bad, c).is_err());
    }

    #[test]
    fn edrc_matched_difference_is_diagonal() {
        let params = p(0.5, 0.6);
        let c = cut(40);
        let e = edrc_apply(Complex64::new(0.0, 0.0), &EdrcParams::matched(&params).unwrap(), c).unwrap();
        let t = apply_coherent(Complex64::new(0.0, 0.0), &params, c).unwrap();
        let diff = e.matrix() - t.matrix();
        for i in 0..40 {
            for j in 0..40 {
                if i != j {
                    assert!(diff[(i, j)].norm() < 1e-16);
                }
            }
        }
    }

    #[test]
    fn edrc_norm_matches_direct_trace_norm() {
        for (lx, ly) in [(0.5, 0.5), (0.3, 0.6), (0.7, 0.4), (0.6, 0.8)] {
            let params = p(lx, ly);
            let c = Cutoff::for_geometric(lx, 1e-14).unwrap();
            let e = edrc_apply(Complex64::new(0.0, 0.0), &EdrcParams::matched(&params).unwrap(), c).unwrap();
            let t = apply_coherent(Complex64::new(0.0, 0.0), &params, c).unwrap();
            let direct = trace_norm(&t.op().sub(e.op()).unwrap()).unwrap();
            assert_abs_diff_eq!(edrc_diamond_norm(&params).unwrap(), direct, epsilon = 1e-10);
        }
    }

    #[test]
    fn edrc_norm_limits() {
        assert_eq!(mc_index(&p(0.0, 0.9)).unwrap().m_c, -1);
        assert_eq!(edrc_diamond_norm(&p(0.0, 0.9)).unwrap(), 0.0);
        assert!(edrc_diamond_norm(&p(0.5, 0.9999)).unwrap() < 1e-6);
        assert!(edrc_diamond_norm(&p(0.8, 0.5)).unwrap() >= 0.0);
    }

    #[test]
    fn mc_index_definition() {
        let params = p(0.6, 0.5);
        let mc = mc_index(&params).unwrap();
        let (om, _) = two_port::omega(&params, SERIES_TOL).unwrap();
        assert!(!mc.capped);
        for m in 0..=mc.m_c as usize {
            assert!(measurement_weight(0.5, m) > om);
        }
        assert!(measurement_weight(0.5, (mc.m_c + 1) as usize) <= om);
    }

    #[test]
    fn resource_fidelity_examples() {
        assert_abs_diff_eq!(resource_fidelity(0.4, 0.4, 3).unwrap(), 1.0, epsilon = 1e-15);
        let c = cut(60);
        let ov = fock::tmsv_ket(0.3, c).unwrap().inner(&fock::tmsv_ket(0.6, c).unwrap()).unwrap();
        assert_abs_diff_eq!(resource_fidelity(0.3, 0.6, 1).unwrap(), ov.norm_sqr(), epsilon = 1e-10);
        let one = resource_fidelity(0.3, 0.6, 1).unwrap();
        assert_abs_diff_eq!(resource_fidelity(0.3, 0.6, 2).unwrap(), one * one, epsilon = 1e-15);
    }

    #[test]
    fn sim_bound_examples() {
        let base = sim_example_base();
        assert_eq!(regime(&base), Regime::Positive);
        let at_zero = sim_example_bound(0.0, &base).unwrap();
        assert_abs_diff_eq!(at_zero, 2.0 * edrc_diamond_norm(&base).unwrap(), epsilon = 1e-15);
        let mut last_fid_term = 0.0;
        for k in 1..20 {
            let delta = k as f64 * 0.015;
            let b = sim_example_bound(delta, &base).unwrap();
            assert!(b >= 0.0);
            let l = base.lambda_x;
            let fid_term = 2.0 * (1.0 - resource_fidelity(l + delta / 2.0, l - delta / 2.0, 2).unwrap()).sqrt();
            assert!(fid_term >= last_fid_term);
            last_fid_term = fid_term;
        }
        assert!(sim_example_bound(0.5, &base).is_err());
    }
}
