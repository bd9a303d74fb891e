use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::arrangement::Arrangements;
use super::gamma::{gamma, GammaMatrix};
use super::multiset::{enumerate_multisets, Multiset};
use super::sector::eta_basis_for;
use crate::error::{Error, Result};
use crate::fock::{chi_unchecked, Cutoff, FockOperator};
use crate::linalg::CMatrix;
use crate::two_port::ChannelParams;

/// Target for (N-1) lambda_x^{2(cap+1)} / (1 - lambda_x^2) used by `default_cap`.
pub const CAP_TARGET: f64 = 1e-10;

/// Channel output on one number element with its truncation bookkeeping.
#[derive(Debug, Clone)]
pub struct ChannelOutput {
    pub op: FockOperator,
    /// Declared bound on contributions from multisets with an element above the cap.
    pub cap_tail: f64,
    /// Mass of entries beyond the output cutoff (exact sum of dropped magnitudes).
    pub cutoff_tail: f64,
    pub warnings: Vec<String>,
}

impl ChannelOutput {
    pub fn tail(&self) -> f64 {
        self.cap_tail + self.cutoff_tail
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailReport {
    pub cap: usize,
    pub cap_tail: f64,
}

/// Declared multiset truncation bound N^2 (N-1) lambda_x^{2(cap+1)}.
pub fn cap_tail_bound(params: &ChannelParams, cap: usize) -> f64 {
    let n = params.ports as f64;
    n * n * (n - 1.0) * params.lambda_x.powi(2 * (cap as i32 + 1))
}

/// Smallest cap with (N-1) lambda_x^{2(cap+1)} / (1 - lambda_x^2) < 1e-10.
pub fn default_cap(params: &ChannelParams) -> usize {
    let lx2 = params.lambda_x * params.lambda_x;
    if lx2 == 0.0 {
        return 0;
    }
    let k = (params.ports - 1) as f64 / (1.0 - lx2);
    let mut cap = 0usize;
    while k * lx2.powi(cap as i32 + 1) >= CAP_TARGET {
        cap += 1;
    }
    cap
}

pub(crate) fn prefactor(params: &ChannelParams, a: usize, b: usize) -> f64 {
    let n = params.ports;
    let lx2 = params.lambda_x * params.lambda_x;
    n as f64
        * (1.0 - lx2).powi(n as i32)
        * (1.0 - params.lambda_y * params.lambda_y)
        * (params.lambda_x * params.lambda_y).powi((a + b) as i32)
}

pub(crate) fn check_indices(a: usize, b: usize, cutoff: Cutoff) -> Result<()> {
    for i in [a, b] {
        if i >= cutoff.levels() {
            return Err(Error::Index { index: i, levels: cutoff.levels() });
        }
    }
    Ok(())
}

/// Sparse accumulator for the diagonal or single off-diagonal entries of one output.
pub(crate) struct Accumulator {
    d: usize,
    m: CMatrix,
    dropped: f64,
}

impl Accumulator {
    pub(crate) fn new(cutoff: Cutoff) -> Self {
        let d = cutoff.levels();
        Accumulator { d, m: CMatrix::zeros(d, d), dropped: 0.0 }
    }

    pub(crate) fn add(&mut self, p: usize, q: usize, v: f64) {
        if p < self.d && q < self.d {
            self.m[(p, q)] += Complex64::new(v, 0.0);
        } else {
            self.dropped += v.abs();
        }
    }

    pub(crate) fn add_thermal(&mut self, lambda_x: f64) {
        for n in 0..self.d {
            self.m[(n, n)] += Complex64::new(chi_unchecked(lambda_x, n), 0.0);
        }
        self.dropped += lambda_x.powi(2 * self.d as i32);
    }

    pub(crate) fn finish(self, params: &ChannelParams, cap: usize, cutoff: Cutoff, hermitian: bool) -> Result<ChannelOutput> {
        let cap_tail = cap_tail_bound(params, cap);
        let mut warnings = Vec::new();
        if cap < default_cap(params) {
            warnings.push(format!(
                "multiset cap {cap} is below the default {} for this lambda_x; declared tail {cap_tail:.3e}",
                default_cap(params)
            ));
        }
        let mut op = FockOperator::new(self.m, 1, cutoff)?;
        if hermitian {
            op = op.mark_hermitian()?;
        }
        Ok(ChannelOutput { op, cap_tail, cutoff_tail: self.dropped, warnings })
    }
}

/// Gamma data for one multiset.
#[derive(Debug, Clone)]
pub struct SectorGamma {
    pub arrangements: Arrangements,
    pub gamma: GammaMatrix,
    gamma_re: DMatrix<f64>,
    weight: f64,
}

impl SectorGamma {
    pub fn multiset(&self) -> &Multiset {
        self.arrangements.multiset()
    }
}

/// Generic N-port channel with Gamma(M) precomputed for every multiset up to `cap`.
#[derive(Debug, Clone)]
pub struct NportChannel {
    params: ChannelParams,
    cap: usize,
    sectors: Vec<SectorGamma>,
}

impl NportChannel {
    pub fn new(params: ChannelParams, cap: usize) -> Result<Self> {
        let ly = params.lambda_y;
        Self::with_gamma(params, cap, |arr| Ok(gamma(&eta_basis_for(arr.clone(), ly)?)))
    }

    /// Builds with a caller-supplied Gamma route.
    pub fn with_gamma<F>(params: ChannelParams, cap: usize, f: F) -> Result<Self>
    where
        F: Fn(&Arrangements) -> Result<GammaMatrix> + Sync,
    {
        let lx2 = params.lambda_x * params.lambda_x;
        let multisets = enumerate_multisets(params.ports, cap)?;
        let sectors = multisets
            .par_iter()
            .map(|m| {
                let arrangements = Arrangements::new(m);
                let gamma = f(&arrangements)?;
                let gamma_re = gamma.real();
                Ok(SectorGamma { arrangements, gamma, gamma_re, weight: lx2.powi(m.sum() as i32) })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(NportChannel { params, cap, sectors })
    }

    pub fn params(&self) -> &ChannelParams {
        &self.params
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn sectors(&self) -> &[SectorGamma] {
        &self.sectors
    }

    pub fn tail_report(&self) -> TailReport {
        TailReport { cap: self.cap, cap_tail: cap_tail_bound(&self.params, self.cap) }
    }

    /// E[|a><b|] from the four-case reduced sums over multisets.
    pub fn apply_number_element(&self, a: usize, b: usize, cutoff: Cutoff) -> Result<ChannelOutput> {
        check_indices(a, b, cutoff)?;
        let pref = prefactor(&self.params, a, b);
        let parts: Vec<Vec<(usize, usize, f64)>> = self.sectors.par_iter().map(|s| reduced_terms(s, a, b)).collect();
        let mut acc = Accumulator::new(cutoff);
        if a == b {
            acc.add_thermal(self.params.lambda_x);
        }
        for part in parts {
            for (p, q, v) in part {
                acc.add(p, q, pref * v);
            }
        }
        acc.finish(&self.params, self.cap, cutoff, a == b)
    }

    /// E[|a><b|] by matching substituted sequences over every arrangement pair.
    pub fn apply_number_element_contraction(&self, a: usize, b: usize, cutoff: Cutoff) -> Result<ChannelOutput> {
        check_indices(a, b, cutoff)?;
        let n = self.params.ports;
        let lx = self.params.lambda_x;
        let pref = n as f64
            * (1.0 - lx * lx).powi(n as i32)
            * (1.0 - self.params.lambda_y.powi(2))
            * (-self.params.lambda_y).powi((a + b) as i32);
        let parts: Vec<Vec<(usize, usize, f64)>> = self
            .sectors
            .par_iter()
            .map(|s| {
                let arr = &s.arrangements;
                let with_b: Vec<(usize, Vec<usize>)> = (0..arr.len()).map(|i| arr.substitute(i, b)).collect();
                let with_a: Vec<(usize, Vec<usize>)> = (0..arr.len()).map(|i| arr.substitute(i, a)).collect();
                let mut out = Vec::new();
                for (i1, (q, tb)) in with_b.iter().enumerate() {
                    for (i2, (p, ta)) in with_a.iter().enumerate() {
                        if tb != ta {
                            continue;
                        }
                        let e = (p + q + 2 * ta.iter().sum::<usize>()) as i32;
                        out.push((*p, *q, s.gamma_re[(i1, i2)] * (-lx).powi(e)));
                    }
                }
                out
            })
            .collect();
        let mut acc = Accumulator::new(cutoff);
        if a == b {
            acc.add_thermal(lx);
        }
        for part in parts {
            for (p, q, v) in part {
                acc.add(p, q, pref * v);
            }
        }
        acc.finish(&self.params, self.cap, cutoff, a == b)
    }
}

/// Sector contributions without the common prefactor.
fn reduced_terms(s: &SectorGamma, a: usize, b: usize) -> Vec<(usize, usize, f64)> {
    let arr = &s.arrangements;
    let g = &s.gamma_re;
    let mut out = Vec::new();
    if a != b {
        let mut tot = 0.0;
        for &t in arr.tilde() {
            let lb = arr.compose(t, b);
            let la = arr.compose(t, a);
            for &i in &lb {
                for &j in &la {
                    tot += g[(i, j)];
                }
            }
        }
        out.push((a, b, s.weight * tot));
        return out;
    }
    let mut diag = 0.0;
    for &t in arr.tilde() {
        let la = arr.compose(t, a);
        for &i in &la {
            for &j in &la {
                diag += g[(i, j)];
            }
        }
    }
    out.push((a, a, s.weight * diag));
    for n in arr.multiset().unique() {
        if n == a {
            continue;
        }
        let mut tot = 0.0;
        for &t in arr.tilde() {
            for &i in arr.swaps_with(t, n) {
                for j in arr.compose(i, a) {
                    tot += g[(i, j)];
                }
            }
        }
        out.push((n, n, s.weight * tot));
    }
    out
}

/// One-shot generic evaluation; builds the sector tables for this call.
pub fn apply_number_element_nport(a: usize, b: usize, params: &ChannelParams, cap: usize, cutoff: Cutoff) -> Result<ChannelOutput> {
    NportChannel::new(*params, cap)?.apply_number_element(a, b, cutoff)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use crate::two_port;

    fn cut(d: usize) -> Cutoff {
        Cutoff::new(d).unwrap()
    }

    #[test]
    fn two_ports_match_closed_form() {
        for (lx, ly) in [(0.4, 0.6), (0.5, 0.5), (0.3, 0.8)] {
            let params = ChannelParams::two_port(lx, ly).unwrap();
            let ch = NportChannel::new(params, 80).unwrap();
            for (a, b) in [(0, 0), (1, 1), (0, 1), (2, 1), (3, 3), (1, 4)] {
                let gen = ch.apply_number_element(a, b, cut(10)).unwrap();
                let closed = two_port::apply_number_element(a, b, &params, cut(10)).unwrap();
                assert!(max_abs(&(gen.op.matrix() - closed.matrix())) < 1e-12, "{lx} {ly} {a} {b}");
            }
        }
    }

    #[test]
    fn reduced_matches_contraction() {
        for n in [2, 3, 4] {
            let params = ChannelParams::new(0.4, 0.6, n).unwrap();
            let ch = NportChannel::new(params, [0, 0, 25, 18, 10][n]).unwrap();
            for (a, b) in [(0, 0), (1, 1), (0, 1), (2, 1), (3, 3), (1, 3)] {
                let r = ch.apply_number_element(a, b, cut(8)).unwrap();
                let c = ch.apply_number_element_contraction(a, b, cut(8)).unwrap();
                assert!(max_abs(&(r.op.matrix() - c.op.matrix())) < 1e-13, "N={n} {a} {b}");
            }
        }
    }

    #[test]
    fn structure_of_outputs() {
        let params = ChannelParams::new(0.5, 0.5, 3).unwrap();
        let ch = NportChannel::new(params, 30).unwrap();
        let off = ch.apply_number_element(1, 2, cut(8)).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                if (i, j) != (1, 2) {
                    assert_eq!(off.op.get(i, j), Complex64::new(0.0, 0.0));
                }
            }
        }
        let on = ch.apply_number_element(2, 2, cut(8)).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                if i != j {
                    assert_eq!(on.op.get(i, j), Complex64::new(0.0, 0.0));
                }
            }
        }
        assert!((on.op.trace().re - 1.0).abs() <= on.tail() + 1e-10);
    }

    #[test]
    fn small_cap_is_flagged() {
        let params = ChannelParams::new(0.6, 0.5, 3).unwrap();
        let out = apply_number_element_nport(0, 0, &params, 3, cut(6)).unwrap();
        assert!(!out.warnings.is_empty());
        let ok = apply_number_element_nport(0, 0, &params, default_cap(&params), cut(6)).unwrap();
        assert!(ok.warnings.is_empty());
    }

    #[test]
    fn doubling_cap_stays_within_declared_tail() {
        for n in [2, 3] {
            let params = ChannelParams::new(0.6, 0.5, n).unwrap();
            for cap in [4, 8] {
                let lo = NportChannel::new(params, cap).unwrap();
                let hi = NportChannel::new(params, 2 * cap).unwrap();
                for (a, b) in [(0, 0), (1, 1), (0, 1), (2, 3)] {
                    let x = lo.apply_number_element(a, b, cut(6)).unwrap();
                    let y = hi.apply_number_element(a, b, cut(6)).unwrap();
                    let diff = crate::fock::trace_norm(&x.op.sub(&y.op).unwrap()).unwrap();
                    assert!(diff <= x.cap_tail, "N={n} cap={cap} ({a},{b}): {diff:.3e} > {:.3e}", x.cap_tail);
                }
            }
        }
    }

    #[test]
    fn default_cap_meets_target() {
        for n in [2, 3, 4] {
            for lx in [0.0, 0.2, 0.5, 0.8] {
                let p = ChannelParams::new(lx, 0.5, n).unwrap();
                let cap = default_cap(&p);
                let val = (n - 1) as f64 * (lx * lx).powi(cap as i32 + 1) / (1.0 - lx * lx);
                assert!(val < 1e-10);
            }
        }
    }
}
