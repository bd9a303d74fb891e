//! Closed-form three-port eigendata, Gamma matrices and reduced channel sums.
//!
//! Indices follow the labelling (n m m), (m n m), (m m n) for {m, m} and
//! (n l m), (l m n), (m n l), (n m l), (m l n), (l n m) for an ordered pair (l, m).

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::arrangement::{Arrangements, Slot};
use super::channel::{check_indices, prefactor, Accumulator, ChannelOutput};
use super::multiset::Multiset;
use crate::error::{Error, Result};
use crate::fock::Cutoff;
use crate::linalg::{CMatrix, CVector};
use crate::two_port::ChannelParams;

fn omega3(p: i32) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * p.rem_euclid(3) as f64 / 3.0)
}

fn expi(x: f64) -> Complex64 {
    Complex64::from_polar(1.0, x)
}

pub fn mm_eigenvalues(m: usize, lambda_y: f64) -> [f64; 3] {
    let c = (1.0 - lambda_y * lambda_y) * lambda_y.powi(2 * m as i32);
    [1.0 + 2.0 * c, 1.0 - c, 1.0 - c]
}

pub fn mm_vectors() -> [CVector; 3] {
    let s = Complex64::new(1.0 / 3f64.sqrt(), 0.0);
    let one = Complex64::new(1.0, 0.0);
    [
        CVector::from_vec(vec![s, s, s]),
        CVector::from_vec(vec![one, omega3(1), omega3(2)]) * s,
        CVector::from_vec(vec![one, omega3(2), omega3(1)]) * s,
    ]
}

/// phi = 4 pi / 3 - arg[1 + lambda_y^{2(l-m)} e^{2 pi i / 3}].
pub fn lm_phase(l: usize, m: usize, lambda_y: f64) -> f64 {
    let r = lambda_y.powi(2 * (l as i32 - m as i32));
    4.0 * PI / 3.0 - (Complex64::new(1.0, 0.0) + omega3(1) * r).arg()
}

pub fn lm_eigenvalues(l: usize, m: usize, lambda_y: f64) -> [f64; 6] {
    let c = 1.0 - lambda_y * lambda_y;
    let ll = lambda_y.powi(2 * l as i32);
    let mm = lambda_y.powi(2 * m as i32);
    let r = (ll * ll - ll * mm + mm * mm).sqrt();
    [1.0 + c * (ll + mm), 1.0 - c * (ll + mm), 1.0 + c * r, 1.0 - c * r, 1.0 + c * r, 1.0 - c * r]
}

pub fn lm_vectors(l: usize, m: usize, lambda_y: f64) -> [CVector; 6] {
    let phi = lm_phase(l, m, lambda_y);
    let s = Complex64::new(1.0 / 6f64.sqrt(), 0.0);
    let one = Complex64::new(1.0, 0.0);
    let w = omega3(1);
    let w2 = omega3(2);
    let t = 2.0 * PI / 3.0;
    let v = |x: [Complex64; 6]| CVector::from_vec(x.to_vec()) * s;
    [
        v([one; 6]),
        v([one, one, one, -one, -one, -one]),
        v([one, w, w2, expi(phi), expi(t + phi), expi(2.0 * t + phi)]),
        v([one, w, w2, -expi(phi), -expi(t + phi), -expi(2.0 * t + phi)]),
        v([one, w2, w, expi(-phi), expi(2.0 * t - phi), expi(t - phi)]),
        v([one, w2, w, -expi(-phi), -expi(2.0 * t - phi), -expi(t - phi)]),
    ]
}

/// Closed-form Gamma({m, m}).
pub fn gamma_mm(m: usize, lambda_y: f64) -> DMatrix<f64> {
    let [x1, x2, _] = mm_eigenvalues(m, lambda_y);
    let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 1.0, 1.0, -2.0, -2.0, 1.0, -2.0, -2.0]);
    let b = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, -1.0, -1.0, -1.0, 2.0, -1.0, 2.0, -1.0]);
    (a / (x1 * x2).sqrt() + b / x2) / 9.0
}

fn lm_gamma_terms(l: usize, m: usize, lambda_y: f64, corrected: bool) -> CMatrix {
    let v = lm_vectors(l, m, lambda_y);
    let x = lm_eigenvalues(l, m, lambda_y);
    let ep = expi(lm_phase(l, m, lambda_y));
    let ep2 = ep * ep;
    let one = Complex64::new(1.0, 0.0);
    // o(i, j) = eta_i eta_j^dagger, 1-based
    let o = |i: usize, j: usize| &v[i - 1] * v[j - 1].adjoint();
    let sq = |i: usize, j: usize| Complex64::new((x[i - 1] * x[j - 1]).sqrt(), 0.0);
    let mut g = (o(1, 3) + o(5, 1)) * ((one + ep) / sq(1, 3))
        + (o(1, 4) + o(6, 1)) * ((one - ep) / sq(1, 4))
        + (o(2, 3) + o(5, 2)) * ((one - ep) / sq(2, 3))
        + (o(2, 4) + o(6, 2)) * ((one + ep) / sq(2, 4))
        + o(5, 3) * ((one + ep2) / sq(3, 3))
        + o(6, 3) * ((one - ep2) / sq(3, 4));
    if corrected {
        g += o(5, 4) * ((one - ep2) / sq(3, 4));
        g += o(6, 4) * ((one + ep2) / sq(4, 4));
    } else {
        g += o(4, 6) * ((one + ep2) / sq(4, 4));
    }
    g /= Complex64::new(6.0, 0.0);
    &g + g.adjoint()
}

/// gamma + gamma^dagger exactly as the seven-term expression is written.
/// It is not equal to Gamma({l, m}); see `gamma_lm`.
pub fn gamma_lm_printed(l: usize, m: usize, lambda_y: f64) -> CMatrix {
    lm_gamma_terms(l, m, lambda_y, false)
}

/// Closed-form Gamma({l, m}) for the ordered pair (l, m). Relative to the
/// seven-term form this adds the (5,4) partner of the (6,3) term and uses
/// eta_6 eta_4^dagger for the last term.
pub fn gamma_lm(l: usize, m: usize, lambda_y: f64) -> CMatrix {
    lm_gamma_terms(l, m, lambda_y, true)
}

/// Canonical arrangement index of each {m, m} label.
pub fn mm_to_canonical(arr: &Arrangements, m: usize) -> Result<[usize; 3]> {
    let s = Some(m);
    let labels: [[Slot; 3]; 3] = [[None, s, s], [s, None, s], [s, s, None]];
    map_labels(arr, &labels)
}

/// Canonical arrangement index of each (l, m) label.
pub fn lm_to_canonical(arr: &Arrangements, l: usize, m: usize) -> Result<[usize; 6]> {
    let (a, b) = (Some(l), Some(m));
    let labels: [[Slot; 3]; 6] =
        [[None, a, b], [a, b, None], [b, None, a], [None, b, a], [b, a, None], [a, None, b]];
    map_labels(arr, &labels)
}

fn map_labels<const K: usize>(arr: &Arrangements, labels: &[[Slot; 3]; K]) -> Result<[usize; K]> {
    let mut out = [0usize; K];
    for (o, lab) in out.iter_mut().zip(labels) {
        *o = arr
            .index_of(lab)
            .ok_or_else(|| Error::Invalid(format!("label {lab:?} is not an arrangement of {}", arr.multiset())))?;
    }
    Ok(out)
}

/// Reorders a labelled matrix into canonical arrangement order.
pub fn to_canonical(labelled: &CMatrix, map: &[usize]) -> CMatrix {
    let n = map.len();
    let mut out = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[(map[i], map[j])] = labelled[(i, j)];
        }
    }
    out
}

/// Three-port channel from the closed-form Gamma matrices.
#[derive(Debug, Clone)]
pub struct ThreePortChannel {
    params: ChannelParams,
    cap: usize,
    /// Gamma({m,m})_{1,1}, Gamma({m,m})_{1,2} for m <= cap
    mm11: Vec<f64>,
    mm12: Vec<f64>,
    /// Re Gamma((l,m)) entries, indexed [l][m], for l != m <= cap
    lm: Vec<Vec<Option<LmEntries>>>,
    /// sum_m lx^{2m} (1/2) sum_{l != m} lx^{2l} (G11 + G44)
    double_sum: f64,
    /// per m: sum_{l != m} lx^{2l} (G33 + G55)
    diag_sum: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct LmEntries {
    g11_44: f64,
    g16_42: f64,
    g56_32: f64,
    g33_55: f64,
    g35: f64,
}

impl LmEntries {
    fn new(l: usize, m: usize, ly: f64) -> Self {
        let g = gamma_lm(l, m, ly);
        let e = |i: usize, j: usize| g[(i - 1, j - 1)].re;
        LmEntries {
            g11_44: e(1, 1) + e(4, 4),
            g16_42: e(1, 6) + e(4, 2),
            g56_32: e(5, 6) + e(3, 2),
            g33_55: e(3, 3) + e(5, 5),
            g35: e(3, 5),
        }
    }
}

impl ThreePortChannel {
    pub fn new(params: ChannelParams, cap: usize) -> Result<Self> {
        if params.ports != 3 {
            return Err(Error::Invalid(format!("three-port closed forms need N = 3, got {}", params.ports)));
        }
        let ly = params.lambda_y;
        let lx2 = params.lambda_x * params.lambda_x;
        let mut mm11 = Vec::with_capacity(cap + 1);
        let mut mm12 = Vec::with_capacity(cap + 1);
        for m in 0..=cap {
            let g = gamma_mm(m, ly);
            mm11.push(g[(0, 0)]);
            mm12.push(g[(0, 1)]);
        }
        let lm: Vec<Vec<Option<LmEntries>>> = (0..=cap)
            .map(|l| (0..=cap).map(|m| (l != m).then(|| LmEntries::new(l, m, ly))).collect())
            .collect();
        let mut double_sum = 0.0;
        let mut diag_sum = vec![0.0; cap + 1];
        for m in 0..=cap {
            let mut inner = 0.0;
            for l in 0..=cap {
                if let Some(e) = lm[l][m] {
                    inner += lx2.powi(l as i32) * e.g11_44;
                    diag_sum[m] += lx2.powi(l as i32) * e.g33_55;
                }
            }
            double_sum += lx2.powi(m as i32) * 0.5 * inner;
        }
        Ok(ThreePortChannel { params, cap, mm11, mm12, lm, double_sum, diag_sum })
    }

    pub fn params(&self) -> &ChannelParams {
        &self.params
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    fn lm_entries(&self, l: usize, m: usize) -> LmEntries {
        match self.lm.get(l).and_then(|row| row.get(m)).copied().flatten() {
            Some(e) => e,
            None => LmEntries::new(l, m, self.params.lambda_y),
        }
    }

    fn mm_entries(&self, m: usize) -> (f64, f64) {
        if m <= self.cap {
            (self.mm11[m], self.mm12[m])
        } else {
            let g = gamma_mm(m, self.params.lambda_y);
            (g[(0, 0)], g[(0, 1)])
        }
    }

    pub fn apply_number_element(&self, a: usize, b: usize, cutoff: Cutoff) -> Result<ChannelOutput> {
        check_indices(a, b, cutoff)?;
        let lx2 = self.params.lambda_x * self.params.lambda_x;
        let pw = |k: usize| lx2.powi(k as i32);
        let pref = prefactor(&self.params, a, b);
        let mut acc = Accumulator::new(cutoff);
        if a != b {
            let mut s: f64 = (0..=self.cap).map(|m| pw(2 * m) * self.mm11[m]).sum();
            s += 2.0 * pw(2 * a) * self.mm_entries(a).1 + 2.0 * pw(2 * b) * self.mm_entries(b).1;
            let mut t = self.double_sum;
            for m in 0..=self.cap {
                let mut inner = 0.0;
                if a != m {
                    inner += pw(a) * self.lm_entries(a, m).g16_42;
                }
                if b != m {
                    inner += pw(b) * self.lm_entries(b, m).g16_42;
                }
                t += pw(m) * inner;
            }
            t += pw(a + b) * self.lm_entries(a, b).g56_32;
            acc.add(a, b, pref * (s + t));
            return acc.finish(&self.params, self.cap, cutoff, false);
        }

        acc.add_thermal(self.params.lambda_x);
        // {m, m} sectors
        for m in 0..=self.cap {
            if m == a {
                continue;
            }
            let v = pref * pw(2 * m) * self.mm11[m];
            acc.add(a, a, v);
            acc.add(m, m, -v);
        }
        // {l, m} sectors
        let mut on_a = self.double_sum;
        for m in 0..=self.cap {
            let mut diag = self.diag_sum[m];
            if a != m {
                let e = self.lm_entries(a, m);
                on_a += pw(m) * 2.0 * pw(a) * e.g16_42;
                diag += 2.0 * pw(a) * e.g35;
            }
            acc.add(m, m, pref * pw(m) * diag);
        }
        acc.add(a, a, pref * on_a);
        acc.finish(&self.params, self.cap, cutoff, true)
    }
}

pub fn three_port_apply_number_element(a: usize, b: usize, params: &ChannelParams, cap: usize, cutoff: Cutoff) -> Result<ChannelOutput> {
    ThreePortChannel::new(*params, cap)?.apply_number_element(a, b, cutoff)
}

/// The {l, m} multiset for an ordered pair.
pub fn lm_multiset(l: usize, m: usize) -> Result<Multiset> {
    if l == m {
        return Err(Error::Invalid(format!("(l, m) = ({l}, {m}) must be distinct")));
    }
    Multiset::new(vec![l, m])
}
