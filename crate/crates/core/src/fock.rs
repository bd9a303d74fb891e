//! Truncated Fock-space states and operators.
//!
//! Multimode indices are flattened row-major with the first listed mode
//! slowest. For the protocol objects the mode order is C, A_1, ..., A_N, B_1.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{check_lambda, Error, Result};
use crate::linalg::{self, CMatrix, CVector};

pub const DEFAULT_TAIL_TOL: f64 = 1e-12;

const HERMITIAN_TOL: f64 = 1e-12;

/// Number of Fock levels kept per mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Cutoff(usize);

impl Cutoff {
    pub fn new(levels: usize) -> Result<Self> {
        if levels < 2 {
            return Err(Error::Domain(format!("cutoff must keep at least 2 levels, got {levels}")));
        }
        Ok(Cutoff(levels))
    }

    pub fn levels(self) -> usize {
        self.0
    }

    /// Hilbert-space dimension of `modes` modes at this cutoff.
    pub fn dim(self, modes: usize) -> Result<usize> {
        let mut d: usize = 1;
        for _ in 0..modes {
            d = d
                .checked_mul(self.0)
                .ok_or_else(|| Error::Invalid("dimension overflows usize".into()))?;
        }
        Ok(d)
    }

    /// Smallest cutoff with geometric tail lambda^(2D) below `tol`.
    pub fn for_geometric(lambda: f64, tol: f64) -> Result<Self> {
        check_lambda("lambda", lambda)?;
        check_tol(tol)?;
        let mut d = 2;
        while lambda.powi(2 * d as i32) >= tol {
            d += 1;
        }
        Cutoff::new(d)
    }

    /// Smallest cutoff with Poisson(|alpha|^2) mass beyond the cutoff below `tol`.
    pub fn for_coherent(alpha: Complex64, tol: f64) -> Result<Self> {
        check_tol(tol)?;
        let mean = alpha.norm_sqr();
        if !mean.is_finite() {
            return Err(Error::Domain("coherent amplitude is not finite".into()));
        }
        let mut d = 2;
        while poisson_tail(mean, d) >= tol {
            d += 1;
            if d > 1_000_000 {
                return Err(Error::Domain(format!("|alpha|^2 = {mean} needs an unreasonable cutoff")));
            }
        }
        Cutoff::new(d)
    }

    pub fn max(self, other: Cutoff) -> Cutoff {
        Cutoff(self.0.max(other.0))
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if tol.is_finite() && tol > 0.0 && tol < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("tolerance {tol} must lie in (0, 1)")))
    }
}

/// Poisson mass at or beyond `levels`, i.e. P(n >= levels) for mean `mean`.
pub fn poisson_tail(mean: f64, levels: usize) -> f64 {
    if mean == 0.0 {
        return 0.0;
    }
    let mut term = (-mean).exp();
    let mut head = 0.0;
    for n in 0..levels {
        head += term;
        term *= mean / (n as f64 + 1.0);
    }
    if mean < levels as f64 {
        // sum the tail directly so tiny tails do not cancel to zero
        let mut tail = 0.0;
        let mut n = levels;
        while term > 0.0 && term > tail * 1e-18 {
            tail += term;
            n += 1;
            term *= mean / n as f64;
        }
        tail
    } else {
        (1.0 - head).max(0.0)
    }
}

/// Thermal weight (1 - lambda^2) lambda^(2r).
pub fn chi(lambda: f64, r: usize) -> Result<f64> {
    check_lambda("lambda", lambda)?;
    Ok(chi_unchecked(lambda, r))
}

pub(crate) fn chi_unchecked(lambda: f64, r: usize) -> f64 {
    (1.0 - lambda * lambda) * lambda.powi(2 * r as i32)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    amplitudes: CVector,
    modes: usize,
    cutoff: Cutoff,
}

impl FockVector {
    pub fn new(amplitudes: CVector, modes: usize, cutoff: Cutoff) -> Result<Self> {
        let dim = cutoff.dim(modes)?;
        if amplitudes.len() != dim {
            return Err(Error::Invalid(format!(
                "vector of length {} does not match {modes} modes at {} levels",
                amplitudes.len(),
                cutoff.levels()
            )));
        }
        if amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numerical("non-finite amplitude".into()));
        }
        Ok(FockVector { amplitudes, modes, cutoff })
    }

    /// Fock state |n> on a single mode.
    pub fn number(n: usize, cutoff: Cutoff) -> Result<Self> {
        if n >= cutoff.levels() {
            return Err(Error::Index { index: n, levels: cutoff.levels() });
        }
        let mut v = CVector::zeros(cutoff.levels());
        v[n] = Complex64::new(1.0, 0.0);
        FockVector::new(v, 1, cutoff)
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn cutoff(&self) -> Cutoff {
        self.cutoff
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    /// <self|other>
    pub fn inner(&self, other: &FockVector) -> Result<Complex64> {
        if self.amplitudes.len() != other.amplitudes.len() {
            return Err(Error::Invalid("inner product of vectors with different dimensions".into()));
        }
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// Tensor product, `self` being the slower index.
    pub fn kron(&self, other: &FockVector) -> Result<FockVector> {
        if self.cutoff != other.cutoff {
            return Err(Error::Invalid("tensor product of vectors with different cutoffs".into()));
        }
        let amps = self.amplitudes.kronecker(&other.amplitudes);
        FockVector::new(amps, self.modes + other.modes, self.cutoff)
    }

    /// |psi><psi| with missing norm recorded as trace deficit.
    pub fn to_density(&self) -> DensityOperator {
        let m = &self.amplitudes * self.amplitudes.adjoint();
        let op = FockOperator { matrix: m, modes: self.modes, cutoff: self.cutoff, hermitian: true };
        DensityOperator { op, trace_deficit: (1.0 - self.norm_sqr()).max(0.0) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FockOperator {
    matrix: CMatrix,
    modes: usize,
    cutoff: Cutoff,
    hermitian: bool,
}

impl FockOperator {
    pub fn new(matrix: CMatrix, modes: usize, cutoff: Cutoff) -> Result<Self> {
        let dim = cutoff.dim(modes)?;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::Invalid(format!(
                "{}x{} matrix does not match {modes} modes at {} levels",
                matrix.nrows(),
                matrix.ncols(),
                cutoff.levels()
            )));
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numerical("non-finite operator entry".into()));
        }
        Ok(FockOperator { matrix, modes, cutoff, hermitian: false })
    }

    pub fn zeros(modes: usize, cutoff: Cutoff) -> Result<Self> {
        let dim = cutoff.dim(modes)?;
        FockOperator::new(CMatrix::zeros(dim, dim), modes, cutoff)
    }

    pub fn identity(modes: usize, cutoff: Cutoff) -> Result<Self> {
        let dim = cutoff.dim(modes)?;
        let mut op = FockOperator::new(CMatrix::identity(dim, dim), modes, cutoff)?;
        op.hermitian = true;
        Ok(op)
    }

    /// Diagonal single-mode operator.
    pub fn diagonal(values: &[f64], cutoff: Cutoff) -> Result<Self> {
        if values.len() != cutoff.levels() {
            return Err(Error::Invalid("diagonal length does not match the cutoff".into()));
        }
        let d = DVector::from_iterator(values.len(), values.iter().map(|&v| Complex64::new(v, 0.0)));
        let mut op = FockOperator::new(CMatrix::from_diagonal(&d), 1, cutoff)?;
        op.hermitian = true;
        Ok(op)
    }

    /// |a><b| on a single mode.
    pub fn number_element(a: usize, b: usize, cutoff: Cutoff) -> Result<Self> {
        let d = cutoff.levels();
        for i in [a, b] {
            if i >= d {
                return Err(Error::Index { index: i, levels: d });
            }
        }
        let mut m = CMatrix::zeros(d, d);
        m[(a, b)] = Complex64::new(1.0, 0.0);
        let mut op = FockOperator::new(m, 1, cutoff)?;
        op.hermitian = a == b;
        Ok(op)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn cutoff(&self) -> Cutoff {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.matrix[(row, col)]
    }

    pub fn is_hermitian_flagged(&self) -> bool {
        self.hermitian
    }

    /// Set the Hermitian flag after checking max|A - A^dagger| <= 1e-12.
    pub fn mark_hermitian(mut self) -> Result<Self> {
        let err = linalg::hermiticity_error(&self.matrix);
        if err > HERMITIAN_TOL {
            return Err(Error::Invalid(format!("operator is not Hermitian (deviation {err:e})")));
        }
        self.hermitian = true;
        Ok(self)
    }

    pub fn hermiticity_error(&self) -> f64 {
        linalg::hermiticity_error(&self.matrix)
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    fn check_same_space(&self, other: &FockOperator) -> Result<()> {
        if self.modes != other.modes || self.cutoff != other.cutoff {
            return Err(Error::Invalid("operators live on different spaces".into()));
        }
        Ok(())
    }

    pub fn add(&self, other: &FockOperator) -> Result<FockOperator> {
        self.check_same_space(other)?;
        Ok(FockOperator {
            matrix: &self.matrix + &other.matrix,
            modes: self.modes,
            cutoff: self.cutoff,
            hermitian: self.hermitian && other.hermitian,
        })
    }

    pub fn sub(&self, other: &FockOperator) -> Result<FockOperator> {
        self.check_same_space(other)?;
        Ok(FockOperator {
            matrix: &self.matrix - &other.matrix,
            modes: self.modes,
            cutoff: self.cutoff,
            hermitian: self.hermitian && other.hermitian,
        })
    }

    pub fn scale(&self, s: Complex64) -> FockOperator {
        FockOperator {
            matrix: &self.matrix * s,
            modes: self.modes,
            cutoff: self.cutoff,
            hermitian: self.hermitian && s.im == 0.0,
        }
    }

    pub fn adjoint(&self) -> FockOperator {
        FockOperator { matrix: self.matrix.adjoint(), modes: self.modes, cutoff: self.cutoff, hermitian: self.hermitian }
    }

    /// Tensor product, `self` being the slower index.
    pub fn kron(&self, other: &FockOperator) -> Result<FockOperator> {
        if self.cutoff != other.cutoff {
            return Err(Error::Invalid("tensor product of operators with different cutoffs".into()));
        }
        Ok(FockOperator {
            matrix: self.matrix.kronecker(&other.matrix),
            modes: self.modes + other.modes,
            cutoff: self.cutoff,
            hermitian: self.hermitian && other.hermitian,
        })
    }

    /// Trace out every mode not listed in `keep` (mode positions, ascending).
    pub fn partial_trace(&self, keep: &[usize]) -> Result<FockOperator> {
        let k = self.modes;
        if keep.windows(2).any(|w| w[0] >= w[1]) || keep.iter().any(|&m| m >= k) || keep.is_empty() {
            return Err(Error::Invalid(format!("bad mode selection {keep:?} for {k} modes")));
        }
        let d = self.cutoff.levels();
        let traced: Vec<usize> = (0..k).filter(|m| !keep.contains(m)).collect();
        let kd = self.cutoff.dim(keep.len())?;
        let td = self.cutoff.dim(traced.len())?;
        let compose = |kept_idx: usize, traced_idx: usize| -> usize {
            let mut digits = vec![0usize; k];
            let mut x = kept_idx;
            for &m in keep.iter().rev() {
                digits[m] = x % d;
                x /= d;
            }
            let mut y = traced_idx;
            for &m in traced.iter().rev() {
                digits[m] = y % d;
                y /= d;
            }
            digits.iter().fold(0, |acc, &g| acc * d + g)
        };
        let mut out = CMatrix::zeros(kd, kd);
        for t in 0..td {
            let rows: Vec<usize> = (0..kd).map(|i| compose(i, t)).collect();
            for i in 0..kd {
                for j in 0..kd {
                    out[(i, j)] += self.matrix[(rows[i], rows[j])];
                }
            }
        }
        Ok(FockOperator { matrix: out, modes: keep.len(), cutoff: self.cutoff, hermitian: self.hermitian })
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        let eig = linalg::hermitian_eigen(&self.matrix)?;
        Ok(eig.values.first().copied().unwrap_or(0.0))
    }
}

/// A state whose truncation may have lost `trace_deficit` of its mass.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    op: FockOperator,
    trace_deficit: f64,
}

impl DensityOperator {
    /// Checks Hermiticity, the trace window and eigenvalues >= -1e-10.
    pub fn new(op: FockOperator, trace_deficit: f64) -> Result<Self> {
        let state = DensityOperator::from_parts(op, trace_deficit)?;
        let min = state.op.min_eigenvalue()?;
        if min < -1e-10 {
            return Err(Error::Invalid(format!("state has a negative eigenvalue {min:e}")));
        }
        Ok(state)
    }

    /// As `new` but without the eigenvalue check.
    pub(crate) fn from_parts(op: FockOperator, trace_deficit: f64) -> Result<Self> {
        DensityOperator::from_parts_with_excess(op, trace_deficit, 0.0)
    }

    /// As `from_parts`, also allowing the trace to exceed 1 by `excess`.
    pub(crate) fn from_parts_with_excess(op: FockOperator, trace_deficit: f64, excess: f64) -> Result<Self> {
        if !(trace_deficit.is_finite() && trace_deficit >= 0.0) {
            return Err(Error::Invalid(format!("trace deficit {trace_deficit} must be nonnegative")));
        }
        let op = op.mark_hermitian()?;
        let tr = op.trace();
        if tr.re > 1.0 + excess + 1e-10 || tr.re < 1.0 - trace_deficit - 1e-10 || tr.im.abs() > 1e-10 {
            return Err(Error::Invalid(format!(
                "trace {} is outside [1 - {trace_deficit:e} - 1e-10, 1 + {excess:e} + 1e-10]",
                tr.re
            )));
        }
        Ok(DensityOperator { op, trace_deficit })
    }

    pub fn op(&self) -> &FockOperator {
        &self.op
    }

    pub fn matrix(&self) -> &CMatrix {
        self.op.matrix()
    }

    pub fn trace_deficit(&self) -> f64 {
        self.trace_deficit
    }

    pub fn cutoff(&self) -> Cutoff {
        self.op.cutoff()
    }

    pub fn modes(&self) -> usize {
        self.op.modes()
    }

    pub fn trace(&self) -> f64 {
        self.op.trace().re
    }

    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityOperator> {
        Ok(DensityOperator { op: self.op.partial_trace(keep)?, trace_deficit: self.trace_deficit })
    }
}

/// Truncated coherent state e^{-|alpha|^2/2} sum alpha^n / sqrt(n!) |n>.
pub fn coherent_ket(alpha: Complex64, cutoff: Cutoff) -> FockVector {
    let d = cutoff.levels();
    let mut amps = CVector::zeros(d);
    let mut c = Complex64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    for n in 0..d {
        amps[n] = c;
        c = c * alpha / ((n + 1) as f64).sqrt();
    }
    FockVector { amplitudes: amps, modes: 1, cutoff }
}

/// Two-mode squeezed vacuum sqrt(1 - lambda^2) sum (-lambda)^n |n n>.
pub fn tmsv_ket(lambda: f64, cutoff: Cutoff) -> Result<FockVector> {
    check_lambda("lambda", lambda)?;
    let d = cutoff.levels();
    let mut amps = CVector::zeros(d * d);
    let norm = (1.0 - lambda * lambda).sqrt();
    for n in 0..d {
        amps[n * d + n] = Complex64::new(norm * (-lambda).powi(n as i32), 0.0);
    }
    FockVector::new(amps, 2, cutoff)
}

/// Thermal state with weights chi(lambda, m).
pub fn thermal_state(lambda: f64, cutoff: Cutoff) -> Result<DensityOperator> {
    check_lambda("lambda", lambda)?;
    let d = cutoff.levels();
    let weights: Vec<f64> = (0..d).map(|m| chi_unchecked(lambda, m)).collect();
    let op = FockOperator::diagonal(&weights, cutoff)?;
    Ok(DensityOperator { op, trace_deficit: lambda.powi(2 * d as i32) })
}

pub fn trace_norm(a: &FockOperator) -> Result<f64> {
    linalg::trace_norm(a.matrix())
}

const PSD_TOL: f64 = 1e-9;

/// Tr[sqrt(sqrt(sigma) rho sqrt(sigma))]^2
pub fn fidelity(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    if rho.modes() != sigma.modes() || rho.cutoff() != sigma.cutoff() {
        return Err(Error::Invalid("fidelity of states on different spaces".into()));
    }
    let eig_s = linalg::hermitian_eigen(sigma.matrix())?;
    if eig_s.values.first().is_some_and(|&v| v < -PSD_TOL) {
        return Err(Error::Invalid(format!("second state has eigenvalue {:e}", eig_s.values[0])));
    }
    let eig_r = linalg::hermitian_eigen(rho.matrix())?;
    if eig_r.values.first().is_some_and(|&v| v < -PSD_TOL) {
        return Err(Error::Invalid(format!("first state has eigenvalue {:e}", eig_r.values[0])));
    }
    // F = ||sqrt(rho) sqrt(sigma)||_1^2; singular values keep small terms accurate,
    // and roundoff-level eigenvalues are dropped before the square root
    let root_of = |eig: &linalg::HermitianEigen| {
        let floor = roundoff_floor(&eig.values);
        linalg::hermitian_function(eig, |v| if v > floor { v.sqrt() } else { 0.0 })
    };
    let product = root_of(&eig_r) * root_of(&eig_s);
    let root: f64 = product.svd(false, false).singular_values.iter().sum();
    if !root.is_finite() {
        return Err(Error::Numerical("fidelity is not finite".into()));
    }
    Ok(root * root)
}

fn roundoff_floor(values: &[f64]) -> f64 {
    let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    2.0 * f64::EPSILON * max
}

/// <psi|rho|psi>, the fidelity against a pure state.
pub fn fidelity_pure(psi: &FockVector, rho: &DensityOperator) -> Result<f64> {
    if psi.modes() != rho.modes() || psi.cutoff() != rho.cutoff() {
        return Err(Error::Invalid("fidelity of states on different spaces".into()));
    }
    let v = psi.amplitudes();
    Ok((v.adjoint() * rho.matrix() * v)[(0, 0)].re)
}

pub fn mean_photon_number(rho: &DensityOperator) -> Result<f64> {
    if rho.modes() != 1 {
        return Err(Error::Invalid("mean photon number needs a single-mode state".into()));
    }
    let m = rho.matrix();
    Ok((0..m.nrows()).map(|n| n as f64 * m[(n, n)].re).sum())
}
