use std::cmp::Ordering;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::arrangement::Arrangements;
use super::multiset::Multiset;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, CMatrix, CVector};

const CLUSTER_RTOL: f64 = 1e-9;
const PHASE_TOL: f64 = 1e-8;
const ORTHO_TOL: f64 = 1e-10;

fn check_lambda_y(ly: f64) -> Result<()> {
    if ly.is_finite() && ly > 0.0 && ly < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("lambda_y = {ly} must lie in (0, 1)")))
    }
}

/// Action of rho_y on the coefficient vectors of one multiset sector.
pub fn sector_matrix(multiset: &Multiset, lambda_y: f64) -> Result<DMatrix<f64>> {
    check_lambda_y(lambda_y)?;
    Ok(sector_matrix_for(&Arrangements::new(multiset), lambda_y))
}

pub(crate) fn sector_matrix_for(arr: &Arrangements, ly: f64) -> DMatrix<f64> {
    let n = arr.len();
    let mut h = DMatrix::<f64>::identity(n, n);
    let c = 1.0 - ly * ly;
    for v in arr.multiset().unique() {
        let w = c * ly.powi(2 * v as i32);
        for i in 0..n {
            for &j in arr.swaps_with(i, v) {
                h[(i, j)] += w;
            }
        }
    }
    h
}

/// Orthonormal eigenbasis of one multiset sector.
#[derive(Debug, Clone)]
pub struct SectorBasis {
    arrangements: Arrangements,
    etas: Vec<CVector>,
    xi: Vec<f64>,
    rotation_sector: Vec<Option<usize>>,
}

impl SectorBasis {
    /// Validates orthonormality, completeness and positivity.
    pub fn new(arrangements: Arrangements, etas: Vec<CVector>, xi: Vec<f64>) -> Result<Self> {
        let n = arrangements.len();
        let rotation_sector = vec![None; etas.len()];
        let basis = SectorBasis { arrangements, etas, xi, rotation_sector };
        if basis.etas.len() != n || basis.xi.len() != n || basis.etas.iter().any(|e| e.len() != n) {
            return Err(Error::Invalid(format!("sector basis needs {n} vectors of length {n}")));
        }
        if let Some(&x) = basis.xi.iter().find(|&&x| !(x > 0.0)) {
            return Err(Error::Numerical(format!("sector eigenvalue {x} is not positive")));
        }
        let err = basis.orthonormality_error();
        if err > ORTHO_TOL {
            return Err(Error::Numerical(format!("sector basis is not orthonormal (error {err:.3e})")));
        }
        Ok(basis)
    }

    pub fn arrangements(&self) -> &Arrangements {
        &self.arrangements
    }

    pub fn multiset(&self) -> &Multiset {
        self.arrangements.multiset()
    }

    pub fn etas(&self) -> &[CVector] {
        &self.etas
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.xi
    }

    /// Rotation label k of each vector when built from the k-sector decomposition.
    pub fn rotation_sectors(&self) -> &[Option<usize>] {
        &self.rotation_sector
    }

    pub fn len(&self) -> usize {
        self.etas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.etas.is_empty()
    }

    /// max |<eta_i, eta_j> - delta_ij|.
    pub fn orthonormality_error(&self) -> f64 {
        let mut err: f64 = 0.0;
        for (i, a) in self.etas.iter().enumerate() {
            for (j, b) in self.etas.iter().enumerate() {
                let ip = a.dotc(b);
                let target = if i == j { 1.0 } else { 0.0 };
                err = err.max((ip - Complex64::new(target, 0.0)).norm());
            }
        }
        err
    }

    /// sum_i Xi_i eta_i eta_i^dagger.
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.arrangements.len();
        let mut m = CMatrix::zeros(n, n);
        for (eta, &x) in self.etas.iter().zip(&self.xi) {
            m += eta * eta.adjoint() * Complex64::new(x, 0.0);
        }
        m
    }

    /// Groups of indices whose eigenvalues agree to relative 1e-9.
    pub fn degenerate_clusters(&self) -> Vec<Vec<usize>> {
        let mut order: Vec<usize> = (0..self.xi.len()).collect();
        order.sort_by(|&a, &b| self.xi[b].total_cmp(&self.xi[a]));
        let mut clusters: Vec<Vec<usize>> = Vec::new();
        for i in order {
            match clusters.last_mut() {
                Some(c) if same_value(self.xi[c[0]], self.xi[i]) => c.push(i),
                _ => clusters.push(vec![i]),
            }
        }
        clusters
    }

    /// Replaces the vectors of `cluster` by `unitary` (columns index new vectors) applied to them.
    pub fn rotate_cluster(&self, cluster: &[usize], unitary: &CMatrix) -> Result<SectorBasis> {
        let k = cluster.len();
        if unitary.nrows() != k || unitary.ncols() != k {
            return Err(Error::Invalid(format!("cluster of size {k} needs a {k}x{k} unitary")));
        }
        let mut etas = self.etas.clone();
        for (col, &target) in cluster.iter().enumerate() {
            let mut v = CVector::zeros(self.arrangements.len());
            for (row, &src) in cluster.iter().enumerate() {
                v += &self.etas[src] * unitary[(row, col)];
            }
            etas[target] = v;
        }
        SectorBasis::new(self.arrangements.clone(), etas, self.xi.clone())
    }
}

fn same_value(a: f64, b: f64) -> bool {
    (a - b).abs() <= CLUSTER_RTOL * a.abs().max(b.abs()).max(1.0)
}

fn root_of_unity(n: usize, p: usize) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * (p % n) as f64 / n as f64)
}

fn fix_phase(v: &mut CVector) {
    if let Some(c) = v.iter().find(|c| c.norm() > PHASE_TOL).copied() {
        let ph = c.conj() / c.norm();
        v.iter_mut().for_each(|x| *x *= ph);
    }
}

/// Deterministic orthonormal basis of the span of `vectors` via Gram-Schmidt on its projector.
fn canonical_span(vectors: &[CVector]) -> Vec<CVector> {
    let n = vectors[0].len();
    let mut proj = CMatrix::zeros(n, n);
    for v in vectors {
        proj += v * v.adjoint();
    }
    let mut out: Vec<CVector> = Vec::new();
    for j in 0..n {
        if out.len() == vectors.len() {
            break;
        }
        let mut c: CVector = proj.column(j).into_owned();
        for q in &out {
            let ip = q.dotc(&c);
            c -= q * ip;
        }
        let nrm = c.norm();
        if nrm > 1e-6 {
            out.push(c / Complex64::new(nrm, 0.0));
        }
    }
    out
}

fn lex_desc(a: &CVector, b: &CVector) -> Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        for (p, q) in [(x.re, y.re), (x.im, y.im)] {
            if (p - q).abs() > 1e-10 {
                return q.total_cmp(&p);
            }
        }
    }
    Ordering::Equal
}

/// Eigenbasis from the rotation k-sector decomposition, ordered by descending Xi.
pub fn eta_basis(multiset: &Multiset, lambda_y: f64) -> Result<SectorBasis> {
    check_lambda_y(lambda_y)?;
    eta_basis_for(Arrangements::new(multiset), lambda_y)
}

pub(crate) fn eta_basis_for(arr: Arrangements, ly: f64) -> Result<SectorBasis> {
    let n = arr.multiset().ports();
    let size = arr.len();
    let tilde = arr.tilde().to_vec();
    let h = sector_matrix_for(&arr, ly).map(|x| Complex64::new(x, 0.0));
    let norm = Complex64::new(1.0 / (n as f64).sqrt(), 0.0);

    let mut entries: Vec<(f64, CVector, usize)> = Vec::with_capacity(size);
    for k in 0..n {
        // columns: rotation-Fourier vectors of each marker-first arrangement
        let mut u = CMatrix::zeros(size, tilde.len());
        for (c, &t) in tilde.iter().enumerate() {
            for j in 0..n {
                u[(arr.rotate(t, j), c)] = root_of_unity(n, j * k) * norm;
            }
        }
        let block = u.adjoint() * &h * &u;
        let eig = hermitian_eigen(&block)?;
        let mut i = 0;
        while i < eig.values.len() {
            let mut j = i + 1;
            while j < eig.values.len() && same_value(eig.values[i], eig.values[j]) {
                j += 1;
            }
            let raw: Vec<CVector> = (i..j).map(|c| eig.vectors.column(c).into_owned()).collect();
            let coeffs = if raw.len() == 1 { raw } else { canonical_span(&raw) };
            if coeffs.len() != j - i {
                return Err(Error::Numerical("degenerate cluster lost rank during orthogonalisation".into()));
            }
            let xi = eig.values[i..j].iter().sum::<f64>() / (j - i) as f64;
            for c in coeffs {
                let mut eta = &u * c;
                fix_phase(&mut eta);
                entries.push((xi, eta, k));
            }
            i = j;
        }
    }
    entries.sort_by(|a, b| {
        if same_value(a.0, b.0) {
            lex_desc(&a.1, &b.1)
        } else {
            b.0.total_cmp(&a.0)
        }
    });
    let xi = entries.iter().map(|e| e.0).collect();
    let ks = entries.iter().map(|e| Some(e.2)).collect();
    let etas = entries.into_iter().map(|e| e.1).collect();
    let mut basis = SectorBasis::new(arr, etas, xi)?;
    basis.rotation_sector = ks;
    Ok(basis)
}
