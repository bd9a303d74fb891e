use nalgebra::DMatrix;
use num_complex::Complex64;

use super::arrangement::Arrangements;
use super::multiset::Multiset;
use super::sector::{sector_matrix_for, SectorBasis};
use crate::error::Result;
use crate::linalg::{hermiticity_error, symmetric_eigen, CMatrix};

/// Gamma(M) indexed by canonical arrangement order, first index for the
/// bra-side (b) arrangement and second for the ket-side (a) arrangement.
#[derive(Debug, Clone)]
pub struct GammaMatrix {
    matrix: CMatrix,
}

impl GammaMatrix {
    pub fn new(matrix: CMatrix) -> Self {
        GammaMatrix { matrix }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.matrix[(i, j)]
    }

    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_error(&self.matrix)
    }

    /// Real part; the channel only uses Re Gamma, which is symmetric.
    pub fn real(&self) -> DMatrix<f64> {
        self.matrix.map(|c| c.re)
    }
}

/// Overlap s_ab = sum over marker-first arrangements of conj(eta_a) eta_b.
fn tilde_overlap(basis: &SectorBasis, a: usize, b: usize) -> Complex64 {
    let ea = &basis.etas()[a];
    let eb = &basis.etas()[b];
    basis.arrangements().tilde().iter().map(|&t| ea[t].conj() * eb[t]).sum()
}

fn assemble(basis: &SectorBasis, coeff: impl Fn(usize, usize) -> Complex64) -> GammaMatrix {
    let n = basis.arrangements().len();
    let xi = basis.eigenvalues();
    let mut m = CMatrix::zeros(n, n);
    for a in 0..basis.len() {
        for b in 0..basis.len() {
            let c = coeff(a, b);
            if c == Complex64::new(0.0, 0.0) {
                continue;
            }
            let s = c / (xi[a] * xi[b]).sqrt();
            m += &basis.etas()[a] * basis.etas()[b].adjoint() * s;
        }
    }
    GammaMatrix { matrix: m }
}

/// Gamma with weights s_ab - delta_ab / N. Equal to the off-diagonal sum
/// whenever every s_aa = 1/N (true for rotation-sector bases) and independent
/// of the choice of basis inside degenerate eigenspaces.
pub fn gamma(basis: &SectorBasis) -> GammaMatrix {
    let inv_n = 1.0 / basis.multiset().ports() as f64;
    assemble(basis, |a, b| {
        let s = tilde_overlap(basis, a, b);
        if a == b {
            s - inv_n
        } else {
            s
        }
    })
}

/// Off-diagonal sum over alpha != beta only.
pub fn gamma_printed(basis: &SectorBasis) -> GammaMatrix {
    assemble(basis, |a, b| if a == b { Complex64::new(0.0, 0.0) } else { tilde_overlap(basis, a, b) })
}

/// H^{-1/2} P H^{-1/2} - H^{-1} / N, with P the projector onto marker-first arrangements.
pub fn gamma_direct(multiset: &Multiset, lambda_y: f64) -> Result<GammaMatrix> {
    let arr = Arrangements::new(multiset);
    let h = sector_matrix_for(&arr, lambda_y);
    let eig = symmetric_eigen(&h)?;
    let n = arr.len();
    let inv_sqrt = &eig.vectors * DMatrix::from_diagonal(&eig.values.iter().map(|x| x.powf(-0.5)).collect::<Vec<_>>().into()) * eig.vectors.transpose();
    let inv = &eig.vectors * DMatrix::from_diagonal(&eig.values.iter().map(|x| 1.0 / x).collect::<Vec<_>>().into()) * eig.vectors.transpose();
    let mut p = DMatrix::<f64>::zeros(n, n);
    for &t in arr.tilde() {
        p[(t, t)] = 1.0;
    }
    let g = &inv_sqrt * p * &inv_sqrt - inv / multiset.ports() as f64;
    Ok(GammaMatrix { matrix: g.map(|x| Complex64::new(x, 0.0)) })
}
