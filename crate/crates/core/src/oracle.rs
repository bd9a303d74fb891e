//! Brute-force protocol construction on modes (C, A_1, ..., A_N).
//!
//! Everything here is built from the protocol objects directly: the port
//! projectors sigma_i, their sum rho, the square-root measurement, and the
//! reduced resource with B_2..B_N already traced out. Dense operators are
//! available for small cutoffs; the channel itself is evaluated block by block
//! on the connected components of rho, each inside one sector of the charge
//! sum(A) - C that rho and every sigma_i preserve.

use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{chi_unchecked, Cutoff, FockOperator};
use crate::linalg::{symmetric_eigen, CMatrix};
use crate::nport::NumberElementChannel;
use crate::two_port::{measurement_weight, ChannelParams};

pub const DEFAULT_KERNEL_TOL: f64 = 1e-10;
/// Eigenvalues of rho between the kernel tolerance and this (relative) level are reported.
pub const SUSPECT_BAND: f64 = 1e-6;
pub const MEM_BUDGET_ENV: &str = "CVPBT_MEM_BUDGET_MB";
pub const DEFAULT_BUDGET_MB: u64 = 2048;

/// Budget from `CVPBT_MEM_BUDGET_MB`, or the default when unset.
pub fn memory_budget_mb() -> Result<u64> {
    match std::env::var(MEM_BUDGET_ENV) {
        Ok(v) => v
            .trim()
            .parse::<u64>()
            .map_err(|_| Error::Invalid(format!("{MEM_BUDGET_ENV}={v:?} is not a whole number of megabytes"))),
        Err(_) => Ok(DEFAULT_BUDGET_MB),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedProtocol {
    pub params: ChannelParams,
    pub cutoff: Cutoff,
    pub kernel_tol: f64,
    budget_mb: u64,
}

impl TruncatedProtocol {
    pub fn new(params: ChannelParams, cutoff: Cutoff) -> Result<Self> {
        Self::with_options(params, cutoff, DEFAULT_KERNEL_TOL, memory_budget_mb()?)
    }

    pub fn with_options(params: ChannelParams, cutoff: Cutoff, kernel_tol: f64, budget_mb: u64) -> Result<Self> {
        if !(kernel_tol > 0.0 && kernel_tol <= 1e-6) {
            return Err(Error::Domain(format!("kernel_tol = {kernel_tol} must lie in (0, 1e-6]")));
        }
        let proto = TruncatedProtocol { params, cutoff, kernel_tol, budget_mb };
        proto.check_budget(proto.block_bytes()?)?;
        Ok(proto)
    }

    pub fn ports(&self) -> usize {
        self.params.ports
    }

    pub fn budget_mb(&self) -> u64 {
        self.budget_mb
    }

    /// Modes C, A_1..A_N.
    pub fn modes(&self) -> usize {
        self.params.ports + 1
    }

    pub fn dim(&self) -> Result<usize> {
        self.cutoff.dim(self.modes())
    }

    /// Bytes for the block route: index tables plus three real matrices per block.
    pub fn block_bytes(&self) -> Result<u64> {
        let dim = self.dim()? as u64;
        let index_bytes = 48 * dim;
        self.check_budget(index_bytes)?;
        let (states, _) = components(self)?;
        Ok(states.iter().map(|s| 3 * 8 * (s.len() as u64).pow(2)).sum::<u64>() + index_bytes)
    }

    /// Bytes for one dense complex operator on `modes` modes.
    pub fn dense_bytes(&self, modes: usize) -> Result<u64> {
        let dim = self.cutoff.dim(modes)? as u64;
        Ok(dim.saturating_mul(dim).saturating_mul(16))
    }

    fn check_budget(&self, bytes: u64) -> Result<()> {
        let required_mb = bytes.div_ceil(1 << 20);
        if required_mb > self.budget_mb {
            Err(Error::Budget { required_mb, budget_mb: self.budget_mb })
        } else {
            Ok(())
        }
    }

    fn check_dense(&self, modes: usize, copies: u64) -> Result<()> {
        self.check_budget(self.dense_bytes(modes)?.saturating_mul(copies))
    }
}

fn digits(mut idx: usize, modes: usize, d: usize) -> Vec<usize> {
    let mut out = vec![0; modes];
    for k in (0..modes).rev() {
        out[k] = idx % d;
        idx /= d;
    }
    out
}

fn flat(digits: &[usize], d: usize) -> usize {
    digits.iter().fold(0, |acc, &g| acc * d + g)
}

/// Connected components of the nonzero pattern of rho, each inside one sector
/// of the charge sum(A) - C. Returns the members of each and global -> (block, position).
fn components(proto: &TruncatedProtocol) -> Result<(Vec<Vec<usize>>, Vec<(usize, usize)>)> {
    let (d, modes) = (proto.cutoff.levels(), proto.modes());
    let dim = proto.dim()?;
    let mut parent: Vec<usize> = (0..dim).collect();
    fn root(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for x in 0..dim {
        let dx = digits(x, modes, d);
        for i in 1..=proto.ports() {
            sigma_column(i, &dx, proto.params.lambda_y, d, |t, _| {
                let (a, b) = (root(&mut parent, x), root(&mut parent, flat(t, d)));
                parent[a.max(b)] = a.min(b);
            });
        }
    }
    let mut id_of_root = vec![usize::MAX; dim];
    let mut states: Vec<Vec<usize>> = Vec::new();
    let mut local = vec![(0, 0); dim];
    for idx in 0..dim {
        let r = root(&mut parent, idx);
        if id_of_root[r] == usize::MAX {
            id_of_root[r] = states.len();
            states.push(Vec::new());
        }
        let k = id_of_root[r];
        local[idx] = (k, states[k].len());
        states[k].push(idx);
    }
    Ok((states, local))
}

fn tmsv_amp(lambda: f64, s: usize) -> f64 {
    (1.0 - lambda * lambda).sqrt() * (-lambda).powi(s as i32)
}

/// Calls `f(target, value)` for each nonzero <target| sigma_i |x>.
fn sigma_column(i: usize, x: &[usize], ly: f64, d: usize, mut f: impl FnMut(&[usize], f64)) {
    if x[0] != x[i] {
        return;
    }
    let base = tmsv_amp(ly, x[0]);
    let mut t = x.to_vec();
    for s in 0..d {
        t[0] = s;
        t[i] = s;
        f(&t, tmsv_amp(ly, s) * base);
    }
}

fn to_operator(m: DMatrix<f64>, modes: usize, cutoff: Cutoff) -> Result<FockOperator> {
    FockOperator::new(m.map(|x| Complex64::new(x, 0.0)), modes, cutoff)
}

/// sigma_i: truncated TMSV projector on (A_i, C), identity elsewhere. Ports count from 1.
pub fn build_sigma(i: usize, proto: &TruncatedProtocol) -> Result<FockOperator> {
    let n = proto.ports();
    if i == 0 || i > n {
        return Err(Error::Invalid(format!("port {i} must lie in 1..={n}")));
    }
    proto.check_dense(proto.modes(), 2)?;
    let (d, modes) = (proto.cutoff.levels(), proto.modes());
    let dim = proto.dim()?;
    let mut m = DMatrix::<f64>::zeros(dim, dim);
    for x in 0..dim {
        sigma_column(i, &digits(x, modes, d), proto.params.lambda_y, d, |t, v| m[(flat(t, d), x)] += v);
    }
    to_operator(m, modes, proto.cutoff)
}

pub fn build_rho(proto: &TruncatedProtocol) -> Result<FockOperator> {
    proto.check_dense(proto.modes(), 2)?;
    let (d, modes) = (proto.cutoff.levels(), proto.modes());
    let dim = proto.dim()?;
    let mut m = DMatrix::<f64>::zeros(dim, dim);
    for x in 0..dim {
        let dx = digits(x, modes, d);
        for i in 1..=proto.ports() {
            sigma_column(i, &dx, proto.params.lambda_y, d, |t, v| m[(flat(t, d), x)] += v);
        }
    }
    to_operator(m, modes, proto.cutoff)
}

/// Eigenvalue classification of rho relative to its largest eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SpectrumCounts {
    pub support: usize,
    /// Support eigenvalues at or below the suspect level.
    pub suspect: usize,
    pub kernel: usize,
}

struct Block {
    states: Vec<usize>,
    vectors: DMatrix<f64>,
    values: Vec<f64>,
}

/// rho diagonalised on each connected block, with M^(1) precomputed.
pub struct ProtocolBlocks {
    proto: TruncatedProtocol,
    blocks: Vec<Block>,
    povm1: Vec<DMatrix<f64>>,
    /// Global index -> (block, position).
    local: Vec<(usize, usize)>,
    scale: f64,
    counts: SpectrumCounts,
}

impl ProtocolBlocks {
    pub fn new(proto: &TruncatedProtocol) -> Result<Self> {
        let (d, modes) = (proto.cutoff.levels(), proto.modes());
        let ly = proto.params.lambda_y;
        let (states, local) = components(proto)?;
        let mut blocks = Vec::with_capacity(states.len());
        for st in states {
            let n = st.len();
            let mut rho = DMatrix::<f64>::zeros(n, n);
            for (c, &x) in st.iter().enumerate() {
                let dx = digits(x, modes, d);
                for i in 1..=proto.ports() {
                    sigma_column(i, &dx, ly, d, |t, v| rho[(local[flat(t, d)].1, c)] += v);
                }
            }
            let eig = symmetric_eigen(&rho)?;
            blocks.push(Block { states: st, vectors: eig.vectors, values: eig.values });
        }
        let scale = blocks.iter().flat_map(|b| b.values.iter().copied()).fold(0.0, f64::max);
        if scale <= 0.0 {
            return Err(Error::Numerical("rho vanishes on the truncated space".into()));
        }
        let mut out = ProtocolBlocks {
            proto: *proto,
            blocks,
            povm1: Vec::new(),
            local,
            scale,
            counts: SpectrumCounts { support: 0, suspect: 0, kernel: 0 },
        };
        let mut counts = out.counts;
        for b in &out.blocks {
            for &v in &b.values {
                if v <= proto.kernel_tol * scale {
                    counts.kernel += 1;
                } else {
                    counts.support += 1;
                    if v <= SUSPECT_BAND * scale {
                        counts.suspect += 1;
                    }
                }
            }
        }
        out.counts = counts;
        out.povm1 = (0..out.blocks.len()).map(|k| out.povm_block(1, k)).collect();
        Ok(out)
    }

    pub fn counts(&self) -> SpectrumCounts {
        self.counts
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn largest_block(&self) -> usize {
        self.blocks.iter().map(|b| b.states.len()).max().unwrap_or(0)
    }

    /// rho^{-1/2} sigma_i rho^{-1/2} + kernel / N on block `k`.
    fn povm_block(&self, i: usize, k: usize) -> DMatrix<f64> {
        let b = &self.blocks[k];
        let (d, modes) = (self.proto.cutoff.levels(), self.proto.modes());
        let n = b.states.len();
        let tol = self.proto.kernel_tol * self.scale;
        let mut sigma = DMatrix::<f64>::zeros(n, n);
        for (c, &x) in b.states.iter().enumerate() {
            sigma_column(i, &digits(x, modes, d), self.proto.params.lambda_y, d, |t, v| sigma[(self.local[flat(t, d)].1, c)] += v);
        }
        let mut scaled = b.vectors.clone();
        let mut kernel = b.vectors.clone();
        for (col, &v) in b.values.iter().enumerate() {
            let (f, g) = if v > tol { (v.powf(-0.5), 0.0) } else { (0.0, 1.0) };
            scaled.column_mut(col).scale_mut(f);
            kernel.column_mut(col).scale_mut(g);
        }
        let inv_sqrt = &scaled * b.vectors.transpose();
        &inv_sqrt * sigma * &inv_sqrt + &kernel * kernel.transpose() / self.proto.ports() as f64
    }

    fn assemble(&self, block_op: impl Fn(usize) -> DMatrix<f64>) -> Result<FockOperator> {
        self.proto.check_dense(self.proto.modes(), 2)?;
        let dim = self.proto.dim()?;
        let mut m = DMatrix::<f64>::zeros(dim, dim);
        for (k, b) in self.blocks.iter().enumerate() {
            let mk = block_op(k);
            for (r, &gr) in b.states.iter().enumerate() {
                for (c, &gc) in b.states.iter().enumerate() {
                    m[(gr, gc)] = mk[(r, c)];
                }
            }
        }
        to_operator(m, self.proto.modes(), self.proto.cutoff)
    }

    /// Dense M^(i), ports from 1.
    pub fn povm_element(&self, i: usize) -> Result<FockOperator> {
        let n = self.proto.ports();
        if i == 0 || i > n {
            return Err(Error::Invalid(format!("port {i} must lie in 1..={n}")));
        }
        if i == 1 {
            self.assemble(|k| self.povm1[k].clone())
        } else {
            self.assemble(|k| self.povm_block(i, k))
        }
    }

    fn m1(&self, row: usize, col: usize) -> f64 {
        let (kr, r) = self.local[row];
        let (kc, c) = self.local[col];
        if kr == kc {
            self.povm1[kr][(r, c)]
        } else {
            0.0
        }
    }

    /// N (1 - lx^2) (-lx)^{p+q} sum_r prod chi_{x,r_i} <b,q,r| M^(1) |a,p,r>, output on B_1.
    pub fn channel_element(&self, a: usize, b: usize) -> Result<FockOperator> {
        let d = self.proto.cutoff.levels();
        for i in [a, b] {
            if i >= d {
                return Err(Error::Index { index: i, levels: d });
            }
        }
        let n = self.proto.ports();
        let lx = self.proto.params.lambda_x;
        let rest = d.pow((n - 1) as u32);
        let weights: Vec<f64> = (0..rest)
            .map(|r| digits(r, n - 1, d).iter().map(|&ri| chi_unchecked(lx, ri)).product())
            .collect();
        let mut out = CMatrix::zeros(d, d);
        for p in 0..d {
            // charge conservation forces q - b = p - a
            let Some(q) = (p + b).checked_sub(a).filter(|&q| q < d) else { continue };
            let mut acc = 0.0;
            let mut row = vec![0usize; n + 1];
            let mut col = vec![0usize; n + 1];
            (row[0], row[1], col[0], col[1]) = (b, q, a, p);
            for (r, &w) in weights.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let dr = digits(r, n - 1, d);
                row[2..].copy_from_slice(&dr);
                col[2..].copy_from_slice(&dr);
                acc += w * self.m1(flat(&row, d), flat(&col, d));
            }
            let pref = n as f64 * (1.0 - lx * lx) * (-lx).powi((p + q) as i32);
            out[(p, q)] = Complex64::new(pref * acc, 0.0);
        }
        FockOperator::new(out, 1, self.proto.cutoff)
    }
}

/// Dense M^(1).
pub fn build_povm_element(proto: &TruncatedProtocol) -> Result<FockOperator> {
    ProtocolBlocks::new(proto)?.povm_element(1)
}

/// M^(1) for N = 2 written out directly:
/// I/2 + (1-ly^2)/2 sum_{p,q} (-ly)^{p+q} |p><q|_C (x) sum_m w_m (|pm><qm| - |mp><mq|).
pub fn m1_explicit(proto: &TruncatedProtocol) -> Result<FockOperator> {
    if proto.ports() != 2 {
        return Err(Error::Invalid(format!("explicit M1 exists for N = 2 only, got {}", proto.ports())));
    }
    proto.check_dense(3, 2)?;
    let d = proto.cutoff.levels();
    let ly = proto.params.lambda_y;
    let dim = d * d * d;
    let mut m = DMatrix::<f64>::identity(dim, dim) * 0.5;
    for p in 0..d {
        for q in 0..d {
            let c = 0.5 * (1.0 - ly * ly) * (-ly).powi((p + q) as i32);
            for mm in 0..d {
                let w = measurement_weight(ly, mm);
                m[(flat(&[p, p, mm], d), flat(&[q, q, mm], d))] += c * w;
                m[(flat(&[p, mm, p], d), flat(&[q, mm, q], d))] -= c * w;
            }
        }
    }
    to_operator(m, 3, proto.cutoff)
}

/// |a><b|_C (x) (1 - lx^2) sum (-lx)^{p+q} |pp><qq|_{A_1 B_1} (x) thermal on A_2..A_N,
/// on modes (C, A_1..A_N, B_1).
pub fn reduced_resource(a: usize, b: usize, proto: &TruncatedProtocol) -> Result<FockOperator> {
    let d = proto.cutoff.levels();
    for i in [a, b] {
        if i >= d {
            return Err(Error::Index { index: i, levels: d });
        }
    }
    let n = proto.ports();
    let modes = n + 2;
    proto.check_dense(modes, 2)?;
    let lx = proto.params.lambda_x;
    let dim = proto.cutoff.dim(modes)?;
    let rest = d.pow((n - 1) as u32);
    let mut m = DMatrix::<f64>::zeros(dim, dim);
    for r in 0..rest {
        let dr = digits(r, n - 1, d);
        let w: f64 = dr.iter().map(|&ri| chi_unchecked(lx, ri)).product();
        for p in 0..d {
            for q in 0..d {
                let mut row = vec![a, p];
                row.extend_from_slice(&dr);
                row.push(p);
                let mut col = vec![b, q];
                col.extend_from_slice(&dr);
                col.push(q);
                m[(flat(&row, d), flat(&col, d))] = (1.0 - lx * lx) * (-lx).powi((p + q) as i32) * w;
            }
        }
    }
    let mut op = to_operator(m, modes, proto.cutoff)?;
    if a == b {
        op = op.mark_hermitian()?;
    }
    Ok(op)
}

/// Oracle value of E[|a><b|] on B_1.
pub fn brute_channel_element(a: usize, b: usize, proto: &TruncatedProtocol) -> Result<FockOperator> {
    ProtocolBlocks::new(proto)?.channel_element(a, b)
}

/// N Tr_{C,A}[(M^(1) (x) I_B) reduced_resource] with dense operators throughout.
pub fn brute_channel_element_dense(a: usize, b: usize, proto: &TruncatedProtocol) -> Result<FockOperator> {
    let modes = proto.ports() + 2;
    proto.check_dense(modes, 4)?;
    let m1 = build_povm_element(proto)?;
    let id = FockOperator::identity(1, proto.cutoff)?;
    let prod = m1.kron(&id)?.matrix() * reduced_resource(a, b, proto)?.matrix();
    let op = FockOperator::new(prod, modes, proto.cutoff)?.partial_trace(&[modes - 1])?;
    Ok(op.scale(Complex64::new(proto.ports() as f64, 0.0)))
}

/// Declared oracle/analytic gap on the converged block, N^2 max(lx, ly)^{2D} plus a rounding floor.
pub fn truncation_budget(params: &ChannelParams, cutoff: Cutoff) -> f64 {
    let n = params.ports as f64;
    n * n * params.lambda_x.max(params.lambda_y).powi(2 * cutoff.levels() as i32) + 1e-12
}

#[derive(Debug, Clone, Serialize)]
pub struct ElementDeviation {
    pub a: usize,
    pub b: usize,
    pub max_deviation: f64,
    /// |Tr - 1| of the oracle output, diagonal elements only.
    pub trace_deviation: Option<f64>,
    pub min_eigenvalue: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub build_seconds: f64,
    pub compare_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub ports: usize,
    pub lambda_x: f64,
    pub lambda_y: f64,
    pub cutoff: usize,
    /// Output entries compared have both indices below this.
    pub converged_levels: usize,
    pub total_dim: usize,
    pub block_count: usize,
    pub largest_block: usize,
    pub kernel_tol: f64,
    pub spectrum: SpectrumCounts,
    pub tolerance: f64,
    pub max_deviation: f64,
    pub passed: bool,
    pub elements: Vec<ElementDeviation>,
    pub timing: Timing,
}

/// Compares the oracle with `channel` for all a <= a_max, b <= b_max on the converged block.
pub fn verify(proto: &TruncatedProtocol, channel: &dyn NumberElementChannel, a_max: usize, b_max: usize, tolerance: f64) -> Result<VerifyReport> {
    if channel.params() != &proto.params {
        return Err(Error::Invalid("channel and protocol parameters differ".into()));
    }
    let d = proto.cutoff.levels();
    if a_max >= d || b_max >= d {
        return Err(Error::Index { index: a_max.max(b_max), levels: d });
    }
    let t0 = Instant::now();
    let blocks = ProtocolBlocks::new(proto)?;
    let build_seconds = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let conv = d / 2;
    let mut elements = Vec::new();
    for a in 0..=a_max {
        for b in 0..=b_max {
            let brute = blocks.channel_element(a, b)?;
            let analytic = channel.apply_number_element(a, b, proto.cutoff)?;
            let mut dev: f64 = 0.0;
            for p in 0..conv {
                for q in 0..conv {
                    dev = dev.max((brute.get(p, q) - analytic.op.get(p, q)).norm());
                }
            }
            let (trace_deviation, min_eigenvalue) = if a == b {
                (Some((brute.trace().re - 1.0).abs()), Some(brute.min_eigenvalue()?))
            } else {
                (None, None)
            };
            elements.push(ElementDeviation { a, b, max_deviation: dev, trace_deviation, min_eigenvalue });
        }
    }
    let max_deviation = elements.iter().map(|e| e.max_deviation).fold(0.0, f64::max);
    Ok(VerifyReport {
        ports: proto.ports(),
        lambda_x: proto.params.lambda_x,
        lambda_y: proto.params.lambda_y,
        cutoff: d,
        converged_levels: conv,
        total_dim: proto.dim()?,
        block_count: blocks.block_count(),
        largest_block: blocks.largest_block(),
        kernel_tol: proto.kernel_tol,
        spectrum: blocks.counts(),
        tolerance,
        max_deviation,
        passed: max_deviation <= tolerance,
        elements,
        timing: Timing { build_seconds, compare_seconds: t1.elapsed().as_secs_f64() },
    })
}
