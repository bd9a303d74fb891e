use num_complex::Complex64;
use rayon::prelude::*;

use super::channel::{default_cap, ChannelOutput, NportChannel};
use super::three_port::ThreePortChannel;
use crate::error::{Error, Result};
use crate::fock::{Cutoff, DensityOperator, FockOperator, FockVector};
use crate::linalg::CMatrix;
use crate::two_port::{self, ChannelParams};

/// Anything that maps |a><b| to an output operator on one mode.
pub trait NumberElementChannel: Sync {
    fn params(&self) -> &ChannelParams;
    fn apply_number_element(&self, a: usize, b: usize, cutoff: Cutoff) -> Result<ChannelOutput>;
}

/// Two-port closed form behind the common interface.
#[derive(Debug, Clone, Copy)]
pub struct TwoPortChannel {
    params: ChannelParams,
}

impl TwoPortChannel {
    pub fn new(params: ChannelParams) -> Result<Self> {
        if params.ports != 2 {
            return Err(Error::Invalid(format!("two-port closed form needs N = 2, got {}", params.ports)));
        }
        Ok(TwoPortChannel { params })
    }
}

impl NumberElementChannel for TwoPortChannel {
    fn params(&self) -> &ChannelParams {
        &self.params
    }

    fn apply_number_element(&self, a: usize, b: usize, cutoff: Cutoff) -> Result<ChannelOutput> {
        let op = two_port::apply_number_element(a, b, &self.params, cutoff)?;
        let (_, omega_tail) = two_port::omega(&self.params, two_port::SERIES_TOL)?;
        Ok(ChannelOutput {
            op,
            cap_tail: omega_tail,
            cutoff_tail: if a == b { two_port::number_element_tail(&self.params, cutoff) } else { 0.0 },
            warnings: Vec::new(),
        })
    }
}

impl NumberElementChannel for NportChannel {
    fn params(&self) -> &ChannelParams {
        NportChannel::params(self)
    }

    fn apply_number_element(&self, a: usize, b: usize, cutoff: Cutoff) -> Result<ChannelOutput> {
        NportChannel::apply_number_element(self, a, b, cutoff)
    }
}

impl NumberElementChannel for ThreePortChannel {
    fn params(&self) -> &ChannelParams {
        ThreePortChannel::params(self)
    }

    fn apply_number_element(&self, a: usize, b: usize, cutoff: Cutoff) -> Result<ChannelOutput> {
        ThreePortChannel::apply_number_element(self, a, b, cutoff)
    }
}

/// Closed form for N = 2 and 3, generic sectors otherwise.
pub fn channel_for(params: &ChannelParams, cap: Option<usize>) -> Result<Box<dyn NumberElementChannel>> {
    let cap = cap.unwrap_or_else(|| default_cap(params));
    Ok(match params.ports {
        2 => Box::new(TwoPortChannel::new(*params)?),
        3 => Box::new(ThreePortChannel::new(*params, cap)?),
        _ => Box::new(NportChannel::new(*params, cap)?),
    })
}

/// Output state with truncation bookkeeping.
#[derive(Debug, Clone)]
pub struct StateOutput {
    pub state: DensityOperator,
    pub cap_tail: f64,
    pub warnings: Vec<String>,
}

/// Applies the channel to a single-mode input, or to the first mode of a
/// (signal, idler) input leaving the idler untouched. The output uses
/// `cutoff` on every mode, which must be at least the input cutoff.
pub fn apply_state_with(rho_in: &DensityOperator, channel: &dyn NumberElementChannel, cutoff: Cutoff) -> Result<StateOutput> {
    let herr = rho_in.op().hermiticity_error();
    if herr > 1e-12 {
        return Err(Error::Invalid(format!("input is not Hermitian (error {herr:.3e})")));
    }
    let din = rho_in.cutoff().levels();
    let dout = cutoff.levels();
    if din > dout {
        return Err(Error::Invalid(format!("input cutoff {din} exceeds output cutoff {dout}")));
    }
    let modes = rho_in.modes();
    if modes != 1 && modes != 2 {
        return Err(Error::Invalid(format!("inputs must have one or two modes, got {modes}")));
    }
    let idler = if modes == 2 { din } else { 1 };
    let rin = rho_in.matrix();
    let block = |a: usize, b: usize| -> CMatrix { CMatrix::from_fn(idler, idler, |i, j| rin[(a * idler + i, b * idler + j)]) };

    let pairs: Vec<(usize, usize)> = (0..din)
        .flat_map(|a| (0..din).map(move |b| (a, b)))
        .filter(|&(a, b)| block(a, b).iter().any(|z| z.norm() > 0.0))
        .collect();
    let outs: Vec<((usize, usize), ChannelOutput)> = pairs
        .par_iter()
        .map(|&(a, b)| channel.apply_number_element(a, b, cutoff).map(|o| ((a, b), o)))
        .collect::<Result<Vec<_>>>()?;

    let iout = if modes == 2 { dout } else { 1 };
    let mut m = CMatrix::zeros(dout * iout, dout * iout);
    let mut deficit = rho_in.trace_deficit();
    let mut excess = 0.0;
    let mut warnings = Vec::new();
    let mut cap_tail: f64 = 0.0;
    for ((a, b), out) in &outs {
        let blk = block(*a, *b);
        let e = out.op.matrix();
        for i in 0..idler {
            for j in 0..idler {
                let c = blk[(i, j)];
                if c == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for p in 0..dout {
                    for q in 0..dout {
                        let v = e[(p, q)];
                        if v != Complex64::new(0.0, 0.0) {
                            m[(p * iout + i, q * iout + j)] += c * v;
                        }
                    }
                }
            }
        }
        if a == b {
            let w: f64 = (0..idler).map(|i| blk[(i, i)].re).sum();
            deficit += w.abs() * out.tail();
            excess += w.abs() * out.cap_tail;
        }
        cap_tail = cap_tail.max(out.cap_tail);
        for wmsg in &out.warnings {
            if !warnings.contains(wmsg) {
                warnings.push(wmsg.clone());
            }
        }
    }
    let op = FockOperator::new(m, modes, cutoff)?;
    let state = DensityOperator::from_parts_with_excess(op, deficit, excess)?;
    Ok(StateOutput { state, cap_tail, warnings })
}

/// Applies the N-port channel chosen by `channel_for`.
pub fn apply_state_nport(rho_in: &DensityOperator, params: &ChannelParams, cap: usize, cutoff: Cutoff) -> Result<StateOutput> {
    let ch = channel_for(params, Some(cap))?;
    apply_state_with(rho_in, ch.as_ref(), cutoff)
}

/// (|00> + |11> + ... + |d-1 d-1>) / sqrt(d) on (signal, idler).
pub fn max_entangled_ket(d: usize, cutoff: Cutoff) -> Result<FockVector> {
    let levels = cutoff.levels();
    if d == 0 || d > levels {
        return Err(Error::Domain(format!("entangled dimension {d} must lie in 1..={levels}")));
    }
    let mut amps = crate::linalg::CVector::zeros(levels * levels);
    let s = Complex64::new(1.0 / (d as f64).sqrt(), 0.0);
    for n in 0..d {
        amps[n * levels + n] = s;
    }
    FockVector::new(amps, 2, cutoff)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{fidelity_pure, tmsv_ket};

    #[test]
    fn bell_output_outside_code_space_is_diagonal() {
        for n in [2, 3] {
            let params = ChannelParams::new(0.5, 0.6, n).unwrap();
            let c = Cutoff::new(6).unwrap();
            let bell = max_entangled_ket(2, Cutoff::new(2).unwrap()).unwrap().to_density();
            let out = apply_state_nport(&bell, &params, 30, c).unwrap().state;
            let m = out.matrix();
            for p in 0..6 {
                for q in 0..6 {
                    if p != q && (p >= 2 || q >= 2) {
                        for i in 0..6 {
                            for j in 0..6 {
                                assert!(m[(p * 6 + i, q * 6 + j)].norm() < 1e-15);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn tmsv_trace_within_tails() {
        for n in [2, 3, 4] {
            let params = ChannelParams::new(0.4, 0.5, n).unwrap();
            let din = Cutoff::new(8).unwrap();
            let input = tmsv_ket(0.3, din).unwrap().to_density();
            let out = apply_state_nport(&input, &params, [0, 0, 25, 25, 12][n], Cutoff::new(12).unwrap()).unwrap();
            assert!((out.state.trace() - 1.0).abs() <= out.state.trace_deficit() + 1e-10);
            assert!(out.state.trace_deficit() < 1e-6);
        }
    }

    #[test]
    fn qutrit_fidelity_below_qubit() {
        for (lx, ly) in [(0.3, 0.3), (0.5, 0.5), (0.6, 0.4), (0.4, 0.7)] {
            let params = ChannelParams::new(lx, ly, 3).unwrap();
            let ch = channel_for(&params, None).unwrap();
            let f = |d: usize| {
                let ket = max_entangled_ket(d, Cutoff::new(d.max(2)).unwrap()).unwrap();
                let out = apply_state_with(&ket.to_density(), ch.as_ref(), Cutoff::new(d.max(2)).unwrap()).unwrap();
                fidelity_pure(&ket, &out.state).unwrap()
            };
            assert!(f(3) < f(2), "{lx} {ly}");
        }
    }

    #[test]
    fn single_mode_matches_two_port_state_map() {
        let params = ChannelParams::two_port(0.5, 0.4).unwrap();
        let c = Cutoff::new(20).unwrap();
        let coh = crate::fock::coherent_ket(Complex64::new(0.7, -0.2), c).to_density();
        let via_elements = apply_state_nport(&coh, &params, 0, c).unwrap().state;
        let direct = two_port::apply_state(&coh, &params, c).unwrap();
        assert!(crate::linalg::max_abs(&(via_elements.matrix() - direct.matrix())) < 1e-13);
    }
}
