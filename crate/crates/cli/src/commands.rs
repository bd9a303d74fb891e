use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::{json, Value};

use cvpbt::bounds::{
    edrc_apply, edrc_diamond_norm, lossy_diamond_bound, mc_index, sim_example_base, sim_example_bound, EdrcParams, ENVELOPE_ASYMPTOTE_TOL, MC_SCAN_CAP,
};
use cvpbt::fock::{coherent_ket, fidelity_pure, mean_photon_number, tmsv_ket, trace_norm};
use cvpbt::nport::{apply_state_with, cap_tail_bound, channel_for, default_cap, max_entangled_ket};
use cvpbt::oracle::{truncation_budget, verify, TruncatedProtocol};
use cvpbt::two_port::{self, apply_coherent, argmax_output_energy, max_output_energy, omega, regime};
use cvpbt::{ChannelParams, Cutoff, Regime};

use crate::args::{Axis, BoundKind, InputKind};
use crate::table::ResultTable;

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_LAMBDA_IN: f64 = 1.0 / 3.0;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Budget(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Budget(_) => 3,
            CliError::Numerical(_) | CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Budget(m) => write!(f, "refusing to run: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<cvpbt::Error> for CliError {
    fn from(e: cvpbt::Error) -> Self {
        match e {
            cvpbt::Error::Budget { .. } => CliError::Budget(e.to_string()),
            cvpbt::Error::Numerical(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn check_tol(tol: f64) -> CliResult<f64> {
    if tol.is_finite() && tol > 0.0 && tol < 1.0 {
        Ok(tol)
    } else {
        Err(invalid(format!("--tol {tol} must lie in (0, 1)")))
    }
}

fn axis_meta(a: &Axis) -> Value {
    json!({ "start": a.start, "stop": a.stop, "count": a.count })
}

fn regime_name(r: Regime) -> &'static str {
    match r {
        Regime::Positive => "positive",
        Regime::Negative => "negative",
    }
}

fn grid(lx: &Axis, ly: &Axis) -> Vec<(f64, f64)> {
    lx.values().into_iter().flat_map(|x| ly.values().into_iter().map(move |y| (x, y))).collect()
}

pub fn cmd_twoport_coherent(lambda_x: f64, lambda_y: f64, alpha: Complex64, cutoff: Option<usize>, tol: f64) -> CliResult<ResultTable> {
    let params = ChannelParams::two_port(lambda_x, lambda_y)?;
    let tol = check_tol(tol)?;
    let c = match cutoff {
        Some(d) => Cutoff::new(d)?,
        None => {
            let beta = alpha * params.tau().sqrt();
            Cutoff::for_coherent(alpha, tol)?.max(Cutoff::for_coherent(beta, tol)?).max(Cutoff::for_geometric(lambda_x, tol)?)
        }
    };
    let out = apply_coherent(alpha, &params, c)?;
    let input = coherent_ket(alpha, c).to_density();
    let distance = trace_norm(&out.op().sub(input.op())?)?;
    let mut t = ResultTable::new("twoport-coherent", &["n", "m", "re", "im"]);
    let d = c.levels();
    for n in 0..d {
        for m in 0..d {
            let z = out.op().get(n, m);
            t.push(vec![n as f64, m as f64, z.re, z.im]);
        }
    }
    t.meta("lambda_x", lambda_x);
    t.meta("lambda_y", lambda_y);
    t.meta("alpha", json!([alpha.re, alpha.im]));
    t.meta("cutoff", d);
    t.meta("cutoff_policy", if cutoff.is_some() { "fixed" } else { "adaptive" });
    t.meta("tol", tol);
    t.meta("trace", out.trace());
    t.meta("trace_deficit_bound", out.trace_deficit());
    t.meta("mean_photon_number", mean_photon_number(&out)?);
    t.meta("trace_norm_vs_input", distance);
    t.meta("regime", regime_name(regime(&params)));
    Ok(t)
}

pub fn cmd_energy(lambda_x: &Axis, lambda_y: &Axis) -> CliResult<ResultTable> {
    let points = grid(lambda_x, lambda_y);
    let rows = points
        .par_iter()
        .map(|&(x, y)| -> CliResult<Vec<f64>> {
            let p = ChannelParams::two_port(x, y)?;
            let u = argmax_output_energy(&p)?.unwrap_or(0.0);
            Ok(vec![x, y, max_output_energy(&p)?, u])
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut t = ResultTable::new("energy", &["lambda_x", "lambda_y", "e_max", "u_star"]);
    for r in rows {
        t.push(r);
    }
    t.meta("lambda_x", axis_meta(lambda_x));
    t.meta("lambda_y", axis_meta(lambda_y));
    t.meta("series_tol", 1e-17);
    t.meta("note", "u_star is the maximising input energy |alpha|^2, reported as 0 where lambda_x = 0");
    Ok(t)
}

pub fn cmd_bounds_lossy(lambda_x: f64, lambda_y: f64, energy: &Axis) -> CliResult<ResultTable> {
    let params = ChannelParams::two_port(lambda_x, lambda_y)?;
    let es = energy.values();
    if es.iter().any(|&e| !(e >= 0.0)) {
        return Err(invalid("energies must be nonnegative"));
    }
    let vals = es
        .par_iter()
        .map(|&e| lossy_diamond_bound(e, &params).map(|(v, _)| vec![e, v]))
        .collect::<cvpbt::Result<Vec<_>>>()?;
    let r = regime(&params);
    let mut t = ResultTable::new("bounds-lossy", &["energy", "bound"]);
    for v in vals {
        t.push(v);
    }
    t.meta("lambda_x", lambda_x);
    t.meta("lambda_y", lambda_y);
    t.meta("energy", axis_meta(energy));
    t.meta("regime", regime_name(r));
    t.meta("variant", if r == Regime::Positive { "closed-form" } else { "negative-regime-concave-envelope" });
    if r == Regime::Negative {
        t.meta("envelope_asymptote_tol", ENVELOPE_ASYMPTOTE_TOL);
    }
    Ok(t)
}

pub fn cmd_bounds_edrc(lambda_x: &Axis, lambda_y: &Axis, tol: f64) -> CliResult<ResultTable> {
    let tol = check_tol(tol)?;
    let points = grid(lambda_x, lambda_y);
    let rows = points
        .par_iter()
        .map(|&(x, y)| -> CliResult<Option<Vec<f64>>> {
            let p = ChannelParams::two_port(x, y)?;
            if regime(&p) == Regime::Negative {
                return Ok(None);
            }
            let norm = edrc_diamond_norm(&p)?;
            let m = mc_index(&p)?;
            let c = Cutoff::for_geometric(x, tol)?;
            let zero = Complex64::new(0.0, 0.0);
            let diff = apply_coherent(zero, &p, c)?.op().sub(edrc_apply(zero, &EdrcParams::matched(&p)?, c)?.op())?;
            Ok(Some(vec![x, y, norm, m.m_c as f64, if m.capped { 1.0 } else { 0.0 }, trace_norm(&diff)?]))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut t = ResultTable::new("bounds-edrc", &["lambda_x", "lambda_y", "diamond_norm", "m_c", "m_c_capped", "direct_trace_norm"]);
    let mut skipped = Vec::new();
    for ((x, y), r) in points.into_iter().zip(rows) {
        match r {
            Some(v) => t.push(v),
            None => skipped.push(json!([x, y])),
        }
    }
    t.meta("lambda_x", axis_meta(lambda_x));
    t.meta("lambda_y", axis_meta(lambda_y));
    t.meta("tol", tol);
    t.meta("m_c_scan_cap", MC_SCAN_CAP);
    t.meta("skipped_negative_regime", Value::Array(skipped));
    Ok(t)
}

pub fn cmd_bounds_sim(base: ChannelParams, delta: &Axis) -> CliResult<ResultTable> {
    let rows = delta
        .values()
        .par_iter()
        .map(|&d| sim_example_bound(d, &base).map(|v| vec![d, v]))
        .collect::<cvpbt::Result<Vec<_>>>()?;
    let mut t = ResultTable::new("bounds-sim", &["delta", "bound"]);
    for r in rows {
        t.push(r);
    }
    t.meta("lambda_x", base.lambda_x);
    t.meta("lambda_y", base.lambda_y);
    t.meta("delta", axis_meta(delta));
    Ok(t)
}

pub fn default_sim_base() -> ChannelParams {
    sim_example_base()
}

pub struct SweepSpec {
    pub input: InputKind,
    pub ports: usize,
    pub lambda_in: f64,
    pub lambda_x: Axis,
    pub lambda_y: Axis,
    /// Input and output cutoff for TMSV inputs; Bell inputs use their code dimension.
    pub cutoff: Option<usize>,
    pub cap: Option<usize>,
    pub tol: f64,
}

pub fn cmd_fidelity_sweep(spec: &SweepSpec) -> CliResult<ResultTable> {
    if !(spec.ports == 2 || spec.ports == 3) {
        return Err(invalid(format!("fidelity sweeps take --ports 2 or 3, got {}", spec.ports)));
    }
    let tol = check_tol(spec.tol)?;
    let (ket, c, input_tail) = match spec.input {
        InputKind::Tmsv => {
            let c = match spec.cutoff {
                Some(d) => Cutoff::new(d)?,
                None => Cutoff::for_geometric(spec.lambda_in, tol)?,
            };
            (tmsv_ket(spec.lambda_in, c)?, c, spec.lambda_in.powi(2 * c.levels() as i32))
        }
        InputKind::Bell2 | InputKind::Bell3 => {
            let d = if spec.input == InputKind::Bell2 { 2 } else { 3 };
            let c = Cutoff::new(d)?;
            (max_entangled_ket(d, c)?, c, 0.0)
        }
    };
    let rho_in = ket.to_density();
    let points = grid(&spec.lambda_x, &spec.lambda_y);
    let rows = points
        .par_iter()
        .map(|&(x, y)| -> CliResult<Vec<f64>> {
            let p = ChannelParams::new(x, y, spec.ports)?;
            let cap = spec.cap.unwrap_or_else(|| default_cap(&p));
            let ch = channel_for(&p, Some(cap))?;
            let out = apply_state_with(&rho_in, ch.as_ref(), c)?;
            let cap_tail = if spec.ports == 2 { 0.0 } else { cap_tail_bound(&p, cap) };
            Ok(vec![x, y, fidelity_pure(&ket, &out.state)?, cap as f64, cap_tail])
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut t = ResultTable::new("fidelity-sweep", &["lambda_x", "lambda_y", "fidelity", "cap", "cap_tail"]);
    for r in rows {
        t.push(r);
    }
    let name = match spec.input {
        InputKind::Tmsv => "tmsv",
        InputKind::Bell2 => "bell2",
        InputKind::Bell3 => "bell3",
    };
    t.meta("input", name);
    t.meta("ports", spec.ports);
    if spec.input == InputKind::Tmsv {
        t.meta("lambda_in", spec.lambda_in);
    }
    t.meta("lambda_x", axis_meta(&spec.lambda_x));
    t.meta("lambda_y", axis_meta(&spec.lambda_y));
    t.meta("output_cutoff", c.levels());
    t.meta("input_truncation_tail", input_tail);
    t.meta("cap_policy", if spec.cap.is_some() { "fixed" } else { "default per point" });
    t.meta("tol", tol);
    if spec.ports == 2 {
        t.meta("omega_series_tol", 1e-17);
    }
    Ok(t)
}

/// Tolerance used by oracle-verify when none is given.
pub fn default_verify_tol(ports: usize) -> f64 {
    if ports == 2 {
        1e-6
    } else {
        1e-5
    }
}

pub struct VerifySpec {
    pub ports: usize,
    pub lambda_x: f64,
    pub lambda_y: f64,
    pub cutoff: usize,
    pub a_max: usize,
    pub b_max: usize,
    pub tol: f64,
    pub cap: Option<usize>,
}

pub fn cmd_oracle_verify(spec: &VerifySpec) -> CliResult<ResultTable> {
    let params = ChannelParams::new(spec.lambda_x, spec.lambda_y, spec.ports)?;
    let cutoff = Cutoff::new(spec.cutoff)?;
    if !(spec.tol.is_finite() && spec.tol > 0.0) {
        return Err(invalid(format!("--tol {} must be positive", spec.tol)));
    }
    let proto = TruncatedProtocol::new(params, cutoff)?;
    let ch = channel_for(&params, spec.cap)?;
    let report = verify(&proto, ch.as_ref(), spec.a_max, spec.b_max, spec.tol)?;
    let mut t = ResultTable::new("oracle-verify", &["a", "b", "max_deviation", "trace_deviation", "min_eigenvalue"]);
    for e in &report.elements {
        t.push(vec![e.a as f64, e.b as f64, e.max_deviation, e.trace_deviation.unwrap_or(0.0), e.min_eigenvalue.unwrap_or(0.0)]);
    }
    t.meta("ports", spec.ports);
    t.meta("lambda_x", spec.lambda_x);
    t.meta("lambda_y", spec.lambda_y);
    t.meta("cutoff", spec.cutoff);
    t.meta("converged_levels", report.converged_levels);
    t.meta("total_dim", report.total_dim);
    t.meta("block_count", report.block_count);
    t.meta("largest_block", report.largest_block);
    t.meta("kernel_tol", report.kernel_tol);
    t.meta("spectrum", serde_json::to_value(report.spectrum).expect("plain counts"));
    t.meta("tolerance", report.tolerance);
    t.meta("truncation_budget", truncation_budget(&params, cutoff));
    t.meta("max_deviation", report.max_deviation);
    t.meta("passed", report.passed);
    t.meta("note", "trace_deviation and min_eigenvalue are reported for a = b only and are 0 elsewhere");
    t.meta("timing", serde_json::to_value(&report.timing).expect("plain numbers"));
    if spec.ports >= 3 {
        let cap = spec.cap.unwrap_or_else(|| default_cap(&params));
        t.meta("cap", cap);
        t.meta("cap_tail", cap_tail_bound(&params, cap));
    } else {
        t.meta("omega_tail", omega(&params, 1e-17)?.1);
    }
    Ok(t)
}

/// Trace distance of the two-port output from |0><0| at alpha = 0.
pub fn vacuum_trace_distance(params: &ChannelParams, cutoff: Cutoff) -> CliResult<f64> {
    let zero = Complex64::new(0.0, 0.0);
    let out = two_port::apply_coherent(zero, params, cutoff)?;
    Ok(trace_norm(&out.op().sub(coherent_ket(zero, cutoff).to_density().op())?)?)
}

pub fn run_bounds(kind: BoundKind, lambda_x: Option<&Axis>, lambda_y: Option<&Axis>, energy: Option<&Axis>, delta: Option<&Axis>, tol: f64) -> CliResult<ResultTable> {
    let need = |a: Option<&Axis>, name: &str| a.cloned().ok_or_else(|| invalid(format!("--{name} is required")));
    match kind {
        BoundKind::Lossy => {
            let e = energy.cloned().unwrap_or(Axis { start: 0.0, stop: 10.0, count: 101 });
            cmd_bounds_lossy(need(lambda_x, "lambda-x")?.scalar("lambda-x").map_err(invalid)?, need(lambda_y, "lambda-y")?.scalar("lambda-y").map_err(invalid)?, &e)
        }
        BoundKind::Edrc => cmd_bounds_edrc(&need(lambda_x, "lambda-x")?, &need(lambda_y, "lambda-y")?, tol),
        BoundKind::Sim => {
            let mut base = default_sim_base();
            if let Some(x) = lambda_x {
                base.lambda_x = x.scalar("lambda-x").map_err(invalid)?;
            }
            if let Some(y) = lambda_y {
                base.lambda_y = y.scalar("lambda-y").map_err(invalid)?;
            }
            let base = ChannelParams::two_port(base.lambda_x, base.lambda_y)?;
            let d = delta.cloned().unwrap_or(Axis { start: 0.0, stop: 0.3, count: 31 });
            cmd_bounds_sim(base, &d)
        }
    }
}
