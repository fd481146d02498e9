//! `privnav circuit ...`: build, inspect and evaluate the two application circuits.

use std::fs;
use std::path::Path;

use privnav::circuit::{
    build_range_check, build_trajectory, from_bristol, optimize, range_check_inputs, to_bristol, trajectory_inputs, trajectory_output,
    Circuit,
};
use privnav::fixed::{encode_decimal, in_bounds_plain, trajectory_plain, Bounds, FixedPoint, FpParams};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Kind {
    Trajectory,
    Range,
}

#[derive(Debug, Error)]
pub enum CmdError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    /// The circuit disagreed with the plaintext reference.
    #[error("{0}")]
    Mismatch(String),
}

fn usage(e: impl ToString) -> CmdError {
    CmdError::Usage(e.to_string())
}

pub fn params(bitwidth: u32, frac: Option<u32>) -> Result<FpParams, CmdError> {
    match frac {
        Some(f) => FpParams::new(bitwidth, f),
        None => FpParams::for_bitwidth(bitwidth),
    }
    .map_err(usage)
}

pub fn build(kind: Kind, params: FpParams) -> Circuit {
    match kind {
        Kind::Trajectory => build_trajectory(params),
        Kind::Range => build_range_check(params),
    }
}

/// One-line summary, shared by `build`, `stats` and `optimize`.
pub fn stats_line(label: &str, c: &Circuit) -> String {
    format!("{label}: inputs={} outputs={} wires={} {}", c.n_input_bits(), c.n_output_bits(), c.n_wires(), c.stats())
}

/// Loads a Bristol file.
pub fn load(path: &Path) -> Result<Circuit, CmdError> {
    let text = fs::read_to_string(path)?;
    from_bristol(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// Writes `c` to `out`, or returns the text when there is no path.
pub fn emit(c: &Circuit, out: Option<&Path>) -> Result<Option<String>, CmdError> {
    let text = to_bristol(c);
    match out {
        Some(p) => {
            fs::write(p, text)?;
            Ok(None)
        }
        None => Ok(Some(text)),
    }
}

fn decimals<const N: usize>(what: &str, text: &str, params: FpParams) -> Result<[FixedPoint; N], CmdError> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(usage(format!("{what} needs {N} comma-separated values")));
    }
    let mut out = [FixedPoint::zero(params); N];
    for (slot, p) in out.iter_mut().zip(parts) {
        *slot = encode_decimal(p, params).map_err(|e| usage(format!("{what}: {e}")))?;
    }
    Ok(out)
}

fn join(v: &[FixedPoint]) -> String {
    v.iter().map(FixedPoint::to_decimal).collect::<Vec<_>>().join(", ")
}

/// Evaluates the trajectory circuit in the clear and compares with the reference.
pub fn eval_trajectory(params: FpParams, sat: &str, air: &str) -> Result<String, CmdError> {
    let sat = decimals::<3>("--sat", sat, params)?;
    let air = decimals::<3>("--air", air, params)?;
    let c = optimize(&build_trajectory(params));
    let out = c.evaluate(&trajectory_inputs(&sat, &air)).map_err(usage)?;
    let got = trajectory_output(&out, params);
    let want = trajectory_plain(&sat, &air).map_err(usage)?;
    if got != want {
        return Err(CmdError::Mismatch(format!("circuit gave ({}) but the reference gives ({})", join(&got), join(&want))));
    }
    Ok(format!("u = ({})", join(&got)))
}

/// Evaluates the range check in the clear and compares with the reference.
pub fn eval_range(params: FpParams, loc: &str, bounds: &str) -> Result<String, CmdError> {
    let loc = decimals::<3>("--loc", loc, params)?;
    let bounds = Bounds::from_array(decimals::<6>("--bounds", bounds, params)?).map_err(usage)?;
    let c = optimize(&build_range_check(params));
    let got = c.evaluate(&range_check_inputs(&loc, &bounds)).map_err(usage)?[0][0];
    let want = in_bounds_plain(&loc, &bounds).map_err(usage)?;
    if got != want {
        return Err(CmdError::Mismatch(format!("circuit gave {got} but the reference gives {want}")));
    }
    Ok(format!("in_bounds = {got}"))
}
