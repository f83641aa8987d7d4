//! Parameter sweeps over RIS placement, efficiency factor and panel size,
//! emitted as deterministic plot-ready CSV.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::channel::{sample_channels, ChannelConfig};
use crate::error::{Error, Result};
use crate::params::{Geometry, SystemParams};
use crate::solver::{bcd_solve, solve_no_ris, SolveStatus, SolverConfig};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    /// RIS-to-S distance in meters (RIS moves along the S -> BS segment).
    RisDistance,
    /// Energy efficiency factor.
    Zeta,
    /// Panel size N.
    Elements,
}

impl SweepVariable {
    pub fn name(&self) -> &'static str {
        match self {
            SweepVariable::RisDistance => "ris_distance",
            SweepVariable::Zeta => "zeta",
            SweepVariable::Elements => "elements",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub num_seeds: u64,
    pub include_no_ris_baseline: bool,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::invalid("values", "must be non-empty"));
        }
        if !self.values.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::invalid("values", "must be strictly increasing"));
        }
        if self.num_seeds < 1 {
            return Err(Error::invalid("num_seeds", "must be >= 1"));
        }
        if self.variable == SweepVariable::Elements {
            for v in &self.values {
                if *v < 1.0 || v.fract() != 0.0 {
                    return Err(Error::invalid("values", "element counts must be positive integers"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub sweep_value: f64,
    pub seed: u64,
    pub m: usize,
    pub k: usize,
    pub tau_ms: f64,
    pub energy_j: f64,
    pub bits: f64,
    pub status: SolveStatus,
    pub iterations: usize,
}

/// Sweep rows for the solved system and (optionally) the forced no-RIS
/// baseline on the same channel realizations, kept in separate tables so
/// both share one schema.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub baseline: Vec<SweepRow>,
}

pub(crate) fn status_str(status: SolveStatus) -> &'static str {
    match status {
        SolveStatus::Converged => "converged",
        SolveStatus::MaxIters => "max-iters",
        SolveStatus::Infeasible => "infeasible",
    }
}

fn apply_sweep_value(
    variable: SweepVariable,
    value: f64,
    params: &SystemParams,
    geo: &Geometry,
) -> (SystemParams, Geometry) {
    let mut p = params.clone();
    let mut g = *geo;
    match variable {
        SweepVariable::RisDistance => g = g.with_ris_distance(value),
        SweepVariable::Zeta => p.efficiency_factor = value,
        SweepVariable::Elements => p.num_elements = value as usize,
    }
    (p, g)
}

fn row_from(result: &crate::solver::SolveResult, value: f64, seed: u64) -> SweepRow {
    match &result.best {
        Some(d) => SweepRow {
            sweep_value: value,
            seed,
            m: d.m,
            k: d.k,
            tau_ms: d.tau * 1e3,
            energy_j: d.energy,
            bits: d.bits,
            status: result.status,
            iterations: result.trace.len(),
        },
        None => SweepRow {
            sweep_value: value,
            seed,
            m: 0,
            k: 0,
            tau_ms: 0.0,
            energy_j: 0.0,
            bits: 0.0,
            status: result.status,
            iterations: result.trace.len(),
        },
    }
}

fn solve_one(
    variable: SweepVariable,
    value: f64,
    seed_index: u64,
    base_params: &SystemParams,
    base_geo: &Geometry,
    chan_cfg: &ChannelConfig,
    solver_cfg: &SolverConfig,
    with_baseline: bool,
) -> Result<(SweepRow, Option<SweepRow>)> {
    let (p, g) = apply_sweep_value(variable, value, base_params, base_geo);
    let seed = chan_cfg.seed.wrapping_add(seed_index);
    let cfg = ChannelConfig { seed, ..*chan_cfg };
    let ch = sample_channels(&g, &p, &cfg)?;
    let result = bcd_solve(&ch, &p, solver_cfg)?;
    let row = row_from(&result, value, seed);
    let baseline = if with_baseline {
        let b = solve_no_ris(&ch, &p, solver_cfg)?;
        Some(row_from(&b, value, seed))
    } else {
        None
    };
    Ok((row, baseline))
}

/// Runs the sweep: one solver run per (value, seed) pair, rows in canonical
/// order (sweep value, then seed). Work items are independent and run in
/// parallel when the `parallel` feature is enabled.
pub fn run_sweep(
    spec: &SweepSpec,
    base_params: &SystemParams,
    base_geo: &Geometry,
    chan_cfg: &ChannelConfig,
    solver_cfg: &SolverConfig,
) -> Result<SweepOutput> {
    spec.validate()?;
    let jobs: Vec<(f64, u64)> = spec
        .values
        .iter()
        .flat_map(|&v| (0..spec.num_seeds).map(move |s| (v, s)))
        .collect();

    let solve = |&(value, seed_index): &(f64, u64)| {
        solve_one(
            spec.variable,
            value,
            seed_index,
            base_params,
            base_geo,
            chan_cfg,
            solver_cfg,
            spec.include_no_ris_baseline,
        )
    };

    #[cfg(feature = "parallel")]
    let results: Vec<_> = jobs.par_iter().map(solve).collect::<Result<_>>()?;
    #[cfg(not(feature = "parallel"))]
    let results: Vec<_> = jobs.iter().map(solve).collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(results.len());
    let mut baseline = Vec::new();
    for (row, base) in results {
        rows.push(row);
        if let Some(b) = base {
            baseline.push(b);
        }
    }
    Ok(SweepOutput { rows, baseline })
}

/// Per-outer-iteration objective values for one solve.
pub fn run_convergence_trace(
    params: &SystemParams,
    geo: &Geometry,
    chan_cfg: &ChannelConfig,
    solver_cfg: &SolverConfig,
) -> Result<crate::solver::SolveResult> {
    let ch = sample_channels(geo, params, chan_cfg)?;
    bcd_solve(&ch, params, solver_cfg)
}

/// Formats with 12 significant digits, locale-independent.
fn fmt_sig(v: f64) -> String {
    format!("{:.11e}", v)
}

pub fn write_csv<W: Write>(rows: &[SweepRow], mut w: W) -> std::io::Result<()> {
    writeln!(
        w,
        "sweep_value,seed,m,k,tau_ms,energy_j,bits,status,iterations"
    )?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            fmt_sig(r.sweep_value),
            r.seed,
            r.m,
            r.k,
            fmt_sig(r.tau_ms),
            fmt_sig(r.energy_j),
            fmt_sig(r.bits),
            status_str(r.status),
            r.iterations
        )?;
    }
    Ok(())
}

/// Writes a header plus one line per row; byte-identical across runs with
/// identical inputs.
pub fn emit_csv(rows: &[SweepRow], destination: &Path) -> Result<()> {
    let file = File::create(destination).map_err(|source| Error::Io {
        path: destination.to_path_buf(),
        source,
    })?;
    let mut w = BufWriter::new(file);
    write_csv(rows, &mut w).and_then(|_| w.flush()).map_err(|source| Error::Io {
        path: destination.to_path_buf(),
        source,
    })
}

/// Aggregate statistics for one sweep value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryRow {
    pub sweep_value: f64,
    pub solved: usize,
    pub infeasible: usize,
    pub mean_bits: f64,
    pub min_bits: f64,
    pub max_bits: f64,
    pub mean_energy_j: f64,
    pub mean_tau_ms: f64,
}

/// Per-value summary over seeds. Infeasible rows count as zero bits/energy,
/// matching how a missing solution performs.
pub fn summarize(rows: &[SweepRow]) -> Vec<SummaryRow> {
    let mut values: Vec<f64> = rows.iter().map(|r| r.sweep_value).collect();
    values.dedup();
    values
        .iter()
        .map(|&v| {
            let group: Vec<&SweepRow> = rows.iter().filter(|r| r.sweep_value == v).collect();
            let n = group.len() as f64;
            let solved = group
                .iter()
                .filter(|r| r.status == SolveStatus::Converged)
                .count();
            SummaryRow {
                sweep_value: v,
                solved,
                infeasible: group
                    .iter()
                    .filter(|r| r.status == SolveStatus::Infeasible)
                    .count(),
                mean_bits: group.iter().map(|r| r.bits).sum::<f64>() / n,
                min_bits: group.iter().map(|r| r.bits).fold(f64::INFINITY, f64::min),
                max_bits: group.iter().map(|r| r.bits).fold(f64::NEG_INFINITY, f64::max),
                mean_energy_j: group.iter().map(|r| r.energy_j).sum::<f64>() / n,
                mean_tau_ms: group.iter().map(|r| r.tau_ms).sum::<f64>() / n,
            }
        })
        .collect()
}
