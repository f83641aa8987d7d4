//! Command-line driver: solve one instance, verify it against the
//! exhaustive oracle, run parameter sweeps, or dump the convergence trace.

mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use risd2d::channel::sample_channels;
use risd2d::experiments::{emit_csv, run_sweep, summarize, SweepSpec, SweepVariable};
use risd2d::oracle::oracle_search;
use risd2d::solver::{bcd_solve, bcd_solve_compared, BlockSolver, SolveResult, SolveStatus};

const EXIT_INFEASIBLE: u8 = 2;
const EXIT_MAX_ITERS: u8 = 3;

#[derive(Parser)]
#[command(name = "risd2d", about = "RIS-assisted batteryless D2D link optimizer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Channel seed; overrides `chan.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Single-key override, `key=value`; repeatable, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Common {
    fn build(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        for assignment in &self.overrides {
            cfg.apply_override(assignment)?;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance with the block-coordinate solver.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Print the effective configuration before the result.
        #[arg(long)]
        echo_config: bool,
    },
    /// Solve and compare against the exhaustive oracle.
    Verify {
        #[command(flatten)]
        common: Common,
    },
    /// Sweep one variable over a value grid, many seeds per value.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Swept variable: ris-distance | zeta | elements.
        #[arg(long)]
        var: String,
        /// Comma list (`0.1,1,5`) or range (`start:stop:step`).
        #[arg(long)]
        values: String,
        /// Seeds per value (consecutive, starting at chan.seed).
        #[arg(long, default_value_t = 100)]
        seeds: u64,
        /// Also solve the no-RIS baseline on the same channels.
        #[arg(long)]
        baseline: bool,
        /// CSV destination; baseline rows go to `<stem>_baseline.csv`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the per-iteration objective trace for one solve.
    Trace {
        #[command(flatten)]
        common: Common,
    },
}

fn parse_values(text: &str) -> Result<Vec<f64>> {
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            bail!("range must be start:stop:step, got `{text}`");
        }
        let start: f64 = parts[0].parse().context("range start")?;
        let stop: f64 = parts[1].parse().context("range stop")?;
        let step: f64 = parts[2].parse().context("range step")?;
        if !(step > 0.0) || stop < start {
            bail!("range must have step > 0 and stop >= start");
        }
        let mut values = Vec::new();
        let mut i = 0u64;
        loop {
            let v = start + step * i as f64;
            if v > stop * (1.0 + 1e-12) {
                break;
            }
            values.push(v);
            i += 1;
        }
        Ok(values)
    } else {
        text.split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|e| anyhow!("value `{v}`: {e}")))
            .collect()
    }
}

fn parse_variable(name: &str) -> Result<SweepVariable> {
    match name {
        "ris-distance" => Ok(SweepVariable::RisDistance),
        "zeta" => Ok(SweepVariable::Zeta),
        "elements" => Ok(SweepVariable::Elements),
        other => bail!("unknown sweep variable `{other}` (ris-distance | zeta | elements)"),
    }
}

fn print_result(r: &SolveResult) {
    match (&r.best, r.status) {
        (Some(d), _) => {
            println!("status      : {}", status_name(r.status));
            println!("m           : {}", d.m);
            println!("k           : {}", d.k);
            println!("tau_ms      : {:.6}", d.tau * 1e3);
            println!("energy_j    : {:.6e}", d.energy);
            println!("bits        : {:.6e}", d.bits);
            println!("iterations  : {}", r.trace.len());
        }
        (None, _) => {
            println!("status      : {}", status_name(r.status));
            if let Some(diag) = &r.diagnostic {
                println!("diagnostic  : {diag}");
            }
        }
    }
}

fn status_name(s: SolveStatus) -> &'static str {
    match s {
        SolveStatus::Converged => "converged",
        SolveStatus::MaxIters => "max-iters",
        SolveStatus::Infeasible => "infeasible",
    }
}

fn status_exit(s: SolveStatus) -> ExitCode {
    match s {
        SolveStatus::Converged => ExitCode::SUCCESS,
        SolveStatus::Infeasible => ExitCode::from(EXIT_INFEASIBLE),
        SolveStatus::MaxIters => ExitCode::from(EXIT_MAX_ITERS),
    }
}

fn run() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Solve { common, echo_config } => {
            let cfg = common.build()?;
            if echo_config {
                print!("{}", cfg.render());
                println!("---");
            }
            let p = cfg.system_params();
            let ch = sample_channels(&cfg.geometry(), &p, &cfg.channel_config())?;
            let r = bcd_solve(&ch, &p, &cfg.solver_config())?;
            print_result(&r);
            Ok(status_exit(r.status))
        }
        Command::Verify { common } => {
            let cfg = common.build()?;
            let p = cfg.system_params();
            let ch = sample_channels(&cfg.geometry(), &p, &cfg.channel_config())?;
            let solver_cfg = cfg.solver_config();
            let (solved, agreement) = bcd_solve_compared(&ch, &p, &solver_cfg)?;
            let oracle = oracle_search(&ch, &p, &cfg.oracle_config())?;
            match (&solved.best, &oracle.best) {
                (Some(s), Some(o)) => {
                    let gap = (o.bits - s.bits) / o.bits;
                    println!("solver bits : {:.6e}", s.bits);
                    println!("oracle bits : {:.6e}", o.bits);
                    println!("relative gap: {gap:.3e}");
                    if solver_cfg.block_solver == BlockSolver::PaperSca {
                        println!(
                            "sca blocks  : {} calls, {} disagreements",
                            agreement.sp1_calls + agreement.sp2_calls,
                            agreement.mismatches()
                        );
                    }
                    let pass = gap.abs() <= 0.01;
                    println!("verdict     : {}", if pass { "PASS" } else { "FAIL" });
                    Ok(if pass {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::FAILURE
                    })
                }
                _ => {
                    println!(
                        "solver: {}, oracle: {}",
                        status_name(solved.status),
                        status_name(oracle.status)
                    );
                    let agree = solved.best.is_none() == oracle.best.is_none();
                    println!("verdict     : {}", if agree { "PASS" } else { "FAIL" });
                    Ok(if agree {
                        ExitCode::from(EXIT_INFEASIBLE)
                    } else {
                        ExitCode::FAILURE
                    })
                }
            }
        }
        Command::Sweep {
            common,
            var,
            values,
            seeds,
            baseline,
            out,
        } => {
            let cfg = common.build()?;
            let spec = SweepSpec {
                variable: parse_variable(&var)?,
                values: parse_values(&values)?,
                num_seeds: seeds,
                include_no_ris_baseline: baseline,
            };
            let result = run_sweep(
                &spec,
                &cfg.system_params(),
                &cfg.geometry(),
                &cfg.channel_config(),
                &cfg.solver_config(),
            )?;
            emit_csv(&result.rows, &out)?;
            println!("wrote {} rows to {}", result.rows.len(), out.display());
            if baseline {
                let stem = out
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .ok_or_else(|| anyhow!("--out needs a file name"))?;
                let base_path = out.with_file_name(format!("{stem}_baseline.csv"));
                emit_csv(&result.baseline, &base_path)?;
                println!(
                    "wrote {} baseline rows to {}",
                    result.baseline.len(),
                    base_path.display()
                );
            }
            for s in summarize(&result.rows) {
                println!(
                    "{} = {:<8} mean bits {:.4e}  mean energy {:.4e} J  solved {}/{}",
                    spec.variable.name(),
                    s.sweep_value,
                    s.mean_bits,
                    s.mean_energy_j,
                    s.solved,
                    seeds
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Trace { common } => {
            let cfg = common.build()?;
            let p = cfg.system_params();
            let ch = sample_channels(&cfg.geometry(), &p, &cfg.channel_config())?;
            let r = bcd_solve(&ch, &p, &cfg.solver_config())?;
            println!("iteration,m,k,tau_ms,bits");
            for rec in &r.trace {
                println!(
                    "{},{},{},{:.9e},{:.9e}",
                    rec.iteration,
                    rec.m,
                    rec.k,
                    rec.tau * 1e3,
                    rec.bits
                );
            }
            println!("# status: {}", status_name(r.status));
            Ok(status_exit(r.status))
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
