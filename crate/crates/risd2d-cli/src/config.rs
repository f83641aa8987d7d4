//! Flat `key = value` run configuration with strict unknown-key rejection.
//!
//! Units in the file are the human-scale ones printed by the tools
//! (milliseconds, dBm, MHz, GHz); they are converted to SI on the way into
//! the library types.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use risd2d::channel::{ChannelConfig, LosFlags};
use risd2d::model::ChannelMode;
use risd2d::oracle::OracleConfig;
use risd2d::params::{dbm_to_watts, Geometry, SystemParams};
use risd2d::solver::{BlockSolver, SolverConfig};

/// Everything a run needs, in file units.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub total_time_ms: f64,
    pub num_elements: usize,
    pub noise_dbm: f64,
    pub efficiency_factor: f64,
    pub bs_power_w: f64,
    pub min_harvest_energy_mj: f64,
    pub sampling_rate_bps: f64,
    pub bandwidth_mhz: f64,
    pub element_power_uw: f64,
    pub carrier_ghz: f64,
    pub reflection_amplitude: f64,

    pub bs_x_m: f64,
    pub bs_y_m: f64,
    pub s_x_m: f64,
    pub s_y_m: f64,
    pub d_x_m: f64,
    pub d_y_m: f64,
    pub ris_distance_m: f64,

    pub seed: u64,
    pub los_bs_s: bool,
    pub los_bs_ris: bool,
    pub los_ris_s: bool,
    pub los_s_d: bool,
    pub los_s_ris: bool,
    pub los_ris_d: bool,
    pub mode: ChannelMode,

    pub block: BlockSolver,
    pub max_outer_iters: usize,
    pub rel_tol: f64,
    pub dinkelbach_max_iters: usize,
    pub dinkelbach_tol: f64,
    pub tau_tol_ms: f64,
    pub init_m: Option<usize>,
    pub init_k: Option<usize>,
    pub init_tau_ms: Option<f64>,

    pub tau_grid_points: usize,
    pub refine_passes: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = SystemParams::default();
        let g = Geometry::default();
        let c = ChannelConfig::default();
        let s = SolverConfig::default();
        let o = OracleConfig::default();
        RunConfig {
            total_time_ms: p.total_time * 1e3,
            num_elements: p.num_elements,
            noise_dbm: -94.0,
            efficiency_factor: p.efficiency_factor,
            bs_power_w: p.bs_power,
            min_harvest_energy_mj: p.min_harvest_energy * 1e3,
            sampling_rate_bps: p.sampling_rate,
            bandwidth_mhz: p.bandwidth / 1e6,
            element_power_uw: p.element_power * 1e6,
            carrier_ghz: p.carrier_freq / 1e9,
            reflection_amplitude: p.reflection_amplitude,
            bs_x_m: g.bs_pos[0],
            bs_y_m: g.bs_pos[1],
            s_x_m: g.s_pos[0],
            s_y_m: g.s_pos[1],
            d_x_m: g.d_pos[0],
            d_y_m: g.d_pos[1],
            ris_distance_m: g.d_ris_s(),
            seed: c.seed,
            los_bs_s: c.los.bs_s,
            los_bs_ris: c.los.bs_ris,
            los_ris_s: c.los.ris_s,
            los_s_d: c.los.s_d,
            los_s_ris: c.los.s_ris,
            los_ris_d: c.los.ris_d,
            mode: c.mode,
            block: s.block_solver,
            max_outer_iters: s.max_outer_iters,
            rel_tol: s.rel_tol,
            dinkelbach_max_iters: s.dinkelbach_max_iters,
            dinkelbach_tol: s.dinkelbach_tol,
            tau_tol_ms: s.tau_bracket_tol * 1e3,
            init_m: None,
            init_k: None,
            init_tau_ms: None,
            tau_grid_points: o.tau_grid_points,
            refine_passes: o.refine_passes,
        }
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => bail!("key `{key}`: expected a boolean, got `{other}`"),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse()
        .map_err(|e| anyhow!("key `{key}`: cannot parse `{v}`: {e}"))
}

fn parse_opt_usize(key: &str, v: &str) -> Result<Option<usize>> {
    if v == "auto" {
        Ok(None)
    } else {
        parse_num(key, v).map(Some)
    }
}

impl RunConfig {
    /// Applies one `key = value` assignment; unknown keys are an error that
    /// names the key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "sys.total_time_ms" => self.total_time_ms = parse_num(key, v)?,
            "sys.num_elements" => self.num_elements = parse_num(key, v)?,
            "sys.noise_dbm" => self.noise_dbm = parse_num(key, v)?,
            "sys.efficiency_factor" => self.efficiency_factor = parse_num(key, v)?,
            "sys.bs_power_w" => self.bs_power_w = parse_num(key, v)?,
            "sys.min_harvest_energy_mj" => self.min_harvest_energy_mj = parse_num(key, v)?,
            "sys.sampling_rate_bps" => self.sampling_rate_bps = parse_num(key, v)?,
            "sys.bandwidth_mhz" => self.bandwidth_mhz = parse_num(key, v)?,
            "sys.element_power_uw" => self.element_power_uw = parse_num(key, v)?,
            "sys.carrier_ghz" => self.carrier_ghz = parse_num(key, v)?,
            "sys.reflection_amplitude" => self.reflection_amplitude = parse_num(key, v)?,
            "geom.bs_x_m" => self.bs_x_m = parse_num(key, v)?,
            "geom.bs_y_m" => self.bs_y_m = parse_num(key, v)?,
            "geom.s_x_m" => self.s_x_m = parse_num(key, v)?,
            "geom.s_y_m" => self.s_y_m = parse_num(key, v)?,
            "geom.d_x_m" => self.d_x_m = parse_num(key, v)?,
            "geom.d_y_m" => self.d_y_m = parse_num(key, v)?,
            "geom.ris_distance_m" => self.ris_distance_m = parse_num(key, v)?,
            "chan.seed" => self.seed = parse_num(key, v)?,
            "chan.los_bs_s" => self.los_bs_s = parse_bool(key, v)?,
            "chan.los_bs_ris" => self.los_bs_ris = parse_bool(key, v)?,
            "chan.los_ris_s" => self.los_ris_s = parse_bool(key, v)?,
            "chan.los_s_d" => self.los_s_d = parse_bool(key, v)?,
            "chan.los_s_ris" => self.los_s_ris = parse_bool(key, v)?,
            "chan.los_ris_d" => self.los_ris_d = parse_bool(key, v)?,
            "chan.mode" => {
                self.mode = match v {
                    "paper-mean" => ChannelMode::PaperMean,
                    "exact-sum" => ChannelMode::ExactSum,
                    other => bail!("key `chan.mode`: expected paper-mean or exact-sum, got `{other}`"),
                }
            }
            "solver.block" => {
                self.block = match v {
                    "direct-scan" => BlockSolver::DirectScan,
                    "paper-sca" => BlockSolver::PaperSca,
                    other => bail!("key `solver.block`: expected direct-scan or paper-sca, got `{other}`"),
                }
            }
            "solver.max_outer_iters" => self.max_outer_iters = parse_num(key, v)?,
            "solver.rel_tol" => self.rel_tol = parse_num(key, v)?,
            "solver.dinkelbach_max_iters" => self.dinkelbach_max_iters = parse_num(key, v)?,
            "solver.dinkelbach_tol" => self.dinkelbach_tol = parse_num(key, v)?,
            "solver.tau_tol_ms" => self.tau_tol_ms = parse_num(key, v)?,
            "solver.init_m" => self.init_m = parse_opt_usize(key, v)?,
            "solver.init_k" => self.init_k = parse_opt_usize(key, v)?,
            "solver.init_tau_ms" => {
                self.init_tau_ms = if v == "auto" {
                    None
                } else {
                    Some(parse_num(key, v)?)
                }
            }
            "oracle.tau_grid_points" => self.tau_grid_points = parse_num(key, v)?,
            "oracle.refine_passes" => self.refine_passes = parse_num(key, v)?,
            other => bail!("unknown configuration key `{other}`"),
        }
        Ok(())
    }

    /// Parses a full `key = value` file (# starts a comment, blank lines
    /// are skipped).
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("{}:{}: expected `key = value`", path.display(), lineno + 1))?;
            self.set(key.trim(), value.trim())
                .with_context(|| format!("{}:{}", path.display(), lineno + 1))?;
        }
        Ok(())
    }

    /// Applies a `key=value` command-line override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| anyhow!("--set expects key=value, got `{assignment}`"))?;
        self.set(key.trim(), value.trim())
    }

    /// The effective configuration as a parseable `key = value` document.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mode = match self.mode {
            ChannelMode::PaperMean => "paper-mean",
            ChannelMode::ExactSum => "exact-sum",
        };
        let block = match self.block {
            BlockSolver::DirectScan => "direct-scan",
            BlockSolver::PaperSca => "paper-sca",
        };
        let opt = |v: Option<usize>| v.map_or("auto".to_string(), |x| x.to_string());
        let _ = writeln!(out, "sys.total_time_ms = {}", self.total_time_ms);
        let _ = writeln!(out, "sys.num_elements = {}", self.num_elements);
        let _ = writeln!(out, "sys.noise_dbm = {}", self.noise_dbm);
        let _ = writeln!(out, "sys.efficiency_factor = {}", self.efficiency_factor);
        let _ = writeln!(out, "sys.bs_power_w = {}", self.bs_power_w);
        let _ = writeln!(out, "sys.min_harvest_energy_mj = {}", self.min_harvest_energy_mj);
        let _ = writeln!(out, "sys.sampling_rate_bps = {}", self.sampling_rate_bps);
        let _ = writeln!(out, "sys.bandwidth_mhz = {}", self.bandwidth_mhz);
        let _ = writeln!(out, "sys.element_power_uw = {}", self.element_power_uw);
        let _ = writeln!(out, "sys.carrier_ghz = {}", self.carrier_ghz);
        let _ = writeln!(out, "sys.reflection_amplitude = {}", self.reflection_amplitude);
        let _ = writeln!(out, "geom.bs_x_m = {}", self.bs_x_m);
        let _ = writeln!(out, "geom.bs_y_m = {}", self.bs_y_m);
        let _ = writeln!(out, "geom.s_x_m = {}", self.s_x_m);
        let _ = writeln!(out, "geom.s_y_m = {}", self.s_y_m);
        let _ = writeln!(out, "geom.d_x_m = {}", self.d_x_m);
        let _ = writeln!(out, "geom.d_y_m = {}", self.d_y_m);
        let _ = writeln!(out, "geom.ris_distance_m = {}", self.ris_distance_m);
        let _ = writeln!(out, "chan.seed = {}", self.seed);
        let _ = writeln!(out, "chan.los_bs_s = {}", self.los_bs_s);
        let _ = writeln!(out, "chan.los_bs_ris = {}", self.los_bs_ris);
        let _ = writeln!(out, "chan.los_ris_s = {}", self.los_ris_s);
        let _ = writeln!(out, "chan.los_s_d = {}", self.los_s_d);
        let _ = writeln!(out, "chan.los_s_ris = {}", self.los_s_ris);
        let _ = writeln!(out, "chan.los_ris_d = {}", self.los_ris_d);
        let _ = writeln!(out, "chan.mode = {mode}");
        let _ = writeln!(out, "solver.block = {block}");
        let _ = writeln!(out, "solver.max_outer_iters = {}", self.max_outer_iters);
        let _ = writeln!(out, "solver.rel_tol = {}", self.rel_tol);
        let _ = writeln!(out, "solver.dinkelbach_max_iters = {}", self.dinkelbach_max_iters);
        let _ = writeln!(out, "solver.dinkelbach_tol = {}", self.dinkelbach_tol);
        let _ = writeln!(out, "solver.tau_tol_ms = {}", self.tau_tol_ms);
        let _ = writeln!(out, "solver.init_m = {}", opt(self.init_m));
        let _ = writeln!(out, "solver.init_k = {}", opt(self.init_k));
        let _ = writeln!(
            out,
            "solver.init_tau_ms = {}",
            self.init_tau_ms.map_or("auto".to_string(), |x| x.to_string())
        );
        let _ = writeln!(out, "oracle.tau_grid_points = {}", self.tau_grid_points);
        let _ = writeln!(out, "oracle.refine_passes = {}", self.refine_passes);
        out
    }

    pub fn system_params(&self) -> SystemParams {
        SystemParams {
            total_time: self.total_time_ms / 1e3,
            num_elements: self.num_elements,
            noise_power: dbm_to_watts(self.noise_dbm),
            efficiency_factor: self.efficiency_factor,
            bs_power: self.bs_power_w,
            min_harvest_energy: self.min_harvest_energy_mj / 1e3,
            sampling_rate: self.sampling_rate_bps,
            bandwidth: self.bandwidth_mhz * 1e6,
            element_power: self.element_power_uw / 1e6,
            carrier_freq: self.carrier_ghz * 1e9,
            reflection_amplitude: self.reflection_amplitude,
        }
    }

    pub fn geometry(&self) -> Geometry {
        Geometry {
            bs_pos: [self.bs_x_m, self.bs_y_m],
            s_pos: [self.s_x_m, self.s_y_m],
            d_pos: [self.d_x_m, self.d_y_m],
            ris_pos: [0.0, 0.0],
        }
        .with_ris_distance(self.ris_distance_m)
    }

    pub fn channel_config(&self) -> ChannelConfig {
        ChannelConfig {
            seed: self.seed,
            los: LosFlags {
                bs_s: self.los_bs_s,
                bs_ris: self.los_bs_ris,
                ris_s: self.los_ris_s,
                s_d: self.los_s_d,
                s_ris: self.los_s_ris,
                ris_d: self.los_ris_d,
            },
            mode: self.mode,
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            max_outer_iters: self.max_outer_iters,
            rel_tol: self.rel_tol,
            dinkelbach_max_iters: self.dinkelbach_max_iters,
            dinkelbach_tol: self.dinkelbach_tol,
            tau_bracket_tol: self.tau_tol_ms / 1e3,
            init_m: self.init_m,
            init_k: self.init_k,
            init_tau: self.init_tau_ms.map(|ms| ms / 1e3),
            block_solver: self.block,
        }
    }

    pub fn oracle_config(&self) -> OracleConfig {
        OracleConfig {
            tau_grid_points: self.tau_grid_points,
            refine_passes: self.refine_passes,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.set("sys.efficiency_factor", "0.7").unwrap();
        cfg.set("solver.block", "paper-sca").unwrap();
        cfg.set("solver.init_m", "12").unwrap();
        let rendered = cfg.render();
        let mut parsed = RunConfig::default();
        for line in rendered.lines() {
            let (k, v) = line.split_once('=').unwrap();
            parsed.set(k.trim(), v.trim()).unwrap();
        }
        assert_eq!(cfg, parsed);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::default().set("sys.nope", "1").unwrap_err();
        assert!(err.to_string().contains("sys.nope"));
    }

    #[test]
    fn unit_conversions() {
        let cfg = RunConfig::default();
        let p = cfg.system_params();
        assert_eq!(p.total_time, 0.1);
        assert_eq!(p.bandwidth, 1e6);
        assert_eq!(p.carrier_freq, 3e9);
        assert!((p.noise_power - dbm_to_watts(-94.0)).abs() < 1e-30);
        let g = cfg.geometry();
        assert!((g.d_ris_s() - 0.1).abs() < 1e-9);
    }
}
