//! Block-coordinate solution of the three-variable program: optimize the
//! phase-1 element count `m`, the phase-2 element count `k`, and the D2D
//! slot `tau` in turn until the objective stops improving.
//!
//! Each integer block has two interchangeable solvers: `DirectScan`
//! exhaustively scans the block variable (exact per block), `PaperSca`
//! follows the slack-variable / Dinkelbach / first-order-Taylor path with
//! the continuous solution rounded to a feasible integer.

use crate::error::{Error, Result};
use crate::model::{bits_transmitted, check_feasibility, harvested_energy, ChannelRealization, Decision};
use crate::params::SystemParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockSolver {
    PaperSca,
    DirectScan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub max_outer_iters: usize,
    pub rel_tol: f64,
    pub dinkelbach_max_iters: usize,
    pub dinkelbach_tol: f64,
    /// Width tolerance for the golden-section search over `tau`, seconds.
    pub tau_bracket_tol: f64,
    /// Initial element counts; `None` means `ceil(N / 2)`.
    pub init_m: Option<usize>,
    pub init_k: Option<usize>,
    /// Initial D2D slot; `None` means `T / 2`.
    pub init_tau: Option<f64>,
    pub block_solver: BlockSolver,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_outer_iters: 50,
            rel_tol: 1e-6,
            dinkelbach_max_iters: 30,
            dinkelbach_tol: 1e-8,
            tau_bracket_tol: 1e-9,
            init_m: None,
            init_k: None,
            init_tau: None,
            block_solver: BlockSolver::DirectScan,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self, p: &SystemParams) -> Result<()> {
        if self.max_outer_iters < 1 || self.dinkelbach_max_iters < 1 {
            return Err(Error::invalid("max_iters", "iteration caps must be >= 1"));
        }
        if !(self.rel_tol > 0.0) || !(self.dinkelbach_tol > 0.0) || !(self.tau_bracket_tol > 0.0) {
            return Err(Error::invalid("tolerances", "must be > 0"));
        }
        if let Some(tau) = self.init_tau {
            if !(tau > 0.0 && tau < p.total_time) {
                return Err(Error::invalid("init_tau", "must be in (0, T)"));
            }
        }
        for (name, v) in [("init_m", self.init_m), ("init_k", self.init_k)] {
            if let Some(v) = v {
                if v > p.num_elements {
                    return Err(Error::invalid(name, "must be <= N"));
                }
            }
        }
        Ok(())
    }
}

/// Signals that a block has no feasible point, naming the constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("block infeasible at {constraint}")]
pub struct BlockInfeasible {
    pub constraint: &'static str,
}

pub type BlockResult<T> = std::result::Result<T, BlockInfeasible>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIters,
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub m: usize,
    pub k: usize,
    pub tau: f64,
    pub bits: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub best: Option<Decision>,
    pub trace: Vec<IterationRecord>,
    pub status: SolveStatus,
    /// Names the failing constraint when `status == Infeasible`.
    pub diagnostic: Option<String>,
}

/// SCA/scan agreement counters gathered by [`bcd_solve_compared`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BlockAgreement {
    pub sp1_calls: usize,
    pub sp1_mismatches: usize,
    pub sp2_calls: usize,
    pub sp2_mismatches: usize,
    /// Times the SCA block objective exceeded the exhaustive scan's
    /// (must stay zero; the scan is exact per block).
    pub sca_exceeded_scan: usize,
}

impl BlockAgreement {
    pub fn mismatches(&self) -> usize {
        self.sp1_mismatches + self.sp2_mismatches
    }
}

// ---------------------------------------------------------------------------
// Scalar search primitives
// ---------------------------------------------------------------------------

/// Golden-section maximization of a unimodal `f` on `[a, b]`.
pub(crate) fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > tol {
        if f1 > f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    let xm = 0.5 * (a + b);
    (xm, f(xm))
}

/// Given `g(feasible) >= 0 > g(infeasible)`, bisects and returns a point on
/// the feasible side of the boundary.
fn bisect_feasible_boundary(
    g: impl Fn(f64) -> f64,
    mut feasible: f64,
    mut infeasible: f64,
    tol: f64,
) -> f64 {
    while (feasible - infeasible).abs() > tol {
        let mid = 0.5 * (feasible + infeasible);
        if g(mid) >= 0.0 {
            feasible = mid;
        } else {
            infeasible = mid;
        }
    }
    feasible
}

// ---------------------------------------------------------------------------
// Dinkelbach fractional programming
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DinkelbachResult<X> {
    pub maximizer: X,
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Iterates `lambda_{j+1} = P(r_j) / Q(r_j)` where `evaluate(lambda)` solves
/// the parameterized problem `max P - lambda Q` and reports the maximizer
/// with its `P` and `Q`. Stops when `|P - lambda Q|` is below the tolerance
/// (scaled by `max(1, |P|)`) or the iteration cap is reached; the cap case
/// returns the last iterate with `converged == false`.
pub fn dinkelbach_solve<X, F>(
    mut evaluate: F,
    lambda0: f64,
    max_iters: usize,
    tol: f64,
) -> Result<DinkelbachResult<X>>
where
    F: FnMut(f64) -> Result<(X, f64, f64)>,
{
    let mut lambda = lambda0;
    let mut last: Option<(X, f64)> = None;
    for it in 1..=max_iters {
        let (x, p, q) = evaluate(lambda)?;
        if !(q > 0.0) {
            return Err(Error::NumericDomain(format!(
                "Dinkelbach denominator must be positive, got {q}"
            )));
        }
        let residual = p - lambda * q;
        let ratio = p / q;
        if residual.abs() <= tol * p.abs().max(1.0) {
            return Ok(DinkelbachResult {
                maximizer: x,
                lambda: ratio,
                iterations: it,
                converged: true,
            });
        }
        lambda = ratio;
        last = Some((x, ratio));
    }
    let (x, ratio) = last.expect("max_iters >= 1");
    Ok(DinkelbachResult {
        maximizer: x,
        lambda: ratio,
        iterations: max_iters,
        converged: false,
    })
}

// ---------------------------------------------------------------------------
// Sub-problem 1: phase-1 element count m
// ---------------------------------------------------------------------------

fn sp1_feasible(m: usize, tau: f64, ch: &ChannelRealization, p: &SystemParams) -> (bool, bool) {
    let n = ch.num_elements() as f64;
    let e = harvested_energy(m, tau, ch, p).unwrap_or(0.0);
    let c1 = p.min_harvest_energy <= e;
    let c2 = m as f64 * p.element_power <= (n - m as f64) * e;
    (c1, c2)
}

fn sp1_direct_scan(tau: f64, ch: &ChannelRealization, p: &SystemParams) -> BlockResult<usize> {
    let n = ch.num_elements();
    let mut best: Option<(f64, usize)> = None;
    let mut any_c1 = false;
    for m in 0..=n {
        let (c1, c2) = sp1_feasible(m, tau, ch, p);
        any_c1 |= c1;
        if c1 && c2 {
            let e = harvested_energy(m, tau, ch, p).unwrap();
            if best.map_or(true, |(be, _)| e > be) {
                best = Some((e, m));
            }
        }
    }
    match best {
        Some((_, m)) => Ok(m),
        None => Err(BlockInfeasible {
            constraint: if any_c1 { "C2" } else { "C1" },
        }),
    }
}

/// Largest root of the concave quadratic `a x^2 + b x + c` (`a <= 0`),
/// assuming the feasible region `{q >= 0}` contains a point `>= 0`.
fn largest_root(a: f64, b: f64, c: f64) -> Option<f64> {
    if a == 0.0 {
        if b >= 0.0 {
            return Some(f64::INFINITY);
        }
        return Some(-c / b);
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let r1 = (-b + sq) / (2.0 * a);
    let r2 = (-b - sq) / (2.0 * a);
    Some(r1.max(r2))
}

fn sp1_paper_sca(
    m_star: usize,
    k: usize,
    tau: f64,
    ch: &ChannelRealization,
    p: &SystemParams,
    cfg: &SolverConfig,
) -> Result<BlockResult<usize>> {
    let n = ch.num_elements();
    let nf = n as f64;
    let t = p.total_time;
    let a_direct = ch.h_bs.norm();
    let slope = p.reflection_amplitude * ch.h2_mag;
    let c = p.efficiency_factor * (t - tau) * p.bs_power;
    // Product-form linearization at the feasible point m*:
    // e_lin(m) = c (A + B m)(A + B m*).
    let cstar = c * (a_direct + slope * m_star as f64);

    // Lower bound from the harvest threshold.
    let mut m_lo = 0.0f64;
    if p.min_harvest_energy > 0.0 {
        if cstar <= 0.0 {
            return Ok(Err(BlockInfeasible { constraint: "C1" }));
        }
        let need = p.min_harvest_energy / cstar; // A + B m >= need
        if slope > 0.0 {
            m_lo = m_lo.max((need - a_direct) / slope);
        } else if a_direct < need {
            return Ok(Err(BlockInfeasible { constraint: "C1" }));
        }
    }
    // Lower bound from the sampled-bits constraint through the slack
    // variable (objective and constraint share the same log form).
    if p.sampling_rate > 0.0 {
        let gain2 = ch.phase2_gain(k, p);
        let d1 = gain2 * gain2 / (tau * p.noise_power);
        let req = p.sampling_rate * (t - tau) / (p.bandwidth * tau);
        let e_req = (req.exp2() - 1.0) / d1;
        if e_req.is_finite() && e_req > 0.0 {
            if cstar <= 0.0 {
                return Ok(Err(BlockInfeasible { constraint: "C4" }));
            }
            let need = e_req / cstar;
            if slope > 0.0 {
                m_lo = m_lo.max((need - a_direct) / slope);
            } else if a_direct < need {
                return Ok(Err(BlockInfeasible { constraint: "C4" }));
            }
        } else if !e_req.is_finite() {
            return Ok(Err(BlockInfeasible { constraint: "C4" }));
        }
    }
    if m_lo > nf {
        return Ok(Err(BlockInfeasible { constraint: "C1" }));
    }

    // Element-power budget in Dinkelbach form on the ratio
    // f(m) / m with f(m) = (N - m) e_lin(m) / y.
    let m_cont = if p.element_power > 0.0 {
        let scale = cstar / p.element_power;
        let qa = -scale * slope;
        let qb0 = scale * (nf * slope - a_direct);
        let qc = scale * nf * a_direct;
        let eval = |lambda: f64| -> Result<(f64, f64, f64)> {
            let root = largest_root(qa, qb0 - lambda, qc)
                .ok_or_else(|| Error::NumericDomain("no feasible root".into()))?;
            let m = root.min(nf);
            if m <= 0.0 {
                // Ratio undefined at zero; report as a degenerate point.
                return Ok((0.0, 0.0, f64::MIN_POSITIVE));
            }
            let p_val = (nf - m) * cstar * (a_direct + slope * m) / p.element_power;
            Ok((m, p_val, m))
        };
        let dk = dinkelbach_solve(eval, 1.0, cfg.dinkelbach_max_iters, cfg.dinkelbach_tol)?;
        dk.maximizer
    } else {
        nf
    };
    if m_cont < m_lo {
        return Ok(Err(BlockInfeasible { constraint: "C2" }));
    }

    // Integer recovery: round to nearest, then walk down (and finally up)
    // until the true block constraints hold.
    let rounded = m_cont.round().clamp(0.0, nf) as usize;
    let candidates = (0..=rounded)
        .rev()
        .chain(rounded + 1..=n)
        .collect::<Vec<_>>();
    let mut any_c1 = false;
    for m in candidates {
        let (c1, c2) = sp1_feasible(m, tau, ch, p);
        any_c1 |= c1;
        if c1 && c2 {
            return Ok(Ok(m));
        }
    }
    Ok(Err(BlockInfeasible {
        constraint: if any_c1 { "C2" } else { "C1" },
    }))
}

/// Optimizes the phase-1 element count for fixed `(k, tau)`. `m_prev` is the
/// feasible point used by the SCA linearization; `DirectScan` ignores it.
pub fn solve_sp1(
    m_prev: usize,
    k: usize,
    tau: f64,
    ch: &ChannelRealization,
    p: &SystemParams,
    cfg: &SolverConfig,
) -> Result<BlockResult<usize>> {
    match cfg.block_solver {
        BlockSolver::DirectScan => Ok(sp1_direct_scan(tau, ch, p)),
        BlockSolver::PaperSca => sp1_paper_sca(m_prev, k, tau, ch, p, cfg),
    }
}

// ---------------------------------------------------------------------------
// Sub-problem 2: phase-2 element count k
// ---------------------------------------------------------------------------

fn sp2_feasible(
    k: usize,
    energy: f64,
    tau: f64,
    ch: &ChannelRealization,
    p: &SystemParams,
) -> (bool, bool, f64) {
    let n = ch.num_elements() as f64;
    let c3 = k as f64 * p.element_power <= (n - k as f64) * energy;
    let bits = bits_transmitted(k, tau, energy, ch, p).unwrap_or(0.0);
    let c4 = p.sampling_rate * (p.total_time - tau) <= bits;
    (c3, c4, bits)
}

fn sp2_direct_scan(
    m: usize,
    tau: f64,
    ch: &ChannelRealization,
    p: &SystemParams,
) -> BlockResult<usize> {
    let n = ch.num_elements();
    let energy = match harvested_energy(m, tau, ch, p) {
        Ok(e) => e,
        Err(_) => return Err(BlockInfeasible { constraint: "C1" }),
    };
    let mut best: Option<(f64, usize)> = None;
    let mut any_c3 = false;
    for k in 0..=n {
        let (c3, c4, bits) = sp2_feasible(k, energy, tau, ch, p);
        any_c3 |= c3;
        if c3 && c4 && best.map_or(true, |(bb, _)| bits > bb) {
            best = Some((bits, k));
        }
    }
    match best {
        Some((_, k)) => Ok(k),
        None => Err(BlockInfeasible {
            constraint: if any_c3 { "C4" } else { "C3" },
        }),
    }
}

fn sp2_paper_sca(
    k_star: usize,
    m: usize,
    tau: f64,
    ch: &ChannelRealization,
    p: &SystemParams,
    cfg: &SolverConfig,
) -> Result<BlockResult<usize>> {
    let n = ch.num_elements();
    let nf = n as f64;
    let t = p.total_time;
    let energy = harvested_energy(m, tau, ch, p)?;
    let a_direct = ch.h_sd.norm();
    let slope = p.reflection_amplitude * ch.h1_mag;

    // Sampled-bits lower bound via the slack variable, Taylor product form
    // (h_sd + B k)(h_sd + B k*).
    let mut k_lo = 0.0f64;
    if p.sampling_rate > 0.0 {
        if energy <= 0.0 {
            return Ok(Err(BlockInfeasible { constraint: "C4" }));
        }
        let req = p.sampling_rate * (t - tau) / (p.bandwidth * tau);
        let s_req = (req.exp2() - 1.0) * tau * p.noise_power / energy;
        let astar = a_direct + slope * k_star as f64;
        if astar <= 0.0 {
            return Ok(Err(BlockInfeasible { constraint: "C4" }));
        }
        let need = s_req / astar; // h_sd + B k >= need
        if slope > 0.0 {
            k_lo = k_lo.max((need - a_direct) / slope);
        } else if a_direct < need {
            return Ok(Err(BlockInfeasible { constraint: "C4" }));
        }
    }
    if k_lo > nf {
        return Ok(Err(BlockInfeasible { constraint: "C4" }));
    }

    // Element-power budget: k y <= (N - k) e, a linear fractional constraint
    // handled with the same Dinkelbach machinery.
    let k_cont = if p.element_power > 0.0 {
        let eval = |lambda: f64| -> Result<(f64, f64, f64)> {
            let k = (nf * energy / (lambda * p.element_power + energy)).min(nf);
            if k <= 0.0 {
                return Ok((0.0, 0.0, f64::MIN_POSITIVE));
            }
            Ok((k, (nf - k) * energy / p.element_power, k))
        };
        let dk = dinkelbach_solve(eval, 1.0, cfg.dinkelbach_max_iters, cfg.dinkelbach_tol)?;
        dk.maximizer
    } else {
        nf
    };
    if k_cont < k_lo {
        return Ok(Err(BlockInfeasible { constraint: "C3" }));
    }

    let rounded = k_cont.round().clamp(0.0, nf) as usize;
    let candidates = (0..=rounded)
        .rev()
        .chain(rounded + 1..=n)
        .collect::<Vec<_>>();
    let mut any_c3 = false;
    for k in candidates {
        let (c3, c4, _) = sp2_feasible(k, energy, tau, ch, p);
        any_c3 |= c3;
        if c3 && c4 {
            return Ok(Ok(k));
        }
    }
    Ok(Err(BlockInfeasible {
        constraint: if any_c3 { "C4" } else { "C3" },
    }))
}

/// Optimizes the phase-2 element count for fixed `(m, tau)`. `k_prev` is the
/// SCA linearization point; `DirectScan` ignores it.
pub fn solve_sp2(
    k_prev: usize,
    m: usize,
    tau: f64,
    ch: &ChannelRealization,
    p: &SystemParams,
    cfg: &SolverConfig,
) -> Result<BlockResult<usize>> {
    match cfg.block_solver {
        BlockSolver::DirectScan => Ok(sp2_direct_scan(m, tau, ch, p)),
        BlockSolver::PaperSca => sp2_paper_sca(k_prev, m, tau, ch, p, cfg),
    }
}

// ---------------------------------------------------------------------------
// Sub-problem 3: D2D slot tau
// ---------------------------------------------------------------------------

/// Harvest rate `d3 = zeta Ps gain1(m)^2` (energy per second of phase 1)
/// and effective SNR coefficient `d4 = d3 gain2(k)^2 / sigma^2`, so that the
/// objective reads `W tau log2(1 + d4 (T - tau) / tau)`.
pub(crate) fn rate_coeffs(
    m: usize,
    k: usize,
    ch: &ChannelRealization,
    p: &SystemParams,
) -> (f64, f64) {
    let g1 = ch.phase1_gain(m, p);
    let g2 = ch.phase2_gain(k, p);
    let d3 = p.efficiency_factor * p.bs_power * g1 * g1;
    let d4 = d3 * g2 * g2 / p.noise_power;
    (d3, d4)
}

/// Optimizes the D2D slot for fixed `(m, k)` by intersecting the
/// closed-form feasibility bounds with the sampled-bits region (bracketed
/// through sign changes of its concave slack) and golden-section maximizing
/// the objective inside.
pub fn solve_sp3(
    m: usize,
    k: usize,
    ch: &ChannelRealization,
    p: &SystemParams,
    cfg: &SolverConfig,
) -> Result<BlockResult<f64>> {
    let t = p.total_time;
    let n = ch.num_elements() as f64;
    let (d3, d4) = rate_coeffs(m, k, ch, p);

    // Upper bounds on tau from C1/C2/C3, which are linear in (T - tau).
    let mut hi = t;
    if p.min_harvest_energy > 0.0 {
        if d3 <= 0.0 {
            return Ok(Err(BlockInfeasible { constraint: "C1" }));
        }
        hi = hi.min(t - p.min_harvest_energy / d3);
        if hi <= 0.0 {
            return Ok(Err(BlockInfeasible { constraint: "C1" }));
        }
    }
    for (count, name) in [(m, "C2"), (k, "C3")] {
        if count > 0 && p.element_power > 0.0 {
            let rest = n - count as f64;
            if rest <= 0.0 || d3 <= 0.0 {
                return Ok(Err(BlockInfeasible { constraint: name }));
            }
            let bound = t - count as f64 * p.element_power / (rest * d3);
            hi = hi.min(bound);
            if hi <= 0.0 {
                return Ok(Err(BlockInfeasible { constraint: name }));
            }
        }
    }
    if hi >= t {
        hi = t * (1.0 - 1e-12); // C5 keeps tau strictly below T
    }
    let lo = t * 1e-9;
    if hi <= lo {
        return Ok(Err(BlockInfeasible { constraint: "C5" }));
    }

    let objective = |tau: f64| p.bandwidth * tau * (1.0 + d4 * (t - tau) / tau).log2();

    let (tau_lo, tau_hi) = if p.sampling_rate > 0.0 {
        // Concave surplus of bits over the sampled-bits requirement; its
        // nonnegative region is an interval.
        let surplus = |tau: f64| objective(tau) - p.sampling_rate * (t - tau);
        let (tau_peak, peak) = golden_section_max(&surplus, lo, hi, cfg.tau_bracket_tol);
        if peak < 0.0 {
            return Ok(Err(BlockInfeasible { constraint: "C4" }));
        }
        let left = if surplus(lo) >= 0.0 {
            lo
        } else {
            bisect_feasible_boundary(&surplus, tau_peak, lo, cfg.tau_bracket_tol)
        };
        let right = if surplus(hi) >= 0.0 {
            hi
        } else {
            bisect_feasible_boundary(&surplus, tau_peak, hi, cfg.tau_bracket_tol)
        };
        (left, right)
    } else {
        (lo, hi)
    };

    let (tau_opt, _) = golden_section_max(&objective, tau_lo, tau_hi, cfg.tau_bracket_tol);
    Ok(Ok(tau_opt))
}

// ---------------------------------------------------------------------------
// Outer loop
// ---------------------------------------------------------------------------

fn infeasible_result(trace: Vec<IterationRecord>, block: &str, why: BlockInfeasible) -> SolveResult {
    SolveResult {
        best: None,
        trace,
        status: SolveStatus::Infeasible,
        diagnostic: Some(format!("{block}: {why}")),
    }
}

fn bcd_run(
    ch: &ChannelRealization,
    p: &SystemParams,
    cfg: &SolverConfig,
    compare: bool,
) -> Result<(SolveResult, BlockAgreement)> {
    p.validate()?;
    cfg.validate(p)?;
    if ch.num_elements() != p.num_elements {
        return Err(Error::invalid(
            "num_elements",
            format!(
                "channel has {} elements, params say {}",
                ch.num_elements(),
                p.num_elements
            ),
        ));
    }
    let n = p.num_elements;
    let mut m = cfg.init_m.unwrap_or((n + 1) / 2);
    let mut k = cfg.init_k.unwrap_or((n + 1) / 2);
    let mut tau = cfg.init_tau.unwrap_or(p.total_time / 2.0);

    let mut agreement = BlockAgreement::default();
    let mut trace = Vec::new();
    let mut best: Option<Decision> = None;

    for it in 1..=cfg.max_outer_iters {
        m = match solve_sp1(m, k, tau, ch, p, cfg)? {
            Ok(v) => v,
            Err(why) => return Ok((infeasible_result(trace, "SP1", why), agreement)),
        };
        if compare {
            agreement.sp1_calls += 1;
            if let Ok(scan_m) = sp1_direct_scan(tau, ch, p) {
                if scan_m != m {
                    agreement.sp1_mismatches += 1;
                    let e_sca = harvested_energy(m, tau, ch, p)?;
                    let e_scan = harvested_energy(scan_m, tau, ch, p)?;
                    if e_sca > e_scan * (1.0 + 1e-12) {
                        agreement.sca_exceeded_scan += 1;
                    }
                }
            }
        }
        k = match solve_sp2(k, m, tau, ch, p, cfg)? {
            Ok(v) => v,
            Err(why) => return Ok((infeasible_result(trace, "SP2", why), agreement)),
        };
        if compare {
            agreement.sp2_calls += 1;
            if let Ok(scan_k) = sp2_direct_scan(m, tau, ch, p) {
                if scan_k != k {
                    agreement.sp2_mismatches += 1;
                    let e = harvested_energy(m, tau, ch, p)?;
                    let b_sca = bits_transmitted(k, tau, e, ch, p)?;
                    let b_scan = bits_transmitted(scan_k, tau, e, ch, p)?;
                    if b_sca > b_scan * (1.0 + 1e-12) {
                        agreement.sca_exceeded_scan += 1;
                    }
                }
            }
        }
        tau = match solve_sp3(m, k, ch, p, cfg)? {
            Ok(v) => v,
            Err(why) => return Ok((infeasible_result(trace, "SP3", why), agreement)),
        };

        let decision = Decision::evaluate(m, k, tau, ch, p)?;
        trace.push(IterationRecord {
            iteration: it,
            m,
            k,
            tau,
            bits: decision.bits,
        });
        let prev_bits = best.map(|d| d.bits);
        best = Some(decision);
        if let Some(prev) = prev_bits {
            if (decision.bits - prev).abs() <= cfg.rel_tol * prev.abs().max(f64::MIN_POSITIVE) {
                return Ok((
                    SolveResult {
                        best,
                        trace,
                        status: SolveStatus::Converged,
                        diagnostic: None,
                    },
                    agreement,
                ));
            }
        }
    }
    Ok((
        SolveResult {
            best,
            trace,
            status: SolveStatus::MaxIters,
            diagnostic: None,
        },
        agreement,
    ))
}

/// Runs the block-coordinate loop SP1 -> SP2 -> SP3 until the objective's
/// relative change drops below `rel_tol` or the iteration cap is hit.
pub fn bcd_solve(
    ch: &ChannelRealization,
    p: &SystemParams,
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    Ok(bcd_run(ch, p, cfg, false)?.0)
}

/// Like [`bcd_solve`], but additionally runs the exhaustive scan next to
/// every SCA block call and counts disagreements.
pub fn bcd_solve_compared(
    ch: &ChannelRealization,
    p: &SystemParams,
    cfg: &SolverConfig,
) -> Result<(SolveResult, BlockAgreement)> {
    bcd_run(ch, p, cfg, true)
}

/// Baseline without the RIS panel: `m = k = 0` forced, only `tau` optimized.
pub fn solve_no_ris(
    ch: &ChannelRealization,
    p: &SystemParams,
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    p.validate()?;
    cfg.validate(p)?;
    match solve_sp3(0, 0, ch, p, cfg)? {
        Ok(tau) => {
            let d = Decision::evaluate(0, 0, tau, ch, p)?;
            Ok(SolveResult {
                best: Some(d),
                trace: vec![IterationRecord {
                    iteration: 1,
                    m: 0,
                    k: 0,
                    tau,
                    bits: d.bits,
                }],
                status: SolveStatus::Converged,
                diagnostic: None,
            })
        }
        Err(why) => Ok(infeasible_result(Vec::new(), "SP3", why)),
    }
}

/// Convenience check used by callers that need a feasibility verdict for a
/// solved decision.
pub fn decision_feasible(d: &Decision, ch: &ChannelRealization, p: &SystemParams) -> bool {
    check_feasibility(d, ch, p).satisfied_within(1e-9)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_channels, ChannelConfig};
    use crate::model::ChannelMode;
    use crate::params::Geometry;
    use num_complex::Complex64;

    fn synthetic(n: usize, h_bs: f64, h_sd: f64, g1: f64, g2: f64) -> ChannelRealization {
        ChannelRealization::new(
            Complex64::new(h_bs, 0.0),
            Complex64::new(h_sd, 0.0),
            vec![g1; n],
            vec![g2; n],
            ChannelMode::PaperMean,
        )
        .unwrap()
    }

    fn sampled(seed: u64, n: usize) -> (ChannelRealization, SystemParams) {
        let p = SystemParams {
            num_elements: n,
            ..SystemParams::default()
        };
        let cfg = ChannelConfig {
            seed,
            ..ChannelConfig::default()
        };
        let ch = sample_channels(&Geometry::default(), &p, &cfg).unwrap();
        (ch, p)
    }

    #[test]
    fn golden_section_finds_quadratic_peak() {
        let (x, fx) = golden_section_max(|x| -(x - 0.3) * (x - 0.3) + 2.0, 0.0, 1.0, 1e-12);
        // The argument is only localized to ~sqrt(eps) on a flat peak; the
        // value is much tighter.
        assert!((x - 0.3).abs() < 1e-6);
        assert!((fx - 2.0).abs() < 1e-12);
    }

    #[test]
    fn dinkelbach_linear_over_affine() {
        // max 2x / (x + 1) on [0, 1]: maximizer 1, ratio 1.
        let eval = |lambda: f64| {
            let x = if 2.0 - lambda >= 0.0 { 1.0 } else { 0.0 };
            Ok((x, 2.0 * x, x + 1.0))
        };
        let r = dinkelbach_solve(eval, 0.0, 30, 1e-8).unwrap();
        assert!(r.converged);
        assert!((r.maximizer - 1.0).abs() < 1e-12);
        assert!((r.lambda - 1.0).abs() < 1e-8);
    }

    #[test]
    fn dinkelbach_constant_ratio_converges_immediately() {
        // P = 3 Q everywhere: lambda* = 3 after a single evaluation from
        // lambda0 = 3.
        let eval = |_lambda: f64| Ok((0.5, 1.5, 0.5));
        let r = dinkelbach_solve(eval, 3.0, 30, 1e-8).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 1);
        assert!((r.lambda - 3.0).abs() < 1e-12);
    }

    #[test]
    fn dinkelbach_affine_over_constant() {
        // max x / 1 on [0, 5]: maximizer 5, ratio 5.
        let eval = |_lambda: f64| Ok((5.0f64, 5.0, 1.0));
        let r = dinkelbach_solve(eval, 0.0, 30, 1e-8).unwrap();
        assert!(r.converged);
        assert!((r.maximizer - 5.0).abs() < 1e-12);
        assert!((r.lambda - 5.0).abs() < 1e-8);
    }

    #[test]
    fn dinkelbach_rejects_nonpositive_denominator() {
        let eval = |_lambda: f64| Ok((0.0, 1.0, 0.0));
        assert!(dinkelbach_solve(eval, 0.0, 30, 1e-8).is_err());
    }

    #[test]
    fn dinkelbach_reports_cap() {
        // Oscillating evaluator never satisfies the residual test.
        let mut flip = false;
        let eval = move |_lambda: f64| {
            flip = !flip;
            if flip {
                Ok((0.0, 10.0, 1.0))
            } else {
                Ok((1.0, 1.0, 10.0))
            }
        };
        let r = dinkelbach_solve(eval, 0.0, 4, 1e-12).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 4);
    }

    #[test]
    fn sp1_unconstrained_takes_all_elements() {
        let (ch, mut p) = sampled(1, 50);
        p.min_harvest_energy = 0.0;
        p.element_power = 0.0;
        assert_eq!(sp1_direct_scan(0.05, &ch, &p).unwrap(), 50);
    }

    #[test]
    fn sp1_huge_element_power_forces_zero() {
        let (ch, mut p) = sampled(1, 50);
        p.min_harvest_energy = 0.0;
        p.element_power = 1.0;
        assert_eq!(sp1_direct_scan(0.05, &ch, &p).unwrap(), 0);
    }

    #[test]
    fn sp1_impossible_threshold_reports_c1() {
        let (ch, mut p) = sampled(1, 50);
        p.min_harvest_energy = 1.0;
        let err = sp1_direct_scan(0.05, &ch, &p).unwrap_err();
        assert_eq!(err.constraint, "C1");
    }

    #[test]
    fn sp2_unconstrained_takes_all_elements() {
        let (ch, mut p) = sampled(2, 50);
        p.element_power = 0.0;
        p.sampling_rate = 0.0;
        assert_eq!(sp2_direct_scan(25, 0.05, &ch, &p).unwrap(), 50);
    }

    #[test]
    fn sp2_huge_sampling_rate_reports_c4() {
        let (ch, mut p) = sampled(2, 50);
        p.sampling_rate = 1e12;
        let err = sp2_direct_scan(25, 0.05, &ch, &p).unwrap_err();
        assert_eq!(err.constraint, "C4");
    }

    #[test]
    fn sca_blocks_match_direct_scan_on_sampled_instances() {
        let cfg = SolverConfig {
            block_solver: BlockSolver::PaperSca,
            ..SolverConfig::default()
        };
        let mut mismatches = 0usize;
        for seed in 0..50u64 {
            let (ch, p) = sampled(seed, 50);
            let tau = 0.05;
            let scan_m = sp1_direct_scan(tau, &ch, &p).unwrap();
            let sca_m = sp1_paper_sca(25, 25, tau, &ch, &p, &cfg).unwrap().unwrap();
            if sca_m != scan_m {
                mismatches += 1;
                // Never better than the exact block optimum.
                let e_sca = harvested_energy(sca_m, tau, &ch, &p).unwrap();
                let e_scan = harvested_energy(scan_m, tau, &ch, &p).unwrap();
                assert!(e_sca <= e_scan * (1.0 + 1e-12));
            }
            let scan_k = sp2_direct_scan(scan_m, tau, &ch, &p).unwrap();
            let sca_k = sp2_paper_sca(25, scan_m, tau, &ch, &p, &cfg).unwrap().unwrap();
            if sca_k != scan_k {
                mismatches += 1;
                let e = harvested_energy(scan_m, tau, &ch, &p).unwrap();
                let b_sca = bits_transmitted(sca_k, tau, e, &ch, &p).unwrap();
                let b_scan = bits_transmitted(scan_k, tau, e, &ch, &p).unwrap();
                assert!(b_sca <= b_scan * (1.0 + 1e-12));
            }
        }
        assert!(mismatches <= 5, "too many SCA/scan mismatches: {mismatches}");
    }

    #[test]
    fn sp3_matches_fine_grid() {
        let cfg = SolverConfig::default();
        for seed in [3u64, 7, 11] {
            let (ch, p) = sampled(seed, 50);
            let tau = solve_sp3(25, 25, &ch, &p, &cfg).unwrap().unwrap();
            let bits = Decision::evaluate(25, 25, tau, &ch, &p).unwrap().bits;
            // Brute-force grid over the same feasible set.
            let t = p.total_time;
            let mut best = f64::NEG_INFINITY;
            let points = 1_000_000usize;
            for i in 1..points {
                let tg = t * i as f64 / points as f64;
                let d = match Decision::evaluate(25, 25, tg, &ch, &p) {
                    Ok(d) => d,
                    Err(_) => continue,
                };
                if check_feasibility(&d, &ch, &p).satisfied_within(1e-12) && d.bits > best {
                    best = d.bits;
                }
            }
            assert!(bits >= best * (1.0 - 1e-9), "sp3 {bits} vs grid {best}");
        }
    }

    #[test]
    fn sp3_threshold_exactly_at_full_budget_is_infeasible() {
        // e_m equal to the whole-slot harvest d3 * T leaves no time to
        // transmit.
        let ch = synthetic(10, 1e-3, 1e-3, 1e-4, 1e-4);
        let mut p = SystemParams {
            num_elements: 10,
            element_power: 0.0,
            sampling_rate: 0.0,
            ..SystemParams::default()
        };
        let (d3, _) = rate_coeffs(0, 0, &ch, &p);
        p.min_harvest_energy = d3 * p.total_time;
        let err = solve_sp3(0, 0, &ch, &p, &SolverConfig::default())
            .unwrap()
            .unwrap_err();
        assert_eq!(err.constraint, "C1");
    }

    #[test]
    fn sp3_unreachable_sampling_requirement_is_infeasible() {
        let ch = synthetic(10, 1e-9, 1e-9, 0.0, 0.0);
        let p = SystemParams {
            num_elements: 10,
            min_harvest_energy: 0.0,
            element_power: 0.0,
            sampling_rate: 1e9,
            ..SystemParams::default()
        };
        let err = solve_sp3(0, 0, &ch, &p, &SolverConfig::default())
            .unwrap()
            .unwrap_err();
        assert_eq!(err.constraint, "C4");
    }

    #[test]
    fn sp3_interior_stationarity() {
        // When no constraint binds, the returned tau is a stationary point
        // of the objective (checked by central finite differences).
        let (ch, mut p) = sampled(9, 50);
        p.sampling_rate = 0.0;
        let cfg = SolverConfig::default();
        let tau = solve_sp3(25, 25, &ch, &p, &cfg).unwrap().unwrap();
        let (_, d4) = rate_coeffs(25, 25, &ch, &p);
        let f = |x: f64| p.bandwidth * x * (1.0 + d4 * (p.total_time - x) / x).log2();
        let h = 1e-7 * p.total_time;
        let upper = p.total_time - p.min_harvest_energy / rate_coeffs(25, 25, &ch, &p).0;
        if tau < upper - 2.0 * h {
            let deriv = (f(tau + h) - f(tau - h)) / (2.0 * h);
            let scale = f(tau) / p.total_time;
            assert!(deriv.abs() < 1e-4 * scale, "derivative {deriv} vs scale {scale}");
        }
    }

    #[test]
    fn bcd_converges_with_nondecreasing_trace() {
        for solver in [BlockSolver::DirectScan, BlockSolver::PaperSca] {
            let cfg = SolverConfig {
                block_solver: solver,
                ..SolverConfig::default()
            };
            for seed in 0..20u64 {
                let (ch, p) = sampled(seed, 50);
                let r = bcd_solve(&ch, &p, &cfg).unwrap();
                assert_eq!(r.status, SolveStatus::Converged, "seed {seed}");
                let d = r.best.unwrap();
                assert!(decision_feasible(&d, &ch, &p));
                for w in r.trace.windows(2) {
                    assert!(
                        w[1].bits >= w[0].bits * (1.0 - 1e-12),
                        "objective decreased at seed {seed}"
                    );
                }
            }
        }
    }

    #[test]
    fn bcd_zero_efficiency_is_infeasible() {
        let (ch, mut p) = sampled(0, 50);
        p.efficiency_factor = 0.0;
        let r = bcd_solve(&ch, &p, &SolverConfig::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
        assert!(r.best.is_none());
        assert!(r.diagnostic.as_deref().unwrap_or("").contains("C1"));
    }

    #[test]
    fn bcd_converged_point_is_blockwise_optimal() {
        // At a DirectScan fixed point, re-scanning any single block cannot
        // improve the objective.
        let cfg = SolverConfig::default();
        let (ch, p) = sampled(4, 50);
        let r = bcd_solve(&ch, &p, &cfg).unwrap();
        let d = r.best.unwrap();
        let m2 = sp1_direct_scan(d.tau, &ch, &p).unwrap();
        let e2 = harvested_energy(m2, d.tau, &ch, &p).unwrap();
        assert!(e2 <= d.energy * (1.0 + 1e-9));
        let k2 = sp2_direct_scan(d.m, d.tau, &ch, &p).unwrap();
        let b2 = bits_transmitted(k2, d.tau, d.energy, &ch, &p).unwrap();
        assert!(b2 <= d.bits * (1.0 + 1e-9));
        let tau2 = solve_sp3(d.m, d.k, &ch, &p, &cfg).unwrap().unwrap();
        let d2 = Decision::evaluate(d.m, d.k, tau2, &ch, &p).unwrap();
        assert!(d2.bits <= d.bits * (1.0 + 1e-9));
    }

    #[test]
    fn bcd_compared_never_beats_scan() {
        let cfg = SolverConfig {
            block_solver: BlockSolver::PaperSca,
            ..SolverConfig::default()
        };
        for seed in 0..20u64 {
            let (ch, p) = sampled(seed, 50);
            let (_, agreement) = bcd_solve_compared(&ch, &p, &cfg).unwrap();
            assert_eq!(agreement.sca_exceeded_scan, 0, "seed {seed}");
        }
    }

    #[test]
    fn no_ris_baseline_is_feasible_and_ris_beats_it() {
        let cfg = SolverConfig::default();
        for seed in 0..10u64 {
            let (ch, p) = sampled(seed, 50);
            let base = solve_no_ris(&ch, &p, &cfg).unwrap();
            let full = bcd_solve(&ch, &p, &cfg).unwrap();
            let b = base.best.unwrap();
            assert_eq!(b.m, 0);
            assert_eq!(b.k, 0);
            assert!(decision_feasible(&b, &ch, &p));
            assert!(full.best.unwrap().bits >= b.bits);
        }
    }

    #[test]
    fn mismatched_channel_size_rejected() {
        let (ch, mut p) = sampled(0, 50);
        p.num_elements = 60;
        assert!(bcd_solve(&ch, &p, &SolverConfig::default()).is_err());
    }
}
