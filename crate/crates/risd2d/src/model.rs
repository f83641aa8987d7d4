//! Closed-form physics of the two-phase link: phase alignment, harvested
//! energy, bit throughput and the feasibility predicate.
//!
//! Phase 1: the source sensor S harvests energy from BS RF signals for
//! `T - tau` seconds, assisted by `m` RIS elements. Phase 2: S spends the
//! harvested energy on a D2D transmission to D for `tau` seconds, assisted
//! by `k` RIS elements.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::params::SystemParams;

/// How `m * |h2|` and `k * |h1|` are interpreted when aggregating the
/// per-element cascade magnitudes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelMode {
    /// `|h1|`, `|h2|` are the mean per-element magnitude; the aggregate is
    /// linear in the element count. Default.
    PaperMean,
    /// The aggregate is the exact aligned sum over the largest `m` (or `k`)
    /// per-element magnitudes.
    ExactSum,
}

/// Direct gains plus per-element cascade magnitudes for both phases.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// Direct BS -> S gain.
    pub h_bs: Complex64,
    /// Direct S -> D gain.
    pub h_sd: Complex64,
    /// Per-element phase-2 cascade magnitudes `|[h_rd^dag]_n [h_sr]_n|`.
    pub g1: Vec<f64>,
    /// Per-element phase-1 cascade magnitudes `|[h_rs^dag]_n [h_br]_n|`.
    pub g2: Vec<f64>,
    /// Aggregate `|h1|` (mean of `g1` in `PaperMean` mode).
    pub h1_mag: f64,
    /// Aggregate `|h2|` (mean of `g2` in `PaperMean` mode).
    pub h2_mag: f64,
    pub mode: ChannelMode,
    // Prefix sums of the descending-sorted g vectors; prefix[i] is the sum
    // of the i largest entries. Used by ExactSum mode.
    g1_top: Vec<f64>,
    g2_top: Vec<f64>,
}

fn top_prefix_sums(g: &[f64]) -> Vec<f64> {
    let mut sorted = g.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut prefix = Vec::with_capacity(sorted.len() + 1);
    let mut acc = 0.0;
    prefix.push(0.0);
    for v in sorted {
        acc += v;
        prefix.push(acc);
    }
    prefix
}

impl ChannelRealization {
    pub fn new(
        h_bs: Complex64,
        h_sd: Complex64,
        g1: Vec<f64>,
        g2: Vec<f64>,
        mode: ChannelMode,
    ) -> Result<Self> {
        if g1.len() != g2.len() {
            return Err(Error::LengthMismatch {
                expected: g1.len(),
                actual: g2.len(),
            });
        }
        if g1.is_empty() {
            return Err(Error::invalid("g1", "cascade vectors must be non-empty"));
        }
        for (name, v) in [("g1", &g1), ("g2", &g2)] {
            if v.iter().any(|x| !(*x >= 0.0)) {
                return Err(Error::invalid(name, "entries must be >= 0 and finite"));
            }
        }
        let n = g1.len() as f64;
        let h1_mag = g1.iter().sum::<f64>() / n;
        let h2_mag = g2.iter().sum::<f64>() / n;
        let g1_top = top_prefix_sums(&g1);
        let g2_top = top_prefix_sums(&g2);
        Ok(ChannelRealization {
            h_bs,
            h_sd,
            g1,
            g2,
            h1_mag,
            h2_mag,
            mode,
            g1_top,
            g2_top,
        })
    }

    pub fn num_elements(&self) -> usize {
        self.g1.len()
    }

    /// Aggregate reflected magnitude in phase 1 for `m` contributing
    /// elements (mode-dependent), without the reflection amplitude.
    pub fn phase1_aggregate(&self, m: usize) -> f64 {
        match self.mode {
            ChannelMode::PaperMean => m as f64 * self.h2_mag,
            ChannelMode::ExactSum => self.g2_top[m],
        }
    }

    /// Aggregate reflected magnitude in phase 2 for `k` contributing
    /// elements (mode-dependent), without the reflection amplitude.
    pub fn phase2_aggregate(&self, k: usize) -> f64 {
        match self.mode {
            ChannelMode::PaperMean => k as f64 * self.h1_mag,
            ChannelMode::ExactSum => self.g1_top[k],
        }
    }

    /// Composite phase-1 magnitude `|h_bs| + alpha * aggregate(m)`.
    pub fn phase1_gain(&self, m: usize, p: &SystemParams) -> f64 {
        self.h_bs.norm() + p.reflection_amplitude * self.phase1_aggregate(m)
    }

    /// Composite phase-2 magnitude `|h_sd| + alpha * aggregate(k)`.
    pub fn phase2_gain(&self, k: usize, p: &SystemParams) -> f64 {
        self.h_sd.norm() + p.reflection_amplitude * self.phase2_aggregate(k)
    }
}

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(x: f64) -> f64 {
    let mut w = x % (2.0 * PI);
    if w <= -PI {
        w += 2.0 * PI;
    } else if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Per-element phase shifts that align every reflected cascade with the
/// direct gain: `theta_n = arg(h_direct) - arg_n`, wrapped to `(-pi, pi]`.
pub fn align_phases(h_direct: Complex64, cascade_args: &[f64]) -> Vec<f64> {
    let base = if h_direct == Complex64::new(0.0, 0.0) {
        0.0
    } else {
        h_direct.arg()
    };
    cascade_args.iter().map(|a| wrap_angle(base - a)).collect()
}

/// Composite reflected gain `sum_n alpha * e^{j theta_n} * c_n`.
pub fn effective_cascade(
    theta: &[f64],
    per_element: &[Complex64],
    alpha: f64,
) -> Result<Complex64> {
    if theta.len() != per_element.len() {
        return Err(Error::LengthMismatch {
            expected: theta.len(),
            actual: per_element.len(),
        });
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (t, c) in theta.iter().zip(per_element) {
        acc += alpha * Complex64::from_polar(1.0, *t) * c;
    }
    Ok(acc)
}

/// Aligned phase shifts for both phases.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseConfig {
    /// Phase-1 shifts, one per element, in `(-pi, pi]`.
    pub theta: Vec<f64>,
    /// Phase-2 shifts, one per element, in `(-pi, pi]`.
    pub phi: Vec<f64>,
}

impl PhaseConfig {
    /// Builds the phase configuration that aligns both phases' cascades with
    /// their direct gains.
    pub fn aligned(
        h_bs: Complex64,
        phase1_cascades: &[Complex64],
        h_sd: Complex64,
        phase2_cascades: &[Complex64],
    ) -> Self {
        let args1: Vec<f64> = phase1_cascades.iter().map(|c| c.arg()).collect();
        let args2: Vec<f64> = phase2_cascades.iter().map(|c| c.arg()).collect();
        PhaseConfig {
            theta: align_phases(h_bs, &args1),
            phi: align_phases(h_sd, &args2),
        }
    }
}

/// Harvested energy over phase 1: `zeta * (T - tau) * Ps * gain1(m)^2`.
pub fn harvested_energy(
    m: usize,
    tau: f64,
    ch: &ChannelRealization,
    p: &SystemParams,
) -> Result<f64> {
    if m > ch.num_elements() {
        return Err(Error::invalid("m", format!("{m} exceeds N={}", ch.num_elements())));
    }
    if !(0.0..p.total_time).contains(&tau) {
        return Err(Error::invalid("tau", format!("{tau} not in [0, T)")));
    }
    let gain = ch.phase1_gain(m, p);
    Ok(p.efficiency_factor * (p.total_time - tau) * p.bs_power * gain * gain)
}

/// Bits transmitted over phase 2:
/// `W * tau * log2(1 + (e / tau) * gain2(k)^2 / sigma^2)`.
pub fn bits_transmitted(
    k: usize,
    tau: f64,
    energy: f64,
    ch: &ChannelRealization,
    p: &SystemParams,
) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::invalid("tau", format!("{tau} must be > 0")));
    }
    if !(energy >= 0.0) {
        return Err(Error::invalid("energy", format!("{energy} must be >= 0")));
    }
    if k > ch.num_elements() {
        return Err(Error::invalid("k", format!("{k} exceeds N={}", ch.num_elements())));
    }
    let gain = ch.phase2_gain(k, p);
    let snr = energy / tau * gain * gain / p.noise_power;
    Ok(p.bandwidth * tau * (1.0 + snr).log2())
}

/// A candidate solution with its derived harvested energy and objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub m: usize,
    pub k: usize,
    pub tau: f64,
    pub energy: f64,
    pub bits: f64,
}

impl Decision {
    /// Evaluates a `(m, k, tau)` triple into a consistent decision.
    pub fn evaluate(
        m: usize,
        k: usize,
        tau: f64,
        ch: &ChannelRealization,
        p: &SystemParams,
    ) -> Result<Self> {
        if !(tau > 0.0 && tau < p.total_time) {
            return Err(Error::invalid("tau", format!("{tau} not in (0, T)")));
        }
        let energy = harvested_energy(m, tau, ch, p)?;
        let bits = bits_transmitted(k, tau, energy, ch, p)?;
        Ok(Decision {
            m,
            k,
            tau,
            energy,
            bits,
        })
    }
}

/// One constraint of the feasibility predicate, with its signed slack
/// (nonnegative means satisfied) and the magnitude scale of its two sides.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintCheck {
    pub name: &'static str,
    pub satisfied: bool,
    pub slack: f64,
    pub scale: f64,
}

impl ConstraintCheck {
    fn from_leq(name: &'static str, lhs: f64, rhs: f64) -> Self {
        ConstraintCheck {
            name,
            satisfied: lhs <= rhs,
            slack: rhs - lhs,
            scale: lhs.abs().max(rhs.abs()),
        }
    }

    /// Satisfied allowing a relative tolerance on the slack.
    pub fn satisfied_within(&self, rel_tol: f64) -> bool {
        self.slack >= -rel_tol * self.scale
    }
}

/// Per-constraint evaluation of the five problem constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub checks: [ConstraintCheck; 5],
}

impl FeasibilityReport {
    pub fn all_satisfied(&self) -> bool {
        self.checks.iter().all(|c| c.satisfied)
    }

    pub fn satisfied_within(&self, rel_tol: f64) -> bool {
        self.checks.iter().all(|c| c.satisfied_within(rel_tol))
    }

    /// Name of the first violated constraint, if any.
    pub fn first_violation(&self) -> Option<&'static str> {
        self.checks.iter().find(|c| !c.satisfied).map(|c| c.name)
    }
}

/// Evaluates the five constraints for a decision:
/// C1 minimum harvested energy, C2/C3 element power budgets in their
/// time-cancelled form, C4 sampled-bits coverage, C5 slot bounds.
pub fn check_feasibility(
    d: &Decision,
    ch: &ChannelRealization,
    p: &SystemParams,
) -> FeasibilityReport {
    let n = ch.num_elements() as f64;
    let e = d.energy;
    let b = d.bits;
    let c1 = ConstraintCheck::from_leq("C1 min harvest energy", p.min_harvest_energy, e);
    let c2 = ConstraintCheck::from_leq(
        "C2 phase-1 element power",
        d.m as f64 * p.element_power,
        (n - d.m as f64) * e,
    );
    let c3 = ConstraintCheck::from_leq(
        "C3 phase-2 element power",
        d.k as f64 * p.element_power,
        (n - d.k as f64) * e,
    );
    let c4 = ConstraintCheck::from_leq(
        "C4 sampled bits coverage",
        p.sampling_rate * (p.total_time - d.tau),
        b,
    );
    let c5 = ConstraintCheck {
        name: "C5 slot bounds",
        satisfied: d.tau > 0.0 && d.tau < p.total_time,
        slack: d.tau.min(p.total_time - d.tau),
        scale: p.total_time,
    };
    FeasibilityReport {
        checks: [c1, c2, c3, c4, c5],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params() -> SystemParams {
        SystemParams {
            total_time: 0.1,
            ..SystemParams::default()
        }
    }

    fn channel(h_bs: f64, h_sd: f64, g1: Vec<f64>, g2: Vec<f64>, mode: ChannelMode) -> ChannelRealization {
        ChannelRealization::new(
            Complex64::new(h_bs, 0.0),
            Complex64::new(h_sd, 0.0),
            g1,
            g2,
            mode,
        )
        .unwrap()
    }

    #[test]
    fn align_phases_hand_values() {
        let pi = PI;
        let got = align_phases(Complex64::new(1.0, 0.0), &[pi / 3.0]);
        assert!((got[0] + pi / 3.0).abs() < 1e-15);
        let got = align_phases(Complex64::new(1.0, 0.0), &[0.0, 0.0]);
        assert_eq!(got, vec![0.0, 0.0]);
        // arg(j) = pi/2; pi/2 - pi wraps to -pi/2.
        let got = align_phases(Complex64::new(0.0, 1.0), &[pi]);
        assert!((got[0] + pi / 2.0).abs() < 1e-15);
        // arg of 0 treated as 0.
        let got = align_phases(Complex64::new(0.0, 0.0), &[pi / 4.0]);
        assert!((got[0] + pi / 4.0).abs() < 1e-15);
    }

    #[test]
    fn effective_cascade_hand_values() {
        let c = effective_cascade(&[0.0], &[Complex64::new(2.0, 0.0)], 1.0).unwrap();
        assert!((c - Complex64::new(2.0, 0.0)).norm() < 1e-15);
        let c = effective_cascade(&[-PI / 2.0], &[Complex64::new(0.0, 3.0)], 1.0).unwrap();
        assert!((c - Complex64::new(3.0, 0.0)).norm() < 1e-12);
        let c = effective_cascade(&[0.0, 0.0], &[Complex64::new(1.0, 0.0); 2], 0.5).unwrap();
        assert!((c - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(effective_cascade(&[0.0], &[], 1.0).is_err());
    }

    #[test]
    fn harvested_energy_hand_values() {
        let p = params();
        let ch = channel(1e-3, 0.0, vec![0.0; 10], vec![1e-4; 10], ChannelMode::PaperMean);
        // m = 0: 0.5 * 0.05 * 1 * (1e-3)^2 = 2.5e-8 J.
        let e = harvested_energy(0, 0.05, &ch, &p).unwrap();
        assert!((e - 2.5e-8).abs() / 2.5e-8 < 1e-12);
        // m = 10: (1e-3 + 10 * 1e-4)^2 * 0.025 = 1.0e-7 J.
        let e = harvested_energy(10, 0.05, &ch, &p).unwrap();
        assert!((e - 1.0e-7).abs() / 1.0e-7 < 1e-12);
        // Zero efficiency harvests nothing.
        let mut p0 = p.clone();
        p0.efficiency_factor = 0.0;
        for m in [0, 5, 10] {
            assert_eq!(harvested_energy(m, 0.02, &ch, &p0).unwrap(), 0.0);
        }
        assert!(harvested_energy(11, 0.05, &ch, &p).is_err());
        assert!(harvested_energy(0, 0.1, &ch, &p).is_err());
    }

    #[test]
    fn bits_transmitted_hand_values() {
        let mut p = params();
        p.bandwidth = 1e6;
        p.noise_power = 1.0;
        let ch = channel(0.0, 1.0, vec![0.0; 4], vec![0.0; 4], ChannelMode::PaperMean);
        // SNR = (e / tau) * 1 / 1 = 1 with e = 0.05, tau = 0.05 -> 5e4 bits.
        let b = bits_transmitted(0, 0.05, 0.05, &ch, &p).unwrap();
        assert!((b - 5.0e4).abs() / 5.0e4 < 1e-12);
        // Zero energy, zero bits.
        assert_eq!(bits_transmitted(0, 0.05, 0.0, &ch, &p).unwrap(), 0.0);
        // No channel at all: zero bits regardless of energy.
        let ch0 = channel(0.0, 0.0, vec![0.5; 4], vec![0.5; 4], ChannelMode::PaperMean);
        assert_eq!(bits_transmitted(0, 0.05, 123.0, &ch0, &p).unwrap(), 0.0);
        assert!(bits_transmitted(0, 0.0, 1.0, &ch, &p).is_err());
    }

    #[test]
    fn feasibility_edge_cases() {
        let mut p = params();
        p.efficiency_factor = 0.0;
        p.min_harvest_energy = 1e-4;
        let ch = channel(1e-3, 1e-3, vec![1e-4; 10], vec![1e-4; 10], ChannelMode::PaperMean);
        let d = Decision::evaluate(0, 0, 0.05, &ch, &p).unwrap();
        let rep = check_feasibility(&d, &ch, &p);
        assert!(!rep.checks[0].satisfied);
        assert!((rep.checks[0].slack + 1e-4).abs() < 1e-18);
        // tau = T violates C5.
        let d = Decision {
            m: 0,
            k: 0,
            tau: p.total_time,
            energy: 0.0,
            bits: 0.0,
        };
        let rep = check_feasibility(&d, &ch, &p);
        assert!(!rep.checks[4].satisfied);
        assert_eq!(rep.first_violation(), Some("C1 min harvest energy"));
    }

    #[test]
    fn phase_alignment_identity_on_random_vectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let n = rng.gen_range(1..20);
            let alpha = rng.gen_range(0.0..=1.0);
            let h = Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let c: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)))
                .collect();
            let args: Vec<f64> = c.iter().map(|x| x.arg()).collect();
            let theta = align_phases(h, &args);
            let composite = h + effective_cascade(&theta, &c, alpha).unwrap();
            let expected = h.norm() + alpha * c.iter().map(|x| x.norm()).sum::<f64>();
            let rel = (composite.norm() - expected).abs() / expected.max(1e-12);
            assert!(rel < 1e-10, "identity violated: rel={rel}");
        }
    }

    fn arb_channel() -> impl Strategy<Value = (ChannelRealization, ChannelRealization)> {
        (
            proptest::collection::vec(0.0f64..1e-3, 1..30),
            proptest::collection::vec(0.0f64..1e-3, 1..30),
            0.0f64..1e-2,
            0.0f64..1e-2,
        )
            .prop_map(|(mut g1, g2, hb, hs)| {
                g1.truncate(g2.len().min(g1.len()));
                let mut g2 = g2;
                g2.truncate(g1.len());
                let mean = channel(hb, hs, g1.clone(), g2.clone(), ChannelMode::PaperMean);
                let exact = channel(hb, hs, g1, g2, ChannelMode::ExactSum);
                (mean, exact)
            })
    }

    proptest! {
        #[test]
        fn harvested_energy_monotone(
            (ch, _) in arb_channel(),
            tau_frac in 0.01f64..0.99,
            zeta in 0.0f64..0.99,
            ps in 0.1f64..10.0,
        ) {
            let mut p = params();
            p.efficiency_factor = zeta;
            p.bs_power = ps;
            p.num_elements = ch.num_elements();
            let tau = tau_frac * p.total_time;
            let n = ch.num_elements();
            let mut prev = -1.0;
            for m in 0..=n {
                let e = harvested_energy(m, tau, &ch, &p).unwrap();
                prop_assert!(e >= prev);
                prev = e;
            }
            // Decreasing in tau, nondecreasing in Ps.
            let e1 = harvested_energy(n, tau * 0.5, &ch, &p).unwrap();
            let e2 = harvested_energy(n, tau, &ch, &p).unwrap();
            prop_assert!(e1 >= e2);
            let mut p2 = p.clone();
            p2.bs_power *= 2.0;
            prop_assert!(harvested_energy(n, tau, &ch, &p2).unwrap() >= e2);
        }

        #[test]
        fn bits_monotone_and_baseline_dominated(
            (ch, _) in arb_channel(),
            tau_frac in 0.01f64..0.99,
            energy in 0.0f64..1e-6,
        ) {
            let mut p = params();
            p.num_elements = ch.num_elements();
            let tau = tau_frac * p.total_time;
            let mut prev = -1.0;
            for k in 0..=ch.num_elements() {
                let b = bits_transmitted(k, tau, energy, &ch, &p).unwrap();
                prop_assert!(b >= prev);
                prev = b;
            }
            let b0 = bits_transmitted(0, tau, energy, &ch, &p).unwrap();
            prop_assert!(prev >= b0);
            // Nondecreasing in energy and bandwidth.
            let b1 = bits_transmitted(0, tau, energy * 2.0, &ch, &p).unwrap();
            prop_assert!(b1 >= b0);
            let mut p2 = p.clone();
            p2.bandwidth *= 2.0;
            prop_assert!(bits_transmitted(0, tau, energy, &ch, &p2).unwrap() >= b0);
        }

        #[test]
        fn decision_self_consistent(
            (ch, _) in arb_channel(),
            tau_frac in 0.01f64..0.99,
            m_frac in 0.0f64..=1.0,
            k_frac in 0.0f64..=1.0,
        ) {
            let mut p = params();
            p.num_elements = ch.num_elements();
            let n = ch.num_elements();
            let m = (m_frac * n as f64).floor() as usize;
            let k = (k_frac * n as f64).floor() as usize;
            let tau = tau_frac * p.total_time;
            let d = Decision::evaluate(m, k, tau, &ch, &p).unwrap();
            let e = harvested_energy(m, tau, &ch, &p).unwrap();
            let b = bits_transmitted(k, tau, e, &ch, &p).unwrap();
            prop_assert!((d.energy - e).abs() <= 1e-12 * e.abs().max(1e-300));
            prop_assert!((d.bits - b).abs() <= 1e-12 * b.abs().max(1e-300));
        }

        #[test]
        fn exact_sum_dominates_paper_mean(
            (mean_ch, exact_ch) in arb_channel(),
            tau_frac in 0.01f64..0.99,
            m_frac in 0.0f64..=1.0,
        ) {
            let mut p = params();
            p.num_elements = mean_ch.num_elements();
            let n = mean_ch.num_elements();
            let m = (m_frac * n as f64).floor() as usize;
            let tau = tau_frac * p.total_time;
            let e_mean = harvested_energy(m, tau, &mean_ch, &p).unwrap();
            let e_exact = harvested_energy(m, tau, &exact_ch, &p).unwrap();
            // The top-m sum is never below m times the overall mean.
            prop_assert!(e_exact >= e_mean * (1.0 - 1e-12));
        }

        #[test]
        fn wrapped_angles_in_range(x in -100.0f64..100.0) {
            let w = wrap_angle(x);
            prop_assert!(w > -PI && w <= PI);
        }
    }
}
