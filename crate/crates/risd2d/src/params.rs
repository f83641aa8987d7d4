//! Scalar system constants and node geometry.
//!
//! All values are stored in SI units (seconds, watts, joules, hertz, meters).
//! Unit conversion from engineer-friendly inputs (ms, dBm, mJ, GHz, ...)
//! happens at the CLI boundary, not here.

use crate::error::{Error, Result};

/// Converts a dBm figure to linear watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// All scalar constants of the two-phase link model.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    /// Total time frame `T` in seconds. Phase 1 (harvesting) runs for
    /// `T - tau`, phase 2 (D2D) for `tau`.
    pub total_time: f64,
    /// Number of RIS passive elements `N`.
    pub num_elements: usize,
    /// Noise power in watts (linear).
    pub noise_power: f64,
    /// Energy efficiency factor `zeta` in `[0, 1)`: fraction of incident RF
    /// power converted to stored energy.
    pub efficiency_factor: f64,
    /// BS transmit power in watts.
    pub bs_power: f64,
    /// Minimum harvested energy threshold in joules.
    pub min_harvest_energy: f64,
    /// Sensor sampling rate in bits/second.
    pub sampling_rate: f64,
    /// Carrier bandwidth in hertz.
    pub bandwidth: f64,
    /// Power drawn by each contributing RIS element, in watts.
    pub element_power: f64,
    /// Carrier frequency in hertz.
    pub carrier_freq: f64,
    /// Shared reflection amplitude of the RIS elements, in `[0, 1]`.
    pub reflection_amplitude: f64,
}

impl Default for SystemParams {
    /// Library defaults. Where the source material pins a value we use it
    /// (T = 100 ms, N = 50, noise = -94 dBm, zeta = 0.5, Ps = 1 W,
    /// Sr = 1 bit/s, fc = 3 GHz). Bandwidth and per-element power are not
    /// pinned anywhere; the harvest threshold and per-element power defaults
    /// are sized so the default 50 m geometry under UMi pathloss admits
    /// feasible solutions (a 0.1 mJ threshold would require a composite path
    /// gain above -27 dB, unreachable beyond roughly one meter at 1 W).
    fn default() -> Self {
        SystemParams {
            total_time: 0.1,
            num_elements: 50,
            noise_power: dbm_to_watts(-94.0),
            efficiency_factor: 0.5,
            bs_power: 1.0,
            min_harvest_energy: 1e-14,
            sampling_rate: 1.0,
            bandwidth: 1e6,
            element_power: 1e-12,
            carrier_freq: 3e9,
            reflection_amplitude: 1.0,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.total_time > 0.0) {
            return Err(Error::invalid("total_time", "must be > 0"));
        }
        if self.num_elements < 1 {
            return Err(Error::invalid("num_elements", "must be >= 1"));
        }
        if !(self.noise_power > 0.0) {
            return Err(Error::invalid("noise_power", "must be > 0"));
        }
        if !(self.bs_power > 0.0) {
            return Err(Error::invalid("bs_power", "must be > 0"));
        }
        if !(0.0..1.0).contains(&self.efficiency_factor) {
            return Err(Error::invalid("efficiency_factor", "must be in [0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.reflection_amplitude) {
            return Err(Error::invalid("reflection_amplitude", "must be in [0, 1]"));
        }
        if !(self.bandwidth > 0.0) {
            return Err(Error::invalid("bandwidth", "must be > 0"));
        }
        if !(self.element_power >= 0.0) {
            return Err(Error::invalid("element_power", "must be >= 0"));
        }
        if !(self.sampling_rate >= 0.0) {
            return Err(Error::invalid("sampling_rate", "must be >= 0"));
        }
        if !(self.min_harvest_energy >= 0.0) {
            return Err(Error::invalid("min_harvest_energy", "must be >= 0"));
        }
        if !(self.carrier_freq > 0.0) {
            return Err(Error::invalid("carrier_freq", "must be > 0"));
        }
        Ok(())
    }

    /// Wavelength `lambda = c / f` in meters.
    pub fn wavelength(&self) -> f64 {
        299_792_458.0 / self.carrier_freq
    }
}

/// A planar position in meters.
pub type Point = [f64; 2];

fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Planar positions of the base station, source sensor, destination sensor
/// and RIS panel (abstracted to a point).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    pub bs_pos: Point,
    pub s_pos: Point,
    pub d_pos: Point,
    pub ris_pos: Point,
}

impl Default for Geometry {
    /// BS at the origin, S at 50 m, D 5 m behind S, RIS 0.1 m from S on the
    /// BS-S segment.
    fn default() -> Self {
        Geometry {
            bs_pos: [0.0, 0.0],
            s_pos: [50.0, 0.0],
            d_pos: [55.0, 0.0],
            ris_pos: [49.9, 0.0],
        }
    }
}

impl Geometry {
    /// Places the RIS at `distance` meters from S, on the segment from S
    /// toward the BS.
    pub fn with_ris_distance(mut self, distance: f64) -> Self {
        let d = dist(self.bs_pos, self.s_pos);
        let ux = (self.bs_pos[0] - self.s_pos[0]) / d;
        let uy = (self.bs_pos[1] - self.s_pos[1]) / d;
        self.ris_pos = [self.s_pos[0] + ux * distance, self.s_pos[1] + uy * distance];
        self
    }

    pub fn d_bs_s(&self) -> f64 {
        dist(self.bs_pos, self.s_pos)
    }
    pub fn d_bs_ris(&self) -> f64 {
        dist(self.bs_pos, self.ris_pos)
    }
    pub fn d_ris_s(&self) -> f64 {
        dist(self.ris_pos, self.s_pos)
    }
    pub fn d_s_d(&self) -> f64 {
        dist(self.s_pos, self.d_pos)
    }
    pub fn d_ris_d(&self) -> f64 {
        dist(self.ris_pos, self.d_pos)
    }

    /// All pairwise distances used by the pathloss model must be positive.
    pub fn validate(&self) -> Result<()> {
        let dists = [
            ("bs-s", self.d_bs_s()),
            ("bs-ris", self.d_bs_ris()),
            ("ris-s", self.d_ris_s()),
            ("s-d", self.d_s_d()),
            ("ris-d", self.d_ris_d()),
        ];
        for (name, d) in dists {
            if !(d > 0.0) {
                return Err(Error::invalid(
                    "geometry",
                    format!("{name} distance must be > 0, got {d}"),
                ));
            }
        }
        Ok(())
    }
}
