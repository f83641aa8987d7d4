//! Channel generation: 3GPP Urban-Micro pathloss plus Rayleigh small-scale
//! fading, with deterministic per-link RNG substreams.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{ChannelMode, ChannelRealization};
use crate::params::{Geometry, SystemParams};

/// LOS/NLOS flag per link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LosFlags {
    pub bs_s: bool,
    pub bs_ris: bool,
    pub ris_s: bool,
    pub s_d: bool,
    pub s_ris: bool,
    pub ris_d: bool,
}

impl Default for LosFlags {
    /// Direct links obstructed (NLOS), all RIS legs LOS.
    fn default() -> Self {
        LosFlags {
            bs_s: false,
            bs_ris: true,
            ris_s: true,
            s_d: false,
            s_ris: true,
            ris_d: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelConfig {
    pub seed: u64,
    pub los: LosFlags,
    pub mode: ChannelMode,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            seed: 42,
            los: LosFlags::default(),
            mode: ChannelMode::PaperMean,
        }
    }
}

/// UMi pathloss in dB.
///
/// LOS:  `22.0 log10(d) + 28.0 + 20 log10(f_GHz)`
/// NLOS: `36.7 log10(d) + 22.7 + 26 log10(f_GHz)`
pub fn pathloss_db(distance: f64, los: bool, carrier_freq: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::invalid(
            "distance",
            format!("{distance} must be > 0"),
        ));
    }
    let f_ghz = carrier_freq / 1e9;
    Ok(if los {
        22.0 * distance.log10() + 28.0 + 20.0 * f_ghz.log10()
    } else {
        36.7 * distance.log10() + 22.7 + 26.0 * f_ghz.log10()
    })
}

/// Linear amplitude attenuation `10^(-PL_dB / 20)`.
pub fn pathloss_amplitude(distance: f64, los: bool, carrier_freq: f64) -> Result<f64> {
    Ok(10f64.powf(-pathloss_db(distance, los, carrier_freq)? / 20.0))
}

// Substream ids, one per link. Adding a link appends an id, so existing
// draws never move.
const STREAM_BS_S: u64 = 0;
const STREAM_BS_RIS: u64 = 1;
const STREAM_RIS_S: u64 = 2;
const STREAM_S_D: u64 = 3;
const STREAM_S_RIS: u64 = 4;
const STREAM_RIS_D: u64 = 5;

fn link_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One circularly-symmetric complex Gaussian draw with unit variance.
fn cn_unit(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Samples one quasi-static channel realization. Every scalar link gain is
/// `sqrt(linear pathloss) * CN(0, 1)`; per-element cascade magnitudes are
/// the products of the two constituent links' draws and pathloss amplitudes.
pub fn sample_channels(
    geo: &Geometry,
    p: &SystemParams,
    cfg: &ChannelConfig,
) -> Result<ChannelRealization> {
    geo.validate()?;
    p.validate()?;
    let n = p.num_elements;
    let fc = p.carrier_freq;
    let los = cfg.los;

    let a_bs_s = pathloss_amplitude(geo.d_bs_s(), los.bs_s, fc)?;
    let a_bs_ris = pathloss_amplitude(geo.d_bs_ris(), los.bs_ris, fc)?;
    let a_ris_s = pathloss_amplitude(geo.d_ris_s(), los.ris_s, fc)?;
    let a_s_d = pathloss_amplitude(geo.d_s_d(), los.s_d, fc)?;
    let a_s_ris = pathloss_amplitude(geo.d_ris_s(), los.s_ris, fc)?;
    let a_ris_d = pathloss_amplitude(geo.d_ris_d(), los.ris_d, fc)?;

    let h_bs = a_bs_s * cn_unit(&mut link_rng(cfg.seed, STREAM_BS_S));
    let h_sd = a_s_d * cn_unit(&mut link_rng(cfg.seed, STREAM_S_D));

    let mut rng_br = link_rng(cfg.seed, STREAM_BS_RIS);
    let mut rng_rs = link_rng(cfg.seed, STREAM_RIS_S);
    let mut rng_sr = link_rng(cfg.seed, STREAM_S_RIS);
    let mut rng_rd = link_rng(cfg.seed, STREAM_RIS_D);

    let mut g2 = Vec::with_capacity(n);
    let mut g1 = Vec::with_capacity(n);
    for _ in 0..n {
        let br = a_bs_ris * cn_unit(&mut rng_br);
        let rs = a_ris_s * cn_unit(&mut rng_rs);
        g2.push((rs.conj() * br).norm());
    }
    for _ in 0..n {
        let sr = a_s_ris * cn_unit(&mut rng_sr);
        let rd = a_ris_d * cn_unit(&mut rng_rd);
        g1.push((rd.conj() * sr).norm());
    }

    ChannelRealization::new(h_bs, h_sd, g1, g2, cfg.mode)
}
