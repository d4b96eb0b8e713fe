//! Channel realizations and power-unit conversions.
//!
//! All internal arithmetic is carried out in linear milliwatts; dBm/dB inputs
//! are converted once when a [`SystemConfig`] is constructed. Instantaneous
//! gains are unit (`1 + 0i`) on AWGN channels and circularly-symmetric complex
//! Gaussian with unit total variance under Rayleigh fading. Gains are redrawn
//! independently for every AirComp slot, since each slot is a separate
//! transmission.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::Deserialize;

use crate::error::{Error, Result};

/// dB (or dBm) to linear scale.
#[inline]
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Linear scale to dB (or dBm).
#[inline]
pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Uplink small-scale fading model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKind {
    Awgn,
    Rayleigh,
}

/// Static system parameters shared by every AirComp round.
#[derive(Debug, Clone)]
pub struct SystemConfig {
    /// Number of nodes M.
    pub num_nodes: usize,
    /// Message length L.
    pub message_len: usize,
    /// Transmit power budget P_max, linear mW.
    pub p_max: f64,
    /// Noise floor sigma_z^2, linear mW.
    pub noise_floor: f64,
    pub channel_kind: ChannelKind,
    /// Per-node average gain 10 log10(gamma_bar_i), dB. Exactly M entries.
    pub avg_gain_db: Vec<f64>,
    /// Std of the per-node gain perturbation omega_i, dB. 0 for equal gains.
    pub gain_spread_sigma_db: f64,
}

impl SystemConfig {
    /// Builds a config from dBm/dB quantities, converting power units once.
    pub fn from_db(
        num_nodes: usize,
        message_len: usize,
        p_max_dbm: f64,
        noise_floor_dbm: f64,
        channel_kind: ChannelKind,
        avg_gain_db: Vec<f64>,
        gain_spread_sigma_db: f64,
    ) -> Result<Self> {
        let cfg = SystemConfig {
            num_nodes,
            message_len,
            p_max: db_to_linear(p_max_dbm),
            noise_floor: db_to_linear(noise_floor_dbm),
            channel_kind,
            avg_gain_db,
            gain_spread_sigma_db,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Same as [`SystemConfig::from_db`] with one gain value shared by all nodes.
    pub fn equal_gains(
        num_nodes: usize,
        message_len: usize,
        p_max_dbm: f64,
        noise_floor_dbm: f64,
        channel_kind: ChannelKind,
        gain_db: f64,
    ) -> Result<Self> {
        Self::from_db(
            num_nodes,
            message_len,
            p_max_dbm,
            noise_floor_dbm,
            channel_kind,
            vec![gain_db; num_nodes],
            0.0,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_nodes == 0 {
            return Err(Error::InvalidConfig("num_nodes must be >= 1".into()));
        }
        if self.message_len == 0 {
            return Err(Error::InvalidConfig("message_len must be >= 1".into()));
        }
        if !(self.p_max > 0.0) || !self.p_max.is_finite() {
            return Err(Error::InvalidConfig("p_max must be positive".into()));
        }
        if !(self.noise_floor >= 0.0) || !self.noise_floor.is_finite() {
            return Err(Error::InvalidConfig("noise_floor must be >= 0".into()));
        }
        if self.avg_gain_db.len() != self.num_nodes {
            return Err(Error::InvalidConfig(format!(
                "avg_gain_db has {} entries for {} nodes",
                self.avg_gain_db.len(),
                self.num_nodes
            )));
        }
        if self.avg_gain_db.iter().any(|g| !g.is_finite()) {
            return Err(Error::InvalidConfig("avg_gain_db must be finite".into()));
        }
        if !(self.gain_spread_sigma_db >= 0.0) {
            return Err(Error::InvalidConfig(
                "gain_spread_sigma_db must be >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Copy of the config with the per-node gains replaced.
    pub fn with_gains(&self, avg_gain_db: Vec<f64>) -> Result<Self> {
        let mut cfg = self.clone();
        cfg.avg_gain_db = avg_gain_db;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One draw of the instantaneous and average gains for all M uplinks.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    /// Instantaneous complex gain h_i per node.
    pub h: Vec<Complex64>,
    /// Average gain gamma_bar_i per node, linear scale.
    pub gamma_bar: Vec<f64>,
}

impl ChannelRealization {
    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }
}

/// Draws one channel realization for a single transmission slot.
///
/// AWGN fixes `h_i = 1`; Rayleigh draws real and imaginary parts i.i.d.
/// Gaussian with variance 1/2 each, so `E[|h|^2] = 1`.
pub fn draw_channel<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> ChannelRealization {
    let m = config.num_nodes;
    let h = match config.channel_kind {
        ChannelKind::Awgn => vec![Complex64::new(1.0, 0.0); m],
        ChannelKind::Rayleigh => {
            let comp = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).unwrap();
            (0..m)
                .map(|_| Complex64::new(comp.sample(rng), comp.sample(rng)))
                .collect()
        }
    };
    let gamma_bar = config.avg_gain_db.iter().map(|&g| db_to_linear(g)).collect();
    ChannelRealization { h, gamma_bar }
}

/// Peak SNR: receive SNR at maximum transmit power and average gain,
/// `10 log10(P_max * gamma_bar / sigma_z^2)` dB.
///
/// Defined only when all nodes share the same average gain.
pub fn psnr_db(config: &SystemConfig) -> Result<f64> {
    let first = config.avg_gain_db[0];
    if config.avg_gain_db.iter().any(|&g| g != first) {
        return Err(Error::PsnrUndefined);
    }
    Ok(linear_to_db(
        config.p_max * db_to_linear(first) / config.noise_floor,
    ))
}

/// Per-node average gains `base + omega_i` with `omega_i ~ N(0, sigma^2)` dB.
pub fn draw_unequal_gains<R: Rng + ?Sized>(
    base_gain_db: f64,
    sigma_omega_db: f64,
    num_nodes: usize,
    rng: &mut R,
) -> Vec<f64> {
    assert!(sigma_omega_db >= 0.0, "sigma_omega_db must be >= 0");
    let omega = Normal::new(0.0, sigma_omega_db).unwrap();
    (0..num_nodes).map(|_| base_gain_db + omega.sample(rng)).collect()
}
