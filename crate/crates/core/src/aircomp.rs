//! AirComp summation and the weighted-averaging protocols built on it.
//!
//! The summation primitive scales every message by a common power-control
//! factor so the worst node transmits at exactly `P_max`, inverts the complex
//! channel per node, sums the superimposed signals and decodes the real part.
//! Weighted averaging runs the primitive twice (weighted values, then weights)
//! and divides elementwise; the division is deliberately unguarded because the
//! divergence of the pure method under denominator noise is the phenomenon
//! under study. The adaptive protocol clamps every weight into
//! `[delta_min, delta_max]` before both slots.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::channel::{ChannelRealization, SystemConfig};
use crate::error::{Error, Result};

/// Per-node weight and value vectors, the inputs of one weighted average.
#[derive(Debug, Clone)]
pub struct NodePayload {
    /// Nonnegative weights w_i, one per element.
    pub weights: Vec<f64>,
    /// Values s_i, one per element.
    pub values: Vec<f64>,
}

impl NodePayload {
    pub fn new(weights: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if weights.len() != values.len() {
            return Err(Error::ShapeMismatch(format!(
                "payload weights ({}) and values ({}) differ in length",
                weights.len(),
                values.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidConfig(
                "payload weights must be finite and >= 0".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("payload values must be finite".into()));
        }
        Ok(NodePayload { weights, values })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Bounds of the adaptive weighting function `g(w) = max(min(w, max), min)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationParams {
    pub delta_min: f64,
    pub delta_max: f64,
}

impl TruncationParams {
    pub fn new(delta_min: f64, delta_max: f64) -> Result<Self> {
        if !(delta_min >= 0.0) || !delta_min.is_finite() {
            return Err(Error::InvalidConfig(
                "delta_min must be finite and >= 0".into(),
            ));
        }
        if !(delta_max >= delta_min) {
            return Err(Error::InvalidConfig(
                "delta_max must be >= delta_min".into(),
            ));
        }
        Ok(TruncationParams {
            delta_min,
            delta_max,
        })
    }

    /// `(0, +inf)`: truncation disabled, g is the identity on `w >= 0`.
    pub const fn identity() -> Self {
        TruncationParams {
            delta_min: 0.0,
            delta_max: f64::INFINITY,
        }
    }
}

/// Clamps a weight into `[delta_min, delta_max]`.
#[inline]
pub fn truncate_weight(w: f64, params: &TruncationParams) -> f64 {
    w.min(params.delta_max).max(params.delta_min)
}

/// Decoded output of one AirComp summation slot.
#[derive(Debug, Clone)]
pub struct AirCompResult {
    /// Estimated sum of the message vectors.
    pub r_hat: Vec<f64>,
    /// Power-control scalar used for the slot.
    pub rho: f64,
}

/// Estimate returned by the averaging protocols.
#[derive(Debug, Clone)]
pub struct AverageEstimate {
    /// Elementwise estimate of the weighted (or simple) average.
    pub phi_hat: Vec<f64>,
    /// True when any element is non-finite (zero-crossing denominator).
    pub diverged: bool,
    /// Power-control scalar per slot (two for weighted, one for simple).
    pub slot_rho: Vec<f64>,
}

/// Power-control scalar: `sqrt(rho)` is the smallest
/// `sqrt(gamma_bar_i) |h_i| sqrt(P_max) / ||m_i||` over nodes with a nonzero
/// norm, so that node transmits at exactly `P_max`.
///
/// Nodes with zero norm cost no power at any scaling and are excluded; a round
/// where every norm is zero has no feasible scaling and is surfaced as
/// [`Error::DegenerateAllZeroRound`].
pub fn power_control_rho(
    norms: &[f64],
    channel: &ChannelRealization,
    p_max: f64,
) -> Result<f64> {
    if norms.len() != channel.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} norms for {} channel gains",
            norms.len(),
            channel.len()
        )));
    }
    let sqrt_p = p_max.sqrt();
    let mut best: Option<f64> = None;
    for (i, &norm) in norms.iter().enumerate() {
        if norm > 0.0 {
            let cand = channel.gamma_bar[i].sqrt() * channel.h[i].norm() * sqrt_p / norm;
            best = Some(match best {
                Some(b) => b.min(cand),
                None => cand,
            });
        }
    }
    match best {
        Some(sqrt_rho) => Ok(sqrt_rho * sqrt_rho),
        None => Err(Error::DegenerateAllZeroRound),
    }
}

/// Channel-inversion encoder: `x = (sqrt(rho) / (sqrt(gamma_bar) h)) m`.
pub fn encode(
    message: &[f64],
    rho: f64,
    gamma_bar: f64,
    h: Complex64,
) -> Result<Vec<Complex64>> {
    if h.norm_sqr() == 0.0 {
        return Err(Error::SingularChannel(0));
    }
    let scale = Complex64::new(rho.sqrt() / gamma_bar.sqrt(), 0.0) / h;
    Ok(message.iter().map(|&m| scale * m).collect())
}

/// One AirComp summation slot: encode, superimpose, add receiver noise,
/// decode. The additive error per element is Gaussian with variance
/// `sigma_z^2 / (2 rho)`.
pub fn transmit_sum<R: Rng + ?Sized>(
    messages: &[Vec<f64>],
    channel: &ChannelRealization,
    config: &SystemConfig,
    rng: &mut R,
) -> Result<AirCompResult> {
    check_messages(messages, channel, config)?;
    let len = messages[0].len();
    let rho = power_control_rho(
        &messages.iter().map(|m| l2_norm(m)).collect::<Vec<_>>(),
        channel,
        config.p_max,
    )?;

    let mut received = vec![Complex64::new(0.0, 0.0); len];
    for (i, message) in messages.iter().enumerate() {
        let x = encode(message, rho, channel.gamma_bar[i], channel.h[i])
            .map_err(|_| Error::SingularChannel(i))?;
        let gain = Complex64::new(channel.gamma_bar[i].sqrt(), 0.0) * channel.h[i];
        for (y, xi) in received.iter_mut().zip(&x) {
            *y += gain * xi;
        }
    }

    let noise = Normal::new(0.0, (config.noise_floor / 2.0).sqrt()).unwrap();
    let sqrt_rho = rho.sqrt();
    let r_hat = received
        .iter()
        .map(|y| {
            let z = Complex64::new(noise.sample(rng), noise.sample(rng));
            ((y + z) / sqrt_rho).re
        })
        .collect();
    Ok(AirCompResult { r_hat, rho })
}

/// Average transmit power `(1/M) sum ||x_i||^2` for one slot of the given
/// messages, with the slot's own power control applied.
pub fn average_transmit_power(
    messages: &[Vec<f64>],
    channel: &ChannelRealization,
    p_max: f64,
) -> Result<f64> {
    let norms: Vec<f64> = messages.iter().map(|m| l2_norm(m)).collect();
    let rho = power_control_rho(&norms, channel, p_max)?;
    let total: f64 = norms
        .iter()
        .enumerate()
        .map(|(i, &n)| rho * n * n / (channel.gamma_bar[i] * channel.h[i].norm_sqr()))
        .sum();
    Ok(total / messages.len() as f64)
}

/// Pure weighted averaging: slot 0 carries `w .* s`, slot 1 carries `w`, and
/// the estimate is the elementwise ratio of the two decoded sums. The
/// denominator is not guarded; elements where it crosses zero follow IEEE
/// rules and flag the estimate as diverged.
pub fn pure_weighted_average<R: Rng + ?Sized>(
    payloads: &[NodePayload],
    slots: &[ChannelRealization; 2],
    config: &SystemConfig,
    rng: &mut R,
) -> Result<AverageEstimate> {
    weighted_two_slot(payloads, &TruncationParams::identity(), slots, config, rng)
}

/// Adaptive weighted averaging: the pure pipeline with every weight clamped
/// into `[delta_min, delta_max]` in both slots. With `(0, +inf)` this is
/// bit-identical to [`pure_weighted_average`].
pub fn adaptive_weighted_average<R: Rng + ?Sized>(
    payloads: &[NodePayload],
    params: &TruncationParams,
    slots: &[ChannelRealization; 2],
    config: &SystemConfig,
    rng: &mut R,
) -> Result<AverageEstimate> {
    weighted_two_slot(payloads, params, slots, config, rng)
}

/// Simple averaging: a single slot carrying the unweighted values, divided by
/// the (known) node count at the receiver.
pub fn simple_average<R: Rng + ?Sized>(
    payloads: &[NodePayload],
    slot: &ChannelRealization,
    config: &SystemConfig,
    rng: &mut R,
) -> Result<AverageEstimate> {
    check_payloads(payloads, config)?;
    let messages: Vec<Vec<f64>> = payloads.iter().map(|p| p.values.clone()).collect();
    let (r, rho) = transmit_or_noise(&messages, slot, config, rng)?;
    let m = config.num_nodes as f64;
    let phi_hat: Vec<f64> = r.iter().map(|&x| x / m).collect();
    let diverged = phi_hat.iter().any(|v| !v.is_finite());
    Ok(AverageEstimate {
        phi_hat,
        diverged,
        slot_rho: vec![rho],
    })
}

fn weighted_two_slot<R: Rng + ?Sized>(
    payloads: &[NodePayload],
    params: &TruncationParams,
    slots: &[ChannelRealization; 2],
    config: &SystemConfig,
    rng: &mut R,
) -> Result<AverageEstimate> {
    check_payloads(payloads, config)?;
    let weighted: Vec<Vec<f64>> = payloads
        .iter()
        .map(|p| {
            p.weights
                .iter()
                .zip(&p.values)
                .map(|(&w, &s)| truncate_weight(w, params) * s)
                .collect()
        })
        .collect();
    let weights: Vec<Vec<f64>> = payloads
        .iter()
        .map(|p| p.weights.iter().map(|&w| truncate_weight(w, params)).collect())
        .collect();

    let (r0, rho0) = transmit_or_noise(&weighted, &slots[0], config, rng)?;
    let (r1, rho1) = transmit_or_noise(&weights, &slots[1], config, rng)?;
    let phi_hat: Vec<f64> = r0.iter().zip(&r1).map(|(&num, &den)| num / den).collect();
    let diverged = phi_hat.iter().any(|v| !v.is_finite());
    Ok(AverageEstimate {
        phi_hat,
        diverged,
        slot_rho: vec![rho0, rho1],
    })
}

/// Slot transmission that substitutes plain receiver noise (`Re(z)`,
/// per-element variance `sigma_z^2 / 2`) when every message in the slot is
/// zero: nothing is transmitted, so the receiver decodes noise alone.
pub(crate) fn transmit_or_noise<R: Rng + ?Sized>(
    messages: &[Vec<f64>],
    channel: &ChannelRealization,
    config: &SystemConfig,
    rng: &mut R,
) -> Result<(Vec<f64>, f64)> {
    match transmit_sum(messages, channel, config, rng) {
        Ok(res) => Ok((res.r_hat, res.rho)),
        Err(Error::DegenerateAllZeroRound) => {
            let len = messages[0].len();
            let noise = Normal::new(0.0, (config.noise_floor / 2.0).sqrt()).unwrap();
            let r = (0..len)
                .map(|_| {
                    let re = noise.sample(rng);
                    let _im = noise.sample(rng);
                    re
                })
                .collect();
            Ok((r, f64::INFINITY))
        }
        Err(e) => Err(e),
    }
}

fn check_messages(
    messages: &[Vec<f64>],
    channel: &ChannelRealization,
    config: &SystemConfig,
) -> Result<()> {
    if messages.len() != config.num_nodes || channel.len() != config.num_nodes {
        return Err(Error::ShapeMismatch(format!(
            "{} messages, {} channel gains for {} nodes",
            messages.len(),
            channel.len(),
            config.num_nodes
        )));
    }
    let len = messages[0].len();
    if len == 0 || messages.iter().any(|m| m.len() != len) {
        return Err(Error::ShapeMismatch(
            "messages must share one nonzero length".into(),
        ));
    }
    Ok(())
}

fn check_payloads(payloads: &[NodePayload], config: &SystemConfig) -> Result<()> {
    if payloads.len() != config.num_nodes {
        return Err(Error::ShapeMismatch(format!(
            "{} payloads for {} nodes",
            payloads.len(),
            config.num_nodes
        )));
    }
    if payloads.iter().any(|p| p.len() != config.message_len) {
        return Err(Error::ShapeMismatch(format!(
            "payload length differs from message_len {}",
            config.message_len
        )));
    }
    Ok(())
}

fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
