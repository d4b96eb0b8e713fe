//! Bayesian optimization of the truncation bounds `theta = (delta_min, delta_max)`.
//!
//! The objective is the Monte-Carlo mean squared error of the adaptive
//! weighted average against the exact weighted average, with weights and
//! values resampled from empirical pools. A GP surrogate with refitted
//! hyperparameters models the objective over theta; expected improvement picks
//! the next candidate from a uniform sample of the feasible region.
//!
//! Every objective evaluation in one run replays a common random-number
//! stream, so differences between thetas are not drowned in Monte-Carlo noise.
//! Candidates are sampled as order statistics of two uniforms, which enforces
//! `delta_min <= delta_max` without rejection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::aircomp::{adaptive_weighted_average, NodePayload, TruncationParams};
use crate::channel::{draw_channel, draw_unequal_gains, SystemConfig};
use crate::error::{Error, Result};
use crate::gp::{self, GpDataset, GpPosterior, KernelParams};

/// Budgets for one optimization run.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoConfig {
    /// Initial random evaluations before the surrogate loop.
    pub n_init: usize,
    /// Surrogate-guided steps T.
    pub n_iters: usize,
    /// Candidate thetas scored per step.
    pub n_candidates: usize,
    /// Monte-Carlo rounds per objective evaluation.
    pub n_mc: usize,
    /// Feasible box for both bounds; when absent, `[0, p99.9(fw)]`.
    pub theta_bounds: Option<(f64, f64)>,
}

impl Default for BoConfig {
    fn default() -> Self {
        BoConfig {
            n_init: 8,
            n_iters: 30,
            n_candidates: 256,
            n_mc: 500,
            theta_bounds: None,
        }
    }
}

impl BoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_init == 0 || self.n_candidates == 0 || self.n_mc == 0 {
            return Err(Error::InvalidConfig(
                "bo budgets must be positive (n_iters may be 0)".into(),
            ));
        }
        if let Some((lo, hi)) = self.theta_bounds {
            if !(0.0 <= lo && lo <= hi) {
                return Err(Error::InvalidConfig(
                    "theta_bounds must satisfy 0 <= lo <= hi".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Evaluated pairs accumulated by the run.
#[derive(Debug, Clone, Default)]
pub struct BoState {
    pub evaluated: Vec<(TruncationParams, f64)>,
    /// Completed surrogate steps.
    pub step: usize,
}

impl BoState {
    /// Smallest observed objective, `+inf` when nothing finite was seen.
    pub fn best_mse(&self) -> f64 {
        self.evaluated
            .iter()
            .map(|(_, e)| *e)
            .filter(|e| e.is_finite())
            .fold(f64::INFINITY, f64::min)
    }

    /// Evaluated theta with the smallest objective (first on ties).
    pub fn best_theta(&self) -> Option<TruncationParams> {
        self.evaluated
            .iter()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(t, _)| *t)
    }
}

/// Which phase produced a history entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoPhase {
    Init,
    Search,
}

/// One line of the optimization trace.
#[derive(Debug, Clone, PartialEq)]
pub struct BoStepRecord {
    /// 1-based evaluation counter across both phases.
    pub eval_index: usize,
    pub phase: BoPhase,
    pub delta_min: f64,
    pub delta_max: f64,
    pub mse: f64,
    pub best_mse: f64,
    /// True when the surrogate fit failed and prior-only EI was used.
    pub surrogate_fallback: bool,
}

/// Result of a full run.
#[derive(Debug, Clone)]
pub struct BoOutcome {
    pub theta_opt: TruncationParams,
    pub best_mse: f64,
    pub history: Vec<BoStepRecord>,
}

/// Monte-Carlo estimate of the adaptive-averaging MSE at `theta`.
///
/// Each round resamples per-node weight and value vectors from the pools,
/// computes the exact weighted average of the untruncated draw, simulates both
/// AirComp slots with fresh channel realizations, and accumulates the mean
/// squared elementwise error. Diverged rounds contribute their (possibly
/// infinite) squared error as-is.
pub fn estimate_mse<R: Rng + ?Sized>(
    theta: &TruncationParams,
    fs_samples: &[f64],
    fw_samples: &[f64],
    config: &SystemConfig,
    n_mc: usize,
    rng: &mut R,
) -> Result<f64> {
    if fs_samples.is_empty() || fw_samples.is_empty() {
        return Err(Error::InvalidConfig("sample pools must be nonempty".into()));
    }
    if n_mc == 0 {
        return Err(Error::InvalidConfig("n_mc must be >= 1".into()));
    }
    if fw_samples.iter().any(|w| !w.is_finite() || *w < 0.0)
        || fs_samples.iter().any(|s| !s.is_finite())
    {
        return Err(Error::InvalidConfig(
            "pools must be finite with nonnegative weights".into(),
        ));
    }

    let m = config.num_nodes;
    let l = config.message_len;
    let mut total = 0.0;
    for _ in 0..n_mc {
        let payloads: Vec<NodePayload> = (0..m)
            .map(|_| {
                let weights = (0..l)
                    .map(|_| fw_samples[rng.random_range(0..fw_samples.len())])
                    .collect();
                let values = (0..l)
                    .map(|_| fs_samples[rng.random_range(0..fs_samples.len())])
                    .collect();
                NodePayload { weights, values }
            })
            .collect();

        // Exact target from the untruncated draw.
        let phi: Vec<f64> = (0..l)
            .map(|li| {
                let num: f64 = payloads.iter().map(|p| p.weights[li] * p.values[li]).sum();
                let den: f64 = payloads.iter().map(|p| p.weights[li]).sum();
                num / den
            })
            .collect();

        let round_cfg = if config.gain_spread_sigma_db > 0.0 {
            let gains = draw_unequal_gains(
                config.avg_gain_db[0],
                config.gain_spread_sigma_db,
                m,
                rng,
            );
            let mut c = config.clone();
            c.avg_gain_db = gains;
            c.gain_spread_sigma_db = 0.0;
            c
        } else {
            config.clone()
        };
        let slots = [
            draw_channel(&round_cfg, rng),
            draw_channel(&round_cfg, rng),
        ];
        let est = adaptive_weighted_average(&payloads, theta, &slots, &round_cfg, rng)?;

        let err: f64 = phi
            .iter()
            .zip(&est.phi_hat)
            .map(|(t, e)| (t - e) * (t - e))
            .sum::<f64>()
            / l as f64;
        total += err;
    }
    Ok(total / n_mc as f64)
}

/// Monte-Carlo field error of the adaptive average on replayed pooled rounds.
///
/// The column pools hold, per pooled round, one `(weights, values)` slice
/// across all M nodes for each of the L elements (stored round-major) plus
/// the pooled round's own ground truth. Every simulated round bootstraps one
/// such group, runs both AirComp slots, and scores the estimate against the
/// pooled truth; the rounds are aggregated by their median, matching how the
/// sweeps score methods (median RMSE over trials). Replaying whole rounds
/// preserves the across-node weight correlation, the weight-value pairing,
/// and the within-node norm structure that drives the power control of
/// product-of-experts payloads.
pub fn estimate_field_error<R: Rng + ?Sized>(
    theta: &TruncationParams,
    value_columns: &[Vec<f64>],
    weight_columns: &[Vec<f64>],
    true_columns: &[f64],
    config: &SystemConfig,
    n_mc: usize,
    rng: &mut R,
) -> Result<f64> {
    if value_columns.is_empty()
        || weight_columns.len() != value_columns.len()
        || true_columns.len() != value_columns.len()
    {
        return Err(Error::InvalidConfig(
            "column pools must be nonempty and equal in count".into(),
        ));
    }
    if n_mc == 0 {
        return Err(Error::InvalidConfig("n_mc must be >= 1".into()));
    }
    let m = config.num_nodes;
    let l = config.message_len;
    if weight_columns.len() % l != 0 {
        return Err(Error::ShapeMismatch(format!(
            "column count {} is not a multiple of message_len {l}",
            weight_columns.len()
        )));
    }
    if weight_columns
        .iter()
        .chain(value_columns)
        .any(|c| c.len() != m)
    {
        return Err(Error::ShapeMismatch(format!(
            "column pools must have {m} entries per column"
        )));
    }
    let pooled_rounds = weight_columns.len() / l;

    let mut round_errors = Vec::with_capacity(n_mc);
    for _ in 0..n_mc {
        let round = rng.random_range(0..pooled_rounds);
        let cols: Vec<usize> = (0..l).map(|li| round * l + li).collect();
        let payloads: Vec<NodePayload> = (0..m)
            .map(|i| NodePayload {
                weights: cols.iter().map(|&c| weight_columns[c][i]).collect(),
                values: cols.iter().map(|&c| value_columns[c][i]).collect(),
            })
            .collect();

        let round_cfg = if config.gain_spread_sigma_db > 0.0 {
            let gains = draw_unequal_gains(
                config.avg_gain_db[0],
                config.gain_spread_sigma_db,
                m,
                rng,
            );
            let mut c = config.clone();
            c.avg_gain_db = gains;
            c.gain_spread_sigma_db = 0.0;
            c
        } else {
            config.clone()
        };
        let slots = [
            draw_channel(&round_cfg, rng),
            draw_channel(&round_cfg, rng),
        ];
        let est = adaptive_weighted_average(&payloads, theta, &slots, &round_cfg, rng)?;

        let err: f64 = cols
            .iter()
            .zip(&est.phi_hat)
            .map(|(&c, e)| {
                let t = true_columns[c];
                (t - e) * (t - e)
            })
            .sum::<f64>()
            / l as f64;
        round_errors.push(err);
    }
    round_errors.sort_by(f64::total_cmp);
    let n = round_errors.len();
    Ok(if n % 2 == 1 {
        round_errors[n / 2]
    } else {
        (round_errors[n / 2 - 1] + round_errors[n / 2]) / 2.0
    })
}

/// Median of block means: an estimator of the expected round error that stays
/// informative when denominator zero-crossings give the squared error a heavy
/// (formally infinite-mean) tail.
pub(crate) fn median_of_means(errors: &[f64]) -> f64 {
    let blocks = errors.len().min(16).max(1);
    let mut means: Vec<f64> = errors
        .chunks(errors.len().div_ceil(blocks))
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let n = means.len();
    if n % 2 == 1 {
        means[n / 2]
    } else {
        (means[n / 2 - 1] + means[n / 2]) / 2.0
    }
}

/// Closed-form expected improvement for maximizing the negated objective:
/// with `imp = -mu - best` and `z = imp / sigma`,
/// `alpha = imp Phi(z) + sigma phi(z)` for `sigma > 0`, else `max(imp, 0)`.
pub fn expected_improvement(posterior: &GpPosterior, best_neg_mse: f64) -> Vec<f64> {
    let std_norm = Normal::new(0.0, 1.0).unwrap();
    posterior
        .mean
        .iter()
        .zip(&posterior.variance)
        .map(|(&mu, &var)| {
            let imp = -mu - best_neg_mse;
            let sigma = var.max(0.0).sqrt();
            if sigma > 0.0 {
                let z = imp / sigma;
                imp * std_norm.cdf(z) + sigma * std_norm.pdf(z)
            } else {
                imp.max(0.0)
            }
        })
        .collect()
}

/// Objective evaluated during a run; receives a fresh replay of the run's
/// common random-number stream on every call.
pub type BoObjective<'a> = &'a (dyn Fn(&TruncationParams, &mut ChaCha8Rng) -> Result<f64> + Sync);

/// Inputs shared by every step of one run.
pub struct BoContext<'a> {
    pub objective: BoObjective<'a>,
    pub bounds: (f64, f64),
    pub n_candidates: usize,
    /// Seed of the common random-number stream replayed per evaluation.
    pub crn_seed: u64,
}

fn sample_theta<R: Rng + ?Sized>(bounds: (f64, f64), rng: &mut R) -> TruncationParams {
    let draw = |rng: &mut R| {
        if bounds.1 > bounds.0 {
            rng.random_range(bounds.0..bounds.1)
        } else {
            bounds.0
        }
    };
    let a = draw(rng);
    let b = draw(rng);
    TruncationParams {
        delta_min: a.min(b),
        delta_max: a.max(b),
    }
}

/// Surrogate input map: log-compress each bound (weight pools span decades
/// and the decisive truncation structure lives at small deltas), then
/// standardize per coordinate.
struct Standardizer {
    offset: f64,
    mean: [f64; 2],
    std: [f64; 2],
}

impl Standardizer {
    fn fit(thetas: &[(TruncationParams, f64)], hi: f64) -> Self {
        let offset = (1e-4 * hi).max(1e-12);
        let logs: Vec<[f64; 2]> = thetas
            .iter()
            .map(|(t, _)| [(t.delta_min + offset).ln(), (t.delta_max + offset).ln()])
            .collect();
        let n = logs.len() as f64;
        let mut mean = [0.0; 2];
        for l in &logs {
            mean[0] += l[0] / n;
            mean[1] += l[1] / n;
        }
        let mut var = [0.0; 2];
        for l in &logs {
            var[0] += (l[0] - mean[0]).powi(2) / n;
            var[1] += (l[1] - mean[1]).powi(2) / n;
        }
        let std = [
            if var[0].sqrt() > 0.0 { var[0].sqrt() } else { 1.0 },
            if var[1].sqrt() > 0.0 { var[1].sqrt() } else { 1.0 },
        ];
        Standardizer { offset, mean, std }
    }

    fn apply(&self, t: &TruncationParams) -> Vec<f64> {
        vec![
            ((t.delta_min + self.offset).ln() - self.mean[0]) / self.std[0],
            ((t.delta_max + self.offset).ln() - self.mean[1]) / self.std[1],
        ]
    }
}

/// The surrogate models the objective in log space: squared-error objectives
/// span orders of magnitude across the feasible box, and a GP on raw values
/// spends all its capacity on the worst region.
fn surrogate_target(mse: f64) -> f64 {
    mse.max(1e-300).ln()
}

fn fit_surrogate(state: &BoState, hi: f64) -> Result<(GpDataset, KernelParams, Standardizer)> {
    let ys: Vec<f64> = state
        .evaluated
        .iter()
        .map(|(_, e)| surrogate_target(*e))
        .collect();
    if ys.iter().any(|y| !y.is_finite()) {
        return Err(Error::InvalidConfig("objective has non-finite values".into()));
    }
    let standardizer = Standardizer::fit(&state.evaluated, hi);
    let inputs: Vec<Vec<f64>> = state
        .evaluated
        .iter()
        .map(|(t, _)| standardizer.apply(t))
        .collect();
    let dataset = GpDataset::new(inputs, ys)?;
    let init = surrogate_init(dataset.outputs());
    let fitted = gp::fit_hyperparams(&dataset, &init, 60)?;
    Ok((dataset, fitted, standardizer))
}

fn surrogate_init(ys: &[f64]) -> KernelParams {
    let n = ys.len() as f64;
    let mean = ys.iter().sum::<f64>() / n;
    let var = (ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n).max(1e-12);
    KernelParams::new(var, 1.0, (0.1 * var).max(1e-12)).unwrap()
}

/// One surrogate step: refit hyperparameters, score a fresh uniform candidate
/// set by expected improvement, evaluate the winner on the common stream, and
/// append it to the state. A failed surrogate fit falls back to prior-only EI
/// (`mu = ybar`, `sigma^2 = b1 + b3`) for the step.
pub fn bo_step<R: Rng + ?Sized>(
    state: &mut BoState,
    ctx: &BoContext<'_>,
    rng: &mut R,
) -> Result<BoStepRecord> {
    let candidates: Vec<TruncationParams> = (0..ctx.n_candidates)
        .map(|_| sample_theta(ctx.bounds, rng))
        .collect();

    let (posterior, fallback) = match fit_surrogate(state, ctx.bounds.1) {
        Ok((dataset, params, standardizer)) => {
            let test: Vec<Vec<f64>> = candidates.iter().map(|t| standardizer.apply(t)).collect();
            match gp::posterior(&dataset, &params, &test) {
                Ok(p) => (p, false),
                Err(_) => (prior_only_posterior(state, candidates.len()), true),
            }
        }
        Err(_) => (prior_only_posterior(state, candidates.len()), true),
    };

    let best_neg = -surrogate_target(state.best_mse());
    let ei = expected_improvement(&posterior, best_neg);
    let mut sel = 0;
    let mut best_ei = f64::NEG_INFINITY;
    for (i, &a) in ei.iter().enumerate() {
        if a > best_ei {
            best_ei = a;
            sel = i;
        }
    }
    let theta = candidates[sel];

    let mut mc_rng = ChaCha8Rng::seed_from_u64(ctx.crn_seed);
    let mse = (ctx.objective)(&theta, &mut mc_rng)?;
    state.evaluated.push((theta, mse));
    state.step += 1;

    Ok(BoStepRecord {
        eval_index: state.evaluated.len(),
        phase: BoPhase::Search,
        delta_min: theta.delta_min,
        delta_max: theta.delta_max,
        mse,
        best_mse: state.best_mse(),
        surrogate_fallback: fallback,
    })
}

fn prior_only_posterior(state: &BoState, n: usize) -> GpPosterior {
    let finite: Vec<f64> = state
        .evaluated
        .iter()
        .map(|(_, e)| surrogate_target(*e))
        .filter(|e| e.is_finite())
        .collect();
    let ybar = if finite.is_empty() {
        0.0
    } else {
        finite.iter().sum::<f64>() / finite.len() as f64
    };
    let init = if finite.is_empty() {
        KernelParams::new(1.0, 1.0, 0.1).unwrap()
    } else {
        surrogate_init(&finite)
    };
    GpPosterior {
        mean: vec![ybar; n],
        variance: vec![init.scale() + init.noise(); n],
        clipped: 0,
    }
}

/// Full run against an arbitrary objective: random initialization, T
/// surrogate steps, then the evaluated theta with the smallest observed
/// objective. The feasible box must be supplied by the caller.
pub fn optimize_with_objective<R: Rng + ?Sized>(
    bo_config: &BoConfig,
    bounds: (f64, f64),
    objective: BoObjective<'_>,
    rng: &mut R,
) -> Result<BoOutcome> {
    bo_config.validate()?;
    if !(0.0 <= bounds.0 && bounds.0 <= bounds.1) {
        return Err(Error::InvalidConfig(
            "bounds must satisfy 0 <= lo <= hi".into(),
        ));
    }
    let crn_seed = rng.next_u64();

    let mut state = BoState::default();
    let mut history = Vec::with_capacity(bo_config.n_init + bo_config.n_iters);
    for _ in 0..bo_config.n_init {
        let theta = sample_theta(bounds, rng);
        let mut mc_rng = ChaCha8Rng::seed_from_u64(crn_seed);
        let mse = objective(&theta, &mut mc_rng)?;
        state.evaluated.push((theta, mse));
        history.push(BoStepRecord {
            eval_index: state.evaluated.len(),
            phase: BoPhase::Init,
            delta_min: theta.delta_min,
            delta_max: theta.delta_max,
            mse,
            best_mse: state.best_mse(),
            surrogate_fallback: false,
        });
    }

    let ctx = BoContext {
        objective,
        bounds,
        n_candidates: bo_config.n_candidates,
        crn_seed,
    };
    for _ in 0..bo_config.n_iters {
        history.push(bo_step(&mut state, &ctx, rng)?);
    }

    let theta_opt = state.best_theta().expect("n_init >= 1");
    Ok(BoOutcome {
        theta_opt,
        best_mse: state.best_mse(),
        history,
    })
}

/// Full run on the pooled Monte-Carlo objective ([`estimate_mse`]); the
/// feasible box defaults to `[0, p99.9(fw)]`.
pub fn optimize_truncation<R: Rng + ?Sized>(
    bo_config: &BoConfig,
    fs_samples: &[f64],
    fw_samples: &[f64],
    config: &SystemConfig,
    rng: &mut R,
) -> Result<BoOutcome> {
    config.validate()?;
    if fw_samples.is_empty() || fs_samples.is_empty() {
        return Err(Error::InvalidConfig("sample pools must be nonempty".into()));
    }
    let bounds = match bo_config.theta_bounds {
        Some(b) => b,
        None => (0.0, percentile(fw_samples, 99.9)),
    };
    let n_mc = bo_config.n_mc;
    let objective = move |theta: &TruncationParams, mc_rng: &mut ChaCha8Rng| {
        estimate_mse(theta, fs_samples, fw_samples, config, n_mc, mc_rng)
    };
    optimize_with_objective(bo_config, bounds, &objective, rng)
}

/// Nearest-rank percentile of an unsorted sample.
fn percentile(samples: &[f64], pct: f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((pct / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}
