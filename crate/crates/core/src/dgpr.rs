//! Distributed GPR via product-of-experts and its AirComp mapping.
//!
//! Each node runs GPR on its own slice of the measurements and reports a
//! predictive mean and variance per test point. Fusion sums precisions and
//! precision-weights the means, which is exactly a weighted average with
//! `w = 1/sigma^2` and `s = mu`, so the AirComp protocols aggregate the
//! experts in one or two slots. The offline pseudo-dataset procedure replays
//! the whole pipeline on prior draws to build the empirical weight/value pools
//! consumed by the truncation optimizer.
//!
//! Expert kernels default to scenario statistics: scale is the shadowing
//! variance, the RBF halves at the correlation distance, and the noise term is
//! the measurement-noise variance (floored so predictive variances stay
//! strictly positive). A per-expert MLE path exists for sensitivity studies.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::aircomp::{
    adaptive_weighted_average, pure_weighted_average, simple_average, NodePayload,
    TruncationParams,
};
use crate::channel::{draw_channel, SystemConfig};
use crate::error::{Error, Result};
use crate::gp::{self, GpDataset, GpPosterior, KernelParams};
use crate::radiomap::{self, RadioMapScenario, ScenarioParams};

/// Noise floor for stats-derived expert kernels, dB^2. Keeps predictive
/// variances (and therefore AirComp weights) strictly positive when the
/// configured measurement noise is zero; matches the default likelihood-noise
/// lower bound of mainstream GP toolkits.
pub const MIN_EXPERT_NOISE: f64 = 1e-4;

/// One node's view: local data, kernel, and predictions at the test points.
#[derive(Debug, Clone)]
pub struct LocalExpert {
    pub dataset: GpDataset,
    pub params: KernelParams,
    /// Predictive mean per test point.
    pub mean: Vec<f64>,
    /// Predictive variance per test point, strictly positive for noise > 0.
    pub variance: Vec<f64>,
}

/// Product-of-experts fusion output.
#[derive(Debug, Clone)]
pub struct PoeFusion {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    /// True when some element had zero total precision.
    pub diverged: bool,
}

/// Empirical pools of expert weights and values for the optimizer.
///
/// The flat pools treat every `(node, element)` entry independently. The
/// column views keep, for each test element of each repetition, the slice of
/// weights and values across all nodes, preserving the across-node structure
/// (elements poorly covered by every expert keep their correlated small
/// weights).
#[derive(Debug, Clone)]
pub struct PseudoPools {
    pub weights: Vec<f64>,
    pub values: Vec<f64>,
    /// One entry per (repetition, test element); inner length is M.
    pub weight_columns: Vec<Vec<f64>>,
    /// Matched value slices, same shape as `weight_columns`.
    pub value_columns: Vec<Vec<f64>>,
    /// Pseudo-scenario ground truth per (repetition, test element).
    pub true_columns: Vec<f64>,
}

/// Aggregation route for one D-GPR estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DgprMethod {
    Pure,
    Simple,
    Adaptive,
    Noiseless,
    PathLoss,
}

/// Estimate over the test points plus a divergence flag.
#[derive(Debug, Clone)]
pub struct DgprEstimate {
    pub phi_hat: Vec<f64>,
    pub diverged: bool,
}

/// Random partition of a dataset into `m` disjoint parts with sizes differing
/// by at most one.
pub fn split_dataset<R: Rng + ?Sized>(
    full: &GpDataset,
    m: usize,
    rng: &mut R,
) -> Result<Vec<GpDataset>> {
    if m == 0 {
        return Err(Error::InvalidConfig("m must be >= 1".into()));
    }
    if full.len() < m {
        return Err(Error::TooFewSamples {
            have: full.len(),
            need: m,
        });
    }
    let mut idx: Vec<usize> = (0..full.len()).collect();
    idx.shuffle(rng);

    let base = full.len() / m;
    let rem = full.len() % m;
    let mut parts = Vec::with_capacity(m);
    let mut cursor = 0;
    for i in 0..m {
        let take = base + usize::from(i < rem);
        let ids = &idx[cursor..cursor + take];
        cursor += take;
        let inputs = ids.iter().map(|&j| full.inputs()[j].clone()).collect();
        let outputs = ids.iter().map(|&j| full.outputs()[j]).collect();
        parts.push(GpDataset::new(inputs, outputs)?);
    }
    Ok(parts)
}

/// Local GPR prediction; delegates to [`gp::posterior`].
pub fn local_predict(
    dataset: &GpDataset,
    params: &KernelParams,
    test_inputs: &[Vec<f64>],
) -> Result<GpPosterior> {
    gp::posterior(dataset, params, test_inputs)
}

/// Product-of-experts fusion: total precision is the sum of expert precisions
/// and the mean is precision-weighted.
pub fn poe_fuse(means: &[Vec<f64>], inv_variances: &[Vec<f64>]) -> Result<PoeFusion> {
    if means.len() != inv_variances.len() || means.is_empty() {
        return Err(Error::ShapeMismatch(
            "means and inv_variances must be nonempty and equal in count".into(),
        ));
    }
    let l = means[0].len();
    if means.iter().chain(inv_variances).any(|v| v.len() != l) {
        return Err(Error::ShapeMismatch(
            "fusion rows must share one length".into(),
        ));
    }

    let mut mean = Vec::with_capacity(l);
    let mut variance = Vec::with_capacity(l);
    let mut diverged = false;
    for li in 0..l {
        let precision: f64 = inv_variances.iter().map(|w| w[li]).sum();
        let weighted: f64 = means
            .iter()
            .zip(inv_variances)
            .map(|(mu, w)| w[li] * mu[li])
            .sum();
        let var = 1.0 / precision;
        let mu = var * weighted;
        if precision == 0.0 || !mu.is_finite() {
            diverged = true;
        }
        variance.push(var);
        mean.push(mu);
    }
    Ok(PoeFusion {
        mean,
        variance,
        diverged,
    })
}

/// AirComp payloads from expert predictions: `w = 1/sigma^2`, `s = mu`.
pub fn build_payloads(experts: &[LocalExpert]) -> Result<Vec<NodePayload>> {
    experts
        .iter()
        .map(|e| {
            let weights: Vec<f64> = e.variance.iter().map(|v| 1.0 / v).collect();
            NodePayload::new(weights, e.mean.clone())
        })
        .collect()
}

/// Expert kernel derived from the scenario statistics: `b1 = sigma_dB^2`, the
/// RBF halves at `d_cor` (`b2 = ln 2 / d_cor^2`), `b3 = meas_noise_var`
/// floored at [`MIN_EXPERT_NOISE`].
pub fn expert_params_from_stats(params: &ScenarioParams) -> KernelParams {
    let scale = (params.sigma_db * params.sigma_db).max(1e-12);
    let inv_lengthscale = std::f64::consts::LN_2 / (params.d_cor * params.d_cor);
    let noise = params.meas_noise_var.max(MIN_EXPERT_NOISE);
    KernelParams::new(scale, inv_lengthscale, noise).expect("positive by construction")
}

/// Splits the observed measurements among `m` nodes and predicts at the
/// scenario's test locations with the given kernel.
pub fn run_local_experts<R: Rng + ?Sized>(
    scenario: &RadioMapScenario,
    params: &KernelParams,
    m: usize,
    rng: &mut R,
) -> Result<Vec<LocalExpert>> {
    let inputs: Vec<Vec<f64>> = scenario.meas_locations.iter().map(|&x| vec![x]).collect();
    let full = GpDataset::new(inputs, scenario.observed_meas.clone())?;
    let parts = split_dataset(&full, m, rng)?;
    let test: Vec<Vec<f64>> = scenario.test_locations.iter().map(|&x| vec![x]).collect();

    parts
        .into_iter()
        .map(|dataset| {
            let post = local_predict(&dataset, params, &test)?;
            Ok(LocalExpert {
                dataset,
                params: *params,
                mean: post.mean,
                variance: post.variance,
            })
        })
        .collect()
}

/// Offline pseudo-dataset procedure: repeatedly draw a scenario from the prior
/// model, run the local experts, and pool every `(w, s)` pair. Pool sizes are
/// `n_reps * M * L`.
pub fn pseudo_distributions<R: Rng + ?Sized>(
    scenario_params: &ScenarioParams,
    config: &SystemConfig,
    n_reps: usize,
    rng: &mut R,
) -> Result<PseudoPools> {
    if n_reps == 0 {
        return Err(Error::InvalidConfig("n_reps must be >= 1".into()));
    }
    scenario_params.validate()?;
    config.validate()?;
    if scenario_params.n_test != config.message_len {
        return Err(Error::InvalidConfig(format!(
            "scenario n_test {} differs from message_len {}",
            scenario_params.n_test, config.message_len
        )));
    }

    let params = expert_params_from_stats(scenario_params);
    let cap = n_reps * config.num_nodes * config.message_len;
    let mut weights = Vec::with_capacity(cap);
    let mut values = Vec::with_capacity(cap);
    let mut weight_columns = Vec::with_capacity(n_reps * config.message_len);
    let mut value_columns = Vec::with_capacity(n_reps * config.message_len);
    let mut true_columns = Vec::with_capacity(n_reps * config.message_len);
    for _ in 0..n_reps {
        let scenario = radiomap::generate_scenario(scenario_params, rng)?;
        let experts = run_local_experts(&scenario, &params, config.num_nodes, rng)?;
        for e in &experts {
            weights.extend(e.variance.iter().map(|v| 1.0 / v));
            values.extend_from_slice(&e.mean);
        }
        for l in 0..config.message_len {
            weight_columns.push(experts.iter().map(|e| 1.0 / e.variance[l]).collect());
            value_columns.push(experts.iter().map(|e| e.mean[l]).collect());
            true_columns.push(scenario.true_test[l]);
        }
    }
    Ok(PseudoPools {
        weights,
        values,
        weight_columns,
        value_columns,
        true_columns,
    })
}

/// Aggregates already-computed experts with the selected route.
pub fn estimate_from_experts<R: Rng + ?Sized>(
    scenario: &RadioMapScenario,
    scenario_params: &ScenarioParams,
    experts: &[LocalExpert],
    method: DgprMethod,
    theta: Option<&TruncationParams>,
    config: &SystemConfig,
    rng: &mut R,
) -> Result<DgprEstimate> {
    match method {
        DgprMethod::PathLoss => {
            let phi_hat = scenario
                .test_locations
                .iter()
                .map(|&x| radiomap::path_loss_estimate(x, scenario_params))
                .collect::<Result<Vec<f64>>>()?;
            Ok(DgprEstimate {
                phi_hat,
                diverged: false,
            })
        }
        DgprMethod::Noiseless => {
            let means: Vec<Vec<f64>> = experts.iter().map(|e| e.mean.clone()).collect();
            let inv_vars: Vec<Vec<f64>> = experts
                .iter()
                .map(|e| e.variance.iter().map(|v| 1.0 / v).collect())
                .collect();
            let fusion = poe_fuse(&means, &inv_vars)?;
            Ok(DgprEstimate {
                phi_hat: fusion.mean,
                diverged: fusion.diverged,
            })
        }
        DgprMethod::Pure => {
            let payloads = build_payloads(experts)?;
            let slots = [draw_channel(config, rng), draw_channel(config, rng)];
            let est = pure_weighted_average(&payloads, &slots, config, rng)?;
            Ok(DgprEstimate {
                phi_hat: est.phi_hat,
                diverged: est.diverged,
            })
        }
        DgprMethod::Simple => {
            let payloads = build_payloads(experts)?;
            let slot = draw_channel(config, rng);
            let est = simple_average(&payloads, &slot, config, rng)?;
            Ok(DgprEstimate {
                phi_hat: est.phi_hat,
                diverged: est.diverged,
            })
        }
        DgprMethod::Adaptive => {
            let theta = theta.ok_or_else(|| {
                Error::InvalidConfig("adaptive aggregation requires truncation bounds".into())
            })?;
            let payloads = build_payloads(experts)?;
            let slots = [draw_channel(config, rng), draw_channel(config, rng)];
            let est = adaptive_weighted_average(&payloads, theta, &slots, config, rng)?;
            Ok(DgprEstimate {
                phi_hat: est.phi_hat,
                diverged: est.diverged,
            })
        }
    }
}

/// Full single-trial D-GPR estimate: split the scenario's measurements among
/// the nodes, predict locally with stats-derived kernels, then aggregate.
pub fn dgpr_estimate<R: Rng + ?Sized>(
    scenario: &RadioMapScenario,
    scenario_params: &ScenarioParams,
    method: DgprMethod,
    theta: Option<&TruncationParams>,
    config: &SystemConfig,
    rng: &mut R,
) -> Result<DgprEstimate> {
    if method == DgprMethod::PathLoss {
        return estimate_from_experts(scenario, scenario_params, &[], method, theta, config, rng);
    }
    let params = expert_params_from_stats(scenario_params);
    let experts = run_local_experts(scenario, &params, config.num_nodes, rng)?;
    estimate_from_experts(scenario, scenario_params, &experts, method, theta, config, rng)
}
