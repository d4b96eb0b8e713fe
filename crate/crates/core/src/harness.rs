//! Experiment orchestration: configuration files, seed discipline, sweep
//! execution, RMSE statistics and CSV emission.
//!
//! Every trial derives its seed from a stable mix of (master seed, sweep-axis
//! index, trial index), so results are byte-identical across runs and thread
//! counts, and adding trials never perturbs existing ones. Truncation bounds
//! are optimized once per sweep point from the pseudo pools and reused across
//! that point's trials. Medians are taken over all trials including diverged
//! (`+inf`) entries.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;

use crate::aircomp::TruncationParams;
use crate::bayesopt::{BoConfig, BoOutcome};
use crate::channel::{draw_unequal_gains, linear_to_db, ChannelKind, SystemConfig};
use crate::dgpr::{
    self, estimate_from_experts, expert_params_from_stats, pseudo_distributions, DgprMethod,
};
use crate::error::{Error, Result};
use crate::radiomap::{generate_scenario, ScenarioParams};

/// Estimation route requested from a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pure,
    Simple,
    Adaptive,
    Noiseless,
    Pathloss,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Pure => "pure",
            Method::Simple => "simple",
            Method::Adaptive => "adaptive",
            Method::Noiseless => "noiseless",
            Method::Pathloss => "pathloss",
        }
    }

    fn dgpr(&self) -> DgprMethod {
        match self {
            Method::Pure => DgprMethod::Pure,
            Method::Simple => DgprMethod::Simple,
            Method::Adaptive => DgprMethod::Adaptive,
            Method::Noiseless => DgprMethod::Noiseless,
            Method::Pathloss => DgprMethod::PathLoss,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Swept parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Psnr,
    DCor,
    SigmaOmega,
    EpsD,
    EpsSigma,
}

impl SweepAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepAxis::Psnr => "psnr",
            SweepAxis::DCor => "d_cor",
            SweepAxis::SigmaOmega => "sigma_omega",
            SweepAxis::EpsD => "eps_d",
            SweepAxis::EpsSigma => "eps_sigma",
        }
    }
}

/// Sweep definition: one axis, several values.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

/// System block of the config file, in dBm/dB units.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub num_nodes: usize,
    pub message_len: usize,
    pub p_max_dbm: f64,
    pub noise_floor_dbm: f64,
    pub channel: ChannelKind,
    #[serde(default)]
    pub avg_gain_db: f64,
    #[serde(default)]
    pub gain_spread_sigma_db: f64,
}

impl SystemSpec {
    pub fn to_config(&self) -> Result<SystemConfig> {
        SystemConfig::from_db(
            self.num_nodes,
            self.message_len,
            self.p_max_dbm,
            self.noise_floor_dbm,
            self.channel,
            vec![self.avg_gain_db; self.num_nodes],
            self.gain_spread_sigma_db,
        )
    }
}

/// Statistics corruption applied only to what the optimizer sees.
#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Mismatch {
    /// Error added to the correlation distance, m.
    pub eps_d: f64,
    /// Error added to the shadowing standard deviation, dB.
    pub eps_sigma: f64,
}

fn default_pseudo_reps() -> usize {
    100
}

/// One experiment: scenario, system, methods, budgets, sweep.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub seed: u64,
    pub n_trials: usize,
    pub methods: Vec<Method>,
    /// Repetitions of the pseudo-dataset procedure feeding the optimizer.
    #[serde(default = "default_pseudo_reps")]
    pub pseudo_reps: usize,
    pub sweep: Sweep,
    pub system: SystemSpec,
    pub scenario: ScenarioParams,
    #[serde(default)]
    pub bo: BoConfig,
    #[serde(default)]
    pub mismatch: Mismatch,
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: ExperimentSpec =
            toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::InvalidConfig("n_trials must be >= 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("methods must be nonempty".into()));
        }
        if self.sweep.values.is_empty() {
            return Err(Error::InvalidConfig("sweep.values must be nonempty".into()));
        }
        if self.pseudo_reps == 0 {
            return Err(Error::InvalidConfig("pseudo_reps must be >= 1".into()));
        }
        self.scenario.validate()?;
        if self.scenario.n_test != self.system.message_len {
            return Err(Error::InvalidConfig(format!(
                "scenario n_test {} differs from system message_len {}",
                self.scenario.n_test, self.system.message_len
            )));
        }
        self.bo.validate()?;
        // Resolve every sweep point eagerly so config errors surface before
        // any computation.
        for &value in &self.sweep.values {
            let (scenario, system, mismatch) = self.resolve(value)?;
            system.validate()?;
            scenario.validate()?;
            if self.methods.contains(&Method::Adaptive) {
                corrupted_stats(&scenario, &mismatch)?;
            }
        }
        Ok(())
    }

    /// Effective (scenario, system, mismatch) at one sweep value.
    pub fn resolve(&self, value: f64) -> Result<(ScenarioParams, SystemConfig, Mismatch)> {
        let mut scenario = self.scenario.clone();
        let mut system = self.system.to_config()?;
        let mut mismatch = self.mismatch;
        match self.sweep.axis {
            SweepAxis::Psnr => {
                let gain = value - linear_to_db(system.p_max / system.noise_floor);
                system.avg_gain_db = vec![gain; system.num_nodes];
            }
            SweepAxis::DCor => scenario.d_cor = value,
            SweepAxis::SigmaOmega => system.gain_spread_sigma_db = value,
            SweepAxis::EpsD => mismatch.eps_d = value,
            SweepAxis::EpsSigma => mismatch.eps_sigma = value,
        }
        Ok((scenario, system, mismatch))
    }
}

/// Scenario statistics as the optimizer believes them to be.
pub fn corrupted_stats(scenario: &ScenarioParams, mismatch: &Mismatch) -> Result<ScenarioParams> {
    let mut sc = scenario.clone();
    sc.d_cor += mismatch.eps_d;
    sc.sigma_db += mismatch.eps_sigma;
    if !(sc.d_cor > 0.0) {
        return Err(Error::InvalidConfig(
            "mismatched d_cor must stay positive".into(),
        ));
    }
    if !(sc.sigma_db >= 0.0) {
        return Err(Error::InvalidConfig(
            "mismatched sigma_db must stay nonnegative".into(),
        ));
    }
    Ok(sc)
}

/// Aggregated result for one (sweep value, method) pair.
#[derive(Debug, Clone)]
pub struct ResultRecord {
    pub sweep_axis: SweepAxis,
    pub sweep_value: f64,
    pub method: Method,
    pub trial_rmse_db: Vec<f64>,
    pub trial_diverged: Vec<bool>,
    pub median_rmse_db: f64,
    pub diverged_count: usize,
    /// Wall time of the whole sweep point, seconds. Not written to CSV.
    pub wall_time_s: f64,
}

/// Root-mean-squared error of the dB-valued fields; `+inf` when the estimate
/// contains non-finite entries (a diverged trial).
pub fn rmse_db(truth: &[f64], estimate: &[f64]) -> Result<f64> {
    if truth.len() != estimate.len() {
        return Err(Error::ShapeMismatch(format!(
            "truth has {} entries, estimate {}",
            truth.len(),
            estimate.len()
        )));
    }
    if estimate.iter().any(|e| !e.is_finite()) {
        return Ok(f64::INFINITY);
    }
    let mse = truth
        .iter()
        .zip(estimate)
        .map(|(t, e)| (t - e) * (t - e))
        .sum::<f64>()
        / truth.len() as f64;
    Ok(mse.sqrt())
}

/// Median including non-finite entries (midpoint of the two central order
/// statistics for even counts).
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Uplink slots charged per round by the AirComp protocols (norm reporting and
/// the rho broadcast are modeled as error-free and not charged).
pub fn required_time_slots(method: Method) -> usize {
    match method {
        Method::Pure | Method::Adaptive => 2,
        Method::Simple => 1,
        Method::Noiseless | Method::Pathloss => 0,
    }
}

/// Slots a digital weighted-averaging baseline would need to collect both
/// message vectors from every node over TDMA.
pub fn digital_transmission_slots(num_nodes: usize) -> usize {
    2 * num_nodes
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable order-sensitive mix of seed components.
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut acc = 0x243F_6A88_85A3_08D3u64;
    for &p in parts {
        acc = splitmix64(acc ^ p);
    }
    acc
}

const TAG_POOLS: u64 = 1;
const TAG_BO: u64 = 2;
const TAG_TRIAL: u64 = 3;
const TAG_METHOD: u64 = 4;

/// Pools and optimized truncation bounds for one sweep point. The objective
/// resamples the pseudo pools columnwise so the across-node structure of the
/// product-of-experts weights survives into the power-control simulation.
pub fn optimize_theta_for_point(
    spec: &ExperimentSpec,
    axis_index: usize,
    scenario: &ScenarioParams,
    system: &SystemConfig,
    mismatch: &Mismatch,
) -> Result<BoOutcome> {
    let sc_bo = corrupted_stats(scenario, mismatch)?;
    let mut pool_rng =
        ChaCha8Rng::seed_from_u64(mix_seed(&[spec.seed, TAG_POOLS, axis_index as u64]));
    let pools = pseudo_distributions(&sc_bo, system, spec.pseudo_reps, &mut pool_rng)?;
    let mut bo_rng = ChaCha8Rng::seed_from_u64(mix_seed(&[spec.seed, TAG_BO, axis_index as u64]));

    let bounds = match spec.bo.theta_bounds {
        Some(b) => b,
        None => {
            let mut sorted = pools.weights.clone();
            sorted.sort_by(f64::total_cmp);
            let rank = ((99.9 / 100.0) * sorted.len() as f64).ceil() as usize;
            (0.0, sorted[rank.clamp(1, sorted.len()) - 1])
        }
    };
    let n_mc = spec.bo.n_mc;
    let objective = move |theta: &TruncationParams, mc_rng: &mut ChaCha8Rng| {
        crate::bayesopt::estimate_field_error(
            theta,
            &pools.value_columns,
            &pools.weight_columns,
            &pools.true_columns,
            system,
            n_mc,
            mc_rng,
        )
    };
    crate::bayesopt::optimize_with_objective(&spec.bo, bounds, &objective, &mut bo_rng)
}

fn run_trial(
    spec: &ExperimentSpec,
    scenario_params: &ScenarioParams,
    system: &SystemConfig,
    theta: Option<&TruncationParams>,
    axis_index: usize,
    trial: usize,
) -> Result<Vec<(f64, bool)>> {
    let trial_seed = mix_seed(&[spec.seed, TAG_TRIAL, axis_index as u64, trial as u64]);
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);

    let trial_system = if system.gain_spread_sigma_db > 0.0 {
        let gains = draw_unequal_gains(
            system.avg_gain_db[0],
            system.gain_spread_sigma_db,
            system.num_nodes,
            &mut rng,
        );
        let mut s = system.clone();
        s.avg_gain_db = gains;
        s.gain_spread_sigma_db = 0.0;
        s
    } else {
        system.clone()
    };

    let scenario = generate_scenario(scenario_params, &mut rng)?;
    let needs_experts = spec.methods.iter().any(|m| *m != Method::Pathloss);
    let experts = if needs_experts {
        let kernel = expert_params_from_stats(scenario_params);
        dgpr::run_local_experts(&scenario, &kernel, trial_system.num_nodes, &mut rng)?
    } else {
        Vec::new()
    };

    let mut out = Vec::with_capacity(spec.methods.len());
    for (mi, method) in spec.methods.iter().enumerate() {
        let mut method_rng =
            ChaCha8Rng::seed_from_u64(mix_seed(&[trial_seed, TAG_METHOD, mi as u64]));
        let est = estimate_from_experts(
            &scenario,
            scenario_params,
            &experts,
            method.dgpr(),
            theta,
            &trial_system,
            &mut method_rng,
        )?;
        let rmse = rmse_db(&scenario.true_test, &est.phi_hat)?;
        out.push((rmse, !rmse.is_finite()));
    }
    Ok(out)
}

/// Runs the full sweep: per value, optimize theta once (when adaptive is
/// requested), run the trials in parallel with per-trial seeds, and aggregate
/// per method.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<ResultRecord>> {
    spec.validate()?;
    let mut records = Vec::new();
    for (axis_index, &value) in spec.sweep.values.iter().enumerate() {
        let (scenario, system, mismatch) = spec.resolve(value)?;
        let start = Instant::now();
        let theta = if spec.methods.contains(&Method::Adaptive) {
            Some(
                optimize_theta_for_point(spec, axis_index, &scenario, &system, &mismatch)?
                    .theta_opt,
            )
        } else {
            None
        };

        let per_trial: Vec<Vec<(f64, bool)>> = (0..spec.n_trials)
            .into_par_iter()
            .map(|t| run_trial(spec, &scenario, &system, theta.as_ref(), axis_index, t))
            .collect::<Result<_>>()?;
        let wall_time_s = start.elapsed().as_secs_f64();

        for (mi, &method) in spec.methods.iter().enumerate() {
            let trial_rmse_db: Vec<f64> = per_trial.iter().map(|v| v[mi].0).collect();
            let trial_diverged: Vec<bool> = per_trial.iter().map(|v| v[mi].1).collect();
            let diverged_count = trial_diverged.iter().filter(|d| **d).count();
            records.push(ResultRecord {
                sweep_axis: spec.sweep.axis,
                sweep_value: value,
                method,
                median_rmse_db: median(&trial_rmse_db),
                diverged_count,
                trial_rmse_db,
                trial_diverged,
                wall_time_s,
            });
        }
    }
    Ok(records)
}

/// CSV float formatting: 17 significant digits (exact f64 round-trip), with
/// `inf`/`-inf`/`nan` spelled out.
pub fn format_csv_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

use format_csv_float as fmt_float;

/// Writes `trials.csv` (one row per trial) and `summary.csv` (one row per
/// sweep value and method) into the directory. LF line endings, 17
/// significant digits.
pub fn emit_csv(records: &[ResultRecord], dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut trials = String::from("sweep_axis,sweep_value,method,trial,rmse_db,diverged\n");
    for r in records {
        for (t, (rmse, div)) in r.trial_rmse_db.iter().zip(&r.trial_diverged).enumerate() {
            trials.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.sweep_axis.as_str(),
                fmt_float(r.sweep_value),
                r.method,
                t,
                fmt_float(*rmse),
                div
            ));
        }
    }
    let trials_path = dir.join("trials.csv");
    std::fs::write(&trials_path, trials).map_err(|e| Error::io(&trials_path, e))?;

    let mut summary = String::from("sweep_axis,sweep_value,method,median_rmse_db,diverged_count\n");
    for r in records {
        summary.push_str(&format!(
            "{},{},{},{},{}\n",
            r.sweep_axis.as_str(),
            fmt_float(r.sweep_value),
            r.method,
            fmt_float(r.median_rmse_db),
            r.diverged_count
        ));
    }
    let summary_path = dir.join("summary.csv");
    std::fs::write(&summary_path, summary).map_err(|e| Error::io(&summary_path, e))?;

    Ok((trials_path, summary_path))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMOKE_TOML: &str = r#"
seed = 7
n_trials = 3
methods = ["pure", "simple", "noiseless"]
pseudo_reps = 4

[sweep]
axis = "psnr"
values = [40.0]

[system]
num_nodes = 4
message_len = 6
p_max_dbm = 10.0
noise_floor_dbm = -90.0
channel = "awgn"

[scenario]
x_tx = -1.0
p_tx_dbm = 10.0
eta = 3.0
sigma_db = 8.0
d_cor = 100.0
area = [1.0, 500.0]
n_measurements = 24
n_test = 6
"#;

    #[test]
    fn rmse_reference_points() {
        assert_eq!(rmse_db(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        let r = rmse_db(&[-50.0, -60.0], &[-48.0, -58.0]).unwrap();
        assert!((r - 2.0).abs() < 1e-12);
        let r = rmse_db(&[1.0, 2.0], &[f64::NAN, 2.0]).unwrap();
        assert!(r.is_infinite() && r > 0.0);
        assert!(rmse_db(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn median_handles_divergence() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[1.0, 2.0, 3.0, 4.0]), 2.5);
        assert_eq!(median(&[1.0, f64::INFINITY]), f64::INFINITY);
        assert_eq!(median(&[1.0, 2.0, f64::INFINITY]), 2.0);
        assert!(median(&[f64::INFINITY; 4]).is_infinite());
    }

    #[test]
    fn slot_accounting_matches_protocol_table() {
        assert_eq!(required_time_slots(Method::Pure), 2);
        assert_eq!(required_time_slots(Method::Simple), 1);
        assert_eq!(required_time_slots(Method::Adaptive), 2);
        for m in [4, 16, 32] {
            assert_eq!(digital_transmission_slots(m), 2 * m);
        }
    }

    #[test]
    fn seed_mix_is_stable_and_order_sensitive() {
        assert_eq!(mix_seed(&[1, 2]), mix_seed(&[1, 2]));
        assert_ne!(mix_seed(&[1, 2]), mix_seed(&[2, 1]));
        assert_ne!(mix_seed(&[0]), mix_seed(&[0, 0]));
    }

    #[test]
    fn toml_parses_and_rejects_unknown_keys() {
        let spec = ExperimentSpec::from_toml(SMOKE_TOML).unwrap();
        assert_eq!(spec.n_trials, 3);
        assert_eq!(spec.methods.len(), 3);
        assert_eq!(spec.bo.n_init, 8);

        let bad = format!("{SMOKE_TOML}\nunknown_key = 1\n");
        assert!(matches!(
            ExperimentSpec::from_toml(&bad),
            Err(Error::ConfigParse(_))
        ));

        let bad = SMOKE_TOML.replace("n_measurements = 24", "n_measurements = 24\nbogus = 2");
        assert!(ExperimentSpec::from_toml(&bad).is_err());
    }

    #[test]
    fn psnr_axis_sets_gains() {
        let spec = ExperimentSpec::from_toml(SMOKE_TOML).unwrap();
        let (_, system, _) = spec.resolve(40.0).unwrap();
        // PSNR 40 with P_max 10 dBm and noise -90 dBm means gain -60 dB.
        assert!(system.avg_gain_db.iter().all(|g| (g + 60.0).abs() < 1e-9));
        assert!((crate::channel::psnr_db(&system).unwrap() - 40.0).abs() < 1e-9);
    }

    #[test]
    fn record_count_is_methods_times_values() {
        let mut spec = ExperimentSpec::from_toml(SMOKE_TOML).unwrap();
        spec.n_trials = 1;
        let records = run_experiment(&spec).unwrap();
        assert_eq!(records.len(), spec.methods.len());
        for r in &records {
            assert_eq!(r.trial_rmse_db.len(), 1);
        }
    }

    #[test]
    fn run_is_deterministic() {
        let spec = ExperimentSpec::from_toml(SMOKE_TOML).unwrap();
        let a = run_experiment(&spec).unwrap();
        let b = run_experiment(&spec).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.trial_rmse_db, y.trial_rmse_db);
            assert_eq!(x.median_rmse_db, y.median_rmse_db);
        }
    }

    #[test]
    fn theta_reuse_equals_recomputation() {
        let mut spec = ExperimentSpec::from_toml(SMOKE_TOML).unwrap();
        spec.methods = vec![Method::Adaptive];
        spec.bo = BoConfig {
            n_init: 3,
            n_iters: 2,
            n_candidates: 16,
            n_mc: 20,
            theta_bounds: None,
        };
        let (scenario, system, mismatch) = spec.resolve(40.0).unwrap();
        let theta_once = optimize_theta_for_point(&spec, 0, &scenario, &system, &mismatch)
            .unwrap()
            .theta_opt;

        let reused: Vec<_> = (0..spec.n_trials)
            .map(|t| run_trial(&spec, &scenario, &system, Some(&theta_once), 0, t).unwrap())
            .collect();
        let recomputed: Vec<_> = (0..spec.n_trials)
            .map(|t| {
                let theta = optimize_theta_for_point(&spec, 0, &scenario, &system, &mismatch)
                    .unwrap()
                    .theta_opt;
                run_trial(&spec, &scenario, &system, Some(&theta), 0, t).unwrap()
            })
            .collect();
        assert_eq!(reused, recomputed);
    }

    #[test]
    fn csv_round_trip_and_empty_header() {
        let dir = tempfile::tempdir().unwrap();
        let (trials, summary) = emit_csv(&[], dir.path()).unwrap();
        assert_eq!(
            std::fs::read_to_string(&trials).unwrap(),
            "sweep_axis,sweep_value,method,trial,rmse_db,diverged\n"
        );
        assert_eq!(
            std::fs::read_to_string(&summary).unwrap(),
            "sweep_axis,sweep_value,method,median_rmse_db,diverged_count\n"
        );

        let records = vec![ResultRecord {
            sweep_axis: SweepAxis::Psnr,
            sweep_value: 40.0,
            method: Method::Pure,
            trial_rmse_db: vec![1.25, f64::INFINITY],
            trial_diverged: vec![false, true],
            median_rmse_db: f64::INFINITY,
            diverged_count: 1,
            wall_time_s: 0.0,
        }];
        let (trials, _) = emit_csv(&records, dir.path()).unwrap();
        let text = std::fs::read_to_string(&trials).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "sweep_axis,sweep_value,method,trial,rmse_db,diverged"
        );
        for (i, line) in lines.enumerate() {
            let cols: Vec<&str> = line.split(',').collect();
            assert_eq!(cols[0], "psnr");
            assert_eq!(cols[1].parse::<f64>().unwrap(), 40.0);
            assert_eq!(cols[2], "pure");
            assert_eq!(cols[3].parse::<usize>().unwrap(), i);
            assert_eq!(
                cols[4].parse::<f64>().unwrap(),
                records[0].trial_rmse_db[i]
            );
            assert_eq!(cols[5].parse::<bool>().unwrap(), records[0].trial_diverged[i]);
        }
    }

    #[test]
    fn validation_rejects_mismatched_lengths_and_bad_axes() {
        let bad = SMOKE_TOML.replace("message_len = 6", "message_len = 5");
        assert!(ExperimentSpec::from_toml(&bad).is_err());

        // A d_cor sweep through zero must fail eagerly.
        let bad = SMOKE_TOML
            .replace("axis = \"psnr\"", "axis = \"d_cor\"")
            .replace("values = [40.0]", "values = [100.0, 0.0]");
        assert!(ExperimentSpec::from_toml(&bad).is_err());
    }
}
