//! Ground-truth generation for the 1-D radio-map task.
//!
//! Received power follows log-distance path loss plus spatially correlated
//! log-normal shadowing with an exponential correlation profile that halves
//! at the correlation distance. Shadowing is drawn jointly over measurement
//! and test locations so the ground truth at test points is consistent with
//! the observations. Test locations sit on a uniform grid over the area;
//! measurement locations are sampled uniformly.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::Deserialize;

use crate::error::{Error, Result};

/// Scenario parameters for one radio-map task.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioParams {
    /// Transmitter coordinate, m. Kept outside the area so distances never
    /// vanish.
    pub x_tx: f64,
    /// Transmit power, dBm.
    pub p_tx_dbm: f64,
    /// Path-loss exponent.
    pub eta: f64,
    /// Shadowing standard deviation, dB.
    pub sigma_db: f64,
    /// Correlation distance, m.
    pub d_cor: f64,
    /// Observation interval [lo, hi], m.
    pub area: (f64, f64),
    /// Number of measurement locations N.
    pub n_measurements: usize,
    /// Number of test locations (= message length L).
    pub n_test: usize,
    /// Measurement-noise variance, dB^2.
    #[serde(default)]
    pub meas_noise_var: f64,
}

impl ScenarioParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) {
            return Err(Error::InvalidConfig("eta must be > 0".into()));
        }
        if !(self.sigma_db >= 0.0) {
            return Err(Error::InvalidConfig("sigma_db must be >= 0".into()));
        }
        if !(self.d_cor > 0.0) {
            return Err(Error::InvalidConfig("d_cor must be > 0".into()));
        }
        if !(self.area.0 < self.area.1) {
            return Err(Error::InvalidConfig("area must satisfy lo < hi".into()));
        }
        if self.n_measurements == 0 {
            return Err(Error::InvalidConfig("n_measurements must be >= 1".into()));
        }
        if self.n_test == 0 {
            return Err(Error::InvalidConfig("n_test must be >= 1".into()));
        }
        if !(self.meas_noise_var >= 0.0) {
            return Err(Error::InvalidConfig("meas_noise_var must be >= 0".into()));
        }
        Ok(())
    }
}

/// One generated scenario: locations, ground truth and noisy observations.
#[derive(Debug, Clone)]
pub struct RadioMapScenario {
    pub meas_locations: Vec<f64>,
    pub test_locations: Vec<f64>,
    /// Ground-truth received power at the measurement locations, dBm.
    pub true_meas: Vec<f64>,
    /// Ground-truth received power at the test locations, dBm.
    pub true_test: Vec<f64>,
    /// `true_meas` plus measurement noise, dBm.
    pub observed_meas: Vec<f64>,
}

/// Mean received power from the log-distance model, dBm.
pub fn path_loss_estimate(x: f64, params: &ScenarioParams) -> Result<f64> {
    let d = (params.x_tx - x).abs();
    if d == 0.0 {
        return Err(Error::SingularDistance);
    }
    Ok(params.p_tx_dbm - 10.0 * params.eta * d.log10())
}

/// Shadowing covariance `sigma^2 exp(-(d / d_cor) ln 2)`: the correlation
/// halves at separation `d_cor`.
pub fn shadowing_covariance(locations: &[f64], sigma_db: f64, d_cor: f64) -> DMatrix<f64> {
    let n = locations.len();
    let var = sigma_db * sigma_db;
    DMatrix::from_fn(n, n, |i, j| {
        var * (-(locations[i] - locations[j]).abs() / d_cor * std::f64::consts::LN_2).exp()
    })
}

const SHADOWING_JITTER: [f64; 4] = [0.0, 1e-12, 1e-10, 1e-8];

/// Joint shadowing draw over the given locations via a Cholesky factor of the
/// exponential-correlation covariance, with a small jitter ladder.
pub fn draw_shadowing<R: Rng + ?Sized>(
    locations: &[f64],
    sigma_db: f64,
    d_cor: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if sigma_db == 0.0 {
        return Ok(vec![0.0; locations.len()]);
    }
    let cov = shadowing_covariance(locations, sigma_db, d_cor);
    let chol = factor_with_jitter(&cov)?;
    let norm = Normal::new(0.0, 1.0).unwrap();
    let z = DVector::from_iterator(
        locations.len(),
        (0..locations.len()).map(|_| norm.sample(rng)),
    );
    Ok((chol.l() * z).iter().copied().collect())
}

fn factor_with_jitter(cov: &DMatrix<f64>) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    for &jitter in &SHADOWING_JITTER {
        let mut c = cov.clone();
        if jitter > 0.0 {
            for i in 0..c.nrows() {
                c[(i, i)] += jitter;
            }
        }
        if let Some(chol) = Cholesky::new(c) {
            return Ok(chol);
        }
    }
    Err(Error::CovarianceNotPsd)
}

/// Uniform grid of `n` test locations over the area (midpoint for `n = 1`).
fn test_grid(area: (f64, f64), n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![(area.0 + area.1) / 2.0];
    }
    let step = (area.1 - area.0) / (n - 1) as f64;
    (0..n).map(|i| area.0 + i as f64 * step).collect()
}

/// Draws one scenario: uniform measurement locations, gridded test locations,
/// one joint shadowing vector, then ground truth and noisy observations.
pub fn generate_scenario<R: Rng + ?Sized>(
    params: &ScenarioParams,
    rng: &mut R,
) -> Result<RadioMapScenario> {
    params.validate()?;
    let meas_locations: Vec<f64> = (0..params.n_measurements)
        .map(|_| rng.random_range(params.area.0..params.area.1))
        .collect();
    let test_locations = test_grid(params.area, params.n_test);

    let mut all = meas_locations.clone();
    all.extend_from_slice(&test_locations);
    let shadowing = draw_shadowing(&all, params.sigma_db, params.d_cor, rng)?;

    let mut true_meas = Vec::with_capacity(params.n_measurements);
    for (x, chi) in meas_locations.iter().zip(&shadowing) {
        true_meas.push(path_loss_estimate(*x, params)? + chi);
    }
    let mut true_test = Vec::with_capacity(params.n_test);
    for (x, chi) in test_locations
        .iter()
        .zip(&shadowing[params.n_measurements..])
    {
        true_test.push(path_loss_estimate(*x, params)? + chi);
    }

    let noise = Normal::new(0.0, params.meas_noise_var.sqrt()).unwrap();
    let observed_meas = true_meas.iter().map(|&p| p + noise.sample(rng)).collect();

    Ok(RadioMapScenario {
        meas_locations,
        test_locations,
        true_meas,
        true_test,
        observed_meas,
    })
}
