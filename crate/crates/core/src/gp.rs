//! Gaussian-process regression core.
//!
//! Shared by the Bayesian optimizer's surrogate and the radio-map local
//! experts: RBF kernel with scale/noise terms, marginal-likelihood
//! hyperparameter fitting, and posterior prediction.
//!
//! The kernel is `k(a, b) = b1 exp(-b2 d^2(a, b)) + b3 [a is b]` with the
//! noise term folded onto the diagonal of the kernel matrix, and the prior
//! mean is the constant empirical mean of the training outputs. Parameters
//! are kept in log space so the fit is unconstrained.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, Matrix3, Vector3};

use crate::error::{Error, Result};

/// Training pairs for one GP: input vectors and scalar outputs.
#[derive(Debug, Clone)]
pub struct GpDataset {
    inputs: Vec<Vec<f64>>,
    outputs: Vec<f64>,
}

impl GpDataset {
    pub fn new(inputs: Vec<Vec<f64>>, outputs: Vec<f64>) -> Result<Self> {
        if inputs.len() != outputs.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} inputs for {} outputs",
                inputs.len(),
                outputs.len()
            )));
        }
        if inputs.is_empty() {
            return Err(Error::InvalidConfig("dataset must be nonempty".into()));
        }
        let dim = inputs[0].len();
        if dim == 0 || inputs.iter().any(|x| x.len() != dim) {
            return Err(Error::ShapeMismatch(
                "inputs must share one nonzero dimension".into(),
            ));
        }
        if inputs.iter().flatten().any(|v| !v.is_finite())
            || outputs.iter().any(|v| !v.is_finite())
        {
            return Err(Error::InvalidConfig("dataset values must be finite".into()));
        }
        Ok(GpDataset { inputs, outputs })
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    /// Constant prior mean: the empirical mean of the outputs.
    pub fn output_mean(&self) -> f64 {
        self.outputs.iter().sum::<f64>() / self.outputs.len() as f64
    }
}

/// RBF kernel hyperparameters, stored in log space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    log_params: [f64; 3],
}

impl KernelParams {
    /// Builds from the positive parameters (scale, inverse lengthscale, noise).
    pub fn new(scale: f64, inv_lengthscale: f64, noise: f64) -> Result<Self> {
        for (name, v) in [
            ("scale", scale),
            ("inv_lengthscale", inv_lengthscale),
            ("noise", noise),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "kernel {name} must be positive and finite"
                )));
            }
        }
        Ok(KernelParams {
            log_params: [scale.ln(), inv_lengthscale.ln(), noise.ln()],
        })
    }

    pub fn from_log(log_params: [f64; 3]) -> Self {
        KernelParams { log_params }
    }

    pub fn log_params(&self) -> [f64; 3] {
        self.log_params
    }

    /// b1, the signal variance scale.
    pub fn scale(&self) -> f64 {
        self.log_params[0].exp()
    }

    /// b2, the coefficient on the squared distance inside the exponent.
    pub fn inv_lengthscale(&self) -> f64 {
        self.log_params[1].exp()
    }

    /// b3, the observation-noise variance on the diagonal.
    pub fn noise(&self) -> f64 {
        self.log_params[2].exp()
    }
}

/// Posterior mean and variance per test point.
#[derive(Debug, Clone)]
pub struct GpPosterior {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    /// Number of variance entries clipped up from tiny negatives.
    pub clipped: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `k = b1 exp(-b2 d^2(a, b)) + b3 [same_point]`.
pub fn kernel_eval(params: &KernelParams, a: &[f64], b: &[f64], same_point: bool) -> f64 {
    let base = params.scale() * (-params.inv_lengthscale() * sq_dist(a, b)).exp();
    if same_point {
        base + params.noise()
    } else {
        base
    }
}

fn kernel_matrix(dataset: &GpDataset, params: &KernelParams) -> DMatrix<f64> {
    let n = dataset.len();
    let x = dataset.inputs();
    DMatrix::from_fn(n, n, |i, j| kernel_eval(params, &x[i], &x[j], i == j))
}

const JITTER_LADDER: [f64; 6] = [0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

fn cholesky_with_jitter(k: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    for &jitter in &JITTER_LADDER {
        let mut kj = k.clone();
        if jitter > 0.0 {
            for i in 0..kj.nrows() {
                kj[(i, i)] += jitter;
            }
        }
        if let Some(chol) = Cholesky::new(kj) {
            return Ok(chol);
        }
    }
    Err(Error::KernelNotPd)
}

struct Prepared {
    chol: Cholesky<f64, Dyn>,
    /// y - ybar.
    residual: DVector<f64>,
    /// K^-1 (y - ybar).
    alpha: DVector<f64>,
    ybar: f64,
}

fn prepare(dataset: &GpDataset, params: &KernelParams) -> Result<Prepared> {
    let k = kernel_matrix(dataset, params);
    let chol = cholesky_with_jitter(&k)?;
    let ybar = dataset.output_mean();
    let residual = DVector::from_iterator(
        dataset.len(),
        dataset.outputs().iter().map(|&y| y - ybar),
    );
    let alpha = chol.solve(&residual);
    Ok(Prepared {
        chol,
        residual,
        alpha,
        ybar,
    })
}

/// Log-marginal likelihood of the outputs under the kernel, with the constant
/// empirical mean subtracted:
/// `-1/2 log det K - (n/2) log 2pi - 1/2 (y-ybar)' K^-1 (y-ybar)`.
pub fn log_marginal_likelihood(dataset: &GpDataset, params: &KernelParams) -> Result<f64> {
    let prep = prepare(dataset, params)?;
    Ok(lml_from_prepared(dataset.len(), &prep))
}

fn lml_from_prepared(n: usize, prep: &Prepared) -> f64 {
    let log_det: f64 = (0..n).map(|i| prep.chol.l_dirty()[(i, i)].ln()).sum::<f64>() * 2.0;
    let quad = prep.residual.dot(&prep.alpha);
    -0.5 * log_det - (n as f64 / 2.0) * (2.0 * std::f64::consts::PI).ln() - 0.5 * quad
}

/// Log-marginal likelihood and its gradient with respect to the log
/// hyperparameters, via `d/dtheta = 1/2 tr((aa' - K^-1) dK/dtheta)`.
pub fn lml_with_gradient(dataset: &GpDataset, params: &KernelParams) -> Result<(f64, [f64; 3])> {
    let n = dataset.len();
    let prep = prepare(dataset, params)?;
    let lml = lml_from_prepared(n, &prep);

    let kinv = prep.chol.inverse();
    let beta1 = params.scale();
    let beta2 = params.inv_lengthscale();
    let beta3 = params.noise();
    let x = dataset.inputs();

    let mut g1 = 0.0; // sum A_ij * dK/db1
    let mut g2 = 0.0; // sum A_ij * dK/db2
    let mut g3 = 0.0; // sum A_ij * dK/db3 (identity)
    for i in 0..n {
        for j in 0..n {
            let a_ij = prep.alpha[i] * prep.alpha[j] - kinv[(i, j)];
            let d2 = sq_dist(&x[i], &x[j]);
            let e = (-beta2 * d2).exp();
            g1 += a_ij * e;
            g2 += a_ij * (-beta1 * d2 * e);
            if i == j {
                g3 += a_ij;
            }
        }
    }
    let grad = [
        beta1 * 0.5 * g1,
        beta2 * 0.5 * g2,
        beta3 * 0.5 * g3,
    ];
    Ok((lml, grad))
}

/// Log-parameter clamp used during the fit to keep the kernel finite.
const LOG_BOUND: f64 = 20.0;

/// Single-start quasi-Newton ascent of the log-marginal likelihood in
/// log-parameter space with a backtracking line search. Returns the best
/// parameters seen, which by construction never score below `init`.
/// `budget = 0` returns `init` unchanged; the search also stops when the
/// gradient norm drops below 1e-6.
pub fn fit_hyperparams(
    dataset: &GpDataset,
    init: &KernelParams,
    budget: usize,
) -> Result<KernelParams> {
    if dataset.is_empty() {
        return Err(Error::InvalidConfig("dataset must be nonempty".into()));
    }
    if budget == 0 {
        return Ok(*init);
    }

    // Minimize f = -LML.
    let eval = |x: &Vector3<f64>| -> Option<(f64, Vector3<f64>)> {
        let p = KernelParams::from_log([x[0], x[1], x[2]]);
        match lml_with_gradient(dataset, &p) {
            Ok((lml, grad)) if lml.is_finite() => {
                let g = Vector3::new(-grad[0], -grad[1], -grad[2]);
                if g.iter().all(|v| v.is_finite()) {
                    Some((-lml, g))
                } else {
                    None
                }
            }
            _ => None,
        }
    };

    let lp = init.log_params();
    let mut x = Vector3::new(lp[0], lp[1], lp[2]);
    let (mut f, mut g) = eval(&x).ok_or(Error::BadInitialization)?;
    let mut best = (x, f);
    let mut h = Matrix3::identity();

    for _ in 0..budget {
        if g.norm() < 1e-6 {
            break;
        }
        let mut dir = -(h * g);
        if dir.dot(&g) >= 0.0 {
            h = Matrix3::identity();
            dir = -g;
        }

        let mut accepted = None;
        let mut t = 1.0;
        for _ in 0..50 {
            let mut x_new = x + t * dir;
            for c in x_new.iter_mut() {
                *c = c.clamp(-LOG_BOUND, LOG_BOUND);
            }
            let step = x_new - x;
            if step.norm() == 0.0 {
                break;
            }
            if let Some((f_new, g_new)) = eval(&x_new) {
                let slope = g.dot(&step);
                let bound = if slope < 0.0 { f + 1e-4 * slope } else { f };
                if f_new <= bound {
                    accepted = Some((x_new, f_new, g_new, step));
                    break;
                }
            }
            t *= 0.5;
        }

        let Some((x_new, f_new, g_new, step)) = accepted else {
            break;
        };
        let y = g_new - g;
        let sy = step.dot(&y);
        if sy > 1e-12 {
            let rho = 1.0 / sy;
            let i3 = Matrix3::identity();
            let left = i3 - rho * step * y.transpose();
            let right = i3 - rho * y * step.transpose();
            h = left * h * right + rho * step * step.transpose();
        }
        x = x_new;
        f = f_new;
        g = g_new;
        if f < best.1 {
            best = (x, f);
        }
    }

    Ok(KernelParams::from_log([best.0[0], best.0[1], best.0[2]]))
}

/// Posterior mean and variance at the test inputs:
/// `mu = ybar + k*' K^-1 (y - ybar)`,
/// `var = (b1 + b3) - k*' K^-1 k*`
/// (the self-covariance includes the noise term). Tiny negative variances are
/// clipped to zero and counted.
pub fn posterior(
    dataset: &GpDataset,
    params: &KernelParams,
    test_inputs: &[Vec<f64>],
) -> Result<GpPosterior> {
    if test_inputs.iter().any(|x| x.len() != dataset.dim()) {
        return Err(Error::ShapeMismatch(
            "test input dimension differs from training".into(),
        ));
    }
    let prep = prepare(dataset, params)?;
    let n = dataset.len();
    let x = dataset.inputs();
    let self_cov = params.scale() + params.noise();

    let mut mean = Vec::with_capacity(test_inputs.len());
    let mut variance = Vec::with_capacity(test_inputs.len());
    let mut clipped = 0usize;
    for t in test_inputs {
        let kstar = DVector::from_iterator(
            n,
            x.iter().map(|xi| kernel_eval(params, xi, t, false)),
        );
        mean.push(prep.ybar + kstar.dot(&prep.alpha));
        let v = prep.chol.solve(&kstar);
        let mut var = self_cov - kstar.dot(&v);
        if var < 0.0 {
            clipped += 1;
            var = 0.0;
        }
        variance.push(var);
    }
    Ok(GpPosterior {
        mean,
        variance,
        clipped,
    })
}
