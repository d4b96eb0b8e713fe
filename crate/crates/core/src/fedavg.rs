//! Federated averaging with AirComp model aggregation.
//!
//! Clients hold exponentially-sized slices of a classification dataset, train
//! a one-hidden-layer ReLU network locally with SGD, and the server fuses the
//! selected models by a weighted average with `w_i = N_i` (the client data
//! count) and `s_i = v_i` (the model entries). Since the weight is constant
//! across a client's model, the slot-1 message shrinks to the single scalar
//! `g(N_i)`, and the received scalar normalizes all model coordinates.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use rayon::prelude::*;
use serde::Deserialize;

use crate::aircomp::{truncate_weight, transmit_or_noise, TruncationParams};
use crate::bayesopt::{optimize_with_objective, BoConfig, BoOutcome};
use crate::channel::{draw_channel, SystemConfig};
use crate::error::{Error, Result};
use crate::harness::{mix_seed, SystemSpec};

/// One-hidden-layer network: input -> ReLU hidden -> softmax.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MlpShape {
    pub n_in: usize,
    pub n_hidden: usize,
    pub n_classes: usize,
}

impl MlpShape {
    /// Flat parameter count: `in*h + h + h*c + c`.
    pub fn param_len(&self) -> usize {
        self.n_in * self.n_hidden
            + self.n_hidden
            + self.n_hidden * self.n_classes
            + self.n_classes
    }
}

/// Dense classification dataset with row-major flat inputs.
#[derive(Debug, Clone)]
pub struct ClassDataset {
    pub inputs: Vec<f64>,
    pub labels: Vec<usize>,
    pub n_features: usize,
    pub n_classes: usize,
}

impl ClassDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.n_features..(i + 1) * self.n_features]
    }
}

/// Train/test pair used by one FL run.
#[derive(Debug, Clone)]
pub struct FlData {
    pub train: ClassDataset,
    pub test: ClassDataset,
}

/// Aggregation protocol for the model update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlPolicy {
    Pure,
    Simple,
    Adaptive,
}

impl FlPolicy {
    pub fn as_str(&self) -> &'static str {
        match self {
            FlPolicy::Pure => "pure",
            FlPolicy::Simple => "simple",
            FlPolicy::Adaptive => "adaptive",
        }
    }
}

/// Runtime FL configuration.
#[derive(Debug, Clone)]
pub struct FlConfig {
    pub k_clients: usize,
    pub m_selected: usize,
    pub rounds: usize,
    pub local_epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub hidden_units: usize,
    pub system: SystemConfig,
    pub policy: FlPolicy,
    /// Truncation-bound search budgets, used by the adaptive policy.
    pub bo: BoConfig,
}

impl FlConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m_selected == 0 || self.m_selected > self.k_clients {
            return Err(Error::InvalidConfig(
                "need 1 <= m_selected <= k_clients".into(),
            ));
        }
        if self.batch_size == 0 || self.local_epochs == 0 || self.hidden_units == 0 {
            return Err(Error::InvalidConfig(
                "batch_size, local_epochs and hidden_units must be >= 1".into(),
            ));
        }
        if self.system.num_nodes != self.m_selected {
            return Err(Error::InvalidConfig(
                "system num_nodes must equal m_selected".into(),
            ));
        }
        self.system.validate()
    }
}

/// Exponential client sizes: `floor(Exp(mean = total/k))` clamped to >= 1.
pub fn partition_clients<R: Rng + ?Sized>(total: usize, k: usize, rng: &mut R) -> Vec<usize> {
    assert!(k >= 1 && total >= 1);
    let exp = Exp::new(k as f64 / total as f64).unwrap();
    (0..k)
        .map(|_| (exp.sample(rng).floor() as usize).max(1))
        .collect()
}

/// Client data indices, sampled from the full pool with replacement so
/// clients may overlap.
pub fn assign_client_data<R: Rng + ?Sized>(
    sizes: &[usize],
    total: usize,
    rng: &mut R,
) -> Vec<Vec<usize>> {
    sizes
        .iter()
        .map(|&n| (0..n).map(|_| rng.random_range(0..total)).collect())
        .collect()
}

/// Glorot-uniform weights, zero biases.
pub fn init_model<R: Rng + ?Sized>(shape: &MlpShape, rng: &mut R) -> Vec<f64> {
    let mut v = vec![0.0; shape.param_len()];
    let a1 = (6.0 / (shape.n_in + shape.n_hidden) as f64).sqrt();
    let a2 = (6.0 / (shape.n_hidden + shape.n_classes) as f64).sqrt();
    let w1_len = shape.n_in * shape.n_hidden;
    let w2_off = w1_len + shape.n_hidden;
    let w2_len = shape.n_hidden * shape.n_classes;
    for w in &mut v[..w1_len] {
        *w = rng.random_range(-a1..a1);
    }
    for w in &mut v[w2_off..w2_off + w2_len] {
        *w = rng.random_range(-a2..a2);
    }
    v
}

struct ModelView<'a> {
    w1: &'a [f64],
    b1: &'a [f64],
    w2: &'a [f64],
    b2: &'a [f64],
}

fn view<'a>(model: &'a [f64], shape: &MlpShape) -> ModelView<'a> {
    let w1_len = shape.n_in * shape.n_hidden;
    let w2_len = shape.n_hidden * shape.n_classes;
    let (w1, rest) = model.split_at(w1_len);
    let (b1, rest) = rest.split_at(shape.n_hidden);
    let (w2, b2) = rest.split_at(w2_len);
    ModelView { w1, b1, w2, b2 }
}

fn forward(model: &[f64], shape: &MlpShape, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let v = view(model, shape);
    let mut hidden = vec![0.0; shape.n_hidden];
    for h in 0..shape.n_hidden {
        let mut z = v.b1[h];
        let row = &v.w1[h * shape.n_in..(h + 1) * shape.n_in];
        for (w, xi) in row.iter().zip(x) {
            z += w * xi;
        }
        hidden[h] = z.max(0.0);
    }
    let mut logits = vec![0.0; shape.n_classes];
    for c in 0..shape.n_classes {
        let mut z = v.b2[c];
        let row = &v.w2[c * shape.n_hidden..(c + 1) * shape.n_hidden];
        for (w, a) in row.iter().zip(&hidden) {
            z += w * a;
        }
        logits[c] = z;
    }
    (hidden, logits)
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// Mean cross-entropy over the given sample indices.
pub fn dataset_loss(
    model: &[f64],
    shape: &MlpShape,
    data: &ClassDataset,
    indices: &[usize],
) -> f64 {
    let mut loss = 0.0;
    for &i in indices {
        let (_, logits) = forward(model, shape, data.row(i));
        let p = softmax(&logits);
        loss -= p[data.labels[i]].max(1e-300).ln();
    }
    loss / indices.len() as f64
}

/// Mean cross-entropy gradient over the batch, flat layout matching the model.
fn batch_gradient(
    model: &[f64],
    shape: &MlpShape,
    data: &ClassDataset,
    batch: &[usize],
) -> Vec<f64> {
    let v = view(model, shape);
    let mut grad = vec![0.0; shape.param_len()];
    let w1_len = shape.n_in * shape.n_hidden;
    let w2_off = w1_len + shape.n_hidden;
    let b2_off = w2_off + shape.n_hidden * shape.n_classes;
    let scale = 1.0 / batch.len() as f64;

    for &i in batch {
        let x = data.row(i);
        let (hidden, logits) = forward(model, shape, x);
        let mut dz2 = softmax(&logits);
        dz2[data.labels[i]] -= 1.0;

        for c in 0..shape.n_classes {
            let d = dz2[c] * scale;
            let off = w2_off + c * shape.n_hidden;
            for h in 0..shape.n_hidden {
                grad[off + h] += d * hidden[h];
            }
            grad[b2_off + c] += d;
        }
        for h in 0..shape.n_hidden {
            if hidden[h] <= 0.0 {
                continue;
            }
            let mut da = 0.0;
            for c in 0..shape.n_classes {
                da += v.w2[c * shape.n_hidden + h] * dz2[c];
            }
            let d = da * scale;
            let off = h * shape.n_in;
            for (g, xi) in grad[off..off + shape.n_in].iter_mut().zip(x) {
                *g += d * xi;
            }
            grad[w1_len + h] += d;
        }
    }
    grad
}

/// Minibatch SGD over the client's sample indices. Deterministic given the
/// random source; `lr = 0` leaves the model unchanged.
pub fn local_train<R: Rng + ?Sized>(
    model: &[f64],
    shape: &MlpShape,
    data: &ClassDataset,
    client_indices: &[usize],
    lr: f64,
    epochs: usize,
    batch_size: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if model.len() != shape.param_len() {
        return Err(Error::ShapeMismatch(format!(
            "model has {} parameters, shape wants {}",
            model.len(),
            shape.param_len()
        )));
    }
    if data.n_features != shape.n_in || data.n_classes != shape.n_classes {
        return Err(Error::ShapeMismatch(
            "dataset does not match the model shape".into(),
        ));
    }
    let mut v = model.to_vec();
    let mut order = client_indices.to_vec();
    for _ in 0..epochs {
        order.shuffle(rng);
        for batch in order.chunks(batch_size) {
            let grad = batch_gradient(&v, shape, data, batch);
            for (p, g) in v.iter_mut().zip(&grad) {
                *p -= lr * g;
            }
        }
    }
    Ok(v)
}

/// Top-1 accuracy on the dataset.
pub fn evaluate_accuracy(model: &[f64], shape: &MlpShape, data: &ClassDataset) -> f64 {
    let mut correct = 0usize;
    for i in 0..data.len() {
        let (_, logits) = forward(model, shape, data.row(i));
        let mut arg = 0;
        for c in 1..shape.n_classes {
            if logits[c] > logits[arg] {
                arg = c;
            }
        }
        if arg == data.labels[i] {
            correct += 1;
        }
    }
    correct as f64 / data.len() as f64
}

/// AirComp aggregation of the selected models, weighted by client data count.
///
/// Slot 0 carries `g(N_i) * v_i`; slot 1 carries the single scalar `g(N_i)`
/// per node (the weight is constant across the model), and the decoded scalar
/// denominator normalizes every coordinate. Simple averaging uses one slot of
/// unweighted models divided by the node count.
pub fn aggregate_aircomp<R: Rng + ?Sized>(
    models: &[Vec<f64>],
    sizes: &[usize],
    policy: FlPolicy,
    theta: Option<&TruncationParams>,
    config: &SystemConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if models.is_empty() || models.len() != sizes.len() {
        return Err(Error::ShapeMismatch(
            "models and sizes must be nonempty and equal in count".into(),
        ));
    }
    if models.len() != config.num_nodes {
        return Err(Error::ShapeMismatch(format!(
            "{} models for {} nodes",
            models.len(),
            config.num_nodes
        )));
    }
    let len = models[0].len();
    if models.iter().any(|m| m.len() != len) {
        return Err(Error::ShapeMismatch("models must share one length".into()));
    }

    match policy {
        FlPolicy::Simple => {
            let ch = draw_channel(config, rng);
            let (r, _) = transmit_or_noise(models, &ch, config, rng)?;
            let m = models.len() as f64;
            Ok(r.iter().map(|x| x / m).collect())
        }
        FlPolicy::Pure | FlPolicy::Adaptive => {
            let id = TruncationParams::identity();
            let g = match policy {
                FlPolicy::Adaptive => theta.ok_or_else(|| {
                    Error::InvalidConfig("adaptive aggregation requires truncation bounds".into())
                })?,
                _ => &id,
            };
            let weights: Vec<f64> = sizes
                .iter()
                .map(|&n| truncate_weight(n as f64, g))
                .collect();
            let weighted: Vec<Vec<f64>> = models
                .iter()
                .zip(&weights)
                .map(|(v, &w)| v.iter().map(|x| w * x).collect())
                .collect();
            let scalars: Vec<Vec<f64>> = weights.iter().map(|&w| vec![w]).collect();

            let ch0 = draw_channel(config, rng);
            let (r0, _) = transmit_or_noise(&weighted, &ch0, config, rng)?;
            let ch1 = draw_channel(config, rng);
            let (r1, _) = transmit_or_noise(&scalars, &ch1, config, rng)?;
            let denom = r1[0];
            Ok(r0.iter().map(|x| x / denom).collect())
        }
    }
}

const FL_TAG_SELECT: u64 = 1;
const FL_TAG_AGGREGATE: u64 = 2;
const FL_TAG_WARMUP: u64 = 3;

/// Per-round test accuracy, starting with the initial model (so the series
/// has `rounds + 1` entries).
///
/// All per-round randomness (client selection, local SGD, channel and noise
/// draws) derives from seeds mixed out of one base value drawn up front, so
/// runs with different aggregation policies but the same random source share
/// partitions, initial model, selections and local training, and differ only
/// in the aggregation itself.
pub fn run_fl<R: Rng + ?Sized>(
    config: &FlConfig,
    data: &FlData,
    rng: &mut R,
) -> Result<Vec<f64>> {
    config.validate()?;
    let shape = MlpShape {
        n_in: data.train.n_features,
        n_hidden: config.hidden_units,
        n_classes: data.train.n_classes,
    };

    let sizes = partition_clients(data.train.len(), config.k_clients, rng);
    let client_indices = assign_client_data(&sizes, data.train.len(), rng);
    let model0 = init_model(&shape, rng);
    let base_seed = rng.next_u64();

    let theta = match config.policy {
        FlPolicy::Adaptive => Some(
            optimize_fl_theta(
                config,
                data,
                &shape,
                &model0,
                &sizes,
                &client_indices,
                mix_seed(&[base_seed, FL_TAG_WARMUP]),
            )?
            .theta_opt,
        ),
        _ => None,
    };

    let mut model = model0;
    let mut accuracy = vec![evaluate_accuracy(&model, &shape, &data.test)];
    for round in 0..config.rounds {
        let round_seed = mix_seed(&[base_seed, round as u64]);
        let mut select_rng =
            ChaCha8Rng::seed_from_u64(mix_seed(&[round_seed, FL_TAG_SELECT]));
        let selected =
            sample_without_replacement(config.k_clients, config.m_selected, &mut select_rng);
        let locals = train_selected(
            config,
            data,
            &shape,
            &model,
            &client_indices,
            &selected,
            round_seed,
        )?;
        let sel_sizes: Vec<usize> = selected.iter().map(|&c| sizes[c]).collect();
        let mut agg_rng =
            ChaCha8Rng::seed_from_u64(mix_seed(&[round_seed, FL_TAG_AGGREGATE]));
        model = aggregate_aircomp(
            &locals,
            &sel_sizes,
            config.policy,
            theta.as_ref(),
            &config.system,
            &mut agg_rng,
        )?;
        accuracy.push(evaluate_accuracy(&model, &shape, &data.test));
    }
    Ok(accuracy)
}

fn sample_without_replacement<R: Rng + ?Sized>(k: usize, m: usize, rng: &mut R) -> Vec<usize> {
    rand::seq::index::sample(rng, k, m).into_vec()
}

fn train_selected(
    config: &FlConfig,
    data: &FlData,
    shape: &MlpShape,
    model: &[f64],
    client_indices: &[Vec<usize>],
    selected: &[usize],
    round_seed: u64,
) -> Result<Vec<Vec<f64>>> {
    selected
        .par_iter()
        .enumerate()
        .map(|(rank, &client)| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[round_seed, rank as u64]));
            local_train(
                model,
                shape,
                &data.train,
                &client_indices[client],
                config.learning_rate,
                config.local_epochs,
                config.batch_size,
                &mut rng,
            )
        })
        .collect()
}

/// Monte-Carlo MSE of the adaptive aggregation with the FL message structure:
/// one scalar weight per node drawn from the size pool (constant across the
/// model), per-node value vectors bootstrapped coordinate-aligned from the
/// warm-up local models (so the across-client agreement of model entries is
/// preserved), slot 0 carrying `g(w) * s` and slot 1 the scalar `g(w)`.
pub fn estimate_fl_mse<R: Rng + ?Sized>(
    theta: &TruncationParams,
    local_models: &[Vec<f64>],
    size_pool: &[f64],
    config: &SystemConfig,
    n_mc: usize,
    rng: &mut R,
) -> Result<f64> {
    if local_models.is_empty() || size_pool.is_empty() {
        return Err(Error::InvalidConfig("sample pools must be nonempty".into()));
    }
    if n_mc == 0 {
        return Err(Error::InvalidConfig("n_mc must be >= 1".into()));
    }
    let m = config.num_nodes;
    if local_models.len() != m {
        return Err(Error::ShapeMismatch(format!(
            "{} warm-up models for {} nodes",
            local_models.len(),
            m
        )));
    }
    let model_len = local_models[0].len();
    if model_len == 0 || local_models.iter().any(|v| v.len() != model_len) {
        return Err(Error::ShapeMismatch(
            "warm-up models must share one nonzero length".into(),
        ));
    }
    let mut round_errors = Vec::with_capacity(n_mc);
    for _ in 0..n_mc {
        let weights: Vec<f64> = (0..m)
            .map(|_| size_pool[rng.random_range(0..size_pool.len())])
            .collect();
        let coords: Vec<usize> = (0..model_len)
            .map(|_| rng.random_range(0..model_len))
            .collect();
        let values: Vec<Vec<f64>> = local_models
            .iter()
            .map(|v| coords.iter().map(|&c| v[c]).collect())
            .collect();

        let weight_sum: f64 = weights.iter().sum();
        let g: Vec<f64> = weights.iter().map(|&w| truncate_weight(w, theta)).collect();
        let weighted: Vec<Vec<f64>> = values
            .iter()
            .zip(&g)
            .map(|(v, &w)| v.iter().map(|x| w * x).collect())
            .collect();
        let scalars: Vec<Vec<f64>> = g.iter().map(|&w| vec![w]).collect();

        let ch0 = draw_channel(config, rng);
        let (r0, _) = transmit_or_noise(&weighted, &ch0, config, rng)?;
        let ch1 = draw_channel(config, rng);
        let (r1, _) = transmit_or_noise(&scalars, &ch1, config, rng)?;
        let denom = r1[0];

        let err: f64 = (0..model_len)
            .map(|l| {
                let target: f64 = values
                    .iter()
                    .zip(&weights)
                    .map(|(v, &w)| w * v[l])
                    .sum::<f64>()
                    / weight_sum;
                let est = r0[l] / denom;
                (target - est) * (target - est)
            })
            .sum::<f64>()
            / model_len as f64;
        round_errors.push(err);
    }
    Ok(crate::bayesopt::median_of_means(&round_errors))
}

/// Warm-up round that feeds the truncation optimizer: the weight pool is the
/// realized client sizes and the value pool samples entries of locally
/// trained models. The objective replays the FL aggregation structure itself.
fn optimize_fl_theta(
    config: &FlConfig,
    data: &FlData,
    shape: &MlpShape,
    model: &[f64],
    sizes: &[usize],
    client_indices: &[Vec<usize>],
    seed: u64,
) -> Result<BoOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let selected = sample_without_replacement(config.k_clients, config.m_selected, &mut rng);
    let round_seed = rng.next_u64();
    let locals = train_selected(
        config,
        data,
        shape,
        model,
        client_indices,
        &selected,
        round_seed,
    )?;

    let size_pool: Vec<f64> = sizes.iter().map(|&n| n as f64).collect();
    let bounds = match config.bo.theta_bounds {
        Some(b) => b,
        None => {
            let hi = size_pool.iter().cloned().fold(0.0f64, f64::max);
            (0.0, hi)
        }
    };
    let n_mc = config.bo.n_mc;
    let system = &config.system;
    let objective = move |theta: &TruncationParams, mc_rng: &mut ChaCha8Rng| {
        estimate_fl_mse(theta, &locals, &size_pool, system, n_mc, mc_rng)
    };
    optimize_with_objective(&config.bo, bounds, &objective, &mut rng)
}

/// Gaussian class blobs on the corners of a square, four classes in 2-D.
pub fn synthetic_blobs<R: Rng + ?Sized>(
    n_train: usize,
    n_test: usize,
    spread: f64,
    rng: &mut R,
) -> (ClassDataset, ClassDataset) {
    let centers = [(3.0, 3.0), (-3.0, 3.0), (-3.0, -3.0), (3.0, -3.0)];
    let noise = Normal::new(0.0, spread).unwrap();
    let draw = |n: usize, rng: &mut R| {
        let mut inputs = Vec::with_capacity(n * 2);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let c = rng.random_range(0..centers.len());
            inputs.push(centers[c].0 + noise.sample(rng));
            inputs.push(centers[c].1 + noise.sample(rng));
            labels.push(c);
        }
        ClassDataset {
            inputs,
            labels,
            n_features: 2,
            n_classes: 4,
        }
    };
    let train = draw(n_train, rng);
    let test = draw(n_test, rng);
    (train, test)
}

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn read_u32_be(bytes: &[u8], off: usize, what: &str) -> Result<u32> {
    bytes
        .get(off..off + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::BadIdx(format!("truncated {what}")))
}

/// IDX image/label pair (the MNIST container format): big-endian magic and
/// dimensions, pixels scaled to `[0, 1]`, ten classes.
pub fn load_idx_dataset(images_path: &Path, labels_path: &Path) -> Result<ClassDataset> {
    let images = std::fs::read(images_path).map_err(|e| Error::io(images_path, e))?;
    let labels = std::fs::read(labels_path).map_err(|e| Error::io(labels_path, e))?;

    if read_u32_be(&images, 0, "image header")? != IDX_IMAGES_MAGIC {
        return Err(Error::BadIdx("image magic is not 0x00000803".into()));
    }
    let n = read_u32_be(&images, 4, "image count")? as usize;
    let rows = read_u32_be(&images, 8, "image rows")? as usize;
    let cols = read_u32_be(&images, 12, "image cols")? as usize;
    let pixels = n * rows * cols;
    if images.len() != 16 + pixels {
        return Err(Error::BadIdx(format!(
            "image payload has {} bytes, header implies {}",
            images.len() - 16.min(images.len()),
            pixels
        )));
    }

    if read_u32_be(&labels, 0, "label header")? != IDX_LABELS_MAGIC {
        return Err(Error::BadIdx("label magic is not 0x00000801".into()));
    }
    let n_labels = read_u32_be(&labels, 4, "label count")? as usize;
    if labels.len() != 8 + n_labels {
        return Err(Error::BadIdx("label payload truncated".into()));
    }
    if n != n_labels {
        return Err(Error::BadIdx(format!(
            "{n} images but {n_labels} labels"
        )));
    }

    let inputs = images[16..].iter().map(|&b| b as f64 / 255.0).collect();
    let labels = labels[8..]
        .iter()
        .map(|&b| {
            let l = b as usize;
            if l > 9 {
                Err(Error::BadIdx(format!("label {l} out of range")))
            } else {
                Ok(l)
            }
        })
        .collect::<Result<Vec<usize>>>()?;

    Ok(ClassDataset {
        inputs,
        labels,
        n_features: rows * cols,
        n_classes: 10,
    })
}

/// Dataset selection in the FL config file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "lowercase", tag = "kind")]
pub enum DatasetSpec {
    Synthetic {
        #[serde(default = "default_n_train")]
        n_train: usize,
        #[serde(default = "default_n_test")]
        n_test: usize,
        #[serde(default = "default_spread")]
        spread: f64,
    },
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
    },
}

fn default_n_train() -> usize {
    2000
}
fn default_n_test() -> usize {
    500
}
fn default_spread() -> f64 {
    2.0
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec::Synthetic {
            n_train: default_n_train(),
            n_test: default_n_test(),
            spread: default_spread(),
        }
    }
}

impl DatasetSpec {
    /// Materializes the dataset; synthetic data is drawn from `data_seed`.
    pub fn load(&self, data_seed: u64) -> Result<FlData> {
        match self {
            DatasetSpec::Synthetic {
                n_train,
                n_test,
                spread,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(data_seed);
                let (train, test) = synthetic_blobs(*n_train, *n_test, *spread, &mut rng);
                Ok(FlData { train, test })
            }
            DatasetSpec::Idx {
                train_images,
                train_labels,
                test_images,
                test_labels,
            } => Ok(FlData {
                train: load_idx_dataset(train_images, train_labels)?,
                test: load_idx_dataset(test_images, test_labels)?,
            }),
        }
    }
}

fn default_lr() -> f64 {
    0.01
}
fn default_batch() -> usize {
    32
}
fn default_epochs() -> usize {
    1
}
fn default_hidden() -> usize {
    10
}

/// FL experiment file: seeds, training knobs, dataset, system, policy.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlSpec {
    pub seeds: Vec<u64>,
    pub rounds: usize,
    pub k_clients: usize,
    pub m_selected: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_epochs")]
    pub local_epochs: usize,
    #[serde(default = "default_hidden")]
    pub hidden_units: usize,
    pub policy: FlPolicy,
    #[serde(default)]
    pub data_seed: u64,
    #[serde(default)]
    pub dataset: DatasetSpec,
    pub system: SystemSpec,
    #[serde(default)]
    pub bo: BoConfig,
}

impl FlSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: FlSpec = toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("seeds must be nonempty".into()));
        }
        if self.rounds == 0 {
            return Err(Error::InvalidConfig("rounds must be >= 1".into()));
        }
        self.to_config()?.validate()
    }

    pub fn to_config(&self) -> Result<FlConfig> {
        Ok(FlConfig {
            k_clients: self.k_clients,
            m_selected: self.m_selected,
            rounds: self.rounds,
            local_epochs: self.local_epochs,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            hidden_units: self.hidden_units,
            system: self.system.to_config()?,
            policy: self.policy,
            bo: self.bo.clone(),
        })
    }
}
