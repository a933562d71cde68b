//! Fully connected feed-forward network trained with Adam, L2 regularization
//! and squared-log-error loss. The output head applies softplus so predicted
//! frame rates are strictly positive.
//!
//! Training is seeded and single-threaded; a (weight seed, shuffle seed,
//! data order) triple pins the result bit-for-bit.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub activation: Activation,
    pub output_dim: usize,
}

impl NetworkSpec {
    /// The shape used throughout: 7 hidden layers of 260 units.
    pub fn standard(input_dim: usize) -> Self {
        NetworkSpec {
            input_dim,
            hidden_layers: 7,
            hidden_width: 260,
            activation: Activation::Relu,
            output_dim: 1,
        }
    }

    /// A small shape for fast experiment turnaround.
    pub fn compact(input_dim: usize, hidden_layers: usize, hidden_width: usize) -> Self {
        NetworkSpec {
            input_dim,
            hidden_layers,
            hidden_width,
            activation: Activation::Relu,
            output_dim: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim < 1
            || self.hidden_layers < 1
            || self.hidden_width < 1
            || self.output_dim != 1
        {
            return Err(Error::Config(format!("invalid network spec {self:?}")));
        }
        Ok(())
    }
}

/// One dense layer; weights are row-major `[out][in]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Layer { in_dim, out_dim, weights: vec![0.0; in_dim * out_dim], biases: vec![0.0; out_dim] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub spec: NetworkSpec,
    pub layers: Vec<Layer>,
    pub rng_seed: u64,
}

/// Supervised examples: flattened inputs and positive targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        let ds = Dataset { inputs, targets };
        ds.validate()?;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.inputs.len() != self.targets.len() {
            return Err(Error::Domain(format!(
                "dataset has {} inputs but {} targets",
                self.inputs.len(),
                self.targets.len()
            )));
        }
        for &y in &self.targets {
            if !(y > 0.0) || !y.is_finite() {
                return Err(Error::Domain(format!("targets must be positive finite, got {y}")));
            }
        }
        Ok(())
    }

    /// Rows selected by index, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            inputs: indices.iter().map(|&i| self.inputs[i].clone()).collect(),
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
        }
    }

    pub fn extend(&mut self, other: &Dataset) {
        self.inputs.extend(other.inputs.iter().cloned());
        self.targets.extend(other.targets.iter().cloned());
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub l2_lambda: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            learning_rate: 1e-3,
            l2_lambda: 1e-4,
            batch_size: 64,
            epochs: 100,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("adam betas must lie in [0, 1)".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        Ok(())
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Squared difference of shifted logs; penalizes underestimates more
/// than overestimates of the same magnitude.
pub fn msle(pred: f64, target: f64) -> Result<f64> {
    if !(pred > 0.0) || !pred.is_finite() {
        return Err(Error::Domain(format!("msle requires positive prediction, got {pred}")));
    }
    if !(target > 0.0) || !target.is_finite() {
        return Err(Error::Domain(format!("msle requires positive target, got {target}")));
    }
    let d = (1.0 + pred).ln() - (1.0 + target).ln();
    Ok(d * d)
}

impl Network {
    /// He-uniform initialization, biases zero.
    pub fn init(spec: NetworkSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = rng::seeded(rng::child_seed(seed, "net-init"));
        let mut layers = Vec::with_capacity(spec.hidden_layers + 1);
        let mut in_dim = spec.input_dim;
        for l in 0..=spec.hidden_layers {
            let out_dim = if l == spec.hidden_layers { spec.output_dim } else { spec.hidden_width };
            let mut layer = Layer::zeros(in_dim, out_dim);
            let limit = (6.0 / in_dim as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.gen_range(-limit..limit);
            }
            layers.push(layer);
            in_dim = out_dim;
        }
        Ok(Network { spec, layers, rng_seed: seed })
    }

    /// All-zero weights and biases; forward output is softplus(0) = ln 2.
    pub fn zeros(spec: NetworkSpec) -> Result<Self> {
        spec.validate()?;
        let mut layers = Vec::new();
        let mut in_dim = spec.input_dim;
        for l in 0..=spec.hidden_layers {
            let out_dim = if l == spec.hidden_layers { spec.output_dim } else { spec.hidden_width };
            layers.push(Layer::zeros(in_dim, out_dim));
            in_dim = out_dim;
        }
        Ok(Network { spec, layers, rng_seed: 0 })
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// Scalar prediction, strictly positive via the softplus head.
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.spec.input_dim {
            return Err(Error::Domain(format!(
                "input has {} dims, network expects {}",
                x.len(),
                self.spec.input_dim
            )));
        }
        let mut a = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (li, layer) in self.layers.iter().enumerate() {
            next.clear();
            next.resize(layer.out_dim, 0.0);
            for o in 0..layer.out_dim {
                let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                let mut z = layer.biases[o];
                for (w, v) in row.iter().zip(&a) {
                    z += w * v;
                }
                next[o] = if li == last {
                    z
                } else {
                    match self.spec.activation {
                        Activation::Relu => z.max(0.0),
                        Activation::Tanh => z.tanh(),
                    }
                };
            }
            std::mem::swap(&mut a, &mut next);
        }
        Ok(softplus(a[0]))
    }

    /// Exact weight copy for transfer learning. The base stays untouched by
    /// anything done to the returned network.
    pub fn init_from_base(base: &Network, spec: &NetworkSpec) -> Result<Network> {
        if *spec != base.spec {
            return Err(Error::Transfer(format!(
                "spec mismatch: base {:?} vs requested {:?}",
                base.spec, spec
            )));
        }
        Ok(base.clone())
    }
}

/// Layer-shaped gradient buffer.
struct GradBuffer {
    layers: Vec<Layer>,
}

impl GradBuffer {
    fn zeros_like(net: &Network) -> Self {
        GradBuffer {
            layers: net
                .layers
                .iter()
                .map(|l| Layer::zeros(l.in_dim, l.out_dim))
                .collect(),
        }
    }

    fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            for w in &mut l.weights {
                *w *= factor;
            }
            for b in &mut l.biases {
                *b *= factor;
            }
        }
    }

    /// Adds the L2 term gradient 2*lambda*theta for every parameter.
    fn add_l2(&mut self, net: &Network, l2_lambda: f64) {
        if l2_lambda == 0.0 {
            return;
        }
        for (g, l) in self.layers.iter_mut().zip(&net.layers) {
            for (gw, w) in g.weights.iter_mut().zip(&l.weights) {
                *gw += 2.0 * l2_lambda * w;
            }
            for (gb, b) in g.biases.iter_mut().zip(&l.biases) {
                *gb += 2.0 * l2_lambda * b;
            }
        }
    }
}

/// Forward pass keeping every activation, then backprop of the MSLE term.
/// Accumulates dLoss/dparam for one sample into `grads`; returns the loss.
fn backprop_sample(net: &Network, x: &[f64], y: f64, grads: &mut GradBuffer) -> Result<f64> {
    let n_layers = net.layers.len();
    let last = n_layers - 1;

    let mut activations: Vec<Vec<f64>> = Vec::with_capacity(n_layers + 1);
    let mut pre_acts: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
    activations.push(x.to_vec());
    for (li, layer) in net.layers.iter().enumerate() {
        let prev = &activations[li];
        let mut z = vec![0.0; layer.out_dim];
        for o in 0..layer.out_dim {
            let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
            let mut acc = layer.biases[o];
            for (w, v) in row.iter().zip(prev) {
                acc += w * v;
            }
            z[o] = acc;
        }
        let a = if li == last {
            z.clone()
        } else {
            z.iter()
                .map(|&v| match net.spec.activation {
                    Activation::Relu => v.max(0.0),
                    Activation::Tanh => v.tanh(),
                })
                .collect()
        };
        pre_acts.push(z);
        activations.push(a);
    }

    let z_out = pre_acts[last][0];
    let pred = softplus(z_out);
    let loss = msle(pred, y)?;

    // dL/dz_out = 2 (ln(1+pred) - ln(1+y)) / (1+pred) * sigmoid(z_out)
    let dl_dpred = 2.0 * ((1.0 + pred).ln() - (1.0 + y).ln()) / (1.0 + pred);
    let mut delta = vec![dl_dpred * sigmoid(z_out)];

    for li in (0..n_layers).rev() {
        let layer = &net.layers[li];
        let grad = &mut grads.layers[li];
        let prev_act = &activations[li];
        for o in 0..layer.out_dim {
            let d = delta[o];
            grad.biases[o] += d;
            let row = &mut grad.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
            for (gw, v) in row.iter_mut().zip(prev_act) {
                *gw += d * v;
            }
        }
        if li > 0 {
            let mut prev_delta = vec![0.0; layer.in_dim];
            for o in 0..layer.out_dim {
                let d = delta[o];
                let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (pd, w) in prev_delta.iter_mut().zip(row) {
                    *pd += d * w;
                }
            }
            // derivative through the previous layer's activation
            let z_prev = &pre_acts[li - 1];
            for (pd, &z) in prev_delta.iter_mut().zip(z_prev) {
                *pd *= match net.spec.activation {
                    Activation::Relu => {
                        if z > 0.0 {
                            1.0
                        } else {
                            0.0
                        }
                    }
                    Activation::Tanh => 1.0 - z.tanh() * z.tanh(),
                };
            }
            delta = prev_delta;
        }
    }
    Ok(loss)
}

/// Value of the training objective: mean MSLE over the data plus
/// l2_lambda times the squared parameter norm.
pub fn objective(net: &Network, data: &Dataset, l2_lambda: f64) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Domain("objective needs a non-empty dataset".into()));
    }
    let mut total = 0.0;
    for (x, &y) in data.inputs.iter().zip(&data.targets) {
        total += msle(net.forward(x)?, y)?;
    }
    Ok(total / data.len() as f64 + l2_lambda * squared_param_norm(net))
}

pub fn squared_param_norm(net: &Network) -> f64 {
    net.layers
        .iter()
        .map(|l| {
            l.weights.iter().map(|w| w * w).sum::<f64>()
                + l.biases.iter().map(|b| b * b).sum::<f64>()
        })
        .sum()
}

/// Analytic gradient of [`objective`], flattened in layer order
/// (weights then biases per layer).
pub fn objective_gradient(net: &Network, data: &Dataset, l2_lambda: f64) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(Error::Domain("gradient needs a non-empty dataset".into()));
    }
    let mut grads = GradBuffer::zeros_like(net);
    for (x, &y) in data.inputs.iter().zip(&data.targets) {
        backprop_sample(net, x, y, &mut grads)?;
    }
    grads.scale(1.0 / data.len() as f64);
    grads.add_l2(net, l2_lambda);
    let mut flat = Vec::with_capacity(net.param_count());
    for l in &grads.layers {
        flat.extend_from_slice(&l.weights);
        flat.extend_from_slice(&l.biases);
    }
    Ok(flat)
}

/// Flattened parameter vector in the same order as [`objective_gradient`].
pub fn params_flat(net: &Network) -> Vec<f64> {
    let mut flat = Vec::with_capacity(net.param_count());
    for l in &net.layers {
        flat.extend_from_slice(&l.weights);
        flat.extend_from_slice(&l.biases);
    }
    flat
}

pub fn set_params_flat(net: &mut Network, flat: &[f64]) -> Result<()> {
    if flat.len() != net.param_count() {
        return Err(Error::Domain(format!(
            "expected {} params, got {}",
            net.param_count(),
            flat.len()
        )));
    }
    let mut offset = 0;
    for l in &mut net.layers {
        let nw = l.weights.len();
        l.weights.copy_from_slice(&flat[offset..offset + nw]);
        offset += nw;
        let nb = l.biases.len();
        l.biases.copy_from_slice(&flat[offset..offset + nb]);
        offset += nb;
    }
    Ok(())
}

struct AdamState {
    m: Vec<Layer>,
    v: Vec<Layer>,
    t: u64,
}

/// Trains a copy of the network; the input network is untouched.
pub fn train(net: &Network, data: &Dataset, cfg: &TrainingConfig) -> Result<Network> {
    Ok(train_with_history(net, data, cfg)?.0)
}

/// As [`train`], also returning the mean per-epoch MSLE (measured on the
/// batches as seen during the epoch, before each update).
pub fn train_with_history(
    net: &Network,
    data: &Dataset,
    cfg: &TrainingConfig,
) -> Result<(Network, Vec<f64>)> {
    cfg.validate()?;
    data.validate()?;
    if data.is_empty() {
        return Err(Error::Domain("cannot train on an empty dataset".into()));
    }
    for x in &data.inputs {
        if x.len() != net.spec.input_dim {
            return Err(Error::Domain(format!(
                "dataset input has {} dims, network expects {}",
                x.len(),
                net.spec.input_dim
            )));
        }
    }

    let mut model = net.clone();
    let n = data.len();
    let mut adam = AdamState {
        m: model.layers.iter().map(|l| Layer::zeros(l.in_dim, l.out_dim)).collect(),
        v: model.layers.iter().map(|l| Layer::zeros(l.in_dim, l.out_dim)).collect(),
        t: 0,
    };
    let mut shuffle_rng = rng::seeded(rng::child_seed(cfg.seed, "train-shuffle"));
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        // Fisher-Yates on the sample order, reseeded stream per epoch.
        for i in (1..n).rev() {
            let j = shuffle_rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = GradBuffer::zeros_like(&model);
            let mut batch_loss = 0.0;
            for &idx in batch {
                batch_loss += backprop_sample(&model, &data.inputs[idx], data.targets[idx], &mut grads)
                    .map_err(|e| Error::TrainingDiverged { epoch, detail: e.to_string() })?;
            }
            epoch_loss += batch_loss;
            grads.scale(1.0 / batch.len() as f64);
            grads.add_l2(&model, cfg.l2_lambda);
            adam_step(&mut model, &mut adam, &grads, cfg);
        }
        if model
            .layers
            .iter()
            .any(|l| l.weights.iter().chain(&l.biases).any(|p| !p.is_finite()))
        {
            return Err(Error::TrainingDiverged {
                epoch,
                detail: "non-finite parameter after update".into(),
            });
        }
        history.push(epoch_loss / n as f64);
    }
    Ok((model, history))
}

fn adam_step(model: &mut Network, adam: &mut AdamState, grads: &GradBuffer, cfg: &TrainingConfig) {
    adam.t += 1;
    let t = adam.t as f64;
    let bc1 = 1.0 - cfg.beta1.powf(t);
    let bc2 = 1.0 - cfg.beta2.powf(t);
    for (li, layer) in model.layers.iter_mut().enumerate() {
        let g = &grads.layers[li];
        let m = &mut adam.m[li];
        let v = &mut adam.v[li];
        for i in 0..layer.weights.len() {
            let grad = g.weights[i];
            m.weights[i] = cfg.beta1 * m.weights[i] + (1.0 - cfg.beta1) * grad;
            v.weights[i] = cfg.beta2 * v.weights[i] + (1.0 - cfg.beta2) * grad * grad;
            let m_hat = m.weights[i] / bc1;
            let v_hat = v.weights[i] / bc2;
            layer.weights[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
        for i in 0..layer.biases.len() {
            let grad = g.biases[i];
            m.biases[i] = cfg.beta1 * m.biases[i] + (1.0 - cfg.beta1) * grad;
            v.biases[i] = cfg.beta2 * v.biases[i] + (1.0 - cfg.beta2) * grad * grad;
            let m_hat = m.biases[i] / bc1;
            let v_hat = v.biases[i] / bc2;
            layer.biases[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
}
