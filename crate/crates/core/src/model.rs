//! Feed-forward classifier with an explicit body/head split.
//!
//! The body is a stack of dense rectifier layers whose last output is the
//! feature representation. The head is one dense rectifier layer followed by
//! a dense softmax layer. Training minimises categorical cross-entropy with
//! RMSprop; [`TrainScope::HeadOnly`] treats body features as constants and
//! never touches body parameters.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::SeededRng;

/// Probabilities below this are clamped before taking the log.
pub const LOG_CLAMP: f64 = 1e-15;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetConfig {
    pub input_dim: usize,
    /// Widths of the body layers; the last entry is the feature dimension.
    pub body_dims: Vec<usize>,
    pub head_hidden: usize,
    pub num_classes: usize,
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.body_dims.is_empty() {
            return Err(Error::Config("network body needs at least one layer".into()));
        }
        if self.input_dim == 0 || self.head_hidden == 0 || self.num_classes == 0 || self.body_dims.contains(&0) {
            return Err(Error::Config(format!("all network widths must be positive: {self:?}")));
        }
        Ok(())
    }

    pub fn feature_dim(&self) -> usize {
        *self.body_dims.last().unwrap_or(&0)
    }

    fn layer_shapes(&self) -> (Vec<(usize, usize)>, Vec<(usize, usize)>) {
        let mut body = Vec::with_capacity(self.body_dims.len());
        let mut prev = self.input_dim;
        for &w in &self.body_dims {
            body.push((prev, w));
            prev = w;
        }
        let head = vec![(prev, self.head_hidden), (self.head_hidden, self.num_classes)];
        (body, head)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainScope {
    #[default]
    AllParams,
    HeadOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub rho: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub scope: TrainScope,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 32,
            learning_rate: 1e-4,
            rho: 0.9,
            epsilon: 1e-7,
            seed: 0,
            scope: TrainScope::AllParams,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::Config(format!("rho must lie in (0, 1), got {}", self.rho)));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::Config(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        Ok(())
    }
}

/// Weights (`inputs x outputs`, row-major) and biases of one dense layer.
/// Also used for gradients and optimizer accumulators of the same shape.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LayerParams {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn zeros_like(&self) -> Self {
        Self::zeros(self.inputs, self.outputs)
    }

    pub fn num_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    /// `x . W + b`
    fn affine(&self, x: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(x.rows(), self.outputs);
        for r in 0..x.rows() {
            let o = out.row_mut(r);
            o.copy_from_slice(&self.bias);
            for (i, &xi) in x.row(r).iter().enumerate() {
                if xi == 0.0 {
                    continue;
                }
                let w = &self.weights[i * self.outputs..(i + 1) * self.outputs];
                for (oj, &wj) in o.iter_mut().zip(w) {
                    *oj += xi * wj;
                }
            }
        }
        out
    }

    fn all_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|v| v.is_finite())
    }
}

fn relu_in_place(m: &mut Matrix) {
    for v in m.as_mut_slice() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

fn softmax_in_place(m: &mut Matrix) {
    for r in 0..m.rows() {
        let row = m.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Activations kept by a forward pass through a chain of layers.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// Input to every layer of the chain.
    inputs: Vec<Matrix>,
    /// Pre-activation of every layer of the chain.
    pre: Vec<Matrix>,
}

/// Rectifier on every layer but the last, softmax on the last.
fn chain_forward(layers: &[&LayerParams], x: &Matrix) -> (Matrix, ForwardCache) {
    let mut inputs = Vec::with_capacity(layers.len());
    let mut pre = Vec::with_capacity(layers.len());
    let mut a = x.clone();
    for (l, layer) in layers.iter().enumerate() {
        let z = layer.affine(&a);
        let mut next = z.clone();
        if l + 1 == layers.len() {
            softmax_in_place(&mut next);
        } else {
            relu_in_place(&mut next);
        }
        inputs.push(std::mem::replace(&mut a, next));
        pre.push(z);
    }
    (a, ForwardCache { inputs, pre })
}

fn cross_entropy(probs: &Matrix, y: &[usize]) -> f64 {
    let total: f64 = y
        .iter()
        .enumerate()
        .map(|(r, &c)| -probs.get(r, c).max(LOG_CLAMP).ln())
        .sum();
    total / y.len() as f64
}

/// Mean cross-entropy and reverse-mode gradients for every layer of the chain.
fn chain_loss_and_grads(layers: &[&LayerParams], x: &Matrix, y: &[usize]) -> (f64, Vec<LayerParams>) {
    let (probs, cache) = chain_forward(layers, x);
    let loss = cross_entropy(&probs, y);
    let batch = y.len() as f64;

    // d loss / d logits = (p - onehot) / batch
    let mut dz = probs;
    for (r, &c) in y.iter().enumerate() {
        let row = dz.row_mut(r);
        row[c] -= 1.0;
        for v in row.iter_mut() {
            *v /= batch;
        }
    }

    let mut grads: Vec<LayerParams> = layers.iter().map(|l| l.zeros_like()).collect();
    for l in (0..layers.len()).rev() {
        let layer = layers[l];
        let input = &cache.inputs[l];
        let g = &mut grads[l];
        for r in 0..dz.rows() {
            let d = dz.row(r);
            for (b, &dv) in g.bias.iter_mut().zip(d) {
                *b += dv;
            }
            for (i, &xi) in input.row(r).iter().enumerate() {
                if xi == 0.0 {
                    continue;
                }
                let gw = &mut g.weights[i * layer.outputs..(i + 1) * layer.outputs];
                for (w, &dv) in gw.iter_mut().zip(d) {
                    *w += xi * dv;
                }
            }
        }
        if l == 0 {
            break;
        }
        let prev_pre = &cache.pre[l - 1];
        let mut da = Matrix::zeros(dz.rows(), layer.inputs);
        for r in 0..dz.rows() {
            let d = dz.row(r);
            let out = da.row_mut(r);
            for (i, o) in out.iter_mut().enumerate() {
                if prev_pre.get(r, i) <= 0.0 {
                    continue;
                }
                let w = &layer.weights[i * layer.outputs..(i + 1) * layer.outputs];
                *o = w.iter().zip(d).map(|(wv, dv)| wv * dv).sum();
            }
        }
        dz = da;
    }
    (loss, grads)
}

/// Gradients shaped like a [`Network`]; `body` is empty for head-only scope.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub body: Vec<LayerParams>,
    pub head: Vec<LayerParams>,
}

/// RMSprop squared-gradient accumulators, zero at creation.
#[derive(Clone, Debug, PartialEq)]
pub struct RmsPropState {
    pub body: Vec<LayerParams>,
    pub head: Vec<LayerParams>,
}

impl RmsPropState {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            body: net.body.iter().map(LayerParams::zeros_like).collect(),
            head: net.head.iter().map(LayerParams::zeros_like).collect(),
        }
    }
}

/// One RMSprop update:
/// `s <- rho * s + (1 - rho) * g^2`, `theta <- theta - lr * g / (sqrt(s) + eps)`.
///
/// Nothing is modified when any gradient entry is non-finite.
pub fn rmsprop_step(
    params: &mut [f64],
    grads: &[f64],
    accum: &mut [f64],
    learning_rate: f64,
    rho: f64,
    epsilon: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != accum.len() {
        return Err(Error::Shape(format!(
            "rmsprop: {} params, {} grads, {} accumulators",
            params.len(),
            grads.len(),
            accum.len()
        )));
    }
    if let Some((index, &value)) = grads.iter().enumerate().find(|(_, g)| !g.is_finite()) {
        return Err(Error::NonFiniteGradient {
            location: "parameter block".into(),
            index,
            value,
        });
    }
    for ((p, &g), s) in params.iter_mut().zip(grads).zip(accum.iter_mut()) {
        *s = rho * *s + (1.0 - rho) * g * g;
        *p -= learning_rate * g / (s.sqrt() + epsilon);
    }
    Ok(())
}

/// Loss history of a training run, measured on the full training set.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub initial_loss: f64,
    pub epoch_losses: Vec<f64>,
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    config: NetConfig,
    body: Vec<LayerParams>,
    head: Vec<LayerParams>,
}

impl Network {
    /// He-normal weights (variance `2 / fan_in`) and zero biases.
    pub fn init(config: &NetConfig, rng: &mut SeededRng) -> Result<Network> {
        let mut net = Network::zeros(config)?;
        for layer in net.body.iter_mut().chain(net.head.iter_mut()) {
            let std = (2.0 / layer.inputs as f64).sqrt();
            for w in &mut layer.weights {
                let z: f64 = rng.sample(StandardNormal);
                *w = std * z;
            }
        }
        Ok(net)
    }

    /// All weights and biases zero.
    pub fn zeros(config: &NetConfig) -> Result<Network> {
        config.validate()?;
        let (body, head) = config.layer_shapes();
        Ok(Network {
            config: config.clone(),
            body: body.into_iter().map(|(i, o)| LayerParams::zeros(i, o)).collect(),
            head: head.into_iter().map(|(i, o)| LayerParams::zeros(i, o)).collect(),
        })
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn body(&self) -> &[LayerParams] {
        &self.body
    }

    pub fn head(&self) -> &[LayerParams] {
        &self.head
    }

    /// Body layers followed by head layers.
    pub fn layers_mut(&mut self) -> impl Iterator<Item = &mut LayerParams> {
        self.body.iter_mut().chain(self.head.iter_mut())
    }

    pub fn num_params(&self) -> usize {
        self.body.iter().chain(&self.head).map(LayerParams::num_params).sum()
    }

    fn chain(&self, scope: TrainScope) -> Vec<&LayerParams> {
        match scope {
            TrainScope::AllParams => self.body.iter().chain(&self.head).collect(),
            TrainScope::HeadOnly => self.head.iter().collect(),
        }
    }

    fn check_input(&self, x: &Matrix, width: usize) -> Result<()> {
        if x.cols() != width && x.rows() > 0 {
            return Err(Error::Shape(format!(
                "expected {width} input columns, got {}",
                x.cols()
            )));
        }
        if !x.all_finite() {
            return Err(Error::NonFinite("network input".into()));
        }
        Ok(())
    }

    /// Class probabilities for every row of `x`.
    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, ForwardCache)> {
        self.check_input(x, self.config.input_dim)?;
        Ok(chain_forward(&self.chain(TrainScope::AllParams), x))
    }

    /// Output of the last body layer (post-rectifier).
    pub fn extract_features(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x, self.config.input_dim)?;
        let mut a = x.clone();
        for layer in &self.body {
            a = layer.affine(&a);
            relu_in_place(&mut a);
        }
        Ok(a)
    }

    /// Class probabilities from body features.
    pub fn head_forward(&self, features: &Matrix) -> Result<Matrix> {
        self.check_input(features, self.config.feature_dim())?;
        Ok(chain_forward(&self.chain(TrainScope::HeadOnly), features).0)
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        let (probs, _) = self.forward(x)?;
        Ok(probs.iter_rows().map(argmax).collect())
    }

    /// Mean cross-entropy of `(x, y)`. For head-only scope `x` holds body features.
    pub fn loss(&self, x: &Matrix, y: &[usize], scope: TrainScope) -> Result<f64> {
        self.check_batch(x, y, scope)?;
        Ok(cross_entropy(&chain_forward(&self.chain(scope), x).0, y))
    }

    fn check_batch(&self, x: &Matrix, y: &[usize], scope: TrainScope) -> Result<()> {
        if y.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if x.rows() != y.len() {
            return Err(Error::LengthMismatch {
                expected: x.rows(),
                found: y.len(),
            });
        }
        if let Some(&label) = y.iter().find(|&&c| c >= self.config.num_classes) {
            return Err(Error::LabelOutOfRange {
                label,
                num_classes: self.config.num_classes,
            });
        }
        let width = match scope {
            TrainScope::AllParams => self.config.input_dim,
            TrainScope::HeadOnly => self.config.feature_dim(),
        };
        self.check_input(x, width)
    }

    /// Loss and gradients over `scope`. For head-only scope `x` holds body
    /// features and `Gradients::body` is empty.
    pub fn loss_and_grads(&self, x: &Matrix, y: &[usize], scope: TrainScope) -> Result<(f64, Gradients)> {
        self.check_batch(x, y, scope)?;
        let (loss, mut grads) = chain_loss_and_grads(&self.chain(scope), x, y);
        let head = grads.split_off(grads.len() - self.head.len());
        Ok((loss, Gradients { body: grads, head }))
    }

    /// Applies one RMSprop step for every block present in `grads`.
    pub fn apply_rmsprop(&mut self, grads: &Gradients, state: &mut RmsPropState, cfg: &TrainConfig) -> Result<()> {
        let blocks = [
            ("body", &mut self.body, &grads.body, &mut state.body),
            ("head", &mut self.head, &grads.head, &mut state.head),
        ];
        for (name, params, g, s) in blocks {
            if g.is_empty() {
                continue;
            }
            if g.len() != params.len() || s.len() != params.len() {
                return Err(Error::Shape(format!("{name} gradient has {} layers", g.len())));
            }
            for (l, ((p, g), s)) in params.iter_mut().zip(g).zip(s.iter_mut()).enumerate() {
                let step = |p: &mut [f64], g: &[f64], s: &mut [f64], what: &str| {
                    rmsprop_step(p, g, s, cfg.learning_rate, cfg.rho, cfg.epsilon).map_err(|e| match e {
                        Error::NonFiniteGradient { index, value, .. } => Error::NonFiniteGradient {
                            location: format!("{name} layer {l} {what}"),
                            index,
                            value,
                        },
                        other => other,
                    })
                };
                step(&mut p.weights, &g.weights, &mut s.weights, "weights")?;
                step(&mut p.bias, &g.bias, &mut s.bias, "bias")?;
            }
        }
        Ok(())
    }

    /// Minibatch RMSprop on `(x, y)`; `x` holds body features for head-only scope.
    fn fit(&mut self, x: &Matrix, y: &[usize], cfg: &TrainConfig) -> Result<TrainReport> {
        cfg.validate()?;
        let scope = cfg.scope;
        let initial_loss = self.loss(x, y, scope)?;
        let mut state = RmsPropState::zeros_like(self);
        let mut rng = SeededRng::new(cfg.seed);
        let mut order: Vec<usize> = (0..y.len()).collect();
        let mut epoch_losses = Vec::with_capacity(cfg.epochs);
        let mut steps = 0;
        let mut yb = Vec::with_capacity(cfg.batch_size);
        for _ in 0..cfg.epochs {
            order.shuffle(&mut rng);
            for batch in order.chunks(cfg.batch_size) {
                let xb = x.select_rows(batch);
                yb.clear();
                yb.extend(batch.iter().map(|&i| y[i]));
                let (loss, grads) = self.loss_and_grads(&xb, &yb, scope)?;
                if !loss.is_finite() {
                    return Err(Error::NonFinite(format!("training loss at step {steps}")));
                }
                self.apply_rmsprop(&grads, &mut state, cfg)?;
                steps += 1;
            }
            epoch_losses.push(self.loss(x, y, scope)?);
        }
        if !self.body.iter().chain(&self.head).all(LayerParams::all_finite) {
            return Err(Error::NonFinite("network parameters after training".into()));
        }
        Ok(TrainReport {
            initial_loss,
            epoch_losses,
            steps,
        })
    }

    /// Trains on raw inputs. Head-only scope extracts features first and
    /// leaves the body bit-identical.
    pub fn train(&self, ds: &Dataset, cfg: &TrainConfig) -> Result<(Network, TrainReport)> {
        let mut net = self.clone();
        let report = match cfg.scope {
            TrainScope::AllParams => net.fit(ds.features(), ds.labels(), cfg)?,
            TrainScope::HeadOnly => {
                let features = self.extract_features(ds.features())?;
                net.fit(&features, ds.labels(), cfg)?
            }
        };
        Ok((net, report))
    }

    /// Trains the head on already extracted features; scope in `cfg` is ignored.
    pub fn fine_tune_head(&self, features: &Dataset, cfg: &TrainConfig) -> Result<(Network, TrainReport)> {
        let cfg = TrainConfig {
            scope: TrainScope::HeadOnly,
            ..cfg.clone()
        };
        let mut net = self.clone();
        let report = net.fit(features.features(), features.labels(), &cfg)?;
        Ok((net, report))
    }
}

const MAGIC: &[u8; 8] = b"TSNET\0\0\0";
const FORMAT_VERSION: u32 = 1;

impl Network {
    /// Binary layout, all integers and floats little-endian:
    /// magic `TSNET\0\0\0`, `u32` version, `u64` input dim, `u64` body depth,
    /// `u64` per body width, `u64` head hidden width, `u64` classes, then for
    /// every layer (body first, then head) its weights followed by its biases as `f64`.
    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        let c = &self.config;
        let mut header = vec![c.input_dim as u64, c.body_dims.len() as u64];
        header.extend(c.body_dims.iter().map(|&d| d as u64));
        header.extend([c.head_hidden as u64, c.num_classes as u64]);
        for v in header {
            w.write_all(&v.to_le_bytes())?;
        }
        for layer in self.body.iter().chain(&self.head) {
            for v in layer.weights.iter().chain(&layer.bias) {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Network> {
        let bad = |m: &str| Error::NetworkFormat(m.to_string());
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)
            .map_err(|e| Error::NetworkFormat(e.to_string()))?;
        let mut cursor = &buf[..];
        let mut take = |n: usize| -> Result<&[u8]> {
            if cursor.len() < n {
                return Err(bad("truncated file"));
            }
            let (head, rest) = cursor.split_at(n);
            cursor = rest;
            Ok(head)
        };
        if take(8)? != MAGIC {
            return Err(bad("bad magic"));
        }
        let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(Error::NetworkFormat(format!("unsupported version {version}")));
        }
        let mut read_u64 = || -> Result<usize> {
            let v = u64::from_le_bytes(take(8)?.try_into().unwrap());
            usize::try_from(v)
                .ok()
                .filter(|&v| v <= 1 << 32)
                .ok_or_else(|| bad("dimension too large"))
        };
        let input_dim = read_u64()?;
        let depth = read_u64()?;
        if depth > 1024 {
            return Err(bad("body too deep"));
        }
        let body_dims = (0..depth).map(|_| read_u64()).collect::<Result<Vec<_>>>()?;
        let head_hidden = read_u64()?;
        let num_classes = read_u64()?;
        let config = NetConfig {
            input_dim,
            body_dims,
            head_hidden,
            num_classes,
        };
        let mut net = Network::zeros(&config).map_err(|e| Error::NetworkFormat(e.to_string()))?;
        let mut rest = cursor;
        for layer in net.layers_mut() {
            for v in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                if rest.len() < 8 {
                    return Err(bad("truncated parameters"));
                }
                let (b, tail) = rest.split_at(8);
                *v = f64::from_le_bytes(b.try_into().unwrap());
                if !v.is_finite() {
                    return Err(bad("non-finite parameter"));
                }
                rest = tail;
            }
        }
        if !rest.is_empty() {
            return Err(bad("trailing bytes after parameters"));
        }
        Ok(net)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        self.write_to(&mut bytes).map_err(|e| Error::io(path, e))?;
        fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Network> {
        let path = path.as_ref();
        let mut file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Network::read_from(&mut file)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(d: usize, body: &[usize], h: usize, m: usize) -> NetConfig {
        NetConfig {
            input_dim: d,
            body_dims: body.to_vec(),
            head_hidden: h,
            num_classes: m,
        }
    }

    fn random_matrix(rows: usize, cols: usize, rng: &mut SeededRng) -> Matrix {
        let data = (0..rows * cols).map(|_| rng.random_range(-2.0..2.0)).collect();
        Matrix::new(rows, cols, data).unwrap()
    }

    #[test]
    fn init_is_deterministic_with_zero_bias() {
        let c = cfg(4, &[8, 6], 5, 3);
        let a = Network::init(&c, &mut SeededRng::new(1)).unwrap();
        let b = Network::init(&c, &mut SeededRng::new(1)).unwrap();
        assert_eq!(a, b);
        assert!(a
            .body()
            .iter()
            .chain(a.head())
            .all(|l| l.bias.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn he_variance() {
        let c = cfg(1000, &[1000], 1, 2);
        let net = Network::init(&c, &mut SeededRng::new(2)).unwrap();
        let w = &net.body()[0].weights;
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (w.len() - 1) as f64;
        assert!((var / (2.0 / 1000.0) - 1.0).abs() < 0.2, "variance {var}");
    }

    #[test]
    fn probabilities_normalised_and_shift_invariant() {
        let c = cfg(3, &[7], 5, 4);
        let mut rng = SeededRng::new(3);
        let net = Network::init(&c, &mut rng).unwrap();
        let x = random_matrix(20, 3, &mut rng);
        let (p, _) = net.forward(&x).unwrap();
        for row in p.iter_rows() {
            assert!(row.iter().all(|&v| v >= 0.0));
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let mut logits = Matrix::new(1, 3, vec![1.0, 2.0, 3.0]).unwrap();
        let mut shifted = Matrix::new(1, 3, vec![101.0, 102.0, 103.0]).unwrap();
        softmax_in_place(&mut logits);
        softmax_in_place(&mut shifted);
        for (a, b) in logits.as_slice().iter().zip(shifted.as_slice()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_network_is_uniform() {
        let net = Network::zeros(&cfg(2, &[3], 3, 8)).unwrap();
        let x = Matrix::new(2, 2, vec![1.0, -1.0, 0.5, 2.0]).unwrap();
        let (p, _) = net.forward(&x).unwrap();
        assert!(p.as_slice().iter().all(|&v| (v - 0.125).abs() < 1e-15));
        let loss = net.loss(&x, &[0, 7], TrainScope::AllParams).unwrap();
        assert!((loss - 8f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn duplicate_rows_give_duplicate_outputs() {
        let c = cfg(2, &[4], 4, 3);
        let net = Network::init(&c, &mut SeededRng::new(5)).unwrap();
        let x = Matrix::new(2, 2, vec![0.3, -0.7, 0.3, -0.7]).unwrap();
        let (p, _) = net.forward(&x).unwrap();
        assert_eq!(p.row(0), p.row(1));
    }

    #[test]
    fn non_finite_input_rejected() {
        let net = Network::zeros(&cfg(2, &[3], 3, 2)).unwrap();
        let x = Matrix::new(1, 2, vec![f64::NAN, 0.0]).unwrap();
        assert!(net.forward(&x).is_err());
        assert!(net.forward(&Matrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn confident_predictions_have_near_zero_loss() {
        let mut net = Network::zeros(&cfg(1, &[1], 1, 2)).unwrap();
        // Output bias alone separates the classes.
        net.head[1].bias = vec![50.0, -50.0];
        let x = Matrix::new(2, 1, vec![0.0, 1.0]).unwrap();
        assert!(net.loss(&x, &[0, 0], TrainScope::AllParams).unwrap() < 1e-12);
    }

    #[test]
    fn rmsprop_hand_case() {
        let mut theta = [1.0];
        let mut s = [0.0];
        rmsprop_step(&mut theta, &[1.0], &mut s, 0.1, 0.9, 0.0).unwrap();
        assert!((s[0] - 0.1).abs() < 1e-15);
        assert!((theta[0] - (1.0 - 0.1 / 0.1f64.sqrt())).abs() < 1e-15);
        assert!((theta[0] - 0.683772).abs() < 1e-6);
    }

    #[test]
    fn rmsprop_zero_gradient_decays_accumulator() {
        let mut theta = [0.5, -2.0];
        let mut s = [0.4, 1.0];
        rmsprop_step(&mut theta, &[0.0, 0.0], &mut s, 0.01, 0.9, 1e-7).unwrap();
        assert_eq!(theta, [0.5, -2.0]);
        assert!((s[0] - 0.36).abs() < 1e-15 && (s[1] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn rmsprop_rejects_non_finite() {
        let mut theta = [1.0, 1.0];
        let mut s = [0.0, 0.0];
        let err = rmsprop_step(&mut theta, &[0.5, f64::INFINITY], &mut s, 0.1, 0.9, 0.0).unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient { index: 1, .. }));
        assert_eq!(theta, [1.0, 1.0]);
        assert!(rmsprop_step(&mut theta, &[0.5], &mut s, 0.1, 0.9, 0.0).is_err());
    }

    #[test]
    fn head_only_grads_have_no_body() {
        let c = cfg(3, &[5], 4, 2);
        let mut rng = SeededRng::new(8);
        let net = Network::init(&c, &mut rng).unwrap();
        let x = random_matrix(6, 3, &mut rng);
        let f = net.extract_features(&x).unwrap();
        let (_, g) = net
            .loss_and_grads(&f, &[0, 1, 0, 1, 1, 0], TrainScope::HeadOnly)
            .unwrap();
        assert!(g.body.is_empty());
        assert_eq!(g.head.len(), 2);
        // Head gradients agree with the full-network pass.
        let (_, full) = net
            .loss_and_grads(&x, &[0, 1, 0, 1, 1, 0], TrainScope::AllParams)
            .unwrap();
        assert_eq!(full.head, g.head);
    }

    #[test]
    fn forward_is_head_of_features() {
        let c = cfg(4, &[6, 5], 3, 3);
        let mut rng = SeededRng::new(9);
        let net = Network::init(&c, &mut rng).unwrap();
        let x = random_matrix(10, 4, &mut rng);
        let f = net.extract_features(&x).unwrap();
        assert_eq!(f.cols(), 5);
        assert!(f.as_slice().iter().all(|&v| v >= 0.0));
        let (p, _) = net.forward(&x).unwrap();
        let q = net.head_forward(&f).unwrap();
        for (a, b) in p.as_slice().iter().zip(q.as_slice()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.1, 0.7, 0.2]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
    }

    #[test]
    fn serialization_round_trip_and_corruption() {
        let c = cfg(3, &[4, 2], 5, 3);
        let net = Network::init(&c, &mut SeededRng::new(10)).unwrap();
        let mut bytes = Vec::new();
        net.write_to(&mut bytes).unwrap();
        let back = Network::read_from(&mut bytes.as_slice()).unwrap();
        assert_eq!(back, net);
        assert!(Network::read_from(&mut &bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Network::read_from(&mut extra.as_slice()).is_err());
        let mut bad = bytes;
        bad[0] = b'X';
        assert!(Network::read_from(&mut bad.as_slice()).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(cfg(3, &[], 2, 2).validate().is_err());
        assert!(cfg(3, &[0], 2, 2).validate().is_err());
        let bad = TrainConfig {
            rho: 1.0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        assert_eq!(TrainConfig::default().epochs, 20);
        assert_eq!(TrainConfig::default().batch_size, 32);
        assert_eq!(TrainConfig::default().learning_rate, 1e-4);
    }
}
