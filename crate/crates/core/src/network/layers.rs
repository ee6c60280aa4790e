use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use super::round_f32;
use crate::error::{Error, Result};
use crate::rng;

/// Probabilities are clamped to this floor before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

/// Affine map `y = x W^T + b` with `W` of shape `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Layer {
    /// Uniform in `[-a, a]`, `a = sqrt(6 / (fan_in + fan_out))`, zero bias.
    pub fn init(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Self {
        let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let weight = Array2::from_shape_fn((fan_out, fan_in), |_| {
            round_f32(rng.random_range(-a..=a))
        });
        Layer {
            weight,
            bias: Array1::zeros(fan_out),
        }
    }

    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Layer {
            weight: Array2::zeros((fan_out, fan_in)),
            bias: Array1::zeros(fan_out),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.nrows()
    }

    fn apply(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        x.dot(&self.weight.t()) + &self.bias
    }

    fn is_finite(&self) -> bool {
        self.weight.iter().chain(self.bias.iter()).all(|v| v.is_finite())
    }

    pub(crate) fn slices_mut(&mut self) -> [&mut [f64]; 2] {
        [
            self.weight.as_slice_mut().expect("standard layout"),
            self.bias.as_slice_mut().expect("standard layout"),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl LayerGrads {
    pub(crate) fn slices(&self) -> [&[f64]; 2] {
        [
            self.weight.as_slice().expect("standard layout"),
            self.bias.as_slice().expect("standard layout"),
        ]
    }

    fn is_finite(&self) -> bool {
        self.weight.iter().chain(self.bias.iter()).all(|v| v.is_finite())
    }
}

pub fn check_layer_grads(grads: &[LayerGrads]) -> Result<()> {
    check_grads(grads, 0)
}

pub(crate) fn check_grads(grads: &[LayerGrads], first_layer: usize) -> Result<()> {
    for (i, g) in grads.iter().enumerate() {
        if !g.is_finite() {
            return Err(Error::NonFiniteGradient {
                layer: first_layer + i,
            });
        }
    }
    Ok(())
}

/// Stack of affine layers, ReLU after every layer except the last.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
}

/// Activations recorded by [`Mlp::forward_cached`] for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    /// Input to each layer; `inputs[0]` is the batch itself.
    inputs: Vec<Array2<f64>>,
    /// Pre-activation of each layer.
    pre: Vec<Array2<f64>>,
}

impl MlpCache {
    pub fn output(&self) -> &Array2<f64> {
        self.pre.last().expect("at least one layer")
    }
}

impl Mlp {
    /// Seeded network with layer sizes `dims = [D, h_1, ..., Z]`.
    pub fn new(dims: &[usize], seed: u64) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::Config(format!("invalid layer dims {dims:?}")));
        }
        let mut rng = rng::stream(seed, 0);
        let layers = dims.windows(2).map(|w| Layer::init(w[0], w[1], &mut rng)).collect();
        Ok(Mlp { layers })
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[1].input_dim() != pair[0].output_dim() {
                return Err(Error::Shape {
                    context: "layer chaining",
                    expected: pair[0].output_dim(),
                    found: pair[1].input_dim(),
                });
            }
        }
        for l in &layers {
            if l.bias.len() != l.output_dim() {
                return Err(Error::Shape {
                    context: "bias length",
                    expected: l.output_dim(),
                    found: l.bias.len(),
                });
            }
            if !l.is_finite() {
                return Err(Error::Numeric("non-finite parameter".into()));
            }
        }
        Ok(Mlp { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.input_dim()];
        d.extend(self.layers.iter().map(Layer::output_dim));
        d
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").output_dim()
    }

    fn check_input(&self, x: &ArrayView2<'_, f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Shape {
                context: "network input",
                expected: self.input_dim(),
                found: x.ncols(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        let mut h = self.layers[0].apply(x);
        for layer in &self.layers[1..] {
            h.mapv_inplace(relu);
            h = layer.apply(h.view());
        }
        Ok(h)
    }

    pub fn forward_cached(&self, x: ArrayView2<'_, f64>) -> Result<MlpCache> {
        self.check_input(&x)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut a = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let h = layer.apply(a.view());
            inputs.push(a);
            a = if i + 1 < self.layers.len() {
                h.mapv(relu)
            } else {
                Array2::zeros((0, 0))
            };
            pre.push(h);
        }
        Ok(MlpCache { inputs, pre })
    }

    /// Gradients of every layer plus the gradient with respect to the input,
    /// given the gradient `d_out` of the loss with respect to the output.
    pub fn backward(&self, cache: &MlpCache, d_out: Array2<f64>) -> (Vec<LayerGrads>, Array2<f64>) {
        let n = self.layers.len();
        let mut grads = Vec::with_capacity(n);
        let mut d_h = d_out;
        for l in (0..n).rev() {
            if l + 1 < n {
                d_h.zip_mut_with(&cache.pre[l], |g, &h| {
                    if h <= 0.0 {
                        *g = 0.0;
                    }
                });
            }
            let weight = d_h.t().dot(&cache.inputs[l]);
            let bias = d_h.sum_axis(Axis(0));
            let d_in = d_h.dot(&self.layers[l].weight);
            grads.push(LayerGrads { weight, bias });
            d_h = d_in;
        }
        grads.reverse();
        (grads, d_h)
    }
}

#[inline]
fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum: f64 = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

/// Linear classifier `R^Z -> R^N` followed by softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxHead {
    pub layer: Layer,
}

#[derive(Debug, Clone)]
pub struct Classified {
    pub logits: Array2<f64>,
    pub probs: Array2<f64>,
}

impl SoftmaxHead {
    pub fn new(feature_dim: usize, num_classes: usize, seed: u64) -> Self {
        let mut rng = rng::stream(seed, 1);
        SoftmaxHead {
            layer: Layer::init(feature_dim, num_classes, &mut rng),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.layer.output_dim()
    }

    pub fn feature_dim(&self) -> usize {
        self.layer.input_dim()
    }

    pub fn classify(&self, z: ArrayView2<'_, f64>) -> Result<Classified> {
        if z.ncols() != self.feature_dim() {
            return Err(Error::Shape {
                context: "classifier input",
                expected: self.feature_dim(),
                found: z.ncols(),
            });
        }
        let logits = self.layer.apply(z);
        let probs = softmax_rows(&logits);
        Ok(Classified { logits, probs })
    }
}

/// Mean cross-entropy and the number of target probabilities that hit the floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossEntropy {
    pub loss: f64,
    pub clamped: usize,
}

/// `-(1/B) sum_i log p_i[t_i]`, probabilities floored at [`PROB_FLOOR`].
pub fn cross_entropy(probs: &Array2<f64>, targets: &[usize]) -> Result<CrossEntropy> {
    if probs.nrows() != targets.len() {
        return Err(Error::Shape {
            context: "cross-entropy targets",
            expected: probs.nrows(),
            found: targets.len(),
        });
    }
    if probs.nrows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut clamped = 0;
    let mut total = 0.0;
    for (row, &t) in probs.rows().into_iter().zip(targets) {
        if t >= row.len() {
            return Err(Error::LabelOutOfRange {
                row: 0,
                label: t,
                classes: row.len(),
            });
        }
        let mut p = row[t];
        if p < PROB_FLOOR {
            p = PROB_FLOOR;
            clamped += 1;
        }
        total -= p.ln();
    }
    if clamped > 0 {
        log::debug!("cross-entropy clamped {clamped} target probabilities");
    }
    Ok(CrossEntropy {
        loss: total / targets.len() as f64,
        clamped,
    })
}

/// Source or target model `f = h o g`.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    pub extractor: Mlp,
    pub head: SoftmaxHead,
}

impl Classifier {
    /// Extractor `dims` followed by a fresh `num_classes` head.
    pub fn new(dims: &[usize], num_classes: usize, seed: u64) -> Result<Self> {
        let extractor = Mlp::new(dims, seed)?;
        let head = SoftmaxHead::new(extractor.output_dim(), num_classes, seed);
        Ok(Classifier { extractor, head })
    }

    /// Attaches a fresh head to an existing extractor.
    pub fn with_extractor(extractor: Mlp, num_classes: usize, seed: u64) -> Self {
        let head = SoftmaxHead::new(extractor.output_dim(), num_classes, seed);
        Classifier { extractor, head }
    }

    pub fn num_classes(&self) -> usize {
        self.head.num_classes()
    }

    pub fn features(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.extractor.forward(x)
    }

    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let z = self.extractor.forward(x)?;
        Ok(self.head.classify(z.view())?.probs)
    }

    /// Argmax class per row, ties to the lowest index.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        let probs = self.predict_proba(x)?;
        Ok(probs.rows().into_iter().map(|r| argmax_row(r.iter().copied()).0).collect())
    }
}

/// Index and value of the maximum; the first maximum wins ties.
pub fn argmax_row(values: impl Iterator<Item = f64>) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}
