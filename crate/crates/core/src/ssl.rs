//! Swapped-prototype self-supervised pretraining of the target extractor.
//!
//! For each batch, several augmented views are embedded and L2-normalized,
//! scored against unit-norm prototypes, and turned into:
//! * predictions `p = softmax(z P^T / temperature)`;
//! * codes `q`, the Sinkhorn-Knopp transport of the same scores, treated as
//!   constants.
//!
//! The loss predicts each view's code from every other view's prediction.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::clustering::{sinkhorn_codes, SinkhornConfig};
use crate::error::{Error, Result};
use crate::features::FeatureSet;
use crate::network::{cosine_lr, round_f32, softmax_rows, LayerGrads, Mlp, Sgd, PROB_FLOOR};
use crate::rng;

/// Learnable prototypes, one unit-norm row each.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeBank {
    prototypes: Array2<f64>,
}

impl PrototypeBank {
    pub fn new(count: usize, dim: usize, seed: u64) -> Result<Self> {
        if count == 0 || dim == 0 {
            return Err(Error::Config("prototype bank needs rows and columns".into()));
        }
        let mut rng = rng::stream(seed, 5);
        let prototypes = Array2::from_shape_fn((count, dim), |_| rng.sample(StandardNormal));
        let mut bank = PrototypeBank { prototypes };
        bank.normalize()?;
        Ok(bank)
    }

    /// Wraps an existing matrix, normalizing its rows.
    pub fn from_matrix(prototypes: Array2<f64>) -> Result<Self> {
        let mut bank = PrototypeBank { prototypes };
        bank.normalize()?;
        Ok(bank)
    }

    /// Wraps a matrix as is. Useful for gradient checks, where the rows must
    /// not be renormalized.
    pub fn from_raw(prototypes: Array2<f64>) -> Self {
        PrototypeBank { prototypes }
    }

    pub fn prototypes(&self) -> &Array2<f64> {
        &self.prototypes
    }

    pub fn len(&self) -> usize {
        self.prototypes.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.prototypes.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.prototypes.ncols()
    }

    fn normalize(&mut self) -> Result<()> {
        for (row, mut p) in self.prototypes.rows_mut().into_iter().enumerate() {
            let norm = p.dot(&p).sqrt();
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(Error::ZeroNormFeature { row });
            }
            p.mapv_inplace(|v| round_f32(v / norm));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationSpec {
    pub num_views: usize,
    pub noise_sigma: f64,
    pub dropout_prob: f64,
    pub scale_lo: f64,
    pub scale_hi: f64,
}

impl Default for AugmentationSpec {
    fn default() -> Self {
        AugmentationSpec {
            num_views: 2,
            noise_sigma: 0.3,
            dropout_prob: 0.1,
            scale_lo: 0.9,
            scale_hi: 1.1,
        }
    }
}

impl AugmentationSpec {
    pub fn identity(num_views: usize) -> Self {
        AugmentationSpec {
            num_views,
            noise_sigma: 0.0,
            dropout_prob: 0.0,
            scale_lo: 1.0,
            scale_hi: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_views < 2 {
            return Err(Error::Config("at least two views are required".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config("augmentation noise must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_prob) {
            return Err(Error::Config("dropout probability must lie in [0, 1)".into()));
        }
        if !(self.scale_lo > 0.0 && self.scale_lo <= self.scale_hi && self.scale_hi.is_finite()) {
            return Err(Error::Config("scale range must satisfy 0 < lo <= hi".into()));
        }
        Ok(())
    }
}

/// `view_j = (x * keep_mask) * scale + noise`, each view on its own stream.
///
/// The mask keeps a coordinate with probability `1 - dropout_prob`; the scale
/// is drawn once per sample.
pub fn make_views(
    x: ArrayView2<'_, f64>,
    spec: &AugmentationSpec,
    seed: u64,
) -> Result<Vec<Array2<f64>>> {
    spec.validate()?;
    Ok((0..spec.num_views)
        .map(|j| {
            let mut rng = rng::stream(seed, j as u64);
            let mut view = x.to_owned();
            for mut row in view.rows_mut() {
                let scale = if spec.scale_lo == spec.scale_hi {
                    spec.scale_lo
                } else {
                    rng.random_range(spec.scale_lo..=spec.scale_hi)
                };
                for v in row.iter_mut() {
                    let keep = spec.dropout_prob == 0.0 || rng.random::<f64>() >= spec.dropout_prob;
                    let mut out = if keep { *v * scale } else { 0.0 };
                    if spec.noise_sigma > 0.0 {
                        out += spec.noise_sigma * rng.sample::<f64, _>(StandardNormal);
                    }
                    *v = out;
                }
            }
            view
        })
        .collect())
}

/// Unit-norm copy of each row plus the original norms.
pub fn normalize_rows(z: &Array2<f64>) -> Result<(Array2<f64>, Array1<f64>)> {
    let norms: Array1<f64> = z.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect();
    if let Some(row) = norms.iter().position(|&n| !(n > 1e-300)) {
        return Err(Error::ZeroNormFeature { row });
    }
    let zn = z / &norms.view().insert_axis(Axis(1));
    Ok((zn, norms))
}

/// Cosine scores between normalized features and prototypes.
fn scores(z: &Array2<f64>, bank: &PrototypeBank) -> Result<(Array2<f64>, Array2<f64>, Array1<f64>)> {
    if z.ncols() != bank.dim() {
        return Err(Error::Shape {
            context: "prototype dimension",
            expected: bank.dim(),
            found: z.ncols(),
        });
    }
    let (zn, norms) = normalize_rows(z)?;
    let s = zn.dot(&bank.prototypes.t());
    Ok((s, zn, norms))
}

/// `softmax(normalize(z) P^T / temperature)` row-wise.
pub fn prototype_probs(
    z: &Array2<f64>,
    bank: &PrototypeBank,
    temperature: f64,
) -> Result<Array2<f64>> {
    check_temperature(temperature)?;
    let (s, _, _) = scores(z, bank)?;
    Ok(softmax_rows(&(s / temperature)))
}

fn check_temperature(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Config("temperature must be positive".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodeLoss {
    pub loss: f64,
    pub clamped: usize,
}

/// Mean over rows of `-sum_n q_n log p_n`, with `p` floored where `q > 0`.
pub fn code_loss(p: &Array2<f64>, q: &Array2<f64>) -> Result<CodeLoss> {
    if p.dim() != q.dim() {
        return Err(Error::Shape {
            context: "code loss",
            expected: p.len(),
            found: q.len(),
        });
    }
    if p.nrows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut clamped = 0;
    let mut total = 0.0;
    for (&pv, &qv) in p.iter().zip(q.iter()) {
        if qv > 0.0 {
            let pv = if pv < PROB_FLOOR {
                clamped += 1;
                PROB_FLOOR
            } else {
                pv
            };
            total -= qv * pv.ln();
        }
    }
    if clamped > 0 {
        log::debug!("code loss clamped {clamped} probabilities");
    }
    Ok(CodeLoss {
        loss: total / p.nrows() as f64,
        clamped,
    })
}

fn pair_count(views: usize) -> Result<usize> {
    if views < 2 {
        return Err(Error::Config("swapped loss needs at least two views".into()));
    }
    Ok(views * (views - 1) / 2)
}

/// Mean over unordered view pairs `(j, k)` of `L(p_j, q_k) + L(p_k, q_j)`.
pub fn swapped_loss(views: &[(Array2<f64>, Array2<f64>)]) -> Result<f64> {
    let pairs = pair_count(views.len())?;
    let mut total = 0.0;
    for j in 0..views.len() {
        for k in j + 1..views.len() {
            total += code_loss(&views[j].0, &views[k].1)?.loss;
            total += code_loss(&views[k].0, &views[j].1)?.loss;
        }
    }
    Ok(total / pairs as f64)
}

/// Codes for every view under the current extractor and bank. No gradient
/// flows through these.
pub fn view_codes(
    extractor: &Mlp,
    bank: &PrototypeBank,
    views: &[Array2<f64>],
    sinkhorn: &SinkhornConfig,
) -> Result<Vec<Array2<f64>>> {
    views
        .iter()
        .map(|v| {
            let z = extractor.forward(v.view())?;
            let (s, _, _) = scores(&z, bank)?;
            sinkhorn_codes(s.view(), sinkhorn)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SslGrads {
    pub extractor: Vec<LayerGrads>,
    pub prototypes: Array2<f64>,
    pub loss: f64,
}

/// Swapped loss and its gradient with the codes held fixed.
pub fn swapped_gradients(
    extractor: &Mlp,
    bank: &PrototypeBank,
    views: &[Array2<f64>],
    codes: &[Array2<f64>],
    temperature: f64,
) -> Result<SslGrads> {
    check_temperature(temperature)?;
    let pairs = pair_count(views.len())?;
    if codes.len() != views.len() {
        return Err(Error::Shape {
            context: "codes per view",
            expected: views.len(),
            found: codes.len(),
        });
    }
    let mut forwards = Vec::with_capacity(views.len());
    for v in views {
        let cache = extractor.forward_cached(v.view())?;
        let (s, zn, norms) = scores(cache.output(), bank)?;
        let p = softmax_rows(&(s / temperature));
        forwards.push((cache, zn, norms, p));
    }
    let with_codes: Vec<(Array2<f64>, Array2<f64>)> = forwards
        .iter()
        .zip(codes)
        .map(|(f, q)| (f.3.clone(), q.clone()))
        .collect();
    let loss = swapped_loss(&with_codes)?;

    let b = views[0].nrows() as f64;
    let scale = 1.0 / (b * pairs as f64 * temperature);
    let mut d_protos = Array2::<f64>::zeros(bank.prototypes.raw_dim());
    let mut extractor_grads: Option<Vec<LayerGrads>> = None;
    for (j, (cache, zn, norms, p)) in forwards.iter().enumerate() {
        // Each other view's code is a target for this view's prediction.
        let mut d_scores = Array2::<f64>::zeros(p.raw_dim());
        for (k, q) in codes.iter().enumerate() {
            if k == j {
                continue;
            }
            let mass = q.sum_axis(Axis(1)).insert_axis(Axis(1));
            d_scores = d_scores + &(p * &mass) - q;
        }
        d_scores *= scale;
        d_protos = d_protos + d_scores.t().dot(zn);
        let d_zn = d_scores.dot(&bank.prototypes);
        let radial = (&d_zn * zn).sum_axis(Axis(1)).insert_axis(Axis(1));
        let d_z = (&d_zn - &(zn * &radial)) / norms.view().insert_axis(Axis(1));
        let (g, _) = extractor.backward(cache, d_z);
        extractor_grads = Some(match extractor_grads {
            None => g,
            Some(acc) => acc
                .into_iter()
                .zip(g)
                .map(|(a, b)| LayerGrads {
                    weight: a.weight + b.weight,
                    bias: a.bias + b.bias,
                })
                .collect(),
        });
    }
    Ok(SslGrads {
        extractor: extractor_grads.expect("at least two views"),
        prototypes: d_protos,
        loss,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SslConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub temperature: f64,
    pub sinkhorn: SinkhornConfig,
    pub lr0: f64,
    pub lr_min: f64,
    pub momentum: f64,
    pub augment: AugmentationSpec,
    pub seed: u64,
}

impl Default for SslConfig {
    fn default() -> Self {
        SslConfig {
            epochs: 100,
            batch_size: 64,
            temperature: 0.1,
            sinkhorn: SinkhornConfig::default(),
            lr0: 0.05,
            lr_min: 0.0,
            momentum: 0.9,
            augment: AugmentationSpec::default(),
            seed: 0,
        }
    }
}

impl SslConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("ssl epochs must be >= 1".into()));
        }
        if self.batch_size < 2 {
            return Err(Error::Config("ssl batch size must be >= 2".into()));
        }
        check_temperature(self.temperature)?;
        self.sinkhorn.validate()?;
        self.augment.validate()?;
        if !(self.lr_min >= 0.0 && self.lr0 >= self.lr_min && self.lr0.is_finite()) {
            return Err(Error::Config("ssl learning rates must satisfy lr0 >= lr_min >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config("ssl momentum must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Trains `extractor` and `bank` in place; returns the mean loss per epoch.
///
/// Each epoch reshuffles the target set; a trailing batch with fewer than two
/// samples is skipped.
pub fn ssl_train(
    extractor: &mut Mlp,
    bank: &mut PrototypeBank,
    target: &FeatureSet,
    cfg: &SslConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let m = target.rows();
    if cfg.batch_size > m {
        return Err(Error::Config(format!(
            "ssl batch size {} exceeds {m} samples",
            cfg.batch_size
        )));
    }
    if extractor.output_dim() != bank.dim() {
        return Err(Error::Shape {
            context: "prototype dimension",
            expected: extractor.output_dim(),
            found: bank.dim(),
        });
    }
    let x = target.to_f64();
    let batches_per_epoch = m / cfg.batch_size + usize::from(m % cfg.batch_size >= 2);
    let total = cfg.epochs * batches_per_epoch;
    let mut opt = Sgd::new(cfg.momentum);
    let mut shuffle = rng::stream(cfg.seed, 11);
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut step = 0;
    for epoch in 0..cfg.epochs {
        let order = rng::permutation(&mut shuffle, m);
        let mut sum = 0.0;
        let mut seen = 0usize;
        for (batch, chunk) in order.chunks(cfg.batch_size).enumerate() {
            if chunk.len() < 2 {
                continue;
            }
            let xb = x.select(Axis(0), chunk);
            let view_seed = rng::derive(cfg.seed, ((epoch as u64) << 32) | batch as u64);
            let views = make_views(xb.view(), &cfg.augment, view_seed)?;
            let codes = view_codes(extractor, bank, &views, &cfg.sinkhorn)?;
            let grads = swapped_gradients(extractor, bank, &views, &codes, cfg.temperature)?;
            crate::network::check_layer_grads(&grads.extractor)?;
            if !grads.prototypes.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFiniteGradient {
                    layer: extractor.layers().len(),
                });
            }
            let lr = cosine_lr(step, total, cfg.lr0, cfg.lr_min)?;
            if lr > 0.0 {
                let mut params: Vec<&mut [f64]> = Vec::new();
                let mut slices: Vec<&[f64]> = Vec::new();
                for (layer, g) in extractor.layers_mut().iter_mut().zip(&grads.extractor) {
                    params.extend(layer.slices_mut());
                    slices.extend(g.slices());
                }
                params.push(bank.prototypes.as_slice_mut().expect("standard layout"));
                slices.push(grads.prototypes.as_slice().expect("standard layout"));
                opt.step(params, slices, lr);
                bank.normalize()?;
            }
            sum += grads.loss * chunk.len() as f64;
            seen += chunk.len();
            step += 1;
        }
        log.push(sum / seen as f64);
    }
    Ok(log)
}
