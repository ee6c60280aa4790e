use ndarray::{Array2, ArrayView2};

use super::layers::{check_grads, cross_entropy, Classifier, CrossEntropy, LayerGrads};
use super::optim::{cosine_lr, Sgd};
use crate::error::{Error, Result};
use crate::features::FeatureSet;
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    pub lr_min: f64,
    pub momentum: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 64,
            lr0: 0.05,
            lr_min: 0.0,
            momentum: 0.9,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if !(self.lr_min >= 0.0 && self.lr0 >= self.lr_min && self.lr0.is_finite()) {
            return Err(Error::Config(format!(
                "learning rates must satisfy lr0 >= lr_min >= 0 (got {} and {})",
                self.lr0, self.lr_min
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config("momentum must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Gradients of the mean cross-entropy for every extractor layer and the head.
#[derive(Debug, Clone)]
pub struct ClassifierGrads {
    pub extractor: Vec<LayerGrads>,
    pub head: LayerGrads,
    pub loss: CrossEntropy,
}

pub fn classifier_gradients(
    model: &Classifier,
    x: ArrayView2<'_, f64>,
    targets: &[usize],
) -> Result<ClassifierGrads> {
    let cache = model.extractor.forward_cached(x)?;
    let z = cache.output();
    let out = model.head.classify(z.view())?;
    let loss = cross_entropy(&out.probs, targets)?;

    let b = targets.len() as f64;
    let mut d_logits = out.probs;
    for (mut row, &t) in d_logits.rows_mut().into_iter().zip(targets) {
        row[t] -= 1.0;
        row.mapv_inplace(|v| v / b);
    }
    let head = LayerGrads {
        weight: d_logits.t().dot(z),
        bias: d_logits.sum_axis(ndarray::Axis(0)),
    };
    let d_z = d_logits.dot(&model.head.layer.weight);
    let (extractor, _) = model.extractor.backward(&cache, d_z);
    Ok(ClassifierGrads {
        extractor,
        head,
        loss,
    })
}

/// One momentum-SGD step on the batch; returns the pre-update loss.
///
/// With `freeze_extractor` only the head moves.
pub fn backward_step(
    model: &mut Classifier,
    opt: &mut Sgd,
    x: ArrayView2<'_, f64>,
    targets: &[usize],
    lr: f64,
    freeze_extractor: bool,
) -> Result<CrossEntropy> {
    let grads = classifier_gradients(model, x, targets)?;
    let n_layers = model.extractor.layers().len();
    check_grads(&grads.extractor, 0)?;
    check_grads(std::slice::from_ref(&grads.head), n_layers)?;

    let mut params: Vec<&mut [f64]> = Vec::new();
    let mut slices: Vec<&[f64]> = Vec::new();
    if !freeze_extractor {
        for (layer, g) in model.extractor.layers_mut().iter_mut().zip(&grads.extractor) {
            params.extend(layer.slices_mut());
            slices.extend(g.slices());
        }
    }
    params.extend(model.head.layer.slices_mut());
    slices.extend(grads.head.slices());
    opt.step(params, slices, lr);
    Ok(grads.loss)
}

/// Mini-batch training with a per-epoch shuffle and a cosine schedule over all
/// steps. Returns the mean training loss of every epoch.
pub fn train_classifier(
    model: &mut Classifier,
    data: &FeatureSet,
    cfg: &TrainConfig,
    freeze_extractor: bool,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let labels = data.require_labels()?;
    data.check_labels(model.num_classes())?;
    let m = data.rows();
    if m == 0 {
        return Err(Error::EmptyDataset);
    }
    let x = data.to_f64();
    let batches_per_epoch = m.div_ceil(cfg.batch_size);
    let total = cfg.epochs * batches_per_epoch;
    let mut opt = Sgd::new(cfg.momentum);
    let mut rng = rng::stream(cfg.seed, 7);
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut step = 0;
    for _ in 0..cfg.epochs {
        let order = rng::permutation(&mut rng, m);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let xb: Array2<f64> = x.select(ndarray::Axis(0), chunk);
            let yb: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let lr = cosine_lr(step, total, cfg.lr0, cfg.lr_min)?;
            let loss = backward_step(model, &mut opt, xb.view(), &yb, lr, freeze_extractor)?;
            epoch_loss += loss.loss * chunk.len() as f64;
            step += 1;
        }
        log.push(epoch_loss / m as f64);
    }
    Ok(log)
}
