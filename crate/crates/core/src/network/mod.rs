//! Feed-forward networks with hand-written backpropagation.
//!
//! Parameters live in `f64` but are rounded to the nearest `f32` whenever an
//! optimizer writes them, so every in-memory model is exactly representable in
//! the single-precision checkpoint format.

mod checkpoint;
mod layers;
mod optim;
mod train;

pub use checkpoint::{
    decode_model, encode_model, load_classifier, load_extractor_bank, load_model, save_classifier,
    save_extractor_bank, save_model, ModelFile, FLAG_BANK, FLAG_CENTROIDS, FLAG_HEAD, MODEL_MAGIC,
};
pub use layers::{
    argmax_row, check_layer_grads, cross_entropy, softmax_rows, Classified, Classifier, CrossEntropy, Layer, LayerGrads, Mlp,
    MlpCache, SoftmaxHead, PROB_FLOOR,
};
pub use optim::{cosine_lr, Sgd};
pub use train::{backward_step, classifier_gradients, train_classifier, ClassifierGrads, TrainConfig};

/// Rounds to the nearest `f32` and widens back.
#[inline]
pub fn round_f32(x: f64) -> f64 {
    x as f32 as f64
}
