//! Synthetic source/target domains: isotropic Gaussian classes whose target
//! copies are rotated and translated.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;

use super::FeatureSet;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub num_classes: usize,
    pub input_dim: usize,
    pub source_counts: Vec<usize>,
    pub target_counts: Vec<usize>,
    /// Angle in radians applied to every coordinate plane (0,1), (2,3), ...
    pub shift_rotation: f64,
    /// Norm of the per-class target offset.
    pub shift_translation: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::Config("num_classes must be at least 2".into()));
        }
        if self.input_dim < 1 {
            return Err(Error::Config("input_dim must be at least 1".into()));
        }
        for (name, counts) in [("source", &self.source_counts), ("target", &self.target_counts)] {
            if counts.len() != self.num_classes {
                return Err(Error::Config(format!(
                    "{name} counts have {} entries for {} classes",
                    counts.len(),
                    self.num_classes
                )));
            }
            if counts.contains(&0) {
                return Err(Error::Config(format!("{name} counts must all be >= 1")));
            }
        }
        if !(self.noise_sigma > 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config("noise_sigma must be positive".into()));
        }
        if !self.shift_rotation.is_finite() || !self.shift_translation.is_finite() {
            return Err(Error::Config("shift parameters must be finite".into()));
        }
        Ok(())
    }
}

/// Generated domains plus the population class means used to draw them.
#[derive(Debug, Clone)]
pub struct SynthDomains {
    pub source: FeatureSet,
    pub target: FeatureSet,
    pub source_means: Array2<f64>,
    pub target_means: Array2<f64>,
}

/// Applies the Givens rotation by `angle` to each successive coordinate pair.
pub(crate) fn rotate_pairs(v: &mut [f64], angle: f64) {
    let (s, c) = angle.sin_cos();
    for pair in v.chunks_exact_mut(2) {
        let (a, b) = (pair[0], pair[1]);
        pair[0] = c * a - s * b;
        pair[1] = s * a + c * b;
    }
}

fn random_unit(rng: &mut impl Rng, dim: usize) -> Array1<f64> {
    loop {
        let v: Array1<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = v.dot(&v).sqrt();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

fn draw(
    means: &Array2<f64>,
    counts: &[usize],
    sigma: f64,
    seed: u64,
    stream: u64,
) -> Result<FeatureSet> {
    let mut rng = rng::stream(seed, stream);
    let dim = means.ncols();
    let total: usize = counts.iter().sum();
    let mut rows = Vec::with_capacity(total);
    for (class, &count) in counts.iter().enumerate() {
        for _ in 0..count {
            let x: Vec<f32> = (0..dim)
                .map(|d| (means[[class, d]] + sigma * rng.sample::<f64, _>(StandardNormal)) as f32)
                .collect();
            rows.push((x, class));
        }
    }
    let order = rng::permutation(&mut rng, total);
    let mut data = Vec::with_capacity(total * dim);
    let mut labels = Vec::with_capacity(total);
    for i in order {
        data.extend_from_slice(&rows[i].0);
        labels.push(rows[i].1);
    }
    let data = Array2::from_shape_vec((total, dim), data).expect("rectangular");
    FeatureSet::new(data, Some(labels))
}

/// Deterministic in `cfg`. Target labels are emitted for evaluation only.
pub fn synth_domains(cfg: &SynthConfig) -> Result<SynthDomains> {
    cfg.validate()?;
    let (n, d) = (cfg.num_classes, cfg.input_dim);
    let mut layout = rng::stream(cfg.seed, 0);
    let radius = 10.0 * cfg.noise_sigma;

    let mut source_means = Array2::zeros((n, d));
    for c in 0..n {
        source_means.row_mut(c).assign(&(random_unit(&mut layout, d) * radius));
    }
    let mut target_means = Array2::zeros((n, d));
    for c in 0..n {
        let mut center = source_means.row(c).to_vec();
        rotate_pairs(&mut center, cfg.shift_rotation);
        let offset = random_unit(&mut layout, d) * cfg.shift_translation;
        for k in 0..d {
            target_means[[c, k]] = center[k] + offset[k];
        }
    }

    let source = draw(&source_means, &cfg.source_counts, cfg.noise_sigma, cfg.seed, 1)?;
    let target = draw(&target_means, &cfg.target_counts, cfg.noise_sigma, cfg.seed, 2)?;
    Ok(SynthDomains {
        source,
        target,
        source_means,
        target_means,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> SynthConfig {
        SynthConfig {
            num_classes: 3,
            input_dim: 5,
            source_counts: vec![200, 250, 300],
            target_counts: vec![220, 200, 260],
            shift_rotation: 0.0,
            shift_translation: 5.0,
            noise_sigma: 0.1,
            seed: 11,
        }
    }

    fn class_means(set: &FeatureSet, n: usize) -> Array2<f64> {
        let labels = set.labels().unwrap();
        let mut sums = Array2::<f64>::zeros((n, set.cols()));
        let mut counts = vec![0usize; n];
        for (i, row) in set.data().rows().into_iter().enumerate() {
            counts[labels[i]] += 1;
            for (k, v) in row.iter().enumerate() {
                sums[[labels[i], k]] += f64::from(*v);
            }
        }
        for c in 0..n {
            sums.row_mut(c).mapv_inplace(|v| v / counts[c] as f64);
        }
        sums
    }

    #[test]
    fn deterministic() {
        let a = synth_domains(&cfg()).unwrap();
        let b = synth_domains(&cfg()).unwrap();
        assert_eq!(a.source, b.source);
        assert_eq!(a.target, b.target);
    }

    #[test]
    fn zero_shift_means_coincide() {
        let mut c = cfg();
        c.shift_translation = 0.0;
        c.target_counts = c.source_counts.clone();
        let out = synth_domains(&c).unwrap();
        assert_eq!(out.source_means, out.target_means);
    }

    #[test]
    fn translated_target_means() {
        let out = synth_domains(&cfg()).unwrap();
        let src = class_means(&out.source, 3);
        let tgt = class_means(&out.target, 3);
        let offsets = &out.target_means - &out.source_means;
        for c in 0..3 {
            let offset_norm = offsets.row(c).dot(&offsets.row(c)).sqrt();
            assert!((offset_norm - 5.0).abs() < 1e-9);
            for k in 0..5 {
                let expected = src[[c, k]] + offsets[[c, k]];
                assert!((tgt[[c, k]] - expected).abs() < 0.2, "class {c} dim {k}");
            }
        }
    }

    #[test]
    fn rotation_preserves_norm_and_center_distances() {
        let mut v = vec![3.0, 4.0, 1.0, -2.0, 5.0];
        let before: f64 = v.iter().map(|x| x * x).sum();
        rotate_pairs(&mut v, 0.7);
        let after: f64 = v.iter().map(|x| x * x).sum();
        assert!((before - after).abs() < 1e-12);
        assert_eq!(v[4], 5.0);
    }

    #[test]
    fn rejects_bad_config() {
        let mut c = cfg();
        c.noise_sigma = 0.0;
        assert!(synth_domains(&c).is_err());
        let mut c = cfg();
        c.source_counts[1] = 0;
        assert!(synth_domains(&c).is_err());
        let mut c = cfg();
        c.num_classes = 1;
        assert!(synth_domains(&c).is_err());
    }
}
