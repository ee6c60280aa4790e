//! CLUP-MODEL container.
//!
//! ```text
//! magic   "CMDL"        4 bytes
//! version u16 = 1
//! flags   u16           bit 0: last layer is a softmax head
//!                       bit 1: single layer of k-means centroids
//!                       bit 2: last layer is a prototype bank
//! layers  u16
//! per layer: rows u32, cols u32, rows*cols f32 weights (row-major), rows f32 biases
//! check   u8            XOR of all preceding bytes
//! ```

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::layers::{Classifier, Layer, Mlp, SoftmaxHead};
use crate::codec::{check_length_and_checksum, Reader, Writer};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: [u8; 4] = *b"CMDL";
const VERSION: u16 = 1;
pub const FLAG_HEAD: u16 = 1 << 0;
pub const FLAG_CENTROIDS: u16 = 1 << 1;
pub const FLAG_BANK: u16 = 1 << 2;
const KNOWN_FLAGS: u16 = FLAG_HEAD | FLAG_CENTROIDS | FLAG_BANK;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub flags: u16,
    pub layers: Vec<Layer>,
}

pub fn encode_model(model: &ModelFile) -> Vec<u8> {
    let mut w = Writer::with_capacity(64);
    w.bytes(&MODEL_MAGIC);
    w.u16(VERSION);
    w.u16(model.flags);
    w.u16(model.layers.len() as u16);
    for layer in &model.layers {
        w.u32(layer.weight.nrows() as u32);
        w.u32(layer.weight.ncols() as u32);
        for &v in layer.weight.iter() {
            w.f32(v as f32);
        }
        for &v in layer.bias.iter() {
            w.f32(v as f32);
        }
    }
    w.finish()
}

pub fn decode_model(buf: &[u8]) -> Result<ModelFile> {
    let mut r = Reader::new(buf);
    let magic = r.magic()?;
    if magic != MODEL_MAGIC {
        return Err(Error::BadMagic {
            expected: MODEL_MAGIC,
            found: magic,
        });
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let flags = r.u16()?;
    if flags & !KNOWN_FLAGS != 0 {
        return Err(Error::BadFlags(flags));
    }
    let count = r.u16()? as usize;

    // Walk the layer headers once to learn the total size before trusting the payload.
    let mut expected: u64 = 4 + 2 + 2 + 2;
    let mut shapes = Vec::with_capacity(count);
    for _ in 0..count {
        let mut hdr = Reader::new(buf.get(expected as usize..).unwrap_or(&[]));
        let rows = hdr.u32().map_err(|_| truncated(expected + 8, buf))? as u64;
        let cols = hdr.u32().map_err(|_| truncated(expected + 8, buf))? as u64;
        shapes.push((rows as usize, cols as usize));
        expected += 8 + 4 * (rows * cols + rows);
    }
    check_length_and_checksum(buf, expected + 1)?;

    let mut layers = Vec::with_capacity(count);
    for (rows, cols) in shapes {
        r.u32()?;
        r.u32()?;
        let mut weight = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            weight.push(f64::from(r.f32()?));
        }
        let mut bias = Vec::with_capacity(rows);
        for _ in 0..rows {
            bias.push(f64::from(r.f32()?));
        }
        let weight = Array2::from_shape_vec((rows, cols), weight).expect("sized above");
        if let Some(pos) = weight.iter().chain(bias.iter()).position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: layers.len(),
                col: pos,
            });
        }
        layers.push(Layer {
            weight,
            bias: Array1::from(bias),
        });
    }
    Ok(ModelFile { flags, layers })
}

fn truncated(expected: u64, buf: &[u8]) -> Error {
    Error::Truncated {
        expected,
        found: buf.len() as u64,
    }
}

pub fn save_model(model: &ModelFile, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_model(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelFile> {
    let path = path.as_ref();
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&buf)
}

impl ModelFile {
    pub fn from_classifier(model: &Classifier) -> Self {
        let mut layers = model.extractor.layers().to_vec();
        layers.push(model.head.layer.clone());
        ModelFile {
            flags: FLAG_HEAD,
            layers,
        }
    }

    pub fn into_classifier(mut self) -> Result<Classifier> {
        if self.flags != FLAG_HEAD || self.layers.len() < 2 {
            return Err(Error::Config(
                "checkpoint does not hold an extractor plus classifier head".into(),
            ));
        }
        let head = SoftmaxHead {
            layer: self.layers.pop().expect("len >= 2"),
        };
        let extractor = Mlp::from_layers(self.layers)?;
        if head.feature_dim() != extractor.output_dim() {
            return Err(Error::Shape {
                context: "head input",
                expected: extractor.output_dim(),
                found: head.feature_dim(),
            });
        }
        Ok(Classifier { extractor, head })
    }

    pub fn from_extractor_bank(extractor: &Mlp, prototypes: &Array2<f64>) -> Self {
        let mut layers = extractor.layers().to_vec();
        layers.push(Layer {
            weight: prototypes.clone(),
            bias: Array1::zeros(prototypes.nrows()),
        });
        ModelFile {
            flags: FLAG_BANK,
            layers,
        }
    }

    pub fn into_extractor_bank(mut self) -> Result<(Mlp, Array2<f64>)> {
        if self.flags != FLAG_BANK || self.layers.len() < 2 {
            return Err(Error::Config(
                "checkpoint does not hold an extractor plus prototype bank".into(),
            ));
        }
        let bank = self.layers.pop().expect("len >= 2").weight;
        let extractor = Mlp::from_layers(self.layers)?;
        if bank.ncols() != extractor.output_dim() {
            return Err(Error::Shape {
                context: "prototype dimension",
                expected: extractor.output_dim(),
                found: bank.ncols(),
            });
        }
        Ok((extractor, bank))
    }

    pub fn from_centroids(centroids: &Array2<f64>) -> Self {
        ModelFile {
            flags: FLAG_CENTROIDS,
            layers: vec![Layer {
                weight: centroids.clone(),
                bias: Array1::zeros(centroids.nrows()),
            }],
        }
    }

    pub fn into_centroids(mut self) -> Result<Array2<f64>> {
        if self.flags != FLAG_CENTROIDS || self.layers.len() != 1 {
            return Err(Error::Config("checkpoint does not hold k-means centroids".into()));
        }
        Ok(self.layers.pop().expect("len 1").weight)
    }
}

pub fn save_classifier(model: &Classifier, path: impl AsRef<Path>) -> Result<()> {
    save_model(&ModelFile::from_classifier(model), path)
}

pub fn load_classifier(path: impl AsRef<Path>) -> Result<Classifier> {
    load_model(path)?.into_classifier()
}

pub fn save_extractor_bank(
    extractor: &Mlp,
    prototypes: &Array2<f64>,
    path: impl AsRef<Path>,
) -> Result<()> {
    save_model(&ModelFile::from_extractor_bank(extractor, prototypes), path)
}

pub fn load_extractor_bank(path: impl AsRef<Path>) -> Result<(Mlp, Array2<f64>)> {
    load_model(path)?.into_extractor_bank()
}
