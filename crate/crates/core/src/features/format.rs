//! CLUP binary matrix container.
//!
//! ```text
//! magic   "CLUP"            4 bytes
//! version u16 = 1
//! flags   u16               bit 0: labels present, other bits zero
//! rows    u64
//! cols    u64
//! payload rows*cols f32     row-major
//! labels  rows u32          only when flag bit 0 is set
//! check   u8                XOR of all preceding bytes
//! ```
//! All integers and floats are little-endian.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::FeatureSet;
use crate::codec::{check_length_and_checksum, Reader, Writer};
use crate::error::{Error, Result};

pub const MATRIX_MAGIC: [u8; 4] = *b"CLUP";
const VERSION: u16 = 1;
const FLAG_LABELS: u16 = 1;
const HEADER_LEN: u64 = 4 + 2 + 2 + 8 + 8;

pub fn encode_matrix(set: &FeatureSet) -> Vec<u8> {
    let (rows, cols) = (set.rows(), set.cols());
    let has_labels = set.labels().is_some();
    let len = HEADER_LEN as usize + rows * cols * 4 + if has_labels { rows * 4 } else { 0 } + 1;
    let mut w = Writer::with_capacity(len);
    w.bytes(&MATRIX_MAGIC);
    w.u16(VERSION);
    w.u16(if has_labels { FLAG_LABELS } else { 0 });
    w.u64(rows as u64);
    w.u64(cols as u64);
    for v in set.data().iter() {
        w.f32(*v);
    }
    if let Some(labels) = set.labels() {
        for &y in labels {
            w.u32(y as u32);
        }
    }
    w.finish()
}

pub fn decode_matrix(buf: &[u8]) -> Result<FeatureSet> {
    let mut r = Reader::new(buf);
    let magic = r.magic()?;
    if magic != MATRIX_MAGIC {
        return Err(Error::BadMagic {
            expected: MATRIX_MAGIC,
            found: magic,
        });
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let flags = r.u16()?;
    if flags & !FLAG_LABELS != 0 {
        return Err(Error::BadFlags(flags));
    }
    let has_labels = flags & FLAG_LABELS != 0;
    let rows = r.u64()?;
    let cols = r.u64()?;
    let cells = rows.checked_mul(cols).ok_or(Error::Truncated {
        expected: u64::MAX,
        found: buf.len() as u64,
    })?;
    let expected = cells
        .checked_mul(4)
        .and_then(|p| p.checked_add(if has_labels { rows.checked_mul(4)? } else { 0 }))
        .and_then(|p| p.checked_add(HEADER_LEN + 1))
        .ok_or(Error::Truncated {
            expected: u64::MAX,
            found: buf.len() as u64,
        })?;
    check_length_and_checksum(buf, expected)?;

    let (rows, cols) = (rows as usize, cols as usize);
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        data.push(r.f32()?);
    }
    let labels = if has_labels {
        let mut l = Vec::with_capacity(rows);
        for _ in 0..rows {
            l.push(r.u32()? as usize);
        }
        Some(l)
    } else {
        None
    };
    let data = Array2::from_shape_vec((rows, cols), data).map_err(|_| Error::EmptyDataset)?;
    FeatureSet::new(data, labels)
}

pub fn save_matrix(set: &FeatureSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_matrix(set)).map_err(|e| Error::io(path, e))
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<FeatureSet> {
    let path = path.as_ref();
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_matrix(&buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn unlabelled(data: Array2<f32>) -> FeatureSet {
        FeatureSet::new(data, None).unwrap()
    }

    #[test]
    fn one_by_one_is_29_bytes() {
        let bytes = encode_matrix(&unlabelled(array![[0.0f32]]));
        assert_eq!(bytes.len(), 29);
        assert_eq!(&bytes[..4], &[0x43, 0x4C, 0x55, 0x50]);
        assert_eq!(&bytes[4..6], &[1, 0]);
        assert_eq!(&bytes[6..8], &[0, 0]);
        let xor = bytes[..28].iter().fold(0u8, |a, b| a ^ b);
        assert_eq!(bytes[28], xor);
    }

    #[test]
    fn labels_set_flag_and_block() {
        let set = FeatureSet::new(array![[1.0f32, 2.0], [3.0, 4.0]], Some(vec![1, 0])).unwrap();
        let bytes = encode_matrix(&set);
        assert_eq!(bytes[6] & 1, 1);
        assert_eq!(bytes.len(), 24 + 16 + 8 + 1);
        assert_eq!(&bytes[40..44], &1u32.to_le_bytes());
        assert_eq!(decode_matrix(&bytes).unwrap(), set);
    }

    #[test]
    fn bad_magic() {
        let mut bytes = encode_matrix(&unlabelled(array![[1.0f32]]));
        bytes[..4].copy_from_slice(b"XXXX");
        assert!(matches!(decode_matrix(&bytes), Err(Error::BadMagic { .. })));
    }

    #[test]
    fn truncated_mid_payload() {
        let bytes = encode_matrix(&unlabelled(array![[1.0f32, 2.0, 3.0]]));
        assert!(matches!(
            decode_matrix(&bytes[..30]),
            Err(Error::Truncated { .. })
        ));
        assert!(matches!(
            decode_matrix(&bytes[..10]),
            Err(Error::Truncated { .. })
        ));
    }

    #[test]
    fn checksum_flip() {
        let mut bytes = encode_matrix(&unlabelled(array![[1.0f32, 2.0]]));
        bytes[26] ^= 0x10;
        assert!(matches!(
            decode_matrix(&bytes),
            Err(Error::ChecksumMismatch { .. })
        ));
    }

    #[test]
    fn unknown_flags_and_version() {
        let mut bytes = encode_matrix(&unlabelled(array![[1.0f32]]));
        bytes[6] = 2;
        assert!(matches!(decode_matrix(&bytes), Err(Error::BadFlags(2))));
        let mut bytes = encode_matrix(&unlabelled(array![[1.0f32]]));
        bytes[4] = 9;
        assert!(matches!(
            decode_matrix(&bytes),
            Err(Error::UnsupportedVersion(9))
        ));
    }

    #[test]
    fn non_finite_payload_rejected() {
        // Build by hand: FeatureSet::new refuses NaN so the encoder cannot produce it.
        let mut w = Writer::with_capacity(29);
        w.bytes(&MATRIX_MAGIC);
        w.u16(1);
        w.u16(0);
        w.u64(1);
        w.u64(1);
        w.f32(f32::NAN);
        let bytes = w.finish();
        assert!(matches!(
            decode_matrix(&bytes),
            Err(Error::NonFinite { row: 0, col: 0 })
        ));
    }
}
