//! Plain comma-separated text: no quoting, decimal floats, optional integer
//! label as the last column. LF and CRLF line endings are both accepted.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::FeatureSet;
use crate::error::{Error, Result};

pub fn parse_csv(text: &str, has_labels: bool) -> Result<FeatureSet> {
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut width: Option<usize> = None;
    let mut rows = 0;

    for (n, raw) in text.split('\n').enumerate() {
        let line_no = n + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        match width {
            None => width = Some(fields.len()),
            Some(w) if w != fields.len() => {
                return Err(Error::RaggedRow {
                    line: line_no,
                    expected: w,
                    found: fields.len(),
                })
            }
            _ => {}
        }
        let feature_fields = if has_labels {
            let (label, rest) = fields.split_last().expect("split yields at least one field");
            let y = label.parse::<usize>().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("label `{label}` is not a non-negative integer"),
            })?;
            labels.push(y);
            rest
        } else {
            &fields[..]
        };
        if feature_fields.is_empty() {
            return Err(Error::Parse {
                line: line_no,
                msg: "row has no feature columns".into(),
            });
        }
        for f in feature_fields {
            let v = f.parse::<f32>().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("`{f}` is not a number"),
            })?;
            values.push(v);
        }
        rows += 1;
    }

    if rows == 0 {
        return Err(Error::EmptyDataset);
    }
    let cols = values.len() / rows;
    let data = Array2::from_shape_vec((rows, cols), values).expect("rectangular by construction");
    FeatureSet::new(data, has_labels.then_some(labels))
}

pub fn load_csv(path: impl AsRef<Path>, has_labels: bool) -> Result<FeatureSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, has_labels)
}

/// Shortest round-tripping decimal for each value, labels appended when present.
pub fn write_csv(set: &FeatureSet) -> String {
    let mut out = String::new();
    for (i, row) in set.data().rows().into_iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{v:?}").expect("write to String");
        }
        if let Some(labels) = set.labels() {
            write!(out, ",{}", labels[i]).expect("write to String");
        }
        out.push('\n');
    }
    out
}

pub fn save_csv(set: &FeatureSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_csv(set)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn two_by_two() {
        let set = parse_csv("1.0,2.0\n3.0,4.0", false).unwrap();
        assert_eq!(set.data(), &array![[1.0f32, 2.0], [3.0, 4.0]]);
        assert!(set.labels().is_none());
    }

    #[test]
    fn label_column() {
        let set = parse_csv("1.0,2.0,0\n", true).unwrap();
        assert_eq!(set.data(), &array![[1.0f32, 2.0]]);
        assert_eq!(set.labels(), Some(&[0usize][..]));
    }

    #[test]
    fn ragged_row_reports_line() {
        match parse_csv("1.0\n1.0,2.0", false) {
            Err(Error::RaggedRow { line, expected, found }) => {
                assert_eq!((line, expected, found), (2, 1, 2));
            }
            other => panic!("expected ragged row, got {other:?}"),
        }
    }

    #[test]
    fn non_numeric_reports_line() {
        assert!(matches!(
            parse_csv("1.0,2.0\n3.0,abc\n", false),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_csv("1.0,x\n", true),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn crlf_accepted() {
        let set = parse_csv("1.5,2.5,1\r\n3.5,4.5,0\r\n", true).unwrap();
        assert_eq!(set.data(), &array![[1.5f32, 2.5], [3.5, 4.5]]);
        assert_eq!(set.labels(), Some(&[1usize, 0][..]));
    }

    #[test]
    fn write_then_parse_is_exact() {
        let set = FeatureSet::new(
            array![[0.1f32, -3.25e-7, 1.0e30], [f32::MIN_POSITIVE, -0.0, 7.0]],
            Some(vec![2, 5]),
        )
        .unwrap();
        let back = parse_csv(&write_csv(&set), true).unwrap();
        for (a, b) in set.data().iter().zip(back.data().iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(back.labels(), set.labels());
    }
}
