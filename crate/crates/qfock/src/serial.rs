//! Matrix file format shared with the CLI: a structured-text (JSON)
//! document with the dimension, operator label, and row-major real and
//! imaginary parts. The JSON float printer emits shortest round-trip
//! decimals, so values survive a write/read cycle bit-exactly.

use std::fs;
use std::io;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fock::{CMat, FockError, FockMatrix};

#[derive(Debug, Error)]
pub enum SerialError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("malformed matrix document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("document shape does not match dim = {dim}: row {row} has {got} entries")]
    Shape { dim: usize, row: usize, got: usize },
    #[error(transparent)]
    Fock(#[from] FockError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixDocument {
    pub dim: usize,
    pub label: String,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl MatrixDocument {
    pub fn from_matrix(m: &FockMatrix) -> Self {
        let d = m.dim();
        let part = |im: bool| -> Vec<Vec<f64>> {
            (0..d)
                .map(|i| {
                    (0..d)
                        .map(|j| {
                            let v = m.entry(i, j);
                            if im {
                                v.im
                            } else {
                                v.re
                            }
                        })
                        .collect()
                })
                .collect()
        };
        Self {
            dim: d,
            label: m.label().to_string(),
            re: part(false),
            im: part(true),
        }
    }

    pub fn into_matrix(self) -> Result<FockMatrix, SerialError> {
        let d = self.dim;
        for (name, part) in [("re", &self.re), ("im", &self.im)] {
            if part.len() != d {
                return Err(SerialError::Shape {
                    dim: d,
                    row: part.len(),
                    got: 0,
                });
            }
            for (row, r) in part.iter().enumerate() {
                if r.len() != d {
                    return Err(SerialError::Shape {
                        dim: d,
                        row,
                        got: r.len(),
                    });
                }
            }
            let _ = name;
        }
        let mut m = CMat::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] = Complex64::new(self.re[i][j], self.im[i][j]);
            }
        }
        Ok(FockMatrix::new(self.label, m)?)
    }
}

pub fn write_matrix(path: &Path, m: &FockMatrix) -> Result<(), SerialError> {
    let doc = MatrixDocument::from_matrix(m);
    let text = serde_json::to_string_pretty(&doc)?;
    fs::write(path, text)?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<FockMatrix, SerialError> {
    let text = fs::read_to_string(path)?;
    let doc: MatrixDocument = serde_json::from_str(&text)?;
    doc.into_matrix()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::displacement;

    #[test]
    fn round_trip_is_exact() {
        let dir = std::env::temp_dir().join("qfock-serial-test");
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("t.json");
        let t = displacement(0.9, 12).unwrap().matrix().clone();
        write_matrix(&path, &t).unwrap();
        let back = read_matrix(&path).unwrap();
        assert_eq!(back.dim(), 12);
        assert_eq!(back.label(), t.label());
        for i in 0..12 {
            for j in 0..12 {
                assert_eq!(back.entry(i, j), t.entry(i, j), "entry ({i}, {j})");
            }
        }
    }

    #[test]
    fn rejects_ragged_documents() {
        let doc = MatrixDocument {
            dim: 2,
            label: "x".into(),
            re: vec![vec![1.0, 2.0], vec![3.0]],
            im: vec![vec![0.0; 2]; 2],
        };
        assert!(matches!(doc.into_matrix(), Err(SerialError::Shape { .. })));
    }

    #[test]
    fn rejects_non_finite_entries() {
        let doc = MatrixDocument {
            dim: 1,
            label: "x".into(),
            re: vec![vec![f64::INFINITY]],
            im: vec![vec![0.0]],
        };
        assert!(matches!(doc.into_matrix(), Err(SerialError::Fock(_))));
    }
}
