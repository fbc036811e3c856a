//! Truncated Fock-space operator matrices and the residual conventions
//! shared by every other module.
//!
//! The truncation is a hard cutoff: the raising operator annihilates the top
//! basis state `|D-1>`. Every identity that the cutoff corrupts therefore
//! fails only in the last row/column, and residual assertions are always
//! made over a stated leading block.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Dense complex matrix used throughout the crate.
pub type CMat = DMatrix<Complex64>;

#[derive(Debug, Error, PartialEq)]
pub enum FockError {
    #[error("dimension must be at least {min}, got {got}")]
    DimensionTooSmall { min: usize, got: usize },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix `{label}` has a non-finite entry at ({row}, {col})")]
    NonFinite {
        label: String,
        row: usize,
        col: usize,
    },
    #[error("block size {k} exceeds matrix dimension {dim}")]
    BlockTooLarge { k: usize, dim: usize },
    #[error("block size must be positive")]
    EmptyBlock,
}

/// Square complex matrix on the truncated Fock basis `|0> ... |D-1>`,
/// carrying an operator label for reports and dumps.
///
/// Construction rejects non-square shapes and non-finite entries, so a
/// `FockMatrix` is always safe to feed into residual arithmetic.
#[derive(Debug, Clone, PartialEq)]
pub struct FockMatrix {
    label: String,
    m: CMat,
}

impl FockMatrix {
    pub fn new(label: impl Into<String>, m: CMat) -> Result<Self, FockError> {
        let label = label.into();
        if m.nrows() != m.ncols() {
            return Err(FockError::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let v = m[(i, j)];
                if !v.re.is_finite() || !v.im.is_finite() {
                    return Err(FockError::NonFinite {
                        label,
                        row: i,
                        col: j,
                    });
                }
            }
        }
        Ok(Self { label, m })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            label: "I".to_string(),
            m: CMat::identity(d, d),
        }
    }

    pub fn zeros(d: usize) -> Self {
        Self {
            label: "0".to_string(),
            m: CMat::zeros(d, d),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.m[(row, col)]
    }

    /// Borrow the underlying matrix for arithmetic.
    pub fn raw(&self) -> &CMat {
        &self.m
    }

    pub fn into_raw(self) -> CMat {
        self.m
    }

    pub fn relabel(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self {
            label: format!("{}^+", self.label),
            m: self.m.adjoint(),
        }
    }
}

/// Leading sub-block over which a residual is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpec {
    k: usize,
}

impl BlockSpec {
    pub fn new(k: usize) -> Result<Self, FockError> {
        if k == 0 {
            return Err(FockError::EmptyBlock);
        }
        Ok(Self { k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    fn check(&self, dim: usize) -> Result<(), FockError> {
        if self.k > dim {
            return Err(FockError::BlockTooLarge { k: self.k, dim });
        }
        Ok(())
    }
}

/// Norm used when reporting a residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResidualNorm {
    /// Largest entry modulus; the default because tolerance statements stay
    /// entrywise-interpretable.
    MaxAbs,
    /// Largest singular value.
    Spectral,
}

impl ResidualNorm {
    pub fn name(&self) -> &'static str {
        match self {
            ResidualNorm::MaxAbs => "max-abs",
            ResidualNorm::Spectral => "spectral",
        }
    }
}

fn check_dim(d: usize) -> Result<(), FockError> {
    if d < 2 {
        return Err(FockError::DimensionTooSmall { min: 2, got: d });
    }
    Ok(())
}

/// Lowering operator: entry `(m, m+1) = sqrt(m+1)`.
pub fn annihilation(d: usize) -> Result<FockMatrix, FockError> {
    check_dim(d)?;
    let mut m = CMat::zeros(d, d);
    for row in 0..d - 1 {
        m[(row, row + 1)] = Complex64::new(((row + 1) as f64).sqrt(), 0.0);
    }
    Ok(FockMatrix { label: "a".into(), m })
}

/// Raising operator: transpose of [`annihilation`]. The hard cutoff sends
/// the top state `|D-1>` to zero.
pub fn creation(d: usize) -> Result<FockMatrix, FockError> {
    let a = annihilation(d)?;
    Ok(FockMatrix {
        label: "a^+".into(),
        m: a.m.transpose(),
    })
}

/// Number operator `diag(0, 1, ..., D-1)`, exact on the truncation.
pub fn number(d: usize) -> Result<FockMatrix, FockError> {
    check_dim(d)?;
    let mut m = CMat::zeros(d, d);
    for i in 0..d {
        m[(i, i)] = Complex64::new(i as f64, 0.0);
    }
    Ok(FockMatrix { label: "N".into(), m })
}

/// Position operator `(a + a^+)/sqrt(2)`; real symmetric.
pub fn position(d: usize) -> Result<FockMatrix, FockError> {
    let a = annihilation(d)?;
    let m = (&a.m + a.m.transpose()) * Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    Ok(FockMatrix { label: "Q".into(), m })
}

/// Momentum operator `i (a^+ - a)/sqrt(2)`; Hermitian with imaginary entries.
pub fn momentum(d: usize) -> Result<FockMatrix, FockError> {
    let a = annihilation(d)?;
    let m = (a.m.transpose() - &a.m) * Complex64::new(0.0, std::f64::consts::FRAC_1_SQRT_2);
    Ok(FockMatrix { label: "P".into(), m })
}

/// `[X, Y] = XY - YX`.
pub fn commutator(x: &FockMatrix, y: &FockMatrix) -> Result<FockMatrix, FockError> {
    if x.dim() != y.dim() {
        return Err(FockError::DimensionMismatch {
            left: x.dim(),
            right: y.dim(),
        });
    }
    Ok(FockMatrix {
        label: format!("[{}, {}]", x.label, y.label),
        m: commutator_raw(&x.m, &y.m),
    })
}

pub(crate) fn commutator_raw(x: &CMat, y: &CMat) -> CMat {
    x * y - y * x
}

/// Norm of `X - Y` restricted to the leading `K x K` block.
pub fn block_residual(
    x: &FockMatrix,
    y: &FockMatrix,
    block: BlockSpec,
    norm: ResidualNorm,
) -> Result<f64, FockError> {
    if x.dim() != y.dim() {
        return Err(FockError::DimensionMismatch {
            left: x.dim(),
            right: y.dim(),
        });
    }
    block.check(x.dim())?;
    Ok(block_residual_raw(&x.m, &y.m, block.k, norm))
}

/// [`block_residual`] for raw matrices; callers guarantee `k <= dim`.
pub fn block_residual_raw(x: &CMat, y: &CMat, k: usize, norm: ResidualNorm) -> f64 {
    let diff = x.view((0, 0), (k, k)) - y.view((0, 0), (k, k));
    match norm {
        ResidualNorm::MaxAbs => max_abs(&diff),
        ResidualNorm::Spectral => {
            let sv = diff.svd(false, false).singular_values;
            sv.iter().fold(0.0f64, |acc, s| acc.max(*s))
        }
    }
}

/// Largest entry modulus.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0f64, |acc, v| acc.max(v.norm()))
}

/// Largest singular value.
pub fn spectral_norm(m: &CMat) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    sv.iter().fold(0.0f64, |acc, s| acc.max(*s))
}

/// Max-abs of `M - M^+`; zero exactly when `M` is Hermitian.
pub fn hermitian_defect(m: &CMat) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub(crate) fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}
