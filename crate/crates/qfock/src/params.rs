//! Shared parameter record for the deformation experiments.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fock::BlockSpec;

/// Default residual threshold applied where no identity-specific one exists.
pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum ParamError {
    #[error("deformation parameter q must be finite and positive, got {0}")]
    InvalidQ(f64),
    #[error("shift parameter u must be finite, got {0}")]
    InvalidU(f64),
    #[error("dimension must be at least {min}, got {got}")]
    DimensionTooSmall { min: usize, got: usize },
    #[error("interior block {k} exceeds half the dimension {dim}")]
    InteriorTooLarge { k: usize, dim: usize },
}

/// Control record for one deformation experiment: the deformation strength
/// `q`, the shift parameter `u`, the truncation dimension, the interior
/// block used for residual assertions, and the tolerances.
///
/// The interior block defaults to `dim / 4`: commutator residuals compound
/// the similarity inversion error with the flow's truncation spillover, and
/// a quarter-size block keeps both away from the asserted region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeformParams {
    pub q: f64,
    pub u: f64,
    pub dim: usize,
    pub interior: BlockSpec,
    pub residual_tol: f64,
    pub resonance_tol: f64,
}

impl DeformParams {
    pub fn new(q: f64, u: f64, dim: usize) -> Result<Self, ParamError> {
        if !q.is_finite() || q <= 0.0 {
            return Err(ParamError::InvalidQ(q));
        }
        if !u.is_finite() {
            return Err(ParamError::InvalidU(u));
        }
        if dim < 4 {
            return Err(ParamError::DimensionTooSmall { min: 4, got: dim });
        }
        let k = (dim / 4).max(1);
        Ok(Self {
            q,
            u,
            dim,
            interior: BlockSpec::new(k).expect("dim/4 block is valid"),
            residual_tol: DEFAULT_RESIDUAL_TOL,
            resonance_tol: resonance_tolerance(q, u, dim),
        })
    }

    /// Replace the interior block; it may not exceed `dim / 2`.
    pub fn with_interior(mut self, k: usize) -> Result<Self, ParamError> {
        if k == 0 || k > self.dim / 2 {
            return Err(ParamError::InteriorTooLarge { k, dim: self.dim });
        }
        self.interior = BlockSpec::new(k).expect("nonzero block");
        Ok(self)
    }

    pub fn with_residual_tol(mut self, tol: f64) -> Self {
        self.residual_tol = tol;
        self
    }

    /// True for the `q = 1, u = 0` branch where the map degenerates to the
    /// identity.
    pub fn is_trivial(&self) -> bool {
        self.q == 1.0 && self.u == 0.0
    }
}

/// Scale below which a recurrence denominator `2(n - mq) - u^2` counts as
/// resonant. Resonances are logged, never fatal: the forward recurrence does
/// not divide by this quantity.
pub fn resonance_tolerance(q: f64, u: f64, dim: usize) -> f64 {
    1e-9 * (1.0 + u * u + 2.0 * dim as f64 * q)
}
