//! Truncated Fock-space realization of a non-canonical operator map.
//!
//! The crate builds the ladder operators `a`, `a^+`, `N`, `Q`, `P` on a
//! D-dimensional Fock truncation, the momentum-generated displacement flow
//! `T(u) = exp(iuP)`, and an invertible but non-unitary similarity operator
//! `S` constructed column-by-column from a three-term recurrence, so that
//! the mapped pair `A = S a T^+`, `B = T a^+ S^-1` satisfies
//!
//! ```text
//! [A, B] = I + (q - 1) N
//! ```
//!
//! up to quantified truncation residuals. Around that core it ships the
//! position-space ODE study of the similarity as a multiplication operator,
//! the modified equations of motion under time-dependent `(S(t), T(t))`
//! with a Green-function reconstruction, and serialization for the CLI.
//!
//! Every identity is checked as a numerical residual over a stated leading
//! block; truncation artifacts of well-behaved identities are confined to
//! the last row/column by the hard-cutoff convention. The similarity
//! itself is severely ill-conditioned for `q != 1` (condition number
//! growing like `10^(0.8 D)`), so inversion-touching arithmetic runs on an
//! extended-precision kernel and the binary64 matrices exposed publicly
//! are projections of those results; see [`multiprec`] and the module docs
//! of [`similarity`] for the contract details.

pub mod algebra;
pub mod dynamics;
pub mod fock;
pub mod flow;
pub mod multiprec;
pub mod params;
pub mod position;
pub mod serial;
pub mod similarity;

pub use fock::{BlockSpec, CMat, FockError, FockMatrix, ResidualNorm};
pub use params::{DeformParams, ParamError};
