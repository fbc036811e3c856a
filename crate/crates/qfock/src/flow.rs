//! One-parameter unitary flows `exp(i s G)` for Hermitian generators, and
//! the momentum-generated displacement family used by the main pipeline.
//!
//! Two exponentiation routes ship: a Pade scaling-and-squaring kernel for
//! general matrices and a Hermitian eigendecomposition route. Each serves
//! as the cross-check oracle of the other; the eigendecomposition is the
//! default since every generator here is exactly Hermitian.

use num_complex::Complex64;
use thiserror::Error;

use crate::fock::{self, c, hermitian_defect, max_abs, CMat, FockError, FockMatrix};

/// Generators must be Hermitian within this max-abs defect.
pub const HERMITIAN_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("generator is not Hermitian: defect {defect:.3e} exceeds {tol:.1e}")]
    NonHermitian { defect: f64, tol: f64 },
    #[error("rational approximant solve failed; matrix numerically singular")]
    ApproximantSingular,
    #[error(transparent)]
    Fock(#[from] FockError),
}

/// Which exponentiation kernel to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpMethod {
    /// Diagonalize the Hermitian generator and exponentiate its spectrum.
    HermitianEigen,
    /// Pade(13) rational approximant with scaling and squaring.
    PadeScalingSquaring,
}

/// A point `T = exp(i u G)` on a one-parameter unitary group, with its
/// generator and the measured unitarity defect `max-abs(T^+ T - I)`.
#[derive(Debug, Clone)]
pub struct UnitaryFlow {
    generator: FockMatrix,
    parameter: f64,
    matrix: FockMatrix,
    unitarity_defect: f64,
}

impl UnitaryFlow {
    pub fn generator(&self) -> &FockMatrix {
        &self.generator
    }

    pub fn parameter(&self) -> f64 {
        self.parameter
    }

    pub fn matrix(&self) -> &FockMatrix {
        &self.matrix
    }

    pub fn unitarity_defect(&self) -> f64 {
        self.unitarity_defect
    }

    /// `T^+`, which equals the group inverse for a unitary flow point.
    pub fn inverse(&self) -> FockMatrix {
        self.matrix.adjoint()
    }
}

/// `exp(i s G)` by the default (eigendecomposition) route.
pub fn exponentiate(g: &FockMatrix, s: f64) -> Result<FockMatrix, FlowError> {
    exponentiate_with(g, s, ExpMethod::HermitianEigen)
}

/// `exp(i s G)` by the chosen kernel; rejects non-Hermitian generators.
pub fn exponentiate_with(g: &FockMatrix, s: f64, method: ExpMethod) -> Result<FockMatrix, FlowError> {
    let defect = hermitian_defect(g.raw());
    if defect > HERMITIAN_TOL {
        return Err(FlowError::NonHermitian {
            defect,
            tol: HERMITIAN_TOL,
        });
    }
    let m = match method {
        ExpMethod::HermitianEigen => HermitianExp::new(g.raw().clone()).unitary(s),
        ExpMethod::PadeScalingSquaring => {
            let scaled = g.raw() * Complex64::new(0.0, s);
            expm(&scaled).ok_or(FlowError::ApproximantSingular)?
        }
    };
    Ok(FockMatrix::new(format!("exp(i*{s}*{})", g.label()), m)?)
}

/// Momentum-generated displacement `T(u) = exp(i u P)` at dimension `d`.
pub fn displacement(u: f64, d: usize) -> Result<UnitaryFlow, FlowError> {
    let p = fock::momentum(d)?;
    let t = exponentiate(&p, u)?.relabel(format!("T({u})"));
    let defect = max_abs(&(t.raw().adjoint() * t.raw() - CMat::identity(d, d)));
    Ok(UnitaryFlow {
        generator: p,
        parameter: u,
        matrix: t,
        unitarity_defect: defect,
    })
}

/// Right-hand side of the number-operator conjugation identity, assembled
/// directly: `N + u Q + (u^2/2) I`. No exponentials involved.
pub fn conjugated_number_analytic(u: f64, d: usize) -> Result<FockMatrix, FlowError> {
    let n = fock::number(d)?;
    let q = fock::position(d)?;
    let m = n.raw() + q.raw() * c(u) + CMat::identity(d, d) * c(0.5 * u * u);
    Ok(FockMatrix::new("N+uQ+u^2/2", m)?)
}

/// Cached Hermitian eigendecomposition; `unitary(s)` is then cheap for many
/// values of `s`, which the dynamics module exploits.
pub struct HermitianExp {
    vectors: CMat,
    values: Vec<f64>,
}

impl HermitianExp {
    pub fn new(g: CMat) -> Self {
        let eig = g.symmetric_eigen();
        Self {
            values: eig.eigenvalues.iter().copied().collect(),
            vectors: eig.eigenvectors,
        }
    }

    /// `exp(i s G) = V exp(i s Lambda) V^+`.
    pub fn unitary(&self, s: f64) -> CMat {
        let d = self.values.len();
        let mut phased = self.vectors.clone();
        for (j, lambda) in self.values.iter().enumerate() {
            let phase = Complex64::new(0.0, s * lambda).exp();
            for i in 0..d {
                phased[(i, j)] *= phase;
            }
        }
        &phased * self.vectors.adjoint()
    }
}

// Pade(13) numerator/denominator coefficients.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

const PADE13_THETA: f64 = 5.371920351148152;

/// Matrix exponential of a general complex matrix by Pade(13) with scaling
/// and squaring. Returns `None` if the denominator solve breaks down.
pub fn expm(a: &CMat) -> Option<CMat> {
    let d = a.nrows();
    let norm = one_norm(a);
    let squarings = if norm > PADE13_THETA {
        (norm / PADE13_THETA).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a * c(0.5f64.powi(squarings as i32));

    let eye = CMat::identity(d, d);
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;

    let w1 = &a6 * c(PADE13[13]) + &a4 * c(PADE13[11]) + &a2 * c(PADE13[9]);
    let w2 = &w1 * &a6 + &a6 * c(PADE13[7]) + &a4 * c(PADE13[5]) + &a2 * c(PADE13[3]) + &eye * c(PADE13[1]);
    let u = &scaled * &w2;

    let z1 = &a6 * c(PADE13[12]) + &a4 * c(PADE13[10]) + &a2 * c(PADE13[8]);
    let v = &z1 * &a6 + &a6 * c(PADE13[6]) + &a4 * c(PADE13[4]) + &a2 * c(PADE13[2]) + &eye * c(PADE13[0]);

    let numerator = &v + &u;
    let denominator = &v - &u;
    let mut x = denominator.lu().solve(&numerator)?;
    for _ in 0..squarings {
        x = &x * &x;
    }
    Some(x)
}

fn one_norm(a: &CMat) -> f64 {
    let mut best = 0.0f64;
    for j in 0..a.ncols() {
        let mut sum = 0.0;
        for i in 0..a.nrows() {
            sum += a[(i, j)].norm();
        }
        best = best.max(sum);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{annihilation, block_residual_raw, momentum, number, position, ResidualNorm};

    fn agree(a: &CMat, b: &CMat, tol: f64, what: &str) {
        let diff = max_abs(&(a - b));
        assert!(diff < tol, "{what}: max-abs diff {diff:.3e} >= {tol:.1e}");
    }

    #[test]
    fn zero_parameter_gives_identity() {
        let p = momentum(8).unwrap();
        for method in [ExpMethod::HermitianEigen, ExpMethod::PadeScalingSquaring] {
            let t = exponentiate_with(&p, 0.0, method).unwrap();
            agree(t.raw(), &CMat::identity(8, 8), 1e-13, "T(0)");
        }
    }

    #[test]
    fn rejects_non_hermitian_generator() {
        let a = annihilation(4).unwrap();
        assert!(matches!(
            exponentiate(&a, 1.0),
            Err(FlowError::NonHermitian { .. })
        ));
    }

    #[test]
    fn two_level_momentum_closed_form() {
        // P at D=2 squares to I/2, so exp(i s P) = cos(s/sqrt2) I at
        // s = pi*sqrt2 the flow lands on -I. Both kernels must hit it.
        let p = momentum(2).unwrap();
        let s = std::f64::consts::PI * std::f64::consts::SQRT_2;
        let minus_eye = CMat::identity(2, 2) * c(-1.0);
        let eig = exponentiate_with(&p, s, ExpMethod::HermitianEigen).unwrap();
        let pade = exponentiate_with(&p, s, ExpMethod::PadeScalingSquaring).unwrap();
        agree(eig.raw(), &minus_eye, 1e-12, "eigen route");
        agree(pade.raw(), &minus_eye, 1e-12, "pade route");
        agree(eig.raw(), pade.raw(), 1e-12, "cross-check");
    }

    #[test]
    fn group_law_on_a_fixed_generator() {
        let d = 16;
        let p = momentum(d).unwrap();
        let t1 = exponentiate(&p, 0.3).unwrap();
        let t2 = exponentiate(&p, 0.4).unwrap();
        let t3 = exponentiate(&p, 0.7).unwrap();
        agree(&(t1.raw() * t2.raw()), t3.raw(), 1e-12, "group law");
    }

    #[test]
    fn inverse_is_adjoint() {
        let flow = displacement(1.3, 24).unwrap();
        let back = displacement(-1.3, 24).unwrap();
        agree(
            &flow.matrix().raw().adjoint(),
            back.matrix().raw(),
            1e-12,
            "T(u)^+ vs T(-u)",
        );
    }

    #[test]
    fn displacement_records_unitarity() {
        let flow = displacement(0.0, 8).unwrap();
        agree(flow.matrix().raw(), &CMat::identity(8, 8), 1e-13, "T(0)");
        for u in [0.5, 2.0, 4.0] {
            let f = displacement(u, 32).unwrap();
            assert!(
                f.unitarity_defect() < 1e-10,
                "u={u}: defect {}",
                f.unitarity_defect()
            );
        }
    }

    #[test]
    fn position_shift_under_conjugation() {
        // T Q T^-1 = Q + uI on the interior block.
        let d = 64;
        let u = 1.0;
        let flow = displacement(u, d).unwrap();
        let q = position(d).unwrap();
        let lhs = flow.matrix().raw() * q.raw() * flow.inverse().raw();
        let rhs = q.raw() + CMat::identity(d, d) * c(u);
        let res = block_residual_raw(&lhs, &rhs, 32, ResidualNorm::MaxAbs);
        assert!(res < 1e-8, "residual {res:.3e}");
    }

    #[test]
    fn flow_commutes_with_its_generator() {
        let d = 64;
        let flow = displacement(1.0, d).unwrap();
        let p = momentum(d).unwrap();
        let lhs = flow.matrix().raw() * p.raw();
        let rhs = p.raw() * flow.matrix().raw();
        agree(&lhs, &rhs, 1e-12, "T P vs P T");
    }

    #[test]
    fn number_conjugation_matches_analytic_form() {
        let d = 64;
        let u = 1.0;
        let flow = displacement(u, d).unwrap();
        let n = number(d).unwrap();
        let lhs = flow.matrix().raw() * n.raw() * flow.matrix().raw().adjoint();
        let rhs = conjugated_number_analytic(u, d).unwrap();
        let res = block_residual_raw(&lhs, rhs.raw(), 32, ResidualNorm::MaxAbs);
        assert!(res < 1e-8, "residual {res:.3e}");
        // Top-left entry is forced to u^2/2 by the matrix structure.
        assert!((rhs.entry(0, 0) - c(0.5 * u * u)).norm() < 1e-15);
        let at_zero = conjugated_number_analytic(0.0, 8).unwrap();
        agree(at_zero.raw(), number(8).unwrap().raw(), 0.0 + 1e-15, "u=0");
    }

    #[test]
    fn kernels_agree_on_momentum_generators() {
        for (d, s) in [(8usize, 0.9), (24, 0.5), (48, 0.25)] {
            let p = momentum(d).unwrap();
            let eig = exponentiate_with(&p, s, ExpMethod::HermitianEigen).unwrap();
            let pade = exponentiate_with(&p, s, ExpMethod::PadeScalingSquaring).unwrap();
            agree(eig.raw(), pade.raw(), 1e-11, "kernel agreement");
        }
    }
}
