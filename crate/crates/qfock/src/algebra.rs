//! Assembly of the mapped pair `A = S a T^+`, `B = T a^+ S^-1` and the
//! bracket functions of the deformed algebra.
//!
//! The pair is built at extended precision because every product through
//! `S^-1` cancels across the similarity's huge dynamic range; the exported
//! matrices are binary64 projections. Verification residuals are computed
//! at extended precision and reported as binary64 numbers: they are the
//! true values of the truncated operators, including the cutoff defect that
//! the inverse amplifies into the interior for `q != 1` (see
//! [`PairVerification::commutator_vs_deformed`]).

use thiserror::Error;

use crate::flow::UnitaryFlow;
use crate::fock::{c, CMat, FockError, FockMatrix};
use crate::multiprec::{
    mp_deformed_target, mp_flow, mp_ladder, MpMat,
};
use crate::params::DeformParams;
use crate::similarity::{invert_mp, SimilarityError, SimilaritySolution};

#[derive(Debug, Error)]
pub enum AlgebraError {
    #[error("similarity solution is for u = {sol_u} but the flow carries u = {flow_u}")]
    ParameterMismatch { sol_u: f64, flow_u: f64 },
    #[error("dimension mismatch: similarity {sol_dim} vs flow {flow_dim}")]
    DimensionMismatch { sol_dim: usize, flow_dim: usize },
    #[error("bracket [{n}] = {value} is negative; the ladder map is undefined")]
    NegativeBracket { n: u32, value: f64 },
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
    #[error(transparent)]
    Fock(#[from] FockError),
}

/// The mapped, mutually non-adjoint pair with its verification engine.
#[derive(Debug)]
pub struct DeformedPair {
    lowering: FockMatrix,
    raising: FockMatrix,
    params: DeformParams,
    adjoint_defect: f64,
    mp: PairEngine,
}

#[derive(Debug)]
struct PairEngine {
    s: MpMat,
    s_inv: MpMat,
    t: MpMat,
    big_a: MpMat,
    big_b: MpMat,
}

/// Residuals of the identity chain, measured max-abs on the interior block.
/// All values are exact up to working precision; for `q != 1` the two
/// commutator rows carry the intrinsic truncation defect
/// `D |S[:,D-1]><S^-1[D-1,:]|`, which grows with dimension instead of
/// shrinking and is the quantitative face of the spectral obstruction to a
/// bounded similarity.
#[derive(Debug, Clone, serde::Serialize)]
pub struct PairVerification {
    pub block: usize,
    /// `|[A,B] - (I + (q-1)N)|`
    pub commutator_vs_deformed: f64,
    /// `|[A,B] - (I + S N S^-1 - T N T^+)|`
    pub commutator_vs_split: f64,
    /// `|S N S^-1 - T N T^+ - (q-1)N|`
    pub conjugation: f64,
    /// `|S^-1 A T - a|`
    pub invert_lowering: f64,
    /// `|T^+ B S - a^+|`
    pub invert_raising: f64,
    /// `|B - A^+|`
    pub adjoint_defect: f64,
}

impl DeformedPair {
    /// `A = S a T^+` (binary64 projection).
    pub fn lowering(&self) -> &FockMatrix {
        &self.lowering
    }

    /// `B = T a^+ S^-1` (binary64 projection).
    pub fn raising(&self) -> &FockMatrix {
        &self.raising
    }

    pub fn params(&self) -> &DeformParams {
        &self.params
    }

    /// `|B - A^+|` max-abs on the interior block. Zero on the trivial
    /// branch; large for `q != 1`, where `B` fails to be the adjoint of `A`
    /// by construction.
    pub fn adjoint_defect(&self) -> f64 {
        self.adjoint_defect
    }
}

/// Build the pair from a solved similarity and the displacement flow.
pub fn build_pair(
    params: &DeformParams,
    sol: &SimilaritySolution,
    flow: &UnitaryFlow,
) -> Result<DeformedPair, AlgebraError> {
    let d = sol.dim();
    if flow.matrix().dim() != d {
        return Err(AlgebraError::DimensionMismatch {
            sol_dim: d,
            flow_dim: flow.matrix().dim(),
        });
    }
    if flow.parameter() != sol.u() {
        return Err(AlgebraError::ParameterMismatch {
            sol_u: sol.u(),
            flow_u: flow.parameter(),
        });
    }

    let s = sol.mp_s().clone();
    let (s_inv, _certificate) = invert_mp(sol)?;
    let p = s.precision();
    let t = mp_flow(sol.u(), d, p);
    let (a, adag, _) = mp_ladder(d, p);

    let big_a = s.mul(&a).mul(&t.transpose());
    let big_b = t.mul(&adag).mul(&s_inv);

    let k = params.interior.k();
    let adjoint_defect = big_b.sub(&big_a.transpose()).block_max_abs(k);

    let lowering = FockMatrix::new("A", real_to_cmat(&big_a))?;
    let raising = FockMatrix::new("B", real_to_cmat(&big_b))?;

    Ok(DeformedPair {
        lowering,
        raising,
        params: params.clone(),
        adjoint_defect,
        mp: PairEngine {
            s,
            s_inv,
            t,
            big_a,
            big_b,
        },
    })
}

/// Evaluate the identity-chain residuals on the pair's interior block.
pub fn verify_pair(pair: &DeformedPair) -> PairVerification {
    let e = &pair.mp;
    let d = e.s.dim();
    let p = e.s.precision();
    let k = pair.params.interior.k();
    let q = pair.params.q;

    let (a, adag, n) = mp_ladder(d, p);
    let eye = MpMat::identity(d, p);

    let comm = e.big_a.mul(&e.big_b).sub(&e.big_b.mul(&e.big_a));
    let deformed = mp_deformed_target(q, d, p);
    let commutator_vs_deformed = comm.sub(&deformed).block_max_abs(k);

    let snsi = e.s.mul(&n).mul(&e.s_inv);
    let tnt = e.t.mul(&n).mul(&e.t.transpose());
    let split = eye.add(&snsi).sub(&tnt);
    let commutator_vs_split = comm.sub(&split).block_max_abs(k);

    // (q-1)N as the difference of the deformed target and the identity.
    let qn = deformed.sub(&eye);
    let conjugation = snsi.sub(&tnt).sub(&qn).block_max_abs(k);

    let invert_lowering = e
        .s_inv
        .mul(&e.big_a)
        .mul(&e.t)
        .sub(&a)
        .block_max_abs(k);
    let invert_raising = e
        .t
        .transpose()
        .mul(&e.big_b)
        .mul(&e.s)
        .sub(&adag)
        .block_max_abs(k);

    PairVerification {
        block: k,
        commutator_vs_deformed,
        commutator_vs_split,
        conjugation,
        invert_lowering,
        invert_raising,
        adjoint_defect: pair.adjoint_defect,
    }
}

fn real_to_cmat(m: &MpMat) -> CMat {
    let d = m.dim();
    let mut out = CMat::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            out[(i, j)] = c(m.entry_f64(i, j));
        }
    }
    out
}

/// `a a^+ - q a^+ a`.
pub fn deformed_commutator_q(
    a: &FockMatrix,
    adag: &FockMatrix,
    q: f64,
) -> Result<FockMatrix, FockError> {
    if a.dim() != adag.dim() {
        return Err(FockError::DimensionMismatch {
            left: a.dim(),
            right: adag.dim(),
        });
    }
    let m = a.raw() * adag.raw() - adag.raw() * a.raw() * c(q);
    FockMatrix::new("aa+-qa+a", m)
}

/// Bracket family selector for the ladder map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BracketKind {
    /// Geometric-series bracket `(q^n - 1)/(q - 1)`.
    Geometric,
    /// Quadratic bracket `n + (q-1) n(n-1)/2`.
    Polynomial,
}

/// `(q^n - 1)/(q - 1)`, with the limit `n` at `q = 1` and a series branch
/// near `q = 1` to avoid the 0/0 cancellation.
pub fn q_bracket(n: u32, q: f64) -> f64 {
    let nf = n as f64;
    let eps = q - 1.0;
    if eps == 0.0 {
        return nf;
    }
    if eps.abs() < 1e-8 {
        // (q^n - 1)/(q - 1) = C(n,1) + C(n,2) eps + C(n,3) eps^2 + ...
        let c2 = nf * (nf - 1.0) / 2.0;
        let c3 = nf * (nf - 1.0) * (nf - 2.0) / 6.0;
        let c4 = nf * (nf - 1.0) * (nf - 2.0) * (nf - 3.0) / 24.0;
        return nf + eps * (c2 + eps * (c3 + eps * c4));
    }
    (q.powi(n as i32) - 1.0) / eps
}

/// `n + (q-1) n(n-1)/2`.
pub fn poly_bracket(n: u32, q: f64) -> f64 {
    let nf = n as f64;
    nf + (q - 1.0) * (nf * (nf - 1.0) / 2.0)
}

fn bracket_value(kind: BracketKind, n: u32, q: f64) -> f64 {
    match kind {
        BracketKind::Geometric => q_bracket(n, q),
        BracketKind::Polynomial => poly_bracket(n, q),
    }
}

/// Ladder map `b |n> = sqrt([n]) |n-1>` together with its conjugate
/// transpose. The bracket must be nonnegative up to `n = D` or the square
/// root is undefined.
pub fn nonlinear_map(
    kind: BracketKind,
    d: usize,
    q: f64,
) -> Result<(FockMatrix, FockMatrix), AlgebraError> {
    for n in 0..=d as u32 {
        let v = bracket_value(kind, n, q);
        if v < 0.0 {
            return Err(AlgebraError::NegativeBracket { n, value: v });
        }
    }
    let mut b = CMat::zeros(d, d);
    for n in 1..d {
        b[(n - 1, n)] = c(bracket_value(kind, n as u32, q).sqrt());
    }
    let b = FockMatrix::new("b", b)?;
    let b_conj = b.adjoint().relabel("b+");
    Ok((b, b_conj))
}
