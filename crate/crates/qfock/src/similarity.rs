//! Construction of the invertible, non-unitary similarity operator `S`.
//!
//! `S` is defined column by column: column `n` solves the three-term
//! recurrence
//!
//! ```text
//! (2(n - m q) - u^2) S[m,n] = u sqrt(2) (sqrt(m) S[m-1,n] + sqrt(m+1) S[m+1,n])
//! ```
//!
//! run forward from the seed `S[0,n] = 1`, `S[-1,n] = 0`. Row `m` of the
//! matrix equation `M S = S N` (with `M = q N + u Q + (u^2/2) I`) is exactly
//! this recurrence, so rows `0..D-2` of the Sylvester residual vanish by
//! construction; row `D-1` is the truncation boundary and is excluded from
//! every residual contract.
//!
//! The recurrence is homogeneous, so each column carries a one-parameter
//! scale freedom. Because `N` is diagonal, a diagonal rescaling `S -> S L`
//! leaves `S N S^-1` unchanged; that freedom is spent on a per-column gauge
//! (unit max-abs by default) to keep the matrix scaled sanely.
//!
//! Columns grow super-exponentially in the row index for `q > 1`: the
//! condition number of the gauged matrix grows like 10^(0.8 D) at the
//! benchmark parameters. Inversion and every product touching the inverse
//! therefore run at extended precision (see [`crate::multiprec`]); the
//! binary64 matrices exposed here are projections of those results, and a
//! binary64 re-multiplication of `S` by the projected inverse cannot
//! reproduce the certificate once the condition number passes 1/eps. The
//! f64 recurrence is still run first so that entries which overflow the
//! binary64 representation are reported as a structured error.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::fock::{self, c, CMat, FockError, FockMatrix};
use crate::multiprec::{mp, mp_recurrence_column, to_f64, MpMat};
use crate::params::{resonance_tolerance, DeformParams};

const RM: astro_float::RoundingMode = astro_float::RoundingMode::ToEven;

/// Certified inversion must reach this residual or fail.
pub const INVERSION_RESIDUAL_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SimilarityError {
    #[error("no similarity exists for u = 0 with q = {q}: the recurrence forces S = 0")]
    NoSolution { q: f64 },
    #[error("recurrence overflowed binary64 at entry ({row}, {col}); reduce the dimension")]
    Overflow { row: usize, col: usize },
    #[error("resonant denominator at (m, n) = ({m}, {n}): |{denominator:.3e}| below tolerance")]
    Resonance { m: usize, n: usize, denominator: f64 },
    #[error("inversion failed: residual {residual:.3e} exceeds {tol:.1e} (condition estimate {condition:.3e})")]
    Inversion {
        residual: f64,
        condition: f64,
        tol: f64,
    },
    #[error("matrix numerically singular; condition estimate {condition:.3e}")]
    Singular { condition: f64 },
    #[error(transparent)]
    Fock(#[from] FockError),
}

/// Per-column normalization applied after the recurrence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ColumnGauge {
    /// Unit max-abs per column; the contractual default.
    #[default]
    MaxAbs,
    /// Unit Euclidean norm per column; used as the comparison gauge when
    /// checking gauge invariance of downstream observables.
    L2,
}

/// The solved similarity operator with its diagnostics.
#[derive(Debug, Clone)]
pub struct SimilaritySolution {
    s: FockMatrix,
    q: f64,
    u: f64,
    column_gauge: Vec<f64>,
    sylvester_residual: Vec<f64>,
    condition_estimate: f64,
    condition_interior: f64,
    resonance_flags: Vec<(usize, usize)>,
    inversion_residual: Option<f64>,
    mp_s: MpMat,
    mp_inv: Option<MpMat>,
}

impl std::fmt::Debug for MpMat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "MpMat({}x{}, {} bits)", self.dim(), self.dim(), self.precision())
    }
}

impl SimilaritySolution {
    pub fn s(&self) -> &FockMatrix {
        &self.s
    }

    pub fn dim(&self) -> usize {
        self.s.dim()
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    /// Scale factor applied to each raw recurrence column.
    pub fn column_gauge(&self) -> &[f64] {
        &self.column_gauge
    }

    /// Relative max-abs residual of `M S - S N` per column over rows
    /// `0..D-2`, measured on the exported binary64 matrix.
    pub fn sylvester_residual(&self) -> &[f64] {
        &self.sylvester_residual
    }

    /// Ratio of extreme singular values of the gauged `S` (full matrix).
    /// When the smallest singular value underflows binary64, the estimate
    /// falls back to the extended-precision bound `|S|_1 |S^-1|_1`.
    pub fn condition_estimate(&self) -> f64 {
        self.condition_estimate
    }

    /// Same ratio on the leading `D/2` block; the full-matrix number is
    /// dominated by boundary growth and overstates the interior problem.
    pub fn condition_interior(&self) -> f64 {
        self.condition_interior
    }

    /// Indices `(m, n)` where the recurrence denominator is near zero.
    /// Informational: the forward recurrence never divides by it.
    pub fn resonance_flags(&self) -> &[(usize, usize)] {
        &self.resonance_flags
    }

    /// True residual `max-abs(S S^-1 - I)` of the extended-precision
    /// inverse, when one exists.
    pub fn inversion_residual(&self) -> Option<f64> {
        self.inversion_residual
    }

    /// Extended-precision gauged matrix.
    pub(crate) fn mp_s(&self) -> &MpMat {
        &self.mp_s
    }

    /// Sidecar diagnostics for serialization.
    pub fn report(&self) -> SimilarityReport {
        SimilarityReport {
            q: self.q,
            u: self.u,
            dim: self.dim(),
            column_gauge: self.column_gauge.clone(),
            sylvester_residual: self.sylvester_residual.clone(),
            condition_estimate: self.condition_estimate,
            condition_interior: self.condition_interior,
            inversion_residual: self.inversion_residual,
            resonance_flags: self.resonance_flags.clone(),
        }
    }
}

/// Serializable sidecar with per-column residuals and conditioning data.
#[derive(Debug, Clone, Serialize)]
pub struct SimilarityReport {
    pub q: f64,
    pub u: f64,
    pub dim: usize,
    pub column_gauge: Vec<f64>,
    pub sylvester_residual: Vec<f64>,
    pub condition_estimate: f64,
    pub condition_interior: f64,
    pub inversion_residual: Option<f64>,
    pub resonance_flags: Vec<(usize, usize)>,
}

/// Target of the similarity conjugation: `M = q N + u Q + (u^2/2) I`.
pub fn target_operator(q: f64, u: f64, d: usize) -> Result<FockMatrix, SimilarityError> {
    let n = fock::number(d)?;
    let qm = fock::position(d)?;
    let m = n.raw() * c(q) + qm.raw() * c(u) + CMat::identity(d, d) * c(0.5 * u * u);
    Ok(FockMatrix::new("qN+uQ+u^2/2", m)?)
}

fn denominator(m: usize, n: usize, q: f64, u: f64) -> f64 {
    2.0 * (n as f64 - m as f64 * q) - u * u
}

/// Coefficients expressing `S[m,n]` through its vertical neighbours:
/// `A = u sqrt(2m) / d`, `B = u sqrt(2(m+1)) / d` with
/// `d = 2(n - mq) - u^2`. Errors out when `d` is resonant (near zero).
pub fn recurrence_coefficients(
    m: usize,
    n: usize,
    q: f64,
    u: f64,
) -> Result<(f64, f64), SimilarityError> {
    let den = denominator(m, n, q, u);
    let tol = resonance_tolerance(q, u, m.max(n) + 1);
    if den.abs() < tol {
        return Err(SimilarityError::Resonance {
            m,
            n,
            denominator: den,
        });
    }
    let a = u * (2.0 * m as f64).sqrt() / den;
    let b = u * (2.0 * (m + 1) as f64).sqrt() / den;
    Ok((a, b))
}

/// Raw (pre-gauge) binary64 recurrence column `n`: forward sweep from
/// `S[0,n] = 1`. Errors out at the first entry that overflows binary64.
pub fn recurrence_column(n: usize, q: f64, u: f64, d: usize) -> Result<Vec<f64>, SimilarityError> {
    debug_assert!(u != 0.0);
    let sqrt2_u = u * std::f64::consts::SQRT_2;
    let mut col = vec![0.0f64; d];
    col[0] = 1.0;
    for m in 0..d - 1 {
        let prev = if m == 0 { 0.0 } else { col[m - 1] };
        let num = denominator(m, n, q, u) * col[m] - sqrt2_u * (m as f64).sqrt() * prev;
        let next = num / (sqrt2_u * ((m + 1) as f64).sqrt());
        if !next.is_finite() {
            return Err(SimilarityError::Overflow { row: m + 1, col: n });
        }
        col[m + 1] = next;
    }
    Ok(col)
}

/// Solve for `S` with the default unit max-abs column gauge.
pub fn solve(params: &DeformParams) -> Result<SimilaritySolution, SimilarityError> {
    solve_with_gauge(params, ColumnGauge::MaxAbs)
}

/// Solve for `S` with an explicit column gauge.
pub fn solve_with_gauge(
    params: &DeformParams,
    gauge: ColumnGauge,
) -> Result<SimilaritySolution, SimilarityError> {
    let d = params.dim;
    let (q, u) = (params.q, params.u);

    if u == 0.0 {
        if q == 1.0 {
            // The conjugation condition degenerates; the identity solves it.
            let p = crate::multiprec::bits_for_dim(d);
            return assemble(params, MpMat::identity(d, p), vec![1.0; d]);
        }
        return Err(SimilarityError::NoSolution { q });
    }

    // Binary64 pass: detects representation overflow per the error contract.
    for n in 0..d {
        recurrence_column(n, q, u, d)?;
    }

    let p = crate::multiprec::bits_for_dim(d);
    let mut mp_s = MpMat::zeros(d, p);
    let mut gauges = Vec::with_capacity(d);
    for n in 0..d {
        let col = mp_recurrence_column(n, q, u, d, p);
        let scale = match gauge {
            ColumnGauge::MaxAbs => {
                let mut worst = mp(0.0, p);
                for v in &col {
                    let a = v.abs();
                    if crate::multiprec::gt(&a, &worst) {
                        worst = a;
                    }
                }
                mp(1.0, p).div(&worst, p, RM)
            }
            ColumnGauge::L2 => {
                let mut sum = mp(0.0, p);
                for v in &col {
                    sum = sum.add(&v.mul(v, p, RM), p, RM);
                }
                mp(1.0, p).div(&sum.sqrt(p, RM), p, RM)
            }
        };
        gauges.push(to_f64(&scale));
        for (m, v) in col.iter().enumerate() {
            mp_s.set(m, n, v.mul(&scale, p, RM));
        }
    }
    assemble(params, mp_s, gauges)
}

fn assemble(
    params: &DeformParams,
    mp_s: MpMat,
    gauges: Vec<f64>,
) -> Result<SimilaritySolution, SimilarityError> {
    let d = params.dim;
    let (q, u) = (params.q, params.u);
    let p = mp_s.precision();

    let mut s_f64 = CMat::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            s_f64[(i, j)] = c(mp_s.entry_f64(i, j));
        }
    }
    let s = FockMatrix::new("S", s_f64)?;

    let target = target_operator(q, u, d)?;
    let residuals = sylvester_residuals(s.raw(), target.raw());

    let mp_inv = mp_s.inverse();
    let inversion_residual = mp_inv.as_ref().map(|inv| {
        mp_s.mul(inv).sub(&MpMat::identity(d, p)).max_abs()
    });

    let (cond_full, cond_interior) = condition_estimates(s.raw(), &mp_s, mp_inv.as_ref());

    let mut flags = Vec::new();
    let tol = params.resonance_tol;
    for m in 0..d {
        for n in 0..d {
            if denominator(m, n, q, u).abs() < tol {
                flags.push((m, n));
            }
        }
    }

    Ok(SimilaritySolution {
        s,
        q,
        u,
        column_gauge: gauges,
        sylvester_residual: residuals,
        condition_estimate: cond_full,
        condition_interior: cond_interior,
        resonance_flags: flags,
        inversion_residual,
        mp_s,
        mp_inv,
    })
}

/// Per-column max-abs of `(M S - S N)` over rows `0..D-2`, relative to the
/// column's max-abs over all rows.
pub(crate) fn sylvester_residuals(s: &CMat, target: &CMat) -> Vec<f64> {
    let d = s.nrows();
    let n_op: DVector<Complex64> = DVector::from_iterator(d, (0..d).map(|i| c(i as f64)));
    let mut residual = target * s;
    for n in 0..d {
        for m in 0..d {
            residual[(m, n)] -= s[(m, n)] * n_op[n];
        }
    }
    (0..d)
        .map(|n| {
            let col_scale = (0..d).fold(0.0f64, |acc, m| acc.max(s[(m, n)].norm()));
            let raw = (0..d - 1).fold(0.0f64, |acc, m| acc.max(residual[(m, n)].norm()));
            if col_scale > 0.0 {
                raw / col_scale
            } else {
                raw
            }
        })
        .collect()
}

fn condition_estimates(s: &CMat, mp_s: &MpMat, mp_inv: Option<&MpMat>) -> (f64, f64) {
    let full = match singular_value_ratio(s) {
        v if v.is_finite() => v,
        _ => match mp_inv {
            // sigma_min underflowed binary64; fall back to the
            // extended-precision one-norm bound.
            Some(inv) => mp_s.one_norm_f64() * inv.one_norm_f64(),
            None => f64::INFINITY,
        },
    };
    let k = s.nrows() / 2;
    let interior = singular_value_ratio(&s.view((0, 0), (k, k)).into_owned());
    (full, interior)
}

fn singular_value_ratio(m: &CMat) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().fold(0.0f64, |a, s| a.max(*s));
    let smin = sv.iter().fold(f64::INFINITY, |a, s| a.min(*s));
    if smin == 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    }
}

/// Invert the gauged `S` at extended precision with a certified residual
/// `max-abs(S S^-1 - I)`. The returned matrix is the binary64 projection of
/// the extended-precision inverse; the certificate refers to the
/// extended-precision pair, since beyond condition 1/eps no binary64
/// product can witness it.
pub fn invert(sol: &SimilaritySolution) -> Result<FockMatrix, SimilarityError> {
    let (inv, residual) = invert_mp(sol)?;
    let d = sol.dim();
    let mut out = CMat::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            out[(i, j)] = c(inv.entry_f64(i, j));
        }
    }
    let _ = residual;
    Ok(FockMatrix::new("S^-1", out)?)
}

/// Extended-precision inverse and its certificate.
pub(crate) fn invert_mp(sol: &SimilaritySolution) -> Result<(MpMat, f64), SimilarityError> {
    let inv = sol.mp_inv.clone().ok_or(SimilarityError::Singular {
        condition: sol.condition_estimate,
    })?;
    let residual = sol
        .inversion_residual
        .expect("inverse implies residual recorded");
    if !residual.is_finite() || residual > INVERSION_RESIDUAL_TOL {
        return Err(SimilarityError::Inversion {
            residual,
            condition: sol.condition_estimate,
            tol: INVERSION_RESIDUAL_TOL,
        });
    }
    Ok((inv, residual))
}

/// `max-abs(S^+ S - I)` on the leading `D/2` block. Large values certify
/// that the solved map is genuinely non-unitary; the value is gauge
/// dependent and is quoted for the solution's own gauge.
pub fn nonunitarity_certificate(sol: &SimilaritySolution) -> f64 {
    let d = sol.dim();
    let gram = sol.s.raw().adjoint() * sol.s.raw();
    let k = (d / 2).max(1);
    let eye = CMat::identity(k, k);
    fock::max_abs(&(gram.view((0, 0), (k, k)) - eye))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{max_abs, number};
    use crate::multiprec::mp_target_operator;

    #[test]
    fn target_operator_structure() {
        let m = target_operator(1.0, 0.0, 6).unwrap();
        assert_eq!(m.raw(), number(6).unwrap().raw());

        let (q, u) = (2.0, 1.0);
        let m = target_operator(q, u, 3).unwrap();
        assert!((m.entry(0, 0) - c(0.5 * u * u)).norm() < 1e-15);
        assert!((m.entry(1, 1) - c(q + 0.5 * u * u)).norm() < 1e-15);
        let expect = u * std::f64::consts::FRAC_1_SQRT_2;
        assert!((m.entry(0, 1) - c(expect)).norm() < 1e-12);
    }

    #[test]
    fn coefficients_match_hand_evaluation() {
        // m=0 kills the lower coefficient for any n, q, u.
        let (a, b) = recurrence_coefficients(0, 3, 1.7, 0.9).unwrap();
        assert_eq!(a, 0.0);
        assert!(b != 0.0);

        // m=1, n=0, q=2, u=1: denominator 2(0-2)-1 = -5.
        let (a, b) = recurrence_coefficients(1, 0, 2.0, 1.0).unwrap();
        assert!((a - 2.0f64.sqrt() / -5.0).abs() < 1e-15, "a = {a}");
        assert!((b - (-0.4)).abs() < 1e-15, "b = {b}");

        // u=0 zeroes both whenever the denominator is regular.
        let (a, b) = recurrence_coefficients(2, 1, 1.3, 0.0).unwrap();
        assert_eq!((a, b), (0.0, 0.0));
    }

    #[test]
    fn coefficients_flag_resonance() {
        // m=1, n=2, q=2, u=0: denominator exactly zero.
        assert!(matches!(
            recurrence_coefficients(1, 2, 2.0, 0.0),
            Err(SimilarityError::Resonance { m: 1, n: 2, .. })
        ));
    }

    #[test]
    fn forward_column_hand_values() {
        let col = recurrence_column(0, 2.0, 1.0, 4).unwrap();
        assert_eq!(col[0], 1.0);
        let s10 = -std::f64::consts::FRAC_1_SQRT_2;
        assert!((col[1] - s10).abs() < 1e-12, "S[1,0] = {}", col[1]);
        let s20 = 1.5 * std::f64::consts::FRAC_1_SQRT_2;
        assert!((col[2] - s20).abs() < 1e-12, "S[2,0] = {}", col[2]);
    }

    #[test]
    fn trivial_branch_returns_identity() {
        let params = DeformParams::new(1.0, 0.0, 12).unwrap();
        let sol = solve(&params).unwrap();
        assert_eq!(sol.s().raw(), FockMatrix::identity(12).raw());
        assert!(sol.sylvester_residual().iter().all(|r| *r == 0.0));
        let inv = invert(&sol).unwrap();
        assert_eq!(inv.raw(), FockMatrix::identity(12).raw());
        assert_eq!(nonunitarity_certificate(&sol), 0.0);
    }

    #[test]
    fn zero_shift_with_deformation_has_no_solution() {
        let params = DeformParams::new(2.0, 0.0, 16).unwrap();
        assert!(matches!(
            solve(&params),
            Err(SimilarityError::NoSolution { q }) if q == 2.0
        ));
    }

    #[test]
    fn sylvester_rows_vanish_by_construction() {
        let params = DeformParams::new(1.2, 0.7, 48).unwrap();
        let sol = solve(&params).unwrap();
        for (n, r) in sol.sylvester_residual().iter().enumerate() {
            assert!(*r < 1e-10, "column {n}: residual {r:.3e}");
        }
        // Columns carry unit max-abs after gauging.
        for n in 0..sol.dim() {
            let m = (0..sol.dim()).fold(0.0f64, |acc, i| acc.max(sol.s().entry(i, n).norm()));
            assert!((m - 1.0).abs() < 1e-14, "column {n} max {m}");
        }
    }

    #[test]
    fn recurrence_resubstitution_is_rounding_level() {
        let params = DeformParams::new(1.2, 0.7, 48).unwrap();
        let sol = solve(&params).unwrap();
        let (q, u, d) = (params.q, params.u, params.dim);
        let su = u * std::f64::consts::SQRT_2;
        for n in 0..d {
            for m in 0..d - 1 {
                let sm = |i: usize| sol.s().entry(i, n).re;
                let prev = if m == 0 { 0.0 } else { sm(m - 1) };
                let lhs = denominator(m, n, q, u) * sm(m);
                let rhs = su * ((m as f64).sqrt() * prev + ((m + 1) as f64).sqrt() * sm(m + 1));
                let scale = lhs.abs().max(rhs.abs()).max(1e-300);
                assert!(
                    ((lhs - rhs) / scale).abs() < 1e-12,
                    "(m,n)=({m},{n}): lhs {lhs:.3e} rhs {rhs:.3e}"
                );
            }
        }
    }

    #[test]
    fn columns_read_as_formal_eigenvectors() {
        let params = DeformParams::new(1.2, 0.7, 32).unwrap();
        let sol = solve(&params).unwrap();
        let target = target_operator(params.q, params.u, params.dim).unwrap();
        let d = params.dim;
        for n in 0..d {
            let col = sol.s().raw().column(n).into_owned();
            let image = target.raw() * &col;
            let mut worst = 0.0f64;
            for m in 0..d - 1 {
                worst = worst.max((image[m] - c(n as f64) * col[m]).norm());
            }
            let scale = col.iter().fold(0.0f64, |a, v| a.max(v.norm()));
            assert!(worst / scale < 1e-10, "column {n}: {:.3e}", worst / scale);
        }
    }

    #[test]
    fn inversion_certificate_holds_at_benchmark_parameters() {
        let params = DeformParams::new(1.2, 0.7, 48).unwrap();
        let sol = solve(&params).unwrap();
        let (_, residual) = invert_mp(&sol).unwrap();
        assert!(residual < 1e-8, "certified residual {residual:.3e}");
        // The binary64 projection exists and is finite.
        let inv = invert(&sol).unwrap();
        assert!(max_abs(inv.raw()).is_finite());
        // Condition estimate is finite (falls back to the extended bound
        // once sigma_min underflows binary64) and reflects the severe
        // boundary growth.
        assert!(sol.condition_estimate().is_finite());
        assert!(sol.condition_estimate() > 1e16);
    }

    #[test]
    fn inverse_is_two_sided_at_moderate_dimension() {
        // At D=12 the condition number is ~1e6, so even the binary64
        // projections multiply back to I well within 1e-8.
        let params = DeformParams::new(1.2, 0.7, 12).unwrap();
        let sol = solve(&params).unwrap();
        let inv = invert(&sol).unwrap();
        let eye = CMat::identity(12, 12);
        let right = max_abs(&(sol.s().raw() * inv.raw() - &eye));
        let left = max_abs(&(inv.raw() * sol.s().raw() - &eye));
        assert!(right < 1e-8 && left < 1e-8, "right {right:.3e} left {left:.3e}");
    }

    #[test]
    fn gauge_choice_cancels_in_the_conjugated_number() {
        let params = DeformParams::new(1.2, 0.7, 32).unwrap();
        let a = solve_with_gauge(&params, ColumnGauge::MaxAbs).unwrap();
        let b = solve_with_gauge(&params, ColumnGauge::L2).unwrap();
        let d = params.dim;
        let conj = |sol: &SimilaritySolution| {
            let (inv, _) = invert_mp(sol).unwrap();
            let p = inv.precision();
            let (_, _, n) = crate::multiprec::mp_ladder(d, p);
            let prod = sol.mp_s().mul(&n).mul(&inv);
            prod
        };
        let res = conj(&a).sub(&conj(&b)).block_max_abs(d / 2);
        assert!(res < 1e-9, "gauge dependence {res:.3e}");
    }

    #[test]
    fn conjugated_number_matches_target_on_interior_rows() {
        // S N S^-1 equals M = qN + uQ + (u^2/2)I exactly on rows 0..D-2;
        // the boundary junk is rank-one in the last row.
        let params = DeformParams::new(1.2, 0.7, 32).unwrap();
        let sol = solve(&params).unwrap();
        let (inv, _) = invert_mp(&sol).unwrap();
        let p = inv.precision();
        let d = params.dim;
        let (_, _, n) = crate::multiprec::mp_ladder(d, p);
        let target = mp_target_operator(params.q, params.u, d, p);
        let diff = sol.mp_s().mul(&n).mul(&inv).sub(&target);
        let interior = diff.rows_max_abs(d - 1);
        assert!(interior < 1e-30, "interior residual {interior:.3e}");
    }

    #[test]
    fn solved_map_is_certifiably_non_unitary() {
        let params = DeformParams::new(2.0, 1.0, 32).unwrap();
        let sol = solve(&params).unwrap();
        let cert = nonunitarity_certificate(&sol);
        assert!(cert > 0.01, "certificate {cert}");
    }

    #[test]
    fn growth_overflows_are_reported_with_indices() {
        // Entries stay finite at the working dimensions...
        let ok = DeformParams::new(1.2, 0.7, 48).unwrap();
        assert!(solve(&ok).is_ok());
        // ...and binary64 overflow is detected, naming the first bad entry,
        // once the dimension is pushed far enough.
        let mut report = None;
        for d in [128usize, 256, 512, 1024] {
            let params = DeformParams::new(1.2, 0.7, d).unwrap();
            match solve(&params) {
                Ok(_) => continue,
                Err(SimilarityError::Overflow { row, col }) => {
                    report = Some((d, row, col));
                    break;
                }
                Err(other) => panic!("unexpected error {other}"),
            }
        }
        let (d, row, col) = report.expect("overflow should occur by D = 1024");
        assert!(row < d && col < d, "index ({row}, {col}) out of range");
    }

    #[test]
    fn resonance_flags_are_informational() {
        let params = DeformParams::new(1.2, 0.7, 32).unwrap();
        let sol = solve(&params).unwrap();
        assert!(sol.resonance_flags().is_empty());
    }
}
