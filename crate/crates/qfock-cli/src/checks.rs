//! Builders translating library results into report rows.

use num_complex::Complex64;
use qfock::algebra::{self, BracketKind};
use qfock::flow::{self, ExpMethod, UnitaryFlow};
use qfock::fock::{self, block_residual_raw, max_abs, CMat, ResidualNorm};
use qfock::similarity::{self, SimilaritySolution};
use qfock::DeformParams;

use crate::report::{default_threshold, CheckRow, Gate};

pub struct CliError {
    pub message: String,
}

impl<E: std::fmt::Display> From<E> for CliError {
    fn from(e: E) -> Self {
        Self {
            message: e.to_string(),
        }
    }
}

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn row(id: &str, block: usize, value: f64, override_tol: Option<f64>) -> CheckRow {
    let (default, gate) = default_threshold(id).expect("registered check id");
    let threshold = override_tol.unwrap_or(default);
    match gate {
        Gate::UpperBound => CheckRow::upper(id, block, "max-abs", value, threshold),
        Gate::LowerBound => CheckRow::lower(id, block, "max-abs", value, threshold),
    }
}

/// Ladder-operator and displacement-flow identity rows at dimension `d`.
pub fn operator_checks(d: usize, u: f64, k: usize) -> Result<Vec<CheckRow>, CliError> {
    let a = fock::annihilation(d)?;
    let adag = fock::creation(d)?;
    let n = fock::number(d)?;
    let q_op = fock::position(d)?;
    let p_op = fock::momentum(d)?;
    let eye = CMat::identity(d, d);
    let mut rows = Vec::new();

    let comm = fock::commutator(&a, &adag)?;
    rows.push(row(
        "ladder.canonical-commutator",
        d - 1,
        block_residual_raw(comm.raw(), &eye, d - 1, ResidualNorm::MaxAbs),
        None,
    ));

    let quad = (q_op.raw() * q_op.raw() + p_op.raw() * p_op.raw() - &eye) * c(0.5);
    rows.push(row(
        "ladder.number-quadrature",
        d - 1,
        block_residual_raw(&quad, n.raw(), d - 1, ResidualNorm::MaxAbs),
        None,
    ));

    let qp = fock::commutator(&q_op, &p_op)?;
    let i_eye = &eye * Complex64::new(0.0, 1.0);
    rows.push(row(
        "ladder.position-momentum",
        d - 1,
        block_residual_raw(qp.raw(), &i_eye, d - 1, ResidualNorm::MaxAbs),
        None,
    ));

    let flow_u = flow::displacement(u, d)?;
    rows.push(row("flow.unitarity", d, flow_u.unitarity_defect(), None));

    let t1 = flow::exponentiate(&p_op, 0.3)?;
    let t2 = flow::exponentiate(&p_op, 0.4)?;
    let t3 = flow::exponentiate(&p_op, 0.7)?;
    rows.push(row(
        "flow.group-law",
        d,
        max_abs(&(t1.raw() * t2.raw() - t3.raw())),
        None,
    ));

    let back = flow::displacement(-u, d)?;
    rows.push(row(
        "flow.inverse-adjoint",
        d,
        max_abs(&(flow_u.matrix().raw().adjoint() - back.matrix().raw())),
        None,
    ));

    let t = flow_u.matrix().raw();
    let shifted = q_op.raw() + &eye * c(u);
    rows.push(row(
        "flow.position-shift",
        k,
        block_residual_raw(&(t * q_op.raw() * t.adjoint()), &shifted, k, ResidualNorm::MaxAbs),
        None,
    ));

    rows.push(row(
        "flow.generator-commutation",
        d,
        max_abs(&(t * p_op.raw() - p_op.raw() * t)),
        None,
    ));

    let analytic = flow::conjugated_number_analytic(u, d)?;
    rows.push(row(
        "flow.number-conjugation",
        k,
        block_residual_raw(
            &(t * n.raw() * t.adjoint()),
            analytic.raw(),
            k,
            ResidualNorm::MaxAbs,
        ),
        None,
    ));

    let pade = flow::exponentiate_with(&p_op, u, ExpMethod::PadeScalingSquaring)?;
    rows.push(row(
        "flow.kernel-agreement",
        d,
        max_abs(&(pade.raw() - t)),
        None,
    ));

    Ok(rows)
}

/// Solver-level rows for one solved similarity.
pub fn similarity_checks(
    params: &DeformParams,
    sol: &SimilaritySolution,
    override_tol: Option<f64>,
) -> Vec<CheckRow> {
    let d = params.dim;
    let mut rows = Vec::new();

    let sylvester = sol
        .sylvester_residual()
        .iter()
        .fold(0.0f64, |a, r| a.max(*r));
    rows.push(row("similarity.sylvester-rows", d - 1, sylvester, override_tol));

    rows.push(row(
        "similarity.recurrence-rows",
        d - 1,
        recurrence_resubstitution(params, sol),
        override_tol,
    ));

    let inv_residual = sol.inversion_residual().unwrap_or(f64::INFINITY);
    rows.push(row(
        "similarity.inversion-certificate",
        d,
        inv_residual,
        override_tol,
    ));

    if !params.is_trivial() {
        rows.push(row(
            "similarity.nonunitarity",
            d / 2,
            similarity::nonunitarity_certificate(sol),
            None,
        ));
    }
    rows
}

/// Max relative residual of the three-term recurrence re-substituted into
/// the exported binary64 matrix.
fn recurrence_resubstitution(params: &DeformParams, sol: &SimilaritySolution) -> f64 {
    let (q, u, d) = (params.q, params.u, params.dim);
    if u == 0.0 {
        return 0.0;
    }
    let su = u * std::f64::consts::SQRT_2;
    let mut worst = 0.0f64;
    for n in 0..d {
        for m in 0..d - 1 {
            let sm = |i: usize| sol.s().entry(i, n).re;
            let prev = if m == 0 { 0.0 } else { sm(m - 1) };
            let den = 2.0 * (n as f64 - m as f64 * q) - u * u;
            let lhs = den * sm(m);
            let rhs = su * ((m as f64).sqrt() * prev + ((m + 1) as f64).sqrt() * sm(m + 1));
            let scale = lhs.abs().max(rhs.abs()).max(1e-300);
            worst = worst.max(((lhs - rhs) / scale).abs());
        }
    }
    worst
}

/// Mapped-pair identity rows (the full chain).
pub fn pair_checks(
    params: &DeformParams,
    sol: &SimilaritySolution,
    flow: &UnitaryFlow,
    override_tol: Option<f64>,
) -> Result<Vec<CheckRow>, CliError> {
    let pair = algebra::build_pair(params, sol, flow)?;
    let v = algebra::verify_pair(&pair);
    let k = v.block;
    let mut rows = vec![
        row("pair.deformed-commutator", k, v.commutator_vs_deformed, override_tol),
        row("pair.split-commutator", k, v.commutator_vs_split, override_tol),
        row("pair.conjugation", k, v.conjugation, override_tol),
        row("pair.invert-lowering", k, v.invert_lowering, override_tol),
        row("pair.invert-raising", k, v.invert_raising, override_tol),
    ];
    if params.is_trivial() {
        rows.push(row("pair.adjoint-defect-trivial", k, pair.adjoint_defect(), None));
    } else {
        rows.push(row("pair.adjoint-defect", k, pair.adjoint_defect(), None));
    }
    Ok(rows)
}

/// Bracket-map rows at the chain's parameters.
pub fn bracket_checks(d: usize, q: f64) -> Result<Vec<CheckRow>, CliError> {
    let mut rows = Vec::new();

    let a = fock::annihilation(d)?;
    let adag = fock::creation(d)?;
    let lhs = algebra::deformed_commutator_q(&a, &adag, q)?;
    let rhs = fock::commutator(&a, &adag)?.raw() - adag.raw() * a.raw() * c(q - 1.0);
    rows.push(row("map.q-identity", d, max_abs(&(lhs.raw() - rhs)), None));

    match algebra::nonlinear_map(BracketKind::Polynomial, d, q) {
        Ok((b, bc)) => {
            let comm = b.raw() * bc.raw() - bc.raw() * b.raw();
            let target =
                CMat::identity(d, d) + fock::number(d)?.raw() * c(q - 1.0);
            rows.push(row(
                "map.bracket-commutator",
                d - 1,
                block_residual_raw(&comm, &target, d - 1, ResidualNorm::MaxAbs),
                None,
            ));
        }
        Err(e) => {
            // Negative bracket: the map is undefined at these parameters;
            // recorded as a failing row rather than aborting the report.
            let mut r = row("map.bracket-commutator", d - 1, f64::NAN, None);
            r.norm = format!("undefined: {e}");
            r.pass = false;
            rows.push(r);
        }
    }
    Ok(rows)
}
