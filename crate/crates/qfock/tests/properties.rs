//! Property tests over randomized parameters: structural invariants that
//! must hold across the whole operating range, not just at benchmarks.

use num_complex::Complex64;
use proptest::prelude::*;
use qfock::algebra;
use qfock::flow::{self, ExpMethod};
use qfock::fock::{self, block_residual_raw, hermitian_defect, max_abs, CMat, ResidualNorm};
use qfock::position::{self, Branch};
use qfock::similarity;
use qfock::DeformParams;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn quadratures_are_hermitian_and_canonical(d in 2usize..24) {
        let q = fock::position(d).unwrap();
        let p = fock::momentum(d).unwrap();
        prop_assert_eq!(hermitian_defect(q.raw()), 0.0);
        prop_assert_eq!(hermitian_defect(p.raw()), 0.0);
        if d > 2 {
            let comm = fock::commutator(&q, &p).unwrap();
            let want = CMat::identity(d, d) * Complex64::new(0.0, 1.0);
            let res = block_residual_raw(comm.raw(), &want, d - 1, ResidualNorm::MaxAbs);
            prop_assert!(res < 1e-13, "residual {}", res);
        }
    }

    #[test]
    fn ladder_commutator_is_identity_inside(d in 2usize..32) {
        let a = fock::annihilation(d).unwrap();
        let adag = fock::creation(d).unwrap();
        let comm = fock::commutator(&a, &adag).unwrap();
        let res = block_residual_raw(
            comm.raw(),
            &CMat::identity(d, d),
            d - 1,
            ResidualNorm::MaxAbs,
        );
        prop_assert!(res < 1e-13);
        // Cutoff artifact sits exactly at the corner.
        let corner = comm.entry(d - 1, d - 1);
        prop_assert!((corner - Complex64::new(1.0 - d as f64, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn flow_group_law_and_adjoint(u1 in -2.0f64..2.0, u2 in -2.0f64..2.0) {
        let d = 16;
        let p = fock::momentum(d).unwrap();
        let t1 = flow::exponentiate(&p, u1).unwrap();
        let t2 = flow::exponentiate(&p, u2).unwrap();
        let t12 = flow::exponentiate(&p, u1 + u2).unwrap();
        prop_assert!(max_abs(&(t1.raw() * t2.raw() - t12.raw())) < 1e-12);
        let back = flow::exponentiate(&p, -u1).unwrap();
        prop_assert!(max_abs(&(t1.raw().adjoint() - back.raw())) < 1e-12);
    }

    #[test]
    fn exponential_kernels_agree(s in -1.5f64..1.5, d in 4usize..32) {
        let p = fock::momentum(d).unwrap();
        let eig = flow::exponentiate_with(&p, s, ExpMethod::HermitianEigen).unwrap();
        let pade = flow::exponentiate_with(&p, s, ExpMethod::PadeScalingSquaring).unwrap();
        prop_assert!(max_abs(&(eig.raw() - pade.raw())) < 1e-11);
    }

    #[test]
    fn bracket_difference_law_holds(n in 0u32..1000, q in 0.3f64..3.0) {
        let lhs = algebra::poly_bracket(n + 1, q) - algebra::poly_bracket(n, q);
        let rhs = 1.0 + (q - 1.0) * n as f64;
        prop_assert!(((lhs - rhs) / rhs.abs().max(1.0)).abs() < 1e-12);
    }

    #[test]
    fn geometric_bracket_limit_is_continuous(n in 0u32..200) {
        let near = algebra::q_bracket(n, 1.0 + 3e-9);
        let limit = algebra::q_bracket(n, 1.0);
        prop_assert!((near - limit).abs() < 1e-3 * (1.0 + limit));
    }

    #[test]
    fn series_reflection_parity(u in 0.05f64..1.0, q in 1.3f64..4.0) {
        let plus = position::OdeProblem::new(q, u).unwrap();
        let minus = position::OdeProblem::new(q, -u).unwrap();
        let sp = position::FrobeniusSeries::build(&plus, Branch::R0, 24).unwrap();
        let sm = position::FrobeniusSeries::build(&minus, Branch::R0, 24).unwrap();
        for (k, (cp, cm)) in sp.coeffs.iter().zip(&sm.coeffs).enumerate() {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            prop_assert!(
                (cp - sign * cm).abs() <= 1e-12 * cp.abs().max(1.0),
                "coefficient {} parity", k
            );
        }
    }

    #[test]
    fn indicial_exponents_solve_their_polynomial(q in 1.05f64..12.0) {
        let (r0, r1) = position::indicial_exponents(q).unwrap();
        let p0 = 2.0 * q / (q - 1.0);
        for r in [r0, r1] {
            let value = r * (r - 1.0) + p0 * r;
            prop_assert!(value.abs() < 1e-9 * (1.0 + r * r), "root {} leaves {}", r, value);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn similarity_contracts_hold_across_parameters(
        q in 0.8f64..1.6,
        u in 0.3f64..1.2,
        d in 8usize..24,
    ) {
        let params = DeformParams::new(q, u, d).unwrap();
        let sol = similarity::solve(&params).unwrap();

        // Sylvester rows vanish per column, relative to the column scale.
        for (n, r) in sol.sylvester_residual().iter().enumerate() {
            prop_assert!(*r < 1e-10, "column {} residual {}", n, r);
        }
        // Unit max-abs gauge.
        for n in 0..d {
            let m = (0..d).fold(0.0f64, |acc, i| acc.max(sol.s().entry(i, n).norm()));
            prop_assert!((m - 1.0).abs() < 1e-13);
        }
        // Columns are formal eigenvectors of the target operator.
        let target = similarity::target_operator(q, u, d).unwrap();
        for n in 0..d {
            let col = sol.s().raw().column(n).into_owned();
            let image = target.raw() * &col;
            let mut worst = 0.0f64;
            for m in 0..d - 1 {
                worst = worst.max((image[m] - Complex64::new(n as f64, 0.0) * col[m]).norm());
            }
            prop_assert!(worst < 1e-10, "column {} eigen residual {}", n, worst);
        }
        // The certified inverse exists at these dimensions.
        let inv = similarity::invert(&sol);
        prop_assert!(inv.is_ok());
    }

    #[test]
    fn pair_chain_respects_triangle_inequality(
        q in 0.9f64..1.5,
        u in 0.4f64..1.0,
    ) {
        let d = 12;
        let params = DeformParams::new(q, u, d).unwrap();
        let sol = similarity::solve(&params).unwrap();
        let fl = flow::displacement(u, d).unwrap();
        let pair = algebra::build_pair(&params, &sol, &fl).unwrap();
        let v = algebra::verify_pair(&pair);
        prop_assert!(
            v.commutator_vs_deformed <= v.commutator_vs_split + v.conjugation + 1e-9,
            "{:?}", v
        );
        // The conjugation identity sees only the displacement's own
        // truncation spill, which at D = 12 with u <= 1 sits well below
        // 1e-6; the inversion identities are protected to working
        // precision.
        prop_assert!(v.conjugation < 1e-6, "conjugation {}", v.conjugation);
        prop_assert!(v.invert_lowering < 1e-10);
        prop_assert!(v.invert_raising < 1e-10);
    }
}
