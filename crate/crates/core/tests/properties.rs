use indicial_lab::boundary_algebra::{BiPoly, Poly, Series, TermExponent};
use indicial_lab::characteristic::{indicial_roots, p_q_from_roots, validation_grid, OperatorSpec};
use indicial_lab::expansion_engine::{expand, ExpansionOptions};
use indicial_lab::grid::{graded_nodes, GridFunction};
use indicial_lab::ode_core::{solve_term, ModelODE};
use indicial_lab::singular_integrals::{holder_seminorm_est, op_lower, op_upper, Direction, PowerLogSum};
use proptest::prelude::*;

fn poly(max_deg: usize) -> impl Strategy<Value = Poly> {
    prop::collection::vec(-1.0..1.0f64, 1..=max_deg + 1).prop_map(Poly::new)
}

fn exponent() -> impl Strategy<Value = TermExponent> {
    (1..4i32, 0..2u8, 0..3u32).prop_map(|(i, g, j)| TermExponent::new(i, g, j))
}

fn series(gamma: Poly) -> impl Strategy<Value = Series> {
    prop::collection::vec((exponent(), poly(3)), 0..5)
        .prop_map(move |terms| Series::from_terms(gamma.clone(), terms))
}

fn gamma() -> impl Strategy<Value = Poly> {
    (0.3..0.7f64, -0.15..0.15f64).prop_map(|(a, b)| Poly::new(vec![a, b]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn series_addition_commutes_and_associates(
        (a, b, c) in gamma().prop_flat_map(|g| (series(g.clone()), series(g.clone()), series(g)))
    ) {
        let ab = a.add(&b).unwrap();
        let ba = b.add(&a).unwrap();
        prop_assert!(ab.sub(&ba).unwrap().max_coeff_norm() <= 1e-14);
        let left = ab.add(&c).unwrap();
        let right = a.add(&b.add(&c).unwrap()).unwrap();
        prop_assert!(left.sub(&right).unwrap().max_coeff_norm() <= 1e-14);
        let terms = left.to_terms();
        for w in terms.windows(2) {
            prop_assert!(w[0].exponent != w[1].exponent);
        }
    }

    #[test]
    fn time_derivative_matches_differences(
        s in gamma().prop_flat_map(series), x in -1.0..1.0f64, t in 0.1..0.9f64
    ) {
        let h = 1e-4;
        let fd = (s.evaluate(x, t + h).unwrap() - s.evaluate(x, t - h).unwrap()) / (2.0 * h);
        let exact = s.diff_t().evaluate(x, t).unwrap();
        prop_assert!((fd - exact).abs() <= 1e-6 * (1.0 + exact.abs()), "{fd} vs {exact}");
    }

    #[test]
    fn tangential_derivative_keeps_log_power_for_constant_gamma(
        s in (0.3..0.7f64).prop_flat_map(|g| series(Poly::constant(g)))
    ) {
        prop_assert!(s.diff_x().max_log_power() <= s.max_log_power());
    }

    #[test]
    fn roots_round_trip(lo in -1.5..-0.2f64, dlo in -0.1..0.1f64, hi in 1.2..1.8f64, dhi in -0.1..0.1f64, a in 0.5..2.0f64) {
        let (ml, mu) = (Poly::new(vec![lo, dlo]), Poly::new(vec![hi, dhi]));
        let op = OperatorSpec::from_roots(&ml, &mu, &Poly::constant(a), 1.0);
        let cd = indicial_roots(&op, &validation_grid()).unwrap();
        let (p, q) = p_q_from_roots(&cd);
        for x in validation_grid() {
            let (pb, qc) = (p.eval(x) - 1.0, q.eval(x));
            let disc = (pb * pb - 4.0 * qc).sqrt();
            let (r1, r2) = ((-pb - disc) / 2.0, (-pb + disc) / 2.0);
            prop_assert!(r1 < 0.0 && r2 > 0.0);
            prop_assert!((r1 - ml.eval(x)).abs() <= 1e-10 && (r2 - mu.eval(x)).abs() <= 1e-10);
        }
    }

    #[test]
    fn solve_term_is_linear_and_round_trips(
        e in exponent(), c in poly(3), lambda in -5.0..5.0f64, g in gamma()
    ) {
        let ode = ModelODE {
            p: &Poly::constant(1.0) - &(&Poly::constant(-0.5) + &(&Poly::constant(1.0) + &g)),
            q: (&Poly::constant(1.0) + &g).scale(-0.5),
            m_lower: Poly::constant(-0.5),
            m_upper: &Poly::constant(1.0) + &g,
            gamma: g.clone(),
            int_part: 1,
            resonant: false,
            r: 1.0,
        };
        prop_assume!(!(e.i == 1 && e.g == 1));
        let u = solve_term(&ode, e, &c).unwrap();
        let ul = solve_term(&ode, e, &c.scale(lambda)).unwrap();
        prop_assert!(ul.sub(&u.scale(lambda)).unwrap().max_coeff_norm() <= 1e-13 * (1.0 + u.max_coeff_norm() * lambda.abs()));
        let rhs = Series::monomial(g, e, c);
        prop_assert!(ode.apply(&u).sub(&rhs).unwrap().max_coeff_norm() <= 1e-12 * (1.0 + u.max_coeff_norm()));
    }

    #[test]
    fn singular_operators_are_linear(
        p1 in 1.2..3.0f64, p2 in 1.2..3.0f64, al in -2.0..2.0f64, be in -2.0..2.0f64,
        a in 0.2..1.1f64, x in -1.0..1.0f64, t in 0.01..1.0f64, nu in 0..2usize
    ) {
        let f = PowerLogSum::single(Poly::new(vec![1.0, 0.3]), p1, 0);
        let g = PowerLogSum::single(Poly::new(vec![0.5, -0.2]), p2, 1);
        let comb = f.scaled(al).plus(&g.scaled(be));
        let a = Poly::constant(a);
        for op in [op_lower, op_upper] {
            let lhs = op(&comb, &a, nu, x, t).unwrap();
            let rhs = al * op(&f, &a, nu, x, t).unwrap() + be * op(&g, &a, nu, x, t).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn holder_estimates_grow_under_refinement_and_respect_closed_form(alpha in 0.2..0.95f64) {
        let xs = [-0.5, 0.0, 0.5];
        let mut prev = 0.0;
        for n in [64usize, 128, 256] {
            let g = GridFunction::from_fn(&xs, &graded_nodes(1.0, n, 4.0), |_, t| t.powf(alpha)).unwrap();
            let est = holder_seminorm_est(&g, alpha, Direction::T).unwrap();
            prop_assert!(est <= 1.0 * 1.02, "estimate {est} above the seminorm 1");
            prop_assert!(est >= prev * (1.0 - 1e-12));
            prev = est;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn expansion_respects_the_triangle(slope in 0.1..0.25f64, cross in -0.3..0.3f64, data in poly(2)) {
        let s = Poly::new(vec![1.5, slope]);
        let mut op = OperatorSpec::with_root(1.0, 0.0, &s, 1.0);
        op.a_xt = BiPoly::constant(cross);
        let cd = indicial_roots(&op, &validation_grid()).unwrap();
        let ode = ModelODE::new(&cd, 1.0);
        let e = expand(&ode, &op, &Series::new(ode.gamma.clone()), &data, 3, &ExpansionOptions::default()).unwrap();
        for c in &e.c_log {
            prop_assert!(c.j as i32 <= c.i - cd.int_part);
        }
    }
}
