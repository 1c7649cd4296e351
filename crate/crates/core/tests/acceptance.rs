//! Acceptance suite. One PASS/FAIL line per criterion with its tolerance and
//! runtime. Criteria listed in `KNOWN_BLOCKED` are expected to fail for the
//! reasons given in the README; any other failure makes the binary exit 1.

use indicial_lab::boundary_algebra::{chebyshev_nodes, BiPoly, Poly, Series, TermExponent};
use indicial_lab::characteristic::{char_poly, indicial_roots, validation_grid, OperatorSpec};
use indicial_lab::expansion_engine::{borel_sum, construct_example, expand, BorelResult, ExampleMode, ExpansionOptions};
use indicial_lab::fd_oracle::{convergence_orders, oracle_compare, solve_bvp, solve_bvp_subtracted, BvpProblem, Mesh};
use indicial_lab::grid::{grading_exponent, graded_nodes, log_spaced, GridFunction};
use indicial_lab::ode_core::{solve_quadrature, solve_series, solve_term, ModelODE};
use indicial_lab::singular_integrals::{
    classify_regime, decay_rate_fit, holder_seminorm_est, op_grid, Direction, Kernel, PowerLogSum, PowerLogTerm,
    Regime,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

/// Criterion 6 (the second half: slope gain at k = [m] + 2) and criterion 8.
const KNOWN_BLOCKED: &[usize] = &[6, 8];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn const_ode(m_lower: f64, m_upper: f64, resonant: bool) -> ModelODE {
    let int_part = m_upper.floor() as i32;
    ModelODE {
        p: Poly::constant(1.0 - m_lower - m_upper),
        q: Poly::constant(m_lower * m_upper),
        m_lower: Poly::constant(m_lower),
        m_upper: Poly::constant(m_upper),
        gamma: Poly::constant(if resonant { 0.0 } else { m_upper - int_part as f64 }),
        int_part,
        resonant,
        r: 1.0,
    }
}

fn random_poly(rng: &mut ChaCha8Rng, deg: usize, lo: f64, hi: f64) -> Poly {
    // coefficients summing in absolute value to at most 1 keep |p - c0| <= 1 on [-1, 1]
    let mut c = vec![rng.gen_range(lo..hi)];
    let w: Vec<f64> = (0..deg).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = w.iter().map(|v: &f64| v.abs()).sum::<f64>().max(1.0);
    c.extend(w.iter().map(|v| v / norm));
    Poly::new(c)
}

fn varying_op() -> (OperatorSpec, Poly) {
    let s = Poly::new(vec![1.5, 0.2]);
    let mut op = OperatorSpec::with_root(1.0, 0.0, &s, 1.0);
    op.a_xt = BiPoly::constant(0.2);
    (op, s)
}

fn constant_op() -> (OperatorSpec, Poly) {
    let s = Poly::constant(1.5);
    let mut op = OperatorSpec::with_root(1.0, 0.0, &s, 1.0);
    op.a_xt = BiPoly::constant(0.2);
    op.c = BiPoly::new(vec![op.c.t_coeff(0), Poly::new(vec![0.3, 0.1])]);
    (op, s)
}

fn indicial() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut worst_p = 0.0f64;
    let mut worst_res = 0.0f64;
    for _ in 0..20 {
        let a_nn = random_poly(&mut rng, 1, 1.0, 2.0);
        let m_lower = &random_poly(&mut rng, 1, -1.5, -0.5).scale(0.5) - &Poly::constant(0.3);
        let base = rng.gen_range(1..3) as f64;
        let m_upper = Poly::new(vec![base + rng.gen_range(0.3..0.7), rng.gen_range(-0.2..0.2)]);
        let mut op = OperatorSpec::from_roots(&m_lower, &m_upper, &a_nn, 1.0);
        op.a_xx = BiPoly::from(random_poly(&mut rng, 3, 1.5, 2.5));
        op.a_xt = BiPoly::constant(rng.gen_range(-0.3..0.3));
        op.b_x = BiPoly::from(random_poly(&mut rng, 3, -0.5, 0.5));
        op.c = BiPoly::new(vec![op.c.t_coeff(0), random_poly(&mut rng, 2, -0.5, 0.5)]);
        let cd = match indicial_roots(&op, &validation_grid()) {
            Ok(cd) => cd,
            Err(e) => return outcome(false, format!("indicial_roots failed: {e}")),
        };
        let ode = ModelODE::new(&cd, 1.0);
        for x in chebyshev_nodes(64) {
            let cp = char_poly(&op, x).expect("valid operator");
            for m in [&cd.m_lower, &cd.m_upper] {
                worst_p = worst_p.max(cp.eval(m.eval(x)).abs());
                for t in [1e-3, 0.1, 0.5, 1.0] {
                    worst_res = worst_res.max(ode.power_residual(m, x, t).abs());
                }
            }
        }
    }
    outcome(
        worst_p <= 1e-10 && worst_res <= 1e-10,
        format!("max |P(m)| = {worst_p:.3e}, max model residual = {worst_res:.3e} (tolerance 1e-10)"),
    )
}

fn round_trip() -> Outcome {
    let g = |ode: &ModelODE, e: TermExponent, a: f64, expected: &[(TermExponent, f64)]| -> f64 {
        let rhs = Series::monomial(ode.gamma.clone(), e, Poly::constant(a));
        let sol = solve_term(ode, e, &Poly::constant(a)).expect("solvable");
        let back = ode.apply(&sol).sub(&rhs).expect("shared lattice");
        let mut err = back.max_coeff_norm();
        for &(te, c) in expected {
            err = err.max((sol.coeff(te).c0() - c).abs());
        }
        err
    };
    let e1 = g(&const_ode(-0.5, 1.5, false), TermExponent::new(2, 0, 0), 1.0, &[(TermExponent::new(2, 0, 0), 0.8)]);
    let e2 = g(&const_ode(-1.0, 2.0, true), TermExponent::new(2, 0, 0), 1.0, &[(TermExponent::new(2, 0, 1), 1.0 / 3.0)]);
    let e3 = g(
        &const_ode(-0.5, 1.5, false),
        TermExponent::new(2, 1, 1),
        1.0,
        &[(TermExponent::new(2, 1, 1), 1.0 / 3.0), (TermExponent::new(2, 1, 0), -4.0 / 9.0)],
    );
    let worst = e1.max(e2).max(e3);
    outcome(
        worst <= 1e-12,
        format!("non-resonant {e1:.1e}, resonant {e2:.1e}, log cascade {e3:.1e} (tolerance 1e-12)"),
    )
}

fn quadrature_consistency() -> Outcome {
    let (op, _) = varying_op();
    let cd = indicial_roots(&op, &validation_grid()).expect("roots");
    let ode = ModelODE::new(&cd, 1.0);
    let gamma = ode.gamma.clone();
    let f = Series::from_terms(
        gamma.clone(),
        [
            (TermExponent::new(2, 0, 0), Poly::new(vec![1.0, 0.3])),
            (TermExponent::new(2, 1, 1), Poly::new(vec![0.5, -0.2, 0.1])),
            (TermExponent::new(3, 1, 0), Poly::new(vec![-0.7])),
        ],
    );
    let particular = solve_series(&ode, &f).expect("series solve");
    let data = Poly::new(vec![0.4, 0.1, -0.2]);
    let ts: Vec<f64> = (0..40).map(|k| 0.05 + 0.95 * k as f64 / 39.0).collect();
    let xs: Vec<f64> = chebyshev_nodes(9).collect();
    let fe = |x: f64, t: f64| f.evaluate(x, t).expect("t > 0");
    let quad = match solve_quadrature(&ode, &fe, &data, &xs, &ts, 2.0) {
        Ok(q) => q,
        Err(e) => return outcome(false, format!("quadrature failed: {e}")),
    };
    let mut worst = 0.0f64;
    for (ix, &x) in xs.iter().enumerate() {
        let (l, m) = (ode.m_lower.eval(x), ode.m_upper.eval(x));
        let diff: Vec<f64> =
            ts.iter().zip(&quad[ix]).map(|(&t, &q)| q - particular.evaluate(x, t).expect("t > 0")).collect();
        // least squares on {t^l, t^m} by the normal equations
        let (mut s11, mut s12, mut s22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&t, &d) in ts.iter().zip(&diff) {
            let (p1, p2) = (t.powf(l), t.powf(m));
            s11 += p1 * p1;
            s12 += p1 * p2;
            s22 += p2 * p2;
            b1 += p1 * d;
            b2 += p2 * d;
        }
        let det = s11 * s22 - s12 * s12;
        let (c1, c2) = ((b1 * s22 - b2 * s12) / det, (s11 * b2 - s12 * b1) / det);
        let scale = diff.iter().fold(0.0f64, |a, d| a.max(d.abs()));
        let misfit = ts
            .iter()
            .zip(&diff)
            .map(|(&t, &d)| (d - c1 * t.powf(l) - c2 * t.powf(m)).abs())
            .fold(0.0f64, f64::max);
        worst = worst.max(misfit / scale);
    }
    outcome(worst <= 1e-6, format!("relative misfit {worst:.3e} (tolerance 1e-6)"))
}

fn example_reproduction() -> Outcome {
    let (op, s) = constant_op();
    let ex = construct_example(&op, ExampleMode::NonintegerConstant, &s, &Poly::new(vec![1.0, 0.5, 0.25, 0.1]), 2)
        .expect("constant example");
    let xs: Vec<f64> = (0..=16).map(|k| -1.0 + k as f64 / 8.0).collect();
    let ts = log_spaced(1e-5, 1e-3, 60);
    let fg = GridFunction::try_from_fn(&xs, &ts, |x, t| ex.f.evaluate(x, t)).expect("grid");
    let slope = decay_rate_fit(&fg, (1e-5, 1e-3)).expect("fit").slope;
    let slope_ok = (slope - 4.5).abs() <= 0.05;

    let psi_error = |ex: &indicial_lab::expansion_engine::ManufacturedExample, op: &OperatorSpec| -> f64 {
        let e = expand(&ex.ode, op, &ex.f, &ex.u.at_t_one(), 3, &ExpansionOptions::default()).expect("expand");
        ex.psis
            .iter()
            .map(|p| (&e.c_log_at(ex.ode.int_part + p.i as i32, p.j) - &p.coeff).sup_norm())
            .fold(0.0, f64::max)
    };
    let psi_const = psi_error(&ex, &op);

    let (vop, vs) = varying_op();
    let vex = construct_example(&vop, ExampleMode::Varying, &vs, &Poly::new(vec![1.0, 0.5]), 2).expect("varying");
    let cancel = vex.cancellation_residual;
    let psi_var = psi_error(&vex, &vop);
    let psi = psi_const.max(psi_var);
    outcome(
        slope_ok && cancel <= 1e-10 && psi <= 1e-8,
        format!(
            "f slope {slope:.4} vs s + 3 = 4.5 (tolerance 0.05), cancellation {cancel:.1e} (tolerance 1e-10), \
             psi recovery {psi:.1e} (tolerance 1e-8)"
        ),
    )
}

fn dichotomy() -> Outcome {
    let opts = ExpansionOptions::default();
    let mut constant_worst = 0.0f64;
    for (sv, b) in [(1.5, 0.0), (1.3, 0.4), (2.7, -0.2)] {
        let s = Poly::constant(sv);
        let mut op = OperatorSpec::with_root(1.0, b, &s, 1.0);
        op.a_xx = BiPoly::from(Poly::new(vec![1.0, 0.2, 0.1]));
        op.a_xt = BiPoly::constant(0.2);
        op.b_x = BiPoly::from(Poly::new(vec![0.1, 0.3]));
        op.c = BiPoly::new(vec![op.c.t_coeff(0), Poly::new(vec![0.3, 0.1])]);
        let cd = indicial_roots(&op, &validation_grid()).expect("roots");
        let ode = ModelODE::new(&cd, 1.0);
        let k = (cd.int_part + 3) as usize;
        let e = expand(&ode, &op, &Series::new(ode.gamma.clone()), &Poly::new(vec![1.0, 0.2, 0.3]), k, &opts)
            .expect("expand");
        constant_worst = constant_worst.max(e.max_log_coeff());
    }
    let (op, _) = varying_op();
    let cd = indicial_roots(&op, &validation_grid()).expect("roots");
    let ode = ModelODE::new(&cd, 1.0);
    let m = cd.int_part;
    let e = expand(&ode, &op, &Series::new(ode.gamma.clone()), &Poly::constant(1.0), (m + 2) as usize, &opts)
        .expect("expand");
    let first_log = (m..=m + 2).map(|i| e.c_log_at(i, 1).sup_norm()).fold(0.0, f64::max);
    outcome(
        constant_worst <= 1e-12 && first_log > 1e-6,
        format!(
            "constant: max |c_ij|, j >= 1 = {constant_worst:.1e} (tolerance 1e-12); varying: max |c_i1| = \
             {first_log:.3e} (tolerance > 1e-6)"
        ),
    )
}

fn oracle_decay() -> Outcome {
    let (op, s) = varying_op();
    let ex = construct_example(&op, ExampleMode::Varying, &s, &Poly::new(vec![1.0, 0.5]), 4).expect("example");
    let cd = indicial_roots(&op, &validation_grid()).expect("roots");
    let alpha = 0.9;
    let opts = ExpansionOptions { alpha, ..Default::default() };
    let m = cd.int_part as usize;
    let e = expand(&ex.ode, &op, &ex.f, &ex.u.at_t_one(), m + 4, &opts).expect("expand");
    let prob = BvpProblem::manufactured(&op, &ex.f, &ex.u);
    let window = (1e-3, 1e-1);
    let mesh = Mesh::graded(128, 512, 1.0, 2.0, false).expect("mesh");
    let mut sl = Vec::new();
    let mut exact_sl = Vec::new();
    for k in [m, m + 2] {
        let et = e.truncated(k);
        let u = solve_bvp_subtracted(&prob, &mesh, &et.to_series()).expect("fd solve");
        sl.push(oracle_compare(&u, &et, 0.0, window, None).expect("compare").1.fit.slope);
        // same comparison against the manufactured solution itself, for the diagnostic
        let exact = u.map(|x, t, _| if t > 0.0 { ex.u.evaluate(x, t).unwrap_or(f64::NAN) } else { 0.0 }).expect("map");
        exact_sl.push(oracle_compare(&exact, &et, 0.0, window, None).expect("compare").1.fit.slope);
    }
    let floor = m as f64 + alpha.min(cd.gamma_min()) - 0.1;
    let gain = sl[1] - sl[0];
    outcome(
        sl[0] >= floor && gain >= 1.5,
        format!(
            "slope at k = {m}: {:.4} (tolerance >= {floor:.2}); gain at k = {}: {gain:.4} (tolerance >= 1.5); \
             128x512 graded mesh, beta = 2; without FD error the gain is {:.4}",
            sl[0],
            m + 2,
            exact_sl[1] - exact_sl[0]
        ),
    )
}

fn appendix_sweep() -> Outcome {
    let xs = [-0.75, -0.25, 0.25, 0.75];
    let ts = log_spaced(1e-4, 1e-1, 40);
    let profile = Poly::new(vec![1.0, 0.3]);
    let cases: [(Kernel, f64, usize, f64, Regime); 6] = [
        (Kernel::Lower, 0.7, 2, 0.4, Regime::Lower),
        (Kernel::Upper, 1.3, 1, 0.6, Regime::UpperAlphaAbove),
        (Kernel::Upper, 1.6, 1, 0.3, Regime::UpperAlphaBelow),
        (Kernel::Upper, 1.4, 3, 0.5, Regime::UpperHighOrder),
        (Kernel::Upper, 2.0, 2, 0.5, Regime::IntegerLow),
        (Kernel::Upper, 2.0, 3, 0.5, Regime::IntegerHigh),
    ];
    let mut worst_rel = 0.0f64;
    let mut worst_slope = 0.0f64;
    let mut regimes_ok = true;
    for (kernel, av, k, alpha, regime) in cases {
        let a = Poly::constant(av);
        regimes_ok &= classify_regime(kernel, &a, alpha, k).regime == regime;
        // inputs t^q with q the regime's decay at nu = 0
        let q = match regime {
            Regime::Lower | Regime::UpperHighOrder | Regime::IntegerHigh => k as f64 + alpha,
            Regime::UpperAlphaAbove => av.floor() + alpha,
            Regime::UpperAlphaBelow => av.floor() + 1.0,
            Regime::IntegerLow => av + alpha,
        };
        let f = PowerLogSum { terms: vec![PowerLogTerm::new(profile.clone(), q, 0)] };
        for nu in 0..=1usize {
            let g = op_grid(kernel, &f, &a, nu, &xs, &ts).expect("operator");
            let falling = if nu == 1 { q } else { 1.0 };
            let denom = if kernel == Kernel::Lower { av + q } else { q - av };
            for (i, &x) in xs.iter().enumerate() {
                for (j, &t) in ts.iter().enumerate() {
                    let exact = profile.eval(x) * falling * t.powf(q - nu as f64) / denom;
                    worst_rel = worst_rel.max((g.values[i][j] - exact).abs() / exact.abs());
                }
            }
            let predicted = q - nu as f64;
            let slope = decay_rate_fit(&g, (1e-4, 1e-1)).expect("fit").slope;
            worst_slope = worst_slope.max((slope - predicted).abs());
        }
    }
    // index drop under t^{-c}: input t^alpha, output t^{alpha - c}
    let (alpha, c) = (0.6, 0.3);
    let xs9: Vec<f64> = (0..9).map(|k| -1.0 + 0.25 * k as f64).collect();
    let est = |n: usize, eps: f64| -> f64 {
        let g = GridFunction::from_fn(&xs9, &graded_nodes(0.5, n, 4.0), |_, t| t.powf(alpha - c)).expect("grid");
        holder_seminorm_est(&g, eps, Direction::T).expect("estimate")
    };
    let ns = [256usize, 512, 1024, 2048];
    let bounded: Vec<f64> = ns.iter().map(|&n| est(n, alpha - c - 0.01)).collect();
    let diverging: Vec<f64> = ns.iter().map(|&n| est(n, alpha - c + 0.05)).collect();
    let last_growth = bounded[3] / bounded[2] - 1.0;
    let min_growth = diverging.windows(2).map(|w| w[1] / w[0] - 1.0).fold(f64::INFINITY, f64::min);
    let drop_ok = last_growth <= 0.02 && min_growth >= 0.05;
    outcome(
        regimes_ok && worst_rel <= 1e-10 && worst_slope <= 0.05 && drop_ok,
        format!(
            "closed forms {worst_rel:.1e} (tolerance 1e-10), slopes {worst_slope:.1e} (tolerance 0.05), \
             index drop: growth at alpha-c-0.01 {last_growth:.4} (tolerance <= 0.02), at alpha-c+0.05 \
             {min_growth:.4} per doubling (tolerance >= 0.05)"
        ),
    )
}

fn borel_ledger() -> Outcome {
    match borel_sum(&|_, _| Poly::constant(1.0), 1, 12, 1.0) {
        Ok(res) => {
            let terms_ok = res.all_bounds_met();
            let tails_ok = (4..=10).all(|k| res.tail_norm(k) <= BorelResult::tail_bound(k));
            outcome(terms_ok && tails_ok, format!("term bounds met: {terms_ok}, tails k = 4..10 met: {tails_ok}"))
        }
        Err(e) => {
            let reached = (1..=12).rev().find(|&n| borel_sum(&|_, _| Poly::constant(1.0), 1, n, 1.0).is_ok());
            outcome(
                false,
                format!(
                    "{e}; bounds certified through i = {} (tolerance 2^-i per term, 2^(1-k) tails)",
                    reached.unwrap_or(0)
                ),
            )
        }
    }
}

fn fd_convergence() -> Outcome {
    let (op, s) = constant_op();
    let ex = construct_example(&op, ExampleMode::NonintegerConstant, &s, &Poly::new(vec![1.0, 0.5, 0.25, 0.1]), 2)
        .expect("example");
    let prob = BvpProblem::manufactured(&op, &ex.f, &ex.u);
    let beta = grading_exponent(0.5);
    let mut errs = Vec::new();
    for &(nx, nt) in &[(16, 64), (32, 128), (64, 256), (128, 512)] {
        let mesh = Mesh::graded(nx, nt, 1.0, beta, false).expect("mesh");
        let u = solve_bvp(&prob, &mesh).expect("fd solve");
        let exact = u.map(|x, t, _| if t > 0.0 { ex.u.evaluate(x, t).unwrap_or(f64::NAN) } else { 0.0 }).expect("map");
        errs.push(u.sub(&exact).expect("same mesh").max_abs_above(0.1));
    }
    let orders = convergence_orders(&errs);
    let worst = orders.iter().copied().fold(f64::INFINITY, f64::min);
    outcome(
        worst >= 1.8,
        format!(
            "errors {} orders {} (tolerance >= 1.8)",
            errs.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>().join(" "),
            orders.iter().map(|o| format!("{o:.3}")).collect::<Vec<_>>().join(" ")
        ),
    )
}

fn main() {
    let criteria: [(usize, &str, f64, fn() -> Outcome); 9] = [
        (1, "indicial correctness", 5.0, indicial),
        (2, "solver round-trip", 1.0, round_trip),
        (3, "quadrature/series consistency", 10.0, quadrature_consistency),
        (4, "manufactured example reproduction", 30.0, example_reproduction),
        (5, "constant/varying exponent dichotomy", 30.0, dichotomy),
        (6, "oracle remainder decay", 180.0, oracle_decay),
        (7, "singular integral sweep", 120.0, appendix_sweep),
        (8, "cutoff summation ledger", 60.0, borel_ledger),
        (9, "FD oracle convergence", 300.0, fd_convergence),
    ];
    let mut unexpected = Vec::new();
    for (n, name, limit, run) in criteria {
        let start = Instant::now();
        let out = run();
        let secs = start.elapsed().as_secs_f64();
        let pass = out.pass && secs < limit;
        println!(
            "{} criterion {n} ({name}): {} [runtime {secs:.2} s, limit {limit} s]",
            if pass { "PASS" } else { "FAIL" },
            out.detail
        );
        let blocked = KNOWN_BLOCKED.contains(&n);
        if !pass && !blocked {
            unexpected.push(n);
        }
        if pass && blocked {
            println!("note: criterion {n} is listed as blocked but passed");
        }
    }
    if unexpected.is_empty() {
        println!("acceptance: no failures outside the known-blocked list {KNOWN_BLOCKED:?}");
    } else {
        println!("acceptance: unexpected failures {unexpected:?}");
        std::process::exit(1);
    }
}
