mod common;

use common::{
    admissible, classical_bernstein, classical_smoothness_defect, constraint_residual, families, pseudo_random, space,
    ORDERS,
};
use gentess::bernstein::cached_basis;
use gentess::sectionspace::{GeneratorPair, SectionSpec};

#[test]
fn random_splines_are_smooth() {
    for (name, m) in admissible() {
        for gen in families() {
            for (n, r) in [([4, 4], [1, 1]), ([5, 5], [1, 1]), ([6, 6], [2, 2]), ([5, 4], [1, 1])] {
                let sp = space(&m, gen, n, r);
                let a = pseudo_random(sp.minimal_determining_set().len(), 11);
                let done = sp.complete_coefficients(&a).unwrap();
                assert!(done.residual < 1e-9, "{name} residual {}", done.residual);
                let jumps = sp.smoothness_jumps(&done.coeffs, 200);
                assert!(m.cells.len() == 1 || jumps.samples >= 200);
                assert!(jumps.max_relative < 1e-7, "{name} {gen:?} n={n:?}: {}", jumps.max_relative);
                assert!(constraint_residual(&sp, &done.coeffs) < 1e-8, "{name}");
            }
        }
    }
}

#[test]
fn dual_basis_is_the_indicator_on_the_determining_set() {
    for (name, m) in admissible() {
        let sp = space(&m, GeneratorPair::HYPERBOLIC, [4, 4], [1, 1]);
        let dim = sp.minimal_determining_set().len();
        for k in (0..dim).step_by((dim / 10).max(1)) {
            let psi = sp.basis_function(k).unwrap();
            let gamma = sp.restrict_to_mds(&psi);
            for (l, g) in gamma.iter().enumerate() {
                let want = if l == k { 1.0 } else { 0.0 };
                assert!((g - want).abs() < 1e-10, "{name} xi={k} eta={l}");
            }
            assert!(constraint_residual(&sp, &psi) < 1e-8, "{name} xi={k}");
            assert!(!sp.support(&psi, 1e-12).is_empty());
        }
    }
}

#[test]
fn completion_is_linear() {
    let m = common::mesh("fig1_style");
    let sp = space(&m, GeneratorPair::ExpTrig { alpha: 0.2, beta: 0.4 }, [5, 5], [1, 1]);
    let dim = sp.minimal_determining_set().len();
    let (a, b) = (pseudo_random(dim, 1), pseudo_random(dim, 2));
    let ab: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 2.0 * x - 0.5 * y).collect();
    let [pa, pb, pab] = [a, b, ab].map(|v| sp.complete_coefficients(&v).unwrap().coeffs);
    for k in 0..pa.values.len() {
        let lin = 2.0 * pa.values[k] - 0.5 * pb.values[k];
        assert!((lin - pab.values[k]).abs() < 1e-10 * lin.abs().max(1.0));
    }
}

#[test]
fn polynomial_pair_gives_classical_bernstein() {
    for n in 3..=5 {
        for (a, b) in [(0.0, 1.0), (-1.5, 0.25), (2.0, 7.0)] {
            let basis =
                cached_basis(&SectionSpec::new(GeneratorPair::PolynomialDegenerate, n).on(a, b).unwrap()).unwrap();
            for k in 0..=200 {
                let x = a + (b - a) * k as f64 / 200.0;
                let v = basis.eval_all(0, x);
                for (i, vi) in v.iter().enumerate() {
                    assert!((vi - classical_bernstein(n - 1, i, a, b, x)).abs() < 1e-10, "n={n} i={i} x={x}");
                }
            }
        }
    }
}

#[test]
fn polynomial_propagation_matches_classical_bezier() {
    for (name, m) in admissible() {
        for (n, r) in ORDERS {
            let sp = space(&m, GeneratorPair::PolynomialDegenerate, n, r);
            let a = pseudo_random(sp.minimal_determining_set().len(), 5);
            let done = sp.complete_coefficients(&a).unwrap();
            let defect = classical_smoothness_defect(&sp, &done.coeffs);
            assert!(defect < 1e-9, "{name} n={n:?} r={r:?}: {defect}");
        }
    }
}

#[test]
fn classical_oracle_detects_broken_smoothness() {
    let m = common::mesh("tjunction_1");
    let sp = space(&m, GeneratorPair::PolynomialDegenerate, [4, 4], [1, 1]);
    let a = pseudo_random(sp.minimal_determining_set().len(), 5);
    let mut c = sp.complete_coefficients(&a).unwrap().coeffs;
    c.set(1, 1, 0, c.get(1, 1, 0) + 1e-3);
    assert!(classical_smoothness_defect(&sp, &c) > 1e-4);
}
