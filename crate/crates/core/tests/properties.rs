mod common;

use gentess::bernstein::{build_basis, End};
use gentess::gspace::GSplineSpace;
use gentess::oracle::brute_force_dimension;
use gentess::sectionspace::{check_condition2, make_section_space, GeneratorPair, SectionSpec};
use gentess::tmesh::{load_mesh_json, tensor_grid, Coord, MeshDocument, Rect, SectionPair, TMesh};
use proptest::prelude::*;

fn generators() -> impl Strategy<Value = GeneratorPair> {
    prop_oneof![
        (0.2f64..3.0).prop_map(|l| GeneratorPair::TwoExponentials { lambda1: l, lambda2: -l }),
        (-2.0f64..2.0).prop_map(|lambda| GeneratorPair::ExpTimesLinear { lambda }),
        (-1.0f64..1.0, 0.3f64..2.0).prop_map(|(alpha, beta)| GeneratorPair::ExpTrig { alpha, beta }),
        Just(GeneratorPair::PolynomialDegenerate),
    ]
}

/// Strictly increasing breakpoints with dyadic spacings in `[1/4, 2]`.
fn breakpoints(max_cells: usize) -> impl Strategy<Value = Vec<Coord>> {
    (-4i64..4, prop::collection::vec(1i64..=8, 1..=max_cells)).prop_map(|(start, steps)| {
        let mut xs = vec![Coord::from_integer(start)];
        for s in steps {
            let last = *xs.last().unwrap();
            xs.push(last + Coord::new(s, 4));
        }
        xs
    })
}

/// Univariate spline dimension on `cells` intervals.
fn univariate_dim(n: usize, r: usize, cells: usize) -> usize {
    n + (cells - 1) * (n - r - 1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn basis_is_a_positive_partition_of_unity(gen in generators(), n in 3usize..=6, a in -2.0f64..2.0, len in 0.2f64..1.5) {
        let sp = make_section_space(gen, n, a, a + len).unwrap();
        prop_assume!(sp.is_valid());
        let basis = build_basis(&sp).unwrap();
        for k in 0..=100 {
            let v = basis.eval_all(0, a + len * k as f64 / 100.0);
            prop_assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(v.iter().all(|x| *x >= -1e-12));
        }
        prop_assert!((basis.endpoint_derivative(End::Left, 0, 0) - 1.0).abs() < 1e-12);
        prop_assert!((basis.endpoint_derivative(End::Right, 0, n - 1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn derivatives_of_the_partition_vanish(gen in generators(), n in 3usize..=5, a in -1.0f64..1.0, len in 0.3f64..1.5) {
        let sp = make_section_space(gen, n, a, a + len).unwrap();
        prop_assume!(sp.is_valid());
        let basis = build_basis(&sp).unwrap();
        for order in 1..n {
            let scale = (0..n).fold(1.0f64, |m, i| m.max(basis.endpoint_derivative(End::Left, order, i).abs()));
            let sum: f64 = basis.eval_all(order, a + 0.37 * len).iter().sum();
            prop_assert!(sum.abs() < 1e-9 * scale, "order {} sum {}", order, sum);
        }
    }

    #[test]
    fn trig_condition_holds_below_half_period(alpha in -1.0f64..1.0, beta in 0.2f64..3.0, n in 3usize..=6, frac in 0.05f64..0.97) {
        let gen = GeneratorPair::ExpTrig { alpha, beta };
        let period = std::f64::consts::PI / beta;
        let short = make_section_space(gen, n, 0.5, 0.5 + frac * period).unwrap();
        prop_assert!(check_condition2(&short));
        let long = make_section_space(gen, n, 0.5, 0.5 + period / frac.max(0.5) + 1e-3).unwrap();
        prop_assert!(!check_condition2(&long));
    }

    #[test]
    fn mesh_documents_round_trip(xs in breakpoints(4), ys in breakpoints(4), r in 0usize..=1) {
        let mesh = TMesh::new(tensor_grid(&xs, &ys)).unwrap();
        let spec = SectionSpec::new(GeneratorPair::HYPERBOLIC, 4);
        let doc = MeshDocument::from_mesh(&mesh, Some(SectionPair { s: spec, t: spec }), Some([r, r]));
        let (back, doc2) = load_mesh_json(&doc.to_json()).unwrap();
        prop_assert_eq!(&back.cells, &mesh.cells);
        prop_assert_eq!(doc2, doc);
        prop_assert_eq!(back.stats().unwrap().j_nt, mesh.stats().unwrap().j_nt);
    }

    #[test]
    fn tensor_grids_have_product_dimension(xs in breakpoints(3), ys in breakpoints(3), (n, r) in prop_oneof![Just((4usize, 1usize)), Just((3, 0)), Just((5, 1)), Just((6, 2))]) {
        let mesh = TMesh::new(tensor_grid(&xs, &ys)).unwrap();
        let spec = SectionSpec::new(GeneratorPair::HYPERBOLIC, n);
        let sp = GSplineSpace::new(mesh, [spec; 2], [r, r]).unwrap();
        let want = univariate_dim(n, r, xs.len() - 1) * univariate_dim(n, r, ys.len() - 1);
        prop_assert_eq!(sp.dimension().unwrap(), want);
        prop_assert_eq!(sp.minimal_determining_set().len(), want);
    }

    #[test]
    fn completion_is_linear(seed_a in 0u64..1000, seed_b in 0u64..1000, lambda in -3.0f64..3.0) {
        let mesh = common::mesh("tjunction_2");
        let sp = common::space(&mesh, GeneratorPair::HYPERBOLIC, [4, 4], [1, 1]);
        let dim = sp.minimal_determining_set().len();
        let (a, b) = (common::pseudo_random(dim, seed_a), common::pseudo_random(dim, seed_b));
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + lambda * y).collect();
        let [pa, pb, pm] = [a, b, mix].map(|v| sp.complete_coefficients(&v).unwrap().coeffs);
        for k in 0..pa.values.len() {
            let lin = pa.values[k] + lambda * pb.values[k];
            prop_assert!((lin - pm.values[k]).abs() < 1e-10 * lin.abs().max(1.0));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Splitting one cell of a tensor grid creates T-junctions; formula, determining
    /// set and brute-force nullity must still agree.
    #[test]
    fn split_cells_keep_the_dimension_consistent(xs in breakpoints(3), ys in breakpoints(3), pick in 0usize..9, vertical: bool) {
        let mut cells = tensor_grid(&xs, &ys);
        let c = cells.remove(pick % cells.len());
        let two = Coord::from_integer(2);
        if vertical {
            let xm = (c.x0 + c.x1) / two;
            cells.push(Rect::new(c.x0, xm, c.y0, c.y1));
            cells.push(Rect::new(xm, c.x1, c.y0, c.y1));
        } else {
            let ym = (c.y0 + c.y1) / two;
            cells.push(Rect::new(c.x0, c.x1, c.y0, ym));
            cells.push(Rect::new(c.x0, c.x1, ym, c.y1));
        }
        let mesh = TMesh::new(cells).unwrap();
        prop_assume!(mesh.is_regular() && !mesh.has_cycles());
        let spec = SectionSpec::new(GeneratorPair::ExpTrig { alpha: 0.2, beta: 0.4 }, 4);
        let sp = GSplineSpace::new(mesh.clone(), [spec; 2], [1, 1]).unwrap();
        let oracle = brute_force_dimension(&mesh, sp.sections, [1, 1]).unwrap();
        prop_assert_eq!(sp.dimension().unwrap(), oracle);
        prop_assert_eq!(sp.minimal_determining_set().len(), oracle);
    }
}
