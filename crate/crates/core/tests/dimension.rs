mod common;

use common::{admissible, families, mesh, space, ORDERS};
use gentess::gspace::{GSpaceError, GSplineSpace};
use gentess::oracle::{analyze, brute_force_dimension, OracleConfig};
use gentess::sectionspace::{GeneratorPair, SectionSpec};

#[test]
fn corpus_is_large_enough() {
    assert!(admissible().len() >= 8);
}

#[test]
fn formula_determining_set_and_oracle_agree() {
    for (name, m) in admissible() {
        for gen in families() {
            for (n, r) in ORDERS {
                let sp = space(&m, gen, n, r);
                let formula = sp.dimension().unwrap();
                let mds = sp.minimal_determining_set().len();
                let oracle = brute_force_dimension(&m, sp.sections, r).unwrap();
                assert_eq!((formula, mds), (oracle, oracle), "{name} {gen:?} n={n:?} r={r:?}");
            }
        }
    }
}

#[test]
fn mixed_orders_agree() {
    for name in ["tjunction_2", "chained_t", "fig1_style"] {
        let m = mesh(name);
        for (n, r) in [([4, 5], [1, 1]), ([5, 3], [1, 0]), ([6, 4], [2, 1])] {
            let sp = space(&m, GeneratorPair::HYPERBOLIC, n, r);
            let oracle = brute_force_dimension(&m, sp.sections, r).unwrap();
            assert_eq!(sp.dimension().unwrap(), oracle, "{name} n={n:?} r={r:?}");
            assert_eq!(sp.minimal_determining_set().len(), oracle);
        }
    }
}

#[test]
fn two_t_junctions_order_five() {
    let m = mesh("tjunction_2");
    assert_eq!(m.t_junction_count(), 2);
    let sp = space(&m, GeneratorPair::HYPERBOLIC, [5, 5], [1, 1]);
    assert_eq!(brute_force_dimension(&m, sp.sections, [1, 1]).unwrap(), sp.dimension().unwrap());
}

#[test]
fn oracle_nullity_is_stable_under_more_samples() {
    for name in ["tjunction_1", "nested_t", "hole"] {
        let m = mesh(name);
        let spec = SectionSpec::new(GeneratorPair::HYPERBOLIC, 5);
        let base = analyze(&m, [spec; 2], [1, 1], OracleConfig::default()).unwrap();
        let dense = analyze(&m, [spec; 2], [1, 1], OracleConfig { sample_factor: 2, vertex_orders: Some(3) }).unwrap();
        assert!(!base.ambiguous && !dense.ambiguous);
        assert_eq!(base.nullity, dense.nullity, "{name}");
    }
}

#[test]
fn inadmissible_meshes_are_rejected() {
    let spec = SectionSpec::new(GeneratorPair::HYPERBOLIC, 4);
    for name in ["pinwheel", "non_regular"] {
        let m = mesh(name);
        assert!(matches!(GSplineSpace::new(m, [spec; 2], [1, 1]), Err(GSpaceError::Precondition(_))), "{name}");
    }
}

#[test]
fn chained_mesh_has_chain_length_three() {
    assert_eq!(mesh("chained_t").stats().unwrap().beta, 3);
}
