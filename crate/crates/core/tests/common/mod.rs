//! Shared fixtures and an independent classical Bézier implementation.
#![allow(dead_code)]

use gentess::gspace::{BCoefficientMap, GSplineSpace};
use gentess::sectionspace::{GeneratorPair, SectionSpec};
use gentess::tmesh::{load_mesh_json, TMesh};

pub const CORPUS: [(&str, &str); 12] = [
    ("single_cell", include_str!("../../meshes/single_cell.json")),
    ("tensor_2x2", include_str!("../../meshes/tensor_2x2.json")),
    ("tensor_4x4", include_str!("../../meshes/tensor_4x4.json")),
    ("tjunction_1", include_str!("../../meshes/tjunction_1.json")),
    ("tjunction_2", include_str!("../../meshes/tjunction_2.json")),
    ("nested_t", include_str!("../../meshes/nested_t.json")),
    ("chained_t", include_str!("../../meshes/chained_t.json")),
    ("rows_t", include_str!("../../meshes/rows_t.json")),
    ("fig1_style", include_str!("../../meshes/fig1_style.json")),
    ("hole", include_str!("../../meshes/hole.json")),
    ("pinwheel", include_str!("../../meshes/pinwheel.json")),
    ("non_regular", include_str!("../../meshes/non_regular.json")),
];

pub fn mesh(name: &str) -> TMesh {
    let text = CORPUS.iter().find(|(n, _)| *n == name).unwrap_or_else(|| panic!("no mesh {name}")).1;
    load_mesh_json(text).unwrap().0
}

/// Regular meshes without cycles: the ones the determining set covers.
pub fn admissible() -> Vec<(&'static str, TMesh)> {
    CORPUS
        .iter()
        .map(|(n, text)| (*n, load_mesh_json(text).unwrap().0))
        .filter(|(_, m)| m.is_regular() && !m.has_cycles())
        .collect()
}

/// Generator families used for cross-mesh checks. The ExpTrig frequency keeps
/// `beta * length < pi` on every corpus edge.
pub fn families() -> [GeneratorPair; 2] {
    [GeneratorPair::HYPERBOLIC, GeneratorPair::ExpTrig { alpha: 0.2, beta: 0.4 }]
}

pub const ORDERS: [([usize; 2], [usize; 2]); 5] =
    [([3, 3], [0, 0]), ([4, 4], [0, 0]), ([4, 4], [1, 1]), ([5, 5], [1, 1]), ([6, 6], [2, 2])];

pub fn space(mesh: &TMesh, gen: GeneratorPair, n: [usize; 2], r: [usize; 2]) -> GSplineSpace {
    let specs = [SectionSpec::new(gen, n[0]), SectionSpec::new(gen, n[1])];
    GSplineSpace::new(mesh.clone(), specs, r).unwrap()
}

/// Deterministic pseudo-random values in `[-1, 1)`.
pub fn pseudo_random(len: usize, seed: u64) -> Vec<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, m| acc * (n - m) as f64 / (m + 1) as f64)
}

/// Classical Bernstein polynomial of degree `deg` on `[a, b]`.
pub fn classical_bernstein(deg: usize, i: usize, a: f64, b: f64, x: f64) -> f64 {
    let u = (x - a) / (b - a);
    binomial(deg, i) * u.powi(i as i32) * (1.0 - u).powi((deg - i) as i32)
}

/// Blossom of the polynomial with Bézier coefficients `c` on `[a, b]`, evaluated
/// at the arguments `xs` (de Casteljau with one argument per level).
pub fn blossom(c: &[f64], a: f64, b: f64, xs: &[f64]) -> f64 {
    let mut w = c.to_vec();
    for (level, &x) in xs.iter().enumerate() {
        let u = (x - a) / (b - a);
        for k in 0..w.len() - 1 - level {
            w[k] = (1.0 - u) * w[k] + u * w[k + 1];
        }
    }
    w[0]
}

/// Bézier coefficients of the same polynomial on `[c, d]`: blossom values
/// `f(c, ..., c, d, ..., d)`.
pub fn reparametrize(coeffs: &[f64], a: f64, b: f64, c: f64, d: f64) -> Vec<f64> {
    let deg = coeffs.len() - 1;
    (0..=deg)
        .map(|i| {
            let xs: Vec<f64> = (0..deg).map(|k| if k < deg - i { c } else { d }).collect();
            blossom(coeffs, a, b, &xs)
        })
        .collect()
}

/// Tensor patch `p[i][j]` on `from` re-expressed on `to` (both `[a, b, c, d]`).
pub fn reparametrize_patch(p: &[Vec<f64>], from: [f64; 4], to: [f64; 4]) -> Vec<Vec<f64>> {
    let rows: Vec<Vec<f64>> = p.iter().map(|row| reparametrize(row, from[2], from[3], to[2], to[3])).collect();
    let n2 = rows[0].len();
    let mut out = vec![vec![0.0; n2]; rows.len()];
    for j in 0..n2 {
        let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        for (i, v) in reparametrize(&col, from[0], from[1], to[0], to[1]).into_iter().enumerate() {
            out[i][j] = v;
        }
    }
    out
}

fn patch(space: &GSplineSpace, coeffs: &BCoefficientMap, cell: usize) -> Vec<Vec<f64>> {
    let [n1, n2] = space.n;
    (0..n1).map(|i| (0..n2).map(|j| coeffs.get(cell, i, j)).collect()).collect()
}

/// Largest mismatch between the near-edge coefficients of every cell and the
/// classical C^r conditions: the neighbor's polynomial, re-expressed on the
/// cell, must share the first `r + 1` rows (or columns) next to the common side.
/// Valid only for the polynomial generator pair.
pub fn classical_smoothness_defect(space: &GSplineSpace, coeffs: &BCoefficientMap) -> f64 {
    let [n1, n2] = space.n;
    let [r1, r2] = space.r;
    let cells = &space.mesh.cells;
    let mut worst = 0.0f64;
    for (a, ca) in cells.iter().enumerate() {
        for (b, cb) in cells.iter().enumerate() {
            if a == b || !ca.shares_side(cb) {
                continue;
            }
            let q = reparametrize_patch(&patch(space, coeffs, a), ca.bounds(), cb.bounds());
            let own = patch(space, coeffs, b);
            let mut compare = |i: usize, j: usize| {
                let scale = own[i][j].abs().max(1.0);
                worst = worst.max((q[i][j] - own[i][j]).abs() / scale);
            };
            if ca.x1 == cb.x0 {
                (0..=r1).for_each(|i| (0..n2).for_each(|j| compare(i, j)));
            } else if ca.x0 == cb.x1 {
                (n1 - 1 - r1..n1).for_each(|i| (0..n2).for_each(|j| compare(i, j)));
            } else if ca.y1 == cb.y0 {
                (0..n1).for_each(|i| (0..=r2).for_each(|j| compare(i, j)));
            } else if ca.y0 == cb.y1 {
                (0..n1).for_each(|i| (n2 - 1 - r2..n2).for_each(|j| compare(i, j)));
            }
        }
    }
    worst
}

/// `max |A x|` for the sampled constraint matrix (rows have unit length).
pub fn constraint_residual(space: &GSplineSpace, coeffs: &BCoefficientMap) -> f64 {
    let m = gentess::oracle::constraint_matrix(&space.mesh, space.sections, space.r, Default::default()).unwrap();
    let x = nalgebra::DVector::from_column_slice(&coeffs.values);
    (m * x).amax()
}
