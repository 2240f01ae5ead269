//! Local Hermite interpolation at an anchor point, the quasi-interpolant built
//! from it, error norms and convergence experiments.

use std::collections::{BTreeSet, HashMap};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::bernstein::{BasisError, BernsteinBasis};
use crate::gspace::{BCoefficientMap, Completion, GSpaceError, GSplineSpace};
use crate::sectionspace::{SectionSpace, SectionSpec, Which};
use crate::tmesh::{MeshError, TMesh};

/// Relative floor on the determinants of the Hermite blocks.
pub const DET_FLOOR: f64 = 1e-12;
/// Samples per cell side for the sup norm.
pub const SUP_GRID: usize = 64;
/// Gauss-Legendre nodes per cell side for the discrete L2 norm.
pub const GAUSS_NODES: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ApproxError {
    #[error(transparent)]
    Space(#[from] GSpaceError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error("Hermite block {block} has determinant {det:e}, below the floor {floor:e}")]
    DeterminantBelowFloor { block: &'static str, det: f64, floor: f64 },
    #[error("derivative oracle returned {value} for order ({i}, {j}) at ({s}, {t})")]
    DerivativeOracle { i: usize, j: usize, s: f64, t: f64, value: f64 },
    #[error("spanning functions in direction {dir} are dependent on [{a}, {b}]")]
    DependentSpan { dir: usize, a: f64, b: f64 },
    #[error("{0}")]
    Precondition(String),
}

/// Closed-form mixed partial derivatives `D_s^i D_t^j f(s, t)`.
pub trait MixedDerivatives: Sync {
    fn derivative(&self, s: f64, t: f64, i: usize, j: usize) -> f64;

    fn value(&self, s: f64, t: f64) -> f64 {
        self.derivative(s, t, 0, 0)
    }
}

/// Named test functions with exact derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TestFunction {
    /// `sin(2s + t)`
    Sin2sPlusT,
    /// `sin(s) sin(t)`
    SinSin,
    /// `cosh(s) sinh(t)`
    CoshSinh,
    /// `exp(s + t)`
    ExpSum,
    /// `1`
    ConstOne,
    /// `exp(-(s^2 + t^2))`
    Gauss,
}

impl TestFunction {
    pub const ALL: [TestFunction; 6] = [
        TestFunction::Sin2sPlusT,
        TestFunction::SinSin,
        TestFunction::CoshSinh,
        TestFunction::ExpSum,
        TestFunction::ConstOne,
        TestFunction::Gauss,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TestFunction::Sin2sPlusT => "sin2s_plus_t",
            TestFunction::SinSin => "sin_sin",
            TestFunction::CoshSinh => "cosh_sinh",
            TestFunction::ExpSum => "exp_sum",
            TestFunction::ConstOne => "const_one",
            TestFunction::Gauss => "gauss",
        }
    }

    pub fn formula(&self) -> &'static str {
        match self {
            TestFunction::Sin2sPlusT => "sin(2s + t)",
            TestFunction::SinSin => "sin(s) sin(t)",
            TestFunction::CoshSinh => "cosh(s) sinh(t)",
            TestFunction::ExpSum => "exp(s + t)",
            TestFunction::ConstOne => "1",
            TestFunction::Gauss => "exp(-(s^2 + t^2))",
        }
    }

    pub fn from_name(name: &str) -> Option<TestFunction> {
        Self::ALL.into_iter().find(|f| f.name() == name)
    }
}

fn sin_derivative(x: f64, k: usize) -> f64 {
    match k % 4 {
        0 => x.sin(),
        1 => x.cos(),
        2 => -x.sin(),
        _ => -x.cos(),
    }
}

fn cosh_derivative(x: f64, k: usize) -> f64 {
    if k.is_multiple_of(2) {
        x.cosh()
    } else {
        x.sinh()
    }
}

fn sinh_derivative(x: f64, k: usize) -> f64 {
    cosh_derivative(x, k + 1)
}

/// `d^k/dx^k exp(-x^2) = (-1)^k H_k(x) exp(-x^2)` with physicists' Hermite polynomials.
fn gauss_derivative(x: f64, k: usize) -> f64 {
    let (mut h0, mut h1) = (1.0, 2.0 * x);
    let hk = match k {
        0 => h0,
        _ => {
            for m in 1..k {
                let h2 = 2.0 * x * h1 - 2.0 * m as f64 * h0;
                h0 = h1;
                h1 = h2;
            }
            h1
        }
    };
    let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    sign * hk * (-x * x).exp()
}

impl MixedDerivatives for TestFunction {
    fn derivative(&self, s: f64, t: f64, i: usize, j: usize) -> f64 {
        match self {
            TestFunction::Sin2sPlusT => 2f64.powi(i as i32) * sin_derivative(2.0 * s + t, i + j),
            TestFunction::SinSin => sin_derivative(s, i) * sin_derivative(t, j),
            TestFunction::CoshSinh => cosh_derivative(s, i) * sinh_derivative(t, j),
            TestFunction::ExpSum => (s + t).exp(),
            TestFunction::ConstOne => {
                if i == 0 && j == 0 {
                    1.0
                } else {
                    0.0
                }
            }
            TestFunction::Gauss => gauss_derivative(s, i) * gauss_derivative(t, j),
        }
    }
}

/// A complete spline viewed as a function (lowest-id containing cell).
pub struct SplineFunction<'a> {
    pub space: &'a GSplineSpace,
    pub coeffs: &'a BCoefficientMap,
}

impl MixedDerivatives for SplineFunction<'_> {
    fn derivative(&self, s: f64, t: f64, i: usize, j: usize) -> f64 {
        self.space.eval_spline(self.coeffs, s, t, i, j).unwrap_or(f64::NAN)
    }
}

/// `D^order` of the `p`-th local spanning function `(x - x0)^p / p!` (for
/// `p < n - 2`), `u`, `v`.
fn local_spanning(space: &SectionSpace, x0: f64, p: usize, order: usize, x: f64) -> f64 {
    let n = space.n;
    if p < n - 2 {
        if order > p {
            return 0.0;
        }
        let m = p - order;
        let fact: f64 = (1..=m).map(|k| k as f64).product();
        (x - x0).powi(m as i32) / fact
    } else if p == n - 2 {
        space.generator_derivative(Which::U, order, x)
    } else {
        space.generator_derivative(Which::V, order, x)
    }
}

/// Unknowns of the Hermite system in solve order: `a_ij`, then `(b_i, c_i)`
/// pairs, `(d_j, e_j)` pairs and the four generator products. Each entry is the
/// `(p, q)` index of the tensor coefficient.
pub fn unknown_order(n: [usize; 2]) -> Vec<(usize, usize)> {
    let [n1, n2] = n;
    let (u1, v1, u2, v2) = (n1 - 2, n1 - 1, n2 - 2, n2 - 1);
    let mut out = Vec::with_capacity(n1 * n2);
    for p in 0..n1 - 2 {
        for q in 0..n2 - 2 {
            out.push((p, q));
        }
    }
    for p in 0..n1 - 2 {
        out.push((p, u2));
        out.push((p, v2));
    }
    for q in 0..n2 - 2 {
        out.push((u1, q));
        out.push((v1, q));
    }
    out.extend([(u1, u2), (u1, v2), (v1, u2), (v1, v2)]);
    out
}

/// Equations in the matching order: each entry is the derivative order `(i, j)`.
pub fn equation_order(n: [usize; 2]) -> Vec<(usize, usize)> {
    let [n1, n2] = n;
    let mut out = Vec::with_capacity(n1 * n2);
    for i in 0..n1 - 2 {
        for j in 0..n2 - 2 {
            out.push((i, j));
        }
    }
    for i in 0..n1 - 2 {
        out.push((i, n2 - 2));
        out.push((i, n2 - 1));
    }
    for j in 0..n2 - 2 {
        out.push((n1 - 2, j));
        out.push((n1 - 1, j));
    }
    out.extend([(n1 - 2, n2 - 2), (n1 - 1, n2 - 2), (n1 - 2, n2 - 1), (n1 - 1, n2 - 1)]);
    out
}

/// Index ranges of the diagonal blocks `I, A1, A2, A3`.
pub fn block_ranges(n: [usize; 2]) -> [std::ops::Range<usize>; 4] {
    let [n1, n2] = n;
    let a = (n1 - 2) * (n2 - 2);
    let b = a + 2 * (n1 - 2);
    let c = b + 2 * (n2 - 2);
    [0..a, a..b, b..c, c..c + 4]
}

const BLOCK_NAMES: [&str; 4] = ["I", "A1", "A2", "A3"];

#[derive(Debug, Clone)]
pub struct HermiteSystem {
    pub anchor: (f64, f64),
    pub n: [usize; 2],
    pub spaces: [SectionSpace; 2],
    /// `taylor[d][(i, p)]`: `i`-th derivative of the `p`-th spanning function at the anchor.
    pub taylor: [DMatrix<f64>; 2],
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
}

impl HermiteSystem {
    /// Builds the system for the derivatives of `f` at `anchor`.
    pub fn assemble(
        spaces: [&SectionSpace; 2],
        f: &dyn MixedDerivatives,
        anchor: (f64, f64),
    ) -> Result<Self, ApproxError> {
        let n = [spaces[0].n, spaces[1].n];
        for (dir, sp) in spaces.iter().enumerate() {
            if !sp.dim_ok {
                return Err(ApproxError::DependentSpan { dir, a: sp.a, b: sp.b });
            }
        }
        let x0 = [anchor.0, anchor.1];
        let taylor = [0, 1].map(|d| DMatrix::from_fn(n[d], n[d], |i, p| local_spanning(spaces[d], x0[d], p, i, x0[d])));
        let unknowns = unknown_order(n);
        let equations = equation_order(n);
        let matrix = DMatrix::from_fn(n[0] * n[1], n[0] * n[1], |row, col| {
            let (i, j) = equations[row];
            let (p, q) = unknowns[col];
            taylor[0][(i, p)] * taylor[1][(j, q)]
        });
        let mut rhs = DVector::zeros(n[0] * n[1]);
        for (row, &(i, j)) in equations.iter().enumerate() {
            let value = f.derivative(anchor.0, anchor.1, i, j);
            if !value.is_finite() {
                return Err(ApproxError::DerivativeOracle { i, j, s: anchor.0, t: anchor.1, value });
            }
            rhs[row] = value;
        }
        Ok(HermiteSystem { anchor, n, spaces: [*spaces[0], *spaces[1]], taylor, matrix, rhs })
    }

    /// The 2x2 generator block `[[u^(n-2), v^(n-2)], [u^(n-1), v^(n-1)]]` of direction `d`.
    pub fn generator_block(&self, d: usize) -> DMatrix<f64> {
        let n = self.n[d];
        self.taylor[d].view((n - 2, n - 2), (2, 2)).into_owned()
    }

    pub fn block(&self, k: usize) -> DMatrix<f64> {
        let r = block_ranges(self.n)[k].clone();
        self.matrix.view((r.start, r.start), (r.len(), r.len())).into_owned()
    }

    /// Determinants of `I, A1, A2, A3` predicted from the generator blocks.
    pub fn predicted_determinants(&self) -> [f64; 4] {
        let d1 = self.generator_block(0).determinant();
        let d2 = self.generator_block(1).determinant();
        [1.0, d2.abs().powi(self.n[0] as i32 - 2), d1.abs().powi(self.n[1] as i32 - 2), -(d1 * d1) * (d2 * d2)]
    }

    /// Determinants of the diagonal blocks by dense LU.
    pub fn dense_block_determinants(&self) -> [f64; 4] {
        [0, 1, 2, 3].map(|k| self.block(k).determinant())
    }

    /// Floors are relative to the Hadamard bound (product of column norms), so a
    /// badly scaled but well-conditioned block passes.
    fn check_floor(&self) -> Result<(), ApproxError> {
        let g = [self.generator_block(0), self.generator_block(1)];
        let hadamard = g.clone().map(|m| m.column_iter().map(|c| c.norm()).product::<f64>());
        let checks = [
            ("A2", g[0].determinant(), DET_FLOOR * hadamard[0]),
            ("A1", g[1].determinant(), DET_FLOOR * hadamard[1]),
            ("A3", self.predicted_determinants()[3], DET_FLOOR * (hadamard[0] * hadamard[1]).powi(2)),
        ];
        for (block, det, floor) in checks {
            if !(det.abs() >= floor) {
                return Err(ApproxError::DeterminantBelowFloor { block, det, floor });
            }
        }
        Ok(())
    }

    /// Block back-substitution `A3 -> A2, A1 -> I`; returns the unknowns in solve order.
    pub fn solve(&self) -> Result<DVector<f64>, ApproxError> {
        self.check_floor()?;
        let ranges = block_ranges(self.n);
        let total = self.matrix.nrows();
        let mut x = DVector::zeros(total);
        for k in (0..4).rev() {
            let r = ranges[k].clone();
            if r.is_empty() {
                continue;
            }
            let tail = r.end..total;
            let mut b = self.rhs.rows(r.start, r.len()).into_owned();
            if !tail.is_empty() {
                let coupling = self.matrix.view((r.start, tail.start), (r.len(), tail.len()));
                b -= coupling * x.rows(tail.start, tail.len());
            }
            let sol = if k == 0 {
                b
            } else {
                self.block(k).lu().solve(&b).ok_or(ApproxError::DeterminantBelowFloor {
                    block: BLOCK_NAMES[k],
                    det: 0.0,
                    floor: 0.0,
                })?
            };
            x.rows_mut(r.start, r.len()).copy_from(&sol);
        }
        Ok(x)
    }

    /// Dense partial-pivoting solve of the whole system.
    pub fn dense_solve(&self) -> Option<DVector<f64>> {
        self.matrix.clone().lu().solve(&self.rhs)
    }

    /// Tensor coefficients `C[(p, q)]` from a solution in solve order.
    pub fn tensor_coefficients(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut c = DMatrix::zeros(self.n[0], self.n[1]);
        for (k, &(p, q)) in unknown_order(self.n).iter().enumerate() {
            c[(p, q)] = x[k];
        }
        c
    }

    pub fn interpolant(&self) -> Result<LocalInterpolant, ApproxError> {
        let x = self.solve()?;
        Ok(LocalInterpolant { anchor: self.anchor, spaces: self.spaces, coeffs: self.tensor_coefficients(&x) })
    }
}

/// `Q_L(f; s0, t0)` as a combination of products of local spanning functions.
#[derive(Debug, Clone)]
pub struct LocalInterpolant {
    pub anchor: (f64, f64),
    pub spaces: [SectionSpace; 2],
    pub coeffs: DMatrix<f64>,
}

impl LocalInterpolant {
    pub fn eval(&self, s: f64, t: f64, ds: usize, dt: usize) -> f64 {
        let [n1, n2] = [self.spaces[0].n, self.spaces[1].n];
        let fs: Vec<f64> = (0..n1).map(|p| local_spanning(&self.spaces[0], self.anchor.0, p, ds, s)).collect();
        let ft: Vec<f64> = (0..n2).map(|q| local_spanning(&self.spaces[1], self.anchor.1, q, dt, t)).collect();
        let mut acc = 0.0;
        for p in 0..n1 {
            for q in 0..n2 {
                acc += fs[p] * self.coeffs[(p, q)] * ft[q];
            }
        }
        acc
    }

    /// `Phi[(p, i)]`: B-coefficients of the `p`-th spanning function on `basis`.
    fn conversion(&self, basis: &BernsteinBasis, d: usize) -> Result<DMatrix<f64>, ApproxError> {
        let n = basis.n();
        let m = n.div_ceil(2);
        let x0 = if d == 0 { self.anchor.0 } else { self.anchor.1 };
        let mut phi = DMatrix::zeros(n, n);
        for p in 0..n {
            let left: Vec<f64> = (0..m).map(|h| local_spanning(&self.spaces[d], x0, p, h, basis.a())).collect();
            let right: Vec<f64> = (0..n - m).map(|h| local_spanning(&self.spaces[d], x0, p, h, basis.b())).collect();
            let row = basis.from_endpoint_derivatives(&left, &right)?;
            for (i, v) in row.into_iter().enumerate() {
                phi[(p, i)] = v;
            }
        }
        Ok(phi)
    }

    /// B-coefficients `c[(i, j)]` on the cell spanned by the two bases.
    pub fn bb_coefficients(&self, bs: &BernsteinBasis, bt: &BernsteinBasis) -> Result<DMatrix<f64>, ApproxError> {
        let ps = self.conversion(bs, 0)?;
        let pt = self.conversion(bt, 1)?;
        Ok(ps.transpose() * &self.coeffs * pt)
    }
}

/// Largest relative mismatch `|D_s^i D_t^j (Q_L f - f)| / max(1, |D_s^i D_t^j f|)`
/// at the anchor, evaluating `Q_L f` from its B-coefficients.
pub fn hermite_residual(
    bb: &DMatrix<f64>,
    bs: &BernsteinBasis,
    bt: &BernsteinBasis,
    f: &dyn MixedDerivatives,
    anchor: (f64, f64),
) -> f64 {
    let (n1, n2) = (bs.n(), bt.n());
    let mut worst = 0.0f64;
    for i in 0..n1 {
        let vs = bs.eval_all(i, anchor.0);
        for j in 0..n2 {
            let vt = bt.eval_all(j, anchor.1);
            let mut q = 0.0;
            for a in 0..n1 {
                for b in 0..n2 {
                    q += vs[a] * bb[(a, b)] * vt[b];
                }
            }
            let exact = f.derivative(anchor.0, anchor.1, i, j);
            worst = worst.max((q - exact).abs() / exact.abs().max(1.0));
        }
    }
    worst
}

/// `Q_L(f; s0, t0)` for the section spaces of `cell`.
pub fn hermite_local(
    space: &GSplineSpace,
    cell: usize,
    f: &dyn MixedDerivatives,
    s0: f64,
    t0: f64,
) -> Result<LocalInterpolant, ApproxError> {
    let [a, b, c, d] = space.mesh.cells[cell].bounds();
    if !(a < s0 && s0 < b && c < t0 && t0 < d) {
        return Err(ApproxError::Precondition(format!("anchor ({s0}, {t0}) is not inside cell {cell}")));
    }
    let spaces = [space.cell_basis(cell, 0).space(), space.cell_basis(cell, 1).space()];
    HermiteSystem::assemble(spaces, f, (s0, t0))?.interpolant()
}

/// `M[(i, a)] = h^i B_a^(i)(x0)`, rows scaled by powers of the interval length.
fn scaled_hermite_matrix(basis: &BernsteinBasis, x0: f64) -> DMatrix<f64> {
    let n = basis.n();
    let h = basis.b() - basis.a();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        let w = h.powi(i as i32);
        for (a, v) in basis.eval_all(i, x0).into_iter().enumerate() {
            m[(i, a)] = w * v;
        }
    }
    m
}

/// The same interpolant solved directly for its B-coefficients:
/// `F = Ms C Mt^T` with `Ms[(i, a)] = B_a^(i)(s0)`. Unlike the spanning-function
/// coefficients this does not cancel when `u`, `v` are nearly polynomial on the cell.
pub fn hermite_bb(
    bs: &BernsteinBasis,
    bt: &BernsteinBasis,
    f: &dyn MixedDerivatives,
    anchor: (f64, f64),
) -> Result<DMatrix<f64>, ApproxError> {
    let (n1, n2) = (bs.n(), bt.n());
    let (hs, ht) = (bs.b() - bs.a(), bt.b() - bt.a());
    let mut rhs = DMatrix::zeros(n1, n2);
    for i in 0..n1 {
        for j in 0..n2 {
            let value = f.derivative(anchor.0, anchor.1, i, j);
            if !value.is_finite() {
                return Err(ApproxError::DerivativeOracle { i, j, s: anchor.0, t: anchor.1, value });
            }
            rhs[(i, j)] = value * hs.powi(i as i32) * ht.powi(j as i32);
        }
    }
    let singular = |block| ApproxError::DeterminantBelowFloor { block, det: 0.0, floor: 0.0 };
    let ms = scaled_hermite_matrix(bs, anchor.0).lu();
    let mt = scaled_hermite_matrix(bt, anchor.1).lu();
    let half = ms.solve(&rhs).ok_or(singular("s"))?;
    let c = mt.solve(&half.transpose()).ok_or(singular("t"))?;
    Ok(c.transpose())
}

/// B-coefficients of `Q_L f` anchored at the center of `cell`.
pub fn local_bb(space: &GSplineSpace, cell: usize, f: &dyn MixedDerivatives) -> Result<DMatrix<f64>, ApproxError> {
    let anchor = space.mesh.cells[cell].center();
    let (bs, bt) = (space.cell_basis(cell, 0), space.cell_basis(cell, 1));
    for (dir, b) in [bs, bt].into_iter().enumerate() {
        if !b.space().dim_ok {
            return Err(ApproxError::DependentSpan { dir, a: b.a(), b: b.b() });
        }
    }
    hermite_bb(bs, bt, f, anchor)
}

/// `Qf`: every determining coefficient is read off `Q_L f` on the cell that owns
/// it, then the spline is completed by smoothness propagation.
pub fn quasi_interpolant(space: &GSplineSpace, f: &dyn MixedDerivatives) -> Result<Completion, ApproxError> {
    let mds = space.minimal_determining_set();
    let cells: BTreeSet<usize> = mds.iter().map(|p| p.point.cell).collect();
    let local: HashMap<usize, DMatrix<f64>> =
        cells.into_par_iter().map(|cell| local_bb(space, cell, f).map(|bb| (cell, bb))).collect::<Result<_, _>>()?;
    let assignment: Vec<f64> = mds.iter().map(|p| local[&p.point.cell][(p.point.i, p.point.j)]).collect();
    Ok(space.complete_coefficients(&assignment)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Norm {
    Sup,
    L2,
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` (Golub-Welsch).
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let jacobi = DMatrix::from_fn(m, m, |i, j| {
        if i + 1 == j || j + 1 == i {
            let k = i.max(j) as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> =
        (0..m).map(|k| (eig.eigenvalues[k], 2.0 * eig.eigenvectors[(0, k)].powi(2))).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pairs.into_iter().unzip()
}

fn linspace(a: f64, b: f64, m: usize) -> impl Iterator<Item = f64> {
    (0..m).map(move |k| a + (b - a) * k as f64 / (m - 1) as f64)
}

/// Max of `|f - p|` over a `grid x grid` lattice in every cell.
pub fn sup_error(space: &GSplineSpace, coeffs: &BCoefficientMap, f: &dyn MixedDerivatives, grid: usize) -> f64 {
    (0..space.num_cells())
        .into_par_iter()
        .map(|cell| {
            let [a, b, c, d] = space.mesh.cells[cell].bounds();
            let mut worst = 0.0f64;
            for s in linspace(a, b, grid) {
                for t in linspace(c, d, grid) {
                    worst = worst.max((f.value(s, t) - space.eval_in_cell(coeffs, cell, s, t, 0, 0)).abs());
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max)
}

/// Discrete L2 error with a tensor Gauss rule of `nodes x nodes` points per cell.
pub fn l2_error(space: &GSplineSpace, coeffs: &BCoefficientMap, f: &dyn MixedDerivatives, nodes: usize) -> f64 {
    let (x, w) = gauss_legendre(nodes);
    (0..space.num_cells())
        .into_par_iter()
        .map(|cell| {
            let [a, b, c, d] = space.mesh.cells[cell].bounds();
            let (hs, ht) = (0.5 * (b - a), 0.5 * (d - c));
            let mut acc = 0.0;
            for (xs, ws) in x.iter().zip(&w) {
                let s = 0.5 * (a + b) + hs * xs;
                for (xt, wt) in x.iter().zip(&w) {
                    let t = 0.5 * (c + d) + ht * xt;
                    let e = f.value(s, t) - space.eval_in_cell(coeffs, cell, s, t, 0, 0);
                    acc += ws * wt * hs * ht * e * e;
                }
            }
            acc
        })
        .sum::<f64>()
        .sqrt()
}

pub fn error_norm(space: &GSplineSpace, coeffs: &BCoefficientMap, f: &dyn MixedDerivatives, norm: Norm) -> f64 {
    match norm {
        Norm::Sup => sup_error(space, coeffs, f, SUP_GRID),
        Norm::L2 => l2_error(space, coeffs, f, GAUSS_NODES),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceLevel {
    pub h: f64,
    pub cells: usize,
    pub error: f64,
    /// Estimated order against the previous level.
    pub order: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub k: usize,
    pub norm: Norm,
    pub levels: Vec<ConvergenceLevel>,
}

impl ConvergenceReport {
    pub fn orders(&self) -> Vec<f64> {
        self.levels.iter().filter_map(|l| l.order).collect()
    }

    pub fn last_order(&self) -> Option<f64> {
        self.orders().last().copied()
    }
}

/// `mesh` followed by `levels - 1` uniform refinements.
pub fn dyadic_family(mesh: &TMesh, levels: usize) -> Result<Vec<TMesh>, MeshError> {
    let mut out = vec![mesh.clone()];
    while out.len() < levels {
        let next = out.last().unwrap().refine_uniform()?;
        out.push(next);
    }
    Ok(out)
}

fn mesh_size(mesh: &TMesh) -> f64 {
    mesh.cells.iter().map(|c| c.diameter()).fold(0.0, f64::max)
}

/// Error of `Qf` on each mesh and the observed orders `log(e0/e1) / log(h0/h1)`.
pub fn convergence_study(
    meshes: &[TMesh],
    sections: [SectionSpec; 2],
    r: [usize; 2],
    f: &dyn MixedDerivatives,
    norm: Norm,
) -> Result<ConvergenceReport, ApproxError> {
    if meshes.len() < 2 {
        return Err(ApproxError::Precondition("a convergence study needs at least two meshes".into()));
    }
    let mut levels: Vec<ConvergenceLevel> = Vec::with_capacity(meshes.len());
    for mesh in meshes {
        let space = GSplineSpace::new(mesh.clone(), sections, r)?;
        let q = quasi_interpolant(&space, f)?;
        let error = error_norm(&space, &q.coeffs, f, norm);
        let h = mesh_size(mesh);
        let order = levels.last().map(|prev| (prev.error / error).ln() / (prev.h / h).ln());
        levels.push(ConvergenceLevel { h, cells: mesh.cells.len(), error, order });
    }
    Ok(ConvergenceReport { k: (sections[0].n - 1).min(sections[1].n - 1), norm, levels })
}

/// `||M^-1||_inf` for the collocation matrix `M[(l, i)] = B_i(x_l)` at the
/// equally spaced domain points.
pub fn collocation_inverse_norm(basis: &BernsteinBasis) -> Option<f64> {
    let n = basis.n();
    let rows: Vec<Vec<f64>> = linspace(basis.a(), basis.b(), n).map(|x| basis.eval_all(0, x)).collect();
    let m = DMatrix::from_fn(n, n, |l, i| rows[l][i]);
    let inv = m.try_inverse()?;
    Some(inv.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max))
}

#[derive(Debug, Clone, Serialize)]
pub struct NormEquivalenceReport {
    pub samples: usize,
    /// Largest collocation-inverse norm over the cells.
    pub k1: f64,
    /// Largest observed `sqrt(area) ||c||_2 / ||p||_2` on a cell.
    pub k2: f64,
    /// Largest observed `max |c| / max_M |c|` over random determining assignments.
    pub k3: f64,
    /// The exact operator norm behind `k3`: the largest absolute row sum of the
    /// map from determining values to all coefficients.
    pub k3_bound: f64,
    /// Largest `diam(Omega_R) / diam(R)`, `Omega_R` the union of the supports
    /// of the basis functions not vanishing on `R`.
    pub k4: f64,
    pub upper_violations: usize,
    pub lower_violations: usize,
}

/// Support threshold for the dual basis functions.
pub const SUPPORT_TOL: f64 = 1e-12;

pub fn norm_equivalence_check(
    space: &GSplineSpace,
    samples: usize,
    seed: u64,
) -> Result<NormEquivalenceReport, ApproxError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = space.num_cells();
    let [n1, n2] = space.n;
    let mut k1_cell = Vec::with_capacity(cells);
    for cell in 0..cells {
        let ks = collocation_inverse_norm(space.cell_basis(cell, 0));
        let kt = collocation_inverse_norm(space.cell_basis(cell, 1));
        match (ks, kt) {
            (Some(a), Some(b)) => k1_cell.push(a * b),
            _ => return Err(ApproxError::Precondition(format!("singular collocation matrix on cell {cell}"))),
        }
    }
    let k1 = k1_cell.iter().copied().fold(0.0, f64::max);

    let (gx, gw) = gauss_legendre(GAUSS_NODES);
    let mut k2 = 0.0f64;
    let (mut upper_violations, mut lower_violations) = (0, 0);
    for _ in 0..samples {
        let cell = rng.gen_range(0..cells);
        let c: Vec<f64> = (0..n1 * n2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut map = space.empty_map();
        for i in 0..n1 {
            for j in 0..n2 {
                map.set(cell, i, j, c[i * n2 + j]);
            }
        }
        let [a, b, lo, hi] = space.mesh.cells[cell].bounds();
        let mut sup = 0.0f64;
        let pts = linspace(a, b, 32).chain(linspace(a, b, n1));
        for s in pts {
            for t in linspace(lo, hi, 32).chain(linspace(lo, hi, n2)) {
                sup = sup.max(space.eval_in_cell(&map, cell, s, t, 0, 0).abs());
            }
        }
        let cmax = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if sup > cmax * (1.0 + 1e-12) {
            upper_violations += 1;
        }
        if cmax / k1_cell[cell] > sup * (1.0 + 1e-12) {
            lower_violations += 1;
        }
        let (hs, ht) = (0.5 * (b - a), 0.5 * (hi - lo));
        let mut l2 = 0.0;
        for (xs, ws) in gx.iter().zip(&gw) {
            for (xt, wt) in gx.iter().zip(&gw) {
                let v = space.eval_in_cell(&map, cell, 0.5 * (a + b) + hs * xs, 0.5 * (lo + hi) + ht * xt, 0, 0);
                l2 += ws * wt * hs * ht * v * v;
            }
        }
        let area = (b - a) * (hi - lo);
        let c2 = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        k2 = k2.max(area.sqrt() * c2 / l2.sqrt());
    }

    let m = space.minimal_determining_set().len();
    let mut k3 = 0.0f64;
    for _ in 0..samples {
        let assignment: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let full = space.complete_coefficients(&assignment)?;
        let amax = assignment.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        k3 = k3.max(full.coeffs.max_abs() / amax);
    }

    let basis: Vec<BCoefficientMap> =
        (0..m).into_par_iter().map(|k| space.basis_function(k)).collect::<Result<_, _>>()?;
    let mut row_sums = vec![0.0f64; space.coefficient_count()];
    for psi in &basis {
        for (acc, v) in row_sums.iter_mut().zip(&psi.values) {
            *acc += v.abs();
        }
    }
    let k3_bound = row_sums.into_iter().fold(0.0, f64::max);
    let supports: Vec<Vec<usize>> = basis.iter().map(|psi| space.support(psi, SUPPORT_TOL)).collect();
    let mut k4 = 0.0f64;
    for cell in 0..cells {
        let mut bb = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
        for sup in supports.iter().filter(|s| s.contains(&cell)) {
            for &c in sup {
                let [a, b, lo, hi] = space.mesh.cells[c].bounds();
                bb = [bb[0].min(a), bb[1].max(b), bb[2].min(lo), bb[3].max(hi)];
            }
        }
        if bb[0].is_finite() {
            let diam = (bb[1] - bb[0]).hypot(bb[3] - bb[2]);
            k4 = k4.max(diam / space.mesh.cells[cell].diameter());
        }
    }

    Ok(NormEquivalenceReport { samples, k1, k2, k3, k3_bound, k4, upper_violations, lower_violations })
}

/// Values of a univariate `Q_L` (Hermite data of order `< n` at `x0`) on `basis`.
pub fn hermite_univariate(basis: &BernsteinBasis, derivatives: &[f64], x0: f64) -> Result<Vec<f64>, ApproxError> {
    let space = basis.space();
    let n = space.n;
    if derivatives.len() != n {
        return Err(ApproxError::Precondition(format!("expected {n} derivatives, got {}", derivatives.len())));
    }
    let t = DMatrix::from_fn(n, n, |i, p| local_spanning(space, x0, p, i, x0));
    let coeffs = t.lu().solve(&DVector::from_column_slice(derivatives)).ok_or(ApproxError::DeterminantBelowFloor {
        block: "univariate",
        det: 0.0,
        floor: 0.0,
    })?;
    let m = n.div_ceil(2);
    let mut out = vec![0.0; n];
    for p in 0..n {
        let left: Vec<f64> = (0..m).map(|h| local_spanning(space, x0, p, h, basis.a())).collect();
        let right: Vec<f64> = (0..n - m).map(|h| local_spanning(space, x0, p, h, basis.b())).collect();
        for (i, v) in basis.from_endpoint_derivatives(&left, &right)?.into_iter().enumerate() {
            out[i] += coeffs[p] * v;
        }
    }
    Ok(out)
}
