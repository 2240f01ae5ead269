//! Generalized spline spaces over a T-mesh: B-coefficient maps, the minimal
//! determining set and the smoothness propagation that completes a spline
//! from its determining coefficients.

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::bernstein::{cached_basis, corner_index, BasisError, BernsteinBasis, End};
use crate::sectionspace::{SectionError, SectionSpec};
use crate::tmesh::{to_f64, Coord, MeshError, Orientation, Side, SideRef, TMesh};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GSpaceError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Section(#[from] SectionError),
    #[error("basis on {place}: {source}")]
    Basis { place: String, source: BasisError },
    #[error("{0}")]
    Precondition(String),
    #[error("triangular system at {place} has a vanishing diagonal")]
    SingularDiagonal { place: String },
    #[error("{count} B-coefficients remain undetermined after propagation")]
    Undetermined { count: usize },
    #[error("propagation stalled with {vertices} vertices and {edges} edges undetermined")]
    Stalled { vertices: usize, edges: usize },
    #[error("point ({s}, {t}) is outside the domain")]
    OutsideDomain { s: f64, t: f64 },
    #[error("assignment has {got} values, the determining set has {expected}")]
    AssignmentLength { got: usize, expected: usize },
}

/// Derivative jumps across interior edges; `max_relative` divides each order's
/// jump by `max(1, largest value of that derivative seen)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct JumpReport {
    pub samples: usize,
    pub max_jump: f64,
    pub max_relative: f64,
}

/// One B-coefficient slot: cell and tensor index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct DomainPoint {
    pub cell: usize,
    pub i: usize,
    pub j: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Provenance {
    Vertex(usize),
    Edge(usize),
    Cell(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MdsPoint {
    pub point: DomainPoint,
    pub provenance: Provenance,
}

/// B-coefficients of all cells, `NaN` where not yet known.
#[derive(Debug, Clone, PartialEq)]
pub struct BCoefficientMap {
    pub n: [usize; 2],
    pub values: Vec<f64>,
}

impl BCoefficientMap {
    pub fn unknown(cells: usize, n: [usize; 2]) -> Self {
        BCoefficientMap { n, values: vec![f64::NAN; cells * n[0] * n[1]] }
    }

    pub fn filled(cells: usize, n: [usize; 2], value: f64) -> Self {
        BCoefficientMap { n, values: vec![value; cells * n[0] * n[1]] }
    }

    pub fn index(&self, cell: usize, i: usize, j: usize) -> usize {
        (cell * self.n[0] + i) * self.n[1] + j
    }

    pub fn get(&self, cell: usize, i: usize, j: usize) -> f64 {
        self.values[self.index(cell, i, j)]
    }

    pub fn set(&mut self, cell: usize, i: usize, j: usize, v: f64) {
        let k = self.index(cell, i, j);
        self.values[k] = v;
    }

    pub fn is_known(&self, cell: usize, i: usize, j: usize) -> bool {
        self.get(cell, i, j).is_finite()
    }

    pub fn is_complete(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn cell(&self, cell: usize) -> &[f64] {
        let m = self.n[0] * self.n[1];
        &self.values[cell * m..(cell + 1) * m]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().filter(|v| v.is_finite()).fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Outcome of [`GSplineSpace::complete_coefficients`].
#[derive(Debug, Clone)]
pub struct Completion {
    pub coeffs: BCoefficientMap,
    /// Largest disagreement between a recomputed and an already known coefficient.
    pub residual: f64,
}

/// Terms of the dimension formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DimensionTerms {
    pub vertices: usize,
    pub horizontal_edges: usize,
    pub vertical_edges: usize,
    pub cells: usize,
}

impl DimensionTerms {
    pub fn total(&self) -> usize {
        self.vertices + self.horizontal_edges + self.vertical_edges + self.cells
    }
}

pub struct GSplineSpace {
    pub mesh: TMesh,
    pub sections: [SectionSpec; 2],
    pub n: [usize; 2],
    pub r: [usize; 2],
    bases: Vec<[Arc<BernsteinBasis>; 2]>,
    edge_bases: Vec<Arc<BernsteinBasis>>,
    mds: Vec<MdsPoint>,
    mds_lookup: HashMap<usize, usize>,
    vertex_anchor: Vec<Option<usize>>,
    edge_anchor: Vec<SideRef>,
    vertex_edges: Vec<Vec<usize>>,
}

fn basis_err(place: String) -> impl FnOnce(BasisError) -> GSpaceError {
    move |source| GSpaceError::Basis { place, source }
}

/// Direction index running along an edge of the given orientation.
fn along_dir(o: Orientation) -> usize {
    match o {
        Orientation::Horizontal => 0,
        Orientation::Vertical => 1,
    }
}

/// Which end of the across-direction basis touches the edge for a cell side.
fn across_end(side: Side) -> End {
    match side {
        Side::Bottom | Side::Left => End::Left,
        Side::Top | Side::Right => End::Right,
    }
}

impl GSplineSpace {
    pub fn new(mesh: TMesh, sections: [SectionSpec; 2], r: [usize; 2]) -> Result<Self, GSpaceError> {
        let n = [sections[0].n, sections[1].n];
        for d in 0..2 {
            if n[d] < 3 {
                return Err(GSpaceError::Precondition(format!("order n{} = {} must be at least 3", d + 1, n[d])));
            }
            if n[d] < 2 * r[d] + 2 {
                return Err(GSpaceError::Precondition(format!(
                    "need n{0} - 1 >= 2 r{0} + 1, got n = {1}, r = {2}",
                    d + 1,
                    n[d],
                    r[d]
                )));
            }
        }
        if !mesh.is_regular() {
            return Err(GSpaceError::Precondition("mesh is not regular".into()));
        }
        if mesh.has_cycles() {
            return Err(GSpaceError::Precondition("mesh contains a cycle of T-junctions".into()));
        }

        let mut bases = Vec::with_capacity(mesh.cells.len());
        for (id, c) in mesh.cells.iter().enumerate() {
            let [a, b, cc, d] = c.bounds();
            let bs = cached_basis(&sections[0].on(a, b)?).map_err(basis_err(format!("cell {id} (s)")))?;
            let bt = cached_basis(&sections[1].on(cc, d)?).map_err(basis_err(format!("cell {id} (t)")))?;
            bases.push([bs, bt]);
        }
        let mut edge_bases = Vec::with_capacity(mesh.composites.len());
        for (id, e) in mesh.composites.iter().enumerate() {
            let spec = sections[along_dir(e.orientation)];
            let basis = cached_basis(&spec.on(to_f64(e.lo), to_f64(e.hi))?)
                .map_err(basis_err(format!("composite edge {id}")))?;
            edge_bases.push(basis);
        }

        let mut vertex_anchor = vec![None; mesh.vertices.len()];
        for (vid, v) in mesh.vertices.iter().enumerate() {
            if v.is_t_junction() {
                continue;
            }
            // cell with the longest side ending at v, ties to the smallest id
            let mut best: Option<(crate::tmesh::Coord, usize)> = None;
            for &c in &v.corner_of {
                let rect = &mesh.cells[c];
                let len = rect.width().max(rect.height());
                if best.is_none_or(|(l, _)| len > l) {
                    best = Some((len, c));
                }
            }
            vertex_anchor[vid] = best.map(|(_, c)| c);
        }

        let mut edge_anchor = Vec::with_capacity(mesh.composites.len());
        for e in &mesh.composites {
            // a side starting at w1; prefer the cell above / to the right of e
            let preferred = match e.orientation {
                Orientation::Horizontal => Side::Bottom,
                Orientation::Vertical => Side::Left,
            };
            let starting: Vec<SideRef> =
                e.sides.iter().copied().filter(|sr| mesh.cells[sr.cell].side(sr.side).2 == e.lo).collect();
            let pick = starting
                .iter()
                .copied()
                .find(|sr| sr.side == preferred)
                .or_else(|| starting.first().copied())
                .ok_or_else(|| GSpaceError::Precondition("composite edge without a starting cell".into()))?;
            edge_anchor.push(pick);
        }

        let mut vertex_edges = vec![Vec::new(); mesh.vertices.len()];
        for (id, e) in mesh.composites.iter().enumerate() {
            vertex_edges[e.start].push(id);
            vertex_edges[e.end].push(id);
        }

        let mut space = GSplineSpace {
            mesh,
            sections,
            n,
            r,
            bases,
            edge_bases,
            mds: Vec::new(),
            mds_lookup: HashMap::new(),
            vertex_anchor,
            edge_anchor,
            vertex_edges,
        };
        space.build_mds();
        Ok(space)
    }

    pub fn cell_basis(&self, cell: usize, dir: usize) -> &BernsteinBasis {
        &self.bases[cell][dir]
    }

    pub fn edge_basis(&self, edge: usize) -> &BernsteinBasis {
        &self.edge_bases[edge]
    }

    pub fn num_cells(&self) -> usize {
        self.mesh.cells.len()
    }

    pub fn coefficient_count(&self) -> usize {
        self.num_cells() * self.n[0] * self.n[1]
    }

    pub fn empty_map(&self) -> BCoefficientMap {
        BCoefficientMap::unknown(self.num_cells(), self.n)
    }

    pub fn vertex_anchor(&self, v: usize) -> Option<usize> {
        self.vertex_anchor[v]
    }

    pub fn edge_anchor(&self, e: usize) -> SideRef {
        self.edge_anchor[e]
    }

    /// Ends of the cell's bases at which `v` sits.
    fn corner_ends(&self, cell: usize, v: usize) -> (End, End) {
        let c = &self.mesh.cells[cell];
        let w = &self.mesh.vertices[v];
        let se = if w.x == c.x0 { End::Left } else { End::Right };
        let te = if w.y == c.y0 { End::Left } else { End::Right };
        (se, te)
    }

    fn disk(&self, cell: usize, v: usize) -> Vec<DomainPoint> {
        let (se, te) = self.corner_ends(cell, v);
        let mut out = Vec::new();
        for m in 0..=self.r[0] {
            for l in 0..=self.r[1] {
                out.push(DomainPoint { cell, i: corner_index(self.n[0], se, m), j: corner_index(self.n[1], te, l) });
            }
        }
        out
    }

    fn build_mds(&mut self) {
        let [n1, n2] = self.n;
        let [r1, r2] = self.r;
        let mut mds = Vec::new();
        for (vid, anchor) in self.vertex_anchor.iter().enumerate() {
            if let Some(cell) = *anchor {
                for p in self.disk(cell, vid) {
                    mds.push(MdsPoint { point: p, provenance: Provenance::Vertex(vid) });
                }
            }
        }
        for (eid, sr) in self.edge_anchor.iter().enumerate() {
            let cell = sr.cell;
            let (irange, jrange): (Vec<usize>, Vec<usize>) = match sr.side {
                Side::Bottom => ((r1 + 1..n1 - r1 - 1).collect(), (0..=r2).collect()),
                Side::Top => ((r1 + 1..n1 - r1 - 1).collect(), (n2 - 1 - r2..n2).collect()),
                Side::Left => ((0..=r1).collect(), (r2 + 1..n2 - r2 - 1).collect()),
                Side::Right => ((n1 - 1 - r1..n1).collect(), (r2 + 1..n2 - r2 - 1).collect()),
            };
            for &i in &irange {
                for &j in &jrange {
                    mds.push(MdsPoint { point: DomainPoint { cell, i, j }, provenance: Provenance::Edge(eid) });
                }
            }
        }
        for cell in 0..self.num_cells() {
            for i in r1 + 1..n1 - r1 - 1 {
                for j in r2 + 1..n2 - r2 - 1 {
                    mds.push(MdsPoint { point: DomainPoint { cell, i, j }, provenance: Provenance::Cell(cell) });
                }
            }
        }
        let probe = self.empty_map();
        self.mds_lookup =
            mds.iter().enumerate().map(|(k, p)| (probe.index(p.point.cell, p.point.i, p.point.j), k)).collect();
        self.mds = mds;
    }

    /// The minimal determining set, vertex disks first, then edges, then cell interiors.
    pub fn minimal_determining_set(&self) -> &[MdsPoint] {
        &self.mds
    }

    /// Position of a domain point in the determining set, if it belongs to it.
    pub fn mds_position(&self, p: DomainPoint) -> Option<usize> {
        let probe = BCoefficientMap { n: self.n, values: Vec::new() };
        self.mds_lookup.get(&probe.index(p.cell, p.i, p.j)).copied()
    }

    pub fn dimension_terms(&self) -> Result<DimensionTerms, GSpaceError> {
        let st = self.mesh.stats()?;
        Ok(dimension_formula(self.n, self.r, st.j_nt, st.e_hor, st.e_ver, st.n_cells))
    }

    /// Dimension from the counting formula; equals the size of the determining set.
    pub fn dimension(&self) -> Result<usize, GSpaceError> {
        Ok(self.dimension_terms()?.total())
    }

    /// Location of a domain point.
    pub fn location(&self, p: DomainPoint) -> (f64, f64) {
        let [a, b, c, d] = self.mesh.cells[p.cell].bounds();
        let [n1, n2] = self.n;
        let s = ((n1 - 1 - p.i) as f64 * a + p.i as f64 * b) / (n1 - 1) as f64;
        let t = ((n2 - 1 - p.j) as f64 * c + p.j as f64 * d) / (n2 - 1) as f64;
        (s, t)
    }

    pub fn domain_points(&self) -> Vec<(DomainPoint, (f64, f64))> {
        let mut out = Vec::with_capacity(self.coefficient_count());
        for cell in 0..self.num_cells() {
            for i in 0..self.n[0] {
                for j in 0..self.n[1] {
                    let p = DomainPoint { cell, i, j };
                    out.push((p, self.location(p)));
                }
            }
        }
        out
    }

    /// Mixed derivative of the cell polynomial at `(s, t)`; all coefficients of the cell must be known.
    pub fn eval_in_cell(&self, coeffs: &BCoefficientMap, cell: usize, s: f64, t: f64, ds: usize, dt: usize) -> f64 {
        let bs = self.bases[cell][0].eval_all(ds, s);
        let bt = self.bases[cell][1].eval_all(dt, t);
        let c = coeffs.cell(cell);
        let n2 = self.n[1];
        let mut acc = 0.0;
        for (i, bi) in bs.iter().enumerate() {
            let row = &c[i * n2..(i + 1) * n2];
            acc += bi * row.iter().zip(&bt).map(|(x, y)| x * y).sum::<f64>();
        }
        acc
    }

    /// Value (or derivative) of a complete spline; the lowest-id containing cell is used.
    pub fn eval_spline(
        &self,
        coeffs: &BCoefficientMap,
        s: f64,
        t: f64,
        ds: usize,
        dt: usize,
    ) -> Result<f64, GSpaceError> {
        let cell = self.mesh.locate(s, t).ok_or(GSpaceError::OutsideDomain { s, t })?;
        Ok(self.eval_in_cell(coeffs, cell, s, t, ds, dt))
    }

    /// `(h, k)` derivative at corner `(se, te)` of `cell`, using only the disk
    /// coefficients that can contribute (`h`, `k` below `n`).
    fn corner_derivative(&self, coeffs: &BCoefficientMap, cell: usize, se: End, te: End, h: usize, k: usize) -> f64 {
        let [bs, bt] = &self.bases[cell];
        let mut acc = 0.0;
        for m in 0..=h {
            let i = corner_index(self.n[0], se, m);
            let ds = bs.endpoint_derivative(se, h, i);
            for l in 0..=k {
                let j = corner_index(self.n[1], te, l);
                acc += coeffs.get(cell, i, j) * ds * bt.endpoint_derivative(te, k, j);
            }
        }
        acc
    }

    /// Jet `D_s^h D_t^k p(v)`, `h <= r1`, `k <= r2`, from the disk of `cell` at vertex `v`.
    pub fn jet_from_cell(&self, coeffs: &BCoefficientMap, cell: usize, v: usize) -> DMatrix<f64> {
        let (se, te) = self.corner_ends(cell, v);
        DMatrix::from_fn(self.r[0] + 1, self.r[1] + 1, |h, k| self.corner_derivative(coeffs, cell, se, te, h, k))
    }

    /// Disk coefficients of `cell` at `v` reproducing the jet `jet`.
    fn disk_from_jet(&self, cell: usize, v: usize, jet: &DMatrix<f64>) -> Result<DMatrix<f64>, GSpaceError> {
        let (se, te) = self.corner_ends(cell, v);
        let ls = self.bases[cell][0].corner_matrix(se, self.r[0]);
        let lt = self.bases[cell][1].corner_matrix(te, self.r[1]);
        let place = || GSpaceError::SingularDiagonal { place: format!("vertex {v}, cell {cell}") };
        let x = ls.solve_lower_triangular(jet).ok_or_else(place)?;
        let ct = lt.solve_lower_triangular(&x.transpose()).ok_or_else(place)?;
        let c = ct.transpose();
        if c.iter().any(|v| !v.is_finite()) {
            return Err(place());
        }
        Ok(c)
    }

    /// Fills the disks at `v` of every cell having `v` as a corner from the
    /// disk of `source` (which must be known).
    pub fn propagate_vertex(&self, v: usize, source: usize, coeffs: &mut BCoefficientMap) -> Result<f64, GSpaceError> {
        let jet = self.jet_from_cell(coeffs, source, v);
        let mut writer = Writer { coeffs, residual: 0.0 };
        self.fill_vertex(v, &jet, &mut writer)?;
        Ok(writer.residual)
    }

    fn fill_vertex(&self, v: usize, jet: &DMatrix<f64>, w: &mut Writer) -> Result<(), GSpaceError> {
        for &cell in &self.mesh.vertices[v].corner_of {
            let c = self.disk_from_jet(cell, v, jet)?;
            let (se, te) = self.corner_ends(cell, v);
            for m in 0..=self.r[0] {
                for l in 0..=self.r[1] {
                    w.assign(cell, corner_index(self.n[0], se, m), corner_index(self.n[1], te, l), c[(m, l)]);
                }
            }
        }
        Ok(())
    }

    /// `(i, j)` of the coefficient with along-index `m` and across-index `l` for an edge.
    fn edge_index(o: Orientation, m: usize, l: usize) -> (usize, usize) {
        match o {
            Orientation::Horizontal => (m, l),
            Orientation::Vertical => (l, m),
        }
    }

    /// Derivative of order `h` along and `k` across the edge at a corner of `cell`.
    #[allow(clippy::too_many_arguments)]
    fn edge_corner_derivative(
        &self,
        coeffs: &BCoefficientMap,
        o: Orientation,
        cell: usize,
        along_end: End,
        side: Side,
        h: usize,
        k: usize,
    ) -> f64 {
        let xe = across_end(side);
        match o {
            Orientation::Horizontal => self.corner_derivative(coeffs, cell, along_end, xe, h, k),
            Orientation::Vertical => self.corner_derivative(coeffs, cell, xe, along_end, k, h),
        }
    }

    /// Determines every coefficient within the smoothness distance of composite
    /// edge `e`, given the anchor data at its start, its part of the determining
    /// set and the disks at its end. Returns the across-derivative traces
    /// `D^k p|_e` as coefficients on the edge basis, `k <= r_e`.
    pub fn propagate_edge(&self, e: usize, coeffs: &mut BCoefficientMap) -> Result<(Vec<Vec<f64>>, f64), GSpaceError> {
        let mut writer = Writer { coeffs, residual: 0.0 };
        let traces = self.fill_edge(e, &mut writer)?;
        Ok((traces, writer.residual))
    }

    fn fill_edge(&self, e: usize, w: &mut Writer) -> Result<Vec<Vec<f64>>, GSpaceError> {
        let edge = &self.mesh.composites[e];
        let o = edge.orientation;
        let da = along_dir(o);
        let dx = 1 - da;
        let (n_al, r_al) = (self.n[da], self.r[da]);
        let (n_x, r_x) = (self.n[dx], self.r[dx]);
        let left_len = n_al - r_al - 1;
        let right_len = r_al + 1;

        let anchor = self.edge_anchor[e];
        let last = *edge
            .sides
            .iter()
            .rev()
            .find(|sr| self.mesh.cells[sr.cell].side(sr.side).3 == edge.hi)
            .expect("some cell side ends at the edge endpoint");

        let eb = &self.edge_bases[e];
        let mut traces = Vec::with_capacity(r_x + 1);
        for k in 0..=r_x {
            let left: Vec<f64> = (0..left_len)
                .map(|h| self.edge_corner_derivative(w.coeffs, o, anchor.cell, End::Left, anchor.side, h, k))
                .collect();
            let right: Vec<f64> = (0..right_len)
                .map(|h| self.edge_corner_derivative(w.coeffs, o, last.cell, End::Right, last.side, h, k))
                .collect();
            if left.iter().chain(&right).any(|v| !v.is_finite()) {
                return Err(GSpaceError::Precondition(format!("edge {e} propagated before its endpoint data")));
            }
            traces.push(eb.from_endpoint_derivatives(&left, &right).map_err(basis_err(format!("edge {e}")))?);
        }

        for sr in &edge.sides {
            let cell = sr.cell;
            let (_, _, lo, hi) = self.mesh.cells[cell].side(sr.side);
            let (lo, hi) = (to_f64(lo), to_f64(hi));
            let cb = &self.bases[cell][da];
            let xb = &self.bases[cell][dx];
            let xe = across_end(sr.side);
            let lx = xb.corner_matrix(xe, r_x);
            // along-direction coefficients of each trace restricted to the side
            let mut gamma = Vec::with_capacity(r_x + 1);
            for g in &traces {
                let left: Vec<f64> = (0..left_len).map(|h| eb.combine(g, h, lo)).collect();
                let right: Vec<f64> = (0..right_len).map(|h| eb.combine(g, h, hi)).collect();
                gamma.push(cb.from_endpoint_derivatives(&left, &right).map_err(basis_err(format!("cell {cell}")))?);
            }
            for m in 0..n_al {
                let mut rows = vec![0.0; r_x + 1];
                for k in 0..=r_x {
                    let mut acc = gamma[k][m];
                    for l in 0..k {
                        acc -= lx[(k, l)] * rows[l];
                    }
                    let diag = lx[(k, k)];
                    if diag == 0.0 || !diag.is_finite() {
                        return Err(GSpaceError::SingularDiagonal { place: format!("edge {e}, cell {cell}") });
                    }
                    rows[k] = acc / diag;
                }
                for (l, value) in rows.iter().enumerate() {
                    let (i, j) = Self::edge_index(o, m, corner_index(n_x, xe, l));
                    w.assign(cell, i, j, *value);
                }
            }
        }
        Ok(traces)
    }

    /// Jet at an interior T-junction of `e` from the edge traces.
    fn jet_on_edge(&self, e: usize, v: usize, traces: &[Vec<f64>]) -> DMatrix<f64> {
        let edge = &self.mesh.composites[e];
        let (x, y) = self.mesh.vertices[v].position();
        let eb = &self.edge_bases[e];
        match edge.orientation {
            Orientation::Horizontal => {
                DMatrix::from_fn(self.r[0] + 1, self.r[1] + 1, |h, k| eb.combine(&traces[k], h, x))
            }
            Orientation::Vertical => {
                DMatrix::from_fn(self.r[0] + 1, self.r[1] + 1, |h, k| eb.combine(&traces[h], k, y))
            }
        }
    }

    /// Completes a spline from its values on the determining set (in the order of
    /// [`Self::minimal_determining_set`]).
    pub fn complete_coefficients(&self, assignment: &[f64]) -> Result<Completion, GSpaceError> {
        if assignment.len() != self.mds.len() {
            return Err(GSpaceError::AssignmentLength { got: assignment.len(), expected: self.mds.len() });
        }
        let mut coeffs = self.empty_map();
        for (p, v) in self.mds.iter().zip(assignment) {
            coeffs.set(p.point.cell, p.point.i, p.point.j, *v);
        }
        let mut w = Writer { coeffs: &mut coeffs, residual: 0.0 };
        let nv = self.mesh.vertices.len();
        let ne = self.mesh.composites.len();
        let mut vertex_done = vec![false; nv];
        let mut edge_done = vec![false; ne];
        let mut queued = vec![false; ne];
        let mut queue = VecDeque::new();

        for v in 0..nv {
            if let Some(cell) = self.vertex_anchor[v] {
                let jet = self.jet_from_cell(w.coeffs, cell, v);
                self.fill_vertex(v, &jet, &mut w)?;
                vertex_done[v] = true;
            }
        }
        let ready = |e: usize, vd: &[bool]| {
            let edge = &self.mesh.composites[e];
            vd[edge.start] && vd[edge.end]
        };
        for e in 0..ne {
            if ready(e, &vertex_done) {
                queued[e] = true;
                queue.push_back(e);
            }
        }
        let mut steps = 0;
        while let Some(e) = queue.pop_front() {
            steps += 1;
            if steps > nv + ne {
                break;
            }
            let traces = self.fill_edge(e, &mut w)?;
            edge_done[e] = true;
            for &v in &self.mesh.composites[e].interior {
                if vertex_done[v] {
                    continue;
                }
                let jet = self.jet_on_edge(e, v, &traces);
                self.fill_vertex(v, &jet, &mut w)?;
                vertex_done[v] = true;
                for &f in &self.vertex_edges[v] {
                    if !queued[f] && ready(f, &vertex_done) {
                        queued[f] = true;
                        queue.push_back(f);
                    }
                }
            }
        }
        let vertices = vertex_done.iter().filter(|d| !**d).count();
        let edges = edge_done.iter().filter(|d| !**d).count();
        if vertices + edges > 0 {
            return Err(GSpaceError::Stalled { vertices, edges });
        }
        let residual = w.residual;
        let count = coeffs.values.iter().filter(|v| !v.is_finite()).count();
        if count > 0 {
            return Err(GSpaceError::Undetermined { count });
        }
        Ok(Completion { coeffs, residual })
    }

    /// B-coefficients of the dual basis element attached to the `k`-th point of the determining set.
    pub fn basis_function(&self, k: usize) -> Result<BCoefficientMap, GSpaceError> {
        let mut a = vec![0.0; self.mds.len()];
        a[k] = 1.0;
        Ok(self.complete_coefficients(&a)?.coeffs)
    }

    /// Values of a complete map on the determining set.
    pub fn restrict_to_mds(&self, coeffs: &BCoefficientMap) -> Vec<f64> {
        self.mds.iter().map(|p| coeffs.get(p.point.cell, p.point.i, p.point.j)).collect()
    }

    /// Cells on either side of an interior edge segment (`None` on the boundary).
    fn segment_cells(&self, seg: usize) -> Option<(usize, usize)> {
        let g = &self.mesh.segments[seg];
        let covers = |lo: Coord, hi: Coord| lo <= g.lo && g.hi <= hi;
        let (mut before, mut after) = (None, None);
        for (id, c) in self.mesh.cells.iter().enumerate() {
            match g.orientation {
                Orientation::Vertical if covers(c.y0, c.y1) => {
                    if c.x1 == g.line {
                        before = Some(id);
                    } else if c.x0 == g.line {
                        after = Some(id);
                    }
                }
                Orientation::Horizontal if covers(c.x0, c.x1) => {
                    if c.y1 == g.line {
                        before = Some(id);
                    } else if c.y0 == g.line {
                        after = Some(id);
                    }
                }
                _ => {}
            }
        }
        before.zip(after)
    }

    /// Jumps of `D_s^h D_t^k`, `h <= r1`, `k <= r2`, across interior edges at
    /// about `points` sample points spread over the interior edge segments.
    pub fn smoothness_jumps(&self, coeffs: &BCoefficientMap, points: usize) -> JumpReport {
        let pairs: Vec<(usize, (usize, usize))> =
            (0..self.mesh.segments.len()).filter_map(|g| self.segment_cells(g).map(|p| (g, p))).collect();
        let per = points.div_ceil(pairs.len().max(1)).max(1);
        let [r1, r2] = self.r;
        let mut jumps = vec![0.0f64; (r1 + 1) * (r2 + 1)];
        let mut scales = vec![1.0f64; (r1 + 1) * (r2 + 1)];
        let mut samples = 0;
        for (g, (a, b)) in pairs {
            let seg = &self.mesh.segments[g];
            let (lo, hi, line) = (to_f64(seg.lo), to_f64(seg.hi), to_f64(seg.line));
            for m in 0..per {
                let x = lo + (hi - lo) * (m as f64 + 0.5) / per as f64;
                let (s, t) = match seg.orientation {
                    Orientation::Vertical => (line, x),
                    Orientation::Horizontal => (x, line),
                };
                samples += 1;
                for h in 0..=r1 {
                    for k in 0..=r2 {
                        let pa = self.eval_in_cell(coeffs, a, s, t, h, k);
                        let pb = self.eval_in_cell(coeffs, b, s, t, h, k);
                        let idx = h * (r2 + 1) + k;
                        jumps[idx] = jumps[idx].max((pa - pb).abs());
                        scales[idx] = scales[idx].max(pa.abs()).max(pb.abs());
                    }
                }
            }
        }
        let max_jump = jumps.iter().copied().fold(0.0, f64::max);
        let max_relative = jumps.iter().zip(&scales).map(|(j, s)| j / s).fold(0.0, f64::max);
        JumpReport { samples, max_jump, max_relative }
    }

    /// Cells on which a coefficient map is not (numerically) zero.
    pub fn support(&self, coeffs: &BCoefficientMap, tol: f64) -> Vec<usize> {
        (0..self.num_cells()).filter(|&c| coeffs.cell(c).iter().any(|v| v.abs() > tol)).collect()
    }
}

struct Writer<'a> {
    coeffs: &'a mut BCoefficientMap,
    residual: f64,
}

impl Writer<'_> {
    /// Sets a coefficient; an already known value is kept and the mismatch recorded.
    fn assign(&mut self, cell: usize, i: usize, j: usize, value: f64) {
        let old = self.coeffs.get(cell, i, j);
        if old.is_finite() {
            self.residual = self.residual.max((old - value).abs());
        } else {
            self.coeffs.set(cell, i, j, value);
        }
    }
}

/// The counting formula for the dimension.
pub fn dimension_formula(
    n: [usize; 2],
    r: [usize; 2],
    j_nt: usize,
    e_hor: usize,
    e_ver: usize,
    cells: usize,
) -> DimensionTerms {
    let [n1, n2] = n;
    let [r1, r2] = r;
    DimensionTerms {
        vertices: (r1 + 1) * (r2 + 1) * j_nt,
        horizontal_edges: (r2 + 1) * (n1 - 2 * r1 - 2) * e_hor,
        vertical_edges: (r1 + 1) * (n2 - 2 * r2 - 2) * e_ver,
        cells: (n1 - 2 * r1 - 2) * (n2 - 2 * r2 - 2) * cells,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sectionspace::GeneratorPair;
    use crate::tmesh::{uniform_grid, Rect};

    fn space(rects: &[(i64, i64, i64, i64)], gen: GeneratorPair, n: usize, r: usize) -> GSplineSpace {
        let mesh = TMesh::new(rects.iter().map(|&(a, b, c, d)| Rect::from_ints(a, b, c, d)).collect()).unwrap();
        GSplineSpace::new(mesh, [SectionSpec::new(gen, n); 2], [r, r]).unwrap()
    }

    #[test]
    fn single_cell_mds_is_everything() {
        let sp = space(&[(0, 1, 0, 1)], GeneratorPair::HYPERBOLIC, 4, 1);
        assert_eq!(sp.minimal_determining_set().len(), 16);
        assert_eq!(sp.dimension().unwrap(), 16);
        let a: Vec<f64> = (0..16).map(|k| k as f64).collect();
        let done = sp.complete_coefficients(&a).unwrap();
        assert_eq!(sp.restrict_to_mds(&done.coeffs), a);
        let p = sp.domain_points();
        assert_eq!(p.len(), 16);
        assert_eq!(p[0].1, (0.0, 0.0));
    }

    #[test]
    fn tensor_grid_dimension() {
        let mesh = TMesh::new(uniform_grid(2, 2, 0.into(), 2.into(), 0.into(), 2.into())).unwrap();
        let sp = GSplineSpace::new(mesh, [SectionSpec::new(GeneratorPair::HYPERBOLIC, 4); 2], [1, 1]).unwrap();
        assert_eq!(sp.dimension().unwrap(), 36);
        assert_eq!(sp.minimal_determining_set().len(), 36);
    }

    #[test]
    fn zero_and_constant_completion() {
        let sp = space(&[(0, 2, 0, 1), (0, 1, 1, 2), (1, 2, 1, 2)], GeneratorPair::HYPERBOLIC, 5, 1);
        let m = sp.minimal_determining_set().len();
        assert_eq!(m, sp.dimension().unwrap());
        let zero = sp.complete_coefficients(&vec![0.0; m]).unwrap();
        assert!(zero.coeffs.values.iter().all(|v| *v == 0.0));
        let one = sp.complete_coefficients(&vec![1.0; m]).unwrap();
        assert!(one.coeffs.values.iter().all(|v| (v - 1.0).abs() < 1e-10));
        assert!(one.residual < 1e-10);
    }

    #[test]
    fn continuity_across_t_junction() {
        let sp = space(&[(0, 2, 0, 1), (0, 1, 1, 2), (1, 2, 1, 2)], GeneratorPair::TRIGONOMETRIC, 4, 1);
        let m = sp.minimal_determining_set().len();
        let a: Vec<f64> = (0..m).map(|k| ((k * 37 % 11) as f64 - 5.0) / 3.0).collect();
        let done = sp.complete_coefficients(&a).unwrap();
        let c = &done.coeffs;
        for &s in &[0.2, 0.7, 1.3, 1.9] {
            let top = if s < 1.0 { 1 } else { 2 };
            for dt in 0..=1 {
                for ds in 0..=1 {
                    let below = sp.eval_in_cell(c, 0, s, 1.0, ds, dt);
                    let above = sp.eval_in_cell(c, top, s, 1.0, ds, dt);
                    assert!((below - above).abs() < 1e-8 * below.abs().max(1.0), "s={s} ds={ds} dt={dt}");
                }
            }
        }
        let jumps = sp.smoothness_jumps(c, 50);
        assert!(jumps.samples >= 50);
        assert!(jumps.max_relative < 1e-8);
        let mut broken = c.clone();
        broken.set(2, 1, 0, broken.get(2, 1, 0) + 0.5);
        assert!(sp.smoothness_jumps(&broken, 50).max_jump > 1e-3);
    }

    #[test]
    fn preconditions() {
        let mesh = TMesh::new(vec![Rect::from_ints(0, 1, 0, 1)]).unwrap();
        let spec = SectionSpec::new(GeneratorPair::HYPERBOLIC, 4);
        assert!(matches!(GSplineSpace::new(mesh.clone(), [spec; 2], [2, 1]), Err(GSpaceError::Precondition(_))));
        let bad = SectionSpec::new(GeneratorPair::TRIGONOMETRIC, 4);
        let wide = TMesh::new(vec![Rect::from_ints(0, 4, 0, 1)]).unwrap();
        assert!(matches!(GSplineSpace::new(wide, [bad; 2], [1, 1]), Err(GSpaceError::Basis { .. })));
        assert_eq!(dimension_formula([4, 4], [1, 1], 9, 6, 6, 4).total(), 36);
    }
}
