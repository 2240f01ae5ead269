//! T-meshes over exact rational coordinates: validation, vertex classification,
//! edge segments, composite edges, regularity, cycles and shape statistics.

use std::collections::{BTreeMap, HashMap};

use num_rational::Ratio;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sectionspace::SectionSpec;

pub type Coord = Ratio<i64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("malformed mesh document: {0}")]
    Malformed(String),
    #[error("cannot parse coordinate {0:?}")]
    Coordinate(String),
    #[error("cell {0} has zero area")]
    ZeroArea(usize),
    #[error("cells {0} and {1} overlap")]
    Overlap(usize, usize),
    #[error("domain is disconnected; cells {0:?} are not reachable from cell 0")]
    Disconnected(Vec<usize>),
    #[error("mesh has no cells")]
    Empty,
    #[error("{0}")]
    Precondition(String),
}

pub fn to_f64(c: Coord) -> f64 {
    c.to_f64().unwrap_or_else(|| *c.numer() as f64 / *c.denom() as f64)
}

/// Parses `"3"`, `"-0.25"` or `"1/3"`.
pub fn parse_coord(text: &str) -> Result<Coord, MeshError> {
    let err = || MeshError::Coordinate(text.to_string());
    let t = text.trim();
    if let Some((p, q)) = t.split_once('/') {
        let p: i64 = p.trim().parse().map_err(|_| err())?;
        let q: i64 = q.trim().parse().map_err(|_| err())?;
        if q == 0 {
            return Err(err());
        }
        return Ok(Ratio::new(p, q));
    }
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() {
        return Err(err());
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(err());
    }
    let mut num: i64 = 0;
    let mut den: i64 = 1;
    for c in int.chars().chain(frac.chars()) {
        num = num.checked_mul(10).and_then(|v| v.checked_add(c as i64 - '0' as i64)).ok_or_else(err)?;
    }
    for _ in 0..frac.len() {
        den = den.checked_mul(10).ok_or_else(err)?;
    }
    Ok(Ratio::new(if neg { -num } else { num }, den))
}

/// Decimal text when the value terminates, `p/q` otherwise.
pub fn format_coord(c: Coord) -> String {
    let mut d = *c.denom();
    while d % 2 == 0 {
        d /= 2;
    }
    while d % 5 == 0 {
        d /= 5;
    }
    if d != 1 {
        return format!("{}/{}", c.numer(), c.denom());
    }
    let (mut num, den) = (*c.numer() as i128, *c.denom() as i128);
    let neg = num < 0;
    num = num.abs();
    let int = num / den;
    let mut rem = num % den;
    let mut out = format!("{}{}", if neg { "-" } else { "" }, int);
    if rem != 0 {
        out.push('.');
        while rem != 0 {
            rem *= 10;
            out.push(char::from(b'0' + (rem / den) as u8));
            rem %= den;
        }
    }
    out
}

/// Axis-aligned cell `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rect {
    pub x0: Coord,
    pub x1: Coord,
    pub y0: Coord,
    pub y1: Coord,
}

impl Rect {
    pub fn new(x0: Coord, x1: Coord, y0: Coord, y1: Coord) -> Self {
        Rect { x0, x1, y0, y1 }
    }

    pub fn from_ints(x0: i64, x1: i64, y0: i64, y1: i64) -> Self {
        Rect::new(x0.into(), x1.into(), y0.into(), y1.into())
    }

    pub fn contains(&self, x: Coord, y: Coord) -> bool {
        self.x0 <= x && x <= self.x1 && self.y0 <= y && y <= self.y1
    }

    pub fn contains_f64(&self, s: f64, t: f64, slack: f64) -> bool {
        let [a, b, c, d] = self.bounds();
        s >= a - slack && s <= b + slack && t >= c - slack && t <= d + slack
    }

    pub fn bounds(&self) -> [f64; 4] {
        [to_f64(self.x0), to_f64(self.x1), to_f64(self.y0), to_f64(self.y1)]
    }

    pub fn width(&self) -> Coord {
        self.x1 - self.x0
    }

    pub fn height(&self) -> Coord {
        self.y1 - self.y0
    }

    pub fn diameter(&self) -> f64 {
        to_f64(self.width()).hypot(to_f64(self.height()))
    }

    pub fn center(&self) -> (f64, f64) {
        let [a, b, c, d] = self.bounds();
        (0.5 * (a + b), 0.5 * (c + d))
    }

    fn interiors_overlap(&self, o: &Rect) -> bool {
        self.x0 < o.x1 && o.x0 < self.x1 && self.y0 < o.y1 && o.y0 < self.y1
    }

    fn touches(&self, o: &Rect) -> bool {
        self.x0 <= o.x1 && o.x0 <= self.x1 && self.y0 <= o.y1 && o.y0 <= self.y1
    }

    /// Shares a boundary piece of positive length with `o`.
    pub fn shares_side(&self, o: &Rect) -> bool {
        let ov = |a0: Coord, a1: Coord, b0: Coord, b1: Coord| a1.min(b1) > a0.max(b0);
        ((self.x1 == o.x0 || self.x0 == o.x1) && ov(self.y0, self.y1, o.y0, o.y1))
            || ((self.y1 == o.y0 || self.y0 == o.y1) && ov(self.x0, self.x1, o.x0, o.x1))
    }

    /// The side as `(orientation, line, lo, hi)`.
    pub fn side(&self, side: Side) -> (Orientation, Coord, Coord, Coord) {
        match side {
            Side::Bottom => (Orientation::Horizontal, self.y0, self.x0, self.x1),
            Side::Top => (Orientation::Horizontal, self.y1, self.x0, self.x1),
            Side::Left => (Orientation::Vertical, self.x0, self.y0, self.y1),
            Side::Right => (Orientation::Vertical, self.x1, self.y0, self.y1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Orientation {
    Horizontal,
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Bottom, Side::Right, Side::Top, Side::Left];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VertexKind {
    Crossing,
    TJunction,
    Boundary,
}

#[derive(Debug, Clone)]
pub struct Vertex {
    pub x: Coord,
    pub y: Coord,
    pub kind: VertexKind,
    /// True when some quadrant around the vertex is outside the domain.
    pub on_boundary: bool,
    /// Cells having this vertex as a corner.
    pub corner_of: Vec<usize>,
    /// Cells containing the vertex (corner or side interior).
    pub cells: Vec<usize>,
    /// For T-junctions, the composite edge whose interior holds the vertex.
    pub host: Option<usize>,
}

impl Vertex {
    pub fn is_t_junction(&self) -> bool {
        self.kind == VertexKind::TJunction
    }

    pub fn position(&self) -> (f64, f64) {
        (to_f64(self.x), to_f64(self.y))
    }
}

#[derive(Debug, Clone)]
pub struct EdgeSegment {
    pub orientation: Orientation,
    pub line: Coord,
    pub lo: Coord,
    pub hi: Coord,
    pub start: usize,
    pub end: usize,
    pub composite: usize,
}

/// Where a cell side lies relative to a composite edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SideRef {
    pub cell: usize,
    pub side: Side,
}

#[derive(Debug, Clone)]
pub struct CompositeEdge {
    pub orientation: Orientation,
    pub line: Coord,
    pub lo: Coord,
    pub hi: Coord,
    /// Endpoint with the smaller along-coordinate.
    pub start: usize,
    pub end: usize,
    pub segments: Vec<usize>,
    /// T-junctions in the interior, ordered along the edge.
    pub interior: Vec<usize>,
    /// Cell sides lying on the edge, ordered along it.
    pub sides: Vec<SideRef>,
}

impl CompositeEdge {
    pub fn length(&self) -> Coord {
        self.hi - self.lo
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MeshStats {
    pub j_nt: usize,
    pub t_junctions: usize,
    pub e_hor: usize,
    pub e_ver: usize,
    pub n_cells: usize,
    pub alpha: f64,
    pub beta: usize,
    pub kappa: f64,
    /// Largest cell diameter.
    pub h: f64,
}

#[derive(Debug, Clone)]
pub struct TMesh {
    pub cells: Vec<Rect>,
    pub vertices: Vec<Vertex>,
    pub segments: Vec<EdgeSegment>,
    pub composites: Vec<CompositeEdge>,
    /// `cell_sides[c][side as usize]` is the composite edge holding that side.
    pub cell_sides: Vec<[usize; 4]>,
    pub irregular_vertices: Vec<usize>,
    pub cycle: Option<Vec<usize>>,
    vertex_index: HashMap<(Coord, Coord), usize>,
}

fn along(o: Orientation, x: Coord, y: Coord) -> (Coord, Coord) {
    match o {
        Orientation::Horizontal => (y, x),
        Orientation::Vertical => (x, y),
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut y = x;
        while self.0[y] != r {
            let next = self.0[y];
            self.0[y] = r;
            y = next;
        }
        r
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

impl TMesh {
    /// Validates the cells and derives all incidence structure.
    pub fn new(cells: Vec<Rect>) -> Result<TMesh, MeshError> {
        if cells.is_empty() {
            return Err(MeshError::Empty);
        }
        for (i, c) in cells.iter().enumerate() {
            if c.x1 <= c.x0 || c.y1 <= c.y0 {
                return Err(MeshError::ZeroArea(i));
            }
        }
        let mut uf = UnionFind::new(cells.len());
        for i in 0..cells.len() {
            for j in i + 1..cells.len() {
                if cells[i].interiors_overlap(&cells[j]) {
                    return Err(MeshError::Overlap(i, j));
                }
                if cells[i].touches(&cells[j]) {
                    uf.union(i, j);
                }
            }
        }
        let unreachable: Vec<usize> = (0..cells.len()).filter(|&i| uf.find(i) != 0).collect();
        if !unreachable.is_empty() {
            return Err(MeshError::Disconnected(unreachable));
        }

        let mut mesh = TMesh {
            cells,
            vertices: Vec::new(),
            segments: Vec::new(),
            composites: Vec::new(),
            cell_sides: Vec::new(),
            irregular_vertices: Vec::new(),
            cycle: None,
            vertex_index: HashMap::new(),
        };
        mesh.build_vertices();
        mesh.build_edges();
        mesh.check_regularity();
        mesh.cycle = mesh.find_cycle();
        Ok(mesh)
    }

    fn build_vertices(&mut self) {
        let mut points: Vec<(Coord, Coord)> = Vec::new();
        for c in &self.cells {
            for (x, y) in [(c.x0, c.y0), (c.x1, c.y0), (c.x1, c.y1), (c.x0, c.y1)] {
                points.push((x, y));
            }
        }
        points.sort();
        points.dedup();
        for (x, y) in points {
            let mut corner_of = Vec::new();
            let mut cells = Vec::new();
            let mut t_junction = false;
            let mut quadrants = [false; 4];
            for (id, c) in self.cells.iter().enumerate() {
                if !c.contains(x, y) {
                    continue;
                }
                cells.push(id);
                let corner = (x == c.x0 || x == c.x1) && (y == c.y0 || y == c.y1);
                if corner {
                    corner_of.push(id);
                } else if x == c.x0 || x == c.x1 || y == c.y0 || y == c.y1 {
                    t_junction = true;
                }
                let east = c.x0 <= x && x < c.x1;
                let west = c.x0 < x && x <= c.x1;
                let north = c.y0 <= y && y < c.y1;
                let south = c.y0 < y && y <= c.y1;
                quadrants[0] |= east && north;
                quadrants[1] |= west && north;
                quadrants[2] |= west && south;
                quadrants[3] |= east && south;
            }
            let on_boundary = !quadrants.iter().all(|q| *q);
            let kind = if t_junction {
                VertexKind::TJunction
            } else if on_boundary {
                VertexKind::Boundary
            } else {
                VertexKind::Crossing
            };
            self.vertex_index.insert((x, y), self.vertices.len());
            self.vertices.push(Vertex { x, y, kind, on_boundary, corner_of, cells, host: None });
        }
    }

    fn build_edges(&mut self) {
        // sides grouped by supporting line
        let mut lines: BTreeMap<(Orientation, Coord), Vec<(Coord, Coord)>> = BTreeMap::new();
        for c in &self.cells {
            for side in Side::ALL {
                let (o, line, lo, hi) = c.side(side);
                lines.entry((o, line)).or_default().push((lo, hi));
            }
        }
        let mut on_line: HashMap<(Orientation, Coord), Vec<(Coord, usize)>> = HashMap::new();
        for (id, v) in self.vertices.iter().enumerate() {
            for o in [Orientation::Horizontal, Orientation::Vertical] {
                let (line, pos) = along(o, v.x, v.y);
                on_line.entry((o, line)).or_default().push((pos, id));
            }
        }
        for list in on_line.values_mut() {
            list.sort();
        }

        for ((o, line), mut intervals) in lines {
            intervals.sort();
            let mut runs: Vec<(Coord, Coord)> = Vec::new();
            for (lo, hi) in intervals {
                match runs.last_mut() {
                    Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
                    _ => runs.push((lo, hi)),
                }
            }
            let verts = &on_line[&(o, line)];
            for (lo, hi) in runs {
                let pts: Vec<(Coord, usize)> = verts.iter().copied().filter(|(p, _)| *p >= lo && *p <= hi).collect();
                let mut current: Option<CompositeEdge> = None;
                for w in pts.windows(2) {
                    let ((p0, v0), (p1, v1)) = (w[0], w[1]);
                    let comp = current.get_or_insert_with(|| CompositeEdge {
                        orientation: o,
                        line,
                        lo: p0,
                        hi: p0,
                        start: v0,
                        end: v0,
                        segments: Vec::new(),
                        interior: Vec::new(),
                        sides: Vec::new(),
                    });
                    comp.segments.push(self.segments.len());
                    comp.hi = p1;
                    comp.end = v1;
                    self.segments.push(EdgeSegment {
                        orientation: o,
                        line,
                        lo: p0,
                        hi: p1,
                        start: v0,
                        end: v1,
                        composite: self.composites.len(),
                    });
                    let last = p1 == hi;
                    if last || !self.vertices[v1].is_t_junction() {
                        self.composites.push(current.take().unwrap());
                    } else {
                        comp.interior.push(v1);
                    }
                }
            }
        }

        let mut by_line: HashMap<(Orientation, Coord), Vec<usize>> = HashMap::new();
        for (id, e) in self.composites.iter().enumerate() {
            by_line.entry((e.orientation, e.line)).or_default().push(id);
            for &v in &e.interior {
                self.vertices[v].host = Some(id);
            }
        }
        let mut cell_sides = Vec::with_capacity(self.cells.len());
        for (cid, c) in self.cells.iter().enumerate() {
            let mut ids = [0usize; 4];
            for side in Side::ALL {
                let (o, line, lo, hi) = c.side(side);
                let e = by_line[&(o, line)]
                    .iter()
                    .copied()
                    .find(|&e| self.composites[e].lo <= lo && hi <= self.composites[e].hi)
                    .expect("every cell side lies on a composite edge");
                ids[side as usize] = e;
                self.composites[e].sides.push(SideRef { cell: cid, side });
            }
            cell_sides.push(ids);
        }
        for e in &mut self.composites {
            let cells = &self.cells;
            e.sides.sort_by_key(|sr| {
                let (_, _, lo, _) = cells[sr.cell].side(sr.side);
                (lo, sr.side as usize)
            });
        }
        self.cell_sides = cell_sides;
    }

    fn check_regularity(&mut self) {
        for (vid, v) in self.vertices.iter().enumerate() {
            let cs = &v.cells;
            let mut uf = UnionFind::new(cs.len());
            for i in 0..cs.len() {
                for j in i + 1..cs.len() {
                    if self.cells[cs[i]].shares_side(&self.cells[cs[j]]) {
                        uf.union(i, j);
                    }
                }
            }
            if (0..cs.len()).any(|i| uf.find(i) != 0) {
                self.irregular_vertices.push(vid);
            }
        }
    }

    /// T-junction graph: `w -> x` when `x` is a T-junction endpoint of the
    /// composite edge hosting `w`. Both endpoints are followed.
    pub fn cycle_graph(&self) -> Vec<Vec<usize>> {
        self.vertices
            .iter()
            .map(|v| match v.host {
                Some(e) => {
                    let e = &self.composites[e];
                    [e.start, e.end].into_iter().filter(|&x| self.vertices[x].is_t_junction()).collect()
                }
                None => Vec::new(),
            })
            .collect()
    }

    fn find_cycle(&self) -> Option<Vec<usize>> {
        let graph = self.cycle_graph();
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut state = vec![0u8; graph.len()];
        let mut stack_path: Vec<usize> = Vec::new();
        fn dfs(v: usize, graph: &[Vec<usize>], state: &mut [u8], path: &mut Vec<usize>) -> Option<Vec<usize>> {
            state[v] = 1;
            path.push(v);
            for &w in &graph[v] {
                if state[w] == 1 {
                    let start = path.iter().position(|&x| x == w).unwrap();
                    return Some(path[start..].to_vec());
                }
                if state[w] == 0 {
                    if let Some(c) = dfs(w, graph, state, path) {
                        return Some(c);
                    }
                }
            }
            path.pop();
            state[v] = 2;
            None
        }
        for v in 0..graph.len() {
            if state[v] == 0 {
                if let Some(c) = dfs(v, &graph, &mut state, &mut stack_path) {
                    return Some(c);
                }
            }
        }
        None
    }

    pub fn is_regular(&self) -> bool {
        self.irregular_vertices.is_empty()
    }

    pub fn has_cycles(&self) -> bool {
        self.cycle.is_some()
    }

    pub fn vertex_at(&self, x: Coord, y: Coord) -> Option<usize> {
        self.vertex_index.get(&(x, y)).copied()
    }

    pub fn t_junction_count(&self) -> usize {
        self.vertices.iter().filter(|v| v.is_t_junction()).count()
    }

    /// Composite edges that end at vertex `v`.
    pub fn edges_ending_at(&self, v: usize) -> Vec<usize> {
        self.composites.iter().enumerate().filter(|(_, e)| e.start == v || e.end == v).map(|(id, _)| id).collect()
    }

    /// Chain relation between composite edges: `f -> g` when an endpoint of `f`
    /// lies in the interior of `g`.
    pub fn chain_predecessors(&self) -> Vec<Vec<usize>> {
        let mut pred = vec![Vec::new(); self.composites.len()];
        for (f, e) in self.composites.iter().enumerate() {
            for w in [e.start, e.end] {
                if let Some(g) = self.vertices[w].host {
                    if !pred[g].contains(&f) {
                        pred[g].push(f);
                    }
                }
            }
        }
        pred
    }

    pub fn stats(&self) -> Result<MeshStats, MeshError> {
        if !self.is_regular() {
            return Err(MeshError::Precondition("mesh is not regular".into()));
        }
        if self.has_cycles() {
            return Err(MeshError::Precondition("mesh contains a cycle of T-junctions".into()));
        }
        let t = self.t_junction_count();
        let e_hor = self.composites.iter().filter(|e| e.orientation == Orientation::Horizontal).count();
        let mut alpha = 1.0f64;
        for e in &self.composites {
            let len = to_f64(e.length());
            let first = &self.segments[e.segments[0]];
            let last = &self.segments[*e.segments.last().unwrap()];
            alpha = alpha.max(len / to_f64(first.hi - first.lo)).max(len / to_f64(last.hi - last.lo));
        }
        let pred = self.chain_predecessors();
        let mut memo: Vec<Option<usize>> = vec![None; self.composites.len()];
        let mut visiting = vec![false; self.composites.len()];
        fn longest(
            g: usize,
            pred: &[Vec<usize>],
            memo: &mut [Option<usize>],
            visiting: &mut [bool],
        ) -> Result<usize, MeshError> {
            if let Some(v) = memo[g] {
                return Ok(v);
            }
            if visiting[g] {
                return Err(MeshError::Precondition("chain relation is cyclic".into()));
            }
            visiting[g] = true;
            let mut best = 0;
            for &f in &pred[g] {
                best = best.max(longest(f, pred, memo, visiting)? + 1);
            }
            visiting[g] = false;
            memo[g] = Some(best);
            Ok(best)
        }
        let mut beta = 0;
        for g in 0..self.composites.len() {
            beta = beta.max(longest(g, &pred, &mut memo, &mut visiting)?);
        }
        let kappa = self
            .cells
            .iter()
            .map(|c| {
                let (w, h) = (to_f64(c.width()), to_f64(c.height()));
                w.max(h) / w.min(h)
            })
            .fold(1.0, f64::max);
        let h = self.cells.iter().map(Rect::diameter).fold(0.0, f64::max);
        Ok(MeshStats {
            j_nt: self.vertices.len() - t,
            t_junctions: t,
            e_hor,
            e_ver: self.composites.len() - e_hor,
            n_cells: self.cells.len(),
            alpha,
            beta,
            kappa,
            h,
        })
    }

    /// Bounding box `[xmin, xmax, ymin, ymax]` of the domain.
    pub fn bounding_box(&self) -> [f64; 4] {
        let mut bb = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
        for c in &self.cells {
            let [a, b, cc, d] = c.bounds();
            bb[0] = bb[0].min(a);
            bb[1] = bb[1].max(b);
            bb[2] = bb[2].min(cc);
            bb[3] = bb[3].max(d);
        }
        bb
    }

    /// Lowest-id cell containing `(s, t)`.
    pub fn locate(&self, s: f64, t: f64) -> Option<usize> {
        let slack = 1e-12 * self.cells.iter().map(Rect::diameter).fold(1.0, f64::max);
        self.cells.iter().position(|c| c.contains_f64(s, t, slack))
    }

    /// Splits every cell into four equal children.
    pub fn refine_uniform(&self) -> Result<TMesh, MeshError> {
        let two = Coord::from_integer(2);
        let mut cells = Vec::with_capacity(4 * self.cells.len());
        for c in &self.cells {
            let xm = (c.x0 + c.x1) / two;
            let ym = (c.y0 + c.y1) / two;
            cells.push(Rect::new(c.x0, xm, c.y0, ym));
            cells.push(Rect::new(xm, c.x1, c.y0, ym));
            cells.push(Rect::new(c.x0, xm, ym, c.y1));
            cells.push(Rect::new(xm, c.x1, ym, c.y1));
        }
        TMesh::new(cells)
    }
}

/// Tensor grid with breakpoints `xs` and `ys`.
pub fn tensor_grid(xs: &[Coord], ys: &[Coord]) -> Vec<Rect> {
    let mut cells = Vec::new();
    for j in 0..ys.len() - 1 {
        for i in 0..xs.len() - 1 {
            cells.push(Rect::new(xs[i], xs[i + 1], ys[j], ys[j + 1]));
        }
    }
    cells
}

/// `nx x ny` uniform grid on `[x0, x1] x [y0, y1]`.
pub fn uniform_grid(nx: usize, ny: usize, x0: Coord, x1: Coord, y0: Coord, y1: Coord) -> Vec<Rect> {
    let xs: Vec<Coord> = (0..=nx).map(|i| x0 + (x1 - x0) * Coord::new(i as i64, nx as i64)).collect();
    let ys: Vec<Coord> = (0..=ny).map(|j| y0 + (y1 - y0) * Coord::new(j as i64, ny as i64)).collect();
    tensor_grid(&xs, &ys)
}

/// A coordinate as written in a mesh document: decimal or `p/q` text, or a JSON number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoordText {
    Int(i64),
    Float(f64),
    Text(String),
}

impl CoordText {
    pub fn parse(&self) -> Result<Coord, MeshError> {
        match self {
            CoordText::Int(i) => Ok(Coord::from_integer(*i)),
            CoordText::Float(f) => parse_coord(&format!("{f}")),
            CoordText::Text(s) => parse_coord(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionPair {
    pub s: SectionSpec,
    pub t: SectionSpec,
}

/// `{"cells": [[a, b, c, d], ...], "sections": {"s": ..., "t": ...}, "smoothness": [r1, r2]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshDocument {
    pub cells: Vec<[CoordText; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sections: Option<SectionPair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothness: Option<[usize; 2]>,
}

impl MeshDocument {
    pub fn from_json(text: &str) -> Result<MeshDocument, MeshError> {
        serde_json::from_str(text).map_err(|e| MeshError::Malformed(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("mesh documents always serialize")
    }

    pub fn rects(&self) -> Result<Vec<Rect>, MeshError> {
        self.cells.iter().map(|[a, b, c, d]| Ok(Rect::new(a.parse()?, b.parse()?, c.parse()?, d.parse()?))).collect()
    }

    pub fn from_mesh(mesh: &TMesh, sections: Option<SectionPair>, smoothness: Option<[usize; 2]>) -> Self {
        let text = |c: Coord| CoordText::Text(format_coord(c));
        MeshDocument {
            cells: mesh.cells.iter().map(|c| [text(c.x0), text(c.x1), text(c.y0), text(c.y1)]).collect(),
            sections,
            smoothness,
        }
    }
}

pub fn load_mesh(doc: &MeshDocument) -> Result<TMesh, MeshError> {
    TMesh::new(doc.rects()?)
}

pub fn load_mesh_json(text: &str) -> Result<(TMesh, MeshDocument), MeshError> {
    let doc = MeshDocument::from_json(text)?;
    Ok((load_mesh(&doc)?, doc))
}

/// Human-readable summary used by `gentess mesh check`.
pub fn describe(mesh: &TMesh) -> String {
    let mut out = String::new();
    let count = |k: VertexKind| mesh.vertices.iter().filter(|v| v.kind == k).count();
    out.push_str(&format!("cells: {}\n", mesh.cells.len()));
    out.push_str(&format!(
        "vertices: {} (crossing {}, boundary {}, T-junction {})\n",
        mesh.vertices.len(),
        count(VertexKind::Crossing),
        count(VertexKind::Boundary),
        count(VertexKind::TJunction)
    ));
    out.push_str(&format!("edge segments: {}\n", mesh.segments.len()));
    out.push_str(&format!("composite edges: {}\n", mesh.composites.len()));
    out.push_str(&format!("regular: {}\n", mesh.is_regular()));
    for &v in &mesh.irregular_vertices {
        let w = &mesh.vertices[v];
        out.push_str(&format!("  irregular at ({}, {})\n", format_coord(w.x), format_coord(w.y)));
    }
    match &mesh.cycle {
        Some(c) => {
            let pts: Vec<String> = c
                .iter()
                .map(|&v| format!("({}, {})", format_coord(mesh.vertices[v].x), format_coord(mesh.vertices[v].y)))
                .collect();
            out.push_str(&format!("cycles: yes [{}]\n", pts.join(" -> ")));
        }
        None => out.push_str("cycles: no\n"),
    }
    if let Ok(st) = mesh.stats() {
        out.push_str(&format!(
            "J_NT: {}\nE_hor: {}\nE_ver: {}\nN: {}\nalpha: {}\nbeta: {}\nkappa: {}\nH: {}\n",
            st.j_nt, st.e_hor, st.e_ver, st.n_cells, st.alpha, st.beta, st.kappa, st.h
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mesh(rects: &[(i64, i64, i64, i64)]) -> TMesh {
        TMesh::new(rects.iter().map(|&(a, b, c, d)| Rect::from_ints(a, b, c, d)).collect()).unwrap()
    }

    #[test]
    fn coordinates_roundtrip() {
        assert_eq!(parse_coord("0.25").unwrap(), Coord::new(1, 4));
        assert_eq!(parse_coord("-1.5").unwrap(), Coord::new(-3, 2));
        assert_eq!(parse_coord("1/3").unwrap(), Coord::new(1, 3));
        assert!(parse_coord("abc").is_err());
        assert_eq!(format_coord(Coord::new(-3, 8)), "-0.375");
        assert_eq!(format_coord(Coord::new(1, 3)), "1/3");
        assert_eq!(format_coord(Coord::from_integer(4)), "4");
        assert_eq!(CoordText::Float(0.1).parse().unwrap(), Coord::new(1, 10));
    }

    #[test]
    fn single_cell() {
        let m = mesh(&[(0, 1, 0, 1)]);
        assert_eq!(m.vertices.len(), 4);
        assert_eq!(m.composites.len(), 4);
        let st = m.stats().unwrap();
        assert_eq!((st.j_nt, st.e_hor, st.e_ver, st.n_cells), (4, 2, 2, 1));
        assert!(m.vertices.iter().all(|v| v.kind == VertexKind::Boundary));
    }

    #[test]
    fn tensor_two_by_two() {
        let m = TMesh::new(uniform_grid(2, 2, 0.into(), 2.into(), 0.into(), 2.into())).unwrap();
        assert_eq!(m.vertices.len(), 9);
        assert_eq!(m.t_junction_count(), 0);
        assert_eq!(m.composites.len(), 12);
        assert!(m.is_regular() && !m.has_cycles());
        let st = m.stats().unwrap();
        assert_eq!((st.j_nt, st.e_hor, st.e_ver, st.n_cells, st.beta), (9, 6, 6, 4, 0));
        let centre = m.vertex_at(1.into(), 1.into()).unwrap();
        assert_eq!(m.vertices[centre].kind, VertexKind::Crossing);
    }

    #[test]
    fn single_t_fuses_segments() {
        let m = mesh(&[(0, 2, 0, 1), (0, 1, 1, 2), (1, 2, 1, 2)]);
        let t = m.vertex_at(1.into(), 1.into()).unwrap();
        assert!(m.vertices[t].is_t_junction());
        let host = m.vertices[t].host.unwrap();
        let e = &m.composites[host];
        assert_eq!(e.segments.len(), 2);
        assert_eq!((e.lo, e.hi), (0.into(), 2.into()));
        assert_eq!(e.sides.len(), 3);
        let total: usize = m.composites.iter().map(|e| e.segments.len()).sum();
        assert_eq!(total, m.segments.len());
        assert!(m.is_regular() && !m.has_cycles());
    }

    #[test]
    fn pinwheel_has_cycle() {
        let m = mesh(&[(0, 2, 0, 1), (2, 3, 0, 2), (1, 3, 2, 3), (0, 1, 1, 3), (1, 2, 1, 2)]);
        assert!(m.has_cycles());
        assert_eq!(m.cycle.as_ref().unwrap().len(), 4);
        assert!(m.stats().is_err());
    }

    #[test]
    fn non_regular_vertex() {
        let m = mesh(&[(0, 1, 0, 1), (1, 2, 1, 2), (0, 3, -1, 0), (2, 3, 0, 2)]);
        assert!(!m.is_regular());
        let w = m.vertex_at(1.into(), 1.into()).unwrap();
        assert!(m.irregular_vertices.contains(&w));
    }

    #[test]
    fn validation_errors() {
        let r = |a, b, c, d| Rect::from_ints(a, b, c, d);
        assert_eq!(TMesh::new(vec![r(0, 2, 0, 1), r(1, 3, 0, 1)]).unwrap_err(), MeshError::Overlap(0, 1));
        assert_eq!(TMesh::new(vec![r(0, 0, 0, 1)]).unwrap_err(), MeshError::ZeroArea(0));
        assert!(matches!(TMesh::new(vec![r(0, 1, 0, 1), r(2, 3, 0, 1)]), Err(MeshError::Disconnected(_))));
    }

    #[test]
    fn document_roundtrip() {
        let text = r#"{"cells": [["0", "0.5", "0", "1"], ["0.5", "1", "0", "1/3"], ["0.5", "1", "1/3", "1"]],
                       "sections": {"s": {"kind": "TwoExponentials", "params": {"lambda1": 1.0, "lambda2": -1.0}, "n": 4},
                                    "t": {"kind": "PolynomialDegenerate", "n": 3}},
                       "smoothness": [1, 0]}"#;
        let (m, doc) = load_mesh_json(text).unwrap();
        assert_eq!(m.t_junction_count(), 1);
        let again = MeshDocument::from_mesh(&m, doc.sections, doc.smoothness);
        assert_eq!(again.rects().unwrap(), doc.rects().unwrap());
        let reparsed = MeshDocument::from_json(&again.to_json()).unwrap();
        assert_eq!(reparsed, again);
    }

    #[test]
    fn refinement_keeps_structure() {
        let m = mesh(&[(0, 2, 0, 1), (0, 1, 1, 2), (1, 2, 1, 2)]);
        let fine = m.refine_uniform().unwrap();
        assert_eq!(fine.cells.len(), 12);
        assert!(fine.is_regular() && !fine.has_cycles());
        assert_eq!(fine.t_junction_count(), 2);
    }
}
