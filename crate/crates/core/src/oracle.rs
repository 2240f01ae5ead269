//! Brute-force dimension check: sample the C^r matching conditions across every
//! shared cell boundary and count the null space of the resulting matrix.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::bernstein::{cached_basis, BernsteinBasis};
use crate::chebyshev::chebyshev_points;
use crate::gspace::GSpaceError;
use crate::sectionspace::SectionSpec;
use crate::tmesh::{to_f64, Rect, TMesh};
use std::sync::Arc;

/// Relative singular-value threshold below which a direction counts as null.
pub const RANK_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error(transparent)]
    Space(#[from] GSpaceError),
    #[error("rank is ambiguous: singular value {sigma:e} lies within a factor 10 of the threshold {threshold:e}")]
    RankAmbiguous { sigma: f64, threshold: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct OracleConfig {
    /// Multiplier on the `n1 + n2 + 2` samples per shared boundary piece.
    pub sample_factor: usize,
    /// Along-edge derivative orders added as (redundant) rows at the ends of each
    /// shared piece; `None` adds no vertex rows.
    pub vertex_orders: Option<usize>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { sample_factor: 1, vertex_orders: None }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub variables: usize,
    pub rows: usize,
    pub rank: usize,
    pub nullity: usize,
    pub sigma_max: f64,
    /// Smallest singular value counted in the rank, relative to `sigma_max`.
    pub smallest_kept: f64,
    /// Largest singular value treated as zero, relative to `sigma_max`.
    pub largest_dropped: f64,
    pub ambiguous: bool,
}

/// A piece of boundary shared by two cells.
struct Shared {
    a: usize,
    b: usize,
    /// true when the piece is vertical (`s = line`).
    vertical: bool,
    line: f64,
    lo: f64,
    hi: f64,
}

fn shared_pieces(cells: &[Rect]) -> Vec<Shared> {
    let mut out = Vec::new();
    for a in 0..cells.len() {
        for b in a + 1..cells.len() {
            let (p, q) = (&cells[a], &cells[b]);
            if p.x1 == q.x0 || p.x0 == q.x1 {
                let lo = p.y0.max(q.y0);
                let hi = p.y1.min(q.y1);
                if hi > lo {
                    let line = if p.x1 == q.x0 { p.x1 } else { p.x0 };
                    out.push(Shared { a, b, vertical: true, line: to_f64(line), lo: to_f64(lo), hi: to_f64(hi) });
                }
            }
            if p.y1 == q.y0 || p.y0 == q.y1 {
                let lo = p.x0.max(q.x0);
                let hi = p.x1.min(q.x1);
                if hi > lo {
                    let line = if p.y1 == q.y0 { p.y1 } else { p.y0 };
                    out.push(Shared { a, b, vertical: false, line: to_f64(line), lo: to_f64(lo), hi: to_f64(hi) });
                }
            }
        }
    }
    out
}

/// Assembles the sampled constraint matrix (rows normalized to unit length).
pub fn constraint_matrix(
    mesh: &TMesh,
    sections: [SectionSpec; 2],
    r: [usize; 2],
    config: OracleConfig,
) -> Result<DMatrix<f64>, GSpaceError> {
    let n = [sections[0].n, sections[1].n];
    let per = n[0] * n[1];
    let mut bases: Vec<[Arc<BernsteinBasis>; 2]> = Vec::with_capacity(mesh.cells.len());
    for (id, c) in mesh.cells.iter().enumerate() {
        let [a, b, cc, d] = c.bounds();
        let err = |dir: &str| {
            let place = format!("cell {id} ({dir})");
            move |source| GSpaceError::Basis { place, source }
        };
        bases.push([
            cached_basis(&sections[0].on(a, b)?).map_err(err("s"))?,
            cached_basis(&sections[1].on(cc, d)?).map_err(err("t"))?,
        ]);
    }
    let samples = (n[0] + n[1] + 2) * config.sample_factor.max(1);
    let pieces = shared_pieces(&mesh.cells);
    let vars = mesh.cells.len() * per;

    let rows: Vec<Vec<(usize, f64)>> = pieces
        .par_iter()
        .flat_map_iter(|p| {
            let across = if p.vertical { 0 } else { 1 };
            let mut pts: Vec<(f64, usize)> =
                chebyshev_points(p.lo, p.hi, samples).into_iter().map(|x| (x, 0)).collect();
            if let Some(k) = config.vertex_orders {
                for order in 0..=k {
                    pts.push((p.lo, order));
                    pts.push((p.hi, order));
                }
            }
            let mut out = Vec::new();
            for h in 0..=r[across] {
                for &(x, along_order) in &pts {
                    let (s, t, ds, dt) =
                        if p.vertical { (p.line, x, h, along_order) } else { (x, p.line, along_order, h) };
                    let mut row = Vec::with_capacity(2 * per);
                    for (cell, sign) in [(p.a, 1.0), (p.b, -1.0)] {
                        let bs = bases[cell][0].eval_all(ds, s);
                        let bt = bases[cell][1].eval_all(dt, t);
                        for i in 0..n[0] {
                            for j in 0..n[1] {
                                row.push((cell * per + i * n[1] + j, sign * bs[i] * bt[j]));
                            }
                        }
                    }
                    let norm = row.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
                    if norm > 0.0 {
                        out.push(row.into_iter().map(|(k, v)| (k, v / norm)).collect());
                    }
                }
            }
            out.into_iter()
        })
        .collect();

    let mut m = DMatrix::<f64>::zeros(rows.len(), vars);
    for (ri, row) in rows.iter().enumerate() {
        for &(k, v) in row {
            m[(ri, k)] += v;
        }
    }
    Ok(m)
}

/// Singular values of `m`, via a QR factorization when `m` is tall.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let sv = if m.nrows() > m.ncols() { m.clone().qr().r().singular_values() } else { m.singular_values() };
    let mut v: Vec<f64> = sv.iter().copied().collect();
    v.sort_by(|a, b| b.partial_cmp(a).unwrap());
    v
}

pub fn analyze(
    mesh: &TMesh,
    sections: [SectionSpec; 2],
    r: [usize; 2],
    config: OracleConfig,
) -> Result<OracleReport, GSpaceError> {
    let m = constraint_matrix(mesh, sections, r, config)?;
    let vars = m.ncols();
    let sv = singular_values(&m);
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    let threshold = RANK_TOL * sigma_max;
    let rank = sv.iter().filter(|s| **s > threshold).count();
    let smallest_kept = sv.get(rank.wrapping_sub(1)).map_or(0.0, |s| s / sigma_max.max(f64::MIN_POSITIVE));
    let largest_dropped = sv.get(rank).map_or(0.0, |s| s / sigma_max.max(f64::MIN_POSITIVE));
    let ambiguous = sv.iter().any(|s| *s > threshold / 10.0 && *s < threshold * 10.0);
    Ok(OracleReport {
        variables: vars,
        rows: m.nrows(),
        rank,
        nullity: vars - rank,
        sigma_max,
        smallest_kept,
        largest_dropped,
        ambiguous,
    })
}

/// Numerical dimension of the spline space, independent of the determining set.
pub fn brute_force_dimension(mesh: &TMesh, sections: [SectionSpec; 2], r: [usize; 2]) -> Result<usize, OracleError> {
    let report = analyze(mesh, sections, r, OracleConfig::default())?;
    if report.ambiguous {
        let sigma = if report.smallest_kept < RANK_TOL * 10.0 { report.smallest_kept } else { report.largest_dropped };
        return Err(OracleError::RankAmbiguous {
            sigma: sigma * report.sigma_max,
            threshold: RANK_TOL * report.sigma_max,
        });
    }
    Ok(report.nullity)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sectionspace::GeneratorPair;
    use crate::tmesh::uniform_grid;

    #[test]
    fn single_cell_has_no_constraints() {
        let mesh = TMesh::new(vec![Rect::from_ints(0, 1, 0, 1)]).unwrap();
        let spec = SectionSpec::new(GeneratorPair::HYPERBOLIC, 4);
        assert_eq!(brute_force_dimension(&mesh, [spec; 2], [1, 1]).unwrap(), 16);
    }

    #[test]
    fn tensor_grid_matches_tensor_spline_dimension() {
        let mesh = TMesh::new(uniform_grid(2, 2, 0.into(), 2.into(), 0.into(), 2.into())).unwrap();
        let spec = SectionSpec::new(GeneratorPair::HYPERBOLIC, 4);
        assert_eq!(brute_force_dimension(&mesh, [spec; 2], [1, 1]).unwrap(), 36);
        let rep = analyze(&mesh, [spec; 2], [1, 1], OracleConfig { sample_factor: 2, vertex_orders: Some(2) }).unwrap();
        assert_eq!(rep.nullity, 36);
    }
}
