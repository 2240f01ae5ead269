//! Normalized positive (Bernstein-like) basis of a section space, built by the
//! integral recurrence starting from two functions in `span<u^(n-2), v^(n-2)>`.
//!
//! Levels `k >= 2` are Chebyshev series obtained from the level below by exact
//! spectral integration; level 1 is evaluated in closed form. Derivatives use
//! `D U_{i,k} = U_{i-1,k-1}/d_{i-1,k-1} - U_{i,k-1}/d_{i,k-1}` and never
//! differentiate a series.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;
use thiserror::Error;

use crate::chebyshev::{chebyshev_points, ChebSeries};
use crate::sectionspace::{SectionSpace, Which, MAX_DERIVATIVE_ORDER};

/// Number of interior sample points used for the positivity and partition checks.
pub const CHECK_POINTS: usize = 257;
const PROXY_TAIL: f64 = 1e-13;
const POSITIVITY_FLOOR: f64 = -1e-12;
const NONZERO_REL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BasisError {
    #[error("section space on [{a}, {b}] does not satisfy the basis preconditions ({reason})")]
    InvalidSpace { a: f64, b: f64, reason: String },
    #[error("boundary system for the base pair is singular on [{a}, {b}]")]
    SingularBaseSystem { a: f64, b: f64 },
    #[error("U_{{{i},{k}}} is not positive near s = {s} (value {value:e})")]
    NotPositive { i: usize, k: usize, s: f64, value: f64 },
    #[error("integral weight d_{{{i},{k}}} = {value:e} is not positive")]
    NonPositiveWeight { i: usize, k: usize, value: f64 },
    #[error("U_{{{i},{k}}} could not be resolved by a Chebyshev series of degree <= 256")]
    ProxyAccuracy { i: usize, k: usize },
    #[error("derivative {order} of B_{i} vanishes at the {end} endpoint")]
    VanishingEndpointDerivative { i: usize, order: usize, end: &'static str },
    #[error("basis index {i} out of range for n = {n}")]
    IndexOutOfRange { i: usize, n: usize },
    #[error("point {s} outside [{a}, {b}]")]
    OutsideInterval { s: f64, a: f64, b: f64 },
    #[error("derivative order {order} exceeds the maximum {max}")]
    OrderOutOfRange { order: usize, max: usize },
    #[error("endpoint data has {got} values, expected {expected}")]
    EndpointDataLength { got: usize, expected: usize },
}

/// Interval end selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum End {
    Left,
    Right,
}

#[derive(Debug, Clone)]
pub struct BernsteinBasis {
    space: SectionSpace,
    /// `base[i] = (alpha, beta)` with `U_{i,1} = alpha u^(n-2) + beta v^(n-2)`.
    base: [[f64; 2]; 2],
    /// `levels[k][i] = U_{i,k}` for `k >= 2`; `levels[0]`, `levels[1]` hold level-1 proxies.
    levels: Vec<Vec<ChebSeries>>,
    /// `weights[k][i] = d_{i,k}` for `1 <= k <= n-2`.
    weights: Vec<Vec<f64>>,
    /// `descend[j]` maps level `n-1-j` values to `j`-th derivatives of the basis.
    descend: Vec<DMatrix<f64>>,
    /// `endpoint[e][(h, i)] = B_i^(h)` at the left (`e = 0`) or right end, `h < n`.
    endpoint: [DMatrix<f64>; 2],
}

impl BernsteinBasis {
    pub fn n(&self) -> usize {
        self.space.n
    }

    pub fn a(&self) -> f64 {
        self.space.a
    }

    pub fn b(&self) -> f64 {
        self.space.b
    }

    pub fn space(&self) -> &SectionSpace {
        &self.space
    }

    /// Integral weight `d_{i,k}` (`1 <= k <= n-2`).
    pub fn weight(&self, k: usize, i: usize) -> f64 {
        self.weights[k][i]
    }

    /// The Chebyshev series of `U_{i,k}` (level 1 returns its proxy).
    pub fn level_series(&self, k: usize, i: usize) -> &ChebSeries {
        &self.levels[k][i]
    }

    /// Exact value of `D^m U_{i,1}` from the generators.
    fn level1_derivative(&self, i: usize, m: usize, s: f64) -> f64 {
        let k = self.space.n - 2 + m;
        let [alpha, beta] = self.base[i];
        alpha * self.space.generator_derivative(Which::U, k, s) + beta * self.space.generator_derivative(Which::V, k, s)
    }

    /// Value of `U_{i,k}` at `s`.
    pub fn level_value(&self, k: usize, i: usize, s: f64) -> f64 {
        if k == 1 {
            self.level1_derivative(i, 0, s)
        } else {
            self.levels[k][i].eval(s)
        }
    }

    /// All `B_i^(order)(s)`, `i = 0..n`. `s` is clamped to the interval.
    pub fn eval_all(&self, order: usize, s: f64) -> Vec<f64> {
        let n = self.space.n;
        let s = s.clamp(self.a(), self.b());
        let (j, lower): (usize, Vec<f64>) = if order <= n - 2 {
            let k = n - 1 - order;
            (order, (0..=k).map(|i| self.level_value(k, i, s)).collect())
        } else {
            let m = order - (n - 2);
            (n - 2, (0..2).map(|i| self.level1_derivative(i, m, s)).collect())
        };
        let p = &self.descend[j];
        (0..n).map(|i| (0..p.ncols()).map(|l| p[(i, l)] * lower[l]).sum()).collect()
    }

    pub fn max_order(&self) -> usize {
        MAX_DERIVATIVE_ORDER - (self.space.n - 2)
    }

    fn check_point(&self, s: f64) -> Result<f64, BasisError> {
        let slack = 1e-12 * (self.b() - self.a()).max(1.0);
        if s >= self.a() - slack && s <= self.b() + slack {
            Ok(s.clamp(self.a(), self.b()))
        } else {
            Err(BasisError::OutsideInterval { s, a: self.a(), b: self.b() })
        }
    }

    pub fn eval(&self, i: usize, s: f64) -> Result<f64, BasisError> {
        self.eval_derivative(i, 0, s)
    }

    pub fn eval_derivative(&self, i: usize, order: usize, s: f64) -> Result<f64, BasisError> {
        let n = self.space.n;
        if i >= n {
            return Err(BasisError::IndexOutOfRange { i, n });
        }
        if order > self.max_order() {
            return Err(BasisError::OrderOutOfRange { order, max: self.max_order() });
        }
        let s = self.check_point(s)?;
        Ok(self.eval_all(order, s)[i])
    }

    /// `B_i^(h)` at an endpoint, `h < n`.
    pub fn endpoint_derivative(&self, end: End, h: usize, i: usize) -> f64 {
        self.endpoint[end as usize][(h, i)]
    }

    /// Lower-triangular matrix `L[(h, m)] = D^h B_{idx(m)}` at `end`, `h, m <= r`,
    /// where `idx(m) = m` on the left and `n-1-m` on the right.
    pub fn corner_matrix(&self, end: End, r: usize) -> DMatrix<f64> {
        let n = self.space.n;
        DMatrix::from_fn(r + 1, r + 1, |h, m| {
            if m > h {
                0.0
            } else {
                self.endpoint_derivative(end, h, corner_index(n, end, m))
            }
        })
    }

    /// B-coefficients of the element with the given derivatives
    /// `left[h] = f^(h)(a)` and `right[h] = f^(h)(b)`, where
    /// `left.len() + right.len() = n` and both are nonempty.
    pub fn from_endpoint_derivatives(&self, left: &[f64], right: &[f64]) -> Result<Vec<f64>, BasisError> {
        let n = self.space.n;
        if left.len() + right.len() != n || left.is_empty() || right.is_empty() {
            return Err(BasisError::EndpointDataLength { got: left.len() + right.len(), expected: n });
        }
        let mut c = vec![0.0; n];
        for h in 0..left.len() {
            let mut acc = left[h];
            for i in 0..h {
                acc -= c[i] * self.endpoint_derivative(End::Left, h, i);
            }
            c[h] = acc / self.endpoint_derivative(End::Left, h, h);
        }
        for h in 0..right.len() {
            let mut acc = right[h];
            for m in 0..h {
                acc -= c[n - 1 - m] * self.endpoint_derivative(End::Right, h, n - 1 - m);
            }
            c[n - 1 - h] = acc / self.endpoint_derivative(End::Right, h, n - 1 - h);
        }
        Ok(c)
    }

    /// `sum_i coeffs[i] B_i^(order)(s)`.
    pub fn combine(&self, coeffs: &[f64], order: usize, s: f64) -> f64 {
        self.eval_all(order, s).iter().zip(coeffs).map(|(b, c)| b * c).sum()
    }
}

/// Coefficient index of the `m`-th basis function counted from `end`.
pub fn corner_index(n: usize, end: End, m: usize) -> usize {
    match end {
        End::Left => m,
        End::Right => n - 1 - m,
    }
}

/// Solves the boundary system for `U_{0,1}` and `U_{1,1}`; returns their
/// coefficients in terms of `(u^(n-2), v^(n-2))`.
pub fn base_pair(space: &SectionSpace) -> Result<[[f64; 2]; 2], BasisError> {
    if !(space.cond2_ok && space.dim_ok) {
        return Err(BasisError::InvalidSpace {
            a: space.a,
            b: space.b,
            reason: if space.dim_ok {
                "no element of span<u^(n-2), v^(n-2)> may have two zeros".into()
            } else {
                "spanning functions are dependent".into()
            },
        });
    }
    let k = space.n - 2;
    let ua = space.generator_derivative(Which::U, k, space.a);
    let va = space.generator_derivative(Which::V, k, space.a);
    let ub = space.generator_derivative(Which::U, k, space.b);
    let vb = space.generator_derivative(Which::V, k, space.b);
    let det = ua * vb - va * ub;
    let scale = (ua.abs() + va.abs()) * (ub.abs() + vb.abs());
    if !(det.abs() > 1e-12 * scale) {
        return Err(BasisError::SingularBaseSystem { a: space.a, b: space.b });
    }
    // rows: value at a, value at b
    Ok([[vb / det, -ub / det], [-va / det, ua / det]])
}

/// Builds all recurrence levels and verifies positivity, normalization and the
/// endpoint patterns the smoothness systems rely on.
pub fn build_basis(space: &SectionSpace) -> Result<BernsteinBasis, BasisError> {
    let n = space.n;
    let (a, b) = (space.a, space.b);
    let base = base_pair(space)?;

    let mut levels: Vec<Vec<ChebSeries>> = vec![Vec::new(); n];
    let mut level1 = Vec::with_capacity(2);
    for (i, [alpha, beta]) in base.iter().enumerate() {
        let f = |s: f64| {
            alpha * space.generator_derivative(Which::U, n - 2, s)
                + beta * space.generator_derivative(Which::V, n - 2, s)
        };
        level1.push(ChebSeries::from_fn(a, b, PROXY_TAIL, f).ok_or(BasisError::ProxyAccuracy { i, k: 1 })?);
    }
    levels[1] = level1;

    let mut weights: Vec<Vec<f64>> = vec![Vec::new(); n];
    for k in 2..n {
        let prev = &levels[k - 1];
        let mut d = Vec::with_capacity(k);
        let mut v = Vec::with_capacity(k);
        for (i, f) in prev.iter().enumerate() {
            let di = f.definite_integral();
            if !(di > 0.0) {
                return Err(BasisError::NonPositiveWeight { i, k: k - 1, value: di });
            }
            d.push(di);
            v.push(f.integral().scaled(1.0 / di));
        }
        let one = ChebSeries::constant(a, b, 1.0);
        let mut cur = Vec::with_capacity(k + 1);
        cur.push(one.combine(1.0, &v[0], -1.0));
        for i in 1..k {
            cur.push(v[i - 1].combine(1.0, &v[i], -1.0));
        }
        cur.push(v[k - 1].clone());
        weights[k - 1] = d;
        levels[k] = cur;
    }

    // D^j of level n-1 in terms of level n-1-j
    let mut descend = vec![DMatrix::<f64>::identity(n, n)];
    for j in 1..=n - 2 {
        let k = n - j; // level whose derivative is expressed by level k-1
        let mut w = DMatrix::<f64>::zeros(k + 1, k);
        for i in 0..=k {
            if i >= 1 {
                w[(i, i - 1)] = 1.0 / weights[k - 1][i - 1];
            }
            if i < k {
                w[(i, i)] = -1.0 / weights[k - 1][i];
            }
        }
        let next = &descend[j - 1] * w;
        descend.push(next);
    }

    let mut basis = BernsteinBasis {
        space: *space,
        base,
        levels,
        weights,
        descend,
        endpoint: [DMatrix::zeros(n, n), DMatrix::zeros(n, n)],
    };
    for (e, s) in [(0, a), (1, b)] {
        for h in 0..n {
            let row = basis.eval_all(h, s);
            for i in 0..n {
                basis.endpoint[e][(h, i)] = row[i];
            }
        }
    }
    verify(&basis)?;
    Ok(basis)
}

fn verify(basis: &BernsteinBasis) -> Result<(), BasisError> {
    let n = basis.n();
    let pts = chebyshev_points(basis.a(), basis.b(), CHECK_POINTS);
    for k in 1..n {
        for i in 0..=k {
            for &s in &pts {
                let value = basis.level_value(k, i, s);
                if !(value > POSITIVITY_FLOOR) {
                    return Err(BasisError::NotPositive { i, k, s, value });
                }
            }
        }
    }
    for h in 0..n - 1 {
        let scale_a = (0..n).fold(0.0f64, |m, i| m.max(basis.endpoint[0][(h, i)].abs()));
        let scale_b = (0..n).fold(0.0f64, |m, i| m.max(basis.endpoint[1][(h, i)].abs()));
        if !(basis.endpoint[0][(h, h)].abs() > NONZERO_REL * scale_a) {
            return Err(BasisError::VanishingEndpointDerivative { i: h, order: h, end: "left" });
        }
        let i = n - 1 - h;
        if !(basis.endpoint[1][(h, i)].abs() > NONZERO_REL * scale_b) {
            return Err(BasisError::VanishingEndpointDerivative { i, order: h, end: "right" });
        }
    }
    Ok(())
}

type CacheKey = ((u8, u64, u64), usize, u64, u64);

fn cache() -> &'static Mutex<HashMap<CacheKey, Arc<BernsteinBasis>>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, Arc<BernsteinBasis>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Shared basis for `(generators, n, a, b)`; built on first use.
pub fn cached_basis(space: &SectionSpace) -> Result<Arc<BernsteinBasis>, BasisError> {
    let key = (space.generators.cache_key(), space.n, space.a.to_bits(), space.b.to_bits());
    if let Some(found) = cache().lock().unwrap().get(&key) {
        return Ok(found.clone());
    }
    let built = Arc::new(build_basis(space)?);
    cache().lock().unwrap().entry(key).or_insert_with(|| built.clone());
    Ok(built)
}
