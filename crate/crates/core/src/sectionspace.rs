//! Univariate section spaces `span<1, s, ..., s^(n-3), u, v>` on an interval,
//! together with the catalogue of generator pairs `(u, v)` and the checks that
//! decide whether a space admits a normalized positive (Bernstein-like) basis.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Highest derivative order the closed-form generator evaluation accepts.
pub const MAX_DERIVATIVE_ORDER: usize = 32;

/// Default relative tolerance for rank and zero decisions.
pub const DEFAULT_REL_TOL: f64 = 1e-9;

const COND2_THETA_SAMPLES: usize = 64;
const SCAN_POINTS: usize = 2048;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SectionError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("derivative order {order} exceeds the supported maximum {max}")]
    OrderOutOfRange { order: usize, max: usize },
    #[error("point {s} lies outside [{a}, {b}]")]
    OutsideInterval { s: f64, a: f64, b: f64 },
}

/// The two non-polynomial functions spanning a section space.
///
/// Serialized as `{"kind": "...", "params": {...}}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params")]
pub enum GeneratorPair {
    /// `u = exp(lambda1 s)`, `v = exp(lambda2 s)`.
    TwoExponentials { lambda1: f64, lambda2: f64 },
    /// `u = exp(lambda s)`, `v = s exp(lambda s)`.
    ExpTimesLinear { lambda: f64 },
    /// `u = exp(alpha s) cos(beta s)`, `v = exp(alpha s) sin(beta s)`.
    ExpTrig { alpha: f64, beta: f64 },
    /// `u = s^m0`, `v = (1 - s)^m1`.
    PowerPair { m0: u32, m1: u32 },
    /// `u = s^(n-2)`, `v = s^(n-1)`: the section space is plain polynomials of degree `n-1`.
    PolynomialDegenerate,
}

/// Selects one of the two generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Which {
    U,
    V,
}

/// How a validity flag was decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Certification {
    Analytic,
    Numeric,
}

fn falling_factorial(m: u32, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, l| acc * (m as f64 - l as f64))
}

impl GeneratorPair {
    /// `cosh`/`sinh` span: `exp(s)`, `exp(-s)`.
    pub const HYPERBOLIC: GeneratorPair = GeneratorPair::TwoExponentials { lambda1: 1.0, lambda2: -1.0 };
    /// `cos`/`sin` span.
    pub const TRIGONOMETRIC: GeneratorPair = GeneratorPair::ExpTrig { alpha: 0.0, beta: 1.0 };

    pub fn validate(&self) -> Result<(), SectionError> {
        let finite = |x: f64, name: &str| {
            if x.is_finite() {
                Ok(())
            } else {
                Err(SectionError::InvalidParameter(format!("{name} must be finite")))
            }
        };
        match *self {
            GeneratorPair::TwoExponentials { lambda1, lambda2 } => {
                finite(lambda1, "lambda1")?;
                finite(lambda2, "lambda2")?;
                if lambda1 == lambda2 {
                    return Err(SectionError::InvalidParameter("TwoExponentials needs lambda1 != lambda2".into()));
                }
            }
            GeneratorPair::ExpTimesLinear { lambda } => finite(lambda, "lambda")?,
            GeneratorPair::ExpTrig { alpha, beta } => {
                finite(alpha, "alpha")?;
                finite(beta, "beta")?;
                if beta == 0.0 {
                    return Err(SectionError::InvalidParameter("ExpTrig needs beta != 0".into()));
                }
            }
            GeneratorPair::PowerPair { m0, m1 } => {
                if m0 == 0 || m1 == 0 {
                    return Err(SectionError::InvalidParameter("PowerPair exponents must be positive".into()));
                }
            }
            GeneratorPair::PolynomialDegenerate => {}
        }
        Ok(())
    }

    /// Closed-form `order`-th derivative of `u` or `v` at `s`. `n` is only used by
    /// [`GeneratorPair::PolynomialDegenerate`], whose generators depend on the order.
    pub fn derivative(&self, which: Which, order: usize, s: f64, n: usize) -> f64 {
        let k = order as i32;
        match *self {
            GeneratorPair::TwoExponentials { lambda1, lambda2 } => {
                let lambda = if which == Which::U { lambda1 } else { lambda2 };
                lambda.powi(k) * (lambda * s).exp()
            }
            GeneratorPair::ExpTimesLinear { lambda } => {
                let e = (lambda * s).exp();
                match which {
                    Which::U => lambda.powi(k) * e,
                    Which::V if order == 0 => s * e,
                    Which::V => (lambda.powi(k) * s + order as f64 * lambda.powi(k - 1)) * e,
                }
            }
            GeneratorPair::ExpTrig { alpha, beta } => {
                let z = Complex64::new(alpha, beta);
                let w = z.powu(order as u32) * (z * s).exp();
                if which == Which::U {
                    w.re
                } else {
                    w.im
                }
            }
            GeneratorPair::PowerPair { m0, m1 } => match which {
                Which::U => monomial_derivative(m0, order, s),
                Which::V => {
                    if order as u32 > m1 {
                        0.0
                    } else {
                        let sign = if order.is_multiple_of(2) { 1.0 } else { -1.0 };
                        sign * falling_factorial(m1, order) * (1.0 - s).powi(m1 as i32 - k)
                    }
                }
            },
            GeneratorPair::PolynomialDegenerate => {
                let m = if which == Which::U { n - 2 } else { n - 1 };
                monomial_derivative(m as u32, order, s)
            }
        }
    }

    /// Whether the pair comes from the linear ODE analysis (closed under
    /// differentiation inside `span<u, v>`).
    pub fn is_ode_family(&self) -> bool {
        matches!(
            self,
            GeneratorPair::TwoExponentials { .. }
                | GeneratorPair::ExpTimesLinear { .. }
                | GeneratorPair::ExpTrig { .. }
        )
    }

    /// A hashable identity for basis caching (exact parameter bits).
    pub fn cache_key(&self) -> (u8, u64, u64) {
        match *self {
            GeneratorPair::TwoExponentials { lambda1, lambda2 } => (0, lambda1.to_bits(), lambda2.to_bits()),
            GeneratorPair::ExpTimesLinear { lambda } => (1, lambda.to_bits(), 0),
            GeneratorPair::ExpTrig { alpha, beta } => (2, alpha.to_bits(), beta.to_bits()),
            GeneratorPair::PowerPair { m0, m1 } => (3, m0 as u64, m1 as u64),
            GeneratorPair::PolynomialDegenerate => (4, 0, 0),
        }
    }
}

fn monomial_derivative(m: u32, order: usize, s: f64) -> f64 {
    if order as u32 > m {
        0.0
    } else {
        falling_factorial(m, order) * s.powi(m as i32 - order as i32)
    }
}

/// Generators plus order, without an interval: `{"kind": ..., "params": ..., "n": 4}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionSpec {
    #[serde(flatten)]
    pub generators: GeneratorPair,
    pub n: usize,
}

impl SectionSpec {
    pub fn new(generators: GeneratorPair, n: usize) -> Self {
        SectionSpec { generators, n }
    }

    pub fn on(&self, a: f64, b: f64) -> Result<SectionSpace, SectionError> {
        make_section_space(self.generators, self.n, a, b)
    }
}

/// `span<1, s, ..., s^(n-3), u, v>` on `[a, b]` with its validity flags.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionSpace {
    pub n: usize,
    pub a: f64,
    pub b: f64,
    pub generators: GeneratorPair,
    /// No nonzero element of `span<u^(n-2), v^(n-2)>` has two distinct zeros in `[a, b]`.
    pub cond2_ok: bool,
    /// The Wronskian of `u^(n-2), v^(n-2)` does not vanish in `(a, b)`.
    pub cond3_ok: bool,
    /// The `n` spanning functions are independent on `[a, b]`.
    pub dim_ok: bool,
    pub cond2_path: Certification,
    pub cond3_path: Certification,
}

/// Builds a section space and computes its validity flags with the default tolerance.
pub fn make_section_space(generators: GeneratorPair, n: usize, a: f64, b: f64) -> Result<SectionSpace, SectionError> {
    make_section_space_with_tol(generators, n, a, b, DEFAULT_REL_TOL)
}

pub fn make_section_space_with_tol(
    generators: GeneratorPair,
    n: usize,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<SectionSpace, SectionError> {
    if n < 3 {
        return Err(SectionError::InvalidParameter(format!("order n = {n} must be at least 3")));
    }
    if n + 1 > MAX_DERIVATIVE_ORDER {
        return Err(SectionError::InvalidParameter(format!("order n = {n} is too large")));
    }
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(SectionError::InvalidParameter(format!("interval [{a}, {b}] is not valid")));
    }
    generators.validate()?;

    let mut space = SectionSpace {
        n,
        a,
        b,
        generators,
        cond2_ok: false,
        cond3_ok: false,
        dim_ok: false,
        cond2_path: Certification::Analytic,
        cond3_path: Certification::Analytic,
    };
    space.dim_ok = reduced_gram_rank(&space, tol) == 2;
    let (c2, p2) = condition2(&space, tol);
    let (c3, p3) = condition3(&space, tol);
    space.cond2_ok = c2 && space.dim_ok;
    space.cond3_ok = c3 && space.dim_ok;
    space.cond2_path = p2;
    space.cond3_path = p3;
    Ok(space)
}

impl SectionSpace {
    pub fn len(&self) -> f64 {
        self.b - self.a
    }

    pub fn is_valid(&self) -> bool {
        self.dim_ok && self.cond2_ok && self.cond3_ok
    }

    /// Same generators and order on a different interval.
    pub fn on_interval(&self, a: f64, b: f64) -> Result<SectionSpace, SectionError> {
        make_section_space(self.generators, self.n, a, b)
    }

    /// Derivative of `u` or `v` without the interval check (used for extrapolated
    /// evaluations such as Taylor data at interior anchors).
    pub fn generator_derivative(&self, which: Which, order: usize, s: f64) -> f64 {
        self.generators.derivative(which, order, s, self.n)
    }

    /// The `p`-th member of the spanning list `1, s, ..., s^(n-3), u, v`.
    pub fn spanning_function(&self, p: usize, order: usize, s: f64) -> f64 {
        let n = self.n;
        if p < n - 2 {
            monomial_derivative(p as u32, order, s)
        } else if p == n - 2 {
            self.generator_derivative(Which::U, order, s)
        } else {
            self.generator_derivative(Which::V, order, s)
        }
    }
}

/// Exact derivative of a generator at a point of the interval.
pub fn eval_generator(space: &SectionSpace, which: Which, order: usize, s: f64) -> Result<f64, SectionError> {
    if order > MAX_DERIVATIVE_ORDER {
        return Err(SectionError::OrderOutOfRange { order, max: MAX_DERIVATIVE_ORDER });
    }
    let slack = 1e-12 * space.len().max(1.0);
    if !(s >= space.a - slack && s <= space.b + slack) {
        return Err(SectionError::OutsideInterval { s, a: space.a, b: space.b });
    }
    Ok(space.generator_derivative(which, order, s))
}

pub fn check_condition2(space: &SectionSpace) -> bool {
    space.cond2_ok
}

pub fn check_condition3(space: &SectionSpace) -> bool {
    space.cond3_ok
}

fn grid(a: f64, b: f64, m: usize) -> impl Iterator<Item = f64> {
    (0..m).map(move |l| a + (b - a) * l as f64 / (m - 1) as f64)
}

/// Rank of the 2x2 Gram matrix of `u^(n-2), v^(n-2)` on a `4n`-point grid.
///
/// The list `1, ..., s^(n-3), u, v` is independent exactly when these two
/// functions are, since `D^(n-2)` annihilates the polynomial part.
fn reduced_gram_rank(space: &SectionSpace, tol: f64) -> usize {
    let m = 4 * space.n;
    let k = space.n - 2;
    let cols: Vec<[f64; 2]> = grid(space.a, space.b, m)
        .map(|s| [space.generator_derivative(Which::U, k, s), space.generator_derivative(Which::V, k, s)])
        .collect();
    gram_rank_2(&cols, tol)
}

fn gram_rank_2(samples: &[[f64; 2]], tol: f64) -> usize {
    let nu = samples.iter().map(|c| c[0] * c[0]).sum::<f64>().sqrt();
    let nv = samples.iter().map(|c| c[1] * c[1]).sum::<f64>().sqrt();
    let nonzero = [nu, nv].iter().filter(|x| **x > 0.0 && x.is_finite()).count();
    if nonzero < 2 {
        return nonzero;
    }
    let g00 = 1.0;
    let g11 = 1.0;
    let g01 = samples.iter().map(|c| c[0] * c[1]).sum::<f64>() / (nu * nv);
    let tr = g00 + g11;
    let det = (g00 * g11 - g01 * g01).max(0.0);
    let disc = ((tr * tr / 4.0) - det).max(0.0).sqrt();
    let lmax = tr / 2.0 + disc;
    let lmin = det / lmax;
    if lmin > tol * lmax {
        2
    } else {
        1
    }
}

/// Numeric rank of the Gram matrix of the full spanning list on a `4n`-point grid.
/// Powers are taken in the centred, scaled variable, which spans the same space.
pub fn full_gram_rank(space: &SectionSpace, tol: f64) -> usize {
    let n = space.n;
    let m = 4 * n;
    let mid = 0.5 * (space.a + space.b);
    let half = 0.5 * space.len();
    let mut mat = nalgebra::DMatrix::<f64>::zeros(m, n);
    for (row, s) in grid(space.a, space.b, m).enumerate() {
        let x = (s - mid) / half;
        for p in 0..n - 2 {
            mat[(row, p)] = x.powi(p as i32);
        }
        mat[(row, n - 2)] = space.generator_derivative(Which::U, 0, s);
        mat[(row, n - 1)] = space.generator_derivative(Which::V, 0, s);
    }
    for mut col in mat.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
    }
    let gram = mat.transpose() * &mat;
    let eig = gram.symmetric_eigenvalues();
    let lmax = eig.iter().cloned().fold(0.0, f64::max);
    eig.iter().filter(|l| **l > tol * lmax).count()
}

fn condition2(space: &SectionSpace, tol: f64) -> (bool, Certification) {
    match space.generators {
        GeneratorPair::TwoExponentials { .. }
        | GeneratorPair::ExpTimesLinear { .. }
        | GeneratorPair::PolynomialDegenerate => (true, Certification::Analytic),
        GeneratorPair::ExpTrig { beta, .. } => {
            (beta.abs() * space.len() < std::f64::consts::PI, Certification::Analytic)
        }
        GeneratorPair::PowerPair { .. } => (condition2_numeric(space, tol), Certification::Numeric),
    }
}

fn condition3(space: &SectionSpace, tol: f64) -> (bool, Certification) {
    if space.generators.is_ode_family() || space.generators == GeneratorPair::PolynomialDegenerate {
        (true, Certification::Analytic)
    } else {
        (condition3_numeric(space, tol), Certification::Numeric)
    }
}

/// Counts distinct zeros of a sampled function; runs of near-zero samples count once.
fn count_zeros(values: &[f64], tol: f64) -> usize {
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return usize::MAX;
    }
    let mut count = 0;
    let mut prev: Option<f64> = None;
    let mut in_zero = false;
    for &v in values {
        if v.abs() <= tol * scale {
            if !in_zero {
                count += 1;
                in_zero = true;
            }
            continue;
        }
        let sign = v.signum();
        if in_zero {
            in_zero = false;
        } else if let Some(p) = prev {
            if p != sign {
                count += 1;
            }
        }
        prev = Some(sign);
    }
    count
}

/// Grid scan of `cos(theta) u^(n-2) + sin(theta) v^(n-2)` for two distinct zeros.
pub fn condition2_numeric(space: &SectionSpace, tol: f64) -> bool {
    let k = space.n - 2;
    let samples: Vec<(f64, f64)> = grid(space.a, space.b, SCAN_POINTS)
        .map(|s| (space.generator_derivative(Which::U, k, s), space.generator_derivative(Which::V, k, s)))
        .collect();
    (0..COND2_THETA_SAMPLES).all(|l| {
        let theta = std::f64::consts::PI * l as f64 / COND2_THETA_SAMPLES as f64;
        let (c, s) = (theta.cos(), theta.sin());
        let psi: Vec<f64> = samples.iter().map(|(u, v)| c * u + s * v).collect();
        count_zeros(&psi, tol) < 2
    })
}

/// Grid scan of the Wronskian of `u^(n-2), v^(n-2)` on the open interval.
pub fn condition3_numeric(space: &SectionSpace, tol: f64) -> bool {
    let k = space.n - 2;
    let h = space.len() / (SCAN_POINTS + 1) as f64;
    let mut scale = 0.0f64;
    let mut w = Vec::with_capacity(SCAN_POINTS);
    for l in 1..=SCAN_POINTS {
        let s = space.a + h * l as f64;
        let u0 = space.generator_derivative(Which::U, k, s);
        let u1 = space.generator_derivative(Which::U, k + 1, s);
        let v0 = space.generator_derivative(Which::V, k, s);
        let v1 = space.generator_derivative(Which::V, k + 1, s);
        scale = scale.max((u0.abs() + u1.abs()) * (v0.abs() + v1.abs()));
        w.push(u0 * v1 - u1 * v0);
    }
    if scale == 0.0 {
        return false;
    }
    let first = w[0].signum();
    w.iter().all(|x| x.abs() > tol * scale && x.signum() == first)
}

/// The 2x2 matrix `[[u^(n-2), v^(n-2)], [u^(n-1), v^(n-1)]]` at `s`.
pub fn wronskian_block(space: &SectionSpace, s: f64) -> [[f64; 2]; 2] {
    let k = space.n - 2;
    [
        [space.generator_derivative(Which::U, k, s), space.generator_derivative(Which::V, k, s)],
        [space.generator_derivative(Which::U, k + 1, s), space.generator_derivative(Which::V, k + 1, s)],
    ]
}
