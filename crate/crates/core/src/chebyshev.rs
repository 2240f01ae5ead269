//! Chebyshev series on an interval: adaptive construction from samples,
//! Clenshaw evaluation and exact (spectral) integration.

use std::f64::consts::PI;

/// Smallest and largest number of Chebyshev-Lobatto samples tried by [`ChebSeries::from_fn`].
pub const MIN_POINTS: usize = 16;
pub const MAX_DEGREE: usize = 256;

/// `f(s) = sum_k coeffs[k] T_k(x)`, `x = (2s - a - b) / (b - a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebSeries {
    pub a: f64,
    pub b: f64,
    pub coeffs: Vec<f64>,
}

impl ChebSeries {
    pub fn constant(a: f64, b: f64, c: f64) -> Self {
        ChebSeries { a, b, coeffs: vec![c] }
    }

    /// Interpolates `f` at `N + 1` Lobatto points, doubling `N` until the last
    /// three coefficients fall below `tail_tol * max(1, |f|)`. Returns `None`
    /// when [`MAX_DEGREE`] is not enough.
    pub fn from_fn(a: f64, b: f64, tail_tol: f64, f: impl Fn(f64) -> f64) -> Option<Self> {
        let mut n = MIN_POINTS;
        while n <= MAX_DEGREE {
            let coeffs = lobatto_coefficients(a, b, n, &f);
            let scale = coeffs.iter().fold(1.0f64, |m, c| m.max(c.abs()));
            let tail = coeffs[n - 2..].iter().fold(0.0f64, |m, c| m.max(c.abs()));
            if tail < tail_tol * scale {
                let mut s = ChebSeries { a, b, coeffs };
                s.trim(1e-15 * scale);
                return Some(s);
            }
            n *= 2;
        }
        None
    }

    fn trim(&mut self, tol: f64) {
        while self.coeffs.len() > 1 && self.coeffs.last().is_some_and(|c| c.abs() <= tol) {
            self.coeffs.pop();
        }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    fn to_unit(&self, s: f64) -> f64 {
        (2.0 * s - self.a - self.b) / (self.b - self.a)
    }

    pub fn eval(&self, s: f64) -> f64 {
        let x = self.to_unit(s);
        let (mut b1, mut b2) = (0.0, 0.0);
        for &c in self.coeffs.iter().skip(1).rev() {
            let b0 = c + 2.0 * x * b1 - b2;
            b2 = b1;
            b1 = b0;
        }
        self.coeffs[0] + x * b1 - b2
    }

    /// The antiderivative that vanishes at `a`.
    pub fn integral(&self) -> ChebSeries {
        let c = &self.coeffs;
        let m = c.len();
        let get = |k: usize| if k < m { c[k] } else { 0.0 };
        let half = 0.5 * (self.b - self.a);
        let mut out = vec![0.0; m + 1];
        out[1] = (get(0) - 0.5 * get(2)) * half;
        for k in 2..=m {
            out[k] = (get(k - 1) - get(k + 1)) / (2.0 * k as f64) * half;
        }
        // value at x = -1 must vanish
        let mut at_left = 0.0;
        for (k, v) in out.iter().enumerate().skip(1) {
            at_left += if k % 2 == 0 { *v } else { -*v };
        }
        out[0] = -at_left;
        ChebSeries { a: self.a, b: self.b, coeffs: out }
    }

    pub fn definite_integral(&self) -> f64 {
        // integral of T_k over [-1, 1] is 2 / (1 - k^2) for even k, 0 for odd k
        let half = 0.5 * (self.b - self.a);
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(k, _)| k % 2 == 0)
            .map(|(k, c)| c * 2.0 / (1.0 - (k * k) as f64))
            .sum::<f64>()
            * half
    }

    pub fn scaled(&self, factor: f64) -> ChebSeries {
        ChebSeries { a: self.a, b: self.b, coeffs: self.coeffs.iter().map(|c| c * factor).collect() }
    }

    /// `alpha * self + beta * other`.
    pub fn combine(&self, alpha: f64, other: &ChebSeries, beta: f64) -> ChebSeries {
        let m = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..m)
            .map(|k| {
                alpha * self.coeffs.get(k).copied().unwrap_or(0.0) + beta * other.coeffs.get(k).copied().unwrap_or(0.0)
            })
            .collect();
        ChebSeries { a: self.a, b: self.b, coeffs }
    }
}

fn lobatto_coefficients(a: f64, b: f64, n: usize, f: &impl Fn(f64) -> f64) -> Vec<f64> {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let values: Vec<f64> = (0..=n)
        .map(|m| {
            let x = (PI * m as f64 / n as f64).cos();
            // pin the end samples to the exact endpoints
            let s = if m == 0 {
                b
            } else if m == n {
                a
            } else {
                mid + half * x
            };
            f(s)
        })
        .collect();
    let mut coeffs = vec![0.0; n + 1];
    for (k, ck) in coeffs.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (m, v) in values.iter().enumerate() {
            let w = if m == 0 || m == n { 0.5 } else { 1.0 };
            acc += w * v * (PI * ((k * m) % (2 * n)) as f64 / n as f64).cos();
        }
        *ck = acc * 2.0 / n as f64;
    }
    coeffs[0] *= 0.5;
    coeffs[n] *= 0.5;
    coeffs
}

/// `m` Chebyshev points of the first kind mapped to `[a, b]`, in increasing order.
pub fn chebyshev_points(a: f64, b: f64, m: usize) -> Vec<f64> {
    (0..m)
        .map(|l| {
            let x = -(PI * (2 * l + 1) as f64 / (2 * m) as f64).cos();
            0.5 * (a + b) + 0.5 * (b - a) * x
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_is_resolved_and_integrated() {
        let f = ChebSeries::from_fn(0.0, 2.0, 1e-14, f64::exp).unwrap();
        assert!(f.degree() < 40);
        for s in [0.0, 0.3, 1.7, 2.0] {
            assert!((f.eval(s) - s.exp()).abs() < 1e-13 * s.exp());
        }
        let g = f.integral();
        for s in [0.0, 0.5, 2.0] {
            assert!((g.eval(s) - (s.exp() - 1.0)).abs() < 1e-12);
        }
        assert!((f.definite_integral() - (2f64.exp() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn polynomial_is_exact() {
        let f = ChebSeries::from_fn(-1.0, 3.0, 1e-14, |s| 1.0 + s * s * s).unwrap();
        assert!(f.degree() <= 3);
        let g = f.integral();
        let exact = |s: f64| s + s.powi(4) / 4.0 - (-1.0 + 0.25);
        assert!((g.eval(2.0) - exact(2.0)).abs() < 1e-12);
    }

    #[test]
    fn unresolvable_function_gives_none() {
        assert!(ChebSeries::from_fn(0.0, 1.0, 1e-14, |s| (s - 0.5).abs()).is_none());
    }

    #[test]
    fn combine_and_points() {
        let f = ChebSeries::constant(0.0, 1.0, 2.0);
        let g = ChebSeries::from_fn(0.0, 1.0, 1e-14, |s| s).unwrap();
        let h = f.combine(1.0, &g, -3.0);
        assert!((h.eval(0.5) - 0.5).abs() < 1e-14);
        let p = chebyshev_points(0.0, 1.0, 5);
        assert!(p.windows(2).all(|w| w[0] < w[1]));
        assert!((p[2] - 0.5).abs() < 1e-15);
    }
}
