//! Fixed-size 2-D helpers. Every mixture in this crate lives in the
//! (input, output) plane, so the covariance algebra is written out by hand.

use std::f64::consts::PI;

/// A data point in the joint (input, output) space.
pub type Point = [f64; 2];

/// Symmetric 2×2 matrix stored as its three free entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub const IDENTITY: Sym2 = Sym2 { xx: 1.0, xy: 0.0, yy: 1.0 };

    pub const fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Sym2 { xx, xy, yy }
    }

    /// Entry `(row, col)`.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        match (row, col) {
            (0, 0) => self.xx,
            (1, 1) => self.yy,
            _ => self.xy,
        }
    }

    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    pub fn is_finite(&self) -> bool {
        self.xx.is_finite() && self.xy.is_finite() && self.yy.is_finite()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * (self.xx + self.yy);
        let half_diff = 0.5 * (self.xx - self.yy);
        let radius = half_diff.hypot(self.xy);
        (mean - radius, mean + radius)
    }

    pub fn is_positive_definite(&self) -> bool {
        self.is_finite() && self.xx > 0.0 && self.det() > 0.0
    }

    /// Raises every eigenvalue below `floor` to `floor`, keeping eigenvectors.
    pub fn floor_eigenvalues(&self, floor: f64) -> Sym2 {
        let (lo, hi) = self.eigenvalues();
        if lo >= floor {
            return *self;
        }
        let hi_f = hi.max(floor);
        let lo_f = floor;
        // Unit eigenvector of the larger eigenvalue.
        let (vx, vy) = if self.xy.abs() > 0.0 {
            let (x, y) = (self.xy, hi - self.xx);
            let n = x.hypot(y);
            (x / n, y / n)
        } else if self.xx >= self.yy {
            (1.0, 0.0)
        } else {
            (0.0, 1.0)
        };
        // hi_f·v vᵀ + lo_f·(I − v vᵀ)
        Sym2 {
            xx: lo_f + (hi_f - lo_f) * vx * vx,
            xy: (hi_f - lo_f) * vx * vy,
            yy: lo_f + (hi_f - lo_f) * vy * vy,
        }
    }

    pub fn inverse(&self) -> Option<Sym2> {
        let det = self.det();
        if !(det.is_finite() && det > 0.0) {
            return None;
        }
        Some(Sym2 { xx: self.yy / det, xy: -self.xy / det, yy: self.xx / det })
    }

    /// Quadratic form `dᵀ M d`.
    pub fn quad(&self, d: Point) -> f64 {
        self.xx * d[0] * d[0] + 2.0 * self.xy * d[0] * d[1] + self.yy * d[1] * d[1]
    }

    pub fn row_major(&self) -> [f64; 4] {
        [self.xx, self.xy, self.xy, self.yy]
    }
}

/// Log of the bivariate normal density. Returns `None` when `sigma` is not
/// positive definite.
pub fn log_normal_pdf(x: Point, mu: Point, sigma: &Sym2) -> Option<f64> {
    let det = sigma.det();
    let inv = sigma.inverse()?;
    let d = [x[0] - mu[0], x[1] - mu[1]];
    Some(-(2.0 * PI).ln() - 0.5 * det.ln() - 0.5 * inv.quad(d))
}

/// Log of the univariate normal density with variance `var`.
pub fn log_normal_pdf_1d(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * ((2.0 * PI).ln() + var.ln() + d * d / var)
}

/// `ln Σ exp(v_i)` without overflow. Empty input gives `-inf`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_floor_restores_definiteness() {
        let singular = Sym2::new(1.0, 2.0, 4.0);
        assert!(singular.det().abs() < 1e-12);
        let fixed = singular.floor_eigenvalues(1e-9);
        let (lo, hi) = fixed.eigenvalues();
        assert!((lo - 1e-9).abs() < 1e-12);
        assert!((hi - 5.0).abs() < 1e-9);
        assert!(fixed.is_positive_definite());
    }

    #[test]
    fn eigen_floor_leaves_healthy_matrix_alone() {
        let m = Sym2::new(2.0, 0.3, 1.0);
        assert_eq!(m.floor_eigenvalues(1e-9), m);
    }

    #[test]
    fn standard_normal_at_mean() {
        let v = log_normal_pdf([0.0, 0.0], [0.0, 0.0], &Sym2::IDENTITY).unwrap();
        assert!((v.exp() - 1.0 / (2.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn lse_matches_naive() {
        let v = [-1.0, 0.5, 2.0];
        let naive = v.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&v) - naive).abs() < 1e-14);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }
}
