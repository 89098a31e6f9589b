//! Full-covariance Gaussian mixtures over the 2-D joint space: density
//! evaluation, EM fitting and information-criterion model selection.

mod criteria;
mod em;
mod kmeans;

use std::fmt::Write as _;

use thiserror::Error;

use crate::linalg::{log_normal_pdf, log_sum_exp, Point, Sym2};

pub use criteria::{information_criteria, parameter_count, select_k, Criteria, KSelection, SelectionRow};
pub use em::{fit_em, EmOptions, FitReport, COVARIANCE_RIDGE, EIGENVALUE_FLOOR};
pub use kmeans::kmeans_pp;

/// Dimension of every data point handled by this crate.
pub const DIM: usize = 2;

/// First line of the text model format.
pub const FORMAT_TAG: &str = "gmmodel v1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GmmError {
    #[error("expected a {expected}-dimensional point, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("mixture density is degenerate (non-finite input or parameters)")]
    DegenerateDensity,
    #[error("need at least {k} points to fit {k} components, got {n}")]
    TooFewPoints { n: usize, k: usize },
    #[error("data contains non-finite values")]
    NonFiniteData,
    #[error("component {0} covariance is not positive definite")]
    SingularCovariance(usize),
    #[error("invalid mixture: {0}")]
    InvalidMixture(String),
    #[error("invalid component range {lo}..={hi} for {n} points")]
    InvalidKRange { lo: usize, hi: usize, n: usize },
    #[error("no data points")]
    EmptyData,
    #[error("no component count in the range could be fitted")]
    NoFeasibleK,
    #[error("model text: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianComponent {
    /// Prior weight.
    pub pi: f64,
    pub mu: Point,
    pub sigma: Sym2,
}

impl GaussianComponent {
    pub fn new(pi: f64, mu: Point, sigma: Sym2) -> Self {
        GaussianComponent { pi, mu, sigma }
    }

    /// `ln(π_k) + ln 𝒩(x | μ_k, Σ_k)`.
    pub fn log_weighted_density(&self, x: Point) -> f64 {
        match log_normal_pdf(x, self.mu, &self.sigma) {
            Some(l) => self.pi.ln() + l,
            None => f64::NAN,
        }
    }
}

/// A K-component mixture whose weights sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    components: Vec<GaussianComponent>,
}

impl GaussianMixture {
    /// Validates and normalizes the weights. Weights must already sum to one
    /// within 1e-9; covariances must be positive definite.
    pub fn new(mut components: Vec<GaussianComponent>) -> Result<Self, GmmError> {
        if components.is_empty() {
            return Err(GmmError::InvalidMixture("no components".into()));
        }
        for (k, c) in components.iter().enumerate() {
            if !(c.pi.is_finite() && (0.0..=1.0).contains(&c.pi)) {
                return Err(GmmError::InvalidMixture(format!("component {k} weight {} outside [0, 1]", c.pi)));
            }
            if !(c.mu[0].is_finite() && c.mu[1].is_finite()) {
                return Err(GmmError::InvalidMixture(format!("component {k} mean is not finite")));
            }
            if !c.sigma.is_positive_definite() {
                return Err(GmmError::SingularCovariance(k));
            }
        }
        let total: f64 = components.iter().map(|c| c.pi).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(GmmError::InvalidMixture(format!("weights sum to {total}")));
        }
        for c in &mut components {
            c.pi /= total;
        }
        Ok(GaussianMixture { components })
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        DIM
    }

    /// `ln p(x)`, computed in the log domain.
    pub fn log_density_point(&self, x: Point) -> f64 {
        let mut terms = [0.0; 64];
        if self.k() <= terms.len() {
            for (t, c) in terms.iter_mut().zip(&self.components) {
                *t = c.log_weighted_density(x);
            }
            log_sum_exp(&terms[..self.k()])
        } else {
            let terms: Vec<f64> = self.components.iter().map(|c| c.log_weighted_density(x)).collect();
            log_sum_exp(&terms)
        }
    }

    /// Mixture density `Σ_k π_k 𝒩(x | μ_k, Σ_k)`.
    pub fn density(&self, x: &[f64]) -> Result<f64, GmmError> {
        let p = as_point(x)?;
        let l = self.log_density_point(p);
        if l.is_nan() {
            return Err(GmmError::DegenerateDensity);
        }
        Ok(l.exp())
    }

    /// Posterior component probabilities for a full data point.
    pub fn responsibilities(&self, x: &[f64]) -> Result<Vec<f64>, GmmError> {
        let p = as_point(x)?;
        if !(p[0].is_finite() && p[1].is_finite()) {
            return Err(GmmError::DegenerateDensity);
        }
        let mut logs: Vec<f64> = self.components.iter().map(|c| c.log_weighted_density(p)).collect();
        normalize_log_weights(&mut logs).ok_or(GmmError::DegenerateDensity)?;
        Ok(logs)
    }

    /// Total log-likelihood of `data`.
    pub fn log_likelihood(&self, data: &[Point]) -> f64 {
        data.iter().map(|&x| self.log_density_point(x)).sum()
    }

    /// Serializes the mixture in the `gmmodel v1` text format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(FORMAT_TAG);
        out.push('\n');
        self.write_body(&mut out);
        out
    }

    pub(crate) fn write_body(&self, out: &mut String) {
        let _ = writeln!(out, "{} {}", self.k(), DIM);
        for c in &self.components {
            let _ = write!(out, "{:.16e} {:.16e} {:.16e}", c.pi, c.mu[0], c.mu[1]);
            for v in c.sigma.row_major() {
                let _ = write!(out, " {v:.16e}");
            }
            out.push('\n');
        }
    }

    pub fn from_text(text: &str) -> Result<Self, GmmError> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        check_tag(lines.next())?;
        Self::parse_body(&mut lines)
    }

    pub(crate) fn parse_body<'a>(lines: &mut impl Iterator<Item = &'a str>) -> Result<Self, GmmError> {
        let header = lines.next().ok_or_else(|| GmmError::Parse("missing `K D` line".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| GmmError::Parse(format!("bad `K D` line: {header:?}"))))
            .collect::<Result<_, _>>()?;
        let [k, d] = dims[..] else {
            return Err(GmmError::Parse(format!("bad `K D` line: {header:?}")));
        };
        if d != DIM {
            return Err(GmmError::Parse(format!("unsupported dimension {d}")));
        }
        let mut components = Vec::with_capacity(k);
        for i in 0..k {
            let line = lines.next().ok_or_else(|| GmmError::Parse(format!("missing component {i}")))?;
            let v: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| GmmError::Parse(format!("component {i}: bad number {t:?}"))))
                .collect::<Result<_, _>>()?;
            if v.len() != 1 + DIM + DIM * DIM {
                return Err(GmmError::Parse(format!("component {i}: expected 7 values, got {}", v.len())));
            }
            if v[4] != v[5] {
                return Err(GmmError::Parse(format!("component {i}: covariance is not symmetric")));
            }
            components.push(GaussianComponent::new(v[0], [v[1], v[2]], Sym2::new(v[3], v[4], v[6])));
        }
        if lines.next().is_some() {
            return Err(GmmError::Parse("trailing content after components".into()));
        }
        GaussianMixture::new(components)
    }
}

pub(crate) fn check_tag(line: Option<&str>) -> Result<(), GmmError> {
    match line {
        Some(FORMAT_TAG) => Ok(()),
        Some(other) => Err(GmmError::Parse(format!("unsupported format header {other:?}"))),
        None => Err(GmmError::Parse("empty model file".into())),
    }
}

/// Turns log-weights into probabilities in place. `None` when no entry is
/// finite.
pub(crate) fn normalize_log_weights(logs: &mut [f64]) -> Option<()> {
    let total = log_sum_exp(logs);
    if !total.is_finite() || logs.iter().any(|l| l.is_nan()) {
        return None;
    }
    for l in logs.iter_mut() {
        *l = (*l - total).exp();
    }
    // Renormalize so the sum is one to the last ulp or so.
    let s: f64 = logs.iter().sum();
    for l in logs.iter_mut() {
        *l /= s;
    }
    Some(())
}

fn as_point(x: &[f64]) -> Result<Point, GmmError> {
    match x {
        [a, b] => Ok([*a, *b]),
        _ => Err(GmmError::DimensionMismatch { expected: DIM, got: x.len() }),
    }
}
