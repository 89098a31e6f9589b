//! Gaussian mixture regression: conditions a joint 2-D mixture on its input
//! coordinate to predict the output's mean and variance.

use std::fmt::Write as _;

use thiserror::Error;

use crate::gmm::{check_tag, normalize_log_weights, GaussianMixture, GmmError, FORMAT_TAG};
use crate::linalg::log_normal_pdf_1d;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GmrError {
    #[error("component {0} has non-positive input variance")]
    SingularInputVariance(usize),
    #[error("input is not finite")]
    NonFiniteInput,
    #[error("component index {index} out of range for K = {k}")]
    NoSuchComponent { index: usize, k: usize },
    #[error("input and output index must be 0 and 1 in some order")]
    BadPartition,
    #[error(transparent)]
    Mixture(#[from] GmmError),
}

/// Output estimate at one input value.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    /// `Σ_k h_k² Σ̂_k`.
    pub variance: f64,
    /// Input responsibilities `h_k`.
    pub weights: Vec<f64>,
    /// The input lies outside the model's support (see
    /// [`GmrModel::input_support`]).
    pub extrapolated: bool,
}

/// A trained mixture plus the input/output partition used for conditioning.
#[derive(Debug, Clone, PartialEq)]
pub struct GmrModel {
    mixture: GaussianMixture,
    input: usize,
    output: usize,
    support: (f64, f64),
}

impl GmrModel {
    /// Input on coordinate 0, output on coordinate 1.
    pub fn new(mixture: GaussianMixture) -> Result<Self, GmrError> {
        Self::with_partition(mixture, 0, 1)
    }

    pub fn with_partition(mixture: GaussianMixture, input: usize, output: usize) -> Result<Self, GmrError> {
        if !matches!((input, output), (0, 1) | (1, 0)) {
            return Err(GmrError::BadPartition);
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (k, c) in mixture.components().iter().enumerate() {
            let var = c.sigma.get(input, input);
            if !(var > 0.0 && var.is_finite()) {
                return Err(GmrError::SingularInputVariance(k));
            }
            let sd = var.sqrt();
            lo = lo.min(c.mu[input] - 2.0 * sd);
            hi = hi.max(c.mu[input] + 2.0 * sd);
        }
        Ok(GmrModel { mixture, input, output, support: (lo, hi) })
    }

    pub fn mixture(&self) -> &GaussianMixture {
        &self.mixture
    }

    pub fn k(&self) -> usize {
        self.mixture.k()
    }

    pub fn input_index(&self) -> usize {
        self.input
    }

    pub fn output_index(&self) -> usize {
        self.output
    }

    /// Input interval covered by the components: the union of
    /// `μ_k^I ± 2·sqrt(Σ_k^I)`. Predictions outside it are flagged as
    /// extrapolated.
    pub fn input_support(&self) -> (f64, f64) {
        self.support
    }

    /// Conditional mean and variance of component `k` at input `q`.
    pub fn component_conditional(&self, k: usize, q: f64) -> Result<(f64, f64), GmrError> {
        let c = self
            .mixture
            .components()
            .get(k)
            .ok_or(GmrError::NoSuchComponent { index: k, k: self.k() })?;
        let (i, o) = (self.input, self.output);
        let s_ii = c.sigma.get(i, i);
        if !(s_ii > 0.0) {
            return Err(GmrError::SingularInputVariance(k));
        }
        let s_oi = c.sigma.get(o, i);
        let gain = s_oi / s_ii;
        let mean = c.mu[o] + gain * (q - c.mu[i]);
        let variance = (c.sigma.get(o, o) - gain * s_oi).max(0.0);
        Ok((mean, variance))
    }

    /// `h_k = π_k 𝒩(q; μ_k^I, Σ_k^I) / Σ_i π_i 𝒩(q; μ_i^I, Σ_i^I)`.
    pub fn input_responsibilities(&self, q: f64) -> Result<Vec<f64>, GmrError> {
        if !q.is_finite() {
            return Err(GmrError::NonFiniteInput);
        }
        let i = self.input;
        let mut logs: Vec<f64> = self
            .mixture
            .components()
            .iter()
            .map(|c| c.pi.ln() + log_normal_pdf_1d(q, c.mu[i], c.sigma.get(i, i)))
            .collect();
        normalize_log_weights(&mut logs).ok_or(GmrError::NonFiniteInput)?;
        Ok(logs)
    }

    pub fn predict(&self, q: f64) -> Result<Prediction, GmrError> {
        let weights = self.input_responsibilities(q)?;
        let mut mean = 0.0;
        let mut variance = 0.0;
        for (k, h) in weights.iter().enumerate() {
            let (m, v) = self.component_conditional(k, q)?;
            mean += h * m;
            variance += h * h * v;
        }
        let extrapolated = q < self.support.0 || q > self.support.1;
        Ok(Prediction { mean, variance, weights, extrapolated })
    }

    /// Predicted mean only.
    pub fn predict_mean(&self, q: f64) -> Result<f64, GmrError> {
        self.predict(q).map(|p| p.mean)
    }

    /// Serializes as `gmmodel v1` with the partition header line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(FORMAT_TAG);
        out.push('\n');
        let _ = writeln!(out, "gmr input={} output={}", self.input, self.output);
        self.mixture.write_body(&mut out);
        out
    }

    pub fn from_text(text: &str) -> Result<Self, GmrError> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        check_tag(lines.next())?;
        let header = lines.next().ok_or_else(|| GmmError::Parse("missing gmr header".into()))?;
        let (input, output) = parse_partition(header)?;
        let mixture = GaussianMixture::parse_body(&mut lines)?;
        Self::with_partition(mixture, input, output)
    }
}

fn parse_partition(line: &str) -> Result<(usize, usize), GmmError> {
    let bad = || GmmError::Parse(format!("bad gmr header {line:?}"));
    let mut tokens = line.split_whitespace();
    if tokens.next() != Some("gmr") {
        return Err(bad());
    }
    let mut field = |name: &str| -> Result<usize, GmmError> {
        tokens
            .next()
            .and_then(|t| t.strip_prefix(name))
            .and_then(|v| v.parse().ok())
            .ok_or_else(bad)
    };
    let input = field("input=")?;
    let output = field("output=")?;
    Ok((input, output))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmm::GaussianComponent;
    use crate::linalg::{Point, Sym2};

    fn single(mu: Point, sigma: Sym2) -> GmrModel {
        GmrModel::new(GaussianMixture::new(vec![GaussianComponent::new(1.0, mu, sigma)]).unwrap()).unwrap()
    }

    #[test]
    fn closed_form_conditioning() {
        let m = single([1.0, 2.0], Sym2::new(1.0, 0.5, 1.0));
        let (mean, var) = m.component_conditional(0, 2.0).unwrap();
        assert!((mean - 2.5).abs() < 1e-15);
        assert!((var - 0.75).abs() < 1e-15);
    }

    #[test]
    fn independent_components_ignore_input() {
        let m = single([1.0, -4.0], Sym2::new(2.0, 0.0, 3.0));
        for q in [-10.0, 0.0, 1.0, 7.5] {
            assert_eq!(m.component_conditional(0, q).unwrap(), (-4.0, 3.0));
        }
    }

    #[test]
    fn single_component_predict_matches_conditional() {
        let m = single([0.3, 2.0], Sym2::new(0.4, -0.3, 1.2));
        let p = m.predict(0.9).unwrap();
        let (mean, var) = m.component_conditional(0, 0.9).unwrap();
        assert_eq!(p.weights, vec![1.0]);
        assert_eq!((p.mean, p.variance), (mean, var));
    }

    #[test]
    fn symmetric_responsibilities() {
        let gm = GaussianMixture::new(vec![
            GaussianComponent::new(0.5, [-1.0, 0.0], Sym2::IDENTITY),
            GaussianComponent::new(0.5, [1.0, 5.0], Sym2::IDENTITY),
        ])
        .unwrap();
        let m = GmrModel::new(gm).unwrap();
        assert_eq!(m.input_responsibilities(0.0).unwrap(), vec![0.5, 0.5]);
        assert_eq!(m.input_responsibilities(f64::NAN).unwrap_err(), GmrError::NonFiniteInput);
    }

    #[test]
    fn extrapolation_flag() {
        let m = single([0.0, 0.0], Sym2::IDENTITY);
        assert!(!m.predict(1.5).unwrap().extrapolated);
        assert!(m.predict(2.5).unwrap().extrapolated);
        assert_eq!(m.input_support(), (-2.0, 2.0));
    }

    #[test]
    fn text_round_trip() {
        let gm = GaussianMixture::new(vec![
            GaussianComponent::new(0.3, [0.1, 1.0], Sym2::new(0.5, 0.2, 0.9)),
            GaussianComponent::new(0.7, [-0.4, 2.0], Sym2::new(0.3, -0.1, 1.5)),
        ])
        .unwrap();
        let m = GmrModel::new(gm).unwrap();
        let text = m.to_text();
        assert!(text.starts_with("gmmodel v1\ngmr input=0 output=1\n2 2\n"));
        assert_eq!(GmrModel::from_text(&text).unwrap(), m);
        assert!(GmrModel::from_text(&text.replace("gmr input=0", "gmr inp=0")).is_err());
        assert!(GmrModel::from_text(&text.replace("v1", "v9")).is_err());
    }

    #[test]
    fn swapped_partition() {
        let m = GmrModel::with_partition(
            GaussianMixture::new(vec![GaussianComponent::new(1.0, [2.0, 1.0], Sym2::new(1.0, 0.5, 1.0))]).unwrap(),
            1,
            0,
        )
        .unwrap();
        let (mean, var) = m.component_conditional(0, 2.0).unwrap();
        assert!((mean - 2.5).abs() < 1e-15 && (var - 0.75).abs() < 1e-15);
        assert!(GmrModel::with_partition(m.mixture().clone(), 0, 0).is_err());
    }
}
