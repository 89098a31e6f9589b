use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{kmeans_pp, normalize_log_weights, GaussianComponent, GaussianMixture, GmmError};
use crate::linalg::{Point, Sym2};
use crate::par::Exec;

/// Relative ridge added to each covariance diagonal entry after the M-step.
pub const COVARIANCE_RIDGE: f64 = 1e-6;
/// Smallest eigenvalue any covariance may have.
pub const EIGENVALUE_FLOOR: f64 = 1e-9;

const KMEANS_ITERATIONS: usize = 20;
/// Components whose effective count drops below this keep their previous
/// mean and covariance.
const MIN_EFFECTIVE_COUNT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmOptions {
    pub k: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// Absolute log-likelihood improvement below which EM stops.
    pub tol: f64,
    pub exec: Exec,
}

impl EmOptions {
    pub fn new(k: usize, seed: u64) -> Self {
        EmOptions { k, seed, max_iters: 500, tol: 1e-7, exec: Exec::default() }
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }
}

/// EM diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    /// Log-likelihood of the initial parameters followed by one entry per
    /// accepted M-step.
    pub log_likelihood_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub seed: u64,
}

impl FitReport {
    pub fn final_log_likelihood(&self) -> f64 {
        *self.log_likelihood_trace.last().expect("trace is never empty")
    }
}

/// Fits a K-component full-covariance mixture by EM.
///
/// The data is sorted internally before seeding, so the result does not
/// depend on the order of `data`. k-means++ (seeded by `opts.seed`)
/// provides the initial partition. Each M-step is followed by a relative
/// diagonal ridge and an eigenvalue floor. If regularization ever makes the
/// likelihood drop, the previous parameters are kept and the fit stops.
pub fn fit_em(data: &[Point], opts: &EmOptions) -> Result<(GaussianMixture, FitReport), GmmError> {
    let k = opts.k;
    if k == 0 || data.len() < k {
        return Err(GmmError::TooFewPoints { n: data.len(), k });
    }
    if data.iter().any(|p| !(p[0].is_finite() && p[1].is_finite())) {
        return Err(GmmError::NonFiniteData);
    }
    let mut sorted = data.to_vec();
    sorted.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let data = &sorted[..];

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let labels = kmeans_pp(data, k, KMEANS_ITERATIONS, &mut rng);
    let mut params = initial_components(data, &labels, k)?;

    let (mut resp, mut ll) = e_step(data, &params, opts.exec)?;
    let mut trace = vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iters {
        let next = m_step(data, &resp, &params, opts.exec)?;
        iterations += 1;
        let (next_resp, next_ll) = e_step(data, &next, opts.exec)?;
        if next_ll < ll {
            log::debug!("EM step {iterations} lowered the log-likelihood by {:e}; stopping", ll - next_ll);
            converged = true;
            break;
        }
        trace.push(next_ll);
        let improvement = next_ll - ll;
        params = next;
        resp = next_resp;
        ll = next_ll;
        if improvement < opts.tol {
            converged = true;
            break;
        }
    }

    let mixture = GaussianMixture::new(params)?;
    Ok((mixture, FitReport { log_likelihood_trace: trace, iterations, converged, seed: opts.seed }))
}

fn regularize(sigma: Sym2) -> Sym2 {
    Sym2::new(sigma.xx * (1.0 + COVARIANCE_RIDGE), sigma.xy, sigma.yy * (1.0 + COVARIANCE_RIDGE))
        .floor_eigenvalues(EIGENVALUE_FLOOR)
}

fn weighted_moments(data: &[Point], weight: impl Fn(usize) -> f64) -> (f64, Point, Sym2) {
    let mut nk = 0.0;
    let mut s = [0.0; 2];
    for (i, x) in data.iter().enumerate() {
        let w = weight(i);
        nk += w;
        s[0] += w * x[0];
        s[1] += w * x[1];
    }
    if nk <= 0.0 {
        return (0.0, [0.0; 2], Sym2::IDENTITY);
    }
    let mu = [s[0] / nk, s[1] / nk];
    let (mut xx, mut xy, mut yy) = (0.0, 0.0, 0.0);
    for (i, x) in data.iter().enumerate() {
        let w = weight(i);
        let (u, v) = (x[0] - mu[0], x[1] - mu[1]);
        xx += w * u * u;
        xy += w * u * v;
        yy += w * v * v;
    }
    (nk, mu, Sym2::new(xx / nk, xy / nk, yy / nk))
}

fn initial_components(data: &[Point], labels: &[usize], k: usize) -> Result<Vec<GaussianComponent>, GmmError> {
    let (_, _, global) = weighted_moments(data, |_| 1.0);
    let mut comps = Vec::with_capacity(k);
    for j in 0..k {
        let (nk, mu, sigma) = weighted_moments(data, |i| if labels[i] == j { 1.0 } else { 0.0 });
        let (nk, mu, sigma) = if nk >= 2.0 {
            (nk, mu, sigma)
        } else if nk > 0.0 {
            (nk, mu, global)
        } else {
            // Empty cluster (only possible with duplicated points).
            (1.0, data[j * data.len() / k], global)
        };
        comps.push(GaussianComponent::new(nk, mu, regularize(sigma)));
    }
    normalize_weights(&mut comps);
    check_definite(&comps)?;
    Ok(comps)
}

fn normalize_weights(comps: &mut [GaussianComponent]) {
    let total: f64 = comps.iter().map(|c| c.pi).sum();
    for c in comps.iter_mut() {
        c.pi /= total;
    }
}

fn check_definite(comps: &[GaussianComponent]) -> Result<(), GmmError> {
    match comps.iter().position(|c| !c.sigma.is_positive_definite()) {
        Some(k) => Err(GmmError::SingularCovariance(k)),
        None => Ok(()),
    }
}

/// Responsibilities (row-major `n × k`) and total log-likelihood.
fn e_step(data: &[Point], comps: &[GaussianComponent], exec: Exec) -> Result<(Vec<f64>, f64), GmmError> {
    let rows = exec.map(data, |&x| {
        let mut logs: Vec<f64> = comps.iter().map(|c| c.log_weighted_density(x)).collect();
        let ll = crate::linalg::log_sum_exp(&logs);
        let ok = normalize_log_weights(&mut logs).is_some();
        (logs, if ok { ll } else { f64::NAN })
    });
    let mut resp = Vec::with_capacity(data.len() * comps.len());
    let mut total = 0.0;
    for (row, ll) in rows {
        if !ll.is_finite() {
            return Err(GmmError::DegenerateDensity);
        }
        total += ll;
        resp.extend(row);
    }
    Ok((resp, total))
}

fn m_step(
    data: &[Point],
    resp: &[f64],
    prev: &[GaussianComponent],
    exec: Exec,
) -> Result<Vec<GaussianComponent>, GmmError> {
    let k = prev.len();
    let mut comps = exec.map_range(k, |j| {
        let (nk, mu, sigma) = weighted_moments(data, |i| resp[i * k + j]);
        if nk < MIN_EFFECTIVE_COUNT {
            GaussianComponent::new(nk.max(0.0), prev[j].mu, prev[j].sigma)
        } else {
            GaussianComponent::new(nk, mu, regularize(sigma))
        }
    });
    normalize_weights(&mut comps);
    check_definite(&comps)?;
    Ok(comps)
}
