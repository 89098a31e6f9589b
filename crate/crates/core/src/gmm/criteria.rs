use std::ops::RangeInclusive;

use super::{fit_em, EmOptions, GaussianMixture, GmmError, DIM};
use crate::linalg::Point;
use crate::par::Exec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Criteria {
    pub log_likelihood: f64,
    pub n_params: usize,
    pub bic: f64,
    pub aic: f64,
}

/// Free parameters of a K-component full-covariance mixture in `dim`
/// dimensions: `(K−1) + K·D + K·D(D+1)/2`.
pub fn parameter_count(k: usize, dim: usize) -> usize {
    (k - 1) + k * dim + k * dim * (dim + 1) / 2
}

/// BIC and AIC of `gm` on `data`.
pub fn information_criteria(gm: &GaussianMixture, data: &[Point]) -> Result<Criteria, GmmError> {
    if data.is_empty() {
        return Err(GmmError::EmptyData);
    }
    let ll = gm.log_likelihood(data);
    if !ll.is_finite() {
        return Err(GmmError::DegenerateDensity);
    }
    let p = parameter_count(gm.k(), DIM);
    Ok(Criteria {
        log_likelihood: ll,
        n_params: p,
        bic: -2.0 * ll + p as f64 * (data.len() as f64).ln(),
        aic: -2.0 * ll + 2.0 * p as f64,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionRow {
    pub k: usize,
    pub criteria: Criteria,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KSelection {
    pub best_k_bic: usize,
    pub best_k_aic: usize,
    /// One row per successfully fitted K, ascending.
    pub table: Vec<SelectionRow>,
    /// Component counts whose fit failed, with the reason.
    pub failures: Vec<(usize, GmmError)>,
}

/// Fits every K in `k_range` with the same seed and picks the minimizers of
/// BIC and AIC. Fits run concurrently under [`Exec::Parallel`]; the table is
/// always ordered by K.
pub fn select_k(
    data: &[Point],
    k_range: RangeInclusive<usize>,
    seed: u64,
    exec: Exec,
) -> Result<KSelection, GmmError> {
    let (lo, hi) = (*k_range.start(), *k_range.end());
    if lo == 0 || lo > hi || hi > data.len() / 10 {
        return Err(GmmError::InvalidKRange { lo, hi, n: data.len() });
    }
    // The E-step is already parallel; nesting is left to rayon's scheduler.
    let ks: Vec<usize> = k_range.collect();
    let results = exec.map(&ks, |&k| {
        let opts = EmOptions::new(k, seed).with_exec(exec);
        fit_em(data, &opts).and_then(|(gm, report)| {
            information_criteria(&gm, data).map(|c| SelectionRow { k, criteria: c, converged: report.converged })
        })
    });

    let mut table = Vec::new();
    let mut failures = Vec::new();
    for (k, r) in ks.into_iter().zip(results) {
        match r {
            Ok(row) => table.push(row),
            Err(e) => {
                log::warn!("K = {k} failed: {e}");
                failures.push((k, e));
            }
        }
    }
    let argmin = |f: fn(&Criteria) -> f64| {
        table
            .iter()
            .min_by(|a, b| f(&a.criteria).total_cmp(&f(&b.criteria)))
            .map(|r| r.k)
    };
    let best_k_bic = argmin(|c| c.bic).ok_or(GmmError::NoFeasibleK)?;
    let best_k_aic = argmin(|c| c.aic).ok_or(GmmError::NoFeasibleK)?;
    Ok(KSelection { best_k_bic, best_k_aic, table, failures })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_counts() {
        assert_eq!(parameter_count(1, 2), 5);
        assert_eq!(parameter_count(9, 2), 53);
    }

    #[test]
    fn singleton_range() {
        let data: Vec<Point> = (0..100).map(|i| [(i % 10) as f64, (i / 10) as f64]).collect();
        let sel = select_k(&data, 3..=3, 1, Exec::Sequential).unwrap();
        assert_eq!(sel.table.len(), 1);
        assert_eq!((sel.best_k_bic, sel.best_k_aic), (3, 3));
    }

    #[test]
    fn range_is_bounded_by_data_size() {
        let data = vec![[0.0, 0.0]; 50];
        assert!(matches!(select_k(&data, 1..=6, 0, Exec::Sequential), Err(GmmError::InvalidKRange { .. })));
        assert!(matches!(select_k(&data, 0..=2, 0, Exec::Sequential), Err(GmmError::InvalidKRange { .. })));
    }
}
