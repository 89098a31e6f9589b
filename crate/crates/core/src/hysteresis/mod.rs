//! Three-curve hysteresis model (nominal, ascending/cw, descending/ccw),
//! direction-aware prediction, evaluation against recorded cycles and
//! model-bundle persistence.

mod solver;

use std::fmt;
use std::path::Path;

use thiserror::Error;

use crate::dataset::{CycleDataset, DatasetError};
use crate::gmm::{fit_em, EmOptions, FitReport, GmmError};
use crate::gmr::{GmrError, GmrModel, Prediction};
use crate::io::write_atomic;
use crate::par::Exec;

pub use solver::{
    armijo_step, nominal_inverse, solve_inverse, InverseSolution, NominalInverse, SolverState, StepFailure,
};

/// Half-width of the band around `q_prev` inside which the direction of
/// motion is considered undefined.
pub const DIRECTION_DEADBAND: f64 = 1e-4;

/// Bundle file names.
pub const BUNDLE_FILES: [&str; 4] = ["nominal", "cw", "ccw", "meta"];

#[derive(Debug, Error)]
pub enum IkError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("EM failed for the {model} model: {source}")]
    Em { model: ActiveModel, source: GmmError },
    #[error(transparent)]
    Gmr(#[from] GmrError),
    #[error("training needs at least 2 cycles, got {0}")]
    TooFewCycles(usize),
    #[error("{model} branch has {points} points, fewer than K = {k}")]
    EmptyBranch { model: ActiveModel, points: usize, k: usize },
    #[error("target angle is not finite")]
    NonFiniteTarget,
    #[error("target {gamma_des} deg unreachable: stalled at q = {q} with residual {residual} deg")]
    Unreachable { gamma_des: f64, q: f64, residual: f64 },
    #[error("invalid solver parameter: {0}")]
    InvalidParameter(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("model bundle: {0}")]
    Bundle(String),
}

/// Which of the three regressors is in use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActiveModel {
    Nominal,
    /// Ascending branch.
    Cw,
    /// Descending branch.
    Ccw,
}

impl ActiveModel {
    pub fn as_str(self) -> &'static str {
        match self {
            ActiveModel::Nominal => "nominal",
            ActiveModel::Cw => "cw",
            ActiveModel::Ccw => "ccw",
        }
    }

    /// Branch implied by moving from `from` to `to`.
    pub fn for_motion(from: f64, to: f64) -> ActiveModel {
        if to > from + DIRECTION_DEADBAND {
            ActiveModel::Cw
        } else if to < from - DIRECTION_DEADBAND {
            ActiveModel::Ccw
        } else {
            ActiveModel::Nominal
        }
    }
}

impl fmt::Display for ActiveModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Component counts and seed for the three EM fits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub k_nominal: usize,
    pub k_cw: usize,
    pub k_ccw: usize,
    pub seed: u64,
    pub max_iters: usize,
    pub tol: f64,
    pub exec: Exec,
}

impl TrainConfig {
    pub fn new(k_nominal: usize, k_cw: usize, k_ccw: usize, seed: u64) -> Self {
        let em = EmOptions::new(1, seed);
        TrainConfig { k_nominal, k_cw, k_ccw, seed, max_iters: em.max_iters, tol: em.tol, exec: em.exec }
    }

    pub fn uniform(k: usize, seed: u64) -> Self {
        Self::new(k, k, k, seed)
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    fn em(&self, k: usize) -> EmOptions {
        EmOptions { k, seed: self.seed, max_iters: self.max_iters, tol: self.tol, exec: self.exec }
    }
}

/// EM diagnostics of the three fits.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub nominal: FitReport,
    pub cw: FitReport,
    pub ccw: FitReport,
    pub nominal_points: usize,
    pub cw_points: usize,
    pub ccw_points: usize,
}

impl TrainReport {
    pub fn fits(&self) -> [(ActiveModel, &FitReport, usize); 3] {
        [
            (ActiveModel::Nominal, &self.nominal, self.nominal_points),
            (ActiveModel::Cw, &self.cw, self.cw_points),
            (ActiveModel::Ccw, &self.ccw, self.ccw_points),
        ]
    }

    /// Plain-text summary, one block per model.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (model, r, n) in self.fits() {
            out.push_str(&format!(
                "{model}: points={n} seed={} iterations={} converged={} final_log_likelihood={}\n",
                r.seed,
                r.iterations,
                r.converged,
                r.final_log_likelihood()
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HysteresisModel {
    nominal: GmrModel,
    cw: GmrModel,
    ccw: GmrModel,
    q_min: f64,
    q_max: f64,
}

impl HysteresisModel {
    pub fn new(nominal: GmrModel, cw: GmrModel, ccw: GmrModel, q_min: f64, q_max: f64) -> Result<Self, IkError> {
        if !(q_min.is_finite() && q_max.is_finite() && q_min < q_max) {
            return Err(IkError::InvalidParameter(format!("bounds [{q_min}, {q_max}]")));
        }
        let partition = (nominal.input_index(), nominal.output_index());
        for m in [&cw, &ccw] {
            if (m.input_index(), m.output_index()) != partition {
                return Err(IkError::Bundle("models disagree on the input/output partition".into()));
            }
        }
        Ok(HysteresisModel { nominal, cw, ccw, q_min, q_max })
    }

    pub fn model(&self, which: ActiveModel) -> &GmrModel {
        match which {
            ActiveModel::Nominal => &self.nominal,
            ActiveModel::Cw => &self.cw,
            ActiveModel::Ccw => &self.ccw,
        }
    }

    pub fn nominal(&self) -> &GmrModel {
        &self.nominal
    }

    pub fn cw(&self) -> &GmrModel {
        &self.cw
    }

    pub fn ccw(&self) -> &GmrModel {
        &self.ccw
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.q_min, self.q_max)
    }

    pub fn q_min(&self) -> f64 {
        self.q_min
    }

    pub fn q_max(&self) -> f64 {
        self.q_max
    }

    pub fn k_counts(&self) -> (usize, usize, usize) {
        (self.nominal.k(), self.cw.k(), self.ccw.k())
    }

    pub fn clamp(&self, q: f64) -> f64 {
        q.clamp(self.q_min, self.q_max)
    }

    /// Mean of the selected regressor at `q`.
    pub fn predict_with(&self, which: ActiveModel, q: f64) -> Result<f64, IkError> {
        Ok(self.model(which).predict_mean(q)?)
    }

    /// Prediction using the branch implied by moving from `q_prev` to `q`.
    pub fn predict_directional(&self, q: f64, q_prev: f64) -> Result<(ActiveModel, Prediction), IkError> {
        if !(q.is_finite() && q_prev.is_finite()) {
            return Err(GmrError::NonFiniteInput.into());
        }
        let which = ActiveModel::for_motion(q_prev, q);
        Ok((which, self.model(which).predict(q)?))
    }

    /// Median forward-difference slope of the nominal model over 101 grid
    /// points spanning the input bounds, in degrees per input unit.
    pub fn median_nominal_slope(&self) -> Result<f64, IkError> {
        let n = 100;
        let h = (self.q_max - self.q_min) / n as f64;
        let values: Vec<f64> = (0..=n)
            .map(|i| self.nominal.predict_mean(self.q_min + h * i as f64))
            .collect::<Result<_, _>>()?;
        let mut slopes: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]) / h).collect();
        slopes.sort_by(f64::total_cmp);
        let mid = slopes.len() / 2;
        Ok(if slopes.len().is_multiple_of(2) { 0.5 * (slopes[mid - 1] + slopes[mid]) } else { slopes[mid] })
    }

    /// Writes `nominal`, `cw`, `ccw` and `meta` into `dir`.
    pub fn save_bundle(&self, dir: impl AsRef<Path>, epsilon: f64) -> Result<(), IkError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        write_atomic(&dir.join("nominal"), self.nominal.to_text().as_bytes())?;
        write_atomic(&dir.join("cw"), self.cw.to_text().as_bytes())?;
        write_atomic(&dir.join("ccw"), self.ccw.to_text().as_bytes())?;
        let meta = format!("q_min {}\nq_max {}\nepsilon {}\n", self.q_min, self.q_max, epsilon);
        write_atomic(&dir.join("meta"), meta.as_bytes())?;
        Ok(())
    }

    /// Loads a bundle; returns the model and the stored solver tolerance.
    pub fn load_bundle(dir: impl AsRef<Path>) -> Result<(Self, f64), IkError> {
        let dir = dir.as_ref();
        let read = |name: &str| {
            std::fs::read_to_string(dir.join(name))
                .map_err(|e| IkError::Bundle(format!("{}: {e}", dir.join(name).display())))
        };
        let gmr = |name: &str| -> Result<GmrModel, IkError> {
            GmrModel::from_text(&read(name)?).map_err(|e| IkError::Bundle(format!("{name}: {e}")))
        };
        let nominal = gmr("nominal")?;
        let cw = gmr("cw")?;
        let ccw = gmr("ccw")?;
        let meta = read("meta")?;
        let mut q_min = None;
        let mut q_max = None;
        let mut epsilon = None;
        for line in meta.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let mut parts = line.split_whitespace();
            let (Some(key), Some(value), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(IkError::Bundle(format!("meta: malformed line {line:?}")));
            };
            let value: f64 =
                value.parse().map_err(|_| IkError::Bundle(format!("meta: {key} is not a number")))?;
            match key {
                "q_min" => q_min = Some(value),
                "q_max" => q_max = Some(value),
                "epsilon" => epsilon = Some(value),
                other => return Err(IkError::Bundle(format!("meta: unknown key {other:?}"))),
            }
        }
        let missing = |k: &str| IkError::Bundle(format!("meta: missing {k}"));
        let model = HysteresisModel::new(
            nominal,
            cw,
            ccw,
            q_min.ok_or_else(|| missing("q_min"))?,
            q_max.ok_or_else(|| missing("q_max"))?,
        )?;
        Ok((model, epsilon.ok_or_else(|| missing("epsilon"))?))
    }
}

/// Fits the nominal model on every sample and the cw/ccw models on the
/// ascending/descending halves of every cycle.
pub fn train_hysteresis_model(
    train: &CycleDataset,
    cfg: &TrainConfig,
) -> Result<(HysteresisModel, TrainReport), IkError> {
    if train.cycles() < 2 {
        return Err(IkError::TooFewCycles(train.cycles()));
    }
    let split = train.split_cycles()?;
    let all = train.points();
    let asc = split.ascending_points();
    let desc = split.descending_points();
    let jobs = [
        (ActiveModel::Nominal, &all, cfg.k_nominal),
        (ActiveModel::Cw, &asc, cfg.k_cw),
        (ActiveModel::Ccw, &desc, cfg.k_ccw),
    ];
    for (model, pts, k) in jobs {
        if pts.len() < k.max(1) {
            return Err(IkError::EmptyBranch { model, points: pts.len(), k });
        }
    }
    let fits = cfg.exec.map(&jobs, |(model, pts, k)| {
        fit_em(pts, &cfg.em(*k)).map_err(|source| IkError::Em { model: *model, source })
    });
    let mut fitted = Vec::with_capacity(3);
    for fit in fits {
        let (gm, report) = fit?;
        fitted.push((GmrModel::new(gm)?, report));
    }
    let (ccw, ccw_r) = fitted.pop().expect("three fits");
    let (cw, cw_r) = fitted.pop().expect("three fits");
    let (nominal, nominal_r) = fitted.pop().expect("three fits");
    let model = HysteresisModel::new(nominal, cw, ccw, train.q_min(), train.q_max())?;
    let report = TrainReport {
        nominal: nominal_r,
        cw: cw_r,
        ccw: ccw_r,
        nominal_points: all.len(),
        cw_points: asc.len(),
        ccw_points: desc.len(),
    };
    Ok((model, report))
}

/// Per-sample record of an evaluation run.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleError {
    pub cycle_id: u32,
    pub step_index: u32,
    pub q: f64,
    pub gamma: f64,
    pub branch: ActiveModel,
    pub predicted_nominal: f64,
    pub predicted_compensated: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub rmse_nominal: f64,
    pub rmse_compensated: f64,
    /// `100·(1 − rmse_compensated / rmse_nominal)`.
    pub improvement_pct: f64,
    pub per_sample: Vec<SampleError>,
}

/// Compares the nominal model against direction-aware prediction on the
/// test cycles. The direction of each sample comes from the recorded input
/// sequence; the first sample uses the direction towards its successor.
pub fn evaluate(model: &HysteresisModel, test: &CycleDataset, exec: Exec) -> Result<Evaluation, IkError> {
    let samples = test.samples();
    if samples.is_empty() {
        return Err(IkError::InvalidParameter("empty test set".into()));
    }
    let branches: Vec<ActiveModel> = (0..samples.len())
        .map(|i| {
            if i > 0 {
                ActiveModel::for_motion(samples[i - 1].q, samples[i].q)
            } else if samples.len() > 1 {
                ActiveModel::for_motion(samples[0].q, samples[1].q)
            } else {
                ActiveModel::Nominal
            }
        })
        .collect();
    let rows = exec.map_range(samples.len(), |i| -> Result<SampleError, IkError> {
        let s = samples[i];
        Ok(SampleError {
            cycle_id: s.cycle_id,
            step_index: s.step_index,
            q: s.q,
            gamma: s.gamma,
            branch: branches[i],
            predicted_nominal: model.predict_with(ActiveModel::Nominal, s.q)?,
            predicted_compensated: model.predict_with(branches[i], s.q)?,
        })
    });
    let per_sample: Vec<SampleError> = rows.into_iter().collect::<Result<_, _>>()?;
    let rmse_nominal = crate::metrics::rmse(per_sample.iter().map(|r| r.predicted_nominal - r.gamma));
    let rmse_compensated = crate::metrics::rmse(per_sample.iter().map(|r| r.predicted_compensated - r.gamma));
    let improvement_pct = 100.0 * (1.0 - rmse_compensated / rmse_nominal);
    Ok(Evaluation { rmse_nominal, rmse_compensated, improvement_pct, per_sample })
}
