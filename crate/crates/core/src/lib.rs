//! Data-driven forward and inverse kinematics for hysteretic actuators.
//!
//! A joint Gaussian mixture over (control input, bending angle) is fitted by
//! EM ([`gmm`]) and conditioned on the input to regress the angle ([`gmr`]).
//! Separate regressors for the ascending and descending halves of each
//! reciprocating cycle capture the hysteresis loop, and the inverse solver
//! in [`hysteresis`] switches between them according to the direction of
//! motion. [`simulator`] provides a backlash plant with a closed-form inverse
//! for end-to-end checks.
//!
//! The E-step, per-K model selection and evaluation run on rayon when the
//! `parallel` feature (default) is enabled; see [`par::Exec`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod gmm;
pub mod gmr;
pub mod hysteresis;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod par;
pub mod simulator;

pub use dataset::{load_csv, BranchLabel, CycleDataset, DatasetError, Sample};
pub use gmm::{fit_em, select_k, EmOptions, FitReport, GaussianComponent, GaussianMixture, GmmError};
pub use gmr::{GmrError, GmrModel, Prediction};
pub use hysteresis::{
    evaluate, nominal_inverse, solve_inverse, train_hysteresis_model, ActiveModel, Evaluation, HysteresisModel,
    IkError, InverseSolution, SolverState, TrainConfig,
};
pub use linalg::{Point, Sym2};
pub use par::Exec;
pub use simulator::{BacklashPlant, GainCurve, Preset, SimError};
