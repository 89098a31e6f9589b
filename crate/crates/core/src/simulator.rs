//! Synthetic hysteretic plant: a play (backlash) operator followed by a
//! monotone cubic gain. Generates reciprocating-cycle datasets and has a
//! closed-form branch inverse, so it doubles as ground truth in tests.

use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::dataset::{BranchLabel, CycleDataset, DatasetError, Sample};

/// Full output span of the calibrated gain, degrees.
pub const OUTPUT_SPAN_DEG: f64 = 45.0;
/// Linear coefficient of the default gain curve.
pub const DEFAULT_LINEAR_GAIN: f64 = 40.0;
/// Measurement noise of the presets, degrees.
pub const DEFAULT_NOISE_DEG: f64 = 0.15;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("q = {q} outside [{q_min}, {q_max}]")]
    OutOfBounds { q: f64, q_min: f64, q_max: f64 },
    #[error("angle {gamma_des} deg is not reachable on the {branch:?} branch")]
    Unreachable { gamma_des: f64, branch: BranchLabel },
    #[error("invalid plant parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid protocol: {0}")]
    InvalidProtocol(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Strictly increasing map `γ = a·z + b·z³` from play-operator output to
/// degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainCurve {
    pub linear: f64,
    pub cubic: f64,
}

impl GainCurve {
    pub fn new(linear: f64, cubic: f64) -> Result<Self, SimError> {
        if !(linear > 0.0 && cubic >= 0.0 && linear.is_finite() && cubic.is_finite()) {
            return Err(SimError::InvalidParameter(format!("gain a = {linear}, b = {cubic} is not increasing")));
        }
        Ok(GainCurve { linear, cubic })
    }

    /// Picks `b` so that a full sweep of `[-1, 1]` with backlash `width`
    /// spans `±OUTPUT_SPAN_DEG`: `γ(±(1 − w/2)) = ±45`.
    pub fn calibrated(linear: f64, width: f64) -> Result<Self, SimError> {
        let reach = 1.0 - width / 2.0;
        if !(reach > 0.0) {
            return Err(SimError::InvalidParameter(format!("width {width} leaves no travel")));
        }
        let cubic = (OUTPUT_SPAN_DEG - linear * reach) / reach.powi(3);
        GainCurve::new(linear, cubic)
    }

    pub fn eval(&self, z: f64) -> f64 {
        self.linear * z + self.cubic * z * z * z
    }

    pub fn derivative(&self, z: f64) -> f64 {
        self.linear + 3.0 * self.cubic * z * z
    }

    /// Inverse by bisection to 1e-12.
    pub fn inverse(&self, gamma: f64) -> f64 {
        let (mut lo, mut hi) = (-1.0, 1.0);
        while self.eval(lo) > gamma {
            lo *= 2.0;
        }
        while self.eval(hi) < gamma {
            hi *= 2.0;
        }
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid) < gamma {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Named plant configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Narrow loop, w = 0.04.
    YawLike,
    /// Wide loop, w = 0.12.
    PitchLike,
}

impl Preset {
    pub const ALL: [Preset; 2] = [Preset::YawLike, Preset::PitchLike];

    pub fn width(self) -> f64 {
        match self {
            Preset::YawLike => 0.04,
            Preset::PitchLike => 0.12,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::YawLike => "yaw-like",
            Preset::PitchLike => "pitch-like",
        }
    }

    pub fn plant(self, noise_sigma: f64, seed: u64) -> BacklashPlant {
        let gain = GainCurve::calibrated(DEFAULT_LINEAR_GAIN, self.width()).expect("preset gain is valid");
        BacklashPlant::new(self.width(), gain, noise_sigma, -1.0, 1.0, seed).expect("preset parameters are valid")
    }
}

impl FromStr for Preset {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| SimError::InvalidParameter(format!("unknown preset {s:?} (expected yaw-like or pitch-like)")))
    }
}

/// Play operator with output gain and additive Gaussian measurement noise.
#[derive(Debug, Clone)]
pub struct BacklashPlant {
    width: f64,
    gain: GainCurve,
    noise_sigma: f64,
    q_min: f64,
    q_max: f64,
    state_z: f64,
    seed: u64,
    rng: ChaCha8Rng,
}

impl BacklashPlant {
    pub fn new(width: f64, gain: GainCurve, noise_sigma: f64, q_min: f64, q_max: f64, seed: u64) -> Result<Self, SimError> {
        if !(width >= 0.0 && width.is_finite()) {
            return Err(SimError::InvalidParameter(format!("width {width}")));
        }
        if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
            return Err(SimError::InvalidParameter(format!("noise sigma {noise_sigma}")));
        }
        if !(q_min < q_max) {
            return Err(SimError::InvalidParameter(format!("bounds [{q_min}, {q_max}]")));
        }
        Ok(BacklashPlant {
            width,
            gain,
            noise_sigma,
            q_min,
            q_max,
            state_z: 0.5 * (q_min + q_max),
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn gain(&self) -> &GainCurve {
        &self.gain
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.q_min, self.q_max)
    }

    pub fn state(&self) -> f64 {
        self.state_z
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Fresh copy in the initial state with its own noise stream.
    pub fn clone_with_seed(&self, seed: u64) -> Self {
        BacklashPlant {
            state_z: 0.5 * (self.q_min + self.q_max),
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            ..self.clone()
        }
    }

    /// Same plant without measurement noise, in the initial state.
    pub fn noiseless(&self) -> Self {
        BacklashPlant { noise_sigma: 0.0, ..self.clone_with_seed(self.seed) }
    }

    /// Noise-free output of the ascending or descending branch at `q`
    /// (the play operator fully engaged in that direction).
    pub fn branch_value(&self, q: f64, branch: BranchLabel) -> f64 {
        let half = self.width / 2.0;
        let lo = self.q_min + half;
        let hi = self.q_max - half;
        let z = match branch {
            BranchLabel::Ascending => q - half,
            BranchLabel::Descending => q + half,
        };
        self.gain.eval(z.clamp(lo, hi))
    }

    /// Advances the play operator to input `q` and returns the measured angle.
    pub fn step(&mut self, q: f64) -> Result<f64, SimError> {
        if !(q >= self.q_min && q <= self.q_max) {
            return Err(SimError::OutOfBounds { q, q_min: self.q_min, q_max: self.q_max });
        }
        let half = self.width / 2.0;
        self.state_z = self.state_z.clamp(q - half, q + half);
        let clean = self.gain.eval(self.state_z);
        if self.noise_sigma > 0.0 {
            let noise = Normal::new(0.0, self.noise_sigma).expect("sigma is finite and positive");
            Ok(clean + noise.sample(&mut self.rng))
        } else {
            Ok(clean)
        }
    }

    /// Runs `cycles` reciprocating sweeps of `steps` samples each: up from
    /// `-amplitude` to `+amplitude` in `steps/2` increments, then back down
    /// in another `steps/2`. Plant state carries over between cycles. With
    /// `discard_transient`, a descending half-sweep from `+amplitude` is run
    /// first and not recorded.
    pub fn generate_dataset(
        &mut self,
        cycles: usize,
        steps: usize,
        amplitude: f64,
        discard_transient: bool,
    ) -> Result<CycleDataset, SimError> {
        if cycles < 1 {
            return Err(SimError::InvalidProtocol("at least one cycle is required".into()));
        }
        if steps < 4 || !steps.is_multiple_of(2) {
            return Err(SimError::InvalidProtocol(format!("steps = {steps} must be even and at least 4")));
        }
        if !(amplitude > 0.0) {
            return Err(SimError::InvalidProtocol(format!("amplitude {amplitude} must be positive")));
        }
        let profile = sweep_profile(steps, amplitude);
        if discard_transient {
            for &q in &profile[steps / 2..] {
                self.step(q)?;
            }
        }
        let mut samples = Vec::with_capacity(cycles * steps);
        for c in 0..cycles {
            for (j, &q) in profile.iter().enumerate() {
                let gamma = self.step(q)?;
                samples.push(Sample { cycle_id: c as u32, step_index: j as u32, q, gamma });
            }
        }
        Ok(CycleDataset::new(samples, self.q_min, self.q_max)?)
    }

    /// Noise-free branch inverse: `gain⁻¹(γ) ± w/2`.
    pub fn analytic_inverse(&self, gamma_des: f64, branch: BranchLabel) -> Result<f64, SimError> {
        let unreachable = || SimError::Unreachable { gamma_des, branch };
        if !gamma_des.is_finite() {
            return Err(unreachable());
        }
        let half = self.width / 2.0;
        let z = self.gain.inverse(gamma_des);
        if z < self.q_min + half - 1e-12 || z > self.q_max - half + 1e-12 {
            return Err(unreachable());
        }
        let q = match branch {
            BranchLabel::Ascending => z + half,
            BranchLabel::Descending => z - half,
        };
        Ok(q.clamp(self.q_min, self.q_max))
    }
}

/// Input values of one reciprocating cycle (triangle wave, period `steps`).
pub fn sweep_profile(steps: usize, amplitude: f64) -> Vec<f64> {
    let half = steps / 2;
    let dq = 2.0 * amplitude / half as f64;
    (0..steps)
        .map(|j| {
            if j <= half {
                -amplitude + dq * j as f64
            } else {
                amplitude - dq * (j - half) as f64
            }
        })
        .map(|q: f64| q.clamp(-amplitude, amplitude))
        .collect()
}
