//! Hysteresis-compensated inverse kinematics.
//!
//! The search minimizes `½(γ_des − γ̂(q))²` over `q ∈ [q_min, q_max]` with
//! the fixed-point update `q ← q + α·(γ_des − γ̂(q))`. `γ̂` comes from the
//! cw model while `q` is increasing and from the ccw model while it is
//! decreasing; `α` is chosen by Armijo backtracking.

use super::{ActiveModel, HysteresisModel, IkError};

/// Probe step for finite-difference slopes.
const PROBE: f64 = 1e-5;
/// Largest backtracking exponent tried by the line search.
const MAX_BACKTRACKS: i32 = 30;
/// Points in the restart grid over the input bounds.
const GRID_POINTS: usize = 101;

/// Line search found no acceptable step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepFailure;

impl std::fmt::Display for StepFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("no step satisfies the Armijo condition")
    }
}

impl std::error::Error for StepFailure {}

/// Armijo backtracking along `direction` from `q`.
///
/// Returns the largest `α ∈ {α₀·βⁿ : n = 0..30}` with
/// `cost(q + α·d) ≤ cost(q) − c·α·|d|·s`, where `s` is the finite-difference
/// descent rate of `cost` along `sign(d)` (probe 1e-5). A locally uphill
/// probe sets `s = 0`; the accepted step must still lower the cost. Fails
/// when no candidate qualifies.
pub fn armijo_step(
    cost: impl Fn(f64) -> f64,
    q: f64,
    direction: f64,
    alpha_0: f64,
    c: f64,
    beta: f64,
) -> Result<f64, StepFailure> {
    armijo_search(&cost, q, direction, alpha_0, c, beta, |_| true)
}

/// [`armijo_step`] with an extra acceptance predicate on the candidate point.
fn armijo_search(
    cost: &impl Fn(f64) -> f64,
    q: f64,
    direction: f64,
    alpha_0: f64,
    c: f64,
    beta: f64,
    admissible: impl Fn(f64) -> bool,
) -> Result<f64, StepFailure> {
    if !(direction != 0.0 && direction.is_finite() && alpha_0 > 0.0) {
        return Err(StepFailure);
    }
    let f0 = cost(q);
    let descent_rate = ((f0 - cost(q + PROBE * direction.signum())) / PROBE).max(0.0);
    let mut alpha = alpha_0;
    for _ in 0..=MAX_BACKTRACKS {
        let candidate = q + alpha * direction;
        let fc = cost(candidate);
        if fc < f0 && fc <= f0 - c * alpha * direction.abs() * descent_rate && admissible(candidate) {
            return Ok(alpha);
        }
        alpha *= beta;
    }
    Err(StepFailure)
}

/// Persistent solver configuration and the last commanded input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverState {
    /// Last commanded input; updated by every [`solve_inverse`] call.
    pub q_prev: f64,
    /// Branch the actuator used to reach `q_prev`, if known.
    pub last_branch: Option<ActiveModel>,
    /// Convergence tolerance on the angle, degrees.
    pub epsilon: f64,
    pub max_iters: usize,
    /// Initial line-search step, input units per degree.
    pub alpha_0: f64,
    pub armijo_c: f64,
    pub armijo_beta: f64,
}

impl SolverState {
    pub const DEFAULT_EPSILON: f64 = 0.05;
    pub const DEFAULT_MAX_ITERS: usize = 200;

    /// Defaults with `alpha_0 = 1/ĝ`, `ĝ` the median slope of the nominal
    /// model over its input bounds.
    pub fn for_model(model: &HysteresisModel) -> Result<Self, IkError> {
        let slope = model.median_nominal_slope()?.abs();
        let alpha_0 = if slope > 1e-9 && slope.is_finite() { 1.0 / slope } else { 1.0 };
        Ok(SolverState {
            q_prev: 0.0,
            last_branch: None,
            epsilon: Self::DEFAULT_EPSILON,
            max_iters: Self::DEFAULT_MAX_ITERS,
            alpha_0,
            armijo_c: 1e-4,
            armijo_beta: 0.5,
        })
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    /// Places the actuator at `q`, reached while moving in `branch`.
    pub fn at(mut self, q: f64, branch: Option<ActiveModel>) -> Self {
        self.q_prev = q;
        self.last_branch = branch;
        self
    }

    pub fn validate(&self) -> Result<(), IkError> {
        let bad = |m: String| Err(IkError::InvalidParameter(m));
        if !(self.epsilon > 0.0) {
            return bad(format!("epsilon {} must be positive", self.epsilon));
        }
        if !(self.armijo_beta > 0.0 && self.armijo_beta < 1.0) {
            return bad(format!("armijo_beta {} must lie in (0, 1)", self.armijo_beta));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return bad(format!("armijo_c {} must lie in (0, 1)", self.armijo_c));
        }
        if !(self.alpha_0 > 0.0 && self.alpha_0.is_finite()) {
            return bad(format!("alpha_0 {} must be positive", self.alpha_0));
        }
        if !self.q_prev.is_finite() {
            return bad("q_prev is not finite".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NominalInverse {
    pub q: f64,
    pub gamma: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InverseSolution {
    pub q_star: f64,
    pub gamma_achieved: f64,
    pub iterations: usize,
    /// Model used at each iterate (entry 0 is the starting point).
    pub branch_trace: Vec<ActiveModel>,
    /// Iterates, aligned with `branch_trace`.
    pub q_trace: Vec<f64>,
    pub converged: bool,
}

impl InverseSolution {
    /// Compact run-length summary of the branch trace, e.g. `cw*7`.
    pub fn branch_summary(&self) -> String {
        let mut parts: Vec<(ActiveModel, usize)> = Vec::new();
        for b in &self.branch_trace {
            match parts.last_mut() {
                Some((last, n)) if last == b => *n += 1,
                _ => parts.push((*b, 1)),
            }
        }
        parts.iter().map(|(b, n)| format!("{b}*{n}")).collect::<Vec<_>>().join(">")
    }
}

/// One regressor seen as a function of `q` clamped to the model bounds.
struct Curve<'a> {
    model: &'a HysteresisModel,
    which: ActiveModel,
    target: f64,
}

impl Curve<'_> {
    fn value(&self, q: f64) -> Result<f64, IkError> {
        self.model.predict_with(self.which, self.model.clamp(q))
    }

    fn residual(&self, q: f64) -> Result<f64, IkError> {
        Ok(self.target - self.value(q)?)
    }

    /// Secant slope of the nominal map over one grid cell around `q`.
    fn slope(&self, q: f64) -> Result<f64, IkError> {
        let (lo, hi) = self.model.bounds();
        let h = (hi - lo) / (GRID_POINTS - 1) as f64;
        let (a, b) = ((q - h).max(lo), (q + h).min(hi));
        let nominal = self.model.nominal();
        Ok((nominal.predict_mean(b)? - nominal.predict_mean(a)?) / (b - a))
    }

    /// Descent direction `±(γ_des − γ̂)`, flipped where the curve decreases.
    fn direction(&self, q: f64) -> Result<f64, IkError> {
        let r = self.residual(q)?;
        Ok(if self.slope(q)? < 0.0 { -r } else { r })
    }

    /// Armijo step along `direction`; a step may not carry the residual
    /// across zero by more than `epsilon`.
    fn line_search(&self, q: f64, direction: f64, state: &SolverState) -> Option<f64> {
        let r0 = self.residual(q).ok()?;
        let cost = |x: f64| match self.residual(x) {
            Ok(r) => 0.5 * r * r,
            Err(_) => f64::INFINITY,
        };
        let admissible = |x: f64| match self.residual(x) {
            Ok(r) => r * r0 >= 0.0 || r.abs() < state.epsilon,
            Err(_) => false,
        };
        armijo_search(&cost, q, direction, state.alpha_0, state.armijo_c, state.armijo_beta, admissible).ok()
    }
}

fn pinned_outward(model: &HysteresisModel, q: f64, direction: f64) -> bool {
    (q <= model.q_min() && direction < 0.0) || (q >= model.q_max() && direction > 0.0)
}

/// Outcome of one damped fixed-point run on a single curve.
struct Descent {
    q: f64,
    residual: f64,
    iterations: usize,
    converged: bool,
    /// The run stopped against a bound while still pointing outward.
    pinned: bool,
}

fn descend(curve: &Curve<'_>, start: f64, state: &SolverState, max_iters: usize) -> Result<Descent, IkError> {
    let model = curve.model;
    let mut q = model.clamp(start);
    let mut best = (f64::INFINITY, q);
    let mut iterations = 0;
    let mut pinned = false;
    loop {
        let r = curve.residual(q)?;
        if r.abs() < best.0 {
            best = (r.abs(), q);
        }
        if r.abs() < state.epsilon {
            return Ok(Descent { q, residual: r, iterations, converged: true, pinned: false });
        }
        if iterations >= max_iters {
            break;
        }
        let d = curve.direction(q)?;
        let step = curve.line_search(q, d, state).map(|a| model.clamp(q + a * d));
        match step {
            Some(next) if next != q => q = next,
            _ => {
                pinned = pinned_outward(model, q, d);
                break;
            }
        }
        iterations += 1;
    }
    let q = best.1;
    Ok(Descent { q, residual: curve.residual(q)?, iterations, converged: false, pinned })
}

/// Restart-grid point in `[a, b]` (either order) with the smallest absolute
/// residual, if the interval contains any.
fn grid_best(curve: &Curve<'_>, a: f64, b: f64) -> Result<Option<(f64, f64)>, IkError> {
    let (lo, hi) = curve.model.bounds();
    let (a, b) = (a.min(b), a.max(b));
    let mut best: Option<(f64, f64)> = None;
    for i in 0..GRID_POINTS {
        let q = lo + (hi - lo) * i as f64 / (GRID_POINTS - 1) as f64;
        if q < a || q > b {
            continue;
        }
        let r = curve.residual(q)?.abs();
        if best.is_none_or(|(_, rb)| r < rb) {
            best = Some((q, r));
        }
    }
    Ok(best)
}

/// Solves `γ̂_nominal(q) = γ_des` by damped fixed-point iteration from
/// `state.q_prev`. A run that stalls away from a root is restarted once
/// from the best point of a uniform grid. Returns the best iterate; fails
/// with `Unreachable` when the search stalls against an input bound.
pub fn nominal_inverse(model: &HysteresisModel, gamma_des: f64, state: &SolverState) -> Result<NominalInverse, IkError> {
    if !gamma_des.is_finite() {
        return Err(IkError::NonFiniteTarget);
    }
    state.validate()?;
    let curve = Curve { model, which: ActiveModel::Nominal, target: gamma_des };
    let mut run = descend(&curve, state.q_prev, state, state.max_iters)?;
    let mut iterations = run.iterations;
    if !run.converged && iterations < state.max_iters {
        let (lo, hi) = model.bounds();
        let start = grid_best(&curve, lo, hi)?.map_or(run.q, |(q, _)| q);
        let restart = descend(&curve, start, state, state.max_iters - iterations)?;
        iterations += restart.iterations;
        if restart.converged || restart.residual.abs() <= run.residual.abs() {
            run = restart;
        }
    }
    if !run.converged && run.pinned {
        return Err(IkError::Unreachable { gamma_des, q: run.q, residual: run.residual });
    }
    Ok(NominalInverse { q: run.q, gamma: gamma_des - run.residual, iterations, converged: run.converged })
}

/// Hysteresis-compensated inverse.
///
/// If the actuator already produces `γ_des` at `state.q_prev` (evaluated on
/// the branch it arrived on) the call returns immediately. Otherwise the
/// search starts at the nominal-model inverse and iterates on the cw model
/// while moving up and on the ccw model while moving down. The result is
/// clamped to the model bounds; unreachable targets give the boundary
/// solution with `converged = false`. `state.q_prev` and
/// `state.last_branch` are updated on return.
pub fn solve_inverse(model: &HysteresisModel, state: &mut SolverState, gamma_des: f64) -> Result<InverseSolution, IkError> {
    if !gamma_des.is_finite() {
        return Err(IkError::NonFiniteTarget);
    }
    state.validate()?;
    let q_prev = model.clamp(state.q_prev);
    let held = state.last_branch.unwrap_or(ActiveModel::Nominal);
    let curve = |which| Curve { model, which, target: gamma_des };

    let here = curve(held).value(q_prev)?;
    if (gamma_des - here).abs() < state.epsilon {
        state.q_prev = q_prev;
        return Ok(InverseSolution {
            q_star: q_prev,
            gamma_achieved: here,
            iterations: 0,
            branch_trace: vec![held],
            q_trace: vec![q_prev],
            converged: true,
        });
    }

    let q0 = match nominal_inverse(model, gamma_des, state) {
        Ok(n) => n.q,
        Err(IkError::Unreachable { q, .. }) => q,
        Err(e) => return Err(e),
    };
    let mut branch = match ActiveModel::for_motion(q_prev, q0) {
        ActiveModel::Nominal => held,
        b => b,
    };
    // The actuator passes every point between q_prev and q0 on this branch,
    // so a sign change on the way means the target lies there.
    let mut q = q0;
    if branch != ActiveModel::Nominal {
        let c = curve(branch);
        if c.residual(q_prev)? * c.residual(q0)? < 0.0 {
            if let Some((g, _)) = grid_best(&c, q_prev, q0)? {
                q = g;
            }
        }
    }
    let mut branch_trace = vec![branch];
    let mut q_trace = vec![q];
    let mut iterations = 0;
    let mut converged = false;
    loop {
        let r = curve(branch).residual(q)?;
        if r.abs() < state.epsilon {
            converged = true;
            break;
        }
        if iterations >= state.max_iters {
            break;
        }
        let d = curve(branch).direction(q)?;
        let next = if d > 0.0 { ActiveModel::Cw } else { ActiveModel::Ccw };
        // Re-derive the direction on the branch the step would move along.
        let d_next = if next == branch { d } else { curve(next).direction(q)? };
        if d_next.signum() != d.signum() {
            break;
        }
        let step = curve(next).line_search(q, d_next, state).map(|a| model.clamp(q + a * d_next));
        match step {
            Some(q_new) if q_new != q => {
                q = q_new;
                branch = next;
            }
            _ => {
                // Flat stretch: jump ahead along the direction of travel.
                let (lo, hi) = model.bounds();
                let ahead = if d_next > 0.0 { (q, hi) } else { (lo, q) };
                match grid_best(&curve(next), ahead.0, ahead.1)? {
                    Some((g, rg)) if g != q && rg < r.abs() => {
                        q = g;
                        branch = next;
                    }
                    _ => break,
                }
            }
        }
        iterations += 1;
        branch_trace.push(branch);
        q_trace.push(q);
    }

    let gamma_achieved = curve(branch).value(q)?;
    state.q_prev = q;
    state.last_branch = Some(branch);
    if !converged {
        log::debug!("target {gamma_des} deg not reached: q = {q}, residual {}", gamma_des - gamma_achieved);
    }
    Ok(InverseSolution { q_star: q, gamma_achieved, iterations, branch_trace, q_trace, converged })
}
