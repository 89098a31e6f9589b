use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use hystkin::io::write_atomic;
use hystkin::metrics::tip_error_um;
use hystkin::simulator::DEFAULT_NOISE_DEG;
use hystkin::{
    evaluate as run_evaluation, load_csv, select_k as run_select_k, solve_inverse, train_hysteresis_model, ActiveModel,
    CycleDataset, Exec, HysteresisModel, Preset, SolverState, TrainConfig,
};
use log::{info, warn};

use crate::config::{self, pick, FileConfig};
use crate::error::{CliError, ErrorCode};
use crate::svg::Chart;
use crate::{EvaluateArgs, GenerateArgs, InvertArgs, ReportArgs, SelectKArgs, TrainArgs};

/// Tip-error bound checked by `report`, micrometres.
pub const TIP_ERROR_BOUND_UM: f64 = 25.0;

pub const RESULTS_HEADER: &str = "rmse_nominal,rmse_compensated,improvement_pct";

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    write_atomic(path, text.as_bytes()).map_err(|e| CliError::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn bounds(q_min: Option<f64>, q_max: Option<f64>, file: &FileConfig) -> (f64, f64) {
    (
        pick(q_min, file.q_min, config::DEFAULT_Q_MIN),
        pick(q_max, file.q_max, config::DEFAULT_Q_MAX),
    )
}

fn load(path: &Path, q_min: f64, q_max: f64) -> Result<CycleDataset, CliError> {
    load_csv(path, q_min, q_max).map_err(|e| {
        let mut err = CliError::from(e);
        err.message = format!("{}: {}", path.display(), err.message);
        err
    })
}

fn split(data: &CycleDataset, train_cycles: usize) -> Result<(CycleDataset, CycleDataset), CliError> {
    Ok(data.train_test_split(train_cycles)?)
}

pub fn generate(a: &GenerateArgs, file: &FileConfig) -> Result<(), CliError> {
    let preset_name = pick(a.preset.clone(), file.preset.clone(), config::DEFAULT_PRESET.to_string());
    let preset: Preset = preset_name.parse().map_err(|e: hystkin::SimError| CliError::config(e.to_string()))?;
    let noise = pick(a.noise, file.noise, DEFAULT_NOISE_DEG);
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(CliError::config(format!("noise {noise} must be a non-negative number")));
    }
    let seed = pick(a.seed, file.seed, config::DEFAULT_SEED);
    let cycles = pick(a.cycles, file.cycles, config::DEFAULT_CYCLES);
    let steps = pick(a.steps, file.steps, config::DEFAULT_STEPS);
    let amplitude = pick(a.amplitude, file.amplitude, config::DEFAULT_AMPLITUDE);
    let discard = a.discard_transient || file.discard_transient.unwrap_or(false);

    let mut plant = preset.plant(noise, seed);
    let data = plant.generate_dataset(cycles, steps, amplitude, discard)?;
    write_file(&a.out, &data.to_csv_string())?;
    info!("wrote {} samples ({} cycles, {}) to {}", data.len(), cycles, preset.name(), a.out.display());
    Ok(())
}

fn train_config(a: &TrainArgs, file: &FileConfig) -> Result<TrainConfig, CliError> {
    let ks = pick(a.k.clone(), file.k.clone(), vec![config::DEFAULT_K]);
    let (kn, kcw, kccw) = match ks.as_slice() {
        [k] => (*k, *k, *k),
        [n, cw, ccw] => (*n, *cw, *ccw),
        other => return Err(CliError::config(format!("k takes one or three values, got {}", other.len()))),
    };
    if kn == 0 || kcw == 0 || kccw == 0 {
        return Err(CliError::config("k must be at least 1"));
    }
    let mut cfg = TrainConfig::new(kn, kcw, kccw, pick(a.seed, file.seed, config::DEFAULT_SEED)).with_exec(Exec::default());
    if let Some(m) = a.max_iters.or(file.max_iters) {
        if m == 0 {
            return Err(CliError::config("max_iters must be at least 1"));
        }
        cfg.max_iters = m;
    }
    Ok(cfg)
}

pub fn train(a: &TrainArgs, file: &FileConfig) -> Result<(), CliError> {
    let cfg = train_config(a, file)?;
    let epsilon = pick(a.epsilon, file.epsilon, SolverState::DEFAULT_EPSILON);
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(CliError::config(format!("epsilon {epsilon} must be positive")));
    }
    let (q_min, q_max) = bounds(a.q_min, a.q_max, file);
    let data = load(&a.data, q_min, q_max)?;
    let train_cycles = pick(a.train_cycles, file.train_cycles, config::DEFAULT_TRAIN_CYCLES);
    let train = if train_cycles == data.cycles() { data } else { split(&data, train_cycles)?.0 };

    let (model, report) = train_hysteresis_model(&train, &cfg)?;
    for (which, fit, _) in report.fits() {
        if !fit.converged {
            warn!("{which} fit stopped after {} iterations without meeting the tolerance", fit.iterations);
        }
    }
    ensure_dir(&a.out)?;
    model.save_bundle(&a.out, epsilon)?;
    write_file(&a.out.join("fit_report.txt"), &report.to_text())?;
    info!("trained K = {:?} on {} cycles, bundle in {}", model.k_counts(), train.cycles(), a.out.display());
    Ok(())
}

pub fn select_k(a: &SelectKArgs, file: &FileConfig) -> Result<(), CliError> {
    let (q_min, q_max) = bounds(a.q_min, a.q_max, file);
    let data = load(&a.data, q_min, q_max)?;
    let data = match a.train_cycles {
        Some(n) if n != data.cycles() => split(&data, n)?.0,
        _ => data,
    };
    let k_min = pick(a.k_min, file.k_min, config::DEFAULT_K_MIN);
    let k_max = pick(a.k_max, file.k_max, config::DEFAULT_K_MAX);
    let seed = pick(a.seed, file.seed, config::DEFAULT_SEED);

    let sel = run_select_k(&data.points(), k_min..=k_max, seed, Exec::default())?;
    for (k, e) in &sel.failures {
        warn!("K = {k} failed: {e}");
    }
    if sel.table.is_empty() {
        return Err(CliError::new(ErrorCode::Em, "every K in the range failed to fit"));
    }

    let mut csv = String::from("k,log_likelihood,n_params,bic,aic,converged\n");
    for row in &sel.table {
        let c = &row.criteria;
        let _ = writeln!(csv, "{},{},{},{},{},{}", row.k, c.log_likelihood, c.n_params, c.bic, c.aic, row.converged);
    }
    let chart = Chart::new("Information criteria", "K", "criterion")
        .line("BIC", "#1f77b4", sel.table.iter().map(|r| (r.k as f64, r.criteria.bic)).collect())
        .line("AIC", "#d62728", sel.table.iter().map(|r| (r.k as f64, r.criteria.aic)).collect());

    ensure_dir(&a.out)?;
    write_file(&a.out.join("bic_aic.csv"), &csv)?;
    write_file(&a.out.join("bic_aic.svg"), &chart.render())?;
    println!("best_k_bic={} best_k_aic={}", sel.best_k_bic, sel.best_k_aic);
    Ok(())
}

pub fn evaluate(a: &EvaluateArgs, file: &FileConfig) -> Result<(), CliError> {
    let (model, _) = HysteresisModel::load_bundle(&a.model)?;
    let data = load(&a.data, model.q_min(), model.q_max())?;
    let train_cycles = pick(a.train_cycles, file.train_cycles, config::DEFAULT_TRAIN_CYCLES);
    let (_, test) = split(&data, train_cycles)?;

    let ev = run_evaluation(&model, &test, Exec::default())?;
    let results = format!("{RESULTS_HEADER}\n{},{},{}\n", ev.rmse_nominal, ev.rmse_compensated, ev.improvement_pct);

    let mut per_sample = String::from("cycle_id,step_index,q,gamma,branch,predicted_nominal,predicted_compensated\n");
    for s in &ev.per_sample {
        let _ = writeln!(
            per_sample,
            "{},{},{},{},{},{},{}",
            s.cycle_id, s.step_index, s.q, s.gamma, s.branch, s.predicted_nominal, s.predicted_compensated
        );
    }

    let (lo, hi) = model.bounds();
    let grid: Vec<f64> = (0..=200).map(|i| lo + (hi - lo) * i as f64 / 200.0).collect();
    let curve = |which: ActiveModel| -> Result<Vec<(f64, f64)>, CliError> {
        grid.iter().map(|&q| Ok((q, model.predict_with(which, q)?))).collect()
    };
    let chart = Chart::new("Test cycles and fitted curves", "input q", "angle (deg)")
        .dots("measured", "#555555", test.samples().iter().map(|s| (s.q, s.gamma)).collect())
        .line("nominal", "#2ca02c", curve(ActiveModel::Nominal)?)
        .line("cw", "#1f77b4", curve(ActiveModel::Cw)?)
        .line("ccw", "#d62728", curve(ActiveModel::Ccw)?);

    ensure_dir(&a.out)?;
    write_file(&a.out.join("results.csv"), &results)?;
    write_file(&a.out.join("per_sample.csv"), &per_sample)?;
    write_file(&a.out.join("loop_overlay.svg"), &chart.render())?;
    println!(
        "rmse_nominal={:.4} rmse_compensated={:.4} improvement_pct={:.2}",
        ev.rmse_nominal, ev.rmse_compensated, ev.improvement_pct
    );
    Ok(())
}

fn parse_targets(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || (i == 0 && line == "gamma_des") {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|_| CliError::config(format!("{} line {}: {line:?} is not a number", path.display(), i + 1)))?;
        out.push(v);
    }
    Ok(out)
}

pub fn invert(a: &InvertArgs, file: &FileConfig) -> Result<(), CliError> {
    let (model, bundle_eps) = HysteresisModel::load_bundle(&a.model)?;
    let mut targets = match &a.targets {
        Some(p) => parse_targets(p)?,
        None => Vec::new(),
    };
    targets.extend(&a.target);
    if targets.is_empty() {
        return Err(CliError::config("no targets given (use --targets FILE or --target VALUE)"));
    }
    if let Some(t) = targets.iter().find(|t| !t.is_finite()) {
        return Err(CliError::config(format!("target {t} is not finite")));
    }

    let mut state = SolverState::for_model(&model)?.with_epsilon(a.epsilon.or(file.epsilon).unwrap_or(bundle_eps));
    if let Some(m) = a.max_iters {
        state.max_iters = m;
    }
    state.q_prev = model.clamp(a.q_prev.unwrap_or(0.5 * (model.q_min() + model.q_max())));
    state.validate()?;

    let mut csv = String::from("gamma_des,q_star,gamma_achieved,iterations,branch_summary,converged\n");
    let mut missed = Vec::new();
    for &t in &targets {
        let sol = solve_inverse(&model, &mut state, t)?;
        if !sol.converged {
            missed.push(t);
        }
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            t,
            sol.q_star,
            sol.gamma_achieved,
            sol.iterations,
            sol.branch_summary(),
            sol.converged
        );
    }
    write_file(&a.out, &csv)?;
    if !missed.is_empty() {
        let list: Vec<String> = missed.iter().map(|t| t.to_string()).collect();
        return Err(CliError::new(
            ErrorCode::Unreachable,
            format!("{} of {} targets not reached within epsilon: {}", missed.len(), targets.len(), list.join(" ")),
        ));
    }
    info!("solved {} targets into {}", targets.len(), a.out.display());
    Ok(())
}

/// Parsed `results.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Results {
    pub rmse_nominal: f64,
    pub rmse_compensated: f64,
    pub improvement_pct: f64,
}

pub fn read_results(path: &Path) -> Result<Results, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut lines = text.lines();
    let bad = |why: &str| CliError::new(ErrorCode::Io, format!("{}: {why}", path.display()));
    if lines.next() != Some(RESULTS_HEADER) {
        return Err(bad("unexpected header"));
    }
    let values: Vec<f64> = lines
        .next()
        .ok_or_else(|| bad("missing value row"))?
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad("non-numeric value"))?;
    match values.as_slice() {
        [n, c, i] => Ok(Results { rmse_nominal: *n, rmse_compensated: *c, improvement_pct: *i }),
        _ => Err(bad("expected three values")),
    }
}

pub fn report(a: &ReportArgs, file: &FileConfig) -> Result<(), CliError> {
    let arm = pick(a.arm_length_mm, file.arm_length_mm, config::DEFAULT_ARM_LENGTH_MM);
    if !(arm > 0.0 && arm.is_finite()) {
        return Err(CliError::config(format!("arm length {arm} mm must be positive")));
    }
    let r = read_results(&a.dir.join("results.csv"))?;
    let tip_nom = tip_error_um(r.rmse_nominal, arm);
    let tip_comp = tip_error_um(r.rmse_compensated, arm);

    let mut text = String::new();
    let _ = writeln!(text, "rmse_nominal_deg {:.4}", r.rmse_nominal);
    let _ = writeln!(text, "rmse_compensated_deg {:.4}", r.rmse_compensated);
    let _ = writeln!(text, "improvement_pct {:.2}", r.improvement_pct);
    let _ = writeln!(text, "arm_length_mm {arm}");
    let _ = writeln!(text, "tip_error_nominal_um {tip_nom:.2}");
    let _ = writeln!(text, "tip_error_compensated_um {tip_comp:.2}");
    let _ = writeln!(text, "tip_error_bound_um {TIP_ERROR_BOUND_UM}");
    let _ = writeln!(text, "within_bound {}", if tip_comp <= TIP_ERROR_BOUND_UM { "yes" } else { "no" });
    if let Some(model_dir) = &a.model {
        let (model, eps) = HysteresisModel::load_bundle(model_dir)?;
        let (kn, kcw, kccw) = model.k_counts();
        let _ = writeln!(text, "k_nominal {kn}\nk_cw {kcw}\nk_ccw {kccw}\nepsilon_deg {eps}");
        let fit = model_dir.join("fit_report.txt");
        if fit.exists() {
            let body = std::fs::read_to_string(&fit).map_err(|e| CliError::io(&fit, e))?;
            text.push('\n');
            text.push_str(&body);
            if !body.ends_with('\n') {
                text.push('\n');
            }
        }
    }
    let out: PathBuf = a.out.clone().unwrap_or_else(|| a.dir.join("report.txt"));
    write_file(&out, &text)?;
    print!("{text}");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("results.csv");
        std::fs::write(&p, format!("{RESULTS_HEADER}\n2.5,0.25,90\n")).unwrap();
        let r = read_results(&p).unwrap();
        assert_eq!(r, Results { rmse_nominal: 2.5, rmse_compensated: 0.25, improvement_pct: 90.0 });
    }

    #[test]
    fn results_with_wrong_header_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("results.csv");
        std::fs::write(&p, "a,b,c\n1,2,3\n").unwrap();
        assert_eq!(read_results(&p).unwrap_err().code, ErrorCode::Io);
    }

    #[test]
    fn targets_file_skips_header_and_comments() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.txt");
        std::fs::write(&p, "gamma_des\n# warm-up\n10\n\n-12.5\n").unwrap();
        assert_eq!(parse_targets(&p).unwrap(), vec![10.0, -12.5]);
        std::fs::write(&p, "10\nten\n").unwrap();
        assert_eq!(parse_targets(&p).unwrap_err().code, ErrorCode::Config);
    }
}
