//! Scenario execution.

use std::io::Write;
use std::path::{Path, PathBuf};

use ptgeom::control::optimize_controls;
use ptgeom::dynamics::evolve_pair;
use ptgeom::lindblad::integrate_master_with;
use ptgeom::metrology::{cfi_vs_time_with, computational_povm, metric_vs_time_with, MetricOptions};
use ptgeom::models::{classify_phase, phase_scan, two_level_eigenvalues, PHASE_TOL};
use ptgeom::{
    ControlSchedule, DensityMatrix, DynamicsKind, LeftStateVector, LindbladSpec, Model, ModelSpec, OptimizeOptions,
    ParamPoint, Phase, Stepping, TimeGrid, TwoLevelPTParams, YangLeeParams,
};

use crate::config::{RunConfig, Scenario};
use crate::error::{CliError, CliResult};
use crate::output::{number, Outputs, Table};

/// Diagnostics go to `diag`; write failures there are ignored.
macro_rules! note {
    ($diag:expr, $($arg:tt)*) => {
        let _ = writeln!($diag, $($arg)*);
    };
}

fn time_grid(config: &RunConfig) -> CliResult<TimeGrid> {
    let g = config.grid;
    Ok(TimeGrid::new(g.t_start, g.t_end, g.n_steps)?)
}

fn model_spec(config: &RunConfig, model: Model) -> ModelSpec {
    ModelSpec::new(model).with_initial_state(config.initial()).with_gamma_policy(config.gamma_policy)
}

fn metric_options(config: &RunConfig) -> MetricOptions {
    MetricOptions { fd_step: config.fd_step, ..MetricOptions::default() }
}

fn report_phase(model: &Model, diag: &mut dyn Write) -> CliResult<()> {
    let label = classify_phase(&model.hamiltonian(), PHASE_TOL)?;
    note!(diag, "phase: {} (max |Im E| {:.3e}, min gap {:.3e})", label.label.as_str(), label.max_abs_im, label.min_gap);
    Ok(())
}

fn spectrum(config: &RunConfig, diag: &mut dyn Write, out: &mut Outputs) -> CliResult<()> {
    let Model::TwoLevel(p) = config.model else { unreachable!("spectrum configs carry a two-level model") };
    report_phase(&config.model, diag)?;
    let scan = config.ratio_scan;
    let mut table = Table::new(["ratio", "re_E_plus", "im_E_plus", "re_E_minus", "im_E_minus"]);
    for k in 0..=scan.steps {
        let ratio = scan.start + (scan.end - scan.start) * k as f64 / scan.steps as f64;
        let (plus, minus) = two_level_eigenvalues(&TwoLevelPTParams { s: p.s, r: ratio * p.s });
        table.push_numbers(&[ratio, plus.re, plus.im, minus.re, minus.im]);
    }
    out.add(config.output.clone(), table);
    Ok(())
}

fn phase_map(config: &RunConfig, diag: &mut dyn Write, out: &mut Outputs) -> CliResult<()> {
    let g = config.phase_grid;
    let axis = |lo: f64, hi: f64, k: usize| lo + (hi - lo) * k as f64 / (g.points - 1) as f64;
    let mut points = Vec::with_capacity(g.points * g.points);
    for i in 0..g.points {
        for j in 0..g.points {
            let values = vec![axis(g.lam_min, g.lam_max, i), axis(g.kappa_min, g.kappa_max, j)];
            points.push(ParamPoint::new(vec!["lam".into(), "kappa".into()], values)?);
        }
    }
    let labels = phase_scan(&config.model, &points, g.tol)?;
    let mut table = Table::new(["lam", "kappa", "phase", "max_abs_im", "min_gap"]);
    let mut counts = [0usize; 3];
    for (point, label) in &labels {
        counts[label.label as usize] += 1;
        table.push(vec![
            number(point.values()[0]),
            number(point.values()[1]),
            label.label.as_str().to_string(),
            number(label.max_abs_im),
            number(label.min_gap),
        ]);
    }
    note!(
        diag,
        "phase map N={}: {} {}, {} {}, {} {}",
        config.model.n_sites(),
        counts[Phase::Unbroken as usize],
        Phase::Unbroken.as_str(),
        counts[Phase::ExceptionalPoint as usize],
        Phase::ExceptionalPoint.as_str(),
        counts[Phase::Broken as usize],
        Phase::Broken.as_str()
    );
    out.add(config.output.clone(), table);
    Ok(())
}

fn evolve(config: &RunConfig, diag: &mut dyn Write, out: &mut Outputs) -> CliResult<()> {
    report_phase(&config.model, diag)?;
    let spec = model_spec(config, config.model);
    let grid = time_grid(config)?;
    let psi0 = spec.initial()?;
    let res = evolve_pair(&config.model.hamiltonian(), &psi0, &LeftStateVector::from(&psi0), &grid, Stepping::Auto)?;
    let dim = config.model.dim();
    let mut header = vec!["t".to_string(), "norm".into(), "pairing_re".into(), "pairing_im".into()];
    for prefix in ["psi", "psitilde"] {
        for k in 0..dim {
            header.push(format!("{prefix}_{k}_re"));
            header.push(format!("{prefix}_{k}_im"));
        }
    }
    let mut table = Table::new(header);
    for (k, t) in grid.times().into_iter().enumerate() {
        let (right, left) = (&res.right_states[k], &res.left_states[k]);
        let pairing = left.overlap(right);
        let mut row = vec![t, res.norm_factor[k], pairing.re, pairing.im];
        row.extend(right.amplitudes().iter().flat_map(|a| [a.re, a.im]));
        row.extend(left.amplitudes().iter().flat_map(|a| [a.re, a.im]));
        table.push_numbers(&row);
    }
    note!(diag, "max pairing error {:.3e}", res.max_pairing_error());
    out.add(config.output.clone(), table);
    Ok(())
}

fn metric(config: &RunConfig, diag: &mut dyn Write, out: &mut Outputs) -> CliResult<()> {
    report_phase(&config.model, diag)?;
    let spec = model_spec(config, config.model);
    let series = metric_vs_time_with(
        &spec,
        DynamicsKind::SchrodingerBiorthogonal,
        &config.param,
        &time_grid(config)?,
        &metric_options(config),
    )?;
    let mut table = Table::new(["t", "g"]);
    for (t, g) in series.times.iter().zip(&series.values) {
        table.push_numbers(&[*t, *g]);
    }
    note!(diag, "metric g_{0}{0}: peak {1:.6e} at t = {2}", config.param, series.peak(), series.times[series.argmax()]);
    out.add(config.output.clone(), table);
    Ok(())
}

/// QFI and computational-basis CFI of one dissipative run.
fn lindblad_series(config: &RunConfig, spec: &ModelSpec, diag: &mut dyn Write) -> CliResult<Table> {
    let grid = time_grid(config)?;
    let opts = metric_options(config);
    let qfi = metric_vs_time_with(spec, DynamicsKind::Lindblad, &config.param, &grid, &opts)?;
    let cfi = cfi_vs_time_with(spec, &config.param, &grid, &computational_povm(spec.model.dim()), &opts)?;
    let lspec = LindbladSpec::from_model(&spec.model, spec.gamma_policy)?;
    let states = integrate_master_with(&lspec, &DensityMatrix::pure(&spec.initial()?), &grid, Stepping::Auto)?;
    let drift = states.iter().map(|rho| (rho.trace() - 1.0).abs()).fold(0.0, f64::max);
    note!(
        diag,
        "QFI peak {:.6e} at t = {}, final {:.6e}, max trace drift {drift:.3e}",
        qfi.peak(),
        qfi.times[qfi.argmax()],
        qfi.values.last().copied().unwrap_or(f64::NAN)
    );
    let mut table = Table::new(["t", "qfi", "cfi"]);
    for ((t, f), c) in qfi.times.iter().zip(&qfi.values).zip(&cfi.values) {
        table.push_numbers(&[*t, *f, *c]);
    }
    Ok(table)
}

fn lindblad_metric(config: &RunConfig, diag: &mut dyn Write, out: &mut Outputs) -> CliResult<()> {
    if config.ratios.is_empty() {
        report_phase(&config.model, diag)?;
        let table = lindblad_series(config, &model_spec(config, config.model), diag)?;
        out.add(config.output.clone(), table);
        return Ok(());
    }
    let Model::TwoLevel(p) = config.model else { unreachable!("ratio sweeps are validated as two-level") };
    for &ratio in &config.ratios {
        let model = Model::TwoLevel(TwoLevelPTParams { s: p.r / ratio, r: p.r });
        note!(diag, "r/s = {ratio}:");
        report_phase(&model, diag)?;
        let table = lindblad_series(config, &model_spec(config, model), diag)?;
        out.add(format!("{}_ratio-{ratio}", config.output), table);
    }
    Ok(())
}

fn control_opt(config: &RunConfig, diag: &mut dyn Write, out: &mut Outputs) -> CliResult<()> {
    let c = config.control;
    let spec = model_spec(config, config.model);
    let rho0 = DensityMatrix::pure(&spec.initial()?);
    let schedule = ControlSchedule::zeros(c.horizon, c.intervals, c.amplitude_bound)?;
    let opts = OptimizeOptions { max_iter: c.max_iter, ..OptimizeOptions::default() };
    let report = optimize_controls(&spec, &schedule, &config.param, &rho0, &opts)?;
    note!(
        diag,
        "control: {} iterations, converged {}, QFI {:.6e} -> {:.6e}",
        report.iterations,
        report.converged,
        report.initial_objective(),
        report.final_objective()
    );
    if let Some(failure) = report.failure {
        return Err(CliError::Numerical(failure));
    }
    let mut trace = Table::new(["step", "objective"]);
    for (k, f) in report.objective_trace.iter().enumerate() {
        trace.push(vec![k.to_string(), number(*f)]);
    }
    let dt = report.final_schedule.interval_length();
    let mut amps = Table::new(["interval", "t_start", "u_x", "u_y", "u_z"]);
    for (k, u) in report.final_schedule.amplitudes().iter().enumerate() {
        amps.push(vec![k.to_string(), number(k as f64 * dt), number(u[0]), number(u[1]), number(u[2])]);
    }
    out.add(format!("{}_objective", config.output), trace);
    out.add(format!("{}_schedule", config.output), amps);
    Ok(())
}

fn yang_lee(config: &RunConfig, diag: &mut dyn Write, out: &mut Outputs) -> CliResult<()> {
    let Model::YangLee(base) = &config.model else { unreachable!("yang-lee configs carry a Yang-Lee model") };
    for &n in &config.sites {
        let model = Model::YangLee(YangLeeParams::new(base.lam, base.kappa, n)?);
        note!(diag, "N = {n}:");
        report_phase(&model, diag)?;
        let table = lindblad_series(config, &model_spec(config, model), diag)?;
        out.add(format!("{}_N{n}", config.output), table);
    }
    Ok(())
}

/// Runs the scenario and returns its tables without touching the filesystem.
pub fn execute(config: &RunConfig, diag: &mut dyn Write) -> CliResult<Outputs> {
    let mut out = Outputs::default();
    match config.scenario {
        Scenario::Spectrum => spectrum(config, diag, &mut out)?,
        Scenario::PhaseMap => phase_map(config, diag, &mut out)?,
        Scenario::Evolve => evolve(config, diag, &mut out)?,
        Scenario::Metric => metric(config, diag, &mut out)?,
        Scenario::LindbladMetric => lindblad_metric(config, diag, &mut out)?,
        Scenario::ControlOpt => control_opt(config, diag, &mut out)?,
        Scenario::YangLee => yang_lee(config, diag, &mut out)?,
    }
    Ok(out)
}

/// Runs the scenario and writes one CSV per series into `out_dir`.
pub fn run(config: &RunConfig, out_dir: &Path, diag: &mut dyn Write) -> CliResult<Vec<PathBuf>> {
    let outputs = execute(config, diag)?;
    let written = outputs.write_all(out_dir)?;
    for path in &written {
        note!(diag, "wrote {}", path.display());
    }
    Ok(written)
}
