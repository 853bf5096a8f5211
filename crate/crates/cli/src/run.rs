//! Subcommand implementations.

use std::f64::consts::PI;
use std::path::Path;

use quench_core::config::{ComboSpec, RunConfig, TomoTarget};
use quench_core::experiments::{
    self, analytical_loschmidt, finite_size_scan, periodicity_grid, periodicity_study, Combos, Estimator,
    LoschmidtRun, ScanMode, SweepResult, TomoPrep,
};
use quench_core::readout::{rethreshold_study, study_batches, RethresholdConfig};
use quench_core::validate::oracle_suite;
use quench_core::{load_config, InitSource};

use crate::output::{destination, emit, Cell, Metadata, Table};
use crate::{Command, Common};

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Oracle(String),
    Io(String),
}

impl From<quench_core::Error> for Failure {
    fn from(e: quench_core::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

fn name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Loschmidt { .. } => "loschmidt",
        Command::Magnetization { .. } => "magnetization",
        Command::Rabi { .. } => "rabi",
        Command::Tomo { .. } => "tomo",
        Command::Rethreshold { .. } => "rethreshold",
        Command::FiniteSize { .. } => "finite-size",
        Command::Periodicity => "periodicity",
        Command::Validate => "validate",
    }
}

/// Configuration file plus flag overrides.
fn resolve(common: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = match &common.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(n) = common.n {
        cfg.n = n;
    }
    if let Some(t) = &common.theta {
        cfg.theta = t.parse().map_err(|e: String| Failure::Config(format!("--theta: {e}")))?;
    }
    if let Some(s) = common.shots {
        cfg.shots = s;
    }
    if common.seed.is_some() {
        cfg.seed = common.seed;
    }
    if common.ideal {
        cfg.noise.enabled = false;
    }
    Ok(cfg)
}

/// Whether a sweep draws any randomness.
fn stochastic(cfg: &RunConfig) -> bool {
    cfg.noise.enabled || !cfg.readout.is_ideal() || cfg.estimator == Estimator::Sampled || cfg.init == InitSource::MaximallyMixed
}

fn require_seed(cfg: &RunConfig, what: &str) -> Result<(), Failure> {
    if cfg.seed.is_none() {
        return Err(Failure::Config(format!("{what} is stochastic; pass --seed (or `seed =` in the config)")));
    }
    Ok(())
}

fn combos(spec: &Option<String>, cfg: &RunConfig) -> Result<Combos, Failure> {
    let parsed = match spec {
        Some(s) => s.parse().map_err(|e: String| Failure::Config(format!("--combos: {e}")))?,
        None => cfg.combos.clone(),
    };
    Ok(match parsed {
        ComboSpec::All => Combos::All,
        ComboSpec::List(l) => Combos::List(l),
    })
}

pub fn dispatch(common: &Common, cmd: &Command) -> Result<(), Failure> {
    let cfg = resolve(common)?;
    if let Some(k) = common.parallel {
        if k == 0 {
            return Err(Failure::Config("--parallel must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Failure::Config(format!("thread pool: {e}")))?;
    }
    let sub = name(cmd);
    let (table, summary) = match cmd {
        Command::Loschmidt { combos: c } => loschmidt(&cfg, &combos(c, &cfg)?)?,
        Command::Magnetization { combos: c } => magnetization(&cfg, &combos(c, &cfg)?)?,
        Command::Rabi { qubit } => rabi(&cfg, qubit.unwrap_or(cfg.qubit))?,
        Command::Tomo { target, exact } => tomo(&cfg, target.as_deref(), *exact)?,
        Command::Rethreshold { voltages } => rethreshold(&cfg, voltages.as_deref())?,
        Command::FiniteSize { n_min, n_max, angle } => finite_size(*n_min, *n_max, angle.unwrap_or(PI / 2.0))?,
        Command::Periodicity => periodicity(&cfg)?,
        Command::Validate => validate()?,
    };
    let meta = Metadata::new(sub, cfg.seed, &format!("{cmd:?}"), cfg.echo());
    let bytes = table.render(&meta, common.format).map_err(Failure::Io)?;
    let dest = destination(common.output.as_deref(), sub, common.format);
    emit(&bytes, dest.as_deref()).map_err(|e| Failure::Io(e.to_string()))?;
    if let Some(p) = &dest {
        log::info!("wrote {}", p.display());
    }
    eprintln!("{sub}: {summary}");
    if let Command::Validate = cmd {
        let failed: Vec<String> = table
            .rows
            .iter()
            .filter(|r| r[1] == Cell::Bool(false))
            .map(|r| match &r[0] {
                Cell::Str(s) => s.clone(),
                _ => String::new(),
            })
            .collect();
        if !failed.is_empty() {
            return Err(Failure::Oracle(failed.join(", ")));
        }
    }
    Ok(())
}

const SWEEP_COLUMNS: &[&str] =
    &["experiment", "N", "combo", "theta_rad", "observable", "mean", "stderr", "shots_total", "shots_retained"];

fn sweep_rows(table: &mut Table, curves: &[SweepResult]) {
    for c in curves {
        for p in &c.points {
            table.push(vec![
                c.experiment.as_str().into(),
                c.n.into(),
                c.combo.as_str().into(),
                p.theta.into(),
                c.observable.as_str().into(),
                p.estimate.mean.into(),
                p.estimate.stderr.into(),
                p.estimate.shots_total.into(),
                p.estimate.shots_retained.into(),
            ]);
        }
    }
}

fn retained_fraction(curves: &[SweepResult]) -> f64 {
    let (kept, total) = curves
        .iter()
        .flat_map(|c| &c.points)
        .fold((0usize, 0usize), |(k, t), p| (k + p.estimate.shots_retained, t + p.estimate.shots_total));
    if total == 0 {
        0.0
    } else {
        kept as f64 / total as f64
    }
}

fn emit_run(run: &LoschmidtRun, oracle: bool) -> (Table, String) {
    let mut table = Table::new(SWEEP_COLUMNS);
    let mut curves = run.per_combo.clone();
    curves.push(run.average.clone());
    sweep_rows(&mut table, &curves);
    let flagged = run.average.points.iter().filter(|p| p.is_flagged()).count();
    let retained = retained_fraction(&run.per_combo);
    table.note("points", run.average.points.len());
    table.note("combos", run.per_combo.len());
    table.note("retained_fraction", retained);
    table.note("flagged_points", flagged);
    let mut summary = format!(
        "{} points x {} combos, retained fraction {retained:.4}, {flagged} flagged",
        run.average.points.len(),
        run.per_combo.len()
    );
    if oracle {
        let dev = run.max_oracle_deviation();
        table.note("max_oracle_deviation", dev);
        summary.push_str(&format!(", max |deviation from oracle| {dev:.3e}"));
    }
    (table, summary)
}

fn loschmidt(cfg: &RunConfig, combos: &Combos) -> Result<(Table, String), Failure> {
    if stochastic(cfg) {
        require_seed(cfg, "a noisy run")?;
    }
    let run = experiments::run_loschmidt(&cfg.context(), cfg.n, combos, &cfg.theta.grid())?;
    Ok(emit_run(&run, !cfg.noise.enabled))
}

fn magnetization(cfg: &RunConfig, combos: &Combos) -> Result<(Table, String), Failure> {
    if stochastic(cfg) {
        require_seed(cfg, "a noisy run")?;
    }
    let run = experiments::run_magnetization(&cfg.context(), cfg.n, combos, &cfg.theta.grid())?;
    Ok(emit_run(&run, false))
}

fn rabi(cfg: &RunConfig, qubit: usize) -> Result<(Table, String), Failure> {
    if stochastic(cfg) {
        require_seed(cfg, "a noisy run")?;
    }
    let curves = experiments::run_rabi(&cfg.context(), qubit, &cfg.theta.grid())?;
    let mut table = Table::new(SWEEP_COLUMNS);
    sweep_rows(&mut table, &curves);
    let retained = retained_fraction(&curves[..1]);
    table.note("retained_fraction", retained);
    let summary = format!("{} points x {} observables, retained fraction {retained:.4}", cfg.theta.steps, curves.len());
    Ok((table, summary))
}

fn tomo(cfg: &RunConfig, target: Option<&str>, exact: bool) -> Result<(Table, String), Failure> {
    let target = match target {
        Some(t) => t.parse().map_err(Failure::Config)?,
        None => cfg.tomo.target,
    };
    let prep = match target {
        TomoTarget::Quench => TomoPrep::Quench { n: cfg.n, theta: cfg.tomo.theta },
        TomoTarget::Ghz => TomoPrep::Ghz { n: cfg.n, phi: cfg.tomo.ghz_phase },
        TomoTarget::Bell => TomoPrep::Bell,
    };
    let n = if target == TomoTarget::Bell { 2 } else { cfg.n };
    if !(1..=quench_core::tomography::MAX_TOMO_QUBITS).contains(&n) {
        return Err(Failure::Config(format!("tomography supports 1 to 4 qubits, got {n}")));
    }
    let noisy_prep = target == TomoTarget::Quench && cfg.noise.enabled;
    if !exact || noisy_prep {
        require_seed(cfg, "sampled tomography")?;
    }
    let shots = (!exact).then_some(cfg.tomo.shots);
    let bootstrap = if exact { 0 } else { cfg.tomo.bootstrap };
    let r = experiments::run_tomography(&cfg.context(), prep, shots, bootstrap)?;
    let mut table = Table::new(&["quantity", "value", "sigma"]);
    table.push(vec!["fidelity".into(), r.fidelity.into(), r.fidelity_sigma.into()]);
    if let Some(c) = r.concurrence {
        table.push(vec!["concurrence".into(), c.into(), r.concurrence_sigma.into()]);
    }
    if let (Some(phi), Some(f)) = (r.ghz_phase, r.ghz_fidelity) {
        table.push(vec!["ghz_phase".into(), phi.into(), Cell::Num(None)]);
        table.push(vec!["ghz_fidelity".into(), f.into(), r.ghz_fidelity_sigma.into()]);
    }
    for (part, m) in [("re", &r.rho_re), ("im", &r.rho_im)] {
        for (i, row) in m.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                table.push(vec![format!("rho_{part}({i},{j})").into(), (*v).into(), Cell::Num(None)]);
            }
        }
    }
    table.note("converged", r.converged);
    table.note("iterations", r.iterations);
    table.note("bootstrap_resamples", bootstrap);
    let summary = format!("n = {n}, fidelity {:.5}, converged {}", r.fidelity, r.converged);
    Ok((table, summary))
}

fn rethreshold(cfg: &RunConfig, voltages: Option<&Path>) -> Result<(Table, String), Failure> {
    require_seed(cfg, "the synthetic sensor")?;
    let mut model = cfg.sensor;
    model.seed = cfg.seed.unwrap_or(0);
    let study = RethresholdConfig {
        model,
        thetas: cfg.theta.grid(),
        shots_per_batch: cfg.sensor_shots,
        t_pi_ns: cfg.device.t_pi(cfg.qubit),
        ..Default::default()
    };
    let r = rethreshold_study(&study)?;
    if let Some(path) = voltages {
        let mut w = csv::Writer::from_path(path).map_err(|e| Failure::Io(e.to_string()))?;
        w.write_record(["batch_id", "shot_index", "voltage_mV", "true_bit"]).map_err(|e| Failure::Io(e.to_string()))?;
        for b in study_batches(&study)? {
            for (i, (v, bit)) in b.drifted.voltages.iter().zip(&b.bits).enumerate() {
                w.write_record([b.drifted.batch_id.to_string(), i.to_string(), format!("{v:?}"), bit.to_string()])
                    .map_err(|e| Failure::Io(e.to_string()))?;
            }
        }
        w.flush().map_err(|e| Failure::Io(e.to_string()))?;
    }
    let mut table = Table::new(&["theta_rad", "burst_ns", "drift_mV", "true_fraction", "fixed", "dynamic", "drift_free"]);
    for row in &r.rows {
        table.push(vec![
            row.theta.into(),
            row.burst_ns.into(),
            row.drift_mv.into(),
            row.true_fraction.into(),
            row.fixed.into(),
            row.dynamic.into(),
            row.drift_free.into(),
        ]);
    }
    table.note("fixed_threshold_mV", r.fixed_threshold);
    table.note("visibility_true", r.visibility_true);
    table.note("visibility_fixed", r.visibility_fixed);
    table.note("visibility_dynamic", r.visibility_dynamic);
    table.note("visibility_drift_free", r.visibility_drift_free);
    table.note("discard_rate", r.discard_rate);
    let summary = format!(
        "visibility fixed {:.4}, rethresholded {:.4}, drift-free {:.4}, discard rate {:.3}",
        r.visibility_fixed, r.visibility_dynamic, r.visibility_drift_free, r.discard_rate
    );
    Ok((table, summary))
}

fn finite_size(n_min: usize, n_max: usize, theta: f64) -> Result<(Table, String), Failure> {
    if n_min == 0 || n_max < n_min {
        return Err(Failure::Config(format!("invalid N range {n_min}..={n_max}")));
    }
    let rows = finite_size_scan(n_min..=n_max, theta)?;
    let mut table = Table::new(&["N", "theta_rad", "value", "log10", "rate", "mode", "closed_form"]);
    for r in &rows {
        let mode = match r.mode {
            ScanMode::Circuit => "circuit",
            ScanMode::Analytical => "analytical",
        };
        table.push(vec![
            r.n.into(),
            theta.into(),
            r.value.into(),
            r.log10.into(),
            r.rate.into(),
            mode.into(),
            analytical_loschmidt(r.n, theta).into(),
        ]);
    }
    let zeros: Vec<String> = rows.iter().filter(|r| r.value == 0.0).map(|r| r.n.to_string()).collect();
    Ok((table, format!("{} sizes, exact zeros at N = [{}]", rows.len(), zeros.join(", "))))
}

fn periodicity(cfg: &RunConfig) -> Result<(Table, String), Failure> {
    let grid = periodicity_grid();
    let mut table = Table::new(&["N", "with_entanglers", "stage", "period_rad", "period_over_pi"]);
    let mut parts = Vec::new();
    for with in [true, false] {
        let r = periodicity_study(cfg.n, &grid, with)?;
        for (stage, p) in &r.stages {
            table.push(vec![cfg.n.into(), with.into(), format!("{stage:?}").into(), (*p).into(), (p / PI).into()]);
            if matches!(stage, experiments::Stage::Final) {
                parts.push(format!("final period {:.3}π {} entanglers", p / PI, if with { "with" } else { "without" }));
            }
        }
    }
    Ok((table, format!("N = {}: {}", cfg.n, parts.join(", "))))
}

fn validate() -> Result<(Table, String), Failure> {
    let checks = oracle_suite()?;
    let mut table = Table::new(&["check", "passed", "detail"]);
    for c in &checks {
        eprintln!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        table.push(vec![c.name.as_str().into(), c.passed.into(), c.detail.as_str().into()]);
    }
    let passed = checks.iter().filter(|c| c.passed).count();
    Ok((table, format!("{passed}/{} oracle checks passed", checks.len())))
}
