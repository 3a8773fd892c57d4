//! The four pipelines behind the CLI verbs. Each writes its artifacts and a
//! `manifest.json` into the output directory.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};
use slabqed::bath::{discretize, BathLabel, DiscretizedBath};
use slabqed::dynamics::{equivalence_gap, evolve_exact, evolve_mps, SystemModel, Trajectory};
use slabqed::spectral::{
    self, default_grid, markov_decay_rate, spectral_density, SpectralKind, SpectralTable,
};

use crate::error::{CliError, CliResult};
use crate::scenario::{RunKind, Scenario, SolverKind};

pub const SUM_RULE_THRESHOLD: f64 = 1e-8;

/// Which simulated model: separate medium and scattering baths, or the
/// single merged bath.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    TwoBath,
    EqBath,
}

#[derive(Debug, Serialize)]
struct Artifact {
    file: String,
    bytes: u64,
}

/// Collects what a run wrote and measured, then renders the manifest.
struct Report {
    verb: &'static str,
    dir: PathBuf,
    artifacts: Vec<Artifact>,
    derived: serde_json::Map<String, Value>,
    timings: serde_json::Map<String, Value>,
    status: &'static str,
}

impl Report {
    fn new(verb: &'static str, dir: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            verb,
            dir: dir.to_path_buf(),
            artifacts: Vec::new(),
            derived: Default::default(),
            timings: Default::default(),
            status: "ok",
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn create(&self, name: &str) -> CliResult<BufWriter<File>> {
        let path = self.path(name);
        File::create(&path).map(BufWriter::new).map_err(|e| CliError::io(&path, e))
    }

    fn record(&mut self, name: &str) -> CliResult<()> {
        let path = self.path(name);
        let bytes = std::fs::metadata(&path).map_err(|e| CliError::io(&path, e))?.len();
        self.artifacts.push(Artifact {
            file: name.to_string(),
            bytes,
        });
        Ok(())
    }

    fn write_json(&mut self, name: &str, value: &impl Serialize) -> CliResult<()> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::io(&self.path(name), e))?;
        drop(w);
        self.record(name)
    }

    fn derive(&mut self, key: &str, value: impl Serialize) {
        self.derived.insert(key.into(), json!(value));
    }

    fn time(&mut self, key: &str, start: Instant) {
        self.timings.insert(key.into(), json!(start.elapsed().as_secs_f64()));
    }

    fn finish(mut self, scenario: &Scenario, overrides: &[String], start: Instant) -> CliResult<()> {
        let toml = scenario.to_toml();
        std::fs::write(self.path("scenario.toml"), &toml).map_err(|e| CliError::io(&self.path("scenario.toml"), e))?;
        self.record("scenario.toml")?;
        self.time("total_s", start);
        let manifest = json!({
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "library_version": slabqed::VERSION,
            "platform": { "os": std::env::consts::OS, "arch": std::env::consts::ARCH },
            "verb": self.verb,
            "status": self.status,
            "overrides": overrides,
            "scenario": scenario,
            "scenario_toml": toml,
            "derived": self.derived,
            "timings": self.timings,
            "artifacts": self.artifacts,
        });
        let path = self.path("manifest.json");
        let mut w = File::create(&path).map(BufWriter::new).map_err(|e| CliError::io(&path, e))?;
        serde_json::to_writer_pretty(&mut w, &manifest).map_err(|e| CliError::io(&path, e))
    }
}

/// The medium, scattering and equivalent tables on the default grid up to
/// the cut-off.
pub fn tables(scenario: &Scenario) -> CliResult<[SpectralTable; 3]> {
    let slab = scenario.slab()?;
    let grid = default_grid(scenario.bath.omega_c);
    let eta = scenario.bath.eta;
    let omega_a = scenario.emitter.omega_a;
    let m = spectral_density(SpectralKind::Medium, &slab, eta, omega_a, &grid)?;
    let s = spectral_density(SpectralKind::Scattering, &slab, eta, omega_a, &grid)?;
    let eq = SpectralTable::equivalent(&m, &s)?;
    Ok([m, s, eq])
}

pub fn spectra(scenario: &Scenario, out: &Path, overrides: &[String]) -> CliResult<()> {
    let start = Instant::now();
    let mut report = Report::new("spectra", out)?;
    let [m, s, eq] = tables(scenario)?;
    report.time("tables_s", start);
    spectral::write_spectra_csv(report.create("spectra.csv")?, &m, &s, &eq)?;
    report.record("spectra.csv")?;

    let rate = markov_decay_rate(&eq, scenario.emitter.omega_a)?;
    let summary = json!({
        "grid_points": m.grid().len(),
        "omega_max": scenario.bath.omega_c,
        "eta": scenario.bath.eta,
        "omega_a": scenario.emitter.omega_a,
        "f_M_max": max_of(m.values()),
        "f_S_max": max_of(s.values()),
        "f_S_at_omega_a": s.profile(scenario.emitter.omega_a)?,
        "markov_decay_rate": rate,
    });
    report.derive("markov_decay_rate", rate);
    report.write_json("spectra.json", &summary)?;
    report.finish(scenario, overrides, start)
}

pub fn sumrule(scenario: &Scenario, out: &Path, overrides: &[String]) -> CliResult<()> {
    let start = Instant::now();
    let mut report = Report::new("sumrule", out)?;
    let slab = scenario.slab()?;
    let grid = spectral::uniform_grid(scenario.bath.sumrule_points, scenario.bath.omega_c);
    let residuals = grid
        .iter()
        .map(|&w| spectral::sum_rule_residual(&slab, w))
        .collect::<slabqed::Result<Vec<f64>>>()?;
    report.time("residuals_s", start);

    let mut csv = csv::Writer::from_writer(report.create("sumrule.csv")?);
    let io = |e: csv::Error| CliError::Io(format!("sumrule.csv: {e}"));
    csv.write_record(["omega", "residual"]).map_err(io)?;
    for (w, r) in grid.iter().zip(&residuals) {
        csv.write_record([format!("{w:.17e}"), format!("{r:.17e}")]).map_err(io)?;
    }
    csv.flush().map_err(|e| CliError::Io(format!("sumrule.csv: {e}")))?;
    drop(csv);
    report.record("sumrule.csv")?;

    let (worst_at, worst) = grid
        .iter()
        .zip(&residuals)
        .fold((0.0, 0.0), |acc, (&w, &r)| if r > acc.1 { (w, r) } else { acc });
    let pass = worst < SUM_RULE_THRESHOLD;
    report.write_json(
        "sumrule.json",
        &json!({
            "points": grid.len(),
            "max_residual": worst,
            "max_residual_omega": worst_at,
            "threshold": SUM_RULE_THRESHOLD,
            "pass": pass,
        }),
    )?;
    report.derive("max_residual", worst);
    if !pass {
        report.status = "tolerance_failed";
    }
    report.finish(scenario, overrides, start)?;
    if pass {
        Ok(())
    } else {
        Err(CliError::Tolerance(format!(
            "max sum-rule residual {worst:e} at omega = {worst_at} exceeds {SUM_RULE_THRESHOLD:e}"
        )))
    }
}

/// Discretized baths for one arm, in the scenario's thermal state.
pub fn baths(scenario: &Scenario, tables: &[SpectralTable; 3], arm: Arm) -> CliResult<Vec<DiscretizedBath>> {
    let b = &scenario.bath;
    let make = |table: &SpectralTable, label| -> CliResult<DiscretizedBath> {
        Ok(discretize(table, label, b.n_modes, b.omega_c, b.rule)?
            .with_n_max(b.n_max)?
            .with_beta(b.beta)?)
    };
    Ok(match arm {
        Arm::TwoBath => vec![make(&tables[0], BathLabel::M)?, make(&tables[1], BathLabel::S)?],
        Arm::EqBath => vec![make(&tables[2], BathLabel::Eq)?],
    })
}

pub fn evolve(scenario: &Scenario, baths: Vec<DiscretizedBath>) -> CliResult<Trajectory> {
    let model = SystemModel::new(scenario.emitter_spec()?, baths)?;
    let t_max = scenario.solver.t_max;
    Ok(match scenario.solver.kind {
        SolverKind::Mps => evolve_mps(&model, t_max, &scenario.mps_options()?)?,
        SolverKind::Exact => evolve_exact(&model, t_max, scenario.sample_dt(), &scenario.exact_options())?,
    })
}

fn arm_name(arm: Arm) -> &'static str {
    match arm {
        Arm::TwoBath => "two_bath",
        Arm::EqBath => "eq_bath",
    }
}

fn write_arm(report: &mut Report, arm: Arm, baths: &[DiscretizedBath], traj: &Trajectory) -> CliResult<()> {
    let name = arm_name(arm);
    traj.write_csv(report.create(&format!("{name}.csv"))?)?;
    report.record(&format!("{name}.csv"))?;
    report.write_json(
        &format!("{name}.json"),
        &json!({
            "arm": arm,
            "solver": traj.solver_meta,
            "warnings": traj.warnings,
            "final_bloch": traj.bloch.last(),
            "baths": baths,
        }),
    )
}

pub fn simulate(scenario: &Scenario, arm: Arm, out: &Path, overrides: &[String]) -> CliResult<()> {
    let start = Instant::now();
    let mut report = Report::new("simulate", out)?;
    let t = tables(scenario)?;
    report.time("tables_s", start);
    let baths = baths(scenario, &t, arm)?;
    let sim = Instant::now();
    let traj = evolve(scenario, baths.clone())?;
    report.time("evolve_s", sim);
    write_arm(&mut report, arm, &baths, &traj)?;
    report.derive("arm", arm);
    report.derive("final_bloch", traj.bloch.last());
    report.derive("warnings", &traj.warnings);
    report.finish(scenario, overrides, start)
}

pub fn compare(scenario: &Scenario, out: &Path, overrides: &[String]) -> CliResult<()> {
    let start = Instant::now();
    let mut report = Report::new("compare", out)?;
    let t = tables(scenario)?;
    report.time("tables_s", start);
    let two_baths = baths(scenario, &t, Arm::TwoBath)?;
    let eq_baths = baths(scenario, &t, Arm::EqBath)?;

    let sim = Instant::now();
    let (two, eq) = std::thread::scope(|scope| {
        let handle = scope.spawn(|| evolve(scenario, two_baths.clone()));
        let eq = evolve(scenario, eq_baths.clone());
        (handle.join().expect("simulation thread panicked"), eq)
    });
    let (two, eq) = (two?, eq?);
    report.time("evolve_s", sim);
    write_arm(&mut report, Arm::TwoBath, &two_baths, &two)?;
    write_arm(&mut report, Arm::EqBath, &eq_baths, &eq)?;

    let gap = equivalence_gap(&two, &eq)?;
    let tolerance = scenario.solver.gap_tolerance;
    let pass = tolerance.is_none_or(|tol| gap <= tol);
    report.write_json(
        "compare.json",
        &json!({
            "equivalence_gap": gap,
            "gap_tolerance": tolerance,
            "pass": pass,
            "samples": two.times.len(),
            "t_max": scenario.solver.t_max,
        }),
    )?;
    report.derive("equivalence_gap", gap);
    if !pass {
        report.status = "tolerance_failed";
    }
    report.finish(scenario, overrides, start)?;
    match tolerance {
        Some(tol) if !pass => Err(CliError::Tolerance(format!("equivalence gap {gap:e} exceeds {tol:e}"))),
        _ => Ok(()),
    }
}

/// Runs the pipeline named by the scenario's `run` key.
pub fn run(scenario: &Scenario, out: &Path, overrides: &[String]) -> CliResult<()> {
    match scenario.run {
        RunKind::Spectra => spectra(scenario, out, overrides),
        RunKind::Sumrule => sumrule(scenario, out, overrides),
        RunKind::SimulateTwoBath => simulate(scenario, Arm::TwoBath, out, overrides),
        RunKind::SimulateEqBath => simulate(scenario, Arm::EqBath, out, overrides),
        RunKind::Compare => compare(scenario, out, overrides),
    }
}

fn max_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(0.0, f64::max)
}
