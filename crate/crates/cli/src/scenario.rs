//! Scenario files: a TOML document with `medium`, `emitter`, `bath`,
//! `solver` and `output` sections. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use slabqed::bath::{BathLabel, DiscretizationRule, DiscretizedBath};
use slabqed::dynamics::{sample_count, EmitterSpec, ExactOptions, Geometry, MpsOptions, TrotterOrder};
use slabqed::em1d::LorentzSlab;

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunKind {
    Spectra,
    Sumrule,
    SimulateTwoBath,
    SimulateEqBath,
    #[default]
    Compare,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Pipeline used by the `run` verb.
    #[serde(default)]
    pub run: RunKind,
    /// Reserved; every pipeline is deterministic.
    #[serde(default)]
    pub seed: u64,
    pub medium: MediumSection,
    pub emitter: EmitterSection,
    pub bath: BathSection,
    pub solver: SolverSection,
    pub output: OutputSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumSection {
    pub omega_p_ratio: f64,
    pub gamma_ratio: f64,
    /// Slab thickness in units of `c / omega_0`.
    pub length: f64,
    #[serde(default)]
    pub emitter_position: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmitterSection {
    pub omega_a: f64,
    pub initial_bloch: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathSection {
    pub eta: f64,
    pub n_modes: usize,
    pub omega_c: f64,
    #[serde(default)]
    pub rule: DiscretizationRule,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    /// Inverse temperature; `inf` is the vacuum.
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// Points of the uniform grid used by `sumrule`.
    #[serde(default = "default_sumrule_points")]
    pub sumrule_points: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    #[default]
    Mps,
    Exact,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default)]
    pub kind: SolverKind,
    /// Trotter step (MPS); ignored by the exact solver.
    pub dt: f64,
    pub t_max: f64,
    /// Output interval; defaults to `dt`. Must be a multiple of `dt`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_dt: Option<f64>,
    #[serde(default = "default_chi_max")]
    pub chi_max: usize,
    #[serde(default = "default_svd_cutoff")]
    pub svd_cutoff: f64,
    /// Trotter order, 2 or 4.
    #[serde(default = "default_order")]
    pub order: u8,
    /// Occupations every this many samples; 0 keeps only the last one.
    #[serde(default = "default_occupation_every")]
    pub occupation_every: usize,
    #[serde(default)]
    pub geometry: Geometry,
    /// `compare` exits with a tolerance failure above this gap.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_tolerance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

fn default_n_max() -> usize {
    slabqed::bath::DEFAULT_N_MAX
}
fn default_beta() -> f64 {
    f64::INFINITY
}
fn default_sumrule_points() -> usize {
    200
}
fn default_chi_max() -> usize {
    64
}
fn default_svd_cutoff() -> f64 {
    1e-12
}
fn default_order() -> u8 {
    2
}
fn default_occupation_every() -> usize {
    1
}

impl Scenario {
    /// Reads, applies `key=value` overrides, parses and validates.
    pub fn load(path: &Path, overrides: &[String]) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text, overrides)
    }

    pub fn from_toml(text: &str, overrides: &[String]) -> CliResult<Self> {
        let mut doc: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::Validation(e.message().to_string()))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let scenario: Scenario = toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Validation(e.message().to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes to TOML")
    }

    /// Checks every parameter against the library preconditions.
    pub fn validate(&self) -> CliResult<()> {
        self.slab()?;
        self.emitter_spec()?;
        let b = &self.bath;
        if !(b.eta >= 0.0 && b.eta.is_finite()) {
            return Err(range("bath.eta", format!("must be non-negative and finite, got {}", b.eta)));
        }
        if b.n_modes == 0 {
            return Err(range("bath.n_modes", "need at least one mode"));
        }
        if !(b.omega_c > 0.0 && b.omega_c.is_finite()) {
            return Err(range("bath.omega_c", format!("must be positive, got {}", b.omega_c)));
        }
        if b.sumrule_points == 0 {
            return Err(range("bath.sumrule_points", "need at least one point"));
        }
        DiscretizedBath::new(BathLabel::Eq, vec![1.0], vec![0.0])?
            .with_n_max(b.n_max)?
            .with_beta(b.beta)?;

        let s = &self.solver;
        self.mps_options()?.validate()?;
        self.exact_options().validate()?;
        let sample_dt = self.sample_dt();
        sample_count(s.t_max, sample_dt)?;
        if s.kind == SolverKind::Mps {
            let every = (sample_dt / s.dt).round();
            if every < 1.0 || (every * s.dt - sample_dt).abs() > 1e-9 * sample_dt {
                return Err(range("solver.sample_dt", format!("must be a multiple of dt = {}", s.dt)));
            }
            if b.beta.is_finite() {
                return Err(range("bath.beta", "the MPS solver needs vacuum baths; use solver.kind = \"exact\""));
            }
            if !self.emitter_spec()?.is_pure() {
                return Err(range("emitter.initial_bloch", "the MPS solver needs a pure state (unit Bloch vector)"));
            }
        } else {
            if b.beta.is_finite() && s.geometry != Geometry::Star {
                return Err(range("solver.geometry", "thermal baths need geometry = \"star\""));
            }
            // Largest arm: two baths of n_modes each.
            let cap = self.exact_options().dimension_cap as u128;
            let dim = u32::try_from(2 * b.n_modes)
                .ok()
                .and_then(|e| (b.n_max as u128).checked_pow(e))
                .and_then(|d| d.checked_mul(2))
                .filter(|&d| d <= cap);
            if dim.is_none() {
                return Err(range(
                    "bath.n_modes",
                    format!("exact solver state space exceeds the cap of {cap} amplitudes"),
                ));
            }
        }
        if let Some(g) = s.gap_tolerance {
            if g.is_nan() || g <= 0.0 {
                return Err(range("solver.gap_tolerance", format!("must be positive, got {g}")));
            }
        }
        Ok(())
    }

    pub fn slab(&self) -> CliResult<LorentzSlab> {
        let m = &self.medium;
        let slab = LorentzSlab::new(m.omega_p_ratio, m.gamma_ratio, m.length)
            .map_err(|e| section("medium", e))?;
        slab.with_emitter_position(m.emitter_position).map_err(|e| section("medium", e))
    }

    pub fn emitter_spec(&self) -> CliResult<EmitterSpec> {
        EmitterSpec::new(self.emitter.omega_a, self.emitter.initial_bloch).map_err(|e| section("emitter", e))
    }

    pub fn sample_dt(&self) -> f64 {
        self.solver.sample_dt.unwrap_or(self.solver.dt)
    }

    pub fn mps_options(&self) -> CliResult<MpsOptions> {
        let s = &self.solver;
        let order = match s.order {
            2 => TrotterOrder::Second,
            4 => TrotterOrder::Fourth,
            o => return Err(range("solver.order", format!("must be 2 or 4, got {o}"))),
        };
        Ok(MpsOptions {
            dt: s.dt,
            chi_max: s.chi_max,
            svd_cutoff: s.svd_cutoff,
            order,
            sample_every: ((self.sample_dt() / s.dt).round() as usize).max(1),
            occupation_every: s.occupation_every,
            ..Default::default()
        })
    }

    pub fn exact_options(&self) -> ExactOptions {
        ExactOptions {
            geometry: self.solver.geometry,
            ..Default::default()
        }
    }
}

fn range(key: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("`{key}` out of range: {reason}"))
}

fn section(name: &str, err: slabqed::Error) -> CliError {
    match CliError::from(err) {
        CliError::Validation(m) => CliError::Validation(format!("[{name}] {m}")),
        other => other,
    }
}

/// Sets a dotted key in the document. The value is read as a TOML value
/// and falls back to a bare string, so `solver.kind=exact` works unquoted.
fn apply_override(doc: &mut toml::Table, spec: &str) -> CliResult<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Validation(format!("override `{spec}` is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Validation(format!("override key `{key}` is malformed")));
    }
    let mut table = doc;
    for part in &parts[..parts.len() - 1] {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Validation(format!("override `{key}`: `{part}` is not a section")))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}
