//! Emitter plus bath dynamics: model assembly, an exact Krylov propagator
//! for small instances and a matrix product state engine.

use std::io::Write;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::bath::{BathLabel, DiscretizedBath};
use crate::error::{invalid, Error, Result};

pub mod exact;
pub mod hamiltonian;
pub mod mps;

pub use exact::{evolve_exact, ExactOptions};
pub use hamiltonian::{build_hamiltonian, Geometry, HamiltonianHandle, SiteKind, SparseHamiltonian};
pub use mps::{evolve_mps, MpsOptions, TrotterOrder};

/// Two-level emitter with `H_a = (omega_a / 2) sigma_z`, coupled through
/// `sigma_x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmitterSpec {
    omega_a: f64,
    initial_bloch: [f64; 3],
}

impl EmitterSpec {
    pub fn new(omega_a: f64, initial_bloch: [f64; 3]) -> Result<Self> {
        if !(omega_a > 0.0 && omega_a.is_finite()) {
            return Err(invalid("omega_a", format!("must be positive, got {omega_a}")));
        }
        let r = norm3(initial_bloch);
        if !(r <= 1.0 + 1e-12) {
            return Err(invalid(
                "initial_bloch",
                format!("Bloch vector must lie in the unit ball, |r| = {r}"),
            ));
        }
        Ok(Self {
            omega_a,
            initial_bloch,
        })
    }

    pub fn omega_a(&self) -> f64 {
        self.omega_a
    }

    pub fn initial_bloch(&self) -> [f64; 3] {
        self.initial_bloch
    }

    pub fn is_pure(&self) -> bool {
        (norm3(self.initial_bloch) - 1.0).abs() < 1e-12
    }

    /// State vector `[<+|psi>, <-|psi>]` of a pure initial state.
    pub fn pure_state(&self) -> Result<[C64; 2]> {
        if !self.is_pure() {
            return Err(Error::Usage(
                "initial emitter state is mixed; use an ensemble".into(),
            ));
        }
        Ok(bloch_to_state(self.initial_bloch))
    }

    /// The initial emitter state as weighted pure states (its eigenvectors).
    pub fn ensemble(&self) -> Vec<(f64, [C64; 2])> {
        let r = norm3(self.initial_bloch);
        if self.is_pure() {
            return vec![(1.0, bloch_to_state(self.initial_bloch))];
        }
        let axis = if r > 0.0 {
            self.initial_bloch.map(|c| c / r)
        } else {
            [0.0, 0.0, 1.0]
        };
        let flipped = axis.map(|c| -c);
        [(0.5 * (1.0 + r), axis), (0.5 * (1.0 - r), flipped)]
            .into_iter()
            .filter(|(p, _)| *p > 0.0)
            .map(|(p, n)| (p, bloch_to_state(n)))
            .collect()
    }
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// `cos(theta/2) |+> + e^{i phi} sin(theta/2) |->` for a unit Bloch vector.
fn bloch_to_state(n: [f64; 3]) -> [C64; 2] {
    let theta = n[2].clamp(-1.0, 1.0).acos();
    let phi = n[1].atan2(n[0]);
    [
        C64::new((0.5 * theta).cos(), 0.0),
        C64::from_polar((0.5 * theta).sin(), phi),
    ]
}

/// Bloch vector of the reduced emitter density matrix `rho` (basis `|+>, |->`).
pub(crate) fn bloch_from_rho(rho: [[C64; 2]; 2]) -> [f64; 3] {
    let coherence = rho[0][1];
    [
        2.0 * coherence.re,
        -2.0 * coherence.im,
        (rho[0][0] - rho[1][1]).re,
    ]
}

/// Emitter coupled to one bath (label `eq`) or two baths (labels `M` and
/// `S`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemModel {
    emitter: EmitterSpec,
    baths: Vec<DiscretizedBath>,
}

impl SystemModel {
    /// Baths are stored in label order (`M` before `S`).
    pub fn new(emitter: EmitterSpec, mut baths: Vec<DiscretizedBath>) -> Result<Self> {
        baths.sort_by_key(|b| b.label());
        let labels: Vec<BathLabel> = baths.iter().map(|b| b.label()).collect();
        match labels.as_slice() {
            [BathLabel::Eq] | [BathLabel::M, BathLabel::S] => {}
            _ => {
                return Err(invalid(
                    "baths",
                    format!("expected one `eq` bath or an `M` and an `S` bath, got {labels:?}"),
                ))
            }
        }
        Ok(Self { emitter, baths })
    }

    pub fn emitter(&self) -> &EmitterSpec {
        &self.emitter
    }

    pub fn baths(&self) -> &[DiscretizedBath] {
        &self.baths
    }

    pub fn bath(&self, label: BathLabel) -> Option<&DiscretizedBath> {
        self.baths.iter().find(|b| b.label() == label)
    }

    /// Whether every bath starts in its vacuum.
    pub fn baths_in_vacuum(&self) -> bool {
        self.baths.iter().all(|b| b.beta().is_infinite())
    }

    /// Amplitudes of a full-space state in the star geometry.
    pub fn full_dimension(&self) -> u128 {
        self.baths
            .iter()
            .fold(2u128, |acc, b| acc.saturating_mul((b.n_max() as u128).saturating_pow(b.len() as u32)))
    }
}

/// Star-basis occupations of one bath, sampled at `times`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupationSeries {
    pub label: BathLabel,
    pub mode_freqs: Vec<f64>,
    pub times: Vec<f64>,
    /// `values[i][k]` is `<n_k>` at `times[i]`.
    pub values: Vec<Vec<f64>>,
}

/// Solver-specific diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "solver", rename_all = "snake_case")]
pub enum SolverMeta {
    Exact {
        geometry: Geometry,
        dimension: usize,
        krylov_dim: usize,
        tolerance: f64,
        internal_steps: usize,
        min_step: f64,
        ensemble_size: usize,
        max_norm_drift: f64,
        /// `max |<H>(t) - <H>(0)| / max(|<H>(0)|, omega_a)`.
        max_energy_drift: f64,
    },
    Mps {
        dt: f64,
        order: TrotterOrder,
        chi_max: usize,
        svd_cutoff: f64,
        /// Largest bond dimension at each sample time.
        bond_dims: Vec<usize>,
        /// Accumulated discarded weight at each sample time.
        discarded_weight: Vec<f64>,
    },
}

/// Time series of emitter Bloch components and bath occupations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub bloch: Vec<[f64; 3]>,
    pub occupations: Vec<OccupationSeries>,
    pub solver_meta: SolverMeta,
    pub warnings: Vec<String>,
}

const BLOCH_NAMES: [&str; 3] = ["sigma_x", "sigma_y", "sigma_z"];

impl Trajectory {
    pub fn occupations(&self, label: BathLabel) -> Option<&OccupationSeries> {
        self.occupations.iter().find(|o| o.label == label)
    }

    /// Long-format CSV with columns `time, observable, label, value`.
    ///
    /// Bloch components use label `emitter`; occupations use observable
    /// `n_<k>` (star mode index) and the bath label.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        csv.write_record(["time", "observable", "label", "value"])?;
        for (t, b) in self.times.iter().zip(&self.bloch) {
            for (name, v) in BLOCH_NAMES.iter().zip(b) {
                csv.write_record([&format!("{t:.17e}"), *name, "emitter", &format!("{v:.17e}")])?;
            }
        }
        for series in &self.occupations {
            let label = series.label.to_string();
            for (t, row) in series.times.iter().zip(&series.values) {
                for (k, v) in row.iter().enumerate() {
                    csv.write_record([
                        &format!("{t:.17e}"),
                        &format!("n_{k}"),
                        label.as_str(),
                        &format!("{v:.17e}"),
                    ])?;
                }
            }
        }
        csv.flush()?;
        Ok(())
    }
}

/// `max_t max_i |bloch_a[i](t) - bloch_b[i](t)|` on a shared time grid.
pub fn equivalence_gap(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    let same_grid = a.times.len() == b.times.len()
        && a.times.iter().zip(&b.times).all(|(x, y)| (x - y).abs() <= 1e-9 * (1.0 + x.abs()));
    if !same_grid {
        return Err(Error::Usage("trajectories are sampled on different time grids".into()));
    }
    Ok(a.bloch
        .iter()
        .zip(&b.bloch)
        .flat_map(|(x, y)| (0..3).map(move |i| (x[i] - y[i]).abs()))
        .fold(0.0, f64::max))
}

/// Number of steps `n` for sample times `0, dt, ..., n dt`; `t_max` must be
/// a whole multiple of `dt`.
pub fn sample_count(t_max: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid("dt", format!("time step must be positive, got {dt}")));
    }
    if !(t_max >= 0.0 && t_max.is_finite()) {
        return Err(invalid("t_max", format!("must be non-negative, got {t_max}")));
    }
    let n = (t_max / dt).round();
    if (n * dt - t_max).abs() > 1e-9 * t_max.max(1.0) {
        return Err(invalid(
            "dt",
            format!("t_max = {t_max} is not a whole number of steps of {dt}"),
        ));
    }
    Ok(n as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(times: Vec<f64>, bloch: Vec<[f64; 3]>) -> Trajectory {
        Trajectory {
            times,
            bloch,
            occupations: Vec::new(),
            solver_meta: SolverMeta::Mps {
                dt: 0.1,
                order: TrotterOrder::Second,
                chi_max: 1,
                svd_cutoff: 0.0,
                bond_dims: Vec::new(),
                discarded_weight: Vec::new(),
            },
            warnings: Vec::new(),
        }
    }

    #[test]
    fn bloch_round_trip() {
        for n in [[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.6, -0.8], [0.0, 0.0, 1.0]] {
            let psi = bloch_to_state(n);
            let rho = [
                [psi[0] * psi[0].conj(), psi[0] * psi[1].conj()],
                [psi[1] * psi[0].conj(), psi[1] * psi[1].conj()],
            ];
            let back = bloch_from_rho(rho);
            for i in 0..3 {
                assert!((back[i] - n[i]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn mixed_emitter_ensemble() {
        let e = EmitterSpec::new(1.0, [0.0, 0.0, 0.5]).unwrap();
        assert!(!e.is_pure() && e.pure_state().is_err());
        let ens = e.ensemble();
        let z: f64 = ens.iter().map(|(p, s)| p * (s[0].norm_sqr() - s[1].norm_sqr())).sum();
        assert!((z - 0.5).abs() < 1e-15);
        assert!(EmitterSpec::new(1.0, [1.0, 1.0, 0.0]).is_err());
    }

    #[test]
    fn model_labels() {
        let e = EmitterSpec::new(1.0, [1.0, 0.0, 0.0]).unwrap();
        let b = |l| DiscretizedBath::new(l, vec![1.0], vec![0.1]).unwrap();
        assert!(SystemModel::new(e, vec![b(BathLabel::Eq)]).is_ok());
        let m = SystemModel::new(e, vec![b(BathLabel::S), b(BathLabel::M)]).unwrap();
        assert_eq!(m.baths()[0].label(), BathLabel::M);
        assert!(SystemModel::new(e, vec![b(BathLabel::M)]).is_err());
        assert!(SystemModel::new(e, vec![b(BathLabel::M), b(BathLabel::M)]).is_err());
        assert!(SystemModel::new(e, vec![b(BathLabel::Eq), b(BathLabel::S)]).is_err());
    }

    #[test]
    fn gap_requires_shared_grid() {
        let a = traj(vec![0.0, 1.0], vec![[1.0, 0.0, 0.0], [0.5, 0.1, 0.0]]);
        let b = traj(vec![0.0, 1.0], vec![[1.0, 0.0, 0.0], [0.4, 0.1, 0.05]]);
        assert_eq!(equivalence_gap(&a, &a).unwrap(), 0.0);
        assert!((equivalence_gap(&a, &b).unwrap() - 0.1).abs() < 1e-15);
        let c = traj(vec![0.0, 2.0], b.bloch.clone());
        assert!(matches!(equivalence_gap(&a, &c), Err(Error::Usage(_))));
    }

    #[test]
    fn csv_long_format() {
        let mut t = traj(vec![0.0], vec![[1.0, 0.0, 0.0]]);
        t.occupations.push(OccupationSeries {
            label: BathLabel::S,
            mode_freqs: vec![1.0, 2.0],
            times: vec![0.0],
            values: vec![vec![0.0, 0.25]],
        });
        let mut out = Vec::new();
        t.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "time,observable,label,value");
        assert_eq!(lines.len(), 1 + 3 + 2);
        assert!(lines[5].contains(",n_1,S,"));
    }
}
