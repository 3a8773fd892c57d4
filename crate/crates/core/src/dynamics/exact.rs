//! Full-space propagation by Lanczos (Krylov) exponentiation of the sparse
//! Hamiltonian. Used as the reference for the tensor-network engine.
//!
//! Each internal step builds an orthonormal Krylov basis `V_m` from the
//! current state, forms `exp(-i T_m tau) e_1` from the tridiagonal
//! projection and accepts the step when the residual estimate
//! `beta_m |[exp(-i T_m tau) e_1]_m|` is below `tolerance * tau`; otherwise
//! the step is halved on the same basis.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::hamiltonian::{build_hamiltonian, Geometry, HamiltonianHandle, SiteKind, SparseHamiltonian, DEFAULT_DIMENSION_CAP};
use super::{bloch_from_rho, sample_count, OccupationSeries, SolverMeta, SystemModel, Trajectory};
use crate::bath::BathLabel;
use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactOptions {
    pub geometry: Geometry,
    pub krylov_dim: usize,
    /// Allowed residual per unit time.
    pub tolerance: f64,
    pub dimension_cap: usize,
    pub min_step: f64,
    /// Drop thermal-ensemble members whose weight is below this.
    pub ensemble_cutoff: f64,
}

impl Default for ExactOptions {
    fn default() -> Self {
        Self {
            geometry: Geometry::Chain,
            krylov_dim: 24,
            tolerance: 1e-13,
            dimension_cap: DEFAULT_DIMENSION_CAP,
            min_step: 1e-9,
            ensemble_cutoff: 1e-12,
        }
    }
}

impl ExactOptions {
    /// Checks the options without running anything.
    pub fn validate(&self) -> Result<()> {
        if self.krylov_dim < 2 {
            return Err(invalid("krylov_dim", "need at least 2 Krylov vectors"));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(invalid("tolerance", format!("must be positive, got {}", self.tolerance)));
        }
        if !(self.min_step > 0.0) {
            return Err(invalid("min_step", format!("must be positive, got {}", self.min_step)));
        }
        Ok(())
    }
}

#[derive(Default)]
struct Stats {
    steps: usize,
    min_step: f64,
}

/// Propagates `model` to `t_max`, sampling every `dt`.
///
/// Vacuum baths with a pure emitter evolve a single state. Mixed emitter
/// states and thermal baths are expanded into an ensemble of product states
/// (thermal baths need the star geometry, where the thermal state is a
/// product over modes); each mode's Boltzmann weights are renormalized over
/// the `n_max` retained Fock states.
pub fn evolve_exact(model: &SystemModel, t_max: f64, dt: f64, options: &ExactOptions) -> Result<Trajectory> {
    let n_samples = sample_count(t_max, dt)?;
    options.validate()?;
    if !model.baths_in_vacuum() && options.geometry == Geometry::Chain {
        return Err(Error::Usage(
            "thermal baths are only supported in the star geometry".into(),
        ));
    }
    let handle = build_hamiltonian(model, options.geometry)?;
    let h = handle.sparse(options.dimension_cap)?;
    let members = ensemble(model, &handle, options.ensemble_cutoff);
    let mut warnings = Vec::new();
    let kept: f64 = members.iter().map(|m| m.0).sum();
    if 1.0 - kept > 1e-10 {
        warnings.push(format!("thermal ensemble truncated: dropped weight {:.3e}", 1.0 - kept));
    }

    let times: Vec<f64> = (0..=n_samples).map(|i| i as f64 * dt).collect();
    let labels: Vec<BathLabel> = model.baths().iter().map(|b| b.label()).collect();
    let mut bloch = vec![[0.0; 3]; times.len()];
    let mut occ: Vec<Vec<Vec<f64>>> = model
        .baths()
        .iter()
        .map(|b| vec![vec![0.0; b.len()]; times.len()])
        .collect();
    let mut stats = Stats {
        steps: 0,
        min_step: f64::INFINITY,
    };
    let mut max_norm_drift: f64 = 0.0;
    let mut max_energy_drift: f64 = 0.0;
    let energy_scale = model.emitter().omega_a();

    for (weight, mut psi) in members {
        let e0 = h.expectation(&psi);
        let scale = e0.abs().max(energy_scale);
        for (i, _) in times.iter().enumerate() {
            if i > 0 {
                propagate(&h, &mut psi, dt, options, &mut stats, times[i - 1])?;
            }
            let b = emitter_bloch(&handle, &psi);
            for c in 0..3 {
                bloch[i][c] += weight * b[c];
            }
            for (slot, label) in labels.iter().enumerate() {
                let n = occupations(&handle, *label, &psi)?;
                for (acc, v) in occ[slot][i].iter_mut().zip(n) {
                    *acc += weight * v;
                }
            }
            let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            max_norm_drift = max_norm_drift.max((norm - 1.0).abs());
            max_energy_drift = max_energy_drift.max((h.expectation(&psi) - e0).abs() / scale);
        }
    }

    let occupations = model
        .baths()
        .iter()
        .zip(occ)
        .map(|(b, values)| OccupationSeries {
            label: b.label(),
            mode_freqs: b.mode_freqs().to_vec(),
            times: times.clone(),
            values,
        })
        .collect();
    Ok(Trajectory {
        times,
        bloch,
        occupations,
        solver_meta: SolverMeta::Exact {
            geometry: options.geometry,
            dimension: h.dim(),
            krylov_dim: options.krylov_dim,
            tolerance: options.tolerance,
            internal_steps: stats.steps,
            min_step: if stats.steps == 0 { 0.0 } else { stats.min_step },
            ensemble_size: ensemble_len(model, &handle, options.ensemble_cutoff),
            max_norm_drift,
            max_energy_drift,
        },
        warnings,
    })
}

fn ensemble_len(model: &SystemModel, handle: &HamiltonianHandle, cutoff: f64) -> usize {
    bath_configurations(model, handle, cutoff).len() * model.emitter().ensemble().len()
}

/// Weighted product states making up the initial density operator.
fn ensemble(model: &SystemModel, handle: &HamiltonianHandle, cutoff: f64) -> Vec<(f64, Vec<C64>)> {
    let dim = handle.dimension() as usize;
    let strides = handle.strides();
    let e = handle.emitter_site();
    let mut out = Vec::new();
    for (p_bath, digits) in bath_configurations(model, handle, cutoff) {
        let base: usize = digits.iter().zip(&strides).map(|(d, s)| d * s).sum();
        for (p_em, amp) in model.emitter().ensemble() {
            let mut psi = vec![C64::new(0.0, 0.0); dim];
            psi[base] = amp[0];
            psi[base + strides[e]] = amp[1];
            out.push((p_bath * p_em, psi));
        }
    }
    out
}

/// Fock configurations of all sites (emitter digit 0) with their thermal
/// weights.
fn bath_configurations(model: &SystemModel, handle: &HamiltonianHandle, cutoff: f64) -> Vec<(f64, Vec<usize>)> {
    let n_sites = handle.sites().len();
    let mut per_site: Vec<Vec<f64>> = Vec::with_capacity(n_sites);
    for (s, kind) in handle.sites().iter().enumerate() {
        let d = handle.dims()[s];
        let probs = match kind {
            SiteKind::Emitter => vec![1.0],
            SiteKind::Mode { label, index } => {
                let bath = model.bath(*label).expect("site belongs to a bath");
                if bath.beta().is_infinite() || handle.geometry() == Geometry::Chain {
                    vec![1.0]
                } else {
                    let x = (-bath.beta() * bath.mode_freqs()[*index]).exp();
                    let raw: Vec<f64> = (0..d).map(|n| x.powi(n as i32)).collect();
                    let z: f64 = raw.iter().sum();
                    raw.into_iter().map(|p| p / z).collect()
                }
            }
        };
        per_site.push(probs);
    }
    let mut out = Vec::new();
    let mut digits = vec![0usize; n_sites];
    enumerate(&per_site, 0, 1.0, cutoff, &mut digits, &mut out);
    out
}

fn enumerate(
    per_site: &[Vec<f64>],
    site: usize,
    weight: f64,
    cutoff: f64,
    digits: &mut Vec<usize>,
    out: &mut Vec<(f64, Vec<usize>)>,
) {
    if site == per_site.len() {
        out.push((weight, digits.clone()));
        return;
    }
    for (n, p) in per_site[site].iter().enumerate() {
        let w = weight * p;
        if w < cutoff {
            continue;
        }
        digits[site] = n;
        enumerate(per_site, site + 1, w, cutoff, digits, out);
    }
    digits[site] = 0;
}

fn propagate(
    h: &SparseHamiltonian,
    psi: &mut [C64],
    interval: f64,
    options: &ExactOptions,
    stats: &mut Stats,
    t_start: f64,
) -> Result<()> {
    let mut remaining = interval;
    let mut elapsed = 0.0;
    while remaining > 1e-15 * interval {
        let krylov = Krylov::build(h, psi, options.krylov_dim);
        let mut tau = remaining;
        let coeffs = loop {
            let (c, err) = krylov.coefficients(tau);
            if err <= options.tolerance * tau {
                break c;
            }
            tau *= 0.5;
            if tau < options.min_step {
                return Err(Error::KrylovConvergence {
                    time: t_start + elapsed,
                    step: tau,
                });
            }
        };
        krylov.combine(&coeffs, psi);
        remaining -= tau;
        elapsed += tau;
        stats.steps += 1;
        stats.min_step = stats.min_step.min(tau);
    }
    Ok(())
}

struct Krylov {
    norm: f64,
    basis: Vec<Vec<C64>>,
    /// Eigenvalues and eigenvectors of the tridiagonal projection.
    values: Array1<f64>,
    vectors: Array2<f64>,
    /// Norm of the residual vector after the last basis vector, zero on
    /// breakdown (the subspace is invariant).
    residual: f64,
}

impl Krylov {
    fn build(h: &SparseHamiltonian, psi: &[C64], max_dim: usize) -> Self {
        let dim = h.dim();
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let m_cap = max_dim.min(dim);
        let mut basis: Vec<Vec<C64>> = vec![psi.iter().map(|z| z / norm).collect()];
        let mut alpha = Vec::with_capacity(m_cap);
        let mut beta: Vec<f64> = Vec::with_capacity(m_cap);
        let mut w = vec![C64::new(0.0, 0.0); dim];
        let mut residual = 0.0;
        loop {
            let j = basis.len() - 1;
            h.apply(&basis[j], &mut w);
            let a = dot(&basis[j], &w).re;
            alpha.push(a);
            // Full reorthogonalization, applied twice.
            for _ in 0..2 {
                for q in &basis {
                    let c = dot(q, &w);
                    for (wi, qi) in w.iter_mut().zip(q) {
                        *wi -= c * qi;
                    }
                }
            }
            let b = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let scale = a.abs().max(beta.last().copied().unwrap_or(0.0)).max(1.0);
            if b <= 1e-14 * scale {
                break;
            }
            if basis.len() == m_cap {
                residual = b;
                break;
            }
            beta.push(b);
            basis.push(w.iter().map(|z| z / b).collect());
        }
        let m = alpha.len();
        let mut t = Array2::zeros((m, m));
        for i in 0..m {
            t[[i, i]] = alpha[i];
        }
        for (i, &b) in beta.iter().enumerate() {
            t[[i, i + 1]] = b;
            t[[i + 1, i]] = b;
        }
        let (values, vectors) = t.eigh(UPLO::Lower).expect("symmetric tridiagonal eigensolve");
        Self {
            norm,
            basis,
            values,
            vectors,
            residual,
        }
    }

    /// `exp(-i T tau) e_1` and the residual estimate of the step.
    fn coefficients(&self, tau: f64) -> (Vec<C64>, f64) {
        let m = self.values.len();
        let c: Vec<C64> = (0..m)
            .map(|i| {
                (0..m)
                    .map(|k| {
                        C64::from_polar(self.vectors[[i, k]] * self.vectors[[0, k]], -self.values[k] * tau)
                    })
                    .sum()
            })
            .collect();
        let err = self.norm * self.residual * c[m - 1].norm();
        (c, err)
    }

    fn combine(&self, coeffs: &[C64], psi: &mut [C64]) {
        psi.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        for (q, c) in self.basis.iter().zip(coeffs) {
            let c = c * self.norm;
            for (p, qi) in psi.iter_mut().zip(q) {
                *p += c * qi;
            }
        }
    }
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn emitter_bloch(handle: &HamiltonianHandle, psi: &[C64]) -> [f64; 3] {
    let stride = handle.strides()[handle.emitter_site()];
    let mut rho = [[C64::new(0.0, 0.0); 2]; 2];
    for idx in 0..psi.len() {
        if !(idx / stride).is_multiple_of(2) {
            continue;
        }
        let (up, down) = (psi[idx], psi[idx + stride]);
        rho[0][0] += up * up.conj();
        rho[0][1] += up * down.conj();
        rho[1][1] += down * down.conj();
    }
    rho[1][0] = rho[0][1].conj();
    bloch_from_rho(rho)
}

/// `b_site psi`.
fn lower(handle: &HamiltonianHandle, site: usize, psi: &[C64]) -> Vec<C64> {
    let stride = handle.strides()[site];
    let d = handle.dims()[site];
    let mut out = vec![C64::new(0.0, 0.0); psi.len()];
    for idx in 0..psi.len() {
        let n = (idx / stride) % d;
        if n > 0 {
            out[idx - stride] = psi[idx] * (n as f64).sqrt();
        }
    }
    out
}

/// Star-basis occupations of the bath with `label`.
fn occupations(handle: &HamiltonianHandle, label: BathLabel, psi: &[C64]) -> Result<Vec<f64>> {
    let sites = handle.bath_sites(label);
    match handle.geometry() {
        Geometry::Star => Ok(sites
            .iter()
            .map(|&s| {
                let stride = handle.strides()[s];
                let d = handle.dims()[s];
                psi.iter()
                    .enumerate()
                    .map(|(idx, z)| ((idx / stride) % d) as f64 * z.norm_sqr())
                    .sum()
            })
            .collect()),
        Geometry::Chain => {
            let chain = handle
                .chains()
                .iter()
                .find(|c| c.source().label() == label)
                .expect("every bath has a chain");
            let lowered: Vec<Vec<C64>> = sites.iter().map(|&s| lower(handle, s, psi)).collect();
            let n = sites.len();
            let mut corr = Array2::zeros((n, n));
            for j in 0..n {
                for l in j..n {
                    let v = dot(&lowered[j], &lowered[l]);
                    corr[[j, l]] = v;
                    corr[[l, j]] = v.conj();
                }
            }
            if n == 0 {
                return Ok(vec![0.0; chain.source().len()]);
            }
            chain.star_occupations(&corr)
        }
    }
}
