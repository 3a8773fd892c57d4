//! Time-evolving block decimation on the chain layout.
//!
//! The state is an open-boundary matrix product state with site tensors of
//! shape `(chi_left, d, chi_right)`. One step of the second-order scheme
//! sweeps the bond gates `exp(-i h_b tau / 2)` left to right and then right
//! to left, so the orthogonality center returns to site 0 after every step.
//! The fourth-order scheme composes three second-order steps with Yoshida
//! weights.
//!
//! Two-site tensors are split by SVD with singular values in descending
//! order, truncated to `chi_max` and to a discarded weight of at most
//! `svd_cutoff`, and renormalized. The phase of every left singular vector is
//! fixed by making its first entry of magnitude above `1e-12` real and
//! positive, so runs are reproducible.

use ndarray::{Array1, Array2, Array3, ArrayView2, Axis};
use ndarray_linalg::{Eigh, JobSvd, SVDDC, SVD, UPLO};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::hamiltonian::{annihilation, build_hamiltonian, number, Geometry, HamiltonianHandle};
use super::{bloch_from_rho, sample_count, OccupationSeries, SolverMeta, SystemModel, Trajectory};
use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrotterOrder {
    #[default]
    Second,
    Fourth,
}

impl TrotterOrder {
    /// Second-order step fractions making up one step.
    fn fractions(self) -> Vec<f64> {
        match self {
            TrotterOrder::Second => vec![1.0],
            TrotterOrder::Fourth => {
                let w1 = 1.0 / (2.0 - 2f64.cbrt());
                let w0 = 1.0 - 2.0 * w1;
                vec![w1, w0, w1]
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MpsOptions {
    pub dt: f64,
    pub chi_max: usize,
    pub svd_cutoff: f64,
    pub order: TrotterOrder,
    /// Record observables every this many steps.
    pub sample_every: usize,
    /// Record occupations every this many samples; 0 records only the last
    /// sample.
    pub occupation_every: usize,
    /// Accumulated discarded weight above which a warning is attached.
    pub warn_discarded: f64,
}

impl Default for MpsOptions {
    fn default() -> Self {
        Self {
            dt: 0.02,
            chi_max: 64,
            svd_cutoff: 1e-12,
            order: TrotterOrder::Second,
            sample_every: 1,
            occupation_every: 1,
            warn_discarded: 1e-6,
        }
    }
}

impl MpsOptions {
    /// Checks the options without running anything.
    pub fn validate(&self) -> Result<()> {
        if self.chi_max == 0 {
            return Err(invalid("chi_max", "bond dimension must be at least 1"));
        }
        if !(self.svd_cutoff >= 0.0 && self.svd_cutoff < 1.0) {
            return Err(invalid("svd_cutoff", format!("must lie in [0, 1), got {}", self.svd_cutoff)));
        }
        if self.sample_every == 0 {
            return Err(invalid("sample_every", "must be at least 1"));
        }
        Ok(())
    }
}

/// Propagates `model` to `t_max` with TEBD on the chain layout.
///
/// Needs a pure emitter state and vacuum baths.
pub fn evolve_mps(model: &SystemModel, t_max: f64, options: &MpsOptions) -> Result<Trajectory> {
    options.validate()?;
    let sample_dt = options.dt * options.sample_every as f64;
    let n_samples = sample_count(t_max, sample_dt)?;
    if !model.baths_in_vacuum() {
        return Err(Error::Usage(
            "the MPS engine starts from vacuum baths; use the exact oracle for thermal baths".into(),
        ));
    }
    let handle = build_hamiltonian(model, Geometry::Chain)?;
    let mut state = Mps::product(&handle, model.emitter().pure_state()?);
    let propagator = Propagator::new(&handle, options)?;

    let times: Vec<f64> = (0..=n_samples).map(|i| i as f64 * sample_dt).collect();
    let mut bloch = Vec::with_capacity(times.len());
    let mut occupations: Vec<OccupationSeries> = model
        .baths()
        .iter()
        .map(|b| OccupationSeries {
            label: b.label(),
            mode_freqs: b.mode_freqs().to_vec(),
            times: Vec::new(),
            values: Vec::new(),
        })
        .collect();
    let mut bond_dims = Vec::with_capacity(times.len());
    let mut discarded_weight = Vec::with_capacity(times.len());
    let mut discarded = 0.0;

    for i in 0..times.len() {
        if i > 0 {
            for _ in 0..options.sample_every {
                discarded += propagator.step(&mut state)?;
            }
        }
        bloch.push(state.bloch(&handle));
        bond_dims.push(state.max_bond());
        discarded_weight.push(discarded);
        let record = if options.occupation_every == 0 {
            i == times.len() - 1
        } else {
            i % options.occupation_every == 0 || i == times.len() - 1
        };
        if record {
            for series in occupations.iter_mut() {
                let chain = handle
                    .chains()
                    .iter()
                    .find(|c| c.source().label() == series.label)
                    .expect("every bath has a chain");
                let sites = handle.bath_sites(series.label);
                let values = if sites.is_empty() {
                    vec![0.0; chain.source().len()]
                } else {
                    chain.star_occupations(&state.hopping_correlations(&handle, &sites))?
                };
                series.times.push(times[i]);
                series.values.push(values);
            }
        }
    }
    let mut warnings = Vec::new();
    if discarded > options.warn_discarded {
        warnings.push(format!(
            "accumulated discarded weight {discarded:.3e} exceeds {:.1e}",
            options.warn_discarded
        ));
    }
    Ok(Trajectory {
        times,
        bloch,
        occupations,
        solver_meta: SolverMeta::Mps {
            dt: options.dt,
            order: options.order,
            chi_max: options.chi_max,
            svd_cutoff: options.svd_cutoff,
            bond_dims,
            discarded_weight,
        },
        warnings,
    })
}

/// Eigen-decomposed bond Hamiltonians and the gates built from them.
struct Propagator {
    /// Gates for each second-order fraction: `gates[f][b]` is
    /// `exp(-i h_b w_f dt / 2)`. A single-site chain has one on-site gate per
    /// fraction with the full `w_f dt`.
    gates: Vec<Vec<Array2<C64>>>,
    chi_max: usize,
    svd_cutoff: f64,
}

impl Propagator {
    fn new(handle: &HamiltonianHandle, options: &MpsOptions) -> Result<Self> {
        let n = handle.sites().len();
        let terms: Vec<Array2<f64>> = if n == 1 {
            vec![handle.onsite(0).clone()]
        } else {
            (0..n - 1).map(|b| handle.bond_hamiltonian(b)).collect()
        };
        let spectra = terms
            .iter()
            .map(|h| Ok(h.eigh(UPLO::Lower)?))
            .collect::<Result<Vec<(Array1<f64>, Array2<f64>)>>>()?;
        let half = if n == 1 { 1.0 } else { 0.5 };
        let gates = options
            .order
            .fractions()
            .into_iter()
            .map(|w| {
                spectra
                    .iter()
                    .map(|(vals, vecs)| exp_gate(vals, vecs, w * options.dt * half))
                    .collect()
            })
            .collect();
        Ok(Self {
            gates,
            chi_max: options.chi_max,
            svd_cutoff: options.svd_cutoff,
        })
    }

    /// One full step; returns the discarded weight.
    fn step(&self, state: &mut Mps) -> Result<f64> {
        let n = state.tensors.len();
        let mut discarded = 0.0;
        for gates in &self.gates {
            if n == 1 {
                state.apply_onsite(&gates[0]);
                continue;
            }
            for (b, gate) in gates.iter().enumerate() {
                discarded += state.apply_bond(b, gate, Sweep::Right, self.chi_max, self.svd_cutoff)?;
            }
            for (b, gate) in gates.iter().enumerate().rev() {
                discarded += state.apply_bond(b, gate, Sweep::Left, self.chi_max, self.svd_cutoff)?;
            }
        }
        Ok(discarded)
    }
}

/// `V exp(-i diag(lambda) tau) V^T`.
fn exp_gate(vals: &Array1<f64>, vecs: &Array2<f64>, tau: f64) -> Array2<C64> {
    let n = vals.len();
    let mut out = Array2::zeros((n, n));
    for k in 0..n {
        let phase = C64::from_polar(1.0, -vals[k] * tau);
        for i in 0..n {
            let vik = vecs[[i, k]] * phase;
            for j in 0..n {
                out[[i, j]] += vik * vecs[[j, k]];
            }
        }
    }
    out
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Sweep {
    /// Leave the left tensor left-canonical; the center moves right.
    Right,
    /// Leave the right tensor right-canonical; the center moves left.
    Left,
}

struct Mps {
    tensors: Vec<Array3<C64>>,
}

impl Mps {
    /// Emitter in `emitter`, every bath site in its vacuum.
    fn product(handle: &HamiltonianHandle, emitter: [C64; 2]) -> Self {
        let tensors = handle
            .sites()
            .iter()
            .enumerate()
            .map(|(s, _)| {
                let d = handle.dims()[s];
                let mut t = Array3::zeros((1, d, 1));
                if s == handle.emitter_site() {
                    t[[0, 0, 0]] = emitter[0];
                    t[[0, 1, 0]] = emitter[1];
                } else {
                    t[[0, 0, 0]] = C64::new(1.0, 0.0);
                }
                t
            })
            .collect();
        Self { tensors }
    }

    fn max_bond(&self) -> usize {
        self.tensors.iter().map(|t| t.dim().2).max().unwrap_or(1)
    }

    fn apply_onsite(&mut self, gate: &Array2<C64>) {
        let t = &mut self.tensors[0];
        let (l, d, r) = t.dim();
        let mut out = Array3::zeros((l, d, r));
        for a in 0..l {
            for c in 0..r {
                let col = t.slice(ndarray::s![a, .., c]).to_owned();
                out.slice_mut(ndarray::s![a, .., c]).assign(&gate.dot(&col));
            }
        }
        *t = out;
    }

    fn apply_bond(
        &mut self,
        bond: usize,
        gate: &Array2<C64>,
        sweep: Sweep,
        chi_max: usize,
        cutoff: f64,
    ) -> Result<f64> {
        let (l, d1, m) = self.tensors[bond].dim();
        let (_, d2, r) = self.tensors[bond + 1].dim();
        let a = self.tensors[bond]
            .view()
            .into_shape_with_order((l * d1, m))
            .expect("site tensors are contiguous");
        let b = self.tensors[bond + 1]
            .view()
            .into_shape_with_order((m, d2 * r))
            .expect("site tensors are contiguous");
        // theta[(a, s1), (s2, c)] viewed as [a][(s1, s2)][c].
        let theta = a.dot(&b).into_shape_with_order((l, d1 * d2, r)).expect("contiguous");
        let mut gated = Array3::<C64>::zeros((l, d1 * d2, r));
        for x in 0..l {
            gated
                .index_axis_mut(Axis(0), x)
                .assign(&gate.dot(&theta.index_axis(Axis(0), x)));
        }
        let matrix = gated.into_shape_with_order((l * d1, d2 * r)).expect("contiguous");
        let (u, s, vt) = svd(&matrix)?;

        let total: f64 = s.iter().map(|v| v * v).sum();
        let mut keep = s.len().min(chi_max).max(1);
        let mut tail: f64 = s.iter().skip(keep).map(|v| v * v).sum();
        while keep > 1 && tail + s[keep - 1] * s[keep - 1] <= cutoff * total {
            keep -= 1;
            tail += s[keep] * s[keep];
        }
        let kept_norm = (total - tail).max(0.0).sqrt();
        let discarded = if total > 0.0 { tail / total } else { 0.0 };

        let mut u = u.slice(ndarray::s![.., ..keep]).to_owned();
        let mut vt = vt.slice(ndarray::s![..keep, ..]).to_owned();
        fix_phases(&mut u, &mut vt);
        let weights: Vec<f64> = s.iter().take(keep).map(|v| v / kept_norm).collect();
        match sweep {
            Sweep::Right => {
                for (k, w) in weights.iter().enumerate() {
                    vt.row_mut(k).mapv_inplace(|z| z * w);
                }
            }
            Sweep::Left => {
                for (k, w) in weights.iter().enumerate() {
                    u.column_mut(k).mapv_inplace(|z| z * w);
                }
            }
        }
        self.tensors[bond] = u
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((l, d1, keep))
            .expect("contiguous");
        self.tensors[bond + 1] = vt
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((keep, d2, r))
            .expect("contiguous");
        Ok(discarded)
    }

    /// Reduced emitter state; needs the center at site 0.
    fn bloch(&self, handle: &HamiltonianHandle) -> [f64; 3] {
        let p = handle.emitter_site();
        let mut env = Array2::from_elem((1, 1), C64::new(1.0, 0.0));
        for t in &self.tensors[..p] {
            env = transfer(&env, t, None);
        }
        let rho = reduced(&env, &self.tensors[p]);
        bloch_from_rho([[rho[[0, 0]], rho[[0, 1]]], [rho[[1, 0]], rho[[1, 1]]]])
    }

    /// `corr[j, l] = <b_{sites[j]}^† b_{sites[l]}>`; needs the center at
    /// site 0.
    fn hopping_correlations(&self, handle: &HamiltonianHandle, sites: &[usize]) -> Array2<C64> {
        let n = sites.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&j| sites[j]);
        let mut corr = Array2::zeros((n, n));
        let mut env = Array2::from_elem((1, 1), C64::new(1.0, 0.0));
        let mut pos = 0;
        for (rank, &j) in order.iter().enumerate() {
            let x = sites[j];
            while pos < x {
                env = transfer(&env, &self.tensors[pos], None);
                pos += 1;
            }
            let d = handle.dims()[x];
            let b = annihilation(d).mapv(C64::from);
            let bd = b.t().to_owned();
            corr[[j, j]] = close(&env, &self.tensors[x], &number(d).mapv(C64::from));
            // Carry b^† (and separately b) from x to the right.
            let mut raise = transfer(&env, &self.tensors[x], Some(&bd));
            let mut at = x + 1;
            for &l in &order[rank + 1..] {
                let y = sites[l];
                while at < y {
                    raise = transfer(&raise, &self.tensors[at], None);
                    at += 1;
                }
                let dy = handle.dims()[y];
                let v = close(&raise, &self.tensors[y], &annihilation(dy).mapv(C64::from));
                corr[[j, l]] = v;
                corr[[l, j]] = v.conj();
            }
        }
        corr
    }
}

/// `E'[b, b'] = Σ conj(A[a, s, b]) E[a, a'] O[s, s'] A[a', s', b']`.
fn transfer(env: &Array2<C64>, a: &Array3<C64>, op: Option<&Array2<C64>>) -> Array2<C64> {
    let (_, d, r) = a.dim();
    let mut out = Array2::zeros((r, r));
    // E A_{s'} for every s'.
    let ea: Vec<Array2<C64>> = (0..d).map(|s| env.dot(&a.index_axis(Axis(1), s))).collect();
    for s in 0..d {
        let bra = a.index_axis(Axis(1), s).mapv(|z| z.conj());
        let ket = match op {
            None => ea[s].clone(),
            Some(o) => {
                let mut acc = Array2::zeros(ea[0].dim());
                for (sp, e) in ea.iter().enumerate() {
                    let w = o[[s, sp]];
                    if w != C64::new(0.0, 0.0) {
                        acc.scaled_add(w, e);
                    }
                }
                acc
            }
        };
        out += &bra.t().dot(&ket);
    }
    out
}

/// `Σ conj(A[a, s, b]) E[a, a'] O[s, s'] A[a', s', b]`, with the right side
/// closed by the identity (right-canonical remainder).
fn close(env: &Array2<C64>, a: &Array3<C64>, op: &Array2<C64>) -> C64 {
    let rho = reduced(env, a);
    let d = op.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for s in 0..d {
        for sp in 0..d {
            acc += op[[s, sp]] * rho[[sp, s]];
        }
    }
    acc
}

/// `rho[s', s] = Σ conj(A[a, s, b]) E[a, a'] A[a', s', b]`.
fn reduced(env: &Array2<C64>, a: &Array3<C64>) -> Array2<C64> {
    let d = a.dim().1;
    let mut rho = Array2::zeros((d, d));
    let ea: Vec<Array2<C64>> = (0..d).map(|s| env.dot(&a.index_axis(Axis(1), s))).collect();
    for s in 0..d {
        let bra = a.index_axis(Axis(1), s);
        for sp in 0..d {
            let v: C64 = bra.iter().zip(ea[sp].iter()).map(|(x, y)| x.conj() * y).sum();
            rho[[sp, s]] = v;
        }
    }
    rho
}

fn svd(m: &Array2<C64>) -> Result<(Array2<C64>, Array1<f64>, Array2<C64>)> {
    match m.svddc(JobSvd::Some) {
        Ok((Some(u), s, Some(vt))) => Ok((u, s, vt)),
        _ => match m.svd(true, true) {
            Ok((Some(u), s, Some(vt))) => {
                let k = s.len();
                Ok((
                    u.slice(ndarray::s![.., ..k]).to_owned(),
                    s,
                    vt.slice(ndarray::s![..k, ..]).to_owned(),
                ))
            }
            Ok(_) => Err(Error::Linalg("SVD returned no singular vectors".into())),
            Err(e) => Err(e.into()),
        },
    }
}

/// Makes the first significant entry of every column of `u` real positive and
/// compensates in the matching row of `vt`.
fn fix_phases(u: &mut Array2<C64>, vt: &mut Array2<C64>) {
    for k in 0..u.ncols() {
        let phase = first_significant(u.column(k).view().insert_axis(Axis(1)));
        if let Some(p) = phase {
            u.column_mut(k).mapv_inplace(|z| z * p.conj());
            vt.row_mut(k).mapv_inplace(|z| z * p);
        }
    }
}

fn first_significant(col: ArrayView2<C64>) -> Option<C64> {
    col.iter()
        .find(|z| z.norm() > 1e-12)
        .map(|z| z / z.norm())
}
