//! Assembly of the emitter plus bath Hamiltonian
//!
//! ```text
//! H = (omega_a / 2) sigma_z + Σ_k omega_k a_k^† a_k - sigma_x ⊗ Σ_k g_k (a_k + a_k^†)
//! ```
//!
//! in one of two geometries. In the star geometry every mode is a site
//! coupled directly to the emitter. In the chain geometry each bath is first
//! mapped to a nearest-neighbour chain ([`crate::bath::chain_map`]) and the
//! sites are laid out as `[M chain reversed, emitter, S chain]`, or
//! `[emitter, chain]` for a single bath, so that every coupling is between
//! adjacent sites.
//!
//! All matrix elements are real. Emitter basis index 0 is the excited state
//! (`sigma_z = +1`).

use ndarray::{array, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::SystemModel;
use crate::bath::{chain_map, BathLabel, ChainBath};
use crate::error::{Error, Result};

/// Default cap on the number of amplitudes of a full-space state.
pub const DEFAULT_DIMENSION_CAP: usize = 2_000_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    #[default]
    Chain,
    Star,
}

/// What occupies a site.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SiteKind {
    Emitter,
    /// Chain site `index` of a bath (chain geometry) or mode `index` of a
    /// bath (star geometry).
    Mode { label: BathLabel, index: usize },
}

/// `coeff * left_op ⊗ right_op` acting on sites `left < right`.
#[derive(Clone, Debug, PartialEq)]
pub struct Coupling {
    pub left: usize,
    pub right: usize,
    pub coeff: f64,
    pub left_op: Array2<f64>,
    pub right_op: Array2<f64>,
}

/// Term structure of the Hamiltonian on a concrete site layout.
#[derive(Clone, Debug)]
pub struct HamiltonianHandle {
    geometry: Geometry,
    sites: Vec<SiteKind>,
    dims: Vec<usize>,
    onsite: Vec<Array2<f64>>,
    couplings: Vec<Coupling>,
    emitter_site: usize,
    chains: Vec<ChainBath>,
}

pub fn sigma_x() -> Array2<f64> {
    array![[0.0, 1.0], [1.0, 0.0]]
}

pub fn sigma_z() -> Array2<f64> {
    array![[1.0, 0.0], [0.0, -1.0]]
}

/// Truncated annihilation operator on `dim` Fock states.
pub fn annihilation(dim: usize) -> Array2<f64> {
    let mut b = Array2::zeros((dim, dim));
    for n in 1..dim {
        b[[n - 1, n]] = (n as f64).sqrt();
    }
    b
}

pub fn number(dim: usize) -> Array2<f64> {
    Array2::from_diag(&ndarray::Array1::from_iter((0..dim).map(|n| n as f64)))
}

fn quadrature(dim: usize) -> Array2<f64> {
    let b = annihilation(dim);
    &b + &b.t()
}

/// Builds the term structure of `model` in the requested geometry.
pub fn build_hamiltonian(model: &SystemModel, geometry: Geometry) -> Result<HamiltonianHandle> {
    let omega_a = model.emitter().omega_a();
    let mut sites = Vec::new();
    let mut dims = Vec::new();
    let mut onsite = Vec::new();
    let mut couplings = Vec::new();
    let mut chains = Vec::new();
    let emitter_site;
    match geometry {
        Geometry::Star => {
            emitter_site = 0;
            sites.push(SiteKind::Emitter);
            dims.push(2);
            onsite.push(sigma_z() * (0.5 * omega_a));
            for bath in model.baths() {
                let d = bath.n_max();
                for (k, (&w, &g)) in bath.mode_freqs().iter().zip(bath.mode_couplings()).enumerate() {
                    let site = sites.len();
                    sites.push(SiteKind::Mode {
                        label: bath.label(),
                        index: k,
                    });
                    dims.push(d);
                    onsite.push(number(d) * w);
                    couplings.push(Coupling {
                        left: 0,
                        right: site,
                        coeff: -g,
                        left_op: sigma_x(),
                        right_op: quadrature(d),
                    });
                }
            }
        }
        Geometry::Chain => {
            for bath in model.baths() {
                chains.push(chain_map(bath)?);
            }
            // A left chain exists only in the two-bath layout.
            let (left, right) = match chains.len() {
                1 => (None, &chains[0]),
                _ => (Some(&chains[0]), &chains[1]),
            };
            if let Some(c) = left {
                let d = c.source().n_max();
                for j in (0..c.len()).rev() {
                    sites.push(SiteKind::Mode {
                        label: c.source().label(),
                        index: j,
                    });
                    dims.push(d);
                    onsite.push(number(d) * c.site_energies()[j]);
                }
            }
            emitter_site = sites.len();
            sites.push(SiteKind::Emitter);
            dims.push(2);
            onsite.push(sigma_z() * (0.5 * omega_a));
            let d = right.source().n_max();
            for j in 0..right.len() {
                sites.push(SiteKind::Mode {
                    label: right.source().label(),
                    index: j,
                });
                dims.push(d);
                onsite.push(number(d) * right.site_energies()[j]);
            }
            if let Some(c) = left {
                let d = c.source().n_max();
                if !c.is_empty() {
                    couplings.push(Coupling {
                        left: emitter_site - 1,
                        right: emitter_site,
                        coeff: -c.emitter_coupling(),
                        left_op: quadrature(d),
                        right_op: sigma_x(),
                    });
                }
                for (j, &t) in c.hop_amplitudes().iter().enumerate() {
                    // Chain sites j and j + 1 sit at emitter_site - 1 - j and one to the left.
                    let right_site = emitter_site - 1 - j;
                    couplings.extend(hopping(right_site - 1, right_site, t, d));
                }
            }
            if !right.is_empty() {
                couplings.push(Coupling {
                    left: emitter_site,
                    right: emitter_site + 1,
                    coeff: -right.emitter_coupling(),
                    left_op: sigma_x(),
                    right_op: quadrature(d),
                });
            }
            for (j, &t) in right.hop_amplitudes().iter().enumerate() {
                let left_site = emitter_site + 1 + j;
                couplings.extend(hopping(left_site, left_site + 1, t, d));
            }
        }
    }
    Ok(HamiltonianHandle {
        geometry,
        sites,
        dims,
        onsite,
        couplings,
        emitter_site,
        chains,
    })
}

fn hopping(left: usize, right: usize, t: f64, d: usize) -> [Coupling; 2] {
    let b = annihilation(d);
    let bd = b.t().to_owned();
    [
        Coupling {
            left,
            right,
            coeff: t,
            left_op: bd.clone(),
            right_op: b.clone(),
        },
        Coupling {
            left,
            right,
            coeff: t,
            left_op: b,
            right_op: bd,
        },
    ]
}

impl HamiltonianHandle {
    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn sites(&self) -> &[SiteKind] {
        &self.sites
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn onsite(&self, site: usize) -> &Array2<f64> {
        &self.onsite[site]
    }

    pub fn couplings(&self) -> &[Coupling] {
        &self.couplings
    }

    pub fn emitter_site(&self) -> usize {
        self.emitter_site
    }

    /// Chain baths in layout order (empty in the star geometry).
    pub fn chains(&self) -> &[ChainBath] {
        &self.chains
    }

    /// Sites of the bath with `label`, ordered by chain or mode index.
    pub fn bath_sites(&self, label: BathLabel) -> Vec<usize> {
        let mut found: Vec<(usize, usize)> = self
            .sites
            .iter()
            .enumerate()
            .filter_map(|(s, kind)| match kind {
                SiteKind::Mode { label: l, index } if *l == label => Some((*index, s)),
                _ => None,
            })
            .collect();
        found.sort();
        found.into_iter().map(|(_, s)| s).collect()
    }

    /// Number of amplitudes of a full-space state.
    pub fn dimension(&self) -> u128 {
        self.dims.iter().map(|&d| d as u128).product()
    }

    pub fn is_nearest_neighbor(&self) -> bool {
        self.couplings.iter().all(|c| c.right == c.left + 1)
    }

    /// Two-site Hamiltonian of bond `(site, site + 1)` on the product space
    /// `d_site * d_{site+1}`, with on-site terms shared between the bonds
    /// that touch a site (half each for interior sites, all of it at the
    /// ends).
    pub fn bond_hamiltonian(&self, site: usize) -> Array2<f64> {
        let last = self.sites.len() - 1;
        let (d1, d2) = (self.dims[site], self.dims[site + 1]);
        let w1 = if site == 0 { 1.0 } else { 0.5 };
        let w2 = if site + 1 == last { 1.0 } else { 0.5 };
        let mut h = kron(&(&self.onsite[site] * w1), &Array2::eye(d2));
        h += &kron(&Array2::eye(d1), &(&self.onsite[site + 1] * w2));
        for c in self.couplings.iter().filter(|c| c.left == site && c.right == site + 1) {
            h.scaled_add(c.coeff, &kron(&c.left_op, &c.right_op));
        }
        h
    }

    /// Sparse full-space matrix. Fails if the space has more than `cap`
    /// amplitudes.
    pub fn sparse(&self, cap: usize) -> Result<SparseHamiltonian> {
        let dim = self.dimension();
        if dim > cap as u128 {
            return Err(Error::OracleUnavailable { required: dim, cap });
        }
        let dim = dim as usize;
        let strides = self.strides();
        let n_sites = self.sites.len();
        let mut indptr = Vec::with_capacity(dim + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        let mut digits = vec![0usize; n_sites];
        let mut row: Vec<(usize, f64)> = Vec::new();
        indptr.push(0);
        for state in 0..dim {
            let mut rest = state;
            for s in 0..n_sites {
                digits[s] = rest / strides[s];
                rest %= strides[s];
            }
            row.clear();
            // Entries H[state, col] = <state| H |col>; H is real symmetric so
            // the column of `state` is used.
            for s in 0..n_sites {
                let op = &self.onsite[s];
                for out in 0..self.dims[s] {
                    let v = op[[out, digits[s]]];
                    if v != 0.0 {
                        let target = state + out * strides[s] - digits[s] * strides[s];
                        row.push((target, v));
                    }
                }
            }
            for c in &self.couplings {
                let (l, r) = (c.left, c.right);
                for out_l in 0..self.dims[l] {
                    let vl = c.left_op[[out_l, digits[l]]];
                    if vl == 0.0 {
                        continue;
                    }
                    for out_r in 0..self.dims[r] {
                        let vr = c.right_op[[out_r, digits[r]]];
                        if vr == 0.0 {
                            continue;
                        }
                        let target = state + out_l * strides[l] + out_r * strides[r]
                            - digits[l] * strides[l]
                            - digits[r] * strides[r];
                        row.push((target, c.coeff * vl * vr));
                    }
                }
            }
            row.sort_by_key(|e| e.0);
            let mut i = 0;
            while i < row.len() {
                let col = row[i].0;
                let mut v = 0.0;
                while i < row.len() && row[i].0 == col {
                    v += row[i].1;
                    i += 1;
                }
                if v != 0.0 {
                    indices.push(col);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Ok(SparseHamiltonian {
            dim,
            indptr,
            indices,
            values,
        })
    }

    /// Row-major strides: the last site varies fastest.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1usize; self.dims.len()];
        for s in (0..self.dims.len().saturating_sub(1)).rev() {
            strides[s] = strides[s + 1] * self.dims[s + 1];
        }
        strides
    }
}

/// Kronecker product of two real matrices.
pub fn kron(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let v = a[[i, j]];
            if v != 0.0 {
                out.slice_mut(ndarray::s![i * br..(i + 1) * br, j * bc..(j + 1) * bc])
                    .assign(&(b * v));
            }
        }
    }
    out
}

/// Real sparse matrix in compressed-row form.
#[derive(Clone, Debug)]
pub struct SparseHamiltonian {
    dim: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseHamiltonian {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn apply(&self, x: &[C64], y: &mut [C64]) {
        for (row, out) in y.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.indptr[row]..self.indptr[row + 1] {
                acc += x[self.indices[k]] * self.values[k];
            }
            *out = acc;
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let span = &self.indices[self.indptr[row]..self.indptr[row + 1]];
        match span.binary_search(&col) {
            Ok(k) => self.values[self.indptr[row] + k],
            Err(_) => 0.0,
        }
    }

    /// `max |H_ij - H_ji|` over stored entries.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for row in 0..self.dim {
            for k in self.indptr[row]..self.indptr[row + 1] {
                let col = self.indices[k];
                worst = worst.max((self.values[k] - self.get(col, row)).abs());
            }
        }
        worst
    }

    /// `<x| H |x>`.
    pub fn expectation(&self, x: &[C64]) -> f64 {
        let mut hx = vec![C64::new(0.0, 0.0); self.dim];
        self.apply(x, &mut hx);
        x.iter().zip(&hx).map(|(a, b)| (a.conj() * b).re).sum()
    }

    /// Dense copy, for tests on tiny spaces.
    pub fn to_dense(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.dim, self.dim));
        for row in 0..self.dim {
            for k in self.indptr[row]..self.indptr[row + 1] {
                m[[row, self.indices[k]]] = self.values[k];
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::DiscretizedBath;
    use crate::dynamics::EmitterSpec;
    use ndarray_linalg::{Eigh, UPLO};

    fn model() -> SystemModel {
        let emitter = EmitterSpec::new(1.0, [1.0, 0.0, 0.0]).unwrap();
        let m = DiscretizedBath::new(BathLabel::M, vec![0.5, 1.0], vec![0.1, 0.2]).unwrap();
        let s = DiscretizedBath::new(BathLabel::S, vec![0.7, 1.4], vec![0.3, 0.05]).unwrap();
        SystemModel::new(emitter, vec![m, s]).unwrap()
    }

    #[test]
    fn layout_order() {
        let h = build_hamiltonian(&model(), Geometry::Chain).unwrap();
        assert_eq!(h.emitter_site(), 2);
        assert_eq!(
            h.sites()[0],
            SiteKind::Mode {
                label: BathLabel::M,
                index: 1
            }
        );
        assert_eq!(h.bath_sites(BathLabel::M), vec![1, 0]);
        assert_eq!(h.bath_sites(BathLabel::S), vec![3, 4]);
        assert!(h.is_nearest_neighbor());
        let star = build_hamiltonian(&model(), Geometry::Star).unwrap();
        assert!(!star.is_nearest_neighbor());
        assert_eq!(star.dimension(), 2 * 81);
    }

    #[test]
    fn sparse_is_symmetric_and_geometries_share_low_spectrum() {
        // With enough Fock states the two geometries are unitarily equivalent;
        // compare the lowest eigenvalues at n_max = 7.
        let emitter = EmitterSpec::new(1.0, [1.0, 0.0, 0.0]).unwrap();
        let b = DiscretizedBath::new(BathLabel::Eq, vec![0.5, 1.0, 1.4], vec![0.1, 0.2, 0.05])
            .unwrap()
            .with_n_max(7)
            .unwrap();
        let model = SystemModel::new(emitter, vec![b]).unwrap();
        let mut lows = Vec::new();
        for g in [Geometry::Chain, Geometry::Star] {
            let h = build_hamiltonian(&model, g).unwrap().sparse(DEFAULT_DIMENSION_CAP).unwrap();
            assert_eq!(h.hermiticity_defect(), 0.0);
            let (e, _) = h.to_dense().eigh(UPLO::Lower).unwrap();
            lows.push(e.iter().take(4).cloned().collect::<Vec<_>>());
        }
        for (a, b) in lows[0].iter().zip(&lows[1]) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn bond_terms_sum_to_full_hamiltonian() {
        let handle = build_hamiltonian(&model(), Geometry::Chain).unwrap();
        let full = handle.sparse(DEFAULT_DIMENSION_CAP).unwrap().to_dense();
        let n = handle.sites().len();
        let mut sum: Array2<f64> = Array2::zeros(full.dim());
        for b in 0..n - 1 {
            let left: usize = handle.dims()[..b].iter().product();
            let right: usize = handle.dims()[b + 2..].iter().product();
            let term = kron(&kron(&Array2::eye(left), &handle.bond_hamiltonian(b)), &Array2::eye(right));
            sum += &term;
        }
        let defect = (&sum - &full).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(defect < 1e-14);
    }

    #[test]
    fn dimension_cap() {
        let handle = build_hamiltonian(&model(), Geometry::Chain).unwrap();
        assert!(matches!(handle.sparse(10), Err(Error::OracleUnavailable { .. })));
    }
}
