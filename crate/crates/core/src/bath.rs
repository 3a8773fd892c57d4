//! Finite bosonic baths: discretization of a spectral density, the star to
//! chain mapping used by the tensor-network engine, and thermal
//! occupations.

use std::fmt;

use ndarray::{Array1, Array2, Axis};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quad;
use crate::spectral::{thermal_factor, SpectralDensity};

/// Which environment a bath stands for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BathLabel {
    M,
    S,
    #[serde(rename = "eq")]
    Eq,
}

impl fmt::Display for BathLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BathLabel::M => "M",
            BathLabel::S => "S",
            BathLabel::Eq => "eq",
        })
    }
}

/// How frequencies and weights are placed on `(0, omega_c]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscretizationRule {
    /// Bin centers of a uniform partition, weight = bin width.
    #[default]
    MidpointLinear,
    /// Gauss-Legendre nodes and weights mapped to `(0, omega_c)`.
    Gauss,
}

/// Default local Fock truncation (states `|0>, |1>, |2>`).
pub const DEFAULT_N_MAX: usize = 3;

/// A finite set of bosonic modes coupled linearly to the emitter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscretizedBath {
    mode_freqs: Vec<f64>,
    mode_couplings: Vec<f64>,
    n_max: usize,
    /// Initial inverse temperature; `f64::INFINITY` is the vacuum. Serialized
    /// as `null` in that case.
    #[serde(with = "inverse_temperature")]
    beta: f64,
    label: BathLabel,
}

mod inverse_temperature {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(beta: &f64, s: S) -> Result<S::Ok, S::Error> {
        if beta.is_infinite() {
            s.serialize_none()
        } else {
            s.serialize_some(beta)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl DiscretizedBath {
    pub fn new(label: BathLabel, mode_freqs: Vec<f64>, mode_couplings: Vec<f64>) -> Result<Self> {
        if mode_freqs.is_empty() {
            return Err(invalid("mode_freqs", "a bath needs at least one mode"));
        }
        if mode_freqs.len() != mode_couplings.len() {
            return Err(invalid(
                "mode_couplings",
                format!("{} couplings for {} modes", mode_couplings.len(), mode_freqs.len()),
            ));
        }
        if !(mode_freqs[0] > 0.0) || mode_freqs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid(
                "mode_freqs",
                "frequencies must be positive and strictly increasing",
            ));
        }
        if mode_freqs.iter().chain(&mode_couplings).any(|v| !v.is_finite()) {
            return Err(invalid("mode_couplings", "values must be finite"));
        }
        Ok(Self {
            mode_freqs,
            mode_couplings,
            n_max: DEFAULT_N_MAX,
            beta: f64::INFINITY,
            label,
        })
    }

    /// Sets the local Fock dimension (`n_max >= 2`).
    pub fn with_n_max(mut self, n_max: usize) -> Result<Self> {
        if n_max < 2 {
            return Err(invalid("n_max", format!("local dimension must be >= 2, got {n_max}")));
        }
        self.n_max = n_max;
        Ok(self)
    }

    /// Sets the initial inverse temperature (`f64::INFINITY` for vacuum).
    pub fn with_beta(mut self, beta: f64) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(invalid("beta", format!("must be positive or infinite, got {beta}")));
        }
        self.beta = beta;
        Ok(self)
    }

    pub fn with_label(mut self, label: BathLabel) -> Self {
        self.label = label;
        self
    }

    pub fn mode_freqs(&self) -> &[f64] {
        &self.mode_freqs
    }

    pub fn mode_couplings(&self) -> &[f64] {
        &self.mode_couplings
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn label(&self) -> BathLabel {
        self.label
    }

    pub fn len(&self) -> usize {
        self.mode_freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mode_freqs.is_empty()
    }

    /// `Σ g_k^2`.
    pub fn total_weight(&self) -> f64 {
        self.mode_couplings.iter().map(|g| g * g).sum()
    }

    /// Initial Bose occupation of every mode.
    pub fn initial_occupations(&self) -> Vec<f64> {
        self.mode_freqs
            .iter()
            .map(|&w| thermal_occupation(w, self.beta))
            .collect()
    }

    /// `C(t) = Σ_k g_k^2 [coth(beta w_k / 2) cos(w_k t) - i sin(w_k t)]`.
    pub fn correlation(&self, times: &[f64]) -> Vec<C64> {
        times
            .iter()
            .map(|&t| {
                self.mode_freqs
                    .iter()
                    .zip(&self.mode_couplings)
                    .map(|(&w, &g)| {
                        let (s, c) = (w * t).sin_cos();
                        g * g * C64::new(thermal_factor(self.beta, w) * c, -s)
                    })
                    .sum()
            })
            .collect()
    }

    /// Modes of `self` followed by the modes of `other`, re-sorted by
    /// frequency. Coincident frequencies are merged into one mode carrying
    /// the combined weight, which leaves the emitter dynamics unchanged.
    pub fn merged(&self, other: &DiscretizedBath, label: BathLabel) -> Result<Self> {
        if self.beta != other.beta && !(self.beta.is_infinite() && other.beta.is_infinite()) {
            return Err(Error::Usage("merged baths must share their temperature".into()));
        }
        let mut modes: Vec<(f64, f64)> = self
            .mode_freqs
            .iter()
            .zip(&self.mode_couplings)
            .chain(other.mode_freqs.iter().zip(&other.mode_couplings))
            .map(|(w, g)| (*w, g * g))
            .collect();
        modes.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut freqs: Vec<f64> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for (w, g2) in modes {
            match freqs.last() {
                Some(&last) if last == w => *weights.last_mut().unwrap() += g2,
                _ => {
                    freqs.push(w);
                    weights.push(g2);
                }
            }
        }
        let couplings = weights.into_iter().map(f64::sqrt).collect();
        Self::new(label, freqs, couplings)?
            .with_n_max(self.n_max.max(other.n_max))?
            .with_beta(self.beta)
    }
}

/// Bose-Einstein occupation `1 / (exp(beta omega) - 1)`, zero at `beta = inf`.
pub fn thermal_occupation(omega: f64, beta: f64) -> f64 {
    if beta.is_infinite() {
        0.0
    } else {
        1.0 / (beta * omega).exp_m1()
    }
}

/// Discretizes a spectral density into `n_modes` modes on `(0, omega_c]`.
///
/// The bath starts in the vacuum with `n_max = 3`; use
/// [`DiscretizedBath::with_beta`] and [`DiscretizedBath::with_n_max`] to
/// change that.
pub fn discretize<D: SpectralDensity + ?Sized>(
    source: &D,
    label: BathLabel,
    n_modes: usize,
    omega_c: f64,
    rule: DiscretizationRule,
) -> Result<DiscretizedBath> {
    if n_modes == 0 {
        return Err(invalid("n_modes", "need at least one mode"));
    }
    if !(omega_c > 0.0) {
        return Err(invalid("omega_c", format!("cut-off must be positive, got {omega_c}")));
    }
    if omega_c > source.max_frequency() * (1.0 + 1e-12) {
        return Err(Error::Domain {
            quantity: "omega_c",
            value: omega_c,
            reason: format!("spectral density is only known up to {}", source.max_frequency()),
        });
    }
    let (nodes, weights) = match rule {
        DiscretizationRule::MidpointLinear => {
            let width = omega_c / n_modes as f64;
            let nodes: Vec<f64> = (0..n_modes).map(|k| (k as f64 + 0.5) * width).collect();
            (nodes, vec![width; n_modes])
        }
        DiscretizationRule::Gauss => {
            let (x, w) = quad::gauss_legendre(n_modes);
            let half = 0.5 * omega_c;
            let nodes = x.iter().map(|x| half * (x + 1.0)).collect();
            let weights = w.iter().map(|w| half * w).collect();
            (nodes, weights)
        }
    };
    let couplings = nodes
        .iter()
        .zip(&weights)
        .map(|(&w, &dw)| Ok((source.density(w)? * dw).sqrt()))
        .collect::<Result<Vec<f64>>>()?;
    DiscretizedBath::new(label, nodes, couplings)
}

/// A bath rewritten as a nearest-neighbour chain whose head couples to the
/// emitter.
///
/// Chain mode `j` is `c_j = Σ_k transform[j, k] a_k`. When the source bath
/// has modes that the emitter cannot reach (degenerate frequencies or zero
/// couplings) the chain is shorter than the bath; those modes never leave
/// their initial state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainBath {
    site_energies: Vec<f64>,
    hop_amplitudes: Vec<f64>,
    emitter_coupling: f64,
    transform: Array2<f64>,
    source: DiscretizedBath,
}

impl ChainBath {
    pub fn site_energies(&self) -> &[f64] {
        &self.site_energies
    }

    /// `hop_amplitudes[j]` couples chain sites `j` and `j + 1`.
    pub fn hop_amplitudes(&self) -> &[f64] {
        &self.hop_amplitudes
    }

    pub fn emitter_coupling(&self) -> f64 {
        self.emitter_coupling
    }

    /// Rows are chain modes expressed in the star basis.
    pub fn transform(&self) -> &Array2<f64> {
        &self.transform
    }

    pub fn source(&self) -> &DiscretizedBath {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.site_energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.site_energies.is_empty()
    }

    /// Whether Lanczos stopped before exhausting the bath.
    pub fn is_truncated(&self) -> bool {
        self.len() < self.source.len()
    }

    /// Tridiagonal single-particle Hamiltonian of the chain.
    pub fn chain_matrix(&self) -> Array2<f64> {
        let n = self.len();
        let mut h = Array2::zeros((n, n));
        for j in 0..n {
            h[[j, j]] = self.site_energies[j];
        }
        for (j, &t) in self.hop_amplitudes.iter().enumerate() {
            h[[j, j + 1]] = t;
            h[[j + 1, j]] = t;
        }
        h
    }

    /// Star-basis emitter couplings rebuilt from the chain head.
    pub fn reconstructed_couplings(&self) -> Vec<f64> {
        if self.is_empty() {
            return vec![0.0; self.source.len()];
        }
        self.transform
            .row(0)
            .iter()
            .map(|v| v * self.emitter_coupling)
            .collect()
    }

    /// Star-mode occupations `<a_k^† a_k>` from the chain correlation matrix
    /// `corr[j, l] = <c_j^† c_l>` (real part suffices: the transform is real
    /// and `corr` is Hermitian).
    pub fn star_occupations(&self, corr: &Array2<C64>) -> Result<Vec<f64>> {
        let n = self.len();
        if corr.dim() != (n, n) {
            return Err(Error::Usage(format!(
                "correlation matrix is {:?}, chain has {n} sites",
                corr.dim()
            )));
        }
        let re = corr.mapv(|z| z.re);
        // diag(V^T R V)
        let rv = re.dot(&self.transform);
        Ok(self
            .transform
            .axis_iter(Axis(1))
            .zip(rv.axis_iter(Axis(1)))
            .map(|(v, w)| v.dot(&w))
            .collect())
    }
}

/// Maps a bath onto a chain by Lanczos tridiagonalization of `diag(omega_k)`
/// seeded with the normalized coupling vector, with full
/// reorthogonalization.
///
/// A bath with all couplings zero maps to an empty chain.
pub fn chain_map(bath: &DiscretizedBath) -> Result<ChainBath> {
    let n = bath.len();
    let freqs = Array1::from(bath.mode_freqs.clone());
    let g = Array1::from(bath.mode_couplings.clone());
    let norm = g.dot(&g).sqrt();
    let scale = freqs.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    let mut basis: Vec<Array1<f64>> = Vec::with_capacity(n);
    let mut energies = Vec::with_capacity(n);
    let mut hops = Vec::with_capacity(n.saturating_sub(1));
    if norm > 0.0 {
        let mut v = &g / norm;
        loop {
            let mut w = &freqs * &v;
            let a = v.dot(&w);
            energies.push(a);
            basis.push(v);
            if basis.len() == n {
                break;
            }
            // Two passes of classical Gram-Schmidt against the whole basis.
            for _ in 0..2 {
                for q in &basis {
                    let c = q.dot(&w);
                    w.scaled_add(-c, q);
                }
            }
            let b = w.dot(&w).sqrt();
            if b <= 1e-13 * scale.max(f64::MIN_POSITIVE) {
                break;
            }
            hops.push(b);
            v = w / b;
        }
    }
    let mut transform = Array2::zeros((basis.len(), n));
    for (j, q) in basis.iter().enumerate() {
        transform.row_mut(j).assign(q);
    }
    Ok(ChainBath {
        site_energies: energies,
        hop_amplitudes: hops,
        emitter_coupling: norm,
        transform,
        source: bath.clone(),
    })
}

/// `∫_0^omega_c J(w) dw` by Gauss-Legendre panels, used to check
/// [`DiscretizedBath::total_weight`].
pub fn integrated_weight<D: SpectralDensity + ?Sized>(
    source: &D,
    omega_c: f64,
    panels: usize,
) -> Result<f64> {
    let (x, w) = quad::gauss_legendre(8);
    let width = omega_c / panels as f64;
    let mut sum = 0.0;
    for p in 0..panels {
        let a = p as f64 * width;
        for (xi, wi) in x.iter().zip(&w) {
            sum += 0.5 * width * wi * source.density(a + 0.5 * width * (xi + 1.0))?;
        }
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{SpectralKind, SpectralTable};
    use ndarray_linalg::{Eigh, UPLO};

    fn flat(c0: f64, omega_max: f64) -> SpectralTable {
        let grid = vec![omega_max * 1e-6, omega_max];
        SpectralTable::new(SpectralKind::Custom, grid, vec![c0, c0], 1.0, 1.0).unwrap()
    }

    #[test]
    fn flat_midpoint_couplings() {
        let t = flat(0.3, 4.0);
        let b = discretize(&t, BathLabel::Eq, 8, 4.0, DiscretizationRule::MidpointLinear).unwrap();
        assert_eq!(b.len(), 8);
        for g in b.mode_couplings() {
            assert!((g - (0.3f64 * 4.0 / 8.0).sqrt()).abs() < 1e-15);
        }
        assert!((b.mode_freqs()[0] - 0.25).abs() < 1e-15);
        assert!((b.total_weight() - 1.2).abs() < 1e-14);
    }

    #[test]
    fn gauss_rule_integrates_polynomial_density() {
        // J(w) = w on a two-point table is exact under linear interpolation.
        let t = SpectralTable::new(SpectralKind::Custom, vec![1.0, 4.0], vec![1.0, 4.0], 1.0, 1.0)
            .unwrap();
        let b = discretize(&t, BathLabel::Eq, 5, 4.0, DiscretizationRule::Gauss).unwrap();
        assert!((b.total_weight() - 8.0).abs() < 1e-13);
        assert!(b.mode_freqs().iter().all(|&w| w > 0.0 && w < 4.0));
    }

    #[test]
    fn cutoff_outside_table_is_domain_error() {
        let t = flat(0.3, 4.0);
        let err = discretize(&t, BathLabel::Eq, 8, 5.0, DiscretizationRule::MidpointLinear);
        assert!(matches!(err, Err(Error::Domain { .. })));
        assert!(discretize(&t, BathLabel::Eq, 0, 4.0, DiscretizationRule::Gauss).is_err());
    }

    #[test]
    fn bath_validation() {
        assert!(DiscretizedBath::new(BathLabel::M, vec![], vec![]).is_err());
        assert!(DiscretizedBath::new(BathLabel::M, vec![1.0, 1.0], vec![0.1, 0.1]).is_err());
        assert!(DiscretizedBath::new(BathLabel::M, vec![0.0, 1.0], vec![0.1, 0.1]).is_err());
        let b = DiscretizedBath::new(BathLabel::M, vec![1.0], vec![0.1]).unwrap();
        assert!(b.clone().with_n_max(1).is_err());
        assert!(b.with_beta(-1.0).is_err());
    }

    #[test]
    fn single_mode_chain() {
        let b = DiscretizedBath::new(BathLabel::S, vec![1.3], vec![-0.2]).unwrap();
        let c = chain_map(&b).unwrap();
        assert_eq!(c.site_energies(), &[1.3]);
        assert!(c.hop_amplitudes().is_empty());
        assert!((c.emitter_coupling() - 0.2).abs() < 1e-16);
        assert!((c.reconstructed_couplings()[0] + 0.2).abs() < 1e-16);
    }

    #[test]
    fn chain_preserves_spectrum_and_couplings() {
        let freqs: Vec<f64> = (0..40).map(|k| 0.05 + 0.1 * k as f64).collect();
        let g: Vec<f64> = freqs.iter().map(|w| 0.1 * (w * 3.0).sin().abs() + 0.01).collect();
        let b = DiscretizedBath::new(BathLabel::Eq, freqs.clone(), g.clone()).unwrap();
        let c = chain_map(&b).unwrap();
        assert_eq!(c.len(), 40);
        let (mut eig, _) = c.chain_matrix().eigh(UPLO::Lower).unwrap();
        eig.as_slice_mut().unwrap().sort_by(f64::total_cmp);
        for (a, b) in eig.iter().zip(&freqs) {
            assert!((a - b).abs() < 1e-10);
        }
        for (a, b) in c.reconstructed_couplings().iter().zip(&g) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_coupling_modes_truncate_the_chain() {
        let b = DiscretizedBath::new(BathLabel::M, vec![1.0, 2.0, 3.0], vec![0.1, 0.0, 0.2]).unwrap();
        let c = chain_map(&b).unwrap();
        assert_eq!(c.len(), 2);
        assert!(c.is_truncated());
        let empty = DiscretizedBath::new(BathLabel::M, vec![1.0], vec![0.0]).unwrap();
        assert!(chain_map(&empty).unwrap().is_empty());
    }

    #[test]
    fn flat_density_hopping_asymptote() {
        let t = flat(1.0, 4.0);
        // Gauss nodes reproduce the continuum recurrence for the first N sites.
        let b = discretize(&t, BathLabel::Eq, 200, 4.0, DiscretizationRule::Gauss).unwrap();
        let c = chain_map(&b).unwrap();
        for j in 20..100 {
            assert!((c.hop_amplitudes()[j] - 1.0).abs() < 1e-3, "site {j}: {}", c.hop_amplitudes()[j]);
            assert!((c.site_energies()[j] - 2.0).abs() < 1e-8);
        }
        let b = discretize(&t, BathLabel::Eq, 600, 4.0, DiscretizationRule::MidpointLinear).unwrap();
        let c = chain_map(&b).unwrap();
        for j in 10..20 {
            assert!((c.hop_amplitudes()[j] - 1.0).abs() < 2e-3, "site {j}: {}", c.hop_amplitudes()[j]);
        }
    }

    #[test]
    fn star_occupations_from_chain_correlations() {
        let b = DiscretizedBath::new(BathLabel::Eq, vec![0.5, 1.0, 1.5], vec![0.1, 0.2, 0.3]).unwrap();
        let c = chain_map(&b).unwrap();
        // One excitation in the chain head: star occupations are g_k^2 / Σ g^2.
        let mut corr = Array2::zeros((3, 3));
        corr[[0, 0]] = C64::new(1.0, 0.0);
        let n = c.star_occupations(&corr).unwrap();
        for (nk, gk) in n.iter().zip(b.mode_couplings()) {
            assert!((nk - gk * gk / b.total_weight()).abs() < 1e-14);
        }
    }

    #[test]
    fn occupation_identities() {
        assert_eq!(thermal_occupation(1.0, f64::INFINITY), 0.0);
        assert!((thermal_occupation(2f64.ln(), 1.0) - 1.0).abs() < 1e-15);
        for (w, beta) in [(0.3, 2.0), (1.0, 1.0), (3.0, 0.1)] {
            let lhs = thermal_factor(beta, w);
            assert!((lhs - 1.0 - 2.0 * thermal_occupation(w, beta)).abs() < 1e-12);
        }
    }

    #[test]
    fn json_round_trip_keeps_vacuum() {
        let b = DiscretizedBath::new(BathLabel::Eq, vec![1.0], vec![0.1]).unwrap();
        let s = serde_json::to_string(&b).unwrap();
        assert!(s.contains("\"beta\":null") && s.contains("\"label\":\"eq\""));
        let back: DiscretizedBath = serde_json::from_str(&s).unwrap();
        assert_eq!(back, b);
        let c = chain_map(&b).unwrap();
        let back: ChainBath = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
