//! Emitter-centered couplings, spectral densities and bath correlation
//! functions.
//!
//! In the dimensionless units of [`crate::em1d`] (`hbar = c = mu_0 = eps_0 =
//! omega_0 = 1`) the two couplings satisfy
//!
//! ```text
//! g_M^2(w) + g_S^2(w) = (w^2 / pi) Im G(x_a, x_a; w)
//! ```
//!
//! with
//!
//! * `g_M^2 = (w^4 / pi) ∫_slab Im eps(x) |G(x_a, x)|^2 dx` (noise currents),
//! * `g_S^2 = A(w)^2 Σ_d |F_d(x_a)|^2` (incoming plane waves from both sides),
//!   where `A(w)` is fixed by requiring the identity to hold in vacuum.
//!
//! Spectral densities are reported through the dimensionless profile `f`
//! defined by `J(w) = eta * omega_a * f(w / omega_a)`; here `f(w/omega_a) =
//! g^2(w) / omega_a` so that `J = eta * g^2`. In vacuum `f(x) = x / (2 pi)`.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::em1d::{Direction, LorentzSlab, SlabModes};
use crate::error::{invalid, Error, Result};
use crate::quad::{self, Tolerance};

/// Which environment a spectral density describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralKind {
    Medium,
    Scattering,
    Equivalent,
    Custom,
}

/// Anything that can evaluate a spectral density `J(omega)` (units of
/// `omega_0`).
pub trait SpectralDensity {
    fn density(&self, omega: f64) -> Result<f64>;

    /// Largest frequency at which [`SpectralDensity::density`] is defined.
    fn max_frequency(&self) -> f64;
}

/// Relative tolerance of the spatial integral behind `g_M`.
pub const MEDIUM_QUADRATURE_TOLERANCE: f64 = 1e-13;

/// Medium-assisted coupling `g_M(omega)`.
pub fn coupling_medium(medium: &LorentzSlab, omega: f64) -> Result<f64> {
    coupling_medium_with(medium, omega, MEDIUM_QUADRATURE_TOLERANCE)
}

/// [`coupling_medium`] with an explicit relative quadrature tolerance.
pub fn coupling_medium_with(medium: &LorentzSlab, omega: f64, relative: f64) -> Result<f64> {
    let modes = SlabModes::new(medium, omega)?;
    Ok(medium_weight(medium, &modes, omega, relative)?.sqrt())
}

fn medium_weight(medium: &LorentzSlab, modes: &SlabModes, omega: f64, relative: f64) -> Result<f64> {
    let im_eps = medium.permittivity(omega).im;
    if im_eps == 0.0 {
        return Ok(0.0);
    }
    let (x0, x1) = modes.bounds();
    let xa = modes.emitter_position();
    let tol = Tolerance {
        absolute: 0.0,
        relative,
        max_intervals: 20_000,
    };
    let integrand = |x: f64| {
        modes
            .green_from_emitter(x)
            .map(|g| g.norm_sqr())
            .unwrap_or(f64::NAN)
    };
    // The profile has a kink at the emitter.
    let left = quad::integrate(integrand, x0, xa, tol)?;
    let right = quad::integrate(integrand, xa, x1, tol)?;
    Ok(omega.powi(4) / PI * im_eps * (left.value + right.value))
}

/// Mode-amplitude normalization `A(omega)^2` of the scattering modes.
///
/// Fixed by calibration in vacuum, where `g_M = 0`, `Im G = 1 / (2 omega)`
/// and each incoming wave has unit amplitude at the emitter.
pub fn scattering_normalization(omega: f64) -> f64 {
    let vacuum_rhs = omega * omega / PI * crate::em1d::vacuum_green(omega, 0.0).im;
    let vacuum_field_sum = Direction::BOTH.len() as f64;
    vacuum_rhs / vacuum_field_sum
}

/// Scattering-assisted coupling `g_S(omega)`.
pub fn coupling_scatter(medium: &LorentzSlab, omega: f64) -> Result<f64> {
    let modes = SlabModes::new(medium, omega)?;
    Ok(scatter_weight(&modes, omega).sqrt())
}

fn scatter_weight(modes: &SlabModes, omega: f64) -> f64 {
    let field: f64 = Direction::BOTH
        .iter()
        .map(|&d| modes.scattering(d).field_at_emitter.norm_sqr())
        .sum();
    scattering_normalization(omega) * field
}

/// Right-hand side of the sum rule, `(omega^2 / pi) Im G(x_a, x_a)`.
pub fn sum_rule_rhs(medium: &LorentzSlab, omega: f64) -> Result<f64> {
    let g = medium.green_point(omega)?;
    Ok(omega * omega / PI * g.value.im)
}

/// Relative residual `|g_M^2 + g_S^2 - rhs| / rhs`.
pub fn sum_rule_residual(medium: &LorentzSlab, omega: f64) -> Result<f64> {
    let modes = SlabModes::new(medium, omega)?;
    let lhs = medium_weight(medium, &modes, omega, MEDIUM_QUADRATURE_TOLERANCE)?
        + scatter_weight(&modes, omega);
    let rhs = omega * omega / PI * modes.green_at_emitter().im;
    Ok((lhs - rhs).abs() / rhs)
}

/// Spectral densities of the slab evaluated on demand, without tabulation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlabSpectrum {
    pub medium: LorentzSlab,
    pub kind: SpectralKind,
    pub eta: f64,
    pub omega_a: f64,
    /// Upper end of the frequency range this source is used on.
    pub omega_max: f64,
}

impl SlabSpectrum {
    pub fn new(
        medium: LorentzSlab,
        kind: SpectralKind,
        eta: f64,
        omega_a: f64,
        omega_max: f64,
    ) -> Result<Self> {
        if kind == SpectralKind::Custom {
            return Err(Error::Usage("a slab spectrum cannot be of custom kind".into()));
        }
        check_eta(eta)?;
        check_omega_a(omega_a)?;
        Ok(Self {
            medium,
            kind,
            eta,
            omega_a,
            omega_max,
        })
    }

    /// Dimensionless profile `f(omega / omega_a)` at frequency `omega`.
    pub fn profile(&self, omega: f64) -> Result<f64> {
        Ok(coupling_weight(&self.medium, self.kind, omega)? / self.omega_a)
    }
}

impl SpectralDensity for SlabSpectrum {
    fn density(&self, omega: f64) -> Result<f64> {
        Ok(self.eta * self.omega_a * self.profile(omega)?)
    }

    fn max_frequency(&self) -> f64 {
        self.omega_max
    }
}

/// `g^2(omega)` for one kind. The equivalent kind uses the direct Green route.
fn coupling_weight(medium: &LorentzSlab, kind: SpectralKind, omega: f64) -> Result<f64> {
    let modes = SlabModes::new(medium, omega)?;
    match kind {
        SpectralKind::Medium => medium_weight(medium, &modes, omega, MEDIUM_QUADRATURE_TOLERANCE),
        SpectralKind::Scattering => Ok(scatter_weight(&modes, omega)),
        SpectralKind::Equivalent => Ok(omega * omega / PI * modes.green_at_emitter().im),
        SpectralKind::Custom => Err(Error::Usage("custom kind has no slab formula".into())),
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(invalid("eta", format!("coupling scale must be non-negative, got {eta}")));
    }
    Ok(())
}

fn check_omega_a(omega_a: f64) -> Result<()> {
    if !(omega_a > 0.0 && omega_a.is_finite()) {
        return Err(invalid("omega_a", format!("must be positive, got {omega_a}")));
    }
    Ok(())
}

/// A tabulated spectral density.
///
/// `values[i]` is the dimensionless profile `f(grid[i] / omega_a)`, and
/// `J(omega) = eta * omega_a * f(omega / omega_a)`. Between grid points the
/// profile is interpolated linearly; below the first point it is
/// interpolated linearly to `f(0) = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralTable {
    kind: SpectralKind,
    grid: Vec<f64>,
    values: Vec<f64>,
    eta: f64,
    omega_a: f64,
}

impl SpectralTable {
    pub fn new(
        kind: SpectralKind,
        grid: Vec<f64>,
        values: Vec<f64>,
        eta: f64,
        omega_a: f64,
    ) -> Result<Self> {
        check_grid(&grid)?;
        if values.len() != grid.len() {
            return Err(invalid(
                "values",
                format!("{} values for {} grid points", values.len(), grid.len()),
            ));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(invalid("values", format!("spectral density must be >= 0, got {v}")));
        }
        check_eta(eta)?;
        check_omega_a(omega_a)?;
        Ok(Self {
            kind,
            grid,
            values,
            eta,
            omega_a,
        })
    }

    /// Pointwise sum of a medium and a scattering table on the same grid.
    pub fn equivalent(medium: &SpectralTable, scattering: &SpectralTable) -> Result<Self> {
        if medium.kind != SpectralKind::Medium || scattering.kind != SpectralKind::Scattering {
            return Err(Error::Usage(
                "equivalent table needs one medium and one scattering table".into(),
            ));
        }
        if medium.grid != scattering.grid {
            return Err(Error::Usage("tables must share their frequency grid".into()));
        }
        if medium.eta != scattering.eta || medium.omega_a != scattering.omega_a {
            return Err(Error::Usage("tables must share eta and omega_a".into()));
        }
        let values = medium
            .values
            .iter()
            .zip(&scattering.values)
            .map(|(m, s)| m + s)
            .collect();
        Self::new(
            SpectralKind::Equivalent,
            medium.grid.clone(),
            values,
            medium.eta,
            medium.omega_a,
        )
    }

    pub fn kind(&self) -> SpectralKind {
        self.kind
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn omega_a(&self) -> f64 {
        self.omega_a
    }

    /// Same profile with a different coupling scale.
    pub fn with_eta(&self, eta: f64) -> Result<Self> {
        check_eta(eta)?;
        Ok(Self {
            eta,
            ..self.clone()
        })
    }

    /// Interpolated profile `f` at frequency `omega`.
    pub fn profile(&self, omega: f64) -> Result<f64> {
        let last = *self.grid.last().expect("grid is non-empty");
        if !(omega >= 0.0 && omega <= last) {
            return Err(Error::Domain {
                quantity: "omega",
                value: omega,
                reason: format!("table covers (0, {last}]"),
            });
        }
        let first = self.grid[0];
        if omega <= first {
            return Ok(self.values[0] * omega / first);
        }
        let hi = self.grid.partition_point(|&w| w < omega);
        let lo = hi - 1;
        let (w0, w1) = (self.grid[lo], self.grid[hi]);
        let s = (omega - w0) / (w1 - w0);
        Ok(self.values[lo] * (1.0 - s) + self.values[hi] * s)
    }

    /// Spectral density `J` at every grid point.
    pub fn densities(&self) -> Vec<f64> {
        self.values.iter().map(|f| self.eta * self.omega_a * f).collect()
    }
}

impl SpectralDensity for SpectralTable {
    fn density(&self, omega: f64) -> Result<f64> {
        Ok(self.eta * self.omega_a * self.profile(omega)?)
    }

    fn max_frequency(&self) -> f64 {
        *self.grid.last().expect("grid is non-empty")
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(invalid("grid", "frequency grid is empty"));
    }
    if !(grid[0] > 0.0) {
        return Err(invalid("grid", format!("grid must start above 0, got {}", grid[0])));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) || grid.iter().any(|w| !w.is_finite()) {
        return Err(invalid("grid", "grid must be finite and strictly increasing"));
    }
    Ok(())
}

/// Uniform grid `omega_max * i / n` for `i = 1..=n`.
pub fn uniform_grid(n: usize, omega_max: f64) -> Vec<f64> {
    (1..=n).map(|i| omega_max * i as f64 / n as f64).collect()
}

/// Uniform coverage of `(0, omega_max]` with spacing `coarse`, refined to
/// spacing `fine` on `[center - half_width, center + half_width]`.
pub fn refined_grid(omega_max: f64, coarse: f64, center: f64, half_width: f64, fine: f64) -> Vec<f64> {
    let mut grid: Vec<f64> = Vec::new();
    let n = (omega_max / coarse).round() as usize;
    grid.extend((1..=n).map(|i| omega_max * i as f64 / n as f64));
    let lo = (center - half_width).max(fine);
    let hi = (center + half_width).min(omega_max);
    let m = ((hi - lo) / fine).round() as usize;
    grid.extend((0..=m).map(|i| lo + (hi - lo) * i as f64 / m as f64));
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    grid
}

/// Default spectral grid: uniform to `omega_max` with a dense band around the
/// Lorentz resonance, where the medium profile is doubly peaked.
pub fn default_grid(omega_max: f64) -> Vec<f64> {
    refined_grid(omega_max, 0.01, 1.0, 0.1, 2e-4)
}

/// Tabulates one kind of spectral density of the slab on `grid`.
///
/// The equivalent kind is the pointwise sum of the medium and scattering
/// tables; see [`equivalent_from_green`] for the closed-form route.
pub fn spectral_density(
    kind: SpectralKind,
    medium: &LorentzSlab,
    eta: f64,
    omega_a: f64,
    grid: &[f64],
) -> Result<SpectralTable> {
    check_grid(grid)?;
    match kind {
        SpectralKind::Medium | SpectralKind::Scattering => {
            let values = profiles(medium, kind, omega_a, grid)?;
            SpectralTable::new(kind, grid.to_vec(), values, eta, omega_a)
        }
        SpectralKind::Equivalent => {
            let m = spectral_density(SpectralKind::Medium, medium, eta, omega_a, grid)?;
            let s = spectral_density(SpectralKind::Scattering, medium, eta, omega_a, grid)?;
            SpectralTable::equivalent(&m, &s)
        }
        SpectralKind::Custom => Err(Error::Usage(
            "custom tables are built with SpectralTable::new".into(),
        )),
    }
}

/// Equivalent spectral density straight from `Im G(x_a, x_a)`.
pub fn equivalent_from_green(
    medium: &LorentzSlab,
    eta: f64,
    omega_a: f64,
    grid: &[f64],
) -> Result<SpectralTable> {
    check_grid(grid)?;
    let values = profiles(medium, SpectralKind::Equivalent, omega_a, grid)?;
    SpectralTable::new(SpectralKind::Equivalent, grid.to_vec(), values, eta, omega_a)
}

fn profiles(medium: &LorentzSlab, kind: SpectralKind, omega_a: f64, grid: &[f64]) -> Result<Vec<f64>> {
    check_omega_a(omega_a)?;
    grid.par_iter()
        .map(|&w| Ok(coupling_weight(medium, kind, w)? / omega_a))
        .collect()
}

/// Writes the medium, scattering and equivalent profiles as CSV with columns
/// `omega, f_M, f_S, f_eq`.
pub fn write_spectra_csv<W: Write>(
    writer: W,
    medium: &SpectralTable,
    scattering: &SpectralTable,
    equivalent: &SpectralTable,
) -> Result<()> {
    if medium.grid != scattering.grid || medium.grid != equivalent.grid {
        return Err(Error::Usage("spectra must share their grid".into()));
    }
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["omega", "f_M", "f_S", "f_eq"])?;
    for i in 0..medium.grid.len() {
        csv.write_record([
            format!("{:.17e}", medium.grid[i]),
            format!("{:.17e}", medium.values[i]),
            format!("{:.17e}", scattering.values[i]),
            format!("{:.17e}", equivalent.values[i]),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

/// `coth(beta * omega / 2)`, equal to 1 at zero temperature (`beta = inf`).
pub fn thermal_factor(beta: f64, omega: f64) -> f64 {
    if beta.is_infinite() {
        1.0
    } else {
        1.0 / (0.5 * beta * omega).tanh()
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0) {
        return Err(invalid(
            "beta",
            format!("inverse temperature must be positive or infinite, got {beta}"),
        ));
    }
    Ok(())
}

/// Two-time correlation function of a bath interaction operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationKernel {
    pub times: Vec<f64>,
    pub values: Vec<C64>,
    pub beta: f64,
    /// `false` when some `|t|` exceeds `pi / max(grid spacing)`, i.e. the
    /// tabulated density is too coarse to be trusted at that time.
    pub resolvable: bool,
}

/// `C(t) = ∫ J(w) [coth(beta w / 2) cos(w t) - i sin(w t)] dw` over the
/// table.
///
/// The density is treated as piecewise linear between grid points (and
/// linear from `J(0) = 0` to the first point); each segment is integrated
/// exactly against the oscillatory factor, so large `t` does not alias.
pub fn correlation(table: &SpectralTable, beta: f64, times: &[f64]) -> Result<CorrelationKernel> {
    check_beta(beta)?;
    if let Some(t) = times.iter().find(|t| !t.is_finite()) {
        return Err(invalid("times", format!("times must be finite, got {t}")));
    }
    let (nodes, even, odd) = correlation_nodes(table, beta);
    let values = times
        .par_iter()
        .map(|&t| {
            let a = filon_linear(&nodes, &even, t);
            let b = filon_linear(&nodes, &odd, t);
            C64::new(a.re, b.im)
        })
        .collect();
    let max_gap = nodes.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let t_max = times.iter().map(|t| t.abs()).fold(0.0, f64::max);
    Ok(CorrelationKernel {
        times: times.to_vec(),
        values,
        beta,
        resolvable: max_gap * t_max < PI,
    })
}

/// Nodes with `J coth` (even part) and `J` (odd part), including `omega = 0`.
fn correlation_nodes(table: &SpectralTable, beta: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let densities = table.densities();
    let mut nodes = Vec::with_capacity(table.grid.len() + 1);
    let mut even = Vec::with_capacity(table.grid.len() + 1);
    let mut odd = Vec::with_capacity(table.grid.len() + 1);
    nodes.push(0.0);
    odd.push(0.0);
    // J(w) coth(beta w / 2) -> 2 J'(0) / beta as w -> 0.
    even.push(if beta.is_infinite() {
        0.0
    } else {
        2.0 * densities[0] / (table.grid[0] * beta)
    });
    for (&w, &j) in table.grid.iter().zip(&densities) {
        nodes.push(w);
        odd.push(j);
        even.push(j * thermal_factor(beta, w));
    }
    (nodes, even, odd)
}

/// Exact `∫ h(w) e^{-i w t} dw` for piecewise-linear `h`.
fn filon_linear(nodes: &[f64], h: &[f64], t: f64) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..nodes.len() - 1 {
        let width = nodes[i + 1] - nodes[i];
        let mid = 0.5 * (nodes[i + 1] + nodes[i]);
        let x = 0.5 * t * width;
        let mean = 0.5 * (h[i] + h[i + 1]);
        let slope_part = 0.5 * (h[i + 1] - h[i]);
        let (sinc, odd) = sinc_pair(x);
        let segment = C64::new(mean * sinc, slope_part * odd);
        acc += width * C64::from_polar(1.0, -t * mid) * segment;
    }
    acc
}

/// `(sin x / x, (x cos x - sin x) / x^2)` with series near zero.
fn sinc_pair(x: f64) -> (f64, f64) {
    if x.abs() < 0.05 {
        let x2 = x * x;
        let sinc = 1.0 - x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0));
        let odd = -x / 3.0 * (1.0 - x2 / 10.0 * (1.0 - x2 / 28.0 * (1.0 - x2 / 54.0)));
        (sinc, odd)
    } else {
        let (s, c) = x.sin_cos();
        (s / x, (x * c - s) / (x * x))
    }
}

/// Which closed form of the power spectrum to evaluate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerSpectrumForm {
    /// `pi J(w) [1 + coth(beta w / 2)]`, the Fourier transform of
    /// [`correlation`].
    #[default]
    Standard,
    /// `pi J(w) [1 + coth(beta w)]`, kept for comparison with the form that
    /// circulates with a doubled coth argument.
    Printed,
}

/// Power spectrum `S(w) = ∫ e^{i w t} C(t) dt` for `w > 0` in the table range.
pub fn power_spectrum(
    table: &SpectralTable,
    beta: f64,
    omega: f64,
    form: PowerSpectrumForm,
) -> Result<f64> {
    check_beta(beta)?;
    if !(omega > 0.0 && omega <= table.max_frequency()) {
        return Err(Error::Domain {
            quantity: "omega",
            value: omega,
            reason: format!("power spectrum is evaluated on (0, {}]", table.max_frequency()),
        });
    }
    let j = table.density(omega)?;
    let factor = match form {
        PowerSpectrumForm::Standard => thermal_factor(beta, omega),
        PowerSpectrumForm::Printed => thermal_factor(beta, 2.0 * omega),
    };
    Ok(PI * j * (1.0 + factor))
}

/// Weak-coupling spontaneous emission rate `2 pi J_eq(omega_a)`.
pub fn markov_decay_rate(table: &SpectralTable, omega_a: f64) -> Result<f64> {
    if table.kind != SpectralKind::Equivalent {
        return Err(Error::Usage(format!(
            "the decay rate needs the equivalent spectral density, got {:?}",
            table.kind
        )));
    }
    Ok(2.0 * PI * table.density(omega_a)?)
}
