//! One-dimensional electromagnetics of a homogeneous Lorentz slab.
//!
//! Units: `c = mu_0 = eps_0 = omega_0 = 1`, so frequencies are in units of the
//! Lorentz resonance `omega_0` and lengths in units of `c / omega_0`. The slab
//! occupies `[-L/2, L/2]`.
//!
//! Fields solve `(-d^2/dx^2 - omega^2 eps_r(x)) psi = 0`. Inside the slab the
//! solutions are closed-form exponentials, so everything here is built from
//! the 2×2 transfer matrix of a homogeneous layer acting on `(psi, psi')`.
//! No spatial mesh is involved.
//!
//! The Green function follows the convention
//! `(-(1/mu_0) d^2/dx^2 - eps_0 omega^2 eps_r) G = delta(x - x_a)`,
//! whose vacuum value at coincident points is `i / (2 omega)`.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Geometry and Lorentz dispersion of the slab, with the emitter position.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LorentzSlab {
    omega_p_ratio: f64,
    gamma_ratio: f64,
    length: f64,
    emitter_position: f64,
}

impl LorentzSlab {
    /// Slab with the emitter at its center.
    pub fn new(omega_p_ratio: f64, gamma_ratio: f64, length: f64) -> Result<Self> {
        if !(omega_p_ratio > 0.0 && omega_p_ratio.is_finite()) {
            return Err(invalid("omega_p_ratio", format!("must be positive, got {omega_p_ratio}")));
        }
        if !(gamma_ratio > 0.0 && gamma_ratio.is_finite()) {
            return Err(invalid(
                "gamma_ratio",
                format!("must be positive (passivity, Im chi > 0), got {gamma_ratio}"),
            ));
        }
        Self::checked_length(length)?;
        Ok(Self {
            omega_p_ratio,
            gamma_ratio,
            length,
            emitter_position: 0.0,
        })
    }

    /// The dielectric of the reference configuration:
    /// `omega_p/omega_0 = 0.2`, `gamma/omega_0 = 0.01`, `(omega_0/c) l = 31.25`.
    pub fn reference() -> Self {
        Self::new(0.2, 0.01, 31.25).expect("reference parameters are valid")
    }

    /// Calibration medium with `chi = 0` occupying the same interval.
    ///
    /// This is the only way to obtain a non-dispersive slab; it exists to
    /// compare against analytic free-space results.
    pub fn vacuum(length: f64) -> Result<Self> {
        Self::checked_length(length)?;
        Ok(Self {
            omega_p_ratio: 0.0,
            gamma_ratio: 1.0,
            length,
            emitter_position: 0.0,
        })
    }

    fn checked_length(length: f64) -> Result<()> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(invalid("length", format!("must be positive, got {length}")));
        }
        Ok(())
    }

    /// Moves the emitter; the position must lie strictly inside the slab.
    pub fn with_emitter_position(mut self, x: f64) -> Result<Self> {
        let half = 0.5 * self.length;
        if !(x > -half && x < half) {
            return Err(invalid(
                "emitter_position",
                format!("must lie strictly inside (-{half}, {half}), got {x}"),
            ));
        }
        self.emitter_position = x;
        Ok(self)
    }

    pub fn omega_p_ratio(&self) -> f64 {
        self.omega_p_ratio
    }

    pub fn gamma_ratio(&self) -> f64 {
        self.gamma_ratio
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn emitter_position(&self) -> f64 {
        self.emitter_position
    }

    pub fn is_vacuum(&self) -> bool {
        self.omega_p_ratio == 0.0
    }

    /// Left and right faces of the slab.
    pub fn bounds(&self) -> (f64, f64) {
        (-0.5 * self.length, 0.5 * self.length)
    }

    /// Lorentz susceptibility
    /// `chi = (omega_p/omega_0)^2 / [1 - (omega/omega_0)^2 - i (omega/omega_0)(gamma/omega_0)]`.
    pub fn susceptibility(&self, omega: f64) -> C64 {
        if self.is_vacuum() {
            return C64::new(0.0, 0.0);
        }
        let wp2 = self.omega_p_ratio * self.omega_p_ratio;
        wp2 / C64::new(1.0 - omega * omega, -omega * self.gamma_ratio)
    }

    /// Relative permittivity inside the slab (it is 1 outside).
    pub fn permittivity(&self, omega: f64) -> C64 {
        1.0 + self.susceptibility(omega)
    }

    /// Wavenumber inside the slab, on the branch with `Im q >= 0`.
    pub fn inner_wavenumber(&self, omega: f64) -> C64 {
        let q = omega * self.permittivity(omega).sqrt();
        if q.im < 0.0 {
            -q
        } else {
            q
        }
    }

    /// Plane wave of unit amplitude incident from `direction`, scattered by
    /// the slab.
    pub fn scatter(&self, omega: f64, direction: Direction) -> Result<ScatteringSolution> {
        let modes = SlabModes::new(self, omega)?;
        Ok(modes.scattering(direction))
    }

    /// Green function at coincident points `G(x_a, x_a)`.
    pub fn green_point(&self, omega: f64) -> Result<GreenPoint> {
        let modes = SlabModes::new(self, omega)?;
        Ok(GreenPoint {
            omega,
            value: modes.green_at_emitter(),
        })
    }

    /// `G(x_a, x)` for `x` inside the slab.
    pub fn green_profile(&self, omega: f64, x: f64) -> Result<C64> {
        SlabModes::new(self, omega)?.green_from_emitter(x)
    }
}

/// Which side of the slab the incoming plane wave arrives from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    FromLeft,
    FromRight,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::FromLeft, Direction::FromRight];
}

/// Full 1D scattering solution for a unit-amplitude incident wave.
///
/// For `FromLeft` the incident wave is `e^{ikx}`, the reflected wave
/// `r e^{-ikx}` and the transmitted wave `t e^{ikx}`; `FromRight` is the
/// mirror image.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatteringSolution {
    pub omega: f64,
    pub direction: Direction,
    pub field_at_emitter: C64,
    pub reflection: C64,
    pub transmission: C64,
}

/// Green function at the emitter position.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreenPoint {
    pub omega: f64,
    pub value: C64,
}

/// Vacuum Green function `G(x, x') = i e^{i omega |x - x'|} / (2 omega)`.
pub fn vacuum_green(omega: f64, distance: f64) -> C64 {
    I * (I * omega * distance.abs()).exp() / (2.0 * omega)
}

/// 2×2 transfer matrix acting on `(psi, psi')`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransferMatrix(pub [[C64; 2]; 2]);

impl TransferMatrix {
    pub fn identity() -> Self {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        Self([[one, zero], [zero, one]])
    }

    /// Propagation over a homogeneous layer of wavenumber `q` and signed
    /// thickness `d`. Unimodular for every `q`.
    pub fn layer(q: C64, d: f64) -> Self {
        if q.norm() == 0.0 {
            let one = C64::new(1.0, 0.0);
            return Self([[one, C64::new(d, 0.0)], [C64::new(0.0, 0.0), one]]);
        }
        let phase = q * d;
        let (c, s) = (phase.cos(), phase.sin());
        Self([[c, s / q], [-q * s, c]])
    }

    /// `self` applied after `first`.
    pub fn then(self, first: TransferMatrix) -> Self {
        let a = self.0;
        let b = first.0;
        let mut out = [[C64::new(0.0, 0.0); 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Self(out)
    }

    pub fn det(&self) -> C64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    /// Largest entry magnitude.
    pub fn max_norm(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn apply(&self, v: [C64; 2]) -> [C64; 2] {
        [
            self.0[0][0] * v[0] + self.0[0][1] * v[1],
            self.0[1][0] * v[0] + self.0[1][1] * v[1],
        ]
    }
}

/// Homogeneous solutions of the slab problem at one frequency.
///
/// `psi_left` is outgoing to the left (`e^{-ik(x - x0)}` for `x < x0`) and
/// `psi_right` outgoing to the right (`e^{ik(x - x1)}` for `x > x1`). Each is
/// built by propagating away from the side where it is a pure outgoing wave,
/// which is the numerically dominant direction in an absorbing slab.
#[derive(Clone, Copy, Debug)]
pub(crate) struct SlabModes {
    omega: f64,
    k: f64,
    q: C64,
    x0: f64,
    x1: f64,
    xa: f64,
    psi_left_a: [C64; 2],
    psi_right_a: [C64; 2],
    wronskian: C64,
}

impl SlabModes {
    pub(crate) fn new(slab: &LorentzSlab, omega: f64) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::Domain {
                quantity: "omega",
                value: omega,
                reason: "frequency must be positive and finite".into(),
            });
        }
        let (x0, x1) = slab.bounds();
        let xa = slab.emitter_position();
        let k = omega;
        let q = slab.inner_wavenumber(omega);
        let psi_left_a = TransferMatrix::layer(q, xa - x0).apply([C64::new(1.0, 0.0), -I * k]);
        let psi_right_a = TransferMatrix::layer(q, xa - x1).apply([C64::new(1.0, 0.0), I * k]);
        let wronskian = psi_left_a[0] * psi_right_a[1] - psi_left_a[1] * psi_right_a[0];
        let scale = k * psi_left_a[0].norm().max(psi_left_a[1].norm() / k)
            * psi_right_a[0].norm().max(psi_right_a[1].norm() / k);
        let relative = wronskian.norm() / scale;
        if !(relative > 1e-12) {
            return Err(Error::DegenerateWronskian { omega, relative });
        }
        Ok(Self {
            omega,
            k,
            q,
            x0,
            x1,
            xa,
            psi_left_a,
            psi_right_a,
            wronskian,
        })
    }

    fn psi_left(&self, x: f64) -> [C64; 2] {
        TransferMatrix::layer(self.q, x - self.x0).apply([C64::new(1.0, 0.0), -I * self.k])
    }

    fn psi_right(&self, x: f64) -> [C64; 2] {
        TransferMatrix::layer(self.q, x - self.x1).apply([C64::new(1.0, 0.0), I * self.k])
    }

    /// Splits `(psi, psi')` at a vacuum boundary `xb` into the coefficients
    /// of `e^{+ik(x - xb)}` and `e^{-ik(x - xb)}`.
    fn split(&self, v: [C64; 2]) -> (C64, C64) {
        let d = v[1] / (I * self.k);
        (0.5 * (v[0] + d), 0.5 * (v[0] - d))
    }

    pub(crate) fn scattering(&self, direction: Direction) -> ScatteringSolution {
        let k = self.k;
        let length = self.x1 - self.x0;
        match direction {
            Direction::FromLeft => {
                let at_x0 = TransferMatrix::layer(self.q, self.x0 - self.x1)
                    .apply([C64::new(1.0, 0.0), I * k]);
                let (alpha, rho) = self.split(at_x0);
                let incident = alpha * (-I * k * self.x0).exp();
                ScatteringSolution {
                    omega: self.omega,
                    direction,
                    field_at_emitter: self.psi_right_a[0] / incident,
                    reflection: rho / alpha * (2.0 * I * k * self.x0).exp(),
                    transmission: (-I * k * length).exp() / alpha,
                }
            }
            Direction::FromRight => {
                let at_x1 = TransferMatrix::layer(self.q, self.x1 - self.x0)
                    .apply([C64::new(1.0, 0.0), -I * k]);
                let (rho, alpha) = self.split(at_x1);
                let incident = alpha * (I * k * self.x1).exp();
                ScatteringSolution {
                    omega: self.omega,
                    direction,
                    field_at_emitter: self.psi_left_a[0] / incident,
                    reflection: rho / alpha * (-2.0 * I * k * self.x1).exp(),
                    transmission: (-I * k * length).exp() / alpha,
                }
            }
        }
    }

    pub(crate) fn green_at_emitter(&self) -> C64 {
        -self.psi_left_a[0] * self.psi_right_a[0] / self.wronskian
    }

    pub(crate) fn green_from_emitter(&self, x: f64) -> Result<C64> {
        if !(x >= self.x0 && x <= self.x1) {
            return Err(Error::Domain {
                quantity: "x",
                value: x,
                reason: format!("Green profile is defined on the slab [{}, {}]", self.x0, self.x1),
            });
        }
        Ok(if x <= self.xa {
            -self.psi_left(x)[0] * self.psi_right_a[0] / self.wronskian
        } else {
            -self.psi_left_a[0] * self.psi_right(x)[0] / self.wronskian
        })
    }

    pub(crate) fn emitter_position(&self) -> f64 {
        self.xa
    }

    pub(crate) fn bounds(&self) -> (f64, f64) {
        (self.x0, self.x1)
    }
}
