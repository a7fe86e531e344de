//! Forward-velocity feedback, the steering decomposition
//! `omega = (k1/2) sin(2 gamma) + omega_tilde`, and the four steering laws.
//!
//! | kind     | open angular space | steering `omega_tilde`                          |
//! |----------|--------------------|-------------------------------------------------|
//! | `GloBa`  | `T`                | backstepping with `Delta = delta`               |
//! | `BarFli` | `T1`               | backstepping with `Delta = 2 tan(delta/2)`      |
//! | `BoLSA`  | `T2`               | bounded-in-LoS-angle passivity design           |
//! | `BAgAl`  | `T3`               | bounds both angles                              |

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PolarState, StateSpace};
use crate::scalar::{c, Real};

/// Below this `|z|` the interconnection coefficient uses its Taylor form.
pub const PSI_SERIES_THRESHOLD: f64 = 1e-4;

/// Controller gains `k1..k4`. `k4` is only used by the backstepping laws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gains<T> {
    pub k1: T,
    pub k2: T,
    pub k3: T,
    pub k4: T,
}

impl<T: Real> Gains<T> {
    pub fn new(k1: T, k2: T, k3: T, k4: T) -> Result<Self> {
        let g = Self { k1, k2, k3, k4 };
        for (name, k) in [("k1", k1), ("k2", k2), ("k3", k3), ("k4", k4)] {
            if !(k > T::zero() && k.is_finite()) {
                return Err(Error::InvalidGains(format!("{name} = {k} must be positive and finite")));
            }
        }
        Ok(g)
    }

    pub fn from_array(k: [T; 4]) -> Result<Self> {
        Self::new(k[0], k[1], k[2], k[3])
    }

    pub fn to_array(self) -> [T; 4] {
        [self.k1, self.k2, self.k3, self.k4]
    }

    /// `q = sqrt(k1 / k3)`, shared by every Lyapunov function.
    pub fn q(&self) -> T {
        (self.k1 / self.k3).sqrt()
    }

    /// Whether `k1 k3 >= k2^2`, required by the passivity-based laws.
    pub fn satisfies_passivity_condition(&self) -> bool {
        self.k1 * self.k3 >= self.k2 * self.k2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    GloBa,
    BarFli,
    BoLSA,
    BAgAl,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 4] =
        [ControllerKind::GloBa, ControllerKind::BarFli, ControllerKind::BoLSA, ControllerKind::BAgAl];

    /// The state space on which the closed loop is stabilized.
    pub fn state_space(self) -> StateSpace {
        match self {
            ControllerKind::GloBa => StateSpace::S,
            ControllerKind::BarFli => StateSpace::S1,
            ControllerKind::BoLSA => StateSpace::S2,
            ControllerKind::BAgAl => StateSpace::S3,
        }
    }

    /// `Delta` shaping of the backstepping laws; `None` for the passivity laws.
    pub fn shaping(self) -> Option<Shaping> {
        match self {
            ControllerKind::GloBa => Some(Shaping::Identity),
            ControllerKind::BarFli => Some(Shaping::TangentBarrier),
            ControllerKind::BoLSA | ControllerKind::BAgAl => None,
        }
    }

    pub fn requires_passivity_condition(self) -> bool {
        matches!(self, ControllerKind::BoLSA | ControllerKind::BAgAl)
    }

    pub fn name(self) -> &'static str {
        match self {
            ControllerKind::GloBa => "globa",
            ControllerKind::BarFli => "barfli",
            ControllerKind::BoLSA => "bolsa",
            ControllerKind::BAgAl => "bagal",
        }
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "globa" => Ok(ControllerKind::GloBa),
            "barfli" => Ok(ControllerKind::BarFli),
            "bolsa" => Ok(ControllerKind::BoLSA),
            "bagal" => Ok(ControllerKind::BAgAl),
            other => Err(Error::InvalidConfig(format!("unknown controller '{other}'"))),
        }
    }
}

/// Choice of `Delta(delta)` in the backstepping laws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Shaping {
    /// `Delta = delta`, global on `T`.
    Identity,
    /// `Delta = 2 tan(delta / 2)`, a barrier at `|delta| = pi`.
    TangentBarrier,
}

impl Shaping {
    pub fn controller_kind(self) -> ControllerKind {
        match self {
            Shaping::Identity => ControllerKind::GloBa,
            Shaping::TangentBarrier => ControllerKind::BarFli,
        }
    }

    /// Returns `(Delta, dDelta/ddelta)`.
    pub fn apply<T: Real>(self, delta: T) -> Result<(T, T)> {
        match self {
            Shaping::Identity => Ok((delta, T::one())),
            Shaping::TangentBarrier => {
                if !(delta.abs() < T::PI()) {
                    return Err(Error::OutsideT1(delta.as_f64()));
                }
                let t = (delta / c(2.0)).tan();
                Ok((c::<T>(2.0) * t, T::one() + t * t))
            }
        }
    }
}

/// `(Delta, dDelta/ddelta)` for a backstepping controller kind.
pub fn delta_shaping<T: Real>(kind: ControllerKind, delta: T) -> Result<(T, T)> {
    kind.shaping().ok_or_else(|| Error::NotBackstepping(kind.to_string()))?.apply(delta)
}

/// Interconnection coefficient of the backstepping transformation,
///
/// `psi = (sin 2z + 2 k2 Delta (1 - cos 2z)) / (2z sqrt(1 + 4 k2^2 Delta^2))`,
///
/// evaluated with a two-term Taylor expansion for `|z| <= 1e-4`. The
/// line-of-sight angle is implied by `z` and `Delta` and is not an argument.
pub fn psi<T: Real>(z: T, k2: T, shaped: T) -> T {
    let x = c::<T>(2.0) * k2 * shaped;
    let inv_norm = (T::one() + x * x).sqrt().recip();
    let (sinc, versine) = if z.abs() > c(PSI_SERIES_THRESHOLD) {
        let two_z = z + z;
        (two_z.sin() / two_z, (T::one() - two_z.cos()) / two_z)
    } else {
        // sin(2z)/2z = 1 - 2z^2/3 + ..., (1 - cos 2z)/2z = z - z^3/3 + ...
        let z2 = z * z;
        (T::one() - c::<T>(2.0 / 3.0) * z2, z - z * z2 / c(3.0))
    };
    inv_norm * (sinc + x * versine)
}

/// Intermediate quantities of the backstepping laws at one `(delta, gamma)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BacksteppingAux<T> {
    pub shaped: T,
    pub shaped_slope: T,
    pub z: T,
    pub psi: T,
}

impl<T: Real> BacksteppingAux<T> {
    pub fn new(shaping: Shaping, k2: T, delta: T, gamma: T) -> Result<Self> {
        let (shaped, shaped_slope) = shaping.apply(delta)?;
        let z = gamma + (c::<T>(2.0) * k2 * shaped).atan() / c(2.0);
        Ok(Self { shaped, shaped_slope, z, psi: psi(z, k2, shaped) })
    }
}

/// Commanded inputs at one state.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput<T> {
    pub v: T,
    pub omega: T,
    pub omega_tilde: T,
}

/// `v = k1 rho cos(gamma)`.
pub fn forward_velocity<T: Real>(p: &PolarState<T>, gains: &Gains<T>) -> T {
    gains.k1 * p.rho * p.gamma.cos()
}

/// A steering law for the `(delta, gamma)` subsystem, combined with the
/// forward-velocity feedback into a full control.
pub trait SteeringLaw<T: Real>: Sync {
    fn k1(&self) -> T;

    fn omega_tilde(&self, delta: T, gamma: T) -> Result<T>;

    fn control(&self, p: &PolarState<T>) -> Result<ControlInput<T>> {
        let k1 = self.k1();
        let omega_tilde = self.omega_tilde(p.delta, p.gamma)?;
        Ok(ControlInput {
            v: k1 * p.rho * p.gamma.cos(),
            omega: k1 / c(2.0) * (p.gamma + p.gamma).sin() + omega_tilde,
            omega_tilde,
        })
    }
}

/// A steering law together with its gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerSpec<T> {
    pub kind: ControllerKind,
    pub gains: Gains<T>,
}

impl<T: Real> ControllerSpec<T> {
    /// Validates the gains for `kind`; the passivity laws need `k1 k3 >= k2^2`.
    pub fn new(kind: ControllerKind, gains: Gains<T>) -> Result<Self> {
        let gains = Gains::new(gains.k1, gains.k2, gains.k3, gains.k4)?;
        if kind.requires_passivity_condition() && !gains.satisfies_passivity_condition() {
            return Err(Error::InvalidGains(format!(
                "{kind} requires k1*k3 >= k2^2, got k1*k3 = {}, k2^2 = {}",
                gains.k1 * gains.k3,
                gains.k2 * gains.k2
            )));
        }
        Ok(Self { kind, gains })
    }

    /// Skips the `k1 k3 >= k2^2` check (gains must still be positive).
    /// Used to probe what happens outside the sufficient condition.
    pub fn new_unchecked(kind: ControllerKind, gains: Gains<T>) -> Self {
        Self { kind, gains }
    }

    pub fn state_space(&self) -> StateSpace {
        self.kind.state_space()
    }

    pub fn backstepping_aux(&self, delta: T, gamma: T) -> Result<BacksteppingAux<T>> {
        let shaping = self.kind.shaping().ok_or_else(|| Error::NotBackstepping(self.kind.to_string()))?;
        BacksteppingAux::new(shaping, self.gains.k2, delta, gamma)
    }
}

/// `cos(gamma) / (1 + tan^2(gamma/2))^2`, written as `cos(gamma) (1 + cos gamma)^2 / 4`
/// so that it is finite (and zero) at `|gamma| = pi`.
fn los_weight<T: Real>(gamma: T) -> T {
    let cg = gamma.cos();
    let s = T::one() + cg;
    cg * s * s / c(4.0)
}

impl<T: Real> SteeringLaw<T> for ControllerSpec<T> {
    fn k1(&self) -> T {
        self.gains.k1
    }

    fn omega_tilde(&self, delta: T, gamma: T) -> Result<T> {
        let Gains { k1, k2, k3, k4 } = self.gains;
        match self.kind {
            ControllerKind::GloBa | ControllerKind::BarFli => {
                let aux = self
                    .backstepping_aux(delta, gamma)
                    .map_err(|_| Error::SteeringUndefined(delta.as_f64()))?;
                let x = c::<T>(2.0) * k2 * aux.shaped;
                let feedforward = k1 * k2 * (gamma + gamma).sin() / (c::<T>(2.0) * (T::one() + x * x));
                Ok(k4 * aux.z + aux.shaped_slope * (feedforward + k3 * aux.psi * aux.shaped))
            }
            ControllerKind::BoLSA => Ok(k2 * gamma.sin() + k3 * los_weight(gamma) * delta),
            ControllerKind::BAgAl => {
                if !(delta.abs() < T::PI()) {
                    return Err(Error::SteeringUndefined(delta.as_f64()));
                }
                let t = (delta / c(2.0)).tan();
                Ok(k2 * gamma.sin() + c::<T>(2.0) * k3 * los_weight(gamma) * (T::one() + t * t) * t)
            }
        }
    }
}

/// The vehicle is not steered: `omega = 0`, i.e. `omega_tilde = -(k1/2) sin(2 gamma)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unsteered<T> {
    pub k1: T,
}

impl<T: Real> SteeringLaw<T> for Unsteered<T> {
    fn k1(&self) -> T {
        self.k1
    }

    fn omega_tilde(&self, _delta: T, gamma: T) -> Result<T> {
        Ok(-self.k1 / c(2.0) * (gamma + gamma).sin())
    }
}

/// Free-function form of [`SteeringLaw::omega_tilde`] for a [`ControllerSpec`].
pub fn omega_tilde<T: Real>(spec: &ControllerSpec<T>, delta: T, gamma: T) -> Result<T> {
    spec.omega_tilde(delta, gamma)
}

/// Free-function form of [`SteeringLaw::control`] for a [`ControllerSpec`].
pub fn control<T: Real>(spec: &ControllerSpec<T>, p: &PolarState<T>) -> Result<ControlInput<T>> {
    spec.control(p)
}
