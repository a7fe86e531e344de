//! Cartesian and polar representations of the unicycle pose, the four
//! state spaces and their metrics.
//!
//! The polar chart measures the vehicle relative to a target parked at the
//! origin with heading zero: `rho` is the distance, `delta` the polar angle
//! shifted by pi (so the negative x-axis is `delta = 0`), and `gamma` the
//! line-of-sight angle `delta - theta`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{c, Real};

/// Vehicle pose in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CartesianState<T> {
    pub x: T,
    pub y: T,
    pub theta: T,
}

impl<T: Real> CartesianState<T> {
    pub fn new(x: T, y: T, theta: T) -> Self {
        Self { x, y, theta }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }
}

/// Pose in polar coordinates `(rho, delta, gamma)`.
///
/// Angles are not required to lie in `(-pi, pi]`: simulations integrate them
/// unwrapped.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PolarState<T> {
    pub rho: T,
    pub delta: T,
    pub gamma: T,
}

impl<T: Real> PolarState<T> {
    pub fn new(rho: T, delta: T, gamma: T) -> Self {
        Self { rho, delta, gamma }
    }

    pub fn is_finite(&self) -> bool {
        self.rho.is_finite() && self.delta.is_finite() && self.gamma.is_finite()
    }

    pub fn to_array(self) -> [T; 3] {
        [self.rho, self.delta, self.gamma]
    }

    pub fn from_array(a: [T; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

/// Wraps an angle into `(-pi, pi]` via `a - 2 pi round(a / 2 pi)`.
pub fn wrap_angle<T: Real>(a: T) -> T {
    let two_pi = T::PI() + T::PI();
    let w = a - two_pi * (a / two_pi).round();
    if w <= -T::PI() {
        w + two_pi
    } else if w > T::PI() {
        w - two_pi
    } else {
        w
    }
}

/// Returns the representative of `angle` (mod 2 pi) closest to `reference`.
pub fn unwrap_near<T: Real>(angle: T, reference: T) -> T {
    reference + wrap_angle(angle - reference)
}

/// `(x, y, theta) -> (rho, delta, gamma)` with both angles wrapped into `(-pi, pi]`.
pub fn cart_to_polar<T: Real>(s: &CartesianState<T>) -> Result<PolarState<T>> {
    if s.x == T::zero() && s.y == T::zero() {
        return Err(Error::PolarChartUndefined);
    }
    let rho = s.x.hypot(s.y);
    let delta = wrap_angle(s.y.atan2(s.x) + T::PI());
    let gamma = wrap_angle(delta - s.theta);
    Ok(PolarState { rho, delta, gamma })
}

/// Inverse of [`cart_to_polar`]; the heading is wrapped into `(-pi, pi]`.
pub fn polar_to_cart<T: Real>(p: &PolarState<T>) -> Result<CartesianState<T>> {
    if !(p.rho > T::zero()) {
        return Err(Error::NonPositiveRho(p.rho.as_f64()));
    }
    Ok(CartesianState {
        x: -p.rho * p.delta.cos(),
        y: -p.rho * p.delta.sin(),
        theta: wrap_angle(p.delta - p.gamma),
    })
}

/// Pose of a polar state without wrapping the heading; also valid at `rho = 0`.
pub(crate) fn polar_to_cart_unwrapped<T: Real>(p: &PolarState<T>) -> CartesianState<T> {
    CartesianState {
        x: -p.rho * p.delta.cos(),
        y: -p.rho * p.delta.sin(),
        theta: p.delta - p.gamma,
    }
}

/// The state spaces `S`, `S1`, `S2`, `S3`.
///
/// All four require `rho > 0`. `S1` and `S3` bound the polar angle by
/// `|delta| < pi`; `S2` and `S3` bound the line-of-sight angle by `|gamma| < pi`.
/// The angular factors (`T`, `T1`, `T2`, `T3`) are the same sets without the
/// `rho` coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StateSpace {
    S,
    S1,
    S2,
    S3,
}

impl StateSpace {
    pub const ALL: [StateSpace; 4] = [StateSpace::S, StateSpace::S1, StateSpace::S2, StateSpace::S3];

    pub fn bounds_delta(self) -> bool {
        matches!(self, StateSpace::S1 | StateSpace::S3)
    }

    pub fn bounds_gamma(self) -> bool {
        matches!(self, StateSpace::S2 | StateSpace::S3)
    }

    /// Membership of the angular part in the open factor `T`, `T1`, `T2` or `T3`.
    pub fn contains_angles<T: Real>(self, delta: T, gamma: T) -> bool {
        if !(delta.is_finite() && gamma.is_finite()) {
            return false;
        }
        (!self.bounds_delta() || delta.abs() < T::PI()) && (!self.bounds_gamma() || gamma.abs() < T::PI())
    }

    /// Membership in the open space (`rho > 0`).
    pub fn contains<T: Real>(self, p: &PolarState<T>) -> bool {
        p.rho > T::zero() && p.rho.is_finite() && self.contains_angles(p.delta, p.gamma)
    }

    /// Angular part of the metric, `|(delta, gamma)|_T`.
    pub fn angular_metric<T: Real>(self, delta: T, gamma: T) -> Result<T> {
        if !self.contains_angles(delta, gamma) {
            return Err(Error::MetricInfinite(self));
        }
        let term = |a: T, barrier: bool| {
            if barrier {
                c::<T>(2.0) * (a.abs() / c(2.0)).tan()
            } else {
                a.abs()
            }
        };
        Ok(term(delta, self.bounds_delta()) + term(gamma, self.bounds_gamma()))
    }

    /// `|(rho, delta, gamma)|_S`: `rho` plus the angular metric, where barriered
    /// angles enter through `2 tan(|a| / 2)`. Defined on the closure `rho >= 0`
    /// so the target itself has metric zero.
    pub fn metric<T: Real>(self, p: &PolarState<T>) -> Result<T> {
        if p.rho < T::zero() || !p.rho.is_finite() {
            return Err(Error::MetricInfinite(self));
        }
        Ok(p.rho + self.angular_metric(p.delta, p.gamma)?)
    }
}

impl fmt::Display for StateSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            StateSpace::S => "S",
            StateSpace::S1 => "S1",
            StateSpace::S2 => "S2",
            StateSpace::S3 => "S3",
        };
        f.write_str(s)
    }
}

/// Free-function form of [`StateSpace::metric`].
pub fn metric<T: Real>(space: StateSpace, p: &PolarState<T>) -> Result<T> {
    space.metric(p)
}
