//! Smooth polar-coordinate parking feedback for the unicycle.
//!
//! The crate provides the forward-velocity feedback `v = k1 rho cos(gamma)`,
//! four steering laws for the angular subsystem (`GloBa`, `BAR-FLi`, `BoLSA`,
//! `BAgAl`), their strict and barrier control Lyapunov functions, composite
//! Lyapunov builders, a closed-loop simulator and a numerical certification
//! battery.
//!
//! The numeric core is generic over [`Real`] (`f32` or `f64`); the
//! certification battery runs in `f64`. Concrete aliases are exported below.

// `!(x > 0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controllers;
pub mod error;
pub mod geometry;
pub mod lyapunov;
pub mod scalar;
pub mod sim;
pub mod verify;

pub use controllers::{
    control, delta_shaping, forward_velocity, omega_tilde, psi, BacksteppingAux, ControlInput, ControllerKind,
    ControllerSpec, Gains, Shaping, SteeringLaw, Unsteered,
};
pub use error::{Error, Result};
pub use geometry::{cart_to_polar, metric, polar_to_cart, wrap_angle, CartesianState, PolarState, StateSpace};
pub use lyapunov::{
    bagal_coefficient, composite, CompositeLyapunovFn, Compositor, CompositorForm, LyapunovFn, LyapunovKind, Order,
};
pub use scalar::Real;
pub use verify::{CertReport, Suite};
pub use sim::{rhs_cartesian, rhs_polar, simulate, Frame, Integrator, SimConfig, SimStatus, Trajectory};

pub type CartesianStateF64 = CartesianState<f64>;
pub type PolarStateF64 = PolarState<f64>;
pub type GainsF64 = Gains<f64>;
pub type ControllerSpecF64 = ControllerSpec<f64>;
pub type ControlInputF64 = ControlInput<f64>;
pub type LyapunovFnF64 = LyapunovFn<f64>;
pub type CompositorF64 = Compositor<f64>;
pub type CompositeLyapunovFnF64 = CompositeLyapunovFn<f64>;
pub type SimConfigF64 = SimConfig<f64>;
pub type TrajectoryF64 = Trajectory<f64>;

pub type CartesianStateF32 = CartesianState<f32>;
pub type PolarStateF32 = PolarState<f32>;
pub type GainsF32 = Gains<f32>;
pub type ControllerSpecF32 = ControllerSpec<f32>;
pub type LyapunovFnF32 = LyapunovFn<f32>;
pub type SimConfigF32 = SimConfig<f32>;
pub type TrajectoryF32 = Trajectory<f32>;
