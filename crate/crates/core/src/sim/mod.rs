//! Closed-loop simulation of the unicycle in polar or Cartesian coordinates.

mod export;
pub mod integrator;

use serde::{Deserialize, Serialize};

use crate::controllers::{ControlInput, SteeringLaw};
use crate::error::{Error, Result};
use crate::geometry::{cart_to_polar, polar_to_cart_unwrapped, unwrap_near, CartesianState, PolarState, StateSpace};
use crate::lyapunov::CompositeLyapunovFn;
use crate::scalar::{c, Real};

pub use export::CSV_HEADER;
use integrator::{dopri5_step, rk4_step, State};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    Polar,
    Cartesian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Integrator<T> {
    /// Classic RK4 with step `dt`.
    Rk4,
    /// Dormand-Prince 5(4) with step-size control; `dt` is the first trial step.
    Rk45 { rtol: T, atol: T },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig<T> {
    pub dt: T,
    pub t_final: T,
    /// Capture when `rho`, `|delta|` and `|gamma|` are all below this value.
    pub capture_radius: T,
    pub frame: Frame,
    pub integrator: Integrator<T>,
    /// When set, only states at multiples of this interval (and the final
    /// state) are recorded, and steps are shortened to land on them.
    #[serde(default)]
    pub sample_interval: Option<T>,
    /// Adaptive steps below this size stop the run.
    pub dt_min: T,
}

impl<T: Real> Default for SimConfig<T> {
    fn default() -> Self {
        Self {
            dt: c(1e-2),
            t_final: c(60.0),
            capture_radius: c(1e-3),
            frame: Frame::Polar,
            integrator: Integrator::Rk45 { rtol: c(1e-10), atol: c(1e-10) },
            sample_interval: None,
            dt_min: c(1e-9),
        }
    }
}

impl<T: Real> SimConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.dt > T::zero() && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        if !(self.t_final > T::zero() && self.t_final.is_finite()) {
            return bad("t_final must be positive");
        }
        if !(self.capture_radius >= T::zero()) {
            return bad("capture_radius must be non-negative");
        }
        if !(self.dt_min > T::zero()) {
            return bad("dt_min must be positive");
        }
        if let Some(s) = self.sample_interval {
            if !(s > T::zero() && s.is_finite()) {
                return bad("sample_interval must be positive");
            }
        }
        if let Integrator::Rk45 { rtol, atol } = self.integrator {
            if !(rtol > T::zero() && atol > T::zero()) {
                return bad("integrator tolerances must be positive");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum SimStatus {
    Captured,
    HorizonReached,
    BoundaryStop(String),
}

/// Recorded closed-loop run. All sequences have the same length.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    /// Polar states with unwrapped angles.
    pub states: Vec<PolarState<T>>,
    pub cartesian: Vec<CartesianState<T>>,
    pub inputs: Vec<ControlInput<T>>,
    /// Values of the attached composite Lyapunov function (empty if none).
    pub lyapunov: Vec<T>,
    pub status: SimStatus,
}

impl<T: Real> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> PolarState<T> {
        *self.states.last().expect("trajectory holds the initial state")
    }

    pub fn final_time(&self) -> T {
        *self.times.last().expect("trajectory holds the initial state")
    }

    pub fn capture_time(&self) -> Option<T> {
        (self.status == SimStatus::Captured).then(|| self.final_time())
    }

    /// Length of the recorded planar path.
    pub fn path_length(&self) -> T {
        self.cartesian
            .windows(2)
            .fold(T::zero(), |acc, w| acc + (w[1].x - w[0].x).hypot(w[1].y - w[0].y))
    }

    pub fn max_abs_omega(&self) -> T {
        self.inputs.iter().fold(T::zero(), |m, u| m.max(u.omega.abs()))
    }

    /// Largest single-sample increase of the attached Lyapunov values
    /// (zero when they never increase, `None` when none are attached).
    pub fn max_lyapunov_increase(&self) -> Option<T> {
        if self.lyapunov.is_empty() {
            return None;
        }
        Some(self.lyapunov.windows(2).fold(T::zero(), |m, w| {
            let inc = w[1] - w[0];
            if inc.is_nan() {
                T::infinity()
            } else {
                m.max(inc)
            }
        }))
    }

    pub fn lyapunov_monotone(&self, tol: T) -> Option<bool> {
        self.max_lyapunov_increase().map(|inc| inc <= tol)
    }

    /// Smallest distance `pi - |angle|` over the barriered angles of `space`
    /// (infinite for `S`).
    pub fn min_barrier_distance(&self, space: StateSpace) -> T {
        self.states.iter().fold(T::infinity(), |m, p| {
            let mut d = m;
            if space.bounds_delta() {
                d = d.min(T::PI() - p.delta.abs());
            }
            if space.bounds_gamma() {
                d = d.min(T::PI() - p.gamma.abs());
            }
            d
        })
    }
}

/// Closed-loop polar vector field `(rho', delta', gamma')`.
///
/// The `v / rho` cancellation is applied analytically, so the field is
/// regular at `rho = 0`; `gamma' = -omega_tilde` because the `sin(2 gamma)`
/// terms of the turn rate and the kinematics cancel.
pub fn rhs_polar<T: Real, L: SteeringLaw<T> + ?Sized>(law: &L, p: &PolarState<T>) -> Result<[T; 3]> {
    let k1 = law.k1();
    let cg = p.gamma.cos();
    let w = law.omega_tilde(p.delta, p.gamma)?;
    Ok([-k1 * p.rho * cg * cg, k1 / c(2.0) * (p.gamma + p.gamma).sin(), -w])
}

/// Unicycle kinematics `(x', y', theta')` under the control evaluated at the
/// (wrapped) polar chart of `s`.
pub fn rhs_cartesian<T: Real, L: SteeringLaw<T> + ?Sized>(law: &L, s: &CartesianState<T>) -> Result<[T; 3]> {
    let p = cart_to_polar(s)?;
    kinematics(law, s, &p)
}

fn kinematics<T: Real, L: SteeringLaw<T> + ?Sized>(
    law: &L,
    s: &CartesianState<T>,
    p: &PolarState<T>,
) -> Result<[T; 3]> {
    let u = law.control(p)?;
    Ok([u.v * s.theta.cos(), u.v * s.theta.sin(), u.omega])
}

/// Polar chart of `s` with the angles placed on the branch nearest `reference`.
fn polar_near<T: Real>(s: &CartesianState<T>, reference: &PolarState<T>) -> Result<PolarState<T>> {
    let p = cart_to_polar(s)?;
    Ok(PolarState::new(p.rho, unwrap_near(p.delta, reference.delta), unwrap_near(p.gamma, reference.gamma)))
}

struct Recorder<'a, T: Real, L: SteeringLaw<T> + ?Sized> {
    law: &'a L,
    monitor: Option<&'a CompositeLyapunovFn<T>>,
    traj: Trajectory<T>,
}

impl<T: Real, L: SteeringLaw<T> + ?Sized> Recorder<'_, T, L> {
    fn push(&mut self, t: T, p: PolarState<T>, cart: CartesianState<T>) -> Result<()> {
        let u = self.law.control(&p)?;
        self.traj.times.push(t);
        self.traj.states.push(p);
        self.traj.cartesian.push(cart);
        self.traj.inputs.push(u);
        if let Some(m) = self.monitor {
            self.traj.lyapunov.push(m.value(&p).unwrap_or(T::nan()));
        }
        Ok(())
    }
}

fn captured<T: Real>(p: &PolarState<T>, radius: T) -> bool {
    p.rho < radius && p.delta.abs() < radius && p.gamma.abs() < radius
}

/// Integrates the closed loop of `law` from the polar state `x0`.
///
/// The run ends when the state is captured, the horizon is reached, or the
/// integrator cannot make progress (a right-hand-side evaluation fails or the
/// adaptive step falls below `dt_min`), which happens only when the state is
/// pushed against an excluded set. Attached Lyapunov values are recorded at
/// every stored sample.
pub fn simulate<T, L>(
    law: &L,
    x0: &PolarState<T>,
    cfg: &SimConfig<T>,
    monitor: Option<&CompositeLyapunovFn<T>>,
) -> Result<Trajectory<T>>
where
    T: Real,
    L: SteeringLaw<T> + ?Sized,
{
    cfg.validate()?;
    if !x0.is_finite() || x0.rho < T::zero() {
        return Err(Error::InvalidConfig(format!("initial state {x0:?} is not a valid polar state")));
    }
    if cfg.frame == Frame::Cartesian && !(x0.rho > T::zero()) {
        return Err(Error::PolarChartUndefined);
    }
    law.control(x0)?;

    let mut rec = Recorder {
        law,
        monitor,
        traj: Trajectory {
            times: Vec::new(),
            states: Vec::new(),
            cartesian: Vec::new(),
            inputs: Vec::new(),
            lyapunov: Vec::new(),
            status: SimStatus::HorizonReached,
        },
    };

    let cart0 = polar_to_cart_unwrapped(x0);
    // Integrated coordinates: polar state, or (x, y, theta).
    let mut y: State<T> = match cfg.frame {
        Frame::Polar => x0.to_array(),
        Frame::Cartesian => [cart0.x, cart0.y, cart0.theta],
    };
    let mut polar = *x0;
    rec.push(T::zero(), polar, cart0)?;

    let mut t = T::zero();
    let mut h = cfg.dt.min(cfg.t_final);
    let mut samples_taken: u64 = 0;
    let time_eps = c::<T>(1e-12) * cfg.t_final.max(T::one());

    let status = loop {
        if captured(&polar, cfg.capture_radius) {
            break SimStatus::Captured;
        }
        if t >= cfg.t_final - time_eps {
            break SimStatus::HorizonReached;
        }

        let mut limit = cfg.t_final - t;
        let mut next_sample = None;
        if let Some(si) = cfg.sample_interval {
            let ts = si * c((samples_taken + 1) as f64);
            next_sample = Some(ts);
            limit = limit.min(ts - t);
        }

        let reference = polar;
        let mut field = |s: &State<T>| -> Result<State<T>> {
            match cfg.frame {
                Frame::Polar => rhs_polar(law, &PolarState::from_array(*s)),
                Frame::Cartesian => {
                    let cs = CartesianState::new(s[0], s[1], s[2]);
                    let p = polar_near(&cs, &reference)?;
                    kinematics(law, &cs, &p)
                }
            }
        };

        let step = match cfg.integrator {
            Integrator::Rk4 => {
                let h_try = cfg.dt.min(limit);
                match rk4_step(&mut field, &y, h_try) {
                    Ok(next) if next.iter().all(|v| v.is_finite()) => Ok((h_try, next)),
                    Ok(_) => Err("non-finite state".to_string()),
                    Err(e) => Err(e.to_string()),
                }
            }
            Integrator::Rk45 { rtol, atol } => {
                let mut h_try = h.min(limit);
                let mut last_err = String::from("step size underflow");
                loop {
                    if h_try < cfg.dt_min && h_try < limit {
                        break Err(format!("step rejected below dt_min at t = {t}: {last_err}"));
                    }
                    match dopri5_step(&mut field, &y, h_try, rtol, atol) {
                        Ok(s) if s.error.is_finite() && s.error <= T::one() => {
                            let grow = if s.error > T::zero() {
                                (c::<T>(0.9) * s.error.powf(c(-0.2))).min(c(5.0))
                            } else {
                                c(5.0)
                            };
                            // Keep the unclipped proposal so sample/horizon clipping
                            // does not throttle later steps.
                            h = h.max(h_try) * grow;
                            break Ok((h_try, s.y));
                        }
                        Ok(s) => {
                            let shrink = if s.error.is_finite() {
                                (c::<T>(0.9) * s.error.powf(c(-0.2))).max(c(0.2))
                            } else {
                                c(0.25)
                            };
                            last_err = format!("local error {}", s.error);
                            h_try = h_try * shrink;
                        }
                        Err(e) => {
                            last_err = e.to_string();
                            h_try = h_try * c(0.25);
                        }
                    }
                }
            }
        };

        let (h_used, next) = match step {
            Ok(v) => v,
            Err(reason) => break SimStatus::BoundaryStop(reason),
        };

        let (new_polar, new_cart) = match cfg.frame {
            Frame::Polar => {
                let p = PolarState::from_array(next);
                (p, polar_to_cart_unwrapped(&p))
            }
            Frame::Cartesian => {
                let cs = CartesianState::new(next[0], next[1], next[2]);
                match polar_near(&cs, &polar) {
                    Ok(p) => (p, cs),
                    Err(e) => break SimStatus::BoundaryStop(e.to_string()),
                }
            }
        };
        if law.control(&new_polar).is_err() {
            break SimStatus::BoundaryStop(format!("control undefined at t = {}", t + h_used));
        }

        t = t + h_used;
        let mut record = cfg.sample_interval.is_none();
        if let Some(ts) = next_sample {
            if (ts - t).abs() <= time_eps {
                t = ts;
                samples_taken += 1;
                record = true;
            }
        }
        if (cfg.t_final - t).abs() <= time_eps {
            t = cfg.t_final;
        }
        y = next;
        polar = new_polar;
        let terminal = captured(&polar, cfg.capture_radius) || t >= cfg.t_final;
        if record || terminal {
            rec.push(t, polar, new_cart)?;
        }
    };

    // Make sure the last accepted state is on record.
    if *rec.traj.times.last().expect("initial state recorded") < t {
        let cart = match cfg.frame {
            Frame::Polar => polar_to_cart_unwrapped(&polar),
            Frame::Cartesian => CartesianState::new(y[0], y[1], y[2]),
        };
        rec.push(t, polar, cart)?;
    }
    rec.traj.status = status;
    Ok(rec.traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controllers::{ControllerKind, ControllerSpec, Gains, Unsteered};
    use crate::lyapunov::{composite, Compositor, LyapunovFn, Order};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn spec(kind: ControllerKind, k: [f64; 4]) -> ControllerSpec<f64> {
        ControllerSpec::new(kind, Gains::from_array(k).unwrap()).unwrap()
    }

    #[test]
    fn rhs_polar_examples() {
        let s = spec(ControllerKind::GloBa, [1.0; 4]);
        // Angular equilibrium; rho still contracts at rate k1.
        assert_eq!(rhs_polar(&s, &PolarState::new(1.0, 0.0, 0.0)).unwrap(), [-1.0, 0.0, 0.0]);
        assert_eq!(rhs_polar(&s, &PolarState::new(0.0, 0.0, 0.0)).unwrap(), [0.0, 0.0, 0.0]);
        let d = rhs_polar(&s, &PolarState::new(1.0, 0.0, FRAC_PI_2)).unwrap();
        assert_abs_diff_eq!(d[0], 0.0, epsilon = 1e-15);
        let d = rhs_polar(&s, &PolarState::new(2.0, 0.0, FRAC_PI_4)).unwrap();
        assert_abs_diff_eq!(d[0], -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn rhs_polar_outside_barrier_space() {
        let s = spec(ControllerKind::BarFli, [1.0; 4]);
        assert!(rhs_polar(&s, &PolarState::new(1.0, PI, 0.0)).is_err());
    }

    #[test]
    fn rhs_cartesian_examples() {
        let s = spec(ControllerKind::GloBa, [1.5, 1.0, 1.0, 1.0]);
        let d = rhs_cartesian(&s, &CartesianState::new(-1.0, 0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(d[0], 1.5);
        assert_abs_diff_eq!(d[1], 0.0);
        // gamma = pi/2: target directly to the side, pure rotation.
        let c = CartesianState::new(-1.0, 0.0, -FRAC_PI_2);
        let d = rhs_cartesian(&s, &c).unwrap();
        assert!((d[0] * d[0] + d[1] * d[1]).sqrt() < 1e-15);
        assert!(rhs_cartesian(&s, &CartesianState::new(0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn straight_approach_is_exponential() {
        let s = spec(ControllerKind::GloBa, [1.3, 1.0, 1.0, 1.0]);
        let cfg = SimConfig { t_final: 5.0, capture_radius: 0.0, ..SimConfig::default() };
        let traj = simulate(&s, &PolarState::new(1.0, 0.0, 0.0), &cfg, None).unwrap();
        assert_eq!(traj.status, SimStatus::HorizonReached);
        for (t, p) in traj.times.iter().zip(&traj.states) {
            assert!((p.rho - (-1.3 * t).exp()).abs() < 1e-6);
            assert_eq!((p.delta, p.gamma), (0.0, 0.0));
        }
        assert_eq!(traj.final_time(), 5.0);
    }

    #[test]
    fn unsteered_heading_settles_sideways() {
        let law = Unsteered { k1: 1.0 };
        let cfg = SimConfig { t_final: 30.0, ..SimConfig::default() };
        for gamma0 in [0.3f64, 2.8, -1.0] {
            let traj = simulate(&law, &PolarState::new(2.0, 0.0, gamma0), &cfg, None).unwrap();
            let g: f64 = traj.final_state().gamma;
            assert!((g.abs() - FRAC_PI_2).abs() < 1e-6, "{gamma0} -> {g}");
            assert_eq!(g.signum(), f64::signum(gamma0));
        }
    }

    #[test]
    fn unsteered_is_unstable_at_zero_heading() {
        let law = Unsteered { k1: 1.0 };
        let cfg = SimConfig { t_final: 1.0, sample_interval: Some(0.1), ..SimConfig::default() };
        let traj = simulate(&law, &PolarState::new(2.0, 0.0, 1e-3), &cfg, None).unwrap();
        let gammas: Vec<f64> = traj.states.iter().map(|p| p.gamma).collect();
        assert!(gammas.windows(2).all(|w| w[1] > w[0]));
        assert!(traj.final_state().gamma > 2.5e-3);
    }

    #[test]
    fn globa_captures_with_monotone_lyapunov() {
        use rand::{Rng, SeedableRng};
        let s = spec(ControllerKind::GloBa, [1.0; 4]);
        let v = composite(Compositor::sum(Order::RhoFirst), LyapunovFn::for_controller(&s)).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let x0 = PolarState::new(rng.gen_range(0.5..5.0), rng.gen_range(-6.0..6.0), rng.gen_range(-6.0..6.0));
            let traj = simulate(&s, &x0, &SimConfig::default(), Some(&v)).unwrap();
            assert_eq!(traj.status, SimStatus::Captured);
            assert!(traj.lyapunov_monotone(1e-9).unwrap());
        }
    }

    #[test]
    fn sampling_lands_on_grid() {
        let s = spec(ControllerKind::GloBa, [1.0; 4]);
        let cfg = SimConfig { t_final: 2.0, sample_interval: Some(0.25), capture_radius: 0.0, ..SimConfig::default() };
        let traj = simulate(&s, &PolarState::new(1.0, 0.5, 0.5), &cfg, None).unwrap();
        assert_eq!(traj.len(), 9);
        for (i, t) in traj.times.iter().enumerate() {
            assert!((t - 0.25 * i as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn rk4_and_rk45_agree() {
        let s = spec(ControllerKind::BarFli, [1.0, 1.0, 0.1, 1.0]);
        let x0 = PolarState::new(2.0, 2.5, -1.0);
        let fixed =
            SimConfig { integrator: Integrator::Rk4, dt: 1e-3, t_final: 10.0, capture_radius: 0.0, ..SimConfig::default() };
        let adaptive = SimConfig { t_final: 10.0, capture_radius: 0.0, ..SimConfig::default() };
        let a = simulate(&s, &x0, &fixed, None).unwrap().final_state();
        let b = simulate(&s, &x0, &adaptive, None).unwrap().final_state();
        assert!((a.delta - b.delta).abs() < 1e-8);
        assert!((a.gamma - b.gamma).abs() < 1e-8);
    }

    #[test]
    fn frames_agree_on_short_run() {
        let s = spec(ControllerKind::GloBa, [1.0; 4]);
        let x0 = PolarState::new(3.0, 4.0, -2.0);
        let base = SimConfig { t_final: 3.0, sample_interval: Some(0.5), ..SimConfig::default() };
        let polar = simulate(&s, &x0, &base, None).unwrap();
        let cart = simulate(&s, &x0, &SimConfig { frame: Frame::Cartesian, ..base }, None).unwrap();
        assert_eq!(polar.len(), cart.len());
        for (a, b) in polar.states.iter().zip(&cart.states) {
            assert!((a.rho - b.rho).abs() < 1e-7);
            assert!((a.delta - b.delta).abs() < 1e-7);
            assert!((a.gamma - b.gamma).abs() < 1e-7);
        }
    }

    #[test]
    fn barfli_rejects_front_line_start() {
        let s = spec(ControllerKind::BarFli, [1.0; 4]);
        let err = simulate(&s, &PolarState::new(1.0, PI, 0.0), &SimConfig::default(), None).unwrap_err();
        assert!(matches!(err, Error::SteeringUndefined(_)));
    }

    #[test]
    fn invalid_config_rejected() {
        let s = spec(ControllerKind::GloBa, [1.0; 4]);
        let x0 = PolarState::new(1.0, 0.0, 0.0);
        for cfg in [
            SimConfig { dt: 0.0, ..SimConfig::default() },
            SimConfig { t_final: -1.0, ..SimConfig::default() },
            SimConfig { capture_radius: -1.0, ..SimConfig::default() },
        ] {
            assert!(matches!(simulate(&s, &x0, &cfg, None), Err(Error::InvalidConfig(_))));
        }
    }

    #[test]
    fn runs_in_single_precision() {
        let s = ControllerSpec::new(ControllerKind::GloBa, Gains::new(1.0f32, 1.0, 1.0, 1.0).unwrap()).unwrap();
        let cfg = SimConfig::<f32> { integrator: Integrator::Rk4, dt: 0.01, t_final: 30.0, capture_radius: 1e-2, ..SimConfig::default() };
        let traj = simulate(&s, &PolarState::new(2.0f32, 1.0, -1.0), &cfg, None).unwrap();
        assert_eq!(traj.status, SimStatus::Captured);
    }
}
