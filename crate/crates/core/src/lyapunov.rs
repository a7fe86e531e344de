//! Strict and barrier control Lyapunov functions for the `(delta, gamma)`
//! subsystem and the composite functions `V(rho, delta, gamma)` built from them.
//!
//! Every function here has analytic partials. Time derivatives are taken
//! along the closed loop
//!
//! ```text
//! rho'   = -k1 rho cos^2(gamma)
//! delta' = (k1/2) sin(2 gamma)
//! gamma' = -omega_tilde(delta, gamma)
//! ```

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::controllers::{ControllerKind, ControllerSpec, Gains, Shaping, SteeringLaw};
use crate::error::{Error, Result};
use crate::geometry::{PolarState, StateSpace};
use crate::scalar::{c, Real};

/// Which `V_{delta gamma}` a [`LyapunovFn`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LyapunovKind {
    /// `Delta^2 + q^2 z^2` for the backstepping laws.
    Backstepping(Shaping),
    /// Barrier in `gamma`, paired with the BoLSA law.
    BoLSA,
    /// Barrier in both angles, paired with the BAgAl law.
    BAgAl,
}

impl LyapunovKind {
    pub fn for_controller(kind: ControllerKind) -> Self {
        match kind {
            ControllerKind::GloBa => LyapunovKind::Backstepping(Shaping::Identity),
            ControllerKind::BarFli => LyapunovKind::Backstepping(Shaping::TangentBarrier),
            ControllerKind::BoLSA => LyapunovKind::BoLSA,
            ControllerKind::BAgAl => LyapunovKind::BAgAl,
        }
    }

    pub fn controller_kind(self) -> ControllerKind {
        match self {
            LyapunovKind::Backstepping(s) => s.controller_kind(),
            LyapunovKind::BoLSA => ControllerKind::BoLSA,
            LyapunovKind::BAgAl => ControllerKind::BAgAl,
        }
    }
}

/// A `V_{delta gamma}` with its gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovFn<T> {
    pub kind: LyapunovKind,
    pub gains: Gains<T>,
}

/// The two readings of the BoLSA decrease bound, see [`LyapunovFn::bolsa_bounds`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BolsaBounds<T> {
    /// `-2 k1 k2 V0 - (3/2) k2 (delta + q tan(gamma/2))^2 - 2 k1 q V0^2`
    pub displayed: T,
    /// Same with `delta + 2 q tan(gamma/2)`, the `z` of the derivation.
    pub two_q: T,
}

/// `a = max(k1 q, 2 sqrt(k1 k2)) / (3 k2 q^2)` of the BAgAl function.
pub fn bagal_coefficient<T: Real>(gains: &Gains<T>) -> T {
    let q = gains.q();
    let num = (gains.k1 * q).max(c::<T>(2.0) * (gains.k1 * gains.k2).sqrt());
    num / (c::<T>(3.0) * gains.k2 * q * q)
}

fn half_tan<T: Real>(a: T) -> T {
    (a / c(2.0)).tan()
}

impl<T: Real> LyapunovFn<T> {
    pub fn new(kind: LyapunovKind, gains: Gains<T>) -> Self {
        Self { kind, gains }
    }

    pub fn for_controller(spec: &ControllerSpec<T>) -> Self {
        Self::new(LyapunovKind::for_controller(spec.kind), spec.gains)
    }

    /// The controller this function certifies, with the same gains.
    pub fn controller(&self) -> ControllerSpec<T> {
        ControllerSpec::new_unchecked(self.kind.controller_kind(), self.gains)
    }

    /// Angular state space (`S` stands for `T`, and so on).
    pub fn space(&self) -> StateSpace {
        self.kind.controller_kind().state_space()
    }

    fn ensure_inside(&self, delta: T, gamma: T) -> Result<()> {
        let space = self.space();
        if space.contains_angles(delta, gamma) {
            Ok(())
        } else {
            Err(Error::BarrierBlowUp(delta.as_f64(), gamma.as_f64(), space))
        }
    }

    pub fn value(&self, delta: T, gamma: T) -> Result<T> {
        self.ensure_inside(delta, gamma)?;
        let g = &self.gains;
        let q = g.q();
        let v = match self.kind {
            LyapunovKind::Backstepping(shaping) => {
                let (shaped, _) = shaping.apply(delta)?;
                let z = gamma + (c::<T>(2.0) * g.k2 * shaped).atan() / c(2.0);
                shaped * shaped + q * q * z * z
            }
            LyapunovKind::BoLSA => {
                let t = half_tan(gamma);
                let u = delta * delta + c::<T>(4.0) * q * q * t * t;
                let w = delta + c::<T>(2.0) * q * t;
                g.k3 * (T::one() + (c::<T>(2.0) * q * q + u) / (c::<T>(2.0) * q * g.k2)) * u + w * w
            }
            LyapunovKind::BAgAl => {
                let (td, tg) = (half_tan(delta), half_tan(gamma));
                let u = td * td + q * q * tg * tg;
                let w = td + q * tg;
                let one_u = T::one() + u;
                bagal_coefficient(g) * (one_u * one_u * one_u - T::one()) + w * w
            }
        };
        Ok(v)
    }

    /// `[dV/ddelta, dV/dgamma]`.
    pub fn gradient(&self, delta: T, gamma: T) -> Result<[T; 2]> {
        self.ensure_inside(delta, gamma)?;
        let g = &self.gains;
        let q = g.q();
        let two = c::<T>(2.0);
        let grad = match self.kind {
            LyapunovKind::Backstepping(shaping) => {
                let (shaped, slope) = shaping.apply(delta)?;
                let x = two * g.k2 * shaped;
                let z = gamma + x.atan() / two;
                let dz_ddelta = g.k2 * slope / (T::one() + x * x);
                [
                    two * shaped * slope + two * q * q * z * dz_ddelta,
                    two * q * q * z,
                ]
            }
            LyapunovKind::BoLSA => {
                let t = half_tan(gamma);
                let dt = (T::one() + t * t) / two;
                let u = delta * delta + c::<T>(4.0) * q * q * t * t;
                let w = delta + two * q * t;
                let dv_du = g.k3 * (T::one() + (q * q + u) / (q * g.k2));
                [
                    dv_du * two * delta + two * w,
                    (dv_du * c::<T>(8.0) * q * q * t + two * w * two * q) * dt,
                ]
            }
            LyapunovKind::BAgAl => {
                let (td, tg) = (half_tan(delta), half_tan(gamma));
                let u = td * td + q * q * tg * tg;
                let w = td + q * tg;
                let one_u = T::one() + u;
                let dv_du = c::<T>(3.0) * bagal_coefficient(g) * one_u * one_u;
                [
                    (T::one() + td * td) * (dv_du * td + w),
                    (T::one() + tg * tg) * (dv_du * q * q * tg + q * w),
                ]
            }
        };
        Ok(grad)
    }

    /// `dV/dt = dV/ddelta (k1/2) sin(2 gamma) - dV/dgamma omega_tilde` for an
    /// arbitrary steering law.
    pub fn v_dot_along<L: SteeringLaw<T> + ?Sized>(&self, law: &L, delta: T, gamma: T) -> Result<T> {
        let [dd, dg] = self.gradient(delta, gamma)?;
        let w = law.omega_tilde(delta, gamma)?;
        Ok(dd * law.k1() / c(2.0) * (gamma + gamma).sin() - dg * w)
    }

    /// Time derivative along the paired closed loop.
    ///
    /// For the backstepping functions this is the closed form
    /// `-2 k1 k2 Delta^2 Delta' / sqrt(1 + 4 k2^2 Delta^2) - 2 k4 q^2 z^2`;
    /// for BoLSA and BAgAl it is the chain rule with analytic partials.
    pub fn v_dot_analytic(&self, delta: T, gamma: T) -> Result<T> {
        self.ensure_inside(delta, gamma)?;
        match self.kind {
            LyapunovKind::Backstepping(shaping) => {
                let g = &self.gains;
                let two = c::<T>(2.0);
                let (shaped, slope) = shaping.apply(delta)?;
                let x = two * g.k2 * shaped;
                let z = gamma + x.atan() / two;
                let q2 = g.k1 / g.k3;
                Ok(-two * g.k1 * g.k2 * shaped * shaped * slope / (T::one() + x * x).sqrt()
                    - two * g.k4 * q2 * z * z)
            }
            LyapunovKind::BoLSA | LyapunovKind::BAgAl => self.v_dot_along(&self.controller(), delta, gamma),
        }
    }

    /// Upper bounds on the BoLSA derivative. Errors for other kinds.
    pub fn bolsa_bounds(&self, delta: T, gamma: T) -> Result<BolsaBounds<T>> {
        if self.kind != LyapunovKind::BoLSA {
            return Err(Error::Hypothesis("bolsa_bounds needs the BoLSA function".into()));
        }
        self.ensure_inside(delta, gamma)?;
        let g = &self.gains;
        let q = g.q();
        let t = half_tan(gamma);
        let v0 = c::<T>(4.0) * t * t;
        let head = -c::<T>(2.0) * g.k1 * g.k2 * v0 - c::<T>(2.0) * g.k1 * q * v0 * v0;
        let one = delta + q * t;
        let two = delta + c::<T>(2.0) * q * t;
        Ok(BolsaBounds {
            displayed: head - c::<T>(1.5) * g.k2 * one * one,
            two_q: head - c::<T>(1.5) * g.k2 * two * two,
        })
    }
}

/// Combining function `(r, s) -> value` with its partials.
pub type CustomFn<T> = dyn Fn(T, T) -> (T, T, T) + Send + Sync;

/// User-supplied compositor. The closure returns `(value, d/dr, d/ds)`.
#[derive(Clone)]
pub struct CustomForm<T> {
    pub name: String,
    pub eval: Arc<CustomFn<T>>,
}

impl<T> fmt::Debug for CustomForm<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomForm").field("name", &self.name).finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum CompositorForm<T> {
    /// `r + s`
    Sum,
    /// `ln(1 + r) + s`
    LogSum,
    /// `(1 + r) e^s - 1`
    ExpProduct,
    Custom(CustomForm<T>),
}

/// Which argument of the compositor receives `rho^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Order {
    /// `V = F(rho^2, V_dg)`
    RhoFirst,
    /// `V = F(V_dg, rho^2)`
    VdgFirst,
}

impl Order {
    pub const ALL: [Order; 2] = [Order::RhoFirst, Order::VdgFirst];
}

#[derive(Debug, Clone)]
pub struct Compositor<T> {
    pub form: CompositorForm<T>,
    pub order: Order,
}

/// Result of scanning a compositor against the three admissibility conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionScan<T> {
    /// Smallest margin found; positive means every condition held.
    pub worst_margin: T,
    /// `(r, s)` where the smallest margin occurred.
    pub witness: (T, T),
    /// Condition number (1, 2 or 3) that failed, if any.
    pub failed: Option<u8>,
}

impl<T: Real> Compositor<T> {
    pub fn new(form: CompositorForm<T>, order: Order) -> Self {
        Self { form, order }
    }

    pub fn sum(order: Order) -> Self {
        Self::new(CompositorForm::Sum, order)
    }

    pub fn log_sum(order: Order) -> Self {
        Self::new(CompositorForm::LogSum, order)
    }

    pub fn exp_product(order: Order) -> Self {
        Self::new(CompositorForm::ExpProduct, order)
    }

    pub fn custom<F>(name: &str, order: Order, f: F) -> Self
    where
        F: Fn(T, T) -> (T, T, T) + Send + Sync + 'static,
    {
        Self::new(CompositorForm::Custom(CustomForm { name: name.to_string(), eval: Arc::new(f) }), order)
    }

    /// The three built-in forms in both orders.
    pub fn builtins() -> Vec<Self> {
        let mut out = Vec::with_capacity(6);
        for order in Order::ALL {
            out.push(Self::sum(order));
            out.push(Self::log_sum(order));
            out.push(Self::exp_product(order));
        }
        out
    }

    pub fn name(&self) -> String {
        let form = match &self.form {
            CompositorForm::Sum => "sum",
            CompositorForm::LogSum => "log_sum",
            CompositorForm::ExpProduct => "exp_product",
            CompositorForm::Custom(c) => c.name.as_str(),
        };
        let order = match self.order {
            Order::RhoFirst => "rho_first",
            Order::VdgFirst => "vdg_first",
        };
        format!("{form}/{order}")
    }

    /// `(F(r, s), dF/dr, dF/ds)`.
    pub fn eval(&self, r: T, s: T) -> (T, T, T) {
        match &self.form {
            CompositorForm::Sum => (r + s, T::one(), T::one()),
            CompositorForm::LogSum => (r.ln_1p() + s, (T::one() + r).recip(), T::one()),
            CompositorForm::ExpProduct => {
                let es = s.exp();
                ((T::one() + r) * es - T::one(), es, (T::one() + r) * es)
            }
            CompositorForm::Custom(f) => (f.eval)(r, s),
        }
    }

    /// Checks positivity, radial growth and positive partials on the grid
    /// `r, s in {0} u logspace(-4, 4)`, plus monotone growth along rays out to
    /// `r + s = 1e4`.
    pub fn scan_conditions(&self) -> ConditionScan<T> {
        let mut axis: Vec<T> = vec![T::zero()];
        axis.extend((0..=32).map(|i| c::<T>(10f64.powf(-4.0 + 0.25 * i as f64))));
        let mut scan = ConditionScan { worst_margin: T::infinity(), witness: (T::zero(), T::zero()), failed: None };
        let note = |margin: T, r: T, s: T, condition: u8, scan: &mut ConditionScan<T>| {
            let margin = if margin.is_nan() { T::neg_infinity() } else { margin };
            if margin < scan.worst_margin {
                scan.worst_margin = margin;
                scan.witness = (r, s);
            }
            if !(margin > T::zero()) && scan.failed.is_none() {
                scan.failed = Some(condition);
                scan.witness = (r, s);
            }
        };

        let (v00, _, _) = self.eval(T::zero(), T::zero());
        if v00.abs() > c(1e-12) || v00.is_nan() {
            note(-v00.abs(), T::zero(), T::zero(), 1, &mut scan);
        }
        for &r in &axis {
            for &s in &axis {
                if r == T::zero() && s == T::zero() {
                    continue;
                }
                let (v, dr, ds) = self.eval(r, s);
                note(v, r, s, 1, &mut scan);
                note(dr.min(ds), r, s, 3, &mut scan);
            }
        }
        for (dr, ds) in [(T::one(), T::zero()), (T::zero(), T::one()), (c(0.5), c(0.5))] {
            let mut prev = self.eval(T::zero(), T::zero()).0;
            for k in 0..=16 {
                let radius = c::<T>(10f64.powf(k as f64 * 0.25));
                let (r, s) = (dr * radius, ds * radius);
                let v = self.eval(r, s).0;
                if v.is_infinite() && v > T::zero() {
                    // overflowed: unbounded growth along this ray
                    break;
                }
                note(v - prev, r, s, 2, &mut scan);
                prev = v;
            }
        }
        scan
    }

    pub fn validate(&self) -> Result<()> {
        let scan = self.scan_conditions();
        match scan.failed {
            Some(condition) => Err(Error::InvalidCompositor {
                condition,
                r: scan.witness.0.as_f64(),
                s: scan.witness.1.as_f64(),
            }),
            None => Ok(()),
        }
    }
}

/// `V(rho, delta, gamma)` built from a compositor and a `V_{delta gamma}`.
#[derive(Debug, Clone)]
pub struct CompositeLyapunovFn<T> {
    pub compositor: Compositor<T>,
    pub inner: LyapunovFn<T>,
}

/// Builds a composite function after checking the compositor conditions.
pub fn composite<T: Real>(comp: Compositor<T>, f: LyapunovFn<T>) -> Result<CompositeLyapunovFn<T>> {
    comp.validate()?;
    Ok(CompositeLyapunovFn { compositor: comp, inner: f })
}

impl<T: Real> CompositeLyapunovFn<T> {
    pub fn space(&self) -> StateSpace {
        self.inner.space()
    }

    fn finite(value: T, what: &str) -> Result<T> {
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::NonFinite(what.to_string()))
        }
    }

    fn slots(&self, rho2: T, vdg: T) -> (T, T) {
        match self.compositor.order {
            Order::RhoFirst => (rho2, vdg),
            Order::VdgFirst => (vdg, rho2),
        }
    }

    /// Returns `(V, dV/d(rho^2), dV/dV_dg)`.
    fn outer(&self, p: &PolarState<T>) -> Result<(T, T, T)> {
        let vdg = self.inner.value(p.delta, p.gamma)?;
        let (r, s) = self.slots(p.rho * p.rho, vdg);
        let (v, dr, ds) = self.compositor.eval(r, s);
        let (d_rho2, d_vdg) = match self.compositor.order {
            Order::RhoFirst => (dr, ds),
            Order::VdgFirst => (ds, dr),
        };
        Ok((Self::finite(v, "composite value")?, d_rho2, d_vdg))
    }

    pub fn value(&self, p: &PolarState<T>) -> Result<T> {
        Ok(self.outer(p)?.0)
    }

    /// `[dV/drho, dV/ddelta, dV/dgamma]`.
    pub fn gradient(&self, p: &PolarState<T>) -> Result<[T; 3]> {
        let (_, d_rho2, d_vdg) = self.outer(p)?;
        let [gd, gg] = self.inner.gradient(p.delta, p.gamma)?;
        let grad = [d_rho2 * c(2.0) * p.rho, d_vdg * gd, d_vdg * gg];
        for g in grad {
            Self::finite(g, "composite gradient")?;
        }
        Ok(grad)
    }

    /// `dV/dt` along the closed loop of `law`.
    pub fn v_dot_along<L: SteeringLaw<T> + ?Sized>(&self, law: &L, p: &PolarState<T>) -> Result<T> {
        let [gr, gd, gg] = self.gradient(p)?;
        let k1 = law.k1();
        let cg = p.gamma.cos();
        let w = law.omega_tilde(p.delta, p.gamma)?;
        let v_dot = -gr * k1 * p.rho * cg * cg + gd * k1 / c(2.0) * (p.gamma + p.gamma).sin() - gg * w;
        Self::finite(v_dot, "composite derivative")
    }

    /// `dV/dt` along the closed loop of the paired controller.
    pub fn v_dot(&self, p: &PolarState<T>) -> Result<T> {
        self.v_dot_along(&self.inner.controller(), p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn gains(k: [f64; 4]) -> Gains<f64> {
        Gains::from_array(k).unwrap()
    }

    fn globa(k: [f64; 4]) -> LyapunovFn<f64> {
        LyapunovFn::new(LyapunovKind::Backstepping(Shaping::Identity), gains(k))
    }

    fn central_diff(f: impl Fn(f64) -> f64, x: f64) -> f64 {
        let h = 1e-6;
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn zero_at_origin() {
        for kind in ControllerKind::ALL {
            let f = LyapunovFn::new(LyapunovKind::for_controller(kind), gains([1.0, 1.0, 2.0, 1.0]));
            assert_eq!(f.value(0.0, 0.0).unwrap(), 0.0);
            assert_eq!(f.v_dot_analytic(0.0, 0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn globa_value_example() {
        let z = 2.0f64.atan() / 2.0;
        assert_abs_diff_eq!(globa([1.0; 4]).value(1.0, 0.0).unwrap(), 1.0 + z * z, epsilon = 1e-15);
        assert_abs_diff_eq!(1.0 + z * z, 1.3064445708282746, epsilon = 1e-15);
    }

    #[test]
    fn bolsa_value_example() {
        let f = LyapunovFn::new(LyapunovKind::BoLSA, gains([1.0, 1.0, 0.1, 1.0]));
        let q = 10f64.sqrt();
        let expected = 0.1 * (1.0 + 21.0 / (2.0 * q)) + 1.0;
        assert_abs_diff_eq!(expected, 1.4320391543176798, epsilon = 1e-15);
        assert_abs_diff_eq!(f.value(1.0, 0.0).unwrap(), expected, epsilon = 1e-14);
    }

    #[test]
    fn bolsa_matches_lyapunov_term_decomposition() {
        // V = k3 U + Pi_0 + (k3/k2) q U + k3/(2 q k2) U^2
        let g = gains([1.3, 0.7, 0.9, 1.0]);
        let f = LyapunovFn::new(LyapunovKind::BoLSA, g);
        let q = g.q();
        for &(d, gm) in &[(0.3, -1.0), (-2.0, 2.5), (4.0, 0.1)] {
            let t = (gm / 2.0f64).tan();
            let u = d * d + q * q * 4.0 * t * t;
            let pi0 = (d + 2.0 * q * t).powi(2);
            let pi1 = pi0 + g.k3 / g.k2 * q * u + g.k3 / (2.0 * q * g.k2) * u * u;
            assert_abs_diff_eq!(f.value(d, gm).unwrap(), g.k3 * u + pi1, epsilon = 1e-10);
        }
    }

    #[test]
    fn bagal_coefficient_formula() {
        let g = gains([1.0, 1.0, 0.1, 1.0]);
        let q = 10f64.sqrt();
        assert_abs_diff_eq!(bagal_coefficient(&g), q.max(2.0) / (3.0 * 10.0), epsilon = 1e-15);
        let g = gains([1.0, 4.0, 1.0, 1.0]);
        assert_abs_diff_eq!(bagal_coefficient(&g), 4.0 / 12.0, epsilon = 1e-15);
    }

    #[test]
    fn globa_v_dot_example() {
        let z = 2.0f64.atan() / 2.0;
        let expected = -2.0 / 5f64.sqrt() - 2.0 * z * z;
        assert_abs_diff_eq!(expected, -1.507316332656465, epsilon = 1e-15);
        assert_abs_diff_eq!(globa([1.0; 4]).v_dot_analytic(1.0, 0.0).unwrap(), expected, epsilon = 1e-14);
    }

    #[test]
    fn backstepping_closed_form_equals_chain_rule() {
        for shaping in [Shaping::Identity, Shaping::TangentBarrier] {
            let f = LyapunovFn::new(LyapunovKind::Backstepping(shaping), gains([0.7, 1.9, 0.4, 2.2]));
            let law = f.controller();
            for &(d, g) in &[(0.3, -1.0), (-2.0, 2.5), (2.9, 7.0), (1e-3, -4e-3)] {
                let closed = f.v_dot_analytic(d, g).unwrap();
                let chain = f.v_dot_along(&law, d, g).unwrap();
                assert!((closed - chain).abs() <= 1e-10 * closed.abs().max(1.0), "{shaping:?} {d} {g}");
            }
        }
    }

    #[test]
    fn globa_gradient_example() {
        let f = globa([1.0; 4]);
        let z = 2.0f64.atan() / 2.0;
        assert_abs_diff_eq!(f.gradient(1.0, 0.0).unwrap()[1], 2.0 * z, epsilon = 1e-15);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let g = gains([1.0, 1.0, 0.1, 1.0]);
        for kind in ControllerKind::ALL {
            let f = LyapunovFn::new(LyapunovKind::for_controller(kind), g);
            for &(d, gm) in &[(0.5, 0.5), (-1.2, 2.0), (2.5, -0.3)] {
                let [ad, ag] = f.gradient(d, gm).unwrap();
                let fd = central_diff(|x| f.value(x, gm).unwrap(), d);
                let fg = central_diff(|x| f.value(d, x).unwrap(), gm);
                let scale = ad.abs().max(ag.abs()).max(1.0);
                assert!((ad - fd).abs() / scale < 1e-5, "{kind} d");
                assert!((ag - fg).abs() / scale < 1e-5, "{kind} g");
            }
        }
    }

    #[test]
    fn bolsa_v_dot_matches_flow_difference() {
        // Central difference of V along the exact closed-loop vector field.
        let g = gains([1.0, 1.0, 0.1, 1.0]);
        let f = LyapunovFn::new(LyapunovKind::BoLSA, g);
        let law = ControllerSpec::new_unchecked(ControllerKind::BoLSA, g);
        let (d, gm) = (0.5, 0.5);
        let dd = 0.5 * (2.0f64 * gm).sin();
        let dg = -law.omega_tilde(d, gm).unwrap();
        let h = 1e-6;
        let fd = (f.value(d + h * dd, gm + h * dg).unwrap() - f.value(d - h * dd, gm - h * dg).unwrap()) / (2.0 * h);
        assert!((f.v_dot_analytic(d, gm).unwrap() - fd).abs() < 1e-6);
    }

    #[test]
    fn barrier_blow_up() {
        let g = gains([1.0, 1.0, 1.0, 1.0]);
        let edge = PI - 1e-6;
        let bar = LyapunovFn::new(LyapunovKind::Backstepping(Shaping::TangentBarrier), g);
        assert!(bar.value(edge, 0.0).unwrap() > 1e6);
        assert!(bar.value(-edge, 0.0).unwrap() > 1e6);
        let bolsa = LyapunovFn::new(LyapunovKind::BoLSA, g);
        assert!(bolsa.value(0.0, edge).unwrap() > 1e6);
        let bagal = LyapunovFn::new(LyapunovKind::BAgAl, g);
        assert!(bagal.value(edge, 0.0).unwrap() > 1e6);
        assert!(bagal.value(0.0, -edge).unwrap() > 1e6);
        for f in [bar, bagal] {
            assert!(matches!(f.value(PI, 0.0), Err(Error::BarrierBlowUp(..))));
        }
        assert!(matches!(bolsa.value(0.0, PI), Err(Error::BarrierBlowUp(..))));
    }

    #[test]
    fn composite_examples() {
        let f = globa([1.0; 4]);
        let p = PolarState::new(1.0, 0.0, 0.0);
        let sum = composite(Compositor::sum(Order::RhoFirst), f).unwrap();
        assert_eq!(sum.value(&p).unwrap(), 1.0);
        let log = composite(Compositor::log_sum(Order::RhoFirst), f).unwrap();
        assert_abs_diff_eq!(log.value(&p).unwrap(), 2f64.ln(), epsilon = 1e-15);
        let exp = composite(Compositor::exp_product(Order::RhoFirst), f).unwrap();
        let s = f.value(0.4, -0.2).unwrap();
        assert_abs_diff_eq!(exp.value(&PolarState::new(0.0, 0.4, -0.2)).unwrap(), s.exp() - 1.0, epsilon = 1e-14);
    }

    #[test]
    fn composite_gradient_examples() {
        let f = globa([1.0; 4]);
        let sum = composite(Compositor::sum(Order::RhoFirst), f).unwrap();
        let g = sum.gradient(&PolarState::new(2.0, 0.0, 0.0)).unwrap();
        assert_eq!(g, [4.0, 0.0, 0.0]);
        let swapped = composite(Compositor::log_sum(Order::VdgFirst), f).unwrap();
        // F(V_dg, rho^2) = ln(1 + V_dg) + rho^2
        let g = swapped.gradient(&PolarState::new(2.0, 0.0, 0.0)).unwrap();
        assert_eq!(g[0], 4.0);
    }

    #[test]
    fn builtin_compositors_pass_conditions() {
        for comp in Compositor::<f64>::builtins() {
            let scan = comp.scan_conditions();
            assert!(scan.failed.is_none(), "{}", comp.name());
            assert!(scan.worst_margin > 0.0);
        }
    }

    #[test]
    fn product_compositor_rejected() {
        let comp = Compositor::custom("product", Order::RhoFirst, |r: f64, s: f64| (r * s, s, r));
        match composite(comp, globa([1.0; 4])) {
            Err(Error::InvalidCompositor { condition, r, s }) => {
                assert_eq!(condition, 1);
                assert!(r == 0.0 || s == 0.0);
            }
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn bounded_compositor_fails_radial_probe() {
        // tanh(r + s) has positive partials but does not grow without bound.
        let comp = Compositor::custom("tanh", Order::RhoFirst, |r: f64, s: f64| {
            let t = (r + s).tanh();
            (t, 1.0 - t * t, 1.0 - t * t)
        });
        let scan = comp.scan_conditions();
        assert!(scan.failed.is_some());
    }

    #[test]
    fn composite_decreases_off_origin() {
        let g = gains([1.0, 1.0, 1.0, 1.0]);
        for kind in ControllerKind::ALL {
            let f = LyapunovFn::new(LyapunovKind::for_controller(kind), g);
            for comp in Compositor::builtins() {
                let name = comp.name();
                let v = composite(comp, f).unwrap();
                for p in [
                    PolarState::new(1.0, 0.0, 0.0),
                    PolarState::new(0.0, 0.3, -0.2),
                    PolarState::new(0.5, -1.0, 1.2),
                ] {
                    assert!(v.v_dot(&p).unwrap() < 0.0, "{kind} {name} {p:?}");
                }
            }
        }
    }
}
