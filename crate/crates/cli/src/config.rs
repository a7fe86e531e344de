//! JSON experiment configuration.
//!
//! ```json
//! {
//!   "controllers": ["globa", "barfli"],
//!   "gains": [1.0, 1.0, 0.1, 1.0],
//!   "enforce_gain_condition": true,
//!   "initial_conditions": [{"rho": 3.0, "delta": 0.5, "gamma": -1.0}, {"x": -2.0, "y": 1.0, "theta": 0.0}],
//!   "random_initial_conditions": {"count": 8, "rho": [0.5, 5.0], "delta": [-3.0, 3.0], "gamma": [-3.0, 3.0]},
//!   "sim": {"dt": 0.01, "t_final": 60.0, "capture_radius": 0.001, "frame": "polar",
//!           "integrator": {"kind": "rk45", "rtol": 1e-10, "atol": 1e-10}, "sample_interval": 0.05, "dt_min": 1e-9},
//!   "lyapunov": {"form": "sum", "order": "rho_first"},
//!   "seed": 7,
//!   "write_trajectories": true,
//!   "similarity_tolerance": 0.05,
//!   "sweep": {"rho": [1.0, 3.0], "delta": [-1.0, 1.0], "gamma": [0.0], "gains": [[1, 1, 1, 1]]}
//! }
//! ```
//!
//! Every field except the initial conditions has a default. Unknown fields
//! are rejected.

use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use polar_park::{
    cart_to_polar, CartesianState, CompositeLyapunovFn, Compositor, ControllerKind, ControllerSpec, Frame, Gains,
    Integrator, LyapunovFn, Order, PolarState, SimConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
pub enum GainsRepr {
    Array([f64; 4]),
    Named { k1: f64, k2: f64, k3: f64, k4: f64 },
}

impl GainsRepr {
    pub fn to_gains(self) -> Result<Gains<f64>> {
        let k = match self {
            GainsRepr::Array(k) => k,
            GainsRepr::Named { k1, k2, k3, k4 } => [k1, k2, k3, k4],
        };
        Ok(Gains::from_array(k)?)
    }
}

impl Default for GainsRepr {
    fn default() -> Self {
        GainsRepr::Array([1.0; 4])
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum InitialCondition {
    Polar { rho: f64, delta: f64, gamma: f64 },
    Cartesian { x: f64, y: f64, theta: f64 },
}

impl InitialCondition {
    pub fn to_polar(self) -> Result<PolarState<f64>> {
        let p = match self {
            InitialCondition::Polar { rho, delta, gamma } => PolarState::new(rho, delta, gamma),
            InitialCondition::Cartesian { x, y, theta } => cart_to_polar(&CartesianState::new(x, y, theta))
                .with_context(|| format!("initial pose ({x}, {y}, {theta})"))?,
        };
        ensure!(p.is_finite() && p.rho >= 0.0, "initial condition {p:?} must be finite with rho >= 0");
        Ok(p)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomIcs {
    pub count: usize,
    #[serde(default = "default_rho_range")]
    pub rho: [f64; 2],
    #[serde(default = "default_angle_range")]
    pub delta: [f64; 2],
    #[serde(default = "default_angle_range")]
    pub gamma: [f64; 2],
}

fn default_rho_range() -> [f64; 2] {
    [0.5, 5.0]
}

fn default_angle_range() -> [f64; 2] {
    [-3.0, 3.0]
}

/// Overrides for [`SimConfig`]; missing fields keep the library defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSettings {
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub capture_radius: Option<f64>,
    pub frame: Option<Frame>,
    pub integrator: Option<Integrator<f64>>,
    pub sample_interval: Option<f64>,
    pub dt_min: Option<f64>,
}

impl SimSettings {
    pub fn to_config(&self) -> SimConfig<f64> {
        let d = SimConfig::default();
        SimConfig {
            dt: self.dt.unwrap_or(d.dt),
            t_final: self.t_final.unwrap_or(d.t_final),
            capture_radius: self.capture_radius.unwrap_or(d.capture_radius),
            frame: self.frame.unwrap_or(d.frame),
            integrator: self.integrator.unwrap_or(d.integrator),
            sample_interval: self.sample_interval.or(d.sample_interval),
            dt_min: self.dt_min.unwrap_or(d.dt_min),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormName {
    #[default]
    Sum,
    LogSum,
    ExpProduct,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovSettings {
    #[serde(default)]
    pub form: FormName,
    #[serde(default = "default_order")]
    pub order: Order,
}

fn default_order() -> Order {
    Order::RhoFirst
}

impl Default for LyapunovSettings {
    fn default() -> Self {
        Self { form: FormName::Sum, order: Order::RhoFirst }
    }
}

impl LyapunovSettings {
    pub fn monitor(&self, spec: &ControllerSpec<f64>) -> CompositeLyapunovFn<f64> {
        let compositor = match self.form {
            FormName::Sum => Compositor::sum(self.order),
            FormName::LogSum => Compositor::log_sum(self.order),
            FormName::ExpProduct => Compositor::exp_product(self.order),
        };
        CompositeLyapunovFn { compositor, inner: LyapunovFn::for_controller(spec) }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSettings {
    pub rho: Vec<f64>,
    pub delta: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Gain sets to sweep; the top-level gains when empty.
    #[serde(default)]
    pub gains: Vec<GainsRepr>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub controller: Option<ControllerKind>,
    #[serde(default)]
    pub controllers: Vec<ControllerKind>,
    #[serde(default)]
    pub gains: GainsRepr,
    /// When false, the passivity laws accept gains with `k1 k3 < k2^2`.
    #[serde(default = "yes")]
    pub enforce_gain_condition: bool,
    #[serde(default)]
    pub initial_conditions: Vec<InitialCondition>,
    #[serde(default)]
    pub random_initial_conditions: Option<RandomIcs>,
    #[serde(default)]
    pub sim: SimSettings,
    #[serde(default)]
    pub lyapunov: LyapunovSettings,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub write_trajectories: Option<bool>,
    /// Paths whose largest position gap is below this fraction of the
    /// initial distance are reported as similar by `compare`.
    #[serde(default = "default_similarity_tolerance")]
    pub similarity_tolerance: f64,
    #[serde(default)]
    pub sweep: Option<SweepSettings>,
}

fn yes() -> bool {
    true
}

fn default_similarity_tolerance() -> f64 {
    0.05
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).context("invalid config")?;
        cfg.sim.to_config().validate()?;
        ensure!(cfg.similarity_tolerance > 0.0, "similarity_tolerance must be positive");
        for k in cfg.controller_kinds()? {
            cfg.spec(k, cfg.gains)?;
        }
        Ok(cfg)
    }

    /// `controllers`, or the single `controller`.
    pub fn controller_kinds(&self) -> Result<Vec<ControllerKind>> {
        let mut kinds = self.controllers.clone();
        if let Some(k) = self.controller {
            if !kinds.contains(&k) {
                kinds.insert(0, k);
            }
        }
        if kinds.is_empty() {
            bail!("config lists no controller");
        }
        Ok(kinds)
    }

    pub fn spec(&self, kind: ControllerKind, gains: GainsRepr) -> Result<ControllerSpec<f64>> {
        let g = gains.to_gains()?;
        Ok(if self.enforce_gain_condition { ControllerSpec::new(kind, g)? } else { ControllerSpec::new_unchecked(kind, g) })
    }

    /// Listed initial conditions followed by the random ones.
    pub fn initial_states(&self, seed: u64) -> Result<Vec<PolarState<f64>>> {
        let mut out = self.initial_conditions.iter().map(|ic| ic.to_polar()).collect::<Result<Vec<_>>>()?;
        if let Some(r) = &self.random_initial_conditions {
            for (name, [lo, hi]) in [("rho", r.rho), ("delta", r.delta), ("gamma", r.gamma)] {
                ensure!(lo.is_finite() && hi.is_finite() && lo <= hi, "random {name} range [{lo}, {hi}] is invalid");
            }
            ensure!(r.rho[0] >= 0.0, "random rho range must be non-negative");
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut draw = |[lo, hi]: [f64; 2]| if lo == hi { lo } else { rng.gen_range(lo..hi) };
            for _ in 0..r.count {
                out.push(PolarState::new(draw(r.rho), draw(r.delta), draw(r.gamma)));
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = ExperimentConfig::parse(r#"{"controller": "globa", "initial_conditions": [{"rho": 1, "delta": 0, "gamma": 1}]}"#)
            .unwrap();
        assert_eq!(cfg.controller_kinds().unwrap(), vec![ControllerKind::GloBa]);
        assert_eq!(cfg.sim.to_config(), SimConfig::default());
        assert_eq!(cfg.initial_states(0).unwrap(), vec![PolarState::new(1.0, 0.0, 1.0)]);
    }

    #[test]
    fn cartesian_and_named_gains_are_accepted() {
        let cfg = ExperimentConfig::parse(
            r#"{"controllers": ["bolsa", "bagal"], "gains": {"k1": 1, "k2": 1, "k3": 2, "k4": 1},
                "initial_conditions": [{"x": -1, "y": 0, "theta": 0}]}"#,
        )
        .unwrap();
        let p = cfg.initial_states(0).unwrap()[0];
        assert!((p.rho - 1.0).abs() < 1e-15 && p.delta.abs() < 1e-15 && p.gamma.abs() < 1e-15);
    }

    #[test]
    fn gain_condition_is_enforced_unless_disabled() {
        let text = r#"{"controller": "bolsa", "gains": [1, 1, 0.1, 1]}"#;
        assert!(ExperimentConfig::parse(text).is_err());
        let relaxed = r#"{"controller": "bolsa", "gains": [1, 1, 0.1, 1], "enforce_gain_condition": false}"#;
        assert!(ExperimentConfig::parse(relaxed).is_ok());
    }

    #[test]
    fn bad_configs_are_rejected() {
        for text in [
            r#"{"initial_conditions": []}"#,
            r#"{"controller": "nope"}"#,
            r#"{"controller": "globa", "gains": [1, -1, 1, 1]}"#,
            r#"{"controller": "globa", "sim": {"dt": 0}}"#,
            r#"{"controller": "globa", "typo": 1}"#,
            r#"{"controller": "globa", "initial_conditions": [{"x": 0, "y": 0, "theta": 0}]}"#,
        ] {
            let parsed = ExperimentConfig::parse(text).and_then(|c| c.initial_states(0).map(|_| c));
            assert!(parsed.is_err(), "{text}");
        }
    }

    #[test]
    fn random_initial_conditions_follow_the_seed() {
        let cfg = ExperimentConfig::parse(r#"{"controller": "globa", "random_initial_conditions": {"count": 5}}"#).unwrap();
        let a = cfg.initial_states(3).unwrap();
        assert_eq!(a.len(), 5);
        assert_eq!(a, cfg.initial_states(3).unwrap());
        assert_ne!(a, cfg.initial_states(4).unwrap());
        assert!(a.iter().all(|p| (0.5..5.0).contains(&p.rho) && p.delta.abs() < 3.0));
    }
}
