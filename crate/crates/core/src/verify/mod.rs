//! Numerical certification of the inequalities behind the controllers.
//!
//! Each check evaluates a signed margin on a finite, documented set of points
//! and returns a [`CertReport`]. Grids are deterministic and random samples
//! are drawn from seeded ChaCha streams, so reports are reproducible. Point
//! sets are scanned in parallel.

mod report;
pub mod sampling;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controllers::{ControllerKind, ControllerSpec, Gains, Shaping, SteeringLaw};
use crate::error::{Error, Result};
use crate::geometry::{PolarState, StateSpace};
use crate::lyapunov::{CompositeLyapunovFn, Compositor, LyapunovFn, LyapunovKind, Order};
use crate::sim::{simulate, SimConfig, Trajectory};

pub use report::{CertReport, Relation};
use report::Tracker;
use sampling::{random_gains, sample_states, AngularGrid, BARRIER_MARGIN};

/// Slack for inequalities that are claimed to hold exactly.
pub const INEQUALITY_SLACK: f64 = 1e-12;
/// Relative tolerance for two evaluations of the same closed form.
pub const EQUALITY_TOL: f64 = 1e-10;
/// Slack for the BoLSA decrease bound.
pub const BOLSA_BOUND_SLACK: f64 = 1e-9;
/// Central-difference step for gradient checks.
pub const FD_STEP: f64 = 1e-6;
/// Relative tolerance of analytic against finite-difference gradients.
pub const GRADIENT_TOL: f64 = 1e-5;
/// Relaxed gradient tolerance within [`NEAR_BARRIER`] of a barrier.
pub const GRADIENT_TOL_NEAR_BARRIER: f64 = 1e-4;
pub const NEAR_BARRIER: f64 = 0.05;

/// Gains used by the battery for every controller (they satisfy `k1 k3 >= k2^2`).
pub const SUITE_GAINS: [f64; 4] = [1.0, 1.0, 1.0, 1.0];

fn scan<F>(n: usize, relation: Relation, tolerance: f64, f: F) -> Tracker
where
    F: Fn(usize, &mut Tracker) + Sync,
{
    (0..n)
        .into_par_iter()
        .fold(
            || Tracker::new(relation, tolerance),
            |mut t, i| {
                f(i, &mut t);
                t
            },
        )
        .reduce(|| Tracker::new(relation, tolerance), Tracker::merge)
}

fn is_origin(p: &PolarState<f64>) -> bool {
    p.rho == 0.0 && p.delta == 0.0 && p.gamma == 0.0
}

fn ensure_grid_inside(space: StateSpace, grid: &AngularGrid) -> Result<()> {
    for i in 0..grid.len() {
        let (d, g) = grid.point(i);
        if !space.contains_angles(d, g) {
            return Err(Error::BarrierBlowUp(d, g, space));
        }
    }
    Ok(())
}

fn gains_rows(gains: &[Gains<f64>]) -> Vec<[f64; 4]> {
    gains.iter().map(|g| g.to_array()).collect()
}

fn kind_label(kind: LyapunovKind) -> &'static str {
    kind.controller_kind().name()
}

/// Both sides of `1 - k cos(g)(1 + cos(g)) <= 2 (1 + k) tan^2(g/2)`.
pub fn lemma1_sides(k: f64, gamma: f64) -> (f64, f64) {
    let cg = gamma.cos();
    let t = (gamma / 2.0).tan();
    (1.0 - k * cg * (1.0 + cg), 2.0 * (1.0 + k) * t * t)
}

/// `n` points evenly spread over `(-pi + 1e-3, pi - 1e-3)`.
pub fn lemma1_gamma_grid(n: usize) -> Vec<f64> {
    sampling::linspace(-PI + 1e-3, PI - 1e-3, n)
}

/// Certifies the `tan^2(gamma/2)` bound on `k_grid x gamma_grid`.
pub fn check_lemma1(k_grid: &[f64], gamma_grid: &[f64]) -> Result<CertReport> {
    if let Some(k) = k_grid.iter().find(|k| !(**k >= 1.0 && k.is_finite())) {
        return Err(Error::Hypothesis(format!("lemma requires k >= 1, got k = {k}")));
    }
    if let Some(g) = gamma_grid.iter().find(|g| !(g.abs() < PI)) {
        return Err(Error::Hypothesis(format!("lemma requires |gamma| < pi, got gamma = {g}")));
    }
    let ng = gamma_grid.len();
    let t = scan(k_grid.len() * ng, Relation::Le, INEQUALITY_SLACK, |i, t| {
        let (k, g) = (k_grid[i / ng], gamma_grid[i % ng]);
        let (lhs, rhs) = lemma1_sides(k, g);
        t.observe(i, lhs - rhs, &[k, g]);
    });
    let grid = format!("k in {k_grid:?} ; gamma {} points in [{:.6}, {:.6}]", ng, gamma_grid[0], gamma_grid[ng - 1]);
    let mut r = t.finish("lemma1_tan_bound", grid, &["k", "gamma"]);
    r.note = "margin = LHS - RHS".into();
    Ok(r)
}

/// Positive definiteness of `V_dg` off the origin: margin `-V < 0`.
pub fn check_positive_definite(kind: LyapunovKind, gains: &[Gains<f64>], grid: &AngularGrid) -> Result<CertReport> {
    let space = LyapunovFn::new(kind, Gains::new(1.0, 1.0, 1.0, 1.0)?).space();
    ensure_grid_inside(space, grid)?;
    let n = grid.len();
    let t = scan(gains.len() * n, Relation::Lt, 0.0, |i, t| {
        let (d, g) = grid.point(i % n);
        if d == 0.0 && g == 0.0 {
            return;
        }
        let f = LyapunovFn::new(kind, gains[i / n]);
        let v = f.value(d, g).unwrap_or(f64::NAN);
        t.observe(i, -v, &[(i / n) as f64, d, g]);
    });
    let mut r = t.finish(&format!("positive_definite/{}", kind_label(kind)), grid.describe(), &["gain_set", "delta", "gamma"]);
    r.gains = gains_rows(gains);
    r.note = "margin = -V_dg".into();
    Ok(r)
}

/// Strict decrease of `V_dg` along its own closed loop: margin `V_dot < 0`
/// at every non-origin grid point, for every gain set.
pub fn check_decrease(kind: LyapunovKind, gains: &[Gains<f64>], grid: &AngularGrid) -> Result<CertReport> {
    let space = LyapunovFn::new(kind, Gains::new(1.0, 1.0, 1.0, 1.0)?).space();
    ensure_grid_inside(space, grid)?;
    let n = grid.len();
    let t = scan(gains.len() * n, Relation::Lt, 0.0, |i, t| {
        let (d, g) = grid.point(i % n);
        if d == 0.0 && g == 0.0 {
            return;
        }
        let f = LyapunovFn::new(kind, gains[i / n]);
        let v_dot = f.v_dot_analytic(d, g).unwrap_or(f64::NAN);
        t.observe(i, v_dot, &[(i / n) as f64, d, g]);
    });
    let mut r = t.finish(&format!("strict_decrease/{}", kind_label(kind)), grid.describe(), &["gain_set", "delta", "gamma"]);
    r.gains = gains_rows(gains);
    r.note = "margin = dV_dg/dt along the paired closed loop".into();
    Ok(r)
}

/// Closed-form backstepping derivative against the chain rule with the
/// analytic gradient and the steering law. Margin is
/// `|closed - chain| / max(1, |chain|)`.
pub fn check_backstepping_equality(shaping: Shaping, gains: &[Gains<f64>], grid: &AngularGrid) -> Result<CertReport> {
    let kind = LyapunovKind::Backstepping(shaping);
    let space = shaping.controller_kind().state_space();
    ensure_grid_inside(space, grid)?;
    let n = grid.len();
    let t = scan(gains.len() * n, Relation::Le, EQUALITY_TOL, |i, t| {
        let (d, g) = grid.point(i % n);
        let f = LyapunovFn::new(kind, gains[i / n]);
        let law = f.controller();
        let margin = match (f.v_dot_analytic(d, g), f.v_dot_along(&law, d, g)) {
            (Ok(closed), Ok(chain)) => (closed - chain).abs() / chain.abs().max(1.0),
            _ => f64::NAN,
        };
        t.observe(i, margin, &[(i / n) as f64, d, g]);
    });
    let mut r = t.finish(
        &format!("closed_form_derivative/{}", kind_label(kind)),
        grid.describe(),
        &["gain_set", "delta", "gamma"],
    );
    r.gains = gains_rows(gains);
    r.note = "margin = |closed form - chain rule| / max(1, |chain rule|)".into();
    Ok(r)
}

/// Reports for the two readings of the BoLSA bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BolsaBoundReports {
    /// With `(delta + q tan(gamma/2))^2`.
    pub displayed: CertReport,
    /// With `(delta + 2 q tan(gamma/2))^2`.
    pub two_q: CertReport,
}

/// Exact BoLSA derivative against both bound variants: margin
/// `V_dot - bound <= 1e-9`.
pub fn check_bolsa_bound(gains: &[Gains<f64>], grid: &AngularGrid) -> Result<BolsaBoundReports> {
    ensure_grid_inside(StateSpace::S2, grid)?;
    let n = grid.len();
    let run = |two_q: bool| {
        scan(gains.len() * n, Relation::Le, BOLSA_BOUND_SLACK, |i, t| {
            let (d, g) = grid.point(i % n);
            let f = LyapunovFn::new(LyapunovKind::BoLSA, gains[i / n]);
            let margin = match (f.v_dot_analytic(d, g), f.bolsa_bounds(d, g)) {
                (Ok(v), Ok(b)) => v - if two_q { b.two_q } else { b.displayed },
                _ => f64::NAN,
            };
            t.observe(i, margin, &[(i / n) as f64, d, g]);
        })
    };
    let hypothesis = gains.iter().all(|g| g.satisfies_passivity_condition());
    let labels = ["gain_set", "delta", "gamma"];
    let finish = |t: Tracker, name: &str, form: &str| {
        let mut r = t.finish(name, grid.describe(), &labels);
        r.gains = gains_rows(gains);
        r.note = format!(
            "margin = V_dot - bound, bound uses {form}; k1 k3 >= k2^2 for every gain set: {hypothesis}"
        );
        r
    };
    Ok(BolsaBoundReports {
        displayed: finish(run(false), "bolsa_bound/displayed", "(delta + q tan(gamma/2))^2"),
        two_q: finish(run(true), "bolsa_bound/two_q", "(delta + 2 q tan(gamma/2))^2"),
    })
}

/// Wraps a steering law and negates its `omega_tilde`. Used to confirm that
/// the checks detect a broken controller.
#[derive(Debug, Clone, Copy)]
pub struct SignFlipped<L>(pub L);

impl<L: SteeringLaw<f64>> SteeringLaw<f64> for SignFlipped<L> {
    fn k1(&self) -> f64 {
        self.0.k1()
    }

    fn omega_tilde(&self, delta: f64, gamma: f64) -> Result<f64> {
        Ok(-self.0.omega_tilde(delta, gamma)?)
    }
}

/// Control Lyapunov inequality with the designed inputs.
///
/// At each sample off the origin evaluates
/// `dV/drho (-rho u cos g) + dV/ddelta (u sin g) + dV/dgamma (u sin g - omega)`
/// with `u = v / rho = k1 cos g` and `omega` the full turn rate of `law`, and
/// requires it to be negative. Samples where `V` overflows are skipped.
pub fn check_clf<L: SteeringLaw<f64> + ?Sized>(
    f: &CompositeLyapunovFn<f64>,
    law: &L,
    samples: &[PolarState<f64>],
) -> CertReport {
    let k1 = law.k1();
    let t = scan(samples.len(), Relation::Lt, 0.0, |i, t| {
        let p = &samples[i];
        if is_origin(p) {
            return;
        }
        let grad = match f.gradient(p) {
            Ok(g) => g,
            Err(Error::NonFinite(_)) => return t.skip(),
            Err(_) => return t.observe(i, f64::INFINITY, &p.to_array()),
        };
        let omega = match law.control(p) {
            Ok(u) => u.omega,
            Err(_) => return t.observe(i, f64::INFINITY, &p.to_array()),
        };
        let (sg, cg) = p.gamma.sin_cos();
        let u = k1 * cg;
        let v_dot = grad[0] * (-p.rho * u * cg) + grad[1] * (u * sg) + grad[2] * (u * sg - omega);
        t.observe(i, v_dot, &p.to_array());
    });
    let mut r = t.finish(
        &format!("clf/{}/{}", kind_label(f.inner.kind), f.compositor.name()),
        format!("{} samples in {}", samples.len(), f.space()),
        &["rho", "delta", "gamma"],
    );
    r.gains = vec![f.inner.gains.to_array()];
    r.note = "margin = dV/dt with v/rho = k1 cos(gamma) and omega from the law; origin excluded".into();
    r
}

/// Compositor conditions on the log grid, then strict decrease of the
/// composite along the paired closed loop at `samples`.
pub fn check_proposition1(comp: &Compositor<f64>, f: &LyapunovFn<f64>, samples: &[PolarState<f64>]) -> CertReport {
    let name = format!("composite/{}/{}", kind_label(f.kind), comp.name());
    let scan_result = comp.scan_conditions();
    if let Some(condition) = scan_result.failed {
        let mut t = Tracker::new(Relation::Lt, 0.0);
        let (r_, s_) = scan_result.witness;
        t.observe(0, -scan_result.worst_margin, &[r_, s_]);
        let mut r = t.finish(&name, "r, s in {0} u 10^[-4, 4] step 1/4, rays to 1e4".into(), &["r", "s"]);
        r.gains = vec![f.gains.to_array()];
        r.note = format!("compositor condition ({condition}) fails; margin = -(condition margin)");
        return r;
    }
    let composite = CompositeLyapunovFn { compositor: comp.clone(), inner: *f };
    let t = scan(samples.len(), Relation::Lt, 0.0, |i, t| {
        let p = &samples[i];
        if is_origin(p) {
            return;
        }
        match composite.v_dot(p) {
            Ok(v) => t.observe(i, v, &p.to_array()),
            Err(Error::NonFinite(_)) => t.skip(),
            Err(_) => t.observe(i, f64::INFINITY, &p.to_array()),
        }
    });
    let mut r = t.finish(&name, format!("{} samples in {}", samples.len(), f.space()), &["rho", "delta", "gamma"]);
    r.gains = vec![f.gains.to_array()];
    r.note = format!(
        "conditions (1)-(3) hold on the log grid (smallest margin {:.3e}); margin = composite dV/dt",
        scan_result.worst_margin
    );
    r
}

/// Thresholds for [`check_kl_decay`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayOptions {
    /// The final metric must be below this.
    pub metric_threshold: f64,
    /// Largest tolerated increase between consecutive recorded `V` values.
    pub v_increase_tol: f64,
}

impl Default for DecayOptions {
    fn default() -> Self {
        Self { metric_threshold: 1e-3, v_increase_tol: 1e-8 }
    }
}

/// Trajectory-level surrogate for the KL estimate: the metric of `space`
/// ends below the threshold and the recorded `V` never increases by more
/// than the tolerance. Margin is
/// `max(final metric - threshold, largest V increase - tolerance) < 0`.
pub fn check_kl_decay(traj: &Trajectory<f64>, space: StateSpace, opts: DecayOptions) -> Result<CertReport> {
    for (t, p) in traj.times.iter().zip(&traj.states) {
        if !(p.rho >= 0.0) || !space.contains_angles(p.delta, p.gamma) {
            return Err(Error::LeftStateSpace { space, t: *t });
        }
    }
    let last = traj.final_state();
    let metric_end = space.metric(&last)?;
    let mut margin = metric_end - opts.metric_threshold;
    let increase = traj.max_lyapunov_increase();
    if let Some(inc) = increase {
        margin = margin.max(inc - opts.v_increase_tol);
    }
    let mut t = Tracker::new(Relation::Lt, 0.0);
    t.observe(0, margin, &[traj.final_time(), last.rho, last.delta, last.gamma]);
    let x0 = traj.states[0];
    let mut r = t.finish(
        &format!("kl_decay/{space}"),
        format!(
            "trajectory from ({:.6}, {:.6}, {:.6}) to t = {}, {} samples",
            x0.rho,
            x0.delta,
            x0.gamma,
            traj.final_time(),
            traj.len()
        ),
        &["t", "rho", "delta", "gamma"],
    );
    r.samples = traj.len();
    r.note = match increase {
        Some(inc) => format!(
            "final metric {metric_end:.3e} (threshold {:.0e}); largest V increase {inc:.3e} (tolerance {:.0e})",
            opts.metric_threshold, opts.v_increase_tol
        ),
        None => format!("final metric {metric_end:.3e} (threshold {:.0e}); no V attached", opts.metric_threshold),
    };
    Ok(r)
}

/// Central difference with base step `h`, Richardson-extrapolated from the
/// steps `h` and `h / 2`.
fn derivative<F: Fn(f64) -> Result<f64>>(f: F, x: f64, h: f64) -> Result<f64> {
    let central = |s: f64| -> Result<f64> { Ok((f(x + s)? - f(x - s)?) / (2.0 * s)) };
    let (coarse, fine) = (central(h)?, central(h / 2.0)?);
    Ok((4.0 * fine - coarse) / 3.0)
}

fn fd_error(analytic: &[f64], fd: &[f64]) -> f64 {
    let scale = analytic.iter().fold(1.0f64, |m, g| m.max(g.abs()));
    analytic.iter().zip(fd).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale
}

/// Analytic `[dV/ddelta, dV/dgamma]` against extrapolated central
/// differences with base step [`FD_STEP`]. Margin is `max_i |g_i - fd_i| / max(1, max_i |g_i|)`.
pub fn check_gradient(f: &LyapunovFn<f64>, points: &[(f64, f64)], tolerance: f64) -> CertReport {
    let h = FD_STEP;
    let t = scan(points.len(), Relation::Le, tolerance, |i, t| {
        let (d, g) = points[i];
        let eval = || -> Result<f64> {
            let a = f.gradient(d, g)?;
            let fd = [derivative(|x| f.value(x, g), d, h)?, derivative(|x| f.value(d, x), g, h)?];
            Ok(fd_error(&a, &fd))
        };
        t.observe(i, eval().unwrap_or(f64::NAN), &[d, g]);
    });
    let mut r = t.finish(
        &format!("gradient/{}", kind_label(f.kind)),
        format!("{} points in {}", points.len(), f.space()),
        &["delta", "gamma"],
    );
    r.gains = vec![f.gains.to_array()];
    r.note = format!("extrapolated central differences, base step {h:.0e}; margin = max abs error / max(1, |gradient|)");
    r
}

/// Gradient check for a composite in `(rho, delta, gamma)`; points where the
/// value overflows are skipped.
pub fn check_gradient_composite(f: &CompositeLyapunovFn<f64>, points: &[PolarState<f64>], tolerance: f64) -> CertReport {
    let h = FD_STEP;
    let t = scan(points.len(), Relation::Le, tolerance, |i, t| {
        let p = points[i];
        let eval = || -> Result<f64> {
            let a = f.gradient(&p)?;
            let mut fd = [0.0; 3];
            for (k, slot) in fd.iter_mut().enumerate() {
                let at = |x: f64| {
                    let mut a = p.to_array();
                    a[k] = x;
                    f.value(&PolarState::from_array(a))
                };
                *slot = derivative(at, p.to_array()[k], h)?;
            }
            Ok(fd_error(&a, &fd))
        };
        match eval() {
            Ok(e) => t.observe(i, e, &p.to_array()),
            Err(Error::NonFinite(_)) => t.skip(),
            Err(_) => t.observe(i, f64::INFINITY, &p.to_array()),
        }
    });
    let mut r = t.finish(
        &format!("gradient/{}/{}", kind_label(f.inner.kind), f.compositor.name()),
        format!("{} points in {}", points.len(), f.space()),
        &["rho", "delta", "gamma"],
    );
    r.gains = vec![f.inner.gains.to_array()];
    r.note = format!("extrapolated central differences, base step {h:.0e}; margin = max abs error / max(1, |gradient|)");
    r
}

/// Named groups of checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    All,
    Lemma1,
    Clf,
    Prop1,
    Kl,
    Gradient,
}

impl Suite {
    pub const NAMES: [&'static str; 6] = ["all", "lemma1", "clf", "prop1", "kl", "gradient"];
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "all" => Ok(Suite::All),
            "lemma1" => Ok(Suite::Lemma1),
            "clf" => Ok(Suite::Clf),
            "prop1" => Ok(Suite::Prop1),
            "kl" => Ok(Suite::Kl),
            "gradient" => Ok(Suite::Gradient),
            other => Err(Error::InvalidConfig(format!(
                "unknown suite {other:?}, expected one of {}",
                Suite::NAMES.join(", ")
            ))),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let i = [Suite::All, Suite::Lemma1, Suite::Clf, Suite::Prop1, Suite::Kl, Suite::Gradient]
            .iter()
            .position(|s| s == self)
            .expect("listed");
        f.write_str(Suite::NAMES[i])
    }
}

/// Sizes used by [`run_suite`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteOptions {
    pub seed: u64,
    pub lemma1_points: usize,
    /// Side of the square `(delta, gamma)` grids.
    pub grid_side: usize,
    pub gain_sets: usize,
    pub clf_samples: usize,
    pub gradient_samples: usize,
}

impl SuiteOptions {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, lemma1_points: 10_000, grid_side: 100, gain_sets: 20, clf_samples: 10_000, gradient_samples: 1_000 }
    }
}

/// Initial states of the decay runs, one per controller.
pub fn kl_initial_state(kind: ControllerKind) -> PolarState<f64> {
    match kind {
        ControllerKind::GloBa => PolarState::new(5.0, 3.0, 2.0),
        ControllerKind::BarFli => PolarState::new(3.0, 3.0, 1.0),
        ControllerKind::BoLSA => PolarState::new(3.0, 1.0, 2.5),
        ControllerKind::BAgAl => PolarState::new(3.0, 2.5, 2.5),
    }
}

fn suite_functions() -> Result<Vec<LyapunovFn<f64>>> {
    let gains = Gains::from_array(SUITE_GAINS)?;
    ControllerKind::ALL
        .iter()
        .map(|&k| Ok(LyapunovFn::for_controller(&ControllerSpec::new(k, gains)?)))
        .collect()
}

fn seeded(mut r: CertReport, seed: u64) -> CertReport {
    r.seed = Some(seed);
    r
}

/// Runs a group of checks with default grids. Every report carries its seed.
pub fn run_suite(suite: Suite, opts: SuiteOptions) -> Result<Vec<CertReport>> {
    let want = |s: Suite| suite == Suite::All || suite == s;
    let seed = opts.seed;
    let fns = suite_functions()?;
    let mut out = Vec::new();

    if want(Suite::Lemma1) {
        let ks = [1.0, 1.5, 2.0, 5.0, 10.0, 100.0];
        out.push(check_lemma1(&ks, &lemma1_gamma_grid(opts.lemma1_points))?);
    }

    if suite == Suite::All {
        for kind in ControllerKind::ALL {
            let lk = LyapunovKind::for_controller(kind);
            let passivity = kind.requires_passivity_condition();
            let gains = random_gains(opts.gain_sets, passivity, seed ^ kind as u64);
            let grid = AngularGrid::over(kind.state_space(), opts.grid_side, BARRIER_MARGIN);
            out.push(seeded(check_positive_definite(lk, &gains, &grid)?, seed));
            out.push(seeded(check_decrease(lk, &gains, &grid)?, seed));
            if let Some(shaping) = kind.shaping() {
                out.push(seeded(check_backstepping_equality(shaping, &gains, &grid)?, seed));
            }
            if kind == ControllerKind::BoLSA {
                let grid = AngularGrid::over(StateSpace::S2, 2 * opts.grid_side, BARRIER_MARGIN);
                let b = check_bolsa_bound(&gains, &grid)?;
                out.push(seeded(b.displayed, seed));
                out.push(seeded(b.two_q, seed));
            }
        }
    }

    if want(Suite::Clf) || want(Suite::Prop1) || want(Suite::Gradient) {
        for f in &fns {
            let samples = sample_states(f.space(), opts.clf_samples, BARRIER_MARGIN, seed);
            let law = f.controller();
            let grad_points = sample_states(f.space(), opts.gradient_samples, BARRIER_MARGIN, seed.wrapping_add(1));
            if want(Suite::Gradient) {
                let angles: Vec<(f64, f64)> = grad_points.iter().map(|p| (p.delta, p.gamma)).collect();
                out.push(seeded(check_gradient(f, &angles, GRADIENT_TOL), seed));
            }
            for comp in Compositor::builtins() {
                let composite = CompositeLyapunovFn { compositor: comp.clone(), inner: *f };
                if want(Suite::Clf) {
                    out.push(seeded(check_clf(&composite, &law, &samples), seed));
                }
                if want(Suite::Prop1) {
                    out.push(seeded(check_proposition1(&comp, f, &samples), seed));
                }
                if want(Suite::Gradient) {
                    out.push(seeded(check_gradient_composite(&composite, &grad_points, GRADIENT_TOL), seed));
                }
            }
        }
    }

    if want(Suite::Kl) {
        let cfg = SimConfig { capture_radius: 0.0, sample_interval: Some(0.05), ..SimConfig::default() };
        let runs: Vec<Result<CertReport>> = fns
            .par_iter()
            .map(|f| {
                let monitor = CompositeLyapunovFn { compositor: Compositor::sum(Order::RhoFirst), inner: *f };
                let law = f.controller();
                let x0 = kl_initial_state(law.kind);
                let traj = simulate(&law, &x0, &cfg, Some(&monitor))?;
                let mut r = check_kl_decay(&traj, law.state_space(), DecayOptions::default())?;
                r.check = format!("kl_decay/{}", law.kind.name());
                r.gains = vec![law.gains.to_array()];
                Ok(r)
            })
            .collect();
        for r in runs {
            out.push(seeded(r?, seed));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gains(k: [f64; 4]) -> Gains<f64> {
        Gains::from_array(k).unwrap()
    }

    #[test]
    fn lemma1_examples() {
        assert_eq!(lemma1_sides(1.0, 0.0), (-1.0, 0.0));
        let (lhs, rhs) = lemma1_sides(3.0, PI / 2.0);
        assert!((lhs - 1.0).abs() < 1e-15 && (rhs - 8.0).abs() < 1e-12);
        let r = check_lemma1(&[1.0], &lemma1_gamma_grid(10_000)).unwrap();
        assert!(r.pass, "{}", r.summary());
        assert_eq!(r.samples, 10_000);
    }

    #[test]
    fn lemma1_rejects_small_k() {
        assert!(matches!(check_lemma1(&[0.5], &[0.1]), Err(Error::Hypothesis(_))));
        assert!(matches!(check_lemma1(&[1.0], &[PI]), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn decrease_holds_and_detects_grid_outside_space() {
        let grid = AngularGrid::over(StateSpace::S1, 20, BARRIER_MARGIN);
        let r = check_decrease(LyapunovKind::Backstepping(Shaping::TangentBarrier), &[gains([1.0; 4])], &grid).unwrap();
        assert!(r.pass, "{}", r.summary());
        let wide = AngularGrid::over(StateSpace::S, 20, BARRIER_MARGIN);
        assert!(check_decrease(LyapunovKind::BAgAl, &[gains([1.0; 4])], &wide).is_err());
    }

    #[test]
    fn clf_check_passes_and_catches_sign_flip() {
        let f = LyapunovFn::for_controller(&ControllerSpec::new(ControllerKind::GloBa, gains([1.0; 4])).unwrap());
        let composite = CompositeLyapunovFn { compositor: Compositor::sum(Order::RhoFirst), inner: f };
        let mut samples = sample_states(StateSpace::S, 2_000, BARRIER_MARGIN, 1);
        samples.push(PolarState::new(0.0, 0.0, 0.0));
        let law = f.controller();
        let ok = check_clf(&composite, &law, &samples);
        assert!(ok.pass, "{}", ok.summary());
        assert_eq!(ok.samples, 2_000);
        let broken = check_clf(&composite, &SignFlipped(law), &samples);
        assert!(!broken.pass);
        assert!(broken.worst_margin > 0.0);
        assert_eq!(broken.worst_point.len(), 3);
    }

    #[test]
    fn product_compositor_fails_condition_one() {
        let f = LyapunovFn::for_controller(&ControllerSpec::new(ControllerKind::GloBa, gains([1.0; 4])).unwrap());
        let product = Compositor::custom("product", Order::RhoFirst, |r: f64, s: f64| (r * s, s, r));
        let r = check_proposition1(&product, &f, &[]);
        assert!(!r.pass);
        assert!(r.note.contains("(1)"), "{}", r.note);
        let samples = sample_states(StateSpace::S, 500, BARRIER_MARGIN, 2);
        assert!(check_proposition1(&Compositor::exp_product(Order::VdgFirst), &f, &samples).pass);
    }

    #[test]
    fn kl_decay_of_stationary_origin() {
        let law = ControllerSpec::new(ControllerKind::GloBa, gains([1.0; 4])).unwrap();
        let cfg = SimConfig { t_final: 1.0, capture_radius: 0.0, ..SimConfig::default() };
        let traj = simulate(&law, &PolarState::new(0.0, 0.0, 0.0), &cfg, None).unwrap();
        assert!(traj.states.iter().all(|p| StateSpace::S.metric(p).unwrap() == 0.0));
        let r = check_kl_decay(&traj, StateSpace::S, DecayOptions::default()).unwrap();
        assert!(r.pass, "{}", r.summary());
    }

    #[test]
    fn kl_decay_rejects_trajectory_outside_space() {
        let law = ControllerSpec::new(ControllerKind::GloBa, gains([1.0; 4])).unwrap();
        let cfg = SimConfig { t_final: 1.0, ..SimConfig::default() };
        let traj = simulate(&law, &PolarState::new(1.0, 3.5, 0.0), &cfg, None).unwrap();
        assert!(matches!(
            check_kl_decay(&traj, StateSpace::S1, DecayOptions::default()),
            Err(Error::LeftStateSpace { .. })
        ));
    }

    #[test]
    fn gradient_check_near_barrier_uses_relaxed_tolerance() {
        let f = LyapunovFn::new(LyapunovKind::BAgAl, gains([1.0; 4]));
        let r = check_gradient(&f, &[(PI - 0.02, 0.3), (-(PI - 0.02), -1.0)], GRADIENT_TOL_NEAR_BARRIER);
        assert!(r.pass, "{}", r.summary());
    }

    #[test]
    fn sign_flipped_law_negates_steering_only() {
        let law = ControllerSpec::new(ControllerKind::BoLSA, gains([1.0; 4])).unwrap();
        let flipped = SignFlipped(law);
        assert_eq!(flipped.k1(), 1.0);
        assert_eq!(flipped.omega_tilde(1.0, 0.5).unwrap(), -law.omega_tilde(1.0, 0.5).unwrap());
    }

    #[test]
    fn suite_names_parse() {
        for name in Suite::NAMES {
            let s: Suite = name.parse().unwrap();
            assert_eq!(s.to_string(), name);
        }
        assert!("bogus".parse::<Suite>().is_err());
    }
}
