use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use polar_park::verify::{run_suite, SuiteOptions};
use polar_park::{ControllerKind, ControllerSpec, Frame, PolarState, SimConfig, SimStatus, SteeringLaw, Suite, Trajectory};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, GainsRepr, LyapunovSettings};

/// Largest single-sample increase of `V` still reported as monotone.
const V_MONOTONE_TOL: f64 = 1e-8;
/// Sample interval forced on comparisons so runs share their sample times.
const COMPARE_SAMPLE_INTERVAL: f64 = 0.05;

/// Settings shared by every subcommand.
pub struct Settings {
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub frame: Option<Frame>,
}

/// How a command finished, when it did not fail outright.
#[derive(Debug, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// At least one certification check failed.
    VerificationFailed,
    /// No initial condition produced a run that ended in capture or at the horizon.
    NoUsableRun,
}

struct Task {
    spec: ControllerSpec<f64>,
    ic: usize,
    x0: PolarState<f64>,
}

enum RunResult {
    /// The initial state is not admissible for the controller.
    Rejected(String),
    Failed(String),
    Done(Box<Trajectory<f64>>),
}

impl RunResult {
    fn usable(&self) -> bool {
        matches!(self, RunResult::Done(t) if !matches!(t.status, SimStatus::BoundaryStop(_)))
    }
}

fn admissibility(spec: &ControllerSpec<f64>, x0: &PolarState<f64>) -> Option<String> {
    if let Err(e) = spec.control(x0) {
        return Some(e.to_string());
    }
    let space = spec.state_space();
    (!space.contains_angles(x0.delta, x0.gamma)).then(|| format!("initial state outside {space}"))
}

fn run(task: &Task, sim: &SimConfig<f64>, lyap: &LyapunovSettings) -> RunResult {
    if let Some(reason) = admissibility(&task.spec, &task.x0) {
        return RunResult::Rejected(reason);
    }
    let monitor = lyap.monitor(&task.spec);
    match polar_park::simulate(&task.spec, &task.x0, sim, Some(&monitor)) {
        Ok(t) => RunResult::Done(Box::new(t)),
        Err(e) => RunResult::Failed(e.to_string()),
    }
}

fn run_all(tasks: &[Task], sim: &SimConfig<f64>, lyap: &LyapunovSettings) -> Vec<RunResult> {
    tasks.par_iter().map(|t| run(t, sim, lyap)).collect()
}

fn status_name(s: &SimStatus) -> &'static str {
    match s {
        SimStatus::Captured => "captured",
        SimStatus::HorizonReached => "horizon_reached",
        SimStatus::BoundaryStop(_) => "boundary_stop",
    }
}

fn stop_reason(s: &SimStatus) -> Option<String> {
    match s {
        SimStatus::BoundaryStop(r) => Some(r.clone()),
        _ => None,
    }
}

/// Marks errors raised while writing results, as opposed to bad input.
#[derive(Debug)]
pub struct OutputFailure(PathBuf);

impl fmt::Display for OutputFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "writing {}", self.0.display())
    }
}

fn output<T>(path: &Path, f: impl FnOnce() -> Result<T>) -> Result<T> {
    f().map_err(|e| e.context(OutputFailure(path.to_path_buf())))
}

fn prepare_out(dir: &Path) -> Result<()> {
    output(dir, || Ok(fs::create_dir_all(dir)?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    output(path, || {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    })
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    output(path, || {
        let mut w = csv::Writer::from_path(path)?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    })
}

fn write_trajectory(dir: &Path, name: &str, traj: &Trajectory<f64>) -> Result<()> {
    let path = dir.join(name);
    output(&path, || Ok(traj.write_csv(BufWriter::new(File::create(&path)?))?))
}

fn trajectory_file(kind: ControllerKind, ic: usize) -> String {
    format!("{kind}_ic{ic:03}.csv")
}

struct Experiment {
    cfg: ExperimentConfig,
    sim: SimConfig<f64>,
    seed: u64,
}

impl Experiment {
    fn new(cfg: ExperimentConfig, ctx: &Settings) -> Self {
        let mut sim = cfg.sim.to_config();
        if let Some(f) = ctx.frame {
            sim.frame = f;
        }
        let seed = ctx.seed.or(cfg.seed).unwrap_or(0);
        Self { cfg, sim, seed }
    }

    fn tasks(&self, states: &[PolarState<f64>]) -> Result<Vec<Task>> {
        let mut tasks = Vec::new();
        for kind in self.cfg.controller_kinds()? {
            let spec = self.cfg.spec(kind, self.cfg.gains)?;
            tasks.extend(states.iter().enumerate().map(|(ic, &x0)| Task { spec, ic, x0 }));
        }
        Ok(tasks)
    }
}

fn outcome(results: &[RunResult]) -> Outcome {
    if results.iter().any(RunResult::usable) {
        Outcome::Success
    } else {
        Outcome::NoUsableRun
    }
}

#[derive(Serialize)]
struct SimulateSummary<'a> {
    gains: [f64; 4],
    seed: u64,
    sim: &'a SimConfig<f64>,
    runs: Vec<RunRecord>,
}

#[derive(Serialize)]
struct RunRecord {
    controller: ControllerKind,
    ic: usize,
    initial_state: PolarState<f64>,
    #[serde(flatten)]
    result: RunFields,
}

#[derive(Serialize)]
#[serde(untagged)]
enum RunFields {
    Ok {
        status: &'static str,
        #[serde(skip_serializing_if = "Option::is_none")]
        stop_reason: Option<String>,
        capture_time: Option<f64>,
        final_time: f64,
        path_length: f64,
        final_state: PolarState<f64>,
        #[serde(rename = "V_monotone")]
        v_monotone: Option<bool>,
        #[serde(skip_serializing_if = "Option::is_none")]
        trajectory_csv: Option<String>,
    },
    Err {
        error: String,
    },
}

/// One CSV per initial condition and controller, plus `summary.json`.
pub fn simulate(cfg: ExperimentConfig, ctx: &Settings) -> Result<Outcome> {
    let exp = Experiment::new(cfg, ctx);
    let states = exp.cfg.initial_states(exp.seed)?;
    if states.is_empty() {
        bail!("config has no initial conditions");
    }
    let tasks = exp.tasks(&states)?;
    let results = run_all(&tasks, &exp.sim, &exp.cfg.lyapunov);

    prepare_out(&ctx.out)?;
    let write_csv = exp.cfg.write_trajectories.unwrap_or(true);
    let mut runs = Vec::with_capacity(tasks.len());
    for (task, res) in tasks.iter().zip(&results) {
        let result = match res {
            RunResult::Rejected(e) | RunResult::Failed(e) => RunFields::Err { error: e.clone() },
            RunResult::Done(traj) => {
                let file = write_csv.then(|| trajectory_file(task.spec.kind, task.ic));
                if let Some(name) = &file {
                    write_trajectory(&ctx.out, name, traj)?;
                }
                RunFields::Ok {
                    status: status_name(&traj.status),
                    stop_reason: stop_reason(&traj.status),
                    capture_time: traj.capture_time(),
                    final_time: traj.final_time(),
                    path_length: traj.path_length(),
                    final_state: traj.final_state(),
                    v_monotone: traj.lyapunov_monotone(V_MONOTONE_TOL),
                    trajectory_csv: file,
                }
            }
        };
        runs.push(RunRecord { controller: task.spec.kind, ic: task.ic, initial_state: task.x0, result });
    }
    for r in &runs {
        match &r.result {
            RunFields::Ok { status, capture_time, path_length, .. } => println!(
                "{:<7} ic {:>3}  {:<16} capture {:>10}  path {:.4}",
                r.controller.name(),
                r.ic,
                status,
                capture_time.map_or("-".to_string(), |t| format!("{t:.4}")),
                path_length
            ),
            RunFields::Err { error } => println!("{:<7} ic {:>3}  error: {error}", r.controller.name(), r.ic),
        }
    }
    let summary = SimulateSummary { gains: exp.cfg.gains.to_gains()?.to_array(), seed: exp.seed, sim: &exp.sim, runs };
    write_json(&ctx.out.join("summary.json"), &summary)?;
    Ok(outcome(&results))
}

#[derive(Serialize)]
struct MetricsRow {
    ic: usize,
    controller: ControllerKind,
    rho0: f64,
    delta0: f64,
    gamma0: f64,
    in_space: bool,
    status: String,
    capture_time: Option<f64>,
    path_length: Option<f64>,
    max_abs_omega: Option<f64>,
    min_barrier_distance: Option<f64>,
    note: String,
}

impl MetricsRow {
    fn new(task: &Task, res: &RunResult) -> Self {
        let mut row = MetricsRow {
            ic: task.ic,
            controller: task.spec.kind,
            rho0: task.x0.rho,
            delta0: task.x0.delta,
            gamma0: task.x0.gamma,
            in_space: true,
            status: String::new(),
            capture_time: None,
            path_length: None,
            max_abs_omega: None,
            min_barrier_distance: None,
            note: String::new(),
        };
        match res {
            RunResult::Rejected(e) => {
                row.in_space = false;
                row.status = "flagged".into();
                row.note = e.clone();
            }
            RunResult::Failed(e) => {
                row.status = "error".into();
                row.note = e.clone();
            }
            RunResult::Done(t) => {
                row.status = status_name(&t.status).into();
                row.note = stop_reason(&t.status).unwrap_or_default();
                row.capture_time = t.capture_time();
                row.path_length = Some(t.path_length());
                row.max_abs_omega = Some(t.max_abs_omega());
                row.min_barrier_distance = Some(t.min_barrier_distance(task.spec.state_space()));
            }
        }
        row
    }
}

#[derive(Serialize)]
struct SimilarityRow {
    ic: usize,
    controller_a: ControllerKind,
    controller_b: ControllerKind,
    /// Largest planar distance between the two paths at common sample times.
    max_position_gap: f64,
    /// `max_position_gap / rho0`; compared against the similarity tolerance.
    relative_gap: f64,
    compared_samples: usize,
    similar: bool,
}

fn position_gap(a: &Trajectory<f64>, b: &Trajectory<f64>) -> (f64, usize) {
    let mut j = 0;
    let (mut gap, mut n) = (0.0f64, 0);
    for (i, t) in a.times.iter().enumerate() {
        while j < b.times.len() && b.times[j] < *t {
            j += 1;
        }
        if j == b.times.len() {
            break;
        }
        if b.times[j] == *t {
            let (p, q) = (a.cartesian[i], b.cartesian[j]);
            gap = gap.max((p.x - q.x).hypot(p.y - q.y));
            n += 1;
        }
    }
    (gap, n)
}

/// Per-controller metrics for shared initial conditions (`compare.csv`) and
/// pairwise path similarity (`similarity.csv`).
pub fn compare(cfg: ExperimentConfig, ctx: &Settings) -> Result<Outcome> {
    let kinds = cfg.controller_kinds()?;
    if kinds.len() < 2 {
        bail!("compare needs at least two controllers, got {}", kinds.len());
    }
    let mut exp = Experiment::new(cfg, ctx);
    exp.sim.sample_interval.get_or_insert(COMPARE_SAMPLE_INTERVAL);
    let states = exp.cfg.initial_states(exp.seed)?;
    if states.is_empty() {
        bail!("config has no initial conditions");
    }
    let tasks = exp.tasks(&states)?;
    let results = run_all(&tasks, &exp.sim, &exp.cfg.lyapunov);

    prepare_out(&ctx.out)?;
    let mut rows: Vec<MetricsRow> = tasks.iter().zip(&results).map(|(t, r)| MetricsRow::new(t, r)).collect();
    rows.sort_by_key(|r| r.ic);
    write_rows(&ctx.out.join("compare.csv"), &rows)?;

    let n = states.len();
    let mut similarity = Vec::new();
    for ic in 0..n {
        for a in 0..kinds.len() {
            for b in a + 1..kinds.len() {
                if let (RunResult::Done(ta), RunResult::Done(tb)) = (&results[a * n + ic], &results[b * n + ic]) {
                    let (gap, compared) = position_gap(ta, tb);
                    let relative = gap / states[ic].rho;
                    similarity.push(SimilarityRow {
                        ic,
                        controller_a: kinds[a],
                        controller_b: kinds[b],
                        max_position_gap: gap,
                        relative_gap: relative,
                        compared_samples: compared,
                        similar: relative < exp.cfg.similarity_tolerance,
                    });
                }
            }
        }
    }
    write_rows(&ctx.out.join("similarity.csv"), &similarity)?;

    if exp.cfg.write_trajectories.unwrap_or(false) {
        for (task, res) in tasks.iter().zip(&results) {
            if let RunResult::Done(t) = res {
                write_trajectory(&ctx.out, &trajectory_file(task.spec.kind, task.ic), t)?;
            }
        }
    }

    for r in &rows {
        println!(
            "ic {:>3} {:<7} {:<16} capture {:>10}  path {:>10}  {}",
            r.ic,
            r.controller.name(),
            r.status,
            r.capture_time.map_or("-".to_string(), |t| format!("{t:.4}")),
            r.path_length.map_or("-".to_string(), |t| format!("{t:.4}")),
            r.note
        );
    }
    Ok(outcome(&results))
}

#[derive(Serialize)]
struct SweepRow {
    controller: ControllerKind,
    k1: f64,
    k2: f64,
    k3: f64,
    k4: f64,
    rho0: f64,
    delta0: f64,
    gamma0: f64,
    in_space: bool,
    status: String,
    capture_time: Option<f64>,
    final_time: Option<f64>,
    path_length: Option<f64>,
    max_abs_omega: Option<f64>,
    min_barrier_distance: Option<f64>,
    #[serde(rename = "V_monotone")]
    v_monotone: Option<bool>,
    note: String,
}

/// Summary over the tensor grid of initial states and gain sets (`sweep.csv`).
pub fn sweep(cfg: ExperimentConfig, ctx: &Settings) -> Result<Outcome> {
    let exp = Experiment::new(cfg, ctx);
    let Some(grid) = exp.cfg.sweep.clone() else { bail!("sweep needs a \"sweep\" section in the config") };
    let mut states = Vec::new();
    for &rho in &grid.rho {
        for &delta in &grid.delta {
            for &gamma in &grid.gamma {
                states.push(PolarState::new(rho, delta, gamma));
            }
        }
    }
    if states.is_empty() {
        bail!("sweep grid is empty");
    }
    if states.iter().any(|p| !p.is_finite() || p.rho < 0.0) {
        bail!("sweep grid holds a non-finite state or negative rho");
    }
    let gain_sets: Vec<GainsRepr> = if grid.gains.is_empty() { vec![exp.cfg.gains] } else { grid.gains.clone() };
    let mut tasks = Vec::new();
    for kind in exp.cfg.controller_kinds()? {
        for g in &gain_sets {
            let spec = exp.cfg.spec(kind, *g)?;
            tasks.extend(states.iter().enumerate().map(|(ic, &x0)| Task { spec, ic, x0 }));
        }
    }
    let results = run_all(&tasks, &exp.sim, &exp.cfg.lyapunov);

    let rows: Vec<SweepRow> = tasks
        .iter()
        .zip(&results)
        .map(|(task, res)| {
            let m = MetricsRow::new(task, res);
            let (final_time, v_monotone) = match res {
                RunResult::Done(t) => (Some(t.final_time()), t.lyapunov_monotone(V_MONOTONE_TOL)),
                _ => (None, None),
            };
            let g = task.spec.gains;
            SweepRow {
                controller: task.spec.kind,
                k1: g.k1,
                k2: g.k2,
                k3: g.k3,
                k4: g.k4,
                rho0: m.rho0,
                delta0: m.delta0,
                gamma0: m.gamma0,
                in_space: m.in_space,
                status: m.status,
                capture_time: m.capture_time,
                final_time,
                path_length: m.path_length,
                max_abs_omega: m.max_abs_omega,
                min_barrier_distance: m.min_barrier_distance,
                v_monotone,
                note: m.note,
            }
        })
        .collect();
    prepare_out(&ctx.out)?;
    write_rows(&ctx.out.join("sweep.csv"), &rows)?;
    let captured = rows.iter().filter(|r| r.status == "captured").count();
    println!("sweep: {} runs, {captured} captured, written to {}", rows.len(), ctx.out.join("sweep.csv").display());
    Ok(outcome(&results))
}

fn file_stem(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

/// Runs a certification suite, writes one JSON report per check plus a
/// bundle, and prints a pass/fail table.
pub fn verify(suite: Suite, ctx: &Settings) -> Result<Outcome> {
    let seed = ctx.seed.unwrap_or(0);
    let reports = run_suite(suite, SuiteOptions::with_seed(seed))?;
    let dir = ctx.out.join("reports");
    prepare_out(&dir)?;
    for (i, r) in reports.iter().enumerate() {
        write_json(&dir.join(format!("{i:03}_{}.json", file_stem(&r.check))), r)?;
    }
    write_json(&ctx.out.join(format!("verify_{suite}.json")), &reports)?;
    for r in &reports {
        println!("{}", r.summary());
    }
    let failed = reports.iter().filter(|r| !r.pass).count();
    println!("{} checks, {} passed, {failed} failed", reports.len(), reports.len() - failed);
    Ok(if failed == 0 { Outcome::Success } else { Outcome::VerificationFailed })
}
