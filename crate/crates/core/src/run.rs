//! Method dispatch and the simulation studies behind the command-line tool.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::circuit::{rectifier_netlist, Circuit, MnaOptions};
use crate::error::{Error, Result};
use crate::linalg::RMat;
use crate::lti::matio::DeviceBundle;
use crate::lti::transfer_eval_count;
use crate::steppers::{
    relative_sup_distance, solve_coupled_bdf, solve_coupled_rk, solve_reduced_bdf, solve_reduced_rk, ConvMode,
    NonlinearSubsystem, Trajectory,
};
use crate::weights::{
    bdf_weights, choose_contour, rk_weights, BdfScheme, ButcherTableau, CQWeightTable, ContourMode, WeightKind,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Euler,
    Bdf1,
    Bdf2,
    Radau1,
    Radau2,
    Radau3,
}

impl Method {
    pub const ALL: [Method; 6] =
        [Method::Euler, Method::Bdf1, Method::Bdf2, Method::Radau1, Method::Radau2, Method::Radau3];

    pub fn weight_kind(&self) -> WeightKind {
        match self {
            Method::Euler | Method::Bdf1 => WeightKind::Bdf { m: 1 },
            Method::Bdf2 => WeightKind::Bdf { m: 2 },
            Method::Radau1 => WeightKind::Rk { s: 1 },
            Method::Radau2 => WeightKind::Rk { s: 2 },
            Method::Radau3 => WeightKind::Rk { s: 3 },
        }
    }

    /// Classical order of the time stepper.
    pub fn order(&self) -> usize {
        match self.weight_kind() {
            WeightKind::Bdf { m } => m,
            WeightKind::Rk { s } => 2 * s - 1,
        }
    }

    fn scheme(&self) -> Result<Scheme> {
        Ok(match self.weight_kind() {
            WeightKind::Bdf { m } => Scheme::Bdf(BdfScheme::by_steps(m)?),
            WeightKind::Rk { s } => Scheme::Rk(ButcherTableau::radau_iia(s)?),
        })
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "euler" => Method::Euler,
            "bdf1" => Method::Bdf1,
            "bdf2" => Method::Bdf2,
            "radau1" => Method::Radau1,
            "radau2" => Method::Radau2,
            "radau3" => Method::Radau3,
            other => return Err(Error::Config(format!("unknown method '{other}'"))),
        })
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Method::Euler => "euler",
            Method::Bdf1 => "bdf1",
            Method::Bdf2 => "bdf2",
            Method::Radau1 => "radau1",
            Method::Radau2 => "radau2",
            Method::Radau3 => "radau3",
        };
        f.write_str(s)
    }
}

enum Scheme {
    Bdf(BdfScheme),
    Rk(ButcherTableau),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Solver {
    Coupled,
    Reduced,
}

impl FromStr for Solver {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coupled" => Ok(Solver::Coupled),
            "reduced" => Ok(Solver::Reduced),
            other => Err(Error::Config(format!("unknown solver '{other}'"))),
        }
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Solver::Coupled => "coupled",
            Solver::Reduced => "reduced",
        })
    }
}

/// Time grid and discretization choices of one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSpec {
    pub method: Method,
    pub solver: Solver,
    pub tau: f64,
    pub steps: usize,
    pub contour: ContourMode,
    pub eps: f64,
    pub conv: ConvMode,
}

impl RunSpec {
    pub fn new(method: Method, solver: Solver, horizon: f64, steps: usize) -> Result<Self> {
        let tau = step_size(horizon, steps)?;
        Ok(RunSpec {
            method,
            solver,
            tau,
            steps,
            contour: ContourMode::Experiment,
            eps: crate::weights::DEFAULT_EPS,
            conv: ConvMode::Fft,
        })
    }

    pub fn with_solver(mut self, solver: Solver) -> Self {
        self.solver = solver;
        self
    }

    pub fn with_contour(mut self, contour: ContourMode) -> Self {
        self.contour = contour;
        self
    }

    pub fn with_conv(mut self, conv: ConvMode) -> Self {
        self.conv = conv;
        self
    }

    pub fn horizon(&self) -> f64 {
        self.tau * self.steps as f64
    }
}

/// `τ = T/N`.
pub fn step_size(horizon: f64, steps: usize) -> Result<f64> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::Config(format!("horizon {horizon} must be positive")));
    }
    if steps == 0 {
        return Err(Error::Config("number of steps must be at least 1".into()));
    }
    Ok(horizon / steps as f64)
}

/// `N = T/τ`, which must be an integer up to rounding.
pub fn steps_for(horizon: f64, tau: f64) -> Result<usize> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::Config(format!("step size {tau} must be positive")));
    }
    let n = (horizon / tau).round();
    if n < 1.0 || (n * tau - horizon).abs() > 1e-9 * horizon {
        return Err(Error::Config(format!("horizon {horizon} is not a multiple of tau = {tau}")));
    }
    Ok(n as usize)
}

/// Offline stage: CQ weights of the device for the given integrator.
pub fn compute_weights(device: &DeviceBundle, spec: &RunSpec) -> Result<CQWeightTable> {
    let params = choose_contour(spec.steps, spec.tau, spec.eps, spec.contour)?;
    match spec.method.scheme()? {
        Scheme::Bdf(s) => bdf_weights(device, &s, &params),
        Scheme::Rk(t) => rk_weights(device, &t, &params),
    }
}

/// Zero weights for circuits without a device.
fn empty_weights(spec: &RunSpec) -> Result<CQWeightTable> {
    let kind = spec.method.weight_kind();
    CQWeightTable::new(kind, 0, 0, spec.tau, 0.0, 0, vec![RMat::zeros(0, 0); spec.steps], 0.0)
}

/// Weights for a circuit (empty when it has no device).
pub fn circuit_weights(circuit: &Circuit, spec: &RunSpec) -> Result<CQWeightTable> {
    match &circuit.device {
        Some(d) => compute_weights(d, spec),
        None => empty_weights(spec),
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trajectory: Trajectory,
    /// Seconds spent on weights (0 if they were supplied).
    pub offline_secs: f64,
    /// Seconds spent time stepping.
    pub online_secs: f64,
    /// Transfer-function evaluations during time stepping.
    pub online_transfer_evals: u64,
}

/// Runs one simulation. The reduced solver uses `weights` if given and
/// otherwise computes them first.
pub fn simulate(circuit: &Circuit, spec: &RunSpec, weights: Option<&CQWeightTable>) -> Result<RunOutcome> {
    simulate_model(&circuit.model, circuit.device.as_ref(), spec, weights)
}

pub fn simulate_model<N: NonlinearSubsystem + ?Sized>(
    nl: &N,
    device: Option<&DeviceBundle>,
    spec: &RunSpec,
    weights: Option<&CQWeightTable>,
) -> Result<RunOutcome> {
    let scheme = spec.method.scheme()?;
    let solver = if device.is_none() { Solver::Reduced } else { spec.solver };
    match solver {
        Solver::Coupled => {
            if weights.is_some() {
                return Err(Error::Config("the coupled solver does not use a weight table".into()));
            }
            let lin = device.expect("coupled solver needs a device").to_port_descriptor()?;
            let t0 = Instant::now();
            let traj = match &scheme {
                Scheme::Bdf(s) => solve_coupled_bdf(nl, &lin, s, spec.tau, spec.steps)?,
                Scheme::Rk(t) => solve_coupled_rk(nl, &lin, t, spec.tau, spec.steps)?,
            };
            Ok(RunOutcome {
                trajectory: traj,
                offline_secs: 0.0,
                online_secs: t0.elapsed().as_secs_f64(),
                online_transfer_evals: 0,
            })
        }
        Solver::Reduced => {
            let t0 = Instant::now();
            let owned;
            let table = match weights {
                Some(w) => w,
                None => {
                    owned = match device {
                        Some(d) => compute_weights(d, spec)?,
                        None => empty_weights(spec)?,
                    };
                    &owned
                }
            };
            let offline_secs = if weights.is_some() { 0.0 } else { t0.elapsed().as_secs_f64() };
            let evals = transfer_eval_count();
            let t1 = Instant::now();
            let traj = match &scheme {
                Scheme::Bdf(s) => solve_reduced_bdf(nl, table, s, spec.tau, spec.steps, spec.conv)?,
                Scheme::Rk(t) => solve_reduced_rk(nl, table, t, spec.tau, spec.steps, spec.conv)?,
            };
            let online_secs = t1.elapsed().as_secs_f64();
            Ok(RunOutcome {
                trajectory: traj,
                offline_secs,
                online_secs,
                online_transfer_evals: transfer_eval_count() - evals,
            })
        }
    }
}

/// Differences between two trajectories on the same grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareReport {
    /// `max_n |a_n − b_n| / max_n |b_n|`.
    pub rel_sup: f64,
    /// `max_n |a_n − b_n|`.
    pub abs_sup: f64,
    /// Step where `abs_sup` is attained.
    pub worst_step: usize,
}

pub fn compare(a: &Trajectory, b: &Trajectory) -> Result<CompareReport> {
    let rel_sup = relative_sup_distance(a, b)?;
    let (worst_step, abs_sup) = step_errors(a, b)
        .into_iter()
        .enumerate()
        .fold((0, 0.0), |acc, (n, e)| if e > acc.1 { (n, e) } else { acc });
    Ok(CompareReport { rel_sup, abs_sup, worst_step })
}

/// Euclidean distance per step.
pub fn step_errors(a: &Trajectory, b: &Trajectory) -> Vec<f64> {
    a.y.iter().zip(&b.y).map(|(x, y)| (x - y).norm()).collect()
}

/// CSV `t,err` of per-step distances.
pub fn compare_csv(a: &Trajectory, b: &Trajectory) -> String {
    let mut out = String::from("t,err\n");
    for (n, e) in step_errors(a, b).into_iter().enumerate() {
        out.push_str(&format!("{:.16e},{e:.16e}\n", n as f64 * a.tau));
    }
    out
}

/// Least-squares slope of `log err` against `log τ`, using only errors
/// above `floor`. `None` with fewer than two usable points.
pub fn fitted_slope(taus: &[f64], errs: &[f64], floor: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        taus.iter().zip(errs).filter(|(_, &e)| e > floor && e.is_finite()).map(|(t, e)| (t.ln(), e.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// Round-off floor below which errors are ignored by slope fits.
pub const SLOPE_FLOOR: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub tau: f64,
    pub steps: usize,
    pub err_sup: f64,
    pub err_final: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceResult {
    pub method: Method,
    pub tau_ref: f64,
    pub rows: Vec<ConvergenceRow>,
    pub slope_sup: Option<f64>,
    pub slope_final: Option<f64>,
}

impl ConvergenceResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tau,steps,err_sup,err_final\n");
        for r in &self.rows {
            out.push_str(&format!("{:.16e},{},{:.16e},{:.16e}\n", r.tau, r.steps, r.err_sup, r.err_final));
        }
        out
    }
}

/// Self-convergence study: errors against a run with `τ_ref = τ_min/8`.
/// Each step count must divide the reference count. Members run
/// concurrently.
pub fn convergence_study(circuit: &Circuit, base: &RunSpec, steps_list: &[usize]) -> Result<ConvergenceResult> {
    let horizon = base.horizon();
    let n_max = *steps_list.iter().max().ok_or_else(|| Error::Config("empty step list".into()))?;
    let n_ref = 8 * n_max;
    if let Some(n) = steps_list.iter().find(|&&n| n == 0 || n_ref % n != 0) {
        return Err(Error::Config(format!("{n} steps do not divide the reference count {n_ref}")));
    }
    let spec_for = |n: usize| -> Result<RunSpec> { Ok(RunSpec { tau: step_size(horizon, n)?, steps: n, ..*base }) };
    let mut all: Vec<usize> = steps_list.to_vec();
    all.push(n_ref);
    let runs: Vec<Result<Trajectory>> = std::thread::scope(|scope| {
        let handles: Vec<_> = all
            .iter()
            .map(|&n| scope.spawn(move || simulate(circuit, &spec_for(n)?, None).map(|o| o.trajectory)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("convergence member panicked")).collect()
    });
    let mut runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let reference = runs.pop().expect("reference run");
    let mut rows = Vec::new();
    for (traj, &n) in runs.iter().zip(steps_list) {
        let stride = n_ref / n;
        let errs: Vec<f64> = (0..=n).map(|k| (&traj.y[k] - &reference.y[k * stride]).norm()).collect();
        rows.push(ConvergenceRow {
            tau: traj.tau,
            steps: n,
            err_sup: errs.iter().copied().fold(0.0, f64::max),
            err_final: errs[n],
        });
    }
    let taus: Vec<f64> = rows.iter().map(|r| r.tau).collect();
    let sup: Vec<f64> = rows.iter().map(|r| r.err_sup).collect();
    let fin: Vec<f64> = rows.iter().map(|r| r.err_final).collect();
    Ok(ConvergenceResult {
        method: base.method,
        tau_ref: reference.tau,
        slope_sup: fitted_slope(&taus, &sup, SLOPE_FLOOR),
        slope_final: fitted_slope(&taus, &fin, SLOPE_FLOOR),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchRow {
    pub n_states: usize,
    pub steps: usize,
    pub offline_secs: f64,
    pub reduced_online_secs: f64,
    pub coupled_secs: f64,
    pub online_transfer_evals: u64,
}

impl BenchRow {
    pub fn coupled_per_step(&self) -> f64 {
        self.coupled_secs / self.steps as f64
    }
}

/// Times the offline stage, the reduced online stage and the coupled
/// solver for each circuit. Online timings are the minimum over `repeats`
/// rounds; each round visits every circuit once so that all sizes see the
/// same machine load.
pub fn bench_sweep(circuits: &[Circuit], spec: &RunSpec, repeats: usize) -> Result<Vec<BenchRow>> {
    let mut tables = Vec::with_capacity(circuits.len());
    let mut rows = Vec::with_capacity(circuits.len());
    for circuit in circuits {
        let n_states = circuit.device.as_ref().map(|d| d.to_port_descriptor().map(|s| s.n_states())).transpose()?;
        let t0 = Instant::now();
        tables.push(circuit_weights(circuit, spec)?);
        rows.push(BenchRow {
            n_states: n_states.unwrap_or(0),
            steps: spec.steps,
            offline_secs: t0.elapsed().as_secs_f64(),
            reduced_online_secs: f64::INFINITY,
            coupled_secs: f64::INFINITY,
            online_transfer_evals: 0,
        });
    }
    for _ in 0..repeats.max(1) {
        for ((circuit, table), row) in circuits.iter().zip(&tables).zip(rows.iter_mut()) {
            let r = simulate(circuit, &spec.with_solver(Solver::Reduced), Some(table))?;
            row.reduced_online_secs = row.reduced_online_secs.min(r.online_secs);
            row.online_transfer_evals += r.online_transfer_evals;
        }
    }
    for _ in 0..repeats.max(1) {
        for (circuit, row) in circuits.iter().zip(rows.iter_mut()) {
            let c = simulate(circuit, &spec.with_solver(Solver::Coupled), None)?;
            row.coupled_secs = row.coupled_secs.min(c.online_secs);
        }
    }
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::new();
    out.push_str(&environment_comment());
    out.push_str("n_states,steps,offline_s,reduced_online_s,coupled_s,coupled_per_step_s,online_transfer_evals\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{:.6e},{:.6e},{:.6e},{:.6e},{}\n",
            r.n_states,
            r.steps,
            r.offline_secs,
            r.reduced_online_secs,
            r.coupled_secs,
            r.coupled_per_step(),
            r.online_transfer_evals
        ));
    }
    out
}

/// `# threads=<n> profile=<debug|release>` line for timing output.
pub fn environment_comment() -> String {
    let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let profile = if cfg!(debug_assertions) { "debug" } else { "release" };
    format!("# threads={threads} profile={profile} os={} arch={}\n", std::env::consts::OS, std::env::consts::ARCH)
}

/// Settings of the rectifier preset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectifierSetup {
    pub n_cells: usize,
    pub steps: usize,
    pub horizon: f64,
    pub diode_offset: f64,
    pub contour: ContourMode,
    pub eps: f64,
    pub conv: ConvMode,
}

impl Default for RectifierSetup {
    fn default() -> Self {
        RectifierSetup {
            n_cells: crate::circuit::DEFAULT_CELLS,
            steps: 1000,
            horizon: 1.0,
            diode_offset: 1.0,
            contour: ContourMode::Conservative,
            eps: crate::weights::DEFAULT_EPS,
            conv: ConvMode::Fft,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RectifierResult {
    pub coupled: Trajectory,
    pub reduced: Trajectory,
    /// Relative sup distance of the node potentials.
    pub u_distance: f64,
    pub u1_max: f64,
    /// `max |u₃|` over steps where the diode is reverse biased in the
    /// coupled run.
    pub u3_blocking_max: f64,
    pub blocking_steps: usize,
}

impl RectifierResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,u1_coupled,u3_coupled,u1_reduced,u3_reduced\n");
        for (n, (c, r)) in self.coupled.y.iter().zip(&self.reduced.y).enumerate() {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                n as f64 * self.coupled.tau,
                c[0],
                c[2],
                r[0],
                r[2]
            ));
        }
        out
    }
}

/// Runs the half-wave rectifier with coupled and reduced implicit Euler.
pub fn rectifier_study(setup: &RectifierSetup) -> Result<RectifierResult> {
    let opts = MnaOptions { diode_offset: setup.diode_offset };
    let circuit = Circuit::from_text(&rectifier_netlist(setup.n_cells), "rectifier", std::path::Path::new("."), &opts)?;
    let n_nodes = circuit.model.n_nodes();
    let spec = RunSpec::new(Method::Euler, Solver::Coupled, setup.horizon, setup.steps)?
        .with_contour(setup.contour)
        .with_conv(setup.conv);
    let spec = RunSpec { eps: setup.eps, ..spec };
    let coupled = simulate(&circuit, &spec, None)?.trajectory;
    let reduced = simulate(&circuit, &spec.with_solver(Solver::Reduced), None)?.trajectory;
    let nodes = |t: &Trajectory| -> Vec<crate::linalg::RVec> { t.y.iter().map(|y| y.rows(0, n_nodes).into_owned()).collect() };
    let u_distance = crate::steppers::relative_sup_distance_of(&nodes(&reduced), &nodes(&coupled));
    let u1_max = coupled.y.iter().map(|y| y[0].abs()).fold(0.0, f64::max);
    let mut u3_blocking_max = 0.0f64;
    let mut blocking_steps = 0;
    for (c, r) in coupled.y.iter().zip(&reduced.y).skip(1) {
        if c[1] - c[2] < 0.0 {
            blocking_steps += 1;
            u3_blocking_max = u3_blocking_max.max(c[2].abs()).max(r[2].abs());
        }
    }
    Ok(RectifierResult { coupled, reduced, u_distance, u1_max, u3_blocking_max, blocking_steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::model_problem_netlist;
    use std::path::Path;

    fn model(n: usize) -> Circuit {
        Circuit::from_text(&model_problem_netlist(n), "mp", Path::new("."), &MnaOptions::default()).unwrap()
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        assert!("rk4".parse::<Method>().is_err());
        assert_eq!(Method::Radau3.order(), 5);
        assert_eq!(Method::Bdf2.order(), 2);
    }

    #[test]
    fn grid_helpers() {
        assert_eq!(steps_for(1.0, 0.125).unwrap(), 8);
        assert!(steps_for(1.0, 0.3).is_err());
        assert!(step_size(1.0, 0).is_err());
        assert!(step_size(-1.0, 4).is_err());
    }

    #[test]
    fn slope_of_power_law() {
        let taus = [0.1, 0.05, 0.025, 0.0125];
        let errs: Vec<f64> = taus.iter().map(|t: &f64| 3.0 * t.powi(2)).collect();
        assert!((fitted_slope(&taus, &errs, 0.0).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(fitted_slope(&taus, &errs, 1.0), None);
    }

    #[test]
    fn reduced_run_is_offline_free() {
        let c = model(20);
        let spec = RunSpec::new(Method::Radau2, Solver::Reduced, 1.0, 16).unwrap();
        let table = circuit_weights(&c, &spec).unwrap();
        let r = simulate(&c, &spec, Some(&table)).unwrap();
        assert_eq!(r.online_transfer_evals, 0);
        let k = simulate(&c, &spec.with_solver(Solver::Coupled), None).unwrap();
        assert!(compare(&r.trajectory, &k.trajectory).unwrap().rel_sup < 1e-9);
    }

    #[test]
    fn circuit_without_device() {
        let c = Circuit::from_text("V1 1 0 sin 1 3\nR1 1 2 2\nC1 2 0 0.5\n", "rc", Path::new("."), &MnaOptions::default())
            .unwrap();
        for solver in [Solver::Coupled, Solver::Reduced] {
            let spec = RunSpec::new(Method::Bdf2, solver, 1.0, 40).unwrap();
            let t = simulate(&c, &spec, None).unwrap().trajectory;
            assert_eq!(t.steps(), 40);
            assert!(t.y.iter().all(|y| y.iter().all(|v| v.is_finite())));
        }
    }

    #[test]
    fn convergence_requires_divisible_grids() {
        let c = model(10);
        let spec = RunSpec::new(Method::Euler, Solver::Reduced, 1.0, 8).unwrap();
        assert!(convergence_study(&c, &spec, &[16, 12]).is_err());
        let r = convergence_study(&c, &spec, &[8, 16, 32]).unwrap();
        assert_eq!(r.rows.len(), 3);
        assert!(r.rows[0].err_sup > r.rows[2].err_sup);
    }
}
