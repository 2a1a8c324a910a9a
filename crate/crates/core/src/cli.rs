//! Command-line front end.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;

use crate::circuit::{Circuit, MnaOptions, MODEL_PROBLEM};
use crate::error::{Error, Result};
use crate::fit::{bode_csv, fit_rational_11, fit_report, log_grid, sample_imag_axis};
use crate::run::{
    bench_csv, bench_sweep, circuit_weights, compare, compare_csv, convergence_study, environment_comment,
    rectifier_study, simulate, step_size, steps_for, Method, RectifierSetup, RunSpec, Solver,
};
use crate::steppers::ConvMode;
use crate::weights::{CQWeightTable, ContourMode, TransferSource, DEFAULT_EPS};

#[derive(Debug, Parser)]
#[command(name = "cqdae", version, about = "Convolution-quadrature simulation of field-circuit problems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute and store the CQ weight table of the device (offline stage).
    Weights(RunArgs),
    /// Integrate a circuit and write its trajectory as CSV.
    Simulate(RunArgs),
    /// Run two configurations and report their distance.
    Compare(CompareArgs),
    /// Self-convergence study against a run with tau_min/8.
    Convergence(ConvergenceArgs),
    /// Bode data of the device transfer function.
    Bode(BodeArgs),
    /// Fit a (1,1) rational function and its equivalent circuit.
    Fit(BodeArgs),
    /// Offline/online timings over device sizes and step counts.
    Bench(BenchArgs),
    /// Half-wave rectifier preset, coupled against reduced implicit Euler.
    Rectifier(RectifierArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Netlist file (default: built-in model problem).
    #[arg(long)]
    pub netlist: Option<PathBuf>,
    #[arg(long, default_value = "euler")]
    pub method: Method,
    #[arg(long, default_value = "reduced")]
    pub solver: Solver,
    #[arg(long, conflicts_with = "steps")]
    pub tau: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    #[arg(long, default_value = "experiment")]
    pub contour: ContourMode,
    /// Tolerance of the conservative contour.
    #[arg(long, default_value_t = DEFAULT_EPS)]
    pub eps: f64,
    #[arg(long, default_value = "fft")]
    pub conv: ConvMode,
    /// Precomputed weight table for the reduced solver.
    #[arg(long)]
    pub weights_file: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Offset of the diode law `Is (exp(k v) + offset)`, +1 or -1.
    #[arg(long, default_value = "+1", allow_hyphen_values = true, value_parser = parse_offset)]
    pub diode_offset: f64,
    /// Recorded in the output header; runs are deterministic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Solver of the second run (default: the other one).
    #[arg(long)]
    pub solver_b: Option<Solver>,
    /// Method of the second run (default: same).
    #[arg(long)]
    pub method_b: Option<Method>,
    /// Convolution mode of the second run (default: same).
    #[arg(long)]
    pub conv_b: Option<ConvMode>,
}

#[derive(Debug, Clone, Args)]
pub struct ConvergenceArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Step sizes as fractions of the horizon (default 2^-3..2^-9).
    #[arg(long, value_delimiter = ',')]
    pub taus: Vec<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct BodeArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, default_value_t = 1e-2)]
    pub omega_min: f64,
    #[arg(long, default_value_t = 1e4)]
    pub omega_max: f64,
    #[arg(long, default_value_t = 1000)]
    pub points: usize,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Device sizes of the synthetic eddy model.
    #[arg(long, value_delimiter = ',', default_value = "200,400,800")]
    pub nz: Vec<usize>,
    #[arg(long = "steps-list", value_delimiter = ',', default_value = "256,1024")]
    pub steps_list: Vec<usize>,
    #[arg(long, default_value_t = 7)]
    pub repeats: usize,
}

#[derive(Debug, Clone, Args)]
pub struct RectifierArgs {
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = crate::circuit::DEFAULT_CELLS)]
    pub cells: usize,
    #[arg(long, default_value = "conservative")]
    pub contour: ContourMode,
    #[arg(long, default_value_t = DEFAULT_EPS)]
    pub eps: f64,
    #[arg(long, default_value = "fft")]
    pub conv: ConvMode,
    #[arg(long, default_value = "+1", allow_hyphen_values = true, value_parser = parse_offset)]
    pub diode_offset: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_offset(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v == 1.0 || v == -1.0 => Ok(v),
        _ => Err(format!("diode offset must be +1 or -1, got '{s}'")),
    }
}

impl RunArgs {
    pub fn circuit(&self) -> Result<Circuit> {
        let opts = MnaOptions { diode_offset: self.diode_offset };
        match &self.netlist {
            Some(p) => Circuit::load(p, &opts),
            None => Circuit::from_text(MODEL_PROBLEM, "model-problem", Path::new("."), &opts),
        }
    }

    pub fn steps(&self) -> Result<usize> {
        match (self.steps, self.tau) {
            (Some(n), _) => Ok(n),
            (None, Some(t)) => steps_for(self.horizon, t),
            (None, None) => Ok(100),
        }
    }

    pub fn spec(&self) -> Result<RunSpec> {
        let spec = RunSpec::new(self.method, self.solver, self.horizon, self.steps()?)?
            .with_contour(self.contour)
            .with_conv(self.conv);
        Ok(RunSpec { eps: self.eps, ..spec })
    }

    /// Loads `--weights-file` and checks it against the run.
    fn weights(&self, circuit: &Circuit, spec: &RunSpec) -> Result<Option<CQWeightTable>> {
        let Some(path) = &self.weights_file else { return Ok(None) };
        if spec.solver == Solver::Coupled {
            return Err(Error::Config("--weights-file requires --solver reduced".into()));
        }
        let table = CQWeightTable::load(path)?;
        let c = crate::steppers::NonlinearSubsystem::coupling(&circuit.model);
        table.check_binding(spec.method.weight_kind(), spec.tau, spec.steps, c.n_inputs(), c.n_outputs())?;
        Ok(Some(table))
    }
}

/// Writes `text` to `out`, or returns it for stdout.
fn emit(out: &Option<PathBuf>, text: String, report: &mut String) -> Result<()> {
    match out {
        Some(p) => {
            std::fs::write(p, text)?;
            let _ = writeln!(report, "wrote {}", p.display());
        }
        None => report.push_str(&text),
    }
    Ok(())
}

/// Executes a parsed command and returns what it prints.
pub fn execute(cli: &Cli) -> Result<String> {
    let mut report = String::new();
    match &cli.command {
        Command::Weights(args) => {
            let circuit = args.circuit()?;
            let spec = args.spec()?;
            if circuit.device.is_none() {
                return Err(Error::Config("netlist has no electromagnetic device".into()));
            }
            let t0 = Instant::now();
            let table = circuit_weights(&circuit, &spec)?;
            let secs = t0.elapsed().as_secs_f64();
            let path = args.out.clone().unwrap_or_else(|| PathBuf::from("weights.cqw"));
            table.save(&path)?;
            report.push_str(&environment_comment());
            let _ = writeln!(report, "method = {}", spec.method);
            let _ = writeln!(report, "N = {}", table.len());
            let _ = writeln!(report, "tau = {:e}", table.tau());
            let _ = writeln!(report, "L = {}", table.points());
            let _ = writeln!(report, "rho = {:.17e}", table.rho());
            let _ = writeln!(report, "max imaginary residue = {:.3e}", table.max_imag_residue());
            let _ = writeln!(report, "wall time = {secs:.6} s");
            let _ = writeln!(report, "wrote {}", path.display());
        }
        Command::Simulate(args) => {
            let circuit = args.circuit()?;
            let spec = args.spec()?;
            let weights = args.weights(&circuit, &spec)?;
            let r = simulate(&circuit, &spec, weights.as_ref())?;
            emit(&args.out, r.trajectory.to_csv(true), &mut report)?;
            if args.out.is_some() {
                report.push_str(&environment_comment());
                let _ = writeln!(report, "offline time = {:.6} s", r.offline_secs);
                let _ = writeln!(report, "online time = {:.6} s", r.online_secs);
                let _ = writeln!(report, "online transfer evaluations = {}", r.online_transfer_evals);
            }
        }
        Command::Compare(args) => {
            let circuit = args.run.circuit()?;
            let a = args.run.spec()?;
            let other = match a.solver {
                Solver::Coupled => Solver::Reduced,
                Solver::Reduced => Solver::Coupled,
            };
            let b = RunSpec {
                solver: args.solver_b.unwrap_or(other),
                method: args.method_b.unwrap_or(a.method),
                conv: args.conv_b.unwrap_or(a.conv),
                ..a
            };
            let ta = simulate(&circuit, &a, None)?.trajectory;
            let tb = simulate(&circuit, &b, None)?.trajectory;
            let rep = compare(&ta, &tb)?;
            if let Some(p) = &args.run.out {
                std::fs::write(p, compare_csv(&ta, &tb))?;
            }
            let _ = writeln!(report, "a = {} {} {:?}", a.solver, a.method, a.conv);
            let _ = writeln!(report, "b = {} {} {:?}", b.solver, b.method, b.conv);
            let _ = writeln!(report, "relative sup distance = {:.6e}", rep.rel_sup);
            let _ = writeln!(report, "max per-step distance = {:.6e} at t = {:e}", rep.abs_sup, rep.worst_step as f64 * a.tau);
        }
        Command::Convergence(args) => {
            let circuit = args.run.circuit()?;
            let horizon = args.run.horizon;
            let fracs: Vec<f64> =
                if args.taus.is_empty() { (3..=9).map(|k| 2f64.powi(-k)).collect() } else { args.taus.clone() };
            let steps: Vec<usize> = fracs.iter().map(|f| steps_for(1.0, *f)).collect::<Result<_>>()?;
            let n_max = *steps.iter().max().unwrap();
            let base = RunSpec { tau: step_size(horizon, n_max)?, steps: n_max, ..args.run.spec_unchecked()? };
            let res = convergence_study(&circuit, &base, &steps)?;
            emit(&args.run.out, res.to_csv(), &mut report)?;
            let fmt = |s: Option<f64>| s.map(|v| format!("{v:.3}")).unwrap_or_else(|| "n/a".into());
            let _ = writeln!(report, "method = {} (order {})", res.method, res.method.order());
            let _ = writeln!(report, "tau_ref = {:e}", res.tau_ref);
            let _ = writeln!(report, "slope (sup over time) = {}", fmt(res.slope_sup));
            let _ = writeln!(report, "slope (final time) = {}", fmt(res.slope_final));
        }
        Command::Bode(args) | Command::Fit(args) => {
            let circuit = args.run.circuit()?;
            let device =
                circuit.device.as_ref().ok_or_else(|| Error::Config("netlist has no electromagnetic device".into()))?;
            if args.points < 3 || !(args.omega_min > 0.0 && args.omega_max > args.omega_min) {
                return Err(Error::Config("need at least 3 points on 0 < omega_min < omega_max".into()));
            }
            let omegas = log_grid(args.omega_min, args.omega_max, args.points);
            let samples = sample_imag_axis(|s: Complex64| Ok(device.eval(s)?[(0, 0)]), &omegas)?;
            if matches!(cli.command, Command::Bode(_)) {
                emit(&args.run.out, bode_csv(&samples), &mut report)?;
            } else {
                let fit = fit_rational_11(&samples)?;
                report.push_str(&fit_report(&fit, &samples));
                if let Some(p) = &args.run.out {
                    let fitted: Vec<(Complex64, Complex64)> = samples.iter().map(|(s, _)| (*s, fit.eval(*s))).collect();
                    std::fs::write(p, bode_csv(&fitted))?;
                    let _ = writeln!(report, "wrote {}", p.display());
                }
            }
        }
        Command::Bench(args) => {
            let opts = MnaOptions { diode_offset: args.run.diode_offset };
            let circuits: Vec<Circuit> = args
                .nz
                .iter()
                .map(|&nz| Circuit::from_text(&crate::circuit::model_problem_netlist(nz + 1), "bench", Path::new("."), &opts))
                .collect::<Result<_>>()?;
            let mut rows = Vec::new();
            for &n in &args.steps_list {
                let spec = RunSpec { tau: step_size(args.run.horizon, n)?, steps: n, ..args.run.spec_unchecked()? };
                rows.extend(bench_sweep(&circuits, &spec, args.repeats)?);
            }
            emit(&args.run.out, bench_csv(&rows), &mut report)?;
        }
        Command::Rectifier(args) => {
            let setup = RectifierSetup {
                n_cells: args.cells,
                steps: args.steps,
                horizon: args.horizon,
                diode_offset: args.diode_offset,
                contour: args.contour,
                eps: args.eps,
                conv: args.conv,
            };
            let res = rectifier_study(&setup)?;
            if let Some(p) = &args.out {
                std::fs::write(p, res.to_csv())?;
                let _ = writeln!(report, "wrote {}", p.display());
            }
            let _ = writeln!(report, "relative distance of node potentials = {:.3e}", res.u_distance);
            let _ = writeln!(report, "max |u1| = {:.6e}", res.u1_max);
            let _ = writeln!(report, "blocking steps = {}", res.blocking_steps);
            let _ = writeln!(report, "max |u3| while blocking = {:.6e}", res.u3_blocking_max);
            let _ = writeln!(report, "ratio = {:.3e}", res.u3_blocking_max / res.u1_max);
        }
    }
    Ok(report)
}

impl RunArgs {
    /// Spec with the grid left for the caller to fill in.
    fn spec_unchecked(&self) -> Result<RunSpec> {
        let spec = RunSpec::new(self.method, self.solver, self.horizon, 1)?.with_contour(self.contour).with_conv(self.conv);
        Ok(RunSpec { eps: self.eps, ..spec })
    }
}

/// Entry point of the binary: returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
