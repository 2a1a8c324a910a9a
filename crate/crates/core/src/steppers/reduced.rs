//! Convolution-quadrature integrators for the reduced problem
//! `M(y) y' + F(y, t) = J ∫ K(t-r) S y(r) dr` using precomputed weights.

use super::convolution::{ConvMode, ConvolutionState};
use super::nonlinear::NonlinearSubsystem;
use super::stage::StageSystem;
use super::trajectory::Trajectory;
use crate::error::{Error, Result};
use crate::linalg::{RMat, RVec};
use crate::weights::{BdfScheme, ButcherTableau, CQWeightTable, WeightKind};

fn check<N: NonlinearSubsystem + ?Sized>(
    nl: &N,
    table: &CQWeightTable,
    kind: WeightKind,
    tau: f64,
    steps: usize,
) -> Result<()> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::Precondition(format!("step size {tau} must be positive")));
    }
    if steps == 0 {
        return Err(Error::Precondition("number of steps must be at least 1".into()));
    }
    let c = nl.coupling();
    table.check_binding(kind, tau, steps, c.n_inputs(), c.n_outputs())
}

pub fn solve_reduced_bdf<N: NonlinearSubsystem + ?Sized>(
    nl: &N,
    table: &CQWeightTable,
    scheme: &BdfScheme,
    tau: f64,
    steps: usize,
    mode: ConvMode,
) -> Result<Trajectory> {
    check(nl, table, WeightKind::Bdf { m: scheme.steps() }, tau, steps)?;
    let alpha = scheme.alpha();
    let m = scheme.steps();
    let dim = nl.dim();
    let stage = StageSystem::new(nl, RMat::from_element(1, 1, alpha[m] / tau), table.weight(0).clone());
    // History entry j holds S y_{j+1}; y_0 = 0 contributes nothing.
    let mut conv = ConvolutionState::new(table.weights()[..steps].to_vec(), mode)?;
    let cpl = nl.coupling();

    let mut traj = Trajectory::start(tau, dim, steps);
    traj.fd_jacobian = stage.uses_fd();
    for n in 1..=steps {
        let mut d = RVec::zeros(dim);
        for (k, &ak) in alpha.iter().enumerate().take(m) {
            if n + k >= m {
                d.axpy(ak / tau, &traj.y[n + k - m], 1.0);
            }
        }
        let h = conv.history_sum();
        let t = n as f64 * tau;
        let (y, iters) = stage.solve(traj.y[n - 1].clone(), &d, &h, &[t], n)?;
        conv.push(RVec::from_vec(cpl.select(y.as_slice())))?;
        traj.y.push(y);
        traj.newton_iters.push(iters);
    }
    Ok(traj)
}

pub fn solve_reduced_euler<N: NonlinearSubsystem + ?Sized>(
    nl: &N,
    table: &CQWeightTable,
    tau: f64,
    steps: usize,
    mode: ConvMode,
) -> Result<Trajectory> {
    solve_reduced_bdf(nl, table, &BdfScheme::bdf1(), tau, steps, mode)
}

pub fn solve_reduced_rk<N: NonlinearSubsystem + ?Sized>(
    nl: &N,
    table: &CQWeightTable,
    tab: &ButcherTableau,
    tau: f64,
    steps: usize,
    mode: ConvMode,
) -> Result<Trajectory> {
    let s = tab.stages();
    check(nl, table, WeightKind::Rk { s }, tau, steps)?;
    let dim = nl.dim();
    let dmat = tab.a_inv() / tau;
    let row_sums: Vec<f64> = (0..s).map(|i| dmat.row(i).sum()).collect();
    let stage = StageSystem::new(nl, dmat, table.weight(0).clone());
    let mut conv = ConvolutionState::new(table.weights()[..steps].to_vec(), mode)?;
    let cpl = nl.coupling();
    let p = cpl.n_inputs();

    let mut traj = Trajectory::start(tau, dim, steps);
    traj.fd_jacobian = stage.uses_fd();
    let mut stages = Vec::with_capacity(steps);
    for n in 0..steps {
        let mut d = RVec::zeros(s * dim);
        let mut guess = RVec::zeros(s * dim);
        for i in 0..s {
            d.rows_mut(i * dim, dim).axpy(-row_sums[i], &traj.y[n], 0.0);
            guess.rows_mut(i * dim, dim).copy_from(&traj.y[n]);
        }
        let h = conv.history_sum();
        let t0 = n as f64 * tau;
        let times: Vec<f64> = tab.c().iter().map(|c| t0 + c * tau).collect();
        let (ys, iters) = stage.solve(guess, &d, &h, &times, n + 1)?;
        let mut v = RVec::zeros(s * p);
        for j in 0..s {
            cpl.select_into(&ys.as_slice()[j * dim..(j + 1) * dim], &mut v.as_mut_slice()[j * p..(j + 1) * p]);
        }
        conv.push(v)?;
        traj.y.push(ys.rows((s - 1) * dim, dim).into_owned());
        traj.newton_iters.push(iters);
        stages.push(ys);
    }
    traj.stages = Some(stages);
    Ok(traj)
}
