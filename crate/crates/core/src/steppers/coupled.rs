//! Monolithic integrators for the coupled system
//! `M(y) y' + F(y, t) = J Cᵀz`, `E z' + A z = B S y`.
//!
//! The linear block is eliminated per step through a factorization of the
//! step pencil computed once before time stepping.

use num_complex::Complex64;

use super::nonlinear::NonlinearSubsystem;
use super::stage::StageSystem;
use super::trajectory::Trajectory;
use crate::error::{Error, Result};
use crate::linalg::{kron, DenseLu, RMat, RVec};
use crate::lti::DescriptorSystem;
use crate::weights::{BdfScheme, ButcherTableau};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoupledOptions {
    /// Reuse one pencil factorization for all steps (otherwise refactor
    /// every step).
    pub cache_factorization: bool,
}

impl Default for CoupledOptions {
    fn default() -> Self {
        CoupledOptions { cache_factorization: true }
    }
}

fn check_inputs<N: NonlinearSubsystem + ?Sized>(nl: &N, lin: &DescriptorSystem, tau: f64, steps: usize) -> Result<()> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::Precondition(format!("step size {tau} must be positive")));
    }
    if steps == 0 {
        return Err(Error::Precondition("number of steps must be at least 1".into()));
    }
    let c = nl.coupling();
    if c.n_inputs() != lin.n_inputs() || c.n_outputs() != lin.n_outputs() {
        return Err(Error::Dimension(format!(
            "coupling has {} inputs and {} outputs, linear block has {} and {}",
            c.n_inputs(),
            c.n_outputs(),
            lin.n_inputs(),
            lin.n_outputs()
        )));
    }
    Ok(())
}

/// Factored step pencil with the precomputed input response `X = P⁻¹ B̃`
/// and `G = C̃ᵀ X`.
struct StepPencil {
    lu: DenseLu<f64>,
    x: RMat,
    g: RMat,
    ct: RMat,
}

impl StepPencil {
    fn new(pencil: RMat, b: &RMat, c: &RMat, shift: f64) -> Result<Self> {
        let lu = DenseLu::factor(pencil).map_err(|e| Error::SingularPencil {
            s: Complex64::new(shift, 0.0),
            pivot: e.pivot,
            threshold: e.threshold,
        })?;
        let x = lu.solve_mat(b);
        let ct = c.transpose();
        let g = &ct * &x;
        Ok(StepPencil { lu, x, g, ct })
    }
}

pub fn solve_coupled_euler<N: NonlinearSubsystem + ?Sized>(
    nl: &N,
    lin: &DescriptorSystem,
    tau: f64,
    steps: usize,
) -> Result<Trajectory> {
    solve_coupled_bdf(nl, lin, &BdfScheme::bdf1(), tau, steps)
}

pub fn solve_coupled_bdf<N: NonlinearSubsystem + ?Sized>(
    nl: &N,
    lin: &DescriptorSystem,
    scheme: &BdfScheme,
    tau: f64,
    steps: usize,
) -> Result<Trajectory> {
    solve_coupled_bdf_with(nl, lin, scheme, tau, steps, CoupledOptions::default())
}

pub fn solve_coupled_bdf_with<N: NonlinearSubsystem + ?Sized>(
    nl: &N,
    lin: &DescriptorSystem,
    scheme: &BdfScheme,
    tau: f64,
    steps: usize,
    opts: CoupledOptions,
) -> Result<Trajectory> {
    check_inputs(nl, lin, tau, steps)?;
    let alpha = scheme.alpha();
    let m = scheme.steps();
    let am = alpha[m];
    let (dim, nz) = (nl.dim(), lin.n_states());
    let e_tau = lin.e() / tau;
    let make_pencil = || StepPencil::new(&e_tau * am + lin.a(), lin.b(), lin.c(), am / tau);
    let mut pencil = make_pencil()?;
    let dmat = RMat::from_element(1, 1, am / tau);
    let mut stage = StageSystem::new(nl, dmat.clone(), pencil.g.clone());

    let mut traj = Trajectory::start(tau, dim, steps);
    traj.fd_jacobian = stage.uses_fd();
    let mut zs: Vec<RVec> = vec![RVec::zeros(nz)];
    let cpl = nl.coupling();

    for n in 1..=steps {
        if !opts.cache_factorization {
            pencil = make_pencil()?;
            stage = StageSystem::new(nl, dmat.clone(), pencil.g.clone());
        }
        let mut zsum = RVec::zeros(nz);
        let mut d = RVec::zeros(dim);
        for (k, &ak) in alpha.iter().enumerate().take(m) {
            if n + k >= m {
                let idx = n + k - m;
                zsum.axpy(ak, &zs[idx], 1.0);
                d.axpy(ak / tau, &traj.y[idx], 1.0);
            }
        }
        let mut zh = -(&e_tau * zsum);
        pencil.lu.solve_in_place(zh.as_mut_slice());
        let h = &pencil.ct * &zh;
        let t = n as f64 * tau;
        let guess = traj.y[n - 1].clone();
        let (y, iters) = stage.solve(guess, &d, &h, &[t], n)?;
        let v = RVec::from_vec(cpl.select(y.as_slice()));
        let z = &pencil.x * v + zh;
        zs.push(z);
        traj.y.push(y);
        traj.newton_iters.push(iters);
    }
    traj.z = Some(zs);
    Ok(traj)
}

pub fn solve_coupled_rk<N: NonlinearSubsystem + ?Sized>(
    nl: &N,
    lin: &DescriptorSystem,
    tab: &ButcherTableau,
    tau: f64,
    steps: usize,
) -> Result<Trajectory> {
    solve_coupled_rk_with(nl, lin, tab, tau, steps, CoupledOptions::default())
}

pub fn solve_coupled_rk_with<N: NonlinearSubsystem + ?Sized>(
    nl: &N,
    lin: &DescriptorSystem,
    tab: &ButcherTableau,
    tau: f64,
    steps: usize,
    opts: CoupledOptions,
) -> Result<Trajectory> {
    check_inputs(nl, lin, tau, steps)?;
    let s = tab.stages();
    let (dim, nz) = (nl.dim(), lin.n_states());
    let dmat = tab.a_inv() / tau;
    let row_sums: Vec<f64> = (0..s).map(|i| dmat.row(i).sum()).collect();
    let eye = RMat::identity(s, s);
    let make_pencil = || {
        StepPencil::new(
            kron(&dmat, lin.e()) + kron(&eye, lin.a()),
            &kron(&eye, lin.b()),
            &kron(&eye, lin.c()),
            row_sums[s - 1],
        )
    };
    let mut pencil = make_pencil()?;
    let mut stage = StageSystem::new(nl, dmat.clone(), pencil.g.clone());
    let cpl = nl.coupling();
    let p = cpl.n_inputs();

    let mut traj = Trajectory::start(tau, dim, steps);
    traj.fd_jacobian = stage.uses_fd();
    let mut zs: Vec<RVec> = vec![RVec::zeros(nz)];
    let mut stages = Vec::with_capacity(steps);

    for n in 0..steps {
        if !opts.cache_factorization {
            pencil = make_pencil()?;
            stage = StageSystem::new(nl, dmat.clone(), pencil.g.clone());
        }
        let ez = lin.e() * &zs[n];
        let mut zh = RVec::zeros(s * nz);
        let mut d = RVec::zeros(s * dim);
        for i in 0..s {
            zh.rows_mut(i * nz, nz).axpy(row_sums[i], &ez, 0.0);
            d.rows_mut(i * dim, dim).axpy(-row_sums[i], &traj.y[n], 0.0);
        }
        pencil.lu.solve_in_place(zh.as_mut_slice());
        let h = &pencil.ct * &zh;
        let t0 = n as f64 * tau;
        let times: Vec<f64> = tab.c().iter().map(|c| t0 + c * tau).collect();
        let mut guess = RVec::zeros(s * dim);
        for i in 0..s {
            guess.rows_mut(i * dim, dim).copy_from(&traj.y[n]);
        }
        let (ys, iters) = stage.solve(guess, &d, &h, &times, n + 1)?;
        let mut v = RVec::zeros(s * p);
        for j in 0..s {
            cpl.select_into(&ys.as_slice()[j * dim..(j + 1) * dim], &mut v.as_mut_slice()[j * p..(j + 1) * p]);
        }
        let zstage = &pencil.x * v + zh;
        zs.push(zstage.rows((s - 1) * nz, nz).into_owned());
        traj.y.push(ys.rows((s - 1) * dim, dim).into_owned());
        traj.newton_iters.push(iters);
        stages.push(ys);
    }
    traj.z = Some(zs);
    traj.stages = Some(stages);
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::steppers::nonlinear::{Coupling, FnSubsystem};

    fn scalar_sys(e: f64, a: f64, b: f64, c: f64) -> DescriptorSystem {
        let m = |v| RMat::from_element(1, 1, v);
        DescriptorSystem::new(m(e), m(a), m(b), m(c)).unwrap()
    }

    #[test]
    fn zero_data_gives_zero_trajectory() {
        let nl = FnSubsystem::with_constant_mass(RMat::identity(1, 1), |y, _| RVec::from_row_slice(y), Coupling::none(1, 1, 1))
            .unwrap()
            .jac_force(|_, _| RMat::identity(1, 1));
        let lin = scalar_sys(1.0, 2.0, 1.0, 1.0);
        let t = solve_coupled_euler(&nl, &lin, 0.1, 10).unwrap();
        assert!(t.y.iter().all(|v| v[0] == 0.0));
    }

    #[test]
    fn sine_forcing_recurrence() {
        let nl = FnSubsystem::with_constant_mass(
            RMat::identity(1, 1),
            |_, t| RVec::from_element(1, -t.sin()),
            Coupling::none(1, 1, 1),
        )
        .unwrap()
        .jac_force(|_, _| RMat::zeros(1, 1));
        let lin = scalar_sys(1.0, 1.0, 0.0, 0.0);
        let tau = 0.05;
        let t = solve_coupled_euler(&nl, &lin, tau, 40).unwrap();
        let mut y = 0.0;
        for n in 1..=40 {
            y += tau * (n as f64 * tau).sin();
            assert!((t.y[n][0] - y).abs() <= 1e-14 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn bdf2_second_order() {
        // y' = -2y + sin t, y(0) = y'(0) = 0: the zero history before t = 0
        // is then a C¹ extension and the start-up costs no order.
        let exact = |t: f64| (2.0 * t.sin() - t.cos() + (-2.0 * t).exp()) / 5.0;
        let nl = FnSubsystem::with_constant_mass(
            RMat::identity(1, 1),
            |y, t| RVec::from_element(1, 2.0 * y[0] - t.sin()),
            Coupling::none(1, 1, 1),
        )
        .unwrap()
        .jac_force(|_, _| RMat::from_element(1, 1, 2.0));
        let lin = scalar_sys(1.0, 1.0, 0.0, 0.0);
        let err = |n: usize| {
            let t = solve_coupled_bdf(&nl, &lin, &BdfScheme::bdf2(), 1.0 / n as f64, n).unwrap();
            (t.y[n][0] - exact(1.0)).abs()
        };
        let slopes: Vec<f64> = [64, 128, 256].windows(2).map(|w| (err(w[0]) / err(w[1])).log2()).collect();
        for s in slopes {
            assert!((s - 2.0).abs() < 0.1, "slope {s}");
        }
    }

    #[test]
    fn radau1_matches_euler_and_stiff_accuracy() {
        let nl = FnSubsystem::with_constant_mass(
            RMat::identity(1, 1),
            |y, t| RVec::from_element(1, y[0] * y[0] * 0.1 - t.sin()),
            Coupling::identity(1),
        )
        .unwrap();
        let lin = scalar_sys(1.0, 3.0, 1.0, -0.5);
        let e = solve_coupled_euler(&nl, &lin, 0.1, 20).unwrap();
        let r = solve_coupled_rk(&nl, &lin, &ButcherTableau::radau_iia(1).unwrap(), 0.1, 20).unwrap();
        for n in 0..=20 {
            assert!((e.y[n][0] - r.y[n][0]).abs() <= 1e-13);
        }
        assert!(e.fd_jacobian);
        let r3 = solve_coupled_rk(&nl, &lin, &ButcherTableau::radau_iia(3).unwrap(), 0.1, 20).unwrap();
        let st = r3.stages.as_ref().unwrap();
        for n in 0..20 {
            assert!((r3.y[n + 1][0] - st[n][2]).abs() <= 1e-12);
        }
    }

    #[test]
    fn radau3_fifth_order() {
        let exact = |t: f64| (2.0 * t.cos() + t.sin() - 2.0 * (-2.0 * t).exp()) / 5.0;
        let nl = FnSubsystem::with_constant_mass(
            RMat::identity(1, 1),
            |y, t| RVec::from_element(1, 2.0 * y[0] - t.cos()),
            Coupling::none(1, 1, 1),
        )
        .unwrap()
        .jac_force(|_, _| RMat::from_element(1, 1, 2.0));
        let lin = scalar_sys(1.0, 1.0, 0.0, 0.0);
        let tab = ButcherTableau::radau_iia(3).unwrap();
        let err = |n: usize| {
            let t = solve_coupled_rk(&nl, &lin, &tab, 1.0 / n as f64, n).unwrap();
            (t.y[n][0] - exact(1.0)).abs()
        };
        let s = (err(4) / err(8)).log2();
        assert!(s >= 4.8, "slope {s}");
    }

    #[test]
    fn caching_is_transparent() {
        let nl = FnSubsystem::with_constant_mass(
            RMat::identity(1, 1),
            |y, t| RVec::from_element(1, y[0] - t.cos()),
            Coupling::identity(1),
        )
        .unwrap()
        .jac_force(|_, _| RMat::identity(1, 1));
        let lin = DescriptorSystem::new(
            RMat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
            RMat::from_row_slice(2, 2, &[1.0, 0.5, -0.5, 2.0]),
            RMat::from_row_slice(2, 1, &[1.0, 1.0]),
            RMat::from_row_slice(2, 1, &[0.3, -0.2]),
        )
        .unwrap();
        let tab = ButcherTableau::radau_iia(2).unwrap();
        let a = solve_coupled_rk(&nl, &lin, &tab, 0.1, 15).unwrap();
        let b = solve_coupled_rk_with(&nl, &lin, &tab, 0.1, 15, CoupledOptions { cache_factorization: false }).unwrap();
        for n in 0..=15 {
            assert!((a.y[n][0] - b.y[n][0]).abs() <= 1e-14);
        }
    }
}
