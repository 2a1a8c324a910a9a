//! The per-step nonlinear system shared by all integrators.
//!
//! With stage values `Y = (Y_1, …, Y_s)` the discrete derivative is affine,
//! `Y'_i = Σ_j D_ij Y_j + d_i`, and the linear block contributes
//! `w = G (S Y) + h` stage-wise. Each stage solves
//! `M(Y_i) Y'_i + F(Y_i, t_i) = J w_i`. Coupled and reduced solvers differ only
//! in where `G` and `h` come from.

use super::nonlinear::{fd_jacobian, newton, NewtonOptions, NonlinearSubsystem};
use crate::error::Result;
use crate::linalg::{RMat, RVec};

pub(crate) struct StageSystem<'a, N: NonlinearSubsystem + ?Sized> {
    nl: &'a N,
    s: usize,
    dim: usize,
    p: usize,
    q: usize,
    dmat: RMat,
    g: RMat,
    coupling_jac: RMat,
    fd: bool,
    opts: NewtonOptions,
}

impl<'a, N: NonlinearSubsystem + ?Sized> StageSystem<'a, N> {
    pub fn new(nl: &'a N, dmat: RMat, g: RMat) -> Self {
        let s = dmat.nrows();
        let dim = nl.dim();
        let cpl = nl.coupling();
        let (p, q) = (cpl.n_inputs(), cpl.n_outputs());
        assert_eq!(g.shape(), (s * q, s * p));
        let sel = cpl.select_dense();
        let inj = cpl.inject_dense();
        let mut coupling_jac = RMat::zeros(s * dim, s * dim);
        for i in 0..s {
            for j in 0..s {
                let gij = g.view((i * q, j * p), (q, p));
                let blk = &inj * gij * &sel;
                coupling_jac.view_mut((i * dim, j * dim), (dim, dim)).copy_from(&blk);
            }
        }
        StageSystem { nl, s, dim, p, q, dmat, g, coupling_jac, fd: nl.needs_fd_jacobian(), opts: NewtonOptions::default() }
    }

    pub fn uses_fd(&self) -> bool {
        self.fd
    }

    fn derivative(&self, y: &RVec, d: &RVec, i: usize) -> RVec {
        let dim = self.dim;
        let mut der = d.rows(i * dim, dim).into_owned();
        for j in 0..self.s {
            let c = self.dmat[(i, j)];
            if c != 0.0 {
                der.axpy(c, &y.rows(j * dim, dim), 1.0);
            }
        }
        der
    }

    fn residual(&self, y: &RVec, d: &RVec, h: &RVec, times: &[f64]) -> RVec {
        let (s, dim, p, q) = (self.s, self.dim, self.p, self.q);
        let cpl = self.nl.coupling();
        let mut v = RVec::zeros(s * p);
        for j in 0..s {
            cpl.select_into(&y.as_slice()[j * dim..(j + 1) * dim], &mut v.as_mut_slice()[j * p..(j + 1) * p]);
        }
        let mut w = h.clone();
        w.gemv(1.0, &self.g, &v, 1.0);
        let mut r = RVec::zeros(s * dim);
        for i in 0..s {
            let yi = &y.as_slice()[i * dim..(i + 1) * dim];
            let der = self.derivative(y, d, i);
            let mut ri = self.nl.mass(yi) * der + self.nl.force(yi, times[i]);
            let mut inj = vec![0.0; dim];
            cpl.inject_add(&w.as_slice()[i * q..(i + 1) * q], &mut inj);
            for (a, b) in ri.iter_mut().zip(inj) {
                *a -= b;
            }
            r.rows_mut(i * dim, dim).copy_from(&ri);
        }
        r
    }

    fn jacobian(&self, y: &RVec, d: &RVec, times: &[f64]) -> RMat {
        let (s, dim) = (self.s, self.dim);
        let mut jac = -&self.coupling_jac;
        for i in 0..s {
            let yi = &y.as_slice()[i * dim..(i + 1) * dim];
            let m = self.nl.mass(yi);
            for j in 0..s {
                let c = self.dmat[(i, j)];
                if c != 0.0 {
                    let mut blk = jac.view_mut((i * dim, j * dim), (dim, dim));
                    blk += &m * c;
                }
            }
            let mut diag = self.nl.jac_force(yi, times[i]).expect("analytic force Jacobian");
            if !self.nl.mass_is_constant() {
                let der = self.derivative(y, d, i);
                diag += self.nl.jac_mass_dir(yi, der.as_slice()).expect("analytic mass derivative");
            }
            let mut blk = jac.view_mut((i * dim, i * dim), (dim, dim));
            blk += diag;
        }
        jac
    }

    /// Solves for the stacked stage values; returns them with the Newton
    /// iteration count.
    pub fn solve(&self, guess: RVec, d: &RVec, h: &RVec, times: &[f64], step: usize) -> Result<(RVec, usize)> {
        let mut res = |y: &RVec| -> Result<RVec> { Ok(self.residual(y, d, h, times)) };
        let out = if self.fd {
            let mut jac = |y: &RVec, r: &RVec, f: &mut dyn FnMut(&RVec) -> Result<RVec>| fd_jacobian(y, r, f);
            newton(guess, self.opts, step, &mut res, &mut jac)?
        } else {
            let mut jac =
                |y: &RVec, _: &RVec, _: &mut dyn FnMut(&RVec) -> Result<RVec>| Ok(self.jacobian(y, d, times));
            newton(guess, self.opts, step, &mut res, &mut jac)?
        };
        for i in 0..self.s {
            self.nl.check_state(&out.0.as_slice()[i * self.dim..(i + 1) * self.dim])?;
        }
        Ok(out)
    }
}
