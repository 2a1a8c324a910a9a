//! The nonlinear subsystem `M(y) y' + F(y, t) = (injection) · (output of the
//! linear part)` and a Newton solver for the per-step equations.

use crate::error::{Error, Result};
use crate::linalg::{DenseLu, RMat, RVec};
use crate::lti::PortMap;

/// Sparse coupling between the nonlinear unknowns and the linear block:
/// inputs `v = S y` feed the linear system, its outputs `w` enter the
/// nonlinear equations as `J w` on the right-hand side.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    dim: usize,
    /// Per input: `(y index, coefficient)`.
    select: Vec<Vec<(usize, f64)>>,
    /// Per output: `(row, coefficient)`.
    inject: Vec<Vec<(usize, f64)>>,
}

impl Coupling {
    pub fn new(dim: usize, select: Vec<Vec<(usize, f64)>>, inject: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        for col in select.iter().chain(inject.iter()) {
            if let Some(&(r, _)) = col.iter().find(|(r, _)| *r >= dim) {
                return Err(Error::Dimension(format!("coupling references row {r}, dimension is {dim}")));
            }
        }
        Ok(Coupling { dim, select, inject })
    }

    /// Port coupling of an electromagnetic element: `v = A_Mᵀ y`, injection
    /// `-A_M w`.
    pub fn from_ports(ports: &PortMap) -> Self {
        let select = ports.columns().to_vec();
        let inject = ports
            .columns()
            .iter()
            .map(|col| col.iter().map(|&(r, c)| (r, -c)).collect())
            .collect();
        Coupling { dim: ports.dim(), select, inject }
    }

    /// The linear block sees all of `y` and its output is added to every row.
    pub fn identity(dim: usize) -> Self {
        let cols: Vec<Vec<(usize, f64)>> = (0..dim).map(|k| vec![(k, 1.0)]).collect();
        Coupling { dim, select: cols.clone(), inject: cols }
    }

    /// No coupling: `p` inputs and `q` outputs that touch nothing.
    pub fn none(dim: usize, p: usize, q: usize) -> Self {
        Coupling { dim, select: vec![Vec::new(); p], inject: vec![Vec::new(); q] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn n_inputs(&self) -> usize {
        self.select.len()
    }
    pub fn n_outputs(&self) -> usize {
        self.inject.len()
    }

    pub fn select_into(&self, y: &[f64], out: &mut [f64]) {
        for (o, col) in out.iter_mut().zip(&self.select) {
            *o = col.iter().map(|&(r, c)| c * y[r]).sum();
        }
    }

    pub fn select(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_inputs()];
        self.select_into(y, &mut out);
        out
    }

    /// `out += J w`.
    pub fn inject_add(&self, w: &[f64], out: &mut [f64]) {
        for (col, &wk) in self.inject.iter().zip(w) {
            for &(r, c) in col {
                out[r] += c * wk;
            }
        }
    }

    /// Dense `p × dim` selection matrix `S`.
    pub fn select_dense(&self) -> RMat {
        let mut m = RMat::zeros(self.n_inputs(), self.dim);
        for (k, col) in self.select.iter().enumerate() {
            for &(r, c) in col {
                m[(k, r)] += c;
            }
        }
        m
    }

    /// Dense `dim × q` injection matrix `J`.
    pub fn inject_dense(&self) -> RMat {
        let mut m = RMat::zeros(self.dim, self.n_outputs());
        for (k, col) in self.inject.iter().enumerate() {
            for &(r, c) in col {
                m[(r, k)] += c;
            }
        }
        m
    }
}

/// Callbacks describing `M(y) y' + F(y, t) = J w`.
pub trait NonlinearSubsystem {
    fn dim(&self) -> usize;
    fn mass(&self, y: &[f64]) -> RMat;
    fn force(&self, y: &[f64], t: f64) -> RVec;

    /// `∂/∂y [M(y) w]`. `None` means unavailable.
    fn jac_mass_dir(&self, _y: &[f64], _w: &[f64]) -> Option<RMat> {
        None
    }

    /// `∂F/∂y`. `None` means unavailable.
    fn jac_force(&self, _y: &[f64], _t: f64) -> Option<RMat> {
        None
    }

    /// A constant mass matrix needs no directional derivative.
    fn mass_is_constant(&self) -> bool {
        false
    }

    fn coupling(&self) -> &Coupling;

    /// Rejects a converged state, e.g. when a device law left its valid range.
    fn check_state(&self, _y: &[f64]) -> Result<()> {
        Ok(())
    }

    /// Whether Newton needs finite-difference Jacobians for this subsystem.
    fn needs_fd_jacobian(&self) -> bool {
        let y = vec![0.0; self.dim()];
        self.jac_force(&y, 0.0).is_none() || (!self.mass_is_constant() && self.jac_mass_dir(&y, &y).is_none())
    }
}

type MassFn = Box<dyn Fn(&[f64]) -> RMat + Send + Sync>;
type ForceFn = Box<dyn Fn(&[f64], f64) -> RVec + Send + Sync>;
type MassDirFn = Box<dyn Fn(&[f64], &[f64]) -> RMat + Send + Sync>;
type JacFn = Box<dyn Fn(&[f64], f64) -> RMat + Send + Sync>;

/// A subsystem assembled from closures.
pub struct FnSubsystem {
    dim: usize,
    mass: MassFn,
    force: ForceFn,
    jac_mass_dir: Option<MassDirFn>,
    jac_force: Option<JacFn>,
    constant_mass: bool,
    coupling: Coupling,
}

impl FnSubsystem {
    pub fn new(
        dim: usize,
        mass: impl Fn(&[f64]) -> RMat + Send + Sync + 'static,
        force: impl Fn(&[f64], f64) -> RVec + Send + Sync + 'static,
        coupling: Coupling,
    ) -> Result<Self> {
        if coupling.dim() != dim {
            return Err(Error::Dimension(format!(
                "coupling dimension {} differs from subsystem dimension {dim}",
                coupling.dim()
            )));
        }
        Ok(FnSubsystem {
            dim,
            mass: Box::new(mass),
            force: Box::new(force),
            jac_mass_dir: None,
            jac_force: None,
            constant_mass: false,
            coupling,
        })
    }

    /// Constant mass matrix `M`.
    pub fn with_constant_mass(
        m: RMat,
        force: impl Fn(&[f64], f64) -> RVec + Send + Sync + 'static,
        coupling: Coupling,
    ) -> Result<Self> {
        let dim = m.nrows();
        let mut s = Self::new(dim, move |_| m.clone(), force, coupling)?;
        s.constant_mass = true;
        Ok(s)
    }

    pub fn jac_force(mut self, f: impl Fn(&[f64], f64) -> RMat + Send + Sync + 'static) -> Self {
        self.jac_force = Some(Box::new(f));
        self
    }

    pub fn jac_mass_dir(mut self, f: impl Fn(&[f64], &[f64]) -> RMat + Send + Sync + 'static) -> Self {
        self.jac_mass_dir = Some(Box::new(f));
        self
    }
}

impl NonlinearSubsystem for FnSubsystem {
    fn dim(&self) -> usize {
        self.dim
    }
    fn mass(&self, y: &[f64]) -> RMat {
        (self.mass)(y)
    }
    fn force(&self, y: &[f64], t: f64) -> RVec {
        (self.force)(y, t)
    }
    fn jac_mass_dir(&self, y: &[f64], w: &[f64]) -> Option<RMat> {
        self.jac_mass_dir.as_ref().map(|f| f(y, w))
    }
    fn jac_force(&self, y: &[f64], t: f64) -> Option<RMat> {
        self.jac_force.as_ref().map(|f| f(y, t))
    }
    fn mass_is_constant(&self) -> bool {
        self.constant_mass
    }
    fn coupling(&self) -> &Coupling {
        &self.coupling
    }
}

/// Newton stopping rules.
#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    /// Residual tolerance, scaled by `1 + |x|_∞`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { tol: 1e-12, max_iter: 50 }
    }
}

fn inf(v: &RVec) -> f64 {
    v.amax()
}

/// Forward-difference Jacobian with increments `√ε (1 + |x_j|)`.
pub fn fd_jacobian(x: &RVec, r0: &RVec, residual: &mut dyn FnMut(&RVec) -> Result<RVec>) -> Result<RMat> {
    let n = x.len();
    let mut jac = RMat::zeros(r0.len(), n);
    let mut xp = x.clone();
    for j in 0..n {
        let h = f64::EPSILON.sqrt() * (1.0 + x[j].abs());
        xp[j] = x[j] + h;
        let rp = residual(&xp)?;
        xp[j] = x[j];
        let h = (x[j] + h) - x[j];
        jac.set_column(j, &((rp - r0) / h));
    }
    Ok(jac)
}

/// Full-step Newton. At least one update is taken; iteration stops when
/// the residual is below tolerance and the last update is small, or when
/// the update stagnates at round-off level.
pub(crate) fn newton(
    x0: RVec,
    opts: NewtonOptions,
    step: usize,
    residual: &mut dyn FnMut(&RVec) -> Result<RVec>,
    jacobian: &mut dyn FnMut(&RVec, &RVec, &mut dyn FnMut(&RVec) -> Result<RVec>) -> Result<RMat>,
) -> Result<(RVec, usize)> {
    let mut x = x0;
    let mut r = residual(&x)?;
    for it in 1..=opts.max_iter {
        let jac = jacobian(&x, &r, residual)?;
        let lu = DenseLu::factor(jac).map_err(|_| Error::SingularJacobian { step })?;
        let mut dx = r.clone();
        lu.solve_in_place(dx.as_mut_slice());
        x -= &dx;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NewtonDiverged { step, residual: f64::INFINITY });
        }
        r = residual(&x)?;
        let scale = 1.0 + inf(&x);
        let small_res = inf(&r) <= opts.tol * scale;
        if (small_res && inf(&dx) <= 1e-10 * scale) || inf(&dx) <= 1e-15 * scale {
            return Ok((x, it));
        }
    }
    Err(Error::NewtonDiverged { step, residual: inf(&r) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn port_coupling_signs() {
        let pm = PortMap::new(3, vec![vec![(0, 1.0), (1, -1.0)]]).unwrap();
        let c = Coupling::from_ports(&pm);
        assert_eq!(c.select(&[3.0, 1.0, 7.0]), vec![2.0]);
        let mut out = vec![0.0; 3];
        c.inject_add(&[2.0], &mut out);
        assert_eq!(out, vec![-2.0, 2.0, 0.0]);
        assert_eq!(c.inject_dense(), -c.select_dense().transpose());
    }

    #[test]
    fn coupling_rejects_bad_rows() {
        assert!(Coupling::new(2, vec![vec![(2, 1.0)]], vec![]).is_err());
    }

    #[test]
    fn newton_solves_scalar_cubic() {
        let mut res = |x: &RVec| -> Result<RVec> { Ok(RVec::from_element(1, x[0].powi(3) - 8.0)) };
        let mut jac = |x: &RVec, _: &RVec, _: &mut dyn FnMut(&RVec) -> Result<RVec>| -> Result<RMat> {
            Ok(RMat::from_element(1, 1, 3.0 * x[0] * x[0]))
        };
        let (x, it) = newton(RVec::from_element(1, 1.0), NewtonOptions::default(), 0, &mut res, &mut jac).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-14);
        assert!(it > 1 && it < 20);
    }

    #[test]
    fn newton_with_fd_jacobian() {
        let mut res = |x: &RVec| -> Result<RVec> {
            Ok(RVec::from_vec(vec![x[0] * x[0] + x[1] - 3.0, x[0] - x[1] + 1.0]))
        };
        let mut jac = |x: &RVec, r: &RVec, f: &mut dyn FnMut(&RVec) -> Result<RVec>| fd_jacobian(x, r, f);
        let (x, _) =
            newton(RVec::from_vec(vec![0.5, 0.5]), NewtonOptions::default(), 0, &mut res, &mut jac).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-13 && (x[1] - 2.0).abs() < 1e-13);
    }

    #[test]
    fn newton_reports_divergence() {
        let mut res = |x: &RVec| -> Result<RVec> { Ok(RVec::from_element(1, x[0] * x[0] + 1.0)) };
        let mut jac = |x: &RVec, _: &RVec, _: &mut dyn FnMut(&RVec) -> Result<RVec>| -> Result<RMat> {
            Ok(RMat::from_element(1, 1, 2.0 * x[0]))
        };
        let r = newton(RVec::from_element(1, 0.3), NewtonOptions::default(), 7, &mut res, &mut jac);
        assert!(matches!(r, Err(Error::NewtonDiverged { step: 7, .. }) | Err(Error::SingularJacobian { step: 7 })));
    }

    #[test]
    fn fd_flag_follows_callbacks() {
        let c = Coupling::none(1, 1, 1);
        let s = FnSubsystem::with_constant_mass(RMat::identity(1, 1), |y, _| RVec::from_row_slice(y), c.clone())
            .unwrap();
        assert!(s.needs_fd_jacobian());
        let s = s.jac_force(|_, _| RMat::identity(1, 1));
        assert!(!s.needs_fd_jacobian());
    }
}
