//! Linear time-invariant descriptor systems `E z' + A z = B u`, `w = Cᵀ z`
//! and their transfer functions `K(s) = Cᵀ (sE + A)⁻¹ B`.

mod conductor;
pub mod matio;

pub use conductor::{
    solid_transfer, stranded_transfer, wrap_solid_as_descriptor, wrap_stranded_as_descriptor,
    SolidConductorModel, StrandedConductorModel,
};

use std::cell::Cell;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{CMat, DenseLu, RMat};

thread_local! {
    static TRANSFER_EVALS: Cell<u64> = const { Cell::new(0) };
}

/// Number of pencil factorizations performed for transfer evaluation on the
/// calling thread.
pub fn transfer_eval_count() -> u64 {
    TRANSFER_EVALS.with(|c| c.get())
}

pub(crate) fn bump_transfer_count() {
    TRANSFER_EVALS.with(|c| c.set(c.get() + 1));
}

/// The linear subsystem `E z' + A z = B u` with output `Cᵀ z`.
///
/// `B` is `n_z × p` (inputs), `C` is `n_z × q` (outputs). `E` may be
/// singular; regularity of the pencil is checked when it is evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSystem {
    e: RMat,
    a: RMat,
    b: RMat,
    c: RMat,
}

impl DescriptorSystem {
    pub fn new(e: RMat, a: RMat, b: RMat, c: RMat) -> Result<Self> {
        let n = e.nrows();
        if e.ncols() != n {
            return Err(Error::Dimension(format!("E is {}x{}, expected square", n, e.ncols())));
        }
        if a.shape() != (n, n) {
            return Err(Error::Dimension(format!(
                "A is {}x{}, expected {n}x{n}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.nrows() != n || c.nrows() != n {
            return Err(Error::Dimension(format!(
                "B has {} rows and C has {} rows, expected {n}",
                b.nrows(),
                c.nrows()
            )));
        }
        if b.ncols() == 0 || c.ncols() == 0 {
            return Err(Error::Dimension("B and C need at least one column".into()));
        }
        Ok(DescriptorSystem { e, a, b, c })
    }

    pub fn n_states(&self) -> usize {
        self.e.nrows()
    }

    /// Number of inputs `p`.
    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }

    /// Number of outputs `q`.
    pub fn n_outputs(&self) -> usize {
        self.c.ncols()
    }

    pub fn e(&self) -> &RMat {
        &self.e
    }
    pub fn a(&self) -> &RMat {
        &self.a
    }
    pub fn b(&self) -> &RMat {
        &self.b
    }
    pub fn c(&self) -> &RMat {
        &self.c
    }

    /// Complex pencil `sE + A`.
    pub fn pencil(&self, s: Complex64) -> CMat {
        CMat::from_fn(self.n_states(), self.n_states(), |i, j| {
            s * self.e[(i, j)] + self.a[(i, j)]
        })
    }

    /// `Cᵀ (sE + A)⁻¹ B` as a `q × p` complex matrix.
    pub fn transfer(&self, s: Complex64) -> Result<CMat> {
        bump_transfer_count();
        let lu = DenseLu::factor(self.pencil(s)).map_err(|e| Error::SingularPencil {
            s,
            pivot: e.pivot,
            threshold: e.threshold,
        })?;
        let x = lu.solve_mat(&self.b.map(|v| Complex64::new(v, 0.0)));
        let ct = self.c.transpose();
        Ok(CMat::from_fn(ct.nrows(), x.ncols(), |i, j| {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..ct.ncols() {
                let c = ct[(i, k)];
                if c != 0.0 {
                    acc += x[(k, j)] * c;
                }
            }
            acc
        }))
    }

    /// Lifts a port-level system to the full nonlinear state through the
    /// port map: inputs become `A_Mᵀ y` and outputs are injected as
    /// `-A_M (Cᵀ z)`, giving `K_full(s) = -A_M K(s) A_Mᵀ`.
    pub fn embed_in_state(&self, ports: &PortMap) -> Result<DescriptorSystem> {
        if ports.n_ports() != self.n_inputs() || ports.n_ports() != self.n_outputs() {
            return Err(Error::Dimension(format!(
                "port map has {} ports, system has {} inputs and {} outputs",
                ports.n_ports(),
                self.n_inputs(),
                self.n_outputs()
            )));
        }
        let sel = ports.to_dense(); // dim_y × ports
        let b = &self.b * sel.transpose();
        let c = -(&self.c * sel.transpose());
        DescriptorSystem::new(self.e.clone(), self.a.clone(), b, c)
    }
}

/// Free-function form of [`DescriptorSystem::transfer`].
pub fn transfer_eval(sys: &DescriptorSystem, s: Complex64) -> Result<CMat> {
    sys.transfer(s)
}

/// Signed incidence columns linking nonlinear unknowns to device ports.
///
/// Column `k` lists `(row, coefficient)` pairs; the port voltage is
/// `v_k = Σ coeff · y[row]` and the port current is injected into the
/// same rows with the opposite sign (`-A_M j_M`).
#[derive(Debug, Clone, PartialEq)]
pub struct PortMap {
    dim: usize,
    columns: Vec<Vec<(usize, f64)>>,
}

impl PortMap {
    pub fn new(dim: usize, columns: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::Dimension("empty port map".into()));
        }
        for (k, col) in columns.iter().enumerate() {
            if col.is_empty() {
                return Err(Error::Dimension(format!("port {k} has no incidence entries")));
            }
            if let Some(&(r, _)) = col.iter().find(|(r, _)| *r >= dim) {
                return Err(Error::Dimension(format!(
                    "port {k} references row {r}, state dimension is {dim}"
                )));
            }
        }
        Ok(PortMap { dim, columns })
    }

    /// `n` ports mapped one-to-one onto the first `n` unknowns.
    pub fn identity(n: usize) -> Result<Self> {
        PortMap::new(n, (0..n).map(|k| vec![(k, 1.0)]).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_ports(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Vec<(usize, f64)>] {
        &self.columns
    }

    /// Port voltages `A_Mᵀ y`.
    pub fn select(&self, y: &[f64]) -> Vec<f64> {
        self.columns
            .iter()
            .map(|col| col.iter().map(|&(r, c)| c * y[r]).sum())
            .collect()
    }

    /// `out += scale · A_M w`.
    pub fn inject_add(&self, w: &[f64], scale: f64, out: &mut [f64]) {
        for (col, &wk) in self.columns.iter().zip(w) {
            for &(r, c) in col {
                out[r] += scale * c * wk;
            }
        }
    }

    /// Dense `dim × n_ports` incidence matrix `A_M`.
    pub fn to_dense(&self) -> RMat {
        let mut m = RMat::zeros(self.dim, self.n_ports());
        for (k, col) in self.columns.iter().enumerate() {
            for &(r, c) in col {
                m[(r, k)] += c;
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(e: f64, a: f64, b: f64, c: f64) -> DescriptorSystem {
        let m = |v| RMat::from_element(1, 1, v);
        DescriptorSystem::new(m(e), m(a), m(b), m(c)).unwrap()
    }

    #[test]
    fn scalar_transfer_values() {
        let sys = scalar(1.0, 1.0, 1.0, 1.0);
        let k0 = sys.transfer(Complex64::new(0.0, 0.0)).unwrap();
        assert_eq!(k0[(0, 0)], Complex64::new(1.0, 0.0));
        let k1 = sys.transfer(Complex64::new(1.0, 0.0)).unwrap();
        assert!((k1[(0, 0)] - Complex64::new(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn zero_pencil_is_singular() {
        let sys = scalar(0.0, 0.0, 1.0, 1.0);
        let err = sys.transfer(Complex64::new(1.0, 0.0)).unwrap_err();
        assert!(matches!(err, Error::SingularPencil { .. }));
    }

    #[test]
    fn dimension_checks() {
        let r = DescriptorSystem::new(
            RMat::zeros(2, 2),
            RMat::zeros(2, 3),
            RMat::zeros(2, 1),
            RMat::zeros(2, 1),
        );
        assert!(matches!(r, Err(Error::Dimension(_))));
        let r = DescriptorSystem::new(
            RMat::zeros(2, 2),
            RMat::zeros(2, 2),
            RMat::zeros(3, 1),
            RMat::zeros(2, 1),
        );
        assert!(r.is_err());
    }

    #[test]
    fn port_map_select_and_inject() {
        let pm = PortMap::new(3, vec![vec![(0, 1.0), (2, -1.0)]]).unwrap();
        assert_eq!(pm.select(&[4.0, 9.0, 1.0]), vec![3.0]);
        let mut out = vec![0.0; 3];
        pm.inject_add(&[2.0], -1.0, &mut out);
        assert_eq!(out, vec![-2.0, 0.0, 2.0]);
        assert!(PortMap::new(3, vec![]).is_err());
        assert!(PortMap::new(3, vec![vec![(3, 1.0)]]).is_err());
    }

    #[test]
    fn embedding_carries_minus_sign() {
        let sys = scalar(1.0, 1.0, 1.0, 1.0);
        let pm = PortMap::new(2, vec![vec![(0, 1.0)]]).unwrap();
        let full = sys.embed_in_state(&pm).unwrap();
        let k = full.transfer(Complex64::new(1.0, 0.0)).unwrap();
        assert_eq!(k.shape(), (2, 2));
        assert!((k[(0, 0)] + Complex64::new(0.5, 0.0)).norm() < 1e-15);
        assert_eq!(k[(1, 1)], Complex64::new(0.0, 0.0));
    }
}
