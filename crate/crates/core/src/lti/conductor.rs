use nalgebra::{Matrix2, SVD};
use num_complex::Complex64;

use super::{bump_transfer_count, DescriptorSystem, PortMap};
use crate::error::{Error, Result};
use crate::linalg::{CMat, DenseLu, RMat, RVec};

const SYMMETRY_RTOL: f64 = 1e-12;
const RANK_RTOL: f64 = 1e-10;
const PORT_COND_MAX: f64 = 1e14;

fn check_symmetric(name: &str, m: &RMat) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("{name} is not square")));
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let asym = (m - m.transpose()).amax();
    if asym > SYMMETRY_RTOL * scale {
        return Err(Error::Dimension(format!(
            "{name} is not symmetric (max asymmetry {asym:.3e})"
        )));
    }
    Ok(())
}

fn factor_pencil(m: &RMat, k: &RMat, s: Complex64) -> Result<DenseLu<Complex64>> {
    bump_transfer_count();
    let p = CMat::from_fn(m.nrows(), m.ncols(), |i, j| s * m[(i, j)] + k[(i, j)]);
    DenseLu::factor(p).map_err(|e| Error::SingularPencil { s, pivot: e.pivot, threshold: e.threshold })
}

/// Solid conductor excited by a voltage across a contact cut:
/// `M_σ a' + K_ν a = -B1 v`, `B1ᵀ a' - j = -B2 v`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolidConductorModel {
    pub m_sigma: RMat,
    pub k_nu: RMat,
    pub b1: RVec,
    pub b2: f64,
}

impl SolidConductorModel {
    pub fn new(m_sigma: RMat, k_nu: RMat, b1: RVec, b2: f64) -> Result<Self> {
        check_symmetric("M_sigma", &m_sigma)?;
        check_symmetric("K_nu", &k_nu)?;
        let n = m_sigma.nrows();
        if k_nu.nrows() != n || b1.len() != n {
            return Err(Error::Dimension(format!(
                "solid conductor blocks disagree: M_sigma {n}, K_nu {}, B1 {}",
                k_nu.nrows(),
                b1.len()
            )));
        }
        Ok(SolidConductorModel { m_sigma, k_nu, b1, b2 })
    }

    pub fn n_states(&self) -> usize {
        self.m_sigma.nrows()
    }

    /// `k(s) = B2 - s B1ᵀ (s M_σ + K_ν)⁻¹ B1`.
    pub fn transfer(&self, s: Complex64) -> Result<Complex64> {
        if s == Complex64::new(0.0, 0.0) || self.b1.iter().all(|&v| v == 0.0) {
            return Ok(Complex64::new(self.b2, 0.0));
        }
        let lu = factor_pencil(&self.m_sigma, &self.k_nu, s)?;
        let mut x: Vec<Complex64> = self.b1.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        lu.solve_in_place(&mut x);
        let inner: Complex64 = self.b1.iter().zip(&x).map(|(&b, &xi)| xi * b).sum();
        Ok(Complex64::new(self.b2, 0.0) - s * inner)
    }

    /// Descriptor form with `z = (a, j_M)`, one input (`v_M`) and one
    /// output (`j_M`). The port map decides how the circuit sees the port;
    /// it must describe exactly one port.
    pub fn to_descriptor(&self, ports: &PortMap) -> Result<DescriptorSystem> {
        if ports.n_ports() != 1 {
            return Err(Error::Dimension(format!(
                "solid conductor has one port, port map has {}",
                ports.n_ports()
            )));
        }
        let n = self.n_states();
        let mut e = RMat::zeros(n + 1, n + 1);
        let mut a = RMat::zeros(n + 1, n + 1);
        e.view_mut((0, 0), (n, n)).copy_from(&self.m_sigma);
        a.view_mut((0, 0), (n, n)).copy_from(&self.k_nu);
        for i in 0..n {
            e[(n, i)] = self.b1[i];
        }
        a[(n, n)] = -1.0;
        let mut b = RMat::zeros(n + 1, 1);
        for i in 0..n {
            b[(i, 0)] = -self.b1[i];
        }
        b[(n, 0)] = -self.b2;
        let mut c = RMat::zeros(n + 1, 1);
        c[(n, 0)] = 1.0;
        DescriptorSystem::new(e, a, b, c)
    }
}

/// Free-function form of [`SolidConductorModel::transfer`], as a 1×1 matrix.
pub fn solid_transfer(model: &SolidConductorModel, s: Complex64) -> Result<CMat> {
    Ok(CMat::from_element(1, 1, model.transfer(s)?))
}

/// Wraps a solid conductor into a port-level descriptor system.
pub fn wrap_solid_as_descriptor(model: &SolidConductorModel, ports: &PortMap) -> Result<DescriptorSystem> {
    model.to_descriptor(ports)
}

/// Two-port stranded-conductor device: `M_σ a' + K_ν a - B3 j = 0`,
/// `B3ᵀ a' = v`.
#[derive(Debug, Clone, PartialEq)]
pub struct StrandedConductorModel {
    pub m_sigma: RMat,
    pub k_nu: RMat,
    pub b3: RMat,
}

impl StrandedConductorModel {
    pub fn new(m_sigma: RMat, k_nu: RMat, b3: RMat) -> Result<Self> {
        check_symmetric("M_sigma", &m_sigma)?;
        check_symmetric("K_nu", &k_nu)?;
        let n = m_sigma.nrows();
        if k_nu.nrows() != n || b3.nrows() != n || b3.ncols() != 2 {
            return Err(Error::Dimension(format!(
                "stranded conductor blocks disagree: M_sigma {n}, K_nu {}, B3 {}x{}",
                k_nu.nrows(),
                b3.nrows(),
                b3.ncols()
            )));
        }
        let sv = SVD::new(b3.clone(), false, false).singular_values;
        let (smax, smin) = (sv.max(), sv.min());
        if !(smin > RANK_RTOL * smax) {
            return Err(Error::Dimension(format!(
                "B3 is rank deficient (singular values {smax:.3e}, {smin:.3e})"
            )));
        }
        Ok(StrandedConductorModel { m_sigma, k_nu, b3 })
    }

    pub fn n_states(&self) -> usize {
        self.m_sigma.nrows()
    }

    /// `k(s) = (s B3ᵀ (s M_σ + K_ν)⁻¹ B3)⁻¹`, a 2×2 admittance.
    pub fn transfer(&self, s: Complex64) -> Result<CMat> {
        if s == Complex64::new(0.0, 0.0) {
            return Err(Error::Precondition("stranded transfer requires s != 0".into()));
        }
        let lu = factor_pencil(&self.m_sigma, &self.k_nu, s)?;
        let x = lu.solve_mat(&self.b3.map(|v| Complex64::new(v, 0.0)));
        let mut inner = Matrix2::<Complex64>::zeros();
        for i in 0..2 {
            for j in 0..2 {
                let dot: Complex64 = (0..self.n_states()).map(|k| x[(k, j)] * self.b3[(k, i)]).sum();
                inner[(i, j)] = s * dot;
            }
        }
        let sv = SVD::new(inner, false, false).singular_values;
        let cond = if sv.min() > 0.0 { sv.max() / sv.min() } else { f64::INFINITY };
        if !(cond <= PORT_COND_MAX) {
            return Err(Error::SingularPort { cond });
        }
        let inv = inner.try_inverse().ok_or(Error::SingularPort { cond })?;
        Ok(CMat::from_fn(2, 2, |i, j| inv[(i, j)]))
    }

    /// Descriptor form with `z = (a, j_1, j_2)`; inputs are the two port
    /// voltages and outputs the two winding currents.
    pub fn to_descriptor(&self, ports: &PortMap) -> Result<DescriptorSystem> {
        if ports.n_ports() != 2 {
            return Err(Error::Dimension(format!(
                "stranded conductor has two ports, port map has {}",
                ports.n_ports()
            )));
        }
        let n = self.n_states();
        let mut e = RMat::zeros(n + 2, n + 2);
        let mut a = RMat::zeros(n + 2, n + 2);
        e.view_mut((0, 0), (n, n)).copy_from(&self.m_sigma);
        a.view_mut((0, 0), (n, n)).copy_from(&self.k_nu);
        for i in 0..n {
            for k in 0..2 {
                e[(n + k, i)] = self.b3[(i, k)];
                a[(i, n + k)] = -self.b3[(i, k)];
            }
        }
        let mut b = RMat::zeros(n + 2, 2);
        b[(n, 0)] = 1.0;
        b[(n + 1, 1)] = 1.0;
        let c = b.clone();
        DescriptorSystem::new(e, a, b, c)
    }
}

pub fn stranded_transfer(model: &StrandedConductorModel, s: Complex64) -> Result<CMat> {
    model.transfer(s)
}

pub fn wrap_stranded_as_descriptor(
    model: &StrandedConductorModel,
    ports: &PortMap,
) -> Result<DescriptorSystem> {
    model.to_descriptor(ports)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn one(v: f64) -> RMat {
        RMat::from_element(1, 1, v)
    }

    #[test]
    fn vanishing_coupling_returns_direct_term() {
        let m = SolidConductorModel::new(one(1.0), one(1.0), RVec::zeros(1), 3.25).unwrap();
        assert_eq!(m.transfer(c(0.7, 2.0)).unwrap(), c(3.25, 0.0));
    }

    #[test]
    fn scalar_solid_transfer() {
        let m = SolidConductorModel::new(one(1.0), one(1.0), RVec::from_element(1, 1.0), 2.0).unwrap();
        assert!((m.transfer(c(1.0, 0.0)).unwrap() - c(1.5, 0.0)).norm() < 1e-15);
        let pm = PortMap::identity(1).unwrap();
        let sys = wrap_solid_as_descriptor(&m, &pm).unwrap();
        let k = sys.transfer(c(1.0, 0.0)).unwrap();
        assert!((k[(0, 0)] - c(1.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn asymmetric_blocks_rejected() {
        let m = RMat::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(SolidConductorModel::new(m, RMat::identity(2, 2), RVec::zeros(2), 0.0).is_err());
    }

    #[test]
    fn stranded_diagonal_case() {
        let m = StrandedConductorModel::new(RMat::identity(2, 2), RMat::zeros(2, 2), RMat::identity(2, 2))
            .unwrap();
        let k = m.transfer(c(2.0, 0.0)).unwrap();
        assert!((k - CMat::identity(2, 2)).camax() < 1e-15);
        assert!(matches!(m.transfer(c(0.0, 0.0)), Err(Error::Precondition(_))));
    }

    #[test]
    fn stranded_rank_check() {
        let b3 = RMat::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(StrandedConductorModel::new(RMat::identity(2, 2), RMat::zeros(2, 2), b3).is_err());
    }

    #[test]
    fn wrong_port_count_rejected() {
        let m = SolidConductorModel::new(one(1.0), one(1.0), RVec::from_element(1, 1.0), 2.0).unwrap();
        let pm = PortMap::identity(2).unwrap();
        assert!(m.to_descriptor(&pm).is_err());
    }
}
