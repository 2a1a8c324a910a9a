//! Transfer functions evaluated at small matrix arguments.
//!
//! For a Runge-Kutta symbol the transfer function is needed at
//! `M = Δ(ξ)/τ ∈ ℂ^{s×s}`. Two routes are provided: diagonalization
//! (`s` scalar evaluations) and the direct Kronecker solve
//! `(I⊗Cᵀ)(M⊗E + I⊗A)⁻¹(I⊗B)`, which doubles as the reference definition.

use nalgebra::{Schur, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{CMat, DenseLu};
use crate::lti::matio::DeviceBundle;
use crate::lti::{bump_transfer_count, DescriptorSystem, SolidConductorModel, StrandedConductorModel};

/// Largest eigenvector-basis condition number accepted by the
/// diagonalization route.
pub const EIGENBASIS_COND_MAX: f64 = 1e8;

/// Anything that can evaluate a `q × p` transfer matrix at complex `s`.
pub trait TransferSource: Sync {
    fn n_inputs(&self) -> usize;
    fn n_outputs(&self) -> usize;
    fn eval(&self, s: Complex64) -> Result<CMat>;

    /// Direct evaluation at a matrix argument, when a state-space form is
    /// available.
    fn eval_kronecker(&self, _m: &CMat) -> Option<Result<CMat>> {
        None
    }
}

impl TransferSource for DescriptorSystem {
    fn n_inputs(&self) -> usize {
        DescriptorSystem::n_inputs(self)
    }
    fn n_outputs(&self) -> usize {
        DescriptorSystem::n_outputs(self)
    }
    fn eval(&self, s: Complex64) -> Result<CMat> {
        self.transfer(s)
    }
    fn eval_kronecker(&self, m: &CMat) -> Option<Result<CMat>> {
        Some(kronecker_transfer_eval(self, m))
    }
}

impl TransferSource for SolidConductorModel {
    fn n_inputs(&self) -> usize {
        1
    }
    fn n_outputs(&self) -> usize {
        1
    }
    fn eval(&self, s: Complex64) -> Result<CMat> {
        Ok(CMat::from_element(1, 1, self.transfer(s)?))
    }
}

impl TransferSource for StrandedConductorModel {
    fn n_inputs(&self) -> usize {
        2
    }
    fn n_outputs(&self) -> usize {
        2
    }
    fn eval(&self, s: Complex64) -> Result<CMat> {
        self.transfer(s)
    }
}

impl TransferSource for DeviceBundle {
    fn n_inputs(&self) -> usize {
        self.n_ports()
    }
    fn n_outputs(&self) -> usize {
        match self {
            DeviceBundle::Descriptor(d) => d.n_outputs(),
            other => other.n_ports(),
        }
    }
    fn eval(&self, s: Complex64) -> Result<CMat> {
        match self {
            DeviceBundle::Descriptor(d) => d.eval(s),
            DeviceBundle::Solid(m) => m.eval(s),
            DeviceBundle::Stranded(m) => m.eval(s),
        }
    }
    fn eval_kronecker(&self, m: &CMat) -> Option<Result<CMat>> {
        match self {
            DeviceBundle::Descriptor(d) => d.eval_kronecker(m),
            _ => None,
        }
    }
}

/// A transfer function given by a closure.
pub struct FnTransfer<F> {
    inputs: usize,
    outputs: usize,
    f: F,
}

impl<F> FnTransfer<F>
where
    F: Fn(Complex64) -> Result<CMat> + Sync,
{
    pub fn new(outputs: usize, inputs: usize, f: F) -> Self {
        FnTransfer { inputs, outputs, f }
    }
}

/// Scalar transfer function from a closure returning a single value.
pub fn scalar_transfer<G>(g: G) -> FnTransfer<impl Fn(Complex64) -> Result<CMat> + Sync>
where
    G: Fn(Complex64) -> Complex64 + Sync,
{
    FnTransfer::new(1, 1, move |s| Ok(CMat::from_element(1, 1, g(s))))
}

impl<F> TransferSource for FnTransfer<F>
where
    F: Fn(Complex64) -> Result<CMat> + Sync,
{
    fn n_inputs(&self) -> usize {
        self.inputs
    }
    fn n_outputs(&self) -> usize {
        self.outputs
    }
    fn eval(&self, s: Complex64) -> Result<CMat> {
        (self.f)(s)
    }
}

/// Eigenvalues and a unit-column eigenbasis of a small complex matrix.
pub fn eigen_decompose(m: &CMat) -> Result<(Vec<Complex64>, CMat)> {
    let n = m.nrows();
    let schur = Schur::try_new(m.clone(), 1e-15, 0)
        .ok_or(Error::IllConditionedEigenbasis { cond: f64::INFINITY })?;
    let (q, t) = schur.unpack();
    let lambda: Vec<Complex64> = (0..n).map(|k| t[(k, k)]).collect();
    let scale = t.iter().map(|v| v.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut vt = CMat::zeros(n, n);
    for k in 0..n {
        vt[(k, k)] = Complex64::new(1.0, 0.0);
        for j in (0..k).rev() {
            let mut acc = Complex64::new(0.0, 0.0);
            for l in j + 1..=k {
                acc += t[(j, l)] * vt[(l, k)];
            }
            let d = t[(j, j)] - lambda[k];
            if d.norm() <= 1e-14 * scale {
                return Err(Error::IllConditionedEigenbasis { cond: f64::INFINITY });
            }
            vt[(j, k)] = -acc / d;
        }
        let nrm = vt.column(k).norm();
        vt.column_mut(k).unscale_mut(nrm);
    }
    Ok((lambda, q * vt))
}

/// `K(M) = V diag(K(λ_1), …, K(λ_s)) V⁻¹`, stage-major block layout
/// `(s·q) × (s·p)`.
pub fn transfer_of_matrix<T: TransferSource + ?Sized>(k: &T, m: &CMat) -> Result<CMat> {
    let s = m.nrows();
    let (lambda, v) = eigen_decompose(m)?;
    let sv = SVD::new(v.clone(), false, false).singular_values;
    let cond = if sv.min() > 0.0 { sv.max() / sv.min() } else { f64::INFINITY };
    if !(cond <= EIGENBASIS_COND_MAX) {
        return Err(Error::IllConditionedEigenbasis { cond });
    }
    let v_inv = DenseLu::factor(v.clone())
        .map_err(|_| Error::IllConditionedEigenbasis { cond })?
        .solve_mat(&CMat::identity(s, s));
    let (q, p) = (k.n_outputs(), k.n_inputs());
    let mut out = CMat::zeros(s * q, s * p);
    for (idx, &lam) in lambda.iter().enumerate() {
        let kl = k.eval(lam)?;
        for i in 0..s {
            for j in 0..s {
                let w = v[(i, idx)] * v_inv[(idx, j)];
                let mut blk = out.view_mut((i * q, j * p), (q, p));
                blk.zip_apply(&kl, |o, kv| *o += w * kv);
            }
        }
    }
    Ok(out)
}

/// `(I⊗Cᵀ)(M⊗E + I⊗A)⁻¹(I⊗B)` by one factorization of the `s·n_z` system.
pub fn kronecker_transfer_eval(sys: &DescriptorSystem, m: &CMat) -> Result<CMat> {
    bump_transfer_count();
    let s = m.nrows();
    let n = sys.n_states();
    let (p, q) = (sys.n_inputs(), sys.n_outputs());
    let mut big = CMat::zeros(s * n, s * n);
    for i in 0..s {
        for j in 0..s {
            let mij = m[(i, j)];
            if mij == Complex64::new(0.0, 0.0) && i != j {
                continue;
            }
            for r in 0..n {
                for c in 0..n {
                    let mut v = mij * sys.e()[(r, c)];
                    if i == j {
                        v += sys.a()[(r, c)];
                    }
                    big[(i * n + r, j * n + c)] = v;
                }
            }
        }
    }
    let lu = DenseLu::factor(big).map_err(|e| Error::SingularPencil {
        s: m[(0, 0)],
        pivot: e.pivot,
        threshold: e.threshold,
    })?;
    let mut rhs = CMat::zeros(s * n, s * p);
    for i in 0..s {
        for r in 0..n {
            for c in 0..p {
                rhs[(i * n + r, i * p + c)] = Complex64::new(sys.b()[(r, c)], 0.0);
            }
        }
    }
    let x = lu.solve_mat(&rhs);
    let mut out = CMat::zeros(s * q, s * p);
    for i in 0..s {
        for oq in 0..q {
            for col in 0..s * p {
                let mut acc = Complex64::new(0.0, 0.0);
                for r in 0..n {
                    let cv = sys.c()[(r, oq)];
                    if cv != 0.0 {
                        acc += x[(i * n + r, col)] * cv;
                    }
                }
                out[(i * q + oq, col)] = acc;
            }
        }
    }
    Ok(out)
}

/// Matrix-argument evaluation with automatic fallback to the Kronecker
/// solve when the eigenbasis is ill-conditioned.
pub fn transfer_at_matrix<T: TransferSource + ?Sized>(k: &T, m: &CMat) -> Result<CMat> {
    match transfer_of_matrix(k, m) {
        Err(Error::IllConditionedEigenbasis { cond }) => match k.eval_kronecker(m) {
            Some(r) => r,
            None => Err(Error::IllConditionedEigenbasis { cond }),
        },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::RMat;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn diagonal_argument() {
        let k = scalar_transfer(|s| c(1.0, 0.0) / s);
        let m = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(2.0, 0.0), c(3.0, 0.0)]));
        let r = transfer_of_matrix(&k, &m).unwrap();
        assert!((r[(0, 0)] - c(0.5, 0.0)).norm() < 1e-15);
        assert!((r[(1, 1)] - c(1.0 / 3.0, 0.0)).norm() < 1e-15);
        assert!(r[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn scalar_argument() {
        let k = scalar_transfer(|s| c(1.0, 0.0) / (s + 1.0));
        let z = c(0.4, 1.3);
        let r = transfer_of_matrix(&k, &CMat::from_element(1, 1, z)).unwrap();
        assert!((r[(0, 0)] - c(1.0, 0.0) / (z + 1.0)).norm() < 1e-15);
    }

    #[test]
    fn defective_matrix_is_rejected() {
        let k = scalar_transfer(|s| s);
        let m = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(transfer_of_matrix(&k, &m), Err(Error::IllConditionedEigenbasis { .. })));
    }

    #[test]
    fn kronecker_collapses_for_one_stage() {
        let sys = DescriptorSystem::new(
            RMat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
            RMat::from_row_slice(2, 2, &[2.0, 1.0, -1.0, 3.0]),
            RMat::from_row_slice(2, 1, &[1.0, 0.5]),
            RMat::from_row_slice(2, 1, &[0.0, 1.0]),
        )
        .unwrap();
        let z = c(0.3, 0.9);
        let a = kronecker_transfer_eval(&sys, &CMat::from_element(1, 1, z)).unwrap();
        let b = sys.transfer(z).unwrap();
        assert!((a - b).camax() < 1e-14);
    }

    #[test]
    fn fallback_used_for_defective_argument() {
        let sys = DescriptorSystem::new(
            RMat::identity(1, 1),
            RMat::identity(1, 1),
            RMat::identity(1, 1),
            RMat::identity(1, 1),
        )
        .unwrap();
        let m = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let r = transfer_at_matrix(&sys, &m).unwrap();
        // (M + I)^{-1} for the Jordan block [[1,1],[0,1]]
        assert!((r[(0, 0)] - c(0.5, 0.0)).norm() < 1e-15);
        assert!((r[(0, 1)] - c(-0.25, 0.0)).norm() < 1e-15);
        assert!(r[(1, 0)].norm() < 1e-15);
    }
}
