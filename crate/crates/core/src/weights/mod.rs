//! Convolution-quadrature weights from transfer-function samples on a
//! circle `|ξ| = ρ`, combined with a multistep or Runge-Kutta symbol.

mod contour;
mod matfn;
mod schemes;
mod table;

pub use contour::{choose_contour, ContourMode, ContourParams, DEFAULT_EPS};
pub use matfn::{
    eigen_decompose, kronecker_transfer_eval, scalar_transfer, transfer_at_matrix, transfer_of_matrix,
    FnTransfer, TransferSource, EIGENBASIS_COND_MAX,
};
pub use schemes::{bdf_delta, rk_symbol, BdfScheme, ButcherTableau};
pub use table::{CQWeightTable, WeightKind};

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::linalg::{CMat, RMat};

/// Largest accepted ratio of imaginary residue to weight magnitude.
pub const IMAG_RESIDUE_RTOL: f64 = 1e-8;

/// Samples `f(l, ξ_l)` at `ξ_l = ρ e^{2πil/L}` for `l = 0..=L/2`, completes
/// the rest by conjugation and returns the real parts of the first `N`
/// scaled Fourier coefficients together with the relative imaginary
/// residue.
fn contour_sweep<F>(params: &ContourParams, rows: usize, cols: usize, mut f: F) -> Result<(Vec<RMat>, f64)>
where
    F: FnMut(Complex64) -> Result<CMat>,
{
    params.validate()?;
    let l_pts = params.points;
    let half = l_pts / 2;
    let mut samples = Vec::with_capacity(half + 1);
    for l in 0..=half {
        let phi = 2.0 * PI * l as f64 / l_pts as f64;
        let xi = Complex64::from_polar(params.rho, phi);
        let k = f(xi).map_err(|e| match e {
            Error::SingularPencil { s, .. } => Error::SingularContourPoint { index: l, s },
            other => other,
        })?;
        if k.shape() != (rows, cols) {
            return Err(Error::Dimension(format!(
                "transfer sample is {}x{}, expected {rows}x{cols}",
                k.nrows(),
                k.ncols()
            )));
        }
        samples.push(k);
    }

    let fft = FftPlanner::new().plan_fft_forward(l_pts);
    let mut coeffs = vec![CMat::zeros(rows, cols); params.steps];
    let mut buf = vec![Complex64::new(0.0, 0.0); l_pts];
    for i in 0..rows {
        for j in 0..cols {
            for (l, b) in buf.iter_mut().enumerate() {
                *b = if l <= half { samples[l][(i, j)] } else { samples[l_pts - l][(i, j)].conj() };
            }
            fft.process(&mut buf);
            for (n, c) in coeffs.iter_mut().enumerate() {
                c[(i, j)] = buf[n % l_pts] / l_pts as f64;
            }
        }
    }

    let mut residue: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for c in &coeffs {
        for v in c.iter() {
            residue = residue.max(v.im.abs());
            scale = scale.max(v.norm());
        }
    }
    if residue > IMAG_RESIDUE_RTOL * scale {
        return Err(Error::ImaginaryResidue { residue, scale });
    }
    let ln_rho = params.rho.ln();
    let weights = coeffs
        .into_iter()
        .enumerate()
        .map(|(n, c)| {
            let amp = (-(n as f64) * ln_rho).exp();
            c.map(|v| v.re * amp)
        })
        .collect();
    let rel = if scale > 0.0 { residue / scale } else { 0.0 };
    Ok((weights, rel))
}

/// `ω̃_n = (1/(Lρⁿ)) Σ_l K(δ(ξ_l)/τ) ξ_l^{-n} ρⁿ` for `n = 0..N-1`.
pub fn bdf_weights<T: TransferSource + ?Sized>(
    k: &T,
    scheme: &BdfScheme,
    params: &ContourParams,
) -> Result<CQWeightTable> {
    let (p, q) = (k.n_inputs(), k.n_outputs());
    let tau = params.tau;
    let (weights, residue) = contour_sweep(params, q, p, |xi| k.eval(scheme.delta(xi) / tau))?;
    CQWeightTable::new(
        WeightKind::Bdf { m: scheme.steps() },
        p,
        q,
        tau,
        params.rho,
        params.points,
        weights,
        residue,
    )
}

/// Stage-blocked weights `W̃_n` from `K(Δ(ξ_l)/τ)`.
pub fn rk_weights<T: TransferSource + ?Sized>(
    k: &T,
    tab: &ButcherTableau,
    params: &ContourParams,
) -> Result<CQWeightTable> {
    let (p, q, s) = (k.n_inputs(), k.n_outputs(), tab.stages());
    let tau = params.tau;
    let (weights, residue) = contour_sweep(params, s * q, s * p, |xi| {
        let m = tab.symbol(xi)? / Complex64::new(tau, 0.0);
        transfer_at_matrix(k, &m)
    })?;
    CQWeightTable::new(WeightKind::Rk { s }, p, q, tau, params.rho, params.points, weights, residue)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::{transfer_eval_count, DescriptorSystem};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn constant_kernel() {
        let k = scalar_transfer(|_| c(1.0));
        let p = ContourParams::new(0.8, 32, 0.1, 8, 1e-16).unwrap();
        let t = bdf_weights(&k, &BdfScheme::bdf2(), &p).unwrap();
        assert!((t.weight(0)[(0, 0)] - 1.0).abs() < 1e-14);
        for n in 1..8 {
            assert!(t.weight(n)[(0, 0)].abs() <= 1e-12 / 0.8f64.powi(n as i32));
        }
    }

    #[test]
    fn integrator_kernel_gives_tau() {
        let k = scalar_transfer(|s| c(1.0) / s);
        // The trapezoidal rule aliases ω_{n+jL} ρ^{jL} onto ω̃_n.
        let p = ContourParams::new(0.8, 64, 0.1, 8, 1e-16).unwrap();
        let t = bdf_weights(&k, &BdfScheme::bdf1(), &p).unwrap();
        let aliased = 0.1 / (1.0 - 0.8f64.powi(64));
        for n in 0..8 {
            assert!((t.weight(n)[(0, 0)] - aliased).abs() <= 1e-14, "n = {n}");
        }
        let p = ContourParams::new(0.8, 128, 0.1, 8, 1e-16).unwrap();
        let t = bdf_weights(&k, &BdfScheme::bdf1(), &p).unwrap();
        for n in 0..8 {
            assert!((t.weight(n)[(0, 0)] - 0.1).abs() <= 1e-10, "n = {n}");
        }
    }

    #[test]
    fn half_sweep_evaluates_half_the_contour() {
        let sys = DescriptorSystem::new(
            RMat::identity(1, 1),
            RMat::identity(1, 1),
            RMat::identity(1, 1),
            RMat::identity(1, 1),
        )
        .unwrap();
        let p = ContourParams::new(0.9, 30, 0.1, 10, 1e-16).unwrap();
        let before = transfer_eval_count();
        bdf_weights(&sys, &BdfScheme::bdf1(), &p).unwrap();
        assert_eq!(transfer_eval_count() - before, 16);
    }

    #[test]
    fn radau1_equals_bdf1() {
        let k = scalar_transfer(|s| c(1.0) / (s * s + s * 0.3 + 2.0));
        let p = choose_contour(16, 1.0 / 16.0, DEFAULT_EPS, ContourMode::Experiment).unwrap();
        let a = bdf_weights(&k, &BdfScheme::bdf1(), &p).unwrap();
        let b = rk_weights(&k, &ButcherTableau::radau_iia(1).unwrap(), &p).unwrap();
        for n in 0..16 {
            assert!((a.weight(n) - b.weight(n)).amax() < 1e-12);
        }
    }

    #[test]
    fn singular_point_is_tagged() {
        let sys = DescriptorSystem::new(
            RMat::identity(1, 1),
            RMat::from_element(1, 1, -2.0),
            RMat::identity(1, 1),
            RMat::identity(1, 1),
        )
        .unwrap();
        // At l = 0 the point δ(ρ)/τ rounds to exactly 2, the pencil's eigenvalue.
        let p = ContourParams { rho: 1e-20, points: 4, tau: 0.5, steps: 2, eps: 1e-16 };
        match bdf_weights(&sys, &BdfScheme::bdf1(), &p) {
            Err(Error::SingularContourPoint { index, .. }) => assert_eq!(index, 0),
            other => panic!("unexpected {other:?}"),
        }
    }
}
