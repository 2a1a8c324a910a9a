//! (1,1)-rational fit `k(s) ≈ a - s/(cs + d)` and its R-R-L equivalent
//! circuit.

use std::fmt::Write as _;

use nalgebra::SVD;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{RMat, RVec};
use crate::lti::DescriptorSystem;

/// Relative singular-value cutoff of the linearized problem.
const RANK_RTOL: f64 = 1e-10;
const SK_ITER: usize = 8;
const GN_MAX_ITER: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RationalEC {
    pub a: f64,
    pub c: f64,
    pub d: f64,
}

impl RationalEC {
    pub fn eval(&self, s: Complex64) -> Complex64 {
        Complex64::new(self.a, 0.0) - s / (s * self.c + self.d)
    }
}

/// `(α s + β)/(s + δ)`, the same family normalized by `c`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Pole {
    alpha: f64,
    beta: f64,
    delta: f64,
}

impl Pole {
    fn eval(&self, s: Complex64) -> Complex64 {
        (s * self.alpha + self.beta) / (s + self.delta)
    }

    fn cost(&self, samples: &[(Complex64, Complex64)]) -> f64 {
        samples.iter().map(|&(s, k)| (self.eval(s) - k).norm_sqr()).sum()
    }

    /// `a = β/δ`, `c = 1/(a − α)`, `d = δ c`.
    fn to_rational(self) -> Result<RationalEC> {
        let a = self.beta / self.delta;
        let c = 1.0 / (a - self.alpha);
        let d = self.delta * c;
        if !(a.is_finite() && c.is_finite() && d.is_finite()) {
            return Err(Error::RankDeficient);
        }
        Ok(RationalEC { a, c, d })
    }
}

/// `R2` in series with `R1 ∥ L1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalentCircuit {
    pub r1: f64,
    pub r2: f64,
    pub l1: f64,
}

/// Sum of squared deviations `Σ |k_EC(s_j) - k_j|²`.
pub fn fit_residual(fit: &RationalEC, samples: &[(Complex64, Complex64)]) -> f64 {
    samples.iter().map(|&(s, k)| (fit.eval(s) - k).norm_sqr()).sum()
}

fn residual_vec(p: &Pole, samples: &[(Complex64, Complex64)]) -> RVec {
    let mut r = RVec::zeros(2 * samples.len());
    for (j, &(s, k)) in samples.iter().enumerate() {
        let e = p.eval(s) - k;
        r[2 * j] = e.re;
        r[2 * j + 1] = e.im;
    }
    r
}

fn jacobian(p: &Pole, samples: &[(Complex64, Complex64)]) -> RMat {
    let mut jac = RMat::zeros(2 * samples.len(), 3);
    for (j, &(s, _)) in samples.iter().enumerate() {
        let den = s + p.delta;
        let cols = [s / den, Complex64::new(1.0, 0.0) / den, -(s * p.alpha + p.beta) / (den * den)];
        for (c, v) in cols.iter().enumerate() {
            jac[(2 * j, c)] = v.re;
            jac[(2 * j + 1, c)] = v.im;
        }
    }
    jac
}

/// Weighted linear least squares on `α s + β − δ k = k s`, rows divided
/// by `|s + δ_prev|`.
fn linearized(samples: &[(Complex64, Complex64)], delta_prev: Option<f64>) -> Result<Pole> {
    let m = samples.len();
    let mut lhs = RMat::zeros(2 * m, 3);
    let mut rhs = RVec::zeros(2 * m);
    for (j, &(s, k)) in samples.iter().enumerate() {
        let w = delta_prev.map_or(1.0, |d| 1.0 / (s + d).norm().max(f64::MIN_POSITIVE));
        let row = [s, Complex64::new(1.0, 0.0), -k];
        for (c, v) in row.iter().enumerate() {
            lhs[(2 * j, c)] = w * v.re;
            lhs[(2 * j + 1, c)] = w * v.im;
        }
        let b = k * s * w;
        rhs[2 * j] = b.re;
        rhs[2 * j + 1] = b.im;
    }
    let scales: Vec<f64> = lhs.column_iter().map(|c| c.norm().max(f64::MIN_POSITIVE)).collect();
    for (c, &sc) in scales.iter().enumerate() {
        lhs.column_mut(c).scale_mut(1.0 / sc);
    }
    let svd = SVD::new(lhs, true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.min() <= RANK_RTOL * smax {
        return Err(Error::RankDeficient);
    }
    let x = svd.solve(&rhs, 0.0).map_err(|_| Error::RankDeficient)?;
    Ok(Pole { alpha: x[0] / scales[0], beta: x[1] / scales[1], delta: x[2] / scales[2] })
}

/// Sanathanan-Koerner iterations on the linearized problem, followed by
/// Gauss-Newton on the true residual.
pub fn fit_rational_11(samples: &[(Complex64, Complex64)]) -> Result<RationalEC> {
    if samples.len() < 3 {
        return Err(Error::Precondition(format!("need at least 3 samples, got {}", samples.len())));
    }
    for (i, (s, _)) in samples.iter().enumerate() {
        if samples[..i].iter().any(|(t, _)| t == s) {
            return Err(Error::Precondition(format!("duplicate sample point s = {s}")));
        }
    }
    let mut p = linearized(samples, None)?;
    let mut cost = p.cost(samples);
    for _ in 0..SK_ITER {
        let q = linearized(samples, Some(p.delta))?;
        let qc = q.cost(samples);
        if !(qc < cost) {
            break;
        }
        p = q;
        cost = qc;
    }

    for _ in 0..GN_MAX_ITER {
        let r = residual_vec(&p, samples);
        let jac = jacobian(&p, samples);
        let step = match SVD::new(jac, true, true).solve(&r, 1e-14) {
            Ok(s) => s,
            Err(_) => break,
        };
        let mut lambda = 1.0;
        let mut improved = false;
        while lambda > 1e-6 {
            let trial =
                Pole { alpha: p.alpha - lambda * step[0], beta: p.beta - lambda * step[1], delta: p.delta - lambda * step[2] };
            let tc = trial.cost(samples);
            if tc.is_finite() && tc < cost {
                p = trial;
                improved = cost - tc > 1e-15 * cost;
                cost = tc;
                break;
            }
            lambda *= 0.5;
        }
        if !improved {
            break;
        }
    }
    p.to_rational()
}

pub fn to_equivalent_circuit(fit: &RationalEC) -> Result<EquivalentCircuit> {
    let RationalEC { a, c, d } = *fit;
    let den1 = c * a * a - a;
    if a == 0.0 || d == 0.0 || den1 == 0.0 || !(a.is_finite() && c.is_finite() && d.is_finite()) {
        return Err(Error::DegenerateParameters(format!("a = {a}, c = {c}, d = {d}")));
    }
    Ok(EquivalentCircuit { r1: 1.0 / den1, r2: 1.0 / a, l1: 1.0 / (a * a * d) })
}

impl EquivalentCircuit {
    /// Admittance of the network seen from its port.
    pub fn admittance(&self, s: Complex64) -> Complex64 {
        let par = (s * self.l1 * self.r1) / (s * self.l1 + self.r1);
        Complex64::new(1.0, 0.0) / (par + self.r2)
    }

    /// Descriptor form with `z = (u_2, j_L, j)`, input the port voltage and
    /// output the port current.
    pub fn to_descriptor(&self) -> Result<DescriptorSystem> {
        let (g1, g2) = (1.0 / self.r1, 1.0 / self.r2);
        let e = RMat::from_row_slice(3, 3, &[0.0, self.l1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let a = RMat::from_row_slice(3, 3, &[-1.0, 0.0, 0.0, g1 + g2, 1.0, 0.0, g2, 0.0, 1.0]);
        let b = RMat::from_column_slice(3, 1, &[0.0, g2, g2]);
        let c = RMat::from_column_slice(3, 1, &[0.0, 0.0, 1.0]);
        DescriptorSystem::new(e, a, b, c)
    }

    /// Netlist of the network driven by `V1 1 0 sin amp omega`.
    pub fn netlist(&self, amp: f64, omega: f64) -> String {
        format!(
            "V1 1 0 sin {amp:e} {omega:.17e}\nR2 1 2 {:.17e}\nR1 2 0 {:.17e}\nL1 2 0 {:.17e}\n",
            self.r2, self.r1, self.l1
        )
    }
}

/// `n` logarithmically spaced points in `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.log10(), hi.log10());
            (0..n).map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64)).collect()
        }
    }
}

/// Samples `k(iω)` on the imaginary axis.
pub fn sample_imag_axis(
    k: impl Fn(Complex64) -> Result<Complex64>,
    omegas: &[f64],
) -> Result<Vec<(Complex64, Complex64)>> {
    omegas
        .iter()
        .map(|&w| {
            let s = Complex64::new(0.0, w);
            Ok((s, k(s)?))
        })
        .collect()
}

/// CSV with columns `omega,mag_db,phase_deg`.
pub fn bode_csv(samples: &[(Complex64, Complex64)]) -> String {
    let mut out = String::from("omega,mag_db,phase_deg\n");
    for (s, k) in samples {
        let _ = writeln!(out, "{:.16e},{:.16e},{:.16e}", s.im, 20.0 * k.norm().log10(), k.arg().to_degrees());
    }
    out
}

/// Plain-text fit report.
pub fn fit_report(fit: &RationalEC, samples: &[(Complex64, Complex64)]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "a = {:.10e}", fit.a);
    let _ = writeln!(out, "c = {:.10e}", fit.c);
    let _ = writeln!(out, "d = {:.10e}", fit.d);
    let _ = writeln!(out, "residual = {:.6e}", fit_residual(fit, samples));
    match to_equivalent_circuit(fit) {
        Ok(ec) => {
            let _ = writeln!(out, "R1 = {:.10e}", ec.r1);
            let _ = writeln!(out, "R2 = {:.10e}", ec.r2);
            let _ = writeln!(out, "L1 = {:.10e}", ec.l1);
        }
        Err(e) => {
            let _ = writeln!(out, "equivalent circuit: {e}");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exact_samples(p: RationalEC, n: usize) -> Vec<(Complex64, Complex64)> {
        log_grid(0.01, 100.0, n)
            .into_iter()
            .map(|w| {
                let s = Complex64::new(0.0, w);
                (s, p.eval(s))
            })
            .collect()
    }

    #[test]
    fn recovers_exact_parameters() {
        let p = RationalEC { a: 2.0, c: 3.0, d: 4.0 };
        let f = fit_rational_11(&exact_samples(p, 8)).unwrap();
        assert!((f.a - 2.0).abs() <= 1e-8 * 2.0);
        assert!((f.c - 3.0).abs() <= 1e-8 * 3.0);
        assert!((f.d - 4.0).abs() <= 1e-8 * 4.0);
    }

    #[test]
    fn constant_data() {
        let samples: Vec<_> = log_grid(0.1, 10.0, 6).into_iter().map(|w| (Complex64::new(0.0, w), Complex64::new(1.5, 0.0))).collect();
        match fit_rational_11(&samples) {
            Err(Error::RankDeficient) => {}
            Ok(f) => assert!(fit_residual(&f, &samples) < 1e-10),
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn preconditions() {
        let s = Complex64::new(0.0, 1.0);
        assert!(fit_rational_11(&[(s, s), (s * 2.0, s)]).is_err());
        assert!(fit_rational_11(&[(s, s), (s, s), (s * 2.0, s)]).is_err());
    }

    #[test]
    fn unit_circuit() {
        let ec = to_equivalent_circuit(&RationalEC { a: 1.0, c: 2.0, d: 1.0 }).unwrap();
        assert_eq!(ec, EquivalentCircuit { r1: 1.0, r2: 1.0, l1: 1.0 });
        assert!(matches!(to_equivalent_circuit(&RationalEC { a: 0.0, c: 2.0, d: 1.0 }), Err(Error::DegenerateParameters(_))));
        assert!(matches!(to_equivalent_circuit(&RationalEC { a: 1.0, c: 1.0, d: 1.0 }), Err(Error::DegenerateParameters(_))));
    }

    #[test]
    fn circuit_matches_rational_form() {
        let p = RationalEC { a: 0.11, c: 9.5, d: 3.2 };
        let ec = to_equivalent_circuit(&p).unwrap();
        let sys = ec.to_descriptor().unwrap();
        for w in log_grid(1e-2, 1e3, 32) {
            let s = Complex64::new(0.0, w);
            let k = p.eval(s);
            assert!((ec.admittance(s) - k).norm() <= 1e-10 * k.norm());
            assert!((sys.transfer(s).unwrap()[(0, 0)] - k).norm() <= 1e-10 * k.norm());
        }
    }

    #[test]
    fn bode_layout() {
        let csv = bode_csv(&[(Complex64::new(0.0, 1.0), Complex64::new(0.0, 10.0))]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "omega,mag_db,phase_deg");
        let v: Vec<f64> = lines[1].split(',').map(|t| t.parse().unwrap()).collect();
        assert_eq!(v[0], 1.0);
        assert!((v[1] - 20.0).abs() < 1e-12 && (v[2] - 90.0).abs() < 1e-12);
    }
}
