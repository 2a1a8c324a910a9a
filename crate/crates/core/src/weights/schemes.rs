//! Time-stepping schemes and their generating symbols.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{CMat, DenseLu, RMat, RVec};

/// Backward differentiation formula with coefficients ordered so that the
/// scheme reads `(1/τ) Σ_k α_k y_{n-m+k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BdfScheme {
    alpha: Vec<f64>,
}

impl BdfScheme {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.len() < 2 {
            return Err(Error::Precondition("BDF scheme needs at least two coefficients".into()));
        }
        if alpha[alpha.len() - 1] == 0.0 {
            return Err(Error::Precondition("leading BDF coefficient is zero".into()));
        }
        Ok(BdfScheme { alpha })
    }

    /// Implicit Euler: `α = (-1, 1)`.
    pub fn bdf1() -> Self {
        BdfScheme { alpha: vec![-1.0, 1.0] }
    }

    /// Two-step BDF: `α = (1/2, -2, 3/2)`.
    pub fn bdf2() -> Self {
        BdfScheme { alpha: vec![0.5, -2.0, 1.5] }
    }

    pub fn by_steps(m: usize) -> Result<Self> {
        match m {
            1 => Ok(Self::bdf1()),
            2 => Ok(Self::bdf2()),
            _ => Err(Error::Config(format!("BDF-{m} is not provided (use 1 or 2)"))),
        }
    }

    /// Number of steps `m`.
    pub fn steps(&self) -> usize {
        self.alpha.len() - 1
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Characteristic polynomial `δ(ξ) = Σ_k α_k ξ^{m-k}`.
    pub fn delta(&self, xi: Complex64) -> Complex64 {
        // Horner from the ξ^m coefficient (α_0) down to α_m.
        self.alpha.iter().fold(Complex64::new(0.0, 0.0), |acc, &a| acc * xi + a)
    }
}

pub fn bdf_delta(scheme: &BdfScheme, xi: Complex64) -> Complex64 {
    scheme.delta(xi)
}

/// Butcher tableau `(𝒜, β, c)` of an implicit Runge-Kutta method.
#[derive(Debug, Clone, PartialEq)]
pub struct ButcherTableau {
    a: RMat,
    b: RVec,
    c: RVec,
    a_inv: RMat,
}

const TABLEAU_TOL: f64 = 1e-14;

impl ButcherTableau {
    /// Builds a tableau and checks invertibility of `𝒜`, row sums, and
    /// stiff accuracy (last row of `𝒜` equal to `βᵀ`).
    pub fn new(a: RMat, b: RVec, c: RVec) -> Result<Self> {
        let s = b.len();
        if a.shape() != (s, s) || c.len() != s || s == 0 {
            return Err(Error::Dimension("inconsistent Butcher tableau".into()));
        }
        for i in 0..s {
            let row: f64 = a.row(i).sum();
            if (row - c[i]).abs() > TABLEAU_TOL {
                return Err(Error::Precondition(format!("row {i} of A does not sum to c_{i}")));
            }
            if (a[(s - 1, i)] - b[i]).abs() > TABLEAU_TOL {
                return Err(Error::Precondition("tableau is not stiffly accurate".into()));
            }
        }
        let a_inv = a
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Precondition("Runge-Kutta matrix is singular".into()))?;
        Ok(ButcherTableau { a, b, c, a_inv })
    }

    /// Radau IIA with `s ∈ {1, 2, 3}` stages (orders 1, 3, 5).
    pub fn radau_iia(s: usize) -> Result<Self> {
        let tab = match s {
            1 => Self::new(
                RMat::from_element(1, 1, 1.0),
                RVec::from_element(1, 1.0),
                RVec::from_element(1, 1.0),
            )?,
            2 => Self::new(
                RMat::from_row_slice(2, 2, &[5.0 / 12.0, -1.0 / 12.0, 0.75, 0.25]),
                RVec::from_vec(vec![0.75, 0.25]),
                RVec::from_vec(vec![1.0 / 3.0, 1.0]),
            )?,
            3 => {
                let r6 = 6.0f64.sqrt();
                Self::new(
                    RMat::from_row_slice(
                        3,
                        3,
                        &[
                            (88.0 - 7.0 * r6) / 360.0,
                            (296.0 - 169.0 * r6) / 1800.0,
                            (-2.0 + 3.0 * r6) / 225.0,
                            (296.0 + 169.0 * r6) / 1800.0,
                            (88.0 + 7.0 * r6) / 360.0,
                            (-2.0 - 3.0 * r6) / 225.0,
                            (16.0 - r6) / 36.0,
                            (16.0 + r6) / 36.0,
                            1.0 / 9.0,
                        ],
                    ),
                    RVec::from_vec(vec![(16.0 - r6) / 36.0, (16.0 + r6) / 36.0, 1.0 / 9.0]),
                    RVec::from_vec(vec![(4.0 - r6) / 10.0, (4.0 + r6) / 10.0, 1.0]),
                )?
            }
            _ => return Err(Error::Config(format!("Radau IIA with {s} stages is not provided"))),
        };
        tab.check_quadrature_order()?;
        Ok(tab)
    }

    fn check_quadrature_order(&self) -> Result<()> {
        let s = self.stages();
        let moment = |k: i32| -> f64 { self.b.iter().zip(self.c.iter()).map(|(b, c)| b * c.powi(k)).sum() };
        let mut ok = (moment(0) - 1.0).abs() < TABLEAU_TOL;
        if s >= 2 {
            ok &= (moment(1) - 0.5).abs() < TABLEAU_TOL;
            ok &= (moment(2) - 1.0 / 3.0).abs() < TABLEAU_TOL;
        }
        if ok {
            Ok(())
        } else {
            Err(Error::Precondition("tableau fails its quadrature order conditions".into()))
        }
    }

    pub fn stages(&self) -> usize {
        self.b.len()
    }
    pub fn a(&self) -> &RMat {
        &self.a
    }
    pub fn b(&self) -> &RVec {
        &self.b
    }
    pub fn c(&self) -> &RVec {
        &self.c
    }
    pub fn a_inv(&self) -> &RMat {
        &self.a_inv
    }

    /// `Δ(ξ) = ((ξ/(1-ξ)) 𝟙βᵀ + 𝒜)⁻¹`, defined for `|ξ| < 1`.
    pub fn symbol(&self, xi: Complex64) -> Result<CMat> {
        if xi.norm() >= 1.0 {
            return Err(Error::Precondition(format!("RK symbol needs |xi| < 1, got {xi}")));
        }
        let s = self.stages();
        let f = xi / (Complex64::new(1.0, 0.0) - xi);
        let inner = CMat::from_fn(s, s, |i, j| f * self.b[j] + self.a[(i, j)]);
        let lu = DenseLu::factor(inner).map_err(|_| Error::SingularSymbol { xi })?;
        Ok(lu.solve_mat(&CMat::identity(s, s)))
    }
}

pub fn rk_symbol(tab: &ButcherTableau, xi: Complex64) -> Result<CMat> {
    tab.symbol(xi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn bdf1_symbol_is_one_minus_xi() {
        let s = BdfScheme::bdf1();
        assert_eq!(s.delta(c(0.0, 0.0)), c(1.0, 0.0));
        let xi = c(0.3, -0.4);
        assert!((s.delta(xi) - (c(1.0, 0.0) - xi)).norm() < 1e-15);
    }

    #[test]
    fn bdf2_symbol_values() {
        let s = BdfScheme::bdf2();
        assert!(s.delta(c(1.0, 0.0)).norm() < 1e-15);
        assert_eq!(s.delta(c(0.0, 0.0)), c(1.5, 0.0));
        // δ(ξ) = Σ_{j=1}^{2} (1-ξ)^j / j
        let xi = c(0.2, 0.7);
        let one_m = c(1.0, 0.0) - xi;
        assert!((s.delta(xi) - (one_m + one_m * one_m / 2.0)).norm() < 1e-15);
    }

    #[test]
    fn bdf_consistency_limits() {
        for s in [BdfScheme::bdf1(), BdfScheme::bdf2()] {
            assert!(s.delta(c(1.0, 0.0)).norm() < 1e-15);
            for h in [1e-3, 1e-4] {
                let d = s.delta(c((-h as f64).exp(), 0.0)) / h;
                assert!((d.re - 1.0).abs() <= 2.0 * h, "delta(e^-h)/h = {d}");
            }
        }
    }

    #[test]
    fn radau_tableaus_validate() {
        for s in 1..=3 {
            let t = ButcherTableau::radau_iia(s).unwrap();
            assert_eq!(t.stages(), s);
            let id = t.a() * t.a_inv();
            assert!((id - RMat::identity(s, s)).amax() < 1e-13);
        }
        assert!(ButcherTableau::radau_iia(4).is_err());
    }

    #[test]
    fn radau1_symbol_equals_bdf1() {
        let t = ButcherTableau::radau_iia(1).unwrap();
        for xi in [c(0.0, 0.0), c(0.5, 0.2), c(-0.7, 0.1)] {
            let d = t.symbol(xi).unwrap();
            assert!((d[(0, 0)] - (c(1.0, 0.0) - xi)).norm() < 1e-15);
        }
    }

    #[test]
    fn symbol_at_zero_is_inverse_of_a() {
        let t = ButcherTableau::radau_iia(3).unwrap();
        let d = t.symbol(c(0.0, 0.0)).unwrap();
        let expect = t.a_inv().map(|v| c(v, 0.0));
        assert!((d - expect).camax() < 1e-12);
    }

    #[test]
    fn radau2_symbol_matches_closed_form_inverse() {
        let t = ButcherTableau::radau_iia(2).unwrap();
        let xi = 0.3;
        let f = xi / (1.0 - xi);
        let m = [
            [f * 0.75 + 5.0 / 12.0, f * 0.25 - 1.0 / 12.0],
            [f * 0.75 + 0.75, f * 0.25 + 0.25],
        ];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let inv = [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]];
        let d = t.symbol(c(xi, 0.0)).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((d[(i, j)] - c(inv[i][j], 0.0)).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn symbol_rejects_xi_outside_disk() {
        let t = ButcherTableau::radau_iia(2).unwrap();
        assert!(t.symbol(c(1.0, 0.0)).is_err());
    }
}
