//! Synthetic electromagnetic devices on a 1D finite-difference grid.
//!
//! The domain `[-1, 1]` is split into `n_cells` cells with homogeneous
//! Dirichlet ends, leaving `n_cells - 1` interior nodes `x_i = -1 + i h`.
//! Conductors occupy the band `r_in ≤ |x| ≤ r_out`.

use crate::error::{Error, Result};
use crate::linalg::{RMat, RVec};
use crate::lti::{SolidConductorModel, StrandedConductorModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticEddyParams {
    pub n_cells: usize,
    pub sigma: f64,
    pub nu: f64,
    pub r_in: f64,
    pub r_out: f64,
}

impl Default for SyntheticEddyParams {
    fn default() -> Self {
        SyntheticEddyParams { n_cells: 200, sigma: 1.0, nu: 1.0, r_in: 1.0 / 3.0, r_out: 2.0 / 3.0 }
    }
}

impl SyntheticEddyParams {
    pub fn with_cells(n_cells: usize) -> Self {
        SyntheticEddyParams { n_cells, ..Self::default() }
    }

    pub fn h(&self) -> f64 {
        2.0 / self.n_cells as f64
    }

    /// Interior node coordinates.
    pub fn nodes(&self) -> Vec<f64> {
        let h = self.h();
        (1..self.n_cells).map(|i| -1.0 + i as f64 * h).collect()
    }

    fn validate(&self, min_cells: usize) -> Result<()> {
        if self.n_cells < min_cells {
            return Err(Error::Precondition(format!("n_cells = {} must be at least {min_cells}", self.n_cells)));
        }
        if !(self.sigma > 0.0 && self.nu > 0.0) {
            return Err(Error::Precondition("sigma and nu must be positive".into()));
        }
        if !(0.0 <= self.r_in && self.r_in < self.r_out && self.r_out <= 1.0) {
            return Err(Error::Precondition("conductor band must satisfy 0 ≤ r_in < r_out ≤ 1".into()));
        }
        Ok(())
    }

    fn in_band(&self, x: f64) -> bool {
        // Small slack so that nodes sitting on the band edges count.
        let slack = 1e-12;
        x.abs() >= self.r_in - slack && x.abs() <= self.r_out + slack
    }

    fn core(&self, mask: impl Fn(f64) -> bool) -> (RMat, RMat) {
        let h = self.h();
        let xs = self.nodes();
        let n = xs.len();
        let m = RMat::from_diagonal(&RVec::from_iterator(
            n,
            xs.iter().map(|&x| if mask(x) { self.sigma * h } else { 0.0 }),
        ));
        let k = RMat::from_fn(n, n, |i, j| {
            let c = self.nu / h;
            match i.abs_diff(j) {
                0 => 2.0 * c,
                1 => -c,
                _ => 0.0,
            }
        });
        (m, k)
    }
}

/// Solid conductor in both bands, driven through a contact potential `p`
/// that is constant on the conductor nodes with `Σ p_i h = 1`.
pub fn build_synthetic_eddy(params: &SyntheticEddyParams) -> Result<SolidConductorModel> {
    params.validate(4)?;
    let h = params.h();
    let xs = params.nodes();
    let (m, k) = params.core(|x| params.in_band(x));
    let n_c = xs.iter().filter(|&&x| params.in_band(x)).count();
    if n_c == 0 {
        return Err(Error::Precondition("grid has no nodes inside the conductor band".into()));
    }
    let pv = 1.0 / (n_c as f64 * h);
    let p = RVec::from_iterator(xs.len(), xs.iter().map(|&x| if params.in_band(x) { pv } else { 0.0 }));
    let b1 = p.map(|v| params.sigma * h * v);
    let b2 = params.sigma * p.iter().map(|v| v * v * h).sum::<f64>();
    SolidConductorModel::new(m, k, b1, b2)
}

/// Two-winding transformer: winding 1 fills the left band, winding 2 the
/// right band, each with unit discrete integral.
pub fn build_synthetic_transformer(n_cells: usize) -> Result<StrandedConductorModel> {
    let params = SyntheticEddyParams::with_cells(n_cells);
    params.validate(8)?;
    let h = params.h();
    let xs = params.nodes();
    let (m, k) = params.core(|x| params.in_band(x));
    let mut b3 = RMat::zeros(xs.len(), 2);
    for (col, sign) in [(0, -1.0), (1, 1.0)] {
        let nodes: Vec<usize> = (0..xs.len()).filter(|&i| params.in_band(xs[i]) && xs[i] * sign > 0.0).collect();
        if nodes.is_empty() {
            return Err(Error::Precondition("grid too coarse for the winding bands".into()));
        }
        let w = 1.0 / (nodes.len() as f64 * h);
        for i in nodes {
            b3[(i, col)] = w;
        }
    }
    StrandedConductorModel::new(m, k, b3)
}
