use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::RVec;

/// Numerical solution on the uniform grid `t_n = nτ`, `n = 0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub tau: f64,
    pub y: Vec<RVec>,
    /// Linear-block states, kept by the coupled solvers.
    pub z: Option<Vec<RVec>>,
    /// Stacked stage values `Y_n` of step `n → n+1` (Runge-Kutta only).
    pub stages: Option<Vec<RVec>>,
    /// Newton iterations per step (0 for the initial value).
    pub newton_iters: Vec<usize>,
    /// Set when Newton used finite-difference Jacobians.
    pub fd_jacobian: bool,
}

impl Trajectory {
    pub(crate) fn start(tau: f64, dim: usize, steps: usize) -> Self {
        let mut y = Vec::with_capacity(steps + 1);
        y.push(RVec::zeros(dim));
        let mut iters = Vec::with_capacity(steps + 1);
        iters.push(0);
        Trajectory { tau, y, z: None, stages: None, newton_iters: iters, fd_jacobian: false }
    }

    /// Number of steps `N`.
    pub fn steps(&self) -> usize {
        self.y.len() - 1
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.y.len()).map(|n| n as f64 * self.tau).collect()
    }

    pub fn dim(&self) -> usize {
        self.y[0].len()
    }

    /// Component `k` over time.
    pub fn component(&self, k: usize) -> Vec<f64> {
        self.y.iter().map(|v| v[k]).collect()
    }

    pub fn to_csv(&self, with_iters: bool) -> String {
        let mut out = String::from("t");
        for k in 1..=self.dim() {
            let _ = write!(out, ",y{k}");
        }
        if with_iters {
            out.push_str(",newton_iters");
        }
        out.push('\n');
        for (n, y) in self.y.iter().enumerate() {
            let _ = write!(out, "{:.16e}", n as f64 * self.tau);
            for v in y.iter() {
                let _ = write!(out, ",{v:.16e}");
            }
            if with_iters {
                let _ = write!(out, ",{}", self.newton_iters[n]);
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>, with_iters: bool) -> Result<()> {
        std::fs::write(path, self.to_csv(with_iters))?;
        Ok(())
    }
}

/// `max_n |a_n − b_n|₂ / max_n |b_n|₂` over the common grid.
pub fn relative_sup_distance(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    if a.y.len() != b.y.len() || a.dim() != b.dim() {
        return Err(Error::Dimension(format!(
            "trajectories differ in shape: {}x{} vs {}x{}",
            a.y.len(),
            a.dim(),
            b.y.len(),
            b.dim()
        )));
    }
    Ok(relative_sup_distance_of(&a.y, &b.y))
}

pub(crate) fn relative_sup_distance_of(a: &[RVec], b: &[RVec]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    let scale = b.iter().map(|y| y.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut t = Trajectory::start(0.5, 2, 1);
        t.y.push(RVec::from_vec(vec![1.0, -2.0]));
        t.newton_iters.push(3);
        let csv = t.to_csv(true);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,y1,y2,newton_iters");
        assert_eq!(lines.len(), 3);
        assert!(lines[2].starts_with("5.0000000000000000e-1,1.0000000000000000e0,-2.0"));
        assert!(lines[2].ends_with(",3"));
    }

    #[test]
    fn distance() {
        let mut a = Trajectory::start(1.0, 1, 1);
        a.y.push(RVec::from_element(1, 2.0));
        let mut b = a.clone();
        b.y[1][0] = 2.5;
        assert!((relative_sup_distance(&a, &b).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(relative_sup_distance(&a, &a).unwrap(), 0.0);
    }
}
