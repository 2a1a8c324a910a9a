use crate::error::{Error, Result};

/// Parameters of the trapezoidal rule on the circle `|ξ| = ρ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourParams {
    pub rho: f64,
    /// Number of quadrature points `L`.
    pub points: usize,
    pub tau: f64,
    /// Number of time steps `N`.
    pub steps: usize,
    pub eps: f64,
}

impl ContourParams {
    pub fn new(rho: f64, points: usize, tau: f64, steps: usize, eps: f64) -> Result<Self> {
        let p = ContourParams { rho, points, tau, steps, eps };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::Precondition(format!("contour radius {} not in (0, 1)", self.rho)));
        }
        if self.points == 0 {
            return Err(Error::Precondition("contour needs at least one point".into()));
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::Precondition(format!("step size {} must be positive", self.tau)));
        }
        if self.steps == 0 {
            return Err(Error::Precondition("number of steps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContourMode {
    /// `L = 3N`, `ρ = exp(-τ)`.
    Experiment,
    /// `L = N`, `ρ = ε^{1/(2N)}`.
    Conservative,
}

impl std::str::FromStr for ContourMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "experiment" => Ok(ContourMode::Experiment),
            "conservative" => Ok(ContourMode::Conservative),
            other => Err(Error::Config(format!("unknown contour mode '{other}'"))),
        }
    }
}

pub const DEFAULT_EPS: f64 = 1e-16;

pub fn choose_contour(steps: usize, tau: f64, eps: f64, mode: ContourMode) -> Result<ContourParams> {
    if steps == 0 {
        return Err(Error::Precondition("number of steps must be at least 1".into()));
    }
    let (points, rho) = match mode {
        ContourMode::Experiment => (3 * steps, (-tau).exp()),
        ContourMode::Conservative => (steps, eps.powf(1.0 / (2.0 * steps as f64))),
    };
    ContourParams::new(rho, points, tau, steps, eps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn experiment_mode() {
        let p = choose_contour(1000, 1e-3, DEFAULT_EPS, ContourMode::Experiment).unwrap();
        assert_eq!(p.points, 3000);
        assert_eq!(p.rho, (-0.001f64).exp());
    }

    #[test]
    fn conservative_mode() {
        let p = choose_contour(1000, 1e-3, 1e-16, ContourMode::Conservative).unwrap();
        assert_eq!(p.points, 1000);
        assert!((p.rho - 10f64.powf(-16.0 / 2000.0)).abs() < 1e-15);
    }

    #[test]
    fn single_step() {
        let e = choose_contour(1, 0.5, 1e-16, ContourMode::Experiment).unwrap();
        assert_eq!(e.points, 3);
        assert_eq!(e.rho, (-0.5f64).exp());
        let c = choose_contour(1, 0.5, 1e-16, ContourMode::Conservative).unwrap();
        assert_eq!(c.points, 1);
        assert!((c.rho - 1e-8).abs() < 1e-20);
        assert!(choose_contour(0, 0.5, 1e-16, ContourMode::Experiment).is_err());
    }

    #[test]
    fn invalid_params() {
        assert!(ContourParams::new(1.0, 4, 0.1, 4, 1e-16).is_err());
        assert!(ContourParams::new(0.5, 0, 0.1, 4, 1e-16).is_err());
        assert!(ContourParams::new(0.5, 4, 0.0, 4, 1e-16).is_err());
    }
}
