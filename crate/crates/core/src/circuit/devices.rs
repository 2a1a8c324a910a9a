use std::fmt::Debug;

use crate::error::{Error, Result};

/// Largest exponent accepted by [`Shockley`].
pub const EXP_ARG_MAX: f64 = 700.0;

/// Constitutive law of a two-terminal branch: charge of a capacitor,
/// current of a resistor, or flux of an inductor.
pub trait BranchLaw: Debug + Send + Sync {
    fn value(&self, x: f64) -> f64;
    fn slope(&self, x: f64) -> f64;
    fn curvature(&self, _x: f64) -> f64 {
        0.0
    }
    fn is_linear(&self) -> bool {
        false
    }
    /// Rejects arguments outside the law's valid range.
    fn check(&self, _x: f64) -> Result<()> {
        Ok(())
    }
}

/// `x ↦ c·x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Linear(pub f64);

impl BranchLaw for Linear {
    fn value(&self, x: f64) -> f64 {
        self.0 * x
    }
    fn slope(&self, _x: f64) -> f64 {
        self.0
    }
    fn is_linear(&self) -> bool {
        true
    }
}

/// Diode current `Is (exp(k v) + offset)`. The exponent is clamped at
/// [`EXP_ARG_MAX`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shockley {
    pub is: f64,
    pub k: f64,
    pub offset: f64,
}

pub fn shockley(is: f64, k: f64, offset: f64) -> Shockley {
    Shockley { is, k, offset }
}

impl Shockley {
    fn exp(&self, v: f64) -> f64 {
        (self.k * v).min(EXP_ARG_MAX).exp()
    }

    pub fn current(&self, v: f64) -> f64 {
        self.is * (self.exp(v) + self.offset)
    }

    pub fn derivative(&self, v: f64) -> f64 {
        self.is * self.k * self.exp(v)
    }
}

impl BranchLaw for Shockley {
    fn value(&self, v: f64) -> f64 {
        self.current(v)
    }
    fn slope(&self, v: f64) -> f64 {
        self.derivative(v)
    }
    fn curvature(&self, v: f64) -> f64 {
        self.is * self.k * self.k * self.exp(v)
    }
    fn check(&self, v: f64) -> Result<()> {
        let arg = self.k * v;
        if arg > EXP_ARG_MAX {
            return Err(Error::Overflow { arg });
        }
        Ok(())
    }
}
