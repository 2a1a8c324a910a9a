//! Convolution-quadrature weight tables and their text serialization.
//!
//! ```text
//! CQW kind=<bdf|rk> m_or_s=<int> p=<int> q=<int> N=<int> tau=<float> rho=<float> L=<int>
//! <row-major entries of weight 0>
//! <row-major entries of weight 1>
//! ...
//! ```

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::RMat;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightKind {
    /// Multistep weights for BDF-`m`.
    Bdf { m: usize },
    /// Stage-blocked weights for an `s`-stage Runge-Kutta method.
    Rk { s: usize },
}

impl WeightKind {
    /// Stage count (1 for multistep weights).
    pub fn stages(&self) -> usize {
        match *self {
            WeightKind::Bdf { .. } => 1,
            WeightKind::Rk { s } => s,
        }
    }

    fn tag(&self) -> (&'static str, usize) {
        match *self {
            WeightKind::Bdf { m } => ("bdf", m),
            WeightKind::Rk { s } => ("rk", s),
        }
    }
}

/// Real weights `ω_n` (shape `q × p`) or `W_n` (shape `s·q × s·p`,
/// stage-major blocks) for `n = 0..N-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CQWeightTable {
    kind: WeightKind,
    p: usize,
    q: usize,
    tau: f64,
    rho: f64,
    points: usize,
    weights: Vec<RMat>,
    max_imag_residue: f64,
}

impl CQWeightTable {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        kind: WeightKind,
        p: usize,
        q: usize,
        tau: f64,
        rho: f64,
        points: usize,
        weights: Vec<RMat>,
        max_imag_residue: f64,
    ) -> Result<Self> {
        let s = kind.stages();
        if weights.is_empty() {
            return Err(Error::Dimension("weight table is empty".into()));
        }
        for (n, w) in weights.iter().enumerate() {
            if w.shape() != (s * q, s * p) {
                return Err(Error::Dimension(format!(
                    "weight {n} is {}x{}, expected {}x{}",
                    w.nrows(),
                    w.ncols(),
                    s * q,
                    s * p
                )));
            }
            if w.iter().any(|v| !v.is_finite()) {
                return Err(Error::Dimension(format!("weight {n} has non-finite entries")));
            }
        }
        Ok(CQWeightTable { kind, p, q, tau, rho, points, weights, max_imag_residue })
    }

    pub fn kind(&self) -> WeightKind {
        self.kind
    }
    pub fn stages(&self) -> usize {
        self.kind.stages()
    }
    /// Port inputs `p`.
    pub fn n_inputs(&self) -> usize {
        self.p
    }
    /// Port outputs `q`.
    pub fn n_outputs(&self) -> usize {
        self.q
    }
    pub fn tau(&self) -> f64 {
        self.tau
    }
    pub fn rho(&self) -> f64 {
        self.rho
    }
    pub fn points(&self) -> usize {
        self.points
    }
    /// Number of stored weights `N`.
    pub fn len(&self) -> usize {
        self.weights.len()
    }
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
    pub fn weight(&self, n: usize) -> &RMat {
        &self.weights[n]
    }
    pub fn weights(&self) -> &[RMat] {
        &self.weights
    }
    pub fn max_imag_residue(&self) -> f64 {
        self.max_imag_residue
    }

    /// Checks that the table was built for the given integrator.
    pub fn check_binding(&self, kind: WeightKind, tau: f64, steps: usize, p: usize, q: usize) -> Result<()> {
        if self.kind != kind {
            return Err(Error::WeightMismatch(format!("table is {:?}, integrator is {:?}", self.kind, kind)));
        }
        if (self.tau - tau).abs() > 1e-12 * tau.abs() {
            return Err(Error::WeightMismatch(format!("table has tau = {}, integrator uses {tau}", self.tau)));
        }
        if self.len() < steps {
            return Err(Error::WeightMismatch(format!(
                "table has {} weights, integrator needs {steps}",
                self.len()
            )));
        }
        if self.p != p || self.q != q {
            return Err(Error::WeightMismatch(format!(
                "table ports are {}x{}, subsystem has {q}x{p}",
                self.q, self.p
            )));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let (kind, ms) = self.kind.tag();
        let mut out = format!(
            "CQW kind={kind} m_or_s={ms} p={} q={} N={} tau={:.16e} rho={:.16e} L={}\n",
            self.p,
            self.q,
            self.len(),
            self.tau,
            self.rho,
            self.points
        );
        for w in &self.weights {
            let mut first = true;
            for i in 0..w.nrows() {
                for j in 0..w.ncols() {
                    if !first {
                        out.push(' ');
                    }
                    first = false;
                    let _ = write!(out, "{:.16e}", w[(i, j)]);
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str, origin: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::parse(origin, 1, "empty weight file"))?;
        let mut toks = header.split_whitespace();
        if toks.next() != Some("CQW") {
            return Err(Error::parse(origin, 1, "missing CQW header"));
        }
        let mut kind = None;
        let mut fields = std::collections::HashMap::new();
        for t in toks {
            let (k, v) = t
                .split_once('=')
                .ok_or_else(|| Error::parse(origin, 1, format!("bad header field '{t}'")))?;
            if k == "kind" {
                kind = Some(v.to_string());
            } else {
                fields.insert(k.to_string(), v.to_string());
            }
        }
        let get = |k: &str| -> Result<&String> {
            fields.get(k).ok_or_else(|| Error::parse(origin, 1, format!("header lacks {k}")))
        };
        let int = |k: &str| -> Result<usize> {
            get(k)?.parse().map_err(|_| Error::parse(origin, 1, format!("bad integer for {k}")))
        };
        let float = |k: &str| -> Result<f64> {
            get(k)?.parse().map_err(|_| Error::parse(origin, 1, format!("bad number for {k}")))
        };
        let ms = int("m_or_s")?;
        let kind = match kind.as_deref() {
            Some("bdf") => WeightKind::Bdf { m: ms },
            Some("rk") => WeightKind::Rk { s: ms },
            other => return Err(Error::parse(origin, 1, format!("unknown kind {other:?}"))),
        };
        let (p, q, n, l) = (int("p")?, int("q")?, int("N")?, int("L")?);
        let (tau, rho) = (float("tau")?, float("rho")?);
        let s = kind.stages();
        let (rows, cols) = (s * q, s * p);
        let mut weights = Vec::with_capacity(n);
        for (idx, line) in lines {
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::parse(origin, idx + 1, "bad weight entry"))?;
            if vals.len() != rows * cols {
                return Err(Error::parse(
                    origin,
                    idx + 1,
                    format!("expected {} entries, found {}", rows * cols, vals.len()),
                ));
            }
            weights.push(RMat::from_row_slice(rows, cols, &vals));
        }
        if weights.len() != n {
            return Err(Error::parse(
                origin,
                text.lines().count(),
                format!("header declares {n} weights, found {}", weights.len()),
            ));
        }
        CQWeightTable::new(kind, p, q, tau, rho, l, weights, 0.0)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text, &path.display().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CQWeightTable {
        let w = vec![
            RMat::from_row_slice(2, 2, &[1.0, 0.1, -0.2, 0.3]),
            RMat::from_row_slice(2, 2, &[1e-300, 0.0, 7.25, -1.0 / 3.0]),
        ];
        CQWeightTable::new(WeightKind::Rk { s: 2 }, 1, 1, 0.1, 0.9, 6, w, 0.0).unwrap()
    }

    #[test]
    fn text_round_trip_is_exact() {
        let t = sample();
        let back = CQWeightTable::from_text(&t.to_text(), "t").unwrap();
        assert_eq!(back.weights(), t.weights());
        assert_eq!(back.kind(), t.kind());
        assert_eq!(back.tau(), t.tau());
        assert_eq!(back.rho(), t.rho());
        assert_eq!(back.points(), 6);
    }

    #[test]
    fn header_fields() {
        let text = sample().to_text();
        let head = text.lines().next().unwrap();
        assert!(head.starts_with("CQW kind=rk m_or_s=2 p=1 q=1 N=2 tau="));
        assert!(head.ends_with("L=6"));
    }

    #[test]
    fn rejects_bad_files() {
        assert!(CQWeightTable::from_text("", "t").is_err());
        assert!(CQWeightTable::from_text("CQX kind=bdf\n", "t").is_err());
        let bad = "CQW kind=bdf m_or_s=1 p=1 q=1 N=2 tau=0.1 rho=0.5 L=4\n1.0\n";
        assert!(CQWeightTable::from_text(bad, "t").is_err());
        let wide = "CQW kind=bdf m_or_s=1 p=1 q=1 N=1 tau=0.1 rho=0.5 L=4\n1.0 2.0\n";
        assert!(CQWeightTable::from_text(wide, "t").is_err());
    }

    #[test]
    fn binding_checks() {
        let t = sample();
        assert!(t.check_binding(WeightKind::Rk { s: 2 }, 0.1, 2, 1, 1).is_ok());
        assert!(matches!(
            t.check_binding(WeightKind::Rk { s: 3 }, 0.1, 2, 1, 1),
            Err(Error::WeightMismatch(_))
        ));
        assert!(t.check_binding(WeightKind::Rk { s: 2 }, 0.2, 2, 1, 1).is_err());
        assert!(t.check_binding(WeightKind::Rk { s: 2 }, 0.1, 3, 1, 1).is_err());
        assert!(t.check_binding(WeightKind::Rk { s: 2 }, 0.1, 2, 2, 1).is_err());
    }
}
