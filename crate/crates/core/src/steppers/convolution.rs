//! Discrete convolution `Σ_{k<i} ω_{i-k} x_k` with a growing history.
//!
//! The FFT mode splits the lower-triangular Toeplitz sum into blocks of
//! doubling size: after `x_{i-1}` arrives, with `b` the lowest set bit of
//! `i`, the block `x_{i-b..i}` is convolved with `ω_1..ω_{2b-1}` and the
//! result is added to the lag buffers of targets `i..i+b`. Every pair
//! `(target, source)` is covered exactly once.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::linalg::{RMat, RVec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvMode {
    Naive,
    Fft,
}

impl std::str::FromStr for ConvMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(ConvMode::Naive),
            "fft" => Ok(ConvMode::Fft),
            other => Err(Error::Config(format!("unknown convolution mode '{other}'"))),
        }
    }
}

/// Blocks up to this length are summed directly.
pub const DIRECT_BLOCK: usize = 16;

struct Level {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// Spectrum of `(0, ω_1, …, ω_{2b-1})` for each weight entry, row-major.
    spectra: Vec<Vec<Complex64>>,
}

pub struct ConvolutionState {
    weights: Vec<RMat>,
    rows: usize,
    cols: usize,
    mode: ConvMode,
    history: Vec<RVec>,
    lag: Vec<RVec>,
    levels: Vec<Option<Level>>,
    planner: FftPlanner<f64>,
}

impl ConvolutionState {
    pub fn new(weights: Vec<RMat>, mode: ConvMode) -> Result<Self> {
        let first = weights.first().ok_or_else(|| Error::Dimension("no convolution weights".into()))?;
        let (rows, cols) = first.shape();
        if weights.iter().any(|w| w.shape() != (rows, cols)) {
            return Err(Error::Dimension("convolution weights differ in shape".into()));
        }
        let lag = match mode {
            ConvMode::Fft => vec![RVec::zeros(rows); weights.len()],
            ConvMode::Naive => Vec::new(),
        };
        Ok(ConvolutionState {
            weights,
            rows,
            cols,
            mode,
            history: Vec::new(),
            lag,
            levels: Vec::new(),
            planner: FftPlanner::new(),
        })
    }

    pub fn mode(&self) -> ConvMode {
        self.mode
    }

    /// Number of history entries pushed so far.
    pub fn len(&self) -> usize {
        self.history.len()
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }

    pub fn history(&self) -> &[RVec] {
        &self.history
    }

    pub fn push(&mut self, x: RVec) -> Result<()> {
        if x.len() != self.cols {
            return Err(Error::Dimension(format!("history entry has {} rows, expected {}", x.len(), self.cols)));
        }
        self.history.push(x);
        if self.mode == ConvMode::Fft {
            self.process_block();
        }
        Ok(())
    }

    /// `Σ_{k<i} ω_{i-k} x_k` with `i = len()`.
    pub fn history_sum(&self) -> RVec {
        let n = self.history.len();
        match self.mode {
            ConvMode::Fft if n < self.lag.len() => self.lag[n].clone(),
            _ => self.direct_sum(n),
        }
    }

    /// Direct evaluation of `Σ_{k<n} ω_{n-k} x_k` for any `n ≤ len()`.
    pub fn direct_sum(&self, n: usize) -> RVec {
        let mut out = RVec::zeros(self.rows);
        for k in 0..n.min(self.history.len()) {
            if let Some(w) = self.weights.get(n - k) {
                out.gemv(1.0, w, &self.history[k], 1.0);
            }
        }
        out
    }

    fn process_block(&mut self) {
        let i = self.history.len();
        let b = i & i.wrapping_neg();
        let cap = self.lag.len();
        if i >= cap {
            return;
        }
        let t_end = (i + b).min(cap);
        if b <= DIRECT_BLOCK {
            for t in i..t_end {
                for k in i - b..i {
                    if let Some(w) = self.weights.get(t - k) {
                        self.lag[t].gemv(1.0, w, &self.history[k], 1.0);
                    }
                }
            }
            return;
        }
        let lvl = b.trailing_zeros() as usize;
        self.ensure_level(lvl, b);
        let level = self.levels[lvl].as_ref().expect("level built");
        let size = 2 * b;
        let mut xs: Vec<Vec<Complex64>> = (0..self.cols)
            .map(|c| {
                let mut buf = vec![Complex64::new(0.0, 0.0); size];
                for (k, slot) in buf.iter_mut().take(b).enumerate() {
                    *slot = Complex64::new(self.history[i - b + k][c], 0.0);
                }
                buf
            })
            .collect();
        for buf in xs.iter_mut() {
            level.fwd.process(buf);
        }
        let mut acc = vec![Complex64::new(0.0, 0.0); size];
        let norm = 1.0 / size as f64;
        for r in 0..self.rows {
            acc.iter_mut().for_each(|a| *a = Complex64::new(0.0, 0.0));
            for (c, xc) in xs.iter().enumerate() {
                let spec = &level.spectra[r * self.cols + c];
                for ((a, w), x) in acc.iter_mut().zip(spec).zip(xc) {
                    *a += w * x;
                }
            }
            level.inv.process(&mut acc);
            for t in i..t_end {
                self.lag[t][r] += acc[b + t - i].re * norm;
            }
        }
    }

    fn ensure_level(&mut self, lvl: usize, b: usize) {
        if self.levels.len() <= lvl {
            self.levels.resize_with(lvl + 1, || None);
        }
        if self.levels[lvl].is_some() {
            return;
        }
        let size = 2 * b;
        let fwd = self.planner.plan_fft_forward(size);
        let inv = self.planner.plan_fft_inverse(size);
        let mut spectra = Vec::with_capacity(self.rows * self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                let mut buf = vec![Complex64::new(0.0, 0.0); size];
                for (k, slot) in buf.iter_mut().enumerate().skip(1) {
                    if let Some(w) = self.weights.get(k) {
                        *slot = Complex64::new(w[(r, c)], 0.0);
                    }
                }
                fwd.process(&mut buf);
                spectra.push(buf);
            }
        }
        self.levels[lvl] = Some(Level { fwd, inv, spectra });
    }
}

/// Strict history part `Σ_{k<n} ω_{n-k} x_k` of the convolution.
pub fn conv_sum(state: &ConvolutionState, n: usize) -> RVec {
    if n == state.len() {
        state.history_sum()
    } else {
        state.direct_sum(n)
    }
}

/// Linear (non-circular) convolution of two real sequences through a
/// zero-padded power-of-two FFT.
pub fn fft_block_convolve(weights: &[f64], history: &[f64]) -> Vec<f64> {
    if weights.is_empty() || history.is_empty() {
        return Vec::new();
    }
    let out_len = weights.len() + history.len() - 1;
    let size = out_len.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let pad = |v: &[f64]| {
        let mut buf = vec![Complex64::new(0.0, 0.0); size];
        for (b, &x) in buf.iter_mut().zip(v) {
            *b = Complex64::new(x, 0.0);
        }
        buf
    };
    let mut a = pad(weights);
    let mut h = pad(history);
    fwd.process(&mut a);
    fwd.process(&mut h);
    for (x, y) in a.iter_mut().zip(&h) {
        *x *= y;
    }
    inv.process(&mut a);
    a.iter().take(out_len).map(|v| v.re / size as f64).collect()
}
