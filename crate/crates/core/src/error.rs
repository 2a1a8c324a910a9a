use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised anywhere in the solver suite.
#[derive(Debug, Error)]
pub enum Error {
    #[error("singular pencil at s = {s}: pivot {pivot:.3e} below threshold {threshold:.3e}")]
    SingularPencil { s: Complex64, pivot: f64, threshold: f64 },

    #[error("singular pencil at contour point l = {index} (s = {s})")]
    SingularContourPoint { index: usize, s: Complex64 },

    #[error("port matrix singular (condition estimate {cond:.3e})")]
    SingularPort { cond: f64 },

    #[error("Runge-Kutta symbol singular at xi = {xi}")]
    SingularSymbol { xi: Complex64 },

    #[error("eigenbasis ill-conditioned (cond = {cond:.3e})")]
    IllConditionedEigenbasis { cond: f64 },

    #[error("weights carry imaginary residue {residue:.3e} (max |w| = {scale:.3e})")]
    ImaginaryResidue { residue: f64, scale: f64 },

    #[error("Newton iteration failed to converge at step {step} (residual {residual:.3e})")]
    NewtonDiverged { step: usize, residual: f64 },

    #[error("singular Newton matrix at step {step}")]
    SingularJacobian { step: usize },

    #[error("weight table does not match the integrator: {0}")]
    WeightMismatch(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("{path}: line {line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error("invalid netlist: {0}")]
    Netlist(String),

    #[error("degenerate rational parameters: {0}")]
    DegenerateParameters(String),

    #[error("rank-deficient fit: samples do not determine a (1,1) rational form")]
    RankDeficient,

    #[error("exponential overflow in device law (argument {arg:.3e})")]
    Overflow { arg: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(path: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), line, msg: msg.into() }
    }

    /// Process exit code for the command-line front end: 2 for
    /// configuration/input problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::WeightMismatch(_)
            | Error::Dimension(_)
            | Error::Precondition(_)
            | Error::Parse { .. }
            | Error::Netlist(_)
            | Error::Config(_)
            | Error::Io(_) => 2,
            _ => 3,
        }
    }
}
