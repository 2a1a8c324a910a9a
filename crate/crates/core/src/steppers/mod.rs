//! Time integrators: monolithic coupled solvers and convolution-quadrature
//! solvers for the reduced problem.

mod convolution;
mod coupled;
mod nonlinear;
mod reduced;
mod stage;
mod trajectory;

pub use coupled::{
    solve_coupled_bdf, solve_coupled_bdf_with, solve_coupled_euler, solve_coupled_rk, solve_coupled_rk_with,
    CoupledOptions,
};
pub use convolution::{conv_sum, fft_block_convolve, ConvMode, ConvolutionState, DIRECT_BLOCK};
pub use nonlinear::{fd_jacobian, Coupling, FnSubsystem, NewtonOptions, NonlinearSubsystem};
pub use reduced::{solve_reduced_bdf, solve_reduced_euler, solve_reduced_rk};
pub use trajectory::{relative_sup_distance, Trajectory};
pub(crate) use trajectory::relative_sup_distance_of;
