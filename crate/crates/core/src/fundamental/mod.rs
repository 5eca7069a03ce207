//! Fundamental solutions of the model operators, mollified-delta checks and
//! grid convolutions.

pub mod bessel;
mod convolve;
mod grid;
mod kernels;
pub mod quadrature;
mod solution;
mod spectral;
mod wave;

pub use bessel::{bessel, BesselKind};
pub use convolve::{
    convolve_on, convolve_solve, first_order_fundamental, iterated_convolution, iterated_convolution_on,
    mollified_delta, sample_kernel, ConvolutionReport, Convolved, Kernel, Mollifier, DIRECT_PAIR_BUDGET,
};
pub use grid::{GridField, GridSpec};
pub use kernels::{
    boundary_power, heat_kernel, helmholtz_psi, hyperbolic_psi, klein_gordon_fourier, laplace3_cell_average,
    laplace_calibration, laplace_constant, laplace_psi, quadratic_form, sigma_written, sphere_area, LaplaceCalibration,
    EPS_SCHEDULE, HYPERBOLIC_LOG_CONSTANT, KG_EPSILON, MAX_LAPLACE_DIMENSION,
};
pub use solution::{FundamentalSolution, Kind};
pub use spectral::{klein_gordon_solve_fd, klein_gordon_solve_spectral};
pub use wave::{sphere_rule, wave3d_apply};

#[cfg(test)]
mod tests;
