//! Closed-form and series representations of the hyperradial kernels.

mod bessel_gauss;
mod laguerre;
mod legendre;

pub use bessel_gauss::{
    b_kernel, f1_aux, f2_aux, f3_aux, k_closed, k_closed_with, k_eval, k_eval_with, k_quadrature, k_series,
    ClosedBranch, DispatchConfig, EvalReport, KernelParams, KernelTable, Method,
};
pub use laguerre::{
    j_integral, laguerre_kernel_erfc, laguerre_kernel_expansion, ts_coefficients, ts_polynomials,
    LaguerreKernelParams, TsPolynomials,
};
pub use legendre::{legendre_pair_integral, neumann_adams_coeffs};
