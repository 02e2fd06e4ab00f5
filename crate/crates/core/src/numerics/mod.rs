//! Small dense kernels, the seeded generator, Jacobi SVD and the
//! finite-difference oracles.

mod fd;
mod mat;
mod rng;
mod svd;

pub use fd::{fd_gradient, fd_hessian_trace, DEFAULT_GRAD_STEP, DEFAULT_HESSIAN_STEP};
pub use mat::{frob2, gemm, orthogonality_defect, trace, Mat};
pub(crate) use mat::{gemm_into, gemm_nt_acc, gemm_tn_acc, trace_of_product};
pub use rng::Rng;
pub use svd::{matrix_rank, singular_values, svd, Svd};
