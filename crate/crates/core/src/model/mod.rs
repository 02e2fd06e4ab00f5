//! Operator-valued tensor factorization of a Cayley table and its flatness
//! penalty.

mod construct;
mod objective;
mod params;

pub use construct::{apply_gauge, init_params, random_orthogonal, regular_representation, GAUGE_TOL};
pub use objective::{evaluate_objective, flatness, forward, forward_fiber, grad, recon_loss, Evaluation};
pub use params::{f64_from_hex, f64_to_hex, FactorParams, GradParams, ObservationSet};
