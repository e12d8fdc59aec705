//! Concave least-squares regression and the objects of its risk analysis.
//!
//! - [`cone`]: sequences, the cones `K_n`, `C_k`, `K3`, `K_n ∩ L⊥`, `K_{n,B}`,
//!   and second differences, range, mode, affine projection.
//! - [`projection`]: certified Euclidean projection onto each cone and the
//!   linear-over-ball supremum behind localized Gaussian widths.
//! - [`width`]: Monte-Carlo localized widths, fixed-point radii, the bound
//!   evaluators and maximal-inequality checks.
//! - [`truncation`]: the clamp of a concave sequence into a band around a
//!   monotone concave reference, with its structural checks.
//! - [`covering`]: greedy packings, interpolation nets and entropy fits.
//! - [`risk`]: end-to-end risk, regret and decomposition experiments.

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod banded;
pub mod cone;
pub mod covering;
pub mod error;
pub mod projection;
pub mod risk;
pub mod rng;
pub mod stats;
pub mod truncation;
pub mod vector;
pub mod width;

pub use cone::{is_member, mode_index, project_affine, range_v, second_differences, ConeSpec, Sequence};
pub use error::{Error, Result};
pub use projection::{
    max_linear_over_ball, max_linear_over_ball_from, project, project_ortho_affine, project_via_rows,
    BallMax, ProjectionResult, DEFAULT_TOL,
};
