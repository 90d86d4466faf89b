//! Geometric condition numbers of tensor rank (CPD) decompositions.
//!
//! A rank-r decomposition of a tensor is an ordered tuple of rank-1 terms.
//! Its geometric condition number is the inverse of the smallest singular
//! value of the Terracini matrix, the column-block matrix whose i-th block is
//! an orthonormal basis of the tangent space to the Segre manifold at the
//! i-th term. This crate provides:
//!
//! - rank-1 and dense tensor types with a fixed vectorization order
//!   ([`tensor`]),
//! - tangent bases, Fubini-Study / weighted / principal-angle distances
//!   ([`geometry`]),
//! - Terracini assembly and the condition number with an explicit infinity
//!   policy, plus an independent oracle path ([`condition`]),
//! - reproducible Gaussian sampling of random and ill-posed decompositions
//!   ([`sampling`]),
//! - Monte Carlo ccdf estimation, power-law tail fits, and the perturbation
//!   sweep ([`experiments`]).
//!
//! The `cpdlab` binary exposes all of it behind `condition`, `ccdf`,
//! `tailfit`, and `perturb` subcommands.

pub mod cli;
pub mod condition;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod sampling;
pub mod tensor;

pub use condition::{
    condition_number, condition_oracle, terracini_matrix, ConditionResult, ExtendedReal,
    TerraciniMatrix,
};
pub use error::{Error, Result};
pub use experiments::{
    default_window, estimate_ccdf, fit_tail, fit_tail_points, perturbation_sweep, quantile,
    read_ccdf_csv, sample_condition_numbers, write_ccdf_csv, write_ccdf_sidecar,
    write_perturb_csv, write_tailfit_json, CcdfTable, PerturbRecord, TailFit,
};
pub use geometry::{
    fubini_study_distance, grassmann_distance, grassmann_distance_tuple, orthonormal_complement,
    principal_angles, product_fs_distance, projection_distance, projection_distance_tuple,
    tangent_basis, weighted_distance, OrthoBasis, PrincipalAngles, Subspace,
};
pub use sampling::{
    derive_stream, illposed_shared_first_factor, illposed_shared_third_factor, perturb_tuple,
    random_rank1_tuple, standard_normals, SampleSpec,
};
pub use tensor::{
    extract_factors, inner_product, outer_product, segre_dimension, vectorize, DenseTensor,
    Rank1Tensor, Rank1Tuple, TensorFormat,
};
