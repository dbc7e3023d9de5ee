//! Separation of feature points from clutter in planar point patterns.
//!
//! The Kth nearest-neighbour distances of a pattern made of two superimposed
//! homogeneous Poisson processes follow a two-component mixture whose squared
//! distances are Gamma distributed. This crate fits that mixture by EM,
//! classifies points by posterior, selects `K` automatically from the
//! levelling-off point of the classification entropy curve, and iterates the
//! classification on the surviving feature set with an entropy-based stopping
//! rule.
//!
//! Module map:
//!
//! - [`pattern`]: windows, point patterns, Kth nearest-neighbour distances.
//! - [`mixture`]: the distance density, intensity MLE, EM fit and hard labels.
//! - [`kselect`]: classification entropy, entropy curves, segmented fit, `K` selection.
//! - [`iterate`]: repeated classification with the overall-entropy stopping rule.
//! - [`sim`]: scenario generators, confusion rates and the Monte-Carlo harness.

pub mod error;
pub mod iterate;
pub mod kselect;
pub mod mixture;
pub mod pattern;
pub mod sim;

pub use error::{Error, Result};
pub use iterate::{
    compose_labels, run_fixed_depth, run_iterative, HaltReason, IterationConfig, IterationRecord,
    IterationTrace, KMode,
};
pub use kselect::{
    default_k_set, entropy, entropy_curve, fit_segmented, select_k, EntropyCurve, KSelection,
    SegmentedFit,
};
pub use mixture::{
    classify, em_fit, lambda_mle, nn_density, EmConfig, Labels, MixtureFit, MixtureInit,
    NnDensityParams,
};
pub use pattern::{knn_distances, KnnDistances, Label, Point, PointPattern, Window};
pub use sim::{
    make_scenario, rates, run_benchmark, sim_cluster, sim_poisson, BenchConfig, BenchRow,
    ConfusionRates, FeatureSpec, ScenarioId, ScenarioSpec,
};
