//! Safe-region discovery for ReLU classifiers.
//!
//! Labeled inputs are clustered with a label-guided kMeans until every
//! cluster is label-pure. Each cluster's centroid and average radius define a
//! candidate safe region, and a complete branch-and-bound verifier decides,
//! per target label, whether any input in the region's L1 ball is scored at
//! least as high for the target as for the region's own label.
//!
//! The stages are exposed individually ([`clustering`], [`analysis`],
//! [`verifier`]) and end to end through [`pipeline::run_pipeline`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod clustering;
pub mod config;
pub mod dataset;
pub mod error;
pub mod network;
pub mod oracle;
pub mod pipeline;
pub(crate) mod serde_inf;
pub mod synthetic;
pub mod verifier;

pub use analysis::{build_plan, rank_regions, target_label_order, PlanFilters, VerificationPlan};
pub use clustering::{
    kmeans, label_guided_cluster, region_geometry, ClusterParams, DistanceMetric, Region,
};
pub use config::RunConfig;
pub use dataset::{load_dataset, Dataset, LabelColumn, LabeledPoint};
pub use error::{Error, Result};
pub use network::{load_network, Network, ScoreVector};
pub use oracle::{grid_search, GridResult, GridSpec};
pub use pipeline::{aggregate, run_pipeline, RegionReport, RegionStatus};
pub use verifier::{
    check_witness, decide, slice_radius, Limits, Outcome, Query, SliceConstraint, Verdict,
};
