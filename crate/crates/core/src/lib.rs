//! Clustering of point events on linear networks.
//!
//! Events are snapped to the edges of a network and reduced to per-edge
//! counts and centroids. The edges are then clustered with a Dirichlet-process
//! random partition whose predictive distribution is penalized by the distance
//! between an edge centroid and a latent cluster location. Posterior samples
//! come from a Gibbs sampler, and hot-spots are the clusters of the modal
//! partition whose mean intensity reaches a resolution threshold.
//!
//! The pipeline is:
//!
//! 1. [`geometry`]: network, region and event snapping.
//! 2. [`aggregation`]: per-edge counts and centroids ([`Dataset`]).
//! 3. [`model`]: kernel, penalty, partition prior.
//! 4. [`gibbs`]: the sampler producing a [`Trace`].
//! 5. [`posterior`]: modal partition, hot-spot selection, number of groups.
//!
//! [`synth`] generates planted test data, and [`io`] holds the file formats.

pub mod aggregation;
pub mod error;
pub mod geometry;
pub mod gibbs;
pub mod io;
pub mod model;
pub mod parallel;
pub mod posterior;
pub mod synth;
pub mod truncnorm;

pub use aggregation::{aggregate, Dataset, EdgeSummary, LocationSummary};
pub use error::{Error, Result};
pub use geometry::{
    bounding_region, snap_events, Edge, EventPattern, LinearNetwork, Point2, Region,
};
pub use gibbs::{ClusterParams, Sampler, SamplerConfig, SamplerState, Trace, TraceRecord};
pub use model::{Hyperparams, Partition, Prior};
pub use parallel::Execution;
pub use posterior::{HotspotSelection, PartitionEstimate};
