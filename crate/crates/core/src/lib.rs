//! Monte Carlo simulator and closed-form analysis toolkit for cache-aided
//! single-hop D2D networks under the SINR channel model.
//!
//! Modules follow the data flow: [`popularity`] draws requests, [`caching`]
//! chooses and places cache contents, [`geometry`] lays out users and pairs
//! them inside clusters, [`phy`] turns geometry into rates, [`schemes`]
//! schedules an epoch, and [`metrics`] summarises it. [`analysis`] holds the
//! closed forms the simulations are checked against, and [`harness`] drives
//! configurable sweeps.

// Parameter checks are written as `!(x > 0.0)` on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod caching;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod metrics;
pub mod phy;
pub mod popularity;
pub mod schemes;
pub mod sum;

pub use analysis::{ExponentKind, FixedPointConstants, ScalingFit};
pub use caching::{CachePlacer, CacheSet, CachingPolicy, SplitCachingPolicy};
pub use error::{Error, Result};
pub use geometry::{ClusterGrid, NetworkRealization, PairingOutcome, Point};
pub use harness::{ExperimentConfig, OutputFormat, ResultArtifact};
pub use metrics::{ThroughputOutageEstimate, TransportRecord};
pub use phy::{ActiveSet, PhyConfig};
pub use popularity::PopularityModel;
pub use schemes::{Regime, SchemeConfig, SchemeResult};
