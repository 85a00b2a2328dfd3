//! Antenna selection for azimuth angle-of-arrival estimation on a square
//! planar array of `(M + 1)²` antennas.
//!
//! Two selectors are provided. [`select_expected`] fixes a subset offline by
//! minimizing the azimuth-averaged CRLB. [`two_stage_select`] refines a
//! coarse azimuth estimate into a subset tuned to that azimuth: a closed-form
//! three-antenna start set followed by greedy additions.
//!
//! [`oracle`] holds brute-force references and [`signal`] a Monte Carlo lab
//! with a grid-search maximum-likelihood estimator.

pub mod crlb;
pub mod error;
pub mod expected;
pub mod geometry;
pub mod oracle;
pub mod realtime;
pub mod signal;
pub mod validate;

pub use crlb::{
    crlb_theta, crlb_theta_via_fim, expected_crlb, expected_u, expected_u_exact, fim_entries, nearly_equal,
    numerator_score, q_theta, FimEntries, SystemParams, TIE_RTOL,
};
pub use error::{Error, Result};
pub use expected::{priority_tiers, select_expected, PriorityTier, TieBreak, TierDump};
pub use geometry::{enumerate_grid, mirror, Antenna, ArrayGeometry, Moments, SelectionSet};
pub use oracle::{exhaustive_start, exhaustive_subset, Objective, OracleReport};
pub use realtime::{
    boundary_roots, candidate_domain, greedy_from, greedy_select, iteration_count, optimal_start_set,
    preliminary_snapshot_count, region_boundaries, two_stage_select, AngleRegion, GreedyStep, GreedyTrace,
    RegionBoundaries, RegionKind, SelectionReport, StartSet, TwoStageConfig, TwoStageOutcome,
};
pub use signal::{
    efficiency_metric, error_tolerance_map, ml_estimate, monte_carlo_variance, realtime_crlb_with_error,
    simulate_snapshots, steering_vector, uniform_thetas, ChannelTruth, Estimate, EstimationResult,
    MonteCarloConfig, SearchGrid, SelectionMethod, SnapshotBatch, SnapshotView, ToleranceRow, ToleranceSearch,
};
