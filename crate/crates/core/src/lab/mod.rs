//! Monte Carlo laboratory for the large-sample behaviour of the MLE.

pub mod experiment;
pub mod info;
pub mod limits;
pub mod stat;

pub use experiment::{
    moment_h, run_consistency_experiment, run_moment_continuity_probe, run_normality_experiment,
    sqrt_spd, z_scores, ContinuityConfig, ContinuityRow, DesignFamily, ExperimentConfig,
    ExperimentReport, LevelSummary, ReplicateRecord,
};
pub use info::{fisher_info_mc, kl_mc, sample_point, InfoEstimate, KlEstimate, PointSample};
pub use limits::{averaged_limits, doubling_schedule, LimitsConfig, LimitsRow, LimitsTable};
pub use stat::{
    jackknife, ks_one_sample, ks_standard_normal, ks_two_sample, mean, norm_cdf, quantile, KsResult,
};
