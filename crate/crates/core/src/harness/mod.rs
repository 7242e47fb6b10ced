//! Experiment plumbing: presets, the conjugate exponential oracle, posterior
//! predictive sampling, chain summaries and manifests.

mod compare;
mod manifest;
mod oracle;
mod predictive;
pub mod presets;
mod summary;

pub use compare::{compare_chains, ks_two_sample, ChainComparison, KsResult};
pub use manifest::{
    generate_observed, read_observed_csv, write_observed_csv, write_run_outputs, ExperimentManifest,
    ObservedSource, PredictiveSettings, RunMetadata, MANIFEST_VERSION,
};
pub use oracle::{analytic_exponential_posterior, GammaPosterior};
pub use predictive::{posterior_predictive, predictive_series, thin, PredictiveOutput};
pub use summary::{batch_means_ess, quantile, summarize, write_summary_files, PosteriorSummary};
