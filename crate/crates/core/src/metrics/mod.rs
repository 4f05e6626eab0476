//! Label-aware and label-free evaluation: class-posterior entropies,
//! neighbourhood preservation, clustering indices and rank statistics.

mod cluster;
mod entropy;
mod neighborhood;
mod report;
mod stats;

pub use cluster::{db_index, wcdr, wilks_lambda};
pub use entropy::{entropy, entropy_difference, EntropyDifference, FittedGmm};
pub use neighborhood::{default_k, neighborhood_preservation, NeighborhoodPreservation};
pub use report::MetricReport;
pub use stats::{average_ranks, roc_auc, spearman_test, SpearmanTest};
