//! Exact t-SNE: bandwidth calibration, affinities, loss and optimizer.

mod objective;
mod optimize;
mod similarity;

pub use objective::{kernel_w, total_gradient, total_loss};
pub use optimize::{run_tsne, run_tsne_with_similarity, Embedding, Init, TsneConfig};
pub use similarity::{
    calibrate_bandwidths, calibrate_row, similarity_from_distances, similarity_matrix, Calibration,
    RowBandwidth, SimilarityMatrix,
};
pub(crate) use similarity::{calibrate_with, similarity_from_distances_guided};
