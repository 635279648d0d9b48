//! Evaluation metrics: DTW, assignment-based Wasserstein distances between
//! datasets, and detector scores (AUROC, F1, relative F1).

mod classification;
mod dtw;
mod wasserstein;

pub use classification::{auroc, f1_hat, f1_score, roc_curve, F1Score, RocPoint};
pub use dtw::{dtw_by, dtw_distance};
pub use wasserstein::{
    normalized_distance_report, optimal_assignment, pairwise_cost, wasserstein_assignment,
    CostMatrix, DistanceReport, GroundMetric,
};
