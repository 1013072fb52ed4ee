//! Planted-pattern click data, its Bayes-optimal LogLoss, and the comparison
//! of learned order vectors against the planted exponents.

mod deviation;
mod generate;
mod pattern;
mod sidecar;

pub use deviation::{
    extract_orders, fitting_deviation, order_histogram, DeviationReport, HistogramBin, OrderVector, HISTOGRAM_WIDTH,
};
pub use generate::{
    bayes_logloss, generate, FeatureProbTable, SyntheticDataset, FEATURES_PER_FIELD, PROB_HIGH, PROB_LOW,
};
pub use pattern::{ground_truth_prob, PatternTerm, SyntheticPattern, MAX_TERMS};
pub use sidecar::{read_sidecar, write_sidecar, Sidecar};
