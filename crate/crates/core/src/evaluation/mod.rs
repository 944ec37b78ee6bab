mod isolation;
mod leak;
mod matching;
mod metrics;
mod report;

pub use isolation::{
    average_path_length, isolation_scores, split_inliers_outliers, DEFAULT_NUM_ITREES, DEFAULT_SUBSAMPLE,
    DEFAULT_THRESHOLD,
};
pub use leak::{leak_cdf, privacy_leak_cdf, LeakResult};
pub use matching::{manhattan_cost_matrix, min_cost_matching, MatchingResult};
pub use metrics::{
    align_unknown_n, majority_baseline, match_datasets, perfect_reconstruction_stats, random_baseline,
    reconstruction_error, row_error,
};
pub use report::{evaluate, EvaluationContext, EvaluationOptions, EvaluationReport, SubsetStats};
