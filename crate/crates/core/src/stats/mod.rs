//! Analysis toolkit: boxplot summaries, ANOVA variants, Pearson correlation
//! and the distribution functions behind their p-values.

mod anova;
mod boxplot;
mod pearson;
pub mod special;

use thiserror::Error;

pub use anova::{anova_between_one, anova_between_two, anova_rm_one, anova_rm_two, AnovaResult};
pub use boxplot::{boxplot_summary, quantile_linear, BoxplotSummary};
pub use pearson::{pearson, pearson_p, CorrelationResult};
pub use special::{f_cdf, f_sf};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum StatsError {
    #[error("no data")]
    Empty,
    #[error("non-finite value in input")]
    NonFinite,
    #[error("incomplete matrix: {0}")]
    Incomplete(String),
    #[error("unbalanced design: {0}")]
    Unbalanced(String),
    #[error("empty cell {0}")]
    EmptyCell(String),
    #[error("{0}")]
    TooFew(String),
    #[error("zero error variance for effect {0}; F is undefined")]
    Degenerate(String),
    #[error("zero variance")]
    ZeroVariance,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
}
