//! Error type shared across the library.

use thiserror::Error;

/// Everything that can go wrong while loading inputs, transforming data, or
/// evaluating a result.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input text: dataset, constraint file, map file, taxonomy,
    /// or workload that cannot be parsed at all.
    #[error("parse error: {0}")]
    Parse(String),

    /// A token or item reference that does not exist in the vocabulary in
    /// scope, for example a constraint over an item the dataset never
    /// mentions.
    #[error("unknown item: {0}")]
    UnknownItem(String),

    /// The dataset contains no transactions.
    #[error("dataset is empty")]
    EmptyDataset,

    /// A parameter outside its documented range, such as `k < 2` or a
    /// suppression budget not in `[0, 100]`.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A claimed partition of the vocabulary that is not one: an item
    /// missing, repeated, or unknown.
    #[error("not a partition of the vocabulary: {0}")]
    NotAPartition(String),

    /// An anonymization map inconsistent with the dataset it is applied to:
    /// its groups and suppressed set do not cover the dataset vocabulary
    /// exactly.
    #[error("map/vocabulary mismatch: {0}")]
    VocabMismatch(String),

    /// A taxonomy whose leaves do not coincide with the vocabulary.
    #[error("taxonomy/vocabulary mismatch: {0}")]
    TaxonomyMismatch(String),

    /// Satisfying the privacy constraints would require suppressing more
    /// than the allowed share of the vocabulary. Reports the group whose
    /// suppression was refused and the share that suppression would have
    /// reached, both for diagnostics.
    #[error(
        "utility budget violated: suppressing {group} would raise suppressed items to \
         {would_reach:.4}% of the vocabulary, budget is {budget}%"
    )]
    BudgetViolated {
        group: String,
        would_reach: f64,
        budget: f64,
    },

    /// An exhaustive constraint policy that would enumerate more itemsets
    /// than the configured cap.
    #[error("policy too large: {itemsets} itemsets of size {m} exceed the cap of {cap}")]
    PolicyTooLarge {
        itemsets: String,
        m: usize,
        cap: u64,
    },

    /// A group operation addressed to a group that does not exist or is no
    /// longer live.
    #[error("no such group: {0}")]
    NoSuchGroup(String),

    /// A query or workload with nothing in it.
    #[error("empty workload or query")]
    EmptyWorkload,

    /// A workload request that needs more distinct groups than the map has
    /// left.
    #[error("workload needs {needed} distinct live groups, map has {available}")]
    WorkloadTooWide { needed: usize, available: usize },

    /// An internal consistency check failed. Seeing this is a bug.
    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable tag for each error class, used by callers
    /// that map errors to process exit codes or log fields.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse(_) => "parse",
            Error::UnknownItem(_) => "unknown-item",
            Error::EmptyDataset => "empty-dataset",
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::NotAPartition(_) => "not-a-partition",
            Error::VocabMismatch(_) => "vocab-mismatch",
            Error::TaxonomyMismatch(_) => "taxonomy-mismatch",
            Error::BudgetViolated { .. } => "utility-budget-violated",
            Error::PolicyTooLarge { .. } => "policy-too-large",
            Error::NoSuchGroup(_) => "no-such-group",
            Error::EmptyWorkload => "empty-workload",
            Error::WorkloadTooWide { .. } => "workload-too-wide",
            Error::Internal(_) => "internal",
            Error::Io(_) => "io",
        }
    }
}
