//! Set-based anonymization of transaction data.
//!
//! A transaction is a set of items drawn from a finite vocabulary. This
//! library transforms a collection of transactions so that attackers with
//! partial knowledge of a record cannot single out fewer than `k`
//! transactions, while items an analyst cares about stay as intact as the
//! privacy requirement allows. Two operations are available: generalization,
//! which replaces a set of items by a single group interpreted as "one or
//! more of its members", and suppression, which deletes an item everywhere.
//!
//! The pieces fit together like this:
//!
//! * [`dataset`] ingests the corpus and answers exact support queries
//!   through an inverted index.
//! * [`anonmap`] holds the current generalization/suppression state as a
//!   partition of the vocabulary and applies it to produce an anonymized
//!   view.
//! * [`constraints`] models the privacy side (itemsets that must be hidden
//!   among at least `k` transactions) and the utility side (blocks of items
//!   that may be merged with each other, plus a cap on suppression).
//! * [`coat`] runs the greedy anonymization loop that picks constraints and
//!   repairs them with the cheapest available operation.
//! * [`metrics`] scores a result by utility loss; [`evaluation`] scores it
//!   by count-query accuracy against the original data.
//! * [`pgen`] derives privacy constraints from the data itself, or
//!   exhaustively for every itemset up to a fixed size.
//!
//! All tie-breaking is by lexicographic item token order, so every entry
//! point is deterministic: identical inputs produce byte-identical outputs.

pub mod anonmap;
pub mod coat;
pub mod constraints;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod metrics;
pub mod pgen;

pub use anonmap::{AnonDataset, AnonymizationMap, Gid, Mapping};
pub use coat::{
    coat_run, parse_trace, render_trace, replay_trace, CoatConfig, CoatOutcome, TraceAction,
};
pub use constraints::{
    check_privacy_constraint, check_privacy_set, check_utility_set, GroupSupport,
    PrivacyConstraint, PrivacyConstraintSet, UtilityConstraintSet,
};
pub use dataset::{Dataset, ItemId, Tid, Transaction, Vocabulary};
pub use error::Error;
pub use evaluation::{
    avg_re, estimated_answer, exact_answer, gen_workload, relative_error, CountQuery,
    MetricsReport, QueryOutcome, Workload,
};
pub use metrics::{size_ratio, ul_dataset, ul_item, PenaltyPolicy, Taxonomy, WeightPolicy};
pub use pgen::{km_itemsets, pgen, DEFAULT_KM_CAP};
