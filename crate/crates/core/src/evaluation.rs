//! Query-accuracy evaluation of an anonymization.
//!
//! A COUNT query asks how many transactions contain all of a set of original
//! items. The exact answer comes from the original data. The estimate comes
//! from the anonymized data: a row that contains every queried item's group
//! might or might not contain the items themselves, so it contributes the
//! probability that it does, under the assumption that each group stands for
//! any non-empty subset of its members with equal probability.
//!
//! Relative error compares the two answers per query; a workload averages it
//! over many queries.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::anonmap::{AnonDataset, AnonymizationMap, Gid};
use crate::dataset::{Dataset, ItemId, Vocabulary};
use crate::error::Error;
use crate::metrics::{ul_dataset, PenaltyPolicy, WeightPolicy};

/// A COUNT query over one or more distinct original items.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountQuery {
    items: BTreeSet<ItemId>,
}

impl CountQuery {
    pub fn new(items: BTreeSet<ItemId>) -> Result<Self, Error> {
        if items.is_empty() {
            return Err(Error::EmptyWorkload);
        }
        Ok(CountQuery { items })
    }

    pub fn items(&self) -> &BTreeSet<ItemId> {
        &self.items
    }

    /// Query items as sorted tokens, the canonical external form.
    pub fn tokens<'v>(&self, vocab: &'v Vocabulary) -> Vec<&'v str> {
        let mut tokens: Vec<&str> = self.items.iter().map(|&i| vocab.token(i)).collect();
        tokens.sort_unstable();
        tokens
    }
}

/// A reproducible list of queries plus the parameters that generated it.
#[derive(Clone, Debug)]
pub struct Workload {
    pub queries: Vec<CountQuery>,
    pub seed: u64,
    pub q: usize,
}

/// Number of original transactions containing every queried item.
pub fn exact_answer(query: &CountQuery, data: &Dataset) -> Result<usize, Error> {
    let ids: Vec<ItemId> = query.items.iter().copied().collect();
    data.support(&ids)
}

/// Probability that a group of `group_size` members, published as "one or
/// more of these", actually contains one fixed member: the share of its
/// non-empty subsets containing that member, `2^(g-1) / (2^g - 1)`.
/// Always in `(1/2, 1]`, decreasing in `g`, and exactly 1 for singletons.
pub fn subset_inclusion_probability(group_size: usize) -> f64 {
    // rewritten as 1 / (2 - 2^(1-g)) to stay finite for any group size
    1.0 / (2.0 - (1.0 - group_size as f64).exp2())
}

/// Estimated COUNT answer from the anonymized data: rows containing every
/// queried item's group, weighted by the probability that the groups jointly
/// contain the items. Query items in one group are treated as independent,
/// a deliberate bias matching the product-form estimator. A suppressed query
/// item makes the estimate 0.
pub fn estimated_answer(
    query: &CountQuery,
    map: &AnonymizationMap,
    anon: &AnonDataset,
) -> Result<f64, Error> {
    let mut gids = BTreeSet::new();
    let mut probability = 1.0;
    for &item in &query.items {
        let Some(gid) = map.group_of(item)? else {
            return Ok(0.0);
        };
        probability *= subset_inclusion_probability(map.group_members(gid)?.len());
        gids.insert(gid);
    }
    let gids: Vec<Gid> = gids.into_iter().collect();
    Ok(anon.support(&gids) as f64 * probability)
}

/// Result of comparing one query's exact and estimated answers.
#[derive(Clone, Debug)]
pub struct QueryOutcome {
    pub exact: usize,
    pub estimate: f64,
    /// `|exact - estimate| / exact`; when `exact` is 0 this is the absolute
    /// error instead, flagged by `zero_exact`.
    pub re: f64,
    pub zero_exact: bool,
}

/// Relative error of the estimate for one query.
pub fn relative_error(
    query: &CountQuery,
    map: &AnonymizationMap,
    data: &Dataset,
    anon: &AnonDataset,
) -> Result<QueryOutcome, Error> {
    let exact = exact_answer(query, data)?;
    let estimate = estimated_answer(query, map, anon)?;
    let (re, zero_exact) = if exact > 0 {
        ((exact as f64 - estimate).abs() / exact as f64, false)
    } else {
        (estimate, true)
    };
    Ok(QueryOutcome {
        exact,
        estimate,
        re,
        zero_exact,
    })
}

/// Mean relative error over a workload. Queries with a zero exact answer
/// are excluded unless `include_zero_exact` is set, because their entry is
/// an absolute error on a different scale. Returns 0 when every query was
/// excluded.
pub fn avg_re(
    workload: &Workload,
    map: &AnonymizationMap,
    data: &Dataset,
    anon: &AnonDataset,
    include_zero_exact: bool,
) -> Result<f64, Error> {
    if workload.queries.is_empty() {
        return Err(Error::EmptyWorkload);
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for query in &workload.queries {
        let outcome = relative_error(query, map, data, anon)?;
        if outcome.zero_exact && !include_zero_exact {
            continue;
        }
        sum += outcome.re;
        count += 1;
    }
    if count == 0 {
        return Ok(0.0);
    }
    Ok(sum / count as f64)
}

/// Generates `n` queries of `q` items each: every query draws `q` distinct
/// live groups, then one member item per drawn group, all uniformly from a
/// generator seeded with `seed`. Sampling items of live groups guarantees a
/// positive exact answer. The group list is ordered canonically first, so
/// the stream depends only on the map's content, not its internal ids.
pub fn gen_workload(
    map: &AnonymizationMap,
    vocab: &Vocabulary,
    q: usize,
    n: usize,
    seed: u64,
) -> Result<Workload, Error> {
    if q == 0 {
        return Err(Error::InvalidParameter(
            "queries must have at least one item".to_string(),
        ));
    }
    let live = map.gids_by_key(vocab);
    if live.len() < q {
        return Err(Error::WorkloadTooWide {
            needed: q,
            available: live.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut queries = Vec::with_capacity(n);
    let mut scratch: Vec<Gid> = live.clone();
    for _ in 0..n {
        scratch.copy_from_slice(&live);
        let mut items = BTreeSet::new();
        for drawn in 0..q {
            let pick = rng.gen_range(drawn..scratch.len());
            scratch.swap(drawn, pick);
            let members = map.group_members(scratch[drawn])?;
            let mut tokens: Vec<&str> = members.iter().map(|&i| vocab.token(i)).collect();
            tokens.sort_unstable();
            let token = tokens[rng.gen_range(0..tokens.len())];
            items.insert(vocab.require(token)?);
        }
        queries.push(CountQuery::new(items)?);
    }
    Ok(Workload { queries, seed, q })
}

/// Serializes a workload: a header comment with the generation parameters,
/// then one query per line as sorted tokens.
pub fn render_workload(workload: &Workload, vocab: &Vocabulary) -> String {
    let mut out = format!(
        "# seed={} q={} n={}\n",
        workload.seed,
        workload.q,
        workload.queries.len()
    );
    for query in &workload.queries {
        out.push_str(&query.tokens(vocab).join(" "));
        out.push('\n');
    }
    out
}

/// Parses the format written by [`render_workload`]. The header is optional;
/// without it the seed is recorded as 0 and `q` as the widest query seen.
pub fn parse_workload(source: &str, vocab: &Vocabulary) -> Result<Workload, Error> {
    let mut seed = 0u64;
    let mut q = None;
    let mut queries = Vec::new();
    for line in source.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            for field in comment.split_whitespace() {
                if let Some(v) = field.strip_prefix("seed=") {
                    seed = v
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad workload seed {v:?}")))?;
                } else if let Some(v) = field.strip_prefix("q=") {
                    q = Some(
                        v.parse()
                            .map_err(|_| Error::Parse(format!("bad workload q {v:?}")))?,
                    );
                }
            }
            continue;
        }
        let mut items = BTreeSet::new();
        for token in line.split_whitespace() {
            items.insert(vocab.require(token)?);
        }
        queries.push(CountQuery::new(items)?);
    }
    if queries.is_empty() {
        return Err(Error::EmptyWorkload);
    }
    let q = q.unwrap_or_else(|| queries.iter().map(|c| c.items.len()).max().unwrap_or(1));
    Ok(Workload { queries, seed, q })
}

/// Everything a finished run reports: loss, suppression share, and query
/// accuracy over a workload when one was evaluated.
#[derive(Clone, Debug)]
pub struct MetricsReport {
    pub ul: f64,
    pub suppressed_fraction: f64,
    pub avg_re: Option<f64>,
    pub included_queries: usize,
    pub excluded_queries: usize,
    pub notes: Vec<String>,
    /// Per query: sorted tokens, outcome.
    pub queries: Vec<(String, QueryOutcome)>,
}

impl MetricsReport {
    /// Evaluates everything the report holds. Pass `workload: None` to skip
    /// the query section (recorded with a note).
    pub fn build(
        map: &AnonymizationMap,
        data: &Dataset,
        anon: &AnonDataset,
        weights: &WeightPolicy,
        penalties: &PenaltyPolicy,
        workload: Option<&Workload>,
        include_zero_exact: bool,
    ) -> Result<Self, Error> {
        let ul = ul_dataset(map, anon, weights, penalties, data)?;
        let mut report = MetricsReport {
            ul,
            suppressed_fraction: map.suppressed_fraction(),
            avg_re: None,
            included_queries: 0,
            excluded_queries: 0,
            notes: Vec::new(),
            queries: Vec::new(),
        };
        let Some(workload) = workload else {
            report.notes.push("no workload evaluated".to_string());
            return Ok(report);
        };
        let vocab = data.vocabulary();
        let mut sum = 0.0;
        for query in &workload.queries {
            let outcome = relative_error(query, map, data, anon)?;
            let included = !outcome.zero_exact || include_zero_exact;
            if included {
                sum += outcome.re;
                report.included_queries += 1;
            } else {
                report.excluded_queries += 1;
            }
            report
                .queries
                .push((query.tokens(vocab).join(" "), outcome));
        }
        if report.included_queries > 0 {
            report.avg_re = Some(sum / report.included_queries as f64);
        } else {
            report
                .notes
                .push("all queries had zero exact answers".to_string());
        }
        Ok(report)
    }

    /// Key-value text plus one tab-separated line per query. Floats print
    /// in shortest round-trip form, so equal inputs render byte-equal.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("ul={}\n", self.ul));
        out.push_str(&format!(
            "suppressed_fraction={}\n",
            self.suppressed_fraction
        ));
        match self.avg_re {
            Some(v) => out.push_str(&format!("avg_re={v}\n")),
            None => out.push_str("avg_re=\n"),
        }
        out.push_str(&format!("queries_included={}\n", self.included_queries));
        out.push_str(&format!("queries_excluded={}\n", self.excluded_queries));
        for note in &self.notes {
            out.push_str(&format!("note={note}\n"));
        }
        if !self.queries.is_empty() {
            out.push_str("# query\titems\texact\testimate\trelative_error\tzero_exact\n");
        }
        for (i, (items, o)) in self.queries.iter().enumerate() {
            out.push_str(&format!(
                "query\t{i}\t{items}\t{}\t{}\t{}\t{}\n",
                o.exact, o.estimate, o.re, o.zero_exact as u8
            ));
        }
        out
    }
}
