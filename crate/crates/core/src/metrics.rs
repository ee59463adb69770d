//! Utility-loss accounting: how much information an anonymization throws
//! away.
//!
//! Each generalized group is charged the product of three terms: a size
//! ratio `(2^g - 1) / (2^M - 1)` comparing the group's non-empty subsets to
//! the vocabulary's, a semantic weight in `[0, 1]`, and the group's support
//! share in the anonymized data. Singleton groups are untouched items and
//! charge nothing. Each suppressed item is charged a penalty. The dataset
//! score is the sum of both parts.

use std::collections::{BTreeSet, HashMap};

use num_bigint::BigUint;

use crate::anonmap::{AnonDataset, AnonymizationMap};
use crate::dataset::{Dataset, ItemId, Vocabulary};
use crate::error::Error;

/// An item hierarchy: items are the leaves, internal nodes name broader
/// concepts, and a single root covers everything.
#[derive(Clone, Debug)]
pub struct Taxonomy {
    labels: Vec<String>,
    parent: Vec<Option<usize>>,
    depth: Vec<usize>,
    leaf_count: Vec<usize>,
    leaf_of: Vec<usize>,
    #[allow(dead_code)]
    root: usize,
}

impl Taxonomy {
    /// Parses either supported layout. A file whose content lines contain a
    /// tab is read as a `child<TAB>parent` edge list; otherwise it is read
    /// as an indentation tree (children indented deeper than their parent,
    /// spaces only). Leaves must match the vocabulary exactly.
    pub fn parse(source: &str, vocab: &Vocabulary) -> Result<Self, Error> {
        let content: Vec<&str> = source
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
            .collect();
        if content.is_empty() {
            return Err(Error::Parse("taxonomy file has no content".to_string()));
        }
        let edges = if content.iter().any(|l| l.contains('\t')) {
            Self::edges_from_edge_list(&content)?
        } else {
            Self::edges_from_indentation(&content)?
        };
        Self::from_edges(edges, vocab)
    }

    fn edges_from_edge_list(lines: &[&str]) -> Result<Vec<(String, String)>, Error> {
        let mut edges = Vec::new();
        for line in lines {
            let Some((child, parent)) = line.split_once('\t') else {
                return Err(Error::Parse(format!(
                    "taxonomy edge line without a tab: {line:?}"
                )));
            };
            let child = child.trim();
            let parent = parent.trim();
            if child.is_empty() || parent.is_empty() || parent.contains('\t') {
                return Err(Error::Parse(format!(
                    "taxonomy edge must be 'child<TAB>parent': {line:?}"
                )));
            }
            edges.push((child.to_string(), parent.to_string()));
        }
        Ok(edges)
    }

    fn edges_from_indentation(lines: &[&str]) -> Result<Vec<(String, String)>, Error> {
        let mut edges = Vec::new();
        let mut stack: Vec<(usize, String)> = Vec::new();
        let mut root_seen = false;
        for line in lines {
            let indent = line.len() - line.trim_start().len();
            let label = line.trim();
            if label.split_whitespace().count() != 1 {
                return Err(Error::Parse(format!(
                    "taxonomy node must be a single token: {label:?}"
                )));
            }
            while stack.last().is_some_and(|(i, _)| *i >= indent) {
                stack.pop();
            }
            match stack.last() {
                Some((_, parent)) => edges.push((label.to_string(), parent.clone())),
                None => {
                    if root_seen {
                        return Err(Error::Parse(format!(
                            "taxonomy has more than one root ({label:?})"
                        )));
                    }
                    root_seen = true;
                }
            }
            stack.push((indent, label.to_string()));
        }
        Ok(edges)
    }

    fn from_edges(edges: Vec<(String, String)>, vocab: &Vocabulary) -> Result<Self, Error> {
        let mut labels: Vec<String> = Vec::new();
        let mut by_label: HashMap<String, usize> = HashMap::new();
        let mut intern = |label: &str, labels: &mut Vec<String>| -> usize {
            if let Some(&idx) = by_label.get(label) {
                return idx;
            }
            let idx = labels.len();
            labels.push(label.to_string());
            by_label.insert(label.to_string(), idx);
            idx
        };
        let mut parent: Vec<Option<usize>> = Vec::new();
        let mut has_children: Vec<bool> = Vec::new();
        for (child, par) in &edges {
            let c = intern(child, &mut labels);
            let p = intern(par, &mut labels);
            parent.resize(labels.len(), None);
            has_children.resize(labels.len(), false);
            if c == p {
                return Err(Error::Parse(format!(
                    "taxonomy node {child:?} is its own parent"
                )));
            }
            if let Some(existing) = parent[c] {
                if existing != p {
                    return Err(Error::Parse(format!(
                        "taxonomy node {child:?} has two parents"
                    )));
                }
            }
            parent[c] = Some(p);
            has_children[p] = true;
        }
        let roots: Vec<usize> = (0..labels.len()).filter(|&n| parent[n].is_none()).collect();
        let [root] = roots.as_slice() else {
            return Err(Error::Parse(format!(
                "taxonomy must have exactly one root, found {}",
                roots.len()
            )));
        };
        let root = *root;

        let mut depth = vec![usize::MAX; labels.len()];
        depth[root] = 0;
        for start in 0..labels.len() {
            let mut path = Vec::new();
            let mut node = start;
            while depth[node] == usize::MAX {
                path.push(node);
                node = parent[node].expect("non-root nodes have parents");
                if path.contains(&node) {
                    return Err(Error::Parse(format!(
                        "taxonomy contains a cycle through {:?}",
                        labels[node]
                    )));
                }
            }
            let mut d = depth[node];
            for &n in path.iter().rev() {
                d += 1;
                depth[n] = d;
            }
        }

        let mut leaf_of = vec![usize::MAX; vocab.len()];
        let mut leaf_count = vec![0usize; labels.len()];
        for n in 0..labels.len() {
            if has_children[n] {
                continue;
            }
            let Some(item) = vocab.id(&labels[n]) else {
                return Err(Error::TaxonomyMismatch(format!(
                    "leaf {:?} is not a dataset item",
                    labels[n]
                )));
            };
            leaf_of[item.0 as usize] = n;
            leaf_count[n] = 1;
        }
        for (i, &leaf) in leaf_of.iter().enumerate() {
            if leaf == usize::MAX {
                return Err(Error::TaxonomyMismatch(format!(
                    "item {:?} is missing from the taxonomy or is not a leaf",
                    vocab.token(ItemId(i as u32))
                )));
            }
        }

        let mut order: Vec<usize> = (0..labels.len()).collect();
        order.sort_by_key(|&n| std::cmp::Reverse(depth[n]));
        for n in order {
            if let Some(p) = parent[n] {
                leaf_count[p] += leaf_count[n];
            }
        }

        Ok(Taxonomy {
            labels,
            parent,
            depth,
            leaf_count,
            leaf_of,
            root,
        })
    }

    fn lca(&self, a: usize, b: usize) -> usize {
        let (mut a, mut b) = (a, b);
        while self.depth[a] > self.depth[b] {
            a = self.parent[a].expect("deeper node has a parent");
        }
        while self.depth[b] > self.depth[a] {
            b = self.parent[b].expect("deeper node has a parent");
        }
        while a != b {
            a = self.parent[a].expect("distinct nodes at depth 0 cannot exist");
            b = self.parent[b].expect("distinct nodes at depth 0 cannot exist");
        }
        a
    }

    /// Number of leaves under the lowest common ancestor of `items`.
    pub fn lca_leaf_count(&self, items: &BTreeSet<ItemId>) -> Result<usize, Error> {
        let mut nodes = items.iter().map(|&i| {
            self.leaf_of
                .get(i.0 as usize)
                .copied()
                .filter(|&n| n != usize::MAX)
                .ok_or_else(|| {
                    Error::TaxonomyMismatch(format!("item id {i} not present in the taxonomy"))
                })
        });
        let Some(first) = nodes.next() else {
            return Err(Error::InvalidParameter(
                "lowest common ancestor of no items".to_string(),
            ));
        };
        let mut lca = first?;
        for node in nodes {
            lca = self.lca(lca, node?);
        }
        Ok(self.leaf_count[lca])
    }

    /// Label of the lowest common ancestor, for diagnostics.
    pub fn lca_label(&self, items: &BTreeSet<ItemId>) -> Result<&str, Error> {
        let count_probe = self.lca_leaf_count(items)?;
        let _ = count_probe;
        let mut nodes = items.iter().map(|&i| self.leaf_of[i.0 as usize]);
        let mut lca = nodes.next().expect("checked non-empty");
        for node in nodes {
            lca = self.lca(lca, node);
        }
        Ok(&self.labels[lca])
    }
}

/// How generalized groups are weighted in the loss metric.
#[derive(Clone, Debug)]
pub enum WeightPolicy {
    /// Every group weighs the same constant in `[0, 1]`.
    Uniform(f64),
    /// A group weighs the share of the vocabulary spanned by the lowest
    /// common ancestor of its members: merging semantically close items is
    /// cheap, merging across the hierarchy expensive.
    TaxonomyLca(Taxonomy),
}

impl WeightPolicy {
    pub fn uniform_default() -> Self {
        WeightPolicy::Uniform(1.0)
    }

    /// Weight of a group with the given members, in `[0, 1]`.
    pub fn weight(&self, members: &BTreeSet<ItemId>, vocab_size: usize) -> Result<f64, Error> {
        match self {
            WeightPolicy::Uniform(c) => Ok(*c),
            WeightPolicy::TaxonomyLca(tax) => {
                Ok(tax.lca_leaf_count(members)? as f64 / vocab_size as f64)
            }
        }
    }

    /// Integer numerator of the weight for exact candidate comparison:
    /// constant across candidates under `Uniform`, the LCA leaf count under
    /// `TaxonomyLca`. The implied denominator is fixed per policy, so
    /// ratios of two candidates compare correctly. A zero uniform weight
    /// makes every candidate cost zero, so everything ranks equal there.
    fn rank_numerator(&self, members: &BTreeSet<ItemId>) -> Result<u64, Error> {
        match self {
            WeightPolicy::Uniform(c) => Ok(if *c == 0.0 { 0 } else { 1 }),
            WeightPolicy::TaxonomyLca(tax) => Ok(tax.lca_leaf_count(members)? as u64),
        }
    }
}

/// How suppressed items are penalized in the loss metric.
#[derive(Clone, Debug)]
pub enum PenaltyPolicy {
    /// Penalty is the item's support share in the original data, keeping
    /// suppression on the same scale as generalization terms.
    NormalizedSupport,
    /// Penalty is the raw support count in the original data.
    RawSupport,
    /// Penalty is a fixed non-negative constant per item.
    Constant(f64),
}

impl PenaltyPolicy {
    /// Penalty charged for suppressing `item`, measured on the original
    /// dataset.
    pub fn penalty(&self, item: ItemId, data: &Dataset) -> Result<f64, Error> {
        match self {
            PenaltyPolicy::NormalizedSupport => {
                Ok(data.support(&[item])? as f64 / data.n_transactions() as f64)
            }
            PenaltyPolicy::RawSupport => Ok(data.support(&[item])? as f64),
            PenaltyPolicy::Constant(c) => {
                debug_assert!(*c >= 0.0, "penalty constants must be non-negative");
                Ok(*c)
            }
        }
    }
}

/// The ratio `(2^g - 1) / (2^M - 1)` between the non-empty subset counts of
/// a size-`g` group and of the whole vocabulary, computed in floating point
/// via exponent arithmetic so large `M` never overflows. For `M` much larger
/// than `g` the ratio underflows to zero; scores are only compared at fixed
/// `M`, and candidate ranking uses exact integers instead (see
/// [`candidate_rank`]), so the underflow never reorders anything.
pub fn size_ratio(group_size: usize, vocab_size: usize) -> f64 {
    let g = group_size as f64;
    let m = vocab_size as f64;
    (g - m).exp2() * (1.0 - (-g).exp2()) / (1.0 - (-m).exp2())
}

/// Loss charged to one group: size ratio times weight times support share.
/// `n_transactions` is the normalizer for the support share; callers
/// normally pass the corpus size. Singleton groups charge zero.
pub fn ul_item(
    members: &BTreeSet<ItemId>,
    anon_support: usize,
    weights: &WeightPolicy,
    n_transactions: usize,
    vocab_size: usize,
) -> Result<f64, Error> {
    if members.len() <= 1 {
        return Ok(0.0);
    }
    let w = weights.weight(members, vocab_size)?;
    Ok(size_ratio(members.len(), vocab_size) * w * (anon_support as f64 / n_transactions as f64))
}

/// Total loss of an anonymization: group terms summed in canonical group
/// order plus suppression penalties summed in token order, so the float
/// result is reproducible bit for bit.
pub fn ul_dataset(
    map: &AnonymizationMap,
    anon: &AnonDataset,
    weights: &WeightPolicy,
    penalties: &PenaltyPolicy,
    data: &Dataset,
) -> Result<f64, Error> {
    let vocab = data.vocabulary();
    let n = data.n_transactions();
    let m = data.vocab_size();
    let mut total = 0.0;
    for gid in map.gids_by_key(vocab) {
        let members = map.group_members(gid)?;
        let support = anon.support(&[gid]);
        total += ul_item(members, support, weights, n, m)?;
    }
    let mut suppressed: Vec<ItemId> = map.suppressed().iter().copied().collect();
    suppressed.sort_by(|&a, &b| vocab.token(a).cmp(vocab.token(b)));
    for item in suppressed {
        total += penalties.penalty(item, data)?;
    }
    Ok(total)
}

/// Exact integer score ordering candidate merges by their would-be loss:
/// `(2^g - 1) * weight_numerator * union_support`. The omitted denominators
/// are identical for every candidate in one comparison, so smaller score
/// means strictly smaller loss, with no floating-point rounding involved.
pub fn candidate_rank(
    weights: &WeightPolicy,
    members: &BTreeSet<ItemId>,
    union_support: usize,
) -> Result<BigUint, Error> {
    let subset_count = (BigUint::from(1u8) << members.len()) - 1u8;
    let w = BigUint::from(weights.rank_numerator(members)?);
    Ok(subset_count * w * BigUint::from(union_support))
}
