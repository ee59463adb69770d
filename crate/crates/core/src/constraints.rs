//! Privacy and utility constraints: what must be hidden and what may be
//! merged.
//!
//! A privacy constraint is a non-empty itemset an attacker might know about
//! someone. It is satisfied when its image under the current map is either
//! supported by at least `k` transactions or has no support at all with every
//! proper subset of the image also at `k`-or-zero support, so partial
//! knowledge never narrows a person down to fewer than `k` rows.
//!
//! A utility constraint set partitions the vocabulary into blocks; groups may
//! only form inside one block, and at most `s` percent of all items may be
//! suppressed.

use std::collections::{BTreeSet, HashSet};

use crate::anonmap::{AnonDataset, AnonymizationMap, Gid};
use crate::dataset::{ItemId, Vocabulary};
use crate::error::Error;

/// Support counting over group itemsets. Implemented by [`AnonDataset`] and
/// by the anonymization loop's incremental working state.
pub trait GroupSupport {
    /// Number of rows containing every group in `gids`; the empty set is
    /// supported by all rows.
    fn group_support(&self, gids: &[Gid]) -> usize;
}

/// One itemset an adversary could use for linking, together with its current
/// image under the anonymization map.
///
/// Invariant: `live_groups` always equals the set of live groups the
/// non-suppressed original items map to, deduplicated.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrivacyConstraint {
    original_items: BTreeSet<ItemId>,
    live_groups: BTreeSet<Gid>,
}

impl PrivacyConstraint {
    /// Builds a constraint over `original_items` with its image derived from
    /// `map`. The itemset must be non-empty.
    pub fn new(original_items: BTreeSet<ItemId>, map: &AnonymizationMap) -> Result<Self, Error> {
        if original_items.is_empty() {
            return Err(Error::InvalidParameter(
                "privacy constraint over the empty itemset".to_string(),
            ));
        }
        let live_groups = Self::derive_live(&original_items, map)?;
        Ok(PrivacyConstraint {
            original_items,
            live_groups,
        })
    }

    /// The image of an itemset under a map: live groups of the non-suppressed
    /// members, deduplicated.
    pub fn derive_live(
        items: &BTreeSet<ItemId>,
        map: &AnonymizationMap,
    ) -> Result<BTreeSet<Gid>, Error> {
        let mut live = BTreeSet::new();
        for &item in items {
            if let Some(gid) = map.group_of(item)? {
                live.insert(gid);
            }
        }
        Ok(live)
    }

    pub fn original_items(&self) -> &BTreeSet<ItemId> {
        &self.original_items
    }

    pub fn live_groups(&self) -> &BTreeSet<Gid> {
        &self.live_groups
    }

    /// Rewrites the image after groups `x` and `y` merged into `merged`.
    pub fn apply_merge(&mut self, x: Gid, y: Gid, merged: Gid) {
        let had = self.live_groups.remove(&x) | self.live_groups.remove(&y);
        if had {
            self.live_groups.insert(merged);
        }
    }

    /// Rewrites the image after group `g` was suppressed.
    pub fn apply_suppress(&mut self, g: Gid) {
        self.live_groups.remove(&g);
    }

    /// Satisfaction check against any support source; see
    /// [`itemset_satisfied`] for the rule.
    pub fn is_satisfied<S: GroupSupport>(&self, sup: &S, k: usize) -> bool {
        itemset_satisfied(&self.live_groups, sup, k)
    }
}

/// The satisfaction rule for one group itemset: satisfied when its support
/// is at least `k`, or when it has zero support and every proper non-empty
/// subset has support at least `k` or exactly zero. The empty itemset is
/// satisfied.
///
/// The subset condition is checked by recursion over one-smaller subsets
/// with two prunings: a subset with support `>= k` is skipped entirely
/// (all of its own subsets have at least that support), and visited subsets
/// are memoized. The worst case is still exponential in the itemset size.
pub fn itemset_satisfied<S: GroupSupport>(itemset: &BTreeSet<Gid>, sup: &S, k: usize) -> bool {
    if itemset.is_empty() {
        return true;
    }
    let gids: Vec<Gid> = itemset.iter().copied().collect();
    let support = sup.group_support(&gids);
    if support >= k {
        return true;
    }
    if support > 0 {
        return false;
    }
    let mut memo = HashSet::new();
    subsets_clean(&gids, sup, k, &mut memo)
}

fn subsets_clean<S: GroupSupport>(
    itemset: &[Gid],
    sup: &S,
    k: usize,
    memo: &mut HashSet<Vec<Gid>>,
) -> bool {
    if itemset.len() <= 1 {
        return true;
    }
    for skip in 0..itemset.len() {
        let mut subset = Vec::with_capacity(itemset.len() - 1);
        subset.extend_from_slice(&itemset[..skip]);
        subset.extend_from_slice(&itemset[skip + 1..]);
        if !memo.insert(subset.clone()) {
            continue;
        }
        let support = sup.group_support(&subset);
        if support >= k {
            continue;
        }
        if support > 0 {
            return false;
        }
        if !subsets_clean(&subset, sup, k, memo) {
            return false;
        }
    }
    true
}

/// All privacy constraints of a run plus the protection level `k`.
#[derive(Clone, Debug)]
pub struct PrivacyConstraintSet {
    constraints: Vec<PrivacyConstraint>,
    k: usize,
}

impl PrivacyConstraintSet {
    /// Builds the set from authored itemsets, deriving each image from
    /// `map`. Requires `k >= 2`; `k = 1` would protect nothing.
    pub fn new(
        itemsets: Vec<BTreeSet<ItemId>>,
        k: usize,
        map: &AnonymizationMap,
    ) -> Result<Self, Error> {
        if k < 2 {
            return Err(Error::InvalidParameter(format!(
                "k must be at least 2, got {k}"
            )));
        }
        let constraints = itemsets
            .into_iter()
            .map(|items| PrivacyConstraint::new(items, map))
            .collect::<Result<_, _>>()?;
        Ok(PrivacyConstraintSet { constraints, k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn constraints(&self) -> &[PrivacyConstraint] {
        &self.constraints
    }

    pub(crate) fn constraints_mut(&mut self) -> &mut [PrivacyConstraint] {
        &mut self.constraints
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    /// The same authored itemsets re-derived against another map, for
    /// checking a finished anonymization.
    pub fn rebind(&self, map: &AnonymizationMap) -> Result<Self, Error> {
        let itemsets = self
            .constraints
            .iter()
            .map(|c| c.original_items.clone())
            .collect();
        PrivacyConstraintSet::new(itemsets, self.k, map)
    }
}

/// Checks one constraint against the anonymized dataset. The constraint's
/// image must have been maintained consistently with `map`; this is
/// re-verified in debug builds.
pub fn check_privacy_constraint(
    p: &PrivacyConstraint,
    map: &AnonymizationMap,
    anon: &AnonDataset,
    k: usize,
) -> bool {
    debug_assert_eq!(
        PrivacyConstraint::derive_live(&p.original_items, map).ok(),
        Some(p.live_groups.clone()),
        "constraint image out of sync with the map"
    );
    p.is_satisfied(anon, k)
}

/// True when every constraint in the set is satisfied.
pub fn check_privacy_set(
    set: &PrivacyConstraintSet,
    map: &AnonymizationMap,
    anon: &AnonDataset,
) -> bool {
    set.constraints
        .iter()
        .all(|p| check_privacy_constraint(p, map, anon, set.k))
}

/// A partition of the vocabulary into generalization blocks plus the
/// suppression budget `s`, in percent of the vocabulary.
#[derive(Clone, Debug)]
pub struct UtilityConstraintSet {
    blocks: Vec<BTreeSet<ItemId>>,
    block_of: Vec<usize>,
    s: f64,
}

impl UtilityConstraintSet {
    /// Validates that `blocks` partition a vocabulary of `vocab_size` items
    /// and that the budget is a percentage.
    pub fn new(blocks: Vec<BTreeSet<ItemId>>, s: f64, vocab_size: usize) -> Result<Self, Error> {
        if !(0.0..=100.0).contains(&s) {
            return Err(Error::InvalidParameter(format!(
                "suppression budget must be in [0, 100], got {s}"
            )));
        }
        let mut block_of = vec![usize::MAX; vocab_size];
        for (b, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::NotAPartition(format!("block {b} is empty")));
            }
            for &item in block {
                let slot = block_of
                    .get_mut(item.0 as usize)
                    .ok_or_else(|| Error::NotAPartition(format!("item id {item} out of range")))?;
                if *slot != usize::MAX {
                    return Err(Error::NotAPartition(format!(
                        "item id {item} appears in blocks {} and {b}",
                        *slot
                    )));
                }
                *slot = b;
            }
        }
        if let Some(missing) = block_of.iter().position(|&b| b == usize::MAX) {
            return Err(Error::NotAPartition(format!(
                "item id {missing} not covered by any block"
            )));
        }
        Ok(UtilityConstraintSet {
            blocks,
            block_of,
            s,
        })
    }

    /// The coarsest partition: every item in one block. Anything may merge
    /// with anything.
    pub fn coarsest(vocab_size: usize, s: f64) -> Result<Self, Error> {
        let block = (0..vocab_size as u32).map(ItemId).collect();
        UtilityConstraintSet::new(vec![block], s, vocab_size)
    }

    pub fn blocks(&self) -> &[BTreeSet<ItemId>] {
        &self.blocks
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn block_of(&self, item: ItemId) -> Result<usize, Error> {
        self.block_of
            .get(item.0 as usize)
            .copied()
            .ok_or_else(|| Error::UnknownItem(format!("item id {item} out of range")))
    }

    /// True when the suppressed share would stay within budget after
    /// suppressing `extra` more items. Comparison uses the same integer
    /// numerator on both sides, so the boundary case is exact.
    pub fn within_budget(&self, suppressed: usize, extra: usize, vocab_size: usize) -> bool {
        100.0 * (suppressed + extra) as f64 <= self.s * vocab_size as f64
    }
}

/// True when every live group stays inside a single block and the suppressed
/// share of the vocabulary is at most `s` percent.
pub fn check_utility_set(u: &UtilityConstraintSet, map: &AnonymizationMap) -> bool {
    for (_, members) in map.groups() {
        let mut blocks = members.iter().map(|&i| u.block_of(i));
        let Some(Ok(first)) = blocks.next() else {
            return false;
        };
        for b in blocks {
            match b {
                Ok(b) if b == first => {}
                _ => return false,
            }
        }
    }
    u.within_budget(map.suppressed().len(), 0, map.vocab_size())
}

/// Parses a line-oriented itemset file: one itemset per line, tokens
/// whitespace-separated, `#` comments and blank lines skipped.
pub fn parse_itemsets(source: &str, vocab: &Vocabulary) -> Result<Vec<BTreeSet<ItemId>>, Error> {
    let mut itemsets = Vec::new();
    for line in source.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut items = BTreeSet::new();
        for token in line.split_whitespace() {
            items.insert(vocab.require(token)?);
        }
        itemsets.push(items);
    }
    Ok(itemsets)
}

/// Parses a privacy constraint file: each line is one potentially linkable
/// itemset.
pub fn parse_privacy_file(
    source: &str,
    vocab: &Vocabulary,
) -> Result<Vec<BTreeSet<ItemId>>, Error> {
    parse_itemsets(source, vocab)
}

/// Parses a utility constraint file: each line is one block. Items the file
/// never mentions are gathered into one implicit final block, so an empty
/// file yields the coarsest partition. An item in two blocks is an error.
pub fn parse_utility_file(
    source: &str,
    vocab: &Vocabulary,
) -> Result<Vec<BTreeSet<ItemId>>, Error> {
    let mut blocks = parse_itemsets(source, vocab)?;
    let mut seen = vec![false; vocab.len()];
    for (b, block) in blocks.iter().enumerate() {
        for &item in block {
            if seen[item.0 as usize] {
                return Err(Error::NotAPartition(format!(
                    "item {:?} appears in more than one block (line {})",
                    vocab.token(item),
                    b + 1
                )));
            }
            seen[item.0 as usize] = true;
        }
    }
    let rest: BTreeSet<ItemId> = seen
        .iter()
        .enumerate()
        .filter(|(_, &s)| !s)
        .map(|(i, _)| ItemId(i as u32))
        .collect();
    if !rest.is_empty() {
        blocks.push(rest);
    }
    Ok(blocks)
}

/// Serializes itemsets one per line, tokens sorted lexicographically. The
/// format round-trips through [`parse_itemsets`].
pub fn render_itemsets(itemsets: &[BTreeSet<ItemId>], vocab: &Vocabulary) -> String {
    let mut out = String::new();
    for items in itemsets {
        let mut tokens: Vec<&str> = items.iter().map(|&i| vocab.token(i)).collect();
        tokens.sort_unstable();
        out.push_str(&tokens.join(" "));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anonmap::AnonymizationMap;
    use crate::dataset::Dataset;

    const CORPUS: &str = "\
a b c d e f g h
a c e f g
c d e f h
a c e f
e f g h
d e f g
a b d e
a c f
a c
b h
";

    fn fig_dataset() -> Dataset {
        Dataset::parse(CORPUS).unwrap()
    }

    fn items(data: &Dataset, tokens: &[&str]) -> BTreeSet<ItemId> {
        tokens
            .iter()
            .map(|t| data.vocabulary().id(t).unwrap())
            .collect()
    }

    fn golden_map(data: &Dataset) -> AnonymizationMap {
        let vocab = data.vocabulary();
        let mut map = AnonymizationMap::identity(data.vocab_size());
        let gid =
            |map: &AnonymizationMap, t: &str| map.group_of(vocab.id(t).unwrap()).unwrap().unwrap();
        let b = gid(&map, "b");
        let a = gid(&map, "a");
        map.merge(b, a).unwrap();
        let d = gid(&map, "d");
        map.suppress_group(d).unwrap();
        let g = gid(&map, "g");
        let h = gid(&map, "h");
        map.merge(g, h).unwrap();
        map
    }

    #[test]
    fn constraint_unsatisfied_on_original_data() {
        let data = fig_dataset();
        let map = AnonymizationMap::identity(data.vocab_size());
        let anon = map.apply(&data).unwrap();
        let p = PrivacyConstraint::new(items(&data, &["a", "b", "c"]), &map).unwrap();
        assert!(!check_privacy_constraint(&p, &map, &anon, 5));
    }

    #[test]
    fn constraint_satisfied_on_anonymized_data() {
        let data = fig_dataset();
        let map = golden_map(&data);
        let anon = map.apply(&data).unwrap();
        let p1 = PrivacyConstraint::new(items(&data, &["a", "b", "c"]), &map).unwrap();
        let p2 = PrivacyConstraint::new(items(&data, &["d", "e", "f", "g", "h"]), &map).unwrap();
        assert!(check_privacy_constraint(&p1, &map, &anon, 5));
        assert!(check_privacy_constraint(&p2, &map, &anon, 5));

        let set = PrivacyConstraintSet::new(
            vec![
                items(&data, &["a", "b", "c"]),
                items(&data, &["d", "e", "f", "g", "h"]),
            ],
            5,
            &map,
        )
        .unwrap();
        assert!(check_privacy_set(&set, &map, &anon));
    }

    #[test]
    fn fully_suppressed_constraint_is_satisfied() {
        let data = fig_dataset();
        let mut map = AnonymizationMap::identity(data.vocab_size());
        let d = map
            .group_of(data.vocabulary().id("d").unwrap())
            .unwrap()
            .unwrap();
        map.suppress_group(d).unwrap();
        let anon = map.apply(&data).unwrap();
        let p = PrivacyConstraint::new(items(&data, &["d"]), &map).unwrap();
        assert!(p.live_groups().is_empty());
        assert!(check_privacy_constraint(&p, &map, &anon, 5));
    }

    #[test]
    fn zero_support_needs_clean_subsets() {
        let dirty = Dataset::parse("a\nb\n").unwrap();
        let map = AnonymizationMap::identity(dirty.vocab_size());
        let anon = map.apply(&dirty).unwrap();
        let p = PrivacyConstraint::new(items(&dirty, &["a", "b"]), &map).unwrap();
        assert!(!check_privacy_constraint(&p, &map, &anon, 2));

        let clean = Dataset::parse("a\na\nb\nb\n").unwrap();
        let map = AnonymizationMap::identity(clean.vocab_size());
        let anon = map.apply(&clean).unwrap();
        let p = PrivacyConstraint::new(items(&clean, &["a", "b"]), &map).unwrap();
        assert!(check_privacy_constraint(&p, &map, &anon, 2));
    }

    #[test]
    fn image_maintenance_matches_rederivation() {
        let data = fig_dataset();
        let vocab = data.vocabulary();
        let mut map = AnonymizationMap::identity(data.vocab_size());
        let mut p = PrivacyConstraint::new(items(&data, &["a", "b", "d", "g"]), &map).unwrap();

        let gid =
            |map: &AnonymizationMap, t: &str| map.group_of(vocab.id(t).unwrap()).unwrap().unwrap();
        let (b, a) = (gid(&map, "b"), gid(&map, "a"));
        let merged = map.merge(b, a).unwrap();
        p.apply_merge(b, a, merged);
        assert_eq!(
            *p.live_groups(),
            PrivacyConstraint::derive_live(p.original_items(), &map).unwrap()
        );

        let d = gid(&map, "d");
        map.suppress_group(d).unwrap();
        p.apply_suppress(d);
        assert_eq!(
            *p.live_groups(),
            PrivacyConstraint::derive_live(p.original_items(), &map).unwrap()
        );

        let (g, h) = (gid(&map, "g"), gid(&map, "h"));
        let merged = map.merge(g, h).unwrap();
        p.apply_merge(g, h, merged);
        assert_eq!(
            *p.live_groups(),
            PrivacyConstraint::derive_live(p.original_items(), &map).unwrap()
        );
    }

    #[test]
    fn merge_outside_the_constraint_leaves_it_alone() {
        let data = fig_dataset();
        let vocab = data.vocabulary();
        let mut map = AnonymizationMap::identity(data.vocab_size());
        let mut p = PrivacyConstraint::new(items(&data, &["c"]), &map).unwrap();
        let before = p.live_groups().clone();
        let g = map.group_of(vocab.id("g").unwrap()).unwrap().unwrap();
        let h = map.group_of(vocab.id("h").unwrap()).unwrap().unwrap();
        let merged = map.merge(g, h).unwrap();
        p.apply_merge(g, h, merged);
        assert_eq!(*p.live_groups(), before);
    }

    #[test]
    fn k_below_two_is_rejected() {
        let data = fig_dataset();
        let map = AnonymizationMap::identity(data.vocab_size());
        let err = PrivacyConstraintSet::new(vec![items(&data, &["a"])], 1, &map);
        assert!(matches!(err, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn utility_set_validates_partition() {
        let data = fig_dataset();
        let blocks = parse_utility_file("a b\nc\nd\ne f g h\n", data.vocabulary()).unwrap();
        assert_eq!(blocks.len(), 4);
        assert!(UtilityConstraintSet::new(blocks, 15.0, data.vocab_size()).is_ok());

        let overlap = parse_utility_file("a b\nb c\n", data.vocabulary());
        assert!(matches!(overlap, Err(Error::NotAPartition(_))));

        let bad_s = UtilityConstraintSet::coarsest(data.vocab_size(), 101.0);
        assert!(matches!(bad_s, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn unlisted_items_form_an_implicit_block() {
        let data = fig_dataset();
        let blocks = parse_utility_file("a b\n", data.vocabulary()).unwrap();
        assert_eq!(blocks.len(), 2);
        assert_eq!(blocks[0], items(&data, &["a", "b"]));
        assert_eq!(blocks[1], items(&data, &["c", "d", "e", "f", "g", "h"]));

        let empty = parse_utility_file("", data.vocabulary()).unwrap();
        assert_eq!(empty.len(), 1);
        assert_eq!(empty[0].len(), data.vocab_size());
    }

    #[test]
    fn utility_check_on_the_golden_state() {
        let data = fig_dataset();
        let blocks = parse_utility_file("a b\nc\nd\ne f g h\n", data.vocabulary()).unwrap();
        let u = UtilityConstraintSet::new(blocks, 15.0, data.vocab_size()).unwrap();
        let map = golden_map(&data);
        assert!(check_utility_set(&u, &map));

        let tight =
            UtilityConstraintSet::new(u.blocks().to_vec(), 12.0, data.vocab_size()).unwrap();
        assert!(!check_utility_set(&tight, &map));

        let identity = AnonymizationMap::identity(data.vocab_size());
        let zero = UtilityConstraintSet::new(u.blocks().to_vec(), 0.0, data.vocab_size()).unwrap();
        assert!(check_utility_set(&zero, &identity));
    }

    #[test]
    fn cross_block_group_violates_utility() {
        let data = fig_dataset();
        let vocab = data.vocabulary();
        let blocks = parse_utility_file("a b\nc\nd\ne f g h\n", vocab).unwrap();
        let u = UtilityConstraintSet::new(blocks, 100.0, data.vocab_size()).unwrap();
        let mut map = AnonymizationMap::identity(data.vocab_size());
        let a = map.group_of(vocab.id("a").unwrap()).unwrap().unwrap();
        let c = map.group_of(vocab.id("c").unwrap()).unwrap().unwrap();
        map.merge(a, c).unwrap();
        assert!(!check_utility_set(&u, &map));
    }

    #[test]
    fn privacy_file_parses_itemsets() {
        let data = fig_dataset();
        let sets = parse_privacy_file("# linkable\na b c\nd e f g h\n", data.vocabulary()).unwrap();
        assert_eq!(sets.len(), 2);
        assert_eq!(sets[0], items(&data, &["a", "b", "c"]));
        assert!(matches!(
            parse_privacy_file("a z\n", data.vocabulary()),
            Err(Error::UnknownItem(_))
        ));
    }

    #[test]
    fn itemsets_render_roundtrip() {
        let data = fig_dataset();
        let sets = vec![items(&data, &["c", "a", "f"]), items(&data, &["b", "h"])];
        let text = render_itemsets(&sets, data.vocabulary());
        assert_eq!(text, "a c f\nb h\n");
        assert_eq!(parse_itemsets(&text, data.vocabulary()).unwrap(), sets);
    }
}
