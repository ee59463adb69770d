//! Anonymization state: a partition of the vocabulary into generalized
//! groups plus a set of suppressed items, and its application to a dataset.
//!
//! A group stands for "one or more of its members". A transaction is
//! anonymized by replacing each item with its group (collapsing duplicates)
//! and dropping suppressed items. The map starts as the identity, one
//! singleton group per item, and is refined by two operations: merging two
//! groups and suppressing a group.
//!
//! Group ids are internal handles and carry no stable meaning across runs.
//! Every ordering that reaches output or tie-breaking goes through the
//! canonical key of a group: its member tokens sorted lexicographically.

use std::collections::{BTreeMap, BTreeSet};

use crate::constraints::GroupSupport;
use crate::dataset::{union_sorted, Dataset, ItemId, Tid, Vocabulary};
use crate::error::Error;

/// Handle of a generalized group within one [`AnonymizationMap`].
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Gid(pub u32);

impl std::fmt::Display for Gid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Where an item currently maps: into a live group or to suppression.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Mapping {
    Group(Gid),
    Suppressed,
}

/// A partition of the vocabulary into live groups and suppressed items.
///
/// Invariant: every item id below the vocabulary size belongs to exactly one
/// live group or to the suppressed set, never both, never neither.
#[derive(Clone, Debug)]
pub struct AnonymizationMap {
    groups: BTreeMap<Gid, BTreeSet<ItemId>>,
    suppressed: BTreeSet<ItemId>,
    lookup: Vec<Mapping>,
    next_gid: u32,
}

impl AnonymizationMap {
    /// The identity map over a vocabulary of `vocab_size` items: item `i`
    /// starts in its own singleton group.
    pub fn identity(vocab_size: usize) -> Self {
        let mut groups = BTreeMap::new();
        let mut lookup = Vec::with_capacity(vocab_size);
        for i in 0..vocab_size as u32 {
            let gid = Gid(i);
            groups.insert(gid, BTreeSet::from([ItemId(i)]));
            lookup.push(Mapping::Group(gid));
        }
        AnonymizationMap {
            groups,
            suppressed: BTreeSet::new(),
            lookup,
            next_gid: vocab_size as u32,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.lookup.len()
    }

    pub fn live_group_count(&self) -> usize {
        self.groups.len()
    }

    /// Live groups with their members, in group-id order. Use
    /// [`AnonymizationMap::gids_by_key`] when the order must be canonical.
    pub fn groups(&self) -> impl Iterator<Item = (Gid, &BTreeSet<ItemId>)> {
        self.groups.iter().map(|(g, m)| (*g, m))
    }

    pub fn group_members(&self, gid: Gid) -> Result<&BTreeSet<ItemId>, Error> {
        self.groups
            .get(&gid)
            .ok_or_else(|| Error::NoSuchGroup(format!("group {gid}")))
    }

    pub fn is_live(&self, gid: Gid) -> bool {
        self.groups.contains_key(&gid)
    }

    pub fn suppressed(&self) -> &BTreeSet<ItemId> {
        &self.suppressed
    }

    /// Share of the vocabulary suppressed so far, as a percentage.
    pub fn suppressed_fraction(&self) -> f64 {
        100.0 * self.suppressed.len() as f64 / self.lookup.len() as f64
    }

    pub fn mapping(&self, item: ItemId) -> Result<Mapping, Error> {
        self.lookup
            .get(item.0 as usize)
            .copied()
            .ok_or_else(|| Error::UnknownItem(format!("item id {item} out of range")))
    }

    /// The live group containing `item`, or `None` if it is suppressed.
    pub fn group_of(&self, item: ItemId) -> Result<Option<Gid>, Error> {
        Ok(match self.mapping(item)? {
            Mapping::Group(g) => Some(g),
            Mapping::Suppressed => None,
        })
    }

    /// Member tokens of a group sorted lexicographically: the canonical key
    /// used for every deterministic ordering decision.
    pub fn group_key<'v>(&self, vocab: &'v Vocabulary, gid: Gid) -> Result<Vec<&'v str>, Error> {
        let mut tokens: Vec<&str> = self
            .group_members(gid)?
            .iter()
            .map(|&i| vocab.token(i))
            .collect();
        tokens.sort_unstable();
        Ok(tokens)
    }

    /// Display form of a group: the bare token for singletons, otherwise the
    /// sorted members in parentheses, like `(a,b)`.
    pub fn display_group(&self, vocab: &Vocabulary, gid: Gid) -> Result<String, Error> {
        Ok(display_tokens(&self.group_key(vocab, gid)?))
    }

    /// Live group ids sorted by canonical key.
    pub fn gids_by_key(&self, vocab: &Vocabulary) -> Vec<Gid> {
        let mut with_keys: Vec<(Vec<&str>, Gid)> = self
            .groups
            .keys()
            .map(|&g| (self.group_key(vocab, g).expect("live gid"), g))
            .collect();
        with_keys.sort();
        with_keys.into_iter().map(|(_, g)| g).collect()
    }

    /// Merges two live groups into a fresh group holding the union of their
    /// members, and returns the new group's id.
    pub fn merge(&mut self, x: Gid, y: Gid) -> Result<Gid, Error> {
        if x == y {
            return Err(Error::InvalidParameter(format!(
                "cannot merge group {x} with itself"
            )));
        }
        let mx = self.group_members(x)?.clone();
        let my = self.group_members(y)?.clone();
        self.groups.remove(&x);
        self.groups.remove(&y);
        let merged = Gid(self.next_gid);
        self.next_gid += 1;
        let mut members = mx;
        members.extend(my);
        for &item in &members {
            self.lookup[item.0 as usize] = Mapping::Group(merged);
        }
        self.groups.insert(merged, members);
        Ok(merged)
    }

    /// Suppresses a live group: all its members disappear from every
    /// transaction. Returns the suppressed members.
    pub fn suppress_group(&mut self, x: Gid) -> Result<BTreeSet<ItemId>, Error> {
        let members = self.group_members(x)?.clone();
        self.groups.remove(&x);
        for &item in &members {
            self.lookup[item.0 as usize] = Mapping::Suppressed;
            self.suppressed.insert(item);
        }
        Ok(members)
    }

    /// Applies the map to a dataset, producing the anonymized view. The
    /// dataset must have the same vocabulary size the map was built for.
    /// Transactions whose items are all suppressed become empty rows; the
    /// row count never changes.
    pub fn apply(&self, data: &Dataset) -> Result<AnonDataset, Error> {
        if data.vocab_size() != self.lookup.len() {
            return Err(Error::VocabMismatch(format!(
                "map covers {} items, dataset has {}",
                self.lookup.len(),
                data.vocab_size()
            )));
        }
        let mut rows = Vec::with_capacity(data.n_transactions());
        let mut index: BTreeMap<Gid, Vec<Tid>> = BTreeMap::new();
        for t in data.transactions() {
            let mut row = BTreeSet::new();
            for &item in &t.items {
                if let Mapping::Group(g) = self.lookup[item.0 as usize] {
                    row.insert(g);
                }
            }
            let row: Vec<Gid> = row.into_iter().collect();
            for &g in &row {
                index.entry(g).or_default().push(t.tid);
            }
            rows.push(row);
        }
        Ok(AnonDataset {
            rows,
            index,
            n_rows: data.n_transactions(),
        })
    }

    /// Serializes the map: one line per live group in canonical order, with
    /// the display form, a tab, and the member tokens; then one final
    /// `SUPPRESSED` line listing suppressed tokens (possibly none).
    pub fn render(&self, vocab: &Vocabulary) -> String {
        let mut out = String::new();
        for gid in self.gids_by_key(vocab) {
            let key = self.group_key(vocab, gid).expect("live gid");
            out.push_str(&display_tokens(&key));
            out.push('\t');
            out.push_str(&key.join(" "));
            out.push('\n');
        }
        let mut suppressed: Vec<&str> = self.suppressed.iter().map(|&i| vocab.token(i)).collect();
        suppressed.sort_unstable();
        out.push_str("SUPPRESSED\t");
        out.push_str(&suppressed.join(" "));
        out.push('\n');
        out
    }

    /// Parses the format written by [`AnonymizationMap::render`] and checks
    /// that the result partitions the given vocabulary exactly.
    pub fn parse(source: &str, vocab: &Vocabulary) -> Result<Self, Error> {
        let mut groups: Vec<BTreeSet<ItemId>> = Vec::new();
        let mut suppressed: Option<BTreeSet<ItemId>> = None;
        for (lineno, raw) in source.lines().enumerate() {
            // only strip a CR; a trailing tab is significant ("SUPPRESSED\t"
            // with nothing suppressed)
            let line = raw.strip_suffix('\r').unwrap_or(raw);
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let Some((label, rest)) = line.split_once('\t') else {
                return Err(Error::Parse(format!(
                    "map line {}: expected '<label><TAB><items>'",
                    lineno + 1
                )));
            };
            let mut items = BTreeSet::new();
            for token in rest.split_whitespace() {
                let id = vocab.id(token).ok_or_else(|| {
                    Error::VocabMismatch(format!(
                        "map line {}: item {token:?} not in the dataset vocabulary",
                        lineno + 1
                    ))
                })?;
                items.insert(id);
            }
            if label == "SUPPRESSED" {
                if suppressed.is_some() {
                    return Err(Error::Parse(format!(
                        "map line {}: repeated SUPPRESSED line",
                        lineno + 1
                    )));
                }
                suppressed = Some(items);
            } else {
                if items.is_empty() {
                    return Err(Error::Parse(format!(
                        "map line {}: group with no members",
                        lineno + 1
                    )));
                }
                groups.push(items);
            }
        }
        Self::from_parts(groups, suppressed.unwrap_or_default(), vocab)
    }

    /// Builds a map from explicit groups and a suppressed set, checking that
    /// together they cover every vocabulary item exactly once.
    pub fn from_parts(
        groups: Vec<BTreeSet<ItemId>>,
        suppressed: BTreeSet<ItemId>,
        vocab: &Vocabulary,
    ) -> Result<Self, Error> {
        let mut lookup = vec![None; vocab.len()];
        let mut claim = |item: ItemId, mapping: Mapping| -> Result<(), Error> {
            let slot = lookup
                .get_mut(item.0 as usize)
                .ok_or_else(|| Error::VocabMismatch(format!("item id {item} out of range")))?;
            if slot.is_some() {
                return Err(Error::VocabMismatch(format!(
                    "item {:?} assigned twice",
                    vocab.token(item)
                )));
            }
            *slot = Some(mapping);
            Ok(())
        };
        let mut map_groups = BTreeMap::new();
        for (i, members) in groups.iter().enumerate() {
            let gid = Gid(i as u32);
            for &item in members {
                claim(item, Mapping::Group(gid))?;
            }
            map_groups.insert(gid, members.clone());
        }
        for &item in &suppressed {
            claim(item, Mapping::Suppressed)?;
        }
        let lookup: Vec<Mapping> = lookup
            .into_iter()
            .enumerate()
            .map(|(i, slot)| {
                slot.ok_or_else(|| {
                    Error::VocabMismatch(format!(
                        "item {:?} not covered by the map",
                        vocab.token(ItemId(i as u32))
                    ))
                })
            })
            .collect::<Result<_, _>>()?;
        Ok(AnonymizationMap {
            next_gid: map_groups.len() as u32,
            groups: map_groups,
            suppressed,
            lookup,
        })
    }

    /// Serializes an anonymized dataset: rows in original order, each row's
    /// groups in canonical order, in display form. Fully suppressed rows
    /// become empty lines, so the row count is visible in the output.
    pub fn render_anonymized(&self, anon: &AnonDataset, vocab: &Vocabulary) -> String {
        let mut displays: BTreeMap<Gid, (Vec<&str>, String)> = BTreeMap::new();
        for (gid, _) in self.groups() {
            let key = self.group_key(vocab, gid).expect("live gid");
            let display = display_tokens(&key);
            displays.insert(gid, (key, display));
        }
        let mut out = String::new();
        for row in &anon.rows {
            let mut entries: Vec<&(Vec<&str>, String)> = row.iter().map(|g| &displays[g]).collect();
            entries.sort();
            let line: Vec<&str> = entries.iter().map(|(_, d)| d.as_str()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }
}

pub(crate) fn display_tokens(tokens: &[&str]) -> String {
    if tokens.len() == 1 {
        tokens[0].to_string()
    } else {
        format!("({})", tokens.join(","))
    }
}

/// The anonymized view of a dataset under some map: per-row group sets plus
/// an inverted index from groups to supporting rows.
#[derive(Clone, Debug)]
pub struct AnonDataset {
    rows: Vec<Vec<Gid>>,
    index: BTreeMap<Gid, Vec<Tid>>,
    n_rows: usize,
}

impl AnonDataset {
    pub fn n_transactions(&self) -> usize {
        self.n_rows
    }

    /// Rows in original order; each row is its groups sorted by id.
    pub fn rows(&self) -> &[Vec<Gid>] {
        &self.rows
    }

    /// Sorted tids of rows containing `gid`; empty for unknown groups.
    pub fn group_tids(&self, gid: Gid) -> &[Tid] {
        self.index.get(&gid).map(|v| v.as_slice()).unwrap_or(&[])
    }

    /// Sorted tids of rows containing every group in `gids`.
    pub fn supporting_tids(&self, gids: &[Gid]) -> Vec<Tid> {
        if gids.is_empty() {
            return self
                .rows
                .iter()
                .enumerate()
                .map(|(i, _)| Tid(i as u32))
                .collect();
        }
        let lists: Vec<&[Tid]> = gids.iter().map(|&g| self.group_tids(g)).collect();
        crate::dataset::intersect_sorted(&lists)
    }

    /// Number of rows containing every group in `gids`. The empty set is
    /// supported by all rows.
    pub fn support(&self, gids: &[Gid]) -> usize {
        if gids.is_empty() {
            return self.n_rows;
        }
        self.supporting_tids(gids).len()
    }
}

impl GroupSupport for AnonDataset {
    fn group_support(&self, gids: &[Gid]) -> usize {
        self.support(gids)
    }
}

/// Maintains group tid lists incrementally alongside map operations; the
/// union rule mirrors how [`AnonymizationMap::apply`] builds its index.
pub fn merge_tid_lists(x: &[Tid], y: &[Tid]) -> Vec<Tid> {
    union_sorted(x, y)
}
