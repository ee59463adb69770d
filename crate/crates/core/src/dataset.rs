//! Transaction corpus over a dense item vocabulary, with an inverted index
//! for exact support counting.
//!
//! The input format is line-oriented: one transaction per line, items as
//! whitespace-separated tokens. Blank lines and lines starting with `#` are
//! skipped; repeated tokens within one line collapse to a single item.
//! Transactions are numbered 0.. in input order.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use crate::error::Error;

/// Index of an item in the vocabulary. Ids are dense: a dataset over `M`
/// distinct tokens uses exactly the ids `0..M`, assigned in first-seen
/// order. Ordering of ids is an encoding detail; ordering that must be
/// stable across runs always goes through item tokens instead.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct ItemId(pub u32);

/// Index of a transaction, 0-based in input order.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Tid(pub u32);

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Tid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Bidirectional token <-> id table.
#[derive(Clone, Debug, Default)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: HashMap<String, ItemId>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Vocabulary::default()
    }

    /// Returns the id for `token`, inserting it if unseen.
    pub fn intern(&mut self, token: &str) -> ItemId {
        if let Some(&id) = self.ids.get(token) {
            return id;
        }
        let id = ItemId(self.tokens.len() as u32);
        self.tokens.push(token.to_string());
        self.ids.insert(token.to_string(), id);
        id
    }

    pub fn id(&self, token: &str) -> Option<ItemId> {
        self.ids.get(token).copied()
    }

    /// Like [`Vocabulary::id`] but reports the missing token as an error.
    pub fn require(&self, token: &str) -> Result<ItemId, Error> {
        self.id(token)
            .ok_or_else(|| Error::UnknownItem(token.to_string()))
    }

    /// Token for a valid id. Panics on an out-of-range id; ids should only
    /// come from the same vocabulary.
    pub fn token(&self, id: ItemId) -> &str {
        &self.tokens[id.0 as usize]
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn contains(&self, id: ItemId) -> bool {
        (id.0 as usize) < self.tokens.len()
    }

    /// All (id, token) pairs in id order.
    pub fn iter(&self) -> impl Iterator<Item = (ItemId, &str)> {
        self.tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (ItemId(i as u32), t.as_str()))
    }

    /// Item ids sorted by their token, the canonical order for output and
    /// tie-breaking.
    pub fn ids_by_token(&self) -> Vec<ItemId> {
        let mut ids: Vec<ItemId> = (0..self.tokens.len() as u32).map(ItemId).collect();
        ids.sort_by(|a, b| self.token(*a).cmp(self.token(*b)));
        ids
    }
}

/// One transaction: its position in the corpus and its items, sorted by id
/// and free of duplicates.
#[derive(Clone, Debug)]
pub struct Transaction {
    pub tid: Tid,
    pub items: Vec<ItemId>,
}

impl Transaction {
    pub fn contains(&self, item: ItemId) -> bool {
        self.items.binary_search(&item).is_ok()
    }
}

/// An immutable transaction corpus plus an inverted index mapping each item
/// to the sorted list of transactions containing it.
#[derive(Clone, Debug)]
pub struct Dataset {
    vocab: Vocabulary,
    transactions: Vec<Transaction>,
    index: Vec<Vec<Tid>>,
}

impl Dataset {
    /// Parses the line-oriented transaction format. Fails on an input with
    /// no transactions; otherwise every non-blank, non-comment line becomes
    /// one transaction even if it repeats items.
    pub fn parse(source: &str) -> Result<Dataset, Error> {
        let mut vocab = Vocabulary::new();
        let mut transactions = Vec::new();
        for line in source.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut items = BTreeSet::new();
            for token in line.split_whitespace() {
                items.insert(vocab.intern(token));
            }
            let tid = Tid(transactions.len() as u32);
            transactions.push(Transaction {
                tid,
                items: items.into_iter().collect(),
            });
        }
        if transactions.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let index = build_index(vocab.len(), &transactions);
        Ok(Dataset {
            vocab,
            transactions,
            index,
        })
    }

    /// Number of transactions, `N`.
    pub fn n_transactions(&self) -> usize {
        self.transactions.len()
    }

    /// Number of distinct items, `M`.
    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn transactions(&self) -> &[Transaction] {
        &self.transactions
    }

    /// Sorted tids of the transactions containing `item`.
    pub fn item_tids(&self, item: ItemId) -> Result<&[Tid], Error> {
        self.index
            .get(item.0 as usize)
            .map(|v| v.as_slice())
            .ok_or_else(|| Error::UnknownItem(format!("item id {item} out of range")))
    }

    /// Number of transactions containing every item of `itemset`. The empty
    /// itemset is supported by all transactions.
    pub fn support(&self, itemset: &[ItemId]) -> Result<usize, Error> {
        Ok(self.supporting_tids(itemset)?.len())
    }

    /// Sorted tids of the transactions containing every item of `itemset`.
    pub fn supporting_tids(&self, itemset: &[ItemId]) -> Result<Vec<Tid>, Error> {
        if itemset.is_empty() {
            return Ok(self.transactions.iter().map(|t| t.tid).collect());
        }
        let mut lists = Vec::with_capacity(itemset.len());
        for &item in itemset {
            lists.push(self.item_tids(item)?);
        }
        Ok(intersect_sorted(&lists))
    }
}

fn build_index(vocab_size: usize, transactions: &[Transaction]) -> Vec<Vec<Tid>> {
    let mut index = vec![Vec::new(); vocab_size];
    for t in transactions {
        for &item in &t.items {
            index[item.0 as usize].push(t.tid);
        }
    }
    index
}

/// Intersects sorted, duplicate-free tid lists. Starts from the shortest
/// list and narrows it against the others by binary search.
pub fn intersect_sorted(lists: &[&[Tid]]) -> Vec<Tid> {
    let Some(shortest) = lists.iter().min_by_key(|l| l.len()) else {
        return Vec::new();
    };
    let mut acc: Vec<Tid> = shortest.to_vec();
    for list in lists {
        if std::ptr::eq(*list, *shortest) {
            continue;
        }
        acc.retain(|tid| list.binary_search(tid).is_ok());
        if acc.is_empty() {
            break;
        }
    }
    acc
}

/// Merges two sorted, duplicate-free tid lists into their sorted union.
pub fn union_sorted(a: &[Tid], b: &[Tid]) -> Vec<Tid> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

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

    fn ids(data: &Dataset, tokens: &[&str]) -> Vec<ItemId> {
        tokens
            .iter()
            .map(|t| data.vocabulary().id(t).unwrap())
            .collect()
    }

    #[test]
    fn parses_corpus_shape() {
        let data = Dataset::parse(CORPUS).unwrap();
        assert_eq!(data.n_transactions(), 10);
        assert_eq!(data.vocab_size(), 8);
        assert_eq!(data.transactions()[0].items.len(), 8);
        assert_eq!(data.transactions()[9].items.len(), 2);
    }

    #[test]
    fn singleton_supports() {
        let data = Dataset::parse(CORPUS).unwrap();
        let expected = [
            ("a", 6),
            ("b", 3),
            ("c", 6),
            ("d", 4),
            ("e", 7),
            ("f", 7),
            ("g", 4),
            ("h", 4),
        ];
        for (token, sup) in expected {
            assert_eq!(data.support(&ids(&data, &[token])).unwrap(), sup, "{token}");
        }
    }

    #[test]
    fn itemset_supports() {
        let data = Dataset::parse(CORPUS).unwrap();
        assert_eq!(data.support(&ids(&data, &["a", "b"])).unwrap(), 2);
        assert_eq!(data.support(&ids(&data, &["a", "b", "c"])).unwrap(), 1);
        assert_eq!(
            data.support(&ids(&data, &["d", "e", "f", "g", "h"]))
                .unwrap(),
            1
        );
        assert_eq!(data.support(&ids(&data, &["a", "c", "f"])).unwrap(), 4);
    }

    #[test]
    fn empty_itemset_is_supported_everywhere() {
        let data = Dataset::parse(CORPUS).unwrap();
        assert_eq!(data.support(&[]).unwrap(), 10);
    }

    #[test]
    fn supporting_tids_match_membership() {
        let data = Dataset::parse(CORPUS).unwrap();
        let b = ids(&data, &["b"]);
        let tids = data.supporting_tids(&b).unwrap();
        assert_eq!(tids, vec![Tid(0), Tid(6), Tid(9)]);
    }

    #[test]
    fn comments_blanks_and_duplicates() {
        let src = "# header\n\n  a b a  \n# mid\nb c\n\n";
        let data = Dataset::parse(src).unwrap();
        assert_eq!(data.n_transactions(), 2);
        assert_eq!(data.vocab_size(), 3);
        assert_eq!(data.transactions()[0].items.len(), 2);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(Dataset::parse(""), Err(Error::EmptyDataset)));
        assert!(matches!(
            Dataset::parse("# only comments\n"),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn intersect_and_union_helpers() {
        let a = vec![Tid(0), Tid(2), Tid(5)];
        let b = vec![Tid(2), Tid(3), Tid(5)];
        assert_eq!(intersect_sorted(&[&a, &b]), vec![Tid(2), Tid(5)]);
        assert_eq!(union_sorted(&a, &b), vec![Tid(0), Tid(2), Tid(3), Tid(5)]);
        assert_eq!(intersect_sorted(&[]), Vec::<Tid>::new());
    }

    #[test]
    fn ids_by_token_orders_lexicographically() {
        let data = Dataset::parse("z y\nx z\n").unwrap();
        let order: Vec<&str> = data
            .vocabulary()
            .ids_by_token()
            .into_iter()
            .map(|id| data.vocabulary().token(id))
            .collect();
        assert_eq!(order, vec!["x", "y", "z"]);
    }
}
