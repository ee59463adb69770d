//! Automatic privacy-constraint generation.
//!
//! [`pgen`] extracts the maximal infrequent itemsets of a dataset: itemsets
//! supported by fewer than `k` transactions (but at least one) none of whose
//! proper supersets is supported at all. Protecting these protects every
//! infrequent itemset, because support only shrinks on supersets.
//!
//! [`km_itemsets`] instead enumerates every `m`-subset of the vocabulary,
//! the exhaustive policy protecting all item combinations of a fixed size.
//! Its count grows binomially, so it is capped.

use std::collections::BTreeSet;

use num_bigint::BigUint;

use crate::dataset::{Dataset, ItemId, Vocabulary};
use crate::error::Error;

/// Cap on the number of itemsets [`km_itemsets`] may enumerate.
pub const DEFAULT_KM_CAP: u64 = 1_000_000;

/// Returns the maximal infrequent itemsets of `data` for protection level
/// `k`, each with support in `(0, k)` and no supported proper superset.
///
/// Any supported itemset is a subset of some transaction, so a maximal one
/// must be a whole-transaction itemset not properly contained in another
/// transaction. Candidates are therefore the distinct transaction itemsets,
/// scanned pairwise for containment, then filtered by support. Output order
/// is decreasing size, ties by token sequence.
pub fn pgen(data: &Dataset, k: usize) -> Result<Vec<BTreeSet<ItemId>>, Error> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!(
            "k must be at least 2, got {k}"
        )));
    }
    let vocab = data.vocabulary();
    let mut candidates: Vec<BTreeSet<ItemId>> = Vec::new();
    for t in data.transactions() {
        let items: BTreeSet<ItemId> = t.items.iter().copied().collect();
        if !candidates.contains(&items) {
            candidates.push(items);
        }
    }
    candidates.sort_by_cached_key(|items| {
        let mut tokens: Vec<&str> = items.iter().map(|&i| vocab.token(i)).collect();
        tokens.sort_unstable();
        (std::cmp::Reverse(items.len()), tokens.join(" "))
    });

    let mut maximal: Vec<BTreeSet<ItemId>> = Vec::new();
    for candidate in candidates {
        if maximal.iter().any(|kept| candidate.is_subset(kept)) {
            continue;
        }
        maximal.push(candidate);
    }

    let mut result = Vec::new();
    for itemset in maximal {
        let ids: Vec<ItemId> = itemset.iter().copied().collect();
        let support = data.support(&ids)?;
        if support < k {
            result.push(itemset);
        }
    }
    Ok(result)
}

/// All `m`-subsets of the vocabulary in token-lexicographic order, unless
/// there would be more than `cap` of them.
pub fn km_itemsets(vocab: &Vocabulary, m: usize, cap: u64) -> Result<Vec<BTreeSet<ItemId>>, Error> {
    let total = vocab.len();
    if m == 0 || m > total {
        return Err(Error::InvalidParameter(format!(
            "itemset size must be in [1, {total}], got {m}"
        )));
    }
    let count = binomial(total, m);
    if count > BigUint::from(cap) {
        return Err(Error::PolicyTooLarge {
            itemsets: count.to_string(),
            m,
            cap,
        });
    }

    let ordered = vocab.ids_by_token();
    let mut result = Vec::new();
    let mut indices: Vec<usize> = (0..m).collect();
    loop {
        result.push(indices.iter().map(|&i| ordered[i]).collect());
        // advance to the next combination in lexicographic index order
        let mut pos = m;
        while pos > 0 {
            pos -= 1;
            if indices[pos] != pos + total - m {
                indices[pos] += 1;
                for later in pos + 1..m {
                    indices[later] = indices[later - 1] + 1;
                }
                break;
            }
            if pos == 0 {
                return Ok(result);
            }
        }
    }
}

fn binomial(n: usize, k: usize) -> BigUint {
    let k = k.min(n - k);
    let mut acc = BigUint::from(1u8);
    for i in 1..=k {
        acc = acc * BigUint::from(n - k + i) / BigUint::from(i);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tokens(data: &Dataset, itemset: &BTreeSet<ItemId>) -> Vec<String> {
        let mut t: Vec<String> = itemset
            .iter()
            .map(|&i| data.vocabulary().token(i).to_string())
            .collect();
        t.sort();
        t
    }

    #[test]
    fn three_row_reference_instance() {
        let data = Dataset::parse("a c f\na c\nb h\n").unwrap();
        let result = pgen(&data, 2).unwrap();
        let rendered: Vec<Vec<String>> = result.iter().map(|s| tokens(&data, s)).collect();
        assert_eq!(rendered, vec![vec!["a", "c", "f"], vec!["b", "h"]]);
    }

    #[test]
    fn repeated_rows_protect_themselves() {
        let data = Dataset::parse("a b\na b\n").unwrap();
        assert!(pgen(&data, 2).unwrap().is_empty());
    }

    #[test]
    fn contained_infrequent_rows_are_covered_by_their_superset() {
        let data = Dataset::parse("a b c\na b\nc d\nc d\n").unwrap();
        let result = pgen(&data, 2).unwrap();
        let rendered: Vec<Vec<String>> = result.iter().map(|s| tokens(&data, s)).collect();
        assert_eq!(rendered, vec![vec!["a", "b", "c"]]);
    }

    #[test]
    fn outputs_are_infrequent_and_mutually_incomparable() {
        let data =
            Dataset::parse("a b c d e\nb c d\na c e\nd e\na b\nb c\nc d e\na\nb\nc d\n").unwrap();
        for k in [2usize, 3, 5] {
            let result = pgen(&data, k).unwrap();
            for items in &result {
                let ids: Vec<ItemId> = items.iter().copied().collect();
                let sup = data.support(&ids).unwrap();
                assert!(sup > 0 && sup < k, "support {sup} outside (0,{k})");
            }
            for (i, a) in result.iter().enumerate() {
                for (j, b) in result.iter().enumerate() {
                    if i != j {
                        assert!(!a.is_subset(b), "output not maximal");
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_vacuous_k() {
        let data = Dataset::parse("a\n").unwrap();
        assert!(matches!(pgen(&data, 1), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn km_counts() {
        let data = Dataset::parse("a b c d e f g h\n").unwrap();
        assert_eq!(
            km_itemsets(data.vocabulary(), 5, DEFAULT_KM_CAP)
                .unwrap()
                .len(),
            56
        );
        assert_eq!(
            km_itemsets(data.vocabulary(), 1, DEFAULT_KM_CAP)
                .unwrap()
                .len(),
            8
        );
        let small = Dataset::parse("a b c d\n").unwrap();
        assert_eq!(
            km_itemsets(small.vocabulary(), 2, DEFAULT_KM_CAP)
                .unwrap()
                .len(),
            6
        );
    }

    #[test]
    fn km_enumerates_in_token_order() {
        let data = Dataset::parse("c a b\n").unwrap();
        let sets = km_itemsets(data.vocabulary(), 2, DEFAULT_KM_CAP).unwrap();
        let rendered: Vec<Vec<String>> = sets.iter().map(|s| tokens(&data, s)).collect();
        assert_eq!(
            rendered,
            vec![vec!["a", "b"], vec!["a", "c"], vec!["b", "c"]]
        );
    }

    #[test]
    fn km_cap_is_enforced() {
        let line: Vec<String> = (0..30).map(|i| format!("i{i:02}")).collect();
        let data = Dataset::parse(&line.join(" ")).unwrap();
        let err = km_itemsets(data.vocabulary(), 15, DEFAULT_KM_CAP);
        match err {
            Err(Error::PolicyTooLarge { itemsets, m, cap }) => {
                assert_eq!(itemsets, "155117520");
                assert_eq!(m, 15);
                assert_eq!(cap, DEFAULT_KM_CAP);
            }
            other => panic!("expected policy-too-large, got {other:?}"),
        }
    }

    #[test]
    fn km_rejects_out_of_range_m() {
        let data = Dataset::parse("a b\n").unwrap();
        assert!(km_itemsets(data.vocabulary(), 0, DEFAULT_KM_CAP).is_err());
        assert!(km_itemsets(data.vocabulary(), 3, DEFAULT_KM_CAP).is_err());
    }
}
