//! The greedy anonymization loop.
//!
//! Starting from the identity map, the loop repeatedly picks the unsatisfied
//! privacy constraint whose live-group itemset has the highest support — the
//! one fixable with the least distortion — and repairs it: the constraint's
//! lowest-support group is generalized with the cheapest partner its utility
//! block allows, or suppressed when its block offers no partner and its
//! support is below `k`. A constraint that none of those moves can fix is
//! finished by suppressing its lowest-support groups outright, subject to
//! the suppression budget, which is a hard limit: exceeding it aborts the
//! run with an error.
//!
//! Every choice breaks ties by lexicographic token order, so a run is a pure
//! function of its inputs. The returned trace replays to the returned map.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigUint;

use crate::anonmap::{display_tokens, AnonDataset, AnonymizationMap, Gid};
use crate::constraints::{
    check_privacy_set, check_utility_set, GroupSupport, PrivacyConstraintSet, UtilityConstraintSet,
};
use crate::dataset::{intersect_sorted, union_sorted, Dataset, ItemId, Tid, Vocabulary};
use crate::error::Error;
use crate::metrics::{candidate_rank, ul_dataset, PenaltyPolicy, WeightPolicy};

/// Scoring policies for a run: how candidate merges are weighed against each
/// other and how suppressed items are charged in the final loss score.
#[derive(Clone, Debug)]
pub struct CoatConfig {
    pub weights: WeightPolicy,
    pub penalties: PenaltyPolicy,
}

impl Default for CoatConfig {
    fn default() -> Self {
        CoatConfig {
            weights: WeightPolicy::uniform_default(),
            penalties: PenaltyPolicy::NormalizedSupport,
        }
    }
}

/// One recorded action. Groups appear as their sorted member tokens at the
/// time of the action, which is enough to replay it on any map state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TraceAction {
    Merge {
        /// The group picked for repair.
        target: Vec<String>,
        /// The partner chosen from its utility block.
        partner: Vec<String>,
        /// Members of the resulting group.
        merged: Vec<String>,
    },
    Suppress {
        group: Vec<String>,
    },
}

/// Everything a finished run returns.
#[derive(Clone, Debug)]
pub struct CoatOutcome {
    pub map: AnonymizationMap,
    pub anon: AnonDataset,
    pub ul: f64,
    /// Suppressed share of the vocabulary, in percent.
    pub suppressed_fraction: f64,
    pub trace: Vec<TraceAction>,
}

/// Mutable working state of one run: the map under construction, the
/// supporting-transaction list of every live group, and the live groups of
/// every utility block.
struct RunState<'d> {
    data: &'d Dataset,
    map: AnonymizationMap,
    tids: BTreeMap<Gid, Vec<Tid>>,
    block_groups: Vec<BTreeSet<Gid>>,
    group_block: BTreeMap<Gid, usize>,
    trace: Vec<TraceAction>,
}

impl GroupSupport for RunState<'_> {
    fn group_support(&self, gids: &[Gid]) -> usize {
        if gids.is_empty() {
            return self.data.n_transactions();
        }
        let mut lists = Vec::with_capacity(gids.len());
        for g in gids {
            match self.tids.get(g) {
                Some(list) => lists.push(list.as_slice()),
                None => return 0,
            }
        }
        intersect_sorted(&lists).len()
    }
}

impl<'d> RunState<'d> {
    fn new(data: &'d Dataset, utility: &UtilityConstraintSet) -> Result<Self, Error> {
        let m = data.vocab_size();
        let map = AnonymizationMap::identity(m);
        let mut tids = BTreeMap::new();
        for i in 0..m as u32 {
            tids.insert(Gid(i), data.item_tids(ItemId(i))?.to_vec());
        }
        let mut block_groups = vec![BTreeSet::new(); utility.blocks().len()];
        let mut group_block = BTreeMap::new();
        for (b, block) in utility.blocks().iter().enumerate() {
            for &item in block {
                block_groups[b].insert(Gid(item.0));
                group_block.insert(Gid(item.0), b);
            }
        }
        Ok(RunState {
            data,
            map,
            tids,
            block_groups,
            group_block,
            trace: Vec::new(),
        })
    }

    fn vocab(&self) -> &'d Vocabulary {
        self.data.vocabulary()
    }

    fn support_one(&self, g: Gid) -> usize {
        self.tids.get(&g).map_or(0, Vec::len)
    }

    fn key_owned(&self, g: Gid) -> Result<Vec<String>, Error> {
        Ok(self
            .map
            .group_key(self.vocab(), g)?
            .into_iter()
            .map(str::to_owned)
            .collect())
    }

    /// Lowest-support group, ties broken by canonical key.
    fn pick_min_support(&self, gids: &[Gid]) -> Result<Gid, Error> {
        let mut best: Option<(usize, Vec<&str>, Gid)> = None;
        for &g in gids {
            let sup = self.support_one(g);
            let key = self.map.group_key(self.vocab(), g)?;
            if best
                .as_ref()
                .is_none_or(|(bs, bk, _)| (sup, &key) < (*bs, bk))
            {
                best = Some((sup, key, g));
            }
        }
        best.map(|(_, _, g)| g)
            .ok_or_else(|| Error::Internal("no group to pick from".to_string()))
    }

    /// Merges `target` with the partner in its block whose hypothetical
    /// merged group costs least, ties broken by the partner's canonical key.
    fn generalize(
        &mut self,
        target: Gid,
        constraints: &mut PrivacyConstraintSet,
        weights: &WeightPolicy,
    ) -> Result<(), Error> {
        let block = self.group_block[&target];
        let target_members = self.map.group_members(target)?.clone();
        let target_tids = self.tids[&target].clone();
        let mut best: Option<(BigUint, Vec<&str>, Gid)> = None;
        for &cand in &self.block_groups[block] {
            if cand == target {
                continue;
            }
            let mut union_members = target_members.clone();
            union_members.extend(self.map.group_members(cand)?.iter().copied());
            let union_support = union_sorted(&target_tids, &self.tids[&cand]).len();
            let rank = candidate_rank(weights, &union_members, union_support)?;
            let key = self.map.group_key(self.vocab(), cand)?;
            if best
                .as_ref()
                .is_none_or(|(br, bk, _)| (&rank, &key) < (br, bk))
            {
                best = Some((rank, key, cand));
            }
        }
        let Some((_, _, partner)) = best else {
            return Err(Error::Internal(
                "generalize called on a group with no partner in its block".to_string(),
            ));
        };

        let target_key = self.key_owned(target)?;
        let partner_key = self.key_owned(partner)?;
        let merged_tids = union_sorted(&self.tids[&target], &self.tids[&partner]);
        let merged = self.map.merge(target, partner)?;
        self.tids.remove(&target);
        self.tids.remove(&partner);
        self.tids.insert(merged, merged_tids);
        let slot = &mut self.block_groups[block];
        slot.remove(&target);
        slot.remove(&partner);
        slot.insert(merged);
        self.group_block.remove(&target);
        self.group_block.remove(&partner);
        self.group_block.insert(merged, block);
        for c in constraints.constraints_mut() {
            c.apply_merge(target, partner, merged);
        }
        let merged_key = self.key_owned(merged)?;
        self.trace.push(TraceAction::Merge {
            target: target_key,
            partner: partner_key,
            merged: merged_key,
        });
        Ok(())
    }

    /// Suppresses `target` after checking that doing so stays within the
    /// budget; a would-be overrun is a hard error that ends the run.
    fn suppress(
        &mut self,
        target: Gid,
        constraints: &mut PrivacyConstraintSet,
        utility: &UtilityConstraintSet,
    ) -> Result<(), Error> {
        let members = self.map.group_members(target)?.len();
        let already = self.map.suppressed().len();
        let m = self.data.vocab_size();
        if !utility.within_budget(already, members, m) {
            return Err(Error::BudgetViolated {
                group: self.map.display_group(self.vocab(), target)?,
                would_reach: 100.0 * (already + members) as f64 / m as f64,
                budget: utility.s(),
            });
        }
        let key = self.key_owned(target)?;
        let block = self.group_block[&target];
        self.map.suppress_group(target)?;
        self.tids.remove(&target);
        self.block_groups[block].remove(&target);
        self.group_block.remove(&target);
        for c in constraints.constraints_mut() {
            c.apply_suppress(target);
        }
        self.trace.push(TraceAction::Suppress { group: key });
        Ok(())
    }

    /// Repairs one constraint until it is satisfied. Groups whose block
    /// offers no partner and whose support is already at least `k` are
    /// skipped as ineligible; once every move is exhausted, the remaining
    /// lowest-support groups are suppressed until the constraint holds.
    fn fix_constraint(
        &mut self,
        constraints: &mut PrivacyConstraintSet,
        idx: usize,
        utility: &UtilityConstraintSet,
        weights: &WeightPolicy,
    ) -> Result<(), Error> {
        let k = constraints.k();
        let mut ineligible: BTreeSet<Gid> = BTreeSet::new();
        loop {
            let c = &constraints.constraints()[idx];
            if c.is_satisfied(self, k) {
                return Ok(());
            }
            if c.live_groups().len() <= 1 {
                break;
            }
            let candidates: Vec<Gid> = c
                .live_groups()
                .iter()
                .copied()
                .filter(|g| !ineligible.contains(g))
                .collect();
            if candidates.is_empty() {
                break;
            }
            let target = self.pick_min_support(&candidates)?;
            if self.block_groups[self.group_block[&target]].len() > 1 {
                self.generalize(target, constraints, weights)?;
            } else if self.support_one(target) < k {
                self.suppress(target, constraints, utility)?;
            } else {
                ineligible.insert(target);
            }
        }
        loop {
            let c = &constraints.constraints()[idx];
            if c.is_satisfied(self, k) {
                return Ok(());
            }
            let live: Vec<Gid> = c.live_groups().iter().copied().collect();
            let target = self.pick_min_support(&live)?;
            self.suppress(target, constraints, utility)?;
        }
    }
}

/// Runs the full loop and returns the anonymization plus its scores. The
/// constraint images are re-derived against a fresh identity map, so the
/// input set may have been built against any map over the same vocabulary.
/// On success the result provably satisfies both constraint sets; both are
/// re-checked from scratch before returning.
pub fn coat_run(
    data: &Dataset,
    privacy: &PrivacyConstraintSet,
    utility: &UtilityConstraintSet,
    cfg: &CoatConfig,
) -> Result<CoatOutcome, Error> {
    let m = data.vocab_size();
    let covered: usize = utility.blocks().iter().map(BTreeSet::len).sum();
    if covered != m {
        return Err(Error::VocabMismatch(format!(
            "utility blocks cover {covered} items, dataset vocabulary has {m}"
        )));
    }

    let mut state = RunState::new(data, utility)?;
    let mut constraints = privacy.rebind(&state.map)?;
    let k = constraints.k();

    loop {
        let mut selected: Option<(usize, Vec<Vec<&str>>, usize)> = None;
        for (idx, c) in constraints.constraints().iter().enumerate() {
            if c.is_satisfied(&state, k) {
                continue;
            }
            let gids: Vec<Gid> = c.live_groups().iter().copied().collect();
            let sup = state.group_support(&gids);
            let mut key = Vec::with_capacity(gids.len());
            for &g in &gids {
                key.push(state.map.group_key(state.vocab(), g)?);
            }
            key.sort_unstable();
            let better = selected
                .as_ref()
                .is_none_or(|(bs, bk, _)| sup > *bs || (sup == *bs && key < *bk));
            if better {
                selected = Some((sup, key, idx));
            }
        }
        let Some((_, _, idx)) = selected else {
            break;
        };
        state.fix_constraint(&mut constraints, idx, utility, &cfg.weights)?;
    }

    let anon = state.map.apply(data)?;
    let rebound = privacy.rebind(&state.map)?;
    if !check_privacy_set(&rebound, &state.map, &anon) {
        return Err(Error::Internal(
            "finished run does not satisfy its privacy constraints".to_string(),
        ));
    }
    if !check_utility_set(utility, &state.map) {
        return Err(Error::Internal(
            "finished run does not satisfy its utility constraints".to_string(),
        ));
    }
    let ul = ul_dataset(&state.map, &anon, &cfg.weights, &cfg.penalties, data)?;
    Ok(CoatOutcome {
        suppressed_fraction: state.map.suppressed_fraction(),
        map: state.map,
        anon,
        ul,
        trace: state.trace,
    })
}

fn display_owned(tokens: &[String]) -> String {
    let refs: Vec<&str> = tokens.iter().map(String::as_str).collect();
    display_tokens(&refs)
}

/// Serializes a trace: `MERGE <target> <partner> -> <merged>` and
/// `SUPPRESS <group>` lines, groups in display form.
pub fn render_trace(trace: &[TraceAction]) -> String {
    let mut out = String::new();
    for action in trace {
        match action {
            TraceAction::Merge {
                target,
                partner,
                merged,
            } => {
                out.push_str(&format!(
                    "MERGE {} {} -> {}\n",
                    display_owned(target),
                    display_owned(partner),
                    display_owned(merged)
                ));
            }
            TraceAction::Suppress { group } => {
                out.push_str(&format!("SUPPRESS {}\n", display_owned(group)));
            }
        }
    }
    out
}

/// Splits a display form back into member tokens: `(a,b)` to `a b`, a bare
/// token to itself.
fn parse_display_group(text: &str) -> Result<Vec<String>, Error> {
    if let Some(inner) = text.strip_prefix('(') {
        let Some(inner) = inner.strip_suffix(')') else {
            return Err(Error::Parse(format!("unterminated group {text:?}")));
        };
        let tokens: Vec<String> = inner.split(',').map(str::to_owned).collect();
        if tokens.iter().any(String::is_empty) {
            return Err(Error::Parse(format!("empty member in group {text:?}")));
        }
        Ok(tokens)
    } else if text.is_empty() {
        Err(Error::Parse("empty group".to_string()))
    } else {
        Ok(vec![text.to_owned()])
    }
}

/// Parses the format written by [`render_trace`].
pub fn parse_trace(source: &str) -> Result<Vec<TraceAction>, Error> {
    let mut trace = Vec::new();
    for (lineno, raw) in source.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let action = match fields.as_slice() {
            ["MERGE", target, partner, "->", merged] => TraceAction::Merge {
                target: parse_display_group(target)?,
                partner: parse_display_group(partner)?,
                merged: parse_display_group(merged)?,
            },
            ["SUPPRESS", group] => TraceAction::Suppress {
                group: parse_display_group(group)?,
            },
            _ => {
                return Err(Error::Parse(format!(
                    "line {}: unrecognized trace line {line:?}",
                    lineno + 1
                )))
            }
        };
        trace.push(action);
    }
    Ok(trace)
}

/// Finds the live group holding exactly the given member tokens.
fn resolve_group(
    map: &AnonymizationMap,
    vocab: &Vocabulary,
    tokens: &[String],
) -> Result<Gid, Error> {
    let first = tokens
        .first()
        .ok_or_else(|| Error::Parse("empty group in trace".to_string()))?;
    let item = vocab.require(first)?;
    let Some(gid) = map.group_of(item)? else {
        return Err(Error::Parse(format!(
            "trace refers to {first:?}, which is already suppressed"
        )));
    };
    let key = map.group_key(vocab, gid)?;
    if key != tokens.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(Error::Parse(format!(
            "trace group {:?} does not match the current group {:?}",
            tokens, key
        )));
    }
    Ok(gid)
}

/// Replays a trace from the identity map and returns the resulting map.
/// Each action's operands are checked against the evolving state, so a
/// trace from a different dataset or a tampered file is rejected.
pub fn replay_trace(trace: &[TraceAction], vocab: &Vocabulary) -> Result<AnonymizationMap, Error> {
    let mut map = AnonymizationMap::identity(vocab.len());
    for action in trace {
        match action {
            TraceAction::Merge {
                target,
                partner,
                merged,
            } => {
                let t = resolve_group(&map, vocab, target)?;
                let p = resolve_group(&map, vocab, partner)?;
                let m = map.merge(t, p)?;
                let key = map.group_key(vocab, m)?;
                if key != merged.iter().map(String::as_str).collect::<Vec<_>>() {
                    return Err(Error::Parse(format!(
                        "merge of {target:?} and {partner:?} yields {key:?}, trace says {merged:?}"
                    )));
                }
            }
            TraceAction::Suppress { group } => {
                let g = resolve_group(&map, vocab, group)?;
                map.suppress_group(g)?;
            }
        }
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::parse_itemsets;
    use crate::metrics::Taxonomy;
    use approx::assert_abs_diff_eq;

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

    const PRIVACY: &str = "a b c\nd e f g h\n";
    const UTILITY: &str = "a b\nc\nd\ne f g h\n";

    fn setup(s: f64) -> (Dataset, PrivacyConstraintSet, UtilityConstraintSet) {
        let data = Dataset::parse(CORPUS).unwrap();
        let identity = AnonymizationMap::identity(data.vocab_size());
        let itemsets = parse_itemsets(PRIVACY, data.vocabulary()).unwrap();
        let privacy = PrivacyConstraintSet::new(itemsets, 5, &identity).unwrap();
        let blocks = crate::constraints::parse_utility_file(UTILITY, data.vocabulary()).unwrap();
        let utility = UtilityConstraintSet::new(blocks, s, data.vocab_size()).unwrap();
        (data, privacy, utility)
    }

    #[test]
    fn golden_run() {
        let (data, privacy, utility) = setup(15.0);
        let outcome = coat_run(&data, &privacy, &utility, &CoatConfig::default()).unwrap();

        assert_eq!(
            render_trace(&outcome.trace),
            "MERGE b a -> (a,b)\nSUPPRESS d\nMERGE g h -> (g,h)\n"
        );
        assert_eq!(
            outcome.map.render(data.vocabulary()),
            "(a,b)\ta b\nc\tc\ne\te\nf\tf\n(g,h)\tg h\nSUPPRESSED\td\n"
        );
        let table = outcome
            .map
            .render_anonymized(&outcome.anon, data.vocabulary());
        assert_eq!(
            table,
            "(a,b) c e f (g,h)\n\
             (a,b) c e f (g,h)\n\
             c e f (g,h)\n\
             (a,b) c e f\n\
             e f (g,h)\n\
             e f (g,h)\n\
             (a,b) e\n\
             (a,b) c f\n\
             (a,b) c\n\
             (a,b) (g,h)\n"
        );
        assert_eq!(outcome.suppressed_fraction, 12.5);
        // groups (a,b) and (g,h) support 7 and 6 of 10 rows; d's penalty 0.4
        let expected = (3.0 / 255.0) * (7.0 / 10.0) + (3.0 / 255.0) * (6.0 / 10.0) + 0.4;
        assert_abs_diff_eq!(outcome.ul, expected, epsilon = 1e-15);
    }

    #[test]
    fn golden_run_with_taxonomy_weights() {
        let (data, privacy, utility) = setup(15.0);
        let taxonomy = Taxonomy::parse(
            "a\tA\nb\tA\nc\tA\nd\tB\ne\tB\nf\tB\ng\tB\nh\tB\nA\tROOT\nB\tROOT\n",
            data.vocabulary(),
        )
        .unwrap();
        let cfg = CoatConfig {
            weights: WeightPolicy::TaxonomyLca(taxonomy),
            penalties: PenaltyPolicy::NormalizedSupport,
        };
        let outcome = coat_run(&data, &privacy, &utility, &cfg).unwrap();
        // same actions: within-block LCA weights do not change the choices here
        assert_eq!(
            render_trace(&outcome.trace),
            "MERGE b a -> (a,b)\nSUPPRESS d\nMERGE g h -> (g,h)\n"
        );
        let expected = (3.0 / 255.0) * 0.375 * 0.7 + (3.0 / 255.0) * 0.625 * 0.6 + 0.4;
        assert_abs_diff_eq!(outcome.ul, expected, epsilon = 1e-15);
    }

    #[test]
    fn empty_privacy_set_returns_identity() {
        let data = Dataset::parse(CORPUS).unwrap();
        let identity = AnonymizationMap::identity(data.vocab_size());
        let privacy = PrivacyConstraintSet::new(Vec::new(), 5, &identity).unwrap();
        let utility = UtilityConstraintSet::coarsest(data.vocab_size(), 100.0).unwrap();
        let outcome = coat_run(&data, &privacy, &utility, &CoatConfig::default()).unwrap();
        assert!(outcome.trace.is_empty());
        assert_eq!(outcome.ul, 0.0);
        assert_eq!(outcome.suppressed_fraction, 0.0);
        assert_eq!(outcome.map.live_group_count(), data.vocab_size());
        assert_eq!(
            outcome
                .map
                .render_anonymized(&outcome.anon, data.vocabulary()),
            CORPUS
        );
    }

    #[test]
    fn zero_budget_aborts_on_forced_suppression() {
        let data = Dataset::parse("x\n").unwrap();
        let identity = AnonymizationMap::identity(1);
        let itemsets = parse_itemsets("x\n", data.vocabulary()).unwrap();
        let privacy = PrivacyConstraintSet::new(itemsets, 2, &identity).unwrap();
        let utility = UtilityConstraintSet::coarsest(1, 0.0).unwrap();
        let err = coat_run(&data, &privacy, &utility, &CoatConfig::default()).unwrap_err();
        match err {
            Error::BudgetViolated {
                group,
                would_reach,
                budget,
            } => {
                assert_eq!(group, "x");
                assert_eq!(would_reach, 100.0);
                assert_eq!(budget, 0.0);
            }
            other => panic!("expected budget violation, got {other:?}"),
        }
    }

    #[test]
    fn high_support_groups_are_skipped_then_suppressed_as_a_last_resort() {
        // x and y each appear in 6 rows (>= k), but the pair appears once;
        // singleton blocks leave no generalization. The repair suppresses
        // the lexicographically first of the tied groups and stops as soon
        // as the constraint holds.
        let mut rows = String::from("x y\n");
        for _ in 0..5 {
            rows.push_str("x\n");
            rows.push_str("y\n");
        }
        let data = Dataset::parse(&rows).unwrap();
        let identity = AnonymizationMap::identity(data.vocab_size());
        let itemsets = parse_itemsets("x y\n", data.vocabulary()).unwrap();
        let privacy = PrivacyConstraintSet::new(itemsets, 5, &identity).unwrap();
        let blocks = crate::constraints::parse_utility_file("x\ny\n", data.vocabulary()).unwrap();
        let utility = UtilityConstraintSet::new(blocks, 50.0, data.vocab_size()).unwrap();
        let outcome = coat_run(&data, &privacy, &utility, &CoatConfig::default()).unwrap();
        assert_eq!(render_trace(&outcome.trace), "SUPPRESS x\n");
        let rebound = privacy.rebind(&outcome.map).unwrap();
        assert!(check_privacy_set(&rebound, &outcome.map, &outcome.anon));
    }

    #[test]
    fn single_group_constraint_is_suppressed_not_generalized() {
        // {x} has support 3 < k and shares a block with z, but a constraint
        // down to one live group goes straight to suppression.
        let data = Dataset::parse("x\nx\nx\nz\nz\nz\nz\nz\nz\n").unwrap();
        let identity = AnonymizationMap::identity(data.vocab_size());
        let itemsets = parse_itemsets("x\n", data.vocabulary()).unwrap();
        let privacy = PrivacyConstraintSet::new(itemsets, 5, &identity).unwrap();
        let utility = UtilityConstraintSet::coarsest(2, 50.0).unwrap();
        let outcome = coat_run(&data, &privacy, &utility, &CoatConfig::default()).unwrap();
        assert_eq!(render_trace(&outcome.trace), "SUPPRESS x\n");
    }

    #[test]
    fn runs_are_deterministic() {
        let (data, privacy, utility) = setup(15.0);
        let a = coat_run(&data, &privacy, &utility, &CoatConfig::default()).unwrap();
        let b = coat_run(&data, &privacy, &utility, &CoatConfig::default()).unwrap();
        assert_eq!(render_trace(&a.trace), render_trace(&b.trace));
        assert_eq!(
            a.map.render(data.vocabulary()),
            b.map.render(data.vocabulary())
        );
        assert_eq!(a.ul.to_bits(), b.ul.to_bits());
    }

    #[test]
    fn trace_replays_to_the_returned_map() {
        let (data, privacy, utility) = setup(15.0);
        let outcome = coat_run(&data, &privacy, &utility, &CoatConfig::default()).unwrap();
        let replayed = replay_trace(&outcome.trace, data.vocabulary()).unwrap();
        assert_eq!(
            replayed.render(data.vocabulary()),
            outcome.map.render(data.vocabulary())
        );
    }

    #[test]
    fn trace_text_roundtrip() {
        let (data, privacy, utility) = setup(15.0);
        let outcome = coat_run(&data, &privacy, &utility, &CoatConfig::default()).unwrap();
        let text = render_trace(&outcome.trace);
        let parsed = parse_trace(&text).unwrap();
        assert_eq!(parsed, outcome.trace);
        assert_eq!(render_trace(&parsed), text);
    }

    #[test]
    fn replay_rejects_mismatched_traces() {
        let (data, _, _) = setup(15.0);
        let trace = parse_trace("MERGE b a -> (a,c)\n").unwrap();
        assert!(replay_trace(&trace, data.vocabulary()).is_err());
        let trace = parse_trace("SUPPRESS d\nSUPPRESS d\n").unwrap();
        assert!(replay_trace(&trace, data.vocabulary()).is_err());
        let trace = parse_trace("MERGE q a -> (a,q)\n").unwrap();
        assert!(replay_trace(&trace, data.vocabulary()).is_err());
    }

    #[test]
    fn mismatched_utility_vocabulary_is_rejected() {
        let data = Dataset::parse("x y\n").unwrap();
        let identity = AnonymizationMap::identity(2);
        let privacy = PrivacyConstraintSet::new(Vec::new(), 2, &identity).unwrap();
        let utility = UtilityConstraintSet::coarsest(3, 100.0).unwrap();
        let err = coat_run(&data, &privacy, &utility, &CoatConfig::default()).unwrap_err();
        assert_eq!(err.kind(), "vocab-mismatch");
    }
}
