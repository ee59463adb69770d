//! Built-in smoke test: replays a small reference pipeline with known
//! outputs entirely from embedded data, so a deployed binary can be checked
//! without any input files. Covers the end-to-end anonymization, the merge
//! support identities, the loss arithmetic, and the query estimator.

use std::collections::BTreeSet;

use coat_core::anonmap::AnonymizationMap;
use coat_core::coat::{coat_run, render_trace, replay_trace, CoatConfig};
use coat_core::constraints::{
    check_privacy_set, check_utility_set, parse_itemsets, parse_utility_file, PrivacyConstraintSet,
    UtilityConstraintSet,
};
use coat_core::dataset::{Dataset, ItemId};
use coat_core::error::Error;
use coat_core::evaluation::{estimated_answer, exact_answer, relative_error, CountQuery};
use coat_core::metrics::{size_ratio, Taxonomy, WeightPolicy};

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
const TAXONOMY: &str = "\
a\tA
b\tA
c\tA
d\tB
e\tB
f\tB
g\tB
h\tB
A\tROOT
B\tROOT
";

const EXPECTED_TRACE: &str = "MERGE b a -> (a,b)\nSUPPRESS d\nMERGE g h -> (g,h)\n";
const EXPECTED_MAP: &str = "(a,b)\ta b\nc\tc\ne\te\nf\tf\n(g,h)\tg h\nSUPPRESSED\td\n";
const EXPECTED_TABLE: &str = "\
(a,b) c e f (g,h)
(a,b) c e f (g,h)
c e f (g,h)
(a,b) c e f
e f (g,h)
e f (g,h)
(a,b) e
(a,b) c f
(a,b) c
(a,b) (g,h)
";

fn check(name: &str, result: Result<(), String>, failures: &mut Vec<String>) {
    match result {
        Ok(()) => println!("ok {name}"),
        Err(msg) => {
            println!("FAILED {name}: {msg}");
            failures.push(name.to_string());
        }
    }
}

fn expect<T: PartialEq + std::fmt::Debug>(what: &str, got: T, want: T) -> Result<(), String> {
    if got == want {
        Ok(())
    } else {
        Err(format!("{what}: got {got:?}, want {want:?}"))
    }
}

fn expect_close(what: &str, got: f64, want: f64, tol: f64) -> Result<(), String> {
    if (got - want).abs() <= tol {
        Ok(())
    } else {
        Err(format!("{what}: got {got}, want {want} (tolerance {tol})"))
    }
}

fn brute_support(data: &Dataset, items: &BTreeSet<ItemId>) -> usize {
    data.transactions()
        .iter()
        .filter(|t| items.iter().all(|&i| t.contains(i)))
        .count()
}

fn setup() -> Result<(Dataset, PrivacyConstraintSet, UtilityConstraintSet), String> {
    let data = Dataset::parse(CORPUS).map_err(|e| e.to_string())?;
    let identity = AnonymizationMap::identity(data.vocab_size());
    let itemsets = parse_itemsets(PRIVACY, data.vocabulary()).map_err(|e| e.to_string())?;
    let privacy = PrivacyConstraintSet::new(itemsets, 5, &identity).map_err(|e| e.to_string())?;
    let blocks = parse_utility_file(UTILITY, data.vocabulary()).map_err(|e| e.to_string())?;
    let utility =
        UtilityConstraintSet::new(blocks, 15.0, data.vocab_size()).map_err(|e| e.to_string())?;
    Ok((data, privacy, utility))
}

fn golden_pipeline() -> Result<(), String> {
    let (data, privacy, utility) = setup()?;
    let outcome =
        coat_run(&data, &privacy, &utility, &CoatConfig::default()).map_err(|e| e.to_string())?;
    expect(
        "trace",
        render_trace(&outcome.trace),
        EXPECTED_TRACE.to_string(),
    )?;
    expect(
        "map",
        outcome.map.render(data.vocabulary()),
        EXPECTED_MAP.to_string(),
    )?;
    expect(
        "anonymized table",
        outcome
            .map
            .render_anonymized(&outcome.anon, data.vocabulary()),
        EXPECTED_TABLE.to_string(),
    )?;
    expect("suppressed share", outcome.suppressed_fraction, 12.5)?;
    let expected_ul = (3.0 / 255.0) * 0.7 + (3.0 / 255.0) * 0.6 + 0.4;
    expect_close("loss (uniform weights)", outcome.ul, expected_ul, 1e-12)?;

    let replayed = replay_trace(&outcome.trace, data.vocabulary()).map_err(|e| e.to_string())?;
    expect(
        "trace replay",
        replayed.render(data.vocabulary()),
        outcome.map.render(data.vocabulary()),
    )?;
    let rebound = privacy.rebind(&outcome.map).map_err(|e| e.to_string())?;
    if !check_privacy_set(&rebound, &outcome.map, &outcome.anon) {
        return Err("privacy constraints unsatisfied on the result".to_string());
    }
    if !check_utility_set(&utility, &outcome.map) {
        return Err("utility constraints unsatisfied on the result".to_string());
    }
    Ok(())
}

fn merge_support_identities() -> Result<(), String> {
    let data = Dataset::parse(CORPUS).map_err(|e| e.to_string())?;
    let vocab = data.vocabulary();
    let m = data.vocab_size();
    // singleton merges: merged support = sup(r) + sup(s) - sup(rs)
    for r in 0..m as u32 {
        for s in (r + 1)..m as u32 {
            let (r, s) = (ItemId(r), ItemId(s));
            let mut map = AnonymizationMap::identity(m);
            let gr = map.group_of(r).map_err(|e| e.to_string())?.unwrap();
            let gs = map.group_of(s).map_err(|e| e.to_string())?.unwrap();
            let merged = map.merge(gr, gs).map_err(|e| e.to_string())?;
            let anon = map.apply(&data).map_err(|e| e.to_string())?;
            let lhs = anon.support(&[merged]);
            let rhs = brute_support(&data, &BTreeSet::from([r]))
                + brute_support(&data, &BTreeSet::from([s]))
                - brute_support(&data, &BTreeSet::from([r, s]));
            expect(
                &format!("merge {}+{}", vocab.token(r), vocab.token(s)),
                lhs,
                rhs,
            )?;
        }
    }
    // a group merge: support of the union is the union of supports
    let mut map = AnonymizationMap::identity(m);
    let gid =
        |map: &AnonymizationMap, t: &str| map.group_of(vocab.id(t).unwrap()).unwrap().unwrap();
    let ab = map
        .merge(gid(&map, "a"), gid(&map, "b"))
        .map_err(|e| e.to_string())?;
    let abc = map.merge(ab, gid(&map, "c")).map_err(|e| e.to_string())?;
    let anon = map.apply(&data).map_err(|e| e.to_string())?;
    let rows_with_any = data
        .transactions()
        .iter()
        .filter(|t| {
            ["a", "b", "c"]
                .iter()
                .any(|tok| t.contains(vocab.id(tok).unwrap()))
        })
        .count();
    expect("group merge support", anon.support(&[abc]), rows_with_any)
}

fn loss_arithmetic() -> Result<(), String> {
    let data = Dataset::parse(CORPUS).map_err(|e| e.to_string())?;
    let taxonomy = Taxonomy::parse(TAXONOMY, data.vocabulary()).map_err(|e| e.to_string())?;
    let weights = WeightPolicy::TaxonomyLca(taxonomy);
    let ab: BTreeSet<ItemId> = ["a", "b"]
        .iter()
        .map(|t| data.vocabulary().id(t).unwrap())
        .collect();
    let w = weights
        .weight(&ab, data.vocab_size())
        .map_err(|e| e.to_string())?;
    expect("weight of (a,b)", w, 0.375)?;
    expect("size ratio of a pair", size_ratio(2, 8), 3.0 / 255.0)?;
    expect("size ratio of the whole vocabulary", size_ratio(8, 8), 1.0)
}

fn query_estimator() -> Result<(), String> {
    let (data, privacy, utility) = setup()?;
    let outcome =
        coat_run(&data, &privacy, &utility, &CoatConfig::default()).map_err(|e| e.to_string())?;
    let vocab = data.vocabulary();
    let query = |tokens: &[&str]| {
        CountQuery::new(tokens.iter().map(|t| vocab.id(t).unwrap()).collect()).unwrap()
    };

    let qa = query(&["a"]);
    expect(
        "exact count of a",
        exact_answer(&qa, &data).map_err(|e| e.to_string())?,
        6,
    )?;
    let estimate = estimated_answer(&qa, &outcome.map, &outcome.anon).map_err(|e| e.to_string())?;
    expect_close("estimated count of a", estimate, 14.0 / 3.0, 1e-12)?;
    let re = relative_error(&qa, &outcome.map, &data, &outcome.anon).map_err(|e| e.to_string())?;
    expect_close("relative error of a", re.re, 2.0 / 9.0, 1e-12)?;

    let qc = query(&["c"]);
    let re = relative_error(&qc, &outcome.map, &data, &outcome.anon).map_err(|e| e.to_string())?;
    expect("relative error of c", re.re, 0.0)?;

    // identity map answers everything exactly
    let identity = AnonymizationMap::identity(data.vocab_size());
    let anon = identity.apply(&data).map_err(|e| e.to_string())?;
    for tokens in [&["a"][..], &["c"], &["e", "f"], &["a", "b", "c"]] {
        let q = query(tokens);
        let exact = exact_answer(&q, &data).map_err(|e| e.to_string())? as f64;
        let est = estimated_answer(&q, &identity, &anon).map_err(|e| e.to_string())?;
        expect(&format!("identity estimate for {tokens:?}"), est, exact)?;
    }
    Ok(())
}

pub fn run() -> Result<(), Error> {
    let mut failures = Vec::new();
    check("golden pipeline", golden_pipeline(), &mut failures);
    check(
        "merge support identities",
        merge_support_identities(),
        &mut failures,
    );
    check("loss arithmetic", loss_arithmetic(), &mut failures);
    check("query estimator", query_estimator(), &mut failures);
    if failures.is_empty() {
        println!("selftest: 4 checks passed");
        Ok(())
    } else {
        Err(Error::Internal(format!(
            "selftest failed: {}",
            failures.join(", ")
        )))
    }
}
