//! Batch front end for the anonymization library.
//!
//! One process, one command: `anonymize` runs the full pipeline and writes
//! the anonymized dataset plus map, trace, and metrics files; `pgen` and
//! `km` derive privacy constraint files without anonymizing; `evaluate`
//! scores an existing map against its dataset; `selftest` replays a built-in
//! reference pipeline as a smoke check of the installed binary.
//!
//! All data artifacts are byte-deterministic functions of the inputs. Errors
//! print one `error: <kind>: <message>` line on stderr and exit with a code
//! identifying the class of failure (see `exit_code`).

mod selftest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use coat_core::anonmap::AnonymizationMap;
use coat_core::coat::{coat_run, render_trace, CoatConfig};
use coat_core::constraints::{
    parse_privacy_file, parse_utility_file, render_itemsets, PrivacyConstraintSet,
    UtilityConstraintSet,
};
use coat_core::dataset::Dataset;
use coat_core::error::Error;
use coat_core::evaluation::{gen_workload, parse_workload, MetricsReport, Workload};
use coat_core::metrics::{PenaltyPolicy, Taxonomy, WeightPolicy};
use coat_core::pgen::{km_itemsets, pgen, DEFAULT_KM_CAP};

#[derive(Parser)]
#[command(
    name = "coat",
    version,
    about = "Constraint-guided anonymization of transaction datasets",
    after_help = "Exit codes: 0 success; 2 unreadable or invalid input \
                  (parse errors, bad parameters); 3 suppression budget \
                  exceeded; 4 constraint policy larger than its cap; \
                  5 vocabulary mismatch between inputs; 1 anything else."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Anonymize a dataset under privacy and utility constraints.
    Anonymize(AnonymizeArgs),
    /// Derive privacy constraints from the dataset's own maximal infrequent
    /// itemsets and write them to a constraint file.
    Pgen(PgenArgs),
    /// Write a constraint file protecting every m-itemset of the vocabulary.
    Km(KmArgs),
    /// Score an existing anonymization: loss and count-query accuracy.
    Evaluate(EvaluateArgs),
    /// Run the built-in reference pipeline and verify its outputs.
    Selftest,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightsArg {
    /// Every group weighs the same constant (see --uniform-weight).
    Uniform,
    /// Groups weigh the vocabulary share under their members' lowest common
    /// ancestor; requires --taxonomy.
    Lca,
}

#[derive(Clone, Copy, ValueEnum)]
enum PenaltyArg {
    /// A suppressed item costs its support share of the original data.
    Normsup,
    /// A suppressed item costs its raw support count.
    Rawsup,
    /// A suppressed item costs a fixed constant (see --penalty-const).
    Const,
}

#[derive(Args)]
struct ScoringArgs {
    /// Group weight policy for the loss metric and merge ranking.
    #[arg(long, value_enum, default_value = "uniform")]
    weights: WeightsArg,

    /// Constant used by --weights uniform.
    #[arg(long, default_value_t = 1.0)]
    uniform_weight: f64,

    /// Item taxonomy file (edge list `child<TAB>parent` or indented tree);
    /// required by --weights lca.
    #[arg(long)]
    taxonomy: Option<PathBuf>,

    /// Penalty policy for suppressed items in the loss metric.
    #[arg(long, value_enum, default_value = "normsup")]
    penalty: PenaltyArg,

    /// Constant used by --penalty const.
    #[arg(long, default_value_t = 1.0)]
    penalty_const: f64,
}

impl ScoringArgs {
    fn build(&self, data: &Dataset) -> Result<CoatConfig, Error> {
        if self.uniform_weight < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "--uniform-weight must be non-negative, got {}",
                self.uniform_weight
            )));
        }
        if self.penalty_const < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "--penalty-const must be non-negative, got {}",
                self.penalty_const
            )));
        }
        let weights = match self.weights {
            WeightsArg::Uniform => WeightPolicy::Uniform(self.uniform_weight),
            WeightsArg::Lca => {
                let Some(path) = &self.taxonomy else {
                    return Err(Error::InvalidParameter(
                        "--weights lca requires --taxonomy".to_string(),
                    ));
                };
                let text = fs::read_to_string(path)?;
                WeightPolicy::TaxonomyLca(Taxonomy::parse(&text, data.vocabulary())?)
            }
        };
        let penalties = match self.penalty {
            PenaltyArg::Normsup => PenaltyPolicy::NormalizedSupport,
            PenaltyArg::Rawsup => PenaltyPolicy::RawSupport,
            PenaltyArg::Const => PenaltyPolicy::Constant(self.penalty_const),
        };
        Ok(CoatConfig { weights, penalties })
    }
}

#[derive(Args)]
struct WorkloadArgs {
    /// Evaluate count-query accuracy with a workload read from this file
    /// instead of generating one.
    #[arg(long)]
    workload: Option<PathBuf>,

    /// Items per generated query.
    #[arg(long, default_value_t = 1)]
    q: usize,

    /// Number of generated queries.
    #[arg(long, default_value_t = 1000)]
    n: usize,

    /// Seed for workload generation.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Count queries whose exact answer is zero into the error average
    /// (they contribute their absolute error).
    #[arg(long)]
    include_zero_answers: bool,

    /// Write the evaluated workload to this file.
    #[arg(long)]
    out_workload: Option<PathBuf>,
}

impl WorkloadArgs {
    fn obtain(&self, map: &AnonymizationMap, data: &Dataset) -> Result<Workload, Error> {
        match &self.workload {
            Some(path) => {
                let text = fs::read_to_string(path)?;
                parse_workload(&text, data.vocabulary())
            }
            None => gen_workload(map, data.vocabulary(), self.q, self.n, self.seed),
        }
    }
}

#[derive(Args)]
struct AnonymizeArgs {
    /// Dataset file: one transaction per line, item tokens separated by
    /// whitespace; `#` starts a comment.
    #[arg(long)]
    data: PathBuf,

    /// Privacy constraint source: a constraint file path, or `pgen` to
    /// derive constraints from the data, or `km`/`km:<m>` to protect all
    /// m-itemsets (m defaults to --m).
    #[arg(long)]
    privacy: String,

    /// Utility constraint file: one block of interchangeable items per
    /// line; unlisted items form one extra block. Omitted entirely: all
    /// items interchangeable (with a warning).
    #[arg(long)]
    utility: Option<PathBuf>,

    /// Protection level: every constrained itemset must hide among at
    /// least k transactions.
    #[arg(long)]
    k: usize,

    /// Suppression budget as a percentage of the vocabulary.
    #[arg(long, default_value_t = 100.0)]
    s: f64,

    /// Itemset size for the km policy.
    #[arg(long, default_value_t = 2)]
    m: usize,

    /// Abort km enumeration above this many itemsets.
    #[arg(long, default_value_t = DEFAULT_KM_CAP)]
    km_cap: u64,

    #[command(flatten)]
    scoring: ScoringArgs,

    /// Evaluate count-query accuracy after anonymizing, adding it to the
    /// metrics report.
    #[arg(long)]
    evaluate: bool,

    #[command(flatten)]
    workload_args: WorkloadArgs,

    /// Output path for the anonymized dataset (default: data path with
    /// extension `.anon`).
    #[arg(long)]
    out_data: Option<PathBuf>,

    /// Output path for the group map (default: `.map`).
    #[arg(long)]
    out_map: Option<PathBuf>,

    /// Output path for the action trace (default: `.trace`).
    #[arg(long)]
    out_trace: Option<PathBuf>,

    /// Output path for the metrics report (default: `.metrics`).
    #[arg(long)]
    out_metrics: Option<PathBuf>,

    /// Output path for the derived constraint file when --privacy is
    /// `pgen` or `km` (default: `.privacy`).
    #[arg(long)]
    out_privacy: Option<PathBuf>,
}

#[derive(Args)]
struct PgenArgs {
    /// Dataset file.
    #[arg(long)]
    data: PathBuf,

    /// Protection level defining "infrequent".
    #[arg(long)]
    k: usize,

    /// Output constraint file (default: data path with `.privacy`).
    #[arg(long)]
    out_privacy: Option<PathBuf>,
}

#[derive(Args)]
struct KmArgs {
    /// Dataset file supplying the vocabulary.
    #[arg(long)]
    data: PathBuf,

    /// Itemset size to protect.
    #[arg(long, default_value_t = 2)]
    m: usize,

    /// Abort enumeration above this many itemsets.
    #[arg(long, default_value_t = DEFAULT_KM_CAP)]
    km_cap: u64,

    /// Output constraint file (default: data path with `.privacy`).
    #[arg(long)]
    out_privacy: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Dataset file the map was built from.
    #[arg(long)]
    data: PathBuf,

    /// Group map file produced by `anonymize`.
    #[arg(long)]
    map: PathBuf,

    #[command(flatten)]
    scoring: ScoringArgs,

    #[command(flatten)]
    workload_args: WorkloadArgs,

    /// Write the metrics report here instead of stdout.
    #[arg(long)]
    out_metrics: Option<PathBuf>,
}

/// How a privacy-source string is interpreted.
enum PrivacySource {
    File(PathBuf),
    Pgen,
    Km(Option<usize>),
}

fn parse_privacy_source(text: &str) -> Result<PrivacySource, Error> {
    if text == "pgen" {
        return Ok(PrivacySource::Pgen);
    }
    if text == "km" {
        return Ok(PrivacySource::Km(None));
    }
    if let Some(m) = text.strip_prefix("km:") {
        let m = m.parse().map_err(|_| {
            Error::InvalidParameter(format!("bad itemset size in --privacy {text:?}"))
        })?;
        return Ok(PrivacySource::Km(Some(m)));
    }
    Ok(PrivacySource::File(PathBuf::from(text)))
}

fn default_out(data: &Path, extension: &str) -> PathBuf {
    data.with_extension(extension)
}

fn load_dataset(path: &Path) -> Result<Dataset, Error> {
    let text = fs::read_to_string(path)?;
    Dataset::parse(&text)
}

fn load_utility(
    path: Option<&Path>,
    data: &Dataset,
    s: f64,
) -> Result<UtilityConstraintSet, Error> {
    match path {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            let blocks = parse_utility_file(&text, data.vocabulary())?;
            UtilityConstraintSet::new(blocks, s, data.vocab_size())
        }
        None => {
            eprintln!(
                "warning: no utility constraints given; treating all items as \
                 interchangeable"
            );
            UtilityConstraintSet::coarsest(data.vocab_size(), s)
        }
    }
}

fn cmd_anonymize(args: &AnonymizeArgs) -> Result<(), Error> {
    let data = load_dataset(&args.data)?;
    let cfg = args.scoring.build(&data)?;
    let utility = load_utility(args.utility.as_deref(), &data, args.s)?;

    let (itemsets, derived) = match parse_privacy_source(&args.privacy)? {
        PrivacySource::File(path) => {
            let text = fs::read_to_string(&path)?;
            (parse_privacy_file(&text, data.vocabulary())?, false)
        }
        PrivacySource::Pgen => (pgen(&data, args.k)?, true),
        PrivacySource::Km(m) => (
            km_itemsets(data.vocabulary(), m.unwrap_or(args.m), args.km_cap)?,
            true,
        ),
    };
    if derived {
        let out = args
            .out_privacy
            .clone()
            .unwrap_or_else(|| default_out(&args.data, "privacy"));
        fs::write(&out, render_itemsets(&itemsets, data.vocabulary()))?;
    }

    let identity = AnonymizationMap::identity(data.vocab_size());
    let privacy = PrivacyConstraintSet::new(itemsets, args.k, &identity)?;
    let outcome = coat_run(&data, &privacy, &utility, &cfg)?;

    let workload = if args.evaluate {
        let w = args.workload_args.obtain(&outcome.map, &data)?;
        if let Some(out) = &args.workload_args.out_workload {
            fs::write(
                out,
                coat_core::evaluation::render_workload(&w, data.vocabulary()),
            )?;
        }
        Some(w)
    } else {
        None
    };
    let report = MetricsReport::build(
        &outcome.map,
        &data,
        &outcome.anon,
        &cfg.weights,
        &cfg.penalties,
        workload.as_ref(),
        args.workload_args.include_zero_answers,
    )?;

    let out_data = args
        .out_data
        .clone()
        .unwrap_or_else(|| default_out(&args.data, "anon"));
    let out_map = args
        .out_map
        .clone()
        .unwrap_or_else(|| default_out(&args.data, "map"));
    let out_trace = args
        .out_trace
        .clone()
        .unwrap_or_else(|| default_out(&args.data, "trace"));
    let out_metrics = args
        .out_metrics
        .clone()
        .unwrap_or_else(|| default_out(&args.data, "metrics"));
    fs::write(
        &out_data,
        outcome
            .map
            .render_anonymized(&outcome.anon, data.vocabulary()),
    )?;
    fs::write(&out_map, outcome.map.render(data.vocabulary()))?;
    fs::write(&out_trace, render_trace(&outcome.trace))?;
    fs::write(&out_metrics, report.render())?;
    Ok(())
}

fn cmd_pgen(args: &PgenArgs) -> Result<(), Error> {
    let data = load_dataset(&args.data)?;
    let itemsets = pgen(&data, args.k)?;
    let out = args
        .out_privacy
        .clone()
        .unwrap_or_else(|| default_out(&args.data, "privacy"));
    fs::write(&out, render_itemsets(&itemsets, data.vocabulary()))?;
    Ok(())
}

fn cmd_km(args: &KmArgs) -> Result<(), Error> {
    let data = load_dataset(&args.data)?;
    let itemsets = km_itemsets(data.vocabulary(), args.m, args.km_cap)?;
    let out = args
        .out_privacy
        .clone()
        .unwrap_or_else(|| default_out(&args.data, "privacy"));
    fs::write(&out, render_itemsets(&itemsets, data.vocabulary()))?;
    Ok(())
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<(), Error> {
    let data = load_dataset(&args.data)?;
    let cfg = args.scoring.build(&data)?;
    let map_text = fs::read_to_string(&args.map)?;
    let map = AnonymizationMap::parse(&map_text, data.vocabulary())?;
    let anon = map.apply(&data)?;
    let workload = args.workload_args.obtain(&map, &data)?;
    if let Some(out) = &args.workload_args.out_workload {
        fs::write(
            out,
            coat_core::evaluation::render_workload(&workload, data.vocabulary()),
        )?;
    }
    let report = MetricsReport::build(
        &map,
        &data,
        &anon,
        &cfg.weights,
        &cfg.penalties,
        Some(&workload),
        args.workload_args.include_zero_answers,
    )?;
    match &args.out_metrics {
        Some(path) => fs::write(path, report.render())?,
        None => print!("{}", report.render()),
    }
    Ok(())
}

/// Maps an error class to the process exit code documented in `--help`.
fn exit_code(err: &Error) -> u8 {
    match err.kind() {
        "parse" | "unknown-item" | "empty-dataset" | "invalid-parameter" | "not-a-partition"
        | "empty-workload" | "workload-too-wide" => 2,
        "utility-budget-violated" => 3,
        "policy-too-large" => 4,
        "vocab-mismatch" | "taxonomy-mismatch" => 5,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Anonymize(args) => cmd_anonymize(args),
        Command::Pgen(args) => cmd_pgen(args),
        Command::Km(args) => cmd_km(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Selftest => selftest::run(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}: {err}", err.kind());
            ExitCode::from(exit_code(&err))
        }
    }
}
