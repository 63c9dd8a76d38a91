//! Command-line front end.
//!
//! Failures print one line, `error[<category>]: <message>`, to stderr.
//! Usage errors exit with 2, every other failure with 1.

use std::collections::HashSet;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis::{
    activation_distributions, budget_scaling, layer_histogram, ranking_curve, transfer_matrix,
    transfer_tsv, value_vectors_tsv, vocab_report, vocab_tsv, Budget, BudgetConfig,
    TransferInput, DEFAULT_P_GRID, DEFAULT_TOP_K,
};
use crate::capture::{all_probes, capture};
use crate::data::{load_dataset, sample_ids, save_dataset};
use crate::ensemble::{
    align_labels, combine_patterns, evaluate, log_likelihood_baseline, log_likelihood_records,
    novo_baseline, EvalReport, LoglikScope,
};
use crate::error::{Error, Result};
use crate::model::{load_model, save_model, ModelConfig};
use crate::probe::{ProbeId, ProbeKind};
use crate::records::{read_records, write_records, ProbeRecordSet, RecordFormat};
use crate::select::{read_selection, score_probes, select, write_selection, Pattern, Selection, DEFAULT_P};
use crate::synth::{desk_config, gen_marker_dataset, gen_records, gen_rigged_model, PlantSpec, Rig};

/// Environment variable overriding the worker thread count.
pub const THREADS_ENV: &str = "TRUTHV_THREADS";

const DEFAULT_BUDGET_N: usize = 30;

#[derive(Debug, Parser)]
#[command(name = "truthv", version, about = "Truthfulness detection from MLP key activations")]
struct Cli {
    /// Worker threads; overrides TRUTHV_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a model over a dataset and write probe records.
    Capture(CaptureArgs),
    /// Rank probes on a labeled budget and keep the top fraction.
    Select(SelectArgs),
    /// Majority-vote predictions, labels not required.
    Predict(VoteArgs),
    /// Majority-vote predictions scored against labels.
    Evaluate(VoteArgs),
    /// Pick the candidate with the highest answer log-likelihood.
    BaselineLoglik(LoglikArgs),
    /// Vote with the top attention-head output norms.
    BaselineNovo(NovoArgs),
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    #[command(subcommand)]
    Synth(SynthCommand),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Binary,
}

impl From<FormatArg> for RecordFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Text => RecordFormat::Text,
            FormatArg::Binary => RecordFormat::Binary,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScopeArg {
    AnswerSum,
    AnswerMean,
    FullSequence,
}

impl From<ScopeArg> for LoglikScope {
    fn from(s: ScopeArg) -> Self {
        match s {
            ScopeArg::AnswerSum => LoglikScope::AnswerSum,
            ScopeArg::AnswerMean => LoglikScope::AnswerMean,
            ScopeArg::FullSequence => LoglikScope::FullSequence,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RigArg {
    UniformLogits,
    LabelTokensDominant,
    PlantMlpNeuron,
}

#[derive(Debug, Args)]
struct CaptureArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated probe kinds; all kinds when omitted.
    #[arg(long, value_delimiter = ',')]
    kinds: Vec<ProbeKind>,
    #[arg(long, value_enum, default_value = "text")]
    format: FormatArg,
}

#[derive(Debug, Args)]
struct BudgetArgs {
    /// Labeled items to select on, or `all`.
    #[arg(long = "budget-n", default_value_t = Budget::Count(DEFAULT_BUDGET_N))]
    budget_n: Budget,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct SelectArgs {
    #[arg(long)]
    records: PathBuf,
    #[arg(long)]
    pattern: Pattern,
    #[arg(long, default_value_t = DEFAULT_P)]
    p: f64,
    #[command(flatten)]
    budget: BudgetArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct VoteArgs {
    #[arg(long)]
    records: PathBuf,
    /// One selection, or an argmax and an argmin selection to combine.
    #[arg(long, required = true, num_args = 1)]
    selection: Vec<PathBuf>,
    /// Dataset whose labels replace the record labels.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct LoglikArgs {
    #[arg(long, conflicts_with_all = ["model", "dataset"])]
    records: Option<PathBuf>,
    #[arg(long, requires = "dataset")]
    model: Option<PathBuf>,
    #[arg(long, requires = "model")]
    dataset: Option<PathBuf>,
    #[arg(long, value_enum, requires = "model")]
    scope: Option<ScopeArg>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct NovoArgs {
    /// Records to evaluate on.
    #[arg(long)]
    records: PathBuf,
    /// Records to sample the budget from; defaults to --records.
    #[arg(long = "budget-records")]
    budget_records: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_P)]
    p: f64,
    #[command(flatten)]
    budget: BudgetArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum AnalyzeCommand {
    /// Per-rank argmax and argmin accuracy.
    Curve {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Layer histogram of the top probes.
    Layers {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        pattern: Pattern,
        #[arg(long, default_value_t = DEFAULT_P)]
        p: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Truthful vs untruthful value distributions of one probe.
    Overlap {
        #[arg(long)]
        records: PathBuf,
        /// `kind:layer:index`.
        #[arg(long)]
        probe: ProbeId,
        #[arg(long, default_value = "argmax")]
        pattern: Pattern,
        #[arg(long)]
        out: PathBuf,
    },
    /// Accuracy as a function of the labeled budget.
    Budget {
        /// Pool to draw budgets from.
        #[arg(long = "budget-records")]
        budget_records: PathBuf,
        /// Disjoint evaluation records.
        #[arg(long)]
        records: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "30,all")]
        budgets: Vec<Budget>,
        /// Number of seeds per sampled budget, starting at --seed.
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "argmax")]
        pattern: Pattern,
        #[arg(long, default_value_t = DEFAULT_P)]
        p: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Select on each dataset, evaluate on every dataset.
    Transfer {
        /// Evaluation records, one per dataset.
        #[arg(long, required = true)]
        records: Vec<PathBuf>,
        /// Selection records, paired with --records in order; each
        /// dataset's own records when omitted.
        #[arg(long = "budget-records")]
        budget_records: Vec<PathBuf>,
        #[arg(long, default_value = "argmax")]
        pattern: Pattern,
        #[arg(long, default_value_t = DEFAULT_P)]
        p: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Vocabulary projection of selected value vectors.
    Vocab {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        selection: PathBuf,
        #[arg(long = "top-k", default_value_t = DEFAULT_TOP_K)]
        top_k: usize,
        /// Dump the raw value vectors instead.
        #[arg(long)]
        raw: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum SynthCommand {
    /// Planted records plus a matching dataset, from a JSON spec.
    Records {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: FormatArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// A rigged model plus the dataset it was rigged for.
    Model {
        #[arg(long, value_enum)]
        rig: RigArg,
        #[arg(long)]
        layer: Option<usize>,
        #[arg(long)]
        index: Option<usize>,
        /// Use this dataset instead of generating a marker dataset.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long = "n-items", default_value_t = 40)]
        n_items: usize,
        #[arg(long = "n-candidates", default_value_t = 4)]
        n_candidates: usize,
        /// Model config JSON; a small default shape when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Usage(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(Failure::Usage(msg.into()))
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments");
            eprintln!("error[usage]: {}", one_line(first.trim_start_matches("error: ")));
            return 2;
        }
    };
    match dispatch_with_threads(cli) {
        Ok(()) => 0,
        Err(Failure::Usage(m)) => {
            eprintln!("error[usage]: {}", one_line(&m));
            2
        }
        Err(Failure::Run(e)) => {
            eprintln!("error[{}]: {}", e.category(), one_line(&e.to_string()));
            1
        }
    }
}

fn thread_count(flag: Option<usize>) -> CliResult<Option<usize>> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) if !v.trim().is_empty() => match v.trim().parse::<usize>() {
                Ok(n) => Some(n),
                Err(_) => return usage(format!("{THREADS_ENV} must be a positive integer, got `{v}`")),
            },
            _ => None,
        },
    };
    if n == Some(0) {
        return usage("thread count must be >= 1");
    }
    Ok(n)
}

fn dispatch_with_threads(cli: Cli) -> CliResult<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count(cli.threads)? {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Failure::Usage(format!("cannot start worker pool: {e}")))?;
    pool.install(|| dispatch(cli.command))
}

/// Fails before any work if an input is missing or an output would
/// overwrite an input.
fn check_paths(inputs: &[&Path], outputs: &[&Path]) -> CliResult<()> {
    for p in inputs {
        if !p.exists() {
            return usage(format!("input `{}` does not exist", p.display()));
        }
    }
    let canon: HashSet<PathBuf> = inputs.iter().filter_map(|p| p.canonicalize().ok()).collect();
    for o in outputs {
        if o.canonicalize().is_ok_and(|c| canon.contains(&c)) {
            return usage(format!("output `{}` would overwrite an input", o.display()));
        }
    }
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn check_p(p: f64) -> CliResult<()> {
    if !(p > 0.0 && p <= 1.0) {
        return usage(format!("--p must lie in (0, 1], got {p}"));
    }
    Ok(())
}

/// The labeled budget subset of `records`.
fn budget_subset(records: &ProbeRecordSet, budget: Budget, seed: u64) -> Result<ProbeRecordSet> {
    let labeled: Vec<String> = records
        .items()
        .iter()
        .filter(|i| i.label.is_some())
        .map(|i| i.item_id.clone())
        .collect();
    let n = match budget {
        Budget::All => labeled.len(),
        Budget::Count(n) => n,
    };
    if n == 0 {
        return Err(Error::Unlabeled(format!(
            "no labeled items in `{}`",
            records.dataset_name()
        )));
    }
    let ids: HashSet<String> = sample_ids(labeled, n, seed)?.into_iter().collect();
    Ok(records.subset(&ids))
}

fn print_report(report: &EvalReport, out: &Path) -> Result<()> {
    report.write(out)?;
    println!("accuracy: {}", report.accuracy_text());
    Ok(())
}

fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Capture(a) => {
            check_paths(&[&a.model, &a.dataset], &[&a.out])?;
            let model = load_model(&a.model)?;
            let dataset = load_dataset(&a.dataset)?;
            let probes: Vec<ProbeId> = if a.kinds.is_empty() {
                all_probes(&model)
            } else {
                all_probes(&model)
                    .into_iter()
                    .filter(|p| a.kinds.contains(&p.kind))
                    .collect()
            };
            let records = capture(&model, &dataset, &probes)?;
            write_records(&records, &a.out, a.format.into())?;
            println!(
                "captured {} items x {} probes",
                records.items().len(),
                records.n_probes()
            );
        }
        Command::Select(a) => {
            if a.pattern == Pattern::Combined {
                return usage("--pattern combined is not a selection pattern; select argmax and argmin separately and pass both to evaluate");
            }
            check_p(a.p)?;
            check_paths(&[&a.records], &[&a.out])?;
            let records = read_records(&a.records)?;
            let budget = budget_subset(&records, a.budget.budget_n, a.budget.seed)?;
            let sel = select(&budget, a.pattern, a.p)?;
            write_selection(&sel, &a.out)?;
            println!(
                "selected {} of {} probes on {} items",
                sel.probes.len(),
                sel.total_probe_count,
                sel.budget_n
            );
        }
        Command::Predict(a) => {
            let report = vote(&a)?;
            write_file(&a.out, &report.predictions_jsonl())?;
            println!("predicted {} items", report.n_items);
        }
        Command::Evaluate(a) => {
            let report = vote(&a)?;
            if report.accuracy.is_none() {
                return Err(Error::Unlabeled("evaluate needs labeled items".into()).into());
            }
            print_report(&report, &a.out)?;
        }
        Command::BaselineLoglik(a) => {
            let report = match (&a.records, &a.model, &a.dataset) {
                (Some(r), None, None) => {
                    check_paths(&[r], &[&a.out])?;
                    log_likelihood_baseline(&read_records(r)?)?
                }
                (None, Some(m), Some(d)) => {
                    check_paths(&[m, d], &[&a.out])?;
                    let model = load_model(m)?;
                    let dataset = load_dataset(d)?;
                    let scope = a.scope.map(Into::into).unwrap_or_default();
                    log_likelihood_baseline(&log_likelihood_records(&model, &dataset, scope)?)?
                }
                _ => return usage("give either --records or --model with --dataset"),
            };
            print_report(&report, &a.out)?;
        }
        Command::BaselineNovo(a) => {
            check_p(a.p)?;
            let mut inputs = vec![a.records.as_path()];
            inputs.extend(a.budget_records.as_deref());
            check_paths(&inputs, &[&a.out])?;
            let eval = read_records(&a.records)?;
            let pool = match &a.budget_records {
                Some(b) => read_records(b)?,
                None => eval.clone(),
            };
            let budget = budget_subset(&pool, a.budget.budget_n, a.budget.seed)?;
            print_report(&novo_baseline(&budget, &eval, a.p)?, &a.out)?;
        }
        Command::Analyze(c) => analyze(c)?,
        Command::Synth(c) => synth(c)?,
    }
    Ok(())
}

fn vote(a: &VoteArgs) -> CliResult<EvalReport> {
    let mut inputs: Vec<&Path> = vec![&a.records];
    inputs.extend(a.selection.iter().map(PathBuf::as_path));
    inputs.extend(a.dataset.as_deref());
    check_paths(&inputs, &[&a.out])?;
    let sels: Vec<Selection> = a
        .selection
        .iter()
        .map(|p| read_selection(p))
        .collect::<Result<_>>()?;
    let records = read_records(&a.records)?;
    let dataset = a.dataset.as_deref().map(load_dataset).transpose()?;
    let records = align_labels(&records, dataset.as_ref())?;
    let report = match sels.as_slice() {
        [one] => evaluate(&records, one, None)?,
        [x, y] => {
            let (mx, mn) = match (x.pattern, y.pattern) {
                (Pattern::Argmax, Pattern::Argmin) => (x, y),
                (Pattern::Argmin, Pattern::Argmax) => (y, x),
                _ => return usage("two selections must be one argmax and one argmin"),
            };
            combine_patterns(mx, mn, &records)?
        }
        _ => return usage("pass one --selection, or two to combine argmax and argmin"),
    };
    Ok(report)
}

fn analyze(c: AnalyzeCommand) -> CliResult<()> {
    match c {
        AnalyzeCommand::Curve { records, out } => {
            check_paths(&[&records], &[&out])?;
            let r = read_records(&records)?;
            let curve = ranking_curve(
                &score_probes(&r, Pattern::Argmax)?,
                &score_probes(&r, Pattern::Argmin)?,
                r.random_guess(),
            )?;
            write_file(&out, &curve.to_table().to_tsv())?;
            println!("wrote {} ranks", curve.rows.len());
        }
        AnalyzeCommand::Layers {
            records,
            pattern,
            p,
            out,
        } => {
            check_p(p)?;
            let pattern = pattern.ensure_base()?;
            check_paths(&[&records], &[&out])?;
            let r = read_records(&records)?;
            let n_layers = r.probes().iter().filter_map(|p| p.layer).max().map_or(0, |l| l + 1);
            let hist = layer_histogram(&score_probes(&r, pattern)?, p, n_layers, pattern)?;
            write_file(&out, &hist.to_table().to_tsv())?;
            println!("selected {} probes over {n_layers} layers", hist.total_selected);
        }
        AnalyzeCommand::Overlap {
            records,
            probe,
            pattern,
            out,
        } => {
            check_paths(&[&records], &[&out])?;
            let d = activation_distributions(&read_records(&records)?, &probe, pattern)?;
            write_file(&out, &d.to_table().to_tsv())?;
            print!("{}", d.summary_table().to_tsv());
        }
        AnalyzeCommand::Budget {
            budget_records,
            records,
            budgets,
            seeds,
            seed,
            pattern,
            p,
            out,
        } => {
            check_p(p)?;
            check_paths(&[&budget_records, &records], &[&out])?;
            let cfg = BudgetConfig {
                budgets,
                p,
                p_grid: DEFAULT_P_GRID.to_vec(),
                seeds: (seed..seed + seeds).collect(),
                pattern,
            };
            let table = budget_scaling(&read_records(&budget_records)?, &read_records(&records)?, &cfg)?;
            write_file(&out, &table.to_table().to_tsv())?;
            for b in &cfg.budgets {
                if let Some(m) = table.mean_accuracy(*b) {
                    println!("budget {b}: mean accuracy {m:.4}");
                }
            }
        }
        AnalyzeCommand::Transfer {
            records,
            budget_records,
            pattern,
            p,
            out,
        } => {
            check_p(p)?;
            if !budget_records.is_empty() && budget_records.len() != records.len() {
                return usage("--budget-records must be given once per --records, or not at all");
            }
            let mut inputs: Vec<&Path> = records.iter().map(PathBuf::as_path).collect();
            inputs.extend(budget_records.iter().map(PathBuf::as_path));
            check_paths(&inputs, &[&out])?;
            let evals: Vec<ProbeRecordSet> =
                records.iter().map(|p| read_records(p)).collect::<Result<_>>()?;
            let pools: Vec<ProbeRecordSet> = if budget_records.is_empty() {
                evals.clone()
            } else {
                budget_records.iter().map(|p| read_records(p)).collect::<Result<_>>()?
            };
            let ins: Vec<TransferInput<'_>> = evals
                .iter()
                .zip(&pools)
                .map(|(e, s)| TransferInput {
                    name: e.dataset_name(),
                    select: s,
                    eval: e,
                })
                .collect();
            let cells = transfer_matrix(&ins, p, pattern)?;
            write_file(&out, &transfer_tsv(&cells))?;
            println!("wrote {} cells", cells.len());
        }
        AnalyzeCommand::Vocab {
            model,
            selection,
            top_k,
            raw,
            out,
        } => {
            check_paths(&[&model, &selection], &[&out])?;
            let m = load_model(&model)?;
            let sel = read_selection(&selection)?;
            let text = if raw {
                value_vectors_tsv(&m, &sel)?
            } else {
                vocab_tsv(&vocab_report(&m, &sel, top_k)?)
            };
            write_file(&out, &text)?;
            println!("projected {} value vectors", sel.probes.len());
        }
    }
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
}

fn synth(c: SynthCommand) -> CliResult<()> {
    match c {
        SynthCommand::Records { spec, format, out } => {
            check_paths(&[&spec], &[&out])?;
            let spec: PlantSpec = read_json(&spec)?;
            let (records, dataset) = gen_records(&spec)?;
            create_dir(&out)?;
            let name = match format {
                FormatArg::Text => "records.txt",
                FormatArg::Binary => "records.bin",
            };
            write_records(&records, &out.join(name), format.into())?;
            save_dataset(&dataset, &out.join("dataset"))?;
            println!(
                "generated {} items x {} probes",
                records.items().len(),
                records.n_probes()
            );
        }
        SynthCommand::Model {
            rig,
            layer,
            index,
            dataset,
            n_items,
            n_candidates,
            config,
            seed,
            out,
        } => {
            let rig = match (rig, layer, index) {
                (RigArg::PlantMlpNeuron, Some(layer), Some(index)) => {
                    Rig::PlantMlpNeuron { layer, index }
                }
                (RigArg::PlantMlpNeuron, _, _) => {
                    return usage("--rig plant-mlp-neuron needs --layer and --index")
                }
                (_, None, None) => match rig {
                    RigArg::UniformLogits => Rig::UniformLogits,
                    _ => Rig::LabelTokensDominant,
                },
                _ => return usage("--layer and --index only apply to --rig plant-mlp-neuron"),
            };
            let mut inputs: Vec<&Path> = Vec::new();
            inputs.extend(dataset.as_deref());
            inputs.extend(config.as_deref());
            check_paths(&inputs, &[&out])?;
            let cfg: ModelConfig = match &config {
                Some(p) => read_json(p)?,
                None => desk_config(),
            };
            let ds = match &dataset {
                Some(p) => load_dataset(p)?,
                None => gen_marker_dataset("marker", n_items, n_candidates, seed)?,
            };
            let model = gen_rigged_model(&cfg, &ds, rig, seed)?;
            create_dir(&out)?;
            save_model(&model, &out.join("model"))?;
            save_dataset(&ds, &out.join("dataset"))?;
            println!("wrote model and {} items", ds.items.len());
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_documented_values() {
        let cli = Cli::try_parse_from(["truthv", "select", "--records", "r", "--pattern", "argmax", "--out", "o"])
            .unwrap();
        let Command::Select(a) = cli.command else {
            panic!("wrong subcommand")
        };
        assert_eq!(a.p, 0.001);
        assert_eq!(a.budget.budget_n, Budget::Count(30));
    }

    #[test]
    fn combined_select_is_a_usage_error() {
        assert_eq!(
            run(["truthv", "select", "--records", "r", "--pattern", "combined", "--out", "o"]),
            2
        );
    }

    #[test]
    fn unknown_flags_and_missing_inputs() {
        assert_eq!(run(["truthv", "select", "--bogus"]), 2);
        assert_eq!(
            run(["truthv", "select", "--records", "/nonexistent/r", "--pattern", "argmax", "--out", "o"]),
            2
        );
        assert_eq!(run(["truthv", "baseline-loglik", "--out", "o"]), 2);
    }

    #[test]
    fn one_line_collapses_whitespace() {
        assert_eq!(one_line("a\n  b\tc"), "a b c");
    }
}
