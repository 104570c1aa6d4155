//! `traitsteer` subcommands.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use traitsteer_core::analysis::{
    category_frequencies, corpus_statistics, frobenius_distance, pearson_matrix, welch_t_test, ScoreMatrix, TextGroup,
};
use traitsteer_core::dataset::{export_dpo, export_sft, validate_dataset, DialogueRecord};
use traitsteer_core::logits::SamplerConfig;
use traitsteer_core::personality::{ContinuousLabels, Level, Trait, TraitSpec};
use traitsteer_core::psychometrics::{administer, default_sampler, demonstrations, AdministerOptions, Persona};
use traitsteer_core::scorer::{evaluate_binary_accuracy, train_linear_scorer, Binarization, TraitScorer, TrainOptions};
use traitsteer_core::steering::SteeringPolicy;
use traitsteer_core::text::WhitespaceSplitter;

use crate::backend::{build_backends, spec_key};
use crate::config::{self, check_paths, FileConfig};
use crate::error::{Error, Result};
use crate::formats::jsonl::{atomic_write, ingest_scenarios, read_dataset, read_jsonl, write_json, write_jsonl};
use crate::formats::lexicon::load_lexicon;
use crate::formats::model::{load_model, save_model};
use crate::formats::questionnaire::load_questionnaire;
use crate::formats::tables::{read_labeled, read_score_table, write_score_table, LeveledText, ScoreRow};
use crate::pipeline::{run_pipeline, ModelResponder, PipelineOptions};
use crate::remote::{RemoteScorer, Transport};

#[derive(Debug, Parser)]
#[command(name = "traitsteer", version, about = "Personality-steered dialogue generation, questionnaires and trait analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a High/Low dialogue pair for every scenario and trait.
    Generate(GenerateArgs),
    /// Convert a dataset into SFT or DPO training files.
    Export(ExportArgs),
    /// Administer a questionnaire to a model under a persona.
    Administer(AdministerArgs),
    /// Correlations, corpus statistics, lexical categories and t-tests.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Train a bag-of-words ridge trait scorer.
    TrainScorer(TrainScorerArgs),
    /// Score texts with a trained or remote scorer.
    Score(ScoreArgs),
    /// Binary trait-level accuracy of a scorer.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// TOML config file; command-line flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Scenario JSONL file.
    #[arg(long)]
    pub scenarios: PathBuf,
    /// Dataset JSONL output.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub prefix_words: Option<usize>,
    #[arg(long)]
    pub max_new_tokens: Option<usize>,
    /// Stop sequence; repeat for several.
    #[arg(long = "stop")]
    pub stop: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sample at this temperature instead of greedy decoding.
    #[arg(long, allow_negative_numbers = true)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub retries: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ExportFormat {
    Sft,
    Dpo,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LevelArg {
    High,
    Low,
}

impl From<LevelArg> for Level {
    fn from(l: LevelArg) -> Self {
        match l {
            LevelArg::High => Level::High,
            LevelArg::Low => Level::Low,
        }
    }
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub format: ExportFormat,
    /// Level of the chosen response in DPO pairs.
    #[arg(long, value_enum, default_value = "high")]
    pub target: LevelArg,
}

#[derive(Debug, Args)]
pub struct AdministerArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// `bfi44` or a questionnaire definition file.
    #[arg(long)]
    pub questionnaire: Option<String>,
    /// neutral, instruction, training or demonstration.
    #[arg(long)]
    pub persona: Option<String>,
    #[arg(long = "trait")]
    pub trait_name: Option<Trait>,
    #[arg(long, value_enum)]
    pub level: Option<LevelArg>,
    /// Dataset supplying demonstration examples.
    #[arg(long)]
    pub demos: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub n_demos: usize,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_new_tokens: Option<usize>,
    #[arg(long)]
    pub retries: Option<usize>,
    /// Score report (JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Per-query transcript (JSONL).
    #[arg(long)]
    pub transcript: Option<PathBuf>,
    /// Per-run trait scores (CSV).
    #[arg(long)]
    pub scores: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum AnalyzeCommand {
    /// Trait correlation matrix, optionally compared to a reference.
    Correlations(CorrelationArgs),
    /// Token, sentence and vocabulary statistics per group.
    Corpus(CorpusArgs),
    /// Lexical category frequencies per group.
    Categories(CategoryArgs),
    /// Welch's t-test per trait between two score tables.
    Welch(WelchArgs),
}

#[derive(Debug, Args)]
pub struct CorrelationArgs {
    /// Score table (CSV with one column per trait).
    #[arg(long)]
    pub scores: PathBuf,
    /// Reference score table; adds the Frobenius distance between matrices.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GroupArgs {
    /// Dataset whose responses are grouped by trait and level.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// `name=path` text file with one text per line; repeatable.
    #[arg(long = "group")]
    pub groups: Vec<String>,
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    #[command(flatten)]
    pub input: GroupArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CategoryArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[command(flatten)]
    pub input: GroupArgs,
    #[arg(long)]
    pub lexicon: PathBuf,
    #[arg(long)]
    pub per_tokens: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct WelchArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    /// Restrict to one trait.
    #[arg(long = "trait")]
    pub trait_name: Option<Trait>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainScorerArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Labeled JSONL: {text, openness, ..., neuroticism} with labels in [0, 1].
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub min_df: Option<usize>,
    #[arg(long)]
    pub length_normalize: bool,
}

#[derive(Debug, Args)]
pub struct ScorerArg {
    /// Trained model file.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Remote scorer root URL.
    #[arg(long)]
    pub url: Option<String>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[command(flatten)]
    pub scorer: ScorerArg,
    /// Dataset JSONL or a text file with one text per line.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BinarizeArg {
    Tertile,
    Midpoint,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[command(flatten)]
    pub scorer: ScorerArg,
    /// JSONL of {text, trait, level}.
    #[arg(long)]
    pub labeled: Option<PathBuf>,
    /// Dataset whose responses are labeled by their trait and level.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Defaults to the model's tertile thresholds when it has them.
    #[arg(long, value_enum)]
    pub binarize: Option<BinarizeArg>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args`, runs the command and returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("{}", Error::usage(first));
            eprint!("{}", e.render());
            return 2;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Generate(a) => generate(a),
        Command::Export(a) => export(a),
        Command::Administer(a) => administer_cmd(a),
        Command::Analyze(AnalyzeCommand::Correlations(a)) => correlations(a),
        Command::Analyze(AnalyzeCommand::Corpus(a)) => corpus(a),
        Command::Analyze(AnalyzeCommand::Categories(a)) => categories(a),
        Command::Analyze(AnalyzeCommand::Welch(a)) => welch(a),
        Command::TrainScorer(a) => train_scorer(a),
        Command::Score(a) => score(a),
        Command::Evaluate(a) => evaluate(a),
    }
}

fn load_config(arg: &ConfigArg, cli: FileConfig) -> Result<FileConfig> {
    if let Some(p) = &arg.config {
        check_paths(&[p], &[])?;
    }
    FileConfig::load_optional(arg.config.as_deref())?.overlay(cli)
}

fn generate(a: GenerateArgs) -> Result<()> {
    let cfg = load_config(
        &a.config,
        FileConfig {
            gamma: a.gamma,
            prefix_words: a.prefix_words,
            max_new_tokens: a.max_new_tokens,
            stop_sequences: (!a.stop.is_empty()).then_some(a.stop),
            seed: a.seed,
            temperature: a.temperature,
            worker_count: a.workers,
            retries: a.retries,
            ..Default::default()
        },
    )?;
    let seed = cfg.require_seed("generate")?;
    check_paths(&[&a.scenarios], &[&a.out])?;

    let scenarios = ingest_scenarios(&a.scenarios)?;
    let backends = build_backends(&cfg.backend())?;
    let policy = SteeringPolicy {
        gamma: cfg.gamma.unwrap_or(config::DEFAULT_GAMMA),
        prefix_words: cfg.prefix_words.unwrap_or(config::DEFAULT_PREFIX_WORDS),
        max_new_tokens: cfg.max_new_tokens.unwrap_or(config::DEFAULT_MAX_NEW_TOKENS),
        stop_sequences: cfg.stop_sequences(),
        ..Default::default()
    };
    let sampler = match cfg.temperature {
        Some(t) => SamplerConfig::temperature(t, seed),
        None => SamplerConfig::greedy().with_seed(seed),
    };
    let opts = PipelineOptions {
        policy,
        sampler,
        run_seed: seed,
        workers: cfg.worker_count.unwrap_or_else(default_workers),
        max_retries: cfg.retries.unwrap_or(config::DEFAULT_RETRIES),
    };
    log::info!("generating {} scenarios x 5 traits on {} workers", scenarios.len(), opts.workers);
    let records = run_pipeline(&scenarios, &backends.base, &backends, &opts).map_err(|e| e.file(&a.scenarios))?;
    let report = validate_dataset(&records);
    if !report.is_valid() {
        return Err(Error::new("InvalidDataset", format!("{:?}", report.findings)).file(&a.out));
    }
    write_jsonl(&a.out, &records)?;
    log::info!("wrote {} records to {}", records.len(), a.out.display());
    Ok(())
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn export(a: ExportArgs) -> Result<()> {
    check_paths(&[&a.dataset], &[&a.out])?;
    let records = read_dataset(&a.dataset)?;
    match a.format {
        ExportFormat::Sft => write_jsonl(&a.out, &export_sft(&records).map_err(|e| dataset_error(e, &a.dataset))?),
        ExportFormat::Dpo => {
            let pairs = export_dpo(&records, a.target.into()).map_err(|e| dataset_error(e, &a.dataset))?;
            let same = pairs.iter().filter(|p| p.chosen == p.rejected).count();
            if same > 0 {
                log::warn!("{same} of {} pairs have identical chosen and rejected text", pairs.len());
            }
            write_jsonl(&a.out, &pairs)
        }
    }
}

fn dataset_error(e: traitsteer_core::dataset::DatasetError, path: &Path) -> Error {
    use traitsteer_core::dataset::DatasetError::*;
    let id = match &e {
        Generation { scenario_id, .. }
        | EmptyResponse { scenario_id, .. }
        | InvalidRecord { scenario_id, .. }
        | MissingCounterpart { scenario_id, .. }
        | DuplicateRecord { scenario_id, .. } => scenario_id.clone(),
        DuplicateScenarioId(id) => id.clone(),
    };
    Error::from(e).file(path).record(id)
}

fn persona_from(a: &AdministerArgs, name: &str, seed: u64) -> Result<Persona> {
    let spec = || match (a.trait_name, a.level) {
        (Some(t), Some(l)) => Ok(TraitSpec::new(t, l.into())),
        _ => Err(Error::config(format!("persona `{name}` needs --trait and --level"))),
    };
    match name {
        "neutral" => Ok(Persona::Neutral),
        "instruction" => Ok(Persona::Instruction(spec()?)),
        "training" => Ok(Persona::TrainingFormat(spec()?)),
        "demonstration" => {
            let spec = spec()?;
            let path = a.demos.as_ref().ok_or_else(|| Error::config("persona `demonstration` needs --demos"))?;
            let records = read_dataset(path)?;
            let examples = demonstrations(&records, spec, a.n_demos, seed);
            if examples.is_empty() {
                return Err(Error::config(format!("no {} records to demonstrate", spec_key(spec))).file(path));
            }
            Ok(Persona::Demonstration { spec, examples })
        }
        other => Err(Error::config(format!("unknown persona `{other}`"))),
    }
}

#[derive(Serialize)]
struct AdministerReport<'a> {
    questionnaire: &'a str,
    persona: &'a str,
    spec: Option<TraitSpec>,
    seed: u64,
    runs: usize,
    mean: BTreeMap<&'static str, f64>,
    std: BTreeMap<&'static str, f64>,
}

fn by_trait(v: &traitsteer_core::personality::TraitValues) -> BTreeMap<&'static str, f64> {
    Trait::ALL.iter().map(|t| (t.name(), v[*t])).collect()
}

fn administer_cmd(a: AdministerArgs) -> Result<()> {
    let cfg = load_config(
        &a.config,
        FileConfig {
            runs: a.runs,
            temperature: a.temperature,
            seed: a.seed,
            max_new_tokens: a.max_new_tokens,
            retries: a.retries,
            questionnaire: a.questionnaire.clone(),
            persona: a.persona.clone(),
            ..Default::default()
        },
    )?;
    let seed = cfg.require_seed("administer")?;
    let mut outputs: Vec<&Path> = vec![&a.out];
    outputs.extend(a.transcript.as_deref());
    outputs.extend(a.scores.as_deref());
    let inputs: Vec<&Path> = a.demos.as_deref().into_iter().collect();
    check_paths(&inputs, &outputs)?;

    let q = load_questionnaire(cfg.questionnaire.as_deref().unwrap_or("bfi44"))?;
    let persona_name = cfg.persona.clone().unwrap_or_else(|| "neutral".into());
    let persona = persona_from(&a, &persona_name, seed)?;
    let backends = build_backends(&cfg.backend())?;
    let spec = match &persona {
        Persona::Neutral => None,
        Persona::Instruction(s) | Persona::TrainingFormat(s) | Persona::Demonstration { spec: s, .. } => Some(*s),
    };
    let responder = ModelResponder {
        base: &backends.base,
        policy: SteeringPolicy {
            gamma: 0.0,
            prefix_words: 0,
            max_new_tokens: cfg.max_new_tokens.unwrap_or(16),
            stop_sequences: cfg.stop_sequences(),
            ..Default::default()
        },
        answer_cue: "\nAnswer:".into(),
    };
    let sampler = match cfg.temperature {
        Some(t) => SamplerConfig::temperature(t, seed),
        None => default_sampler(seed),
    };
    let opts = AdministerOptions {
        runs: cfg.runs.unwrap_or(config::DEFAULT_RUNS),
        retries: cfg.retries.unwrap_or(config::DEFAULT_RETRIES),
    };
    let result = administer(&responder, &q, &persona, opts, &sampler)?;

    if let Some(p) = &a.transcript {
        write_jsonl(p, &result.transcript)?;
    }
    if let Some(p) = &a.scores {
        let rows: Vec<ScoreRow> =
            result.report.runs.iter().enumerate().map(|(i, v)| ScoreRow { id: format!("run{i}"), scores: *v }).collect();
        write_score_table(p, &rows)?;
    }
    write_json(
        &a.out,
        &AdministerReport {
            questionnaire: q.name(),
            persona: persona.id(),
            spec,
            seed,
            runs: opts.runs,
            mean: by_trait(&result.report.mean),
            std: by_trait(&result.report.std),
        },
    )
}

#[derive(Serialize)]
struct CorrelationReport {
    traits: Vec<&'static str>,
    matrix: [[f64; 5]; 5],
    #[serde(skip_serializing_if = "Option::is_none")]
    reference: Option<[[f64; 5]; 5]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    frobenius: Option<f64>,
}

fn correlation_of(path: &Path) -> Result<traitsteer_core::analysis::CorrelationMatrix> {
    let rows = read_score_table(path)?;
    let m = ScoreMatrix::new(rows.iter().map(|r| r.scores.0).collect()).map_err(|e| Error::from(e).file(path))?;
    pearson_matrix(&m).map_err(|e| Error::from(e).file(path))
}

fn correlations(a: CorrelationArgs) -> Result<()> {
    let mut inputs = vec![a.scores.as_path()];
    inputs.extend(a.reference.as_deref());
    check_paths(&inputs, &[&a.out])?;
    let m = correlation_of(&a.scores)?;
    let (reference, frobenius) = match &a.reference {
        Some(p) => {
            let r = correlation_of(p)?;
            let d = frobenius_distance(&m.to_matrix(), &r.to_matrix())?;
            (Some(r.0), Some(d))
        }
        None => (None, None),
    };
    write_json(&a.out, &CorrelationReport { traits: Trait::ALL.iter().map(|t| t.name()).collect(), matrix: m.0, reference, frobenius })
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text.lines().filter(|l| !l.trim().is_empty()).map(str::to_string).collect())
}

fn dataset_groups(records: &[DialogueRecord]) -> Vec<TextGroup> {
    TraitSpec::all()
        .map(|s| TextGroup {
            name: spec_key(s),
            texts: records.iter().filter(|r| r.trait_spec() == s).map(|r| r.speaker_y.clone()).collect(),
        })
        .filter(|g| !g.texts.is_empty())
        .collect()
}

fn load_groups(g: &GroupArgs) -> Result<(Vec<TextGroup>, Vec<PathBuf>)> {
    let mut groups = Vec::new();
    let mut inputs = Vec::new();
    if let Some(d) = &g.dataset {
        check_paths(&[d], &[])?;
        groups.extend(dataset_groups(&read_dataset(d)?));
        inputs.push(d.clone());
    }
    for spec in &g.groups {
        let (name, path) = spec.split_once('=').ok_or_else(|| Error::usage(format!("--group expects name=path, got {spec:?}")))?;
        let path = PathBuf::from(path);
        check_paths(&[&path], &[])?;
        groups.push(TextGroup { name: name.to_string(), texts: read_lines(&path)? });
        inputs.push(path);
    }
    if groups.is_empty() {
        return Err(Error::usage("give --dataset or at least one --group"));
    }
    Ok((groups, inputs))
}

fn write_csv(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    atomic_write(path, |w| {
        let mut csv = csv::Writer::from_writer(w);
        let err = |e: csv::Error| Error::new("CsvError", e.to_string()).file(path);
        csv.write_record(header).map_err(err)?;
        for r in rows {
            csv.write_record(&r).map_err(err)?;
        }
        csv.flush().map_err(|e| Error::io(path, e))
    })
}

fn corpus(a: CorpusArgs) -> Result<()> {
    check_paths(&[], &[&a.out])?;
    let (groups, _) = load_groups(&a.input)?;
    let stats = corpus_statistics(&groups, &WhitespaceSplitter)?;
    let rows = stats
        .groups
        .iter()
        .map(|g| {
            let mut row = vec![g.group.clone(), g.texts.to_string()];
            for m in [g.tokens, g.sentences, g.vocab, g.sentence_length] {
                row.push(m.mean.to_string());
                row.push(m.std.to_string());
            }
            row.push(g.total_vocab.to_string());
            row
        })
        .collect();
    let header = [
        "group", "texts", "tokens_mean", "tokens_std", "sentences_mean", "sentences_std", "vocab_mean", "vocab_std",
        "sentence_length_mean", "sentence_length_std", "total_vocab",
    ];
    write_csv(&a.out, &header, rows)
}

fn categories(a: CategoryArgs) -> Result<()> {
    let cfg = load_config(&a.config, FileConfig { per_tokens: a.per_tokens, ..Default::default() })?;
    check_paths(&[&a.lexicon], &[&a.out])?;
    let lexicon = load_lexicon(&a.lexicon)?;
    let (groups, _) = load_groups(&a.input)?;
    let per = cfg.per_tokens.unwrap_or(config::DEFAULT_PER_TOKENS);
    let mut rows = Vec::new();
    for g in &groups {
        let report = category_frequencies(&g.texts, &lexicon, per, &WhitespaceSplitter).map_err(|e| Error::from(e).record(&g.name))?;
        for c in &report.categories {
            rows.push(vec![
                g.name.clone(),
                c.category.clone(),
                c.matches.to_string(),
                report.total_tokens.to_string(),
                per.to_string(),
                c.frequency.to_string(),
            ]);
        }
    }
    write_csv(&a.out, &["group", "category", "matches", "total_tokens", "per_tokens", "frequency"], rows)
}

fn welch(a: WelchArgs) -> Result<()> {
    check_paths(&[&a.a, &a.b], &[&a.out])?;
    let ta = read_score_table(&a.a)?;
    let tb = read_score_table(&a.b)?;
    let traits: Vec<Trait> = a.trait_name.map_or_else(|| Trait::ALL.to_vec(), |t| vec![t]);
    let mut rows = Vec::new();
    for t in traits {
        let xa: Vec<f64> = ta.iter().map(|r| r.scores[t]).collect();
        let xb: Vec<f64> = tb.iter().map(|r| r.scores[t]).collect();
        let r = welch_t_test(&xa, &xb).map_err(|e| Error::from(e).record(t.name()))?;
        let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
        rows.push(vec![
            t.name().to_string(),
            xa.len().to_string(),
            xb.len().to_string(),
            mean(&xa).to_string(),
            mean(&xb).to_string(),
            r.t.to_string(),
            r.df.to_string(),
            r.p.to_string(),
        ]);
    }
    write_csv(&a.out, &["trait", "n_a", "n_b", "mean_a", "mean_b", "t", "df", "p"], rows)
}

fn train_scorer(a: TrainScorerArgs) -> Result<()> {
    let cfg = load_config(
        &a.config,
        FileConfig {
            l2_lambda: a.lambda,
            min_doc_freq: a.min_df,
            length_normalize: a.length_normalize.then_some(true),
            ..Default::default()
        },
    )?;
    check_paths(&[&a.corpus], &[&a.out])?;
    let corpus = read_labeled(&a.corpus)?;
    let defaults = TrainOptions::default();
    let opts = TrainOptions {
        l2_lambda: cfg.l2_lambda.unwrap_or(defaults.l2_lambda),
        min_doc_freq: cfg.min_doc_freq.unwrap_or(defaults.min_doc_freq),
        length_normalize: cfg.length_normalize.unwrap_or(defaults.length_normalize),
    };
    let model = train_linear_scorer(&corpus, &opts).map_err(|e| Error::from(e).file(&a.corpus))?;
    log::info!("trained on {} texts, {} features", corpus.len(), model.featurizer.len());
    save_model(&a.out, &model)
}

enum AnyScorer {
    Linear(traitsteer_core::scorer::LinearTraitScorer),
    Remote(RemoteScorer),
}

impl AnyScorer {
    fn load(arg: &ScorerArg, cfg: &FileConfig) -> Result<Self> {
        match (&arg.model, arg.url.as_ref().or(cfg.scorer_url.as_ref())) {
            (Some(p), _) => {
                check_paths(&[p], &[])?;
                Ok(AnyScorer::Linear(load_model(p)?))
            }
            (None, Some(url)) => {
                let timeout = cfg.backend.as_ref().and_then(|b| b.timeout_ms).unwrap_or(30_000);
                Ok(AnyScorer::Remote(RemoteScorer::new(Transport::new(url, Duration::from_millis(timeout)))))
            }
            (None, None) => Err(Error::usage("give --model or --url")),
        }
    }

    fn default_binarization(&self) -> Binarization {
        match self {
            AnyScorer::Linear(m) => m.thresholds.map_or_else(Binarization::scale_midpoint, Binarization::Tertile),
            AnyScorer::Remote(_) => Binarization::scale_midpoint(),
        }
    }
}

impl TraitScorer for AnyScorer {
    fn score(&self, texts: &[&str]) -> std::result::Result<Vec<ContinuousLabels>, traitsteer_core::scorer::ScorerError> {
        match self {
            AnyScorer::Linear(m) => m.score(texts),
            AnyScorer::Remote(r) => r.score(texts),
        }
    }
}

/// Texts with ids: dataset responses, or one text per line otherwise.
fn load_texts(path: &Path) -> Result<Vec<(String, String)>> {
    if path.extension().is_some_and(|e| e == "jsonl") {
        let records = read_dataset(path)?;
        return Ok(records.into_iter().map(|r| (format!("{}/{}", r.scenario_id, spec_key(r.trait_spec())), r.speaker_y)).collect());
    }
    Ok(read_lines(path)?.into_iter().enumerate().map(|(i, t)| ((i + 1).to_string(), t)).collect())
}

fn score(a: ScoreArgs) -> Result<()> {
    let cfg = load_config(&a.config, FileConfig::default())?;
    check_paths(&[&a.input], &[&a.out])?;
    let scorer = AnyScorer::load(&a.scorer, &cfg)?;
    let texts = load_texts(&a.input)?;
    let refs: Vec<&str> = texts.iter().map(|(_, t)| t.as_str()).collect();
    let scores = scorer.score(&refs)?;
    let rows = texts.into_iter().zip(scores).map(|((id, _), scores)| ScoreRow { id, scores }).collect::<Vec<_>>();
    write_score_table(&a.out, &rows)
}

#[derive(Serialize)]
struct EvaluationReport {
    binarization: &'static str,
    examples: usize,
    per_trait: BTreeMap<&'static str, Option<f64>>,
    counts: BTreeMap<&'static str, usize>,
    average: f64,
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let cfg = load_config(&a.config, FileConfig::default())?;
    check_paths(&[], &[&a.out])?;
    let scorer = AnyScorer::load(&a.scorer, &cfg)?;
    let examples: Vec<(String, TraitSpec)> = match (&a.labeled, &a.dataset) {
        (Some(p), None) => {
            check_paths(&[p], &[])?;
            read_jsonl::<LeveledText>(p)?.into_iter().map(|(_, r)| (r.text.clone(), r.spec())).collect()
        }
        (None, Some(p)) => {
            check_paths(&[p], &[])?;
            read_dataset(p)?.into_iter().map(|r| (r.speaker_y.clone(), r.trait_spec())).collect()
        }
        _ => return Err(Error::usage("give exactly one of --labeled or --dataset")),
    };
    let rule = match a.binarize {
        Some(BinarizeArg::Midpoint) => Binarization::scale_midpoint(),
        Some(BinarizeArg::Tertile) => match &scorer {
            AnyScorer::Linear(m) => Binarization::Tertile(m.thresholds.ok_or(traitsteer_core::scorer::ScorerError::MissingThresholds)?),
            AnyScorer::Remote(_) => return Err(Error::config("tertile binarization needs a trained model with thresholds")),
        },
        None => scorer.default_binarization(),
    };
    let report = evaluate_binary_accuracy(&scorer, &examples, &rule)?;
    write_json(
        &a.out,
        &EvaluationReport {
            binarization: match rule {
                Binarization::Midpoint(_) => "midpoint",
                Binarization::Tertile(_) => "tertile",
            },
            examples: examples.len(),
            per_trait: Trait::ALL.iter().map(|t| (t.name(), report.per_trait[t.index()])).collect(),
            counts: Trait::ALL.iter().map(|t| (t.name(), report.counts[t.index()])).collect(),
            average: report.average,
        },
    )
}
