//! Command-line front end: `train`, `eval`, `predict`, `inspect`, `stats`.

pub mod config;
mod svg;

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mhal::corpus::{
    corpus_stats, load_embeddings, mask_token_supervision, parse_conll_str, split_counts, write_conll, CorpusError,
    LabelScheme, ParseMode, Provenance, Sentence,
};
use mhal::metrics::MetricsReport;
use mhal::model::Model;
use mhal::trainer::{evaluate, init_model, predict, train, SentenceSource, TrainError};

use config::{parse_stopping, ConfigError, RunConfig, SentenceLabels};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Corpus(_) | CliError::Usage(_) => EXIT_USAGE,
            CliError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => EXIT_USAGE,
            CliError::Train(TrainError::NonFinite { .. }) => EXIT_NUMERIC,
            CliError::Train(
                TrainError::InvalidConfig(_)
                | TrainError::UnknownVariant(_)
                | TrainError::NoDevTokenLabels(_)
                | TrainError::EmptyTrain
                | TrainError::EmptyDev
                | TrainError::Corpus(_),
            ) => EXIT_USAGE,
            _ => EXIT_FAILURE,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "mhal", version, about = "Multi-head attention labeller")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train one model per seed and summarise dev/test metrics.
    Train(TrainArgs),
    /// Score a checkpoint on a labelled file.
    Eval(EvalArgs),
    /// Label a token file.
    Predict(PredictArgs),
    /// Dump per-token label distributions (and optional SVG heatmaps).
    Inspect(InspectArgs),
    /// Label statistics of one or more files.
    Stats(StatsArgs),
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub variant: Option<String>,
    /// Proportion of training sentences with token supervision.
    #[arg(long)]
    pub p: Option<f64>,
    /// Comma-separated seeds.
    #[arg(long)]
    pub seeds: Option<String>,
    /// S-F1*, F1* or mean.
    #[arg(long)]
    pub stopping: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Extra `key=value` settings, applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// β of the reported F-beta score.
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// Derive sentence predictions from token predictions.
    #[arg(long)]
    pub sentence_from_tokens: bool,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct InspectArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Directory for one SVG heatmap per sentence.
    #[arg(long)]
    pub svg_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    /// Files to count; the first one also gets the distribution summary.
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    /// Comma-separated token labels (discovered from the first file when omitted).
    #[arg(long)]
    pub token_labels: Option<String>,
    /// `binary`, `identical` or a comma-separated list (discovered when omitted).
    #[arg(long)]
    pub sentence_labels: Option<String>,
    #[arg(long, default_value = "O")]
    pub default_label: String,
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Token labels in order of first appearance, and the labels used in
/// `#label=` directives.
pub fn discover_labels(text: &str) -> (Vec<String>, Vec<String>) {
    let mut tokens: Vec<String> = Vec::new();
    let mut sentences: Vec<String> = Vec::new();
    for line in text.lines() {
        let line = line.trim_end_matches('\r');
        if let Some((_, label)) = line.split_once('\t') {
            let label = label.trim();
            if !label.is_empty() && !tokens.iter().any(|l| l == label) {
                tokens.push(label.to_string());
            }
        } else if let Some(label) = line.strip_prefix("#label=") {
            let label = label.trim();
            if !sentences.iter().any(|l| l == label) {
                sentences.push(label.to_string());
            }
        }
    }
    (tokens, sentences)
}

/// Sentence tagset implied by the directives in a file. No directives, or
/// only `default`/`NOT_default`, means binary; directives drawn from the token
/// labels mean identical.
fn infer_sentence_labels(tokens: &[String], directives: &[String], default: &str) -> SentenceLabels {
    let negated = format!("NOT_{default}");
    if directives.iter().all(|l| l == default || *l == negated) {
        SentenceLabels::Binary
    } else if directives.iter().all(|l| tokens.contains(l)) {
        SentenceLabels::Identical
    } else {
        SentenceLabels::Explicit(directives.to_vec())
    }
}

fn load_split(path: &Path, scheme: &LabelScheme) -> Result<Vec<Sentence>, CliError> {
    let text = read(path)?;
    parse_conll_str(&text, scheme, ParseMode::Labelled).map_err(|e| match e {
        CorpusError::Parse { line, message } => CliError::Usage(format!("{}:{line}: {message}", path.display())),
        CorpusError::UnknownLabel { line, label } => {
            CliError::Usage(format!("{}:{line}: unknown label `{label}`", path.display()))
        }
        other => other.into(),
    })
}

fn load_model(path: &Path) -> Result<Model, CliError> {
    if !path.exists() {
        return Err(CliError::Usage(format!("{}: no such checkpoint", path.display())));
    }
    Model::load(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Inspect(a) => cmd_inspect(a),
        Command::Stats(a) => cmd_stats(a),
    }
}

/// Parses `args` (including the program name) and runs the command,
/// printing output and errors. Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            let _ = std::io::stdout().flush();
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn effective_config(a: &TrainArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::parse_str(&read(p)?)?,
        None => RunConfig::default(),
    };
    cfg.apply_overrides(&a.set)?;
    if let Some(v) = &a.variant {
        cfg.variant = v.clone();
    }
    if let Some(p) = a.p {
        cfg.p = p;
    }
    if let Some(s) = &a.seeds {
        cfg.set("seeds", s)?;
    }
    if let Some(s) = &a.stopping {
        cfg.train.stopping = Some(parse_stopping(s)?);
    }
    if let Some(o) = &a.out {
        cfg.output_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_train(a: TrainArgs) -> Result<String, CliError> {
    let cfg = effective_config(&a)?;
    let train_path = cfg
        .train_path
        .clone()
        .ok_or_else(|| CliError::Usage("config needs a `train` file".into()))?;
    let dev_path = cfg
        .dev_path
        .clone()
        .ok_or_else(|| CliError::Usage("config needs a `dev` file".into()))?;
    let train_text = read(&train_path)?;
    let (tok_labels, directives) = discover_labels(&train_text);
    let mut scheme_cfg = cfg.clone();
    if cfg.token_labels.is_empty() && cfg.sentence_labels == SentenceLabels::Binary && !directives.is_empty() {
        scheme_cfg.sentence_labels = infer_sentence_labels(&tok_labels, &directives, &cfg.default_label);
    }
    let scheme = scheme_cfg.scheme(&tok_labels)?;
    scheme_cfg.token_labels = scheme.token_labels().to_vec();
    let train_set = load_split(&train_path, &scheme)?;
    let dev = load_split(&dev_path, &scheme)?;
    let test = cfg.test_path.as_deref().map(|p| load_split(p, &scheme)).transpose()?;
    let weights = cfg.weights()?;

    let out_dir = &cfg.output_dir;
    write(&out_dir.join("effective.cfg"), &scheme_cfg.to_text())?;
    let mut summary = String::new();
    let (mut dev_reports, mut test_reports) = (Vec::new(), Vec::new());
    for &seed in &cfg.seeds {
        let seed_dir = out_dir.join(format!("seed-{seed}"));
        fs::create_dir_all(&seed_dir).map_err(|source| CliError::Io {
            path: seed_dir.clone(),
            source,
        })?;
        let mut train_s = train_set.clone();
        let mut mask_rng = ChaCha8Rng::seed_from_u64(seed);
        mask_rng.set_stream(u64::MAX);
        mask_token_supervision(&mut train_s, cfg.p, &mut mask_rng)?;

        let mut model = init_model(&train_s, &scheme, &cfg.model, cfg.train.lm_vocab_cap, seed)?;
        if let Some(path) = &cfg.embeddings_path {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(u64::MAX - 1);
            let table = load_embeddings(path, &model.vocabs().words, cfg.model.word_emb_dim, &mut rng)?;
            model.set_word_embeddings(table.table).map_err(|e| CliError::Other(e.to_string()))?;
        }
        let log_path = seed_dir.join("epochs.jsonl");
        let mut log = fs::File::create(&log_path).map_err(|source| CliError::Io { path: log_path, source })?;
        let outcome = train(model, &train_s, &dev, &cfg.train, &weights, seed, Some(&mut log))?;
        let ckpt = seed_dir.join("model.ckpt");
        outcome
            .model
            .save(&ckpt)
            .map_err(|e| CliError::Other(format!("{}: {e}", ckpt.display())))?;

        let dev_report = evaluate(&outcome.model, &dev, outcome.sentence_source, cfg.train.beta)?;
        write(&seed_dir.join("dev_metrics.txt"), &dev_report.render())?;
        let _ = writeln!(
            summary,
            "seed {seed}: best epoch {} of {}, dev {} = {:.4}",
            outcome.best_epoch,
            outcome.log.len(),
            outcome.stopping,
            outcome.best_value
        );
        dev_reports.push(dev_report);
        if let Some(test) = &test {
            let r = evaluate(&outcome.model, test, outcome.sentence_source, cfg.train.beta)?;
            write(&seed_dir.join("test_metrics.txt"), &r.render())?;
            test_reports.push(r);
        }
    }
    let _ = writeln!(summary, "\n# dev, mean over {} seed(s)", cfg.seeds.len());
    summary.push_str(&MetricsReport::mean(&dev_reports).render());
    if !test_reports.is_empty() {
        let _ = writeln!(summary, "\n# test, mean over {} seed(s)", cfg.seeds.len());
        summary.push_str(&MetricsReport::mean(&test_reports).render());
    }
    write(&out_dir.join("summary.txt"), &summary)?;
    Ok(summary)
}

fn cmd_eval(a: EvalArgs) -> Result<String, CliError> {
    let model = load_model(&a.checkpoint)?;
    let data = load_split(&a.data, model.scheme())?;
    let source = if a.sentence_from_tokens {
        SentenceSource::FromTokens
    } else {
        SentenceSource::Head
    };
    Ok(evaluate(&model, &data, source, a.beta)?.render())
}

fn predict_sentences(model: &Model, input: &Path) -> Result<(Vec<Sentence>, Vec<Sentence>), CliError> {
    let text = read(input)?;
    let gold = parse_conll_str(&text, model.scheme(), ParseMode::Unlabelled)?;
    let pred = predict(model, &gold, SentenceSource::Head)?;
    let labelled = gold
        .iter()
        .zip(pred.tokens.iter().zip(&pred.sentences))
        .map(|(s, (toks, &label))| {
            let mut s = s.clone();
            for (t, &l) in s.tokens.iter_mut().zip(toks) {
                t.label = l;
            }
            s.label = label;
            s.provenance = Provenance::Annotated;
            s
        })
        .collect();
    Ok((gold, labelled))
}

fn emit(output: Option<&Path>, text: String) -> Result<String, CliError> {
    match output {
        Some(p) => {
            write(p, &text)?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}

fn cmd_predict(a: PredictArgs) -> Result<String, CliError> {
    let model = load_model(&a.checkpoint)?;
    let (_, labelled) = predict_sentences(&model, &a.input)?;
    emit(a.output.as_deref(), write_conll(&labelled, model.scheme()))
}

fn cmd_inspect(a: InspectArgs) -> Result<String, CliError> {
    let model = load_model(&a.checkpoint)?;
    let text = read(&a.input)?;
    let sents = parse_conll_str(&text, model.scheme(), ParseMode::Unlabelled)?;
    let scheme = model.scheme();
    let mut out = String::from("sentence\ttoken\tsurface\tgold\tpredicted");
    for l in scheme.token_labels() {
        let _ = write!(out, "\t{l}");
    }
    out.push('\n');
    if let Some(dir) = &a.svg_dir {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.clone(),
            source,
        })?;
    }
    for (k, s) in sents.iter().enumerate() {
        let o = model.infer(&model.encode(s)).map_err(TrainError::from)?;
        let pred = o.token_predictions();
        for (i, t) in s.tokens.iter().enumerate() {
            let gold = if t.supervised {
                scheme.token_labels()[t.label].as_str()
            } else {
                "-"
            };
            let _ = write!(
                out,
                "{k}\t{i}\t{}\t{gold}\t{}",
                t.surface,
                scheme.token_labels()[pred[i]]
            );
            for p in o.token_probs.row_slice(i) {
                let _ = write!(out, "\t{p}");
            }
            out.push('\n');
        }
        if let Some(dir) = &a.svg_dir {
            let surfaces: Vec<&str> = s.surfaces().collect();
            let svg = svg::heatmap(&surfaces, scheme.token_labels(), &o.token_probs);
            write(&dir.join(format!("sentence-{k}.svg")), &svg)?;
        }
    }
    emit(a.output.as_deref(), out)
}

fn cmd_stats(a: StatsArgs) -> Result<String, CliError> {
    let texts = a.files.iter().map(|p| read(p)).collect::<Result<Vec<_>, _>>()?;
    let (found_tokens, directives) = discover_labels(&texts[0]);
    let mut cfg = RunConfig {
        default_label: a.default_label.clone(),
        ..Default::default()
    };
    if let Some(t) = &a.token_labels {
        cfg.set("token_labels", t)?;
    }
    cfg.sentence_labels = match &a.sentence_labels {
        Some(s) => {
            cfg.set("sentence_labels", s)?;
            cfg.sentence_labels.clone()
        }
        None => infer_sentence_labels(&found_tokens, &directives, &a.default_label),
    };
    let scheme = cfg.scheme(&found_tokens)?;
    let splits = a
        .files
        .iter()
        .map(|p| load_split(p, &scheme))
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = corpus_stats(&splits[0], &scheme).render();
    let names: Vec<String> = a
        .files
        .iter()
        .map(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default())
        .collect();
    let pairs: Vec<(&str, &[Sentence])> = names.iter().map(String::as_str).zip(splits.iter().map(Vec::as_slice)).collect();
    for c in split_counts(&pairs, &scheme) {
        out.push_str(&c.render(&scheme));
    }
    Ok(out)
}
