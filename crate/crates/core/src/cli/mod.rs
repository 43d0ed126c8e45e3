//! Command-line front end: `stats`, `train`, `tag`, `eval`, `gradcheck`.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numeric failure.

mod config;

pub use config::{ConfigError, RunConfig, DEFAULT_WORD_DIM, KEYS};

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{corpus_stats, parse_corpus, read_corpus, write_corpus, AnnotatedCorpus, LabelMode};
use crate::features::{parse_word_vectors, WordVectors};
use crate::metrics::{evaluate_corpora, evaluation_report, porcelain_report, span_match_counts_with, EvalResult};
use crate::neural::{
    backward, finite_difference_check, finite_difference_check_with, gradcheck_fixture, DropoutMasks,
    GradCheckOptions, GradCheckReport,
};
use crate::tagger::{
    gold_spans, load_model, looks_like_span_list, parse_span_list, save_model, train, write_span_list,
    ConceptSpan, TrainError,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Data(_) => EXIT_DATA,
            Failure::Numeric(_) => EXIT_NUMERIC,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Numeric(m) => m,
        }
    }
}

fn data(e: impl std::fmt::Display) -> Failure {
    Failure::Data(e.to_string())
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "concept-tagger", version, about = "Bi-GRU IOB tagger for clinical concept spans")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print note, sentence, chunk and span counts and a length histogram.
    Stats {
        /// Corpus in column format (falls back to the `corpus` key).
        path: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Train a model and write the archive and per-epoch history.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Label a corpus with a trained model.
    Tag {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Score system output against gold annotations.
    Eval {
        gold: PathBuf,
        system: PathBuf,
        /// Also print a machine-readable key=value block.
        #[arg(long)]
        porcelain: bool,
        /// Require matching concept ids where both sides carry one.
        #[arg(long = "compare_concepts", alias = "compare-concepts")]
        compare_concepts: bool,
    },
    /// Check analytic gradients of a tiny model against finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Keep the word table frozen; it is then reported as skipped.
        #[arg(long = "freeze_words", alias = "freeze-words")]
        freeze_words: bool,
        /// Corrupt the dense-layer gradient before checking.
        #[arg(long = "inject_fault", hide = true)]
        inject_fault: bool,
    },
}

/// `--config FILE` plus one `--key value` flag per configuration key.
#[derive(Debug, Args)]
struct ConfigArgs {
    /// Flat `key = value` configuration file; flags override it.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<String>,
    #[arg(long)]
    embeddings: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    history: Option<String>,
    #[arg(long)]
    input: Option<String>,
    #[arg(long)]
    output: Option<String>,
    #[arg(long)]
    spans: Option<String>,
    #[arg(long = "word_dim", alias = "word-dim")]
    word_dim: Option<String>,
    #[arg(long)]
    window: Option<String>,
    #[arg(long)]
    overlap: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    lr: Option<String>,
    #[arg(long = "clip_norm", alias = "clip-norm")]
    clip_norm: Option<String>,
    #[arg(long)]
    dropout: Option<String>,
    #[arg(long = "batch_size", alias = "batch-size")]
    batch_size: Option<String>,
    #[arg(long)]
    patience: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long = "valid_fraction", alias = "valid-fraction")]
    valid_fraction: Option<String>,
    #[arg(long = "min_count", alias = "min-count")]
    min_count: Option<String>,
    #[arg(long = "pos_dim", alias = "pos-dim")]
    pos_dim: Option<String>,
    #[arg(long = "char_dim", alias = "char-dim")]
    char_dim: Option<String>,
    #[arg(long = "char_widths", alias = "char-widths")]
    char_widths: Option<String>,
    #[arg(long = "char_filters", alias = "char-filters")]
    char_filters: Option<String>,
    #[arg(long)]
    hidden: Option<String>,
    #[arg(long = "fine_tune_words", alias = "fine-tune-words")]
    fine_tune_words: Option<String>,
}

impl ConfigArgs {
    fn overrides(&self) -> [(&'static str, &Option<String>); 25] {
        [
            ("corpus", &self.corpus),
            ("embeddings", &self.embeddings),
            ("model", &self.model),
            ("history", &self.history),
            ("input", &self.input),
            ("output", &self.output),
            ("spans", &self.spans),
            ("word_dim", &self.word_dim),
            ("window", &self.window),
            ("overlap", &self.overlap),
            ("epochs", &self.epochs),
            ("lr", &self.lr),
            ("clip_norm", &self.clip_norm),
            ("dropout", &self.dropout),
            ("batch_size", &self.batch_size),
            ("patience", &self.patience),
            ("seed", &self.seed),
            ("valid_fraction", &self.valid_fraction),
            ("min_count", &self.min_count),
            ("pos_dim", &self.pos_dim),
            ("char_dim", &self.char_dim),
            ("char_widths", &self.char_widths),
            ("char_filters", &self.char_filters),
            ("hidden", &self.hidden),
            ("fine_tune_words", &self.fine_tune_words),
        ]
    }

    /// Defaults, then the config file, then flags.
    fn resolve(&self) -> Result<RunConfig, Failure> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
            cfg.apply_file(&text)
                .map_err(|e| usage(format!("{}: {e}", path.display())))?;
        }
        for (key, value) in self.overrides() {
            if let Some(v) = value {
                cfg.set(key, v).map_err(usage)?;
            }
        }
        Ok(cfg)
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code. Normal output goes to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_USAGE;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
    };
    let result = match cli.command {
        Command::Stats { path, config } => cmd_stats(path, &config, out),
        Command::Train { config } => config.resolve().and_then(|c| cmd_train(&c, out, err)),
        Command::Tag { config } => config.resolve().and_then(|c| cmd_tag(&c, out, err)),
        Command::Eval {
            gold,
            system,
            porcelain,
            compare_concepts,
        } => cmd_eval(&gold, &system, porcelain, compare_concepts, out),
        Command::Gradcheck {
            seed,
            freeze_words,
            inject_fault,
        } => cmd_gradcheck(seed, !freeze_words, inject_fault, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message());
            f.code()
        }
    }
}

fn io_err(path: &Path) -> impl Fn(io::Error) -> Failure + '_ {
    move |e| data(format!("{}: {e}", path.display()))
}

fn cmd_stats(path: Option<PathBuf>, args: &ConfigArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let cfg = args.resolve()?;
    let path = path
        .or(cfg.corpus.clone())
        .ok_or_else(|| usage("no corpus given"))?;
    cfg.train.chunk.validate().map_err(usage)?;
    let corpus = read_corpus(&path, LabelMode::Required).map_err(data)?;
    write!(out, "{}", corpus_stats(&corpus, &cfg.train.chunk)).map_err(io_err(&path))?;
    Ok(())
}

fn load_vectors(path: &Path) -> Result<WordVectors, Failure> {
    let file = File::open(path).map_err(io_err(path))?;
    parse_word_vectors(BufReader::new(file)).map_err(|e| data(format!("{}: {e}", path.display())))
}

fn cmd_train(cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    let corpus_path = cfg.corpus.as_ref().ok_or_else(|| usage("no corpus given"))?;
    cfg.train.validate().map_err(usage)?;
    let vectors = match &cfg.embeddings {
        Some(path) => {
            let v = load_vectors(path)?;
            if let Some(d) = cfg.word_dim.filter(|&d| d != v.dim) {
                return Err(usage(format!("word_dim {d} conflicts with embedding dimension {}", v.dim)));
            }
            v
        }
        None => WordVectors::new(cfg.word_dim.unwrap_or(DEFAULT_WORD_DIM)),
    };
    let corpus = read_corpus(corpus_path, LabelMode::Required).map_err(data)?;
    let started = Instant::now();
    let outcome = train(&corpus, &vectors, &cfg.train).map_err(|e| match e {
        TrainError::NonFinite { .. } => Failure::Numeric(e.to_string()),
        TrainError::Config(_) => usage(e),
        TrainError::Split(crate::corpus::SplitError::Fraction(_)) => usage(e),
        _ => data(e),
    })?;
    for w in &outcome.warnings {
        let _ = writeln!(err, "warning: {w}");
    }
    save_model(&outcome.tagger, &cfg.model).map_err(data)?;
    fs::write(&cfg.history, outcome.history.to_columns()).map_err(io_err(&cfg.history))?;
    let h = &outcome.history;
    let best = h.best_epoch.map_or_else(|| "none".to_string(), |e| e.to_string());
    let report = format!(
        "train sentences {}, validation sentences {}\nepochs run {}\nbest epoch {best}\nmodel {}\nhistory {}\nelapsed {:.1}s\n",
        outcome.train_corpus.sentences.len(),
        outcome.valid_corpus.sentences.len(),
        h.stopped_epoch,
        cfg.model.display(),
        cfg.history.display(),
        started.elapsed().as_secs_f64(),
    );
    out.write_all(report.as_bytes()).map_err(data)?;
    Ok(())
}

fn cmd_tag(cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    let input = cfg
        .input
        .as_ref()
        .or(cfg.corpus.as_ref())
        .ok_or_else(|| usage("no input given"))?;
    let mut tagger = load_model(&cfg.model).map_err(data)?;
    let corpus = read_corpus(input, LabelMode::Optional).map_err(data)?;
    if let Some(path) = &cfg.embeddings {
        let vectors = load_vectors(path)?;
        let added = tagger
            .extend_vocabulary(&corpus, &vectors)
            .map_err(|e| data(format!("{}: {e}", path.display())))?;
        if added > 0 {
            let _ = writeln!(err, "added {added} words from {}", path.display());
        }
    }
    let tagged = tagger.tag_corpus(&corpus).map_err(data)?;
    let mut text = Vec::new();
    write_corpus(&tagged, &mut text).map_err(data)?;
    match &cfg.output {
        Some(path) => fs::write(path, &text).map_err(io_err(path))?,
        None => out.write_all(&text).map_err(data)?,
    }
    if let Some(path) = &cfg.spans {
        let spans: Vec<Vec<ConceptSpan>> = tagged.sentences.iter().map(gold_spans).collect();
        let mut buf = Vec::new();
        write_span_list(&tagged, &spans, &mut buf).map_err(data)?;
        fs::write(path, buf).map_err(io_err(path))?;
    }
    Ok(())
}

type SpanTable = BTreeMap<(String, usize), Vec<ConceptSpan>>;

enum EvalInput {
    Corpus(AnnotatedCorpus),
    Spans(SpanTable),
}

fn read_eval_input(path: &Path) -> Result<EvalInput, Failure> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let located = |e: &dyn std::fmt::Display| data(format!("{}: {e}", path.display()));
    if looks_like_span_list(&text) {
        let mut table = SpanTable::new();
        for r in parse_span_list(text.as_bytes()).map_err(|e| located(&e))? {
            table.entry((r.doc_id, r.sent_index)).or_default().push(r.span);
        }
        Ok(EvalInput::Spans(table))
    } else {
        parse_corpus(text.as_bytes())
            .map(EvalInput::Corpus)
            .map_err(|e| located(&e))
    }
}

fn corpus_table(corpus: &AnnotatedCorpus) -> (SpanTable, BTreeMap<(String, usize), usize>) {
    let mut spans = SpanTable::new();
    let mut lengths = BTreeMap::new();
    for s in &corpus.sentences {
        let key = (s.doc_id.clone(), s.sent_index);
        spans.insert(key.clone(), gold_spans(s));
        lengths.insert(key, s.len());
    }
    (spans, lengths)
}

fn span_only_eval(gold: EvalInput, system: EvalInput, compare_concepts: bool) -> Result<EvalResult, Failure> {
    let mut lengths = None;
    let mut table = |input: EvalInput| match input {
        EvalInput::Spans(t) => t,
        EvalInput::Corpus(c) => {
            let (t, l) = corpus_table(&c);
            lengths.get_or_insert(l);
            t
        }
    };
    let (g, s) = (table(gold), table(system));
    if let Some(lengths) = &lengths {
        for (side, t) in [("gold", &g), ("system", &s)] {
            for ((doc, sent), spans) in t {
                let len = lengths
                    .get(&(doc.clone(), *sent))
                    .ok_or_else(|| data(format!("{side} refers to unknown sentence {doc} {sent}")))?;
                if let Some(bad) = spans.iter().find(|sp| sp.end > *len) {
                    return Err(data(format!(
                        "{side} span [{},{}) exceeds sentence {doc} {sent} of {len} tokens",
                        bad.start, bad.end
                    )));
                }
            }
        }
    }
    let keys: std::collections::BTreeSet<&(String, usize)> = g.keys().chain(s.keys()).collect();
    let pick = |t: &SpanTable, k: &(String, usize)| t.get(k).cloned().unwrap_or_default();
    let gl: Vec<_> = keys.iter().map(|k| pick(&g, k)).collect();
    let sl: Vec<_> = keys.iter().map(|k| pick(&s, k)).collect();
    let counts = span_match_counts_with(&gl, &sl, compare_concepts).map_err(data)?;
    Ok(EvalResult::from_counts(counts, None))
}

fn cmd_eval(
    gold: &Path,
    system: &Path,
    porcelain: bool,
    compare_concepts: bool,
    out: &mut dyn Write,
) -> Result<(), Failure> {
    let g = read_eval_input(gold)?;
    let s = read_eval_input(system)?;
    let result = match (g, s) {
        (EvalInput::Corpus(g), EvalInput::Corpus(s)) if !compare_concepts => evaluate_corpora(&g, &s).map_err(data)?,
        (EvalInput::Corpus(g), EvalInput::Corpus(s)) => {
            // alignment and token accuracy as usual, spans with concept ids
            let base = evaluate_corpora(&g, &s).map_err(data)?;
            let spans = span_only_eval(EvalInput::Corpus(g), EvalInput::Corpus(s), true)?;
            EvalResult::from_counts(spans.counts, Some((base.correct_tokens, base.total_tokens)))
        }
        (g, s) => span_only_eval(g, s, compare_concepts)?,
    };
    let mut text = evaluation_report(&result);
    if porcelain {
        text.push('\n');
        text.push_str(&porcelain_report(&result));
    }
    out.write_all(text.as_bytes()).map_err(data)?;
    Ok(())
}

fn cmd_gradcheck(seed: u64, fine_tune_words: bool, inject_fault: bool, out: &mut dyn Write) -> Result<(), Failure> {
    let (model, chunk) = gradcheck_fixture(seed, fine_tune_words);
    let dims = model.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let masks = DropoutMasks::sample(chunk.real_len(), dims.input_dim(), dims.hidden, 0.5, &mut rng);
    let mut all_passed = true;
    for (mode, masks) in [("inference", None), ("training (dropout 0.5)", Some(masks))] {
        let opts = GradCheckOptions {
            seed,
            masks,
            ..GradCheckOptions::default()
        };
        let report: GradCheckReport = if inject_fault {
            finite_difference_check_with(&model, &chunk, &opts, |m, c, k| {
                let mut g = backward(m, c, k).1;
                let w = g.dense.weights.clone();
                for r in 0..3 {
                    g.dense.weights.row_mut(r).copy_from_slice(w.row((r + 1) % 3));
                }
                g
            })
        } else {
            finite_difference_check(&model, &chunk, &opts)
        }
        .map_err(|e| Failure::Numeric(e.to_string()))?;
        writeln!(out, "== {mode} ==\n{report}").map_err(data)?;
        all_passed &= report.passed();
    }
    if all_passed {
        writeln!(out, "gradient check passed").map_err(data)?;
        Ok(())
    } else {
        Err(Failure::Numeric("gradient check failed".into()))
    }
}
