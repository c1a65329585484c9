//! `bitext`: command-line front end for bitext-core.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use bitext_core::corpus::{read_bitext_tsv, write_bitext_tsv};
use bitext_core::curriculum::{load_sources, DictionaryTranslator, IdentityTranslator, Scheduler, Translator};
use bitext_core::embinit::{cooccurrence_counts, count_tokenize, init_embeddings, EmbeddingMatrix};
use bitext_core::evalharness::{
    aggregate_annotations, annotator_calibration, read_annotations_csv, read_items, EvalItem, Section,
    SectionReport,
};
use bitext_core::langid::{build_training_set, train, LabeledText, LangIdConfig, LangIdModel};
use bitext_core::metrics::{corpus_bleu, corpus_chrf_pp, Metric};
use bitext_core::miner::{read_manifest, run_jobs, MiningConfig, WithinDocLangs};
use bitext_core::pipeline::{run_pipeline, PipelineConfig};
use bitext_core::rerank::{read_candidate_records, rerank_records, write_chosen_records};
use bitext_core::subword::{extend_vocab, learn_bpe, read_merges, read_token_list, write_merges};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bitext", version, about = "Parallel corpus construction toolkit")]
struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// TOML config (pipeline definition, or mining parameters for `mine`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Language identification.
    #[command(subcommand)]
    Langid(LangidCmd),
    /// Byte-pair encoding vocabulary extension.
    #[command(subcommand)]
    Bpe(BpeCmd),
    /// Initialize embeddings of new tokens from aligned source tokens.
    Embinit(EmbinitArgs),
    /// Mine sentence pairs from document pairs listed in a manifest.
    Mine(MineArgs),
    /// Pick the candidate translation with most target-language words.
    Rerank(RerankArgs),
    /// Emit the back-translation / self-training example stream.
    Schedule(ScheduleArgs),
    /// Score a hypothesis file against a reference file.
    Score(ScoreArgs),
    /// Per-section metric table.
    Report(ReportArgs),
    /// Aggregate human ratings.
    Annotations(AnnotationArgs),
    /// Run a configured pipeline.
    #[command(subcommand)]
    Pipeline(PipelineCmd),
}

#[derive(Subcommand)]
enum LangidCmd {
    /// Train on `label TAB text` lines.
    Train {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        buckets: Option<u64>,
        #[arg(long)]
        min_word_count: Option<usize>,
        #[arg(long)]
        lr: Option<f32>,
        /// Resample the data to this many sentences with temperature sampling.
        #[arg(long)]
        sample_total: Option<u64>,
        #[arg(long, default_value_t = 0.2)]
        exponent: f64,
    },
    /// Top-k labels for every input line, as JSONL.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 1)]
        k: usize,
    },
    /// Share of words identified as `target` for every input line.
    Proportion {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        target: String,
    },
}

#[derive(Subcommand)]
enum BpeCmd {
    Learn {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 30)]
        min_count: u64,
        #[arg(long)]
        max_merges: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    Extend {
        /// One token per line.
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        merges: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct EmbinitArgs {
    /// `src TAB tgt` bitext.
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long)]
    src_emb: PathBuf,
    #[arg(long)]
    new_tokens: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    min_weight: f64,
    #[arg(long, default_value = "ru")]
    src_lang: String,
    #[arg(long, default_value = "myv")]
    tgt_lang: String,
}

#[derive(Args)]
struct MineArgs {
    /// JSONL jobs: `{"src_doc","tgt_doc"}` or `{"doc","mode":"within"}`.
    #[arg(long)]
    manifest: PathBuf,
    /// Sentence vectors keyed by sentence id.
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
    /// Language model for within-document jobs.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    src_lang: Option<String>,
    #[arg(long)]
    tgt_lang: Option<String>,
}

#[derive(Args)]
struct RerankArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ScheduleArgs {
    #[arg(long)]
    sources: PathBuf,
    #[arg(long)]
    steps: usize,
    /// `identity` or `dict:PATH`.
    #[arg(long, default_value = "identity")]
    translator: String,
    /// Language model for choosing among diverse candidates.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    hyp: PathBuf,
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long, default_value = "bleu")]
    metric: String,
    /// One section name per line, parallel to the hypotheses.
    #[arg(long)]
    by_section: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// JSONL `{"hyp","ref","section"}`.
    #[arg(long)]
    items: PathBuf,
    #[arg(long, default_value = "bleu,chrfpp", value_delimiter = ',')]
    metrics: Vec<String>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct AnnotationArgs {
    /// CSV `pair_id,annotator_id,score`.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 3)]
    threshold: u8,
}

#[derive(Subcommand)]
enum PipelineCmd {
    Run {
        /// Pipeline TOML; falls back to the global `--config`.
        config: Option<PathBuf>,
    },
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    ))
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    BufReader::new(f)
        .lines()
        .collect::<io::Result<Vec<_>>>()
        .with_context(|| format!("reading {}", path.display()))
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

fn read_labeled(path: &Path) -> Result<Vec<LabeledText>> {
    let mut out = Vec::new();
    for (i, line) in read_lines(path)?.into_iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let Some((label, text)) = line.split_once('\t') else {
            return Err(bitext_core::Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: "expected `label TAB text`".into(),
            }
            .into());
        };
        out.push(LabeledText::new(text, label));
    }
    Ok(out)
}

fn langid(cmd: LangidCmd, seed: u64) -> Result<()> {
    match cmd {
        LangidCmd::Train { input, out, epochs, dim, buckets, min_word_count, lr, sample_total, exponent } => {
            let mut config = LangIdConfig { seed, ..LangIdConfig::default() };
            if let Some(v) = epochs {
                config.epochs = v;
            }
            if let Some(v) = dim {
                config.dim = v;
            }
            if let Some(v) = buckets {
                config.buckets = v;
            }
            if let Some(v) = min_word_count {
                config.min_word_count = v;
            }
            if let Some(v) = lr {
                config.lr0 = v;
            }
            let mut data = read_labeled(&input)?;
            if let Some(total) = sample_total {
                let mut pools: BTreeMap<String, Vec<String>> = BTreeMap::new();
                for d in data {
                    pools.entry(d.label).or_default().push(d.text);
                }
                data = build_training_set(&pools, exponent, total, seed)?;
            }
            let model = train(&data, &config)?;
            model.save(&out)?;
            log::info!("trained on {} sentences, labels {:?}", data.len(), model.labels());
        }
        LangidCmd::Predict { model, input, k } => {
            let model = LangIdModel::load(&model)?;
            let mut out = io::stdout().lock();
            for line in read_lines(&input)? {
                let preds = model.predict(&line, k)?;
                serde_json::to_writer(&mut out, &serde_json::json!({ "text": line, "predictions": preds }))?;
                writeln!(out)?;
            }
        }
        LangidCmd::Proportion { model, input, target } => {
            let model = LangIdModel::load(&model)?;
            let mut out = io::stdout().lock();
            for line in read_lines(&input)? {
                let p = model.word_language_proportion(&line, &target)?;
                writeln!(out, "{p}")?;
            }
        }
    }
    Ok(())
}

fn bpe(cmd: BpeCmd) -> Result<()> {
    match cmd {
        BpeCmd::Learn { input, min_count, max_merges, out } => {
            let corpus = read_lines(&input)?;
            let merges = learn_bpe(&corpus, min_count, max_merges)?;
            let mut w = create(&out)?;
            write_merges(&mut w, &merges)?;
            w.flush()?;
            eprintln!("{} merges", merges.len());
        }
        BpeCmd::Extend { base, merges, out } => {
            let base: HashSet<String> = read_token_list(&base)?.into_iter().collect();
            let vocab = extend_vocab(&base, &read_merges(&merges)?);
            let mut w = create(&out)?;
            for t in &vocab.new_tokens {
                writeln!(w, "{t}")?;
            }
            w.flush()?;
            eprintln!("{} new tokens", vocab.new_tokens.len());
        }
    }
    Ok(())
}

fn embinit(a: EmbinitArgs) -> Result<()> {
    let pairs = read_bitext_tsv(&a.pairs, &a.src_lang, &a.tgt_lang)?;
    let stats = cooccurrence_counts(&pairs, count_tokenize, count_tokenize);
    let src = EmbeddingMatrix::load(&a.src_emb)?;
    let new_tokens = read_token_list(&a.new_tokens)?;
    let init = init_embeddings(&new_tokens, &stats, &src, a.min_weight)?;
    let mut w = create(&a.out)?;
    init.write_to(&mut w)?;
    w.flush()?;
    Ok(())
}

fn mine(a: MineArgs, config: Option<&Path>) -> Result<()> {
    let mut cfg = match config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            toml::from_str::<MiningConfig>(&text)
                .map_err(|e| bitext_core::Error::Config(format!("{}: {e}", p.display())))?
        }
        None => match a.threshold {
            Some(t) => MiningConfig::new(t),
            None => return Err(bitext_core::Error::Config("`--threshold` or a config with `threshold` is required".into()).into()),
        },
    };
    if let Some(t) = a.threshold {
        cfg.threshold = t;
    }
    if let Some(k) = a.k {
        cfg.k_neighbors = k;
    }
    if let Some(al) = a.alpha {
        cfg.alpha = al;
    }
    let jobs = read_manifest(&a.manifest)?;
    let emb = EmbeddingMatrix::load(&a.embeddings)?;
    let model = a.model.as_deref().map(LangIdModel::load).transpose()?;
    let within = match (&model, &a.src_lang, &a.tgt_lang) {
        (Some(m), Some(s), Some(t)) => Some(WithinDocLangs { model: m, src_lang: s, tgt_lang: t }),
        (None, None, None) => None,
        _ => bail!(bitext_core::Error::Config("`--model`, `--src-lang` and `--tgt-lang` go together".into())),
    };
    let (pairs, report) = run_jobs(&jobs, &emb, &cfg, within.as_ref())?;
    let mut w = create(&a.out)?;
    write_bitext_tsv(&mut w, &pairs)?;
    w.flush()?;
    match a.report {
        Some(p) => {
            let mut w = create(&p)?;
            serde_json::to_writer_pretty(&mut w, &report)?;
            writeln!(w)?;
            w.flush()?;
        }
        None => eprintln!("{} accepted, {} rejected, {} unique pairs", report.accepted, report.rejected, report.unique_pairs),
    }
    Ok(())
}

fn rerank(a: RerankArgs) -> Result<()> {
    let model = LangIdModel::load(&a.model)?;
    let f = File::open(&a.input).with_context(|| format!("cannot open {}", a.input.display()))?;
    let records = read_candidate_records(BufReader::new(f), &a.input.display().to_string())?;
    let chosen = rerank_records(&records, &model)?;
    let mut w = create(&a.out)?;
    write_chosen_records(&mut w, &chosen)?;
    w.flush()?;
    Ok(())
}

fn schedule(a: ScheduleArgs, seed: u64) -> Result<()> {
    let sources = load_sources(&a.sources)?;
    let translator: Box<dyn Translator> = match a.translator.as_str() {
        "identity" => Box::new(IdentityTranslator),
        other => match other.strip_prefix("dict:") {
            Some(p) => Box::new(DictionaryTranslator::load(Path::new(p))?),
            None => bail!(bitext_core::Error::Config(format!("unknown translator `{other}`"))),
        },
    };
    let model = a.model.as_deref().map(LangIdModel::load).transpose()?;
    let mut sched = Scheduler::new(seed);
    let mut w = create(&a.out)?;
    for _ in 0..a.steps {
        for e in sched.next_batch(&sources, translator.as_ref(), model.as_ref())? {
            serde_json::to_writer(&mut w, &e)?;
            writeln!(w)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn score(a: ScoreArgs) -> Result<()> {
    let metric: Metric = a.metric.parse().map_err(|e: bitext_core::Error| bitext_core::Error::Config(e.to_string()))?;
    let hyps = read_lines(&a.hyp)?;
    let refs = read_lines(&a.reference)?;
    if let Some(p) = a.by_section {
        let sections = read_lines(&p)?;
        if sections.len() != hyps.len() {
            bail!(bitext_core::Error::InvalidInput(format!(
                "{} sections for {} hypotheses",
                sections.len(),
                hyps.len()
            )));
        }
        if refs.len() != hyps.len() {
            bail!(bitext_core::Error::InvalidInput(format!("{} hypotheses for {} references", hyps.len(), refs.len())));
        }
        let items = hyps
            .into_iter()
            .zip(refs)
            .zip(sections)
            .map(|((hyp, reference), s)| Ok(EvalItem { hyp, reference, section: s.trim().parse::<Section>()? }))
            .collect::<Result<Vec<_>>>()?;
        let report = SectionReport::build(&items, &[metric])?;
        print!("{}", report.to_table());
        return Ok(());
    }
    match metric {
        Metric::Bleu => print_json(&corpus_bleu(&hyps, &refs)?),
        Metric::Chrfpp => print_json(&corpus_chrf_pp(&hyps, &refs)?),
    }
}

fn report(a: ReportArgs) -> Result<()> {
    let metrics = a
        .metrics
        .iter()
        .map(|m| m.parse())
        .collect::<bitext_core::Result<Vec<Metric>>>()
        .map_err(|e| bitext_core::Error::Config(e.to_string()))?;
    let f = File::open(&a.items).with_context(|| format!("cannot open {}", a.items.display()))?;
    let items = read_items(BufReader::new(f), &a.items.display().to_string())?;
    let report = SectionReport::build(&items, &metrics)?;
    if a.json {
        print_json(&report.to_json())
    } else {
        print!("{}", report.to_table());
        Ok(())
    }
}

fn annotations(a: AnnotationArgs) -> Result<()> {
    let f = File::open(&a.input).with_context(|| format!("cannot open {}", a.input.display()))?;
    let records = read_annotations_csv(f, &a.input.display().to_string())?;
    let summary = aggregate_annotations(&records, a.threshold)?;
    let calibration = annotator_calibration(&records)?;
    print_json(&serde_json::json!({
        "n_pairs": summary.n_pairs,
        "n_records": summary.n_records,
        "mean_pessimistic": summary.mean_pessimistic,
        "acceptance_rate": summary.acceptance_rate,
        "per_pair_min": summary.per_pair_min,
        "annotator_mean": calibration,
    }))
}

/// 1 for configuration and usage problems, 2 for bad data.
fn exit_code(err: &anyhow::Error) -> u8 {
    use bitext_core::Error as E;
    match err.downcast_ref::<E>() {
        Some(E::Config(_)) => 1,
        Some(E::Io { source, .. }) if source.kind() == io::ErrorKind::NotFound => 1,
        Some(_) => 2,
        None if err.downcast_ref::<io::Error>().is_some_and(|e| e.kind() == io::ErrorKind::NotFound) => 1,
        None => 2,
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Langid(c) => langid(c, cli.seed),
        Command::Bpe(c) => bpe(c),
        Command::Embinit(a) => embinit(a),
        Command::Mine(a) => mine(a, cli.config.as_deref()),
        Command::Rerank(a) => rerank(a),
        Command::Schedule(a) => schedule(a, cli.seed),
        Command::Score(a) => score(a),
        Command::Report(a) => report(a),
        Command::Annotations(a) => annotations(a),
        Command::Pipeline(PipelineCmd::Run { .. }) => unreachable!("handled in main"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    if let Command::Pipeline(PipelineCmd::Run { config }) = &cli.command {
        let Some(path) = config.as_ref().or(cli.config.as_ref()) else {
            eprintln!("error: pipeline run needs a config path");
            return ExitCode::from(1);
        };
        let cfg = match PipelineConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
        };
        return match run_pipeline(&cfg) {
            Ok(m) => {
                for s in &m.stages {
                    eprintln!("{:>7}: {} in, {} out", s.stage.name(), s.records_in, s.records_out);
                }
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code() as u8)
            }
        };
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
