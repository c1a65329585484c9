//! Config-driven composition of the corpus stages:
//! ingest → langid filter → dedup → mine → score.
//!
//! Stage outputs go to `output_dir` as numbered files followed by
//! `manifest.json`. Outputs depend only on the config, the inputs and the
//! seed. If a stage fails, every file written by the run is removed.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{self, File};
use std::hash::Hasher;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    deduplicate, read_bitext_tsv, read_documents_jsonl, read_plain_text, write_bitext_tsv, Abbreviations, Document,
    DocumentPair, ParallelPair, Segmenter,
};
use crate::embinit::EmbeddingMatrix;
use crate::langid::LangIdModel;
use crate::metrics::{corpus_bleu, corpus_chrf_pp};
use crate::miner::{dedup_pairs, mine_document_pair_with_stats, mine_within_document_with_stats, MiningConfig};
use crate::{Error, Result};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Ingest,
    Langid,
    Dedup,
    Mine,
    Score,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Langid => "langid",
            Stage::Dedup => "dedup",
            Stage::Mine => "mine",
            Stage::Score => "score",
        }
    }

    fn number(self) -> usize {
        self as usize + 1
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TextInput {
    pub path: PathBuf,
    pub id: String,
    pub lang: String,
    #[serde(default)]
    pub source_tag: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestConfig {
    /// Sentence JSONL files, one document each.
    #[serde(default)]
    pub documents: Vec<PathBuf>,
    /// Plain text, one paragraph per line, segmented on ingest.
    #[serde(default)]
    pub texts: Vec<TextInput>,
    #[serde(default)]
    pub abbreviations: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LangidStageConfig {
    pub model: PathBuf,
    /// Labels to keep; defaults to each document's own language.
    #[serde(default)]
    pub keep: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MineStageConfig {
    /// Sentence vectors keyed by sentence id.
    pub embeddings: PathBuf,
    #[serde(default)]
    pub pairs: Vec<(String, String)>,
    /// Mixed-language documents, split with the `[langid]` model.
    #[serde(default)]
    pub within: Vec<String>,
    #[serde(default)]
    pub src_lang: Option<String>,
    #[serde(default)]
    pub tgt_lang: Option<String>,
    #[serde(flatten)]
    pub mining: MiningConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreStageConfig {
    /// Reference bitext TSV.
    pub gold: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub stages: Vec<Stage>,
    #[serde(default)]
    pub ingest: Option<IngestConfig>,
    #[serde(default)]
    pub langid: Option<LangidStageConfig>,
    #[serde(default)]
    pub mine: Option<MineStageConfig>,
    #[serde(default)]
    pub score: Option<ScoreStageConfig>,
    /// Directory relative paths resolve against; the config file's own.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl PipelineConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }

    fn input_paths(&self) -> Vec<PathBuf> {
        let mut out = Vec::new();
        let has = |s: Stage| self.stages.contains(&s);
        if let (true, Some(c)) = (has(Stage::Ingest), &self.ingest) {
            out.extend(c.documents.iter().cloned());
            out.extend(c.texts.iter().map(|t| t.path.clone()));
            out.extend(c.abbreviations.iter().cloned());
        }
        if let Some(c) = &self.langid {
            if has(Stage::Langid) || (has(Stage::Mine) && self.mine.as_ref().is_some_and(|m| !m.within.is_empty())) {
                out.push(c.model.clone());
            }
        }
        if let (true, Some(c)) = (has(Stage::Mine), &self.mine) {
            out.push(c.embeddings.clone());
        }
        if let (true, Some(c)) = (has(Stage::Score), &self.score) {
            out.push(c.gold.clone());
        }
        out
    }

    /// Structural checks plus existence of every input file.
    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!("unsupported config version {}", self.version)));
        }
        if self.stages.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "stages must be listed once each, in the order ingest, langid, dedup, mine, score".into(),
            ));
        }
        let has = |s: Stage| self.stages.contains(&s);
        if self.stages.iter().any(|&s| s != Stage::Ingest) && !has(Stage::Ingest) {
            return Err(Error::Config("every stage needs `ingest`".into()));
        }
        if has(Stage::Score) && !has(Stage::Mine) {
            return Err(Error::Config("`score` needs `mine`".into()));
        }
        let need = |s: Stage, present: bool| {
            if has(s) && !present {
                Err(Error::Config(format!("stage `{}` has no [{}] section", s.name(), s.name())))
            } else {
                Ok(())
            }
        };
        need(Stage::Ingest, self.ingest.is_some())?;
        need(Stage::Langid, self.langid.is_some())?;
        need(Stage::Mine, self.mine.is_some())?;
        need(Stage::Score, self.score.is_some())?;
        if let (true, Some(m)) = (has(Stage::Mine), &self.mine) {
            m.mining.validate()?;
            if !m.within.is_empty() {
                if self.langid.is_none() {
                    return Err(Error::Config("within-document mining needs a [langid] model".into()));
                }
                if m.src_lang.is_none() || m.tgt_lang.is_none() {
                    return Err(Error::Config("within-document mining needs src_lang and tgt_lang".into()));
                }
            }
        }
        if has(Stage::Score) && self.mine.as_ref().is_some_and(|m| m.src_lang.is_none() || m.tgt_lang.is_none()) {
            return Err(Error::Config("`score` needs [mine] src_lang and tgt_lang".into()));
        }
        for p in self.input_paths() {
            let full = self.resolve(&p);
            if !full.is_file() {
                return Err(Error::Config(format!("input `{}` does not exist", full.display())));
            }
        }
        Ok(())
    }
}

/// Seed handed to a stage, derived from the run seed and the stage name.
pub fn stage_seed(seed: u64, stage: Stage) -> u64 {
    let mut h = FnvHasher::default();
    h.write_u64(seed);
    h.write(stage.name().as_bytes());
    h.finish()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub seed: u64,
    pub records_in: usize,
    pub records_out: usize,
    pub counts: BTreeMap<String, f64>,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub version: u32,
    pub seed: u64,
    pub stages: Vec<StageRecord>,
}

/// Exit status classes: configuration problems (1) and data problems (2).
#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("{0}")]
    Usage(Error),
    #[error("{stage}: {source}")]
    Data {
        stage: &'static str,
        #[source]
        source: Error,
    },
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Usage(_) => 1,
            PipelineError::Data { .. } => 2,
        }
    }
}

#[derive(Default)]
struct Run {
    written: Vec<PathBuf>,
}

impl Run {
    fn create(&mut self, path: PathBuf) -> Result<BufWriter<File>> {
        let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
        self.written.push(path);
        Ok(BufWriter::new(f))
    }

    fn cleanup(&self) {
        for p in &self.written {
            let _ = fs::remove_file(p);
        }
    }
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct SentenceLine<'a> {
    doc: &'a str,
    id: &'a str,
    lang: Option<&'a str>,
    text: &'a str,
}

fn write_docs(run: &mut Run, dir: &Path, name: &str, docs: &[Document]) -> Result<String> {
    let path = dir.join(name);
    let mut w = run.create(path.clone())?;
    for d in docs {
        for s in &d.sentences {
            let line = SentenceLine {
                doc: &d.id,
                id: &s.id,
                lang: s.lang.as_deref(),
                text: &s.text,
            };
            serde_json::to_writer(&mut w, &line)?;
            w.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
        }
    }
    finish(w, &path)?;
    Ok(name.to_owned())
}

fn sentence_count(docs: &[Document]) -> usize {
    docs.iter().map(Document::len).sum()
}

struct State {
    docs: Vec<Document>,
    pairs: Vec<ParallelPair>,
}

pub fn run_pipeline(cfg: &PipelineConfig) -> std::result::Result<Manifest, PipelineError> {
    cfg.validate().map_err(PipelineError::Usage)?;
    let out_dir = cfg.resolve(&cfg.output_dir);
    fs::create_dir_all(&out_dir).map_err(|e| PipelineError::Usage(Error::io(&out_dir, e)))?;
    let mut run = Run::default();
    let mut state = State {
        docs: Vec::new(),
        pairs: Vec::new(),
    };
    let mut manifest = Manifest {
        version: CONFIG_VERSION,
        seed: cfg.seed,
        stages: Vec::new(),
    };
    for &stage in &cfg.stages {
        match run_stage(cfg, stage, &out_dir, &mut run, &mut state) {
            Ok(rec) => manifest.stages.push(rec),
            Err(e) => {
                run.cleanup();
                return Err(PipelineError::Data {
                    stage: stage.name(),
                    source: e,
                });
            }
        }
    }
    let path = out_dir.join("manifest.json");
    let written = (|| {
        let mut w = run.create(path.clone())?;
        serde_json::to_writer_pretty(&mut w, &manifest)?;
        w.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
        finish(w, &path)
    })();
    if let Err(e) = written {
        run.cleanup();
        return Err(PipelineError::Data {
            stage: "manifest",
            source: e,
        });
    }
    Ok(manifest)
}

fn run_stage(cfg: &PipelineConfig, stage: Stage, out: &Path, run: &mut Run, st: &mut State) -> Result<StageRecord> {
    let mut rec = StageRecord {
        stage,
        seed: stage_seed(cfg.seed, stage),
        records_in: 0,
        records_out: 0,
        counts: BTreeMap::new(),
        outputs: Vec::new(),
    };
    let prefix = format!("{:02}_{}", stage.number(), stage.name());
    match stage {
        Stage::Ingest => {
            let c = cfg.ingest.as_ref().expect("validated");
            let abbr = match &c.abbreviations {
                Some(p) => Abbreviations::from_file(&cfg.resolve(p))?,
                None => Abbreviations::builtin(),
            };
            let seg = Segmenter::new(abbr);
            for p in &c.documents {
                st.docs.push(read_documents_jsonl(&cfg.resolve(p))?);
            }
            for t in &c.texts {
                let tag = t.source_tag.as_deref().unwrap_or(&t.id);
                st.docs.push(read_plain_text(&cfg.resolve(&t.path), &seg, &t.id, &t.lang, tag)?);
            }
            let mut ids = HashSet::new();
            for d in &st.docs {
                if !ids.insert(d.id.as_str()) {
                    return Err(Error::invalid(format!("duplicate document id `{}`", d.id)));
                }
            }
            rec.records_in = c.documents.len() + c.texts.len();
            rec.records_out = sentence_count(&st.docs);
            rec.counts.insert("documents".into(), st.docs.len() as f64);
            rec.outputs.push(write_docs(run, out, &format!("{prefix}.jsonl"), &st.docs)?);
        }
        Stage::Langid => {
            let c = cfg.langid.as_ref().expect("validated");
            let model = LangIdModel::load(&cfg.resolve(&c.model))?;
            for l in &c.keep {
                if model.label_index(l).is_none() {
                    return Err(Error::UnknownLabel(l.clone()));
                }
            }
            rec.records_in = sentence_count(&st.docs);
            for d in &mut st.docs {
                let keep: Vec<&str> = if c.keep.is_empty() {
                    vec![d.lang.as_str()]
                } else {
                    c.keep.iter().map(String::as_str).collect()
                };
                let kept: Vec<_> = d
                    .sentences
                    .drain(..)
                    .filter(|s| keep.contains(&model.predict_top1(&s.text)))
                    .collect();
                d.sentences = kept;
            }
            rec.records_out = sentence_count(&st.docs);
            rec.counts.insert("dropped".into(), (rec.records_in - rec.records_out) as f64);
            rec.outputs.push(write_docs(run, out, &format!("{prefix}.jsonl"), &st.docs)?);
        }
        Stage::Dedup => {
            rec.records_in = sentence_count(&st.docs);
            for d in &mut st.docs {
                d.sentences = deduplicate(std::mem::take(&mut d.sentences));
            }
            rec.records_out = sentence_count(&st.docs);
            rec.counts.insert("removed".into(), (rec.records_in - rec.records_out) as f64);
            rec.outputs.push(write_docs(run, out, &format!("{prefix}.jsonl"), &st.docs)?);
        }
        Stage::Mine => mine_stage(cfg, out, run, st, &prefix, &mut rec)?,
        Stage::Score => score_stage(cfg, out, run, st, &prefix, &mut rec)?,
    }
    Ok(rec)
}

fn mine_stage(cfg: &PipelineConfig, out: &Path, run: &mut Run, st: &mut State, prefix: &str, rec: &mut StageRecord) -> Result<()> {
    let c = cfg.mine.as_ref().expect("validated");
    let emb = EmbeddingMatrix::load(&cfg.resolve(&c.embeddings))?;
    let by_id: HashMap<&str, &Document> = st.docs.iter().map(|d| (d.id.as_str(), d)).collect();
    let doc = |id: &str| {
        by_id
            .get(id)
            .copied()
            .ok_or_else(|| Error::invalid(format!("no ingested document `{id}`")))
    };
    let mut all = Vec::new();
    let mut path_len = 0usize;
    for (s, t) in &c.pairs {
        let (s, t) = (doc(s)?, doc(t)?);
        if let (Some(sl), Some(tl)) = (&c.src_lang, &c.tgt_lang) {
            if &s.lang != sl || &t.lang != tl {
                return Err(Error::invalid(format!("document pair {} / {} is not {sl} / {tl}", s.id, t.id)));
            }
        }
        rec.records_in += s.len() + t.len();
        let m = mine_document_pair_with_stats(&DocumentPair::new(s.clone(), t.clone())?, &emb, &c.mining)?;
        path_len += m.path_scores.len();
        all.extend(m.pairs);
    }
    if !c.within.is_empty() {
        let lc = cfg.langid.as_ref().expect("validated");
        let model = LangIdModel::load(&cfg.resolve(&lc.model))?;
        let (sl, tl) = (c.src_lang.as_deref().expect("validated"), c.tgt_lang.as_deref().expect("validated"));
        for id in &c.within {
            let d = doc(id)?;
            rec.records_in += d.len();
            let m = mine_within_document_with_stats(d, &model, sl, tl, &emb, &c.mining)?;
            path_len += m.path_scores.len();
            all.extend(m.pairs);
        }
    }
    let accepted = all.len();
    st.pairs = dedup_pairs(all);
    rec.records_out = st.pairs.len();
    rec.counts.insert("path_pairs".into(), path_len as f64);
    rec.counts.insert("accepted".into(), accepted as f64);
    rec.counts.insert("rejected".into(), (path_len - accepted) as f64);
    rec.counts.insert("duplicates".into(), (accepted - st.pairs.len()) as f64);
    let name = format!("{prefix}.tsv");
    let path = out.join(&name);
    let mut w = run.create(path.clone())?;
    write_bitext_tsv(&mut w, &st.pairs)?;
    finish(w, &path)?;
    rec.outputs.push(name);
    Ok(())
}

/// Precision and recall of the mined pairs against a gold bitext (exact
/// text match), plus BLEU and ChrF++ of mined targets against the gold
/// target of the same source sentence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MiningScore {
    pub mined: usize,
    pub gold: usize,
    pub correct: usize,
    pub precision: f64,
    pub recall: f64,
    pub matched_sources: usize,
    pub bleu: Option<f64>,
    pub chrfpp: Option<f64>,
}

pub fn score_against_gold(mined: &[ParallelPair], gold: &[ParallelPair]) -> Result<MiningScore> {
    let gold_set: HashSet<(&str, &str)> = gold.iter().map(|p| (p.src.text.as_str(), p.tgt.text.as_str())).collect();
    let mut gold_by_src: HashMap<&str, &str> = HashMap::new();
    for p in gold {
        gold_by_src.entry(&p.src.text).or_insert(&p.tgt.text);
    }
    let correct = mined
        .iter()
        .filter(|p| gold_set.contains(&(p.src.text.as_str(), p.tgt.text.as_str())))
        .count();
    let (mut hyps, mut refs) = (Vec::new(), Vec::new());
    for p in mined {
        if let Some(r) = gold_by_src.get(p.src.text.as_str()) {
            hyps.push(p.tgt.text.as_str());
            refs.push(*r);
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let (bleu, chrfpp) = if hyps.is_empty() {
        (None, None)
    } else {
        (Some(corpus_bleu(&hyps, &refs)?.score), Some(corpus_chrf_pp(&hyps, &refs)?.score))
    };
    Ok(MiningScore {
        mined: mined.len(),
        gold: gold_set.len(),
        correct,
        precision: ratio(correct, mined.len()),
        recall: ratio(correct, gold_set.len()),
        matched_sources: hyps.len(),
        bleu,
        chrfpp,
    })
}

fn score_stage(cfg: &PipelineConfig, out: &Path, run: &mut Run, st: &mut State, prefix: &str, rec: &mut StageRecord) -> Result<()> {
    let c = cfg.score.as_ref().expect("validated");
    let m = cfg.mine.as_ref().expect("validated");
    let gold = read_bitext_tsv(
        &cfg.resolve(&c.gold),
        m.src_lang.as_deref().expect("validated"),
        m.tgt_lang.as_deref().expect("validated"),
    )?;
    let score = score_against_gold(&st.pairs, &gold)?;
    rec.records_in = st.pairs.len();
    rec.records_out = score.correct;
    rec.counts.insert("gold".into(), score.gold as f64);
    rec.counts.insert("precision".into(), score.precision);
    rec.counts.insert("recall".into(), score.recall);
    let name = format!("{prefix}.json");
    let path = out.join(&name);
    let mut w = run.create(path.clone())?;
    serde_json::to_writer_pretty(&mut w, &score)?;
    w.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
    finish(w, &path)?;
    rec.outputs.push(name);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Sentence;

    fn s(t: &str) -> Sentence {
        Sentence::new("x", t, None, "t")
    }

    #[test]
    fn empty_stage_list() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = PipelineConfig::parse("version = 1\noutput_dir = \"out\"\n", dir.path()).unwrap();
        let m = run_pipeline(&cfg).unwrap();
        assert!(m.stages.is_empty());
        assert!(dir.path().join("out/manifest.json").is_file());
    }

    #[test]
    fn config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path();
        assert!(PipelineConfig::parse("version = 2\noutput_dir = \"o\"\n", p).is_err());
        assert!(PipelineConfig::parse("version = 1\noutput_dir = \"o\"\nbogus = 1\n", p).is_err());
        assert!(PipelineConfig::parse("version = 1\noutput_dir = \"o\"\nstages = [\"dedup\", \"ingest\"]\n[ingest]\n", p).is_err());
        assert!(PipelineConfig::parse("version = 1\noutput_dir = \"o\"\nstages = [\"dedup\"]\n", p).is_err());
        let missing = "version = 1\noutput_dir = \"o\"\nstages = [\"ingest\"]\n[ingest]\ndocuments = [\"nope.jsonl\"]\n";
        assert!(matches!(PipelineConfig::parse(missing, p), Err(Error::Config(_))));
        assert!(!p.join("o").exists());
    }

    #[test]
    fn stage_seeds_differ() {
        assert_ne!(stage_seed(1, Stage::Ingest), stage_seed(1, Stage::Mine));
        assert_ne!(stage_seed(1, Stage::Mine), stage_seed(2, Stage::Mine));
        assert_eq!(stage_seed(1, Stage::Mine), stage_seed(1, Stage::Mine));
    }

    #[test]
    fn gold_scoring() {
        let gold = vec![ParallelPair::gold(s("a b c d"), s("w x y z")), ParallelPair::gold(s("e f"), s("u v"))];
        let mined = vec![ParallelPair::mined(s("a b c d"), s("w x y z"), 0.5), ParallelPair::mined(s("e f"), s("q"), 0.2), ParallelPair::mined(s("g"), s("h"), 0.1)];
        let sc = score_against_gold(&mined, &gold).unwrap();
        assert_eq!((sc.correct, sc.mined, sc.gold, sc.matched_sources), (1, 3, 2, 2));
        assert!((sc.precision - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(sc.recall, 0.5);
        assert!(sc.bleu.is_some());
        assert_eq!(score_against_gold(&[], &gold).unwrap().bleu, None);
    }
}
