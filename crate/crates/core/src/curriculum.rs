//! Four-step alternating back-translation / self-training example stream.
//!
//! Every step yields four examples, always in the order myv→ru, ru→myv,
//! myv→mul, mul→myv. An example whose target text was produced by a
//! translator is a self-training example weighted [`LAMBDA_ST`]; all others
//! weigh 1.0.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{read_bitext_tsv, read_sentences_jsonl, ParallelPair, Sentence};
use crate::langid::LangIdModel;
use crate::rerank;
use crate::{Error, Result};

pub const LAMBDA_ST: f64 = 0.05;
pub const DIVERSE_CANDIDATES: usize = 5;

pub const MYV: &str = "myv";
pub const RU: &str = "ru";

#[derive(Debug, Clone, Default)]
pub struct DataSources {
    /// Source side Erzya, target side Russian.
    pub parallel_myv_ru: Vec<ParallelPair>,
    /// Keyed by the third language; source side Russian.
    pub parallel_ru_mul: BTreeMap<String, Vec<ParallelPair>>,
    pub mono_myv: Vec<Sentence>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SyntheticSide {
    Source,
    Target,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub src_lang: String,
    pub tgt_lang: String,
    pub src_text: String,
    pub tgt_text: String,
    pub loss_weight: f64,
    pub step: u8,
    pub synthetic_side: SyntheticSide,
}

impl TrainingExample {
    fn new(step: u8, src: (&str, &str, bool), tgt: (&str, &str, bool)) -> Self {
        debug_assert!(!(src.2 && tgt.2), "both sides synthetic");
        let synthetic_side = if tgt.2 {
            SyntheticSide::Target
        } else if src.2 {
            SyntheticSide::Source
        } else {
            SyntheticSide::None
        };
        TrainingExample {
            src_lang: src.0.to_owned(),
            tgt_lang: tgt.0.to_owned(),
            src_text: src.1.to_owned(),
            tgt_text: tgt.1.to_owned(),
            loss_weight: if tgt.2 { LAMBDA_ST } else { 1.0 },
            step,
            synthetic_side,
        }
    }
}

pub trait Translator {
    fn translate(&self, text: &str, src_lang: &str, tgt_lang: &str) -> Result<String>;

    fn translate_diverse(&self, text: &str, src_lang: &str, tgt_lang: &str, n: usize) -> Result<Vec<String>>;
}

/// Returns its input unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityTranslator;

impl Translator for IdentityTranslator {
    fn translate(&self, text: &str, _: &str, _: &str) -> Result<String> {
        Ok(text.to_owned())
    }

    fn translate_diverse(&self, text: &str, _: &str, _: &str, n: usize) -> Result<Vec<String>> {
        Ok(vec![text.to_owned(); n])
    }
}

/// Word-by-word lookup; unknown words are copied.
#[derive(Debug, Clone, Default)]
pub struct DictionaryTranslator {
    entries: HashMap<(String, String), HashMap<String, String>>,
}

impl DictionaryTranslator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, src_lang: &str, tgt_lang: &str, word: &str, translation: &str) {
        self.entries
            .entry((src_lang.to_owned(), tgt_lang.to_owned()))
            .or_default()
            .insert(word.to_owned(), translation.to_owned());
    }

    /// Lines `src_lang TAB tgt_lang TAB word TAB translation`.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut d = Self::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(Error::parse(origin, i + 1, "expected 4 tab-separated columns"));
            }
            d.insert(cols[0], cols[1], cols[2], cols[3]);
        }
        Ok(d)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    fn lookup(&self, text: &str, src: &str, tgt: &str, keep: usize) -> String {
        let table = self.entries.get(&(src.to_owned(), tgt.to_owned()));
        text.split_whitespace()
            .enumerate()
            .map(|(i, w)| match table.and_then(|t| t.get(w)) {
                Some(t) if i >= keep => t.as_str(),
                _ => w,
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl Translator for DictionaryTranslator {
    fn translate(&self, text: &str, src_lang: &str, tgt_lang: &str) -> Result<String> {
        Ok(self.lookup(text, src_lang, tgt_lang, 0))
    }

    /// Candidate `i` leaves its first `i` words untranslated.
    fn translate_diverse(&self, text: &str, src_lang: &str, tgt_lang: &str, n: usize) -> Result<Vec<String>> {
        Ok((0..n).map(|i| self.lookup(text, src_lang, tgt_lang, i)).collect())
    }
}

/// Uniform sampling without replacement, reshuffled at each wrap.
#[derive(Debug, Clone)]
struct Cursor {
    order: Vec<usize>,
    pos: usize,
    epoch: usize,
}

impl Cursor {
    fn new() -> Self {
        Cursor {
            order: Vec::new(),
            pos: 0,
            epoch: 0,
        }
    }

    fn next(&mut self, len: usize, rng: &mut ChaCha8Rng, name: &str) -> Result<usize> {
        if len == 0 {
            return Err(Error::invalid(format!("no data for {name}")));
        }
        if self.order.len() != len || self.pos == self.order.len() {
            if !self.order.is_empty() {
                self.epoch += 1;
                log::info!("{name}: epoch {} starts", self.epoch);
            }
            self.order = (0..len).collect();
            self.order.shuffle(rng);
            self.pos = 0;
        }
        self.pos += 1;
        Ok(self.order[self.pos - 1])
    }
}

/// Scheduler state: the next step and the sampling cursors. Deterministic
/// for a seed, a translator and identical data.
#[derive(Debug, Clone)]
pub struct Scheduler {
    step: u8,
    rng: ChaCha8Rng,
    ru_mul: Cursor,
    myv_ru: Cursor,
    mono: Cursor,
}

/// Chooses among diverse candidates with the language identifier, or takes
/// the first candidate when no model is given.
pub fn step1_select(candidates: &[String], model: Option<&LangIdModel>, target_lang: &str) -> Result<String> {
    match model {
        Some(m) => Ok(rerank::select(candidates, m, target_lang)?.text),
        None => candidates
            .first()
            .cloned()
            .ok_or_else(|| Error::invalid("empty candidate list")),
    }
}

impl Scheduler {
    pub fn new(seed: u64) -> Self {
        Scheduler {
            step: 1,
            rng: ChaCha8Rng::seed_from_u64(seed),
            ru_mul: Cursor::new(),
            myv_ru: Cursor::new(),
            mono: Cursor::new(),
        }
    }

    /// The step the next call to [`Scheduler::next_batch`] will run.
    pub fn step(&self) -> u8 {
        self.step
    }

    fn sample_ru_mul<'a>(&mut self, sources: &'a DataSources) -> Result<(&'a str, &'a ParallelPair)> {
        let total: usize = sources.parallel_ru_mul.values().map(Vec::len).sum();
        let mut i = self.ru_mul.next(total, &mut self.rng, "ru-mul pairs")?;
        for (lang, pairs) in &sources.parallel_ru_mul {
            if i < pairs.len() {
                return Ok((lang, &pairs[i]));
            }
            i -= pairs.len();
        }
        unreachable!("index within total")
    }

    fn pick_mul<'a>(&mut self, sources: &'a DataSources) -> Result<&'a str> {
        let langs: Vec<&String> = sources.parallel_ru_mul.keys().collect();
        if langs.is_empty() {
            return Err(Error::invalid("no third languages configured"));
        }
        Ok(langs[self.rng.gen_range(0..langs.len())])
    }

    fn emit(step: u8, myv: (&str, bool), ru: (&str, bool), mul_lang: &str, mul: (&str, bool)) -> Vec<TrainingExample> {
        vec![
            TrainingExample::new(step, (MYV, myv.0, myv.1), (RU, ru.0, ru.1)),
            TrainingExample::new(step, (RU, ru.0, ru.1), (MYV, myv.0, myv.1)),
            TrainingExample::new(step, (MYV, myv.0, myv.1), (mul_lang, mul.0, mul.1)),
            TrainingExample::new(step, (mul_lang, mul.0, mul.1), (MYV, myv.0, myv.1)),
        ]
    }

    pub fn next_batch(
        &mut self,
        sources: &DataSources,
        translator: &dyn Translator,
        model: Option<&LangIdModel>,
    ) -> Result<Vec<TrainingExample>> {
        let step = self.step;
        let batch = match step {
            1 => {
                let (mul_lang, pair) = self.sample_ru_mul(sources)?;
                let cands = translator.translate_diverse(&pair.src.text, RU, MYV, DIVERSE_CANDIDATES)?;
                let myv = step1_select(&cands, model, MYV)?;
                Self::emit(step, (&myv, true), (&pair.src.text, false), mul_lang, (&pair.tgt.text, false))
            }
            2 => {
                let (mul_lang, pair) = self.sample_ru_mul(sources)?;
                let myv = translator.translate(&pair.tgt.text, mul_lang, MYV)?;
                Self::emit(step, (&myv, true), (&pair.src.text, false), mul_lang, (&pair.tgt.text, false))
            }
            3 => {
                let i = self.myv_ru.next(sources.parallel_myv_ru.len(), &mut self.rng, "myv-ru pairs")?;
                let pair = &sources.parallel_myv_ru[i];
                let mul_lang = self.pick_mul(sources)?;
                let mul = translator.translate(&pair.src.text, MYV, mul_lang)?;
                Self::emit(step, (&pair.src.text, false), (&pair.tgt.text, false), mul_lang, (&mul, true))
            }
            _ => {
                let i = self.mono.next(sources.mono_myv.len(), &mut self.rng, "myv monolingual")?;
                let s = &sources.mono_myv[i];
                let mul_lang = self.pick_mul(sources)?;
                let mul = translator.translate(&s.text, MYV, mul_lang)?;
                let ru = translator.translate(&s.text, MYV, RU)?;
                Self::emit(step, (&s.text, false), (&ru, true), mul_lang, (&mul, true))
            }
        };
        self.step = step % 4 + 1;
        Ok(batch)
    }
}

/// `sources.toml`: paths are relative to the file.
///
/// ```toml
/// version = 1
/// myv_ru = "gold.tsv"      # myv TAB ru
/// mono_myv = "mono.jsonl"  # sentence JSONL, or one sentence per line
/// [ru_mul]
/// fi = "ru-fi.tsv"         # ru TAB fi
/// ```
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourcesConfig {
    pub version: u32,
    pub myv_ru: PathBuf,
    pub mono_myv: PathBuf,
    #[serde(default)]
    pub ru_mul: BTreeMap<String, PathBuf>,
}

fn read_lines_as_sentences(path: &Path) -> Result<Vec<Sentence>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| Sentence::new(format!("{stem}:{}", i + 1), l, Some(MYV), stem.clone()))
        .collect())
}

pub fn load_sources(path: &Path) -> Result<DataSources> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let cfg: SourcesConfig = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    if cfg.version != 1 {
        return Err(Error::Config(format!("unsupported sources version {}", cfg.version)));
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let mono_path = base.join(&cfg.mono_myv);
    let mono_myv = if mono_path.extension().is_some_and(|e| e == "jsonl") {
        read_sentences_jsonl(&mono_path, "mono")?
    } else {
        read_lines_as_sentences(&mono_path)?
    };
    let mut parallel_ru_mul = BTreeMap::new();
    for (lang, p) in &cfg.ru_mul {
        parallel_ru_mul.insert(lang.clone(), read_bitext_tsv(&base.join(p), RU, lang)?);
    }
    Ok(DataSources {
        parallel_myv_ru: read_bitext_tsv(&base.join(&cfg.myv_ru), MYV, RU)?,
        parallel_ru_mul,
        mono_myv,
    })
}
