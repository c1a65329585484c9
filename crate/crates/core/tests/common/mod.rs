//! Synthetic fixtures shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use bitext_core::corpus::{Document, DocumentPair, Sentence};
use bitext_core::embinit::EmbeddingMatrix;
use bitext_core::langid::{LabeledText, LangIdConfig};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f32> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

pub fn unit(v: Vec<f32>) -> Vec<f32> {
    let n = v.iter().map(|x| x * x).sum::<f32>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn perturb(rng: &mut ChaCha8Rng, base: &[f32], sigma: f32) -> Vec<f32> {
    base.iter()
        .map(|&x| { let e: f32 = StandardNormal.sample(rng); x + sigma * e })
        .collect()
}

/// Text of exactly `len` characters starting with `id`.
fn padded(id: &str, len: usize) -> String {
    let mut t = format!("{id} ");
    while t.chars().count() < len {
        t.push('ж');
    }
    t
}

pub struct SyntheticBitext {
    pub docs: Vec<DocumentPair>,
    pub embeddings: EmbeddingMatrix,
    /// `(src sentence id, tgt sentence id)` of every true pair.
    pub truth: HashSet<(String, String)>,
}

/// Document pairs whose true sentence pairs share a random unit vector,
/// each side perturbed by Gaussian noise of scale `sigma` per coordinate.
/// Each side also receives unpaired sentences with unrelated vectors so
/// that they make up `unpaired` of its sentences.
pub fn synthetic_bitext(seed: u64, n_docs: usize, dim: usize, sigma: f32, unpaired: f64) -> SyntheticBitext {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut embeddings = EmbeddingMatrix::new(dim);
    let mut truth = HashSet::new();
    let mut docs = Vec::new();
    for d in 0..n_docs {
        let n_true = rng.gen_range(8..=14);
        let n_extra = ((n_true as f64) * unpaired / (1.0 - unpaired)).round() as usize;
        // `None` marks an unpaired slot
        let mut src_slots: Vec<Option<usize>> = (0..n_true).map(Some).collect();
        let mut tgt_slots = src_slots.clone();
        for slots in [&mut src_slots, &mut tgt_slots] {
            for _ in 0..n_extra {
                let at = rng.gen_range(0..=slots.len());
                slots.insert(at, None);
            }
        }
        let bases: Vec<Vec<f32>> = (0..n_true).map(|_| unit(gaussian(&mut rng, dim))).collect();
        let lens: Vec<usize> = (0..n_true).map(|_| rng.gen_range(30..80)).collect();
        let side = |slots: &[Option<usize>], lang: &str, rng: &mut ChaCha8Rng, emb: &mut EmbeddingMatrix| {
            let mut doc = Document::new(format!("d{d}.{lang}"), lang, "synthetic");
            let mut ids = vec![String::new(); n_true];
            for (pos, slot) in slots.iter().enumerate() {
                let id = format!("d{d}.{lang}.{pos}");
                let (vec, len) = match slot {
                    Some(k) => {
                        ids[*k] = id.clone();
                        let jitter = rng.gen_range(0.9..1.1);
                        (perturb(rng, &bases[*k], sigma), (lens[*k] as f64 * jitter) as usize)
                    }
                    None => (unit(gaussian(rng, dim)), rng.gen_range(30..80)),
                };
                emb.push(id.clone(), &vec).unwrap();
                doc.push(Sentence::new(id.clone(), &padded(&id, len), Some(lang), "synthetic"));
            }
            (doc, ids)
        };
        let (src, src_ids) = side(&src_slots, "myv", &mut rng, &mut embeddings);
        let (tgt, tgt_ids) = side(&tgt_slots, "ru", &mut rng, &mut embeddings);
        for (s, t) in src_ids.into_iter().zip(tgt_ids) {
            truth.insert((s, t));
        }
        docs.push(DocumentPair::new(src, tgt).unwrap());
    }
    SyntheticBitext { docs, embeddings, truth }
}

/// Threshold maximizing F1 over `(score, correct)` candidates, given the
/// number of true pairs.
pub fn best_f1_threshold(mut scored: Vec<(f64, bool)>, n_true: usize) -> f64 {
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (mut best, mut best_f1, mut tp) = (scored[0].0, -1.0, 0usize);
    for (i, &(score, ok)) in scored.iter().enumerate() {
        tp += ok as usize;
        let p = tp as f64 / (i + 1) as f64;
        let r = tp as f64 / n_true as f64;
        let f1 = if tp == 0 { 0.0 } else { 2.0 * p * r / (p + r) };
        if f1 > best_f1 {
            best_f1 = f1;
            best = score;
        }
    }
    best
}

fn word(rng: &mut ChaCha8Rng, alphabet: &[char]) -> String {
    let n = rng.gen_range(2..=7);
    (0..n).map(|_| *alphabet.choose(rng).unwrap()).collect()
}

fn sentences(rng: &mut ChaCha8Rng, vocab: &[String], shared: &[String], shared_frac: f64, n: usize, label: &str) -> Vec<LabeledText> {
    (0..n)
        .map(|_| {
            let len = rng.gen_range(3..=10);
            let words: Vec<&str> = (0..len)
                .map(|_| {
                    if !shared.is_empty() && rng.gen_bool(shared_frac) {
                        shared.choose(rng).unwrap().as_str()
                    } else {
                        vocab.choose(rng).unwrap().as_str()
                    }
                })
                .collect();
            LabeledText::new(words.join(" "), label)
        })
        .collect()
}

pub struct LangSplit {
    pub train: Vec<LabeledText>,
    pub test: Vec<LabeledText>,
}

const LABELS: [&str; 3] = ["lat", "cyr", "grk"];

/// Three languages written in disjoint alphabets.
pub fn disjoint_languages(seed: u64, train_per_lang: usize, test_per_lang: usize) -> LangSplit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alphabets: [Vec<char>; 3] = [
        ('a'..='p').collect(),
        ('а'..='п').collect(),
        ('α'..='π').collect(),
    ];
    let mut split = LangSplit { train: Vec::new(), test: Vec::new() };
    for (label, alphabet) in LABELS.iter().zip(&alphabets) {
        let vocab: Vec<String> = (0..150).map(|_| word(&mut rng, alphabet)).collect();
        split.train.extend(sentences(&mut rng, &vocab, &[], 0.0, train_per_lang, label));
        split.test.extend(sentences(&mut rng, &vocab, &[], 0.0, test_per_lang, label));
    }
    split
}

/// Three languages over one alphabet where a fraction `shared_frac` of the
/// running tokens comes from a vocabulary common to all of them.
pub fn overlapping_languages(seed: u64, shared_frac: f64, train_per_lang: usize, test_per_lang: usize) -> LangSplit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alphabet: Vec<char> = ('a'..='z').collect();
    let shared: Vec<String> = (0..60).map(|_| word(&mut rng, &alphabet)).collect();
    let mut split = LangSplit { train: Vec::new(), test: Vec::new() };
    for label in LABELS {
        let vocab: Vec<String> = (0..150).map(|_| word(&mut rng, &alphabet)).collect();
        split.train.extend(sentences(&mut rng, &vocab, &shared, shared_frac, train_per_lang, label));
        split.test.extend(sentences(&mut rng, &vocab, &shared, shared_frac, test_per_lang, label));
    }
    split
}

/// Default schedule with a smaller model and word-count cutoff, sized for
/// fixtures of a few hundred sentences.
pub fn small_langid_config() -> LangIdConfig {
    LangIdConfig {
        buckets: 20_000,
        dim: 16,
        min_word_count: 2,
        ..LangIdConfig::default()
    }
}

/// Writes a mining fixture to `dir` as document JSONL files, a sentence
/// embedding file, a gold TSV and `pipeline.toml` writing to `out_dir`.
/// Each source document repeats one sentence so that dedup has work.
pub fn write_pipeline_fixture(dir: &Path, out_dir: &str, seed: u64, n_docs: usize) {
    let fx = synthetic_bitext(seed, n_docs, 32, 0.1, 0.2);
    let mut pairs = Vec::new();
    let mut docs_list = Vec::new();
    for dp in &fx.docs {
        for (doc, dup) in [(dp.src(), true), (dp.tgt(), false)] {
            let mut text = String::new();
            let mut sentences = doc.sentences.clone();
            if dup {
                sentences.push(sentences[0].clone());
            }
            for s in &sentences {
                let rec = serde_json::json!({"id": s.id, "text": s.text, "lang": doc.lang, "source_tag": "synthetic"});
                text.push_str(&rec.to_string());
                text.push('\n');
            }
            fs::write(dir.join(format!("{}.jsonl", doc.id)), text).unwrap();
            docs_list.push(format!("\"{}.jsonl\"", doc.id));
        }
        pairs.push(format!("[\"{}\", \"{}\"]", dp.src().id, dp.tgt().id));
    }
    let mut emb = Vec::new();
    fx.embeddings.write_to(&mut emb).unwrap();
    fs::write(dir.join("sentences.vec"), emb).unwrap();

    let text_of = |id: &str| {
        fx.docs
            .iter()
            .flat_map(|d| d.src().sentences.iter().chain(&d.tgt().sentences))
            .find(|s| s.id == id)
            .unwrap()
            .text
            .clone()
    };
    let mut truth: Vec<_> = fx.truth.iter().collect();
    truth.sort();
    let gold: String = truth
        .iter()
        .map(|(s, t)| format!("{}\t{}\n", text_of(s), text_of(t)))
        .collect();
    fs::write(dir.join("gold.tsv"), gold).unwrap();

    let config = format!(
        "version = 1\nseed = {seed}\noutput_dir = \"{out_dir}\"\nstages = [\"ingest\", \"dedup\", \"mine\", \"score\"]\n\n\
         [ingest]\ndocuments = [{}]\n\n\
         [mine]\nembeddings = \"sentences.vec\"\nsrc_lang = \"myv\"\ntgt_lang = \"ru\"\nthreshold = 0.3\npairs = [{}]\n\n\
         [score]\ngold = \"gold.tsv\"\n",
        docs_list.join(", "),
        pairs.join(", ")
    );
    fs::write(dir.join("pipeline.toml"), config).unwrap();
}
