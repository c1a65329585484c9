//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines are always printed.

mod common;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use bitext_core::corpus::{ParallelPair, Sentence};
use bitext_core::curriculum::{
    DataSources, IdentityTranslator, Scheduler, SyntheticSide, TrainingExample, Translator, LAMBDA_ST,
};
use bitext_core::embinit::{cooccurrence_counts, count_tokenize, init_embedding, AlignmentStats, EmbeddingMatrix};
use bitext_core::evalharness::{aggregate_annotations, AnnotationRecord};
use bitext_core::langid::{temperature_sample, train, LangIdModel};
use bitext_core::metrics::{corpus_bleu, corpus_chrf_pp};
use bitext_core::miner::{align_dp, mine_document_pair, MiningConfig, SimilarityMatrix};
use bitext_core::pipeline::{run_pipeline, PipelineConfig};
use bitext_core::subword::{apply_bpe, detokenize, learn_bpe, learn_bpe_with_counts};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within_time(start: Instant, limit: Duration) -> Result<(), String> {
    check(start.elapsed() < limit, format!("took {:?}, limit {limit:?}", start.elapsed()))
}

/// Best total over every strictly increasing matching, by enumerating all
/// equal-size row and column subsets.
fn exhaustive_optimum(s: &SimilarityMatrix) -> f64 {
    let subsets = |n: usize| -> Vec<Vec<usize>> {
        (0u32..1 << n)
            .map(|mask| (0..n).filter(|i| mask & (1 << i) != 0).collect())
            .collect()
    };
    let rows = subsets(s.rows());
    let cols = subsets(s.cols());
    let mut best = 0.0f64;
    for r in &rows {
        for c in cols.iter().filter(|c| c.len() == r.len()) {
            let total = r.iter().zip(c).fold(0.0, |acc, (&i, &j)| acc + s.get(i, j));
            best = best.max(total);
        }
    }
    best
}

fn dp_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..1000 {
        let (m, n) = (rng.gen_range(1..=6), rng.gen_range(1..=6));
        let values: Vec<f64> = (0..m * n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let s = SimilarityMatrix::new(m, n, values).unwrap();
        let (got, want) = (align_dp(&s).total, exhaustive_optimum(&s));
        check(got == want, format!("case {case} ({m}x{n}): dp {got} vs exhaustive {want}"))?;
    }
    within_time(start, Duration::from_secs(10))?;
    Ok(format!("1000/1000 exact in {:?}", start.elapsed()))
}

fn mining_precision() -> Outcome {
    let start = Instant::now();
    let dev = common::synthetic_bitext(7001, 50, 32, 0.1, 0.2);
    let mut scored = Vec::new();
    for d in &dev.docs {
        for p in mine_document_pair(d, &dev.embeddings, &MiningConfig::new(-10.0)).map_err(|e| e.to_string())? {
            scored.push((p.score().unwrap(), dev.truth.contains(&(p.src.id.clone(), p.tgt.id.clone()))));
        }
    }
    let threshold = common::best_f1_threshold(scored, dev.truth.len());

    let test = common::synthetic_bitext(9002, 200, 32, 0.1, 0.2);
    let cfg = MiningConfig::new(threshold);
    let (mut mined, mut correct) = (0usize, 0usize);
    for d in &test.docs {
        for p in mine_document_pair(d, &test.embeddings, &cfg).map_err(|e| e.to_string())? {
            mined += 1;
            correct += test.truth.contains(&(p.src.id.clone(), p.tgt.id.clone())) as usize;
        }
    }
    let precision = correct as f64 / mined.max(1) as f64;
    let recall = correct as f64 / test.truth.len() as f64;
    check(mined > 0, "nothing mined")?;
    check(precision >= 0.90, format!("precision {precision:.4} < 0.90"))?;
    within_time(start, Duration::from_secs(30))?;
    Ok(format!(
        "precision {precision:.4}, recall {recall:.4} at dev-tuned threshold {threshold:.4}, {:?}",
        start.elapsed()
    ))
}

fn bleu() -> Outcome {
    let same = corpus_bleu(&["кода вадря", "мон ули"], &["кода вадря", "мон ули"]).unwrap().score;
    check((same - 100.0).abs() <= 1e-9, format!("identical {same}"))?;
    let eight = corpus_bleu(&["a b c d e f g h"], &["a b c d x y z w"]).unwrap().score;
    check((eight - 34.57).abs() <= 0.01, format!("8-token example {eight}"))?;
    let zero = corpus_bleu(&["a b c x d e f"], &["a b c y d e f"]).unwrap().score;
    check(zero == 0.0, format!("no 4-gram match gave {zero}"))?;
    Ok(format!("identical {same}, 8-token {eight:.4}, zero-4-gram {zero}"))
}

fn chrf() -> Outcome {
    let same = corpus_chrf_pp(&["кода вадря"], &["кода вадря"]).unwrap().score;
    check((same - 100.0).abs() <= 1e-9, format!("identical {same}"))?;
    let empty = corpus_chrf_pp(&[""], &["кода вадря"]).unwrap().score;
    check(empty == 0.0, format!("empty hypothesis {empty}"))?;
    let cat = corpus_chrf_pp(&["cat sat"], &["cat sap"]).unwrap().score;
    check((cat - 50.625).abs() <= 1e-6, format!("cat sat / cat sap {cat}"))?;
    Ok(format!("identical {same}, empty {empty}, cat sat/cat sap {cat:.6}"))
}

fn same_bits(a: &LangIdModel, b: &LangIdModel) -> bool {
    let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    bits(a.feature_embeddings()) == bits(b.feature_embeddings())
        && bits(a.output_weights()) == bits(b.output_weights())
        && a.labels() == b.labels()
        && a.word_vocab() == b.word_vocab()
}

fn langid() -> Outcome {
    let cfg = common::small_langid_config();
    let acc = |m: &LangIdModel, data: &[bitext_core::langid::LabeledText]| {
        data.iter().filter(|d| m.predict_top1(&d.text) == d.label).count() as f64 / data.len() as f64
    };
    let disjoint = common::disjoint_languages(31, 300, 200);
    let m1 = train(&disjoint.train, &cfg).map_err(|e| e.to_string())?;
    let a1 = acc(&m1, &disjoint.test);
    check(a1 >= 0.99, format!("disjoint accuracy {a1:.4} < 0.99"))?;
    let overlap = common::overlapping_languages(32, 0.3, 300, 200);
    let m2 = train(&overlap.train, &cfg).map_err(|e| e.to_string())?;
    let a2 = acc(&m2, &overlap.test);
    check(a2 >= 0.90, format!("overlapping accuracy {a2:.4} < 0.90"))?;
    let again = train(&overlap.train, &cfg).map_err(|e| e.to_string())?;
    check(same_bits(&m2, &again), "two training runs differ")?;
    Ok(format!("disjoint {a1:.4}, overlapping {a2:.4}, retrain bitwise identical"))
}

fn temperature() -> Outcome {
    let sizes: BTreeMap<String, u64> = [("large".to_string(), 100_000), ("small".to_string(), 32)].into();
    let counts = temperature_sample(&sizes, 1.0 / 5.0, 100_000, 77).map_err(|e| e.to_string())?;
    let p_large = counts["large"] as f64 / 100_000.0;
    let p_small = counts["small"] as f64 / 100_000.0;
    check((p_large - 10.0 / 12.0).abs() <= 0.02, format!("large {p_large}"))?;
    check((p_small - 2.0 / 12.0).abs() <= 0.02, format!("small {p_small}"))?;
    Ok(format!("large {p_large:.4} (want {:.4}), small {p_small:.4} (want {:.4})", 10.0 / 12.0, 2.0 / 12.0))
}

fn pair(src: &str, tgt: &str) -> ParallelPair {
    ParallelPair::gold(Sentence::new("s", src, Some("ru"), "fx"), Sentence::new("t", tgt, Some("myv"), "fx"))
}

fn embedding_init() -> Outcome {
    // exclusive co-occurrence
    let pairs = vec![pair("кот спит", "kati udi"), pair("кот", "kati"), pair("дом", "kudo"), pair("дом спит", "kudo udi")];
    let stats = cooccurrence_counts(&pairs, count_tokenize, count_tokenize);
    let emb = EmbeddingMatrix::from_rows(3, [
        ("кот".to_string(), vec![0.25, -1.5, 3.0]),
        ("спит".to_string(), vec![1.0, 1.0, 1.0]),
        ("дом".to_string(), vec![-2.0, 0.0, 0.5]),
    ])
    .unwrap();
    // kati co-occurs with спит once (weight 1/(2*2) = 0.25); a cutoff of 0.5 keeps only кот
    let v = init_embedding("kati", &stats, &emb, 0.5).map_err(|e| e.to_string())?;
    check(v == emb.get("кот").unwrap(), format!("exclusive token got {v:?}"))?;

    let counted = AlignmentStats::from_counts(
        [("i".to_string(), 4)].into(),
        [("j".to_string(), 8)].into(),
        [(("i".to_string(), "j".to_string()), 4)].into(),
    )
    .unwrap();
    let w = counted.alignment_weight("i", "j").unwrap();
    check(w == 0.5, format!("alignment_weight(4,4,8) = {w}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let src_vocab: Vec<String> = (0..12).map(|i| format!("s{i}")).collect();
    let tgt_vocab: Vec<String> = (0..8).map(|i| format!("t{i}")).collect();
    for case in 0..1000 {
        let n_pairs = rng.gen_range(1..12);
        let pairs: Vec<ParallelPair> = (0..n_pairs)
            .map(|_| {
                let pick = |v: &[String], rng: &mut ChaCha8Rng| {
                    let k = rng.gen_range(1..4);
                    (0..k).map(|_| v.choose(rng).unwrap().clone()).collect::<Vec<_>>().join(" ")
                };
                let s = pick(&src_vocab, &mut rng);
                let t = pick(&tgt_vocab, &mut rng);
                pair(&s, &t)
            })
            .collect();
        let stats = cooccurrence_counts(&pairs, count_tokenize, count_tokenize);
        let dim = 4;
        let emb = EmbeddingMatrix::from_rows(
            dim,
            src_vocab.iter().map(|t| (t.clone(), (0..dim).map(|_| rng.gen_range(-5.0f32..5.0)).collect())),
        )
        .unwrap();
        let min_weight = rng.gen_range(0.0..0.6);
        let target = tgt_vocab.choose(&mut rng).unwrap();
        let v = init_embedding(target, &stats, &emb, min_weight).map_err(|e| e.to_string())?;
        // supports recomputed from presence counts
        let has = |text: &str, tok: &str| text.split_whitespace().any(|w| w == tok);
        let n_t = pairs.iter().filter(|p| has(&p.tgt.text, target)).count() as f64;
        let mut support: Vec<&[f32]> = src_vocab
            .iter()
            .filter(|s| {
                let n_s = pairs.iter().filter(|p| has(&p.src.text, s)).count() as f64;
                let n_j = pairs.iter().filter(|p| has(&p.src.text, s) && has(&p.tgt.text, target)).count() as f64;
                n_s > 0.0 && n_t > 0.0 && n_j > 0.0 && n_j * n_j / (n_s * n_t) >= min_weight
            })
            .map(|s| emb.get(s).unwrap())
            .collect();
        if support.is_empty() {
            support = emb.rows().map(|(_, r)| r).collect();
        }
        for k in 0..dim {
            let lo = support.iter().map(|r| r[k]).fold(f32::INFINITY, f32::min);
            let hi = support.iter().map(|r| r[k]).fold(f32::NEG_INFINITY, f32::max);
            check(lo <= v[k] && v[k] <= hi, format!("case {case}: component {k} = {} outside [{lo}, {hi}]", v[k]))?;
        }
    }
    Ok("exclusive token exact, weight(4,4,8) = 0.5, convex hull 1000/1000".into())
}

fn bpe() -> Outcome {
    let corpus = ["aaab", "aaab", "aaab"];
    let first = learn_bpe_with_counts(&corpus, 3, None).map_err(|e| e.to_string())?;
    let f = first.first().ok_or("no merges learned")?;
    check((f.rule.left.as_str(), f.rule.right.as_str(), f.count) == ("a", "a", 6), format!("first merge {:?}", f))?;

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let alphabet: Vec<char> = "абвгдеёжзaeiou".chars().collect();
    let mut sentences: Vec<String> = (0..300)
        .map(|_| {
            (0..rng.gen_range(1..8))
                .map(|_| (0..rng.gen_range(1..9)).map(|_| *alphabet.choose(&mut rng).unwrap()).collect::<String>())
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect();
    let merges = learn_bpe(&sentences, 2, None).map_err(|e| e.to_string())?;
    check(!merges.is_empty(), "no merges on random corpus")?;
    let words: HashSet<String> = sentences.iter().flat_map(|s| s.split_whitespace().map(str::to_owned)).collect();
    for w in &words {
        let back = detokenize(&apply_bpe(&merges, w));
        check(back == *w, format!("`{w}` reconstructed as `{back}`"))?;
    }
    check(learn_bpe(&sentences, 2, None).unwrap() == merges, "second run differs")?;
    sentences.shuffle(&mut rng);
    check(learn_bpe(&sentences, 2, None).unwrap() == merges, "corpus order changes merges")?;
    Ok(format!("first merge (a,a) x6, {} words round-trip, {} merges stable", words.len(), merges.len()))
}

/// Prefixes output with the target language so synthetic text is visible.
struct Marking;

impl Translator for Marking {
    fn translate(&self, text: &str, _: &str, tgt: &str) -> bitext_core::Result<String> {
        Ok(format!("<{tgt}> {text}"))
    }

    fn translate_diverse(&self, text: &str, s: &str, t: &str, n: usize) -> bitext_core::Result<Vec<String>> {
        (0..n).map(|i| self.translate(&format!("{text} {i}"), s, t)).collect()
    }
}

fn curriculum_sources() -> DataSources {
    let s = |id: &str, t: &str, l: &str| Sentence::new(id, t, Some(l), "fx");
    let mut ru_mul = BTreeMap::new();
    ru_mul.insert("fi".to_string(), (0..7).map(|i| ParallelPair::gold(s("r", &format!("ру {i}"), "ru"), s("f", &format!("fi {i}"), "fi"))).collect());
    ru_mul.insert("et".to_string(), (0..5).map(|i| ParallelPair::gold(s("r", &format!("ру э{i}"), "ru"), s("e", &format!("et {i}"), "et"))).collect());
    DataSources {
        parallel_myv_ru: (0..9).map(|i| ParallelPair::gold(s("m", &format!("эрз {i}"), "myv"), s("r", &format!("рус {i}"), "ru"))).collect(),
        parallel_ru_mul: ru_mul,
        mono_myv: (0..11).map(|i| s("m", &format!("моно {i}"), "myv")).collect(),
    }
}

fn stream(seed: u64, calls: usize, translator: &dyn Translator) -> Result<Vec<TrainingExample>, String> {
    let sources = curriculum_sources();
    let mut sched = Scheduler::new(seed);
    let mut out = Vec::new();
    for _ in 0..calls {
        out.extend(sched.next_batch(&sources, translator, None).map_err(|e| e.to_string())?);
    }
    Ok(out)
}

fn to_jsonl(examples: &[TrainingExample]) -> Vec<u8> {
    let mut buf = Vec::new();
    for e in examples {
        serde_json::to_writer(&mut buf, e).unwrap();
        buf.push(b'\n');
    }
    buf
}

fn curriculum() -> Outcome {
    let examples = stream(12, 400, &Marking)?;
    let mut hist: BTreeMap<u8, usize> = BTreeMap::new();
    for chunk in examples.chunks(4) {
        check(chunk.iter().all(|e| e.step == chunk[0].step), "mixed steps in one batch")?;
        *hist.entry(chunk[0].step).or_default() += 1;
    }
    let want: BTreeMap<u8, usize> = [(1, 100), (2, 100), (3, 100), (4, 100)].into();
    check(hist == want, format!("step histogram {hist:?}"))?;
    let (mut self_training, mut back_translation) = (0, 0);
    for e in &examples {
        let synth_src = e.src_text.starts_with('<');
        let synth_tgt = e.tgt_text.starts_with('<');
        check(!(synth_src && synth_tgt), format!("both sides synthetic: {e:?}"))?;
        if synth_tgt {
            self_training += 1;
            check(e.loss_weight == LAMBDA_ST && e.synthetic_side == SyntheticSide::Target, format!("self-training {e:?}"))?;
        } else {
            if synth_src {
                back_translation += 1;
            }
            check(e.loss_weight == 1.0, format!("weight {} on {e:?}", e.loss_weight))?;
        }
    }
    check(LAMBDA_ST == 0.05, "self-training weight")?;
    let a = to_jsonl(&stream(99, 400, &IdentityTranslator)?);
    let b = to_jsonl(&stream(99, 400, &IdentityTranslator)?);
    check(a == b, "identity replay differs")?;
    Ok(format!(
        "histogram {{1:100, 2:100, 3:100, 4:100}}, {self_training} self-training at 0.05, {back_translation} back-translation at 1.0, replay identical ({} bytes)",
        a.len()
    ))
}

fn annotations() -> Outcome {
    let rec = |p: &str, a: &str, s: u8| AnnotationRecord { pair_id: p.into(), annotator_id: a.into(), score: s };
    let records = [rec("p1", "a", 2), rec("p1", "b", 5), rec("p1", "c", 5), rec("p2", "a", 3), rec("p2", "b", 3), rec("p2", "c", 4)];
    let s = aggregate_annotations(&records, 3).map_err(|e| e.to_string())?;
    check(s.mean_pessimistic == 2.5, format!("mean {}", s.mean_pessimistic))?;
    check(s.acceptance_rate == 0.5, format!("acceptance {}", s.acceptance_rate))?;
    Ok(format!("mean {}, acceptance {}", s.mean_pessimistic, s.acceptance_rate))
}

fn end_to_end() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut files: Vec<HashMap<String, Vec<u8>>> = Vec::new();
    for out in ["first", "second"] {
        common::write_pipeline_fixture(dir.path(), out, 4242, 100);
        let cfg = PipelineConfig::load(&dir.path().join("pipeline.toml")).map_err(|e| e.to_string())?;
        run_pipeline(&cfg).map_err(|e| e.to_string())?;
        let mut run = HashMap::new();
        for entry in fs::read_dir(dir.path().join(out)).unwrap() {
            let entry = entry.unwrap();
            run.insert(entry.file_name().to_string_lossy().into_owned(), fs::read(entry.path()).unwrap());
        }
        files.push(run);
    }
    check(files[0].len() == 5, format!("expected 5 output files, got {}", files[0].len()))?;
    check(files[0] == files[1], "runs differ")?;
    within_time(start, Duration::from_secs(60))?;
    let manifest: serde_json::Value = serde_json::from_slice(&files[0]["manifest.json"]).unwrap();
    let precision = manifest["stages"][3]["counts"]["precision"].as_f64().unwrap_or(0.0);
    Ok(format!(
        "ingest, dedup, mine, score twice: {} files byte-identical, mined precision {precision:.4}, {:?}",
        files[0].len(),
        start.elapsed()
    ))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("dp-alignment-oracle", dp_oracle),
        ("mining-precision", mining_precision),
        ("bleu", bleu),
        ("chrf++", chrf),
        ("langid", langid),
        ("temperature-sampling", temperature),
        ("embedding-init", embedding_init),
        ("bpe", bpe),
        ("curriculum", curriculum),
        ("annotation-aggregation", annotations),
        ("end-to-end-pipeline", end_to_end),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
