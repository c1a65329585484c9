//! Picks, among candidate translations, the one with the most words the
//! language identifier assigns to the target language.

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Sentence;
use crate::langid::LangIdModel;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub source: Sentence,
    /// In beam order, best first.
    pub candidates: Vec<String>,
    pub target_lang: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Choice {
    pub index: usize,
    pub text: String,
    pub proportion: f64,
}

/// Index of the largest proportion; the earliest wins a tie.
pub fn argmax_first(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some(b) if values[b] >= v => {}
            _ => best = Some(i),
        }
    }
    best
}

pub fn rerank_candidates(set: &CandidateSet, model: &LangIdModel) -> Result<Choice> {
    select(&set.candidates, model, &set.target_lang)
}

/// Same as [`rerank_candidates`] without the source sentence.
pub fn select<S: AsRef<str>>(candidates: &[S], model: &LangIdModel, target_lang: &str) -> Result<Choice> {
    if candidates.is_empty() {
        return Err(Error::invalid("empty candidate list"));
    }
    let proportions = candidates
        .iter()
        .map(|c| model.word_language_proportion(c.as_ref(), target_lang))
        .collect::<Result<Vec<_>>>()?;
    let index = argmax_first(&proportions).expect("non-empty");
    Ok(Choice {
        index,
        text: candidates[index].as_ref().to_owned(),
        proportion: proportions[index],
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateRecord {
    pub source: String,
    pub candidates: Vec<String>,
    pub target_lang: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChosenRecord {
    pub source: String,
    pub candidates: Vec<String>,
    pub target_lang: String,
    pub chosen: usize,
    pub proportion: f64,
}

pub fn read_candidate_records<R: BufRead>(reader: R, origin: &str) -> Result<Vec<CandidateRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CandidateRecord =
            serde_json::from_str(&line).map_err(|e| Error::parse(origin, i + 1, e.to_string()))?;
        if rec.candidates.is_empty() {
            return Err(Error::parse(origin, i + 1, "empty candidate list"));
        }
        out.push(rec);
    }
    Ok(out)
}

/// Reranks every record in parallel; output order follows input order.
pub fn rerank_records(records: &[CandidateRecord], model: &LangIdModel) -> Result<Vec<ChosenRecord>> {
    records
        .par_iter()
        .map(|r| {
            let c = select(&r.candidates, model, &r.target_lang)?;
            Ok(ChosenRecord {
                source: r.source.clone(),
                candidates: r.candidates.clone(),
                target_lang: r.target_lang.clone(),
                chosen: c.index,
                proportion: c.proportion,
            })
        })
        .collect()
}

pub fn write_chosen_records<W: Write>(mut w: W, records: &[ChosenRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        writeln!(w).map_err(|e| Error::io("<output>", e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::langid::fixtures::hand_model;
    use proptest::prelude::*;

    fn set(cands: &[&str]) -> CandidateSet {
        CandidateSet {
            source: Sentence::new("s", "source", Some("ru"), "test"),
            candidates: cands.iter().map(|s| s.to_string()).collect(),
            target_lang: "myv".into(),
        }
    }

    #[test]
    fn singleton_always_chosen() {
        let c = rerank_candidates(&set(&["d e"]), &hand_model()).unwrap();
        assert_eq!((c.index, c.proportion), (0, 0.0));
    }

    #[test]
    fn tie_goes_to_earlier_candidate() {
        // proportions 0.2, 0.9, 0.9
        let low = "a d d d d";
        let high = "a a a a a a a a a d";
        let c = rerank_candidates(&set(&[low, high, high]), &hand_model()).unwrap();
        assert_eq!(c.index, 1);
        assert!((c.proportion - 0.9).abs() < 1e-12);
        let c = rerank_candidates(&set(&["d", "e", "d e"]), &hand_model()).unwrap();
        assert_eq!(c.index, 0);
    }

    #[test]
    fn errors() {
        assert!(rerank_candidates(&set(&[]), &hand_model()).is_err());
        let mut s = set(&["a"]);
        s.target_lang = "fi".into();
        assert!(matches!(rerank_candidates(&s, &hand_model()), Err(Error::UnknownLabel(_))));
    }

    #[test]
    fn records_round_trip() {
        let input = "{\"source\":\"x\",\"candidates\":[\"d\",\"a b\"],\"target_lang\":\"myv\"}\n\n";
        let recs = read_candidate_records(input.as_bytes(), "mem").unwrap();
        let out = rerank_records(&recs, &hand_model()).unwrap();
        let mut buf = Vec::new();
        write_chosen_records(&mut buf, &out).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v["chosen"], 1);
        assert_eq!(v["proportion"], 1.0);
        assert!(read_candidate_records("{\"source\":\"x\",\"candidates\":[],\"target_lang\":\"myv\"}".as_bytes(), "mem").is_err());
    }

    proptest! {
        #[test]
        fn chosen_dominates_and_follows_permutation(
            cands in proptest::collection::vec("[a-e]( [a-e]){0,5}", 1..6),
            rot in 0usize..6,
        ) {
            let m = hand_model();
            let refs: Vec<&str> = cands.iter().map(String::as_str).collect();
            let c = select(&refs, &m, "myv").unwrap();
            for x in &refs {
                prop_assert!(c.proportion >= m.word_language_proportion(x, "myv").unwrap());
            }
            let props: Vec<f64> = refs.iter().map(|x| m.word_language_proportion(x, "myv").unwrap()).collect();
            let unique = props.iter().filter(|&&p| p == c.proportion).count() == 1;
            let k = rot % refs.len();
            let mut rotated = refs.clone();
            rotated.rotate_left(k);
            let c2 = select(&rotated, &m, "myv").unwrap();
            prop_assert_eq!(c2.proportion, c.proportion);
            if unique {
                prop_assert_eq!(c2.index, (c.index + refs.len() - k) % refs.len());
            }
        }
    }
}
