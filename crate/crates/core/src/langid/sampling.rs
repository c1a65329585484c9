use std::collections::BTreeMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::LabeledText;
use crate::{Error, Result};

/// `p(lang) = n_lang^exponent / sum_l n_l^exponent`.
pub fn temperature_probabilities(
    corpus_sizes: &BTreeMap<String, u64>,
    exponent: f64,
) -> Result<BTreeMap<String, f64>> {
    if corpus_sizes.is_empty() {
        return Err(Error::invalid("no languages"));
    }
    if !exponent.is_finite() || exponent < 0.0 {
        return Err(Error::invalid(format!("bad sampling exponent {exponent}")));
    }
    if let Some((lang, _)) = corpus_sizes.iter().find(|(_, &n)| n == 0) {
        return Err(Error::invalid(format!("language `{lang}` has an empty corpus")));
    }
    let weights: Vec<f64> = corpus_sizes.values().map(|&n| (n as f64).powf(exponent)).collect();
    let z: f64 = weights.iter().sum();
    Ok(corpus_sizes
        .keys()
        .cloned()
        .zip(weights.into_iter().map(|w| w / z))
        .collect())
}

/// Multinomial draw of `total` samples over languages with temperature
/// probabilities. Every language appears in the result, possibly with 0.
pub fn temperature_sample(
    corpus_sizes: &BTreeMap<String, u64>,
    exponent: f64,
    total: u64,
    seed: u64,
) -> Result<BTreeMap<String, u64>> {
    let probs = temperature_probabilities(corpus_sizes, exponent)?;
    if total == 0 {
        return Err(Error::invalid("sample total must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    draw_counts(&probs, total, &mut rng)
}

fn draw_counts(
    probs: &BTreeMap<String, f64>,
    total: u64,
    rng: &mut impl Rng,
) -> Result<BTreeMap<String, u64>> {
    let dist = WeightedIndex::new(probs.values()).map_err(|e| Error::invalid(e.to_string()))?;
    let mut counts = vec![0u64; probs.len()];
    for _ in 0..total {
        counts[dist.sample(rng)] += 1;
    }
    Ok(probs.keys().cloned().zip(counts).collect())
}

/// Builds a labeled training set: per-language counts come from
/// [`temperature_sample`] over pool sizes, then texts are drawn uniformly
/// with replacement from each pool.
pub fn build_training_set(
    pools: &BTreeMap<String, Vec<String>>,
    exponent: f64,
    total: u64,
    seed: u64,
) -> Result<Vec<LabeledText>> {
    let sizes: BTreeMap<String, u64> = pools.iter().map(|(l, p)| (l.clone(), p.len() as u64)).collect();
    let probs = temperature_probabilities(&sizes, exponent)?;
    if total == 0 {
        return Err(Error::invalid("sample total must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let counts = draw_counts(&probs, total, &mut rng)?;
    let mut out = Vec::with_capacity(total as usize);
    for (lang, &n) in &counts {
        let pool = &pools[lang];
        for _ in 0..n {
            out.push(LabeledText::new(pool[rng.gen_range(0..pool.len())].clone(), lang.clone()));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sizes(v: &[(&str, u64)]) -> BTreeMap<String, u64> {
        v.iter().map(|(l, n)| (l.to_string(), *n)).collect()
    }

    #[test]
    fn fifth_root_example() {
        // 100000^0.2 = 10, 32^0.2 = 2
        let p = temperature_probabilities(&sizes(&[("A", 100_000), ("B", 32)]), 0.2).unwrap();
        assert!((p["A"] - 10.0 / 12.0).abs() < 1e-12);
        assert!((p["B"] - 2.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_and_uniform_cases() {
        let p = temperature_probabilities(&sizes(&[("A", 7), ("B", 7)]), 0.2).unwrap();
        assert_eq!(p["A"], 0.5);
        let p = temperature_probabilities(&sizes(&[("A", 1), ("B", 1000), ("C", 5)]), 0.0).unwrap();
        assert!(p.values().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn errors() {
        assert!(temperature_sample(&BTreeMap::new(), 0.2, 10, 0)
            .unwrap_err()
            .to_string()
            .contains("no languages"));
        assert!(temperature_sample(&sizes(&[("A", 0)]), 0.2, 10, 0).is_err());
        assert!(temperature_sample(&sizes(&[("A", 3)]), 0.2, 0, 0).is_err());
    }

    #[test]
    fn counts_sum_to_total_and_are_seeded() {
        let s = sizes(&[("A", 50), ("B", 3), ("C", 900)]);
        let a = temperature_sample(&s, 0.2, 1234, 5).unwrap();
        assert_eq!(a.values().sum::<u64>(), 1234);
        assert_eq!(a, temperature_sample(&s, 0.2, 1234, 5).unwrap());
    }

    #[test]
    fn exponent_one_reproduces_size_proportions() {
        let s = sizes(&[("A", 600), ("B", 300), ("C", 100)]);
        let counts = temperature_sample(&s, 1.0, 100_000, 11).unwrap();
        for (lang, want) in [("A", 0.6), ("B", 0.3), ("C", 0.1)] {
            let got = counts[lang] as f64 / 100_000.0;
            assert!((got - want).abs() < 0.02, "{lang}: {got}");
        }
    }

    #[test]
    fn training_set_draws_from_pools() {
        let mut pools = BTreeMap::new();
        pools.insert("a".to_string(), vec!["x1".to_string(), "x2".to_string()]);
        pools.insert("b".to_string(), vec!["y".to_string()]);
        let set = build_training_set(&pools, 0.2, 50, 1).unwrap();
        assert_eq!(set.len(), 50);
        assert!(set.iter().all(|t| pools[&t.label].contains(&t.text)));
    }
}
