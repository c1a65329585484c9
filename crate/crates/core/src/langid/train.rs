use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{dot, pool, LabeledText, LangIdConfig, LangIdModel};
use crate::{Error, Result};

/// Trains a classifier with plain SGD on softmax cross-entropy.
///
/// Labels are sorted, the word vocabulary holds every whitespace token seen
/// at least `min_word_count` times (sorted), feature rows start uniform in
/// `[-1/dim, 1/dim]` and output weights at zero. The learning rate decays
/// linearly from `lr0` to zero over all updates and each epoch visits the
/// data in a fresh seeded shuffle, so equal inputs give bitwise-equal models.
pub fn train(data: &[LabeledText], config: &LangIdConfig) -> Result<LangIdModel> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::invalid("no training data"));
    }
    let labels: Vec<String> = data
        .iter()
        .map(|d| d.label.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if labels.len() < 2 {
        return Err(Error::invalid("degenerate label set"));
    }
    let label_index: HashMap<String, usize> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.clone(), i))
        .collect();

    let mut counts: HashMap<&str, usize> = HashMap::new();
    for d in data {
        for tok in d.text.split_whitespace() {
            *counts.entry(tok).or_default() += 1;
        }
    }
    let mut vocab: Vec<String> = counts
        .into_iter()
        .filter(|&(_, c)| c >= config.min_word_count)
        .map(|(w, _)| w.to_owned())
        .collect();
    vocab.sort_unstable();

    let dim = config.dim;
    let rows = vocab.len() + config.buckets as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let bound = 1.0 / dim as f32;
    let embeddings: Vec<f32> = (0..rows * dim).map(|_| rng.gen_range(-bound..=bound)).collect();
    let output = vec![0.0f32; labels.len() * dim];
    let mut model = LangIdModel::from_parts(labels, vocab, config.clone(), embeddings, output)?;

    let examples: Vec<(Vec<u32>, usize)> = data
        .iter()
        .map(|d| (model.featurizer.features(&d.text), label_index[&d.label]))
        .collect();
    sgd(&mut model, &examples, &mut rng);
    Ok(model)
}

fn sgd(model: &mut LangIdModel, examples: &[(Vec<u32>, usize)], rng: &mut ChaCha8Rng) {
    let dim = model.config.dim;
    let n_labels = model.labels.len();
    let total = (model.config.epochs * examples.len()) as f64;
    let lr0 = model.config.lr0 as f64;

    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut hidden = vec![0.0f32; dim];
    let mut grad = vec![0.0f32; dim];
    let mut logits = vec![0.0f32; n_labels];
    let mut step = 0u64;

    for epoch in 0..model.config.epochs {
        order.shuffle(rng);
        for &i in &order {
            let lr = (lr0 * (1.0 - step as f64 / total)) as f32;
            step += 1;
            let (features, label) = &examples[i];
            if features.is_empty() {
                continue;
            }
            pool(&model.feature_embeddings, dim, features, &mut hidden);
            for (k, row) in model.output_weights.chunks_exact(dim).enumerate() {
                logits[k] = dot(row, &hidden);
            }
            let probs = super::softmax(&logits);

            grad.fill(0.0);
            for (k, row) in model.output_weights.chunks_exact_mut(dim).enumerate() {
                let target = if k == *label { 1.0 } else { 0.0 };
                let alpha = lr * (target - probs[k] as f32);
                for ((g, w), h) in grad.iter_mut().zip(row.iter_mut()).zip(&hidden) {
                    *g += alpha * *w;
                    *w += alpha * h;
                }
            }
            let scale = 1.0 / features.len() as f32;
            for &f in features {
                let row = &mut model.feature_embeddings[f as usize * dim..(f as usize + 1) * dim];
                for (e, g) in row.iter_mut().zip(&grad) {
                    *e += g * scale;
                }
            }
        }
        log::debug!("langid epoch {} done", epoch + 1);
    }
}
