//! Distributed bag-of-words paragraph vectors trained with negative sampling.
//!
//! Each document vector `d` is trained to predict the tokens of its document:
//! for a target token `t` and negatives `n` drawn from the unigram
//! distribution raised to the 3/4 power, SGD ascends
//! `ln σ(d·w_t) + Σ_n ln σ(−d·w_n)` where `w` are output token vectors.

use rand::seq::index;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use rayon::prelude::*;

use super::{DocumentCorpus, TextFeatureSet};
use crate::error::{invalid, Error, Result};
use crate::hogwild::AtomicMatrix;
use crate::matrix::{dot, ln_sigmoid, sigmoid, Matrix};
use crate::rng::{self, EngineRng};

const NOISE_POWER: f64 = 0.75;

#[derive(Clone, Debug, PartialEq)]
pub struct Doc2VecConfig {
    pub dim: usize,
    pub epochs: usize,
    pub negative_samples: usize,
    /// Starting step size, decayed linearly to `min_learning_rate`.
    pub learning_rate: f64,
    pub min_learning_rate: f64,
    /// Cap on target tokens sampled per document per epoch.
    pub max_targets_per_doc: Option<usize>,
    pub seed: u64,
    /// Lock-free parallel updates over documents. Waives determinism.
    pub parallel: bool,
}

impl Default for Doc2VecConfig {
    fn default() -> Self {
        Self {
            dim: 16,
            epochs: 20,
            negative_samples: 5,
            learning_rate: 0.025,
            min_learning_rate: 0.0001,
            max_targets_per_doc: Some(10_000),
            seed: 0,
            parallel: false,
        }
    }
}

impl Doc2VecConfig {
    fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(invalid("embedding dimension must be at least 1"));
        }
        if self.epochs == 0 {
            return Err(invalid("epochs must be at least 1"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid(format!("learning rate must be finite and ≥ 0, got {}", self.learning_rate)));
        }
        if !(self.min_learning_rate >= 0.0 && self.min_learning_rate <= self.learning_rate) {
            return Err(invalid("min learning rate must lie in [0, learning rate]"));
        }
        if self.max_targets_per_doc == Some(0) {
            return Err(invalid("max targets per document must be at least 1"));
        }
        Ok(())
    }
}

/// Epoch-by-epoch trainer. [`train_doc_vectors`] drives it to completion.
pub struct Doc2VecTrainer<'a> {
    corpus: &'a DocumentCorpus,
    config: Doc2VecConfig,
    docs: Matrix,
    words: Matrix,
    noise: WeightedAliasIndex<f64>,
    noise_probs: Vec<f64>,
    epoch: usize,
}

impl<'a> Doc2VecTrainer<'a> {
    pub fn new(corpus: &'a DocumentCorpus, config: Doc2VecConfig) -> Result<Self> {
        config.validate()?;
        if corpus.vocab().is_empty() {
            return Err(Error::Empty("vocabulary is empty".into()));
        }
        let weights: Vec<f64> = corpus.vocab().counts().iter().map(|&c| (c as f64).powf(NOISE_POWER)).collect();
        let total: f64 = weights.iter().sum();
        let noise_probs = weights.iter().map(|w| w / total).collect();
        let noise = WeightedAliasIndex::new(weights).map_err(|e| invalid(format!("noise distribution: {e}")))?;

        let dim = config.dim;
        let bound = 0.5 / dim as f64;
        let mut init = rng::seeded(config.seed);
        let docs = Matrix::uniform(corpus.len(), dim, -bound, bound, &mut init);
        let words = Matrix::zeros(corpus.vocab().len(), dim);
        Ok(Self { corpus, config, docs, words, noise, noise_probs, epoch: 0 })
    }

    pub fn epochs_done(&self) -> usize {
        self.epoch
    }

    pub fn doc_vectors(&self) -> &Matrix {
        &self.docs
    }

    pub fn word_vectors(&self) -> &Matrix {
        &self.words
    }

    fn learning_rate_at(&self, progress: f64) -> f64 {
        let c = &self.config;
        (c.learning_rate - (c.learning_rate - c.min_learning_rate) * progress).max(c.min_learning_rate)
    }

    /// Targets for document `d` this epoch, drawn from the document's own stream.
    fn targets(&self, d: usize, g: &mut EngineRng) -> Vec<u32> {
        let doc = self.corpus.doc(d);
        match self.config.max_targets_per_doc {
            Some(cap) if doc.len() > cap => {
                let mut picks = index::sample(g, doc.len(), cap).into_vec();
                picks.sort_unstable();
                picks.into_iter().map(|k| doc[k]).collect()
            }
            _ => doc.to_vec(),
        }
    }

    /// Runs one pass over every document.
    pub fn epoch(&mut self) -> Result<()> {
        let n_docs = self.corpus.len();
        let epoch = self.epoch;
        let total = (self.config.epochs * n_docs).max(1) as f64;
        let mut order: Vec<usize> = (0..n_docs).collect();
        {
            use rand::seq::SliceRandom;
            order.shuffle(&mut rng::substream(self.config.seed, rng::stream_id(1, epoch as u64)));
        }

        if self.config.parallel {
            let docs = AtomicMatrix::from_matrix(&self.docs);
            let words = AtomicMatrix::from_matrix(&self.words);
            let dim = self.config.dim;
            order.par_iter().enumerate().for_each(|(pos, &d)| {
                let mut g = self.doc_stream(epoch, d);
                let lr = self.learning_rate_at((epoch * n_docs + pos) as f64 / total);
                let targets = self.targets(d, &mut g);
                let mut dv = vec![0.0; dim];
                let mut wv = vec![0.0; dim];
                let mut grad = vec![0.0; dim];
                docs.load_row(d, &mut dv);
                for &t in &targets {
                    grad.iter_mut().for_each(|x| *x = 0.0);
                    for (w, label) in self.pair_outputs(t, &mut g) {
                        words.load_row(w, &mut wv);
                        update_output(&dv, &mut wv, &mut grad, label, lr);
                        words.store_row(w, &wv);
                    }
                    dv.iter_mut().zip(&grad).for_each(|(x, g)| *x += g);
                }
                docs.store_row(d, &dv);
            });
            self.docs = docs.into_matrix();
            self.words = words.into_matrix();
        } else {
            let dim = self.config.dim;
            let mut grad = vec![0.0; dim];
            for (pos, &d) in order.iter().enumerate() {
                let mut g = self.doc_stream(epoch, d);
                let lr = self.learning_rate_at((epoch * n_docs + pos) as f64 / total);
                let targets = self.targets(d, &mut g);
                for &t in &targets {
                    grad.iter_mut().for_each(|x| *x = 0.0);
                    let outputs = self.pair_outputs(t, &mut g);
                    let dv = self.docs.row(d).to_vec();
                    for (w, label) in outputs {
                        update_output(&dv, self.words.row_mut(w), &mut grad, label, lr);
                    }
                    self.docs.row_mut(d).iter_mut().zip(&grad).for_each(|(x, g)| *x += g);
                }
            }
        }

        self.epoch += 1;
        if !self.docs.is_finite() {
            return Err(Error::NonFinite { block: "document vectors".into(), epoch: self.epoch });
        }
        if !self.words.is_finite() {
            return Err(Error::NonFinite { block: "token vectors".into(), epoch: self.epoch });
        }
        Ok(())
    }

    fn doc_stream(&self, epoch: usize, doc: usize) -> EngineRng {
        rng::substream(self.config.seed, rng::stream_id(2 + epoch as u64, doc as u64))
    }

    /// The target with label 1 followed by the sampled negatives with label 0.
    fn pair_outputs(&self, target: u32, g: &mut EngineRng) -> Vec<(usize, f64)> {
        let mut out = Vec::with_capacity(1 + self.config.negative_samples);
        out.push((target as usize, 1.0));
        for _ in 0..self.config.negative_samples {
            out.push((self.noise.sample(g), 0.0));
        }
        out
    }

    /// Expected negative-sampling loss over every (document, token) pair:
    /// `Σ −ln σ(d·w_t) − K Σ_w P(w) ln σ(−d·w)` with `P` the noise distribution.
    pub fn loss(&self) -> f64 {
        let k = self.config.negative_samples as f64;
        let mut total = 0.0;
        for d in 0..self.corpus.len() {
            let doc = self.corpus.doc(d);
            if doc.is_empty() {
                continue;
            }
            let dv = self.docs.row(d);
            for &t in doc {
                total -= ln_sigmoid(dot(dv, self.words.row(t as usize)));
            }
            let noise: f64 =
                self.noise_probs.iter().enumerate().map(|(w, p)| p * ln_sigmoid(-dot(dv, self.words.row(w)))).sum();
            total -= k * doc.len() as f64 * noise;
        }
        total
    }

    pub fn into_features(self) -> Result<TextFeatureSet> {
        let n_items = self.corpus.n_items();
        let dim = self.config.dim;
        let data = self.docs.into_vec();
        let (items, users) = data.split_at(n_items * dim);
        TextFeatureSet::new(
            self.corpus.item_names.clone(),
            self.corpus.user_names.clone(),
            Matrix::from_vec(n_items, dim, items.to_vec()),
            Matrix::from_vec(self.corpus.n_users(), dim, users.to_vec()),
        )
    }
}

/// Scalar factor of the log-likelihood gradient for one (document, token)
/// pair: with `label = 1` the term is `ln σ(d·w)`, with `label = 0` it is
/// `ln σ(−d·w)`, and its gradient is this factor times `w` with respect to `d`
/// and times `d` with respect to `w`.
#[inline]
pub fn pair_gradient_scale(doc: &[f64], word: &[f64], label: f64) -> f64 {
    label - sigmoid(dot(doc, word))
}

/// One logistic step on a (document, output token) pair. Accumulates the
/// document gradient in `grad` and updates the output vector in place.
#[inline]
fn update_output(doc: &[f64], word: &mut [f64], grad: &mut [f64], label: f64, lr: f64) {
    let g = lr * pair_gradient_scale(doc, word, label);
    for k in 0..doc.len() {
        grad[k] += g * word[k];
        word[k] += g * doc[k];
    }
}

/// Trains document vectors for every item and user document in `corpus`.
pub fn train_doc_vectors(corpus: &DocumentCorpus, config: &Doc2VecConfig) -> Result<TextFeatureSet> {
    let mut trainer = Doc2VecTrainer::new(corpus, config.clone())?;
    for _ in 0..config.epochs {
        trainer.epoch()?;
        log::debug!("doc2vec epoch {} loss {:.6}", trainer.epochs_done(), trainer.loss());
    }
    trainer.into_features()
}
