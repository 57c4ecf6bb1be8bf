//! Word2vec with negative sampling, skip-gram and CBOW modes.
//!
//! For a center vector `v`, a positive output vector `u_o` and negatives
//! `u_n`, each update ascends
//!
//! ```text
//! log σ(v·u_o) + Σ_n log σ(−v·u_n)
//! ```
//!
//! Negatives come from the unigram distribution raised to 3/4. The learning
//! rate decays linearly over all training tokens to 1e-4 of its initial
//! value. Training is single-threaded and bit-reproducible for a fixed seed.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::sentences::SentenceCorpus;
use super::table::EmbeddingTable;
use crate::error::{Error, Result};
use crate::graph::Interner;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Mode {
    SkipGram,
    Cbow,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub mode: Mode,
    pub dim: usize,
    /// Context words on each side of the center.
    pub window: usize,
    pub negatives: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub min_count: u64,
    /// Frequent-token subsampling threshold; `None` disables it.
    pub subsample: Option<f64>,
    pub rng_seed: u64,
}

impl TrainConfig {
    pub fn skip_gram() -> Self {
        TrainConfig {
            mode: Mode::SkipGram,
            dim: 50,
            window: 5,
            negatives: 5,
            learning_rate: 0.025,
            epochs: 5,
            min_count: 5,
            subsample: None,
            rng_seed: 1,
        }
    }

    pub fn cbow() -> Self {
        TrainConfig {
            mode: Mode::Cbow,
            window: 6,
            ..Self::skip_gram()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::config("embedding dimension must be positive"));
        }
        if self.window == 0 || self.negatives == 0 || self.epochs == 0 {
            return Err(Error::config("window, negatives and epochs must all be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning rate must be positive"));
        }
        if let Some(t) = self.subsample {
            if !(t > 0.0) {
                return Err(Error::config("subsample threshold must be positive"));
            }
        }
        Ok(())
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::skip_gram()
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Value of the negative-sampling objective for one (center, context) pair.
pub fn sgns_objective(center: &[f64], positive: &[f64], negatives: &[&[f64]]) -> f64 {
    let pos = sigmoid(dot(center, positive)).ln();
    let neg: f64 = negatives.iter().map(|u| sigmoid(-dot(center, u)).ln()).sum();
    pos + neg
}

/// Gradient of [`sgns_objective`] with respect to each argument.
#[derive(Clone, Debug, PartialEq)]
pub struct SgnsGradient {
    pub center: Vec<f64>,
    pub positive: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

pub fn sgns_gradient(center: &[f64], positive: &[f64], negatives: &[&[f64]]) -> SgnsGradient {
    let gp = 1.0 - sigmoid(dot(center, positive));
    let mut g_center: Vec<f64> = positive.iter().map(|u| gp * u).collect();
    let g_positive = center.iter().map(|v| gp * v).collect();
    let mut g_negatives = Vec::with_capacity(negatives.len());
    for u in negatives {
        let gn = -sigmoid(dot(center, u));
        for (g, &x) in g_center.iter_mut().zip(*u) {
            *g += gn * x;
        }
        g_negatives.push(center.iter().map(|v| gn * v).collect());
    }
    SgnsGradient {
        center: g_center,
        positive: g_positive,
        negatives: g_negatives,
    }
}

/// Input and output weight matrices over a fixed vocabulary.
#[derive(Clone, Debug, PartialEq)]
pub struct Word2Vec {
    dim: usize,
    input: Vec<f64>,
    output: Vec<f64>,
    hidden: Vec<f64>,
    hidden_grad: Vec<f64>,
}

impl Word2Vec {
    /// word2vec's initialization: input rows uniform in ±0.5/dim, output zero.
    pub fn init(vocab: usize, dim: usize, rng: &mut impl Rng) -> Self {
        let input = (0..vocab * dim)
            .map(|_| (rng.random::<f64>() - 0.5) / dim as f64)
            .collect();
        Self::from_parts(dim, input, vec![0.0; vocab * dim])
    }

    pub fn from_parts(dim: usize, input: Vec<f64>, output: Vec<f64>) -> Self {
        assert_eq!(input.len(), output.len());
        assert_eq!(input.len() % dim, 0);
        Word2Vec {
            dim,
            input,
            output,
            hidden: vec![0.0; dim],
            hidden_grad: vec![0.0; dim],
        }
    }

    pub fn input(&self, w: usize) -> &[f64] {
        &self.input[w * self.dim..(w + 1) * self.dim]
    }

    pub fn output(&self, w: usize) -> &[f64] {
        &self.output[w * self.dim..(w + 1) * self.dim]
    }

    pub fn into_input(self) -> Vec<f64> {
        self.input
    }

    /// Predicts `target` from the current hidden vector and accumulates the
    /// hidden gradient. Negatives equal to `target` are skipped.
    fn score_targets(&mut self, target: usize, negatives: &[usize], lr: f64) {
        let d = self.dim;
        self.hidden_grad.fill(0.0);
        let labelled = std::iter::once((target, 1.0)).chain(
            negatives.iter().filter(|&&n| n != target).map(|&n| (n, 0.0)),
        );
        for (w, label) in labelled {
            let out = &mut self.output[w * d..(w + 1) * d];
            let g = (label - sigmoid(dot(&self.hidden, out))) * lr;
            for ((e, o), &h) in self.hidden_grad.iter_mut().zip(out.iter_mut()).zip(&self.hidden) {
                *e += g * *o;
                *o += g * h;
            }
        }
    }

    /// One skip-gram update for the pair (center, context).
    pub fn train_pair(&mut self, center: usize, context: usize, negatives: &[usize], lr: f64) {
        let d = self.dim;
        self.hidden.copy_from_slice(&self.input[center * d..(center + 1) * d]);
        self.score_targets(context, negatives, lr);
        for (x, &e) in self.input[center * d..(center + 1) * d].iter_mut().zip(&self.hidden_grad) {
            *x += e;
        }
    }

    /// One CBOW update: predict `center` from the mean of `context` inputs.
    /// Every context input receives the full hidden gradient.
    pub fn train_cbow(&mut self, center: usize, context: &[usize], negatives: &[usize], lr: f64) {
        if context.is_empty() {
            return;
        }
        let d = self.dim;
        self.hidden.fill(0.0);
        for &c in context {
            for (h, &x) in self.hidden.iter_mut().zip(&self.input[c * d..(c + 1) * d]) {
                *h += x;
            }
        }
        let n = context.len() as f64;
        for h in &mut self.hidden {
            *h /= n;
        }
        self.score_targets(center, negatives, lr);
        for &c in context {
            for (x, &e) in self.input[c * d..(c + 1) * d].iter_mut().zip(&self.hidden_grad) {
                *x += e;
            }
        }
    }
}

struct Vocabulary {
    tokens: Interner,
    counts: Vec<u64>,
    /// corpus token id -> vocabulary index
    lookup: Vec<Option<usize>>,
}

fn build_vocabulary(corpus: &SentenceCorpus, min_count: u64) -> Vocabulary {
    let mut counts = vec![0u64; corpus.tokens.len()];
    for s in &corpus.sentences {
        for t in s {
            counts[t.index()] += 1;
        }
    }
    let mut kept: Vec<usize> = (0..counts.len()).filter(|&t| counts[t] >= min_count).collect();
    kept.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));

    let mut lookup = vec![None; counts.len()];
    let mut tokens = Interner::new();
    for (i, &t) in kept.iter().enumerate() {
        lookup[t] = Some(i);
        tokens.intern(corpus.tokens.names()[t].as_str());
    }
    Vocabulary {
        tokens,
        counts: kept.iter().map(|&t| counts[t]).collect(),
        lookup,
    }
}

/// Trains embeddings on `corpus` and returns the input-side vectors.
pub fn train_embeddings(corpus: &SentenceCorpus, cfg: &TrainConfig) -> Result<EmbeddingTable> {
    cfg.validate()?;
    if corpus.sentences.is_empty() {
        return Err(Error::Training("corpus is empty".into()));
    }
    let vocab = build_vocabulary(corpus, cfg.min_count);
    if vocab.counts.is_empty() {
        return Err(Error::Training(format!(
            "no token occurs at least {} times",
            cfg.min_count
        )));
    }

    let sentences: Vec<Vec<usize>> = corpus
        .sentences
        .iter()
        .map(|s| s.iter().filter_map(|t| vocab.lookup[t.index()]).collect())
        .collect();
    let total_tokens: u64 = vocab.counts.iter().sum();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut model = Word2Vec::init(vocab.counts.len(), cfg.dim, &mut rng);
    let noise = WeightedIndex::new(vocab.counts.iter().map(|&c| (c as f64).powf(0.75)))
        .map_err(|e| Error::Training(format!("noise distribution: {e}")))?;

    let keep_prob: Option<Vec<f64>> = cfg.subsample.map(|t| {
        let threshold = t * total_tokens as f64;
        vocab
            .counts
            .iter()
            .map(|&c| {
                let c = c as f64;
                ((c / threshold).sqrt() + 1.0) * threshold / c
            })
            .collect()
    });

    let schedule_len = (cfg.epochs as u64 * total_tokens) as f64;
    let min_lr = cfg.learning_rate * 1e-4;
    let mut processed = 0u64;
    let mut negatives = vec![0usize; cfg.negatives];
    let mut context = Vec::with_capacity(2 * cfg.window);
    let mut kept = Vec::new();

    for _ in 0..cfg.epochs {
        for sentence in &sentences {
            let lr = (cfg.learning_rate * (1.0 - processed as f64 / schedule_len)).max(min_lr);
            processed += sentence.len() as u64;

            let sentence: &[usize] = match &keep_prob {
                Some(p) => {
                    kept.clear();
                    kept.extend(sentence.iter().copied().filter(|&w| p[w] >= rng.random::<f64>()));
                    &kept
                }
                None => sentence,
            };

            for (pos, &center) in sentence.iter().enumerate() {
                let lo = pos.saturating_sub(cfg.window);
                let hi = (pos + cfg.window + 1).min(sentence.len());
                match cfg.mode {
                    Mode::SkipGram => {
                        for (q, &ctx) in sentence.iter().enumerate().take(hi).skip(lo) {
                            if q == pos {
                                continue;
                            }
                            for n in negatives.iter_mut() {
                                *n = noise.sample(&mut rng);
                            }
                            model.train_pair(center, ctx, &negatives, lr);
                        }
                    }
                    Mode::Cbow => {
                        context.clear();
                        context.extend((lo..hi).filter(|&q| q != pos).map(|q| sentence[q]));
                        for n in negatives.iter_mut() {
                            *n = noise.sample(&mut rng);
                        }
                        model.train_cbow(center, &context, &negatives, lr);
                    }
                }
            }
        }
    }

    let vectors = model.into_input();
    if vectors.iter().any(|x| !x.is_finite()) {
        return Err(Error::Training("embedding weights became non-finite".into()));
    }
    Ok(EmbeddingTable::new(cfg.dim, vocab.tokens, vectors, vocab.counts, cfg.min_count))
}
