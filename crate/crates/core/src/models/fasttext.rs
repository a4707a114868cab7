//! fastText-style classifier: averaged embeddings of words, hashed word
//! bigrams and hashed character n-grams, followed by a softmax layer.

use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{shuffled, Dataset, FeatureSpec, Hyperparameters, ModelArtifact, ModelError, ModelType, Params, TrainLog};
use crate::features::fnv1a64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FastTextHyper {
    pub dim: usize,
    pub lr: f64,
    pub epochs: usize,
    /// 1 = unigrams only, 2 adds word bigrams.
    pub word_ngrams: usize,
    pub minn: usize,
    pub maxn: usize,
    pub buckets: u32,
}

impl Default for FastTextHyper {
    fn default() -> Self {
        FastTextHyper { dim: 100, lr: 0.1, epochs: 25, word_ngrams: 2, minn: 2, maxn: 5, buckets: 1_000_000 }
    }
}

/// Input featurization: the training word list plus hashing settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HashedInput {
    pub words: Vec<String>,
    pub word_ngrams: usize,
    pub minn: usize,
    pub maxn: usize,
    pub buckets: u32,
}

impl HashedInput {
    fn from_hyper(data: &Dataset, h: &FastTextHyper) -> Self {
        let words: BTreeSet<&String> = data.examples.iter().flat_map(|e| &e.tokens).collect();
        HashedInput {
            words: words.into_iter().cloned().collect(),
            word_ngrams: h.word_ngrams,
            minn: h.minn,
            maxn: h.maxn,
            buckets: h.buckets.max(1),
        }
    }

    fn bucket(&self, key: &str) -> u64 {
        self.words.len() as u64 + fnv1a64(key) % self.buckets as u64
    }

    /// Global embedding rows for a token sequence; unknown words contribute
    /// only their hashed pieces.
    pub fn rows(&self, tokens: &[String]) -> Vec<u64> {
        let mut out = Vec::new();
        for t in tokens {
            if let Ok(i) = self.words.binary_search(t) {
                out.push(i as u64);
            }
            if self.maxn > 0 {
                let cs: Vec<char> = std::iter::once('<').chain(t.chars()).chain(std::iter::once('>')).collect();
                for n in self.minn.max(1)..=self.maxn.min(cs.len()) {
                    for w in cs.windows(n) {
                        if n == cs.len() {
                            continue;
                        }
                        out.push(self.bucket(&w.iter().collect::<String>()));
                    }
                }
            }
        }
        for n in 2..=self.word_ngrams {
            for w in tokens.windows(n) {
                out.push(self.bucket(&w.join(" ")));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FastTextParams {
    pub dim: usize,
    /// Global row ids that received training updates, ascending.
    pub rows: Vec<u64>,
    /// `rows.len() * dim` values, row-major.
    pub embeddings: Vec<f32>,
    /// 2 x dim: row 0 not-hate, row 1 hate.
    pub output: Vec<f32>,
    pub bias: [f32; 2],
    #[serde(skip)]
    index: HashMap<u64, u32>,
}

impl FastTextParams {
    pub(crate) fn reindex(&mut self) {
        self.index = self.rows.iter().enumerate().map(|(i, &r)| (r, i as u32)).collect();
    }

    fn hidden(&self, rows: &[u64]) -> Vec<f64> {
        let mut h = vec![0.0f64; self.dim];
        if rows.is_empty() {
            return h;
        }
        for r in rows {
            if let Some(&c) = self.index.get(r) {
                let e = &self.embeddings[c as usize * self.dim..(c as usize + 1) * self.dim];
                h.iter_mut().zip(e).for_each(|(a, &b)| *a += b as f64);
            }
        }
        let n = rows.len() as f64;
        h.iter_mut().for_each(|a| *a /= n);
        h
    }

    fn probs(&self, h: &[f64]) -> [f64; 2] {
        let z: Vec<f64> = (0..2)
            .map(|k| {
                self.output[k * self.dim..(k + 1) * self.dim].iter().zip(h).map(|(&w, &x)| w as f64 * x).sum::<f64>()
                    + self.bias[k] as f64
            })
            .collect();
        softmax2(z[0], z[1])
    }

    pub fn probability(&self, input: &HashedInput, tokens: &[String]) -> f64 {
        self.probs(&self.hidden(&input.rows(tokens)))[1]
    }
}

fn softmax2(a: f64, b: f64) -> [f64; 2] {
    let m = a.max(b);
    let (ea, eb) = ((a - m).exp(), (b - m).exp());
    [ea / (ea + eb), eb / (ea + eb)]
}

pub(crate) fn train_fasttext(
    data: &Dataset,
    hyper: &FastTextHyper,
    seed: u64,
) -> Result<(ModelArtifact, TrainLog), ModelError> {
    let input = HashedInput::from_hyper(data, hyper);
    let global: Vec<Vec<u64>> = data.examples.iter().map(|e| input.rows(&e.tokens)).collect();
    let rows: Vec<u64> = global.iter().flatten().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let compact: HashMap<u64, u32> = rows.iter().enumerate().map(|(i, &r)| (r, i as u32)).collect();
    let docs: Vec<Vec<u32>> = global.iter().map(|g| g.iter().map(|r| compact[r]).collect()).collect();
    let dim = hyper.dim.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut emb = vec![0.0f64; rows.len() * dim];
    let bound = 1.0 / dim as f64;
    let mut out: Vec<f64> = (0..2 * dim).map(|_| rng.gen_range(-bound..bound)).collect();
    let mut bias = [0.0f64; 2];
    let total = (hyper.epochs * docs.len()).max(1) as f64;
    let mut step = 0usize;
    let mut log = TrainLog::default();
    let mut h = vec![0.0f64; dim];
    let mut gh = vec![0.0f64; dim];
    for epoch in 0..hyper.epochs {
        let mut loss = 0.0;
        for i in shuffled(docs.len(), &mut rng) {
            let lr = hyper.lr * (1.0 - step as f64 / total);
            step += 1;
            let doc = &docs[i];
            h.iter_mut().for_each(|v| *v = 0.0);
            for &r in doc {
                h.iter_mut().zip(&emb[r as usize * dim..(r as usize + 1) * dim]).for_each(|(a, b)| *a += b);
            }
            let n = doc.len().max(1) as f64;
            h.iter_mut().for_each(|v| *v /= n);
            let z0 = out[..dim].iter().zip(&h).map(|(w, x)| w * x).sum::<f64>() + bias[0];
            let z1 = out[dim..].iter().zip(&h).map(|(w, x)| w * x).sum::<f64>() + bias[1];
            let p = softmax2(z0, z1);
            let y = data.examples[i].label as usize;
            loss -= p[y].max(1e-300).ln();
            let g = [p[0] - (y == 0) as u8 as f64, p[1] - (y == 1) as u8 as f64];
            for (d, gv) in gh.iter_mut().enumerate() {
                *gv = g[0] * out[d] + g[1] * out[dim + d];
            }
            for k in 0..2 {
                for d in 0..dim {
                    out[k * dim + d] -= lr * g[k] * h[d];
                }
                bias[k] -= lr * g[k];
            }
            for &r in doc {
                let e = &mut emb[r as usize * dim..(r as usize + 1) * dim];
                e.iter_mut().zip(&gh).for_each(|(a, b)| *a -= lr * b / n);
            }
        }
        let mean = loss / docs.len() as f64;
        if !mean.is_finite() {
            return Err(ModelError::NonFiniteLoss { epoch });
        }
        log::debug!("fasttext epoch {epoch}: loss {mean:.6}");
        log.epoch_loss.push(mean);
    }
    let mut params = FastTextParams {
        dim,
        rows,
        embeddings: emb.into_iter().map(|v| v as f32).collect(),
        output: out.into_iter().map(|v| v as f32).collect(),
        bias: [bias[0] as f32, bias[1] as f32],
        index: HashMap::new(),
    };
    params.reindex();
    let artifact = ModelArtifact {
        model_type: ModelType::Fasttext,
        format_version: super::FORMAT_VERSION,
        seed,
        hyperparameters: Hyperparameters::Fasttext(hyper.clone()),
        feature_config: FeatureSpec::Hashed(input),
        params: Params::Fasttext(params),
    };
    Ok((artifact, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{train_with_log, Example, ModelSpec};

    #[test]
    fn char_ngrams_use_boundaries() {
        let inp = HashedInput { words: vec!["ab".into()], word_ngrams: 1, minn: 2, maxn: 3, buckets: 100 };
        let rows = inp.rows(&["ab".into()]);
        // word, "<a" "ab" "b>", "<ab" "ab>"; "<ab>" itself is skipped
        assert_eq!(rows.len(), 6);
        assert_eq!(rows[0], 0);
        assert!(rows[1..].iter().all(|&r| (1..101).contains(&r)));
        assert_eq!(inp.rows(&["zz".into()]).len(), 5);
    }

    #[test]
    fn learns_keyword_and_loss_falls() {
        let ex: Vec<Example> = (0..60)
            .map(|i| Example {
                post_id: format!("p{i}"),
                tokens: vec![if i % 3 == 0 { "bad".into() } else { "nice".into() }, format!("x{}", i % 5)],
                label: i % 3 == 0,
            })
            .collect();
        let data = Dataset::new(ex);
        let spec = ModelSpec::Fasttext { hyper: FastTextHyper { dim: 8, lr: 0.5, epochs: 20, ..Default::default() } };
        let (m, log) = train_with_log(&spec, &data, 11).unwrap();
        assert!(log.epoch_loss.last().unwrap() < &log.epoch_loss[0]);
        for e in &data.examples {
            assert_eq!(m.predict_tokens(&e.tokens).0, e.label);
        }
    }
}
