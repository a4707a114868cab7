//! Balanced random forest: each tree grows on a bootstrap that draws the
//! minority-class count from each class, with Gini splits over a random
//! feature subset.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive_seed, Dataset, FeatureSpec, Hyperparameters, ModelArtifact, ModelError, ModelType, Params};
use crate::features::{build_vocab, tfidf_vectorize, FeatureConfig, SparseVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrfHyper {
    pub n_trees: usize,
    /// None grows until leaves are pure.
    pub max_depth: Option<usize>,
    /// Features drawn per split; None means ceil(sqrt(vocab size)).
    pub max_features: Option<usize>,
    pub min_samples_leaf: usize,
}

impl Default for BrfHyper {
    fn default() -> Self {
        BrfHyper { n_trees: 100, max_depth: None, max_features: None, min_samples_leaf: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Node {
    Leaf { yes: f64 },
    Split { feature: u32, threshold: f64, left: u32, right: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    /// Bootstrap rows, as indices into `BrfParams::train_ids`.
    pub sample: Vec<u32>,
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_fraction(&self, x: &SparseVector) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { yes } => return *yes,
                Node::Split { feature, threshold, left, right } => {
                    at = if x.get(*feature) <= *threshold { *left } else { *right } as usize;
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left as usize).max(go(nodes, *right as usize)),
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrfParams {
    pub train_ids: Vec<String>,
    pub train_labels: Vec<bool>,
    pub trees: Vec<Tree>,
}

impl BrfParams {
    /// Share of trees voting hate.
    pub fn vote_fraction(&self, x: &SparseVector) -> f64 {
        let votes = self.trees.iter().filter(|t| t.leaf_fraction(x) > 0.5).count();
        votes as f64 / self.trees.len().max(1) as f64
    }
}

/// Draws `min(pos, neg)` rows with replacement from each class.
pub fn balanced_bootstrap(labels: &[bool], rng: &mut ChaCha8Rng) -> Vec<u32> {
    let pos: Vec<u32> = (0..labels.len() as u32).filter(|&i| labels[i as usize]).collect();
    let neg: Vec<u32> = (0..labels.len() as u32).filter(|&i| !labels[i as usize]).collect();
    let k = pos.len().min(neg.len());
    let mut out = Vec::with_capacity(2 * k);
    for class in [&pos, &neg] {
        out.extend((0..k).map(|_| class[rng.gen_range(0..class.len())]));
    }
    out
}

fn gini_score(yes: f64, no: f64) -> f64 {
    // n * (1 - gini) = (yes^2 + no^2) / n; larger is purer.
    let n = yes + no;
    if n == 0.0 {
        0.0
    } else {
        (yes * yes + no * no) / n
    }
}

/// Training matrix by column, for split search.
struct Columns {
    ptr: Vec<usize>,
    rows: Vec<u32>,
    vals: Vec<f64>,
}

impl Columns {
    fn new(xs: &[SparseVector], dim: usize) -> Self {
        let mut ptr = vec![0usize; dim + 1];
        for x in xs {
            for (f, _) in x.iter() {
                ptr[f + 1] += 1;
            }
        }
        for f in 0..dim {
            ptr[f + 1] += ptr[f];
        }
        let mut fill = ptr.clone();
        let mut rows = vec![0u32; ptr[dim]];
        let mut vals = vec![0.0; ptr[dim]];
        for (r, x) in xs.iter().enumerate() {
            for (f, v) in x.iter() {
                rows[fill[f]] = r as u32;
                vals[fill[f]] = v;
                fill[f] += 1;
            }
        }
        Columns { ptr, rows, vals }
    }

    fn column(&self, f: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.ptr[f]..self.ptr[f + 1];
        self.rows[span.clone()].iter().map(|&r| r as usize).zip(self.vals[span].iter().copied())
    }
}

struct Grower<'a> {
    xs: &'a [SparseVector],
    cols: &'a Columns,
    ys: &'a [bool],
    dim: usize,
    max_depth: usize,
    mtry: usize,
    min_leaf: usize,
}

/// Per-tree scratch: node membership counts per training row and a feature
/// permutation for drawing without replacement.
struct Scratch {
    mark: Vec<u32>,
    mult: Vec<u32>,
    features: Vec<u32>,
    gen: u32,
}

impl Grower<'_> {
    fn counts(&self, rows: &[u32]) -> (usize, usize) {
        let yes = rows.iter().filter(|&&r| self.ys[r as usize]).count();
        (yes, rows.len() - yes)
    }

    /// Best threshold on one feature as (score, threshold), or None if the
    /// feature is constant within the node.
    fn scan_feature(&self, f: usize, n: usize, yes: usize, no: usize, sc: &Scratch) -> Option<Option<(f64, f64)>> {
        let mut points: Vec<(f64, usize, usize)> = Vec::new();
        let (mut nz_yes, mut nz_no) = (0usize, 0usize);
        for (r, v) in self.cols.column(f) {
            if sc.mark[r] != sc.gen {
                continue;
            }
            let m = sc.mult[r] as usize;
            if self.ys[r] {
                nz_yes += m;
                points.push((v, m, 0));
            } else {
                nz_no += m;
                points.push((v, 0, m));
            }
        }
        if points.is_empty() {
            return None;
        }
        let zeros = n - nz_yes - nz_no;
        if zeros > 0 {
            points.push((0.0, yes - nz_yes, no - nz_no));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        if points[0].0 == points[points.len() - 1].0 {
            return None;
        }
        let parent = gini_score(yes as f64, no as f64);
        let mut best: Option<(f64, f64)> = None;
        let (mut ly, mut ln) = (0usize, 0usize);
        let mut k = 0;
        while k < points.len() {
            let v = points[k].0;
            while k < points.len() && points[k].0 == v {
                ly += points[k].1;
                ln += points[k].2;
                k += 1;
            }
            if k == points.len() {
                break;
            }
            let (ry, rn) = (yes - ly, no - ln);
            if ly + ln < self.min_leaf || ry + rn < self.min_leaf {
                continue;
            }
            let score = gini_score(ly as f64, ln as f64) + gini_score(ry as f64, rn as f64);
            if score > parent + 1e-12 && best.is_none_or(|b| score > b.0 + 1e-12) {
                best = Some((score, (v + points[k].0) / 2.0));
            }
        }
        Some(best)
    }

    /// Draws `mtry` features without replacement, evaluates those that vary
    /// in the node, and keeps drawing while none did.
    fn best_split(&self, rows: &[u32], rng: &mut ChaCha8Rng, sc: &mut Scratch) -> Option<(u32, f64)> {
        let (yes, no) = self.counts(rows);
        sc.gen += 1;
        for &r in rows {
            let r = r as usize;
            if sc.mark[r] != sc.gen {
                sc.mark[r] = sc.gen;
                sc.mult[r] = 0;
            }
            sc.mult[r] += 1;
        }
        let mut best: Option<(f64, u32, f64)> = None;
        let mut visited = 0;
        let mut varying = 0;
        while visited < self.dim && (visited < self.mtry || varying == 0) {
            let j = rng.gen_range(visited..self.dim);
            sc.features.swap(visited, j);
            let f = sc.features[visited];
            visited += 1;
            let Some(found) = self.scan_feature(f as usize, rows.len(), yes, no, sc) else {
                continue;
            };
            varying += 1;
            if let Some((score, t)) = found {
                let better = match best {
                    None => true,
                    Some((b, bf, _)) => score > b + 1e-12 || (score > b - 1e-12 && f < bf),
                };
                if better {
                    best = Some((score, f, t));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    fn grow(&self, rows: Vec<u32>, rng: &mut ChaCha8Rng) -> Vec<Node> {
        let mut sc = Scratch {
            mark: vec![0; self.xs.len()],
            mult: vec![0; self.xs.len()],
            features: (0..self.dim as u32).collect(),
            gen: 0,
        };
        let mut nodes = vec![Node::Leaf { yes: 0.0 }];
        let mut stack = vec![(0usize, rows, 0usize)];
        while let Some((at, rows, depth)) = stack.pop() {
            let (yes, no) = self.counts(&rows);
            let leaf = Node::Leaf { yes: yes as f64 / (yes + no).max(1) as f64 };
            if yes == 0 || no == 0 || depth >= self.max_depth || rows.len() < 2 * self.min_leaf {
                nodes[at] = leaf;
                continue;
            }
            let Some((feature, threshold)) = self.best_split(&rows, rng, &mut sc) else {
                nodes[at] = leaf;
                continue;
            };
            let (l, r): (Vec<u32>, Vec<u32>) =
                rows.iter().partition(|&&row| self.xs[row as usize].get(feature) <= threshold);
            let left = nodes.len();
            nodes.push(Node::Leaf { yes: 0.0 });
            nodes.push(Node::Leaf { yes: 0.0 });
            nodes[at] = Node::Split { feature, threshold, left: left as u32, right: left as u32 + 1 };
            stack.push((left + 1, r, depth + 1));
            stack.push((left, l, depth + 1));
        }
        nodes
    }
}

pub(crate) fn train_brf(
    data: &Dataset,
    features: &FeatureConfig,
    hyper: &BrfHyper,
    seed: u64,
) -> Result<ModelArtifact, ModelError> {
    let vocab = build_vocab(data.token_slices(), features)?;
    let xs: Vec<SparseVector> = data.examples.par_iter().map(|e| tfidf_vectorize(&e.tokens, &vocab)).collect();
    let ys: Vec<bool> = data.examples.iter().map(|e| e.label).collect();
    let cols = Columns::new(&xs, vocab.len());
    let grower = Grower {
        xs: &xs,
        cols: &cols,
        ys: &ys,
        dim: vocab.len(),
        max_depth: hyper.max_depth.unwrap_or(usize::MAX),
        mtry: hyper.max_features.unwrap_or_else(|| (vocab.len() as f64).sqrt().ceil() as usize).max(1),
        min_leaf: hyper.min_samples_leaf.max(1),
    };
    let trees: Vec<Tree> = (0..hyper.n_trees.max(1))
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, t as u64));
            let sample = balanced_bootstrap(&ys, &mut rng);
            let nodes = grower.grow(sample.clone(), &mut rng);
            Tree { sample, nodes }
        })
        .collect();
    Ok(ModelArtifact {
        model_type: ModelType::Brf,
        format_version: super::FORMAT_VERSION,
        seed,
        hyperparameters: Hyperparameters::Brf(hyper.clone()),
        feature_config: FeatureSpec::Vocab(vocab),
        params: Params::Brf(BrfParams {
            train_ids: data.examples.iter().map(|e| e.post_id.clone()).collect(),
            train_labels: ys,
            trees,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{train, Example, ModelSpec};

    #[test]
    fn one_feature_depth_one_fits() {
        let ex: Vec<Example> = (0..30)
            .map(|i| Example {
                post_id: format!("p{i}"),
                tokens: vec![if i % 3 == 0 { "bad".into() } else { "ok".into() }],
                label: i % 3 == 0,
            })
            .collect();
        let data = Dataset::new(ex);
        let spec = ModelSpec::Brf {
            features: FeatureConfig::word(1, 1, 1),
            hyper: BrfHyper { n_trees: 5, max_depth: Some(1), max_features: Some(1), min_samples_leaf: 1 },
        };
        let m = train(&spec, &data, 4).unwrap();
        for e in &data.examples {
            assert_eq!(m.predict_tokens(&e.tokens).0, e.label);
        }
        let Params::Brf(p) = &m.params else { panic!() };
        for t in &p.trees {
            assert!(t.depth() <= 1);
            let yes = t.sample.iter().filter(|&&i| p.train_labels[i as usize]).count();
            assert_eq!(yes * 2, t.sample.len());
            assert_eq!(yes, 10);
        }
    }

    #[test]
    fn bootstrap_balance() {
        let labels: Vec<bool> = (0..50).map(|i| i < 7).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = balanced_bootstrap(&labels, &mut rng);
        assert_eq!(s.len(), 14);
        assert_eq!(s.iter().filter(|&&i| labels[i as usize]).count(), 7);
    }
}
