use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::RawPost;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShuffleOutcome {
    /// Same-source neighbours left after repair; 0 whenever an arrangement
    /// without any exists, and the minimum possible otherwise.
    pub remaining_adjacencies: usize,
}

/// Source counts with a max-heap view, kept in step with the unplaced posts.
struct Counts<'a> {
    by_source: HashMap<&'a str, usize>,
    ordered: BTreeSet<(usize, &'a str)>,
}

impl<'a> Counts<'a> {
    fn new<'b>(sources: impl Iterator<Item = &'a str>) -> Self {
        let mut by_source: HashMap<&str, usize> = HashMap::new();
        for s in sources {
            *by_source.entry(s).or_default() += 1;
        }
        let ordered = by_source.iter().map(|(s, n)| (*n, *s)).collect();
        Counts { by_source, ordered }
    }

    fn take(&mut self, s: &'a str) {
        let n = self.by_source[s];
        self.ordered.remove(&(n, s));
        if n > 1 {
            self.ordered.insert((n - 1, s));
        }
        self.by_source.insert(s, n - 1);
    }

    fn put_back(&mut self, s: &'a str) {
        let n = self.by_source[s];
        if n > 0 {
            self.ordered.remove(&(n, s));
        }
        self.ordered.insert((n + 1, s));
        self.by_source.insert(s, n + 1);
    }

    fn top(&self) -> Option<&'a str> {
        self.ordered.iter().next_back().map(|&(_, s)| s)
    }

    /// Can `left` posts be laid out with no adjacency when the first may not be `banned`?
    fn feasible(&self, left: usize, banned: &str) -> bool {
        self.ordered.iter().rev().take(2).all(|&(n, s)| {
            let cap = if s == banned { left / 2 } else { left.div_ceil(2) };
            n <= cap
        })
    }
}

/// Seeded uniform shuffle, then a greedy pass that walks the shuffled order and
/// takes the first post that neither repeats the previous source nor makes the
/// rest impossible to arrange. When no clean arrangement exists the dominant
/// source is interleaved with single separators.
pub fn constrained_shuffle(mut posts: Vec<RawPost>, seed: u64) -> (Vec<RawPost>, ShuffleOutcome) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    posts.shuffle(&mut rng);
    let n = posts.len();
    let order: Vec<usize> = {
        let sources: Vec<&str> = posts.iter().map(|p| p.source_id.as_str()).collect();
        let mut counts = Counts::new(sources.iter().copied());
        let mut placed = vec![false; n];
        let mut head = 0;
        let mut order = Vec::with_capacity(n);
        let mut prev: Option<&str> = None;
        while order.len() < n {
            while placed[head] {
                head += 1;
            }
            let left = n - order.len() - 1;
            let mut pick = None;
            for i in head..n {
                if placed[i] || Some(sources[i]) == prev {
                    continue;
                }
                counts.take(sources[i]);
                let ok = counts.feasible(left, sources[i]);
                counts.put_back(sources[i]);
                if ok {
                    pick = Some(i);
                    break;
                }
            }
            // No clean layout exists: alternate the dominant source with single
            // separators so it collects the fewest neighbours.
            let i = pick.unwrap_or_else(|| {
                let top = counts.top().expect("posts remain");
                let want_top = prev != Some(top);
                (head..n)
                    .find(|&i| !placed[i] && (sources[i] == top) == want_top)
                    .or_else(|| (head..n).find(|&i| !placed[i]))
                    .unwrap()
            });
            placed[i] = true;
            counts.take(sources[i]);
            prev = Some(sources[i]);
            order.push(i);
        }
        order
    };
    let mut slots: Vec<Option<RawPost>> = posts.into_iter().map(Some).collect();
    let out: Vec<RawPost> = order.into_iter().map(|i| slots[i].take().unwrap()).collect();
    let remaining = out.windows(2).filter(|w| w[0].source_id == w[1].source_id).count();
    if remaining > 0 {
        log::warn!("constrained shuffle: {remaining} same-source adjacencies could not be removed");
    }
    (out, ShuffleOutcome { remaining_adjacencies: remaining })
}
