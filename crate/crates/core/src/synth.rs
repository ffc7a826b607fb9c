//! Seeded generator for small, imbalanced marketplaces.
//!
//! Training purchase counts follow `n = floor + ⌊(cap - floor) · U^skew⌋` with `U`
//! uniform on `[0, 1)`: a power-law density on `[floor, cap]` that piles most users
//! near the floor and leaves a thin tail of very active users. Each user draws a total
//! of `⌈n / 0.8⌉` distinct items, mostly from one or two preferred categories with
//! popularity-weighted picks, and the last fifth of that sequence is held out as test.
//! Items carry a category, a brand and a few descriptive words; users mention words of
//! the items they bought.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, PURCHASE};
use crate::graph::{load_graph, TripleRecord};
use crate::{Error, Result};

pub const MENTION: &str = "mention";
pub const DESCRIBED_AS: &str = "described_as";
pub const PRODUCED_BY: &str = "produced_by";
pub const BELONGS_TO: &str = "belongs_to";

/// Fraction of each user's purchase sequence kept for training.
const TRAIN_FRACTION: f64 = 0.8;
/// Chance that a purchase comes from one of the user's preferred categories.
const PREFERRED_SHARE: f64 = 0.75;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub users: usize,
    pub items: usize,
    pub words: usize,
    pub brands: usize,
    pub categories: usize,
    /// Exponent of the activity power law; larger means more skewed.
    pub skew: f64,
    /// Minimum training purchases per user (at least 4).
    pub floor: usize,
    /// Maximum training purchases per user.
    pub max_purchases: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            users: 2000,
            items: 1000,
            words: 200,
            brands: 50,
            categories: 20,
            skew: 30.0,
            floor: 4,
            max_purchases: 300,
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InfeasibleConfig(msg));
        if self.users == 0 || self.items == 0 {
            return bad("need at least one user and one item".into());
        }
        if self.words == 0 || self.brands == 0 || self.categories == 0 {
            return bad("need at least one word, brand and category".into());
        }
        if self.floor < 4 {
            return bad(format!(
                "purchase floor must be at least 4, got {}",
                self.floor
            ));
        }
        if !(self.skew.is_finite() && self.skew > 0.0) {
            return bad(format!("skew exponent must be positive, got {}", self.skew));
        }
        if self.max_purchases < self.floor {
            return bad(format!(
                "max purchases {} below the floor {}",
                self.max_purchases, self.floor
            ));
        }
        let most = total_purchases(self.max_purchases);
        if most > self.items {
            return bad(format!(
                "a user may need {most} distinct items but only {} exist",
                self.items
            ));
        }
        Ok(())
    }
}

fn total_purchases(train: usize) -> usize {
    // guard against 4 / 0.8 = 5.000000000000001
    let t = libm::ceil(train as f64 / TRAIN_FRACTION - 1e-9) as usize;
    t.max(train + 1)
}

fn name(prefix: &str, i: usize, count: usize) -> String {
    let width = format!("{}", count.saturating_sub(1)).len().max(4);
    format!("{prefix}:{prefix:.1}{i:0width$}")
}

/// Generates the dataset; identical configs give identical datasets.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let user = |i| name("user", i, cfg.users);
    let item = |i| name("item", i, cfg.items);
    let word = |i| name("word", i, cfg.words);
    let brand = |i| name("brand", i, cfg.brands);
    let category = |i| name("category", i, cfg.categories);
    let mut triples: Vec<TripleRecord> = Vec::new();
    let mut push = |h: String, r: &str, t: String| {
        triples.push(TripleRecord::from_prefixed(0, &h, r, &t));
    };

    // catalog: category, brand and words per item; brands and words lean to a category
    let mut item_category = Vec::with_capacity(cfg.items);
    let mut item_words: Vec<Vec<usize>> = Vec::with_capacity(cfg.items);
    let pool_of =
        |n: usize, c: usize| -> Vec<usize> { (0..n).filter(|x| x % cfg.categories == c).collect() };
    for i in 0..cfg.items {
        let c = rng.random_range(0..cfg.categories);
        item_category.push(c);
        push(item(i), BELONGS_TO, category(c));

        let brands = pool_of(cfg.brands, c);
        let b = if brands.is_empty() {
            rng.random_range(0..cfg.brands)
        } else {
            brands[rng.random_range(0..brands.len())]
        };
        push(item(i), PRODUCED_BY, brand(b));

        let topical = pool_of(cfg.words, c);
        let mut ws = BTreeSet::new();
        for _ in 0..rng.random_range(2..=4usize) {
            let w = if !topical.is_empty() && rng.random_bool(0.7) {
                topical[rng.random_range(0..topical.len())]
            } else {
                rng.random_range(0..cfg.words)
            };
            ws.insert(w);
        }
        for &w in &ws {
            push(item(i), DESCRIBED_AS, word(w));
        }
        item_words.push(ws.into_iter().collect());
    }

    // popularity: a random item ranking with Zipf-like weights
    let mut rank: Vec<usize> = (0..cfg.items).collect();
    rand::seq::SliceRandom::shuffle(rank.as_mut_slice(), &mut rng);
    let mut popularity = alloc::vec![0.0; cfg.items];
    for (r, &i) in rank.iter().enumerate() {
        popularity[i] = 1.0 / libm::pow(r as f64 + 1.0, 0.8);
    }
    let by_category: Vec<Vec<usize>> = (0..cfg.categories)
        .map(|c| (0..cfg.items).filter(|&i| item_category[i] == c).collect())
        .collect();
    let sampler = |items: &[usize]| -> Option<WeightedIndex<f64>> {
        WeightedIndex::new(items.iter().map(|&i| popularity[i])).ok()
    };
    let all_items: Vec<usize> = (0..cfg.items).collect();
    let global = sampler(&all_items).expect("positive weights");
    let category_samplers: Vec<Option<WeightedIndex<f64>>> =
        by_category.iter().map(|items| sampler(items)).collect();

    let mut test: Vec<(String, String)> = Vec::new();
    let span = (cfg.max_purchases - cfg.floor) as f64;
    for u in 0..cfg.users {
        let u_draw: f64 = rng.random();
        let n_train = cfg.floor + libm::floor(span * libm::pow(u_draw, cfg.skew)) as usize;
        let n_total = total_purchases(n_train);

        let mut preferred = alloc::vec![rng.random_range(0..cfg.categories)];
        if rng.random_bool(0.5) {
            preferred.push(rng.random_range(0..cfg.categories));
        }
        let mut bought: Vec<usize> = Vec::with_capacity(n_total);
        let mut owned = BTreeSet::new();
        let mut attempts = 0usize;
        while bought.len() < n_total {
            attempts += 1;
            let c = preferred[rng.random_range(0..preferred.len())];
            let pick = match &category_samplers[c] {
                _ if attempts > 200 * n_total => {
                    // give up sampling: fill from the unpopular end of the catalog
                    let fill = rank.iter().rev().copied().find(|i| !owned.contains(i));
                    fill.expect("validated item count")
                }
                // preferred categories get exhausted by very active users
                Some(s) if attempts < 50 * n_total && rng.random_bool(PREFERRED_SHARE) => {
                    by_category[c][s.sample(&mut rng)]
                }
                _ => global.sample(&mut rng),
            };
            if owned.insert(pick) {
                bought.push(pick);
            }
        }
        for &i in &bought[..n_train] {
            push(user(u), PURCHASE, item(i));
        }
        for &i in &bought[n_train..] {
            test.push((user(u), item(i)));
        }

        let vocabulary: Vec<usize> = bought[..n_train]
            .iter()
            .flat_map(|&i| item_words[i].iter().copied())
            .collect();
        let mentions = (1 + n_train / 5).min(20);
        let mut said = BTreeSet::new();
        for _ in 0..mentions {
            said.insert(vocabulary[rng.random_range(0..vocabulary.len())]);
        }
        for w in said {
            push(user(u), MENTION, word(w));
        }
    }

    let graph = load_graph(triples)?;
    Dataset::new(graph, test)
}
