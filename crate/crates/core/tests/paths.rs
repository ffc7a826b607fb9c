use std::collections::BTreeSet;

use fairkg_core::distribution::{path_distribution, PatternVocabulary};
use fairkg_core::graph::{load_graph, EntityClass, EntityId, KnowledgeGraph, TripleRecord};
use fairkg_core::path::{enumerate_user_item_paths, pattern_of, Direction, PatternStep};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PREFIXES: [&str; 4] = ["user", "item", "word", "brand"];

/// Random graph with at most `max_entities` entities and a handful of relations.
fn random_graph(seed: u64, max_entities: usize) -> KnowledgeGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(4..=max_entities);
    // at least one user and one item
    let names: Vec<String> = (0..n)
        .map(|i| {
            let class = match i {
                0 => 0,
                1 => 1,
                _ => rng.random_range(0..PREFIXES.len()),
            };
            format!("{}:e{i}", PREFIXES[class])
        })
        .collect();
    let relations = rng.random_range(1..=3);
    let edges = rng.random_range(n..=3 * n);
    let mut records = vec![TripleRecord::from_prefixed(1, &names[0], "r0", &names[1])];
    for line in 0..edges {
        let h = rng.random_range(0..n);
        let t = rng.random_range(0..n);
        if h == t {
            continue;
        }
        let r = format!("r{}", rng.random_range(0..relations));
        records.push(TripleRecord::from_prefixed(
            line + 2,
            &names[h],
            &r,
            &names[t],
        ));
    }
    load_graph(records).unwrap()
}

type RawPath = (Vec<EntityId>, Vec<PatternStep>);

/// Independent oracle: extends paths triple by triple straight from the triple list.
fn brute_force(g: &KnowledgeGraph, user: EntityId, max_len: usize) -> BTreeSet<RawPath> {
    let mut out = BTreeSet::new();
    let mut frontier: Vec<RawPath> = vec![(vec![user], vec![])];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for (nodes, steps) in &frontier {
            let last = *nodes.last().unwrap();
            for t in g.triples() {
                let hops = [
                    (t.head == last, t.tail, Direction::Forward),
                    (t.tail == last, t.head, Direction::Reversed),
                ];
                for (ok, to, dir) in hops {
                    if !ok || nodes.contains(&to) {
                        continue;
                    }
                    let mut n2 = nodes.clone();
                    n2.push(to);
                    let mut s2 = steps.clone();
                    s2.push(PatternStep::new(t.relation, dir));
                    if g.class(to) == EntityClass::Item {
                        out.insert((n2.clone(), s2.clone()));
                    }
                    next.push((n2, s2));
                }
            }
        }
        frontier = next;
    }
    out
}

#[test]
fn enumeration_matches_brute_force_on_random_graphs() {
    for seed in 0..50 {
        let g = random_graph(seed, 50);
        for user in g.users() {
            for max_len in 1..=3 {
                let got: Vec<RawPath> = enumerate_user_item_paths(&g, user, max_len)
                    .unwrap()
                    .iter()
                    .map(|p| (p.nodes().to_vec(), p.steps().to_vec()))
                    .collect();
                let want: Vec<RawPath> = brute_force(&g, user, max_len).into_iter().collect();
                assert_eq!(got, want, "seed {seed}, user {user:?}, max_len {max_len}");
            }
        }
    }
}

proptest! {
    #[test]
    fn enumerated_paths_are_valid(seed in any::<u64>()) {
        let g = random_graph(seed, 20);
        for user in g.users() {
            for p in enumerate_user_item_paths(&g, user, 3).unwrap() {
                prop_assert!(p.validate(&g).is_ok());
                prop_assert_eq!(pattern_of(&p).len(), p.steps().len());
                prop_assert_eq!(p.start(), user);
            }
        }
    }

    #[test]
    fn distribution_sums_to_one_and_ignores_order(
        seed in any::<u64>(),
        smoothing in prop_oneof![Just(0.0), 0.1f64..3.0],
        shuffle_seed in any::<u64>(),
    ) {
        let g = random_graph(seed, 20);
        let user = g.users().next().unwrap();
        let mut paths = enumerate_user_item_paths(&g, user, 3).unwrap();
        prop_assume!(!paths.is_empty());
        let vocab: PatternVocabulary = paths.iter().map(pattern_of).collect();
        let d = path_distribution(&paths, smoothing, &vocab).unwrap();
        let total: f64 = d.iter().map(|(_, p)| p).sum();
        prop_assert!((total - 1.0).abs() < 1e-9);

        let mut rng = ChaCha8Rng::seed_from_u64(shuffle_seed);
        rand::seq::SliceRandom::shuffle(paths.as_mut_slice(), &mut rng);
        let shuffled = path_distribution(&paths, smoothing, &vocab).unwrap();
        prop_assert_eq!(d, shuffled);
    }
}
