use std::collections::{BTreeMap, BTreeSet};

use fairkg_core::metrics::{
    gini, group_disparity, group_split, ndcg_at_k, simpson_diversity, GroupSplit,
};
use fairkg_core::report::GroupMeans;
use proptest::prelude::*;

/// Pair-counting definition, independent of the closed form used by `gini`.
fn gini_by_pairs(v: &[f64]) -> f64 {
    let m = v.len() as f64;
    let sum: f64 = v.iter().sum();
    if sum == 0.0 {
        return 0.0;
    }
    let pairs: f64 = v
        .iter()
        .flat_map(|a| v.iter().map(move |b| (a - b).abs()))
        .sum();
    pairs / (2.0 * m * sum)
}

proptest! {
    #[test]
    fn sid_in_unit_range_and_order_free(mut counts in prop::collection::vec(0u64..50, 0..12)) {
        let s = simpson_diversity(&counts);
        prop_assert!((0.0..=1.0).contains(&s));
        let nonzero = counts.iter().filter(|&&n| n > 0).count();
        let total: u64 = counts.iter().sum();
        prop_assert_eq!(s == 0.0, nonzero <= 1 || total <= 1);
        counts.reverse();
        prop_assert_eq!(simpson_diversity(&counts), s);
    }

    #[test]
    fn gini_range_scale_and_oracle(
        v in prop::collection::vec(0.0f64..100.0, 1..20),
        c in 0.01f64..100.0,
    ) {
        let g = gini(&v).unwrap();
        let m = v.len() as f64;
        prop_assert!(g >= 0.0 && g <= 1.0 - 1.0 / m + 1e-12);
        prop_assert!((g - gini_by_pairs(&v)).abs() < 1e-9);
        let scaled: Vec<f64> = v.iter().map(|x| x * c).collect();
        prop_assert!((gini(&scaled).unwrap() - g).abs() < 1e-9);
        let all_equal = v.iter().all(|x| *x == v[0]);
        if all_equal {
            prop_assert_eq!(g, 0.0);
        }
    }

    #[test]
    fn ndcg_range_and_perfect_prefix(
        ranked in prop::collection::vec(0u32..30, 0..15).prop_map(|v| {
            let mut seen = BTreeSet::new();
            v.into_iter().filter(|x| seen.insert(*x)).collect::<Vec<_>>()
        }),
        relevant in prop::collection::btree_set(0u32..30, 0..10),
        k in 1usize..12,
    ) {
        let n = ndcg_at_k(&ranked, &relevant, k);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&n));
        let need = k.min(relevant.len());
        let perfect = need > 0
            && ranked.len() >= need
            && ranked[..need].iter().all(|x| relevant.contains(x));
        prop_assert_eq!((n - 1.0).abs() < 1e-12, perfect);
    }

    #[test]
    fn disparity_symmetric_and_bounded(
        scores in prop::collection::vec(0.0f64..10.0, 2..30),
        ratio in 0.01f64..0.99,
    ) {
        let map: BTreeMap<usize, f64> = scores.iter().copied().enumerate().collect();
        let counts: BTreeMap<usize, u64> = (0..scores.len()).map(|i| (i, (i * 7 % 5) as u64)).collect();
        let split = group_split(&counts, ratio).unwrap();
        prop_assume!(!split.active().is_empty() && !split.inactive().is_empty());
        let d = group_disparity(&map, &split).unwrap();
        let swapped = GroupSplit::from_groups(split.inactive().clone(), split.active().clone()).unwrap();
        prop_assert!((group_disparity(&map, &swapped).unwrap() - d).abs() < 1e-12);
        let max = scores.iter().cloned().fold(f64::MIN, f64::max);
        let min = scores.iter().cloned().fold(f64::MAX, f64::min);
        prop_assert!(d <= max - min + 1e-12);

        let groups: Vec<_> = (0..scores.len()).map(|i| split.group_of(&i).unwrap()).collect();
        let means = GroupMeans::of(&scores, &groups).unwrap();
        let (a, b) = (split.active().len() as f64, split.inactive().len() as f64);
        prop_assert!((means.overall - (a * means.active + b * means.inactive) / (a + b)).abs() < 1e-9);
    }
}
