use std::collections::HashSet;

use proptest::prelude::*;
use subrec_core::synthetic::random_dataset;
use subrec_core::{stratified_split, SplitConfig};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn split_partitions_and_stratifies(
        users in 1usize..60,
        max_items in 1usize..30,
        frac in 0.01f64..0.99,
        min_train in 1usize..4,
        seed in any::<u64>(),
    ) {
        let ds = random_dataset(users, 30, 1, max_items, seed).unwrap();
        let cfg = SplitConfig { test_fraction: frac, min_train_per_user: min_train, seed };
        let s = stratified_split(&ds, &cfg).unwrap();
        prop_assert_eq!(s.train.len() + s.test.len(), ds.len());
        prop_assert!(s.train.same_id_maps(&ds) && s.test.same_id_maps(&ds));

        let key = |p: &subrec_core::Interaction| (p.user, p.item, p.count);
        let train: HashSet<_> = s.train.pairs().iter().map(key).collect();
        let test: HashSet<_> = s.test.pairs().iter().map(key).collect();
        prop_assert!(train.is_disjoint(&test));
        let all: HashSet<_> = ds.pairs().iter().map(key).collect();
        prop_assert_eq!(train.union(&test).copied().collect::<HashSet<_>>(), all);

        let full = ds.user_items();
        let held = s.test.user_items();
        for u in 0..ds.n_users() {
            let n = full.row(u).len();
            let expected = ((n as f64 * frac + 1e-9).floor() as usize).min(n.saturating_sub(min_train));
            prop_assert_eq!(held.row(u).len(), expected);
        }
        prop_assert_eq!(stratified_split(&ds, &cfg).unwrap(), s);
    }

    #[test]
    fn id_maps_round_trip(users in 1usize..40, seed in any::<u64>()) {
        let ds = random_dataset(users, 10, 1, 5, seed).unwrap();
        for (i, name) in ds.users().names().iter().enumerate() {
            prop_assert_eq!(ds.users().get(name), Some(i as u32));
            prop_assert_eq!(ds.users().name(i), Some(name.as_str()));
        }
    }
}

#[test]
fn split_is_thread_count_independent() {
    let ds = random_dataset(300, 50, 1, 20, 9).unwrap();
    let cfg = SplitConfig { seed: 17, ..SplitConfig::default() };
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| stratified_split(&ds, &cfg).unwrap());
    let b = four.install(|| stratified_split(&ds, &cfg).unwrap());
    assert_eq!(a, b);
}
