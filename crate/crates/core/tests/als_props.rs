use subrec_core::als::AlsTrainer;
use subrec_core::synthetic::random_dataset;
use subrec_core::{als_objective, train_als, AlsConfig};

fn config(seed: u64, alpha: f64) -> AlsConfig {
    AlsConfig { k: 8, lambda: 0.1, confidence_alpha: alpha, iterations: 5, seed }
}

#[test]
fn every_half_sweep_is_non_increasing() {
    for seed in 0..5 {
        for alpha in [0.0, 2.0] {
            let ds = random_dataset(60, 40, 2, 12, seed).unwrap();
            let mut t = AlsTrainer::new(&ds, &config(seed, alpha)).unwrap();
            let mut last = t.objective();
            for _ in 0..10 {
                t.solve_users().unwrap();
                let a = t.objective();
                assert!(a <= last + 1e-9 * last.abs(), "users: {a} > {last}");
                t.solve_items().unwrap();
                let b = t.objective();
                assert!(b <= a + 1e-9 * a.abs(), "items: {b} > {a}");
                last = b;
            }
        }
    }
}

#[test]
fn user_rows_are_local_minima() {
    let ds = random_dataset(30, 25, 2, 10, 3).unwrap();
    let mut t = AlsTrainer::new(&ds, &config(3, 1.0)).unwrap();
    t.iterate().unwrap();
    t.solve_users().unwrap();
    let base = t.model().clone();
    let f0 = als_objective(&base, &ds).unwrap();
    for u in [0, 7, 29] {
        for c in 0..base.k() {
            for eps in [1e-3, -1e-3] {
                let mut m = base.clone();
                let v = m.user_factors.get(u, c);
                m.user_factors.set(u, c, v + eps);
                let f = als_objective(&m, &ds).unwrap();
                assert!(f >= f0 - 1e-8, "row {u} coord {c}: {f} < {f0}");
            }
        }
    }
}

#[test]
fn same_seed_same_model() {
    let ds = random_dataset(40, 30, 2, 8, 1).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let a = pool.install(|| train_als(&ds, &config(4, 0.0)).unwrap());
    let b = pool.install(|| train_als(&ds, &config(4, 0.0)).unwrap());
    assert_eq!(a, b);
}
