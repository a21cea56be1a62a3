//! Throughput of the training and evaluation hot loops on synthetic data.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use subrec_core::als::AlsTrainer;
use subrec_core::embeddings::{build_document_corpus, Doc2VecTrainer};
use subrec_core::ranking::RankTrainer;
use subrec_core::synthetic::{block_comments, block_dataset, BlockDataset, CommentStyle};
use subrec_core::{
    evaluate_auc, stratified_split, train_rank, AlsConfig, Doc2VecConfig, EvalMode, RankScorer, SplitConfig, Stopwords,
    TrainConfig, Variant,
};

fn data() -> BlockDataset {
    block_dataset(2000, 500, 10, 0.1, 0.005, 3, 1).expect("valid block model")
}

fn als_sweep(c: &mut Criterion) {
    let d = data();
    let cfg = AlsConfig { k: 32, seed: 1, ..AlsConfig::default() };
    let mut t = AlsTrainer::new(&d.dataset, &cfg).unwrap();
    c.bench_function("als iteration 2000x500 k=32", |b| b.iter(|| t.iterate().unwrap()));
}

fn bpr_epoch(c: &mut Criterion) {
    let d = data();
    let cfg = TrainConfig { seed: 1, ..TrainConfig::for_variant(Variant::Bpr) };
    let mut t = RankTrainer::new(Variant::Bpr, &d.dataset, None, &cfg).unwrap();
    c.bench_function("bpr epoch 2000x500 k=32", |b| b.iter(|| t.epoch().unwrap()));
}

fn auc(c: &mut Criterion) {
    let d = data();
    let s = stratified_split(&d.dataset, &SplitConfig { seed: 1, ..SplitConfig::default() }).unwrap();
    let cfg = TrainConfig { epochs: 1, seed: 1, ..TrainConfig::for_variant(Variant::Bpr) };
    let m = train_rank(Variant::Bpr, &s.train, None, &cfg).unwrap();
    let scorer = RankScorer::new(&m, None).unwrap();
    c.bench_function("exact auc 2000x500", |b| {
        b.iter(|| black_box(evaluate_auc(&scorer, &s, EvalMode::Exact).unwrap().auc))
    });
}

fn doc2vec_epoch(c: &mut Criterion) {
    let d = data();
    let comments = block_comments(&d, &CommentStyle::default(), 1).unwrap();
    let corpus = build_document_corpus(&comments, &d.dataset, &Stopwords::english(), 1);
    let mut t =
        Doc2VecTrainer::new(&corpus, Doc2VecConfig { epochs: 1000, seed: 1, ..Doc2VecConfig::default() }).unwrap();
    c.bench_function("doc2vec epoch 2500 docs", |b| b.iter(|| t.epoch().unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = als_sweep, bpr_epoch, auc, doc2vec_epoch
}
criterion_main!(benches);
