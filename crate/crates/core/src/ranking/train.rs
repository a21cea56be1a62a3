//! Stochastic gradient ascent on BPR-OPT.
//!
//! For a sampled triple every touched trained parameter moves by
//! `lr · (σ(−x̂_uij) · ∂x̂_uij/∂p − λ · p)`. α and β_u have zero gradient in
//! x̂_uij and are never touched by a triple. An epoch with zero samples
//! applies the regularizer alone, shrinking every trained block by
//! `1 − lr·λ`.

use rayon::prelude::*;

use super::{Block, EmbeddingKernel, RankModel, TextView, TripleSampler, TripleView, Variant};
use crate::embeddings::TextFeatureSet;
use crate::error::{invalid, Error, Result};
use crate::hogwild::AtomicMatrix;
use crate::interactions::{InteractionDataset, UserItems};
use crate::matrix::{sigmoid, Matrix};
use crate::rng;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    /// Width of γ.
    pub k: usize,
    /// Width of the trained θ_u in the learnt variant.
    pub text_k: usize,
    pub learning_rate: f64,
    /// λ_Θ, applied uniformly to every trained block.
    pub lambda: f64,
    pub epochs: usize,
    /// Triples per epoch; `None` means one per training pair.
    pub samples_per_epoch: Option<usize>,
    pub seed: u64,
    /// Vanilla variant only: train θ_u and θ_i instead of freezing them.
    pub train_text: bool,
    /// Standard deviation of the Gaussian initialization.
    pub init_std: f64,
    /// Lock-free parallel updates across sampler shards. Waives determinism.
    pub parallel: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::for_variant(Variant::Bpr)
    }
}

impl TrainConfig {
    pub fn for_variant(variant: Variant) -> Self {
        Self {
            k: if variant == Variant::Bpr { 32 } else { 16 },
            text_k: 16,
            learning_rate: 0.05,
            lambda: 0.01,
            epochs: 30,
            samples_per_epoch: None,
            seed: 0,
            train_text: false,
            init_std: 0.1,
            parallel: false,
        }
    }

    fn validate(&self, variant: Variant) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid(format!("learning rate must be > 0, got {}", self.learning_rate)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(invalid(format!("lambda must be ≥ 0, got {}", self.lambda)));
        }
        if self.epochs == 0 {
            return Err(invalid("epochs must be at least 1"));
        }
        if self.k == 0 {
            return Err(invalid("k must be at least 1"));
        }
        if variant == Variant::TbprLearnt && self.text_k == 0 {
            return Err(invalid("text k must be at least 1"));
        }
        if self.train_text && variant != Variant::TbprVanilla {
            return Err(invalid("training textual factors is a vanilla t-BPR option"));
        }
        if !(self.init_std >= 0.0 && self.init_std.is_finite()) {
            return Err(invalid("init std must be finite and ≥ 0"));
        }
        Ok(())
    }
}

/// Row access to parameter blocks. Bias blocks have width 1; the kernel and
/// feature bias are a single row each.
trait ParamRows {
    fn read(&self, block: Block, row: usize, out: &mut [f64]);
    fn write(&mut self, block: Block, row: usize, values: &[f64]);
}

impl ParamRows for RankModel {
    fn read(&self, block: Block, row: usize, out: &mut [f64]) {
        let w = out.len();
        let src = self.block(block).expect("block present");
        out.copy_from_slice(&src[row * w..(row + 1) * w]);
    }

    fn write(&mut self, block: Block, row: usize, values: &[f64]) {
        let w = values.len();
        let dst = self.block_mut(block).expect("block present");
        dst[row * w..(row + 1) * w].copy_from_slice(values);
    }
}

/// Every model block mirrored in atomic cells for the parallel mode.
struct SharedParams {
    blocks: Vec<Option<AtomicMatrix>>,
}

impl SharedParams {
    fn from_model(model: &RankModel) -> Self {
        let blocks = Block::ALL
            .iter()
            .map(|&b| {
                model.block(b).map(|v| {
                    let width = block_width(model, b);
                    AtomicMatrix::from_matrix(&Matrix::from_vec(v.len() / width.max(1), width, v.to_vec()))
                })
            })
            .collect();
        Self { blocks }
    }

    fn write_back(self, model: &mut RankModel, trained: &[Block]) {
        for (b, cells) in Block::ALL.iter().zip(self.blocks) {
            if let (true, Some(cells)) = (trained.contains(b), cells) {
                model.block_mut(*b).expect("block present").copy_from_slice(cells.into_matrix().as_slice());
            }
        }
    }

    fn cells(&self, block: Block) -> &AtomicMatrix {
        self.blocks[block as usize].as_ref().expect("block present")
    }
}

#[derive(Clone, Copy)]
struct SharedHandle<'a>(&'a SharedParams);

impl ParamRows for SharedHandle<'_> {
    fn read(&self, block: Block, row: usize, out: &mut [f64]) {
        self.0.cells(block).load_row(row, out);
    }

    fn write(&mut self, block: Block, row: usize, values: &[f64]) {
        self.0.cells(block).store_row(row, values);
    }
}

fn block_width(model: &RankModel, block: Block) -> usize {
    match block {
        Block::GlobalBias | Block::UserBias | Block::ItemBias => 1,
        Block::UserFactors | Block::ItemFactors => model.k(),
        Block::UserText | Block::ItemText => model.text_k(),
        Block::Kernel => model.kernel.as_ref().map_or(0, |k| k.e.as_slice().len()),
        Block::FeatureBias => model.kernel.as_ref().map_or(0, |k| k.feature_bias.len()),
    }
}

/// Shape information the update kernel needs.
#[derive(Clone, Copy)]
struct Layout {
    variant: Variant,
    k: usize,
    text_k: usize,
    kernel_len: usize,
    dim: usize,
    trains_text: bool,
}

/// Per-thread scratch copies of the parameters one triple touches.
struct Local {
    gu: Vec<f64>,
    gi: Vec<f64>,
    gj: Vec<f64>,
    bias: [f64; 2],
    thu: Vec<f64>,
    thi: Vec<f64>,
    thj: Vec<f64>,
    e: Vec<f64>,
    fb: Vec<f64>,
}

impl Local {
    fn new(l: &Layout) -> Self {
        Self {
            gu: vec![0.0; l.k],
            gi: vec![0.0; l.k],
            gj: vec![0.0; l.k],
            bias: [0.0; 2],
            thu: vec![0.0; l.text_k],
            thi: vec![0.0; l.text_k],
            thj: vec![0.0; l.text_k],
            e: vec![0.0; l.kernel_len],
            fb: vec![0.0; l.dim],
        }
    }
}

#[inline]
fn ascend(params: &mut [f64], grad: &[f64], weight: f64, lr: f64, lambda: f64) {
    for (p, g) in params.iter_mut().zip(grad) {
        *p += lr * (weight * g - lambda * *p);
    }
}

/// One SGD step on triple (u, i, j). Returns x̂_uij before the update.
#[allow(clippy::too_many_arguments)]
fn step<P: ParamRows>(
    params: &mut P,
    layout: &Layout,
    features: Option<&TextFeatureSet>,
    (u, i, j): (usize, usize, usize),
    lr: f64,
    lambda: f64,
    l: &mut Local,
) -> f64 {
    params.read(Block::UserFactors, u, &mut l.gu);
    params.read(Block::ItemFactors, i, &mut l.gi);
    params.read(Block::ItemFactors, j, &mut l.gj);
    if layout.variant.uses_text() {
        params.read(Block::ItemBias, i, &mut l.bias[..1]);
        params.read(Block::ItemBias, j, &mut l.bias[1..]);
        params.read(Block::UserText, u, &mut l.thu);
    }
    let f = features.filter(|_| layout.variant.uses_text());
    match layout.variant {
        Variant::Bpr => {}
        Variant::TbprVanilla => {
            if layout.trains_text {
                params.read(Block::ItemText, i, &mut l.thi);
                params.read(Block::ItemText, j, &mut l.thj);
            } else {
                let f = f.expect("vanilla training has features");
                l.thi.copy_from_slice(f.item_vectors().row(i));
                l.thj.copy_from_slice(f.item_vectors().row(j));
            }
        }
        Variant::TbprLearnt => {
            params.read(Block::Kernel, 0, &mut l.e);
            params.read(Block::FeatureBias, 0, &mut l.fb);
        }
    }

    let (x, grad) = {
        let text = match layout.variant {
            Variant::Bpr => TextView::None,
            Variant::TbprVanilla => TextView::Vanilla { theta_u: &l.thu, theta_i: &l.thi, theta_j: &l.thj },
            Variant::TbprLearnt => {
                let f = f.expect("learnt training has features");
                TextView::Learnt {
                    theta_u: &l.thu,
                    e: &l.e,
                    feature_bias: &l.fb,
                    f_i: f.item_vectors().row(i),
                    f_j: f.item_vectors().row(j),
                }
            }
        };
        let view = TripleView { gu: &l.gu, gi: &l.gi, gj: &l.gj, biases: (l.bias[0], l.bias[1]), text };
        (view.x_uij(), view.gradient(layout.trains_text))
    };
    let w = sigmoid(-x);

    ascend(&mut l.gu, &grad.user_factors, w, lr, lambda);
    ascend(&mut l.gi, &grad.pos_item_factors, w, lr, lambda);
    ascend(&mut l.gj, &grad.neg_item_factors, w, lr, lambda);
    params.write(Block::UserFactors, u, &l.gu);
    params.write(Block::ItemFactors, i, &l.gi);
    params.write(Block::ItemFactors, j, &l.gj);
    if layout.variant.uses_text() {
        ascend(&mut l.bias[..1], &[grad.pos_item_bias], w, lr, lambda);
        ascend(&mut l.bias[1..], &[grad.neg_item_bias], w, lr, lambda);
        params.write(Block::ItemBias, i, &l.bias[..1]);
        params.write(Block::ItemBias, j, &l.bias[1..]);
    }
    if let Some(g) = &grad.user_text {
        ascend(&mut l.thu, g, w, lr, lambda);
        params.write(Block::UserText, u, &l.thu);
    }
    if let (Some(gi), Some(gj)) = (&grad.pos_item_text, &grad.neg_item_text) {
        ascend(&mut l.thi, gi, w, lr, lambda);
        ascend(&mut l.thj, gj, w, lr, lambda);
        params.write(Block::ItemText, i, &l.thi);
        params.write(Block::ItemText, j, &l.thj);
    }
    if let Some(g) = &grad.kernel {
        ascend(&mut l.e, g, w, lr, lambda);
        params.write(Block::Kernel, 0, &l.e);
    }
    if let Some(g) = &grad.feature_bias {
        ascend(&mut l.fb, g, w, lr, lambda);
        params.write(Block::FeatureBias, 0, &l.fb);
    }
    x
}

/// Epoch-by-epoch trainer. [`train_rank`] drives it to completion.
pub struct RankTrainer<'a> {
    pub(super) model: RankModel,
    features: Option<&'a TextFeatureSet>,
    items: UserItems,
    config: TrainConfig,
    layout: Layout,
    samples: usize,
    epoch: usize,
}

impl<'a> RankTrainer<'a> {
    pub fn new(
        variant: Variant,
        train: &InteractionDataset,
        features: Option<&'a TextFeatureSet>,
        config: &TrainConfig,
    ) -> Result<Self> {
        config.validate(variant)?;
        if train.is_empty() {
            return Err(Error::Empty("training set has no pairs".into()));
        }
        match (variant.uses_text(), features) {
            (true, None) => return Err(Error::FeatureMismatch(format!("{variant} requires text features"))),
            (false, Some(_)) => return Err(Error::FeatureMismatch("plain BPR takes no text features".into())),
            _ => {}
        }
        if let Some(f) = features {
            if f.item_names() != train.items().names() || f.user_names() != train.users().names() {
                return Err(Error::FeatureMismatch("feature rows are not aligned with the dataset".into()));
            }
        }

        let (n_users, n_items) = (train.n_users(), train.n_items());
        let mut g = rng::seeded(config.seed);
        let user_factors = Matrix::gaussian(n_users, config.k, config.init_std, &mut g);
        let item_factors = Matrix::gaussian(n_items, config.k, config.init_std, &mut g);
        let (user_text, item_text, kernel) = match (variant, features) {
            (Variant::TbprVanilla, Some(f)) => {
                (Some(f.user_vectors().clone()), config.train_text.then(|| f.item_vectors().clone()), None)
            }
            (Variant::TbprLearnt, Some(f)) => {
                let theta = Matrix::gaussian(n_users, config.text_k, config.init_std, &mut g);
                let e = Matrix::gaussian(config.text_k, f.dim(), config.init_std, &mut g);
                (Some(theta), None, Some(EmbeddingKernel { e, feature_bias: vec![0.0; f.dim()] }))
            }
            _ => (None, None, None),
        };
        let model = RankModel {
            variant,
            alpha: 0.0,
            user_bias: vec![0.0; n_users],
            item_bias: vec![0.0; n_items],
            user_factors,
            item_factors,
            user_text,
            item_text,
            kernel,
            feature_hash: features.map(TextFeatureSet::content_hash),
        };
        let layout = Layout {
            variant,
            k: config.k,
            text_k: model.text_k(),
            kernel_len: block_width(&model, Block::Kernel),
            dim: features.map_or(0, TextFeatureSet::dim),
            trains_text: model.trains_text(),
        };
        let items = train.user_items();
        // Fail early when no triple can be drawn.
        TripleSampler::new(&items)?;
        Ok(Self {
            model,
            features,
            items,
            config: config.clone(),
            layout,
            samples: config.samples_per_epoch.unwrap_or(train.len()),
            epoch: 0,
        })
    }

    pub fn model(&self) -> &RankModel {
        &self.model
    }

    pub fn epochs_done(&self) -> usize {
        self.epoch
    }

    /// Applies one SGD step to an explicit triple, returning x̂_uij before it.
    pub fn apply_triple(&mut self, u: usize, i: usize, j: usize) -> f64 {
        let mut local = Local::new(&self.layout);
        step(
            &mut self.model,
            &self.layout,
            self.features,
            (u, i, j),
            self.config.learning_rate,
            self.config.lambda,
            &mut local,
        )
    }

    pub fn epoch(&mut self) -> Result<()> {
        let epoch = self.epoch as u64;
        let (lr, lambda) = (self.config.learning_rate, self.config.lambda);
        let sampler = TripleSampler::new(&self.items)?;
        if self.samples == 0 {
            let shrink = 1.0 - lr * lambda;
            for b in self.model.trained_blocks() {
                if let Some(v) = self.model.block_mut(b) {
                    v.iter_mut().for_each(|p| *p *= shrink);
                }
            }
        } else if self.config.parallel {
            let shared = SharedParams::from_model(&self.model);
            let shards = rayon::current_num_threads().max(1).min(self.samples);
            let (layout, features, seed, samples) = (self.layout, self.features, self.config.seed, self.samples);
            (0..shards).into_par_iter().for_each(|shard| {
                let mut g = rng::substream(seed, rng::stream_id(epoch + 1, shard as u64));
                let mut handle = SharedHandle(&shared);
                let mut local = Local::new(&layout);
                let n = samples / shards + usize::from(shard < samples % shards);
                for _ in 0..n {
                    let t = sampler.sample(&mut g);
                    step(&mut handle, &layout, features, t, lr, lambda, &mut local);
                }
            });
            let trained = self.model.trained_blocks();
            shared.write_back(&mut self.model, &trained);
        } else {
            let mut g = rng::substream(self.config.seed, rng::stream_id(epoch + 1, 0));
            let mut local = Local::new(&self.layout);
            for _ in 0..self.samples {
                let t = sampler.sample(&mut g);
                step(&mut self.model, &self.layout, self.features, t, lr, lambda, &mut local);
            }
        }
        self.epoch += 1;
        for b in self.model.trained_blocks() {
            if self.model.block(b).is_some_and(|v| v.iter().any(|x| !x.is_finite())) {
                return Err(Error::NonFinite { block: b.name().into(), epoch: self.epoch });
            }
        }
        Ok(())
    }

    pub fn into_model(self) -> RankModel {
        self.model
    }
}

/// Trains a ranking model of the given variant. `features` must be aligned
/// with `train` and is required exactly for the text variants.
pub fn train_rank(
    variant: Variant,
    train: &InteractionDataset,
    features: Option<&TextFeatureSet>,
    config: &TrainConfig,
) -> Result<RankModel> {
    let mut trainer = RankTrainer::new(variant, train, features, config)?;
    for _ in 0..config.epochs {
        trainer.epoch()?;
        log::debug!("{variant} epoch {} done", trainer.epochs_done());
    }
    Ok(trainer.into_model())
}
