//! Pairwise ranking models trained on sampled (user, observed item,
//! unobserved item) triples.
//!
//! | variant        | x̂_ui                                                        |
//! |----------------|-------------------------------------------------------------|
//! | `Bpr`          | γ_uᵀγ_i                                                     |
//! | `TbprVanilla`  | α + β_u + β_i + γ_uᵀγ_i + θ_uᵀθ_i                           |
//! | `TbprLearnt`   | α + β_u + β_i + γ_uᵀγ_i + θ_uᵀ(E f_i) + β′ᵀf_i              |
//!
//! `θ_i` and `f_i` are the subreddit document vectors; in the vanilla
//! variant `θ_u` is the user document vector, frozen during training. The
//! learnt variant trains `θ_u`, the kernel `E` and the feature bias `β′`.
//! Plain BPR carries no biases.

mod io;
mod sample;
mod train;

use std::fmt;
use std::str::FromStr;

use crate::embeddings::TextFeatureSet;
use crate::error::{Error, Result};
use crate::matrix::{dot, ln_sigmoid, Matrix};
use crate::scorer::Scorer;

pub use io::RANK_MAGIC;
pub use sample::TripleSampler;
pub use train::{train_rank, RankTrainer, TrainConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    Bpr,
    TbprVanilla,
    TbprLearnt,
}

impl Variant {
    pub fn uses_text(self) -> bool {
        !matches!(self, Variant::Bpr)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Bpr => "bpr",
            Variant::TbprVanilla => "tbpr-vanilla",
            Variant::TbprLearnt => "tbpr-learnt",
        }
    }

    fn tag(self) -> u8 {
        match self {
            Variant::Bpr => 0,
            Variant::TbprVanilla => 1,
            Variant::TbprLearnt => 2,
        }
    }

    fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Variant::Bpr),
            1 => Some(Variant::TbprVanilla),
            2 => Some(Variant::TbprLearnt),
            _ => None,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bpr" => Ok(Variant::Bpr),
            "tbpr-vanilla" | "tbpr_vanilla" => Ok(Variant::TbprVanilla),
            "tbpr-learnt" | "tbpr_learnt" => Ok(Variant::TbprLearnt),
            _ => Err(Error::InvalidParameter(format!("unknown ranking variant `{s}`"))),
        }
    }
}

/// Linear map `E` (k′ × D) from item features into the textual rating space,
/// plus the feature bias `β′` (length D).
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingKernel {
    pub e: Matrix,
    pub feature_bias: Vec<f64>,
}

/// Parameter blocks of a [`RankModel`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Block {
    GlobalBias,
    UserBias,
    ItemBias,
    UserFactors,
    ItemFactors,
    UserText,
    ItemText,
    Kernel,
    FeatureBias,
}

impl Block {
    pub const ALL: [Block; 9] = [
        Block::GlobalBias,
        Block::UserBias,
        Block::ItemBias,
        Block::UserFactors,
        Block::ItemFactors,
        Block::UserText,
        Block::ItemText,
        Block::Kernel,
        Block::FeatureBias,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Block::GlobalBias => "global bias",
            Block::UserBias => "user bias",
            Block::ItemBias => "item bias",
            Block::UserFactors => "user factors",
            Block::ItemFactors => "item factors",
            Block::UserText => "user text factors",
            Block::ItemText => "item text factors",
            Block::Kernel => "embedding kernel",
            Block::FeatureBias => "feature bias",
        }
    }
}

/// Parameters of any ranking variant.
#[derive(Clone, Debug, PartialEq)]
pub struct RankModel {
    pub variant: Variant,
    pub alpha: f64,
    pub user_bias: Vec<f64>,
    pub item_bias: Vec<f64>,
    pub user_factors: Matrix,
    pub item_factors: Matrix,
    /// θ_u: frozen document vectors (vanilla) or trained factors (learnt).
    pub user_text: Option<Matrix>,
    /// θ_i copied into the model when the vanilla variant trains its
    /// textual factors; otherwise θ_i is read from the features.
    pub item_text: Option<Matrix>,
    pub kernel: Option<EmbeddingKernel>,
    /// Content hash of the features the model was trained against.
    pub feature_hash: Option<[u8; 32]>,
}

impl RankModel {
    pub fn n_users(&self) -> usize {
        self.user_factors.rows()
    }

    pub fn n_items(&self) -> usize {
        self.item_factors.rows()
    }

    pub fn k(&self) -> usize {
        self.user_factors.cols()
    }

    /// Width of θ_u, or 0 for plain BPR.
    pub fn text_k(&self) -> usize {
        self.user_text.as_ref().map_or(0, Matrix::cols)
    }

    pub fn trains_text(&self) -> bool {
        self.item_text.is_some()
    }

    /// Blocks updated by training for this variant.
    pub fn trained_blocks(&self) -> Vec<Block> {
        let mut blocks = Vec::new();
        if self.variant.uses_text() {
            blocks.extend([Block::GlobalBias, Block::UserBias, Block::ItemBias]);
        }
        blocks.extend([Block::UserFactors, Block::ItemFactors]);
        match self.variant {
            Variant::Bpr => {}
            Variant::TbprVanilla => {
                if self.trains_text() {
                    blocks.extend([Block::UserText, Block::ItemText]);
                }
            }
            Variant::TbprLearnt => blocks.extend([Block::UserText, Block::Kernel, Block::FeatureBias]),
        }
        blocks
    }

    pub fn block(&self, block: Block) -> Option<&[f64]> {
        match block {
            Block::GlobalBias => Some(std::slice::from_ref(&self.alpha)),
            Block::UserBias => Some(&self.user_bias),
            Block::ItemBias => Some(&self.item_bias),
            Block::UserFactors => Some(self.user_factors.as_slice()),
            Block::ItemFactors => Some(self.item_factors.as_slice()),
            Block::UserText => self.user_text.as_ref().map(Matrix::as_slice),
            Block::ItemText => self.item_text.as_ref().map(Matrix::as_slice),
            Block::Kernel => self.kernel.as_ref().map(|k| k.e.as_slice()),
            Block::FeatureBias => self.kernel.as_ref().map(|k| k.feature_bias.as_slice()),
        }
    }

    pub fn block_mut(&mut self, block: Block) -> Option<&mut [f64]> {
        match block {
            Block::GlobalBias => Some(std::slice::from_mut(&mut self.alpha)),
            Block::UserBias => Some(&mut self.user_bias),
            Block::ItemBias => Some(&mut self.item_bias),
            Block::UserFactors => Some(self.user_factors.as_mut_slice()),
            Block::ItemFactors => Some(self.item_factors.as_mut_slice()),
            Block::UserText => self.user_text.as_mut().map(Matrix::as_mut_slice),
            Block::ItemText => self.item_text.as_mut().map(Matrix::as_mut_slice),
            Block::Kernel => self.kernel.as_mut().map(|k| k.e.as_mut_slice()),
            Block::FeatureBias => self.kernel.as_mut().map(|k| k.feature_bias.as_mut_slice()),
        }
    }

    /// ‖Θ‖² over the trained blocks.
    pub fn trained_squared_norm(&self) -> f64 {
        self.trained_blocks()
            .into_iter()
            .filter_map(|b| self.block(b))
            .map(|v| v.iter().map(|x| x * x).sum::<f64>())
            .sum()
    }

    /// Checks that `features` fits the variant and the model's dimensions.
    pub fn check_features(&self, features: Option<&TextFeatureSet>) -> Result<()> {
        match (self.variant.uses_text(), features) {
            (false, None) => Ok(()),
            (false, Some(_)) => Err(Error::FeatureMismatch("plain BPR takes no text features".into())),
            (true, None) => Err(Error::FeatureMismatch(format!("{} requires text features", self.variant))),
            (true, Some(f)) => {
                if f.n_items() != self.n_items() {
                    return Err(Error::FeatureMismatch(format!(
                        "features cover {} items, model has {}",
                        f.n_items(),
                        self.n_items()
                    )));
                }
                let expected = match self.variant {
                    Variant::TbprVanilla => self.text_k(),
                    _ => self.kernel.as_ref().map_or(0, |k| k.e.cols()),
                };
                if f.dim() != expected {
                    return Err(Error::FeatureMismatch(format!(
                        "feature dimension {} does not match model ({expected})",
                        f.dim()
                    )));
                }
                Ok(())
            }
        }
    }

    fn check_index(&self, user: usize, item: usize) -> Result<()> {
        if user >= self.n_users() {
            return Err(Error::OutOfRange { what: "user", index: user, size: self.n_users() });
        }
        if item >= self.n_items() {
            return Err(Error::OutOfRange { what: "item", index: item, size: self.n_items() });
        }
        Ok(())
    }

    /// θ_i for the vanilla variant.
    fn item_theta<'a>(&'a self, features: &'a TextFeatureSet, item: usize) -> &'a [f64] {
        match &self.item_text {
            Some(m) => m.row(item),
            None => features.item_vectors().row(item),
        }
    }

    fn view<'a>(&'a self, features: Option<&'a TextFeatureSet>, u: usize, i: usize, j: usize) -> TripleView<'a> {
        let gu = self.user_factors.row(u);
        let gi = self.item_factors.row(i);
        let gj = self.item_factors.row(j);
        let biases = (self.item_bias[i], self.item_bias[j]);
        let text = match (self.variant, features) {
            (Variant::Bpr, _) | (_, None) => TextView::None,
            (Variant::TbprVanilla, Some(f)) => TextView::Vanilla {
                theta_u: self.user_text.as_ref().expect("vanilla model has θ_u").row(u),
                theta_i: self.item_theta(f, i),
                theta_j: self.item_theta(f, j),
            },
            (Variant::TbprLearnt, Some(f)) => {
                let kernel = self.kernel.as_ref().expect("learnt model has a kernel");
                TextView::Learnt {
                    theta_u: self.user_text.as_ref().expect("learnt model has θ_u").row(u),
                    e: kernel.e.as_slice(),
                    feature_bias: &kernel.feature_bias,
                    f_i: f.item_vectors().row(i),
                    f_j: f.item_vectors().row(j),
                }
            }
        };
        TripleView { gu, gi, gj, biases, text }
    }
}

/// Borrowed parameters touched by one (u, i, j) triple.
pub(crate) struct TripleView<'a> {
    pub gu: &'a [f64],
    pub gi: &'a [f64],
    pub gj: &'a [f64],
    /// (β_i, β_j)
    pub biases: (f64, f64),
    pub text: TextView<'a>,
}

pub(crate) enum TextView<'a> {
    None,
    Vanilla {
        theta_u: &'a [f64],
        theta_i: &'a [f64],
        theta_j: &'a [f64],
    },
    Learnt {
        theta_u: &'a [f64],
        /// Row-major k′ × D.
        e: &'a [f64],
        feature_bias: &'a [f64],
        f_i: &'a [f64],
        f_j: &'a [f64],
    },
}

/// ∂x̂_uij/∂p for every parameter a triple touches. α and β_u cancel in the
/// difference and have zero gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct TripleGradient {
    pub user_factors: Vec<f64>,
    pub pos_item_factors: Vec<f64>,
    pub neg_item_factors: Vec<f64>,
    pub pos_item_bias: f64,
    pub neg_item_bias: f64,
    pub user_text: Option<Vec<f64>>,
    pub pos_item_text: Option<Vec<f64>>,
    pub neg_item_text: Option<Vec<f64>>,
    /// Row-major k′ × D.
    pub kernel: Option<Vec<f64>>,
    pub feature_bias: Option<Vec<f64>>,
}

/// `E v` for row-major `e` with `v.len()` columns.
fn project(e: &[f64], v: &[f64]) -> Vec<f64> {
    e.chunks_exact(v.len()).map(|row| dot(row, v)).collect()
}

impl TripleView<'_> {
    /// x̂_uij = x̂_ui − x̂_uj. α and β_u cancel exactly and are left out.
    pub fn x_uij(&self) -> f64 {
        let mut x = dot(self.gu, self.gi) - dot(self.gu, self.gj);
        match &self.text {
            TextView::None => {}
            TextView::Vanilla { theta_u, theta_i, theta_j } => {
                x += self.biases.0 - self.biases.1;
                x += dot(theta_u, theta_i) - dot(theta_u, theta_j);
            }
            TextView::Learnt { theta_u, e, feature_bias, f_i, f_j } => {
                x += self.biases.0 - self.biases.1;
                x += dot(theta_u, &project(e, f_i)) - dot(theta_u, &project(e, f_j));
                x += dot(feature_bias, f_i) - dot(feature_bias, f_j);
            }
        }
        x
    }

    pub fn gradient(&self, trains_vanilla_text: bool) -> TripleGradient {
        let user_factors = self.gi.iter().zip(self.gj).map(|(a, b)| a - b).collect();
        let mut g = TripleGradient {
            user_factors,
            pos_item_factors: self.gu.to_vec(),
            neg_item_factors: self.gu.iter().map(|v| -v).collect(),
            pos_item_bias: 0.0,
            neg_item_bias: 0.0,
            user_text: None,
            pos_item_text: None,
            neg_item_text: None,
            kernel: None,
            feature_bias: None,
        };
        match &self.text {
            TextView::None => {}
            TextView::Vanilla { theta_u, theta_i, theta_j } => {
                g.pos_item_bias = 1.0;
                g.neg_item_bias = -1.0;
                if trains_vanilla_text {
                    g.user_text = Some(theta_i.iter().zip(*theta_j).map(|(a, b)| a - b).collect());
                    g.pos_item_text = Some(theta_u.to_vec());
                    g.neg_item_text = Some(theta_u.iter().map(|v| -v).collect());
                }
            }
            TextView::Learnt { theta_u, e, f_i, f_j, .. } => {
                g.pos_item_bias = 1.0;
                g.neg_item_bias = -1.0;
                let diff: Vec<f64> = f_i.iter().zip(*f_j).map(|(a, b)| a - b).collect();
                g.user_text = Some(project(e, &diff));
                let mut kernel = Vec::with_capacity(theta_u.len() * diff.len());
                for t in theta_u.iter() {
                    kernel.extend(diff.iter().map(|d| t * d));
                }
                g.kernel = Some(kernel);
                g.feature_bias = Some(diff);
            }
        }
        g
    }
}

/// x̂_ui for one user and item.
pub fn score(model: &RankModel, features: Option<&TextFeatureSet>, user: usize, item: usize) -> Result<f64> {
    model.check_features(features)?;
    model.check_index(user, item)?;
    let mut x = dot(model.user_factors.row(user), model.item_factors.row(item));
    match (model.variant, features) {
        (Variant::Bpr, _) | (_, None) => {}
        (Variant::TbprVanilla, Some(f)) => {
            let theta_u = model.user_text.as_ref().expect("vanilla model has θ_u").row(user);
            x += model.alpha + model.user_bias[user] + model.item_bias[item];
            x += dot(theta_u, model.item_theta(f, item));
        }
        (Variant::TbprLearnt, Some(f)) => {
            let theta_u = model.user_text.as_ref().expect("learnt model has θ_u").row(user);
            let kernel = model.kernel.as_ref().expect("learnt model has a kernel");
            let f_i = f.item_vectors().row(item);
            x += model.alpha + model.user_bias[user] + model.item_bias[item];
            x += dot(theta_u, &kernel.e.mul_vec(f_i));
            x += dot(&kernel.feature_bias, f_i);
        }
    }
    Ok(x)
}

/// x̂_uij = x̂_ui − x̂_uj; positive when `u` prefers `i` over `j`.
pub fn triple_score(
    model: &RankModel,
    features: Option<&TextFeatureSet>,
    user: usize,
    pos: usize,
    neg: usize,
) -> Result<f64> {
    model.check_features(features)?;
    model.check_index(user, pos)?;
    model.check_index(user, neg)?;
    Ok(model.view(features, user, pos, neg).x_uij())
}

/// Analytic gradient of x̂_uij with respect to every touched parameter.
pub fn triple_gradient(
    model: &RankModel,
    features: Option<&TextFeatureSet>,
    user: usize,
    pos: usize,
    neg: usize,
) -> Result<TripleGradient> {
    model.check_features(features)?;
    model.check_index(user, pos)?;
    model.check_index(user, neg)?;
    Ok(model.view(features, user, pos, neg).gradient(model.trains_text()))
}

/// BPR-OPT: `Σ ln σ(x̂_uij) − λ ‖Θ‖²` over the given triples, with Θ the
/// variant's trained blocks.
pub fn bpr_opt_value(
    model: &RankModel,
    features: Option<&TextFeatureSet>,
    triples: &[(usize, usize, usize)],
    lambda: f64,
) -> Result<f64> {
    let mut total = 0.0;
    for &(u, i, j) in triples {
        total += ln_sigmoid(triple_score(model, features, u, i, j)?);
    }
    Ok(total - lambda * model.trained_squared_norm())
}

/// A model bound to its features, with per-item text terms precomputed.
pub struct RankScorer<'a> {
    model: &'a RankModel,
    /// θ_i (vanilla) or E f_i (learnt), one row per item.
    item_text: Option<Matrix>,
    /// β′ᵀf_i per item (learnt only).
    feature_bias: Option<Vec<f64>>,
}

impl<'a> RankScorer<'a> {
    /// Validates the pairing, including the recorded feature hash.
    pub fn new(model: &'a RankModel, features: Option<&TextFeatureSet>) -> Result<Self> {
        model.check_features(features)?;
        if let (Some(expected), Some(f)) = (model.feature_hash, features) {
            if f.content_hash() != expected {
                return Err(Error::FeatureMismatch("features differ from the ones the model was trained with".into()));
            }
        }
        let (item_text, feature_bias) = match (model.variant, features) {
            (Variant::TbprVanilla, Some(f)) => {
                (Some(model.item_text.clone().unwrap_or_else(|| f.item_vectors().clone())), None)
            }
            (Variant::TbprLearnt, Some(f)) => {
                let kernel = model.kernel.as_ref().expect("learnt model has a kernel");
                let mut proj = Matrix::zeros(model.n_items(), kernel.e.rows());
                let mut fb = Vec::with_capacity(model.n_items());
                for (i, f_i) in f.item_vectors().iter_rows().enumerate() {
                    proj.row_mut(i).copy_from_slice(&kernel.e.mul_vec(f_i));
                    fb.push(dot(&kernel.feature_bias, f_i));
                }
                (Some(proj), Some(fb))
            }
            _ => (None, None),
        };
        Ok(Self { model, item_text, feature_bias })
    }

    pub fn model(&self) -> &RankModel {
        self.model
    }
}

impl Scorer for RankScorer<'_> {
    fn score(&self, user: usize, item: usize) -> f64 {
        let m = self.model;
        let mut x = dot(m.user_factors.row(user), m.item_factors.row(item));
        if let Some(text) = &self.item_text {
            let theta_u = m.user_text.as_ref().expect("text variant has θ_u").row(user);
            x += m.alpha + m.user_bias[user] + m.item_bias[item];
            x += dot(theta_u, text.row(item));
        }
        if let Some(fb) = &self.feature_bias {
            x += fb[item];
        }
        x
    }
}
