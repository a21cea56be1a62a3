//! Implicit-feedback matrix factorization by alternating least squares.
//!
//! Minimizes
//!
//! ```text
//! Σ_{u,i} c_ui (p_ui − γ_uᵀγ_i)² + λ (Σ_u ‖γ_u‖² + Σ_i ‖γ_i‖²)
//! ```
//!
//! over every cell of the user × item matrix, with `p_ui = 1` on observed
//! pairs and 0 elsewhere, and confidence `c_ui = 1 + α·count` on observed
//! pairs and 1 elsewhere. Each half-sweep solves every row of one side
//! exactly with the other side fixed, so the objective never increases.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::binfmt;
use crate::error::{invalid, Error, Result};
use crate::interactions::InteractionDataset;
use crate::matrix::{dot, Matrix};
use crate::rng;
use crate::scorer::Scorer;

pub const ALS_MAGIC: &[u8; 4] = b"SRAL";
const ALS_VERSION: u32 = 1;
const PIVOT_TOLERANCE: f64 = 1e-13;

#[derive(Clone, Debug, PartialEq)]
pub struct AlsConfig {
    pub k: usize,
    pub lambda: f64,
    pub confidence_alpha: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for AlsConfig {
    fn default() -> Self {
        Self { k: 128, lambda: 0.01, confidence_alpha: 0.0, iterations: 15, seed: 0 }
    }
}

impl AlsConfig {
    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(invalid("k must be at least 1"));
        }
        if self.iterations == 0 {
            return Err(invalid("iterations must be at least 1"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(invalid(format!("lambda must be finite and ≥ 0, got {}", self.lambda)));
        }
        if !(self.confidence_alpha >= 0.0 && self.confidence_alpha.is_finite()) {
            return Err(invalid(format!("confidence alpha must be finite and ≥ 0, got {}", self.confidence_alpha)));
        }
        Ok(())
    }
}

/// Trained ALS factors.
#[derive(Clone, Debug, PartialEq)]
pub struct AlsModel {
    pub lambda: f64,
    pub confidence_alpha: f64,
    pub user_factors: Matrix,
    pub item_factors: Matrix,
}

impl AlsModel {
    pub fn k(&self) -> usize {
        self.user_factors.cols()
    }

    pub fn n_users(&self) -> usize {
        self.user_factors.rows()
    }

    pub fn n_items(&self) -> usize {
        self.item_factors.rows()
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        binfmt::write_header(&mut w, ALS_MAGIC, ALS_VERSION)?;
        binfmt::write_u64(&mut w, self.k() as u64)?;
        binfmt::write_f64(&mut w, self.lambda)?;
        binfmt::write_f64(&mut w, self.confidence_alpha)?;
        binfmt::write_matrix(&mut w, &self.user_factors)?;
        binfmt::write_matrix(&mut w, &self.item_factors)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        binfmt::read_header(&mut r, ALS_MAGIC, ALS_VERSION)?;
        let k = binfmt::read_u64(&mut r)? as usize;
        let lambda = binfmt::read_f64(&mut r)?;
        let confidence_alpha = binfmt::read_f64(&mut r)?;
        let user_factors = binfmt::read_matrix(&mut r)?;
        let item_factors = binfmt::read_matrix(&mut r)?;
        binfmt::expect_eof(&mut r)?;
        if user_factors.cols() != k || item_factors.cols() != k {
            return Err(Error::Format("factor width differs from k".into()));
        }
        Ok(Self { lambda, confidence_alpha, user_factors, item_factors })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_binary(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_binary(BufReader::new(File::open(path)?))
    }

    /// `side,index,f0,...` rows, users then items.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "side,index")?;
        for f in 0..self.k() {
            write!(w, ",f{f}")?;
        }
        writeln!(w)?;
        for (side, m) in [("user", &self.user_factors), ("item", &self.item_factors)] {
            for (idx, row) in m.iter_rows().enumerate() {
                write!(w, "{side},{idx}")?;
                for v in row {
                    write!(w, ",{v:?}")?;
                }
                writeln!(w)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

impl Scorer for AlsModel {
    fn score(&self, user: usize, item: usize) -> f64 {
        dot(self.user_factors.row(user), self.item_factors.row(item))
    }
}

/// `γ_uᵀγ_i` with bounds checks.
pub fn score_als(model: &AlsModel, user: usize, item: usize) -> Result<f64> {
    if user >= model.n_users() {
        return Err(Error::OutOfRange { what: "user", index: user, size: model.n_users() });
    }
    if item >= model.n_items() {
        return Err(Error::OutOfRange { what: "item", index: item, size: model.n_items() });
    }
    Ok(model.score(user, item))
}

/// Rows of observed (column, confidence) entries.
type ConfidenceRows = Vec<Vec<(u32, f64)>>;

fn confidence_rows(train: &InteractionDataset, alpha: f64) -> (ConfidenceRows, ConfidenceRows) {
    let mut by_user = vec![Vec::new(); train.n_users()];
    let mut by_item = vec![Vec::new(); train.n_items()];
    for p in train.pairs() {
        let c = 1.0 + alpha * f64::from(p.count);
        by_user[p.user as usize].push((p.item, c));
        by_item[p.item as usize].push((p.user, c));
    }
    (by_user, by_item)
}

/// Evaluates the ALS objective with the sparse decomposition
/// `Σ_all x² + Σ_obs [c (1 − x)² − x²]`, where `Σ_all x² = Σ_u γ_uᵀ (YᵀY) γ_u`.
pub fn als_objective(model: &AlsModel, train: &InteractionDataset) -> Result<f64> {
    if model.n_users() != train.n_users() || model.n_items() != train.n_items() {
        return Err(Error::DimensionMismatch(format!(
            "model is {}×{}, dataset is {}×{}",
            model.n_users(),
            model.n_items(),
            train.n_users(),
            train.n_items()
        )));
    }
    let gram = model.item_factors.gram();
    let mut all_cells = 0.0;
    for row in model.user_factors.iter_rows() {
        all_cells += dot(row, &gram.mul_vec(row));
    }
    let mut observed = 0.0;
    for p in train.pairs() {
        let x = model.score(p.user as usize, p.item as usize);
        let c = 1.0 + model.confidence_alpha * f64::from(p.count);
        observed += c * (1.0 - x) * (1.0 - x) - x * x;
    }
    let reg = model.lambda * (model.user_factors.squared_norm() + model.item_factors.squared_norm());
    // Rounding can push an exact-zero fit a hair below zero.
    Ok((all_cells + observed + reg).max(0.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Side {
    Users,
    Items,
}

/// Step-by-step ALS. [`train_als`] runs full iterations; tests drive
/// individual half-sweeps.
pub struct AlsTrainer<'a> {
    train: &'a InteractionDataset,
    by_user: ConfidenceRows,
    by_item: ConfidenceRows,
    model: AlsModel,
}

impl<'a> AlsTrainer<'a> {
    /// Item factors start uniform in `[0, 1/√k)`; user factors start at zero
    /// and are set by the first user half-sweep.
    pub fn new(train: &'a InteractionDataset, config: &AlsConfig) -> Result<Self> {
        config.validate()?;
        if train.is_empty() {
            return Err(Error::Empty("training set has no pairs".into()));
        }
        let mut g = rng::seeded(config.seed);
        let k = config.k;
        let item_factors = Matrix::uniform(train.n_items(), k, 0.0, 1.0 / (k as f64).sqrt(), &mut g);
        let (by_user, by_item) = confidence_rows(train, config.confidence_alpha);
        Ok(Self {
            train,
            by_user,
            by_item,
            model: AlsModel {
                lambda: config.lambda,
                confidence_alpha: config.confidence_alpha,
                user_factors: Matrix::zeros(train.n_users(), k),
                item_factors,
            },
        })
    }

    pub fn model(&self) -> &AlsModel {
        &self.model
    }

    pub fn objective(&self) -> f64 {
        als_objective(&self.model, self.train).expect("trainer dimensions match")
    }

    pub fn solve_users(&mut self) -> Result<()> {
        self.half_sweep(Side::Users)
    }

    pub fn solve_items(&mut self) -> Result<()> {
        self.half_sweep(Side::Items)
    }

    fn half_sweep(&mut self, side: Side) -> Result<()> {
        let (target, fixed, rows, name) = match side {
            Side::Users => (&mut self.model.user_factors, &self.model.item_factors, &self.by_user, "user"),
            Side::Items => (&mut self.model.item_factors, &self.model.user_factors, &self.by_item, "item"),
        };
        let k = fixed.cols();
        let gram = fixed.gram();
        let lambda = self.model.lambda;
        target.as_mut_slice().par_chunks_mut(k).enumerate().try_for_each(|(r, out)| {
            solve_row(&gram, fixed, &rows[r], lambda, out).ok_or(Error::Singular { side: name, row: r })
        })
    }

    pub fn iterate(&mut self) -> Result<()> {
        self.solve_users()?;
        self.solve_items()
    }

    pub fn into_model(self) -> AlsModel {
        self.model
    }
}

/// Solves `(G + Σ_obs (c−1) y yᵀ + λI) x = Σ_obs c y` into `out`.
/// Returns `None` when the system is not positive definite.
fn solve_row(gram: &Matrix, fixed: &Matrix, observed: &[(u32, f64)], lambda: f64, out: &mut [f64]) -> Option<()> {
    let k = gram.cols();
    let mut a = DMatrix::from_row_slice(k, k, gram.as_slice());
    let mut b = DVector::zeros(k);
    for &(j, c) in observed {
        let y = fixed.row(j as usize);
        let extra = c - 1.0;
        for p in 0..k {
            b[p] += c * y[p];
            if extra != 0.0 {
                for q in 0..k {
                    a[(p, q)] += extra * y[p] * y[q];
                }
            }
        }
    }
    for p in 0..k {
        a[(p, p)] += lambda;
    }
    let scale = (0..k).map(|p| a[(p, p)]).fold(0.0, f64::max);
    let chol = a.cholesky()?;
    // Reject numerically rank-deficient systems that slip through as tiny pivots.
    let l = chol.l_dirty();
    if (0..k).any(|p| l[(p, p)] * l[(p, p)] <= PIVOT_TOLERANCE * scale) {
        return None;
    }
    let x = chol.solve(&b);
    if !x.iter().all(|v| v.is_finite()) {
        return None;
    }
    out.copy_from_slice(x.as_slice());
    Some(())
}

/// Trains ALS for `config.iterations` full user-then-item sweeps.
pub fn train_als(train: &InteractionDataset, config: &AlsConfig) -> Result<AlsModel> {
    let mut trainer = AlsTrainer::new(train, config)?;
    for it in 0..config.iterations {
        trainer.iterate()?;
        log::debug!("als iteration {} objective {:.6}", it + 1, trainer.objective());
    }
    Ok(trainer.into_model())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_pair() -> InteractionDataset {
        InteractionDataset::from_index_pairs(1, 1, &[(0, 0)]).unwrap()
    }

    #[test]
    fn scalar_alternation_matches_closed_form() {
        // 1×1, k=1: x_u = y/(y²+λ), then y = x_u/(x_u²+λ).
        let ds = single_pair();
        let cfg = AlsConfig { k: 1, lambda: 0.01, iterations: 1, ..Default::default() };
        let mut t = AlsTrainer::new(&ds, &cfg).unwrap();
        let before = t.objective();
        assert_eq!(before, 1.0 + 0.01 * t.model().item_factors.squared_norm());
        let mut y = t.model().item_factors.get(0, 0);
        let mut x;
        for _ in 0..10 {
            t.iterate().unwrap();
            x = y / (y * y + 0.01);
            y = x / (x * x + 0.01);
            assert!((t.model().user_factors.get(0, 0) - x).abs() < 1e-12);
            assert!((t.model().item_factors.get(0, 0) - y).abs() < 1e-12);
        }
        let m = t.model();
        assert!((m.score(0, 0) - 1.0).abs() < 0.02);
        assert!(t.objective() < before);
    }

    #[test]
    fn huge_lambda_collapses_factors() {
        let ds = InteractionDataset::from_index_pairs(3, 3, &[(0, 0), (1, 1), (2, 2), (0, 2)]).unwrap();
        let cfg = AlsConfig { k: 2, lambda: 1e6, iterations: 3, ..Default::default() };
        let m = train_als(&ds, &cfg).unwrap();
        assert!(m.user_factors.squared_norm() < 1e-10);
        let obj = als_objective(&m, &ds).unwrap();
        assert!((obj - 4.0).abs() < 1e-5, "objective {obj}");
    }

    #[test]
    fn zero_factors_objective() {
        let ds = InteractionDataset::from_index_pairs(2, 3, &[(0, 0), (1, 2), (0, 1)]).unwrap();
        let m = AlsModel {
            lambda: 123.0,
            confidence_alpha: 0.0,
            user_factors: Matrix::zeros(2, 4),
            item_factors: Matrix::zeros(3, 4),
        };
        assert_eq!(als_objective(&m, &ds).unwrap(), 3.0);
    }

    #[test]
    fn scores() {
        let m = AlsModel {
            lambda: 0.0,
            confidence_alpha: 0.0,
            user_factors: Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0]]),
            item_factors: Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 1.0]]),
        };
        assert_eq!(score_als(&m, 0, 0).unwrap(), 0.0);
        assert_eq!(score_als(&m, 1, 1).unwrap(), 2.0);
        assert!(matches!(score_als(&m, 2, 0), Err(Error::OutOfRange { what: "user", .. })));
        assert!(matches!(score_als(&m, 0, 2), Err(Error::OutOfRange { what: "item", .. })));
    }

    #[test]
    fn dimension_mismatch() {
        let m = AlsModel {
            lambda: 0.0,
            confidence_alpha: 0.0,
            user_factors: Matrix::zeros(2, 1),
            item_factors: Matrix::zeros(2, 1),
        };
        assert!(matches!(als_objective(&m, &single_pair()), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn rejects_bad_parameters() {
        let ds = single_pair();
        for cfg in [
            AlsConfig { lambda: -1.0, ..Default::default() },
            AlsConfig { k: 0, ..Default::default() },
            AlsConfig { iterations: 0, ..Default::default() },
        ] {
            assert!(matches!(train_als(&ds, &cfg), Err(Error::InvalidParameter(_))));
        }
    }

    #[test]
    fn singular_system_names_the_row() {
        // λ = 0 with more factors than items leaves the user system rank deficient.
        let ds = InteractionDataset::from_index_pairs(2, 1, &[(0, 0), (1, 0)]).unwrap();
        let cfg = AlsConfig { k: 3, lambda: 0.0, iterations: 1, ..Default::default() };
        match train_als(&ds, &cfg) {
            Err(Error::Singular { side: "user", row }) => assert_eq!(row, 0),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn binary_round_trip() {
        let ds = InteractionDataset::from_index_pairs(2, 2, &[(0, 0), (1, 1)]).unwrap();
        let m = train_als(&ds, &AlsConfig { k: 3, iterations: 2, seed: 4, ..Default::default() }).unwrap();
        let mut buf = Vec::new();
        m.write_binary(&mut buf).unwrap();
        assert_eq!(AlsModel::read_binary(&buf[..]).unwrap(), m);
        let mut csv = Vec::new();
        m.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 5);
    }
}
