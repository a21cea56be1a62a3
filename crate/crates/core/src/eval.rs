//! Pairwise AUC over a per-user holdout.
//!
//! For user `u`, `E(u)` pairs every held-out item `i` with every item `j` the
//! user touched in neither half. Per-user AUC is the mean of `δ(x̂_ui − x̂_uj)`
//! over `E(u)` with `δ(0) = 0.5`; the overall AUC averages the per-user values
//! over users whose `E(u)` is non-empty.

use std::collections::HashSet;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::interactions::{InteractionDataset, SplitDataset, UserItems};
use crate::rng;
use crate::scorer::Scorer;

/// Default upper bound on `Σ|E(u)|` for choosing exact evaluation.
pub const DEFAULT_PAIR_BUDGET: u64 = 50_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EvalMode {
    Exact,
    Sampled { per_user: usize, seed: u64 },
}

impl EvalMode {
    /// Exact evaluation when `Σ|E(u)|` fits the budget, otherwise sampled.
    pub fn auto(split: &SplitDataset, budget: u64, per_user: usize, seed: u64) -> Self {
        if total_pairs(split) <= budget {
            Self::Exact
        } else {
            Self::Sampled { per_user, seed }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserAuc {
    pub user: usize,
    pub auc: f64,
    pub pairs: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AucReport {
    pub auc: f64,
    pub users_evaluated: usize,
    /// Users with an empty `E(u)`, left out of the mean.
    pub users_skipped: usize,
    pub pairs_evaluated: u64,
    pub sampled: bool,
    pub per_user: Vec<UserAuc>,
}

/// Held-out items and their negatives for one user.
struct UserPairs {
    positives: Vec<usize>,
    negatives: Vec<usize>,
}

fn check_split(split: &SplitDataset) -> Result<()> {
    if !split.train.same_id_maps(&split.test) {
        return Err(invalid("train and test halves use different ID maps"));
    }
    Ok(())
}

fn user_pairs(train: &UserItems, test: &UserItems, u: usize, n_items: usize) -> Option<UserPairs> {
    let positives: Vec<usize> = test.row(u).iter().map(|&i| i as usize).collect();
    if positives.is_empty() {
        return None;
    }
    let negatives: Vec<usize> =
        (0..n_items).filter(|&j| !train.contains(u, j as u32) && !test.contains(u, j as u32)).collect();
    if negatives.is_empty() {
        return None;
    }
    Some(UserPairs { positives, negatives })
}

/// `Σ|E(u)|` over all users.
pub fn total_pairs(split: &SplitDataset) -> u64 {
    let train = split.train.user_items();
    let test = split.test.user_items();
    let n_items = split.train.n_items() as u64;
    (0..split.train.n_users())
        .map(|u| {
            let t = test.row(u).len() as u64;
            if t == 0 {
                return 0;
            }
            let seen = (t + train.row(u).len() as u64).min(n_items);
            t * (n_items - seen)
        })
        .sum()
}

fn checked(value: f64, user: usize, item: usize) -> Result<f64> {
    if value.is_nan() {
        Err(Error::NanScore { user, item })
    } else {
        Ok(value)
    }
}

fn delta(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else if z == 0.0 {
        0.5
    } else {
        0.0
    }
}

fn exact_user(u: usize, p: &UserPairs, scores: &[f64]) -> Result<(f64, u64)> {
    let mut neg = Vec::with_capacity(p.negatives.len());
    for &j in &p.negatives {
        neg.push(checked(scores[j], u, j)?);
    }
    neg.sort_unstable_by(f64::total_cmp);
    // Wins and ties are counted in half units so the sum stays an integer.
    let mut halves: u64 = 0;
    for &i in &p.positives {
        let s = checked(scores[i], u, i)?;
        let below = neg.partition_point(|&v| v < s);
        let not_above = neg.partition_point(|&v| v <= s);
        halves += 2 * below as u64 + (not_above - below) as u64;
    }
    let pairs = (p.positives.len() * p.negatives.len()) as u64;
    Ok((halves as f64 / 2.0 / pairs as f64, pairs))
}

fn sampled_user<S: Scorer + ?Sized>(
    scorer: &S,
    u: usize,
    p: &UserPairs,
    per_user: usize,
    seed: u64,
) -> Result<(f64, u64)> {
    let mut g = rng::substream(seed, u as u64);
    let mut total = 0.0;
    for _ in 0..per_user {
        let i = p.positives[g.random_range(0..p.positives.len())];
        let j = p.negatives[g.random_range(0..p.negatives.len())];
        let si = checked(scorer.score(u, i), u, i)?;
        let sj = checked(scorer.score(u, j), u, j)?;
        total += delta(si - sj);
    }
    Ok((total / per_user as f64, per_user as u64))
}

/// AUC of `scorer` over the held-out half of `split`.
///
/// Per-user values are computed in parallel and reduced in user order, so the
/// result does not depend on the thread count.
pub fn evaluate_auc<S: Scorer + ?Sized>(scorer: &S, split: &SplitDataset, mode: EvalMode) -> Result<AucReport> {
    check_split(split)?;
    if let EvalMode::Sampled { per_user: 0, .. } = mode {
        return Err(invalid("sampled evaluation needs at least one pair per user"));
    }
    let train = split.train.user_items();
    let test = split.test.user_items();
    let n_items = split.train.n_items();
    let results: Vec<Option<(f64, u64)>> = (0..split.train.n_users())
        .into_par_iter()
        .map(|u| {
            let Some(p) = user_pairs(&train, &test, u, n_items) else {
                return Ok(None);
            };
            let r = match mode {
                EvalMode::Exact => {
                    let mut scores = vec![0.0; n_items];
                    scorer.score_user(u, &mut scores);
                    exact_user(u, &p, &scores)?
                }
                EvalMode::Sampled { per_user, seed } => sampled_user(scorer, u, &p, per_user, seed)?,
            };
            Ok(Some(r))
        })
        .collect::<Result<_>>()?;

    let mut per_user = Vec::new();
    let mut sum = 0.0;
    let mut pairs_evaluated = 0;
    for (user, r) in results.into_iter().enumerate() {
        if let Some((auc, pairs)) = r {
            sum += auc;
            pairs_evaluated += pairs;
            per_user.push(UserAuc { user, auc, pairs });
        }
    }
    if per_user.is_empty() {
        return Err(Error::Empty("no user has a non-empty evaluation pair set".into()));
    }
    let users_evaluated = per_user.len();
    Ok(AucReport {
        auc: sum / users_evaluated as f64,
        users_evaluated,
        users_skipped: split.train.n_users() - users_evaluated,
        pairs_evaluated,
        sampled: matches!(mode, EvalMode::Sampled { .. }),
        per_user,
    })
}

/// Reference AUC: materializes every `E(u)` pair and sums `δ` one by one.
pub fn auc_bruteforce_oracle<S: Scorer + ?Sized>(scorer: &S, split: &SplitDataset) -> Result<f64> {
    check_split(split)?;
    let n_items = split.train.n_items();
    let pair_set = |d: &InteractionDataset| -> HashSet<(usize, usize)> {
        d.pairs().iter().map(|p| (p.user as usize, p.item as usize)).collect()
    };
    let (train, test) = (pair_set(&split.train), pair_set(&split.test));
    let mut sum = 0.0;
    let mut users = 0usize;
    for u in 0..split.train.n_users() {
        let mut e = Vec::new();
        for i in 0..n_items {
            if !test.contains(&(u, i)) {
                continue;
            }
            for j in 0..n_items {
                if !test.contains(&(u, j)) && !train.contains(&(u, j)) {
                    e.push((i, j));
                }
            }
        }
        if e.is_empty() {
            continue;
        }
        let mut total = 0.0;
        for &(i, j) in &e {
            let si = checked(scorer.score(u, i), u, i)?;
            let sj = checked(scorer.score(u, j), u, j)?;
            total += delta(si - sj);
        }
        sum += total / e.len() as f64;
        users += 1;
    }
    if users == 0 {
        return Err(Error::Empty("no user has a non-empty evaluation pair set".into()));
    }
    Ok(sum / users as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interactions::Interaction;

    /// One user; item 0 in train, item 1 in test, the rest negatives.
    fn one_user(n_items: usize) -> SplitDataset {
        let full = InteractionDataset::from_index_pairs(1, n_items, &[(0, 0), (0, 1)]).unwrap();
        let p = |item| Interaction { user: 0, item, count: 1 };
        SplitDataset {
            train: full.with_pairs(vec![p(0)]).unwrap(),
            test: full.with_pairs(vec![p(1)]).unwrap(),
            seed: 0,
        }
    }

    fn table(values: Vec<f64>) -> impl Fn(usize, usize) -> f64 + Sync {
        move |_, i| values[i]
    }

    #[test]
    fn positive_beats_all() {
        let s = one_user(4);
        let r = evaluate_auc(&table(vec![0.0, 0.9, 0.2, 0.5]), &s, EvalMode::Exact).unwrap();
        assert_eq!(r.auc, 1.0);
        assert_eq!(r.pairs_evaluated, 2);
        assert_eq!(r.users_evaluated, 1);
    }

    #[test]
    fn one_win_one_loss() {
        let s = one_user(4);
        let r = evaluate_auc(&table(vec![0.0, 0.5, 0.2, 0.8]), &s, EvalMode::Exact).unwrap();
        assert_eq!(r.auc, 0.5);
    }

    #[test]
    fn constant_scorer_is_half() {
        let s = one_user(6);
        let r = evaluate_auc(&|_: usize, _: usize| 3.0, &s, EvalMode::Exact).unwrap();
        assert_eq!(r.auc, 0.5);
        assert_eq!(auc_bruteforce_oracle(&|_: usize, _: usize| 3.0, &s).unwrap(), 0.5);
    }

    #[test]
    fn single_pair_oracle() {
        let s = one_user(3);
        assert_eq!(auc_bruteforce_oracle(&table(vec![0.0, 1.0, 0.5]), &s).unwrap(), 1.0);
        assert_eq!(auc_bruteforce_oracle(&table(vec![0.0, 1.0, 1.0]), &s).unwrap(), 0.5);
    }

    #[test]
    fn nan_names_pair() {
        let s = one_user(3);
        let e = evaluate_auc(&table(vec![0.0, f64::NAN, 0.5]), &s, EvalMode::Exact).unwrap_err();
        assert!(matches!(e, Error::NanScore { user: 0, item: 1 }));
    }

    #[test]
    fn no_evaluable_user_is_an_error() {
        // Every non-train item is held out, so E(u) is empty.
        let s = one_user(2);
        assert!(matches!(evaluate_auc(&|_: usize, _: usize| 0.0, &s, EvalMode::Exact), Err(Error::Empty(_))));
    }

    #[test]
    fn sampled_mode_is_seeded() {
        let s = one_user(50);
        let f = |_: usize, i: usize| ((i * 37) % 11) as f64;
        let m = EvalMode::Sampled { per_user: 200, seed: 3 };
        let a = evaluate_auc(&f, &s, m).unwrap();
        let b = evaluate_auc(&f, &s, m).unwrap();
        assert_eq!(a, b);
        assert!(a.sampled);
        assert_eq!(a.pairs_evaluated, 200);
    }

    #[test]
    fn pair_budget_picks_mode() {
        let s = one_user(10);
        assert_eq!(total_pairs(&s), 8);
        assert_eq!(EvalMode::auto(&s, 8, 5, 1), EvalMode::Exact);
        assert_eq!(EvalMode::auto(&s, 7, 5, 1), EvalMode::Sampled { per_user: 5, seed: 1 });
    }
}
