//! Top-k queries and the item popularity table.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::interactions::InteractionDataset;
use crate::scorer::Scorer;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub item: String,
    pub index: usize,
    pub score: f64,
    /// 1-based position in the list.
    pub rank: usize,
    /// 1-based position of the item by total comment count.
    pub popularity_rank: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopK {
    pub items: Vec<Recommendation>,
    /// Fewer than `k` items were eligible.
    pub truncated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopularityEntry {
    pub item: String,
    pub comments: u64,
    pub cumulative_fraction: f64,
}

/// Item indices by total comment count, descending, ties by ascending index.
fn popularity_order(dataset: &InteractionDataset) -> (Vec<usize>, Vec<u64>) {
    let counts = dataset.item_comment_counts();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
    (order, counts)
}

/// The `k` best-scoring items for `user`, optionally skipping items the user
/// already has in `dataset`. Ties go to the lower item index.
pub fn top_k<S: Scorer + ?Sized>(
    scorer: &S,
    dataset: &InteractionDataset,
    user: &str,
    k: usize,
    exclude_train: bool,
) -> Result<TopK> {
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    let u = dataset.users().get(user).ok_or_else(|| Error::Unknown { kind: "user", name: user.to_string() })? as usize;
    let n_items = dataset.n_items();
    let mut scores = vec![0.0; n_items];
    scorer.score_user(u, &mut scores);
    let seen = dataset.user_items();
    let mut eligible = Vec::with_capacity(n_items);
    for (i, &s) in scores.iter().enumerate() {
        if exclude_train && seen.contains(u, i as u32) {
            continue;
        }
        if s.is_nan() {
            return Err(Error::NanScore { user: u, item: i });
        }
        eligible.push(i);
    }
    eligible.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let truncated = eligible.len() < k;
    eligible.truncate(k);

    let (order, _) = popularity_order(dataset);
    let mut pop_rank = vec![0; n_items];
    for (r, &i) in order.iter().enumerate() {
        pop_rank[i] = r + 1;
    }
    let items = eligible
        .into_iter()
        .enumerate()
        .map(|(r, i)| Recommendation {
            item: dataset.items().names()[i].clone(),
            index: i,
            score: scores[i],
            rank: r + 1,
            popularity_rank: pop_rank[i],
        })
        .collect();
    Ok(TopK { items, truncated })
}

/// The `top_n` most-commented items with the running share of all comments.
pub fn popularity_report(dataset: &InteractionDataset, top_n: usize) -> Result<Vec<PopularityEntry>> {
    let (order, counts) = popularity_order(dataset);
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::Empty("dataset has no comments".into()));
    }
    let mut running = 0;
    Ok(order
        .into_iter()
        .take(top_n)
        .map(|i| {
            running += counts[i];
            PopularityEntry {
                item: dataset.items().names()[i].clone(),
                comments: counts[i],
                cumulative_fraction: running as f64 / total as f64,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interactions::{IdMap, Interaction};

    fn dataset(items: &[&str], pairs: &[(u32, u32, u32)]) -> InteractionDataset {
        let users = IdMap::from_names(vec!["alice".into()]).unwrap();
        let items = IdMap::from_names(items.iter().map(|s| s.to_string()).collect()).unwrap();
        let pairs = pairs.iter().map(|&(user, item, count)| Interaction { user, item, count }).collect();
        InteractionDataset::new(users, items, pairs).unwrap()
    }

    fn names(t: &TopK) -> Vec<&str> {
        t.items.iter().map(|r| r.item.as_str()).collect()
    }

    const SCORES: [f64; 3] = [0.9, 0.1, 0.5];

    #[test]
    fn sorts_by_score() {
        let ds = dataset(&["s1", "s2", "s3"], &[(0, 0, 1)]);
        let t = top_k(&|_: usize, i: usize| SCORES[i], &ds, "alice", 2, false).unwrap();
        assert_eq!(names(&t), ["s1", "s3"]);
        assert_eq!(t.items[0].rank, 1);
        assert_eq!(t.items[1].rank, 2);
        assert!(!t.truncated);
    }

    #[test]
    fn excludes_training_items() {
        let ds = dataset(&["s1", "s2", "s3"], &[(0, 0, 1)]);
        let t = top_k(&|_: usize, i: usize| SCORES[i], &ds, "alice", 2, true).unwrap();
        assert_eq!(names(&t), ["s3", "s2"]);
    }

    #[test]
    fn truncation_is_flagged() {
        let ds = dataset(&["s1", "s2", "s3"], &[(0, 0, 1)]);
        let t = top_k(&|_: usize, i: usize| SCORES[i], &ds, "alice", 5, true).unwrap();
        assert_eq!(t.items.len(), 2);
        assert!(t.truncated);
    }

    #[test]
    fn ties_go_to_lower_index() {
        let ds = dataset(&["a", "b", "c"], &[(0, 2, 1)]);
        let t = top_k(&|_: usize, _: usize| 1.0, &ds, "alice", 3, false).unwrap();
        assert_eq!(names(&t), ["a", "b", "c"]);
        assert_eq!(t.items[2].popularity_rank, 1);
    }

    #[test]
    fn query_errors() {
        let ds = dataset(&["a"], &[(0, 0, 1)]);
        let f = |_: usize, _: usize| 0.0;
        assert!(matches!(top_k(&f, &ds, "bob", 1, true), Err(Error::Unknown { kind: "user", .. })));
        assert!(matches!(top_k(&f, &ds, "alice", 0, true), Err(Error::InvalidParameter(_))));
        let nan = |_: usize, _: usize| f64::NAN;
        assert!(matches!(top_k(&nan, &ds, "alice", 1, false), Err(Error::NanScore { .. })));
    }

    #[test]
    fn popularity_arithmetic() {
        let ds = dataset(&["b", "a"], &[(0, 0, 1), (0, 1, 3)]);
        let r = popularity_report(&ds, 2).unwrap();
        assert_eq!(r[0], PopularityEntry { item: "a".into(), comments: 3, cumulative_fraction: 0.75 });
        assert_eq!(r[1], PopularityEntry { item: "b".into(), comments: 1, cumulative_fraction: 1.0 });
    }

    #[test]
    fn popularity_ties_by_index() {
        let ds = dataset(&["x", "y"], &[(0, 0, 2), (0, 1, 2)]);
        let r = popularity_report(&ds, 1).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].item, "x");
    }
}
