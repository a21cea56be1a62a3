//! Seeded synthetic data with planted structure, for tests and benchmarks.

use rand::seq::index;
use rand::Rng;

use crate::corpus::Comment;
use crate::error::{invalid, Result};
use crate::interactions::{IdMap, Interaction, InteractionDataset};
use crate::rng;

/// A dataset whose users and items are partitioned into blocks.
#[derive(Clone, Debug)]
pub struct BlockDataset {
    pub dataset: InteractionDataset,
    pub user_block: Vec<usize>,
    pub item_block: Vec<usize>,
}

/// Contiguous block assignment of `n` indices into `blocks` groups.
fn assign(n: usize, blocks: usize) -> Vec<usize> {
    (0..n).map(|x| x * blocks / n).collect()
}

/// A stochastic block model: user `u` interacts with item `i` with
/// probability `within` when they share a block and `across` otherwise.
/// Counts are drawn from `1..=max_count`. Users left with no item get one
/// uniformly chosen item from their own block.
pub fn block_dataset(
    n_users: usize,
    n_items: usize,
    n_blocks: usize,
    within: f64,
    across: f64,
    max_count: u32,
    seed: u64,
) -> Result<BlockDataset> {
    if n_blocks == 0 || n_blocks > n_items || n_blocks > n_users {
        return Err(invalid("need 1 ≤ blocks ≤ min(users, items)"));
    }
    if !(0.0..=1.0).contains(&within) || !(0.0..=1.0).contains(&across) || max_count == 0 {
        return Err(invalid("probabilities must lie in [0, 1] and counts must be positive"));
    }
    let user_block = assign(n_users, n_blocks);
    let item_block = assign(n_items, n_blocks);
    let mut pairs = Vec::new();
    for (u, &ub) in user_block.iter().enumerate() {
        let mut g = rng::substream(seed, u as u64);
        let start = pairs.len();
        for (i, &ib) in item_block.iter().enumerate() {
            let p = if ib == ub { within } else { across };
            if g.random_bool(p) {
                pairs.push(Interaction { user: u as u32, item: i as u32, count: g.random_range(1..=max_count) });
            }
        }
        if pairs.len() == start {
            let own: Vec<usize> = (0..n_items).filter(|&i| item_block[i] == ub).collect();
            pairs.push(Interaction {
                user: u as u32,
                item: own[g.random_range(0..own.len())] as u32,
                count: g.random_range(1..=max_count),
            });
        }
    }
    let users = IdMap::from_names((0..n_users).map(|u| format!("user{u}")).collect())?;
    let items = IdMap::from_names((0..n_items).map(|i| format!("sub{i}")).collect())?;
    Ok(BlockDataset { dataset: InteractionDataset::new(users, items, pairs)?, user_block, item_block })
}

/// Users with a uniform number of distinct items in `min_items..=max_items`.
pub fn random_dataset(
    n_users: usize,
    n_items: usize,
    min_items: usize,
    max_items: usize,
    seed: u64,
) -> Result<InteractionDataset> {
    if min_items == 0 || min_items > max_items || max_items > n_items {
        return Err(invalid("need 1 ≤ min_items ≤ max_items ≤ items"));
    }
    let mut pairs = Vec::new();
    for u in 0..n_users {
        let mut g = rng::substream(seed, u as u64);
        let n = g.random_range(min_items..=max_items);
        for i in index::sample(&mut g, n_items, n) {
            pairs.push((u, i));
        }
    }
    InteractionDataset::from_index_pairs(n_users, n_items, &pairs)
}

/// Comment bodies drawn from per-block vocabularies.
#[derive(Clone, Debug)]
pub struct CommentStyle {
    pub words_per_block: usize,
    pub shared_words: usize,
    pub words_per_comment: usize,
    /// Probability that a word comes from the shared pool.
    pub shared_rate: f64,
}

impl Default for CommentStyle {
    fn default() -> Self {
        Self { words_per_block: 30, shared_words: 30, words_per_comment: 12, shared_rate: 0.3 }
    }
}

/// One comment per unit of pair count. Each body mixes words from the item's
/// block vocabulary with a shared pool.
pub fn block_comments(data: &BlockDataset, style: &CommentStyle, seed: u64) -> Result<Vec<Comment>> {
    if style.words_per_block == 0 || style.words_per_comment == 0 {
        return Err(invalid("vocabularies and comments must be non-empty"));
    }
    if style.shared_words == 0 && style.shared_rate > 0.0 {
        return Err(invalid("shared words requested from an empty pool"));
    }
    let ds = &data.dataset;
    let mut out = Vec::new();
    for (n, p) in ds.pairs().iter().enumerate() {
        let mut g = rng::substream(seed, n as u64);
        let block = data.item_block[p.item as usize];
        for _ in 0..p.count {
            let words: Vec<String> = (0..style.words_per_comment)
                .map(|_| {
                    if style.shared_words > 0 && g.random_bool(style.shared_rate) {
                        format!("common{}", g.random_range(0..style.shared_words))
                    } else {
                        format!("topic{block}word{}", g.random_range(0..style.words_per_block))
                    }
                })
                .collect();
            out.push(Comment::new(
                &ds.users().names()[p.user as usize],
                &ds.items().names()[p.item as usize],
                words.join(" "),
            ));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_dataset_shape() {
        let b = block_dataset(40, 20, 2, 1.0, 0.0, 3, 1).unwrap();
        assert_eq!(b.dataset.len(), 40 * 10);
        for p in b.dataset.pairs() {
            assert_eq!(b.user_block[p.user as usize], b.item_block[p.item as usize]);
            assert!((1..=3).contains(&p.count));
        }
        let again = block_dataset(40, 20, 2, 1.0, 0.0, 3, 1).unwrap();
        assert_eq!(again.dataset, b.dataset);
    }

    #[test]
    fn random_dataset_counts() {
        let ds = random_dataset(30, 15, 2, 5, 4).unwrap();
        let ui = ds.user_items();
        for u in 0..30 {
            assert!((2..=5).contains(&ui.row(u).len()));
        }
    }

    #[test]
    fn comments_follow_blocks() {
        let b = block_dataset(10, 10, 2, 0.5, 0.0, 2, 2).unwrap();
        let style = CommentStyle { shared_rate: 0.0, ..CommentStyle::default() };
        let c = block_comments(&b, &style, 3).unwrap();
        let total: u32 = b.dataset.pairs().iter().map(|p| p.count).sum();
        assert_eq!(c.len(), total as usize);
        for comment in &c {
            let i = b.dataset.items().get(&comment.subreddit).unwrap() as usize;
            let tag = format!("topic{}word", b.item_block[i]);
            assert!(comment.body.split(' ').all(|w| w.starts_with(&tag)));
        }
    }
}
