//! The sparse user × subreddit incidence, its ID maps, persistence, and the
//! per-user stratified holdout split.
//!
//! # Binary layout (version 1, little endian)
//!
//! ```text
//! magic "SRDS" | u32 version
//! u64 users | u64 items | u64 pairs
//! users × (u32 len, utf-8 name) | items × (u32 len, utf-8 name)
//! pairs × (u32 user, u32 item, u32 count)    sorted by (user, item)
//! ```

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::index;
use rayon::prelude::*;

use crate::binfmt::{self, read_len};
use crate::corpus::Comment;
use crate::error::{invalid, Error, Result};
use crate::rng;

pub const DATASET_MAGIC: &[u8; 4] = b"SRDS";
const DATASET_VERSION: u32 = 1;

/// A dense bijection between names and indices `0..len`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IdMap {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl IdMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a map from names in index order. Duplicate names are rejected.
    pub fn from_names(names: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(names.len());
        for (i, n) in names.iter().enumerate() {
            if index.insert(n.clone(), i as u32).is_some() {
                return Err(Error::Format(format!("duplicate name `{n}`")));
            }
        }
        Ok(Self { names, index })
    }

    /// Returns the index for `name`, assigning the next free one if unseen.
    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.names.len() as u32;
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), i);
        i
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn name(&self, idx: usize) -> Option<&str> {
        self.names.get(idx).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// One observed (user, item) pair with the number of comments behind it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Interaction {
    pub user: u32,
    pub item: u32,
    pub count: u32,
}

/// Deduplicated user × subreddit incidence.
///
/// Datasets built from comments have at least one pair per user and per item.
/// The two halves of a split share their parent's ID maps, so a half may
/// leave some indices without pairs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InteractionDataset {
    users: IdMap,
    items: IdMap,
    pairs: Vec<Interaction>,
}

impl InteractionDataset {
    /// Assembles a dataset, sorting pairs and rejecting duplicates, zero
    /// counts and out-of-range indices.
    pub fn new(users: IdMap, items: IdMap, mut pairs: Vec<Interaction>) -> Result<Self> {
        pairs.sort_unstable();
        for w in pairs.windows(2) {
            if (w[0].user, w[0].item) == (w[1].user, w[1].item) {
                return Err(Error::Format(format!("duplicate pair ({}, {})", w[0].user, w[0].item)));
            }
        }
        for p in &pairs {
            if p.user as usize >= users.len() {
                return Err(Error::OutOfRange { what: "user", index: p.user as usize, size: users.len() });
            }
            if p.item as usize >= items.len() {
                return Err(Error::OutOfRange { what: "item", index: p.item as usize, size: items.len() });
            }
            if p.count == 0 {
                return Err(Error::Format("pair with zero count".into()));
            }
        }
        Ok(Self { users, items, pairs })
    }

    /// Synthetic dataset with names `u<idx>` / `i<idx>` and unit counts.
    pub fn from_index_pairs(n_users: usize, n_items: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let users = IdMap::from_names((0..n_users).map(|u| format!("u{u}")).collect())?;
        let items = IdMap::from_names((0..n_items).map(|i| format!("i{i}")).collect())?;
        let pairs = pairs.iter().map(|&(u, i)| Interaction { user: u as u32, item: i as u32, count: 1 }).collect();
        Self::new(users, items, pairs)
    }

    /// A dataset with the same ID maps and a different pair list.
    pub fn with_pairs(&self, pairs: Vec<Interaction>) -> Result<Self> {
        Self::new(self.users.clone(), self.items.clone(), pairs)
    }

    pub fn users(&self) -> &IdMap {
        &self.users
    }

    pub fn items(&self) -> &IdMap {
        &self.items
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    /// Pairs sorted by `(user, item)`.
    pub fn pairs(&self) -> &[Interaction] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn same_id_maps(&self, other: &Self) -> bool {
        self.users == other.users && self.items == other.items
    }

    /// Per-user item lists.
    pub fn user_items(&self) -> UserItems {
        UserItems::from_pairs(self.n_users(), self.n_items(), self.pairs.iter().map(|p| (p.user, p.item)))
    }

    /// Per-item user lists (the transpose incidence).
    pub fn item_users(&self) -> UserItems {
        UserItems::from_pairs(self.n_items(), self.n_users(), self.pairs.iter().map(|p| (p.item, p.user)))
    }

    /// Total comments per item.
    pub fn item_comment_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.n_items()];
        for p in &self.pairs {
            counts[p.item as usize] += u64::from(p.count);
        }
        counts
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        binfmt::write_header(&mut w, DATASET_MAGIC, DATASET_VERSION)?;
        binfmt::write_u64(&mut w, self.n_users() as u64)?;
        binfmt::write_u64(&mut w, self.n_items() as u64)?;
        binfmt::write_u64(&mut w, self.pairs.len() as u64)?;
        for n in self.users.names().iter().chain(self.items.names()) {
            binfmt::write_str(&mut w, n)?;
        }
        for p in &self.pairs {
            binfmt::write_u32(&mut w, p.user)?;
            binfmt::write_u32(&mut w, p.item)?;
            binfmt::write_u32(&mut w, p.count)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        binfmt::read_header(&mut r, DATASET_MAGIC, DATASET_VERSION)?;
        let n_users = read_len(&mut r, u32::MAX as u64, "user count")?;
        let n_items = read_len(&mut r, u32::MAX as u64, "item count")?;
        let n_pairs = read_len(&mut r, 1 << 40, "pair count")?;
        let read_names = |r: &mut R, n: usize| -> Result<Vec<String>> { (0..n).map(|_| binfmt::read_str(r)).collect() };
        let users = IdMap::from_names(read_names(&mut r, n_users)?)?;
        let items = IdMap::from_names(read_names(&mut r, n_items)?)?;
        let mut pairs = Vec::with_capacity(n_pairs.min(1 << 24));
        for _ in 0..n_pairs {
            pairs.push(Interaction {
                user: binfmt::read_u32(&mut r)?,
                item: binfmt::read_u32(&mut r)?,
                count: binfmt::read_u32(&mut r)?,
            });
        }
        binfmt::expect_eof(&mut r)?;
        Self::new(users, items, pairs)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_binary(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_binary(BufReader::new(File::open(path)?))
    }

    /// `user,subreddit,count` rows in pair order.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "user,subreddit,count")?;
        for p in &self.pairs {
            writeln!(
                w,
                "{},{},{}",
                csv_field(&self.users.names()[p.user as usize]),
                csv_field(&self.items.names()[p.item as usize]),
                p.count
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

/// Compressed row lists: for each row, its sorted column indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UserItems {
    offsets: Vec<usize>,
    columns: Vec<u32>,
    n_cols: usize,
}

impl UserItems {
    pub fn from_pairs(n_rows: usize, n_cols: usize, pairs: impl Iterator<Item = (u32, u32)>) -> Self {
        let mut rows: Vec<Vec<u32>> = vec![Vec::new(); n_rows];
        for (r, c) in pairs {
            rows[r as usize].push(c);
        }
        let mut offsets = Vec::with_capacity(n_rows + 1);
        let mut columns = Vec::new();
        offsets.push(0);
        for mut row in rows {
            row.sort_unstable();
            row.dedup();
            columns.extend(row);
            offsets.push(columns.len());
        }
        Self { offsets, columns, n_cols }
    }

    pub fn n_rows(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.columns.len()
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[u32] {
        &self.columns[self.offsets[r]..self.offsets[r + 1]]
    }

    #[inline]
    pub fn contains(&self, r: usize, c: u32) -> bool {
        self.row(r).binary_search(&c).is_ok()
    }
}

/// Holdout settings for [`stratified_split`].
#[derive(Clone, Debug, PartialEq)]
pub struct SplitConfig {
    pub test_fraction: f64,
    pub min_train_per_user: usize,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { test_fraction: 0.10, min_train_per_user: 1, seed: 0 }
    }
}

impl SplitConfig {
    /// Number of a user's `n` items moved to the test side.
    pub fn test_count(&self, n: usize) -> usize {
        // The epsilon absorbs products like 0.57 * 100 = 56.99999999999999.
        let share = (n as f64 * self.test_fraction + 1e-9).floor() as usize;
        share.min(n.saturating_sub(self.min_train_per_user))
    }
}

/// A train/test partition of one dataset's pairs. Both halves share the
/// parent's ID maps.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitDataset {
    pub train: InteractionDataset,
    pub test: InteractionDataset,
    pub seed: u64,
}

/// Moves `floor(n_u × test_fraction)` of each user's items to the test side,
/// keeping at least `min_train_per_user` in training.
///
/// Each user draws from its own generator stream keyed by `(seed, user)`, so
/// the result does not depend on iteration order or thread count.
pub fn stratified_split(dataset: &InteractionDataset, config: &SplitConfig) -> Result<SplitDataset> {
    if !(config.test_fraction > 0.0 && config.test_fraction < 1.0) {
        return Err(invalid(format!("test fraction must lie in (0, 1), got {}", config.test_fraction)));
    }
    if config.min_train_per_user == 0 {
        return Err(invalid("min_train_per_user must be at least 1"));
    }
    if dataset.is_empty() {
        return Err(Error::Empty("cannot split an empty dataset".into()));
    }

    // Pairs are sorted by user, so each user's pairs are one contiguous run.
    let mut runs = Vec::new();
    let mut start = 0;
    let pairs = dataset.pairs();
    for k in 1..=pairs.len() {
        if k == pairs.len() || pairs[k].user != pairs[start].user {
            runs.push(start..k);
            start = k;
        }
    }

    let parts: Vec<(Vec<Interaction>, Vec<Interaction>)> = runs
        .into_par_iter()
        .map(|run| {
            let user_pairs = &pairs[run];
            let n = user_pairs.len();
            let t = config.test_count(n);
            let mut test_mask = vec![false; n];
            if t > 0 {
                let mut g = rng::substream(config.seed, u64::from(user_pairs[0].user));
                for k in index::sample(&mut g, n, t) {
                    test_mask[k] = true;
                }
            }
            let mut train = Vec::with_capacity(n - t);
            let mut test = Vec::with_capacity(t);
            for (p, is_test) in user_pairs.iter().zip(test_mask) {
                if is_test {
                    test.push(*p);
                } else {
                    train.push(*p);
                }
            }
            (train, test)
        })
        .collect();

    let mut train = Vec::with_capacity(dataset.len());
    let mut test = Vec::new();
    for (tr, te) in parts {
        train.extend(tr);
        test.extend(te);
    }
    Ok(SplitDataset { train: dataset.with_pairs(train)?, test: dataset.with_pairs(test)?, seed: config.seed })
}

/// Aggregates filtered comments into one pair per distinct (author, subreddit).
/// Indices are assigned in order of first appearance.
pub fn build_dataset(comments: &[Comment]) -> Result<InteractionDataset> {
    if comments.is_empty() {
        return Err(Error::Empty("no comments to build a dataset from".into()));
    }
    let mut users = IdMap::new();
    let mut items = IdMap::new();
    let mut counts: HashMap<(u32, u32), u32> = HashMap::new();
    for c in comments {
        let u = users.intern(&c.author);
        let i = items.intern(&c.subreddit);
        *counts.entry((u, i)).or_default() += 1;
    }
    let pairs = counts.into_iter().map(|((user, item), count)| Interaction { user, item, count }).collect();
    InteractionDataset::new(users, items, pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(a: &str, s: &str) -> Comment {
        Comment::new(a, s, "body")
    }

    #[test]
    fn aggregates_counts() {
        let ds = build_dataset(&[c("u1", "s1"), c("u1", "s1"), c("u1", "s2"), c("u1", "s1")]).unwrap();
        assert_eq!(ds.n_users(), 1);
        assert_eq!(ds.n_items(), 2);
        assert_eq!(
            ds.pairs(),
            &[Interaction { user: 0, item: 0, count: 3 }, Interaction { user: 0, item: 1, count: 1 },]
        );
    }

    #[test]
    fn two_users_one_item() {
        let ds = build_dataset(&[c("u1", "s1"), c("u2", "s1")]).unwrap();
        assert_eq!((ds.n_users(), ds.n_items(), ds.len()), (2, 1, 2));
        assert_eq!(ds.users().get("u2"), Some(1));
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(build_dataset(&[]), Err(Error::Empty(_))));
    }

    #[test]
    fn first_appearance_order() {
        let ds = build_dataset(&[c("b", "y"), c("a", "x"), c("b", "x")]).unwrap();
        assert_eq!(ds.users().names(), ["b", "a"]);
        assert_eq!(ds.items().names(), ["y", "x"]);
    }

    fn dense(n_users: usize, n_items: usize) -> InteractionDataset {
        let pairs: Vec<_> = (0..n_users).flat_map(|u| (0..n_items).map(move |i| (u, i))).collect();
        InteractionDataset::from_index_pairs(n_users, n_items, &pairs).unwrap()
    }

    #[test]
    fn ten_items_give_one_test_item() {
        let ds = dense(1, 10);
        let split = stratified_split(&ds, &SplitConfig { seed: 3, ..Default::default() }).unwrap();
        assert_eq!(split.test.len(), 1);
        assert_eq!(split.train.len(), 9);
    }

    #[test]
    fn five_items_give_no_test_item() {
        let ds = dense(1, 5);
        let split = stratified_split(&ds, &SplitConfig::default()).unwrap();
        assert!(split.test.is_empty());
    }

    #[test]
    fn split_is_deterministic() {
        let ds = dense(4, 20);
        let cfg = SplitConfig { seed: 42, ..Default::default() };
        let a = stratified_split(&ds, &cfg).unwrap();
        let b = stratified_split(&ds, &cfg).unwrap();
        assert_eq!(a, b);
        let c = stratified_split(&ds, &SplitConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a.test, c.test);
    }

    #[test]
    fn fraction_must_be_open_interval() {
        let ds = dense(1, 5);
        for f in [0.0, 1.0, -0.2, f64::NAN] {
            let cfg = SplitConfig { test_fraction: f, ..Default::default() };
            assert!(matches!(stratified_split(&ds, &cfg), Err(Error::InvalidParameter(_))));
        }
    }

    #[test]
    fn min_train_clamps_test_share() {
        let cfg = SplitConfig { test_fraction: 0.9, min_train_per_user: 3, seed: 0 };
        assert_eq!(cfg.test_count(10), 7);
        assert_eq!(cfg.test_count(2), 0);
        assert_eq!(SplitConfig { test_fraction: 0.57, ..Default::default() }.test_count(100), 57);
    }

    #[test]
    fn binary_round_trip_and_rejects_garbage() {
        let ds = build_dataset(&[c("u,1", "s1"), c("ü2", "s\"2"), c("u,1", "s\"2")]).unwrap();
        let mut buf = Vec::new();
        ds.write_binary(&mut buf).unwrap();
        assert_eq!(InteractionDataset::read_binary(&buf[..]).unwrap(), ds);

        assert!(matches!(InteractionDataset::read_binary(&b"NOPE\x01\0\0\0"[..]), Err(Error::Format(_))));
        buf.push(0);
        assert!(InteractionDataset::read_binary(&buf[..]).is_err());
    }

    #[test]
    fn csv_export_quotes_names() {
        let ds = build_dataset(&[c("u,1", "s1"), c("u,1", "s1")]).unwrap();
        let mut out = Vec::new();
        ds.write_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "user,subreddit,count\n\"u,1\",s1,2\n");
    }

    #[test]
    fn user_items_lookup() {
        let ds = InteractionDataset::from_index_pairs(2, 4, &[(0, 3), (0, 1), (1, 2)]).unwrap();
        let ui = ds.user_items();
        assert_eq!(ui.row(0), &[1, 3]);
        assert!(ui.contains(1, 2));
        assert!(!ui.contains(1, 3));
        assert_eq!(ds.item_users().row(3), &[0]);
    }
}
