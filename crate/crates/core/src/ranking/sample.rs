use rand::Rng;

use crate::error::{Error, Result};
use crate::interactions::UserItems;

/// Bootstrap sampler over (user, observed item, unobserved item) triples.
pub struct TripleSampler<'a> {
    items: &'a UserItems,
    /// Users with at least one observed and one unobserved item.
    eligible: Vec<u32>,
}

impl<'a> TripleSampler<'a> {
    pub fn new(items: &'a UserItems) -> Result<Self> {
        let n_items = items.n_cols();
        let eligible: Vec<u32> = (0..items.n_rows())
            .filter(|&u| {
                let n = items.row(u).len();
                n > 0 && n < n_items
            })
            .map(|u| u as u32)
            .collect();
        if eligible.is_empty() {
            return Err(Error::Empty("no user has both an observed and an unobserved item".into()));
        }
        Ok(Self { items, eligible })
    }

    pub fn eligible_users(&self) -> &[u32] {
        &self.eligible
    }

    /// `u` uniform over eligible users, `i` uniform over `u`'s items, `j`
    /// uniform over all items, redrawn until unobserved.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, usize, usize) {
        let u = self.eligible[rng.random_range(0..self.eligible.len())] as usize;
        let observed = self.items.row(u);
        let i = observed[rng.random_range(0..observed.len())] as usize;
        let n_items = self.items.n_cols() as u32;
        loop {
            let j = rng.random_range(0..n_items);
            if observed.binary_search(&j).is_err() {
                return (u, i, j as usize);
            }
        }
    }
}
