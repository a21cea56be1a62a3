/// Anything that assigns a preference score to a (user, item) index pair.
///
/// Callers validate indices against the model dimensions before scoring.
pub trait Scorer: Sync {
    fn score(&self, user: usize, item: usize) -> f64;

    /// Scores every item for one user into `out`.
    fn score_user(&self, user: usize, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.score(user, i);
        }
    }
}

impl<F> Scorer for F
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    fn score(&self, user: usize, item: usize) -> f64 {
        self(user, item)
    }
}
