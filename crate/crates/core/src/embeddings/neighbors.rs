use super::{DocTag, TextFeatureSet};
use crate::error::{invalid, Error, Result};
use crate::matrix::{dot, norm};

/// One nearest-neighbor hit.
#[derive(Clone, Debug, PartialEq)]
pub struct Neighbor {
    pub tag: DocTag,
    pub similarity: f64,
}

/// The `k` documents of the query's kind with the highest cosine similarity,
/// excluding the query. Ties go to the lower index; zero vectors score 0.
pub fn nearest_neighbors(features: &TextFeatureSet, query: &DocTag, k: usize) -> Result<Vec<Neighbor>> {
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    let qi = features.index_of(query).ok_or_else(|| Error::Unknown { kind: "document", name: query.to_string() })?;
    let (matrix, names) = if query.is_item() {
        (features.item_vectors(), features.item_names())
    } else {
        (features.user_vectors(), features.user_names())
    };
    let q = matrix.row(qi);
    let qn = norm(q);
    if qn == 0.0 {
        return Err(Error::ZeroNorm(query.to_string()));
    }

    let mut scored: Vec<(usize, f64)> = matrix
        .iter_rows()
        .enumerate()
        .filter(|&(i, _)| i != qi)
        .map(|(i, row)| {
            let n = norm(row);
            let sim = if n == 0.0 { 0.0 } else { dot(q, row) / (qn * n) };
            (i, sim)
        })
        .collect();
    let by_rank = |a: &(usize, f64), b: &(usize, f64)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
    if k < scored.len() {
        scored.select_nth_unstable_by(k - 1, by_rank);
        scored.truncate(k);
    }
    scored.sort_by(by_rank);

    Ok(scored
        .into_iter()
        .map(|(i, similarity)| Neighbor {
            tag: if query.is_item() { DocTag::Item(names[i].clone()) } else { DocTag::User(names[i].clone()) },
            similarity,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;

    fn three() -> TextFeatureSet {
        TextFeatureSet::new(
            vec!["s1".into(), "s2".into(), "s3".into()],
            vec!["u".into()],
            Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]),
            Matrix::from_rows(&[vec![0.0, 0.0]]),
        )
        .unwrap()
    }

    #[test]
    fn identical_direction_first() {
        let hits = nearest_neighbors(&three(), &DocTag::Item("s1".into()), 1).unwrap();
        assert_eq!(hits, vec![Neighbor { tag: DocTag::Item("s2".into()), similarity: 1.0 }]);
    }

    #[test]
    fn orthogonal_ranks_last() {
        let hits = nearest_neighbors(&three(), &DocTag::Item("s1".into()), 2).unwrap();
        assert_eq!(hits[0].tag, DocTag::Item("s2".into()));
        assert_eq!(hits[1], Neighbor { tag: DocTag::Item("s3".into()), similarity: 0.0 });
    }

    #[test]
    fn large_k_returns_all_others() {
        let hits = nearest_neighbors(&three(), &DocTag::Item("s3".into()), 10).unwrap();
        assert_eq!(hits.len(), 2);
        // both at similarity 0: lower index first
        assert_eq!(hits[0].tag, DocTag::Item("s1".into()));
    }

    #[test]
    fn errors() {
        let f = three();
        assert!(matches!(nearest_neighbors(&f, &DocTag::Item("nope".into()), 1), Err(Error::Unknown { .. })));
        assert!(matches!(nearest_neighbors(&f, &DocTag::User("u".into()), 1), Err(Error::ZeroNorm(_))));
        assert!(nearest_neighbors(&f, &DocTag::Item("s1".into()), 0).is_err());
    }
}
