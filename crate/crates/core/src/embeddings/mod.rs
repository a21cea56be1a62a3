//! Document embeddings for subreddits and users, trained from comment text,
//! plus the vector file formats and cosine nearest-neighbor queries.
//!
//! Every subreddit and every user becomes one document: `item:<name>` holds
//! the normalized tokens of all comments posted in that subreddit and
//! `user:<name>` the tokens of all comments that user wrote. Both kinds are
//! trained jointly in one corpus.

mod doc2vec;
mod neighbors;
mod vectors;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::corpus::{normalize_text, Comment, Stopwords};
use crate::error::{Error, Result};
use crate::interactions::InteractionDataset;
use crate::matrix::Matrix;

pub use doc2vec::{pair_gradient_scale, train_doc_vectors, Doc2VecConfig, Doc2VecTrainer};
pub use neighbors::{nearest_neighbors, Neighbor};
pub use vectors::FEATURES_MAGIC;

/// Identifies a document: a subreddit (`item:`) or a user (`user:`).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DocTag {
    Item(String),
    User(String),
}

impl DocTag {
    pub fn name(&self) -> &str {
        match self {
            DocTag::Item(n) | DocTag::User(n) => n,
        }
    }

    pub fn is_item(&self) -> bool {
        matches!(self, DocTag::Item(_))
    }
}

impl fmt::Display for DocTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DocTag::Item(n) => write!(f, "item:{n}"),
            DocTag::User(n) => write!(f, "user:{n}"),
        }
    }
}

impl FromStr for DocTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(n) = s.strip_prefix("item:") {
            Ok(DocTag::Item(n.to_owned()))
        } else if let Some(n) = s.strip_prefix("user:") {
            Ok(DocTag::User(n.to_owned()))
        } else {
            Err(Error::InvalidParameter(format!("document tag `{s}` must start with `item:` or `user:`")))
        }
    }
}

/// Token ↔ index map with corpus frequencies.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    /// Keeps tokens seen at least `min_freq` times, ordered by descending
    /// frequency then lexicographically.
    pub fn from_counts(counts: HashMap<String, u64>, min_freq: u64) -> Self {
        let mut entries: Vec<(String, u64)> = counts.into_iter().filter(|&(_, c)| c >= min_freq).collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let index = entries.iter().enumerate().map(|(i, (w, _))| (w.clone(), i as u32)).collect();
        let (words, counts) = entries.into_iter().unzip();
        Self { words, counts, index }
    }

    pub fn get(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn word(&self, idx: usize) -> &str {
        &self.words[idx]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// `I + U` token documents: items first in index order, then users.
#[derive(Clone, Debug, PartialEq)]
pub struct DocumentCorpus {
    item_names: Vec<String>,
    user_names: Vec<String>,
    docs: Vec<Vec<u32>>,
    vocab: Vocabulary,
}

impl DocumentCorpus {
    /// Assembles a corpus from already tokenized documents.
    pub fn from_token_docs(
        item_docs: Vec<(String, Vec<String>)>,
        user_docs: Vec<(String, Vec<String>)>,
        min_token_freq: u64,
    ) -> Self {
        let mut freq: HashMap<String, u64> = HashMap::new();
        for (_, toks) in item_docs.iter().chain(&user_docs) {
            for t in toks {
                *freq.entry(t.clone()).or_default() += 1;
            }
        }
        let vocab = Vocabulary::from_counts(freq, min_token_freq);
        Self::assemble(item_docs, user_docs, vocab)
    }

    fn assemble(
        item_docs: Vec<(String, Vec<String>)>,
        user_docs: Vec<(String, Vec<String>)>,
        vocab: Vocabulary,
    ) -> Self {
        let mut item_names = Vec::with_capacity(item_docs.len());
        let mut user_names = Vec::with_capacity(user_docs.len());
        let mut docs = Vec::with_capacity(item_docs.len() + user_docs.len());
        for (name, toks) in item_docs {
            item_names.push(name);
            docs.push(toks.iter().filter_map(|t| vocab.get(t)).collect());
        }
        for (name, toks) in user_docs {
            user_names.push(name);
            docs.push(toks.iter().filter_map(|t| vocab.get(t)).collect());
        }
        Self { item_names, user_names, docs, vocab }
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn n_items(&self) -> usize {
        self.item_names.len()
    }

    pub fn n_users(&self) -> usize {
        self.user_names.len()
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    /// Token ids of document `idx`.
    pub fn doc(&self, idx: usize) -> &[u32] {
        &self.docs[idx]
    }

    pub fn tag(&self, idx: usize) -> DocTag {
        if idx < self.n_items() {
            DocTag::Item(self.item_names[idx].clone())
        } else {
            DocTag::User(self.user_names[idx - self.n_items()].clone())
        }
    }

    /// Tokens of a document as strings.
    pub fn tokens(&self, idx: usize) -> Vec<&str> {
        self.docs[idx].iter().map(|&t| self.vocab.word(t as usize)).collect()
    }

    /// Documents left without any in-vocabulary token.
    pub fn empty_documents(&self) -> Vec<DocTag> {
        (0..self.len()).filter(|&d| self.docs[d].is_empty()).map(|d| self.tag(d)).collect()
    }

    pub fn total_tokens(&self) -> usize {
        self.docs.iter().map(Vec::len).sum()
    }
}

/// Builds one document per dataset item and user from the comments that
/// produced the dataset. Token order follows comment order, then position
/// within the comment. Frequencies count each comment occurrence once.
pub fn build_document_corpus(
    comments: &[Comment],
    dataset: &InteractionDataset,
    stopwords: &Stopwords,
    min_token_freq: u64,
) -> DocumentCorpus {
    let mut item_docs: Vec<Vec<String>> = vec![Vec::new(); dataset.n_items()];
    let mut user_docs: Vec<Vec<String>> = vec![Vec::new(); dataset.n_users()];
    let mut freq: HashMap<String, u64> = HashMap::new();
    for c in comments {
        let (Some(u), Some(i)) = (dataset.users().get(&c.author), dataset.items().get(&c.subreddit)) else {
            continue;
        };
        let toks = normalize_text(&c.body, stopwords);
        for t in &toks {
            *freq.entry(t.clone()).or_default() += 1;
        }
        item_docs[i as usize].extend(toks.iter().cloned());
        user_docs[u as usize].extend(toks);
    }
    let vocab = Vocabulary::from_counts(freq, min_token_freq);
    let named = |names: &[String], docs: Vec<Vec<String>>| names.iter().cloned().zip(docs).collect();
    DocumentCorpus::assemble(
        named(dataset.items().names(), item_docs),
        named(dataset.users().names(), user_docs),
        vocab,
    )
}

/// Per-subreddit feature vectors `f_i` and per-user textual factors `θ_u`.
#[derive(Clone, Debug, PartialEq)]
pub struct TextFeatureSet {
    item_names: Vec<String>,
    user_names: Vec<String>,
    items: Matrix,
    users: Matrix,
}

impl TextFeatureSet {
    pub fn new(item_names: Vec<String>, user_names: Vec<String>, items: Matrix, users: Matrix) -> Result<Self> {
        if items.rows() != item_names.len() || users.rows() != user_names.len() {
            return Err(Error::DimensionMismatch("row count differs from name count".into()));
        }
        if items.cols() != users.cols() {
            return Err(Error::DimensionMismatch(format!("item dim {} != user dim {}", items.cols(), users.cols())));
        }
        if items.cols() == 0 {
            return Err(Error::InvalidParameter("feature dimension must be at least 1".into()));
        }
        if !items.is_finite() || !users.is_finite() {
            return Err(Error::Format("non-finite feature value".into()));
        }
        Ok(Self { item_names, user_names, items, users })
    }

    pub fn dim(&self) -> usize {
        self.items.cols()
    }

    pub fn n_items(&self) -> usize {
        self.items.rows()
    }

    pub fn n_users(&self) -> usize {
        self.users.rows()
    }

    pub fn item_vectors(&self) -> &Matrix {
        &self.items
    }

    pub fn user_vectors(&self) -> &Matrix {
        &self.users
    }

    pub fn item_names(&self) -> &[String] {
        &self.item_names
    }

    pub fn user_names(&self) -> &[String] {
        &self.user_names
    }

    /// Row index of a tag within its kind.
    pub fn index_of(&self, tag: &DocTag) -> Option<usize> {
        let names = if tag.is_item() { &self.item_names } else { &self.user_names };
        names.iter().position(|n| n == tag.name())
    }

    pub fn vector(&self, tag: &DocTag) -> Option<&[f64]> {
        let idx = self.index_of(tag)?;
        Some(if tag.is_item() { self.items.row(idx) } else { self.users.row(idx) })
    }

    /// Reorders rows to follow the dataset's ID maps.
    pub fn aligned_to(&self, dataset: &InteractionDataset) -> Result<Self> {
        if self.item_names == dataset.items().names() && self.user_names == dataset.users().names() {
            return Ok(self.clone());
        }
        let reorder = |names: &[String], target: &[String], m: &Matrix, kind: &'static str| -> Result<Matrix> {
            let pos: HashMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
            let mut out = Matrix::zeros(target.len(), m.cols());
            for (r, n) in target.iter().enumerate() {
                let src = *pos
                    .get(n.as_str())
                    .ok_or_else(|| Error::FeatureMismatch(format!("no vector for {kind} `{n}`")))?;
                out.row_mut(r).copy_from_slice(m.row(src));
            }
            Ok(out)
        };
        let items = reorder(&self.item_names, dataset.items().names(), &self.items, "item")?;
        let users = reorder(&self.user_names, dataset.users().names(), &self.users, "user")?;
        Self::new(dataset.items().names().to_vec(), dataset.users().names().to_vec(), items, users)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tag_round_trip() {
        for s in ["item:gameofthrones", "user:TallnFrosty", "item:"] {
            assert_eq!(s.parse::<DocTag>().unwrap().to_string(), s);
        }
        assert!("gameofthrones".parse::<DocTag>().is_err());
    }

    fn corpus_fixture() -> (Vec<Comment>, InteractionDataset) {
        let comments = vec![
            Comment::new("u1", "s1", "alpha beta"),
            Comment::new("u2", "s1", "alpha"),
            Comment::new("u1", "s1", "gamma"),
        ];
        let ds = crate::interactions::build_dataset(&comments).unwrap();
        (comments, ds)
    }

    #[test]
    fn one_document_per_user_and_item() {
        let (comments, ds) = corpus_fixture();
        let corpus = build_document_corpus(&comments, &ds, &Stopwords::default(), 1);
        assert_eq!(corpus.len(), 3);
        assert_eq!(corpus.tag(0), DocTag::Item("s1".into()));
        assert_eq!(corpus.tag(1), DocTag::User("u1".into()));
    }

    #[test]
    fn documents_concatenate_in_comment_order() {
        let (comments, ds) = corpus_fixture();
        let corpus = build_document_corpus(&comments, &ds, &Stopwords::default(), 1);
        assert_eq!(corpus.tokens(1), ["alpha", "beta", "gamma"]);
        assert_eq!(corpus.tokens(0), ["alpha", "beta", "alpha", "gamma"]);
        assert_eq!(corpus.tokens(2), ["alpha"]);
    }

    #[test]
    fn frequency_cutoff() {
        let comments = vec![Comment::new("u", "s", "a b"), Comment::new("u", "s", "a"), Comment::new("u", "s", "a")];
        let ds = crate::interactions::build_dataset(&comments).unwrap();
        let corpus = build_document_corpus(&comments, &ds, &Stopwords::default(), 2);
        assert_eq!(corpus.vocab().words(), ["a"]);
        assert_eq!(corpus.vocab().counts(), [3]);
    }

    #[test]
    fn empty_documents_are_reported() {
        let comments = vec![Comment::new("u1", "s1", "the the"), Comment::new("u2", "s1", "word")];
        let ds = crate::interactions::build_dataset(&comments).unwrap();
        let corpus = build_document_corpus(&comments, &ds, &Stopwords::new(["the"]), 1);
        assert_eq!(corpus.empty_documents(), vec![DocTag::User("u1".into())]);
    }

    #[test]
    fn alignment_reorders_rows() {
        let ds = InteractionDataset::from_index_pairs(1, 2, &[(0, 0), (0, 1)]).unwrap();
        let f = TextFeatureSet::new(
            vec!["i1".into(), "i0".into()],
            vec!["u0".into()],
            Matrix::from_rows(&[vec![1.0], vec![0.0]]),
            Matrix::from_rows(&[vec![5.0]]),
        )
        .unwrap();
        let a = f.aligned_to(&ds).unwrap();
        assert_eq!(a.item_vectors().as_slice(), &[0.0, 1.0]);
        let missing = InteractionDataset::from_index_pairs(2, 2, &[(0, 0), (1, 1)]).unwrap();
        assert!(matches!(f.aligned_to(&missing), Err(Error::FeatureMismatch(_))));
    }
}
