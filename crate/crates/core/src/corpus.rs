//! Comment-log parsing, cleaning and text normalization.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Result;

/// Author and body marker the dump uses for removed content.
pub const DELETED: &str = "[deleted]";

const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords_en.txt");

/// One user-subreddit-text interaction record.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comment {
    pub author: String,
    pub subreddit: String,
    pub body: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_utc: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controversiality: Option<u8>,
}

impl Comment {
    pub fn new(author: impl Into<String>, subreddit: impl Into<String>, body: impl Into<String>) -> Self {
        Self {
            author: author.into(),
            subreddit: subreddit.into(),
            body: body.into(),
            created_utc: None,
            controversiality: None,
        }
    }
}

/// Result of [`parse_comments`].
#[derive(Clone, Debug, Default)]
pub struct ParsedComments {
    pub comments: Vec<Comment>,
    /// Non-blank lines that were not a usable comment record.
    pub malformed: usize,
}

/// Parses newline-delimited JSON comment records.
///
/// Lines that are not JSON objects, or that lack a non-empty `author`,
/// `subreddit` or a `body`, are counted as malformed and skipped. Blank lines
/// are ignored. Only read failures abort.
pub fn parse_comments<R: BufRead>(mut input: R) -> Result<ParsedComments> {
    let mut out = ParsedComments::default();
    let mut line = Vec::new();
    loop {
        line.clear();
        if input.read_until(b'\n', &mut line)? == 0 {
            break;
        }
        let trimmed = line.trim_ascii();
        if trimmed.is_empty() {
            continue;
        }
        match parse_line(trimmed) {
            Some(c) => out.comments.push(c),
            None => out.malformed += 1,
        }
    }
    Ok(out)
}

fn parse_line(line: &[u8]) -> Option<Comment> {
    let value: Value = serde_json::from_slice(line).ok()?;
    let obj = value.as_object()?;
    let author = obj.get("author")?.as_str()?;
    let subreddit = obj.get("subreddit")?.as_str()?;
    let body = obj.get("body")?.as_str()?;
    if author.is_empty() || subreddit.is_empty() {
        return None;
    }
    // Older dumps store created_utc as a string.
    let created_utc = match obj.get("created_utc") {
        Some(Value::Number(n)) => n.as_i64(),
        Some(Value::String(s)) => s.parse().ok(),
        _ => None,
    };
    let controversiality = obj.get("controversiality").and_then(Value::as_u64).and_then(|v| u8::try_from(v).ok());
    Some(Comment {
        author: author.to_owned(),
        subreddit: subreddit.to_owned(),
        body: body.to_owned(),
        created_utc,
        controversiality,
    })
}

/// Opens a comment dump, transparently decompressing gzip input.
pub fn open_comment_stream(path: &Path) -> io::Result<Box<dyn BufRead>> {
    let mut file = File::open(path)?;
    let mut magic = [0u8; 2];
    let n = read_fully(&mut file, &mut magic)?;
    let file = File::open(path)?;
    if n == 2 && magic == [0x1f, 0x8b] {
        Ok(Box::new(BufReader::new(MultiGzDecoder::new(file))))
    } else {
        Ok(Box::new(BufReader::new(file)))
    }
}

fn read_fully<R: Read>(r: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..])? {
            0 => break,
            n => filled += n,
        }
    }
    Ok(filled)
}

pub fn read_comments_file(path: &Path) -> Result<ParsedComments> {
    parse_comments(open_comment_stream(path)?)
}

/// Writes comments back out in the same JSONL schema.
pub fn write_comments<W: Write>(mut out: W, comments: &[Comment]) -> Result<()> {
    for c in comments {
        serde_json::to_writer(&mut out, c).map_err(io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Cleaning thresholds applied by [`filter_comments`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FilterPolicy {
    /// Minimum body length in Unicode scalar values.
    pub min_body_chars: usize,
    /// Minimum number of surviving comments per author.
    pub min_user_comments: usize,
    pub bot_names: HashSet<String>,
    pub drop_deleted: bool,
}

impl Default for FilterPolicy {
    fn default() -> Self {
        Self { min_body_chars: 30, min_user_comments: 5, bot_names: HashSet::new(), drop_deleted: true }
    }
}

impl FilterPolicy {
    /// A policy that keeps every comment.
    pub fn keep_all() -> Self {
        Self { min_body_chars: 0, min_user_comments: 0, bot_names: HashSet::new(), drop_deleted: false }
    }

    fn keeps_comment(&self, c: &Comment) -> bool {
        if self.drop_deleted && (c.author == DELETED || c.body == DELETED) {
            return false;
        }
        if self.bot_names.contains(&c.author) {
            return false;
        }
        c.body.chars().count() >= self.min_body_chars
    }
}

/// Reads a list of names, one per line. Blank lines and `#` comments are skipped.
pub fn read_name_list<R: BufRead>(input: R) -> Result<HashSet<String>> {
    let mut names = HashSet::new();
    for line in input.lines() {
        let line = line?;
        let name = line.trim();
        if !name.is_empty() && !name.starts_with('#') {
            names.insert(name.to_owned());
        }
    }
    Ok(names)
}

/// Applies the per-comment rules, then drops authors with fewer than
/// `min_user_comments` surviving comments. The author-count pass runs once;
/// it is not iterated to a fixed point.
pub fn filter_comments(comments: Vec<Comment>, policy: &FilterPolicy) -> Vec<Comment> {
    let survivors: Vec<Comment> = comments.into_iter().filter(|c| policy.keeps_comment(c)).collect();
    if policy.min_user_comments <= 1 {
        return survivors;
    }
    let mut per_author: HashMap<&str, usize> = HashMap::new();
    for c in &survivors {
        *per_author.entry(c.author.as_str()).or_default() += 1;
    }
    let keep: HashSet<String> =
        per_author.into_iter().filter(|&(_, n)| n >= policy.min_user_comments).map(|(a, _)| a.to_owned()).collect();
    survivors.into_iter().filter(|c| keep.contains(&c.author)).collect()
}

/// Tokenizer settings: the stop-word set applied after lowercasing.
#[derive(Clone, Debug, Default)]
pub struct Stopwords(HashSet<String>);

impl Stopwords {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self(words.into_iter().map(|w| w.as_ref().to_lowercase()).collect())
    }

    /// The bundled English list.
    pub fn english() -> Self {
        Self::new(DEFAULT_STOPWORDS.lines().map(str::trim).filter(|w| !w.is_empty() && !w.starts_with('#')))
    }

    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        Ok(Self::new(read_name_list(input)?))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(token)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn is_apostrophe(c: char) -> bool {
    matches!(c, '\'' | '\u{2019}' | '\u{2018}' | '`')
}

/// Lowercases, strips punctuation and drops stop words.
///
/// Apostrophes are deleted so contractions stay one token (`it's` → `its`);
/// every other character that is neither alphanumeric nor whitespace becomes
/// a token boundary (`game-of-thrones` → `game`, `of`, `thrones`).
pub fn normalize_text(body: &str, stopwords: &Stopwords) -> Vec<String> {
    let mut cleaned = String::with_capacity(body.len());
    for c in body.chars().flat_map(char::to_lowercase) {
        if is_apostrophe(c) {
            continue;
        }
        // A few uppercase letters have no lowercase mapping.
        if c.is_alphanumeric() && !c.is_uppercase() {
            cleaned.push(c);
        } else {
            cleaned.push(' ');
        }
    }
    cleaned.split_whitespace().filter(|t| !stopwords.contains(t)).map(str::to_owned).collect()
}
