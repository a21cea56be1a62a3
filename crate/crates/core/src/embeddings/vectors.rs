//! Feature-vector files.
//!
//! Text format, compatible with common word-vector tooling:
//!
//! ```text
//! <count> <dim>
//! item:<name> v1 ... vdim
//! user:<name> v1 ... vdim
//! ```
//!
//! Values are written in shortest round-trip form, so text and binary files
//! reload to identical bits. The binary format is `"SRTF"`, `u32` version,
//! item names, user names, then both matrices.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{DocTag, TextFeatureSet};
use crate::binfmt::{self, read_len};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const FEATURES_MAGIC: &[u8; 4] = b"SRTF";
const FEATURES_VERSION: u32 = 1;

impl TextFeatureSet {
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.n_items() + self.n_users(), self.dim())?;
        let rows = self
            .item_names
            .iter()
            .zip(self.items.iter_rows())
            .map(|(n, r)| (DocTag::Item(n.clone()), r))
            .chain(self.user_names.iter().zip(self.users.iter_rows()).map(|(n, r)| (DocTag::User(n.clone()), r)));
        for (tag, row) in rows {
            if tag.name().is_empty() || tag.name().contains(char::is_whitespace) {
                return Err(Error::Format(format!("name `{}` cannot be written as a text tag", tag.name())));
            }
            write!(w, "{tag}")?;
            for v in row {
                write!(w, " {v:?}")?;
            }
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| Error::Format("missing header line".into()))??;
        let mut parts = header.split_whitespace();
        let parse_usize = |s: Option<&str>, what: &str| -> Result<usize> {
            s.and_then(|s| s.parse().ok()).ok_or_else(|| Error::Format(format!("bad {what} in header `{header}`")))
        };
        let count = parse_usize(parts.next(), "count")?;
        let dim = parse_usize(parts.next(), "dimension")?;

        let mut item_names = Vec::new();
        let mut user_names = Vec::new();
        let mut items = Vec::new();
        let mut users = Vec::new();
        let mut seen = 0;
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let tag: DocTag = fields.next().unwrap_or_default().parse()?;
            let values: Vec<f64> = fields
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Format(format!("line {}: {e}", lineno + 2)))?;
            if values.len() != dim {
                return Err(Error::Format(format!(
                    "line {}: expected {dim} values, found {}",
                    lineno + 2,
                    values.len()
                )));
            }
            match tag {
                DocTag::Item(n) => {
                    item_names.push(n);
                    items.extend(values);
                }
                DocTag::User(n) => {
                    user_names.push(n);
                    users.extend(values);
                }
            }
            seen += 1;
        }
        if seen != count {
            return Err(Error::Format(format!("header announces {count} vectors, found {seen}")));
        }
        let items = Matrix::from_vec(item_names.len(), dim, items);
        let users = Matrix::from_vec(user_names.len(), dim, users);
        TextFeatureSet::new(item_names, user_names, items, users)
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        binfmt::write_header(&mut w, FEATURES_MAGIC, FEATURES_VERSION)?;
        binfmt::write_u64(&mut w, self.item_names.len() as u64)?;
        binfmt::write_u64(&mut w, self.user_names.len() as u64)?;
        for n in self.item_names.iter().chain(&self.user_names) {
            binfmt::write_str(&mut w, n)?;
        }
        binfmt::write_matrix(&mut w, &self.items)?;
        binfmt::write_matrix(&mut w, &self.users)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        binfmt::read_header(&mut r, FEATURES_MAGIC, FEATURES_VERSION)?;
        let n_items = read_len(&mut r, u32::MAX as u64, "item count")?;
        let n_users = read_len(&mut r, u32::MAX as u64, "user count")?;
        let item_names = (0..n_items).map(|_| binfmt::read_str(&mut r)).collect::<Result<Vec<_>>>()?;
        let user_names = (0..n_users).map(|_| binfmt::read_str(&mut r)).collect::<Result<Vec<_>>>()?;
        let items = binfmt::read_matrix(&mut r)?;
        let users = binfmt::read_matrix(&mut r)?;
        binfmt::expect_eof(&mut r)?;
        TextFeatureSet::new(item_names, user_names, items, users)
    }

    /// SHA-256 of the binary encoding. Identifies the features a model was
    /// trained against regardless of which file format carried them.
    pub fn content_hash(&self) -> [u8; 32] {
        let mut buf = Vec::new();
        self.write_binary(&mut buf).expect("writing to a Vec cannot fail");
        Sha256::digest(&buf).into()
    }

    /// Saves as text unless the path ends in `.bin`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let w = BufWriter::new(File::create(path)?);
        if path.extension().is_some_and(|e| e == "bin") {
            self.write_binary(w)
        } else {
            self.write_text(w)
        }
    }

    /// Loads either format, chosen by the file's magic bytes.
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        if binfmt::sniff_magic(&bytes).as_ref() == Some(FEATURES_MAGIC) {
            Self::read_binary(&bytes[..])
        } else {
            Self::read_text(BufReader::new(&bytes[..]))
        }
    }
}
