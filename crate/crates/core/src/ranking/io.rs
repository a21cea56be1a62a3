//! Ranking model file: `"SRRK"`, `u32` version, variant tag, then every
//! parameter block, then the optional feature hash. Optional blocks are
//! preceded by a presence byte.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{ReadBytesExt, WriteBytesExt};

use super::{EmbeddingKernel, RankModel, Variant};
use crate::binfmt::{self, read_len};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const RANK_MAGIC: &[u8; 4] = b"SRRK";
const RANK_VERSION: u32 = 1;

fn write_opt_matrix<W: Write>(w: &mut W, m: Option<&Matrix>) -> Result<()> {
    match m {
        Some(m) => {
            w.write_u8(1)?;
            binfmt::write_matrix(w, m)?;
        }
        None => w.write_u8(0)?,
    }
    Ok(())
}

fn read_present<R: Read>(r: &mut R) -> Result<bool> {
    match r.read_u8()? {
        0 => Ok(false),
        1 => Ok(true),
        b => Err(Error::Format(format!("bad presence byte {b}"))),
    }
}

fn write_vec<W: Write>(w: &mut W, v: &[f64]) -> Result<()> {
    binfmt::write_u64(w, v.len() as u64)?;
    binfmt::write_f64s(w, v)?;
    Ok(())
}

fn read_vec<R: Read>(r: &mut R) -> Result<Vec<f64>> {
    let n = read_len(r, 1 << 32, "vector length")?;
    Ok(binfmt::read_f64s(r, n)?)
}

impl RankModel {
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        binfmt::write_header(&mut w, RANK_MAGIC, RANK_VERSION)?;
        w.write_u8(self.variant.tag())?;
        binfmt::write_f64(&mut w, self.alpha)?;
        write_vec(&mut w, &self.user_bias)?;
        write_vec(&mut w, &self.item_bias)?;
        binfmt::write_matrix(&mut w, &self.user_factors)?;
        binfmt::write_matrix(&mut w, &self.item_factors)?;
        write_opt_matrix(&mut w, self.user_text.as_ref())?;
        write_opt_matrix(&mut w, self.item_text.as_ref())?;
        match &self.kernel {
            Some(k) => {
                w.write_u8(1)?;
                binfmt::write_matrix(&mut w, &k.e)?;
                write_vec(&mut w, &k.feature_bias)?;
            }
            None => w.write_u8(0)?,
        }
        match &self.feature_hash {
            Some(h) => {
                w.write_u8(1)?;
                w.write_all(h)?;
            }
            None => w.write_u8(0)?,
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        binfmt::read_header(&mut r, RANK_MAGIC, RANK_VERSION)?;
        let tag = r.read_u8()?;
        let variant = Variant::from_tag(tag).ok_or_else(|| Error::Format(format!("unknown variant tag {tag}")))?;
        let alpha = binfmt::read_f64(&mut r)?;
        let user_bias = read_vec(&mut r)?;
        let item_bias = read_vec(&mut r)?;
        let user_factors = binfmt::read_matrix(&mut r)?;
        let item_factors = binfmt::read_matrix(&mut r)?;
        let user_text = if read_present(&mut r)? { Some(binfmt::read_matrix(&mut r)?) } else { None };
        let item_text = if read_present(&mut r)? { Some(binfmt::read_matrix(&mut r)?) } else { None };
        let kernel = if read_present(&mut r)? {
            let e = binfmt::read_matrix(&mut r)?;
            let feature_bias = read_vec(&mut r)?;
            Some(EmbeddingKernel { e, feature_bias })
        } else {
            None
        };
        let feature_hash = if read_present(&mut r)? {
            let mut h = [0u8; 32];
            r.read_exact(&mut h)?;
            Some(h)
        } else {
            None
        };
        binfmt::expect_eof(&mut r)?;

        let model = RankModel {
            variant,
            alpha,
            user_bias,
            item_bias,
            user_factors,
            item_factors,
            user_text,
            item_text,
            kernel,
            feature_hash,
        };
        model.check_shapes()?;
        Ok(model)
    }

    fn check_shapes(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Format(format!("inconsistent model file: {what}")));
        let (u, i) = (self.n_users(), self.n_items());
        if self.user_bias.len() != u || self.item_bias.len() != i || self.item_factors.cols() != self.k() {
            return bad("bias or factor shapes");
        }
        let text_ok = self.user_text.as_ref().is_none_or(|m| m.rows() == u)
            && self.item_text.as_ref().is_none_or(|m| m.rows() == i && m.cols() == self.text_k());
        if !text_ok {
            return bad("text factor shapes");
        }
        match self.variant {
            Variant::Bpr if self.user_text.is_some() || self.kernel.is_some() => bad("BPR with text blocks"),
            Variant::TbprVanilla if self.user_text.is_none() || self.kernel.is_some() => bad("vanilla t-BPR blocks"),
            Variant::TbprLearnt => match (&self.user_text, &self.kernel) {
                (Some(t), Some(k)) if k.e.rows() == t.cols() && k.feature_bias.len() == k.e.cols() => Ok(()),
                _ => bad("learnt t-BPR kernel shapes"),
            },
            _ => Ok(()),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_binary(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_binary(BufReader::new(File::open(path)?))
    }
}
