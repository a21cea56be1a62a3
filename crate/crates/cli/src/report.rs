//! Plain-text tables, CSV files and the AUC report.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use subrec_core::eval::AucReport;

/// Left-aligned first column, right-aligned others.
pub fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: &mut dyn Iterator<Item = &str>| {
        let mut parts = Vec::new();
        for (c, (cell, w)) in cells.zip(&widths).enumerate() {
            parts.push(if c == 0 { format!("{cell:<w$}") } else { format!("{cell:>w$}") });
        }
        out.push_str(parts.join("  ").trim_end());
        out.push('\n');
    };
    line(&mut out, &mut header.iter().copied());
    for r in rows {
        line(&mut out, &mut r.iter().map(String::as_str));
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    let mut push = |cells: Vec<String>| {
        out.push_str(&cells.iter().map(|c| csv_field(c)).collect::<Vec<_>>().join(","));
        out.push('\n');
    };
    push(header.iter().map(|h| h.to_string()).collect());
    for r in rows {
        push(r.clone());
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Everything that identifies an evaluation, apart from file locations.
pub struct AucContext<'a> {
    pub model_kind: &'a str,
    pub model_sha256: &'a str,
    pub features_sha256: Option<&'a str>,
    pub mode: &'a str,
    pub sample_per_user: Option<usize>,
    pub seed: Option<u64>,
}

/// `key = value` lines. Reals use shortest round-trip formatting so reruns
/// compare byte for byte.
pub fn auc_text(report: &AucReport, ctx: &AucContext) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# pairwise AUC over held-out interactions");
    let _ = writeln!(s, "model_kind = {}", ctx.model_kind);
    let _ = writeln!(s, "model_sha256 = {}", ctx.model_sha256);
    if let Some(f) = ctx.features_sha256 {
        let _ = writeln!(s, "features_sha256 = {f}");
    }
    let _ = writeln!(s, "mode = {}", ctx.mode);
    if let Some(n) = ctx.sample_per_user {
        let _ = writeln!(s, "sample_per_user = {n}");
    }
    if let Some(seed) = ctx.seed {
        let _ = writeln!(s, "seed = {seed}");
    }
    let _ = writeln!(s, "auc = {:?}", report.auc);
    let _ = writeln!(s, "users_evaluated = {}", report.users_evaluated);
    let _ = writeln!(s, "users_skipped = {}", report.users_skipped);
    let _ = writeln!(s, "pairs_evaluated = {}", report.pairs_evaluated);
    let _ = writeln!(s, "skip_rule = users whose held-out or negative set is empty are left out of the mean");
    s
}

pub fn per_user_csv(report: &AucReport, user_names: &[String]) -> String {
    let rows: Vec<Vec<String>> = report
        .per_user
        .iter()
        .map(|u| vec![user_names[u.user].clone(), format!("{:?}", u.auc), u.pairs.to_string()])
        .collect();
    csv(&["user", "auc", "pairs"], &rows)
}
