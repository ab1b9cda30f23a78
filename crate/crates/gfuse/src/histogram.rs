use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use gfuse_core::features::histograms;
use gfuse_core::Matrix;

use crate::error::{Error, Result};

pub const HEADER: &str = "dim\tbin_lo\tbin_hi\tcount";

/// Per-column histograms of `values` as TSV, one row per (dimension, bin).
pub fn histogram_tsv(values: &Matrix, bins: usize) -> Result<String> {
    let mut out = String::from(HEADER);
    out.push('\n');
    for h in histograms(values, bins)? {
        for (b, count) in h.counts.iter().enumerate() {
            writeln!(out, "{}\t{}\t{}\t{}", h.dim, h.edges[b], h.edges[b + 1], count).expect("string write");
        }
    }
    Ok(out)
}

pub fn write_histograms(values: &Matrix, bins: usize, path: &Path) -> Result<()> {
    let text = histogram_tsv(values, bins)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
