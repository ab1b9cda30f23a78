//! Content digests used to key feature caches and to checksum model files.

use sha2::{Digest, Sha256};

use crate::graph::{DatasetMeta, SparseAdjacency};
use crate::matrix::Matrix;

pub fn sha256(bytes: &[u8]) -> [u8; 32] {
    Sha256::digest(bytes).into()
}

pub(crate) fn dataset_digest(meta: &DatasetMeta, adj: &SparseAdjacency, features: &Matrix) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"gfuse-dataset-v1");
    h.update((meta.num_nodes as u64).to_le_bytes());
    h.update((meta.feat_dim as u64).to_le_bytes());
    h.update((meta.num_classes as u64).to_le_bytes());
    h.update([meta.directed as u8]);
    for &o in adj.row_offsets() {
        h.update((o as u64).to_le_bytes());
    }
    for &c in adj.col_indices() {
        h.update((c as u64).to_le_bytes());
    }
    for &v in adj.values() {
        h.update(v.to_bits().to_le_bytes());
    }
    for &v in features.as_slice() {
        h.update(v.to_bits().to_le_bytes());
    }
    h.finalize().into()
}

/// Lowercase hex of the first 16 bytes.
pub fn short_hex(d: &[u8]) -> alloc::string::String {
    use core::fmt::Write;
    let mut s = alloc::string::String::with_capacity(32);
    for b in d.iter().take(16) {
        let _ = write!(s, "{b:02x}");
    }
    s
}
