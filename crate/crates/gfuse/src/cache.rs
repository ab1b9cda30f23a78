//! Propagated channel features persisted between runs.
//!
//! Layout: `<cache_dir>/<dataset digest>/<channel>.f32`, a 16-byte header
//! followed by the row-major matrix as little-endian f32. The header is the
//! first 16 bytes of SHA-256 over the channel key and the body, so a stale
//! key and a damaged body are both caught and recomputed.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use gfuse_core::conv::{channel_key, propagate};
use gfuse_core::digest::{sha256, short_hex};
use gfuse_core::{ChannelSpec, FeatureCache, GraphDataset, Matrix, PropagationConfig};

use crate::error::{Error, Result};

const HEADER: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CacheStatus {
    Hit,
    Miss,
    /// A file was present but failed its checksum; it has been rewritten.
    Corrupt,
    /// No cache directory configured.
    Uncached,
}

#[derive(Clone, Debug)]
pub struct ChannelLoad {
    pub name: String,
    pub status: CacheStatus,
    pub ms: f64,
}

pub fn cache_path(cache_dir: &Path, graph: &GraphDataset, spec: &ChannelSpec) -> PathBuf {
    cache_dir
        .join(short_hex(graph.content_digest()))
        .join(format!("{}.f32", spec.name))
}

fn header(key: &[u8; 16], body: &[u8]) -> [u8; HEADER] {
    let mut buf = Vec::with_capacity(key.len() + body.len());
    buf.extend_from_slice(key);
    buf.extend_from_slice(body);
    sha256(&buf)[..HEADER].try_into().expect("16 bytes")
}

fn encode(m: &Matrix) -> Vec<u8> {
    m.as_slice().iter().flat_map(|&x| (x as f32).to_le_bytes()).collect()
}

/// `None` when the file is absent; `Some(None)` when it does not verify.
fn read_cached(path: &Path, key: &[u8; 16], rows: usize, cols: usize) -> Result<Option<Option<Matrix>>> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(Error::io(path, e)),
    };
    if bytes.len() != HEADER + rows * cols * 4 {
        return Ok(Some(None));
    }
    let (head, body) = bytes.split_at(HEADER);
    if head != header(key, body) {
        return Ok(Some(None));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    Ok(Some(Some(Matrix::from_vec(rows, cols, data)?)))
}

fn write_cached(path: &Path, key: &[u8; 16], m: &Matrix) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let body = encode(m);
    let mut bytes = Vec::with_capacity(HEADER + body.len());
    bytes.extend_from_slice(&header(key, &body));
    bytes.extend_from_slice(&body);
    let tmp = path.with_extension("f32.tmp");
    fs::write(&tmp, &bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Features for every spec, read from `cache_dir` when valid and computed
/// (then stored) otherwise. Values are rounded to f32 on every path, so a
/// warm run sees exactly what a cold run computed.
pub fn load_channels(
    graph: &GraphDataset,
    specs: &[ChannelSpec],
    cfg: &PropagationConfig,
    cache_dir: Option<&Path>,
) -> Result<(Vec<FeatureCache>, Vec<ChannelLoad>)> {
    gfuse_core::conv::ensure_unique(specs)?;
    let (n, d) = (graph.num_nodes(), graph.meta().feat_dim);
    let mut out = Vec::with_capacity(specs.len());
    let mut log = Vec::with_capacity(specs.len());
    for spec in specs {
        let start = Instant::now();
        let key = channel_key(spec, graph, cfg);
        let path = cache_dir.map(|dir| cache_path(dir, graph, spec));
        let cached = match &path {
            Some(p) => read_cached(p, &key, n, d)?,
            None => None,
        };
        let (features, status) = match cached {
            Some(Some(m)) => (m, CacheStatus::Hit),
            other => {
                let mut m = propagate(spec, graph, cfg)?.features;
                m.round_to_f32();
                let status = match (&path, other) {
                    (None, _) => CacheStatus::Uncached,
                    (Some(p), other) => {
                        write_cached(p, &key, &m)?;
                        if other.is_some() {
                            CacheStatus::Corrupt
                        } else {
                            CacheStatus::Miss
                        }
                    }
                };
                (m, status)
            }
        };
        out.push(FeatureCache {
            name: spec.name.clone(),
            features,
            key,
        });
        log.push(ChannelLoad {
            name: spec.name.clone(),
            status,
            ms: start.elapsed().as_secs_f64() * 1e3,
        });
    }
    Ok((out, log))
}
