//! On-disk dataset directories.
//!
//! ```text
//! meta.json      {"num_nodes", "feat_dim", "num_classes", "directed"}
//! edges.tsv      src<TAB>dst per line
//! features.bin   little-endian f32, row-major num_nodes x feat_dim
//! labels.tsv     node<TAB>class per line; absent nodes are unlabeled
//! splits/{train,val,test}.txt   one node id per line
//! ```
//! Blank lines are ignored. Undirected edge lists are symmetrized.

use std::fs;
use std::path::Path;

use gfuse_core::graph::{DatasetMeta, GraphDataset, SparseAdjacency, Splits};
use gfuse_core::Matrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetaFile {
    num_nodes: usize,
    feat_dim: usize,
    num_classes: usize,
    directed: bool,
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    String::from_utf8(read(path)?).map_err(|_| Error::malformed(path, None, "not valid UTF-8"))
}

fn parse_node(path: &Path, line: usize, tok: &str, n: usize) -> Result<usize> {
    let u: usize = tok
        .parse()
        .map_err(|_| Error::malformed(path, Some(line), format!("`{tok}` is not a node id")))?;
    if u >= n {
        return Err(Error::malformed(path, Some(line), format!("node {u} out of range for {n} nodes")));
    }
    Ok(u)
}

/// Non-blank lines with their 1-based numbers, split on tabs.
fn records(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r').split('\t').map(str::trim).collect()))
}

fn two_fields<'a>(path: &Path, line: usize, fields: &[&'a str]) -> Result<(&'a str, &'a str)> {
    match fields {
        [a, b] => Ok((a, b)),
        _ => Err(Error::malformed(path, Some(line), format!("expected 2 tab-separated fields, got {}", fields.len()))),
    }
}

fn read_split(path: &Path, n: usize) -> Result<Vec<usize>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = read_text(path)?;
    records(&text)
        .map(|(line, f)| match f.as_slice() {
            [tok] => parse_node(path, line, tok, n),
            _ => Err(Error::malformed(path, Some(line), "expected one node id")),
        })
        .collect()
}

pub fn load_dataset(dir: &Path) -> Result<GraphDataset> {
    let meta_path = dir.join("meta.json");
    let meta: MetaFile = serde_json::from_slice(&read(&meta_path)?)
        .map_err(|e| Error::malformed(&meta_path, Some(e.line()), e.to_string()))?;
    let meta = DatasetMeta {
        num_nodes: meta.num_nodes,
        feat_dim: meta.feat_dim,
        num_classes: meta.num_classes,
        directed: meta.directed,
    };
    meta.validate().map_err(|e| Error::malformed(&meta_path, None, e.to_string()))?;
    let n = meta.num_nodes;

    let edges_path = dir.join("edges.tsv");
    let text = read_text(&edges_path)?;
    let mut edges = Vec::new();
    for (line, f) in records(&text) {
        let (a, b) = two_fields(&edges_path, line, &f)?;
        edges.push((parse_node(&edges_path, line, a, n)?, parse_node(&edges_path, line, b, n)?));
    }
    let adjacency = SparseAdjacency::from_edges(n, &edges, !meta.directed)
        .map_err(|e| Error::malformed(&edges_path, None, e.to_string()))?;

    let feat_path = dir.join("features.bin");
    let raw = read(&feat_path)?;
    let want = n * meta.feat_dim * 4;
    if raw.len() != want {
        return Err(Error::malformed(&feat_path, None, format!("{} bytes, expected {want}", raw.len())));
    }
    let data = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    let features = Matrix::from_vec(n, meta.feat_dim, data)?;
    if !features.is_finite() {
        return Err(Error::malformed(&feat_path, None, "non-finite feature value"));
    }

    let labels_path = dir.join("labels.tsv");
    let text = read_text(&labels_path)?;
    let mut labels = vec![None; n];
    for (line, f) in records(&text) {
        let (a, b) = two_fields(&labels_path, line, &f)?;
        let u = parse_node(&labels_path, line, a, n)?;
        let c: usize = b
            .parse()
            .map_err(|_| Error::malformed(&labels_path, Some(line), format!("`{b}` is not a class id")))?;
        if c >= meta.num_classes {
            return Err(Error::malformed(
                &labels_path,
                Some(line),
                format!("class {c} out of range for {} classes", meta.num_classes),
            ));
        }
        if labels[u].replace(c).is_some() {
            return Err(Error::malformed(&labels_path, Some(line), format!("node {u} labeled twice")));
        }
    }

    let split_dir = dir.join("splits");
    let splits = Splits {
        train: read_split(&split_dir.join("train.txt"), n)?,
        val: read_split(&split_dir.join("val.txt"), n)?,
        test: read_split(&split_dir.join("test.txt"), n)?,
    };
    let name = dir
        .canonicalize()
        .ok()
        .and_then(|p| p.file_name().map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_else(|| dir.display().to_string());
    GraphDataset::new(&name, meta, adjacency, features, labels, splits)
        .map_err(|e| Error::malformed(dir, None, e.to_string()))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes `graph` in the directory format. Features are stored as f32.
pub fn write_dataset(graph: &GraphDataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir.join("splits")).map_err(|e| Error::io(dir, e))?;
    let m = graph.meta();
    let meta = MetaFile {
        num_nodes: m.num_nodes,
        feat_dim: m.feat_dim,
        num_classes: m.num_classes,
        directed: m.directed,
    };
    write(&dir.join("meta.json"), &serde_json::to_vec_pretty(&meta).expect("plain struct"))?;

    let mut edges = String::new();
    for (u, v) in graph.adjacency().edges() {
        if m.directed || u <= v {
            edges.push_str(&format!("{u}\t{v}\n"));
        }
    }
    write(&dir.join("edges.tsv"), edges.as_bytes())?;

    let bytes: Vec<u8> = graph
        .features()
        .as_slice()
        .iter()
        .flat_map(|&x| (x as f32).to_le_bytes())
        .collect();
    write(&dir.join("features.bin"), &bytes)?;

    let mut labels = String::new();
    for (u, l) in graph.labels().iter().enumerate() {
        if let Some(l) = l {
            labels.push_str(&format!("{u}\t{l}\n"));
        }
    }
    write(&dir.join("labels.tsv"), labels.as_bytes())?;

    for (name, nodes) in [
        ("train", &graph.splits().train),
        ("val", &graph.splits().val),
        ("test", &graph.splits().test),
    ] {
        let body: String = nodes.iter().map(|u| format!("{u}\n")).collect();
        write(&dir.join("splits").join(format!("{name}.txt")), body.as_bytes())?;
    }
    Ok(())
}
