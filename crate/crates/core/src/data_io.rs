//! On-disk formats: dataset bundles, interaction lists, embeddings, and
//! classifier checkpoints.
//!
//! A bundle is a directory with a `manifest.json` naming four data files
//! and their SHA-256 digests: `graph.tsv` (one undirected edge per line,
//! `u <= v`, `#` comments allowed), `labels.tsv` (known nodes only),
//! `splits.json`, and either `features.csv` or `features.bin`. Every load
//! re-hashes the files against the manifest, so silent corruption surfaces
//! as an error rather than as wrong numbers.

use crate::edge_model::EdgeClassifierParams;
use crate::graph::{Graph, GraphError, LabelVector, NodeSplits};
use crate::matrix::{FeatureMatrix, MatrixError};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataIoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("json in {file}: {source}")]
    Json {
        file: String,
        source: serde_json::Error,
    },
    #[error("{file}:{line}: {message}")]
    MalformedLine {
        file: String,
        line: usize,
        message: String,
    },
    #[error("checksum mismatch for {file}: manifest says {expected}, content hashes to {got}")]
    ChecksumMismatch {
        file: String,
        expected: String,
        got: String,
    },
    #[error("{file}: expected {expected} {what}, found {got}")]
    CountMismatch {
        file: String,
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{file}: bad magic, not a feature matrix file")]
    BadMagic { file: String },
    #[error("unsupported format version {got}, this build reads version {supported}")]
    UnsupportedVersion { got: u32, supported: u32 },
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

pub const BUNDLE_FORMAT_VERSION: u32 = 1;
pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;
const FEATURE_MAGIC: &[u8; 8] = b"FMATRIX1";
/// Above this many values the binary feature codec is used.
const BINARY_THRESHOLD: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleFiles {
    pub graph: FileEntry,
    pub features: FileEntry,
    pub labels: FileEntry,
    pub splits: FileEntry,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub format_version: u32,
    pub num_nodes: usize,
    pub num_classes: usize,
    pub symmetric: bool,
    pub has_self_loops: bool,
    pub files: BundleFiles,
}

/// In-memory form of a loaded bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub graph: Graph,
    pub features: FeatureMatrix,
    pub labels: LabelVector,
    pub splits: NodeSplits,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn write_and_digest(path: &Path, bytes: &[u8]) -> Result<FileEntry, DataIoError> {
    fs::write(path, bytes)?;
    Ok(FileEntry {
        name: file_name(path),
        sha256: sha256_hex(bytes),
    })
}

/// Serializes a graph's undirected edges, self-loops included, as sorted
/// `u<TAB>v` lines with `u <= v`.
pub fn graph_to_tsv(graph: &Graph) -> String {
    let mut edges: Vec<(usize, usize)> = graph.undirected_non_self_edges().collect();
    edges.extend(graph.self_loop_nodes().into_iter().map(|v| (v, v)));
    edges.sort_unstable();
    let mut out = String::new();
    for (u, v) in edges {
        out.push_str(&format!("{u}\t{v}\n"));
    }
    out
}

fn parse_graph_tsv(text: &str, file: &str, num_nodes: usize) -> Result<Vec<(usize, usize)>, DataIoError> {
    let mut edges = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split('\t');
        let (u, v) = match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), None) => {
                let parse = |s: &str, what: &str| {
                    s.trim().parse::<usize>().map_err(|e| DataIoError::MalformedLine {
                        file: file.to_string(),
                        line: idx + 1,
                        message: format!("{what} `{s}`: {e}"),
                    })
                };
                (parse(a, "endpoint")?, parse(b, "endpoint")?)
            }
            _ => {
                return Err(DataIoError::MalformedLine {
                    file: file.to_string(),
                    line: idx + 1,
                    message: "expected two tab-separated endpoints".into(),
                })
            }
        };
        if u > v {
            return Err(DataIoError::MalformedLine {
                file: file.to_string(),
                line: idx + 1,
                message: format!("edges are stored with u <= v, got ({u}, {v})"),
            });
        }
        if v >= num_nodes {
            return Err(DataIoError::MalformedLine {
                file: file.to_string(),
                line: idx + 1,
                message: format!("endpoint {v} out of range for {num_nodes} nodes"),
            });
        }
        edges.push((u, v));
    }
    Ok(edges)
}

/// Serializes known labels as `node<TAB>class` lines.
pub fn labels_to_tsv(labels: &LabelVector) -> String {
    let mut out = String::new();
    for v in 0..labels.len() {
        if let Some(c) = labels.label_of(v) {
            out.push_str(&format!("{v}\t{c}\n"));
        }
    }
    out
}

fn parse_labels_tsv(
    text: &str,
    file: &str,
    num_nodes: usize,
    num_classes: usize,
) -> Result<LabelVector, DataIoError> {
    let mut labels = vec![0usize; num_nodes];
    let mut mask = vec![false; num_nodes];
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split('\t');
        let (node, class) = match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), None) => {
                let parse = |s: &str| {
                    s.trim().parse::<usize>().map_err(|e| DataIoError::MalformedLine {
                        file: file.to_string(),
                        line: idx + 1,
                        message: format!("`{s}`: {e}"),
                    })
                };
                (parse(a)?, parse(b)?)
            }
            _ => {
                return Err(DataIoError::MalformedLine {
                    file: file.to_string(),
                    line: idx + 1,
                    message: "expected node<TAB>class".into(),
                })
            }
        };
        if node >= num_nodes {
            return Err(DataIoError::MalformedLine {
                file: file.to_string(),
                line: idx + 1,
                message: format!("node {node} out of range for {num_nodes} nodes"),
            });
        }
        if mask[node] {
            return Err(DataIoError::MalformedLine {
                file: file.to_string(),
                line: idx + 1,
                message: format!("node {node} labeled twice"),
            });
        }
        labels[node] = class;
        mask[node] = true;
    }
    Ok(LabelVector::new(labels, num_classes, Some(mask))?)
}

/// Serializes a feature matrix as comma-separated shortest-round-trip
/// decimal rows.
pub fn features_to_csv(x: &FeatureMatrix) -> String {
    let mut out = String::new();
    for r in 0..x.rows() {
        let row = x.row(r);
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&format!("{v}"));
        }
        out.push('\n');
    }
    out
}

/// Parses a comma-separated feature matrix; every row must have the same
/// width.
pub fn features_from_csv(text: &str, file: &str) -> Result<FeatureMatrix, DataIoError> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        let row: Vec<f64> = line
            .split(',')
            .map(|cell| {
                cell.trim().parse::<f64>().map_err(|e| DataIoError::MalformedLine {
                    file: file.to_string(),
                    line: idx + 1,
                    message: format!("`{cell}`: {e}"),
                })
            })
            .collect::<Result<_, _>>()?;
        if let Some(w) = width {
            if row.len() != w {
                return Err(DataIoError::CountMismatch {
                    file: file.to_string(),
                    what: "columns",
                    expected: w,
                    got: row.len(),
                });
            }
        } else {
            width = Some(row.len());
        }
        rows.push(row);
    }
    Ok(FeatureMatrix::from_rows(&rows)?)
}

/// Binary feature codec: 8-byte magic, u64 LE row and column counts, then
/// row-major f64 LE values.
pub fn features_to_bin(x: &FeatureMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + 8 * x.values().len());
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&(x.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(x.cols() as u64).to_le_bytes());
    for v in x.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn features_from_bin(bytes: &[u8], file: &str) -> Result<FeatureMatrix, DataIoError> {
    if bytes.len() < 24 || &bytes[..8] != FEATURE_MAGIC {
        return Err(DataIoError::BadMagic { file: file.to_string() });
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().expect("sized slice")) as usize;
    let cols = u64::from_le_bytes(bytes[16..24].try_into().expect("sized slice")) as usize;
    let expected = 24 + 8 * rows * cols;
    if bytes.len() != expected {
        return Err(DataIoError::CountMismatch {
            file: file.to_string(),
            what: "bytes",
            expected,
            got: bytes.len(),
        });
    }
    let values: Vec<f64> = bytes[24..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("sized chunk")))
        .collect();
    Ok(FeatureMatrix::from_values(rows, cols, values)?)
}

/// Writes a bundle directory, choosing the binary feature codec for large
/// matrices, and returns the manifest that was written.
pub fn save_bundle(
    dir: &Path,
    graph: &Graph,
    features: &FeatureMatrix,
    labels: &LabelVector,
    splits: &NodeSplits,
) -> Result<BundleManifest, DataIoError> {
    if features.rows() != graph.num_nodes() {
        return Err(DataIoError::Matrix(MatrixError::DimensionMismatch {
            context: "feature rows",
            expected: graph.num_nodes(),
            got: features.rows(),
        }));
    }
    if labels.len() != graph.num_nodes() {
        return Err(DataIoError::Graph(GraphError::LabelLengthMismatch {
            expected: graph.num_nodes(),
            got: labels.len(),
        }));
    }
    splits.validate(graph.num_nodes())?;
    fs::create_dir_all(dir)?;

    let graph_entry = write_and_digest(&dir.join("graph.tsv"), graph_to_tsv(graph).as_bytes())?;
    let features_entry = if features.values().len() > BINARY_THRESHOLD {
        write_and_digest(&dir.join("features.bin"), &features_to_bin(features))?
    } else {
        write_and_digest(&dir.join("features.csv"), features_to_csv(features).as_bytes())?
    };
    let labels_entry = write_and_digest(&dir.join("labels.tsv"), labels_to_tsv(labels).as_bytes())?;
    let mut sorted = splits.clone();
    sorted.train.sort_unstable();
    sorted.val.sort_unstable();
    sorted.test.sort_unstable();
    let splits_json = serde_json::to_string_pretty(&sorted).expect("serializable splits");
    let splits_entry = write_and_digest(&dir.join("splits.json"), splits_json.as_bytes())?;

    let manifest = BundleManifest {
        format_version: BUNDLE_FORMAT_VERSION,
        num_nodes: graph.num_nodes(),
        num_classes: labels.num_classes(),
        symmetric: graph.is_symmetric(),
        has_self_loops: graph.has_self_loops(),
        files: BundleFiles {
            graph: graph_entry,
            features: features_entry,
            labels: labels_entry,
            splits: splits_entry,
        },
    };
    let manifest_json = serde_json::to_string_pretty(&manifest).expect("serializable manifest");
    fs::write(dir.join("manifest.json"), manifest_json)?;
    Ok(manifest)
}

fn read_verified(dir: &Path, entry: &FileEntry) -> Result<Vec<u8>, DataIoError> {
    let bytes = fs::read(dir.join(&entry.name))?;
    let got = sha256_hex(&bytes);
    if got != entry.sha256 {
        return Err(DataIoError::ChecksumMismatch {
            file: entry.name.clone(),
            expected: entry.sha256.clone(),
            got,
        });
    }
    Ok(bytes)
}

fn read_json<T: for<'de> Deserialize<'de>>(bytes: &[u8], file: &str) -> Result<T, DataIoError> {
    serde_json::from_slice(bytes).map_err(|source| DataIoError::Json {
        file: file.to_string(),
        source,
    })
}

pub fn load_manifest(dir: &Path) -> Result<BundleManifest, DataIoError> {
    let bytes = fs::read(dir.join("manifest.json"))?;
    let manifest: BundleManifest = read_json(&bytes, "manifest.json")?;
    if manifest.format_version != BUNDLE_FORMAT_VERSION {
        return Err(DataIoError::UnsupportedVersion {
            got: manifest.format_version,
            supported: BUNDLE_FORMAT_VERSION,
        });
    }
    if !manifest.symmetric {
        return Err(DataIoError::InvalidManifest(
            "directed bundles are not supported".into(),
        ));
    }
    Ok(manifest)
}

/// Loads and verifies a bundle directory.
pub fn load_bundle(dir: &Path) -> Result<Bundle, DataIoError> {
    let manifest = load_manifest(dir)?;
    let graph_bytes = read_verified(dir, &manifest.files.graph)?;
    let graph_text = String::from_utf8_lossy(&graph_bytes);
    let edges = parse_graph_tsv(&graph_text, &manifest.files.graph.name, manifest.num_nodes)?;
    let graph = Graph::build(&edges, manifest.num_nodes, true, false)?;
    if graph.has_self_loops() != manifest.has_self_loops {
        return Err(DataIoError::InvalidManifest(format!(
            "manifest says has_self_loops = {}, graph file disagrees",
            manifest.has_self_loops
        )));
    }

    let feature_bytes = read_verified(dir, &manifest.files.features)?;
    let features = if manifest.files.features.name.ends_with(".bin") {
        features_from_bin(&feature_bytes, &manifest.files.features.name)?
    } else {
        features_from_csv(
            &String::from_utf8_lossy(&feature_bytes),
            &manifest.files.features.name,
        )?
    };
    if features.rows() != manifest.num_nodes {
        return Err(DataIoError::CountMismatch {
            file: manifest.files.features.name.clone(),
            what: "rows",
            expected: manifest.num_nodes,
            got: features.rows(),
        });
    }

    let label_bytes = read_verified(dir, &manifest.files.labels)?;
    let labels = parse_labels_tsv(
        &String::from_utf8_lossy(&label_bytes),
        &manifest.files.labels.name,
        manifest.num_nodes,
        manifest.num_classes,
    )?;

    let split_bytes = read_verified(dir, &manifest.files.splits)?;
    let mut splits: NodeSplits = read_json(&split_bytes, &manifest.files.splits.name)?;
    splits.validate(manifest.num_nodes)?;
    splits.train.sort_unstable();
    splits.val.sort_unstable();
    splits.test.sort_unstable();

    Ok(Bundle {
        graph,
        features,
        labels,
        splits,
    })
}

/// SHA-256 of a file's bytes, hex encoded.
pub fn file_sha256(path: &Path) -> Result<String, DataIoError> {
    Ok(sha256_hex(&fs::read(path)?))
}

/// Order-independent digest of named digests: the sorted `name:digest`
/// lines are hashed together.
pub fn combine_digests(entries: &[(String, String)]) -> String {
    let mut lines: Vec<String> = entries
        .iter()
        .map(|(name, digest)| format!("{name}:{digest}\n"))
        .collect();
    lines.sort();
    sha256_hex(lines.concat().as_bytes())
}

/// Content identity of a bundle: SHA-256 over the sorted `name:digest`
/// lines of its data files, independent of where the bundle lives.
pub fn bundle_content_hash(dir: &Path) -> Result<String, DataIoError> {
    let manifest = load_manifest(dir)?;
    let mut entries: Vec<(String, String)> = Vec::new();
    for entry in [
        &manifest.files.graph,
        &manifest.files.features,
        &manifest.files.labels,
        &manifest.files.splits,
    ] {
        entries.push((entry.name.clone(), file_sha256(&dir.join(&entry.name))?));
    }
    Ok(combine_digests(&entries))
}

/// Parses `user<TAB>item[<TAB>weight]` interaction lines; the weight
/// defaults to 1.
pub fn load_interactions(path: &Path) -> Result<Vec<(usize, usize, f64)>, DataIoError> {
    let file = file_name(path);
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split('\t').collect();
        if parts.len() != 2 && parts.len() != 3 {
            return Err(DataIoError::MalformedLine {
                file: file.clone(),
                line: idx + 1,
                message: "expected user<TAB>item with optional weight".into(),
            });
        }
        let parse_id = |s: &str| {
            s.trim().parse::<usize>().map_err(|e| DataIoError::MalformedLine {
                file: file.clone(),
                line: idx + 1,
                message: format!("`{s}`: {e}"),
            })
        };
        let user = parse_id(parts[0])?;
        let item = parse_id(parts[1])?;
        let weight = if parts.len() == 3 {
            parts[2].trim().parse::<f64>().map_err(|e| DataIoError::MalformedLine {
                file: file.clone(),
                line: idx + 1,
                message: format!("weight `{}`: {e}", parts[2]),
            })?
        } else {
            1.0
        };
        out.push((user, item, weight));
    }
    Ok(out)
}

/// Writes interactions as `user<TAB>item<TAB>weight` lines.
pub fn save_interactions(path: &Path, interactions: &[(usize, usize, f64)]) -> Result<(), DataIoError> {
    let mut out = String::new();
    for &(u, i, w) in interactions {
        out.push_str(&format!("{u}\t{i}\t{w}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Sidecar description of an embedding file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingsMeta {
    pub num_users: usize,
    pub num_items: usize,
    pub dim: usize,
    /// Binary matrix file, relative to this meta file.
    pub file: String,
}

/// Writes user-then-item embeddings as a binary matrix plus a JSON meta
/// file at `meta_path`.
pub fn save_embeddings(
    meta_path: &Path,
    x: &FeatureMatrix,
    num_users: usize,
    num_items: usize,
) -> Result<(), DataIoError> {
    if x.rows() != num_users + num_items {
        return Err(DataIoError::CountMismatch {
            file: file_name(meta_path),
            what: "rows",
            expected: num_users + num_items,
            got: x.rows(),
        });
    }
    let bin_name = format!("{}.bin", meta_path.file_stem().unwrap_or_default().to_string_lossy());
    let bin_path = meta_path.with_file_name(&bin_name);
    fs::write(&bin_path, features_to_bin(x))?;
    let meta = EmbeddingsMeta {
        num_users,
        num_items,
        dim: x.cols(),
        file: bin_name,
    };
    fs::write(
        meta_path,
        serde_json::to_string_pretty(&meta).expect("serializable meta"),
    )?;
    Ok(())
}

/// Loads an embedding matrix through its meta file and validates shapes.
pub fn load_embeddings(meta_path: &Path) -> Result<(FeatureMatrix, EmbeddingsMeta), DataIoError> {
    let bytes = fs::read(meta_path)?;
    let meta: EmbeddingsMeta = read_json(&bytes, &file_name(meta_path))?;
    let dir: PathBuf = meta_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let bin = fs::read(dir.join(&meta.file))?;
    let x = features_from_bin(&bin, &meta.file)?;
    if x.rows() != meta.num_users + meta.num_items {
        return Err(DataIoError::CountMismatch {
            file: meta.file.clone(),
            what: "rows",
            expected: meta.num_users + meta.num_items,
            got: x.rows(),
        });
    }
    if x.cols() != meta.dim {
        return Err(DataIoError::CountMismatch {
            file: meta.file.clone(),
            what: "columns",
            expected: meta.dim,
            got: x.cols(),
        });
    }
    Ok((x, meta))
}

/// Which embedding the edge classifier was trained on: two-step propagated
/// features or raw features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingKind {
    A2x,
    Raw,
}

/// Serializable edge-classifier checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeCheckpoint {
    pub schema_version: u32,
    pub embedding: EmbeddingKind,
    pub params: EdgeClassifierParams,
}

impl EdgeCheckpoint {
    pub fn new(embedding: EmbeddingKind, params: EdgeClassifierParams) -> Self {
        EdgeCheckpoint {
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            embedding,
            params,
        }
    }
}

pub fn save_checkpoint(path: &Path, checkpoint: &EdgeCheckpoint) -> Result<(), DataIoError> {
    let json = serde_json::to_string_pretty(checkpoint).expect("serializable checkpoint");
    fs::write(path, json)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<EdgeCheckpoint, DataIoError> {
    let bytes = fs::read(path)?;
    let checkpoint: EdgeCheckpoint = read_json(&bytes, &file_name(path))?;
    if checkpoint.schema_version != CHECKPOINT_SCHEMA_VERSION {
        return Err(DataIoError::UnsupportedVersion {
            got: checkpoint.schema_version,
            supported: CHECKPOINT_SCHEMA_VERSION,
        });
    }
    Ok(checkpoint)
}
