//! JSON model files.
//!
//! Floats are stored as strings holding the shortest decimal that parses
//! back to the same bits.

use std::path::Path;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use crate::build::{Children, PilotTree, StopReason, TreeNode, TreeStats};
use crate::data::ColumnMeta;
use crate::error::{PilotError, Result};
use crate::params::Hyperparams;
use crate::scan::{LinearPiece, ModelKind, NodeFit, Pivot};

pub const SCHEMA_VERSION: u32 = 1;

/// An `f64` encoded as a lossless decimal string.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Dec(f64);

impl Serialize for Dec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let x = self.0;
        let a = x.abs();
        // Display never uses an exponent, which gets long at the extremes.
        let text = if x == 0.0 || (1e-5..1e16).contains(&a) { format!("{x}") } else { format!("{x:e}") };
        s.serialize_str(&text)
    }
}

impl<'de> Deserialize<'de> for Dec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Dec(v)),
            _ => Err(de::Error::custom(format!("invalid float string {text:?}"))),
        }
    }
}

fn pair(p: &LinearPiece) -> [Dec; 2] {
    [Dec(p.intercept), Dec(p.slope)]
}

fn unpair(p: [Dec; 2]) -> LinearPiece {
    LinearPiece {
        intercept: p[0].0,
        slope: p[1].0,
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileStats {
    n_nodes: usize,
    n_leaves: usize,
    max_depth: usize,
    train_rss: Dec,
    n_train: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileNode {
    kind: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    predictor: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pivot: Option<Dec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pivot_set: Option<Vec<u32>>,
    coef_l: [Dec; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coef_r: Option<[Dec; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    range: Option<[Dec; 2]>,
    n_cases: usize,
    n_left: usize,
    n_right: usize,
    weight: Dec,
    depth: usize,
    bic: Dec,
    rss_before: Dec,
    rss_after: Dec,
    gain: Dec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stop: Option<StopReason>,
    children: Vec<FileNode>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileModel {
    schema_version: u32,
    hyperparams: Hyperparams,
    offset: Dec,
    #[serde(rename = "bound_B")]
    bound_b: Dec,
    target: String,
    columns: Vec<ColumnMeta>,
    stats: FileStats,
    root: FileNode,
}

#[derive(Deserialize)]
struct VersionProbe {
    schema_version: u32,
}

fn to_file(node: &TreeNode) -> FileNode {
    let fit = &node.fit;
    let (pivot, pivot_set) = match &fit.pivot {
        Some(Pivot::Value(v)) => (Some(Dec(*v)), None),
        Some(Pivot::Levels(s)) => (None, Some(s.clone())),
        None => (None, None),
    };
    let children = match &node.children {
        Children::Leaf => Vec::new(),
        Children::Continue(c) => vec![to_file(c)],
        Children::Split { left, right } => vec![to_file(left), to_file(right)],
    };
    FileNode {
        kind: fit.kind,
        predictor: fit.predictor,
        pivot,
        pivot_set,
        coef_l: pair(&fit.coef_left),
        coef_r: fit.coef_right.as_ref().map(pair),
        range: fit.range.map(|(a, b)| [Dec(a), Dec(b)]),
        n_cases: node.n_cases,
        n_left: fit.n_left,
        n_right: fit.n_right,
        weight: Dec(node.weight),
        depth: node.depth,
        bic: Dec(fit.bic),
        rss_before: Dec(fit.rss_before),
        rss_after: Dec(fit.rss_after),
        gain: Dec(fit.gain),
        stop: node.stop,
        children,
    }
}

fn from_file(f: FileNode, columns: &[ColumnMeta], path: &str) -> Result<TreeNode> {
    let bad = |msg: String| Err(PilotError::ModelFormat(format!("node {path}: {msg}")));
    if let Some(j) = f.predictor {
        if j >= columns.len() {
            return bad(format!("predictor {j} out of range"));
        }
    }
    let expected_children = match f.kind {
        ModelKind::Con => 0,
        ModelKind::Lin => 1,
        _ => 2,
    };
    if f.children.len() != expected_children {
        return bad(format!("{} node needs {expected_children} children, found {}", f.kind, f.children.len()));
    }
    if (f.kind == ModelKind::Con) != f.predictor.is_none() {
        return bad("predictor must be present exactly on non-CON nodes".into());
    }
    let pivot = match (f.pivot, f.pivot_set) {
        (Some(v), None) => Some(Pivot::Value(v.0)),
        (None, Some(mut s)) => {
            s.sort_unstable();
            Some(Pivot::Levels(s))
        }
        (None, None) => None,
        (Some(_), Some(_)) => return bad("both pivot and pivot_set".into()),
    };
    if f.kind.is_split() != pivot.is_some() || f.kind.is_split() != f.coef_r.is_some() {
        return bad("split nodes need a pivot and coef_r, other nodes neither".into());
    }
    if matches!(pivot, Some(Pivot::Value(_)) | None) && f.predictor.is_some() && f.range.is_none() {
        return bad("numeric node without range".into());
    }
    let fit = NodeFit {
        kind: f.kind,
        predictor: f.predictor,
        pivot,
        coef_left: unpair(f.coef_l),
        coef_right: f.coef_r.map(unpair),
        bic: f.bic.0,
        rss_before: f.rss_before.0,
        rss_after: f.rss_after.0,
        gain: f.gain.0,
        n_left: f.n_left,
        n_right: f.n_right,
        range: f.range.map(|[a, b]| (a.0, b.0)),
    };
    let mut kids = f.children.into_iter();
    let children = match expected_children {
        0 => Children::Leaf,
        1 => Children::Continue(Box::new(from_file(kids.next().unwrap(), columns, &format!("{path}.0"))?)),
        _ => Children::Split {
            left: Box::new(from_file(kids.next().unwrap(), columns, &format!("{path}.0"))?),
            right: Box::new(from_file(kids.next().unwrap(), columns, &format!("{path}.1"))?),
        },
    };
    Ok(TreeNode {
        fit,
        n_cases: f.n_cases,
        weight: f.weight.0,
        depth: f.depth,
        stop: f.stop,
        children,
    })
}

/// Serializes a tree to a JSON string.
pub fn to_json(tree: &PilotTree) -> Result<String> {
    let s = &tree.stats;
    let file = FileModel {
        schema_version: SCHEMA_VERSION,
        hyperparams: tree.hyperparams.clone(),
        offset: Dec(tree.offset),
        bound_b: Dec(tree.bound),
        target: tree.target.clone(),
        columns: tree.columns.clone(),
        stats: FileStats {
            n_nodes: s.n_nodes,
            n_leaves: s.n_leaves,
            max_depth: s.max_depth,
            train_rss: Dec(s.train_rss),
            n_train: s.n_train,
        },
        root: to_file(&tree.root),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

/// Parses a tree from JSON produced by [`to_json`].
pub fn from_json(text: &str) -> Result<PilotTree> {
    let probe: VersionProbe = serde_json::from_str(text)?;
    if probe.schema_version != SCHEMA_VERSION {
        return Err(PilotError::SchemaVersion {
            found: probe.schema_version,
            expected: SCHEMA_VERSION,
        });
    }
    let file: FileModel = serde_json::from_str(text)?;
    let root = from_file(file.root, &file.columns, "root")?;
    let s = file.stats;
    Ok(PilotTree {
        root,
        bound: file.bound_b.0,
        offset: file.offset.0,
        hyperparams: file.hyperparams,
        columns: file.columns,
        target: file.target,
        stats: TreeStats {
            n_nodes: s.n_nodes,
            n_leaves: s.n_leaves,
            max_depth: s.max_depth,
            train_rss: s.train_rss.0,
            n_train: s.n_train,
        },
    })
}

pub fn save_model(tree: &PilotTree, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = to_json(tree)?;
    std::fs::write(path, text + "\n").map_err(|e| PilotError::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<PilotTree> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| PilotError::io(path, e))?;
    from_json(&text)
}
