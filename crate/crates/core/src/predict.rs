//! Prediction with range clamping and cumulative truncation.

use std::collections::{BTreeSet, HashMap};

use crate::build::{truncate_cumulative, Children, PilotTree, TreeNode};
use crate::data::{ColumnData, ColumnKind, FeatureTable};
use crate::error::{PilotError, Result};
use crate::scan::{ModelKind, Pivot};

/// Per-row feature access for [`PilotTree::predict_one`].
pub trait FeatureSource {
    /// Value of numeric training column `col`, or `None` if absent.
    fn numeric(&self, col: usize) -> Option<f64>;
    /// Training level id of categorical column `col`. `Ok(None)` marks a
    /// level the tree never saw; `Err(())` marks an absent column.
    #[allow(clippy::result_unit_err)]
    fn level(&self, col: usize) -> std::result::Result<Option<u32>, ()>;
}

/// One feature value of a [`Record`].
#[derive(Debug, Clone, PartialEq)]
pub enum Feature {
    Num(f64),
    Level(String),
}

/// A single observation keyed by column name.
pub type Record = HashMap<String, Feature>;

/// Which way a case left a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Leaf,
    Continue,
    Left,
    Right,
    /// Unseen categorical level, sent to the larger child.
    FallbackLeft,
    FallbackRight,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    /// Pre-order index of the node.
    pub node_id: usize,
    pub kind: ModelKind,
    pub predictor: Option<usize>,
    /// Predictor value after clamping into the node's training range.
    pub clamped: Option<f64>,
    pub increment: f64,
    /// Centered cumulative prediction after truncation.
    pub cumulative: f64,
    pub step: Step,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionTrace {
    pub steps: Vec<TraceStep>,
    /// Centered prediction.
    pub centered: f64,
    /// Final prediction with the offset added back.
    pub prediction: f64,
}

fn subtree_size(node: &TreeNode) -> usize {
    let mut n = 0;
    node.walk(&mut |_| n += 1);
    n
}

impl PilotTree {
    fn column_name(&self, col: usize) -> &str {
        &self.columns[col].name
    }

    fn missing(&self, col: usize) -> PilotError {
        PilotError::ColumnMismatch {
            missing: vec![self.column_name(col).to_string()],
            extra: Vec::new(),
        }
    }

    fn walk_case(&self, x: &dyn FeatureSource, mut record: Option<&mut Vec<TraceStep>>) -> Result<f64> {
        let mut node = &self.root;
        let mut pred = 0.0;
        let mut id = 0;
        loop {
            let fit = &node.fit;
            let mut clamped = None;
            let increment;
            let mut step = Step::Leaf;
            match fit.kind {
                ModelKind::Con => increment = fit.coef_left.intercept,
                _ => {
                    let j = fit.predictor.expect("non-CON node has a predictor");
                    match fit.pivot.as_ref() {
                        Some(Pivot::Levels(_)) => {
                            let pivot = fit.pivot.as_ref().unwrap();
                            let left = match x.level(j).map_err(|_| self.missing(j))? {
                                Some(level) => {
                                    step = if pivot.contains_level(level) { Step::Left } else { Step::Right };
                                    step == Step::Left
                                }
                                None => {
                                    let left = fit.n_left >= fit.n_right;
                                    step = if left { Step::FallbackLeft } else { Step::FallbackRight };
                                    left
                                }
                            };
                            increment = if left { fit.coef_left.intercept } else { fit.coef_right.expect("split").intercept };
                        }
                        _ => {
                            let raw = x.numeric(j).ok_or_else(|| self.missing(j))?;
                            let (lo, hi) = fit.range.expect("numeric node has a range");
                            let xc = raw.max(lo).min(hi);
                            clamped = Some(xc);
                            increment = match fit.pivot.as_ref().and_then(Pivot::value) {
                                None => {
                                    step = Step::Continue;
                                    fit.coef_left.eval(xc)
                                }
                                Some(p) if raw <= p => {
                                    step = Step::Left;
                                    fit.coef_left.eval(xc)
                                }
                                Some(_) => {
                                    step = Step::Right;
                                    fit.coef_right.expect("split").eval(xc)
                                }
                            };
                        }
                    }
                }
            }
            pred = truncate_cumulative(pred + increment, self.bound);
            if let Some(r) = record.as_deref_mut() {
                r.push(TraceStep {
                    node_id: id,
                    kind: fit.kind,
                    predictor: fit.predictor,
                    clamped,
                    increment,
                    cumulative: pred,
                    step,
                });
            }
            node = match (&node.children, step) {
                (Children::Leaf, _) => return Ok(pred),
                (Children::Continue(c), _) => {
                    id += 1;
                    c
                }
                (Children::Split { left, .. }, Step::Left | Step::FallbackLeft) => {
                    id += 1;
                    left
                }
                (Children::Split { left, right }, _) => {
                    id += 1 + subtree_size(left);
                    right
                }
            };
        }
    }

    /// Prediction for one case.
    pub fn predict_one(&self, x: &dyn FeatureSource) -> Result<f64> {
        Ok(self.walk_case(x, None)? + self.offset)
    }

    /// Prediction plus the node-by-node path.
    pub fn trace(&self, x: &dyn FeatureSource) -> Result<PredictionTrace> {
        let mut steps = Vec::new();
        let centered = self.walk_case(x, Some(&mut steps))?;
        Ok(PredictionTrace {
            steps,
            centered,
            prediction: centered + self.offset,
        })
    }

    /// Prediction for a name-keyed record. Extra keys are ignored.
    pub fn predict_record(&self, record: &Record) -> Result<f64> {
        self.predict_one(&RecordSource { tree: self, record })
    }

    /// Predictions for every row of `table`, whose columns must match the
    /// training columns by name (order may differ).
    pub fn predict_table(&self, table: &FeatureTable) -> Result<Vec<f64>> {
        let aligned = AlignedTable::new(self, table)?;
        (0..table.n_rows())
            .map(|row| self.predict_one(&RowSource { table: &aligned, row }))
            .collect()
    }
}

struct RecordSource<'a> {
    tree: &'a PilotTree,
    record: &'a Record,
}

impl FeatureSource for RecordSource<'_> {
    fn numeric(&self, col: usize) -> Option<f64> {
        match self.record.get(&self.tree.columns[col].name)? {
            Feature::Num(v) => Some(*v),
            Feature::Level(s) => s.trim().parse().ok(),
        }
    }

    fn level(&self, col: usize) -> std::result::Result<Option<u32>, ()> {
        let meta = &self.tree.columns[col];
        let name = match self.record.get(&meta.name).ok_or(())? {
            Feature::Level(s) => s.clone(),
            Feature::Num(v) => crate::numfmt::format_f64(*v),
        };
        Ok(meta.levels.iter().position(|l| *l == name).map(|i| i as u32))
    }
}

enum AlignedColumn<'a> {
    Numeric(&'a [f64]),
    /// Local codes plus a map from local to training level ids.
    Categorical(&'a [u32], Vec<Option<u32>>),
}

struct AlignedTable<'a> {
    columns: Vec<AlignedColumn<'a>>,
}

impl<'a> AlignedTable<'a> {
    fn new(tree: &PilotTree, table: &'a FeatureTable) -> Result<Self> {
        let have: BTreeSet<&str> = table.columns().iter().map(|c| c.name.as_str()).collect();
        let want: BTreeSet<&str> = tree.columns.iter().map(|c| c.name.as_str()).collect();
        if have != want {
            return Err(PilotError::ColumnMismatch {
                missing: want.difference(&have).map(|s| s.to_string()).collect(),
                extra: have.difference(&want).map(|s| s.to_string()).collect(),
            });
        }
        let mut columns = Vec::with_capacity(tree.columns.len());
        for meta in &tree.columns {
            let col = table.column_by_name(&meta.name).expect("checked above");
            let aligned = match (&col.data, meta.kind) {
                (ColumnData::Numeric(v), ColumnKind::Numeric) => AlignedColumn::Numeric(v),
                (ColumnData::Categorical { codes, levels }, ColumnKind::Categorical) => {
                    let map = levels
                        .iter()
                        .map(|l| meta.levels.iter().position(|t| t == l).map(|i| i as u32))
                        .collect();
                    AlignedColumn::Categorical(codes, map)
                }
                (_, kind) => {
                    return Err(PilotError::ColumnKind {
                        column: meta.name.clone(),
                        reason: format!("model expects a {} column", if kind == ColumnKind::Numeric { "numeric" } else { "categorical" }),
                    })
                }
            };
            columns.push(aligned);
        }
        Ok(AlignedTable { columns })
    }
}

struct RowSource<'a> {
    table: &'a AlignedTable<'a>,
    row: usize,
}

impl FeatureSource for RowSource<'_> {
    fn numeric(&self, col: usize) -> Option<f64> {
        match &self.table.columns[col] {
            AlignedColumn::Numeric(v) => Some(v[self.row]),
            AlignedColumn::Categorical(..) => None,
        }
    }

    fn level(&self, col: usize) -> std::result::Result<Option<u32>, ()> {
        match &self.table.columns[col] {
            AlignedColumn::Categorical(codes, map) => Ok(map[codes[self.row] as usize]),
            AlignedColumn::Numeric(_) => Err(()),
        }
    }
}

/// Writes a one-column `prediction` CSV with 17 significant digits.
pub fn write_predictions<W: std::io::Write>(out: W, predictions: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["prediction"])?;
    for p in predictions {
        w.write_record([crate::numfmt::format_f64(*p)])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// [`write_predictions`] into a file.
pub fn save_predictions(path: impl AsRef<std::path::Path>, predictions: &[f64]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| PilotError::io(path, e))?;
    write_predictions(std::io::BufWriter::new(file), predictions)
}
