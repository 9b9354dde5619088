//! Naive reference for PILOT restricted to `{CON, PCON}`.
//!
//! Every candidate split is refitted from scratch, so the cost per node is
//! O(n^2 p). Only meant for small test datasets.

use crate::data::{ColumnData, Dataset};
use crate::params::Hyperparams;

#[derive(Debug, Clone, PartialEq)]
pub enum OracleSplit {
    /// Left when `x <= value`.
    Value(f64),
    /// Left when the level is in the (ascending) set.
    Levels(Vec<u32>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum OracleTree {
    /// Final prediction for cases reaching this leaf (offset included).
    Leaf { value: f64, n: usize },
    Split {
        predictor: usize,
        split: OracleSplit,
        n_left: usize,
        n_right: usize,
        left: Box<OracleTree>,
        right: Box<OracleTree>,
    },
}

impl OracleTree {
    /// Prediction for row `row` of `ds`. Unseen levels go to the larger child.
    pub fn predict_row(&self, ds: &Dataset, row: usize) -> f64 {
        let mut node = self;
        loop {
            match node {
                OracleTree::Leaf { value, .. } => return *value,
                OracleTree::Split { predictor, split, n_left, n_right, left, right } => {
                    let go_left = match (&ds.column(*predictor).data, split) {
                        (ColumnData::Numeric(v), OracleSplit::Value(p)) => v[row] <= *p,
                        (ColumnData::Categorical { codes, .. }, OracleSplit::Levels(set)) => set.contains(&codes[row]),
                        _ => n_left >= n_right,
                    };
                    node = if go_left { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            OracleTree::Leaf { .. } => 0,
            OracleTree::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

fn bic(rss: f64, t: f64, dof: f64, floor: f64) -> f64 {
    t * (rss.max(floor) / t).ln() + dof * t.ln()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sse(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum()
}

struct Candidate {
    predictor: usize,
    split: OracleSplit,
    rss: f64,
}

struct Oracle<'a> {
    ds: &'a Dataset,
    hp: &'a Hyperparams,
    y0: Vec<f64>,
    cum: Vec<f64>,
    limit: f64,
    offset: f64,
}

impl Oracle<'_> {
    fn resid(&self, rows: &[usize]) -> Vec<f64> {
        rows.iter().map(|&i| self.y0[i] - self.cum[i]).collect()
    }

    fn add(&mut self, rows: &[usize], value: f64) {
        for &i in rows {
            self.cum[i] = (self.cum[i] + value).max(-self.limit).min(self.limit);
        }
    }

    fn goes_left(&self, predictor: usize, split: &OracleSplit, row: usize) -> bool {
        match (&self.ds.column(predictor).data, split) {
            (ColumnData::Numeric(v), OracleSplit::Value(p)) => v[row] <= *p,
            (ColumnData::Categorical { codes, .. }, OracleSplit::Levels(set)) => set.contains(&codes[row]),
            _ => unreachable!(),
        }
    }

    fn partition(&self, rows: &[usize], predictor: usize, split: &OracleSplit) -> (Vec<usize>, Vec<usize>) {
        rows.iter().partition(|&&i| self.goes_left(predictor, split, i))
    }

    fn split_rss(&self, rows: &[usize], predictor: usize, split: &OracleSplit) -> Option<f64> {
        let (l, r) = self.partition(rows, predictor, split);
        if l.len() < self.hp.min_leaf || r.len() < self.hp.min_leaf {
            return None;
        }
        Some(sse(&self.resid(&l)) + sse(&self.resid(&r)))
    }

    fn candidate_splits(&self, rows: &[usize], j: usize) -> Vec<OracleSplit> {
        match &self.ds.column(j).data {
            ColumnData::Numeric(v) => {
                let mut vals: Vec<f64> = rows.iter().map(|&i| v[i]).collect();
                vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
                vals.dedup_by(|a, b| a == b);
                vals.pop();
                vals.into_iter().map(OracleSplit::Value).collect()
            }
            ColumnData::Categorical { codes, levels } => {
                let mut means: Vec<(f64, u32)> = (0..levels.len() as u32)
                    .filter_map(|l| {
                        let rs: Vec<f64> = rows.iter().filter(|&&i| codes[i] == l).map(|&i| self.y0[i] - self.cum[i]).collect();
                        (!rs.is_empty()).then(|| (mean(&rs), l))
                    })
                    .collect();
                means.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
                (0..means.len().saturating_sub(1))
                    .filter(|&k| means[k].0 < means[k + 1].0)
                    .map(|k| {
                        let mut set: Vec<u32> = means[..=k].iter().map(|m| m.1).collect();
                        set.sort_unstable();
                        OracleSplit::Levels(set)
                    })
                    .collect()
            }
        }
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> OracleTree {
        let t = rows.len() as f64;
        let r = self.resid(&rows);
        let sum_sq: f64 = r.iter().map(|v| v * v).sum();
        let floor = self.hp.rss_floor_scale * sum_sq.max(1.0);
        let stop = depth >= self.hp.max_depth || rows.len() < self.hp.min_fit;
        let mut best: Option<Candidate> = None;
        if !stop {
            let mut best_bic = bic(sse(&r), t, 1.0, floor);
            for j in 0..self.ds.n_cols() {
                let mut col_best: Option<Candidate> = None;
                for split in self.candidate_splits(&rows, j) {
                    if let Some(rss) = self.split_rss(&rows, j, &split) {
                        if col_best.as_ref().is_none_or(|c| rss.max(floor) < c.rss.max(floor)) {
                            col_best = Some(Candidate { predictor: j, split, rss });
                        }
                    }
                }
                if let Some(c) = col_best {
                    let b = bic(c.rss, t, 5.0, floor);
                    if b < best_bic {
                        best_bic = b;
                        best = Some(c);
                    }
                }
            }
        }
        match best {
            None => {
                let m = mean(&r);
                self.add(&rows, m);
                let value = self.cum[rows[0]] + self.offset;
                OracleTree::Leaf { value, n: rows.len() }
            }
            Some(c) => {
                let (l, rr) = self.partition(&rows, c.predictor, &c.split);
                let ml = mean(&self.resid(&l));
                let mr = mean(&self.resid(&rr));
                self.add(&l, ml);
                self.add(&rr, mr);
                let (n_left, n_right) = (l.len(), rr.len());
                let left = self.grow(l, depth + 1);
                let right = self.grow(rr, depth + 1);
                OracleTree::Split {
                    predictor: c.predictor,
                    split: c.split,
                    n_left,
                    n_right,
                    left: Box::new(left),
                    right: Box::new(right),
                }
            }
        }
    }
}

/// Greedy piecewise-constant tree with the same BIC choice, `min_leaf`,
/// `min_fit`, depth limit and truncation as PILOT in CART mode.
pub fn cart_oracle(ds: &Dataset, hp: &Hyperparams) -> OracleTree {
    let y = ds.response();
    let lo = y.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let offset = (lo + hi) / 2.0;
    let mut o = Oracle {
        ds,
        hp,
        y0: y.iter().map(|v| v - offset).collect(),
        cum: vec![0.0; y.len()],
        limit: 3.0 * (hi - lo) / 2.0,
        offset,
    };
    o.grow((0..y.len()).collect(), 0)
}
