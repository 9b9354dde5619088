//! Recursive tree construction with training-time truncation.
//!
//! The builder keeps one global array of row ids plus one per numeric
//! predictor (presorted). A node owns a contiguous segment `[start, end)` of
//! every array; splitting stably partitions each segment in place, so child
//! orderings stay sorted without re-sorting.

use serde::{Deserialize, Serialize};

use crate::data::{center_response, ColumnData, ColumnMeta, Dataset, RowId};
use crate::error::Result;
use crate::params::Hyperparams;
use crate::scan::{bic_score, rss_floor, LinearPiece, ModelKind, Moments, NodeFit, NodeView, Pivot, Selection};

/// A piece evaluated at `(lo, hi)`.
pub type EndValues = (f64, f64);

/// Why a node became a leaf.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxDepth,
    MinFit,
    ConSelected,
    LinChain,
}

/// Inputs to [`check_stop`].
#[derive(Debug, Clone, Copy)]
pub struct NodeState<'a> {
    pub reported_depth: usize,
    pub n_cases: usize,
    /// Result of model selection, once it has run.
    pub selected: Option<&'a NodeFit>,
    /// Number of LIN fits already applied to this case set.
    pub lin_chain: usize,
}

/// Stopping triggers, in the order they are checked: depth and `min_fit`
/// before selection, then CON selection and the LIN-chain guard.
pub fn check_stop(state: &NodeState<'_>, hp: &Hyperparams) -> Option<StopReason> {
    if state.reported_depth >= hp.max_depth {
        return Some(StopReason::MaxDepth);
    }
    if state.n_cases < hp.min_fit {
        return Some(StopReason::MinFit);
    }
    let fit = state.selected?;
    match fit.kind {
        ModelKind::Con => Some(StopReason::ConSelected),
        ModelKind::Lin => {
            let removed = fit.gain * state.n_cases as f64;
            if state.lin_chain >= hp.max_lin_chain || removed < hp.min_rel_gain_lin * fit.rss_before {
                Some(StopReason::LinChain)
            } else {
                None
            }
        }
        _ => None,
    }
}

/// Clips a cumulative prediction into `[-3B, 3B]`.
#[inline]
pub fn truncate_cumulative(pred: f64, bound: f64) -> f64 {
    let limit = 3.0 * bound;
    pred.max(-limit).min(limit)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Children {
    Leaf,
    /// A LIN node passes its whole case set on.
    Continue(Box<TreeNode>),
    Split { left: Box<TreeNode>, right: Box<TreeNode> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub fit: NodeFit,
    pub n_cases: usize,
    /// Share of training cases reaching this node.
    pub weight: f64,
    /// Number of split nodes above this one.
    pub depth: usize,
    pub stop: Option<StopReason>,
    pub children: Children,
}

impl TreeNode {
    pub fn kind(&self) -> ModelKind {
        self.fit.kind
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self.children, Children::Leaf)
    }

    /// Training range of the node's predictor, if numeric.
    pub fn range(&self) -> Option<(f64, f64)> {
        self.fit.range
    }

    /// Each side model evaluated at the ends of the training range.
    pub fn boundary_preds(&self) -> Option<(EndValues, Option<EndValues>)> {
        let (lo, hi) = self.fit.range?;
        let at = |p: &LinearPiece| (p.eval(lo), p.eval(hi));
        Some((at(&self.fit.coef_left), self.fit.coef_right.as_ref().map(at)))
    }

    /// Depth-first pre-order walk.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a TreeNode)) {
        f(self);
        match &self.children {
            Children::Leaf => {}
            Children::Continue(c) => c.walk(f),
            Children::Split { left, right } => {
                left.walk(f);
                right.walk(f);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeStats {
    pub n_nodes: usize,
    pub n_leaves: usize,
    /// Largest reported depth (split nodes on a path).
    pub max_depth: usize,
    pub train_rss: f64,
    pub n_train: usize,
}

/// A fitted tree.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotTree {
    pub root: TreeNode,
    pub bound: f64,
    pub offset: f64,
    pub hyperparams: Hyperparams,
    pub columns: Vec<ColumnMeta>,
    pub target: String,
    pub stats: TreeStats,
}

impl PilotTree {
    pub fn nodes(&self) -> Vec<&TreeNode> {
        let mut out = Vec::new();
        self.root.walk(&mut |n| out.push(n));
        out
    }
}

/// One node as seen by a [`BuildObserver`], before its update is applied.
#[derive(Debug)]
pub struct NodeVisit<'a> {
    pub rows: &'a [RowId],
    /// Current residuals over the whole training set, indexed by row.
    pub residuals: &'a [f64],
    /// Current cumulative (truncated, centered) predictions, indexed by row.
    pub cumulative: &'a [f64],
    pub depth: usize,
    pub lin_chain: usize,
    pub selection: Option<&'a Selection>,
    /// Model applied at this node.
    pub applied: ModelKind,
    pub stop: Option<StopReason>,
}

pub trait BuildObserver {
    fn visit(&mut self, node: &NodeVisit<'_>);
}

impl<F: FnMut(&NodeVisit<'_>)> BuildObserver for F {
    fn visit(&mut self, node: &NodeVisit<'_>) {
        self(node)
    }
}

struct NoObserver;

impl BuildObserver for NoObserver {
    fn visit(&mut self, _: &NodeVisit<'_>) {}
}

/// A tree plus the training-time bookkeeping.
#[derive(Debug, Clone)]
pub struct BuildOutcome {
    pub tree: PilotTree,
    /// Fitted values on the training rows, on the response scale.
    pub fitted: Vec<f64>,
    /// Final residuals (response minus fitted values).
    pub residuals: Vec<f64>,
}

pub fn build_tree(ds: &Dataset, hp: &Hyperparams) -> Result<PilotTree> {
    Ok(build_tree_observed(ds, hp, &mut NoObserver)?.tree)
}

pub fn build_tree_observed(ds: &Dataset, hp: &Hyperparams, observer: &mut dyn BuildObserver) -> Result<BuildOutcome> {
    hp.validate()?;
    let centered = center_response(ds.response());
    let n = ds.n_rows();
    let mut b = Builder {
        ds,
        hp,
        y0: centered.values,
        cum: vec![0.0; n],
        resid: Vec::new(),
        bound: centered.bound,
        n_total: n as f64,
        rows: (0..n as RowId).collect(),
        ordered: ds.sorted_index().orders().to_vec(),
        scratch: Vec::with_capacity(n),
        side: vec![false; n],
        observer,
    };
    b.resid = b.y0.clone();
    let root = b.grow(0, n, 0);

    let mut stats = TreeStats {
        n_nodes: 0,
        n_leaves: 0,
        max_depth: 0,
        train_rss: b.resid.iter().map(|r| r * r).sum(),
        n_train: n,
    };
    root.walk(&mut |node| {
        stats.n_nodes += 1;
        if node.is_leaf() {
            stats.n_leaves += 1;
        }
        stats.max_depth = stats.max_depth.max(node.depth);
    });
    let fitted = b.cum.iter().map(|c| c + centered.offset).collect();
    let residuals = b.resid;
    Ok(BuildOutcome {
        tree: PilotTree {
            root,
            bound: centered.bound,
            offset: centered.offset,
            hyperparams: hp.clone(),
            columns: ds.column_meta(),
            target: ds.target().to_string(),
            stats,
        },
        fitted,
        residuals,
    })
}

struct Builder<'a> {
    ds: &'a Dataset,
    hp: &'a Hyperparams,
    y0: Vec<f64>,
    cum: Vec<f64>,
    resid: Vec<f64>,
    bound: f64,
    n_total: f64,
    rows: Vec<RowId>,
    ordered: Vec<Vec<RowId>>,
    scratch: Vec<RowId>,
    side: Vec<bool>,
    observer: &'a mut dyn BuildObserver,
}

impl Builder<'_> {
    fn select(&self, start: usize, end: usize) -> Selection {
        let slices: Vec<&[RowId]> = self.ordered.iter().map(|o| &o[start..end]).collect();
        let view = NodeView::new(&self.rows[start..end], &slices);
        crate::scan::select_model(self.ds, view, &self.resid, self.hp)
    }

    #[allow(clippy::too_many_arguments)]
    fn notify(&mut self, start: usize, end: usize, depth: usize, chain: usize, sel: Option<&Selection>, applied: ModelKind, stop: Option<StopReason>) {
        self.observer.visit(&NodeVisit {
            rows: &self.rows[start..end],
            residuals: &self.resid,
            cumulative: &self.cum,
            depth,
            lin_chain: chain,
            selection: sel,
            applied,
            stop,
        });
    }

    fn make_node(&self, fit: NodeFit, depth: usize, stop: Option<StopReason>, children: Children) -> TreeNode {
        let n_cases = fit.n_cases();
        TreeNode {
            fit,
            n_cases,
            weight: n_cases as f64 / self.n_total,
            depth,
            stop,
            children,
        }
    }

    /// Grows the subtree over segment `[start, end)`. LIN chains are unrolled
    /// iteratively and linked once the chain ends.
    fn grow(&mut self, start: usize, end: usize, depth: usize) -> TreeNode {
        let mut chain: Vec<NodeFit> = Vec::new();
        let tail = loop {
            let t = end - start;
            let mut state = NodeState {
                reported_depth: depth,
                n_cases: t,
                selected: None,
                lin_chain: chain.len(),
            };
            if let Some(reason) = check_stop(&state, self.hp) {
                self.notify(start, end, depth, chain.len(), None, ModelKind::Con, Some(reason));
                break self.con_leaf(start, end, depth, reason, None);
            }
            let sel = self.select(start, end);
            state.selected = Some(&sel.best);
            if let Some(reason) = check_stop(&state, self.hp) {
                self.notify(start, end, depth, chain.len(), Some(&sel), ModelKind::Con, Some(reason));
                let fit = (sel.best.kind == ModelKind::Con).then(|| sel.best.clone());
                break self.con_leaf(start, end, depth, reason, fit);
            }
            self.notify(start, end, depth, chain.len(), Some(&sel), sel.best.kind, None);
            let fit = sel.best;
            if fit.kind == ModelKind::Lin {
                self.apply_lin(start, end, &fit);
                chain.push(fit);
                continue;
            }
            break self.split(start, end, depth, fit);
        };
        chain.into_iter().rev().fold(tail, |child, fit| {
            self.make_node(fit, depth, None, Children::Continue(Box::new(child)))
        })
    }

    fn con_leaf(&mut self, start: usize, end: usize, depth: usize, reason: StopReason, fit: Option<NodeFit>) -> TreeNode {
        let fit = fit.unwrap_or_else(|| self.con_fit(start, end));
        let value = fit.coef_left.intercept;
        for &r in &self.rows[start..end] {
            let r = r as usize;
            self.cum[r] = truncate_cumulative(self.cum[r] + value, self.bound);
            self.resid[r] = self.y0[r] - self.cum[r];
        }
        self.make_node(fit, depth, Some(reason), Children::Leaf)
    }

    fn con_fit(&self, start: usize, end: usize) -> NodeFit {
        let t = end - start;
        let mut m = Moments::default();
        for &r in &self.rows[start..end] {
            m.push(0.0, self.resid[r as usize]);
        }
        let (piece, rss) = m.fit_con();
        let floor = rss_floor(self.hp.rss_floor_scale, m.syy);
        NodeFit {
            kind: ModelKind::Con,
            predictor: None,
            pivot: None,
            coef_left: piece,
            coef_right: None,
            bic: bic_score(rss, t, 1, floor),
            rss_before: m.syy,
            rss_after: rss,
            gain: (m.syy - rss) / t as f64,
            n_left: t,
            n_right: 0,
            range: None,
        }
    }

    fn apply_lin(&mut self, start: usize, end: usize, fit: &NodeFit) {
        let xs = self.ds.column(fit.predictor.expect("LIN has a predictor")).as_numeric().expect("numeric");
        for &r in &self.rows[start..end] {
            let r = r as usize;
            let raw = fit.coef_left.eval(xs[r]);
            self.cum[r] = truncate_cumulative(self.cum[r] + raw, self.bound);
            self.resid[r] = self.y0[r] - self.cum[r];
        }
    }

    fn split(&mut self, start: usize, end: usize, depth: usize, fit: NodeFit) -> TreeNode {
        let j = fit.predictor.expect("split has a predictor");
        let right_piece = fit.coef_right.expect("split has a right model");
        let pivot = fit.pivot.clone().expect("split has a pivot");
        let bound = self.bound;
        let ds = self.ds;
        match (&ds.column(j).data, &pivot) {
            (ColumnData::Numeric(_), Pivot::Value(p)) => {
                let xs = ds.column(j).as_numeric().expect("numeric predictor");
                for &r in &self.rows[start..end] {
                    let r = r as usize;
                    let x = xs[r];
                    let left = x <= *p;
                    let piece = if left { &fit.coef_left } else { &right_piece };
                    self.side[r] = left;
                    self.cum[r] = truncate_cumulative(self.cum[r] + piece.eval(x), bound);
                    self.resid[r] = self.y0[r] - self.cum[r];
                }
            }
            (ColumnData::Categorical { codes, .. }, Pivot::Levels(_)) => {
                for &r in &self.rows[start..end] {
                    let r = r as usize;
                    let left = pivot.contains_level(codes[r]);
                    let add = if left { fit.coef_left.intercept } else { right_piece.intercept };
                    self.side[r] = left;
                    self.cum[r] = truncate_cumulative(self.cum[r] + add, bound);
                    self.resid[r] = self.y0[r] - self.cum[r];
                }
            }
            _ => unreachable!("pivot type matches column type"),
        }
        let n_left = stable_partition(&mut self.rows[start..end], &self.side, &mut self.scratch);
        for o in &mut self.ordered {
            let k = stable_partition(&mut o[start..end], &self.side, &mut self.scratch);
            debug_assert_eq!(k, n_left);
        }
        debug_assert_eq!(n_left, fit.n_left);
        let mid = start + n_left;
        let left = self.grow(start, mid, depth + 1);
        let right = self.grow(mid, end, depth + 1);
        self.make_node(
            fit,
            depth,
            None,
            Children::Split {
                left: Box::new(left),
                right: Box::new(right),
            },
        )
    }
}

/// Moves rows with `side[row] == true` to the front, keeping relative
/// order on both sides. Returns the number of such rows.
fn stable_partition(seg: &mut [RowId], side: &[bool], scratch: &mut Vec<RowId>) -> usize {
    scratch.clear();
    let mut w = 0;
    for i in 0..seg.len() {
        let r = seg[i];
        if side[r as usize] {
            seg[w] = r;
            w += 1;
        } else {
            scratch.push(r);
        }
    }
    seg[w..].copy_from_slice(scratch);
    w
}
