//! Per-node model selection.
//!
//! Every predictor is scanned once in ascending order. Running per-side
//! moments (count, sums of x, x², r, x·r, r²) are enough to evaluate the
//! constant, linear, piecewise constant, broken linear and two-piece linear
//! fits at each candidate pivot in constant time, so one predictor costs
//! O(t) for a node with t cases.
//!
//! Numeric scans work in coordinates shifted by the midrange of the node's
//! predictor values; coefficients are shifted back when a [`NodeFit`] is
//! produced.

// NaN must fail the degeneracy checks, hence `!(a > b)`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Sub};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ColumnData, Dataset, RowId};
use crate::params::{Hyperparams, KindSet};

/// Node model kinds, in increasing order of complexity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ModelKind {
    Con,
    Lin,
    Pcon,
    Blin,
    Plin,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Con,
        ModelKind::Lin,
        ModelKind::Pcon,
        ModelKind::Blin,
        ModelKind::Plin,
    ];

    /// Degrees of freedom charged by the BIC: coefficients plus 3 per
    /// discontinuity and 2 for the continuous BLIN kink.
    pub fn dof(self) -> u32 {
        match self {
            ModelKind::Con => 1,
            ModelKind::Lin => 2,
            ModelKind::Pcon => 5,
            ModelKind::Blin => 5,
            ModelKind::Plin => 7,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Whether the model partitions the node into two children.
    pub fn is_split(self) -> bool {
        matches!(self, ModelKind::Pcon | ModelKind::Blin | ModelKind::Plin)
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Con => "CON",
            ModelKind::Lin => "LIN",
            ModelKind::Pcon => "PCON",
            ModelKind::Blin => "BLIN",
            ModelKind::Plin => "PLIN",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LinearPiece {
    pub intercept: f64,
    pub slope: f64,
}

impl LinearPiece {
    pub fn constant(value: f64) -> Self {
        LinearPiece {
            intercept: value,
            slope: 0.0,
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }

    /// Re-expresses a piece fitted on `x - shift` in terms of `x`.
    fn unshift(self, shift: f64) -> Self {
        LinearPiece {
            intercept: self.intercept - self.slope * shift,
            slope: self.slope,
        }
    }
}

/// Split definition: cases with value `<= pivot` (numeric) or whose level is
/// in the set (categorical) go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pivot {
    Value(f64),
    /// Left-side level ids, ascending.
    Levels(Vec<u32>),
}

impl Pivot {
    pub fn value(&self) -> Option<f64> {
        match self {
            Pivot::Value(v) => Some(*v),
            Pivot::Levels(_) => None,
        }
    }

    pub fn contains_level(&self, level: u32) -> bool {
        match self {
            Pivot::Levels(set) => set.binary_search(&level).is_ok(),
            Pivot::Value(_) => false,
        }
    }
}

/// Outcome of fitting one model kind on one predictor in a node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeFit {
    pub kind: ModelKind,
    /// Column index; `None` for CON.
    pub predictor: Option<usize>,
    pub pivot: Option<Pivot>,
    pub coef_left: LinearPiece,
    pub coef_right: Option<LinearPiece>,
    pub bic: f64,
    /// Sum of squared residuals entering the node.
    pub rss_before: f64,
    /// Sum of squared residuals after this fit (unfloored, untruncated).
    pub rss_after: f64,
    /// Per-case impurity gain `(rss_before - rss_after) / t`.
    pub gain: f64,
    pub n_left: usize,
    pub n_right: usize,
    /// Training range of the predictor in the node (numeric predictors only).
    pub range: Option<(f64, f64)>,
}

impl NodeFit {
    pub fn n_cases(&self) -> usize {
        self.n_left + self.n_right
    }

    fn pivot_key(&self) -> f64 {
        match &self.pivot {
            Some(Pivot::Value(v)) => *v,
            Some(Pivot::Levels(set)) => set.len() as f64,
            None => f64::NEG_INFINITY,
        }
    }

    /// Selection order: lower BIC, then fewer degrees of freedom, then lower
    /// predictor index, then smaller pivot.
    pub fn cmp_rank(&self, other: &NodeFit) -> Ordering {
        self.bic
            .total_cmp(&other.bic)
            .then(self.kind.dof().cmp(&other.kind.dof()))
            .then(self.predictor.cmp(&other.predictor))
            .then(self.pivot_key().total_cmp(&other.pivot_key()))
            .then(self.kind.cmp(&other.kind))
    }
}

/// `t * ln(rss' / t) + dof * ln(t)` with `rss' = max(rss, floor)`.
pub fn bic_score(rss: f64, t: usize, dof: u32, floor: f64) -> f64 {
    let t = t as f64;
    let rss = rss.max(floor);
    t * (rss / t).ln() + f64::from(dof) * t.ln()
}

/// RSS floor used by the BIC in a node whose residuals have squared sum `rss_before`.
pub fn rss_floor(scale: f64, rss_before: f64) -> f64 {
    scale * rss_before.max(1.0)
}

/// Running sums for a simple regression of r on x.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: f64,
    pub sx: f64,
    pub sxx: f64,
    pub sy: f64,
    pub sxy: f64,
    pub syy: f64,
}

impl Moments {
    pub fn from_pairs(xs: &[f64], ys: &[f64]) -> Self {
        let mut m = Moments::default();
        for (&x, &y) in xs.iter().zip(ys) {
            m.push(x, y);
        }
        m
    }

    #[inline]
    pub fn push(&mut self, x: f64, y: f64) {
        self.count += 1.0;
        self.sx += x;
        self.sxx += x * x;
        self.sy += y;
        self.sxy += x * y;
        self.syy += y * y;
    }

    pub fn centered_sxx(&self) -> f64 {
        self.sxx - self.sx * self.sx / self.count
    }

    pub fn centered_sxy(&self) -> f64 {
        self.sxy - self.sx * self.sy / self.count
    }

    /// Least-squares constant: `(mean, rss)`.
    pub fn fit_con(&self) -> (LinearPiece, f64) {
        let mean = self.sy / self.count;
        let rss = (self.syy - self.sy * mean).max(0.0);
        (LinearPiece::constant(mean), rss)
    }

    /// Least-squares line, or `None` when x has (numerically) no spread.
    pub fn fit_lin(&self) -> Option<(LinearPiece, f64)> {
        if self.count < 2.0 {
            return None;
        }
        let sxx_c = self.centered_sxx();
        if !(sxx_c > 1e-12 * self.sxx) {
            return None;
        }
        let sxy_c = self.centered_sxy();
        let slope = sxy_c / sxx_c;
        let intercept = (self.sy - slope * self.sx) / self.count;
        let rss = (self.syy - self.sy * self.sy / self.count - sxy_c * slope).max(0.0);
        Some((LinearPiece { intercept, slope }, rss))
    }
}

impl Add for Moments {
    type Output = Moments;

    fn add(self, o: Moments) -> Moments {
        Moments {
            count: self.count + o.count,
            sx: self.sx + o.sx,
            sxx: self.sxx + o.sxx,
            sy: self.sy + o.sy,
            sxy: self.sxy + o.sxy,
            syy: self.syy + o.syy,
        }
    }
}

impl Sub for Moments {
    type Output = Moments;

    fn sub(self, o: Moments) -> Moments {
        Moments {
            count: self.count - o.count,
            sx: self.sx - o.sx,
            sxx: self.sxx - o.sxx,
            sy: self.sy - o.sy,
            sxy: self.sxy - o.sxy,
            syy: self.syy - o.syy,
        }
    }
}

/// Whole-node simple regression reused by every BLIN pivot.
#[derive(Debug, Clone, Copy)]
struct LinBase {
    count: f64,
    xbar: f64,
    ybar: f64,
    sy: f64,
    sxx_c: f64,
    sxy_c: f64,
    rss: f64,
}

impl LinBase {
    fn new(total: &Moments) -> Option<Self> {
        let (_, rss) = total.fit_lin()?;
        Some(LinBase {
            count: total.count,
            xbar: total.sx / total.count,
            ybar: total.sy / total.count,
            sy: total.sy,
            sxx_c: total.centered_sxx(),
            sxy_c: total.centered_sxy(),
            rss,
        })
    }
}

/// Broken-line fit `a + b x + g (x - knot)_+` expressed through the
/// component of the hinge orthogonal to `[1, x]`.
#[derive(Debug, Clone, Copy)]
struct BlinFit {
    rss: f64,
    gamma: f64,
    rho: f64,
    hbar: f64,
}

impl BlinFit {
    /// Hinge Gram entries come from the moments of the cases right of the
    /// knot, since the hinge vanishes on the left.
    fn at(base: &LinBase, right: &Moments, knot: f64) -> Option<BlinFit> {
        let mr = right.count;
        if mr < 1.0 {
            return None;
        }
        let xr = right.sx / mr;
        let sxx_cr = (right.sxx - right.sx * xr).max(0.0);
        let d = xr - knot;
        let sh = mr * d;
        let shh = sxx_cr + mr * d * d;
        if !(shh > 0.0) {
            return None;
        }
        let shx_c = shh + (knot - base.xbar) * sh;
        let shr = right.sxy - knot * right.sy;
        let hbar = sh / base.count;
        let rho = shx_c / base.sxx_c;
        let den = shh - sh * hbar - shx_c * rho;
        if !(den > 1e-12 * shh) {
            return None;
        }
        let num = shr - hbar * base.sy - rho * base.sxy_c;
        let gamma = num / den;
        Some(BlinFit {
            rss: (base.rss - num * gamma).max(0.0),
            gamma,
            rho,
            hbar,
        })
    }

    /// `(left piece, right piece)` in shifted coordinates.
    fn pieces(&self, base: &LinBase, knot: f64) -> (LinearPiece, LinearPiece) {
        let beta_lin = base.sxy_c / base.sxx_c;
        let alpha_lin = base.ybar - beta_lin * base.xbar;
        let slope = beta_lin - self.gamma * self.rho;
        let intercept = alpha_lin - self.gamma * (self.hbar - self.rho * base.xbar);
        (
            LinearPiece { intercept, slope },
            LinearPiece {
                intercept: intercept - self.gamma * knot,
                slope: slope + self.gamma,
            },
        )
    }
}

/// Which pivot-level fits a scan should evaluate.
#[derive(Debug, Clone, Copy)]
pub struct ScanWants {
    pub plin: bool,
    pub blin: bool,
}

impl ScanWants {
    pub fn all() -> Self {
        ScanWants { plin: true, blin: true }
    }
}

/// Fits at one candidate pivot, in shifted coordinates.
#[derive(Debug, Clone, Copy)]
pub struct PivotEval {
    /// Index of the last left case in the sorted slice.
    pub position: usize,
    /// Pivot in original coordinates.
    pub pivot: f64,
    pub n_left: usize,
    pub n_right: usize,
    pub unique_left: usize,
    pub unique_right: usize,
    pub left: Moments,
    pub pcon_rss: f64,
    /// `None` when either side has fewer than two distinct values.
    pub plin_rss: Option<f64>,
    /// `None` when the hinge system is singular.
    pub blin_rss: Option<f64>,
}

/// Whole-node summary of a numeric scan.
#[derive(Debug, Clone, Copy)]
pub struct ScanTotals {
    pub shift: f64,
    pub total: Moments,
    pub unique: usize,
}

/// Walks every pivot of a sorted predictor keeping both children at least
/// `min_leaf` cases, calling `visit` with the fits at that pivot.
///
/// `xs` must be ascending; `rs` holds the residuals in the same order.
pub fn scan_pivots(
    xs: &[f64],
    rs: &[f64],
    min_leaf: usize,
    wants: ScanWants,
    mut visit: impl FnMut(&PivotEval),
) -> ScanTotals {
    assert_eq!(xs.len(), rs.len());
    let t = xs.len();
    if t == 0 {
        return ScanTotals {
            shift: 0.0,
            total: Moments::default(),
            unique: 0,
        };
    }
    let shift = (xs[0] + xs[t - 1]) / 2.0;
    let mut total = Moments::default();
    let mut unique = 1;
    for i in 0..t {
        total.push(xs[i] - shift, rs[i]);
        if i > 0 && xs[i] != xs[i - 1] {
            unique += 1;
        }
    }
    let base = if wants.blin { LinBase::new(&total) } else { None };
    let min_leaf = min_leaf.max(1);

    let mut left = Moments::default();
    let mut unique_left = 0;
    for i in 0..t - 1 {
        left.push(xs[i] - shift, rs[i]);
        if xs[i] == xs[i + 1] {
            continue;
        }
        unique_left += 1;
        let n_left = i + 1;
        let n_right = t - n_left;
        if n_left < min_leaf || n_right < min_leaf {
            continue;
        }
        let right = total - left;
        let unique_right = unique - unique_left;
        let pcon_rss = (total.syy - left.sy * left.sy / left.count - right.sy * right.sy / right.count).max(0.0);
        let plin_rss = if wants.plin && unique_left >= 2 && unique_right >= 2 {
            match (left.fit_lin(), right.fit_lin()) {
                (Some((_, l)), Some((_, r))) => Some(l + r),
                _ => None,
            }
        } else {
            None
        };
        let blin_rss = base
            .as_ref()
            .and_then(|b| BlinFit::at(b, &right, xs[i] - shift))
            .map(|f| f.rss);
        visit(&PivotEval {
            position: i,
            pivot: xs[i],
            n_left,
            n_right,
            unique_left,
            unique_right,
            left,
            pcon_rss,
            plin_rss,
            blin_rss,
        });
    }
    ScanTotals { shift, total, unique }
}

/// Node-level constants shared by all predictor scans.
#[derive(Debug, Clone, Copy)]
pub struct ScanContext {
    pub t: usize,
    pub rss_before: f64,
    pub floor: f64,
    pub min_leaf: usize,
    pub min_unique_lin: usize,
    pub min_unique_plin: usize,
    pub allowed: KindSet,
}

impl ScanContext {
    pub fn new(hp: &Hyperparams, t: usize, rss_before: f64) -> Self {
        ScanContext {
            t,
            rss_before,
            floor: rss_floor(hp.rss_floor_scale, rss_before),
            min_leaf: hp.min_leaf,
            min_unique_lin: hp.min_unique_for_lin_blin,
            min_unique_plin: hp.min_unique_per_child_for_plin,
            allowed: hp.allowed_kinds,
        }
    }

    fn finish(&self, kind: ModelKind, rss: f64) -> (f64, f64) {
        let bic = bic_score(rss, self.t, kind.dof(), self.floor);
        (bic, (self.rss_before - rss) / self.t as f64)
    }
}

/// Best fit per model kind (indexed by [`ModelKind::index`]).
pub type KindBests = [Option<NodeFit>; 5];

#[derive(Clone, Copy)]
struct PivotBest {
    rss: f64,
    position: usize,
    pivot: f64,
    left: Moments,
}

fn keep_min(slot: &mut Option<PivotBest>, floor: f64, cand: PivotBest) {
    // Floored comparison so that equally perfect fits keep the first pivot.
    let better = match slot {
        None => true,
        Some(cur) => cand.rss.max(floor) < cur.rss.max(floor),
    };
    if better {
        *slot = Some(cand);
    }
}

/// Best LIN, PCON, BLIN and PLIN fits of one sorted numeric predictor.
pub fn scan_numeric(predictor: usize, xs: &[f64], rs: &[f64], ctx: &ScanContext) -> KindBests {
    let mut out: KindBests = Default::default();
    if xs.is_empty() {
        return out;
    }
    let allowed = ctx.allowed;
    // Distinct values are counted inside the scan; eligibility for BLIN is
    // decided afterwards, so the hinge fits are requested whenever allowed.
    let wants = ScanWants {
        plin: allowed.contains(ModelKind::Plin),
        blin: allowed.contains(ModelKind::Blin),
    };
    let (mut pcon, mut plin, mut blin) = (None, None, None);
    let totals = scan_pivots(xs, rs, ctx.min_leaf, wants, |ev| {
        let cand = |rss| PivotBest {
            rss,
            position: ev.position,
            pivot: ev.pivot,
            left: ev.left,
        };
        if allowed.contains(ModelKind::Pcon) {
            keep_min(&mut pcon, ctx.floor, cand(ev.pcon_rss));
        }
        if let Some(rss) = ev.plin_rss {
            if ev.unique_left >= ctx.min_unique_plin && ev.unique_right >= ctx.min_unique_plin {
                keep_min(&mut plin, ctx.floor, cand(rss));
            }
        }
        if let Some(rss) = ev.blin_rss {
            keep_min(&mut blin, ctx.floor, cand(rss));
        }
    });
    let shift = totals.shift;
    let total = totals.total;
    let t = xs.len();
    let range = Some((xs[0], xs[t - 1]));
    let lin_eligible = totals.unique >= ctx.min_unique_lin;

    let make = |kind: ModelKind, rss: f64, pivot: Option<f64>, l: LinearPiece, r: Option<LinearPiece>, n_left: usize| {
        let (bic, gain) = ctx.finish(kind, rss);
        NodeFit {
            kind,
            predictor: Some(predictor),
            pivot: pivot.map(Pivot::Value),
            coef_left: l.unshift(shift),
            coef_right: r.map(|p| p.unshift(shift)),
            bic,
            rss_before: ctx.rss_before,
            rss_after: rss,
            gain,
            n_left,
            n_right: t - n_left,
            range,
        }
    };

    if lin_eligible && allowed.contains(ModelKind::Lin) {
        if let Some((piece, rss)) = total.fit_lin() {
            out[ModelKind::Lin.index()] = Some(make(ModelKind::Lin, rss, None, piece, None, t));
        }
    }
    if let Some(b) = pcon {
        let right = total - b.left;
        let l = LinearPiece::constant(b.left.sy / b.left.count);
        let r = LinearPiece::constant(right.sy / right.count);
        out[ModelKind::Pcon.index()] = Some(make(ModelKind::Pcon, b.rss, Some(b.pivot), l, Some(r), b.position + 1));
    }
    if let Some(b) = plin {
        let right = total - b.left;
        if let (Some((l, _)), Some((r, _))) = (b.left.fit_lin(), right.fit_lin()) {
            out[ModelKind::Plin.index()] =
                Some(make(ModelKind::Plin, b.rss, Some(b.pivot), l, Some(r), b.position + 1));
        }
    }
    if lin_eligible {
        if let (Some(b), Some(base)) = (blin, LinBase::new(&total)) {
            let right = total - b.left;
            let knot = b.pivot - shift;
            if let Some(fit) = BlinFit::at(&base, &right, knot) {
                let (l, r) = fit.pieces(&base, knot);
                out[ModelKind::Blin.index()] =
                    Some(make(ModelKind::Blin, b.rss, Some(b.pivot), l, Some(r), b.position + 1));
            }
        }
    }
    out
}

/// Best PCON split of a categorical predictor.
///
/// Levels present in the node are ordered by their mean residual (ties by
/// level id); splits are tried between consecutive distinct means, and the
/// left side is the set of levels at or below the cut.
pub fn scan_categorical(
    predictor: usize,
    codes: &[u32],
    rs: &[f64],
    n_levels: usize,
    ctx: &ScanContext,
) -> Option<NodeFit> {
    if !ctx.allowed.contains(ModelKind::Pcon) || codes.is_empty() {
        return None;
    }
    let mut count = vec![0.0f64; n_levels];
    let mut sum = vec![0.0f64; n_levels];
    let mut syy = 0.0;
    for (&c, &r) in codes.iter().zip(rs) {
        count[c as usize] += 1.0;
        sum[c as usize] += r;
        syy += r * r;
    }
    let mut present: Vec<(f64, u32)> = (0..n_levels)
        .filter(|&l| count[l] > 0.0)
        .map(|l| (sum[l] / count[l], l as u32))
        .collect();
    if present.len() < 2 {
        return None;
    }
    present.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let t = codes.len() as f64;
    let total_sum: f64 = sum.iter().sum();
    let (mut nl, mut sl) = (0.0, 0.0);
    let mut best: Option<(f64, usize, f64, f64)> = None;
    for k in 0..present.len() - 1 {
        let level = present[k].1 as usize;
        nl += count[level];
        sl += sum[level];
        if !(present[k].0 < present[k + 1].0) {
            continue;
        }
        let nr = t - nl;
        if (nl as usize) < ctx.min_leaf || (nr as usize) < ctx.min_leaf {
            continue;
        }
        let sr = total_sum - sl;
        let rss = (syy - sl * sl / nl - sr * sr / nr).max(0.0);
        if best.is_none_or(|(b, ..)| rss.max(ctx.floor) < b.max(ctx.floor)) {
            best = Some((rss, k, nl, sl));
        }
    }
    let (rss, k, nl, sl) = best?;
    let mut left_levels: Vec<u32> = present[..=k].iter().map(|p| p.1).collect();
    left_levels.sort_unstable();
    let (bic, gain) = ctx.finish(ModelKind::Pcon, rss);
    let nr = t - nl;
    Some(NodeFit {
        kind: ModelKind::Pcon,
        predictor: Some(predictor),
        pivot: Some(Pivot::Levels(left_levels)),
        coef_left: LinearPiece::constant(sl / nl),
        coef_right: Some(LinearPiece::constant((total_sum - sl) / nr)),
        bic,
        rss_before: ctx.rss_before,
        rss_after: rss,
        gain,
        n_left: nl as usize,
        n_right: nr as usize,
        range: None,
    })
}

/// Rows of a node plus, for each numeric predictor, the same rows in
/// ascending predictor order.
#[derive(Debug, Clone, Copy)]
pub struct NodeView<'a> {
    pub rows: &'a [RowId],
    ordered: &'a [&'a [RowId]],
}

impl<'a> NodeView<'a> {
    pub fn new(rows: &'a [RowId], ordered: &'a [&'a [RowId]]) -> Self {
        debug_assert!(ordered.iter().all(|o| o.len() == rows.len()));
        NodeView { rows, ordered }
    }

    pub fn ordered(&self, slot: usize) -> &'a [RowId] {
        self.ordered[slot]
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Owned node index built by filtering a dataset's presorted orderings.
#[derive(Debug, Clone)]
pub struct NodeIndex {
    rows: Vec<RowId>,
    ordered: Vec<Vec<RowId>>,
}

impl NodeIndex {
    /// All rows of the dataset.
    pub fn root(ds: &Dataset) -> Self {
        NodeIndex {
            rows: (0..ds.n_rows() as RowId).collect(),
            ordered: ds.sorted_index().orders().to_vec(),
        }
    }

    /// The given rows; orderings are stable filters of the presorted index.
    pub fn from_rows(ds: &Dataset, rows: &[RowId]) -> Self {
        let mut member = vec![false; ds.n_rows()];
        for &r in rows {
            member[r as usize] = true;
        }
        let ordered = ds
            .sorted_index()
            .orders()
            .iter()
            .map(|o| o.iter().copied().filter(|&r| member[r as usize]).collect())
            .collect();
        let mut rows = rows.to_vec();
        rows.sort_unstable();
        NodeIndex { rows, ordered }
    }

    pub fn rows(&self) -> &[RowId] {
        &self.rows
    }

    pub fn ordered(&self, slot: usize) -> &[RowId] {
        &self.ordered[slot]
    }

    /// Calls `f` with a borrowed view of this index.
    pub fn with_view<R>(&self, f: impl FnOnce(NodeView<'_>) -> R) -> R {
        let slices: Vec<&[RowId]> = self.ordered.iter().map(Vec::as_slice).collect();
        f(NodeView::new(&self.rows, &slices))
    }
}

/// Result of model selection in a node.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub best: NodeFit,
    /// Best candidate of each kind over all predictors, when eligible.
    pub per_kind: KindBests,
}

impl Selection {
    pub fn candidate(&self, kind: ModelKind) -> Option<&NodeFit> {
        self.per_kind[kind.index()].as_ref()
    }
}

const PARALLEL_WORK: usize = 1 << 16;

/// Picks the predictor and model kind with the lowest BIC in a node.
///
/// `residuals` is indexed by row id over the whole dataset.
pub fn select_model(ds: &Dataset, node: NodeView<'_>, residuals: &[f64], hp: &Hyperparams) -> Selection {
    let t = node.len();
    assert!(t > 0, "model selection on an empty node");
    let mut moments = Moments::default();
    for &r in node.rows {
        moments.push(0.0, residuals[r as usize]);
    }
    let rss_before = moments.syy;
    let ctx = ScanContext::new(hp, t, rss_before);
    let (con_piece, con_rss) = moments.fit_con();
    let (bic, gain) = ctx.finish(ModelKind::Con, con_rss);
    let con = NodeFit {
        kind: ModelKind::Con,
        predictor: None,
        pivot: None,
        coef_left: con_piece,
        coef_right: None,
        bic,
        rss_before,
        rss_after: con_rss,
        gain,
        n_left: t,
        n_right: 0,
        range: None,
    };

    let scan_column = |j: usize| -> KindBests {
        let col = ds.column(j);
        match &col.data {
            ColumnData::Numeric(values) => {
                let slot = ds.sorted_index().slot(j).expect("numeric column has a slot");
                let order = node.ordered(slot);
                let xs: Vec<f64> = order.iter().map(|&r| values[r as usize]).collect();
                let rs: Vec<f64> = order.iter().map(|&r| residuals[r as usize]).collect();
                scan_numeric(j, &xs, &rs, &ctx)
            }
            ColumnData::Categorical { codes, levels } => {
                let cs: Vec<u32> = node.rows.iter().map(|&r| codes[r as usize]).collect();
                let rs: Vec<f64> = node.rows.iter().map(|&r| residuals[r as usize]).collect();
                let mut out: KindBests = Default::default();
                out[ModelKind::Pcon.index()] = scan_categorical(j, &cs, &rs, levels.len(), &ctx);
                out
            }
        }
    };
    let p = ds.n_cols();
    let per_column: Vec<KindBests> = if p > 1 && t * p >= PARALLEL_WORK && rayon::current_num_threads() > 1 {
        (0..p).into_par_iter().map(scan_column).collect()
    } else {
        (0..p).map(scan_column).collect()
    };

    let mut per_kind: KindBests = Default::default();
    per_kind[ModelKind::Con.index()] = Some(con.clone());
    for bests in per_column {
        for (slot, cand) in per_kind.iter_mut().zip(bests) {
            if let Some(c) = cand {
                if slot.as_ref().is_none_or(|cur| c.cmp_rank(cur) == Ordering::Less) {
                    *slot = Some(c);
                }
            }
        }
    }
    let best = per_kind
        .iter()
        .flatten()
        .min_by(|a, b| a.cmp_rank(b))
        .cloned()
        .unwrap_or(con);
    Selection { best, per_kind }
}
