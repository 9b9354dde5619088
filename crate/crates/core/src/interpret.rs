//! Feature importance and text rendering.

use std::fmt::Write;

use crate::build::{Children, PilotTree, TreeNode};
use crate::numfmt::format_sig;
use crate::scan::{LinearPiece, ModelKind, Pivot};

/// Weighted-gain importance per training column, normalized to sum to one.
/// All zeros when no node uses a predictor.
pub fn feature_importance(tree: &PilotTree) -> Vec<f64> {
    let mut raw = vec![0.0; tree.columns.len()];
    tree.root.walk(&mut |node| {
        if let Some(j) = node.fit.predictor {
            raw[j] += node.weight * node.fit.gain.max(0.0);
        }
    });
    let total: f64 = raw.iter().sum();
    if total > 0.0 {
        raw.iter_mut().for_each(|v| *v /= total);
    }
    raw
}

fn g(x: f64) -> String {
    format_sig(x, 6)
}

fn piece(p: &LinearPiece) -> String {
    format!("({}, {})", g(p.intercept), g(p.slope))
}

fn header(tree: &PilotTree, node: &TreeNode) -> String {
    let fit = &node.fit;
    let n = node.n_cases;
    let Some(j) = fit.predictor else {
        return format!("CON value={} n={}", g(fit.coef_left.intercept), n);
    };
    let meta = &tree.columns[j];
    let right = fit.coef_right.unwrap_or_default();
    match (fit.kind, &fit.pivot) {
        (ModelKind::Lin, _) => format!("LIN {} coef={} n={}", meta.name, piece(&fit.coef_left), n),
        (kind, Some(Pivot::Levels(set))) => {
            let names: Vec<&str> = set.iter().map(|&l| meta.levels.get(l as usize).map_or("?", String::as_str)).collect();
            format!(
                "{} {} in {{{}}} left={} right={} n={}",
                kind,
                meta.name,
                names.join(", "),
                g(fit.coef_left.intercept),
                g(right.intercept),
                n
            )
        }
        (ModelKind::Pcon, Some(Pivot::Value(p))) => format!(
            "PCON {} <= {} left={} right={} n={}",
            meta.name,
            g(*p),
            g(fit.coef_left.intercept),
            g(right.intercept),
            n
        ),
        (kind, pivot) => format!(
            "{} {} <= {} left={} right={} n={}",
            kind,
            meta.name,
            pivot.as_ref().and_then(Pivot::value).map_or_else(|| "?".to_string(), g),
            piece(&fit.coef_left),
            piece(&right),
            n
        ),
    }
}

fn render_into(tree: &PilotTree, node: &TreeNode, indent: usize, out: &mut String) {
    let _ = writeln!(out, "{:indent$}{}", "", header(tree, node), indent = indent);
    match &node.children {
        Children::Leaf => {}
        Children::Continue(c) => render_into(tree, c, indent + 2, out),
        Children::Split { left, right } => {
            render_into(tree, left, indent + 2, out);
            render_into(tree, right, indent + 2, out);
        }
    }
}

/// One line per node, children indented two spaces below their parent.
pub fn render_text(tree: &PilotTree) -> String {
    let mut out = String::new();
    render_into(tree, &tree.root, 0, &mut out);
    out
}
