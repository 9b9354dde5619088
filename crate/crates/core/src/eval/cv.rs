//! k-fold cross-validation and MSE-ratio reports.

use std::fmt::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::build::build_tree;
use crate::data::{Dataset, RowId};
use crate::error::{PilotError, Result};
use crate::eval::yeo_johnson::YeoJohnson;
use crate::numfmt::{format_f64, format_sig};
use crate::params::Hyperparams;

/// A named learner configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Method {
    pub name: String,
    pub hyperparams: Hyperparams,
    /// Transform numeric predictors with Yeo-Johnson fitted on each training fold.
    pub yeo_johnson: bool,
}

impl Method {
    pub fn pilot() -> Self {
        Method {
            name: "pilot".into(),
            hyperparams: Hyperparams::default(),
            yeo_johnson: false,
        }
    }

    pub fn cart() -> Self {
        Method {
            name: "cart".into(),
            hyperparams: Hyperparams::cart(),
            yeo_johnson: false,
        }
    }
}

/// Fold id per row: rows are shuffled with a seeded ChaCha8 generator and
/// the row at shuffled position `i` goes to fold `i % k`.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold = vec![0; n];
    for (pos, &row) in order.iter().enumerate() {
        fold[row] = pos % k;
    }
    fold
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub dataset: String,
    pub method: String,
    /// Mean test MSE over folds; `None` if any fold failed.
    pub mse: Option<f64>,
    /// `mse` over the lowest successful `mse` for the dataset.
    pub ratio: Option<f64>,
    pub fold_mse: Vec<Option<f64>>,
    pub failure: Option<String>,
    /// Wall-clock training plus prediction time. Not part of the report files.
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub folds: usize,
    pub seed: u64,
    pub rows: Vec<EvalRow>,
}

/// MSE values below this are treated as equal when forming ratios.
fn mse_floor(ds: &Dataset) -> f64 {
    let y = ds.response();
    let n = y.len() as f64;
    let m = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
    1e-15 * var.max(1.0)
}

fn run_fold(ds: &Dataset, method: &Method, train: &[RowId], test: &[RowId]) -> Result<f64> {
    let mut train_ds = ds.subset(train)?;
    let mut test_x = ds.features().select_rows(test);
    if method.yeo_johnson {
        let yj = YeoJohnson::fit(train_ds.features());
        let response = train_ds.response().to_vec();
        train_ds = Dataset::new(yj.transform(train_ds.features())?, ds.target(), response)?;
        test_x = yj.transform(&test_x)?;
    }
    let tree = build_tree(&train_ds, &method.hyperparams)?;
    let preds = tree.predict_table(&test_x)?;
    let y = ds.response();
    let sse: f64 = test.iter().zip(&preds).map(|(&r, p)| (y[r as usize] - p).powi(2)).sum();
    let mse = sse / test.len() as f64;
    if !mse.is_finite() {
        return Err(PilotError::InvalidArgument("non-finite test MSE".into()));
    }
    Ok(mse)
}

/// Cross-validated test MSE of each method on one dataset.
pub fn kfold_cv(name: &str, ds: &Dataset, k: usize, methods: &[Method], seed: u64) -> Result<EvalReport> {
    if k < 2 {
        return Err(PilotError::InvalidArgument("need at least 2 folds".into()));
    }
    if ds.n_rows() < k {
        return Err(PilotError::InvalidArgument(format!("{} rows cannot fill {k} folds", ds.n_rows())));
    }
    if methods.is_empty() {
        return Err(PilotError::InvalidArgument("no methods to evaluate".into()));
    }
    let fold = fold_assignment(ds.n_rows(), k, seed);
    let splits: Vec<(Vec<RowId>, Vec<RowId>)> = (0..k)
        .map(|f| {
            let (test, train): (Vec<RowId>, Vec<RowId>) = (0..ds.n_rows() as RowId).partition(|&r| fold[r as usize] == f);
            (train, test)
        })
        .collect();

    let mut rows = Vec::with_capacity(methods.len());
    for method in methods {
        let start = Instant::now();
        let mut fold_mse = Vec::with_capacity(k);
        let mut failure = None;
        for (f, (train, test)) in splits.iter().enumerate() {
            match run_fold(ds, method, train, test) {
                Ok(m) => fold_mse.push(Some(m)),
                Err(e) => {
                    fold_mse.push(None);
                    failure.get_or_insert_with(|| format!("fold {}: {e}", f + 1));
                }
            }
        }
        let mse = failure.is_none().then(|| fold_mse.iter().flatten().sum::<f64>() / k as f64);
        rows.push(EvalRow {
            dataset: name.to_string(),
            method: method.name.clone(),
            mse,
            ratio: None,
            fold_mse,
            failure,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    let floor = mse_floor(ds);
    let best = rows.iter().filter_map(|r| r.mse).map(|m| m.max(floor)).fold(f64::INFINITY, f64::min);
    for r in &mut rows {
        r.ratio = r.mse.map(|m| m.max(floor) / best);
    }
    Ok(EvalReport { folds: k, seed, rows })
}

impl EvalReport {
    /// Appends another report's rows (same folds and seed expected).
    pub fn extend(&mut self, other: EvalReport) {
        self.rows.extend(other.rows);
    }

    pub fn any_failed(&self) -> bool {
        self.rows.iter().any(|r| r.failure.is_some())
    }

    pub fn row(&self, dataset: &str, method: &str) -> Option<&EvalRow> {
        self.rows.iter().find(|r| r.dataset == dataset && r.method == method)
    }

    /// `dataset,method,folds,seed,mse,ratio,status`. Failed methods show `**`
    /// as ratio.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dataset,method,folds,seed,mse,ratio,status\n");
        for r in &self.rows {
            let field = |s: &str| {
                if s.contains([',', '"', '\n']) {
                    format!("\"{}\"", s.replace('"', "\"\""))
                } else {
                    s.to_string()
                }
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                field(&r.dataset),
                field(&r.method),
                self.folds,
                self.seed,
                r.mse.map(format_f64).unwrap_or_default(),
                r.ratio.map_or_else(|| "**".to_string(), format_f64),
                field(r.failure.as_deref().map_or("ok", |f| f)),
            );
        }
        out
    }

    /// Space-aligned table with 6 significant digits.
    pub fn to_text(&self) -> String {
        let header = ["dataset", "method", "mse", "ratio", "status"];
        let body: Vec<[String; 5]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.dataset.clone(),
                    r.method.clone(),
                    r.mse.map_or_else(|| "-".into(), |m| format_sig(m, 6)),
                    r.ratio.map_or_else(|| "**".into(), |m| format_sig(m, 6)),
                    r.failure.clone().unwrap_or_else(|| "ok".into()),
                ]
            })
            .collect();
        let mut width = header.map(str::len);
        for row in &body {
            for (w, cell) in width.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }
        let mut out = format!("{}-fold CV, seed {}\n", self.folds, self.seed);
        let mut line = |cells: Vec<&str>| {
            let parts: Vec<String> = cells.iter().zip(width).map(|(c, w)| format!("{c:<w$}")).collect();
            let _ = writeln!(out, "{}", parts.join("  ").trim_end());
        };
        line(header.to_vec());
        for row in &body {
            line(row.iter().map(String::as_str).collect());
        }
        out
    }
}
