//! Yeo-Johnson power transform with a maximum-likelihood lambda.

use crate::data::{Column, ColumnData, FeatureTable};
use crate::error::Result;

const LAMBDA_RANGE: (f64, f64) = (-5.0, 5.0);
const TOLERANCE: f64 = 1e-6;

/// Pointwise transform. Strictly increasing in `x` for every `lambda`.
pub fn yeo_johnson_apply(lambda: f64, x: f64) -> f64 {
    if x >= 0.0 {
        if lambda == 0.0 {
            x.ln_1p()
        } else {
            (lambda * x.ln_1p()).exp_m1() / lambda
        }
    } else {
        let mu = 2.0 - lambda;
        if mu == 0.0 {
            -(-x).ln_1p()
        } else {
            -(mu * (-x).ln_1p()).exp_m1() / mu
        }
    }
}

/// Inverse of [`yeo_johnson_apply`] for the same `lambda`.
pub fn yeo_johnson_inverse(lambda: f64, y: f64) -> f64 {
    if y >= 0.0 {
        if lambda == 0.0 {
            y.exp_m1()
        } else {
            ((lambda * y).ln_1p() / lambda).exp_m1()
        }
    } else {
        let mu = 2.0 - lambda;
        if mu == 0.0 {
            -(-y).exp_m1()
        } else {
            -((-mu * y).ln_1p() / mu).exp_m1()
        }
    }
}

/// Gaussian profile log-likelihood of `lambda` (up to a constant).
pub fn yeo_johnson_loglik(lambda: f64, xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let ys: Vec<f64> = xs.iter().map(|&x| yeo_johnson_apply(lambda, x)).collect();
    let mean = ys.iter().sum::<f64>() / n;
    let var = ys.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n;
    if !(var > 0.0 && var.is_finite()) {
        return f64::NEG_INFINITY;
    }
    let jacobian: f64 = xs.iter().map(|&x| x.signum() * x.abs().ln_1p()).sum();
    -0.5 * n * var.ln() + (lambda - 1.0) * jacobian
}

/// Maximum-likelihood lambda over `[-5, 5]` by golden-section search.
/// Returns 1 (the identity) for empty or constant input.
pub fn yeo_johnson_fit(xs: &[f64]) -> f64 {
    let Some(&first) = xs.first() else { return 1.0 };
    if xs.iter().all(|&x| x == first) {
        return 1.0;
    }
    let f = |l: f64| yeo_johnson_loglik(l, xs);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = LAMBDA_RANGE;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > TOLERANCE {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}

/// Per-column lambdas for the numeric predictors of a table.
#[derive(Debug, Clone, PartialEq)]
pub struct YeoJohnson {
    /// `None` for categorical columns.
    pub lambdas: Vec<Option<f64>>,
}

impl YeoJohnson {
    pub fn fit(table: &FeatureTable) -> Self {
        let lambdas = table
            .columns()
            .iter()
            .map(|c| c.as_numeric().map(yeo_johnson_fit))
            .collect();
        YeoJohnson { lambdas }
    }

    pub fn transform(&self, table: &FeatureTable) -> Result<FeatureTable> {
        let columns = table
            .columns()
            .iter()
            .zip(&self.lambdas)
            .map(|(c, l)| match (&c.data, l) {
                (ColumnData::Numeric(v), Some(l)) => {
                    Column::numeric(c.name.clone(), v.iter().map(|&x| yeo_johnson_apply(*l, x)).collect())
                }
                _ => c.clone(),
            })
            .collect();
        FeatureTable::new(columns)
    }
}
