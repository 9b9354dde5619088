//! Seeded synthetic regression datasets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{Column, Dataset, FeatureTable};
use crate::error::{PilotError, Result};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uniform_columns(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Vec<Vec<f64>> {
    // Row-major draws so that a prefix of rows is stable in n.
    let mut cols = vec![Vec::with_capacity(n); p];
    for _ in 0..n {
        for col in cols.iter_mut() {
            col.push(rng.random::<f64>());
        }
    }
    cols
}

fn assemble(cols: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Dataset> {
    let columns = cols.into_iter().enumerate().map(|(j, v)| Column::numeric(format!("x{}", j + 1), v)).collect();
    Dataset::new(FeatureTable::new(columns)?, "y", y)
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(PilotError::InvalidArgument("n must be at least 1".into()));
    }
    Ok(())
}

/// `y = X beta + sigma * eps` with `X` uniform on `[0,1]^p` and standard
/// normal `eps`. Columns are named `x1..xp`, the target `y`.
pub fn gen_linear(n: usize, p: usize, beta: &[f64], sigma: f64, seed: u64) -> Result<Dataset> {
    check_n(n)?;
    if p == 0 {
        return Err(PilotError::InvalidArgument("p must be at least 1".into()));
    }
    if beta.len() != p {
        return Err(PilotError::InvalidArgument(format!("beta has {} entries, expected {p}", beta.len())));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(PilotError::InvalidArgument("sigma must be finite and non-negative".into()));
    }
    let mut rng = rng(seed);
    let cols = uniform_columns(&mut rng, n, p);
    let y = (0..n)
        .map(|i| {
            let signal: f64 = (0..p).map(|j| beta[j] * cols[j][i]).sum();
            let eps: f64 = rng.sample(StandardNormal);
            signal + sigma * eps
        })
        .collect();
    assemble(cols, y)
}

/// Noiseless signal of [`gen_additive`].
pub fn additive_signal(x: &[f64]) -> f64 {
    2.0 * x[0] + if x[1] > 0.5 { 1.5 } else { 0.0 } + (6.0 * (x[2] - 0.5)).tanh()
}

/// Additive model on `[0,1]^4`: a linear ramp in `x1`, a step in `x2`, a
/// saturating curve in `x3`; `x4` is pure noise. Noise sd 0.1.
pub fn gen_additive(n: usize, seed: u64) -> Result<Dataset> {
    check_n(n)?;
    let mut rng = rng(seed);
    let cols = uniform_columns(&mut rng, n, 4);
    let y = (0..n)
        .map(|i| {
            let x: Vec<f64> = cols.iter().map(|c| c[i]).collect();
            let eps: f64 = rng.sample(StandardNormal);
            additive_signal(&x) + 0.1 * eps
        })
        .collect();
    assemble(cols, y)
}

/// Noiseless signal of [`gen_piecewise`].
pub fn piecewise_signal(x: &[f64]) -> f64 {
    let mut v = 0.0;
    if x[0] > 0.3 {
        v += 2.0;
    }
    if x[0] > 0.7 {
        v += 3.0;
    }
    if x[1] > 0.6 {
        v -= 1.0;
    }
    v
}

/// Step function of `x1` and `x2` on `[0,1]^3`; `x3` is pure noise. Noise sd 0.1.
pub fn gen_piecewise(n: usize, seed: u64) -> Result<Dataset> {
    check_n(n)?;
    let mut rng = rng(seed);
    let cols = uniform_columns(&mut rng, n, 3);
    let y = (0..n)
        .map(|i| {
            let x: Vec<f64> = cols.iter().map(|c| c[i]).collect();
            let eps: f64 = rng.sample(StandardNormal);
            piecewise_signal(&x) + 0.1 * eps
        })
        .collect();
    assemble(cols, y)
}
