//! Cross-validation harness, synthetic data, preprocessing and the naive
//! CART reference.

pub mod cart_oracle;
pub mod cv;
pub mod generators;
pub mod yeo_johnson;

pub use cart_oracle::{cart_oracle, OracleSplit, OracleTree};
pub use cv::{fold_assignment, kfold_cv, EvalReport, EvalRow, Method};
pub use generators::{additive_signal, gen_additive, gen_linear, gen_piecewise, piecewise_signal};
pub use yeo_johnson::{yeo_johnson_apply, yeo_johnson_fit, yeo_johnson_inverse, YeoJohnson};
