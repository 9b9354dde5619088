//! PILOT: linear model trees grown greedily with a BIC node-model choice.

pub mod build;
pub mod data;
pub mod error;
pub mod eval;
pub mod interpret;
pub mod model_io;
pub mod numfmt;
pub mod params;
pub mod predict;
pub mod scan;

pub use build::{build_tree, build_tree_observed, BuildObserver, BuildOutcome, Children, NodeVisit, PilotTree, StopReason, TreeNode, TreeStats};
pub use data::{ingest_csv, read_aligned_csv, Column, ColumnData, ColumnKind, ColumnMeta, Dataset, FeatureTable, RowId};
pub use error::{PilotError, Result};
pub use params::{Hyperparams, KindSet};
pub use scan::{LinearPiece, ModelKind, NodeFit, Pivot};
pub use predict::{save_predictions, write_predictions, Feature, FeatureSource, PredictionTrace, Record};
pub use interpret::{feature_importance, render_text};
pub use model_io::{load_model, save_model, SCHEMA_VERSION};
