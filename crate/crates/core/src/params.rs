use serde::{Deserialize, Serialize};

use crate::error::{PilotError, Result};
use crate::scan::ModelKind;

/// Set of node model kinds a tree may use. Always contains CON.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ModelKind>", into = "Vec<ModelKind>")]
pub struct KindSet([bool; 5]);

impl KindSet {
    pub fn all() -> Self {
        KindSet([true; 5])
    }

    /// `{CON, PCON}`: plain CART without pruning.
    pub fn cart() -> Self {
        Self::from_kinds(&[ModelKind::Con, ModelKind::Pcon])
    }

    pub fn from_kinds(kinds: &[ModelKind]) -> Self {
        let mut set = [false; 5];
        set[ModelKind::Con.index()] = true;
        for k in kinds {
            set[k.index()] = true;
        }
        KindSet(set)
    }

    pub fn contains(&self, kind: ModelKind) -> bool {
        self.0[kind.index()]
    }

    pub fn kinds(&self) -> Vec<ModelKind> {
        ModelKind::ALL.into_iter().filter(|k| self.contains(*k)).collect()
    }
}

impl Default for KindSet {
    fn default() -> Self {
        Self::all()
    }
}

impl TryFrom<Vec<ModelKind>> for KindSet {
    type Error = String;

    fn try_from(kinds: Vec<ModelKind>) -> std::result::Result<Self, String> {
        if !kinds.contains(&ModelKind::Con) {
            return Err("allowed_kinds must contain CON".into());
        }
        Ok(KindSet::from_kinds(&kinds))
    }
}

impl From<KindSet> for Vec<ModelKind> {
    fn from(set: KindSet) -> Self {
        set.kinds()
    }
}

/// Tree-growing hyperparameters. Defaults: depth 12, `n_fit` 10, `n_leaf` 5.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyperparams {
    /// Maximum reported depth; LIN nodes do not count.
    pub max_depth: usize,
    /// Nodes with fewer cases become CON leaves.
    pub min_fit: usize,
    /// Minimum cases in each child of a split.
    pub min_leaf: usize,
    pub allowed_kinds: KindSet,
    /// Distinct predictor values a node needs before LIN or BLIN is tried.
    pub min_unique_for_lin_blin: usize,
    /// Distinct predictor values each side needs before PLIN is tried.
    pub min_unique_per_child_for_plin: usize,
    /// RSS is floored at `rss_floor_scale * max(1, sum r^2)` inside the BIC.
    pub rss_floor_scale: f64,
    /// Longest run of consecutive LIN fits in one node.
    pub max_lin_chain: usize,
    /// A LIN fit removing less than this fraction of the node's RSS closes the node.
    pub min_rel_gain_lin: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            max_depth: 12,
            min_fit: 10,
            min_leaf: 5,
            allowed_kinds: KindSet::all(),
            min_unique_for_lin_blin: 5,
            min_unique_per_child_for_plin: 5,
            rss_floor_scale: 1e-12,
            max_lin_chain: 100,
            min_rel_gain_lin: 1e-10,
        }
    }
}

impl Hyperparams {
    /// Defaults restricted to `{CON, PCON}`.
    pub fn cart() -> Self {
        Hyperparams {
            allowed_kinds: KindSet::cart(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(PilotError::InvalidHyperparams(msg.to_string()));
        if self.max_depth < 1 {
            return bad("max_depth must be at least 1");
        }
        if self.min_leaf < 1 {
            return bad("min_leaf must be at least 1");
        }
        if self.min_fit < 1 {
            return bad("min_fit must be at least 1");
        }
        if !self.allowed_kinds.contains(ModelKind::Con) {
            return bad("allowed_kinds must contain CON");
        }
        if !(self.rss_floor_scale.is_finite() && self.rss_floor_scale > 0.0) {
            return bad("rss_floor_scale must be positive and finite");
        }
        if !(self.min_rel_gain_lin.is_finite() && self.min_rel_gain_lin >= 0.0) {
            return bad("min_rel_gain_lin must be non-negative and finite");
        }
        Ok(())
    }
}
