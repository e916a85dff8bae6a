//! Affine under-approximations of the stage value functions.

use crate::model::Instance;
use serde::{Deserialize, Serialize};

/// How a cut was generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CutOrigin {
    /// Lagrangian dual of an exactly solved stage MILP.
    Lagrangian,
    /// Lagrangian function of a relaxed (outer-approximated) stage problem.
    RelaxedLagrangian,
    /// LP-duality cut.
    Benders,
}

/// The cut `Q_t(x, ξ_t^k) ≥ v + πᵀx`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cut {
    pub v: f64,
    pub pi: Vec<f64>,
    pub origin: CutOrigin,
}

impl Cut {
    /// Value of the affine function at `x`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.v + self.pi.iter().zip(x).map(|(p, xi)| p * xi).sum::<f64>()
    }
}

/// Per-stage, per-realization cut lists. Append-only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutPool {
    /// `cuts[t-1][k]`; stage 1 has no entries.
    cuts: Vec<Vec<Vec<Cut>>>,
}

impl CutPool {
    /// Empty pool shaped after the instance supports.
    pub fn new(inst: &Instance) -> Self {
        let cuts = (1..=inst.t)
            .map(|t| if t == 1 { Vec::new() } else { vec![Vec::new(); inst.stage_k(t)] })
            .collect();
        Self { cuts }
    }

    /// Cuts of stage `t` (1-based), indexed by realization.
    pub fn stage(&self, t: usize) -> &[Vec<Cut>] {
        self.cuts.get(t - 1).map_or(&[], |v| v.as_slice())
    }

    /// Appends a cut for realization `k` of stage `t`.
    pub fn add(&mut self, t: usize, k: usize, cut: Cut) {
        assert!(t >= 2, "stage 1 has no value function");
        self.cuts[t - 1][k].push(cut);
    }

    /// Total number of cuts.
    pub fn len(&self) -> usize {
        self.cuts.iter().flatten().map(Vec::len).sum()
    }

    /// True if the pool holds no cut.
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Iterates over `(t, k, cut)`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &Cut)> {
        self.cuts
            .iter()
            .enumerate()
            .flat_map(|(ti, st)| st.iter().enumerate().flat_map(move |(k, cs)| cs.iter().map(move |c| (ti + 1, k, c))))
    }
}
