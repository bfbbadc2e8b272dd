//! Exact packing number by subset search.
//!
//! Every entry of `F = DᵀD` is non-negative, so `xᵀFx` can only grow as nodes
//! are switched on. The search therefore walks subsets in index order, carries
//! the running energy and the row sums `g_j = Σ_{i∈S} F_ij`, and drops any
//! candidate node whose addition would already break the budget: it can never
//! be added further down the same branch.
//!
//! The first pass finds the optimal cardinality `σ` (include-first, pruning
//! branches that cannot beat the incumbent). The second pass returns the
//! lexicographically smallest optimal activation vector by trying `x_i = 0`
//! before `x_i = 1` and stopping at the first set of size `σ`.

use crate::error::{Error, Result};
use crate::network::{within_budget, PackingInstance};

/// Largest instance searched by default.
pub const DEFAULT_LIMIT: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactResult {
    pub sigma: usize,
    pub best_x: Vec<u8>,
    /// Search nodes visited over both passes.
    pub subsets_checked: u64,
}

struct Search<'a> {
    f: &'a nalgebra::DMatrix<f64>,
    eps: f64,
    visited: u64,
}

#[derive(Clone)]
struct State {
    energy: f64,
    /// `g_j` for every node.
    row_sums: Vec<f64>,
    chosen: Vec<usize>,
}

impl Search<'_> {
    fn added_energy(&self, st: &State, j: usize) -> f64 {
        st.energy + 2.0 * st.row_sums[j] + self.f[(j, j)]
    }

    fn include(&self, st: &State, j: usize) -> State {
        let mut next = st.clone();
        next.energy = self.added_energy(st, j);
        for (k, g) in next.row_sums.iter_mut().enumerate() {
            *g += self.f[(j, k)];
        }
        next.chosen.push(j);
        next
    }

    fn addable(&self, st: &State, cands: &[usize]) -> Vec<usize> {
        cands
            .iter()
            .copied()
            .filter(|&j| within_budget(self.added_energy(st, j), self.eps))
            .collect()
    }

    /// Largest feasible cardinality reachable from `st`; updates `best`.
    fn maximize(&mut self, st: &State, cands: &[usize], best: &mut usize) {
        self.visited += 1;
        *best = (*best).max(st.chosen.len());
        for (p, &j) in cands.iter().enumerate() {
            if st.chosen.len() + (cands.len() - p) <= *best {
                return;
            }
            let next = self.include(st, j);
            let rest = self.addable(&next, &cands[p + 1..]);
            self.maximize(&next, &rest, best);
        }
    }

    /// First set of size `target` in lexicographic order of the activation vector.
    fn first_of_size(&mut self, st: &State, cands: &[usize], target: usize) -> Option<Vec<usize>> {
        self.visited += 1;
        if st.chosen.len() == target {
            return Some(st.chosen.clone());
        }
        let (&j, rest) = cands.split_first()?;
        if st.chosen.len() + cands.len() < target {
            return None;
        }
        if let Some(found) = self.first_of_size(st, rest, target) {
            return Some(found);
        }
        let next = self.include(st, j);
        let rest = self.addable(&next, rest);
        self.first_of_size(&next, &rest, target)
    }
}

/// Maximum number of simultaneously active nodes with `xᵀFx ≤ ε`.
///
/// Ties between optimal activation vectors resolve to the lexicographically
/// smallest one.
pub fn solve_exact(inst: &PackingInstance, limit: usize) -> Result<ExactResult> {
    let n = inst.len();
    if n > limit {
        return Err(Error::InstanceTooLarge { n, limit });
    }
    if n > DEFAULT_LIMIT {
        log::warn!("exact search over {n} nodes; runtime grows as 2^N");
    }
    let mut search = Search {
        f: inst.gram(),
        eps: inst.epsilon(),
        visited: 0,
    };
    let root = State {
        energy: 0.0,
        row_sums: vec![0.0; n],
        chosen: Vec::new(),
    };
    let all: Vec<usize> = (0..n).collect();
    let cands = search.addable(&root, &all);

    let mut sigma = 0;
    search.maximize(&root, &cands, &mut sigma);
    let chosen = search
        .first_of_size(&root, &cands, sigma)
        .expect("a set of the optimal size was found in the first pass");

    let mut best_x = vec![0u8; n];
    for i in chosen {
        best_x[i] = 1;
    }
    Ok(ExactResult {
        sigma,
        best_x,
        subsets_checked: search.visited,
    })
}
