//! Exhaustive-search optimal assignment.
//!
//! Every feasible assignment is scored with the same sum-SINR reward the
//! agent sees. The reduction is parallel but deterministic: the winner is the
//! highest value, lowest lexicographic index on exact ties.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::link::{LinkBudget, RewardScale};
use crate::mdp::{enumerate_actions, ActionSpace, Assignment};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub best: Assignment,
    pub best_index: usize,
    pub best_value: f64,
    pub scale: RewardScale,
    pub evaluated_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedAssignment {
    pub index: usize,
    pub assignment: Assignment,
    pub value: f64,
}

fn score_all(actions: &ActionSpace, budget: &LinkBudget, scale: RewardScale) -> Result<Vec<f64>> {
    actions
        .iter()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|a| budget.sum_sinr(a, scale))
        .collect()
}

// (value, index) order: larger value wins, then smaller index
fn better(a: (f64, usize), b: (f64, usize)) -> (f64, usize) {
    if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
        b
    } else {
        a
    }
}

/// Best assignment over a prebuilt action space.
pub fn optimal_over(
    actions: &ActionSpace,
    budget: &LinkBudget,
    scale: RewardScale,
) -> Result<OracleResult> {
    let values = score_all(actions, budget, scale)?;
    let (best_value, best_index) = values
        .par_iter()
        .enumerate()
        .map(|(i, v)| (*v, i))
        .reduce(|| (f64::NEG_INFINITY, usize::MAX), better);
    Ok(OracleResult {
        best: actions.get(best_index).cloned().unwrap_or_default(),
        best_index,
        best_value,
        scale,
        evaluated_count: values.len(),
    })
}

/// Best assignment of the users in `budget` onto its (AP, wavelength) slots.
pub fn optimal_assignment(budget: &LinkBudget, scale: RewardScale) -> Result<OracleResult> {
    let actions = enumerate_actions(budget.users(), budget.aps(), budget.wavelengths())?;
    optimal_over(&actions, budget, scale)
}

/// The `k` best assignments in descending value; ties keep lexicographic
/// order. Asking for more than exist returns them all.
pub fn top_k(budget: &LinkBudget, scale: RewardScale, k: usize) -> Result<Vec<RankedAssignment>> {
    let actions = enumerate_actions(budget.users(), budget.aps(), budget.wavelengths())?;
    top_k_over(&actions, budget, scale, k)
}

pub fn top_k_over(
    actions: &ActionSpace,
    budget: &LinkBudget,
    scale: RewardScale,
    k: usize,
) -> Result<Vec<RankedAssignment>> {
    let values = score_all(actions, budget, scale)?;
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.par_sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    Ok(order
        .into_iter()
        .take(k)
        .map(|i| RankedAssignment {
            index: i,
            assignment: actions.get(i).cloned().unwrap_or_default(),
            value: values[i],
        })
        .collect())
}
