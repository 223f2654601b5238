//! Cyclic vectors for backward shifts, Krylov witnesses, and the rule-based
//! cyclicity verdict for shifts on trees.

mod backward;
mod verdict;

pub use backward::{
    backward_cokernel, construct_backward_cyclic, construct_with_one_zero, range_membership_sums, schedule, sigma_m,
    verify_cyclic_candidate, window_vector, BackwardShiftSpec, CokernelReport, CyclicCandidate, Rescaling,
    SplitCandidate, Term, Verification,
};
pub use verdict::{cyclicity_verdict, Rule, Verdict, VerdictSubject};

use crate::error::{Error, Result};
use crate::shift::{ShiftOperator, SparseVector};
use crate::tree::{Family, TreeWindow, VertexId};

/// The unitary exchanging `e_k` and `e_{k'}` for `k ≥ 1` on a fork tree.
pub fn ray_swap(x: &SparseVector) -> SparseVector {
    x.iter()
        .map(|(v, c)| {
            let w = match v {
                VertexId::Int(k) if *k >= 1 => VertexId::Primed(*k as u64),
                VertexId::Primed(k) => VertexId::Int(*k as i64),
                other => other.clone(),
            };
            (w, c)
        })
        .collect()
}

/// `max ‖S U e_u − U S e_u‖` over window vertices `u` that stay interior
/// under the swap; zero exactly when both rays carry the same weights.
pub fn ray_swap_commutator(op: &ShiftOperator, window: &TreeWindow) -> Result<f64> {
    let model = op.model();
    if !matches!(model.family(), Some(Family::Tilde(_))) {
        return Err(Error::ShapeMismatch(format!("ray swap needs the tilde tree, got {}", model.describe())));
    }
    let mut worst: f64 = 0.0;
    for u in window.vertices() {
        let e = SparseVector::basis(u.clone());
        let swapped = ray_swap(&e);
        let w = swapped.support().next().expect("basis vector").clone();
        if !(window.is_interior(model, u)? && window.contains(&w) && window.is_interior(model, &w)?) {
            continue;
        }
        let left = op.apply(&swapped)?;
        let right = ray_swap(&op.apply(&e)?);
        worst = worst.max(left.sub(&right).norm());
    }
    Ok(worst)
}
