use std::fmt;

use serde::Serialize;

use super::{AdjointProfile, AsymptoticProfile, ProfileEntry, Provenance, Status};
use super::{DEFAULT_ONE_SIDED_THRESHOLD, DEFAULT_ZERO_THRESHOLD};
use crate::shift::ShiftOperator;
use crate::tree::Family;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Thresholds {
    /// At or below: zero.
    pub zero: f64,
    /// At or above, with a settled status or certified lower bound: positive.
    pub one_sided: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { zero: DEFAULT_ZERO_THRESHOLD, one_sided: DEFAULT_ONE_SIDED_THRESHOLD }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ForwardClass {
    C0Dot,
    C1Dot,
    Mixed,
    Undetermined,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum AdjointClass {
    CDot0,
    CDot1,
    /// Nonzero `A_*` with a nontrivial kernel: some level has several vertices.
    Mixed,
    Undetermined,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassificationC {
    pub forward: ForwardClass,
    pub forward_provenance: Provenance,
    pub adjoint: AdjointClass,
    pub adjoint_provenance: Provenance,
    pub notes: Vec<String>,
}

impl ClassificationC {
    pub fn is_c1dot(&self) -> bool {
        self.forward == ForwardClass::C1Dot
    }

    /// Known not to be in `C_{·0}`.
    pub fn adjoint_nonzero(&self) -> bool {
        matches!(self.adjoint, AdjointClass::CDot1 | AdjointClass::Mixed)
    }
}

impl fmt::Display for ForwardClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ForwardClass::C0Dot => "C_{0·}",
            ForwardClass::C1Dot => "C_{1·}",
            ForwardClass::Mixed => "neither C_{0·} nor C_{1·}",
            ForwardClass::Undetermined => "forward class undetermined",
        })
    }
}

impl fmt::Display for AdjointClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AdjointClass::CDot0 => "C_{·0}",
            AdjointClass::CDot1 => "C_{·1}",
            AdjointClass::Mixed => "neither C_{·0} nor C_{·1}",
            AdjointClass::Undetermined => "adjoint class undetermined",
        })
    }
}

impl fmt::Display for ClassificationC {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({}); {} ({})", self.forward, self.forward_provenance, self.adjoint, self.adjoint_provenance)
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Call {
    Zero,
    Positive,
    Open,
}

fn call(e: &ProfileEntry, t: &Thresholds) -> Call {
    if e.upper <= t.zero {
        Call::Zero
    } else if e.lower >= t.one_sided
        || (matches!(e.status, Status::Converged { .. } | Status::ExactOne) && e.estimate >= t.one_sided)
    {
        Call::Positive
    } else {
        Call::Open
    }
}

fn provenance_of<'a>(entries: impl Iterator<Item = &'a ProfileEntry>) -> Provenance {
    if entries.into_iter().all(|e| e.provenance.is_certified()) {
        Provenance::Certified
    } else {
        Provenance::Numerical
    }
}

pub fn classify(
    op: &ShiftOperator,
    forward: &AsymptoticProfile,
    adjoint: &AdjointProfile,
    thresholds: Thresholds,
) -> ClassificationC {
    let mut notes = Vec::new();
    let calls: Vec<Call> = forward.entries.iter().map(|e| call(e, &thresholds)).collect();
    let zero = calls.contains(&Call::Zero);
    let positive = calls.contains(&Call::Positive);
    let open = calls.contains(&Call::Open);
    let forward_class = match (zero, positive, open) {
        (true, true, _) => ForwardClass::Mixed,
        (_, _, true) => ForwardClass::Undetermined,
        (true, false, false) => ForwardClass::C0Dot,
        (false, true, false) => ForwardClass::C1Dot,
        (false, false, false) => ForwardClass::Undetermined,
    };
    if open {
        notes.push(format!(
            "{} of {} α entries could not be called at thresholds {:e}/{:e}",
            calls.iter().filter(|c| **c == Call::Open).count(),
            calls.len(),
            thresholds.zero,
            thresholds.one_sided
        ));
    }
    let forward_provenance = provenance_of(forward.entries.iter());

    let (adjoint_class, adjoint_provenance) = if adjoint.rooted {
        notes.push("rooted tree: A_* = 0".into());
        (AdjointClass::CDot0, Provenance::Certified)
    } else {
        // entries repeat their level's record, so per-vertex calls are per-level calls
        let per_level: Vec<Call> = adjoint.profile.entries.iter().map(|e| call(e, &thresholds)).collect();
        let zero = per_level.contains(&Call::Zero);
        let positive = per_level.contains(&Call::Positive);
        let open = per_level.contains(&Call::Open);
        if zero && positive {
            notes.push("adjoint levels disagree on a_u = 0; all-or-nothing law violated at these thresholds".into());
        }
        let singleton_levels = matches!(op.model().family(), Some(Family::BilateralPath));
        let class = match (zero, positive, open) {
            (true, false, false) => AdjointClass::CDot0,
            (false, true, false) if singleton_levels => AdjointClass::CDot1,
            (false, true, false) => AdjointClass::Mixed,
            _ => AdjointClass::Undetermined,
        };
        (class, provenance_of(adjoint.profile.entries.iter()))
    };

    ClassificationC { forward: forward_class, forward_provenance, adjoint: adjoint_class, adjoint_provenance, notes }
}
