//! Asymptotic limits of a contractive shift.
//!
//! `A = lim S*ⁿSⁿ` is diagonal with entries `α_u = lim_n s_n(u)`, where
//! `s_n(u) = Σ_{v∈Chiⁿ(u)} ∏_{j<n} λ²_{Par^j v}` is nonincreasing, so every
//! partial sum is an upper bound. `A_* = lim SⁿS*ⁿ` acts on each level as
//! `a·P_h` with `h_u = Σ_{v∈Gen(u)} (∏_{j≥0} λ_{Par^j v}) e_v`, `a = ‖h_u‖²`;
//! it vanishes on rooted trees.

mod alpha;
mod classify;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Serialize, Serializer};

pub use alpha::{AlphaEngine, AlphaOptions};
pub use classify::{classify, AdjointClass, ClassificationC, ForwardClass, Thresholds};

use crate::error::{Error, Result};
use crate::shift::{Ray, ShiftOperator, SparseVector, WeightRule};
use crate::tree::{BranchingIndex, Family, Multiplicity, TreeModel, TreeWindow, VertexId};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_DEPTH: usize = 64;
pub const DEFAULT_ZERO_THRESHOLD: f64 = 1e-9;
pub const DEFAULT_ONE_SIDED_THRESHOLD: f64 = 1e-6;
/// Window partial branching sum above which a non-finite family reports `Infinite`.
pub const DEFAULT_BRANCHING_CAP: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Status {
    Converged { tol: f64 },
    MaxDepthReached,
    ExactZero,
    ExactOne,
}

impl Status {
    pub fn label(&self) -> &'static str {
        match self {
            Status::Converged { .. } => "converged",
            Status::MaxDepthReached => "max-depth",
            Status::ExactZero => "exact-zero",
            Status::ExactOne => "exact-one",
        }
    }

    pub fn is_settled(&self) -> bool {
        !matches!(self, Status::MaxDepthReached)
    }
}

impl Serialize for Status {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

/// How a value was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// Exact by structure (isometry, nilpotency, root).
    Certified,
    /// Closed-form evaluation of the limit.
    ClosedForm,
    /// Truncated sums or products.
    Numerical,
}

impl Provenance {
    pub fn is_certified(&self) -> bool {
        !matches!(self, Provenance::Numerical)
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.is_certified() { "certified" } else { "numerical" })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProfileEntry {
    pub vertex: VertexId,
    pub estimate: f64,
    /// Certified lower bound; 0 when none is known.
    pub lower: f64,
    pub upper: f64,
    pub status: Status,
    #[serde(rename = "depth")]
    pub depth_used: usize,
    pub provenance: Provenance,
    /// `s_0, s_1, …` for numerically evaluated forward entries.
    #[serde(skip)]
    pub partial_sums: Vec<f64>,
}

impl ProfileEntry {
    pub(crate) fn exact(vertex: VertexId, value: f64, provenance: Provenance) -> Self {
        let status = if value == 0.0 {
            Status::ExactZero
        } else if value == 1.0 {
            Status::ExactOne
        } else {
            Status::Converged { tol: 0.0 }
        };
        ProfileEntry {
            vertex,
            estimate: value,
            lower: value,
            upper: value,
            status,
            depth_used: 0,
            provenance,
            partial_sums: Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKind {
    Forward,
    Adjoint,
}

#[derive(Clone, Debug)]
pub struct AsymptoticProfile {
    pub kind: ProfileKind,
    pub entries: Vec<ProfileEntry>,
    pub options: AlphaOptions,
    index: HashMap<VertexId, usize>,
}

impl AsymptoticProfile {
    fn new(kind: ProfileKind, entries: Vec<ProfileEntry>, options: AlphaOptions) -> Self {
        let index = entries.iter().enumerate().map(|(i, e)| (e.vertex.clone(), i)).collect();
        AsymptoticProfile { kind, entries, options, index }
    }

    pub fn get(&self, v: &VertexId) -> Option<&ProfileEntry> {
        self.index.get(v).map(|&i| &self.entries[i])
    }

    pub fn estimate(&self, v: &VertexId) -> Option<f64> {
        self.get(v).map(|e| e.estimate)
    }

    /// One JSON object per entry.
    pub fn to_json_lines(&self) -> String {
        self.entries
            .iter()
            .map(|e| serde_json::to_string(e).expect("profile entries serialize"))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

fn require_contraction(op: &ShiftOperator, window: &TreeWindow) -> Result<()> {
    let norm = op.operator_norm(window)?;
    if norm.is_contraction() {
        Ok(())
    } else {
        Err(Error::NotAContraction { norm: norm.value })
    }
}

pub fn alpha_profile(op: &ShiftOperator, window: &TreeWindow, options: AlphaOptions) -> Result<AsymptoticProfile> {
    require_contraction(op, window)?;
    op.check_window(window)?;
    let mut engine = AlphaEngine::new(op, options);
    let entries = window.vertices().iter().map(|v| engine.alpha(v)).collect::<Result<Vec<_>>>()?;
    Ok(AsymptoticProfile::new(ProfileKind::Forward, entries, options))
}

#[derive(Clone, Debug, Serialize)]
pub struct StableSubtree {
    /// `V' ∩ W`.
    pub members: BTreeSet<VertexId>,
    pub root: Option<VertexId>,
    pub branching: BranchingIndex,
    pub zero_threshold: f64,
}

impl StableSubtree {
    pub fn contains(&self, v: &VertexId) -> bool {
        self.members.contains(v)
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// `V' = {u : α_u > zero_threshold}` on the window, with its structural
/// properties asserted: parent-closed, leafless, and containing the root of a
/// rooted tree whenever it is nonempty.
pub fn stable_subtree(
    op: &ShiftOperator,
    window: &TreeWindow,
    profile: &AsymptoticProfile,
    zero_threshold: f64,
) -> Result<StableSubtree> {
    let model = op.model();
    let members: BTreeSet<VertexId> =
        profile.entries.iter().filter(|e| e.estimate > zero_threshold).map(|e| e.vertex.clone()).collect();
    for u in &members {
        if let Some(p) = model.parent(u)? {
            if window.contains(&p) && !members.contains(&p) {
                return Err(Error::StructuralViolation { property: "parent-closed", vertex: u.clone() });
            }
        }
        let children = model.children(u)?;
        if children.is_empty() {
            return Err(Error::StructuralViolation { property: "leafless", vertex: u.clone() });
        }
        if children.iter().all(|c| window.contains(c)) && !children.iter().any(|c| members.contains(c)) {
            return Err(Error::StructuralViolation { property: "leafless", vertex: u.clone() });
        }
    }
    if let Some(r) = model.root() {
        if !members.is_empty() && window.contains(&r) && !members.contains(&r) {
            return Err(Error::StructuralViolation { property: "root", vertex: r });
        }
    }

    let branching = stable_branching(op, window, profile, &members, zero_threshold)?;
    let root = model.root().filter(|r| members.contains(r));
    Ok(StableSubtree { members, root, branching, zero_threshold })
}

fn stable_branching(
    op: &ShiftOperator,
    window: &TreeWindow,
    profile: &AsymptoticProfile,
    members: &BTreeSet<VertexId>,
    zero_threshold: f64,
) -> Result<BranchingIndex> {
    let exact = |n| BranchingIndex { value: Multiplicity::Count(n), exact: true };
    let family = match op.model() {
        TreeModel::Finite(_) => return Ok(exact(0)),
        TreeModel::Family(f) => f,
    };
    match family {
        Family::RootedPath | Family::BilateralPath => Ok(exact(0)),
        Family::Tilde(_) | Family::Comb(_) => {
            let mut engine = AlphaEngine::new(op, profile.options);
            let hub = engine.alpha(&VertexId::Int(0))?;
            if hub.estimate <= zero_threshold {
                return Ok(BranchingIndex { value: Multiplicity::Count(0), exact: hub.status.is_settled() });
            }
            let mut live = 0;
            let mut settled = hub.status.is_settled();
            for c in op.model().children(&VertexId::Int(0))? {
                let e = engine.alpha(&c)?;
                settled &= e.status.is_settled();
                live += usize::from(e.estimate > zero_threshold);
            }
            Ok(BranchingIndex { value: Multiplicity::Count(live.saturating_sub(1)), exact: settled })
        }
        Family::RootlessBinary => {
            let window_all = members.len() == window.len();
            let symbolic = profile.entries.iter().all(|e| e.status == Status::ExactOne);
            if window_all && symbolic {
                return Ok(BranchingIndex { value: Multiplicity::Infinite, exact: true });
            }
            let mut partial = 0;
            for u in members {
                let live = op.model().children(u)?.iter().filter(|c| members.contains(*c)).count();
                partial += live.saturating_sub(1);
            }
            let value =
                if partial > DEFAULT_BRANCHING_CAP { Multiplicity::Infinite } else { Multiplicity::Count(partial) };
            Ok(BranchingIndex { value, exact: false })
        }
    }
}

/// The vector `h_u` shared by every vertex of one level.
#[derive(Clone, Debug, Serialize)]
pub struct HVector {
    pub level: i64,
    pub vector: SparseVector,
    /// `‖h‖²` over the materialized generation.
    pub norm_sq: f64,
    /// The whole generation was materialized.
    pub complete: bool,
    /// Coefficients are exact infinite products rather than truncations.
    pub exact_products: bool,
}

#[derive(Clone, Debug)]
pub struct AdjointProfile {
    pub profile: AsymptoticProfile,
    pub h: BTreeMap<i64, HVector>,
    pub rooted: bool,
    pub depth: usize,
}

impl AdjointProfile {
    pub fn level_value(&self, level: i64) -> Option<f64> {
        self.h.get(&level).map(|h| h.norm_sq)
    }
}

/// `Σ_{j≥0} ln λ²_{Par^j v}` in closed form, when the rule admits one.
pub(crate) fn upward_log_sq(op: &ShiftOperator, v: &VertexId) -> Option<f64> {
    let rule = op.rule();
    let family = op.model().family()?;
    match (family, v) {
        (Family::BilateralPath, VertexId::Int(n)) => rule.ray_log_sq_sum(Ray::Unprimed, None, Some(*n)),
        (Family::Tilde(f) | Family::Comb(f), VertexId::Int(n)) if !f.rooted => {
            rule.ray_log_sq_sum(Ray::Unprimed, None, Some(*n))
        }
        (Family::Tilde(f) | Family::Comb(f), VertexId::Primed(k)) if !f.rooted => Some(
            rule.ray_log_sq_sum(Ray::Primed, Some(1), Some(*k as i64))?
                + rule.ray_log_sq_sum(Ray::Unprimed, None, Some(0))?,
        ),
        (Family::RootlessBinary, _) => match rule {
            WeightRule::Constant(c) if *c < 1.0 => Some(f64::NEG_INFINITY),
            WeightRule::ExpRay { .. } => match v {
                VertexId::Int(l) => rule.ray_log_sq_sum(Ray::Unprimed, None, Some(*l)),
                VertexId::Branch { spine, len, .. } => {
                    let first = op.lambda(&VertexId::Branch { spine: *spine, len: 1, path: 1 }).ok()?;
                    let spine_part = rule.ray_log_sq_sum(Ray::Unprimed, None, Some(*spine))?;
                    Some((*len as f64 - 1.0) * 0.5f64.ln() + 2.0 * first.ln() + spine_part)
                }
                _ => None,
            },
            _ => None,
        },
        _ => None,
    }
}

pub fn adjoint_profile(op: &ShiftOperator, window: &TreeWindow, depth: usize, tol: f64) -> Result<AdjointProfile> {
    require_contraction(op, window)?;
    op.check_window(window)?;
    let options = AlphaOptions { tol, max_depth: depth, ..AlphaOptions::default() };
    let model = op.model();
    if model.is_rooted() {
        let entries =
            window.vertices().iter().map(|v| ProfileEntry::exact(v.clone(), 0.0, Provenance::Certified)).collect();
        return Ok(AdjointProfile {
            profile: AsymptoticProfile::new(ProfileKind::Adjoint, entries, options),
            h: BTreeMap::new(),
            rooted: true,
            depth,
        });
    }

    let mut h = BTreeMap::new();
    let mut level_entries: BTreeMap<i64, ProfileEntry> = BTreeMap::new();
    for level in window.levels() {
        let (generation, complete) = match model.family().and_then(|f| f.level_set(level)) {
            Some(all) => (all, true),
            None => (window.at_level(level).to_vec(), false),
        };
        let mut vector = SparseVector::new();
        let mut exact_products = true;
        let mut all_zero = true;
        for v in &generation {
            let coeff = match upward_log_sq(op, v) {
                Some(l) => (0.5 * l).exp(),
                None => {
                    exact_products = false;
                    op.upward_product(v, depth + 1)?.unwrap_or(0.0)
                }
            };
            all_zero &= coeff == 0.0;
            vector.add(v.clone(), coeff);
        }
        let norm_sq = vector.norm_sq().min(1.0);
        let representative = window.at_level(level)[0].clone();
        let entry = if exact_products && all_zero {
            ProfileEntry::exact(representative, 0.0, Provenance::ClosedForm)
        } else if exact_products && complete {
            let mut e = ProfileEntry::exact(representative, norm_sq, Provenance::ClosedForm);
            if e.status == (Status::Converged { tol: 0.0 }) {
                e.status = Status::Converged { tol };
            }
            e
        } else {
            ProfileEntry {
                vertex: representative,
                estimate: norm_sq,
                lower: if exact_products { norm_sq } else { 0.0 },
                upper: if complete { norm_sq } else { 1.0 },
                status: Status::MaxDepthReached,
                depth_used: depth,
                provenance: if exact_products { Provenance::ClosedForm } else { Provenance::Numerical },
                partial_sums: Vec::new(),
            }
        };
        level_entries.insert(level, entry);
        h.insert(level, HVector { level, vector, norm_sq, complete, exact_products });
    }
    let entries = window
        .vertices()
        .iter()
        .enumerate()
        .map(|(i, v)| ProfileEntry { vertex: v.clone(), ..level_entries[&window.level_at(i)].clone() })
        .collect();
    Ok(AdjointProfile {
        profile: AsymptoticProfile::new(ProfileKind::Adjoint, entries, options),
        h,
        rooted: false,
        depth,
    })
}
