//! Isometric asymptotes of a contractive shift and of its adjoint.
//!
//! `U = S_β` lives on the stable subtree with `β_v = λ_v sqrt(α_v / α_{Par v})`
//! and satisfies `A^{1/2} S = U A^{1/2}`. The adjoint asymptote `U_*` acts on
//! the level vectors `h_u` by `U_* h_u = sqrt(a_u / a_{Par u}) h_{Par u}`.

use std::collections::BTreeMap;

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::asymptotics::{AdjointProfile, AlphaEngine, AsymptoticProfile, StableSubtree, DEFAULT_ZERO_THRESHOLD};
use crate::error::{Error, Result};
use crate::shift::{Ray, ShiftOperator, SparseVector, WeightRule};
use crate::tree::{Family, Multiplicity, TreeModel, VertexId};

/// Number of upward factors beyond the first in the truncated cnu product.
pub const DEFAULT_CNU_DEPTH: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AsymptoteKind {
    /// Unilateral shift of multiplicity `Br(T') + 1` (rooted trees).
    Unilateral,
    CnuUnilateral,
    /// Bilateral shift plus a unilateral shift of multiplicity `Br(T')`.
    BilateralPlusUnilateral,
}

/// Truncated `Σ_{v ∈ Gen_{T'}(u)} ∏ β²` per window level, every product
/// running up to the common level `top − depth − 1` (or the root).
///
/// Each truncated product over-estimates its infinite product, and the sum
/// runs over the window part of the generation only. With a common cutoff,
/// `Σ_{Chi(u')} β² = 1` makes every level give the same sum.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CnuTest {
    pub value: f64,
    pub level: i64,
    pub depth: usize,
    pub level_values: BTreeMap<i64, f64>,
    /// Deepest level down to which no stable child was cut by the breadth cap.
    pub complete_through: i64,
    /// `max - min` over the complete levels of `level_values`.
    pub level_spread: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AsymptoteDescriptor {
    /// `None` where an α estimate on either end is unsettled.
    pub beta: BTreeMap<VertexId, Option<f64>>,
    pub kind: AsymptoteKind,
    pub multiplicity: Multiplicity,
    pub multiplicity_exact: bool,
    pub cnu: CnuTest,
    /// `max |Σ_{v∈Chi_{T'}(u)} β_v² − 1|` over interior members of `T'`.
    pub isometry_residual: f64,
}

struct BetaMap<'a>(&'a BTreeMap<VertexId, Option<f64>>);

impl Serialize for BetaMap<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.0.len()))?;
        for (v, b) in self.0 {
            m.serialize_entry(&v.to_string(), b)?;
        }
        m.end()
    }
}

impl Serialize for AsymptoteDescriptor {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(7))?;
        m.serialize_entry("beta", &BetaMap(&self.beta))?;
        m.serialize_entry("class", &self.kind)?;
        m.serialize_entry("multiplicity", &self.multiplicity)?;
        m.serialize_entry("multiplicity_exact", &self.multiplicity_exact)?;
        m.serialize_entry("cnu_test", &self.cnu.value)?;
        m.serialize_entry("cnu_levels", &self.cnu.level_values)?;
        m.serialize_entry("isometry_residual", &self.isometry_residual)?;
        m.end()
    }
}

impl AsymptoteDescriptor {
    pub fn beta(&self, v: &VertexId) -> Option<f64> {
        self.beta.get(v).copied().flatten()
    }
}

/// Children of `u` that the profile covers, or `None` if one is missing.
fn covered_children(op: &ShiftOperator, profile: &AsymptoticProfile, u: &VertexId) -> Result<Option<Vec<VertexId>>> {
    let children = op.model().children(u)?;
    Ok(children.iter().all(|c| profile.get(c).is_some()).then_some(children))
}

pub fn isometric_asymptote(
    op: &ShiftOperator,
    profile: &AsymptoticProfile,
    stable: &StableSubtree,
) -> Result<AsymptoteDescriptor> {
    isometric_asymptote_with_depth(op, profile, stable, DEFAULT_CNU_DEPTH)
}

pub fn isometric_asymptote_with_depth(
    op: &ShiftOperator,
    profile: &AsymptoticProfile,
    stable: &StableSubtree,
    cnu_depth: usize,
) -> Result<AsymptoteDescriptor> {
    if stable.is_empty() {
        return Err(Error::StableSubtreeEmpty);
    }
    let model = op.model();
    let mut beta = BTreeMap::new();
    for v in &stable.members {
        let Some(p) = model.parent(v)? else { continue };
        if !stable.contains(&p) {
            continue;
        }
        let (ev, ep) = (profile.get(v).expect("member is profiled"), profile.get(&p).expect("member is profiled"));
        let b = (ev.status.is_settled() && ep.status.is_settled())
            .then(|| op.lambda(v).map(|l| l * (ev.estimate / ep.estimate).sqrt()))
            .transpose()?;
        beta.insert(v.clone(), b);
    }

    let mut isometry_residual: f64 = 0.0;
    for u in &stable.members {
        let Some(children) = covered_children(op, profile, u)? else { continue };
        let mut sum = 0.0;
        let mut available = true;
        for c in children.iter().filter(|c| stable.contains(c)) {
            match beta.get(c).copied().flatten() {
                Some(b) => sum += b * b,
                None => available = false,
            }
        }
        if available {
            isometry_residual = isometry_residual.max((sum - 1.0).abs());
        }
    }

    let cnu = cnu_test(op, profile, stable, cnu_depth)?;
    let (kind, multiplicity) = if model.is_rooted() {
        (AsymptoteKind::Unilateral, stable.branching.value.plus(1))
    } else if cnu.value <= stable.zero_threshold {
        (AsymptoteKind::CnuUnilateral, stable.branching.value)
    } else {
        (AsymptoteKind::BilateralPlusUnilateral, stable.branching.value)
    };
    Ok(AsymptoteDescriptor {
        beta,
        kind,
        multiplicity,
        multiplicity_exact: stable.branching.exact,
        cnu,
        isometry_residual,
    })
}

/// Evaluates the truncated cnu sum on every window level of `T'`; the
/// reported value is the one at the top level.
pub fn cnu_test(
    op: &ShiftOperator,
    profile: &AsymptoticProfile,
    stable: &StableSubtree,
    depth: usize,
) -> Result<CnuTest> {
    if stable.is_empty() {
        return Err(Error::StableSubtreeEmpty);
    }
    let model = op.model();
    let mut engine = AlphaEngine::new(op, profile.options);
    let mut top_level = i64::MAX;
    for v in &stable.members {
        top_level = top_level.min(model.level(v)?);
    }
    let mut cutoff = top_level - depth as i64 - 1;
    if let Some(r) = model.root() {
        cutoff = cutoff.max(model.level(&r)?);
    }
    let mut level_values: BTreeMap<i64, f64> = BTreeMap::new();
    for v in &stable.members {
        let level = model.level(v)?;
        let steps = (level - cutoff) as usize;
        let prod = op.upward_product(v, steps)?.expect("walk stops at the root");
        let top = model.ancestor(v, steps)?.expect("walk stops at the root");
        let alpha_v = engine.alpha(v)?.estimate;
        let alpha_top = engine.alpha(&top)?.estimate;
        // ∏ β² telescopes to ∏ λ² · α_v / α_top
        *level_values.entry(level).or_default() += prod * prod * alpha_v / alpha_top;
    }
    let (&level, &value) = level_values.iter().next().expect("stable subtree is nonempty");
    let mut complete_through = level;
    'levels: for &next in level_values.keys().skip(1) {
        for u in stable.members.iter().filter(|u| model.level(u).ok() == Some(next - 1)) {
            for c in model.children(u)? {
                if !stable.contains(&c) && engine.alpha(&c)?.estimate > stable.zero_threshold {
                    break 'levels;
                }
            }
        }
        complete_through = next;
    }
    let complete = level_values.range(..=complete_through).map(|(_, v)| *v);
    let max = complete.clone().fold(f64::MIN, f64::max);
    let min = complete.fold(f64::MAX, f64::min);
    Ok(CnuTest { value, level, depth, level_values, complete_through, level_spread: max - min })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct IntertwiningReport {
    pub max_residual: f64,
    pub checked: usize,
    /// Interior vertices left out for lack of a settled β.
    pub skipped: usize,
}

impl IntertwiningReport {
    fn record(&mut self, r: Option<f64>) {
        match r {
            Some(r) => {
                self.max_residual = self.max_residual.max(r);
                self.checked += 1;
            }
            None => self.skipped += 1,
        }
    }
}

/// `max ‖A^{1/2} S e_u − U A^{1/2} e_u‖` over window vertices whose children
/// are all profiled.
pub fn intertwining_residual(
    op: &ShiftOperator,
    descriptor: &AsymptoteDescriptor,
    profile: &AsymptoticProfile,
) -> Result<IntertwiningReport> {
    let mut report = IntertwiningReport::default();
    for e in &profile.entries {
        let u = &e.vertex;
        if covered_children(op, profile, u)?.is_none() {
            continue;
        }
        let image = op.apply(&SparseVector::basis(u.clone()))?;
        let lhs: SparseVector =
            image.iter().map(|(c, x)| (c.clone(), x * profile.estimate(c).expect("covered").sqrt())).collect();
        let sqrt_alpha = e.estimate.sqrt();
        let mut rhs = SparseVector::new();
        let mut available = true;
        // children carry β exactly when `u` is in the parent-closed `T'`
        for c in image.support() {
            match descriptor.beta.get(c) {
                Some(Some(b)) => rhs.add(c.clone(), sqrt_alpha * b),
                Some(None) => available = false,
                None => {}
            }
        }
        report.record(available.then(|| lhs.sub(&rhs).norm()));
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdjointShiftKind {
    SimpleUnilateral,
    SimpleBilateral,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AdjointAsymptoteDescriptor {
    pub kind: AdjointShiftKind,
    /// Level `l` maps to `sqrt(a_l / a_{l-1})`.
    pub coefficients: BTreeMap<i64, f64>,
    pub last_level: Option<i64>,
}

impl AdjointAsymptoteDescriptor {
    /// Product of the coefficients from level `from` down to `from - steps + 1`.
    pub fn telescoped(&self, from: i64, steps: usize) -> Option<f64> {
        (0..steps as i64).map(|k| self.coefficients.get(&(from - k)).copied()).product()
    }
}

/// Deepest level of a tree in which every downward path ends.
pub fn last_level(model: &TreeModel) -> Option<i64> {
    match model.family()? {
        Family::Tilde(f) | Family::Comb(f) => {
            let (j, k) = (f.spine_end()?, f.primed_end()?);
            Some(j.max(k as i64))
        }
        _ => None,
    }
}

pub fn adjoint_isometric_asymptote(op: &ShiftOperator, adjoint: &AdjointProfile) -> Result<AdjointAsymptoteDescriptor> {
    if adjoint.rooted || adjoint.h.values().all(|h| h.norm_sq <= DEFAULT_ZERO_THRESHOLD) {
        return Err(Error::AdjointStable);
    }
    let coefficients = adjoint
        .h
        .iter()
        .filter_map(|(l, h)| adjoint.h.get(&(l - 1)).map(|p| (*l, (h.norm_sq / p.norm_sq).sqrt())))
        .collect();
    let last_level = last_level(op.model());
    let kind =
        if last_level.is_some() { AdjointShiftKind::SimpleUnilateral } else { AdjointShiftKind::SimpleBilateral };
    Ok(AdjointAsymptoteDescriptor { kind, coefficients, last_level })
}

/// `max ‖A_*^{1/2} S* h_l − U_* A_*^{1/2} h_l‖` over levels whose generation
/// and parent generation are fully materialized.
pub fn adjoint_intertwining_residual(
    op: &ShiftOperator,
    descriptor: &AdjointAsymptoteDescriptor,
    adjoint: &AdjointProfile,
) -> Result<IntertwiningReport> {
    let mut report = IntertwiningReport::default();
    for (l, coeff) in &descriptor.coefficients {
        let (h, hp) = (&adjoint.h[l], &adjoint.h[&(l - 1)]);
        if !(h.complete && hp.complete) {
            report.record(None);
            continue;
        }
        let image = op.apply_adjoint(&h.vector)?;
        // A_*^{1/2} is sqrt(a) times the orthogonal projection onto h on each level
        let lhs = hp.vector.scaled(image.dot(&hp.vector) / hp.norm_sq * hp.norm_sq.sqrt());
        let rhs = hp.vector.scaled(coeff * h.norm_sq.sqrt());
        report.record(Some(lhs.sub(&rhs).norm()));
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Yes,
    No,
    Undetermined,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimilarityDecision {
    pub decision: Decision,
    /// Global infimum of the relevant limit, when a closed form gives it.
    pub infimum: Option<f64>,
    pub reason: String,
}

impl SimilarityDecision {
    fn new(decision: Decision, infimum: Option<f64>, reason: impl Into<String>) -> Self {
        SimilarityDecision { decision, infimum, reason: reason.into() }
    }
}

/// `inf_u α_u` over the whole tree for families where it is attained on a
/// few vertices or as a closed-form limit up the spine.
fn alpha_global_inf(op: &ShiftOperator, engine: &mut AlphaEngine) -> Result<Option<f64>> {
    let rule = op.rule();
    let mut alpha = |v: VertexId| -> Result<Option<f64>> {
        let e = engine.alpha(&v)?;
        Ok(e.status.is_settled().then_some(e.estimate))
    };
    let min = |xs: Vec<Option<f64>>| xs.into_iter().try_fold(f64::INFINITY, |m, x| x.map(|x| m.min(x)));
    Ok(match op.model() {
        TreeModel::Finite(_) => Some(0.0),
        TreeModel::Family(f) => match f {
            // α only grows along a single-child chain
            Family::RootedPath => alpha(VertexId::Int(0))?,
            Family::BilateralPath => rule.ray_log_sq_sum(Ray::Unprimed, None, None).map(f64::exp),
            Family::RootlessBinary => match rule {
                WeightRule::Constant(c) if (2.0 * c * c - 1.0).abs() <= 1e-12 => Some(1.0),
                WeightRule::ExpRay { .. } => Some(1.0),
                _ => None,
            },
            Family::Tilde(fork) | Family::Comb(fork) => {
                if fork.leaf_count() > 0 {
                    Some(0.0)
                } else {
                    let rays = vec![alpha(VertexId::Int(1))?, alpha(VertexId::Primed(1))?];
                    let top = if fork.rooted {
                        alpha(VertexId::Int(0))?
                    } else {
                        match (rule.ray_log_sq_sum(Ray::Unprimed, None, Some(0)), alpha(VertexId::Int(0))?) {
                            (Some(l), Some(a0)) => Some(l.exp() * a0),
                            _ => None,
                        }
                    };
                    min(rays.into_iter().chain([top]).collect())
                }
            }
        },
    })
}

/// Similar to an isometry iff `inf_u α_u > 0`.
pub fn similar_to_isometry(
    op: &ShiftOperator,
    profile: &AsymptoticProfile,
    zero_threshold: f64,
) -> Result<SimilarityDecision> {
    if let Some(e) = profile.entries.iter().find(|e| e.upper == 0.0) {
        return Ok(SimilarityDecision::new(Decision::No, Some(0.0), format!("α vanishes at {}", e.vertex)));
    }
    let mut engine = AlphaEngine::new(op, profile.options);
    let inf = alpha_global_inf(op, &mut engine)?;
    let window_inf =
        profile.entries.iter().filter(|e| e.status.is_settled()).map(|e| e.estimate).fold(f64::INFINITY, f64::min);
    Ok(match inf {
        Some(0.0) => SimilarityDecision::new(Decision::No, inf, "closed-form infimum of α is 0"),
        Some(x) if x > zero_threshold && window_inf > zero_threshold => {
            SimilarityDecision::new(Decision::Yes, inf, format!("inf α = {x:e}"))
        }
        Some(x) => SimilarityDecision::new(
            Decision::Undetermined,
            inf,
            format!("inf α = {x:e} is not above the threshold {zero_threshold:e}"),
        ),
        None => SimilarityDecision::new(Decision::Undetermined, None, "no closed-form infimum for this family"),
    })
}

/// Similar to a co-isometry iff the tree is a bilateral path with
/// `∏ λ_j > 0`; every other tree shape fails the structural gate.
pub fn similar_to_coisometry(op: &ShiftOperator, adjoint: &AdjointProfile) -> Result<SimilarityDecision> {
    let model = op.model();
    if model.is_rooted() {
        return Ok(SimilarityDecision::new(Decision::No, Some(0.0), "rooted tree: the adjoint has a kernel"));
    }
    if model.family() != Some(&Family::BilateralPath) {
        return Ok(SimilarityDecision::new(Decision::No, None, "some vertex has more than one child"));
    }
    if let Some(l) = op.rule().ray_log_sq_sum(Ray::Unprimed, None, None) {
        let p = l.exp();
        return Ok(if p > 0.0 {
            SimilarityDecision::new(Decision::Yes, Some(p), format!("∏ λ² = {p:e}"))
        } else {
            SimilarityDecision::new(Decision::No, Some(0.0), "∏ λ² = 0")
        });
    }
    if adjoint.profile.entries.iter().all(|e| e.upper == 0.0) {
        return Ok(SimilarityDecision::new(Decision::No, Some(0.0), "a_u = 0 on the window"));
    }
    Ok(SimilarityDecision::new(Decision::Undetermined, None, "no closed form for ∏ λ²"))
}

#[cfg(test)]
mod tests;
