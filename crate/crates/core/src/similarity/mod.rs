//! Explicit similarities and quasiaffinities for shifts on fork trees.
//!
//! With `a_k = ∏_{j≤k} 1/λ_j` and `b_k = ∏_{j≤k} 1/λ_{j'}` the vectors
//! `g_k = a_k e_k − b_k e_{k'}` satisfy `S* g_k = g_{k−1}`, `S* g_1 = 0`, and
//! are pairwise orthogonal. The operator `X` fixing every `e_n` and sending
//! `e_{k'}` to `g_k/‖g_k‖` intertwines `S* X = X T*`, where `T` keeps the
//! spine weights and gives the primed vertex `k'` the weight
//! `‖g_{k−1}‖/‖g_k‖`. Hence `Xᵀ S = T Xᵀ`.
//!
//! `X` is block diagonal over `span{e_k, e_{k'}}`. Writing
//! `r_k = ∏_{j≤k} λ_{j'}/λ_j` and `s_k = sqrt(1 + r_k²)`, each block is
//! `[[1, r_k/s_k], [0, −1/s_k]]` with inverse `[[1, r_k], [0, −s_k]]`, so the
//! inverse norm is at most `sqrt(2 + 2 r_k²)`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{check_cap, krylov_rank, numerical_rank};
use crate::shift::{Ray, ShiftOperator, SparseVector, CONTRACTION_SLACK};
use crate::tree::{Family, Fork, TreeWindow, VertexId};

pub const DEFAULT_RATIO_HORIZON: u64 = 256;
pub const DEFAULT_BLOWUP: f64 = 1e6;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GVector {
    pub k: u64,
    pub vector: SparseVector,
    pub norm: f64,
}

fn fork_of(op: &ShiftOperator) -> Result<Fork> {
    op.model()
        .fork()
        .copied()
        .ok_or_else(|| Error::ShapeMismatch(format!("needs a tilde or comb tree, got {}", op.model().describe())))
}

/// `(a_k, b_k)`: inverse weight products along the spine and the primed ray.
fn inverse_products(op: &ShiftOperator, k: u64) -> Result<(f64, f64)> {
    let mut a = 1.0;
    let mut b = 1.0;
    for j in 1..=k {
        a /= op.lambda(&VertexId::Int(j as i64))?;
        b /= op.lambda(&VertexId::Primed(j))?;
    }
    Ok((a, b))
}

pub fn gvector(op: &ShiftOperator, k: u64) -> Result<GVector> {
    fork_of(op)?;
    if k == 0 || !op.model().contains(&VertexId::Primed(k)) || !op.model().contains(&VertexId::Int(k as i64)) {
        return Err(Error::ShapeMismatch(format!("g_{k} needs both {k} and {k}' in the tree")));
    }
    let (a, b) = inverse_products(op, k)?;
    let vector = SparseVector::from_pairs([(VertexId::Int(k as i64), a), (VertexId::Primed(k), -b)]);
    Ok(GVector { k, norm: a.hypot(b), vector })
}

/// `ln r_k` for `k = 0..=n`, stopping early at a primed leaf.
fn log_ratios(op: &ShiftOperator, n: u64) -> Result<Vec<f64>> {
    let mut out = vec![0.0];
    let mut acc = 0.0;
    for j in 1..=n {
        let p = VertexId::Primed(j);
        if !op.model().contains(&p) {
            break;
        }
        acc += op.lambda(&p)?.ln() - op.lambda(&VertexId::Int(j as i64))?.ln();
        out.push(acc);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RatioCertificate {
    /// `sup_{k≥0} r_k`. `certified` when the supremum over the whole ray is
    /// covered, not only the partial maxima up to the horizon.
    Bounded { sup: f64, certified: bool },
    /// First `k` with `r_k` above the blow-up bound.
    UnboundedEvidence { k: u64, value: f64 },
}

impl RatioCertificate {
    pub fn is_bounded(&self) -> bool {
        matches!(self, RatioCertificate::Bounded { .. })
    }
}

/// Decides whether `r_k = ∏_{j≤k} λ_{j'}/λ_j` stays bounded.
///
/// Equal rays give exactly 1. Otherwise partial products are scanned up to
/// `horizon`. Past the horizon the ratio is frozen when the rays agree there;
/// failing that, with both ray tails bounded by 1,
/// `r_k ≤ r_H · exp(Σ_{j>H} |ln λ_j|)`, which the rules' closed-form log sums
/// certify.
pub fn ratio_bounded(op: &ShiftOperator, horizon: u64, blowup: f64) -> Result<RatioCertificate> {
    let fork = fork_of(op)?;
    let rule = op.rule();
    if fork.primed_end().is_none() && rule.rays_agree() {
        return Ok(RatioCertificate::Bounded { sup: 1.0, certified: true });
    }
    let logs = log_ratios(op, horizon)?;
    let mut sup: f64 = 1.0;
    for (k, l) in logs.iter().enumerate() {
        let r = l.exp();
        if r > blowup {
            return Ok(RatioCertificate::UnboundedEvidence { k: k as u64, value: r });
        }
        sup = sup.max(r);
    }
    let last = (logs.len() - 1) as u64;
    if fork.primed_end().is_some_and(|k0| k0 <= last) {
        return Ok(RatioCertificate::Bounded { sup, certified: true });
    }
    let h = horizon as i64;
    if rule.rays_agree_beyond(h) {
        // r_k = r_H for every k > H
        return Ok(RatioCertificate::Bounded { sup, certified: true });
    }
    let tails_contractive = rule.ray_sup(Ray::Unprimed, Some(h + 1), None).is_some_and(|s| s <= 1.0)
        && rule.ray_sup(Ray::Primed, Some(h + 1), None).is_some_and(|s| s <= 1.0);
    let spine_tail = rule.ray_log_sq_sum(Ray::Unprimed, Some(h + 1), None);
    match spine_tail {
        Some(ls) if tails_contractive && ls.is_finite() => {
            let tail_sup = (logs[last as usize] - 0.5 * ls).exp();
            Ok(RatioCertificate::Bounded { sup: sup.max(tail_sup), certified: true })
        }
        _ => Ok(RatioCertificate::Bounded { sup, certified: false }),
    }
}

/// One `2×2` block of `X` on `span{e_k, e_{k'}}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BlockCertificate {
    pub k: u64,
    pub ratio: f64,
    pub determinant: f64,
    pub inverse_norm_bound: f64,
}

impl BlockCertificate {
    fn new(k: u64, ratio: f64) -> Self {
        let s = ratio.hypot(1.0);
        BlockCertificate { k, ratio, determinant: -1.0 / s, inverse_norm_bound: (2.0 + 2.0 * ratio * ratio).sqrt() }
    }

    /// `[[1, r/s], [0, −1/s]]` in the basis `(e_k, e_{k'})`.
    pub fn matrix(&self) -> [[f64; 2]; 2] {
        let s = self.ratio.hypot(1.0);
        [[1.0, self.ratio / s], [0.0, -1.0 / s]]
    }

    pub fn inverse(&self) -> [[f64; 2]; 2] {
        [[1.0, self.ratio], [0.0, -self.ratio.hypot(1.0)]]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InvertibilityMode {
    Similar,
    QuasiaffineOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvertibilityReport {
    pub mode: InvertibilityMode,
    /// `sqrt(2 + 2 sup r_k²)`, present when the ratio bound is certified.
    pub uniform_inverse_bound: Option<f64>,
    /// `σ_max/σ_min` of `X` on the window; corroboration only.
    pub condition_estimate: f64,
    pub column_rank: usize,
    pub dimension: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TargetOperator {
    /// Spine shift `W` (backward when the spine ends in a leaf, bilateral
    /// otherwise) plus the nilpotent `N` on `1', …, k0'`.
    WPlusN { spine: &'static str, nilpotent_dimension: u64, nilpotent_weights: Vec<f64> },
    /// Spine weights unchanged and primed weights `w_{k'}`, `k ≥ 2`, listed
    /// over the window.
    WTilde { primed_weights: Vec<f64> },
}

#[derive(Clone, Debug, Serialize)]
pub struct SimilarityWitness {
    pub construction: &'static str,
    pub target: TargetOperator,
    pub blocks: Vec<BlockCertificate>,
    /// Window vertices with `X e_n = e_n` outside any block.
    pub fixed: Vec<VertexId>,
    pub residual: f64,
    pub invertibility: InvertibilityReport,
    pub ratio_certificate: RatioCertificate,
    #[serde(skip)]
    pub columns: BTreeMap<VertexId, SparseVector>,
    #[serde(skip)]
    basis: Vec<VertexId>,
    #[serde(skip)]
    op: ShiftOperator,
}

/// `X e_u`.
fn x_column(op: &ShiftOperator, u: &VertexId) -> Result<SparseVector> {
    match u {
        VertexId::Primed(k) => {
            let g = gvector(op, *k)?;
            Ok(g.vector.scaled(1.0 / g.norm))
        }
        _ => Ok(SparseVector::basis(u.clone())),
    }
}

fn apply_x(op: &ShiftOperator, x: &SparseVector) -> Result<SparseVector> {
    let mut out = SparseVector::new();
    for (u, c) in x.iter() {
        out.axpy(c, &x_column(op, u)?);
    }
    Ok(out)
}

/// `w_{k'} = ‖g_{k−1}‖/‖g_k‖` for `k ≥ 2`.
fn primed_target_weight(op: &ShiftOperator, k: u64) -> Result<f64> {
    Ok(gvector(op, k - 1)?.norm / gvector(op, k)?.norm)
}

/// `T* e_u`: spine weights unchanged, `T* e_{1'} = 0`.
fn target_adjoint(op: &ShiftOperator, u: &VertexId) -> Result<SparseVector> {
    match u {
        VertexId::Primed(1) => Ok(SparseVector::new()),
        VertexId::Primed(k) => Ok(SparseVector::from_pairs([(VertexId::Primed(k - 1), primed_target_weight(op, *k)?)])),
        _ => op.apply_adjoint(&SparseVector::basis(u.clone())),
    }
}

impl SimilarityWitness {
    pub fn dimension(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[VertexId] {
        &self.basis
    }

    /// `X` on the window basis.
    pub fn x_matrix(&self) -> DMatrix<f64> {
        let d = self.basis.len();
        let mut m = DMatrix::zeros(d, d);
        for (j, u) in self.basis.iter().enumerate() {
            for (v, c) in self.columns[u].iter() {
                let i = self.basis.iter().position(|w| w == v).expect("blocks lie inside the window");
                m[(i, j)] = c;
            }
        }
        m
    }

    /// The target `T` compressed to the window.
    pub fn target_matrix(&self) -> Result<DMatrix<f64>> {
        let d = self.basis.len();
        let mut m = DMatrix::zeros(d, d);
        for (i, v) in self.basis.iter().enumerate() {
            for (u, c) in target_adjoint(&self.op, v)?.iter() {
                if let Some(j) = self.basis.iter().position(|w| w == u) {
                    m[(i, j)] = c;
                }
            }
        }
        Ok(m)
    }

    /// The shift compressed to the window, in the witness basis.
    pub fn shift_matrix(&self) -> Result<DMatrix<f64>> {
        let d = self.basis.len();
        let mut m = DMatrix::zeros(d, d);
        for (j, u) in self.basis.iter().enumerate() {
            for (v, c) in self.op.apply(&SparseVector::basis(u.clone()))?.iter() {
                if let Some(i) = self.basis.iter().position(|w| w == v) {
                    m[(i, j)] = c;
                }
            }
        }
        Ok(m)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KrylovTransfer {
    pub shift_rank: usize,
    pub target_rank: usize,
    /// `max |Xᵀ S_W − T_W Xᵀ|` entrywise on the window.
    pub window_residual: f64,
}

/// Krylov ranks of `v` under the window shift and of `Xᵀ v` under the
/// window target. Windows made of whole levels commute with `X`, so the
/// compressed operators are intertwined exactly and the ranks agree.
pub fn krylov_transfer(w: &SimilarityWitness, v: &SparseVector, rank_tol: f64, cap: usize) -> Result<KrylovTransfer> {
    check_cap(w.dimension(), cap)?;
    let s = w.shift_matrix()?;
    let t = w.target_matrix()?;
    let xt = w.x_matrix().transpose();
    let window_residual = (&xt * &s - &t * &xt).amax();
    let dv = DVector::from_iterator(w.dimension(), w.basis.iter().map(|u| v.get(u)));
    let shift_rank = krylov_rank(&s, &dv, rank_tol, cap)?;
    let target_rank = krylov_rank(&t, &(&xt * &dv), rank_tol, cap)?;
    Ok(KrylovTransfer { shift_rank, target_rank, window_residual })
}

/// Window vertices must come in full levels so every block is inside.
fn fork_basis(op: &ShiftOperator, window: &TreeWindow) -> Result<Vec<VertexId>> {
    let mut basis = Vec::with_capacity(window.len());
    for v in window.vertices() {
        if let VertexId::Primed(k) = v {
            if *k >= 1 && !window.contains(&VertexId::Int(*k as i64)) {
                return Err(Error::ShapeMismatch(format!("window holds {v} without its block partner {k}")));
            }
        }
        if let VertexId::Int(k) = v {
            let p = VertexId::Primed(*k as u64);
            if *k >= 1 && op.model().contains(&p) && !window.contains(&p) {
                return Err(Error::ShapeMismatch(format!("window holds {v} without its block partner {p}")));
            }
        }
        basis.push(v.clone());
    }
    Ok(basis)
}

/// `max ‖S* X e_u − X T* e_u‖` over window vertices, computed exactly.
fn intertwining(op: &ShiftOperator, basis: &[VertexId]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for u in basis {
        let lhs = op.apply_adjoint(&x_column(op, u)?)?;
        let rhs = apply_x(op, &target_adjoint(op, u)?)?;
        worst = worst.max(lhs.sub(&rhs).norm());
    }
    Ok(worst)
}

fn assemble(
    op: &ShiftOperator,
    window: &TreeWindow,
    construction: &'static str,
    target: TargetOperator,
    ratio_certificate: RatioCertificate,
) -> Result<SimilarityWitness> {
    let basis = fork_basis(op, window)?;
    let mut columns = BTreeMap::new();
    let mut blocks = Vec::new();
    let mut fixed = Vec::new();
    let logs = log_ratios(op, window.max_level().max(0) as u64)?;
    for u in &basis {
        columns.insert(u.clone(), x_column(op, u)?);
        match u {
            VertexId::Primed(k) => blocks.push(BlockCertificate::new(*k, logs[*k as usize].exp())),
            VertexId::Int(n) if *n >= 1 && op.model().contains(&VertexId::Primed(*n as u64)) => {}
            _ => fixed.push(u.clone()),
        }
    }
    let residual = intertwining(op, &basis)?;
    let mut witness = SimilarityWitness {
        construction,
        target,
        blocks,
        fixed,
        residual,
        invertibility: InvertibilityReport {
            mode: InvertibilityMode::QuasiaffineOnly,
            uniform_inverse_bound: None,
            condition_estimate: f64::NAN,
            column_rank: 0,
            dimension: basis.len(),
        },
        ratio_certificate,
        columns,
        basis,
        op: op.clone(),
    };
    let x = witness.x_matrix();
    let sv = x.clone().singular_values();
    witness.invertibility.condition_estimate = sv.max() / sv.min();
    witness.invertibility.column_rank = numerical_rank(&x, crate::linalg::DEFAULT_RANK_TOL);
    if let RatioCertificate::Bounded { sup, certified: true } = ratio_certificate {
        witness.invertibility.uniform_inverse_bound = Some((2.0 + 2.0 * sup * sup).sqrt());
        witness.invertibility.mode = InvertibilityMode::Similar;
    }
    Ok(witness)
}

/// Similarity of a shift on a comb with a primed leaf `k0'` to `W ⊕ N`.
/// Only finitely many blocks exist, so `X` is always invertible and no
/// contractivity is needed.
pub fn build_leaf_similarity(op: &ShiftOperator, window: &TreeWindow) -> Result<SimilarityWitness> {
    let fork = match op.model().family() {
        Some(Family::Comb(f)) => *f,
        _ => {
            return Err(Error::ShapeMismatch(format!(
                "leaf similarity needs a comb tree, got {}",
                op.model().describe()
            )))
        }
    };
    let Some(k0) = fork.primed_end() else {
        return Err(Error::ShapeMismatch("leaf similarity needs a leaf on the primed ray".into()));
    };
    let nilpotent_weights = (2..=k0).map(|k| primed_target_weight(op, k)).collect::<Result<Vec<_>>>()?;
    let target = TargetOperator::WPlusN {
        spine: if fork.spine_end().is_some() { "backward" } else { "bilateral" },
        nilpotent_dimension: k0,
        nilpotent_weights,
    };
    let ratio = ratio_bounded(op, k0, f64::INFINITY)?;
    assemble(op, window, "leaf-similarity", target, ratio)
}

/// Quasiaffinity from a shift on the leafless fork tree to `W̃`, upgraded to
/// a similarity when the ratio products are certified bounded.
///
/// Boundedness of `W̃` needs `‖g_{k−1}‖ ≤ ‖g_k‖`, which holds when every ray
/// weight is at most 1. Larger weights are rejected; dividing all weights by
/// the reported value restores the hypothesis.
pub fn build_tilde_quasiaffinity(
    op: &ShiftOperator,
    window: &TreeWindow,
    horizon: u64,
    blowup: f64,
) -> Result<SimilarityWitness> {
    if !matches!(op.model().family(), Some(Family::Tilde(_))) {
        return Err(Error::ShapeMismatch(format!(
            "tilde quasiaffinity needs the tilde tree, got {}",
            op.model().describe()
        )));
    }
    let rule = op.rule();
    let lowest = if op.model().is_rooted() { Some(1) } else { None };
    let sup = match (rule.ray_sup(Ray::Unprimed, lowest, None), rule.ray_sup(Ray::Primed, Some(1), None)) {
        (Some(a), Some(b)) => a.max(b),
        _ => return Err(Error::WeightRule("ray weights need a closed-form supremum".into())),
    };
    if sup > 1.0 + CONTRACTION_SLACK {
        return Err(Error::NotAContraction { norm: sup });
    }
    let primed_weights = window
        .vertices()
        .iter()
        .filter_map(|v| match v {
            VertexId::Primed(k) if *k >= 2 => Some(primed_target_weight(op, *k)),
            _ => None,
        })
        .collect::<Result<Vec<_>>>()?;
    let ratio = ratio_bounded(op, horizon, blowup)?;
    assemble(op, window, "tilde-quasiaffinity", TargetOperator::WTilde { primed_weights }, ratio)
}

/// `x = e + g` with `e ∈ span{e_n}` and `g ∈ span{g_k}`.
#[derive(Clone, Debug, Serialize)]
pub struct Decomposition {
    pub e_part: SparseVector,
    pub g_part: SparseVector,
    /// Coefficient of `g_k/‖g_k‖`.
    pub mu: BTreeMap<u64, f64>,
    /// Coefficient of `e_n`.
    pub nu: BTreeMap<i64, f64>,
    pub residual: f64,
    /// `Σ μ_k²/‖g_k‖²`.
    pub mu_weighted_sum: f64,
    /// `Σ ξ_{k'}²`, which bounds the previous sum when primed weights are at most 1.
    pub primed_mass: f64,
    pub nu_sq_sum: f64,
}

pub fn direct_sum_decomposition(op: &ShiftOperator, x: &SparseVector) -> Result<Decomposition> {
    fork_of(op)?;
    let mut mu = BTreeMap::new();
    let mut nu = BTreeMap::new();
    let mut g_part = SparseVector::new();
    let mut mu_weighted_sum = 0.0;
    let mut primed_mass = 0.0;
    for (v, c) in x.iter() {
        match v {
            VertexId::Int(n) => *nu.entry(*n).or_insert(0.0) += c,
            VertexId::Primed(k) => {
                let g = gvector(op, *k)?;
                let (a, b) = inverse_products(op, *k)?;
                let m = -c * g.norm / b;
                mu.insert(*k, m);
                *nu.entry(*k as i64).or_insert(0.0) += (a / b) * c;
                g_part.axpy(m / g.norm, &g.vector);
                mu_weighted_sum += (m / g.norm).powi(2);
                primed_mass += c * c;
            }
            other => return Err(Error::ShapeMismatch(format!("{other} is not a fork-tree vertex"))),
        }
    }
    let e_part: SparseVector = nu.iter().map(|(n, c)| (VertexId::Int(*n), *c)).collect();
    let mut back = e_part.clone();
    back.axpy(1.0, &g_part);
    let residual = back.sub(x).norm();
    let nu_sq_sum = nu.values().fold(0.0, |acc, c| acc + c * c);
    Ok(Decomposition { e_part, g_part, mu, nu, residual, mu_weighted_sum, primed_mass, nu_sq_sum })
}

#[derive(Clone, Debug, Serialize)]
pub struct UnboundedWitness {
    pub vector: SparseVector,
    /// `k_m`, the first index past `k_{m−1}` with `r_k > m`.
    pub indices: Vec<u64>,
    pub norm_sq: f64,
    pub nu_sq_sum: f64,
}

/// `x = Σ_m m^{−3/2} e_{k_m'}` with `r_{k_m} > m`: `‖x‖² ≤ ζ(3)` while
/// `Σ ν_k² > Σ 1/m` grows without bound, so `x ∉ E + G`.
pub fn unbounded_witness(op: &ShiftOperator, horizon: u64) -> Result<UnboundedWitness> {
    let logs = log_ratios(op, horizon)?;
    let mut indices = Vec::new();
    let mut vector = SparseVector::new();
    let mut m = 1u64;
    for (k, l) in logs.iter().enumerate().skip(1) {
        if l.exp() > m as f64 {
            indices.push(k as u64);
            vector.add(VertexId::Primed(k as u64), (m as f64).powf(-1.5));
            m += 1;
        }
    }
    let d = direct_sum_decomposition(op, &vector)?;
    Ok(UnboundedWitness { norm_sq: vector.norm_sq(), nu_sq_sum: d.nu_sq_sum, vector, indices })
}

#[cfg(test)]
mod tests;
