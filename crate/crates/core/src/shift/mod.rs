//! The weighted shift `S e_u = Σ_{v∈Chi(u)} λ_v e_v` and its adjoint
//! `S* e_u = λ_u e_{Par(u)}` (0 at the root).
//!
//! Weights are real and strictly positive. Powers use the closed forms
//! `Sⁿ e_u = Σ_{v∈Chiⁿ(u)} (∏_{j<n} λ_{Par^j v}) e_v` and
//! `S*ⁿ e_u = (∏_{j<n} λ_{Par^j u}) e_{Parⁿ u}`.

mod sparse;
mod weights;

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::Serialize;

pub use sparse::SparseVector;
pub use weights::{Ray, WeightRule, WeightSpec};

use crate::error::{Error, Result};
use crate::tree::{chi_n, Family, TreeModel, TreeWindow, VertexId};

pub const DEFAULT_DENSE_CAP: usize = 4096;

/// Slack allowed above 1 when deciding contractivity.
pub const CONTRACTION_SLACK: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct ShiftOperator {
    model: TreeModel,
    rule: WeightRule,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormReport {
    pub value: f64,
    /// False when the supremum was only taken over the window.
    pub exact: bool,
}

impl NormReport {
    pub fn is_contraction(&self) -> bool {
        self.value <= 1.0 + CONTRACTION_SLACK
    }
}

/// Matrix of `P_W S P_W` in the window's level-major basis.
#[derive(Clone, Debug)]
pub struct DenseTruncation {
    pub matrix: DMatrix<f64>,
    pub basis: Vec<VertexId>,
}

impl DenseTruncation {
    pub fn vector(&self, x: &SparseVector) -> nalgebra::DVector<f64> {
        nalgebra::DVector::from_iterator(self.basis.len(), self.basis.iter().map(|v| x.get(v)))
    }

    pub fn sparse(&self, y: &nalgebra::DVector<f64>) -> SparseVector {
        self.basis.iter().cloned().zip(y.iter().copied()).collect()
    }
}

impl ShiftOperator {
    /// Finite trees are checked exhaustively; procedural trees lazily and
    /// through [`ShiftOperator::check_window`].
    pub fn new(model: TreeModel, rule: WeightRule) -> Result<Self> {
        rule.validate()?;
        if let WeightRule::Rays { .. } = rule {
            if model.fork().is_none() {
                return Err(Error::WeightRule("ray rules need a tilde or comb tree".into()));
            }
        }
        let op = ShiftOperator { model, rule };
        if let TreeModel::Finite(t) = &op.model {
            if let WeightRule::Map { values, default: None } = &op.rule {
                for v in values.keys() {
                    if !t.contains(v) {
                        return Err(Error::UnknownVertex(v.clone()));
                    }
                    if v == t.root() {
                        return Err(Error::WeightRule(format!("root {v} carries no weight")));
                    }
                }
            }
            for v in t.vertices() {
                op.weight(v)?;
            }
        }
        Ok(op)
    }

    pub fn model(&self) -> &TreeModel {
        &self.model
    }

    pub fn rule(&self) -> &WeightRule {
        &self.rule
    }

    /// `λ_v`, or `None` at the root.
    pub fn weight(&self, v: &VertexId) -> Result<Option<f64>> {
        if !self.model.contains(v) {
            return Err(Error::UnknownVertex(v.clone()));
        }
        if self.model.root().as_ref() == Some(v) {
            return Ok(None);
        }
        let x = self.rule.value(&self.model, v)?;
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::NonPositiveWeight { vertex: v.clone(), value: x });
        }
        Ok(Some(x))
    }

    /// Weight of a vertex known not to be the root.
    pub fn lambda(&self, v: &VertexId) -> Result<f64> {
        self.weight(v)?.ok_or_else(|| Error::WeightRule(format!("root {v} carries no weight")))
    }

    /// Every non-root window vertex has a positive weight.
    pub fn check_window(&self, window: &TreeWindow) -> Result<()> {
        for v in window.vertices() {
            self.weight(v)?;
        }
        Ok(())
    }

    pub fn apply(&self, x: &SparseVector) -> Result<SparseVector> {
        let mut out = SparseVector::new();
        for (u, c) in x.iter() {
            if !self.model.contains(u) {
                return Err(Error::UnknownVertex(u.clone()));
            }
            for v in self.model.children(u)? {
                let w = self.lambda(&v)?;
                out.add(v, w * c);
            }
        }
        Ok(out)
    }

    pub fn apply_adjoint(&self, x: &SparseVector) -> Result<SparseVector> {
        let mut out = SparseVector::new();
        for (u, c) in x.iter() {
            if let Some(w) = self.weight(u)? {
                let p = self.model.parent(u)?.expect("non-root vertex has a parent");
                out.add(p, w * c);
            }
        }
        Ok(out)
    }

    /// `∏_{j<n} λ_{Par^j v}`, or `None` when the walk reaches the root early.
    pub fn upward_product(&self, v: &VertexId, n: usize) -> Result<Option<f64>> {
        let mut prod = 1.0;
        let mut cur = v.clone();
        for _ in 0..n {
            match self.weight(&cur)? {
                Some(w) => prod *= w,
                None => return Ok(None),
            }
            cur = self.model.parent(&cur)?.expect("non-root vertex has a parent");
        }
        Ok(Some(prod))
    }

    pub fn power_closed(&self, u: &VertexId, n: usize) -> Result<SparseVector> {
        if !self.model.contains(u) {
            return Err(Error::UnknownVertex(u.clone()));
        }
        let mut out = SparseVector::new();
        for v in chi_n(&self.model, &BTreeSet::from([u.clone()]), n)? {
            let p = self.upward_product(&v, n)?.expect("descendant walk stays below u");
            out.add(v, p);
        }
        Ok(out)
    }

    pub fn adjoint_power_closed(&self, u: &VertexId, n: usize) -> Result<SparseVector> {
        if !self.model.contains(u) {
            return Err(Error::UnknownVertex(u.clone()));
        }
        match (self.upward_product(u, n)?, self.model.ancestor(u, n)?) {
            (Some(p), Some(a)) => Ok(SparseVector::from_pairs([(a, p)])),
            _ => Ok(SparseVector::new()),
        }
    }

    /// `sqrt(Σ_{v∈Chi(u)} λ_v²)`.
    pub fn column_norm(&self, u: &VertexId) -> Result<f64> {
        let mut s = 0.0;
        for v in self.model.children(u)? {
            let w = self.lambda(&v)?;
            s += w * w;
        }
        Ok(s.sqrt())
    }

    pub fn operator_norm(&self, window: &TreeWindow) -> Result<NormReport> {
        if let TreeModel::Finite(t) = &self.model {
            let mut sup: f64 = 0.0;
            for u in t.vertices() {
                sup = sup.max(self.column_norm(u)?);
            }
            return Ok(NormReport { value: sup, exact: true });
        }
        if let Some(value) = self.symbolic_norm() {
            return Ok(NormReport { value, exact: true });
        }
        let mut sup: f64 = 0.0;
        for u in window.vertices() {
            sup = sup.max(self.column_norm(u)?);
        }
        Ok(NormReport { value: sup, exact: false })
    }

    fn symbolic_norm(&self) -> Option<f64> {
        let family = self.model.family()?;
        let rule = &self.rule;
        let sup = |ray, lo, hi| rule.ray_sup(ray, lo, hi);
        match family {
            Family::RootedPath => sup(Ray::Unprimed, Some(1), None),
            Family::BilateralPath => sup(Ray::Unprimed, None, None),
            Family::RootlessBinary => match rule {
                WeightRule::Constant(c) => Some(std::f64::consts::SQRT_2 * c),
                WeightRule::ExpRay { .. } => Some(1.0),
                WeightRule::Geometric { .. } => Some(std::f64::consts::SQRT_2),
                _ => None,
            },
            Family::Tilde(f) | Family::Comb(f) => {
                let top = if f.rooted { Some(2) } else { None };
                let lam = |ray, l| rule.ray_value(ray, l);
                let fork = if f.spine_leaf == Some(0) {
                    lam(Ray::Primed, 1)?
                } else {
                    lam(Ray::Unprimed, 1)?.hypot(lam(Ray::Primed, 1)?)
                };
                let spine_above = if f.rooted { Some(0.0) } else { sup(Ray::Unprimed, top, Some(0)) };
                let spine_below = sup(Ray::Unprimed, Some(2), f.spine_leaf);
                let primed = sup(Ray::Primed, Some(2), f.primed_leaf.map(|k| k as i64));
                Some(fork.max(spine_above?).max(spine_below?).max(primed?))
            }
        }
    }

    pub fn dense_truncation(&self, window: &TreeWindow, cap: usize) -> Result<DenseTruncation> {
        let d = window.len();
        if d > cap {
            return Err(Error::WindowTooLarge { size: d, cap });
        }
        let mut m = DMatrix::zeros(d, d);
        for (j, u) in window.vertices().iter().enumerate() {
            for v in self.model.children(u)? {
                if let Some(i) = window.index_of(&v) {
                    m[(i, j)] = self.lambda(&v)?;
                }
            }
        }
        Ok(DenseTruncation { matrix: m, basis: window.vertices().to_vec() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::Fork;

    fn finite_ra_rb() -> ShiftOperator {
        let ids = |xs: &[&str]| xs.iter().map(|s| VertexId::from(*s)).collect::<Vec<_>>();
        let t = TreeModel::finite(
            &ids(&["r", "a", "b"]),
            &[(VertexId::from("r"), VertexId::from("a")), (VertexId::from("r"), VertexId::from("b"))],
            None,
        )
        .unwrap();
        let w = WeightRule::Map {
            values: [(VertexId::from("a"), 0.6), (VertexId::from("b"), 0.8)].into_iter().collect(),
            default: None,
        };
        ShiftOperator::new(t, w).unwrap()
    }

    #[test]
    fn apply_examples() {
        let s = finite_ra_rb();
        let y = s.apply(&SparseVector::basis(VertexId::from("r"))).unwrap();
        assert_eq!(y, SparseVector::from_pairs([(VertexId::from("a"), 0.6), (VertexId::from("b"), 0.8)]));
        assert!(s.apply(&SparseVector::basis(VertexId::from("a"))).unwrap().is_empty());
        assert!(s.apply(&SparseVector::basis(VertexId::from("zz"))).is_err());
        assert!(s.apply_adjoint(&SparseVector::basis(VertexId::from("r"))).unwrap().is_empty());
        assert_eq!(
            s.apply_adjoint(&SparseVector::basis(VertexId::from("a"))).unwrap(),
            SparseVector::from_pairs([(VertexId::from("r"), 0.6)])
        );
        let w = TreeWindow::build(s.model(), 0, 4, 8).unwrap();
        let n = s.operator_norm(&w).unwrap();
        assert!(n.exact && (n.value - 1.0).abs() < 1e-15);

        let bp = ShiftOperator::new(TreeModel::Family(Family::BilateralPath), WeightRule::Constant(0.5)).unwrap();
        let x = SparseVector::from_pairs([(VertexId::Int(0), 1.0), (VertexId::Int(1), 1.0)]);
        assert_eq!(bp.apply(&x).unwrap(), SparseVector::from_pairs([(VertexId::Int(1), 0.5), (VertexId::Int(2), 0.5)]));
        assert_eq!(
            bp.adjoint_power_closed(&VertexId::Int(0), 3).unwrap(),
            SparseVector::from_pairs([(VertexId::Int(-3), 0.125)])
        );
    }

    #[test]
    fn powers_and_norms_of_families() {
        let bin = ShiftOperator::new(
            TreeModel::Family(Family::RootlessBinary),
            WeightRule::Constant(std::f64::consts::FRAC_1_SQRT_2),
        )
        .unwrap();
        let p = bin.power_closed(&VertexId::Int(0), 2).unwrap();
        assert_eq!(p.len(), 4);
        for (_, c) in p.iter() {
            assert!((c - 0.5).abs() < 1e-15);
        }
        let w = TreeWindow::build(bin.model(), -2, 3, 8).unwrap();
        assert!((bin.operator_norm(&w).unwrap().value - 1.0).abs() < 1e-15);

        let rp = ShiftOperator::new(TreeModel::Family(Family::RootedPath), WeightRule::Constant(0.5)).unwrap();
        let w = TreeWindow::build(rp.model(), 0, 3, 8).unwrap();
        assert_eq!(rp.operator_norm(&w).unwrap(), NormReport { value: 0.5, exact: true });
        assert!(rp.adjoint_power_closed(&VertexId::Int(0), 1).unwrap().is_empty());

        let tilde = ShiftOperator::new(TreeModel::Family(Family::Tilde(Fork::tilde(false))), WeightRule::Constant(0.7))
            .unwrap();
        let w = TreeWindow::build(tilde.model(), -2, 3, 8).unwrap();
        let n = tilde.operator_norm(&w).unwrap();
        assert!(n.exact && (n.value - 0.7 * std::f64::consts::SQRT_2).abs() < 1e-15);

        let exp_ray =
            ShiftOperator::new(TreeModel::Family(Family::RootlessBinary), WeightRule::ExpRay { scale: 1.0, center: 0 })
                .unwrap();
        let w = TreeWindow::build(exp_ray.model(), -4, 4, 64).unwrap();
        for u in w.vertices() {
            assert!((exp_ray.column_norm(u).unwrap() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn dense_truncation_is_level_major_and_capped() {
        let s = finite_ra_rb();
        let w = TreeWindow::build(s.model(), 0, 2, 8).unwrap();
        let d = s.dense_truncation(&w, 8).unwrap();
        assert_eq!(d.basis, vec![VertexId::from("r"), VertexId::from("a"), VertexId::from("b")]);
        assert_eq!(d.matrix[(1, 0)], 0.6);
        assert_eq!(d.matrix[(2, 0)], 0.8);
        assert_eq!(s.dense_truncation(&w, 2).unwrap_err(), Error::WindowTooLarge { size: 3, cap: 2 });
    }

    #[test]
    fn rejects_bad_assignments() {
        let t = TreeModel::finite(
            &[VertexId::from("r"), VertexId::from("a")],
            &[(VertexId::from("r"), VertexId::from("a"))],
            None,
        )
        .unwrap();
        let missing = WeightRule::Map { values: Default::default(), default: None };
        assert_eq!(ShiftOperator::new(t.clone(), missing).unwrap_err(), Error::MissingWeight(VertexId::from("a")));
        let stray = WeightRule::Map { values: [(VertexId::from("q"), 0.5)].into_iter().collect(), default: Some(1.0) };
        assert!(ShiftOperator::new(t.clone(), stray).is_ok());
        let stray = WeightRule::Map {
            values: [(VertexId::from("a"), 0.5), (VertexId::from("q"), 0.5)].into_iter().collect(),
            default: None,
        };
        assert_eq!(ShiftOperator::new(t, stray).unwrap_err(), Error::UnknownVertex(VertexId::from("q")));
        assert!(ShiftOperator::new(TreeModel::Family(Family::BilateralPath), WeightRule::Constant(-1.0)).is_err());
    }
}
