//! Directed trees, finite or procedurally generated, and the finite windows
//! all numeric work is carried out on.
//!
//! A directed tree has unique parents, no circuits and is connected. Levels
//! are integers: `level(child) = level(parent) + 1`, with level 0 at the root
//! or at the family's base vertex `0`.

mod family;
mod finite;
mod spec;
mod vertex;
mod window;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Serialize, Serializer};

pub use family::{Family, Fork};
pub use finite::FiniteTree;
pub use vertex::{VertexId, MAX_BRANCH_DEPTH};
pub use window::TreeWindow;

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub enum TreeModel {
    Finite(FiniteTree),
    Family(Family),
}

/// A count that may be infinite: branching indices and shift multiplicities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Multiplicity {
    Count(usize),
    Infinite,
}

impl Multiplicity {
    pub fn from_option(n: Option<usize>) -> Self {
        n.map_or(Multiplicity::Infinite, Multiplicity::Count)
    }

    pub fn plus(self, k: usize) -> Self {
        match self {
            Multiplicity::Count(n) => Multiplicity::Count(n + k),
            Multiplicity::Infinite => Multiplicity::Infinite,
        }
    }
}

impl fmt::Display for Multiplicity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Multiplicity::Count(n) => write!(f, "{n}"),
            Multiplicity::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Multiplicity {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Multiplicity::Count(n) => s.serialize_u64(*n as u64),
            Multiplicity::Infinite => s.serialize_str("inf"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct BranchingIndex {
    pub value: Multiplicity,
    /// False when only a window-restricted partial sum was available.
    pub exact: bool,
}

impl TreeModel {
    pub fn finite(vertices: &[VertexId], edges: &[(VertexId, VertexId)], root: Option<&VertexId>) -> Result<Self> {
        FiniteTree::validate(vertices, edges, root).map(TreeModel::Finite)
    }

    pub fn family(&self) -> Option<&Family> {
        match self {
            TreeModel::Family(f) => Some(f),
            TreeModel::Finite(_) => None,
        }
    }

    pub fn fork(&self) -> Option<&Fork> {
        self.family().and_then(Family::fork)
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, TreeModel::Finite(_))
    }

    pub fn root(&self) -> Option<VertexId> {
        match self {
            TreeModel::Finite(t) => Some(t.root().clone()),
            TreeModel::Family(f) => f.root(),
        }
    }

    pub fn is_rooted(&self) -> bool {
        self.root().is_some()
    }

    /// The vertex at level 0.
    pub fn base_vertex(&self) -> VertexId {
        match self {
            TreeModel::Finite(t) => t.root().clone(),
            TreeModel::Family(_) => VertexId::Int(0),
        }
    }

    pub fn contains(&self, v: &VertexId) -> bool {
        match self {
            TreeModel::Finite(t) => t.contains(v),
            TreeModel::Family(f) => f.contains(v),
        }
    }

    pub fn children(&self, v: &VertexId) -> Result<Vec<VertexId>> {
        match self {
            TreeModel::Finite(t) => {
                if t.contains(v) {
                    Ok(t.children(v).to_vec())
                } else {
                    Err(Error::VertexNotFound(v.clone()))
                }
            }
            TreeModel::Family(f) => f.children(v),
        }
    }

    pub fn parent(&self, v: &VertexId) -> Result<Option<VertexId>> {
        match self {
            TreeModel::Finite(t) => {
                if t.contains(v) {
                    Ok(t.parent(v).cloned())
                } else {
                    Err(Error::VertexNotFound(v.clone()))
                }
            }
            TreeModel::Family(f) => f.parent(v),
        }
    }

    pub fn level(&self, v: &VertexId) -> Result<i64> {
        match self {
            TreeModel::Finite(t) => t.level(v).ok_or_else(|| Error::VertexNotFound(v.clone())),
            TreeModel::Family(f) => f.level(v),
        }
    }

    /// `Par^n(v)`, or `None` when the walk passes the root.
    pub fn ancestor(&self, v: &VertexId, n: usize) -> Result<Option<VertexId>> {
        let mut cur = v.clone();
        for _ in 0..n {
            match self.parent(&cur)? {
                Some(p) => cur = p,
                None => return Ok(None),
            }
        }
        Ok(Some(cur))
    }

    pub fn leaves(&self) -> BTreeSet<VertexId> {
        match self {
            TreeModel::Finite(t) => t.leaves(),
            TreeModel::Family(f) => f.leaves(),
        }
    }

    /// Symbolic branching index of the whole tree.
    pub fn branching_index(&self) -> Multiplicity {
        match self {
            TreeModel::Finite(t) => Multiplicity::Count(t.branching_index()),
            TreeModel::Family(f) => Multiplicity::from_option(f.branching_index()),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            TreeModel::Finite(t) => format!("finite tree, {} vertices, root {}", t.len(), t.root()),
            TreeModel::Family(f) => f.name().to_string(),
        }
    }
}

/// `Chi^n(W)`.
pub fn chi_n(model: &TreeModel, set: &BTreeSet<VertexId>, n: usize) -> Result<BTreeSet<VertexId>> {
    let mut cur = set.clone();
    for _ in 0..n {
        let mut next = BTreeSet::new();
        for v in &cur {
            next.extend(model.children(v)?);
        }
        cur = next;
    }
    Ok(cur)
}

/// `Gen_n(u) = ⋃_{j≤n} Chi^j(Par^j(u))`, skipping ancestors past the root.
pub fn gen_n(model: &TreeModel, u: &VertexId, n: usize) -> Result<BTreeSet<VertexId>> {
    let mut out = BTreeSet::from([u.clone()]);
    let mut anc = u.clone();
    for j in 1..=n {
        match model.parent(&anc)? {
            Some(p) => anc = p,
            None => break,
        }
        out.extend(chi_n(model, &BTreeSet::from([anc.clone()]), j)?);
    }
    Ok(out)
}

pub fn level_index(model: &TreeModel, u: &VertexId) -> Result<i64> {
    model.level(u)
}

pub fn leaves(model: &TreeModel) -> BTreeSet<VertexId> {
    model.leaves()
}

/// Every supported model determines `Br(T)` exactly, so the window only
/// matters for [`window_branching_sum`].
pub fn branching_index(model: &TreeModel, _window: &TreeWindow) -> BranchingIndex {
    BranchingIndex { value: model.branching_index(), exact: true }
}

/// `Σ (|Chi(u) ∩ W| − 1)` over window vertices with at least one child in the window.
pub fn window_branching_sum(model: &TreeModel, window: &TreeWindow) -> Result<usize> {
    let mut sum = 0;
    for v in window.vertices() {
        let inside = model.children(v)?.iter().filter(|c| window.contains(c)).count();
        sum += inside.saturating_sub(1);
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(xs: &[&str]) -> Vec<VertexId> {
        xs.iter().map(|s| VertexId::from(*s)).collect()
    }

    fn edges(xs: &[(&str, &str)]) -> Vec<(VertexId, VertexId)> {
        xs.iter().map(|(a, b)| (VertexId::from(*a), VertexId::from(*b))).collect()
    }

    #[test]
    fn validate_examples() {
        let t = TreeModel::finite(&ids(&["r", "a", "b"]), &edges(&[("r", "a"), ("r", "b")]), None).unwrap();
        assert_eq!(t.root(), Some(VertexId::from("r")));
        assert_eq!(t.branching_index(), Multiplicity::Count(1));

        let e = TreeModel::finite(&ids(&["a", "b"]), &edges(&[("a", "b"), ("b", "a")]), None).unwrap_err();
        assert!(matches!(e, Error::CircuitFound(ref c) if c.len() == 2));

        let e = TreeModel::finite(&ids(&["r", "a", "b"]), &edges(&[("r", "b"), ("a", "b")]), None).unwrap_err();
        assert_eq!(e, Error::MultipleParents(VertexId::from("b")));
    }

    #[test]
    fn validate_rejects_forests_and_wrong_roots() {
        let e = TreeModel::finite(&ids(&["r", "a", "x"]), &edges(&[("r", "a")]), None).unwrap_err();
        assert_eq!(e, Error::DisconnectedGraph { components: 2 });
        let e = TreeModel::finite(&ids(&["r", "a"]), &edges(&[("r", "a")]), Some(&VertexId::from("a"))).unwrap_err();
        assert!(matches!(e, Error::RootMismatch { .. }));
        let e = TreeModel::finite(&ids(&["r"]), &edges(&[("r", "q")]), None).unwrap_err();
        assert_eq!(e, Error::UnlistedVertex(VertexId::from("q")));
        let e = TreeModel::finite(&ids(&["a"]), &edges(&[("a", "a")]), None).unwrap_err();
        assert_eq!(e, Error::CircuitFound(ids(&["a"])));
        assert_eq!(TreeModel::finite(&[], &[], None).unwrap_err(), Error::EmptyTree);
    }

    #[test]
    fn circuit_is_reported_in_edge_order() {
        let e = TreeModel::finite(
            &ids(&["a", "b", "c", "r", "x"]),
            &edges(&[("a", "b"), ("b", "c"), ("c", "a"), ("r", "x")]),
            None,
        )
        .unwrap_err();
        let Error::CircuitFound(c) = e else { panic!("{e:?}") };
        let n = c.len();
        assert_eq!(n, 3);
        let succ = |v: &VertexId| match v.to_string().as_str() {
            "a" => "b",
            "b" => "c",
            _ => "a",
        };
        for i in 0..n {
            assert_eq!(c[(i + 1) % n].to_string(), succ(&c[i]));
        }
    }

    #[test]
    fn chi_and_gen_examples() {
        let bin = TreeModel::Family(Family::RootlessBinary);
        let u = VertexId::Int(0);
        assert_eq!(chi_n(&bin, &BTreeSet::from([u.clone()]), 3).unwrap().len(), 8);
        let w = BTreeSet::from([u.clone(), VertexId::Int(5)]);
        assert_eq!(chi_n(&bin, &w, 0).unwrap(), w);

        let sib = gen_n(&bin, &VertexId::Int(3), 1).unwrap();
        assert_eq!(sib, BTreeSet::from([VertexId::Int(3), VertexId::from("2:1")]));

        let path = TreeModel::finite(&ids(&["r", "a", "b"]), &edges(&[("r", "a"), ("a", "b")]), None).unwrap();
        assert!(chi_n(&path, &BTreeSet::from([VertexId::from("b")]), 1).unwrap().is_empty());

        let rp = TreeModel::Family(Family::RootedPath);
        assert_eq!(gen_n(&rp, &VertexId::Int(2), 5).unwrap(), BTreeSet::from([VertexId::Int(2)]));

        let tilde = TreeModel::Family(Family::Tilde(Fork::tilde(false)));
        assert_eq!(
            gen_n(&tilde, &VertexId::Int(3), 3).unwrap(),
            BTreeSet::from([VertexId::Int(3), VertexId::Primed(3)])
        );
    }

    #[test]
    fn levels_leaves_and_branching() {
        let tilde = TreeModel::Family(Family::Tilde(Fork::tilde(false)));
        assert_eq!(level_index(&tilde, &VertexId::Primed(4)).unwrap(), 4);
        assert_eq!(tilde.branching_index(), Multiplicity::Count(1));
        assert!(!tilde.is_rooted());
        let bp = TreeModel::Family(Family::BilateralPath);
        assert_eq!(level_index(&bp, &VertexId::Int(-5)).unwrap(), -5);
        assert_eq!(bp.branching_index(), Multiplicity::Count(0));
        let bin = TreeModel::Family(Family::RootlessBinary);
        assert_eq!(bin.branching_index(), Multiplicity::Infinite);
        assert!(leaves(&bin).is_empty());
        assert_eq!(level_index(&bin, &VertexId::from("-2:101")).unwrap(), 1);

        let comb = TreeModel::Family(Family::Comb(Fork::comb(Some(2), None).unwrap()));
        assert_eq!(leaves(&comb), BTreeSet::from([VertexId::Primed(2)]));
        assert!(comb.children(&VertexId::Primed(3)).is_err());

        let path = TreeModel::finite(&ids(&["r", "a", "b"]), &edges(&[("r", "a"), ("a", "b")]), None).unwrap();
        assert_eq!(leaves(&path), BTreeSet::from([VertexId::from("b")]));
        assert_eq!(level_index(&path, &VertexId::from("r")).unwrap(), 0);
        assert_eq!(level_index(&path, &VertexId::from("zz")), Err(Error::VertexNotFound(VertexId::from("zz"))));
    }

    #[test]
    fn comb_parameters_follow_canonical_labelling() {
        assert!(Fork::comb(None, Some(3)).is_err());
        assert!(Fork::comb(Some(4), Some(3)).is_err());
        assert!(Fork::comb(Some(0), None).is_err());
        let f = Fork::comb(Some(2), Some(5)).unwrap();
        assert_eq!(f.leaf_count(), 2);
    }
}
