use std::collections::btree_map::{self, BTreeMap};

use serde::Serialize;

use crate::tree::VertexId;

/// Finitely supported vector in `ℓ²(V)`; zero coefficients are never stored.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
#[serde(transparent)]
pub struct SparseVector {
    coeffs: BTreeMap<VertexId, f64>,
}

impl SparseVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn basis(v: VertexId) -> Self {
        let mut x = Self::new();
        x.add(v, 1.0);
        x
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (VertexId, f64)>) -> Self {
        let mut x = Self::new();
        for (v, c) in pairs {
            x.add(v, c);
        }
        x
    }

    /// Adds `c` to the coefficient of `v`, dropping it if the sum is zero.
    pub fn add(&mut self, v: VertexId, c: f64) {
        if c == 0.0 {
            return;
        }
        match self.coeffs.entry(v) {
            btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            btree_map::Entry::Occupied(mut e) => {
                let s = *e.get() + c;
                if s == 0.0 {
                    e.remove();
                } else {
                    *e.get_mut() = s;
                }
            }
        }
    }

    pub fn get(&self, v: &VertexId) -> f64 {
        self.coeffs.get(v).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&VertexId, f64)> {
        self.coeffs.iter().map(|(v, c)| (v, *c))
    }

    pub fn support(&self) -> impl Iterator<Item = &VertexId> {
        self.coeffs.keys()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn norm_sq(&self) -> f64 {
        // fold from +0: an empty float `sum` is -0
        self.coeffs.values().fold(0.0, |acc, c| acc + c * c)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (small, large) = if self.len() <= other.len() { (self, other) } else { (other, self) };
        small.iter().fold(0.0, |acc, (v, c)| acc + c * large.get(v))
    }

    pub fn scaled(&self, s: f64) -> SparseVector {
        SparseVector::from_pairs(self.iter().map(|(v, c)| (v.clone(), s * c)))
    }

    /// `self + s·other`.
    pub fn axpy(&mut self, s: f64, other: &SparseVector) {
        for (v, c) in other.iter() {
            self.add(v.clone(), s * c);
        }
    }

    pub fn sub(&self, other: &SparseVector) -> SparseVector {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Largest absolute coefficient, 0 for the empty vector.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.values().fold(0.0, |m, c| m.max(c.abs()))
    }
}

impl FromIterator<(VertexId, f64)> for SparseVector {
    fn from_iter<I: IntoIterator<Item = (VertexId, f64)>>(iter: I) -> Self {
        SparseVector::from_pairs(iter)
    }
}
