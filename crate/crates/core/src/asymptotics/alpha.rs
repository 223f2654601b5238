use std::collections::HashMap;

use serde::Serialize;

use super::{ProfileEntry, Provenance, Status, DEFAULT_MAX_DEPTH, DEFAULT_TOL};
use crate::error::Result;
use crate::shift::{Ray, ShiftOperator, WeightRule};
use crate::tree::{Family, TreeModel, VertexId};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AlphaOptions {
    pub tol: f64,
    pub max_depth: usize,
    /// Use family closed forms before falling back to partial sums.
    pub closed_forms: bool,
}

impl Default for AlphaOptions {
    fn default() -> Self {
        AlphaOptions { tol: DEFAULT_TOL, max_depth: DEFAULT_MAX_DEPTH, closed_forms: true }
    }
}

/// Vertices whose subtrees carry identical weights share partial sums.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum SubtreeClass {
    Vertex(VertexId),
    Level(i64),
    Uniform,
}

/// Evaluates `α_u` on demand, for vertices inside or outside any window.
pub struct AlphaEngine<'a> {
    op: &'a ShiftOperator,
    options: AlphaOptions,
    sums: HashMap<(SubtreeClass, usize), f64>,
    cache: HashMap<VertexId, ProfileEntry>,
}

impl<'a> AlphaEngine<'a> {
    pub fn new(op: &'a ShiftOperator, options: AlphaOptions) -> Self {
        AlphaEngine { op, options, sums: HashMap::new(), cache: HashMap::new() }
    }

    pub fn options(&self) -> &AlphaOptions {
        &self.options
    }

    pub fn alpha(&mut self, u: &VertexId) -> Result<ProfileEntry> {
        if let Some(e) = self.cache.get(u) {
            return Ok(e.clone());
        }
        let closed = if self.options.closed_forms { self.closed(u)? } else { None };
        let entry = match closed {
            Some(e) => e,
            None => self.numeric(u)?,
        };
        self.cache.insert(u.clone(), entry.clone());
        Ok(entry)
    }

    fn numeric(&mut self, u: &VertexId) -> Result<ProfileEntry> {
        let tol = self.options.tol;
        let mut sums = vec![1.0];
        let mut quiet = 0;
        for n in 1..=self.options.max_depth {
            let s = self.partial_sum(u, n)?;
            let prev = sums[n - 1];
            sums.push(s);
            if s == 0.0 {
                let provenance =
                    if self.op.model().is_finite() { Provenance::Certified } else { Provenance::Numerical };
                return Ok(ProfileEntry {
                    vertex: u.clone(),
                    estimate: 0.0,
                    lower: 0.0,
                    upper: 0.0,
                    status: Status::ExactZero,
                    depth_used: n,
                    provenance,
                    partial_sums: sums,
                });
            }
            quiet = if (prev - s).abs() < tol { quiet + 1 } else { 0 };
            if quiet == 3 {
                return Ok(self.numeric_entry(u, s, Status::Converged { tol }, n, sums));
            }
        }
        let last = *sums.last().expect("nonempty");
        Ok(self.numeric_entry(u, last, Status::MaxDepthReached, self.options.max_depth, sums))
    }

    fn numeric_entry(&self, u: &VertexId, s: f64, status: Status, n: usize, sums: Vec<f64>) -> ProfileEntry {
        let s = s.clamp(0.0, 1.0);
        ProfileEntry {
            vertex: u.clone(),
            estimate: s,
            lower: 0.0,
            upper: s,
            status,
            depth_used: n,
            provenance: Provenance::Numerical,
            partial_sums: sums,
        }
    }

    fn class(&self, v: &VertexId) -> SubtreeClass {
        let TreeModel::Family(Family::RootlessBinary) = self.op.model() else {
            return SubtreeClass::Vertex(v.clone());
        };
        match self.op.rule() {
            WeightRule::Constant(_) => SubtreeClass::Uniform,
            WeightRule::ExpRay { .. } if matches!(v, VertexId::Branch { .. }) => SubtreeClass::Uniform,
            WeightRule::Geometric { .. } => match self.op.model().level(v) {
                Ok(l) => SubtreeClass::Level(l),
                Err(_) => SubtreeClass::Vertex(v.clone()),
            },
            WeightRule::Map { values, default: Some(_) } if !values.keys().any(|k| self.strictly_below(k, v)) => {
                SubtreeClass::Uniform
            }
            _ => SubtreeClass::Vertex(v.clone()),
        }
    }

    fn strictly_below(&self, k: &VertexId, v: &VertexId) -> bool {
        let model = self.op.model();
        let (Ok(lk), Ok(lv)) = (model.level(k), model.level(v)) else { return false };
        lk > lv && matches!(model.ancestor(k, (lk - lv) as usize), Ok(Some(a)) if a == *v)
    }

    /// `s_n(v)`, memoized per subtree class.
    pub fn partial_sum(&mut self, v: &VertexId, n: usize) -> Result<f64> {
        if n == 0 {
            return Ok(1.0);
        }
        let key = (self.class(v), n);
        if let Some(&s) = self.sums.get(&key) {
            return Ok(s);
        }
        let mut s = 0.0;
        for c in self.op.model().children(v)? {
            let w = self.op.lambda(&c)?;
            s += w * w * self.partial_sum(&c, n - 1)?;
        }
        self.sums.insert(key, s);
        Ok(s)
    }

    fn closed(&mut self, u: &VertexId) -> Result<Option<ProfileEntry>> {
        let op = self.op;
        let Some(family) = op.model().family() else { return Ok(None) };
        let rule = op.rule();
        let entry = |value: f64, provenance| Some(ProfileEntry::exact(u.clone(), value, provenance));
        Ok(match family {
            Family::RootlessBinary => match rule {
                WeightRule::Constant(c) => {
                    let x = 2.0 * c * c;
                    if (x - 1.0).abs() <= 1e-12 {
                        entry(1.0, Provenance::Certified)
                    } else if x < 1.0 {
                        entry(0.0, Provenance::Certified)
                    } else {
                        None
                    }
                }
                WeightRule::ExpRay { .. } => entry(1.0, Provenance::Certified),
                _ => None,
            },
            Family::RootedPath | Family::BilateralPath => {
                let VertexId::Int(n) = u else { return Ok(None) };
                self.chain(u, Ray::Unprimed, n + 1, None)
            }
            Family::Tilde(f) | Family::Comb(f) => match u {
                VertexId::Int(n) if *n >= 1 => self.chain(u, Ray::Unprimed, n + 1, f.spine_end()),
                VertexId::Primed(k) => self.chain(u, Ray::Primed, *k as i64 + 1, f.primed_end().map(|k| k as i64)),
                VertexId::Int(n) => {
                    let Some(above) = rule.ray_log_sq_sum(Ray::Unprimed, Some(n + 1), Some(0)) else {
                        return Ok(None);
                    };
                    let mut below = 0.0;
                    let mut provenance = if above == 0.0 { Provenance::Certified } else { Provenance::ClosedForm };
                    for c in op.model().children(&VertexId::Int(0))? {
                        let Some(e) = self.closed(&c)? else { return Ok(None) };
                        let w = op.lambda(&c)?;
                        below += w * w * e.estimate;
                        provenance = provenance.max(e.provenance.max(Provenance::ClosedForm));
                    }
                    let mut e = ProfileEntry::exact(u.clone(), (above.exp() * below).min(1.0), provenance);
                    if below == 0.0 {
                        e.provenance = Provenance::Certified;
                    }
                    self.settle(e)
                }
                _ => None,
            },
        })
    }

    /// Single-child chain below `u` starting at level `from`, ending at `leaf`.
    fn chain(&self, u: &VertexId, ray: Ray, from: i64, leaf: Option<i64>) -> Option<ProfileEntry> {
        if leaf.is_some() {
            return Some(ProfileEntry::exact(u.clone(), 0.0, Provenance::Certified));
        }
        let log = self.op.rule().ray_log_sq_sum(ray, Some(from), None)?;
        let provenance = if log == 0.0 { Provenance::Certified } else { Provenance::ClosedForm };
        self.settle(ProfileEntry::exact(u.clone(), log.exp().min(1.0), provenance))
    }

    fn settle(&self, mut e: ProfileEntry) -> Option<ProfileEntry> {
        if let Status::Converged { .. } = e.status {
            e.status = Status::Converged { tol: self.options.tol };
        }
        Some(e)
    }
}
