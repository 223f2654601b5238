use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::tree::vertex::MAX_BRANCH_DEPTH;
use crate::tree::VertexId;

/// Tree with one branching vertex `0` joining the integer spine and the
/// primed ray `1', 2', ...` hanging below it.
///
/// `tilde` is the leafless case; `comb` adds an optional leaf at `k0'` on the
/// primed ray and, only together with it, a leaf at `j0 >= k0` on the spine.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Fork {
    pub rooted: bool,
    pub primed_leaf: Option<u64>,
    pub spine_leaf: Option<i64>,
}

impl Fork {
    pub fn tilde(rooted: bool) -> Self {
        Fork { rooted, primed_leaf: None, spine_leaf: None }
    }

    pub fn comb(primed_leaf: Option<u64>, spine_leaf: Option<i64>) -> Result<Self> {
        match (primed_leaf, spine_leaf) {
            (Some(0), _) => Err(Error::FamilyParams("primed_leaf must be >= 1".into())),
            (None, Some(_)) => {
                Err(Error::FamilyParams("a single leaf is labelled on the primed ray: use primed_leaf".into()))
            }
            (Some(k), Some(j)) if j < k as i64 => {
                Err(Error::FamilyParams(format!("unprimed_leaf {j} must be >= primed_leaf {k}")))
            }
            _ => Ok(Fork { rooted: false, primed_leaf, spine_leaf }),
        }
    }

    pub fn leaf_count(&self) -> usize {
        usize::from(self.primed_leaf.is_some()) + usize::from(self.spine_leaf.is_some())
    }

    pub fn spine_end(&self) -> Option<i64> {
        self.spine_leaf
    }

    pub fn primed_end(&self) -> Option<u64> {
        self.primed_leaf
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    RootedPath,
    BilateralPath,
    /// Rootless tree where every vertex has two children. Spine vertex `a`
    /// has children `a+1` and `a:1`; `a:bits` has children `a:bits0`, `a:bits1`.
    RootlessBinary,
    Tilde(Fork),
    Comb(Fork),
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::RootedPath => "rooted-path",
            Family::BilateralPath => "bilateral-path",
            Family::RootlessBinary => "rootless-binary",
            Family::Tilde(_) => "tilde",
            Family::Comb(_) => "comb",
        }
    }

    pub fn fork(&self) -> Option<&Fork> {
        match self {
            Family::Tilde(f) | Family::Comb(f) => Some(f),
            _ => None,
        }
    }

    pub fn root(&self) -> Option<VertexId> {
        match self {
            Family::RootedPath => Some(VertexId::Int(0)),
            Family::Tilde(f) | Family::Comb(f) if f.rooted => Some(VertexId::Int(0)),
            _ => None,
        }
    }

    pub fn contains(&self, v: &VertexId) -> bool {
        match (self, v) {
            (Family::RootedPath, VertexId::Int(n)) => *n >= 0,
            (Family::BilateralPath, VertexId::Int(_)) => true,
            (Family::RootlessBinary, VertexId::Int(_)) => true,
            (Family::RootlessBinary, VertexId::Branch { len, path, .. }) => {
                *len >= 1 && *len <= MAX_BRANCH_DEPTH && (path >> (len - 1)) == 1
            }
            (Family::Tilde(f) | Family::Comb(f), VertexId::Int(n)) => {
                (!f.rooted || *n >= 0) && f.spine_leaf.is_none_or(|j| *n <= j)
            }
            (Family::Tilde(f) | Family::Comb(f), VertexId::Primed(k)) => {
                *k >= 1 && f.primed_leaf.is_none_or(|k0| *k <= k0)
            }
            _ => false,
        }
    }

    fn check(&self, v: &VertexId) -> Result<()> {
        if self.contains(v) {
            Ok(())
        } else {
            Err(Error::VertexNotFound(v.clone()))
        }
    }

    pub fn children(&self, v: &VertexId) -> Result<Vec<VertexId>> {
        self.check(v)?;
        Ok(match (self, v) {
            (Family::RootedPath | Family::BilateralPath, VertexId::Int(n)) => vec![VertexId::Int(n + 1)],
            (Family::RootlessBinary, VertexId::Int(a)) => {
                vec![VertexId::Int(a + 1), VertexId::Branch { spine: *a, len: 1, path: 1 }]
            }
            (Family::RootlessBinary, VertexId::Branch { spine, len, path }) => {
                if *len >= MAX_BRANCH_DEPTH {
                    return Err(Error::InvalidWindow(format!(
                        "binary path below {v} exceeds depth {MAX_BRANCH_DEPTH}"
                    )));
                }
                vec![
                    VertexId::Branch { spine: *spine, len: len + 1, path: path << 1 },
                    VertexId::Branch { spine: *spine, len: len + 1, path: (path << 1) | 1 },
                ]
            }
            (Family::Tilde(f) | Family::Comb(f), VertexId::Int(n)) => {
                if f.spine_leaf == Some(*n) {
                    vec![]
                } else if *n == 0 {
                    vec![VertexId::Int(1), VertexId::Primed(1)]
                } else {
                    vec![VertexId::Int(n + 1)]
                }
            }
            (Family::Tilde(f) | Family::Comb(f), VertexId::Primed(k)) => {
                if f.primed_leaf == Some(*k) {
                    vec![]
                } else {
                    vec![VertexId::Primed(k + 1)]
                }
            }
            _ => unreachable!("membership checked"),
        })
    }

    pub fn parent(&self, v: &VertexId) -> Result<Option<VertexId>> {
        self.check(v)?;
        if self.root().as_ref() == Some(v) {
            return Ok(None);
        }
        Ok(Some(match v {
            VertexId::Int(n) => VertexId::Int(n - 1),
            VertexId::Primed(1) => VertexId::Int(0),
            VertexId::Primed(k) => VertexId::Primed(k - 1),
            VertexId::Branch { spine, len: 1, .. } => VertexId::Int(*spine),
            VertexId::Branch { spine, len, path } => VertexId::Branch { spine: *spine, len: len - 1, path: path >> 1 },
            VertexId::Named(_) => unreachable!("membership checked"),
        }))
    }

    pub fn level(&self, v: &VertexId) -> Result<i64> {
        self.check(v)?;
        Ok(match v {
            VertexId::Int(n) => *n,
            VertexId::Primed(k) => *k as i64,
            VertexId::Branch { spine, len, .. } => spine + *len as i64,
            VertexId::Named(_) => unreachable!("membership checked"),
        })
    }

    pub fn leaves(&self) -> BTreeSet<VertexId> {
        let mut out = BTreeSet::new();
        if let Some(f) = self.fork() {
            if let Some(k) = f.primed_leaf {
                out.insert(VertexId::Primed(k));
            }
            if let Some(j) = f.spine_leaf {
                out.insert(VertexId::Int(j));
            }
        }
        out
    }

    /// `None` means infinite.
    pub fn branching_index(&self) -> Option<usize> {
        match self {
            Family::RootedPath | Family::BilateralPath => Some(0),
            Family::RootlessBinary => None,
            Family::Tilde(_) | Family::Comb(_) => Some(1),
        }
    }

    /// Whole level as a finite set, when the family has finitely many
    /// vertices per level.
    pub fn level_set(&self, level: i64) -> Option<Vec<VertexId>> {
        let mut out = Vec::new();
        match self {
            Family::RootlessBinary => return None,
            Family::RootedPath | Family::BilateralPath => {
                let v = VertexId::Int(level);
                if self.contains(&v) {
                    out.push(v);
                }
            }
            Family::Tilde(_) | Family::Comb(_) => {
                let v = VertexId::Int(level);
                if self.contains(&v) {
                    out.push(v);
                }
                if level >= 1 {
                    let p = VertexId::Primed(level as u64);
                    if self.contains(&p) {
                        out.push(p);
                    }
                }
            }
        }
        Some(out)
    }
}
