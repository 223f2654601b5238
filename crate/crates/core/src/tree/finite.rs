use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use crate::error::{Error, Result};
use crate::tree::VertexId;

/// Explicit finite directed tree. Always rooted: a finite, connected,
/// circuit-free graph with unique parents has exactly one parentless vertex.
#[derive(Clone, Debug)]
pub struct FiniteTree {
    vertices: BTreeSet<VertexId>,
    children: HashMap<VertexId, Vec<VertexId>>,
    parent: HashMap<VertexId, VertexId>,
    level: HashMap<VertexId, i64>,
    root: VertexId,
}

impl FiniteTree {
    pub fn validate(
        vertices: &[VertexId],
        edges: &[(VertexId, VertexId)],
        declared_root: Option<&VertexId>,
    ) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::EmptyTree);
        }
        let set: BTreeSet<VertexId> = vertices.iter().cloned().collect();
        if set.len() != vertices.len() {
            return Err(Error::Input("duplicate vertex in vertex list".into()));
        }
        let mut parent: HashMap<VertexId, VertexId> = HashMap::new();
        let mut children: HashMap<VertexId, Vec<VertexId>> = HashMap::new();
        for (u, v) in edges {
            for w in [u, v] {
                if !set.contains(w) {
                    return Err(Error::UnlistedVertex(w.clone()));
                }
            }
            if parent.insert(v.clone(), u.clone()).is_some() {
                return Err(Error::MultipleParents(v.clone()));
            }
            children.entry(u.clone()).or_default().push(v.clone());
        }
        for list in children.values_mut() {
            list.sort();
        }

        if let Some(cycle) = find_circuit(&set, &parent) {
            return Err(Error::CircuitFound(cycle));
        }

        let roots: Vec<&VertexId> = set.iter().filter(|v| !parent.contains_key(*v)).collect();
        if roots.len() != 1 {
            return Err(Error::DisconnectedGraph { components: roots.len() });
        }
        let root = roots[0].clone();
        if let Some(d) = declared_root {
            if *d != root {
                return Err(Error::RootMismatch { declared: d.clone(), inferred: root.to_string() });
            }
        }

        let mut level = HashMap::with_capacity(set.len());
        let mut queue = VecDeque::from([(root.clone(), 0i64)]);
        while let Some((u, l)) = queue.pop_front() {
            if let Some(cs) = children.get(&u) {
                queue.extend(cs.iter().map(|c| (c.clone(), l + 1)));
            }
            level.insert(u, l);
        }
        debug_assert_eq!(level.len(), set.len());

        Ok(FiniteTree { vertices: set, children, parent, level, root })
    }

    pub fn vertices(&self) -> impl Iterator<Item = &VertexId> {
        self.vertices.iter()
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn root(&self) -> &VertexId {
        &self.root
    }

    pub fn contains(&self, v: &VertexId) -> bool {
        self.vertices.contains(v)
    }

    pub fn children(&self, v: &VertexId) -> &[VertexId] {
        self.children.get(v).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn parent(&self, v: &VertexId) -> Option<&VertexId> {
        self.parent.get(v)
    }

    pub fn level(&self, v: &VertexId) -> Option<i64> {
        self.level.get(v).copied()
    }

    pub fn depth(&self) -> i64 {
        self.level.values().copied().max().unwrap_or(0)
    }

    pub fn edges(&self) -> impl Iterator<Item = (&VertexId, &VertexId)> {
        self.parent.iter().map(|(v, u)| (u, v))
    }

    pub fn leaves(&self) -> BTreeSet<VertexId> {
        self.vertices.iter().filter(|v| self.children(v).is_empty()).cloned().collect()
    }

    pub fn branching_index(&self) -> usize {
        self.children.values().map(|c| c.len().saturating_sub(1)).sum()
    }

    /// Vertices grouped by level, each group sorted.
    pub fn by_level(&self) -> BTreeMap<i64, Vec<VertexId>> {
        let mut out: BTreeMap<i64, Vec<VertexId>> = BTreeMap::new();
        for v in &self.vertices {
            out.entry(self.level[v]).or_default().push(v.clone());
        }
        out
    }
}

/// With unique parents every circuit is a parent-pointer cycle.
fn find_circuit(vertices: &BTreeSet<VertexId>, parent: &HashMap<VertexId, VertexId>) -> Option<Vec<VertexId>> {
    // 0 = unvisited, 1 = on current walk, 2 = done
    let mut state: HashMap<&VertexId, u8> = HashMap::with_capacity(vertices.len());
    for start in vertices {
        if state.get(start).copied().unwrap_or(0) != 0 {
            continue;
        }
        let mut walk = vec![start];
        state.insert(start, 1);
        let mut cur = start;
        while let Some(p) = parent.get(cur) {
            match state.get(p).copied().unwrap_or(0) {
                0 => {
                    state.insert(p, 1);
                    walk.push(p);
                    cur = p;
                }
                1 => {
                    let pos = walk.iter().position(|w| *w == p).expect("on walk");
                    // walk follows parent pointers; reverse to follow edges
                    let mut cycle: Vec<VertexId> = walk[pos..].iter().map(|v| (*v).clone()).collect();
                    cycle.reverse();
                    return Some(cycle);
                }
                _ => break,
            }
        }
        for w in walk {
            state.insert(w, 2);
        }
    }
    None
}
