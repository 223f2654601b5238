use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::tree::{TreeModel, VertexId};

/// Finite, parent-closed slice of a tree between two levels.
///
/// The top level holds the ancestor of the base vertex at `min_level` (or the
/// capped `Chi^min_level` of the base when `min_level > 0`); every lower level
/// holds the children of the level above, sorted and capped at `breadth`.
/// Vertices are stored level-major, then by id.
#[derive(Clone, Debug)]
pub struct TreeWindow {
    min_level: i64,
    max_level: i64,
    breadth: usize,
    vertices: Vec<VertexId>,
    levels: Vec<i64>,
    index: HashMap<VertexId, usize>,
    level_start: Vec<usize>,
}

impl TreeWindow {
    pub fn build(model: &TreeModel, min_level: i64, max_level: i64, breadth: usize) -> Result<Self> {
        if min_level > max_level {
            return Err(Error::InvalidWindow(format!("empty level range {min_level}:{max_level}")));
        }
        if breadth == 0 {
            return Err(Error::InvalidWindow("breadth cap must be positive".into()));
        }
        let min_level = if model.is_rooted() { min_level.max(0) } else { min_level };
        if min_level > max_level {
            return Err(Error::InvalidWindow(format!("rooted tree has no levels in {min_level}:{max_level}")));
        }

        let base = model.base_vertex();
        let mut top = vec![base.clone()];
        if min_level <= 0 {
            top[0] = model
                .ancestor(&base, min_level.unsigned_abs() as usize)?
                .ok_or_else(|| Error::InvalidWindow("ancestor above the root".into()))?;
        } else {
            for _ in 0..min_level {
                top = next_level(model, &top, breadth)?;
            }
        }

        let mut vertices = Vec::new();
        let mut levels = Vec::new();
        let mut level_start = Vec::new();
        let mut cur = top;
        let mut level = min_level;
        loop {
            level_start.push(vertices.len());
            levels.extend(std::iter::repeat_n(level, cur.len()));
            vertices.extend(cur.iter().cloned());
            if level == max_level || cur.is_empty() {
                break;
            }
            cur = next_level(model, &cur, breadth)?;
            level += 1;
        }
        // trailing empty levels are dropped; max_level keeps the request
        if vertices.len() == level_start[level_start.len() - 1] {
            level_start.pop();
        }
        let index = vertices.iter().enumerate().map(|(i, v)| (v.clone(), i)).collect();
        Ok(TreeWindow { min_level, max_level, breadth, vertices, levels, index, level_start })
    }

    pub fn min_level(&self) -> i64 {
        self.min_level
    }

    pub fn max_level(&self) -> i64 {
        self.max_level
    }

    pub fn breadth(&self) -> usize {
        self.breadth
    }

    pub fn vertices(&self) -> &[VertexId] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn contains(&self, v: &VertexId) -> bool {
        self.index.contains_key(v)
    }

    pub fn index_of(&self, v: &VertexId) -> Option<usize> {
        self.index.get(v).copied()
    }

    pub fn level_at(&self, i: usize) -> i64 {
        self.levels[i]
    }

    /// Materialized levels, top to bottom.
    pub fn levels(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.level_start.len()).map(move |k| self.min_level + k as i64)
    }

    pub fn at_level(&self, level: i64) -> &[VertexId] {
        let k = level - self.min_level;
        if k < 0 || k as usize >= self.level_start.len() {
            return &[];
        }
        let k = k as usize;
        let end = self.level_start.get(k + 1).copied().unwrap_or(self.vertices.len());
        &self.vertices[self.level_start[k]..end]
    }

    /// All children of `v` lie in the window (true for leaves).
    pub fn is_interior(&self, model: &TreeModel, v: &VertexId) -> Result<bool> {
        Ok(self.contains(v) && model.children(v)?.iter().all(|c| self.contains(c)))
    }

    pub fn interior(&self, model: &TreeModel) -> Result<Vec<VertexId>> {
        let mut out = Vec::new();
        for v in &self.vertices {
            if self.is_interior(model, v)? {
                out.push(v.clone());
            }
        }
        Ok(out)
    }
}

fn next_level(model: &TreeModel, cur: &[VertexId], breadth: usize) -> Result<Vec<VertexId>> {
    let mut next = Vec::new();
    for v in cur {
        next.extend(model.children(v)?);
    }
    next.sort();
    next.truncate(breadth);
    Ok(next)
}
