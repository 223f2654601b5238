use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Longest off-spine path representable in a [`VertexId::Branch`].
pub const MAX_BRANCH_DEPTH: u8 = 63;

/// Vertex identifier shared by finite and procedural trees.
///
/// Text forms: `-3` (spine), `4'` (primed ray), `2:101` (binary-tree vertex
/// that left spine vertex 2 and then followed the path `101`), anything else
/// is a plain name. Parsing only produces `Named` for strings that are not a
/// canonical structured form, so `parse(render(v)) == v` for every `v`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VertexId {
    Int(i64),
    Primed(u64),
    /// `path` holds `len` bits, most significant first; the first bit is always 1.
    Branch {
        spine: i64,
        len: u8,
        path: u64,
    },
    Named(String),
}

impl VertexId {
    pub fn named(name: impl Into<String>) -> Self {
        VertexId::Named(name.into())
    }

    /// Off-spine vertex from a bit string starting with `1`.
    pub fn branch(spine: i64, bits: &str) -> Option<Self> {
        if bits.is_empty() || bits.len() > MAX_BRANCH_DEPTH as usize || !bits.starts_with('1') {
            return None;
        }
        let mut path = 0u64;
        for c in bits.chars() {
            path = (path << 1)
                | match c {
                    '0' => 0,
                    '1' => 1,
                    _ => return None,
                };
        }
        Some(VertexId::Branch { spine, len: bits.len() as u8, path })
    }

    pub fn branch_bits(len: u8, path: u64) -> String {
        (0..len).rev().map(|i| if (path >> i) & 1 == 1 { '1' } else { '0' }).collect()
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VertexId::Int(n) => write!(f, "{n}"),
            VertexId::Primed(k) => write!(f, "{k}'"),
            VertexId::Branch { spine, len, path } => {
                write!(f, "{spine}:{}", VertexId::branch_bits(*len, *path))
            }
            VertexId::Named(s) => f.write_str(s),
        }
    }
}

fn canonical_int(s: &str) -> Option<i64> {
    let n: i64 = s.parse().ok()?;
    (n.to_string() == s).then_some(n)
}

impl FromStr for VertexId {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(n) = canonical_int(s) {
            return Ok(VertexId::Int(n));
        }
        if let Some(head) = s.strip_suffix('\'') {
            if let Some(k) = canonical_int(head) {
                if k >= 1 {
                    return Ok(VertexId::Primed(k as u64));
                }
            }
        }
        if let Some((spine, bits)) = s.split_once(':') {
            if let (Some(a), Some(VertexId::Branch { len, path, .. })) =
                (canonical_int(spine), VertexId::branch(0, bits))
            {
                return Ok(VertexId::Branch { spine: a, len, path });
            }
        }
        Ok(VertexId::Named(s.to_string()))
    }
}

impl From<&str> for VertexId {
    fn from(s: &str) -> Self {
        s.parse().unwrap_or_else(|e: std::convert::Infallible| match e {})
    }
}

impl Serialize for VertexId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for VertexId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Int(i64),
        }
        Ok(match Raw::deserialize(deserializer)? {
            Raw::Text(s) => VertexId::from(s.as_str()),
            Raw::Int(n) => VertexId::Int(n),
        })
    }
}
