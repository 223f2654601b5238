use serde::Deserialize;

use crate::error::{Error, Result};
use crate::tree::{Family, Fork, TreeModel, VertexId};

/// JSON form of a tree: an explicit finite tree or a named family.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum TreeSpec {
    Finite {
        vertices: Vec<VertexId>,
        edges: Vec<(VertexId, VertexId)>,
        #[serde(default)]
        root: Option<VertexId>,
    },
    Procedural {
        family: String,
        #[serde(default)]
        params: serde_json::Value,
    },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TildeParams {
    #[serde(default)]
    rooted: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CombParams {
    #[serde(default)]
    primed_leaf: Option<u64>,
    #[serde(default)]
    unprimed_leaf: Option<i64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoParams {}

fn params<T: for<'de> Deserialize<'de>>(family: &str, v: serde_json::Value) -> Result<T> {
    let v = if v.is_null() { serde_json::Value::Object(Default::default()) } else { v };
    serde_json::from_value(v).map_err(|e| Error::FamilyParams(format!("{family}: {e}")))
}

impl TreeModel {
    /// Parses `{"vertices", "edges", "root"?}` or `{"family", "params"?}`.
    ///
    /// Finite trees are validated; structural violations surface as the
    /// corresponding tree errors.
    pub fn parse(json: &str) -> Result<Self> {
        let spec: TreeSpec = serde_json::from_str(json).map_err(|e| Error::Input(format!("tree spec: {e}")))?;
        match spec {
            TreeSpec::Finite { vertices, edges, root } => TreeModel::finite(&vertices, &edges, root.as_ref()),
            TreeSpec::Procedural { family, params: p } => {
                let f = match family.as_str() {
                    "rooted-path" => params::<NoParams>(&family, p).map(|_| Family::RootedPath)?,
                    "bilateral-path" => params::<NoParams>(&family, p).map(|_| Family::BilateralPath)?,
                    "rootless-binary" => params::<NoParams>(&family, p).map(|_| Family::RootlessBinary)?,
                    "tilde" => Family::Tilde(Fork::tilde(params::<TildeParams>(&family, p)?.rooted)),
                    "comb" => {
                        let c: CombParams = params(&family, p)?;
                        Family::Comb(Fork::comb(c.primed_leaf, c.unprimed_leaf)?)
                    }
                    other => return Err(Error::FamilyParams(format!("unknown family {other:?}"))),
                };
                Ok(TreeModel::Family(f))
            }
        }
    }
}
