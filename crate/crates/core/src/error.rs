use thiserror::Error;

use crate::tree::VertexId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("vertex list is empty")]
    EmptyTree,
    #[error("edge references unlisted vertex {0}")]
    UnlistedVertex(VertexId),
    #[error("DisconnectedGraph: {components} components")]
    DisconnectedGraph { components: usize },
    #[error("MultipleParents({0})")]
    MultipleParents(VertexId),
    #[error("CircuitFound({})", render_cycle(.0))]
    CircuitFound(Vec<VertexId>),
    #[error("RootMismatch: declared {declared}, inferred {inferred}")]
    RootMismatch { declared: VertexId, inferred: String },
    #[error("VertexNotFound({0})")]
    VertexNotFound(VertexId),
    #[error("UnknownVertex({0})")]
    UnknownVertex(VertexId),
    #[error("invalid family parameters: {0}")]
    FamilyParams(String),
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error("WindowTooLarge: {size} vertices exceeds cap {cap}")]
    WindowTooLarge { size: usize, cap: usize },
    #[error("invalid weight rule: {0}")]
    WeightRule(String),
    #[error("missing weight for vertex {0}")]
    MissingWeight(VertexId),
    #[error("NonPositiveWeight at {vertex}: {value}")]
    NonPositiveWeight { vertex: VertexId, value: f64 },
    #[error("NotAContraction: norm {norm}")]
    NotAContraction { norm: f64 },
    #[error("StructuralViolation: {property} at {vertex}")]
    StructuralViolation { property: &'static str, vertex: VertexId },
    #[error("StableSubtreeEmpty: the operator is of class C_0. on the window")]
    StableSubtreeEmpty,
    #[error("AdjointStable: the operator is of class C_.0")]
    AdjointStable,
    #[error("ZeroWeight at branch {branch}, index {index}")]
    ZeroWeight { branch: usize, index: usize },
    #[error("ScheduleTooShort: L = {terms} but at least {required} terms are needed")]
    ScheduleTooShort { terms: usize, required: usize },
    #[error("DimensionCap: dimension {dim} exceeds cap {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("ShapeMismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid input: {0}")]
    Input(String),
}

fn render_cycle(cycle: &[VertexId]) -> String {
    cycle.iter().map(ToString::to_string).collect::<Vec<_>>().join(" -> ")
}
