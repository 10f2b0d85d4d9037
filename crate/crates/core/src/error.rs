use std::fmt;

use crate::reconstruct::TopologyIssue;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid mesh parameters: {0}")]
    InvalidMesh(String),

    #[error("face {nodes:?} is shared by more than two elements")]
    NonManifoldFace { nodes: [usize; 3] },

    #[error("surface does not intersect mesh")]
    NoActiveElements,

    #[error("unsupported reference element: {0}")]
    UnsupportedElement(String),

    #[error("unsupported quadrature degree {degree} for {shape}")]
    UnsupportedQuadrature { shape: &'static str, degree: usize },

    #[error("degenerate element {0}: singular affine map")]
    DegenerateElement(usize),

    #[error("level-set gradient undefined on the medial axis at {point:?}{}", node.map(|n| format!(" (node {n})")).unwrap_or_default())]
    MedialAxis { point: [f64; 3], node: Option<usize> },

    #[error("no sign change on segment (values {0:e}, {1:e})")]
    NoSignChange(f64, f64),

    #[error("{0}")]
    RootNotFound(RootFailure),

    #[error("invalid topology in {} element(s), first: element {} ({}); refine the background mesh locally around the listed elements", .0.len(), .0[0].0, .0[0].1)]
    InvalidTopology(Vec<(usize, TopologyIssue)>),

    #[error("degenerate surface element (jacobian {0:e})")]
    DegenerateSurface(f64),

    #[error("cannot build a projector from a zero vector")]
    ZeroNormal,

    #[error("invalid material: {0}")]
    InvalidMaterial(String),

    #[error("assembly: {0}")]
    Assembly(String),

    #[error("linear solver breakdown: {0}")]
    SolverBreakdown(String),

    #[error("symmetric eigensolver did not converge within {0} sweeps")]
    EigenNoConvergence(usize),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Diagnostics attached to a failed Newton/bisection search.
#[derive(Debug, Clone, PartialEq)]
pub struct RootFailure {
    pub element: Option<usize>,
    pub iterations: usize,
    pub residual: f64,
    pub bracket: (f64, f64),
}

impl fmt::Display for RootFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "root not found after {} iterations (|phi| = {:e}, bracket [{}, {}])",
            self.iterations, self.residual, self.bracket.0, self.bracket.1
        )?;
        if let Some(e) = self.element {
            write!(f, " in element {e}")?;
        }
        Ok(())
    }
}

impl Error {
    /// Short machine-readable tag used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidMesh(_) | Error::NonManifoldFace { .. } => "mesh",
            Error::NoActiveElements => "no-active-elements",
            Error::UnsupportedElement(_) | Error::UnsupportedQuadrature { .. } => "unsupported",
            Error::DegenerateElement(_) | Error::DegenerateSurface(_) => "degenerate",
            Error::MedialAxis { .. } => "medial-axis",
            Error::NoSignChange(..) => "no-sign-change",
            Error::RootNotFound(_) => "root-not-found",
            Error::InvalidTopology(_) => "invalid-topology",
            Error::ZeroNormal => "zero-normal",
            Error::InvalidMaterial(_) => "material",
            Error::Assembly(_) => "assembly",
            Error::SolverBreakdown(_) => "solver",
            Error::EigenNoConvergence(_) => "eigen",
            Error::InvalidInput(_) => "input",
            Error::Config(_) | Error::Json(_) => "config",
            Error::Io(_) => "io",
        }
    }

    /// Background element ids implicated in the failure, if any.
    pub fn elements(&self) -> Vec<usize> {
        match self {
            Error::InvalidTopology(list) => list.iter().map(|(e, _)| *e).collect(),
            Error::RootNotFound(f) => f.element.into_iter().collect(),
            Error::DegenerateElement(e) => vec![*e],
            _ => Vec::new(),
        }
    }
}
