//! Charted and embedded spaces, vector fields, covector fields and
//! (1,1)-tensors, all evaluated pointwise to [`Jet`](crate::jets::Jet)s.
//!
//! Embedded spaces (the unit sphere) are handled in ambient coordinates:
//! fields carry one component per ambient coordinate and brackets are
//! ambient brackets.

mod cache;
mod endo;
mod field;
mod frame;
mod space;

use thiserror::Error;

use crate::expr::{EvalError, ParseError};
use crate::linalg::LinalgError;

pub use endo::Endo11;
pub use field::{CovectorField, ScalarField, VectorField};
pub use frame::{
    dual_coframe, frame_coefficients, projector_from_split, Basis, Frame, FRAME_RATIO_MIN,
};
pub use space::{At, Embedding, Sampler, Sampling, Space, DEFAULT_SAMPLES, DEFAULT_SEED};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeomError {
    #[error("{0}")]
    Invalid(String),
    #[error("unknown coordinate `{name}` (available: {})", available.join(", "))]
    UnknownCoordinate {
        name: String,
        available: Vec<String>,
    },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("point {point:?} is off the manifold (constraint residual {residual:e})")]
    OffManifold { point: Vec<f64>, residual: f64 },
    #[error("jet depth {requested} exceeds budget {budget} (in {})", chain.join(" <- "))]
    DepthExceeded {
        requested: usize,
        budget: usize,
        chain: Vec<String>,
    },
    #[error("evaluating `{field}`: {source}")]
    Eval {
        field: String,
        #[source]
        source: EvalError,
    },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("fields live on different spaces `{left}` and `{right}`")]
    SpaceMismatch { left: String, right: String },
    #[error("frame `{frame}` is degenerate at {point:?} (singular value ratio {ratio:e})")]
    SingularFrame {
        frame: String,
        point: Vec<f64>,
        ratio: f64,
    },
    #[error("vector not in the span of frame `{frame}` (residual {residual:e})")]
    NotInSpan { frame: String, residual: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

impl GeomError {
    /// Records that the error surfaced while evaluating `name`.
    pub(crate) fn within(mut self, name: &str) -> Self {
        if let GeomError::DepthExceeded { chain, .. } = &mut self {
            if chain.last().map(String::as_str) != Some(name) {
                chain.push(name.to_string());
            }
        }
        self
    }
}
