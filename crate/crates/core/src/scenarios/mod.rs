//! The worked example families as ready-made packages of space, connection,
//! split, derivative and expected results.
//!
//! Two built-ins ([`trivial_r3`], [`hopf`]) are scenario files embedded in
//! the library and go through the same loader as user files. The tangent
//! bundle and frame bundle families are parameterised and built in code.

mod def;
mod frame_bundle;
mod metric;
pub mod random;
mod tangent;

use std::fmt;
use std::sync::Arc;

use indexmap::IndexMap;
use thiserror::Error;

use crate::connection::{
    build_connection, canonical_endos, ConnectionError, Orientation, SplitStructure,
};
use crate::covderiv::{
    ehresmann_curvature, nabla_total_thm3, nabla_total_thm4, torsion, CovDeriv, CovDerivError,
};
use crate::geometry::{Frame, GeomError, Sampling, ScalarField, Space, VectorField};
use crate::jets::DEFAULT_DEPTH;
use crate::linalg::Matrix;
use crate::report::RunConfig;

pub use def::{load_scenario_file, ScenarioDef};
pub use frame_bundle::{
    cycle_decomposition, frame_bundle, frame_coordinate, DecompositionReport, SubspaceBasis,
};
pub use metric::{metric_compatibility_defect, symmetrize, Metric};
pub use tangent::{
    affine_tangent, homogeneity_check, homogeneity_defect, is_spray, nonlinear_from_fields,
    nonlinear_from_potential, nonlinear_tangent, sode_projector, sode_sufficiency_check,
    spray_defect, tangent_space, SodeConnection, SufficiencyReport,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Connection(#[from] ConnectionError),
    #[error(transparent)]
    CovDeriv(#[from] CovDerivError),
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error("unknown scenario `{name}` (available: {})", available.join(", "))]
    Unknown {
        name: String,
        available: Vec<String>,
    },
    #[error("unknown field `{name}` (available: {})", available.join(", "))]
    UnknownField {
        name: String,
        available: Vec<String>,
    },
    #[error("reading `{path}`: {message}")]
    Io { path: String, message: String },
}

/// Sampling parameters used while building and checking a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Settings {
    pub seed: u64,
    pub samples: usize,
    pub depth: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            seed: crate::geometry::DEFAULT_SEED,
            samples: crate::geometry::DEFAULT_SAMPLES,
            depth: DEFAULT_DEPTH,
        }
    }
}

impl From<&RunConfig> for Settings {
    fn from(c: &RunConfig) -> Self {
        Settings {
            seed: c.seed,
            samples: c.samples,
            depth: c.depth,
        }
    }
}

/// Operation whose value an expected-result row prescribes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Op {
    /// `∇_X Y`
    Nabla,
    /// `[X, Y]`
    Bracket,
    /// `T(X, Y)`
    Torsion,
    /// Ehresmann curvature `R(X, Y)`
    Curvature,
}

impl Op {
    pub fn name(self) -> &'static str {
        match self {
            Op::Nabla => "nabla",
            Op::Bracket => "bracket",
            Op::Torsion => "torsion",
            Op::Curvature => "curvature",
        }
    }
}

impl std::str::FromStr for Op {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nabla" => Ok(Op::Nabla),
            "bracket" => Ok(Op::Bracket),
            "torsion" => Ok(Op::Torsion),
            "curvature" => Ok(Op::Curvature),
            other => Err(format!(
                "unknown operation `{other}` (expected nabla, bracket, torsion or curvature)"
            )),
        }
    }
}

/// `op(X, Y) = Σ c_i F_i` with `F_i` named fields of the scenario.
#[derive(Debug, Clone)]
pub struct Expected {
    pub op: Op,
    pub args: [String; 2],
    pub components: Vec<(String, ScalarField)>,
    /// Rows sharing a family are reported as one check.
    pub family: String,
    pub reference: String,
}

impl Expected {
    pub fn new(
        op: Op,
        x: impl Into<String>,
        y: impl Into<String>,
        components: Vec<(String, ScalarField)>,
        family: impl Into<String>,
        reference: impl Into<String>,
    ) -> Self {
        Expected {
            op,
            args: [x.into(), y.into()],
            components,
            family: family.into(),
            reference: reference.into(),
        }
    }
}

/// What kind of scenario this is, with the inputs the family checks need.
#[derive(Debug, Clone)]
pub enum Family {
    Custom,
    Affine {
        n: usize,
    },
    Nonlinear {
        n: usize,
        /// `Γ^b_a` indexed `[b][a]`.
        gamma: Vec<Vec<ScalarField>>,
    },
    Sode {
        n: usize,
        sode: Box<SodeConnection>,
        /// `Υ^b_a = -½ ∂f^b/∂u^a` indexed `[b][a]`.
        upsilon: Vec<Vec<ScalarField>>,
    },
    FrameBundle {
        n: usize,
        decomposition: SubspaceBasis,
    },
}

impl Family {
    pub fn label(&self) -> &'static str {
        match self {
            Family::Custom => "custom",
            Family::Affine { .. } => "affine",
            Family::Nonlinear { .. } => "nonlinear",
            Family::Sode { .. } => "sode",
            Family::FrameBundle { .. } => "frame-bundle",
        }
    }
}

/// Everything needed to assemble a scenario.
pub(crate) struct Parts {
    pub name: String,
    pub description: String,
    pub reference: String,
    pub space: Arc<Space>,
    pub fields: IndexMap<String, VectorField>,
    pub orientation: Orientation,
    pub k: Vec<String>,
    pub blocks: Vec<Vec<String>>,
    pub pairing: Option<Matrix<f64>>,
    pub expected: Vec<Expected>,
    pub metric: Option<Metric>,
    pub notes: Vec<String>,
    pub family: Family,
}

/// A space, connection, split, the derivative built from them, and the
/// results the construction is expected to reproduce.
#[derive(Clone)]
pub struct Scenario {
    name: String,
    description: String,
    reference: String,
    space: Arc<Space>,
    fields: IndexMap<String, VectorField>,
    frame: Vec<String>,
    split: SplitStructure,
    nabla: CovDeriv,
    expected: Vec<Expected>,
    metric: Option<Metric>,
    notes: Vec<String>,
    family: Family,
    settings: Settings,
    sampling: Sampling,
}

impl fmt::Debug for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Scenario")
            .field("name", &self.name)
            .field("space", &self.space)
            .field("family", &self.family.label())
            .finish()
    }
}

fn frame_name(k_side: bool, orientation: Orientation, index: Option<usize>) -> String {
    let letter = match (orientation, k_side) {
        (Orientation::KVertical, true) | (Orientation::KHorizontal, false) => "V",
        _ => "H",
    };
    match index {
        Some(a) => format!("{letter}{}", a + 1),
        None => letter.to_string(),
    }
}

impl Scenario {
    pub(crate) fn assemble(parts: Parts, settings: Settings) -> Result<Scenario, ScenarioError> {
        let Parts {
            name,
            description,
            reference,
            space,
            fields,
            orientation,
            k,
            blocks,
            pairing,
            expected,
            metric,
            notes,
            family,
        } = parts;
        let sampling = Sampling::new(&space, settings.seed, settings.samples, settings.depth);
        let lookup = |n: &str| -> Result<VectorField, ScenarioError> {
            fields
                .get(n)
                .cloned()
                .ok_or_else(|| ScenarioError::UnknownField {
                    name: n.to_string(),
                    available: fields.keys().cloned().collect(),
                })
        };
        let frame_of = |label: String, names: &[String]| -> Result<Frame, ScenarioError> {
            let fs = names
                .iter()
                .map(|n| lookup(n))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Frame::new(label, fs)?)
        };
        if blocks.is_empty() {
            return Err(ScenarioError::Invalid(
                "split needs at least one block".into(),
            ));
        }
        let k_frame = frame_of(frame_name(true, orientation, None), &k)?;
        let single = blocks.len() == 1;
        let block_frames = blocks
            .iter()
            .enumerate()
            .map(|(a, b)| frame_of(frame_name(false, orientation, (!single).then_some(a)), b))
            .collect::<Result<Vec<_>, _>>()?;
        let other: Vec<String> = blocks.iter().flatten().cloned().collect();
        let other = frame_of(frame_name(false, orientation, None), &other)?;
        let (v, h) = match orientation {
            Orientation::KVertical => (k_frame, other),
            Orientation::KHorizontal => (other, k_frame),
        };
        let conn = build_connection(v, h, &sampling)?;
        let split = canonical_endos(&conn, orientation, block_frames, pairing, &sampling)?;
        let nabla = if single {
            nabla_total_thm3(&split, &sampling)?
        } else {
            nabla_total_thm4(&split, &sampling)?
        };
        for row in &expected {
            for a in &row.args {
                lookup(a)?;
            }
            for (f, _) in &row.components {
                lookup(f)?;
            }
        }
        if let Some(m) = &metric {
            if !m.space().same_as(&space) {
                return Err(ScenarioError::Invalid(
                    "metric lives on a different space".into(),
                ));
            }
        }
        let frame = k.iter().chain(blocks.iter().flatten()).cloned().collect();
        Ok(Scenario {
            name,
            description,
            reference,
            space,
            fields,
            frame,
            split,
            nabla,
            expected,
            metric,
            notes,
            family,
            settings,
            sampling,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    /// Where in the source material the example lives, as a short phrase.
    pub fn reference(&self) -> &str {
        &self.reference
    }

    pub fn space(&self) -> &Arc<Space> {
        &self.space
    }

    pub fn fields(&self) -> &IndexMap<String, VectorField> {
        &self.fields
    }

    /// Field by name, or an error listing the available names.
    pub fn field(&self, name: &str) -> Result<&VectorField, ScenarioError> {
        self.fields
            .get(name)
            .ok_or_else(|| ScenarioError::UnknownField {
                name: name.to_string(),
                available: self.fields.keys().cloned().collect(),
            })
    }

    /// Names of the frame fields: `K` first, then the blocks in order.
    pub fn frame_names(&self) -> &[String] {
        &self.frame
    }

    pub fn frame(&self) -> Vec<VectorField> {
        self.frame.iter().map(|n| self.fields[n].clone()).collect()
    }

    pub fn split(&self) -> &SplitStructure {
        &self.split
    }

    pub fn nabla(&self) -> &CovDeriv {
        &self.nabla
    }

    pub fn expected(&self) -> &[Expected] {
        &self.expected
    }

    pub fn metric(&self) -> Option<&Metric> {
        self.metric.as_ref()
    }

    pub fn notes(&self) -> &[String] {
        &self.notes
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn settings(&self) -> Settings {
        self.settings
    }

    pub fn sampling(&self) -> &Sampling {
        &self.sampling
    }

    /// Uses the equal-rank total derivative when there is one block.
    pub fn is_equal_rank(&self) -> bool {
        self.split.n_blocks() == 1
    }

    /// Evaluates `op(X, Y)` for named fields.
    pub fn apply(&self, op: Op, x: &str, y: &str) -> Result<VectorField, ScenarioError> {
        let (x, y) = (self.field(x)?, self.field(y)?);
        Ok(match op {
            Op::Nabla => self.nabla.nabla(x, y)?,
            Op::Bracket => x.bracket(y)?,
            Op::Torsion => torsion(&self.nabla, x, y)?,
            Op::Curvature => ehresmann_curvature(self.split.connection(), x, y)?,
        })
    }

    /// The right-hand side `Σ c_i F_i` of an expected row.
    pub fn expected_value(&self, row: &Expected) -> Result<VectorField, ScenarioError> {
        let terms = row
            .components
            .iter()
            .map(|(f, c)| Ok(self.field(f)?.times(c)?))
            .collect::<Result<Vec<_>, ScenarioError>>()?;
        Ok(VectorField::sum(&self.space, &terms)?)
    }
}

/// A built-in scenario: name, where it comes from, and how to build it.
pub struct Builtin {
    pub name: &'static str,
    pub reference: &'static str,
    pub description: &'static str,
    pub dim: usize,
    build: fn(Settings) -> Result<Scenario, ScenarioError>,
}

impl Builtin {
    pub fn build(&self, settings: Settings) -> Result<Scenario, ScenarioError> {
        (self.build)(settings)
    }
}

const TRIVIAL_R3: &str = include_str!("../../scenarios/trivial-r3.json");
const HOPF: &str = include_str!("../../scenarios/hopf.json");

pub fn trivial_r3(settings: Settings) -> Result<Scenario, ScenarioError> {
    ScenarioDef::from_json(TRIVIAL_R3)?.build(settings)
}

pub fn hopf(settings: Settings) -> Result<Scenario, ScenarioError> {
    ScenarioDef::from_json(HOPF)?.build(settings)
}

/// Source text of an embedded scenario file.
pub fn builtin_source(name: &str) -> Option<&'static str> {
    match name {
        "trivial-r3" => Some(TRIVIAL_R3),
        "hopf" => Some(HOPF),
        _ => None,
    }
}

pub const BUILTINS: &[Builtin] = &[
    Builtin {
        name: "trivial-r3",
        reference: "general examples: trivial bundle R^3 -> R^2",
        description: "trivial bundle with a rotating horizontal frame, two horizontal blocks",
        dim: 3,
        build: trivial_r3,
    },
    Builtin {
        name: "hopf",
        reference: "general examples: Hopf bundle S^3 -> S^2",
        description: "Hopf bundle in ambient coordinates with the frame Lambda, Sigma, V",
        dim: 3,
        build: hopf,
    },
    Builtin {
        name: "affine-tangent",
        reference: "tangent bundle: affine connection with torsion",
        description: "TM for n = 2 with polynomial connection coefficients carrying torsion",
        dim: 4,
        build: tangent::default_affine,
    },
    Builtin {
        name: "nonlinear-tangent",
        reference: "tangent bundle: nonlinear connection",
        description: "TM for n = 2 with a connection that is not linear in the fibre",
        dim: 4,
        build: tangent::default_nonlinear,
    },
    Builtin {
        name: "sode-tangent",
        reference: "tangent bundle: SODE connection",
        description:
            "connection of a spray on TM for n = 2, horizontal projector from the Lie derivative",
        dim: 4,
        build: tangent::default_sode,
    },
    Builtin {
        name: "frame-bundle",
        reference: "frame bundle connections",
        description: "frame bundle of a 2-manifold, vertical space split by the 2-cycle",
        dim: 6,
        build: frame_bundle::default_frame_bundle,
    },
];

pub fn builtin(name: &str) -> Result<&'static Builtin, ScenarioError> {
    BUILTINS
        .iter()
        .find(|b| b.name == name)
        .ok_or_else(|| ScenarioError::Unknown {
            name: name.to_string(),
            available: BUILTINS.iter().map(|b| b.name.to_string()).collect(),
        })
}

/// Resolves a built-in name or, failing that, a path to a scenario file.
pub fn resolve(name_or_path: &str, settings: Settings) -> Result<Scenario, ScenarioError> {
    match builtin(name_or_path) {
        Ok(b) => b.build(settings),
        Err(unknown) => {
            if std::path::Path::new(name_or_path).exists() {
                load_scenario_file(name_or_path, settings)
            } else {
                Err(unknown)
            }
        }
    }
}
