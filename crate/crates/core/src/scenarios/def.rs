//! Scenario files: a JSON document naming a space, fields, a split and the
//! expected results, with every formula written in the expression grammar.

use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::connection::Orientation;
use crate::expr::parse;
use crate::geometry::{ScalarField, Space, VectorField};

use super::{Expected, Family, Metric, Op, Parts, Scenario, ScenarioError, Settings};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDef {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub reference: String,
    pub space: SpaceDef,
    pub fields: IndexMap<String, FieldDef>,
    pub split: SplitDef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<MetricDef>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub expected: Vec<ExpectedDef>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceDef {
    pub coords: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    pub intervals: IndexMap<String, [f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<EmbeddingDef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projection: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingDef {
    UnitSphere,
}

/// A field is either given by coordinate components (missing coordinates
/// are zero) or as a combination `Σ c_i F_i` of earlier fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "lowercase")]
pub enum FieldDef {
    Components(IndexMap<String, String>),
    Combination(IndexMap<String, String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrientationDef {
    KVertical,
    KHorizontal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitDef {
    pub orientation: OrientationDef,
    #[serde(rename = "K")]
    pub k: Vec<String>,
    pub blocks: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairing: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "lowercase")]
pub enum MetricDef {
    /// Induced from the ambient dot product.
    Ambient,
    /// `g_ij` in coordinates, as expressions.
    Components(Vec<Vec<String>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectedDef {
    pub op: Op,
    pub args: [String; 2],
    #[serde(default)]
    pub components: IndexMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(default)]
    pub reference: String,
}

fn schema(path: impl Into<String>, message: impl std::fmt::Display) -> ScenarioError {
    ScenarioError::Schema {
        path: path.into(),
        message: message.to_string(),
    }
}

fn scalar(space: &Arc<Space>, path: &str, text: &str) -> Result<ScalarField, ScenarioError> {
    let e = parse(text).map_err(|e| schema(path, e))?;
    ScalarField::from_expr(space, e).map_err(|e| schema(path, e))
}

impl ScenarioDef {
    /// Parses a scenario document; errors carry the JSON path.
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            schema(path, e.into_inner())
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("definition serializes")
    }

    /// Builds through the same assembly and validation as the built-ins.
    pub fn build(&self, settings: Settings) -> Result<Scenario, ScenarioError> {
        let sd = &self.space;
        let mut space = match sd.embedding {
            Some(EmbeddingDef::UnitSphere) => Space::unit_sphere(&self.name, &sd.coords),
            None => Space::chart(&self.name, &sd.coords),
        }
        .map_err(|e| schema("space.coords", e))?;
        for (c, [lo, hi]) in &sd.intervals {
            if lo.is_nan() || hi.is_nan() || lo >= hi {
                return Err(schema(format!("space.intervals.{c}"), "empty interval"));
            }
            space = space
                .with_interval(c, *lo, *hi)
                .map_err(|e| schema(format!("space.intervals.{c}"), e))?;
        }
        if let Some(base) = &sd.base {
            let base: Vec<&str> = base.iter().map(String::as_str).collect();
            space = space
                .with_base(&base)
                .map_err(|e| schema("space.base", e))?;
        }
        if let Some(proj) = &sd.projection {
            let exprs = proj
                .iter()
                .enumerate()
                .map(|(i, p)| parse(p).map_err(|e| schema(format!("space.projection[{i}]"), e)))
                .collect::<Result<Vec<_>, _>>()?;
            space = space
                .with_projection(exprs)
                .map_err(|e| schema("space.projection", e))?;
        }
        let space = space.into_shared();

        let mut fields: IndexMap<String, VectorField> = IndexMap::new();
        for (name, def) in &self.fields {
            let path = format!("fields.{name}");
            let field = match def {
                FieldDef::Components(comps) => {
                    let mut exprs = vec![crate::expr::Expr::constant(0.0); space.ambient_dim()];
                    for (c, text) in comps {
                        let i = space
                            .index_of(c)
                            .map_err(|e| schema(format!("{path}.components"), e))?;
                        exprs[i] =
                            parse(text).map_err(|e| schema(format!("{path}.components.{c}"), e))?;
                    }
                    VectorField::from_exprs(&space, name.clone(), exprs)
                        .map_err(|e| schema(&path, e))?
                }
                FieldDef::Combination(terms) => {
                    let mut parts = Vec::new();
                    for (f, c) in terms {
                        let base = fields.get(f).ok_or_else(|| {
                            schema(
                                format!("{path}.combination"),
                                format!("`{f}` is not defined before `{name}`"),
                            )
                        })?;
                        let c = scalar(&space, &format!("{path}.combination.{f}"), c)?;
                        parts.push(base.times(&c)?);
                    }
                    VectorField::sum(&space, &parts)?.renamed(name.clone())
                }
            };
            fields.insert(name.clone(), field);
        }

        let check_names = |path: &str, names: &[String]| -> Result<(), ScenarioError> {
            for n in names {
                if !fields.contains_key(n) {
                    return Err(schema(path, format!("unknown field `{n}`")));
                }
            }
            Ok(())
        };
        check_names("split.K", &self.split.k)?;
        for (a, b) in self.split.blocks.iter().enumerate() {
            check_names(&format!("split.blocks[{a}]"), b)?;
        }

        let metric = match &self.metric {
            None => None,
            Some(MetricDef::Ambient) => Some(Metric::ambient(&space)),
            Some(MetricDef::Components(rows)) => {
                let g = rows
                    .iter()
                    .enumerate()
                    .map(|(i, r)| {
                        r.iter()
                            .enumerate()
                            .map(|(j, t)| {
                                scalar(&space, &format!("metric.components[{i}][{j}]"), t)
                            })
                            .collect::<Result<Vec<_>, _>>()
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Some(Metric::components(&space, g).map_err(|e| schema("metric", e))?)
            }
        };

        let mut expected = Vec::new();
        for (i, row) in self.expected.iter().enumerate() {
            let path = format!("expected[{i}]");
            check_names(&format!("{path}.args"), &row.args)?;
            let mut comps = Vec::new();
            for (f, text) in &row.components {
                check_names(&format!("{path}.components"), std::slice::from_ref(f))?;
                comps.push((
                    f.clone(),
                    scalar(&space, &format!("{path}.components.{f}"), text)?,
                ));
            }
            let family = row
                .family
                .clone()
                .unwrap_or_else(|| format!("{}({},{})", row.op.name(), row.args[0], row.args[1]));
            expected.push(Expected {
                op: row.op,
                args: row.args.clone(),
                components: comps,
                family,
                reference: row.reference.clone(),
            });
        }

        Scenario::assemble(
            Parts {
                name: self.name.clone(),
                description: self.description.clone(),
                reference: self.reference.clone(),
                space,
                fields,
                orientation: match self.split.orientation {
                    OrientationDef::KVertical => Orientation::KVertical,
                    OrientationDef::KHorizontal => Orientation::KHorizontal,
                },
                k: self.split.k.clone(),
                blocks: self.split.blocks.clone(),
                pairing: self.split.pairing.clone(),
                expected,
                metric,
                notes: self.notes.clone(),
                family: Family::Custom,
            },
            settings,
        )
    }
}

/// Reads and builds a scenario file.
pub fn load_scenario_file(path: &str, settings: Settings) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
        path: path.to_string(),
        message: e.to_string(),
    })?;
    let wrap = |e: ScenarioError| match e {
        ScenarioError::Schema { path: p, message } => ScenarioError::Schema {
            path: format!("{path}: {p}"),
            message,
        },
        other => ScenarioError::Invalid(format!("{path}: {other}")),
    };
    ScenarioDef::from_json(&text)
        .map_err(wrap)?
        .build(settings)
        .map_err(wrap)
}
