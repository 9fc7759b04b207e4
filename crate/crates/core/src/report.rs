//! Check records, sup-over-sample-points measurement, and report rendering.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::Serialize;

use crate::geometry::{At, GeomError, Sampling, VectorField};
use crate::jets::DEFAULT_DEPTH;
use crate::linalg::max_abs_diff;
use crate::par::map_points;

/// Default absolute tolerance for derivative-level checks.
pub const DEFAULT_TOL: f64 = 1e-8;

/// Fixed threshold used for structural identities while building objects.
pub const CONSTRUCTION_TOL: f64 = 1e-10;

/// Largest deviation over the sample points and where it occurred.
#[derive(Debug, Clone, PartialEq)]
pub struct Deviation {
    pub max_dev: f64,
    pub worst_point: Option<Vec<f64>>,
}

impl Deviation {
    pub fn zero() -> Self {
        Deviation {
            max_dev: 0.0,
            worst_point: None,
        }
    }

    /// Keeps the larger of the two; ties keep `self`.
    pub fn merge(self, other: Deviation) -> Deviation {
        if other.max_dev > self.max_dev || (other.max_dev.is_nan() && !self.max_dev.is_nan()) {
            other
        } else {
            self
        }
    }
}

/// Evaluates `f` at every sample point (in parallel when enabled) and
/// returns the supremum. The first error in point order wins. NaN counts as
/// an infinite deviation.
pub fn sup_over_points<F>(sampling: &Sampling, f: F) -> Result<Deviation, GeomError>
where
    F: Fn(&At<'_>) -> Result<f64, GeomError> + Sync + Send,
{
    let per_point = map_points(&sampling.points, |_, p| f(&At::new(p, sampling.budget)));
    let mut best = Deviation::zero();
    for (p, r) in sampling.points.iter().zip(per_point) {
        let d = r?;
        let d = if d.is_nan() { f64::INFINITY } else { d };
        if best.worst_point.is_none() || d > best.max_dev {
            best = Deviation {
                max_dev: d,
                worst_point: Some(p.clone()),
            };
        }
    }
    Ok(best)
}

/// Max component difference between two fields at a point.
pub fn field_gap(a: &VectorField, b: &VectorField, at: &At<'_>) -> Result<f64, GeomError> {
    Ok(max_abs_diff(&a.value(at)?, &b.value(at)?))
}

/// Max component size of a field at a point.
pub fn field_size(a: &VectorField, at: &At<'_>) -> Result<f64, GeomError> {
    Ok(crate::linalg::max_abs(&a.value(at)?))
}

/// Sup over points and pairs of `|lhs - rhs|`.
pub fn pairs_deviation(
    sampling: &Sampling,
    pairs: &[(VectorField, VectorField)],
) -> Result<Deviation, GeomError> {
    sup_over_points(sampling, |at| {
        pairs
            .iter()
            .try_fold(0.0_f64, |m, (a, b)| Ok(m.max(field_gap(a, b, at)?)))
    })
}

/// Sup over points and fields of the largest component.
pub fn zero_deviation(sampling: &Sampling, fields: &[VectorField]) -> Result<Deviation, GeomError> {
    sup_over_points(sampling, |at| {
        fields
            .iter()
            .try_fold(0.0_f64, |m, a| Ok(m.max(field_size(a, at)?)))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub check_id: String,
    pub paper_ref: String,
    pub max_dev: f64,
    pub threshold: f64,
    pub pass: bool,
    pub worst_point: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CheckRecord {
    /// Passes iff `max_dev < threshold`.
    pub fn measured(
        id: impl Into<String>,
        reference: impl Into<String>,
        threshold: f64,
        result: Result<Deviation, impl fmt::Display>,
    ) -> Self {
        match result {
            Ok(d) => CheckRecord {
                check_id: id.into(),
                paper_ref: reference.into(),
                pass: d.max_dev < threshold,
                max_dev: d.max_dev,
                threshold,
                worst_point: d.worst_point,
                error: None,
            },
            Err(e) => CheckRecord {
                check_id: id.into(),
                paper_ref: reference.into(),
                max_dev: f64::INFINITY,
                threshold,
                pass: false,
                worst_point: None,
                error: Some(e.to_string()),
            },
        }
    }

    /// Passes iff `min_dev > threshold`, used for "must be nonzero" controls.
    pub fn exceeds(
        id: impl Into<String>,
        reference: impl Into<String>,
        threshold: f64,
        result: Result<Deviation, impl fmt::Display>,
    ) -> Self {
        let mut r = CheckRecord::measured(id, reference, threshold, result);
        if r.error.is_none() {
            r.pass = r.max_dev > threshold;
        }
        r
    }

    /// A yes/no check with no numeric deviation.
    pub fn boolean(id: impl Into<String>, reference: impl Into<String>, pass: bool) -> Self {
        CheckRecord {
            check_id: id.into(),
            paper_ref: reference.into(),
            max_dev: if pass { 0.0 } else { 1.0 },
            threshold: 0.5,
            pass,
            worst_point: None,
            error: None,
        }
    }

    pub fn failed(
        id: impl Into<String>,
        reference: impl Into<String>,
        error: impl fmt::Display,
    ) -> Self {
        CheckRecord {
            check_id: id.into(),
            paper_ref: reference.into(),
            max_dev: f64::INFINITY,
            threshold: 0.0,
            pass: false,
            worst_point: None,
            error: Some(error.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Table,
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" => Ok(Format::Table),
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(format!(
                "unknown format `{other}` (expected table, json or csv)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub scenario: String,
    pub seed: u64,
    pub samples: usize,
    pub tol: f64,
    pub depth: usize,
    pub format: Format,
}

impl RunConfig {
    pub fn new(scenario: impl Into<String>) -> Self {
        RunConfig {
            scenario: scenario.into(),
            seed: crate::geometry::DEFAULT_SEED,
            samples: crate::geometry::DEFAULT_SAMPLES,
            tol: DEFAULT_TOL,
            depth: DEFAULT_DEPTH,
            format: Format::Table,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.samples < 1 {
            return Err("samples must be at least 1".into());
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err("tolerance must be positive".into());
        }
        if self.depth < 1 {
            return Err("depth must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub config: RunConfig,
    pub summary: Summary,
    pub checks: Vec<CheckRecord>,
}

fn fmt_point(p: &Option<Vec<f64>>) -> String {
    match p {
        Some(p) => p
            .iter()
            .map(|x| format!("{x:.6}"))
            .collect::<Vec<_>>()
            .join(" "),
        None => String::new(),
    }
}

impl Report {
    pub fn new(config: RunConfig, checks: Vec<CheckRecord>) -> Self {
        let passed = checks.iter().filter(|c| c.pass).count();
        Report {
            config,
            summary: Summary {
                total: checks.len(),
                passed,
                failed: checks.len() - passed,
            },
            checks,
        }
    }

    pub fn all_passed(&self) -> bool {
        self.summary.failed == 0
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn get(&self, id: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.check_id == id)
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(self).expect("report serializes");
                s.push('\n');
                s
            }
            Format::Csv => {
                let mut s = String::from("check_id,paper_ref,max_dev,threshold,pass,worst_point\n");
                for c in &self.checks {
                    let _ = writeln!(
                        s,
                        "{},{},{:e},{:e},{},{}",
                        csv_field(&c.check_id),
                        csv_field(&c.paper_ref),
                        c.max_dev,
                        c.threshold,
                        c.pass,
                        csv_field(&fmt_point(&c.worst_point))
                    );
                }
                s
            }
            Format::Table => {
                let mut s = String::new();
                for c in &self.checks {
                    let _ = write!(
                        s,
                        "{}: {}  max_dev={:.3e} threshold={:.1e}  [{}]",
                        c.check_id,
                        if c.pass { "pass" } else { "FAIL" },
                        c.max_dev,
                        c.threshold,
                        c.paper_ref
                    );
                    if let Some(e) = &c.error {
                        let _ = write!(s, "  error: {e}");
                    }
                    s.push('\n');
                }
                let _ = writeln!(
                    s,
                    "{} checks, {} passed, {} failed",
                    self.summary.total, self.summary.passed, self.summary.failed
                );
                s
            }
        }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_counts_match_records() {
        let checks = vec![
            CheckRecord::boolean("a", "r", true),
            CheckRecord::boolean("b", "r", false),
            CheckRecord::failed("c", "r", "boom"),
        ];
        let r = Report::new(RunConfig::new("x"), checks);
        assert_eq!(
            r.summary,
            Summary {
                total: 3,
                passed: 1,
                failed: 2
            }
        );
        assert!(!r.all_passed());
        assert!(r.render(Format::Table).contains("a: pass"));
        assert!(r
            .render(Format::Csv)
            .starts_with("check_id,paper_ref,max_dev,threshold,pass,worst_point\n"));
    }

    #[test]
    fn nan_is_a_failure() {
        let r = CheckRecord::measured(
            "n",
            "r",
            1e-8,
            Ok::<_, String>(Deviation {
                max_dev: f64::NAN,
                worst_point: None,
            }),
        );
        assert!(!r.pass);
    }
}
