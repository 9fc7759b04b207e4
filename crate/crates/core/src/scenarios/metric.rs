//! Riemannian metrics on a space, metric compatibility and symmetrization.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::covderiv::{torsion, CovDeriv, Provenance};
use crate::geometry::{At, GeomError, Sampling, ScalarField, Space, VectorField};
use crate::jets::Jet;
use crate::report::{sup_over_points, Deviation};

#[derive(Debug, Clone)]
enum Kind {
    /// Euclidean dot product of ambient components.
    Ambient,
    /// `g_ij` in the space's coordinates.
    Components(Vec<Vec<ScalarField>>),
}

/// A symmetric bilinear form on vector fields.
#[derive(Debug, Clone)]
pub struct Metric {
    space: Arc<Space>,
    kind: Kind,
}

impl Metric {
    /// The metric induced on an embedded space by the ambient dot product.
    pub fn ambient(space: &Arc<Space>) -> Self {
        Metric {
            space: space.clone(),
            kind: Kind::Ambient,
        }
    }

    /// A metric from coordinate components; must be square and symmetric as
    /// given.
    pub fn components(space: &Arc<Space>, g: Vec<Vec<ScalarField>>) -> Result<Self, GeomError> {
        let n = space.ambient_dim();
        if g.len() != n || g.iter().any(|r| r.len() != n) {
            return Err(GeomError::Shape(format!(
                "metric must be {n}×{n} on `{}`",
                space.name()
            )));
        }
        Ok(Metric {
            space: space.clone(),
            kind: Kind::Components(g),
        })
    }

    pub fn space(&self) -> &Arc<Space> {
        &self.space
    }

    /// `g(X, Y)` as a scalar field.
    pub fn pair(&self, x: &VectorField, y: &VectorField) -> ScalarField {
        let (g, x, y) = (self.clone(), x.clone(), y.clone());
        let name = format!("g({},{})", x.name(), y.name());
        ScalarField::from_fn(&self.space, name, move |at, depth| {
            let (xv, yv) = (x.eval(at, depth)?, y.eval(at, depth)?);
            g.contract(at, depth, &xv, &yv)
        })
    }

    fn contract(&self, at: &At<'_>, depth: usize, x: &[Jet], y: &[Jet]) -> Result<Jet, GeomError> {
        let mut acc = Jet::constant(0.0);
        match &self.kind {
            Kind::Ambient => {
                for (a, b) in x.iter().zip(y) {
                    acc = acc + a * b;
                }
            }
            Kind::Components(g) => {
                for (i, row) in g.iter().enumerate() {
                    for (j, gij) in row.iter().enumerate() {
                        acc = acc + gij.eval(at, depth)? * &x[i] * &y[j];
                    }
                }
            }
        }
        Ok(acc)
    }

    /// Largest `|g_ij - g_ji|` over the samples.
    pub fn asymmetry(&self, sampling: &Sampling) -> Result<Deviation, GeomError> {
        match &self.kind {
            Kind::Ambient => Ok(Deviation::zero()),
            Kind::Components(g) => sup_over_points(sampling, |at| {
                let mut m = 0.0_f64;
                for i in 0..g.len() {
                    for j in 0..i {
                        m = m.max((g[i][j].value(at)? - g[j][i].value(at)?).abs());
                    }
                }
                Ok(m)
            }),
        }
    }

    /// Smallest eigenvalue of `g` over the samples, restricted to the
    /// tangent space for embedded spaces. Positive iff positive-definite.
    pub fn min_eigenvalue(&self, sampling: &Sampling) -> Result<f64, GeomError> {
        let mut lowest = f64::INFINITY;
        for p in &sampling.points {
            let at = At::new(p, sampling.budget);
            let probes = self.space.tangent_probes(p);
            let n = self.space.ambient_dim();
            let g = match &self.kind {
                Kind::Ambient => DMatrix::identity(n, n),
                Kind::Components(g) => {
                    let mut m = DMatrix::zeros(n, n);
                    for i in 0..n {
                        for j in 0..n {
                            m[(i, j)] = 0.5 * (g[i][j].value(&at)? + g[j][i].value(&at)?);
                        }
                    }
                    m
                }
            };
            let lam = if self.space.embedding().is_some() {
                // orthonormal tangent basis from the projected probes
                let t = DMatrix::from_fn(n, probes.len(), |i, j| probes[j][i]);
                let svd = t.svd(true, false);
                let u = svd.u.expect("requested");
                let rank = svd.singular_values.iter().filter(|s| **s > 1e-8).count();
                let basis = u.columns(0, rank).into_owned();
                (basis.transpose() * g * basis)
                    .symmetric_eigenvalues()
                    .min()
            } else {
                g.symmetric_eigenvalues().min()
            };
            lowest = lowest.min(lam);
        }
        Ok(lowest)
    }
}

/// `X(g(Y,Z)) - g(∇_X Y, Z) - g(Y, ∇_X Z)`.
pub fn metric_compatibility_defect(
    nabla: &CovDeriv,
    g: &Metric,
    x: &VectorField,
    y: &VectorField,
    z: &VectorField,
) -> Result<ScalarField, GeomError> {
    let lhs = x.apply(&g.pair(y, z))?;
    let a = g.pair(&nabla.nabla(x, y)?, z);
    let b = g.pair(y, &nabla.nabla(x, z)?);
    lhs.sub(&a)?.sub(&b)
}

/// `∇'_X Y = ∇_X Y - ½T(X, Y)`, which has zero torsion.
pub fn symmetrize(nabla: &CovDeriv) -> CovDeriv {
    let inner = nabla.clone();
    CovDeriv::new(
        nabla.space(),
        format!("sym({})", nabla.name()),
        Provenance::Custom,
        move |x, y| inner.nabla(x, y)?.sub(&torsion(&inner, x, y)?.scale(0.5)),
    )
}
