use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::expr::Expr;
use crate::jets::{seed_point, Jet};

use super::GeomError;

/// Default number of sample points per verification run.
pub const DEFAULT_SAMPLES: usize = 20;
/// Default sampler seed.
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq)]
pub enum Sampler {
    /// Independent uniform draw per coordinate.
    Box(Vec<(f64, f64)>),
    /// Uniform draw from `[-1, 1]^n`, rejected below norm `min_norm`,
    /// then normalised onto the unit sphere.
    UnitSphere { min_norm: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Embedding {
    /// `Σ x_i² = 1` in the ambient coordinates.
    UnitSphere,
}

/// A chart (or, for embedded spaces, the ambient coordinates) together with
/// how to sample it and what fibration it carries.
pub struct Space {
    name: String,
    coords: Vec<String>,
    sampler: Sampler,
    embedding: Option<Embedding>,
    base: Option<Vec<usize>>,
    projection: Option<Vec<Expr>>,
}

impl fmt::Debug for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Space")
            .field("name", &self.name)
            .field("coords", &self.coords)
            .field("embedding", &self.embedding)
            .finish()
    }
}

fn valid_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl Space {
    pub fn chart<S: Into<String>>(
        name: impl Into<String>,
        coords: impl IntoIterator<Item = S>,
    ) -> Result<Self, GeomError> {
        let coords: Vec<String> = coords.into_iter().map(Into::into).collect();
        for (i, c) in coords.iter().enumerate() {
            if !valid_ident(c) {
                return Err(GeomError::Invalid(format!(
                    "coordinate name `{c}` is not an identifier"
                )));
            }
            if coords[..i].contains(c) {
                return Err(GeomError::Invalid(format!("duplicate coordinate `{c}`")));
            }
        }
        let n = coords.len();
        Ok(Space {
            name: name.into(),
            coords,
            sampler: Sampler::Box(vec![(-1.0, 1.0); n]),
            embedding: None,
            base: None,
            projection: None,
        })
    }

    /// The unit sphere in the ambient space spanned by `coords`.
    pub fn unit_sphere<S: Into<String>>(
        name: impl Into<String>,
        coords: impl IntoIterator<Item = S>,
    ) -> Result<Self, GeomError> {
        let mut s = Space::chart(name, coords)?;
        s.embedding = Some(Embedding::UnitSphere);
        s.sampler = Sampler::UnitSphere { min_norm: 0.1 };
        Ok(s)
    }

    pub fn with_interval(mut self, coord: &str, lo: f64, hi: f64) -> Result<Self, GeomError> {
        let i = self.index_of(coord)?;
        match &mut self.sampler {
            Sampler::Box(iv) => iv[i] = (lo, hi),
            Sampler::UnitSphere { .. } => {
                return Err(GeomError::Invalid(
                    "sphere sampler has no coordinate intervals".into(),
                ))
            }
        }
        Ok(self)
    }

    /// Marks the named coordinates as base coordinates of a fibred chart.
    pub fn with_base(mut self, base: &[&str]) -> Result<Self, GeomError> {
        let idx = base
            .iter()
            .map(|c| self.index_of(c))
            .collect::<Result<Vec<_>, _>>()?;
        self.base = Some(idx);
        Ok(self)
    }

    /// Attaches the bundle projection as coordinate expressions.
    pub fn with_projection(mut self, projection: Vec<Expr>) -> Result<Self, GeomError> {
        for e in &projection {
            for v in e.free_vars() {
                self.index_of(&v)?;
            }
        }
        self.projection = Some(projection);
        Ok(self)
    }

    pub fn into_shared(self) -> Arc<Space> {
        Arc::new(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn coords(&self) -> &[String] {
        &self.coords
    }

    /// Number of coordinates the fields are expressed in.
    pub fn ambient_dim(&self) -> usize {
        self.coords.len()
    }

    /// Manifold dimension.
    pub fn dim(&self) -> usize {
        match self.embedding {
            Some(Embedding::UnitSphere) => self.coords.len() - 1,
            None => self.coords.len(),
        }
    }

    pub fn embedding(&self) -> Option<Embedding> {
        self.embedding
    }

    pub fn sampler(&self) -> &Sampler {
        &self.sampler
    }

    pub fn base(&self) -> Option<&[usize]> {
        self.base.as_deref()
    }

    pub fn projection(&self) -> Option<&[Expr]> {
        self.projection.as_deref()
    }

    pub fn index_of(&self, coord: &str) -> Result<usize, GeomError> {
        self.coords
            .iter()
            .position(|c| c == coord)
            .ok_or_else(|| GeomError::UnknownCoordinate {
                name: coord.to_string(),
                available: self.coords.clone(),
            })
    }

    pub fn same_as(&self, other: &Space) -> bool {
        std::ptr::eq(self, other) || (self.name == other.name && self.coords == other.coords)
    }

    /// Deterministic sample points.
    pub fn sample(&self, seed: u64, count: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.coords.len();
        (0..count)
            .map(|_| match &self.sampler {
                Sampler::Box(iv) => iv.iter().map(|&(lo, hi)| rng.gen_range(lo..hi)).collect(),
                Sampler::UnitSphere { min_norm } => loop {
                    let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if r >= *min_norm {
                        break v.into_iter().map(|x| x / r).collect();
                    }
                },
            })
            .collect()
    }

    /// Largest constraint violation at `p` (zero for charts).
    pub fn constraint_residual(&self, p: &[f64]) -> f64 {
        match self.embedding {
            Some(Embedding::UnitSphere) => (p.iter().map(|x| x * x).sum::<f64>() - 1.0).abs(),
            None => 0.0,
        }
    }

    /// Checks arity and constraint residual against `tol`, then projects
    /// exactly onto the constraint set.
    pub fn accept_point(&self, p: &[f64], tol: f64) -> Result<Vec<f64>, GeomError> {
        if p.len() != self.coords.len() {
            return Err(GeomError::Shape(format!(
                "point has {} coordinates, space `{}` has {}",
                p.len(),
                self.name,
                self.coords.len()
            )));
        }
        let residual = self.constraint_residual(p);
        if residual > tol {
            return Err(GeomError::OffManifold {
                point: p.to_vec(),
                residual,
            });
        }
        Ok(match self.embedding {
            Some(Embedding::UnitSphere) => {
                let r = p.iter().map(|x| x * x).sum::<f64>().sqrt();
                p.iter().map(|x| x / r).collect()
            }
            None => p.to_vec(),
        })
    }

    /// Vectors spanning the tangent space at `p`: coordinate directions,
    /// projected onto the tangent space for embedded spaces.
    pub fn tangent_probes(&self, p: &[f64]) -> Vec<Vec<f64>> {
        let n = self.coords.len();
        (0..n)
            .map(|i| {
                let mut e: Vec<f64> = (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect();
                if let Some(Embedding::UnitSphere) = self.embedding {
                    for (ej, pj) in e.iter_mut().zip(p) {
                        *ej -= p[i] * pj;
                    }
                }
                e
            })
            .collect()
    }

    /// Unit normals of the constraint set at the seed point (position vector
    /// for the unit sphere), as jets of the requested depth.
    pub(crate) fn normals(&self, at: &At<'_>, depth: usize) -> Result<Vec<Vec<Jet>>, GeomError> {
        match self.embedding {
            Some(Embedding::UnitSphere) => Ok(vec![at.seed(depth)?]),
            None => Ok(Vec::new()),
        }
    }
}

/// Evaluation site: a point plus the depth budget that bounds how deep any
/// field below it may be differentiated.
#[derive(Debug, Clone, Copy)]
pub struct At<'a> {
    pub point: &'a [f64],
    pub budget: usize,
}

impl<'a> At<'a> {
    pub fn new(point: &'a [f64], budget: usize) -> Self {
        At { point, budget }
    }

    pub fn seed(&self, depth: usize) -> Result<Vec<Jet>, GeomError> {
        if depth > self.budget {
            return Err(GeomError::DepthExceeded {
                requested: depth,
                budget: self.budget,
                chain: Vec::new(),
            });
        }
        Ok(seed_point(self.point, depth))
    }
}

/// A fixed set of sample points and the jet depth budget used to evaluate
/// at them.
#[derive(Debug, Clone)]
pub struct Sampling {
    pub points: Vec<Vec<f64>>,
    pub budget: usize,
}

impl Sampling {
    pub fn new(space: &Space, seed: u64, count: usize, budget: usize) -> Self {
        Sampling {
            points: space.sample(seed, count),
            budget,
        }
    }

    pub fn standard(space: &Space) -> Self {
        Sampling::new(
            space,
            DEFAULT_SEED,
            DEFAULT_SAMPLES,
            crate::jets::DEFAULT_DEPTH,
        )
    }

    pub fn at(&self, i: usize) -> At<'_> {
        At::new(&self.points[i], self.budget)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_samples_lie_on_sphere() {
        let s = Space::unit_sphere("S3", ["x", "y", "z", "w"]).unwrap();
        for p in s.sample(7, 50) {
            assert!(s.constraint_residual(&p) < 1e-12);
        }
        assert_eq!(s.dim(), 3);
    }

    #[test]
    fn sampling_is_deterministic_and_respects_intervals() {
        let s = Space::chart("E", ["x", "w"])
            .unwrap()
            .with_interval("w", 0.5, 1.5)
            .unwrap();
        let a = s.sample(42, 20);
        assert_eq!(a, s.sample(42, 20));
        assert!(a
            .iter()
            .all(|p| (0.5..1.5).contains(&p[1]) && (-1.0..1.0).contains(&p[0])));
    }

    #[test]
    fn rejects_bad_coordinates() {
        assert!(Space::chart("E", ["x", "x"]).is_err());
        assert!(Space::chart("E", ["1x"]).is_err());
    }

    #[test]
    fn accept_point_projects_onto_sphere() {
        let s = Space::unit_sphere("S3", ["x", "y", "z", "w"]).unwrap();
        let p = s.accept_point(&[1.0 + 1e-9, 0.0, 0.0, 0.0], 1e-8).unwrap();
        assert_eq!(p, vec![1.0, 0.0, 0.0, 0.0]);
        assert!(s.accept_point(&[1.1, 0.0, 0.0, 0.0], 1e-8).is_err());
    }

    #[test]
    fn depth_budget_enforced() {
        let p = [0.0];
        let at = At::new(&p, 1);
        assert!(at.seed(1).is_ok());
        assert!(matches!(
            at.seed(2),
            Err(GeomError::DepthExceeded {
                requested: 2,
                budget: 1,
                ..
            })
        ));
    }
}
