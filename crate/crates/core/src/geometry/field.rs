use std::fmt;
use std::sync::Arc;

use crate::expr::Expr;
use crate::jets::Jet;

use super::space::{At, Space};
use super::GeomError;

type ScalarEval = dyn Fn(&At<'_>, usize) -> Result<Jet, GeomError> + Send + Sync;
type ComponentEval = dyn Fn(&At<'_>, usize) -> Result<Vec<Jet>, GeomError> + Send + Sync;

pub(crate) fn check_same(a: &Space, b: &Space) -> Result<(), GeomError> {
    if a.same_as(b) {
        Ok(())
    } else {
        Err(GeomError::SpaceMismatch {
            left: a.name().to_string(),
            right: b.name().to_string(),
        })
    }
}

fn tag<T>(name: &str, r: Result<T, GeomError>) -> Result<T, GeomError> {
    r.map_err(|e| e.within(name))
}

/// Binds an expression's free variables to coordinate slots.
fn bind(space: &Space, expr: &Expr) -> Result<Vec<(String, usize)>, GeomError> {
    expr.free_vars()
        .into_iter()
        .map(|v| space.index_of(&v).map(|i| (v, i)))
        .collect()
}

fn eval_bound(
    expr: &Expr,
    slots: &[(String, usize)],
    seeds: &[Jet],
    field: &str,
) -> Result<Jet, GeomError> {
    expr.eval_with(&|name: &str| {
        slots
            .iter()
            .find(|(v, _)| v == name)
            .map(|&(_, i)| seeds[i].clone())
    })
    .map_err(|source| GeomError::Eval {
        field: field.to_string(),
        source,
    })
}

#[derive(Clone)]
pub struct ScalarField {
    name: String,
    space: Arc<Space>,
    eval: Arc<ScalarEval>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarField({})", self.name)
    }
}

impl ScalarField {
    pub fn from_fn(
        space: &Arc<Space>,
        name: impl Into<String>,
        f: impl Fn(&At<'_>, usize) -> Result<Jet, GeomError> + Send + Sync + 'static,
    ) -> Self {
        ScalarField {
            name: name.into(),
            space: space.clone(),
            eval: Arc::new(f),
        }
    }

    pub fn from_expr(space: &Arc<Space>, expr: Expr) -> Result<Self, GeomError> {
        let slots = bind(space, &expr)?;
        let name = expr.to_string();
        let label = name.clone();
        Ok(ScalarField::from_fn(space, name, move |at, depth| {
            let seeds = at.seed(depth)?;
            eval_bound(&expr, &slots, &seeds, &label)
        }))
    }

    pub fn parse(space: &Arc<Space>, text: &str) -> Result<Self, GeomError> {
        let expr = crate::expr::parse(text)?;
        ScalarField::from_expr(space, expr)
    }

    pub fn constant(space: &Arc<Space>, c: f64) -> Self {
        ScalarField::from_fn(space, format!("{c}"), move |_, _| Ok(Jet::constant(c)))
    }

    pub fn coordinate(space: &Arc<Space>, i: usize) -> Self {
        let name = space.coords()[i].clone();
        ScalarField::from_fn(space, name, move |at, depth| {
            Ok(at.seed(depth)?.swap_remove(i))
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn space(&self) -> &Arc<Space> {
        &self.space
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn eval(&self, at: &At<'_>, depth: usize) -> Result<Jet, GeomError> {
        tag(&self.name, (self.eval)(at, depth))
    }

    pub fn value(&self, at: &At<'_>) -> Result<f64, GeomError> {
        Ok(self.eval(at, 0)?.value())
    }

    /// `∂f/∂x^j` for coordinate slot `j`.
    pub fn partial(&self, j: usize) -> ScalarField {
        let f = self.clone();
        let name = format!("d{}({})", self.space.coords()[j], self.name);
        ScalarField::from_fn(&self.space, name, move |at, depth| {
            Ok(f.eval(at, depth + 1)?.partial(j).truncate(depth))
        })
    }

    fn zip(
        &self,
        other: &ScalarField,
        name: String,
        op: impl Fn(Jet, Jet) -> Jet + Send + Sync + 'static,
    ) -> Result<ScalarField, GeomError> {
        check_same(&self.space, &other.space)?;
        let (a, b) = (self.clone(), other.clone());
        Ok(ScalarField::from_fn(&self.space, name, move |at, depth| {
            Ok(op(a.eval(at, depth)?, b.eval(at, depth)?))
        }))
    }

    pub fn add(&self, other: &ScalarField) -> Result<ScalarField, GeomError> {
        self.zip(
            other,
            format!("({} + {})", self.name, other.name),
            |a, b| a + b,
        )
    }

    pub fn sub(&self, other: &ScalarField) -> Result<ScalarField, GeomError> {
        self.zip(
            other,
            format!("({} - {})", self.name, other.name),
            |a, b| a - b,
        )
    }

    pub fn mul(&self, other: &ScalarField) -> Result<ScalarField, GeomError> {
        self.zip(other, format!("{} * {}", self.name, other.name), |a, b| {
            a * b
        })
    }

    pub fn scale(&self, c: f64) -> ScalarField {
        let f = self.clone();
        ScalarField::from_fn(
            &self.space,
            format!("{c} * {}", self.name),
            move |at, depth| Ok(f.eval(at, depth)? * c),
        )
    }
}

/// A tangent vector field, components in the space's coordinates (ambient
/// coordinates for embedded spaces).
#[derive(Clone)]
pub struct VectorField {
    name: String,
    space: Arc<Space>,
    eval: Arc<ComponentEval>,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VectorField({})", self.name)
    }
}

impl VectorField {
    pub fn from_fn(
        space: &Arc<Space>,
        name: impl Into<String>,
        f: impl Fn(&At<'_>, usize) -> Result<Vec<Jet>, GeomError> + Send + Sync + 'static,
    ) -> Self {
        VectorField {
            name: name.into(),
            space: space.clone(),
            eval: Arc::new(f),
        }
    }

    pub fn from_exprs(
        space: &Arc<Space>,
        name: impl Into<String>,
        components: Vec<Expr>,
    ) -> Result<Self, GeomError> {
        if components.len() != space.ambient_dim() {
            return Err(GeomError::Shape(format!(
                "field has {} components, space `{}` has {} coordinates",
                components.len(),
                space.name(),
                space.ambient_dim()
            )));
        }
        let bound = components
            .into_iter()
            .map(|e| bind(space, &e).map(|slots| (e, slots)))
            .collect::<Result<Vec<_>, _>>()?;
        let name = name.into();
        let label = name.clone();
        Ok(VectorField::from_fn(space, name, move |at, depth| {
            let seeds = at.seed(depth)?;
            bound
                .iter()
                .map(|(e, slots)| {
                    if e.is_zero() {
                        Ok(Jet::constant(0.0))
                    } else {
                        eval_bound(e, slots, &seeds, &label)
                    }
                })
                .collect()
        }))
    }

    /// Parses one component expression per coordinate.
    pub fn parse(
        space: &Arc<Space>,
        name: impl Into<String>,
        components: &[&str],
    ) -> Result<Self, GeomError> {
        let exprs = components
            .iter()
            .map(|c| crate::expr::parse(c))
            .collect::<Result<Vec<_>, _>>()?;
        VectorField::from_exprs(space, name, exprs)
    }

    /// The coordinate field `∂/∂x^i`.
    pub fn coordinate(space: &Arc<Space>, i: usize) -> Self {
        let n = space.ambient_dim();
        let name = format!("d/d{}", space.coords()[i]);
        VectorField::from_fn(space, name, move |_, _| {
            Ok((0..n)
                .map(|j| Jet::constant(if i == j { 1.0 } else { 0.0 }))
                .collect())
        })
    }

    pub fn zero(space: &Arc<Space>) -> Self {
        let n = space.ambient_dim();
        VectorField::from_fn(space, "0", move |_, _| Ok(vec![Jet::constant(0.0); n]))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn space(&self) -> &Arc<Space> {
        &self.space
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn eval(&self, at: &At<'_>, depth: usize) -> Result<Vec<Jet>, GeomError> {
        tag(&self.name, (self.eval)(at, depth))
    }

    pub fn value(&self, at: &At<'_>) -> Result<Vec<f64>, GeomError> {
        Ok(self.eval(at, 0)?.iter().map(Jet::value).collect())
    }

    /// `[X, Y]^i = X^j ∂_j Y^i - Y^j ∂_j X^i`.
    pub fn bracket(&self, other: &VectorField) -> Result<VectorField, GeomError> {
        check_same(&self.space, &other.space)?;
        let (x, y) = (self.clone(), other.clone());
        let name = format!("[{},{}]", self.name, other.name);
        Ok(VectorField::from_fn(&self.space, name, move |at, depth| {
            let xs = x.eval(at, depth + 1)?;
            let ys = y.eval(at, depth + 1)?;
            Ok(bracket_components(&xs, &ys, depth))
        }))
    }

    /// The derivative `X(f)`.
    pub fn apply(&self, f: &ScalarField) -> Result<ScalarField, GeomError> {
        check_same(&self.space, f.space())?;
        let (x, f) = (self.clone(), f.clone());
        let name = format!("{}({})", self.name, f.name());
        Ok(ScalarField::from_fn(&self.space, name, move |at, depth| {
            let xs = x.eval(at, depth)?;
            let fj = f.eval(at, depth + 1)?;
            Ok(directional(&xs, &fj, depth))
        }))
    }

    fn zip(
        &self,
        other: &VectorField,
        name: String,
        op: impl Fn(Jet, Jet) -> Jet + Send + Sync + 'static,
    ) -> Result<VectorField, GeomError> {
        check_same(&self.space, &other.space)?;
        let (a, b) = (self.clone(), other.clone());
        Ok(VectorField::from_fn(&self.space, name, move |at, depth| {
            let (u, v) = (a.eval(at, depth)?, b.eval(at, depth)?);
            Ok(u.into_iter().zip(v).map(|(p, q)| op(p, q)).collect())
        }))
    }

    pub fn add(&self, other: &VectorField) -> Result<VectorField, GeomError> {
        self.zip(
            other,
            format!("({} + {})", self.name, other.name),
            |a, b| a + b,
        )
    }

    pub fn sub(&self, other: &VectorField) -> Result<VectorField, GeomError> {
        self.zip(
            other,
            format!("({} - {})", self.name, other.name),
            |a, b| a - b,
        )
    }

    pub fn scale(&self, c: f64) -> VectorField {
        let x = self.clone();
        VectorField::from_fn(
            &self.space,
            format!("{c}*{}", self.name),
            move |at, depth| Ok(x.eval(at, depth)?.into_iter().map(|v| v * c).collect()),
        )
    }

    /// `f X`.
    pub fn times(&self, f: &ScalarField) -> Result<VectorField, GeomError> {
        check_same(&self.space, f.space())?;
        let (x, f) = (self.clone(), f.clone());
        let name = format!("{}*{}", f.name(), self.name);
        Ok(VectorField::from_fn(&self.space, name, move |at, depth| {
            let c = f.eval(at, depth)?;
            Ok(x.eval(at, depth)?.into_iter().map(|v| &c * v).collect())
        }))
    }

    /// Sum of several fields; the empty sum is zero.
    pub fn sum(space: &Arc<Space>, fields: &[VectorField]) -> Result<VectorField, GeomError> {
        for f in fields {
            check_same(space, f.space())?;
        }
        let fields = fields.to_vec();
        let n = space.ambient_dim();
        let name = fields
            .iter()
            .map(|f| f.name.as_str())
            .collect::<Vec<_>>()
            .join(" + ");
        Ok(VectorField::from_fn(
            space,
            format!("({name})"),
            move |at, depth| {
                let mut acc = vec![Jet::constant(0.0); n];
                for f in &fields {
                    for (a, v) in acc.iter_mut().zip(f.eval(at, depth)?) {
                        *a = &*a + v;
                    }
                }
                Ok(acc)
            },
        ))
    }
}

pub(crate) fn bracket_components(xs: &[Jet], ys: &[Jet], depth: usize) -> Vec<Jet> {
    let n = xs.len();
    let xt: Vec<Jet> = xs.iter().map(|v| v.truncate(depth)).collect();
    let yt: Vec<Jet> = ys.iter().map(|v| v.truncate(depth)).collect();
    (0..n)
        .map(|i| {
            let mut acc = Jet::constant(0.0);
            for j in 0..n {
                acc = acc + &xt[j] * ys[i].partial(j) - &yt[j] * xs[i].partial(j);
            }
            acc.truncate(depth)
        })
        .collect()
}

pub(crate) fn directional(xs: &[Jet], f: &Jet, depth: usize) -> Jet {
    let mut acc = Jet::constant(0.0);
    for (j, x) in xs.iter().enumerate() {
        acc = acc + x.truncate(depth) * f.partial(j);
    }
    acc.truncate(depth)
}

/// A 1-form, components in the space's coordinates.
#[derive(Clone)]
pub struct CovectorField {
    name: String,
    space: Arc<Space>,
    eval: Arc<ComponentEval>,
}

impl fmt::Debug for CovectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CovectorField({})", self.name)
    }
}

impl CovectorField {
    pub fn from_fn(
        space: &Arc<Space>,
        name: impl Into<String>,
        f: impl Fn(&At<'_>, usize) -> Result<Vec<Jet>, GeomError> + Send + Sync + 'static,
    ) -> Self {
        CovectorField {
            name: name.into(),
            space: space.clone(),
            eval: Arc::new(f),
        }
    }

    /// The differential `dx^i`.
    pub fn differential(space: &Arc<Space>, i: usize) -> Self {
        let n = space.ambient_dim();
        let name = format!("d{}", space.coords()[i]);
        CovectorField::from_fn(space, name, move |_, _| {
            Ok((0..n)
                .map(|j| Jet::constant(if i == j { 1.0 } else { 0.0 }))
                .collect())
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn space(&self) -> &Arc<Space> {
        &self.space
    }

    pub fn eval(&self, at: &At<'_>, depth: usize) -> Result<Vec<Jet>, GeomError> {
        tag(&self.name, (self.eval)(at, depth))
    }

    pub fn value(&self, at: &At<'_>) -> Result<Vec<f64>, GeomError> {
        Ok(self.eval(at, 0)?.iter().map(Jet::value).collect())
    }

    /// The function `ω(X)`.
    pub fn apply(&self, x: &VectorField) -> Result<ScalarField, GeomError> {
        check_same(&self.space, x.space())?;
        let (w, x) = (self.clone(), x.clone());
        let name = format!("{}({})", self.name, x.name());
        Ok(ScalarField::from_fn(&self.space, name, move |at, depth| {
            let a = w.eval(at, depth)?;
            let b = x.eval(at, depth)?;
            Ok(a.into_iter()
                .zip(b)
                .fold(Jet::constant(0.0), |acc, (p, q)| acc + p * q))
        }))
    }
}
