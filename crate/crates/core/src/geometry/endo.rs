use std::fmt;
use std::sync::Arc;

use crate::jets::Jet;
use crate::linalg::{mat_mul, mat_vec, Matrix};

use super::field::{check_same, CovectorField, VectorField};
use super::space::{At, Space};
use super::GeomError;

type MatrixEval = dyn Fn(&At<'_>, usize) -> Result<Matrix<Jet>, GeomError> + Send + Sync;

/// A (1,1)-tensor held as its pointwise matrix `T^i_j` in the space's
/// coordinates, so that `T(X)^i = T^i_j X^j`.
#[derive(Clone)]
pub struct Endo11 {
    name: String,
    space: Arc<Space>,
    eval: Arc<MatrixEval>,
}

impl fmt::Debug for Endo11 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Endo11({})", self.name)
    }
}

impl Endo11 {
    pub fn from_fn(
        space: &Arc<Space>,
        name: impl Into<String>,
        f: impl Fn(&At<'_>, usize) -> Result<Matrix<Jet>, GeomError> + Send + Sync + 'static,
    ) -> Self {
        Endo11 {
            name: name.into(),
            space: space.clone(),
            eval: Arc::new(f),
        }
    }

    pub fn identity(space: &Arc<Space>) -> Self {
        let n = space.ambient_dim();
        Endo11::from_fn(space, "I", move |_, _| Ok(crate::linalg::identity(n)))
    }

    pub fn zero(space: &Arc<Space>) -> Self {
        let n = space.ambient_dim();
        Endo11::from_fn(space, "0", move |_, _| Ok(crate::linalg::zeros(n, n)))
    }

    /// `Σ ω_k ⊗ X_k`.
    pub fn from_terms(
        space: &Arc<Space>,
        name: impl Into<String>,
        terms: &[(CovectorField, VectorField)],
    ) -> Result<Self, GeomError> {
        for (w, x) in terms {
            check_same(space, w.space())?;
            check_same(space, x.space())?;
        }
        let terms = terms.to_vec();
        let n = space.ambient_dim();
        Ok(Endo11::from_fn(space, name, move |at, depth| {
            let mut m = crate::linalg::zeros::<Jet>(n, n);
            for (w, x) in &terms {
                let w = w.eval(at, depth)?;
                let x = x.eval(at, depth)?;
                for (i, xi) in x.iter().enumerate() {
                    for (j, wj) in w.iter().enumerate() {
                        m[i][j] = &m[i][j] + xi * wj;
                    }
                }
            }
            Ok(m)
        }))
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

    pub fn matrix(&self, at: &At<'_>, depth: usize) -> Result<Matrix<Jet>, GeomError> {
        (self.eval)(at, depth).map_err(|e| e.within(&self.name))
    }

    pub fn apply(&self, x: &VectorField) -> Result<VectorField, GeomError> {
        check_same(&self.space, x.space())?;
        let (t, x) = (self.clone(), x.clone());
        let name = format!("{}({})", self.name, x.name());
        Ok(VectorField::from_fn(&self.space, name, move |at, depth| {
            let m = t.matrix(at, depth)?;
            Ok(mat_vec(&m, &x.eval(at, depth)?))
        }))
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Endo11) -> Result<Endo11, GeomError> {
        check_same(&self.space, &other.space)?;
        let (a, b) = (self.clone(), other.clone());
        let name = format!("{}∘{}", self.name, other.name);
        Ok(Endo11::from_fn(&self.space, name, move |at, depth| {
            Ok(mat_mul(&a.matrix(at, depth)?, &b.matrix(at, depth)?))
        }))
    }

    fn zip(
        &self,
        other: &Endo11,
        name: String,
        op: impl Fn(&Jet, &Jet) -> Jet + Send + Sync + 'static,
    ) -> Result<Endo11, GeomError> {
        check_same(&self.space, &other.space)?;
        let (a, b) = (self.clone(), other.clone());
        Ok(Endo11::from_fn(&self.space, name, move |at, depth| {
            let (p, q) = (a.matrix(at, depth)?, b.matrix(at, depth)?);
            Ok(p.iter()
                .zip(&q)
                .map(|(r, s)| r.iter().zip(s).map(|(x, y)| op(x, y)).collect())
                .collect())
        }))
    }

    pub fn add(&self, other: &Endo11) -> Result<Endo11, GeomError> {
        self.zip(
            other,
            format!("({} + {})", self.name, other.name),
            |a, b| a + b,
        )
    }

    pub fn sub(&self, other: &Endo11) -> Result<Endo11, GeomError> {
        self.zip(
            other,
            format!("({} - {})", self.name, other.name),
            |a, b| a - b,
        )
    }

    pub fn scale(&self, c: f64) -> Endo11 {
        let t = self.clone();
        Endo11::from_fn(
            &self.space,
            format!("{c}*{}", self.name),
            move |at, depth| {
                Ok(t.matrix(at, depth)?
                    .into_iter()
                    .map(|r| r.into_iter().map(|x| x * c).collect())
                    .collect())
            },
        )
    }

    /// Sum of several endomorphisms; the empty sum is zero.
    pub fn sum(space: &Arc<Space>, parts: &[Endo11]) -> Result<Endo11, GeomError> {
        let mut acc = Endo11::zero(space);
        for (k, p) in parts.iter().enumerate() {
            acc = if k == 0 {
                check_same(space, p.space())?;
                p.clone()
            } else {
                acc.add(p)?
            };
        }
        Ok(acc)
    }

    /// `L_Γ T`, from
    /// `(L_Γ T)^i_j = Γ^k ∂_k T^i_j - T^k_j ∂_k Γ^i + T^i_k ∂_j Γ^k`.
    pub fn lie_derivative(&self, gamma: &VectorField) -> Result<Endo11, GeomError> {
        check_same(&self.space, gamma.space())?;
        let (t, g) = (self.clone(), gamma.clone());
        let name = format!("L_{}({})", gamma.name(), self.name);
        let n = self.space.ambient_dim();
        Ok(Endo11::from_fn(&self.space, name, move |at, depth| {
            let tm = t.matrix(at, depth + 1)?;
            let gv = g.eval(at, depth + 1)?;
            let tt: Vec<Vec<Jet>> = tm
                .iter()
                .map(|r| r.iter().map(|x| x.truncate(depth)).collect())
                .collect();
            let gt: Vec<Jet> = gv.iter().map(|x| x.truncate(depth)).collect();
            let dg: Vec<Vec<Jet>> = gv
                .iter()
                .map(|gi| (0..n).map(|k| gi.partial(k)).collect())
                .collect();
            let mut out = crate::linalg::zeros::<Jet>(n, n);
            for i in 0..n {
                for j in 0..n {
                    let mut acc = Jet::constant(0.0);
                    for k in 0..n {
                        acc = acc + &gt[k] * tm[i][j].partial(k) - &tt[k][j] * &dg[i][k]
                            + &tt[i][k] * &dg[k][j];
                    }
                    out[i][j] = acc.truncate(depth);
                }
            }
            Ok(out)
        }))
    }
}
