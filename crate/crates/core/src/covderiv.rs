//! Covariant derivatives assembled from submodule derivatives, the generic
//! K/L engine, torsion, Ehresmann curvature, and derivatives of
//! endomorphisms.

use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::connection::{EhresmannConnection, SplitStructure};
use crate::geometry::{
    CovectorField, Endo11, GeomError, Sampling, ScalarField, Space, VectorField,
};
use crate::jets::Jet;
use crate::report::{
    pairs_deviation, sup_over_points, zero_deviation, CheckRecord, Deviation, CONSTRUCTION_TOL,
};

/// Threshold for numeric membership `|P(Y) - Y|`.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CovDerivError {
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error("`{field}` is not in the image of `{projector}` (|P(Y) - Y| = {residual:e})")]
    NotInImage {
        field: String,
        projector: String,
        residual: f64,
    },
    #[error("projectors do not sum to the identity (deviation {deviation:e} at {point:?})")]
    ProjectorSum {
        deviation: f64,
        point: Option<Vec<f64>>,
    },
    #[error("rank mismatch: {0}")]
    Rank(String),
}

pub type Rule =
    Arc<dyn Fn(&VectorField, &VectorField) -> Result<VectorField, GeomError> + Send + Sync>;

/// How a [`CovDeriv`] was put together.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Prop1Extension,
    Thm1Glue,
    Thm2Pair,
    Prop2Nfold,
    Thm3,
    Thm4,
    Custom,
}

/// A derivative defined for arguments in the image of a projector.
#[derive(Clone)]
pub struct SubmoduleDeriv {
    name: String,
    projector: Endo11,
    rule: Rule,
}

impl fmt::Debug for SubmoduleDeriv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "SubmoduleDeriv({} on Img {})",
            self.name,
            self.projector.name()
        )
    }
}

impl SubmoduleDeriv {
    pub fn new(
        name: impl Into<String>,
        projector: Endo11,
        rule: impl Fn(&VectorField, &VectorField) -> Result<VectorField, GeomError>
            + Send
            + Sync
            + 'static,
    ) -> Self {
        SubmoduleDeriv {
            name: name.into(),
            projector,
            rule: Arc::new(rule),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn projector(&self) -> &Endo11 {
        &self.projector
    }

    pub fn nabla(&self, x: &VectorField, y: &VectorField) -> Result<VectorField, GeomError> {
        Ok((self.rule)(x, y)?.renamed(format!("{}_{}{}", self.name, x.name(), y.name())))
    }

    /// As [`SubmoduleDeriv::nabla`], after checking `Y ∈ Img(P)` at the
    /// sample points.
    pub fn nabla_checked(
        &self,
        x: &VectorField,
        y: &VectorField,
        sampling: &Sampling,
    ) -> Result<VectorField, CovDerivError> {
        check_membership(&self.projector, y, sampling)?;
        Ok(self.nabla(x, y)?)
    }

    /// Adds the tensorial term `ω(X) T(Y)`. With `T` mapping into a
    /// complement of `Img(P)` this breaks `∇^B_X Y ∈ Img(P_B)`; used as a
    /// negative control.
    pub fn with_leak(&self, omega: CovectorField, t: Endo11) -> SubmoduleDeriv {
        let base = self.clone();
        SubmoduleDeriv::new(
            format!("{}+leak", self.name),
            self.projector.clone(),
            move |x, y| {
                let leak = t.apply(y)?.times(&omega.apply(x)?)?;
                base.nabla(x, y)?.add(&leak)
            },
        )
    }
}

/// Fails unless `|P(Y) - Y| < MEMBERSHIP_TOL` at every sample point.
pub fn check_membership(
    p: &Endo11,
    y: &VectorField,
    sampling: &Sampling,
) -> Result<(), CovDerivError> {
    let d = pairs_deviation(sampling, &[(p.apply(y)?, y.clone())])?;
    if d.max_dev < MEMBERSHIP_TOL {
        Ok(())
    } else {
        Err(CovDerivError::NotInImage {
            field: y.name().to_string(),
            projector: p.name().to_string(),
            residual: d.max_dev,
        })
    }
}

/// `∇̄_X Y = ∇_{P(X)} Y + P([X - P(X), Y])`, defined for every `X` and
/// `Y ∈ Img(P)`.
pub fn extend_prop1(d: &SubmoduleDeriv) -> SubmoduleDeriv {
    let inner = d.clone();
    let p = d.projector.clone();
    SubmoduleDeriv::new(format!("{}̄", d.name), p.clone(), move |x, y| {
        let px = p.apply(x)?;
        let rest = x.sub(&px)?;
        inner.nabla(&px, y)?.add(&p.apply(&rest.bracket(y)?)?)
    })
}

/// An affine connection: maps a pair of fields to a field.
#[derive(Clone)]
pub struct CovDeriv {
    name: String,
    space: Arc<Space>,
    provenance: Provenance,
    rule: Rule,
}

impl fmt::Debug for CovDeriv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CovDeriv({}, {:?})", self.name, self.provenance)
    }
}

impl CovDeriv {
    pub fn new(
        space: &Arc<Space>,
        name: impl Into<String>,
        provenance: Provenance,
        rule: impl Fn(&VectorField, &VectorField) -> Result<VectorField, GeomError>
            + Send
            + Sync
            + 'static,
    ) -> Self {
        CovDeriv {
            name: name.into(),
            space: space.clone(),
            provenance,
            rule: Arc::new(rule),
        }
    }

    /// The coordinate derivative `∇_X Y = X(Y^i) ∂_i`.
    pub fn flat(space: &Arc<Space>) -> Self {
        CovDeriv::new(space, "∇0", Provenance::Custom, |x, y| {
            let (xc, yc) = (x.clone(), y.clone());
            Ok(VectorField::from_fn(x.space(), "", move |at, depth| {
                let xs = xc.eval(at, depth)?;
                let ys = yc.eval(at, depth + 1)?;
                Ok(ys
                    .iter()
                    .map(|yi| {
                        let mut acc = Jet::constant(0.0);
                        for (j, xj) in xs.iter().enumerate() {
                            acc = acc + xj * yi.partial(j);
                        }
                        acc.truncate(depth)
                    })
                    .collect())
            }))
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn space(&self) -> &Arc<Space> {
        &self.space
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn nabla(&self, x: &VectorField, y: &VectorField) -> Result<VectorField, GeomError> {
        Ok((self.rule)(x, y)?.renamed(format!("∇_{}{}", x.name(), y.name())))
    }
}

/// `∇_X Y = Σ_A ∇̄^A_X(P_A(Y))` over already-extended parts. Checks that the
/// projectors sum to the identity on tangent vectors.
pub fn glue_thm1(parts: &[SubmoduleDeriv], sampling: &Sampling) -> Result<CovDeriv, CovDerivError> {
    let space = parts
        .first()
        .ok_or_else(|| CovDerivError::Rank("no parts to glue".into()))?
        .projector
        .space()
        .clone();
    let total = Endo11::sum(
        &space,
        &parts
            .iter()
            .map(|p| p.projector.clone())
            .collect::<Vec<_>>(),
    )?;
    let d = sup_over_points(sampling, |at| {
        let m = crate::linalg::values(&total.matrix(at, 0)?);
        let mut worst = 0.0_f64;
        for v in space.tangent_probes(at.point) {
            let pv = crate::linalg::mat_vec(&m, &v);
            worst = worst.max(crate::linalg::max_abs_diff(&pv, &v));
        }
        Ok(worst)
    })?;
    if d.max_dev >= CONSTRUCTION_TOL {
        return Err(CovDerivError::ProjectorSum {
            deviation: d.max_dev,
            point: d.worst_point,
        });
    }
    Ok(glue_unchecked(&space, parts, Provenance::Thm1Glue))
}

/// Sums the parts without checking that their projectors add up to the identity.
pub fn glue_unchecked(
    space: &Arc<Space>,
    parts: &[SubmoduleDeriv],
    provenance: Provenance,
) -> CovDeriv {
    let parts = parts.to_vec();
    let name = if parts.len() == 1 {
        parts[0].name.clone()
    } else {
        "∇".to_string()
    };
    let sp = space.clone();
    CovDeriv::new(space, name, provenance, move |x, y| {
        let terms = parts
            .iter()
            .map(|p| p.nabla(x, &p.projector.apply(y)?))
            .collect::<Result<Vec<_>, _>>()?;
        VectorField::sum(&sp, &terms)
    })
}

/// `∇^K_X Y = S([X, Q(Y)])` on `K` and `∇^{L_A}_X Y = Q_A([X, S_A(Y)])` on
/// each `L_A`.
pub fn nabla_nfold_prop2(split: &SplitStructure) -> (SubmoduleDeriv, Vec<SubmoduleDeriv>) {
    let (s, q) = (split.s().clone(), split.q().clone());
    let k = SubmoduleDeriv::new(
        format!("∇^{}", split.k().name()),
        split.p_k().clone(),
        move |x, y| s.apply(&x.bracket(&q.apply(y)?)?),
    );
    let ls = (0..split.n_blocks())
        .map(|a| {
            let (s_a, q_a) = (split.s_parts()[a].clone(), split.q_parts()[a].clone());
            SubmoduleDeriv::new(
                format!("∇^{}", split.blocks()[a].name()),
                split.p_blocks()[a].clone(),
                move |x, y| q_a.apply(&x.bracket(&s_a.apply(y)?)?),
            )
        })
        .collect();
    (k, ls)
}

/// The pair `(∇^K, ∇^L)` of a single-block split.
pub fn nabla_pair_thm2(
    split: &SplitStructure,
) -> Result<(SubmoduleDeriv, SubmoduleDeriv), CovDerivError> {
    if split.n_blocks() != 1 {
        return Err(CovDerivError::Rank(format!(
            "pair construction needs one block, got {}",
            split.n_blocks()
        )));
    }
    let (k, mut ls) = nabla_nfold_prop2(split);
    Ok((k, ls.remove(0)))
}

/// Extended parts of the generic engine, `P_K` first.
pub fn engine_parts(split: &SplitStructure) -> Vec<SubmoduleDeriv> {
    let (k, ls) = nabla_nfold_prop2(split);
    std::iter::once(k)
        .chain(ls)
        .map(|d| extend_prop1(&d))
        .collect()
}

fn engine(
    split: &SplitStructure,
    provenance: Provenance,
    sampling: &Sampling,
) -> Result<CovDeriv, CovDerivError> {
    let mut d = glue_thm1(&engine_parts(split), sampling)?;
    d.provenance = provenance;
    Ok(d)
}

/// Equal-rank total derivative
/// `S([P_V X, Q Y]) + P_V([P_H X, P_V Y]) + Q([P_H X, S Y]) + P_H([P_V X, P_H Y])`.
pub fn nabla_total_thm3(
    split: &SplitStructure,
    sampling: &Sampling,
) -> Result<CovDeriv, CovDerivError> {
    if split.n_blocks() != 1 {
        return Err(CovDerivError::Rank(format!(
            "equal-rank construction needs dim V = dim H, got {} blocks",
            split.n_blocks()
        )));
    }
    engine(split, Provenance::Thm3, sampling)
}

/// N-fold total derivative
/// `S([P_K X, Q Y]) + P_K([X - P_K X, P_K Y])
///  + Σ_A ( Q_A([P_A X, S_A Y]) + P_A([X - P_A X, P_A Y]) )`,
/// with `K = V` or `K = H` according to the split's orientation.
pub fn nabla_total_thm4(
    split: &SplitStructure,
    sampling: &Sampling,
) -> Result<CovDeriv, CovDerivError> {
    engine(split, Provenance::Thm4, sampling)
}

/// `T(X, Y) = ∇_X Y - ∇_Y X - [X, Y]`.
pub fn torsion(
    nabla: &CovDeriv,
    x: &VectorField,
    y: &VectorField,
) -> Result<VectorField, GeomError> {
    Ok(nabla
        .nabla(x, y)?
        .sub(&nabla.nabla(y, x)?)?
        .sub(&x.bracket(y)?)?
        .renamed(format!("T({},{})", x.name(), y.name())))
}

/// `R(X, Y) = P_V([P_H X, P_H Y])`.
pub fn ehresmann_curvature(
    conn: &EhresmannConnection,
    x: &VectorField,
    y: &VectorField,
) -> Result<VectorField, GeomError> {
    let (px, py) = (conn.p_h().apply(x)?, conn.p_h().apply(y)?);
    Ok(conn
        .p_v()
        .apply(&px.bracket(&py)?)?
        .renamed(format!("R({},{})", x.name(), y.name())))
}

/// `(∇_X T)(Y) = ∇_X(T(Y)) - T(∇_X Y)`.
pub fn nabla_of_endo(
    nabla: &CovDeriv,
    t: &Endo11,
    x: &VectorField,
    y: &VectorField,
) -> Result<VectorField, GeomError> {
    Ok(nabla
        .nabla(x, &t.apply(y)?)?
        .sub(&t.apply(&nabla.nabla(x, y)?)?)?
        .renamed(format!("(∇_{} {})({})", x.name(), t.name(), y.name())))
}

/// Both sides of the equivalence `∇P_B = 0 ⇔ ∇^B_X Y ∈ Img(P_B)`.
#[derive(Debug, Clone)]
pub struct Cor23Report {
    pub nabla_p: CheckRecord,
    pub image: CheckRecord,
}

impl Cor23Report {
    /// The two sides pass or fail together.
    pub fn agree(&self) -> bool {
        self.nabla_p.pass == self.image.pass
    }
}

/// Evaluates `max |(∇_X P_B)(Y)|` over frame arguments and
/// `max |P_B(∇^B_X Y) - ∇^B_X Y|` over `X, Y ∈ P_B(frame)`.
pub fn check_cor23(
    parts: &[SubmoduleDeriv],
    nabla: &CovDeriv,
    b: usize,
    frame: &[VectorField],
    sampling: &Sampling,
    threshold: f64,
) -> Cor23Report {
    let part = &parts[b];
    let p = &part.projector;
    let lhs = (|| {
        let mut fields = Vec::new();
        for x in frame {
            for y in frame {
                fields.push(nabla_of_endo(nabla, p, x, y)?);
            }
        }
        zero_deviation(sampling, &fields)
    })();
    let rhs = (|| {
        let img = frame
            .iter()
            .map(|e| p.apply(e))
            .collect::<Result<Vec<_>, _>>()?;
        let mut pairs = Vec::new();
        for x in &img {
            for y in &img {
                let d = part.nabla(x, y)?;
                pairs.push((p.apply(&d)?, d));
            }
        }
        pairs_deviation(sampling, &pairs)
    })();
    let label = p.name().to_string();
    Cor23Report {
        nabla_p: CheckRecord::measured(
            format!("cor23.nabla-p[{label}]"),
            format!("∇{label} = 0"),
            threshold,
            lhs,
        ),
        image: CheckRecord::measured(
            format!("cor23.image[{label}]"),
            format!("block derivative stays in Img {label}"),
            threshold,
            rhs,
        ),
    }
}

/// Deterministic choice of at most `limit` ordered pairs from `0..n`.
pub fn sample_pairs(n: usize, limit: usize, seed: u64) -> Vec<(usize, usize)> {
    let mut all: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    if all.len() > limit {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        all.shuffle(&mut rng);
        all.truncate(limit);
        all.sort_unstable();
    }
    all
}

/// Function-linearity, Leibniz rule and additivity of `∇` on the given
/// argument pairs and test functions.
pub fn axiom_suite(
    nabla: &CovDeriv,
    fields: &[VectorField],
    pairs: &[(usize, usize)],
    functions: &[ScalarField],
    sampling: &Sampling,
    threshold: f64,
) -> Vec<CheckRecord> {
    let f_linear = (|| {
        let mut out = Vec::new();
        for &(i, j) in pairs {
            let (x, y) = (&fields[i], &fields[j]);
            let nxy = nabla.nabla(x, y)?;
            for f in functions {
                out.push((nabla.nabla(&x.times(f)?, y)?, nxy.times(f)?));
            }
        }
        pairs_deviation(sampling, &out)
    })();
    let leibniz = (|| {
        let mut out = Vec::new();
        for &(i, j) in pairs {
            let (x, y) = (&fields[i], &fields[j]);
            let nxy = nabla.nabla(x, y)?;
            for f in functions {
                let rhs = y.times(&x.apply(f)?)?.add(&nxy.times(f)?)?;
                out.push((nabla.nabla(x, &y.times(f)?)?, rhs));
            }
        }
        pairs_deviation(sampling, &out)
    })();
    let additive = (|| {
        let mut out = Vec::new();
        for &(i, j) in pairs {
            let (x, y) = (&fields[i], &fields[j]);
            let z = &fields[(i + j + 1) % fields.len()];
            out.push((
                nabla.nabla(&x.add(z)?, y)?,
                nabla.nabla(x, y)?.add(&nabla.nabla(z, y)?)?,
            ));
            out.push((
                nabla.nabla(x, &y.add(z)?)?,
                nabla.nabla(x, y)?.add(&nabla.nabla(x, z)?)?,
            ));
        }
        pairs_deviation(sampling, &out)
    })();
    vec![
        CheckRecord::measured(
            "axioms.function-linear",
            "∇_{fX}Y = f∇_X Y",
            threshold,
            f_linear,
        ),
        CheckRecord::measured(
            "axioms.leibniz",
            "∇_X(fY) = X(f)Y + f∇_X Y",
            threshold,
            leibniz,
        ),
        CheckRecord::measured(
            "axioms.additive",
            "additivity in both slots",
            threshold,
            additive,
        ),
    ]
}

/// Antisymmetry and function-linearity of the torsion.
pub fn torsion_suite(
    nabla: &CovDeriv,
    fields: &[VectorField],
    pairs: &[(usize, usize)],
    functions: &[ScalarField],
    sampling: &Sampling,
    threshold: f64,
) -> Vec<CheckRecord> {
    let antisym = (|| {
        let mut out = Vec::new();
        for &(i, j) in pairs {
            let (x, y) = (&fields[i], &fields[j]);
            out.push(torsion(nabla, x, y)?.add(&torsion(nabla, y, x)?)?);
        }
        zero_deviation(sampling, &out)
    })();
    let linear = (|| {
        let mut out = Vec::new();
        for &(i, j) in pairs {
            let (x, y) = (&fields[i], &fields[j]);
            let t = torsion(nabla, x, y)?;
            for f in functions {
                out.push((torsion(nabla, &x.times(f)?, y)?, t.times(f)?));
                out.push((torsion(nabla, x, &y.times(f)?)?, t.times(f)?));
            }
        }
        pairs_deviation(sampling, &out)
    })();
    vec![
        CheckRecord::measured(
            "torsion.antisymmetric",
            "T(X,Y) = -T(Y,X)",
            threshold,
            antisym,
        ),
        CheckRecord::measured(
            "torsion.tensorial",
            "T(fX,Y) = T(X,fY) = fT(X,Y)",
            threshold,
            linear,
        ),
    ]
}

/// Relation between the vertical torsion on horizontal arguments and the
/// Ehresmann curvature. With the derivatives built here the relation holds
/// as `P_V∘T(P_H X, P_H Y) = -R(X, Y)`; the sign is a convention choice in
/// the statement `= R(X, Y)`, which only agrees where `R` vanishes.
pub fn curvature_suite(
    nabla: &CovDeriv,
    conn: &EhresmannConnection,
    fields: &[VectorField],
    pairs: &[(usize, usize)],
    sampling: &Sampling,
    threshold: f64,
) -> Vec<CheckRecord> {
    let identity = (|| {
        let mut out = Vec::new();
        for &(i, j) in pairs {
            let (x, y) = (&fields[i], &fields[j]);
            let (hx, hy) = (conn.p_h().apply(x)?, conn.p_h().apply(y)?);
            let lhs = conn.p_v().apply(&torsion(nabla, &hx, &hy)?)?;
            out.push((lhs, ehresmann_curvature(conn, x, y)?.scale(-1.0)));
        }
        pairs_deviation(sampling, &out)
    })();
    let shape = (|| {
        let mut out = Vec::new();
        for &(i, j) in pairs {
            let (x, y) = (&fields[i], &fields[j]);
            let r = ehresmann_curvature(conn, x, y)?;
            out.push((
                r.add(&ehresmann_curvature(conn, y, x)?)?,
                VectorField::zero(x.space()),
            ));
            out.push((conn.p_v().apply(&r)?, r));
        }
        pairs_deviation(sampling, &out)
    })();
    vec![
        CheckRecord::measured(
            "curvature.vertical-torsion",
            "P_V∘T(P_H X, P_H Y) = -R(X,Y)",
            threshold,
            identity,
        ),
        CheckRecord::measured(
            "curvature.shape",
            "R antisymmetric and vertical",
            threshold,
            shape,
        ),
    ]
}

/// `max |(∇_X T)(Y)|` over the argument pairs, for each endomorphism.
pub fn parallel_endos(
    nabla: &CovDeriv,
    endos: &[Endo11],
    fields: &[VectorField],
    pairs: &[(usize, usize)],
    sampling: &Sampling,
) -> Result<Deviation, GeomError> {
    let mut out = Vec::new();
    for t in endos {
        for &(i, j) in pairs {
            out.push(nabla_of_endo(nabla, t, &fields[i], &fields[j])?);
        }
    }
    zero_deviation(sampling, &out)
}
