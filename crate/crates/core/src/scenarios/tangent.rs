//! Connections on a tangent bundle `TM` with coordinates `(x^a, u^a)`:
//! induced by an affine connection, general nonlinear, and the connection
//! of a second-order equation field.

use std::sync::Arc;

use indexmap::IndexMap;

use crate::connection::Orientation;
use crate::covderiv::torsion;
use crate::expr::Expr;
use crate::geometry::{CovectorField, Endo11, Sampling, ScalarField, Space, VectorField};
use crate::jets::Jet;
use crate::report::{pairs_deviation, sup_over_points, zero_deviation, CheckRecord, Deviation};

use super::{Expected, Family, Op, Parts, Scenario, ScenarioError, Settings};

/// `TM` over an `n`-dimensional base: coordinates `x1..xn, u1..un`.
pub fn tangent_space(n: usize) -> Result<Arc<Space>, ScenarioError> {
    if n == 0 {
        return Err(ScenarioError::Invalid(
            "dimension must be at least 1".into(),
        ));
    }
    let coords: Vec<String> = (1..=n)
        .map(|a| format!("x{a}"))
        .chain((1..=n).map(|a| format!("u{a}")))
        .collect();
    let base: Vec<String> = coords[..n].to_vec();
    let base: Vec<&str> = base.iter().map(String::as_str).collect();
    Ok(Space::chart(format!("TM{n}"), coords)?
        .with_base(&base)?
        .into_shared())
}

fn h(a: usize) -> String {
    format!("H{}", a + 1)
}

fn v(a: usize) -> String {
    format!("V{}", a + 1)
}

fn sf(space: &Arc<Space>, e: &Expr) -> Result<ScalarField, ScenarioError> {
    Ok(ScalarField::from_expr(space, e.clone())?)
}

fn sum_fields(space: &Arc<Space>, terms: Vec<ScalarField>) -> Result<ScalarField, ScenarioError> {
    let mut acc = ScalarField::constant(space, 0.0);
    for t in terms {
        acc = acc.add(&t)?;
    }
    Ok(acc)
}

/// Base-coordinate check for coefficients that must live on `M`.
pub(crate) fn require_base_only(
    space: &Space,
    n: usize,
    e: &Expr,
    what: &str,
) -> Result<(), ScenarioError> {
    for var in e.free_vars() {
        let i = space.index_of(&var)?;
        if i >= n {
            return Err(ScenarioError::Invalid(format!(
                "{what} `{e}` uses fibre coordinate `{var}`; coefficients must depend on the base only"
            )));
        }
    }
    Ok(())
}

/// `Δ = u^a V_a`.
fn dilation(space: &Arc<Space>, n: usize) -> VectorField {
    VectorField::from_fn(space, "Delta", move |at, depth| {
        let seeds = at.seed(depth)?;
        Ok((0..2 * n)
            .map(|i| {
                if i < n {
                    Jet::constant(0.0)
                } else {
                    seeds[i].clone()
                }
            })
            .collect())
    })
}

/// `Δ(f) = u^a ∂f/∂u^a`.
fn apply_dilation(
    space: &Arc<Space>,
    n: usize,
    f: &ScalarField,
) -> Result<ScalarField, ScenarioError> {
    let terms = (0..n)
        .map(|a| ScalarField::coordinate(space, n + a).mul(&f.partial(n + a)))
        .collect::<Result<Vec<_>, _>>()?;
    sum_fields(space, terms)
}

/// `H_a = ∂/∂x^a - Γ^b_a ∂/∂u^b` from coefficients indexed `[b][a]`.
fn horizontal_fields(space: &Arc<Space>, n: usize, gamma: &[Vec<ScalarField>]) -> Vec<VectorField> {
    (0..n)
        .map(|a| {
            let col: Vec<ScalarField> = (0..n).map(|b| gamma[b][a].clone()).collect();
            VectorField::from_fn(space, h(a), move |at, depth| {
                let mut out = vec![Jet::constant(0.0); 2 * n];
                out[a] = Jet::constant(1.0);
                for (b, g) in col.iter().enumerate() {
                    out[n + b] = -g.eval(at, depth)?;
                }
                Ok(out)
            })
        })
        .collect()
}

fn frame_fields(
    space: &Arc<Space>,
    n: usize,
    horizontal: Vec<VectorField>,
) -> IndexMap<String, VectorField> {
    let mut fields = IndexMap::new();
    for (a, f) in horizontal.into_iter().enumerate() {
        fields.insert(h(a), f.renamed(h(a)));
    }
    for a in 0..n {
        fields.insert(v(a), VectorField::coordinate(space, n + a).renamed(v(a)));
    }
    fields
}

#[allow(clippy::too_many_arguments)]
fn tangent_parts(
    name: &str,
    description: String,
    reference: &str,
    space: Arc<Space>,
    n: usize,
    fields: IndexMap<String, VectorField>,
    expected: Vec<Expected>,
    notes: Vec<String>,
    family: Family,
) -> Parts {
    Parts {
        name: name.to_string(),
        description,
        reference: reference.to_string(),
        space,
        fields,
        orientation: Orientation::KVertical,
        k: (0..n).map(v).collect(),
        blocks: vec![(0..n).map(h).collect()],
        pairing: None,
        expected,
        metric: None,
        notes,
        family,
    }
}

/// Rows shared by every tangent-bundle scenario: the vertical derivatives
/// vanish, and so does the torsion off `H × H`.
fn vertical_rows(n: usize, reference: &str) -> Vec<Expected> {
    let mut rows = Vec::new();
    for a in 0..n {
        for b in 0..n {
            rows.push(Expected::new(
                Op::Nabla,
                v(a),
                v(b),
                vec![],
                "nabla(V_a,V_b)",
                format!("∇_(V_a) V_b = 0 ({reference})"),
            ));
            rows.push(Expected::new(
                Op::Nabla,
                v(a),
                h(b),
                vec![],
                "nabla(V_a,H_b)",
                format!("∇_(V_a) H_b = 0 ({reference})"),
            ));
            rows.push(Expected::new(
                Op::Torsion,
                v(a),
                v(b),
                vec![],
                "torsion(V_a,V_b)",
                "T(V_a,V_b) = 0",
            ));
            rows.push(Expected::new(
                Op::Torsion,
                v(a),
                h(b),
                vec![],
                "torsion(V_a,H_b)",
                "T(V_a,H_b) = 0",
            ));
        }
    }
    rows
}

/// `B^c_{dab} = (∂_bΓ^c_{ad} - ∂_aΓ^c_{bd}) + (Γ^e_{ad}Γ^c_{be} - Γ^e_{bd}Γ^c_{ae})`,
/// indexed `[c][d][a][b]`, evaluated straight from the coefficients.
pub(crate) fn curvature_oracle(
    g: &[Vec<Vec<ScalarField>>],
) -> Result<Vec<Vec<Vec<Vec<ScalarField>>>>, ScenarioError> {
    let n = g.len();
    let mut out = Vec::with_capacity(n);
    for c in 0..n {
        let mut by_d = Vec::with_capacity(n);
        for d in 0..n {
            let mut by_a = Vec::with_capacity(n);
            for a in 0..n {
                let mut by_b = Vec::with_capacity(n);
                for b in 0..n {
                    let mut t = g[c][a][d].partial(b).sub(&g[c][b][d].partial(a))?;
                    for e in 0..n {
                        t = t
                            .add(&g[e][a][d].mul(&g[c][b][e])?)?
                            .sub(&g[e][b][d].mul(&g[c][a][e])?)?;
                    }
                    by_b.push(t);
                }
                by_a.push(by_b);
            }
            by_d.push(by_a);
        }
        out.push(by_d);
    }
    Ok(out)
}

const AFFINE_REF: &str = "affine connection with torsion on TM";

/// `TM` with the horizontal distribution `H_a = ∂x^a - Γ^c_{ab}u^b ∂u^c` of an
/// affine connection. `gamma[a][b][c]` is `Γ^a_{bc}` in the base coordinates
/// `x1..xn`.
pub fn affine_tangent(
    n: usize,
    gamma: Vec<Vec<Vec<Expr>>>,
    settings: Settings,
) -> Result<Scenario, ScenarioError> {
    let space = tangent_space(n)?;
    if gamma.len() != n
        || gamma
            .iter()
            .any(|r| r.len() != n || r.iter().any(|s| s.len() != n))
    {
        return Err(ScenarioError::Invalid(format!(
            "affine coefficients must be {n}×{n}×{n}"
        )));
    }
    for e in gamma.iter().flatten().flatten() {
        require_base_only(&space, n, e, "connection coefficient")?;
    }
    let g: Vec<Vec<Vec<ScalarField>>> = gamma
        .iter()
        .map(|r| {
            r.iter()
                .map(|s| {
                    s.iter()
                        .map(|e| sf(&space, e))
                        .collect::<Result<Vec<_>, _>>()
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;
    let u = |d: usize| ScalarField::coordinate(&space, n + d);

    // nonlinear coefficients Γ^c_a = Γ^c_{ab} u^b, indexed [c][a]
    let nl: Vec<Vec<ScalarField>> = (0..n)
        .map(|c| {
            (0..n)
                .map(|a| {
                    sum_fields(
                        &space,
                        (0..n)
                            .map(|b| g[c][a][b].mul(&u(b)))
                            .collect::<Result<_, _>>()?,
                    )
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;
    let horizontal = horizontal_fields(&space, n, &nl);
    let mut fields = frame_fields(&space, n, horizontal);
    fields.insert("Delta".into(), dilation(&space, n));

    let big_b = curvature_oracle(&g)?;
    let mut rows = vertical_rows(n, AFFINE_REF);
    for a in 0..n {
        for b in 0..n {
            let comps =
                |f: &dyn Fn(usize) -> String| (0..n).map(|c| (f(c), g[c][a][b].clone())).collect();
            rows.push(Expected::new(
                Op::Nabla,
                h(a),
                v(b),
                comps(&v),
                "nabla(H_a,V_b)",
                "∇_(H_a) V_b = Γ^c_ab V_c",
            ));
            rows.push(Expected::new(
                Op::Nabla,
                h(a),
                h(b),
                comps(&h),
                "nabla(H_a,H_b)",
                "∇_(H_a) H_b = Γ^c_ab H_c",
            ));
            rows.push(Expected::new(
                Op::Bracket,
                h(a),
                v(b),
                comps(&v),
                "bracket(H_a,V_b)",
                "[H_a,V_b] = Γ^c_ab V_c",
            ));
            let mut curv = Vec::new();
            for c in 0..n {
                let t = sum_fields(
                    &space,
                    (0..n)
                        .map(|d| big_b[c][d][a][b].mul(&u(d)))
                        .collect::<Result<_, _>>()?,
                )?;
                curv.push((v(c), t));
            }
            rows.push(Expected::new(
                Op::Bracket,
                h(a),
                h(b),
                curv.clone(),
                "bracket(H_a,H_b)",
                "[H_a,H_b] = -R^c_dab u^d V_c",
            ));
            rows.push(Expected::new(
                Op::Curvature,
                h(a),
                h(b),
                curv.clone(),
                "curvature(H_a,H_b)",
                "R(H_a,H_b) = P_V [H_a,H_b]",
            ));
            let mut tors = Vec::new();
            for c in 0..n {
                tors.push((h(c), g[c][a][b].sub(&g[c][b][a])?));
            }
            for (name, t) in curv {
                tors.push((name, t.scale(-1.0)));
            }
            rows.push(Expected::new(
                Op::Torsion,
                h(a),
                h(b),
                tors,
                "torsion(H_a,H_b)",
                "T(H_a,H_b) = (Γ^c_ab - Γ^c_ba) H_c - [curvature] u^d V_c",
            ));
        }
    }
    let description = format!(
        "TM over a {n}-manifold, horizontal lift of an affine connection with coefficients {}",
        list_exprs(gamma.iter().flatten().flatten())
    );
    Scenario::assemble(
        tangent_parts(
            "affine-tangent",
            description,
            AFFINE_REF,
            space,
            n,
            fields,
            rows,
            vec![],
            Family::Affine { n },
        ),
        settings,
    )
}

fn list_exprs<'a>(es: impl Iterator<Item = &'a Expr>) -> String {
    es.map(|e| e.to_string()).collect::<Vec<_>>().join(", ")
}

const NONLINEAR_REF: &str = "nonlinear connection on TM";

/// Expected rows of a nonlinear connection with coefficients `gamma[b][a]`.
fn nonlinear_rows(
    n: usize,
    gamma: &[Vec<ScalarField>],
    reference: &str,
) -> Result<Vec<Expected>, ScenarioError> {
    let vb = |f: &ScalarField, b: usize| f.partial(n + b);
    // H_a(f) = ∂f/∂x^a - Γ^d_a ∂f/∂u^d
    let ha = |f: &ScalarField, a: usize| -> Result<ScalarField, ScenarioError> {
        let mut t = f.partial(a);
        for d in 0..n {
            t = t.sub(&gamma[d][a].mul(&f.partial(n + d))?)?;
        }
        Ok(t)
    };
    let mut rows = vertical_rows(n, reference);
    for a in 0..n {
        for b in 0..n {
            let dv: Vec<ScalarField> = (0..n).map(|c| vb(&gamma[c][a], b)).collect();
            let comps = |f: &dyn Fn(usize) -> String| {
                dv.iter()
                    .enumerate()
                    .map(|(c, s)| (f(c), s.clone()))
                    .collect()
            };
            rows.push(Expected::new(
                Op::Nabla,
                h(a),
                v(b),
                comps(&v),
                "nabla(H_a,V_b)",
                "∇_(H_a) V_b = V_b(Γ^c_a) V_c",
            ));
            rows.push(Expected::new(
                Op::Nabla,
                h(a),
                h(b),
                comps(&h),
                "nabla(H_a,H_b)",
                "∇_(H_a) H_b = V_b(Γ^c_a) H_c",
            ));
            rows.push(Expected::new(
                Op::Bracket,
                h(a),
                v(b),
                comps(&v),
                "bracket(H_a,V_b)",
                "[H_a,V_b] = V_b(Γ^c_a) V_c",
            ));
            let mut curv = Vec::new();
            let mut tors = Vec::new();
            for c in 0..n {
                // [H_a,H_b]^c = H_b(Γ^c_a) - H_a(Γ^c_b)
                curv.push((v(c), ha(&gamma[c][a], b)?.sub(&ha(&gamma[c][b], a)?)?));
                tors.push((h(c), vb(&gamma[c][a], b).sub(&vb(&gamma[c][b], a))?));
            }
            rows.push(Expected::new(
                Op::Curvature,
                h(a),
                h(b),
                curv.clone(),
                "curvature(H_a,H_b)",
                "R(H_a,H_b) = P_V [H_a,H_b]",
            ));
            rows.push(Expected::new(
                Op::Bracket,
                h(a),
                h(b),
                curv.clone(),
                "bracket(H_a,H_b)",
                "[H_a,H_b] = (H_b(Γ^c_a) - H_a(Γ^c_b)) V_c",
            ));
            for (name, t) in curv {
                tors.push((name, t.scale(-1.0)));
            }
            rows.push(Expected::new(
                Op::Torsion,
                h(a),
                h(b),
                tors,
                "torsion(H_a,H_b)",
                "P_H T(H_a,H_b) = (V_b(Γ^c_a) - V_a(Γ^c_b)) H_c, vertical part -R(H_a,H_b)",
            ));
        }
    }
    Ok(rows)
}

/// A nonlinear connection on `TM` from coefficient fields `gamma[b][a] = Γ^b_a`
/// defined on [`tangent_space`]`(n)`.
pub fn nonlinear_from_fields(
    n: usize,
    gamma: Vec<Vec<ScalarField>>,
    settings: Settings,
) -> Result<Scenario, ScenarioError> {
    let space = tangent_space(n)?;
    if gamma.len() != n || gamma.iter().any(|r| r.len() != n) {
        return Err(ScenarioError::Invalid(format!(
            "nonlinear coefficients must be {n}×{n}"
        )));
    }
    for g in gamma.iter().flatten() {
        if !g.space().same_as(&space) {
            return Err(ScenarioError::Invalid(format!(
                "coefficient `{}` is not defined on TM{n}",
                g.name()
            )));
        }
    }
    let horizontal = horizontal_fields(&space, n, &gamma);
    let mut fields = frame_fields(&space, n, horizontal);
    fields.insert("Delta".into(), dilation(&space, n));
    let rows = nonlinear_rows(n, &gamma, NONLINEAR_REF)?;
    let description = format!(
        "TM over a {n}-manifold, nonlinear connection with coefficients {}",
        gamma
            .iter()
            .flatten()
            .map(|g| g.name().to_string())
            .collect::<Vec<_>>()
            .join(", ")
    );
    Scenario::assemble(
        tangent_parts(
            "nonlinear-tangent",
            description,
            NONLINEAR_REF,
            space,
            n,
            fields,
            rows,
            vec![],
            Family::Nonlinear { n, gamma },
        ),
        settings,
    )
}

/// A nonlinear connection `H_a = ∂x^a - Γ^b_a ∂u^b` with `gamma[b][a] = Γ^b_a`
/// given as expressions in `x1..xn, u1..un`.
pub fn nonlinear_tangent(
    n: usize,
    gamma: Vec<Vec<Expr>>,
    settings: Settings,
) -> Result<Scenario, ScenarioError> {
    let space = tangent_space(n)?;
    let g = gamma
        .iter()
        .map(|r| {
            r.iter()
                .map(|e| sf(&space, e))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    nonlinear_from_fields(n, g, settings)
}

/// The nonlinear connection with `Γ^c_a = V_a(-½ f^c)`, whose horizontal
/// torsion vanishes.
pub fn nonlinear_from_potential(
    n: usize,
    f: Vec<Expr>,
    settings: Settings,
) -> Result<Scenario, ScenarioError> {
    let space = tangent_space(n)?;
    if f.len() != n {
        return Err(ScenarioError::Invalid(format!(
            "need {n} potential functions"
        )));
    }
    let f = f
        .iter()
        .map(|e| sf(&space, e))
        .collect::<Result<Vec<_>, _>>()?;
    let gamma = (0..n)
        .map(|c| (0..n).map(|a| f[c].partial(n + a).scale(-0.5)).collect())
        .collect();
    nonlinear_from_fields(n, gamma, settings)
}

/// A second-order equation field with its canonical objects and the
/// horizontal projector `½(I - L_Γ S)`.
#[derive(Debug, Clone)]
pub struct SodeConnection {
    pub n: usize,
    /// `Γ = u^a ∂x^a + f^a ∂u^a`
    pub gamma: VectorField,
    pub forces: Vec<ScalarField>,
    /// `S = dx^a ⊗ V_a`
    pub s: Endo11,
    /// `Δ = u^a V_a`
    pub delta: VectorField,
    pub p_h: Endo11,
}

impl SodeConnection {
    pub(crate) fn new(
        space: &Arc<Space>,
        n: usize,
        forces: Vec<ScalarField>,
    ) -> Result<Self, ScenarioError> {
        let fs = forces.clone();
        let gamma = VectorField::from_fn(space, "Gamma", move |at, depth| {
            let seeds = at.seed(depth)?;
            let mut out = Vec::with_capacity(2 * n);
            for a in 0..n {
                out.push(seeds[n + a].clone());
            }
            for f in &fs {
                out.push(f.eval(at, depth)?);
            }
            Ok(out)
        });
        let terms: Vec<(CovectorField, VectorField)> = (0..n)
            .map(|a| {
                (
                    CovectorField::differential(space, a),
                    VectorField::coordinate(space, n + a),
                )
            })
            .collect();
        let s = Endo11::from_terms(space, "S", &terms)?;
        let p_h = Endo11::identity(space)
            .sub(&s.lie_derivative(&gamma)?)?
            .scale(0.5)
            .renamed("½(I - L_Γ S)");
        Ok(SodeConnection {
            n,
            gamma,
            forces,
            s,
            delta: dilation(space, n),
            p_h,
        })
    }

    /// `Υ^b_a = -½ ∂f^b/∂u^a`, indexed `[b][a]`.
    pub fn upsilon(&self) -> Vec<Vec<ScalarField>> {
        let n = self.n;
        self.forces
            .iter()
            .map(|f| (0..n).map(|a| f.partial(n + a).scale(-0.5)).collect())
            .collect()
    }

    /// `P_H(∂x^a)` for each `a`.
    pub fn horizontal(&self) -> Result<Vec<VectorField>, ScenarioError> {
        let space = self.gamma.space().clone();
        (0..self.n)
            .map(|a| {
                Ok(self
                    .p_h
                    .apply(&VectorField::coordinate(&space, a))?
                    .renamed(h(a)))
            })
            .collect()
    }

    /// Largest `|S(Γ) - Δ|`.
    pub fn sode_defect(&self, sampling: &Sampling) -> Result<Deviation, ScenarioError> {
        Ok(pairs_deviation(
            sampling,
            &[(self.s.apply(&self.gamma)?, self.delta.clone())],
        )?)
    }

    /// Largest gap between `P_H(∂x^a)` and `∂x^a - Υ^b_a ∂u^b`.
    pub fn upsilon_defect(&self, sampling: &Sampling) -> Result<Deviation, ScenarioError> {
        let space = self.gamma.space().clone();
        let oracle = horizontal_fields(&space, self.n, &self.upsilon());
        let pairs = self
            .horizontal()?
            .into_iter()
            .zip(oracle)
            .collect::<Vec<_>>();
        Ok(pairs_deviation(sampling, &pairs)?)
    }
}

const SODE_REF: &str = "SODE connection on TM";

/// The connection of `Γ = u^a ∂x^a + f^a ∂u^a`, with horizontal frame
/// `P_H(∂x^a)` for `P_H = ½(I - L_Γ S)`.
pub fn sode_projector(
    n: usize,
    f: Vec<Expr>,
    settings: Settings,
) -> Result<Scenario, ScenarioError> {
    let space = tangent_space(n)?;
    if f.len() != n {
        return Err(ScenarioError::Invalid(format!("need {n} force terms")));
    }
    let description = format!(
        "TM over a {n}-manifold, connection of the SODE with forces {}",
        list_exprs(f.iter())
    );
    let forces = f
        .iter()
        .map(|e| sf(&space, e))
        .collect::<Result<Vec<_>, _>>()?;
    let sode = SodeConnection::new(&space, n, forces)?;
    let upsilon = sode.upsilon();
    let mut fields = frame_fields(&space, n, sode.horizontal()?);
    fields.insert("Delta".into(), sode.delta.clone());
    fields.insert("Gamma".into(), sode.gamma.clone());
    let rows = nonlinear_rows(n, &upsilon, SODE_REF)?;
    Scenario::assemble(
        tangent_parts(
            "sode-tangent",
            description,
            SODE_REF,
            space,
            n,
            fields,
            rows,
            vec!["Horizontal frame is P_H(d/dx^a) with P_H = ½(I - L_Γ S); expected rows use Υ^b_a = -½ ∂f^b/∂u^a.".into()],
            Family::Sode {
                n,
                sode: Box::new(sode),
                upsilon,
            },
        ),
        settings,
    )
}

/// Largest `|Δ(f^b) - 2f^b|`.
pub fn spray_defect(
    forces: &[ScalarField],
    sampling: &Sampling,
) -> Result<Deviation, ScenarioError> {
    let Some(first) = forces.first() else {
        return Ok(Deviation::zero());
    };
    let space = first.space().clone();
    let n = space.ambient_dim() / 2;
    let gaps = forces
        .iter()
        .map(|f| {
            apply_dilation(&space, n, f)?
                .sub(&f.scale(2.0))
                .map_err(Into::into)
        })
        .collect::<Result<Vec<_>, ScenarioError>>()?;
    scalar_sup(sampling, &gaps)
}

fn scalar_sup(sampling: &Sampling, fs: &[ScalarField]) -> Result<Deviation, ScenarioError> {
    Ok(sup_over_points(sampling, |at| {
        fs.iter()
            .try_fold(0.0_f64, |m, f| Ok(m.max(f.value(at)?.abs())))
    })?)
}

/// `Δ(f^b) = 2f^b` at every sample point, within `tol`.
pub fn is_spray(
    forces: &[ScalarField],
    sampling: &Sampling,
    tol: f64,
) -> Result<bool, ScenarioError> {
    Ok(spray_defect(forces, sampling)?.max_dev < tol)
}

/// Largest `|Δ(Γ^b_a) - Γ^b_a|`.
pub fn homogeneity_defect(
    gamma: &[Vec<ScalarField>],
    sampling: &Sampling,
) -> Result<Deviation, ScenarioError> {
    let Some(first) = gamma.iter().flatten().next() else {
        return Ok(Deviation::zero());
    };
    let space = first.space().clone();
    let n = space.ambient_dim() / 2;
    let gaps = gamma
        .iter()
        .flatten()
        .map(|g| apply_dilation(&space, n, g)?.sub(g).map_err(Into::into))
        .collect::<Result<Vec<_>, ScenarioError>>()?;
    scalar_sup(sampling, &gaps)
}

/// `Δ(Γ^b_a) = Γ^b_a` at every sample point, within `tol`.
pub fn homogeneity_check(
    gamma: &[Vec<ScalarField>],
    sampling: &Sampling,
    tol: f64,
) -> Result<bool, ScenarioError> {
    Ok(homogeneity_defect(gamma, sampling)?.max_dev < tol)
}

/// Both hypotheses of the sufficiency statement and, when they hold, its
/// two conclusions.
#[derive(Debug, Clone)]
pub struct SufficiencyReport {
    /// `∇_{H_a} Δ = 0`
    pub nabla_delta: CheckRecord,
    /// `P_H T(H_a, H_b) = 0`
    pub horizontal_torsion: CheckRecord,
    /// The SODE connection of `Γ = u^a H_a` has the input's horizontal frame.
    pub coincide: Option<CheckRecord>,
    /// `Γ = u^a H_a` is a spray.
    pub spray: Option<CheckRecord>,
}

impl SufficiencyReport {
    pub fn hypotheses_hold(&self) -> bool {
        self.nabla_delta.pass && self.horizontal_torsion.pass
    }

    /// False only when the hypotheses hold and a conclusion fails.
    pub fn holds(&self) -> bool {
        !self.hypotheses_hold()
            || (self.coincide.as_ref().is_some_and(|c| c.pass)
                && self.spray.as_ref().is_some_and(|c| c.pass))
    }

    pub fn records(&self) -> Vec<CheckRecord> {
        let mut out = vec![self.nabla_delta.clone(), self.horizontal_torsion.clone()];
        out.extend(self.coincide.clone());
        out.extend(self.spray.clone());
        out
    }
}

/// Runs the sufficiency check on a nonlinear or SODE scenario.
pub fn sode_sufficiency_check(
    scenario: &Scenario,
    tol: f64,
) -> Result<SufficiencyReport, ScenarioError> {
    let (n, gamma) = match scenario.family() {
        Family::Nonlinear { n, gamma } => (*n, gamma.clone()),
        Family::Sode { n, upsilon, .. } => (*n, upsilon.clone()),
        other => {
            return Err(ScenarioError::Invalid(format!(
                "sufficiency check needs a nonlinear tangent scenario, got {}",
                other.label()
            )))
        }
    };
    let space = scenario.space().clone();
    let sampling = scenario.sampling();
    let nabla = scenario.nabla();
    let hs: Vec<VectorField> = (0..n).map(|a| scenario.fields()[&h(a)].clone()).collect();
    let delta = scenario.fields()["Delta"].clone();
    let p_h = scenario.split().connection().p_h().clone();

    let nd = (|| {
        let fs = hs
            .iter()
            .map(|x| nabla.nabla(x, &delta))
            .collect::<Result<Vec<_>, _>>()?;
        zero_deviation(sampling, &fs)
    })();
    let ht = (|| {
        let mut fs = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                fs.push(p_h.apply(&torsion(nabla, &hs[a], &hs[b])?)?);
            }
        }
        zero_deviation(sampling, &fs)
    })();
    let mut report = SufficiencyReport {
        nabla_delta: CheckRecord::measured("sufficiency.nabla-delta", "∇_(H_a) Δ = 0", tol, nd),
        horizontal_torsion: CheckRecord::measured(
            "sufficiency.horizontal-torsion",
            "P_H∘T = 0 on horizontal pairs",
            tol,
            ht,
        ),
        coincide: None,
        spray: None,
    };
    if report.hypotheses_hold() {
        // f^b = -u^a Γ^b_a
        let forces = (0..n)
            .map(|b| {
                let terms = (0..n)
                    .map(|a| ScalarField::coordinate(&space, n + a).mul(&gamma[b][a]))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(sum_fields(&space, terms)?.scale(-1.0))
            })
            .collect::<Result<Vec<_>, ScenarioError>>()?;
        let sode = SodeConnection::new(&space, n, forces.clone())?;
        let coincide = (|| {
            let pairs = sode
                .horizontal()?
                .into_iter()
                .zip(hs.clone())
                .collect::<Vec<_>>();
            Ok::<_, ScenarioError>(pairs_deviation(sampling, &pairs)?)
        })();
        report.coincide = Some(CheckRecord::measured(
            "sufficiency.coincide",
            "SODE connection of u^a H_a equals the input connection",
            tol,
            coincide,
        ));
        report.spray = Some(CheckRecord::measured(
            "sufficiency.spray",
            "u^a H_a is a spray: Δ(f^b) = 2f^b",
            tol,
            spray_defect(&forces, sampling),
        ));
    }
    Ok(report)
}

fn parse_all(texts: &[&str]) -> Vec<Expr> {
    texts
        .iter()
        .map(|t| crate::expr::parse(t).expect("built-in expression parses"))
        .collect()
}

pub(crate) fn default_affine(settings: Settings) -> Result<Scenario, ScenarioError> {
    // Γ^a_{bc}, [a][b][c]
    let g = parse_all(&["0", "x1", "0", "x1^2", "x2", "0", "0.5*x1*x2", "0"]);
    let gamma = vec![
        vec![
            vec![g[0].clone(), g[1].clone()],
            vec![g[2].clone(), g[3].clone()],
        ],
        vec![
            vec![g[4].clone(), g[5].clone()],
            vec![g[6].clone(), g[7].clone()],
        ],
    ];
    affine_tangent(2, gamma, settings)
}

pub(crate) fn default_nonlinear(settings: Settings) -> Result<Scenario, ScenarioError> {
    // Γ^b_a, [b][a]
    let g = parse_all(&["u1^2", "u1*u2 + x2", "x1*u2", "sin(x2)*u1"]);
    let gamma = vec![
        vec![g[0].clone(), g[1].clone()],
        vec![g[2].clone(), g[3].clone()],
    ];
    nonlinear_tangent(2, gamma, settings)
}

pub(crate) fn default_sode(settings: Settings) -> Result<Scenario, ScenarioError> {
    let f = parse_all(&["-u1^2 - x1*u1*u2", "x2*u2^2 - u1*u2"]);
    sode_projector(2, f, settings)
}

impl Scenario {
    /// The SODE data of a SODE scenario.
    pub fn sode(&self) -> Option<&SodeConnection> {
        match self.family() {
            Family::Sode { sode, .. } => Some(sode),
            _ => None,
        }
    }
}
