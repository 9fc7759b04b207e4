//! The full check list run against a scenario, producing a [`Report`].

use crate::covderiv::{
    axiom_suite, check_cor23, curvature_suite, engine_parts, glue_unchecked, parallel_endos,
    sample_pairs, torsion, torsion_suite, Provenance,
};
use crate::geometry::{dual_coframe, ScalarField, VectorField};
use crate::report::{
    pairs_deviation, sup_over_points, zero_deviation, CheckRecord, Deviation, Report, RunConfig,
};
use crate::scenarios::{
    metric_compatibility_defect, random::random_functions, resolve, sode_sufficiency_check,
    symmetrize, Family, Op, Scenario, ScenarioError,
};

/// Structural identities are held to a hundredth of the run tolerance.
pub const STRUCTURAL_FACTOR: f64 = 1e-2;

/// Number of ordered frame pairs used by the axiom and tensor suites.
pub const SUITE_PAIRS: usize = 9;

/// Builds the scenario named (or stored at the path) in `config` and runs
/// every check.
pub fn run(config: &RunConfig) -> Result<Report, ScenarioError> {
    config.validate().map_err(ScenarioError::Invalid)?;
    let scenario = resolve(&config.scenario, config.into())?;
    Ok(Report::new(
        config.clone(),
        verify_scenario(&scenario, config.tol),
    ))
}

fn op_threshold(op: Op, tol: f64) -> f64 {
    match op {
        Op::Bracket => tol * STRUCTURAL_FACTOR,
        _ => tol,
    }
}

/// Runs all checks that apply to `scenario`, in a fixed order.
pub fn verify_scenario(scenario: &Scenario, tol: f64) -> Vec<CheckRecord> {
    let strict = tol * STRUCTURAL_FACTOR;
    let sampling = scenario.sampling();
    let split = scenario.split();
    let conn = split.connection();
    let nabla = scenario.nabla();
    let frame = scenario.frame();
    let seed = scenario.settings().seed;
    let mut out = conn.identity_checks(sampling, strict);
    out.extend(split.validate_split(sampling, strict));
    out.push(CheckRecord::measured(
        "frame.dual-coframe",
        "dual coframe of the combined frame",
        strict,
        coframe_defect(scenario),
    ));

    out.extend(expected_checks(scenario, tol));

    let pairs = sample_pairs(frame.len(), SUITE_PAIRS, seed);
    let functions: Vec<ScalarField> = random_functions(scenario.space().coords(), 3, seed)
        .into_iter()
        .map(|e| {
            ScalarField::from_expr(scenario.space(), e)
                .expect("generated over the space's coordinates")
        })
        .collect();
    out.extend(axiom_suite(
        nabla, &frame, &pairs, &functions, sampling, tol,
    ));
    out.extend(torsion_suite(
        nabla, &frame, &pairs, &functions, sampling, tol,
    ));
    out.extend(curvature_suite(nabla, conn, &frame, &pairs, sampling, tol));

    let parts = engine_parts(split);
    let mut agree = true;
    for b in 0..parts.len() {
        let r = check_cor23(&parts, nabla, b, &frame, sampling, tol);
        agree &= r.agree();
        out.push(r.nabla_p);
        out.push(r.image);
    }
    out.push(CheckRecord::boolean(
        "cor23.agree",
        "parallel projector iff block derivative preserves its image",
        agree,
    ));
    out.extend(leak_control(scenario, tol));

    out.push(CheckRecord::measured(
        "parallel.projectors",
        "∇P = 0 for every projector of the split",
        tol,
        parallel_endos(nabla, &split.projectors(), &frame, &pairs, sampling),
    ));
    if scenario.is_equal_rank() {
        out.push(CheckRecord::measured(
            "parallel.s-q",
            "∇S = 0 and ∇Q = 0",
            tol,
            parallel_endos(
                nabla,
                &[split.s().clone(), split.q().clone()],
                &frame,
                &pairs,
                sampling,
            ),
        ));
    }

    if scenario.metric().is_some() {
        out.extend(metric_checks(scenario, tol));
    }
    out.extend(family_checks(scenario, tol));
    out
}

fn coframe_defect(scenario: &Scenario) -> Result<Deviation, ScenarioError> {
    let basis = scenario.split().basis();
    let theta = dual_coframe(basis.frames())?;
    let fields: Vec<VectorField> = basis.fields().cloned().collect();
    let table = theta
        .iter()
        .map(|t| {
            fields
                .iter()
                .map(|e| t.apply(e))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(sup_over_points(scenario.sampling(), |at| {
        let mut m = 0.0_f64;
        for (i, row) in table.iter().enumerate() {
            for (j, f) in row.iter().enumerate() {
                let delta = if i == j { 1.0 } else { 0.0 };
                m = m.max((f.value(at)? - delta).abs());
            }
        }
        Ok(m)
    })?)
}

/// One check per expected-row family, plus the frame pairs whose `∇` no row
/// prescribes, which must vanish.
pub fn expected_checks(scenario: &Scenario, tol: f64) -> Vec<CheckRecord> {
    let sampling = scenario.sampling();
    let mut families: indexmap::IndexMap<&str, Vec<usize>> = indexmap::IndexMap::new();
    for (i, row) in scenario.expected().iter().enumerate() {
        families.entry(row.family.as_str()).or_default().push(i);
    }
    let mut out = Vec::new();
    for (family, rows) in families {
        let first = &scenario.expected()[rows[0]];
        let measured = (|| {
            let mut pairs = Vec::new();
            for &i in &rows {
                let row = &scenario.expected()[i];
                pairs.push((
                    scenario.apply(row.op, &row.args[0], &row.args[1])?,
                    scenario.expected_value(row)?,
                ));
            }
            Ok::<_, ScenarioError>(pairs_deviation(sampling, &pairs)?)
        })();
        out.push(CheckRecord::measured(
            format!("expected.{family}"),
            first.reference.clone(),
            op_threshold(first.op, tol),
            measured,
        ));
    }

    let names = scenario.frame_names();
    let listed = |x: &str, y: &str| {
        scenario
            .expected()
            .iter()
            .any(|r| r.op == Op::Nabla && r.args[0] == x && r.args[1] == y)
    };
    let unlisted = (|| {
        let mut fields = Vec::new();
        for x in names {
            for y in names {
                if !listed(x, y) {
                    fields.push(scenario.apply(Op::Nabla, x, y)?);
                }
            }
        }
        Ok::<_, ScenarioError>(zero_deviation(sampling, &fields)?)
    })();
    out.push(CheckRecord::measured(
        "expected.unlisted-zero",
        "frame derivatives absent from the expected table vanish",
        tol,
        unlisted,
    ));
    out
}

/// Breaks the `K` block derivative with a tensorial leak into the first
/// complementary block; both sides of the parallel-projector equivalence
/// must then fail.
fn leak_control(scenario: &Scenario, tol: f64) -> Vec<CheckRecord> {
    let split = scenario.split();
    let built = (|| {
        let basis = split.basis();
        let omega = dual_coframe(basis.frames())?.swap_remove(0);
        let mut parts = engine_parts(split);
        parts[0] = parts[0].with_leak(omega, split.q_parts()[0].clone());
        let nabla = glue_unchecked(split.space(), &parts, Provenance::Custom);
        Ok::<_, ScenarioError>((parts, nabla))
    })();
    let reference = "negative control: leaking derivative breaks both sides";
    match built {
        Err(e) => vec![CheckRecord::failed("control.leak", reference, e)],
        Ok((parts, nabla)) => {
            let r = check_cor23(
                &parts,
                &nabla,
                0,
                &scenario.frame(),
                scenario.sampling(),
                tol,
            );
            [
                ("control.leak.nabla-p", r.nabla_p),
                ("control.leak.image", r.image),
            ]
            .into_iter()
            .map(|(id, mut rec)| {
                rec.check_id = id.into();
                rec.paper_ref = reference.into();
                rec.pass = rec.error.is_none() && rec.max_dev > rec.threshold;
                rec
            })
            .collect()
        }
    }
}

fn metric_checks(scenario: &Scenario, tol: f64) -> Vec<CheckRecord> {
    let Some(g) = scenario.metric() else {
        return vec![];
    };
    let sampling = scenario.sampling();
    let frame = scenario.frame();
    let sym = symmetrize(scenario.nabla());
    let tors = (|| {
        let mut fields = Vec::new();
        for x in &frame {
            for y in &frame {
                fields.push(torsion(&sym, x, y)?);
            }
        }
        zero_deviation(sampling, &fields)
    })();
    let compat = (|| {
        let mut defects = Vec::new();
        for x in &frame {
            for y in &frame {
                for z in &frame {
                    defects.push(metric_compatibility_defect(&sym, g, x, y, z)?);
                }
            }
        }
        sup_over_points(sampling, |at| {
            defects
                .iter()
                .try_fold(0.0_f64, |m, d| Ok(m.max(d.value(at)?.abs())))
        })
    })();
    let positive = g.min_eigenvalue(sampling);
    vec![
        CheckRecord::measured(
            "metric.symmetric",
            "g(X,Y) = g(Y,X)",
            tol,
            g.asymmetry(sampling),
        ),
        match positive {
            Ok(lam) => CheckRecord::boolean(
                "metric.positive-definite",
                format!("smallest eigenvalue {lam:.3e} > 0"),
                lam > 0.0,
            ),
            Err(e) => CheckRecord::failed("metric.positive-definite", "g positive-definite", e),
        },
        CheckRecord::measured("levi-civita-torsion", "∇ - ½T is torsion-free", tol, tors),
        CheckRecord::measured(
            "levi-civita-compatibility",
            "∇ - ½T is compatible with the metric",
            tol,
            compat,
        ),
    ]
}

fn family_checks(scenario: &Scenario, tol: f64) -> Vec<CheckRecord> {
    let strict = tol * STRUCTURAL_FACTOR;
    let sampling = scenario.sampling();
    let mut out = Vec::new();
    match scenario.family() {
        Family::Sode { sode, .. } => {
            out.push(CheckRecord::measured(
                "sode.s-gamma",
                "S(Γ) = Δ",
                strict,
                sode.sode_defect(sampling),
            ));
            out.push(CheckRecord::measured(
                "sode.upsilon",
                "½(I - L_Γ S) has coefficients -½ ∂f^b/∂u^a",
                strict,
                sode.upsilon_defect(sampling),
            ));
            let conn = scenario.split().connection();
            let matched = (|| {
                let mut pairs = Vec::new();
                for e in scenario.frame() {
                    pairs.push((sode.p_h.apply(&e)?, conn.p_h().apply(&e)?));
                }
                pairs_deviation(sampling, &pairs)
            })();
            out.push(CheckRecord::measured(
                "sode.projector-match",
                "½(I - L_Γ S) equals the connection's P_H",
                strict,
                matched,
            ));
            out.extend(sufficiency(scenario, tol));
        }
        Family::Nonlinear { .. } => out.extend(sufficiency(scenario, tol)),
        Family::FrameBundle { decomposition, .. } => {
            let r = decomposition.check();
            out.push(CheckRecord::boolean(
                "framebundle.decomposition",
                format!(
                    "column {} invariant {} dimensions {} direct-sum {}",
                    r.column, r.invariant, r.dimensions, r.direct_sum
                ),
                r.all(),
            ));
        }
        Family::Affine { .. } | Family::Custom => {}
    }
    out
}

fn sufficiency(scenario: &Scenario, tol: f64) -> Vec<CheckRecord> {
    match sode_sufficiency_check(scenario, tol) {
        Ok(r) => {
            // hypotheses are reported, not required
            let mut out: Vec<CheckRecord> = [&r.nabla_delta, &r.horizontal_torsion]
                .into_iter()
                .map(|h| {
                    CheckRecord::boolean(
                        h.check_id
                            .replace("sufficiency.", "sufficiency.hypothesis."),
                        format!(
                            "{}: {} (max_dev {:.3e})",
                            h.paper_ref,
                            if h.pass { "holds" } else { "fails" },
                            h.max_dev
                        ),
                        h.error.is_none(),
                    )
                })
                .collect();
            out.extend(r.coincide.clone());
            out.extend(r.spray.clone());
            out.push(CheckRecord::boolean(
                "sode.sufficiency",
                if r.hypotheses_hold() {
                    "hypotheses hold, conclusions checked"
                } else {
                    "hypotheses fail, nothing to conclude"
                },
                r.holds(),
            ));
            out
        }
        Err(e) => vec![CheckRecord::failed("sode.sufficiency", "sufficiency", e)],
    }
}
