mod common;

use std::sync::Arc;

use proptest::prelude::*;

use common::{frame_components, max_gap, names};
use ehresmann::expr::Expr;
use ehresmann::geometry::{At, ScalarField, Space, VectorField};
use ehresmann::scenarios::random::{random_affine_gamma, random_forces, random_functions};
use ehresmann::scenarios::{
    affine_tangent, builtin_source, nonlinear_from_fields, nonlinear_tangent, sode_projector, Op,
    ScenarioDef, Settings,
};

fn r3() -> Arc<Space> {
    Space::chart("R3", ["x", "y", "z"]).unwrap().into_shared()
}

fn field(space: &Arc<Space>, name: &str, seed: u64) -> VectorField {
    VectorField::from_exprs(space, name, random_forces(space.coords(), 2, 3, seed)).unwrap()
}

fn value(f: &VectorField, p: &[f64]) -> Vec<f64> {
    f.value(&At::new(p, 4)).unwrap()
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0_f64, 3)
}

fn small() -> Settings {
    Settings {
        samples: 4,
        ..Settings::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn bracket_is_antisymmetric(seed in 0..1000_u64, p in point()) {
        let s = r3();
        let (x, y) = (field(&s, "X", seed), field(&s, "Y", seed + 1));
        let a = value(&x.bracket(&y).unwrap(), &p);
        let b: Vec<f64> = value(&y.bracket(&x).unwrap(), &p).iter().map(|v| -v).collect();
        prop_assert!(max_gap(&a, &b) < 1e-12);
    }

    #[test]
    fn jacobi_identity(seed in 0..1000_u64, p in point()) {
        let s = r3();
        let (x, y, z) = (field(&s, "X", seed), field(&s, "Y", seed + 1), field(&s, "Z", seed + 2));
        let cyc = [
            x.bracket(&y.bracket(&z).unwrap()).unwrap(),
            y.bracket(&z.bracket(&x).unwrap()).unwrap(),
            z.bracket(&x.bracket(&y).unwrap()).unwrap(),
        ];
        let total = VectorField::sum(&s, &cyc).unwrap();
        let size = cyc.iter().map(|c| max_gap(&value(c, &p), &[0.0; 3])).fold(1.0_f64, f64::max);
        prop_assert!(max_gap(&value(&total, &p), &[0.0; 3]) < 1e-11 * size);
    }

    #[test]
    fn bracket_leibniz_rule(seed in 0..1000_u64, p in point()) {
        let s = r3();
        let (x, y) = (field(&s, "X", seed), field(&s, "Y", seed + 1));
        let f = ScalarField::from_expr(&s, random_functions(s.coords(), 1, seed).remove(0)).unwrap();
        // [X, fY] = X(f) Y + f [X, Y]
        let lhs = x.bracket(&y.times(&f).unwrap()).unwrap();
        let rhs = y
            .times(&x.apply(&f).unwrap())
            .unwrap()
            .add(&x.bracket(&y).unwrap().times(&f).unwrap())
            .unwrap();
        let (a, b) = (value(&lhs, &p), value(&rhs, &p));
        prop_assert!(max_gap(&a, &b) < 1e-10 * a.iter().fold(1.0_f64, |m, v| m.max(v.abs())));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    /// An affine connection entered as the nonlinear one `Γ^c_a = Γ^c_{ab} u^b`
    /// gives the same derivative.
    #[test]
    fn nonlinear_form_of_affine_agrees(seed in 0..1000_u64) {
        let n = 2;
        let gamma = random_affine_gamma(&names("x", n), 2, seed);
        let nl: Vec<Vec<Expr>> = (0..n)
            .map(|c| {
                (0..n)
                    .map(|a| Expr::sum((0..n).map(|b| {
                        Expr::product([gamma[c][a][b].clone(), Expr::var(format!("u{}", b + 1))])
                    })))
                    .collect()
            })
            .collect();
        let affine = affine_tangent(n, gamma, small()).unwrap();
        let nonlinear = nonlinear_tangent(n, nl, small()).unwrap();
        prop_assert_eq!(affine.frame_names(), nonlinear.frame_names());
        let frame = affine.frame_names().to_vec();
        for p in &affine.sampling().points {
            for x in &frame {
                for y in &frame {
                    let a = frame_components(&affine, Op::Nabla, x, y, p);
                    let b = frame_components(&nonlinear, Op::Nabla, x, y, p);
                    prop_assert!(max_gap(&a, &b) < 1e-10, "{x},{y}");
                }
            }
        }
    }

    /// The SODE connection, rebuilt from its coefficients `Υ` as a plain
    /// nonlinear connection, has the same derivative.
    #[test]
    fn sode_connection_through_its_coefficients(seed in 0..1000_u64) {
        let n = 2;
        let coords: Vec<String> = names("x", n).into_iter().chain(names("u", n)).collect();
        let sode = sode_projector(n, random_forces(&coords, 3, n, seed), small()).unwrap();
        let upsilon = sode.sode().unwrap().upsilon();
        let rebuilt = nonlinear_from_fields(n, upsilon, small()).unwrap();
        let frame: Vec<String> = names("H", n).into_iter().chain(names("V", n)).collect();
        for p in &sode.sampling().points {
            for x in &frame {
                for y in &frame {
                    let a = frame_components(&sode, Op::Nabla, x, y, p);
                    let b = frame_components(&rebuilt, Op::Nabla, x, y, p);
                    prop_assert!(max_gap(&a, &b) < 1e-10, "{x},{y}");
                }
            }
        }
    }
}

#[test]
fn scenario_files_round_trip() {
    for name in ["trivial-r3", "hopf"] {
        let def = ScenarioDef::from_json(builtin_source(name).unwrap()).unwrap();
        let again = ScenarioDef::from_json(&def.to_json()).unwrap();
        assert_eq!(def, again);
        let (a, b) = (def.build(small()).unwrap(), again.build(small()).unwrap());
        let frame = a.frame_names().to_vec();
        for p in &a.sampling().points {
            for x in &frame {
                for y in &frame {
                    let (u, v) = (
                        frame_components(&a, Op::Nabla, x, y, p),
                        frame_components(&b, Op::Nabla, x, y, p),
                    );
                    assert_eq!(u, v);
                }
            }
        }
    }
}

#[test]
fn projectors_are_idempotent_and_sum_to_identity() {
    for b in ehresmann::scenarios::BUILTINS {
        let s = b.build(small()).unwrap();
        let projectors = s.split().projectors();
        let total = ehresmann::geometry::Endo11::sum(s.space(), &projectors).unwrap();
        for p in &s.sampling().points {
            for e in s.frame() {
                let v = value(&e, p);
                assert!(
                    max_gap(&value(&total.apply(&e).unwrap(), p), &v) < 1e-10,
                    "{}",
                    b.name
                );
                for pr in &projectors {
                    let once = pr.apply(&e).unwrap();
                    let twice = pr.apply(&once).unwrap();
                    assert!(
                        max_gap(&value(&twice, p), &value(&once, p)) < 1e-10,
                        "{}",
                        b.name
                    );
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// Brackets of fields tangent to the sphere stay tangent.
    #[test]
    fn sphere_brackets_stay_tangent(seed in 0..1000_u64) {
        let s = ehresmann::scenarios::hopf(small()).unwrap();
        let space = s.space().clone();
        let rotations: Vec<VectorField> = ["theta", "phi", "psi", "xi", "eta", "zeta"]
            .iter()
            .map(|n| s.field(n).unwrap().clone())
            .collect();
        let combo = |seed: u64| {
            let coeffs = random_forces(space.coords(), 2, rotations.len(), seed);
            let terms: Vec<VectorField> = rotations
                .iter()
                .zip(coeffs)
                .map(|(r, c)| r.times(&ScalarField::from_expr(&space, c).unwrap()).unwrap())
                .collect();
            VectorField::sum(&space, &terms).unwrap()
        };
        let br = combo(seed).bracket(&combo(seed + 1)).unwrap();
        for p in &s.sampling().points {
            let v = value(&br, p);
            let normal: f64 = v.iter().zip(p).map(|(a, b)| a * b).sum();
            prop_assert!(normal.abs() < 1e-9);
        }
    }
}

/// Reordering `K` and the block together leaves the split identities and the
/// derivative unchanged.
#[test]
fn reordering_a_block_with_its_pairing() {
    let s = ehresmann::scenarios::builtin("affine-tangent")
        .unwrap()
        .build(small())
        .unwrap();
    let re = s.split().reordered(&[1, 0], s.sampling()).unwrap();
    let failures: Vec<_> = re
        .validate_split(s.sampling(), 1e-10)
        .into_iter()
        .filter(|r| !r.pass)
        .collect();
    assert!(failures.is_empty(), "{failures:?}");
    let nabla = ehresmann::covderiv::nabla_total_thm3(&re, s.sampling()).unwrap();
    let frame = s.frame();
    for p in &s.sampling().points {
        for x in &frame {
            for y in &frame {
                let a = value(&s.nabla().nabla(x, y).unwrap(), p);
                let b = value(&nabla.nabla(x, y).unwrap(), p);
                assert!(max_gap(&a, &b) < 1e-10);
            }
        }
    }
}
