#![allow(dead_code)]

use ehresmann::expr::{parse, Expr};
use ehresmann::geometry::{frame_coefficients, At};
use ehresmann::jets::{seed_point, Jet};
use ehresmann::scenarios::{Op, Scenario};

pub fn ex(text: &str) -> Expr {
    parse(text).unwrap_or_else(|e| panic!("`{text}`: {e}"))
}

pub fn names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

/// Evaluates `e` as a jet over `coords` at `p`.
pub fn jet(e: &Expr, coords: &[String], p: &[f64], depth: usize) -> Jet {
    let seeds = seed_point(p, depth);
    e.eval_with(&|v: &str| coords.iter().position(|c| c == v).map(|i| seeds[i].clone()))
        .unwrap_or_else(|err| panic!("evaluating `{e}`: {err}"))
}

pub fn value(e: &Expr, coords: &[String], p: &[f64]) -> f64 {
    jet(e, coords, p, 0).value()
}

/// `∂e/∂coords[i]` at `p`.
pub fn d(e: &Expr, coords: &[String], p: &[f64], i: usize) -> f64 {
    jet(e, coords, p, 1).extract_path(&[i]).unwrap()
}

/// Frame components of `op(x, y)` at `p`, in the scenario's frame order.
pub fn frame_components(s: &Scenario, op: Op, x: &str, y: &str, p: &[f64]) -> Vec<f64> {
    let f = s.apply(op, x, y).unwrap();
    let at = At::new(p, s.settings().depth);
    let v = f.value(&at).unwrap();
    frame_coefficients(s.split().basis(), &at, &v).unwrap()
}

pub fn frame_index(s: &Scenario, name: &str) -> usize {
    s.frame_names()
        .iter()
        .position(|n| n == name)
        .unwrap_or_else(|| panic!("no frame field {name}"))
}

pub fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Ten functions with hand-computed derivatives. Each entry: expression,
/// variables, point, and a list of (multi-index as variable path, value).
pub struct HandCase {
    pub text: &'static str,
    pub vars: Vec<String>,
    pub point: Vec<f64>,
    pub derivs: Vec<(Vec<usize>, f64)>,
}

pub fn hand_cases() -> Vec<HandCase> {
    let one = |f: [f64; 4]| -> Vec<(Vec<usize>, f64)> {
        vec![
            (vec![], f[0]),
            (vec![0], f[1]),
            (vec![0, 0], f[2]),
            (vec![0, 0, 0], f[3]),
        ]
    };
    let x1 = vec!["x".to_string()];
    let xy = vec!["x".to_string(), "y".to_string()];
    let mut out = Vec::new();

    let x = 0.7_f64;
    out.push(HandCase {
        text: "sin(x)",
        vars: x1.clone(),
        point: vec![x],
        derivs: one([x.sin(), x.cos(), -x.sin(), -x.cos()]),
    });
    let e = (2.0 * x).exp();
    out.push(HandCase {
        text: "exp(2*x)",
        vars: x1.clone(),
        point: vec![x],
        derivs: one([e, 2.0 * e, 4.0 * e, 8.0 * e]),
    });
    let q = 1.0 + x * x;
    out.push(HandCase {
        text: "ln(1 + x^2)",
        vars: x1.clone(),
        point: vec![x],
        derivs: one([
            q.ln(),
            2.0 * x / q,
            (2.0 - 2.0 * x * x) / (q * q),
            (4.0 * x.powi(3) - 12.0 * x) / q.powi(3),
        ]),
    });
    out.push(HandCase {
        text: "sqrt(x)",
        vars: x1.clone(),
        point: vec![x],
        derivs: one([
            x.sqrt(),
            0.5 * x.powf(-0.5),
            -0.25 * x.powf(-1.5),
            0.375 * x.powf(-2.5),
        ]),
    });
    out.push(HandCase {
        text: "1/x",
        vars: x1.clone(),
        point: vec![x],
        derivs: one([1.0 / x, -1.0 / x.powi(2), 2.0 / x.powi(3), -6.0 / x.powi(4)]),
    });
    let (t, s2) = (x.tan(), 1.0 / x.cos().powi(2));
    out.push(HandCase {
        text: "tan(x)",
        vars: x1.clone(),
        point: vec![x],
        derivs: one([t, s2, 2.0 * s2 * t, 4.0 * s2 * t * t + 2.0 * s2 * s2]),
    });
    out.push(HandCase {
        text: "x*ln(x)",
        vars: x1,
        point: vec![x],
        derivs: one([x * x.ln(), x.ln() + 1.0, 1.0 / x, -1.0 / (x * x)]),
    });

    let (x, y) = (0.6_f64, -1.3_f64);
    out.push(HandCase {
        text: "x^3*y^2",
        vars: xy.clone(),
        point: vec![x, y],
        derivs: vec![
            (vec![], x.powi(3) * y * y),
            (vec![0], 3.0 * x * x * y * y),
            (vec![1], 2.0 * x.powi(3) * y),
            (vec![0, 0], 6.0 * x * y * y),
            (vec![0, 1], 6.0 * x * x * y),
            (vec![1, 1], 2.0 * x.powi(3)),
            (vec![0, 0, 0], 6.0 * y * y),
            (vec![0, 0, 1], 12.0 * x * y),
            (vec![0, 1, 1], 6.0 * x * x),
            (vec![1, 1, 1], 0.0),
        ],
    });
    out.push(HandCase {
        text: "sin(x)*cos(y)",
        vars: xy.clone(),
        point: vec![x, y],
        derivs: vec![
            (vec![0], x.cos() * y.cos()),
            (vec![1], -x.sin() * y.sin()),
            (vec![0, 1], -x.cos() * y.sin()),
            (vec![0, 0, 1], x.sin() * y.sin()),
            (vec![0, 1, 1], -x.cos() * y.cos()),
            (vec![1, 1, 1], x.sin() * y.sin()),
        ],
    });
    let e = (x * y).exp();
    out.push(HandCase {
        text: "exp(x*y)",
        vars: xy,
        point: vec![x, y],
        derivs: vec![
            (vec![0], y * e),
            (vec![0, 1], (1.0 + x * y) * e),
            (vec![0, 0, 1], (2.0 * y + x * y * y) * e),
            (vec![0, 0, 0], y.powi(3) * e),
            (vec![1, 1], x * x * e),
        ],
    });
    out
}

pub fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs().max(1.0)
}

/// Checks every derivative of order ≥ 1 against a central difference of
/// the jet one order lower. Returns the worst relative error.
pub fn finite_difference_error(case: &HandCase) -> f64 {
    let e = ex(case.text);
    let h = 1e-5;
    let mut worst = 0.0_f64;
    for (path, _) in &case.derivs {
        let Some((&last, rest)) = path.split_last() else {
            continue;
        };
        let exact = jet(&e, &case.vars, &case.point, 3)
            .extract_path(path)
            .unwrap();
        let at = |s: f64| {
            let mut p = case.point.clone();
            p[last] += s;
            jet(&e, &case.vars, &p, 3).extract_path(rest).unwrap()
        };
        let fd = (at(h) - at(-h)) / (2.0 * h);
        worst = worst.max((fd - exact).abs() / exact.abs().max(1.0));
    }
    worst
}
