//! Seeded random inputs: test functions for the axiom suite and polynomial
//! coefficient fields.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::expr::{parse, Expr};

fn coef(rng: &mut ChaCha8Rng) -> String {
    let c: f64 = rng.gen_range(-1.0..1.0);
    format!("{:.3}", if c.abs() < 0.1 { c + 0.3 } else { c })
}

/// Three-term smooth functions of the given variables, one per call of the
/// iterator, built from `c·v`, `c·v^2`, `c·sin(v)`, `c·cos(v)`,
/// `c·exp(0.5*v)` and products of two variables.
pub fn random_functions(vars: &[String], count: usize, seed: u64) -> Vec<Expr> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_f00d);
    (0..count)
        .map(|_| {
            let mut terms = vec![coef(&mut rng)];
            for _ in 0..3 {
                let v = &vars[rng.gen_range(0..vars.len())];
                let c = coef(&mut rng);
                let t = match rng.gen_range(0..6) {
                    0 => format!("{c}*{v}"),
                    1 => format!("{c}*{v}^2"),
                    2 => format!("{c}*sin({v})"),
                    3 => format!("{c}*cos({v})"),
                    4 => format!("{c}*exp(0.5*{v})"),
                    _ => {
                        let w = &vars[rng.gen_range(0..vars.len())];
                        format!("{c}*{v}*{w}")
                    }
                };
                terms.push(t);
            }
            parse(&terms.join(" + ")).expect("generated function parses")
        })
        .collect()
}

/// A random polynomial of total degree at most `degree` in `vars`, with
/// roughly half of the monomials present.
pub fn random_polynomial(rng: &mut ChaCha8Rng, vars: &[String], degree: u32) -> Expr {
    let mut monomials: Vec<Vec<u32>> = vec![vec![0; vars.len()]];
    for _ in 0..degree {
        let mut next = monomials.clone();
        for m in &monomials {
            for i in 0..vars.len() {
                let mut e = m.clone();
                e[i] += 1;
                if !next.contains(&e) {
                    next.push(e);
                }
            }
        }
        monomials = next;
    }
    let mut terms = Vec::new();
    for m in monomials {
        if !rng.gen_bool(0.5) {
            continue;
        }
        let mut t = coef(rng);
        for (v, &e) in vars.iter().zip(&m) {
            match e {
                0 => {}
                1 => t.push_str(&format!("*{v}")),
                _ => t.push_str(&format!("*{v}^{e}")),
            }
        }
        terms.push(t);
    }
    if terms.is_empty() {
        return Expr::constant(0.0);
    }
    parse(&terms.join(" + ")).expect("generated polynomial parses")
}

/// `n³` random polynomial connection coefficients `Γ^a_{bc}` in the base
/// coordinates, indexed `[a][b][c]`.
pub fn random_affine_gamma(base: &[String], degree: u32, seed: u64) -> Vec<Vec<Vec<Expr>>> {
    let n = base.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            (0..n)
                .map(|_| {
                    (0..n)
                        .map(|_| random_polynomial(&mut rng, base, degree))
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// Random force terms `f^a`: polynomials of the given degree in all
/// coordinates.
pub fn random_forces(coords: &[String], degree: u32, count: usize, seed: u64) -> Vec<Expr> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| random_polynomial(&mut rng, coords, degree))
        .collect()
}

/// Functions homogeneous of degree `degree` in `fibre`, with coefficients
/// that are random polynomials of degree at most one in `base`.
pub fn random_homogeneous(
    base: &[String],
    fibre: &[String],
    degree: u32,
    count: usize,
    seed: u64,
) -> Vec<Expr> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut monomials: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..degree {
        monomials = monomials
            .into_iter()
            .flat_map(|m| {
                let start = m.last().copied().unwrap_or(0);
                (start..fibre.len()).map(move |i| {
                    let mut e = m.clone();
                    e.push(i);
                    e
                })
            })
            .collect();
    }
    (0..count)
        .map(|_| {
            let terms: Vec<String> = monomials
                .iter()
                .map(|m| {
                    let p = random_polynomial(&mut rng, base, 1);
                    let u = m.iter().map(|&i| fibre[i].as_str()).collect::<Vec<_>>();
                    if u.is_empty() {
                        format!("({p})")
                    } else {
                        format!("({p})*{}", u.join("*"))
                    }
                })
                .collect();
            parse(&terms.join(" + ")).expect("generated function parses")
        })
        .collect()
}
