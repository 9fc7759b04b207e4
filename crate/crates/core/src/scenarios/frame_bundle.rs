//! The frame bundle of an `n`-manifold with a linear connection, and the
//! splitting of `n×n` matrices into column subspaces invariant under a
//! single-orbit permutation.

use indexmap::IndexMap;

use crate::connection::Orientation;
use crate::expr::Expr;
use crate::geometry::{ScalarField, Space, VectorField};
use crate::jets::Jet;
use crate::linalg::{inverse, Matrix};

use super::tangent::{curvature_oracle, require_base_only};
use super::{Expected, Family, Op, Parts, Scenario, ScenarioError, Settings};

/// Bases `W^1..W^n` of the column subspaces, `bases[k][j]` an `n×n` integer
/// matrix with entries only in column `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubspaceBasis {
    pub n: usize,
    /// 0-based images: `cycle[i]` is where `i` goes.
    pub cycle: Vec<usize>,
    pub bases: Vec<Vec<Matrix<i64>>>,
}

/// Result of the exact checks on a [`SubspaceBasis`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecompositionReport {
    /// Every basis matrix has nonzero entries only in its own column.
    pub column: bool,
    /// `A·W^k ⊆ W^k` for every basis element.
    pub invariant: bool,
    /// Each `W^k` has dimension `n`.
    pub dimensions: bool,
    /// The `n²` matrices are linearly independent.
    pub direct_sum: bool,
}

impl DecompositionReport {
    pub fn all(&self) -> bool {
        self.column && self.invariant && self.dimensions && self.direct_sum
    }
}

fn unit(n: usize, i: usize, k: usize) -> Matrix<i64> {
    let mut m = vec![vec![0; n]; n];
    m[i][k] = 1;
    m
}

fn int_mul(a: &Matrix<i64>, b: &Matrix<i64>) -> Matrix<i64> {
    let n = a.len();
    let m = b.first().map_or(0, Vec::len);
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| (0..b.len()).map(|k| a[i][k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

/// Exact rank by fraction-free elimination.
pub(crate) fn int_rank(rows: &[Vec<i64>]) -> usize {
    let mut m: Vec<Vec<i128>> = rows
        .iter()
        .map(|r| r.iter().map(|&x| i128::from(x)).collect())
        .collect();
    let cols = m.first().map_or(0, Vec::len);
    let mut rank = 0;
    let mut prev: i128 = 1;
    for c in 0..cols {
        let Some(p) = (rank..m.len()).find(|&r| m[r][c] != 0) else {
            continue;
        };
        m.swap(rank, p);
        for r in rank + 1..m.len() {
            for j in c + 1..cols {
                m[r][j] = (m[r][j] * m[rank][c] - m[r][c] * m[rank][j]) / prev;
            }
            m[r][c] = 0;
        }
        prev = m[rank][c];
        rank += 1;
        if rank == m.len() {
            break;
        }
    }
    rank
}

impl SubspaceBasis {
    /// The permutation matrix `A`, `A[i][j] = 1` iff `j = cycle[i]`.
    pub fn permutation_matrix(&self) -> Matrix<i64> {
        let n = self.n;
        (0..n)
            .map(|i| (0..n).map(|j| i64::from(j == self.cycle[i])).collect())
            .collect()
    }

    /// Coordinates of `m` in `W^k` when it lies there.
    fn coords_in(&self, k: usize, m: &Matrix<i64>) -> Option<Vec<i64>> {
        // every basis matrix is a column unit vector up to sign
        let n = self.n;
        let mut out = vec![0; n];
        let mut rebuilt = vec![vec![0; n]; n];
        for (j, b) in self.bases[k].iter().enumerate() {
            let (i, s) = (0..n).find_map(|i| (b[i][k] != 0).then_some((i, b[i][k])))?;
            out[j] = m[i][k] / s;
            rebuilt[i][k] += out[j] * s;
        }
        (rebuilt == *m).then_some(out)
    }

    /// Runs the exact column, invariance, dimension and direct-sum checks.
    pub fn check(&self) -> DecompositionReport {
        let n = self.n;
        let a = self.permutation_matrix();
        let column = self.bases.iter().enumerate().all(|(k, bs)| {
            bs.iter()
                .all(|m| (0..n).all(|i| (0..n).all(|j| j == k || m[i][j] == 0)))
        });
        let invariant = column
            && (0..n).all(|k| {
                self.bases[k]
                    .iter()
                    .all(|m| self.coords_in(k, &int_mul(&a, m)).is_some())
            });
        let flat = |m: &Matrix<i64>| m.iter().flatten().copied().collect::<Vec<_>>();
        let dimensions = self.bases.len() == n
            && self
                .bases
                .iter()
                .all(|bs| bs.len() == n && int_rank(&bs.iter().map(flat).collect::<Vec<_>>()) == n);
        let all: Vec<Vec<i64>> = self.bases.iter().flatten().map(flat).collect();
        let direct_sum = all.len() == n * n && int_rank(&all) == n * n;
        DecompositionReport {
            column,
            invariant,
            dimensions,
            direct_sum,
        }
    }

    /// `M_B[i][a] = (W^B_a)^i_B`: block `B` of matrix coordinates is `M_B w_B`.
    pub fn block_matrix(&self, block: usize) -> Matrix<f64> {
        let n = self.n;
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|a| self.bases[block][a][i][block] as f64)
                    .collect()
            })
            .collect()
    }

    /// Matrix entries `b^i_B` (block-major) from decomposition coordinates.
    pub fn to_matrix_coords(&self, w: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = Vec::with_capacity(n * n);
        for blk in 0..n {
            let m = self.block_matrix(blk);
            let wb = &w[blk * n..(blk + 1) * n];
            out.extend((0..n).map(|i| (0..n).map(|a| m[i][a] * wb[a]).sum::<f64>()));
        }
        out
    }

    /// Inverse of [`to_matrix_coords`](Self::to_matrix_coords).
    pub fn from_matrix_coords(&self, b: &[f64]) -> Result<Vec<f64>, ScenarioError> {
        let n = self.n;
        let mut out = Vec::with_capacity(n * n);
        for blk in 0..n {
            let inv = inverse(&self.block_matrix(blk)).map_err(crate::geometry::GeomError::from)?;
            let bb = &b[blk * n..(blk + 1) * n];
            out.extend((0..n).map(|a| (0..n).map(|i| inv[a][i] * bb[i]).sum::<f64>()));
        }
        Ok(out)
    }
}

/// Splits `n×n` matrices into `W^k` (column `k`), each spanned by the orbit
/// `A^j E_{1k}` of the permutation matrix of `cycle`. `cycle` is 0-based:
/// `cycle[i]` is the image of `i`.
pub fn cycle_decomposition(n: usize, cycle: &[usize]) -> Result<SubspaceBasis, ScenarioError> {
    if n == 0 || cycle.len() != n {
        return Err(ScenarioError::Invalid(format!(
            "permutation must list {n} images, got {}",
            cycle.len()
        )));
    }
    let mut seen = vec![false; n];
    for &c in cycle {
        if c >= n || seen[c] {
            return Err(ScenarioError::Invalid(format!(
                "{cycle:?} is not a permutation of 0..{n}"
            )));
        }
        seen[c] = true;
    }
    let mut orbit = 1;
    let mut i = cycle[0];
    while i != 0 {
        orbit += 1;
        i = cycle[i];
    }
    if orbit != n {
        return Err(ScenarioError::Invalid(format!(
            "{cycle:?} is not a single {n}-cycle (orbit of the first element has length {orbit})"
        )));
    }
    let mut basis = SubspaceBasis {
        n,
        cycle: cycle.to_vec(),
        bases: Vec::with_capacity(n),
    };
    let a = basis.permutation_matrix();
    for k in 0..n {
        let mut elems = vec![unit(n, 0, k)];
        for j in 1..n {
            elems.push(int_mul(&a, &elems[j - 1]));
        }
        basis.bases.push(elems);
    }
    Ok(basis)
}

/// Name of the decomposition coordinate `w^a_B` (0-based indices).
pub fn frame_coordinate(a: usize, block: usize) -> String {
    format!("w{}_{}", a + 1, block + 1)
}

fn h(a: usize) -> String {
    format!("H{}", a + 1)
}

/// `V^A_b`, the field `∂/∂b^b_A` of the matrix entry `b^b_A`.
fn vert(block: usize, b: usize) -> String {
    format!("V{}_{}", block + 1, b + 1)
}

const FRAME_REF: &str = "frame bundle with a linear connection";

/// The frame bundle over an `n`-manifold with coordinates `(x^i, w^a_B)`,
/// `b^i_B = w^a_B (W^B_a)^i_B` for the decomposition of `cycle`. `gamma[i][j][k]`
/// is `Γ^i_{jk}` in `x1..xn`. The split has `K` horizontal and one vertical
/// block per column.
pub fn frame_bundle(
    n: usize,
    cycle: &[usize],
    gamma: Vec<Vec<Vec<Expr>>>,
    settings: Settings,
) -> Result<Scenario, ScenarioError> {
    let decomposition = cycle_decomposition(n, cycle)?;
    let mut coords: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    for blk in 0..n {
        for a in 0..n {
            coords.push(frame_coordinate(a, blk));
        }
    }
    let base: Vec<String> = coords[..n].to_vec();
    let base: Vec<&str> = base.iter().map(String::as_str).collect();
    let mut space = Space::chart(format!("F{n}"), coords.clone())?.with_base(&base)?;
    for c in &coords[n..] {
        space = space.with_interval(c, 0.5, 1.5)?;
    }
    let space = space.into_shared();

    if gamma.len() != n
        || gamma
            .iter()
            .any(|r| r.len() != n || r.iter().any(|s| s.len() != n))
    {
        return Err(ScenarioError::Invalid(format!(
            "connection coefficients must be {n}×{n}×{n}"
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
                        .map(|e| ScalarField::from_expr(&space, e.clone()))
                        .collect::<Result<Vec<_>, _>>()
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;

    let ms: Vec<Matrix<f64>> = (0..n).map(|blk| decomposition.block_matrix(blk)).collect();
    let minv: Vec<Matrix<f64>> = ms
        .iter()
        .map(|m| inverse(m).map_err(crate::geometry::GeomError::from))
        .collect::<Result<_, _>>()?;
    let dim = n + n * n;

    // matrix entry b^j_A as a scalar field
    let bfield = |j: usize, blk: usize| {
        let row = ms[blk][j].clone();
        ScalarField::from_fn(
            &space,
            format!("b{}_{}", j + 1, blk + 1),
            move |at, depth| {
                let seeds = at.seed(depth)?;
                let mut acc = Jet::constant(0.0);
                for (a, c) in row.iter().enumerate() {
                    if *c != 0.0 {
                        acc = acc + &seeds[n + blk * n + a] * *c;
                    }
                }
                Ok(acc)
            },
        )
    };
    let b: Vec<Vec<ScalarField>> = (0..n)
        .map(|blk| (0..n).map(|j| bfield(j, blk)).collect())
        .collect();

    let mut fields: IndexMap<String, VectorField> = IndexMap::new();
    for i in 0..n {
        let gi: Vec<Vec<ScalarField>> = (0..n).map(|k| g[k][i].clone()).collect();
        let (b, minv) = (b.clone(), minv.clone());
        fields.insert(
            h(i),
            VectorField::from_fn(&space, h(i), move |at, depth| {
                let mut out = vec![Jet::constant(0.0); dim];
                out[i] = Jet::constant(1.0);
                let gv = gi
                    .iter()
                    .map(|r| {
                        r.iter()
                            .map(|s| s.eval(at, depth))
                            .collect::<Result<Vec<_>, _>>()
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                for blk in 0..n {
                    let bv = b[blk]
                        .iter()
                        .map(|s| s.eval(at, depth))
                        .collect::<Result<Vec<_>, _>>()?;
                    // components along ∂/∂b^k_A
                    let comp: Vec<Jet> = (0..n)
                        .map(|k| {
                            let mut acc = Jet::constant(0.0);
                            for j in 0..n {
                                acc = acc - &gv[k][j] * &bv[j];
                            }
                            acc
                        })
                        .collect();
                    for a in 0..n {
                        let mut acc = Jet::constant(0.0);
                        for (k, ck) in comp.iter().enumerate() {
                            if minv[blk][a][k] != 0.0 {
                                acc = acc + ck * minv[blk][a][k];
                            }
                        }
                        out[n + blk * n + a] = acc;
                    }
                }
                Ok(out)
            }),
        );
    }
    for blk in 0..n {
        for c in 0..n {
            let col: Vec<f64> = (0..n).map(|a| minv[blk][a][c]).collect();
            fields.insert(
                vert(blk, c),
                VectorField::from_fn(&space, vert(blk, c), move |_, _| {
                    let mut out = vec![Jet::constant(0.0); dim];
                    for (a, v) in col.iter().enumerate() {
                        out[n + blk * n + a] = Jet::constant(*v);
                    }
                    Ok(out)
                }),
            );
        }
    }

    let big_b = curvature_oracle(&g)?;
    let mut rows = Vec::new();
    for blk in 0..n {
        for other in 0..n {
            for a in 0..n {
                for c in 0..n {
                    rows.push(Expected::new(
                        Op::Nabla,
                        vert(blk, a),
                        vert(other, c),
                        vec![],
                        "nabla(V^A_a,V^B_b)",
                        "∇_(V^A_a) V^B_b = 0",
                    ));
                    rows.push(Expected::new(
                        Op::Torsion,
                        vert(blk, a),
                        vert(other, c),
                        vec![],
                        "torsion(V^A_a,V^B_b)",
                        "T(V^A_a,V^B_b) = 0",
                    ));
                }
            }
        }
        for a in 0..n {
            for c in 0..n {
                rows.push(Expected::new(
                    Op::Nabla,
                    vert(blk, a),
                    h(c),
                    vec![],
                    "nabla(V^A_a,H_b)",
                    "∇_(V^A_a) H_b = 0",
                ));
                rows.push(Expected::new(
                    Op::Torsion,
                    vert(blk, a),
                    h(c),
                    vec![],
                    "torsion(V^A_a,H_b)",
                    "T(V^A_a,H_b) = 0",
                ));
            }
        }
    }
    for a in 0..n {
        for bb in 0..n {
            for blk in 0..n {
                let comps = (0..n)
                    .map(|c| (vert(blk, c), g[c][a][bb].clone()))
                    .collect::<Vec<_>>();
                rows.push(Expected::new(
                    Op::Nabla,
                    h(a),
                    vert(blk, bb),
                    comps.clone(),
                    "nabla(H_a,V^B_b)",
                    "∇_(H_a) V^B_b = Γ^c_ab V^B_c",
                ));
                rows.push(Expected::new(
                    Op::Bracket,
                    h(a),
                    vert(blk, bb),
                    comps,
                    "bracket(H_a,V^A_b)",
                    "[H_a,V^A_b] = Γ^c_ab V^A_c",
                ));
            }
            rows.push(Expected::new(
                Op::Nabla,
                h(a),
                h(bb),
                (0..n).map(|c| (h(c), g[c][a][bb].clone())).collect(),
                "nabla(H_a,H_b)",
                "∇_(H_a) H_b = Γ^c_ab H_c",
            ));
            let mut curv = Vec::new();
            for blk in 0..n {
                for c in 0..n {
                    let mut t = ScalarField::constant(&space, 0.0);
                    for d in 0..n {
                        t = t.add(&big_b[c][d][a][bb].mul(&b[blk][d])?)?;
                    }
                    curv.push((vert(blk, c), t));
                }
            }
            rows.push(Expected::new(
                Op::Bracket,
                h(a),
                h(bb),
                curv.clone(),
                "bracket(H_a,H_b)",
                "[H_a,H_b] = curvature w^d_A V^A_c",
            ));
            rows.push(Expected::new(
                Op::Curvature,
                h(a),
                h(bb),
                curv.clone(),
                "curvature(H_a,H_b)",
                "R(H_a,H_b) = P_V [H_a,H_b]",
            ));
            let mut tors = Vec::new();
            for c in 0..n {
                tors.push((h(c), g[c][a][bb].sub(&g[c][bb][a])?));
            }
            for (name, t) in curv {
                tors.push((name, t.scale(-1.0)));
            }
            rows.push(Expected::new(
                Op::Torsion,
                h(a),
                h(bb),
                tors,
                "torsion(H_a,H_b)",
                "T(H_a,H_b) = (Γ^c_ab - Γ^c_ba) H_c - curvature w^d_A V^A_c",
            ));
        }
    }

    let cycle_text = cycle
        .iter()
        .map(|c| (c + 1).to_string())
        .collect::<Vec<_>>()
        .join(" ");
    let description = format!(
        "frame bundle of a {n}-manifold, coordinates from the decomposition of the permutation [{cycle_text}], connection coefficients {}",
        gamma
            .iter()
            .flatten()
            .flatten()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(", ")
    );
    Scenario::assemble(
        Parts {
            name: "frame-bundle".into(),
            description,
            reference: FRAME_REF.into(),
            space,
            fields,
            orientation: Orientation::KHorizontal,
            k: (0..n).map(h).collect(),
            blocks: (0..n).map(|blk| (0..n).map(|c| vert(blk, c)).collect()).collect(),
            pairing: None,
            expected: rows,
            metric: None,
            notes: vec![
                "V{A}_{b} is the coordinate field of the matrix entry b^b_A, written in the decomposition coordinates w.".into(),
            ],
            family: Family::FrameBundle { n, decomposition },
        },
        settings,
    )
}

/// `n = 2`, cycle `(1 2)`, `Γ^2_12 = x1`, `Γ^1_22 = x1 x2`.
pub(crate) fn default_frame_bundle(settings: Settings) -> Result<Scenario, ScenarioError> {
    let z = || Expr::constant(0.0);
    let mut gamma = vec![
        vec![vec![z(), z()], vec![z(), z()]],
        vec![vec![z(), z()], vec![z(), z()]],
    ];
    gamma[1][0][1] = crate::expr::parse("x1").expect("literal parses");
    gamma[0][1][1] = crate::expr::parse("x1*x2").expect("literal parses");
    frame_bundle(2, &[1, 0], gamma, settings)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_cycle_spans_columns() {
        let d = cycle_decomposition(2, &[1, 0]).unwrap();
        assert_eq!(d.bases[0], vec![unit(2, 0, 0), unit(2, 1, 0)]);
        assert_eq!(d.bases[1], vec![unit(2, 0, 1), unit(2, 1, 1)]);
        assert!(d.check().all());
    }

    #[test]
    fn rejects_non_cycles() {
        assert!(cycle_decomposition(3, &[1, 0, 2]).is_err());
        assert!(cycle_decomposition(3, &[0, 0, 1]).is_err());
        assert!(cycle_decomposition(1, &[0]).is_ok());
    }

    #[test]
    fn rank_is_exact() {
        assert_eq!(int_rank(&[vec![1, 2], vec![2, 4]]), 1);
        assert_eq!(int_rank(&[vec![0, 1], vec![1, 0]]), 2);
    }

    #[test]
    fn coordinate_change_round_trips() {
        let d = cycle_decomposition(3, &[2, 0, 1]).unwrap();
        let w: Vec<f64> = (0..9).map(|i| i as f64 * 0.25 + 0.5).collect();
        let back = d.from_matrix_coords(&d.to_matrix_coords(&w)).unwrap();
        assert_eq!(back, w);
    }
}
