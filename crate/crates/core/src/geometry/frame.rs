use std::ops::Range;
use std::sync::Arc;

use crate::jets::Jet;
use crate::linalg::{inverse, mat_vec, norm, singular_value_ratio, values, Matrix};

use super::cache::PointCache;
use super::endo::Endo11;
use super::field::{check_same, CovectorField, VectorField};
use super::space::{At, Sampling, Space};
use super::GeomError;

/// Smallest admissible ratio of extreme singular values for a frame.
pub const FRAME_RATIO_MIN: f64 = 1e-8;

/// An ordered list of pointwise independent vector fields.
#[derive(Debug, Clone)]
pub struct Frame {
    name: String,
    space: Arc<Space>,
    fields: Vec<VectorField>,
}

impl Frame {
    pub fn new(name: impl Into<String>, fields: Vec<VectorField>) -> Result<Self, GeomError> {
        let name = name.into();
        let space = fields
            .first()
            .ok_or_else(|| GeomError::Invalid(format!("frame `{name}` is empty")))?
            .space()
            .clone();
        for f in &fields {
            check_same(&space, f.space())?;
        }
        Ok(Frame {
            name,
            space,
            fields,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn space(&self) -> &Arc<Space> {
        &self.space
    }

    pub fn fields(&self) -> &[VectorField] {
        &self.fields
    }

    pub fn rank(&self) -> usize {
        self.fields.len()
    }

    /// Column matrix `n × r` of the frame at a point.
    pub fn columns(&self, at: &At<'_>, depth: usize) -> Result<Matrix<Jet>, GeomError> {
        let cols = self
            .fields
            .iter()
            .map(|f| f.eval(at, depth))
            .collect::<Result<Vec<_>, _>>()?;
        let n = self.space.ambient_dim();
        Ok((0..n)
            .map(|i| cols.iter().map(|c| c[i].clone()).collect())
            .collect())
    }

    /// Checks pointwise independence at every sample point.
    pub fn validate(&self, sampling: &Sampling) -> Result<(), GeomError> {
        for p in &sampling.points {
            let at = At::new(p, sampling.budget);
            let m = values(&self.columns(&at, 0)?);
            let ratio = singular_value_ratio(&m);
            if ratio <= FRAME_RATIO_MIN {
                return Err(GeomError::SingularFrame {
                    frame: self.name.clone(),
                    point: p.clone(),
                    ratio,
                });
            }
        }
        Ok(())
    }
}

type Solved = (Matrix<Jet>, Matrix<Jet>);

/// Frames that together span the tangent space, in order. Index `i` of the
/// basis is the `i`-th field of the concatenation.
///
/// Pointwise solves are memoized; clones share the memo.
#[derive(Debug, Clone)]
pub struct Basis {
    name: String,
    space: Arc<Space>,
    frames: Vec<Frame>,
    offsets: Vec<usize>,
    cache: Arc<PointCache<Solved>>,
}

impl Basis {
    pub fn new(frames: Vec<Frame>) -> Result<Self, GeomError> {
        let space = frames
            .first()
            .ok_or_else(|| GeomError::Invalid("no frames given".into()))?
            .space()
            .clone();
        let mut offsets = vec![0];
        for f in &frames {
            check_same(&space, f.space())?;
            offsets.push(offsets.last().unwrap() + f.rank());
        }
        let rank = *offsets.last().unwrap();
        let name = frames.iter().map(Frame::name).collect::<Vec<_>>().join("+");
        if rank != space.dim() {
            return Err(GeomError::Shape(format!(
                "frames `{name}` have total rank {rank}, space `{}` has dimension {}",
                space.name(),
                space.dim()
            )));
        }
        Ok(Basis {
            name,
            space,
            frames,
            offsets,
            cache: Arc::default(),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn space(&self) -> &Arc<Space> {
        &self.space
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn rank(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Basis indices occupied by frame `k`.
    pub fn block(&self, k: usize) -> Range<usize> {
        self.offsets[k]..self.offsets[k + 1]
    }

    pub fn field(&self, i: usize) -> &VectorField {
        let k = self.offsets.partition_point(|&o| o <= i) - 1;
        &self.frames[k].fields()[i - self.offsets[k]]
    }

    pub fn fields(&self) -> impl Iterator<Item = &VectorField> {
        self.frames.iter().flat_map(|f| f.fields().iter())
    }

    /// The square matrix `[e_1 .. e_r | normals]`.
    fn square(&self, at: &At<'_>, depth: usize) -> Result<Matrix<Jet>, GeomError> {
        let mut m: Matrix<Jet> = vec![Vec::new(); self.space.ambient_dim()];
        for f in &self.frames {
            for (row, c) in m.iter_mut().zip(f.columns(at, depth)?) {
                row.extend(c);
            }
        }
        for nv in self.space.normals(at, depth)? {
            for (row, c) in m.iter_mut().zip(nv) {
                row.push(c);
            }
        }
        Ok(m)
    }

    /// Frame columns `E` (`n × r`) and the dual rows `Ω` (`r × n`), with
    /// `Ω E = I` and `Ω` annihilating constraint normals.
    pub fn solve_at(&self, at: &At<'_>, depth: usize) -> Result<Arc<Solved>, GeomError> {
        if depth > at.budget {
            return Err(GeomError::DepthExceeded {
                requested: depth,
                budget: at.budget,
                chain: vec![self.name.clone()],
            });
        }
        self.cache
            .get_or_try(at.point, depth, || self.solve_uncached(at, depth))
    }

    fn solve_uncached(&self, at: &At<'_>, depth: usize) -> Result<Solved, GeomError> {
        let m = self.square(at, depth)?;
        let ratio = singular_value_ratio(&values(&m));
        if ratio <= FRAME_RATIO_MIN {
            return Err(GeomError::SingularFrame {
                frame: self.name.clone(),
                point: at.point.to_vec(),
                ratio,
            });
        }
        let r = self.rank();
        let mut inv = inverse(&m)?;
        inv.truncate(r);
        let e = m.into_iter().map(|mut row| {
            row.truncate(r);
            row
        });
        Ok((e.collect(), inv))
    }

    /// Endomorphism whose matrix in this basis is `coeffs`, that is
    /// `T(e_j) = Σ_i coeffs[i][j] e_i`, and which kills constraint normals.
    pub fn endo(&self, name: impl Into<String>, coeffs: Matrix<f64>) -> Result<Endo11, GeomError> {
        let r = self.rank();
        if coeffs.len() != r || coeffs.iter().any(|c| c.len() != r) {
            return Err(GeomError::Shape(format!(
                "coefficient matrix must be {r} × {r}"
            )));
        }
        let basis = self.clone();
        let n = self.space.ambient_dim();
        let memo: Arc<PointCache<Matrix<Jet>>> = Arc::default();
        Ok(Endo11::from_fn(&self.space, name, move |at, depth| {
            if depth > at.budget {
                return Err(GeomError::DepthExceeded {
                    requested: depth,
                    budget: at.budget,
                    chain: Vec::new(),
                });
            }
            let m = memo.get_or_try(at.point, depth, || -> Result<Matrix<Jet>, GeomError> {
                let solved = basis.solve_at(at, depth)?;
                let (e, w) = (&solved.0, &solved.1);
                // (E C)
                let ec: Matrix<Jet> = e
                    .iter()
                    .map(|row| {
                        (0..r)
                            .map(|j| {
                                (0..r).fold(Jet::constant(0.0), |acc, k| {
                                    if coeffs[k][j] == 0.0 {
                                        acc
                                    } else {
                                        acc + &row[k] * coeffs[k][j]
                                    }
                                })
                            })
                            .collect()
                    })
                    .collect();
                let mut out = crate::linalg::zeros::<Jet>(n, n);
                for i in 0..n {
                    for (k, wk) in w.iter().enumerate() {
                        if ec[i][k].is_constant() && ec[i][k].value() == 0.0 {
                            continue;
                        }
                        for j in 0..n {
                            out[i][j] = &out[i][j] + &ec[i][k] * &wk[j];
                        }
                    }
                }
                Ok(out)
            })?;
            Ok((*m).clone())
        }))
    }

    /// Projector onto the span of the listed frames along the others.
    pub fn projector(&self, frames: &[usize]) -> Result<Endo11, GeomError> {
        let r = self.rank();
        let mut c = crate::linalg::zeros::<f64>(r, r);
        let mut names = Vec::new();
        for &k in frames {
            for i in self.block(k) {
                c[i][i] = 1.0;
            }
            names.push(self.frames[k].name());
        }
        self.endo(format!("P[{}]", names.join("+")), c)
    }

    /// Validates nonsingularity of the combined frame at every sample point.
    pub fn validate(&self, sampling: &Sampling) -> Result<(), GeomError> {
        for p in &sampling.points {
            self.solve_at(&At::new(p, sampling.budget), 0)?;
        }
        Ok(())
    }
}

/// The coframe dual to the concatenation of `frames`.
pub fn dual_coframe(frames: &[Frame]) -> Result<Vec<CovectorField>, GeomError> {
    let basis = Basis::new(frames.to_vec())?;
    Ok((0..basis.rank())
        .map(|i| {
            let b = basis.clone();
            let name = format!("ω^{}", basis.field(i).name());
            CovectorField::from_fn(basis.space(), name, move |at, depth| {
                Ok(b.solve_at(at, depth)?.1[i].clone())
            })
        })
        .collect())
}

/// Coefficients `c` with `v = Σ c_i e_i` at `at`.
pub fn frame_coefficients(basis: &Basis, at: &At<'_>, v: &[f64]) -> Result<Vec<f64>, GeomError> {
    let solved = basis.solve_at(at, 0)?;
    let (e, w) = (values(&solved.0), values(&solved.1));
    if v.len() != basis.space().ambient_dim() {
        return Err(GeomError::Shape(format!(
            "vector has {} components, expected {}",
            v.len(),
            basis.space().ambient_dim()
        )));
    }
    let c = mat_vec(&w, v);
    let back = mat_vec(&e, &c);
    let residual = norm(&v.iter().zip(&back).map(|(a, b)| a - b).collect::<Vec<_>>());
    if residual > 1e-10 * norm(v) + 1e-12 {
        return Err(GeomError::NotInSpan {
            frame: basis.name().to_string(),
            residual,
        });
    }
    Ok(c)
}

/// Projector with image `span(target)` and kernel `span(rest)`.
pub fn projector_from_split(target: &Frame, rest: &[Frame]) -> Result<Endo11, GeomError> {
    let mut frames = vec![target.clone()];
    frames.extend_from_slice(rest);
    Basis::new(frames)?.projector(&[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r3() -> (Arc<Space>, Frame, Frame) {
        let s = Space::chart("R3", ["x", "y", "th"]).unwrap().into_shared();
        let h = Frame::new(
            "H",
            vec![
                VectorField::parse(&s, "H1", &["1", "0", "cos(th)"]).unwrap(),
                VectorField::parse(&s, "H2", &["0", "1", "sin(th)"]).unwrap(),
            ],
        )
        .unwrap();
        let v = Frame::new("V", vec![VectorField::coordinate(&s, 2)]).unwrap();
        (s, h, v)
    }

    #[test]
    fn coordinate_frame_dual_is_differentials() {
        let s = Space::chart("R2", ["x", "y"]).unwrap().into_shared();
        let f = Frame::new(
            "d",
            vec![
                VectorField::coordinate(&s, 0),
                VectorField::coordinate(&s, 1),
            ],
        )
        .unwrap();
        let w = dual_coframe(&[f]).unwrap();
        let p = [0.3, 0.1];
        let at = At::new(&p, 3);
        assert_eq!(w[0].value(&at).unwrap(), vec![1.0, 0.0]);
        assert_eq!(w[1].value(&at).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn projector_properties() {
        let (s, h, v) = r3();
        let pv = projector_from_split(&v, std::slice::from_ref(&h)).unwrap();
        let ph = projector_from_split(&h, std::slice::from_ref(&v)).unwrap();
        let p = [0.1, 0.2, std::f64::consts::FRAC_PI_4];
        let at = At::new(&p, 3);
        assert!(
            crate::linalg::max_abs(&pv.apply(&h.fields()[0]).unwrap().value(&at).unwrap()) < 1e-15
        );
        let dth = VectorField::coordinate(&s, 2);
        assert!(crate::linalg::max_abs(&ph.apply(&dth).unwrap().value(&at).unwrap()) < 1e-15);
        assert_eq!(
            pv.apply(&dth).unwrap().value(&at).unwrap(),
            vec![0.0, 0.0, 1.0]
        );
    }

    #[test]
    fn coefficients_and_span_residual() {
        let (_, h, v) = r3();
        let basis = Basis::new(vec![h, v]).unwrap();
        let p = [0.0, 0.0, 0.3];
        let at = At::new(&p, 3);
        let e1 = basis.field(0).value(&at).unwrap();
        assert_eq!(
            frame_coefficients(&basis, &at, &e1).unwrap(),
            vec![1.0, 0.0, 0.0]
        );
        assert_eq!(
            frame_coefficients(&basis, &at, &[0.0; 3]).unwrap(),
            vec![0.0; 3]
        );
    }

    #[test]
    fn rank_mismatch_rejected() {
        let (_, h, _) = r3();
        assert!(matches!(Basis::new(vec![h]), Err(GeomError::Shape(_))));
    }

    #[test]
    fn degenerate_frame_reported() {
        let s = Space::chart("R2", ["x", "y"]).unwrap().into_shared();
        let f = Frame::new(
            "bad",
            vec![
                VectorField::parse(&s, "A", &["1", "x"]).unwrap(),
                VectorField::parse(&s, "B", &["1", "x"]).unwrap(),
            ],
        )
        .unwrap();
        let err = Basis::new(vec![f])
            .unwrap()
            .validate(&Sampling::standard(&s))
            .unwrap_err();
        assert!(matches!(err, GeomError::SingularFrame { .. }));
    }
}
