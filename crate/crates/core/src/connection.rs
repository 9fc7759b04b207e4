//! Ehresmann connection data and K/L endomorphism splits, validated at
//! construction.

use std::sync::Arc;

use thiserror::Error;

use crate::geometry::{Basis, Endo11, Frame, GeomError, Sampling, ScalarField, Space, VectorField};
use crate::linalg::{inverse, Matrix};
use crate::report::{
    pairs_deviation, sup_over_points, zero_deviation, CheckRecord, Deviation, CONSTRUCTION_TOL,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConnectionError {
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error("rank mismatch: {0}")]
    Rank(String),
    #[error("identity `{identity}` fails: deviation {deviation:e} at {point:?}")]
    Identity {
        identity: String,
        deviation: f64,
        point: Option<Vec<f64>>,
    },
    #[error("{0}")]
    Invalid(String),
}

fn require(records: Vec<CheckRecord>) -> Result<Vec<CheckRecord>, ConnectionError> {
    if let Some(bad) = records.iter().find(|r| !r.pass) {
        return Err(ConnectionError::Identity {
            identity: match &bad.error {
                Some(e) => format!("{} ({e})", bad.check_id),
                None => bad.check_id.clone(),
            },
            deviation: bad.max_dev,
            point: bad.worst_point.clone(),
        });
    }
    Ok(records)
}

fn rank_error(e: GeomError) -> ConnectionError {
    match e {
        GeomError::Shape(msg) => ConnectionError::Rank(msg),
        other => ConnectionError::Geom(other),
    }
}

/// Vertical and horizontal frames with their projectors.
#[derive(Debug, Clone)]
pub struct EhresmannConnection {
    space: Arc<Space>,
    vertical: Frame,
    horizontal: Frame,
    basis: Basis,
    p_v: Endo11,
    p_h: Endo11,
}

/// Builds and validates a connection from its two frames.
pub fn build_connection(
    vertical: Frame,
    horizontal: Frame,
    sampling: &Sampling,
) -> Result<EhresmannConnection, ConnectionError> {
    let basis = Basis::new(vec![vertical.clone(), horizontal.clone()]).map_err(rank_error)?;
    basis.validate(sampling)?;
    let p_v = basis.projector(&[0])?.renamed("P_V");
    let p_h = basis.projector(&[1])?.renamed("P_H");
    let conn = EhresmannConnection {
        space: vertical.space().clone(),
        vertical,
        horizontal,
        basis,
        p_v,
        p_h,
    };
    require(conn.identity_checks(sampling, CONSTRUCTION_TOL))?;
    Ok(conn)
}

impl EhresmannConnection {
    pub fn space(&self) -> &Arc<Space> {
        &self.space
    }

    pub fn vertical(&self) -> &Frame {
        &self.vertical
    }

    pub fn horizontal(&self) -> &Frame {
        &self.horizontal
    }

    /// The combined frame, vertical fields first.
    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn p_v(&self) -> &Endo11 {
        &self.p_v
    }

    pub fn p_h(&self) -> &Endo11 {
        &self.p_h
    }

    /// Largest `|dπ(V_i)|`: pushes the vertical frame through the
    /// projection map when one is given, otherwise reads the components
    /// along base coordinates. Zero when the space carries neither.
    pub fn verticality_defect(&self, sampling: &Sampling) -> Result<Deviation, GeomError> {
        if let Some(proj) = self.space.projection() {
            let comps = proj
                .iter()
                .map(|e| ScalarField::from_expr(&self.space, e.clone()))
                .collect::<Result<Vec<_>, _>>()?;
            let pushed = self
                .vertical
                .fields()
                .iter()
                .flat_map(|v| comps.iter().map(move |c| v.apply(c)))
                .collect::<Result<Vec<_>, _>>()?;
            sup_over_points(sampling, |at| {
                pushed
                    .iter()
                    .try_fold(0.0_f64, |m, f| Ok(m.max(f.value(at)?.abs())))
            })
        } else if let Some(base) = self.space.base() {
            let base = base.to_vec();
            let fields = self.vertical.fields().to_vec();
            sup_over_points(sampling, |at| {
                let mut m = 0.0_f64;
                for v in &fields {
                    let c = v.value(at)?;
                    for &i in &base {
                        m = m.max(c[i].abs());
                    }
                }
                Ok(m)
            })
        } else {
            Ok(Deviation::zero())
        }
    }

    /// `P_V + P_H = I`, `P_V∘P_V = P_V`, `P_V∘P_H = 0` on the combined
    /// frame, and verticality of the vertical frame.
    pub fn identity_checks(&self, sampling: &Sampling, threshold: f64) -> Vec<CheckRecord> {
        let frame: Vec<VectorField> = self.basis.fields().cloned().collect();
        let sum = (|| {
            let mut pairs = Vec::new();
            for e in &frame {
                pairs.push((self.p_v.apply(e)?.add(&self.p_h.apply(e)?)?, e.clone()));
            }
            pairs_deviation(sampling, &pairs)
        })();
        let idem = (|| {
            let pvpv = self.p_v.compose(&self.p_v)?;
            let phph = self.p_h.compose(&self.p_h)?;
            let mut pairs = Vec::new();
            for e in &frame {
                pairs.push((pvpv.apply(e)?, self.p_v.apply(e)?));
                pairs.push((phph.apply(e)?, self.p_h.apply(e)?));
            }
            pairs_deviation(sampling, &pairs)
        })();
        let orth = (|| {
            let a = self.p_v.compose(&self.p_h)?;
            let b = self.p_h.compose(&self.p_v)?;
            let mut zeros = Vec::new();
            for e in &frame {
                zeros.push(a.apply(e)?);
                zeros.push(b.apply(e)?);
            }
            zero_deviation(sampling, &zeros)
        })();
        vec![
            CheckRecord::measured("connection.projector-sum", "P_V + P_H = I", threshold, sum),
            CheckRecord::measured(
                "connection.idempotent",
                "P_V∘P_V = P_V, P_H∘P_H = P_H",
                threshold,
                idem,
            ),
            CheckRecord::measured(
                "connection.complementary",
                "P_V∘P_H = 0 = P_H∘P_V",
                threshold,
                orth,
            ),
            CheckRecord::measured(
                "connection.vertical",
                "vertical frame annihilated by dπ",
                threshold,
                self.verticality_defect(sampling),
            ),
        ]
    }
}

/// Which side of the connection plays the role of `K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// `K = V`, blocks split `H`.
    KVertical,
    /// `K = H`, blocks split `V`.
    KHorizontal,
}

/// A distribution `K` with blocks `L_1..L_N` of equal rank and the
/// endomorphism pairs between them.
///
/// In `K`/`L` terms `S_A` maps `L_A` onto `K` and `Q_A` maps `K` onto `L_A`.
/// With [`Orientation::KHorizontal`] the usual vertical/horizontal labels
/// swap: the vertical endomorphisms are the `Q_A` here. Use
/// [`SplitStructure::vertical_endos`] and [`SplitStructure::horizontal_endos`]
/// for the labelled view.
#[derive(Debug, Clone)]
pub struct SplitStructure {
    conn: EhresmannConnection,
    orientation: Orientation,
    k: Frame,
    blocks: Vec<Frame>,
    basis: Basis,
    pairing: Matrix<f64>,
    s_parts: Vec<Endo11>,
    q_parts: Vec<Endo11>,
    s: Endo11,
    q: Endo11,
    p_k: Endo11,
    p_blocks: Vec<Endo11>,
}

/// Canonical endomorphisms: `S_A = Σ_b ω^b_A ⊗ k_b` and `Q_A = Σ_b κ^b ⊗ e^A_b`,
/// pairing the `b`-th block field with the `b`-th `K` field unless a pairing
/// matrix is given, in which case `S_A(e^A_b) = Σ_c pairing[c][b] k_c`.
pub fn canonical_endos(
    conn: &EhresmannConnection,
    orientation: Orientation,
    blocks: Vec<Frame>,
    pairing: Option<Matrix<f64>>,
    sampling: &Sampling,
) -> Result<SplitStructure, ConnectionError> {
    let (k, other, p_other) = match orientation {
        Orientation::KVertical => (conn.vertical.clone(), &conn.horizontal, &conn.p_h),
        Orientation::KHorizontal => (conn.horizontal.clone(), &conn.vertical, &conn.p_v),
    };
    let r = k.rank();
    if blocks.is_empty() {
        return Err(ConnectionError::Rank(
            "at least one block is required".into(),
        ));
    }
    for b in &blocks {
        if b.rank() != r {
            return Err(ConnectionError::Rank(format!(
                "block `{}` has rank {}, `{}` has rank {r}",
                b.name(),
                b.rank(),
                k.name()
            )));
        }
    }
    if blocks.len() * r != other.rank() {
        return Err(ConnectionError::Rank(format!(
            "blocks have total rank {}, `{}` has rank {}",
            blocks.len() * r,
            other.name(),
            other.rank()
        )));
    }
    let pairing = pairing.unwrap_or_else(|| crate::linalg::identity(r));
    if pairing.len() != r || pairing.iter().any(|row| row.len() != r) {
        return Err(ConnectionError::Rank(format!(
            "pairing matrix must be {r} × {r}"
        )));
    }
    let pairing_inv = inverse(&pairing)
        .map_err(|_| ConnectionError::Invalid("pairing matrix is singular".into()))?;

    let inside = (|| {
        let mut pairs = Vec::new();
        for f in blocks.iter().flat_map(|b| b.fields()) {
            pairs.push((p_other.apply(f)?, f.clone()));
        }
        pairs_deviation(sampling, &pairs)
    })();
    require(vec![CheckRecord::measured(
        "split.blocks-inside",
        "blocks lie in the complementary distribution",
        CONSTRUCTION_TOL,
        inside,
    )])?;

    let mut frames = vec![k.clone()];
    frames.extend(blocks.iter().cloned());
    let basis = Basis::new(frames).map_err(rank_error)?;
    basis.validate(sampling)?;

    let n = blocks.len();
    let dim = basis.rank();
    let norm = 1.0 / (n as f64).sqrt();
    let mut s_parts = Vec::new();
    let mut q_parts = Vec::new();
    let mut s_all = crate::linalg::zeros::<f64>(dim, dim);
    let mut q_all = crate::linalg::zeros::<f64>(dim, dim);
    for a in 0..n {
        let off = r * (a + 1);
        let mut cs = crate::linalg::zeros::<f64>(dim, dim);
        let mut cq = crate::linalg::zeros::<f64>(dim, dim);
        for b in 0..r {
            for c in 0..r {
                cs[c][off + b] = pairing[c][b];
                cq[off + b][c] = pairing_inv[b][c];
                s_all[c][off + b] = pairing[c][b] * norm;
                q_all[off + b][c] = pairing_inv[b][c] * norm;
            }
        }
        s_parts.push(basis.endo(format!("S_{}", a + 1), cs)?);
        q_parts.push(basis.endo(format!("Q_{}", a + 1), cq)?);
    }
    let s = basis.endo("S", s_all)?;
    let q = basis.endo("Q", q_all)?;
    let p_k = basis.projector(&[0])?.renamed(format!("P_{}", k.name()));
    let p_blocks = (0..n)
        .map(|a| {
            basis
                .projector(&[a + 1])
                .map(|p| p.renamed(format!("P_{}", blocks[a].name())))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let split = SplitStructure {
        conn: conn.clone(),
        orientation,
        k,
        blocks,
        basis,
        pairing,
        s_parts,
        q_parts,
        s,
        q,
        p_k,
        p_blocks,
    };
    require(split.validate_split(sampling, CONSTRUCTION_TOL))?;
    Ok(split)
}

impl SplitStructure {
    pub fn connection(&self) -> &EhresmannConnection {
        &self.conn
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn k(&self) -> &Frame {
        &self.k
    }

    pub fn blocks(&self) -> &[Frame] {
        &self.blocks
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// `[K, L_1, .., L_N]`.
    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn pairing(&self) -> &Matrix<f64> {
        &self.pairing
    }

    pub fn space(&self) -> &Arc<Space> {
        self.conn.space()
    }

    /// `S_A : L_A → K`.
    pub fn s_parts(&self) -> &[Endo11] {
        &self.s_parts
    }

    /// `Q_A : K → L_A`.
    pub fn q_parts(&self) -> &[Endo11] {
        &self.q_parts
    }

    /// `Σ S_A / √N`.
    pub fn s(&self) -> &Endo11 {
        &self.s
    }

    /// `Σ Q_A / √N`.
    pub fn q(&self) -> &Endo11 {
        &self.q
    }

    pub fn p_k(&self) -> &Endo11 {
        &self.p_k
    }

    pub fn p_blocks(&self) -> &[Endo11] {
        &self.p_blocks
    }

    /// Endomorphisms with vertical image, one per block.
    pub fn vertical_endos(&self) -> &[Endo11] {
        match self.orientation {
            Orientation::KVertical => &self.s_parts,
            Orientation::KHorizontal => &self.q_parts,
        }
    }

    /// Endomorphisms with horizontal image, one per block.
    pub fn horizontal_endos(&self) -> &[Endo11] {
        match self.orientation {
            Orientation::KVertical => &self.q_parts,
            Orientation::KHorizontal => &self.s_parts,
        }
    }

    /// Every projector of the split: `P_K` then the block projectors.
    pub fn projectors(&self) -> Vec<Endo11> {
        let mut v = vec![self.p_k.clone()];
        v.extend(self.p_blocks.iter().cloned());
        v
    }

    /// Copy with `Q_a` and `Q_b` exchanged and no validation. Used as a
    /// negative control.
    pub fn with_swapped_q_unchecked(&self, a: usize, b: usize) -> SplitStructure {
        let mut out = self.clone();
        out.q_parts.swap(a, b);
        out
    }

    /// Reorders the fields of `K` and of every block by `perm` (new index
    /// `i` takes old field `perm[i]`), keeping the pairing of fields.
    pub fn reordered(
        &self,
        perm: &[usize],
        sampling: &Sampling,
    ) -> Result<SplitStructure, ConnectionError> {
        let r = self.k.rank();
        let mut seen = vec![false; r];
        if perm.len() != r
            || perm
                .iter()
                .any(|&i| i >= r || std::mem::replace(&mut seen[i], true))
        {
            return Err(ConnectionError::Invalid(
                "not a permutation of the frame indices".into(),
            ));
        }
        let re = |f: &Frame| {
            Frame::new(
                f.name(),
                perm.iter().map(|&i| f.fields()[i].clone()).collect(),
            )
        };
        let k = re(&self.k)?;
        let blocks = self.blocks.iter().map(re).collect::<Result<Vec<_>, _>>()?;
        let pairing = perm
            .iter()
            .map(|&c| perm.iter().map(|&b| self.pairing[c][b]).collect())
            .collect();
        let (v, h) = match self.orientation {
            Orientation::KVertical => (k, self.conn.horizontal.clone()),
            Orientation::KHorizontal => (self.conn.vertical.clone(), k),
        };
        let conn = build_connection(v, h, sampling)?;
        canonical_endos(&conn, self.orientation, blocks, Some(pairing), sampling)
    }

    /// The algebraic identities of the split, applied to every field of the
    /// combined frame.
    pub fn validate_split(&self, sampling: &Sampling, threshold: f64) -> Vec<CheckRecord> {
        let frame: Vec<VectorField> = self.basis.fields().cloned().collect();
        let n = self.n_blocks();
        let mut out = Vec::new();

        let kernel_image = (|| {
            let mut pairs = Vec::new();
            for (a, s_a) in self.s_parts.iter().enumerate() {
                for (i, e) in frame.iter().enumerate() {
                    let se = s_a.apply(e)?;
                    pairs.push((self.p_k.apply(&se)?, se.clone()));
                    if !self.basis.block(a + 1).contains(&i) {
                        pairs.push((se, VectorField::zero(self.space())));
                    }
                }
            }
            pairs_deviation(sampling, &pairs)
        })();
        out.push(CheckRecord::measured(
            "split.kernel-image",
            "Ker(S_A) contains the complement of L_A, Img(S_A) in K",
            threshold,
            kernel_image,
        ));

        let compose_check =
            |lhs: &dyn Fn(usize, usize) -> Result<Option<(Endo11, Endo11)>, GeomError>| {
                let mut pairs = Vec::new();
                for a in 0..n {
                    for b in 0..n {
                        if let Some((l, r)) = lhs(a, b)? {
                            for e in &frame {
                                pairs.push((l.apply(e)?, r.apply(e)?));
                            }
                        }
                    }
                }
                pairs_deviation(sampling, &pairs)
            };
        let zero = Endo11::zero(self.space());

        out.push(CheckRecord::measured(
            "split.qs",
            "Q_A∘S_A = P_{L_A}",
            threshold,
            compose_check(&|a, b| {
                if a != b {
                    return Ok(None);
                }
                Ok(Some((
                    self.q_parts[a].compose(&self.s_parts[a])?,
                    self.p_blocks[a].clone(),
                )))
            }),
        ));
        out.push(CheckRecord::measured(
            "split.sq",
            "S_A∘Q_A = P_K",
            threshold,
            compose_check(&|a, b| {
                if a != b {
                    return Ok(None);
                }
                Ok(Some((
                    self.s_parts[a].compose(&self.q_parts[a])?,
                    self.p_k.clone(),
                )))
            }),
        ));
        out.push(CheckRecord::measured(
            "split.cross",
            "S_A∘Q_B = 0 for A ≠ B",
            threshold,
            compose_check(&|a, b| {
                if a == b {
                    Ok(None)
                } else {
                    Ok(Some((
                        self.s_parts[a].compose(&self.q_parts[b])?,
                        zero.clone(),
                    )))
                }
            }),
        ));
        out.push(CheckRecord::measured(
            "split.aggregate",
            "S∘Q = P_K with S = ΣS_A/√N, Q = ΣQ_A/√N",
            threshold,
            compose_check(&|a, b| {
                if a == 0 && b == 0 {
                    Ok(Some((self.s.compose(&self.q)?, self.p_k.clone())))
                } else {
                    Ok(None)
                }
            }),
        ));
        out
    }
}
