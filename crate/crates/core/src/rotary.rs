//! Block-diagonal rotations and rotary attention scores.
//!
//! Pair `i` occupies scalar components `(2i, 2i+1)` and is rotated by
//! `θ_i · p`, where `p` is the component of the position triple selected by
//! the pair's axis label. Rotations are applied per pair; the `d×d` matrix is
//! never built. Scores are raw dot products: no softmax, no `1/√d`.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::freq_alloc::{AxisLabel, FrequencyAllocation};
use crate::position::PositionTriple;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RotaryError {
    #[error("vector has {found} components, allocation expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{what}: {left} vs {right} entries")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },
    #[error("vector components must be finite")]
    NonFinite,
}

/// A query or key vector.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadVector(Vec<f64>);

impl HeadVector {
    pub fn new(components: Vec<f64>) -> Result<Self, RotaryError> {
        if components.iter().all(|c| c.is_finite()) {
            Ok(Self(components))
        } else {
            Err(RotaryError::NonFinite)
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn dot(&self, other: &HeadVector) -> f64 {
        dot(&self.0, &other.0)
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(dot(&self.0, &self.0))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl From<HeadVector> for Vec<f64> {
    fn from(v: HeadVector) -> Self {
        v.0
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The coordinate a pair with label `axis` reads from `p`.
pub fn axis_component(axis: AxisLabel, p: &PositionTriple) -> f64 {
    match axis {
        AxisLabel::Sequence | AxisLabel::Temporal => p.t,
        AxisLabel::SpatialX => p.x,
        AxisLabel::SpatialY => p.y,
    }
}

/// Per-pair rotation arguments `φ_i = θ_i · Δ_axis(i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativeAngles(Vec<f64>);

impl RelativeAngles {
    pub fn new(alloc: &FrequencyAllocation, offset: &PositionTriple) -> Self {
        Self(
            alloc
                .pairs()
                .iter()
                .map(|p| {
                    if p.theta == 0.0 {
                        0.0
                    } else {
                        p.theta * axis_component(p.axis, offset)
                    }
                })
                .collect(),
        )
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Cached `(cos φ_i, sin φ_i)` for one offset; reused across many vectors.
///
/// Arguments go straight to `libm::cos`/`libm::sin`, whose argument
/// reduction is exact for any finite input.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationTable {
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl RotationTable {
    pub fn new(alloc: &FrequencyAllocation, offset: &PositionTriple) -> Self {
        Self::from_angles(&RelativeAngles::new(alloc, offset))
    }

    pub fn from_angles(angles: &RelativeAngles) -> Self {
        let (cos, sin) = angles
            .as_slice()
            .iter()
            .map(|&phi| {
                if phi == 0.0 {
                    (1.0, 0.0)
                } else {
                    (libm::cos(phi), libm::sin(phi))
                }
            })
            .unzip();
        Self { cos, sin }
    }

    pub fn pair_count(&self) -> usize {
        self.cos.len()
    }

    pub fn cos(&self) -> &[f64] {
        &self.cos
    }

    pub fn sin(&self) -> &[f64] {
        &self.sin
    }

    /// `q · R k` for raw slices of length `2 · pair_count`.
    pub fn score(&self, q: &[f64], k: &[f64]) -> f64 {
        debug_assert_eq!(q.len(), 2 * self.cos.len());
        debug_assert_eq!(k.len(), 2 * self.cos.len());
        let mut acc = 0.0;
        for (i, (c, s)) in self.cos.iter().zip(&self.sin).enumerate() {
            let (qa, qb) = (q[2 * i], q[2 * i + 1]);
            let (ka, kb) = (k[2 * i], k[2 * i + 1]);
            acc += (qa * ka + qb * kb) * c + (qa * kb - qb * ka) * s;
        }
        acc
    }
}

fn check_dim(alloc: &FrequencyAllocation, v: &HeadVector) -> Result<(), RotaryError> {
    if v.len() != alloc.dim() || alloc.pairs().len() * 2 != alloc.dim() {
        return Err(RotaryError::DimensionMismatch {
            expected: alloc.dim(),
            found: v.len(),
        });
    }
    Ok(())
}

/// Rotates each pair of `v` by `θ_i · p_axis(i)`; zero-angle pairs are copied.
pub fn rotate(
    v: &HeadVector,
    pos: &PositionTriple,
    alloc: &FrequencyAllocation,
) -> Result<HeadVector, RotaryError> {
    check_dim(alloc, v)?;
    let src = v.as_slice();
    let mut out = vec![0.0; src.len()];
    for p in alloc.pairs() {
        let (a, b) = (2 * p.pair_index, 2 * p.pair_index + 1);
        if p.theta == 0.0 {
            out[a] = src[a];
            out[b] = src[b];
            continue;
        }
        let phi = p.theta * axis_component(p.axis, pos);
        let (s, c) = (libm::sin(phi), libm::cos(phi));
        out[a] = src[a] * c - src[b] * s;
        out[b] = src[a] * s + src[b] * c;
    }
    Ok(HeadVector(out))
}

/// `rotate(q, pos_q) · rotate(k, pos_k)`.
pub fn attention_score(
    q: &HeadVector,
    k: &HeadVector,
    pos_q: &PositionTriple,
    pos_k: &PositionTriple,
    alloc: &FrequencyAllocation,
) -> Result<f64, RotaryError> {
    let rq = rotate(q, pos_q, alloc)?;
    let rk = rotate(k, pos_k, alloc)?;
    Ok(rq.dot(&rk))
}

/// `q · R_Δ k` evaluated from per-pair relative angles.
pub fn relative_score(
    q: &HeadVector,
    k: &HeadVector,
    delta: &PositionTriple,
    alloc: &FrequencyAllocation,
) -> Result<f64, RotaryError> {
    check_dim(alloc, q)?;
    check_dim(alloc, k)?;
    Ok(RotationTable::new(alloc, delta).score(q.as_slice(), k.as_slice()))
}

/// Dense row-major score matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ScoreMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }
}

/// Entry `(n, m)` is `attention_score(qs[n], ks[m], q_pos[n], k_pos[m])`.
/// No causal mask.
pub fn pairwise_score_matrix(
    qs: &[HeadVector],
    ks: &[HeadVector],
    q_positions: &[PositionTriple],
    k_positions: &[PositionTriple],
    alloc: &FrequencyAllocation,
) -> Result<ScoreMatrix, RotaryError> {
    if qs.len() != q_positions.len() {
        return Err(RotaryError::LengthMismatch {
            what: "queries vs query positions",
            left: qs.len(),
            right: q_positions.len(),
        });
    }
    if ks.len() != k_positions.len() {
        return Err(RotaryError::LengthMismatch {
            what: "keys vs key positions",
            left: ks.len(),
            right: k_positions.len(),
        });
    }
    let rq = qs
        .iter()
        .zip(q_positions)
        .map(|(q, p)| rotate(q, p, alloc))
        .collect::<Result<Vec<_>, _>>()?;
    let rk = ks
        .iter()
        .zip(k_positions)
        .map(|(k, p)| rotate(k, p, alloc))
        .collect::<Result<Vec<_>, _>>()?;
    let data = rq
        .iter()
        .flat_map(|q| rk.iter().map(move |k| q.dot(k)))
        .collect();
    Ok(ScoreMatrix {
        rows: qs.len(),
        cols: ks.len(),
        data,
    })
}
