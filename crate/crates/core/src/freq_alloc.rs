//! Per-pair frequency tables for each positional-encoding strategy.
//!
//! Bookkeeping is by rotation pair `i ∈ [0, d/2)`; pair `i` owns scalar
//! components `2i` and `2i + 1`. A strategy decides which axis each pair
//! reads its position from and, for the hybrid strategies, which pairs are
//! frozen to a zero angle (an identity block).

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use thiserror::Error;

/// Default frequency base.
pub const DEFAULT_BASE: f64 = 10_000.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AllocError {
    #[error("embedding dimension must be even and at least 2, got {0}")]
    InvalidDimension(usize),
    #[error("frequency base must be a finite number greater than 1, got {0}")]
    InvalidBase(f64),
    #[error("unknown strategy `{0}` (expected vanilla, mrope, videorope, hope or hope_x)")]
    UnknownStrategy(String),
    #[error("strategy {strategy} requires d to be a multiple of {multiple_of}, got {d}")]
    Divisibility {
        strategy: Strategy,
        d: usize,
        multiple_of: usize,
    },
    #[error("expected {expected} temporal angles, got {found}")]
    TemporalCount { expected: usize, found: usize },
}

/// Embedding dimension and frequency base; `θ_i = b^(−2i/d)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotaryBase {
    d: usize,
    b: f64,
}

impl RotaryBase {
    pub fn new(d: usize, b: f64) -> Result<Self, AllocError> {
        if d < 2 || !d.is_multiple_of(2) {
            return Err(AllocError::InvalidDimension(d));
        }
        if !(b.is_finite() && b > 1.0) {
            return Err(AllocError::InvalidBase(b));
        }
        Ok(Self { d, b })
    }

    pub fn with_default_base(d: usize) -> Result<Self, AllocError> {
        Self::new(d, DEFAULT_BASE)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn base(&self) -> f64 {
        self.b
    }

    pub fn pair_count(&self) -> usize {
        self.d / 2
    }

    /// Angle of pair `i`.
    pub fn theta(&self, i: usize) -> f64 {
        let exponent = -((2 * i) as f64) / self.d as f64;
        libm::pow(self.b, exponent)
    }
}

/// Angles `θ_0 … θ_{d/2−1}`, strictly decreasing, `θ_0 = 1`.
pub fn base_frequencies(base: &RotaryBase) -> Vec<f64> {
    (0..base.pair_count()).map(|i| base.theta(i)).collect()
}

/// Which position component a rotation pair reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AxisLabel {
    /// 1D token index; reads the `t` component of a position triple.
    Sequence,
    Temporal,
    SpatialX,
    SpatialY,
}

impl AxisLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            AxisLabel::Sequence => "sequence",
            AxisLabel::Temporal => "temporal",
            AxisLabel::SpatialX => "spatial_x",
            AxisLabel::SpatialY => "spatial_y",
        }
    }

    pub fn is_spatial(&self) -> bool {
        matches!(self, AxisLabel::SpatialX | AxisLabel::SpatialY)
    }
}

impl fmt::Display for AxisLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AxisLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sequence" => Ok(AxisLabel::Sequence),
            "temporal" => Ok(AxisLabel::Temporal),
            "spatial_x" => Ok(AxisLabel::SpatialX),
            "spatial_y" => Ok(AxisLabel::SpatialY),
            other => Err(other.to_string()),
        }
    }
}

/// The built-in allocation strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    /// Plain 1D RoPE over the flattened token index.
    Vanilla,
    /// Contiguous blocks: temporal on the highest frequencies, then x, then y.
    Mrope,
    /// Interleaved x/y on the high frequencies, temporal on the lowest.
    VideoRope,
    /// Interleaved x/y on the high frequencies, temporal block zeroed.
    Hope,
    /// Like [`Strategy::Hope`] with half of all pairs in the zero temporal block.
    HopeX,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Vanilla,
        Strategy::Mrope,
        Strategy::VideoRope,
        Strategy::Hope,
        Strategy::HopeX,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Vanilla => "vanilla",
            Strategy::Mrope => "mrope",
            Strategy::VideoRope => "videorope",
            Strategy::Hope => "hope",
            Strategy::HopeX => "hope_x",
        }
    }

    /// Whether the strategy declares its temporal block as zero-frequency.
    pub fn zero_temporal(&self) -> bool {
        matches!(self, Strategy::Hope | Strategy::HopeX)
    }

    /// `d` must be a multiple of this.
    pub fn dimension_multiple(&self) -> usize {
        match self {
            Strategy::Vanilla => 2,
            // 1/4 temporal and 3/8 + 3/8 spatial of d/2 pairs; the
            // interleaved layouts also need equal x and y counts.
            Strategy::Mrope | Strategy::VideoRope | Strategy::Hope => 16,
            Strategy::HopeX => 8,
        }
    }

    /// Whether this strategy reads 3D `(t, x, y)` positions.
    pub fn is_multimodal(&self) -> bool {
        !matches!(self, Strategy::Vanilla)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = AllocError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "vanilla" => Ok(Strategy::Vanilla),
            "mrope" | "m-rope" => Ok(Strategy::Mrope),
            "videorope" => Ok(Strategy::VideoRope),
            "hope" => Ok(Strategy::Hope),
            "hope_x" | "hope-x" | "hopex" => Ok(Strategy::HopeX),
            _ => Err(AllocError::UnknownStrategy(s.to_string())),
        }
    }
}

/// One rotation pair's assignment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairFrequency {
    pub pair_index: usize,
    pub axis: AxisLabel,
    pub theta: f64,
}

/// Complete per-pair table for one strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyAllocation {
    name: String,
    base: RotaryBase,
    pairs: Vec<PairFrequency>,
    zero_temporal: bool,
}

impl FrequencyAllocation {
    /// Builds an allocation from explicit parts without checking it.
    ///
    /// Use [`validate_allocation`] to check the result; analysis code accepts
    /// unchecked allocations so that counterexample constructions (a single
    /// repeated lowest frequency, say) can be expressed.
    pub fn from_parts(
        name: impl Into<String>,
        base: RotaryBase,
        pairs: Vec<PairFrequency>,
        zero_temporal: bool,
    ) -> Self {
        Self {
            name: name.into(),
            base,
            pairs,
            zero_temporal,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn base(&self) -> &RotaryBase {
        &self.base
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn pairs(&self) -> &[PairFrequency] {
        &self.pairs
    }

    /// Whether the allocation declares its temporal pairs as an identity block.
    pub fn zero_temporal(&self) -> bool {
        self.zero_temporal
    }

    pub fn axis_pairs(&self, axis: AxisLabel) -> impl Iterator<Item = &PairFrequency> + '_ {
        self.pairs.iter().filter(move |p| p.axis == axis)
    }

    pub fn axis_count(&self, axis: AxisLabel) -> usize {
        self.axis_pairs(axis).count()
    }

    /// Angles on `axis`, in pair order.
    pub fn axis_thetas(&self, axis: AxisLabel) -> Vec<f64> {
        self.axis_pairs(axis).map(|p| p.theta).collect()
    }

    /// Smallest nonzero temporal (or sequence) angle, if any.
    pub fn min_nonzero_temporal_theta(&self) -> Option<f64> {
        self.pairs
            .iter()
            .filter(|p| matches!(p.axis, AxisLabel::Temporal | AxisLabel::Sequence))
            .map(|p| p.theta)
            .filter(|&t| t > 0.0)
            .fold(None, |acc: Option<f64>, t| {
                Some(acc.map_or(t, |a| a.min(t)))
            })
    }

    /// Same pair layout with the temporal pairs' angles replaced, in pair order.
    ///
    /// This is how alternative temporal frequency sets are compared against a
    /// fixed spatial block.
    pub fn with_temporal_thetas(
        &self,
        name: impl Into<String>,
        thetas: &[f64],
    ) -> Result<Self, AllocError> {
        let expected = self.axis_count(AxisLabel::Temporal);
        if thetas.len() != expected {
            return Err(AllocError::TemporalCount {
                expected,
                found: thetas.len(),
            });
        }
        let mut replacement = thetas.iter();
        let pairs = self
            .pairs
            .iter()
            .map(|p| match p.axis {
                AxisLabel::Temporal => PairFrequency {
                    theta: *replacement.next().expect("length checked"),
                    ..*p
                },
                _ => *p,
            })
            .collect();
        Ok(Self {
            name: name.into(),
            base: self.base,
            pairs,
            zero_temporal: thetas.iter().all(|&t| t == 0.0),
        })
    }
}

fn interleaved(i: usize) -> AxisLabel {
    if i.is_multiple_of(2) {
        AxisLabel::SpatialX
    } else {
        AxisLabel::SpatialY
    }
}

/// Builds the allocation for a built-in strategy.
pub fn allocate(strategy: Strategy, base: RotaryBase) -> Result<FrequencyAllocation, AllocError> {
    let d = base.dim();
    let multiple_of = strategy.dimension_multiple();
    if !d.is_multiple_of(multiple_of) {
        return Err(AllocError::Divisibility {
            strategy,
            d,
            multiple_of,
        });
    }
    let n = base.pair_count();
    let thetas = base_frequencies(&base);
    let label = |i: usize| -> (AxisLabel, bool) {
        match strategy {
            Strategy::Vanilla => (AxisLabel::Sequence, false),
            Strategy::Mrope => {
                let t_end = n / 4;
                let x_end = t_end + 3 * n / 8;
                if i < t_end {
                    (AxisLabel::Temporal, false)
                } else if i < x_end {
                    (AxisLabel::SpatialX, false)
                } else {
                    (AxisLabel::SpatialY, false)
                }
            }
            Strategy::VideoRope | Strategy::Hope => {
                if i < n - n / 4 {
                    (interleaved(i), false)
                } else {
                    (AxisLabel::Temporal, strategy == Strategy::Hope)
                }
            }
            Strategy::HopeX => {
                if i < n / 2 {
                    (interleaved(i), false)
                } else {
                    (AxisLabel::Temporal, true)
                }
            }
        }
    };
    let pairs = thetas
        .iter()
        .enumerate()
        .map(|(i, &theta)| {
            let (axis, zeroed) = label(i);
            PairFrequency {
                pair_index: i,
                axis,
                theta: if zeroed { 0.0 } else { theta },
            }
        })
        .collect();
    Ok(FrequencyAllocation {
        name: strategy.name().to_string(),
        base,
        pairs,
        zero_temporal: strategy.zero_temporal(),
    })
}

/// First broken invariant found by [`validate_allocation`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum AllocationViolation {
    #[error("pair {pair_index} is missing")]
    MissingPair { pair_index: usize },
    #[error("expected {expected} pairs, found {found}")]
    PairCount { expected: usize, found: usize },
    #[error("entry {position} carries pair index {pair_index} out of order")]
    OutOfOrder { position: usize, pair_index: usize },
    #[error("pair {pair_index} has a non-finite or negative angle {theta}")]
    BadAngle { pair_index: usize, theta: f64 },
    #[error("pair {pair_index} is zeroed outside a declared zero-frequency block")]
    UndeclaredZero { pair_index: usize },
    #[error("pair {pair_index} lies in the zero-frequency block but has angle {theta}")]
    NonZeroInZeroBlock { pair_index: usize, theta: f64 },
    #[error("pair {pair_index} has angle {theta}, expected {expected}")]
    InventedAngle {
        pair_index: usize,
        theta: f64,
        expected: f64,
    },
    #[error("pair {pair_index}: vanilla allocations label every pair as sequence")]
    MixedSequence { pair_index: usize },
}

/// Checks every allocation invariant, reporting the first violation.
pub fn validate_allocation(alloc: &FrequencyAllocation) -> Result<(), AllocationViolation> {
    let base = alloc.base();
    let n = base.pair_count();
    let pairs = alloc.pairs();

    if let Some(missing) = (0..n).find(|i| !pairs.iter().any(|p| p.pair_index == *i)) {
        return Err(AllocationViolation::MissingPair {
            pair_index: missing,
        });
    }
    if pairs.len() != n {
        return Err(AllocationViolation::PairCount {
            expected: n,
            found: pairs.len(),
        });
    }
    if let Some((position, p)) = pairs.iter().enumerate().find(|(k, p)| p.pair_index != *k) {
        return Err(AllocationViolation::OutOfOrder {
            position,
            pair_index: p.pair_index,
        });
    }

    let has_sequence = pairs.iter().any(|p| p.axis == AxisLabel::Sequence);
    for p in pairs {
        let i = p.pair_index;
        if has_sequence && p.axis != AxisLabel::Sequence {
            return Err(AllocationViolation::MixedSequence { pair_index: i });
        }
        if !p.theta.is_finite() || p.theta < 0.0 {
            return Err(AllocationViolation::BadAngle {
                pair_index: i,
                theta: p.theta,
            });
        }
        let in_zero_block = alloc.zero_temporal() && p.axis == AxisLabel::Temporal;
        if in_zero_block {
            if p.theta != 0.0 {
                return Err(AllocationViolation::NonZeroInZeroBlock {
                    pair_index: i,
                    theta: p.theta,
                });
            }
            continue;
        }
        if p.theta == 0.0 {
            return Err(AllocationViolation::UndeclaredZero { pair_index: i });
        }
        let expected = base.theta(i);
        if p.theta != expected {
            return Err(AllocationViolation::InventedAngle {
                pair_index: i,
                theta: p.theta,
                expected,
            });
        }
    }
    Ok(())
}
