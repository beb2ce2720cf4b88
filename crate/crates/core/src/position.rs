//! Rotary coordinates for text–video–text sequences.
//!
//! Video tokens are laid out frame-major, then row, then column. Within a
//! frame every token shares the temporal index; the frame's temporal stride
//! is `γ`, and the trailing text is shifted by `(γ − 1)·N_f` so that it
//! resumes exactly one stride after the last frame.

use alloc::vec::Vec;
use core::ops::{Add, Sub};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Default scaling set for dynamic temporal scaling.
pub const DEFAULT_GAMMAS: [f64; 5] = [0.5, 0.75, 1.0, 1.25, 1.5];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LayoutError {
    #[error("coordinate ({t}, {x}, {y}) lies outside a {height}x{width} frame")]
    OutOfRange {
        t: u64,
        x: u64,
        y: u64,
        height: u64,
        width: u64,
    },
    #[error("frame grid dimensions must be at least 1, got {height}x{width}")]
    EmptyGrid { height: u64, width: u64 },
    #[error("a video span needs at least one frame")]
    NoFrames,
    #[error("scaling factor must be finite and positive, got {0}")]
    BadGamma(f64),
    #[error("scaling set must be non-empty")]
    EmptyGammaSet,
    #[error("position component is not finite")]
    NonFinite,
}

/// One token's `(t, x, y)` rotary coordinates.
///
/// Components may be fractional (scaled strides) or negative (centred spatial
/// offsets); the same type doubles as a relative offset between two tokens.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PositionTriple {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

impl PositionTriple {
    pub const ORIGIN: PositionTriple = PositionTriple {
        t: 0.0,
        x: 0.0,
        y: 0.0,
    };

    pub fn new(t: f64, x: f64, y: f64) -> Result<Self, LayoutError> {
        if t.is_finite() && x.is_finite() && y.is_finite() {
            Ok(Self { t, x, y })
        } else {
            Err(LayoutError::NonFinite)
        }
    }

    /// Text-style position with all three components equal.
    pub fn uniform(p: f64) -> Self {
        Self { t: p, x: p, y: p }
    }
}

impl Sub for PositionTriple {
    type Output = PositionTriple;

    fn sub(self, rhs: Self) -> Self {
        Self {
            t: self.t - rhs.t,
            x: self.x - rhs.x,
            y: self.y - rhs.y,
        }
    }
}

impl Add for PositionTriple {
    type Output = PositionTriple;

    fn add(self, rhs: Self) -> Self {
        Self {
            t: self.t + rhs.t,
            x: self.x + rhs.x,
            y: self.y + rhs.y,
        }
    }
}

/// `t·H·W + x·W + y` without range checks.
fn flat_offset(t: u64, x: u64, y: u64, height: u64, width: u64) -> u64 {
    t * height * width + x * width + y
}

/// Flattened 1D index of frame `t`, row `x`, column `y` in an `H×W` grid.
pub fn flatten_index(t: u64, x: u64, y: u64, height: u64, width: u64) -> Result<u64, LayoutError> {
    if height == 0 || width == 0 {
        return Err(LayoutError::EmptyGrid { height, width });
    }
    if x >= height || y >= width {
        return Err(LayoutError::OutOfRange {
            t,
            x,
            y,
            height,
            width,
        });
    }
    Ok(flat_offset(t, x, y, height, width))
}

/// 1D index gaps between unit spatial and unit temporal neighbours after
/// flattening; `(W, H·W)` for every anchor.
pub fn flattening_distortion(height: u64, width: u64) -> Result<(u64, u64), LayoutError> {
    if height == 0 || width == 0 {
        return Err(LayoutError::EmptyGrid { height, width });
    }
    let anchor = flat_offset(0, 0, 0, height, width);
    let spatial = flat_offset(0, 1, 0, height, width).abs_diff(anchor);
    let temporal = flat_offset(1, 0, 0, height, width).abs_diff(anchor);
    Ok((spatial, temporal))
}

/// Shape of the single video span in a layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VideoSpan {
    pub frames: u64,
    pub height: u64,
    pub width: u64,
}

impl VideoSpan {
    pub fn tokens(&self) -> u64 {
        self.frames * self.height * self.width
    }
}

/// Text, optional video, text, and the temporal scaling factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceLayout {
    pub pre_text_len: u64,
    pub video: Option<VideoSpan>,
    pub post_text_len: u64,
    pub gamma: f64,
}

impl SequenceLayout {
    pub fn new(
        pre_text_len: u64,
        video: Option<VideoSpan>,
        post_text_len: u64,
        gamma: f64,
    ) -> Result<Self, LayoutError> {
        let layout = Self {
            pre_text_len,
            video,
            post_text_len,
            gamma,
        };
        layout.validate()?;
        Ok(layout)
    }

    pub fn validate(&self) -> Result<(), LayoutError> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(LayoutError::BadGamma(self.gamma));
        }
        if let Some(v) = self.video {
            if v.frames == 0 {
                return Err(LayoutError::NoFrames);
            }
            if v.height == 0 || v.width == 0 {
                return Err(LayoutError::EmptyGrid {
                    height: v.height,
                    width: v.width,
                });
            }
        }
        Ok(())
    }

    pub fn frames(&self) -> u64 {
        self.video.map_or(0, |v| v.frames)
    }

    pub fn video_tokens(&self) -> u64 {
        self.video.map_or(0, |v| v.tokens())
    }

    pub fn total_tokens(&self) -> u64 {
        self.pre_text_len + self.video_tokens() + self.post_text_len
    }

    /// Temporal index of frame `frame`.
    pub fn frame_time(&self, frame: u64) -> f64 {
        self.pre_text_len as f64 + self.gamma * frame as f64
    }

    /// Position of the `k`-th post-text token (`k` counts from zero).
    pub fn post_text_position(&self, k: u64) -> f64 {
        let frames = self.frames();
        let l = (self.pre_text_len + frames + k) as f64;
        (self.gamma - 1.0) * frames as f64 + l
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Segment {
    PreText,
    Video,
    PostText,
}

impl Segment {
    pub fn as_str(&self) -> &'static str {
        match self {
            Segment::PreText => "pre_text",
            Segment::Video => "video",
            Segment::PostText => "post_text",
        }
    }
}

/// A token's slot, provenance and coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexedToken {
    pub slot: u64,
    pub segment: Segment,
    /// `(frame, row, col)` for video tokens.
    pub grid: Option<(u64, u64, u64)>,
    pub position: PositionTriple,
}

/// Coordinates of every token with segment bookkeeping.
pub fn index_tokens(layout: &SequenceLayout) -> Result<Vec<IndexedToken>, LayoutError> {
    layout.validate()?;
    let mut out = Vec::with_capacity(layout.total_tokens() as usize);
    let mut slot = 0u64;
    for l in 0..layout.pre_text_len {
        out.push(IndexedToken {
            slot,
            segment: Segment::PreText,
            grid: None,
            position: PositionTriple::uniform(l as f64),
        });
        slot += 1;
    }
    if let Some(v) = layout.video {
        let half_w = v.width as f64 / 2.0;
        let half_h = v.height as f64 / 2.0;
        for frame in 0..v.frames {
            let t = layout.frame_time(frame);
            for row in 0..v.height {
                for col in 0..v.width {
                    out.push(IndexedToken {
                        slot,
                        segment: Segment::Video,
                        grid: Some((frame, row, col)),
                        position: PositionTriple {
                            t,
                            x: t + col as f64 - half_w,
                            y: t + row as f64 - half_h,
                        },
                    });
                    slot += 1;
                }
            }
        }
    }
    for k in 0..layout.post_text_len {
        out.push(IndexedToken {
            slot,
            segment: Segment::PostText,
            grid: None,
            position: PositionTriple::uniform(layout.post_text_position(k)),
        });
        slot += 1;
    }
    Ok(out)
}

/// One position triple per token, in sequence order.
pub fn assign_indices(layout: &SequenceLayout) -> Result<Vec<PositionTriple>, LayoutError> {
    Ok(index_tokens(layout)?
        .into_iter()
        .map(|tok| tok.position)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalingMode {
    TrainRandom,
    InferenceFixed(f64),
}

/// Scaling set `Γ` and how `γ` is chosen from it.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingPolicy {
    gammas: Vec<f64>,
    mode: ScalingMode,
}

impl Default for ScalingPolicy {
    fn default() -> Self {
        Self {
            gammas: DEFAULT_GAMMAS.to_vec(),
            mode: ScalingMode::TrainRandom,
        }
    }
}

impl ScalingPolicy {
    pub fn new(gammas: Vec<f64>, mode: ScalingMode) -> Result<Self, LayoutError> {
        if gammas.is_empty() {
            return Err(LayoutError::EmptyGammaSet);
        }
        if let Some(&bad) = gammas.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
            return Err(LayoutError::BadGamma(bad));
        }
        if let ScalingMode::InferenceFixed(g) = mode {
            if !(g.is_finite() && g > 0.0) {
                return Err(LayoutError::BadGamma(g));
            }
        }
        Ok(Self { gammas, mode })
    }

    pub fn inference(gamma: f64) -> Result<Self, LayoutError> {
        Self::new(DEFAULT_GAMMAS.to_vec(), ScalingMode::InferenceFixed(gamma))
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn mode(&self) -> ScalingMode {
        self.mode
    }

    /// Uniform draw from `Γ` in training mode; the fixed factor otherwise.
    pub fn sample_gamma(&self, seed: u64) -> f64 {
        match self.mode {
            ScalingMode::InferenceFixed(g) => g,
            ScalingMode::TrainRandom => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                self.gammas[rng.random_range(0..self.gammas.len())]
            }
        }
    }
}
