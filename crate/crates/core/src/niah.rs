//! Synthetic needle-in-a-haystack retrieval.
//!
//! A haystack of `L` frames holds one unrelated key per grid cell. One key,
//! at frame `floor(depth·(L−1))`, is replaced by a needle `k′ = q + δ`. The
//! query sits at the final sequence slot. A trial succeeds when the needle's
//! rotary score is the unique maximum over all keys.
//!
//! All strategies in a configuration score the same draws: trial `n` at
//! haystack length `L` and depth `p` uses the stream keyed by `(L, p, n)`.
//!
//! Besides the success flag, each trial records the needle margin (needle
//! score minus the score the displaced unrelated key would have had at the
//! needle's position; its expectation is the closed-form margin at the
//! needle offset) and the gap to the best distractor.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::freq_alloc::{allocate, AllocError, FrequencyAllocation, RotaryBase, Strategy};
use crate::position::{index_tokens, LayoutError, PositionTriple, SequenceLayout, VideoSpan};
use crate::rng::keyed_rng;
use crate::rotary::{HeadVector, RotationTable};
use crate::semantic::{AnalysisError, EnsembleSpec, Welford};

const NIAH_DOMAIN: u64 = 0x4e49_4148; // "NIAH"

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NiahError {
    #[error("haystack needs at least 2 frames, got {0}")]
    HaystackTooShort(u64),
    #[error("depth {0} is outside [0, 1]")]
    BadDepth(f64),
    #[error("at least one depth is required")]
    NoDepths,
    #[error("at least one strategy is required")]
    NoStrategies,
    #[error("at least one trial is required")]
    NoTrials,
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error(transparent)]
    Alloc(#[from] AllocError),
    #[error(transparent)]
    Ensemble(#[from] AnalysisError),
}

/// How spatial coordinates of video tokens are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpatialIndexing {
    /// In-frame offsets `(w − W/2, h − H/2)`; the query takes the needle's
    /// cell, so the needle pair has `Δx = Δy = 0`.
    #[default]
    FrameLocal,
    /// Spatial components carry the frame's temporal index as well, exactly
    /// as [`index_tokens`] assigns them.
    Diagonal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NiahConfig {
    pub strategies: Vec<Strategy>,
    pub base: f64,
    pub haystack_len: u64,
    pub depths: Vec<f64>,
    pub ensemble: EnsembleSpec,
    pub height: u64,
    pub width: u64,
    pub gamma: f64,
    pub pre_text_len: u64,
    /// Text tokens between the video and the query.
    pub post_text_len: u64,
    pub trials: u64,
    pub spatial: SpatialIndexing,
    /// Put every token at the origin, disabling rotation entirely.
    pub collapse_positions: bool,
}

impl NiahConfig {
    /// Desk-scale defaults: `d = 128`, one key per frame, `γ = 1`.
    pub fn new(haystack_len: u64, ensemble: EnsembleSpec) -> Self {
        Self {
            strategies: vec![
                Strategy::Vanilla,
                Strategy::Mrope,
                Strategy::VideoRope,
                Strategy::Hope,
            ],
            base: crate::freq_alloc::DEFAULT_BASE,
            haystack_len,
            depths: vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
            ensemble,
            height: 1,
            width: 1,
            gamma: 1.0,
            pre_text_len: 0,
            post_text_len: 0,
            trials: 1000,
            spatial: SpatialIndexing::FrameLocal,
            collapse_positions: false,
        }
    }

    pub fn validate(&self) -> Result<(), NiahError> {
        if self.haystack_len < 2 {
            return Err(NiahError::HaystackTooShort(self.haystack_len));
        }
        if self.depths.is_empty() {
            return Err(NiahError::NoDepths);
        }
        if let Some(&d) = self
            .depths
            .iter()
            .find(|d| !(d.is_finite() && (0.0..=1.0).contains(*d)))
        {
            return Err(NiahError::BadDepth(d));
        }
        if self.strategies.is_empty() {
            return Err(NiahError::NoStrategies);
        }
        if self.trials == 0 {
            return Err(NiahError::NoTrials);
        }
        self.ensemble.validate()?;
        self.layout()?;
        for s in &self.strategies {
            self.allocation(*s)?;
        }
        Ok(())
    }

    pub fn allocation(&self, strategy: Strategy) -> Result<FrequencyAllocation, NiahError> {
        Ok(allocate(
            strategy,
            RotaryBase::new(self.ensemble.d, self.base)?,
        )?)
    }

    /// Text, video and text-plus-query layout.
    pub fn layout(&self) -> Result<SequenceLayout, NiahError> {
        Ok(SequenceLayout::new(
            self.pre_text_len,
            Some(VideoSpan {
                frames: self.haystack_len,
                height: self.height,
                width: self.width,
            }),
            self.post_text_len + 1,
            self.gamma,
        )?)
    }

    pub fn cells(&self) -> u64 {
        self.height * self.width
    }

    pub fn key_count(&self) -> usize {
        (self.haystack_len * self.cells()) as usize
    }

    /// Row-major index of the needle's cell (the frame centre).
    pub fn needle_cell(&self) -> u64 {
        (self.height / 2) * self.width + self.width / 2
    }
}

/// Frame holding the needle at `depth`.
pub fn needle_frame(depth: f64, haystack_len: u64) -> u64 {
    libm::floor(depth * (haystack_len - 1) as f64) as u64
}

/// Query and key positions for one strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenePositions {
    pub query: PositionTriple,
    pub keys: Vec<PositionTriple>,
}

/// Positions of the query and every haystack key under `strategy`.
pub fn scene_positions(
    config: &NiahConfig,
    strategy: Strategy,
) -> Result<ScenePositions, NiahError> {
    let n = config.key_count();
    if config.collapse_positions {
        return Ok(ScenePositions {
            query: PositionTriple::ORIGIN,
            keys: vec![PositionTriple::ORIGIN; n],
        });
    }
    let layout = config.layout()?;
    let tokens = index_tokens(&layout)?;
    let first_key = config.pre_text_len as usize;
    let query_tok = tokens[tokens.len() - 1];

    if !strategy.is_multimodal() {
        return Ok(ScenePositions {
            query: PositionTriple::uniform(query_tok.slot as f64),
            keys: tokens[first_key..first_key + n]
                .iter()
                .map(|t| PositionTriple::uniform(t.slot as f64))
                .collect(),
        });
    }

    match config.spatial {
        SpatialIndexing::Diagonal => Ok(ScenePositions {
            query: query_tok.position,
            keys: tokens[first_key..first_key + n]
                .iter()
                .map(|t| t.position)
                .collect(),
        }),
        SpatialIndexing::FrameLocal => {
            let half_w = config.width as f64 / 2.0;
            let half_h = config.height as f64 / 2.0;
            let local = |row: u64, col: u64| (col as f64 - half_w, row as f64 - half_h);
            let cell = config.needle_cell();
            let (qx, qy) = local(cell / config.width, cell % config.width);
            let keys = tokens[first_key..first_key + n]
                .iter()
                .map(|t| {
                    let (_, row, col) = t.grid.expect("video token");
                    let (x, y) = local(row, col);
                    PositionTriple {
                        t: t.position.t,
                        x,
                        y,
                    }
                })
                .collect();
            Ok(ScenePositions {
                query: PositionTriple {
                    t: query_tok.position.t,
                    x: qx,
                    y: qy,
                },
                keys,
            })
        }
    }
}

/// Offset from the needle to the query under `strategy`.
pub fn needle_offset(
    config: &NiahConfig,
    strategy: Strategy,
    depth: f64,
) -> Result<PositionTriple, NiahError> {
    let scene = scene_positions(config, strategy)?;
    let slot = needle_slot(config, depth);
    Ok(scene.query - scene.keys[slot])
}

/// Key index of the needle at `depth`.
pub fn needle_slot(config: &NiahConfig, depth: f64) -> usize {
    (needle_frame(depth, config.haystack_len) * config.cells() + config.needle_cell()) as usize
}

/// One trial's vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct NiahTrial {
    pub query: HeadVector,
    /// Haystack keys with the needle already in place.
    pub keys: Vec<HeadVector>,
    /// The unrelated key the needle displaced.
    pub displaced: HeadVector,
    pub needle_slot: usize,
}

struct TrialBuffers {
    q: Vec<f64>,
    delta: Vec<f64>,
    keys: Vec<f64>,
    displaced: Vec<f64>,
}

impl TrialBuffers {
    fn new(d: usize, keys: usize) -> Self {
        Self {
            q: vec![0.0; d],
            delta: vec![0.0; d],
            keys: vec![0.0; d * keys],
            displaced: vec![0.0; d],
        }
    }
}

fn draw(config: &NiahConfig, depth: f64, trial: u64, slot: usize, buf: &mut TrialBuffers) {
    let spec = &config.ensemble;
    let d = spec.d;
    let mut rng = keyed_rng(
        spec.seed,
        &[NIAH_DOMAIN, config.haystack_len, depth.to_bits(), trial],
    );
    spec.component().fill(&mut rng, &mut buf.q);
    spec.perturbation().fill(&mut rng, &mut buf.delta);
    spec.component().fill(&mut rng, &mut buf.keys);
    let needle = &mut buf.keys[slot * d..(slot + 1) * d];
    buf.displaced.copy_from_slice(needle);
    for ((n, q), dl) in needle.iter_mut().zip(&buf.q).zip(&buf.delta) {
        *n = q + dl;
    }
}

/// Draws trial `trial` at `depth`, exactly as [`run_retrieval`] does.
pub fn build_trial(config: &NiahConfig, depth: f64, trial: u64) -> Result<NiahTrial, NiahError> {
    config.validate()?;
    let d = config.ensemble.d;
    let slot = needle_slot(config, depth);
    let mut buf = TrialBuffers::new(d, config.key_count());
    draw(config, depth, trial, slot, &mut buf);
    let vector = |v: &[f64]| HeadVector::new(v.to_vec()).expect("finite draws");
    Ok(NiahTrial {
        query: vector(&buf.q),
        keys: buf.keys.chunks_exact(d).map(vector).collect(),
        displaced: vector(&buf.displaced),
        needle_slot: slot,
    })
}

/// Aggregates for one (strategy, haystack length, depth) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalResult {
    pub strategy: Strategy,
    pub haystack_len: u64,
    pub depth: f64,
    pub trials: u64,
    pub successes: u64,
    pub success_rate: f64,
    /// Mean needle score minus displaced-key score at the needle position.
    pub mean_margin: f64,
    pub margin_se: f64,
    /// Mean needle score minus best distractor score.
    pub mean_gap: f64,
    pub gap_se: f64,
    pub seed: u64,
}

/// Per-key rotation tables, flattened as `[key][pair](cos, sin)`.
struct ScoreTables {
    pairs: usize,
    trig: Vec<f64>,
}

impl ScoreTables {
    fn new(alloc: &FrequencyAllocation, scene: &ScenePositions) -> Self {
        let pairs = alloc.dim() / 2;
        let mut trig = Vec::with_capacity(scene.keys.len() * pairs * 2);
        for key in &scene.keys {
            let table = RotationTable::new(alloc, &(scene.query - *key));
            for (c, s) in table.cos().iter().zip(table.sin()) {
                trig.push(*c);
                trig.push(*s);
            }
        }
        Self { pairs, trig }
    }

    fn score(&self, slot: usize, q: &[f64], k: &[f64]) -> f64 {
        let row = &self.trig[slot * self.pairs * 2..(slot + 1) * self.pairs * 2];
        let mut acc = 0.0;
        for ((cs, qp), kp) in row
            .chunks_exact(2)
            .zip(q.chunks_exact(2))
            .zip(k.chunks_exact(2))
        {
            acc +=
                (qp[0] * kp[0] + qp[1] * kp[1]) * cs[0] + (qp[0] * kp[1] - qp[1] * kp[0]) * cs[1];
        }
        acc
    }
}

#[derive(Default, Clone, Copy)]
struct CellStats {
    successes: u64,
    margin: Welford,
    gap: Welford,
}

/// Runs every (strategy, depth) cell of `config`; rows ordered by strategy,
/// then depth, as listed in the configuration.
pub fn run_retrieval(config: &NiahConfig) -> Result<Vec<RetrievalResult>, NiahError> {
    config.validate()?;
    let d = config.ensemble.d;
    let n_keys = config.key_count();
    let tables = config
        .strategies
        .iter()
        .map(|&s| {
            let alloc = config.allocation(s)?;
            let scene = scene_positions(config, s)?;
            Ok(ScoreTables::new(&alloc, &scene))
        })
        .collect::<Result<Vec<_>, NiahError>>()?;

    let mut stats = vec![vec![CellStats::default(); config.depths.len()]; config.strategies.len()];
    let mut buf = TrialBuffers::new(d, n_keys);
    for (di, &depth) in config.depths.iter().enumerate() {
        let slot = needle_slot(config, depth);
        for trial in 0..config.trials {
            draw(config, depth, trial, slot, &mut buf);
            let q = &buf.q;
            for (si, table) in tables.iter().enumerate() {
                let mut needle = 0.0;
                let mut best = f64::NEG_INFINITY;
                for (j, k) in buf.keys.chunks_exact(d).enumerate() {
                    let s = table.score(j, q, k);
                    if j == slot {
                        needle = s;
                    } else if s > best {
                        best = s;
                    }
                }
                let unrelated = table.score(slot, q, &buf.displaced);
                let cell = &mut stats[si][di];
                if needle > best {
                    cell.successes += 1;
                }
                cell.margin.push(needle - unrelated);
                cell.gap.push(needle - best);
            }
        }
    }

    let mut out = Vec::with_capacity(config.strategies.len() * config.depths.len());
    for (si, &strategy) in config.strategies.iter().enumerate() {
        for (di, &depth) in config.depths.iter().enumerate() {
            let c = &stats[si][di];
            out.push(RetrievalResult {
                strategy,
                haystack_len: config.haystack_len,
                depth,
                trials: config.trials,
                successes: c.successes,
                success_rate: c.successes as f64 / config.trials as f64,
                mean_margin: c.margin.mean(),
                margin_se: c.margin.std_error(),
                mean_gap: c.gap.mean(),
                gap_se: c.gap.std_error(),
                seed: config.ensemble.seed,
            });
        }
    }
    Ok(out)
}

/// Runs `config` at every haystack length; rows ordered by
/// (strategy, length, depth).
pub fn sweep(config: &NiahConfig, lengths: &[u64]) -> Result<Vec<RetrievalResult>, NiahError> {
    if lengths.is_empty() {
        return Err(NiahError::HaystackTooShort(0));
    }
    let mut per_length = Vec::with_capacity(lengths.len());
    for &l in lengths {
        let cfg = NiahConfig {
            haystack_len: l,
            ..config.clone()
        };
        per_length.push(run_retrieval(&cfg)?);
    }
    let depths = config.depths.len();
    let mut rows = Vec::with_capacity(per_length.len() * per_length[0].len());
    for si in 0..config.strategies.len() {
        for results in &per_length {
            rows.extend_from_slice(&results[si * depths..(si + 1) * depths]);
        }
    }
    Ok(rows)
}
