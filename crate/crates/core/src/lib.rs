//! Numerics for multimodal rotary position embeddings.
//!
//! - [`freq_alloc`]: per-pair frequency tables for vanilla RoPE, M-RoPE,
//!   VideoRoPE-style, HoPE and HoPE-X allocations.
//! - [`position`]: text/video/text rotary coordinates with temporal scaling,
//!   and the index distortion caused by flattening a video into 1D.
//! - [`rotary`]: block-diagonal rotations and rotary attention scores.
//! - [`semantic`]: closed-form and Monte-Carlo semantic-preference margins,
//!   violation search, critical lengths, negative-cosine fractions and the
//!   zero-temporal-frequency dominance check.
//! - [`niah`]: a synthetic needle-in-a-haystack retrieval simulator.
//!
//! The crate is `no_std` and needs only `alloc`. Randomness comes from
//! explicitly seeded, counter-keyed ChaCha8 streams.

#![no_std]

extern crate alloc;

pub mod freq_alloc;
pub mod niah;
pub mod position;
pub mod rng;
pub mod rotary;
pub mod semantic;

pub use freq_alloc::{
    allocate, base_frequencies, validate_allocation, AllocError, AllocationViolation, AxisLabel,
    FrequencyAllocation, PairFrequency, RotaryBase, Strategy,
};
pub use niah::{run_retrieval, sweep, NiahConfig, NiahError, RetrievalResult, SpatialIndexing};
pub use position::{
    assign_indices, flatten_index, flattening_distortion, index_tokens, IndexedToken, LayoutError,
    PositionTriple, ScalingMode, ScalingPolicy, Segment, SequenceLayout, VideoSpan,
};
pub use rotary::{
    attention_score, pairwise_score_matrix, relative_score, rotate, HeadVector, RelativeAngles,
    RotaryError, RotationTable, ScoreMatrix,
};
pub use semantic::{
    closed_form_margin, closed_form_profile, critical_length, dominance_check, find_violation,
    find_violation_extended, hope_x_certificate, monte_carlo_margin, monte_carlo_profile,
    p_negative, temporal_margin, AnalysisError, DeltaGrid, DominanceReport, EnsembleSpec,
    HopeXCertificate, MarginMode, MarginProfile, MarginSpectrum, ProfileKind, SampleFamily,
};
