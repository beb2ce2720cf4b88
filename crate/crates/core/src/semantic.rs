//! Semantic-preference margin analysis.
//!
//! For a query `q`, a related key `k′ = q + δ` and an unrelated key `k`,
//! all with i.i.d. components of variance `σ²`, the expected score gap at
//! relative offset `(Δt, Δx, Δy)` is
//!
//! ```text
//! 2σ² · ( Σ_{i∈t} cos(Δt·θ_i) + Σ_{i∈x} cos(Δx·θ_i) + Σ_{i∈y} cos(Δy·θ_i) )
//! ```
//!
//! The mean `μ` cancels. The margin is a sum of per-axis cosine sums, so grid
//! scans evaluate each axis once per offset and combine; the combination is
//! bitwise identical to the pointwise [`closed_form_margin`].

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::freq_alloc::{
    allocate, AllocError, AxisLabel, FrequencyAllocation, RotaryBase, Strategy,
};
use crate::position::PositionTriple;
use crate::rng::keyed_rng;
use crate::rotary::RotationTable;

/// Largest `L_max` scanned exhaustively by [`find_violation`].
pub const EXACT_SCAN_LIMIT: u64 = 1_000_000;

const MC_DOMAIN: u64 = 0x4d43_4d41_5247; // "MCMARG"

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("zero frequency never rotates, so no critical length exists")]
    ZeroFrequency,
    #[error("frequency must be finite and non-negative, got {0}")]
    InvalidFrequency(f64),
    #[error("length must be at least 1")]
    InvalidLength,
    #[error("exact scan limited to L_max <= {limit}, requested {requested}")]
    ScanLimit { requested: u64, limit: u64 },
    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(&'static str),
    #[error("grid offsets must be finite and non-negative")]
    InvalidGrid,
    #[error("at least one trial is required")]
    NoTrials,
    #[error("reference allocation {0} has nonzero temporal frequencies")]
    NotZeroTemporal(String),
    #[error("candidate {candidate} differs from the reference at pair {pair_index}")]
    SpatialMismatch {
        candidate: String,
        pair_index: usize,
    },
    #[error("candidate {candidate} has dimension {found}, reference has {expected}")]
    DimensionMismatch {
        candidate: String,
        expected: usize,
        found: usize,
    },
    #[error("ensemble dimension {ensemble} does not match allocation dimension {alloc}")]
    EnsembleDimension { ensemble: usize, alloc: usize },
    #[error("hope_x needs d divisible by 8, got {0}")]
    NotDivisibleBy8(usize),
    #[error(transparent)]
    Alloc(#[from] AllocError),
}

/// Which terms of the margin are summed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MarginMode {
    #[default]
    Full,
    /// Temporal (and 1D sequence) pairs only.
    TemporalOnly,
}

impl MarginMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            MarginMode::Full => "full",
            MarginMode::TemporalOnly => "temporal_only",
        }
    }
}

fn cosine_sum(thetas: &[f64], delta: f64) -> f64 {
    thetas.iter().map(|&theta| libm::cos(theta * delta)).sum()
}

fn combine(temporal: f64, x: f64, y: f64, sigma2: f64, mode: MarginMode) -> f64 {
    match mode {
        MarginMode::Full => 2.0 * sigma2 * ((temporal + x) + y),
        MarginMode::TemporalOnly => 2.0 * sigma2 * temporal,
    }
}

/// An allocation's angles grouped by the offset they read.
///
/// Sequence pairs are grouped with temporal ones: both read `Δt`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginSpectrum {
    temporal: Vec<f64>,
    spatial_x: Vec<f64>,
    spatial_y: Vec<f64>,
}

impl MarginSpectrum {
    pub fn new(alloc: &FrequencyAllocation) -> Self {
        let mut s = Self {
            temporal: Vec::new(),
            spatial_x: Vec::new(),
            spatial_y: Vec::new(),
        };
        for p in alloc.pairs() {
            match p.axis {
                AxisLabel::Sequence | AxisLabel::Temporal => s.temporal.push(p.theta),
                AxisLabel::SpatialX => s.spatial_x.push(p.theta),
                AxisLabel::SpatialY => s.spatial_y.push(p.theta),
            }
        }
        s
    }

    pub fn temporal(&self) -> &[f64] {
        &self.temporal
    }

    pub fn temporal_sum(&self, dt: f64) -> f64 {
        cosine_sum(&self.temporal, dt)
    }

    pub fn x_sum(&self, dx: f64) -> f64 {
        cosine_sum(&self.spatial_x, dx)
    }

    pub fn y_sum(&self, dy: f64) -> f64 {
        cosine_sum(&self.spatial_y, dy)
    }

    pub fn margin(&self, dt: f64, dx: f64, dy: f64, sigma2: f64, mode: MarginMode) -> f64 {
        let t = self.temporal_sum(dt);
        match mode {
            MarginMode::TemporalOnly => combine(t, 0.0, 0.0, sigma2, mode),
            MarginMode::Full => combine(t, self.x_sum(dx), self.y_sum(dy), sigma2, mode),
        }
    }
}

/// Expected score gap between a related and an unrelated key at `(Δt, Δx, Δy)`.
///
/// Cosine is even, so the sign of each offset is irrelevant.
pub fn closed_form_margin(
    alloc: &FrequencyAllocation,
    dt: f64,
    dx: f64,
    dy: f64,
    sigma2: f64,
) -> f64 {
    MarginSpectrum::new(alloc).margin(dt, dx, dy, sigma2, MarginMode::Full)
}

/// Temporal terms of [`closed_form_margin`] only.
pub fn temporal_margin(alloc: &FrequencyAllocation, dt: f64, sigma2: f64) -> f64 {
    MarginSpectrum::new(alloc).margin(dt, 0.0, 0.0, sigma2, MarginMode::TemporalOnly)
}

/// Component distribution for query, key and perturbation draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SampleFamily {
    #[default]
    Gaussian,
    /// Uniform with matching mean and variance.
    Uniform,
}

/// Distribution of `q`, `k` and `δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleSpec {
    pub d: usize,
    pub mu: f64,
    pub sigma2: f64,
    pub sigma_delta2: f64,
    pub seed: u64,
    pub family: SampleFamily,
    /// Force the unrelated key to equal the query (degenerate check).
    pub unrelated_is_query: bool,
}

impl EnsembleSpec {
    pub fn new(
        d: usize,
        mu: f64,
        sigma2: f64,
        sigma_delta2: f64,
        seed: u64,
    ) -> Result<Self, AnalysisError> {
        let spec = Self {
            d,
            mu,
            sigma2,
            sigma_delta2,
            seed,
            family: SampleFamily::Gaussian,
            unrelated_is_query: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_family(mut self, family: SampleFamily) -> Self {
        self.family = family;
        self
    }

    pub fn with_unrelated_is_query(mut self, yes: bool) -> Self {
        self.unrelated_is_query = yes;
        self
    }

    pub fn validate(&self) -> Result<(), AnalysisError> {
        if self.d < 2 || !self.d.is_multiple_of(2) {
            return Err(AnalysisError::InvalidEnsemble(
                "d must be even and at least 2",
            ));
        }
        if !(self.sigma2.is_finite() && self.sigma2 > 0.0) {
            return Err(AnalysisError::InvalidEnsemble("sigma2 must be positive"));
        }
        if !(self.sigma_delta2.is_finite() && self.sigma_delta2 >= 0.0) {
            return Err(AnalysisError::InvalidEnsemble(
                "sigma_delta2 must be non-negative",
            ));
        }
        if !self.mu.is_finite() {
            return Err(AnalysisError::InvalidEnsemble("mu must be finite"));
        }
        Ok(())
    }

    /// `d` components drawn from the stream keyed by `key`.
    pub fn sample_vector(&self, key: &[u64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        self.component()
            .fill(&mut keyed_rng(self.seed, key), &mut out);
        out
    }

    pub(crate) fn component(&self) -> ComponentSampler {
        ComponentSampler::new(self.family, self.mu, self.sigma2)
    }

    pub(crate) fn perturbation(&self) -> ComponentSampler {
        ComponentSampler::new(self.family, 0.0, self.sigma_delta2)
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ComponentSampler {
    family: SampleFamily,
    mean: f64,
    scale: f64,
}

impl ComponentSampler {
    fn new(family: SampleFamily, mean: f64, variance: f64) -> Self {
        let sd = libm::sqrt(variance);
        let scale = match family {
            SampleFamily::Gaussian => sd,
            // U(-a, a) has variance a²/3.
            SampleFamily::Uniform => sd * libm::sqrt(3.0),
        };
        Self {
            family,
            mean,
            scale,
        }
    }

    pub(crate) fn fill(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        if self.scale == 0.0 {
            out.fill(self.mean);
            return;
        }
        match self.family {
            SampleFamily::Gaussian => {
                for v in out.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *v = self.mean + self.scale * z;
                }
            }
            SampleFamily::Uniform => {
                for v in out.iter_mut() {
                    let u: f64 = rng.random();
                    *v = self.mean + self.scale * (2.0 * u - 1.0);
                }
            }
        }
    }
}

/// Running mean and variance.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub(crate) fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub(crate) fn mean(&self) -> f64 {
        self.mean
    }

    /// Standard error of the mean; NaN below two samples.
    pub(crate) fn std_error(&self) -> f64 {
        if self.n < 2 {
            return f64::NAN;
        }
        libm::sqrt(self.m2 / (self.n - 1) as f64 / self.n as f64)
    }
}

/// Cross product of per-axis offsets, iterated `Δt`-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaGrid {
    dts: Vec<f64>,
    dxs: Vec<f64>,
    dys: Vec<f64>,
}

impl DeltaGrid {
    pub fn new(dts: Vec<f64>, dxs: Vec<f64>, dys: Vec<f64>) -> Result<Self, AnalysisError> {
        let ok = |v: &[f64]| !v.is_empty() && v.iter().all(|x| x.is_finite() && *x >= 0.0);
        if !(ok(&dts) && ok(&dxs) && ok(&dys)) {
            return Err(AnalysisError::InvalidGrid);
        }
        Ok(Self { dts, dxs, dys })
    }

    pub fn point(dt: f64, dx: f64, dy: f64) -> Result<Self, AnalysisError> {
        Self::new(vec![dt], vec![dx], vec![dy])
    }

    pub fn dts(&self) -> &[f64] {
        &self.dts
    }

    pub fn dxs(&self) -> &[f64] {
        &self.dxs
    }

    pub fn dys(&self) -> &[f64] {
        &self.dys
    }

    pub fn len(&self) -> usize {
        self.dts.len() * self.dxs.len() * self.dys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.dts.iter().flat_map(move |&t| {
            self.dxs
                .iter()
                .flat_map(move |&x| self.dys.iter().map(move |&y| (t, x, y)))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    ClosedForm,
    MonteCarlo { trials: u64 },
}

impl ProfileKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProfileKind::ClosedForm => "closed_form",
            ProfileKind::MonteCarlo { .. } => "monte_carlo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginPoint {
    pub delta_t: f64,
    pub delta_x: f64,
    pub delta_y: f64,
    pub margin: f64,
    pub std_error: Option<f64>,
}

/// Margin values over a grid of offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginProfile {
    pub allocation: String,
    pub kind: ProfileKind,
    pub mode: MarginMode,
    pub points: Vec<MarginPoint>,
}

/// Closed-form margin at every grid point.
pub fn closed_form_profile(
    alloc: &FrequencyAllocation,
    grid: &DeltaGrid,
    sigma2: f64,
    mode: MarginMode,
) -> MarginProfile {
    let spectrum = MarginSpectrum::new(alloc);
    let xs: Vec<f64> = grid.dxs().iter().map(|&dx| spectrum.x_sum(dx)).collect();
    let ys: Vec<f64> = grid.dys().iter().map(|&dy| spectrum.y_sum(dy)).collect();
    let mut points = Vec::with_capacity(grid.len());
    for &dt in grid.dts() {
        let t = spectrum.temporal_sum(dt);
        for (&dx, &x) in grid.dxs().iter().zip(&xs) {
            for (&dy, &y) in grid.dys().iter().zip(&ys) {
                points.push(MarginPoint {
                    delta_t: dt,
                    delta_x: dx,
                    delta_y: dy,
                    margin: combine(t, x, y, sigma2, mode),
                    std_error: None,
                });
            }
        }
    }
    MarginProfile {
        allocation: alloc.name().into(),
        kind: ProfileKind::ClosedForm,
        mode,
        points,
    }
}

/// Monte-Carlo estimate of the margin at every grid point.
///
/// Trial `n` draws `q`, `k` and `δ` from the stream keyed by `(seed, n)`,
/// and the same draw is scored at every grid point, so a point's estimate
/// does not depend on which other points share the grid. Because the score
/// is linear in the key, `score(q, k′) − score(q, k)` is evaluated as
/// `score(q, k′ − k)`. In temporal-only mode non-temporal pairs are dropped.
pub fn monte_carlo_profile(
    alloc: &FrequencyAllocation,
    grid: &DeltaGrid,
    spec: &EnsembleSpec,
    trials: u64,
    mode: MarginMode,
) -> Result<MarginProfile, AnalysisError> {
    spec.validate()?;
    if trials == 0 {
        return Err(AnalysisError::NoTrials);
    }
    let d = alloc.dim();
    if spec.d != d {
        return Err(AnalysisError::EnsembleDimension {
            ensemble: spec.d,
            alloc: d,
        });
    }
    let pairs = d / 2;
    let keep: Vec<bool> = alloc
        .pairs()
        .iter()
        .map(|p| {
            mode == MarginMode::Full || matches!(p.axis, AxisLabel::Temporal | AxisLabel::Sequence)
        })
        .collect();

    // Per grid point, per pair (cos, sin); dropped pairs get (0, 0).
    let mut trig = Vec::with_capacity(grid.len() * pairs * 2);
    let mut coords = Vec::with_capacity(grid.len());
    for (dt, dx, dy) in grid.points() {
        let table = RotationTable::new(
            alloc,
            &PositionTriple {
                t: dt,
                x: dx,
                y: dy,
            },
        );
        for ((&k, &c), &s) in keep.iter().zip(table.cos()).zip(table.sin()) {
            trig.push(if k { c } else { 0.0 });
            trig.push(if k { s } else { 0.0 });
        }
        coords.push((dt, dx, dy));
    }

    let component = spec.component();
    let perturbation = spec.perturbation();
    let mut q = vec![0.0; d];
    let mut k = vec![0.0; d];
    let mut delta = vec![0.0; d];
    let mut pq = vec![0.0; pairs * 2];
    let mut stats = vec![Welford::default(); coords.len()];

    for n in 0..trials {
        let mut rng = keyed_rng(spec.seed, &[MC_DOMAIN, n]);
        component.fill(&mut rng, &mut q);
        if spec.unrelated_is_query {
            k.copy_from_slice(&q);
        } else {
            component.fill(&mut rng, &mut k);
        }
        perturbation.fill(&mut rng, &mut delta);
        for i in 0..pairs {
            let (a, b) = (2 * i, 2 * i + 1);
            let da = (q[a] + delta[a]) - k[a];
            let db = (q[b] + delta[b]) - k[b];
            pq[2 * i] = q[a] * da + q[b] * db;
            pq[2 * i + 1] = q[a] * db - q[b] * da;
        }
        for (g, stat) in stats.iter_mut().enumerate() {
            let row = &trig[g * pairs * 2..(g + 1) * pairs * 2];
            let m: f64 = row
                .chunks_exact(2)
                .zip(pq.chunks_exact(2))
                .map(|(cs, ab)| ab[0] * cs[0] + ab[1] * cs[1])
                .sum();
            stat.push(m);
        }
    }

    let points = coords
        .into_iter()
        .zip(stats)
        .map(|((dt, dx, dy), s)| MarginPoint {
            delta_t: dt,
            delta_x: dx,
            delta_y: dy,
            margin: s.mean(),
            std_error: Some(s.std_error()),
        })
        .collect();
    Ok(MarginProfile {
        allocation: alloc.name().into(),
        kind: ProfileKind::MonteCarlo { trials },
        mode,
        points,
    })
}

/// Sample mean and standard error of a Monte-Carlo margin estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub trials: u64,
}

/// Monte-Carlo margin at one offset.
pub fn monte_carlo_margin(
    alloc: &FrequencyAllocation,
    dt: f64,
    dx: f64,
    dy: f64,
    spec: &EnsembleSpec,
    trials: u64,
) -> Result<McEstimate, AnalysisError> {
    let grid = DeltaGrid::point(dt, dx, dy)?;
    let profile = monte_carlo_profile(alloc, &grid, spec, trials, MarginMode::Full)?;
    let p = profile.points[0];
    Ok(McEstimate {
        estimate: p.margin,
        std_error: p.std_error.unwrap_or(f64::NAN),
        trials,
    })
}

/// Smallest integer `Δt ∈ [0, L_max)` whose margin is strictly negative.
///
/// Exhaustive; `L_max` above [`EXACT_SCAN_LIMIT`] is refused (see
/// [`find_violation_extended`]).
pub fn find_violation(
    alloc: &FrequencyAllocation,
    sigma2: f64,
    dx: f64,
    dy: f64,
    l_max: u64,
    mode: MarginMode,
) -> Result<Option<u64>, AnalysisError> {
    if l_max == 0 {
        return Err(AnalysisError::InvalidLength);
    }
    if l_max > EXACT_SCAN_LIMIT {
        return Err(AnalysisError::ScanLimit {
            requested: l_max,
            limit: EXACT_SCAN_LIMIT,
        });
    }
    Ok(scan(
        &MarginSpectrum::new(alloc),
        sigma2,
        dx,
        dy,
        0..l_max,
        mode,
    ))
}

fn scan(
    spectrum: &MarginSpectrum,
    sigma2: f64,
    dx: f64,
    dy: f64,
    range: core::ops::Range<u64>,
    mode: MarginMode,
) -> Option<u64> {
    let x = spectrum.x_sum(dx);
    let y = spectrum.y_sum(dy);
    range
        .into_iter()
        .find(|&dt| combine(spectrum.temporal_sum(dt as f64), x, y, sigma2, mode) < 0.0)
}

/// Outcome of a violation search beyond the exhaustive limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ViolationSearch {
    pub first: Option<u64>,
    /// Every `Δt` below this was checked.
    pub exhaustive_below: u64,
    /// Extra window `[start, end)` scanned past the exhaustive prefix.
    pub window: Option<(u64, u64)>,
}

/// Violation search for arbitrary `L_max`.
///
/// The prefix `[0, min(L_max, EXACT_SCAN_LIMIT))` is scanned exhaustively.
/// If nothing is found and `L_max` is larger, one more window of
/// `EXACT_SCAN_LIMIT` offsets is scanned, starting one step before the
/// critical length of the lowest nonzero temporal angle, where that term
/// first turns negative. A `None` past the prefix is not a proof.
pub fn find_violation_extended(
    alloc: &FrequencyAllocation,
    sigma2: f64,
    dx: f64,
    dy: f64,
    l_max: u64,
    mode: MarginMode,
) -> Result<ViolationSearch, AnalysisError> {
    if l_max == 0 {
        return Err(AnalysisError::InvalidLength);
    }
    let spectrum = MarginSpectrum::new(alloc);
    let prefix = l_max.min(EXACT_SCAN_LIMIT);
    let first = scan(&spectrum, sigma2, dx, dy, 0..prefix, mode);
    if first.is_some() || l_max <= EXACT_SCAN_LIMIT {
        return Ok(ViolationSearch {
            first,
            exhaustive_below: prefix,
            window: None,
        });
    }
    let window = alloc
        .min_nonzero_temporal_theta()
        .map(|theta| {
            let lc = critical_length(theta).expect("theta is positive");
            let start = (libm::floor(lc) as u64).saturating_sub(1).max(prefix);
            (start, start.saturating_add(EXACT_SCAN_LIMIT).min(l_max))
        })
        .filter(|(start, end)| start < end);
    let first = window.and_then(|(s, e)| scan(&spectrum, sigma2, dx, dy, s..e, mode));
    Ok(ViolationSearch {
        first,
        exhaustive_below: prefix,
        window,
    })
}

/// `π / (2 θ_min) + 1`.
pub fn critical_length(theta_min: f64) -> Result<f64, AnalysisError> {
    if !theta_min.is_finite() || theta_min < 0.0 {
        return Err(AnalysisError::InvalidFrequency(theta_min));
    }
    if theta_min == 0.0 {
        return Err(AnalysisError::ZeroFrequency);
    }
    Ok(PI / (2.0 * theta_min) + 1.0)
}

/// Fraction of `Δ ∈ {0, …, L−1}` with `cos(θ·Δ) < 0`.
pub fn p_negative(theta: f64, length: u64) -> Result<f64, AnalysisError> {
    if !theta.is_finite() || theta < 0.0 {
        return Err(AnalysisError::InvalidFrequency(theta));
    }
    if length == 0 {
        return Err(AnalysisError::InvalidLength);
    }
    let negatives = (0..length)
        .filter(|&k| libm::cos(theta * k as f64) < 0.0)
        .count();
    Ok(negatives as f64 / length as f64)
}

/// A grid point where a candidate beat the zero-temporal reference.
#[derive(Debug, Clone, PartialEq)]
pub struct Counterexample {
    pub candidate: String,
    pub delta_t: f64,
    pub delta_x: f64,
    pub delta_y: f64,
    pub reference_margin: f64,
    pub candidate_margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominanceReport {
    pub points_checked: u64,
    pub counterexample_count: u64,
    /// At most [`DominanceReport::KEEP`] examples are kept.
    pub counterexamples: Vec<Counterexample>,
    /// Smallest `reference − candidate` margin seen.
    pub min_slack: f64,
}

impl DominanceReport {
    pub const KEEP: usize = 16;

    pub fn holds(&self) -> bool {
        self.counterexample_count == 0
    }
}

fn check_same_spatial(
    reference: &FrequencyAllocation,
    candidate: &FrequencyAllocation,
) -> Result<(), AnalysisError> {
    if reference.dim() != candidate.dim() || reference.pairs().len() != candidate.pairs().len() {
        return Err(AnalysisError::DimensionMismatch {
            candidate: candidate.name().into(),
            expected: reference.dim(),
            found: candidate.dim(),
        });
    }
    for (r, c) in reference.pairs().iter().zip(candidate.pairs()) {
        let same_axis = r.axis == c.axis && r.pair_index == c.pair_index;
        let same_spatial = !r.axis.is_spatial() || r.theta.to_bits() == c.theta.to_bits();
        if !(same_axis && same_spatial) {
            return Err(AnalysisError::SpatialMismatch {
                candidate: candidate.name().into(),
                pair_index: r.pair_index,
            });
        }
    }
    Ok(())
}

/// Checks, pointwise over `grid`, that zero temporal frequencies give a
/// margin at least as large as every candidate temporal frequency set
/// sharing the reference's spatial block. Zero tolerance.
pub fn dominance_check(
    reference: &FrequencyAllocation,
    candidates: &[FrequencyAllocation],
    sigma2: f64,
    grid: &DeltaGrid,
) -> Result<DominanceReport, AnalysisError> {
    if reference
        .axis_pairs(AxisLabel::Temporal)
        .any(|p| p.theta != 0.0)
    {
        return Err(AnalysisError::NotZeroTemporal(reference.name().into()));
    }
    for c in candidates {
        check_same_spatial(reference, c)?;
    }
    let spectrum = MarginSpectrum::new(reference);
    let xs: Vec<f64> = grid.dxs().iter().map(|&dx| spectrum.x_sum(dx)).collect();
    let ys: Vec<f64> = grid.dys().iter().map(|&dy| spectrum.y_sum(dy)).collect();
    let cand_spectra: Vec<MarginSpectrum> = candidates.iter().map(MarginSpectrum::new).collect();

    let mut report = DominanceReport {
        points_checked: 0,
        counterexample_count: 0,
        counterexamples: Vec::new(),
        min_slack: f64::INFINITY,
    };
    for &dt in grid.dts() {
        let t_ref = spectrum.temporal_sum(dt);
        let t_cand: Vec<f64> = cand_spectra.iter().map(|s| s.temporal_sum(dt)).collect();
        for (&dx, &x) in grid.dxs().iter().zip(&xs) {
            for (&dy, &y) in grid.dys().iter().zip(&ys) {
                let m_ref = combine(t_ref, x, y, sigma2, MarginMode::Full);
                for (c, &tc) in candidates.iter().zip(&t_cand) {
                    let m_c = combine(tc, x, y, sigma2, MarginMode::Full);
                    report.points_checked += 1;
                    report.min_slack = report.min_slack.min(m_ref - m_c);
                    if m_c > m_ref {
                        report.counterexample_count += 1;
                        if report.counterexamples.len() < DominanceReport::KEEP {
                            report.counterexamples.push(Counterexample {
                                candidate: c.name().into(),
                                delta_t: dt,
                                delta_x: dx,
                                delta_y: dy,
                                reference_margin: m_ref,
                                candidate_margin: m_c,
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(report)
}

/// `2 + cos a + cos b`, one summand of the hope_x margin (over `2σ²`).
pub fn hope_x_term(cos_x: f64, cos_y: f64) -> f64 {
    2.0 + cos_x + cos_y
}

#[derive(Debug, Clone, PartialEq)]
pub struct HopeXCertificate {
    pub points_checked: u64,
    pub min_margin: f64,
    /// Smallest per-pair summand `2σ²(2 + cos + cos)` over the spatial grid.
    pub min_term: f64,
    pub counterexample: Option<(f64, f64, f64, f64)>,
}

impl HopeXCertificate {
    pub fn holds(&self) -> bool {
        self.counterexample.is_none() && self.min_term >= 0.0
    }
}

/// Numerically confirms the hope_x margin is non-negative over `grid` and
/// reports the smallest per-summand value, which is bounded below by zero.
pub fn hope_x_certificate(
    base: RotaryBase,
    sigma2: f64,
    grid: &DeltaGrid,
) -> Result<HopeXCertificate, AnalysisError> {
    if !base.dim().is_multiple_of(8) {
        return Err(AnalysisError::NotDivisibleBy8(base.dim()));
    }
    let alloc = allocate(Strategy::HopeX, base)?;
    let spectrum = MarginSpectrum::new(&alloc);
    let xs: Vec<f64> = grid.dxs().iter().map(|&dx| spectrum.x_sum(dx)).collect();
    let ys: Vec<f64> = grid.dys().iter().map(|&dy| spectrum.y_sum(dy)).collect();

    let eighth = base.dim() / 8;
    let mut min_term = f64::INFINITY;
    for &dx in grid.dxs() {
        for &dy in grid.dys() {
            for i in 0..eighth {
                let cx = libm::cos(dx * base.theta(2 * i));
                let cy = libm::cos(dy * base.theta(2 * i + 1));
                min_term = min_term.min(2.0 * sigma2 * hope_x_term(cx, cy));
            }
        }
    }

    let mut cert = HopeXCertificate {
        points_checked: 0,
        min_margin: f64::INFINITY,
        min_term,
        counterexample: None,
    };
    for &dt in grid.dts() {
        let t = spectrum.temporal_sum(dt);
        for (&dx, &x) in grid.dxs().iter().zip(&xs) {
            for (&dy, &y) in grid.dys().iter().zip(&ys) {
                let m = combine(t, x, y, sigma2, MarginMode::Full);
                cert.points_checked += 1;
                cert.min_margin = cert.min_margin.min(m);
                if m < 0.0 && cert.counterexample.is_none() {
                    cert.counterexample = Some((dt, dx, dy, m));
                }
            }
        }
    }
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freq_alloc::{base_frequencies, PairFrequency};

    fn d128(strategy: Strategy) -> FrequencyAllocation {
        allocate(strategy, RotaryBase::with_default_base(128).unwrap()).unwrap()
    }

    const THETA_MIN_128: f64 = 1.154_781_984_689_458_2e-4;

    #[test]
    fn zero_offset_margin_is_d_sigma2() {
        for s in Strategy::ALL {
            assert_eq!(closed_form_margin(&d128(s), 0.0, 0.0, 0.0, 1.0), 128.0);
            assert_eq!(closed_form_margin(&d128(s), 0.0, 0.0, 0.0, 2.5), 320.0);
        }
    }

    #[test]
    fn hope_margin_ignores_temporal_offset() {
        let hope = d128(Strategy::Hope);
        for dt in [1.0, 17.0, 1e4, 1e6, 3.3e7] {
            assert_eq!(closed_form_margin(&hope, dt, 0.0, 0.0, 1.0), 128.0);
            assert_eq!(temporal_margin(&hope, dt, 1.0), 32.0);
        }
    }

    #[test]
    fn single_pair_counterexample() {
        let base = RotaryBase::with_default_base(2).unwrap();
        let alloc = FrequencyAllocation::from_parts(
            "single",
            base,
            alloc::vec![PairFrequency {
                pair_index: 0,
                axis: AxisLabel::Temporal,
                theta: THETA_MIN_128
            }],
            false,
        );
        let dt = libm::ceil(PI / THETA_MIN_128);
        let m = closed_form_margin(&alloc, dt, 0.0, 0.0, 1.0);
        assert_eq!(m, 2.0 * libm::cos(THETA_MIN_128 * dt));
        assert!(m < 0.0);
        // First negative offset: brute-force cosine scan.
        let oracle = (0u64..)
            .find(|&k| libm::cos(THETA_MIN_128 * k as f64) < 0.0)
            .unwrap();
        assert_eq!(oracle, 13_603);
        assert_eq!(
            find_violation(&alloc, 1.0, 0.0, 0.0, 100_000, MarginMode::Full),
            Ok(Some(oracle))
        );
        assert_eq!(oracle, libm::ceil(PI / (2.0 * THETA_MIN_128)) as u64);
    }

    #[test]
    fn sigma2_is_a_linear_scale() {
        let m = d128(Strategy::Mrope);
        for (dt, dx, dy) in [(3.0, 1.0, 2.0), (1e3, 40.0, 7.0), (77.0, 0.0, 64.0)] {
            let one = closed_form_margin(&m, dt, dx, dy, 1.0);
            assert_eq!(closed_form_margin(&m, dt, dx, dy, 2.0), 2.0 * one);
        }
    }

    #[test]
    fn critical_length_values() {
        assert_eq!(critical_length(PI / 2.0), Ok(2.0));
        assert_eq!(critical_length(PI), Ok(1.5));
        // π / (2 · 10000^(-126/128)) + 1 evaluated with 40-digit arithmetic.
        let lc = critical_length(THETA_MIN_128).unwrap();
        assert!((lc - 13_603.535_782_694_187).abs() < 1e-6);
        assert_eq!(critical_length(0.0), Err(AnalysisError::ZeroFrequency));
        assert!(critical_length(-1.0).is_err());
    }

    #[test]
    fn p_negative_examples() {
        assert_eq!(p_negative(PI / 2.0, 3), Ok(1.0 / 3.0));
        for l in [10u64, 100, 10_000] {
            let below = PI / (2.0 * (l - 1) as f64) * 0.999;
            assert_eq!(p_negative(below, l), Ok(0.0));
        }
        let p = p_negative(1000.37, 10_000).unwrap();
        assert!((p - 0.5).abs() <= 0.02);
        assert!(p_negative(1.0, 0).is_err());
        assert!(p_negative(-1.0, 3).is_err());
    }

    #[test]
    fn violation_search_examples() {
        let hope = d128(Strategy::Hope);
        assert_eq!(
            find_violation(&hope, 1.0, 0.0, 0.0, 1_000, MarginMode::Full),
            Ok(None)
        );
        let mrope = d128(Strategy::Mrope);
        // brute-force oracle over the 16 temporal cosines
        let thetas = &base_frequencies(mrope.base())[..16];
        let oracle = (0u64..100).find(|&dt| {
            thetas
                .iter()
                .map(|th| libm::cos(th * dt as f64))
                .sum::<f64>()
                < 0.0
        });
        assert!(oracle.is_some());
        assert_eq!(
            find_violation(&mrope, 1.0, 0.0, 0.0, 100, MarginMode::TemporalOnly),
            Ok(oracle)
        );
        assert!(matches!(
            find_violation(
                &mrope,
                1.0,
                0.0,
                0.0,
                EXACT_SCAN_LIMIT + 1,
                MarginMode::Full
            ),
            Err(AnalysisError::ScanLimit { .. })
        ));
        assert_eq!(
            find_violation(&mrope, 1.0, 0.0, 0.0, 0, MarginMode::Full),
            Err(AnalysisError::InvalidLength)
        );
    }

    #[test]
    fn extended_search_uses_critical_window() {
        let video = d128(Strategy::VideoRope);
        let single = video
            .with_temporal_thetas("single", &[THETA_MIN_128 / 100.0; 16])
            .unwrap();
        let found =
            find_violation_extended(&single, 1.0, 0.0, 0.0, 5_000_000, MarginMode::TemporalOnly)
                .unwrap();
        assert_eq!(found.exhaustive_below, EXACT_SCAN_LIMIT);
        let (start, _) = found.window.unwrap();
        let v = found.first.unwrap();
        assert!(v >= start);
        assert!(libm::cos(THETA_MIN_128 / 100.0 * v as f64) < 0.0);
        assert!(libm::cos(THETA_MIN_128 / 100.0 * (v - 1) as f64) >= 0.0);
    }

    #[test]
    fn dominance_small_grid() {
        let hope = d128(Strategy::Hope);
        let thetas = base_frequencies(hope.base());
        let high = hope.with_temporal_thetas("mrope_t", &thetas[..16]).unwrap();
        let low = d128(Strategy::VideoRope);
        let grid = DeltaGrid::new(
            (0..200).map(|k| (k * 37) as f64).collect(),
            alloc::vec![0.0, 3.0, 64.0],
            alloc::vec![0.0, 5.0, 63.0],
        )
        .unwrap();
        let report = dominance_check(&hope, &[high, low.clone()], 1.0, &grid).unwrap();
        assert!(report.holds());
        assert_eq!(report.points_checked, 2 * grid.len() as u64);

        // Δt = 0 ties.
        let zero =
            DeltaGrid::new(alloc::vec![0.0], alloc::vec![0.0, 9.0], alloc::vec![4.0]).unwrap();
        let r = dominance_check(&hope, &[low], 1.0, &zero).unwrap();
        assert_eq!(r.min_slack, 0.0);
        let r = dominance_check(&hope, core::slice::from_ref(&hope), 1.0, &grid).unwrap();
        assert_eq!(r.min_slack, 0.0);
        assert!(r.holds());
    }

    #[test]
    fn dominance_rejects_mismatched_spatial_blocks() {
        let hope = d128(Strategy::Hope);
        let mrope = d128(Strategy::Mrope);
        let grid = DeltaGrid::point(1.0, 1.0, 1.0).unwrap();
        assert!(matches!(
            dominance_check(&hope, core::slice::from_ref(&mrope), 1.0, &grid),
            Err(AnalysisError::SpatialMismatch { .. })
        ));
        assert!(matches!(
            dominance_check(&mrope, &[hope], 1.0, &grid),
            Err(AnalysisError::NotZeroTemporal(_))
        ));
    }

    #[test]
    fn hope_x_certificate_holds() {
        let grid = DeltaGrid::new(
            alloc::vec![0.0, 1.0, 1e5],
            (0..=64).map(f64::from).collect(),
            (0..=64).map(f64::from).collect(),
        )
        .unwrap();
        let cert =
            hope_x_certificate(RotaryBase::with_default_base(128).unwrap(), 1.0, &grid).unwrap();
        assert!(cert.holds());
        assert!(cert.min_margin >= 0.0);
        assert!(cert.min_term >= 0.0);
        assert_eq!(hope_x_term(-1.0, -1.0), 0.0);
        assert!(matches!(
            hope_x_certificate(RotaryBase::with_default_base(12).unwrap(), 1.0, &grid),
            Err(AnalysisError::NotDivisibleBy8(12))
        ));
    }

    #[test]
    fn monte_carlo_matches_closed_form_small() {
        let alloc = allocate(Strategy::Vanilla, RotaryBase::with_default_base(4).unwrap()).unwrap();
        let spec = EnsembleSpec::new(4, 0.0, 1.0, 0.5, 11).unwrap();
        let est = monte_carlo_margin(&alloc, 0.0, 0.0, 0.0, &spec, 100_000).unwrap();
        assert!((est.estimate - 4.0).abs() <= 4.0 * est.std_error, "{est:?}");
    }

    #[test]
    fn forced_equal_keys_give_zero_margin() {
        let alloc = d128(Strategy::Mrope);
        let spec = EnsembleSpec::new(128, 0.3, 1.0, 0.0, 5)
            .unwrap()
            .with_unrelated_is_query(true);
        let est = monte_carlo_margin(&alloc, 12.0, 3.0, 1.0, &spec, 500).unwrap();
        assert_eq!(est.estimate, 0.0);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn single_point_estimate_is_grid_independent() {
        let alloc = d128(Strategy::VideoRope);
        let spec = EnsembleSpec::new(128, 0.0, 1.0, 0.2, 3).unwrap();
        let grid = DeltaGrid::new(
            alloc::vec![0.0, 50.0],
            alloc::vec![2.0],
            alloc::vec![0.0, 9.0],
        )
        .unwrap();
        let profile = monte_carlo_profile(&alloc, &grid, &spec, 300, MarginMode::Full).unwrap();
        let single = monte_carlo_margin(&alloc, 50.0, 2.0, 9.0, &spec, 300).unwrap();
        let p = profile.points[3];
        assert_eq!((p.delta_t, p.delta_x, p.delta_y), (50.0, 2.0, 9.0));
        assert_eq!(p.margin, single.estimate);
    }

    #[test]
    fn invalid_inputs() {
        assert!(EnsembleSpec::new(3, 0.0, 1.0, 0.0, 0).is_err());
        assert!(EnsembleSpec::new(4, 0.0, 0.0, 0.0, 0).is_err());
        assert!(EnsembleSpec::new(4, 0.0, 1.0, -0.1, 0).is_err());
        assert!(DeltaGrid::new(alloc::vec![-1.0], alloc::vec![0.0], alloc::vec![0.0]).is_err());
        let alloc = d128(Strategy::Hope);
        let spec = EnsembleSpec::new(8, 0.0, 1.0, 0.0, 0).unwrap();
        assert!(matches!(
            monte_carlo_margin(&alloc, 0.0, 0.0, 0.0, &spec, 10),
            Err(AnalysisError::EnsembleDimension { .. })
        ));
        let spec = EnsembleSpec::new(128, 0.0, 1.0, 0.0, 0).unwrap();
        assert_eq!(
            monte_carlo_margin(&alloc, 0.0, 0.0, 0.0, &spec, 0),
            Err(AnalysisError::NoTrials)
        );
    }
}
