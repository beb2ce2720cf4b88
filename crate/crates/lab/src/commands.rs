//! Subcommand implementations. Each builds its table in memory.

use mmrope_core::freq_alloc::PairFrequency;
use mmrope_core::semantic::ViolationSearch;
use mmrope_core::{
    allocate, closed_form_profile, critical_length, find_violation_extended, flattening_distortion,
    index_tokens, monte_carlo_profile, p_negative, pairwise_score_matrix, sweep, AxisLabel,
    DeltaGrid, EnsembleSpec, FrequencyAllocation, HeadVector, MarginMode, NiahConfig,
    PositionTriple, RotaryBase, SampleFamily, SequenceLayout, SpatialIndexing, Strategy, VideoSpan,
};

use crate::args::{
    AllocArgs, Common, CriticalArgs, DistortionArgs, FamilyArg, IndicesArgs, LayoutArgs,
    MarginArgs, ModeArg, NiahArgs, PnegArgs, ScoresArgs, SpatialArg,
};
use crate::output::{real, Table};
use crate::LabError;

/// A command's table plus lines for the terminal.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub table: Table,
    pub summary: Vec<String>,
}

impl From<Table> for Outcome {
    fn from(table: Table) -> Self {
        Self {
            table,
            summary: Vec::new(),
        }
    }
}

fn strategy(name: &str) -> Result<Strategy, LabError> {
    Ok(name.parse::<Strategy>()?)
}

fn allocation(common: &Common, name: &str) -> Result<FrequencyAllocation, LabError> {
    Ok(allocate(
        strategy(name)?,
        RotaryBase::new(common.d, common.base)?,
    )?)
}

fn family(f: FamilyArg) -> SampleFamily {
    match f {
        FamilyArg::Gaussian => SampleFamily::Gaussian,
        FamilyArg::Uniform => SampleFamily::Uniform,
    }
}

fn mode(m: ModeArg) -> MarginMode {
    match m {
        ModeArg::Full => MarginMode::Full,
        ModeArg::Temporal => MarginMode::TemporalOnly,
    }
}

fn layout(args: &LayoutArgs) -> Result<SequenceLayout, LabError> {
    Ok(SequenceLayout::new(
        args.pre_text,
        Some(VideoSpan {
            frames: args.frames,
            height: args.height,
            width: args.width,
        }),
        args.post_text,
        args.gamma,
    )?)
}

pub fn alloc(args: &AllocArgs) -> Result<Outcome, LabError> {
    let a = allocation(&args.common, &args.strategy)?;
    let mut t = Table::new(vec!["pair_index", "axis", "theta"]);
    for p in a.pairs() {
        t.push(vec![
            p.pair_index.to_string(),
            p.axis.as_str().into(),
            real(p.theta),
        ]);
    }
    Ok(t.into())
}

fn offsets(
    explicit: &Option<Vec<f64>>,
    max: u64,
    step: u64,
    axis: &str,
) -> Result<Vec<f64>, LabError> {
    if let Some(v) = explicit {
        return Ok(v.clone());
    }
    if step == 0 {
        return Err(LabError::Validation(format!(
            "--{axis}-step must be positive"
        )));
    }
    Ok((0..=max / step).map(|i| (i * step) as f64).collect())
}

pub fn margin(args: &MarginArgs) -> Result<Outcome, LabError> {
    let a = allocation(&args.common, &args.strategy)?;
    let grid = DeltaGrid::new(
        offsets(&args.dts, args.dt_max, args.dt_step, "dt")?,
        offsets(&args.dxs, args.dx_max, args.dx_step, "dx")?,
        offsets(&args.dys, args.dy_max, args.dy_step, "dy")?,
    )?;
    let profile = match args.trials {
        None => {
            if !(args.sigma2.is_finite() && args.sigma2 > 0.0) {
                return Err(LabError::Validation("--sigma2 must be positive".into()));
            }
            closed_form_profile(&a, &grid, args.sigma2, mode(args.mode))
        }
        Some(trials) => {
            let spec = EnsembleSpec::new(
                args.common.d,
                args.mu,
                args.sigma2,
                args.sigma_delta2,
                args.common.seed,
            )?
            .with_family(family(args.family));
            monte_carlo_profile(&a, &grid, &spec, trials, mode(args.mode))?
        }
    };
    let mut t = Table::new(vec![
        "delta_t",
        "delta_x",
        "delta_y",
        "margin",
        "std_error",
        "allocation",
        "kind",
    ]);
    for p in &profile.points {
        t.push(vec![
            real(p.delta_t),
            real(p.delta_x),
            real(p.delta_y),
            real(p.margin),
            p.std_error.map(real).unwrap_or_default(),
            profile.allocation.clone(),
            profile.kind.as_str().into(),
        ]);
    }
    Ok(t.into())
}

pub fn critical(args: &CriticalArgs) -> Result<Outcome, LabError> {
    if !(args.sigma2.is_finite() && args.sigma2 > 0.0) {
        return Err(LabError::Validation("--sigma2 must be positive".into()));
    }
    let (subject, alloc) = match (&args.strategy, args.theta_min) {
        (Some(name), None) => (name.clone(), allocation(&args.common, name)?),
        (None, Some(theta)) => {
            if !(theta.is_finite() && theta >= 0.0) {
                return Err(LabError::Validation(format!(
                    "--theta-min must be non-negative, got {theta}"
                )));
            }
            // One temporal pair rotating at theta.
            let single = FrequencyAllocation::from_parts(
                "theta_min",
                RotaryBase::new(2, args.common.base)?,
                vec![PairFrequency {
                    pair_index: 0,
                    axis: AxisLabel::Temporal,
                    theta,
                }],
                theta == 0.0,
            );
            (format!("theta_min={}", real(theta)), single)
        }
        _ => {
            return Err(LabError::Validation(
                "give exactly one of --strategy or --theta-min".into(),
            ))
        }
    };
    let theta = alloc.min_nonzero_temporal_theta();
    let lc = theta.map(critical_length).transpose()?;

    let mut t = Table::new(vec![
        "subject",
        "theta_min",
        "critical_length",
        "mode",
        "first_violation",
        "exhaustive_below",
        "window_start",
        "window_end",
    ]);
    let mut summary = vec![match lc {
        Some(l) => format!(
            "{subject}: theta_min = {}, critical length = {l}",
            real(theta.unwrap_or(0.0))
        ),
        None => format!("{subject}: no nonzero temporal frequency, never violates"),
    }];
    for m in [MarginMode::Full, MarginMode::TemporalOnly] {
        let ViolationSearch {
            first,
            exhaustive_below,
            window,
        } = find_violation_extended(&alloc, args.sigma2, 0.0, 0.0, args.l_max, m)?;
        summary.push(match first {
            Some(dt) => format!("  {} margin: first violation at dt = {dt}", m.as_str()),
            None => format!(
                "  {} margin: no violation up to L_max = {}",
                m.as_str(),
                args.l_max
            ),
        });
        t.push(vec![
            subject.clone(),
            theta.map(real).unwrap_or_default(),
            lc.map(real).unwrap_or_default(),
            m.as_str().into(),
            first.map(|v| v.to_string()).unwrap_or_default(),
            exhaustive_below.to_string(),
            window.map(|w| w.0.to_string()).unwrap_or_default(),
            window.map(|w| w.1.to_string()).unwrap_or_default(),
        ]);
    }
    Ok(Outcome { table: t, summary })
}

pub fn indices(args: &IndicesArgs) -> Result<Outcome, LabError> {
    let tokens = index_tokens(&layout(&args.layout)?)?;
    let mut t = Table::new(vec![
        "token_slot",
        "segment",
        "frame",
        "row",
        "col",
        "t",
        "x",
        "y",
    ]);
    for tok in tokens {
        let grid =
            |f: fn((u64, u64, u64)) -> u64| tok.grid.map(|g| f(g).to_string()).unwrap_or_default();
        t.push(vec![
            tok.slot.to_string(),
            tok.segment.as_str().into(),
            grid(|g| g.0),
            grid(|g| g.1),
            grid(|g| g.2),
            real(tok.position.t),
            real(tok.position.x),
            real(tok.position.y),
        ]);
    }
    Ok(t.into())
}

pub fn niah(args: &NiahArgs) -> Result<Outcome, LabError> {
    let spec = EnsembleSpec::new(
        args.common.d,
        args.mu,
        args.sigma2,
        args.sigma_delta2,
        args.common.seed,
    )?
    .with_family(family(args.family));
    let strategies = args
        .strategies
        .iter()
        .map(|s| strategy(s))
        .collect::<Result<Vec<_>, _>>()?;
    let first = *args
        .lengths
        .first()
        .ok_or_else(|| LabError::Validation("--lengths is empty".into()))?;
    let config = NiahConfig {
        strategies,
        base: args.common.base,
        depths: args.depths.clone(),
        height: args.height,
        width: args.width,
        gamma: args.gamma,
        pre_text_len: args.pre_text,
        post_text_len: args.post_text,
        trials: args.trials,
        spatial: match args.spatial {
            SpatialArg::FrameLocal => SpatialIndexing::FrameLocal,
            SpatialArg::Diagonal => SpatialIndexing::Diagonal,
        },
        collapse_positions: args.collapse_positions,
        ..NiahConfig::new(first, spec)
    };
    // Validate every length before the (slow) sweep starts.
    for &l in &args.lengths {
        NiahConfig {
            haystack_len: l,
            ..config.clone()
        }
        .validate()?;
    }
    let rows = sweep(&config, &args.lengths)?;
    let mut t = Table::new(vec![
        "strategy",
        "haystack_len",
        "depth",
        "trials",
        "success_rate",
        "mean_margin",
        "margin_se",
        "seed",
    ]);
    for r in rows {
        t.push(vec![
            r.strategy.name().into(),
            r.haystack_len.to_string(),
            real(r.depth),
            r.trials.to_string(),
            real(r.success_rate),
            real(r.mean_margin),
            real(r.margin_se),
            r.seed.to_string(),
        ]);
    }
    Ok(t.into())
}

pub fn distortion(args: &DistortionArgs) -> Result<Outcome, LabError> {
    let mut t = Table::new(vec!["height", "width", "spatial_gap", "temporal_gap"]);
    for h in 1..=args.h_max {
        for w in 1..=args.w_max {
            let (s, tg) = flattening_distortion(h, w)?;
            t.push(vec![
                h.to_string(),
                w.to_string(),
                s.to_string(),
                tg.to_string(),
            ]);
        }
    }
    Ok(t.into())
}

/// `points` log-spaced values from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

pub fn pneg(args: &PnegArgs) -> Result<Outcome, LabError> {
    if !(args.theta_lo > 0.0 && args.theta_hi >= args.theta_lo && args.theta_hi.is_finite()) {
        return Err(LabError::Validation(
            "need 0 < --theta-lo <= --theta-hi".into(),
        ));
    }
    if args.points == 0 {
        return Err(LabError::Validation("--points must be positive".into()));
    }
    let mut t = Table::new(vec!["theta", "length", "p_negative"]);
    for theta in log_space(args.theta_lo, args.theta_hi, args.points) {
        t.push(vec![
            real(theta),
            args.length.to_string(),
            real(p_negative(theta, args.length)?),
        ]);
    }
    Ok(t.into())
}

pub fn scores(args: &ScoresArgs) -> Result<Outcome, LabError> {
    let strat = strategy(&args.strategy)?;
    let a = allocation(&args.common, &args.strategy)?;
    let spec = EnsembleSpec::new(args.common.d, args.mu, args.sigma2, 0.0, args.common.seed)?;
    let tokens = index_tokens(&layout(&args.layout)?)?;
    let positions: Vec<PositionTriple> = tokens
        .iter()
        .map(|t| {
            if strat.is_multimodal() {
                t.position
            } else {
                PositionTriple::uniform(t.slot as f64)
            }
        })
        .collect();
    let draw = |role: u64| -> Result<Vec<HeadVector>, LabError> {
        tokens
            .iter()
            .map(|t| Ok(HeadVector::new(spec.sample_vector(&[role, t.slot]))?))
            .collect()
    };
    let (qs, ks) = (draw(0)?, draw(1)?);
    let m = pairwise_score_matrix(&qs, &ks, &positions, &positions, &a)?;
    let mut t = Table::new(vec!["query_slot", "key_slot", "score"]);
    for n in 0..m.rows() {
        for (j, s) in m.row(n).iter().enumerate() {
            t.push(vec![n.to_string(), j.to_string(), real(*s)]);
        }
    }
    Ok(t.into())
}
