use mmrope_core::semantic::{hope_x_term, EXACT_SCAN_LIMIT};
use mmrope_core::{
    allocate, attention_score, closed_form_margin, closed_form_profile, critical_length,
    find_violation, index_tokens, monte_carlo_profile, pairwise_score_matrix, position,
    relative_score, rotate, run_retrieval, sweep, DeltaGrid, EnsembleSpec, FrequencyAllocation,
    HeadVector, MarginMode, NiahConfig, PositionTriple, RotaryBase, Segment, SequenceLayout,
    Strategy as Enc, VideoSpan,
};
use proptest::prelude::*;

const D: usize = 128;

fn alloc(s: Enc) -> FrequencyAllocation {
    allocate(s, RotaryBase::with_default_base(D).unwrap()).unwrap()
}

fn vector() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-3.0f64..3.0, D)
}

fn position() -> impl Strategy<Value = (f64, f64, f64)> {
    (-5000.0f64..5000.0, -64.0f64..64.0, -64.0f64..64.0)
}

fn triple((t, x, y): (f64, f64, f64), strategy: Enc) -> PositionTriple {
    if strategy.is_multimodal() {
        PositionTriple::new(t, x, y).unwrap()
    } else {
        PositionTriple::uniform(t.round())
    }
}

fn any_strategy() -> impl Strategy<Value = Enc> {
    proptest::sample::select(Enc::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn relative_identity(s in any_strategy(), q in vector(), k in vector(), pq in position(), pk in position()) {
        let a = alloc(s);
        let (q, k) = (HeadVector::new(q).unwrap(), HeadVector::new(k).unwrap());
        let (pq, pk) = (triple(pq, s), triple(pk, s));
        let abs = attention_score(&q, &k, &pq, &pk, &a).unwrap();
        let rel = relative_score(&q, &k, &(pq - pk), &a).unwrap();
        prop_assert!((abs - rel).abs() <= 1e-9 * q.norm() * k.norm());
    }

    #[test]
    fn rotation_preserves_norm(s in any_strategy(), v in vector(), p in position()) {
        let a = alloc(s);
        let v = HeadVector::new(v).unwrap();
        let r = rotate(&v, &triple(p, s), &a).unwrap();
        prop_assert!((r.norm() - v.norm()).abs() <= 1e-12 * v.norm());
    }

    #[test]
    fn scores_are_shift_invariant(s in any_strategy(), q in vector(), k in vector(),
                                  pq in position(), pk in position(), shift in position()) {
        let a = alloc(s);
        let (q, k) = (HeadVector::new(q).unwrap(), HeadVector::new(k).unwrap());
        let (pq, pk, sh) = (triple(pq, s), triple(pk, s), triple(shift, s));
        let base = attention_score(&q, &k, &pq, &pk, &a).unwrap();
        let moved = attention_score(&q, &k, &(pq + sh), &(pk + sh), &a).unwrap();
        prop_assert!((base - moved).abs() <= 1e-9 * q.norm() * k.norm());
    }

    #[test]
    fn hope_is_temporally_transparent(q in vector(), k in vector(), dt in -1e6f64..1e6) {
        let a = alloc(Enc::Hope);
        let (q, k) = (HeadVector::new(q).unwrap(), HeadVector::new(k).unwrap());
        let s = relative_score(&q, &k, &PositionTriple::new(dt, 0.0, 0.0).unwrap(), &a).unwrap();
        prop_assert!((s - q.dot(&k)).abs() <= 1e-9 * q.norm() * k.norm());
    }

    #[test]
    fn boundary_identity_and_monotone_time(pre in 0u64..20, frames in 1u64..12, h in 1u64..4, w in 1u64..4,
                                           post in 1u64..10, gi in 0usize..5) {
        let gamma = position::DEFAULT_GAMMAS[gi];
        let layout = SequenceLayout::new(pre, Some(VideoSpan { frames, height: h, width: w }), post, gamma).unwrap();
        let toks = index_tokens(&layout).unwrap();
        let first_post = toks.iter().find(|t| t.segment == Segment::PostText).unwrap();
        prop_assert_eq!(first_post.position.t, pre as f64 + gamma * frames as f64);
        prop_assert!(toks.windows(2).all(|w| w[0].position.t <= w[1].position.t));
        if gamma == 1.0 {
            let mut ts: Vec<f64> = toks.iter().map(|t| t.position.t).collect();
            ts.dedup();
            prop_assert!(ts.iter().enumerate().all(|(i, &t)| t == i as f64));
        }
    }

    #[test]
    fn margin_scales_with_sigma2(s in any_strategy(), dt in 0.0f64..1e5, dx in 0.0f64..64.0,
                                 dy in 0.0f64..64.0, k in 0.1f64..10.0) {
        let a = alloc(s);
        let one = closed_form_margin(&a, dt, dx, dy, 1.0);
        let scaled = closed_form_margin(&a, dt, dx, dy, k);
        prop_assert!((scaled - k * one).abs() <= 1e-12 * k * D as f64);
    }

    #[test]
    fn hope_x_terms_are_nonnegative(a in -1e4f64..1e4, b in -1e4f64..1e4) {
        prop_assert!(hope_x_term(a.cos(), b.cos()) >= 0.0);
    }
}

#[test]
fn margin_at_origin_is_d_sigma2() {
    for s in Enc::ALL {
        assert_eq!(
            closed_form_margin(&alloc(s), 0.0, 0.0, 0.0, 1.5),
            D as f64 * 1.5
        );
    }
}

#[test]
fn pairwise_matrix_matches_loop() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    let a = alloc(Enc::VideoRope);
    let mut draw = |n: usize| -> Vec<HeadVector> {
        (0..n)
            .map(|_| {
                HeadVector::new((0..D).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
            })
            .collect()
    };
    let (qs, ks) = (draw(8), draw(8));
    let pos: Vec<PositionTriple> = (0..8)
        .map(|i| PositionTriple::new(i as f64 * 3.0, i as f64 - 4.0, 2.0 - i as f64).unwrap())
        .collect();
    let m = pairwise_score_matrix(&qs, &ks, &pos, &pos, &a).unwrap();
    for n in 0..8 {
        for j in 0..8 {
            let direct = attention_score(&qs[n], &ks[j], &pos[n], &pos[j], &a).unwrap();
            assert_eq!(m.get(n, j), direct);
        }
    }
}

#[test]
fn monte_carlo_agrees_with_closed_form() {
    let grid = DeltaGrid::new(vec![0.0, 37.0, 20000.0], vec![0.0, 11.0], vec![3.0]).unwrap();
    for s in Enc::ALL {
        let a = alloc(s);
        let spec = EnsembleSpec::new(D, 0.3, 1.0, 0.2, 5).unwrap();
        let mc = monte_carlo_profile(&a, &grid, &spec, 20_000, MarginMode::Full).unwrap();
        let cf = closed_form_profile(&a, &grid, 1.0, MarginMode::Full);
        for (m, c) in mc.points.iter().zip(&cf.points) {
            let se = m.std_error.unwrap();
            assert!(
                (m.margin - c.margin).abs() <= 4.5 * se,
                "{s:?} {m:?} vs {}",
                c.margin
            );
        }
    }
}

#[test]
fn temporal_violations_exist_for_rotating_strategies() {
    for s in [Enc::Vanilla, Enc::Mrope, Enc::VideoRope] {
        let found = find_violation(
            &alloc(s),
            1.0,
            0.0,
            0.0,
            EXACT_SCAN_LIMIT,
            MarginMode::TemporalOnly,
        )
        .unwrap();
        assert!(found.is_some(), "{s:?}");
    }
    let hope = find_violation(
        &alloc(Enc::Hope),
        1.0,
        0.0,
        0.0,
        EXACT_SCAN_LIMIT,
        MarginMode::TemporalOnly,
    )
    .unwrap();
    assert_eq!(hope, None);
}

#[test]
fn lowest_frequency_critical_length() {
    let theta = RotaryBase::with_default_base(D).unwrap().theta(63);
    assert!((theta - 1.1547819846894582e-4).abs() < 1e-18);
    assert!((critical_length(theta).unwrap() - 13603.535782694187).abs() < 1e-6);
}

fn niah(l: u64, sigma_delta2: f64) -> NiahConfig {
    let spec = EnsembleSpec::new(32, 0.0, 1.0, sigma_delta2, 3).unwrap();
    NiahConfig {
        trials: 300,
        depths: vec![0.0, 0.5, 1.0],
        ..NiahConfig::new(l, spec)
    }
}

#[test]
fn retrieval_gets_harder_with_more_perturbation() {
    let rates: Vec<Vec<f64>> = [0.05, 1.0, 4.0]
        .iter()
        .map(|&s| {
            run_retrieval(&niah(64, s))
                .unwrap()
                .iter()
                .map(|r| r.success_rate)
                .collect()
        })
        .collect();
    for cell in 0..rates[0].len() {
        for w in rates.windows(2) {
            // three binomial standard errors at n = 300
            assert!(w[1][cell] <= w[0][cell] + 3.0 * (0.25f64 / 300.0).sqrt());
        }
    }
}

#[test]
fn hope_margin_beats_videorope_past_critical_window() {
    let spec = EnsembleSpec::new(D, 0.0, 1.0, 0.1, 11).unwrap();
    let cfg = NiahConfig {
        strategies: vec![Enc::VideoRope, Enc::Hope],
        depths: vec![0.0],
        trials: 1000,
        ..NiahConfig::new(20_000, spec)
    };
    let r = run_retrieval(&cfg).unwrap();
    let pooled = (r[0].margin_se.powi(2) + r[1].margin_se.powi(2)).sqrt();
    assert!(r[1].mean_margin >= r[0].mean_margin - 2.0 * pooled, "{r:?}");
}

#[test]
fn default_sweep_has_72_rows() {
    let spec = EnsembleSpec::new(16, 0.0, 1.0, 0.1, 1).unwrap();
    let cfg = NiahConfig {
        trials: 1,
        ..NiahConfig::new(2, spec)
    };
    assert_eq!(sweep(&cfg, &[256, 1024, 4096]).unwrap().len(), 72);
}
