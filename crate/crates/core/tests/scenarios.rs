//! End-to-end behaviour on synthetic scenes.

use domeseg::discrimination::reference_stats;
use domeseg::extraction::StabilityParams;
use domeseg::smoothing::gradient_magnitude;
use domeseg::{
    extract_maxima_sequence, gen_scene, segment, BinaryMask, ExtractionConfig, PipelineConfig, RefParams,
    SceneSpec, StopCause, ThermalRaster,
};

#[test]
fn slab_profile_runs_thirty_three_steps() {
    // 3.3 °C of total contrast; the warm edge column is the only maximum
    let t_s = ThermalRaster::from_fn(64, 64, |x, _| 20.0 + 3.3 * x as f64 / 63.0).unwrap();
    let (lo, hi) = t_s.min_max().unwrap();
    assert!((hi - lo - 3.3).abs() < 1e-9, "contrast {}", hi - lo);
    let cfg = ExtractionConfig {
        h_in: 0.5,
        delta: 0.1,
        stability: StabilityParams {
            q_threshold: 0.05,
            patience: usize::MAX,
        },
        ..Default::default()
    };
    let seq = extract_maxima_sequence(&t_s, &cfg).unwrap();
    assert_eq!(seq.max_steps, 33);
    assert_eq!(seq.stop, StopCause::MaxSteps);
    assert_eq!(seq.entries.len(), 34);
    assert!(seq.entries.iter().all(|e| !e.regions.is_empty()));
}

#[test]
fn reference_mask_follows_the_planted_boundaries() {
    for spec in [SceneSpec::standard(42), SceneSpec::warm_band(42)] {
        let (raw, truth) = gen_scene(&spec).unwrap();
        let g = gradient_magnitude(&raw, 3.4).unwrap();
        let (_, d_g) = reference_stats(&g, &RefParams::default()).unwrap();
        let boundary = truth.boundary_mask();
        let covered = d_g.intersection_count(&boundary).unwrap() as f64 / boundary.count() as f64;
        assert!(covered >= 0.6, "boundary coverage {covered}");
        // flat top of each plateau blob, inside the raised-cosine edge
        let core = BinaryMask::from_fn(spec.width, spec.height, |x, y| {
            spec.blobs.iter().any(|b| {
                (x as f64 - b.cx).hypot(y as f64 - b.cy) <= b.radius * (1.0 - domeseg::synth::PLATEAU_EDGE)
            })
        })
        .unwrap();
        let inside = d_g.intersection_count(&core).unwrap() as f64 / core.count() as f64;
        assert!(inside <= 0.1, "plateau core overlap {inside}");
    }
}

#[test]
fn report_counts_add_up() {
    let (raw, _) = gen_scene(&SceneSpec::warm_band(42)).unwrap();
    let out = segment(&raw, &PipelineConfig::default()).unwrap();
    let r = &out.report;
    assert!(r.steps.len() <= r.max_steps + 1);
    for s in &r.steps {
        assert_eq!(
            s.accepted + s.undersized + s.rejected_mean + s.rejected_cv + s.too_small,
            s.regions,
            "step {}",
            s.step
        );
    }
    assert_eq!(r.mask_area, out.mask.count());
    assert!(r.stats.is_some());
    assert!(r.mask_area > 0);
}

#[test]
fn excluded_pixels_never_reach_the_mask() {
    let (raw, _) = gen_scene(&SceneSpec::warm_band(42)).unwrap();
    let base = segment(&raw, &PipelineConfig::default()).unwrap();
    // exclude a vertical strip through the right blob
    let strip = BinaryMask::from_fn(256, 256, |x, _| (186..198).contains(&x)).unwrap();
    let mut cfg = PipelineConfig::default();
    cfg.reference.exclusion_mask = Some(strip.clone());
    let out = segment(&raw, &cfg).unwrap();
    assert_eq!(out.mask.intersection_count(&strip).unwrap(), 0);
    assert!(base.mask.intersection_count(&strip).unwrap() > 0);
}

#[test]
fn mismatched_exclusion_mask_is_a_config_error() {
    let raw = ThermalRaster::filled(8, 8, 20.0).unwrap();
    let mut cfg = PipelineConfig::default();
    cfg.reference.exclusion_mask = Some(BinaryMask::from_fn(4, 4, |_, _| false).unwrap());
    assert_eq!(segment(&raw, &cfg).unwrap_err().stage(), Some("config"));
}

#[test]
fn narrower_step_never_shrinks_the_step_limit() {
    let (raw, _) = gen_scene(&SceneSpec::standard(3)).unwrap();
    let mut last = usize::MAX;
    for delta in [0.05, 0.1, 0.15, 0.2, 0.3] {
        let cfg = ExtractionConfig {
            delta,
            ..Default::default()
        };
        let seq = extract_maxima_sequence(&raw, &cfg).unwrap();
        assert!(seq.max_steps <= last);
        last = seq.max_steps;
    }
}
