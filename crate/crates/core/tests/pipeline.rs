use camtrack::metrics::{evaluate, MotSequence};
use camtrack::motion::{estimate_motion, MotionConfig, Technique};
use camtrack::mot::{format_results, parse_results};
use camtrack::synth::{Corruption, SynthParams, SynthScript};
use camtrack::tracker::{run_sequence, Tracker, TrackerConfig};

fn small_params() -> SynthParams {
    SynthParams {
        frames: 30,
        width: 480,
        height: 320,
        num_boxes: 5,
        box_min: 30.0,
        box_max: 60.0,
        pan_x: 4.0,
        pan_y: 1.0,
        zoom: 1.002,
        sway: 4.0,
        sway_period: 20.0,
        corruption: Corruption::NONE,
        layout_seed: 11,
        ..SynthParams::default()
    }
}

#[test]
fn estimated_motion_matches_the_scripted_camera() {
    for technique in [Technique::Affine, Technique::Homography] {
        let script = SynthScript::generate(&SynthParams { frames: 6, pan_x: 12.0, ..small_params() }).unwrap();
        let world = script.world();
        let cfg = MotionConfig { technique, ..MotionConfig::default() };
        for k in 1..6 {
            let prev = world.render(&script, k - 1).unwrap();
            let curr = world.render(&script, k).unwrap();
            let est = estimate_motion(&prev, &curr, &cfg);
            let truth = script.true_motion(k).unwrap();
            let (e, t) = (est.motion.matrix(), truth.matrix());
            assert!((e[(0, 2)] - t[(0, 2)]).abs() < 0.5, "{technique} frame {k}: {e} vs {t}");
            assert!((e[(1, 2)] - t[(1, 2)]).abs() < 0.5, "{technique} frame {k}: {e} vs {t}");
            for (r, c) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                assert!((e[(r, c)] - t[(r, c)]).abs() < 1e-2, "{technique} frame {k}: {e} vs {t}");
            }
        }
    }
}

#[test]
fn clean_synthetic_sequence_keeps_every_identity() {
    let script = SynthScript::generate(&small_params()).unwrap();
    let seq = script.render_sequence().unwrap();
    let cfg = TrackerConfig::default();
    let mut frames = seq.frames.clone();
    let outputs = run_sequence(&mut frames, &seq.detections, &cfg).unwrap();
    let pred = MotSequence::from_outputs(&outputs, seq.gt.len()).unwrap();
    let report = evaluate(&seq.gt, &pred, 0.5).unwrap();
    assert_eq!(report.id_switches, 0);
    assert_eq!(report.fp, 0);
    // only the confirmation window is missed
    assert_eq!(report.fn_, 5 * (cfg.min_hits - 1));
}

#[test]
fn injected_true_motion_costs_only_the_warm_up() {
    let p = SynthParams { frames: 60, ..small_params() };
    let script = SynthScript::generate(&p).unwrap();
    let gt = script.ground_truth().unwrap();
    let dets = script.detections(&gt);
    for min_hits in 1..=4 {
        let cfg = TrackerConfig { min_hits, ..TrackerConfig::default() };
        let mut tracker = Tracker::new(cfg).unwrap();
        let mut outputs = Vec::new();
        for (k, d) in dets.iter().enumerate() {
            let motion = if k == 0 { camtrack::CameraMotion::identity() } else { script.true_motion(k).unwrap() };
            outputs.push(tracker.step_with_motion(&motion, d));
        }
        let pred = MotSequence::from_outputs(&outputs, gt.len()).unwrap();
        let r = evaluate(&gt, &pred, 0.5).unwrap();
        let expected = 1.0 - (5 * (min_hits - 1)) as f64 / gt.total_boxes() as f64;
        assert_eq!(r.id_switches, 0);
        assert_eq!(r.fp, 0);
        assert_eq!(r.fn_, 5 * (min_hits - 1));
        assert!((r.mota - expected).abs() < 1e-12, "min_hits {min_hits}: {} vs {expected}", r.mota);
    }
}

#[test]
fn written_results_evaluate_like_the_in_memory_ones() {
    let script = SynthScript::generate(&SynthParams { frames: 20, ..small_params() }).unwrap();
    let gt = script.ground_truth().unwrap();
    let dets = script.detections(&gt);
    let mut tracker = Tracker::new(TrackerConfig { min_hits: 1, ..TrackerConfig::default() }).unwrap();
    let outputs: Vec<_> = (0..dets.len())
        .map(|k| {
            let m = if k == 0 { camtrack::CameraMotion::identity() } else { script.true_motion(k).unwrap() };
            tracker.step_with_motion(&m, &dets[k])
        })
        .collect();
    let direct = MotSequence::from_outputs(&outputs, gt.len()).unwrap();
    let reread = parse_results(&format_results(&outputs), gt.len()).unwrap();
    let a = evaluate(&gt, &direct, 0.5).unwrap();
    let b = evaluate(&gt, &reread, 0.5).unwrap();
    assert_eq!((a.tp, a.fp, a.fn_, a.id_switches), (b.tp, b.fp, b.fn_, b.id_switches));
    assert!((a.idf1 - b.idf1).abs() < 1e-12);
}
