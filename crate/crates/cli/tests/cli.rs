use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &str = "[synth]
frames = 15
width = 320
height = 240
boxes = 3
box_min = 30
box_max = 50
pan_x = 2
zoom = 1.001
sway = 2
jitter = 0
drop = 0
";

fn camtrack(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_camtrack")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let cfg = dir.join("small.ini");
    fs::write(&cfg, SMALL).unwrap();
    let out = dir.join(name);
    let mut args = vec!["synth", "--config", p(&cfg), "--out", p(&out)];
    args.extend_from_slice(extra);
    let o = camtrack(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

fn metric(report: &str, key: &str) -> f64 {
    report
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("{key} missing from\n{report}"))
        .parse()
        .unwrap()
}

#[test]
fn synth_output_is_a_valid_deterministic_sequence() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth(dir.path(), "a", &[]);
    let b = synth(dir.path(), "b", &[]);
    assert!(camtrack::mot::SequenceLayout::open(&a).is_ok());
    for file in ["gt/gt.txt", "det/det.txt", "seqinfo.ini", "img1/000001.pgm", "img1/000015.pgm"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }
}

#[test]
fn synth_seed_changes_detections_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("jitter.ini");
    fs::write(&cfg, SMALL.replace("jitter = 0", "jitter = 2")).unwrap();
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let o = camtrack(&["synth", "-c", p(&cfg), "-o", p(&out), "--seed", seed]);
        assert!(o.status.success(), "{}", stderr(&o));
        out
    };
    let (a, b) = (run("a", "1"), run("b", "2"));
    assert_eq!(fs::read(a.join("gt/gt.txt")).unwrap(), fs::read(b.join("gt/gt.txt")).unwrap());
    assert_ne!(fs::read(a.join("det/det.txt")).unwrap(), fs::read(b.join("det/det.txt")).unwrap());
}

#[test]
fn clean_sequence_is_tracked_with_every_identity() {
    let dir = tempfile::tempdir().unwrap();
    let seq = synth(dir.path(), "seq", &[]);
    let res = dir.path().join("res.txt");
    let o = camtrack(&["track", p(&seq), "--out", p(&res), "--min-hits", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = stdout(&o);
    for stage in ["decode", "motion", "predict", "associate", "update", "fps"] {
        assert!(report.contains(stage), "{report}");
    }
    let o = camtrack(&["eval", "--gt", p(&seq.join("gt/gt.txt")), "--result", p(&res)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = stdout(&o);
    assert_eq!(metric(&report, "IDF1"), 1.0, "{report}");
    assert_eq!(metric(&report, "IDs"), 0.0);
}

#[test]
fn empty_detections_give_an_empty_result() {
    let dir = tempfile::tempdir().unwrap();
    let seq = synth(dir.path(), "seq", &[]);
    fs::write(seq.join("det/det.txt"), "").unwrap();
    let res = dir.path().join("res.txt");
    let o = camtrack(&["track", p(&seq), "--out", p(&res)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(&res).unwrap(), "");
}

#[test]
fn input_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let seq = synth(dir.path(), "seq", &[]);
    let res = dir.path().join("res.txt");
    fs::write(seq.join("det/det.txt"), "1,-1,10,10,20,20,0.9,-1,-1,-1\n0,-1,10,10,20,20,0.9,-1,-1,-1\n").unwrap();
    let o = camtrack(&["track", p(&seq), "--out", p(&res)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("det.txt:2:"), "{}", stderr(&o));

    fs::remove_file(seq.join("img1/000007.pgm")).unwrap();
    let o = camtrack(&["track", p(&seq), "--out", p(&res)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("frame 7"), "{}", stderr(&o));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let seq = synth(dir.path(), "seq", &[]);
    let res = dir.path().join("res.txt");
    let bad = dir.path().join("bad.ini");
    fs::write(&bad, "[tracker]\nmax_age = soon\n").unwrap();
    let o = camtrack(&["track", p(&seq), "--out", p(&res), "--config", p(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("max_age"), "{}", stderr(&o));
    let o = camtrack(&["track", p(&seq), "--out", p(&res), "--iou-threshold", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn ground_truth_scores_perfectly_against_itself() {
    let dir = tempfile::tempdir().unwrap();
    let seq = synth(dir.path(), "seq", &[]);
    let gt = seq.join("gt/gt.txt");
    let o = camtrack(&["eval", "--gt", p(&gt), "--result", p(&gt)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = stdout(&o);
    for key in ["MOTA", "IDF1", "HOTA"] {
        assert_eq!(metric(&report, key), 1.0, "{report}");
    }
    assert!(report.lines().next().unwrap().contains("MOTA"));
}

#[test]
fn eval_scores_the_common_frames_and_warns() {
    let dir = tempfile::tempdir().unwrap();
    let seq = synth(dir.path(), "seq", &[]);
    let gt = fs::read_to_string(seq.join("gt/gt.txt")).unwrap();
    let short: String = gt.lines().filter(|l| l.split(',').next().unwrap().parse::<usize>().unwrap() <= 10).map(|l| format!("{l}\n")).collect();
    let res = dir.path().join("short.txt");
    fs::write(&res, &short).unwrap();
    let o = camtrack(&["eval", "--gt", p(&seq.join("gt/gt.txt")), "--result", p(&res)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(metric(&stdout(&o), "MOTA"), 1.0);
    assert!(stderr(&o).contains("1..=10"), "{}", stderr(&o));

    let o = camtrack(&["eval", "--gt", p(&res), "--result", p(&seq.join("nothing.txt"))]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bench_reports_both_techniques() {
    let dir = tempfile::tempdir().unwrap();
    let seq = synth(dir.path(), "seq", &[]);
    let o = camtrack(&["bench", p(&seq), "--repeats", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = stdout(&o);
    assert!(report.contains("affine (15 frames x 1 repeats)"), "{report}");
    assert!(report.contains("homography"), "{report}");
    assert!(report.contains("median_ms"));
}
