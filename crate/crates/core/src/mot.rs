//! MOTChallenge text formats and sequence directory layout.
//!
//! Frames are 1-based in files and 0-based everywhere else; the conversion
//! happens only in this module.
//!
//! ```text
//! det.txt     frame,-1,left,top,width,height,conf,-1,-1,-1
//! gt.txt      frame,id,left,top,width,height,flag,class,visibility
//! result.txt  frame,id,left,top,width,height,conf,-1,-1,-1
//! ```

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use ini::Ini;
use thiserror::Error;

use crate::geometry::BBox;
use crate::imaging::list_frames;
use crate::metrics::{MetricsError, MotSequence};
use crate::tracker::{Detection, FrameOutput};

#[derive(Debug, Error)]
pub enum MotError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Layout(String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl MotError {
    fn parse(line: usize, message: impl Into<String>) -> Self {
        MotError::Parse { line, message: message.into() }
    }

    /// Prefixes parse errors with the file they came from.
    pub fn in_file(self, path: &Path) -> Self {
        match self {
            MotError::Parse { line, message } => MotError::Layout(format!("{}:{line}: {message}", path.display())),
            other => other,
        }
    }
}

fn read(path: &Path) -> Result<String, MotError> {
    fs::read_to_string(path).map_err(|source| MotError::Io { path: path.to_path_buf(), source })
}

fn write(path: &Path, contents: &[u8]) -> Result<(), MotError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| MotError::Io { path: dir.to_path_buf(), source })?;
    }
    fs::write(path, contents).map_err(|source| MotError::Io { path: path.to_path_buf(), source })
}

/// One parsed line: 0-based frame, id, box and the seventh column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotRecord {
    /// 1-based line number in the source text.
    pub line: usize,
    pub frame: usize,
    pub id: i64,
    pub bbox: BBox,
    pub score: f64,
}

/// Parses every non-blank line; at least the first six columns are required.
pub fn parse_records(text: &str) -> Result<Vec<MotRecord>, MotError> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() < 6 {
            return Err(MotError::parse(line, format!("expected at least 6 comma-separated fields, found {}", fields.len())));
        }
        let num = |i: usize, name: &str| -> Result<f64, MotError> {
            let v: f64 = fields[i]
                .parse()
                .map_err(|_| MotError::parse(line, format!("{name} {:?} is not a number", fields[i])))?;
            if !v.is_finite() {
                return Err(MotError::parse(line, format!("{name} is not finite")));
            }
            Ok(v)
        };
        let frame = num(0, "frame")?;
        if frame.fract() != 0.0 || frame < 1.0 {
            return Err(MotError::parse(line, format!("frame {} must be a positive integer (frames are 1-based)", fields[0])));
        }
        let id = num(1, "id")?;
        if id.fract() != 0.0 {
            return Err(MotError::parse(line, format!("id {} is not an integer", fields[1])));
        }
        let (left, top, w, h) = (num(2, "left")?, num(3, "top")?, num(4, "width")?, num(5, "height")?);
        let bbox = BBox::from_ltwh(left, top, w, h).map_err(|e| MotError::parse(line, e.to_string()))?;
        let score = if fields.len() > 6 { num(6, "confidence")? } else { 1.0 };
        out.push(MotRecord { line, frame: frame as usize - 1, id: id as i64, bbox, score });
    }
    Ok(out)
}

/// Per-frame detections; the result has at least `min_frames` entries.
pub fn parse_detections(text: &str, min_frames: usize) -> Result<Vec<Vec<Detection>>, MotError> {
    let records = parse_records(text)?;
    let len = records.iter().map(|r| r.frame + 1).max().unwrap_or(0).max(min_frames);
    let mut frames = vec![Vec::new(); len];
    for r in &records {
        if !(0.0..=1.0).contains(&r.score) {
            return Err(MotError::parse(r.line, format!("confidence {} outside [0, 1]", r.score)));
        }
        frames[r.frame].push(Detection::new(r.bbox, r.score));
    }
    Ok(frames)
}

/// Ground truth; lines whose seventh column is 0 are marked as ignored and dropped.
pub fn parse_ground_truth(text: &str, min_frames: usize) -> Result<MotSequence, MotError> {
    let records: Vec<MotRecord> = parse_records(text)?.into_iter().filter(|r| r.score != 0.0).collect();
    records_to_sequence(&records, min_frames)
}

/// Tracker output in the result format.
pub fn parse_results(text: &str, min_frames: usize) -> Result<MotSequence, MotError> {
    let records = parse_records(text)?;
    records_to_sequence(&records, min_frames)
}

fn records_to_sequence(records: &[MotRecord], min_frames: usize) -> Result<MotSequence, MotError> {
    let len = records.iter().map(|r| r.frame + 1).max().unwrap_or(0).max(min_frames);
    let mut frames = vec![Vec::new(); len];
    for r in records {
        if r.id < 0 {
            return Err(MotError::parse(r.line, format!("negative id {}", r.id)));
        }
        frames[r.frame].push((r.id as u64, r.bbox));
    }
    Ok(MotSequence::new(frames)?)
}

fn fmt2(v: f64) -> String {
    let s = format!("{v:.2}");
    // avoid "-0.00"
    if s == "-0.00" {
        "0.00".to_string()
    } else {
        s
    }
}

/// Serialises tracker output, one line per reported box.
pub fn format_results(outputs: &[FrameOutput]) -> String {
    let mut s = String::new();
    for out in outputs {
        for e in &out.entries {
            let [l, t, w, h] = e.bbox.to_ltwh();
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},-1,-1,-1",
                out.frame_index + 1,
                e.id,
                fmt2(l),
                fmt2(t),
                fmt2(w),
                fmt2(h),
                fmt2(e.confidence)
            );
        }
    }
    s
}

pub fn write_results(path: &Path, outputs: &[FrameOutput]) -> Result<(), MotError> {
    write(path, format_results(outputs).as_bytes())
}

/// Ground truth in gt.txt form (flag 1, class 1, visibility 1).
pub fn format_ground_truth(seq: &MotSequence) -> String {
    let mut s = String::new();
    for (k, frame) in seq.frames().iter().enumerate() {
        for (id, b) in frame {
            let [l, t, w, h] = b.to_ltwh();
            let _ = writeln!(s, "{},{},{},{},{},{},1,1,1", k + 1, id, fmt2(l), fmt2(t), fmt2(w), fmt2(h));
        }
    }
    s
}

pub fn format_detections(dets: &[Vec<Detection>]) -> String {
    let mut s = String::new();
    for (k, frame) in dets.iter().enumerate() {
        for d in frame {
            let [l, t, w, h] = d.bbox.to_ltwh();
            let _ = writeln!(
                s,
                "{},-1,{},{},{},{},{},-1,-1,-1",
                k + 1,
                fmt2(l),
                fmt2(t),
                fmt2(w),
                fmt2(h),
                fmt2(d.confidence)
            );
        }
    }
    s
}

/// Contents of `seqinfo.ini`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeqInfo {
    pub name: String,
    pub im_dir: String,
    pub frame_rate: f64,
    pub seq_length: usize,
    pub im_width: usize,
    pub im_height: usize,
    pub im_ext: String,
}

impl SeqInfo {
    pub fn parse(text: &str) -> Result<Self, MotError> {
        let ini = Ini::load_from_str(text).map_err(|e| MotError::Layout(format!("seqinfo.ini: {e}")))?;
        let sec = ini
            .section(Some("Sequence"))
            .ok_or_else(|| MotError::Layout("seqinfo.ini: missing [Sequence] section".into()))?;
        let get = |k: &str| sec.get(k).ok_or_else(|| MotError::Layout(format!("seqinfo.ini: missing {k}")));
        let num = |k: &str| -> Result<f64, MotError> {
            get(k)?.trim().parse().map_err(|_| MotError::Layout(format!("seqinfo.ini: {k} is not a number")))
        };
        let count = |k: &str| -> Result<usize, MotError> {
            get(k)?.trim().parse().map_err(|_| MotError::Layout(format!("seqinfo.ini: {k} is not a count")))
        };
        let info = SeqInfo {
            name: get("name")?.trim().to_string(),
            im_dir: sec.get("imDir").unwrap_or("img1").trim().to_string(),
            frame_rate: num("frameRate")?,
            seq_length: count("seqLength")?,
            im_width: count("imWidth")?,
            im_height: count("imHeight")?,
            im_ext: sec.get("imExt").unwrap_or(".pgm").trim().to_string(),
        };
        if !(info.frame_rate > 0.0 && info.frame_rate.is_finite()) {
            return Err(MotError::Layout(format!("seqinfo.ini: frameRate must be positive, got {}", info.frame_rate)));
        }
        Ok(info)
    }

    pub fn to_ini_string(&self) -> String {
        format!(
            "[Sequence]\nname={}\nimDir={}\nframeRate={}\nseqLength={}\nimWidth={}\nimHeight={}\nimExt={}\n",
            self.name, self.im_dir, self.frame_rate, self.seq_length, self.im_width, self.im_height, self.im_ext
        )
    }
}

/// A sequence directory: `img1/`, `det/det.txt`, optional `gt/gt.txt`, `seqinfo.ini`.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceLayout {
    pub root: PathBuf,
    pub info: SeqInfo,
    /// Frame files for frames 1..=seq_length, in order.
    pub frames: Vec<PathBuf>,
}

impl SequenceLayout {
    pub fn open(root: impl AsRef<Path>) -> Result<Self, MotError> {
        let root = root.as_ref().to_path_buf();
        let info = SeqInfo::parse(&read(&root.join("seqinfo.ini"))?)?;
        let img_dir = root.join(&info.im_dir);
        let listed = list_frames(&img_dir).map_err(|e| MotError::Layout(e.to_string()))?;
        let mut frames = Vec::with_capacity(info.seq_length);
        for (expect, (number, path)) in (1..=info.seq_length as u64).zip(&listed) {
            if *number != expect {
                return Err(MotError::Layout(format!("{}: missing frame {expect}", img_dir.display())));
            }
            frames.push(path.clone());
        }
        if frames.len() < info.seq_length {
            return Err(MotError::Layout(format!(
                "{}: expected {} frames, found {}",
                img_dir.display(),
                info.seq_length,
                frames.len()
            )));
        }
        if !root.join("det").join("det.txt").is_file() {
            return Err(MotError::Layout(format!("{}: missing det/det.txt", root.display())));
        }
        Ok(SequenceLayout { root, info, frames })
    }

    pub fn det_path(&self) -> PathBuf {
        self.root.join("det").join("det.txt")
    }

    pub fn gt_path(&self) -> PathBuf {
        self.root.join("gt").join("gt.txt")
    }

    /// Detections padded to the sequence length; lines beyond it are an error.
    pub fn load_detections(&self) -> Result<Vec<Vec<Detection>>, MotError> {
        let path = self.det_path();
        let dets = parse_detections(&read(&path)?, self.info.seq_length).map_err(|e| e.in_file(&path))?;
        if dets.len() > self.info.seq_length {
            return Err(MotError::Layout(format!(
                "{}: detections reference frame {} but the sequence has {} frames",
                path.display(),
                dets.len(),
                self.info.seq_length
            )));
        }
        Ok(dets)
    }

    pub fn load_ground_truth(&self) -> Result<Option<MotSequence>, MotError> {
        let path = self.gt_path();
        if !path.is_file() {
            return Ok(None);
        }
        let gt = parse_ground_truth(&read(&path)?, self.info.seq_length).map_err(|e| e.in_file(&path))?;
        Ok(Some(gt))
    }
}

pub fn read_ground_truth(path: &Path) -> Result<MotSequence, MotError> {
    parse_ground_truth(&read(path)?, 0).map_err(|e| e.in_file(path))
}

pub fn read_results(path: &Path) -> Result<MotSequence, MotError> {
    parse_results(&read(path)?, 0).map_err(|e| e.in_file(path))
}

/// Writes a text file, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<(), MotError> {
    write(path, text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracker::OutputEntry;

    #[test]
    fn parses_detection_lines() {
        let text = "1,-1,10,20,30,40,0.9,-1,-1,-1\n\n3,-1,0,0,5,5,0.5,-1,-1,-1\n";
        let dets = parse_detections(text, 0).unwrap();
        assert_eq!(dets.len(), 3);
        assert_eq!(dets[0][0].bbox, BBox::new(25.0, 40.0, 30.0, 40.0).unwrap());
        assert!(dets[1].is_empty());
        assert_eq!(dets[2][0].confidence, 0.5);
        assert_eq!(parse_detections("", 5).unwrap().len(), 5);
    }

    #[test]
    fn frame_zero_is_rejected_with_line_number() {
        let err = parse_detections("1,-1,0,0,5,5,0.5\n0,-1,0,0,5,5,0.5\n", 0).unwrap_err();
        match err {
            MotError::Parse { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains("1-based"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_lines_report_their_number() {
        for (text, bad_line) in [
            ("1,-1,0,0,5,5,0.5\n1,-1,zero,0,5,5,0.5\n", 2),
            ("1,-1,0,0\n", 1),
            ("1,-1,0,0,5,5,0.5\n\n1,-1,0,0,-5,5,0.5\n", 3),
            ("1,-1,0,0,5,5,1.5\n", 1),
        ] {
            match parse_detections(text, 0) {
                Err(MotError::Parse { line, .. }) => assert_eq!(line, bad_line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn ground_truth_drops_ignored_lines() {
        let gt = parse_ground_truth("1,1,0,0,10,10,1,1,1\n1,2,50,0,10,10,0,1,1\n2,1,1,0,10,10,1,1,1\n", 0).unwrap();
        assert_eq!(gt.len(), 2);
        assert_eq!(gt.frame(0).len(), 1);
        assert_eq!(gt.ids(), vec![1]);
    }

    #[test]
    fn duplicate_ids_are_an_input_error() {
        assert!(parse_results("1,4,0,0,10,10,1\n1,4,20,0,10,10,1\n", 0).is_err());
    }

    #[test]
    fn results_round_trip() {
        let outputs = vec![
            FrameOutput { frame_index: 0, entries: vec![] },
            FrameOutput {
                frame_index: 1,
                entries: vec![
                    OutputEntry { id: 3, bbox: BBox::from_ltwh(10.004, 20.5, 30.0, 40.25).unwrap(), confidence: 0.875 },
                    OutputEntry { id: 7, bbox: BBox::from_ltwh(-0.001, 0.0, 8.0, 9.0).unwrap(), confidence: 1.0 },
                ],
            },
        ];
        let text = format_results(&outputs);
        assert_eq!(text, "2,3,10.00,20.50,30.00,40.25,0.88,-1,-1,-1\n2,7,0.00,0.00,8.00,9.00,1.00,-1,-1,-1\n");
        let back = parse_results(&text, 2).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back.frame(1)[0].0, 3);
        assert_eq!(back.frame(1)[0].1.to_ltwh(), [10.0, 20.5, 30.0, 40.25]);
    }

    #[test]
    fn seqinfo_round_trip() {
        let info = SeqInfo {
            name: "synthetic".into(),
            im_dir: "img1".into(),
            frame_rate: 30.0,
            seq_length: 100,
            im_width: 1280,
            im_height: 720,
            im_ext: ".pgm".into(),
        };
        assert_eq!(SeqInfo::parse(&info.to_ini_string()).unwrap(), info);
        let bad = info.to_ini_string().replace("frameRate=30", "frameRate=0");
        assert!(SeqInfo::parse(&bad).is_err());
    }

    #[test]
    fn layout_validation() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        let info = SeqInfo {
            name: "s".into(),
            im_dir: "img1".into(),
            frame_rate: 10.0,
            seq_length: 2,
            im_width: 16,
            im_height: 16,
            im_ext: ".pgm".into(),
        };
        write_text(&root.join("seqinfo.ini"), &info.to_ini_string()).unwrap();
        write_text(&root.join("det/det.txt"), "").unwrap();
        let f = crate::imaging::GrayFrame::filled(16, 16, 9).unwrap();
        std::fs::create_dir_all(root.join("img1")).unwrap();
        crate::imaging::save_pgm(&f, root.join("img1/000001.pgm")).unwrap();
        assert!(SequenceLayout::open(root).is_err());
        crate::imaging::save_pgm(&f, root.join("img1/000002.pgm")).unwrap();
        let layout = SequenceLayout::open(root).unwrap();
        assert_eq!(layout.frames.len(), 2);
        assert_eq!(layout.load_detections().unwrap().len(), 2);
        assert!(layout.load_ground_truth().unwrap().is_none());

        write_text(&root.join("det/det.txt"), "3,-1,0,0,4,4,0.9\n").unwrap();
        assert!(layout.load_detections().is_err());
    }
}
