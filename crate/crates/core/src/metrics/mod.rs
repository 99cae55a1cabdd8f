//! Multi-object tracking metrics: CLEAR-MOT, identity (IDF1) and HOTA.
//!
//! Matching conventions follow the MOTChallenge evaluation toolkit. Per frame,
//! ground truth and predictions are paired by IoU with the Hungarian solver;
//! CLEAR prefers pairs that continue the previous frame's association, HOTA
//! weights IoU by a global id-alignment score, and IDF1 solves a single
//! sequence-wide id-to-id assignment.

mod clear;
mod hota;
mod identity;

use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

use crate::geometry::BBox;
use crate::tracker::FrameOutput;

pub use clear::{compute_mota, match_frame, mt_ml, ClearMatcher, ClearStats, FrameMatch};
pub use hota::{compute_hota, HotaResult, ALPHAS};
pub use identity::{compute_idf1, IdentityStats};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("frame {frame}: id {id} appears more than once")]
    DuplicateId { frame: usize, id: u64 },
    #[error("ground truth contains no boxes; metrics are undefined")]
    NoGroundTruth,
    #[error("sequence lengths differ: {gt} ground-truth frames vs {pred} predicted frames")]
    LengthMismatch { gt: usize, pred: usize },
}

/// Per-frame `(id, box)` lists, frames indexed from 0.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MotSequence {
    frames: Vec<Vec<(u64, BBox)>>,
}

/// Ground truth uses the same representation as tracker output.
pub type GtSequence = MotSequence;

impl MotSequence {
    pub fn new(frames: Vec<Vec<(u64, BBox)>>) -> Result<Self, MetricsError> {
        for (frame, objs) in frames.iter().enumerate() {
            let mut seen = HashSet::with_capacity(objs.len());
            for &(id, _) in objs {
                if !seen.insert(id) {
                    return Err(MetricsError::DuplicateId { frame, id });
                }
            }
        }
        Ok(MotSequence { frames })
    }

    /// Tracker output as a sequence of `num_frames` frames.
    pub fn from_outputs(outputs: &[FrameOutput], num_frames: usize) -> Result<Self, MetricsError> {
        let mut frames = vec![Vec::new(); num_frames];
        for out in outputs.iter().filter(|o| o.frame_index < num_frames) {
            frames[out.frame_index].extend(out.entries.iter().map(|e| (e.id, e.bbox)));
        }
        Self::new(frames)
    }

    pub fn frames(&self) -> &[Vec<(u64, BBox)>] {
        &self.frames
    }

    pub fn frame(&self, k: usize) -> &[(u64, BBox)] {
        &self.frames[k]
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn total_boxes(&self) -> usize {
        self.frames.iter().map(Vec::len).sum()
    }

    /// Distinct ids in ascending order.
    pub fn ids(&self) -> Vec<u64> {
        let mut ids: Vec<u64> = self.frames.iter().flatten().map(|&(id, _)| id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Keeps the first `n` frames, padding with empty frames if shorter.
    pub fn resized(&self, n: usize) -> Self {
        let mut frames = self.frames.clone();
        frames.resize(n, Vec::new());
        MotSequence { frames }
    }
}

/// Dense relabelling of ids to `0..n` plus per-frame IoU matrices.
pub(crate) struct Prepared {
    pub num_gt_ids: usize,
    pub num_pred_ids: usize,
    pub gt_ids: Vec<Vec<usize>>,
    pub pred_ids: Vec<Vec<usize>>,
    /// Row-major `gt x pred` IoU per frame.
    pub similarity: Vec<Vec<f64>>,
    pub gt_dets: usize,
    pub pred_dets: usize,
}

impl Prepared {
    pub fn new(gt: &MotSequence, pred: &MotSequence) -> Result<Self, MetricsError> {
        if gt.len() != pred.len() {
            return Err(MetricsError::LengthMismatch { gt: gt.len(), pred: pred.len() });
        }
        let dense = |seq: &MotSequence| {
            let ids = seq.ids();
            let frames: Vec<Vec<usize>> = seq
                .frames
                .iter()
                .map(|f| f.iter().map(|(id, _)| ids.binary_search(id).unwrap()).collect())
                .collect();
            (ids.len(), frames)
        };
        let (num_gt_ids, gt_ids) = dense(gt);
        let (num_pred_ids, pred_ids) = dense(pred);
        let similarity = gt
            .frames
            .iter()
            .zip(&pred.frames)
            .map(|(g, p)| {
                let mut m = Vec::with_capacity(g.len() * p.len());
                for (_, gb) in g {
                    for (_, pb) in p {
                        m.push(gb.iou(pb));
                    }
                }
                m
            })
            .collect();
        Ok(Prepared {
            num_gt_ids,
            num_pred_ids,
            gt_ids,
            pred_ids,
            similarity,
            gt_dets: gt.total_boxes(),
            pred_dets: pred.total_boxes(),
        })
    }
}

/// Everything the evaluator reports for one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub mota: f64,
    pub motp: f64,
    pub idf1: f64,
    pub idp: f64,
    pub idr: f64,
    pub hota: f64,
    pub deta: f64,
    pub assa: f64,
    pub loca: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub id_switches: usize,
    pub fragmentations: usize,
    pub mostly_tracked: usize,
    pub partially_tracked: usize,
    pub mostly_lost: usize,
    pub idtp: usize,
    pub idfp: usize,
    pub idfn: usize,
    pub gt_ids: usize,
    pub gt_boxes: usize,
    pub pred_boxes: usize,
    pub per_frame_tp: Vec<usize>,
    pub per_frame_fp: Vec<usize>,
    pub per_frame_fn: Vec<usize>,
}

/// Scores `pred` against `gt`; both must cover the same frames.
pub fn evaluate(gt: &GtSequence, pred: &MotSequence, iou_min: f64) -> Result<MetricsReport, MetricsError> {
    let clear = compute_mota(gt, pred, iou_min)?;
    let id = compute_idf1(gt, pred, iou_min)?;
    let hota = compute_hota(gt, pred)?;
    Ok(MetricsReport {
        mota: clear.mota,
        motp: clear.motp,
        idf1: id.idf1,
        idp: id.idp,
        idr: id.idr,
        hota: hota.hota,
        deta: hota.deta,
        assa: hota.assa,
        loca: hota.loca,
        tp: clear.tp,
        fp: clear.fp,
        fn_: clear.fn_,
        id_switches: clear.id_switches,
        fragmentations: clear.fragmentations,
        mostly_tracked: clear.mostly_tracked,
        partially_tracked: clear.partially_tracked,
        mostly_lost: clear.mostly_lost,
        idtp: id.idtp,
        idfp: id.idfp,
        idfn: id.idfn,
        gt_ids: gt.ids().len(),
        gt_boxes: gt.total_boxes(),
        pred_boxes: pred.total_boxes(),
        per_frame_tp: clear.per_frame_tp,
        per_frame_fp: clear.per_frame_fp,
        per_frame_fn: clear.per_frame_fn,
    })
}

impl MetricsReport {
    /// `name=value` lines, one metric per line.
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.scalar_fields() {
            s.push_str(&format!("{k}={v}\n"));
        }
        s
    }

    fn scalar_fields(&self) -> Vec<(&'static str, String)> {
        let f = |v: f64| format!("{v:.6}");
        vec![
            ("MOTA", f(self.mota)),
            ("IDF1", f(self.idf1)),
            ("HOTA", f(self.hota)),
            ("DetA", f(self.deta)),
            ("AssA", f(self.assa)),
            ("LocA", f(self.loca)),
            ("MOTP", f(self.motp)),
            ("IDP", f(self.idp)),
            ("IDR", f(self.idr)),
            ("TP", self.tp.to_string()),
            ("FP", self.fp.to_string()),
            ("FN", self.fn_.to_string()),
            ("IDs", self.id_switches.to_string()),
            ("Frag", self.fragmentations.to_string()),
            ("MT", self.mostly_tracked.to_string()),
            ("PT", self.partially_tracked.to_string()),
            ("ML", self.mostly_lost.to_string()),
            ("IDTP", self.idtp.to_string()),
            ("IDFP", self.idfp.to_string()),
            ("IDFN", self.idfn.to_string()),
            ("GT_IDs", self.gt_ids.to_string()),
            ("GT_Dets", self.gt_boxes.to_string()),
            ("Pred_Dets", self.pred_boxes.to_string()),
        ]
    }
}

impl fmt::Display for MetricsReport {
    /// Table with the usual column set: accuracy scores as percentages, then counts.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pct = |v: f64| format!("{:.2}", 100.0 * v);
        let cols = [
            ("MOTA", pct(self.mota)),
            ("IDF1", pct(self.idf1)),
            ("HOTA", pct(self.hota)),
            ("DetA", pct(self.deta)),
            ("AssA", pct(self.assa)),
            ("FP", self.fp.to_string()),
            ("FN", self.fn_.to_string()),
            ("IDs", self.id_switches.to_string()),
            ("MT", self.mostly_tracked.to_string()),
            ("ML", self.mostly_lost.to_string()),
        ];
        let widths: Vec<usize> = cols.iter().map(|(h, v)| h.len().max(v.len())).collect();
        let header: Vec<String> = cols.iter().zip(&widths).map(|((h, _), w)| format!("{h:>w$}")).collect();
        let values: Vec<String> = cols.iter().zip(&widths).map(|((_, v), w)| format!("{v:>w$}")).collect();
        writeln!(f, "{}", header.join("  "))?;
        write!(f, "{}", values.join("  "))
    }
}
