//! CLEAR-MOT: MOTA, MOTP, id switches, fragmentations, MT/PT/ML.

use std::collections::HashMap;

use crate::association::{linear_sum_assignment, CostMatrix};
use crate::geometry::BBox;

use super::{MetricsError, MotSequence, Prepared};

/// Bonus that makes continuing last frame's pairing dominate any IoU gain.
const CONTINUATION_BONUS: f64 = 1000.0;

/// Outcome of matching one frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameMatch {
    /// `(gt_id, pred_id)` pairs.
    pub pairs: Vec<(u64, u64)>,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    /// Ground-truth ids whose matched prediction differs from their previous one.
    pub switched: Vec<u64>,
    pub iou_sum: f64,
}

/// Frame-by-frame CLEAR matcher carrying the association history.
#[derive(Debug, Clone)]
pub struct ClearMatcher {
    iou_min: f64,
    /// Pairing in the last frame that had both ground truth and predictions.
    previous_frame: HashMap<u64, u64>,
    /// Most recent prediction matched to each ground-truth id, any frame back.
    last_match: HashMap<u64, u64>,
}

impl ClearMatcher {
    pub fn new(iou_min: f64) -> Self {
        ClearMatcher { iou_min, previous_frame: HashMap::new(), last_match: HashMap::new() }
    }

    pub fn match_frame(&mut self, gt: &[(u64, BBox)], pred: &[(u64, BBox)]) -> FrameMatch {
        let iou = |i: usize, j: usize| gt[i].1.iou(&pred[j].1);
        self.match_with(gt.iter().map(|g| g.0).collect(), pred.iter().map(|p| p.0).collect(), iou)
    }

    fn match_with(&mut self, gt_ids: Vec<u64>, pred_ids: Vec<u64>, iou: impl Fn(usize, usize) -> f64) -> FrameMatch {
        if gt_ids.is_empty() || pred_ids.is_empty() {
            // history is deliberately left untouched on such frames
            return FrameMatch { fp: pred_ids.len(), fn_: gt_ids.len(), ..FrameMatch::default() };
        }
        let sim = CostMatrix::from_fn(gt_ids.len(), pred_ids.len(), &iou);
        let score = CostMatrix::from_fn(gt_ids.len(), pred_ids.len(), |i, j| {
            let s = sim.get(i, j);
            if s < self.iou_min - f64::EPSILON {
                return 0.0;
            }
            let continues = self.previous_frame.get(&gt_ids[i]) == Some(&pred_ids[j]);
            if continues {
                CONTINUATION_BONUS + s
            } else {
                s
            }
        });
        let negated = CostMatrix::from_fn(score.rows(), score.cols(), |i, j| -score.get(i, j));

        let mut out = FrameMatch::default();
        self.previous_frame.clear();
        for (i, j) in linear_sum_assignment(&negated) {
            if score.get(i, j) <= f64::EPSILON {
                continue;
            }
            let (g, p) = (gt_ids[i], pred_ids[j]);
            if let Some(&before) = self.last_match.get(&g) {
                if before != p {
                    out.switched.push(g);
                }
            }
            self.last_match.insert(g, p);
            self.previous_frame.insert(g, p);
            out.pairs.push((g, p));
            out.iou_sum += sim.get(i, j);
        }
        out.tp = out.pairs.len();
        out.fn_ = gt_ids.len() - out.tp;
        out.fp = pred_ids.len() - out.tp;
        out
    }
}

/// Matches one frame given the previous frame's pairing.
///
/// Standalone form of [`ClearMatcher::match_frame`] for a single step: `previous`
/// maps ground-truth ids to the prediction ids they were matched to before.
pub fn match_frame(
    gt: &[(u64, BBox)],
    pred: &[(u64, BBox)],
    iou_min: f64,
    previous: &HashMap<u64, u64>,
) -> FrameMatch {
    let mut m = ClearMatcher { iou_min, previous_frame: previous.clone(), last_match: previous.clone() };
    m.match_frame(gt, pred)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClearStats {
    pub mota: f64,
    pub motp: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub id_switches: usize,
    pub fragmentations: usize,
    pub mostly_tracked: usize,
    pub partially_tracked: usize,
    pub mostly_lost: usize,
    pub per_frame_tp: Vec<usize>,
    pub per_frame_fp: Vec<usize>,
    pub per_frame_fn: Vec<usize>,
}

/// Mostly tracked: matched in at least 80% of its frames; mostly lost: at most 20%.
pub fn mt_ml(matched: usize, present: usize) -> (bool, bool) {
    (5 * matched >= 4 * present, 5 * matched <= present)
}

pub fn compute_mota(gt: &MotSequence, pred: &MotSequence, iou_min: f64) -> Result<ClearStats, MetricsError> {
    let data = Prepared::new(gt, pred)?;
    if data.gt_dets == 0 {
        return Err(MetricsError::NoGroundTruth);
    }
    let n = gt.len();
    let mut stats = ClearStats {
        mota: 0.0,
        motp: 0.0,
        tp: 0,
        fp: 0,
        fn_: 0,
        id_switches: 0,
        fragmentations: 0,
        mostly_tracked: 0,
        partially_tracked: 0,
        mostly_lost: 0,
        per_frame_tp: vec![0; n],
        per_frame_fp: vec![0; n],
        per_frame_fn: vec![0; n],
    };
    let mut present = vec![0usize; data.num_gt_ids];
    let mut matched = vec![0usize; data.num_gt_ids];
    let mut tracked_spans = vec![0usize; data.num_gt_ids];
    let mut tracked_last_frame = vec![false; data.num_gt_ids];
    let mut iou_sum = 0.0;

    let mut matcher = ClearMatcher::new(iou_min);
    for k in 0..n {
        let gt_ids = &data.gt_ids[k];
        let pred_ids = &data.pred_ids[k];
        let cols = pred_ids.len();
        let sim = &data.similarity[k];
        let m = matcher.match_with(
            gt_ids.iter().map(|&i| i as u64).collect(),
            pred_ids.iter().map(|&i| i as u64).collect(),
            |i, j| sim[i * cols + j],
        );
        stats.per_frame_tp[k] = m.tp;
        stats.per_frame_fp[k] = m.fp;
        stats.per_frame_fn[k] = m.fn_;
        stats.tp += m.tp;
        stats.fp += m.fp;
        stats.fn_ += m.fn_;
        stats.id_switches += m.switched.len();
        iou_sum += m.iou_sum;
        for &g in gt_ids {
            present[g] += 1;
        }
        if gt_ids.is_empty() || pred_ids.is_empty() {
            continue;
        }
        let mut now = vec![false; data.num_gt_ids];
        for &(g, _) in &m.pairs {
            matched[g as usize] += 1;
            now[g as usize] = true;
        }
        for g in 0..data.num_gt_ids {
            if now[g] && !tracked_last_frame[g] {
                tracked_spans[g] += 1;
            }
        }
        tracked_last_frame = now;
    }

    for g in 0..data.num_gt_ids {
        if present[g] == 0 {
            continue;
        }
        match mt_ml(matched[g], present[g]) {
            (true, _) => stats.mostly_tracked += 1,
            (false, true) => stats.mostly_lost += 1,
            _ => stats.partially_tracked += 1,
        }
    }
    stats.fragmentations = tracked_spans.iter().filter(|&&s| s > 0).map(|s| s - 1).sum();
    stats.mota = 1.0 - (stats.fn_ + stats.fp + stats.id_switches) as f64 / data.gt_dets as f64;
    stats.motp = iou_sum / (stats.tp.max(1)) as f64;
    Ok(stats)
}
