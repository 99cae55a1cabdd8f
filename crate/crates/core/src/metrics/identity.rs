//! Identity metrics: IDF1, IDP, IDR.

use crate::association::{linear_sum_assignment, CostMatrix};

use super::{MetricsError, MotSequence, Prepared};

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityStats {
    pub idf1: f64,
    pub idp: f64,
    pub idr: f64,
    pub idtp: usize,
    pub idfp: usize,
    pub idfn: usize,
}

/// One-to-one matching of ground-truth ids to predicted ids over the whole
/// sequence, maximising the number of frames in which each matched pair
/// overlaps by at least `iou_min`.
pub fn compute_idf1(gt: &MotSequence, pred: &MotSequence, iou_min: f64) -> Result<IdentityStats, MetricsError> {
    let data = Prepared::new(gt, pred)?;
    if data.gt_dets == 0 {
        return Err(MetricsError::NoGroundTruth);
    }
    let (ng, np) = (data.num_gt_ids, data.num_pred_ids);
    let mut overlap = vec![0usize; ng * np];
    for k in 0..gt.len() {
        let cols = data.pred_ids[k].len();
        for (i, &g) in data.gt_ids[k].iter().enumerate() {
            for (j, &p) in data.pred_ids[k].iter().enumerate() {
                if data.similarity[k][i * cols + j] >= iou_min {
                    overlap[g * np + p] += 1;
                }
            }
        }
    }
    let idtp: usize = if np == 0 {
        0
    } else {
        let cost = CostMatrix::from_fn(ng, np, |g, p| -(overlap[g * np + p] as f64));
        linear_sum_assignment(&cost).iter().map(|&(g, p)| overlap[g * np + p]).sum()
    };
    let idfn = data.gt_dets - idtp;
    let idfp = data.pred_dets - idtp;
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    Ok(IdentityStats {
        idf1: ratio(2 * idtp, 2 * idtp + idfp + idfn),
        idp: ratio(idtp, idtp + idfp),
        idr: ratio(idtp, idtp + idfn),
        idtp,
        idfp,
        idfn,
    })
}
