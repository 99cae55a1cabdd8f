//! Higher Order Tracking Accuracy.
//!
//! Averaged over localisation thresholds `alpha` in 0.05..=0.95. Per frame, a
//! single Hungarian matching maximises IoU weighted by how well the two ids
//! align over the whole sequence; each `alpha` then keeps the pairs with
//! IoU >= `alpha`.

use crate::association::{linear_sum_assignment, CostMatrix};

use super::{MetricsError, MotSequence, Prepared};

pub const ALPHAS: [f64; 19] = [
    0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95,
];

#[derive(Debug, Clone, PartialEq)]
pub struct HotaResult {
    pub hota: f64,
    pub deta: f64,
    pub assa: f64,
    pub loca: f64,
    /// Per-alpha values, aligned with [`ALPHAS`].
    pub hota_alpha: Vec<f64>,
    pub deta_alpha: Vec<f64>,
    pub assa_alpha: Vec<f64>,
    pub loca_alpha: Vec<f64>,
}

pub fn compute_hota(gt: &MotSequence, pred: &MotSequence) -> Result<HotaResult, MetricsError> {
    let data = Prepared::new(gt, pred)?;
    if data.gt_dets == 0 {
        return Err(MetricsError::NoGroundTruth);
    }
    let na = ALPHAS.len();
    if data.pred_dets == 0 {
        let zeros = vec![0.0; na];
        return Ok(HotaResult {
            hota: 0.0,
            deta: 0.0,
            assa: 0.0,
            loca: 1.0,
            hota_alpha: zeros.clone(),
            deta_alpha: zeros.clone(),
            assa_alpha: zeros,
            loca_alpha: vec![1.0; na],
        });
    }

    let (ng, np) = (data.num_gt_ids, data.num_pred_ids);
    let mut potential = vec![0.0f64; ng * np];
    let mut gt_count = vec![0.0f64; ng];
    let mut pred_count = vec![0.0f64; np];
    for k in 0..gt.len() {
        let (gi, pi) = (&data.gt_ids[k], &data.pred_ids[k]);
        let cols = pi.len();
        let sim = &data.similarity[k];
        let row_sum: Vec<f64> = (0..gi.len()).map(|i| (0..cols).map(|j| sim[i * cols + j]).sum()).collect();
        let col_sum: Vec<f64> = (0..cols).map(|j| (0..gi.len()).map(|i| sim[i * cols + j]).sum()).collect();
        for (i, &g) in gi.iter().enumerate() {
            for (j, &p) in pi.iter().enumerate() {
                let s = sim[i * cols + j];
                let denom = row_sum[i] + col_sum[j] - s;
                if denom > f64::EPSILON {
                    potential[g * np + p] += s / denom;
                }
            }
        }
        for &g in gi {
            gt_count[g] += 1.0;
        }
        for &p in pi {
            pred_count[p] += 1.0;
        }
    }
    let alignment: Vec<f64> = (0..ng * np)
        .map(|idx| {
            let (g, p) = (idx / np, idx % np);
            potential[idx] / (gt_count[g] + pred_count[p] - potential[idx])
        })
        .collect();

    let mut tp = vec![0.0f64; na];
    let mut fn_ = vec![0.0f64; na];
    let mut fp = vec![0.0f64; na];
    let mut loc = vec![0.0f64; na];
    let mut matches_count = vec![vec![0.0f64; ng * np]; na];
    for k in 0..gt.len() {
        let (gi, pi) = (&data.gt_ids[k], &data.pred_ids[k]);
        if gi.is_empty() || pi.is_empty() {
            for a in 0..na {
                fp[a] += pi.len() as f64;
                fn_[a] += gi.len() as f64;
            }
            continue;
        }
        let cols = pi.len();
        let sim = &data.similarity[k];
        let cost = CostMatrix::from_fn(gi.len(), cols, |i, j| -(alignment[gi[i] * np + pi[j]] * sim[i * cols + j]));
        let pairs = linear_sum_assignment(&cost);
        for (a, &alpha) in ALPHAS.iter().enumerate() {
            let kept: Vec<&(usize, usize)> =
                pairs.iter().filter(|&&(i, j)| sim[i * cols + j] >= alpha - f64::EPSILON).collect();
            let n = kept.len() as f64;
            tp[a] += n;
            fn_[a] += gi.len() as f64 - n;
            fp[a] += cols as f64 - n;
            for &&(i, j) in &kept {
                loc[a] += sim[i * cols + j];
                matches_count[a][gi[i] * np + pi[j]] += 1.0;
            }
        }
    }

    let mut result = HotaResult {
        hota: 0.0,
        deta: 0.0,
        assa: 0.0,
        loca: 0.0,
        hota_alpha: vec![0.0; na],
        deta_alpha: vec![0.0; na],
        assa_alpha: vec![0.0; na],
        loca_alpha: vec![0.0; na],
    };
    for a in 0..na {
        let mut ass = 0.0;
        for idx in 0..ng * np {
            let mc = matches_count[a][idx];
            if mc > 0.0 {
                let (g, p) = (idx / np, idx % np);
                ass += mc * mc / (gt_count[g] + pred_count[p] - mc).max(1.0);
            }
        }
        let assa = ass / tp[a].max(1.0);
        let deta = tp[a] / (tp[a] + fn_[a] + fp[a]).max(1.0);
        result.assa_alpha[a] = assa;
        result.deta_alpha[a] = deta;
        result.hota_alpha[a] = (deta * assa).sqrt();
        result.loca_alpha[a] = loc[a].max(1e-10) / tp[a].max(1e-10);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    result.hota = mean(&result.hota_alpha);
    result.deta = mean(&result.deta_alpha);
    result.assa = mean(&result.assa_alpha);
    result.loca = mean(&result.loca_alpha);
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BBox;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bx(x: f64, y: f64) -> BBox {
        BBox::new(x, y, 10.0, 10.0).unwrap()
    }

    #[test]
    fn identical_sequences_score_one() {
        let gt = MotSequence::new(vec![vec![(1, bx(0.0, 0.0)), (2, bx(30.0, 0.0))]; 4]).unwrap();
        let r = compute_hota(&gt, &gt).unwrap();
        assert_eq!(r.hota, 1.0);
        assert_eq!(r.loca, 1.0);
    }

    #[test]
    fn no_predictions_score_zero() {
        let gt = MotSequence::new(vec![vec![(1, bx(0.0, 0.0))]; 4]).unwrap();
        let pred = MotSequence::new(vec![vec![]; 4]).unwrap();
        assert_eq!(compute_hota(&gt, &pred).unwrap().hota, 0.0);
    }

    #[test]
    fn id_split_halves_association() {
        // perfect detection, but the track changes id halfway
        let gt = MotSequence::new(vec![vec![(1, bx(0.0, 0.0))]; 4]).unwrap();
        let pred = MotSequence::new((0..4).map(|k| vec![(if k < 2 { 5 } else { 6 }, bx(0.0, 0.0))]).collect()).unwrap();
        let r = compute_hota(&gt, &pred).unwrap();
        // each pair: 2 matches, |gt|=4, |pred|=2 -> A = 2/4; AssA = 0.5, DetA = 1
        assert!((r.assa - 0.5).abs() < 1e-12);
        assert!((r.hota - 0.5f64.sqrt()).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn hota_is_non_increasing_in_alpha(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let frames = (0..8).map(|_| (1..=4).map(|i| (i, bx(25.0 * i as f64, 0.0))).collect()).collect();
            let gt = MotSequence::new(frames).unwrap();
            let mut frames = Vec::new();
            for f in gt.frames() {
                let mut out = Vec::new();
                for &(id, b) in f {
                    if rng.random::<f64>() <= 0.2 {
                        continue;
                    }
                    let id = if rng.random::<f64>() < 0.2 { id + 10 } else { id };
                    out.push((id, bx(b.x_c() + rng.random_range(-6.0..6.0), b.y_c() + rng.random_range(-6.0..6.0))));
                }
                frames.push(out);
            }
            let pred = MotSequence::new(frames).unwrap();
            let r = compute_hota(&gt, &pred).unwrap();
            for w in r.hota_alpha.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12, "{:?}", r.hota_alpha);
            }
        }
    }
}
