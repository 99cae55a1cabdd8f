//! Robust affine and homography fitting over flow correspondences.

use nalgebra::{Matrix3, SMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::flow::FlowMatches;
use super::{MotionError, MotionEstimate};
use crate::geometry::{CameraMotion, MotionKind, Point2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacParams {
    /// Reprojection error below which a match counts as an inlier, in pixels.
    pub threshold: f64,
    /// Upper bound on sampled hypotheses.
    pub iters: usize,
    pub min_inliers: usize,
    /// Stop sampling once a better hypothesis is this unlikely to exist.
    pub confidence: f64,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        RansacParams { threshold: 3.0, iters: 100, min_inliers: 10, confidence: 0.999, seed: 0 }
    }
}

/// Fits an affine motion with RANSAC over 3-point samples and a least-squares refit.
pub fn estimate_affine(matches: &FlowMatches, params: &RansacParams) -> Result<MotionEstimate, MotionError> {
    let (src, dst) = matches.tracked();
    ransac(&src, &dst, params, 3, affine_exact, affine_least_squares)
}

/// Fits a homography with RANSAC over 4-point samples (normalized DLT) and a DLT refit on the inliers.
pub fn estimate_homography(matches: &FlowMatches, params: &RansacParams) -> Result<MotionEstimate, MotionError> {
    let (src, dst) = matches.tracked();
    ransac(&src, &dst, params, 4, homography_minimal, homography_dlt)
}

fn ransac(
    src: &[Point2],
    dst: &[Point2],
    params: &RansacParams,
    sample_size: usize,
    fit_minimal: fn(&[Point2], &[Point2]) -> Option<CameraMotion>,
    refit: fn(&[Point2], &[Point2]) -> Option<CameraMotion>,
) -> Result<MotionEstimate, MotionError> {
    let n = src.len();
    if n < sample_size {
        return Err(MotionError::EstimationFailed(format!(
            "{n} usable matches, at least {sample_size} required"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<(CameraMotion, Score)> = None;
    let mut budget = params.iters.max(1);
    let mut iter = 0;
    let (mut s_src, mut s_dst) = (Vec::with_capacity(sample_size), Vec::with_capacity(sample_size));
    while iter < budget {
        iter += 1;
        s_src.clear();
        s_dst.clear();
        for i in rand::seq::index::sample(&mut rng, n, sample_size) {
            s_src.push(src[i]);
            s_dst.push(dst[i]);
        }
        let Some(model) = fit_minimal(&s_src, &s_dst) else { continue };
        let (inliers, error_sum) = Score::count(&model, src, dst, params.threshold);
        if best.as_ref().is_none_or(|(_, b)| beats(inliers, error_sum, b)) {
            budget = budget.min(adaptive_budget(inliers, n, sample_size, params.confidence, iter));
            best = Some((model, Score::of(&model, src, dst, params.threshold)));
        }
    }
    let Some((mut model, mut score)) = best else {
        return Err(MotionError::EstimationFailed("every sample was degenerate".into()));
    };

    // refit on the consensus set until it stops growing
    for _ in 0..3 {
        let (in_src, in_dst) = select(src, dst, &score.mask);
        let Some(refined) = refit(&in_src, &in_dst) else { break };
        let refined_score = Score::of(&refined, src, dst, params.threshold);
        if refined_score.inliers < score.inliers {
            break;
        }
        let grew = refined_score.inliers > score.inliers;
        model = refined;
        score = refined_score;
        if !grew {
            break;
        }
    }

    if score.inliers < params.min_inliers.max(sample_size) {
        return Err(MotionError::EstimationFailed(format!(
            "{} inliers, at least {} required",
            score.inliers,
            params.min_inliers.max(sample_size)
        )));
    }
    let inliers: Vec<usize> = score.mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect();
    Ok(MotionEstimate {
        motion: model,
        inlier_count: score.inliers,
        inlier_ratio: score.inliers as f64 / n as f64,
        mean_reprojection_error: score.error_sum / score.inliers as f64,
        inliers,
    })
}

fn adaptive_budget(inliers: usize, n: usize, sample_size: usize, confidence: f64, done: usize) -> usize {
    if !(0.0..1.0).contains(&confidence) || confidence == 0.0 {
        return usize::MAX;
    }
    let w = inliers as f64 / n as f64;
    let p_good = w.powi(sample_size as i32);
    if p_good >= 1.0 {
        return done;
    }
    if p_good <= 0.0 {
        return usize::MAX;
    }
    let k = (1.0 - confidence).ln() / (1.0 - p_good).ln();
    if !k.is_finite() {
        return usize::MAX;
    }
    (k.ceil() as usize).max(done)
}

struct Score {
    inliers: usize,
    error_sum: f64,
    mask: Vec<bool>,
}

impl Score {
    fn of(model: &CameraMotion, src: &[Point2], dst: &[Point2], threshold: f64) -> Score {
        let mut mask = vec![false; src.len()];
        let (mut inliers, mut error_sum) = (0, 0.0);
        for_each_inlier(model, src, dst, threshold, |i, e| {
            mask[i] = true;
            inliers += 1;
            error_sum += e;
        });
        Score { inliers, error_sum, mask }
    }

    fn count(model: &CameraMotion, src: &[Point2], dst: &[Point2], threshold: f64) -> (usize, f64) {
        let (mut inliers, mut error_sum) = (0, 0.0);
        for_each_inlier(model, src, dst, threshold, |_, e| {
            inliers += 1;
            error_sum += e;
        });
        (inliers, error_sum)
    }
}

fn beats(inliers: usize, error_sum: f64, other: &Score) -> bool {
    inliers > other.inliers || (inliers == other.inliers && error_sum < other.error_sum)
}

/// Calls `f(index, reprojection_error)` for every match closer than `threshold`.
fn for_each_inlier(model: &CameraMotion, src: &[Point2], dst: &[Point2], threshold: f64, mut f: impl FnMut(usize, f64)) {
    let t2 = threshold * threshold;
    for (i, (p, q)) in src.iter().zip(dst).enumerate() {
        if let Ok(r) = model.apply(*p) {
            let (rx, ry) = (r.x - q.x, r.y - q.y);
            let d2 = rx * rx + ry * ry;
            if d2 < t2 {
                f(i, d2.sqrt());
            }
        }
    }
}

fn select(src: &[Point2], dst: &[Point2], mask: &[bool]) -> (Vec<Point2>, Vec<Point2>) {
    src.iter().zip(dst).zip(mask).filter(|(_, &m)| m).map(|((p, q), _)| (*p, *q)).unzip()
}

/// True when the three points are (numerically) on one line.
fn collinear(a: Point2, b: Point2, c: Point2) -> bool {
    let (ux, uy) = (b.x - a.x, b.y - a.y);
    let (vx, vy) = (c.x - a.x, c.y - a.y);
    let cross = (ux * vy - uy * vx).abs();
    let scale = (ux * ux + uy * uy).max(vx * vx + vy * vy).max((c.x - b.x).powi(2) + (c.y - b.y).powi(2));
    scale == 0.0 || cross <= 1e-6 * scale
}

fn affine_exact(src: &[Point2], dst: &[Point2]) -> Option<CameraMotion> {
    if collinear(src[0], src[1], src[2]) {
        return None;
    }
    let m = Matrix3::new(src[0].x, src[0].y, 1.0, src[1].x, src[1].y, 1.0, src[2].x, src[2].y, 1.0);
    let inv = m.try_inverse()?;
    let rx = inv * nalgebra::Vector3::new(dst[0].x, dst[1].x, dst[2].x);
    let ry = inv * nalgebra::Vector3::new(dst[0].y, dst[1].y, dst[2].y);
    CameraMotion::affine([rx[0], rx[1], rx[2], ry[0], ry[1], ry[2]]).ok()
}

/// Least-squares affine fit. The normal equations are solved in centred
/// coordinates, which decouples the translation from the linear block.
pub(crate) fn affine_least_squares(src: &[Point2], dst: &[Point2]) -> Option<CameraMotion> {
    let n = src.len();
    if n < 3 {
        return None;
    }
    let nf = n as f64;
    let (mpx, mpy) = mean(src);
    let (mqx, mqy) = mean(dst);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    let (mut bxx, mut bxy, mut byx, mut byy) = (0.0, 0.0, 0.0, 0.0);
    for (p, q) in src.iter().zip(dst) {
        let (dx, dy) = (p.x - mpx, p.y - mpy);
        let (ex, ey) = (q.x - mqx, q.y - mqy);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
        bxx += dx * ex;
        bxy += dy * ex;
        byx += dx * ey;
        byy += dy * ey;
    }
    let det = sxx * syy - sxy * sxy;
    // relative rank test: collinear inputs make the scatter matrix singular
    if det <= 1e-12 * (sxx + syy).powi(2) || det <= 0.0 || nf == 0.0 {
        return None;
    }
    let a11 = (bxx * syy - bxy * sxy) / det;
    let a12 = (bxy * sxx - bxx * sxy) / det;
    let a21 = (byx * syy - byy * sxy) / det;
    let a22 = (byy * sxx - byx * sxy) / det;
    let a13 = mqx - a11 * mpx - a12 * mpy;
    let a23 = mqy - a21 * mpx - a22 * mpy;
    CameraMotion::affine([a11, a12, a13, a21, a22, a23]).ok()
}

fn mean(pts: &[Point2]) -> (f64, f64) {
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
    (sx / n, sy / n)
}

fn homography_minimal(src: &[Point2], dst: &[Point2]) -> Option<CameraMotion> {
    for pts in [src, dst] {
        for skip in 0..4 {
            let tri: Vec<Point2> = (0..4).filter(|&i| i != skip).map(|i| pts[i]).collect();
            if collinear(tri[0], tri[1], tri[2]) {
                return None;
            }
        }
    }
    homography_dlt(src, dst)
}

/// Similarity transform moving the centroid to the origin with mean distance sqrt(2).
fn hartley_normalization(pts: &[Point2]) -> Option<Matrix3<f64>> {
    let (mx, my) = mean(pts);
    let mean_dist = pts.iter().map(|p| (p.x - mx).hypot(p.y - my)).sum::<f64>() / pts.len() as f64;
    if mean_dist <= f64::EPSILON {
        return None;
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;
    Some(Matrix3::new(s, 0.0, -s * mx, 0.0, s, -s * my, 0.0, 0.0, 1.0))
}

/// Normalized direct linear transform over all given correspondences.
pub(crate) fn homography_dlt(src: &[Point2], dst: &[Point2]) -> Option<CameraMotion> {
    if src.len() < 4 {
        return None;
    }
    let t_src = hartley_normalization(src)?;
    let t_dst = hartley_normalization(dst)?;
    let mut ata = SMatrix::<f64, 9, 9>::zeros();
    for (p, q) in src.iter().zip(dst) {
        let (x, y) = (
            t_src[(0, 0)] * p.x + t_src[(0, 2)],
            t_src[(1, 1)] * p.y + t_src[(1, 2)],
        );
        let (u, v) = (
            t_dst[(0, 0)] * q.x + t_dst[(0, 2)],
            t_dst[(1, 1)] * q.y + t_dst[(1, 2)],
        );
        let r1 = [-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u];
        let r2 = [0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v];
        for r in [r1, r2] {
            for i in 0..9 {
                for j in i..9 {
                    ata[(i, j)] += r[i] * r[j];
                }
            }
        }
    }
    for i in 0..9 {
        for j in 0..i {
            ata[(i, j)] = ata[(j, i)];
        }
    }
    let eig = SymmetricEigen::new(ata);
    let (k, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))?;
    let h = eig.eigenvectors.column(k);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let full = t_dst.try_inverse()? * hn * t_src;
    CameraMotion::from_matrix(MotionKind::Homography, &full).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn params(threshold: f64, min_inliers: usize) -> RansacParams {
        RansacParams { threshold, iters: 100, min_inliers, confidence: 0.999, seed: 11 }
    }

    fn scatter(n: usize, seed: u64) -> Vec<Point2> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| Point2::new(rng.random_range(0.0..1280.0), rng.random_range(0.0..720.0))).collect()
    }

    fn warp(m: &CameraMotion, pts: &[Point2]) -> Vec<Point2> {
        pts.iter().map(|p| m.apply(*p).unwrap()).collect()
    }

    const A: [f64; 6] = [1.01, 0.002, 5.0, -0.002, 1.01, -3.0];

    #[test]
    fn exact_affine_recovered() {
        let truth = CameraMotion::affine(A).unwrap();
        let src = scatter(100, 1);
        let m = FlowMatches::from_pairs(src.clone(), warp(&truth, &src));
        let est = estimate_affine(&m, &params(3.0, 10)).unwrap();
        for (a, b) in est.motion.affine_coefficients().iter().zip(A) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
        assert_eq!(est.inlier_count, 100);
        assert!(est.mean_reprojection_error < 1e-9);
    }

    #[test]
    fn affine_with_outliers_classifies_inliers() {
        let truth = CameraMotion::affine(A).unwrap();
        let src = scatter(200, 2);
        let mut dst = warp(&truth, &src);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut is_outlier = vec![false; 200];
        for i in 0..60 {
            dst[i] = Point2::new(rng.random_range(0.0..1280.0), rng.random_range(0.0..720.0));
            is_outlier[i] = dst[i].distance(&truth.apply(src[i]).unwrap()) >= 2.0;
        }
        let est = estimate_affine(&FlowMatches::from_pairs(src, dst), &params(2.0, 10)).unwrap();
        for (a, b) in est.motion.affine_coefficients().iter().zip(A) {
            assert!((a - b).abs() < 1e-2);
        }
        for (i, outlier) in is_outlier.iter().enumerate() {
            if !outlier {
                assert!(est.inliers.contains(&i), "true inlier {i} rejected");
            }
        }
    }

    #[test]
    fn collinear_matches_fail() {
        let src: Vec<Point2> = (0..20).map(|i| Point2::new(i as f64 * 10.0, i as f64 * 5.0 + 3.0)).collect();
        let dst = warp(&CameraMotion::translation(1.0, 1.0), &src);
        let r = estimate_affine(&FlowMatches::from_pairs(src, dst), &params(3.0, 3));
        assert!(matches!(r, Err(MotionError::EstimationFailed(_))));
    }

    #[test]
    fn too_few_matches_fail() {
        let src = scatter(2, 4);
        let r = estimate_affine(&FlowMatches::from_pairs(src.clone(), src), &params(3.0, 1));
        assert!(r.is_err());
    }

    #[test]
    fn min_inliers_enforced() {
        let src = scatter(8, 5);
        let r = estimate_affine(&FlowMatches::from_pairs(src.clone(), src), &params(3.0, 10));
        assert!(matches!(r, Err(MotionError::EstimationFailed(_))));
    }

    #[test]
    fn untracked_matches_are_ignored() {
        let truth = CameraMotion::translation(4.0, -2.0);
        let src = scatter(30, 6);
        let mut m = FlowMatches::from_pairs(src.clone(), warp(&truth, &src));
        for i in 0..10 {
            m.curr[i] = Point2::new(0.0, 0.0);
            m.status[i] = false;
        }
        let est = estimate_affine(&m, &params(1.0, 10)).unwrap();
        assert_eq!(est.inlier_count, 20);
        assert_eq!(est.inlier_ratio, 1.0);
    }

    #[test]
    fn translation_homography_matches_affine() {
        let truth = CameraMotion::translation(7.5, -4.25);
        let src = scatter(50, 7);
        let m = FlowMatches::from_pairs(src.clone(), warp(&truth, &src));
        let h = estimate_homography(&m, &params(3.0, 10)).unwrap();
        let a = estimate_affine(&m, &params(3.0, 10)).unwrap();
        let expected = truth.coefficients();
        for (x, y) in h.motion.coefficients().iter().zip(expected) {
            assert!((x - y).abs() < 1e-6, "{x} vs {y}");
        }
        for (x, y) in h.motion.affine_coefficients().iter().zip(a.motion.affine_coefficients()) {
            assert!((x - y).abs() < 1e-4);
        }
    }

    #[test]
    fn identity_correspondences_give_identity_homography() {
        let src = scatter(20, 8);
        let h = estimate_homography(&FlowMatches::from_pairs(src.clone(), src), &params(1.0, 4)).unwrap();
        let id = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        for (x, y) in h.motion.coefficients().iter().zip(id) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn projective_homography_recovered() {
        let truth = CameraMotion::homography([1.02, 0.01, 3.0, -0.015, 0.99, -6.0, 2e-5, -1e-5, 1.0]).unwrap();
        let src = scatter(60, 9);
        let m = FlowMatches::from_pairs(src.clone(), warp(&truth, &src));
        let h = estimate_homography(&m, &params(2.0, 10)).unwrap();
        for p in scatter(20, 10) {
            assert!(h.motion.apply(p).unwrap().distance(&truth.apply(p).unwrap()) < 1e-6);
        }
    }

    #[test]
    fn three_collinear_of_four_fails() {
        let src = vec![
            Point2::new(0.0, 0.0),
            Point2::new(10.0, 0.0),
            Point2::new(20.0, 0.0),
            Point2::new(5.0, 30.0),
        ];
        let dst = warp(&CameraMotion::translation(2.0, 2.0), &src);
        let r = estimate_homography(&FlowMatches::from_pairs(src, dst), &params(3.0, 4));
        assert!(matches!(r, Err(MotionError::EstimationFailed(_))));
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let truth = CameraMotion::affine(A).unwrap();
        let src = scatter(150, 12);
        let mut dst = warp(&truth, &src);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for d in dst.iter_mut().take(50) {
            *d = Point2::new(rng.random_range(0.0..1280.0), rng.random_range(0.0..720.0));
        }
        let m = FlowMatches::from_pairs(src, dst);
        let a = estimate_affine(&m, &params(3.0, 10)).unwrap();
        let b = estimate_affine(&m, &params(3.0, 10)).unwrap();
        assert_eq!(a.motion.coefficients().map(f64::to_bits), b.motion.coefficients().map(f64::to_bits));
        assert_eq!(a.inliers, b.inliers);
    }

    #[test]
    fn refit_beats_minimal_samples_on_exact_data() {
        let truth = CameraMotion::affine(A).unwrap();
        let src = scatter(40, 14);
        let dst = warp(&truth, &src);
        let est = estimate_affine(&FlowMatches::from_pairs(src.clone(), dst.clone()), &params(3.0, 10)).unwrap();
        for k in 0..10 {
            let idx = [k, k + 10, k + 20];
            let s: Vec<_> = idx.iter().map(|&i| src[i]).collect();
            let d: Vec<_> = idx.iter().map(|&i| dst[i]).collect();
            let cand = affine_exact(&s, &d).unwrap();
            let cand_err: f64 =
                src.iter().zip(&dst).map(|(p, q)| cand.apply(*p).unwrap().distance(q)).sum::<f64>() / 40.0;
            assert!(est.mean_reprojection_error <= cand_err + 1e-12);
        }
    }

    proptest::proptest! {
        #[test]
        fn affine_fit_is_translation_equivariant(tx in -50.0..50.0f64, ty in -50.0..50.0f64, seed in 0u64..1000) {
            let truth = CameraMotion::affine(A).unwrap();
            let src = scatter(60, seed);
            let dst = warp(&truth, &src);
            let shifted: Vec<_> = dst.iter().map(|q| Point2::new(q.x + tx, q.y + ty)).collect();
            let a = estimate_affine(&FlowMatches::from_pairs(src.clone(), dst), &params(3.0, 10)).unwrap();
            let b = estimate_affine(&FlowMatches::from_pairs(src, shifted), &params(3.0, 10)).unwrap();
            let (ca, cb) = (a.motion.affine_coefficients(), b.motion.affine_coefficients());
            for i in [0, 1, 3, 4] {
                proptest::prop_assert!((ca[i] - cb[i]).abs() < 1e-9);
            }
            proptest::prop_assert!((cb[2] - ca[2] - tx).abs() < 1e-9);
            proptest::prop_assert!((cb[5] - ca[5] - ty).abs() < 1e-9);
        }
    }
}
