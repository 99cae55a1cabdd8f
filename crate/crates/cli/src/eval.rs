use std::path::PathBuf;

use camtrack::metrics::{evaluate, MetricsReport, MotSequence};
use camtrack::mot::{read_ground_truth, read_results};
use clap::Args;
use log::warn;

use crate::CliError;

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Ground-truth file (MOT gt.txt).
    #[arg(long)]
    pub gt: PathBuf,
    /// Tracker result file.
    #[arg(long)]
    pub result: PathBuf,
    /// IoU needed for a match in CLEAR and identity scores.
    #[arg(long, default_value_t = 0.5)]
    pub iou: f64,
}

/// Cuts both sequences to their common frame range.
///
/// An empty result file has no range of its own and is scored over the whole
/// ground truth.
pub fn common_range(gt: &MotSequence, pred: &MotSequence) -> (MotSequence, MotSequence) {
    if pred.is_empty() || pred.len() == gt.len() {
        return (gt.clone(), pred.resized(gt.len()));
    }
    let n = gt.len().min(pred.len());
    warn!("ground truth covers {} frames, results {}; scoring frames 1..={n}", gt.len(), pred.len());
    (gt.resized(n), pred.resized(n))
}

pub fn run(args: &EvalArgs) -> Result<MetricsReport, CliError> {
    if !(args.iou > 0.0 && args.iou <= 1.0) {
        return Err(CliError::Config(format!("--iou {} outside (0, 1]", args.iou)));
    }
    let gt = read_ground_truth(&args.gt)?;
    let pred = read_results(&args.result)?;
    let (gt, pred) = common_range(&gt, &pred);
    Ok(evaluate(&gt, &pred, args.iou)?)
}
