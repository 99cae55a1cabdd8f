use std::path::{Path, PathBuf};
use std::thread;

use camtrack::config::Config;
use camtrack::imaging::{save_pgm, GrayFrame};
use camtrack::mot::{format_detections, format_ground_truth, write_text, SeqInfo, SequenceLayout};
use camtrack::synth::{SynthParams, SynthScript};
use clap::Args;

use crate::CliError;

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Output sequence directory.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Script file; its `[synth]` section sets the scene.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Detection corruption seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sequence name written to seqinfo.ini.
    #[arg(long, default_value = "synth")]
    pub name: String,
}

pub fn params(args: &SynthArgs) -> Result<SynthParams, CliError> {
    let mut p = match &args.config {
        Some(path) => Config::load(path)?.synth,
        None => SynthParams::default(),
    };
    if let Some(seed) = args.seed {
        p.seed = seed;
    }
    p.validate()?;
    Ok(p)
}

/// Renders `params` into a sequence directory at `out`.
pub fn write_sequence(params: &SynthParams, out: &Path, name: &str) -> Result<SequenceLayout, CliError> {
    let script = SynthScript::generate(params)?;
    let gt = script.ground_truth()?;
    let detections = script.detections(&gt);
    let world = script.world();
    let img_dir = out.join("img1");
    std::fs::create_dir_all(&img_dir).map_err(|e| CliError::Input(format!("{}: {e}", img_dir.display())))?;

    let n = script.num_frames();
    let workers = thread::available_parallelism().map_or(1, |v| v.get()).min(n.max(1));
    thread::scope(|s| -> Result<(), CliError> {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let (script, world, img_dir) = (&script, &world, &img_dir);
                s.spawn(move || -> Result<(), CliError> {
                    for k in (w..n).step_by(workers) {
                        let frame: GrayFrame = world.render(script, k)?;
                        save_pgm(&frame, img_dir.join(format!("{:06}.pgm", k + 1)))?;
                    }
                    Ok(())
                })
            })
            .collect();
        for h in handles {
            h.join().expect("render worker panicked")?;
        }
        Ok(())
    })?;

    let info = SeqInfo {
        name: name.to_string(),
        im_dir: "img1".into(),
        frame_rate: params.frame_rate,
        seq_length: n,
        im_width: params.width,
        im_height: params.height,
        im_ext: ".pgm".into(),
    };
    write_text(&out.join("seqinfo.ini"), &info.to_ini_string())?;
    write_text(&out.join("gt").join("gt.txt"), &format_ground_truth(&gt))?;
    write_text(&out.join("det").join("det.txt"), &format_detections(&detections))?;
    Ok(SequenceLayout::open(out)?)
}

pub fn run(args: &SynthArgs) -> Result<SequenceLayout, CliError> {
    let p = params(args)?;
    write_sequence(&p, &args.out, &args.name)
}
