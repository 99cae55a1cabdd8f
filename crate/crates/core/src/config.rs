//! Plain-text configuration: `key = value` lines grouped in sections.
//!
//! ```text
//! [tracker]
//! max_age = 10
//! min_hits = 3
//! iou_threshold = 0.3
//! min_confidence = 0.3
//! emit_coasting = false
//!
//! [motion]
//! technique = affine        # or homography
//! max_corners = 200
//! quality_level = 0.01
//! min_distance = 20
//! window = 10
//! levels = 3
//! max_iters = 30
//! eps = 0.01
//! ransac_threshold = 3
//! ransac_iters = 100
//! min_inliers = 10
//! ransac_confidence = 0.999
//! seed = 0
//! downscale = 1
//!
//! [noise]
//! sigma_q = 0.05
//! sigma_r = 0.00625
//! delta_t = 0.033           # default: derived from the sequence frame rate
//!
//! [synth]
//! frames = 100
//! width = 1280
//! height = 720
//! boxes = 8
//! box_min = 50
//! box_max = 110
//! pan_x = 3
//! pan_y = 0
//! zoom = 1.0015
//! rotation = 0
//! sway = 6
//! sway_period = 40
//! jitter = 2
//! drop = 0.05
//! fp_rate = 0
//! seed = 0                # detection corruption
//! layout_seed = 0         # box placement and textures
//! frame_rate = 30
//! ```
//!
//! Every key is optional; unknown sections or keys are rejected.

use std::path::Path;
use std::str::FromStr;

use ini::Ini;
use thiserror::Error;

use crate::synth::SynthParams;
use crate::tracker::TrackerConfig;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{0}")]
    Syntax(String),
    #[error("unknown section [{0}]")]
    UnknownSection(String),
    #[error("unknown key `{key}` in [{section}]")]
    UnknownKey { section: String, key: String },
    #[error("[{section}] {key} = {value:?}: {message}")]
    InvalidValue { section: String, key: String, value: String, message: String },
    #[error("{0}")]
    Io(String),
}

/// Everything a config file can set.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Config {
    pub tracker: TrackerConfig,
    /// Set when the file pins `[noise] delta_t`; otherwise it follows the frame rate.
    pub delta_t: Option<f64>,
    pub synth: SynthParams,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        text.parse()
    }

    /// Tracker settings for a sequence with the given frame rate.
    pub fn tracker_for_frame_rate(&self, fps: f64) -> TrackerConfig {
        let mut cfg = self.tracker;
        cfg.noise.delta_t = self.delta_t.unwrap_or_else(|| crate::filter::NoiseConfig::delta_t_for(fps));
        cfg
    }
}

struct Section<'a> {
    name: &'a str,
    props: &'a ini::Properties,
}

impl Section<'_> {
    fn set<T: FromStr>(&self, key: &str, slot: &mut T) -> Result<(), ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        if let Some(raw) = self.props.get(key) {
            let value = raw.split('#').next().unwrap_or("").trim();
            *slot = value.parse().map_err(|e: T::Err| ConfigError::InvalidValue {
                section: self.name.to_string(),
                key: key.to_string(),
                value: value.to_string(),
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    fn check_keys(&self, known: &[&str]) -> Result<(), ConfigError> {
        for (k, _) in self.props.iter() {
            if !known.contains(&k) {
                return Err(ConfigError::UnknownKey { section: self.name.to_string(), key: k.to_string() });
            }
        }
        Ok(())
    }
}

impl FromStr for Config {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let ini = Ini::load_from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        let mut cfg = Config::default();
        for (name, props) in ini.iter() {
            let Some(name) = name else {
                if props.iter().next().is_some() {
                    return Err(ConfigError::Syntax("keys must appear inside a section".into()));
                }
                continue;
            };
            let s = Section { name, props };
            match name {
                "tracker" => {
                    s.check_keys(&["max_age", "min_hits", "iou_threshold", "min_confidence", "emit_coasting"])?;
                    let t = &mut cfg.tracker;
                    s.set("max_age", &mut t.max_age)?;
                    s.set("min_hits", &mut t.min_hits)?;
                    s.set("iou_threshold", &mut t.iou_threshold)?;
                    s.set("min_confidence", &mut t.min_confidence)?;
                    s.set("emit_coasting", &mut t.emit_coasting)?;
                }
                "motion" => {
                    s.check_keys(&[
                        "technique",
                        "max_corners",
                        "quality_level",
                        "min_distance",
                        "window",
                        "levels",
                        "max_iters",
                        "eps",
                        "ransac_threshold",
                        "ransac_iters",
                        "min_inliers",
                        "ransac_confidence",
                        "seed",
                        "downscale",
                    ])?;
                    let m = &mut cfg.tracker.motion;
                    s.set("technique", &mut m.technique)?;
                    s.set("max_corners", &mut m.max_corners)?;
                    s.set("quality_level", &mut m.quality_level)?;
                    s.set("min_distance", &mut m.min_distance)?;
                    s.set("window", &mut m.window)?;
                    s.set("levels", &mut m.levels)?;
                    s.set("max_iters", &mut m.max_iters)?;
                    s.set("eps", &mut m.eps)?;
                    s.set("ransac_threshold", &mut m.ransac_threshold)?;
                    s.set("ransac_iters", &mut m.ransac_iters)?;
                    s.set("min_inliers", &mut m.min_inliers)?;
                    s.set("ransac_confidence", &mut m.ransac_confidence)?;
                    s.set("seed", &mut m.seed)?;
                    s.set("downscale", &mut m.downscale)?;
                }
                "noise" => {
                    s.check_keys(&["sigma_q", "sigma_r", "delta_t"])?;
                    s.set("sigma_q", &mut cfg.tracker.noise.sigma_q)?;
                    s.set("sigma_r", &mut cfg.tracker.noise.sigma_r)?;
                    if props.contains_key("delta_t") {
                        let mut dt = 0.0;
                        s.set("delta_t", &mut dt)?;
                        cfg.delta_t = Some(dt);
                        cfg.tracker.noise.delta_t = dt;
                    }
                }
                "synth" => {
                    s.check_keys(&[
                        "frames",
                        "width",
                        "height",
                        "boxes",
                        "box_min",
                        "box_max",
                        "pan_x",
                        "pan_y",
                        "zoom",
                        "rotation",
                        "sway",
                        "sway_period",
                        "jitter",
                        "drop",
                        "fp_rate",
                        "seed",
                        "layout_seed",
                        "frame_rate",
                    ])?;
                    let p = &mut cfg.synth;
                    s.set("frames", &mut p.frames)?;
                    s.set("width", &mut p.width)?;
                    s.set("height", &mut p.height)?;
                    s.set("boxes", &mut p.num_boxes)?;
                    s.set("box_min", &mut p.box_min)?;
                    s.set("box_max", &mut p.box_max)?;
                    s.set("pan_x", &mut p.pan_x)?;
                    s.set("pan_y", &mut p.pan_y)?;
                    s.set("zoom", &mut p.zoom)?;
                    s.set("rotation", &mut p.rotation)?;
                    s.set("sway", &mut p.sway)?;
                    s.set("sway_period", &mut p.sway_period)?;
                    s.set("jitter", &mut p.corruption.jitter)?;
                    s.set("drop", &mut p.corruption.drop)?;
                    s.set("fp_rate", &mut p.corruption.fp_rate)?;
                    s.set("seed", &mut p.seed)?;
                    s.set("layout_seed", &mut p.layout_seed)?;
                    s.set("frame_rate", &mut p.frame_rate)?;
                }
                other => return Err(ConfigError::UnknownSection(other.to_string())),
            }
        }
        cfg.tracker.validate().map_err(|e| ConfigError::Syntax(e.to_string()))?;
        cfg.synth.validate().map_err(|e| ConfigError::Syntax(e.to_string()))?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::Technique;

    #[test]
    fn empty_text_gives_defaults() {
        let cfg: Config = "".parse().unwrap();
        assert_eq!(cfg, Config::default());
        assert_eq!(cfg.tracker.max_age, 10);
        assert_eq!(cfg.tracker.motion.max_corners, 200);
        assert_eq!(cfg.tracker.noise.sigma_r, 0.00625);
    }

    #[test]
    fn documented_example_parses() {
        let doc = include_str!("config.rs");
        let start = doc.find("//! [tracker]").unwrap();
        let end = doc.find("//! frame_rate = 30").unwrap() + "//! frame_rate = 30".len();
        let text: String = doc[start..end].lines().map(|l| l.trim_start_matches("//!").trim_start()).collect::<Vec<_>>().join("\n");
        let cfg: Config = text.parse().unwrap();
        assert_eq!(cfg.tracker, TrackerConfig { noise: cfg.tracker.noise, ..TrackerConfig::default() });
        assert_eq!(cfg.delta_t, Some(0.033));
        assert_eq!(cfg.synth, SynthParams::default());
    }

    #[test]
    fn values_override_defaults() {
        let cfg: Config = "[motion]\ntechnique = homography\nseed = 9\n[tracker]\nmin_hits = 1\n".parse().unwrap();
        assert_eq!(cfg.tracker.motion.technique, Technique::Homography);
        assert_eq!(cfg.tracker.motion.seed, 9);
        assert_eq!(cfg.tracker.min_hits, 1);
        assert_eq!(cfg.delta_t, None);
        assert_eq!(cfg.tracker_for_frame_rate(10.0).noise.delta_t, 0.1);
    }

    #[test]
    fn errors_are_specific() {
        assert!(matches!("[trackr]\n".parse::<Config>(), Err(ConfigError::UnknownSection(_))));
        assert!(matches!("[tracker]\nmax_agee = 3\n".parse::<Config>(), Err(ConfigError::UnknownKey { .. })));
        assert!(matches!("[tracker]\nmax_age = soon\n".parse::<Config>(), Err(ConfigError::InvalidValue { .. })));
        assert!(matches!("[motion]\ntechnique = orb\n".parse::<Config>(), Err(ConfigError::InvalidValue { .. })));
        assert!("[tracker]\nmin_hits = 0\n".parse::<Config>().is_err());
        assert!("max_age = 3\n".parse::<Config>().is_err());
    }
}
