//! Run configuration as flat `key = value` lines with dotted keys.
//!
//! Blank lines and `#` comments are ignored. A `preset = calibrated` line
//! applies the calibrated schedule before any other key, wherever it
//! appears.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use scenemc_core::classes::ClassInfo;
use scenemc_core::inference::{LayoutMoves, PhaseSchedule, PhaseSet, RunConfigCore, Schedule};
use scenemc_core::scene::{Cuboid, Vec3};
use scenemc_core::{Error, Result};

/// Environment variable naming a config file when `--config` is absent.
pub const CONFIG_ENV: &str = "SCENEMC_CONFIG";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub core: RunConfigCore,
    pub seed: u64,
    /// HOI prior file; built-in priors when absent.
    pub priors: Option<PathBuf>,
    pub preset: Option<String>,
}

fn bad(key: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("`{key}`: {msg}"))
}

fn float(key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| bad(key, format!("expected a number, got `{v}`")))
}

fn int<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| bad(key, format!("expected a nonnegative integer, got `{v}`")))
}

fn boolean(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(bad(key, format!("expected true or false, got `{v}`"))),
    }
}

fn floats<const N: usize>(key: &str, v: &str) -> Result<[f64; N]> {
    let parts: Vec<f64> = v.split(',').map(|p| float(key, p.trim())).collect::<Result<_>>()?;
    parts.try_into().map_err(|_| bad(key, format!("expected {N} comma-separated numbers")))
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

fn phase_keys(prefix: &str, p: &PhaseSchedule, out: &mut Vec<(String, String)>) {
    out.push((format!("{prefix}.iters"), p.iterations.to_string()));
    out.push((format!("{prefix}.t0"), p.t0.to_string()));
    out.push((format!("{prefix}.gamma"), p.gamma.to_string()));
    out.push((format!("{prefix}.cycles"), p.cycles.to_string()));
}

fn set_phase(p: &mut PhaseSchedule, field: &str, key: &str, v: &str) -> Result<()> {
    match field {
        "iters" => p.iterations = int(key, v)?,
        "t0" => p.t0 = float(key, v)?,
        "gamma" => p.gamma = float(key, v)?,
        "cycles" => p.cycles = int(key, v)?,
        _ => return Err(bad(key, "unknown key")),
    }
    Ok(())
}

impl RunConfig {
    /// Every setting as `(key, value)`, in file order.
    pub fn entries(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut put = |k: &str, v: String| out.push((k.to_string(), v));
        put("seed", self.seed.to_string());
        if let Some(p) = &self.preset {
            put("preset", p.clone());
        }
        if let Some(p) = &self.priors {
            put("paths.priors", p.display().to_string());
        }
        let c = &self.core;
        let w = &c.energy.weights;
        put("energy.w_support", w.w_support.to_string());
        put("energy.w_collision", w.w_collision.to_string());
        put("energy.w_hoi", w.w_hoi.to_string());
        put("energy.w_likelihood_obj", w.w_likelihood_obj.to_string());
        put("energy.w_likelihood_pose", w.w_likelihood_pose.to_string());
        put("energy.human_margin", c.energy.human_margin.to_string());
        put("energy.hip_half_side", c.energy.hip_half_side.to_string());
        put("energy.culled_penalty", c.energy.culled_penalty.to_string());
        put("energy.unseen_pose_penalty", c.energy.unseen_pose_penalty.to_string());
        let s = &c.schedule;
        let mut rest = Vec::new();
        phase_keys("schedule.phase1", &s.phase1, &mut rest);
        phase_keys("schedule.phase3", &s.phase3, &mut rest);
        out.extend(rest);
        let mut put = |k: &str, v: String| out.push((k.to_string(), v));
        put("schedule.step.translation", s.steps.translation.to_string());
        put("schedule.step.rotation", s.steps.rotation.to_string());
        put("schedule.step.scale", s.steps.scale.to_string());
        put("schedule.p_desc", s.p_desc.to_string());
        put("schedule.phases", s.phases.to_string());
        put("schedule.layout_moves", s.layout_moves.name().to_string());
        put("schedule.nll_warn", s.nll_warn.to_string());
        put("threshold.hoi_confidence", s.conf_threshold.to_string());
        put("threshold.topdown", s.topdown_threshold.to_string());
        let h = &c.init.heights;
        put("h0.hip", h.hip.to_string());
        put("h0.head", h.head.to_string());
        put("h0.hip_seated", h.hip_seated.to_string());
        put("h0.head_seated", h.head_seated.to_string());
        put("support.lambda", c.init.support.lambda.to_string());
        for ((a, b), p) in &c.init.support.probs {
            put(&format!("support.prior.{a}.{b}"), p.to_string());
        }
        if let Some(l) = &c.init.layout {
            put("layout.center", join(l.center.as_slice()));
            put("layout.size", join(l.size.as_slice()));
        }
        for (name, info) in &c.init.classes.classes {
            put(&format!("class.{name}.size"), join(info.size.as_slice()));
            put(&format!("class.{name}.center_height"), info.center_height.to_string());
            put(&format!("class.{name}.container"), info.is_container.to_string());
        }
        out
    }

    pub fn dump(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// Parses config text over the defaults, then checks every value.
    /// Relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut pairs = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        let mut cfg = RunConfig::default();
        if let Some((_, p)) = pairs.iter().find(|(k, _)| k == "preset") {
            cfg.apply_preset(p)?;
        }
        let mut layout: (Option<[f64; 3]>, Option<[f64; 3]>) = (None, None);
        for (k, v) in &pairs {
            cfg.set(k, v, base, &mut layout)?;
        }
        match layout {
            (Some(c), Some(s)) => cfg.core.init.layout = Some(Cuboid::new(Vec3::from(c), Vec3::from(s), 0.0, "room")),
            (None, None) => {}
            _ => return Err(Error::Config("layout needs both `layout.center` and `layout.size`".into())),
        }
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn apply_preset(&mut self, name: &str) -> Result<()> {
        match name {
            "calibrated" => self.core.schedule = Schedule { phases: self.core.schedule.phases, ..Schedule::calibrated() },
            "default" => self.core.schedule = Schedule { phases: self.core.schedule.phases, ..Schedule::default() },
            _ => return Err(Error::Config(format!("unknown preset `{name}` (expected calibrated or default)"))),
        }
        self.preset = Some(name.to_string());
        Ok(())
    }

    fn set(&mut self, key: &str, v: &str, base: &Path, layout: &mut (Option<[f64; 3]>, Option<[f64; 3]>)) -> Result<()> {
        let c = &mut self.core;
        let parts: Vec<&str> = key.split('.').collect();
        match parts.as_slice() {
            ["seed"] => self.seed = int(key, v)?,
            ["preset"] => {}
            ["paths", "priors"] => {
                let p = base.join(v);
                if !p.is_file() {
                    return Err(bad(key, format!("{} does not exist", p.display())));
                }
                self.priors = Some(p);
            }
            ["energy", field] => {
                let x = float(key, v)?;
                let w = &mut c.energy.weights;
                match *field {
                    "w_support" => w.w_support = x,
                    "w_collision" => w.w_collision = x,
                    "w_hoi" => w.w_hoi = x,
                    "w_likelihood_obj" => w.w_likelihood_obj = x,
                    "w_likelihood_pose" => w.w_likelihood_pose = x,
                    "human_margin" => c.energy.human_margin = x,
                    "hip_half_side" => c.energy.hip_half_side = x,
                    "culled_penalty" => c.energy.culled_penalty = x,
                    "unseen_pose_penalty" => c.energy.unseen_pose_penalty = x,
                    _ => return Err(bad(key, "unknown key")),
                }
            }
            ["schedule", "phase1", f] => set_phase(&mut c.schedule.phase1, f, key, v)?,
            ["schedule", "phase3", f] => set_phase(&mut c.schedule.phase3, f, key, v)?,
            ["schedule", "step", f] => {
                let x = float(key, v)?;
                match *f {
                    "translation" => c.schedule.steps.translation = x,
                    "rotation" => c.schedule.steps.rotation = x,
                    "scale" => c.schedule.steps.scale = x,
                    _ => return Err(bad(key, "unknown key")),
                }
            }
            ["schedule", "p_desc"] => c.schedule.p_desc = float(key, v)?,
            ["schedule", "phases"] => c.schedule.phases = PhaseSet::parse(v).map_err(|e| bad(key, e))?,
            ["schedule", "layout_moves"] => {
                c.schedule.layout_moves =
                    LayoutMoves::from_name(v).ok_or_else(|| bad(key, "expected auto, always or never"))?
            }
            ["schedule", "nll_warn"] => c.schedule.nll_warn = float(key, v)?,
            ["threshold", "hoi_confidence"] => c.schedule.conf_threshold = float(key, v)?,
            ["threshold", "topdown"] => c.schedule.topdown_threshold = float(key, v)?,
            ["h0", f] => {
                let x = float(key, v)?;
                let h = &mut c.init.heights;
                match *f {
                    "hip" => h.hip = x,
                    "head" => h.head = x,
                    "hip_seated" => h.hip_seated = x,
                    "head_seated" => h.head_seated = x,
                    _ => return Err(bad(key, "unknown key")),
                }
            }
            ["support", "lambda"] => c.init.support.lambda = float(key, v)?,
            ["support", "prior", supported, supporter] => {
                c.init.support.probs.insert((supported.to_string(), supporter.to_string()), float(key, v)?);
            }
            ["layout", "center"] => layout.0 = Some(floats(key, v)?),
            ["layout", "size"] => layout.1 = Some(floats(key, v)?),
            ["class", name, f] => {
                let classes = &mut c.init.classes.classes;
                let entry = classes.entry(name.to_string()).or_insert_with(|| ClassInfo {
                    size: Vec3::repeat(0.5),
                    center_height: 0.25,
                    is_container: false,
                });
                match *f {
                    "size" => entry.size = Vec3::from(floats::<3>(key, v)?),
                    "center_height" => entry.center_height = float(key, v)?,
                    "container" => entry.is_container = boolean(key, v)?,
                    _ => return Err(bad(key, "unknown key")),
                }
            }
            _ => return Err(bad(key, "unknown key")),
        }
        Ok(())
    }

    pub fn check(&self) -> Result<()> {
        let c = &self.core;
        let wrap = |e: Error| Error::Config(e.to_string());
        c.energy.weights.check().map_err(wrap)?;
        c.schedule.check().map_err(wrap)?;
        c.init.support.check().map_err(wrap)?;
        let e = &c.energy;
        if !(e.human_margin >= 0.0 && e.hip_half_side > 0.0 && e.culled_penalty >= 0.0 && e.unseen_pose_penalty >= 0.0) {
            return Err(Error::Config("energy constants must be nonnegative (hip_half_side positive)".into()));
        }
        let h = &c.init.heights;
        if ![h.hip, h.head, h.hip_seated, h.head_seated].iter().all(|x| *x > 0.0) {
            return Err(Error::Config("h0 heights must be positive".into()));
        }
        for (name, info) in &c.init.classes.classes {
            if !(info.size.iter().all(|s| *s > 0.0) && info.center_height >= 0.0) {
                return Err(Error::Config(format!("class `{name}` needs a positive size and nonnegative height")));
            }
        }
        if let Some(l) = &c.init.layout {
            if !l.size.iter().all(|s| *s > 0.0) {
                return Err(Error::Config("layout.size must be positive".into()));
            }
        }
        if let Some(p) = &self.priors {
            if !p.is_file() {
                return Err(Error::Config(format!("prior file {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    /// Reads `--config` if given, else the file named by [`CONFIG_ENV`],
    /// else defaults.
    pub fn resolve(explicit: Option<&Path>) -> Result<Self> {
        if let Some(p) = explicit {
            return Self::load(p);
        }
        match std::env::var_os(CONFIG_ENV) {
            Some(p) if !p.is_empty() => Self::load(Path::new(&p)),
            _ => Ok(Self::default()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_parses_back_to_the_same_config() {
        let d = RunConfig::default();
        let back = RunConfig::parse(&d.dump(), Path::new(".")).unwrap();
        assert_eq!(back, d);
        let mut c = RunConfig::default();
        c.apply_preset("calibrated").unwrap();
        c.core.init.support.probs.insert(("laptop".into(), "table".into()), 0.7);
        c.core.init.layout = Some(Cuboid::new(Vec3::new(0.0, 0.0, 1.5), Vec3::new(5.0, 4.0, 3.0), 0.0, "room"));
        assert_eq!(RunConfig::parse(&c.dump(), Path::new(".")).unwrap(), c);
    }

    #[test]
    fn overrides_and_comments() {
        let c = RunConfig::parse(
            "# weights\nenergy.w_hoi = 0\nschedule.phase1.iters = 10\nschedule.phases = 1-3\nseed = 9\n",
            Path::new("."),
        )
        .unwrap();
        assert_eq!(c.core.energy.weights.w_hoi, 0.0);
        assert_eq!(c.core.schedule.phase1.iterations, 10);
        assert!(!c.core.schedule.phases.contains(4));
        assert_eq!(c.seed, 9);
    }

    #[test]
    fn preset_applies_before_other_keys() {
        let c = RunConfig::parse("schedule.phase1.iters = 5\npreset = calibrated\n", Path::new(".")).unwrap();
        assert_eq!(c.core.schedule.phase1.iterations, 5);
        assert_eq!(c.core.schedule.phase3, Schedule::calibrated().phase3);
    }

    #[test]
    fn invalid_values_are_rejected() {
        for text in [
            "energy.w_hoi = -1",
            "schedule.p_desc = 0.2",
            "schedule.phase1.gamma = 1.5",
            "nonsense = 1",
            "energy.w_hoi",
            "paths.priors = /does/not/exist.json",
            "layout.center = 0, 0, 1",
            "class.chair.size = 1, 2",
        ] {
            assert!(matches!(RunConfig::parse(text, Path::new(".")), Err(Error::Config(_))), "{text}");
        }
    }
}
