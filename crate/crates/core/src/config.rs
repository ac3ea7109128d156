//! Simulation configuration: defaults, `key = value` files and validation.
//!
//! Every setting has one key. Config files hold `key = value` lines (`#`
//! starts a comment); command-line flags use the same keys with dashes and
//! are applied after the file.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use crate::control::{InverseTargetLag, PlantDelay, TrainingTargets, DEFAULT_GAMMA};
use crate::error::{Error, Result};
use crate::plant::{DaylightSource, DaylightTrajectory, FastChanges, ProcessLut};
use crate::signals::{D8bv, ErrorScaling};

#[derive(Debug, Clone, PartialEq)]
pub enum LutSource {
    Synthetic { e_max: u8, shape: f64, knots: usize },
    Csv(PathBuf),
}

impl Default for LutSource {
    fn default() -> Self {
        LutSource::Synthetic {
            e_max: 180,
            shape: 1.3,
            knots: 32,
        }
    }
}

impl LutSource {
    pub fn build(&self) -> Result<ProcessLut> {
        match self {
            LutSource::Synthetic {
                e_max,
                shape,
                knots,
            } => ProcessLut::synthetic(*e_max, *shape, *knots),
            LutSource::Csv(path) => ProcessLut::load_csv(path),
        }
    }
}

impl fmt::Display for LutSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LutSource::Synthetic {
                e_max,
                shape,
                knots,
            } => write!(f, "synthetic:{e_max}:{shape}:{knots}"),
            LutSource::Csv(p) => write!(f, "csv:{}", p.display()),
        }
    }
}

/// Default seed of the randomized daylight series.
pub const DEFAULT_DAYLIGHT_SEED: u64 = 2007;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub steps: usize,
    pub e_desired: D8bv,
    pub gamma_controller: f64,
    pub gamma_inverse: f64,
    pub hidden_controller: usize,
    pub hidden_inverse: usize,
    pub seed_controller: u64,
    pub seed_inverse: u64,
    pub seed_daylight: u64,
    pub lut: LutSource,
    pub daylight: DaylightSource,
    pub warmup: usize,
    pub error_scaling: ErrorScaling,
    pub inverse_target_lag: InverseTargetLag,
    pub plant_delay: PlantDelay,
    pub training_targets: TrainingTargets,
    pub use_bias: bool,
    pub out_dir: PathBuf,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            steps: 2000,
            e_desired: D8bv::new(100),
            gamma_controller: DEFAULT_GAMMA,
            gamma_inverse: DEFAULT_GAMMA,
            hidden_controller: 3,
            hidden_inverse: 3,
            seed_controller: 1,
            seed_inverse: 2,
            seed_daylight: DEFAULT_DAYLIGHT_SEED,
            lut: LutSource::default(),
            daylight: DaylightSource::FastChanges(FastChanges::default()),
            warmup: 200,
            error_scaling: ErrorScaling::Independent,
            inverse_target_lag: InverseTargetLag::Same,
            plant_delay: PlantDelay::One,
            training_targets: TrainingTargets::Quantized,
            use_bias: true,
            out_dir: PathBuf::from("out"),
        }
    }
}

/// Keys accepted by [`SimConfig::set`].
pub const KEYS: &[&str] = &[
    "steps",
    "e_desired",
    "gamma_controller",
    "gamma_inverse",
    "hidden_controller",
    "hidden_inverse",
    "seed_controller",
    "seed_inverse",
    "seed_daylight",
    "lut",
    "daylight",
    "warmup",
    "error_scaling",
    "inverse_target_lag",
    "plant_delay",
    "training_targets",
    "use_bias",
    "out_dir",
];

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| Error::param(key, format!("`{value}`: {e}")))
}

fn code(key: &str, value: &str) -> Result<D8bv> {
    let v: i64 = num(key, value)?;
    D8bv::try_from_i64(v).map_err(|_| Error::param(key, format!("{v} outside [0, 255]")))
}

fn positive_rate(key: &str, value: &str) -> Result<f64> {
    let v: f64 = num(key, value)?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::param(
            key,
            format!("{value} must be a positive number"),
        ))
    }
}

fn bool_value(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "on" | "yes" => Ok(true),
        "false" | "0" | "off" | "no" => Ok(false),
        _ => Err(Error::param(key, format!("`{value}` is not a boolean"))),
    }
}

/// `constant:C`, `step:C0:C1:K`, `ramp:C0:C1`, `fast[:BASE:AMP:PROB:JUMP]`,
/// `csv:PATH` or a bare path ending in `.csv`.
pub fn parse_daylight(value: &str) -> Result<DaylightSource> {
    let key = "daylight";
    let parts: Vec<&str> = value.split(':').collect();
    let arity = |n: usize| {
        if parts.len() == n {
            Ok(())
        } else {
            Err(Error::param(
                key,
                format!("`{value}` needs {} fields", n - 1),
            ))
        }
    };
    match parts[0] {
        "constant" => {
            arity(2)?;
            Ok(DaylightSource::Constant(code(key, parts[1])?))
        }
        "step" => {
            arity(4)?;
            Ok(DaylightSource::Step {
                before: code(key, parts[1])?,
                after: code(key, parts[2])?,
                at: num(key, parts[3])?,
            })
        }
        "ramp" => {
            arity(3)?;
            Ok(DaylightSource::Ramp {
                from: code(key, parts[1])?,
                to: code(key, parts[2])?,
            })
        }
        "fast" if parts.len() == 1 => Ok(DaylightSource::FastChanges(FastChanges::default())),
        "fast" => {
            arity(5)?;
            Ok(DaylightSource::FastChanges(FastChanges {
                base: num(key, parts[1])?,
                amplitude: num(key, parts[2])?,
                step_prob: num(key, parts[3])?,
                max_jump: num(key, parts[4])?,
            }))
        }
        "csv" => Ok(DaylightSource::Csv(PathBuf::from(&value[4..]))),
        _ if value.ends_with(".csv") => Ok(DaylightSource::Csv(PathBuf::from(value))),
        _ => Err(Error::param(
            key,
            format!("unrecognized daylight source `{value}`"),
        )),
    }
}

pub fn format_daylight(source: &DaylightSource) -> String {
    match source {
        DaylightSource::Constant(c) => format!("constant:{c}"),
        DaylightSource::Step { before, after, at } => format!("step:{before}:{after}:{at}"),
        DaylightSource::Ramp { from, to } => format!("ramp:{from}:{to}"),
        DaylightSource::FastChanges(p) => {
            format!(
                "fast:{}:{}:{}:{}",
                p.base, p.amplitude, p.step_prob, p.max_jump
            )
        }
        DaylightSource::Csv(p) => format!("csv:{}", p.display()),
    }
}

/// `synthetic`, `synthetic:E_MAX:SHAPE:KNOTS`, `csv:PATH` or a bare path ending in `.csv`.
pub fn parse_lut(value: &str) -> Result<LutSource> {
    let key = "lut";
    let parts: Vec<&str> = value.split(':').collect();
    match parts[0] {
        "synthetic" if parts.len() == 1 => Ok(LutSource::default()),
        "synthetic" if parts.len() == 4 => Ok(LutSource::Synthetic {
            e_max: num(key, parts[1])?,
            shape: num(key, parts[2])?,
            knots: num(key, parts[3])?,
        }),
        "csv" => Ok(LutSource::Csv(PathBuf::from(&value[4..]))),
        _ if value.ends_with(".csv") => Ok(LutSource::Csv(PathBuf::from(value))),
        _ => Err(Error::param(
            key,
            format!("unrecognized table source `{value}`"),
        )),
    }
}

impl SimConfig {
    /// Sets one key from its textual value. Dashes in `key` are read as underscores.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.replace('-', "_");
        let k = key.as_str();
        let value = value.trim();
        match k {
            "steps" => {
                let v: usize = num(k, value)?;
                if v == 0 {
                    return Err(Error::param(k, "must be at least 1"));
                }
                self.steps = v;
            }
            "e_desired" => self.e_desired = code(k, value)?,
            "gamma_controller" => self.gamma_controller = positive_rate(k, value)?,
            "gamma_inverse" => self.gamma_inverse = positive_rate(k, value)?,
            "hidden_controller" | "hidden_inverse" => {
                let v: usize = num(k, value)?;
                if v == 0 {
                    return Err(Error::param(k, "must be at least 1"));
                }
                if k == "hidden_controller" {
                    self.hidden_controller = v;
                } else {
                    self.hidden_inverse = v;
                }
            }
            "seed_controller" => self.seed_controller = num(k, value)?,
            "seed_inverse" => self.seed_inverse = num(k, value)?,
            "seed_daylight" => self.seed_daylight = num(k, value)?,
            "lut" => self.lut = parse_lut(value)?,
            "daylight" => self.daylight = parse_daylight(value)?,
            "warmup" => self.warmup = num(k, value)?,
            "error_scaling" => self.error_scaling = value.parse()?,
            "inverse_target_lag" => {
                self.inverse_target_lag = match value {
                    "0" => InverseTargetLag::Same,
                    "1" => InverseTargetLag::Previous,
                    _ => return Err(Error::param(k, format!("expected 0 or 1, got `{value}`"))),
                }
            }
            "plant_delay" => {
                self.plant_delay = match value {
                    "0" => PlantDelay::Zero,
                    "1" => PlantDelay::One,
                    _ => return Err(Error::param(k, format!("expected 0 or 1, got `{value}`"))),
                }
            }
            "training_targets" => {
                self.training_targets = match value {
                    "continuous" => TrainingTargets::Continuous,
                    "quantized" => TrainingTargets::Quantized,
                    _ => {
                        return Err(Error::param(
                            k,
                            format!("expected `continuous` or `quantized`, got `{value}`"),
                        ))
                    }
                }
            }
            "use_bias" => self.use_bias = bool_value(k, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            other => return Err(Error::param(other, "unknown key")),
        }
        Ok(())
    }

    /// Applies a `key = value` file on top of the current settings.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text, path)
    }

    pub fn apply_text(&mut self, text: &str, origin: &Path) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: origin.to_path_buf(),
                line: i + 1,
                reason: format!("expected `key = value`, found `{line}`"),
            })?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    /// Cross-field checks and existence of referenced files.
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::param("steps", "must be at least 1"));
        }
        if let LutSource::Csv(p) = &self.lut {
            if !p.is_file() {
                return Err(Error::param(
                    "lut",
                    format!("{} does not exist", p.display()),
                ));
            }
        }
        if let DaylightSource::Csv(p) = &self.daylight {
            if !p.is_file() {
                return Err(Error::param(
                    "daylight",
                    format!("{} does not exist", p.display()),
                ));
            }
        }
        if let LutSource::Synthetic {
            e_max,
            shape,
            knots,
        } = &self.lut
        {
            ProcessLut::synthetic(*e_max, *shape, *knots)?;
        }
        Ok(())
    }

    pub fn daylight_trajectory(&self) -> Result<DaylightTrajectory> {
        DaylightTrajectory::generate(&self.daylight, self.steps, self.seed_daylight)
    }

    /// The settings as a `key = value` file that [`SimConfig::apply_text`] reads back.
    pub fn to_text(&self) -> String {
        let lag = match self.inverse_target_lag {
            InverseTargetLag::Same => 0,
            InverseTargetLag::Previous => 1,
        };
        let delay = match self.plant_delay {
            PlantDelay::Zero => 0,
            PlantDelay::One => 1,
        };
        [
            format!("steps = {}", self.steps),
            format!("e_desired = {}", self.e_desired),
            format!("gamma_controller = {:?}", self.gamma_controller),
            format!("gamma_inverse = {:?}", self.gamma_inverse),
            format!("hidden_controller = {}", self.hidden_controller),
            format!("hidden_inverse = {}", self.hidden_inverse),
            format!("seed_controller = {}", self.seed_controller),
            format!("seed_inverse = {}", self.seed_inverse),
            format!("seed_daylight = {}", self.seed_daylight),
            format!("lut = {}", self.lut),
            format!("daylight = {}", format_daylight(&self.daylight)),
            format!("warmup = {}", self.warmup),
            format!("error_scaling = {}", self.error_scaling),
            format!("inverse_target_lag = {lag}"),
            format!("plant_delay = {delay}"),
            format!(
                "training_targets = {}",
                match self.training_targets {
                    TrainingTargets::Continuous => "continuous",
                    TrainingTargets::Quantized => "quantized",
                }
            ),
            format!("use_bias = {}", self.use_bias),
            format!("out_dir = {}", self.out_dir.display()),
        ]
        .join("\n")
            + "\n"
    }
}

/// Defaults, then the optional config file, then `overrides` in order. The
/// result is validated.
pub fn parse_config<K: AsRef<str>, V: AsRef<str>>(
    config_file: Option<&Path>,
    overrides: &[(K, V)],
) -> Result<SimConfig> {
    let mut config = SimConfig::default();
    if let Some(path) = config_file {
        config.apply_file(path)?;
    }
    for (key, value) in overrides {
        config.set(key.as_ref(), value.as_ref())?;
    }
    config.validate()?;
    Ok(config)
}
