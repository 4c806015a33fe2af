//! Flat `key = value` run configuration.
//!
//! One key per line, `#` starts a comment, unknown keys are errors (with
//! their line number), and every key has a default so a config file only
//! needs to state what it changes. `dump` writes the effective
//! configuration back out in the same format, so a dumped config reparses
//! to exactly the same settings.

use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Hidden layer size M.
    pub m: usize,
    /// Document vector size D; 0 disables the document vector.
    pub d: usize,
    pub classes: usize,
    pub min_count: u32,
    pub general_lr: f64,
    pub doc_lr: f64,
    pub lr_decay_factor: f64,
    pub decay_trigger: f64,
    pub max_epochs: usize,
    pub seed: u64,
    pub init_scale: f64,
    pub gradient_clip: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig {
            train: None,
            dev: None,
            test: None,
            out_dir: PathBuf::from("out"),
            m: 100,
            d: 0,
            classes: 100,
            min_count: 30,
            general_lr: 0.1,
            doc_lr: 0.1,
            lr_decay_factor: 0.5,
            decay_trigger: 0.003,
            max_epochs: 20,
            seed: 1,
            init_scale: 0.1,
            gradient_clip: None,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("config line {lineno}: expected `key = value`, got {raw:?}");
            };
            let key = key.trim();
            let value = value.trim();
            if value.is_empty() {
                bail!("config line {lineno}: key {key:?} has no value");
            }
            cfg.set(key, value)
                .with_context(|| format!("config line {lineno}"))?;
        }
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| anyhow::anyhow!("cannot parse {value:?} as a value for {key}"))
        }
        match key {
            "train" => self.train = Some(PathBuf::from(value)),
            "dev" => self.dev = Some(PathBuf::from(value)),
            "test" => self.test = Some(PathBuf::from(value)),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "m" => self.m = num(key, value)?,
            "d" => self.d = num(key, value)?,
            "classes" => self.classes = num(key, value)?,
            "min_count" => self.min_count = num(key, value)?,
            "general_lr" => self.general_lr = num(key, value)?,
            "doc_lr" => self.doc_lr = num(key, value)?,
            "lr_decay_factor" => self.lr_decay_factor = num(key, value)?,
            "decay_trigger" => self.decay_trigger = num(key, value)?,
            "max_epochs" => self.max_epochs = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "init_scale" => self.init_scale = num(key, value)?,
            "gradient_clip" => {
                self.gradient_clip =
                    if value == "none" { None } else { Some(num(key, value)?) }
            }
            _ => bail!("unknown configuration key {key:?}"),
        }
        Ok(())
    }

    /// Serialize so that `parse(dump(cfg)) == cfg`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let mut path = |key: &str, value: &Option<PathBuf>| {
            if let Some(p) = value {
                let _ = writeln!(out, "{key} = {}", p.display());
            }
        };
        path("train", &self.train);
        path("dev", &self.dev);
        path("test", &self.test);
        let _ = writeln!(out, "out_dir = {}", self.out_dir.display());
        let _ = writeln!(out, "m = {}", self.m);
        let _ = writeln!(out, "d = {}", self.d);
        let _ = writeln!(out, "classes = {}", self.classes);
        let _ = writeln!(out, "min_count = {}", self.min_count);
        let _ = writeln!(out, "general_lr = {}", self.general_lr);
        let _ = writeln!(out, "doc_lr = {}", self.doc_lr);
        let _ = writeln!(out, "lr_decay_factor = {}", self.lr_decay_factor);
        let _ = writeln!(out, "decay_trigger = {}", self.decay_trigger);
        let _ = writeln!(out, "max_epochs = {}", self.max_epochs);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "init_scale = {}", self.init_scale);
        match self.gradient_clip {
            Some(c) => {
                let _ = writeln!(out, "gradient_clip = {c}");
            }
            None => {
                let _ = writeln!(out, "gradient_clip = none");
            }
        }
        out
    }
}
