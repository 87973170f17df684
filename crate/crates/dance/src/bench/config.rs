//! Experiment configuration: a flat `key = value` text format with `#`
//! comments. Validation errors name the offending field.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::RiskSpec;
use crate::solver::{DanceConfig, MuRule, StopRule};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum DataSource {
    Libsvm {
        path: PathBuf,
        test_path: Option<PathBuf>,
        d_hint: Option<usize>,
        /// Load-time shuffle seed; defaults to the experiment seed.
        shuffle_seed: Option<u64>,
    },
    Synth {
        n: usize,
        d: usize,
        seed: u64,
        margin: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Algorithm {
    Dance,
    Disco,
    Sgd,
}

impl Algorithm {
    pub fn tag(&self) -> &'static str {
        match self {
            Algorithm::Dance => "dance",
            Algorithm::Disco => "disco",
            Algorithm::Sgd => "sgd",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StepSchedule {
    Constant,
    InvSqrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SgdParams {
    pub batch: usize,
    pub step: f64,
    pub epochs: f64,
    pub schedule: StepSchedule,
    pub records_per_epoch: usize,
}

impl Default for SgdParams {
    fn default() -> Self {
        Self {
            batch: 10,
            step: 0.1,
            epochs: 10.0,
            schedule: StepSchedule::Constant,
            records_per_epoch: 10,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub source: DataSource,
    pub c: f64,
    pub gamma: f64,
    pub algorithm: Algorithm,
    pub dance: DanceConfig,
    pub sgd: SgdParams,
    pub workers: usize,
    /// `sim` only; multi-process runs drive the TCP pool through the library.
    pub transport: String,
    /// Output path prefix: `<out>.csv` and `<out>.json`.
    pub out: PathBuf,
    pub seed: u64,
    /// Record wall-clock times per row. Off by default so identical configs
    /// produce byte-identical output files.
    pub wall_time: bool,
}

impl ExperimentConfig {
    pub fn spec(&self) -> Result<RiskSpec> {
        RiskSpec::new(self.c, self.gamma)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut kv: BTreeMap<String, String> = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: lineno + 1,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            kv.insert(key.trim().to_string(), value.trim().to_string());
        }
        Self::from_pairs(kv)
    }

    fn from_pairs(mut kv: BTreeMap<String, String>) -> Result<Self> {
        fn bad(field: &str, msg: impl Into<String>) -> Error {
            Error::Config {
                field: field.to_string(),
                msg: msg.into(),
            }
        }
        fn take_parse<T: std::str::FromStr>(
            kv: &mut BTreeMap<String, String>,
            field: &str,
        ) -> Result<Option<T>> {
            match kv.remove(field) {
                None => Ok(None),
                Some(raw) => raw
                    .parse::<T>()
                    .map(Some)
                    .map_err(|_| bad(field, format!("cannot parse `{raw}`"))),
            }
        }

        let seed: u64 = take_parse(&mut kv, "seed")?
            .ok_or_else(|| bad("seed", "mandatory field is missing"))?;

        // exactly one dataset source
        let libsvm_path: Option<String> = take_parse(&mut kv, "data.libsvm")?;
        let synth_n: Option<usize> = take_parse(&mut kv, "data.synth.n")?;
        let source = match (libsvm_path, synth_n) {
            (Some(_), Some(_)) => {
                return Err(bad(
                    "data.libsvm",
                    "both libsvm and synthetic sources given; pick one",
                ))
            }
            (None, None) => {
                return Err(bad(
                    "data.libsvm",
                    "no dataset source: set data.libsvm or data.synth.*",
                ))
            }
            (Some(path), None) => DataSource::Libsvm {
                path: PathBuf::from(path),
                test_path: take_parse::<String>(&mut kv, "data.test_libsvm")?.map(PathBuf::from),
                d_hint: take_parse(&mut kv, "data.d_hint")?,
                shuffle_seed: take_parse(&mut kv, "data.shuffle_seed")?,
            },
            (None, Some(n)) => DataSource::Synth {
                n,
                d: take_parse(&mut kv, "data.synth.d")?
                    .ok_or_else(|| bad("data.synth.d", "required with data.synth.n"))?,
                seed: take_parse(&mut kv, "data.synth.seed")?.unwrap_or(seed),
                margin: take_parse(&mut kv, "data.synth.margin")?.unwrap_or(0.25),
            },
        };

        let c = take_parse(&mut kv, "spec.c")?.unwrap_or(0.1);
        let gamma = take_parse(&mut kv, "spec.gamma")?.unwrap_or(0.5);

        let algorithm = match kv.remove("algorithm").as_deref() {
            None | Some("dance") => Algorithm::Dance,
            Some("disco") => Algorithm::Disco,
            Some("sgd") => Algorithm::Sgd,
            Some(other) => return Err(bad("algorithm", format!("unknown algorithm `{other}`"))),
        };

        let mut dance = DanceConfig {
            seed,
            ..DanceConfig::default()
        };
        if let Some(v) = take_parse(&mut kv, "dance.alpha")? {
            dance.alpha = v;
        }
        if let Some(v) = take_parse(&mut kv, "dance.m0")? {
            dance.m0 = v;
        }
        if let Some(v) = take_parse(&mut kv, "dance.beta")? {
            dance.beta = v;
        }
        dance.stop_rule = match kv.remove("dance.stop_rule").as_deref() {
            None | Some("grad") => StopRule::GradNorm,
            Some("decrement") => StopRule::Decrement,
            Some(other) => {
                return Err(bad(
                    "dance.stop_rule",
                    format!("expected grad|decrement, got `{other}`"),
                ))
            }
        };
        if let Some(v) = take_parse(&mut kv, "dance.subset_cap")? {
            dance.subset_cap = v;
        }
        dance.mu_rule = match kv.remove("dance.mu").as_deref() {
            None | Some("auto") => MuRule::SubsampleScaled,
            Some(raw) => MuRule::Fixed(
                raw.parse()
                    .map_err(|_| bad("dance.mu", format!("expected auto or a number, got `{raw}`")))?,
            ),
        };
        if let Some(v) = take_parse(&mut kv, "dance.max_inner")? {
            dance.max_inner = v;
        }
        dance.max_pcg = take_parse(&mut kv, "dance.max_pcg")?;
        dance.validate()?;

        let mut sgd = SgdParams::default();
        if let Some(v) = take_parse(&mut kv, "sgd.batch")? {
            sgd.batch = v;
        }
        if let Some(v) = take_parse(&mut kv, "sgd.step")? {
            sgd.step = v;
        }
        if let Some(v) = take_parse(&mut kv, "sgd.epochs")? {
            sgd.epochs = v;
        }
        sgd.schedule = match kv.remove("sgd.schedule").as_deref() {
            None | Some("constant") => StepSchedule::Constant,
            Some("invsqrt") => StepSchedule::InvSqrt,
            Some(other) => {
                return Err(bad(
                    "sgd.schedule",
                    format!("expected constant|invsqrt, got `{other}`"),
                ))
            }
        };
        if let Some(v) = take_parse(&mut kv, "sgd.records_per_epoch")? {
            sgd.records_per_epoch = v;
        }
        if !(sgd.step > 0.0) {
            return Err(bad("sgd.step", "step size must be > 0"));
        }
        if sgd.batch == 0 {
            return Err(bad("sgd.batch", "batch size must be ≥ 1"));
        }

        let workers: usize = take_parse(&mut kv, "workers")?.unwrap_or(1);
        if workers == 0 {
            return Err(bad("workers", "worker count must be ≥ 1"));
        }
        let transport = kv.remove("transport").unwrap_or_else(|| "sim".to_string());
        if transport != "sim" {
            return Err(bad(
                "transport",
                format!("the experiment runner supports `sim`; got `{transport}`"),
            ));
        }

        let out = PathBuf::from(
            kv.remove("out")
                .ok_or_else(|| bad("out", "mandatory field is missing"))?,
        );
        let wall_time = match kv.remove("wall_time").as_deref() {
            None | Some("false") => false,
            Some("true") => true,
            Some(other) => return Err(bad("wall_time", format!("expected true|false, got `{other}`"))),
        };

        if let Some((key, _)) = kv.pop_first() {
            return Err(bad(&key, "unknown field"));
        }

        let cfg = Self {
            source,
            c,
            gamma,
            algorithm,
            dance,
            sgd,
            workers,
            transport,
            out,
            seed,
            wall_time,
        };
        cfg.spec()?;
        Ok(cfg)
    }
}
