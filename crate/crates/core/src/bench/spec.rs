use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use crate::adjoint::TemperingKind;
use crate::error::{HviError, Result};
use crate::flow::DEFAULT_XI;
use crate::trainer::{GaussianInit, OptimizerKind, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    Hvae,
    Vb,
    Nf,
}

impl FromStr for Method {
    type Err = HviError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hvae" => Ok(Method::Hvae),
            "vb" => Ok(Method::Vb),
            "nf" => Ok(Method::Nf),
            other => Err(HviError::Config(format!("unknown method '{other}' (expected hvae, vb or nf)"))),
        }
    }
}

pub fn parse_tempering(s: &str) -> Result<TemperingKind> {
    match s.trim().to_ascii_lowercase().as_str() {
        "none" => Ok(TemperingKind::None),
        "fixed" => Ok(TemperingKind::Fixed),
        "free" => Ok(TemperingKind::Free),
        other => Err(HviError::Config(format!("unknown tempering '{other}' (expected fixed, free or none)"))),
    }
}

fn tempering_name(t: TemperingKind) -> &'static str {
    match t {
        TemperingKind::None => "none",
        TemperingKind::Fixed => "fixed",
        TemperingKind::Free => "free",
    }
}

/// One estimator configuration of the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSpec {
    pub method: Method,
    /// Leapfrog steps `K` (HVAE) or planar iterations `T` (NF).
    pub steps: usize,
    pub tempering: TemperingKind,
    pub beta0: f64,
    pub xi: f64,
    pub eps0: f64,
}

impl MethodSpec {
    pub fn hvae(steps: usize, tempering: TemperingKind) -> Self {
        Self { method: Method::Hvae, steps, tempering, beta0: 0.5, xi: DEFAULT_XI, eps0: 0.005 }
    }

    pub fn vb() -> Self {
        Self { method: Method::Vb, ..Self::hvae(0, TemperingKind::None) }
    }

    pub fn nf(iterations: usize) -> Self {
        Self { method: Method::Nf, ..Self::hvae(iterations, TemperingKind::None) }
    }

    /// `hvae-fixed`, `hvae-none`, `hvae-free`, `vb` or `nf`, with `steps`
    /// supplying `K`/`T`.
    pub fn parse(label: &str, steps: usize) -> Result<Self> {
        let label = label.trim().to_ascii_lowercase();
        match label.split_once('-') {
            Some(("hvae", t)) => Ok(Self::hvae(steps, parse_tempering(t)?)),
            None => match label.parse::<Method>()? {
                Method::Hvae => Ok(Self::hvae(steps, TemperingKind::Fixed)),
                Method::Vb => Ok(Self::vb()),
                Method::Nf => Ok(Self::nf(steps)),
            },
            _ => Err(HviError::Config(format!("unknown method label '{label}'"))),
        }
    }

    pub fn label(&self) -> String {
        match self.method {
            Method::Hvae => format!("hvae-{}-K{}", tempering_name(self.tempering), self.steps),
            Method::Vb => "vb".into(),
            Method::Nf => format!("nf-T{}", self.steps),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub dims: Vec<usize>,
    pub methods: Vec<MethodSpec>,
    pub runs: usize,
    pub n: usize,
    pub seed_base: u64,
    pub out_dir: Option<PathBuf>,
    pub train: TrainConfig,
    pub init: GaussianInit,
    /// Worker cap; `HVI_THREADS` lowers it further.
    pub threads: Option<usize>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            dims: vec![1, 5, 11, 21],
            methods: vec![
                MethodSpec::hvae(10, TemperingKind::Fixed),
                MethodSpec::hvae(10, TemperingKind::None),
                MethodSpec::vb(),
                MethodSpec::nf(10),
            ],
            runs: 10,
            n: 10_000,
            seed_base: 0,
            out_dir: None,
            train: gaussian_train_defaults(),
            init: GaussianInit::Standard,
            threads: None,
        }
    }
}

/// Full-batch RMSProp at 1e-3 for 20,000 steps, no early stopping.
pub fn gaussian_train_defaults() -> TrainConfig {
    TrainConfig {
        batch_size: 1,
        max_epochs: 20_000,
        patience: None,
        lr: 1e-3,
        optimizer: OptimizerKind::RmsProp,
        val_fraction: 0.0,
        ..TrainConfig::default()
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(HviError::Config("runs must be at least 1".into()));
        }
        if self.dims.is_empty() || self.dims.contains(&0) {
            return Err(HviError::Config("dims must be a nonempty list of positive integers".into()));
        }
        if self.methods.is_empty() {
            return Err(HviError::Config("no methods to run".into()));
        }
        if self.n == 0 {
            return Err(HviError::Config("N must be at least 1".into()));
        }
        self.train.validate()
    }
}

/// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| HviError::Config(format!("line {}: expected key = value, got '{raw}'", i + 1)))?;
        let key = k.trim().to_ascii_lowercase().replace('-', "_");
        if key.is_empty() {
            return Err(HviError::Config(format!("line {}: empty key", i + 1)));
        }
        map.insert(key, v.trim().to_string());
    }
    Ok(map)
}

/// Every setting the command-line harness understands, with defaults. Config
/// files and command-line flags both write through [`Settings::set`].
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub dim: usize,
    pub dims: Vec<usize>,
    pub n: usize,
    pub seed: u64,
    pub method: String,
    pub methods: Vec<String>,
    pub k: usize,
    pub tempering: TemperingKind,
    pub beta0: f64,
    pub xi: f64,
    pub eps0: f64,
    pub lr: f64,
    pub epochs: usize,
    pub patience: Option<usize>,
    pub runs: usize,
    pub samples: usize,
    pub tail_average: f64,
    pub init: GaussianInit,
    pub nll_samples: usize,
    pub out: PathBuf,
    pub data: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            dim: 5,
            dims: vec![1, 5, 11, 21],
            n: 10_000,
            seed: 0,
            method: "hvae".into(),
            methods: vec!["hvae-fixed".into(), "hvae-none".into(), "vb".into(), "nf".into()],
            k: 10,
            tempering: TemperingKind::Fixed,
            beta0: 0.5,
            xi: DEFAULT_XI,
            eps0: 0.005,
            lr: 1e-3,
            epochs: 20_000,
            patience: None,
            runs: 10,
            samples: 1,
            tail_average: 0.0,
            init: GaussianInit::Standard,
            nll_samples: crate::estimators::DEFAULT_NLL_SAMPLES,
            out: PathBuf::from("out"),
            data: None,
            threads: None,
        }
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| HviError::Config(format!("{key}: cannot parse '{v}'")))
}

fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').filter(|s| !s.trim().is_empty()).map(|s| num(key, s)).collect()
}

impl Settings {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().to_ascii_lowercase().replace('-', "_");
        match key.as_str() {
            "dim" | "d" => self.dim = num(&key, value)?,
            "dims" => self.dims = list(&key, value)?,
            "n" => self.n = num(&key, value)?,
            "seed" => self.seed = num(&key, value)?,
            "method" => self.method = value.trim().to_string(),
            "methods" => self.methods = value.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
            "k" => self.k = num(&key, value)?,
            "tempering" => self.tempering = parse_tempering(value)?,
            "beta0" => self.beta0 = num(&key, value)?,
            "xi" => self.xi = num(&key, value)?,
            "eps0" => self.eps0 = num(&key, value)?,
            "lr" => self.lr = num(&key, value)?,
            "epochs" => self.epochs = num(&key, value)?,
            "patience" => {
                self.patience = match value.trim() {
                    "inf" | "none" | "" => None,
                    v => Some(num(&key, v)?),
                }
            }
            "runs" => self.runs = num(&key, value)?,
            "samples" => self.samples = num(&key, value)?,
            "tail_average" => self.tail_average = num(&key, value)?,
            "init" => self.init = value.trim().parse()?,
            "nll_samples" => self.nll_samples = num(&key, value)?,
            "out" => self.out = PathBuf::from(value.trim()),
            "data" => self.data = Some(PathBuf::from(value.trim())),
            "threads" => self.threads = Some(num(&key, value)?),
            other => return Err(HviError::Config(format!("unknown setting '{other}'"))),
        }
        Ok(())
    }

    pub fn apply(&mut self, map: &BTreeMap<String, String>) -> Result<()> {
        map.iter().try_for_each(|(k, v)| self.set(k, v))
    }

    pub fn from_config_text(text: &str) -> Result<Self> {
        let mut s = Self::default();
        s.apply(&parse_kv(text)?)?;
        Ok(s)
    }

    pub fn method_spec(&self) -> Result<MethodSpec> {
        let mut m = match self.method.parse::<Method>() {
            Ok(Method::Hvae) => MethodSpec::hvae(self.k, self.tempering),
            Ok(Method::Vb) => MethodSpec::vb(),
            Ok(Method::Nf) => MethodSpec::nf(self.k),
            Err(_) => MethodSpec::parse(&self.method, self.k)?,
        };
        self.fill(&mut m);
        Ok(m)
    }

    fn fill(&self, m: &mut MethodSpec) {
        m.beta0 = self.beta0;
        m.xi = self.xi;
        m.eps0 = self.eps0;
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            max_epochs: self.epochs,
            patience: self.patience,
            lr: self.lr,
            seed: self.seed,
            samples: self.samples,
            tail_average: self.tail_average,
            ..gaussian_train_defaults()
        }
    }

    pub fn experiment_spec(&self) -> Result<ExperimentSpec> {
        let methods = self
            .methods
            .iter()
            .map(|l| {
                let mut m = MethodSpec::parse(l, self.k)?;
                self.fill(&mut m);
                Ok(m)
            })
            .collect::<Result<Vec<_>>>()?;
        let spec = ExperimentSpec {
            dims: self.dims.clone(),
            methods,
            runs: self.runs,
            n: self.n,
            seed_base: self.seed,
            out_dir: Some(self.out.clone()),
            train: self.train_config(),
            init: self.init,
            threads: self.threads,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_value_parsing() {
        let text = "# sweep\ndims = 1, 5 # two dims\n\nlr=0.01\nMETHODS = vb,hvae-none\n";
        let s = Settings::from_config_text(text).unwrap();
        assert_eq!(s.dims, vec![1, 5]);
        assert_eq!(s.lr, 0.01);
        assert_eq!(s.methods, vec!["vb", "hvae-none"]);
        assert!(parse_kv("no equals sign").is_err());
        assert!(Settings::from_config_text("bogus = 1").is_err());
        assert!(Settings::from_config_text("runs = many").is_err());
    }

    #[test]
    fn later_values_override() {
        let mut s = Settings::from_config_text("epochs = 10\nbeta0 = 0.3").unwrap();
        s.set("epochs", "20").unwrap();
        assert_eq!(s.epochs, 20);
        assert_eq!(s.beta0, 0.3);
    }

    #[test]
    fn method_labels() {
        assert_eq!(MethodSpec::parse("hvae-none", 7).unwrap().label(), "hvae-none-K7");
        assert_eq!(MethodSpec::parse("nf", 3).unwrap().label(), "nf-T3");
        assert_eq!(MethodSpec::parse("vb", 3).unwrap(), MethodSpec::vb());
        assert!(MethodSpec::parse("hvae-warm", 3).is_err());
        let s = Settings { method: "hvae".into(), tempering: TemperingKind::Free, ..Settings::default() };
        assert_eq!(s.method_spec().unwrap().tempering, TemperingKind::Free);
    }

    #[test]
    fn spec_validation() {
        let s = Settings { runs: 0, ..Settings::default() };
        assert!(s.experiment_spec().is_err());
        assert!(Settings::default().experiment_spec().is_ok());
    }
}
