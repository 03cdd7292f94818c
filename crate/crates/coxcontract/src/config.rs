//! Flat `key = value` configuration with dotted keys.
//!
//! Lines are `key = value`; `#` starts a comment; blank lines are ignored.
//! Keys may repeat only if the values agree. Lists are comma separated.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use coxcontract_core::conditions::{Constant, ConstantLedger, TailExponent, Variant};
use coxcontract_core::gp::LengthscalePrior;
use coxcontract_core::grid::{Grid, GridField};
use coxcontract_core::inference::{McmcConfig, SbcConfig};
use coxcontract_core::models::{GammaPrior, ModelKind, ModelSpec};
use coxcontract_core::pointprocess::{FilterFamily, FilterSpec, RateFamily};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: key `{key}` given twice with different values")]
    Duplicate { line: usize, key: String },
    #[error("missing required field `{0}`")]
    Missing(String),
    #[error("field `{key}`: cannot parse {value:?} ({reason})")]
    Invalid { key: String, value: String, reason: String },
    #[error("unknown field `{0}`")]
    Unknown(String),
    #[error("field `{key}`: {source}")]
    Model {
        key: String,
        #[source]
        source: coxcontract_core::Error,
    },
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

type Result<T> = std::result::Result<T, ConfigError>;

/// Parsed key/value pairs in key order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                text: raw.to_string(),
            })?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() || k.contains(char::is_whitespace) {
                return Err(ConfigError::Syntax {
                    line: i + 1,
                    text: raw.to_string(),
                });
            }
            if let Some(prev) = entries.insert(k.to_string(), v.to_string()) {
                if prev != v {
                    return Err(ConfigError::Duplicate {
                        line: i + 1,
                        key: k.to_string(),
                    });
                }
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), value.into());
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Entries under `prefix.` with the prefix stripped.
    pub fn section<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = (&'a str, &'a str)> + 'a {
        self.entries.iter().filter_map(move |(k, v)| {
            k.strip_prefix(prefix)
                .and_then(|rest| rest.strip_prefix('.'))
                .map(|rest| (rest, v.as_str()))
        })
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|v| {
                v.parse::<T>().map_err(|e| ConfigError::Invalid {
                    key: key.to_string(),
                    value: v.to_string(),
                    reason: e.to_string(),
                })
            })
            .transpose()
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)?.ok_or_else(|| ConfigError::Missing(key.to_string()))
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        let Some(v) = self.raw(key) else { return Ok(None) };
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<T>().map_err(|e| ConfigError::Invalid {
                    key: key.to_string(),
                    value: v.to_string(),
                    reason: e.to_string(),
                })
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    /// SHA-256 of the canonical `key=value` lines, as hex.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in &self.entries {
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }
}

fn invalid(key: &str, value: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        value: value.to_string(),
        reason: reason.into(),
    }
}

fn model_err(key: &str) -> impl FnOnce(coxcontract_core::Error) -> ConfigError + '_ {
    move |source| ConfigError::Model {
        key: key.to_string(),
        source,
    }
}

pub fn parse_model_kind(key: &str, v: &str) -> Result<ModelKind> {
    match v.to_ascii_lowercase().as_str() {
        "sgcp" => Ok(ModelKind::Sgcp),
        "qgcp" => Ok(ModelKind::Qgcp),
        _ => Err(invalid(key, v, "expected sgcp or qgcp")),
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(invalid(key, v, "expected true or false")),
    }
}

/// Parses one filter item: `constant:p`, `sinusoidal:a,f,c` or
/// `piecewise:b1 b2/l1 l2 l3`.
pub fn parse_filter(key: &str, item: &str) -> Result<FilterSpec> {
    let item = item.trim();
    let (name, args) = item.split_once(':').ok_or_else(|| invalid(key, item, "expected name:arguments"))?;
    let nums = |s: &str| -> Result<Vec<f64>> {
        s.split([',', ' '])
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<f64>().map_err(|e| invalid(key, item, e.to_string())))
            .collect()
    };
    match name.trim() {
        "constant" => {
            let v = nums(args)?;
            if v.len() != 1 {
                return Err(invalid(key, item, "constant takes one level"));
            }
            FilterSpec::constant(v[0]).map_err(model_err(key))
        }
        "sinusoidal" => {
            let v = nums(args)?;
            if v.len() != 3 {
                return Err(invalid(key, item, "sinusoidal takes amplitude, frequency, offset"));
            }
            FilterSpec::sinusoidal(v[0], v[1], v[2]).map_err(model_err(key))
        }
        "piecewise" => {
            let (b, l) = args.split_once('/').ok_or_else(|| invalid(key, item, "piecewise takes breakpoints/levels"))?;
            FilterSpec::piecewise(nums(b)?, nums(l)?).map_err(model_err(key))
        }
        other => Err(invalid(key, item, format!("unknown filter `{other}`"))),
    }
}

/// Fully resolved experiment settings.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub raw: RawConfig,
    pub model: ModelSpec,
    pub lamstar_prior: GammaPrior,
    pub grid: Grid,
    pub lambda0_family: RateFamily,
    pub filters: FilterFamily,
    /// Number of realisations for `simulate` and `fit`.
    pub n: usize,
    pub schedule: Vec<u64>,
    pub big_m: f64,
    pub alpha: f64,
    pub mcmc: McmcConfig,
    pub replications: usize,
    pub output_dir: PathBuf,
    pub root_seed: u64,
    pub models: Vec<ModelKind>,
}

pub const KNOWN_PREFIXES: [&str; 9] = ["model.", "grid.", "lambda0.", "filters.", "mcmc.", "sbc.", "check.", "ledger.", "plot."];
pub const KNOWN_KEYS: [&str; 9] = ["seed", "output_dir", "n", "schedule", "M", "alpha", "replications", "contract.models", "fit.data"];

impl ExperimentConfig {
    pub fn from_raw(raw: RawConfig) -> Result<Self> {
        for k in raw.keys() {
            if !KNOWN_KEYS.contains(&k) && !KNOWN_PREFIXES.iter().any(|p| k.starts_with(p)) {
                return Err(ConfigError::Unknown(k.to_string()));
            }
        }
        let kind = parse_model_kind("model.kind", raw.raw("model.kind").unwrap_or("sgcp"))?;
        let grid = Grid::new(raw.get_or("grid.d", 1usize)?, raw.get_or("grid.m", 32usize)?).map_err(model_err("grid"))?;
        let lp = LengthscalePrior::new(raw.get_or("model.lengthscale_shape", 2.0)?, raw.get_or("model.lengthscale_rate", 0.25)?)
            .map_err(model_err("model.lengthscale_shape"))?;
        let lamstar = GammaPrior::new(raw.get_or("model.lamstar_shape", 4.0)?, raw.get_or("model.lamstar_rate", 1.0)?)
            .map_err(model_err("model.lamstar_shape"))?;
        let mut model = match kind {
            ModelKind::Sgcp => ModelSpec::sgcp(lamstar, lp),
            ModelKind::Qgcp => ModelSpec::qgcp(lp),
        };
        if let Some(j) = raw.get::<f64>("model.jitter")? {
            model.kernel_jitter = j;
        }
        model.validate().map_err(model_err("model"))?;

        let fam = raw.raw("lambda0.family").unwrap_or("sin_squared");
        let lambda0_family = match fam {
            "constant" => RateFamily::Constant(raw.get_or("lambda0.value", 1.0)?),
            "linear" => RateFamily::Linear {
                intercept: raw.get_or("lambda0.intercept", 1.0)?,
                slope: raw.get_or("lambda0.slope", 1.0)?,
            },
            "sin_squared" => RateFamily::SinSquared {
                base: raw.get_or("lambda0.base", 2.0)?,
                amplitude: raw.get_or("lambda0.amplitude", 1.0)?,
                frequency: raw.get_or("lambda0.frequency", 1.0)?,
            },
            other => return Err(invalid("lambda0.family", other, "expected constant, linear or sin_squared")),
        };
        lambda0_family.on_grid(grid).map_err(model_err("lambda0"))?;

        let filters = match raw.raw("filters.family").unwrap_or("alternating") {
            "alternating" => {
                let levels = raw.list::<f64>("filters.levels")?.unwrap_or_else(|| vec![1.0, 0.5]);
                FilterFamily::alternating(&levels).map_err(model_err("filters.levels"))?
            }
            "cycle" => {
                let items = raw.raw("filters.cycle").ok_or_else(|| ConfigError::Missing("filters.cycle".into()))?;
                let specs = items
                    .split(';')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| parse_filter("filters.cycle", s))
                    .collect::<Result<Vec<_>>>()?;
                FilterFamily::cycle(specs).map_err(model_err("filters.cycle"))?
            }
            other => return Err(invalid("filters.family", other, "expected alternating or cycle")),
        };

        let defaults = McmcConfig::default();
        let mcmc = McmcConfig {
            iterations: raw.get_or("mcmc.iterations", defaults.iterations)?,
            burn_in: raw.get_or("mcmc.burn_in", defaults.burn_in)?,
            thin: raw.get_or("mcmc.thin", defaults.thin)?,
            chains: raw.get_or("mcmc.chains", defaults.chains)?,
            ellipse_max_shrink: raw.get_or("mcmc.ellipse_max_shrink", defaults.ellipse_max_shrink)?,
            lengthscale_step: raw.get_or("mcmc.lengthscale_step", defaults.lengthscale_step)?,
            lamstar_step: raw.get_or("mcmc.lamstar_step", defaults.lamstar_step)?,
            seed: 0,
            adapt: raw.raw("mcmc.adapt").map(|v| parse_bool("mcmc.adapt", v)).transpose()?.unwrap_or(true),
            update_lengthscale: raw
                .raw("mcmc.update_lengthscale")
                .map(|v| parse_bool("mcmc.update_lengthscale", v))
                .transpose()?
                .unwrap_or(true),
        };
        mcmc.validate().map_err(model_err("mcmc"))?;

        let schedule = raw.list::<u64>("schedule")?.unwrap_or_else(|| vec![4, 8, 16, 32, 64]);
        if schedule.is_empty() || schedule.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("schedule", raw.raw("schedule").unwrap_or(""), "must be nonempty and strictly increasing"));
        }
        let models = match raw.raw("contract.models") {
            Some(v) => v
                .split(',')
                .map(|s| parse_model_kind("contract.models", s.trim()))
                .collect::<Result<Vec<_>>>()?,
            None => vec![kind],
        };
        let replications: usize = raw.get_or("replications", 10)?;
        if replications == 0 {
            return Err(invalid("replications", "0", "must be at least 1"));
        }
        Ok(Self {
            model,
            lamstar_prior: lamstar,
            grid,
            lambda0_family,
            filters,
            n: raw.get_or("n", 16)?,
            schedule,
            big_m: raw.get_or("M", 1.0)?,
            alpha: raw.get_or("alpha", 1.0)?,
            mcmc,
            replications,
            output_dir: raw.get_or("output_dir", PathBuf::from("out"))?,
            root_seed: raw.get_or("seed", 0u64)?,
            models,
            raw,
        })
    }

    pub fn lambda0(&self) -> GridField {
        self.lambda0_family.on_grid(self.grid).expect("validated when the config was built")
    }

    /// Model spec for `kind` sharing this config's priors.
    pub fn model_for(&self, kind: ModelKind) -> ModelSpec {
        let mut m = match kind {
            ModelKind::Sgcp => ModelSpec::sgcp(self.lamstar_prior, self.model.lengthscale_prior),
            ModelKind::Qgcp => ModelSpec::qgcp(self.model.lengthscale_prior),
        };
        m.kernel_jitter = self.model.kernel_jitter;
        m
    }

    pub fn sbc(&self) -> Result<SbcConfig> {
        let d = SbcConfig::default();
        Ok(SbcConfig {
            replications: self.raw.get_or("sbc.replications", d.replications)?,
            draws: self.raw.get_or("sbc.draws", d.draws)?,
            bins: self.raw.get_or("sbc.bins", d.bins)?,
            seed: self.root_seed,
        })
    }

    pub fn sbc_enabled(&self) -> Result<bool> {
        self.raw.raw("sbc.enabled").map(|v| parse_bool("sbc.enabled", v)).transpose().map(|v| v.unwrap_or(false))
    }

    /// Ledger from `check.ledger` (a file of plain keys) overlaid with
    /// `ledger.*` entries; missing constants fall back to the documented
    /// example defaults when `fill_defaults` is set.
    pub fn ledger(&self, fill_defaults: bool) -> Result<ConstantLedger> {
        let mut merged = RawConfig::default();
        if let Some(path) = self.raw.raw("check.ledger") {
            let file = RawConfig::load(Path::new(path))?;
            for (k, v) in file.entries {
                merged.entries.insert(k, v);
            }
        }
        for (k, v) in self.raw.section("ledger") {
            merged.entries.insert(k.to_string(), v.to_string());
        }
        let alpha = merged.get::<f64>("alpha")?.unwrap_or(self.alpha);
        let d = merged.get::<usize>("d")?.unwrap_or(self.grid.d());
        let lam0 = self.lambda0();
        let mut ledger = if fill_defaults {
            let mut l = ConstantLedger::example(alpha, d, lam0.max().sqrt());
            l.set(Constant::SupLambda0, lam0.max()).map_err(model_err("ledger.sup_lambda0"))?;
            l.set(Constant::Lambda0Min, lam0.min().max(f64::MIN_POSITIVE))
                .map_err(model_err("ledger.lambda0_min"))?;
            l
        } else {
            ConstantLedger::new()
        };
        ledger.set(Constant::Alpha, alpha).map_err(model_err("alpha"))?;
        ledger.set(Constant::D, d as f64).map_err(model_err("d"))?;
        for (k, v) in merged.entries.iter() {
            match k.as_str() {
                "variant" => ledger.variant = parse_variant(k, v)?,
                "sgcp8_exponent" => {
                    ledger.tail_exponent = TailExponent::parse(v).ok_or_else(|| invalid(k, v, "expected rho_rate or kappa_tail"))?
                }
                _ => {
                    let c = Constant::from_key(k).ok_or_else(|| ConfigError::Unknown(format!("ledger.{k}")))?;
                    let x: f64 = v.parse().map_err(|e: std::num::ParseFloatError| invalid(k, v, e.to_string()))?;
                    ledger.set(c, x).map_err(model_err(k))?;
                }
            }
        }
        Ok(ledger)
    }
}

pub fn parse_variant(key: &str, v: &str) -> Result<Variant> {
    Variant::parse(&v.to_ascii_lowercase()).ok_or_else(|| invalid(key, v, "expected appendix or maintext"))
}
