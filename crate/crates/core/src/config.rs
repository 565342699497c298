//! Flat `key = value` run configuration shared by every command.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{MixtureParameters, PriorSpec, RescaleSpec};
use crate::sampler::SamplerConfig;
use crate::simulation::{ItemGenerator, SimulationDesign};

/// Every setting of a run. Unset optional fields fall back to the defaults
/// of [`PriorSpec::defaults`], [`SamplerConfig::default`] and the preset.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub k: Option<usize>,

    pub mu_a: Option<f64>,
    pub sigma2_a: Option<f64>,
    pub mu_b: Option<f64>,
    pub sigma2_b: Option<f64>,
    pub alpha_c: Option<f64>,
    pub beta_c: Option<f64>,
    pub c_lower: Option<f64>,
    pub c_upper: Option<f64>,
    pub alphas: Option<Vec<f64>>,
    pub nig_m: Option<Vec<f64>>,
    pub nig_beta: Option<f64>,
    pub nig_d: Option<f64>,
    pub nig_e: Option<f64>,

    pub iterations: Option<usize>,
    pub burn_in: Option<usize>,
    pub thin: Option<usize>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub rejection_max_attempts: Option<u64>,
    pub warmup: Option<usize>,

    pub rescale_mean: Option<f64>,
    pub rescale_sd: Option<f64>,

    pub preset: Option<String>,
    pub n_individuals: Option<usize>,
    pub n_items: Option<usize>,
    pub missing_rate: Option<f64>,
    pub weights: Option<Vec<f64>>,
    pub means: Option<Vec<f64>>,
    pub variances: Option<Vec<f64>>,
}

/// Every key [`RunConfig::set`] accepts, in file order.
pub const KEYS: [&str; 32] = [
    "input",
    "output",
    "k",
    "mu_a",
    "sigma2_a",
    "mu_b",
    "sigma2_b",
    "alpha_c",
    "beta_c",
    "c_lower",
    "c_upper",
    "alphas",
    "nig_m",
    "nig_beta",
    "nig_d",
    "nig_e",
    "iterations",
    "burn_in",
    "thin",
    "seed",
    "workers",
    "rejection_max_attempts",
    "warmup",
    "rescale_mean",
    "rescale_sd",
    "preset",
    "n_individuals",
    "n_items",
    "missing_rate",
    "weights",
    "means",
    "variances",
];

pub const DEFAULT_K: usize = 2;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_PRESET: &str = "study1";

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| Error::Config(format!("{key}: cannot parse '{value}': {e}")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn join(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Sets one field from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "input" => self.input = Some(PathBuf::from(v)),
            "output" => self.output = Some(PathBuf::from(v)),
            "k" => self.k = Some(parse(key, v)?),
            "mu_a" => self.mu_a = Some(parse(key, v)?),
            "sigma2_a" => self.sigma2_a = Some(parse(key, v)?),
            "mu_b" => self.mu_b = Some(parse(key, v)?),
            "sigma2_b" => self.sigma2_b = Some(parse(key, v)?),
            "alpha_c" => self.alpha_c = Some(parse(key, v)?),
            "beta_c" => self.beta_c = Some(parse(key, v)?),
            "c_lower" => self.c_lower = Some(parse(key, v)?),
            "c_upper" => self.c_upper = Some(parse(key, v)?),
            "alphas" => self.alphas = Some(parse_list(key, v)?),
            "nig_m" => self.nig_m = Some(parse_list(key, v)?),
            "nig_beta" => self.nig_beta = Some(parse(key, v)?),
            "nig_d" => self.nig_d = Some(parse(key, v)?),
            "nig_e" => self.nig_e = Some(parse(key, v)?),
            "iterations" => self.iterations = Some(parse(key, v)?),
            "burn_in" => self.burn_in = Some(parse(key, v)?),
            "thin" => self.thin = Some(parse(key, v)?),
            "seed" => self.seed = Some(parse(key, v)?),
            "workers" => self.workers = Some(parse(key, v)?),
            "rejection_max_attempts" => self.rejection_max_attempts = Some(parse(key, v)?),
            "warmup" => self.warmup = Some(parse(key, v)?),
            "rescale_mean" => self.rescale_mean = Some(parse(key, v)?),
            "rescale_sd" => self.rescale_sd = Some(parse(key, v)?),
            "preset" => self.preset = Some(v.to_string()),
            "n_individuals" => self.n_individuals = Some(parse(key, v)?),
            "n_items" => self.n_items = Some(parse(key, v)?),
            "missing_rate" => self.missing_rate = Some(parse(key, v)?),
            "weights" => self.weights = Some(parse_list(key, v)?),
            "means" => self.means = Some(parse_list(key, v)?),
            "variances" => self.variances = Some(parse_list(key, v)?),
            other => return Err(Error::Config(format!("unknown configuration key '{other}'"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines. Blank lines and `#` comments are skipped.
    pub fn parse_str(text: &str, origin: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                location: format!("{origin}:{}", n + 1),
                message: format!("expected key = value, got '{line}'"),
            })?;
            cfg.set(key.trim(), value).map_err(|e| Error::Parse {
                location: format!("{origin}:{}", n + 1),
                message: e.to_string(),
            })?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_str(&text, &path.display().to_string())
    }

    /// Fields set in `other` replace those in `self`.
    pub fn merge(&mut self, other: &RunConfig) {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f.clone(); } )* };
        }
        take!(
            input,
            output,
            k,
            mu_a,
            sigma2_a,
            mu_b,
            sigma2_b,
            alpha_c,
            beta_c,
            c_lower,
            c_upper,
            alphas,
            nig_m,
            nig_beta,
            nig_d,
            nig_e,
            iterations,
            burn_in,
            thin,
            seed,
            workers,
            rejection_max_attempts,
            warmup,
            rescale_mean,
            rescale_sd,
            preset,
            n_individuals,
            n_items,
            missing_rate,
            weights,
            means,
            variances
        );
    }

    pub fn k(&self) -> usize {
        self.k.unwrap_or(DEFAULT_K)
    }

    pub fn priors(&self) -> Result<PriorSpec> {
        let k = self.k();
        let mut p = PriorSpec::defaults(k);
        macro_rules! over {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { p.$f = v; } )* };
        }
        over!(mu_a, sigma2_a, mu_b, sigma2_b, alpha_c, beta_c, nig_beta, nig_d, nig_e);
        if let Some(a) = &self.alphas {
            p.alphas = a.clone();
        }
        if let Some(m) = &self.nig_m {
            p.nig_m = m.clone();
        }
        p.c_bounds = match (self.c_lower, self.c_upper) {
            (None, None) => None,
            (lo, hi) => Some((lo.unwrap_or(0.0), hi.unwrap_or(1.0))),
        };
        p.validate(k)?;
        Ok(p)
    }

    pub fn sampler(&self) -> Result<SamplerConfig> {
        let d = SamplerConfig::default();
        let c = SamplerConfig {
            iterations: self.iterations.unwrap_or(d.iterations),
            burn_in: self.burn_in.unwrap_or(d.burn_in),
            thin: self.thin.unwrap_or(d.thin),
            seed: self.seed.unwrap_or(DEFAULT_SEED),
            parallel_workers: self.workers.unwrap_or(d.parallel_workers),
            rejection_max_attempts: self.rejection_max_attempts.unwrap_or(d.rejection_max_attempts),
            warmup: self.warmup.unwrap_or(d.warmup),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn rescale(&self) -> Result<Option<RescaleSpec>> {
        match (self.rescale_mean, self.rescale_sd) {
            (None, None) => Ok(None),
            (Some(m), Some(s)) => RescaleSpec::new(m, s).map(Some),
            _ => Err(Error::Config(
                "rescale_mean and rescale_sd must be given together".into(),
            )),
        }
    }

    /// The preset design, with any size, missingness, mixture and item
    /// generator overrides applied.
    pub fn design(&self) -> Result<SimulationDesign> {
        let preset = self.preset.as_deref().unwrap_or(DEFAULT_PRESET);
        let mut d = SimulationDesign::preset(preset, self.seed.unwrap_or(DEFAULT_SEED))?;
        if let Some(n) = self.n_individuals {
            d.n_individuals = n;
        }
        if let Some(n) = self.n_items {
            d.n_items = n;
        }
        if let Some(r) = self.missing_rate {
            d.missing_rate = r;
        }
        match (&self.weights, &self.means, &self.variances) {
            (None, None, None) => {}
            (Some(p), Some(m), Some(v)) => {
                d.mixture = MixtureParameters::unidentified(p.clone(), m.clone(), v.clone())?;
            }
            _ => {
                return Err(Error::Config(
                    "weights, means and variances must be given together".into(),
                ))
            }
        }
        let mut gen = ItemGenerator::default();
        macro_rules! over {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { gen.$f = v; } )* };
        }
        over!(mu_a, sigma2_a, mu_b, sigma2_b, alpha_c, beta_c);
        d.items = gen;
        d.validate()?;
        Ok(d)
    }

    /// The fields that are set, as `key=value` lines.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k}={v}");
        };
        macro_rules! scalar {
            ($($f:ident),*) => { $( if let Some(v) = &self.$f { put(stringify!($f), v.to_string()); } )* };
        }
        macro_rules! list {
            ($($f:ident),*) => { $( if let Some(v) = &self.$f { put(stringify!($f), join(v)); } )* };
        }
        if let Some(p) = &self.input {
            put("input", p.display().to_string());
        }
        if let Some(p) = &self.output {
            put("output", p.display().to_string());
        }
        scalar!(k, mu_a, sigma2_a, mu_b, sigma2_b, alpha_c, beta_c, c_lower, c_upper);
        list!(alphas, nig_m);
        scalar!(
            nig_beta,
            nig_d,
            nig_e,
            iterations,
            burn_in,
            thin,
            seed,
            workers,
            rejection_max_attempts,
            warmup,
            rescale_mean,
            rescale_sd,
            preset,
            n_individuals,
            n_items,
            missing_rate
        );
        list!(weights, means, variances);
        out
    }
}
