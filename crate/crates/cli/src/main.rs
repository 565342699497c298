//! `mixirt`: simulate response data, fit the mixture model and summarize
//! stored draws.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use mixirt::config::RunConfig;
use mixirt::diagnostics::{self, density_export, p1_evidence, rmsd, summarize, DrawTable};
use mixirt::io;
use mixirt::model::{rescale_draw, RescaleSpec};
use mixirt::sampler::{run_chain, ChainOutput};
use mixirt::simulation::simulate_dataset;

const WORKERS_ENV: &str = "MIXIRT_WORKERS";

/// Which stage failed, which decides the exit code.
#[derive(Debug)]
enum Failure {
    Input(String),
    Sampler(String),
    Postprocess(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Sampler(_) => 3,
            Failure::Postprocess(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Sampler(m) | Failure::Postprocess(m) => m,
        }
    }
}

fn input(e: impl std::fmt::Display) -> Failure {
    Failure::Input(e.to_string())
}

fn post(e: impl std::fmt::Display) -> Failure {
    Failure::Postprocess(e.to_string())
}

macro_rules! settings {
    ($($field:ident => $help:literal),* $(,)?) => {
        /// Run settings. Every flag has a `key = value` counterpart in the
        /// configuration file, and flags take precedence over the file.
        #[derive(Args, Debug, Default)]
        struct Settings {
            /// key = value configuration file
            #[arg(long, value_name = "PATH")]
            config: Option<PathBuf>,
            $(
                #[doc = $help]
                #[arg(long, value_name = "VALUE", help_heading = "Settings")]
                $field: Option<String>,
            )*
        }

        impl Settings {
            fn pairs(&self) -> Vec<(&'static str, &str)> {
                let mut out = Vec::new();
                $( if let Some(v) = &self.$field { out.push((stringify!($field), v.as_str())); } )*
                out
            }
        }
    };
}

settings! {
    input => "Response matrix (fit) or fit output directory (summarize)",
    output => "Output directory",
    k => "Number of mixture components",
    mu_a => "Prior mean of the discriminations",
    sigma2_a => "Prior variance of the discriminations",
    mu_b => "Prior mean of the difficulties",
    sigma2_b => "Prior variance of the difficulties",
    alpha_c => "First Beta parameter of the guessing prior",
    beta_c => "Second Beta parameter of the guessing prior",
    c_lower => "Lower truncation point of the guessing prior",
    c_upper => "Upper truncation point of the guessing prior",
    alphas => "Dirichlet parameters of the weights, comma separated",
    nig_m => "Prior means of components 2..K, comma separated",
    nig_beta => "Precision multiplier of the component-mean prior",
    nig_d => "Inverse-gamma shape of the component variances",
    nig_e => "Inverse-gamma scale of the component variances",
    iterations => "Number of sweeps",
    burn_in => "Sweeps discarded before retention starts",
    thin => "Keep every thin-th sweep after burn-in",
    seed => "Random seed",
    workers => "Worker threads [default: $MIXIRT_WORKERS or 1]",
    rejection_max_attempts => "Proposal budget of the rejection steps",
    warmup => "Sweeps of the single-normal warm-up chain, 0 to disable",
    rescale_mean => "Target mean for rescaled abilities",
    rescale_sd => "Target sd for rescaled abilities",
    preset => "Simulation design: study1, study2, study3 or normal",
    n_individuals => "Simulated individuals",
    n_items => "Simulated items",
    missing_rate => "Probability that a simulated cell is missing",
    weights => "True mixture weights, comma separated",
    means => "True component means, comma separated",
    variances => "True component variances, comma separated",
}

impl Settings {
    /// The configuration file overlaid with the flags, then the worker
    /// default from the environment.
    fn resolve(&self) -> Result<RunConfig, Failure> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path).map_err(input)?,
            None => RunConfig::default(),
        };
        let mut flags = RunConfig::default();
        for (key, value) in self.pairs() {
            flags
                .set(key, value)
                .map_err(|e| input(format!("--{}: {e}", key.replace('_', "-"))))?;
        }
        cfg.merge(&flags);
        if cfg.workers.is_none() {
            if let Ok(v) = std::env::var(WORKERS_ENV) {
                cfg.set("workers", &v)
                    .map_err(|e| input(format!("{WORKERS_ENV}: {e}")))?;
            }
        }
        Ok(cfg)
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "mixirt",
    version,
    about = "Normal-mixture ability model for binary item responses"
)]
struct Cli {
    /// Log progress to stderr
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a response matrix and its true parameters
    Simulate(Settings),
    /// Fit the model to a response matrix
    Fit(Settings),
    /// Recompute summaries, densities and traces from stored draws
    Summarize {
        #[command(flatten)]
        settings: Settings,
        /// Second fit directory; reports the RMSD between ability means
        #[arg(long, value_name = "DIR")]
        compare: Option<PathBuf>,
        /// Keep every n-th retained draw in trace.csv
        #[arg(long, value_name = "N", default_value_t = 1)]
        trace_every: usize,
    },
}

fn output_dir(cfg: &RunConfig) -> Result<PathBuf, Failure> {
    let dir = cfg
        .output
        .clone()
        .ok_or_else(|| input("an output directory is required (--output)"))?;
    io::ensure_dir(&dir).map_err(input)
}

fn simulate(settings: &Settings) -> Result<(), Failure> {
    let cfg = settings.resolve()?;
    let design = cfg.design().map_err(input)?;
    let dir = output_dir(&cfg)?;
    let data = simulate_dataset(&design).map_err(input)?;
    io::write_responses(&dir.join(io::RESPONSES), &data.responses).map_err(post)?;
    io::write_truth(&dir, &data.truth).map_err(post)?;
    println!(
        "simulated {} individuals x {} items ({} observed cells) into {}",
        data.responses.n_individuals(),
        data.responses.n_items(),
        data.responses.observed_count(),
        dir.display()
    );
    Ok(())
}

fn rescaled_theta(chain: &ChainOutput, spec: &RescaleSpec) -> Vec<(usize, Vec<f64>)> {
    chain
        .draws
        .iter()
        .map(|d| (d.iteration, rescale_draw(&d.theta, &d.mixture, spec)))
        .collect()
}

fn fit(settings: &Settings) -> Result<(), Failure> {
    let cfg = settings.resolve()?;
    let path = cfg
        .input
        .clone()
        .ok_or_else(|| input("a response file is required (--input)"))?;
    let k = cfg.k();
    let priors = cfg.priors().map_err(input)?;
    let sampler = cfg.sampler().map_err(input)?;
    let rescale = cfg.rescale().map_err(input)?;
    let y = io::read_responses(&path).map_err(input)?;
    let dir = output_dir(&cfg)?;
    info!(
        "fitting K = {k} to {} individuals x {} items, {} sweeps",
        y.n_individuals(),
        y.n_items(),
        sampler.iterations
    );

    let chain = run_chain(&y, &priors, k, &sampler).map_err(|e| Failure::Sampler(e.to_string()))?;

    io::write_draws(&dir, &chain).map_err(post)?;
    if let Some(spec) = &rescale {
        let rows = rescaled_theta(&chain, spec);
        io::write_theta(
            &dir.join(io::DRAWS_THETA_RESCALED),
            chain.n_individuals(),
            rows.into_iter(),
        )
        .map_err(post)?;
    }
    let summary = summarize(&chain).map_err(post)?;
    io::write_summary(&dir.join(io::SUMMARY), &summary).map_err(post)?;

    let mut meta = io::chain_meta(&chain);
    meta.push(("input".into(), path.display().to_string()));
    for line in cfg.to_key_values().lines() {
        if let Some((key, value)) = line.split_once('=') {
            if key != "input" && key != "output" {
                meta.push((format!("config.{key}"), value.to_string()));
            }
        }
    }
    if k > 1 {
        let e = p1_evidence(&chain).map_err(post)?;
        meta.push(("p1_mean".into(), io::fmt_f64(e.mean)));
        meta.push(("p1_prob_below_0_9".into(), io::fmt_f64(e.prob_below_0_9)));
    }
    io::write_meta(&dir.join(io::META), &meta).map_err(post)?;

    println!(
        "kept {} draws; mixture mean {:.4}, variance {:.4}; wrote {}",
        chain.draws.len(),
        summary.get("mixture_mean").map_or(f64::NAN, |p| p.mean),
        summary.get("mixture_var").map_or(f64::NAN, |p| p.mean),
        dir.display()
    );
    Ok(())
}

fn load_chain(dir: &Path) -> Result<ChainOutput, Failure> {
    let chain = io::read_chain(dir).map_err(|e| match e {
        mixirt::Error::Io { .. } | mixirt::Error::Parse { .. } => input(e),
        other => post(other),
    })?;
    if chain.draws.len() < diagnostics::MIN_DRAWS {
        return Err(post(format!(
            "{} holds {} draws, at least {} are needed",
            dir.display(),
            chain.draws.len(),
            diagnostics::MIN_DRAWS
        )));
    }
    Ok(chain)
}

fn summarize_cmd(settings: &Settings, compare: Option<&Path>, trace_every: usize) -> Result<(), Failure> {
    let cfg = settings.resolve()?;
    let src = cfg
        .input
        .clone()
        .ok_or_else(|| input("a fit output directory is required (--input)"))?;
    let dir = match &cfg.output {
        Some(d) => io::ensure_dir(d).map_err(input)?,
        None => src.clone(),
    };
    if trace_every == 0 {
        return Err(input("--trace-every must be at least 1"));
    }
    let rescale = cfg.rescale().map_err(input)?;
    let chain = load_chain(&src)?;

    let summary = summarize(&chain).map_err(post)?;
    io::write_summary(&dir.join(io::SUMMARY), &summary).map_err(post)?;

    let means = match &rescale {
        Some(spec) => {
            let rows = rescaled_theta(&chain, spec);
            let mut m = vec![0.0; chain.n_individuals()];
            for (_, t) in &rows {
                m.iter_mut().zip(t).for_each(|(a, b)| *a += b);
            }
            m.iter_mut().for_each(|a| *a /= rows.len() as f64);
            m
        }
        None => chain.theta_means(),
    };
    if means.len() >= diagnostics::MIN_DENSITY_SAMPLE {
        let density = density_export(&means, None).map_err(post)?;
        io::write_density(&dir.join(io::DENSITY), &density).map_err(post)?;
    } else {
        log::warn!("{} abilities are too few for a density estimate", means.len());
    }

    let table = DrawTable::from_chain(&chain);
    let keep: Vec<usize> = (0..table.names.len())
        .filter(|&i| !table.names[i].starts_with("theta_"))
        .collect();
    let columns: Vec<Vec<f64>> = keep.iter().map(|&i| table.columns[i].clone()).collect();
    let names: Vec<String> = keep.iter().map(|&i| table.names[i].clone()).collect();
    let (rows, thinned) = diagnostics::thin_trace(&columns, trace_every);
    let iterations: Vec<usize> = rows.iter().map(|&r| chain.draws[r].iteration).collect();
    io::write_trace(&dir.join(io::TRACE), &iterations, &names, &thinned).map_err(post)?;

    if chain.k > 1 {
        let e = p1_evidence(&chain).map_err(post)?;
        println!(
            "p_1: mean {:.4}, 95% interval ({:.4}, {:.4}), P(p_1 < 0.9) = {:.4}",
            e.mean, e.q025, e.q975, e.prob_below_0_9
        );
    }
    if let Some(other) = compare {
        let second = load_chain(other)?;
        let d = rmsd(&chain.theta_means(), &second.theta_means()).map_err(post)?;
        io::write_meta(
            &dir.join("comparison.txt"),
            &[
                ("first".into(), src.display().to_string()),
                ("second".into(), other.display().to_string()),
                ("rmsd".into(), io::fmt_f64(d)),
            ],
        )
        .map_err(post)?;
        println!("RMSD between ability means: {d:.4}");
    }
    println!("summarized {} draws into {}", chain.draws.len(), dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match &cli.command {
        Command::Simulate(s) => simulate(s),
        Command::Fit(s) => fit(s),
        Command::Summarize {
            settings,
            compare,
            trace_every,
        } => summarize_cmd(settings, compare.as_deref(), *trace_every),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("mixirt: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
