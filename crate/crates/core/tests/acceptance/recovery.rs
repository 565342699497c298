//! Desk-scale simulation studies: 2000 individuals, 40 items, 20 000 sweeps
//! with 10 000 burn-in.

use std::sync::OnceLock;

use mixirt::diagnostics::{
    density_export, local_maxima, posterior_mixture_density, quantile_sorted, rmse, summarize, Grid, PosteriorSummary,
};
use mixirt::model::{mixture_mean, mixture_sd, PriorSpec, RescaleSpec};
use mixirt::sampler::{run_chain, ChainOutput, SamplerConfig};
use mixirt::simulation::{simulate_dataset, SimulatedData, SimulationDesign};
use mixirt::Result;

use super::common::Outcome;

const J: usize = 2000;
const I: usize = 40;
const SEED: u64 = 2024;
const MIXTURE_MEAN: f64 = 0.5;
const MIXTURE_VAR: f64 = 1.85;

pub fn sampler_config(seed: u64) -> SamplerConfig {
    SamplerConfig {
        iterations: 20_000,
        burn_in: 10_000,
        thin: 5,
        seed,
        parallel_workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
        ..SamplerConfig::default()
    }
}

pub struct Fit {
    pub data: SimulatedData,
    pub chain: ChainOutput,
    pub summary: PosteriorSummary,
}

fn fit(design: &SimulationDesign, k: usize) -> Result<Fit> {
    let data = simulate_dataset(design)?;
    let chain = run_chain(
        &data.responses,
        &PriorSpec::defaults(k),
        k,
        &sampler_config(design.seed + 1),
    )?;
    let summary = summarize(&chain)?;
    Ok(Fit { data, chain, summary })
}

fn cached(
    cell: &'static OnceLock<std::result::Result<Fit, String>>,
    make: impl FnOnce() -> Result<Fit>,
) -> std::result::Result<&'static Fit, String> {
    cell.get_or_init(|| make().map_err(|e| e.to_string()))
        .as_ref()
        .map_err(Clone::clone)
}

fn study1_mixture() -> std::result::Result<&'static Fit, String> {
    static CELL: OnceLock<std::result::Result<Fit, String>> = OnceLock::new();
    cached(&CELL, || fit(&SimulationDesign::study1(SEED).with_size(J, I), 2))
}

fn study1_normal() -> std::result::Result<&'static Fit, String> {
    static CELL: OnceLock<std::result::Result<Fit, String>> = OnceLock::new();
    cached(&CELL, || fit(&SimulationDesign::study1(SEED).with_size(J, I), 1))
}

fn interval(s: &PosteriorSummary, name: &str) -> (f64, f64) {
    let p = s.get(name).expect("summary has mixture moments");
    (p.q025, p.q975)
}

fn covers((lo, hi): (f64, f64), v: f64) -> bool {
    lo <= v && v <= hi
}

/// Coverage of the analytic mixture mean and variance.
fn coverage(s: &PosteriorSummary) -> (bool, String) {
    let m = interval(s, "mixture_mean");
    let v = interval(s, "mixture_var");
    (
        covers(m, MIXTURE_MEAN) && covers(v, MIXTURE_VAR),
        format!(
            "mean CI ({:.3}, {:.3}) vs {MIXTURE_MEAN}, variance CI ({:.3}, {:.3}) vs {MIXTURE_VAR}",
            m.0, m.1, v.0, v.1
        ),
    )
}

/// Posterior means of the abilities after mapping every draw to the true
/// mixture's mean and sd.
fn rescaled_means(chain: &ChainOutput, spec: &RescaleSpec) -> Vec<f64> {
    let mut out = vec![0.0; chain.n_individuals()];
    for d in &chain.draws {
        for (o, t) in out
            .iter_mut()
            .zip(mixirt::model::rescale_draw(&d.theta, &d.mixture, spec))
        {
            *o += t;
        }
    }
    let n = chain.draws.len() as f64;
    out.iter_mut().for_each(|o| *o /= n);
    out
}

/// Posterior mean of the fitted ability density after mapping every draw to
/// the mean and sd of `spec`.
fn rescaled_mixture_density(chain: &ChainOutput, spec: &RescaleSpec, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for d in &chain.draws {
        let (m, s) = (mixture_mean(&d.mixture), mixture_sd(&d.mixture));
        let ratio = s / spec.sd;
        for (o, &v) in out.iter_mut().zip(x) {
            *o += ratio * d.mixture.density(m + (v - spec.mean) * ratio);
        }
    }
    let n = chain.draws.len() as f64;
    out.iter_mut().for_each(|o| *o /= n);
    out
}

fn show(modes: &[f64]) -> String {
    modes.iter().map(|m| format!("{m:.2}")).collect::<Vec<_>>().join(", ")
}

pub fn criterion_1() -> Outcome {
    let f = match study1_mixture() {
        Ok(f) => f,
        Err(e) => return Outcome::error(e),
    };
    let (cov_ok, cov_text) = coverage(&f.summary);
    let truth = &f.data.truth.mixture;
    let spec = RescaleSpec::new(mixture_mean(truth), mixture_sd(truth)).unwrap();
    let x = Grid::new(-4.0, 6.0, 1001).unwrap().nodes();
    let modes = local_maxima(&x, &rescaled_mixture_density(&f.chain, &spec, &x), 0.05);
    let near = |target: f64| modes.iter().any(|m| (m - target).abs() <= 0.3);
    let bimodal = modes.len() == 2 && near(0.0) && near(2.5);
    // the kernel estimate of the posterior means, reported for reference
    let kde = density_export(
        &rescaled_means(&f.chain, &spec),
        Some(Grid::new(-4.0, 6.0, 1001).unwrap()),
    )
    .map(|d| show(&d.modes(0.05)))
    .unwrap_or_else(|e| e.to_string());
    Outcome::new(
        cov_ok && bimodal,
        format!(
            "{cov_text}; fitted density modes [{}]; kernel estimate of posterior means has modes [{kde}]",
            show(&modes)
        ),
    )
}

fn rmse_pair(mixture: &Fit, normal: &Fit) -> Result<(f64, f64)> {
    let truth = &mixture.data.truth.theta;
    let mix = rmse(&mixture.chain.theta_means(), truth)?;
    // K = 1 abilities mapped onto the mixture fit's estimated scale
    let m = mixture.summary.get("mixture_mean").unwrap().mean;
    let s = mixture.summary.get("mixture_var").unwrap().mean.sqrt();
    let spec = RescaleSpec::new(m, s)?;
    let norm = rmse(&rescaled_means(&normal.chain, &spec), truth)?;
    Ok((mix, norm))
}

pub fn criterion_2() -> Outcome {
    let study3 = || -> Result<(f64, f64)> {
        let design = SimulationDesign::study3(SEED).with_size(J, I);
        rmse_pair(&fit(&design, 2)?, &fit(&design, 1)?)
    };
    let (one, three) = match (study1_mixture(), study1_normal()) {
        (Ok(m), Ok(n)) => match (rmse_pair(m, n), study3()) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => return Outcome::error(e),
        },
        (Err(e), _) | (_, Err(e)) => return Outcome::error(e),
    };
    let ok = |(m, n): (f64, f64)| m <= 0.95 * n;
    Outcome::new(
        ok(one) && ok(three),
        format!(
            "study 1 rmse {:.3} vs {:.3} (ratio {:.3}); study 3 rmse {:.3} vs {:.3} (ratio {:.3})",
            one.0,
            one.1,
            one.0 / one.1,
            three.0,
            three.1,
            three.0 / three.1
        ),
    )
}

pub fn criterion_3() -> Outcome {
    let f = match fit(&SimulationDesign::normal(SEED).with_size(J, I), 2) {
        Ok(f) => f,
        Err(e) => return Outcome::error(e),
    };
    let p1 = f.summary.get("p_1").unwrap().mean;
    // An almost empty second component draws its parameters from the diffuse
    // prior, so the posterior moments of the mixture are matched by their
    // medians rather than their means.
    let median = |g: fn(&mixirt::model::MixtureParameters) -> f64| {
        let mut v: Vec<f64> = f.chain.draws.iter().map(|d| g(&d.mixture)).collect();
        v.sort_by(f64::total_cmp);
        quantile_sorted(&v, 0.5)
    };
    let m = median(mixture_mean);
    let v = median(|p| mixture_sd(p).powi(2));
    let x = Grid::new(m - 10.0 * v.sqrt(), m + 10.0 * v.sqrt(), 4001)
        .unwrap()
        .nodes();
    let fitted = posterior_mixture_density(&f.chain, &x);
    let matched: Vec<f64> = x
        .iter()
        .map(|&t| (-(t - m).powi(2) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt())
        .collect();
    let l1 = mixirt::diagnostics::l1_distance(&x, &fitted, &matched);
    Outcome::new(
        p1 > 0.85 || l1 < 0.05,
        format!("posterior mean p_1 = {p1:.3}, L1 to N({m:.3}, {v:.3}) = {l1:.4}"),
    )
}

pub fn criterion_8() -> Outcome {
    let complete = match study1_mixture() {
        Ok(f) => f,
        Err(e) => return Outcome::error(e),
    };
    let missing = match fit(
        &SimulationDesign::study1(SEED).with_size(J, I).with_missing_rate(0.5),
        2,
    ) {
        Ok(f) => f,
        Err(e) => return Outcome::error(e),
    };
    let (cov_ok, cov_text) = coverage(&missing.summary);
    let width = |s: &PosteriorSummary, n: &str| {
        let (lo, hi) = interval(s, n);
        hi - lo
    };
    let ratios = [
        width(&missing.summary, "mixture_mean") / width(&complete.summary, "mixture_mean"),
        width(&missing.summary, "mixture_var") / width(&complete.summary, "mixture_var"),
    ];
    Outcome::new(
        cov_ok && ratios.iter().all(|&r| r <= 2.0),
        format!(
            "{} observed cells; {cov_text}; width ratios {:.2} and {:.2}",
            missing.data.responses.observed_count(),
            ratios[0],
            ratios[1]
        ),
    )
}
