//! Data-driven starting state for mixture fits.
//!
//! A chain with `K >= 2` started from prior draws of diffuse component
//! hyperparameters tends to lock onto a component of near-zero variance
//! before the item parameters settle, and the Gibbs moves leave that region
//! very slowly. The warm start instead
//!
//! 1. runs a `K = 1` chain for a number of sweeps,
//! 2. fits a `K`-component normal mixture by EM to the ability means of the
//!    second half of those sweeps, and
//! 3. maps the scale affinely so that the heaviest EM component becomes
//!    `N(0, 1)`, transforming `(a, b)` with it so the likelihood is
//!    unchanged.

use crate::error::{Error, Result};
use crate::model::{AugmentedState, ItemParameters, MixtureParameters, PriorSpec, ResponseMatrix};

use super::{ChainState, Execution, Sampler};

const EM_ITERATIONS: usize = 500;
/// Floor on EM variances, relative to the overall variance.
const VARIANCE_FLOOR: f64 = 0.05;

/// Maximum-likelihood normal mixture fitted by EM, started from quantiles.
#[derive(Debug, Clone, PartialEq)]
pub struct EmFit {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    /// Most responsible component of each value.
    pub labels: Vec<usize>,
}

pub fn fit_normal_mixture(x: &[f64], k: usize) -> Result<EmFit> {
    let n = x.len();
    if n < 2 * k || k == 0 {
        return Err(Error::Numerical(format!("cannot fit {k} components to {n} values")));
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    if !(var > 0.0) {
        return Err(Error::Numerical("abilities have zero variance".into()));
    }
    let floor = VARIANCE_FLOOR * var;
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut weights = vec![1.0 / k as f64; k];
    let mut means: Vec<f64> = (0..k)
        .map(|c| sorted[((c as f64 + 0.5) / k as f64 * n as f64) as usize])
        .collect();
    let mut variances = vec![(var / k as f64).max(floor); k];
    let mut resp = vec![0.0; n * k];
    for _ in 0..EM_ITERATIONS {
        for (j, &v) in x.iter().enumerate() {
            let r = &mut resp[j * k..(j + 1) * k];
            let mut max = f64::NEG_INFINITY;
            for c in 0..k {
                r[c] = weights[c].ln() - 0.5 * variances[c].ln() - 0.5 * (v - means[c]).powi(2) / variances[c];
                max = max.max(r[c]);
            }
            let mut total = 0.0;
            for rc in r.iter_mut() {
                *rc = (*rc - max).exp();
                total += *rc;
            }
            r.iter_mut().for_each(|rc| *rc /= total);
        }
        for c in 0..k {
            let nc: f64 = (0..n).map(|j| resp[j * k + c]).sum::<f64>().max(1e-9);
            let mc = (0..n).map(|j| resp[j * k + c] * x[j]).sum::<f64>() / nc;
            let vc = (0..n).map(|j| resp[j * k + c] * (x[j] - mc).powi(2)).sum::<f64>() / nc;
            weights[c] = nc / n as f64;
            means[c] = mc;
            variances[c] = vc.max(floor);
        }
    }
    let labels = (0..n)
        .map(|j| {
            let r = &resp[j * k..(j + 1) * k];
            (0..k).max_by(|&p, &q| r[p].total_cmp(&r[q])).unwrap_or(0)
        })
        .collect();
    Ok(EmFit {
        weights,
        means,
        variances,
        labels,
    })
}

/// Runs the `K = 1` warm-up and returns a `K`-component starting state.
pub(crate) fn warm_state(
    y: &ResponseMatrix,
    priors: &PriorSpec,
    k: usize,
    sweeps: usize,
    seed: u64,
    max_attempts: u64,
    execution: Execution,
) -> Result<ChainState> {
    let single = PriorSpec {
        alphas: vec![1.0],
        nig_m: Vec::new(),
        ..priors.clone()
    };
    let mut pre = Sampler::new(y.clone(), single, 1, seed, max_attempts)?.with_execution(execution);
    pre.domain = crate::rng::domain::WARMUP;
    let n = y.n_individuals();
    let mut acc = vec![0.0; n];
    let keep_from = sweeps / 2;
    for it in 1..=sweeps {
        pre.sweep()
            .map_err(|e| Error::Sampling(format!("warm-up chain: {e}")))?;
        if it > keep_from {
            acc.iter_mut().zip(&pre.state.latent.theta).for_each(|(a, t)| *a += t);
        }
    }
    let kept = (sweeps - keep_from) as f64;
    let theta_hat: Vec<f64> = acc.iter().map(|a| a / kept).collect();
    let em = fit_normal_mixture(&theta_hat, k)?;
    log::debug!("warm start EM fit: {em:?}");

    let base = (0..k)
        .max_by(|&p, &q| em.weights[p].total_cmp(&em.weights[q]))
        .unwrap_or(0);
    let (shift, scale) = (em.means[base], em.variances[base].sqrt());
    let mut others: Vec<usize> = (0..k).filter(|&c| c != base).collect();
    others.sort_by(|&p, &q| em.means[p].total_cmp(&em.means[q]));

    let p1 = em.weights[base].max(0.6);
    let rest: f64 = others.iter().map(|&c| em.weights[c]).sum();
    let mut weights = vec![p1];
    let mut means = vec![0.0];
    let mut variances = vec![1.0];
    let mut label_of = vec![0; k];
    for (slot, &c) in others.iter().enumerate() {
        weights.push((1.0 - p1) * em.weights[c] / rest);
        means.push((em.means[c] - shift) / scale);
        variances.push(em.variances[c] / (scale * scale));
        label_of[c] = slot + 1;
    }
    let mixture = MixtureParameters::new(weights, means, variances)?;

    let st = pre.state;
    let items = ItemParameters::new(
        st.items.a.iter().map(|a| a * scale).collect(),
        st.items.b.iter().zip(&st.items.a).map(|(b, a)| b - a * shift).collect(),
        st.items.c,
    )?;
    Ok(ChainState {
        items,
        mixture,
        latent: AugmentedState {
            theta: st.latent.theta.iter().map(|t| (t - shift) / scale).collect(),
            allocation: em.labels.iter().map(|&c| label_of[c]).collect(),
            z: st.latent.z,
            x: st.latent.x,
        },
    })
}
