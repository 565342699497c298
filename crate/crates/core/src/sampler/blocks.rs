//! Full conditional updates for the six blocks of a sweep.
//!
//! All conditionals follow from the augmented joint density with
//! `X_ij | Z_ij = 0 ~ N(a_i theta_j - b_i, 1)`:
//!
//! * `theta_j | W_j = k` is normal with precision `1/sigma2_k + sum a_i^2` and
//!   linear term `mu_k/sigma2_k + sum a_i (x_ij + b_i)` over items with
//!   `Z_ij = 0`;
//! * `(a_i, b_i)` is bivariate normal with precision
//!   `diag(1/sigma2_a, 1/sigma2_b) + sum [theta^2, -theta; -theta, 1]` and linear
//!   term `(mu_a/sigma2_a + sum x theta, mu_b/sigma2_b - sum x)` over
//!   individuals with `Z_ij = 0`, restricted to `a_i > 0`;
//! * `(mu_k, sigma2_k)` is NIG with the usual conjugate update, where the
//!   scale gains half the within-component sum of squared deviations.
//!
//! Missing cells are skipped everywhere.

use crate::distributions::{
    categorical_unnormalized, phi, positive_part, sample_beta, sample_beta_truncated, sample_dirichlet, sample_nig,
    sample_std_normal, BivariateNormal,
};
use crate::error::{Block, Error, Result};
use crate::model::{ItemParameters, MixtureParameters, PriorSpec, Response, ResponseMatrix};
use crate::rng::{domain, RngStream};

use super::par::{for_each_pair, for_each_row, map_indices, Execution};

/// Random-stream and scheduling context for one sweep.
#[derive(Debug, Clone, Copy)]
pub struct SweepContext {
    pub seed: u64,
    pub iteration: u64,
    pub execution: Execution,
    domain: u64,
}

impl SweepContext {
    pub fn new(seed: u64, iteration: u64, execution: Execution) -> Self {
        Self {
            seed,
            iteration,
            execution,
            domain: domain::SWEEP,
        }
    }

    /// Streams for an extra `(X, Z)` pass after sweep `iteration`, disjoint
    /// from every sweep's streams.
    pub fn between_sweeps(seed: u64, iteration: u64, execution: Execution) -> Self {
        Self {
            domain: domain::INIT,
            ..Self::new(seed, iteration, execution)
        }
    }

    pub(crate) fn in_domain(seed: u64, iteration: u64, execution: Execution, domain: u64) -> Self {
        Self {
            domain,
            ..Self::new(seed, iteration, execution)
        }
    }

    pub fn sequential(seed: u64, iteration: u64) -> Self {
        Self::new(seed, iteration, Execution::Sequential)
    }

    /// The stream owned by `index` within `block` for this sweep.
    #[inline]
    pub fn stream(&self, block: Block, index: usize) -> RngStream {
        let tag = (self.domain << 8) | block_tag(block);
        RngStream::keyed(self.seed, tag, self.iteration, index as u64)
    }
}

fn block_tag(block: Block) -> u64 {
    match block {
        Block::Augmentation => 1,
        Block::AbilityAllocation => 2,
        Block::Discrimination => 3,
        Block::Guessing => 4,
        Block::Components => 5,
        Block::Weights => 6,
    }
}

/// Proposal and acceptance counts of a rejection-sampled block.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RejectionStats {
    pub proposals: u64,
    pub accepted: u64,
}

impl RejectionStats {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            f64::NAN
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }

    pub fn merge(&mut self, other: RejectionStats) {
        self.proposals += other.proposals;
        self.accepted += other.accepted;
    }
}

/// Block 1: `(Z, X)` for every observed cell.
///
/// `Y = 0` gives `Z = 0` and `X ~ N(m, 1)` truncated below zero. `Y = 1` gives
/// `Z ~ Ber(c / (c + (1 - c) Phi(m)))`, then `X = 0` when `Z = 1` and otherwise
/// `X ~ N(m, 1)` truncated above zero, with `m = a theta - b`.
pub fn update_augmentation(
    y: &ResponseMatrix,
    items: &ItemParameters,
    theta: &[f64],
    ctx: &SweepContext,
    z: &mut [bool],
    x: &mut [f64],
) {
    let n_items = y.n_items();
    for_each_row(ctx.execution, n_items, z, x, |j, z_row, x_row| {
        let mut rng = ctx.stream(Block::Augmentation, j);
        let t = theta[j];
        for (i, &r) in y.row(j).iter().enumerate() {
            let m = items.a[i] * t - items.b[i];
            match r {
                Response::Missing => {
                    z_row[i] = false;
                    x_row[i] = 0.0;
                }
                Response::Incorrect => {
                    z_row[i] = false;
                    x_row[i] = -positive_part(-m, 1.0, phi(-m), &mut rng);
                }
                Response::Correct => {
                    let c = items.c[i];
                    let phi_m = phi(m);
                    let guess = c / (c + (1.0 - c) * phi_m);
                    if rng.open01() < guess {
                        z_row[i] = true;
                        x_row[i] = 0.0;
                    } else {
                        z_row[i] = false;
                        x_row[i] = positive_part(m, 1.0, phi_m, &mut rng);
                    }
                }
            }
        }
    });
}

/// Log allocation weights of one individual, given the sums over its
/// `Z = 0` items `s = sum a^2` and `r = sum a (x + b)`.
#[inline]
pub(crate) fn allocation_log_weights(mixture: &MixtureParameters, s: f64, r: f64, out: &mut [f64]) {
    for (k, o) in out.iter_mut().enumerate().take(mixture.k()) {
        let (mu, v) = (mixture.means[k], mixture.variances[k]);
        let prec = 1.0 / v + s;
        let lin = mu / v + r;
        *o = mixture.weights[k].ln() - 0.5 * (v * prec).ln() - 0.5 * (mu * mu / v - lin * lin / prec);
    }
}

/// Block 2: `(theta_j, W_j)` for every individual. `W_j` is drawn from its
/// marginal allocation probabilities and `theta_j` from the normal
/// conditional of the chosen component.
#[allow(clippy::too_many_arguments)]
pub fn update_abilities(
    y: &ResponseMatrix,
    z: &[bool],
    x: &[f64],
    items: &ItemParameters,
    mixture: &MixtureParameters,
    ctx: &SweepContext,
    theta: &mut [f64],
    allocation: &mut [usize],
) {
    let n_items = y.n_items();
    let k = mixture.k();
    for_each_pair(ctx.execution, theta, allocation, |j, t, w| {
        let mut rng = ctx.stream(Block::AbilityAllocation, j);
        let base = j * n_items;
        let (mut s, mut r) = (0.0, 0.0);
        for (i, &resp) in y.row(j).iter().enumerate() {
            if resp.is_observed() && !z[base + i] {
                let a = items.a[i];
                s += a * a;
                r += a * (x[base + i] + items.b[i]);
            }
        }
        let comp = if k == 1 {
            0
        } else {
            let mut logw = vec![0.0; k];
            allocation_log_weights(mixture, s, r, &mut logw);
            let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for v in logw.iter_mut() {
                *v = (*v - max).exp();
                total += *v;
            }
            categorical_unnormalized(&logw, total, &mut rng)
        };
        let (mu, v) = (mixture.means[comp], mixture.variances[comp]);
        let prec = 1.0 / v + s;
        let mean = (mu / v + r) / prec;
        *t = mean + sample_std_normal(&mut rng) / prec.sqrt();
        *w = comp;
    });
}

/// Moments of the `(a_i, b_i)` conditional before truncation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ItemPosterior {
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
    /// Number of individuals with `Z_ij = 0` on this item.
    pub n_free: usize,
}

pub fn discrimination_posterior(
    y: &ResponseMatrix,
    z: &[bool],
    x: &[f64],
    theta: &[f64],
    priors: &PriorSpec,
    item: usize,
) -> ItemPosterior {
    let n_items = y.n_items();
    let (mut n, mut st, mut stt, mut sx, mut sxt) = (0usize, 0.0, 0.0, 0.0, 0.0);
    for (j, &t) in theta.iter().enumerate() {
        let idx = j * n_items + item;
        if y.cells()[idx].is_observed() && !z[idx] {
            let xv = x[idx];
            n += 1;
            st += t;
            stt += t * t;
            sx += xv;
            sxt += xv * t;
        }
    }
    let q00 = 1.0 / priors.sigma2_a + stt;
    let q01 = -st;
    let q11 = 1.0 / priors.sigma2_b + n as f64;
    let h0 = priors.mu_a / priors.sigma2_a + sxt;
    let h1 = priors.mu_b / priors.sigma2_b - sx;
    let det = q00 * q11 - q01 * q01;
    let cov = [[q11 / det, -q01 / det], [-q01 / det, q00 / det]];
    let mean = [cov[0][0] * h0 + cov[0][1] * h1, cov[1][0] * h0 + cov[1][1] * h1];
    ItemPosterior { mean, cov, n_free: n }
}

/// Block 3: `(a_i, b_i)` for every item by proposing from the unrestricted
/// bivariate normal and accepting the first draw with `a_i > 0`.
#[allow(clippy::too_many_arguments)]
pub fn update_discrimination(
    y: &ResponseMatrix,
    z: &[bool],
    x: &[f64],
    theta: &[f64],
    priors: &PriorSpec,
    max_attempts: u64,
    ctx: &SweepContext,
    items: &mut ItemParameters,
) -> Result<RejectionStats> {
    let results = map_indices(ctx.execution, y.n_items(), |i| {
        let post = discrimination_posterior(y, z, x, theta, priors, i);
        if post.n_free < 2 {
            log::debug!(
                "item {}: {} individuals with Z = 0, (a, b) conditional is prior-dominated",
                i + 1,
                post.n_free
            );
        }
        let dist =
            BivariateNormal::new(post.mean, post.cov).map_err(|e| Error::Numerical(format!("item {}: {e}", i + 1)))?;
        let mut rng = ctx.stream(Block::Discrimination, i);
        for attempt in 1..=max_attempts {
            let [a, b] = dist.sample(&mut rng);
            if a > 0.0 {
                return Ok((a, b, attempt));
            }
        }
        Err(Error::Sampling(format!(
            "item {}: no draw with a > 0 in {max_attempts} proposals (acceptance rate 0, conditional mean {:?})",
            i + 1,
            post.mean
        )))
    });
    let mut stats = RejectionStats::default();
    for (i, res) in results.into_iter().enumerate() {
        let (a, b, attempts) = res?;
        items.a[i] = a;
        items.b[i] = b;
        stats.proposals += attempts;
        stats.accepted += 1;
    }
    Ok(stats)
}

/// Beta parameters of the `c_i` conditional.
pub fn guessing_posterior(y: &ResponseMatrix, z: &[bool], priors: &PriorSpec, item: usize) -> (f64, f64) {
    let n_items = y.n_items();
    let (mut n, mut guessed) = (0usize, 0usize);
    for j in 0..y.n_individuals() {
        let idx = j * n_items + item;
        if y.cells()[idx].is_observed() {
            n += 1;
            guessed += z[idx] as usize;
        }
    }
    (guessed as f64 + priors.alpha_c, (n - guessed) as f64 + priors.beta_c)
}

/// Block 4: `c_i ~ Beta(sum Z + alpha_c, n_i - sum Z + beta_c)`, truncated to
/// the prior bounds when present.
pub fn update_guessing(
    y: &ResponseMatrix,
    z: &[bool],
    priors: &PriorSpec,
    ctx: &SweepContext,
    c: &mut [f64],
) -> Result<()> {
    let results = map_indices(ctx.execution, y.n_items(), |i| {
        let (alpha, beta) = guessing_posterior(y, z, priors, i);
        let mut rng = ctx.stream(Block::Guessing, i);
        match priors.c_bounds {
            None => Ok(sample_beta(alpha, beta, &mut rng)),
            Some((lo, hi)) => sample_beta_truncated(alpha, beta, lo, hi, &mut rng)
                .map_err(|e| Error::Sampling(format!("item {}: {e}", i + 1))),
        }
    });
    for (i, res) in results.into_iter().enumerate() {
        c[i] = res?;
    }
    Ok(())
}

/// NIG posterior `(m*, beta*, d*, e*)` of component `k` (zero-based, `k >= 1`).
pub fn component_posterior(theta: &[f64], allocation: &[usize], priors: &PriorSpec, k: usize) -> (f64, f64, f64, f64) {
    let (mut n, mut sum) = (0usize, 0.0);
    for (&t, &w) in theta.iter().zip(allocation) {
        if w == k {
            n += 1;
            sum += t;
        }
    }
    let m = priors.nig_m[k - 1];
    let beta = priors.nig_beta;
    if n == 0 {
        return (m, beta, priors.nig_d, priors.nig_e);
    }
    let nf = n as f64;
    let mean = sum / nf;
    let ss: f64 = theta
        .iter()
        .zip(allocation)
        .filter(|(_, &w)| w == k)
        .map(|(&t, _)| (t - mean).powi(2))
        .sum();
    let beta_post = beta + nf;
    let m_post = (beta * m + sum) / beta_post;
    let d_post = priors.nig_d + 0.5 * nf;
    let e_post = priors.nig_e + 0.5 * ss + nf * beta * (mean - m).powi(2) / (2.0 * beta_post);
    (m_post, beta_post, d_post, e_post)
}

/// Block 5: `(mu_k, sigma2_k)` for components `2..K`, then relabels those
/// components in increasing order of `mu`, permuting the weights and the
/// allocations with them.
pub fn update_components(
    theta: &[f64],
    allocation: &mut [usize],
    priors: &PriorSpec,
    ctx: &SweepContext,
    mixture: &mut MixtureParameters,
) {
    let k = mixture.k();
    if k == 1 {
        return;
    }
    for comp in 1..k {
        let (m, beta, d, e) = component_posterior(theta, allocation, priors, comp);
        let mut rng = ctx.stream(Block::Components, comp);
        let (mu, v) = sample_nig(m, beta, d, e, &mut rng);
        mixture.means[comp] = mu;
        mixture.variances[comp] = v;
    }
    relabel(mixture, allocation);
}

/// Sorts components `2..K` by mean. Returns true if anything moved.
pub(crate) fn relabel(mixture: &mut MixtureParameters, allocation: &mut [usize]) -> bool {
    let k = mixture.k();
    let mut order: Vec<usize> = (1..k).collect();
    order.sort_by(|&a, &b| mixture.means[a].total_cmp(&mixture.means[b]));
    if order.iter().enumerate().all(|(pos, &old)| pos + 1 == old) {
        return false;
    }
    // new label of each old label
    let mut new_label = vec![0usize; k];
    for (pos, &old) in order.iter().enumerate() {
        new_label[old] = pos + 1;
    }
    let permute = |v: &[f64]| {
        let mut out = v.to_vec();
        for (old, &new) in new_label.iter().enumerate().skip(1) {
            out[new] = v[old];
        }
        out
    };
    mixture.weights = permute(&mixture.weights);
    mixture.means = permute(&mixture.means);
    mixture.variances = permute(&mixture.variances);
    for w in allocation.iter_mut() {
        *w = new_label[*w];
    }
    true
}

/// Dirichlet parameters of the weight conditional.
pub fn weights_posterior(allocation: &[usize], priors: &PriorSpec) -> Vec<f64> {
    let mut alphas = priors.alphas.clone();
    for &w in allocation {
        alphas[w] += 1.0;
    }
    alphas
}

/// Block 6: `p ~ Dirichlet(counts + alpha)` restricted to `p_1 > 0.5`, by
/// rejection from the unrestricted Dirichlet.
pub fn update_weights(
    allocation: &[usize],
    priors: &PriorSpec,
    max_attempts: u64,
    ctx: &SweepContext,
    mixture: &mut MixtureParameters,
) -> Result<RejectionStats> {
    if mixture.k() == 1 {
        mixture.weights[0] = 1.0;
        return Ok(RejectionStats::default());
    }
    let alphas = weights_posterior(allocation, priors);
    let mut rng = ctx.stream(Block::Weights, 0);
    for attempt in 1..=max_attempts {
        let p = sample_dirichlet(&alphas, &mut rng);
        if p[0] > 0.5 {
            mixture.weights = p;
            return Ok(RejectionStats {
                proposals: attempt,
                accepted: 1,
            });
        }
    }
    Err(Error::Sampling(format!(
        "no weight draw with p_1 > 0.5 in {max_attempts} proposals from Dirichlet{alphas:?}"
    )))
}
