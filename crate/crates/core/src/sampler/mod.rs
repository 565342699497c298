//! Six-block Gibbs sampler for the 3PNO model with mixture abilities.
//!
//! One sweep updates, in order, `(X, Z)`, `(theta, W)`, `(a, b)`, `c`,
//! `(mu, sigma2)` and `p`. Burn-in and thinning only decide which sweeps are
//! retained.

pub mod blocks;
mod par;
pub mod warm;

pub use blocks::{RejectionStats, SweepContext};
pub use par::Execution;

use crate::distributions::sample_nig;
use crate::error::{Block, Error, Result};
use crate::model::{AugmentedState, ItemParameters, MixtureParameters, PriorSpec, ResponseMatrix};
use crate::rng::{domain, RngStream};

/// Run-time settings of a chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplerConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub parallel_workers: usize,
    /// Proposal budget of the two rejection-sampled blocks, per draw.
    pub rejection_max_attempts: u64,
    /// Sweeps of the `K = 1` warm-up chain that seeds a mixture fit (see
    /// [`warm`]). Zero starts from [`initialize`] directly.
    pub warmup: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            iterations: 100_000,
            burn_in: 50_000,
            thin: 10,
            seed: 1,
            parallel_workers: 1,
            rejection_max_attempts: 1_000_000,
            warmup: 1_000,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.iterations {
            return Err(Error::Config(format!(
                "burn_in ({}) must be smaller than iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be at least 1".into()));
        }
        if self.parallel_workers == 0 {
            return Err(Error::Config("parallel_workers must be at least 1".into()));
        }
        if self.rejection_max_attempts == 0 {
            return Err(Error::Config("rejection_max_attempts must be at least 1".into()));
        }
        Ok(())
    }

    /// Whether sweep `iteration` (1-based) is kept.
    pub fn retains(&self, iteration: usize) -> bool {
        iteration > self.burn_in && (iteration - self.burn_in).is_multiple_of(self.thin)
    }

    pub fn retained_count(&self) -> usize {
        self.iterations.saturating_sub(self.burn_in) / self.thin
    }
}

/// Every quantity the sampler updates.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub items: ItemParameters,
    pub mixture: MixtureParameters,
    pub latent: AugmentedState,
}

/// One retained sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub iteration: usize,
    pub items: ItemParameters,
    pub mixture: MixtureParameters,
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput {
    pub draws: Vec<Draw>,
    /// Proposals of the `a > 0` rejection step, summed over items and sweeps.
    pub discrimination: RejectionStats,
    /// Proposals of the `p_1 > 0.5` rejection step.
    pub weights: RejectionStats,
    pub config: SamplerConfig,
    pub k: usize,
}

impl ChainOutput {
    pub fn n_items(&self) -> usize {
        self.draws.first().map_or(0, |d| d.items.len())
    }

    pub fn n_individuals(&self) -> usize {
        self.draws.first().map_or(0, |d| d.theta.len())
    }

    /// Posterior mean of each ability.
    pub fn theta_means(&self) -> Vec<f64> {
        let n = self.draws.len() as f64;
        let mut out = vec![0.0; self.n_individuals()];
        for d in &self.draws {
            for (o, t) in out.iter_mut().zip(&d.theta) {
                *o += t;
            }
        }
        out.iter_mut().for_each(|o| *o /= n);
        out
    }
}

/// Starting state: standardized raw scores for `theta`, `a = 1`, `b = 0`,
/// `c` at its prior mean, everyone in component 1, and components `2..K`
/// drawn from their prior. `(Z, X)` is left for the first augmentation pass.
pub fn initialize(y: &ResponseMatrix, priors: &PriorSpec, k: usize, rng: &mut RngStream) -> Result<ChainState> {
    priors.validate(k)?;
    let n_items = y.n_items();
    let n = y.n_individuals();

    let raw = y.proportion_correct();
    let mean = raw.iter().sum::<f64>() / n as f64;
    let var = raw.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n as f64;
    let theta: Vec<f64> = if var > 0.0 {
        let sd = var.sqrt();
        raw.iter().map(|r| (r - mean) / sd).collect()
    } else {
        vec![0.0; n]
    };

    let (lo, hi) = priors.guessing_bounds();
    let c0 = (priors.alpha_c / (priors.alpha_c + priors.beta_c)).clamp(lo, hi);
    let c0 = if c0 <= lo || c0 >= hi { 0.5 * (lo + hi) } else { c0 };
    let items = ItemParameters::new(vec![1.0; n_items], vec![0.0; n_items], vec![c0; n_items])?;

    let mut weights = vec![1.0];
    let mut means = vec![0.0];
    let mut variances = vec![1.0];
    if k > 1 {
        let total: f64 = priors.alphas.iter().sum();
        let p1 = (priors.alphas[0] / total).max(0.6);
        weights[0] = p1;
        weights.extend(std::iter::repeat_n((1.0 - p1) / (k - 1) as f64, k - 1));
        let mut comps: Vec<(f64, f64)> = priors
            .nig_m
            .iter()
            .map(|&m| sample_nig(m, priors.nig_beta, priors.nig_d, priors.nig_e, rng))
            .collect();
        comps.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in comps.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::Numerical("tied initial component means".into()));
            }
        }
        for (mu, v) in comps {
            means.push(mu);
            variances.push(v);
        }
    }
    let mixture = MixtureParameters::new(weights, means, variances)?;

    Ok(ChainState {
        items,
        mixture,
        latent: AugmentedState {
            theta,
            z: vec![false; n * n_items],
            x: vec![0.0; n * n_items],
            allocation: vec![0; n],
        },
    })
}

/// A chain positioned between sweeps.
#[derive(Debug, Clone)]
pub struct Sampler {
    y: ResponseMatrix,
    priors: PriorSpec,
    seed: u64,
    max_attempts: u64,
    execution: Execution,
    domain: u64,
    state: ChainState,
    iteration: usize,
    discrimination: RejectionStats,
    weights: RejectionStats,
}

impl Sampler {
    /// Initializes a chain and runs the first augmentation pass.
    pub fn new(y: ResponseMatrix, priors: PriorSpec, k: usize, seed: u64, max_attempts: u64) -> Result<Self> {
        let mut rng = RngStream::keyed(seed, domain::INIT, 0, 0);
        let state = initialize(&y, &priors, k, &mut rng)?;
        Self::from_state(y, priors, state, seed, max_attempts)
    }

    /// Starts from a given state, e.g. a draw from the prior. The augmented
    /// cells are refreshed from `state` by one `(X, Z)` pass.
    pub fn from_state(
        y: ResponseMatrix,
        priors: PriorSpec,
        state: ChainState,
        seed: u64,
        max_attempts: u64,
    ) -> Result<Self> {
        let k = state.mixture.k();
        priors.validate(k)?;
        let cells = y.n_individuals() * y.n_items();
        if state.items.len() != y.n_items()
            || state.latent.theta.len() != y.n_individuals()
            || state.latent.allocation.len() != y.n_individuals()
            || state.latent.z.len() != cells
            || state.latent.x.len() != cells
        {
            return Err(Error::InvalidData(
                "chain state does not match the response matrix".into(),
            ));
        }
        let mut s = Self {
            y,
            priors,
            seed,
            max_attempts,
            execution: Execution::Sequential,
            domain: domain::SWEEP,
            state,
            iteration: 0,
            discrimination: RejectionStats::default(),
            weights: RejectionStats::default(),
        };
        s.refresh_augmentation();
        Ok(s)
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn set_execution(&mut self, execution: Execution) {
        self.execution = execution;
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    /// Mutable access for tests and custom schedules. Changing `theta` or the
    /// item parameters leaves `(Z, X)` stale until the next sweep.
    pub fn state_mut(&mut self) -> &mut ChainState {
        &mut self.state
    }

    pub fn responses(&self) -> &ResponseMatrix {
        &self.y
    }

    pub fn priors(&self) -> &PriorSpec {
        &self.priors
    }

    /// Swaps in a new response matrix of the same shape and redraws `(Z, X)`.
    pub fn set_responses(&mut self, y: ResponseMatrix) -> Result<()> {
        if y.n_individuals() != self.y.n_individuals() || y.n_items() != self.y.n_items() {
            return Err(Error::InvalidData(format!(
                "response matrix is {}x{}, chain expects {}x{}",
                y.n_individuals(),
                y.n_items(),
                self.y.n_individuals(),
                self.y.n_items()
            )));
        }
        self.y = y;
        self.refresh_augmentation();
        Ok(())
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn discrimination_stats(&self) -> RejectionStats {
        self.discrimination
    }

    pub fn weight_stats(&self) -> RejectionStats {
        self.weights
    }

    fn refresh_augmentation(&mut self) {
        let ctx = SweepContext::between_sweeps(self.seed, self.iteration as u64, self.execution);
        let ChainState { items, latent, .. } = &mut self.state;
        blocks::update_augmentation(&self.y, items, &latent.theta, &ctx, &mut latent.z, &mut latent.x);
    }

    /// Runs one full sweep in block order.
    pub fn sweep(&mut self) -> Result<()> {
        self.iteration += 1;
        let it = self.iteration;
        let ctx = SweepContext::in_domain(self.seed, it as u64, self.execution, self.domain);
        let y = &self.y;
        let priors = &self.priors;
        let ChainState { items, mixture, latent } = &mut self.state;

        blocks::update_augmentation(y, items, &latent.theta, &ctx, &mut latent.z, &mut latent.x);
        blocks::update_abilities(
            y,
            &latent.z,
            &latent.x,
            items,
            mixture,
            &ctx,
            &mut latent.theta,
            &mut latent.allocation,
        );
        let ab = blocks::update_discrimination(
            y,
            &latent.z,
            &latent.x,
            &latent.theta,
            priors,
            self.max_attempts,
            &ctx,
            items,
        )
        .map_err(|e| e.in_block(Block::Discrimination, it))?;
        self.discrimination.merge(ab);
        blocks::update_guessing(y, &latent.z, priors, &ctx, &mut items.c)
            .map_err(|e| e.in_block(Block::Guessing, it))?;
        blocks::update_components(&latent.theta, &mut latent.allocation, priors, &ctx, mixture);
        let p = blocks::update_weights(&latent.allocation, priors, self.max_attempts, &ctx, mixture)
            .map_err(|e| e.in_block(Block::Weights, it))?;
        self.weights.merge(p);
        Ok(())
    }

    fn snapshot(&self) -> Draw {
        Draw {
            iteration: self.iteration,
            items: self.state.items.clone(),
            mixture: self.state.mixture.clone(),
            theta: self.state.latent.theta.clone(),
        }
    }
}

/// Initializes, runs `config.iterations` sweeps and collects the retained
/// draws. With one worker the chain runs sequentially; with more it uses a
/// dedicated thread pool. Both give the same draws.
pub fn run_chain(y: &ResponseMatrix, priors: &PriorSpec, k: usize, config: &SamplerConfig) -> Result<ChainOutput> {
    config.validate()?;
    if k == 0 {
        return Err(Error::Config("K must be at least 1".into()));
    }
    let execution = if config.parallel_workers > 1 {
        Execution::Parallel
    } else {
        Execution::Sequential
    };
    let start = || -> Result<Sampler> {
        let s = if k > 1 && config.warmup > 0 {
            let state = warm::warm_state(
                y,
                priors,
                k,
                config.warmup,
                config.seed,
                config.rejection_max_attempts,
                execution,
            )?;
            Sampler::from_state(
                y.clone(),
                priors.clone(),
                state,
                config.seed,
                config.rejection_max_attempts,
            )?
        } else {
            Sampler::new(y.clone(), priors.clone(), k, config.seed, config.rejection_max_attempts)?
        };
        Ok(s.with_execution(execution))
    };

    #[cfg(feature = "parallel")]
    if execution == Execution::Parallel {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.parallel_workers)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {} workers: {e}", config.parallel_workers)))?;
        return pool.install(|| drive(start()?, k, config));
    }
    #[cfg(not(feature = "parallel"))]
    if execution == Execution::Parallel {
        log::warn!("built without the parallel feature; running sequentially");
    }
    drive(start()?, k, config)
}

fn drive(mut sampler: Sampler, k: usize, config: &SamplerConfig) -> Result<ChainOutput> {
    let mut draws = Vec::with_capacity(config.retained_count());
    let report_every = (config.iterations / 10).max(1);
    for it in 1..=config.iterations {
        sampler.sweep()?;
        if config.retains(it) {
            sampler
                .state
                .mixture
                .check_identified()
                .map_err(|e| Error::Numerical(format!("retained draw {it} left the identified region: {e}")))?;
            draws.push(sampler.snapshot());
        }
        if it % report_every == 0 {
            log::info!(
                "iteration {it}/{}: p1 = {:.4}, a>0 acceptance {:.4}",
                config.iterations,
                sampler.state.mixture.weights[0],
                sampler.discrimination.acceptance_rate()
            );
        }
    }
    let out = ChainOutput {
        draws,
        discrimination: sampler.discrimination,
        weights: sampler.weights,
        config: config.clone(),
        k,
    };
    if k > 1 {
        log::info!("p1 > 0.5 acceptance rate {:.4}", out.weights.acceptance_rate());
    }
    Ok(out)
}
