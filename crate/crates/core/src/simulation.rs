//! Synthetic response data from the 3PNO mixture model.

use crate::distributions::{phi, positive_part, sample_beta, sample_std_normal};
use crate::error::{Error, Result};
use crate::model::{icc, ItemParameters, MixtureParameters, PriorSpec, Response, ResponseMatrix};
use crate::rng::{domain, RngStream};

/// Distributions the true item parameters are drawn from:
/// `a ~ N(mu_a, sigma2_a)` truncated positive, `b ~ N(mu_b, sigma2_b)`,
/// `c ~ Beta(alpha_c, beta_c)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ItemGenerator {
    pub mu_a: f64,
    pub sigma2_a: f64,
    pub mu_b: f64,
    pub sigma2_b: f64,
    pub alpha_c: f64,
    pub beta_c: f64,
}

impl ItemGenerator {
    pub fn from_priors(p: &PriorSpec) -> Self {
        Self {
            mu_a: p.mu_a,
            sigma2_a: p.sigma2_a,
            mu_b: p.mu_b,
            sigma2_b: p.sigma2_b,
            alpha_c: p.alpha_c,
            beta_c: p.beta_c,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.mu_a.is_finite()
            && self.mu_b.is_finite()
            && [self.sigma2_a, self.sigma2_b, self.alpha_c, self.beta_c]
                .iter()
                .all(|&v| v > 0.0 && v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid item generator {self:?}")))
        }
    }
}

impl Default for ItemGenerator {
    fn default() -> Self {
        Self::from_priors(&PriorSpec::defaults(1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationDesign {
    pub n_individuals: usize,
    pub n_items: usize,
    /// True ability distribution. It need not satisfy the identification
    /// restrictions; see [`SimulationDesign::truth_is_identified`].
    pub mixture: MixtureParameters,
    pub items: ItemGenerator,
    pub missing_rate: f64,
    pub seed: u64,
}

/// Names accepted by [`SimulationDesign::preset`].
pub const PRESETS: [&str; 4] = ["study1", "study2", "study3", "normal"];

impl SimulationDesign {
    pub fn new(n_individuals: usize, n_items: usize, mixture: MixtureParameters, seed: u64) -> Self {
        Self {
            n_individuals,
            n_items,
            mixture,
            items: ItemGenerator::default(),
            missing_rate: 0.0,
            seed,
        }
    }

    /// `0.8 N(0, 1) + 0.2 N(2.5, 0.5^2)`, 5000 individuals and 50 items.
    pub fn study1(seed: u64) -> Self {
        Self::from_components(&[0.8, 0.2], &[0.0, 2.5], &[1.0, 0.25], seed)
    }

    /// `0.7 N(0, 1) + 0.3 N(0.5, 12^2)`.
    pub fn study2(seed: u64) -> Self {
        Self::from_components(&[0.7, 0.3], &[0.0, 0.5], &[1.0, 144.0], seed)
    }

    /// `0.7 N(0, 1) + 0.3 N(1.5, 1.8^2)`.
    pub fn study3(seed: u64) -> Self {
        Self::from_components(&[0.7, 0.3], &[0.0, 1.5], &[1.0, 1.8 * 1.8], seed)
    }

    /// Standard normal abilities.
    pub fn normal(seed: u64) -> Self {
        Self::new(5000, 50, MixtureParameters::standard_normal(), seed)
    }

    pub fn preset(name: &str, seed: u64) -> Result<Self> {
        match name {
            "study1" => Ok(Self::study1(seed)),
            "study2" => Ok(Self::study2(seed)),
            "study3" => Ok(Self::study3(seed)),
            "normal" => Ok(Self::normal(seed)),
            other => Err(Error::Config(format!(
                "unknown preset '{other}', expected one of {}",
                PRESETS.join(", ")
            ))),
        }
    }

    fn from_components(p: &[f64], mu: &[f64], var: &[f64], seed: u64) -> Self {
        let mixture =
            MixtureParameters::unidentified(p.to_vec(), mu.to_vec(), var.to_vec()).expect("preset mixtures are valid");
        Self::new(5000, 50, mixture, seed)
    }

    pub fn with_size(mut self, n_individuals: usize, n_items: usize) -> Self {
        self.n_individuals = n_individuals;
        self.n_items = n_items;
        self
    }

    pub fn with_missing_rate(mut self, rate: f64) -> Self {
        self.missing_rate = rate;
        self
    }

    pub fn truth_is_identified(&self) -> bool {
        self.mixture.is_identified()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_individuals == 0 || self.n_items == 0 {
            return Err(Error::Config(
                "simulation needs at least one individual and one item".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            return Err(Error::Config(format!(
                "missing_rate {} must lie in [0, 1)",
                self.missing_rate
            )));
        }
        self.items.validate()
    }
}

/// Values used to generate a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTruth {
    pub items: ItemParameters,
    pub theta: Vec<f64>,
    /// Zero-based component of each individual.
    pub allocation: Vec<usize>,
    pub mixture: MixtureParameters,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedData {
    pub responses: ResponseMatrix,
    pub truth: SimulationTruth,
}

// stream ids inside the simulation domain
const ITEMS: u64 = 0;
const ABILITIES: u64 = 1;
const RESPONSES: u64 = 2;
const MASK: u64 = 3;

pub fn simulate_items(gen: &ItemGenerator, n_items: usize, rng: &mut RngStream) -> ItemParameters {
    let sd_a = gen.sigma2_a.sqrt();
    let mass_a = phi(gen.mu_a / sd_a);
    let sd_b = gen.sigma2_b.sqrt();
    let mut a = Vec::with_capacity(n_items);
    let mut b = Vec::with_capacity(n_items);
    let mut c = Vec::with_capacity(n_items);
    for _ in 0..n_items {
        a.push(positive_part(gen.mu_a, sd_a, mass_a, rng));
        b.push(gen.mu_b + sd_b * sample_std_normal(rng));
        c.push(sample_beta(gen.alpha_c, gen.beta_c, rng));
    }
    ItemParameters { a, b, c }
}

/// Abilities and their component labels drawn from `mixture`.
pub fn simulate_abilities(mixture: &MixtureParameters, n: usize, rng: &mut RngStream) -> (Vec<f64>, Vec<usize>) {
    let weights = mixture.weights();
    let mut theta = Vec::with_capacity(n);
    let mut alloc = Vec::with_capacity(n);
    for _ in 0..n {
        let k = crate::distributions::categorical_unnormalized(weights, 1.0, rng);
        theta.push(mixture.means()[k] + mixture.variances()[k].sqrt() * sample_std_normal(rng));
        alloc.push(k);
    }
    (theta, alloc)
}

/// Complete responses `Y_ij ~ Ber(icc(theta_j, a_i, b_i, c_i))`, row-major.
pub fn simulate_responses(items: &ItemParameters, theta: &[f64], rng: &mut RngStream) -> Vec<Response> {
    let mut cells = Vec::with_capacity(theta.len() * items.len());
    for &t in theta {
        for i in 0..items.len() {
            let p = icc(t, items.a[i], items.b[i], items.c[i]);
            cells.push(Response::from_bool(rng.open01() < p));
        }
    }
    cells
}

/// Masks each cell independently with probability `rate`. An individual or
/// item left with no observed cell gets one cell, chosen uniformly,
/// restored, so the result is always a valid response matrix.
pub fn apply_missingness(
    cells: &mut [Response],
    n_items: usize,
    rate: f64,
    complete: &[Response],
    rng: &mut RngStream,
) {
    if rate <= 0.0 {
        return;
    }
    let n = cells.len() / n_items;
    for c in cells.iter_mut() {
        if rng.open01() < rate {
            *c = Response::Missing;
        }
    }
    for j in 0..n {
        let row = &cells[j * n_items..(j + 1) * n_items];
        if row.iter().all(|r| !r.is_observed()) {
            let i = (rng.open01() * n_items as f64) as usize;
            cells[j * n_items + i] = complete[j * n_items + i];
        }
    }
    for i in 0..n_items {
        if (0..n).all(|j| !cells[j * n_items + i].is_observed()) {
            let j = (rng.open01() * n as f64) as usize;
            cells[j * n_items + i] = complete[j * n_items + i];
        }
    }
}

pub fn simulate_dataset(design: &SimulationDesign) -> Result<SimulatedData> {
    design.validate()?;
    let stream = |id| RngStream::keyed(design.seed, domain::SIMULATE, 0, id);
    let items = simulate_items(&design.items, design.n_items, &mut stream(ITEMS));
    let (theta, allocation) = simulate_abilities(&design.mixture, design.n_individuals, &mut stream(ABILITIES));
    let complete = simulate_responses(&items, &theta, &mut stream(RESPONSES));
    let mut cells = complete.clone();
    apply_missingness(
        &mut cells,
        design.n_items,
        design.missing_rate,
        &complete,
        &mut stream(MASK),
    );
    let responses = ResponseMatrix::new(design.n_individuals, design.n_items, cells)?;
    Ok(SimulatedData {
        responses,
        truth: SimulationTruth {
            items,
            theta,
            allocation,
            mixture: design.mixture.clone(),
        },
    })
}
