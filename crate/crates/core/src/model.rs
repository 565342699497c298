//! Data, parameter and augmented-variable types, and the model-evaluation
//! functions that do not depend on the sampler.

use crate::distributions::phi;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Response {
    Incorrect = 0,
    Correct = 1,
    Missing = 2,
}

impl Response {
    #[inline]
    pub fn is_observed(self) -> bool {
        self != Response::Missing
    }

    pub fn from_bool(correct: bool) -> Self {
        if correct {
            Response::Correct
        } else {
            Response::Incorrect
        }
    }
}

/// Individuals-by-items binary responses, stored row-major by individual.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseMatrix {
    n_individuals: usize,
    n_items: usize,
    cells: Vec<Response>,
}

impl ResponseMatrix {
    /// Builds the matrix after checking that every individual and every item
    /// has at least one observed response.
    pub fn new(n_individuals: usize, n_items: usize, cells: Vec<Response>) -> Result<Self> {
        if n_individuals == 0 || n_items == 0 {
            return Err(Error::InvalidData(format!(
                "response matrix must be non-empty, got {n_individuals} x {n_items}"
            )));
        }
        if cells.len() != n_individuals * n_items {
            return Err(Error::InvalidData(format!(
                "expected {} cells for {n_individuals} x {n_items}, got {}",
                n_individuals * n_items,
                cells.len()
            )));
        }
        let mut item_seen = vec![false; n_items];
        for (j, row) in cells.chunks(n_items).enumerate() {
            let mut any = false;
            for (i, r) in row.iter().enumerate() {
                if r.is_observed() {
                    any = true;
                    item_seen[i] = true;
                }
            }
            if !any {
                return Err(Error::InvalidData(format!(
                    "individual {} has no observed responses",
                    j + 1
                )));
            }
        }
        if let Some(i) = item_seen.iter().position(|seen| !seen) {
            return Err(Error::InvalidData(format!("item {} has no observed responses", i + 1)));
        }
        Ok(Self {
            n_individuals,
            n_items,
            cells,
        })
    }

    pub fn n_individuals(&self) -> usize {
        self.n_individuals
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    #[inline]
    pub fn get(&self, individual: usize, item: usize) -> Response {
        self.cells[individual * self.n_items + item]
    }

    #[inline]
    pub fn row(&self, individual: usize) -> &[Response] {
        let start = individual * self.n_items;
        &self.cells[start..start + self.n_items]
    }

    pub fn cells(&self) -> &[Response] {
        &self.cells
    }

    pub fn observed_count(&self) -> usize {
        self.cells.iter().filter(|r| r.is_observed()).count()
    }

    /// Proportion correct over each individual's observed items.
    pub fn proportion_correct(&self) -> Vec<f64> {
        (0..self.n_individuals)
            .map(|j| {
                let (mut n, mut s) = (0usize, 0usize);
                for r in self.row(j) {
                    match r {
                        Response::Correct => {
                            n += 1;
                            s += 1
                        }
                        Response::Incorrect => n += 1,
                        Response::Missing => {}
                    }
                }
                s as f64 / n as f64
            })
            .collect()
    }
}

/// Per-item discrimination `a`, difficulty `b` and guessing `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemParameters {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl ItemParameters {
    pub fn new(a: Vec<f64>, b: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        let items = Self { a, b, c };
        items.validate()?;
        Ok(items)
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.b.len() != self.a.len() || self.c.len() != self.a.len() {
            return Err(Error::InvalidData(format!(
                "item parameter lengths differ: a={}, b={}, c={}",
                self.a.len(),
                self.b.len(),
                self.c.len()
            )));
        }
        for i in 0..self.a.len() {
            if !(self.a[i] > 0.0) || !self.a[i].is_finite() {
                return Err(Error::InvalidData(format!(
                    "a[{}] = {} is not positive",
                    i + 1,
                    self.a[i]
                )));
            }
            if !self.b[i].is_finite() {
                return Err(Error::InvalidData(format!(
                    "b[{}] = {} is not finite",
                    i + 1,
                    self.b[i]
                )));
            }
            if !(self.c[i] > 0.0 && self.c[i] < 1.0) {
                return Err(Error::InvalidData(format!(
                    "c[{}] = {} is outside (0, 1)",
                    i + 1,
                    self.c[i]
                )));
            }
        }
        Ok(())
    }
}

/// Normal-mixture ability distribution.
///
/// Identified values have component 1 pinned at `N(0, 1)`, `p[0] > 0.5` and
/// the remaining means in strictly increasing order. Simulation truths may
/// be built with [`MixtureParameters::unidentified`], which skips those
/// restrictions.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureParameters {
    pub(crate) weights: Vec<f64>,
    pub(crate) means: Vec<f64>,
    pub(crate) variances: Vec<f64>,
}

impl MixtureParameters {
    pub fn new(weights: Vec<f64>, means: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        let m = Self::unidentified(weights, means, variances)?;
        m.check_identified()?;
        Ok(m)
    }

    pub fn unidentified(weights: Vec<f64>, means: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        let k = weights.len();
        if k == 0 || means.len() != k || variances.len() != k {
            return Err(Error::InvalidData(format!(
                "mixture needs matching non-empty vectors, got {} weights, {} means, {} variances",
                k,
                means.len(),
                variances.len()
            )));
        }
        if weights.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::InvalidData(format!("negative mixture weight in {weights:?}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidData(format!("mixture weights sum to {total}")));
        }
        if means.iter().any(|m| !m.is_finite()) || variances.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "invalid component moments: means {means:?}, variances {variances:?}"
            )));
        }
        Ok(Self {
            weights,
            means,
            variances,
        })
    }

    pub fn standard_normal() -> Self {
        Self {
            weights: vec![1.0],
            means: vec![0.0],
            variances: vec![1.0],
        }
    }

    pub fn check_identified(&self) -> Result<()> {
        if self.means[0] != 0.0 || self.variances[0] != 1.0 {
            return Err(Error::InvalidData(format!(
                "component 1 must be N(0, 1), got N({}, {})",
                self.means[0], self.variances[0]
            )));
        }
        if self.k() > 1 && !(self.weights[0] > 0.5) {
            return Err(Error::InvalidData(format!(
                "p[1] = {} must exceed 0.5",
                self.weights[0]
            )));
        }
        if self.means[1..].windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidData(format!(
                "component means 2..K must increase, got {:?}",
                &self.means[1..]
            )));
        }
        Ok(())
    }

    pub fn is_identified(&self) -> bool {
        self.check_identified().is_ok()
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn mean(&self) -> f64 {
        mixture_mean(self)
    }

    pub fn sd(&self) -> f64 {
        mixture_sd(self)
    }

    pub fn variance(&self) -> f64 {
        let s = mixture_sd(self);
        s * s
    }

    pub fn density(&self, x: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.means)
            .zip(&self.variances)
            .map(|((&p, &m), &v)| {
                let z = (x - m) / v.sqrt();
                p * crate::distributions::std_normal_pdf(z) / v.sqrt()
            })
            .sum()
    }
}

/// Mean of the mixture. For identified parameters component 1 contributes
/// nothing, so this is `sum_{k>=2} p_k mu_k`.
pub fn mixture_mean(params: &MixtureParameters) -> f64 {
    params.weights.iter().zip(&params.means).map(|(p, m)| p * m).sum()
}

/// Standard deviation of the mixture, `sqrt(sum_k p_k ((mu_k - mean)^2 + sigma2_k))`,
/// which reduces to the pinned-component form when `(mu_1, sigma2_1) = (0, 1)`.
pub fn mixture_sd(params: &MixtureParameters) -> f64 {
    let mean = mixture_mean(params);
    params
        .weights
        .iter()
        .zip(&params.means)
        .zip(&params.variances)
        .map(|((p, m), v)| p * ((m - mean).powi(2) + v))
        .sum::<f64>()
        .sqrt()
}

/// Hyperparameters of the prior distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    /// `a_i ~ N(mu_a, sigma2_a)` truncated to `a_i > 0`.
    pub mu_a: f64,
    pub sigma2_a: f64,
    /// `b_i ~ N(mu_b, sigma2_b)`.
    pub mu_b: f64,
    pub sigma2_b: f64,
    /// `c_i ~ Beta(alpha_c, beta_c)`, optionally truncated to `c_bounds`.
    pub alpha_c: f64,
    pub beta_c: f64,
    pub c_bounds: Option<(f64, f64)>,
    /// Dirichlet parameters for the weights, one per component.
    pub alphas: Vec<f64>,
    /// NIG prior means for components 2..K.
    pub nig_m: Vec<f64>,
    /// NIG precision multiplier: `mu_k | sigma2_k ~ N(m_k, sigma2_k / nig_beta)`.
    pub nig_beta: f64,
    /// `sigma2_k ~ InverseGamma(shape nig_d, scale nig_e)`.
    pub nig_d: f64,
    pub nig_e: f64,
}

impl PriorSpec {
    /// Priors of the simulation studies: `a ~ N(1, 3^2)` truncated positive,
    /// `b ~ N(0, 10^2)`, `c ~ Beta(4, 12)`, `p ~ Dirichlet(2, 1, ..., 1)`
    /// truncated to `p_1 > 0.5`, and `NIG(0, 100, 0.001, 0.001)` components,
    /// where 100 is the prior variance multiplier of `mu_k` (so the precision
    /// multiplier is 0.01).
    pub fn defaults(k: usize) -> Self {
        let mut alphas = vec![1.0; k.max(1)];
        if k > 1 {
            alphas[0] = 2.0;
        }
        Self {
            mu_a: 1.0,
            sigma2_a: 9.0,
            mu_b: 0.0,
            sigma2_b: 100.0,
            alpha_c: 4.0,
            beta_c: 12.0,
            c_bounds: None,
            alphas,
            nig_m: vec![0.0; k.saturating_sub(1)],
            nig_beta: 0.01,
            nig_d: 0.001,
            nig_e: 0.001,
        }
    }

    pub fn guessing_bounds(&self) -> (f64, f64) {
        self.c_bounds.unwrap_or((0.0, 1.0))
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        let positive = [
            ("sigma2_a", self.sigma2_a),
            ("sigma2_b", self.sigma2_b),
            ("alpha_c", self.alpha_c),
            ("beta_c", self.beta_c),
            ("nig_beta", self.nig_beta),
            ("nig_d", self.nig_d),
            ("nig_e", self.nig_e),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.mu_a.is_finite() || !self.mu_b.is_finite() {
            return Err(Error::Config("mu_a and mu_b must be finite".into()));
        }
        if let Some((lo, hi)) = self.c_bounds {
            if !(0.0 <= lo && lo < hi && hi <= 1.0) {
                return Err(Error::Config(format!(
                    "c bounds ({lo}, {hi}) must satisfy 0 <= lower < upper <= 1"
                )));
            }
        }
        if k == 0 {
            return Err(Error::Config("at least one mixture component is required".into()));
        }
        if self.alphas.len() != k {
            return Err(Error::Config(format!(
                "{} Dirichlet parameters given for K = {k}",
                self.alphas.len()
            )));
        }
        if self.alphas.iter().any(|&a| !(a > 0.0)) {
            return Err(Error::Config(format!(
                "Dirichlet parameters must be positive, got {:?}",
                self.alphas
            )));
        }
        if self.nig_m.len() != k - 1 {
            return Err(Error::Config(format!(
                "{} NIG means given, K = {k} needs {}",
                self.nig_m.len(),
                k - 1
            )));
        }
        Ok(())
    }
}

/// Target location and scale for post-hoc rescaling of ability draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RescaleSpec {
    pub mean: f64,
    pub sd: f64,
}

impl RescaleSpec {
    pub fn new(mean: f64, sd: f64) -> Result<Self> {
        if !(sd > 0.0) || !mean.is_finite() || !sd.is_finite() {
            return Err(Error::Config(format!(
                "rescale target ({mean}, {sd}) needs a positive sd"
            )));
        }
        Ok(Self { mean, sd })
    }
}

/// Latent variables of the augmented model plus the abilities.
///
/// `z` and `x` are row-major individuals-by-items; missing cells hold
/// `false` and `0.0` and carry no meaning.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedState {
    pub theta: Vec<f64>,
    pub z: Vec<bool>,
    pub x: Vec<f64>,
    /// Zero-based component index per individual.
    pub allocation: Vec<usize>,
}

impl AugmentedState {
    /// Checks the sign table linking `X`, `Z` and `Y` on observed cells.
    pub fn check_constraints(&self, y: &ResponseMatrix) -> Result<()> {
        let n_items = y.n_items();
        for (idx, &r) in y.cells().iter().enumerate() {
            let (z, x) = (self.z[idx], self.x[idx]);
            let ok = match (r, z) {
                (Response::Missing, _) => true,
                (Response::Incorrect, true) => false,
                (Response::Incorrect, false) => x < 0.0,
                (Response::Correct, true) => x == 0.0,
                (Response::Correct, false) => x > 0.0,
            };
            if !ok {
                return Err(Error::InvalidData(format!(
                    "augmented cell (individual {}, item {}) violates constraints: Y={:?}, Z={z}, X={x}",
                    idx / n_items + 1,
                    idx % n_items + 1,
                    r
                )));
            }
        }
        Ok(())
    }
}

/// Item characteristic curve `c + (1 - c) Phi(a theta - b)`.
#[inline]
pub fn icc(theta: f64, a: f64, b: f64, c: f64) -> f64 {
    c + (1.0 - c) * phi(a * theta - b)
}

/// Log-likelihood over observed cells; missing cells contribute nothing.
pub fn loglikelihood(y: &ResponseMatrix, items: &ItemParameters, theta: &[f64]) -> f64 {
    let n_items = y.n_items();
    let mut total = 0.0;
    for (j, &t) in theta.iter().enumerate().take(y.n_individuals()) {
        for (i, &r) in y.row(j).iter().enumerate().take(n_items) {
            let m = items.a[i] * t - items.b[i];
            let c = items.c[i];
            total += match r {
                Response::Correct => (c + (1.0 - c) * phi(m)).ln(),
                Response::Incorrect => (1.0 - c).ln() + phi(-m).ln(),
                Response::Missing => 0.0,
            };
        }
    }
    total
}

/// Maps one iteration's abilities to mean `spec.mean` and sd `spec.sd`
/// using that iteration's mixture moments.
pub fn rescale_draw(theta: &[f64], params: &MixtureParameters, spec: &RescaleSpec) -> Vec<f64> {
    let mean = mixture_mean(params);
    let sd = mixture_sd(params);
    theta.iter().map(|&t| spec.mean + spec.sd * (t - mean) / sd).collect()
}
