//! Posterior summaries, accuracy metrics and plot-ready exports.

use crate::error::{Error, Result};
use crate::model::{mixture_mean, mixture_sd, MixtureParameters};
use crate::sampler::{ChainOutput, RejectionStats};

/// Minimum number of retained draws [`summarize`] accepts.
pub const MIN_DRAWS: usize = 10;
/// Minimum sample size for [`density_export`].
pub const MIN_DENSITY_SAMPLE: usize = 100;

/// Retained draws laid out one column per scalar parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawTable {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl DrawTable {
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            columns: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, column: Vec<f64>) {
        self.names.push(name.into());
        self.columns.push(column);
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
    }

    /// Item parameters, mixture parameters, the mixture mean and variance,
    /// then the abilities.
    pub fn from_chain(chain: &ChainOutput) -> Self {
        let mut t = Self::new();
        let n_items = chain.n_items();
        for (label, pick) in [("a", 0usize), ("b", 1), ("c", 2)] {
            for i in 0..n_items {
                let col = chain
                    .draws
                    .iter()
                    .map(|d| match pick {
                        0 => d.items.a[i],
                        1 => d.items.b[i],
                        _ => d.items.c[i],
                    })
                    .collect();
                t.push(format!("{label}_{}", i + 1), col);
            }
        }
        let mixtures: Vec<&MixtureParameters> = chain.draws.iter().map(|d| &d.mixture).collect();
        t.extend_mixture(&mixtures, chain.k);
        for j in 0..chain.n_individuals() {
            t.push(
                format!("theta_{}", j + 1),
                chain.draws.iter().map(|d| d.theta[j]).collect(),
            );
        }
        t
    }

    pub(crate) fn extend_mixture(&mut self, mixtures: &[&MixtureParameters], k: usize) {
        for (label, get) in [
            ("p", MixtureParameters::weights as fn(&MixtureParameters) -> &[f64]),
            ("mu", MixtureParameters::means),
            ("sigma2", MixtureParameters::variances),
        ] {
            for comp in 0..k {
                self.push(
                    format!("{label}_{}", comp + 1),
                    mixtures.iter().map(|m| get(m)[comp]).collect(),
                );
            }
        }
        self.push("mixture_mean", mixtures.iter().map(|m| mixture_mean(m)).collect());
        self.push("mixture_var", mixtures.iter().map(|m| mixture_sd(m).powi(2)).collect());
    }
}

impl Default for DrawTable {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q975: f64,
    pub ess: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    pub parameters: Vec<ParameterSummary>,
    pub n_draws: usize,
    pub discrimination: Option<RejectionStats>,
    pub weights: Option<RejectionStats>,
}

impl PosteriorSummary {
    pub fn get(&self, name: &str) -> Option<&ParameterSummary> {
        self.parameters.iter().find(|p| p.name == name)
    }
}

/// Linearly interpolated quantile of sorted data (the `(n - 1) p` rule).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (m, 0.0);
    }
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

/// Effective sample size from Geyer's initial positive sequence of
/// autocorrelations, capped at the number of draws.
pub fn effective_sample_size(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 4 {
        return n as f64;
    }
    let nf = n as f64;
    let m = x.iter().sum::<f64>() / nf;
    let d: Vec<f64> = x.iter().map(|v| v - m).collect();
    let c0 = d.iter().map(|v| v * v).sum::<f64>() / nf;
    if !(c0 > 0.0) {
        return nf;
    }
    let acf = |lag: usize| d[..n - lag].iter().zip(&d[lag..]).map(|(a, b)| a * b).sum::<f64>() / nf / c0;
    // sum of consecutive pairs Gamma_t = rho_{2t} + rho_{2t+1} while positive
    let mut tau = -1.0;
    let mut t = 0;
    while 2 * t + 1 < n {
        let gamma = acf(2 * t) + acf(2 * t + 1);
        if gamma <= 0.0 {
            break;
        }
        tau += 2.0 * gamma;
        t += 1;
    }
    (nf / tau.max(1.0 / nf)).min(nf)
}

pub fn summarize_column(name: &str, x: &[f64]) -> Result<ParameterSummary> {
    if x.len() < MIN_DRAWS {
        return Err(Error::Postprocess(format!(
            "{name}: {} draws, at least {MIN_DRAWS} are needed",
            x.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Postprocess(format!("{name}: non-finite draw")));
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (mean, sd) = mean_sd(x);
    Ok(ParameterSummary {
        name: name.to_string(),
        mean,
        sd,
        q025: quantile_sorted(&sorted, 0.025),
        q975: quantile_sorted(&sorted, 0.975),
        ess: effective_sample_size(x),
    })
}

pub fn summarize_table(table: &DrawTable) -> Result<PosteriorSummary> {
    let n = table.columns.first().map_or(0, Vec::len);
    if table.columns.iter().any(|c| c.len() != n) {
        return Err(Error::Postprocess("draw columns have different lengths".into()));
    }
    let parameters = table
        .names
        .iter()
        .zip(&table.columns)
        .map(|(name, col)| summarize_column(name, col))
        .collect::<Result<Vec<_>>>()?;
    Ok(PosteriorSummary {
        parameters,
        n_draws: n,
        discrimination: None,
        weights: None,
    })
}

/// Posterior mean, sd, 95% interval and ESS of every scalar parameter.
pub fn summarize(chain: &ChainOutput) -> Result<PosteriorSummary> {
    if chain.draws.len() < MIN_DRAWS {
        return Err(Error::Postprocess(format!(
            "chain has {} retained draws, at least {MIN_DRAWS} are needed",
            chain.draws.len()
        )));
    }
    let mut s = summarize_table(&DrawTable::from_chain(chain))?;
    s.discrimination = Some(chain.discrimination);
    s.weights = Some(chain.weights);
    Ok(s)
}

/// `sqrt(sum (estimate - truth)^2 / J)`.
pub fn rmse(estimate: &[f64], truth: &[f64]) -> Result<f64> {
    if estimate.len() != truth.len() || estimate.is_empty() {
        return Err(Error::Postprocess(format!(
            "rmse needs equal non-empty lengths, got {} and {}",
            estimate.len(),
            truth.len()
        )));
    }
    let ss: f64 = estimate.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((ss / estimate.len() as f64).sqrt())
}

/// Root mean squared difference between two fits' estimates.
pub fn rmsd(fit_a: &[f64], fit_b: &[f64]) -> Result<f64> {
    rmse(fit_a, fit_b)
}

/// Evaluation grid `lo, lo + step, ..., hi` with `points` nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Grid {
    pub fn new(lo: f64, hi: f64, points: usize) -> Result<Self> {
        if !(lo < hi) || points < 2 || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Config(format!("invalid grid [{lo}, {hi}] with {points} points")));
        }
        Ok(Self { lo, hi, points })
    }

    pub fn nodes(&self) -> Vec<f64> {
        let step = (self.hi - self.lo) / (self.points - 1) as f64;
        (0..self.points).map(|i| self.lo + step * i as f64).collect()
    }
}

pub const DEFAULT_GRID_POINTS: usize = 512;

/// Silverman's rule-of-thumb bandwidth `0.9 min(sd, IQR / 1.34) n^(-1/5)`.
pub fn silverman_bandwidth(values: &[f64]) -> Result<f64> {
    let (_, sd) = mean_sd(values);
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    if !(spread > 0.0) || !spread.is_finite() {
        return Err(Error::Postprocess(
            "density estimate needs values with positive spread".into(),
        ));
    }
    Ok(0.9 * spread * (values.len() as f64).powf(-0.2))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    pub x: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
}

impl DensityEstimate {
    /// Trapezoid-rule integral over the grid.
    pub fn mass(&self) -> f64 {
        trapezoid(&self.x, &self.density)
    }

    /// Locations of local maxima at least `min_relative_height` times the
    /// global maximum.
    pub fn modes(&self, min_relative_height: f64) -> Vec<f64> {
        local_maxima(&self.x, &self.density, min_relative_height)
    }
}

pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

pub fn local_maxima(x: &[f64], y: &[f64], min_relative_height: f64) -> Vec<f64> {
    let top = y.iter().copied().fold(0.0, f64::max);
    let mut out = Vec::new();
    let n = y.len();
    let mut i = 1;
    while i + 1 < n {
        if y[i] > y[i - 1] {
            // walk across a flat top
            let mut j = i;
            while j + 1 < n && y[j + 1] == y[i] {
                j += 1;
            }
            if j + 1 < n && y[j + 1] < y[i] && y[i] >= min_relative_height * top {
                out.push(0.5 * (x[i] + x[j]));
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Gaussian kernel density estimate with Silverman's bandwidth. Without a
/// grid, evaluates on `DEFAULT_GRID_POINTS` nodes spanning the data plus
/// four bandwidths on each side, so the estimate integrates to one.
pub fn density_export(values: &[f64], grid: Option<Grid>) -> Result<DensityEstimate> {
    if values.len() < MIN_DENSITY_SAMPLE {
        return Err(Error::Postprocess(format!(
            "density estimate needs at least {MIN_DENSITY_SAMPLE} values, got {}",
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Postprocess("density estimate got a non-finite value".into()));
    }
    let h = silverman_bandwidth(values)?;
    let grid = match grid {
        Some(g) => g,
        None => {
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min) - 4.0 * h;
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 4.0 * h;
            Grid::new(lo, hi, DEFAULT_GRID_POINTS)?
        }
    };
    let x = grid.nodes();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let norm = 1.0 / (values.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let reach = 8.0 * h;
    let density = x
        .iter()
        .map(|&g| {
            let start = sorted.partition_point(|&v| v < g - reach);
            let end = sorted.partition_point(|&v| v <= g + reach);
            sorted[start..end]
                .iter()
                .map(|&v| {
                    let u = (g - v) / h;
                    (-0.5 * u * u).exp()
                })
                .sum::<f64>()
                * norm
        })
        .collect();
    Ok(DensityEstimate {
        x,
        density,
        bandwidth: h,
    })
}

/// `integral |f - g|` over the common grid by the trapezoid rule.
pub fn l1_distance(x: &[f64], f: &[f64], g: &[f64]) -> f64 {
    let diff: Vec<f64> = f.iter().zip(g).map(|(a, b)| (a - b).abs()).collect();
    trapezoid(x, &diff)
}

/// Posterior mean of the mixture density at each node.
pub fn posterior_mixture_density(chain: &ChainOutput, x: &[f64]) -> Vec<f64> {
    let n = chain.draws.len() as f64;
    let mut out = vec![0.0; x.len()];
    for d in &chain.draws {
        for (o, &v) in out.iter_mut().zip(x) {
            *o += d.mixture.density(v);
        }
    }
    out.iter_mut().for_each(|o| *o /= n);
    out
}

/// Summary of the posterior of `p_1`. Values far below one favour a
/// genuine mixture over a single normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct P1Evidence {
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q975: f64,
    /// Posterior probability that `p_1 < 0.9`.
    pub prob_below_0_9: f64,
}

pub fn p1_evidence_from_draws(p1: &[f64]) -> Result<P1Evidence> {
    if p1.is_empty() {
        return Err(Error::Postprocess("no p_1 draws".into()));
    }
    let mut sorted = p1.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (mean, sd) = mean_sd(p1);
    Ok(P1Evidence {
        mean,
        sd,
        q025: quantile_sorted(&sorted, 0.025),
        q975: quantile_sorted(&sorted, 0.975),
        prob_below_0_9: p1.iter().filter(|&&p| p < 0.9).count() as f64 / p1.len() as f64,
    })
}

pub fn p1_evidence(chain: &ChainOutput) -> Result<P1Evidence> {
    if chain.k < 2 {
        return Err(Error::Postprocess("p_1 evidence needs a chain with K >= 2".into()));
    }
    let p1: Vec<f64> = chain.draws.iter().map(|d| d.mixture.weights()[0]).collect();
    p1_evidence_from_draws(&p1)
}

/// Every `every`-th row of the given columns, with the kept row indices.
pub fn thin_trace(columns: &[Vec<f64>], every: usize) -> (Vec<usize>, Vec<Vec<f64>>) {
    let every = every.max(1);
    let n = columns.first().map_or(0, Vec::len);
    let rows: Vec<usize> = (0..n).step_by(every).collect();
    let cols = columns.iter().map(|c| rows.iter().map(|&r| c[r]).collect()).collect();
    (rows, cols)
}
