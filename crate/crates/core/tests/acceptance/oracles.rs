//! Each block update, repeated 10^5 times from one fixed state, against an
//! independent grid-integration or enumeration oracle of its conditional.

use mixirt::distributions::std_normal_pdf;
use mixirt::model::{ItemParameters, MixtureParameters, PriorSpec, Response, ResponseMatrix};
use mixirt::sampler::blocks::{
    update_abilities, update_augmentation, update_components, update_discrimination, update_guessing, update_weights,
};
use mixirt::sampler::SweepContext;

use super::common::{integrate, Outcome};

const DRAWS: u64 = 100_000;
const FIRST_TOL: f64 = 0.02;
const SECOND_TOL: f64 = 0.05;

struct Check {
    block: &'static str,
    name: String,
    second: bool,
    oracle: f64,
    estimate: f64,
}

#[derive(Default)]
struct Report(Vec<Check>);

impl Report {
    fn add(&mut self, block: &'static str, name: impl Into<String>, second: bool, oracle: f64, estimate: f64) {
        self.0.push(Check {
            block,
            name: name.into(),
            second,
            oracle,
            estimate,
        });
    }
}

/// Running sums of a fixed number of scalar statistics.
struct Sums(Vec<f64>);

impl Sums {
    fn new(n: usize) -> Self {
        Sums(vec![0.0; n])
    }

    fn add(&mut self, values: &[f64]) {
        self.0.iter_mut().zip(values).for_each(|(s, v)| *s += v);
    }

    fn means(&self) -> Vec<f64> {
        self.0.iter().map(|s| s / DRAWS as f64).collect()
    }
}

fn matrix(n: usize, n_items: usize, cells: &[u8]) -> ResponseMatrix {
    let cells = cells
        .iter()
        .map(|&c| match c {
            0 => Response::Incorrect,
            1 => Response::Correct,
            _ => Response::Missing,
        })
        .collect();
    ResponseMatrix::new(n, n_items, cells).unwrap()
}

fn ctx(r: u64) -> SweepContext {
    SweepContext::sequential(404, r)
}

/// Moments of `N(m, 1)` restricted to `x > 0` (`upper`) or `x < 0`.
fn truncated_moments(m: f64, upper: bool) -> (f64, f64) {
    let (lo, hi) = if upper {
        (0.0, m.max(0.0) + 12.0)
    } else {
        (m.min(0.0) - 12.0, 0.0)
    };
    let f = |x: f64| std_normal_pdf(x - m);
    let z = integrate(lo, hi, 20_001, f);
    (
        integrate(lo, hi, 20_001, |x| x * f(x)) / z,
        integrate(lo, hi, 20_001, |x| x * x * f(x)) / z,
    )
}

fn augmentation(report: &mut Report) {
    let y = matrix(1, 4, &[1, 0, 1, 1]);
    let items = ItemParameters::new(
        vec![1.0, 0.5, 2.0, 0.8],
        vec![0.0, 1.0, -0.5, 2.5],
        vec![0.2, 0.1, 0.3, 0.05],
    )
    .unwrap();
    let theta = [0.3];
    let mut z = vec![false; 4];
    let mut x = vec![0.0; 4];
    let mut sums = Sums::new(12);
    for r in 1..=DRAWS {
        update_augmentation(&y, &items, &theta, &ctx(r), &mut z, &mut x);
        let mut v = Vec::with_capacity(12);
        for i in 0..4 {
            v.extend([z[i] as u8 as f64, x[i], x[i] * x[i]]);
        }
        sums.add(&v);
    }
    let est = sums.means();
    for i in 0..4 {
        let m = items.a[i] * theta[0] - items.b[i];
        let correct = y.get(0, i) == Response::Correct;
        // enumerate Z: a guess happens with weight c, a solved item with (1 - c) Phi(m)
        let p_guess = if correct {
            let c = items.c[i];
            let phi_m = integrate(-12.0, m, 20_001, std_normal_pdf);
            c / (c + (1.0 - c) * phi_m)
        } else {
            0.0
        };
        let (m1, m2) = truncated_moments(m, correct);
        report.add("(X, Z)", format!("P(Z_{i} = 1)"), false, p_guess, est[3 * i]);
        report.add(
            "(X, Z)",
            format!("E[X_{i}]"),
            false,
            (1.0 - p_guess) * m1,
            est[3 * i + 1],
        );
        report.add(
            "(X, Z)",
            format!("E[X_{i}^2]"),
            true,
            (1.0 - p_guess) * m2,
            est[3 * i + 2],
        );
    }
}

fn abilities(report: &mut Report) {
    // five individuals, three items, one missing cell and a few guesses
    let y = matrix(5, 3, &[1, 0, 1, 0, 0, 1, 1, 1, 1, 2, 1, 0, 1, 1, 0]);
    let items = ItemParameters::new(vec![1.2, 0.7, 2.0], vec![-0.3, 0.5, 1.0], vec![0.2, 0.2, 0.2]).unwrap();
    let z = vec![
        false, false, true, //
        false, false, false, //
        false, true, false, //
        false, false, false, //
        true, false, false,
    ];
    let x = vec![
        0.8, -0.4, 0.0, //
        -1.1, -0.2, 0.6, //
        1.5, 0.0, 0.3, //
        0.0, 0.9, -1.7, //
        0.0, 0.1, -0.5,
    ];
    let mixture = MixtureParameters::new(vec![0.7, 0.3], vec![0.0, 1.5], vec![1.0, 0.5]).unwrap();
    let mut theta = vec![0.0; 5];
    let mut alloc = vec![0; 5];
    let mut sums = Sums::new(15);
    for r in 1..=DRAWS {
        update_abilities(&y, &z, &x, &items, &mixture, &ctx(r), &mut theta, &mut alloc);
        let mut v = Vec::with_capacity(15);
        for j in 0..5 {
            v.extend([theta[j], theta[j] * theta[j], (alloc[j] == 1) as u8 as f64]);
        }
        sums.add(&v);
    }
    let est = sums.means();
    for j in 0..5 {
        let lik = |t: f64| {
            (0..3)
                .filter(|&i| y.get(j, i).is_observed() && !z[j * 3 + i])
                .map(|i| std_normal_pdf(x[j * 3 + i] - (items.a[i] * t - items.b[i])))
                .product::<f64>()
        };
        let joint = |t: f64, k: usize| {
            let (mu, v) = (mixture.means()[k], mixture.variances()[k]);
            mixture.weights()[k] * std_normal_pdf((t - mu) / v.sqrt()) / v.sqrt() * lik(t)
        };
        let (lo, hi, n) = (-12.0, 12.0, 24_001);
        let mass = |k: usize| integrate(lo, hi, n, |t| joint(t, k));
        let total = mass(0) + mass(1);
        let m1 = (integrate(lo, hi, n, |t| t * joint(t, 0)) + integrate(lo, hi, n, |t| t * joint(t, 1))) / total;
        let m2 =
            (integrate(lo, hi, n, |t| t * t * joint(t, 0)) + integrate(lo, hi, n, |t| t * t * joint(t, 1))) / total;
        report.add("(theta, W)", format!("E[theta_{j}]"), false, m1, est[3 * j]);
        report.add("(theta, W)", format!("E[theta_{j}^2]"), true, m2, est[3 * j + 1]);
        report.add(
            "(theta, W)",
            format!("P(W_{j} = 2)"),
            false,
            mass(1) / total,
            est[3 * j + 2],
        );
    }
}

/// 2-D midpoint-rule moments of an unnormalized log density on a box.
fn grid_moments_2d(
    (x_lo, x_hi): (f64, f64),
    (y_lo, y_hi): (f64, f64),
    n: usize,
    log_density: impl Fn(f64, f64) -> f64,
) -> [f64; 5] {
    let (hx, hy) = ((x_hi - x_lo) / n as f64, (y_hi - y_lo) / n as f64);
    let mut max = f64::NEG_INFINITY;
    let mut vals = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let v = log_density(x_lo + (i as f64 + 0.5) * hx, y_lo + (j as f64 + 0.5) * hy);
            vals[i * n + j] = v;
            max = max.max(v);
        }
    }
    let mut s = [0.0; 6];
    for i in 0..n {
        let xv = x_lo + (i as f64 + 0.5) * hx;
        for j in 0..n {
            let yv = y_lo + (j as f64 + 0.5) * hy;
            let w = (vals[i * n + j] - max).exp();
            s[0] += w;
            s[1] += w * xv;
            s[2] += w * yv;
            s[3] += w * xv * xv;
            s[4] += w * yv * yv;
            s[5] += w * xv * yv;
        }
    }
    [s[1] / s[0], s[2] / s[0], s[3] / s[0], s[4] / s[0], s[5] / s[0]]
}

fn discrimination(report: &mut Report) {
    // the second prior puts real mass below a = 0, so the truncation binds
    let theta = [-1.5, -0.5, 0.2, 1.0, 2.0];
    let y = matrix(5, 2, &[0, 1, 0, 0, 1, 1, 1, 0, 1, 1]);
    let z = vec![false, true, false, false, false, false, true, false, false, false];
    let x = vec![-0.7, 0.0, -0.2, -0.9, 0.4, 0.3, 0.0, -0.1, 1.9, 0.2];
    let priors = [
        PriorSpec::defaults(1),
        PriorSpec {
            mu_a: 0.2,
            sigma2_a: 1.0,
            mu_b: 0.0,
            sigma2_b: 4.0,
            ..PriorSpec::defaults(1)
        },
    ];
    for (case, pr) in priors.iter().enumerate() {
        let mut items = ItemParameters::new(vec![1.0, 1.0], vec![0.0, 0.0], vec![0.2, 0.2]).unwrap();
        let mut sums = Sums::new(10);
        for r in 1..=DRAWS {
            if let Err(e) = update_discrimination(&y, &z, &x, &theta, pr, 1_000_000, &ctx(r), &mut items) {
                report.add("(a, b)", format!("error {e}"), false, 0.0, f64::INFINITY);
                return;
            }
            let mut v = Vec::with_capacity(10);
            for i in 0..2 {
                let (a, b) = (items.a[i], items.b[i]);
                v.extend([a, b, a * a, b * b, a * b]);
            }
            sums.add(&v);
        }
        let est = sums.means();
        for i in 0..2 {
            let log_post = |a: f64, b: f64| {
                let mut l = -0.5 * (a - pr.mu_a).powi(2) / pr.sigma2_a - 0.5 * (b - pr.mu_b).powi(2) / pr.sigma2_b;
                for j in 0..5 {
                    if !z[j * 2 + i] {
                        l -= 0.5 * (x[j * 2 + i] - (a * theta[j] - b)).powi(2);
                    }
                }
                l
            };
            let o = grid_moments_2d((0.0, 8.0), (-8.0, 8.0), 800, log_post);
            let names = ["E[a]", "E[b]", "E[a^2]", "E[b^2]", "E[ab]"];
            for (q, name) in names.iter().enumerate() {
                report.add(
                    "(a, b)",
                    format!("case {case} item {i} {name}"),
                    q >= 2,
                    o[q],
                    est[5 * i + q],
                );
            }
        }
    }
}

fn guessing(report: &mut Report) {
    // the second item has a missing cell, so its Beta update counts four cells
    let y = matrix(5, 2, &[1, 1, 1, 2, 0, 1, 1, 1, 1, 0]);
    let z = vec![true, false, false, false, false, true, true, false, false, false];
    let cases = [
        PriorSpec::defaults(1),
        PriorSpec {
            c_bounds: Some((0.1, 0.3)),
            ..PriorSpec::defaults(1)
        },
    ];
    for (case, pr) in cases.iter().enumerate() {
        let mut c = vec![0.2, 0.2];
        let mut sums = Sums::new(4);
        for r in 1..=DRAWS {
            if let Err(e) = update_guessing(&y, &z, pr, &ctx(r), &mut c) {
                report.add("c", format!("error {e}"), false, 0.0, f64::INFINITY);
                return;
            }
            sums.add(&[c[0], c[0] * c[0], c[1], c[1] * c[1]]);
        }
        let est = sums.means();
        let (lo, hi) = pr.guessing_bounds();
        for i in 0..2 {
            // Bernoulli(c) prior on Z for every observed cell
            let (mut guesses, mut cells) = (0.0, 0.0);
            for j in 0..5 {
                if y.get(j, i).is_observed() {
                    cells += 1.0;
                    guesses += z[j * 2 + i] as u8 as f64;
                }
            }
            let dens = |v: f64| v.powf(guesses + pr.alpha_c - 1.0) * (1.0 - v).powf(cells - guesses + pr.beta_c - 1.0);
            let zc = integrate(lo, hi, 100_001, dens);
            let m1 = integrate(lo, hi, 100_001, |v| v * dens(v)) / zc;
            let m2 = integrate(lo, hi, 100_001, |v| v * v * dens(v)) / zc;
            report.add("c", format!("case {case} E[c_{i}]"), false, m1, est[2 * i]);
            report.add("c", format!("case {case} E[c_{i}^2]"), true, m2, est[2 * i + 1]);
        }
    }
}

fn components(report: &mut Report) {
    let theta = [-0.4, 1.1, 0.3, 2.2, 1.6];
    let alloc = vec![0, 1, 0, 1, 1];
    let pr = PriorSpec {
        nig_m: vec![0.5],
        nig_beta: 0.5,
        nig_d: 3.0,
        nig_e: 2.0,
        ..PriorSpec::defaults(2)
    };
    let mut mixture = MixtureParameters::new(vec![0.7, 0.3], vec![0.0, 1.0], vec![1.0, 1.0]).unwrap();
    let mut sums = Sums::new(4);
    for r in 1..=DRAWS {
        let mut a = alloc.clone();
        update_components(&theta, &mut a, &pr, &ctx(r), &mut mixture);
        let (mu, v) = (mixture.means()[1], mixture.variances()[1]);
        sums.add(&[mu, v, mu * mu, v * v]);
    }
    let est = sums.means();
    // grid over (mu, ln sigma2); the Jacobian of sigma2 = e^u is e^u
    let log_post = |mu: f64, u: f64| {
        let v = u.exp();
        let mut l = -0.5 * v.ln() - 0.5 * pr.nig_beta * (mu - pr.nig_m[0]).powi(2) / v;
        l += -(pr.nig_d + 1.0) * v.ln() - pr.nig_e / v;
        for (t, &k) in theta.iter().zip(&alloc) {
            if k == 1 {
                l += -0.5 * v.ln() - 0.5 * (t - mu).powi(2) / v;
            }
        }
        l + u
    };
    let (mu_box, u_box) = ((-8.0, 10.0), (-7.0, 6.0));
    let [m_mu, _, m_mu2, _, _] = grid_moments_2d(mu_box, u_box, 900, log_post);
    // E[sigma2] and E[sigma2^2] as ratios of integrals weighted by e^u and e^2u
    let z0 = normalizer(mu_box, u_box, 900, log_post);
    let z1 = normalizer(mu_box, u_box, 900, |mu, u| log_post(mu, u) + u);
    let z2 = normalizer(mu_box, u_box, 900, |mu, u| log_post(mu, u) + 2.0 * u);
    report.add("(mu, sigma2)", "E[mu_2]", false, m_mu, est[0]);
    report.add("(mu, sigma2)", "E[sigma2_2]", false, z1 / z0, est[1]);
    report.add("(mu, sigma2)", "E[mu_2^2]", true, m_mu2, est[2]);
    report.add("(mu, sigma2)", "E[sigma2_2^2]", true, z2 / z0, est[3]);
}

fn normalizer((x_lo, x_hi): (f64, f64), (y_lo, y_hi): (f64, f64), n: usize, f: impl Fn(f64, f64) -> f64) -> f64 {
    let (hx, hy) = ((x_hi - x_lo) / n as f64, (y_hi - y_lo) / n as f64);
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += f(x_lo + (i as f64 + 0.5) * hx, y_lo + (j as f64 + 0.5) * hy).exp();
        }
    }
    s * hx * hy
}

fn weights(report: &mut Report) {
    let alloc = vec![0, 1, 2, 0, 1];
    let pr = PriorSpec {
        alphas: vec![2.0, 1.0, 1.0],
        ..PriorSpec::defaults(3)
    };
    let mut mixture = MixtureParameters::new(vec![0.6, 0.2, 0.2], vec![0.0, 1.0, 2.0], vec![1.0, 1.0, 1.0]).unwrap();
    let mut sums = Sums::new(6);
    for r in 1..=DRAWS {
        if let Err(e) = update_weights(&alloc, &pr, 1_000_000, &ctx(r), &mut mixture) {
            report.add("p", format!("error {e}"), false, 0.0, f64::INFINITY);
            return;
        }
        let p = mixture.weights();
        sums.add(&[p[0], p[1], p[2], p[0] * p[0], p[1] * p[1], p[2] * p[2]]);
    }
    let est = sums.means();
    // Dirichlet(4, 3, 2) on the part of the simplex with p_1 > 0.5
    let counts = [2.0, 2.0, 1.0];
    let a: Vec<f64> = counts.iter().zip(&pr.alphas).map(|(n, al)| n + al).collect();
    let n = 2000;
    let mut s = [0.0; 7];
    for i in 0..n {
        let p1 = 0.5 + 0.5 * (i as f64 + 0.5) / n as f64;
        for j in 0..n {
            let p2 = (1.0 - p1) * (j as f64 + 0.5) / n as f64;
            let p3 = 1.0 - p1 - p2;
            // (1 - p1) is the width of the p2 slice
            let w = p1.powf(a[0] - 1.0) * p2.powf(a[1] - 1.0) * p3.powf(a[2] - 1.0) * (1.0 - p1);
            for (slot, v) in [1.0, p1, p2, p3, p1 * p1, p2 * p2, p3 * p3].iter().enumerate() {
                s[slot] += w * v;
            }
        }
    }
    let names = ["E[p_1]", "E[p_2]", "E[p_3]", "E[p_1^2]", "E[p_2^2]", "E[p_3^2]"];
    for (q, name) in names.iter().enumerate() {
        report.add("p", *name, q >= 3, s[q + 1] / s[0], est[q]);
    }
}

pub fn criterion_4() -> Outcome {
    let mut report = Report::default();
    augmentation(&mut report);
    abilities(&mut report);
    discrimination(&mut report);
    guessing(&mut report);
    components(&mut report);
    weights(&mut report);

    let verbose = std::env::var_os("ACCEPTANCE_VERBOSE").is_some();
    let mut worst = [0.0f64; 2];
    let mut failures = Vec::new();
    for c in &report.0 {
        let err = (c.estimate - c.oracle).abs();
        let tol = if c.second { SECOND_TOL } else { FIRST_TOL };
        if verbose {
            println!(
                "  {:>13} {:<24} oracle {:>9.5} sampled {:>9.5}",
                c.block, c.name, c.oracle, c.estimate
            );
        }
        worst[c.second as usize] = worst[c.second as usize].max(err);
        if err.is_nan() || err > tol {
            failures.push(format!("{} {}", c.block, c.name));
        }
    }
    let detail = format!(
        "{} moments across six blocks, largest error {:.4} (first) and {:.4} (second)",
        report.0.len(),
        worst[0],
        worst[1]
    );
    if failures.is_empty() {
        Outcome::new(true, detail)
    } else {
        Outcome::new(false, format!("{detail}; outside tolerance: {}", failures.join(", ")))
    }
}
