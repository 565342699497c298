use mixirt::distributions::sample_std_normal;
use mixirt::model::{icc, loglikelihood, ItemParameters, Response, ResponseMatrix};
use mixirt::RngStream;

use super::common::Outcome;

/// Monte Carlo success probability through `Z ~ Ber(c)`, `X ~ N(m, 1)` and
/// `Y = 1` when `Z = 1` or `X > 0`, against the closed-form curve.
pub fn criterion_6() -> Outcome {
    const N: usize = 20_000;
    let thetas = [-2.0, -1.0, 0.0, 1.0, 2.0];
    let cs = [0.05, 0.15, 0.25, 0.35, 0.5];
    let ms = [-2.0, -1.0, 0.0, 1.0, 2.0];
    let a = 1.3;
    let mut rng = RngStream::new(6, 0);
    let mut worst: f64 = 0.0;
    let mut outside = 0;
    for &theta in &thetas {
        for &c in &cs {
            for &m in &ms {
                let b = a * theta - m;
                let mut hits = 0usize;
                for _ in 0..N {
                    let guess = rng.open01() < c;
                    let x = m + sample_std_normal(&mut rng);
                    if guess || x > 0.0 {
                        hits += 1;
                    }
                }
                let p = icc(theta, a, b, c);
                let se = (p * (1.0 - p) / N as f64).sqrt();
                let z = (hits as f64 / N as f64 - p) / se;
                worst = worst.max(z.abs());
                if z.abs() > 3.0 {
                    outside += 1;
                }
            }
        }
    }
    Outcome::new(
        outside == 0,
        format!("125 grid points, {N} draws each, largest deviation {worst:.2} standard errors"),
    )
}

/// `theta* = s (theta + r)`, `a* = a / s`, `b* = b + a r` leaves the
/// likelihood unchanged.
pub fn criterion_7() -> Outcome {
    let mut rng = RngStream::new(7, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (n, n_items) = (10, 10);
        let a: Vec<f64> = (0..n_items).map(|_| 0.2 + 2.8 * rng.open01()).collect();
        let b: Vec<f64> = (0..n_items).map(|_| 1.5 * sample_std_normal(&mut rng)).collect();
        let c: Vec<f64> = (0..n_items).map(|_| 0.4 * rng.open01()).collect();
        let theta: Vec<f64> = (0..n).map(|_| 1.5 * sample_std_normal(&mut rng)).collect();
        let mut cells = Vec::new();
        for &t in &theta {
            for i in 0..n_items {
                let u = rng.open01();
                cells.push(if u < 0.1 {
                    Response::Missing
                } else {
                    Response::from_bool(rng.open01() < icc(t, a[i], b[i], c[i]))
                });
            }
        }
        // keep every row and column observed
        for j in 0..n {
            cells[j * n_items + j % n_items] = Response::from_bool(rng.open01() < 0.5);
        }
        let y = ResponseMatrix::new(n, n_items, cells).unwrap();
        let s = (3.0 * rng.open01() - 1.5).exp();
        let r = 4.0 * rng.open01() - 2.0;
        let before = loglikelihood(
            &y,
            &ItemParameters::new(a.clone(), b.clone(), c.clone()).unwrap(),
            &theta,
        );
        let items = ItemParameters::new(
            a.iter().map(|v| v / s).collect(),
            b.iter().zip(&a).map(|(bv, av)| bv + av * r).collect(),
            c,
        )
        .unwrap();
        let moved: Vec<f64> = theta.iter().map(|t| s * (t + r)).collect();
        let after = loglikelihood(&y, &items, &moved);
        worst = worst.max(((after - before) / before).abs());
    }
    Outcome::new(
        worst <= 1e-10,
        format!("100 random instances, largest relative change {worst:.2e}"),
    )
}
