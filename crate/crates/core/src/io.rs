//! CSV and `key=value` file formats.
//!
//! * `responses.csv`: header `item_1..item_I`, one row per individual, cells
//!   `0`, `1` or `NA`.
//! * draw files: header `iteration,<parameter names>`, one row per retained
//!   sweep. Values are unscaled.
//! * `summary.csv`: `parameter,mean,sd,q2.5,q97.5,ess`.
//! * `meta.txt`: `key=value` lines.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::diagnostics::{DensityEstimate, PosteriorSummary};
use crate::error::{Error, Result};
use crate::model::{ItemParameters, MixtureParameters, Response, ResponseMatrix};
use crate::sampler::{ChainOutput, Draw, RejectionStats, SamplerConfig};
use crate::simulation::SimulationTruth;

pub const RESPONSES: &str = "responses.csv";
pub const TRUTH_ITEMS: &str = "truth_items.csv";
pub const TRUTH_THETA: &str = "truth_theta.csv";
pub const TRUTH_MIXTURE: &str = "truth_mixture.csv";
pub const DRAWS_ITEMS: &str = "draws_items.csv";
pub const DRAWS_MIXTURE: &str = "draws_mixture.csv";
pub const DRAWS_THETA: &str = "draws_theta.csv";
pub const DRAWS_THETA_RESCALED: &str = "draws_theta_rescaled.csv";
pub const SUMMARY: &str = "summary.csv";
pub const DENSITY: &str = "density.csv";
pub const TRACE: &str = "trace.csv";
pub const META: &str = "meta.txt";
pub const MISSING_TOKEN: &str = "NA";

/// Shortest text that parses back to the same value.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v != 0.0 && v.is_finite() && !(1e-5..1e16).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

fn parse_f64(text: &str, location: impl FnOnce() -> String) -> Result<f64> {
    text.trim().parse::<f64>().map_err(|_| Error::Parse {
        location: location(),
        message: format!("'{text}' is not a number"),
    })
}

fn create(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new().from_writer(BufWriter::new(file)))
}

fn write_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Postprocess(format!("{}: {other:?}", path.display())),
    }
}

fn finish(path: &Path, mut w: csv::Writer<BufWriter<File>>) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn read_err(path: &Path, e: csv::Error) -> Error {
    let location = match e.position() {
        Some(p) => format!("{}: line {}", path.display(), p.line()),
        None => path.display().to_string(),
    };
    Error::Parse {
        location,
        message: match e.into_kind() {
            csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
                format!("row has {len} fields, header has {expected_len}")
            }
            other => format!("{other:?}"),
        },
    }
}

pub fn write_responses(path: &Path, y: &ResponseMatrix) -> Result<()> {
    let mut w = create(path)?;
    let header: Vec<String> = (1..=y.n_items()).map(|i| format!("item_{i}")).collect();
    w.write_record(&header).map_err(|e| write_err(path, e))?;
    for j in 0..y.n_individuals() {
        let row = y.row(j).iter().map(|r| match r {
            Response::Incorrect => "0",
            Response::Correct => "1",
            Response::Missing => MISSING_TOKEN,
        });
        w.write_record(row).map_err(|e| write_err(path, e))?;
    }
    finish(path, w)
}

/// Reads a response matrix. Errors name the offending line and column.
pub fn read_responses(path: &Path) -> Result<ResponseMatrix> {
    let mut r = open(path)?;
    let header = r.headers().map_err(|e| read_err(path, e))?.clone();
    let n_items = header.len();
    if n_items == 0 || header.iter().all(str::is_empty) {
        return Err(Error::Parse {
            location: format!("{}: line 1", path.display()),
            message: "missing header row".into(),
        });
    }
    let mut cells = Vec::new();
    let mut n = 0;
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| read_err(path, e))?;
        for (col, field) in rec.iter().enumerate() {
            let cell = match field {
                "0" => Response::Incorrect,
                "1" => Response::Correct,
                "NA" | "na" | "" => Response::Missing,
                other => {
                    return Err(Error::Parse {
                        location: format!(
                            "{}: line {}, column {} ({})",
                            path.display(),
                            row + 2,
                            col + 1,
                            &header[col]
                        ),
                        message: format!("expected 0, 1 or {MISSING_TOKEN}, got '{other}'"),
                    })
                }
            };
            cells.push(cell);
        }
        n += 1;
    }
    ResponseMatrix::new(n, n_items, cells).map_err(|e| Error::Parse {
        location: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn write_truth(dir: &Path, truth: &SimulationTruth) -> Result<()> {
    let path = dir.join(TRUTH_ITEMS);
    let mut w = create(&path)?;
    w.write_record(["item", "a", "b", "c"])
        .map_err(|e| write_err(&path, e))?;
    for i in 0..truth.items.len() {
        let it = &truth.items;
        w.write_record([
            (i + 1).to_string(),
            fmt_f64(it.a[i]),
            fmt_f64(it.b[i]),
            fmt_f64(it.c[i]),
        ])
        .map_err(|e| write_err(&path, e))?;
    }
    finish(&path, w)?;

    let path = dir.join(TRUTH_THETA);
    let mut w = create(&path)?;
    w.write_record(["individual", "theta", "component"])
        .map_err(|e| write_err(&path, e))?;
    for (j, (&t, &k)) in truth.theta.iter().zip(&truth.allocation).enumerate() {
        w.write_record([(j + 1).to_string(), fmt_f64(t), (k + 1).to_string()])
            .map_err(|e| write_err(&path, e))?;
    }
    finish(&path, w)?;

    let path = dir.join(TRUTH_MIXTURE);
    let mut w = create(&path)?;
    w.write_record(["component", "p", "mu", "sigma2"])
        .map_err(|e| write_err(&path, e))?;
    let m = &truth.mixture;
    for k in 0..m.k() {
        w.write_record([
            (k + 1).to_string(),
            fmt_f64(m.weights()[k]),
            fmt_f64(m.means()[k]),
            fmt_f64(m.variances()[k]),
        ])
        .map_err(|e| write_err(&path, e))?;
    }
    finish(&path, w)
}

/// Numeric table with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl NumericTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

pub fn read_numeric(path: &Path) -> Result<NumericTable> {
    let mut r = open(path)?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| read_err(path, e))?
        .iter()
        .map(String::from)
        .collect();
    let mut rows = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| read_err(path, e))?;
        let values = rec
            .iter()
            .enumerate()
            .map(|(col, f)| {
                parse_f64(f, || {
                    format!(
                        "{}: line {}, column {} ({})",
                        path.display(),
                        row + 2,
                        col + 1,
                        header[col]
                    )
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(values);
    }
    Ok(NumericTable { header, rows })
}

pub fn read_truth(dir: &Path) -> Result<SimulationTruth> {
    let tab = read_numeric(&dir.join(TRUTH_ITEMS))?;
    let col = |t: &NumericTable, n: &str, p: &str| {
        t.column(n).ok_or_else(|| Error::Parse {
            location: p.to_string(),
            message: format!("missing column '{n}'"),
        })
    };
    let items = ItemParameters::new(
        col(&tab, "a", TRUTH_ITEMS)?,
        col(&tab, "b", TRUTH_ITEMS)?,
        col(&tab, "c", TRUTH_ITEMS)?,
    )?;
    let tab = read_numeric(&dir.join(TRUTH_THETA))?;
    let theta = col(&tab, "theta", TRUTH_THETA)?;
    let allocation = col(&tab, "component", TRUTH_THETA)?
        .iter()
        .map(|&k| k as usize - 1)
        .collect();
    let tab = read_numeric(&dir.join(TRUTH_MIXTURE))?;
    let mixture = MixtureParameters::unidentified(
        col(&tab, "p", TRUTH_MIXTURE)?,
        col(&tab, "mu", TRUTH_MIXTURE)?,
        col(&tab, "sigma2", TRUTH_MIXTURE)?,
    )?;
    Ok(SimulationTruth {
        items,
        theta,
        allocation,
        mixture,
    })
}

fn names(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}_{i}"))
}

fn write_rows<'a, I>(path: &Path, header: Vec<String>, rows: I) -> Result<()>
where
    I: Iterator<Item = (usize, Vec<f64>)> + 'a,
{
    let mut w = create(path)?;
    w.write_record(&header).map_err(|e| write_err(path, e))?;
    let mut rec = Vec::with_capacity(header.len());
    for (it, values) in rows {
        rec.clear();
        rec.push(it.to_string());
        rec.extend(values.into_iter().map(fmt_f64));
        w.write_record(&rec).map_err(|e| write_err(path, e))?;
    }
    finish(path, w)
}

/// Writes the item, mixture and ability draw files into `dir`.
pub fn write_draws(dir: &Path, chain: &ChainOutput) -> Result<()> {
    let (n_items, k, n) = (chain.n_items(), chain.k, chain.n_individuals());
    let header = std::iter::once("iteration".to_string())
        .chain(names("a", n_items))
        .chain(names("b", n_items))
        .chain(names("c", n_items))
        .collect();
    write_rows(
        &dir.join(DRAWS_ITEMS),
        header,
        chain.draws.iter().map(|d| {
            let mut v = d.items.a.clone();
            v.extend(&d.items.b);
            v.extend(&d.items.c);
            (d.iteration, v)
        }),
    )?;
    let header = std::iter::once("iteration".to_string())
        .chain(names("p", k))
        .chain(names("mu", k))
        .chain(names("sigma2", k))
        .collect();
    write_rows(
        &dir.join(DRAWS_MIXTURE),
        header,
        chain.draws.iter().map(|d| {
            let m = &d.mixture;
            let mut v = m.weights().to_vec();
            v.extend(m.means());
            v.extend(m.variances());
            (d.iteration, v)
        }),
    )?;
    write_theta(
        &dir.join(DRAWS_THETA),
        n,
        chain.draws.iter().map(|d| (d.iteration, d.theta.clone())),
    )
}

pub fn write_theta<I>(path: &Path, n: usize, rows: I) -> Result<()>
where
    I: Iterator<Item = (usize, Vec<f64>)>,
{
    let header = std::iter::once("iteration".to_string())
        .chain(names("theta", n))
        .collect();
    write_rows(path, header, rows)
}

fn check_header(path: &Path, found: &[String], expected: &[String]) -> Result<()> {
    if found != expected {
        return Err(Error::Parse {
            location: format!("{}: line 1", path.display()),
            message: format!(
                "unexpected header, expected {} columns starting {:?}",
                expected.len(),
                &expected[..expected.len().min(3)]
            ),
        });
    }
    Ok(())
}

fn count_prefixed(header: &[String], prefix: &str) -> usize {
    header
        .iter()
        .filter(|h| h.strip_prefix(prefix).is_some_and(|r| r.parse::<usize>().is_ok()))
        .count()
}

/// Reads draw files written by [`write_draws`] back into a chain. The
/// sampler configuration and rejection counts come from `meta.txt` when
/// present.
pub fn read_chain(dir: &Path) -> Result<ChainOutput> {
    let items_path = dir.join(DRAWS_ITEMS);
    let mix_path = dir.join(DRAWS_MIXTURE);
    let theta_path = dir.join(DRAWS_THETA);
    let items = read_numeric(&items_path)?;
    let mix = read_numeric(&mix_path)?;
    let theta = read_numeric(&theta_path)?;

    let n_items = count_prefixed(&items.header, "a_");
    let k = count_prefixed(&mix.header, "p_");
    let n = count_prefixed(&theta.header, "theta_");
    let expect = |parts: &[(&str, usize)]| -> Vec<String> {
        std::iter::once("iteration".to_string())
            .chain(parts.iter().flat_map(|&(p, c)| names(p, c).collect::<Vec<_>>()))
            .collect()
    };
    check_header(
        &items_path,
        &items.header,
        &expect(&[("a", n_items), ("b", n_items), ("c", n_items)]),
    )?;
    check_header(&mix_path, &mix.header, &expect(&[("p", k), ("mu", k), ("sigma2", k)]))?;
    check_header(&theta_path, &theta.header, &expect(&[("theta", n)]))?;
    if items.rows.is_empty() {
        return Err(Error::Postprocess(format!("{} has no draws", items_path.display())));
    }
    if items.rows.len() != mix.rows.len() || items.rows.len() != theta.rows.len() {
        return Err(Error::Postprocess(format!(
            "draw files have {}, {} and {} rows",
            items.rows.len(),
            mix.rows.len(),
            theta.rows.len()
        )));
    }
    let mut draws = Vec::with_capacity(items.rows.len());
    for (row, ((ri, rm), rt)) in items.rows.iter().zip(&mix.rows).zip(&theta.rows).enumerate() {
        let iteration = ri[0];
        if rm[0] != iteration || rt[0] != iteration {
            return Err(Error::Postprocess(format!(
                "draw files disagree on the iteration of row {}",
                row + 1
            )));
        }
        let items = ItemParameters {
            a: ri[1..=n_items].to_vec(),
            b: ri[n_items + 1..=2 * n_items].to_vec(),
            c: ri[2 * n_items + 1..].to_vec(),
        };
        let mixture =
            MixtureParameters::unidentified(rm[1..=k].to_vec(), rm[k + 1..=2 * k].to_vec(), rm[2 * k + 1..].to_vec())
                .map_err(|e| Error::Postprocess(format!("{} row {}: {e}", mix_path.display(), row + 1)))?;
        draws.push(Draw {
            iteration: iteration as usize,
            items,
            mixture,
            theta: rt[1..].to_vec(),
        });
    }

    let meta_path = dir.join(META);
    let meta = if meta_path.exists() {
        read_meta(&meta_path)?
    } else {
        BTreeMap::new()
    };
    let get = |key: &str| meta.get(key).and_then(|v| v.parse::<u64>().ok());
    let d = SamplerConfig::default();
    let config = SamplerConfig {
        iterations: get("iterations").map_or(d.iterations, |v| v as usize),
        burn_in: get("burn_in").map_or(d.burn_in, |v| v as usize),
        thin: get("thin").map_or(d.thin, |v| v as usize),
        seed: get("seed").unwrap_or(d.seed),
        parallel_workers: get("workers").map_or(d.parallel_workers, |v| v as usize),
        rejection_max_attempts: get("rejection_max_attempts").unwrap_or(d.rejection_max_attempts),
        warmup: get("warmup").map_or(d.warmup, |v| v as usize),
    };
    let stats = |p: &str, a: &str| RejectionStats {
        proposals: get(p).unwrap_or(0),
        accepted: get(a).unwrap_or(0),
    };
    Ok(ChainOutput {
        draws,
        discrimination: stats("ab_proposals", "ab_accepted"),
        weights: stats("p_proposals", "p_accepted"),
        config,
        k,
    })
}

pub fn write_summary(path: &Path, summary: &PosteriorSummary) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(["parameter", "mean", "sd", "q2.5", "q97.5", "ess"])
        .map_err(|e| write_err(path, e))?;
    for p in &summary.parameters {
        w.write_record([
            p.name.clone(),
            fmt_f64(p.mean),
            fmt_f64(p.sd),
            fmt_f64(p.q025),
            fmt_f64(p.q975),
            fmt_f64(p.ess),
        ])
        .map_err(|e| write_err(path, e))?;
    }
    finish(path, w)
}

/// Parameter names and their `(mean, sd, q2.5, q97.5, ess)` rows.
pub fn read_summary(path: &Path) -> Result<Vec<(String, [f64; 5])>> {
    let mut r = open(path)?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| read_err(path, e))?
        .iter()
        .map(String::from)
        .collect();
    if header != ["parameter", "mean", "sd", "q2.5", "q97.5", "ess"] {
        return Err(Error::Parse {
            location: format!("{}: line 1", path.display()),
            message: "not a summary file".into(),
        });
    }
    let mut out = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| read_err(path, e))?;
        let mut v = [0.0; 5];
        for (i, slot) in v.iter_mut().enumerate() {
            *slot = parse_f64(&rec[i + 1], || {
                format!("{}: line {}, column {}", path.display(), row + 2, i + 2)
            })?;
        }
        out.push((rec[0].to_string(), v));
    }
    Ok(out)
}

pub fn write_density(path: &Path, d: &DensityEstimate) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(["x", "density"]).map_err(|e| write_err(path, e))?;
    for (x, y) in d.x.iter().zip(&d.density) {
        w.write_record([fmt_f64(*x), fmt_f64(*y)])
            .map_err(|e| write_err(path, e))?;
    }
    finish(path, w)
}

/// Writes `iteration` plus the named columns for the given rows.
pub fn write_trace(path: &Path, iterations: &[usize], names: &[String], columns: &[Vec<f64>]) -> Result<()> {
    let header = std::iter::once("iteration".to_string())
        .chain(names.iter().cloned())
        .collect();
    write_rows(
        path,
        header,
        iterations
            .iter()
            .enumerate()
            .map(|(r, &it)| (it, columns.iter().map(|c| c[r]).collect())),
    )
}

pub fn write_meta(path: &Path, entries: &[(String, String)]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for (k, v) in entries {
        writeln!(w, "{k}={v}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_meta(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            location: format!("{}:{}", path.display(), n + 1),
            message: format!("expected key=value, got '{line}'"),
        })?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

/// Sampler provenance and rejection counts for `meta.txt`.
pub fn chain_meta(chain: &ChainOutput) -> Vec<(String, String)> {
    let c = &chain.config;
    let mut out: Vec<(String, String)> = [
        ("k", chain.k.to_string()),
        ("iterations", c.iterations.to_string()),
        ("burn_in", c.burn_in.to_string()),
        ("thin", c.thin.to_string()),
        ("seed", c.seed.to_string()),
        ("workers", c.parallel_workers.to_string()),
        ("rejection_max_attempts", c.rejection_max_attempts.to_string()),
        ("warmup", c.warmup.to_string()),
        ("retained_draws", chain.draws.len().to_string()),
        ("ab_proposals", chain.discrimination.proposals.to_string()),
        ("ab_accepted", chain.discrimination.accepted.to_string()),
        ("ab_acceptance_rate", fmt_f64(chain.discrimination.acceptance_rate())),
        ("p_proposals", chain.weights.proposals.to_string()),
        ("p_accepted", chain.weights.accepted.to_string()),
        ("p_acceptance_rate", fmt_f64(chain.weights.acceptance_rate())),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    out.push(("version".into(), env!("CARGO_PKG_VERSION").into()));
    out
}

/// Creates `dir` if needed.
pub fn ensure_dir(dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    Ok(dir.to_path_buf())
}
