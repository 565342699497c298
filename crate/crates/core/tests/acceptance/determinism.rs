use std::path::Path;

use mixirt::io::{write_draws, DRAWS_ITEMS, DRAWS_MIXTURE, DRAWS_THETA};
use mixirt::model::PriorSpec;
use mixirt::sampler::{run_chain, SamplerConfig};
use mixirt::simulation::{simulate_dataset, SimulationDesign};
use mixirt::Result;

use super::common::Outcome;

fn draw_files(dir: &Path, workers: usize) -> Result<Vec<Vec<u8>>> {
    let data = simulate_dataset(&SimulationDesign::study1(9).with_size(300, 15))?;
    let config = SamplerConfig {
        iterations: 400,
        burn_in: 200,
        thin: 2,
        seed: 99,
        parallel_workers: workers,
        warmup: 50,
        ..SamplerConfig::default()
    };
    let chain = run_chain(&data.responses, &PriorSpec::defaults(2), 2, &config)?;
    let out = dir.join(format!("workers_{workers}_{}", dir.read_dir().map_or(0, |d| d.count())));
    std::fs::create_dir_all(&out).map_err(|e| mixirt::Error::Postprocess(e.to_string()))?;
    write_draws(&out, &chain)?;
    [DRAWS_ITEMS, DRAWS_MIXTURE, DRAWS_THETA]
        .iter()
        .map(|f| std::fs::read(out.join(f)).map_err(|e| mixirt::Error::Postprocess(e.to_string())))
        .collect()
}

pub fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let run = |w| draw_files(dir.path(), w);
    let (first, second, two, three, four) = match (run(1), run(1), run(2), run(3), run(4)) {
        (Ok(a), Ok(b), Ok(c), Ok(d), Ok(e)) => (a, b, c, d, e),
        (Err(e), ..) | (_, Err(e), ..) | (_, _, Err(e), ..) | (.., Err(e), _) | (.., Err(e)) => {
            return Outcome::error(e)
        }
    };
    let sequential = first == second;
    let parallel = two == three && three == four;
    let across = first == two;
    let bytes: usize = first.iter().map(Vec::len).sum();
    Outcome::new(
        sequential && parallel,
        format!(
            "sequential reruns identical: {sequential}; 2, 3 and 4 workers identical: {parallel}; \
             parallel equals sequential: {across} ({bytes} bytes of draws)"
        ),
    )
}
