//! A small benchmark: trains one repertoire set, runs HTE and 2D-RTE over the
//! damage conditions and writes the CSV/SVG outputs to a directory.
//!
//! Usage: `bench_suite [OUT_DIR] [REPS]`.

use hbr::adapt::AdaptParams;
use hbr::bench::{run_bench, BenchParams};
use hbr::evolve::TrainParams;
use hbr::hexasim::HexaSim;
use hbr::planner::Maze;
use hbr::store::{Layer, RepertoireSet};

fn main() -> hbr::Result<()> {
    let out = std::path::PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "bench-example".into()),
    );
    let reps = std::env::args()
        .nth(2)
        .and_then(|s| s.parse().ok())
        .unwrap_or(3);
    let sim = HexaSim::default();
    let set = RepertoireSet::train(
        &TrainParams::default().with_seed(1),
        &sim,
        &[Layer::Hierarchy, Layer::Flat2d],
    )?;
    let bench = BenchParams {
        reps,
        algos: "perfect,hte,rte2d".into(),
        ..BenchParams::default()
    };
    let result = run_bench(&[set], &Maze::benchmark(), &AdaptParams::default(), &bench)?;
    std::fs::create_dir_all(&out)?;
    result.write(&out)?;
    print!("{}", result.aggregate_csv()?);
    println!("outputs in {}", out.display());
    Ok(())
}
