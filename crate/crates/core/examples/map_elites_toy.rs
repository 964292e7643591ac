//! MAP-Elites on a toy problem whose descriptor is the first two genes:
//! shows how coverage and best fitness grow with evaluations.

use hbr::archive::{GridArchive, Repertoire};
use hbr::evolve::{map_elites_run, Evaluation, EvoParams};

fn main() -> hbr::Result<()> {
    let mut grid = GridArchive::new(vec![100, 100], vec![(0.0, 1.0), (0.0, 1.0)], false)?;
    let params = EvoParams {
        budget: 50_000,
        mutation_rate: 0.3,
        ..EvoParams::default()
    };
    let stats = map_elites_run(
        &mut grid,
        6,
        |g| {
            Some(Evaluation {
                fitness: -g.iter().map(|v| (v - 0.5).powi(2)).sum::<f64>(),
                bd_primary: g[..2].to_vec(),
                bd_secondary: None,
                recorded_yaw: 0.0,
            })
        },
        &params,
    )?;
    for t in stats.trace.iter().step_by(10) {
        println!(
            "{:6} evaluations: {:5} elites, best {:.5}",
            t.evaluations, t.elites, t.best_fitness
        );
    }
    println!(
        "coverage {:.1}%",
        100.0 * grid.len() as f64 / grid.capacity() as f64
    );
    Ok(())
}
