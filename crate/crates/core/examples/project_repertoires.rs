//! Compares the hierarchy's top layer with a flat 8-D repertoire trained on
//! the same total evaluation budget, after projection onto (x, y).

use hbr::analysis::Projection;
use hbr::archive::Repertoire;
use hbr::evolve::{train_flat, train_hierarchy, FlatVariant, TrainParams};
use hbr::hexasim::{DamageSpec, HexaSim};

fn main() -> hbr::Result<()> {
    let seed = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(1);
    let sim = HexaSim::default();
    let mut params = TrainParams::default().with_seed(seed);
    params.top.budget = 120_000;
    params.flat.budget = params.bottom.budget + params.middle.budget + params.top.budget;
    let (stack, _) = train_hierarchy(&params, &sim)?;
    let (flat, _) = train_flat(FlatVariant::Bd8, &params, &sim, DamageSpec::NONE)?;
    let b = params.grid_bound;
    let bounds = [(-b, b), (-b, b)];
    let n = params.grid_cells;
    for (name, elites) in [
        ("hierarchy", stack.top().elites()),
        ("flat 8-D", flat.elites()),
    ] {
        let p = Projection::of(elites, [n, n], bounds);
        println!(
            "{name:>10}: {} elites, effective size {}, mean fitness {:.4}",
            elites.len(),
            p.effective_size,
            p.mean_fitness
        );
    }
    Ok(())
}
