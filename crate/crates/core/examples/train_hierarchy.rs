//! Trains the three-layer repertoire at desk budgets and prints layer sizes.

use std::time::Instant;

use hbr::archive::Repertoire;
use hbr::evolve::{train_hierarchy, TrainParams};
use hbr::hexasim::HexaSim;

fn main() -> hbr::Result<()> {
    let seed = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(1);
    let params = TrainParams::default().with_seed(seed);
    let t = Instant::now();
    let (stack, stats) = train_hierarchy(&params, &HexaSim::default())?;
    println!("trained in {:.1?}", t.elapsed());
    println!("bottom elites: {}", stack.lower().bottom().archive().len());
    println!("middle elites: {}", stack.lower().middle().archive().len());
    println!(
        "middle patterns: {}",
        stack.lower().middle().feasible_patterns().len()
    );
    println!("top elites: {}", stack.top().len());
    let max_norm = stack
        .skills()
        .iter()
        .map(|e| e.bd_primary[0].hypot(e.bd_primary[1]))
        .fold(0.0, f64::max);
    println!("largest skill displacement: {max_norm:.3}");
    println!(
        "evaluations: {} / {} / {}",
        stats.bottom.evaluations, stats.middle.evaluations, stats.top.evaluations
    );
    let mut counts = stack.lower().middle().feasible_patterns();
    counts.sort_by_key(|c| std::cmp::Reverse(c.1));
    for (p, n) in counts {
        print!("{p}:{n} ");
    }
    println!();
    Ok(())
}
