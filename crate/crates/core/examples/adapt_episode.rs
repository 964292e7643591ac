//! Trains the hierarchy, then runs one damage-recovery episode in the
//! benchmark maze and prints every step.
//!
//! Usage: `adapt_episode [ALGO] [DAMAGE] [SEED]`, e.g. `adapt_episode hte leg3 0`.

use hbr::adapt::{Adapter, Algo, Repertoires};
use hbr::evolve::{train_flat, train_hierarchy, FlatVariant, TrainParams};
use hbr::hexasim::{DamageSpec, HexaSim};
use hbr::planner::Maze;

fn main() -> hbr::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let algo: Algo = args.first().map_or("hte", String::as_str).parse()?;
    let dmg: DamageSpec = args.get(1).map_or("leg3", String::as_str).parse()?;
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0);
    let sim = HexaSim::default();
    let params = TrainParams::default().with_seed(1);
    let (stack, _) = train_hierarchy(&params, &sim)?;
    let flat;
    let reps = match algo {
        Algo::Hte | Algo::PerfectHte => Repertoires::Hierarchy(&stack),
        Algo::Rte2d => {
            flat = train_flat(FlatVariant::Bd2, &params, &sim, DamageSpec::NONE)?.0;
            Repertoires::Flat(&flat, &sim)
        }
        _ => {
            return Err(hbr::Error::Usage(
                "this example runs hte, perfect or rte2d".into(),
            ))
        }
    };
    let adapter = Adapter::new(algo, reps, Default::default())?;
    let log = adapter.run_episode(&Maze::benchmark(), dmg, seed)?;
    for s in &log.steps {
        println!(
            "{:2}: skill ({:+.2}, {:+.2}) pattern {:>6} score {:.2} pose ({:.2}, {:.2}){}",
            s.step,
            s.target[0],
            s.target[1],
            s.pattern.map_or("-".to_string(), |p| p.to_string()),
            s.score,
            s.pose.x,
            s.pose.y,
            if s.collided { " [wall]" } else { "" }
        );
    }
    println!(
        "{algo} under {dmg}: success {} after {} actions",
        log.success,
        log.actions_used()
    );
    Ok(())
}
