//! Trains a hierarchy and a flat repertoire, then compares Perfect-HTE, HTE
//! and 2D-RTE on the benchmark maze over the seven damage conditions.
//!
//! Usage: `compare_variants [SEEDS] [key=value ...]` with configuration keys
//! such as `adapt.beta=1.5`.

use hbr::adapt::{Adapter, Algo, Repertoires};
use hbr::config::Config;
use hbr::evolve::{train_flat, train_hierarchy, FlatVariant};
use hbr::hexasim::{DamageSpec, HexaSim};
use hbr::planner::Maze;
use hbr::stats::{mannwhitney_u, median};

fn main() -> hbr::Result<()> {
    let mut args = std::env::args().skip(1);
    let seeds: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(5);
    let mut cfg = Config::default();
    for kv in args {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| hbr::Error::Usage(format!("expected key=value, got {kv}")))?;
        cfg.set(k, v)?;
    }
    let sim = HexaSim::new(cfg.sim.clone())?;
    let params = cfg.train.clone().with_seed(cfg.seed);
    let (stack, _) = train_hierarchy(&params, &sim)?;
    let (flat, _) = train_flat(FlatVariant::Bd2, &params, &sim, DamageSpec::NONE)?;
    let maze = Maze::benchmark();
    let ap = cfg.adapt;
    let variants = [
        Adapter::new(Algo::PerfectHte, Repertoires::Hierarchy(&stack), ap)?,
        Adapter::new(Algo::Hte, Repertoires::Hierarchy(&stack), ap)?,
        Adapter::new(Algo::Rte2d, Repertoires::Flat(&flat, &sim), ap)?,
    ];
    let mut pooled = vec![Vec::new(); variants.len()];
    let mut damages = vec![DamageSpec::NONE];
    damages.extend(DamageSpec::benchmark());
    for dmg in damages {
        print!("{dmg:>12}");
        for (v, ad) in variants.iter().enumerate() {
            let mut actions = Vec::new();
            let mut fails = 0;
            for seed in 0..seeds {
                let log = ad.run_episode(&maze, dmg, seed)?;
                actions.push(log.actions_used() as f64);
                fails += (!log.success) as usize;
            }
            if !dmg.is_none() {
                pooled[v].extend(&actions);
            }
            print!(
                "  {:>8}: median {:>4} fail {:>2}",
                ad.algo().to_string(),
                median(&actions)?,
                fails
            );
        }
        println!();
    }
    for (v, ad) in variants.iter().enumerate() {
        println!(
            "{:>8}: pooled median {}",
            ad.algo().to_string(),
            median(&pooled[v])?
        );
    }
    let mw = mannwhitney_u(&pooled[0], &pooled[2])?;
    println!("perfect vs rte2d: U = {}, p = {:.3e}", mw.u, mw.p_two_sided);
    Ok(())
}
