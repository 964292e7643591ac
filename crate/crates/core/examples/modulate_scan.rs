//! Re-executes every top-layer skill under each feasible contact pattern and
//! reports how many patterns reproduce it, near the centre of the archive
//! versus near its edge.
//!
//! Usage: `modulate_scan [key=value ...]`, e.g. `modulate_scan seed=3`.

use hbr::analysis::ModulationReport;
use hbr::config::Config;
use hbr::evolve::train_hierarchy;
use hbr::hexasim::HexaSim;
use hbr::hierarchy::summarize_scan;

fn main() -> hbr::Result<()> {
    let mut cfg = Config::default();
    for kv in std::env::args().skip(1) {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| hbr::Error::Usage(format!("expected key=value, got {kv}")))?;
        cfg.set(k, v)?;
    }
    let sim = HexaSim::new(cfg.sim.clone())?;
    let (stack, _) = train_hierarchy(&cfg.train.clone().with_seed(cfg.seed), &sim)?;
    let rows = stack.modulate_scan()?;
    let summary = summarize_scan(&rows, cfg.adapt.reproduce_tolerance);
    print!("{}", ModulationReport::of(&summary)?.text());
    Ok(())
}
