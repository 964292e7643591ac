//! Trains a small flat repertoire, writes it in the text repertoire format,
//! reads it back and checks that every elite survived bit for bit.

use hbr::archive::Repertoire;
use hbr::evolve::{train_flat, FlatVariant, TrainParams};
use hbr::hexasim::{DamageSpec, HexaSim};
use hbr::persist::{load_repertoire, save_repertoire, StoredArchive};

fn main() -> hbr::Result<()> {
    let sim = HexaSim::default();
    let mut params = TrainParams::default().with_seed(3);
    params.flat.budget = 5000;
    let (grid, _) = train_flat(FlatVariant::Bd8, &params, &sim, DamageSpec::NONE)?;
    let fp = sim.config().fingerprint();
    let path = std::env::temp_dir().join("hbr-example-flat8d.hbr");
    save_repertoire(&path, &StoredArchive::Grid(grid.clone()), &fp)?;
    let back = load_repertoire(&path, &fp)?.into_grid(&path)?;
    let text = std::fs::read_to_string(&path)?;
    println!(
        "wrote {} ({} elites, {} bytes)",
        path.display(),
        grid.len(),
        text.len()
    );
    for line in text.lines().take(9) {
        println!("  {line}");
    }
    println!("identical after reload: {}", back.elites() == grid.elites());
    std::fs::remove_file(&path)?;
    Ok(())
}
