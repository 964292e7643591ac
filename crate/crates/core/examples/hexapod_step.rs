//! Runs a random gait for one period, intact and with each leg blocked, and
//! prints the displacement and contact pattern. A blocked leg whose contact
//! bit was already 0 leaves the outcome unchanged.
//!
//! Usage: `hexapod_step [SEED]`.

use hbr::hexasim::{DamageSpec, HexaSim, LegParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> hbr::Result<()> {
    let sim = HexaSim::default();
    let seed = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(4);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut legs = [LegParams::default(); 6];
    for l in &mut legs {
        let g: Vec<f64> = (0..6).map(|_| rng.gen()).collect();
        *l = LegParams::from_genes(&g)?;
    }
    let mut damages = vec![DamageSpec::NONE];
    damages.extend(
        (1..=6)
            .map(|l| DamageSpec::legs(&[l]))
            .collect::<hbr::Result<Vec<_>>>()?,
    );
    for dmg in damages {
        let out = sim.gait_step(&legs, dmg);
        let d = out.displacement;
        println!(
            "{dmg:>6}: dx {:+.3} dy {:+.3} dyaw {:+.3}  contact {}",
            d.x, d.y, d.yaw, out.contact
        );
    }
    Ok(())
}
