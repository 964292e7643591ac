//! Score-model pattern selection as a 64-armed bandit: one pattern pays off,
//! and UCB on a Gaussian process finds it from noisy rewards.

use hbr::archive::Pattern;
use hbr::gp::{ucb_select, GpModel, GpParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> hbr::Result<()> {
    let best = Pattern::from_bits(0b101101);
    let arms: Vec<Pattern> = Pattern::all().collect();
    let inputs: Vec<Vec<f64>> = arms.iter().map(|p| p.as_reals().to_vec()).collect();
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gp = GpModel::new(GpParams {
            lengthscale: 0.5,
            signal_var: 1.0,
            noise_var: 0.01,
        });
        let mut hits = 0;
        for pull in 0..200 {
            let i = ucb_select(&gp, &inputs, 2.0, &mut rng)?;
            let reward = if arms[i] == best { 0.9 } else { 0.3 } + rng.gen_range(-0.05..0.05);
            gp.update(&inputs[i], reward)?;
            hits += (pull >= 150 && arms[i] == best) as usize;
        }
        println!("seed {seed}: best pattern chosen in {hits}/50 of the final pulls");
    }
    Ok(())
}
