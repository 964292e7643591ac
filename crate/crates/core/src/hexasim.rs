//! Deterministic kinematic hexapod.
//!
//! Each leg runs an open-loop periodic controller (smoothed square waves).
//! Motor 1 swings the leg along the body axis, motors 2 and 3 lift it. A leg
//! bears load while its lift signal is negative; stance legs are treated as
//! anchored to the ground and the body twist at every timestep is the
//! least-squares rigid motion that keeps them anchored.
//!
//! A leg whose lift signal is negative for no more than `contact_threshold`
//! of the period never bears load. This makes the contact bits an exact
//! statement about which legs influence the motion: a controller with bit `l`
//! cleared produces the same outcome whether or not leg `l` is blocked.

use std::fmt;
use std::str::FromStr;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::archive::{Pattern, LEGS};
use crate::error::{Error, Result};
use crate::geom::{wrap, Pose2};

/// Kinematic model constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Foot travel per unit of motor-1 command.
    pub stride: f64,
    pub dt: f64,
    /// Timesteps per controller period (one second).
    pub steps: usize,
    /// Circular moving-average window, in samples.
    pub smoothing: usize,
    /// Fraction of the period a leg must spend low to bear load.
    pub contact_threshold: f64,
    /// Leg anchors in the body frame, legs 1-3 left (front to back), 4-6 right.
    pub anchors: [[f64; 2]; LEGS],
    /// Per-second displacement bound used to normalise middle descriptors.
    pub step_bound: f64,
    /// Per-second yaw bound used to normalise the middle yaw descriptor.
    pub yaw_bound: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            stride: 0.15,
            dt: 0.01,
            steps: 100,
            smoothing: 5,
            contact_threshold: 0.3,
            anchors: [
                [0.5, 0.3],
                [0.0, 0.35],
                [-0.5, 0.3],
                [0.5, -0.3],
                [0.0, -0.35],
                [-0.5, -0.3],
            ],
            step_bound: 0.6,
            yaw_bound: std::f64::consts::PI,
        }
    }
}

impl SimConfig {
    /// Short hex digest of every constant, stored in repertoire files so a
    /// repertoire is never replayed under a different model.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!(
            "stride={:e};dt={:e};steps={};smoothing={};threshold={:e};bound={:e};yaw={:e}",
            self.stride,
            self.dt,
            self.steps,
            self.smoothing,
            self.contact_threshold,
            self.step_bound,
            self.yaw_bound
        ));
        for a in &self.anchors {
            h.update(format!("({:e},{:e})", a[0], a[1]));
        }
        h.finalize()[..8]
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.stride > 0.0 && self.dt > 0.0 && self.step_bound > 0.0 && self.yaw_bound > 0.0) {
            return Err(Error::Config(
                "stride, dt, step_bound and yaw_bound must be positive".into(),
            ));
        }
        if self.steps == 0 || self.smoothing == 0 || self.smoothing > self.steps {
            return Err(Error::Config(
                "steps and smoothing must satisfy 0 < smoothing <= steps".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.contact_threshold) {
            return Err(Error::Config("contact_threshold must be in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Controller parameters of one leg, all in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LegParams {
    pub a1: f64,
    pub p1: f64,
    pub d1: f64,
    pub a2: f64,
    pub p2: f64,
    pub d2: f64,
}

impl LegParams {
    pub fn from_genes(g: &[f64]) -> Result<Self> {
        if g.len() != 6 {
            return Err(Error::Dimension {
                expected: 6,
                got: g.len(),
            });
        }
        Ok(LegParams {
            a1: g[0],
            p1: g[1],
            d1: g[2],
            a2: g[3],
            p2: g[4],
            d2: g[5],
        })
    }
}

/// Set of legs blocked in the air.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct DamageSpec {
    blocked: u8,
}

impl DamageSpec {
    pub const NONE: DamageSpec = DamageSpec { blocked: 0 };

    /// Legs are 1-based.
    pub fn legs(legs: &[usize]) -> Result<Self> {
        let mut blocked = 0u8;
        for &l in legs {
            if !(1..=LEGS).contains(&l) {
                return Err(Error::Config(format!("leg {l} out of range 1..=6")));
            }
            blocked |= 1 << (l - 1);
        }
        Ok(DamageSpec { blocked })
    }

    pub fn all_blocked() -> Self {
        DamageSpec { blocked: 0b11_1111 }
    }

    /// Whether leg `leg` (0-based) is blocked.
    pub fn is_blocked(&self, leg: usize) -> bool {
        self.blocked & (1 << leg) != 0
    }

    pub fn is_none(&self) -> bool {
        self.blocked == 0
    }

    pub fn mask(&self) -> u8 {
        self.blocked
    }

    /// The seven benchmark damages: each single leg, then both middle legs.
    pub fn benchmark() -> Vec<DamageSpec> {
        let mut v: Vec<_> = (1..=LEGS)
            .map(|l| DamageSpec::legs(&[l]).unwrap())
            .collect();
        v.push(DamageSpec::legs(&[2, 5]).unwrap());
        v
    }
}

impl fmt::Display for DamageSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.blocked {
            0 => f.write_str("none"),
            0b01_0010 => f.write_str("middle-both"),
            b if b.count_ones() == 1 => write!(f, "leg{}", b.trailing_zeros() + 1),
            b => {
                let legs: Vec<String> = (0..LEGS)
                    .filter(|l| b & (1 << l) != 0)
                    .map(|l| (l + 1).to_string())
                    .collect();
                write!(f, "legs{}", legs.join("+"))
            }
        }
    }
}

impl FromStr for DamageSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(DamageSpec::NONE),
            "middle-both" => DamageSpec::legs(&[2, 5]),
            "all" => Ok(DamageSpec::all_blocked()),
            _ => {
                if let Some(rest) = s.strip_prefix("legs") {
                    let legs = rest
                        .split('+')
                        .map(|t| t.parse::<usize>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| Error::Config(format!("bad damage `{s}`")))?;
                    return DamageSpec::legs(&legs);
                }
                let l = s
                    .strip_prefix("leg")
                    .and_then(|n| n.parse::<usize>().ok())
                    .ok_or_else(|| Error::Config(format!("bad damage `{s}`")))?;
                DamageSpec::legs(&[l])
            }
        }
    }
}

/// Result of running six leg controllers for one period.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// Body displacement over the period, in the start frame.
    pub displacement: Pose2,
    pub contact: Pattern,
    pub duty: [f64; LEGS],
    /// Sum of absolute commands over all motors and timesteps.
    pub energy: f64,
}

/// Sampled motor commands of one leg over a period.
#[derive(Debug, Clone, PartialEq)]
pub struct LegSignal {
    pub m1: Vec<f64>,
    pub m2: Vec<f64>,
}

impl LegSignal {
    pub fn m3(&self, i: usize) -> f64 {
        -self.m2[i]
    }
}

/// The simulator: model constants plus the precomputed least-squares
/// solvers for every contact set.
#[derive(Debug, Clone)]
pub struct HexaSim {
    cfg: SimConfig,
    // min-norm solution operator (AᵀA)⁺ for each of the 64 stance masks
    solvers: Vec<[[f64; 3]; 3]>,
}

impl Default for HexaSim {
    fn default() -> Self {
        HexaSim::new(SimConfig::default()).expect("default config is valid")
    }
}

impl HexaSim {
    pub fn new(cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        let solvers = (0..(1u8 << LEGS))
            .map(|mask| stance_solver(&cfg.anchors, mask))
            .collect();
        Ok(HexaSim { cfg, solvers })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    fn square(&self, i: usize, a: f64, p: f64, d: f64) -> f64 {
        let t = i as f64 * self.cfg.dt + p;
        if t - t.floor() < d {
            a
        } else {
            -a
        }
    }

    fn smooth(&self, raw: &[f64]) -> Vec<f64> {
        let n = raw.len();
        let w = self.cfg.smoothing;
        let half = w / 2;
        (0..n)
            .map(|i| {
                let s: f64 = (0..w).map(|k| raw[(i + n + k - half) % n]).sum();
                s / w as f64
            })
            .collect()
    }

    /// Motor commands of one leg on the fixed time grid.
    pub fn leg_signal(&self, p: &LegParams) -> LegSignal {
        let n = self.cfg.steps;
        let raw1: Vec<f64> = (0..n).map(|i| self.square(i, p.a1, p.p1, p.d1)).collect();
        let raw2: Vec<f64> = (0..n).map(|i| self.square(i, p.a2, p.p2, p.d2)).collect();
        LegSignal {
            m1: self.smooth(&raw1),
            m2: self.smooth(&raw2),
        }
    }

    /// Bottom-layer descriptor `(h, d_swing, d2)` and energy fitness.
    pub fn leg_descriptor(&self, p: &LegParams) -> ([f64; 3], f64) {
        let s = self.leg_signal(p);
        let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
        let h = (max(&s.m2) + 1.0) / 2.0;
        let swing = (max(&s.m1) - min(&s.m1)) / 2.0;
        let n = s.m1.len();
        let total: f64 = (0..n)
            .map(|i| s.m1[i].abs() + s.m2[i].abs() + s.m3(i).abs())
            .sum();
        let fitness = -total / (3 * n) as f64;
        ([h, swing, p.d2], fitness)
    }

    /// Runs six leg controllers for one period under `dmg`.
    pub fn gait_step(&self, legs: &[LegParams; LEGS], dmg: DamageSpec) -> StepOutcome {
        let signals: Vec<LegSignal> = legs.iter().map(|p| self.leg_signal(p)).collect();
        self.gait_step_signals(&signals, dmg)
    }

    pub(crate) fn gait_step_signals(&self, signals: &[LegSignal], dmg: DamageSpec) -> StepOutcome {
        let n = self.cfg.steps;
        let dt = self.cfg.dt;

        let mut bearing = [false; LEGS];
        let mut duty = [0.0; LEGS];
        let mut energy = 0.0;
        for (l, s) in signals.iter().enumerate() {
            let low = s.m2.iter().filter(|&&v| v < 0.0).count();
            let frac = low as f64 / n as f64;
            if !dmg.is_blocked(l) && frac > self.cfg.contact_threshold {
                bearing[l] = true;
                duty[l] = frac;
            }
            energy += (0..n)
                .map(|i| s.m1[i].abs() + s.m2[i].abs() + s.m3(i).abs())
                .sum::<f64>();
        }

        let ry: Vec<f64> = self.cfg.anchors.iter().map(|a| a[1]).collect();
        let (mut x, mut y, mut th) = (0.0f64, 0.0f64, 0.0f64);
        let mut fdot = [0.0; LEGS];
        for i in 0..n {
            let mut mask = 0u8;
            for l in 0..LEGS {
                let s = &signals[l];
                if bearing[l] && s.m2[i] < 0.0 {
                    mask |= 1 << l;
                    fdot[l] = self.cfg.stride * (s.m1[(i + 1) % n] - s.m1[i]) / dt;
                } else {
                    fdot[l] = 0.0;
                }
            }
            if mask == 0 {
                continue;
            }
            // Aᵀb summed in mirrored pairs so symmetric gaits cancel exactly
            let mut bx = 0.0;
            let mut bw = 0.0;
            for l in 0..LEGS / 2 {
                let r = l + LEGS / 2;
                bx += -fdot[l] + -fdot[r];
                bw += fdot[l] * ry[l] + fdot[r] * ry[r];
            }
            if bx == 0.0 && bw == 0.0 {
                continue;
            }
            let m = &self.solvers[mask as usize];
            let vx = m[0][0] * bx + m[0][2] * bw;
            let vy = m[1][0] * bx + m[1][2] * bw;
            let w = m[2][0] * bx + m[2][2] * bw;
            let (s, c) = th.sin_cos();
            x += (vx * c - vy * s) * dt;
            y += (vx * s + vy * c) * dt;
            th += w * dt;
        }

        StepOutcome {
            displacement: Pose2 {
                x,
                y,
                yaw: wrap(th),
            },
            contact: Pattern::from_legs(&bearing),
            duty,
            energy,
        }
    }
}

/// `(AᵀA)⁺` for the stance rows of the legs in `mask`. Each stance leg at
/// `(rx, ry)` contributes the rows `[1, 0, -ry]` and `[0, 1, rx]`.
fn stance_solver(anchors: &[[f64; 2]; LEGS], mask: u8) -> [[f64; 3]; 3] {
    if mask == 0 {
        return [[0.0; 3]; 3];
    }
    let mut m = Matrix3::<f64>::zeros();
    let mut sum_rx = 0.0;
    let mut sum_ry = 0.0;
    let mut sum_r2 = 0.0;
    let mut count = 0.0;
    // mirrored-pair order, as in the right-hand side
    for l in 0..LEGS / 2 {
        for leg in [l, l + LEGS / 2] {
            if mask & (1 << leg) != 0 {
                let [rx, ry] = anchors[leg];
                count += 1.0;
                sum_rx += rx;
                sum_ry += ry;
                sum_r2 += rx * rx + ry * ry;
            }
        }
    }
    m[(0, 0)] = count;
    m[(1, 1)] = count;
    m[(0, 2)] = -sum_ry;
    m[(2, 0)] = -sum_ry;
    m[(1, 2)] = sum_rx;
    m[(2, 1)] = sum_rx;
    m[(2, 2)] = sum_r2;
    let pinv = m
        .pseudo_inverse(1e-10)
        .expect("pseudo-inverse of a symmetric 3x3 matrix");
    let mut out = [[0.0; 3]; 3];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            let e = pinv[(r, c)];
            // round-off from the SVD would break exact left/right symmetry
            *v = if e.abs() < 1e-12 { 0.0 } else { e };
        }
    }
    out
}

/// Maps a per-second displacement to the middle-layer primary descriptor in
/// `[0, 1]^3`.
pub fn middle_descriptor(d: &Pose2, cfg: &SimConfig) -> [f64; 3] {
    let n = |v: f64, b: f64| ((v + b) / (2.0 * b)).clamp(0.0, 1.0);
    [
        n(d.x, cfg.step_bound),
        n(d.y, cfg.step_bound),
        n(d.yaw, cfg.yaw_bound),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_leg(rng: &mut ChaCha8Rng) -> LegParams {
        LegParams::from_genes(&(0..6).map(|_| rng.gen::<f64>()).collect::<Vec<_>>()).unwrap()
    }

    fn random_legs(rng: &mut ChaCha8Rng) -> [LegParams; LEGS] {
        std::array::from_fn(|_| random_leg(rng))
    }

    #[test]
    fn leg_signal_examples() {
        let sim = HexaSim::default();
        let zero_a1 = LegParams {
            a1: 0.0,
            p1: 0.3,
            d1: 0.4,
            a2: 0.7,
            p2: 0.1,
            d2: 0.5,
        };
        assert!(sim.leg_signal(&zero_a1).m1.iter().all(|&v| v == 0.0));

        let full = LegParams {
            a1: 0.8,
            d1: 1.0,
            ..Default::default()
        };
        assert!(sim
            .leg_signal(&full)
            .m1
            .iter()
            .all(|&v| (v - 0.8).abs() < 1e-15));

        let half = LegParams {
            a1: 1.0,
            p1: 0.0,
            d1: 0.5,
            ..Default::default()
        };
        assert_eq!(sim.leg_signal(&half).m1[25], 1.0);

        let s = sim.leg_signal(&half);
        for i in 0..100 {
            assert_eq!(s.m3(i), -s.m2[i]);
        }
    }

    #[test]
    fn leg_descriptor_examples() {
        let sim = HexaSim::default();
        let (bd, f) = sim.leg_descriptor(&LegParams::default());
        assert_eq!(bd, [0.5, 0.0, 0.0]);
        assert_eq!(f, 0.0);

        let lifted = LegParams {
            a2: 1.0,
            d2: 1.0,
            ..Default::default()
        };
        assert_eq!(sim.leg_descriptor(&lifted).0[0], 1.0);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..2000 {
            let (bd, f) = sim.leg_descriptor(&random_leg(&mut rng));
            assert!((-1.0..=0.0).contains(&f));
            assert!(bd.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn all_blocked_does_not_move() {
        let sim = HexaSim::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let out = sim.gait_step(&random_legs(&mut rng), DamageSpec::all_blocked());
            assert_eq!(out.displacement, Pose2::IDENTITY);
            assert_eq!(out.contact, Pattern::NONE_USED);
            assert_eq!(out.duty, [0.0; LEGS]);
        }
    }

    #[test]
    fn mirror_symmetric_gait_walks_straight() {
        let sim = HexaSim::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut moved = 0;
        for _ in 0..300 {
            let left: [LegParams; 3] = std::array::from_fn(|_| random_leg(&mut rng));
            let legs = [left[0], left[1], left[2], left[0], left[1], left[2]];
            let out = sim.gait_step(&legs, DamageSpec::NONE);
            assert_eq!(out.displacement.y, 0.0);
            assert_eq!(out.displacement.yaw, 0.0);
            if out.displacement.x != 0.0 {
                moved += 1;
            }
        }
        assert!(moved > 50);
    }

    #[test]
    fn unused_leg_is_damage_invariant() {
        let sim = HexaSim::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut checked = 0;
        for _ in 0..3000 {
            let legs = random_legs(&mut rng);
            let intact = sim.gait_step(&legs, DamageSpec::NONE);
            for l in 0..LEGS {
                if !intact.contact.uses(l) {
                    let dmg = DamageSpec::legs(&[l + 1]).unwrap();
                    assert_eq!(sim.gait_step(&legs, dmg), intact);
                    checked += 1;
                }
            }
        }
        assert!(checked > 1000);
    }

    #[test]
    fn blocking_never_adds_contacts() {
        let sim = HexaSim::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..2000 {
            let legs = random_legs(&mut rng);
            let intact = sim.gait_step(&legs, DamageSpec::NONE);
            let dmg = DamageSpec::legs(&[rng.gen_range(1..=6)]).unwrap();
            let hurt = sim.gait_step(&legs, dmg);
            assert_eq!(hurt.contact.bits() & !intact.contact.bits(), 0);
            for l in 0..LEGS {
                if dmg.is_blocked(l) {
                    assert_eq!(hurt.duty[l], 0.0);
                    assert!(!hurt.contact.uses(l));
                }
                assert_eq!(hurt.contact.uses(l), hurt.duty[l] > 0.3);
            }
            assert_eq!(hurt.energy, intact.energy);
        }
    }

    #[test]
    fn displacement_is_bounded() {
        let sim = HexaSim::default();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..100_000 {
            let d = sim
                .gait_step(&random_legs(&mut rng), DamageSpec::NONE)
                .displacement;
            assert!(d.x.abs() <= 0.6 && d.y.abs() <= 0.6, "{d:?}");
            assert!(d.yaw.abs() <= std::f64::consts::PI);
        }
    }

    #[test]
    fn deterministic() {
        let sim = HexaSim::default();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let legs = random_legs(&mut rng);
        assert_eq!(
            sim.gait_step(&legs, DamageSpec::NONE),
            sim.gait_step(&legs, DamageSpec::NONE)
        );
    }

    #[test]
    fn damage_text() {
        for d in DamageSpec::benchmark() {
            assert_eq!(d.to_string().parse::<DamageSpec>().unwrap(), d);
        }
        assert_eq!("none".parse::<DamageSpec>().unwrap(), DamageSpec::NONE);
        assert_eq!(
            DamageSpec::legs(&[2, 5]).unwrap().to_string(),
            "middle-both"
        );
        assert!("leg7".parse::<DamageSpec>().is_err());
        assert!("foo".parse::<DamageSpec>().is_err());
    }

    #[test]
    fn fingerprint_tracks_constants() {
        let a = SimConfig::default();
        let mut b = a.clone();
        b.stride = 0.2;
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint(), SimConfig::default().fingerprint());
    }
}
