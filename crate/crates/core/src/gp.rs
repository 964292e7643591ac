//! Exact Gaussian-process regression with a squared-exponential kernel,
//! the reproduction score used to rate executed skills, and UCB selection.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpParams {
    pub lengthscale: f64,
    pub signal_var: f64,
    pub noise_var: f64,
}

impl Default for GpParams {
    fn default() -> Self {
        GpParams {
            lengthscale: 0.3,
            signal_var: 1.0,
            noise_var: 1e-2,
        }
    }
}

impl GpParams {
    pub fn validate(&self) -> Result<()> {
        if self.lengthscale > 0.0 && self.signal_var > 0.0 && self.noise_var > 0.0 {
            Ok(())
        } else {
            Err(Error::Config("GP hyperparameters must be positive".into()))
        }
    }
}

/// Prior mean function of a [`GpModel`].
#[derive(Clone)]
pub enum PriorMean {
    Constant(f64),
    Func(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

impl PriorMean {
    fn eval(&self, x: &[f64]) -> f64 {
        match self {
            PriorMean::Constant(c) => *c,
            PriorMean::Func(f) => f(x),
        }
    }
}

impl fmt::Debug for PriorMean {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PriorMean::Constant(c) => write!(f, "Constant({c})"),
            PriorMean::Func(_) => f.write_str("Func(..)"),
        }
    }
}

const JITTER_START: f64 = 1e-9;
const JITTER_MAX: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct GpModel {
    params: GpParams,
    prior: PriorMean,
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
    // lower Cholesky factor of K + noise (+ jitter), row-major n×n
    chol: Vec<f64>,
    alpha: Vec<f64>,
}

impl GpModel {
    pub fn new(params: GpParams) -> Self {
        Self::with_prior(params, PriorMean::Constant(0.0))
    }

    pub fn with_prior(params: GpParams, prior: PriorMean) -> Self {
        GpModel {
            params,
            prior,
            inputs: Vec::new(),
            targets: Vec::new(),
            chol: Vec::new(),
            alpha: Vec::new(),
        }
    }

    pub fn params(&self) -> &GpParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    fn kernel(&self, a: &[f64], b: &[f64]) -> f64 {
        let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        self.params.signal_var
            * (-0.5 * d2 / (self.params.lengthscale * self.params.lengthscale)).exp()
    }

    /// Adds an observation and refits the posterior.
    pub fn update(&mut self, x: &[f64], y: f64) -> Result<()> {
        if x.iter().any(|v| !v.is_finite()) || !y.is_finite() {
            return Err(Error::NonFinite("GP observation"));
        }
        if let Some(first) = self.inputs.first() {
            if first.len() != x.len() {
                return Err(Error::Dimension {
                    expected: first.len(),
                    got: x.len(),
                });
            }
        }
        self.inputs.push(x.to_vec());
        self.targets.push(y);
        if let Err(e) = self.refit() {
            self.inputs.pop();
            self.targets.pop();
            self.refit()?;
            return Err(e);
        }
        Ok(())
    }

    fn refit(&mut self) -> Result<()> {
        let n = self.inputs.len();
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = self.kernel(&self.inputs[i], &self.inputs[j]);
                k[i * n + j] = v;
                k[j * n + i] = v;
            }
            k[i * n + i] += self.params.noise_var;
        }
        let mut jitter = 0.0;
        let chol = loop {
            if let Some(l) = cholesky(&k, n, jitter) {
                break l;
            }
            jitter = if jitter == 0.0 {
                JITTER_START
            } else {
                jitter * 10.0
            };
            if jitter > JITTER_MAX {
                return Err(Error::Factorization);
            }
        };
        let resid: Vec<f64> = self
            .inputs
            .iter()
            .zip(&self.targets)
            .map(|(x, y)| y - self.prior.eval(x))
            .collect();
        let z = forward_sub(&chol, n, &resid);
        self.alpha = backward_sub_t(&chol, n, &z);
        self.chol = chol;
        Ok(())
    }

    /// Posterior mean and standard deviation at `x`.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let m0 = self.prior.eval(x);
        let n = self.inputs.len();
        if n == 0 {
            return (m0, self.params.signal_var.sqrt());
        }
        let ks: Vec<f64> = self.inputs.iter().map(|xi| self.kernel(xi, x)).collect();
        let mean = m0 + ks.iter().zip(&self.alpha).map(|(a, b)| a * b).sum::<f64>();
        let v = forward_sub(&self.chol, n, &ks);
        let var = self.params.signal_var - v.iter().map(|a| a * a).sum::<f64>();
        (mean, var.max(0.0).sqrt())
    }
}

fn cholesky(a: &[f64], n: usize, jitter: f64) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            if i == j {
                s += jitter;
            }
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

fn forward_sub(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut z = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i * n + k] * z[k]).sum();
        z[i] = (b[i] - s) / l[i * n + i];
    }
    z
}

fn backward_sub_t(l: &[f64], n: usize, z: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k * n + i] * x[k]).sum();
        x[i] = (z[i] - s) / l[i * n + i];
    }
    x
}

/// Reproduction score constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreParams {
    pub k: f64,
    pub c: f64,
    /// Lower clamp on the denominator `2|bd_des| - c`.
    pub min_denominator: f64,
}

impl Default for ScoreParams {
    fn default() -> Self {
        ScoreParams {
            k: 4.0,
            c: 0.5,
            min_denominator: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub value: f64,
    /// The denominator was below the clamp.
    pub clamped: bool,
}

/// `exp(-k |obs - des| / max(2|des| - c, min_denominator))`: 1 for perfect
/// reproduction, decaying towards 0 with the reproduction error.
pub fn epsilon_score(obs: &[f64], des: &[f64], p: &ScoreParams) -> Score {
    let err = obs
        .iter()
        .zip(des)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let norm = des.iter().map(|v| v * v).sum::<f64>().sqrt();
    let raw = 2.0 * norm - p.c;
    let clamped = raw < p.min_denominator;
    if clamped {
        log::debug!(
            "score denominator {raw:.3} clamped to {}",
            p.min_denominator
        );
    }
    let den = raw.max(p.min_denominator);
    Score {
        value: (-p.k * err / den).exp(),
        clamped,
    }
}

/// Index of the candidate maximising `mean + beta * std`; exact ties are
/// broken uniformly at random.
pub fn ucb_select<R: Rng + ?Sized>(
    model: &GpModel,
    candidates: &[Vec<f64>],
    beta: f64,
    rng: &mut R,
) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let scores: Vec<f64> = candidates
        .iter()
        .map(|x| {
            let (m, s) = model.predict(x);
            m + beta * s
        })
        .collect();
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] == best).collect();
    Ok(if ties.len() == 1 {
        ties[0]
    } else {
        ties[rng.gen_range(0..ties.len())]
    })
}

/// Three independent GPs over skill descriptors predicting the residual
/// (observed - repertoire) displacement in x, y and yaw.
#[derive(Debug, Clone)]
pub struct TransitionModel {
    gps: [GpModel; 3],
}

impl TransitionModel {
    pub fn new(params: GpParams) -> Self {
        TransitionModel {
            gps: std::array::from_fn(|_| GpModel::new(params)),
        }
    }

    pub fn update(&mut self, input: &[f64], residual: [f64; 3]) -> Result<()> {
        for (gp, r) in self.gps.iter_mut().zip(residual) {
            gp.update(input, r)?;
        }
        Ok(())
    }

    /// Posterior mean residual.
    pub fn mean(&self, input: &[f64]) -> [f64; 3] {
        std::array::from_fn(|i| self.gps[i].predict(input).0)
    }

    pub fn len(&self) -> usize {
        self.gps[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.gps[0].is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tight() -> GpParams {
        GpParams {
            noise_var: 1e-9,
            ..Default::default()
        }
    }

    #[test]
    fn score_examples() {
        let p = ScoreParams::default();
        let d = [0.3, -0.4, 0.2];
        assert_eq!(epsilon_score(&d, &d, &p).value, 1.0);

        // |des| = 1, error 0.5
        let des = [1.0, 0.0, 0.0];
        let obs = [1.0, 0.5, 0.0];
        let s = epsilon_score(&obs, &des, &p);
        assert_abs_diff_eq!(s.value, (-4.0f64 * 0.5 / 1.5).exp(), epsilon = 1e-12);
        assert!(!s.clamped);

        let small = [0.1, 0.0, 0.0];
        let s = epsilon_score(&[0.2, 0.0, 0.0], &small, &p);
        assert!(s.clamped);
        assert_abs_diff_eq!(s.value, (-4.0f64 * 0.1 / 0.1).exp(), epsilon = 1e-12);
    }

    #[test]
    fn empty_model_returns_prior() {
        let gp = GpModel::with_prior(GpParams::default(), PriorMean::Constant(0.7));
        assert_eq!(gp.predict(&[0.1, 0.2]), (0.7, 1.0));
        let gp = GpModel::with_prior(
            GpParams::default(),
            PriorMean::Func(Arc::new(|x: &[f64]| x[0] * 2.0)),
        );
        assert_eq!(gp.predict(&[0.25]).0, 0.5);
    }

    #[test]
    fn interpolates_training_point() {
        let mut gp = GpModel::new(tight());
        gp.update(&[0.2, 0.4], 0.8).unwrap();
        gp.update(&[0.9, 0.1], -0.3).unwrap();
        assert_abs_diff_eq!(gp.predict(&[0.2, 0.4]).0, 0.8, epsilon = 1e-6);
        assert_abs_diff_eq!(gp.predict(&[0.9, 0.1]).0, -0.3, epsilon = 1e-6);
    }

    #[test]
    fn far_from_data_reverts_to_prior() {
        let mut gp = GpModel::with_prior(GpParams::default(), PriorMean::Constant(0.25));
        gp.update(&[0.0, 0.0], 3.0).unwrap();
        let (m, s) = gp.predict(&[10.0, 10.0]);
        assert_abs_diff_eq!(m, 0.25, epsilon = 1e-3);
        assert_abs_diff_eq!(s, 1.0, epsilon = 1e-3);
    }

    #[test]
    fn duplicate_inputs_average() {
        let mut gp = GpModel::new(GpParams {
            noise_var: 0.1,
            ..Default::default()
        });
        gp.update(&[0.5], 1.0).unwrap();
        gp.update(&[0.5], 3.0).unwrap();
        // posterior mean = 2 k/(2k + noise) * avg with k = 1
        let expected = 2.0 * 2.0 / (2.0 + 0.1);
        let (m, _) = gp.predict(&[0.5]);
        assert_abs_diff_eq!(m, expected, epsilon = 1e-9);
        assert_eq!(gp.predict(&[0.5]), gp.predict(&[0.5]));
    }

    #[test]
    fn duplicate_inputs_average_with_matching_prior() {
        // with the prior mean at the average the posterior stays exactly there
        let mut gp = GpModel::with_prior(
            GpParams {
                noise_var: 0.1,
                ..Default::default()
            },
            PriorMean::Constant(2.0),
        );
        gp.update(&[0.5], 1.0).unwrap();
        gp.update(&[0.5], 3.0).unwrap();
        assert_abs_diff_eq!(gp.predict(&[0.5]).0, 2.0, epsilon = 1e-6);
    }

    #[test]
    fn exact_duplicates_without_noise_need_jitter() {
        let mut gp = GpModel::new(GpParams {
            noise_var: 1e-300,
            ..Default::default()
        });
        gp.update(&[0.5], 1.0).unwrap();
        gp.update(&[0.5], 1.0).unwrap();
        assert_abs_diff_eq!(gp.predict(&[0.5]).0, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn rejects_bad_observations() {
        let mut gp = GpModel::new(GpParams::default());
        assert!(gp.update(&[f64::NAN], 1.0).is_err());
        assert!(gp.update(&[0.0], f64::INFINITY).is_err());
        gp.update(&[0.0], 1.0).unwrap();
        assert!(gp.update(&[0.0, 1.0], 1.0).is_err());
        assert_eq!(gp.len(), 1);
    }

    #[test]
    fn ucb_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let gp = GpModel::new(GpParams::default());
        assert!(ucb_select(&gp, &[], 2.0, &mut rng).is_err());
        assert_eq!(ucb_select(&gp, &[vec![0.3]], 2.0, &mut rng).unwrap(), 0);

        let mut gp = GpModel::new(GpParams::default());
        gp.update(&[0.0], 0.1).unwrap();
        let c = vec![vec![0.0], vec![5.0]];
        assert_eq!(ucb_select(&gp, &c, 2.0, &mut rng).unwrap(), 1);

        // greedy
        let mut gp = GpModel::new(GpParams::default());
        gp.update(&[0.0], 0.9).unwrap();
        gp.update(&[3.0], 0.2).unwrap();
        let c = vec![vec![3.0], vec![0.0], vec![9.0]];
        assert_eq!(ucb_select(&gp, &c, 0.0, &mut rng).unwrap(), 1);
    }

    #[test]
    fn ucb_ties_are_random_but_seeded() {
        let gp = GpModel::new(GpParams::default());
        let c: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 * 10.0]).collect();
        let pick = |seed| ucb_select(&gp, &c, 2.0, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        assert_eq!(pick(3), pick(3));
        let distinct: std::collections::HashSet<_> = (0..40).map(pick).collect();
        assert!(distinct.len() > 3);
    }

    #[test]
    fn transition_model_learns_offset() {
        let mut t = TransitionModel::new(GpParams::default());
        assert_eq!(t.mean(&[0.0, 0.0]), [0.0; 3]);
        for i in 0..5 {
            t.update(&[i as f64 * 0.05, 0.0], [0.2, -0.1, 0.05])
                .unwrap();
        }
        let m = t.mean(&[0.1, 0.0]);
        assert!((m[0] - 0.2).abs() < 0.02 && (m[1] + 0.1).abs() < 0.02);
        assert_eq!(t.len(), 5);
    }

    proptest! {
        #[test]
        fn std_bounded_by_signal(
            pts in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64, -2.0..2.0f64), 0..25),
            q in (-1.0..2.0f64, -1.0..2.0f64),
        ) {
            let mut gp = GpModel::new(GpParams::default());
            for (a, b, y) in pts {
                gp.update(&[a, b], y).unwrap();
            }
            let (_, s) = gp.predict(&[q.0, q.1]);
            prop_assert!(s >= 0.0 && s <= 1.0 + 1e-9);
        }

        #[test]
        fn score_decreases_with_error(
            des in prop::collection::vec(-1.0..1.0f64, 3),
            dir in prop::collection::vec(-1.0..1.0f64, 3),
            e1 in 0.0..2.0f64, e2 in 0.0..2.0f64,
        ) {
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assume!(norm > 1e-3 && (e1 - e2).abs() > 1e-6);
            let p = ScoreParams::default();
            let at = |e: f64| {
                let obs: Vec<f64> = des.iter().zip(&dir).map(|(d, u)| d + e * u / norm).collect();
                epsilon_score(&obs, &des, &p).value
            };
            let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
            prop_assert!(at(lo) > at(hi));
            prop_assert!(at(hi) > 0.0 && at(lo) <= 1.0);
        }
    }
}
