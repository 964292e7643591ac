//! Summary statistics for benchmark results.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Nearest-rank percentile: the element at rank `ceil(p/100 · n)` of the
/// ascending sort; no interpolation.
pub fn percentile_nearest_rank(samples: &[f64], p: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    if !(p > 0.0 && p <= 100.0) {
        return Err(Error::Config(format!("percentile {p} outside (0, 100]")));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * s.len() as f64).ceil() as usize;
    Ok(s[rank.clamp(1, s.len()) - 1])
}

pub fn median(samples: &[f64]) -> Result<f64> {
    percentile_nearest_rank(samples, 50.0)
}

/// Ranks starting at 1, ties sharing their mean rank.
pub fn midranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MannWhitney {
    /// U statistic of the first sample.
    pub u: f64,
    pub p_two_sided: f64,
    pub exact: bool,
}

/// Samples up to this size per group use the exact permutation distribution.
pub const EXACT_LIMIT: usize = 20;

/// Two-sided Mann–Whitney U test with midranks for ties.
pub fn mannwhitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let (na, nb) = (a.len(), b.len());
    let all: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&all);
    let ra: f64 = ranks[..na].iter().sum();
    let u = ra - (na * (na + 1)) as f64 / 2.0;
    let mean = (na * nb) as f64 / 2.0;
    if na <= EXACT_LIMIT && nb <= EXACT_LIMIT {
        return Ok(MannWhitney {
            u,
            p_two_sided: exact_p(&ranks, na, u - mean),
            exact: true,
        });
    }
    let n = (na + nb) as f64;
    let mut ties = 0.0;
    let mut sorted = all.clone();
    sorted.sort_by(f64::total_cmp);
    for g in sorted.chunk_by(|x, y| x == y) {
        let t = g.len() as f64;
        ties += t * t * t - t;
    }
    let var = (na * nb) as f64 / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
    let p = if var <= 0.0 {
        1.0
    } else {
        // continuity correction
        let z = ((u - mean).abs() - 0.5).max(0.0) / var.sqrt();
        let norm = Normal::new(0.0, 1.0).expect("unit normal");
        (2.0 * (1.0 - norm.cdf(z))).min(1.0)
    };
    Ok(MannWhitney {
        u,
        p_two_sided: p,
        exact: false,
    })
}

/// Probability, over all equally likely assignments of the pooled midranks
/// to the first group, of a deviation at least as large as `dev`.
fn exact_p(ranks: &[f64], na: usize, dev: f64) -> f64 {
    // doubled midranks are integers
    let r2: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let total: usize = r2.iter().sum();
    // ways[k][s]: subsets of size k with doubled rank sum s
    let mut ways = vec![vec![0.0f64; total + 1]; na + 1];
    ways[0][0] = 1.0;
    for &r in &r2 {
        for k in (1..=na).rev() {
            for s in (r..=total).rev() {
                let w = ways[k - 1][s - r];
                if w != 0.0 {
                    ways[k][s] += w;
                }
            }
        }
    }
    let nb = ranks.len() - na;
    let mean = (na * nb) as f64 / 2.0;
    let offset = (na * (na + 1)) as f64 / 2.0;
    let (mut hit, mut all) = (0.0, 0.0);
    for (s, &w) in ways[na].iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        all += w;
        let u = s as f64 / 2.0 - offset;
        if (u - mean).abs() >= dev.abs() - 1e-9 {
            hit += w;
        }
    }
    (hit / all).min(1.0)
}

/// Spearman rank correlation (Pearson correlation of midranks); NaN when
/// either input is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::EmptySample);
    }
    let (rx, ry) = (midranks(x), midranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn nearest_rank_examples() {
        assert_eq!(
            percentile_nearest_rank(&[4.0, 1.0, 3.0, 2.0], 50.0).unwrap(),
            2.0
        );
        assert_eq!(percentile_nearest_rank(&[7.0], 12.5).unwrap(), 7.0);
        assert_eq!(
            percentile_nearest_rank(&[1.0, 2.0, 3.0, 4.0, 5.0], 75.0).unwrap(),
            4.0
        );
        assert_eq!(
            percentile_nearest_rank(&[1.0, 2.0, 3.0], 100.0).unwrap(),
            3.0
        );
        assert!(percentile_nearest_rank(&[], 50.0).is_err());
        assert!(percentile_nearest_rank(&[1.0], 0.0).is_err());
    }

    /// Brute force over all subsets of the pooled midranks.
    fn enumerate_p(a: &[f64], b: &[f64]) -> f64 {
        let all: Vec<f64> = a.iter().chain(b).copied().collect();
        let r = midranks(&all);
        let (na, n) = (a.len(), all.len());
        let mean = (na * b.len()) as f64 / 2.0;
        let u_of = |mask: u32| {
            (0..n)
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| r[i])
                .sum::<f64>()
                - (na * (na + 1)) as f64 / 2.0
        };
        let obs = u_of((1 << na) - 1);
        let (mut hit, mut tot) = (0, 0);
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize == na {
                tot += 1;
                if (u_of(mask) - mean).abs() >= (obs - mean).abs() - 1e-9 {
                    hit += 1;
                }
            }
        }
        hit as f64 / tot as f64
    }

    #[test]
    fn mann_whitney_examples() {
        let r = mannwhitney_u(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!(r.exact);
        assert_eq!(r.u, 4.5);
        assert_eq!(r.p_two_sided, 1.0);
        let r = mannwhitney_u(&[1.0, 2.0, 3.0], &[10.0, 11.0, 12.0]).unwrap();
        assert_eq!(r.u, 0.0);
        assert_abs_diff_eq!(r.p_two_sided, 0.1, epsilon = 1e-12);
        let r = mannwhitney_u(&[5.0], &[5.0]).unwrap();
        assert_eq!(r.u, 0.5);
        assert!(mannwhitney_u(&[], &[1.0]).is_err());
    }

    #[test]
    fn normal_approximation_for_large_samples() {
        let a: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..30).map(|i| i as f64 + 15.0).collect();
        let r = mannwhitney_u(&a, &b).unwrap();
        assert!(!r.exact);
        assert_eq!(r.u, 112.5);
        assert!(r.p_two_sided < 1e-3);
        let same = mannwhitney_u(&a, &a).unwrap();
        assert_eq!(same.p_two_sided, 1.0);
    }

    proptest! {
        #[test]
        fn exact_matches_enumeration(
            a in proptest::collection::vec(0u8..6, 1..6),
            b in proptest::collection::vec(0u8..6, 1..6),
        ) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            let r = mannwhitney_u(&a, &b).unwrap();
            prop_assert!((r.p_two_sided - enumerate_p(&a, &b)).abs() < 1e-12);
        }
    }

    #[test]
    fn spearman_monotone() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_abs_diff_eq!(
            spearman(&x, &[10.0, 20.0, 25.0, 100.0]).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            spearman(&x, &[4.0, 3.0, 2.0, 1.0]).unwrap(),
            -1.0,
            epsilon = 1e-12
        );
        assert!(spearman(&x, &[1.0, 1.0, 1.0, 1.0]).unwrap().is_nan());
    }
}
