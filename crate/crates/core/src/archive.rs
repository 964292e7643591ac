//! Quality-diversity containers.
//!
//! Two containers are provided: a [`GridArchive`] that discretises the
//! descriptor space into cells (optionally crossed with the 64 secondary
//! contact patterns), and a [`DistArchive`] that keeps elites whose
//! descriptors are more than `l` apart. Both keep their elites in insertion
//! order in a `Vec`; replacements happen in place so slot indices are stable.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Number of legs, and therefore of secondary descriptor bits.
pub const LEGS: usize = 6;
/// Number of distinct secondary patterns.
pub const PATTERNS: usize = 1 << LEGS;

/// A 6-bit ground-contact pattern. Bit `l` (0-based) is leg `l + 1`.
///
/// The textual form lists legs 1..6 left to right, e.g. `101111` means leg 2
/// is unused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Pattern(u8);

impl Pattern {
    pub const NONE_USED: Pattern = Pattern(0);
    pub const ALL_USED: Pattern = Pattern(0b11_1111);

    pub fn from_bits(bits: u8) -> Self {
        Pattern(bits & 0b11_1111)
    }

    pub fn from_legs(used: &[bool; LEGS]) -> Self {
        let mut b = 0u8;
        for (l, &u) in used.iter().enumerate() {
            if u {
                b |= 1 << l;
            }
        }
        Pattern(b)
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    /// Whether leg `leg` (0-based) is used.
    pub fn uses(self, leg: usize) -> bool {
        self.0 & (1 << leg) != 0
    }

    pub fn with_leg_cleared(self, leg: usize) -> Pattern {
        Pattern(self.0 & !(1 << leg))
    }

    pub fn count_used(self) -> u32 {
        self.0.count_ones()
    }

    /// Bits as 0/1 reals, leg 1 first.
    pub fn as_reals(self) -> [f64; LEGS] {
        let mut out = [0.0; LEGS];
        for (l, o) in out.iter_mut().enumerate() {
            *o = if self.uses(l) { 1.0 } else { 0.0 };
        }
        out
    }

    pub fn all() -> impl Iterator<Item = Pattern> {
        (0..PATTERNS as u8).map(Pattern)
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in 0..LEGS {
            f.write_str(if self.uses(l) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.len() != LEGS {
            return Err(Error::Config(format!(
                "pattern `{s}` must have {LEGS} bits"
            )));
        }
        let mut b = 0u8;
        for (l, ch) in s.chars().enumerate() {
            match ch {
                '1' => b |= 1 << l,
                '0' => {}
                _ => {
                    return Err(Error::Config(format!(
                        "pattern `{s}` has a non-bit character"
                    )))
                }
            }
        }
        Ok(Pattern(b))
    }
}

/// A stored solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Elite {
    pub genotype: Vec<f64>,
    pub fitness: f64,
    pub bd_primary: Vec<f64>,
    pub bd_secondary: Option<Pattern>,
    /// Yaw of the execution that produced this elite (used as the yaw target
    /// when top-level skills are scored during adaptation).
    pub recorded_yaw: f64,
}

impl Elite {
    fn primary_dist2(&self, q: &[f64]) -> f64 {
        self.bd_primary
            .iter()
            .zip(q)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    /// Squared distance over the concatenated (primary, secondary bits).
    fn full_dist2(&self, other: &Elite) -> f64 {
        let p = self.primary_dist2(&other.bd_primary);
        let s = match (self.bd_secondary, other.bd_secondary) {
            (Some(a), Some(b)) => (a.bits() ^ b.bits()).count_ones() as f64,
            _ => 0.0,
        };
        p + s
    }
}

/// Orders candidates for nearest-neighbour queries: smaller distance first,
/// then higher fitness, then earlier insertion.
#[inline]
fn better_candidate(d2: f64, fit: f64, idx: usize, best: Option<(f64, f64, usize)>) -> bool {
    match best {
        None => true,
        Some((bd, bf, bi)) => d2 < bd || (d2 == bd && (fit > bf || (fit == bf && idx < bi))),
    }
}

/// Index of the elite nearest to `q` on the primary descriptor only.
pub fn nearest_primary(elites: &[Elite], q: &[f64]) -> Result<usize> {
    let mut best: Option<(f64, f64, usize)> = None;
    for (i, e) in elites.iter().enumerate() {
        if e.bd_primary.len() != q.len() {
            return Err(Error::Dimension {
                expected: e.bd_primary.len(),
                got: q.len(),
            });
        }
        let d2 = e.primary_dist2(q);
        if better_candidate(d2, e.fitness, i, best) {
            best = Some((d2, e.fitness, i));
        }
    }
    best.map(|b| b.2).ok_or(Error::EmptyArchive)
}

/// Nearest elite carrying exactly `pattern`, if its primary distance is at
/// most `radius`.
pub fn nearest_with_pattern(
    elites: &[Elite],
    q: &[f64],
    pattern: Pattern,
    radius: f64,
) -> Option<usize> {
    let mut best: Option<(f64, f64, usize)> = None;
    for (i, e) in elites.iter().enumerate() {
        if e.bd_secondary != Some(pattern) {
            continue;
        }
        let d2 = e.primary_dist2(q);
        if better_candidate(d2, e.fitness, i, best) {
            best = Some((d2, e.fitness, i));
        }
    }
    best.filter(|b| b.0.sqrt() <= radius).map(|b| b.2)
}

/// Common surface of both containers.
pub trait Repertoire {
    fn elites(&self) -> &[Elite];
    fn insert(&mut self, e: Elite) -> Result<bool>;
    fn primary_dims(&self) -> usize;
    fn has_secondary(&self) -> bool;

    fn len(&self) -> usize {
        self.elites().len()
    }

    fn is_empty(&self) -> bool {
        self.elites().is_empty()
    }
}

/// Grid-discretised archive with at most one elite per cell.
#[derive(Debug, Clone)]
pub struct GridArchive {
    dims: Vec<usize>,
    bounds: Vec<(f64, f64)>,
    secondary: bool,
    cells: HashMap<usize, usize>,
    elites: Vec<Elite>,
}

impl GridArchive {
    pub fn new(dims: Vec<usize>, bounds: Vec<(f64, f64)>, secondary: bool) -> Result<Self> {
        if dims.len() != bounds.len() || dims.is_empty() {
            return Err(Error::Dimension {
                expected: dims.len(),
                got: bounds.len(),
            });
        }
        if dims.iter().any(|&d| d == 0) || bounds.iter().any(|(lo, hi)| !(hi > lo)) {
            return Err(Error::Config("grid needs positive dims and lo < hi".into()));
        }
        Ok(GridArchive {
            dims,
            bounds,
            secondary,
            cells: HashMap::new(),
            elites: Vec::new(),
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    /// Total number of cells, including the secondary factor.
    pub fn capacity(&self) -> usize {
        let p: usize = self.dims.iter().product();
        if self.secondary {
            p * PATTERNS
        } else {
            p
        }
    }

    /// Per-axis cell coordinates for a primary descriptor (clamped to the
    /// boundary cells).
    pub fn cell_coords(&self, bd: &[f64]) -> Result<Vec<usize>> {
        if bd.len() != self.dims.len() {
            return Err(Error::Dimension {
                expected: self.dims.len(),
                got: bd.len(),
            });
        }
        Ok(bd
            .iter()
            .zip(&self.dims)
            .zip(&self.bounds)
            .map(|((&v, &n), &(lo, hi))| axis_cell(v, lo, hi, n))
            .collect())
    }

    fn cell_index(&self, e: &Elite) -> Result<usize> {
        let coords = self.cell_coords(&e.bd_primary)?;
        let mut idx = 0usize;
        for (c, n) in coords.iter().zip(&self.dims) {
            idx = idx * n + c;
        }
        if self.secondary {
            let p = e.bd_secondary.ok_or(Error::Dimension {
                expected: LEGS,
                got: 0,
            })?;
            idx = idx * PATTERNS + p.bits() as usize;
        }
        Ok(idx)
    }

    /// Slot of the elite occupying the cell `e` would fall into.
    pub fn occupant(&self, e: &Elite) -> Result<Option<usize>> {
        Ok(self.cells.get(&self.cell_index(e)?).copied())
    }
}

#[inline]
fn axis_cell(v: f64, lo: f64, hi: f64, n: usize) -> usize {
    let c = ((v - lo) / (hi - lo) * n as f64).floor();
    if c.is_nan() || c < 0.0 {
        0
    } else if c >= n as f64 {
        n - 1
    } else {
        c as usize
    }
}

impl Repertoire for GridArchive {
    fn elites(&self) -> &[Elite] {
        &self.elites
    }

    fn insert(&mut self, e: Elite) -> Result<bool> {
        let cell = self.cell_index(&e)?;
        match self.cells.get(&cell) {
            None => {
                self.cells.insert(cell, self.elites.len());
                self.elites.push(e);
                Ok(true)
            }
            Some(&slot) if e.fitness > self.elites[slot].fitness => {
                self.elites[slot] = e;
                Ok(true)
            }
            Some(_) => Ok(false),
        }
    }

    fn primary_dims(&self) -> usize {
        self.dims.len()
    }

    fn has_secondary(&self) -> bool {
        self.secondary
    }
}

/// Unstructured archive: every pair of stored descriptors is more than `l`
/// apart under the Euclidean metric on (primary, secondary bits).
#[derive(Debug, Clone)]
pub struct DistArchive {
    l: f64,
    primary_dims: usize,
    secondary: bool,
    elites: Vec<Elite>,
    // (pattern bits, cell coords of size l) -> slots; only used when l < 1,
    // where distinct patterns can never be neighbours.
    buckets: HashMap<(u8, Vec<i64>), Vec<usize>>,
}

impl DistArchive {
    pub fn new(l: f64, primary_dims: usize, secondary: bool) -> Result<Self> {
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::Config(format!(
                "distance threshold must be positive, got {l}"
            )));
        }
        Ok(DistArchive {
            l,
            primary_dims,
            secondary,
            elites: Vec::new(),
            buckets: HashMap::new(),
        })
    }

    pub fn threshold(&self) -> f64 {
        self.l
    }

    fn bucketed(&self) -> bool {
        self.l < 1.0
    }

    fn key(&self, e: &Elite) -> (u8, Vec<i64>) {
        let p = e.bd_secondary.map_or(0, |p| p.bits());
        let c = e
            .bd_primary
            .iter()
            .map(|v| (v / self.l).floor() as i64)
            .collect();
        (p, c)
    }

    /// Nearest stored elite under the archive metric, restricted to those
    /// within `l` when bucketing is active.
    fn nearest_within(&self, e: &Elite) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        self.for_candidates(e, |i| {
            let d2 = self.elites[i].full_dist2(e);
            if best.map_or(true, |(bi, bd)| d2 < bd || (d2 == bd && i < bi)) {
                best = Some((i, d2));
            }
        });
        best.map(|(i, d2)| (i, d2.sqrt()))
    }

    /// Whether `e` lies within `l` of any stored elite other than `skip`.
    fn crowds_other(&self, e: &Elite, skip: usize) -> bool {
        let l2 = self.l * self.l;
        let mut hit = false;
        self.for_candidates(e, |i| {
            hit |= i != skip && self.elites[i].full_dist2(e) <= l2
        });
        hit
    }

    /// Calls `consider` on every elite that could lie within `l` of `e`.
    fn for_candidates(&self, e: &Elite, mut consider: impl FnMut(usize)) {
        if self.bucketed() {
            let (p, base) = self.key(e);
            let n = base.len();
            let mut offset = vec![-1i64; n];
            loop {
                let cell: Vec<i64> = base.iter().zip(&offset).map(|(b, o)| b + o).collect();
                if let Some(slots) = self.buckets.get(&(p, cell)) {
                    for &i in slots {
                        consider(i);
                    }
                }
                // odometer over {-1,0,1}^n
                let mut k = 0;
                while k < n {
                    offset[k] += 1;
                    if offset[k] <= 1 {
                        break;
                    }
                    offset[k] = -1;
                    k += 1;
                }
                if k == n {
                    break;
                }
            }
        } else {
            for i in 0..self.elites.len() {
                consider(i);
            }
        }
    }

    fn check_dims(&self, e: &Elite) -> Result<()> {
        if e.bd_primary.len() != self.primary_dims {
            return Err(Error::Dimension {
                expected: self.primary_dims,
                got: e.bd_primary.len(),
            });
        }
        if e.bd_secondary.is_some() != self.secondary {
            return Err(Error::Dimension {
                expected: if self.secondary { LEGS } else { 0 },
                got: if e.bd_secondary.is_some() { LEGS } else { 0 },
            });
        }
        Ok(())
    }

    /// Patterns that occur in the archive, ascending, with their elite counts.
    pub fn pattern_counts(&self) -> Vec<(Pattern, usize)> {
        let mut counts = [0usize; PATTERNS];
        for e in &self.elites {
            if let Some(p) = e.bd_secondary {
                counts[p.bits() as usize] += 1;
            }
        }
        Pattern::all().zip(counts).filter(|(_, c)| *c > 0).collect()
    }
}

impl Repertoire for DistArchive {
    fn elites(&self) -> &[Elite] {
        &self.elites
    }

    fn insert(&mut self, e: Elite) -> Result<bool> {
        self.check_dims(&e)?;
        if e.bd_primary.iter().any(|v| !v.is_finite()) || !e.fitness.is_finite() {
            return Err(Error::NonFinite("descriptor"));
        }
        match self.nearest_within(&e) {
            Some((i, d)) if d <= self.l => {
                // a fitter newcomer that would sit within `l` of a second
                // elite is rejected, keeping every pair more than `l` apart
                if e.fitness > self.elites[i].fitness && !self.crowds_other(&e, i) {
                    // the replacement may sit in a different bucket
                    if self.bucketed() {
                        let old = self.key(&self.elites[i]);
                        let new = self.key(&e);
                        if old != new {
                            if let Some(v) = self.buckets.get_mut(&old) {
                                v.retain(|&s| s != i);
                            }
                            self.buckets.entry(new).or_default().push(i);
                        }
                    }
                    self.elites[i] = e;
                    Ok(true)
                } else {
                    Ok(false)
                }
            }
            _ => {
                if self.bucketed() {
                    let k = self.key(&e);
                    self.buckets.entry(k).or_default().push(self.elites.len());
                }
                self.elites.push(e);
                Ok(true)
            }
        }
    }

    fn primary_dims(&self) -> usize {
        self.primary_dims
    }

    fn has_secondary(&self) -> bool {
        self.secondary
    }
}

/// Projects elites onto their first two primary dimensions over a reference
/// grid, keeping the best elite per cell. Returns the occupied-cell count and
/// the mean fitness of the kept elites (0 when empty).
pub fn project_effective(
    elites: &[Elite],
    dims: [usize; 2],
    bounds: [(f64, f64); 2],
) -> (usize, f64) {
    let mut best: HashMap<(usize, usize), f64> = HashMap::new();
    for e in elites {
        let cx = axis_cell(e.bd_primary[0], bounds[0].0, bounds[0].1, dims[0]);
        let cy = axis_cell(e.bd_primary[1], bounds[1].0, bounds[1].1, dims[1]);
        best.entry((cx, cy))
            .and_modify(|f| {
                if e.fitness > *f {
                    *f = e.fitness
                }
            })
            .or_insert(e.fitness);
    }
    if best.is_empty() {
        return (0, 0.0);
    }
    // sum in a fixed order so the mean is reproducible
    let mut cells: Vec<_> = best.into_iter().collect();
    cells.sort_by_key(|(c, _)| *c);
    let n = cells.len();
    let mean = cells.iter().map(|(_, f)| f).sum::<f64>() / n as f64;
    (n, mean)
}

/// Static kd-tree over the primary descriptors of a frozen set of elites.
///
/// Queries honour the same ordering as [`nearest_primary`]: distance, then
/// fitness, then slot index.
#[derive(Debug, Clone)]
pub struct KdTree {
    dim: usize,
    points: Vec<f64>,
    fitness: Vec<f64>,
    slots: Vec<usize>,
}

impl KdTree {
    /// Builds over the elites whose slot passes `keep`.
    pub fn build(elites: &[Elite], keep: impl Fn(&Elite) -> bool) -> Self {
        let dim = elites.first().map_or(0, |e| e.bd_primary.len());
        let mut slots: Vec<usize> = (0..elites.len()).filter(|&i| keep(&elites[i])).collect();
        let len = slots.len();
        Self::arrange(elites, &mut slots[..], 0, dim);
        let mut points = Vec::with_capacity(len * dim);
        let mut fitness = Vec::with_capacity(len);
        for &s in &slots {
            points.extend_from_slice(&elites[s].bd_primary);
            fitness.push(elites[s].fitness);
        }
        KdTree {
            dim,
            points,
            fitness,
            slots,
        }
    }

    fn arrange(elites: &[Elite], slots: &mut [usize], depth: usize, dim: usize) {
        if slots.len() <= 1 || dim == 0 {
            return;
        }
        let axis = depth % dim;
        let mid = slots.len() / 2;
        slots.select_nth_unstable_by(mid, |&a, &b| {
            elites[a].bd_primary[axis]
                .total_cmp(&elites[b].bd_primary[axis])
                .then(a.cmp(&b))
        });
        let (left, rest) = slots.split_at_mut(mid);
        Self::arrange(elites, left, depth + 1, dim);
        Self::arrange(elites, &mut rest[1..], depth + 1, dim);
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Slot of the nearest elite and its distance.
    pub fn nearest(&self, q: &[f64]) -> Option<(usize, f64)> {
        if self.slots.is_empty() {
            return None;
        }
        let mut best: Option<(f64, f64, usize)> = None;
        self.search(q, 0, self.slots.len(), 0, &mut best);
        best.map(|(d2, _, s)| (s, d2.sqrt()))
    }

    fn search(
        &self,
        q: &[f64],
        lo: usize,
        hi: usize,
        depth: usize,
        best: &mut Option<(f64, f64, usize)>,
    ) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let p = &self.points[mid * self.dim..(mid + 1) * self.dim];
        let d2: f64 = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
        let slot = self.slots[mid];
        if better_candidate(d2, self.fitness[mid], slot, *best) {
            *best = Some((d2, self.fitness[mid], slot));
        }
        let axis = depth % self.dim;
        let diff = q[axis] - p[axis];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(q, near.0, near.1, depth + 1, best);
        // equal distance must still be visited for tie-breaking
        if best.map_or(true, |b| diff * diff <= b.0) {
            self.search(q, far.0, far.1, depth + 1, best);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn elite(bd: &[f64], fit: f64, pat: Option<Pattern>) -> Elite {
        Elite {
            genotype: vec![0.5; 2],
            fitness: fit,
            bd_primary: bd.to_vec(),
            bd_secondary: pat,
            recorded_yaw: 0.0,
        }
    }

    fn top_grid() -> GridArchive {
        GridArchive::new(vec![100, 100], vec![(-1.8, 1.8); 2], false).unwrap()
    }

    #[test]
    fn pattern_text_is_leg_ordered() {
        let p: Pattern = "101111".parse().unwrap();
        assert!(!p.uses(1));
        assert!(p.uses(0) && p.uses(2) && p.uses(5));
        assert_eq!(p.to_string(), "101111");
        assert!("10111".parse::<Pattern>().is_err());
        assert!("10111x".parse::<Pattern>().is_err());
    }

    #[test]
    fn grid_cell_examples() {
        let g = top_grid();
        assert_eq!(g.cell_coords(&[0.0, 0.0]).unwrap(), vec![50, 50]);
        assert_eq!(g.cell_coords(&[1.8, 1.8]).unwrap(), vec![99, 99]);
        assert_eq!(g.cell_coords(&[-9.0, 9.0]).unwrap(), vec![0, 99]);
        assert!(g.cell_coords(&[0.0]).is_err());
    }

    #[test]
    fn grid_competition() {
        let mut g = top_grid();
        assert!(g.insert(elite(&[0.0, 0.0], -0.05, None)).unwrap());
        assert!(!g.insert(elite(&[0.001, 0.0], -0.1, None)).unwrap());
        assert!(!g.insert(elite(&[0.001, 0.0], -0.05, None)).unwrap());
        assert!(g.insert(elite(&[0.001, 0.0], -0.01, None)).unwrap());
        assert_eq!(g.len(), 1);
        assert_eq!(g.elites()[0].fitness, -0.01);
        assert!(g.insert(elite(&[0.0, 0.0, 0.0], 0.0, None)).is_err());
    }

    #[test]
    fn grid_with_secondary_capacity() {
        let mut g = GridArchive::new(vec![100, 100], vec![(-1.8, 1.8); 2], true).unwrap();
        assert_eq!(g.capacity(), 640_000);
        let a: Pattern = "111111".parse().unwrap();
        let b: Pattern = "111110".parse().unwrap();
        assert!(g.insert(elite(&[0.0, 0.0], -0.5, Some(a))).unwrap());
        assert!(g.insert(elite(&[0.0, 0.0], -0.6, Some(b))).unwrap());
        assert_eq!(g.len(), 2);
        assert!(g.insert(elite(&[0.0, 0.0], -0.6, None)).is_err());
    }

    #[test]
    fn dist_insert_examples() {
        let mut a = DistArchive::new(0.05, 3, true).unwrap();
        let p: Pattern = "111111".parse().unwrap();
        let q: Pattern = "111110".parse().unwrap();
        assert!(a.insert(elite(&[0.5, 0.5, 0.5], -1.0, Some(p))).unwrap());
        // duplicate descriptor: lower loses, higher replaces
        assert!(!a.insert(elite(&[0.5, 0.5, 0.5], -2.0, Some(p))).unwrap());
        assert!(a.insert(elite(&[0.5, 0.5, 0.5], -0.5, Some(p))).unwrap());
        assert_eq!(a.len(), 1);
        // differing in a single bit never collides
        assert!(a.insert(elite(&[0.5, 0.5, 0.5], -3.0, Some(q))).unwrap());
        assert_eq!(a.len(), 2);
        assert!(a.insert(elite(&[0.5, 0.5], -3.0, Some(q))).is_err());
        assert!(a.insert(elite(&[0.5, 0.5, 0.5], -3.0, None)).is_err());
    }

    #[test]
    fn replacement_never_crowds_a_second_elite() {
        let mut a = DistArchive::new(0.05, 1, false).unwrap();
        assert!(a.insert(elite(&[0.0], -1.0, None)).unwrap());
        assert!(a.insert(elite(&[0.08], -1.0, None)).unwrap());
        // fitter, but 0.04 from both
        assert!(!a.insert(elite(&[0.04], 0.0, None)).unwrap());
        assert!(a.insert(elite(&[-0.01], 0.0, None)).unwrap());
        assert_eq!(a.len(), 2);
    }

    #[test]
    fn random_insertions_stay_separated() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for l in [0.01, 0.05, 0.2] {
            let mut a = DistArchive::new(l, 2, false).unwrap();
            for _ in 0..3000 {
                let bd = [rng.gen_range(0.0..8.0 * l), rng.gen_range(0.0..8.0 * l)];
                a.insert(elite(&bd, rng.gen(), None)).unwrap();
            }
            let es = a.elites();
            assert!(es.len() <= 500);
            for i in 0..es.len() {
                for j in 0..i {
                    assert!(es[i].full_dist2(&es[j]).sqrt() > l);
                }
            }
        }
    }

    #[test]
    fn nearest_examples() {
        let p: Pattern = "111111".parse().unwrap();
        let q: Pattern = "011111".parse().unwrap();
        let es = vec![
            elite(&[0.0, 0.0], -0.3, Some(p)),
            elite(&[1.0, 0.0], -0.1, Some(q)),
            elite(&[0.2, 0.0], -0.2, Some(q)),
        ];
        assert!(nearest_primary(&[], &[0.0, 0.0]).is_err());
        assert_eq!(nearest_primary(&es[..1], &[5.0, 5.0]).unwrap(), 0);
        assert_eq!(nearest_primary(&es, &[0.2, 0.0]).unwrap(), 2);
        // equidistant: -0.1 beats -0.3
        assert_eq!(nearest_primary(&es[..2], &[0.5, 0.0]).unwrap(), 1);
        // pattern lookups
        assert_eq!(nearest_with_pattern(&es, &[0.0, 0.0], p, 0.15), Some(0));
        assert_eq!(
            nearest_with_pattern(
                &es,
                &[0.0, 0.0],
                Pattern::ALL_USED.with_leg_cleared(5),
                0.15
            ),
            None
        );
        assert_eq!(nearest_with_pattern(&es, &[0.0, 0.0], q, 0.15), None);
        assert_eq!(nearest_with_pattern(&es, &[0.0, 0.0], q, 0.2), Some(2));
    }

    #[test]
    fn nearest_tie_on_identical_descriptors_prefers_fitness_then_order() {
        let es = vec![
            elite(&[0.3, 0.3], -0.2, None),
            elite(&[0.3, 0.3], -0.1, None),
            elite(&[0.3, 0.3], -0.1, None),
        ];
        assert_eq!(nearest_primary(&es, &[0.3, 0.3]).unwrap(), 1);
        let t = KdTree::build(&es, |_| true);
        assert_eq!(t.nearest(&[0.3, 0.3]).unwrap().0, 1);
    }

    #[test]
    fn project_examples() {
        assert_eq!(
            project_effective(&[], [100, 100], [(-1.8, 1.8); 2]),
            (0, 0.0)
        );
        let es = vec![
            elite(&[0.0, 0.0], -0.3, None),
            elite(&[0.01, 0.0], -0.1, None),
            elite(&[0.0, 0.01], -0.2, None),
        ];
        assert_eq!(
            project_effective(&es, [100, 100], [(-1.8, 1.8); 2]),
            (1, -0.1)
        );
    }

    #[test]
    fn kdtree_matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for dim in 1..=3 {
            let es: Vec<Elite> = (0..400)
                .map(|_| {
                    // coarse values make exact ties frequent
                    let bd: Vec<f64> = (0..dim)
                        .map(|_| (rng.gen_range(0..8) as f64) / 8.0)
                        .collect();
                    elite(&bd, -(rng.gen_range(0..4) as f64), None)
                })
                .collect();
            let tree = KdTree::build(&es, |_| true);
            for _ in 0..500 {
                let q: Vec<f64> = (0..dim).map(|_| rng.gen_range(-0.2..1.2)).collect();
                assert_eq!(
                    tree.nearest(&q).unwrap().0,
                    nearest_primary(&es, &q).unwrap()
                );
            }
        }
    }

    #[test]
    fn filtered_kdtree_matches_pattern_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let es: Vec<Elite> = (0..600)
            .map(|_| {
                let bd: Vec<f64> = (0..3).map(|_| rng.gen::<f64>()).collect();
                elite(
                    &bd,
                    -rng.gen::<f64>(),
                    Some(Pattern::from_bits(rng.gen_range(0..4))),
                )
            })
            .collect();
        for bits in 0..4u8 {
            let p = Pattern::from_bits(bits);
            let tree = KdTree::build(&es, |e| e.bd_secondary == Some(p));
            for _ in 0..200 {
                let q: Vec<f64> = (0..3).map(|_| rng.gen::<f64>()).collect();
                let fast = tree.nearest(&q).filter(|(_, d)| *d <= 0.15).map(|x| x.0);
                assert_eq!(fast, nearest_with_pattern(&es, &q, p, 0.15));
            }
        }
    }
}
