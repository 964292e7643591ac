//! Repertoire analyses: 2-D projections and secondary-pattern modulation
//! summaries.

use std::fmt::Write as _;

use crate::archive::{project_effective, Elite};
use crate::error::Result;
use crate::hierarchy::SkillModulation;
use crate::stats::{percentile_nearest_rank, spearman};
use crate::svg::heatmap;

/// Best fitness per cell after projecting onto the first two primary
/// dimensions; row-major with row 0 at the low end of the second axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub dims: [usize; 2],
    pub bounds: [(f64, f64); 2],
    pub cells: Vec<Option<f64>>,
    pub effective_size: usize,
    pub mean_fitness: f64,
}

fn axis_cell(v: f64, (lo, hi): (f64, f64), n: usize) -> usize {
    let c = ((v - lo) / (hi - lo) * n as f64).floor();
    c.clamp(0.0, (n - 1) as f64) as usize
}

impl Projection {
    pub fn of(elites: &[Elite], dims: [usize; 2], bounds: [(f64, f64); 2]) -> Projection {
        let mut cells = vec![None; dims[0] * dims[1]];
        for e in elites {
            let cx = axis_cell(e.bd_primary[0], bounds[0], dims[0]);
            let cy = axis_cell(e.bd_primary[1], bounds[1], dims[1]);
            let c: &mut Option<f64> = &mut cells[cy * dims[0] + cx];
            if c.map_or(true, |f| e.fitness > f) {
                *c = Some(e.fitness);
            }
        }
        let (effective_size, mean_fitness) = project_effective(elites, dims, bounds);
        Projection {
            dims,
            bounds,
            cells,
            effective_size,
            mean_fitness,
        }
    }

    /// `cx,cy,x,y,fitness` for every occupied cell, `(x, y)` the cell centre.
    pub fn csv(&self) -> String {
        let mut s = "cx,cy,x,y,fitness\n".to_string();
        let w = |a: usize| (self.bounds[a].1 - self.bounds[a].0) / self.dims[a] as f64;
        for (i, c) in self.cells.iter().enumerate() {
            if let Some(f) = c {
                let (cx, cy) = (i % self.dims[0], i / self.dims[0]);
                let x = self.bounds[0].0 + (cx as f64 + 0.5) * w(0);
                let y = self.bounds[1].0 + (cy as f64 + 0.5) * w(1);
                let _ = writeln!(s, "{cx},{cy},{x},{y},{f}");
            }
        }
        s
    }

    pub fn svg(&self, title: &str) -> String {
        heatmap(&self.cells, self.dims[0], title)
    }
}

/// How the number of reproducing patterns varies with skill displacement.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulationReport {
    pub skills: usize,
    /// Norm below which a skill counts as central (33rd percentile).
    pub central_cut: f64,
    pub central: usize,
    /// Central skills reproduced by at least two patterns.
    pub central_multi: usize,
    pub spearman_reproducing: f64,
    pub spearman_feasible: f64,
    /// `(lower norm, upper norm, skills, mean reproducing, mean feasible)`.
    pub bands: Vec<(f64, f64, usize, f64, f64)>,
}

impl ModulationReport {
    pub fn of(summary: &[SkillModulation]) -> Result<ModulationReport> {
        let norms: Vec<f64> = summary
            .iter()
            .map(|s| s.target[0].hypot(s.target[1]))
            .collect();
        let reproducing: Vec<f64> = summary.iter().map(|s| s.reproducing as f64).collect();
        let feasible: Vec<f64> = summary.iter().map(|s| s.feasible as f64).collect();
        let cut = percentile_nearest_rank(&norms, 33.0)?;
        let central: Vec<&SkillModulation> = summary
            .iter()
            .zip(&norms)
            .filter(|(_, n)| **n < cut)
            .map(|(s, _)| s)
            .collect();
        let top = norms.iter().copied().fold(0.0, f64::max);
        let width = 0.3;
        let mut bands = Vec::new();
        let mut lo = 0.0;
        while lo <= top {
            let hi = lo + width;
            let sel: Vec<usize> = (0..summary.len())
                .filter(|&i| norms[i] >= lo && norms[i] < hi)
                .collect();
            if !sel.is_empty() {
                let k = sel.len() as f64;
                bands.push((
                    lo,
                    hi,
                    sel.len(),
                    sel.iter().map(|&i| reproducing[i]).sum::<f64>() / k,
                    sel.iter().map(|&i| feasible[i]).sum::<f64>() / k,
                ));
            }
            lo = hi;
        }
        Ok(ModulationReport {
            skills: summary.len(),
            central_cut: cut,
            central: central.len(),
            central_multi: central.iter().filter(|s| s.reproducing >= 2).count(),
            spearman_reproducing: spearman(&norms, &reproducing)?,
            spearman_feasible: spearman(&norms, &feasible)?,
            bands,
        })
    }

    pub fn central_fraction(&self) -> f64 {
        if self.central == 0 {
            0.0
        } else {
            self.central_multi as f64 / self.central as f64
        }
    }

    pub fn text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "skills: {}", self.skills);
        let _ = writeln!(
            s,
            "central third (|bd| < {:.3}): {}/{} skills reproduced by >= 2 patterns ({:.1}%)",
            self.central_cut,
            self.central_multi,
            self.central,
            100.0 * self.central_fraction()
        );
        let _ = writeln!(
            s,
            "spearman(|bd|, reproducing patterns) = {:.3}",
            self.spearman_reproducing
        );
        let _ = writeln!(
            s,
            "spearman(|bd|, feasible patterns)    = {:.3}",
            self.spearman_feasible
        );
        for (lo, hi, n, r, f) in &self.bands {
            let _ = writeln!(
                s,
                "|bd| in [{lo:.1}, {hi:.1}): {n:5} skills, mean reproducing {r:.2}, mean feasible {f:.2}"
            );
        }
        s
    }
}

/// Per-skill summary as CSV.
pub fn modulation_csv(summary: &[SkillModulation]) -> String {
    let mut s = "skill,x,y,norm,reproducing,feasible,median_error\n".to_string();
    for m in summary {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            m.skill,
            m.target[0],
            m.target[1],
            m.target[0].hypot(m.target[1]),
            m.reproducing,
            m.feasible,
            m.median_error
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::archive::Pattern;

    fn e(x: f64, y: f64, f: f64) -> Elite {
        Elite {
            genotype: vec![],
            fitness: f,
            bd_primary: vec![x, y],
            bd_secondary: Some(Pattern::ALL_USED),
            recorded_yaw: 0.0,
        }
    }

    #[test]
    fn projection_keeps_best_per_cell() {
        let es = [e(0.1, 0.1, -0.5), e(0.12, 0.11, -0.2), e(-0.9, 0.9, -0.1)];
        let p = Projection::of(&es, [2, 2], [(-1.0, 1.0), (-1.0, 1.0)]);
        assert_eq!(p.effective_size, 2);
        assert_eq!(p.cells, vec![None, None, Some(-0.1), Some(-0.2)]);
        assert!((p.mean_fitness + 0.15).abs() < 1e-12);
        assert_eq!(p.csv().lines().count(), 3);
    }

    #[test]
    fn modulation_report_counts_central_skills() {
        let m = |i: usize, r: usize| SkillModulation {
            skill: i,
            target: [i as f64 * 0.1, 0.0],
            reproducing: r,
            feasible: r + 1,
            median_error: 0.0,
        };
        let summary: Vec<_> = (0..9).map(|i| m(i, 9 - i)).collect();
        let r = ModulationReport::of(&summary).unwrap();
        assert_eq!(r.central, 2);
        assert_eq!(r.central_multi, 2);
        assert!((r.spearman_reproducing + 1.0).abs() < 1e-12);
        assert_eq!(r.bands.iter().map(|b| b.2).sum::<usize>(), 9);
        assert!(r.text().contains("2/2"));
    }
}
