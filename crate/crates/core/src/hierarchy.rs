//! The three-layer repertoire stack.
//!
//! Upper-layer genotypes are sequences of lower-layer descriptor coordinates:
//! a middle genotype holds six bottom descriptors (one per leg), a top
//! genotype holds three middle primary descriptors (one per second).
//! Resolution always goes to the nearest primary descriptor; the secondary
//! contact pattern can optionally constrain which middle elite executes.

use crate::archive::{
    nearest_primary, DistArchive, Elite, GridArchive, KdTree, Pattern, Repertoire, LEGS,
};
use crate::error::{Error, Result};
use crate::evolve::{Evaluation, MIDDLE_GENES, TOP_GENES};
use crate::geom::{circular_fitness, Pose2};
use crate::hexasim::{middle_descriptor, DamageSpec, HexaSim, LegParams, SimConfig, StepOutcome};

/// Bottom layer, frozen, with a lookup index.
#[derive(Debug, Clone)]
pub struct FrozenBottom {
    archive: DistArchive,
    tree: KdTree,
}

impl FrozenBottom {
    pub fn new(archive: DistArchive) -> Self {
        let tree = KdTree::build(archive.elites(), |_| true);
        FrozenBottom { archive, tree }
    }

    pub fn archive(&self) -> &DistArchive {
        &self.archive
    }

    /// Resolves an 18-gene middle genotype into six leg controllers.
    pub fn resolve_legs(&self, g: &[f64]) -> Result<[LegParams; LEGS]> {
        if g.len() != MIDDLE_GENES {
            return Err(Error::Dimension {
                expected: MIDDLE_GENES,
                got: g.len(),
            });
        }
        let mut legs = [LegParams::default(); LEGS];
        for (l, leg) in legs.iter_mut().enumerate() {
            let (slot, _) = self
                .tree
                .nearest(&g[l * 3..l * 3 + 3])
                .ok_or(Error::EmptyArchive)?;
            *leg = LegParams::from_genes(&self.archive.elites()[slot].genotype)?;
        }
        Ok(legs)
    }

    /// Middle-layer evaluator: six bottom lookups, one undamaged period.
    pub fn evaluate_gait(&self, sim: &HexaSim, g: &[f64]) -> Evaluation {
        let legs = self.resolve_legs(g).expect("bottom layer is non-empty");
        let out = sim.gait_step(&legs, DamageSpec::NONE);
        gait_evaluation(&out, sim.config())
    }
}

fn gait_evaluation(out: &StepOutcome, cfg: &SimConfig) -> Evaluation {
    Evaluation {
        fitness: circular_fitness(&out.displacement),
        bd_primary: middle_descriptor(&out.displacement, cfg).to_vec(),
        bd_secondary: Some(out.contact),
        recorded_yaw: out.displacement.yaw,
    }
}

/// Middle layer, frozen: lookup indices plus each elite's resolved legs and
/// undamaged outcome.
#[derive(Debug, Clone)]
pub struct FrozenMiddle {
    archive: DistArchive,
    tree: KdTree,
    pattern_trees: Vec<KdTree>,
    legs: Vec<[LegParams; LEGS]>,
    intact: Vec<StepOutcome>,
}

impl FrozenMiddle {
    pub fn new(archive: DistArchive, bottom: &FrozenBottom, sim: &HexaSim) -> Self {
        let elites = archive.elites();
        let tree = KdTree::build(elites, |_| true);
        let pattern_trees = Pattern::all()
            .map(|p| KdTree::build(elites, |e| e.bd_secondary == Some(p)))
            .collect();
        let legs: Vec<_> = elites
            .iter()
            .map(|e| {
                bottom
                    .resolve_legs(&e.genotype)
                    .expect("bottom layer is non-empty")
            })
            .collect();
        let intact = legs
            .iter()
            .map(|l| sim.gait_step(l, DamageSpec::NONE))
            .collect();
        FrozenMiddle {
            archive,
            tree,
            pattern_trees,
            legs,
            intact,
        }
    }

    pub fn archive(&self) -> &DistArchive {
        &self.archive
    }

    /// Patterns present in the archive with their elite counts.
    pub fn feasible_patterns(&self) -> Vec<(Pattern, usize)> {
        self.archive.pattern_counts()
    }

    fn nearest(&self, q: &[f64]) -> Result<usize> {
        self.tree.nearest(q).map(|x| x.0).ok_or(Error::EmptyArchive)
    }

    fn nearest_with(&self, q: &[f64], p: Pattern, radius: f64) -> Option<usize> {
        self.pattern_trees[p.bits() as usize]
            .nearest(q)
            .filter(|(_, d)| *d <= radius)
            .map(|x| x.0)
    }
}

/// Outcome of one middle-layer execution.
#[derive(Debug, Clone, PartialEq)]
pub struct MiddleExec {
    /// Slot of the executed middle elite.
    pub elite: usize,
    /// A pattern was requested but no elite carried it within the radius.
    pub fallback: bool,
    pub outcome: StepOutcome,
}

/// Outcome of one top-level skill (three chained middle executions).
#[derive(Debug, Clone, PartialEq)]
pub struct TopExec {
    pub displacement: Pose2,
    pub steps: [MiddleExec; 3],
}

impl TopExec {
    pub fn any_fallback(&self) -> bool {
        self.steps.iter().any(|s| s.fallback)
    }
}

/// Bottom and middle layers plus the simulator: everything a top-level
/// genotype needs to execute.
#[derive(Debug, Clone)]
pub struct LowerLayers {
    sim: HexaSim,
    bottom: FrozenBottom,
    middle: FrozenMiddle,
    rho: f64,
}

impl LowerLayers {
    pub fn new(sim: HexaSim, bottom: FrozenBottom, middle: FrozenMiddle, rho: f64) -> Self {
        LowerLayers {
            sim,
            bottom,
            middle,
            rho,
        }
    }

    pub fn sim(&self) -> &HexaSim {
        &self.sim
    }

    pub fn bottom(&self) -> &FrozenBottom {
        &self.bottom
    }

    pub fn middle(&self) -> &FrozenMiddle {
        &self.middle
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Legs resolved for middle elite `slot`.
    pub fn middle_legs(&self, slot: usize) -> &[LegParams; LEGS] {
        &self.middle.legs[slot]
    }

    /// Chooses the middle elite for request `q`: nearest carrying `pattern`
    /// within the radius, else nearest on the primary descriptor (flagged).
    pub fn select_middle(&self, q: &[f64], pattern: Option<Pattern>) -> Result<(usize, bool)> {
        match pattern {
            None => Ok((self.middle.nearest(q)?, false)),
            Some(p) => match self.middle.nearest_with(q, p, self.rho) {
                Some(i) => Ok((i, false)),
                None => Ok((self.middle.nearest(q)?, true)),
            },
        }
    }

    pub fn exec_middle(
        &self,
        q: &[f64],
        pattern: Option<Pattern>,
        dmg: DamageSpec,
    ) -> Result<MiddleExec> {
        if q.len() != 3 {
            return Err(Error::Dimension {
                expected: 3,
                got: q.len(),
            });
        }
        let (elite, fallback) = self.select_middle(q, pattern)?;
        let outcome = if dmg.is_none() {
            self.middle.intact[elite].clone()
        } else {
            self.sim.gait_step(&self.middle.legs[elite], dmg)
        };
        Ok(MiddleExec {
            elite,
            fallback,
            outcome,
        })
    }

    /// Executes a 9-gene top genotype, with the same pattern for all three
    /// seconds when one is given.
    pub fn exec_skill(
        &self,
        g: &[f64],
        pattern: Option<Pattern>,
        dmg: DamageSpec,
    ) -> Result<TopExec> {
        if g.len() != TOP_GENES {
            return Err(Error::Dimension {
                expected: TOP_GENES,
                got: g.len(),
            });
        }
        let s0 = self.exec_middle(&g[0..3], pattern, dmg)?;
        let s1 = self.exec_middle(&g[3..6], pattern, dmg)?;
        let s2 = self.exec_middle(&g[6..9], pattern, dmg)?;
        let displacement = s0
            .outcome
            .displacement
            .compose(&s1.outcome.displacement)
            .compose(&s2.outcome.displacement);
        Ok(TopExec {
            displacement,
            steps: [s0, s1, s2],
        })
    }

    /// Top-layer evaluator.
    pub fn evaluate_skill(&self, g: &[f64]) -> Result<Evaluation> {
        let d = self.exec_skill(g, None, DamageSpec::NONE)?.displacement;
        Ok(Evaluation {
            fitness: circular_fitness(&d),
            bd_primary: vec![d.x, d.y],
            bd_secondary: None,
            recorded_yaw: d.yaw,
        })
    }

    /// Patterns for which every second of the skill resolves without fallback.
    pub fn skill_patterns(&self, g: &[f64]) -> Vec<Pattern> {
        self.middle
            .feasible_patterns()
            .into_iter()
            .map(|(p, _)| p)
            .filter(|&p| {
                g.chunks(3)
                    .all(|q| self.middle.nearest_with(q, p, self.rho).is_some())
            })
            .collect()
    }
}

/// The trained hierarchy.
#[derive(Debug, Clone)]
pub struct HbrStack {
    lower: LowerLayers,
    top: GridArchive,
}

impl HbrStack {
    pub fn new(lower: LowerLayers, top: GridArchive) -> Self {
        HbrStack { lower, top }
    }

    pub fn lower(&self) -> &LowerLayers {
        &self.lower
    }

    pub fn top(&self) -> &GridArchive {
        &self.top
    }

    pub fn sim(&self) -> &HexaSim {
        &self.lower.sim
    }

    pub fn skills(&self) -> &[Elite] {
        self.top.elites()
    }

    pub fn exec_middle(
        &self,
        q: &[f64],
        pattern: Option<Pattern>,
        dmg: DamageSpec,
    ) -> Result<MiddleExec> {
        self.lower.exec_middle(q, pattern, dmg)
    }

    pub fn exec_top(
        &self,
        skill: &Elite,
        pattern: Option<Pattern>,
        dmg: DamageSpec,
    ) -> Result<TopExec> {
        self.lower.exec_skill(&skill.genotype, pattern, dmg)
    }

    /// Patterns that realise `skill` without fallback and, on the intact
    /// robot, land within `tolerance` of its stored `(x, y)`.
    pub fn reproducing_patterns(&self, skill: &Elite, tolerance: f64) -> Result<Vec<Pattern>> {
        let mut out = Vec::new();
        for p in self.lower.skill_patterns(&skill.genotype) {
            let d = self
                .exec_top(skill, Some(p), DamageSpec::NONE)?
                .displacement;
            if (d.x - skill.bd_primary[0]).hypot(d.y - skill.bd_primary[1]) <= tolerance {
                out.push(p);
            }
        }
        Ok(out)
    }

    /// Re-executes every top skill under every pattern present in the middle
    /// layer, on the intact robot. Rows are grouped by skill, patterns in
    /// ascending bit order.
    pub fn modulate_scan(&self) -> Result<Vec<ScanRow>> {
        let patterns: Vec<Pattern> = self
            .lower
            .middle
            .feasible_patterns()
            .into_iter()
            .map(|x| x.0)
            .collect();
        let mut rows = Vec::with_capacity(self.top.len() * patterns.len());
        for (i, skill) in self.top.elites().iter().enumerate() {
            for &p in &patterns {
                let ex = self.exec_top(skill, Some(p), DamageSpec::NONE)?;
                let d = ex.displacement;
                rows.push(ScanRow {
                    skill: i,
                    target: [skill.bd_primary[0], skill.bd_primary[1]],
                    pattern: p,
                    achieved: d,
                    feasible: !ex.any_fallback(),
                    error: (d.x - skill.bd_primary[0]).hypot(d.y - skill.bd_primary[1]),
                });
            }
        }
        Ok(rows)
    }
}

/// One skill × pattern re-execution.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub skill: usize,
    pub target: [f64; 2],
    pub pattern: Pattern,
    pub achieved: Pose2,
    /// All three seconds executed an elite carrying the pattern.
    pub feasible: bool,
    /// Distance between achieved and stored `(x, y)`.
    pub error: f64,
}

/// Per-skill summary of a scan.
#[derive(Debug, Clone, PartialEq)]
pub struct SkillModulation {
    pub skill: usize,
    pub target: [f64; 2],
    /// Feasible patterns reproducing the target within the tolerance.
    pub reproducing: usize,
    pub feasible: usize,
    /// Median error over feasible patterns (NaN if none).
    pub median_error: f64,
}

pub fn summarize_scan(rows: &[ScanRow], tolerance: f64) -> Vec<SkillModulation> {
    let mut out: Vec<SkillModulation> = Vec::new();
    for chunk in rows.chunk_by(|a, b| a.skill == b.skill) {
        let mut errs: Vec<f64> = chunk
            .iter()
            .filter(|r| r.feasible)
            .map(|r| r.error)
            .collect();
        errs.sort_by(f64::total_cmp);
        let median = if errs.is_empty() {
            f64::NAN
        } else {
            errs[(errs.len() + 1) / 2 - 1]
        };
        out.push(SkillModulation {
            skill: chunk[0].skill,
            target: chunk[0].target,
            reproducing: chunk
                .iter()
                .filter(|r| r.feasible && r.error <= tolerance)
                .count(),
            feasible: errs.len(),
            median_error: median,
        });
    }
    out
}

/// Slot of the skill whose stored `(x, y)` is nearest to `target`.
pub fn nearest_skill(skills: &[Elite], target: [f64; 2]) -> Result<usize> {
    nearest_primary(skills, &target)
}
