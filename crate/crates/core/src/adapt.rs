//! Online damage recovery: the plan–execute–update loop for every variant.
//!
//! Each step the planner picks a skill from a per-step action set using
//! repertoire outcomes corrected by the transition model; the variant then
//! decides how to realise it (which contact pattern, which repertoire), the
//! robot moves under damage, and the score and transition models learn from
//! the observation. The robot is never reset.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::archive::{Elite, GridArchive, Pattern, Repertoire};
use crate::error::{Error, Result};
use crate::evolve::flat_execute;
use crate::geom::{wrap, Pose2};
use crate::gp::{
    epsilon_score, ucb_select, GpModel, GpParams, PriorMean, ScoreParams, TransitionModel,
};
use crate::hexasim::{DamageSpec, HexaSim};
use crate::hierarchy::{FrozenMiddle, HbrStack};
use crate::planner::{apply_motion, mcts_plan, select_action_set, Maze, MctsParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algo {
    Hte,
    PerfectHte,
    Rte2d,
    Rte8d,
    AprolLite,
}

impl Algo {
    pub const ALL: [Algo; 5] = [
        Algo::Hte,
        Algo::PerfectHte,
        Algo::Rte2d,
        Algo::Rte8d,
        Algo::AprolLite,
    ];
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algo::Hte => "hte",
            Algo::PerfectHte => "perfect",
            Algo::Rte2d => "rte2d",
            Algo::Rte8d => "rte8d",
            Algo::AprolLite => "aprol",
        })
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "hte" => Algo::Hte,
            "perfect" | "perfect_hte" => Algo::PerfectHte,
            "rte2d" => Algo::Rte2d,
            "rte8d" => Algo::Rte8d,
            "aprol" | "aprol_lite" => Algo::AprolLite,
            _ => return Err(Error::Usage(format!("unknown algorithm {s:?}"))),
        })
    }
}

/// Constants of the adaptation loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptParams {
    pub max_actions: usize,
    /// UCB exploration weight for pattern / slot selection.
    pub beta: f64,
    pub transition_gp: GpParams,
    pub score_gp: GpParams,
    /// Prior mean of the score model.
    pub score_prior: f64,
    /// Length assigned to one contact bit in the score model's input.
    pub pattern_scale: f64,
    /// Multiplier on the normalised skill coordinates in the score model's
    /// input; below 1, pattern scores generalise further across skills.
    pub score_skill_scale: f64,
    pub score: ScoreParams,
    pub mcts: MctsParams,
    /// Half-width of the skill descriptor space, for normalisation.
    pub skill_bound: f64,
    /// A pattern is offered for a skill only if it reproduces the skill's
    /// `(x, y)` within this distance on the intact robot.
    pub reproduce_tolerance: f64,
}

impl Default for AdaptParams {
    fn default() -> Self {
        AdaptParams {
            max_actions: 80,
            beta: 2.0,
            transition_gp: GpParams::default(),
            score_gp: GpParams::default(),
            score_prior: 0.0,
            pattern_scale: 1.0,
            score_skill_scale: 1.0,
            score: ScoreParams::default(),
            mcts: MctsParams::default(),
            skill_bound: 1.8,
            reproduce_tolerance: 0.15,
        }
    }
}

impl AdaptParams {
    pub fn validate(&self) -> Result<()> {
        self.transition_gp.validate()?;
        self.score_gp.validate()?;
        self.mcts.validate()?;
        if self.max_actions == 0
            || !(self.beta >= 0.0)
            || !(self.skill_bound > 0.0)
            || !(self.pattern_scale >= 0.0)
            || !(self.score_skill_scale >= 0.0)
        {
            return Err(Error::Config("invalid adaptation parameters".into()));
        }
        Ok(())
    }

    /// Transition-model input: skill `(x, y)` mapped to `[0, 1]²`.
    fn skill_input(&self, bd: &[f64]) -> [f64; 2] {
        [
            0.5 * (bd[0] / self.skill_bound + 1.0),
            0.5 * (bd[1] / self.skill_bound + 1.0),
        ]
    }

    fn score_input(&self, bd: &[f64], pattern: Option<Pattern>) -> Vec<f64> {
        let mut x: Vec<f64> = self
            .skill_input(bd)
            .iter()
            .map(|v| v * self.score_skill_scale)
            .collect();
        if let Some(p) = pattern {
            x.extend(p.as_reals().iter().map(|b| b * self.pattern_scale));
        }
        x
    }

    /// Score descriptor: `(x, y)` over the skill bound, yaw over π.
    fn score_descriptor(&self, x: f64, y: f64, yaw: f64) -> [f64; 3] {
        [
            x / self.skill_bound,
            y / self.skill_bound,
            yaw / std::f64::consts::PI,
        ]
    }
}

/// The repertoires a variant adapts with.
#[derive(Debug, Clone, Copy)]
pub enum Repertoires<'a> {
    Hierarchy(&'a HbrStack),
    Flat(&'a GridArchive, &'a HexaSim),
    /// One flat 2-D repertoire per damage prior.
    Priors(&'a [(DamageSpec, GridArchive)], &'a HexaSim),
}

#[derive(Debug, Clone, Copy)]
pub struct VariantConfig<'a> {
    pub algo: Algo,
    pub repertoires: Repertoires<'a>,
    pub params: AdaptParams,
    pub seed: u64,
}

/// Best pattern for a known damage: no damaged leg, most legs used, then the
/// most middle-layer elites.
pub fn perfect_pattern(dmg: DamageSpec, middle: &FrozenMiddle) -> Pattern {
    middle
        .feasible_patterns()
        .into_iter()
        .filter(|(p, _)| (0..6).all(|l| !(dmg.is_blocked(l) && p.uses(l))))
        .max_by(|a, b| {
            a.0.count_used()
                .cmp(&b.0.count_used())
                .then(a.1.cmp(&b.1))
                .then(b.0.bits().cmp(&a.0.bits()))
        })
        .map(|x| x.0)
        .unwrap_or_else(|| {
            log::warn!(
                "no feasible pattern avoids damage {dmg}; using {}",
                Pattern::NONE_USED
            );
            Pattern::NONE_USED
        })
}

/// Active repertoire: best mean of the last (up to) five scores, untried
/// repertoires counting as 1.0; ties broken at random.
pub fn aprol_select<R: Rng + ?Sized>(history: &[Vec<f64>], rng: &mut R) -> usize {
    let score = |h: &Vec<f64>| {
        if h.is_empty() {
            1.0
        } else {
            let k = h.len().min(5);
            h[h.len() - k..].iter().sum::<f64>() / k as f64
        }
    };
    let scores: Vec<f64> = history.iter().map(score).collect();
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] == best).collect();
    ties[rng.gen_range(0..ties.len())]
}

/// One action of an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    /// Index of the planned skill within the active repertoire.
    pub skill: usize,
    pub target: [f64; 2],
    pub pattern: Option<Pattern>,
    /// Active repertoire (damage-prior variant only).
    pub repertoire: Option<usize>,
    pub predicted: Pose2,
    /// Displacement produced by the controller in open space.
    pub executed: Pose2,
    /// Displacement actually achieved after wall truncation.
    pub observed: Pose2,
    pub score: f64,
    pub clamped: bool,
    pub pose: Pose2,
    pub collided: bool,
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub algo: Algo,
    pub damage: DamageSpec,
    pub seed: u64,
    pub steps: Vec<StepRecord>,
    pub success: bool,
}

impl EpisodeLog {
    pub fn actions_used(&self) -> usize {
        self.steps.len()
    }

    pub const CSV_HEADER: &'static str = "step,skill,target_x,target_y,pattern,repertoire,pred_x,pred_y,pred_yaw,exec_x,exec_y,exec_yaw,obs_x,obs_y,obs_yaw,score,clamped,pose_x,pose_y,pose_yaw,collided,fallback";

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for s in &self.steps {
            let pat = s.pattern.map(|p| p.to_string()).unwrap_or_default();
            let rep = s.repertoire.map(|r| r.to_string()).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                s.step,
                s.skill,
                s.target[0],
                s.target[1],
                pat,
                rep,
                s.predicted.x,
                s.predicted.y,
                s.predicted.yaw,
                s.executed.x,
                s.executed.y,
                s.executed.yaw,
                s.observed.x,
                s.observed.y,
                s.observed.yaw,
                s.score,
                s.clamped as u8,
                s.pose.x,
                s.pose.y,
                s.pose.yaw,
                s.collided as u8,
                s.fallback as u8,
            )?;
        }
        Ok(())
    }

    pub const SUMMARY_HEADER: &'static str = "algo,damage,seed,actions_used,success";

    pub fn summary_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.algo,
            self.damage,
            self.seed,
            self.actions_used(),
            self.success as u8
        )
    }

    pub fn write_summary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", Self::SUMMARY_HEADER)?;
        writeln!(w, "{}", self.summary_row())
    }
}

/// A flat 8-D cell: all occupied pattern slots sharing one `(x, y)` cell.
#[derive(Debug, Clone)]
struct SlotGroup {
    members: Vec<usize>,
}

/// What the planner chooses among, for one repertoire.
#[derive(Debug, Clone)]
struct ActionSpace {
    /// Skills as offered to the planner.
    skills: Vec<Elite>,
    /// For hierarchical skills: patterns that realise and reproduce each skill.
    patterns: Vec<Vec<Pattern>>,
    /// For flat 8-D: the archive slots behind each planning skill.
    groups: Vec<SlotGroup>,
}

/// Per-variant state shared across episodes.
#[derive(Debug, Clone)]
pub struct Adapter<'a> {
    algo: Algo,
    reps: Repertoires<'a>,
    params: AdaptParams,
    spaces: Vec<ActionSpace>,
}

impl<'a> Adapter<'a> {
    pub fn new(algo: Algo, reps: Repertoires<'a>, params: AdaptParams) -> Result<Self> {
        params.validate()?;
        let spaces = match (algo, reps) {
            (Algo::Hte | Algo::PerfectHte, Repertoires::Hierarchy(stack)) => {
                let skills = stack.skills().to_vec();
                let patterns = skills
                    .iter()
                    .map(|s| stack.reproducing_patterns(s, params.reproduce_tolerance))
                    .collect::<Result<Vec<_>>>()?;
                vec![ActionSpace {
                    skills,
                    patterns,
                    groups: Vec::new(),
                }]
            }
            (Algo::Rte2d, Repertoires::Flat(a, _)) => vec![flat_space(a)],
            (Algo::Rte8d, Repertoires::Flat(a, _)) => {
                if !a.has_secondary() {
                    return Err(Error::Config(
                        "rte8d needs a repertoire with contact patterns".into(),
                    ));
                }
                vec![grouped_space(a)?]
            }
            (Algo::AprolLite, Repertoires::Priors(list, _)) => {
                if list.is_empty() {
                    return Err(Error::Config("no damage-prior repertoires".into()));
                }
                list.iter().map(|(_, a)| flat_space(a)).collect()
            }
            (a, _) => {
                return Err(Error::Config(format!(
                    "repertoire kind does not match algorithm {a}"
                )))
            }
        };
        if spaces.iter().any(|s| s.skills.is_empty()) {
            return Err(Error::EmptyArchive);
        }
        Ok(Adapter {
            algo,
            reps,
            params,
            spaces,
        })
    }

    pub fn algo(&self) -> Algo {
        self.algo
    }

    pub fn params(&self) -> &AdaptParams {
        &self.params
    }

    /// Runs one episode on `maze` under `dmg`.
    pub fn run_episode(&self, maze: &Maze, dmg: DamageSpec, seed: u64) -> Result<EpisodeLog> {
        if !maze.solvable() {
            return Err(Error::Unsolvable);
        }
        let p = &self.params;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut transition: Vec<TransitionModel> = self
            .spaces
            .iter()
            .map(|_| TransitionModel::new(p.transition_gp))
            .collect();
        let mut score_gp = GpModel::with_prior(p.score_gp, PriorMean::Constant(p.score_prior));
        let mut history: Vec<Vec<f64>> = vec![Vec::new(); self.spaces.len()];

        let perfect = match (self.algo, self.reps) {
            (Algo::PerfectHte, Repertoires::Hierarchy(stack)) => {
                Some(perfect_pattern(dmg, stack.lower().middle()))
            }
            _ => None,
        };
        // Hierarchical variants plan only with skills they can realise with a
        // reproducing pattern (any such pattern for HTE, the known-damage
        // pattern for Perfect-HTE); if none qualify, all skills are used.
        let allowed: Option<(Vec<usize>, Vec<Elite>)> = match self.algo {
            Algo::Hte | Algo::PerfectHte => {
                let sp = &self.spaces[0];
                let idx: Vec<usize> = (0..sp.skills.len())
                    .filter(|&i| match perfect {
                        Some(pat) => sp.patterns[i].contains(&pat),
                        None => !sp.patterns[i].is_empty(),
                    })
                    .collect();
                let elites = idx.iter().map(|&i| sp.skills[i].clone()).collect();
                (!idx.is_empty()).then_some((idx, elites))
            }
            _ => None,
        };

        let mut pose = maze.start_pose();
        let mut steps = Vec::new();
        while steps.len() < p.max_actions && !maze.at_goal(&pose) {
            let rep = if self.algo == Algo::AprolLite {
                aprol_select(&history, &mut rng)
            } else {
                0
            };
            let space = &self.spaces[rep];
            let pool: &[Elite] = allowed.as_ref().map_or(&space.skills, |a| &a.1);
            let offered = select_action_set(pool, &p.mcts, &mut rng);
            let disps: Vec<Pose2> = offered
                .iter()
                .map(|&i| predict(&pool[i], &transition[rep], p))
                .collect();
            let plan = mcts_plan(maze, &pose, &disps, &p.mcts, &mut rng)?;
            let chosen = offered[plan.choice];
            let planned = &pool[chosen];
            // index within the full space
            let skill_idx = allowed.as_ref().map_or(chosen, |a| a.0[chosen]);

            // realise the skill
            let (executed, pattern, fallback, target) = match (self.algo, self.reps) {
                (Algo::Hte, Repertoires::Hierarchy(stack)) => {
                    let feas = &space.patterns[skill_idx];
                    let pattern = if feas.is_empty() {
                        None
                    } else {
                        let cands: Vec<Vec<f64>> = feas
                            .iter()
                            .map(|&q| p.score_input(&planned.bd_primary, Some(q)))
                            .collect();
                        Some(feas[ucb_select(&score_gp, &cands, p.beta, &mut rng)?])
                    };
                    let ex = stack.exec_top(planned, pattern, dmg)?;
                    let fb = ex.any_fallback();
                    (ex.displacement, pattern, fb, planned.clone())
                }
                (Algo::PerfectHte, Repertoires::Hierarchy(stack)) => {
                    let ex = stack.exec_top(planned, perfect, dmg)?;
                    let fb = ex.any_fallback();
                    (ex.displacement, perfect, fb, planned.clone())
                }
                (Algo::Rte2d, Repertoires::Flat(_, sim))
                | (Algo::AprolLite, Repertoires::Priors(_, sim)) => {
                    let (d, _) = flat_execute(sim, &planned.genotype, dmg)?;
                    (d, None, false, planned.clone())
                }
                (Algo::Rte8d, Repertoires::Flat(archive, sim)) => {
                    let members = &space.groups[skill_idx].members;
                    let elites = archive.elites();
                    let cands: Vec<Vec<f64>> = members
                        .iter()
                        .map(|&m| p.score_input(&elites[m].bd_primary, elites[m].bd_secondary))
                        .collect();
                    let pick = &elites[members[ucb_select(&score_gp, &cands, p.beta, &mut rng)?]];
                    let (d, _) = flat_execute(sim, &pick.genotype, dmg)?;
                    (d, pick.bd_secondary, false, pick.clone())
                }
                _ => unreachable!("checked at construction"),
            };

            let (next, collided) = apply_motion(maze, &pose, &executed);
            let observed = if collided {
                pose.between(&next)
            } else {
                executed
            };
            let obs = p.score_descriptor(observed.x, observed.y, observed.yaw);
            let des = p.score_descriptor(
                target.bd_primary[0],
                target.bd_primary[1],
                target.recorded_yaw,
            );
            let score = epsilon_score(&obs, &des, &p.score);

            match self.algo {
                // a wall truncation says nothing about how well the pattern
                // reproduces the skill
                Algo::Hte | Algo::Rte8d if pattern.is_some() && !collided => {
                    score_gp.update(&p.score_input(&target.bd_primary, pattern), score.value)?;
                }
                Algo::AprolLite => history[rep].push(score.value),
                _ => {}
            }
            transition[rep].update(
                &p.skill_input(&target.bd_primary),
                [
                    observed.x - target.bd_primary[0],
                    observed.y - target.bd_primary[1],
                    wrap(observed.yaw - target.recorded_yaw),
                ],
            )?;

            steps.push(StepRecord {
                step: steps.len() + 1,
                skill: skill_idx,
                target: [planned.bd_primary[0], planned.bd_primary[1]],
                pattern,
                repertoire: (self.algo == Algo::AprolLite).then_some(rep),
                predicted: disps[plan.choice],
                executed,
                observed,
                score: score.value,
                clamped: score.clamped,
                pose: next,
                collided,
                fallback,
            });
            pose = next;
        }
        Ok(EpisodeLog {
            algo: self.algo,
            damage: dmg,
            seed,
            success: maze.at_goal(&pose),
            steps,
        })
    }
}

fn predict(skill: &Elite, tgp: &TransitionModel, p: &AdaptParams) -> Pose2 {
    let r = tgp.mean(&p.skill_input(&skill.bd_primary));
    Pose2 {
        x: skill.bd_primary[0] + r[0],
        y: skill.bd_primary[1] + r[1],
        yaw: wrap(skill.recorded_yaw + r[2]),
    }
}

fn flat_space(a: &GridArchive) -> ActionSpace {
    ActionSpace {
        skills: a.elites().to_vec(),
        patterns: Vec::new(),
        groups: Vec::new(),
    }
}

/// Groups the 8-D archive by `(x, y)` cell; each group is planned with its
/// fittest member.
fn grouped_space(a: &GridArchive) -> Result<ActionSpace> {
    let elites = a.elites();
    let mut keyed: Vec<(Vec<usize>, usize)> = Vec::with_capacity(elites.len());
    for (i, e) in elites.iter().enumerate() {
        keyed.push((a.cell_coords(&e.bd_primary)?, i));
    }
    keyed.sort();
    let mut skills = Vec::new();
    let mut groups = Vec::new();
    for chunk in keyed.chunk_by(|x, y| x.0 == y.0) {
        let members: Vec<usize> = chunk.iter().map(|x| x.1).collect();
        let best = *members
            .iter()
            .max_by(|&&i, &&j| {
                elites[i]
                    .fitness
                    .total_cmp(&elites[j].fitness)
                    .then(j.cmp(&i))
            })
            .unwrap();
        skills.push(elites[best].clone());
        groups.push(SlotGroup { members });
    }
    Ok(ActionSpace {
        skills,
        patterns: Vec::new(),
        groups,
    })
}

/// Runs one episode for a variant.
pub fn run_episode(v: &VariantConfig, maze: &Maze, dmg: DamageSpec) -> Result<EpisodeLog> {
    Adapter::new(v.algo, v.repertoires, v.params)?.run_episode(maze, dmg, v.seed)
}
