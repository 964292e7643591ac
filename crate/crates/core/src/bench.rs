//! Benchmark suite: every variant × damage × repertoire seed × episode seed,
//! with nearest-rank aggregates, rank tests and SVG summaries.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adapt::{AdaptParams, Adapter, Algo, Repertoires};
use crate::error::{Error, Result};
use crate::hexasim::DamageSpec;
use crate::planner::Maze;
use crate::stats::{mannwhitney_u, percentile_nearest_rank};
use crate::store::{Layer, RepertoireSet};
use crate::svg::{bar_chart, box_plot};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchParams {
    /// Episode seeds per (variant, damage, repertoire).
    pub reps: usize,
    /// Comma-separated algorithm names.
    pub algos: String,
    /// Comma-separated damage names, or `benchmark` for the seven standard ones.
    pub damages: String,
    /// Concurrent episodes.
    pub jobs: usize,
}

impl Default for BenchParams {
    fn default() -> Self {
        BenchParams {
            reps: 20,
            algos: "hte,perfect,rte2d,rte8d,aprol".into(),
            damages: "benchmark".into(),
            jobs: 1,
        }
    }
}

impl BenchParams {
    pub fn algos(&self) -> Result<Vec<Algo>> {
        self.algos.split(',').map(|s| s.trim().parse()).collect()
    }

    pub fn damages(&self) -> Result<Vec<DamageSpec>> {
        if self.damages.trim() == "benchmark" {
            return Ok(DamageSpec::benchmark());
        }
        self.damages.split(',').map(|s| s.trim().parse()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 || self.jobs == 0 {
            return Err(Error::Config("bench reps and jobs must be positive".into()));
        }
        self.algos()?;
        self.damages()?;
        Ok(())
    }
}

/// Repertoires an algorithm adapts with.
pub fn required_layer(algo: Algo) -> Layer {
    match algo {
        Algo::Hte | Algo::PerfectHte => Layer::Hierarchy,
        Algo::Rte2d => Layer::Flat2d,
        Algo::Rte8d => Layer::Flat8d,
        Algo::AprolLite => Layer::Priors,
    }
}

pub fn adapter<'a>(algo: Algo, set: &'a RepertoireSet, params: AdaptParams) -> Result<Adapter<'a>> {
    let missing = || {
        Error::Config(format!(
            "{algo} needs the {} repertoires",
            required_layer(algo)
        ))
    };
    let reps = match required_layer(algo) {
        Layer::Hierarchy => Repertoires::Hierarchy(set.stack.as_ref().ok_or_else(missing)?),
        Layer::Flat2d | Layer::Flat8d => {
            let a = if algo == Algo::Rte2d {
                &set.flat2d
            } else {
                &set.flat8d
            };
            Repertoires::Flat(a.as_ref().ok_or_else(missing)?, &set.sim)
        }
        Layer::Priors => {
            if set.priors.is_empty() {
                return Err(missing());
            }
            Repertoires::Priors(&set.priors, &set.sim)
        }
    };
    Adapter::new(algo, reps, params)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRow {
    pub algo: Algo,
    pub damage: DamageSpec,
    pub repertoire: usize,
    pub seed: u64,
    pub actions_used: usize,
    pub success: bool,
}

pub const EPISODE_HEADER: &str = "algo,damage,repertoire,seed,actions_used,success";

impl EpisodeRow {
    fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.algo,
            self.damage,
            self.repertoire,
            self.seed,
            self.actions_used,
            self.success as u8
        )
    }
}

/// Summary of one algorithm on one damage (or pooled over all, `damage = None`).
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub algo: Algo,
    pub damage: Option<DamageSpec>,
    pub n: usize,
    pub median: f64,
    pub p25: f64,
    pub p75: f64,
    pub failure_fraction: f64,
}

pub const AGGREGATE_HEADER: &str = "algo,damage,n,median,p25,p75,failure_fraction";

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub rows: Vec<EpisodeRow>,
}

fn aggregate_of(algo: Algo, damage: Option<DamageSpec>, rows: &[&EpisodeRow]) -> Result<Aggregate> {
    let a: Vec<f64> = rows.iter().map(|r| r.actions_used as f64).collect();
    Ok(Aggregate {
        algo,
        damage,
        n: a.len(),
        median: percentile_nearest_rank(&a, 50.0)?,
        p25: percentile_nearest_rank(&a, 25.0)?,
        p75: percentile_nearest_rank(&a, 75.0)?,
        failure_fraction: rows.iter().filter(|r| !r.success).count() as f64 / a.len() as f64,
    })
}

impl BenchResult {
    /// Algorithms in first-appearance order.
    pub fn algos(&self) -> Vec<Algo> {
        let mut v: Vec<Algo> = Vec::new();
        for r in &self.rows {
            if !v.contains(&r.algo) {
                v.push(r.algo);
            }
        }
        v
    }

    fn damages(&self) -> Vec<DamageSpec> {
        let mut v: Vec<DamageSpec> = Vec::new();
        for r in &self.rows {
            if !v.contains(&r.damage) {
                v.push(r.damage);
            }
        }
        v
    }

    pub fn actions(&self, algo: Algo) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.algo == algo)
            .map(|r| r.actions_used as f64)
            .collect()
    }

    /// Per-damage aggregates followed by one pooled row per algorithm.
    pub fn aggregates(&self) -> Result<Vec<Aggregate>> {
        let mut out = Vec::new();
        for algo in self.algos() {
            for d in self.damages() {
                let rows: Vec<&EpisodeRow> = self
                    .rows
                    .iter()
                    .filter(|r| r.algo == algo && r.damage == d)
                    .collect();
                if !rows.is_empty() {
                    out.push(aggregate_of(algo, Some(d), &rows)?);
                }
            }
            let rows: Vec<&EpisodeRow> = self.rows.iter().filter(|r| r.algo == algo).collect();
            out.push(aggregate_of(algo, None, &rows)?);
        }
        Ok(out)
    }

    /// Median over damages of each replication `(repertoire, seed)`.
    pub fn replication_medians(&self, algo: Algo) -> Result<Vec<f64>> {
        let mut by: BTreeMap<(usize, u64), Vec<f64>> = BTreeMap::new();
        for r in self.rows.iter().filter(|r| r.algo == algo) {
            by.entry((r.repertoire, r.seed))
                .or_default()
                .push(r.actions_used as f64);
        }
        by.values()
            .map(|v| percentile_nearest_rank(v, 50.0))
            .collect()
    }

    pub fn episodes_csv(&self) -> String {
        let mut s = format!("{EPISODE_HEADER}\n");
        for r in &self.rows {
            s.push_str(&r.csv());
            s.push('\n');
        }
        s
    }

    pub fn aggregate_csv(&self) -> Result<String> {
        let mut s = format!("{AGGREGATE_HEADER}\n");
        for a in self.aggregates()? {
            let d = a
                .damage
                .map(|d| d.to_string())
                .unwrap_or_else(|| "all".into());
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                a.algo, d, a.n, a.median, a.p25, a.p75, a.failure_fraction
            );
        }
        Ok(s)
    }

    /// Pairwise two-sided rank tests on pooled action counts.
    pub fn tests_csv(&self) -> Result<String> {
        let mut s = "a,b,u,p_two_sided,exact\n".to_string();
        let algos = self.algos();
        for (i, &a) in algos.iter().enumerate() {
            for &b in &algos[i + 1..] {
                let t = mannwhitney_u(&self.actions(a), &self.actions(b))?;
                let _ = writeln!(s, "{a},{b},{},{:e},{}", t.u, t.p_two_sided, t.exact as u8);
            }
        }
        Ok(s)
    }

    pub fn actions_svg(&self) -> Result<String> {
        let groups = self
            .algos()
            .into_iter()
            .map(|a| Ok((a.to_string(), self.replication_medians(a)?)))
            .collect::<Result<Vec<_>>>()?;
        box_plot(
            &groups,
            "Actions to reach the goal (median over damages)",
            "actions",
        )
    }

    pub fn failures_svg(&self) -> Result<String> {
        let bars = self
            .aggregates()?
            .into_iter()
            .filter(|a| a.damage.is_none())
            .map(|a| (a.algo.to_string(), 100.0 * a.failure_fraction))
            .collect::<Vec<_>>();
        Ok(bar_chart(&bars, "Failed episodes", "% of episodes"))
    }

    /// Writes all CSV and SVG artifacts into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let files = [
            ("episodes.csv", self.episodes_csv()),
            ("aggregate.csv", self.aggregate_csv()?),
            ("tests.csv", self.tests_csv()?),
            ("actions.svg", self.actions_svg()?),
            ("failures.svg", self.failures_svg()?),
        ];
        let mut out = Vec::new();
        for (name, body) in files {
            let p = dir.join(name);
            std::fs::write(&p, body)?;
            out.push(p);
        }
        Ok(out)
    }

    /// Parses an episodes CSV as written by [`BenchResult::episodes_csv`].
    pub fn parse_episodes(text: &str) -> Result<BenchResult> {
        let mut lines = text.lines();
        if lines.next() != Some(EPISODE_HEADER) {
            return Err(Error::Config(format!(
                "episodes CSV must start with `{EPISODE_HEADER}`"
            )));
        }
        let mut rows = Vec::new();
        for (i, l) in lines.enumerate() {
            let bad = || Error::Config(format!("episodes CSV line {}: malformed row", i + 2));
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 6 {
                return Err(bad());
            }
            rows.push(EpisodeRow {
                algo: f[0].parse().map_err(|_| bad())?,
                damage: f[1].parse().map_err(|_| bad())?,
                repertoire: f[2].parse().map_err(|_| bad())?,
                seed: f[3].parse().map_err(|_| bad())?,
                actions_used: f[4].parse().map_err(|_| bad())?,
                success: match f[5] {
                    "1" => true,
                    "0" => false,
                    _ => return Err(bad()),
                },
            });
        }
        Ok(BenchResult { rows })
    }
}

/// Runs the suite over one repertoire set per repertoire seed. Adapters are
/// built (and repertoire requirements checked) before any episode runs.
pub fn run_bench(
    sets: &[RepertoireSet],
    maze: &Maze,
    adapt: &AdaptParams,
    bench: &BenchParams,
) -> Result<BenchResult> {
    bench.validate()?;
    if !maze.solvable() {
        return Err(Error::Unsolvable);
    }
    let algos = bench.algos()?;
    let damages = bench.damages()?;
    let mut adapters = Vec::new();
    for (r, set) in sets.iter().enumerate() {
        for &a in &algos {
            adapters.push(((a, r), adapter(a, set, *adapt)?));
        }
    }
    let mut jobs = Vec::new();
    for &a in &algos {
        for &d in &damages {
            for r in 0..sets.len() {
                for s in 0..bench.reps as u64 {
                    jobs.push((a, d, r, s));
                }
            }
        }
    }
    let find = |a: Algo, r: usize| {
        &adapters
            .iter()
            .find(|x| x.0 == (a, r))
            .expect("adapter built")
            .1
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(bench.jobs)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let rows = pool.install(|| {
        jobs.par_iter()
            .map(|&(a, d, r, s)| {
                let log = find(a, r).run_episode(maze, d, s)?;
                Ok(EpisodeRow {
                    algo: a,
                    damage: d,
                    repertoire: r,
                    seed: s,
                    actions_used: log.actions_used(),
                    success: log.success,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(BenchResult { rows })
}
