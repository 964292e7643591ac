use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hbr::adapt::Algo;
use hbr::analysis::{modulation_csv, ModulationReport, Projection};
use hbr::bench::{adapter, required_layer, run_bench, BenchResult};
use hbr::config::Config;
use hbr::hexasim::{DamageSpec, HexaSim};
use hbr::hierarchy::summarize_scan;
use hbr::planner::load_maze;
use hbr::store::{Layer, RepertoireSet};
use hbr::{Error, Result};

#[derive(Parser)]
#[command(
    name = "hbr",
    version,
    about = "Hierarchical behavioural repertoires for hexapod damage recovery"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Configuration file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides one configuration key, e.g. `--set adapt.beta=1.5`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    sets: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Concurrent worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output file or directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train repertoires and write them to a directory.
    Train {
        /// Evaluation budget: one value for every run, or
        /// `bottom,middle,top,flat`.
        #[arg(long)]
        budget: Option<String>,
        /// Repertoires to train: hbr, flat2d, flat8d, priors or all.
        #[arg(long, default_value = "hbr,flat2d")]
        layers: String,
    },
    /// Project repertoires onto (x, y): CSV and SVG per repertoire, plus an
    /// effective-size / mean-fitness table.
    Inspect {
        #[command(flatten)]
        reps: RepArgs,
    },
    /// Re-execute every skill under each contact pattern.
    Modulate {
        #[command(flatten)]
        reps: RepArgs,
    },
    /// Run one adaptation episode on the benchmark (or a given) maze.
    Adapt {
        #[command(flatten)]
        reps: RepArgs,
        #[arg(long, default_value = "hte")]
        algo: String,
        #[arg(long, default_value = "none")]
        damage: String,
        #[arg(long)]
        max_actions: Option<usize>,
        #[arg(long)]
        maze: Option<PathBuf>,
    },
    /// Run every algorithm on every damage for several seeds.
    Bench {
        /// Repertoire directories, one per repertoire seed.
        #[arg(
            long = "repertoires",
            value_name = "DIR",
            default_value = "repertoires"
        )]
        dirs: Vec<PathBuf>,
        /// Comma-separated algorithms.
        #[arg(long)]
        algo: Option<String>,
        /// Comma-separated damages, or `benchmark`.
        #[arg(long)]
        damage: Option<String>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        max_actions: Option<usize>,
        #[arg(long)]
        maze: Option<PathBuf>,
    },
    /// Regenerate aggregates and figures from an episodes CSV.
    Plot {
        /// Episodes CSV written by `bench`.
        episodes: PathBuf,
    },
    /// Print every configuration key with its value.
    Config,
}

#[derive(Args)]
struct RepArgs {
    /// Directory holding trained repertoires.
    #[arg(
        long = "repertoires",
        value_name = "DIR",
        default_value = "repertoires"
    )]
    dir: PathBuf,
}

fn usage(e: impl std::fmt::Display) -> Error {
    Error::Usage(e.to_string())
}

fn load_config(c: &Common) -> Result<Config> {
    let mut cfg = match &c.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    for kv in &c.sets {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k.trim(), v.trim()).map_err(usage)?;
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(j) = c.jobs {
        cfg.set("bench.jobs", &j.to_string()).map_err(usage)?;
    }
    Ok(cfg)
}

fn set_budget(cfg: &mut Config, budget: &str) -> Result<()> {
    let v = budget
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| usage(format!("bad budget {budget:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let t = &mut cfg.train;
    match v[..] {
        [b] => {
            for p in [&mut t.bottom, &mut t.middle, &mut t.top, &mut t.flat] {
                p.budget = b;
            }
        }
        [b, m, top, f] => {
            t.bottom.budget = b;
            t.middle.budget = m;
            t.top.budget = top;
            t.flat.budget = f;
        }
        _ => return Err(usage("--budget takes one value or bottom,middle,top,flat")),
    }
    cfg.train.validate().map_err(usage)
}

fn write(path: &Path, body: &str) -> Result<()> {
    if let Some(d) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(d)?;
    }
    std::fs::write(path, body)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn existing_layers(dir: &Path) -> Result<Vec<Layer>> {
    if !dir.is_dir() {
        return Err(Error::Config(format!(
            "repertoire directory {} not found",
            dir.display()
        )));
    }
    let has = |f: &str| dir.join(f).is_file();
    let mut v = Vec::new();
    if has("top.hbr") {
        v.push(Layer::Hierarchy);
    }
    if has("flat2d.hbr") {
        v.push(Layer::Flat2d);
    }
    if has("flat8d.hbr") {
        v.push(Layer::Flat8d);
    }
    if has("prior-none.hbr") {
        v.push(Layer::Priors);
    }
    Ok(v)
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(&cli.common)?;
    let sim = HexaSim::new(cfg.sim.clone())?;
    let out = cli.common.out.clone();
    match cli.cmd {
        Cmd::Config => print!("{}", cfg.dump()?),
        Cmd::Train { budget, layers } => {
            if let Some(b) = budget {
                set_budget(&mut cfg, &b)?;
            }
            let layers = Layer::parse_list(&layers)?;
            let dir = out.unwrap_or_else(|| "repertoires".into());
            let params = cfg.train.clone().with_seed(cfg.seed);
            let set = RepertoireSet::train(&params, &sim, &layers)?;
            for (name, n) in set.sizes() {
                println!("{name}: {n} elites");
            }
            for p in set.save(&dir)? {
                println!("wrote {}", p.display());
            }
        }
        Cmd::Inspect { reps } => {
            let set =
                RepertoireSet::load(&reps.dir, &sim, cfg.train.rho, &existing_layers(&reps.dir)?)?;
            let dir = out.unwrap_or_else(|| "inspect".into());
            let b = cfg.train.grid_bound;
            let mut table = "repertoire,elites,effective_size,mean_fitness\n".to_string();
            let mut views: Vec<(String, Vec<hbr::archive::Elite>)> = Vec::new();
            if let Some(s) = &set.stack {
                views.push(("top".into(), s.skills().to_vec()));
            }
            if let Some(a) = &set.flat2d {
                views.push((
                    "flat2d".into(),
                    hbr::archive::Repertoire::elites(a).to_vec(),
                ));
            }
            if let Some(a) = &set.flat8d {
                views.push((
                    "flat8d".into(),
                    hbr::archive::Repertoire::elites(a).to_vec(),
                ));
            }
            for (d, a) in &set.priors {
                views.push((
                    format!("prior-{d}"),
                    hbr::archive::Repertoire::elites(a).to_vec(),
                ));
            }
            for (name, elites) in views {
                let p = Projection::of(&elites, [cfg.train.grid_cells; 2], [(-b, b); 2]);
                table.push_str(&format!(
                    "{name},{},{},{}\n",
                    elites.len(),
                    p.effective_size,
                    p.mean_fitness
                ));
                write(&dir.join(format!("{name}-projection.csv")), &p.csv())?;
                write(
                    &dir.join(format!("{name}-projection.svg")),
                    &p.svg(&format!("{name}: best fitness per (x, y) cell")),
                )?;
            }
            print!("{table}");
            write(&dir.join("effective.csv"), &table)?;
        }
        Cmd::Modulate { reps } => {
            let set = RepertoireSet::load(&reps.dir, &sim, cfg.train.rho, &[Layer::Hierarchy])?;
            let stack = set.stack.as_ref().expect("hierarchy loaded");
            let rows = stack.modulate_scan()?;
            let summary = summarize_scan(&rows, cfg.adapt.reproduce_tolerance);
            let report = ModulationReport::of(&summary)?;
            print!("{}", report.text());
            let dir = out.unwrap_or_else(|| "modulate".into());
            write(&dir.join("modulation.csv"), &modulation_csv(&summary))?;
            let n = cfg.train.grid_cells;
            let b = cfg.train.grid_bound;
            let mut cells = vec![None; n * n];
            let cell = |v: f64| {
                (((v + b) / (2.0 * b) * n as f64)
                    .floor()
                    .clamp(0.0, (n - 1) as f64)) as usize
            };
            for m in &summary {
                cells[cell(m.target[1]) * n + cell(m.target[0])] = Some(m.reproducing as f64);
            }
            write(
                &dir.join("modulation.svg"),
                &hbr::svg::heatmap(&cells, n, "Reproducing contact patterns per skill"),
            )?;
            write(&dir.join("summary.txt"), &report.text())?;
        }
        Cmd::Adapt {
            reps,
            algo,
            damage,
            max_actions,
            maze,
        } => {
            let algo: Algo = algo.parse().map_err(usage)?;
            let dmg: DamageSpec = damage.parse().map_err(usage)?;
            if let Some(m) = max_actions {
                cfg.set("adapt.max_actions", &m.to_string())
                    .map_err(usage)?;
            }
            let maze = load_maze(maze.as_deref(), cfg.maze)?;
            let set = RepertoireSet::load(&reps.dir, &sim, cfg.train.rho, &[required_layer(algo)])?;
            let ad = adapter(algo, &set, cfg.adapt)?;
            let log = ad.run_episode(&maze, dmg, cfg.seed)?;
            let path = out.unwrap_or_else(|| "episode.csv".into());
            let mut buf = Vec::new();
            log.write_csv(&mut buf)?;
            write(&path, &String::from_utf8_lossy(&buf))?;
            println!(
                "{algo} under {dmg}: {} after {} actions",
                if log.success {
                    "reached the goal"
                } else {
                    "failed"
                },
                log.actions_used()
            );
        }
        Cmd::Bench {
            dirs,
            algo,
            damage,
            reps,
            max_actions,
            maze,
        } => {
            if let Some(a) = algo {
                cfg.set("bench.algos", &a).map_err(usage)?;
            }
            if let Some(d) = damage {
                cfg.set("bench.damages", &d).map_err(usage)?;
            }
            if let Some(r) = reps {
                cfg.set("bench.reps", &r.to_string()).map_err(usage)?;
            }
            if let Some(m) = max_actions {
                cfg.set("adapt.max_actions", &m.to_string())
                    .map_err(usage)?;
            }
            let maze = load_maze(maze.as_deref(), cfg.maze)?;
            let mut layers: Vec<Layer> =
                cfg.bench.algos()?.into_iter().map(required_layer).collect();
            layers.sort();
            layers.dedup();
            let sets = dirs
                .iter()
                .map(|d| RepertoireSet::load(d, &sim, cfg.train.rho, &layers))
                .collect::<Result<Vec<_>>>()?;
            let result = run_bench(&sets, &maze, &cfg.adapt, &cfg.bench)?;
            let dir = out.unwrap_or_else(|| "bench".into());
            for p in result.write(&dir)? {
                println!("wrote {}", p.display());
            }
            print!("{}", result.aggregate_csv()?);
        }
        Cmd::Plot { episodes } => {
            let text = std::fs::read_to_string(&episodes)?;
            let result = BenchResult::parse_episodes(&text)?;
            let dir =
                out.unwrap_or_else(|| episodes.parent().map(Path::to_path_buf).unwrap_or_default());
            for p in result.write(&dir)? {
                println!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Usage(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
