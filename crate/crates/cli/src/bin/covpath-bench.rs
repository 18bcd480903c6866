//! Runs classical controllers over a directory of maps and writes result
//! tables, or recomputes metrics from a saved episode trace.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use covpath::bench::{aggregate, compute_metrics, read_trace_csv, run_suite, write_episodes_csv, write_summary_csv, write_trace_csv, SuiteMap};
use covpath::episode::{Controller, EpisodeConfig, RandomController, Task};
use covpath::planners::PlannerKind;
use covpath::worldmodel::load_map;

#[derive(Parser)]
#[command(version, about = "Coverage benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a controller on every map in a directory.
    Run {
        #[arg(long, default_value = "mowing")]
        task: Task,
        /// bsa, tsp-offline, tsp-online, frontier or random.
        #[arg(long, alias = "planner")]
        controller: String,
        /// Directory of `.map` files.
        #[arg(long)]
        maps: PathBuf,
        /// Episodes per map.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        /// Seed of the first episode on each map.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Output directory for episodes.csv and summary.csv.
        #[arg(long)]
        out: PathBuf,
        /// Also write one step trace per episode under `traces/`.
        #[arg(long)]
        traces: bool,
        /// Acceleration limits and action delay.
        #[arg(long)]
        higher_order: bool,
    },
    /// Metrics of a step trace CSV.
    Metrics {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, default_value_t = 0.99)]
        goal: f64,
    },
}

fn load_maps(dir: &Path, cfg: &EpisodeConfig) -> anyhow::Result<Vec<SuiteMap>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "map"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no .map files in {}", dir.display());
    }
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let world = load_map(&text).with_context(|| format!("parsing {}", p.display()))?;
            let name = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            SuiteMap::new(name, world, cfg).with_context(|| format!("preparing {}", p.display()))
        })
        .collect()
}

fn factory(name: &str) -> anyhow::Result<Box<dyn Fn(u64) -> Box<dyn Controller + Send> + Sync>> {
    if name == "random" {
        return Ok(Box::new(|seed| Box::new(RandomController::new(seed)) as Box<dyn Controller + Send>));
    }
    let kind: PlannerKind = name.parse().map_err(anyhow::Error::msg)?;
    Ok(Box::new(move |_| kind.controller()))
}

fn fmt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.1}"))
}

fn main() -> anyhow::Result<ExitCode> {
    match Cli::parse().command {
        Command::Run {
            task,
            controller,
            maps,
            seeds,
            seed,
            jobs,
            out,
            traces,
            higher_order,
        } => {
            let mut cfg = EpisodeConfig::for_task(task);
            if higher_order {
                cfg = cfg.higher_order();
            }
            let make = factory(&controller)?;
            let suite = load_maps(&maps, &cfg)?;
            let seeds: Vec<u64> = (seed..seed + seeds).collect();
            let results = run_suite(&suite, &cfg, make.as_ref(), &seeds, jobs, traces);
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            write_episodes_csv(BufWriter::new(File::create(out.join("episodes.csv"))?), &results)?;
            let summary = aggregate(&results);
            write_summary_csv(BufWriter::new(File::create(out.join("summary.csv"))?), &summary)?;
            if traces {
                fs::create_dir_all(out.join("traces"))?;
                for r in &results {
                    let path = out.join("traces").join(format!("{}_{}.csv", r.map, r.seed));
                    write_trace_csv(BufWriter::new(File::create(path)?), r.records.as_deref().unwrap_or_default())?;
                }
            }
            println!("{:<24} {:>5} {:>8} {:>10} {:>10} {:>10}", "map", "done", "T90 [s]", "T99 [s]", "path [m]", "rotations");
            for row in &summary {
                println!(
                    "{:<24} {:>2}/{:<2} {:>8} {:>10} {:>10} {:>10}",
                    row.map,
                    row.reached_goal,
                    row.episodes,
                    fmt(row.t90_mean),
                    fmt(row.t99_mean),
                    fmt(row.path_length_mean),
                    fmt(row.full_rotations_mean)
                );
            }
            let failed = results.iter().filter(|r| !r.metrics.reached_goal).count();
            if failed > 0 {
                eprintln!("{failed} of {} episodes did not reach the coverage goal", results.len());
                return Ok(ExitCode::from(2));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Metrics { trace, goal } => {
            let records = read_trace_csv(File::open(&trace).with_context(|| format!("opening {}", trace.display()))?)?;
            let m = compute_metrics(&records, goal);
            println!("{}", serde_json::to_string_pretty(&m)?);
            Ok(if m.reached_goal { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
    }
}
