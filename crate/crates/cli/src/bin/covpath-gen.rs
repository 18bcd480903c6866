//! Writes random evaluation maps and a JSON-lines manifest.

use std::fs;
use std::path::PathBuf;

use anyhow::Context;
use clap::Parser;
use covpath::episode::Task;
use covpath::mapgen::{generate_map_seeded, MapGenParams};
use covpath::worldmodel::save_map;
use serde_json::json;

#[derive(Parser)]
#[command(version, about = "Generate random coverage maps")]
struct Args {
    #[arg(long, default_value = "mowing")]
    task: Task,
    /// Seed of the first map; map i uses seed + i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    count: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

fn main() -> anyhow::Result<()> {
    let args = Args::parse();
    fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display()))?;
    let params = MapGenParams::for_task(args.task);
    let mut manifest = String::new();
    for i in 0..args.count {
        let seed = args.seed + i;
        let generated = generate_map_seeded(seed, &params);
        let file = format!("{}-{i:04}.map", args.task);
        fs::write(args.out_dir.join(&file), save_map(&generated.map)).with_context(|| format!("writing {file}"))?;
        let line = json!({
            "file": file,
            "seed": seed,
            "side": generated.side,
            "has_floorplan": generated.floorplan.is_some(),
            "n_obstacles": generated.obstacles.len(),
        });
        manifest.push_str(&line.to_string());
        manifest.push('\n');
    }
    fs::write(args.out_dir.join("manifest.jsonl"), manifest).context("writing manifest")?;
    println!("wrote {} maps to {}", args.count, args.out_dir.display());
    Ok(())
}
