//! Pipeline command line: `simulate`, `map`, `localize`, `eval`.
//!
//! Artifacts live in the `--out` directory under fixed names:
//! `config.cfg`, `scene.txt`, `driveN.csv`, `map.txt`,
//! `estimate_<pol>.csv`, `associations_<pol>.log`, `metrics.csv`,
//! `ccdf_<component>_<pol>.csv`.

use clap::{Parser, Subcommand};
use polaris::config::{PolSelection, RunConfig};
use polaris::map_construction::{load_map, save_map};
use polaris::pipeline::{
    self, candidates_to_string, estimates_from_csv, estimates_to_csv, gt_as_timed_poses,
    metrics_csv, run_eval, run_localization, run_mapping, scene_from_str, scene_to_string,
    simulate_drives, trajectory_from_csv, trajectory_to_csv, Drive,
};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "polaris", about = "Radar-only polarimetric landmark localization pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Configuration file (flat `key = value`); defaults apply if absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Artifact directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the polarization configuration.
    #[arg(long)]
    pol: Option<String>,
    /// Dump intermediate artifacts (candidates, detections, grids).
    #[arg(long)]
    dump: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the scene and ground-truth drives.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Build the landmark map from all drives except the leave-one-out.
    Map {
        #[command(flatten)]
        common: Common,
    },
    /// Localize the leave-one-out drive against the map.
    Localize {
        #[command(flatten)]
        common: Common,
    },
    /// Compute metrics and CCDFs for existing estimates.
    Eval {
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { common } => cmd_simulate(&common),
        Command::Map { common } => cmd_map(&common),
        Command::Localize { common } => cmd_localize(&common),
        Command::Eval { common } => cmd_eval(&common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn load_config(common: &Common) -> Result<RunConfig, String> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path).map_err(|e| e.to_string())?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(pol) = &common.pol {
        cfg.pol = PolSelection::parse(pol)?;
    }
    Ok(cfg)
}

fn write(path: &Path, content: &str) -> Result<(), String> {
    std::fs::write(path, content).map_err(|e| format!("writing {}: {e}", path.display()))
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("reading {}: {e}", path.display()))
}

fn cmd_simulate(common: &Common) -> Result<(), String> {
    let cfg = load_config(common)?;
    std::fs::create_dir_all(&common.out).map_err(|e| e.to_string())?;
    let (scene, drives) = simulate_drives(&cfg);
    write(&common.out.join("config.cfg"), &cfg.to_text())?;
    write(
        &common.out.join("scene.txt"),
        &scene_to_string(&scene, cfg.scene.sample_spacing, cfg.scene.detection_spacing),
    )?;
    for d in &drives {
        write(
            &common.out.join(format!("{}.csv", d.name)),
            &trajectory_to_csv(&d.trajectory),
        )?;
    }
    println!(
        "simulated {} scatterers, {} drives x {} frames -> {}",
        scene.scatterers.len(),
        drives.len(),
        drives.first().map(|d| d.trajectory.len()).unwrap_or(0),
        common.out.display()
    );
    Ok(())
}

fn load_drives(out: &Path, cfg: &RunConfig) -> Result<Vec<Drive>, String> {
    (0..cfg.drives)
        .map(|i| {
            let name = format!("drive{i}");
            let text = read(&out.join(format!("{name}.csv")))?;
            let trajectory = trajectory_from_csv(&text).map_err(|e| e.to_string())?;
            Ok(Drive {
                name,
                trajectory,
                noise_seed: cfg.seed.wrapping_mul(1_000_003).wrapping_add(i as u64 * 7919),
            })
        })
        .collect()
}

fn cmd_map(common: &Common) -> Result<(), String> {
    let cfg = load_config(common)?;
    let scene = scene_from_str(&read(&common.out.join("scene.txt"))?).map_err(|e| e.to_string())?;
    let drives = load_drives(&common.out, &cfg)?;
    let mapping_drives: Vec<Drive> = drives
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != cfg.loo_drive)
        .map(|(_, d)| d.clone())
        .collect();
    let mapping = run_mapping(&cfg, &scene, &mapping_drives).map_err(|e| e.to_string())?;
    save_map(&mapping.map, &common.out.join("map.txt")).map_err(|e| e.to_string())?;
    if common.dump {
        for (d, cands) in mapping_drives.iter().zip(&mapping.per_drive) {
            write(
                &common.out.join(format!("candidates_{}.txt", d.name)),
                &candidates_to_string(cands),
            )?;
        }
    }
    println!(
        "map: {} point landmarks, {} line landmarks from {} drives (leave-one-out: drive{})",
        mapping.map.points.len(),
        mapping.map.lines.len(),
        mapping_drives.len(),
        cfg.loo_drive
    );
    Ok(())
}

fn cmd_localize(common: &Common) -> Result<(), String> {
    let cfg = load_config(common)?;
    let scene = scene_from_str(&read(&common.out.join("scene.txt"))?).map_err(|e| e.to_string())?;
    let map = load_map(&common.out.join("map.txt")).map_err(|e| e.to_string())?;
    let drives = load_drives(&common.out, &cfg)?;
    let drive = drives
        .get(cfg.loo_drive)
        .ok_or_else(|| format!("leave-one-out drive {} not available", cfg.loo_drive))?;
    let result = run_localization(&cfg, &map, &scene, drive, common.dump);
    let pol = cfg.pol.name();
    write(
        &common.out.join(format!("estimate_{pol}.csv")),
        &estimates_to_csv(&result.estimates),
    )?;
    write(
        &common.out.join(format!("associations_{pol}.log")),
        &result.association_log,
    )?;
    if common.dump {
        write(
            &common.out.join(format!("detections_{pol}.csv")),
            &result.detection_log,
        )?;
    }
    let n = result.estimates.len();
    let conv = result.estimates.iter().filter(|e| e.converged).count();
    println!("localized {} frames ({} converged) as {}", n, conv, pol);
    Ok(())
}

fn cmd_eval(common: &Common) -> Result<(), String> {
    let cfg = load_config(common)?;
    let gt_text = read(&common.out.join(format!("drive{}.csv", cfg.loo_drive)))?;
    let gt = gt_as_timed_poses(&trajectory_from_csv(&gt_text).map_err(|e| e.to_string())?);
    let mut rows = Vec::new();
    for pol in [
        "full",
        "dual-LL.RR",
        "dual-HH.VV",
        "single-LR",
        "single-RR",
        "single-HH",
    ] {
        let path = common.out.join(format!("estimate_{pol}.csv"));
        if !path.exists() {
            continue;
        }
        let estimates = estimates_from_csv(&read(&path)?).map_err(|e| e.to_string())?;
        let row = run_eval("synthetic", &format!("drive{}", cfg.loo_drive), pol, &estimates, &gt, cfg.radar.update_rate);
        if row.metrics.is_none() && row.samples.is_empty() {
            eprintln!("warning: {pol}: no alignable samples, run skipped");
            continue;
        }
        for (component, values) in [
            ("long", row.samples.iter().map(|s| s.eps_long).collect::<Vec<_>>()),
            ("lat", row.samples.iter().map(|s| s.eps_lat).collect::<Vec<_>>()),
            ("rot", row.samples.iter().map(|s| s.eps_rot).collect::<Vec<_>>()),
        ] {
            write(
                &common.out.join(format!("ccdf_{component}_{pol}.csv")),
                &pipeline::ccdf_csv(&values),
            )?;
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err("no estimate files found; run `polaris localize` first".into());
    }
    write(&common.out.join("metrics.csv"), &metrics_csv(&rows))?;
    println!("{}", metrics_csv(&rows).trim_end());
    Ok(())
}
