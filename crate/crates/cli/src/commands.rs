//! The run / grid / curves subcommands.

use std::collections::VecDeque;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use anyhow::{Context, Result};

use contact_rl::trainer::{
    run_experiment_with, Arm, ConfigError, ExperimentConfig, MetricsLogger,
};
use contact_rl::{Difficulty, Task};

use crate::curves::{aggregate, aggregate_csv, collect_runs, render_svg};
use crate::grid::GridConfig;

/// Command-line overrides applied on top of a loaded config.
#[derive(Debug, Clone, Default)]
pub struct RunOverrides {
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub arm: Option<Arm>,
    pub task: Option<Task>,
    pub difficulty: Option<Difficulty>,
}

impl RunOverrides {
    pub fn apply(&self, config: &mut ExperimentConfig) {
        if let Some(task) = self.task {
            if task != config.task {
                config.physics = None;
                config.reward = None;
            }
            config.task = task;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(epochs) = self.epochs {
            config.epochs = epochs;
        }
        if let Some(arm) = self.arm {
            config.arm = arm;
        }
        if let Some(difficulty) = self.difficulty {
            config.difficulty = difficulty;
        }
    }
}

/// Execute one fully-resolved config into `out_base/<run label>/`: config
/// snapshot, metrics.csv, timing.csv, checkpoint.bin, checkpoint.json.
pub fn execute_run(config: &ExperimentConfig, out_base: &Path) -> Result<PathBuf> {
    config.validate()?;
    let out_dir = out_base.join(config.run_label());
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    std::fs::write(
        out_dir.join("config.json"),
        serde_json::to_string_pretty(config)?,
    )?;
    let mut logger = MetricsLogger::create(&out_dir)?;
    let result = run_experiment_with(config, |row| {
        // Logging failures surface at the end of the run, not mid-epoch.
        let _ = logger.log(row);
    })?;
    result.agent.save_checkpoint(
        &out_dir.join("checkpoint.bin"),
        &out_dir.join("checkpoint.json"),
    )?;
    Ok(out_dir)
}

/// `run` subcommand: load, override, execute, report.
pub fn cmd_run(config_path: &Path, overrides: &RunOverrides, out_base: &Path) -> Result<PathBuf> {
    let mut config = ExperimentConfig::from_path(config_path)?;
    overrides.apply(&mut config);
    let out_dir = execute_run(&config, out_base)?;
    println!("run {} finished -> {}", config.run_label(), out_dir.display());
    Ok(out_dir)
}

/// Outcome summary of a grid sweep.
#[derive(Debug, Default)]
pub struct GridSummary {
    pub ran: Vec<String>,
    pub skipped: Vec<String>,
    pub failed: Vec<(String, String)>,
}

/// `grid` subcommand: run every cell of the grid in a bounded worker pool.
/// Cell failures are recorded and the sweep continues.
pub fn cmd_grid(
    grid_path: &Path,
    out_base: &Path,
    jobs: usize,
    skip_existing: bool,
) -> Result<GridSummary> {
    let grid = GridConfig::from_path(grid_path)?;
    let cells = grid.enumerate_cells();
    let queue: Mutex<VecDeque<ExperimentConfig>> = Mutex::new(cells.into());
    let summary = Mutex::new(GridSummary::default());

    let workers = jobs
        .max(1)
        .min(queue.lock().unwrap().len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let Some(cell) = queue.lock().unwrap().pop_front() else {
                    break;
                };
                let label = cell.run_label();
                if skip_existing && out_base.join(&label).join("metrics.csv").exists() {
                    summary.lock().unwrap().skipped.push(label);
                    continue;
                }
                match execute_run(&cell, out_base) {
                    Ok(_) => summary.lock().unwrap().ran.push(label),
                    Err(e) => summary
                        .lock()
                        .unwrap()
                        .failed
                        .push((label, format!("{e:#}"))),
                }
            });
        }
    });

    let mut summary = summary.into_inner().unwrap();
    summary.ran.sort();
    summary.skipped.sort();
    summary.failed.sort();
    println!(
        "grid complete: {} ran, {} skipped, {} failed",
        summary.ran.len(),
        summary.skipped.len(),
        summary.failed.len()
    );
    for (label, error) in &summary.failed {
        println!("  FAILED {label}: {error}");
    }
    Ok(summary)
}

/// `curves` subcommand: aggregate matching metrics CSVs into `<stem>.csv`
/// and `<stem>.svg`.
pub fn cmd_curves(results_glob: &str, out: &Path) -> Result<(PathBuf, PathBuf)> {
    let runs = collect_runs(results_glob)?;
    let points = aggregate(&runs);

    let stem = if out.extension().is_some() {
        out.with_extension("")
    } else {
        out.to_path_buf()
    };
    if let Some(parent) = stem.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let csv_path = stem.with_extension("csv");
    let svg_path = stem.with_extension("svg");
    std::fs::write(&csv_path, aggregate_csv(&points))?;
    let title = format!("eval success over epochs ({} runs)", runs.len());
    std::fs::write(&svg_path, render_svg(&points, &title))?;
    println!(
        "curves: {} runs -> {} and {}",
        runs.len(),
        csv_path.display(),
        svg_path.display()
    );
    Ok((csv_path, svg_path))
}

/// Exit code mapping: missing config 2, anything else 1.
pub fn exit_code_for(err: &anyhow::Error) -> i32 {
    if let Some(ConfigError::NotFound(_)) = err.downcast_ref::<ConfigError>() {
        return 2;
    }
    1
}
