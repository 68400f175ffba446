//! Grid sweeps: a base config crossed with lists of tasks, difficulties,
//! arms and seeds, one output directory per cell.

use std::path::Path;

use serde::{Deserialize, Serialize};

use contact_rl::trainer::{Arm, ConfigError, ExperimentConfig};
use contact_rl::{Difficulty, Task};

/// Grid description: every listed axis replaces the base config's value,
/// producing the cartesian product of cells. Omitted axes fall back to the
/// base config's single value.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct GridConfig {
    pub base: ExperimentConfig,
    pub tasks: Option<Vec<Task>>,
    pub difficulties: Option<Vec<Difficulty>>,
    pub arms: Option<Vec<Arm>>,
    pub seeds: Option<Vec<u64>>,
}

impl GridConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|_| ConfigError::NotFound(path.display().to_string()))?;
        let grid: GridConfig = match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => toml::from_str(&text)
                .map_err(|e| ConfigError::Parse(format!("{}: {e}", path.display())))?,
            _ => serde_json::from_str(&text)
                .or_else(|_| toml::from_str(&text))
                .map_err(|e: toml::de::Error| {
                    ConfigError::Parse(format!("{}: {e}", path.display()))
                })?,
        };
        Ok(grid)
    }

    /// Expand into one config per cell, ordered task-major then difficulty,
    /// arm, seed.
    pub fn enumerate_cells(&self) -> Vec<ExperimentConfig> {
        let tasks = self
            .tasks
            .clone()
            .unwrap_or_else(|| vec![self.base.task]);
        let difficulties = self
            .difficulties
            .clone()
            .unwrap_or_else(|| vec![self.base.difficulty]);
        let arms = self.arms.clone().unwrap_or_else(|| vec![self.base.arm]);
        let seeds = self.seeds.clone().unwrap_or_else(|| vec![self.base.seed]);

        let mut cells = Vec::with_capacity(tasks.len() * difficulties.len() * arms.len() * seeds.len());
        for &task in &tasks {
            for &difficulty in &difficulties {
                for &arm in &arms {
                    for &seed in &seeds {
                        let mut cell = self.base.clone();
                        cell.task = task;
                        cell.difficulty = difficulty;
                        cell.arm = arm;
                        cell.seed = seed;
                        if task != self.base.task {
                            // Task-specific sections from the base no longer
                            // apply; fall back to the task's own defaults.
                            cell.physics = None;
                            cell.reward = None;
                        }
                        cells.push(cell);
                    }
                }
            }
        }
        cells
    }
}
