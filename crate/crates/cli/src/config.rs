//! Serializable description of one invocation; written beside the outputs as
//! `<command>.json` and accepted back by `wavefactor replay`.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use wavefactor::datagen::{LineSpec, StringSpec};
use wavefactor::laplacian::BoundaryCondition;
use wavefactor::solver::SolverConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub task: Task,
    pub out: PathBuf,
    #[serde(default)]
    pub plots: bool,
    #[serde(default)]
    pub header: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Task {
    Generate {
        generator: GeneratorSpec,
    },
    Factorize {
        input: PathBuf,
        mask: Option<PathBuf>,
        operator: OperatorSpec,
        solver: SolverConfig,
    },
    Complete {
        input: PathBuf,
        mask: PathBuf,
        operator: OperatorSpec,
        solver: SolverConfig,
    },
    Evaluate {
        run: PathBuf,
        truth: Option<PathBuf>,
        partition: Option<PartitionSpec>,
    },
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Generate { .. } => "generate",
            Task::Factorize { .. } => "factorize",
            Task::Complete { .. } => "complete",
            Task::Evaluate { .. } => "evaluate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GeneratorSpec {
    String {
        spec: StringSpec,
    },
    Line {
        spec: LineSpec,
        /// Number of uniformly spaced rows to keep observed; writes mask.csv.
        observed_rows: Option<usize>,
    },
}

/// Spatial operator and sample spacing used to interpret `Y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub bc: BoundaryCondition,
    pub dl: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    /// Interior cut indices; regions are `[0, c0)`, `[c0, c1)`, ...
    pub cuts: Vec<usize>,
    pub top: usize,
}

/// Rows observed when sampling `count` of `space` rows uniformly, each at
/// the centre of its stretch.
pub fn uniform_rows(space: usize, count: usize) -> Vec<usize> {
    (0..count)
        .map(|i| ((2 * i + 1) * space) / (2 * count))
        .collect()
}
