use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use wavefactor::datagen::{gen_line, gen_string, subsample_rows};
use wavefactor::laplacian::SpatialOperator;
use wavefactor::metrics::{
    align_modes, envelope_flatness, mean_entropy, partition_energy, svt_oracle, ModeAlignment,
    Partition,
};
use wavefactor::objective::{FactorModel, WaveField};
use wavefactor::solver::{complete, fit, SolveStatus, SolveTrace, SolverConfig};

use crate::config::{uniform_rows, GeneratorSpec, OperatorSpec, PartitionSpec, RunConfig, Task};
use crate::error::{CliError, CliResult};
use crate::io::{load_matrix, store_json, store_matrix};
use crate::plot::{indexed, line_chart, Series};

pub fn execute(cfg: &RunConfig) -> CliResult<()> {
    fs::create_dir_all(&cfg.out).map_err(|e| CliError::io(&cfg.out, e))?;
    match &cfg.task {
        Task::Generate { generator } => generate(cfg, generator)?,
        Task::Factorize {
            input,
            mask,
            operator,
            solver,
        } => solve(cfg, input, mask.as_deref(), operator, solver, false)?,
        Task::Complete {
            input,
            mask,
            operator,
            solver,
        } => solve(cfg, input, Some(mask), operator, solver, true)?,
        Task::Evaluate {
            run,
            truth,
            partition,
        } => evaluate(cfg, run, truth.as_deref(), partition.as_ref())?,
    }
    store_json(cfg, &cfg.out.join(format!("{}.json", cfg.task.name())))
}

fn generate(cfg: &RunConfig, generator: &GeneratorSpec) -> CliResult<()> {
    let out = &cfg.out;
    let field = match generator {
        GeneratorSpec::String { spec } => {
            let (field, truth) = gen_string(spec)?;
            store_matrix(&truth, &out.join("D_true.csv"), cfg.header)?;
            field
        }
        GeneratorSpec::Line {
            spec,
            observed_rows,
        } => {
            let field = gen_line(spec)?;
            if let Some(count) = observed_rows {
                let rows = uniform_rows(spec.grid.space, *count);
                let masked = subsample_rows(&field, &rows)?;
                store_matrix(
                    masked.mask().expect("mask set"),
                    &out.join("mask.csv"),
                    cfg.header,
                )?;
            }
            field
        }
    };
    store_matrix(field.y(), &out.join("Y.csv"), cfg.header)?;
    if cfg.plots {
        let t = field.time_len();
        let snapshots: Vec<Series> = [t / 8, t / 4, t / 2]
            .iter()
            .map(|&j| Series {
                name: format!("t{j}"),
                points: indexed(field.y().column(j).as_slice()),
            })
            .collect();
        line_chart(
            out,
            "snapshots",
            "Field snapshots",
            "spatial index",
            &snapshots,
        )?;
    }
    println!(
        "generated {}x{} field in {}",
        field.space_len(),
        field.time_len(),
        out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct LowRankCheck {
    relative_error: f64,
}

#[derive(Serialize)]
struct TraceFile<'a> {
    schema: u32,
    timestamp: u64,
    command: &'static str,
    status: SolveStatus,
    certified: bool,
    final_polar: f64,
    rank: usize,
    objective_history: &'a [f64],
    polar_history: &'a [f64],
    rank_history: &'a [usize],
    epochs_history: &'a [usize],
    k: &'a [f64],
    /// Present for unmasked γ = 0 runs: distance to the singular-value-thresholding solution.
    svt_check: Option<LowRankCheck>,
}

fn solve(
    cfg: &RunConfig,
    input: &Path,
    mask: Option<&Path>,
    operator: &OperatorSpec,
    solver: &SolverConfig,
    require_mask: bool,
) -> CliResult<()> {
    let y = load_matrix(input, cfg.header)?;
    let mask = mask.map(|m| load_matrix(m, cfg.header)).transpose()?;
    if require_mask && mask.is_none() {
        return Err(CliError::Usage("complete needs --mask".into()));
    }
    let field = match mask {
        Some(m) => WaveField::with_mask(y, m, operator.dl, operator.dt)?,
        None => WaveField::new(y, operator.dl, operator.dt)?,
    };
    let op = SpatialOperator::build(field.space_len(), operator.dl, operator.bc)?;
    let (model, trace) = if require_mask {
        complete(&field, &op, solver)?
    } else {
        fit(&field, &op, solver)?
    };

    let out = &cfg.out;
    store_matrix(&model.d, &out.join("D.csv"), cfg.header)?;
    store_matrix(&model.x, &out.join("X.csv"), cfg.header)?;
    let k = DMatrix::from_column_slice(model.rank(), 1, model.k.as_slice());
    store_matrix(&k, &out.join("k.csv"), cfg.header)?;

    let svt_check = (solver.gamma == 0.0 && field.mask().is_none()).then(|| {
        let oracle = svt_oracle(field.y(), solver.lambda);
        let scale = oracle.norm().max(f64::MIN_POSITIVE);
        LowRankCheck {
            relative_error: (model.product() - oracle).norm() / scale,
        }
    });
    let certified = trace.status == SolveStatus::CertifiedGlobal;
    let file = TraceFile {
        schema: 1,
        timestamp: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        command: cfg.task.name(),
        status: trace.status,
        certified,
        final_polar: trace.final_polar,
        rank: model.rank(),
        objective_history: &trace.objective_history,
        polar_history: &trace.polar_history,
        rank_history: &trace.rank_history,
        epochs_history: &trace.epochs_history,
        k: model.k.as_slice(),
        svt_check,
    };
    store_json(&file, &out.join("trace.json"))?;
    if cfg.plots {
        plot_run(out, &model, &trace)?;
    }
    println!(
        "{}: rank {}, final polar {:.6}, {}",
        cfg.task.name(),
        model.rank(),
        trace.final_polar,
        if certified {
            "certified global optimum"
        } else {
            "not certified (iteration limit)"
        }
    );
    Ok(())
}

fn plot_run(out: &Path, model: &FactorModel, trace: &SolveTrace) -> CliResult<()> {
    line_chart(
        out,
        "objective",
        "Objective value",
        "descent epoch / append",
        &[Series {
            name: "objective".into(),
            points: indexed(&trace.objective_history),
        }],
    )?;
    line_chart(
        out,
        "polar",
        "Polar value per outer iteration",
        "outer iteration",
        &[Series {
            name: "polar".into(),
            points: indexed(&trace.polar_history),
        }],
    )?;
    let energies = model.column_energies();
    let top = wavefactor::metrics::top_columns(&energies, 4);
    let modes: Vec<Series> = top
        .iter()
        .map(|&j| Series {
            name: format!("D{j}"),
            points: indexed(model.d.column(j).as_slice()),
        })
        .collect();
    line_chart(
        out,
        "modes",
        "Highest-energy columns of D",
        "spatial index",
        &modes,
    )
}

#[derive(Serialize)]
struct PartitionReport {
    cuts: Vec<usize>,
    columns: Vec<usize>,
    fractions: Vec<Vec<f64>>,
    mean_entropy: Option<f64>,
}

#[derive(Serialize)]
struct Report {
    schema: u32,
    rank: usize,
    column_energies: Vec<f64>,
    envelope_flatness: Vec<f64>,
    modes: Option<ModeAlignment>,
    partition: Option<PartitionReport>,
}

fn evaluate(
    cfg: &RunConfig,
    run: &Path,
    truth: Option<&Path>,
    partition: Option<&PartitionSpec>,
) -> CliResult<()> {
    let d = load_matrix(&run.join("D.csv"), cfg.header)?;
    let x = load_matrix(&run.join("X.csv"), cfg.header)?;
    if d.ncols() != x.ncols() {
        return Err(CliError::data(
            run,
            format!("D has {} columns but X has {}", d.ncols(), x.ncols()),
        ));
    }
    let energies: Vec<f64> = (0..d.ncols())
        .map(|j| d.column(j).norm_squared() * x.column(j).norm_squared())
        .collect();
    let flatness = d
        .column_iter()
        .map(|c| envelope_flatness(&DVector::from_column_slice(c.as_slice())))
        .collect();

    let modes = truth
        .map(|path| -> CliResult<ModeAlignment> {
            let t = load_matrix(path, cfg.header)?;
            Ok(align_modes(&d, &t)?)
        })
        .transpose()?;

    let partition = partition
        .map(|p| -> CliResult<PartitionReport> {
            let regions = Partition::from_cuts(d.nrows(), &p.cuts)?;
            let top = p.top.min(d.ncols());
            let fractions = partition_energy(&d, &regions, top, &energies)?;
            let mean_entropy = if regions.num_regions() == 2 {
                Some(mean_entropy(&fractions)?)
            } else {
                None
            };
            Ok(PartitionReport {
                cuts: p.cuts.clone(),
                columns: wavefactor::metrics::top_columns(&energies, top),
                fractions: fractions
                    .row_iter()
                    .map(|r| r.iter().copied().collect())
                    .collect(),
                mean_entropy,
            })
        })
        .transpose()?;

    if cfg.plots {
        if let Some(p) = &partition {
            let series: Vec<Series> = (0..p.cuts.len() + 1)
                .map(|r| Series {
                    name: format!("region{r}"),
                    points: p
                        .fractions
                        .iter()
                        .enumerate()
                        .map(|(i, f)| (i as f64, f[r]))
                        .collect(),
                })
                .collect();
            line_chart(
                &cfg.out,
                "energies",
                "Partitioned energy of top columns",
                "column rank",
                &series,
            )?;
        }
    }

    if let Some(m) = &modes {
        println!(
            "mode error: {:.4} squared Frobenius ({:.2}%)",
            m.squared_frobenius, m.percent
        );
    }
    if let Some(h) = partition.as_ref().and_then(|p| p.mean_entropy) {
        println!("mean partition entropy: {h:.4}");
    }
    let report = Report {
        schema: 1,
        rank: d.ncols(),
        column_energies: energies,
        envelope_flatness: flatness,
        modes,
        partition,
    };
    store_json(&report, &cfg.out.join("report.json"))
}
