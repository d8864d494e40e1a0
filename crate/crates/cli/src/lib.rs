//! Command-line front end: dataset generation, factorization, completion and
//! evaluation, with CSV/JSON outputs.

mod args;
mod commands;
pub mod config;
pub mod error;
pub mod io;
mod plot;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::Parser;
use wavefactor::datagen::{Grid, LineSpec, StringSpec};
use wavefactor::polar::LineSearch;
use wavefactor::solver::SolverConfig;

use args::{Cli, Command, Damping, EvaluateArgs, GenerateKind, OutputArgs, SolveArgs};
use config::{GeneratorSpec, OperatorSpec, PartitionSpec, RunConfig, Task};
pub use error::{CliError, CliResult};

pub const THREADS_ENV: &str = "WAVEFACTOR_THREADS";

/// Parse `argv` (including the program name), execute, and return the exit code.
pub fn run<I, T>(argv: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp
                | ErrorKind::DisplayVersion
                | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => 0,
                _ => 1,
            };
        }
    };
    match configure_threads()
        .and_then(|_| to_config(cli))
        .and_then(|cfg| commands::execute(&cfg))
    {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Run a fully specified configuration.
pub fn execute(cfg: &RunConfig) -> CliResult<()> {
    commands::execute(cfg)
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Usage(format!(
            "{THREADS_ENV} must be a positive integer, got {raw:?}"
        ))
    })?;
    // A second call in the same process keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global();
    Ok(())
}

fn to_config(cli: Cli) -> CliResult<RunConfig> {
    match cli.command {
        Command::Generate { kind } => generate_config(kind),
        Command::Factorize(a) => solve_config(a, false),
        Command::Complete(a) => solve_config(a, true),
        Command::Evaluate(a) => Ok(evaluate_config(a)),
        Command::Replay { config } => {
            let text = std::fs::read_to_string(&config).map_err(|e| CliError::io(&config, e))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("{}: {e}", config.display())))
        }
    }
}

fn with_output(task: Task, output: OutputArgs) -> RunConfig {
    RunConfig {
        task,
        out: output.out,
        plots: output.plots,
        header: output.header,
    }
}

fn generate_config(kind: GenerateKind) -> CliResult<RunConfig> {
    Ok(match kind {
        GenerateKind::String {
            modes,
            space,
            time,
            amplitude,
            damping,
            noise_var,
            seed,
            output,
        } => {
            let mut spec = StringSpec::fixed(modes, space, time).with_noise(noise_var, seed);
            spec.amplitudes = vec![amplitude; modes];
            spec = match damping {
                Damping::None => spec,
                Damping::Time => spec.with_time_damping(),
                Damping::Space => spec.with_space_damping(),
            };
            with_output(
                Task::Generate {
                    generator: GeneratorSpec::String { spec },
                },
                output,
            )
        }
        GenerateKind::Line {
            space,
            time,
            boundaries,
            ratios,
            speed,
            frequency,
            bandwidth,
            loss,
            dl,
            dt,
            record_every,
            noise_var,
            seed,
            observe,
            output,
        } => {
            if space == 0 {
                return Err(CliError::Usage("--space must be positive".into()));
            }
            let dl = dl.unwrap_or(1.0 / space as f64);
            let max_speed = ratios.iter().map(|r| speed / r).fold(0.0, f64::max);
            let spec = LineSpec {
                segment_boundaries: boundaries,
                wavenumber_ratios: ratios,
                base_speed: speed,
                center_frequency: frequency,
                bandwidth,
                boundary_loss: loss,
                grid: Grid {
                    space,
                    time,
                    dl,
                    dt: dt.unwrap_or(0.8 * dl / max_speed),
                },
                record_every,
                noise_var,
                seed,
            };
            if observe.is_some_and(|n| n == 0 || n > space) {
                return Err(CliError::Usage(format!(
                    "--observe must lie in 1..={space}"
                )));
            }
            with_output(
                Task::Generate {
                    generator: GeneratorSpec::Line {
                        spec,
                        observed_rows: observe,
                    },
                },
                output,
            )
        }
    })
}

fn solve_config(a: SolveArgs, masked: bool) -> CliResult<RunConfig> {
    let solver = SolverConfig {
        polar_tol: a.polar_tol,
        seed: a.seed,
        max_outer_iters: a.max_outer,
        bcd_max_epochs: a.max_epochs,
        line_search: match a.lipo {
            Some(budget) => LineSearch::Lipo {
                budget,
                seed: a.seed,
            },
            None => LineSearch::Grid,
        },
        ..SolverConfig::new(a.gamma, a.lambda)
    };
    solver
        .validate()
        .map_err(|e| CliError::Usage(format!("invalid solver flags: {e}")))?;
    let operator = OperatorSpec {
        bc: a.bc,
        dl: a.dl,
        dt: a.dt,
    };
    let task = if masked {
        let mask: PathBuf = a
            .mask
            .ok_or_else(|| CliError::Usage("complete requires --mask <path>".into()))?;
        Task::Complete {
            input: a.input,
            mask,
            operator,
            solver,
        }
    } else {
        Task::Factorize {
            input: a.input,
            mask: a.mask,
            operator,
            solver,
        }
    };
    Ok(with_output(task, a.output))
}

fn evaluate_config(a: EvaluateArgs) -> RunConfig {
    let partition = (!a.cuts.is_empty()).then_some(PartitionSpec {
        cuts: a.cuts,
        top: a.top,
    });
    RunConfig {
        out: a.out.unwrap_or_else(|| a.run.clone()),
        task: Task::Evaluate {
            run: a.run,
            truth: a.truth,
            partition,
        },
        plots: a.plots,
        header: a.header,
    }
}
