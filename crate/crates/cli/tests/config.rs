use std::path::PathBuf;

use wavefactor::datagen::{LineSpec, StringSpec};
use wavefactor::laplacian::BoundaryCondition;
use wavefactor::polar::LineSearch;
use wavefactor::solver::SolverConfig;
use wavefactor_cli::config::{
    uniform_rows, GeneratorSpec, OperatorSpec, PartitionSpec, RunConfig, Task,
};

fn round_trip(cfg: &RunConfig) {
    let text = serde_json::to_string(cfg).unwrap();
    let back: RunConfig = serde_json::from_str(&text).unwrap();
    assert_eq!(&back, cfg);
}

#[test]
fn every_task_round_trips() {
    let operator = OperatorSpec {
        bc: BoundaryCondition::DirichletNeumann,
        dl: 0.1,
        dt: 1.0 / 3.0,
    };
    let solver = SolverConfig {
        line_search: LineSearch::Lipo {
            budget: 300,
            seed: 9,
        },
        ..SolverConfig::new(1e5, 28.284271247461902)
    };
    let tasks = vec![
        Task::Generate {
            generator: GeneratorSpec::String {
                spec: StringSpec::fixed(4, 30, 40)
                    .with_time_damping()
                    .with_noise(0.1, 3),
            },
        },
        Task::Generate {
            generator: GeneratorSpec::Line {
                spec: LineSpec::two_segment(100, 50),
                observed_rows: Some(10),
            },
        },
        Task::Factorize {
            input: "Y.csv".into(),
            mask: None,
            operator,
            solver,
        },
        Task::Complete {
            input: "Y.csv".into(),
            mask: "mask.csv".into(),
            operator,
            solver,
        },
        Task::Evaluate {
            run: "run".into(),
            truth: Some("D_true.csv".into()),
            partition: Some(PartitionSpec {
                cuts: vec![40, 50],
                top: 10,
            }),
        },
    ];
    for task in tasks {
        round_trip(&RunConfig {
            task,
            out: PathBuf::from("out"),
            plots: true,
            header: false,
        });
    }
}

#[test]
fn uniform_rows_are_centred() {
    assert_eq!(
        uniform_rows(100, 10),
        vec![5, 15, 25, 35, 45, 55, 65, 75, 85, 95]
    );
    assert_eq!(uniform_rows(7, 7), (0..7).collect::<Vec<_>>());
    assert_eq!(uniform_rows(100, 1), vec![50]);
}
