//! Command dispatch: builds the validated setup, runs the requested
//! computation with the effective tolerances and assembles the report.

use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use geomorse::{
    boundary_form, default_index_grid, dense_discretization, discrete_index_form, focal_points,
    full_frame_seed, full_jacobi_basis, index_function, minimality_check, normal_partition,
    parallel_frame, symmetric_inertia, FocalPoint, FormInertia, Submanifold, INERTIA_TOL_DEFAULT,
    RANK_TOL_DEFAULT,
};

use crate::config::{self, Overrides, Setup};
use crate::report::{
    CurveSample, FocalEntry, IndexBlock, MinimalityBlock, OracleBlock, Report, TwoEndpointBlock,
    VERSION,
};
use crate::CliError;

/// Mesh ladder for the dense oracle when no explicit mesh is requested.
const MESH_MIN: usize = 32;
const MESH_MAX: usize = 512;
/// Random admissible fields drawn by the minimality probe.
const ORACLE_TRIALS: usize = 50;

#[derive(Debug, Parser)]
#[command(
    name = "geomorse-cli",
    version,
    about = "Geodesic index reports from a JSON config"
)]
pub struct Args {
    /// Path to the JSON config file.
    #[arg(long)]
    pub config: PathBuf,
    /// Computation to run.
    #[arg(long, value_enum)]
    pub command: CommandName,
    /// Override the integration step count from the config.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Fixed dense mesh for oracle_check instead of the stabilizing ladder.
    #[arg(long)]
    pub mesh: Option<usize>,
    /// Override the rank tolerance used in focal detection.
    #[arg(long)]
    pub tol_rank: Option<f64>,
    /// Override the inertia tolerance used when counting eigenvalue signs.
    #[arg(long)]
    pub tol_inertia: Option<f64>,
    /// Write the index curve as CSV to this path (index_curve only).
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Seed for the randomized minimality probe in oracle_check.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum CommandName {
    /// Report focal points with multiplicities.
    Focal,
    /// Variational index against the interior focal count.
    Index,
    /// Split index for a geodesic between two submanifolds.
    TwoEndpoint,
    /// Check the reduction against the dense discretization oracle.
    OracleCheck,
    /// Index of the truncated form as a function of the cut time.
    IndexCurve,
}

impl CommandName {
    pub fn name(self) -> &'static str {
        match self {
            CommandName::Focal => "focal",
            CommandName::Index => "index",
            CommandName::TwoEndpoint => "two_endpoint",
            CommandName::OracleCheck => "oracle_check",
            CommandName::IndexCurve => "index_curve",
        }
    }
}

pub fn execute(args: &Args) -> Result<Report, CliError> {
    if args.csv.is_some() && args.command != CommandName::IndexCurve {
        return Err(CliError::config(
            "--csv only applies to the index_curve command",
        ));
    }
    let config = config::load(&args.config)?;
    let overrides = Overrides {
        steps: args.steps,
        tol_rank: args.tol_rank,
        tol_inertia: args.tol_inertia,
    };
    let setup = config.build(&overrides)?;

    let focal = detect(&setup)?;
    let mut report = Report {
        version: VERSION,
        command: args.command.name(),
        causal_character: setup.geodesic.causal_character().as_str(),
        energy_drift: setup.geodesic.energy_drift(),
        focal_points: focal.iter().map(FocalEntry::from).collect(),
        morse_index: None,
        index_curve: None,
        two_endpoint: None,
        oracle: None,
        matches: true,
    };

    match args.command {
        CommandName::Focal => {}
        CommandName::Index => {
            let morse = index_with_tols(&setup, &focal)?;
            report.matches = morse.matches;
            report.morse_index = Some(morse);
        }
        CommandName::TwoEndpoint => {
            let Some(q) = setup.target_ref() else {
                return Err(CliError::config(
                    "two_endpoint needs a target submanifold in the config",
                ));
            };
            let morse = index_with_tols(&setup, &focal)?;
            let boundary =
                boundary_form(&setup.geodesic, setup.start_ref(), q, setup.tol_inertia)?;
            report.matches = morse.matches;
            report.morse_index = Some(morse);
            report.two_endpoint = Some(TwoEndpointBlock::new(morse.index, &boundary));
        }
        CommandName::OracleCheck => {
            let morse = index_with_tols(&setup, &focal)?;
            let q = setup.target_ref();
            let reference = match q {
                None => morse.index,
                Some(qr) => {
                    let boundary =
                        boundary_form(&setup.geodesic, setup.start_ref(), qr, setup.tol_inertia)?;
                    let block = TwoEndpointBlock::new(morse.index, &boundary);
                    let total = block.total;
                    report.two_endpoint = Some(block);
                    total
                }
            };
            let (dense, mesh, stabilized) = match args.mesh {
                Some(mesh) => {
                    let d = dense_discretization(&setup.geodesic, setup.start_ref(), q, mesh)?
                        .inertia(setup.tol_inertia);
                    (d, mesh, false)
                }
                None => {
                    let (d, mesh) = stabilized_with_tol(&setup, q)?;
                    (d, mesh, true)
                }
            };
            let minimality = if q.is_none() && focal.is_empty() {
                let r = minimality_check(
                    &setup.geodesic,
                    &setup.start,
                    &setup.start_at,
                    ORACLE_TRIALS,
                    args.seed,
                )?;
                Some(MinimalityBlock {
                    trials: r.trials,
                    min_gap: r.min_gap,
                    passed: r.passed,
                })
            } else {
                None
            };
            let matches = morse.matches
                && dense.n_minus == reference
                && minimality.map_or(true, |m| m.passed);
            report.morse_index = Some(morse);
            report.oracle = Some(OracleBlock {
                reference_index: reference,
                mesh,
                stabilized,
                dense: (&dense).into(),
                minimality,
                matches,
            });
            report.matches = matches;
        }
        CommandName::IndexCurve => {
            let grid = default_index_grid(&setup.geodesic, &focal);
            let samples = curve(&setup, &focal, &grid)?;
            report.matches = samples.windows(2).all(|w| w[0].index <= w[1].index);
            if let Some(path) = &args.csv {
                write_csv(path, &samples)?;
            }
            report.index_curve = Some(samples);
        }
    }
    Ok(report)
}

fn detect(setup: &Setup) -> Result<Vec<FocalPoint>, CliError> {
    let basis = full_jacobi_basis(&setup.geodesic, &setup.start, &setup.start_at)?;
    let frame = parallel_frame(&setup.geodesic, &full_frame_seed(&setup.geodesic)?)?;
    Ok(focal_points(
        &setup.geodesic,
        &basis,
        &frame,
        setup.tol_rank,
    )?)
}

fn index_with_tols(setup: &Setup, focal: &[FocalPoint]) -> Result<IndexBlock, CliError> {
    let geo = &setup.geodesic;
    let partition = normal_partition(geo, focal)?;
    let (a, b) = geo.interval();
    let form = discrete_index_form(geo, &setup.start, &setup.start_at, &partition, b)?;
    let index = symmetric_inertia(form.matrix(), setup.tol_inertia).n_minus;
    let focal_sum = focal
        .iter()
        .filter(|f| f.t < b - 1e-9 * (b - a))
        .map(|f| f.multiplicity)
        .sum();
    Ok(IndexBlock {
        index,
        focal_sum,
        matches: index == focal_sum,
    })
}

fn curve(
    setup: &Setup,
    focal: &[FocalPoint],
    grid: &[f64],
) -> Result<Vec<CurveSample>, CliError> {
    let geo = &setup.geodesic;
    if setup.tol_inertia == INERTIA_TOL_DEFAULT && setup.tol_rank == RANK_TOL_DEFAULT {
        let pairs = index_function(geo, &setup.start, &setup.start_at, grid)?;
        return Ok(pairs
            .into_iter()
            .map(|(t, index)| CurveSample { t, index })
            .collect());
    }
    let partition = normal_partition(geo, focal)?;
    let mut ts = grid.to_vec();
    ts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ts.into_iter()
        .map(|t| {
            let form = discrete_index_form(geo, &setup.start, &setup.start_at, &partition, t)?;
            Ok(CurveSample {
                t,
                index: symmetric_inertia(form.matrix(), setup.tol_inertia).n_minus,
            })
        })
        .collect()
}

fn stabilized_with_tol(
    setup: &Setup,
    q: Option<(&Submanifold, &[f64])>,
) -> Result<(FormInertia, usize), CliError> {
    let mut mesh = MESH_MIN;
    let mut previous = dense_discretization(&setup.geodesic, setup.start_ref(), q, mesh)?
        .inertia(setup.tol_inertia);
    while mesh < MESH_MAX {
        mesh *= 2;
        let current = dense_discretization(&setup.geodesic, setup.start_ref(), q, mesh)?
            .inertia(setup.tol_inertia);
        if current.n_minus == previous.n_minus {
            return Ok((current, mesh));
        }
        previous = current;
    }
    Ok((previous, mesh))
}

fn write_csv(path: &Path, samples: &[CurveSample]) -> Result<(), CliError> {
    let mut text = String::from("t,index\n");
    for s in samples {
        text.push_str(&format!("{},{}\n", s.t, s.index));
    }
    std::fs::write(path, text)
        .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))
}
