//! Command-line driver: argument parsing, run configuration echo and the
//! on-disk artifacts (`run.json`, `history.csv`, per-iteration dumps).

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use hho_core::adapt::{
    fit_dof_slope, run_loop, uniform_study, write_history_csv, AdaptConfig, Iteration, RefinementMode, RunRecord,
    Series,
};
use hho_core::estimator::BoundChoice;
use hho_core::global_system::assemble;
use hho_core::hho_local::{HhoConfig, Variant};
use hho_core::mesh::Mesh2D;
use hho_core::problems::{assumption1_study, case_by_name, ManufacturedCase, STUDY_LEVELS};
use hho_core::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "hho", version, about = "Adaptive HHO solver for the clamped biharmonic problem")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Single solve, or a uniform h-halving study with `--uniform N`.
    Solve(RunArgs),
    /// Solve-estimate-mark-refine loop with Dörfler marking.
    Adapt(RunArgs),
    /// Same loop as `adapt` but every cell is marked.
    UniformStudy(RunArgs),
    /// Boundary interpolation error of |x|^alpha against the degree.
    Assumption1(RunArgs),
    /// Writes the condensed system in MatrixMarket format.
    DumpSystem(RunArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Solve,
    Adapt,
    UniformStudy,
    Assumption1,
    DumpSystem,
}

#[derive(clap::Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunArgs {
    #[arg(long, default_value = "lshape")]
    pub problem: String,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long, default_value = "standard", value_parser = parse_variant)]
    pub variant: Variant,
    #[arg(long, default_value_t = 0.3)]
    pub theta: f64,
    #[arg(long, default_value = "B", value_parser = parse_bound)]
    pub bound: BoundChoice,
    /// Number of solves in the loop.
    #[arg(long, default_value_t = 25)]
    pub max_iter: usize,
    /// The loop stops once a solve reaches this many unknowns.
    #[arg(long, default_value_t = 200_000)]
    pub dof_budget: usize,
    /// Uniform h-halving levels after the initial mesh.
    #[arg(long, default_value_t = 0)]
    pub uniform: usize,
    /// Subdivisions of the structured initial mesh (problem default if unset).
    #[arg(long)]
    pub n0: Option<usize>,
    #[arg(long, default_value_t = 1.01)]
    pub alpha: f64,
    #[arg(long, default_value_t = 14)]
    pub kmax: usize,
    /// Graded quadrature levels toward the singularity.
    #[arg(long, default_value_t = STUDY_LEVELS)]
    pub levels: usize,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[arg(long)]
    pub dump_indicators: bool,
    #[arg(long)]
    pub dump_mesh: bool,
    #[arg(long)]
    pub dump_system: bool,
    /// Record wall time per solve (makes outputs non-reproducible).
    #[arg(long)]
    pub timing: bool,
}

fn parse_variant(s: &str) -> std::result::Result<Variant, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_bound(s: &str) -> std::result::Result<BoundChoice, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Parsed invocation, echoed into `run.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: CommandKind,
    #[serde(flatten)]
    pub args: RunArgs,
}

impl From<Cli> for RunConfig {
    fn from(cli: Cli) -> Self {
        let (command, args) = match cli.command {
            Command::Solve(a) => (CommandKind::Solve, a),
            Command::Adapt(a) => (CommandKind::Adapt, a),
            Command::UniformStudy(a) => (CommandKind::UniformStudy, a),
            Command::Assumption1(a) => (CommandKind::Assumption1, a),
            Command::DumpSystem(a) => (CommandKind::DumpSystem, a),
        };
        RunConfig { command, args }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub records: usize,
    pub final_ncells: Option<usize>,
    pub final_dofs: Option<usize>,
    pub final_energy_error: Option<f64>,
    pub final_bound_b: Option<f64>,
    pub final_effectivity: Option<f64>,
    pub energy_error_slope: Option<f64>,
    pub bound_b_slope: Option<f64>,
    pub study_slope: Option<f64>,
}

impl Summary {
    fn from_records(records: &[RunRecord]) -> Self {
        let last = records.last();
        Summary {
            records: records.len(),
            final_ncells: last.map(|r| r.ncells),
            final_dofs: last.map(|r| r.dofs),
            final_energy_error: last.and_then(|r| r.energy_error),
            final_bound_b: last.map(|r| r.bound_b),
            final_effectivity: last.and_then(|r| r.effectivity),
            energy_error_slope: fit_dof_slope(records, Series::EnergyError),
            bound_b_slope: fit_dof_slope(records, Series::BoundB),
            study_slope: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub summary: Summary,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let a = &self.args;
        if a.threads == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        if !(a.theta > 0.0 && a.theta <= 1.0) {
            return Err(Error::Config(format!("theta must lie in (0, 1], got {}", a.theta)));
        }
        if a.n0 == Some(0) {
            return Err(Error::Config("--n0 must be at least 1".into()));
        }
        if a.levels == 0 {
            return Err(Error::Config("--levels must be at least 1".into()));
        }
        if self.command != CommandKind::Assumption1 {
            case_by_name(&a.problem)?;
        }
        Ok(())
    }

    fn case(&self) -> Result<ManufacturedCase> {
        let mut case = case_by_name(&self.args.problem)?;
        if let Some(n) = self.args.n0 {
            case.initial_subdivisions = n;
        }
        Ok(case)
    }

    fn hho(&self) -> HhoConfig {
        HhoConfig::new(self.args.k, self.args.variant)
    }

    fn adapt_config(&self, mode: RefinementMode) -> AdaptConfig {
        AdaptConfig {
            theta: self.args.theta,
            max_iter: self.args.max_iter,
            dof_budget: self.args.dof_budget,
            mode,
            bound: self.args.bound,
            timing: self.args.timing,
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Writes the optional per-iteration dumps.
struct Dumper<'a> {
    cfg: &'a RunConfig,
    case: &'a ManufacturedCase,
}

impl Dumper<'_> {
    fn observe(&self, it: &Iteration<'_>) -> Result<()> {
        let a = &self.cfg.args;
        let iter = it.record.iter;
        if a.dump_indicators {
            let mut w = create(&a.out.join(format!("indicators_{iter}.csv")))?;
            it.estimate.write_csv(&mut w)?;
            w.flush()?;
        }
        if a.dump_mesh {
            fs::write(a.out.join(format!("mesh_{iter}.txt")), it.mesh.to_text())?;
        }
        if a.dump_system {
            write_system(&a.out, &format!("_{iter}"), it.mesh, self.cfg.hho(), self.case)?;
        }
        Ok(())
    }
}

fn write_system(dir: &Path, suffix: &str, mesh: &Mesh2D, hho: HhoConfig, case: &ManufacturedCase) -> Result<usize> {
    let sys = assemble(mesh, hho, &case.problem)?;
    let mut w = create(&dir.join(format!("system{suffix}.mtx")))?;
    sys.write_matrix_market(&mut w)?;
    w.flush()?;
    let mut w = create(&dir.join(format!("rhs{suffix}.mtx")))?;
    sys.write_rhs_matrix_market(&mut w)?;
    w.flush()?;
    Ok(sys.dofs.ndofs())
}

fn write_history(dir: &Path, records: &[RunRecord]) -> Result<()> {
    let mut w = create(&dir.join("history.csv"))?;
    write_history_csv(records, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Executes a validated configuration and writes all artifacts.
pub fn execute(cfg: &RunConfig) -> Result<Summary> {
    cfg.validate()?;
    let a = &cfg.args;
    fs::create_dir_all(&a.out)?;
    let summary = match cfg.command {
        CommandKind::Assumption1 => {
            let ks: Vec<usize> = (0..=a.kmax).collect();
            let study = assumption1_study(a.alpha, &ks, a.levels)?;
            let mut w = create(&a.out.join("assumption1.csv"))?;
            study.write_csv(&mut w)?;
            w.flush()?;
            Summary {
                records: study.rows.len(),
                study_slope: study.slope,
                ..Summary::default()
            }
        }
        CommandKind::DumpSystem => {
            let case = cfg.case()?;
            let mut mesh = case.initial_mesh();
            for _ in 0..a.uniform {
                mesh = mesh.uniform_refine().uniform_refine();
            }
            let ndofs = write_system(&a.out, "", &mesh, cfg.hho(), &case)?;
            Summary {
                final_ncells: Some(mesh.num_cells()),
                final_dofs: Some(ndofs),
                ..Summary::default()
            }
        }
        CommandKind::Solve | CommandKind::Adapt | CommandKind::UniformStudy => {
            let case = cfg.case()?;
            let mesh0 = case.initial_mesh();
            let dumper = Dumper { cfg, case: &case };
            let observer = |it: &Iteration<'_>| dumper.observe(it);
            let records = match cfg.command {
                CommandKind::Solve => {
                    uniform_study(&mesh0, cfg.hho(), &case.problem, a.uniform, a.bound, a.timing, observer)?
                }
                CommandKind::Adapt => run_loop(
                    &mesh0,
                    cfg.hho(),
                    &case.problem,
                    &cfg.adapt_config(RefinementMode::Adaptive),
                    observer,
                )?,
                _ => run_loop(
                    &mesh0,
                    cfg.hho(),
                    &case.problem,
                    &cfg.adapt_config(RefinementMode::Uniform),
                    observer,
                )?,
            };
            write_history(&a.out, &records)?;
            Summary::from_records(&records)
        }
    };
    let report = RunReport {
        config: cfg.clone(),
        summary: summary.clone(),
    };
    let mut w = create(&a.out.join("run.json"))?;
    serde_json::to_writer_pretty(&mut w, &report)?;
    writeln!(w)?;
    w.flush()?;
    Ok(summary)
}

pub fn exit_code(err: &Error) -> i32 {
    if err.is_solver_failure() {
        return EXIT_SOLVER;
    }
    match err {
        Error::Config(_) | Error::MissingExactSolution(_) | Error::MeshFormat { .. } => EXIT_CONFIG,
        Error::Iteration { source, .. } => exit_code(source),
        _ => EXIT_FAILURE,
    }
}

/// Parses `argv`, runs, and returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let cfg = RunConfig::from(cli);
    if let Err(e) = cfg.validate() {
        eprintln!("error: {e}");
        return EXIT_CONFIG;
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cfg.args.threads).build_global() {
        eprintln!("error: thread pool: {e}");
        return EXIT_FAILURE;
    }
    match execute(&cfg) {
        Ok(_) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
