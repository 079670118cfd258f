//! Command-line interface: `mesh`, `solve`, `convergence`, `compare`.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hho_core::assembly::AssemblyOptions;
use hho_core::convergence::{build_mesh, convergence_study, solve_manufactured, MeshKind, RateTable};
use hho_core::mesh::validate;
use hho_core::Mesh;

use crate::config::{BcName, MeshKindName, RunConfig, ScalingName, SolverName, VariantName};
use crate::error::{HhoError, Result};
use crate::exec::{RayonExecutor, WallClock};
use crate::mesh_io::{load_mesh, save_mesh};
use crate::report::{format_table, rates_file_name, write_rates, write_solution};

#[derive(Debug, Parser)]
#[command(name = "hho", version, about = "HHO solvers for the biharmonic problem on polygonal meshes")]
pub struct Cli {
    /// Worker threads (0: one per core). Overrides `threads` in the config.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a mesh of the unit square and write it as JSON.
    Mesh(MeshArgs),
    /// Solve one manufactured problem and write error and solution CSVs.
    Solve(RunArgs),
    /// Run a refinement study and write the rate table.
    Convergence(RunArgs),
    /// Run refinement studies for all variants or both boundary modes.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct MeshArgs {
    #[arg(long, value_enum)]
    pub kind: MeshKindName,
    /// Squares per side (rect, tri).
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of cells (voronoi).
    #[arg(long)]
    pub cells: Option<usize>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub lloyd: usize,
    #[arg(long, default_value = "mesh.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML run configuration; command-line options override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Print the effective configuration as TOML and exit.
    #[arg(long)]
    pub print_config: bool,
    #[arg(long, value_enum)]
    pub variant: Option<VariantName>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_enum)]
    pub bc: Option<BcName>,
    #[arg(long, value_enum)]
    pub mesh_kind: Option<MeshKindName>,
    #[arg(long)]
    pub mesh_n: Option<usize>,
    #[arg(long)]
    pub mesh_file: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lloyd: Option<usize>,
    /// Comma-separated resolutions, e.g. `8,16,32,64`.
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<usize>>,
    #[arg(long)]
    pub case: Option<u32>,
    #[arg(long, value_enum)]
    pub scaling: Option<ScalingName>,
    #[arg(long)]
    pub rhs_extra_degree: Option<usize>,
    #[arg(long, value_enum)]
    pub solver: Option<SolverName>,
    #[arg(long)]
    pub cg_tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CompareWhat {
    /// Variants A, B and C with the configured boundary mode.
    Variants,
    /// Strong and Nitsche boundary conditions for the configured variant.
    Bc,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long, value_enum, default_value = "variants")]
    pub what: CompareWhat,
    #[command(flatten)]
    pub run: RunArgs,
}

impl RunArgs {
    pub fn config(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident <- $arg:expr),* $(,)?) => {$(
                if let Some(v) = $arg.clone() {
                    c.$field = v;
                }
            )*};
        }
        set!(
            variant <- self.variant,
            k <- self.k,
            bc <- self.bc,
            mesh_kind <- self.mesh_kind,
            mesh_n <- self.mesh_n,
            mesh_seed <- self.seed,
            lloyd_iters <- self.lloyd,
            levels <- self.levels,
            case <- self.case,
            scaling <- self.scaling,
            rhs_extra_degree <- self.rhs_extra_degree,
            solver <- self.solver,
            cg_tol <- self.cg_tol,
            max_iters <- self.max_iters,
            output_dir <- self.out_dir,
        );
        if self.mesh_file.is_some() {
            c.mesh_file = self.mesh_file.clone();
        }
        Ok(c)
    }
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code: 0 success, 2 configuration or input error, 3
/// numerical failure.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Mesh(a) => cmd_mesh(a),
        Command::Solve(a) => with_config(cli, a, cmd_solve),
        Command::Convergence(a) => with_config(cli, a, cmd_convergence),
        Command::Compare(a) => with_config(cli, &a.run, |cfg, exec| cmd_compare(cfg, a.what, exec)),
    }
}

fn with_config(cli: &Cli, args: &RunArgs, f: impl FnOnce(&RunConfig, &RayonExecutor) -> Result<()>) -> Result<()> {
    let mut cfg = args.config()?;
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    cfg.validate()?;
    if args.print_config {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    let exec = RayonExecutor::new(cfg.threads).map_err(|e| HhoError::Config(format!("thread pool: {e}")))?;
    f(&cfg, &exec)
}

fn cmd_mesh(a: &MeshArgs) -> Result<()> {
    let (kind, n) = match a.kind {
        MeshKindName::Rect => (MeshKind::Rect, a.n),
        MeshKindName::Tri => (MeshKind::Tri, a.n),
        MeshKindName::Voronoi => (
            MeshKind::Voronoi {
                seed: a.seed,
                lloyd_iters: a.lloyd,
            },
            a.cells,
        ),
    };
    let n = n.ok_or_else(|| {
        HhoError::Config(match a.kind {
            MeshKindName::Voronoi => "voronoi meshes need --cells".into(),
            _ => "rect and tri meshes need --n".into(),
        })
    })?;
    let mesh = build_mesh(kind, n)?;
    save_mesh(&mesh, &a.out)?;
    let v = validate(&mesh);
    println!(
        "cells {} faces {} (interior {}) vertices {} h_max {:.4e}",
        mesh.num_cells(),
        mesh.num_faces(),
        mesh.num_interior_faces(),
        mesh.num_vertices(),
        mesh.h_max()
    );
    println!("valid {} shape_regularity {:.4}", v.is_valid(), v.shape_regularity);
    println!("wrote {}", a.out.display());
    Ok(())
}

fn run_label(cfg: &RunConfig) -> String {
    rates_file_name(cfg.variant, cfg.k, cfg.bc)
        .trim_start_matches("rates_")
        .trim_end_matches(".csv")
        .to_string()
}

fn cmd_solve(cfg: &RunConfig, exec: &RayonExecutor) -> Result<()> {
    let mesh: Mesh = match &cfg.mesh_file {
        Some(p) => load_mesh(p)?,
        None => build_mesh(cfg.mesh_kind(), cfg.mesh_n)?,
    };
    let u = cfg.case().solution(cfg.k);
    let s = solve_manufactured(
        &mesh,
        cfg.scheme(),
        u.as_ref(),
        &cfg.solve_config(),
        AssemblyOptions::default(),
        exec,
        &WallClock::start(),
    )?;
    let label = run_label(cfg);
    let dir = &cfg.output_dir;
    write_rates(&dir.join(format!("solve_{label}.csv")), &RateTable::new(vec![s.report]))?;
    write_solution(&dir.join(format!("solution_{label}.csv")), &mesh, &s.field, u.as_ref())?;
    let r = &s.report;
    println!("cells {} dofs {} h_max {:.4e}", mesh.num_cells(), r.dofs, r.h_max);
    println!("err_h2_rel {:.6e} err_l2_rel {:.6e}", r.err_h2_rel, r.err_l2_rel);
    println!(
        "relative_residual {:.3e} backward_error {:.3e} iterations {}",
        s.stats.relative_residual, s.stats.backward_error, s.stats.iterations
    );
    println!("assembly_s {:.3} solve_s {:.3}", r.assembly_s, r.solve_s);
    println!("wrote {}", dir.display());
    Ok(())
}

/// Runs one study and writes its CSV; a failing level still writes the
/// completed ones.
fn study(cfg: &RunConfig, exec: &RayonExecutor) -> Result<RateTable> {
    if cfg.levels.len() < 3 {
        return Err(HhoError::Config(format!("rate fits need at least 3 levels, got {}", cfg.levels.len())));
    }
    let u = cfg.case().solution(cfg.k);
    let path = cfg.output_dir.join(rates_file_name(cfg.variant, cfg.k, cfg.bc));
    let out = convergence_study(&cfg.family(), cfg.scheme(), u.as_ref(), &cfg.solve_config(), exec, &WallClock::start());
    match out {
        Ok(t) => {
            write_rates(&path, &t)?;
            println!("{} ({})", run_label(cfg), path.display());
            print!("{}", format_table(&t));
            Ok(t)
        }
        Err(f) => {
            write_rates(&path, &f.partial)?;
            eprintln!("{}: level {} failed; {} levels written to {}", run_label(cfg), f.level, f.partial.reports.len(), path.display());
            Err(f.error.into())
        }
    }
}

fn cmd_convergence(cfg: &RunConfig, exec: &RayonExecutor) -> Result<()> {
    study(cfg, exec).map(|_| ())
}

fn cmd_compare(cfg: &RunConfig, what: CompareWhat, exec: &RayonExecutor) -> Result<()> {
    let runs: Vec<RunConfig> = match what {
        CompareWhat::Variants => [VariantName::A, VariantName::B, VariantName::C]
            .into_iter()
            .filter(|&v| {
                let ok = !(v == VariantName::C && cfg.bc == BcName::Nitsche);
                if !ok {
                    println!("skipping variant C: no nitsche mode");
                }
                ok
            })
            .map(|variant| RunConfig { variant, ..cfg.clone() })
            .collect(),
        CompareWhat::Bc => {
            if cfg.variant == VariantName::C {
                return Err(HhoError::Config("bc comparison needs variant A or B".into()));
            }
            [BcName::Strong, BcName::Nitsche].into_iter().map(|bc| RunConfig { bc, ..cfg.clone() }).collect()
        }
    };
    let mut tables = Vec::new();
    for r in &runs {
        tables.push((run_label(r), study(r, exec)?));
        println!();
    }
    print!("{}", compare_summary(&tables));
    Ok(())
}

/// Largest over smallest error at every level, across runs.
fn compare_summary(tables: &[(String, RateTable)]) -> String {
    let levels = tables.iter().map(|(_, t)| t.reports.len()).min().unwrap_or(0);
    let mut s = format!("{:>5} {:>12} {:>12}\n", "level", "spread_h2", "spread_l2");
    for l in 0..levels {
        let spread = |f: fn(&hho_core::post::ErrorReport) -> f64| {
            let v: Vec<f64> = tables.iter().map(|(_, t)| f(&t.reports[l])).collect();
            v.iter().cloned().fold(f64::MIN, f64::max) / v.iter().cloned().fold(f64::MAX, f64::min)
        };
        s += &format!("{:>5} {:>12.4} {:>12.4}\n", l, spread(|r| r.err_h2_rel), spread(|r| r.err_l2_rel));
    }
    s
}

/// Entry point for the binary.
pub fn main_with_args() -> i32 {
    run(std::env::args_os())
}
