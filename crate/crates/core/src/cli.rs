//! Command-line front end. `run_cli` returns the process exit code:
//! 0 success, 2 configuration or data error, 3 solver failure, 4 mesh error.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{load_config, Overrides, RunConfig};
use crate::error::{Error, Result};
use crate::harness::{
    acute_square_data, run_convergence_study, run_evolution, run_steady_state_study, write_convergence_csv,
    write_decay_csv, write_entropy_csv, write_metadata, write_snapshot_csv, write_vtk, OutputPaths, RunSummary,
};
use crate::mesh::{build_rectangle_mesh, read_triangle_file, BoundaryPredicate, Mesh};
use crate::scheme::State;

#[derive(Debug, Parser)]
#[command(name = "biofilm-fv", version, about = "Finite volume solver for multispecies biofilm models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Time evolution with snapshots and an entropy log.
    Run(ExperimentArgs),
    /// Spatial convergence study against a fine reference solution.
    Convergence(ExperimentArgs),
    /// Long-time run measuring the distance to the boundary datum.
    SteadyState(ExperimentArgs),
    /// Load a mesh and report its admissibility and regularity.
    CheckMesh(CheckMeshArgs),
    /// Randomized Jacobian, entropy and conservation checks.
    Selftest {
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output root; results go to `<out>/<experiment name>/`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Reject configurations outside the setting of the entropy theory.
    #[arg(long)]
    pub strict_theory: bool,
    /// Use the full-size reference and triangle meshes.
    #[arg(long)]
    pub paper_scale: bool,
}

#[derive(Debug, Args)]
pub struct CheckMeshArgs {
    /// Triangle file (`nodes N triangles T` header).
    #[arg(required_unless_present_any = ["rectangle", "acute_square"])]
    pub path: Option<PathBuf>,
    /// Uniform rectangle mesh given as `NXxNY`.
    #[arg(long, conflicts_with = "path")]
    pub rectangle: Option<String>,
    /// The bundled acute triangulation of the unit square.
    #[arg(long, conflicts_with_all = ["path", "rectangle"])]
    pub acute_square: bool,
    #[arg(long, default_value_t = 0)]
    pub refine: usize,
    #[arg(long, default_value = "y == 1")]
    pub dirichlet: String,
}

pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Run(a) => with_config(&a, cmd_run),
        Command::Convergence(a) => with_config(&a, cmd_convergence),
        Command::SteadyState(a) => with_config(&a, cmd_steady_state),
        Command::CheckMesh(a) => cmd_check_mesh(&a),
        Command::Selftest { seed } => cmd_selftest(seed),
    }
}

fn with_config(args: &ExperimentArgs, f: fn(&RunConfig, &OutputPaths) -> Result<()>) -> Result<()> {
    let overrides = Overrides {
        output_dir: args.out.clone(),
        threads: args.threads,
        strict_theory: args.strict_theory,
        paper_scale: args.paper_scale,
    };
    let cfg = load_config(&args.config, &overrides)?;
    let out = OutputPaths::create(&cfg.output_dir, &cfg.experiment.name)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} worker threads: {e}", cfg.threads)))?;
    pool.install(|| f(&cfg, &out))
}

fn base_metadata(cfg: &RunConfig) -> Vec<(String, String)> {
    let e = &cfg.experiment;
    vec![
        ("version".into(), env!("CARGO_PKG_VERSION").into()),
        ("name".into(), e.name.clone()),
        ("model".into(), e.model.name().into()),
        ("alphas".into(), join(&e.alphas)),
        ("u_d".into(), join(&e.u_d)),
        ("initial".into(), e.initial.name().into()),
        ("t_end".into(), e.t_end.to_string()),
        ("dt_policy".into(), format!("{:?}", e.dt_policy)),
        ("newton_tol".into(), e.newton.tol.to_string()),
        ("threads".into(), cfg.threads.to_string()),
        ("seed".into(), cfg.seed.to_string()),
        ("strict_theory".into(), cfg.strict_theory.to_string()),
    ]
}

fn summary_metadata(s: &RunSummary) -> Vec<(String, String)> {
    vec![
        ("n_cells".into(), s.n_cells.to_string()),
        ("xi".into(), s.xi.to_string()),
        ("m_star".into(), s.m_star.to_string()),
        ("steps".into(), s.steps.to_string()),
        ("newton_iters_total".into(), s.newton_iters_total.to_string()),
        ("newton_iters_max".into(), s.newton_iters_max.to_string()),
        ("dt_halvings_total".into(), s.dt_halvings_total.to_string()),
        ("dt_smallest".into(), s.dt_smallest.to_string()),
        ("dt_largest".into(), s.dt_largest.to_string()),
        ("entropy_margin_min".into(), s.entropy_margin_min.to_string()),
        ("max_m".into(), s.max_m.to_string()),
        ("min_u".into(), s.min_u.to_string()),
        ("max_conservation_defect".into(), s.max_conservation_defect.to_string()),
    ]
}

fn join(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

fn write_state(out: &OutputPaths, mesh: &Mesh, state: &State) -> Result<()> {
    let stem = OutputPaths::snapshot_stem(state.time);
    if mesh.dimension() == 1 {
        write_snapshot_csv(&out.file(&format!("{stem}.csv")), mesh, state)
    } else {
        write_vtk(&out.file(&format!("{stem}.vtk")), mesh, state, &format!("t = {}", state.time))
    }
}

fn cmd_run(cfg: &RunConfig, out: &OutputPaths) -> Result<()> {
    let result = run_evolution(&cfg.experiment)?;
    write_entropy_csv(&out.file("entropy.csv"), &result.steps)?;
    for snap in &result.snapshots {
        write_state(out, &result.mesh, &snap.state)?;
    }
    let mut meta = base_metadata(cfg);
    meta.extend(summary_metadata(&result.summary));
    write_metadata(&out.file("metadata.txt"), &meta)?;
    println!(
        "{}: {} steps, max M {:.6}, min u {:.3e}, entropy margin {:.3e}",
        cfg.experiment.name,
        result.summary.steps,
        result.summary.max_m,
        result.summary.min_u,
        result.summary.entropy_margin_min
    );
    Ok(())
}

fn cmd_convergence(cfg: &RunConfig, out: &OutputPaths) -> Result<()> {
    let result = run_convergence_study(&cfg.experiment)?;
    write_convergence_csv(&out.file("convergence.csv"), &result)?;
    let mut meta = base_metadata(cfg);
    meta.push(("reference".into(), result.reference.to_string()));
    meta.push((
        "resolutions".into(),
        result.resolutions.iter().map(usize::to_string).collect::<Vec<_>>().join(","),
    ));
    meta.push(("fitted_order".into(), join(&result.fitted_order)));
    write_metadata(&out.file("metadata.txt"), &meta)?;
    for (i, order) in result.fitted_order.iter().enumerate() {
        println!("species {}: fitted L2 order {order:.3}", i + 1);
    }
    Ok(())
}

fn cmd_steady_state(cfg: &RunConfig, out: &OutputPaths) -> Result<()> {
    let result = run_steady_state_study(&cfg.experiment)?;
    write_decay_csv(&out.file("decay.csv"), &result.times, &result.distances)?;
    write_entropy_csv(&out.file("entropy.csv"), &result.steps)?;
    write_state(out, &result.mesh, &result.final_state)?;
    let mut meta = base_metadata(cfg);
    meta.extend(summary_metadata(&result.summary));
    meta.push(("late_slope".into(), join(&result.late_slope)));
    meta.push(("entropy_nonincreasing".into(), result.entropy_nonincreasing.to_string()));
    write_metadata(&out.file("metadata.txt"), &meta)?;
    for (i, slope) in result.late_slope.iter().enumerate() {
        println!("species {}: late log-log slope {slope:.3}", i + 1);
    }
    println!("entropy nonincreasing: {}", result.entropy_nonincreasing);
    Ok(())
}

fn parse_rectangle(text: &str) -> Result<(usize, usize)> {
    let bad = || Error::Config(format!("expected `NXxNY`, got `{text}`"));
    let (a, b) = text.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

fn cmd_check_mesh(args: &CheckMeshArgs) -> Result<()> {
    let pred = BoundaryPredicate::parse(&args.dirichlet)?;
    let refine = |mut data: crate::mesh::TriangleMeshData| {
        for _ in 0..args.refine {
            data = data.refine();
        }
        data
    };
    let mesh = match (&args.path, &args.rectangle) {
        (_, Some(r)) => {
            let (nx, ny) = parse_rectangle(r)?;
            build_rectangle_mesh(nx, ny, &pred)?
        }
        (Some(path), None) => refine(read_triangle_file(path)?).to_mesh(&pred)?,
        (None, None) => refine(acute_square_data()).to_mesh(&pred)?,
    };
    print_mesh_report(&mesh);
    Ok(())
}

fn print_mesh_report(mesh: &Mesh) {
    println!("cells: {}", mesh.n_cells());
    println!("edges: {}", mesh.edges().len());
    println!("dirichlet edges: {}", mesh.dirichlet_edges().count());
    println!("xi: {}", mesh.regularity_xi());
    println!("admissible: yes");
}

fn cmd_selftest(seed: u64) -> Result<()> {
    let checks = crate::selftest::run_selftest(seed)?;
    let mut failed = 0;
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        failed += usize::from(!c.passed);
    }
    if failed > 0 {
        return Err(Error::Solver {
            time: 0.0,
            message: format!("{failed} self-test check(s) failed"),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rectangle_spec() {
        assert_eq!(parse_rectangle("16x8").unwrap(), (16, 8));
        assert!(parse_rectangle("16").is_err());
        assert!(parse_rectangle("ax2").is_err());
    }

    #[test]
    fn bad_arguments_exit_with_config_code() {
        assert_eq!(run_cli(["biofilm-fv", "frobnicate"]), 2);
        assert_eq!(run_cli(["biofilm-fv", "run"]), 2);
        assert_eq!(run_cli(["biofilm-fv", "--help"]), 0);
    }

    #[test]
    fn check_mesh_exit_codes() {
        assert_eq!(run_cli(["biofilm-fv", "check-mesh", "--rectangle", "4x4"]), 0);
        assert_eq!(run_cli(["biofilm-fv", "check-mesh", "--rectangle", "0x4"]), 2);
        let dir = tempfile::tempdir().unwrap();
        let obtuse = dir.path().join("obtuse.tri");
        std::fs::write(&obtuse, "nodes 4 triangles 2\n0 0\n1 0\n1 1\n0 0.1\n0 1 3\n1 2 3\n").unwrap();
        assert_eq!(run_cli(["biofilm-fv".as_ref(), "check-mesh".as_ref(), obtuse.as_os_str()]), 4);
        assert_eq!(run_cli(["biofilm-fv", "check-mesh", "--acute-square", "--refine", "1"]), 0);
        assert_eq!(run_cli(["biofilm-fv", "check-mesh", "/nonexistent/mesh.tri"]), 2);
    }
}
