//! Command-line driver: manufactured-solution solves, convergence studies
//! and mesh generation.
//!
//! Exit codes: 0 on success, 2 on solver failure, 3 on invalid input.

use clap::{Parser, Subcommand, ValueEnum};
use polystokes::harness::{
    compute_errors, paper_case, patch_case, run_convergence, run_level, run_timing,
    ConvergenceReport, ConvergenceRow, HarnessError, ManufacturedCase, MeshFamily, RunOptions,
};
use polystokes::mesh::{self, Mesh, MeshError};
use polystokes::solver::energy_norm;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "polystokes",
    about = "Divergence-free nonconforming virtual element solver for the 2D Stokes problem"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum CaseArg {
    Paper,
    Patch,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Uniform,
    Voronoi,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve one manufactured case on one mesh and report the errors.
    Solve {
        /// Mesh source: a file path, `uniform:N`, or `voronoi:N,SEED`.
        #[arg(long)]
        mesh: String,
        /// Polynomial order (1, 2 or 3).
        #[arg(long)]
        k: usize,
        #[arg(long, value_enum, default_value_t = CaseArg::Paper)]
        case: CaseArg,
        /// Relative CG tolerance.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Output directory (report.csv, mesh.txt, optional matrix dumps).
        #[arg(long)]
        out: PathBuf,
        /// Also run the Uzawa baseline and record its wall time.
        #[arg(long)]
        uzawa: bool,
        /// Dump A.coo, B.coo and N.coo in coordinate text format.
        #[arg(long)]
        dump_matrices: bool,
        /// Lloyd relaxation sweeps for voronoi: meshes.
        #[arg(long, default_value_t = 100)]
        lloyd: usize,
    },
    /// Refinement study: one row per level, plus CSV/SVG output.
    Converge {
        #[arg(long, value_enum)]
        family: FamilyArg,
        #[arg(long)]
        k: usize,
        /// Number of levels: n = 4, 8, ..., 4 * 2^(levels-1).
        #[arg(long)]
        levels: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = CaseArg::Paper)]
        case: CaseArg,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// RNG seed of the voronoi family.
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        lloyd: usize,
        /// Also time the Uzawa baseline per level (timing.csv).
        #[arg(long)]
        timing: bool,
    },
    /// Generate a mesh and write it as a text file.
    Meshgen {
        /// Mesh spec: `uniform:N` or `voronoi:N,SEED`.
        #[arg(long)]
        mesh: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        lloyd: usize,
        /// Report shape regularity against this edge-ratio threshold.
        #[arg(long)]
        validate: Option<f64>,
    },
}

fn parse_mesh_spec(spec: &str, lloyd: usize) -> Result<Mesh, MeshError> {
    if let Some(n) = spec.strip_prefix("uniform:") {
        let n: usize = n.parse().map_err(|_| MeshError::Parse {
            line: 0,
            msg: format!("invalid uniform mesh spec `{spec}`"),
        })?;
        if n == 0 {
            return Err(MeshError::Parse { line: 0, msg: "n must be positive".into() });
        }
        return Ok(mesh::generate_uniform_square_mesh(n));
    }
    if let Some(rest) = spec.strip_prefix("voronoi:") {
        let mut it = rest.split(',');
        let n: usize = it
            .next()
            .and_then(|s| s.parse().ok())
            .filter(|&n| n > 0)
            .ok_or_else(|| MeshError::Parse {
                line: 0,
                msg: format!("invalid voronoi mesh spec `{spec}`"),
            })?;
        let seed: u64 = match it.next() {
            Some(s) => s.parse().map_err(|_| MeshError::Parse {
                line: 0,
                msg: format!("invalid seed in `{spec}`"),
            })?,
            None => 42,
        };
        return mesh::generate_voronoi_mesh(n, lloyd, seed);
    }
    mesh::read_mesh(Path::new(spec))
}

fn pick_case(case: CaseArg, k: usize) -> ManufacturedCase {
    match case {
        CaseArg::Paper => paper_case(),
        CaseArg::Patch => patch_case(k),
    }
}

fn check_k(k: usize) -> Result<(), String> {
    if (1..=3).contains(&k) {
        Ok(())
    } else {
        Err(format!("unsupported order k = {k} (use 1, 2 or 3)"))
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_solve(
    mesh_spec: &str,
    k: usize,
    case: CaseArg,
    tol: f64,
    out: &Path,
    with_uzawa: bool,
    dump: bool,
    lloyd: usize,
) -> Result<(), HarnessError> {
    let case = pick_case(case, k);
    let mesh = parse_mesh_spec(mesh_spec, lloyd)?;
    std::fs::create_dir_all(out).map_err(HarnessError::Io)?;
    let opts = RunOptions {
        tol,
        p_tol: 1e-9_f64.min(tol * 10.0),
        with_uzawa,
        uzawa_max_outer: 100_000,
    };
    let run = run_level(&case, mesh, k, &opts)?;
    let (e_v, e_p) = compute_errors(&run.mesh, &run.cells, &run.system, &run.u, &run.p, &case);
    let row = ConvergenceRow {
        h: run.mesh.h,
        n_p: run.mesh.counts.n_p,
        dim_v0: run.system.dofmap.n_interior(),
        dim_q: run.system.pressure.dim(),
        dim_z: run.dim_z,
        e_v,
        e_p,
        rate_v: None,
        rate_p: None,
        cg_iters: run.cg_iters,
        t_cg: run.t_solve,
        t_uzawa: run.t_uzawa,
    };
    let report = ConvergenceReport {
        case: case.name,
        family: "single",
        k,
        rows: vec![row],
    };
    std::fs::write(out.join("report.csv"), report.to_csv())?;
    mesh::write_mesh(&run.mesh, &out.join("mesh.txt"))?;
    if dump {
        run.system.a.write_coo(&out.join("A.coo"))?;
        run.system.b.write_coo(&out.join("B.coo"))?;
        run.basis.n.write_coo(&out.join("N.coo"))?;
    }
    println!(
        "{}: k={k} cells={} dimV0={} dimQ={} dimZ={}",
        case.name,
        run.mesh.counts.n_p,
        run.system.dofmap.n_interior(),
        run.system.pressure.dim(),
        run.dim_z
    );
    println!("E_v = {e_v:.6e}  E_p = {e_p:.6e}  cg_iters = {}", run.cg_iters);
    if let Some(ut) = run.t_uzawa {
        let gap = run
            .uzawa_u
            .as_ref()
            .map(|uu| {
                let d: Vec<f64> = run.u.iter().zip(uu).map(|(a, b)| a - b).collect();
                energy_norm(&run.system, &d)
            })
            .unwrap_or(f64::NAN);
        println!(
            "t_cg = {:.4}s  t_uzawa = {:.4}s{}  |u_cg - u_uzawa|_A = {gap:.3e}",
            run.t_solve,
            ut,
            if run.uzawa_timed_out { " (budget hit)" } else { "" }
        );
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_converge(
    family: FamilyArg,
    k: usize,
    levels: usize,
    out: &Path,
    case: CaseArg,
    tol: f64,
    seed: u64,
    lloyd: usize,
    timing: bool,
) -> Result<(), HarnessError> {
    let case = pick_case(case, k);
    let fam = match family {
        FamilyArg::Uniform => MeshFamily::Uniform,
        FamilyArg::Voronoi => MeshFamily::Voronoi { seed, lloyd_iters: lloyd },
    };
    let ns: Vec<usize> = (0..levels).map(|l| 4 << l).collect();
    let opts = RunOptions { tol, ..RunOptions::default() };
    let report = run_convergence(&case, fam, k, &ns, &opts, Some(out))?;
    print!("{}", report.to_csv());
    if timing {
        let rows = run_timing(&case, fam, k, &ns, 100_000, Some(out))?;
        for r in &rows {
            println!(
                "h={} t_cg={:.4}s t_uzawa={}",
                r.h,
                r.t_cg,
                r.t_uzawa.map_or("*".into(), |t| format!("{t:.4}s"))
            );
        }
    }
    Ok(())
}

fn cmd_meshgen(
    spec: &str,
    out: &Path,
    lloyd: usize,
    validate: Option<f64>,
) -> Result<(), HarnessError> {
    let mesh = parse_mesh_spec(spec, lloyd)?;
    mesh::write_mesh(&mesh, out)?;
    println!(
        "wrote {} ({} cells, {} edges, {} vertices, h = {})",
        out.display(),
        mesh.counts.n_p,
        mesh.counts.n_e,
        mesh.counts.n_v,
        mesh.h
    );
    if let Some(rho) = validate {
        let r = mesh::validate_regularity(&mesh, rho);
        println!(
            "regularity vs rho = {rho}: {} (min edge ratio {:.4} at cell {}, {} failing)",
            if r.pass { "pass" } else { "FAIL" },
            r.min_ratio,
            r.worst_cell,
            r.failing_cells.len()
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // clap help/version are not errors.
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(3),
            };
        }
    };
    let result = match cli.cmd {
        Cmd::Solve { ref mesh, k, case, tol, ref out, uzawa, dump_matrices, lloyd } => {
            if let Err(msg) = check_k(k) {
                eprintln!("error: {msg}");
                return ExitCode::from(3);
            }
            cmd_solve(mesh, k, case, tol, out, uzawa, dump_matrices, lloyd)
        }
        Cmd::Converge { family, k, levels, ref out, case, tol, seed, lloyd, timing } => {
            if let Err(msg) = check_k(k) {
                eprintln!("error: {msg}");
                return ExitCode::from(3);
            }
            cmd_converge(family, k, levels, out, case, tol, seed, lloyd, timing)
        }
        Cmd::Meshgen { ref mesh, ref out, lloyd, validate } => {
            cmd_meshgen(mesh, out, lloyd, validate)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(HarnessError::Mesh(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
        Err(HarnessError::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
        Err(HarnessError::Solver(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
