//! Manufactured-solution runs: error norms, convergence tables, solver
//! timing comparison, CSV/SVG emission.

pub mod plot;

use crate::assembly::{assemble, build_cells, interpolate_global, SparseSystem};
use crate::divfree::{build_basis, build_lifting, DivFreeBasis};
use crate::geometry::Point2;
use crate::mesh::{generate_uniform_square_mesh, generate_voronoi_mesh, Mesh, MeshError};
use crate::solver::{
    self, recover_pressure, reduced_velocity, uzawa, SolverError, DEFAULT_CG_TOL,
    DEFAULT_PRESSURE_TOL, UZAWA_OMEGA,
};
use crate::vem_local::LocalCell;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// An analytic Stokes solution with its closed-form force `f = -Lap u + grad p`
/// and boundary trace `g = u`.
#[derive(Clone, Copy)]
pub struct ManufacturedCase {
    pub name: &'static str,
    pub u: fn(Point2) -> [f64; 2],
    pub p: fn(Point2) -> f64,
    pub f: fn(Point2) -> [f64; 2],
}

/// Trigonometric benchmark solution on the unit square:
/// `u = ((1 - cos 2pi x) sin 2pi y, -(1 - cos 2pi y) sin 2pi x)`,
/// `p = e^x - e^y`. The velocity vanishes identically on the boundary.
pub fn paper_case() -> ManufacturedCase {
    use std::f64::consts::PI;
    fn u(pt: Point2) -> [f64; 2] {
        let (x, y) = (pt.x, pt.y);
        [
            (1.0 - (2.0 * PI * x).cos()) * (2.0 * PI * y).sin(),
            -(1.0 - (2.0 * PI * y).cos()) * (2.0 * PI * x).sin(),
        ]
    }
    fn p(pt: Point2) -> f64 {
        pt.x.exp() - pt.y.exp()
    }
    fn f(pt: Point2) -> [f64; 2] {
        let (x, y) = (pt.x, pt.y);
        let c = 4.0 * PI * PI;
        [
            -c * (2.0 * (2.0 * PI * x).cos() - 1.0) * (2.0 * PI * y).sin() + x.exp(),
            -c * (1.0 - 2.0 * (2.0 * PI * y).cos()) * (2.0 * PI * x).sin() - y.exp(),
        ]
    }
    ManufacturedCase { name: "paper", u, p, f }
}

/// Divergence-free polynomial solution of degree k with pressure of degree
/// k-1; the discrete method reproduces it up to solver tolerance.
pub fn patch_case(k: usize) -> ManufacturedCase {
    match k {
        1 => ManufacturedCase {
            name: "patch-k1",
            u: |pt| [pt.x + 2.0 * pt.y, 3.0 * pt.x - pt.y],
            p: |_| 0.0,
            f: |_| [0.0, 0.0],
        },
        2 => ManufacturedCase {
            name: "patch-k2",
            u: |pt| [pt.x * pt.x, -2.0 * pt.x * pt.y],
            p: |pt| pt.x + pt.y - 1.0,
            f: |_| [-1.0, 1.0],
        },
        3 => ManufacturedCase {
            name: "patch-k3",
            u: |pt| [pt.x.powi(3), -3.0 * pt.x * pt.x * pt.y],
            p: |pt| pt.x * pt.x + pt.y * pt.y - 2.0 / 3.0,
            f: |pt| [-4.0 * pt.x, 8.0 * pt.y],
        },
        _ => panic!("patch cases exist for k = 1, 2, 3"),
    }
}

/// Velocity error in the discrete energy norm against the interpolant, and
/// pressure L2 error against the per-cell L2 projection.
pub fn compute_errors(
    mesh: &Mesh,
    cells: &[LocalCell],
    system: &SparseSystem,
    u_dofs: &[f64],
    p_coeffs: &[f64],
    case: &ManufacturedCase,
) -> (f64, f64) {
    let interp = interpolate_global(mesh, cells, &system.dofmap, case.u);
    let diff: Vec<f64> = u_dofs.iter().zip(&interp).map(|(a, b)| a - b).collect();
    let e_v = solver::energy_norm(system, &diff);
    let mut p_proj = system.pressure.l2_project(cells, case.p);
    system.pressure.project_zero_mean(&mut p_proj);
    let dp: Vec<f64> = p_coeffs.iter().zip(&p_proj).map(|(a, b)| a - b).collect();
    let e_p = system.pressure.l2_norm(&dp);
    (e_v, e_p)
}

/// A refinement family on the unit square. Level `n` means `n x n` squares,
/// or `n^2` Lloyd-relaxed Voronoi seeds with the nominal size label `h = 1/n`.
#[derive(Clone, Copy, Debug)]
pub enum MeshFamily {
    Uniform,
    Voronoi { seed: u64, lloyd_iters: usize },
}

impl MeshFamily {
    pub fn generate(&self, n: usize) -> Result<Mesh, MeshError> {
        match *self {
            MeshFamily::Uniform => Ok(generate_uniform_square_mesh(n)),
            MeshFamily::Voronoi { seed, lloyd_iters } => {
                generate_voronoi_mesh(n * n, lloyd_iters, seed)
            }
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            MeshFamily::Uniform => "uniform",
            MeshFamily::Voronoi { .. } => "voronoi",
        }
    }
}

/// One row of a convergence study.
#[derive(Clone, Debug)]
pub struct ConvergenceRow {
    pub h: f64,
    pub n_p: usize,
    pub dim_v0: usize,
    pub dim_q: usize,
    pub dim_z: usize,
    pub e_v: f64,
    pub e_p: f64,
    pub rate_v: Option<f64>,
    pub rate_p: Option<f64>,
    pub cg_iters: usize,
    pub t_cg: f64,
    pub t_uzawa: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct ConvergenceReport {
    pub case: &'static str,
    pub family: &'static str,
    pub k: usize,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "h,n_p,dim_v0,dim_q,dim_z,e_v,e_p,rate_v,rate_p,cg_iters,t_cg,t_uzawa\n",
        );
        for r in &self.rows {
            let fmt_rate = |o: Option<f64>| o.map_or(String::from("-"), |v| format!("{v:.3}"));
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:.6e},{:.6e},{},{},{},{:.4},{}",
                r.h,
                r.n_p,
                r.dim_v0,
                r.dim_q,
                r.dim_z,
                r.e_v,
                r.e_p,
                fmt_rate(r.rate_v),
                fmt_rate(r.rate_p),
                r.cg_iters,
                r.t_cg,
                r.t_uzawa.map_or(String::from("-"), |t| format!("{t:.4}")),
            );
        }
        out
    }

    /// Gnuplot-friendly whitespace table of (h, E_v, E_p).
    pub fn to_dat(&self) -> String {
        let mut out = String::from("# h e_v e_p\n");
        for r in &self.rows {
            let _ = writeln!(out, "{} {:.6e} {:.6e}", r.h, r.e_v, r.e_p);
        }
        out
    }

    pub fn to_svg(&self) -> String {
        let ev: Vec<(f64, f64)> = self.rows.iter().map(|r| (r.h, r.e_v)).collect();
        let ep: Vec<(f64, f64)> = self.rows.iter().map(|r| (r.h, r.e_p)).collect();
        plot::loglog_svg(
            &format!("{} / {} / k = {}", self.case, self.family, self.k),
            &[
                plot::Series { name: "E_v", points: ev, color: "#1f5fbf" },
                plot::Series { name: "E_p", points: ep, color: "#bf3f1f" },
            ],
            self.k,
        )
    }

    pub fn write_files(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.csv"), self.to_csv())?;
        std::fs::write(dir.join("errors.dat"), self.to_dat())?;
        std::fs::write(dir.join("errors.svg"), self.to_svg())?;
        Ok(())
    }
}

/// Options of a single solve within a study.
#[derive(Clone, Copy, Debug)]
pub struct RunOptions {
    pub tol: f64,
    pub p_tol: f64,
    pub with_uzawa: bool,
    pub uzawa_max_outer: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            tol: DEFAULT_CG_TOL,
            p_tol: DEFAULT_PRESSURE_TOL,
            with_uzawa: false,
            uzawa_max_outer: 100_000,
        }
    }
}

/// Outcome of one mesh level: the assembled objects plus solution and stats.
pub struct LevelRun {
    pub mesh: Mesh,
    pub cells: Vec<LocalCell>,
    pub system: SparseSystem,
    pub basis: DivFreeBasis,
    pub dim_z: usize,
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub cg_iters: usize,
    pub t_solve: f64,
    pub t_uzawa: Option<f64>,
    pub uzawa_timed_out: bool,
    pub uzawa_u: Option<Vec<f64>>,
}

/// Assembles and solves one level with the reduced divergence-free method
/// (and optionally Uzawa for the timing comparison).
pub fn run_level(
    case: &ManufacturedCase,
    mesh: Mesh,
    k: usize,
    opts: &RunOptions,
) -> Result<LevelRun, HarnessError> {
    let cells = build_cells(&mesh, k);
    let system = assemble(&mesh, &cells, case.f);
    let t0 = Instant::now();
    let basis = build_basis(&mesh, &cells, &system.dofmap);
    basis.verify(&system).map_err(SolverError::DivFree)?;
    let lifting = build_lifting(&mesh, &cells, &system.dofmap, case.u)
        .map_err(SolverError::DivFree)?;
    let vel = reduced_velocity(&system, &basis, &lifting, opts.tol)?;
    let t_solve = t0.elapsed().as_secs_f64();
    let (p, _) = recover_pressure(&system, &vel.x, opts.p_tol)?;

    let (t_uzawa, uzawa_timed_out, uzawa_u) = if opts.with_uzawa {
        let t1 = Instant::now();
        let uz = uzawa(&mesh, &system, case.u, UZAWA_OMEGA, opts.tol.max(1e-10), opts.uzawa_max_outer)?;
        (
            Some(t1.elapsed().as_secs_f64()),
            uz.timed_out,
            Some(uz.u_dofs),
        )
    } else {
        (None, false, None)
    };

    Ok(LevelRun {
        dim_z: basis.dim_z,
        basis,
        u: vel.x,
        p,
        cg_iters: vel.iterations,
        t_solve,
        t_uzawa,
        uzawa_timed_out,
        uzawa_u,
        mesh,
        cells,
        system,
    })
}

/// Runs the refinement study `levels` (values of `n`, so `h = 1/n`) and
/// produces the convergence report; optionally writes report.csv,
/// errors.dat and errors.svg into `out_dir`.
pub fn run_convergence(
    case: &ManufacturedCase,
    family: MeshFamily,
    k: usize,
    levels: &[usize],
    opts: &RunOptions,
    out_dir: Option<&Path>,
) -> Result<ConvergenceReport, HarnessError> {
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for &n in levels {
        let mesh = family.generate(n)?;
        let run = run_level(case, mesh, k, opts)?;
        let (e_v, e_p) = compute_errors(&run.mesh, &run.cells, &run.system, &run.u, &run.p, case);
        let h = 1.0 / n as f64;
        let (rate_v, rate_p) = match rows.last() {
            Some(prev) => {
                let ratio = (prev.h / h).log2();
                (
                    Some((prev.e_v / e_v).log2() / ratio),
                    Some((prev.e_p / e_p).log2() / ratio),
                )
            }
            None => (None, None),
        };
        rows.push(ConvergenceRow {
            h,
            n_p: run.mesh.counts.n_p,
            dim_v0: run.system.dofmap.n_interior(),
            dim_q: run.system.pressure.dim(),
            dim_z: run.dim_z,
            e_v,
            e_p,
            rate_v,
            rate_p,
            cg_iters: run.cg_iters,
            t_cg: run.t_solve,
            t_uzawa: run.t_uzawa,
        });
    }
    let report = ConvergenceReport {
        case: case.name,
        family: family.label(),
        k,
        rows,
    };
    if let Some(dir) = out_dir {
        report.write_files(dir)?;
    }
    Ok(report)
}

/// One timing comparison row; `t_uzawa` is None when the outer budget was
/// exhausted (reported as "*" in the CSV).
#[derive(Clone, Debug)]
pub struct TimingRow {
    pub h: f64,
    pub t_cg: f64,
    pub t_uzawa: Option<f64>,
}

/// Times the reduced-CG path against Uzawa at the same tolerance.
pub fn run_timing(
    case: &ManufacturedCase,
    family: MeshFamily,
    k: usize,
    levels: &[usize],
    uzawa_max_outer: usize,
    out_dir: Option<&Path>,
) -> Result<Vec<TimingRow>, HarnessError> {
    let opts = RunOptions {
        with_uzawa: true,
        uzawa_max_outer,
        ..RunOptions::default()
    };
    let mut rows = Vec::new();
    for &n in levels {
        let mesh = family.generate(n)?;
        let run = run_level(case, mesh, k, &opts)?;
        rows.push(TimingRow {
            h: 1.0 / n as f64,
            t_cg: run.t_solve,
            t_uzawa: if run.uzawa_timed_out { None } else { run.t_uzawa },
        });
    }
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        let mut csv = String::from("h,t_cg,t_uzawa\n");
        for r in &rows {
            let _ = writeln!(
                csv,
                "{},{:.4},{}",
                r.h,
                r.t_cg,
                r.t_uzawa.map_or(String::from("*"), |t| format!("{t:.4}"))
            );
        }
        std::fs::write(dir.join("timing.csv"), csv)?;
    }
    Ok(rows)
}
