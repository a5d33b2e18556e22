//! Iterative solvers: unpreconditioned CG on the reduced divergence-free
//! system, least-squares pressure recovery through the normal equations, and
//! a mass-scaled Uzawa baseline on the full saddle-point system.

use crate::assembly::SparseSystem;
use crate::divfree::{build_basis, build_lifting, DivFreeBasis, DivFreeError, Lifting};
use crate::geometry::Point2;
use crate::mesh::Mesh;
use crate::vem_local::LocalCell;
use std::time::Instant;
use thiserror::Error;

/// Default relative tolerance of the velocity CG.
pub const DEFAULT_CG_TOL: f64 = 1e-10;
/// Default relative tolerance of the pressure recovery.
pub const DEFAULT_PRESSURE_TOL: f64 = 1e-9;
/// Iteration cap for both CG loops.
pub const MAX_CG_ITER: usize = 200_000;
/// Default Uzawa step size. The mass-scaled Schur complement has spectrum in
/// (0, 2], so 0.5 keeps the outer iteration a strict contraction (1.0 is
/// borderline and stalls for k = 2).
pub const UZAWA_OMEGA: f64 = 0.5;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("CG breakdown at iteration {iteration}: operator is not SPD (p^T A p = {curvature:e})")]
    Breakdown { iteration: usize, curvature: f64 },
    #[error("CG did not converge in {iterations} iterations (relative residual {residual:e})")]
    MaxIterations { iterations: usize, residual: f64 },
    #[error("Uzawa diverged after {outer} outer iterations (residual {residual:e})")]
    UzawaDiverged { outer: usize, residual: f64 },
    #[error(transparent)]
    DivFree(#[from] DivFreeError),
}

/// Outcome of one CG run.
pub struct CgResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final relative residual ||b - A x|| / ||b||.
    pub residual: f64,
}

/// Unpreconditioned conjugate gradients for an SPD operator.
pub fn cg<F>(mut apply: F, rhs: &[f64], tol: f64, max_iter: usize) -> Result<CgResult, SolverError>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = rhs.len();
    let norm_b = norm(rhs);
    let mut x = vec![0.0; n];
    if norm_b == 0.0 {
        return Ok(CgResult { x, iterations: 0, residual: 0.0 });
    }
    let mut r = rhs.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    for it in 0..max_iter {
        if rr.sqrt() <= tol * norm_b {
            return Ok(CgResult { x, iterations: it, residual: rr.sqrt() / norm_b });
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(SolverError::Breakdown { iteration: it, curvature: pap });
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    if rr.sqrt() <= tol * norm_b {
        Ok(CgResult { x, iterations: max_iter, residual: rr.sqrt() / norm_b })
    } else {
        Err(SolverError::MaxIterations { iterations: max_iter, residual: rr.sqrt() / norm_b })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// sqrt(d^T A d): the discrete energy seminorm.
pub fn energy_norm(system: &SparseSystem, d: &[f64]) -> f64 {
    let mut ad = vec![0.0; d.len()];
    system.apply_a(d, &mut ad);
    dot(d, &ad).max(0.0).sqrt()
}

/// Velocity-and-pressure solution with solver statistics.
pub struct SolveResult {
    pub u_dofs: Vec<f64>,
    pub p_coeffs: Vec<f64>,
    /// Velocity CG iterations.
    pub iterations: usize,
    /// Final relative residual of the velocity solve.
    pub residual: f64,
    /// Pressure CG iterations.
    pub p_iterations: usize,
    pub wall_time: f64,
}

/// Solves the reduced SPD system `N^T A N z = N^T (F - A u~)` and returns
/// `u = N z + u~` (pointwise divergence-free by construction).
pub fn reduced_velocity(
    system: &SparseSystem,
    basis: &DivFreeBasis,
    lifting: &Lifting,
    tol: f64,
) -> Result<CgResult, SolverError> {
    let n_dof = system.dofmap.n_dofs;
    let mut rhs_full = vec![0.0; n_dof];
    system.apply_a(&lifting.u_tilde, &mut rhs_full);
    for i in 0..n_dof {
        rhs_full[i] = system.f[i] - rhs_full[i];
    }
    let mut rhs_z = vec![0.0; basis.dim_z];
    basis.apply_transpose(&rhs_full, &mut rhs_z);

    let mut u_buf = vec![0.0; n_dof];
    let mut au_buf = vec![0.0; n_dof];
    let op = |z: &[f64], out: &mut [f64]| {
        basis.apply(z, &mut u_buf);
        system.apply_a(&u_buf, &mut au_buf);
        basis.apply_transpose(&au_buf, out);
    };
    let mut res = cg(op, &rhs_z, tol, MAX_CG_ITER)?;

    let mut u = vec![0.0; n_dof];
    basis.apply(&res.x, &mut u);
    for i in 0..n_dof {
        u[i] += lifting.u_tilde[i];
    }
    res.x = u;
    Ok(res)
}

/// Least-squares pressure from the overdetermined system
/// `b(v, p) = <f, v> - a(u, v)` over interior test DOFs: CG on the normal
/// equations `B^T B p = B^T r` with the nullspace (global constant)
/// re-projected out of the residual each iteration; the returned pressure
/// has zero mean.
pub fn recover_pressure(
    system: &SparseSystem,
    u_dofs: &[f64],
    tol: f64,
) -> Result<(Vec<f64>, CgResult), SolverError> {
    let n_dof = system.dofmap.n_dofs;
    let n_q = system.pressure.n_raw;
    let n_cells = n_q / system.pressure.n_per_cell;
    let mut r = vec![0.0; n_dof];
    system.apply_a(u_dofs, &mut r);
    for i in 0..n_dof {
        r[i] = system.f[i] - r[i];
    }
    system.dofmap.mask_interior(&mut r);
    let mut rhs = vec![0.0; n_q];
    system.apply_bt(&r, &mut rhs);

    // Coefficient-space constant direction (the operator's nullspace).
    let ortho = |v: &mut [f64]| {
        let mut s = 0.0;
        for c in 0..n_cells {
            s += v[c * system.pressure.n_per_cell];
        }
        let mean = s / n_cells as f64;
        for c in 0..n_cells {
            v[c * system.pressure.n_per_cell] -= mean;
        }
    };
    ortho(&mut rhs);

    let mut bp = vec![0.0; n_dof];
    let op = |p: &[f64], out: &mut [f64]| {
        system.b.mul_vec(p, &mut bp);
        system.dofmap.mask_interior(&mut bp);
        system.apply_bt(&bp, out);
        ortho(out);
    };
    let mut res = cg(op, &rhs, tol, MAX_CG_ITER)?;
    system.pressure.project_zero_mean(&mut res.x);
    let p = res.x.clone();
    Ok((p, res))
}

/// Builds lifting and basis, then runs the reduced solve and the pressure
/// recovery. `tol` drives the velocity CG; the pressure CG uses
/// [`DEFAULT_PRESSURE_TOL`] unless `tol` is tighter.
pub fn solve_reduced<G>(
    mesh: &Mesh,
    cells: &[LocalCell],
    system: &SparseSystem,
    g: G,
    tol: f64,
) -> Result<SolveResult, SolverError>
where
    G: Fn(Point2) -> [f64; 2],
{
    let start = Instant::now();
    let basis = build_basis(mesh, cells, &system.dofmap);
    basis.verify(system)?;
    let lifting = build_lifting(mesh, cells, &system.dofmap, g)?;
    let vel = reduced_velocity(system, &basis, &lifting, tol)?;
    let p_tol = DEFAULT_PRESSURE_TOL.min(tol * 10.0);
    let (p, p_res) = recover_pressure(system, &vel.x, p_tol)?;
    Ok(SolveResult {
        u_dofs: vel.x,
        p_coeffs: p,
        iterations: vel.iterations,
        residual: vel.residual,
        p_iterations: p_res.iterations,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Uzawa statistics.
pub struct UzawaResult {
    pub u_dofs: Vec<f64>,
    pub p_coeffs: Vec<f64>,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    /// Final divergence residual norm relative to the first one.
    pub residual: f64,
    pub wall_time: f64,
    pub timed_out: bool,
}

/// Standard Uzawa on the saddle-point system: inner CG solves of
/// `A u = F - B p` with boundary DOFs pinned to the moments of `g`, then
/// `p <- p + omega M_q^{-1} B^T u` with the block-diagonal pressure mass.
pub fn uzawa<G>(
    mesh: &Mesh,
    system: &SparseSystem,
    g: G,
    omega: f64,
    tol: f64,
    max_outer: usize,
) -> Result<UzawaResult, SolverError>
where
    G: Fn(Point2) -> [f64; 2],
{
    let start = Instant::now();
    let n_dof = system.dofmap.n_dofs;
    let n_q = system.pressure.n_raw;

    // Boundary DOF values: edge moments of g.
    let mut u_bdry = vec![0.0; n_dof];
    let k = system.dofmap.k;
    for (e, edge) in mesh.edges.iter().enumerate() {
        if !edge.is_boundary {
            continue;
        }
        let basis = crate::polybasis::EdgeBasis::from_endpoints(
            mesh.points[edge.v0],
            mesh.points[edge.v1],
            k - 1,
        );
        let (pts, wts) = crate::polybasis::gauss_edge(&basis, 8);
        for q in 0..k {
            let mut mn = 0.0;
            let mut mt = 0.0;
            for (p, w) in pts.iter().zip(&wts) {
                let gv = g(*p);
                let qv = basis.eval(q, *p);
                mn += w * qv * (gv[0] * edge.normal[0] + gv[1] * edge.normal[1]);
                mt += w * qv * (gv[0] * edge.tangent[0] + gv[1] * edge.tangent[1]);
            }
            u_bdry[system.dofmap.edge_normal(e, q)] = mn / edge.length;
            u_bdry[system.dofmap.edge_tangential(e, q)] = mt / edge.length;
        }
    }
    let mut a_ubdry = vec![0.0; n_dof];
    system.apply_a(&u_bdry, &mut a_ubdry);

    let interior: Vec<usize> = (0..n_dof)
        .filter(|&i| system.dofmap.is_interior[i])
        .collect();
    let restrict = |full: &[f64], red: &mut Vec<f64>| {
        red.clear();
        red.extend(interior.iter().map(|&i| full[i]));
    };
    let mut fixed_rhs = Vec::new();
    {
        let mut tmp = vec![0.0; n_dof];
        for i in 0..n_dof {
            tmp[i] = system.f[i] - a_ubdry[i];
        }
        restrict(&tmp, &mut fixed_rhs);
    }

    let mut p = vec![0.0; n_q];
    let mut u_full = u_bdry.clone();
    let mut bp = vec![0.0; n_dof];
    let mut r_p = vec![0.0; n_q];
    let mut inner_total = 0;
    let mut r0 = f64::NAN;
    let mut prev = f64::INFINITY;
    let mut growths = 0;

    for outer in 0..max_outer {
        // Inner solve: A_int u_int = (F - A u_bdry - B p)_int.
        system.b.mul_vec(&p, &mut bp);
        let mut rhs = fixed_rhs.clone();
        for (row, &i) in interior.iter().enumerate() {
            rhs[row] -= bp[i];
        }
        let mut full_buf = vec![0.0; n_dof];
        let mut afull_buf = vec![0.0; n_dof];
        let op = |x: &[f64], out: &mut [f64]| {
            full_buf.iter_mut().for_each(|v| *v = 0.0);
            for (row, &i) in interior.iter().enumerate() {
                full_buf[i] = x[row];
            }
            system.apply_a(&full_buf, &mut afull_buf);
            for (row, &i) in interior.iter().enumerate() {
                out[row] = afull_buf[i];
            }
        };
        let inner = cg(op, &rhs, tol * 1e-2, MAX_CG_ITER)?;
        inner_total += inner.iterations;
        for (row, &i) in interior.iter().enumerate() {
            u_full[i] = inner.x[row];
        }

        // Divergence residual and pressure update.
        system.apply_bt(&u_full, &mut r_p);
        let rn = norm(&r_p);
        if r0.is_nan() {
            r0 = rn;
        }
        if r0 == 0.0 || rn <= tol * r0 {
            system.pressure.project_zero_mean(&mut p);
            return Ok(UzawaResult {
                u_dofs: u_full,
                p_coeffs: p,
                outer_iterations: outer,
                inner_iterations: inner_total,
                residual: if r0 == 0.0 { 0.0 } else { rn / r0 },
                wall_time: start.elapsed().as_secs_f64(),
                timed_out: false,
            });
        }
        if rn > prev {
            growths += 1;
            if growths >= 10 {
                return Err(SolverError::UzawaDiverged { outer, residual: rn / r0 });
            }
        } else {
            growths = 0;
        }
        prev = rn;
        let minv_r = system.pressure.solve_mass(&r_p);
        for i in 0..n_q {
            p[i] += omega * minv_r[i];
        }
        system.pressure.project_zero_mean(&mut p);
    }
    system.pressure.project_zero_mean(&mut p);
    Ok(UzawaResult {
        u_dofs: u_full,
        p_coeffs: p,
        outer_iterations: max_outer,
        inner_iterations: inner_total,
        residual: norm(&r_p) / r0,
        wall_time: start.elapsed().as_secs_f64(),
        timed_out: true,
    })
}
