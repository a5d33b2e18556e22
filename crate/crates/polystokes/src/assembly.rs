//! Global DOF numbering and assembly of the sparse Stokes system.
//!
//! Global velocity DOF ids: edge blocks first (per edge: k normal then k
//! tangential moments, by edge id), then cell blocks (gradient then
//! complement moments, by cell id). Pressure coefficients are stored
//! unconstrained, `k(k+1)/2` per cell in graded-lex monomial order; the
//! zero-mean constraint is enforced by post-projection.

use crate::geometry::Point2;
use crate::mesh::Mesh;
use crate::polybasis::n_monomials;
use crate::sparse::{CooMatrix, CsrMatrix};
use crate::vem_local::{build_kernels, interpolate_local, local_load, LocalCell};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

/// Bijection between (entity, local slot) pairs and global velocity DOF ids.
#[derive(Clone, Debug)]
pub struct DofMap {
    pub k: usize,
    pub n_edges: usize,
    pub n_cells: usize,
    pub n_dofs: usize,
    /// True for DOFs on interior edges and all cell moments.
    pub is_interior: Vec<bool>,
}

impl DofMap {
    pub fn build(mesh: &Mesh, k: usize) -> Self {
        let n_edges = mesh.edges.len();
        let n_cells = mesh.cells.len();
        let cell_block = k * (k - 1);
        let n_dofs = 2 * k * n_edges + cell_block * n_cells;
        let mut is_interior = vec![true; n_dofs];
        for (e, edge) in mesh.edges.iter().enumerate() {
            if edge.is_boundary {
                for j in 0..2 * k {
                    is_interior[e * 2 * k + j] = false;
                }
            }
        }
        DofMap { k, n_edges, n_cells, n_dofs, is_interior }
    }

    pub fn edge_normal(&self, e: usize, j: usize) -> usize {
        debug_assert!(j < self.k);
        e * 2 * self.k + j
    }

    pub fn edge_tangential(&self, e: usize, j: usize) -> usize {
        debug_assert!(j < self.k);
        e * 2 * self.k + self.k + j
    }

    pub fn cell_dof(&self, c: usize, m: usize) -> usize {
        debug_assert!(m < self.k * (self.k - 1));
        2 * self.k * self.n_edges + c * self.k * (self.k - 1) + m
    }

    /// dim V_{h,0} = k(k-1) N_P + 2k N_{E,i}.
    pub fn n_interior(&self) -> usize {
        self.is_interior.iter().filter(|&&b| b).count()
    }

    /// Global ids aligned with the local DOF layout of a cell.
    pub fn local_to_global(&self, mesh: &Mesh, cell: usize) -> Vec<usize> {
        let k = self.k;
        let edges = &mesh.cell_edges[cell];
        let mut out = Vec::with_capacity(2 * k * edges.len() + k * (k - 1));
        for &(e, _) in edges {
            for j in 0..k {
                out.push(self.edge_normal(e, j));
            }
            for j in 0..k {
                out.push(self.edge_tangential(e, j));
            }
        }
        for m in 0..k * (k - 1) {
            out.push(self.cell_dof(cell, m));
        }
        out
    }

    /// Restricts a full-length vector to zero on boundary DOFs.
    pub fn mask_interior(&self, v: &mut [f64]) {
        for (i, &keep) in self.is_interior.iter().enumerate() {
            if !keep {
                v[i] = 0.0;
            }
        }
    }
}

/// Discontinuous P_{k-1} pressure space stored as per-cell monomial
/// coefficients (unconstrained; zero mean enforced by projection).
#[derive(Clone, Debug)]
pub struct PressureSpace {
    pub k: usize,
    pub n_per_cell: usize,
    pub n_raw: usize,
    /// Per cell: `int_K m_beta dx`.
    pub cell_moment: Vec<Vec<f64>>,
    /// Per cell: monomial mass Gram over M_{k-1}(K).
    pub mass: Vec<DMatrix<f64>>,
    mass_chol: Vec<Cholesky<f64, Dyn>>,
    pub total_area: f64,
}

impl PressureSpace {
    pub fn build(cells: &[LocalCell]) -> Self {
        let k = cells[0].k;
        let n_per_cell = n_monomials(k - 1);
        let mut cell_moment = Vec::with_capacity(cells.len());
        let mut mass = Vec::with_capacity(cells.len());
        let mut mass_chol = Vec::with_capacity(cells.len());
        let mut total_area = 0.0;
        for cell in cells {
            let mom: Vec<f64> = (0..n_per_cell).map(|b| cell.moments.values[b]).collect();
            let mut m = DMatrix::zeros(n_per_cell, n_per_cell);
            for a in 0..n_per_cell {
                for b in 0..n_per_cell {
                    m[(a, b)] = cell.moments.product(cell.basis.mons[a], cell.basis.mons[b]);
                }
            }
            mass_chol.push(Cholesky::new(m.clone()).expect("pressure mass matrix is SPD"));
            cell_moment.push(mom);
            mass.push(m);
            total_area += cell.area;
        }
        PressureSpace {
            k,
            n_per_cell,
            n_raw: n_per_cell * cells.len(),
            cell_moment,
            mass,
            mass_chol,
            total_area,
        }
    }

    /// dim Q_h = k(k+1)/2 N_P - 1.
    pub fn dim(&self) -> usize {
        self.n_raw - 1
    }

    pub fn mean(&self, coeffs: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (c, mom) in self.cell_moment.iter().enumerate() {
            for (b, &m) in mom.iter().enumerate() {
                acc += coeffs[c * self.n_per_cell + b] * m;
            }
        }
        acc / self.total_area
    }

    /// Subtracts the mean from every cell's constant coefficient.
    pub fn project_zero_mean(&self, coeffs: &mut [f64]) {
        let mean = self.mean(coeffs);
        for c in 0..self.cell_moment.len() {
            coeffs[c * self.n_per_cell] -= mean;
        }
    }

    /// L2 norm of the piecewise polynomial with the given coefficients.
    pub fn l2_norm(&self, coeffs: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (c, m) in self.mass.iter().enumerate() {
            let x = DVector::from_column_slice(
                &coeffs[c * self.n_per_cell..(c + 1) * self.n_per_cell],
            );
            acc += (x.transpose() * m * &x)[(0, 0)];
        }
        acc.sqrt()
    }

    /// Applies the inverse of the block-diagonal mass matrix.
    pub fn solve_mass(&self, rhs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; rhs.len()];
        for (c, chol) in self.mass_chol.iter().enumerate() {
            let x = chol.solve(&DVector::from_column_slice(
                &rhs[c * self.n_per_cell..(c + 1) * self.n_per_cell],
            ));
            out[c * self.n_per_cell..(c + 1) * self.n_per_cell].copy_from_slice(x.as_slice());
        }
        out
    }

    /// Per-cell L2 projection of an analytic scalar field.
    pub fn l2_project<F: Fn(Point2) -> f64>(&self, cells: &[LocalCell], p: F) -> Vec<f64> {
        let mut out = vec![0.0; self.n_raw];
        for (c, cell) in cells.iter().enumerate() {
            let (pts, wts) = crate::polybasis::gauss_cell(&cell.verts, 2 * self.k + 2);
            let mut rhs = DVector::zeros(self.n_per_cell);
            for (pt, w) in pts.iter().zip(&wts) {
                let val = p(*pt);
                for b in 0..self.n_per_cell {
                    rhs[b] += w * val * cell.basis.eval(b, *pt);
                }
            }
            let x = self.mass_chol[c].solve(&rhs);
            out[c * self.n_per_cell..(c + 1) * self.n_per_cell].copy_from_slice(x.as_slice());
        }
        out
    }
}

/// The assembled global system: stiffness A, divergence pairing B
/// (`B[i, (K,beta)] = b^K(phi_i, m_beta)`) and load F.
pub struct SparseSystem {
    pub k: usize,
    pub a: CsrMatrix,
    pub b: CsrMatrix,
    pub f: Vec<f64>,
    pub dofmap: DofMap,
    pub pressure: PressureSpace,
}

impl SparseSystem {
    /// y = A x.
    pub fn apply_a(&self, x: &[f64], y: &mut [f64]) {
        self.a.mul_vec(x, y);
    }

    /// y = B^T x: the divergence moments of a velocity DOF vector.
    pub fn apply_bt(&self, x: &[f64], y: &mut [f64]) {
        self.b.mul_transpose_vec(x, y);
    }
}

/// Builds the per-cell geometry bundles of a mesh.
pub fn build_cells(mesh: &Mesh, k: usize) -> Vec<LocalCell> {
    (0..mesh.cells.len())
        .map(|c| LocalCell::from_mesh(mesh, c, k))
        .collect()
}

/// Scatters local kernels into the global sparse system. Cells are processed
/// in id order and triplets summed in a fixed order, so the result is
/// bitwise reproducible.
pub fn assemble<F>(mesh: &Mesh, cells: &[LocalCell], force: F) -> SparseSystem
where
    F: Fn(Point2) -> [f64; 2],
{
    let k = cells[0].k;
    let dofmap = DofMap::build(mesh, k);
    let pressure = PressureSpace::build(cells);
    let n = dofmap.n_dofs;
    let mut a_coo = CooMatrix::new(n, n);
    let mut b_coo = CooMatrix::new(n, pressure.n_raw);
    let mut f_vec = vec![0.0; n];
    for (c, cell) in cells.iter().enumerate() {
        let ker = build_kernels(cell);
        let l2g = dofmap.local_to_global(mesh, c);
        for (i_loc, &i_glob) in l2g.iter().enumerate() {
            for (j_loc, &j_glob) in l2g.iter().enumerate() {
                a_coo.push(i_glob, j_glob, ker.a[(i_loc, j_loc)]);
            }
            for beta in 0..pressure.n_per_cell {
                b_coo.push(
                    i_glob,
                    c * pressure.n_per_cell + beta,
                    ker.bdiv[(i_loc, beta)],
                );
            }
        }
        let fl = local_load(cell, &force);
        for (i_loc, &i_glob) in l2g.iter().enumerate() {
            f_vec[i_glob] += fl[i_loc];
        }
    }
    SparseSystem {
        k,
        a: a_coo.to_csr(),
        b: b_coo.to_csr(),
        f: f_vec,
        dofmap,
        pressure,
    }
}

/// Global DOF vector of the interpolant of an analytic velocity field.
/// Shared edge moments are computed identically from both sides, so the
/// scatter is well defined.
pub fn interpolate_global<F>(mesh: &Mesh, cells: &[LocalCell], dofmap: &DofMap, v: F) -> Vec<f64>
where
    F: Fn(Point2) -> [f64; 2],
{
    let mut out = vec![0.0; dofmap.n_dofs];
    for (c, cell) in cells.iter().enumerate() {
        let dofs = interpolate_local(cell, &v);
        let l2g = dofmap.local_to_global(mesh, c);
        for (i_loc, &i_glob) in l2g.iter().enumerate() {
            out[i_glob] = dofs[i_loc];
        }
    }
    out
}
