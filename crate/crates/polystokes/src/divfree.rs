//! Explicit basis of the pointwise divergence-free velocity subspace and the
//! divergence-free lifting of Dirichlet boundary data.
//!
//! Four families of functions, assembled as sparse columns over global DOFs:
//! - vertex functions: circulation around a vertex, carried by the lowest
//!   normal moment of each incident edge plus gradient-moment corrections on
//!   the incident cells;
//! - tangential edge functions: the canonical tangential-moment basis;
//! - normal edge functions (k >= 2): a higher normal moment plus
//!   gradient-moment corrections on the one or two incident cells;
//! - cell functions (k >= 3): the canonical complement-moment basis.
//!
//! The interior-supported members form a basis of the discrete divergence
//! free subspace; boundary members combine into a lifting that matches the
//! boundary moments of a compatible Dirichlet field.

use crate::assembly::{DofMap, SparseSystem};
use crate::geometry::Point2;
use crate::mesh::Mesh;
use crate::polybasis::{gauss_edge, restrict_cell_poly_to_edge};
use crate::sparse::{CooMatrix, CsrMatrix};
use crate::vem_local::LocalCell;
use thiserror::Error;

/// Divergence residual above this (relative) bound signals an assembly or
/// orientation bug; observed residuals sit near accumulated round-off.
pub const DIV_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum DivFreeError {
    #[error("basis column {column} has divergence residual {residual:e}")]
    Verification { column: usize, residual: f64 },
    #[error("boundary data is incompatible: net flux {flux:e}")]
    Incompatible { flux: f64 },
}

/// Provenance of one basis column.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ColumnTag {
    /// Interior vertex id.
    Vertex(usize),
    /// (edge id, edge monomial mode).
    EdgeTangential(usize, usize),
    /// (edge id, edge monomial mode >= 1).
    EdgeNormal(usize, usize),
    /// (cell id, complement slot).
    Cell(usize, usize),
}

/// Sparse basis of the divergence-free subspace: `n` is `n_dof x dim_z`,
/// every column supported on interior DOFs only.
pub struct DivFreeBasis {
    pub n: CsrMatrix,
    pub tags: Vec<ColumnTag>,
    pub dim_z: usize,
}

/// dim Z_{h,0} = N_{V,i} + (2k-1) N_{E,i} + (k-1)(k-2)/2 N_P.
pub fn dim_z(mesh: &Mesh, k: usize) -> usize {
    let perp = if k >= 3 { (k - 1) * (k - 2) / 2 } else { 0 };
    mesh.counts.n_vi + (2 * k - 1) * mesh.counts.n_ei + perp * mesh.counts.n_p
}

/// Coefficients of the trace of every gradient-moment monomial on every cell
/// edge: `table[cell][local_edge][t][j]` is the `q_j` coefficient of
/// `m_{t+1}|_e` in the edge basis (global orientation).
pub struct RestrictionTable {
    per_cell: Vec<Vec<Vec<Vec<f64>>>>,
}

impl RestrictionTable {
    pub fn build(cells: &[LocalCell]) -> Self {
        let per_cell = cells
            .iter()
            .map(|cell| {
                let n_grad = cell.layout.n_grad();
                cell.edges
                    .iter()
                    .map(|edge| {
                        (0..n_grad)
                            .map(|t| {
                                restrict_cell_poly_to_edge(
                                    &cell.basis,
                                    t + 1,
                                    &edge.basis,
                                    cell.k - 1,
                                )
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        RestrictionTable { per_cell }
    }
}

fn local_edge_index(mesh: &Mesh, cell: usize, edge: usize) -> usize {
    mesh.cell_edges[cell]
        .iter()
        .position(|&(e, _)| e == edge)
        .expect("edge is not part of the cell")
}

/// The vertex function: `h * sum_i (s_i / |e_i|)` on the lowest normal moment
/// of each incident edge (`s_i = <n_e, n_{e,v}>`), plus the gradient-moment
/// corrections that cancel the divergence against every non-constant cell
/// monomial. Defined for interior and boundary vertices alike; boundary
/// vertices are only used by the lifting.
pub fn psi_vertex(
    mesh: &Mesh,
    cells: &[LocalCell],
    dofmap: &DofMap,
    table: &RestrictionTable,
    v: usize,
) -> Vec<(usize, f64)> {
    let h = mesh.h;
    let mut col = Vec::new();
    for &e in &mesh.vertex_edges[v] {
        let edge = &mesh.edges[e];
        col.push((
            dofmap.edge_normal(e, 0),
            h * edge.vertex_sign(v) / edge.length,
        ));
    }
    for &c in &mesh.vertex_cells[v] {
        let cell = &cells[c];
        let n_grad = cell.layout.n_grad();
        if n_grad == 0 {
            continue;
        }
        // The two edges of this cell meeting at v.
        let incident: Vec<usize> = mesh.cell_edges[c]
            .iter()
            .map(|&(e, _)| e)
            .filter(|&e| mesh.edges[e].v0 == v || mesh.edges[e].v1 == v)
            .collect();
        debug_assert_eq!(incident.len(), 2);
        for t in 0..n_grad {
            let mut acc = 0.0;
            for &e in &incident {
                let le = local_edge_index(mesh, c, e);
                let sigma = mesh.cell_edges[c][le].1;
                let s = mesh.edges[e].vertex_sign(v);
                // int_e phi^n_{e,1} . n_K q ds = sigma |e| c_0(q|_e), and the
                // 1/|e_i| weight cancels that |e|.
                acc += s * sigma * table.per_cell[c][le][t][0];
            }
            let value = h / cell.area * acc;
            if value != 0.0 {
                col.push((dofmap.cell_dof(c, t), value));
            }
        }
    }
    col
}

/// The canonical tangential edge function: a single unit entry.
pub fn psi_edge_tangential(dofmap: &DofMap, e: usize, q: usize) -> Vec<(usize, f64)> {
    vec![(dofmap.edge_tangential(e, q), 1.0)]
}

/// The normal edge function for mode `q >= 1`: unit entry on the normal
/// moment plus gradient corrections `sigma |e| / |K| * (q_q coefficient of
/// r|_e)` on each incident cell.
pub fn psi_edge_normal(
    mesh: &Mesh,
    cells: &[LocalCell],
    dofmap: &DofMap,
    table: &RestrictionTable,
    e: usize,
    q: usize,
) -> Vec<(usize, f64)> {
    assert!(q >= 1, "the lowest normal mode carries net flux");
    let mut col = vec![(dofmap.edge_normal(e, q), 1.0)];
    for &c in &mesh.edges[e].cells {
        let cell = &cells[c];
        let le = local_edge_index(mesh, c, e);
        let sigma = mesh.cell_edges[c][le].1;
        let len = mesh.edges[e].length;
        for t in 0..cell.layout.n_grad() {
            let value = sigma * len / cell.area * table.per_cell[c][le][t][q];
            if value != 0.0 {
                col.push((dofmap.cell_dof(c, t), value));
            }
        }
    }
    col
}

/// The canonical cell complement function (k >= 3): a single unit entry.
pub fn psi_cell(cells: &[LocalCell], dofmap: &DofMap, c: usize, slot: usize) -> Vec<(usize, f64)> {
    let n_grad = cells[c].layout.n_grad();
    vec![(dofmap.cell_dof(c, n_grad + slot), 1.0)]
}

/// Builds the full interior basis: vertex functions on interior vertices,
/// tangential functions on interior edges, normal functions (k >= 2) on
/// interior edges, complement functions (k >= 3) on every cell.
pub fn build_basis(mesh: &Mesh, cells: &[LocalCell], dofmap: &DofMap) -> DivFreeBasis {
    let k = dofmap.k;
    let table = RestrictionTable::build(cells);
    let expected = dim_z(mesh, k);
    let mut coo = CooMatrix::new(dofmap.n_dofs, expected);
    let mut tags = Vec::with_capacity(expected);
    let push = |coo: &mut CooMatrix, tags: &mut Vec<ColumnTag>, tag, col: Vec<(usize, f64)>| {
        let j = tags.len();
        for (row, val) in col {
            coo.push(row, j, val);
        }
        tags.push(tag);
    };
    for v in 0..mesh.points.len() {
        if !mesh.vertex_is_boundary[v] {
            let col = psi_vertex(mesh, cells, dofmap, &table, v);
            push(&mut coo, &mut tags, ColumnTag::Vertex(v), col);
        }
    }
    for (e, edge) in mesh.edges.iter().enumerate() {
        if !edge.is_boundary {
            for q in 0..k {
                let col = psi_edge_tangential(dofmap, e, q);
                push(&mut coo, &mut tags, ColumnTag::EdgeTangential(e, q), col);
            }
        }
    }
    if k >= 2 {
        for (e, edge) in mesh.edges.iter().enumerate() {
            if !edge.is_boundary {
                for q in 1..k {
                    let col = psi_edge_normal(mesh, cells, dofmap, &table, e, q);
                    push(&mut coo, &mut tags, ColumnTag::EdgeNormal(e, q), col);
                }
            }
        }
    }
    if k >= 3 {
        let n_perp = (k - 1) * (k - 2) / 2;
        for c in 0..mesh.cells.len() {
            for slot in 0..n_perp {
                let col = psi_cell(cells, dofmap, c, slot);
                push(&mut coo, &mut tags, ColumnTag::Cell(c, slot), col);
            }
        }
    }
    assert_eq!(tags.len(), expected, "column count disagrees with the dimension formula");
    DivFreeBasis { n: coo.to_csr(), tags, dim_z: expected }
}

impl DivFreeBasis {
    /// y = N z.
    pub fn apply(&self, z: &[f64], y: &mut [f64]) {
        self.n.mul_vec(z, y);
    }

    /// y = N^T x.
    pub fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        self.n.mul_transpose_vec(x, y);
    }

    /// Column `j` as (row, value) pairs. Columns are CSR rows of N^T; N is
    /// stored row-wise, so gather by scan of the tagged construction instead.
    pub fn column(&self, j: usize) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        for r in 0..self.n.nrows {
            for i in self.n.row_ptr[r]..self.n.row_ptr[r + 1] {
                if self.n.col_idx[i] == j {
                    out.push((r, self.n.values[i]));
                }
            }
        }
        out
    }

    /// Checks that every column is supported on interior DOFs and kills all
    /// divergence moments: `||B^T psi||_inf <= DIV_TOL * max(1, ||psi||_inf)`.
    /// Returns the worst relative residual.
    pub fn verify(&self, system: &SparseSystem) -> Result<f64, DivFreeError> {
        let b = &system.b;
        let mut residual = vec![0.0; b.ncols];
        let mut touched: Vec<usize> = Vec::new();
        let mut col_max = vec![0.0_f64; self.dim_z];
        let mut col_res = vec![0.0_f64; self.dim_z];
        let mut per_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.dim_z];
        for r in 0..self.n.nrows {
            for i in self.n.row_ptr[r]..self.n.row_ptr[r + 1] {
                let j = self.n.col_idx[i];
                let v = self.n.values[i];
                per_col[j].push((r, v));
                if !system.dofmap.is_interior[r] {
                    return Err(DivFreeError::Verification { column: j, residual: f64::INFINITY });
                }
            }
        }
        for (j, col) in per_col.iter().enumerate() {
            for &(r, v) in col {
                col_max[j] = col_max[j].max(v.abs());
                for i in b.row_ptr[r]..b.row_ptr[r + 1] {
                    let c = b.col_idx[i];
                    if residual[c] == 0.0 {
                        touched.push(c);
                    }
                    residual[c] += b.values[i] * v;
                }
            }
            for &c in &touched {
                col_res[j] = col_res[j].max(residual[c].abs());
                residual[c] = 0.0;
            }
            touched.clear();
        }
        let mut worst = 0.0_f64;
        for j in 0..self.dim_z {
            let rel = col_res[j] / col_max[j].max(1.0);
            if rel > worst {
                worst = rel;
            }
            if rel > DIV_TOL {
                return Err(DivFreeError::Verification { column: j, residual: rel });
            }
        }
        Ok(worst)
    }
}

/// The divergence-free lifting of Dirichlet data: boundary coefficients and
/// the assembled DOF vector.
pub struct Lifting {
    pub u_tilde: Vec<f64>,
    /// (vertex id, C_1 value) in boundary loop order.
    pub c1: Vec<(usize, f64)>,
    /// (edge id, mode, C_2 value).
    pub c2: Vec<(usize, usize, f64)>,
    /// (edge id, mode, C_3 value).
    pub c3: Vec<(usize, usize, f64)>,
    /// (edge id, int_e g.n ds) in boundary loop order.
    pub edge_flux: Vec<(usize, f64)>,
}

/// Gauss points per boundary edge for the moments of `g`.
const LIFTING_RULE: usize = 8;

/// Builds the lifting from boundary vertex and edge functions:
/// velocity moments on every boundary edge match those of `g`, and the
/// result is pointwise divergence-free.
pub fn build_lifting<F>(
    mesh: &Mesh,
    cells: &[LocalCell],
    dofmap: &DofMap,
    g: F,
) -> Result<Lifting, DivFreeError>
where
    F: Fn(Point2) -> [f64; 2],
{
    let k = dofmap.k;
    let table = RestrictionTable::build(cells);
    let (loop_verts, loop_edges) = mesh.boundary_loop();
    let n = loop_verts.len();

    // Fluxes and compatibility.
    let mut flux = Vec::with_capacity(n);
    for &e in &loop_edges {
        let edge = &mesh.edges[e];
        let basis = crate::polybasis::EdgeBasis::from_endpoints(
            mesh.points[edge.v0],
            mesh.points[edge.v1],
            k - 1,
        );
        let (pts, wts) = gauss_edge(&basis, LIFTING_RULE);
        let f: f64 = pts
            .iter()
            .zip(&wts)
            .map(|(p, w)| {
                let gv = g(*p);
                w * (gv[0] * edge.normal[0] + gv[1] * edge.normal[1])
            })
            .sum();
        flux.push(f);
    }
    let total: f64 = flux.iter().sum();
    let scale: f64 = flux.iter().map(|f| f.abs()).sum::<f64>().max(1.0);
    if total.abs() > 1e-10 * scale {
        return Err(DivFreeError::Incompatible { flux: total });
    }

    // C_{1,v_i} = -sum_{j >= i} flux_j, counterclockwise labels.
    let mut c1 = vec![0.0; n];
    let mut acc = 0.0;
    for i in (0..n).rev() {
        acc += flux[i];
        c1[i] = -acc;
    }

    let mut u_tilde = vec![0.0; dofmap.n_dofs];
    // Vertex terms (the defining factor h cancels against the coefficient:
    // the combination must carry C_1 / h for the lowest normal moments to
    // telescope to the fluxes).
    for (i, &v) in loop_verts.iter().enumerate() {
        if c1[i] == 0.0 {
            continue;
        }
        let col = psi_vertex(mesh, cells, dofmap, &table, v);
        let w = c1[i] / mesh.h;
        for (row, val) in col {
            u_tilde[row] += w * val;
        }
    }
    // Edge moment terms.
    let mut c2 = Vec::new();
    let mut c3 = Vec::new();
    for &e in &loop_edges {
        let edge = &mesh.edges[e];
        let basis = crate::polybasis::EdgeBasis::from_endpoints(
            mesh.points[edge.v0],
            mesh.points[edge.v1],
            k - 1,
        );
        let (pts, wts) = gauss_edge(&basis, LIFTING_RULE);
        for q in 0..k {
            let mt: f64 = pts
                .iter()
                .zip(&wts)
                .map(|(p, w)| {
                    let gv = g(*p);
                    w * basis.eval(q, *p) * (gv[0] * edge.tangent[0] + gv[1] * edge.tangent[1])
                })
                .sum::<f64>()
                / edge.length;
            c2.push((e, q, mt));
            if mt != 0.0 {
                for (row, val) in psi_edge_tangential(dofmap, e, q) {
                    u_tilde[row] += mt * val;
                }
            }
            if q >= 1 {
                let mn: f64 = pts
                    .iter()
                    .zip(&wts)
                    .map(|(p, w)| {
                        let gv = g(*p);
                        w * basis.eval(q, *p) * (gv[0] * edge.normal[0] + gv[1] * edge.normal[1])
                    })
                    .sum::<f64>()
                    / edge.length;
                c3.push((e, q, mn));
                if mn != 0.0 {
                    for (row, val) in psi_edge_normal(mesh, cells, dofmap, &table, e, q) {
                        u_tilde[row] += mn * val;
                    }
                }
            }
        }
    }

    Ok(Lifting {
        u_tilde,
        c1: loop_verts.iter().copied().zip(c1).collect(),
        c2,
        c3,
        edge_flux: loop_edges.iter().copied().zip(flux).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble, build_cells};
    use crate::mesh::{build_topology, generate_uniform_square_mesh, generate_voronoi_mesh, Cell};

    fn setup(mesh: &Mesh, k: usize) -> (Vec<LocalCell>, SparseSystem) {
        let cells = build_cells(mesh, k);
        let sys = assemble(mesh, &cells, |_| [0.0, 0.0]);
        (cells, sys)
    }

    #[test]
    fn dimension_formula_on_4x4() {
        let m = generate_uniform_square_mesh(4);
        assert_eq!(dim_z(&m, 1), 33);
        assert_eq!(dim_z(&m, 2), 81);
        assert_eq!(dim_z(&m, 3), 145);
    }

    #[test]
    fn dimension_equals_interior_minus_pressure() {
        for k in 1..=3 {
            for m in [generate_uniform_square_mesh(3), generate_voronoi_mesh(9, 40, 5).unwrap()] {
                let dm = DofMap::build(&m, k);
                let n_q = k * (k + 1) / 2 * m.counts.n_p;
                assert_eq!(dim_z(&m, k), dm.n_interior() - (n_q - 1), "k={k}");
            }
        }
    }

    #[test]
    fn vertex_function_k1_structure() {
        let m = generate_uniform_square_mesh(4);
        let (cells, sys) = setup(&m, 1);
        let table = RestrictionTable::build(&cells);
        let v = (0..m.points.len())
            .find(|&v| !m.vertex_is_boundary[v])
            .unwrap();
        let col = psi_vertex(&m, &cells, &sys.dofmap, &table, v);
        assert_eq!(col.len(), 4); // no cell corrections at k = 1
        for &(row, val) in &col {
            let e = row / 2; // k = 1: 2 DOFs per edge, normal first
            assert_eq!(row % 2, 0, "only normal moments are touched");
            let edge = &m.edges[e];
            let expect = m.h * edge.vertex_sign(v) / edge.length;
            assert_eq!(val.to_bits(), expect.to_bits());
        }
        // Divergence cancels exactly on a uniform mesh.
        let mut bt = vec![0.0; sys.pressure.n_raw];
        let mut dense = vec![0.0; sys.dofmap.n_dofs];
        for &(row, val) in &col {
            dense[row] = val;
        }
        sys.apply_bt(&dense, &mut bt);
        assert!(bt.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn vertex_function_is_divergence_free_on_voronoi_k2() {
        let m = generate_voronoi_mesh(16, 60, 42).unwrap();
        let (cells, sys) = setup(&m, 2);
        let table = RestrictionTable::build(&cells);
        for v in 0..m.points.len() {
            if m.vertex_is_boundary[v] {
                continue;
            }
            let col = psi_vertex(&m, &cells, &sys.dofmap, &table, v);
            let mut dense = vec![0.0; sys.dofmap.n_dofs];
            for &(row, val) in &col {
                dense[row] = val;
            }
            let mut bt = vec![0.0; sys.pressure.n_raw];
            sys.apply_bt(&dense, &mut bt);
            let worst = bt.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
            assert!(worst <= 1e-12, "vertex {v}: {worst:e}");
        }
    }

    #[test]
    fn tangential_function_is_single_entry_and_divergence_free() {
        let m = generate_uniform_square_mesh(3);
        for k in 1..=3 {
            let (_cells, sys) = setup(&m, k);
            let e = m.edges.iter().position(|e| !e.is_boundary).unwrap();
            for q in 0..k {
                let col = psi_edge_tangential(&sys.dofmap, e, q);
                assert_eq!(col.len(), 1);
                let mut dense = vec![0.0; sys.dofmap.n_dofs];
                dense[col[0].0] = col[0].1;
                let mut bt = vec![0.0; sys.pressure.n_raw];
                sys.apply_bt(&dense, &mut bt);
                assert!(bt.iter().all(|&x| x == 0.0), "k={k} q={q}");
            }
        }
    }

    #[test]
    fn normal_function_divergence_free_k2_k3() {
        let m = generate_uniform_square_mesh(4);
        for k in 2..=3 {
            let (cells, sys) = setup(&m, k);
            let table = RestrictionTable::build(&cells);
            let e = m.edges.iter().position(|e| !e.is_boundary).unwrap();
            for q in 1..k {
                let col = psi_edge_normal(&m, &cells, &sys.dofmap, &table, e, q);
                let mut dense = vec![0.0; sys.dofmap.n_dofs];
                for &(row, val) in &col {
                    dense[row] += val;
                }
                let mut bt = vec![0.0; sys.pressure.n_raw];
                sys.apply_bt(&dense, &mut bt);
                let worst = bt.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
                assert!(worst <= 1e-12, "k={k} q={q}: {worst:e}");
            }
        }
    }

    #[test]
    fn cell_function_counts() {
        let m = generate_uniform_square_mesh(2);
        // k = 2 produces no complement columns.
        let (cells2, sys2) = setup(&m, 2);
        let b2 = build_basis(&m, &cells2, &sys2.dofmap);
        assert!(b2.tags.iter().all(|t| !matches!(t, ColumnTag::Cell(_, _))));
        // k = 3: exactly one per cell.
        let (cells, sys) = setup(&m, 3);
        let basis = build_basis(&m, &cells, &sys.dofmap);
        let n_cell_cols = basis
            .tags
            .iter()
            .filter(|t| matches!(t, ColumnTag::Cell(_, _)))
            .count();
        assert_eq!(n_cell_cols, m.counts.n_p);
    }

    #[test]
    fn single_cell_k3_has_one_column() {
        let m = generate_uniform_square_mesh(1);
        let (cells, sys) = setup(&m, 3);
        let basis = build_basis(&m, &cells, &sys.dofmap);
        assert_eq!(basis.dim_z, 1);
        assert!(matches!(basis.tags[0], ColumnTag::Cell(0, 0)));
        basis.verify(&sys).unwrap();
    }

    #[test]
    fn basis_verifies_on_uniform_and_voronoi() {
        for k in 1..=3 {
            let m = generate_uniform_square_mesh(4);
            let (cells, sys) = setup(&m, k);
            let basis = build_basis(&m, &cells, &sys.dofmap);
            assert_eq!(basis.dim_z, dim_z(&m, k));
            let worst = basis.verify(&sys).unwrap();
            assert!(worst <= DIV_TOL);

            let m = generate_voronoi_mesh(16, 60, 42).unwrap();
            let (cells, sys) = setup(&m, k);
            let basis = build_basis(&m, &cells, &sys.dofmap);
            basis.verify(&sys).unwrap();
        }
    }

    #[test]
    fn crouzeix_raviart_degeneration_on_triangles() {
        // 4x4 squares each split into two triangles; k = 1 vertex functions
        // must carry exactly the incident-edge support with weights h/|e|.
        let n = 4;
        let sq = generate_uniform_square_mesh(n);
        let mut cells = Vec::new();
        for c in &sq.cells {
            let v = &c.vertex_ids;
            cells.push(Cell { vertex_ids: vec![v[0], v[1], v[2]] });
            cells.push(Cell { vertex_ids: vec![v[0], v[2], v[3]] });
        }
        let m = build_topology(sq.points.clone(), cells).unwrap();
        let (cells, sys) = setup(&m, 1);
        let table = RestrictionTable::build(&cells);
        for v in 0..m.points.len() {
            if m.vertex_is_boundary[v] {
                continue;
            }
            let col = psi_vertex(&m, &cells, &sys.dofmap, &table, v);
            assert_eq!(col.len(), m.vertex_edges[v].len());
            for &(row, val) in &col {
                let e = row / 2;
                assert!(m.vertex_edges[v].contains(&e));
                assert!((val.abs() - m.h / m.edges[e].length).abs() < 1e-15);
                assert_eq!(val.signum(), m.edges[e].vertex_sign(v));
            }
            let mut dense = vec![0.0; sys.dofmap.n_dofs];
            for &(row, val) in &col {
                dense[row] = val;
            }
            let mut bt = vec![0.0; sys.pressure.n_raw];
            sys.apply_bt(&dense, &mut bt);
            let worst = bt.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
            assert!(worst <= 1e-13);
        }
    }

    #[test]
    fn columns_peel_to_triangular_form() {
        // Independence via pivot peeling: repeatedly eliminate a column that
        // owns a DOF row no remaining column touches. Vertex pivots have
        // magnitude h/|e|, all others are unit.
        for (mesh, ks) in [
            (generate_uniform_square_mesh(4), vec![1usize, 2, 3]),
            (generate_voronoi_mesh(12, 40, 6).unwrap(), vec![1, 2]),
        ] {
            for &k in &ks {
                let cells = build_cells(&mesh, k);
                let dm = DofMap::build(&mesh, k);
                let basis = build_basis(&mesh, &cells, &dm);
                let mut cols: Vec<Vec<(usize, f64)>> =
                    (0..basis.dim_z).map(|j| basis.column(j)).collect();
                let mut row_count = vec![0usize; dm.n_dofs];
                for col in &cols {
                    for &(r, _) in col {
                        row_count[r] += 1;
                    }
                }
                let mut alive = basis.dim_z;
                loop {
                    let mut progressed = false;
                    for (j, col) in cols.iter_mut().enumerate() {
                        if col.is_empty() {
                            continue;
                        }
                        if let Some(&(row, val)) =
                            col.iter().find(|&&(r, _)| row_count[r] == 1)
                        {
                            let mag = val.abs();
                            match basis.tags[j] {
                                ColumnTag::Vertex(_) => {
                                    // Vertex pivots sit on a lowest normal
                                    // moment and carry weight h/|e|.
                                    let e = row / (2 * k);
                                    let expect = mesh.h / mesh.edges[e].length;
                                    assert!((mag - expect).abs() < 1e-14 * expect);
                                }
                                _ => assert!((mag - 1.0).abs() < 1e-14),
                            }
                            for &(r, _) in col.iter() {
                                row_count[r] -= 1;
                            }
                            col.clear();
                            alive -= 1;
                            progressed = true;
                        }
                    }
                    if alive == 0 {
                        break;
                    }
                    assert!(progressed, "k={k}: peeling stalled with {alive} columns left");
                }
            }
        }
    }

    #[test]
    fn lifting_of_zero_data_is_zero() {
        let m = generate_uniform_square_mesh(3);
        for k in 1..=3 {
            let cells = build_cells(&m, k);
            let dm = DofMap::build(&m, k);
            let l = build_lifting(&m, &cells, &dm, |_| [0.0, 0.0]).unwrap();
            assert!(l.u_tilde.iter().all(|&x| x == 0.0));
            assert!(l.c1.iter().all(|&(_, c)| c == 0.0));
            assert!(l.c2.iter().all(|&(_, _, c)| c == 0.0));
            assert!(l.c3.iter().all(|&(_, _, c)| c == 0.0));
        }
    }

    #[test]
    fn lifting_telescoping_and_moments_for_translation() {
        let m = generate_voronoi_mesh(12, 50, 3).unwrap();
        for k in 1..=3 {
            let cells = build_cells(&m, k);
            let sys = assemble(&m, &cells, |_| [0.0, 0.0]);
            let g = |_: Point2| [1.0, 0.0];
            let l = build_lifting(&m, &cells, &sys.dofmap, g).unwrap();
            // Telescoping: -C_{1,v_i} + C_{1,v_{i+1}} = flux_i.
            let n = l.c1.len();
            for i in 0..n {
                let ci = l.c1[i].1;
                let cn = l.c1[(i + 1) % n].1;
                assert!(
                    (-ci + cn - l.edge_flux[i].1).abs() <= 1e-12,
                    "k={k} i={i}"
                );
            }
            // Boundary moments match the quadrature moments of g.
            for &(e, q, c) in &l.c2 {
                let got = l.u_tilde[sys.dofmap.edge_tangential(e, q)];
                assert!((got - c).abs() <= 1e-12 * c.abs().max(1.0));
            }
            for &(e, q, c) in &l.c3 {
                let got = l.u_tilde[sys.dofmap.edge_normal(e, q)];
                assert!((got - c).abs() <= 1e-12 * c.abs().max(1.0));
            }
            for (i, &(e, flux)) in l.edge_flux.iter().enumerate() {
                let _ = i;
                let got = l.u_tilde[sys.dofmap.edge_normal(e, 0)];
                let expect = flux / m.edges[e].length;
                assert!(
                    (got - expect).abs() <= 1e-10 * expect.abs().max(1.0),
                    "k={k} edge={e}: {got} vs {expect}"
                );
            }
            // Divergence-free.
            let mut bt = vec![0.0; sys.pressure.n_raw];
            sys.apply_bt(&l.u_tilde, &mut bt);
            let worst = bt.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
            assert!(worst <= 1e-9, "k={k}: {worst:e}");
        }
    }

    #[test]
    fn lifting_of_incompatible_data_errors() {
        let m = generate_uniform_square_mesh(2);
        let cells = build_cells(&m, 1);
        let dm = DofMap::build(&m, 1);
        // Pure outflow g = x has nonzero net flux.
        let r = build_lifting(&m, &cells, &dm, |p| [p.x, p.y]);
        assert!(matches!(r, Err(DivFreeError::Incompatible { .. })));
    }
}
