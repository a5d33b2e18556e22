//! Per-cell VEM kernels: DOF layout, the H1 projector, the stabilized
//! stiffness, the divergence pairing and the load vector.
//!
//! Degrees of freedom of the order-k local space on a cell with n_e edges,
//! stored in the global edge orientation (n_e, t_e), so assembly scatters
//! without sign flips:
//! - per edge e: k normal moments `(1/|e|) int_e v.n_e q_j ds` followed by
//!   k tangential moments, `q_j in M_{k-1}(e)`;
//! - per cell: gradient moments `(1/|K|) int_K v . grad m` for
//!   `m in M_{k-1}(K)\{1}`, then complement moments against
//!   `m x_perp, m in M_{k-3}(K)`.
//!
//! Total: `N_K = 2 k n_e + k (k - 1)`.

use crate::geometry::{self, Point2};
use crate::mesh::Mesh;
use crate::polybasis::{
    fit_edge_poly, gauss_cell, gauss_edge, n_monomials, restrict_cell_poly_to_edge, CellBasis,
    CellMoments, EdgeBasis, VectorPolySplit,
};
use nalgebra::{DMatrix, DVector};

/// Extra Gauss points past the minimum on edges; cells use exactness 2k+2.
fn edge_rule_points(k: usize) -> usize {
    k + 2
}

fn cell_rule_order(k: usize) -> usize {
    2 * k + 2
}

/// Slot arithmetic for the local DOF vector.
#[derive(Clone, Copy, Debug)]
pub struct LocalDofLayout {
    pub k: usize,
    pub n_edges: usize,
}

impl LocalDofLayout {
    pub fn new(k: usize, n_edges: usize) -> Self {
        assert!((1..=3).contains(&k), "only orders 1..=3 are supported");
        LocalDofLayout { k, n_edges }
    }

    pub fn n_grad(&self) -> usize {
        n_monomials(self.k - 1) - 1
    }

    pub fn n_perp(&self) -> usize {
        if self.k < 3 {
            0
        } else {
            (self.k - 1) * (self.k - 2) / 2
        }
    }

    pub fn n_cell_dofs(&self) -> usize {
        self.n_grad() + self.n_perp()
    }

    pub fn n_dofs(&self) -> usize {
        2 * self.k * self.n_edges + self.n_cell_dofs()
    }

    pub fn edge_normal(&self, local_edge: usize, j: usize) -> usize {
        debug_assert!(j < self.k);
        local_edge * 2 * self.k + j
    }

    pub fn edge_tangential(&self, local_edge: usize, j: usize) -> usize {
        debug_assert!(j < self.k);
        local_edge * 2 * self.k + self.k + j
    }

    /// Gradient moment slot for the cell monomial with graded-lex index
    /// `1 + t` in `M_{k-1}(K)` (the constant is skipped).
    pub fn cell_grad(&self, t: usize) -> usize {
        debug_assert!(t < self.n_grad());
        2 * self.k * self.n_edges + t
    }

    pub fn cell_perp(&self, t: usize) -> usize {
        debug_assert!(t < self.n_perp());
        2 * self.k * self.n_edges + self.n_grad() + t
    }
}

/// One cell edge with its global orientation data.
#[derive(Clone, Debug)]
pub struct CellEdge {
    /// Edge monomial basis of degree k-1 in the global tangent direction.
    pub basis: EdgeBasis,
    /// n_K . n_e in {-1, +1}: +1 when the cell traverses the edge along t_e.
    pub sigma: f64,
    /// Global unit normal n_e (tangent rotated by -90 degrees).
    pub normal: [f64; 2],
}

/// Immutable geometry bundle of one cell: everything the kernels need.
#[derive(Clone, Debug)]
pub struct LocalCell {
    pub k: usize,
    pub verts: Vec<Point2>,
    pub edges: Vec<CellEdge>,
    pub basis: CellBasis,
    pub split: VectorPolySplit,
    pub moments: CellMoments,
    pub area: f64,
    pub perimeter: f64,
    pub layout: LocalDofLayout,
}

impl LocalCell {
    /// A standalone CCW polygon: edge tangents follow the traversal
    /// (sigma = +1 on every edge).
    pub fn standalone(verts: Vec<Point2>, k: usize) -> Self {
        let n = verts.len();
        let edges = (0..n)
            .map(|i| {
                let basis = EdgeBasis::from_endpoints(verts[i], verts[(i + 1) % n], k - 1);
                let normal = geometry::rotate_minus_90(basis.tangent);
                CellEdge { basis, sigma: 1.0, normal }
            })
            .collect();
        Self::finish(verts, edges, k)
    }

    /// The cell `cell_id` of a mesh, with edge bases in the mesh's global
    /// orientation and sigma from the topology.
    pub fn from_mesh(mesh: &Mesh, cell_id: usize, k: usize) -> Self {
        let verts = mesh.cell_vertices(cell_id);
        let edges = mesh.cell_edges[cell_id]
            .iter()
            .map(|&(e, sigma)| {
                let edge = &mesh.edges[e];
                let basis = EdgeBasis::from_endpoints(
                    mesh.points[edge.v0],
                    mesh.points[edge.v1],
                    k - 1,
                );
                CellEdge { basis, sigma, normal: edge.normal }
            })
            .collect();
        Self::finish(verts, edges, k)
    }

    fn finish(verts: Vec<Point2>, edges: Vec<CellEdge>, k: usize) -> Self {
        let basis = CellBasis::from_polygon(&verts, k);
        let split = VectorPolySplit::new(&basis, k);
        let moments = CellMoments::compute(&verts, &basis, cell_rule_order(k));
        let area = geometry::signed_area(&verts);
        let perimeter = edges.iter().map(|e| e.basis.length).sum();
        let layout = LocalDofLayout::new(k, edges.len());
        LocalCell {
            k,
            verts,
            edges,
            basis,
            split,
            moments,
            area,
            perimeter,
            layout,
        }
    }

    fn n_scalar_mons(&self) -> usize {
        n_monomials(self.k)
    }

    /// Number of vector monomial basis members of `P_k(K)^2`.
    pub fn n_poly(&self) -> usize {
        2 * self.n_scalar_mons()
    }

    /// Cell moment DOF of a vector polynomial given by stacked monomial
    /// coefficients over `M_{k}` components (only degrees <= k-2 pair with
    /// the split members, higher ones integrate exactly via moments).
    fn cell_dof_of_monomial(&self, member: usize, comp: usize, scalar: usize) -> f64 {
        let mut acc = 0.0;
        for &(idx, c) in &self.split.members[member][comp] {
            acc += c * self.moments.product(self.basis.mons[scalar], self.basis.mons[idx]);
        }
        acc / self.area
    }
}

/// The computed per-cell matrices.
#[derive(Clone, Debug)]
pub struct LocalKernels {
    pub layout: LocalDofLayout,
    /// DOFs of the vector monomials, `N_K x n_p`.
    pub d: DMatrix<f64>,
    /// Projector right-hand side, `n_p x N_K`.
    pub b: DMatrix<f64>,
    /// Gradient Gram with the two constant rows replaced by boundary-mean
    /// constraints, `n_p x n_p`.
    pub g: DMatrix<f64>,
    /// Projector coefficients `G^{-1} B`, `n_p x N_K`.
    pub pi_star: DMatrix<f64>,
    /// Stabilized stiffness, `N_K x N_K`, symmetric.
    pub a: DMatrix<f64>,
    /// Divergence pairing `b^K(phi_i, m_beta)`, `N_K x dim M_{k-1}(K)`.
    pub bdiv: DMatrix<f64>,
}

/// Assembles D, B, G, Pi and the stiffness/divergence matrices of a cell.
pub fn build_kernels(cell: &LocalCell) -> LocalKernels {
    let k = cell.k;
    let layout = cell.layout;
    let n_dof = layout.n_dofs();
    let n_sc = cell.n_scalar_mons();
    let n_p = cell.n_poly();

    // --- D: DOFs of vector monomials -----------------------------------
    // Column 2s has components (m_s, 0), column 2s+1 has (0, m_s).
    let mut d = DMatrix::zeros(n_dof, n_p);
    for (i, edge) in cell.edges.iter().enumerate() {
        let (pts, wts) = gauss_edge(&edge.basis, edge_rule_points(k));
        let len = edge.basis.length;
        for s in 0..n_sc {
            for comp in 0..2 {
                let col = 2 * s + comp;
                for j in 0..k {
                    let mut accn = 0.0;
                    let mut acct = 0.0;
                    for (p, w) in pts.iter().zip(&wts) {
                        let val = cell.basis.eval(s, *p) * edge.basis.eval(j, *p);
                        accn += w * val * edge.normal[comp];
                        acct += w * val * edge.basis.tangent[comp];
                    }
                    d[(layout.edge_normal(i, j), col)] += accn / len;
                    d[(layout.edge_tangential(i, j), col)] += acct / len;
                }
            }
        }
    }
    for m in 0..layout.n_cell_dofs() {
        let row = 2 * k * layout.n_edges + m;
        for s in 0..n_sc {
            for comp in 0..2 {
                d[(row, 2 * s + comp)] = cell.cell_dof_of_monomial(m, comp, s);
            }
        }
    }

    // --- G: gradient Gram + boundary-mean constraint rows ---------------
    let mut g = DMatrix::zeros(n_p, n_p);
    let h = cell.basis.diameter;
    for sa in 0..n_sc {
        let a = cell.basis.mons[sa];
        for sb in 0..n_sc {
            let b = cell.basis.mons[sb];
            let mut grad_ip = 0.0;
            if a.ax > 0 && b.ax > 0 {
                grad_ip += (a.ax * b.ax) as f64
                    * self_product(cell, a.ax - 1, a.ay, b.ax - 1, b.ay);
            }
            if a.ay > 0 && b.ay > 0 {
                grad_ip += (a.ay * b.ay) as f64
                    * self_product(cell, a.ax, a.ay - 1, b.ax, b.ay - 1);
            }
            grad_ip /= h * h;
            for comp in 0..2 {
                g[(2 * sb + comp, 2 * sa + comp)] = grad_ip;
            }
        }
    }
    // Boundary means of each scalar monomial.
    let mut bnd_mean = vec![0.0; n_sc];
    for edge in &cell.edges {
        let (pts, wts) = gauss_edge(&edge.basis, edge_rule_points(k));
        for s in 0..n_sc {
            bnd_mean[s] += pts
                .iter()
                .zip(&wts)
                .map(|(p, w)| w * cell.basis.eval(s, *p))
                .sum::<f64>();
        }
    }
    for v in bnd_mean.iter_mut() {
        *v /= cell.perimeter;
    }
    for comp in 0..2 {
        for s in 0..n_sc {
            for c2 in 0..2 {
                g[(comp, 2 * s + c2)] = if c2 == comp { bnd_mean[s] } else { 0.0 };
            }
        }
    }

    // --- B: projector right-hand side -----------------------------------
    let mut b = DMatrix::zeros(n_p, n_dof);
    // Constraint rows: boundary mean of v, per component.
    for (i, edge) in cell.edges.iter().enumerate() {
        let len = edge.basis.length;
        for comp in 0..2 {
            b[(comp, layout.edge_normal(i, 0))] += len * edge.normal[comp] / cell.perimeter;
            b[(comp, layout.edge_tangential(i, 0))] +=
                len * edge.basis.tangent[comp] / cell.perimeter;
        }
    }
    // Rows for non-constant vector monomials: int_K grad v : grad m =
    // -int_K v . Lap(m) + sum_e int_e v . (grad m n_K).
    let nm_km2 = if k >= 2 { n_monomials(k - 2) } else { 0 };
    for s in 1..n_sc {
        for comp in 0..2 {
            let row = 2 * s + comp;
            // Volume term through the cell moment DOFs.
            if k >= 2 {
                let lap = cell.basis.laplacian_coeffs(s);
                if !lap.is_empty() {
                    let mut stacked = DVector::zeros(2 * nm_km2);
                    for &(idx, c) in &lap {
                        stacked[comp * nm_km2 + idx] = c;
                    }
                    let dcoef = cell.split.expand(&stacked);
                    for (m, &dm) in dcoef.iter().enumerate() {
                        b[(row, 2 * k * layout.n_edges + m)] -= cell.area * dm;
                    }
                }
            }
            // Boundary term: fit (grad m_s . n_K) per edge in M_{k-1}(e).
            for (i, edge) in cell.edges.iter().enumerate() {
                let nk = [edge.sigma * edge.normal[0], edge.sigma * edge.normal[1]];
                let coeffs = fit_edge_poly(&edge.basis, k - 1, |p| {
                    let gr = cell.basis.grad(s, p);
                    gr[0] * nk[0] + gr[1] * nk[1]
                });
                let len = edge.basis.length;
                for (j, &aj) in coeffs.iter().enumerate() {
                    b[(row, layout.edge_normal(i, j))] += edge.normal[comp] * len * aj;
                    b[(row, layout.edge_tangential(i, j))] +=
                        edge.basis.tangent[comp] * len * aj;
                }
            }
        }
    }

    // --- projector and stiffness ----------------------------------------
    let glu = g.clone().lu();
    let pi_star = glu.solve(&b).expect("projector system is singular");
    let mut g_tilde = g.clone();
    for col in 0..n_p {
        g_tilde[(0, col)] = 0.0;
        g_tilde[(1, col)] = 0.0;
    }
    let consistency = pi_star.transpose() * (&g_tilde * &pi_star);
    let stab_op = DMatrix::identity(n_dof, n_dof) - &d * &pi_star;
    let stability = stab_op.transpose() * &stab_op;
    // Trace-balanced dofi-dofi stabilization. On a triangle with k = 1 the
    // local space is pure P_1^2 and the complement is empty; tau falls back
    // to 1 there (S is the zero matrix anyway).
    let tau = if stability.trace() > 1e-12 * consistency.trace() {
        consistency.trace() / stability.trace()
    } else {
        1.0
    };
    let mut a = consistency + stability * tau;
    // Enforce exact symmetry (products above differ in the last ulp).
    for i in 0..n_dof {
        for j in 0..i {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }

    // --- divergence pairing ----------------------------------------------
    // b^K(phi, m_beta) = -int_e m_beta phi.n_K + int_K phi . grad m_beta.
    let n_press = n_monomials(k - 1);
    let mut bdiv = DMatrix::zeros(n_dof, n_press);
    for beta in 0..n_press {
        for (i, edge) in cell.edges.iter().enumerate() {
            let coeffs = restrict_cell_poly_to_edge(&cell.basis, beta, &edge.basis, k - 1);
            let len = edge.basis.length;
            for (j, &cj) in coeffs.iter().enumerate() {
                bdiv[(layout.edge_normal(i, j), beta)] -= edge.sigma * len * cj;
            }
        }
        if beta >= 1 {
            bdiv[(layout.cell_grad(beta - 1), beta)] += cell.area;
        }
    }

    LocalKernels { layout, d, b, g, pi_star, a, bdiv }
}

fn self_product(cell: &LocalCell, ax1: u32, ay1: u32, ax2: u32, ay2: u32) -> f64 {
    cell.moments.get(ax1 + ax2, ay1 + ay2)
}

/// Load vector `<f_h, phi_i>` for an analytic force field.
///
/// For k = 1 the pairing is `(Pi_0 f) . vbar |K|` with `vbar` the boundary
/// mean of v, so only lowest edge moments are loaded. For k >= 2 it is
/// `int_K (Pi_{k-2} f) . v`, which touches only the cell moment DOFs.
/// Forces are integrated with the fixed exactness-(2k+2) cell rule; data
/// oscillating beyond that resolution incurs ordinary quadrature error.
pub fn local_load<F>(cell: &LocalCell, f: F) -> DVector<f64>
where
    F: Fn(Point2) -> [f64; 2],
{
    let k = cell.k;
    let layout = cell.layout;
    let mut out = DVector::zeros(layout.n_dofs());
    let (pts, wts) = gauss_cell(&cell.verts, cell_rule_order(k));
    if k == 1 {
        let mut pi0 = [0.0, 0.0];
        for (p, w) in pts.iter().zip(&wts) {
            let fv = f(*p);
            pi0[0] += w * fv[0];
            pi0[1] += w * fv[1];
        }
        pi0[0] /= cell.area;
        pi0[1] /= cell.area;
        for (i, edge) in cell.edges.iter().enumerate() {
            let len = edge.basis.length;
            let scale = cell.area * len / cell.perimeter;
            out[layout.edge_normal(i, 0)] =
                scale * (pi0[0] * edge.normal[0] + pi0[1] * edge.normal[1]);
            out[layout.edge_tangential(i, 0)] =
                scale * (pi0[0] * edge.basis.tangent[0] + pi0[1] * edge.basis.tangent[1]);
        }
        return out;
    }
    // L2-project f onto P_{k-2}(K)^2 in the monomial basis, then expand in
    // the split members (which are dual to the cell moment DOFs).
    let nm = n_monomials(k - 2);
    let mut mass = DMatrix::zeros(nm, nm);
    for a in 0..nm {
        for b in 0..nm {
            mass[(a, b)] = cell
                .moments
                .product(cell.basis.mons[a], cell.basis.mons[b]);
        }
    }
    let mass_lu = mass.lu();
    let mut stacked = DVector::zeros(2 * nm);
    for comp in 0..2 {
        let mut rhs = DVector::zeros(nm);
        for (p, w) in pts.iter().zip(&wts) {
            let fv = f(*p)[comp];
            for a in 0..nm {
                rhs[a] += w * fv * cell.basis.eval(a, *p);
            }
        }
        let sol = mass_lu.solve(&rhs).expect("cell mass matrix is singular");
        for a in 0..nm {
            stacked[comp * nm + a] = sol[a];
        }
    }
    let gamma = cell.split.expand(&stacked);
    for (m, &gm) in gamma.iter().enumerate() {
        out[2 * k * layout.n_edges + m] = cell.area * gm;
    }
    out
}

/// DOF vector of the interpolant of an analytic vector field (each DOF
/// evaluated by Gauss quadrature; exact on polynomials of degree <= k).
pub fn interpolate_local<F>(cell: &LocalCell, v: F) -> DVector<f64>
where
    F: Fn(Point2) -> [f64; 2],
{
    let k = cell.k;
    let layout = cell.layout;
    let mut out = DVector::zeros(layout.n_dofs());
    for (i, edge) in cell.edges.iter().enumerate() {
        let (pts, wts) = gauss_edge(&edge.basis, edge_rule_points(k));
        for j in 0..k {
            let mut accn = 0.0;
            let mut acct = 0.0;
            for (p, w) in pts.iter().zip(&wts) {
                let vv = v(*p);
                let q = edge.basis.eval(j, *p);
                accn += w * q * (vv[0] * edge.normal[0] + vv[1] * edge.normal[1]);
                acct += w * q * (vv[0] * edge.basis.tangent[0] + vv[1] * edge.basis.tangent[1]);
            }
            out[layout.edge_normal(i, j)] = accn / edge.basis.length;
            out[layout.edge_tangential(i, j)] = acct / edge.basis.length;
        }
    }
    if layout.n_cell_dofs() > 0 {
        let (pts, wts) = gauss_cell(&cell.verts, cell_rule_order(k));
        for m in 0..layout.n_cell_dofs() {
            let mut acc = 0.0;
            for (p, w) in pts.iter().zip(&wts) {
                let vv = v(*p);
                let q = cell.split.eval_member(&cell.basis, m, *p);
                acc += w * (vv[0] * q[0] + vv[1] * q[1]);
            }
            out[2 * k * layout.n_edges + m] = acc / cell.area;
        }
    }
    out
}

/// DOF vector of a constant field (closed form; used by tests and lifting
/// sanity checks).
pub fn constant_field_dofs(cell: &LocalCell, c: [f64; 2]) -> DVector<f64> {
    interpolate_local(cell, |_| c)
}
