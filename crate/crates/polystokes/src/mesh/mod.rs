//! Convex polygonal meshes of the unit square: topology, orientation,
//! generators and text I/O.
//!
//! Edge orientation convention, fixed once per mesh:
//! - interior edges store `(v0, v1)` with `v0 < v1`; the unit tangent `t_e`
//!   points from `v0` to `v1` and `n_e` is `t_e` rotated by -90 degrees;
//! - boundary edges store `(v0, v1)` in the counterclockwise direction with
//!   respect to the domain, so `n_e` is the outward normal.
//!
//! Local kernels keep all degrees of freedom in this global orientation; the
//! per-cell sign `sigma = n_K . n_e` is carried explicitly by [`Mesh::cell_edges`].

mod generate;
mod io;

pub use generate::{generate_uniform_square_mesh, generate_voronoi_mesh};
pub use io::{read_mesh, write_mesh};

use crate::geometry::{self, Point2};
use std::collections::HashMap;
use thiserror::Error;

/// Relative convexity tolerance: cross products down to `-CONVEXITY_TOL * h_K^2`
/// are accepted (clipped Voronoi cells carry near-collinear vertices).
pub const CONVEXITY_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("cell {cell} references vertex {index} out of range")]
    InvalidIndex { cell: usize, index: usize },
    #[error("cell {cell} has fewer than 3 vertices")]
    TooFewVertices { cell: usize },
    #[error("cell {cell} repeats a vertex")]
    RepeatedVertex { cell: usize },
    #[error("cell {cell} has clockwise or degenerate vertex orientation")]
    Orientation { cell: usize },
    #[error("cell {cell} is not convex")]
    NonConvex { cell: usize },
    #[error("non-manifold edge ({v0}, {v1}) shared by more than two cells")]
    NonManifold { v0: usize, v1: usize },
    #[error("vertex {0} is not referenced by any cell")]
    DanglingVertex(usize),
    #[error("degenerate seed configuration: {0}")]
    DegenerateSeeds(String),
}

/// A polygonal cell given by its vertex indices in counterclockwise order.
#[derive(Clone, Debug)]
pub struct Cell {
    pub vertex_ids: Vec<usize>,
}

impl Cell {
    pub fn n_edges(&self) -> usize {
        self.vertex_ids.len()
    }
}

/// An oriented mesh edge. `v0 -> v1` is the direction of the unit tangent.
#[derive(Clone, Debug)]
pub struct Edge {
    pub v0: usize,
    pub v1: usize,
    /// Incident cell ids (two for interior edges, one for boundary edges).
    pub cells: Vec<usize>,
    /// Unit tangent from `v0` to `v1`.
    pub tangent: [f64; 2],
    /// Unit normal, `tangent` rotated by -90 degrees (outward on the boundary).
    pub normal: [f64; 2],
    pub length: f64,
    pub midpoint: Point2,
    pub is_boundary: bool,
}

impl Edge {
    /// Exact sign of `<n_e, n_{e,v}>` where `n_{e,v}` is the edge normal
    /// pointing counterclockwise around the endpoint `v`: +1 when `v` is the
    /// head of the tangent, -1 when it is the tail.
    pub fn vertex_sign(&self, v: usize) -> f64 {
        debug_assert!(v == self.v0 || v == self.v1);
        if v == self.v1 {
            1.0
        } else {
            -1.0
        }
    }
}

/// Entity counts of a mesh (`i` = interior, `b` = boundary).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Counts {
    pub n_p: usize,
    pub n_e: usize,
    pub n_ei: usize,
    pub n_eb: usize,
    pub n_v: usize,
    pub n_vi: usize,
    pub n_vb: usize,
}

/// An immutable convex polygonal mesh with derived topology.
#[derive(Clone, Debug)]
pub struct Mesh {
    pub points: Vec<Point2>,
    pub cells: Vec<Cell>,
    pub edges: Vec<Edge>,
    /// Per cell, aligned with the CCW traversal: `(edge_id, sigma)` where
    /// `sigma = n_K . n_e` in {-1, +1}.
    pub cell_edges: Vec<Vec<(usize, f64)>>,
    /// Per vertex: incident edge ids.
    pub vertex_edges: Vec<Vec<usize>>,
    /// Per vertex: incident cell ids.
    pub vertex_cells: Vec<Vec<usize>>,
    pub vertex_is_boundary: Vec<bool>,
    /// Maximum cell diameter.
    pub h: f64,
    pub counts: Counts,
}

impl Mesh {
    pub fn cell_vertices(&self, cell: usize) -> Vec<Point2> {
        self.cells[cell]
            .vertex_ids
            .iter()
            .map(|&v| self.points[v])
            .collect()
    }

    pub fn cell_area(&self, cell: usize) -> f64 {
        geometry::signed_area(&self.cell_vertices(cell))
    }

    pub fn cell_diameter(&self, cell: usize) -> f64 {
        geometry::diameter(&self.cell_vertices(cell))
    }

    /// Sum of all cell areas.
    pub fn total_area(&self) -> f64 {
        (0..self.cells.len()).map(|c| self.cell_area(c)).sum()
    }

    /// Walks the boundary loop counterclockwise starting from the boundary
    /// vertex with the smallest id. Returns `(vertices, edges)` with
    /// `edges[i]` joining `vertices[i]` to `vertices[i+1]` (cyclically).
    pub fn boundary_loop(&self) -> (Vec<usize>, Vec<usize>) {
        let start = (0..self.points.len())
            .find(|&v| self.vertex_is_boundary[v])
            .expect("mesh has no boundary");
        let mut verts = Vec::new();
        let mut edges = Vec::new();
        let mut v = start;
        loop {
            verts.push(v);
            // The outgoing boundary edge has v as the tail of its CCW tangent.
            let e = self.vertex_edges[v]
                .iter()
                .copied()
                .find(|&e| self.edges[e].is_boundary && self.edges[e].v0 == v)
                .expect("boundary vertex without outgoing boundary edge");
            edges.push(e);
            v = self.edges[e].v1;
            if v == start {
                break;
            }
        }
        (verts, edges)
    }
}

/// Builds edges, orientations, adjacency and counts from raw points and cells.
///
/// Validates that every cell is a convex CCW polygon, that edges are manifold
/// and that every vertex is used.
pub fn build_topology(points: Vec<Point2>, cells: Vec<Cell>) -> Result<Mesh, MeshError> {
    let n_v = points.len();
    let mut used = vec![false; n_v];

    for (c, cell) in cells.iter().enumerate() {
        if cell.vertex_ids.len() < 3 {
            return Err(MeshError::TooFewVertices { cell: c });
        }
        let mut seen = cell.vertex_ids.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(MeshError::RepeatedVertex { cell: c });
        }
        for &v in &cell.vertex_ids {
            if v >= n_v {
                return Err(MeshError::InvalidIndex { cell: c, index: v });
            }
            used[v] = true;
        }
        let verts: Vec<Point2> = cell.vertex_ids.iter().map(|&v| points[v]).collect();
        if geometry::signed_area(&verts) <= 0.0 {
            return Err(MeshError::Orientation { cell: c });
        }
        let hk = geometry::diameter(&verts);
        if !geometry::is_convex_ccw(&verts, CONVEXITY_TOL * hk * hk) {
            return Err(MeshError::NonConvex { cell: c });
        }
    }
    if let Some(v) = used.iter().position(|&u| !u) {
        return Err(MeshError::DanglingVertex(v));
    }

    // First pass: collect incidences per undirected vertex pair, in
    // first-occurrence order so edge ids are deterministic.
    let mut key_to_edge: HashMap<(usize, usize), usize> = HashMap::new();
    // (cell, tail, head) per incidence
    let mut incidences: Vec<Vec<(usize, usize, usize)>> = Vec::new();
    let mut edge_order: Vec<(usize, usize)> = Vec::new();
    for (c, cell) in cells.iter().enumerate() {
        let ids = &cell.vertex_ids;
        for i in 0..ids.len() {
            let a = ids[i];
            let b = ids[(i + 1) % ids.len()];
            let key = (a.min(b), a.max(b));
            let e = *key_to_edge.entry(key).or_insert_with(|| {
                incidences.push(Vec::new());
                edge_order.push(key);
                edge_order.len() - 1
            });
            incidences[e].push((c, a, b));
            if incidences[e].len() > 2 {
                return Err(MeshError::NonManifold { v0: key.0, v1: key.1 });
            }
        }
    }

    let mut edges = Vec::with_capacity(edge_order.len());
    for (e, &(vmin, vmax)) in edge_order.iter().enumerate() {
        let inc = &incidences[e];
        let is_boundary = inc.len() == 1;
        // Interior: canonical v0 < v1. Boundary: the single cell's CCW
        // traversal direction, which is CCW with respect to the domain.
        let (v0, v1) = if is_boundary { (inc[0].1, inc[0].2) } else { (vmin, vmax) };
        let p0 = points[v0];
        let p1 = points[v1];
        let length = p0.dist(p1);
        let tangent = [(p1.x - p0.x) / length, (p1.y - p0.y) / length];
        let normal = geometry::rotate_minus_90(tangent);
        edges.push(Edge {
            v0,
            v1,
            cells: inc.iter().map(|&(c, _, _)| c).collect(),
            tangent,
            normal,
            length,
            midpoint: Point2::new(0.5 * (p0.x + p1.x), 0.5 * (p0.y + p1.y)),
            is_boundary,
        });
    }

    // Per-cell edge lists with sigma = +1 iff the cell traverses the edge in
    // the stored tangent direction.
    let mut cell_edges = vec![Vec::new(); cells.len()];
    for (c, cell) in cells.iter().enumerate() {
        let ids = &cell.vertex_ids;
        for i in 0..ids.len() {
            let a = ids[i];
            let b = ids[(i + 1) % ids.len()];
            let e = key_to_edge[&(a.min(b), a.max(b))];
            let sigma = if edges[e].v0 == a { 1.0 } else { -1.0 };
            cell_edges[c].push((e, sigma));
        }
    }

    let mut vertex_is_boundary = vec![false; n_v];
    let mut vertex_edges = vec![Vec::new(); n_v];
    for (e, edge) in edges.iter().enumerate() {
        vertex_edges[edge.v0].push(e);
        vertex_edges[edge.v1].push(e);
        if edge.is_boundary {
            vertex_is_boundary[edge.v0] = true;
            vertex_is_boundary[edge.v1] = true;
        }
    }
    let mut vertex_cells = vec![Vec::new(); n_v];
    for (c, cell) in cells.iter().enumerate() {
        for &v in &cell.vertex_ids {
            vertex_cells[v].push(c);
        }
    }

    let n_eb = edges.iter().filter(|e| e.is_boundary).count();
    let n_vb = vertex_is_boundary.iter().filter(|&&b| b).count();
    let counts = Counts {
        n_p: cells.len(),
        n_e: edges.len(),
        n_ei: edges.len() - n_eb,
        n_eb,
        n_v,
        n_vi: n_v - n_vb,
        n_vb,
    };
    let h = (0..cells.len())
        .map(|c| {
            let verts: Vec<Point2> = cells[c].vertex_ids.iter().map(|&v| points[v]).collect();
            geometry::diameter(&verts)
        })
        .fold(0.0, f64::max);

    Ok(Mesh {
        points,
        cells,
        edges,
        cell_edges,
        vertex_edges,
        vertex_cells,
        vertex_is_boundary,
        h,
        counts,
    })
}

/// Per-cell shape-regularity report: the worst ratio `min_e h_e / h_K`
/// against a threshold `rho`.
#[derive(Clone, Debug)]
pub struct RegularityReport {
    pub pass: bool,
    pub min_ratio: f64,
    pub worst_cell: usize,
    pub failing_cells: Vec<usize>,
}

/// Checks `h_e >= rho * h_K` on every cell (convexity, which implies
/// star-shapedness, is already enforced at construction).
pub fn validate_regularity(mesh: &Mesh, rho: f64) -> RegularityReport {
    let mut min_ratio = f64::INFINITY;
    let mut worst_cell = 0;
    let mut failing = Vec::new();
    for c in 0..mesh.cells.len() {
        let hk = mesh.cell_diameter(c);
        let mut cell_min = f64::INFINITY;
        for &(e, _) in &mesh.cell_edges[c] {
            cell_min = cell_min.min(mesh.edges[e].length / hk);
        }
        if cell_min < min_ratio {
            min_ratio = cell_min;
            worst_cell = c;
        }
        if cell_min < rho {
            failing.push(c);
        }
    }
    RegularityReport {
        pass: failing.is_empty(),
        min_ratio,
        worst_cell,
        failing_cells: failing,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square_mesh() -> Mesh {
        let points = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ];
        let cells = vec![Cell { vertex_ids: vec![0, 1, 2, 3] }];
        build_topology(points, cells).unwrap()
    }

    #[test]
    fn single_cell_counts() {
        let m = unit_square_mesh();
        assert_eq!(m.counts.n_p, 1);
        assert_eq!(m.counts.n_e, 4);
        assert_eq!(m.counts.n_ei, 0);
        assert_eq!(m.counts.n_vi, 0);
        assert!((m.h - 2.0_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn single_cell_boundary_orientation_is_ccw_outward() {
        let m = unit_square_mesh();
        for edge in &m.edges {
            assert!(edge.is_boundary);
            // Outward normal: midpoint + normal leaves the square.
            let probe = Point2::new(
                edge.midpoint.x + 0.25 * edge.normal[0],
                edge.midpoint.y + 0.25 * edge.normal[1],
            );
            let inside =
                probe.x > 0.0 && probe.x < 1.0 && probe.y > 0.0 && probe.y < 1.0;
            assert!(!inside);
        }
    }

    #[test]
    fn two_by_two_counts_and_euler() {
        let m = generate_uniform_square_mesh(2);
        assert_eq!(m.counts.n_p, 4);
        assert_eq!(m.counts.n_ei, 4);
        assert_eq!(m.counts.n_vi, 1);
        assert_eq!(
            m.counts.n_p as i64 - m.counts.n_ei as i64 + m.counts.n_vi as i64,
            1
        );
        assert_eq!(m.counts.n_vb, m.counts.n_eb);
    }

    #[test]
    fn four_by_four_matches_published_counts() {
        let m = generate_uniform_square_mesh(4);
        assert_eq!(
            (m.counts.n_p, m.counts.n_ei, m.counts.n_vi),
            (16, 24, 9)
        );
    }

    #[test]
    fn eight_by_eight_matches_published_counts() {
        let m = generate_uniform_square_mesh(8);
        assert_eq!(
            (m.counts.n_p, m.counts.n_ei, m.counts.n_vi),
            (64, 112, 49)
        );
    }

    #[test]
    fn interior_edge_sigma_partition() {
        let m = generate_uniform_square_mesh(4);
        let mut sums = vec![0.0; m.edges.len()];
        let mut touches = vec![0; m.edges.len()];
        for ce in &m.cell_edges {
            for &(e, sigma) in ce {
                sums[e] += sigma;
                touches[e] += 1;
            }
        }
        for (e, edge) in m.edges.iter().enumerate() {
            if edge.is_boundary {
                assert_eq!(touches[e], 1);
            } else {
                assert_eq!(touches[e], 2);
                assert_eq!(sums[e], 0.0); // one +1 and one -1
            }
        }
    }

    #[test]
    fn areas_tile_the_domain() {
        let m = generate_uniform_square_mesh(5);
        assert!((m.total_area() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn non_manifold_edge_is_rejected() {
        // Three triangles sharing the edge (0, 1).
        let points = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.5, 1.0),
            Point2::new(0.5, -1.0),
            Point2::new(0.6, 0.9),
        ];
        let cells = vec![
            Cell { vertex_ids: vec![0, 1, 2] },
            Cell { vertex_ids: vec![0, 3, 1] },
            Cell { vertex_ids: vec![0, 1, 4] },
        ];
        assert!(matches!(
            build_topology(points, cells),
            Err(MeshError::NonManifold { .. })
        ));
    }

    #[test]
    fn clockwise_cell_is_rejected() {
        let points = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ];
        let cells = vec![Cell { vertex_ids: vec![0, 3, 2, 1] }];
        assert!(matches!(
            build_topology(points, cells),
            Err(MeshError::Orientation { cell: 0 })
        ));
    }

    #[test]
    fn nonconvex_cell_is_rejected() {
        let points = vec![
            Point2::new(0.0, 0.0),
            Point2::new(2.0, 0.0),
            Point2::new(0.9, 0.1),
            Point2::new(0.0, 2.0),
        ];
        let cells = vec![Cell { vertex_ids: vec![0, 1, 2, 3] }];
        assert!(matches!(
            build_topology(points, cells),
            Err(MeshError::NonConvex { cell: 0 })
        ));
    }

    #[test]
    fn dangling_vertex_is_rejected() {
        let points = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
            Point2::new(5.0, 5.0),
        ];
        let cells = vec![Cell { vertex_ids: vec![0, 1, 2, 3] }];
        assert!(matches!(
            build_topology(points, cells),
            Err(MeshError::DanglingVertex(4))
        ));
    }

    #[test]
    fn regularity_uniform_mesh_passes_at_half() {
        let m = generate_uniform_square_mesh(4);
        let r = validate_regularity(&m, 0.5);
        assert!(r.pass);
        assert!((r.min_ratio - 1.0 / 2.0_f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn regularity_flags_short_edge() {
        // Quad with one very short edge relative to its diameter.
        let points = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.02, 1.0),
            Point2::new(0.0, 0.98),
        ];
        let cells = vec![Cell { vertex_ids: vec![0, 1, 2, 3, 4] }];
        let m = build_topology(points, cells).unwrap();
        let rho = 0.5;
        let r = validate_regularity(&m, rho);
        assert!(!r.pass);
        assert_eq!(r.failing_cells, vec![0]);
        assert!(r.min_ratio < rho);
    }

    #[test]
    fn boundary_loop_is_closed_and_ccw() {
        let m = generate_uniform_square_mesh(3);
        let (verts, edges) = m.boundary_loop();
        assert_eq!(verts.len(), m.counts.n_vb);
        assert_eq!(edges.len(), m.counts.n_eb);
        // CCW traversal of the square boundary encloses positive area.
        let poly: Vec<Point2> = verts.iter().map(|&v| m.points[v]).collect();
        assert!(crate::geometry::signed_area(&poly) > 0.0);
    }
}
