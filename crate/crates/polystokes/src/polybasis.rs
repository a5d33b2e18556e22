//! Scaled monomial bases on cells and edges, exact polygon quadrature, and
//! the gradient/complement splitting of vector polynomials.
//!
//! Cell monomials are `m_alpha(x) = ((x - x_K)/h_K)^alpha` with `x_K` the area
//! centroid and `h_K` the diameter; edge monomials are `q_j(s) = s^j` in the
//! scaled arclength coordinate `s = (x - x_e) . t_e / h_e in [-1/2, 1/2]`.
//! Enumeration is graded lexicographic: 1, x, y, x^2, xy, y^2, ...

use crate::geometry::{self, Point2};
use nalgebra::{DMatrix, DVector};

/// A bivariate exponent pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MultiIndex {
    pub ax: u32,
    pub ay: u32,
}

impl MultiIndex {
    pub fn degree(self) -> u32 {
        self.ax + self.ay
    }
}

/// Number of bivariate monomials of degree <= deg.
pub fn n_monomials(deg: usize) -> usize {
    (deg + 1) * (deg + 2) / 2
}

/// Graded lexicographic enumeration of multi-indices up to `deg`.
pub fn monomials_up_to(deg: usize) -> Vec<MultiIndex> {
    let mut out = Vec::with_capacity(n_monomials(deg));
    for d in 0..=deg as u32 {
        for ay in 0..=d {
            out.push(MultiIndex { ax: d - ay, ay });
        }
    }
    out
}

/// Position of `(ax, ay)` in the graded lexicographic order.
pub fn monomial_index(ax: u32, ay: u32) -> usize {
    let d = (ax + ay) as usize;
    d * (d + 1) / 2 + ay as usize
}

/// Scaled monomial basis of a cell.
#[derive(Clone, Debug)]
pub struct CellBasis {
    pub centroid: Point2,
    pub diameter: f64,
    pub degree: usize,
    pub mons: Vec<MultiIndex>,
}

impl CellBasis {
    pub fn from_polygon(verts: &[Point2], degree: usize) -> Self {
        CellBasis {
            centroid: geometry::centroid(verts),
            diameter: geometry::diameter(verts),
            degree,
            mons: monomials_up_to(degree),
        }
    }

    pub fn len(&self) -> usize {
        self.mons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mons.is_empty()
    }

    fn local(&self, p: Point2) -> (f64, f64) {
        (
            (p.x - self.centroid.x) / self.diameter,
            (p.y - self.centroid.y) / self.diameter,
        )
    }

    pub fn eval(&self, idx: usize, p: Point2) -> f64 {
        let a = self.mons[idx];
        let (xi, eta) = self.local(p);
        xi.powi(a.ax as i32) * eta.powi(a.ay as i32)
    }

    pub fn grad(&self, idx: usize, p: Point2) -> [f64; 2] {
        let a = self.mons[idx];
        let (xi, eta) = self.local(p);
        let gx = if a.ax == 0 {
            0.0
        } else {
            a.ax as f64 * xi.powi(a.ax as i32 - 1) * eta.powi(a.ay as i32) / self.diameter
        };
        let gy = if a.ay == 0 {
            0.0
        } else {
            a.ay as f64 * xi.powi(a.ax as i32) * eta.powi(a.ay as i32 - 1) / self.diameter
        };
        [gx, gy]
    }

    /// Exact expansion of `Delta m_alpha` in lower-degree scaled monomials:
    /// returns `(index, coefficient)` pairs with the `1/h_K^2` factor included.
    pub fn laplacian_coeffs(&self, idx: usize) -> Vec<(usize, f64)> {
        let a = self.mons[idx];
        let h2 = self.diameter * self.diameter;
        let mut out = Vec::new();
        if a.ax >= 2 {
            out.push((
                monomial_index(a.ax - 2, a.ay),
                (a.ax * (a.ax - 1)) as f64 / h2,
            ));
        }
        if a.ay >= 2 {
            out.push((
                monomial_index(a.ax, a.ay - 2),
                (a.ay * (a.ay - 1)) as f64 / h2,
            ));
        }
        out
    }

    /// Partial derivative of a polynomial given by monomial coefficients,
    /// as coefficients of one degree lower (same graded-lex indexing).
    pub fn poly_partial(&self, coeffs: &[f64], axis: usize) -> Vec<f64> {
        let mut out = vec![0.0; coeffs.len()];
        for (i, &c) in coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let a = self.mons[i];
            if axis == 0 && a.ax > 0 {
                out[monomial_index(a.ax - 1, a.ay)] += c * a.ax as f64 / self.diameter;
            } else if axis == 1 && a.ay > 0 {
                out[monomial_index(a.ax, a.ay - 1)] += c * a.ay as f64 / self.diameter;
            }
        }
        out
    }

    pub fn eval_poly(&self, coeffs: &[f64], p: Point2) -> f64 {
        coeffs
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0.0)
            .map(|(i, &c)| c * self.eval(i, p))
            .sum()
    }
}

/// Scaled monomial basis of an edge, in its global orientation.
#[derive(Clone, Debug)]
pub struct EdgeBasis {
    pub midpoint: Point2,
    pub tangent: [f64; 2],
    pub length: f64,
    pub degree: usize,
}

impl EdgeBasis {
    pub fn from_endpoints(p0: Point2, p1: Point2, degree: usize) -> Self {
        let length = p0.dist(p1);
        EdgeBasis {
            midpoint: Point2::new(0.5 * (p0.x + p1.x), 0.5 * (p0.y + p1.y)),
            tangent: [(p1.x - p0.x) / length, (p1.y - p0.y) / length],
            length,
            degree,
        }
    }

    pub fn len(&self) -> usize {
        self.degree + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Scaled arclength coordinate of a point on the edge, in [-1/2, 1/2].
    pub fn param(&self, p: Point2) -> f64 {
        ((p.x - self.midpoint.x) * self.tangent[0] + (p.y - self.midpoint.y) * self.tangent[1])
            / self.length
    }

    pub fn point_at(&self, s: f64) -> Point2 {
        Point2::new(
            self.midpoint.x + s * self.length * self.tangent[0],
            self.midpoint.y + s * self.length * self.tangent[1],
        )
    }

    pub fn eval(&self, j: usize, p: Point2) -> f64 {
        self.param(p).powi(j as i32)
    }

    /// Exact `int_e q_j ds`.
    pub fn integrate_monomial(&self, j: usize) -> f64 {
        if j % 2 == 1 {
            0.0
        } else {
            self.length * 0.5_f64.powi(j as i32) / (j as f64 + 1.0)
        }
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1] (Newton iteration on the
/// Legendre recurrence; deterministic).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature needs at least one point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j as f64 + 1.0) * z * p1 - j as f64 * p2) / (j as f64 + 1.0);
            }
            pp = nf * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / pp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Gauss rule on an edge: `n_points` points with weights summing to `|e|`;
/// exact for polynomials of degree `2 n_points - 1` along the edge.
pub fn gauss_edge(edge: &EdgeBasis, n_points: usize) -> (Vec<Point2>, Vec<f64>) {
    let (t, w) = gauss_legendre(n_points);
    let pts = t.iter().map(|&ti| edge.point_at(0.5 * ti)).collect();
    let wts = w.iter().map(|&wi| 0.5 * wi * edge.length).collect();
    (pts, wts)
}

/// Quadrature on a convex polygon with exactness at least `order`: fan
/// triangulation from the centroid, collapsed tensor Gauss rule per triangle.
/// Weights sum to the polygon area.
pub fn gauss_cell(verts: &[Point2], order: usize) -> (Vec<Point2>, Vec<f64>) {
    let c = geometry::centroid(verts);
    let n_u = (order + 2).div_ceil(2); // 2 n_u - 1 >= order + 1 (Jacobian raises the u-degree)
    let n_v = (order + 1).div_ceil(2); // 2 n_v - 1 >= order
    let (tu, wu) = gauss_legendre(n_u.max(1));
    let (tv, wv) = gauss_legendre(n_v.max(1));
    let mut pts = Vec::new();
    let mut wts = Vec::new();
    let n = verts.len();
    for i in 0..n {
        let a = verts[i];
        let b = verts[(i + 1) % n];
        // x(u, v) = c + u (a - c) + u v (b - a) over the unit square.
        let jac = (a.x - c.x) * (b.y - a.y) - (a.y - c.y) * (b.x - a.x);
        for (ui, wui) in tu.iter().zip(&wu) {
            let u = 0.5 * (ui + 1.0);
            for (vi, wvi) in tv.iter().zip(&wv) {
                let v = 0.5 * (vi + 1.0);
                pts.push(Point2::new(
                    c.x + u * (a.x - c.x) + u * v * (b.x - a.x),
                    c.y + u * (a.y - c.y) + u * v * (b.y - a.y),
                ));
                wts.push(0.25 * wui * wvi * u * jac);
            }
        }
    }
    (pts, wts)
}

/// Exact integral of one scaled monomial over a convex polygon.
pub fn integrate_monomial_cell(verts: &[Point2], basis: &CellBasis, idx: usize) -> f64 {
    let deg = basis.mons[idx].degree() as usize;
    let (pts, wts) = gauss_cell(verts, deg);
    pts.iter()
        .zip(&wts)
        .map(|(p, w)| w * basis.eval(idx, *p))
        .sum()
}

/// Cache of `int_K m_gamma dx` for all `|gamma| <= deg`.
#[derive(Clone, Debug)]
pub struct CellMoments {
    pub deg: usize,
    pub values: Vec<f64>,
}

impl CellMoments {
    pub fn compute(verts: &[Point2], basis: &CellBasis, deg: usize) -> Self {
        let mons = monomials_up_to(deg);
        let (pts, wts) = gauss_cell(verts, deg);
        let mut values = vec![0.0; mons.len()];
        for (p, w) in pts.iter().zip(&wts) {
            let (xi, eta) = (
                (p.x - basis.centroid.x) / basis.diameter,
                (p.y - basis.centroid.y) / basis.diameter,
            );
            for (i, m) in mons.iter().enumerate() {
                values[i] += w * xi.powi(m.ax as i32) * eta.powi(m.ay as i32);
            }
        }
        CellMoments { deg, values }
    }

    /// `int_K m_{(ax,ay)} dx`.
    pub fn get(&self, ax: u32, ay: u32) -> f64 {
        debug_assert!((ax + ay) as usize <= self.deg);
        self.values[monomial_index(ax, ay)]
    }

    /// `int_K m_alpha m_beta dx` (the product of scaled monomials on the same
    /// cell is the scaled monomial of the summed exponents).
    pub fn product(&self, a: MultiIndex, b: MultiIndex) -> f64 {
        self.get(a.ax + b.ax, a.ay + b.ay)
    }
}

/// Exact integral of `m_alpha m_beta` over the cell (monomial mass entries).
pub fn integrate_poly_product_cell(
    verts: &[Point2],
    basis: &CellBasis,
    a: usize,
    b: usize,
) -> f64 {
    let (ma, mb) = (basis.mons[a], basis.mons[b]);
    let deg = (ma.degree() + mb.degree()) as usize;
    let moments = CellMoments::compute(verts, basis, deg);
    moments.product(ma, mb)
}

/// Coefficients of a function sampled on an edge in the edge monomial basis
/// `{q_0, ..., q_deg}` (Chebyshev samples, Vandermonde solve). Exact for
/// polynomial traces of degree <= `deg`.
pub fn fit_edge_poly<F: Fn(Point2) -> f64>(edge: &EdgeBasis, deg: usize, f: F) -> Vec<f64> {
    let n = deg + 1;
    let mut v = DMatrix::zeros(n, n);
    let mut rhs = DVector::zeros(n);
    for i in 0..n {
        let s = 0.5 * (std::f64::consts::PI * (2 * i + 1) as f64 / (2.0 * n as f64)).cos();
        for j in 0..n {
            v[(i, j)] = s.powi(j as i32);
        }
        rhs[i] = f(edge.point_at(s));
    }
    let sol = v.lu().solve(&rhs).expect("Vandermonde solve failed");
    sol.iter().copied().collect()
}

/// Coefficients of the trace `m_alpha|_e` in `M_{deg}(e)`.
pub fn restrict_cell_poly_to_edge(
    cell: &CellBasis,
    alpha: usize,
    edge: &EdgeBasis,
    deg: usize,
) -> Vec<f64> {
    fit_edge_poly(edge, deg, |p| cell.eval(alpha, p))
}

/// The splitting of `P_{k-2}(K)^2` into gradients of scaled monomials and the
/// scaled rotational complement:
/// `P_{k-2}^2 = grad M_{k-1}(K)\{1}  (+)  x_perp M_{k-3}(K)`
/// with `x_perp = (eta, -xi)` in centered, h_K-scaled coordinates.
///
/// Members double as the test functions of the cell moment DOFs. Coefficient
/// vectors over `P_{k-2}^2` are stacked `[x-component; y-component]` in the
/// graded-lex monomial order of `M_{k-2}`.
#[derive(Clone, Debug)]
pub struct VectorPolySplit {
    pub k: usize,
    pub n_grad: usize,
    pub n_perp: usize,
    /// Per member and component: sparse monomial coefficients over `M_{k-2}`.
    pub members: Vec<[Vec<(usize, f64)>; 2]>,
    lu: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

impl VectorPolySplit {
    pub fn new(cell: &CellBasis, k: usize) -> Self {
        assert!(k >= 1);
        let h = cell.diameter;
        let n_grad = n_monomials(k - 1) - 1;
        let n_perp = if k >= 3 { n_monomials(k - 3) } else { 0 };
        let mut members = Vec::with_capacity(n_grad + n_perp);
        for m in monomials_up_to(k - 1).into_iter().skip(1) {
            let mut cx = Vec::new();
            let mut cy = Vec::new();
            if m.ax > 0 {
                cx.push((monomial_index(m.ax - 1, m.ay), m.ax as f64 / h));
            }
            if m.ay > 0 {
                cy.push((monomial_index(m.ax, m.ay - 1), m.ay as f64 / h));
            }
            members.push([cx, cy]);
        }
        if k >= 3 {
            for m in monomials_up_to(k - 3) {
                members.push([
                    vec![(monomial_index(m.ax, m.ay + 1), 1.0)],
                    vec![(monomial_index(m.ax + 1, m.ay), -1.0)],
                ]);
            }
        }
        let dim = n_grad + n_perp;
        let lu = if dim > 0 {
            let nm = n_monomials(k - 2);
            debug_assert_eq!(2 * nm, dim);
            let mut s = DMatrix::zeros(dim, dim);
            for (col, member) in members.iter().enumerate() {
                for (comp, list) in member.iter().enumerate() {
                    for &(idx, c) in list {
                        s[(comp * nm + idx, col)] = c;
                    }
                }
            }
            Some(s.lu())
        } else {
            None
        };
        VectorPolySplit {
            k,
            n_grad,
            n_perp,
            members,
            lu,
        }
    }

    pub fn len(&self) -> usize {
        self.n_grad + self.n_perp
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Expands a vector polynomial of degree <= k-2 (stacked monomial
    /// coefficients over `M_{k-2}`) in the split members.
    pub fn expand(&self, stacked: &DVector<f64>) -> DVector<f64> {
        match &self.lu {
            None => DVector::zeros(0),
            Some(lu) => lu.solve(stacked).expect("split basis is nonsingular"),
        }
    }

    /// Evaluates member `j` at a point.
    pub fn eval_member(&self, cell: &CellBasis, j: usize, p: Point2) -> [f64; 2] {
        let mut out = [0.0, 0.0];
        for (comp, list) in self.members[j].iter().enumerate() {
            for &(idx, c) in list {
                out[comp] += c * cell.eval(idx, p);
            }
        }
        out
    }
}
