//! Deterministic mesh generators on the unit square: uniform square grids and
//! centroidal Voronoi tessellations (half-plane clipping plus Lloyd relaxation).

use super::{build_topology, Cell, Mesh, MeshError};
use crate::geometry::{self, Point2};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Distance below which clipped-cell corners are identified as one vertex.
const MERGE_TOL: f64 = 1e-9;
/// Retry budget for degenerate seed configurations.
const MAX_ATTEMPTS: usize = 5;

/// `n x n` axis-aligned squares of side `1/n` tiling `[0,1]^2`.
pub fn generate_uniform_square_mesh(n: usize) -> Mesh {
    assert!(n >= 1, "n must be positive");
    let nf = n as f64;
    let mut points = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            points.push(Point2::new(i as f64 / nf, j as f64 / nf));
        }
    }
    let vid = |i: usize, j: usize| j * (n + 1) + i;
    let mut cells = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            cells.push(Cell {
                vertex_ids: vec![vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)],
            });
        }
    }
    build_topology(points, cells).expect("uniform mesh construction cannot fail")
}

/// Clipped Voronoi diagram of `n_seeds` pseudo-random seeds in `[0,1]^2`
/// after `lloyd_iters` centroid relaxations. Bitwise deterministic for a
/// fixed `(n_seeds, lloyd_iters, rng_seed)` triple.
pub fn generate_voronoi_mesh(
    n_seeds: usize,
    lloyd_iters: usize,
    rng_seed: u64,
) -> Result<Mesh, MeshError> {
    assert!(n_seeds >= 1, "n_seeds must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut seeds: Vec<Point2> = (0..n_seeds)
        .map(|_| Point2::new(rng.gen::<f64>(), rng.gen::<f64>()))
        .collect();
    for attempt in 0..MAX_ATTEMPTS {
        match try_build(&seeds, lloyd_iters) {
            Ok(mesh) => return Ok(mesh),
            Err(_) if attempt + 1 < MAX_ATTEMPTS => {
                // Deterministic perturbation drawn from the same stream.
                for s in seeds.iter_mut() {
                    s.x = (s.x + rng.gen_range(-1e-6..1e-6)).clamp(1e-9, 1.0 - 1e-9);
                    s.y = (s.y + rng.gen_range(-1e-6..1e-6)).clamp(1e-9, 1.0 - 1e-9);
                }
            }
            Err(e) => return Err(e),
        }
    }
    Err(MeshError::DegenerateSeeds(format!(
        "{n_seeds} seeds, rng_seed {rng_seed}: retry budget exhausted"
    )))
}

fn try_build(seeds: &[Point2], lloyd_iters: usize) -> Result<Mesh, MeshError> {
    let mut seeds = seeds.to_vec();
    for _ in 0..lloyd_iters {
        let grid = SeedGrid::build(&seeds);
        let mut next = Vec::with_capacity(seeds.len());
        for i in 0..seeds.len() {
            let poly = voronoi_cell(&seeds, i, &grid)?;
            next.push(geometry::centroid(&poly));
        }
        seeds = next;
    }
    let grid = SeedGrid::build(&seeds);
    let mut polys = Vec::with_capacity(seeds.len());
    for i in 0..seeds.len() {
        polys.push(voronoi_cell(&seeds, i, &grid)?);
    }
    let (points, raw_cells) = merge_vertices(&polys);
    let (points, raw_cells) = simplify_collinear(points, raw_cells)?;
    let cells = raw_cells
        .into_iter()
        .map(|vertex_ids| Cell { vertex_ids })
        .collect();
    build_topology(points, cells)
}

struct SeedGrid {
    g: usize,
    buckets: Vec<Vec<usize>>,
}

impl SeedGrid {
    fn build(seeds: &[Point2]) -> Self {
        let g = (seeds.len() as f64).sqrt().ceil().max(1.0) as usize;
        let mut buckets = vec![Vec::new(); g * g];
        for (i, s) in seeds.iter().enumerate() {
            let (bx, by) = Self::bucket_of(g, *s);
            buckets[by * g + bx].push(i);
        }
        SeedGrid { g, buckets }
    }

    fn bucket_of(g: usize, p: Point2) -> (usize, usize) {
        let clamp = |v: f64| ((v * g as f64) as usize).min(g - 1);
        (clamp(p.x), clamp(p.y))
    }

    /// Seed ids in buckets at Chebyshev distance exactly `r` from `(cx, cy)`.
    fn ring(&self, cx: usize, cy: usize, r: usize, out: &mut Vec<usize>) {
        out.clear();
        let g = self.g as i64;
        let (cx, cy) = (cx as i64, cy as i64);
        let r = r as i64;
        for by in (cy - r).max(0)..=(cy + r).min(g - 1) {
            for bx in (cx - r).max(0)..=(cx + r).min(g - 1) {
                if (bx - cx).abs().max((by - cy).abs()) == r {
                    out.extend_from_slice(&self.buckets[(by * g + bx) as usize]);
                }
            }
        }
    }
}

/// Clip a convex polygon against the half-plane `(x - m) . d <= 0`.
fn clip_halfplane(poly: &[Point2], m: Point2, d: [f64; 2]) -> Vec<Point2> {
    let side = |p: Point2| (p.x - m.x) * d[0] + (p.y - m.y) * d[1];
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        let sp = side(p);
        let sq = side(q);
        if sp <= 0.0 {
            out.push(p);
        }
        if (sp < 0.0) != (sq < 0.0) && sp != sq {
            let t = sp / (sp - sq);
            if t > 0.0 && t < 1.0 {
                out.push(Point2::new(p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)));
            }
        }
    }
    // Drop consecutive near-duplicates produced by vertices on the clip line.
    let mut dedup: Vec<Point2> = Vec::with_capacity(out.len());
    for p in out {
        if dedup.last().is_none_or(|l| l.dist2(p) > 1e-28) {
            dedup.push(p);
        }
    }
    while dedup.len() > 1 && dedup[0].dist2(*dedup.last().unwrap()) <= 1e-28 {
        dedup.pop();
    }
    dedup
}

/// The Voronoi cell of seed `i` clipped to the unit square. Neighbor seeds
/// are visited grid-ring by grid-ring, nearest first; the search stops once
/// every remaining bisector is farther than the current cell radius.
fn voronoi_cell(seeds: &[Point2], i: usize, grid: &SeedGrid) -> Result<Vec<Point2>, MeshError> {
    let si = seeds[i];
    let mut poly = vec![
        Point2::new(0.0, 0.0),
        Point2::new(1.0, 0.0),
        Point2::new(1.0, 1.0),
        Point2::new(0.0, 1.0),
    ];
    let max_d2 = |poly: &[Point2]| {
        poly.iter()
            .map(|p| p.dist2(si))
            .fold(0.0_f64, f64::max)
    };
    let mut radius2 = max_d2(&poly);
    let cs = 1.0 / grid.g as f64;
    let (cx, cy) = SeedGrid::bucket_of(grid.g, si);
    let mut ring = Vec::new();
    let mut candidates: Vec<(f64, usize)> = Vec::new();
    for r in 0..=grid.g {
        if r >= 2 {
            let lower = (r - 1) as f64 * cs;
            if lower * lower > 4.0 * radius2 {
                break;
            }
        }
        grid.ring(cx, cy, r, &mut ring);
        candidates.clear();
        for &j in &ring {
            if j != i {
                candidates.push((si.dist2(seeds[j]), j));
            }
        }
        candidates.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        for &(d2, j) in &candidates {
            if d2 == 0.0 {
                return Err(MeshError::DegenerateSeeds(format!(
                    "coincident seeds {i} and {j}"
                )));
            }
            if d2 >= 4.0 * radius2 {
                continue;
            }
            let sj = seeds[j];
            let mid = Point2::new(0.5 * (si.x + sj.x), 0.5 * (si.y + sj.y));
            poly = clip_halfplane(&poly, mid, [sj.x - si.x, sj.y - si.y]);
            if poly.len() < 3 {
                return Err(MeshError::DegenerateSeeds(format!(
                    "cell of seed {i} collapsed"
                )));
            }
            radius2 = max_d2(&poly);
        }
    }
    Ok(poly)
}

/// Identifies vertices shared between clipped cells (within `MERGE_TOL`) and
/// returns a global point list plus per-cell vertex-id polygons.
fn merge_vertices(polys: &[Vec<Point2>]) -> (Vec<Point2>, Vec<Vec<usize>>) {
    let flat: Vec<Point2> = polys.iter().flatten().copied().collect();
    let n = flat.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| flat[a].x.partial_cmp(&flat[b].x).unwrap().then(a.cmp(&b)));
    for w in 0..n {
        let i = order[w];
        let mut v = w;
        while v > 0 {
            v -= 1;
            let j = order[v];
            if flat[i].x - flat[j].x > MERGE_TOL {
                break;
            }
            if flat[i].dist2(flat[j]) <= MERGE_TOL * MERGE_TOL {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    // Keep the smaller flat index as representative.
                    let (lo, hi) = (ri.min(rj), ri.max(rj));
                    parent[hi] = lo;
                }
            }
        }
    }
    // Assign compact ids in first-appearance order.
    let mut id_of_root: Vec<Option<usize>> = vec![None; n];
    let mut points = Vec::new();
    let mut cells = Vec::with_capacity(polys.len());
    let mut flat_idx = 0;
    for poly in polys {
        let mut ids = Vec::with_capacity(poly.len());
        for _ in poly {
            let root = find(&mut parent, flat_idx);
            let id = *id_of_root[root].get_or_insert_with(|| {
                points.push(flat[root]);
                points.len() - 1
            });
            ids.push(id);
            flat_idx += 1;
        }
        // Collapse edges shortened to zero by the merge.
        let mut dedup: Vec<usize> = Vec::with_capacity(ids.len());
        for id in ids {
            if dedup.last() != Some(&id) {
                dedup.push(id);
            }
        }
        while dedup.len() > 1 && dedup.first() == dedup.last() {
            dedup.pop();
        }
        cells.push(dedup);
    }
    (points, cells)
}

/// Removes vertices that every incident cell sees as collinear (within the
/// convexity tolerance), then drops unused points and reindexes.
fn simplify_collinear(
    points: Vec<Point2>,
    mut cells: Vec<Vec<usize>>,
) -> Result<(Vec<Point2>, Vec<Vec<usize>>), MeshError> {
    loop {
        let mut collinear_everywhere = vec![true; points.len()];
        let mut seen = vec![false; points.len()];
        for ids in &cells {
            let hk = geometry::diameter(&ids.iter().map(|&v| points[v]).collect::<Vec<_>>());
            let tol = super::CONVEXITY_TOL * hk * hk;
            let m = ids.len();
            for p in 0..m {
                let v = ids[p];
                seen[v] = true;
                let prev = points[ids[(p + m - 1) % m]];
                let next = points[ids[(p + 1) % m]];
                if geometry::cross(prev, points[v], next).abs() > tol {
                    collinear_everywhere[v] = false;
                }
            }
        }
        // Independent set: skip vertices adjacent to an earlier removal.
        let mut remove = vec![false; points.len()];
        let mut blocked = vec![false; points.len()];
        for ids in &cells {
            let m = ids.len();
            for p in 0..m {
                let v = ids[p];
                if seen[v] && collinear_everywhere[v] && !blocked[v] && !remove[v] {
                    remove[v] = true;
                    blocked[ids[(p + m - 1) % m]] = true;
                    blocked[ids[(p + 1) % m]] = true;
                }
            }
        }
        if !remove.iter().any(|&r| r) {
            break;
        }
        for ids in cells.iter_mut() {
            ids.retain(|&v| !remove[v]);
            if ids.len() < 3 {
                return Err(MeshError::DegenerateSeeds(
                    "cell degenerated during collinear simplification".into(),
                ));
            }
        }
    }
    // Reindex to drop unused points.
    let mut new_id = vec![usize::MAX; points.len()];
    let mut new_points = Vec::new();
    for ids in cells.iter_mut() {
        for v in ids.iter_mut() {
            if new_id[*v] == usize::MAX {
                new_id[*v] = new_points.len();
                new_points.push(points[*v]);
            }
            *v = new_id[*v];
        }
    }
    Ok((new_points, cells))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_one_cell() {
        let m = generate_uniform_square_mesh(1);
        assert_eq!(m.counts.n_p, 1);
        assert_eq!(m.counts.n_ei, 0);
        assert_eq!(m.counts.n_vi, 0);
    }

    #[test]
    fn uniform_h_is_cell_diameter() {
        let m = generate_uniform_square_mesh(4);
        assert!((m.h - 2.0_f64.sqrt() / 4.0).abs() < 1e-15);
    }

    #[test]
    fn voronoi_single_seed_is_unit_square() {
        let m = generate_voronoi_mesh(1, 0, 7).unwrap();
        assert_eq!(m.counts.n_p, 1);
        assert_eq!(m.counts.n_v, 4);
        assert!((m.total_area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn voronoi_16_seeds_is_valid_and_convex() {
        let m = generate_voronoi_mesh(16, 100, 42).unwrap();
        assert_eq!(m.counts.n_p, 16);
        assert_eq!(
            m.counts.n_p as i64 - m.counts.n_ei as i64 + m.counts.n_vi as i64,
            1
        );
        assert_eq!(m.counts.n_vb, m.counts.n_eb);
        assert!((m.total_area() - 1.0).abs() < 1e-10);
        // Golden topology of this deterministic mesh, recorded from the
        // first run.
        assert_eq!((m.counts.n_ei, m.counts.n_vi), (33, 18));
        let r = super::super::validate_regularity(&m, 0.1);
        assert!(r.pass);
        assert!((r.min_ratio - 0.140009742435811).abs() < 1e-12);
    }

    #[test]
    fn voronoi_64_seeds_euler() {
        let m = generate_voronoi_mesh(64, 100, 0).unwrap();
        assert_eq!(m.counts.n_p, 64);
        assert_eq!(
            m.counts.n_p as i64 - m.counts.n_ei as i64 + m.counts.n_vi as i64,
            1
        );
    }

    #[test]
    fn voronoi_is_bitwise_deterministic() {
        let a = generate_voronoi_mesh(24, 30, 9).unwrap();
        let b = generate_voronoi_mesh(24, 30, 9).unwrap();
        assert_eq!(a.points.len(), b.points.len());
        for (p, q) in a.points.iter().zip(&b.points) {
            assert_eq!(p.x.to_bits(), q.x.to_bits());
            assert_eq!(p.y.to_bits(), q.y.to_bits());
        }
        for (c, d) in a.cells.iter().zip(&b.cells) {
            assert_eq!(c.vertex_ids, d.vertex_ids);
        }
    }

    #[test]
    fn clip_squares_halfplane() {
        let sq = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ];
        // Keep x <= 0.5.
        let half = clip_halfplane(&sq, Point2::new(0.5, 0.5), [1.0, 0.0]);
        assert_eq!(half.len(), 4);
        assert!((geometry::signed_area(&half) - 0.5).abs() < 1e-15);
    }
}
