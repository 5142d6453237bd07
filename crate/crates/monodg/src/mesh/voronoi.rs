//! Clipped-Voronoi mesh generation with Lloyd relaxation. Each cell is cut
//! from the domain rectangle by the perpendicular-bisector half-planes of
//! nearby seeds; a uniform bucket grid keeps the candidate set small, and
//! cells are exact (no sampling) so the union tiles the domain.

use super::{MeshError, PolyMesh, RegionTag};
use crate::geometry::{clip_convex_by_halfplane, polygon_centroid, Rect, Vec2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Uniform bucket grid over the domain for nearest-seed candidate queries.
struct SeedGrid {
    origin: Vec2,
    cell: f64,
    nx: i64,
    ny: i64,
    buckets: Vec<Vec<usize>>,
}

impl SeedGrid {
    fn build(domain: Rect, seeds: &[Vec2]) -> Self {
        let n = seeds.len().max(1);
        // Aim for about one seed per bucket.
        let cell = (domain.area() / n as f64).sqrt().max(1e-12);
        let nx = (domain.width() / cell).ceil().max(1.0) as i64;
        let ny = (domain.height() / cell).ceil().max(1.0) as i64;
        let mut buckets = vec![Vec::new(); (nx * ny) as usize];
        let origin = Vec2::new(domain.x0, domain.y0);
        for (i, &s) in seeds.iter().enumerate() {
            let (bx, by) = Self::coords(origin, cell, nx, ny, s);
            buckets[(by * nx + bx) as usize].push(i);
        }
        SeedGrid {
            origin,
            cell,
            nx,
            ny,
            buckets,
        }
    }

    fn coords(origin: Vec2, cell: f64, nx: i64, ny: i64, p: Vec2) -> (i64, i64) {
        let bx = (((p.x - origin.x) / cell).floor() as i64).clamp(0, nx - 1);
        let by = (((p.y - origin.y) / cell).floor() as i64).clamp(0, ny - 1);
        (bx, by)
    }

    /// Seed indices in the Chebyshev ring at distance `r` around `center`.
    fn ring(&self, center: (i64, i64), r: i64, out: &mut Vec<usize>) {
        out.clear();
        let (cx, cy) = center;
        if r == 0 {
            if let Some(b) = self.bucket(cx, cy) {
                out.extend_from_slice(b);
            }
            return;
        }
        for dx in -r..=r {
            for dy in [-r, r] {
                if let Some(b) = self.bucket(cx + dx, cy + dy) {
                    out.extend_from_slice(b);
                }
            }
        }
        for dy in (-r + 1)..r {
            for dx in [-r, r] {
                if let Some(b) = self.bucket(cx + dx, cy + dy) {
                    out.extend_from_slice(b);
                }
            }
        }
    }

    fn bucket(&self, bx: i64, by: i64) -> Option<&Vec<usize>> {
        if bx < 0 || by < 0 || bx >= self.nx || by >= self.ny {
            None
        } else {
            Some(&self.buckets[(by * self.nx + bx) as usize])
        }
    }

    fn max_ring(&self) -> i64 {
        self.nx.max(self.ny)
    }
}

/// Exact clipped Voronoi cells of `seeds` in `domain`, in seed order.
pub fn clipped_voronoi_cells(domain: Rect, seeds: &[Vec2]) -> Vec<Vec<Vec2>> {
    let grid = SeedGrid::build(domain, seeds);
    let mut cells = Vec::with_capacity(seeds.len());
    let mut ring_buf: Vec<usize> = Vec::new();
    let mut sorted: Vec<(f64, usize)> = Vec::new();
    for (i, &si) in seeds.iter().enumerate() {
        let mut poly: Vec<Vec2> = domain.corners().to_vec();
        let mut reach = poly
            .iter()
            .map(|&p| p.dist(si))
            .fold(0.0, f64::max);
        let center = SeedGrid::coords(grid.origin, grid.cell, grid.nx, grid.ny, si);
        for r in 0..=grid.max_ring() {
            // Any seed in a farther ring is at least this far away; once
            // that exceeds twice the cell's reach it cannot cut the cell.
            if r > 1 && (r - 1) as f64 * grid.cell > 2.0 * reach {
                break;
            }
            grid.ring(center, r, &mut ring_buf);
            sorted.clear();
            for &j in &ring_buf {
                if j != i {
                    sorted.push((seeds[j].dist(si), j));
                }
            }
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for &(dist, j) in sorted.iter() {
                if dist > 2.0 * reach {
                    break;
                }
                let mid = (si + seeds[j]) * 0.5;
                let axis = seeds[j] - si;
                poly = clip_convex_by_halfplane(&poly, mid, axis);
                if poly.is_empty() {
                    break;
                }
                reach = poly.iter().map(|&p| p.dist(si)).fold(0.0, f64::max);
            }
            if poly.is_empty() {
                break;
            }
        }
        cells.push(poly);
    }
    cells
}

/// Sum of squared seed-to-centroid distances; Lloyd relaxation drives this
/// down monotonically.
pub fn lloyd_energy(domain: Rect, seeds: &[Vec2]) -> f64 {
    clipped_voronoi_cells(domain, seeds)
        .iter()
        .zip(seeds)
        .map(|(cell, &s)| {
            if cell.len() < 3 {
                0.0
            } else {
                (polygon_centroid(cell) - s).norm_sq()
            }
        })
        .sum()
}

/// Build the mesh of `seeds`' Voronoi cells after `lloyd_iters` centroid
/// relaxation sweeps. All elements start in a placeholder region; retag
/// afterwards for heterogeneous problems.
pub fn voronoi_mesh_from_seeds(
    domain: Rect,
    seeds: &[Vec2],
    lloyd_iters: usize,
) -> Result<PolyMesh, MeshError> {
    let mut seeds = seeds.to_vec();
    let mut cells = clipped_voronoi_cells(domain, &seeds);
    for _ in 0..lloyd_iters {
        for (s, cell) in seeds.iter_mut().zip(&cells) {
            if cell.len() >= 3 {
                *s = polygon_centroid(cell);
            }
        }
        cells = clipped_voronoi_cells(domain, &seeds);
    }
    let region = RegionTag::isotropic("domain", 1.0).expect("static tag is valid");
    let weld_tol = 1e-9 * (domain.width().hypot(domain.height()));
    PolyMesh::from_polygons(&cells, region, weld_tol)
}

/// Mesh a rectangle with `n` Lloyd-relaxed Voronoi cells from seeded uniform
/// random points. Deterministic for a fixed seed.
pub fn generate_voronoi_mesh(
    domain: Rect,
    n: usize,
    lloyd_iters: usize,
    seed: u64,
) -> Result<PolyMesh, MeshError> {
    assert!(n >= 1, "need at least one element");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let min_sep = 1e-12 * domain.width().hypot(domain.height());
    const RETRIES: usize = 16;
    for _ in 0..RETRIES {
        let seeds: Vec<Vec2> = (0..n)
            .map(|_| {
                Vec2::new(
                    rng.random_range(domain.x0..domain.x1),
                    rng.random_range(domain.y0..domain.y1),
                )
            })
            .collect();
        if min_pairwise_gap_below(&seeds, min_sep) {
            continue;
        }
        return voronoi_mesh_from_seeds(domain, &seeds, lloyd_iters);
    }
    Err(MeshError::DegenerateSeeds { n, retries: RETRIES })
}

fn min_pairwise_gap_below(seeds: &[Vec2], tol: f64) -> bool {
    // Grid check: coincident seeds land in the same or adjacent buckets.
    let mut sorted: Vec<Vec2> = seeds.to_vec();
    sorted.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    for w in sorted.windows(2) {
        if w[0].dist(w[1]) < tol {
            return true;
        }
    }
    false
}

/// Element count that yields max diameter close to `target_h` after about a
/// hundred Lloyd sweeps; calibrated on generated meshes.
pub fn element_count_for_target_h(domain: Rect, target_h: f64) -> usize {
    assert!(target_h > 0.0);
    const CAL: f64 = 2.60; // max h_K ≈ sqrt(CAL * mean cell area) empirically
    ((CAL * domain.area() / (target_h * target_h)).round() as usize).max(1)
}
