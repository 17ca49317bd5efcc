//! Convex decomposition of the occupancy grid and the halfplane constraints
//! derived from it.

use super::grid::OccupancyGrid;
use crate::error::{Error, Result};
use crate::geometry::Point;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// Minimum ratio of occupied area to hull area for a piece to count as convex.
const MIN_FILL: f64 = 0.9;

/// Halfplane `normal · p ≤ offset`, the free side being the one containing
/// the vessel when the constraint was built.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraint {
    /// Unit normal pointing from the vessel toward the obstacle.
    pub normal: Point,
    pub offset: f64,
}

impl LinearConstraint {
    /// Builds the separating halfplane through `closest` with normal along
    /// `closest − from`. Returns `None` if the two points coincide.
    pub fn separating(from: &Point, closest: &Point) -> Option<Self> {
        let d = closest - from;
        let n = d.norm();
        (n > 0.0).then(|| {
            let normal = d / n;
            LinearConstraint {
                normal,
                offset: normal.dot(closest),
            }
        })
    }
}

/// `A·p − b + r_disc + δ`; the disc is clear of the halfplane iff this is ≤ 0.
pub fn static_constraint_residual(c: &LinearConstraint, p: &Point, r_disc: f64, delta: f64) -> f64 {
    c.normal.dot(p) - c.offset + r_disc + delta
}

/// A group of occupied cells whose convex hull is (nearly) filled.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPiece {
    /// Counter-clockwise hull of the cell squares.
    pub hull: Vec<Point>,
    cells: Vec<(usize, usize)>,
}

impl ConvexPiece {
    pub fn cells(&self) -> &[(usize, usize)] {
        &self.cells
    }

    fn contains(&self, p: &Point) -> bool {
        let n = self.hull.len();
        (0..n).all(|i| {
            let (a, b) = (self.hull[i], self.hull[(i + 1) % n]);
            cross(&(b - a), &(p - a)) >= 0.0
        })
    }

    /// Closest point of the piece to `p`, which must lie outside the grid
    /// cells. Falls back to the nearest cell square when `p` is inside the hull.
    fn closest_point(&self, grid: &OccupancyGrid, p: &Point) -> Point {
        if self.contains(p) {
            return self
                .cells
                .iter()
                .map(|&(ix, iy)| grid.closest_point_in_cell(ix, iy, p))
                .min_by(|a, b| (a - p).norm_squared().total_cmp(&(b - p).norm_squared()))
                .expect("pieces are non-empty");
        }
        let n = self.hull.len();
        (0..n)
            .map(|i| closest_on_segment(&self.hull[i], &self.hull[(i + 1) % n], p))
            .min_by(|a, b| (a - p).norm_squared().total_cmp(&(b - p).norm_squared()))
            .expect("hull has at least three vertices")
    }
}

/// Occupancy grid with its convex decomposition, built once per map.
#[derive(Debug, Clone)]
pub struct StaticMap {
    grid: OccupancyGrid,
    pieces: Vec<ConvexPiece>,
}

impl StaticMap {
    pub fn new(grid: OccupancyGrid) -> Self {
        let pieces = decompose(&grid);
        Self { grid, pieces }
    }

    pub fn grid(&self) -> &OccupancyGrid {
        &self.grid
    }

    pub fn pieces(&self) -> &[ConvexPiece] {
        &self.pieces
    }

    /// Separating halfplanes toward the `max_constraints` nearest convex
    /// pieces, ordered by distance.
    pub fn constraints_for(&self, disc_position: &Point, max_constraints: usize) -> Result<Vec<LinearConstraint>> {
        let p = disc_position;
        match self.grid.occupied_at(p) {
            None => return Err(Error::OutOfBounds { x: p.x, y: p.y }),
            Some(true) => return Err(Error::InCollision { x: p.x, y: p.y }),
            Some(false) => {}
        }
        let mut nearest: Vec<(f64, usize, Point)> = self
            .pieces
            .iter()
            .enumerate()
            .map(|(i, piece)| {
                let q = piece.closest_point(&self.grid, p);
                ((q - p).norm_squared(), i, q)
            })
            .collect();
        nearest.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        Ok(nearest
            .into_iter()
            .take(max_constraints)
            .filter_map(|(_, _, q)| LinearConstraint::separating(p, &q))
            .collect())
    }
}

/// Convenience wrapper that decomposes `grid` on every call.
pub fn static_constraints_for(
    grid: &OccupancyGrid,
    disc_position: &Point,
    max_constraints: usize,
) -> Result<Vec<LinearConstraint>> {
    StaticMap::new(grid.clone()).constraints_for(disc_position, max_constraints)
}

fn cross(a: &Point, b: &Point) -> f64 {
    a.x * b.y - a.y * b.x
}

fn closest_on_segment(a: &Point, b: &Point, p: &Point) -> Point {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return *a;
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    a + ab * t
}

/// Andrew's monotone chain; returns the hull counter-clockwise without
/// repeating the first vertex.
fn convex_hull(mut pts: Vec<Point>) -> Vec<Point> {
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<Point> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && cross(&(lower[lower.len() - 1] - lower[lower.len() - 2]), &(p - lower[lower.len() - 2])) <= 0.0 {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<Point> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && cross(&(upper[upper.len() - 1] - upper[upper.len() - 2]), &(p - upper[upper.len() - 2])) <= 0.0 {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn polygon_area(hull: &[Point]) -> f64 {
    let n = hull.len();
    0.5 * (0..n).map(|i| cross(&hull[i], &hull[(i + 1) % n])).sum::<f64>()
}

/// Hull over the corners of the extreme cells of each row.
fn cell_hull(grid: &OccupancyGrid, cells: &[(usize, usize)]) -> Vec<Point> {
    let mut rows: std::collections::BTreeMap<usize, (usize, usize)> = Default::default();
    for &(ix, iy) in cells {
        let e = rows.entry(iy).or_insert((ix, ix));
        e.0 = e.0.min(ix);
        e.1 = e.1.max(ix);
    }
    let mut corners = Vec::with_capacity(rows.len() * 4);
    for (&iy, &(x0, x1)) in &rows {
        let (lo, _) = grid.cell_bounds(x0, iy);
        let (_, hi) = grid.cell_bounds(x1, iy);
        corners.extend([lo, Point::new(hi.x, lo.y), hi, Point::new(lo.x, hi.y)]);
    }
    convex_hull(corners)
}

/// 8-connected components among `cells`.
fn components(cells: &[(usize, usize)]) -> Vec<Vec<(usize, usize)>> {
    let set: std::collections::HashSet<(usize, usize)> = cells.iter().copied().collect();
    let mut seen: std::collections::HashSet<(usize, usize)> = Default::default();
    let mut out = Vec::new();
    for &start in cells {
        if !seen.insert(start) {
            continue;
        }
        let mut comp = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some((x, y)) = queue.pop_front() {
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if nx < 0 || ny < 0 {
                        continue;
                    }
                    let n = (nx as usize, ny as usize);
                    if set.contains(&n) && seen.insert(n) {
                        comp.push(n);
                        queue.push_back(n);
                    }
                }
            }
        }
        comp.sort_by_key(|&(x, y)| (y, x));
        out.push(comp);
    }
    out
}

/// Connected components of the occupied cells, bisected along their longer
/// axis until each piece fills its convex hull.
fn decompose(grid: &OccupancyGrid) -> Vec<ConvexPiece> {
    let occupied: Vec<(usize, usize)> = (0..grid.height())
        .flat_map(|iy| (0..grid.width()).map(move |ix| (ix, iy)))
        .filter(|&(ix, iy)| grid.is_occupied(ix, iy))
        .collect();
    let mut pieces = Vec::new();
    let mut stack: Vec<Vec<(usize, usize)>> = components(&occupied);
    stack.reverse();
    while let Some(cells) = stack.pop() {
        let hull = cell_hull(grid, &cells);
        let cell_area = cells.len() as f64 * grid.resolution() * grid.resolution();
        let fill = cell_area / polygon_area(&hull);
        if fill >= MIN_FILL || cells.len() <= 2 {
            pieces.push(ConvexPiece { hull, cells });
            continue;
        }
        let (xmin, xmax) = cells.iter().fold((usize::MAX, 0), |(a, b), c| (a.min(c.0), b.max(c.0)));
        let (ymin, ymax) = cells.iter().fold((usize::MAX, 0), |(a, b), c| (a.min(c.1), b.max(c.1)));
        let (left, right): (Vec<_>, Vec<_>) = if xmax - xmin >= ymax - ymin {
            let mid = (xmin + xmax).div_ceil(2);
            cells.iter().partition(|c| c.0 < mid)
        } else {
            let mid = (ymin + ymax).div_ceil(2);
            cells.iter().partition(|c| c.1 < mid)
        };
        let mut parts = components(&left);
        parts.extend(components(&right));
        parts.reverse();
        stack.extend(parts);
    }
    pieces
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn empty_grid_has_no_constraints() {
        let g = OccupancyGrid::empty(0.1, Point::new(-5.0, -5.0), 100, 100).unwrap();
        assert!(static_constraints_for(&g, &Point::zeros(), 4).unwrap().is_empty());
    }

    #[test]
    fn single_cell_east() {
        // one cell whose west face lies 3 m east of the disc
        let mut g = OccupancyGrid::empty(0.5, Point::new(-5.0, -5.0), 20, 20).unwrap();
        let (ix, iy) = g.cell_of(&Point::new(3.25, -0.25)).unwrap();
        g.set(ix, iy, true);
        // disc at the cell's mid-height so the closest point is due east
        let disc = Point::new(0.0, -0.25);
        let cs = static_constraints_for(&g, &disc, 4).unwrap();
        assert_eq!(cs.len(), 1);
        assert!((cs[0].normal - Point::new(1.0, 0.0)).norm() < 1e-12);
        assert!((cs[0].offset - 3.0).abs() < 1e-12);
    }

    #[test]
    fn query_errors() {
        let mut g = OccupancyGrid::empty(1.0, Point::zeros(), 5, 5).unwrap();
        g.set(2, 2, true);
        assert!(matches!(
            static_constraints_for(&g, &Point::new(2.5, 2.5), 4),
            Err(Error::InCollision { .. })
        ));
        assert!(matches!(
            static_constraints_for(&g, &Point::new(7.0, 2.5), 4),
            Err(Error::OutOfBounds { .. })
        ));
    }

    #[test]
    fn residual_arithmetic() {
        let c = LinearConstraint {
            normal: Point::new(1.0, 0.0),
            offset: 2.0,
        };
        assert_eq!(static_constraint_residual(&c, &Point::new(2.0, 7.0), 0.0, 0.0), 0.0);
        assert!((static_constraint_residual(&c, &Point::new(1.0, 0.0), 0.4, 0.1) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn feasible_residual_keeps_disc_off_the_line() {
        // oracle: sample the disc boundary
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let angle: f64 = rng.gen_range(-3.2..3.2);
            let c = LinearConstraint {
                normal: Point::new(angle.cos(), angle.sin()),
                offset: rng.gen_range(-3.0..3.0),
            };
            let p = Point::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
            let (r, delta) = (rng.gen_range(0.05..1.0), rng.gen_range(0.0..0.3));
            if static_constraint_residual(&c, &p, r, delta) <= 0.0 {
                for k in 0..360 {
                    let a = k as f64 * std::f64::consts::TAU / 360.0;
                    let q = p + Point::new(a.cos(), a.sin()) * r;
                    assert!(c.normal.dot(&q) - c.offset <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn l_shaped_wall_splits_into_convex_pieces() {
        let g = OccupancyGrid::from_rects(
            0.1,
            Point::zeros(),
            100,
            100,
            &[[0.0, 0.0, 10.0, 1.0], [0.0, 0.0, 1.0, 10.0]],
        )
        .unwrap();
        let map = StaticMap::new(g);
        assert!(map.pieces().len() >= 2);
        // a point in the free corner region must not be inside any piece hull
        let p = Point::new(3.0, 3.0);
        assert!(map.pieces().iter().all(|piece| !piece.contains(&p)));
        let cs = map.constraints_for(&p, 4).unwrap();
        assert!(cs.iter().all(|c| static_constraint_residual(c, &p, 0.0, 0.0) < 0.0));
    }

    #[test]
    fn canal_walls_give_one_constraint_each() {
        let g = OccupancyGrid::from_rects(
            0.1,
            Point::new(0.0, -6.0),
            300,
            120,
            &[[0.0, -6.0, 30.0, -4.0], [0.0, 4.0, 30.0, 6.0]],
        )
        .unwrap();
        let map = StaticMap::new(g);
        assert_eq!(map.pieces().len(), 2);
        let cs = map.constraints_for(&Point::new(10.0, 1.0), 4).unwrap();
        assert_eq!(cs.len(), 2);
        assert!((cs[0].normal - Point::new(0.0, 1.0)).norm() < 1e-9);
        assert!((cs[0].offset - 4.0).abs() < 0.051);
    }

    #[test]
    fn random_sparse_grids_give_separating_planes() {
        // oracle: exhaustive scan of occupied cells
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let mut g = OccupancyGrid::empty(0.25, Point::new(-5.0, -5.0), 40, 40).unwrap();
            for _ in 0..rng.gen_range(1..25) {
                let (ix, iy) = (rng.gen_range(0..40), rng.gen_range(0..40));
                g.set(ix, iy, true);
            }
            let p = loop {
                let p = Point::new(rng.gen_range(-4.9..4.9), rng.gen_range(-4.9..4.9));
                if g.occupied_at(&p) == Some(false) {
                    break p;
                }
            };
            let map = StaticMap::new(g.clone());
            let cs = map.constraints_for(&p, 4).unwrap();
            let nearest_cell = (0..40)
                .flat_map(|iy| (0..40).map(move |ix| (ix, iy)))
                .filter(|&(ix, iy)| g.is_occupied(ix, iy))
                .min_by(|a, b| {
                    let da = (g.closest_point_in_cell(a.0, a.1, &p) - p).norm();
                    let db = (g.closest_point_in_cell(b.0, b.1, &p) - p).norm();
                    da.total_cmp(&db)
                })
                .unwrap();
            assert!(!cs.is_empty());
            let first = cs[0];
            let center = g.cell_center(nearest_cell.0, nearest_cell.1);
            assert!(static_constraint_residual(&first, &center, 0.0, 0.0) >= -1e-9);
            for c in &cs {
                assert!(static_constraint_residual(c, &p, 0.0, 0.0) < 0.0);
                // free-space samples between the disc and the constraint stay feasible
                let q = c.normal * c.offset + (p - c.normal * c.normal.dot(&p));
                for k in 0..10 {
                    let s = p + (q - p) * (k as f64 / 10.0);
                    assert!(static_constraint_residual(c, &s, 0.0, 0.0) < 0.0);
                }
            }
        }
    }
}
