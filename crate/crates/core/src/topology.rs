//! Wrapped hexagonal cell layout.
//!
//! The 19-cell two-tier cluster tiles the plane under translations by
//! `u1 = 3·a1 + 2·a2` and `u2 = -2·a1 + 5·a2`, where `a1`, `a2` are the
//! inter-site lattice vectors. Distances are measured on the resulting torus:
//! the minimum over the nine translated copies `0, ±u1, ±u2, ±u1±u2`.

use alloc::vec::Vec;
use core::ops::{Add, Mul, Sub};

use rand::Rng;

use crate::config::NetworkConfig;
use crate::error::{Error, Result};
use crate::grid::UserGrid;

const SQRT_3: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        libm::hypot(self.x, self.y)
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    bs_positions: Vec<Point>,
    lattice_vectors: [Point; 2],
    translations: [Point; 9],
    cell_radius: f64,
}

/// Builds the wrapped layout. Only `cells == 19` is supported.
pub fn build_hex_torus(cells: usize, radius: f64) -> Result<Topology> {
    if cells != 19 {
        return Err(Error::UnsupportedCellCount(cells));
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::Config(alloc::format!("cell radius must be positive, got {radius}")));
    }
    let isd = SQRT_3 * radius;
    let a1 = Point::new(isd, 0.0);
    let a2 = Point::new(isd / 2.0, isd * SQRT_3 / 2.0);
    let at = |i: i32, j: i32| a1 * i as f64 + a2 * j as f64;

    // Center, then ring 1, then ring 2; each ring counter-clockwise from +x.
    let mut bs_positions = alloc::vec![at(0, 0)];
    for ring in 1..=2 {
        let mut coords = Vec::new();
        for i in -ring..=ring {
            for j in -ring..=ring {
                if hex_norm(i, j) == ring {
                    coords.push(at(i, j));
                }
            }
        }
        coords.sort_by(|p, q| angle(*p).total_cmp(&angle(*q)));
        bs_positions.extend(coords);
    }
    debug_assert_eq!(bs_positions.len(), 19);

    let u1 = at(3, 2);
    let u2 = at(-2, 5);
    let translations = [
        Point::default(),
        u1,
        u1 * -1.0,
        u2,
        u2 * -1.0,
        u1 + u2,
        u1 - u2,
        u2 - u1,
        (u1 + u2) * -1.0,
    ];
    Ok(Topology { bs_positions, lattice_vectors: [u1, u2], translations, cell_radius: radius })
}

fn hex_norm(i: i32, j: i32) -> i32 {
    i.abs().max(j.abs()).max((i + j).abs())
}

fn angle(p: Point) -> f64 {
    let a = libm::atan2(p.y, p.x);
    if a < -1e-12 {
        a + 2.0 * core::f64::consts::PI
    } else {
        a.max(0.0)
    }
}

impl Topology {
    pub fn num_cells(&self) -> usize {
        self.bs_positions.len()
    }

    pub fn bs_positions(&self) -> &[Point] {
        &self.bs_positions
    }

    pub fn bs(&self, j: usize) -> Point {
        self.bs_positions[j]
    }

    pub fn lattice_vectors(&self) -> [Point; 2] {
        self.lattice_vectors
    }

    pub fn cell_radius(&self) -> f64 {
        self.cell_radius
    }

    pub fn inter_site_distance(&self) -> f64 {
        SQRT_3 * self.cell_radius
    }

    /// Torus distance between two points of the fundamental domain.
    pub fn wrapped_distance(&self, a: Point, b: Point) -> f64 {
        let d = b - a;
        self.translations.iter().map(|t| (d + *t).norm()).fold(f64::INFINITY, f64::min)
    }

    pub fn distance_to_bs(&self, j: usize, p: Point) -> f64 {
        self.wrapped_distance(self.bs_positions[j], p)
    }

    /// Whether `p` lies in the hexagon of cell `l` (boundary included).
    pub fn in_cell(&self, l: usize, p: Point) -> bool {
        in_hexagon(p - self.bs_positions[l], self.cell_radius)
    }

    /// Ω(l): cell `l` plus its `size` nearest BSs by wrapped distance, ties broken
    /// by ascending index, returned in ascending index order.
    pub fn neighborhood(&self, l: usize, size: usize) -> Vec<usize> {
        let home = self.bs_positions[l];
        let mut others: Vec<(f64, usize)> = (0..self.num_cells())
            .filter(|&j| j != l)
            .map(|j| (self.wrapped_distance(home, self.bs_positions[j]), j))
            .collect();
        // Neighbour distances are computed from identical lattice arithmetic, so
        // equal rings can differ in the last bits; compare on a relative grid.
        let tol = 1e-9 * self.inter_site_distance();
        others.sort_by(|a, b| {
            if (a.0 - b.0).abs() <= tol {
                a.1.cmp(&b.1)
            } else {
                a.0.total_cmp(&b.0)
            }
        });
        let mut set: Vec<usize> = core::iter::once(l).chain(others.into_iter().take(size).map(|(_, j)| j)).collect();
        set.sort_unstable();
        set
    }

    /// Neighbourhoods of every cell.
    pub fn neighborhoods(&self, size: usize) -> Vec<Vec<usize>> {
        (0..self.num_cells()).map(|l| self.neighborhood(l, size)).collect()
    }
}

/// Point-in-hexagon test for an offset from the hexagon center. The hexagon has
/// vertices at 30° + k·60°, i.e. edges facing the six neighbouring sites.
pub fn in_hexagon(offset: Point, radius: f64) -> bool {
    let apothem = SQRT_3 / 2.0 * radius;
    let normals = [Point::new(1.0, 0.0), Point::new(0.5, SQRT_3 / 2.0), Point::new(-0.5, SQRT_3 / 2.0)];
    normals.iter().all(|n| offset.dot(*n).abs() <= apothem * (1.0 + 1e-12))
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserDrop {
    positions: UserGrid<Point>,
}

impl UserDrop {
    pub fn positions(&self) -> &UserGrid<Point> {
        &self.positions
    }

    pub fn position(&self, k: usize, l: usize) -> Point {
        self.positions[(k, l)]
    }
}

/// Uniform offset in a hexagon of the given radius, outside the exclusion disc.
pub fn sample_in_hexagon<R: Rng + ?Sized>(rng: &mut R, radius: f64, exclusion: f64) -> Point {
    let apothem = SQRT_3 / 2.0 * radius;
    loop {
        let p = Point::new(rng.random_range(-apothem..=apothem), rng.random_range(-radius..=radius));
        if in_hexagon(p, radius) && p.norm() >= exclusion {
            return p;
        }
    }
}

/// Places `K` users uniformly in every cell by rejection sampling.
pub fn drop_users<R: Rng + ?Sized>(topo: &Topology, cfg: &NetworkConfig, rng: &mut R) -> UserDrop {
    let cells = topo.num_cells();
    let mut positions = UserGrid::filled(cfg.users_per_cell, cells, Point::default());
    for l in 0..cells {
        for k in 0..cfg.users_per_cell {
            positions[(k, l)] = topo.bs(l) + sample_in_hexagon(rng, topo.cell_radius(), cfg.exclusion_radius);
        }
    }
    UserDrop { positions }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn torus() -> Topology {
        build_hex_torus(19, 1.0).unwrap()
    }

    #[test]
    fn rejects_other_cell_counts() {
        assert_eq!(build_hex_torus(7, 1.0), Err(Error::UnsupportedCellCount(7)));
    }

    #[test]
    fn self_distance_is_zero() {
        let t = torus();
        assert_eq!(t.wrapped_distance(t.bs(0), t.bs(0)), 0.0);
    }

    #[test]
    fn adjacent_sites_are_sqrt3_radius_apart() {
        let t = torus();
        let d = t.wrapped_distance(t.bs(0), t.bs(1));
        assert!((d - 1.732_050_8).abs() < 1e-7);
    }

    #[test]
    fn every_site_has_six_wrapped_neighbours() {
        let t = torus();
        let isd = t.inter_site_distance();
        for j in 0..19 {
            let count = (0..19)
                .filter(|&i| i != j && (t.wrapped_distance(t.bs(j), t.bs(i)) - isd).abs() < 1e-9)
                .count();
            assert_eq!(count, 6, "site {j}");
        }
    }

    #[test]
    fn lattice_translation_wraps_to_zero() {
        let t = torus();
        let [u1, u2] = t.lattice_vectors();
        let a = Point::new(0.3, -0.2);
        assert!(t.wrapped_distance(a, a + u1) < 1e-12);
        assert!(t.wrapped_distance(a, a - u2) < 1e-12);
    }

    #[test]
    fn neighborhoods_contain_home_and_have_requested_size() {
        let t = torus();
        for l in 0..19 {
            let omega = t.neighborhood(l, 6);
            assert_eq!(omega.len(), 7);
            assert!(omega.contains(&l));
            assert!(omega.windows(2).all(|w| w[0] < w[1]));
        }
        assert_eq!(t.neighborhood(4, 18), (0..19).collect::<Vec<_>>());
        assert_eq!(t.neighborhood(4, 0), alloc::vec![4]);
    }

    #[test]
    fn six_neighbourhoods_are_mutual() {
        let t = torus();
        let sets = t.neighborhoods(6);
        for (l, set) in sets.iter().enumerate() {
            for &j in set.iter().filter(|&&j| j != l) {
                assert!(sets[j].contains(&l), "{j} in Ω({l}) but not vice versa");
            }
        }
    }

    #[test]
    fn dropped_users_respect_cell_and_exclusion() {
        let t = torus();
        let cfg = NetworkConfig::default();
        let drop = drop_users(&t, &cfg, &mut stream(3, 0));
        for ((k, l), p) in drop.positions().indexed() {
            assert!(t.in_cell(l, *p), "user ({k},{l}) outside its hexagon");
            assert!(t.distance_to_bs(l, *p) >= cfg.exclusion_radius);
        }
        assert_eq!(drop, drop_users(&t, &cfg, &mut stream(3, 0)));
    }
}
