//! Grid path finder over the corridor floor.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Occupancy grid over `[x_min, x_max] x [z_min, z_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FloorGrid {
    pub x_min: f64,
    pub z_min: f64,
    pub cell: f64,
    pub nx: usize,
    pub nz: usize,
    free: Vec<bool>,
}

impl FloorGrid {
    /// Marks nodes free when they keep `clearance` from every obstacle
    /// center and `wall_clearance` from the side walls.
    pub fn new(
        x_range: (f64, f64),
        z_range: (f64, f64),
        cell: f64,
        obstacles: &[(f64, f64)],
        clearance: f64,
        wall_clearance: f64,
    ) -> Self {
        let nx = ((x_range.1 - x_range.0) / cell).round() as usize + 1;
        let nz = ((z_range.1 - z_range.0) / cell).round() as usize + 1;
        let mut free = vec![false; nx * nz];
        for iz in 0..nz {
            for ix in 0..nx {
                let x = x_range.0 + ix as f64 * cell;
                let z = z_range.0 + iz as f64 * cell;
                let walls = x - x_range.0 >= wall_clearance - 1e-9 && x_range.1 - x >= wall_clearance - 1e-9;
                let clear = obstacles
                    .iter()
                    .all(|&(ox, oz)| (x - ox).hypot(z - oz) >= clearance);
                free[iz * nx + ix] = walls && clear;
            }
        }
        Self {
            x_min: x_range.0,
            z_min: z_range.0,
            cell,
            nx,
            nz,
            free,
        }
    }

    pub fn point(&self, ix: usize, iz: usize) -> (f64, f64) {
        (self.x_min + ix as f64 * self.cell, self.z_min + iz as f64 * self.cell)
    }

    pub fn is_free(&self, ix: usize, iz: usize) -> bool {
        self.free[iz * self.nx + ix]
    }

    fn nearest_free(&self, p: (f64, f64)) -> Option<(usize, usize)> {
        let ix = ((p.0 - self.x_min) / self.cell).round().clamp(0.0, (self.nx - 1) as f64) as usize;
        let iz = ((p.1 - self.z_min) / self.cell).round().clamp(0.0, (self.nz - 1) as f64) as usize;
        if self.is_free(ix, iz) {
            return Some((ix, iz));
        }
        // Small ring search so a start slightly inside a margin still plans.
        (1..=5).find_map(|r: usize| {
            let mut best: Option<((usize, usize), f64)> = None;
            for dz in -(r as i64)..=r as i64 {
                for dx in -(r as i64)..=r as i64 {
                    let (jx, jz) = (ix as i64 + dx, iz as i64 + dz);
                    if jx < 0 || jz < 0 || jx >= self.nx as i64 || jz >= self.nz as i64 {
                        continue;
                    }
                    let (jx, jz) = (jx as usize, jz as usize);
                    if self.is_free(jx, jz) {
                        let q = self.point(jx, jz);
                        let d = (q.0 - p.0).hypot(q.1 - p.1);
                        if best.is_none_or(|(_, bd)| d < bd) {
                            best = Some(((jx, jz), d));
                        }
                    }
                }
            }
            best.map(|(c, _)| c)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Open {
    f: f64,
    idx: usize,
}

impl Eq for Open {}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on f, index as a deterministic tiebreak.
        other.f.total_cmp(&self.f).then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A* over the 8-connected grid from `start` to any free node with
/// `z >= goal_z`. Returns world-space waypoints, start node first.
pub fn find_path(grid: &FloorGrid, start: (f64, f64), goal_z: f64) -> Option<Vec<(f64, f64)>> {
    let (sx, sz) = grid.nearest_free(start)?;
    let n = grid.nx * grid.nz;
    let mut g = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut heap = BinaryHeap::new();
    let h = |iz: usize| (goal_z - grid.point(0, iz).1).max(0.0);
    let s = sz * grid.nx + sx;
    g[s] = 0.0;
    heap.push(Open { f: h(sz), idx: s });
    while let Some(Open { idx, .. }) = heap.pop() {
        let (ix, iz) = (idx % grid.nx, idx / grid.nx);
        if grid.point(ix, iz).1 >= goal_z - 1e-9 {
            let mut path = vec![grid.point(ix, iz)];
            let mut cur = idx;
            while parent[cur] != usize::MAX {
                cur = parent[cur];
                path.push(grid.point(cur % grid.nx, cur / grid.nx));
            }
            path.reverse();
            return Some(path);
        }
        for (dx, dz) in [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)] {
            let (jx, jz) = (ix as i64 + dx, iz as i64 + dz);
            if jx < 0 || jz < 0 || jx >= grid.nx as i64 || jz >= grid.nz as i64 {
                continue;
            }
            let (jx, jz) = (jx as usize, jz as usize);
            if !grid.is_free(jx, jz) {
                continue;
            }
            let j = jz * grid.nx + jx;
            let step = if dx != 0 && dz != 0 {
                std::f64::consts::SQRT_2
            } else {
                1.0
            } * grid.cell;
            let cand = g[idx] + step;
            if cand < g[j] - 1e-12 {
                g[j] = cand;
                parent[j] = idx;
                heap.push(Open { f: cand + h(jz), idx: j });
            }
        }
    }
    None
}

/// Drops collinear interior waypoints.
pub fn simplify(path: &[(f64, f64)]) -> Vec<(f64, f64)> {
    if path.len() < 3 {
        return path.to_vec();
    }
    let mut out = vec![path[0]];
    for w in path.windows(3) {
        let (a, b, c) = (w[0], w[1], w[2]);
        let cross = (b.0 - a.0) * (c.1 - b.1) - (b.1 - a.1) * (c.0 - b.0);
        if cross.abs() > 1e-9 {
            out.push(b);
        }
    }
    out.push(*path.last().unwrap());
    out
}
