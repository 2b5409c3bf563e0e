use super::{bounding_box, dist2, Point3};

/// Uniform-grid spatial hash with exact k-nearest and radius queries.
///
/// Points are bucketed into cubic cells stored in CSR layout. Nearest-neighbour
/// search expands Chebyshev rings of cells around the query until the k-th
/// candidate is provably closer than anything in the unvisited rings.
#[derive(Debug, Clone)]
pub struct SpatialGrid<'a> {
    points: &'a [Point3],
    origin: Point3,
    cell: f64,
    dims: [i64; 3],
    starts: Vec<u32>,
    items: Vec<u32>,
}

const MAX_CELLS: usize = 1 << 24;

impl<'a> SpatialGrid<'a> {
    /// Cell size set to `bbox_diagonal / cbrt(n)`.
    pub fn new(points: &'a [Point3]) -> Self {
        let (lo, hi) = bounding_box(points);
        let diag = dist2(&lo, &hi).sqrt();
        let n = points.len().max(1) as f64;
        Self::with_cell_size(points, diag / n.cbrt())
    }

    pub fn with_cell_size(points: &'a [Point3], cell: f64) -> Self {
        let (lo, hi) = if points.is_empty() {
            ([0.0; 3], [0.0; 3])
        } else {
            bounding_box(points)
        };
        let mut cell = if cell.is_finite() && cell > 0.0 {
            cell
        } else {
            1.0
        };
        let extent = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
        let dims_for =
            |h: f64| -> [i64; 3] { [0, 1, 2].map(|a| ((extent[a] / h).floor() as i64 + 1).max(1)) };
        let mut dims = dims_for(cell);
        let cap = MAX_CELLS.min(8 * points.len() + 64);
        while (dims[0] * dims[1] * dims[2]) as usize > cap {
            cell *= 1.5;
            dims = dims_for(cell);
        }
        let ncells = (dims[0] * dims[1] * dims[2]) as usize;
        let mut grid = SpatialGrid {
            points,
            origin: lo,
            cell,
            dims,
            starts: vec![0; ncells + 1],
            items: vec![0; points.len()],
        };
        let ids: Vec<usize> = points
            .iter()
            .map(|p| grid.cell_id(grid.cell_of(p)))
            .collect();
        for &c in &ids {
            grid.starts[c + 1] += 1;
        }
        for c in 0..ncells {
            grid.starts[c + 1] += grid.starts[c];
        }
        let mut fill = grid.starts.clone();
        for (i, &c) in ids.iter().enumerate() {
            grid.items[fill[c] as usize] = i as u32;
            fill[c] += 1;
        }
        grid
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    fn cell_of(&self, p: &Point3) -> [i64; 3] {
        [0, 1, 2].map(|a| {
            let c = ((p[a] - self.origin[a]) / self.cell).floor();
            // clamp only guards against rounding on the max face
            (c as i64).clamp(i64::MIN / 4, i64::MAX / 4)
        })
    }

    fn cell_id(&self, c: [i64; 3]) -> usize {
        let c = [0, 1, 2].map(|a| c[a].clamp(0, self.dims[a] - 1));
        ((c[2] * self.dims[1] + c[1]) * self.dims[0] + c[0]) as usize
    }

    fn bucket(&self, c: [i64; 3]) -> &[u32] {
        let id = self.cell_id(c);
        &self.items[self.starts[id] as usize..self.starts[id + 1] as usize]
    }

    fn in_grid(&self, c: [i64; 3]) -> bool {
        (0..3).all(|a| c[a] >= 0 && c[a] < self.dims[a])
    }

    /// Visits every in-grid cell at Chebyshev distance exactly `r` from `q`.
    fn for_ring(&self, q: [i64; 3], r: i64, mut f: impl FnMut([i64; 3])) {
        if r == 0 {
            if self.in_grid(q) {
                f(q);
            }
            return;
        }
        let lo = [0, 1, 2].map(|a| (q[a] - r).max(0));
        let hi = [0, 1, 2].map(|a| (q[a] + r).min(self.dims[a] - 1));
        for x in lo[0]..=hi[0] {
            let xb = (x - q[0]).abs() == r;
            for y in lo[1]..=hi[1] {
                let yb = (y - q[1]).abs() == r;
                if xb || yb {
                    for z in lo[2]..=hi[2] {
                        f([x, y, z]);
                    }
                } else {
                    for z in [q[2] - r, q[2] + r] {
                        if z >= 0 && z < self.dims[2] {
                            f([x, y, z]);
                        }
                    }
                }
            }
        }
    }

    /// Exact k nearest neighbours of `query`, sorted by (distance, index).
    pub fn knn(&self, query: &Point3, k: usize) -> Vec<(usize, f64)> {
        let k = k.min(self.points.len());
        if k == 0 {
            return Vec::new();
        }
        let q = self.cell_of(query);
        // Chebyshev distance from the query cell to the grid box
        let r0 = (0..3)
            .map(|a| (-q[a]).max(q[a] - (self.dims[a] - 1)).max(0))
            .max()
            .unwrap();
        let r_max = (0..3)
            .map(|a| q[a].max(self.dims[a] - 1 - q[a]))
            .max()
            .unwrap();
        let mut cand: Vec<(f64, u32)> = Vec::new();
        let mut r = r0;
        loop {
            self.for_ring(q, r, |c| {
                for &i in self.bucket(c) {
                    cand.push((dist2(&self.points[i as usize], query), i));
                }
            });
            if cand.len() >= k {
                cand.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                cand.truncate(k);
                let reach = r as f64 * self.cell;
                if cand[k - 1].0 < reach * reach {
                    break;
                }
            }
            if r >= r_max {
                break;
            }
            r += 1;
        }
        cand.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        cand.truncate(k);
        cand.into_iter()
            .map(|(d2, i)| (i as usize, d2.sqrt()))
            .collect()
    }

    /// Distance from `query` to the closest indexed point.
    pub fn nearest_distance(&self, query: &Point3) -> f64 {
        self.knn(query, 1).first().map_or(f64::INFINITY, |x| x.1)
    }

    /// Indices of all points within Euclidean distance `radius` (inclusive), unsorted.
    pub fn within(&self, query: &Point3, radius: f64, out: &mut Vec<usize>) {
        out.clear();
        let r2 = radius * radius;
        let lo = self.cell_of(&[query[0] - radius, query[1] - radius, query[2] - radius]);
        let hi = self.cell_of(&[query[0] + radius, query[1] + radius, query[2] + radius]);
        let lo = [0, 1, 2].map(|a| lo[a].max(0));
        let hi = [0, 1, 2].map(|a| hi[a].min(self.dims[a] - 1));
        for z in lo[2]..=hi[2] {
            for y in lo[1]..=hi[1] {
                for x in lo[0]..=hi[0] {
                    for &i in self.bucket([x, y, z]) {
                        if dist2(&self.points[i as usize], query) <= r2 {
                            out.push(i as usize);
                        }
                    }
                }
            }
        }
    }
}
