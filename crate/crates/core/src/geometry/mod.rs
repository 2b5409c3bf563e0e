//! Point clouds, nearest-neighbour queries, subsampling and perturbations.

mod io;
mod spatial;

pub use io::{load_points, parse_ply_ascii, parse_xyz, save_xyz, write_xyz, PointFormat};
pub use spatial::SpatialGrid;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point3 = [f64; 3];

#[inline]
pub fn sub(a: &Point3, b: &Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn dot(a: &Point3, b: &Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: &Point3, b: &Point3) -> Point3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn dist2(a: &Point3, b: &Point3) -> f64 {
    let d = sub(a, b);
    dot(&d, &d)
}

#[inline]
pub fn dist(a: &Point3, b: &Point3) -> f64 {
    dist2(a, b).sqrt()
}

/// Axis-aligned bounding box as `(min, max)`.
pub fn bounding_box(points: &[Point3]) -> (Point3, Point3) {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in points {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    (lo, hi)
}

/// Smallest sphere passing through all of `pts` (1 to 4 points), centred in
/// their affine hull. `None` when the points are affinely dependent.
pub fn circumsphere(pts: &[Point3]) -> Option<(Point3, f64)> {
    circumsphere_tol(pts, 1e-12)
}

/// As [`circumsphere`], treating pivots below `tol` times the largest squared
/// edge from the first point as dependence.
pub(crate) fn circumsphere_tol(pts: &[Point3], tol: f64) -> Option<(Point3, f64)> {
    let p0 = pts[0];
    let k = pts.len() - 1;
    if k == 0 {
        return Some((p0, 0.0));
    }
    if k > 3 {
        return None;
    }
    let mut a = [[0.0f64; 3]; 3];
    for (ai, p) in a.iter_mut().zip(&pts[1..]) {
        *ai = sub(p, &p0);
    }
    // Gram system G x = b / 2 for the barycentric offsets of the centre
    let mut m = [[0.0f64; 4]; 3];
    for i in 0..k {
        for j in 0..k {
            m[i][j] = dot(&a[i], &a[j]);
        }
        m[i][k] = 0.5 * dot(&a[i], &a[i]);
    }
    let scale = (0..k).map(|i| m[i][i]).fold(0.0, f64::max);
    if scale == 0.0 {
        return None;
    }
    for col in 0..k {
        let piv = (col..k).max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))?;
        if m[piv][col].abs() <= tol * scale {
            return None;
        }
        m.swap(col, piv);
        for r in 0..k {
            if r != col {
                let pivot = m[col];
                let f = m[r][col] / pivot[col];
                for (x, &y) in m[r][col..=k].iter_mut().zip(&pivot[col..=k]) {
                    *x -= f * y;
                }
            }
        }
    }
    let mut c = p0;
    for i in 0..k {
        let lam = m[i][k] / m[i][i];
        for ax in 0..3 {
            c[ax] += lam * a[i][ax];
        }
    }
    let r = pts.iter().map(|p| dist(p, &c)).fold(0.0, f64::max);
    Some((c, r))
}

/// An immutable, indexed set of 3D points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    points: Vec<Point3>,
    pub source_id: String,
    /// Seed of the stochastic operation that produced this cloud, if any.
    pub rng_seed: Option<u64>,
}

impl PointCloud {
    /// Builds a cloud, rejecting empty input and non-finite coordinates.
    pub fn new(points: Vec<Point3>, source_id: impl Into<String>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput);
        }
        if let Some(i) = points.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::arg(format!("point {i} has a non-finite coordinate")));
        }
        Ok(PointCloud {
            points,
            source_id: source_id.into(),
            rng_seed: None,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = Some(seed);
        self
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &Point3 {
        &self.points[i]
    }

    pub fn bbox(&self) -> (Point3, Point3) {
        bounding_box(&self.points)
    }

    pub fn bbox_diagonal(&self) -> f64 {
        let (lo, hi) = self.bbox();
        dist(&lo, &hi)
    }

    /// Sub-cloud made of the given indices, in that order.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            source_id: self.source_id.clone(),
            rng_seed: self.rng_seed,
        }
    }

    /// Builds a throwaway spatial index over the cloud.
    pub fn spatial_index(&self) -> SpatialGrid<'_> {
        SpatialGrid::new(&self.points)
    }
}

/// The `k` nearest points to `query`, ascending by distance, ties by index.
pub fn knn(cloud: &PointCloud, query: &Point3, k: usize) -> Result<Vec<(usize, f64)>> {
    if k == 0 || k > cloud.len() {
        return Err(Error::arg(format!(
            "k must be in 1..={}, got {k}",
            cloud.len()
        )));
    }
    Ok(cloud.spatial_index().knn(query, k))
}

/// Greedy max-min subset starting at `start`. Ties go to the lower index.
pub fn farthest_point_sample(
    cloud: &PointCloud,
    budget: usize,
    start: usize,
) -> Result<Vec<usize>> {
    let n = cloud.len();
    if budget == 0 || budget > n {
        return Err(Error::arg(format!(
            "budget must be in 1..={n}, got {budget}"
        )));
    }
    if start >= n {
        return Err(Error::arg(format!("start index {start} out of range")));
    }
    Ok(fps_from(cloud.points(), &[start], budget))
}

/// FPS continuation: `seeds` are taken as already selected (in order) and the
/// result is extended greedily until it holds `budget` indices.
pub(crate) fn fps_from(points: &[Point3], seeds: &[usize], budget: usize) -> Vec<usize> {
    let n = points.len();
    let budget = budget.min(n);
    let mut selected = Vec::with_capacity(budget);
    let mut mind = vec![f64::INFINITY; n];
    let mut taken = vec![false; n];
    let absorb = |i: usize, mind: &mut [f64]| {
        let p = points[i];
        for (j, q) in points.iter().enumerate() {
            let d = dist2(&p, q);
            if d < mind[j] {
                mind[j] = d;
            }
        }
    };
    for &s in seeds.iter().take(budget) {
        if !taken[s] {
            taken[s] = true;
            selected.push(s);
            absorb(s, &mut mind);
        }
    }
    while selected.len() < budget {
        let mut best = usize::MAX;
        let mut best_d = f64::NEG_INFINITY;
        for (j, &d) in mind.iter().enumerate() {
            if !taken[j] && d > best_d {
                best_d = d;
                best = j;
            }
        }
        taken[best] = true;
        selected.push(best);
        absorb(best, &mut mind);
    }
    selected
}

/// Adds independent N(0, sigma^2) noise to every coordinate.
pub fn add_gaussian_noise(cloud: &PointCloud, sigma: f64, seed: u64) -> Result<PointCloud> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::arg(format!(
            "sigma must be a finite nonnegative real, got {sigma}"
        )));
    }
    let mut out = cloud.clone();
    out.rng_seed = Some(seed);
    if sigma == 0.0 {
        return Ok(out);
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::arg(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for p in out.points.iter_mut() {
        for c in p.iter_mut() {
            *c += normal.sample(&mut rng);
        }
    }
    Ok(out)
}

/// Uniform sample of `keep` points without replacement.
pub fn downsample_random(cloud: &PointCloud, keep: usize, seed: u64) -> Result<PointCloud> {
    let n = cloud.len();
    if keep == 0 || keep > n {
        return Err(Error::arg(format!("keep must be in 1..={n}, got {keep}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let idx = index::sample(&mut rng, n, keep).into_vec();
    let mut out = cloud.select(&idx);
    out.rng_seed = Some(seed);
    Ok(out)
}
