use std::collections::hash_map::Entry;

use rustc_hash::FxHashMap as HashMap;

use serde_json::json;

use super::delaunay::delaunay_points;
use super::{ComplexKind, FilteredComplex, Simplex};
use crate::error::{Error, Result};
use crate::geometry::{farthest_point_sample, Point3, PointCloud, SpatialGrid};

/// Default number of lattice subdivisions per simplex edge.
pub const FLOOD_DEFAULT_DEPTH: usize = 4;

/// Flood complex over farthest-point landmarks, with the default lattice depth.
pub fn build_flood(
    cloud: &PointCloud,
    landmark_count: usize,
    radius: f64,
) -> Result<FilteredComplex> {
    build_flood_with_depth(cloud, landmark_count, radius, FLOOD_DEFAULT_DEPTH)
}

/// Delaunay simplices over the landmarks whose hull is covered by balls of
/// `radius` around the cloud points.
///
/// Coverage is sampled on the barycentric lattice `{ sum(k_i v_i) / depth }`.
/// A simplex's value is the largest lattice distance-to-cloud, so it may be
/// underestimated by at most the lattice spacing (longest edge / depth).
/// Vertex ids index the landmark list stored in `params["landmarks"]`.
pub fn build_flood_with_depth(
    cloud: &PointCloud,
    landmark_count: usize,
    radius: f64,
    depth: usize,
) -> Result<FilteredComplex> {
    if landmark_count < 4 {
        return Err(Error::arg(format!(
            "flood needs at least 4 landmarks, got {landmark_count}"
        )));
    }
    if landmark_count > cloud.len() {
        return Err(Error::arg(format!(
            "landmark_count {landmark_count} exceeds cloud size {}",
            cloud.len()
        )));
    }
    if !(radius > 0.0) {
        return Err(Error::arg(format!("radius must be positive, got {radius}")));
    }
    if depth == 0 {
        return Err(Error::arg("lattice depth must be at least 1"));
    }
    let landmarks = farthest_point_sample(cloud, landmark_count, 0)?;
    let lpts: Vec<Point3> = landmarks.iter().map(|&i| *cloud.point(i)).collect();
    let del = delaunay_points(&lpts)?;
    let grid = cloud.spatial_index();

    let mut value: HashMap<Simplex, f64> = HashMap::default();
    for t in &del.tets {
        let tet = Simplex::new(t);
        for k in 1..=4 {
            for s in faces_of_size(&tet, k) {
                if let Entry::Vacant(e) = value.entry(s) {
                    let v = lattice_value(e.key(), &lpts, &grid, depth);
                    e.insert(v);
                }
            }
        }
    }
    // lattices nest, but enforce monotonicity against rounding anyway
    let mut by_dim: Vec<Simplex> = value.keys().copied().collect();
    by_dim.sort_unstable_by_key(|s| (s.dim(), *s));
    for s in by_dim {
        if s.dim() > 0 {
            let m = s.facets().map(|f| value[&f]).fold(value[&s], f64::max);
            value.insert(s, m);
        }
    }
    let entries: Vec<(Simplex, f64)> = value.into_iter().filter(|(_, v)| *v <= radius).collect();
    let params = json!({
        "landmark_count": landmark_count,
        "radius": radius,
        "depth": depth,
        "landmarks": landmarks,
        "jitter": del.jitter,
    });
    Ok(FilteredComplex::from_entries(
        entries,
        ComplexKind::Flood,
        params,
    ))
}

fn faces_of_size(t: &Simplex, k: usize) -> Vec<Simplex> {
    let v = t.vertices();
    let mut out = Vec::new();
    for mask in 1u8..(1 << v.len()) {
        if mask.count_ones() as usize == k {
            let sel: Vec<u32> = (0..v.len())
                .filter(|&i| mask >> i & 1 == 1)
                .map(|i| v[i])
                .collect();
            out.push(Simplex::new(&sel));
        }
    }
    out
}

/// Points `sum(k_i v_i) / depth` with nonnegative integers `k_i` summing to `depth`.
pub(crate) fn barycentric_lattice(verts: &[Point3], depth: usize) -> Vec<Point3> {
    let mut out = Vec::new();
    let mut k = vec![0usize; verts.len()];
    fn rec(
        i: usize,
        left: usize,
        k: &mut [usize],
        verts: &[Point3],
        depth: usize,
        out: &mut Vec<Point3>,
    ) {
        if i + 1 == k.len() {
            k[i] = left;
            let mut p = [0.0; 3];
            for (w, v) in k.iter().zip(verts) {
                for a in 0..3 {
                    p[a] += *w as f64 * v[a];
                }
            }
            out.push(p.map(|c| c / depth as f64));
            return;
        }
        for c in 0..=left {
            k[i] = c;
            rec(i + 1, left - c, k, verts, depth, out);
        }
    }
    rec(0, depth, &mut k, verts, depth, &mut out);
    out
}

fn lattice_value(s: &Simplex, lpts: &[Point3], grid: &SpatialGrid, depth: usize) -> f64 {
    if s.dim() == 0 {
        return grid.nearest_distance(&lpts[s.vertices()[0] as usize]);
    }
    let verts: Vec<Point3> = s.vertices().iter().map(|&v| lpts[v as usize]).collect();
    barycentric_lattice(&verts, depth)
        .iter()
        .map(|p| grid.nearest_distance(p))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::dist;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cloud(n: usize, seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = (0..n)
            .map(|_| [rng.random(), rng.random(), rng.random()])
            .collect();
        PointCloud::new(pts, "r").unwrap()
    }

    fn brute_lattice(s: &Simplex, lpts: &[Point3], cloud: &PointCloud, depth: usize) -> f64 {
        let verts: Vec<Point3> = s.vertices().iter().map(|&v| lpts[v as usize]).collect();
        barycentric_lattice(&verts, depth)
            .iter()
            .map(|p| {
                cloud
                    .points()
                    .iter()
                    .map(|q| dist(p, q))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn lattice_sizes() {
        let v = [[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert_eq!(barycentric_lattice(&v[..2], 4).len(), 5);
        assert_eq!(barycentric_lattice(&v[..3], 4).len(), 15);
        assert_eq!(barycentric_lattice(&v, 4).len(), 35);
    }

    #[test]
    fn large_radius_keeps_all_delaunay_simplices() {
        let c = random_cloud(60, 1);
        let diag = c.bbox_diagonal();
        let k = build_flood(&c, 20, diag).unwrap();
        k.validate().unwrap();
        let lm: Vec<usize> = serde_json::from_value(k.params["landmarks"].clone()).unwrap();
        let lpts: Vec<Point3> = lm.iter().map(|&i| *c.point(i)).collect();
        let del = delaunay_points(&lpts).unwrap();
        let mut all = std::collections::HashSet::new();
        for t in &del.tets {
            for k in 1..=4 {
                all.extend(faces_of_size(&Simplex::new(t), k));
            }
        }
        assert_eq!(k.len(), all.len());
    }

    #[test]
    fn values_match_direct_lattice_evaluation() {
        let c = random_cloud(80, 3);
        let k = build_flood(&c, 12, f64::INFINITY).unwrap();
        let lm: Vec<usize> = serde_json::from_value(k.params["landmarks"].clone()).unwrap();
        let lpts: Vec<Point3> = lm.iter().map(|&i| *c.point(i)).collect();
        for (s, v) in k.iter() {
            let expect = brute_lattice(&s, &lpts, &c, FLOOD_DEFAULT_DEPTH);
            assert!((v - expect).abs() < 1e-12, "{s:?}: {v} vs {expect}");
        }
    }

    #[test]
    fn triangle_with_centroid_point() {
        // four landmarks: a triangle in z = 0 plus an apex; the centroid point
        // lies on the triangle so it shortens lattice distances
        let mut pts = vec![
            [0.0, 0.0, 0.0],
            [3.0, 0.0, 0.0],
            [0.0, 3.0, 0.0],
            [0.0, 0.0, 3.0],
        ];
        pts.push([1.0, 1.0, 0.0]);
        let c = PointCloud::new(pts, "t").unwrap();
        let k = build_flood(&c, 4, f64::INFINITY).unwrap();
        let lm: Vec<usize> = serde_json::from_value(k.params["landmarks"].clone()).unwrap();
        let lpts: Vec<Point3> = lm.iter().map(|&i| *c.point(i)).collect();
        let pos = |i: usize| lm.iter().position(|&x| x == i).unwrap() as u32;
        let tri = Simplex::new(&[pos(0), pos(1), pos(2)]);
        let v = k.value(k.index_of(&tri).unwrap());
        assert!((v - brute_lattice(&tri, &lpts, &c, 4)).abs() < 1e-12);
        assert!(v > 0.0);
    }

    #[test]
    fn gap_is_not_bridged() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut pts = Vec::new();
        for cx in [0.0, 10.0] {
            for _ in 0..40 {
                pts.push([cx + rng.random::<f64>(), rng.random(), rng.random()]);
            }
        }
        let c = PointCloud::new(pts, "g").unwrap();
        let r = 0.5;
        let k = build_flood(&c, 16, r).unwrap();
        k.validate().unwrap();
        let lm: Vec<usize> = serde_json::from_value(k.params["landmarks"].clone()).unwrap();
        for s in k.simplices() {
            let sides: Vec<bool> = s.vertices().iter().map(|&v| lm[v as usize] < 40).collect();
            assert!(sides.iter().all(|&x| x == sides[0]), "{s:?} spans the gap");
        }
    }

    #[test]
    fn argument_errors() {
        let c = random_cloud(10, 0);
        assert!(build_flood(&c, 3, 1.0).is_err());
        assert!(build_flood(&c, 11, 1.0).is_err());
        assert!(build_flood(&c, 5, 0.0).is_err());
    }
}
