use rustc_hash::FxHashMap as HashMap;

use serde_json::json;

use super::{rips, ComplexKind, FilteredComplex, Simplex, MAX_SIMPLEX_DIM};
use crate::error::{Error, Result};
use crate::geometry::{circumsphere, dist, Point3, PointCloud};

/// Default point-count cap for Čech construction.
pub const CECH_DEFAULT_CAP: usize = 2000;

/// Radius of the minimum enclosing ball of up to four points.
///
/// Exhaustive over support sets: the optimal ball is the circumsphere of some
/// subset that also contains all remaining points.
pub fn min_enclosing_radius(pts: &[Point3]) -> f64 {
    assert!(!pts.is_empty() && pts.len() <= 4);
    let n = pts.len();
    let mut best = f64::INFINITY;
    let mut support = Vec::with_capacity(4);
    for mask in 1u32..(1 << n) {
        support.clear();
        support.extend((0..n).filter(|i| mask & (1 << i) != 0).map(|i| pts[i]));
        let Some((c, r)) = circumsphere(&support) else {
            continue;
        };
        if r >= best {
            continue;
        }
        let tol = 1e-12 * r.max(1e-300);
        if pts.iter().all(|p| dist(p, &c) <= r + tol) {
            best = r;
        }
    }
    best
}

/// Čech complex: a simplex enters at the radius of its minimum enclosing ball.
pub fn build_cech(cloud: &PointCloud, max_scale: f64, max_dim: usize) -> Result<FilteredComplex> {
    build_cech_with_cap(cloud, max_scale, max_dim, CECH_DEFAULT_CAP)
}

pub fn build_cech_with_cap(
    cloud: &PointCloud,
    max_scale: f64,
    max_dim: usize,
    cap: usize,
) -> Result<FilteredComplex> {
    if cloud.len() > cap {
        return Err(Error::Capacity(format!(
            "Čech construction is capped at {cap} points (got {}); use rips or alpha instead",
            cloud.len()
        )));
    }
    if !(max_scale > 0.0) {
        return Err(Error::arg(format!(
            "max_scale must be positive, got {max_scale}"
        )));
    }
    if max_dim > MAX_SIMPLEX_DIM {
        return Err(Error::arg(format!("max_dim must be <= {MAX_SIMPLEX_DIM}")));
    }
    // an enclosing radius r forces diameter <= 2r
    let candidates = rips::build_rips(cloud, 2.0 * max_scale, max_dim)?;
    let mut values: HashMap<Simplex, f64> =
        HashMap::with_capacity_and_hasher(candidates.len(), Default::default());
    let mut by_dim: Vec<Simplex> = candidates.simplices().to_vec();
    by_dim.sort_by_key(|s| s.dim());
    let mut pts = Vec::with_capacity(4);
    let mut entries = Vec::new();
    for s in by_dim {
        pts.clear();
        pts.extend(s.vertices().iter().map(|&v| *cloud.point(v as usize)));
        let mut r = min_enclosing_radius(&pts);
        let mut faces_ok = true;
        for f in s.facets() {
            match values.get(&f) {
                Some(&fv) => r = r.max(fv),
                None => faces_ok = false,
            }
        }
        if faces_ok && r <= max_scale {
            values.insert(s, r);
            entries.push((s, r));
        }
    }
    let params = json!({
        "max_scale": if max_scale.is_finite() { json!(max_scale) } else { json!("inf") },
        "max_dim": max_dim,
        "points": cloud.len(),
    });
    Ok(FilteredComplex::from_entries(
        entries,
        ComplexKind::Cech,
        params,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::build_rips;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Welzl's randomized recursion, used as an independent oracle.
    fn welzl(p: &[Point3], r: Vec<Point3>) -> (Point3, f64) {
        if p.is_empty() || r.len() == 4 {
            return match r.len() {
                0 => ([0.0; 3], -1.0),
                _ => circumsphere(&r).unwrap_or(([0.0; 3], f64::INFINITY)),
            };
        }
        let last = p[p.len() - 1];
        let (c, rad) = welzl(&p[..p.len() - 1], r.clone());
        if rad >= 0.0 && dist(&c, &last) <= rad * (1.0 + 1e-12) {
            return (c, rad);
        }
        let mut r2 = r;
        r2.push(last);
        welzl(&p[..p.len() - 1], r2)
    }

    #[test]
    fn equilateral_triangle() {
        let h = 3f64.sqrt() / 2.0;
        let c = PointCloud::new(vec![[0.0; 3], [1.0, 0.0, 0.0], [0.5, h, 0.0]], "t").unwrap();
        let k = build_cech(&c, 1.0, 2).unwrap();
        k.validate().unwrap();
        for e in [[0, 1], [0, 2], [1, 2]] {
            let i = k.index_of(&Simplex::new(&e)).unwrap();
            assert!((k.value(i) - 0.5).abs() < 1e-12);
        }
        let t = k.index_of(&Simplex::new(&[0, 1, 2])).unwrap();
        assert!((k.value(t) - 1.0 / 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn duplicate_points_have_zero_edge() {
        let c = PointCloud::new(vec![[1.0, 2.0, 3.0], [1.0, 2.0, 3.0]], "d").unwrap();
        let k = build_cech(&c, 1.0, 1).unwrap();
        let i = k.index_of(&Simplex::new(&[0, 1])).unwrap();
        assert_eq!(k.value(i), 0.0);
    }

    #[test]
    fn matches_welzl_and_jung_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for trial in 0..200 {
            let k = 3 + trial % 2;
            let pts: Vec<Point3> = (0..k)
                .map(|_| {
                    [
                        rng.random::<f64>(),
                        rng.random::<f64>(),
                        rng.random::<f64>(),
                    ]
                })
                .collect();
            let meb = min_enclosing_radius(&pts);
            let (_, w) = welzl(&pts, vec![]);
            assert!((meb - w).abs() <= 1e-9, "{meb} vs {w}");
            let mut diam: f64 = 0.0;
            for a in 0..k {
                for b in a + 1..k {
                    diam = diam.max(dist(&pts[a], &pts[b]));
                }
            }
            assert!(diam / 2.0 <= meb + 1e-12);
            assert!(meb <= diam * (3.0f64 / 8.0).sqrt() + 1e-12);
        }
    }

    #[test]
    fn bounded_by_rips_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts = (0..25)
            .map(|_| {
                [
                    rng.random::<f64>(),
                    rng.random::<f64>(),
                    rng.random::<f64>(),
                ]
            })
            .collect();
        let c = PointCloud::new(pts, "r").unwrap();
        let cech = build_cech(&c, f64::INFINITY, 3).unwrap();
        let rips = build_rips(&c, f64::INFINITY, 3).unwrap();
        cech.validate().unwrap();
        assert_eq!(cech.len(), rips.len());
        for (s, v) in cech.iter() {
            let rv = rips.value(rips.index_of(&s).unwrap());
            assert!(v <= rv + 1e-12);
            assert!(rv / 2.0 <= v + 1e-12);
        }
    }

    #[test]
    fn capacity_error() {
        let pts = (0..11).map(|i| [i as f64, 0.0, 0.0]).collect();
        let c = PointCloud::new(pts, "big").unwrap();
        assert!(matches!(
            build_cech_with_cap(&c, 1.0, 2, 10),
            Err(Error::Capacity(_))
        ));
    }
}
