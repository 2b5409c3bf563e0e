use rustc_hash::FxHashMap as HashMap;

use serde_json::json;

use super::{ComplexKind, FilteredComplex, Simplex, MAX_SIMPLEX_DIM};
use crate::error::{Error, Result};
use crate::geometry::{dist, farthest_point_sample, PointCloud};

/// Witness complex over farthest-point landmarks with every cloud point as a witness.
///
/// A witness `w` supports a landmark simplex `σ` with `|σ| = k` at relaxation
/// `t >= 0` when `max_{l ∈ σ} d(w, l) <= d_k(w) + t`, `d_k(w)` being the
/// distance from `w` to its k-th nearest landmark. A simplex's own value is the
/// smallest such `t` over all witnesses; the stored value is the maximum of
/// that and its faces' values, so the result is a filtration. Simplices above
/// `max_scale`, or with a face above it, are dropped.
///
/// Vertex ids in the output index the landmark list (`params.landmarks`).
pub fn build_witness(
    cloud: &PointCloud,
    landmark_count: usize,
    max_dim: usize,
    max_scale: f64,
) -> Result<FilteredComplex> {
    let n = cloud.len();
    if landmark_count == 0 || landmark_count > n {
        return Err(Error::arg(format!(
            "landmark_count must be in 1..={n}, got {landmark_count}"
        )));
    }
    if max_dim > MAX_SIMPLEX_DIM {
        return Err(Error::arg(format!("max_dim must be <= {MAX_SIMPLEX_DIM}")));
    }
    if !(max_scale >= 0.0) {
        return Err(Error::arg(format!(
            "max_scale must be nonnegative, got {max_scale}"
        )));
    }
    let landmarks = farthest_point_sample(cloud, landmark_count, 0)?;
    let m = landmarks.len();
    let kmax = (max_dim + 1).min(m);

    let mut own: HashMap<Simplex, f64> = HashMap::default();
    let mut order: Vec<(f64, u32)> = Vec::with_capacity(m);
    let mut members: Vec<(u32, f64)> = Vec::new();
    let mut combo = Vec::with_capacity(4);
    for w in cloud.points() {
        order.clear();
        order.extend(
            landmarks
                .iter()
                .enumerate()
                .map(|(j, &l)| (dist(w, cloud.point(l)), j as u32)),
        );
        order.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for k in 2..=kmax {
            let dk = order[k - 1].0;
            // landmarks close enough to take part at relaxation <= max_scale
            members.clear();
            members.extend(
                order
                    .iter()
                    .take_while(|(d, _)| *d <= dk + max_scale)
                    .map(|&(d, j)| (j, d)),
            );
            members.sort_unstable_by_key(|e| e.0);
            for_each_subset(&members, k, &mut combo, &mut |sub: &[(u32, f64)]| {
                let far = sub.iter().map(|e| e.1).fold(0.0, f64::max);
                let t = (far - dk).max(0.0);
                let ids: Vec<u32> = sub.iter().map(|e| e.0).collect();
                let s = Simplex::new(&ids);
                own.entry(s)
                    .and_modify(|v| {
                        if t < *v {
                            *v = t
                        }
                    })
                    .or_insert(t);
            });
        }
    }

    let mut value: HashMap<Simplex, f64> = HashMap::default();
    for j in 0..m as u32 {
        value.insert(Simplex::vertex(j), 0.0);
    }
    let mut cands: Vec<(Simplex, f64)> = own.into_iter().collect();
    cands.sort_unstable_by(|a, b| a.0.dim().cmp(&b.0.dim()).then(a.0.cmp(&b.0)));
    for (s, t) in cands {
        let mut v = t;
        let mut closed = true;
        for f in s.facets() {
            match value.get(&f) {
                Some(&fv) => v = v.max(fv),
                None => {
                    closed = false;
                    break;
                }
            }
        }
        if closed && v <= max_scale {
            value.insert(s, v);
        }
    }
    let params = json!({
        "landmark_count": landmark_count,
        "max_dim": max_dim,
        "max_scale": if max_scale.is_finite() { json!(max_scale) } else { json!("inf") },
        "landmarks": landmarks,
    });
    Ok(FilteredComplex::from_entries(
        value.into_iter().collect(),
        ComplexKind::Witness,
        params,
    ))
}

fn for_each_subset<T: Copy>(items: &[T], k: usize, buf: &mut Vec<T>, f: &mut impl FnMut(&[T])) {
    fn rec<T: Copy>(
        items: &[T],
        start: usize,
        k: usize,
        buf: &mut Vec<T>,
        f: &mut impl FnMut(&[T]),
    ) {
        if buf.len() == k {
            f(buf);
            return;
        }
        let need = k - buf.len();
        for i in start..=items.len().saturating_sub(need) {
            if i >= items.len() {
                break;
            }
            buf.push(items[i]);
            rec(items, i + 1, k, buf, f);
            buf.pop();
        }
    }
    buf.clear();
    rec(items, 0, k, buf, f);
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_landmark() {
        let c = PointCloud::new(vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 2.0, 0.0]], "w").unwrap();
        let k = build_witness(&c, 1, 2, 1.0).unwrap();
        assert_eq!(k.len(), 1);
        assert_eq!(k.simplex(0), Simplex::vertex(0));
    }

    #[test]
    fn middle_point_witnesses_endpoints() {
        let c = PointCloud::new(vec![[0.0; 3], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]], "w").unwrap();
        let k = build_witness(&c, 2, 1, 0.5).unwrap();
        // landmarks are points 0 and 2 (FPS from 0)
        assert_eq!(k.params["landmarks"], json!([0, 2]));
        let e = k.index_of(&Simplex::new(&[0, 1])).unwrap();
        assert_eq!(k.value(e), 0.0);
    }

    /// Direct evaluation of the witness condition for every landmark subset.
    #[test]
    fn matches_direct_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let pts = (0..40)
            .map(|_| {
                [
                    rng.random::<f64>(),
                    rng.random::<f64>(),
                    rng.random::<f64>(),
                ]
            })
            .collect();
        let c = PointCloud::new(pts, "r").unwrap();
        let scale = 0.15;
        let k = build_witness(&c, 8, 3, scale).unwrap();
        k.validate().unwrap();
        assert_eq!(k.vertex_ids(), (0..8).collect::<Vec<u32>>());
        let lm: Vec<usize> = serde_json::from_value(k.params["landmarks"].clone()).unwrap();
        let own = |s: &[u32]| -> f64 {
            let kk = s.len();
            c.points()
                .iter()
                .map(|w| {
                    let mut d: Vec<f64> = lm.iter().map(|&l| dist(w, c.point(l))).collect();
                    let far = s.iter().map(|&j| d[j as usize]).fold(0.0, f64::max);
                    d.sort_by(f64::total_cmp);
                    (far - d[kk - 1]).max(0.0)
                })
                .fold(f64::INFINITY, f64::min)
        };
        let mut expected: HashMap<Vec<u32>, f64> = HashMap::default();
        for size in 1..=4 {
            for s in crate::complex::subsets(8, size) {
                let mut v = if size == 1 { 0.0 } else { own(&s) };
                let mut ok = true;
                if size > 1 {
                    for skip in 0..size {
                        let f: Vec<u32> = s
                            .iter()
                            .enumerate()
                            .filter(|(i, _)| *i != skip)
                            .map(|(_, &x)| x)
                            .collect();
                        match expected.get(&f) {
                            Some(&fv) => v = v.max(fv),
                            None => ok = false,
                        }
                    }
                }
                if ok && v <= scale {
                    expected.insert(s, v);
                }
            }
        }
        assert_eq!(expected.len(), k.len());
        for (s, v) in &expected {
            let i = k.index_of(&Simplex::new(s)).unwrap();
            assert!((k.value(i) - v).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_landmark_count() {
        let c = PointCloud::new(vec![[0.0; 3], [1.0, 0.0, 0.0]], "w").unwrap();
        assert!(build_witness(&c, 0, 1, 1.0).is_err());
        assert!(build_witness(&c, 3, 1, 1.0).is_err());
    }
}
