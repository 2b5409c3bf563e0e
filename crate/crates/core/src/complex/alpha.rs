use serde_json::json;

use super::delaunay::delaunay_points;
use super::{ComplexKind, FilteredComplex, Simplex};
use crate::error::{Error, Result};
use crate::geometry::{circumsphere_tol, dist, Point3, PointCloud};

/// Alpha complex with values stored as radii (not squared).
///
/// Tetrahedra enter at their circumradius. A lower simplex enters at its own
/// smallest circumradius when that ball is empty of the vertices of its
/// Delaunay cofaces (Gabriel), otherwise at the smallest value among its cofaces.
pub fn build_alpha(cloud: &PointCloud, max_scale: f64) -> Result<FilteredComplex> {
    if !(max_scale > 0.0) {
        return Err(Error::arg(format!(
            "max_scale must be positive, got {max_scale}"
        )));
    }
    let del = delaunay_points(cloud.points())?;
    let pts = &del.coords;

    let tet_values: Vec<f64> = del.tets.iter().map(|t| sphere_of(t, pts).1).collect();
    let mut entries: Vec<(Simplex, f64)> = del
        .tets
        .iter()
        .zip(&tet_values)
        .map(|(t, &v)| (Simplex::new(t), v))
        .collect();

    // (face, coface value, vertex of the coface opposite the face)
    let mut incid: Vec<([u32; 3], f64, u32)> = Vec::with_capacity(4 * del.tets.len());
    for (t, &v) in del.tets.iter().zip(&tet_values) {
        for skip in 0..4 {
            incid.push((drop_one(t, skip), v, t[skip]));
        }
    }
    let triangles = attach(incid, pts);

    let mut incid: Vec<([u32; 2], f64, u32)> = Vec::with_capacity(3 * triangles.len());
    for &(f, v) in &triangles {
        for skip in 0..3 {
            let e = drop_one(&f, skip);
            incid.push((e, v, f[skip]));
        }
    }
    let edges = attach(incid, pts);

    let mut vertices: Vec<u32> = edges.iter().flat_map(|(e, _)| *e).collect();
    vertices.sort_unstable();
    vertices.dedup();

    entries.extend(triangles.iter().map(|(f, v)| (Simplex::new(f), *v)));
    entries.extend(edges.iter().map(|(e, v)| (Simplex::new(e), *v)));
    entries.extend(vertices.iter().map(|&u| (Simplex::vertex(u), 0.0)));
    entries.retain(|(_, v)| *v <= max_scale);
    let params = json!({
        "max_scale": if max_scale.is_finite() { json!(max_scale) } else { json!("inf") },
        "points": cloud.len(),
        "jitter": del.jitter,
    });
    Ok(FilteredComplex::from_entries(
        entries,
        ComplexKind::Alpha,
        params,
    ))
}

/// The sorted array `s` without its `skip`-th entry.
fn drop_one<const N: usize, const M: usize>(s: &[u32; N], skip: usize) -> [u32; M] {
    let mut out = [0u32; M];
    let mut k = 0;
    for (i, &x) in s.iter().enumerate() {
        if i != skip {
            out[k] = x;
            k += 1;
        }
    }
    out
}

/// Values of the faces listed in `incid`: the smallest circumradius when that
/// ball holds no opposite coface vertex, else the smallest coface value.
fn attach<const M: usize>(
    mut incid: Vec<([u32; M], f64, u32)>,
    pts: &[Point3],
) -> Vec<([u32; M], f64)> {
    incid.sort_unstable_by_key(|g| g.0);
    let mut out = Vec::with_capacity(incid.len() / 2 + 1);
    let mut i = 0;
    while i < incid.len() {
        let face = incid[i].0;
        let mut j = i;
        while j < incid.len() && incid[j].0 == face {
            j += 1;
        }
        let group = &incid[i..j];
        let min_coface = group.iter().map(|g| g.1).fold(f64::INFINITY, f64::min);
        let (centre, r) = sphere_of(&face, pts);
        let attached = group.iter().any(|g| dist(&pts[g.2 as usize], &centre) < r);
        let v = if attached {
            min_coface
        } else {
            r.min(min_coface)
        };
        out.push((face, v));
        i = j;
    }
    out
}

fn sphere_of(s: &[u32], pts: &[Point3]) -> (Point3, f64) {
    let mut q = [[0.0; 3]; 4];
    for (qi, &v) in q.iter_mut().zip(s) {
        *qi = pts[v as usize];
    }
    let q = &q[..s.len()];
    // slivers on the hull have far-away but finite centres; only an exactly
    // flat simplex falls back to its largest facet sphere
    circumsphere_tol(q, 0.0).unwrap_or_else(|| {
        (0..q.len())
            .filter_map(|i| {
                let mut f = [[0.0; 3]; 3];
                let mut m = 0;
                for (j, p) in q.iter().enumerate() {
                    if j != i {
                        f[m] = *p;
                        m += 1;
                    }
                }
                circumsphere_tol(&f[..m], 0.0)
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap_or(([f64::NAN; 3], f64::INFINITY))
    })
}
