use serde_json::json;

use super::{ComplexKind, FilteredComplex, Simplex, MAX_SIMPLEX_DIM};
use crate::error::{Error, Result};
use crate::geometry::{dist, PointCloud, SpatialGrid};

/// Forward neighbour lists: for each u, the (v, d(u,v)) with v > u and d <= scale, sorted by v.
fn forward_neighbours(cloud: &PointCloud, scale: f64) -> Vec<Vec<(u32, f64)>> {
    let pts = cloud.points();
    let n = pts.len();
    let mut adj: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
    if scale.is_infinite() || scale >= cloud.bbox_diagonal() {
        for (u, list) in adj.iter_mut().enumerate() {
            for v in u + 1..n {
                let d = dist(&pts[u], &pts[v]);
                if d <= scale {
                    list.push((v as u32, d));
                }
            }
        }
        return adj;
    }
    let grid = SpatialGrid::with_cell_size(pts, scale);
    let mut buf = Vec::new();
    for (u, list) in adj.iter_mut().enumerate() {
        // inflate slightly so the exact check below decides inclusion
        grid.within(&pts[u], scale * (1.0 + 1e-12), &mut buf);
        for &v in &buf {
            if v > u {
                let d = dist(&pts[u], &pts[v]);
                if d <= scale {
                    list.push((v as u32, d));
                }
            }
        }
        list.sort_unstable_by_key(|e| e.0);
    }
    adj
}

/// Intersects two id-sorted lists, yielding (id, value_a, value_b).
fn intersect(
    a: &[(u32, f64)],
    b: &[(u32, f64)],
    out: &mut Vec<(u32, f64)>,
    combine: impl Fn(f64, f64) -> f64,
) {
    out.clear();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push((a[i].0, combine(a[i].1, b[j].1)));
                i += 1;
                j += 1;
            }
        }
    }
}

/// Enumerates every clique of the `scale`-neighbourhood graph up to `max_dim`,
/// calling `emit` with each simplex and its diameter.
fn enumerate(cloud: &PointCloud, scale: f64, max_dim: usize, mut emit: impl FnMut(Simplex, f64)) {
    let adj = forward_neighbours(cloud, scale);
    let mut c_uv = Vec::new();
    let mut c_uvw = Vec::new();
    for (u, nu) in adj.iter().enumerate() {
        let u = u as u32;
        emit(Simplex::vertex(u), 0.0);
        if max_dim == 0 {
            continue;
        }
        for &(v, duv) in nu {
            emit(
                Simplex {
                    v: [u, v, 0, 0],
                    len: 2,
                },
                duv,
            );
            if max_dim < 2 {
                continue;
            }
            // common forward neighbours w > v, carrying max(d(u,w), d(v,w))
            intersect(nu, &adj[v as usize], &mut c_uv, f64::max);
            for &(w, dw) in &c_uv {
                let tri = duv.max(dw);
                emit(
                    Simplex {
                        v: [u, v, w, 0],
                        len: 3,
                    },
                    tri,
                );
                if max_dim < 3 {
                    continue;
                }
                intersect(&c_uv, &adj[w as usize], &mut c_uvw, f64::max);
                for &(x, dx) in &c_uvw {
                    emit(
                        Simplex {
                            v: [u, v, w, x],
                            len: 4,
                        },
                        tri.max(dx),
                    );
                }
            }
        }
    }
}

fn check_args(max_scale: f64, max_dim: usize) -> Result<()> {
    if !(max_scale > 0.0) {
        return Err(Error::arg(format!(
            "max_scale must be positive, got {max_scale}"
        )));
    }
    if max_dim > MAX_SIMPLEX_DIM {
        return Err(Error::arg(format!(
            "max_dim must be <= {MAX_SIMPLEX_DIM}, got {max_dim}"
        )));
    }
    Ok(())
}

/// Vietoris–Rips complex: a simplex enters at its diameter (longest edge).
/// `max_scale` may be `f64::INFINITY` for the full complex.
pub fn build_rips(cloud: &PointCloud, max_scale: f64, max_dim: usize) -> Result<FilteredComplex> {
    check_args(max_scale, max_dim)?;
    let mut entries = Vec::new();
    enumerate(cloud, max_scale, max_dim, |s, v| entries.push((s, v)));
    let params = json!({
        "max_scale": if max_scale.is_finite() { json!(max_scale) } else { json!("inf") },
        "max_dim": max_dim,
        "points": cloud.len(),
    });
    Ok(FilteredComplex::from_entries(
        entries,
        ComplexKind::Rips,
        params,
    ))
}

/// Number of simplices `build_rips` would produce, without materializing them.
pub fn rips_simplex_count(cloud: &PointCloud, max_scale: f64, max_dim: usize) -> Result<usize> {
    check_args(max_scale, max_dim)?;
    let mut n = 0usize;
    enumerate(cloud, max_scale, max_dim, |_, _| n += 1);
    Ok(n)
}
