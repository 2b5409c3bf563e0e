//! Incremental Bowyer–Watson Delaunay tetrahedralization.
//!
//! The convex hull is closed with "ghost" tetrahedra sharing a vertex at
//! infinity, so the result covers the hull exactly and no bounding
//! super-simplex is needed. Predicates are evaluated in floating point; a
//! near-zero predicate on raw input aborts the run, which is then repeated on
//! coordinates carrying a tiny deterministic per-index jitter.

use rustc_hash::FxHashMap as HashMap;

use crate::error::{Error, Result};
use crate::geometry::{circumsphere, cross, dist, dist2, dot, sub, Point3, PointCloud};

const INF: u32 = u32::MAX;
const NONE: u32 = u32::MAX;
/// Relative size below which a raw-input predicate counts as degenerate.
const DEGENERACY_TOL: f64 = 1e-10;
/// Jitter magnitudes tried in turn, relative to the bounding-box diagonal.
const JITTER_LEVELS: [f64; 3] = [1e-9, 1e-7, 1e-5];

/// Delaunay tetrahedra over a cloud, with the coordinates actually triangulated.
#[derive(Debug, Clone)]
pub struct Delaunay {
    /// Finite tetrahedra, each with sorted vertex ids.
    pub tets: Vec<[u32; 4]>,
    /// Coordinates used by the predicates (jittered copies when `jitter > 0`).
    pub coords: Vec<Point3>,
    /// Absolute jitter magnitude applied, 0 when the raw input was used.
    pub jitter: f64,
}

#[inline]
fn orient(a: &Point3, b: &Point3, c: &Point3, d: &Point3) -> f64 {
    dot(&sub(b, a), &cross(&sub(c, a), &sub(d, a)))
}

/// Signed volume of a tetrahedron (positive for positive orientation).
pub fn tetra_volume(a: &Point3, b: &Point3, c: &Point3, d: &Point3) -> f64 {
    orient(a, b, c, d) / 6.0
}

/// Positive when `e` is strictly inside the circumsphere of the positively
/// oriented tetrahedron `abcd`.
#[inline]
fn in_sphere(a: &Point3, b: &Point3, c: &Point3, d: &Point3, e: &Point3) -> f64 {
    let rows = [sub(a, e), sub(b, e), sub(c, e), sub(d, e)];
    let lift = rows.map(|r| dot(&r, &r));
    // expand along the lifted column
    let m3 = |i: usize, j: usize, k: usize| dot(&rows[i], &cross(&rows[j], &rows[k]));
    let det = -lift[0] * m3(1, 2, 3) + lift[1] * m3(0, 2, 3) - lift[2] * m3(0, 1, 3)
        + lift[3] * m3(0, 1, 2);
    -det
}

/// Magnitude scale of [`in_sphere`], for the degeneracy test.
fn in_sphere_scale(a: &Point3, b: &Point3, c: &Point3, d: &Point3, e: &Point3) -> f64 {
    let lens = [a, b, c, d].map(|p| dist(p, e));
    let longest = lens.iter().cloned().fold(0.0, f64::max);
    lens.iter().product::<f64>() * longest
}

#[derive(Debug, Clone, Copy)]
struct Tet {
    v: [u32; 4],
    n: [u32; 4],
    alive: bool,
}

struct Builder<'a> {
    pts: &'a [Point3],
    tets: Vec<Tet>,
    free: Vec<u32>,
    strict: bool,
    stamp: Vec<u32>,
    epoch: u32,
    last: u32,
    cavity: Vec<u32>,
    boundary: Vec<(u32, usize)>,
    created: Vec<([u32; 4], u32, usize)>,
    links: Vec<([u32; 2], u32, usize)>,
}

fn degenerate(what: &str) -> Error {
    Error::Degenerate(what.to_string())
}

impl<'a> Builder<'a> {
    fn p(&self, v: u32) -> &Point3 {
        &self.pts[v as usize]
    }

    fn alloc(&mut self, t: Tet) -> u32 {
        if let Some(i) = self.free.pop() {
            self.tets[i as usize] = t;
            i
        } else {
            self.tets.push(t);
            self.stamp.push(0);
            (self.tets.len() - 1) as u32
        }
    }

    /// Orientation of tet `t` with vertex `i` replaced by `q`.
    fn orient_with(&self, t: &Tet, i: usize, q: &Point3) -> f64 {
        let p: [Point3; 4] = std::array::from_fn(|k| if k == i { *q } else { *self.p(t.v[k]) });
        orient(&p[0], &p[1], &p[2], &p[3])
    }

    fn conflicts(&self, ti: u32, q: &Point3) -> Result<bool> {
        let t = &self.tets[ti as usize];
        if let Some(inf) = t.v.iter().position(|&v| v == INF) {
            let o = self.orient_with(t, inf, q);
            let mut face = [[0.0; 3]; 3];
            for (m, k) in (0..4).filter(|&k| k != inf).enumerate() {
                face[m] = *self.p(t.v[k]);
            }
            let scale = dist(&face[0], q) * dist(&face[1], q) * dist(&face[2], q);
            if o.abs() > DEGENERACY_TOL * scale {
                return Ok(o > 0.0);
            }
            if self.strict {
                return Err(degenerate("point coplanar with a hull facet"));
            }
            // coplanar with the hull facet: conflict iff inside its circumdisk
            Ok(match circumsphere(&face) {
                Some((c, r)) => dist(&c, q) < r,
                None => false,
            })
        } else {
            let [a, b, c, d] = t.v.map(|v| *self.p(v));
            let s = in_sphere(&a, &b, &c, &d, q);
            if self.strict && s.abs() <= DEGENERACY_TOL * in_sphere_scale(&a, &b, &c, &d, q) {
                return Err(degenerate("five or more cospherical points"));
            }
            Ok(s > 0.0)
        }
    }

    /// Visibility walk from the last created tetrahedron to one in conflict with `q`.
    fn locate(&mut self, q: &Point3) -> Result<u32> {
        let mut cur = self.last;
        if !self.tets[cur as usize].alive {
            cur = self.tets.iter().position(|t| t.alive).unwrap() as u32;
        }
        let limit = 4 * self.tets.len() + 16;
        let mut rot = 0usize;
        for _ in 0..limit {
            let t = self.tets[cur as usize];
            if t.v.contains(&INF) {
                if self.conflicts(cur, q)? {
                    return Ok(cur);
                }
                // step back inside through the finite facet
                let inf = t.v.iter().position(|&v| v == INF).unwrap();
                cur = t.n[inf];
                continue;
            }
            let mut moved = false;
            for k in 0..4 {
                let i = (k + rot) % 4;
                if self.orient_with(&t, i, q) < 0.0 {
                    cur = t.n[i];
                    moved = true;
                    break;
                }
            }
            rot += 1;
            if !moved {
                return Ok(cur);
            }
        }
        // walk did not settle; fall back to a scan
        for i in 0..self.tets.len() {
            if self.tets[i].alive && self.conflicts(i as u32, q)? {
                return Ok(i as u32);
            }
        }
        Err(degenerate("no tetrahedron in conflict with inserted point"))
    }

    fn insert(&mut self, pv: u32) -> Result<()> {
        let q = *self.p(pv);
        let start = self.locate(&q)?;
        if !self.conflicts(start, &q)? {
            return Err(degenerate("located tetrahedron is not in conflict"));
        }
        self.epoch += 1;
        let epoch = self.epoch;
        let mut cavity = std::mem::take(&mut self.cavity);
        let mut boundary = std::mem::take(&mut self.boundary);
        let mut created = std::mem::take(&mut self.created);
        let mut links = std::mem::take(&mut self.links);
        cavity.clear();
        boundary.clear();
        created.clear();
        links.clear();
        cavity.push(start);
        self.stamp[start as usize] = epoch;
        let mut head = 0;
        while head < cavity.len() {
            let t = cavity[head];
            head += 1;
            for i in 0..4 {
                let nb = self.tets[t as usize].n[i];
                if self.stamp[nb as usize] == epoch {
                    continue;
                }
                if self.conflicts(nb, &q)? {
                    self.stamp[nb as usize] = epoch;
                    cavity.push(nb);
                } else {
                    boundary.push((t, i));
                }
            }
        }
        // (vertices, outside neighbour, slot of the shared face in the outside tet)
        for &(t, i) in &boundary {
            let old = self.tets[t as usize];
            let mut v = old.v;
            v[i] = pv;
            if !v.contains(&INF) {
                let [a, b, c, d] = v.map(|x| *self.p(x));
                let o = orient(&a, &b, &c, &d);
                let scale = dist(&a, &b) * dist(&a, &c) * dist(&a, &d);
                if o <= 0.0 || (self.strict && o <= DEGENERACY_TOL * scale) {
                    return Err(degenerate("cavity is not star-shaped from the new point"));
                }
            }
            let outside = old.n[i];
            let slot = self.tets[outside as usize]
                .n
                .iter()
                .position(|&x| x == t)
                .expect("adjacency is symmetric");
            created.push((v, outside, slot));
        }
        for &t in &cavity {
            self.tets[t as usize].alive = false;
            self.free.push(t);
        }
        // new tets meet across faces through the new point, keyed by the opposite edge
        let mut newest = NONE;
        for &(v, outside, slot) in &created {
            let id = self.alloc(Tet {
                v,
                n: [NONE; 4],
                alive: true,
            });
            newest = id;
            let i = v.iter().position(|&x| x == pv).unwrap();
            self.tets[id as usize].n[i] = outside;
            self.tets[outside as usize].n[slot] = id;
            for j in 0..4 {
                if j != i {
                    let mut e = [0u32; 2];
                    let mut m = 0;
                    for (l, &x) in v.iter().enumerate() {
                        if l != i && l != j {
                            e[m] = x;
                            m += 1;
                        }
                    }
                    e.sort_unstable();
                    links.push((e, id, j));
                }
            }
        }
        links.sort_unstable_by_key(|l| l.0);
        if !links.len().is_multiple_of(2) {
            return Err(degenerate("cavity boundary is not a closed surface"));
        }
        for (k, pair) in links.chunks_exact(2).enumerate() {
            let ((ka, a, ja), (kb, b, jb)) = (pair[0], pair[1]);
            if ka != kb || (k > 0 && links[2 * k - 1].0 == ka) {
                return Err(degenerate("cavity boundary is not a closed surface"));
            }
            self.tets[a as usize].n[ja] = b;
            self.tets[b as usize].n[jb] = a;
        }
        self.cavity = cavity;
        self.boundary = boundary;
        self.created = created;
        self.links = links;
        self.last = newest;
        Ok(())
    }
}

/// Sorted vertex triple of the face opposite position `j`.
fn face_key(v: &[u32; 4], j: usize) -> [u32; 3] {
    let mut key = [0u32; 3];
    let mut m = 0;
    for (l, &x) in v.iter().enumerate() {
        if l != j {
            key[m] = x;
            m += 1;
        }
    }
    key.sort_unstable();
    key
}

fn morton_key(p: &Point3, lo: &Point3, inv: f64) -> u64 {
    fn spread(mut x: u64) -> u64 {
        x &= 0x1f_ffff;
        x = (x | x << 32) & 0x1f00000000ffff;
        x = (x | x << 16) & 0x1f0000ff0000ff;
        x = (x | x << 8) & 0x100f00f00f00f00f;
        x = (x | x << 4) & 0x10c30c30c30c30c3;
        x = (x | x << 2) & 0x1249249249249249;
        x
    }
    let q = |a: usize| (((p[a] - lo[a]) * inv).clamp(0.0, 2_097_151.0)) as u64;
    spread(q(0)) | spread(q(1)) << 1 | spread(q(2)) << 2
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Deterministic jitter of magnitude `eps`, seeded by point index.
fn jittered(points: &[Point3], eps: f64) -> Vec<Point3> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut out = *p;
            for (a, c) in out.iter_mut().enumerate() {
                let h = splitmix((i as u64) * 3 + a as u64);
                let u = (h >> 11) as f64 / (1u64 << 53) as f64;
                *c += eps * (2.0 * u - 1.0);
            }
            out
        })
        .collect()
}

fn triangulate(pts: &[Point3], strict: bool) -> Result<Vec<[u32; 4]>> {
    let n = pts.len();
    let (lo, hi) = crate::geometry::bounding_box(pts);
    let diag = dist(&lo, &hi);
    let span = (0..3)
        .map(|a| hi[a] - lo[a])
        .fold(0.0, f64::max)
        .max(1e-300);
    let inv = 2_097_151.0 / span;
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.sort_by_key(|&i| (morton_key(&pts[i as usize], &lo, inv), i));

    // initial tetrahedron: spread-out, non-degenerate quadruple
    let p0 = order[0];
    let far = |from: &dyn Fn(u32) -> f64| -> u32 {
        let mut best = 0u32;
        let mut bd = -1.0;
        for i in 0..n as u32 {
            let d = from(i);
            if d > bd {
                bd = d;
                best = i;
            }
        }
        best
    };
    let p1 = far(&|i| dist2(&pts[i as usize], &pts[p0 as usize]));
    let a = pts[p0 as usize];
    let ab = sub(&pts[p1 as usize], &a);
    let p2 = far(&|i| {
        let c = cross(&ab, &sub(&pts[i as usize], &a));
        dot(&c, &c)
    });
    let p3 = far(&|i| orient(&a, &pts[p1 as usize], &pts[p2 as usize], &pts[i as usize]).abs());
    let o = orient(&a, &pts[p1 as usize], &pts[p2 as usize], &pts[p3 as usize]);
    if o.abs() <= DEGENERACY_TOL * diag.powi(3) || diag == 0.0 {
        return Err(degenerate("all points are coplanar"));
    }
    let first = if o > 0.0 {
        [p0, p1, p2, p3]
    } else {
        [p0, p2, p1, p3]
    };

    let mut b = Builder {
        pts,
        tets: Vec::with_capacity(7 * n + 16),
        free: Vec::new(),
        strict,
        stamp: Vec::with_capacity(7 * n + 16),
        epoch: 0,
        last: 0,
        cavity: Vec::new(),
        boundary: Vec::new(),
        created: Vec::new(),
        links: Vec::new(),
    };
    let t0 = b.alloc(Tet {
        v: first,
        n: [NONE; 4],
        alive: true,
    });
    let mut faces: HashMap<[u32; 3], (u32, usize)> = HashMap::default();
    let mut all = vec![t0];
    for i in 0..4 {
        let mut v = first;
        v[i] = INF;
        // flip orientation so the infinite vertex sits outside
        let (x, y) = match i {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        v.swap(x, y);
        let g = b.alloc(Tet {
            v,
            n: [NONE; 4],
            alive: true,
        });
        all.push(g);
    }
    for &t in &all {
        let v = b.tets[t as usize].v;
        for j in 0..4 {
            let key = face_key(&v, j);
            if let Some((other, oj)) = faces.remove(&key) {
                b.tets[t as usize].n[j] = other;
                b.tets[other as usize].n[oj] = t;
            } else {
                faces.insert(key, (t, j));
            }
        }
    }
    debug_assert!(faces.is_empty());
    b.last = t0;

    for &pv in &order {
        if first.contains(&pv) {
            continue;
        }
        b.insert(pv)?;
    }
    let mut out: Vec<[u32; 4]> = b
        .tets
        .iter()
        .filter(|t| t.alive && !t.v.contains(&INF))
        .map(|t| {
            let mut v = t.v;
            v.sort_unstable();
            v
        })
        .collect();
    out.sort_unstable();
    Ok(out)
}

fn has_duplicates(points: &[Point3]) -> bool {
    let mut sorted: Vec<&Point3> = points.iter().collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sorted.windows(2).any(|w| w[0] == w[1])
}

/// Delaunay tetrahedralization of a cloud with at least four points.
pub fn delaunay3(cloud: &PointCloud) -> Result<Delaunay> {
    delaunay_points(cloud.points())
}

pub(crate) fn delaunay_points(points: &[Point3]) -> Result<Delaunay> {
    if points.len() < 4 {
        return Err(Error::arg(format!(
            "Delaunay needs at least 4 points, got {}",
            points.len()
        )));
    }
    if !has_duplicates(points) {
        if let Ok(tets) = triangulate(points, true) {
            return Ok(Delaunay {
                tets,
                coords: points.to_vec(),
                jitter: 0.0,
            });
        }
    }
    let (lo, hi) = crate::geometry::bounding_box(points);
    let diag = dist(&lo, &hi).max(1.0e-300);
    let mut last_err = degenerate("jitter did not resolve degeneracy");
    for level in JITTER_LEVELS {
        let eps = level * diag;
        let coords = jittered(points, eps);
        match triangulate(&coords, false) {
            Ok(tets) => {
                log::debug!("delaunay: degenerate input resolved with jitter {eps:e}");
                return Ok(Delaunay {
                    tets,
                    coords,
                    jitter: eps,
                });
            }
            Err(e) => last_err = e,
        }
    }
    Err(last_err)
}
