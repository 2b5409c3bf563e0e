//! Fixed-size summaries of persistence diagrams.

use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::fmt::g17;
use crate::persistence::PersistenceDiagram;

/// Default persistence image resolution (rows, cols).
pub const PI_DEFAULT_RESOLUTION: (usize, usize) = (50, 50);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PiWeight {
    /// `w = min(d, death_cap) - b`, unnormalized.
    PersistenceLinear,
    Constant,
}

/// Grid and kernel of a persistence image. Rows index persistence, columns birth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceImageParams {
    pub resolution: (usize, usize),
    pub bandwidth: f64,
    pub birth_range: (f64, f64),
    pub persistence_range: (f64, f64),
    pub weight: PiWeight,
    pub death_cap: f64,
}

impl PersistenceImageParams {
    /// Ranges covering the diagrams' points, bandwidth 5% of the wider range,
    /// essential deaths capped at 1.1 times the largest finite death.
    pub fn fit(diagrams: &[&PersistenceDiagram], resolution: (usize, usize)) -> Self {
        let death_cap = default_death_cap(diagrams);
        let mut bmin = f64::INFINITY;
        let mut bmax = f64::NEG_INFINITY;
        let mut pmax: f64 = 0.0;
        for d in diagrams {
            for p in &d.pairs {
                bmin = bmin.min(p.birth);
                bmax = bmax.max(p.birth);
                pmax = pmax.max(p.death.min(death_cap) - p.birth);
            }
        }
        if !bmin.is_finite() {
            (bmin, bmax) = (0.0, 1.0);
        }
        if pmax <= 0.0 {
            pmax = 1.0;
        }
        let bw = (bmax - bmin).max(pmax * 0.5);
        let birth_range = (bmin - 0.1 * bw, bmax + 0.1 * bw);
        let persistence_range = (0.0, pmax * 1.1);
        let bandwidth = 0.05 * (birth_range.1 - birth_range.0).max(persistence_range.1);
        PersistenceImageParams {
            resolution,
            bandwidth,
            birth_range,
            persistence_range,
            weight: PiWeight::PersistenceLinear,
            death_cap,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (r, c) = self.resolution;
        if r == 0 || c == 0 {
            return Err(Error::arg("resolution must be positive"));
        }
        if !(self.bandwidth > 0.0) || !self.bandwidth.is_finite() {
            return Err(Error::arg(format!(
                "bandwidth must be positive, got {}",
                self.bandwidth
            )));
        }
        for (name, (lo, hi)) in [
            ("birth", self.birth_range),
            ("persistence", self.persistence_range),
        ] {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::arg(format!(
                    "{name} range [{lo}, {hi}] is degenerate"
                )));
            }
        }
        if !(self.death_cap > 0.0) || !self.death_cap.is_finite() {
            return Err(Error::arg(format!(
                "death_cap must be positive, got {}",
                self.death_cap
            )));
        }
        Ok(())
    }
}

/// 1.1 times the largest finite death, or 1 when there is none.
pub fn default_death_cap(diagrams: &[&PersistenceDiagram]) -> f64 {
    let m = diagrams
        .iter()
        .flat_map(|d| d.pairs.iter())
        .filter(|p| p.death.is_finite())
        .map(|p| p.death)
        .fold(f64::NEG_INFINITY, f64::max);
    if m.is_finite() && m > 0.0 {
        1.1 * m
    } else {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SummaryKind {
    Pi,
    Landscape,
    BettiCurve,
    TopkPd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorizedSummary {
    pub kind: SummaryKind,
    pub data: Vec<f64>,
    pub shape: Vec<usize>,
    pub params: serde_json::Value,
}

impl VectorizedSummary {
    /// Value at a 2D index of a `[rows, cols]` summary.
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.shape[1] + c]
    }

    /// Row-major CSV: one line per row of the last axis.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let cols = *self.shape.last().unwrap_or(&0);
        if cols == 0 {
            return Ok(());
        }
        for row in self.data.chunks(cols) {
            let line: Vec<String> = row.iter().map(|v| g17(*v)).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    /// JSON sidecar `{kind, shape, params}`.
    pub fn sidecar(&self) -> serde_json::Value {
        json!({ "kind": self.kind, "shape": self.shape, "params": self.params })
    }
}

/// Standard normal CDF.
fn phi(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Mass of a 1D Gaussian `N(c, s^2)` on each cell of a uniform grid over `[lo, hi]`.
/// Cells above the mean use upper-tail differences to keep relative accuracy.
fn cell_masses(c: f64, s: f64, lo: f64, hi: f64, n: usize, out: &mut Vec<f64>) {
    out.clear();
    let h = (hi - lo) / n as f64;
    let edge = |i: usize| if i == n { hi } else { lo + i as f64 * h };
    for i in 0..n {
        let (z0, z1) = ((edge(i) - c) / s, (edge(i + 1) - c) / s);
        out.push(if z0 >= 0.0 {
            phi(-z0) - phi(-z1)
        } else {
            phi(z1) - phi(z0)
        });
    }
}

/// Persistence image by exact integration of each Gaussian over every pixel.
pub fn persistence_image(
    d: &PersistenceDiagram,
    params: &PersistenceImageParams,
) -> Result<VectorizedSummary> {
    params.validate()?;
    let (rows, cols) = params.resolution;
    let mut data = vec![0.0; rows * cols];
    let (mut mx, mut my) = (Vec::new(), Vec::new());
    for p in &d.pairs {
        let death = p.death.min(params.death_cap);
        let pers = death - p.birth;
        let w = match params.weight {
            PiWeight::PersistenceLinear => pers.max(0.0),
            PiWeight::Constant => 1.0,
        };
        if w == 0.0 {
            continue;
        }
        let (b0, b1) = params.birth_range;
        let (p0, p1) = params.persistence_range;
        cell_masses(p.birth, params.bandwidth, b0, b1, cols, &mut mx);
        cell_masses(pers, params.bandwidth, p0, p1, rows, &mut my);
        for (r, &yr) in my.iter().enumerate() {
            if yr == 0.0 {
                continue;
            }
            let row = &mut data[r * cols..(r + 1) * cols];
            for (v, &xc) in row.iter_mut().zip(&mx) {
                *v += w * yr * xc;
            }
        }
    }
    Ok(VectorizedSummary {
        kind: SummaryKind::Pi,
        data,
        shape: vec![rows, cols],
        params: serde_json::to_value(params)?,
    })
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.iter().any(|t| !t.is_finite()) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::arg(
            "sample grid must be finite and strictly increasing",
        ));
    }
    Ok(())
}

/// `n` evenly spaced points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Landscape functions `λ_1..λ_kmax` sampled on `grid`, shape `[kmax, grid.len()]`.
/// Essential pairs are capped at `death_cap` (default 1.1 times the largest finite death).
pub fn persistence_landscape(
    d: &PersistenceDiagram,
    k_max: usize,
    grid: &[f64],
    death_cap: Option<f64>,
) -> Result<VectorizedSummary> {
    if k_max == 0 {
        return Err(Error::arg("landscape needs at least one level"));
    }
    check_grid(grid)?;
    let cap = death_cap.unwrap_or_else(|| default_death_cap(&[d]));
    let n = grid.len();
    let mut data = vec![0.0; k_max * n];
    let mut tents = Vec::with_capacity(d.pairs.len());
    for (i, &t) in grid.iter().enumerate() {
        tents.clear();
        for p in &d.pairs {
            let v = (t - p.birth).min(p.death.min(cap) - t);
            if v > 0.0 {
                tents.push(v);
            }
        }
        tents.sort_unstable_by(|a, b| b.total_cmp(a));
        for (k, &v) in tents.iter().take(k_max).enumerate() {
            data[k * n + i] = v;
        }
    }
    Ok(VectorizedSummary {
        kind: SummaryKind::Landscape,
        data,
        shape: vec![k_max, n],
        params: json!({ "levels": k_max, "grid": grid, "death_cap": cap }),
    })
}

/// Number of pairs alive at each grid point (`b <= t < d`).
pub fn betti_curve(d: &PersistenceDiagram, grid: &[f64]) -> Result<VectorizedSummary> {
    check_grid(grid)?;
    let data = grid
        .iter()
        .map(|&t| {
            d.pairs
                .iter()
                .filter(|p| p.birth <= t && t < p.death)
                .count() as f64
        })
        .collect();
    Ok(VectorizedSummary {
        kind: SummaryKind::BettiCurve,
        data,
        shape: vec![grid.len()],
        params: json!({ "dim": d.dim, "grid": grid }),
    })
}

/// The `k` most persistent pairs of dimensions 1 and 2 as `(birth, persistence)`,
/// zero padded, length `4k`. Diagrams are looked up by their `dim`.
pub fn topk_pd_vector(
    diagrams: &[PersistenceDiagram],
    k: usize,
    death_cap: f64,
) -> Result<VectorizedSummary> {
    if k == 0 {
        return Err(Error::arg("k must be positive"));
    }
    if !(death_cap > 0.0) {
        return Err(Error::arg(format!(
            "death_cap must be positive, got {death_cap}"
        )));
    }
    let mut data = vec![0.0; 4 * k];
    for (block, dim) in [1usize, 2].into_iter().enumerate() {
        let Some(d) = diagrams.iter().find(|d| d.dim == dim) else {
            continue;
        };
        let mut pts: Vec<(f64, f64)> = d
            .pairs
            .iter()
            .map(|p| (p.birth, p.death.min(death_cap) - p.birth))
            .collect();
        pts.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.total_cmp(&b.0)));
        for (i, (b, p)) in pts.into_iter().take(k).enumerate() {
            data[block * 2 * k + 2 * i] = b;
            data[block * 2 * k + 2 * i + 1] = p;
        }
    }
    Ok(VectorizedSummary {
        kind: SummaryKind::TopkPd,
        data,
        shape: vec![4 * k],
        params: json!({ "k": k, "death_cap": death_cap, "dims": [1, 2] }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{bottleneck_distance, wasserstein_distance};
    use crate::persistence::{betti_at, Diagrams};
    use proptest::prelude::*;

    fn dgm(dim: usize, pts: &[(f64, f64)]) -> PersistenceDiagram {
        PersistenceDiagram::from_points(dim, pts)
    }

    fn params(bw: f64) -> PersistenceImageParams {
        PersistenceImageParams {
            resolution: (20, 30),
            bandwidth: bw,
            birth_range: (0.0, 2.0),
            persistence_range: (0.0, 1.5),
            weight: PiWeight::PersistenceLinear,
            death_cap: 5.0,
        }
    }

    /// Composite Simpson rule for the Gaussian over the image rectangle.
    fn simpson_mass(cx: f64, cy: f64, s: f64, p: &PersistenceImageParams) -> f64 {
        let n = 600;
        let (x0, x1) = p.birth_range;
        let (y0, y1) = p.persistence_range;
        let (hx, hy) = ((x1 - x0) / n as f64, (y1 - y0) / n as f64);
        let wt = |i: usize| {
            if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            }
        };
        let norm = 1.0 / (2.0 * std::f64::consts::PI * s * s);
        let mut acc = 0.0;
        for i in 0..=n {
            let x = x0 + i as f64 * hx;
            for j in 0..=n {
                let y = y0 + j as f64 * hy;
                let r2 = (x - cx).powi(2) + (y - cy).powi(2);
                acc += wt(i) * wt(j) * norm * (-r2 / (2.0 * s * s)).exp();
            }
        }
        acc * hx * hy / 9.0
    }

    #[test]
    fn empty_diagram_gives_zero_image() {
        let pi = persistence_image(&dgm(1, &[]), &params(0.1)).unwrap();
        assert!(pi.data.iter().all(|&v| v == 0.0));
        assert_eq!(pi.shape, vec![20, 30]);
    }

    #[test]
    fn centred_pair_is_symmetric() {
        let p = params(0.2);
        // centre (1.0, 0.75) is the middle of the grid
        let pi = persistence_image(&dgm(1, &[(1.0, 1.75)]), &p).unwrap();
        let (r, c) = p.resolution;
        for i in 0..r {
            for j in 0..c {
                assert!((pi.at(i, j) - pi.at(r - 1 - i, c - 1 - j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pixel_sum_matches_quadrature() {
        let mut state = 11u64;
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..10 {
            let b = next() * 2.0;
            let pers = 0.05 + next() * 1.4;
            let bw = 0.05 + next() * 0.3;
            let p = params(bw);
            let pi = persistence_image(&dgm(1, &[(b, b + pers)]), &p).unwrap();
            let sum: f64 = pi.data.iter().sum();
            let expect = pers * simpson_mass(b, pers, bw, &p);
            assert!((sum - expect).abs() <= 1e-6 * expect, "{sum} vs {expect}");
        }
    }

    #[test]
    fn essential_pairs_use_death_cap() {
        let p = params(0.1);
        let a = persistence_image(&dgm(1, &[(0.5, f64::INFINITY)]), &p).unwrap();
        let b = persistence_image(&dgm(1, &[(0.5, 5.0)]), &p).unwrap();
        assert_eq!(a.data, b.data);
    }

    #[test]
    fn landscape_examples() {
        let l = persistence_landscape(&dgm(1, &[(0.0, 2.0)]), 2, &[0.0, 1.0, 2.0], None).unwrap();
        assert_eq!(l.data, vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let l = persistence_landscape(&dgm(1, &[(0.0, 2.0), (1.0, 3.0)]), 2, &[1.0, 1.5], None)
            .unwrap();
        assert_eq!(l.at(0, 0), 1.0);
        assert_eq!(l.at(1, 0), 0.0);
        assert_eq!(l.at(0, 1), 0.5);
        assert_eq!(l.at(1, 1), 0.5);
        assert!(persistence_landscape(&dgm(1, &[]), 1, &[1.0, 0.0], None).is_err());
    }

    #[test]
    fn betti_curve_examples() {
        let c = betti_curve(&dgm(1, &[]), &[0.0, 1.0]).unwrap();
        assert_eq!(c.data, vec![0.0, 0.0]);
        let c = betti_curve(&dgm(1, &[(0.0, 2.0)]), &[-1.0, 1.0, 3.0]).unwrap();
        assert_eq!(c.data, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn topk_examples() {
        let v = topk_pd_vector(&[dgm(1, &[]), dgm(2, &[])], 3, 1.0).unwrap();
        assert_eq!(v.data, vec![0.0; 12]);
        let v = topk_pd_vector(&[dgm(1, &[(0.0, 1.0), (0.0, 3.0)]), dgm(2, &[])], 2, 10.0).unwrap();
        assert_eq!(v.data, vec![0.0, 3.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn csv_and_sidecar() {
        let l = persistence_landscape(&dgm(1, &[(0.0, 2.0)]), 2, &[0.0, 1.0], None).unwrap();
        let mut buf = Vec::new();
        l.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "0,1\n0,0\n");
        assert_eq!(l.sidecar()["shape"], json!([2, 2]));
        assert_eq!(l.sidecar()["kind"], json!("landscape"));
    }

    fn arb_diagram(max: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec(
            (0.0..2.0f64, 0.0..1.4f64).prop_map(|(b, l)| (b, b + l)),
            0..=max,
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn image_is_additive(a in arb_diagram(6), b in arb_diagram(6)) {
            let p = params(0.15);
            let both: Vec<(f64, f64)> = a.iter().chain(&b).copied().collect();
            let ia = persistence_image(&dgm(1, &a), &p).unwrap();
            let ib = persistence_image(&dgm(1, &b), &p).unwrap();
            let iab = persistence_image(&dgm(1, &both), &p).unwrap();
            for k in 0..iab.data.len() {
                prop_assert!((iab.data[k] - ia.data[k] - ib.data[k]).abs() <= 1e-12);
            }
        }

        #[test]
        fn landscape_order_and_lipschitz(a in arb_diagram(8)) {
            let grid = linspace(-0.5, 3.5, 81);
            let l = persistence_landscape(&dgm(1, &a), 4, &grid, None).unwrap();
            let h = grid[1] - grid[0];
            for k in 0..4 {
                for i in 0..grid.len() {
                    if k + 1 < 4 {
                        prop_assert!(l.at(k, i) >= l.at(k + 1, i));
                    }
                    if i + 1 < grid.len() {
                        prop_assert!((l.at(k, i + 1) - l.at(k, i)).abs() <= h + 1e-12);
                    }
                }
            }
        }

        #[test]
        fn betti_curve_agrees_with_betti_at(a in arb_diagram(10), dim in 0usize..3) {
            let d = dgm(dim, &a);
            let mut all = vec![dgm(0, &[]), dgm(1, &[]), dgm(2, &[])];
            all[dim] = d.clone();
            let ds = Diagrams { diagrams: all, stats: Default::default() };
            let grid = linspace(-0.1, 3.5, 50);
            let c = betti_curve(&d, &grid).unwrap();
            for (i, &t) in grid.iter().enumerate() {
                prop_assert_eq!(c.data[i] as usize, betti_at(&ds, t)[dim]);
            }
        }

        #[test]
        fn topk_prefix_consistent(a in arb_diagram(8), k in 1usize..6) {
            let ds = [dgm(1, &a), dgm(2, &a[..a.len() / 2])];
            let small = topk_pd_vector(&ds, k, 10.0).unwrap();
            let big = topk_pd_vector(&ds, k + 1, 10.0).unwrap();
            for block in 0..2 {
                prop_assert_eq!(&small.data[block * 2 * k..(block + 1) * 2 * k], &big.data[block * 2 * (k + 1)..block * 2 * (k + 1) + 2 * k]);
            }
        }

        #[test]
        fn perturbations_are_controlled(a in arb_diagram(6), shifts in prop::collection::vec((-0.02..0.02f64, -0.02..0.02f64), 6)) {
            let moved: Vec<(f64, f64)> = a
                .iter()
                .zip(&shifts)
                .map(|(&(b, d), &(sb, sd))| (b + sb, (d + sd).max(b + sb)))
                .collect();
            let (da, dm) = (dgm(1, &a), dgm(1, &moved));
            let w1 = wasserstein_distance(&da, &dm, 1.0).unwrap().cost;
            prop_assume!(w1 > 0.0 && w1 <= 0.1);
            let p = params(0.15);
            // |d pixel| <= (2 + 3 W / (bandwidth sqrt(2 pi))) per unit of L-inf
            // transport, W the largest persistence (weight) in play
            let wmax = a.iter().chain(&moved).map(|x| x.1 - x.0).fold(0.0, f64::max) + 0.1;
            let c = 2.0 + 3.0 * wmax / (p.bandwidth * (2.0 * std::f64::consts::PI).sqrt());
            let ia = persistence_image(&da, &p).unwrap();
            let im = persistence_image(&dm, &p).unwrap();
            let linf = ia.data.iter().zip(&im.data).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            prop_assert!(linf / w1 <= c, "{} > {}", linf / w1, c);
            let grid = linspace(-0.5, 3.5, 161);
            let la = persistence_landscape(&da, 3, &grid, Some(10.0)).unwrap();
            let lm = persistence_landscape(&dm, 3, &grid, Some(10.0)).unwrap();
            let dl = la.data.iter().zip(&lm.data).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            let db = bottleneck_distance(&da, &dm).unwrap().cost;
            prop_assert!(dl <= db + 1e-12 && db <= w1 + 1e-12);
        }
    }

    #[test]
    fn fit_covers_points() {
        let d = dgm(1, &[(0.2, 1.0), (0.5, f64::INFINITY)]);
        let p = PersistenceImageParams::fit(&[&d], PI_DEFAULT_RESOLUTION);
        p.validate().unwrap();
        assert!((p.death_cap - 1.1).abs() < 1e-15);
        assert!(p.birth_range.0 < 0.2 && p.birth_range.1 > 0.5);
        assert!(p.persistence_range.1 >= 0.8);
    }
}
