//! Benchmark shapes and the scaling and stability harnesses.

use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::complex::{
    build_alpha, build_cech, build_cubical, build_flood, build_rips, build_witness,
    rips_simplex_count, AnyComplex, ComplexKind,
};
use crate::error::{Error, Result};
use crate::geometry::{add_gaussian_noise, downsample_random, Point3, PointCloud};
use crate::metrics::wasserstein_cost;
use crate::persistence::{compute_persistence, Diagrams, PersistenceDiagram};

pub const TORUS_MAJOR: f64 = 1.0;
pub const TORUS_MINOR: f64 = 0.35;
pub const SOLID_TORUS_MAJOR: f64 = 2.5;
pub const SOLID_TORUS_MINOR: f64 = 0.5;
pub const SOLID_TORUS_OFFSET: f64 = 4.0;
/// Points in the blob of the circle-plus-blob shape.
pub const BLOB_POINTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    SphereTorus,
    Torus,
    Sphere,
    CircleBlob,
}

impl FromStr for ShapeKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sphere_torus" => Ok(ShapeKind::SphereTorus),
            "torus" => Ok(ShapeKind::Torus),
            "sphere" => Ok(ShapeKind::Sphere),
            "circle_blob" => Ok(ShapeKind::CircleBlob),
            _ => Err(Error::arg(format!(
                "unknown shape {s:?}; expected sphere_torus, torus, sphere or circle_blob"
            ))),
        }
    }
}

/// Generator record for reports.
pub fn shape_params(kind: ShapeKind) -> serde_json::Value {
    match kind {
        ShapeKind::SphereTorus => json!({
            "shape": kind,
            "ball": { "radius": 1.0, "center": [0.0, 0.0, 0.0] },
            "solid_torus": { "major": SOLID_TORUS_MAJOR, "minor": SOLID_TORUS_MINOR, "center": [SOLID_TORUS_OFFSET, 0.0, 0.0], "axis": "z" },
            "split": "proportional to volume",
        }),
        ShapeKind::Torus => {
            json!({ "shape": kind, "major": TORUS_MAJOR, "minor": TORUS_MINOR, "axis": "z", "sampling": "uniform on surface" })
        }
        ShapeKind::Sphere => {
            json!({ "shape": kind, "radius": 1.0, "sampling": "uniform on surface" })
        }
        ShapeKind::CircleBlob => json!({
            "shape": kind,
            "circle": { "radius": 1.0, "plane": "xy", "angle_jitter": 0.3 },
            "blob": { "points": BLOB_POINTS, "center": [3.0, 0.0, 0.0], "sigma": 0.02 },
        }),
    }
}

/// Deterministic sample of `n >= 10` points from a bench shape.
pub fn generate_bench_shape(kind: ShapeKind, n: usize, seed: u64) -> Result<PointCloud> {
    if n < 10 {
        return Err(Error::arg(format!(
            "bench shapes need at least 10 points, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = match kind {
        ShapeKind::Sphere => (0..n).map(|_| unit_vector(&mut rng)).collect(),
        ShapeKind::Torus => (0..n).map(|_| torus_surface_point(&mut rng)).collect(),
        ShapeKind::SphereTorus => sphere_torus(n, &mut rng),
        ShapeKind::CircleBlob => return Ok(circle_blob(n, seed)),
    };
    Ok(PointCloud::new(
        pts,
        format!(
            "{}:{n}:{seed}",
            serde_json::to_value(kind)?.as_str().unwrap_or("shape")
        ),
    )?
    .with_seed(seed))
}

fn unit_vector(rng: &mut ChaCha8Rng) -> Point3 {
    let normal = Normal::new(0.0, 1.0).unwrap();
    loop {
        let v: Point3 = [normal.sample(rng), normal.sample(rng), normal.sample(rng)];
        let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if r > 1e-6 {
            return v.map(|c| c / r);
        }
    }
}

/// Area-uniform point on the torus surface: the tube angle is accepted with
/// probability proportional to the local circumference.
fn torus_surface_point(rng: &mut ChaCha8Rng) -> Point3 {
    let (r_maj, r_min) = (TORUS_MAJOR, TORUS_MINOR);
    loop {
        let u = rng.random::<f64>() * std::f64::consts::TAU;
        let v = rng.random::<f64>() * std::f64::consts::TAU;
        let w = rng.random::<f64>();
        if w <= (r_maj + r_min * v.cos()) / (r_maj + r_min) {
            let rho = r_maj + r_min * v.cos();
            return [rho * u.cos(), rho * u.sin(), r_min * v.sin()];
        }
    }
}

fn sphere_torus(n: usize, rng: &mut ChaCha8Rng) -> Vec<Point3> {
    let v_ball = 4.0 / 3.0 * std::f64::consts::PI;
    let v_torus =
        2.0 * std::f64::consts::PI.powi(2) * SOLID_TORUS_MAJOR * SOLID_TORUS_MINOR.powi(2);
    let n_ball = ((n as f64) * v_ball / (v_ball + v_torus)).round() as usize;
    let mut pts = Vec::with_capacity(n);
    while pts.len() < n_ball {
        let p: Point3 = [0, 1, 2].map(|_| rng.random::<f64>() * 2.0 - 1.0);
        if p.iter().map(|c| c * c).sum::<f64>() <= 1.0 {
            pts.push(p);
        }
    }
    let reach = SOLID_TORUS_MAJOR + SOLID_TORUS_MINOR;
    while pts.len() < n {
        let x = (rng.random::<f64>() * 2.0 - 1.0) * reach;
        let y = (rng.random::<f64>() * 2.0 - 1.0) * reach;
        let z = (rng.random::<f64>() * 2.0 - 1.0) * SOLID_TORUS_MINOR;
        let rho = (x * x + y * y).sqrt();
        if (rho - SOLID_TORUS_MAJOR).powi(2) + z * z <= SOLID_TORUS_MINOR.powi(2) {
            pts.push([x + SOLID_TORUS_OFFSET, y, z]);
        }
    }
    pts
}

/// Unit circle in the xy plane (`n - 10` jittered, roughly even points) plus a
/// tight 10-point blob centred at (3, 0, 0).
pub fn circle_blob(n: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = n.saturating_sub(BLOB_POINTS).max(1);
    let step = std::f64::consts::TAU / m as f64;
    let mut pts: Vec<Point3> = (0..m)
        .map(|i| {
            let a = (i as f64 + 0.3 * (rng.random::<f64>() * 2.0 - 1.0)) * step;
            [a.cos(), a.sin(), 0.0]
        })
        .collect();
    let blob = Normal::new(0.0, 0.02).unwrap();
    for _ in 0..BLOB_POINTS {
        pts.push([
            3.0 + blob.sample(&mut rng),
            blob.sample(&mut rng),
            blob.sample(&mut rng),
        ]);
    }
    PointCloud::new(pts, format!("circle_blob:{n}:{seed}"))
        .unwrap()
        .with_seed(seed)
}

/// Builder parameters shared by both harnesses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuilderParams {
    /// Fixed rips threshold; tuned when absent.
    pub rips_max_scale: Option<f64>,
    /// Total simplex count the rips tuner aims for on the tuning cloud.
    pub rips_target_simplices: usize,
    pub rips_max_dim: usize,
    #[serde(with = "crate::fmt::inf_json")]
    pub alpha_max_scale: f64,
    pub cubical_cell_size: f64,
    #[serde(with = "crate::fmt::inf_json")]
    pub cubical_max_scale: f64,
    pub witness_landmark_fraction: f64,
    #[serde(with = "crate::fmt::inf_json")]
    pub witness_max_scale: f64,
    pub witness_max_dim: usize,
    pub flood_landmark_fraction: f64,
    pub flood_radius: f64,
    #[serde(with = "crate::fmt::inf_json")]
    pub cech_max_scale: f64,
    pub cech_max_dim: usize,
}

impl Default for BuilderParams {
    fn default() -> Self {
        BuilderParams {
            rips_max_scale: None,
            rips_target_simplices: 3155,
            rips_max_dim: 2,
            alpha_max_scale: f64::INFINITY,
            cubical_cell_size: 0.2,
            cubical_max_scale: 0.4,
            witness_landmark_fraction: 0.1,
            witness_max_scale: 0.5,
            witness_max_dim: 2,
            flood_landmark_fraction: 0.1,
            flood_radius: 0.5,
            cech_max_scale: 0.2,
            cech_max_dim: 2,
        }
    }
}

/// Finite number for JSON, `"inf"` otherwise.
fn num(x: f64) -> serde_json::Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!("inf")
    }
}

/// Builds `kind` on `cloud`; returns the complex and the exact parameters used.
pub fn build_kind(
    kind: ComplexKind,
    cloud: &PointCloud,
    p: &BuilderParams,
    rips_scale: f64,
) -> Result<(AnyComplex, serde_json::Value)> {
    let n = cloud.len();
    let landmarks = |f: f64| ((f * n as f64).round() as usize).clamp(1, n);
    Ok(match kind {
        ComplexKind::Rips => (
            AnyComplex::Simplicial(build_rips(cloud, rips_scale, p.rips_max_dim)?),
            json!({ "max_scale": num(rips_scale), "max_dim": p.rips_max_dim }),
        ),
        ComplexKind::Alpha => (
            AnyComplex::Simplicial(build_alpha(cloud, p.alpha_max_scale)?),
            json!({ "max_scale": num(p.alpha_max_scale) }),
        ),
        ComplexKind::Cubical => (
            AnyComplex::Cubical(build_cubical(
                cloud,
                p.cubical_cell_size,
                p.cubical_max_scale,
            )?),
            json!({ "cell_size": p.cubical_cell_size, "max_scale": num(p.cubical_max_scale) }),
        ),
        ComplexKind::Witness => {
            let l = landmarks(p.witness_landmark_fraction);
            (
                AnyComplex::Simplicial(build_witness(
                    cloud,
                    l,
                    p.witness_max_dim,
                    p.witness_max_scale,
                )?),
                json!({ "landmarks": l, "max_dim": p.witness_max_dim, "max_scale": num(p.witness_max_scale) }),
            )
        }
        ComplexKind::Flood => {
            let l = landmarks(p.flood_landmark_fraction).max(4);
            (
                AnyComplex::Simplicial(build_flood(cloud, l, p.flood_radius)?),
                json!({ "landmarks": l, "radius": p.flood_radius }),
            )
        }
        ComplexKind::Cech => (
            AnyComplex::Simplicial(build_cech(cloud, p.cech_max_scale, p.cech_max_dim)?),
            json!({ "max_scale": num(p.cech_max_scale), "max_dim": p.cech_max_dim }),
        ),
        ComplexKind::Custom => return Err(Error::arg("custom complexes cannot be benchmarked")),
    })
}

/// Bisection on the rips threshold so the complex on `cloud` has about `target` simplices.
pub fn tune_rips_scale(cloud: &PointCloud, target: usize, max_dim: usize) -> Result<f64> {
    let n = cloud.len();
    if target <= n {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0, cloud.bbox_diagonal() / 4.0);
    while rips_simplex_count(cloud, hi, max_dim)? < target {
        lo = hi;
        hi *= 2.0;
        if hi > 4.0 * cloud.bbox_diagonal() {
            return Ok(hi);
        }
    }
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if rips_simplex_count(cloud, mid, max_dim)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-9 * hi {
            break;
        }
    }
    log::info!("rips threshold tuned to {hi} for about {target} simplices on {n} points");
    Ok(hi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub complex: ComplexKind,
    pub n: usize,
    /// `none`, `noise` or `downsample`.
    pub perturbation: String,
    /// Noise sigma or kept point count, when perturbed.
    pub level: Option<f64>,
    pub seed: Option<u64>,
    pub params: serde_json::Value,
    pub build_time_s: Option<f64>,
    pub simplex_count: Option<usize>,
    pub reduce_time_s: Option<f64>,
    pub w2_dim0: Option<f64>,
    pub w2_dim1: Option<f64>,
    /// Essential classes of dims 0 and 1 (excluded from W2).
    pub essential: Option<[usize; 2]>,
    /// Bound on the relative error of the W2 values; 0 when solved exactly.
    pub w2_relative_error: f64,
    pub comparable_timing: bool,
    pub error: Option<String>,
}

impl BenchRow {
    fn new(complex: ComplexKind, n: usize) -> Self {
        BenchRow {
            complex,
            n,
            perturbation: "none".into(),
            level: None,
            seed: None,
            params: serde_json::Value::Null,
            build_time_s: None,
            simplex_count: None,
            reduce_time_s: None,
            w2_dim0: None,
            w2_dim1: None,
            essential: None,
            w2_relative_error: 0.0,
            comparable_timing: true,
            error: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub version: String,
    /// `scaling` or `stability`.
    pub bench: String,
    pub machine: String,
    pub shape_params: serde_json::Value,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub rows: Vec<BenchRow>,
}

pub fn machine_descriptor() -> String {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    format!(
        "{}-{}, {threads} hardware threads",
        std::env::consts::OS,
        std::env::consts::ARCH
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingConfig {
    pub sizes: Vec<usize>,
    pub kinds: Vec<ComplexKind>,
    pub shape: ShapeKind,
    pub seed: u64,
    pub params: BuilderParams,
    /// Also time the persistence reduction up to this dimension.
    pub reduce_max_dim: Option<usize>,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        ScalingConfig {
            sizes: vec![1000, 10000],
            kinds: vec![ComplexKind::Cubical, ComplexKind::Alpha, ComplexKind::Rips],
            shape: ShapeKind::SphereTorus,
            seed: 0,
            params: BuilderParams::default(),
            reduce_max_dim: None,
        }
    }
}

/// Times every builder on every size. The rips threshold, when not fixed, is
/// tuned once on the smallest size and held for the others.
pub fn run_scaling_bench(cfg: &ScalingConfig) -> Result<BenchReport> {
    if cfg.sizes.is_empty() || cfg.sizes.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::arg("sizes must be nonempty and ascending"));
    }
    let mut params = cfg.params.clone();
    if params.rips_max_scale.is_none() && cfg.kinds.contains(&ComplexKind::Rips) {
        let c = generate_bench_shape(cfg.shape, cfg.sizes[0], cfg.seed)?;
        params.rips_max_scale = Some(tune_rips_scale(
            &c,
            params.rips_target_simplices,
            params.rips_max_dim,
        )?);
    }
    let rips_scale = params.rips_max_scale.unwrap_or(0.0);
    let mut rows = Vec::new();
    for &n in &cfg.sizes {
        let cloud = generate_bench_shape(cfg.shape, n, cfg.seed)?;
        for &kind in &cfg.kinds {
            let mut row = BenchRow::new(kind, n);
            row.seed = Some(cfg.seed);
            // warm-up, excluded from timing
            match build_kind(kind, &cloud, &params, rips_scale) {
                Err(e) => {
                    row.error = Some(e.to_string());
                    rows.push(row);
                    continue;
                }
                Ok((_, p)) => row.params = p,
            }
            let t = Instant::now();
            let (k, _) = build_kind(kind, &cloud, &params, rips_scale)?;
            row.build_time_s = Some(t.elapsed().as_secs_f64());
            row.simplex_count = Some(k.as_cells().num_cells());
            if let Some(d) = cfg.reduce_max_dim {
                let t = Instant::now();
                compute_persistence(k.as_cells(), d)?;
                row.reduce_time_s = Some(t.elapsed().as_secs_f64());
            }
            log::info!(
                "scaling {kind} n={n}: {:?}s, {:?} cells",
                row.build_time_s,
                row.simplex_count
            );
            rows.push(row);
        }
    }
    let mut config = serde_json::to_value(cfg)?;
    config["params"] = serde_json::to_value(&params)?;
    config["schema_version"] = json!(crate::export::SCHEMA_VERSION);
    Ok(BenchReport {
        version: env!("CARGO_PKG_VERSION").into(),
        bench: "scaling".into(),
        machine: machine_descriptor(),
        shape_params: shape_params(cfg.shape),
        config,
        seeds: vec![cfg.seed],
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilityConfig {
    pub base_n: usize,
    pub shape: ShapeKind,
    /// Seed of the base cloud.
    pub shape_seed: u64,
    pub noise_levels: Vec<f64>,
    /// Kept point counts for the downsampling rows.
    pub downsample_sizes: Vec<usize>,
    pub kinds: Vec<ComplexKind>,
    /// One perturbation per seed and level.
    pub seeds: Vec<u64>,
    pub params: BuilderParams,
    /// Drop zero-persistence pairs before measuring.
    pub strictly_positive: bool,
    /// Run perturbation rows concurrently; their timings are then marked non-comparable.
    pub parallel: bool,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        StabilityConfig {
            base_n: 10000,
            shape: ShapeKind::SphereTorus,
            shape_seed: 0,
            noise_levels: vec![0.0, 0.01, 0.02, 0.05, 0.1],
            downsample_sizes: vec![],
            kinds: vec![ComplexKind::Rips, ComplexKind::Alpha],
            seeds: vec![1, 2, 3, 4, 5],
            params: BuilderParams::default(),
            strictly_positive: true,
            parallel: false,
        }
    }
}

fn diagrams_of(
    kind: ComplexKind,
    cloud: &PointCloud,
    p: &BuilderParams,
    rips_scale: f64,
) -> Result<(Diagrams, usize, serde_json::Value, f64, f64)> {
    let t = Instant::now();
    let (k, params) = build_kind(kind, cloud, p, rips_scale)?;
    let build = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let d = compute_persistence(k.as_cells(), 1)?;
    Ok((
        d,
        k.as_cells().num_cells(),
        params,
        build,
        t.elapsed().as_secs_f64(),
    ))
}

fn finite_part(d: &PersistenceDiagram, strictly_positive: bool) -> PersistenceDiagram {
    let mut out = if strictly_positive {
        d.positive()
    } else {
        d.clone()
    };
    out.pairs.retain(|p| !p.is_essential());
    out
}

struct StabilityCtx<'a> {
    kind: ComplexKind,
    base: &'a PointCloud,
    b0: &'a PersistenceDiagram,
    b1: &'a PersistenceDiagram,
    params: &'a BuilderParams,
    rips_scale: f64,
    strictly_positive: bool,
}

impl StabilityCtx<'_> {
    fn row(&self, what: &str, level: f64, seed: u64) -> BenchRow {
        let mut row = BenchRow::new(self.kind, self.base.len());
        row.perturbation = what.into();
        row.level = Some(level);
        row.seed = Some(seed);
        let result = (|| -> Result<()> {
            let cloud = if what == "noise" {
                add_gaussian_noise(self.base, level, seed)?
            } else {
                downsample_random(self.base, level as usize, seed)?
            };
            let (d, count, p, bt, rt) =
                diagrams_of(self.kind, &cloud, self.params, self.rips_scale)?;
            row.params = p;
            row.simplex_count = Some(count);
            row.build_time_s = Some(bt);
            row.reduce_time_s = Some(rt);
            row.essential = Some([d[0].essential_births().len(), d[1].essential_births().len()]);
            let (w0, t0) =
                wasserstein_cost(self.b0, &finite_part(&d[0], self.strictly_positive), 2.0)?;
            let (w1, t1) =
                wasserstein_cost(self.b1, &finite_part(&d[1], self.strictly_positive), 2.0)?;
            row.w2_dim0 = Some(w0);
            row.w2_dim1 = Some(w1);
            row.w2_relative_error = t0.max(t1);
            Ok(())
        })();
        if let Err(e) = result {
            row.error = Some(e.to_string());
        }
        log::info!(
            "stability {} {what}={level} seed={seed}: w2 = {:?}, {:?}",
            self.kind,
            row.w2_dim0,
            row.w2_dim1
        );
        row
    }
}

/// W2 in dims 0 and 1 between the base cloud's diagrams and those of each
/// perturbed cloud. Essential classes are counted, not measured.
pub fn run_stability_bench(cfg: &StabilityConfig) -> Result<BenchReport> {
    let base = generate_bench_shape(cfg.shape, cfg.base_n, cfg.shape_seed)?;
    let mut params = cfg.params.clone();
    if params.rips_max_scale.is_none() && cfg.kinds.contains(&ComplexKind::Rips) {
        // tuned on a 1000-point sample of the same shape, then held fixed
        let tuning = generate_bench_shape(cfg.shape, 1000, cfg.shape_seed)?;
        params.rips_max_scale = Some(tune_rips_scale(
            &tuning,
            params.rips_target_simplices,
            params.rips_max_dim,
        )?);
    }
    let rips_scale = params.rips_max_scale.unwrap_or(0.0);
    let mut rows = Vec::new();
    for &kind in &cfg.kinds {
        let (bd, _, _, _, _) = match diagrams_of(kind, &base, &params, rips_scale) {
            Ok(x) => x,
            Err(e) => {
                let mut row = BenchRow::new(kind, cfg.base_n);
                row.error = Some(e.to_string());
                rows.push(row);
                continue;
            }
        };
        let b0 = finite_part(&bd[0], cfg.strictly_positive);
        let b1 = finite_part(&bd[1], cfg.strictly_positive);
        let mut jobs: Vec<(&str, f64, u64)> = Vec::new();
        for &s in &cfg.noise_levels {
            jobs.extend(cfg.seeds.iter().map(|&seed| ("noise", s, seed)));
        }
        for &k in &cfg.downsample_sizes {
            jobs.extend(cfg.seeds.iter().map(|&seed| ("downsample", k as f64, seed)));
        }
        let ctx = StabilityCtx {
            kind,
            base: &base,
            b0: &b0,
            b1: &b1,
            params: &params,
            rips_scale,
            strictly_positive: cfg.strictly_positive,
        };
        if cfg.parallel {
            let mut par: Vec<BenchRow> =
                jobs.par_iter().map(|&(w, l, s)| ctx.row(w, l, s)).collect();
            for r in &mut par {
                r.comparable_timing = false;
            }
            rows.extend(par);
        } else {
            rows.extend(jobs.iter().map(|&(w, l, s)| ctx.row(w, l, s)));
        }
    }
    let mut config = serde_json::to_value(cfg)?;
    config["params"] = serde_json::to_value(&params)?;
    config["schema_version"] = json!(crate::export::SCHEMA_VERSION);
    let mut seeds = vec![cfg.shape_seed];
    seeds.extend(&cfg.seeds);
    Ok(BenchReport {
        version: env!("CARGO_PKG_VERSION").into(),
        bench: "stability".into(),
        machine: machine_descriptor(),
        shape_params: shape_params(cfg.shape),
        config,
        seeds,
        rows,
    })
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for k in i..=j {
                r[idx[k]] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_points_on_surface() {
        let c = generate_bench_shape(ShapeKind::Sphere, 1000, 4).unwrap();
        for p in c.points() {
            let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            assert!((r - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn shapes_are_deterministic() {
        for kind in [
            ShapeKind::SphereTorus,
            ShapeKind::Torus,
            ShapeKind::Sphere,
            ShapeKind::CircleBlob,
        ] {
            let a = generate_bench_shape(kind, 300, 7).unwrap();
            let b = generate_bench_shape(kind, 300, 7).unwrap();
            assert_eq!(a.points(), b.points());
            assert_eq!(a.len(), 300);
            let c = generate_bench_shape(kind, 300, 8).unwrap();
            assert_ne!(a.points(), c.points());
        }
        assert!(generate_bench_shape(ShapeKind::Sphere, 9, 0).is_err());
    }

    #[test]
    fn torus_points_on_surface() {
        let c = generate_bench_shape(ShapeKind::Torus, 5000, 1).unwrap();
        for p in c.points() {
            let rho = (p[0] * p[0] + p[1] * p[1]).sqrt();
            let d = ((rho - TORUS_MAJOR).powi(2) + p[2] * p[2]).sqrt() - TORUS_MINOR;
            assert!(d.abs() <= 1e-9);
        }
    }

    #[test]
    fn sphere_torus_split_and_containment() {
        let c = generate_bench_shape(ShapeKind::SphereTorus, 4000, 2).unwrap();
        let mut in_ball = 0;
        for p in c.points() {
            let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            let q = [p[0] - SOLID_TORUS_OFFSET, p[1], p[2]];
            let rho = (q[0] * q[0] + q[1] * q[1]).sqrt();
            let t = ((rho - SOLID_TORUS_MAJOR).powi(2) + q[2] * q[2]).sqrt();
            assert!(r <= 1.0 || t <= SOLID_TORUS_MINOR);
            if r <= 1.0 {
                in_ball += 1;
            }
        }
        let v_ball = 4.0 / 3.0 * std::f64::consts::PI;
        let v_torus =
            2.0 * std::f64::consts::PI.powi(2) * SOLID_TORUS_MAJOR * SOLID_TORUS_MINOR.powi(2);
        let expect = 4000.0 * v_ball / (v_ball + v_torus);
        assert!((in_ball as f64 - expect).abs() < 5.0);
    }

    #[test]
    fn spearman_values() {
        assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[10.0, 20.0, 30.0, 40.0]) - 1.0).abs() < 1e-15);
        assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[4.0, 3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
        // the classic tie example: ranks (1, 2.5, 2.5, 4)
        let r = spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 2.0, 3.0]);
        assert!((r - 0.9486832980505138).abs() < 1e-12);
    }

    #[test]
    fn tuner_hits_target_order() {
        let c = generate_bench_shape(ShapeKind::SphereTorus, 1000, 0).unwrap();
        let eps = tune_rips_scale(&c, 3155, 2).unwrap();
        let count = rips_simplex_count(&c, eps, 2).unwrap();
        assert!((3155..3400).contains(&count), "{count}");
    }

    #[test]
    fn small_scaling_report() {
        let cfg = ScalingConfig {
            sizes: vec![200, 400],
            kinds: vec![
                ComplexKind::Cubical,
                ComplexKind::Alpha,
                ComplexKind::Rips,
                ComplexKind::Witness,
            ],
            params: BuilderParams {
                rips_target_simplices: 800,
                ..Default::default()
            },
            reduce_max_dim: Some(1),
            ..Default::default()
        };
        let r = run_scaling_bench(&cfg).unwrap();
        assert_eq!(r.rows.len(), 8);
        assert!(r
            .rows
            .iter()
            .all(|row| row.error.is_none() && row.simplex_count.unwrap() > 0));
        let rips: Vec<usize> = r
            .rows
            .iter()
            .filter(|x| x.complex == ComplexKind::Rips)
            .map(|x| x.simplex_count.unwrap())
            .collect();
        assert!(rips[0] <= rips[1]);
        // the recorded threshold regenerates the same counts
        let again: ScalingConfig = crate::export::parse_versioned(&r.config.to_string()).unwrap();
        assert!(again.params.rips_max_scale.is_some());
        assert_eq!(again.params.alpha_max_scale, f64::INFINITY);
        let r2 = run_scaling_bench(&again).unwrap();
        let counts = |r: &BenchReport| r.rows.iter().map(|x| x.simplex_count).collect::<Vec<_>>();
        assert_eq!(counts(&r), counts(&r2));
    }

    #[test]
    fn small_stability_report() {
        let cfg = StabilityConfig {
            base_n: 300,
            noise_levels: vec![0.0, 0.05],
            downsample_sizes: vec![150],
            seeds: vec![1, 2],
            params: BuilderParams {
                rips_target_simplices: 3000,
                ..Default::default()
            },
            ..Default::default()
        };
        let r = run_stability_bench(&cfg).unwrap();
        assert_eq!(r.rows.len(), 2 * 3 * 2);
        for row in &r.rows {
            assert!(row.error.is_none(), "{:?}", row.error);
            if row.perturbation == "noise" && row.level == Some(0.0) {
                assert_eq!(row.w2_dim0, Some(0.0));
                assert_eq!(row.w2_dim1, Some(0.0));
            }
        }
        let again = run_stability_bench(&cfg).unwrap();
        let w = |r: &BenchReport| {
            r.rows
                .iter()
                .map(|x| (x.w2_dim0, x.w2_dim1, x.simplex_count))
                .collect::<Vec<_>>()
        };
        assert_eq!(w(&r), w(&again));
        let par = run_stability_bench(&StabilityConfig {
            parallel: true,
            ..cfg
        })
        .unwrap();
        assert_eq!(w(&r), w(&par));
        assert!(par.rows.iter().all(|x| !x.comparable_timing));
    }
}
