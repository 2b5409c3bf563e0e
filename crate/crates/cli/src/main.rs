use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use cloudtopo::bench::{
    generate_bench_shape, run_scaling_bench, run_stability_bench, BenchReport, ScalingConfig,
    ShapeKind, StabilityConfig,
};
use cloudtopo::complex::{AnyComplex, ComplexKind, FilteredComplex};
use cloudtopo::export::{
    apply_function, export_features, parse_versioned, summaries, ComplexSpec, FunctionSpec,
    PipelineConfig, VectorizerSpec,
};
use cloudtopo::fmt::g17;
use cloudtopo::geometry::{load_points, write_xyz, PointCloud, PointFormat};
use cloudtopo::metrics::{bottleneck_distance, wasserstein_distance};
use cloudtopo::persistence::{compute_persistence, Diagrams, PersistenceDiagram, MAX_HOM_DIM};
use cloudtopo::sampling::{
    default_suppression_radius, patch_partition, ph_guided_sample, PILOT_DEFAULT_SIZE,
};
use cloudtopo::{Error, Result};

#[derive(Parser)]
#[command(
    name = "cloudtopo",
    version,
    about = "Persistent homology for 3D point clouds"
)]
struct Cli {
    /// Seed for generated shapes and bench perturbations.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for output files. Single-stream outputs go to stdout without it.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a benchmark shape as an xyz point file.
    Generate {
        #[arg(long, default_value = "sphere_torus")]
        shape: String,
        #[arg(long)]
        n: usize,
    },
    /// Build a filtered complex and dump it.
    Complex {
        input: PathBuf,
        #[command(flatten)]
        complex: ComplexArgs,
    },
    /// Compute persistence diagrams.
    Persist {
        input: PathBuf,
        #[command(flatten)]
        complex: ComplexArgs,
        /// Highest homology dimension reported.
        #[arg(long, default_value_t = MAX_HOM_DIM)]
        max_hom_dim: usize,
        /// Drop pairs whose persistence is not above this.
        #[arg(long)]
        min_persistence: Option<f64>,
        /// Treat the input as a simplicial complex dump written by `complex`.
        #[arg(long)]
        from_dump: bool,
    },
    /// Distances between two diagram CSV files.
    Dist {
        a: PathBuf,
        b: PathBuf,
        /// Dimensions to compare (default 0, 1 and 2).
        #[arg(long, value_delimiter = ',')]
        dims: Vec<usize>,
        #[arg(long, value_enum, default_value_t = Metric::Both)]
        metric: Metric,
        /// Wasserstein order.
        #[arg(long, default_value_t = 2.0)]
        order: f64,
    },
    /// Vectorize diagram CSV files into a summary grid and JSON sidecar.
    Vectorize {
        /// Diagram CSV files; rows of every dimension are read.
        #[arg(required = true)]
        diagrams: Vec<PathBuf>,
        /// pi, landscape, betti_curve or topk_pd.
        #[arg(long, default_value = "pi")]
        kind: String,
        #[arg(long, value_delimiter = ',')]
        dims: Vec<usize>,
        /// Image resolution as ROWSxCOLS.
        #[arg(long)]
        resolution: Option<String>,
        #[arg(long)]
        bandwidth: Option<f64>,
        /// Landscape levels.
        #[arg(long)]
        levels: Option<usize>,
        /// Grid samples for landscapes and Betti curves.
        #[arg(long)]
        samples: Option<usize>,
        /// Points kept per dimension by topk_pd.
        #[arg(long)]
        k: Option<usize>,
        /// Full vectorizer spec as JSON; overrides the flags above.
        #[arg(long)]
        spec: Option<String>,
        /// Keep zero-persistence pairs.
        #[arg(long)]
        keep_zero: bool,
    },
    /// Topology-guided seed selection.
    Sample {
        input: PathBuf,
        #[arg(long)]
        budget: usize,
        /// Rips threshold of the pilot complex.
        #[arg(long)]
        max_scale: f64,
        #[arg(long, default_value_t = PILOT_DEFAULT_SIZE)]
        pilot_size: usize,
        /// Minimum spacing between feature seeds (default: diagonal / sqrt(budget)).
        #[arg(long)]
        suppression: Option<f64>,
        /// Also write the nearest-seed patch label of every point.
        #[arg(long)]
        patches: bool,
    },
    /// Scaling and stability harnesses.
    Bench {
        #[command(subcommand)]
        which: BenchCmd,
    },
    /// Run a JSON pipeline config and write diagrams, summaries and a manifest.
    Export {
        input: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Subcommand)]
enum BenchCmd {
    Scaling {
        /// Versioned JSON config; flags override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        kinds: Vec<String>,
        /// Also time the reduction up to this dimension.
        #[arg(long)]
        reduce: Option<usize>,
    },
    Stability {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        base_n: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        noise: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        downsample: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        kinds: Vec<String>,
        /// Perturbation seeds.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        /// Run rows concurrently; timings are then marked non-comparable.
        #[arg(long)]
        parallel_rows: bool,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Metric {
    Bottleneck,
    Wasserstein,
    Both,
}

#[derive(Args)]
struct ComplexArgs {
    /// rips, cech, alpha, witness, cubical or flood.
    #[arg(long, default_value = "alpha")]
    kind: String,
    #[arg(long)]
    max_scale: Option<f64>,
    #[arg(long)]
    max_dim: Option<usize>,
    #[arg(long)]
    cell_size: Option<f64>,
    #[arg(long)]
    landmarks: Option<usize>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    depth: Option<usize>,
    /// Lower-star vertex function: height or dtm.
    #[arg(long)]
    function: Option<String>,
    /// Height direction as x,y,z.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    axis: Vec<f64>,
    /// DTM mass fraction.
    #[arg(long)]
    mass: Option<f64>,
}

impl ComplexArgs {
    fn spec(&self) -> Result<ComplexSpec> {
        let mut m = Map::new();
        m.insert("kind".into(), json!(self.kind));
        let mut put = |k: &str, v: Option<Value>| {
            if let Some(v) = v {
                m.insert(k.into(), v);
            }
        };
        put("max_scale", self.max_scale.map(json_f64));
        put("max_dim", self.max_dim.map(|x| json!(x)));
        put("cell_size", self.cell_size.map(json_f64));
        put("landmarks", self.landmarks.map(|x| json!(x)));
        put("radius", self.radius.map(json_f64));
        put("depth", self.depth.map(|x| json!(x)));
        serde_json::from_value(Value::Object(m))
            .map_err(|e| Error::Argument(format!("complex {:?}: {e}", self.kind)))
    }

    fn function(&self) -> Result<Option<FunctionSpec>> {
        let Some(f) = &self.function else {
            if !self.axis.is_empty() || self.mass.is_some() {
                return Err(Error::Argument("--axis and --mass need --function".into()));
            }
            return Ok(None);
        };
        let mut m = Map::new();
        m.insert("function".into(), json!(f));
        if !self.axis.is_empty() {
            m.insert("axis".into(), json!(self.axis));
        }
        if let Some(x) = self.mass {
            m.insert("mass".into(), json!(x));
        }
        serde_json::from_value(Value::Object(m))
            .map(Some)
            .map_err(|e| Error::Argument(format!("function {f:?}: {e}")))
    }

    fn build(&self, cloud: &PointCloud) -> Result<AnyComplex> {
        let k = self.spec()?.build(cloud)?;
        match self.function()? {
            Some(f) => apply_function(k, &f, cloud),
            None => Ok(k),
        }
    }
}

fn json_f64(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(g17(x))
    }
}

fn load(path: &Path) -> Result<PointCloud> {
    load_points(path, PointFormat::from_path(path))
}

/// Writes to `out_dir/name`, or to stdout when no directory was given.
fn emit(out_dir: Option<&Path>, name: &str, data: &[u8]) -> Result<()> {
    match out_dir {
        Some(d) => {
            fs::create_dir_all(d)?;
            fs::write(d.join(name), data)?;
        }
        None => io::stdout().lock().write_all(data)?,
    }
    Ok(())
}

fn write_file(dir: &Path, name: &str, data: &[u8]) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), data)?;
    Ok(())
}

fn pretty(v: &impl serde::Serialize) -> Result<Vec<u8>> {
    let mut buf = serde_json::to_vec_pretty(v)?;
    buf.push(b'\n');
    Ok(buf)
}

fn diagrams_json(d: &Diagrams) -> Value {
    let dims: Vec<Value> = d
        .diagrams
        .iter()
        .map(|pd| {
            let pairs: Vec<Value> = pd
                .pairs
                .iter()
                .map(|p| json!([json_f64(p.birth), json_f64(p.death)]))
                .collect();
            json!({ "dim": pd.dim, "pairs": pairs })
        })
        .collect();
    json!({ "diagrams": dims, "stats": d.stats })
}

fn read_diagrams(paths: &[PathBuf]) -> Result<Vec<PersistenceDiagram>> {
    let mut out: Vec<PersistenceDiagram> = (0..=MAX_HOM_DIM)
        .map(|k| PersistenceDiagram::from_points(k, &[]))
        .collect();
    for path in paths {
        for (k, slot) in out.iter_mut().enumerate() {
            let d = PersistenceDiagram::read_csv(BufReader::new(fs::File::open(path)?), k)?;
            slot.pairs.extend(d.pairs);
        }
    }
    Ok(out)
}

fn parse_kinds(names: &[String]) -> Result<Vec<ComplexKind>> {
    names
        .iter()
        .map(|k| {
            serde_json::from_value(json!(k))
                .map_err(|_| Error::Argument(format!("unknown complex kind {k:?}")))
        })
        .collect()
}

fn read_config<T: serde::de::DeserializeOwned + Default>(path: Option<&PathBuf>) -> Result<T> {
    match path {
        Some(p) => parse_versioned(&fs::read_to_string(p)?),
        None => Ok(T::default()),
    }
}

fn report_csv(r: &BenchReport) -> Vec<u8> {
    let opt = |x: Option<f64>| x.map(g17).unwrap_or_default();
    let mut s = String::from(
        "bench,complex,n,perturbation,level,seed,build_time_s,simplex_count,reduce_time_s,w2_dim0,w2_dim1,w2_relative_error,comparable_timing,error\n",
    );
    for row in &r.rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.bench,
            row.complex,
            row.n,
            row.perturbation,
            opt(row.level),
            row.seed.map(|x| x.to_string()).unwrap_or_default(),
            opt(row.build_time_s),
            row.simplex_count.map(|x| x.to_string()).unwrap_or_default(),
            opt(row.reduce_time_s),
            opt(row.w2_dim0),
            opt(row.w2_dim1),
            g17(row.w2_relative_error),
            row.comparable_timing,
            row.error.as_deref().unwrap_or("").replace([',', '\n'], ";"),
        ));
    }
    s.into_bytes()
}

fn emit_report(cli: &Cli, r: &BenchReport) -> Result<()> {
    let name = format!("{}_report", r.bench);
    match cli.format {
        Format::Json => emit(cli.out_dir.as_deref(), &format!("{name}.json"), &pretty(r)?),
        Format::Csv => emit(
            cli.out_dir.as_deref(),
            &format!("{name}.csv"),
            &report_csv(r),
        ),
    }
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::Argument("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Argument(e.to_string()))?;
    }
    let out = cli.out_dir.as_deref();
    match &cli.cmd {
        Cmd::Generate { shape, n } => {
            let cloud =
                generate_bench_shape(shape.parse::<ShapeKind>()?, *n, cli.seed.unwrap_or(0))?;
            let mut buf = Vec::new();
            write_xyz(&cloud, &mut buf)?;
            emit(out, &format!("{shape}_{n}.xyz"), &buf)
        }
        Cmd::Complex { input, complex } => {
            let k = complex.build(&load(input)?)?;
            match cli.format {
                Format::Csv => {
                    let mut buf = Vec::new();
                    k.write_csv(&mut buf)?;
                    emit(out, "complex.csv", &buf)
                }
                Format::Json => {
                    let counts = match &k {
                        AnyComplex::Simplicial(s) => s.count_by_dim(),
                        AnyComplex::Cubical(c) => c.count_by_dim(),
                    };
                    let params = match &k {
                        AnyComplex::Simplicial(s) => s.params.clone(),
                        AnyComplex::Cubical(c) => c.params.clone(),
                    };
                    let v = json!({ "kind": k.kind(), "cells": k.len(), "count_by_dim": counts, "params": params });
                    emit(out, "complex.json", &pretty(&v)?)
                }
            }
        }
        Cmd::Persist {
            input,
            complex,
            max_hom_dim,
            min_persistence,
            from_dump,
        } => {
            let k = if *from_dump {
                AnyComplex::Simplicial(FilteredComplex::read_csv(BufReader::new(fs::File::open(
                    input,
                )?))?)
            } else {
                complex.build(&load(input)?)?
            };
            let mut d = compute_persistence(k.as_cells(), *max_hom_dim)?;
            if let Some(m) = min_persistence {
                for pd in &mut d.diagrams {
                    *pd = pd.filtered(*m, false);
                }
            }
            match (cli.format, out) {
                (Format::Json, _) => emit(out, "diagrams.json", &pretty(&diagrams_json(&d))?),
                (Format::Csv, Some(dir)) => {
                    for pd in &d.diagrams {
                        let mut buf = Vec::new();
                        pd.write_csv(&mut buf)?;
                        write_file(dir, &format!("pd_dim{}.csv", pd.dim), &buf)?;
                    }
                    Ok(())
                }
                (Format::Csv, None) => {
                    let mut buf = Vec::new();
                    d.write_csv(&mut buf)?;
                    emit(None, "", &buf)
                }
            }
        }
        Cmd::Dist {
            a,
            b,
            dims,
            metric,
            order,
        } => {
            let (da, db) = (
                read_diagrams(std::slice::from_ref(a))?,
                read_diagrams(std::slice::from_ref(b))?,
            );
            let dims = if dims.is_empty() {
                (0..=MAX_HOM_DIM).collect()
            } else {
                dims.clone()
            };
            let mut lines = String::new();
            if cli.format == Format::Csv {
                lines.push_str("dim,metric,order,value\n");
            }
            for &k in &dims {
                if k > MAX_HOM_DIM {
                    return Err(Error::Argument(format!(
                        "dimension {k} exceeds {MAX_HOM_DIM}"
                    )));
                }
                let mut rows: Vec<(&str, f64, f64)> = Vec::new();
                if *metric != Metric::Wasserstein {
                    rows.push((
                        "bottleneck",
                        f64::INFINITY,
                        bottleneck_distance(&da[k], &db[k])?.cost,
                    ));
                }
                if *metric != Metric::Bottleneck {
                    let m = wasserstein_distance(&da[k], &db[k], *order)?;
                    if m.relative_error > 0.0 {
                        log::warn!(
                            "dimension {k}: approximate solve, relative error at most {}",
                            g17(m.relative_error)
                        );
                    }
                    rows.push(("wasserstein", *order, m.cost));
                }
                for (name, p, v) in rows {
                    match cli.format {
                        Format::Json => {
                            let o = json!({ "dim": k, "metric": name, "order": json_f64(p), "value": json_f64(v) });
                            lines.push_str(&format!("{o}\n"));
                        }
                        Format::Csv => {
                            lines.push_str(&format!("{k},{name},{},{}\n", g17(p), g17(v)))
                        }
                    }
                }
            }
            let name = if cli.format == Format::Json {
                "distances.jsonl"
            } else {
                "distances.csv"
            };
            emit(out, name, lines.as_bytes())
        }
        Cmd::Vectorize {
            diagrams,
            kind,
            dims,
            resolution,
            bandwidth,
            levels,
            samples,
            k,
            spec,
            keep_zero,
        } => {
            let spec: VectorizerSpec = match spec {
                Some(text) => serde_json::from_str(text)
                    .map_err(|e| Error::Argument(format!("--spec: {e}")))?,
                None => {
                    let mut m = Map::new();
                    m.insert("kind".into(), json!(kind));
                    if !dims.is_empty() {
                        m.insert("dims".into(), json!(dims));
                    }
                    if let Some(r) = resolution {
                        let bad =
                            || Error::Argument(format!("--resolution {r:?}: expected ROWSxCOLS"));
                        let (a, b) = r.split_once('x').ok_or_else(bad)?;
                        let rc: [usize; 2] =
                            [a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?];
                        m.insert("resolution".into(), json!(rc));
                    }
                    for (key, v) in [
                        ("bandwidth", bandwidth.map(json_f64)),
                        ("levels", levels.map(|x| json!(x))),
                        ("samples", samples.map(|x| json!(x))),
                        ("k", k.map(|x| json!(x))),
                    ] {
                        if let Some(v) = v {
                            m.insert(key.into(), v);
                        }
                    }
                    serde_json::from_value(Value::Object(m))
                        .map_err(|e| Error::Argument(format!("vectorizer {kind:?}: {e}")))?
                }
            };
            let pds = read_diagrams(diagrams)?;
            let dir = out.unwrap_or(Path::new("."));
            for (stem, s) in summaries(std::slice::from_ref(&spec), &pds, !keep_zero)? {
                let mut buf = Vec::new();
                s.write_csv(&mut buf)?;
                write_file(dir, &format!("{stem}.csv"), &buf)?;
                write_file(dir, &format!("{stem}.json"), &pretty(&s.sidecar())?)?;
            }
            Ok(())
        }
        Cmd::Sample {
            input,
            budget,
            max_scale,
            pilot_size,
            suppression,
            patches,
        } => {
            let cloud = load(input)?;
            let radius = suppression.unwrap_or_else(|| default_suppression_radius(&cloud, *budget));
            let seeds = ph_guided_sample(&cloud, *budget, *pilot_size, *max_scale, radius)?;
            let dir = out.unwrap_or(Path::new("."));
            let idx: String = seeds.indices.iter().map(|i| format!("{i}\n")).collect();
            write_file(dir, "seeds.txt", idx.as_bytes())?;
            let mut report = seeds.report();
            report["params"] = json!({
                "input": input.file_name().map(|f| f.to_string_lossy().into_owned()),
                "budget": budget,
                "max_scale": json_f64(*max_scale),
                "pilot_size": pilot_size,
                "suppression_radius": json_f64(radius),
            });
            write_file(dir, "seeds.json", &pretty(&report)?)?;
            if *patches {
                let labels = patch_partition(&cloud, &seeds)?;
                let text: String = labels.iter().map(|l| format!("{l}\n")).collect();
                write_file(dir, "patches.txt", text.as_bytes())?;
            }
            Ok(())
        }
        Cmd::Bench { which } => match which {
            BenchCmd::Scaling {
                config,
                sizes,
                kinds,
                reduce,
            } => {
                let mut cfg: ScalingConfig = read_config(config.as_ref())?;
                if !sizes.is_empty() {
                    cfg.sizes = sizes.clone();
                }
                if !kinds.is_empty() {
                    cfg.kinds = parse_kinds(kinds)?;
                }
                if reduce.is_some() {
                    cfg.reduce_max_dim = *reduce;
                }
                if let Some(s) = cli.seed {
                    cfg.seed = s;
                }
                emit_report(cli, &run_scaling_bench(&cfg)?)
            }
            BenchCmd::Stability {
                config,
                base_n,
                noise,
                downsample,
                kinds,
                seeds,
                parallel_rows,
            } => {
                let mut cfg: StabilityConfig = read_config(config.as_ref())?;
                if let Some(n) = base_n {
                    cfg.base_n = *n;
                }
                if !noise.is_empty() {
                    cfg.noise_levels = noise.clone();
                }
                if !downsample.is_empty() {
                    cfg.downsample_sizes = downsample.clone();
                }
                if !kinds.is_empty() {
                    cfg.kinds = parse_kinds(kinds)?;
                }
                if !seeds.is_empty() {
                    cfg.seeds = seeds.clone();
                }
                if let Some(s) = cli.seed {
                    cfg.shape_seed = s;
                }
                cfg.parallel |= *parallel_rows;
                emit_report(cli, &run_stability_bench(&cfg)?)
            }
        },
        Cmd::Export { input, config } => {
            let cfg = PipelineConfig::load(config)?;
            export_features(input, &cfg, out.unwrap_or(Path::new(".")))?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
