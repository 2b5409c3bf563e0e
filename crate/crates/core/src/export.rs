//! Feature export: a JSON pipeline config in, diagram and summary files plus a
//! manifest out.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::complex::{
    build_alpha, build_cech, build_cubical, build_flood_with_depth, build_rips, build_witness,
    AnyComplex, FLOOD_DEFAULT_DEPTH,
};
use crate::error::{Error, Result};
use crate::filtration::{dtm_values, height_values, lower_star_assign, DTM_DEFAULT_MASS};
use crate::geometry::{load_points, PointCloud, PointFormat};
use crate::persistence::{compute_persistence, PersistenceDiagram, MAX_HOM_DIM};
use crate::vectorize::{
    betti_curve, default_death_cap, linspace, persistence_image, persistence_landscape,
    topk_pd_vector, PersistenceImageParams, PiWeight, VectorizedSummary, PI_DEFAULT_RESOLUTION,
};

/// Version of the config and manifest layout.
pub const SCHEMA_VERSION: u32 = 1;

fn inf() -> f64 {
    f64::INFINITY
}

/// Complex builder and its parameters, tagged by `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ComplexSpec {
    Rips {
        #[serde(default = "inf", with = "crate::fmt::inf_json")]
        max_scale: f64,
        #[serde(default = "two")]
        max_dim: usize,
    },
    Cech {
        max_scale: f64,
        #[serde(default = "two")]
        max_dim: usize,
    },
    Alpha {
        #[serde(default = "inf", with = "crate::fmt::inf_json")]
        max_scale: f64,
    },
    Witness {
        landmarks: usize,
        #[serde(default = "two")]
        max_dim: usize,
        #[serde(default = "inf", with = "crate::fmt::inf_json")]
        max_scale: f64,
    },
    Cubical {
        cell_size: f64,
        #[serde(default = "inf", with = "crate::fmt::inf_json")]
        max_scale: f64,
    },
    Flood {
        landmarks: usize,
        radius: f64,
        #[serde(default = "flood_depth")]
        depth: usize,
    },
}

fn two() -> usize {
    2
}

fn flood_depth() -> usize {
    FLOOD_DEFAULT_DEPTH
}

impl ComplexSpec {
    pub fn build(&self, cloud: &PointCloud) -> Result<AnyComplex> {
        Ok(match *self {
            ComplexSpec::Rips { max_scale, max_dim } => {
                AnyComplex::Simplicial(build_rips(cloud, max_scale, max_dim)?)
            }
            ComplexSpec::Cech { max_scale, max_dim } => {
                AnyComplex::Simplicial(build_cech(cloud, max_scale, max_dim)?)
            }
            ComplexSpec::Alpha { max_scale } => {
                AnyComplex::Simplicial(build_alpha(cloud, max_scale)?)
            }
            ComplexSpec::Witness {
                landmarks,
                max_dim,
                max_scale,
            } => AnyComplex::Simplicial(build_witness(cloud, landmarks, max_dim, max_scale)?),
            ComplexSpec::Cubical {
                cell_size,
                max_scale,
            } => AnyComplex::Cubical(build_cubical(cloud, cell_size, max_scale)?),
            ComplexSpec::Flood {
                landmarks,
                radius,
                depth,
            } => AnyComplex::Simplicial(build_flood_with_depth(cloud, landmarks, radius, depth)?),
        })
    }
}

/// Optional vertex function replacing the geometric values (lower star).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "function", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionSpec {
    Height {
        axis: [f64; 3],
    },
    Dtm {
        #[serde(default = "dtm_mass")]
        mass: f64,
    },
}

fn dtm_mass() -> f64 {
    DTM_DEFAULT_MASS
}

/// Applies a vertex function to a simplicial complex whose vertices are cloud indices.
pub fn apply_function(k: AnyComplex, f: &FunctionSpec, cloud: &PointCloud) -> Result<AnyComplex> {
    let AnyComplex::Simplicial(k) = k else {
        return Err(Error::Config(
            "vertex functions apply to simplicial complexes only".into(),
        ));
    };
    if k.params.get("landmarks").is_some() {
        return Err(Error::Config(
            "vertex functions need complexes indexed by cloud points, not landmarks".into(),
        ));
    }
    let vf = match *f {
        FunctionSpec::Height { axis } => height_values(cloud, axis)?,
        FunctionSpec::Dtm { mass } => dtm_values(cloud, mass)?,
    };
    Ok(AnyComplex::Simplicial(lower_star_assign(&k, &vf)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VectorizerSpec {
    Pi {
        #[serde(default = "pi_dims")]
        dims: Vec<usize>,
        #[serde(default = "pi_resolution")]
        resolution: [usize; 2],
        /// Fitted to the diagram when absent.
        #[serde(default)]
        bandwidth: Option<f64>,
        #[serde(default)]
        birth_range: Option<[f64; 2]>,
        #[serde(default)]
        persistence_range: Option<[f64; 2]>,
        #[serde(default = "pi_weight")]
        weight: PiWeight,
        #[serde(default)]
        death_cap: Option<f64>,
    },
    Landscape {
        #[serde(default = "pi_dims")]
        dims: Vec<usize>,
        #[serde(default = "levels")]
        levels: usize,
        #[serde(default = "samples")]
        samples: usize,
        #[serde(default)]
        range: Option<[f64; 2]>,
    },
    BettiCurve {
        #[serde(default = "all_dims")]
        dims: Vec<usize>,
        #[serde(default = "samples")]
        samples: usize,
        #[serde(default)]
        range: Option<[f64; 2]>,
    },
    TopkPd {
        k: usize,
        #[serde(default)]
        death_cap: Option<f64>,
    },
}

fn pi_dims() -> Vec<usize> {
    vec![1, 2]
}

fn all_dims() -> Vec<usize> {
    vec![0, 1, 2]
}

fn pi_resolution() -> [usize; 2] {
    [PI_DEFAULT_RESOLUTION.0, PI_DEFAULT_RESOLUTION.1]
}

fn pi_weight() -> PiWeight {
    PiWeight::PersistenceLinear
}

fn levels() -> usize {
    5
}

fn samples() -> usize {
    100
}

/// A complete export pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub schema_version: u32,
    pub complex: ComplexSpec,
    #[serde(default)]
    pub filtration: Option<FunctionSpec>,
    /// Drop zero-persistence pairs before vectorizing.
    #[serde(default = "yes")]
    pub strictly_positive: bool,
    #[serde(default)]
    pub vectorizers: Vec<VectorizerSpec>,
}

fn yes() -> bool {
    true
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("invalid pipeline config: {e}")))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        for v in &cfg.vectorizers {
            let dims: &[usize] = match v {
                VectorizerSpec::Pi { dims, .. }
                | VectorizerSpec::Landscape { dims, .. }
                | VectorizerSpec::BettiCurve { dims, .. } => dims,
                VectorizerSpec::TopkPd { .. } => &[],
            };
            if let Some(d) = dims.iter().find(|&&d| d > MAX_HOM_DIM) {
                return Err(Error::Config(format!(
                    "vectorizer dimension {d} exceeds {MAX_HOM_DIM}"
                )));
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Parses a JSON config carrying `schema_version` alongside the fields of `T`.
pub fn parse_versioned<T: DeserializeOwned>(text: &str) -> Result<T> {
    let mut v: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid JSON: {e}")))?;
    let obj = v
        .as_object_mut()
        .ok_or_else(|| Error::Config("config must be a JSON object".into()))?;
    match obj.remove("schema_version").and_then(|x| x.as_u64()) {
        Some(n) if n == SCHEMA_VERSION as u64 => {}
        Some(n) => {
            return Err(Error::Config(format!(
                "unsupported schema_version {n} (expected {SCHEMA_VERSION})"
            )));
        }
        None => return Err(Error::Config("missing integer field schema_version".into())),
    }
    serde_json::from_value(v).map_err(|e| Error::Config(format!("invalid config: {e}")))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Range covering births and capped deaths of a diagram, for sampled summaries.
fn diagram_range(d: &PersistenceDiagram, cap: f64) -> [f64; 2] {
    let lo = d
        .pairs
        .iter()
        .map(|p| p.birth)
        .fold(f64::INFINITY, f64::min);
    let hi = d
        .pairs
        .iter()
        .map(|p| p.death.min(cap))
        .fold(f64::NEG_INFINITY, f64::max);
    if lo.is_finite() && hi > lo {
        [lo, hi]
    } else {
        [0.0, cap]
    }
}

/// Every requested summary as `(file stem, summary)`. `diagrams[k]` is the
/// dimension-k diagram; missing dimensions count as empty.
pub fn summaries(
    specs: &[VectorizerSpec],
    diagrams: &[PersistenceDiagram],
    strictly_positive: bool,
) -> Result<Vec<(String, VectorizedSummary)>> {
    let prepared: Vec<PersistenceDiagram> = (0..=MAX_HOM_DIM)
        .map(|k| match diagrams.iter().find(|d| d.dim == k) {
            Some(d) if strictly_positive => d.positive(),
            Some(d) => d.clone(),
            None => PersistenceDiagram::from_points(k, &[]),
        })
        .collect();
    let mut out = Vec::new();
    for v in specs {
        match v {
            VectorizerSpec::Pi {
                dims,
                resolution,
                bandwidth,
                birth_range,
                persistence_range,
                weight,
                death_cap,
            } => {
                for &dim in dims {
                    let d = &prepared[dim];
                    let mut p = PersistenceImageParams::fit(&[d], (resolution[0], resolution[1]));
                    if let Some(c) = death_cap {
                        p.death_cap = *c;
                    }
                    if let Some(b) = bandwidth {
                        p.bandwidth = *b;
                    }
                    if let Some([a, b]) = birth_range {
                        p.birth_range = (*a, *b);
                    }
                    if let Some([a, b]) = persistence_range {
                        p.persistence_range = (*a, *b);
                    }
                    p.weight = *weight;
                    out.push((format!("pi_dim{dim}"), persistence_image(d, &p)?));
                }
            }
            VectorizerSpec::Landscape {
                dims,
                levels,
                samples,
                range,
            } => {
                for &dim in dims {
                    let d = &prepared[dim];
                    let cap = default_death_cap(&[d]);
                    let [a, b] = range.unwrap_or_else(|| diagram_range(d, cap));
                    let grid = linspace(a, b, *samples);
                    out.push((
                        format!("landscape_dim{dim}"),
                        persistence_landscape(d, *levels, &grid, Some(cap))?,
                    ));
                }
            }
            VectorizerSpec::BettiCurve {
                dims,
                samples,
                range,
            } => {
                for &dim in dims {
                    let d = &prepared[dim];
                    let [a, b] = range.unwrap_or_else(|| diagram_range(d, default_death_cap(&[d])));
                    out.push((
                        format!("betti_dim{dim}"),
                        betti_curve(d, &linspace(a, b, *samples))?,
                    ));
                }
            }
            VectorizerSpec::TopkPd { k, death_cap } => {
                let refs: Vec<&PersistenceDiagram> = prepared.iter().collect();
                let cap = death_cap.unwrap_or_else(|| default_death_cap(&refs));
                out.push(("topk_pd".into(), topk_pd_vector(&prepared, *k, cap)?));
            }
        }
    }
    Ok(out)
}

/// Runs the pipeline on a point file and writes its outputs into `out_dir`.
/// Returns the paths written, manifest last.
pub fn export_features(input: &Path, cfg: &PipelineConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let bytes = fs::read(input)?;
    let cloud = load_points(input, PointFormat::from_path(input))?;
    let mut k = cfg.complex.build(&cloud)?;
    if let Some(f) = &cfg.filtration {
        k = apply_function(k, f, &cloud)?;
    }
    let diagrams = compute_persistence(k.as_cells(), MAX_HOM_DIM)?;
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let mut files = Vec::new();
    let mut emit = |name: String, data: Vec<u8>| -> Result<()> {
        let path = out_dir.join(&name);
        files.push(json!({ "name": name, "sha256": sha256_hex(&data), "bytes": data.len() }));
        fs::write(&path, data)?;
        written.push(path);
        Ok(())
    };
    for d in &diagrams.diagrams {
        let mut buf = Vec::new();
        d.write_csv(&mut buf)?;
        emit(format!("pd_dim{}.csv", d.dim), buf)?;
    }
    for (stem, s) in summaries(&cfg.vectorizers, &diagrams.diagrams, cfg.strictly_positive)? {
        let mut buf = Vec::new();
        s.write_csv(&mut buf)?;
        emit(format!("{stem}.csv"), buf)?;
        let mut side = serde_json::to_vec_pretty(&s.sidecar())?;
        side.push(b'\n');
        emit(format!("{stem}.json"), side)?;
    }
    let complex_params = match &k {
        AnyComplex::Simplicial(s) => s.params.clone(),
        AnyComplex::Cubical(c) => c.params.clone(),
    };
    let manifest = json!({
        "schema_version": SCHEMA_VERSION,
        "tool_version": env!("CARGO_PKG_VERSION"),
        "input": {
            "file": input.file_name().map(|f| f.to_string_lossy().into_owned()),
            "sha256": sha256_hex(&bytes),
            "points": cloud.len(),
        },
        "config": cfg,
        "complex": {
            "kind": k.kind(),
            "cells": k.len(),
            "params": complex_params,
        },
        "diagrams": diagrams.diagrams.iter().map(|d| json!({
            "dim": d.dim,
            "pairs": d.len(),
            "zero_persistence": d.zero_persistence_count(),
            "essential": d.essential_births().len(),
        })).collect::<Vec<_>>(),
        "files": files,
    });
    let mut buf = serde_json::to_vec_pretty(&manifest)?;
    buf.push(b'\n');
    let path = out_dir.join("manifest.json");
    fs::write(&path, buf)?;
    written.push(path);
    Ok(written)
}
