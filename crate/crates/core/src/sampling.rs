//! Persistence-guided seed selection and nearest-seed patches.

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::complex::build_rips;
use crate::error::{Error, Result};
use crate::geometry::{dist, fps_from, PointCloud, SpatialGrid};
use crate::persistence::{compute_persistence, representative_simplices};

/// Default pilot subsample size.
pub const PILOT_DEFAULT_SIZE: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum SeedProvenance {
    /// Vertex of the representative cycle of pair `pair` in diagram `dim`.
    PersistenceFeature {
        dim: usize,
        pair: usize,
    },
    FpsFill,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedSet {
    pub indices: Vec<usize>,
    /// Persistence of the feature behind each seed (infinite for essential
    /// classes, 0 for fill seeds).
    pub scores: Vec<f64>,
    pub provenance: Vec<SeedProvenance>,
}

impl SeedSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Seeds chosen from persistence features, in acceptance order.
    pub fn feature_seeds(&self) -> Vec<usize> {
        self.indices
            .iter()
            .zip(&self.provenance)
            .filter(|(_, p)| matches!(p, SeedProvenance::PersistenceFeature { .. }))
            .map(|(&i, _)| i)
            .collect()
    }

    /// JSON report; infinite scores are written as `"inf"`.
    pub fn report(&self) -> serde_json::Value {
        let seeds: Vec<serde_json::Value> = self
            .indices
            .iter()
            .zip(&self.scores)
            .zip(&self.provenance)
            .map(|((&i, &s), p)| {
                let score = if s.is_finite() {
                    json!(s)
                } else {
                    json!("inf")
                };
                json!({ "index": i, "score": score, "provenance": p })
            })
            .collect();
        json!({ "count": self.indices.len(), "seeds": seeds })
    }
}

/// Default suppression radius: bounding-box diagonal over the square root of the budget.
pub fn default_suppression_radius(cloud: &PointCloud, budget: usize) -> f64 {
    cloud.bbox_diagonal() / (budget.max(1) as f64).sqrt()
}

/// Seeds on the representative cycles of the most persistent features of a
/// rips pilot, spread out by a suppression radius, topped up by farthest-point
/// sampling.
pub fn ph_guided_sample(
    cloud: &PointCloud,
    budget: usize,
    pilot_size: usize,
    max_scale: f64,
    suppression_radius: f64,
) -> Result<SeedSet> {
    let n = cloud.len();
    if budget == 0 || budget > n {
        return Err(Error::arg(format!(
            "budget must be in 1..={n}, got {budget}"
        )));
    }
    if pilot_size == 0 {
        return Err(Error::arg("pilot_size must be positive"));
    }
    if !(max_scale > 0.0) {
        return Err(Error::arg(format!(
            "max_scale must be positive, got {max_scale}"
        )));
    }
    if !(suppression_radius >= 0.0) {
        return Err(Error::arg(format!(
            "suppression_radius must be nonnegative, got {suppression_radius}"
        )));
    }
    let pilot = fps_from(cloud.points(), &[0], pilot_size.min(n));
    let pc = cloud.select(&pilot);
    let k = build_rips(&pc, max_scale, 3)?;
    let diagrams = compute_persistence(&k, 2)?;

    let mut order: Vec<(usize, usize)> = Vec::new();
    for d in &diagrams.diagrams {
        for (i, p) in d.pairs.iter().enumerate() {
            if p.persistence() > 0.0 {
                order.push((d.dim, i));
            }
        }
    }
    // most persistent first; ties by dimension then birth then position
    order.sort_by(|&(da, ia), &(db, ib)| {
        let (pa, pb) = (&diagrams[da].pairs[ia], &diagrams[db].pairs[ib]);
        pb.persistence()
            .total_cmp(&pa.persistence())
            .then(db.cmp(&da))
            .then(pa.birth.total_cmp(&pb.birth))
            .then(ia.cmp(&ib))
    });

    let mut seeds = SeedSet {
        indices: Vec::new(),
        scores: Vec::new(),
        provenance: Vec::new(),
    };
    let mut taken = vec![false; n];
    'pairs: for (dim, i) in order {
        let pair = &diagrams[dim].pairs[i];
        let mut verts: Vec<usize> = representative_simplices(&k, pair)?
            .iter()
            .flat_map(|s| s.vertices().to_vec())
            .map(|v| pilot[v as usize])
            .collect();
        verts.sort_unstable();
        verts.dedup();
        for v in verts {
            if seeds.len() == budget {
                break 'pairs;
            }
            if taken[v] {
                continue;
            }
            let p = cloud.point(v);
            if seeds
                .indices
                .iter()
                .any(|&s| dist(cloud.point(s), p) < suppression_radius)
            {
                continue;
            }
            taken[v] = true;
            seeds.indices.push(v);
            seeds.scores.push(pair.persistence());
            seeds
                .provenance
                .push(SeedProvenance::PersistenceFeature { dim, pair: i });
        }
    }
    let filled = fps_from(cloud.points(), &seeds.indices, budget);
    for &v in &filled[seeds.len()..] {
        seeds.indices.push(v);
        seeds.scores.push(0.0);
        seeds.provenance.push(SeedProvenance::FpsFill);
    }
    log::debug!(
        "ph_guided_sample: {} feature seeds, {} fill seeds",
        seeds.feature_seeds().len(),
        budget - seeds.feature_seeds().len()
    );
    Ok(seeds)
}

/// Index (into `seeds.indices`) of the nearest seed of every point; ties go to the lower seed index.
pub fn patch_partition(cloud: &PointCloud, seeds: &SeedSet) -> Result<Vec<usize>> {
    if seeds.is_empty() {
        return Err(Error::arg("patch partition needs at least one seed"));
    }
    if let Some(&bad) = seeds.indices.iter().find(|&&i| i >= cloud.len()) {
        return Err(Error::arg(format!("seed index {bad} out of range")));
    }
    let pts: Vec<_> = seeds.indices.iter().map(|&i| *cloud.point(i)).collect();
    let grid = SpatialGrid::new(&pts);
    Ok(cloud.points().iter().map(|p| grid.knn(p, 1)[0].0).collect())
}
