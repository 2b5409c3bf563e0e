//! Vertex functions and lower-star filtrations.

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::complex::FilteredComplex;
use crate::error::{Error, Result};
use crate::fmt::{g17, parse_f64};
use crate::geometry::{dot, Point3, PointCloud};

/// Default DTM mass.
pub const DTM_DEFAULT_MASS: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FunctionKind {
    Height,
    Dtm,
    Custom,
}

/// One finite value per cloud point.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexFunction {
    values: Vec<f64>,
    pub kind: FunctionKind,
}

impl VertexFunction {
    pub fn new(values: Vec<f64>, kind: FunctionKind) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::arg(format!("vertex value {i} is not finite")));
        }
        Ok(VertexFunction { values, kind })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Pointwise negation, turning sublevel into superlevel filtrations.
    pub fn negated(&self) -> Self {
        VertexFunction {
            values: self.values.iter().map(|v| -v).collect(),
            kind: self.kind,
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "index,value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{i},{}", g17(*v))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut values = Vec::new();
        for (no, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || (no == 0 && line == "index,value") {
                continue;
            }
            let bad = |m: &str| Error::Parse {
                line: no + 1,
                message: m.into(),
            };
            let (i, v) = line
                .split_once(',')
                .ok_or_else(|| bad("expected index,value"))?;
            let i: usize = i.trim().parse().map_err(|_| bad("bad index"))?;
            if i != values.len() {
                return Err(bad("indices must be consecutive from 0"));
            }
            values.push(parse_f64(v.trim()).ok_or_else(|| bad("bad value"))?);
        }
        VertexFunction::new(values, FunctionKind::Custom)
    }
}

/// Height along a unit direction.
pub fn height_values(cloud: &PointCloud, axis: Point3) -> Result<VertexFunction> {
    let norm = dot(&axis, &axis).sqrt();
    if !((norm - 1.0).abs() <= 1e-9) {
        return Err(Error::arg(format!("axis must have unit norm, got {norm}")));
    }
    let values = cloud.points().iter().map(|p| dot(p, &axis)).collect();
    VertexFunction::new(values, FunctionKind::Height)
}

/// Distance to measure with `k = ceil(mass * n)` neighbours, the point itself included.
pub fn dtm_values(cloud: &PointCloud, mass: f64) -> Result<VertexFunction> {
    if !(mass > 0.0 && mass <= 1.0) {
        return Err(Error::arg(format!("mass must lie in (0, 1], got {mass}")));
    }
    let k = ((mass * cloud.len() as f64).ceil() as usize).clamp(1, cloud.len());
    let grid = cloud.spatial_index();
    let values = cloud
        .points()
        .par_iter()
        .map(|p| {
            let s: f64 = grid.knn(p, k).iter().map(|(_, d)| d * d).sum();
            (s / k as f64).sqrt()
        })
        .collect();
    VertexFunction::new(values, FunctionKind::Dtm)
}

/// Replaces every simplex value by the maximum of `f` over its vertices and
/// re-sorts into filtration order.
pub fn lower_star_assign(complex: &FilteredComplex, f: &VertexFunction) -> Result<FilteredComplex> {
    let mut entries = Vec::with_capacity(complex.len());
    for s in complex.simplices() {
        let mut m = f64::NEG_INFINITY;
        for &v in s.vertices() {
            let x = f.values.get(v as usize).ok_or_else(|| {
                Error::arg(format!(
                    "vertex function has no value for vertex {v} ({} values)",
                    f.len()
                ))
            })?;
            m = m.max(*x);
        }
        entries.push((*s, m));
    }
    let params = json!({ "base": complex.params, "lower_star": f.kind });
    Ok(FilteredComplex::from_entries(entries, complex.kind, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::{build_rips, ComplexKind, Simplex};
    use proptest::prelude::*;

    fn cloud(pts: Vec<Point3>) -> PointCloud {
        PointCloud::new(pts, "t").unwrap()
    }

    #[test]
    fn height_examples() {
        let c = cloud(vec![[1.0, 2.0, 3.0]]);
        assert_eq!(height_values(&c, [0.0, 0.0, 1.0]).unwrap().values(), &[3.0]);
        let c = cloud(vec![[1.0, 1.0, 0.0]]);
        let h = FRAC_1_SQRT_2;
        let v = height_values(&c, [h, h, 0.0]).unwrap().values()[0];
        assert!((v - 2f64.sqrt()).abs() < 1e-15);
        assert!(height_values(&c, [1.0, 1.0, 0.0]).is_err());
    }
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn height_shifts_with_translation() {
        let pts = vec![[0.1, 0.2, 0.3], [1.0, -1.0, 2.5], [3.0, 0.0, -4.0]];
        let moved: Vec<Point3> = pts.iter().map(|p| [p[0], p[1], p[2] + 5.0]).collect();
        let a = height_values(&cloud(pts), [0.0, 0.0, 1.0]).unwrap();
        let b = height_values(&cloud(moved), [0.0, 0.0, 1.0]).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((y - x - 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dtm_examples() {
        let c = cloud(vec![[0.0; 3], [1.0, 0.0, 0.0]]);
        assert_eq!(dtm_values(&c, 0.5).unwrap().values(), &[0.0, 0.0]);
        let v = dtm_values(&c, 1.0).unwrap();
        for x in v.values() {
            assert!((x - FRAC_1_SQRT_2).abs() < 1e-15);
        }
        assert!(dtm_values(&c, 0.0).is_err());
        assert!(dtm_values(&c, 1.5).is_err());
    }

    #[test]
    fn dtm_outlier_is_largest() {
        let mut pts: Vec<Point3> = (0..50)
            .map(|i| {
                let t = i as f64 * 0.37;
                [0.1 * t.sin(), 0.1 * t.cos(), 0.1 * (t * 1.7).sin()]
            })
            .collect();
        pts.push([2.0, 0.0, 0.0]);
        let v = dtm_values(&cloud(pts), 0.1).unwrap();
        let max = v.values()[..50].iter().cloned().fold(0.0, f64::max);
        assert!(v.values()[50] > max);
    }

    #[test]
    fn dtm_matches_direct_formula() {
        let pts: Vec<Point3> = (0..40)
            .map(|i| {
                let t = i as f64;
                [(t * 0.9).sin(), (t * 1.3).cos(), (t * 0.4).sin() * 2.0]
            })
            .collect();
        let c = cloud(pts.clone());
        let v = dtm_values(&c, 0.2).unwrap();
        for (i, p) in pts.iter().enumerate() {
            let mut d: Vec<f64> = pts.iter().map(|q| crate::geometry::dist2(p, q)).collect();
            d.sort_by(f64::total_cmp);
            let expect = (d[..8].iter().sum::<f64>() / 8.0).sqrt();
            assert!((v.values()[i] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn lower_star_edge_and_constant() {
        let k = FilteredComplex::from_entries(
            vec![
                (Simplex::vertex(0), 0.0),
                (Simplex::vertex(1), 0.0),
                (Simplex::new(&[0, 1]), 1.0),
            ],
            ComplexKind::Custom,
            serde_json::Value::Null,
        );
        let f = VertexFunction::new(vec![1.0, 3.0], FunctionKind::Custom).unwrap();
        let l = lower_star_assign(&k, &f).unwrap();
        assert_eq!(l.values(), &[1.0, 3.0, 3.0]);
        let c = VertexFunction::new(vec![2.0, 2.0], FunctionKind::Custom).unwrap();
        let l = lower_star_assign(&k, &c).unwrap();
        assert_eq!(l.values(), &[2.0, 2.0, 2.0]);
        assert_eq!(l.simplices(), k.simplices());
        let short = VertexFunction::new(vec![1.0], FunctionKind::Custom).unwrap();
        assert!(lower_star_assign(&k, &short).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let f = VertexFunction::new(vec![0.1, -2.5, 1e-7], FunctionKind::Custom).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap().lines().next(),
            Some("index,value")
        );
        assert_eq!(VertexFunction::read_csv(&buf[..]).unwrap(), f);
    }

    fn arb_case() -> impl Strategy<Value = (Vec<Point3>, Vec<f64>, Vec<f64>)> {
        (4usize..14).prop_flat_map(|n| {
            (
                prop::collection::vec(prop::array::uniform3(-1.0..1.0f64), n),
                prop::collection::vec(-2.0..2.0f64, n),
                prop::collection::vec(-2.0..2.0f64, n),
            )
        })
    }

    proptest! {
        #[test]
        fn lower_star_properties((pts, f, g) in arb_case()) {
            let c = cloud(pts);
            let k = build_rips(&c, 1.0, 3).unwrap();
            let ff = VertexFunction::new(f.clone(), FunctionKind::Custom).unwrap();
            let gg = VertexFunction::new(g.clone(), FunctionKind::Custom).unwrap();
            let lf = lower_star_assign(&k, &ff).unwrap();
            let lg = lower_star_assign(&k, &gg).unwrap();
            lf.validate().unwrap();
            lg.validate().unwrap();
            let sup = f.iter().zip(&g).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let hmin: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a.min(*b)).collect();
            let lmin = lower_star_assign(&k, &VertexFunction::new(hmin, FunctionKind::Custom).unwrap()).unwrap();
            for (s, v) in lf.iter() {
                let w = lg.value(lg.index_of(&s).unwrap());
                prop_assert!((v - w).abs() <= sup);
                let m = lmin.value(lmin.index_of(&s).unwrap());
                prop_assert!(m <= v && m <= w);
            }
        }

        #[test]
        fn functions_are_permutation_equivariant(pts in prop::collection::vec(prop::array::uniform3(-1.0..1.0f64), 3..30), rot in 0usize..30) {
            let n = pts.len();
            let perm: Vec<usize> = (0..n).map(|i| (i + rot) % n).collect();
            let moved: Vec<Point3> = perm.iter().map(|&i| pts[i]).collect();
            let a = cloud(pts);
            let b = cloud(moved);
            let da = dtm_values(&a, 0.3).unwrap();
            let db = dtm_values(&b, 0.3).unwrap();
            let ha = height_values(&a, [0.0, 1.0, 0.0]).unwrap();
            let hb = height_values(&b, [0.0, 1.0, 0.0]).unwrap();
            for (j, &i) in perm.iter().enumerate() {
                prop_assert!((da.values()[i] - db.values()[j]).abs() < 1e-12);
                prop_assert_eq!(ha.values()[i], hb.values()[j]);
            }
        }
    }
}
