//! Filtered simplicial and cubical complexes and their builders.

mod alpha;
mod cech;
mod cubical;
pub mod delaunay;
mod flood;
mod rips;
mod witness;

use rustc_hash::FxHashMap as HashMap;
use std::fmt;
use std::hash::{DefaultHasher, Hash, Hasher};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

pub use alpha::build_alpha;
pub use cech::{build_cech, min_enclosing_radius, CECH_DEFAULT_CAP};
pub use cubical::{
    build_cubical, CubicalCell, CubicalComplex, CubicalGrid, CUBICAL_DEFAULT_DIM_CAP,
};
pub use delaunay::{delaunay3, tetra_volume, Delaunay};
pub use flood::{build_flood, build_flood_with_depth, FLOOD_DEFAULT_DEPTH};
pub use rips::{build_rips, rips_simplex_count};
pub use witness::build_witness;

use crate::error::{Error, Result};
use crate::fmt::{g17, parse_f64};

/// Highest simplex dimension any builder produces (homology up to H2).
pub const MAX_SIMPLEX_DIM: usize = 3;

/// A simplex on at most four vertices, stored sorted.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Simplex {
    v: [u32; 4],
    len: u8,
}

impl Simplex {
    /// Builds a simplex from any vertex order. Panics on duplicates or more than 4 vertices.
    pub fn new(vertices: &[u32]) -> Self {
        Self::try_new(vertices).expect("valid simplex vertices")
    }

    pub fn try_new(vertices: &[u32]) -> Result<Self> {
        if vertices.is_empty() || vertices.len() > 4 {
            return Err(Error::arg(format!(
                "simplex needs 1..=4 vertices, got {}",
                vertices.len()
            )));
        }
        let mut v = [0u32; 4];
        v[..vertices.len()].copy_from_slice(vertices);
        v[..vertices.len()].sort_unstable();
        if v[..vertices.len()].windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::arg("simplex has a repeated vertex"));
        }
        Ok(Simplex {
            v,
            len: vertices.len() as u8,
        })
    }

    pub fn vertex(v: u32) -> Self {
        Simplex {
            v: [v, 0, 0, 0],
            len: 1,
        }
    }

    pub fn vertices(&self) -> &[u32] {
        &self.v[..self.len as usize]
    }

    pub fn dim(&self) -> usize {
        self.len as usize - 1
    }

    /// Codimension-one faces, the i-th omitting the i-th vertex.
    pub fn facets(&self) -> impl Iterator<Item = Simplex> + '_ {
        let n = self.len as usize;
        (0..if n > 1 { n } else { 0 }).map(move |skip| {
            let mut v = [0u32; 4];
            let mut k = 0;
            for (i, &x) in self.vertices().iter().enumerate() {
                if i != skip {
                    v[k] = x;
                    k += 1;
                }
            }
            Simplex {
                v,
                len: (n - 1) as u8,
            }
        })
    }
}

impl Ord for Simplex {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.vertices().cmp(other.vertices())
    }
}

impl PartialOrd for Simplex {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Simplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.vertices())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComplexKind {
    Rips,
    Cech,
    Alpha,
    Witness,
    Cubical,
    Flood,
    /// Loaded from a dump or assembled by hand.
    Custom,
}

impl fmt::Display for ComplexKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ComplexKind::Rips => "rips",
            ComplexKind::Cech => "cech",
            ComplexKind::Alpha => "alpha",
            ComplexKind::Witness => "witness",
            ComplexKind::Cubical => "cubical",
            ComplexKind::Flood => "flood",
            ComplexKind::Custom => "custom",
        };
        f.write_str(s)
    }
}

/// Anything the boundary-matrix reduction can consume: cells in filtration
/// order, each with a dimension, a value and a boundary given as earlier indices.
pub trait CellFiltration {
    fn num_cells(&self) -> usize;
    fn cell_dim(&self, i: usize) -> usize;
    fn cell_value(&self, i: usize) -> f64;
    /// Writes the boundary of cell `i` into `out`, as indices into the filtration order.
    fn boundary_into(&self, i: usize, out: &mut Vec<usize>);
    fn kind(&self) -> ComplexKind;
    /// Stable digest of the cells and their values.
    fn fingerprint(&self) -> u64;
    /// Structural check run before reduction.
    fn validate(&self) -> Result<()>;
}

/// A built complex of either family.
pub enum AnyComplex {
    Simplicial(FilteredComplex),
    Cubical(CubicalComplex),
}

impl AnyComplex {
    pub fn kind(&self) -> ComplexKind {
        self.as_cells().kind()
    }

    pub fn len(&self) -> usize {
        self.as_cells().num_cells()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Writes the complex dump in filtration order.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        match self {
            AnyComplex::Simplicial(k) => k.write_csv(w),
            AnyComplex::Cubical(k) => k.write_csv(w),
        }
    }

    pub fn as_cells(&self) -> &dyn CellFiltration {
        match self {
            AnyComplex::Simplicial(k) => k,
            AnyComplex::Cubical(k) => k,
        }
    }
}

/// Simplices in filtration order with their values.
#[derive(Debug, Clone)]
pub struct FilteredComplex {
    simplices: Vec<Simplex>,
    values: Vec<f64>,
    pub kind: ComplexKind,
    /// Parameters of the builder that produced this complex.
    pub params: serde_json::Value,
    face_index: HashMap<Simplex, u32>,
}

fn filtration_cmp(a: &(Simplex, f64), b: &(Simplex, f64)) -> std::cmp::Ordering {
    a.1.total_cmp(&b.1)
        .then(a.0.len.cmp(&b.0.len))
        .then_with(|| a.0.cmp(&b.0))
}

impl FilteredComplex {
    /// Sorts entries into filtration order (value, dim, lexicographic) and indexes them.
    pub fn from_entries(
        mut entries: Vec<(Simplex, f64)>,
        kind: ComplexKind,
        params: serde_json::Value,
    ) -> Self {
        entries.sort_unstable_by(filtration_cmp);
        let mut face_index = HashMap::with_capacity_and_hasher(entries.len(), Default::default());
        let mut simplices = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        for (i, (s, v)) in entries.into_iter().enumerate() {
            face_index.insert(s, i as u32);
            simplices.push(s);
            values.push(v);
        }
        FilteredComplex {
            simplices,
            values,
            kind,
            params,
            face_index,
        }
    }

    pub fn len(&self) -> usize {
        self.simplices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.simplices.is_empty()
    }

    pub fn simplices(&self) -> &[Simplex] {
        &self.simplices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn simplex(&self, i: usize) -> Simplex {
        self.simplices[i]
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn index_of(&self, s: &Simplex) -> Option<usize> {
        self.face_index.get(s).map(|&i| i as usize)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Simplex, f64)> + '_ {
        self.simplices
            .iter()
            .copied()
            .zip(self.values.iter().copied())
    }

    /// Simplex counts per dimension, index = dim.
    pub fn count_by_dim(&self) -> [usize; 4] {
        let mut c = [0; 4];
        for s in &self.simplices {
            c[s.dim()] += 1;
        }
        c
    }

    pub fn max_dim(&self) -> Option<usize> {
        self.simplices.iter().map(|s| s.dim()).max()
    }

    /// Sorted vertex ids of the complex.
    pub fn vertex_ids(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self
            .simplices
            .iter()
            .filter(|s| s.dim() == 0)
            .map(|s| s.vertices()[0])
            .collect();
        v.sort_unstable();
        v
    }

    /// Checks sorting, face closure and monotonicity; reports the first violation.
    pub fn validate(&self) -> Result<()> {
        if self.face_index.len() != self.simplices.len() {
            return Err(Error::Validation("duplicate simplices".into()));
        }
        for (i, (s, v)) in self.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Validation(format!(
                    "simplex {s:?} has non-finite value {v}"
                )));
            }
            if s.vertices().windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Validation(format!(
                    "simplex {s:?} vertices not strictly increasing"
                )));
            }
            if i > 0 {
                let prev = (self.simplices[i - 1], self.values[i - 1]);
                if filtration_cmp(&prev, &(s, v)) != std::cmp::Ordering::Less {
                    return Err(Error::Validation(format!(
                        "order violated between {:?} and {s:?}",
                        prev.0
                    )));
                }
            }
            for f in s.facets() {
                match self.index_of(&f) {
                    None => return Err(Error::Validation(format!("face {f:?} of {s:?} missing"))),
                    Some(j) => {
                        if self.values[j] > v {
                            return Err(Error::Validation(format!(
                                "face {f:?} value {} exceeds {s:?} value {v}",
                                self.values[j]
                            )));
                        }
                        if j >= i {
                            return Err(Error::Validation(format!(
                                "face {f:?} appears after {s:?}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Same simplices with new values, re-sorted.
    pub fn with_values(&self, values: Vec<f64>, params: serde_json::Value) -> Self {
        let entries = self.simplices.iter().copied().zip(values).collect();
        FilteredComplex::from_entries(entries, self.kind, params)
    }

    /// Keeps only simplices with value <= `t`.
    pub fn truncated(&self, t: f64) -> Self {
        let entries = self.iter().filter(|(_, v)| *v <= t).collect();
        FilteredComplex::from_entries(entries, self.kind, self.params.clone())
    }

    /// Writes `dim,v0[,v1..],value` lines in filtration order.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for (s, v) in self.iter() {
            write!(w, "{}", s.dim())?;
            for x in s.vertices() {
                write!(w, ",{x}")?;
            }
            writeln!(w, ",{}", g17(v))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut entries = Vec::new();
        for (no, line) in r.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let bad = |m: &str| Error::Parse {
                line: no + 1,
                message: m.to_string(),
            };
            let f: Vec<&str> = t.split(',').collect();
            let dim: usize = f[0].parse().map_err(|_| bad("bad dimension"))?;
            if f.len() != dim + 3 {
                return Err(bad("field count does not match dimension"));
            }
            let verts: Vec<u32> = f[1..=dim + 1]
                .iter()
                .map(|x| x.parse().map_err(|_| bad("bad vertex id")))
                .collect::<Result<_>>()?;
            let value = parse_f64(f[dim + 2]).ok_or_else(|| bad("bad value"))?;
            let s = Simplex::try_new(&verts).map_err(|_| bad("bad simplex"))?;
            entries.push((s, value));
        }
        Ok(FilteredComplex::from_entries(
            entries,
            ComplexKind::Custom,
            serde_json::Value::Null,
        ))
    }
}

impl CellFiltration for FilteredComplex {
    fn num_cells(&self) -> usize {
        self.len()
    }

    fn cell_dim(&self, i: usize) -> usize {
        self.simplices[i].dim()
    }

    fn cell_value(&self, i: usize) -> f64 {
        self.values[i]
    }

    fn boundary_into(&self, i: usize, out: &mut Vec<usize>) {
        out.clear();
        out.extend(
            self.simplices[i]
                .facets()
                .map(|f| self.face_index[&f] as usize),
        );
        out.sort_unstable();
    }

    fn kind(&self) -> ComplexKind {
        self.kind
    }

    fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.kind.hash(&mut h);
        self.simplices.len().hash(&mut h);
        for (s, v) in self.iter() {
            s.hash(&mut h);
            v.to_bits().hash(&mut h);
        }
        h.finish()
    }

    fn validate(&self) -> Result<()> {
        FilteredComplex::validate(self)
    }
}

/// Sorted vertex lists for every k-subset of `0..n` (test helper and oracle).
#[cfg(test)]
pub(crate) fn subsets(n: u32, k: usize) -> Vec<Vec<u32>> {
    fn rec(start: u32, n: u32, k: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn edge_complex() -> FilteredComplex {
        FilteredComplex::from_entries(
            vec![
                (Simplex::new(&[1, 0]), 2.0),
                (Simplex::vertex(0), 0.0),
                (Simplex::vertex(1), 0.0),
            ],
            ComplexKind::Custom,
            serde_json::Value::Null,
        )
    }

    #[test]
    fn simplex_normalizes_order() {
        let s = Simplex::new(&[3, 1, 2]);
        assert_eq!(s.vertices(), &[1, 2, 3]);
        assert_eq!(s.dim(), 2);
        let f: Vec<_> = s.facets().collect();
        assert_eq!(
            f,
            vec![
                Simplex::new(&[2, 3]),
                Simplex::new(&[1, 3]),
                Simplex::new(&[1, 2])
            ]
        );
        assert!(Simplex::try_new(&[1, 1]).is_err());
        assert!(Simplex::try_new(&[]).is_err());
        assert!(Simplex::try_new(&[1, 2, 3, 4, 5]).is_err());
        assert_eq!(Simplex::vertex(7).facets().count(), 0);
    }

    #[test]
    fn validator_catches_missing_face_and_non_monotone() {
        assert!(edge_complex().validate().is_ok());
        let missing = FilteredComplex::from_entries(
            vec![(Simplex::vertex(0), 0.0), (Simplex::new(&[0, 1]), 1.0)],
            ComplexKind::Custom,
            serde_json::Value::Null,
        );
        assert!(matches!(missing.validate(), Err(Error::Validation(_))));
        let bad = FilteredComplex::from_entries(
            vec![
                (Simplex::vertex(0), 0.0),
                (Simplex::vertex(1), 3.0),
                (Simplex::new(&[0, 1]), 1.0),
            ],
            ComplexKind::Custom,
            serde_json::Value::Null,
        );
        assert!(matches!(bad.validate(), Err(Error::Validation(_))));
    }

    #[test]
    fn csv_round_trip_is_byte_identical() {
        let c = edge_complex();
        let mut a = Vec::new();
        c.write_csv(&mut a).unwrap();
        assert_eq!(
            String::from_utf8(a.clone()).unwrap(),
            "0,0,0\n0,1,0\n1,0,1,2\n"
        );
        let back = FilteredComplex::read_csv(&a[..]).unwrap();
        let mut b = Vec::new();
        back.write_csv(&mut b).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn ordering_is_total_and_face_first(vals in proptest::collection::vec(0.0f64..5.0, 3)) {
            // triangle with arbitrary vertex values and monotone lifted edges
            let v = vals;
            let mut entries = vec![];
            for i in 0..3u32 { entries.push((Simplex::vertex(i), v[i as usize])); }
            for (a, b) in [(0u32, 1u32), (0, 2), (1, 2)] {
                entries.push((Simplex::new(&[a, b]), v[a as usize].max(v[b as usize])));
            }
            entries.push((Simplex::new(&[0, 1, 2]), v.iter().cloned().fold(0.0, f64::max)));
            let c = FilteredComplex::from_entries(entries, ComplexKind::Custom, serde_json::Value::Null);
            prop_assert!(c.validate().is_ok());
        }
    }
}
