//! Persistent homology over Z/2 by boundary-matrix column reduction.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::complex::{CellFiltration, ComplexKind, FilteredComplex, Simplex};
use crate::error::{Error, Result};
use crate::fmt::{g17, parse_f64};

/// Highest homology dimension computed.
pub const MAX_HOM_DIM: usize = 2;
const NONE: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PersistencePair {
    pub dim: usize,
    pub birth: f64,
    /// `f64::INFINITY` for essential classes.
    pub death: f64,
    pub birth_simplex: usize,
    pub death_simplex: Option<usize>,
    /// Fingerprint of the complex the pair was computed from.
    pub source: u64,
}

impl PersistencePair {
    pub fn persistence(&self) -> f64 {
        self.death - self.birth
    }

    pub fn is_essential(&self) -> bool {
        self.death_simplex.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramSource {
    pub kind: ComplexKind,
    pub fingerprint: u64,
}

/// Pairs of one homology dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceDiagram {
    pub dim: usize,
    pub pairs: Vec<PersistencePair>,
    pub source: DiagramSource,
}

impl PersistenceDiagram {
    /// A diagram built from raw `(birth, death)` points, for tests and imports.
    pub fn from_points(dim: usize, points: &[(f64, f64)]) -> Self {
        let pairs = points
            .iter()
            .map(|&(birth, death)| PersistencePair {
                dim,
                birth,
                death,
                birth_simplex: NONE,
                death_simplex: if death.is_finite() { Some(NONE) } else { None },
                source: 0,
            })
            .collect();
        PersistenceDiagram {
            dim,
            pairs,
            source: DiagramSource {
                kind: ComplexKind::Custom,
                fingerprint: 0,
            },
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        self.pairs.iter().map(|p| (p.birth, p.death)).collect()
    }

    /// Finite pairs only.
    pub fn finite_points(&self) -> Vec<(f64, f64)> {
        self.pairs
            .iter()
            .filter(|p| !p.is_essential())
            .map(|p| (p.birth, p.death))
            .collect()
    }

    pub fn essential_births(&self) -> Vec<f64> {
        self.pairs
            .iter()
            .filter(|p| p.is_essential())
            .map(|p| p.birth)
            .collect()
    }

    /// Number of pairs with zero persistence.
    pub fn zero_persistence_count(&self) -> usize {
        self.pairs.iter().filter(|p| p.birth == p.death).count()
    }

    /// Keeps pairs with persistence at least `min_persistence`, and strictly
    /// positive persistence when `strictly_positive` is set.
    pub fn filtered(&self, min_persistence: f64, strictly_positive: bool) -> Self {
        let pairs = self
            .pairs
            .iter()
            .filter(|p| {
                p.persistence() >= min_persistence && (!strictly_positive || p.persistence() > 0.0)
            })
            .copied()
            .collect();
        PersistenceDiagram {
            dim: self.dim,
            pairs,
            source: self.source.clone(),
        }
    }

    /// Pairs with strictly positive persistence.
    pub fn positive(&self) -> Self {
        self.filtered(0.0, true)
    }

    /// Writes `dim,birth,death` rows with a header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "dim,birth,death")?;
        self.write_rows(&mut w)
    }

    fn write_rows<W: Write>(&self, w: &mut W) -> Result<()> {
        for p in &self.pairs {
            writeln!(w, "{},{},{}", p.dim, g17(p.birth), g17(p.death))?;
        }
        Ok(())
    }

    /// Reads a diagram CSV; rows of other dimensions are skipped.
    pub fn read_csv<R: BufRead>(r: R, dim: usize) -> Result<Self> {
        let mut pts = Vec::new();
        for (no, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line == "dim,birth,death" {
                continue;
            }
            let bad = || Error::Parse {
                line: no + 1,
                message: "expected dim,birth,death".into(),
            };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 3 {
                return Err(bad());
            }
            let d: usize = f[0].parse().map_err(|_| bad())?;
            let b = parse_f64(f[1]).ok_or_else(bad)?;
            let e = parse_f64(f[2]).ok_or_else(bad)?;
            if !b.is_finite() || e < b {
                return Err(bad());
            }
            if d == dim {
                pts.push((b, e));
            }
        }
        Ok(PersistenceDiagram::from_points(dim, &pts))
    }
}

/// Counters from one reduction run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReductionStats {
    pub columns_reduced: usize,
    pub columns_cleared: usize,
    pub column_additions: u64,
}

/// Diagrams for dimensions `0..=max_hom_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagrams {
    pub diagrams: Vec<PersistenceDiagram>,
    pub stats: ReductionStats,
}

impl Diagrams {
    pub fn get(&self, dim: usize) -> Option<&PersistenceDiagram> {
        self.diagrams.get(dim)
    }

    pub fn max_hom_dim(&self) -> usize {
        self.diagrams.len() - 1
    }

    /// All dimensions in one CSV with a single header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "dim,birth,death")?;
        for d in &self.diagrams {
            d.write_rows(&mut w)?;
        }
        Ok(())
    }
}

impl std::ops::Index<usize> for Diagrams {
    type Output = PersistenceDiagram;
    fn index(&self, dim: usize) -> &PersistenceDiagram {
        &self.diagrams[dim]
    }
}

/// Z/2 sum of two sorted index lists, written into `out`.
fn add_columns(a: &[usize], b: &[usize], out: &mut Vec<usize>) {
    out.clear();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
}

/// Reduced columns of one dimension plus the pivot lookup.
struct Reduction {
    /// `pivot_of[row] = column` whose reduced low is `row`.
    pivot_of: Vec<usize>,
    /// Reduced column per cell index (only for the dimension reduced).
    columns: Vec<Vec<usize>>,
    /// Columns of V (only with tracking).
    v: Vec<Vec<usize>>,
}

/// Reduces the columns of dimension `dim` in filtration order, up to and
/// including cell `upto`. Columns in `cleared` are skipped (known zero).
fn reduce_dimension<C: CellFiltration + ?Sized>(
    c: &C,
    dim: usize,
    upto: usize,
    cleared: Option<&[bool]>,
    track_v: bool,
    stats: &mut ReductionStats,
) -> Reduction {
    let n = c.num_cells();
    let mut red = Reduction {
        pivot_of: vec![NONE; n],
        columns: vec![Vec::new(); n],
        v: if track_v {
            vec![Vec::new(); n]
        } else {
            Vec::new()
        },
    };
    let mut col = Vec::new();
    let mut scratch = Vec::new();
    let mut vcol = Vec::new();
    let mut vscratch = Vec::new();
    for j in 0..=upto.min(n.saturating_sub(1)) {
        if n == 0 || c.cell_dim(j) != dim {
            continue;
        }
        if cleared.is_some_and(|cl| cl[j]) {
            stats.columns_cleared += 1;
            continue;
        }
        stats.columns_reduced += 1;
        c.boundary_into(j, &mut col);
        if track_v {
            vcol.clear();
            vcol.push(j);
        }
        while let Some(&low) = col.last() {
            let k = red.pivot_of[low];
            if k == NONE {
                break;
            }
            add_columns(&col, &red.columns[k], &mut scratch);
            std::mem::swap(&mut col, &mut scratch);
            if track_v {
                add_columns(&vcol, &red.v[k], &mut vscratch);
                std::mem::swap(&mut vcol, &mut vscratch);
            }
            stats.column_additions += 1;
        }
        if let Some(&low) = col.last() {
            red.pivot_of[low] = j;
        }
        red.columns[j] = std::mem::take(&mut col);
        if track_v {
            red.v[j] = std::mem::take(&mut vcol);
        }
    }
    red
}

fn check_hom_dim(max_hom_dim: usize) -> Result<()> {
    if max_hom_dim > MAX_HOM_DIM {
        return Err(Error::arg(format!(
            "max_hom_dim must be at most {MAX_HOM_DIM}, got {max_hom_dim}"
        )));
    }
    Ok(())
}

/// Persistence diagrams for dimensions `0..=max_hom_dim`, reducing from the
/// top dimension down and clearing columns already known to be positive.
pub fn compute_persistence<C: CellFiltration + ?Sized>(
    c: &C,
    max_hom_dim: usize,
) -> Result<Diagrams> {
    compute(c, max_hom_dim, true)
}

/// Plain left-to-right reduction without clearing, for cross-checks.
pub fn compute_persistence_plain<C: CellFiltration + ?Sized>(
    c: &C,
    max_hom_dim: usize,
) -> Result<Diagrams> {
    compute(c, max_hom_dim, false)
}

fn compute<C: CellFiltration + ?Sized>(
    c: &C,
    max_hom_dim: usize,
    clearing: bool,
) -> Result<Diagrams> {
    check_hom_dim(max_hom_dim)?;
    c.validate()?;
    let n = c.num_cells();
    let fp = c.fingerprint();
    let mut stats = ReductionStats::default();
    // paired_with[i] = partner of i, for births (dim k) and deaths (dim k+1)
    let mut death_of = vec![NONE; n];
    let mut is_negative = vec![false; n];
    let mut cleared = vec![false; n];
    let top = max_hom_dim + 1;
    for dim in (1..=top).rev() {
        let red = reduce_dimension(
            c,
            dim,
            n.saturating_sub(1),
            if clearing { Some(&cleared) } else { None },
            false,
            &mut stats,
        );
        let mut next_cleared = vec![false; n];
        for (row, &col) in red.pivot_of.iter().enumerate() {
            if col != NONE {
                death_of[row] = col;
                is_negative[col] = true;
                next_cleared[row] = true;
            }
        }
        cleared = next_cleared;
    }
    let mut diagrams: Vec<PersistenceDiagram> = (0..=max_hom_dim)
        .map(|dim| PersistenceDiagram {
            dim,
            pairs: Vec::new(),
            source: DiagramSource {
                kind: c.kind(),
                fingerprint: fp,
            },
        })
        .collect();
    for i in 0..n {
        let dim = c.cell_dim(i);
        if dim > max_hom_dim || is_negative[i] {
            continue;
        }
        let j = death_of[i];
        let birth = c.cell_value(i);
        let (death, death_simplex) = if j == NONE {
            (f64::INFINITY, None)
        } else {
            (c.cell_value(j), Some(j))
        };
        diagrams[dim].pairs.push(PersistencePair {
            dim,
            birth,
            death,
            birth_simplex: i,
            death_simplex,
            source: fp,
        });
    }
    Ok(Diagrams { diagrams, stats })
}

/// `(β0, β1, β2)` at scale `t`: pairs with `birth <= t < death`.
pub fn betti_at(diagrams: &Diagrams, t: f64) -> [usize; 3] {
    let mut b = [0; 3];
    for d in diagrams.diagrams.iter().filter(|d| d.dim < 3) {
        b[d.dim] = d
            .pairs
            .iter()
            .filter(|p| p.birth <= t && t < p.death)
            .count();
    }
    b
}

/// Cycle representing the class of `pair`, as cell indices in filtration order.
///
/// Finite pairs return the reduced boundary column of the death cell; essential
/// pairs return the chain that reduced the birth cell's column to zero.
pub fn representative_cycle<C: CellFiltration + ?Sized>(
    c: &C,
    pair: &PersistencePair,
) -> Result<Vec<usize>> {
    if pair.source != c.fingerprint() {
        return Err(Error::arg("pair was not computed from this complex"));
    }
    let n = c.num_cells();
    if pair.birth_simplex >= n || c.cell_dim(pair.birth_simplex) != pair.dim {
        return Err(Error::arg("pair birth cell does not match the complex"));
    }
    if pair.dim == 0 {
        // every 0-chain is a cycle; the class is carried by its creator
        return Ok(vec![pair.birth_simplex]);
    }
    let mut stats = ReductionStats::default();
    match pair.death_simplex {
        Some(j) => {
            if j >= n || c.cell_dim(j) != pair.dim + 1 {
                return Err(Error::arg("pair death cell does not match the complex"));
            }
            let mut red = reduce_dimension(c, pair.dim + 1, j, None, false, &mut stats);
            Ok(std::mem::take(&mut red.columns[j]))
        }
        None => {
            let i = pair.birth_simplex;
            let mut red = reduce_dimension(c, pair.dim, i, None, true, &mut stats);
            Ok(std::mem::take(&mut red.v[i]))
        }
    }
}

/// Simplices of a representative cycle.
pub fn representative_simplices(
    complex: &FilteredComplex,
    pair: &PersistencePair,
) -> Result<Vec<Simplex>> {
    Ok(representative_cycle(complex, pair)?
        .into_iter()
        .map(|i| complex.simplex(i))
        .collect())
}
