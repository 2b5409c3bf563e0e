//! Cubical complexes on a voxel grid, filtered by the Euclidean distance
//! transform of the occupied voxels.

use std::hash::{DefaultHasher, Hash, Hasher};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{CellFiltration, ComplexKind};
use crate::error::{Error, Result};
use crate::fmt::{g17, parse_f64};
use crate::geometry::{Point3, PointCloud};

/// Default per-axis cap on the number of grid cells.
pub const CUBICAL_DEFAULT_DIM_CAP: usize = 512;
/// Cap on the total number of top cells, bounding memory for the cell index.
const MAX_TOP_CELLS: usize = 4_000_000;
const NONE: u32 = u32::MAX;

/// Voxel grid with one distance value per top cell (x fastest).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CubicalGrid {
    pub origin: Point3,
    pub cell_size: f64,
    pub dims: [usize; 3],
    pub cell_values: Vec<f64>,
}

impl CubicalGrid {
    pub fn top_index(&self, x: usize, y: usize, z: usize) -> usize {
        (z * self.dims[1] + y) * self.dims[0] + x
    }
}

/// A cell of any dimension, addressed by its lower corner vertex and a 3-bit
/// extent mask (bit 0 = spans x, bit 1 = y, bit 2 = z).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CubicalCell {
    pub corner: [u32; 3],
    pub extent: u8,
}

impl CubicalCell {
    pub fn dim(&self) -> usize {
        self.extent.count_ones() as usize
    }

    fn doubled(&self) -> [usize; 3] {
        [0, 1, 2].map(|a| 2 * self.corner[a] as usize + ((self.extent >> a) & 1) as usize)
    }

    fn from_doubled(d: [usize; 3]) -> Self {
        CubicalCell {
            corner: d.map(|c| (c / 2) as u32),
            extent: (0..3).fold(0u8, |m, a| m | (((d[a] & 1) as u8) << a)),
        }
    }

    /// `x:y:z:type` identifier used in dumps.
    pub fn id(&self) -> String {
        format!(
            "{}:{}:{}:{}",
            self.corner[0], self.corner[1], self.corner[2], self.extent
        )
    }

    pub fn parse_id(s: &str) -> Option<Self> {
        let f: Vec<&str> = s.split(':').collect();
        if f.len() != 4 {
            return None;
        }
        let extent: u8 = f[3].parse().ok()?;
        if extent > 7 {
            return None;
        }
        Some(CubicalCell {
            corner: [f[0].parse().ok()?, f[1].parse().ok()?, f[2].parse().ok()?],
            extent,
        })
    }
}

/// Cubical cells in filtration order, with the grid they live on.
#[derive(Debug, Clone)]
pub struct CubicalComplex {
    pub grid: CubicalGrid,
    cells: Vec<CubicalCell>,
    values: Vec<f64>,
    /// Doubled-grid dimensions and a dense position lookup.
    ddims: [usize; 3],
    position: Vec<u32>,
    pub params: serde_json::Value,
}

impl CubicalComplex {
    fn from_cells(
        grid: CubicalGrid,
        mut entries: Vec<(CubicalCell, f64)>,
        params: serde_json::Value,
    ) -> Self {
        entries.sort_unstable_by(|a, b| {
            a.1.total_cmp(&b.1)
                .then(a.0.dim().cmp(&b.0.dim()))
                .then_with(|| a.0.cmp(&b.0))
        });
        let ddims = grid.dims.map(|d| 2 * d + 1);
        let mut position = vec![NONE; ddims[0] * ddims[1] * ddims[2]];
        let lin = |d: [usize; 3]| (d[2] * ddims[1] + d[1]) * ddims[0] + d[0];
        for (i, (c, _)) in entries.iter().enumerate() {
            position[lin(c.doubled())] = i as u32;
        }
        let (cells, values) = entries.into_iter().unzip();
        CubicalComplex {
            grid,
            cells,
            values,
            ddims,
            position,
            params,
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[CubicalCell] {
        &self.cells
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn index_of(&self, c: &CubicalCell) -> Option<usize> {
        let d = c.doubled();
        if (0..3).any(|a| d[a] >= self.ddims[a]) {
            return None;
        }
        match self.position[self.lin(d)] {
            NONE => None,
            i => Some(i as usize),
        }
    }

    fn lin(&self, d: [usize; 3]) -> usize {
        (d[2] * self.ddims[1] + d[1]) * self.ddims[0] + d[0]
    }

    pub fn count_by_dim(&self) -> [usize; 4] {
        let mut c = [0; 4];
        for cell in &self.cells {
            c[cell.dim()] += 1;
        }
        c
    }

    /// Writes `dim,x:y:z:type,value` lines in filtration order.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for (c, v) in self.cells.iter().zip(&self.values) {
            writeln!(w, "{},{},{}", c.dim(), c.id(), g17(*v))?;
        }
        Ok(())
    }

    /// Reads cells from a dump; the grid geometry is not part of the format.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Vec<(CubicalCell, f64)>> {
        let mut out = Vec::new();
        for (no, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = || Error::Parse {
                line: no + 1,
                message: "expected dim,x:y:z:type,value".into(),
            };
            let f: Vec<&str> = line.trim().split(',').collect();
            if f.len() != 3 {
                return Err(bad());
            }
            let cell = CubicalCell::parse_id(f[1]).ok_or_else(bad)?;
            if f[0].parse::<usize>().ok() != Some(cell.dim()) {
                return Err(bad());
            }
            out.push((cell, parse_f64(f[2]).ok_or_else(bad)?));
        }
        Ok(out)
    }
}

impl CellFiltration for CubicalComplex {
    fn num_cells(&self) -> usize {
        self.cells.len()
    }

    fn cell_dim(&self, i: usize) -> usize {
        self.cells[i].dim()
    }

    fn cell_value(&self, i: usize) -> f64 {
        self.values[i]
    }

    fn boundary_into(&self, i: usize, out: &mut Vec<usize>) {
        out.clear();
        let d = self.cells[i].doubled();
        for a in 0..3 {
            if d[a] & 1 == 1 {
                for side in [d[a] - 1, d[a] + 1] {
                    let mut f = d;
                    f[a] = side;
                    let p = self.position[self.lin(f)];
                    debug_assert_ne!(p, NONE);
                    out.push(p as usize);
                }
            }
        }
        out.sort_unstable();
    }

    fn kind(&self) -> ComplexKind {
        ComplexKind::Cubical
    }

    fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        ComplexKind::Cubical.hash(&mut h);
        self.grid.dims.hash(&mut h);
        for (c, v) in self.cells.iter().zip(&self.values) {
            c.hash(&mut h);
            v.to_bits().hash(&mut h);
        }
        h.finish()
    }

    fn validate(&self) -> Result<()> {
        let mut bd = Vec::new();
        for i in 0..self.cells.len() {
            if !self.values[i].is_finite() {
                return Err(Error::Validation(format!(
                    "cell {} has non-finite value",
                    self.cells[i].id()
                )));
            }
            let d = self.cells[i].doubled();
            for a in 0..3 {
                if d[a] & 1 == 1 {
                    for side in [d[a] - 1, d[a] + 1] {
                        let mut f = d;
                        f[a] = side;
                        if self.position[self.lin(f)] == NONE {
                            return Err(Error::Validation(format!(
                                "face {} of {} missing",
                                CubicalCell::from_doubled(f).id(),
                                self.cells[i].id()
                            )));
                        }
                    }
                }
            }
            self.boundary_into(i, &mut bd);
            for &j in &bd {
                if j >= i || self.values[j] > self.values[i] {
                    return Err(Error::Validation(format!(
                        "face order or monotonicity violated at {}",
                        self.cells[i].id()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Exact 1D squared distance transform (lower envelope of parabolas).
fn edt_1d(f: &[f64], out: &mut [f64], v: &mut Vec<usize>, z: &mut Vec<f64>) {
    let n = f.len();
    v.clear();
    z.clear();
    let first = f.iter().position(|x| x.is_finite());
    let Some(q0) = first else {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    };
    v.push(q0);
    z.push(f64::NEG_INFINITY);
    z.push(f64::INFINITY);
    let mut k = 0;
    for q in q0 + 1..n {
        if !f[q].is_finite() {
            continue;
        }
        let mut s;
        loop {
            let p = v[k];
            s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q - p) as f64);
            // z[0] is -inf, so k never underflows
            if s <= z[k] {
                k -= 1;
            } else {
                break;
            }
        }
        k += 1;
        v.truncate(k);
        v.push(q);
        z.truncate(k);
        z.push(s);
        z.push(f64::INFINITY);
    }
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let d = q as f64 - p as f64;
        *o = d * d + f[p];
    }
}

/// Squared Euclidean distance (in cell units) from every cell to the nearest occupied cell.
fn squared_edt(occupied: &[bool], dims: [usize; 3]) -> Vec<f64> {
    let mut g: Vec<f64> = occupied
        .iter()
        .map(|&o| if o { 0.0 } else { f64::INFINITY })
        .collect();
    let idx = |x: usize, y: usize, z: usize| (z * dims[1] + y) * dims[0] + x;
    let (mut v, mut zb) = (Vec::new(), Vec::new());
    for axis in 0..3 {
        let len = dims[axis];
        let (o1, o2) = match axis {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        let mut line = vec![0.0; len];
        let mut res = vec![0.0; len];
        for b in 0..dims[o2] {
            for a in 0..dims[o1] {
                for (t, l) in line.iter_mut().enumerate() {
                    let mut c = [0; 3];
                    c[axis] = t;
                    c[o1] = a;
                    c[o2] = b;
                    *l = g[idx(c[0], c[1], c[2])];
                }
                edt_1d(&line, &mut res, &mut v, &mut zb);
                for (t, &r) in res.iter().enumerate() {
                    let mut c = [0; 3];
                    c[axis] = t;
                    c[o1] = a;
                    c[o2] = b;
                    g[idx(c[0], c[1], c[2])] = r;
                }
            }
        }
    }
    g
}

/// Voxelizes the cloud and filters the full cubical complex of the grid by the
/// distance transform: top cells carry the distance from their centre to the
/// nearest occupied cell centre, lower cells the minimum over incident top cells.
pub fn build_cubical(cloud: &PointCloud, cell_size: f64, max_scale: f64) -> Result<CubicalComplex> {
    build_cubical_with_cap(cloud, cell_size, max_scale, CUBICAL_DEFAULT_DIM_CAP)
}

pub fn build_cubical_with_cap(
    cloud: &PointCloud,
    cell_size: f64,
    max_scale: f64,
    dim_cap: usize,
) -> Result<CubicalComplex> {
    if !(cell_size > 0.0) || !cell_size.is_finite() {
        return Err(Error::arg(format!(
            "cell_size must be positive, got {cell_size}"
        )));
    }
    if !(max_scale >= 0.0) {
        return Err(Error::arg(format!(
            "max_scale must be nonnegative, got {max_scale}"
        )));
    }
    let (lo, hi) = cloud.bbox();
    let dims_f = [0, 1, 2].map(|a| ((hi[a] - lo[a]) / cell_size).floor() + 3.0);
    if dims_f.iter().any(|&d| d > dim_cap as f64)
        || dims_f.iter().product::<f64>() > MAX_TOP_CELLS as f64
    {
        return Err(Error::Capacity(format!(
            "grid of {:?} cells exceeds the cap ({dim_cap} per axis, {MAX_TOP_CELLS} total); use a larger cell_size",
            dims_f.map(|d| d as u64)
        )));
    }
    let dims = dims_f.map(|d| d as usize);
    let origin = [0, 1, 2].map(|a| lo[a] - cell_size);
    let ntop = dims[0] * dims[1] * dims[2];
    let mut occupied = vec![false; ntop];
    for p in cloud.points() {
        let c = [0, 1, 2]
            .map(|a| (((p[a] - origin[a]) / cell_size).floor() as usize).clamp(1, dims[a] - 2));
        occupied[(c[2] * dims[1] + c[1]) * dims[0] + c[0]] = true;
    }
    let cell_values: Vec<f64> = squared_edt(&occupied, dims)
        .into_iter()
        .map(|d2| d2.sqrt() * cell_size)
        .collect();

    // spread top values to all cells of the doubled grid by separable minima
    let dd = dims.map(|d| 2 * d + 1);
    let lin = |x: usize, y: usize, z: usize| (z * dd[1] + y) * dd[0] + x;
    let mut full = vec![f64::INFINITY; dd[0] * dd[1] * dd[2]];
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                full[lin(2 * x + 1, 2 * y + 1, 2 * z + 1)] =
                    cell_values[(z * dims[1] + y) * dims[0] + x];
            }
        }
    }
    for z in (1..dd[2]).step_by(2) {
        for y in (1..dd[1]).step_by(2) {
            for x in (0..dd[0]).step_by(2) {
                let l = if x > 0 {
                    full[lin(x - 1, y, z)]
                } else {
                    f64::INFINITY
                };
                let r = if x + 1 < dd[0] {
                    full[lin(x + 1, y, z)]
                } else {
                    f64::INFINITY
                };
                full[lin(x, y, z)] = l.min(r);
            }
        }
    }
    for z in (1..dd[2]).step_by(2) {
        for y in (0..dd[1]).step_by(2) {
            for x in 0..dd[0] {
                let l = if y > 0 {
                    full[lin(x, y - 1, z)]
                } else {
                    f64::INFINITY
                };
                let r = if y + 1 < dd[1] {
                    full[lin(x, y + 1, z)]
                } else {
                    f64::INFINITY
                };
                full[lin(x, y, z)] = l.min(r);
            }
        }
    }
    for z in (0..dd[2]).step_by(2) {
        for y in 0..dd[1] {
            for x in 0..dd[0] {
                let l = if z > 0 {
                    full[lin(x, y, z - 1)]
                } else {
                    f64::INFINITY
                };
                let r = if z + 1 < dd[2] {
                    full[lin(x, y, z + 1)]
                } else {
                    f64::INFINITY
                };
                full[lin(x, y, z)] = l.min(r);
            }
        }
    }
    let mut entries = Vec::new();
    for z in 0..dd[2] {
        for y in 0..dd[1] {
            for x in 0..dd[0] {
                let v = full[lin(x, y, z)];
                if v <= max_scale {
                    entries.push((CubicalCell::from_doubled([x, y, z]), v));
                }
            }
        }
    }
    let grid = CubicalGrid {
        origin,
        cell_size,
        dims,
        cell_values,
    };
    let params = json!({
        "cell_size": cell_size,
        "max_scale": if max_scale.is_finite() { json!(max_scale) } else { json!("inf") },
        "dims": dims,
        "points": cloud.len(),
    });
    Ok(CubicalComplex::from_cells(grid, entries, params))
}
