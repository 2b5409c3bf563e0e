//! Bottleneck and Wasserstein distances between persistence diagrams.
//!
//! The ground metric is L-infinity; a point `(b, d)` is matched to the
//! diagonal at cost `(d - b) / 2`. Essential points are matched only among
//! themselves by sorted birth, so differing essential counts give infinity.

mod auction;
mod bipartite;
mod hungarian;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::persistence::PersistenceDiagram;

/// Largest smaller-side diagram solved exactly by the assignment solver.
/// Above it an auction solver gives a value within [`AUCTION_RELATIVE_ERROR`].
pub const WASSERSTEIN_SIZE_CAP: usize = 400;
/// Relative error allowed of the auction solver.
pub const AUCTION_RELATIVE_ERROR: f64 = 1e-3;
/// Largest `n * m` point-pair count accepted by the bottleneck solver.
pub const BOTTLENECK_PAIR_CAP: usize = 25_000_000;
/// Largest number of cells in the equal-birth dynamic programme.
const DP_CELL_CAP: usize = 60_000_000;

/// A perfect matching between two diagrams, with `None` standing for the diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingResult {
    pub cost: f64,
    /// `(left pair index, right pair index)`, indices into `pairs` of each diagram.
    pub assignment: Vec<(Option<usize>, Option<usize>)>,
    /// Bound on the relative error of `cost`; 0 for an exact solve.
    pub relative_error: f64,
}

fn linf(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).abs().max((a.1 - b.1).abs())
}

fn to_diag(a: (f64, f64)) -> f64 {
    (a.1 - a.0) / 2.0
}

struct Split {
    finite: Vec<(f64, f64)>,
    finite_idx: Vec<usize>,
    essential: Vec<(f64, usize)>,
    /// Zero-persistence points: on the diagonal, matched there at no cost.
    on_diagonal: Vec<usize>,
}

fn split(d: &PersistenceDiagram) -> Split {
    let mut s = Split {
        finite: Vec::new(),
        finite_idx: Vec::new(),
        essential: Vec::new(),
        on_diagonal: Vec::new(),
    };
    for (i, p) in d.pairs.iter().enumerate() {
        if p.death == p.birth {
            s.on_diagonal.push(i);
        } else if p.death.is_finite() {
            s.finite.push((p.birth, p.death));
            s.finite_idx.push(i);
        } else {
            s.essential.push((p.birth, i));
        }
    }
    s.essential
        .sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    s
}

fn check_dims(a: &PersistenceDiagram, b: &PersistenceDiagram) -> Result<()> {
    if a.dim != b.dim {
        return Err(Error::arg(format!(
            "cannot compare diagrams of dimensions {} and {}",
            a.dim, b.dim
        )));
    }
    Ok(())
}

/// Sorted essential matching: per-pair costs, or `None` if the counts differ.
/// Diagonal points are appended to `out` as well.
fn essential_matching(
    a: &Split,
    b: &Split,
    out: &mut Vec<(Option<usize>, Option<usize>)>,
) -> Option<Vec<f64>> {
    out.extend(a.on_diagonal.iter().map(|&i| (Some(i), None)));
    out.extend(b.on_diagonal.iter().map(|&j| (None, Some(j))));
    let n = a.essential.len().max(b.essential.len());
    for k in 0..n {
        out.push((
            a.essential.get(k).map(|e| e.1),
            b.essential.get(k).map(|e| e.1),
        ));
    }
    if a.essential.len() != b.essential.len() {
        return None;
    }
    Some(
        a.essential
            .iter()
            .zip(&b.essential)
            .map(|(x, y)| (x.0 - y.0).abs())
            .collect(),
    )
}

/// Bottleneck distance, exact: binary search over candidate costs with a
/// perfect-matching feasibility test. Finite parts with more than
/// [`BOTTLENECK_PAIR_CAP`] point pairs are a capacity error.
pub fn bottleneck_distance(
    d1: &PersistenceDiagram,
    d2: &PersistenceDiagram,
) -> Result<MatchingResult> {
    check_dims(d1, d2)?;
    let (a, b) = (split(d1), split(d2));
    if a.finite.len().saturating_mul(b.finite.len()) > BOTTLENECK_PAIR_CAP {
        return Err(Error::Capacity(format!(
            "bottleneck distance between {} and {} finite points exceeds the {} pair cap",
            a.finite.len(),
            b.finite.len(),
            BOTTLENECK_PAIR_CAP
        )));
    }
    let mut assignment = Vec::new();
    let ess = essential_matching(&a, &b, &mut assignment);
    let (cost, pairs) = bottleneck_finite(&a.finite, &b.finite);
    for (i, j) in pairs {
        assignment.push((i.map(|i| a.finite_idx[i]), j.map(|j| b.finite_idx[j])));
    }
    let cost = match ess {
        None => f64::INFINITY,
        Some(e) => e.into_iter().fold(cost, f64::max),
    };
    Ok(MatchingResult {
        cost,
        assignment,
        relative_error: 0.0,
    })
}

type Pairs = Vec<(Option<usize>, Option<usize>)>;

fn bottleneck_finite(a: &[(f64, f64)], b: &[(f64, f64)]) -> (f64, Pairs) {
    let (n, m) = (a.len(), b.len());
    let mut cand: Vec<f64> = Vec::with_capacity(n * m + n + m + 1);
    cand.push(0.0);
    cand.extend(a.iter().map(|&p| to_diag(p)));
    cand.extend(b.iter().map(|&p| to_diag(p)));
    for &p in a {
        for &q in b {
            cand.push(linf(p, q));
        }
    }
    cand.sort_unstable_by(f64::total_cmp);
    cand.dedup();
    // left: a points then diagonal copies of b; right: b points then diagonal copies of a
    let feasible = |delta: f64| {
        let (size, m_l) = bipartite::max_matching(n + m, m + n, |u, out| {
            if u < n {
                for (j, &q) in b.iter().enumerate() {
                    if linf(a[u], q) <= delta {
                        out.push(j);
                    }
                }
                if to_diag(a[u]) <= delta {
                    out.push(m + u);
                }
            } else {
                let j = u - n;
                if to_diag(b[j]) <= delta {
                    out.push(j);
                }
                out.extend(m..m + n);
            }
        });
        (size == n + m, m_l)
    };
    let (mut lo, mut hi) = (0, cand.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if feasible(cand[mid]).0 {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let (_, m_l) = feasible(cand[lo]);
    let mut pairs = Vec::with_capacity(n + m);
    for (i, &w) in m_l.iter().enumerate().take(n) {
        pairs.push((Some(i), if w < m { Some(w) } else { None }));
    }
    for (j, &w) in m_l.iter().enumerate().skip(n) {
        if w == j - n {
            pairs.push((None, Some(j - n)));
        }
    }
    (cand[lo], pairs)
}

/// p-Wasserstein distance for `p >= 1`.
pub fn wasserstein_distance(
    d1: &PersistenceDiagram,
    d2: &PersistenceDiagram,
    p: f64,
) -> Result<MatchingResult> {
    wasserstein_with_cap(d1, d2, p, WASSERSTEIN_SIZE_CAP)
}

/// As [`wasserstein_distance`] with an explicit cap on the smaller finite part
/// for the exact solver.
pub fn wasserstein_with_cap(
    d1: &PersistenceDiagram,
    d2: &PersistenceDiagram,
    p: f64,
    cap: usize,
) -> Result<MatchingResult> {
    check_dims(d1, d2)?;
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::arg(format!(
            "Wasserstein order must be a finite p >= 1, got {p}"
        )));
    }
    let (a, b) = (split(d1), split(d2));
    let mut assignment = Vec::new();
    let ess = essential_matching(&a, &b, &mut assignment);
    let (sum, lower, pairs) = wasserstein_finite(&a.finite, &b.finite, p, cap);
    for (i, j) in pairs {
        assignment.push((i.map(|i| a.finite_idx[i]), j.map(|j| b.finite_idx[j])));
    }
    let (cost, relative_error) = match ess {
        None => (f64::INFINITY, 0.0),
        Some(e) => {
            let e: f64 = e.iter().map(|c| c.powf(p)).sum();
            (
                (sum + e).powf(1.0 / p),
                relative_bound(sum + e, lower + e, p),
            )
        }
    };
    Ok(MatchingResult {
        cost,
        assignment,
        relative_error,
    })
}

/// Relative error of `sum^(1/p)` given a lower bound on the optimal sum.
fn relative_bound(sum: f64, lower: f64, p: f64) -> f64 {
    if sum <= lower {
        0.0
    } else if lower <= 0.0 {
        f64::INFINITY
    } else {
        (sum / lower).powf(1.0 / p) - 1.0
    }
}

/// W_p value without the matching, with the bound on its relative error.
/// Diagrams whose points share one birth use a linear-memory dynamic
/// programme of any size.
pub fn wasserstein_cost(
    d1: &PersistenceDiagram,
    d2: &PersistenceDiagram,
    p: f64,
) -> Result<(f64, f64)> {
    check_dims(d1, d2)?;
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::arg(format!(
            "Wasserstein order must be a finite p >= 1, got {p}"
        )));
    }
    let (a, b) = (split(d1), split(d2));
    if a.essential.len() != b.essential.len() {
        return Ok((f64::INFINITY, 0.0));
    }
    let ess: f64 = a
        .essential
        .iter()
        .zip(&b.essential)
        .map(|(x, y)| (x.0 - y.0).abs().powf(p))
        .sum();
    let (sum, lower) = match (
        a.finite.is_empty() || b.finite.is_empty(),
        common_birth(&a.finite, &b.finite),
    ) {
        (false, Some(b0)) => {
            let s = equal_birth_cost(&a.finite, &b.finite, b0, p);
            (s, s)
        }
        _ => {
            let (s, l, _) = wasserstein_finite(&a.finite, &b.finite, p, WASSERSTEIN_SIZE_CAP);
            (s, l)
        }
    };
    Ok((
        (sum + ess).powf(1.0 / p),
        relative_bound(sum + ess, lower + ess, p),
    ))
}

/// Cost of [`equal_birth_dp`] with two rolling rows.
fn equal_birth_cost(a: &[(f64, f64)], b: &[(f64, f64)], b0: f64, p: f64) -> f64 {
    let mut da: Vec<f64> = a.iter().map(|x| x.1).collect();
    let mut db: Vec<f64> = b.iter().map(|x| x.1).collect();
    da.sort_by(f64::total_cmp);
    db.sort_by(f64::total_cmp);
    let pw = |x: f64| if p == 2.0 { x * x } else { x.powf(p) };
    let diag_b: Vec<f64> = db.iter().map(|&d| pw((d - b0) / 2.0)).collect();
    let mut prev = vec![0.0f64; db.len() + 1];
    for j in 1..=db.len() {
        prev[j] = prev[j - 1] + diag_b[j - 1];
    }
    let mut cur = vec![0.0f64; db.len() + 1];
    for &x in &da {
        let dx = pw((x - b0) / 2.0);
        cur[0] = prev[0] + dx;
        for j in 1..=db.len() {
            let m = prev[j - 1] + pw((x - db[j - 1]).abs());
            cur[j] = m.min(prev[j] + dx).min(cur[j - 1] + diag_b[j - 1]);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[db.len()]
}

/// Sum of `cost^p` over a matching of finite points, a lower bound on the
/// optimal sum (equal to it when solved exactly), and the matching.
fn wasserstein_finite(a: &[(f64, f64)], b: &[(f64, f64)], p: f64, cap: usize) -> (f64, f64, Pairs) {
    if a.is_empty() || b.is_empty() {
        let mut pairs: Pairs = (0..a.len()).map(|i| (Some(i), None)).collect();
        pairs.extend((0..b.len()).map(|j| (None, Some(j))));
        let s = a.iter().chain(b).map(|&x| to_diag(x).powf(p)).sum();
        return (s, s, pairs);
    }
    if let Some(b0) = common_birth(a, b) {
        if a.len() * b.len() <= DP_CELL_CAP {
            let (s, pairs) = equal_birth_dp(a, b, b0, p);
            return (s, s, pairs);
        }
    }
    if a.len() > b.len() {
        let (s, l, pairs) = wasserstein_finite(b, a, p, cap);
        return (s, l, pairs.into_iter().map(|(x, y)| (y, x)).collect());
    }
    if a.len() > cap {
        if let Some(pairs) = identical(a, b) {
            return (0.0, 0.0, pairs);
        }
        return auction::auction(a, b, p, AUCTION_RELATIVE_ERROR);
    }
    // a is the smaller side
    let (n, m) = (a.len(), b.len());
    let db: Vec<f64> = b.iter().map(|&q| to_diag(q).powf(p)).collect();
    // columns: b points, then n diagonal slots; unmatched b points go to the diagonal
    let cols = hungarian::assign(n, m + n, |i, j| {
        if j < m {
            linf(a[i], b[j]).powf(p) - db[j]
        } else {
            to_diag(a[i]).powf(p)
        }
    });
    // total from the matched costs directly, avoiding cancellation in the reduced costs
    let mut sum = 0.0;
    let mut pairs = Pairs::with_capacity(n + m);
    let mut b_used = vec![false; m];
    for (i, &j) in cols.iter().enumerate() {
        if j < m {
            sum += linf(a[i], b[j]).powf(p);
            b_used[j] = true;
            pairs.push((Some(i), Some(j)));
        } else {
            sum += to_diag(a[i]).powf(p);
            pairs.push((Some(i), None));
        }
    }
    for (j, used) in b_used.into_iter().enumerate() {
        if !used {
            sum += db[j];
            pairs.push((None, Some(j)));
        }
    }
    (sum, sum, pairs)
}

/// Point-for-point matching when both sides hold the same multiset of points.
fn identical(a: &[(f64, f64)], b: &[(f64, f64)]) -> Option<Pairs> {
    if a.len() != b.len() {
        return None;
    }
    let order = |x: &[(f64, f64)]| {
        let mut idx: Vec<usize> = (0..x.len()).collect();
        idx.sort_by(|&i, &j| x[i].0.total_cmp(&x[j].0).then(x[i].1.total_cmp(&x[j].1)));
        idx
    };
    let (ia, ib) = (order(a), order(b));
    ia.iter().zip(&ib).all(|(&i, &j)| a[i] == b[j]).then(|| {
        ia.into_iter()
            .zip(ib)
            .map(|(i, j)| (Some(i), Some(j)))
            .collect()
    })
}

fn common_birth(a: &[(f64, f64)], b: &[(f64, f64)]) -> Option<f64> {
    let b0 = a.iter().chain(b).next()?.0;
    a.iter().chain(b).all(|x| x.0 == b0).then_some(b0)
}

/// Exact optimum when every point has the same birth: the problem becomes 1D
/// in the deaths, where an optimal matching never crosses.
fn equal_birth_dp(a: &[(f64, f64)], b: &[(f64, f64)], b0: f64, p: f64) -> (f64, Pairs) {
    let mut ia: Vec<usize> = (0..a.len()).collect();
    let mut ib: Vec<usize> = (0..b.len()).collect();
    ia.sort_by(|&i, &j| a[i].1.total_cmp(&a[j].1));
    ib.sort_by(|&i, &j| b[i].1.total_cmp(&b[j].1));
    let (n, m) = (a.len(), b.len());
    let w = m + 1;
    let diag = |d: f64| ((d - b0) / 2.0).powf(p);
    let mut cost = vec![0.0f64; (n + 1) * w];
    // 0 = match, 1 = a to diagonal, 2 = b to diagonal
    let mut step = vec![0u8; (n + 1) * w];
    for i in 0..=n {
        for j in 0..=m {
            if i == 0 && j == 0 {
                continue;
            }
            let mut best = f64::INFINITY;
            let mut how = 0;
            if i > 0 && j > 0 {
                best = cost[(i - 1) * w + j - 1] + (a[ia[i - 1]].1 - b[ib[j - 1]].1).abs().powf(p);
            }
            if i > 0 {
                let c = cost[(i - 1) * w + j] + diag(a[ia[i - 1]].1);
                if c < best {
                    best = c;
                    how = 1;
                }
            }
            if j > 0 {
                let c = cost[i * w + j - 1] + diag(b[ib[j - 1]].1);
                if c < best {
                    best = c;
                    how = 2;
                }
            }
            cost[i * w + j] = best;
            step[i * w + j] = how;
        }
    }
    let mut pairs = Pairs::new();
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        match step[i * w + j] {
            0 => {
                pairs.push((Some(ia[i - 1]), Some(ib[j - 1])));
                i -= 1;
                j -= 1;
            }
            1 => {
                pairs.push((Some(ia[i - 1]), None));
                i -= 1;
            }
            _ => {
                pairs.push((None, Some(ib[j - 1])));
                j -= 1;
            }
        }
    }
    pairs.reverse();
    (cost[n * w + m], pairs)
}

#[cfg(test)]
mod tests;
