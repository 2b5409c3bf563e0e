use super::*;
use crate::complex::build_rips;
use crate::filtration::{lower_star_assign, FunctionKind, VertexFunction};
use crate::geometry::{Point3, PointCloud};
use crate::persistence::compute_persistence;
use proptest::prelude::*;

fn dgm(points: &[(f64, f64)]) -> PersistenceDiagram {
    PersistenceDiagram::from_points(1, points)
}

/// Enumerates every partial injection of `a` into `b`; unmatched points go to the diagonal.
fn exhaustive(a: &[(f64, f64)], b: &[(f64, f64)], combine: &dyn Fn(&[f64]) -> f64) -> f64 {
    fn rec(
        i: usize,
        a: &[(f64, f64)],
        b: &[(f64, f64)],
        used: &mut Vec<bool>,
        costs: &mut Vec<f64>,
        combine: &dyn Fn(&[f64]) -> f64,
    ) -> f64 {
        if i == a.len() {
            let mut all = costs.clone();
            for (j, &u) in used.iter().enumerate() {
                if !u {
                    all.push(to_diag(b[j]));
                }
            }
            return combine(&all);
        }
        costs.push(to_diag(a[i]));
        let mut best = rec(i + 1, a, b, used, costs, combine);
        costs.pop();
        for j in 0..b.len() {
            if !used[j] {
                used[j] = true;
                costs.push(linf(a[i], b[j]));
                best = best.min(rec(i + 1, a, b, used, costs, combine));
                costs.pop();
                used[j] = false;
            }
        }
        best
    }
    rec(0, a, b, &mut vec![false; b.len()], &mut Vec::new(), combine)
}

fn check_assignment(r: &MatchingResult, n: usize, m: usize) {
    let mut left = vec![0; n];
    let mut right = vec![0; m];
    for &(i, j) in &r.assignment {
        assert!(i.is_some() || j.is_some());
        if let Some(i) = i {
            left[i] += 1;
        }
        if let Some(j) = j {
            right[j] += 1;
        }
    }
    assert!(left.iter().chain(&right).all(|&c| c == 1));
}

#[test]
fn bottleneck_examples() {
    let a = dgm(&[(0.0, 1.0), (0.5, 3.0)]);
    assert_eq!(bottleneck_distance(&a, &a).unwrap().cost, 0.0);
    assert_eq!(
        bottleneck_distance(&dgm(&[(0.0, 2.0)]), &dgm(&[]))
            .unwrap()
            .cost,
        1.0
    );
    let r = bottleneck_distance(&dgm(&[(0.0, 1.0)]), &dgm(&[(0.2, 1.1)])).unwrap();
    assert!((r.cost - 0.2).abs() < 1e-15);
    assert_eq!(r.assignment, vec![(Some(0), Some(0))]);
}

#[test]
fn wasserstein_examples() {
    let a = dgm(&[(0.0, 1.0), (0.5, 3.0)]);
    assert_eq!(wasserstein_distance(&a, &a, 2.0).unwrap().cost, 0.0);
    assert_eq!(
        wasserstein_distance(&dgm(&[(0.0, 2.0)]), &dgm(&[]), 2.0)
            .unwrap()
            .cost,
        1.0
    );
    let r =
        wasserstein_distance(&dgm(&[(0.0, 1.0), (0.0, 2.0)]), &dgm(&[(0.0, 1.0)]), 2.0).unwrap();
    assert!((r.cost - 1.0).abs() < 1e-15);
    check_assignment(&r, 2, 1);
}

#[test]
fn essential_points() {
    let inf = f64::INFINITY;
    let a = dgm(&[(0.0, inf), (0.0, 1.0)]);
    let b = dgm(&[(0.25, inf), (0.0, 1.0)]);
    assert_eq!(bottleneck_distance(&a, &b).unwrap().cost, 0.25);
    assert_eq!(wasserstein_distance(&a, &b, 1.0).unwrap().cost, 0.25);
    let c = dgm(&[(0.0, 1.0)]);
    assert_eq!(bottleneck_distance(&a, &c).unwrap().cost, inf);
    assert_eq!(wasserstein_distance(&a, &c, 2.0).unwrap().cost, inf);
    check_assignment(&wasserstein_distance(&a, &b, 2.0).unwrap(), 2, 2);
}

#[test]
fn argument_errors() {
    let a = dgm(&[(0.0, 1.0)]);
    let b = PersistenceDiagram::from_points(0, &[(0.0, 1.0)]);
    assert!(bottleneck_distance(&a, &b).is_err());
    assert!(wasserstein_distance(&a, &b, 2.0).is_err());
    assert!(wasserstein_distance(&a, &a, 0.5).is_err());
}

#[test]
fn equal_birth_dp_matches_assignment_solver() {
    let mut state = 7u64;
    let mut next = || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    for _ in 0..50 {
        let a: Vec<(f64, f64)> = (0..30).map(|_| (0.0, next())).collect();
        let b: Vec<(f64, f64)> = (0..22).map(|_| (0.0, next() * 1.2)).collect();
        for p in [1.0, 2.0, 3.5] {
            let (dp, pairs) = equal_birth_dp(&a, &b, 0.0, p);
            assert_eq!(pairs.len(), {
                let matched = pairs
                    .iter()
                    .filter(|x| x.0.is_some() && x.1.is_some())
                    .count();
                a.len() + b.len() - matched
            });
            // force the assignment path with a birth perturbation of zero size
            let n = a.len();
            let m = b.len();
            let db: Vec<f64> = b.iter().map(|&q| to_diag(q).powf(p)).collect();
            let cols = hungarian::assign(m, n + m, |j, i| {
                if i < n {
                    linf(b[j], a[i]).powf(p) - to_diag(a[i]).powf(p)
                } else {
                    db[j]
                }
            });
            let mut s: f64 = a.iter().map(|&x| to_diag(x).powf(p)).sum();
            for (j, &i) in cols.iter().enumerate() {
                s += if i < n {
                    linf(b[j], a[i]).powf(p) - to_diag(a[i]).powf(p)
                } else {
                    db[j]
                };
            }
            assert!((dp - s).abs() < 1e-9 * s.max(1.0), "{dp} vs {s}");
        }
    }
}

#[test]
fn cost_only_agrees_with_matching() {
    let a: Vec<(f64, f64)> = (0..60)
        .map(|i| (0.0, 0.05 + (i * 37 % 61) as f64 / 40.0))
        .collect();
    let b: Vec<(f64, f64)> = (0..45)
        .map(|i| (0.0, 0.05 + (i * 17 % 47) as f64 / 30.0))
        .collect();
    let c: Vec<(f64, f64)> = b.iter().map(|&(x, y)| (x + 0.01, y)).collect();
    for (x, y) in [(&a, &b), (&a, &c), (&b, &c)] {
        for p in [1.0, 2.0, 3.0] {
            let full = wasserstein_distance(&dgm(x), &dgm(y), p).unwrap().cost;
            let (fast, t) = wasserstein_cost(&dgm(x), &dgm(y), p).unwrap();
            assert_eq!(t, 0.0);
            assert!(
                (full - fast).abs() <= 1e-12 * full.max(1.0),
                "{full} vs {fast}"
            );
        }
    }
}

#[test]
fn auction_above_cap_is_within_bound() {
    let a: Vec<(f64, f64)> = (0..40)
        .map(|i| (i as f64 * 0.1, i as f64 * 0.1 + 0.05 * (i % 7) as f64))
        .collect();
    let b: Vec<(f64, f64)> = (0..35)
        .map(|i| (i as f64 * 0.11, i as f64 * 0.11 + 0.06 * (i % 5) as f64))
        .collect();
    let exact = wasserstein_distance(&dgm(&a), &dgm(&b), 2.0).unwrap();
    let capped = wasserstein_with_cap(&dgm(&a), &dgm(&b), 2.0, 10).unwrap();
    assert_eq!(exact.relative_error, 0.0);
    assert!(capped.relative_error > 0.0 && capped.relative_error <= AUCTION_RELATIVE_ERROR);
    assert!(capped.cost >= exact.cost - 1e-12);
    assert!(capped.cost <= exact.cost * (1.0 + AUCTION_RELATIVE_ERROR));
    check_assignment(&capped, 40, 35);
    let same = wasserstein_with_cap(&dgm(&a), &dgm(&a), 2.0, 10).unwrap();
    assert_eq!(same.cost, 0.0);
}

fn arb_diagram(max: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec(
        (0.0..2.0f64, 0.0..1.5f64).prop_map(|(b, l)| (b, b + l)),
        0..=max,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn exact_against_enumeration(a in arb_diagram(4), b in arb_diagram(4), p in 1.0..4.0f64) {
        let bn = bottleneck_distance(&dgm(&a), &dgm(&b)).unwrap();
        let expect_b = exhaustive(&a, &b, &|c| c.iter().cloned().fold(0.0, f64::max));
        prop_assert_eq!(bn.cost, expect_b);
        check_assignment(&bn, a.len(), b.len());
        let w = wasserstein_distance(&dgm(&a), &dgm(&b), p).unwrap();
        let expect_w = exhaustive(&a, &b, &|c| c.iter().map(|x| x.powf(p)).sum::<f64>()).powf(1.0 / p);
        prop_assert!((w.cost - expect_w).abs() <= 1e-9 * expect_w.max(1.0));
        check_assignment(&w, a.len(), b.len());
    }

    #[test]
    fn metric_axioms(a in arb_diagram(6), b in arb_diagram(6), c in arb_diagram(6)) {
        let (a, b, c) = (dgm(&a), dgm(&b), dgm(&c));
        type Dist = dyn Fn(&PersistenceDiagram, &PersistenceDiagram) -> f64;
        let fs: [&Dist; 3] = [
            &|x, y| bottleneck_distance(x, y).unwrap().cost,
            &|x, y| wasserstein_distance(x, y, 2.0).unwrap().cost,
            &|x, y| wasserstein_distance(x, y, 1.0).unwrap().cost,
        ];
        for f in fs {
            prop_assert_eq!(f(&a, &a), 0.0);
            let ab = f(&a, &b);
            let ba = f(&b, &a);
            prop_assert!((ab - ba).abs() <= 1e-12 * ab.max(1.0));
            prop_assert!(f(&a, &c) <= ab + f(&b, &c) + 1e-9);
        }
    }

    #[test]
    fn orders_are_monotone(a in arb_diagram(8), b in arb_diagram(8)) {
        let (a, b) = (dgm(&a), dgm(&b));
        let bn = bottleneck_distance(&a, &b).unwrap().cost;
        let mut prev = f64::INFINITY;
        for p in [1.0, 1.5, 2.0, 3.0, 6.0] {
            let w = wasserstein_distance(&a, &b, p).unwrap().cost;
            prop_assert!(w <= prev + 1e-9);
            prop_assert!(w >= bn - 1e-9);
            prev = w;
        }
    }
}

fn stability_case() -> impl Strategy<Value = (Vec<Point3>, Vec<f64>, Vec<f64>)> {
    (5usize..12)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(prop::array::uniform3(0.0..1.0f64), n),
                prop::collection::vec(0.0..1.0f64, n),
                prop::collection::vec(-0.2..0.2f64, n),
            )
        })
        .prop_map(|(p, f, e)| {
            let g = f.iter().zip(&e).map(|(x, y)| x + y).collect();
            (p, f, g)
        })
}

fn check_stability(
    dim: usize,
    pts: Vec<Point3>,
    f: Vec<f64>,
    g: Vec<f64>,
) -> std::result::Result<(), TestCaseError> {
    let k = build_rips(&PointCloud::new(pts, "s").unwrap(), 0.8, 3).unwrap();
    let kf = lower_star_assign(
        &k,
        &VertexFunction::new(f.clone(), FunctionKind::Custom).unwrap(),
    )
    .unwrap();
    let kg = lower_star_assign(
        &k,
        &VertexFunction::new(g.clone(), FunctionKind::Custom).unwrap(),
    )
    .unwrap();
    let df = compute_persistence(&kf, 2).unwrap();
    let dg = compute_persistence(&kg, 2).unwrap();
    let sup = f
        .iter()
        .zip(&g)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let d = bottleneck_distance(&df[dim], &dg[dim]).unwrap().cost;
    prop_assert!(d <= sup + 1e-12, "dim {}: {} > {}", dim, d, sup);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn sublevel_stability_h0((pts, f, g) in stability_case()) { check_stability(0, pts, f, g)?; }

    #[test]
    fn sublevel_stability_h1((pts, f, g) in stability_case()) { check_stability(1, pts, f, g)?; }

    #[test]
    fn sublevel_stability_h2((pts, f, g) in stability_case()) { check_stability(2, pts, f, g)?; }
}
