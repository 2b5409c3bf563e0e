//! Forward auction with epsilon scaling for large Wasserstein problems.
//!
//! Bidders are the left points plus diagonal copies of the right points; items
//! are the right points plus diagonal copies of the left points. A point may go
//! to its own diagonal copy, and diagonal copies match each other for free.
//! Bids for right points use a kd-tree that keeps the smallest price per subtree.

use std::collections::BTreeSet;

use super::{linf, to_diag, Pairs};

const LEAF: usize = 8;
const NIL: u32 = u32::MAX;

struct Node {
    lo: (f64, f64),
    hi: (f64, f64),
    start: u32,
    end: u32,
    left: u32,
    right: u32,
    parent: u32,
    min_w: f64,
}

/// Static 2D kd-tree over points with mutable weights, answering
/// "two smallest `linf(q, x)^p + w(x)`".
struct PriceTree {
    pts: Vec<(f64, f64)>,
    orig: Vec<u32>,
    w: Vec<f64>,
    pos: Vec<u32>,
    leaf: Vec<u32>,
    nodes: Vec<Node>,
}

impl PriceTree {
    fn new(points: &[(f64, f64)]) -> Self {
        let n = points.len();
        let mut t = PriceTree {
            pts: points.to_vec(),
            orig: (0..n as u32).collect(),
            w: vec![0.0; n],
            pos: vec![0; n],
            leaf: vec![NIL; n],
            nodes: Vec::with_capacity(2 * n / LEAF + 2),
        };
        if n > 0 {
            t.build(0, n, NIL);
        }
        for (k, &o) in t.orig.iter().enumerate() {
            t.pos[o as usize] = k as u32;
        }
        t
    }

    fn build(&mut self, start: usize, end: usize, parent: u32) -> u32 {
        let mut lo = (f64::INFINITY, f64::INFINITY);
        let mut hi = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &(x, y) in &self.pts[start..end] {
            lo = (lo.0.min(x), lo.1.min(y));
            hi = (hi.0.max(x), hi.1.max(y));
        }
        let id = self.nodes.len() as u32;
        self.nodes.push(Node {
            lo,
            hi,
            start: start as u32,
            end: end as u32,
            left: NIL,
            right: NIL,
            parent,
            min_w: 0.0,
        });
        if end - start <= LEAF {
            for k in start..end {
                self.leaf[self.orig[k] as usize] = id;
            }
            return id;
        }
        let mid = (start + end) / 2;
        let by_x = hi.0 - lo.0 >= hi.1 - lo.1;
        let mut idx: Vec<usize> = (start..end).collect();
        let key = |p: (f64, f64)| if by_x { p.0 } else { p.1 };
        idx.select_nth_unstable_by(mid - start, |&i, &j| {
            key(self.pts[i]).total_cmp(&key(self.pts[j]))
        });
        let pts: Vec<_> = idx.iter().map(|&i| self.pts[i]).collect();
        let orig: Vec<_> = idx.iter().map(|&i| self.orig[i]).collect();
        self.pts[start..end].copy_from_slice(&pts);
        self.orig[start..end].copy_from_slice(&orig);
        let l = self.build(start, mid, id);
        let r = self.build(mid, end, id);
        self.nodes[id as usize].left = l;
        self.nodes[id as usize].right = r;
        id
    }

    fn set(&mut self, item: usize, w: f64) {
        self.w[self.pos[item] as usize] = w;
        let mut id = self.leaf[item];
        let nd = &self.nodes[id as usize];
        self.nodes[id as usize].min_w = self.w[nd.start as usize..nd.end as usize]
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        loop {
            id = self.nodes[id as usize].parent;
            if id == NIL {
                break;
            }
            let nd = &self.nodes[id as usize];
            let m = self.nodes[nd.left as usize]
                .min_w
                .min(self.nodes[nd.right as usize].min_w);
            self.nodes[id as usize].min_w = m;
        }
    }

    fn bound(&self, id: u32, q: (f64, f64), pw: &impl Fn(f64) -> f64) -> f64 {
        let nd = &self.nodes[id as usize];
        let dx = (nd.lo.0 - q.0).max(q.0 - nd.hi.0).max(0.0);
        let dy = (nd.lo.1 - q.1).max(q.1 - nd.hi.1).max(0.0);
        pw(dx.max(dy)) + nd.min_w
    }

    /// Best `(value, item)` and second-best value.
    fn two_best(
        &self,
        q: (f64, f64),
        pw: &impl Fn(f64) -> f64,
        stack: &mut Vec<u32>,
    ) -> ((f64, usize), f64) {
        let mut best = (f64::INFINITY, usize::MAX);
        let mut second = f64::INFINITY;
        stack.clear();
        stack.push(0);
        while let Some(id) = stack.pop() {
            if self.bound(id, q, pw) >= second {
                continue;
            }
            let nd = &self.nodes[id as usize];
            if nd.left == NIL {
                for k in nd.start as usize..nd.end as usize {
                    let v = pw(linf(q, self.pts[k])) + self.w[k];
                    if v < best.0 {
                        second = best.0;
                        best = (v, self.orig[k] as usize);
                    } else if v < second {
                        second = v;
                    }
                }
                continue;
            }
            let (l, r) = (nd.left, nd.right);
            let (bl, br) = (self.bound(l, q, pw), self.bound(r, q, pw));
            // push the nearer child last so it is explored first
            if bl <= br {
                stack.push(r);
                stack.push(l);
            } else {
                stack.push(l);
                stack.push(r);
            }
        }
        (best, second)
    }
}

/// Non-negative prices ordered by their bit patterns.
fn key(price: f64) -> u64 {
    price.to_bits()
}

struct State<'a, F: Fn(f64) -> f64> {
    a: &'a [(f64, f64)],
    b: &'a [(f64, f64)],
    pw: F,
    diag_a: Vec<f64>,
    diag_b: Vec<f64>,
    // items: 0..nb right points, nb..n diagonal copies of left points
    price: Vec<f64>,
    owner: Vec<usize>,
    // bidders: 0..na left points, na..n diagonal copies of right points
    held: Vec<usize>,
    tree: PriceTree,
    diag_prices: BTreeSet<(u64, usize)>,
    stack: Vec<u32>,
}

impl<F: Fn(f64) -> f64> State<'_, F> {
    fn cost(&self, bidder: usize, item: usize) -> f64 {
        let (na, nb) = (self.a.len(), self.b.len());
        match (bidder < na, item < nb) {
            (true, true) => (self.pw)(linf(self.a[bidder], self.b[item])),
            (true, false) => self.diag_a[bidder],
            (false, true) => self.diag_b[bidder - na],
            (false, false) => 0.0,
        }
    }

    /// Cheapest `cost + price` item of a bidder, and the second-cheapest value.
    fn search(&mut self, u: usize) -> ((f64, usize), f64) {
        let (na, nb) = (self.a.len(), self.b.len());
        if u < na {
            let (bt, s) = self.tree.two_best(self.a[u], &self.pw, &mut self.stack);
            let own = (self.diag_a[u] + self.price[nb + u], nb + u);
            if own.0 < bt.0 {
                (own, bt.0)
            } else {
                (bt, s.min(own.0))
            }
        } else {
            let j = u - na;
            let mut it = self.diag_prices.iter();
            let d1 = it.next().map(|&(_, i)| (self.price[i], i)).unwrap();
            let d2 = it.next().map_or(f64::INFINITY, |&(_, i)| self.price[i]);
            let own = (self.diag_b[j] + self.price[j], j);
            if own.0 < d1.0 {
                (own, d1.0)
            } else {
                (d1, d2.min(own.0))
            }
        }
    }

    fn set_price(&mut self, item: usize, new_price: f64) {
        if item < self.b.len() {
            self.tree.set(item, new_price);
        } else {
            self.diag_prices.remove(&(key(self.price[item]), item));
            self.diag_prices.insert((key(new_price), item));
        }
        self.price[item] = new_price;
    }
}

/// Matching of `a` against `b` (both non-empty) whose `sum cost^p` is within
/// `rel` of optimal after taking the p-th root.
///
/// Returns the sum, a lower bound on the optimal sum, and the matching.
pub(crate) fn auction(a: &[(f64, f64)], b: &[(f64, f64)], p: f64, rel: f64) -> (f64, f64, Pairs) {
    let (na, nb) = (a.len(), b.len());
    let n = na + nb;
    let pw = move |x: f64| if p == 2.0 { x * x } else { x.powf(p) };
    let mut st = State {
        a,
        b,
        pw,
        diag_a: a.iter().map(|&x| pw(to_diag(x))).collect(),
        diag_b: b.iter().map(|&x| pw(to_diag(x))).collect(),
        price: vec![0.0; n],
        owner: vec![usize::MAX; n],
        held: vec![usize::MAX; n],
        tree: PriceTree::new(b),
        diag_prices: (nb..n).map(|i| (key(0.0), i)).collect(),
        stack: Vec::new(),
    };

    let (mut lo, mut hi) = (
        (f64::INFINITY, f64::INFINITY),
        (f64::NEG_INFINITY, f64::NEG_INFINITY),
    );
    for &(x, y) in a.iter().chain(b) {
        lo = (lo.0.min(x), lo.1.min(y));
        hi = (hi.0.max(x), hi.1.max(y));
    }
    let max_cost = pw((hi.0 - lo.0).max(hi.1 - lo.1)).max(1e-300);
    let mut eps = max_cost / 4.0;
    let mut queue: Vec<usize> = (0..n).rev().collect();
    loop {
        while let Some(u) = queue.pop() {
            let ((best_v, item), second) = st.search(u);
            let second = if second.is_finite() {
                second
            } else {
                best_v + max_cost
            };
            st.set_price(item, st.price[item] + (second - best_v) + eps);
            let prev = st.owner[item];
            if prev != usize::MAX {
                st.held[prev] = usize::MAX;
                queue.push(prev);
            }
            st.owner[item] = u;
            st.held[u] = item;
        }
        // dual bound: sum over bidders of their cheapest cost + price, less all prices
        let mut sum = 0.0;
        let mut lower = -st.price.iter().sum::<f64>();
        for u in 0..n {
            sum += st.cost(u, st.held[u]);
            lower += st.search(u).0 .0;
        }
        let lower = lower.clamp(0.0, sum);
        let done = sum == 0.0
            || (lower > 0.0 && (sum / lower).powf(1.0 / p) - 1.0 <= rel)
            || eps <= max_cost * 1e-15;
        if done {
            let mut pairs = Pairs::with_capacity(n);
            for (u, &it) in st.held.iter().enumerate().take(na) {
                pairs.push((Some(u), (it < nb).then_some(it)));
            }
            for j in 0..nb {
                if st.owner[j] >= na {
                    pairs.push((None, Some(j)));
                }
            }
            return (sum, lower, pairs);
        }
        eps /= 5.0;
        st.owner.iter_mut().for_each(|o| *o = usize::MAX);
        st.held.iter_mut().for_each(|h| *h = usize::MAX);
        queue.extend((0..n).rev());
    }
}
