//! Hopcroft-Karp maximum bipartite matching.

use std::collections::VecDeque;

const NONE: usize = usize::MAX;

/// Size of a maximum matching; `adj(u, &mut out)` lists the right neighbours of left vertex `u`.
pub(crate) fn max_matching(
    left: usize,
    right: usize,
    adj: impl Fn(usize, &mut Vec<usize>),
) -> (usize, Vec<usize>) {
    let lists: Vec<Vec<usize>> = (0..left)
        .map(|u| {
            let mut v = Vec::new();
            adj(u, &mut v);
            v
        })
        .collect();
    let mut match_l = vec![NONE; left];
    let mut match_r = vec![NONE; right];
    let mut dist = vec![0usize; left];
    let mut size = 0;
    loop {
        // layered BFS from free left vertices
        let mut queue = VecDeque::new();
        for u in 0..left {
            if match_l[u] == NONE {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = NONE;
            }
        }
        let mut found = false;
        while let Some(u) = queue.pop_front() {
            for &w in &lists[u] {
                let m = match_r[w];
                if m == NONE {
                    found = true;
                } else if dist[m] == NONE {
                    dist[m] = dist[u] + 1;
                    queue.push_back(m);
                }
            }
        }
        if !found {
            break;
        }
        // iterative DFS along the layers
        let mut next = vec![0usize; left];
        for root in 0..left {
            if match_l[root] != NONE {
                continue;
            }
            let mut stack = vec![root];
            let mut augmented = false;
            while let Some(&u) = stack.last() {
                if next[u] == lists[u].len() {
                    dist[u] = NONE;
                    stack.pop();
                    continue;
                }
                let w = lists[u][next[u]];
                next[u] += 1;
                let m = match_r[w];
                if m == NONE {
                    // flip the path recorded on the stack
                    let mut w = w;
                    for &x in stack.iter().rev() {
                        let prev = match_l[x];
                        match_l[x] = w;
                        match_r[w] = x;
                        w = prev;
                    }
                    augmented = true;
                    break;
                } else if dist[m] != NONE && dist[m] == dist[u] + 1 {
                    stack.push(m);
                }
            }
            if augmented {
                size += 1;
            }
        }
    }
    (size, match_l)
}
