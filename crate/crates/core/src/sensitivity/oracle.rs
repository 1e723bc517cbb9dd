//! Brute-force W∞ reference: threshold search over candidate distances with
//! a transportation-feasibility check solved as a max-flow problem. Only
//! meant for desk-scale supports.

use std::collections::VecDeque;

use super::pmf::DiscretePmf;
use crate::error::{Error, Result};

pub const MAX_ORACLE_SUPPORT: usize = 12;

const FLOW_TOL: f64 = 1e-9;

struct FlowNetwork {
    cap: Vec<Vec<f64>>,
}

impl FlowNetwork {
    fn new(nodes: usize) -> Self {
        Self {
            cap: vec![vec![0.0; nodes]; nodes],
        }
    }

    /// Edmonds-Karp on a dense residual matrix.
    fn max_flow(&mut self, source: usize, sink: usize) -> f64 {
        let n = self.cap.len();
        let mut total = 0.0;
        loop {
            let mut parent = vec![usize::MAX; n];
            parent[source] = source;
            let mut queue = VecDeque::from([source]);
            while let Some(u) = queue.pop_front() {
                for (v, &cap) in self.cap[u].iter().enumerate() {
                    if parent[v] == usize::MAX && cap > FLOW_TOL * 1e-3 {
                        parent[v] = u;
                        queue.push_back(v);
                    }
                }
            }
            if parent[sink] == usize::MAX {
                return total;
            }
            let mut push = f64::INFINITY;
            let mut v = sink;
            while v != source {
                let u = parent[v];
                push = push.min(self.cap[u][v]);
                v = u;
            }
            let mut v = sink;
            while v != source {
                let u = parent[v];
                self.cap[u][v] -= push;
                self.cap[v][u] += push;
                v = u;
            }
            total += push;
        }
    }
}

/// Whether some coupling of `p` and `q` only pairs points within `t`.
fn coupling_within(p: &[(i64, f64)], q: &[(i64, f64)], t: i64) -> bool {
    let (n, m) = (p.len(), q.len());
    let source = n + m;
    let sink = source + 1;
    let mut net = FlowNetwork::new(n + m + 2);
    for (i, &(x, w)) in p.iter().enumerate() {
        net.cap[source][i] = w;
        for (j, &(y, _)) in q.iter().enumerate() {
            if (x - y).abs() <= t {
                net.cap[i][n + j] = f64::INFINITY;
            }
        }
    }
    for (j, &(_, w)) in q.iter().enumerate() {
        net.cap[n + j][sink] = w;
    }
    net.max_flow(source, sink) >= 1.0 - FLOW_TOL
}

/// Exact W∞ by binary search over the pairwise distances.
pub fn w_inf_oracle(p: &DiscretePmf, q: &DiscretePmf) -> Result<f64> {
    if p.len() > MAX_ORACLE_SUPPORT || q.len() > MAX_ORACLE_SUPPORT {
        return Err(Error::Refused(format!(
            "oracle supports at most {MAX_ORACLE_SUPPORT} points per pmf, got {} and {}",
            p.len(),
            q.len()
        )));
    }
    let a: Vec<(i64, f64)> = p.atoms().collect();
    let b: Vec<(i64, f64)> = q.atoms().collect();
    let mut candidates: Vec<i64> = a
        .iter()
        .flat_map(|&(x, _)| b.iter().map(move |&(y, _)| (x - y).abs()))
        .collect();
    candidates.sort_unstable();
    candidates.dedup();
    // The largest candidate is always feasible (complete bipartite graph).
    let (mut lo, mut hi) = (0, candidates.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if coupling_within(&a, &b, candidates[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(candidates[lo] as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_examples() {
        let p0 = DiscretePmf::point(0);
        let p3 = DiscretePmf::point(3);
        assert_eq!(w_inf_oracle(&p0, &p3).unwrap(), 3.0);
        let u = DiscretePmf::uniform(vec![0, 1, 2]).unwrap();
        assert_eq!(w_inf_oracle(&u, &u).unwrap(), 0.0);
        let a = DiscretePmf::new(vec![0, 10], vec![0.5, 0.5]).unwrap();
        let b = DiscretePmf::new(vec![0, 10], vec![0.9, 0.1]).unwrap();
        assert_eq!(w_inf_oracle(&a, &b).unwrap(), 10.0);
        let s0 = DiscretePmf::uniform(vec![0, 1]).unwrap();
        let s1 = DiscretePmf::uniform(vec![1, 2]).unwrap();
        assert_eq!(w_inf_oracle(&s0, &s1).unwrap(), 1.0);
    }

    #[test]
    fn refuses_large_support() {
        let big = DiscretePmf::uniform((0..13).collect()).unwrap();
        assert!(matches!(
            w_inf_oracle(&big, &DiscretePmf::point(0)),
            Err(Error::Refused(_))
        ));
    }
}
