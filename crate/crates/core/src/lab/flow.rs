//! Max-flow / min-cut on undirected capacitated graphs.

use std::collections::VecDeque;

/// Undirected arc list over nodes `0..nodes`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Network {
    pub nodes: usize,
    pub arcs: Vec<(u32, u32, f64)>,
}

impl Network {
    pub fn new(nodes: usize) -> Self {
        Self {
            nodes,
            arcs: Vec::new(),
        }
    }

    pub fn add(&mut self, u: usize, v: usize, cap: f64) {
        debug_assert!(u < self.nodes && v < self.nodes && cap >= 0.0);
        self.arcs.push((u as u32, v as u32, cap));
    }

    /// Capacity of the arcs with exactly one end in the source side.
    pub fn cut_value(&self, source_side: &[bool]) -> f64 {
        self.arcs
            .iter()
            .filter(|(u, v, _)| source_side[*u as usize] != source_side[*v as usize])
            .map(|a| a.2)
            .sum()
    }

    pub fn total_capacity(&self) -> f64 {
        self.arcs.iter().map(|a| a.2).sum()
    }
}

/// Residual graph in compressed adjacency form; every undirected arc becomes
/// a pair of mutually reverse directed arcs each holding the full capacity.
struct Residual {
    start: Vec<usize>,
    to: Vec<u32>,
    rev: Vec<u32>,
    cap: Vec<f64>,
}

impl Residual {
    fn new(net: &Network) -> Self {
        let n = net.nodes;
        let mut deg = vec![0usize; n + 1];
        for &(u, v, _) in &net.arcs {
            deg[u as usize] += 1;
            deg[v as usize] += 1;
        }
        let mut start = vec![0usize; n + 1];
        for i in 0..n {
            start[i + 1] = start[i] + deg[i];
        }
        let m = start[n];
        let mut fill = start.clone();
        let mut to = vec![0u32; m];
        let mut rev = vec![0u32; m];
        let mut cap = vec![0.0; m];
        for &(u, v, c) in &net.arcs {
            let (u, v) = (u as usize, v as usize);
            let a = fill[u];
            let b = fill[v];
            fill[u] += 1;
            fill[v] += 1;
            to[a] = v as u32;
            to[b] = u as u32;
            rev[a] = b as u32;
            rev[b] = a as u32;
            cap[a] = c;
            cap[b] = c;
        }
        Self { start, to, rev, cap }
    }

    fn arcs(&self, v: usize) -> std::ops::Range<usize> {
        self.start[v]..self.start[v + 1]
    }

    /// Nodes from which `t` is reachable in the residual graph.
    fn reaches(&self, t: usize, eps: f64) -> Vec<bool> {
        let n = self.start.len() - 1;
        let mut seen = vec![false; n];
        let mut q = VecDeque::from([t]);
        seen[t] = true;
        while let Some(w) = q.pop_front() {
            for a in self.arcs(w) {
                let v = self.to[a] as usize;
                if !seen[v] && self.cap[self.rev[a] as usize] > eps {
                    seen[v] = true;
                    q.push_back(v);
                }
            }
        }
        seen
    }

    /// Nodes reachable from `s` in the residual graph.
    fn reached_from(&self, s: usize, eps: f64) -> Vec<bool> {
        let n = self.start.len() - 1;
        let mut seen = vec![false; n];
        let mut q = VecDeque::from([s]);
        seen[s] = true;
        while let Some(v) = q.pop_front() {
            for a in self.arcs(v) {
                let w = self.to[a] as usize;
                if !seen[w] && self.cap[a] > eps {
                    seen[w] = true;
                    q.push_back(w);
                }
            }
        }
        seen
    }
}

/// Max-flow value and a minimum cut (`true` = source side).
#[derive(Clone, Debug, PartialEq)]
pub struct FlowSolution {
    pub flow: f64,
    pub source_side: Vec<bool>,
}

fn eps_for(net: &Network) -> f64 {
    let max = net.arcs.iter().map(|a| a.2).fold(0.0, f64::max);
    1e-13 * max.max(f64::MIN_POSITIVE)
}

/// FIFO push-relabel with the gap heuristic and periodic global relabelling.
/// Only the first phase runs: the flow into `t` is then maximum and the nodes
/// that cannot reach `t` form a minimum cut.
pub fn push_relabel(net: &Network, s: usize, t: usize) -> FlowSolution {
    let n = net.nodes;
    let eps = eps_for(net);
    let mut g = Residual::new(net);
    let mut height = vec![0usize; n];
    let mut excess = vec![0.0f64; n];
    let mut current: Vec<usize> = (0..n).map(|v| g.start[v]).collect();
    let mut count = vec![0usize; n + 1];
    let mut active = VecDeque::new();
    let mut in_queue = vec![false; n];

    let global_relabel = |g: &Residual, height: &mut Vec<usize>, count: &mut Vec<usize>| {
        height.iter_mut().for_each(|h| *h = n);
        count.iter_mut().for_each(|c| *c = 0);
        height[t] = 0;
        let mut q = VecDeque::from([t]);
        while let Some(w) = q.pop_front() {
            for a in g.arcs(w) {
                let v = g.to[a] as usize;
                if height[v] == n && v != t && g.cap[g.rev[a] as usize] > eps {
                    height[v] = height[w] + 1;
                    q.push_back(v);
                }
            }
        }
        height[s] = n;
        for &h in height.iter() {
            if h < n {
                count[h] += 1;
            }
        }
    };

    global_relabel(&g, &mut height, &mut count);
    for a in g.arcs(s) {
        let c = g.cap[a];
        if c > 0.0 {
            let v = g.to[a] as usize;
            g.cap[a] = 0.0;
            g.cap[g.rev[a] as usize] += c;
            excess[v] += c;
            excess[s] -= c;
            if v != t && !in_queue[v] && height[v] < n {
                in_queue[v] = true;
                active.push_back(v);
            }
        }
    }

    let relabel_period = n.max(16);
    let mut work = 0usize;
    while let Some(v) = active.pop_front() {
        in_queue[v] = false;
        if height[v] >= n {
            continue;
        }
        // Discharge.
        while excess[v] > eps && height[v] < n {
            let end = g.start[v + 1];
            let mut a = current[v];
            while a < end {
                let w = g.to[a] as usize;
                if g.cap[a] > eps && height[v] == height[w] + 1 {
                    let d = excess[v].min(g.cap[a]);
                    g.cap[a] -= d;
                    g.cap[g.rev[a] as usize] += d;
                    excess[v] -= d;
                    excess[w] += d;
                    if w != s && w != t && !in_queue[w] && height[w] < n {
                        in_queue[w] = true;
                        active.push_back(w);
                    }
                    if excess[v] <= eps {
                        break;
                    }
                }
                a += 1;
            }
            current[v] = a.min(end);
            if excess[v] <= eps {
                break;
            }
            // Relabel.
            let old = height[v];
            let mut best = usize::MAX;
            for a in g.arcs(v) {
                if g.cap[a] > eps {
                    best = best.min(height[g.to[a] as usize] + 1);
                }
            }
            let new = best.min(n);
            count[old] -= 1;
            height[v] = new;
            if new < n {
                count[new] += 1;
            }
            current[v] = g.start[v];
            work += 1;
            if count[old] == 0 && old < n {
                // Gap: nothing left at `old`, so nothing above it reaches t.
                for h in height.iter_mut() {
                    if *h > old && *h < n {
                        count[*h] -= 1;
                        *h = n;
                    }
                }
            }
            if work.is_multiple_of(relabel_period) {
                global_relabel(&g, &mut height, &mut count);
                current.iter_mut().enumerate().for_each(|(u, c)| *c = g.start[u]);
                active.retain(|&u| height[u] < n);
                in_queue.iter_mut().for_each(|q| *q = false);
                for &u in &active {
                    in_queue[u] = true;
                }
                for u in 0..n {
                    if u != s && u != t && excess[u] > eps && height[u] < n && !in_queue[u] {
                        in_queue[u] = true;
                        active.push_back(u);
                    }
                }
            }
        }
    }
    let reaches = g.reaches(t, eps);
    FlowSolution {
        flow: excess[t],
        source_side: reaches.iter().map(|r| !r).collect(),
    }
}

/// Dinic's blocking-flow algorithm, iterative depth-first search.
pub fn dinic(net: &Network, s: usize, t: usize) -> FlowSolution {
    let n = net.nodes;
    let eps = eps_for(net);
    let mut g = Residual::new(net);
    let mut flow = 0.0;
    let mut level = vec![usize::MAX; n];
    let mut it = vec![0usize; n];
    loop {
        level.iter_mut().for_each(|l| *l = usize::MAX);
        level[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(v) = q.pop_front() {
            for a in g.arcs(v) {
                let w = g.to[a] as usize;
                if level[w] == usize::MAX && g.cap[a] > eps {
                    level[w] = level[v] + 1;
                    q.push_back(w);
                }
            }
        }
        if level[t] == usize::MAX {
            break;
        }
        it.copy_from_slice(&g.start[..n]);
        // Repeatedly find s-t paths in the level graph.
        let mut path: Vec<usize> = Vec::new();
        loop {
            let v = path.last().map_or(s, |&a| g.to[a] as usize);
            if v == t {
                let d = path.iter().map(|&a| g.cap[a]).fold(f64::INFINITY, f64::min);
                for &a in &path {
                    g.cap[a] -= d;
                    g.cap[g.rev[a] as usize] += d;
                }
                flow += d;
                // Retreat to the first saturated arc.
                let k = path.iter().position(|&a| g.cap[a] <= eps).unwrap_or(0);
                path.truncate(k);
                continue;
            }
            let end = g.start[v + 1];
            let mut advanced = false;
            while it[v] < end {
                let a = it[v];
                let w = g.to[a] as usize;
                if g.cap[a] > eps && level[w] == level[v] + 1 {
                    path.push(a);
                    advanced = true;
                    break;
                }
                it[v] += 1;
            }
            if !advanced {
                if v == s {
                    break;
                }
                // Dead end: drop v from the level graph.
                level[v] = usize::MAX;
                path.pop();
                if let Some(&a) = path.last() {
                    let u = g.to[a] as usize;
                    it[u] += 1;
                } else {
                    it[s] += 1;
                }
            }
        }
    }
    FlowSolution {
        flow,
        source_side: g.reached_from(s, eps),
    }
}

/// Exhaustive minimum over labelings of the free nodes; `fixed[v]` pins a node
/// to the source (`Some(true)`) or sink (`Some(false)`) side.
pub fn brute_force_min_cut(net: &Network, fixed: &[Option<bool>]) -> (f64, Vec<bool>) {
    let free: Vec<usize> = (0..net.nodes).filter(|&v| fixed[v].is_none()).collect();
    assert!(free.len() <= 24, "brute force limited to 24 free nodes");
    let mut side: Vec<bool> = fixed.iter().map(|f| f.unwrap_or(false)).collect();
    let mut best = (f64::INFINITY, side.clone());
    for mask in 0u32..(1u32 << free.len()) {
        for (b, &v) in free.iter().enumerate() {
            side[v] = mask >> b & 1 == 1;
        }
        let c = net.cut_value(&side);
        if c < best.0 {
            best = (c, side.clone());
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_node_toy() {
        let mut net = Network::new(2);
        net.add(0, 1, 3.5);
        for sol in [push_relabel(&net, 0, 1), dinic(&net, 0, 1)] {
            assert_eq!(sol.flow, 3.5);
            assert_eq!(sol.source_side, vec![true, false]);
        }
    }

    #[test]
    fn classic_example() {
        // Two parallel routes with a cross link.
        let mut net = Network::new(4);
        net.add(0, 1, 3.0);
        net.add(0, 2, 2.0);
        net.add(1, 2, 1.0);
        net.add(1, 3, 2.0);
        net.add(2, 3, 3.0);
        assert_eq!(push_relabel(&net, 0, 3).flow, 5.0);
        assert_eq!(dinic(&net, 0, 3).flow, 5.0);
    }

    #[test]
    fn random_graphs_agree_with_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..60 {
            let n = rng.random_range(3..12);
            let mut net = Network::new(n);
            for u in 0..n {
                for v in u + 1..n {
                    if rng.random_bool(0.4) {
                        net.add(u, v, rng.random_range(0.0..5.0));
                    }
                }
            }
            let mut fixed = vec![None; n];
            fixed[0] = Some(true);
            fixed[n - 1] = Some(false);
            let (bf, _) = brute_force_min_cut(&net, &fixed);
            let pr = push_relabel(&net, 0, n - 1);
            let dn = dinic(&net, 0, n - 1);
            assert!((pr.flow - bf).abs() <= 1e-9 * bf.max(1.0), "{} vs {bf}", pr.flow);
            assert!((dn.flow - bf).abs() <= 1e-9 * bf.max(1.0), "{} vs {bf}", dn.flow);
            assert!((net.cut_value(&pr.source_side) - bf).abs() <= 1e-9 * bf.max(1.0));
            assert!((net.cut_value(&dn.source_side) - bf).abs() <= 1e-9 * bf.max(1.0));
        }
    }

    #[test]
    fn disconnected_sink_gives_zero() {
        let mut net = Network::new(3);
        net.add(0, 1, 1.0);
        let pr = push_relabel(&net, 0, 2);
        assert_eq!(pr.flow, 0.0);
        assert_eq!(net.cut_value(&pr.source_side), 0.0);
        assert_eq!(dinic(&net, 0, 2).flow, 0.0);
    }
}
