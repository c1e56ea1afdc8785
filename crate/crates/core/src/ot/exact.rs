//! Exact optimal-transport oracles for small discrete measures.

use crate::error::{Error, Result};

/// Maximum number of source-target couplings the exact solvers accept.
pub const MAX_COUPLINGS: usize = 10_000;
/// Largest measure size for the permutation-enumeration path.
pub const MAX_PERMUTATION_POINTS: usize = 6;

/// Finite weighted point set.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Domain("measure needs at least one point".into()));
        }
        if points.len() != weights.len() {
            return Err(Error::Shape { expected: points.len(), got: weights.len() });
        }
        let dim = points[0].len();
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::Shape { expected: dim, got: p.len() });
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::Domain("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { points, weights })
    }

    pub fn uniform(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        Self::new(points, vec![1.0 / n.max(1) as f64; n])
    }

    /// Unit mass at a single point.
    pub fn dirac(point: Vec<f64>) -> Self {
        Self { points: vec![point], weights: vec![1.0] }
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    fn is_uniform(&self) -> bool {
        let w = 1.0 / self.len() as f64;
        self.weights.iter().all(|v| (v - w).abs() < 1e-12)
    }
}

fn cost_matrix(p: &DiscreteMeasure, q: &DiscreteMeasure, costfn: &dyn Fn(&[f64], &[f64]) -> f64) -> Result<Vec<Vec<f64>>> {
    if p.dim() != q.dim() {
        return Err(Error::Shape { expected: p.dim(), got: q.dim() });
    }
    if p.len() * q.len() > MAX_COUPLINGS {
        return Err(Error::OracleScope(format!(
            "{} x {} couplings exceed the limit of {MAX_COUPLINGS}",
            p.len(),
            q.len()
        )));
    }
    Ok(p.points.iter().map(|x| q.points.iter().map(|y| costfn(x, y)).collect()).collect())
}

/// Exact optimal transport cost between two discrete measures, solved as a
/// transportation problem by successive shortest augmenting paths.
pub fn exact_wd_discrete(
    p: &DiscreteMeasure,
    q: &DiscreteMeasure,
    costfn: impl Fn(&[f64], &[f64]) -> f64,
) -> Result<f64> {
    let c = cost_matrix(p, q, &costfn)?;
    Ok(transport_min_cost(&p.weights, &q.weights, &c))
}

/// Exact optimal transport cost for uniform measures of equal size (at most
/// [`MAX_PERMUTATION_POINTS`] points) by enumerating every permutation coupling.
pub fn exact_wd_permutations(
    p: &DiscreteMeasure,
    q: &DiscreteMeasure,
    costfn: impl Fn(&[f64], &[f64]) -> f64,
) -> Result<f64> {
    if p.len() != q.len() || !p.is_uniform() || !q.is_uniform() {
        return Err(Error::OracleScope("permutation path needs uniform measures of equal size".into()));
    }
    if p.len() > MAX_PERMUTATION_POINTS {
        return Err(Error::OracleScope(format!(
            "permutation path limited to {MAX_PERMUTATION_POINTS} points, got {}",
            p.len()
        )));
    }
    let c = cost_matrix(p, q, &costfn)?;
    let n = p.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    permute(&mut perm, 0, &mut |perm| {
        let total: f64 = perm.iter().enumerate().map(|(i, &j)| c[i][j]).sum();
        best = best.min(total);
    });
    Ok(best / n as f64)
}

fn permute(perm: &mut [usize], k: usize, visit: &mut dyn FnMut(&[usize])) {
    if k == perm.len() {
        visit(perm);
        return;
    }
    for i in k..perm.len() {
        perm.swap(k, i);
        permute(perm, k + 1, visit);
        perm.swap(k, i);
    }
}

struct Edge {
    to: usize,
    cap: f64,
    cost: f64,
}

/// Min-cost flow from supplies `a` to demands `b` over a complete bipartite graph.
fn transport_min_cost(a: &[f64], b: &[f64], c: &[Vec<f64>]) -> f64 {
    const EPS: f64 = 1e-14;
    let n = a.len();
    let k = b.len();
    let source = n + k;
    let sink = n + k + 1;
    let nodes = n + k + 2;
    let mut edges: Vec<Edge> = Vec::new();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    let add = |edges: &mut Vec<Edge>, adj: &mut Vec<Vec<usize>>, u: usize, v: usize, cap: f64, cost: f64| {
        adj[u].push(edges.len());
        edges.push(Edge { to: v, cap, cost });
        adj[v].push(edges.len());
        edges.push(Edge { to: u, cap: 0.0, cost: -cost });
    };
    for (i, &w) in a.iter().enumerate() {
        add(&mut edges, &mut adj, source, i, w, 0.0);
    }
    for (j, &w) in b.iter().enumerate() {
        add(&mut edges, &mut adj, n + j, sink, w, 0.0);
    }
    for (i, row) in c.iter().enumerate() {
        for (j, &cij) in row.iter().enumerate() {
            add(&mut edges, &mut adj, i, n + j, f64::INFINITY, cij);
        }
    }

    let mut total_cost = 0.0;
    loop {
        // Bellman-Ford: residual graph carries negative reverse costs.
        let mut dist = vec![f64::INFINITY; nodes];
        let mut via: Vec<Option<usize>> = vec![None; nodes];
        dist[source] = 0.0;
        for _ in 0..nodes {
            let mut changed = false;
            for u in 0..nodes {
                if dist[u].is_infinite() {
                    continue;
                }
                for &e in &adj[u] {
                    let edge = &edges[e];
                    let cand = dist[u] + edge.cost;
                    if edge.cap > EPS && cand < dist[edge.to] - 1e-12 * (1.0 + cand.abs()) {
                        dist[edge.to] = dist[u] + edge.cost;
                        via[edge.to] = Some(e);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        // Walk back from the sink; a walk longer than the node count means the
        // predecessor links closed a cycle.
        let mut path = Vec::new();
        let mut v = sink;
        while v != source {
            match via[v] {
                Some(e) if path.len() < nodes => {
                    path.push(e);
                    v = edges[e ^ 1].to;
                }
                _ => break,
            }
        }
        if v != source {
            break;
        }
        let push = path.iter().map(|&e| edges[e].cap).fold(f64::INFINITY, f64::min);
        if push <= EPS {
            break;
        }
        for &e in &path {
            edges[e].cap -= push;
            edges[e ^ 1].cap += push;
            total_cost += push * edges[e].cost;
        }
    }
    total_cost
}

/// Exact OT cost between two equal-size 1-D empirical measures via the sorted
/// (quantile) coupling, with cost `|x - y|^power`.
pub fn exact_wd_1d(xs: &[f64], ys: &[f64], power: u32) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::OracleScope(format!(
            "quantile coupling needs equal sample counts, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.is_empty() {
        return Err(Error::OracleScope("empty sample sets".into()));
    }
    if power != 1 && power != 2 {
        return Err(Error::Domain(format!("power must be 1 or 2, got {power}")));
    }
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let total: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs().powi(power as i32)).sum();
    Ok(total / xs.len() as f64)
}
