//! Exact transportation LP via the network-simplex method on the bipartite
//! graph: northwest-corner initial basis, Bland's rule against cycling, and a
//! reduced-cost optimality certificate.

use super::SparsePlan;
use crate::{Error, Result};

/// Optimal basic solution of `min Σ c_ij x_ij` subject to row sums `a` and
/// column sums `b`.
#[derive(Clone, Debug)]
pub struct SimplexSolution {
    /// Strictly positive flows of the optimal basis.
    pub plan: SparsePlan,
    pub value: f64,
    /// Most negative reduced cost over nonbasic arcs at termination
    /// (0 when none is negative); the optimality certificate.
    pub min_reduced_cost: f64,
    pub pivots: usize,
}

struct Tree {
    m: usize,
    n: usize,
    /// adjacency over nodes 0..m+n (sources then sinks), storing arc (i, j)
    adj: Vec<Vec<(usize, usize, usize)>>, // (neighbor node, i, j)
    parent: Vec<usize>,
    parent_arc: Vec<(usize, usize)>,
    order: Vec<usize>, // BFS order from the root
    u: Vec<f64>,
    v: Vec<f64>,
}

impl Tree {
    fn rebuild(&mut self, basis: &[(usize, usize)], cost: &[f64]) {
        let nodes = self.m + self.n;
        for a in &mut self.adj {
            a.clear();
        }
        for &(i, j) in basis {
            self.adj[i].push((self.m + j, i, j));
            self.adj[self.m + j].push((i, i, j));
        }
        self.parent = vec![usize::MAX; nodes];
        self.parent_arc = vec![(usize::MAX, usize::MAX); nodes];
        self.order.clear();
        let mut seen = vec![false; nodes];
        let mut queue = std::collections::VecDeque::new();
        queue.push_back(0);
        seen[0] = true;
        while let Some(x) = queue.pop_front() {
            self.order.push(x);
            for &(y, i, j) in &self.adj[x] {
                if !seen[y] {
                    seen[y] = true;
                    self.parent[y] = x;
                    self.parent_arc[y] = (i, j);
                    queue.push_back(y);
                }
            }
        }
        // duals along the tree: u_0 = 0, u_i + v_j = c_ij on basic arcs
        self.u[0] = 0.0;
        for &x in &self.order[1..] {
            let (i, j) = self.parent_arc[x];
            if x < self.m {
                self.u[x] = cost[i * self.n + j] - self.v[j];
            } else {
                self.v[x - self.m] = cost[i * self.n + j] - self.u[i];
            }
        }
    }

    fn path_to_root(&self, mut x: usize) -> Vec<usize> {
        let mut path = vec![x];
        while self.parent[x] != usize::MAX {
            x = self.parent[x];
            path.push(x);
        }
        path
    }
}

/// Exact optimizer for the balanced transportation problem.  Masses must
/// agree within 1e-12 and costs must be finite.
pub fn transportation_simplex(a: &[f64], b: &[f64], cost: &[f64]) -> Result<SimplexSolution> {
    let (m, n) = (a.len(), b.len());
    if m == 0 || n == 0 || cost.len() != m * n {
        return Err(Error::ShapeMismatch("cost matrix does not match the marginals".into()));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidParameter("costs must be finite".into()));
    }
    if a.iter().chain(b).any(|x| *x < 0.0) {
        return Err(Error::InvalidMeasure("marginal masses must be >= 0".into()));
    }
    let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    if (sa - sb).abs() > 1e-12 * (1.0 + sa.abs()) {
        return Err(Error::Unbalanced(format!("row mass {sa} vs column mass {sb}")));
    }

    // northwest-corner initial basis: m + n − 1 arcs, advancing one index per
    // step so degenerate zero arcs stay basic
    let mut flow = vec![0.0; m * n];
    let mut basis: Vec<(usize, usize)> = Vec::with_capacity(m + n - 1);
    let (mut i, mut j) = (0usize, 0usize);
    let mut ra = a[0];
    let mut rb = b[0];
    loop {
        let t = ra.min(rb).max(0.0);
        flow[i * n + j] = t;
        basis.push((i, j));
        ra -= t;
        rb -= t;
        if i == m - 1 && j == n - 1 {
            break;
        }
        if ra <= rb && i < m - 1 {
            i += 1;
            ra = a[i];
        } else {
            j += 1;
            rb = b[j];
        }
    }

    let mut tree = Tree {
        m,
        n,
        adj: vec![Vec::new(); m + n],
        parent: vec![],
        parent_arc: vec![],
        order: vec![],
        u: vec![0.0; m],
        v: vec![0.0; n],
    };
    tree.rebuild(&basis, cost);

    let cmax = cost.iter().fold(0.0f64, |acc, c| acc.max(c.abs()));
    let eps = 1e-12 * (1.0 + cmax);
    let mut in_basis = vec![false; m * n];
    for &(bi, bj) in &basis {
        in_basis[bi * n + bj] = true;
    }

    let mut pivots = 0usize;
    let max_pivots = 50 * (m + n) * (m + n) + 10_000;
    loop {
        // Bland: first arc (row-major order) with negative reduced cost
        let mut entering = None;
        'scan: for ei in 0..m {
            for ej in 0..n {
                if in_basis[ei * n + ej] {
                    continue;
                }
                if cost[ei * n + ej] - tree.u[ei] - tree.v[ej] < -eps {
                    entering = Some((ei, ej));
                    break 'scan;
                }
            }
        }
        let Some((ei, ej)) = entering else { break };

        // cycle: entering arc plus the tree path between its endpoints
        let pi = tree.path_to_root(ei);
        let pj = tree.path_to_root(tree.m + ej);
        let mut on_pi = vec![false; m + n];
        for &x in &pi {
            on_pi[x] = true;
        }
        let lca = *pj.iter().find(|x| on_pi[**x]).expect("tree is connected");
        let mut nodes: Vec<usize> = pi.iter().copied().take_while(|x| *x != lca).collect();
        nodes.push(lca);
        let tail: Vec<usize> = pj.iter().copied().take_while(|x| *x != lca).collect();
        nodes.extend(tail.iter().rev());
        // nodes: ei .. lca .. (m+ej); consecutive pairs are the cycle's tree
        // arcs, alternating −θ, +θ, −θ, ... starting at −θ
        let mut minus_arcs: Vec<(usize, usize)> = Vec::new();
        let mut plus_arcs: Vec<(usize, usize)> = Vec::new();
        for (k, w) in nodes.windows(2).enumerate() {
            let (x, y) = (w[0], w[1]);
            let arc = if x < m { (x, y - m) } else { (y, x - m) };
            if k % 2 == 0 {
                minus_arcs.push(arc);
            } else {
                plus_arcs.push(arc);
            }
        }
        // leaving arc: smallest flow among the −θ arcs, ties broken by the
        // smallest index (Bland)
        let theta =
            minus_arcs.iter().map(|&(x, y)| flow[x * n + y]).fold(f64::INFINITY, f64::min);
        let leaving = minus_arcs
            .iter()
            .copied()
            .filter(|&(x, y)| flow[x * n + y] <= theta)
            .min()
            .expect("cycle has a leaving arc");

        for &(x, y) in &minus_arcs {
            flow[x * n + y] -= theta;
        }
        for &(x, y) in &plus_arcs {
            flow[x * n + y] += theta;
        }
        flow[ei * n + ej] += theta;
        flow[leaving.0 * n + leaving.1] = 0.0;

        in_basis[ei * n + ej] = true;
        in_basis[leaving.0 * n + leaving.1] = false;
        basis.retain(|arc| *arc != leaving);
        basis.push((ei, ej));
        tree.rebuild(&basis, cost);

        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::Inconsistent("network simplex exceeded its pivot budget".into()));
        }
    }

    let mut min_reduced = 0.0f64;
    for ei in 0..m {
        for ej in 0..n {
            if !in_basis[ei * n + ej] {
                min_reduced = min_reduced.min(cost[ei * n + ej] - tree.u[ei] - tree.v[ej]);
            }
        }
    }
    let mut plan = Vec::new();
    let mut value = 0.0;
    for ii in 0..m {
        for jj in 0..n {
            let f = flow[ii * n + jj];
            if f > 0.0 {
                plan.push((ii, jj, f));
                value += f * cost[ii * n + jj];
            }
        }
    }
    Ok(SimplexSolution { plan, value, min_reduced_cost: min_reduced, pivots })
}
