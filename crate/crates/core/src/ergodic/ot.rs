//! Exact discrete optimal transport by primal network simplex.
//!
//! Transportation network with supply nodes (rows), demand nodes (columns) and
//! an artificial root joined to every node by a big-M arc. The spanning tree
//! is kept strongly feasible by the last-blocking-arc leaving rule, which
//! rules out cycling on degenerate pivots. Entering arcs are chosen by block
//! search pricing.

const EPS: f64 = 1e-12;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Dir {
    /// Arc points from the child to its parent.
    Up,
    /// Arc points from the parent to the child.
    Down,
}

/// Optimal plan summary.
#[derive(Debug, Clone)]
pub struct TransportSolution {
    pub cost: f64,
    /// Basic arcs `(row, column, flow)` with positive flow.
    pub plan: Vec<(usize, usize, f64)>,
    pub pivots: usize,
}

struct Tree<'a> {
    n: usize,
    m: usize,
    cost: &'a [f64],
    parent: Vec<usize>,
    dir: Vec<Dir>,
    flow: Vec<f64>,
    edge_cost: Vec<f64>,
    artificial: Vec<bool>,
    depth: Vec<usize>,
    pi: Vec<f64>,
    adj: Vec<Vec<usize>>,
}

impl Tree<'_> {
    fn reduced_cost(&self, arc: usize) -> f64 {
        let (i, j) = (arc / self.m, arc % self.m);
        self.cost[arc] + self.pi[i] - self.pi[self.n + j]
    }

    fn child_potential(&self, x: usize) -> f64 {
        let p = self.parent[x];
        match self.dir[x] {
            Dir::Up => self.pi[p] - self.edge_cost[x],
            Dir::Down => self.pi[p] + self.edge_cost[x],
        }
    }

    fn join(&self, mut a: usize, mut b: usize) -> usize {
        while a != b {
            if self.depth[a] >= self.depth[b] {
                a = self.parent[a];
            } else {
                b = self.parent[b];
            }
        }
        a
    }

    fn pivot(&mut self, arc: usize) {
        let (u, v) = (arc / self.m, self.n + arc % self.m);
        let join = self.join(u, v);

        // last blocking arc in cycle order starting from the join
        let mut delta = f64::INFINITY;
        let mut leave = usize::MAX;
        let mut leave_first = true;
        let mut x = u;
        while x != join {
            if self.dir[x] == Dir::Up && self.flow[x] < delta {
                delta = self.flow[x];
                leave = x;
            }
            x = self.parent[x];
        }
        let mut x = v;
        while x != join {
            if self.dir[x] == Dir::Down && self.flow[x] <= delta {
                delta = self.flow[x];
                leave = x;
                leave_first = false;
            }
            x = self.parent[x];
        }
        assert!(leave != usize::MAX, "transport problem is bounded");

        if delta > 0.0 {
            let mut x = u;
            while x != join {
                match self.dir[x] {
                    Dir::Up => self.flow[x] -= delta,
                    Dir::Down => self.flow[x] += delta,
                }
                x = self.parent[x];
            }
            let mut x = v;
            while x != join {
                match self.dir[x] {
                    Dir::Up => self.flow[x] += delta,
                    Dir::Down => self.flow[x] -= delta,
                }
                x = self.parent[x];
            }
        }

        let (s, t) = if leave_first { (u, v) } else { (v, u) };
        let old_parent = self.parent[leave];
        remove_neighbor(&mut self.adj[leave], old_parent);
        remove_neighbor(&mut self.adj[old_parent], leave);
        self.adj[u].push(v);
        self.adj[v].push(u);

        // reverse the path s -> leave
        let mut prev = t;
        let mut cur = s;
        let mut carry = (if s == u { Dir::Up } else { Dir::Down }, delta, self.cost[arc], false);
        loop {
            let next = self.parent[cur];
            let saved = (self.dir[cur], self.flow[cur], self.edge_cost[cur], self.artificial[cur]);
            self.parent[cur] = prev;
            self.dir[cur] = carry.0;
            self.flow[cur] = carry.1;
            self.edge_cost[cur] = carry.2;
            self.artificial[cur] = carry.3;
            if cur == leave {
                break;
            }
            let flipped = if saved.0 == Dir::Up { Dir::Down } else { Dir::Up };
            carry = (flipped, saved.1, saved.2, saved.3);
            prev = cur;
            cur = next;
        }

        let mut stack = vec![s];
        while let Some(x) = stack.pop() {
            self.depth[x] = self.depth[self.parent[x]] + 1;
            self.pi[x] = self.child_potential(x);
            for k in 0..self.adj[x].len() {
                let y = self.adj[x][k];
                if y != self.parent[x] {
                    stack.push(y);
                }
            }
        }
    }
}

fn remove_neighbor(list: &mut Vec<usize>, x: usize) {
    let k = list.iter().position(|&y| y == x).expect("tree edge present");
    list.swap_remove(k);
}

/// Minimum-cost transport between `supply` and `demand` with row-major costs
/// `cost[i * m + j]`. Masses must be nonnegative with equal totals.
pub fn solve(supply: &[f64], demand: &[f64], cost: &[f64]) -> TransportSolution {
    let (n, m) = (supply.len(), demand.len());
    assert_eq!(cost.len(), n * m);
    let root = n + m;
    let max_cost = cost.iter().fold(0.0f64, |a, &c| a.max(c.abs()));
    let big = (max_cost + 1.0) * (n + m + 1) as f64;

    let mut tree = Tree {
        n,
        m,
        cost,
        parent: vec![root; n + m + 1],
        dir: vec![Dir::Up; n + m + 1],
        flow: vec![0.0; n + m + 1],
        edge_cost: vec![big; n + m + 1],
        artificial: vec![true; n + m + 1],
        depth: vec![1; n + m + 1],
        pi: vec![0.0; n + m + 1],
        adj: vec![Vec::new(); n + m + 1],
    };
    tree.depth[root] = 0;
    tree.adj[root] = (0..n + m).collect();
    for i in 0..n {
        tree.adj[i].push(root);
        tree.flow[i] = supply[i];
        tree.pi[i] = -big;
    }
    for j in 0..m {
        let x = n + j;
        tree.adj[x].push(root);
        tree.flow[x] = demand[j];
        if demand[j] > 0.0 {
            tree.dir[x] = Dir::Down;
            tree.pi[x] = big;
        } else {
            tree.pi[x] = -big;
        }
    }

    let arcs = n * m;
    let block = ((arcs as f64).sqrt() as usize).max(10).min(arcs.max(1));
    let mut cursor = 0;
    let mut pivots = 0;
    'outer: loop {
        let mut scanned = 0;
        while scanned < arcs {
            let mut best = -EPS;
            let mut enter = usize::MAX;
            let end = (scanned + block).min(arcs);
            while scanned < end {
                let rc = tree.reduced_cost(cursor);
                if rc < best {
                    best = rc;
                    enter = cursor;
                }
                cursor += 1;
                if cursor == arcs {
                    cursor = 0;
                }
                scanned += 1;
            }
            if enter != usize::MAX {
                tree.pivot(enter);
                pivots += 1;
                continue 'outer;
            }
        }
        break;
    }

    let mut total = 0.0;
    let mut plan = Vec::new();
    for x in 0..n + m {
        if tree.artificial[x] || tree.flow[x] <= 0.0 {
            continue;
        }
        let (i, j) = if x < n { (x, tree.parent[x] - n) } else { (tree.parent[x], x - n) };
        total += tree.flow[x] * cost[i * m + j];
        plan.push((i, j, tree.flow[x]));
    }
    TransportSolution { cost: total, plan, pivots }
}
