//! Index arrays of the base HashTag code.
//!
//! Array `P_0` is the identity pattern: parity row `i` combines row `i` of
//! every systematic node. Arrays `P_1..P_{r-1}` carry the same `k` columns
//! plus `ceil(k/r)` extra columns holding scheduled `(row, node)` pairs.
//!
//! Every systematic node `j` splits its rows into `r` disjoint subsets. One
//! of them is the node's home subset `H_j`; the subset `(home + rho) mod r`
//! is scheduled into array `P_rho`, each of its rows landing in a distinct
//! row of `H_j`. Repairing node `j` then only touches rows of `H_j` in the
//! first `k` columns.
//!
//! When `alpha_b = r^m` the subsets are base-`r` digit classes and the
//! placement is closed-form. Other sizes use contiguous home blocks, a
//! max-flow to pick host cells and a local search to choose which row goes
//! where.

use std::collections::{BTreeMap, VecDeque};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ceil_div;

/// `(row, node)` index of a data symbol inside one instance.
pub type Pair = (usize, usize);

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodePartition {
    /// The `r` disjoint row subsets `D_{0,d_j} .. D_{r-1,d_j}`, each sorted.
    pub subsets: Vec<Vec<usize>>,
    /// Index of the home subset.
    pub home: usize,
}

impl NodePartition {
    pub fn home_rows(&self) -> &[usize] {
        &self.subsets[self.home]
    }

    /// Rows scheduled into array `rho` (1 <= rho < r).
    pub fn scheduled_into(&self, rho: usize) -> &[usize] {
        let r = self.subsets.len();
        &self.subsets[(self.home + rho) % r]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    /// `alpha_b = r^m`; node group `g` uses digit `g mod m`.
    Digit { m: usize },
    /// Contiguous home blocks with flow-based placement.
    Blocks,
}

/// Where one scheduled row of a node is hosted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Host {
    pub array: usize,
    pub row: usize,
    pub source_row: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub k: usize,
    pub r: usize,
    pub alpha_b: usize,
    pub strategy: Strategy,
    pub nodes: Vec<NodePartition>,
    /// Host cells of every node's scheduled rows.
    pub hosts: Vec<Vec<Host>>,
}

/// A scheduled pair as seen from its own node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub array: usize,
    pub row: usize,
    pub col: usize,
    pub source_row: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexArrays {
    pub k: usize,
    pub r: usize,
    pub alpha_b: usize,
    pub extra_cols: usize,
    /// `arrays[l][row][col]`; `k` columns for `l = 0`, `k + extra_cols` otherwise.
    arrays: Vec<Vec<Vec<Option<Pair>>>>,
    pub partition: Partition,
    placements: Vec<Vec<Placement>>,
}

fn check_dims(k: usize, r: usize, alpha_b: usize) -> Result<()> {
    if k < 2 || r < 2 || alpha_b < 2 {
        return Err(Error::InvalidParams(format!(
            "scheduler needs k, r, alpha_b >= 2 (got {k}, {r}, {alpha_b})"
        )));
    }
    let cap = crate::params::max_alpha_b(k, r);
    if alpha_b > cap {
        return Err(Error::InvalidParams(format!(
            "alpha_b = {alpha_b} exceeds r^ceil(k/r) = {cap}"
        )));
    }
    Ok(())
}

/// `m` with `r^m == alpha_b`, if `alpha_b` is a power of `r`.
fn exact_power(alpha_b: usize, r: usize) -> Option<usize> {
    let mut v = 1usize;
    let mut m = 0;
    while v < alpha_b {
        v *= r;
        m += 1;
    }
    (v == alpha_b && m >= 1).then_some(m)
}

/// Base-`r` digit `d` of `i`, most significant first among `m` digits.
fn digit(i: usize, d: usize, m: usize, r: usize) -> usize {
    (i / r.pow((m - 1 - d) as u32)) % r
}

fn with_digit(i: usize, d: usize, m: usize, r: usize, value: usize) -> usize {
    let w = r.pow((m - 1 - d) as u32);
    i - digit(i, d, m, r) * w + value * w
}

pub fn build_partition(k: usize, r: usize, alpha_b: usize) -> Result<Partition> {
    check_dims(k, r, alpha_b)?;
    if let Some(m) = exact_power(alpha_b, r) {
        let mut nodes = Vec::with_capacity(k);
        let mut hosts = Vec::with_capacity(k);
        for j in 0..k {
            let (d, home) = ((j / r) % m, j % r);
            let mut subsets = vec![Vec::new(); r];
            for i in 0..alpha_b {
                subsets[digit(i, d, m, r)].push(i);
            }
            let node = NodePartition { subsets, home };
            let mut hs = Vec::new();
            for rho in 1..r {
                for &src in node.scheduled_into(rho) {
                    hs.push(Host {
                        array: rho,
                        row: with_digit(src, d, m, r, home),
                        source_row: src,
                    });
                }
            }
            nodes.push(node);
            hosts.push(hs);
        }
        return Ok(Partition {
            k,
            r,
            alpha_b,
            strategy: Strategy::Digit { m },
            nodes,
            hosts,
        });
    }
    let min_home = ceil_div(alpha_b, r);
    let upper = crate::repair::systematic_bounds(k + r, k, r, r * alpha_b)?.upper;
    // first feasible family, or the best of a few when it breaks the bound
    let solve = |home_len: usize, balanced: bool| -> Option<(Partition, usize)> {
        let mut best: Option<(Partition, (usize, usize))> = None;
        let mut tries = 0;
        for homes in home_families(k, r, alpha_b, home_len) {
            let Some(mut layout) = Layout::place(k, r, alpha_b, min_home, balanced, homes) else {
                continue;
            };
            layout.improve();
            layout.refine();
            let mut counts = vec![0; k];
            layout.read_counts(0..k, &mut counts);
            let score = (counts.iter().copied().max().unwrap_or(0), counts.iter().sum());
            if best.as_ref().is_none_or(|(_, b)| score < *b) {
                best = Some((layout.into_partition(), score));
            }
            tries += 1;
            if score.0 <= upper || tries == FAMILY_TRIES {
                break;
            }
        }
        best.map(|(p, (max, _))| (p, max))
    };
    match (solve(min_home, true), || solve(min_home, false)) {
        (Some((part, max)), _) if max <= upper => return Ok(part),
        (Some((part, max)), relaxed) => match relaxed() {
            Some((other, m2)) if m2 < max => return Ok(other),
            _ => return Ok(part),
        },
        (None, relaxed) => {
            if let Some((part, _)) = relaxed() {
                return Ok(part);
            }
        }
    }
    for home_len in min_home + 1..alpha_b {
        if let Some((part, _)) = solve(home_len, false) {
            return Ok(part);
        }
    }
    Err(Error::SchedulingInfeasible(format!(
        "no placement found (k={k}, r={r}, alpha_b={alpha_b})"
    )))
}

/// Feasible home families compared when the first one breaks the bound.
const FAMILY_TRIES: usize = 6;

/// Randomized home families tried after the contiguous one.
const HOME_RETRIES: u64 = 32;

/// Contiguous evenly spread homes first, then seeded families that pick
/// the least covered rows.
fn home_families(k: usize, r: usize, alpha_b: usize, len: usize) -> impl Iterator<Item = Vec<Vec<usize>>> {
    std::iter::once(spread_homes(k, r, alpha_b, len)).chain((0..HOME_RETRIES).map(move |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cover = vec![0usize; alpha_b];
        (0..k)
            .map(|_| {
                let mut rows: Vec<usize> = (0..alpha_b).collect();
                rows.shuffle(&mut rng);
                rows.sort_by_key(|&i| cover[i]);
                rows.truncate(len);
                rows.sort_unstable();
                for &i in &rows {
                    cover[i] += 1;
                }
                rows
            })
            .collect()
    }))
}

/// Cyclic blocks of `len` rows; node `j` in group `j / r` at position
/// `j mod r`, so shifts of all nodes are spread evenly.
fn spread_homes(k: usize, r: usize, alpha_b: usize, len: usize) -> Vec<Vec<usize>> {
    let groups = ceil_div(k, r);
    (0..k)
        .map(|j| {
            let (g, t) = (j / r, j % r);
            let shift = (t * groups + g) * alpha_b / (r * groups);
            let mut rows: Vec<usize> = (0..len).map(|x| (x + shift) % alpha_b).collect();
            rows.sort_unstable();
            rows
        })
        .collect()
}

/// Minimal Edmonds-Karp max-flow.
struct Flow {
    adj: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<usize>,
}

impl Flow {
    fn new(n: usize) -> Self {
        Flow {
            adj: vec![Vec::new(); n],
            to: Vec::new(),
            cap: Vec::new(),
        }
    }

    /// Returns the id of the forward edge.
    fn edge(&mut self, a: usize, b: usize, cap: usize) -> usize {
        let id = self.to.len();
        self.adj[a].push(id);
        self.to.push(b);
        self.cap.push(cap);
        self.adj[b].push(id + 1);
        self.to.push(a);
        self.cap.push(0);
        id
    }

    fn run(&mut self, s: usize, t: usize) -> usize {
        let mut total = 0;
        loop {
            let mut prev = vec![usize::MAX; self.adj.len()];
            let mut queue = VecDeque::from([s]);
            prev[s] = usize::MAX - 1;
            while let Some(u) = queue.pop_front() {
                for &e in &self.adj[u] {
                    let v = self.to[e];
                    if self.cap[e] > 0 && prev[v] == usize::MAX {
                        prev[v] = e;
                        queue.push_back(v);
                    }
                }
            }
            if prev[t] == usize::MAX {
                return total;
            }
            let mut v = t;
            while v != s {
                let e = prev[v];
                self.cap[e] -= 1;
                self.cap[e ^ 1] += 1;
                v = self.to[e ^ 1];
            }
            total += 1;
        }
    }
}

/// Working state of the block scheduler.
struct Layout {
    k: usize,
    r: usize,
    alpha_b: usize,
    extra_cols: usize,
    /// Moves may change a node's subset sizes.
    cross_array: bool,
    home: Vec<Vec<bool>>,
    /// `(array, row, source_row)` per node.
    assign: Vec<Vec<(usize, usize, usize)>>,
    /// Occupants `(source_row, node)` of every cell, `cells[array][row]`.
    cells: Vec<Vec<Vec<Pair>>>,
}

/// Local-search sweeps over all nodes.
const IMPROVE_PASSES: usize = 12;
/// Exact repair-cost evaluations spent on the worst nodes, scaled down
/// for large layouts.
const REFINE_BUDGET: usize = 4_000;
const REFINE_WORK: usize = 4_000_000;

/// A local move of one node's host.
#[derive(Clone, Copy)]
enum Move {
    Swap(usize, usize, usize),
    Relocate(usize, usize, usize, usize),
}

impl Layout {
    /// Max-flow from nodes to host cells. `balanced` fixes every subset
    /// size to `floor` or `ceil` of `alpha_b / r`; with grown homes one
    /// array per node (rotating) gets exactly `min_home` rows.
    fn place(
        k: usize,
        r: usize,
        alpha_b: usize,
        min_home: usize,
        balanced: bool,
        homes: Vec<Vec<usize>>,
    ) -> Option<Self> {
        let extra_cols = ceil_div(k, r);
        let quota_id = |j: usize, rho: usize| 2 + k + j * (r - 1) + rho - 1;
        let cell_id = |rho: usize, s: usize| 2 + k * r + (rho - 1) * alpha_b + s;
        let sink = 1;
        let mut flow = Flow::new(2 + k * r + (r - 1) * alpha_b);
        let mut demand = 0;
        let mut node_edges = Vec::new();
        for (j, h) in homes.iter().enumerate() {
            let need = alpha_b - h.len();
            demand += need;
            let quota: Vec<Option<usize>> = (1..r)
                .map(|rho| {
                    if balanced {
                        let (q, extra) = (need / (r - 1), need % (r - 1));
                        Some(q + usize::from((rho - 1 + j) % (r - 1) < extra))
                    } else if h.len() > min_home && rho == 1 + j % (r - 1) {
                        Some(min_home)
                    } else {
                        None
                    }
                })
                .collect();
            let fixed: usize = quota.iter().flatten().sum();
            flow.edge(0, 2 + j, need - fixed);
            for rho in 1..r {
                let from = match quota[rho - 1] {
                    Some(q) => {
                        flow.edge(0, quota_id(j, rho), q);
                        quota_id(j, rho)
                    }
                    None => 2 + j,
                };
                for &s in h {
                    node_edges.push((j, rho, s, flow.edge(from, cell_id(rho, s), 1)));
                }
            }
        }
        for rho in 1..r {
            for s in 0..alpha_b {
                flow.edge(cell_id(rho, s), sink, extra_cols);
            }
        }
        if flow.run(0, sink) != demand {
            return None;
        }
        let mut home = vec![vec![false; alpha_b]; k];
        for (j, h) in homes.iter().enumerate() {
            for &s in h {
                home[j][s] = true;
            }
        }
        let mut layout = Layout {
            k,
            r,
            alpha_b,
            extra_cols,
            cross_array: !balanced && homes.iter().all(|h| h.len() == min_home),
            home,
            assign: vec![Vec::new(); k],
            cells: vec![vec![Vec::new(); alpha_b]; r],
        };
        let mut used: Vec<Vec<(usize, usize)>> = vec![Vec::new(); k];
        for (j, rho, s, e) in node_edges {
            if flow.cap[e] == 0 {
                used[j].push((rho, s));
            }
        }
        for (j, cells) in used.into_iter().enumerate() {
            let sources: Vec<usize> = (0..alpha_b).filter(|&i| !layout.home[j][i]).collect();
            for ((rho, s), src) in cells.into_iter().zip(sources) {
                layout.assign[j].push((rho, s, src));
                layout.cells[rho][s].push((src, j));
            }
        }
        Some(layout)
    }

    /// Foreign reads the occupants of one cell cause each other.
    fn cell_cost(&self, occ: &[Pair]) -> usize {
        let mut c = 0;
        for &(_, jx) in occ {
            for &(iy, jy) in occ {
                if jx != jy && !self.home[jx][iy] {
                    c += 1;
                }
            }
        }
        c
    }

    fn cost_with(&self, rho: usize, s: usize, remove: Option<Pair>, add: Option<Pair>) -> usize {
        let mut occ: Vec<Pair> = self.cells[rho][s]
            .iter()
            .copied()
            .filter(|p| Some(*p) != remove)
            .collect();
        occ.extend(add);
        self.cell_cost(&occ)
    }

    fn set_source(&mut self, j: usize, a: usize, src: usize) {
        let (rho, s, old) = self.assign[j][a];
        let cell = &mut self.cells[rho][s];
        let pos = cell.iter().position(|&p| p == (old, j)).expect("occupant present");
        cell[pos] = (src, j);
        self.assign[j][a].2 = src;
    }

    fn move_cell(&mut self, j: usize, a: usize, rho: usize, s: usize) {
        let (r0, s0, src) = self.assign[j][a];
        self.cells[r0][s0].retain(|&p| p != (src, j));
        self.cells[rho][s].push((src, j));
        self.assign[j][a] = (rho, s, src);
    }

    /// Strictly improving swaps of sources and moves to free cells.
    fn improve(&mut self) {
        for _ in 0..IMPROVE_PASSES {
            let mut improved = false;
            for j in 0..self.k {
                let n = self.assign[j].len();
                for a in 0..n {
                    for b in a + 1..n {
                        let (ra, sa, ia) = self.assign[j][a];
                        let (rb, sb, ib) = self.assign[j][b];
                        let before = self.cost_with(ra, sa, None, None) + self.cost_with(rb, sb, None, None);
                        let after = self.cost_with(ra, sa, Some((ia, j)), Some((ib, j)))
                            + self.cost_with(rb, sb, Some((ib, j)), Some((ia, j)));
                        if after < before {
                            self.set_source(j, a, ib);
                            self.set_source(j, b, ia);
                            improved = true;
                        }
                    }
                }
                for a in 0..n {
                    let (ra, sa, ia) = self.assign[j][a];
                    let here = self.cost_with(ra, sa, None, None) - self.cost_with(ra, sa, Some((ia, j)), None);
                    let mut best: Option<(usize, usize, usize)> = None;
                    for rho in 1..self.r {
                        if !self.cross_array && rho != ra {
                            continue;
                        }
                        for s in 0..self.alpha_b {
                            if !self.home[j][s]
                                || self.cells[rho][s].len() >= self.extra_cols
                                || self.assign[j].iter().any(|&(r2, s2, _)| (r2, s2) == (rho, s))
                            {
                                continue;
                            }
                            let there = self.cost_with(rho, s, None, Some((ia, j))) - self.cost_with(rho, s, None, None);
                            if there < here && best.is_none_or(|(c, _, _)| there < c) {
                                best = Some((there, rho, s));
                            }
                        }
                    }
                    if let Some((_, rho, s)) = best {
                        self.move_cell(j, a, rho, s);
                        improved = true;
                    }
                }
            }
            if !improved {
                break;
            }
        }
    }

    fn read_counts(&self, nodes: impl Iterator<Item = usize>, counts: &mut [usize]) {
        let ia = assemble(&self.partition()).expect("layout is consistent");
        for j in nodes {
            counts[j] = crate::repair::systematic_read_count(&ia, j);
        }
    }

    /// Nodes whose repair can see a change to `rows`.
    fn touching(&self, j: usize, rows: &[usize]) -> Vec<usize> {
        (0..self.k)
            .filter(|&x| x == j || rows.iter().any(|&s| self.home[x][s]))
            .collect()
    }

    fn moves(&self, j: usize) -> Vec<Move> {
        let n = self.assign[j].len();
        let mut out = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                out.push(Move::Swap(j, a, b));
            }
        }
        for a in 0..n {
            let ra = self.assign[j][a].0;
            for rho in (1..self.r).filter(|&rho| self.cross_array || rho == ra) {
                for s in (0..self.alpha_b).filter(|&s| self.home[j][s]) {
                    if self.cells[rho][s].len() < self.extra_cols
                        && !self.assign[j].iter().any(|&(r2, s2, _)| (r2, s2) == (rho, s))
                    {
                        out.push(Move::Relocate(j, a, rho, s));
                    }
                }
            }
        }
        out
    }

    /// Applies `mv`, returning its inverse.
    fn apply(&mut self, mv: Move) -> Move {
        match mv {
            Move::Swap(j, a, b) => {
                let (ia, ib) = (self.assign[j][a].2, self.assign[j][b].2);
                self.set_source(j, a, ib);
                self.set_source(j, b, ia);
                mv
            }
            Move::Relocate(j, a, rho, s) => {
                let (r0, s0, _) = self.assign[j][a];
                self.move_cell(j, a, rho, s);
                Move::Relocate(j, a, r0, s0)
            }
        }
    }

    /// First-improvement search on exact read counts, driven by the
    /// currently worst node and the nodes sharing its home rows.
    fn refine(&mut self) {
        let work = self.k * self.k * self.r * self.alpha_b;
        let mut budget = REFINE_BUDGET.min(REFINE_WORK / work.max(1));
        let mut counts = vec![0; self.k];
        self.read_counts(0..self.k, &mut counts);
        let score = |c: &[usize]| (c.iter().copied().max().unwrap_or(0), c.iter().sum::<usize>());
        'outer: while budget > 0 {
            let max = score(&counts).0;
            let mut movers: Vec<usize> = Vec::new();
            for w in (0..self.k).filter(|&j| counts[j] == max) {
                movers.push(w);
                for rho in 1..self.r {
                    for s in (0..self.alpha_b).filter(|&s| self.home[w][s]) {
                        movers.extend(self.cells[rho][s].iter().map(|&(_, o)| o));
                    }
                }
            }
            let mut seen = vec![false; self.k];
            movers.retain(|&j| !std::mem::replace(&mut seen[j], true));
            for j in movers {
                for mv in self.moves(j) {
                    if budget == 0 {
                        break 'outer;
                    }
                    budget -= 1;
                    let rows = match mv {
                        Move::Swap(j, a, b) => vec![self.assign[j][a].1, self.assign[j][b].1],
                        Move::Relocate(j, a, _, s) => vec![self.assign[j][a].1, s],
                    };
                    let undo = self.apply(mv);
                    let mut next = counts.clone();
                    self.read_counts(self.touching(j, &rows).into_iter(), &mut next);
                    if score(&next) < score(&counts) {
                        counts = next;
                        continue 'outer;
                    }
                    self.apply(undo);
                }
            }
            break;
        }
    }

    fn partition(&self) -> Partition {
        self.clone_shallow().into_partition()
    }

    fn clone_shallow(&self) -> Layout {
        Layout {
            k: self.k,
            r: self.r,
            alpha_b: self.alpha_b,
            extra_cols: self.extra_cols,
            cross_array: self.cross_array,
            home: self.home.clone(),
            assign: self.assign.clone(),
            cells: Vec::new(),
        }
    }

    fn into_partition(self) -> Partition {
        let mut nodes = Vec::with_capacity(self.k);
        let mut hosts = Vec::with_capacity(self.k);
        for j in 0..self.k {
            let mut subsets = vec![Vec::new(); self.r];
            subsets[0] = (0..self.alpha_b).filter(|&i| self.home[j][i]).collect();
            let mut hs: Vec<Host> = self.assign[j]
                .iter()
                .map(|&(array, row, source_row)| Host {
                    array,
                    row,
                    source_row,
                })
                .collect();
            hs.sort_by_key(|h| (h.array, h.row));
            for h in &hs {
                subsets[h.array].push(h.source_row);
            }
            for s in &mut subsets {
                s.sort_unstable();
            }
            nodes.push(NodePartition { subsets, home: 0 });
            hosts.push(hs);
        }
        Partition {
            k: self.k,
            r: self.r,
            alpha_b: self.alpha_b,
            strategy: Strategy::Blocks,
            nodes,
            hosts,
        }
    }
}

pub fn build_index_arrays(partition: &Partition) -> Result<IndexArrays> {
    let arrays = assemble(partition)?;
    arrays.check().map_err(Error::SchedulingInfeasible)?;
    Ok(arrays)
}

fn assemble(partition: &Partition) -> Result<IndexArrays> {
    let Partition { k, r, alpha_b, .. } = *partition;
    check_dims(k, r, alpha_b)?;
    if partition.nodes.len() != k || partition.hosts.len() != k {
        return Err(Error::InvalidParams(format!(
            "partition has {} nodes, expected {k}",
            partition.nodes.len()
        )));
    }
    let extra_cols = ceil_div(k, r);
    let mut cells: Vec<Vec<Vec<Option<Pair>>>> = vec![vec![vec![None; extra_cols]; alpha_b]; r];
    for (j, hs) in partition.hosts.iter().enumerate() {
        for h in hs {
            if h.array == 0 || h.array >= r || h.row >= alpha_b {
                return Err(Error::SchedulingInfeasible(format!("node {j}: bad host {h:?}")));
            }
            let row = &mut cells[h.array][h.row];
            // group column first, so digit layouts keep one column per group
            let col = [j / r]
                .into_iter()
                .filter(|&c| c < extra_cols)
                .chain(0..extra_cols)
                .find(|&c| row[c].is_none())
                .ok_or_else(|| {
                    Error::SchedulingInfeasible(format!("array {} row {} is full", h.array, h.row))
                })?;
            row[col] = Some((h.source_row, j));
        }
    }

    let mut arrays = Vec::with_capacity(r);
    let mut placements = vec![Vec::new(); k];
    for (l, extra) in cells.into_iter().enumerate() {
        let mut rows = Vec::with_capacity(alpha_b);
        for (i, extra_row) in extra.into_iter().enumerate() {
            let mut row: Vec<Option<Pair>> = (0..k).map(|j| Some((i, j))).collect();
            if l > 0 {
                for (c, cell) in extra_row.iter().enumerate() {
                    if let Some((src, j)) = *cell {
                        placements[j].push(Placement {
                            array: l,
                            row: i,
                            col: k + c,
                            source_row: src,
                        });
                    }
                }
                row.extend(extra_row);
            }
            rows.push(row);
        }
        arrays.push(rows);
    }
    for p in &mut placements {
        p.sort_by_key(|p| (p.array, p.row));
    }
    Ok(IndexArrays {
        k,
        r,
        alpha_b,
        extra_cols,
        arrays,
        partition: partition.clone(),
        placements,
    })
}

impl IndexArrays {
    /// Cells of array `l`, `alpha_b` rows.
    pub fn array(&self, l: usize) -> &[Vec<Option<Pair>>] {
        &self.arrays[l]
    }

    pub fn row(&self, l: usize, i: usize) -> impl Iterator<Item = Pair> + '_ {
        self.arrays[l][i].iter().flatten().copied()
    }

    /// Scheduled pairs of array `l`, row `i`, with their column.
    pub fn extras(&self, l: usize, i: usize) -> impl Iterator<Item = (usize, Pair)> + '_ {
        self.arrays[l][i]
            .iter()
            .enumerate()
            .skip(self.k)
            .filter_map(|(c, cell)| cell.map(|p| (c, p)))
    }

    pub fn home_rows(&self, j: usize) -> &[usize] {
        self.partition.nodes[j].home_rows()
    }

    pub fn is_home(&self, j: usize, row: usize) -> bool {
        self.home_rows(j).binary_search(&row).is_ok()
    }

    /// Where node `j`'s scheduled pairs live, ordered by (array, row).
    pub fn placements(&self, j: usize) -> &[Placement] {
        &self.placements[j]
    }

    /// Source row of node `j`'s pair hosted in array `l`, row `i`.
    pub fn hosted(&self, l: usize, i: usize, j: usize) -> Option<usize> {
        self.extras(l, i).find(|(_, (_, node))| *node == j).map(|(_, (src, _))| src)
    }

    /// Checks every structural invariant; returns a description of the first violation.
    pub fn check(&self) -> std::result::Result<(), String> {
        let (k, r, a) = (self.k, self.r, self.alpha_b);
        if self.arrays.len() != r {
            return Err(format!("{} arrays, expected {r}", self.arrays.len()));
        }
        for (l, arr) in self.arrays.iter().enumerate() {
            let width = if l == 0 { k } else { k + self.extra_cols };
            if arr.len() != a {
                return Err(format!("array {l} has {} rows", arr.len()));
            }
            for (i, row) in arr.iter().enumerate() {
                if row.len() != width {
                    return Err(format!("array {l} row {i} has width {}", row.len()));
                }
                for (j, cell) in row.iter().take(k).enumerate() {
                    if *cell != Some((i, j)) {
                        return Err(format!("array {l} cell ({i},{j}) is {cell:?}"));
                    }
                }
                for (src, node) in row.iter().skip(k).flatten() {
                    if *src == i {
                        return Err(format!("array {l} row {i} repeats ({src},{node})"));
                    }
                }
            }
        }
        let ceil = ceil_div(a, r);
        for (j, node) in self.partition.nodes.iter().enumerate() {
            if node.subsets.len() != r || node.home >= r {
                return Err(format!("node {j}: {} subsets, home {}", node.subsets.len(), node.home));
            }
            let mut seen = vec![false; a];
            for s in &node.subsets {
                for &i in s {
                    if i >= a || seen[i] {
                        return Err(format!("node {j}: row {i} repeated or out of range"));
                    }
                    seen[i] = true;
                }
            }
            if seen.iter().any(|s| !s) {
                return Err(format!("node {j}: subsets do not cover all rows"));
            }
            let sizes: Vec<usize> = node.subsets.iter().map(Vec::len).collect();
            let largest = *sizes.iter().max().unwrap();
            if !sizes.contains(&ceil) || sizes[node.home] != largest {
                return Err(format!("node {j}: subset sizes {sizes:?}"));
            }
            // every non-home row appears exactly once, inside a home row
            let mut placed: BTreeMap<usize, usize> = BTreeMap::new();
            let mut used = vec![vec![false; a]; r];
            for p in &self.placements[j] {
                if !self.is_home(j, p.row) {
                    return Err(format!("node {j}: pair {} placed outside home rows", p.source_row));
                }
                if used[p.array][p.row] {
                    return Err(format!("node {j}: two pairs in array {} row {}", p.array, p.row));
                }
                used[p.array][p.row] = true;
                if !node.scheduled_into(p.array).contains(&p.source_row) {
                    return Err(format!("node {j}: row {} in wrong array {}", p.source_row, p.array));
                }
                *placed.entry(p.source_row).or_default() += 1;
            }
            for i in 0..a {
                let expect = usize::from(!self.is_home(j, i));
                if placed.get(&i).copied().unwrap_or(0) != expect {
                    return Err(format!("node {j}: row {i} scheduled {:?} times", placed.get(&i)));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digit_partition_small() {
        let p = build_partition(4, 2, 4).unwrap();
        assert_eq!(p.strategy, Strategy::Digit { m: 2 });
        assert_eq!(p.nodes[0].subsets, vec![vec![0, 1], vec![2, 3]]);
        assert_eq!(p.nodes[0].home, 0);
        assert_eq!(p.nodes[1].home, 1);
        // second group keys on the low digit
        assert_eq!(p.nodes[2].subsets, vec![vec![0, 2], vec![1, 3]]);
    }

    #[test]
    fn two_row_partition_is_singletons() {
        let p = build_partition(4, 2, 2).unwrap();
        for node in &p.nodes {
            let mut s = node.subsets.clone();
            s.sort();
            assert_eq!(s, vec![vec![0], vec![1]]);
        }
    }

    #[test]
    fn six_four_alpha8_arrays() {
        let ia = build_index_arrays(&build_partition(4, 2, 4).unwrap()).unwrap();
        assert_eq!(ia.array(0).len(), 4);
        assert_eq!(ia.array(0)[0].len(), 4);
        assert_eq!(ia.array(1)[0].len(), 6);
        let scheduled: usize = (0..4).map(|i| ia.extras(1, i).count()).sum();
        assert_eq!(scheduled, 8);
        for j in 0..4 {
            assert_eq!(ia.placements(j).len(), 2);
        }
        // node 0 recovers rows 2,3 from P_1 rows 0,1
        assert_eq!(ia.hosted(1, 0, 0), Some(2));
        assert_eq!(ia.hosted(1, 1, 0), Some(3));
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(ia.array(0)[i][j], Some((i, j)));
            }
        }
    }

    #[test]
    fn six_four_alpha4_arrays() {
        let ia = build_index_arrays(&build_partition(4, 2, 2).unwrap()).unwrap();
        assert_eq!(ia.array(1).len(), 2);
        assert_eq!(ia.array(1)[0].len(), 6);
        let scheduled: usize = (0..2).map(|i| ia.extras(1, i).count()).sum();
        assert_eq!(scheduled, 4);
    }

    #[test]
    fn block_strategy_for_other_sizes() {
        let p = build_partition(6, 3, 5).unwrap();
        assert_eq!(p.strategy, Strategy::Blocks);
        for node in &p.nodes {
            assert_eq!(node.home_rows().len(), 2);
        }
        build_index_arrays(&p).unwrap();
    }

    #[test]
    fn flow_saturates_when_capacity_allows() {
        let mut f = Flow::new(4);
        f.edge(0, 1, 2);
        f.edge(0, 2, 1);
        f.edge(1, 3, 1);
        f.edge(2, 3, 5);
        f.edge(1, 2, 1);
        assert_eq!(f.run(0, 3), 3);
    }

    #[test]
    fn small_sweep_satisfies_invariants() {
        for r in 2..=4 {
            for k in 2..=8 {
                let max = crate::params::max_alpha_b(k, r).min(20);
                for a in 2..=max {
                    let part = build_partition(k, r, a).unwrap_or_else(|e| panic!("({k},{r},{a}): {e}"));
                    let ia = build_index_arrays(&part).unwrap_or_else(|e| panic!("({k},{r},{a}): {e}"));
                    ia.check().unwrap();
                }
            }
        }
    }

    #[test]
    fn deterministic() {
        let a = build_index_arrays(&build_partition(10, 3, 7).unwrap()).unwrap();
        let b = build_index_arrays(&build_partition(10, 3, 7).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_dims() {
        assert!(build_partition(4, 2, 5).is_err());
        assert!(build_partition(4, 2, 1).is_err());
    }

    #[test]
    fn check_catches_tampering() {
        let part = build_partition(6, 3, 5).unwrap();
        let mut bad = part.clone();
        // move a scheduled row out of its node's home
        let h = bad.hosts[0][0];
        let outside = (0..5).find(|&i| !bad.nodes[0].home_rows().contains(&i)).unwrap();
        bad.hosts[0][0] = Host { row: outside, ..h };
        assert!(build_index_arrays(&bad).is_err());
    }
}
