//! Single-node repair planning, execution and bandwidth accounting.
//!
//! A plan is a deduplicated list of helper reads plus an ordered list of
//! solve steps. Systematic node `j` is rebuilt in two phases: rows of its
//! home subset come from the unpaired `P_0` block of every instance, and
//! the remaining rows come from the raw parities of arrays `P_1..P_{r-1}`
//! that host them, unpaired from the stored pairs. A parity node is rebuilt
//! from the systematic data of its own instance plus one stored block from
//! every other parity node.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf::{add, Symbol};
use crate::params::ceil_div;
use crate::plus::{home_of, raw_at, PlusCode, RawBlock};
use crate::schedule::IndexArrays;

/// One symbol read from a helper: row `row` of instance `instance` on `node`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ReadLoc {
    pub node: usize,
    pub instance: usize,
    pub row: usize,
}

/// How a raw parity symbol is taken out of stored parity symbols.
/// Blocks are named `(l, i)`: parity node `k + l`, instance `i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RawSource {
    /// The diagonal block stores the raw parity unmixed.
    Unpaired { block: (usize, usize) },
    /// Both blocks of a pair were read; solve the 2x2 system.
    PairBoth { block: (usize, usize), mirror: (usize, usize) },
    /// One block of a pair was read and the other raw parity is known.
    PairStrip { block: (usize, usize) },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStep {
    /// Re-encode a raw parity symbol from known data.
    ComputeRaw { raw: RawBlock, row: usize },
    ExtractRaw { raw: RawBlock, row: usize, source: RawSource },
    /// Solve a raw parity equation for its single unknown data symbol.
    RecoverData {
        raw: RawBlock,
        row: usize,
        node: usize,
        target_row: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Systematic,
    Parity,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairPlan {
    pub failed_node: usize,
    pub role: Role,
    /// Sorted, no duplicates.
    pub reads: Vec<ReadLoc>,
    pub steps: Vec<SolveStep>,
}

impl RepairPlan {
    pub fn symbols_accessed(&self) -> usize {
        self.reads.len()
    }

    /// Every accessed symbol is shipped as is.
    pub fn symbols_transferred(&self) -> usize {
        self.reads.len()
    }

    /// Number of symbols read from each helper node.
    pub fn reads_per_node(&self, n: usize) -> Vec<usize> {
        let mut out = vec![0; n];
        for r in &self.reads {
            out[r.node] += 1;
        }
        out
    }
}

/// Lower bound on repair traffic, `(M/k)(n-1)/(n-k)` symbols.
pub fn optimal_bandwidth(n: usize, k: usize, m: usize) -> Result<f64> {
    if k == 0 || n <= k || !m.is_multiple_of(k) {
        return Err(Error::InvalidParams(format!(
            "optimal bandwidth needs n > k > 0 and k | M (n={n}, k={k}, M={m})"
        )));
    }
    Ok((m / k) as f64 * (n - 1) as f64 / (n - k) as f64)
}

/// Read-count interval for systematic repair, in symbols.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystematicBounds {
    pub lower: usize,
    pub upper: usize,
    pub alpha: usize,
}

impl SystematicBounds {
    pub fn contains(&self, reads: usize) -> bool {
        (self.lower..=self.upper).contains(&reads)
    }

    /// Bounds in node capacities (`alpha` symbols each).
    pub fn node_units(&self) -> (f64, f64) {
        let a = self.alpha as f64;
        (self.lower as f64 / a, self.upper as f64 / a)
    }
}

fn check_nra(n: usize, r: usize, alpha: usize) -> Result<()> {
    if r < 2 || n <= r || alpha == 0 {
        return Err(Error::InvalidParams(format!(
            "bounds need n > r >= 2 and alpha > 0 (n={n}, r={r}, alpha={alpha})"
        )));
    }
    Ok(())
}

pub fn systematic_bounds(n: usize, k: usize, r: usize, alpha: usize) -> Result<SystematicBounds> {
    check_nra(n, r, alpha)?;
    if n != k + r {
        return Err(Error::InvalidParams(format!("n = {n} is not k + r = {}", k + r)));
    }
    let c = ceil_div(alpha, r);
    let lower = (n - 1) * c;
    Ok(SystematicBounds {
        lower,
        upper: lower + (r - 1) * c * ceil_div(k, r),
        alpha,
    })
}

/// Parity repair traffic in node capacities.
pub fn parity_bandwidth(n: usize, r: usize, alpha: usize) -> Result<f64> {
    check_nra(n, r, alpha)?;
    Ok(parity_read_symbols(n, r, alpha) as f64 / alpha as f64)
}

pub fn parity_read_symbols(n: usize, r: usize, alpha: usize) -> usize {
    (n - 1) * ceil_div(alpha, r)
}

#[derive(Default)]
struct Reads {
    list: Vec<ReadLoc>,
    seen: HashSet<ReadLoc>,
}

impl Reads {
    fn add(&mut self, node: usize, instance: usize, row: usize) {
        let loc = ReadLoc { node, instance, row };
        if self.seen.insert(loc) {
            self.list.push(loc);
        }
    }

    fn has(&self, node: usize, instance: usize, row: usize) -> bool {
        self.seen.contains(&ReadLoc { node, instance, row })
    }

    fn finish(mut self) -> Vec<ReadLoc> {
        self.list.sort_unstable();
        self.list
    }
}

pub fn plan_systematic_repair(code: &PlusCode, j: usize) -> Result<RepairPlan> {
    if j >= code.params().k {
        return Err(Error::InvalidNode { node: j });
    }
    let (reads, steps) = systematic_plan(&code.base().indexes, j);
    Ok(RepairPlan {
        failed_node: j,
        role: Role::Systematic,
        reads,
        steps,
    })
}

/// Read count of systematic node `j`'s repair under the given index arrays.
pub(crate) fn systematic_read_count(ia: &IndexArrays, j: usize) -> usize {
    systematic_plan(ia, j).0.len()
}

fn systematic_plan(ia: &IndexArrays, j: usize) -> (Vec<ReadLoc>, Vec<SolveStep>) {
    let (k, r) = (ia.k, ia.r);
    let home = ia.home_rows(j);
    let mut reads = Reads::default();
    let mut steps = Vec::new();

    for v in 0..r {
        for &s in home {
            for other in (0..k).filter(|&o| o != j) {
                reads.add(other, v, s);
            }
            reads.add(k + v, v, s);
            let raw = RawBlock { instance: v, parity: 0 };
            steps.push(SolveStep::ExtractRaw {
                raw,
                row: s,
                source: RawSource::Unpaired { block: (v, v) },
            });
            steps.push(SolveStep::RecoverData {
                raw,
                row: s,
                node: j,
                target_row: s,
            });
        }
    }

    // foreign scheduled symbols of array `l`, row `s` that j does not already hold
    let foreign = |l: usize, s: usize| -> Vec<(usize, usize)> {
        ia.extras(l, s)
            .map(|(_, pair)| pair)
            .filter(|&(row, node)| node != j && !ia.is_home(j, row))
            .collect()
    };

    let mut known: HashSet<(RawBlock, usize)> = HashSet::new();
    for v in 0..r {
        for pl in ia.placements(j) {
            let (rho, s) = (pl.array, pl.row);
            let raw = RawBlock { instance: v, parity: rho };
            if !known.contains(&(raw, s)) {
                let l = home_of(r, raw);
                let mirror = raw_at(r, v, l);
                let own_loc = (k + l, v, s);
                let mirror_loc = (k + v, l, s);
                let unread = |locs: &[(usize, usize, usize)]| {
                    locs.iter().filter(|&&(a, b, c)| !reads.has(a, b, c)).count()
                };
                let cost_both = unread(&[own_loc, mirror_loc]);
                let strip = if ia.hosted(mirror.parity, s, j).is_none() {
                    let block = if reads.has(mirror_loc.0, mirror_loc.1, mirror_loc.2) {
                        (v, l)
                    } else {
                        (l, v)
                    };
                    let stored = unread(&[if block == (l, v) { own_loc } else { mirror_loc }]);
                    let extra = foreign(mirror.parity, s)
                        .into_iter()
                        .filter(|&(row, node)| !reads.has(node, l, row))
                        .count();
                    Some((stored + extra, block))
                } else {
                    None
                };
                match strip {
                    Some((cost, block)) if cost < cost_both => {
                        let loc = if block == (l, v) { own_loc } else { mirror_loc };
                        reads.add(loc.0, loc.1, loc.2);
                        for (row, node) in foreign(mirror.parity, s) {
                            reads.add(node, l, row);
                        }
                        steps.push(SolveStep::ComputeRaw { raw: mirror, row: s });
                        steps.push(SolveStep::ExtractRaw {
                            raw,
                            row: s,
                            source: RawSource::PairStrip { block },
                        });
                    }
                    _ => {
                        reads.add(own_loc.0, own_loc.1, own_loc.2);
                        reads.add(mirror_loc.0, mirror_loc.1, mirror_loc.2);
                        steps.push(SolveStep::ExtractRaw {
                            raw,
                            row: s,
                            source: RawSource::PairBoth {
                                block: (l, v),
                                mirror: (v, l),
                            },
                        });
                    }
                }
                known.insert((raw, s));
                known.insert((mirror, s));
            }
            for (row, node) in foreign(rho, s) {
                reads.add(node, v, row);
            }
            steps.push(SolveStep::RecoverData {
                raw,
                row: s,
                node: j,
                target_row: pl.source_row,
            });
        }
    }

    (reads.finish(), steps)
}

/// `l` is the parity index, so the failed node is `k + l`.
pub fn plan_parity_repair(code: &PlusCode, l: usize) -> Result<RepairPlan> {
    let p = code.params();
    let (k, r, ab) = (p.k, p.r(), p.alpha_b);
    if l >= r {
        return Err(Error::InvalidNode { node: k + l });
    }
    let mut reads = Reads::default();
    for j in 0..k {
        for s in 0..ab {
            reads.add(j, l, s);
        }
    }
    for m in (0..r).filter(|&m| m != l) {
        for s in 0..ab {
            reads.add(k + m, l, s);
        }
    }
    let mut steps = Vec::new();
    for i in 0..r {
        for s in 0..ab {
            if i == l {
                steps.push(SolveStep::ComputeRaw { raw: code.raw_at(l, l), row: s });
            } else {
                // block (i, l) holds raw(i, l), computable from instance l, mixed with raw(l, i)
                steps.push(SolveStep::ComputeRaw { raw: code.raw_at(i, l), row: s });
                steps.push(SolveStep::ExtractRaw {
                    raw: code.raw_at(l, i),
                    row: s,
                    source: RawSource::PairStrip { block: (i, l) },
                });
            }
        }
    }
    Ok(RepairPlan {
        failed_node: k + l,
        role: Role::Parity,
        reads: reads.finish(),
        steps,
    })
}

pub fn plan_repair(code: &PlusCode, node: usize) -> Result<RepairPlan> {
    let p = code.params();
    if node < p.k {
        plan_systematic_repair(code, node)
    } else if node < p.n {
        plan_parity_repair(code, node - p.k)
    } else {
        Err(Error::InvalidNode { node })
    }
}

struct Executor<'a> {
    code: &'a PlusCode,
    read: HashMap<ReadLoc, Symbol>,
    /// `(instance, row, node)`
    data: HashMap<(usize, usize, usize), Symbol>,
    raw: HashMap<(RawBlock, usize), Symbol>,
}

fn inconsistent(what: String) -> Error {
    Error::SingularRepairSystem(what)
}

impl Executor<'_> {
    fn stored(&self, block: (usize, usize), row: usize) -> Result<Symbol> {
        let k = self.code.params().k;
        let loc = ReadLoc {
            node: k + block.0,
            instance: block.1,
            row,
        };
        self.read
            .get(&loc)
            .copied()
            .ok_or_else(|| inconsistent(format!("{loc:?} used but not in the read list")))
    }

    fn raw(&self, raw: RawBlock, row: usize) -> Result<Symbol> {
        self.raw
            .get(&(raw, row))
            .copied()
            .ok_or_else(|| inconsistent(format!("raw {raw:?} row {row} unknown")))
    }

    fn step(&mut self, step: &SolveStep) -> Result<()> {
        let code = self.code;
        let f = code.field();
        match *step {
            SolveStep::ComputeRaw { raw, row } => {
                let v = code
                    .raw_symbol(raw, row, |r2, n2| self.data.get(&(raw.instance, r2, n2)).copied())
                    .ok_or_else(|| inconsistent(format!("raw {raw:?} row {row} has unknown terms")))?;
                self.raw.insert((raw, row), v);
            }
            SolveStep::ExtractRaw { raw, row, source } => match source {
                RawSource::Unpaired { block } => {
                    let v = self.stored(block, row)?;
                    self.raw.insert((raw, row), v);
                }
                RawSource::PairBoth { block: (l, i), mirror } => {
                    let (s1, s2) = (self.stored((l, i), row)?, self.stored(mirror, row)?);
                    let (x, y) = code.unpair(l, i, &[s1], &[s2])?;
                    self.raw.insert((code.raw_at(l, i), row), x[0]);
                    self.raw.insert((code.raw_at(i, l), row), y[0]);
                }
                RawSource::PairStrip { block: (l, i) } => {
                    // stored = t * raw(l, i) + raw(i, l)
                    let sv = self.stored((l, i), row)?;
                    let (own, other) = (code.raw_at(l, i), code.raw_at(i, l));
                    let t = code.theta_coeff(l, i);
                    let v = if raw == own {
                        f.div(add(sv, self.raw(other, row)?), t)?
                    } else if raw == other {
                        add(sv, f.mul(t, self.raw(own, row)?))
                    } else {
                        return Err(inconsistent(format!("block ({l},{i}) does not hold {raw:?}")));
                    };
                    self.raw.insert((raw, row), v);
                }
            },
            SolveStep::RecoverData {
                raw,
                row,
                node,
                target_row,
            } => {
                let mut acc = self.raw(raw, row)?;
                let mut coeff = None;
                for t in code.base().tensor.row(raw.parity, row) {
                    if t.row == target_row && t.node == node {
                        coeff = Some(t.coeff);
                        continue;
                    }
                    let x = self.data.get(&(raw.instance, t.row, t.node)).ok_or_else(|| {
                        inconsistent(format!("data ({}, {}) of instance {} unknown", t.row, t.node, raw.instance))
                    })?;
                    acc = add(acc, f.mul(t.coeff, *x));
                }
                let c = coeff.ok_or_else(|| inconsistent(format!("target absent from {raw:?} row {row}")))?;
                self.data.insert((raw.instance, target_row, node), f.div(acc, c)?);
            }
        }
        Ok(())
    }
}

/// Runs `plan` against the surviving columns; `shards[m]` is node `m`'s
/// column or `None` if unavailable.
pub fn execute_repair(code: &PlusCode, plan: &RepairPlan, shards: &[Option<&[Symbol]>]) -> Result<Vec<Symbol>> {
    let p = code.params();
    let (k, r, ab, alpha) = (p.k, p.r(), p.alpha_b, p.alpha());
    let mut ex = Executor {
        code,
        read: HashMap::with_capacity(plan.reads.len()),
        data: HashMap::new(),
        raw: HashMap::new(),
    };
    for &loc in &plan.reads {
        let missing = Error::MissingRead {
            node: loc.node,
            instance: loc.instance,
            row: loc.row,
        };
        if loc.node == plan.failed_node {
            return Err(missing);
        }
        let col = shards.get(loc.node).copied().flatten().ok_or(missing.clone())?;
        let v = *col.get(loc.instance * ab + loc.row).ok_or(missing)?;
        ex.read.insert(loc, v);
        if loc.node < k {
            ex.data.insert((loc.instance, loc.row, loc.node), v);
        }
    }
    for step in &plan.steps {
        ex.step(step)?;
    }
    let mut out = Vec::with_capacity(alpha);
    if plan.failed_node < k {
        let j = plan.failed_node;
        for i in 0..r {
            for s in 0..ab {
                let v = ex
                    .data
                    .get(&(i, s, j))
                    .ok_or_else(|| inconsistent(format!("row {s} of instance {i} not recovered")))?;
                out.push(*v);
            }
        }
    } else {
        let l = plan.failed_node - k;
        for i in 0..r {
            for s in 0..ab {
                let own = ex.raw(code.raw_at(l, i), s)?;
                let partner = if i == l { Symbol::ZERO } else { ex.raw(code.raw_at(i, l), s)? };
                out.push(code.combine(l, i, own, partner));
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeBandwidth {
    pub node: usize,
    pub role: Role,
    pub symbols_accessed: usize,
    pub symbols_transferred: usize,
    /// Transferred symbols over `M = k * alpha`.
    pub fraction_of_m: f64,
}

impl NodeBandwidth {
    pub fn from_plan(code: &PlusCode, plan: &RepairPlan) -> Self {
        NodeBandwidth {
            node: plan.failed_node,
            role: plan.role,
            symbols_accessed: plan.symbols_accessed(),
            symbols_transferred: plan.symbols_transferred(),
            fraction_of_m: plan.symbols_transferred() as f64 / code.params().stripe_symbols() as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandwidthReport {
    pub per_node: Vec<NodeBandwidth>,
    pub avg_fraction: f64,
    pub systematic_avg: f64,
    pub parity_avg: f64,
}

fn mean<'a>(xs: impl Iterator<Item = &'a NodeBandwidth>) -> f64 {
    let (sum, count) = xs.fold((0.0, 0usize), |(s, c), b| (s + b.fraction_of_m, c + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

impl BandwidthReport {
    pub fn from_nodes(_code: &PlusCode, per_node: Vec<NodeBandwidth>) -> Self {
        BandwidthReport {
            avg_fraction: mean(per_node.iter()),
            systematic_avg: mean(per_node.iter().filter(|b| b.role == Role::Systematic)),
            parity_avg: mean(per_node.iter().filter(|b| b.role == Role::Parity)),
            per_node,
        }
    }

    pub fn access_optimal(&self) -> bool {
        self.per_node.iter().all(|b| b.symbols_accessed == b.symbols_transferred)
    }
}

/// Plans the repair of every node and tallies the reads.
pub fn measure_bandwidth(code: &PlusCode) -> Result<BandwidthReport> {
    let per_node = (0..code.params().n)
        .map(|m| plan_repair(code, m).map(|plan| NodeBandwidth::from_plan(code, &plan)))
        .collect::<Result<Vec<_>>>()?;
    Ok(BandwidthReport::from_nodes(code, per_node))
}
