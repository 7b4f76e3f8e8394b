//! Brute-force oracles: MDS rank checks over k-subsets and exhaustive
//! single-node repair runs.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{encode, DataBlock};
use crate::error::Result;
use crate::generator::Generator;
use crate::gf::{Field, FieldMatrix, Symbol};
use crate::params::binomial;
use crate::plus::PlusCode;
use crate::repair::{self, BandwidthReport, NodeBandwidth, RepairPlan};

/// Above this many data symbols per stripe, MDS checks sample subsets.
pub const EXHAUSTIVE_LIMIT: usize = 512;
pub const SAMPLED_SUBSETS: usize = 1000;
const SAMPLE_SEED: u64 = 0x5EED_5AB5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MdsMode {
    Verified,
    Sampled,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MdsReport {
    pub mode: MdsMode,
    pub subsets_checked: usize,
    /// First rank-deficient k-subset, in enumeration order.
    pub failure: Option<Vec<usize>>,
}

impl MdsReport {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

pub fn rank(field: &Field, m: &FieldMatrix) -> usize {
    field.rank(m)
}

/// Lexicographic successor of a sorted k-combination of `[n]`.
pub(crate) fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// All k-subsets of `[n]` in lexicographic order.
pub fn k_subsets(n: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    let mut cur: Option<Vec<usize>> = Some((0..k).collect());
    std::iter::from_fn(move || {
        let out = cur.clone()?;
        let mut next = out.clone();
        cur = next_combination(&mut next, n).then_some(next);
        Some(out)
    })
}

/// Full rank of the generator restricted to `subset`?
pub fn subset_decodable(field: &Field, gen: &Generator, subset: &[usize]) -> bool {
    let missing: Vec<usize> = (0..gen.k).filter(|j| !subset.contains(j)).collect();
    if missing.is_empty() {
        return true;
    }
    let parity: Vec<usize> = subset.iter().copied().filter(|&j| j >= gen.k).collect();
    if parity.len() != missing.len() {
        return false;
    }
    let mut m = gen.submatrix(&parity, &missing);
    field.rank_in_place(&mut m) == m.rows()
}

fn sampled_subsets(n: usize, k: usize, count: usize) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(SAMPLE_SEED);
    let mut out: Vec<Vec<usize>> = (0..count)
        .map(|_| {
            let mut s = sample(&mut rng, n, k).into_vec();
            s.sort_unstable();
            s
        })
        .collect();
    out.sort();
    out.dedup();
    out
}

/// Rank check of every k-subset (or a fixed random sample when the
/// stripe is larger than [`EXHAUSTIVE_LIMIT`] symbols).
pub fn verify_mds(field: &Field, gen: &Generator) -> MdsReport {
    verify_mds_for_stripe(field, gen, gen.k * gen.sub)
}

/// As [`verify_mds`], with the sampling decision taken on `stripe`
/// data symbols (a base code stands for a stripe `r` times larger).
pub fn verify_mds_for_stripe(field: &Field, gen: &Generator, stripe: usize) -> MdsReport {
    let total = binomial(gen.n as u64, gen.k as u64);
    let sampled = stripe > EXHAUSTIVE_LIMIT && total > SAMPLED_SUBSETS as u64;
    let mut checked = 0;
    let mut check = |s: &[usize]| {
        checked += 1;
        subset_decodable(field, gen, s)
    };
    let failure = if sampled {
        sampled_subsets(gen.n, gen.k, SAMPLED_SUBSETS)
            .into_iter()
            .find(|s| !check(s))
    } else {
        k_subsets(gen.n, gen.k).find(|s| !check(s))
    };
    MdsReport {
        mode: if sampled { MdsMode::Sampled } else { MdsMode::Verified },
        subsets_checked: checked,
        failure,
    }
}

pub fn verify_plus_mds(code: &PlusCode) -> MdsReport {
    verify_mds(code.field(), code.generator())
}

/// One node's outcome in [`exhaustive_repair_check`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeCheck {
    pub node: usize,
    pub reads: usize,
    pub exact: bool,
    pub within_bounds: bool,
    pub access_optimal: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepairCheckReport {
    pub nodes: Vec<NodeCheck>,
    pub bandwidth: BandwidthReport,
}

impl RepairCheckReport {
    pub fn violations(&self) -> Vec<&NodeCheck> {
        self.nodes
            .iter()
            .filter(|c| !(c.exact && c.within_bounds && c.access_optimal))
            .collect()
    }

    pub fn passed(&self) -> bool {
        self.violations().is_empty()
    }
}

pub fn random_block<R: Rng>(rng: &mut R, code: &PlusCode) -> DataBlock {
    let q = code.field().order() as u32;
    let alpha = code.params().alpha();
    DataBlock::new(
        (0..code.params().k)
            .map(|_| (0..alpha).map(|_| Symbol(rng.gen_range(0..q) as u16)).collect())
            .collect(),
    )
}

/// Plans and executes the repair of every node on random data, checking
/// symbol-exact recovery and the read-count bounds.
pub fn exhaustive_repair_check(code: &PlusCode, seed: u64) -> Result<RepairCheckReport> {
    let p = code.params();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let block = random_block(&mut rng, code);
    let word = encode(code, &block)?;
    let sys = repair::systematic_bounds(p.n, p.k, p.r(), p.alpha())?;
    let par = repair::parity_read_symbols(p.n, p.r(), p.alpha());
    let mut nodes = Vec::with_capacity(p.n);
    let mut per_node = Vec::with_capacity(p.n);
    for node in 0..p.n {
        let plan: RepairPlan = repair::plan_repair(code, node)?;
        let shards: Vec<Option<&[Symbol]>> = (0..p.n)
            .map(|m| (m != node).then(|| word.node(m)))
            .collect();
        let got = repair::execute_repair(code, &plan, &shards)?;
        let reads = plan.reads.len();
        let within_bounds = if node < p.k {
            sys.contains(reads)
        } else {
            reads == par
        };
        nodes.push(NodeCheck {
            node,
            reads,
            exact: got == word.node(node),
            within_bounds,
            access_optimal: plan.symbols_accessed() == plan.symbols_transferred(),
        });
        per_node.push(NodeBandwidth::from_plan(code, &plan));
    }
    Ok(RepairCheckReport {
        nodes,
        bandwidth: BandwidthReport::from_nodes(code, per_node),
    })
}
