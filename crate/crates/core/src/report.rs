//! Benchmark reports: average repair traffic per code, as fractions of the
//! stripe size `M = k * alpha`, next to published reference values.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::gf::{FieldSpec, Symbol};
use crate::params::{CodeParams, DEFAULT_SEED, DEFAULT_THETA};
use crate::plus::PlusCode;
use crate::repair::{measure_bandwidth, optimal_bandwidth, systematic_bounds, Role};
use crate::verifier::MdsMode;

/// Field width used when a bench entry does not name one.
pub const BENCH_FIELD_W: u8 = 16;

/// One line of a params file.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchEntry {
    pub n: usize,
    pub k: usize,
    pub alpha_base: usize,
    #[serde(default)]
    pub field_w: Option<u8>,
    #[serde(default)]
    pub poly: Option<u32>,
    #[serde(default)]
    pub theta: Option<u16>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl BenchEntry {
    pub fn new(n: usize, k: usize, alpha_base: usize) -> Self {
        BenchEntry {
            n,
            k,
            alpha_base,
            field_w: None,
            poly: None,
            theta: None,
            seed: None,
        }
    }

    pub fn params(&self) -> Result<CodeParams> {
        let w = self.field_w.unwrap_or(BENCH_FIELD_W);
        let field = match self.poly {
            Some(poly) => FieldSpec::new(w, poly)?,
            None => FieldSpec::with_default_poly(w)?,
        };
        CodeParams::new(
            self.n,
            self.k,
            self.alpha_base,
            field,
            self.theta.map_or(DEFAULT_THETA, Symbol),
            self.seed.unwrap_or(DEFAULT_SEED),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportParams {
    pub n: usize,
    pub k: usize,
    pub alpha_base: usize,
    pub alpha: usize,
    pub field_w: u8,
    pub poly: u32,
    pub theta: u16,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeRow {
    pub node: usize,
    pub role: Role,
    pub symbols_read: usize,
    pub fraction: f64,
}

/// Average repair traffic of other codes at one `(n, k)` point, as
/// fractions of `M`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Published {
    pub piggyback2: f64,
    pub hashtag: f64,
    pub hashtag_plus: f64,
}

/// Reference series in percent: `(n, k, piggyback 2, hashtag, hashtag+)`.
pub const PUBLISHED: [(usize, usize, f64, f64, f64); 8] = [
    (12, 10, 100.0, 65.83, 58.3),
    (14, 12, 100.0, 64.86, 58.31),
    (15, 12, 68.0, 60.936, 48.72),
    (12, 9, 70.0, 60.88, 46.065),
    (14, 10, 66.0, 57.5, 38.21),
    (16, 12, 63.5, 55.0, 37.8125),
    (20, 15, 62.0, 55.125, 36.4575),
    (24, 18, 60.0, 55.208335, 35.53),
];

pub fn published(n: usize, k: usize) -> Option<Published> {
    PUBLISHED
        .iter()
        .find(|p| (p.0, p.1) == (n, k))
        .map(|&(_, _, pb, ht, hp)| Published {
            piggyback2: pb / 100.0,
            hashtag: ht / 100.0,
            hashtag_plus: hp / 100.0,
        })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub params: ReportParams,
    pub mds: MdsMode,
    pub per_node: Vec<NodeRow>,
    pub avg_fraction: f64,
    pub systematic_avg: f64,
    pub parity_avg: f64,
    pub eq1_optimum_fraction: f64,
    /// Systematic read-count interval as fractions of `M`.
    pub prop1_bounds: [f64; 2],
    pub published: Option<Published>,
}

pub fn bench_code(code: &PlusCode) -> Result<BenchReport> {
    let p = code.params();
    let m = p.stripe_symbols();
    let bw = measure_bandwidth(code)?;
    let bounds = systematic_bounds(p.n, p.k, p.r(), p.alpha())?;
    let frac = |x: usize| x as f64 / m as f64;
    Ok(BenchReport {
        params: ReportParams {
            n: p.n,
            k: p.k,
            alpha_base: p.alpha_b,
            alpha: p.alpha(),
            field_w: p.field.w,
            poly: p.field.poly,
            theta: p.theta.0,
            seed: p.seed,
        },
        mds: code.base().mds.mode,
        per_node: bw
            .per_node
            .iter()
            .map(|b| NodeRow {
                node: b.node,
                role: b.role,
                symbols_read: b.symbols_transferred,
                fraction: b.fraction_of_m,
            })
            .collect(),
        avg_fraction: bw.avg_fraction,
        systematic_avg: bw.systematic_avg,
        parity_avg: bw.parity_avg,
        eq1_optimum_fraction: optimal_bandwidth(p.n, p.k, m)? / m as f64,
        prop1_bounds: [frac(bounds.lower), frac(bounds.upper)],
        published: published(p.n, p.k),
    })
}

pub fn bench(entry: &BenchEntry) -> Result<BenchReport> {
    bench_code(&PlusCode::build(&entry.params()?)?)
}

/// Flat CSV header matching [`csv_row`].
pub const CSV_HEADER: [&str; 17] = [
    "n",
    "k",
    "alpha_base",
    "alpha",
    "field_w",
    "poly",
    "theta",
    "seed",
    "mds",
    "avg_fraction",
    "systematic_avg",
    "parity_avg",
    "eq1_optimum_fraction",
    "prop1_lower",
    "prop1_upper",
    "published_hashtag_plus",
    "max_systematic_reads",
];

pub fn csv_row(r: &BenchReport) -> Vec<String> {
    let p = &r.params;
    let max_sys = r
        .per_node
        .iter()
        .filter(|x| x.role == Role::Systematic)
        .map(|x| x.symbols_read)
        .max()
        .unwrap_or(0);
    vec![
        p.n.to_string(),
        p.k.to_string(),
        p.alpha_base.to_string(),
        p.alpha.to_string(),
        p.field_w.to_string(),
        p.poly.to_string(),
        p.theta.to_string(),
        p.seed.to_string(),
        match r.mds {
            MdsMode::Verified => "verified".into(),
            MdsMode::Sampled => "sampled".into(),
        },
        format!("{:.6}", r.avg_fraction),
        format!("{:.6}", r.systematic_avg),
        format!("{:.6}", r.parity_avg),
        format!("{:.6}", r.eq1_optimum_fraction),
        format!("{:.6}", r.prop1_bounds[0]),
        format!("{:.6}", r.prop1_bounds[1]),
        r.published.map_or(String::new(), |x| format!("{:.6}", x.hashtag_plus)),
        max_sys.to_string(),
    ]
}
