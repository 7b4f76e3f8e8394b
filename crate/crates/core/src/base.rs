//! The base HashTag code: index arrays plus nonzero coefficients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::Generator;
use crate::gf::{add, Field, Symbol};
use crate::params::CodeParams;
use crate::schedule::{build_index_arrays, build_partition, IndexArrays};
use crate::verifier::{verify_mds_for_stripe, MdsReport};

/// Seeds tried before giving up on a coefficient search.
pub const RETRY_CAP: u32 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Term {
    pub row: usize,
    pub node: usize,
    pub coeff: Symbol,
}

/// Coefficients of every base parity symbol, `terms[l][i]` for array `l`, row `i`,
/// in the column order of the index array.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoefficientTensor {
    pub terms: Vec<Vec<Vec<Term>>>,
}

impl CoefficientTensor {
    pub fn row(&self, l: usize, i: usize) -> &[Term] {
        &self.terms[l][i]
    }

    /// Coefficient of data symbol `(row, node)` in parity `(l, i)`, if present.
    pub fn coeff_of(&self, l: usize, i: usize, row: usize, node: usize) -> Option<Symbol> {
        self.terms[l][i]
            .iter()
            .find(|t| t.row == row && t.node == node)
            .map(|t| t.coeff)
    }
}

#[derive(Clone, Debug)]
pub struct BaseCode {
    pub params: CodeParams,
    pub field: Field,
    pub indexes: IndexArrays,
    pub tensor: CoefficientTensor,
    /// Which derived seed produced the accepted tensor.
    pub attempt: u32,
    pub mds: MdsReport,
}

/// Seed for retry `attempt`; attempt 0 uses the seed itself.
pub fn derive_seed(seed: u64, attempt: u32) -> u64 {
    if attempt == 0 {
        return seed;
    }
    // splitmix64 step
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(attempt as u64));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn draw_tensor(params: &CodeParams, indexes: &IndexArrays, seed: u64) -> CoefficientTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = params.field.order() as u32;
    let terms = (0..params.r())
        .map(|l| {
            (0..params.alpha_b)
                .map(|i| {
                    indexes
                        .row(l, i)
                        .map(|(row, node)| Term {
                            row,
                            node,
                            coeff: Symbol(rng.gen_range(1..q) as u16),
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    CoefficientTensor { terms }
}

/// Generator of a base code with the given tensor.
pub fn base_generator(params: &CodeParams, tensor: &CoefficientTensor) -> Generator {
    let sub = params.alpha_b;
    let mut rows = Vec::with_capacity(params.r() * sub);
    for l in 0..params.r() {
        for i in 0..sub {
            rows.push(
                tensor
                    .row(l, i)
                    .iter()
                    .map(|t| (t.node * sub + t.row, t.coeff))
                    .collect(),
            );
        }
    }
    Generator::new(params.n, params.k, sub, rows)
}

/// Seeded search for nonzero coefficients making the base code MDS.
pub fn assign_coefficients(params: &CodeParams, indexes: IndexArrays) -> Result<BaseCode> {
    params.validate()?;
    let field = Field::new(params.field);
    for attempt in 0..RETRY_CAP {
        let tensor = draw_tensor(params, &indexes, derive_seed(params.seed, attempt));
        let report = verify_mds_for_stripe(&field, &base_generator(params, &tensor), params.stripe_symbols());
        if report.passed() {
            return Ok(BaseCode {
                params: *params,
                field,
                indexes,
                tensor,
                attempt,
                mds: report,
            });
        }
    }
    let q = params.field.order();
    let threshold = params.field_threshold();
    if q < threshold {
        Err(Error::FieldTooSmall {
            attempts: RETRY_CAP,
            q,
            threshold,
        })
    } else {
        Err(Error::MdsSearchExhausted { attempts: RETRY_CAP, q })
    }
}

impl BaseCode {
    /// Partition, index arrays and coefficient search in one go.
    pub fn build(params: &CodeParams) -> Result<Self> {
        params.validate()?;
        let partition = build_partition(params.k, params.r(), params.alpha_b)?;
        let indexes = build_index_arrays(&partition)?;
        assign_coefficients(params, indexes)
    }

    pub fn generator(&self) -> Generator {
        base_generator(&self.params, &self.tensor)
    }

    /// Evaluates parity `(l, i)` on `data` (node-major columns of `alpha_b` symbols).
    pub fn parity_symbol(&self, data: &[Vec<Symbol>], l: usize, i: usize) -> Symbol {
        self.tensor.row(l, i).iter().fold(Symbol::ZERO, |acc, t| {
            add(acc, self.field.mul(t.coeff, data[t.node][t.row]))
        })
    }

    /// `k` data columns of `alpha_b` symbols in, `r` parity columns out.
    pub fn encode(&self, data: &[Vec<Symbol>]) -> Result<Vec<Vec<Symbol>>> {
        check_block(data, self.params.k, self.params.alpha_b)?;
        Ok((0..self.params.r())
            .map(|l| (0..self.params.alpha_b).map(|i| self.parity_symbol(data, l, i)).collect())
            .collect())
    }
}

pub fn encode_base(code: &BaseCode, data: &[Vec<Symbol>]) -> Result<Vec<Vec<Symbol>>> {
    code.encode(data)
}

pub(crate) fn check_block(data: &[Vec<Symbol>], cols: usize, rows: usize) -> Result<()> {
    if data.len() != cols || data.iter().any(|c| c.len() != rows) {
        return Err(Error::DimensionMismatch {
            expected: format!("{cols} columns of {rows} symbols"),
            got: format!(
                "{} columns of {:?} symbols",
                data.len(),
                data.iter().map(Vec::len).collect::<Vec<_>>()
            ),
        });
    }
    Ok(())
}
