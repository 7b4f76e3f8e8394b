//! Stripe encode, any-k decode and byte/stripe conversion.

use crate::base::check_block;
use crate::error::{Error, Result};
use crate::gf::{add, FieldMatrix, Symbol};
use crate::plus::{Codeword, PlusCode};

/// One stripe of user data: `k` node columns of `alpha` symbols.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DataBlock {
    pub columns: Vec<Vec<Symbol>>,
}

impl DataBlock {
    pub fn new(columns: Vec<Vec<Symbol>>) -> Self {
        DataBlock { columns }
    }

    pub fn zeros(code: &PlusCode) -> Self {
        let p = code.params();
        DataBlock::new(vec![vec![Symbol::ZERO; p.alpha()]; p.k])
    }
}

pub fn encode(code: &PlusCode, block: &DataBlock) -> Result<Codeword> {
    code.encode(&block.columns)
}

/// Decoder for one fixed set of `k` surviving nodes. Building it inverts
/// the relevant generator submatrix once; decoding a stripe is then a
/// matrix-vector product.
#[derive(Clone, Debug)]
pub struct Decoder {
    nodes: Vec<usize>,
    missing: Vec<usize>,
    parity: Vec<usize>,
    inverse: Option<FieldMatrix>,
}

impl Decoder {
    pub fn new(code: &PlusCode, nodes: &[usize]) -> Result<Self> {
        let p = code.params();
        let mut uniq: Vec<usize> = Vec::with_capacity(p.k);
        for &m in nodes {
            if m >= p.n {
                return Err(Error::InvalidNode { node: m });
            }
            if !uniq.contains(&m) && uniq.len() < p.k {
                uniq.push(m);
            }
        }
        if uniq.len() < p.k {
            return Err(Error::NotEnoughShards {
                need: p.k,
                got: uniq.len(),
            });
        }
        uniq.sort_unstable();
        let missing: Vec<usize> = (0..p.k).filter(|j| !uniq.contains(j)).collect();
        let parity: Vec<usize> = uniq.iter().copied().filter(|&m| m >= p.k).collect();
        let inverse = if missing.is_empty() {
            None
        } else {
            let sub = code.generator().submatrix(&parity, &missing);
            Some(
                code.field()
                    .invert(&sub)
                    .map_err(|_| Error::SingularSubmatrix(uniq.clone()))?,
            )
        };
        Ok(Decoder {
            nodes: uniq,
            missing,
            parity,
            inverse,
        })
    }

    /// Nodes whose shards this decoder consumes, sorted.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn is_systematic(&self) -> bool {
        self.inverse.is_none()
    }

    /// `shard(m)` must return node `m`'s column for every `m` in [`Self::nodes`].
    pub fn decode<'a, F>(&self, code: &PlusCode, shard: F) -> Result<DataBlock>
    where
        F: Fn(usize) -> Option<&'a [Symbol]>,
    {
        let p = code.params();
        let alpha = p.alpha();
        let get = |m: usize| -> Result<&'a [Symbol]> {
            let s = shard(m).ok_or(Error::NotEnoughShards {
                need: p.k,
                got: self.nodes.len() - 1,
            })?;
            if s.len() != alpha {
                return Err(Error::DimensionMismatch {
                    expected: format!("{alpha} symbols for node {m}"),
                    got: s.len().to_string(),
                });
            }
            Ok(s)
        };
        let mut columns: Vec<Vec<Symbol>> = vec![Vec::new(); p.k];
        for &m in self.nodes.iter().filter(|&&m| m < p.k) {
            columns[m] = get(m)?.to_vec();
        }
        let Some(inv) = &self.inverse else {
            return Ok(DataBlock::new(columns));
        };
        let f = code.field();
        let g = code.generator();
        let mut rhs = Vec::with_capacity(self.parity.len() * alpha);
        for &pn in &self.parity {
            let stored = get(pn)?;
            for (row, &sv) in stored.iter().enumerate() {
                let mut acc = sv;
                for &(v, c) in g.parity_row(pn, row) {
                    let col = &columns[v / alpha];
                    if !col.is_empty() {
                        acc = add(acc, f.mul(c, col[v % alpha]));
                    }
                }
                rhs.push(acc);
            }
        }
        let x = inv.mul_vec(f, &rhs);
        for (pos, &j) in self.missing.iter().enumerate() {
            columns[j] = x[pos * alpha..(pos + 1) * alpha].to_vec();
        }
        Ok(DataBlock::new(columns))
    }
}

/// Decodes a stripe from `k` distinct `(node, column)` shards.
pub fn decode_any_k(code: &PlusCode, shards: &[(usize, Vec<Symbol>)]) -> Result<DataBlock> {
    let ids: Vec<usize> = shards.iter().map(|(m, _)| *m).collect();
    let dec = Decoder::new(code, &ids)?;
    let block = dec.decode(code, |m| {
        shards.iter().find(|(id, _)| *id == m).map(|(_, c)| c.as_slice())
    })?;
    check_block(&block.columns, code.params().k, code.params().alpha())?;
    Ok(block)
}

/// Symbols produced per input byte pattern: w=4 splits a byte into two
/// nibbles (low first), w=16 joins byte pairs little-endian.
pub fn bytes_to_symbols(bytes: &[u8], w: u8) -> Vec<Symbol> {
    match w {
        4 => bytes
            .iter()
            .flat_map(|&b| [Symbol((b & 0x0f) as u16), Symbol((b >> 4) as u16)])
            .collect(),
        8 => bytes.iter().map(|&b| Symbol(b as u16)).collect(),
        16 => bytes
            .chunks(2)
            .map(|c| Symbol(u16::from_le_bytes([c[0], c.get(1).copied().unwrap_or(0)])))
            .collect(),
        _ => panic!("unsupported width {w}"),
    }
}

/// Inverse of [`bytes_to_symbols`]; odd symbol counts pad with zero.
pub fn symbols_to_bytes(symbols: &[Symbol], w: u8) -> Vec<u8> {
    match w {
        4 => symbols
            .chunks(2)
            .map(|c| (c[0].0 as u8 & 0x0f) | ((c.get(1).map_or(0, |s| s.0) as u8 & 0x0f) << 4))
            .collect(),
        8 => symbols.iter().map(|s| s.0 as u8).collect(),
        16 => symbols.iter().flat_map(|s| s.0.to_le_bytes()).collect(),
        _ => panic!("unsupported width {w}"),
    }
}

/// Splits a file into zero-padded stripes. Node `j` of a stripe holds the
/// `j`-th run of `alpha` consecutive symbols.
pub fn split_stripes(code: &PlusCode, bytes: &[u8]) -> Vec<DataBlock> {
    let p = code.params();
    let (alpha, m) = (p.alpha(), p.stripe_symbols());
    let mut symbols = bytes_to_symbols(bytes, p.field.w);
    let stripes = symbols.len().div_ceil(m);
    symbols.resize(stripes * m, Symbol::ZERO);
    symbols
        .chunks(m)
        .map(|chunk| DataBlock::new(chunk.chunks(alpha).map(<[Symbol]>::to_vec).collect()))
        .collect()
}

pub fn join_stripes(code: &PlusCode, blocks: &[DataBlock], payload_len: usize) -> Vec<u8> {
    let symbols: Vec<Symbol> = blocks
        .iter()
        .flat_map(|b| b.columns.iter().flatten().copied())
        .collect();
    let mut bytes = symbols_to_bytes(&symbols, code.params().field.w);
    bytes.truncate(payload_len);
    bytes
}
