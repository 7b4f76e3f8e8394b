//! On-disk shard format: a 41-byte little-endian header followed by the
//! node's symbols, stripe by stripe.
//!
//! ```text
//! magic "HTP1" | version u8 | n u8 | k u8 | alpha_b u16 | field_w u8 | poly u32
//! theta u16 | seed u64 | node_id u8 | stripe_count u32 | payload_len u64 | crc32c u32
//! ```

use std::io::Write;

use crc::{Crc, CRC_32_ISCSI};
use serde::{Deserialize, Serialize};

use crate::codec::{bytes_to_symbols, symbols_to_bytes};
use crate::error::{Error, Result};
use crate::gf::{FieldSpec, Symbol};
use crate::params::CodeParams;

pub const MAGIC: &[u8; 4] = b"HTP1";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 41;

const CRC32C: Crc<u32> = Crc::<u32>::new(&CRC_32_ISCSI);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShardHeader {
    pub n: u8,
    pub k: u8,
    pub alpha_b: u16,
    pub field_w: u8,
    pub poly: u32,
    pub theta: u16,
    pub seed: u64,
    pub node_id: u8,
    pub stripe_count: u32,
    /// File length before stripe padding.
    pub payload_len: u64,
}

/// Bytes one node stores per stripe.
pub fn stripe_bytes(alpha: usize, w: u8) -> usize {
    (alpha * w as usize).div_ceil(8)
}

impl ShardHeader {
    pub fn new(params: &CodeParams, node_id: usize, stripe_count: usize, payload_len: u64) -> Result<Self> {
        let narrow = |what: &str, v: usize, max: usize| {
            if v > max {
                Err(Error::InvalidParams(format!("{what} = {v} does not fit the shard header")))
            } else {
                Ok(v)
            }
        };
        if node_id >= params.n {
            return Err(Error::InvalidNode { node: node_id });
        }
        Ok(ShardHeader {
            n: narrow("n", params.n, u8::MAX as usize)? as u8,
            k: params.k as u8,
            alpha_b: narrow("alpha_b", params.alpha_b, u16::MAX as usize)? as u16,
            field_w: params.field.w,
            poly: params.field.poly,
            theta: params.theta.0,
            seed: params.seed,
            node_id: node_id as u8,
            stripe_count: narrow("stripe_count", stripe_count, u32::MAX as usize)? as u32,
            payload_len,
        })
    }

    pub fn params(&self) -> Result<CodeParams> {
        let field = FieldSpec::new(self.field_w, self.poly)?;
        CodeParams::new(
            self.n as usize,
            self.k as usize,
            self.alpha_b as usize,
            field,
            Symbol(self.theta),
            self.seed,
        )
    }

    pub fn payload_bytes(&self) -> Result<usize> {
        let p = self.params()?;
        Ok(self.stripe_count as usize * stripe_bytes(p.alpha(), self.field_w))
    }

    /// True when both headers describe shards of the same encode run.
    pub fn same_run(&self, other: &ShardHeader) -> bool {
        ShardHeader { node_id: 0, ..*self } == ShardHeader { node_id: 0, ..*other }
    }

    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut b = Vec::with_capacity(HEADER_LEN);
        b.extend_from_slice(MAGIC);
        b.push(VERSION);
        b.push(self.n);
        b.push(self.k);
        b.extend_from_slice(&self.alpha_b.to_le_bytes());
        b.push(self.field_w);
        b.extend_from_slice(&self.poly.to_le_bytes());
        b.extend_from_slice(&self.theta.to_le_bytes());
        b.extend_from_slice(&self.seed.to_le_bytes());
        b.push(self.node_id);
        b.extend_from_slice(&self.stripe_count.to_le_bytes());
        b.extend_from_slice(&self.payload_len.to_le_bytes());
        let crc = CRC32C.checksum(&b);
        b.extend_from_slice(&crc.to_le_bytes());
        b.try_into().expect("header layout is 41 bytes")
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::CorruptHeader(format!("{} bytes, need {HEADER_LEN}", bytes.len())));
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::CorruptHeader("bad magic".into()));
        }
        let stored = u32::from_le_bytes(bytes[37..41].try_into().unwrap());
        if CRC32C.checksum(&bytes[..37]) != stored {
            return Err(Error::CorruptHeader("checksum mismatch".into()));
        }
        if bytes[4] != VERSION {
            return Err(Error::UnsupportedVersion(bytes[4]));
        }
        let u16_at = |i: usize| u16::from_le_bytes(bytes[i..i + 2].try_into().unwrap());
        let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let u64_at = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
        let h = ShardHeader {
            n: bytes[5],
            k: bytes[6],
            alpha_b: u16_at(7),
            field_w: bytes[9],
            poly: u32_at(10),
            theta: u16_at(14),
            seed: u64_at(16),
            node_id: bytes[24],
            stripe_count: u32_at(25),
            payload_len: u64_at(29),
        };
        let p = h.params().map_err(|e| Error::CorruptHeader(e.to_string()))?;
        if h.node_id >= h.n {
            return Err(Error::CorruptHeader(format!("node {} >= n = {}", h.node_id, h.n)));
        }
        if h.payload_len > (h.stripe_count as u64) * (p.stripe_symbols() * h.field_w as usize / 8) as u64 {
            return Err(Error::CorruptHeader(format!(
                "payload_len {} exceeds {} stripes",
                h.payload_len, h.stripe_count
            )));
        }
        Ok(h)
    }
}

/// Serializes a shard; `stripes[s]` is this node's column of stripe `s`.
pub fn write_shard<W: Write>(out: &mut W, header: &ShardHeader, stripes: &[Vec<Symbol>]) -> Result<()> {
    let p = header.params()?;
    if stripes.len() != header.stripe_count as usize {
        return Err(Error::DimensionMismatch {
            expected: format!("{} stripes", header.stripe_count),
            got: stripes.len().to_string(),
        });
    }
    out.write_all(&header.to_bytes())?;
    for col in stripes {
        if col.len() != p.alpha() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} symbols per stripe", p.alpha()),
                got: col.len().to_string(),
            });
        }
        out.write_all(&symbols_to_bytes(col, header.field_w))?;
    }
    Ok(())
}

pub fn shard_bytes(header: &ShardHeader, stripes: &[Vec<Symbol>]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    write_shard(&mut out, header, stripes)?;
    Ok(out)
}

pub fn read_shard(bytes: &[u8]) -> Result<(ShardHeader, Vec<Vec<Symbol>>)> {
    let header = ShardHeader::from_bytes(bytes)?;
    let p = header.params()?;
    let per = stripe_bytes(p.alpha(), header.field_w);
    let expected = header.payload_bytes()?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < expected {
        return Err(Error::TruncatedPayload {
            expected,
            got: payload.len(),
        });
    }
    let stripes = payload[..expected]
        .chunks(per)
        .map(|c| {
            let mut s = bytes_to_symbols(c, header.field_w);
            s.truncate(p.alpha());
            s
        })
        .collect();
    Ok((header, stripes))
}

/// Shard file name of node `m`.
pub fn shard_file_name(m: usize) -> String {
    format!("shard_{m:03}")
}
