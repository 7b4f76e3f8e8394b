//! HashTag+ lifting of a base code.
//!
//! The base code is replicated into `r` instances stacked vertically, so
//! node column rows `[i * alpha_b, (i + 1) * alpha_b)` belong to instance
//! `i`. Raw parity `l` of instance `i` is moved to parity node `(l + i) mod r`;
//! after the move, parity node `l` holds raw parity `(l - i) mod r` of
//! instance `i`. Every off-diagonal block `(l, i)` is then mixed with its
//! mirror `(i, l)`:
//!
//! ```text
//! stored(l, i) = theta_{l,i} * raw(l, i) + raw(i, l)      (l != i)
//! stored(l, l) = raw(l, l)                                 (raw parity 0 of instance l)
//! ```
//!
//! with `theta_{l,i} = theta` for `l > i` and `1` otherwise.

use serde::{Deserialize, Serialize};

use crate::base::{check_block, BaseCode};
use crate::error::{Error, Result};
use crate::generator::Generator;
use crate::gf::{add, Field, Symbol};
use crate::params::CodeParams;

/// One raw base parity block: array `parity` of instance `instance`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RawBlock {
    pub instance: usize,
    pub parity: usize,
}

/// What parity node `l` stores for instance `i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StoredBlock {
    Unpaired { raw: RawBlock },
    Paired {
        /// `raw(l, i)`, scaled by `own_coeff`.
        own: RawBlock,
        own_coeff: Symbol,
        /// `raw(i, l)`, coefficient 1; it also appears in block `(i, l)`.
        partner: RawBlock,
        partner_block: (usize, usize),
    },
}

#[derive(Clone, Debug)]
pub struct PlusCode {
    base: BaseCode,
    generator: Generator,
}

/// `n` node columns of `alpha` symbols each.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Codeword {
    pub node_data: Vec<Vec<Symbol>>,
}

impl Codeword {
    pub fn node(&self, m: usize) -> &[Symbol] {
        &self.node_data[m]
    }
}

impl PlusCode {
    pub fn build(params: &CodeParams) -> Result<Self> {
        Ok(build_plus_code(BaseCode::build(params)?))
    }

    pub fn params(&self) -> &CodeParams {
        &self.base.params
    }

    pub fn field(&self) -> &Field {
        &self.base.field
    }

    pub fn base(&self) -> &BaseCode {
        &self.base
    }

    pub fn theta(&self) -> Symbol {
        self.base.params.theta
    }

    /// Flattened `r*alpha x k*alpha` parity generator of the lifted code.
    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn instances(&self) -> usize {
        self.base.params.r()
    }

    /// `theta_{l,i}`; only meaningful for `l != i`.
    pub fn theta_coeff(&self, l: usize, i: usize) -> Symbol {
        theta_coeff(self.theta(), l, i)
    }

    /// Raw parity block a parity node holds for an instance, before pairing.
    pub fn raw_at(&self, l: usize, i: usize) -> RawBlock {
        raw_at(self.instances(), l, i)
    }

    /// The parity node holding `raw` before pairing.
    pub fn home_of(&self, raw: RawBlock) -> usize {
        home_of(self.instances(), raw)
    }

    pub fn stored_block(&self, l: usize, i: usize) -> StoredBlock {
        stored_block(self.instances(), self.theta(), l, i)
    }

    /// Evaluates raw parity `raw`, row `row`, through `lookup(instance_row, node)`.
    pub fn raw_symbol<F: Fn(usize, usize) -> Option<Symbol>>(
        &self,
        raw: RawBlock,
        row: usize,
        lookup: F,
    ) -> Option<Symbol> {
        let f = self.field();
        let mut acc = Symbol::ZERO;
        for t in self.base.tensor.row(raw.parity, row) {
            acc = add(acc, f.mul(t.coeff, lookup(t.row, t.node)?));
        }
        Some(acc)
    }

    /// Mixes raw block values into what node `l` stores for instance `i`.
    pub fn combine(&self, l: usize, i: usize, own: Symbol, partner: Symbol) -> Symbol {
        if l == i {
            own
        } else {
            add(self.field().mul(self.theta_coeff(l, i), own), partner)
        }
    }

    /// Recovers `(raw(l, i), raw(i, l))` from the two stored blocks of a pair.
    pub fn unpair(
        &self,
        l: usize,
        i: usize,
        stored_li: &[Symbol],
        stored_il: &[Symbol],
    ) -> Result<(Vec<Symbol>, Vec<Symbol>)> {
        if l == i || l >= self.instances() || i >= self.instances() {
            return Err(Error::InvalidNode { node: l.max(i) });
        }
        if stored_li.len() != stored_il.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} symbols", stored_li.len()),
                got: format!("{} symbols", stored_il.len()),
            });
        }
        let f = self.field();
        // [t_li 1; 1 t_il] [x; y] = [s_li; s_il], det = t_li * t_il + 1
        let (a, d) = (self.theta_coeff(l, i), self.theta_coeff(i, l));
        let det = add(f.mul(a, d), Symbol::ONE);
        let inv = f.inv(det).map_err(|_| Error::SingularPairing)?;
        let mut xs = Vec::with_capacity(stored_li.len());
        let mut ys = Vec::with_capacity(stored_li.len());
        for (&s1, &s2) in stored_li.iter().zip(stored_il) {
            xs.push(f.mul(inv, add(f.mul(d, s1), s2)));
            ys.push(f.mul(inv, add(s1, f.mul(a, s2))));
        }
        Ok((xs, ys))
    }

    /// Encodes `k` data columns of `alpha` symbols into a full codeword.
    pub fn encode(&self, data: &[Vec<Symbol>]) -> Result<Codeword> {
        let p = self.params();
        let (r, ab) = (p.r(), p.alpha_b);
        check_block(data, p.k, p.alpha())?;
        // raw[i][l] = raw parity l of instance i
        let raw: Vec<Vec<Vec<Symbol>>> = (0..r)
            .map(|i| {
                let slice: Vec<Vec<Symbol>> =
                    data.iter().map(|c| c[i * ab..(i + 1) * ab].to_vec()).collect();
                self.base.encode(&slice).expect("slice dimensions checked")
            })
            .collect();
        let mut node_data: Vec<Vec<Symbol>> = data.to_vec();
        for l in 0..r {
            let mut col = Vec::with_capacity(p.alpha());
            for i in 0..r {
                match self.stored_block(l, i) {
                    StoredBlock::Unpaired { raw: b } => col.extend_from_slice(&raw[b.instance][b.parity]),
                    StoredBlock::Paired { own, partner, .. } => {
                        for s in 0..ab {
                            col.push(self.combine(
                                l,
                                i,
                                raw[own.instance][own.parity][s],
                                raw[partner.instance][partner.parity][s],
                            ));
                        }
                    }
                }
            }
            node_data.push(col);
        }
        Ok(Codeword { node_data })
    }
}

fn theta_coeff(theta: Symbol, l: usize, i: usize) -> Symbol {
    if l > i {
        theta
    } else {
        Symbol::ONE
    }
}

pub(crate) fn raw_at(r: usize, l: usize, i: usize) -> RawBlock {
    RawBlock {
        instance: i,
        parity: (l + r - i) % r,
    }
}

pub(crate) fn home_of(r: usize, raw: RawBlock) -> usize {
    (raw.parity + raw.instance) % r
}

fn stored_block(r: usize, theta: Symbol, l: usize, i: usize) -> StoredBlock {
    if l == i {
        StoredBlock::Unpaired { raw: raw_at(r, l, i) }
    } else {
        StoredBlock::Paired {
            own: raw_at(r, l, i),
            own_coeff: theta_coeff(theta, l, i),
            partner: raw_at(r, i, l),
            partner_block: (i, l),
        }
    }
}

pub fn build_plus_code(base: BaseCode) -> PlusCode {
    let p = base.params;
    let (r, ab, alpha) = (p.r(), p.alpha_b, p.alpha());
    let raw_row = |raw: RawBlock, s: usize| -> Vec<(usize, Symbol)> {
        base.tensor
            .row(raw.parity, s)
            .iter()
            .map(|t| (t.node * alpha + raw.instance * ab + t.row, t.coeff))
            .collect()
    };
    let mut rows = Vec::with_capacity(r * alpha);
    for l in 0..r {
        for i in 0..r {
            for s in 0..ab {
                let row = match stored_block(r, p.theta, l, i) {
                    StoredBlock::Unpaired { raw } => raw_row(raw, s),
                    StoredBlock::Paired {
                        own,
                        own_coeff,
                        partner,
                        ..
                    } => {
                        let mut v: Vec<(usize, Symbol)> = raw_row(own, s)
                            .into_iter()
                            .map(|(var, c)| (var, base.field.mul(c, own_coeff)))
                            .collect();
                        v.extend(raw_row(partner, s));
                        v
                    }
                };
                rows.push(row);
            }
        }
    }
    PlusCode {
        generator: Generator::new(p.n, p.k, alpha, rows),
        base,
    }
}

pub fn encode_plus(code: &PlusCode, data: &[Vec<Symbol>]) -> Result<Codeword> {
    code.encode(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn code(n: usize, k: usize, ab: usize, w: u8) -> PlusCode {
        PlusCode::build(&CodeParams::with_width(n, k, ab, w).unwrap()).unwrap()
    }

    fn random_data(rng: &mut ChaCha8Rng, c: &PlusCode) -> Vec<Vec<Symbol>> {
        let q = c.field().order() as u32;
        (0..c.params().k)
            .map(|_| (0..c.params().alpha()).map(|_| Symbol(rng.gen_range(0..q) as u16)).collect())
            .collect()
    }

    #[test]
    fn permutation_for_two_parities() {
        let c = code(6, 4, 4, 4);
        // instance 0 unpermuted
        assert_eq!(c.raw_at(0, 0), RawBlock { instance: 0, parity: 0 });
        assert_eq!(c.raw_at(1, 0), RawBlock { instance: 0, parity: 1 });
        // instance 1 swapped between p_0 and p_1
        assert_eq!(c.raw_at(0, 1), RawBlock { instance: 1, parity: 1 });
        assert_eq!(c.raw_at(1, 1), RawBlock { instance: 1, parity: 0 });
        for i in 0..2 {
            for l in 0..2 {
                assert_eq!(c.home_of(c.raw_at(l, i)), l);
            }
        }
    }

    #[test]
    fn pairing_partners() {
        let c = code(6, 4, 4, 4);
        let mut pairs = vec![];
        for l in 0..2 {
            for i in 0..2 {
                if let StoredBlock::Paired { partner_block, .. } = c.stored_block(l, i) {
                    let mut key = [(l, i), partner_block];
                    key.sort();
                    pairs.push(key);
                }
            }
        }
        pairs.sort();
        pairs.dedup();
        assert_eq!(pairs, vec![[(0, 1), (1, 0)]]);

        let c3 = code(9, 6, 3, 8);
        let mut unpaired = 0;
        let mut pairs = vec![];
        for l in 0..3 {
            for i in 0..3 {
                match c3.stored_block(l, i) {
                    StoredBlock::Unpaired { .. } => unpaired += 1,
                    StoredBlock::Paired { partner_block, .. } => {
                        let mut key = [(l, i), partner_block];
                        key.sort();
                        pairs.push(key);
                    }
                }
            }
        }
        pairs.sort();
        pairs.dedup();
        assert_eq!(unpaired, 3);
        assert_eq!(pairs.len(), 3);
    }

    #[test]
    fn theta_orientation_is_invertible() {
        let c = code(16, 12, 4, 16);
        let f = c.field();
        for l in 0..4 {
            for i in 0..4 {
                if l != i {
                    let (a, b) = (c.theta_coeff(l, i), c.theta_coeff(i, l));
                    assert!([a, b].contains(&c.theta()) && [a, b].contains(&Symbol::ONE));
                    assert_eq!(f.mul(a, b), c.theta());
                }
            }
        }
    }

    #[test]
    fn six_four_alpha8_paired_symbol_form() {
        let c = code(6, 4, 4, 4);
        // p_1 instance 0 stores theta * p_{0,1} + p_{4,1}
        match c.stored_block(1, 0) {
            StoredBlock::Paired {
                own,
                own_coeff,
                partner,
                ..
            } => {
                assert_eq!(own, RawBlock { instance: 0, parity: 1 });
                assert_eq!(own_coeff, c.theta());
                assert_eq!(partner, RawBlock { instance: 1, parity: 1 });
            }
            _ => panic!(),
        }
        // p_0 instance 1 stores p_{4,1} + p_{0,1}
        match c.stored_block(0, 1) {
            StoredBlock::Paired {
                own,
                own_coeff,
                partner,
                ..
            } => {
                assert_eq!(own, RawBlock { instance: 1, parity: 1 });
                assert_eq!(own_coeff, Symbol::ONE);
                assert_eq!(partner, RawBlock { instance: 0, parity: 1 });
            }
            _ => panic!(),
        }
    }

    #[test]
    fn zero_data_zero_codeword() {
        let c = code(6, 4, 4, 4);
        let w = c.encode(&vec![vec![Symbol::ZERO; 8]; 4]).unwrap();
        assert!(w.node_data.iter().flatten().all(|s| s.is_zero()));
    }

    #[test]
    fn diagonal_blocks_match_base_encoder() {
        let c = code(9, 6, 3, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data = random_data(&mut rng, &c);
        let w = c.encode(&data).unwrap();
        let ab = 3;
        for i in 0..3 {
            let slice: Vec<Vec<Symbol>> = data.iter().map(|col| col[i * ab..(i + 1) * ab].to_vec()).collect();
            let raw = c.base().encode(&slice).unwrap();
            assert_eq!(&w.node(6 + i)[i * ab..(i + 1) * ab], &raw[0][..]);
            for j in 0..6 {
                assert_eq!(w.node(j), &data[j][..]);
            }
        }
    }

    #[test]
    fn encode_matches_flattened_generator() {
        let c = code(9, 6, 4, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let data = random_data(&mut rng, &c);
            let w = c.encode(&data).unwrap();
            let par = c.generator().encode(c.field(), &data);
            for l in 0..3 {
                assert_eq!(w.node(6 + l), &par[l][..]);
            }
        }
    }

    #[test]
    fn encode_is_linear() {
        let c = code(6, 4, 3, 8);
        let f = c.field().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_data(&mut rng, &c);
        let y = random_data(&mut rng, &c);
        let a = Symbol(77);
        let z: Vec<Vec<Symbol>> = x
            .iter()
            .zip(&y)
            .map(|(u, v)| u.iter().zip(v).map(|(&p, &q)| add(f.mul(a, p), q)).collect())
            .collect();
        let (wx, wy, wz) = (c.encode(&x).unwrap(), c.encode(&y).unwrap(), c.encode(&z).unwrap());
        for m in 0..6 {
            for s in 0..6 {
                assert_eq!(wz.node(m)[s], add(f.mul(a, wx.node(m)[s]), wy.node(m)[s]));
            }
        }
    }

    #[test]
    fn unpair_round_trip() {
        for w in [4u8, 8] {
            let c = code(6, 4, 4, w);
            let q = c.field().order() as u32;
            let mut rng = ChaCha8Rng::seed_from_u64(w as u64);
            for _ in 0..100 {
                let u: Vec<Symbol> = (0..4).map(|_| Symbol(rng.gen_range(0..q) as u16)).collect();
                let v: Vec<Symbol> = (0..4).map(|_| Symbol(rng.gen_range(0..q) as u16)).collect();
                // u = raw(0,1), v = raw(1,0)
                let s01: Vec<Symbol> = u.iter().zip(&v).map(|(&a, &b)| c.combine(0, 1, a, b)).collect();
                let s10: Vec<Symbol> = v.iter().zip(&u).map(|(&a, &b)| c.combine(1, 0, a, b)).collect();
                let (ru, rv) = c.unpair(0, 1, &s01, &s10).unwrap();
                assert_eq!((ru, rv), (u.clone(), v.clone()));
            }
        }
        let c = code(6, 4, 4, 4);
        let z = vec![Symbol::ZERO; 4];
        assert_eq!(c.unpair(0, 1, &z, &z).unwrap(), (z.clone(), z.clone()));
        assert!(c.unpair(1, 1, &z, &z).is_err());
    }
}
