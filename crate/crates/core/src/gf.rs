//! Arithmetic over GF(2^w) and dense linear algebra on top of it.
//!
//! Multiplication goes through log/antilog tables built once per field.
//! The reduction polynomial must be irreducible; it need not be primitive,
//! a generator of the multiplicative group is searched for when building
//! the tables.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An element of GF(2^w), stored as its polynomial-basis bit pattern.
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Symbol(pub u16);

impl Symbol {
    pub const ZERO: Symbol = Symbol(0);
    pub const ONE: Symbol = Symbol(1);

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u16> for Symbol {
    fn from(v: u16) -> Self {
        Symbol(v)
    }
}

/// Addition in characteristic 2.
#[inline]
pub fn add(a: Symbol, b: Symbol) -> Symbol {
    Symbol(a.0 ^ b.0)
}

/// Bit width and reduction polynomial (leading term included).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FieldSpec {
    pub w: u8,
    pub poly: u32,
}

impl FieldSpec {
    /// Validates width and irreducibility of `poly`.
    pub fn new(w: u8, poly: u32) -> Result<Self> {
        if !matches!(w, 4 | 8 | 16) {
            return Err(Error::InvalidField(format!("unsupported width {w}")));
        }
        if degree(poly) != Some(w as u32) {
            return Err(Error::InvalidField(format!(
                "polynomial {poly:#x} does not have degree {w}"
            )));
        }
        if !is_irreducible(poly) {
            return Err(Error::InvalidField(format!(
                "polynomial {poly:#x} is reducible over GF(2)"
            )));
        }
        Ok(FieldSpec { w, poly })
    }

    /// x^4+x^3+1, 0x11D and 0x1100B for w = 4, 8, 16.
    pub fn default_poly(w: u8) -> Option<u32> {
        match w {
            4 => Some(0b11001),
            8 => Some(0x11d),
            16 => Some(0x1100b),
            _ => None,
        }
    }

    pub fn with_default_poly(w: u8) -> Result<Self> {
        let poly = Self::default_poly(w)
            .ok_or_else(|| Error::InvalidField(format!("unsupported width {w}")))?;
        Self::new(w, poly)
    }

    pub fn order(&self) -> u64 {
        1u64 << self.w
    }
}

fn degree(p: u32) -> Option<u32> {
    if p == 0 {
        None
    } else {
        Some(31 - p.leading_zeros())
    }
}

/// Remainder of GF(2)[x] division.
fn poly_rem(mut a: u32, b: u32) -> u32 {
    let db = degree(b).expect("division by zero polynomial");
    while let Some(da) = degree(a) {
        if da < db {
            break;
        }
        a ^= b << (da - db);
    }
    a
}

/// Trial division by every polynomial of degree 1..=deg/2.
fn is_irreducible(poly: u32) -> bool {
    let d = match degree(poly) {
        Some(d) if d >= 1 => d,
        _ => return false,
    };
    for dd in 1..=d / 2 {
        for low in 0..(1u32 << dd) {
            let divisor = (1u32 << dd) | low;
            if poly_rem(poly, divisor) == 0 {
                return false;
            }
        }
    }
    true
}

fn mul_reduce(a: u32, b: u32, poly: u32, w: u8) -> u32 {
    let mut acc = 0u32;
    let mut a = a;
    let mut b = b;
    while b != 0 {
        if b & 1 != 0 {
            acc ^= a;
        }
        b >>= 1;
        a <<= 1;
        if a & (1 << w) != 0 {
            a ^= poly;
        }
    }
    acc
}

struct Tables {
    spec: FieldSpec,
    exp: Vec<u16>,
    log: Vec<u16>,
}

/// A finite field GF(2^w). Cheap to clone.
#[derive(Clone)]
pub struct Field {
    inner: Arc<Tables>,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("w", &self.inner.spec.w)
            .field("poly", &format_args!("{:#x}", self.inner.spec.poly))
            .finish()
    }
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        self.inner.spec == other.inner.spec
    }
}

impl Eq for Field {}

impl Field {
    pub fn new(spec: FieldSpec) -> Self {
        let q = 1usize << spec.w;
        let order = q - 1;
        let generator = (2..q as u32)
            .find(|&g| {
                let mut x = 1u32;
                for i in 1..=order {
                    x = mul_reduce(x, g, spec.poly, spec.w);
                    if x == 1 {
                        return i == order;
                    }
                }
                false
            })
            .unwrap_or(1);
        let mut exp = vec![0u16; 2 * order];
        let mut log = vec![0u16; q];
        let mut x = 1u32;
        for i in 0..order {
            exp[i] = x as u16;
            log[x as usize] = i as u16;
            x = mul_reduce(x, generator, spec.poly, spec.w);
        }
        for i in order..2 * order {
            exp[i] = exp[i - order];
        }
        Field {
            inner: Arc::new(Tables { spec, exp, log }),
        }
    }

    pub fn with_width(w: u8) -> Result<Self> {
        Ok(Self::new(FieldSpec::with_default_poly(w)?))
    }

    pub fn spec(&self) -> FieldSpec {
        self.inner.spec
    }

    pub fn w(&self) -> u8 {
        self.inner.spec.w
    }

    pub fn order(&self) -> u64 {
        self.inner.spec.order()
    }

    #[inline]
    fn mul_order(&self) -> usize {
        (1usize << self.inner.spec.w) - 1
    }

    pub fn contains(&self, a: Symbol) -> bool {
        (a.0 as u64) < self.order()
    }

    pub fn symbol(&self, v: u16) -> Result<Symbol> {
        let s = Symbol(v);
        if self.contains(s) {
            Ok(s)
        } else {
            Err(Error::InvalidField(format!("{v} is not an element of GF(2^{})", self.w())))
        }
    }

    #[inline]
    pub fn add(&self, a: Symbol, b: Symbol) -> Symbol {
        add(a, b)
    }

    #[inline]
    pub fn mul(&self, a: Symbol, b: Symbol) -> Symbol {
        if a.0 == 0 || b.0 == 0 {
            return Symbol::ZERO;
        }
        let t = &self.inner;
        Symbol(t.exp[t.log[a.0 as usize] as usize + t.log[b.0 as usize] as usize])
    }

    pub fn inv(&self, a: Symbol) -> Result<Symbol> {
        if a.0 == 0 {
            return Err(Error::ZeroInverse);
        }
        let t = &self.inner;
        let l = t.log[a.0 as usize] as usize;
        Ok(Symbol(t.exp[(self.mul_order() - l) % self.mul_order()]))
    }

    pub fn div(&self, a: Symbol, b: Symbol) -> Result<Symbol> {
        Ok(self.mul(a, self.inv(b)?))
    }

    pub fn pow(&self, a: Symbol, e: u64) -> Symbol {
        if e == 0 {
            return Symbol::ONE;
        }
        if a.0 == 0 {
            return Symbol::ZERO;
        }
        let t = &self.inner;
        let l = t.log[a.0 as usize] as u64;
        Symbol(t.exp[((l * (e % self.mul_order() as u64)) % self.mul_order() as u64) as usize])
    }

    /// `dst[i] += c * src[i]`
    pub fn mul_add_slice(&self, dst: &mut [Symbol], src: &[Symbol], c: Symbol) {
        debug_assert_eq!(dst.len(), src.len());
        if c.0 == 0 {
            return;
        }
        let t = &self.inner;
        if c.0 == 1 {
            for (d, s) in dst.iter_mut().zip(src) {
                d.0 ^= s.0;
            }
            return;
        }
        let lc = t.log[c.0 as usize] as usize;
        for (d, s) in dst.iter_mut().zip(src) {
            if s.0 != 0 {
                d.0 ^= t.exp[t.log[s.0 as usize] as usize + lc];
            }
        }
    }

    /// `v[i] *= c`
    pub fn scale_slice(&self, v: &mut [Symbol], c: Symbol) {
        if c.0 == 1 {
            return;
        }
        for x in v.iter_mut() {
            *x = self.mul(*x, c);
        }
    }

    /// Solves `a * x = b` for square `a`.
    pub fn solve(&self, a: &FieldMatrix, b: &[Symbol]) -> Result<Vec<Symbol>> {
        if a.rows != a.cols {
            return Err(Error::DimensionMismatch {
                expected: "square matrix".into(),
                got: format!("{}x{}", a.rows, a.cols),
            });
        }
        if b.len() != a.rows {
            return Err(Error::DimensionMismatch {
                expected: format!("rhs of length {}", a.rows),
                got: b.len().to_string(),
            });
        }
        let n = a.rows;
        // augmented [A | b]
        let mut m = FieldMatrix::zeros(n, n + 1);
        for r in 0..n {
            m.row_mut(r)[..n].copy_from_slice(a.row(r));
            m.row_mut(r)[n] = b[r];
        }
        let pivots = self.reduce(&mut m, n);
        if pivots < n {
            return Err(Error::SingularMatrix);
        }
        Ok((0..n).map(|r| m.get(r, n)).collect())
    }

    pub fn invert(&self, a: &FieldMatrix) -> Result<FieldMatrix> {
        if a.rows != a.cols {
            return Err(Error::DimensionMismatch {
                expected: "square matrix".into(),
                got: format!("{}x{}", a.rows, a.cols),
            });
        }
        let n = a.rows;
        let mut m = FieldMatrix::zeros(n, 2 * n);
        for r in 0..n {
            m.row_mut(r)[..n].copy_from_slice(a.row(r));
            m.row_mut(r)[n + r] = Symbol::ONE;
        }
        if self.reduce(&mut m, n) < n {
            return Err(Error::SingularMatrix);
        }
        let mut out = FieldMatrix::zeros(n, n);
        for r in 0..n {
            out.row_mut(r).copy_from_slice(&m.row(r)[n..]);
        }
        Ok(out)
    }

    /// Row rank, by forward elimination only.
    pub fn rank(&self, a: &FieldMatrix) -> usize {
        let mut m = a.clone();
        self.rank_in_place(&mut m)
    }

    pub fn rank_in_place(&self, m: &mut FieldMatrix) -> usize {
        let mut rank = 0;
        let cols = m.cols;
        for c in 0..cols {
            if rank == m.rows {
                break;
            }
            let Some(p) = (rank..m.rows).find(|&r| !m.get(r, c).is_zero()) else {
                continue;
            };
            m.swap_rows(p, rank);
            let inv = self.inv(m.get(rank, c)).expect("pivot is nonzero");
            let pivot_row: Vec<Symbol> = m.row(rank)[c..].to_vec();
            for r in rank + 1..m.rows {
                let f = m.get(r, c);
                if !f.is_zero() {
                    self.mul_add_slice(&mut m.row_mut(r)[c..], &pivot_row, self.mul(f, inv));
                }
            }
            rank += 1;
        }
        rank
    }

    /// Gauss-Jordan elimination over the first `pivot_cols` columns,
    /// taking the first nonzero entry in each column as pivot. Returns the
    /// number of pivots; pivot rows end up normalized and on top.
    fn reduce(&self, m: &mut FieldMatrix, pivot_cols: usize) -> usize {
        let mut rank = 0;
        let cols = m.cols;
        for c in 0..pivot_cols {
            if rank == m.rows {
                break;
            }
            let Some(p) = (rank..m.rows).find(|&r| !m.get(r, c).is_zero()) else {
                continue;
            };
            m.swap_rows(p, rank);
            let inv = self.inv(m.get(rank, c)).expect("pivot is nonzero");
            self.scale_slice(&mut m.row_mut(rank)[c..], inv);
            let pivot_row: Vec<Symbol> = m.row(rank)[c..cols].to_vec();
            for r in 0..m.rows {
                if r == rank {
                    continue;
                }
                let f = m.get(r, c);
                if !f.is_zero() {
                    self.mul_add_slice(&mut m.row_mut(r)[c..cols], &pivot_row, f);
                }
            }
            rank += 1;
        }
        rank
    }
}

/// Dense row-major matrix of field symbols.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct FieldMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Symbol>,
}

impl FieldMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        FieldMatrix {
            rows,
            cols,
            entries: vec![Symbol::ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Symbol::ONE);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<Symbol>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch {
                expected: format!("rows of length {cols}"),
                got: "ragged rows".into(),
            });
        }
        Ok(FieldMatrix {
            rows: rows.len(),
            cols,
            entries: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Symbol {
        self.entries[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Symbol) {
        self.entries[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[Symbol] {
        &self.entries[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [Symbol] {
        &mut self.entries[r * self.cols..(r + 1) * self.cols]
    }

    pub fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for c in 0..self.cols {
            self.entries.swap(a * self.cols + c, b * self.cols + c);
        }
    }

    pub fn mul_vec(&self, field: &Field, x: &[Symbol]) -> Vec<Symbol> {
        assert_eq!(x.len(), self.cols, "vector length must match columns");
        (0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(x)
                    .fold(Symbol::ZERO, |acc, (&a, &b)| add(acc, field.mul(a, b)))
            })
            .collect()
    }
}
