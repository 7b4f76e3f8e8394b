//! Flattened parity generator of a systematic array code.
//!
//! Data variable `j * sub + i` is row `i` of systematic node `j`. Parity
//! node `k + l`, row `i` is a sparse combination of data variables.

use crate::gf::{add, Field, FieldMatrix, Symbol};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Generator {
    pub n: usize,
    pub k: usize,
    /// Symbols per node.
    pub sub: usize,
    /// `rows[l * sub + i]` for parity node `k + l`.
    rows: Vec<Vec<(usize, Symbol)>>,
}

impl Generator {
    pub fn new(n: usize, k: usize, sub: usize, rows: Vec<Vec<(usize, Symbol)>>) -> Self {
        assert_eq!(rows.len(), (n - k) * sub, "one row per parity symbol");
        Generator { n, k, sub, rows }
    }

    pub fn var(&self, node: usize, row: usize) -> usize {
        node * self.sub + row
    }

    /// Sparse row for parity node `node` (k <= node < n).
    pub fn parity_row(&self, node: usize, row: usize) -> &[(usize, Symbol)] {
        &self.rows[(node - self.k) * self.sub + row]
    }

    pub fn parity_row_mut(&mut self, node: usize, row: usize) -> &mut Vec<(usize, Symbol)> {
        let sub = self.sub;
        &mut self.rows[(node - self.k) * sub + row]
    }

    /// Parity columns for node-major data columns.
    pub fn encode(&self, field: &Field, data: &[Vec<Symbol>]) -> Vec<Vec<Symbol>> {
        (self.k..self.n)
            .map(|node| {
                (0..self.sub)
                    .map(|row| {
                        self.parity_row(node, row).iter().fold(Symbol::ZERO, |acc, &(v, c)| {
                            add(acc, field.mul(c, data[v / self.sub][v % self.sub]))
                        })
                    })
                    .collect()
            })
            .collect()
    }

    /// Square system relating the parity nodes in `parity` to the data of
    /// the systematic nodes in `missing`, with `|parity| == |missing|`.
    pub fn submatrix(&self, parity: &[usize], missing: &[usize]) -> FieldMatrix {
        let size_r = parity.len() * self.sub;
        let size_c = missing.len() * self.sub;
        let mut col_of = vec![usize::MAX; self.k];
        for (pos, &j) in missing.iter().enumerate() {
            col_of[j] = pos;
        }
        let mut m = FieldMatrix::zeros(size_r, size_c);
        for (pi, &p) in parity.iter().enumerate() {
            for row in 0..self.sub {
                for &(v, c) in self.parity_row(p, row) {
                    let pos = col_of[v / self.sub];
                    if pos != usize::MAX {
                        let (r, cc) = (pi * self.sub + row, pos * self.sub + v % self.sub);
                        m.set(r, cc, add(m.get(r, cc), c));
                    }
                }
            }
        }
        m
    }

    /// Dense `(n-k)*sub x k*sub` parity generator.
    pub fn dense(&self) -> FieldMatrix {
        let mut m = FieldMatrix::zeros(self.rows.len(), self.k * self.sub);
        for (r, row) in self.rows.iter().enumerate() {
            for &(v, c) in row {
                m.set(r, v, add(m.get(r, v), c));
            }
        }
        m
    }
}
