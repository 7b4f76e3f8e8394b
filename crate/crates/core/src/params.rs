use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf::{FieldSpec, Symbol};

pub const DEFAULT_THETA: Symbol = Symbol(2);
pub const DEFAULT_SEED: u64 = 0x4854_5031;

/// Parameters of one HashTag+ code instance.
///
/// `alpha_b` is the sub-packetization of the base code; every node stores
/// `alpha = r * alpha_b` symbols per stripe.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CodeParams {
    pub n: usize,
    pub k: usize,
    pub alpha_b: usize,
    pub field: FieldSpec,
    pub theta: Symbol,
    pub seed: u64,
}

pub(crate) fn ceil_div(a: usize, b: usize) -> usize {
    a.div_ceil(b)
}

impl CodeParams {
    pub fn new(n: usize, k: usize, alpha_b: usize, field: FieldSpec, theta: Symbol, seed: u64) -> Result<Self> {
        let p = CodeParams {
            n,
            k,
            alpha_b,
            field,
            theta,
            seed,
        };
        p.validate()?;
        Ok(p)
    }

    /// Default polynomial for `w`, theta = 2, default seed.
    pub fn with_width(n: usize, k: usize, alpha_b: usize, w: u8) -> Result<Self> {
        Self::new(n, k, alpha_b, FieldSpec::with_default_poly(w)?, DEFAULT_THETA, DEFAULT_SEED)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if self.k < 2 {
            return bad(format!("k = {} must be at least 2", self.k));
        }
        if self.n < self.k + 2 {
            return bad(format!("n = {} must exceed k = {} by at least 2", self.n, self.k));
        }
        if self.n > u8::MAX as usize {
            return bad(format!("n = {} exceeds 255", self.n));
        }
        let max = self.max_alpha_b();
        if self.alpha_b < 2 || self.alpha_b > max {
            return bad(format!(
                "alpha_b = {} outside [2, {}] for r = {}, k = {}",
                self.alpha_b,
                max,
                self.r(),
                self.k
            ));
        }
        if self.alpha_b > u16::MAX as usize {
            return bad(format!("alpha_b = {} exceeds 65535", self.alpha_b));
        }
        // re-check the field description; it may come from an untrusted header
        FieldSpec::new(self.field.w, self.field.poly)?;
        if (self.theta.0 as u64) >= self.field.order() {
            return bad(format!("theta = {} is not a field element", self.theta));
        }
        if self.theta.0 <= 1 {
            return bad(format!("theta = {} must not be 0 or 1", self.theta));
        }
        Ok(())
    }

    pub fn r(&self) -> usize {
        self.n - self.k
    }

    pub fn alpha(&self) -> usize {
        self.r() * self.alpha_b
    }

    /// Number of extra columns in the arrays P_1..P_{r-1}, ceil(k/r).
    pub fn extra_cols(&self) -> usize {
        ceil_div(self.k, self.r())
    }

    /// r^ceil(k/r), saturating.
    pub fn max_alpha_b(&self) -> usize {
        max_alpha_b(self.k, self.r())
    }

    /// Symbols per stripe, M = k * alpha.
    pub fn stripe_symbols(&self) -> usize {
        self.k * self.alpha()
    }

    /// C(n,k) * r * alpha_b, the field order that guarantees an MDS choice exists.
    pub fn field_threshold(&self) -> u64 {
        binomial(self.n as u64, self.k as u64)
            .saturating_mul(self.r() as u64)
            .saturating_mul(self.alpha_b as u64)
    }
}

pub fn max_alpha_b(k: usize, r: usize) -> usize {
    let e = ceil_div(k, r) as u32;
    (r as u64).checked_pow(e).map_or(usize::MAX, |v| v.min(usize::MAX as u64) as usize)
}

pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}
