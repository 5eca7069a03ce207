use std::fmt;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Largest level whose multiplication table is cached.
pub const DEFAULT_MAX_LEVEL: u32 = 8;

/// A basis generator with a sign, `sign * i_index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SignedBasis {
    pub negative: bool,
    pub index: usize,
}

impl SignedBasis {
    pub const fn pos(index: usize) -> Self {
        SignedBasis { negative: false, index }
    }

    pub const fn neg(index: usize) -> Self {
        SignedBasis { negative: true, index }
    }

    pub fn sign(self) -> f64 {
        if self.negative {
            -1.0
        } else {
            1.0
        }
    }

    pub fn negate(self) -> Self {
        SignedBasis { negative: !self.negative, index: self.index }
    }

    /// Conjugation: i_0 is fixed, every other generator flips sign.
    pub fn conj(self) -> Self {
        if self.index == 0 {
            self
        } else {
            self.negate()
        }
    }
}

impl fmt::Display for SignedBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", if self.negative { '-' } else { '+' }, self.index)
    }
}

/// Uncached product of two unsigned generators at level `v` by the doubling rule.
///
/// Writing `e_a = xi + eta l` with the upper half of the index range carrying `l`,
/// the four cases of `(xi + eta l)(gamma + delta l)` reduce to a single basis product
/// one level down.
pub fn basis_product_raw(a: usize, b: usize, v: u32) -> SignedBasis {
    if v == 0 {
        return SignedBasis::pos(0);
    }
    let h = 1usize << (v - 1);
    match (a >= h, b >= h) {
        (false, false) => basis_product_raw(a, b, v - 1),
        (false, true) => {
            // (e_b' e_a) l
            let p = basis_product_raw(b - h, a, v - 1);
            SignedBasis { negative: p.negative, index: p.index + h }
        }
        (true, false) => {
            // (e_a' conj(e_b)) l
            let p = basis_product_raw(a - h, b, v - 1);
            let p = if b != 0 { p.negate() } else { p };
            SignedBasis { negative: p.negative, index: p.index + h }
        }
        (true, true) => {
            // -conj(e_b') e_a'
            let p = basis_product_raw(b - h, a - h, v - 1);
            if b != h {
                p
            } else {
                p.negate()
            }
        }
    }
}

/// Multiplication table for one level, entries packed as `index | sign_bit`.
pub struct Table {
    level: u32,
    dim: usize,
    entries: Vec<u32>,
}

const SIGN_BIT: u32 = 1 << 31;

impl Table {
    fn build(level: u32) -> Self {
        let dim = 1usize << level;
        let mut entries = Vec::with_capacity(dim * dim);
        for a in 0..dim {
            for b in 0..dim {
                let p = basis_product_raw(a, b, level);
                entries.push(p.index as u32 | if p.negative { SIGN_BIT } else { 0 });
            }
        }
        Table { level, dim, entries }
    }

    /// One row per left factor, entries `±k`, comma-separated.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for a in 0..self.dim {
            let row: Vec<String> = (0..self.dim).map(|b| self.get(a, b).to_string()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> SignedBasis {
        let e = self.entries[a * self.dim + b];
        SignedBasis { negative: e & SIGN_BIT != 0, index: (e & !SIGN_BIT) as usize }
    }

    /// Signed entry as `(index, ±1.0)`, the form used by the multiply kernel.
    #[inline]
    pub fn get_f(&self, a: usize, b: usize) -> (usize, f64) {
        let e = self.entries[a * self.dim + b];
        ((e & !SIGN_BIT) as usize, if e & SIGN_BIT != 0 { -1.0 } else { 1.0 })
    }
}

static TABLES: [OnceLock<Table>; DEFAULT_MAX_LEVEL as usize + 1] =
    [const { OnceLock::new() }; DEFAULT_MAX_LEVEL as usize + 1];

/// Cached table for `level <= DEFAULT_MAX_LEVEL`.
pub fn table(level: u32) -> Result<&'static Table> {
    if level > DEFAULT_MAX_LEVEL {
        return Err(Error::Capacity { level, max: DEFAULT_MAX_LEVEL });
    }
    Ok(TABLES[level as usize].get_or_init(|| Table::build(level)))
}

/// Product of signed generators at level `v`, with the default level cap.
pub fn basis_product(a: SignedBasis, b: SignedBasis, v: u32) -> Result<SignedBasis> {
    basis_product_capped(a, b, v, DEFAULT_MAX_LEVEL)
}

/// Product of signed generators with an explicit level cap. Levels above the
/// cached range are computed on demand.
pub fn basis_product_capped(a: SignedBasis, b: SignedBasis, v: u32, max_level: u32) -> Result<SignedBasis> {
    if v > max_level {
        return Err(Error::Capacity { level: v, max: max_level });
    }
    let dim = 1usize << v;
    if a.index >= dim || b.index >= dim {
        return Err(Error::Domain(format!("basis index {} or {} out of range for level {v}", a.index, b.index)));
    }
    let p =
        if v <= DEFAULT_MAX_LEVEL { table(v)?.get(a.index, b.index) } else { basis_product_raw(a.index, b.index, v) };
    Ok(if a.negative != b.negative { p.negate() } else { p })
}
