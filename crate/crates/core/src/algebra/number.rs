use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use super::basis::{basis_product_raw, table, DEFAULT_MAX_LEVEL};
use crate::error::{Error, Result};

/// Cayley-Dickson number of level `v`: `2^v` real coefficients, index `j` on `i_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CdNumber {
    coeffs: Vec<f64>,
}

impl CdNumber {
    pub fn zero(level: u32) -> Self {
        CdNumber { coeffs: vec![0.0; 1 << level] }
    }

    pub fn one(level: u32) -> Self {
        Self::real(level, 1.0)
    }

    pub fn real(level: u32, x: f64) -> Self {
        let mut z = Self::zero(level);
        z.coeffs[0] = x;
        z
    }

    /// The generator `i_k`, embedded at the given level.
    pub fn basis(level: u32, k: usize) -> Self {
        let mut z = Self::zero(level);
        z.coeffs[k] = 1.0;
        z
    }

    pub fn from_coeffs(coeffs: Vec<f64>) -> Result<Self> {
        let n = coeffs.len();
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::Domain(format!("coefficient count {n} is not a power of two")));
        }
        Ok(CdNumber { coeffs })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn level(&self) -> u32 {
        self.coeffs.len().trailing_zeros()
    }

    pub fn re(&self) -> f64 {
        self.coeffs[0]
    }

    /// Zero-pad to a higher level; lower or equal levels return a copy.
    pub fn embed(&self, level: u32) -> Self {
        let n = 1usize << level;
        if n <= self.coeffs.len() {
            return self.clone();
        }
        let mut c = self.coeffs.clone();
        c.resize(n, 0.0);
        CdNumber { coeffs: c }
    }

    pub fn conj(&self) -> Self {
        let mut c = self.coeffs.clone();
        for x in c.iter_mut().skip(1) {
            *x = -*x;
        }
        CdNumber { coeffs: c }
    }

    /// Imaginary part, `x - Re(x)`.
    pub fn im(&self) -> Self {
        let mut c = self.coeffs.clone();
        c[0] = 0.0;
        CdNumber { coeffs: c }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|x| x * x).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&self, s: f64) -> Self {
        CdNumber { coeffs: self.coeffs.iter().map(|x| x * s).collect() }
    }

    pub fn is_real(&self) -> bool {
        self.coeffs[1..].iter().all(|&x| x == 0.0)
    }

    /// Largest absolute coefficient difference, after embedding both operands.
    pub fn max_abs_diff(&self, other: &CdNumber) -> f64 {
        let (a, b) = lift(self, other);
        a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    pub fn mul(&self, other: &CdNumber) -> CdNumber {
        let (a, b) = lift(self, other);
        let v = a.level();
        let n = a.dim();
        let mut out = vec![0.0; n];
        if v <= DEFAULT_MAX_LEVEL {
            let t = table(v).expect("level within cached range");
            for (i, &x) in a.coeffs.iter().enumerate() {
                if x == 0.0 {
                    continue;
                }
                for (j, &y) in b.coeffs.iter().enumerate() {
                    if y == 0.0 {
                        continue;
                    }
                    let (k, s) = t.get_f(i, j);
                    out[k] += s * x * y;
                }
            }
        } else {
            for (i, &x) in a.coeffs.iter().enumerate() {
                if x == 0.0 {
                    continue;
                }
                for (j, &y) in b.coeffs.iter().enumerate() {
                    if y == 0.0 {
                        continue;
                    }
                    let p = basis_product_raw(i, j, v);
                    out[p.index] += p.sign() * x * y;
                }
            }
        }
        CdNumber { coeffs: out }
    }

    /// `x^* / |x|^2`, with the product back-checked for zero divisors from level 4 on.
    pub fn inverse(&self) -> Result<CdNumber> {
        let n2 = self.norm_sqr();
        if n2 == 0.0 {
            return Err(Error::DivisionByZero);
        }
        let inv = self.conj().scale(1.0 / n2);
        if self.level() >= 4 {
            let residual = self.mul(&inv).max_abs_diff(&CdNumber::one(self.level()));
            if residual > 1e-12 {
                return Err(Error::ZeroDivisor { residual });
            }
        }
        Ok(inv)
    }

    /// Left-nested power `(...((x x) x)...) x`; `x^0 = 1`.
    pub fn powi(&self, k: u32) -> CdNumber {
        let mut acc = CdNumber::one(self.level());
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    /// `exp(x) = e^{Re x} (cos|Im x| + Im x / |Im x| sin|Im x|)`.
    pub fn exp(&self) -> CdNumber {
        let a = self.re().exp();
        let im = self.im();
        let t = im.norm();
        let mut out = if t > 0.0 { im.scale(a * t.sin() / t) } else { CdNumber::zero(self.level()) };
        out.coeffs[0] = a * t.cos();
        out
    }
}

/// Embed both operands at the larger of their levels.
pub(crate) fn lift<'a>(
    a: &'a CdNumber,
    b: &'a CdNumber,
) -> (std::borrow::Cow<'a, CdNumber>, std::borrow::Cow<'a, CdNumber>) {
    use std::borrow::Cow;
    match a.dim().cmp(&b.dim()) {
        std::cmp::Ordering::Equal => (Cow::Borrowed(a), Cow::Borrowed(b)),
        std::cmp::Ordering::Less => (Cow::Owned(a.embed(b.level())), Cow::Borrowed(b)),
        std::cmp::Ordering::Greater => (Cow::Borrowed(a), Cow::Owned(b.embed(a.level()))),
    }
}

/// `(x, y) = Re(x y*)`.
pub fn real_scalar_product(x: &CdNumber, y: &CdNumber) -> f64 {
    x.mul(&y.conj()).re()
}

impl Index<usize> for CdNumber {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.coeffs[i]
    }
}

impl IndexMut<usize> for CdNumber {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.coeffs[i]
    }
}

impl AddAssign<&CdNumber> for CdNumber {
    fn add_assign(&mut self, rhs: &CdNumber) {
        if rhs.dim() > self.dim() {
            self.coeffs.resize(rhs.dim(), 0.0);
        }
        for (x, y) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *x += y;
        }
    }
}

impl SubAssign<&CdNumber> for CdNumber {
    fn sub_assign(&mut self, rhs: &CdNumber) {
        if rhs.dim() > self.dim() {
            self.coeffs.resize(rhs.dim(), 0.0);
        }
        for (x, y) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *x -= y;
        }
    }
}

impl Add for &CdNumber {
    type Output = CdNumber;
    fn add(self, rhs: &CdNumber) -> CdNumber {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub for &CdNumber {
    type Output = CdNumber;
    fn sub(self, rhs: &CdNumber) -> CdNumber {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl Add for CdNumber {
    type Output = CdNumber;
    fn add(mut self, rhs: CdNumber) -> CdNumber {
        self += &rhs;
        self
    }
}

impl Sub for CdNumber {
    type Output = CdNumber;
    fn sub(mut self, rhs: CdNumber) -> CdNumber {
        self -= &rhs;
        self
    }
}

impl Neg for &CdNumber {
    type Output = CdNumber;
    fn neg(self) -> CdNumber {
        self.scale(-1.0)
    }
}

impl Neg for CdNumber {
    type Output = CdNumber;
    fn neg(self) -> CdNumber {
        self.scale(-1.0)
    }
}

impl Mul for &CdNumber {
    type Output = CdNumber;
    fn mul(self, rhs: &CdNumber) -> CdNumber {
        CdNumber::mul(self, rhs)
    }
}

impl Mul<f64> for &CdNumber {
    type Output = CdNumber;
    fn mul(self, rhs: f64) -> CdNumber {
        self.scale(rhs)
    }
}

impl fmt::Display for CdNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            if !first {
                write!(f, " {} ", if c < 0.0 { '-' } else { '+' })?;
            } else if c < 0.0 {
                write!(f, "-")?;
            }
            let a = c.abs();
            if k == 0 {
                write!(f, "{a}")?;
            } else if a == 1.0 {
                write!(f, "i{k}")?;
            } else {
                write!(f, "{a}*i{k}")?;
            }
            first = false;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}
