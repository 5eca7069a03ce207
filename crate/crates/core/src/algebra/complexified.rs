use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use super::number::CdNumber;

/// Element `re + im·𝐢` of the complexified algebra, where `𝐢` commutes with
/// every generator and squares to -1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ccd {
    pub re: CdNumber,
    pub im: CdNumber,
}

impl Ccd {
    pub fn new(re: CdNumber, im: CdNumber) -> Self {
        let level = re.level().max(im.level());
        Ccd { re: re.embed(level), im: im.embed(level) }
    }

    pub fn from_real(re: CdNumber) -> Self {
        let im = CdNumber::zero(re.level());
        Ccd { re, im }
    }

    pub fn zero(level: u32) -> Self {
        Ccd { re: CdNumber::zero(level), im: CdNumber::zero(level) }
    }

    /// The commuting unit `𝐢`.
    pub fn unit_i(level: u32) -> Self {
        Ccd { re: CdNumber::zero(level), im: CdNumber::one(level) }
    }

    /// Complex scalar `a + b𝐢` at the given level.
    pub fn scalar(level: u32, a: f64, b: f64) -> Self {
        Ccd { re: CdNumber::real(level, a), im: CdNumber::real(level, b) }
    }

    pub fn level(&self) -> u32 {
        self.re.level().max(self.im.level())
    }

    pub fn embed(&self, level: u32) -> Self {
        Ccd { re: self.re.embed(level), im: self.im.embed(level) }
    }

    pub fn mul(&self, other: &Ccd) -> Ccd {
        Ccd {
            re: &self.re.mul(&other.re) - &self.im.mul(&other.im),
            im: &self.re.mul(&other.im) + &self.im.mul(&other.re),
        }
    }

    /// Right multiplication by a real-algebra element.
    pub fn mul_cd(&self, other: &CdNumber) -> Ccd {
        Ccd { re: self.re.mul(other), im: self.im.mul(other) }
    }

    /// Left multiplication `x · self` by a real-algebra element.
    pub fn lmul_cd(&self, x: &CdNumber) -> Ccd {
        Ccd { re: x.mul(&self.re), im: x.mul(&self.im) }
    }

    /// Conjugation of the algebra part only; `𝐢` is left fixed.
    pub fn conj_cd(&self) -> Ccd {
        Ccd { re: self.re.conj(), im: self.im.conj() }
    }

    /// Complex conjugation `𝐢 -> -𝐢`, algebra part untouched.
    pub fn conj_i(&self) -> Ccd {
        Ccd { re: self.re.clone(), im: -&self.im }
    }

    pub fn scale(&self, s: f64) -> Ccd {
        Ccd { re: self.re.scale(s), im: self.im.scale(s) }
    }

    /// Multiply by the complex scalar `a + b𝐢`.
    pub fn scale_c(&self, a: f64, b: f64) -> Ccd {
        Ccd { re: &self.re.scale(a) - &self.im.scale(b), im: &self.re.scale(b) + &self.im.scale(a) }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.re.norm_sqr() + self.im.norm_sqr()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Scalar part as a complex pair `(Re re, Re im)`.
    pub fn scalar_part(&self) -> (f64, f64) {
        (self.re.re(), self.im.re())
    }

    pub fn max_abs_diff(&self, other: &Ccd) -> f64 {
        self.re.max_abs_diff(&other.re).max(self.im.max_abs_diff(&other.im))
    }
}

impl Add for &Ccd {
    type Output = Ccd;
    fn add(self, rhs: &Ccd) -> Ccd {
        Ccd { re: &self.re + &rhs.re, im: &self.im + &rhs.im }
    }
}

impl Sub for &Ccd {
    type Output = Ccd;
    fn sub(self, rhs: &Ccd) -> Ccd {
        Ccd { re: &self.re - &rhs.re, im: &self.im - &rhs.im }
    }
}

impl Neg for &Ccd {
    type Output = Ccd;
    fn neg(self) -> Ccd {
        self.scale(-1.0)
    }
}

impl Mul for &Ccd {
    type Output = Ccd;
    fn mul(self, rhs: &Ccd) -> Ccd {
        Ccd::mul(self, rhs)
    }
}

impl std::ops::AddAssign<&Ccd> for Ccd {
    fn add_assign(&mut self, rhs: &Ccd) {
        self.re += &rhs.re;
        self.im += &rhs.im;
    }
}

impl From<CdNumber> for Ccd {
    fn from(re: CdNumber) -> Ccd {
        Ccd::from_real(re)
    }
}
