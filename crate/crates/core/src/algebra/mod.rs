//! Cayley-Dickson numbers at any level, the complexified algebra, and the
//! coordinate projections.

pub mod basis;
mod complexified;
mod number;

pub use basis::{basis_product, basis_product_capped, basis_product_raw, table, SignedBasis, Table, DEFAULT_MAX_LEVEL};
pub use complexified::Ccd;
pub use number::{real_scalar_product, CdNumber};

use crate::error::{Error, Result};

/// Coordinate `z_j`, read directly from the coefficient array.
pub fn project_coordinate(z: &CdNumber, j: usize) -> Result<f64> {
    if j >= z.dim() {
        return Err(Error::Domain(format!("coordinate {j} out of range for level {}", z.level())));
    }
    Ok(z[j])
}

/// `(2^r - 2)^{-1} { -z + Σ_{k≥1} i_k (z i_k^*) }`, which equals `z^*` for `r ≥ 2`.
fn conj_by_generators(z: &CdNumber) -> Result<CdNumber> {
    let r = z.level();
    if r < 2 {
        return Err(Error::Domain("generator-sum formula needs level >= 2".into()));
    }
    let mut acc = -z;
    for k in 1..z.dim() {
        let ik = CdNumber::basis(r, k);
        acc += &ik.mul(&z.mul(&ik.conj()));
    }
    Ok(acc.scale(1.0 / ((1u64 << r) as f64 - 2.0)))
}

/// Coordinate `z_j` through the generator formulas; level 1 falls back to the direct read.
pub fn project_coordinate_formula(z: &CdNumber, j: usize) -> Result<f64> {
    if z.level() < 2 {
        return project_coordinate(z, j);
    }
    if j >= z.dim() {
        return Err(Error::Domain(format!("coordinate {j} out of range for level {}", z.level())));
    }
    let w = conj_by_generators(z)?;
    if j == 0 {
        return Ok((z + &w).re() / 2.0);
    }
    let ij = CdNumber::basis(z.level(), j);
    Ok((&(-&z.mul(&ij)) + &ij.mul(&w)).re() / 2.0)
}

/// Projection `π_j(z) = z_j i_j` through the generator formulas.
pub fn project_component(z: &CdNumber, j: usize) -> Result<CdNumber> {
    if z.level() < 2 {
        let mut out = CdNumber::zero(z.level());
        out[j] = project_coordinate(z, j)?;
        return Ok(out);
    }
    let w = conj_by_generators(z)?;
    if j == 0 {
        return Ok((z + &w).scale(0.5));
    }
    let ij = CdNumber::basis(z.level(), j);
    Ok((&(-&ij.mul(&z.mul(&ij))) - &w).scale(0.5))
}
