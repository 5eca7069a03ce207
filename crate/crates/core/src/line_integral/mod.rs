//! Non-commutative line integrals of phrases along polylines, and the
//! anti-derivative `I_Υ` for `Υ g = Σ_j (∂g/∂z_j) i_j^* ψ_j`.

mod integrate;
mod path;
mod phrase;

#[cfg(test)]
mod tests;

pub use integrate::{
    antiderivative, antiderivative_field, antiderivative_with, family_path, line_integrate, line_integrate_fn,
    riemann_sum, verify_left_inverse, Integrand, LeftInverseReport, LineOptions, Nu, NuKind, NuSystem, NuTable,
    PathFamily, PsiOperator, TargetGrid,
};
pub use path::Path;
pub use phrase::{parse_phrase, Node, Phrase, Word};
