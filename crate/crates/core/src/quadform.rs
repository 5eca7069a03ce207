//! Reduction of the principal quadratic form to a sum of squares.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::Expr;

/// Orthogonal change of variables `C` with `Cᵀ A C = diag(b)`.
#[derive(Debug, Clone, Serialize)]
pub struct QuadReduction {
    /// Row-major `n × n`; column `l` is the direction of the new coordinate `s_l`.
    pub c: Vec<Vec<f64>>,
    /// Diagonal values, sorted descending.
    pub b: Vec<f64>,
    pub p: usize,
    pub q: usize,
    /// Number of eigenvalues below the degeneracy threshold.
    pub zero: usize,
    /// Input was not symmetric and was replaced by `(A + Aᵀ)/2`.
    pub symmetrized: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FormKind {
    Elliptic,
    Hyperbolic,
    Ultrahyperbolic,
    /// Degenerate form; with a non-vanishing first-order term this is the parabolic case.
    Degenerate,
}

impl QuadReduction {
    pub fn n(&self) -> usize {
        self.b.len()
    }

    pub fn kind(&self) -> FormKind {
        let n = self.n();
        if self.zero > 0 {
            FormKind::Degenerate
        } else if self.p == n || self.q == n {
            FormKind::Elliptic
        } else if self.p == 1 || self.q == 1 {
            FormKind::Hyperbolic
        } else {
            FormKind::Ultrahyperbolic
        }
    }

    /// `Cᵀ M C` for an arbitrary square matrix.
    pub fn congruence(&self, m: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = self.n();
        let mut out = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        s += self.c[a][i] * m[a][b] * self.c[b][j];
                    }
                }
                out[i][j] = s;
            }
        }
        out
    }
}

const MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns eigenvalues
/// and a row-major matrix whose columns are the eigenvectors.
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let scale: f64 = m.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        if off.sqrt() <= 1e-15 * scale.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    ((0..n).map(|i| m[i][i]).collect(), v)
}

/// Diagonalize a real symmetric matrix by an orthogonal change of variables.
pub fn reduce_to_squares(a: &[Vec<f64>]) -> Result<QuadReduction> {
    let n = a.len();
    if a.iter().any(|row| row.len() != n) {
        return Err(Error::Spec("quadratic form matrix is not square".into()));
    }
    if a.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::Spec("quadratic form has non-finite entries".into()));
    }
    let mut sym = a.to_vec();
    let mut symmetrized = false;
    for i in 0..n {
        for j in i + 1..n {
            if a[i][j] != a[j][i] {
                symmetrized = true;
                let m = 0.5 * (a[i][j] + a[j][i]);
                sym[i][j] = m;
                sym[j][i] = m;
            }
        }
    }
    let (vals, vecs) = jacobi_eigen(&sym);
    let norm: f64 = sym.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    let tol = 1e-10 * norm;

    // Each eigenvector is oriented with its dominant component positive and is
    // keyed by that component's axis for tie-breaking.
    let mut cols: Vec<(f64, usize, Vec<f64>)> = (0..n)
        .map(|l| {
            let mut col: Vec<f64> = (0..n).map(|k| vecs[k][l]).collect();
            let axis = (0..n).fold(0, |best, k| if col[k].abs() > col[best].abs() + 1e-12 { k } else { best });
            if col[axis] < 0.0 {
                col.iter_mut().for_each(|x| *x = -*x);
            }
            let val = if vals[l].abs() <= tol { 0.0 } else { vals[l] };
            (val, axis, col)
        })
        .collect();
    cols.sort_by(|x, y| y.0.partial_cmp(&x.0).expect("finite").then(x.1.cmp(&y.1)));

    let b: Vec<f64> = cols.iter().map(|c| c.0).collect();
    let mut c = vec![vec![0.0; n]; n];
    for (l, col) in cols.iter().enumerate() {
        for k in 0..n {
            c[k][l] = col.2[k];
        }
    }
    Ok(QuadReduction {
        p: b.iter().filter(|&&x| x > 0.0).count(),
        q: b.iter().filter(|&&x| x < 0.0).count(),
        zero: b.iter().filter(|&&x| x == 0.0).count(),
        b,
        c,
        symmetrized,
    })
}

/// First-order coefficients in the new variables, `β_j = Σ_v α_v C_{v,j}`
/// (the derivative term vanishes for constant `C`).
pub fn transform_first_order(alpha: &[Expr], c: &[Vec<f64>]) -> Vec<Expr> {
    let n = c.len();
    (0..n)
        .map(|j| {
            alpha
                .iter()
                .enumerate()
                .fold(Expr::num(0.0), |acc, (v, a)| Expr::add(acc, Expr::mul(Expr::num(c[v][j]), a.clone())))
        })
        .collect()
}
