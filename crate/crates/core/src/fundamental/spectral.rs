//! Periodic Klein–Gordon solves: FFT with the exact symbol, and a
//! fourth-order finite-difference discretization diagonalized by a direct DFT.

use std::f64::consts::PI;

use super::grid::{GridField, GridSpec};
use super::kernels::quadratic_form;
use crate::algebra::Ccd;
use crate::error::{Error, Result};

/// In-place radix-2 transform of `(re, im)` with stride `stride` and `len` points.
fn fft_line(re: &mut [f64], im: &mut [f64], start: usize, stride: usize, len: usize, inverse: bool) {
    let at = |k: usize| start + k * stride;
    let mut j = 0usize;
    for i in 1..len {
        let mut bit = len >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            re.swap(at(i), at(j));
            im.swap(at(i), at(j));
        }
    }
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut size = 2;
    while size <= len {
        let theta = sign * 2.0 * PI / size as f64;
        for s in (0..len).step_by(size) {
            for k in 0..size / 2 {
                let (wr, wi) = ((theta * k as f64).cos(), (theta * k as f64).sin());
                let (a, b) = (at(s + k), at(s + k + size / 2));
                let tr = wr * re[b] - wi * im[b];
                let ti = wr * im[b] + wi * re[b];
                re[b] = re[a] - tr;
                im[b] = im[a] - ti;
                re[a] += tr;
                im[a] += ti;
            }
        }
        size <<= 1;
    }
}

fn fft_nd(shape: &[usize], re: &mut [f64], im: &mut [f64], inverse: bool) {
    let total: usize = shape.iter().product();
    for (axis, &len) in shape.iter().enumerate() {
        let stride: usize = shape[axis + 1..].iter().product();
        for start in 0..total {
            // first node of each line along `axis`
            if (start / stride) % len == 0 {
                fft_line(re, im, start, stride, len, inverse);
            }
        }
    }
    if inverse {
        let s = 1.0 / total as f64;
        re.iter_mut().for_each(|v| *v *= s);
        im.iter_mut().for_each(|v| *v *= s);
    }
}

/// Angular frequency of FFT bin `m` on `len` nodes of spacing `h`.
fn wavenumber(m: usize, len: usize, h: f64) -> f64 {
    let signed = if m <= len / 2 { m as f64 } else { m as f64 - len as f64 };
    2.0 * PI * signed / (len as f64 * h)
}

fn scalar_parts(g: &GridField) -> Result<(Vec<f64>, Vec<f64>)> {
    if g.level() > 0 {
        return Err(Error::Spec("spectral solves take scalar (level 0) right-hand sides".into()));
    }
    Ok(g.values.iter().map(Ccd::scalar_part).unzip())
}

/// Periodic solution of `(L_{p,q} + c²)u = g` with `L_{p,q} = Σ_{j<p} ∂_j² − Σ_{j≥p} ∂_j²`,
/// dividing by the symbol `c² − P(ξ) + b𝐢ε` on the FFT grid of `g`.
pub fn klein_gordon_solve_spectral(p: usize, c: f64, b: i32, eps: f64, g: &GridField) -> Result<GridField> {
    if g.shape.iter().any(|s| !s.is_power_of_two()) {
        return Err(Error::Spec(format!("spectral grid {:?} needs power-of-two node counts", g.shape)));
    }
    let bf = match b {
        1 => 1.0,
        -1 => -1.0,
        _ => return Err(Error::Domain(format!("branch must be +1 or -1, got {b}"))),
    };
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("regularization needs eps > 0, got {eps}")));
    }
    let (mut re, mut im) = scalar_parts(g)?;
    fft_nd(&g.shape, &mut re, &mut im, false);
    let n = g.dimension();
    for i in 0..g.len() {
        let idx = g.multi_index(i);
        let xi: Vec<f64> = (0..n).map(|k| wavenumber(idx[k], g.shape[k], g.spacing[k])).collect();
        let (sr, si) = (c * c - quadratic_form(p, &xi), bf * eps);
        let d = sr * sr + si * si;
        let (a, bb) = (re[i], im[i]);
        re[i] = (a * sr + bb * si) / d;
        im[i] = (bb * sr - a * si) / d;
    }
    fft_nd(&g.shape, &mut re, &mut im, true);
    GridField::new(
        g.shape.clone(),
        g.origin.clone(),
        g.spacing.clone(),
        re.into_iter().zip(im).map(|(a, b)| Ccd::scalar(0, a, b)).collect(),
    )
}

/// Eigenvalue of the periodic fourth-order second-difference stencil
/// `(−u_{i+2} + 16u_{i+1} − 30u_i + 16u_{i−1} − u_{i−2})/(12h²)` on mode `m`.
fn stencil_symbol(m: usize, len: usize, h: f64) -> f64 {
    let t = 2.0 * PI * m as f64 / len as f64;
    (-2.0 * (2.0 * t).cos() + 32.0 * t.cos() - 30.0) / (12.0 * h * h)
}

/// Direct DFT along one axis of a 2-D array (row-major, `rows × cols`).
fn dft_axis(re: &mut [f64], im: &mut [f64], rows: usize, cols: usize, axis: usize, inverse: bool) {
    let len = if axis == 0 { rows } else { cols };
    let lines = if axis == 0 { cols } else { rows };
    let sign = if inverse { 1.0 } else { -1.0 };
    let table: Vec<(f64, f64)> =
        (0..len).map(|k| (2.0 * PI * k as f64 / len as f64).sin_cos()).map(|(s, c)| (c, sign * s)).collect();
    let mut br = vec![0.0; len];
    let mut bi = vec![0.0; len];
    for line in 0..lines {
        let at = |k: usize| if axis == 0 { k * cols + line } else { line * cols + k };
        for m in 0..len {
            let (mut sr, mut si) = (0.0, 0.0);
            for k in 0..len {
                let (c, s) = table[(m * k) % len];
                let (a, b) = (re[at(k)], im[at(k)]);
                sr += a * c - b * s;
                si += a * s + b * c;
            }
            br[m] = sr;
            bi[m] = si;
        }
        for k in 0..len {
            let scale = if inverse { 1.0 / len as f64 } else { 1.0 };
            re[at(k)] = br[k] * scale;
            im[at(k)] = bi[k] * scale;
        }
    }
}

/// Periodic solution of `(∂_1² − ∂_2² + c² + b𝐢ε)u = g` in 1+1 dimensions,
/// discretized with the fourth-order stencil on `spec`; `g` is sampled at
/// the nodes.
pub fn klein_gordon_solve_fd(
    c: f64,
    b: i32,
    eps: f64,
    spec: &GridSpec,
    g: &(dyn Fn(&[f64]) -> f64 + Sync),
) -> Result<GridField> {
    if spec.shape.len() != 2 {
        return Err(Error::Spec("the finite-difference Klein-Gordon solver is 1+1 dimensional".into()));
    }
    let bf = match b {
        1 => 1.0,
        -1 => -1.0,
        _ => return Err(Error::Domain(format!("branch must be +1 or -1, got {b}"))),
    };
    let (rows, cols) = (spec.shape[0], spec.shape[1]);
    if rows < 5 || cols < 5 {
        return Err(Error::Stencil("each axis needs at least 5 nodes".into()));
    }
    let mut re: Vec<f64> = (0..spec.len()).map(|i| g(&spec.point(i))).collect();
    let mut im = vec![0.0; spec.len()];
    dft_axis(&mut re, &mut im, rows, cols, 0, false);
    dft_axis(&mut re, &mut im, rows, cols, 1, false);
    for m1 in 0..rows {
        let d1 = stencil_symbol(m1, rows, spec.spacing[0]);
        for m2 in 0..cols {
            let d2 = stencil_symbol(m2, cols, spec.spacing[1]);
            let (sr, si) = (c * c + d1 - d2, bf * eps);
            let den = sr * sr + si * si;
            let i = m1 * cols + m2;
            let (a, bb) = (re[i], im[i]);
            re[i] = (a * sr + bb * si) / den;
            im[i] = (bb * sr - a * si) / den;
        }
    }
    dft_axis(&mut re, &mut im, rows, cols, 0, true);
    dft_axis(&mut re, &mut im, rows, cols, 1, true);
    GridField::new(
        spec.shape.clone(),
        spec.origin.clone(),
        spec.spacing.clone(),
        re.into_iter().zip(im).map(|(a, b)| Ccd::scalar(0, a, b)).collect(),
    )
}
