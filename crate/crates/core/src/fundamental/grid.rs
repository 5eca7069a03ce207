use std::fmt::Write as _;
use std::path::Path as FsPath;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{Ccd, CdNumber};
use crate::error::{Error, Result};

fn validate_layout(shape: &[usize], origin: &[f64], spacing: &[f64]) -> Result<()> {
    let n = shape.len();
    if n == 0 || origin.len() != n || spacing.len() != n {
        return Err(Error::Spec("grid shape, origin and spacing must have the same positive length".into()));
    }
    if spacing.iter().any(|&h| !(h > 0.0)) {
        return Err(Error::Spec("grid spacing must be positive".into()));
    }
    if shape.contains(&0) {
        return Err(Error::Spec("every grid axis needs at least one node".into()));
    }
    Ok(())
}

/// Node layout of a regular tensor grid, without values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub shape: Vec<usize>,
    pub origin: Vec<f64>,
    pub spacing: Vec<f64>,
}

impl GridSpec {
    pub fn new(shape: Vec<usize>, origin: Vec<f64>, spacing: Vec<f64>) -> Result<Self> {
        validate_layout(&shape, &origin, &spacing)?;
        Ok(GridSpec { shape, origin, spacing })
    }

    /// `nodes` points per axis on `[lo, hi]^n`.
    pub fn cube(n: usize, nodes: usize, lo: f64, hi: f64) -> Result<Self> {
        if nodes < 2 {
            return Err(Error::Spec("a grid axis needs at least 2 nodes".into()));
        }
        GridSpec::new(vec![nodes; n], vec![lo; n], vec![(hi - lo) / (nodes - 1) as f64; n])
    }

    /// Odd node count per axis, symmetric about the origin: `-half..=half` steps of `h`.
    pub fn centered(n: usize, half: usize, h: f64) -> Result<Self> {
        GridSpec::new(vec![2 * half + 1; n], vec![-(half as f64) * h; n], vec![h; n])
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, mut flat: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.shape.len()];
        for k in (0..self.shape.len()).rev() {
            x[k] = self.origin[k] + (flat % self.shape[k]) as f64 * self.spacing[k];
            flat /= self.shape[k];
        }
        x
    }

    pub fn sample<F, V>(&self, f: F) -> Result<GridField>
    where
        F: Fn(&[f64]) -> Result<V> + Sync,
        V: Into<Ccd>,
    {
        GridField::from_fn(self.shape.clone(), self.origin.clone(), self.spacing.clone(), f)
    }
}

/// Values on a regular tensor grid. Axis `k` is algebra coordinate `z_k`;
/// nodes are stored row-major (last axis fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub shape: Vec<usize>,
    pub origin: Vec<f64>,
    pub spacing: Vec<f64>,
    pub values: Vec<Ccd>,
}

impl GridField {
    pub fn new(shape: Vec<usize>, origin: Vec<f64>, spacing: Vec<f64>, values: Vec<Ccd>) -> Result<Self> {
        let g = GridField { shape, origin, spacing, values };
        g.validate()?;
        Ok(g)
    }

    /// Sample `f` at every node, in parallel.
    pub fn from_fn<F, V>(shape: Vec<usize>, origin: Vec<f64>, spacing: Vec<f64>, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Result<V> + Sync,
        V: Into<Ccd>,
    {
        let mut g = GridField { shape, origin, spacing, values: Vec::new() };
        let count: usize = g.shape.iter().product();
        g.values = (0..count).into_par_iter().map(|i| f(&g.point(i)).map(Into::into)).collect::<Result<Vec<_>>>()?;
        g.validate()?;
        Ok(g)
    }

    /// Cube `[lo, hi]^n` with `nodes` points per axis.
    pub fn cube<F, V>(n: usize, nodes: usize, lo: f64, hi: f64, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Result<V> + Sync,
        V: Into<Ccd>,
    {
        if nodes < 2 {
            return Err(Error::Spec("a grid axis needs at least 2 nodes".into()));
        }
        let h = (hi - lo) / (nodes - 1) as f64;
        Self::from_fn(vec![nodes; n], vec![lo; n], vec![h; n], f)
    }

    fn validate(&self) -> Result<()> {
        validate_layout(&self.shape, &self.origin, &self.spacing)?;
        if self.shape.iter().product::<usize>() != self.values.len() {
            return Err(Error::Spec(format!(
                "grid shape {:?} holds {} nodes but {} values were given",
                self.shape,
                self.shape.iter().product::<usize>(),
                self.values.len()
            )));
        }
        Ok(())
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec { shape: self.shape.clone(), origin: self.origin.clone(), spacing: self.spacing.clone() }
    }

    pub fn dimension(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.shape.len()];
        for k in (0..self.shape.len()).rev() {
            idx[k] = flat % self.shape[k];
            flat /= self.shape[k];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.shape).fold(0, |acc, (&i, &s)| acc * s + i)
    }

    /// Stride of axis `k` in the flat layout.
    pub fn stride(&self, k: usize) -> usize {
        self.shape[k + 1..].iter().product()
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat).iter().enumerate().map(|(k, &i)| self.origin[k] + i as f64 * self.spacing[k]).collect()
    }

    pub fn get(&self, idx: &[usize]) -> &Ccd {
        &self.values[self.flat_index(idx)]
    }

    /// Highest level among the stored values.
    pub fn level(&self) -> u32 {
        self.values.iter().map(Ccd::level).max().unwrap_or(0)
    }

    /// Same shape, origin and spacing (to a relative 1e-12).
    pub fn check_aligned(&self, other: &GridField) -> Result<()> {
        let close = |a: &[f64], b: &[f64]| {
            a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12 * (1.0 + x.abs().max(y.abs())))
        };
        if self.shape != other.shape || !close(&self.origin, &other.origin) || !close(&self.spacing, &other.spacing) {
            return Err(Error::Alignment(format!(
                "shapes {:?} / {:?}, origins {:?} / {:?}, spacings {:?} / {:?}",
                self.shape, other.shape, self.origin, other.origin, self.spacing, other.spacing
            )));
        }
        Ok(())
    }

    /// True when some node has a nonzero `𝐢` part.
    pub fn is_complex(&self) -> bool {
        self.values.iter().any(|v| v.im.coeffs().iter().any(|&c| c != 0.0))
    }

    /// Header `n shape.. origin.. spacing..`, then one CSV row of
    /// coefficients per node. Complex fields append `complex` to the header
    /// and write the `𝐢` coefficients after the real ones.
    pub fn to_text(&self) -> String {
        let join = |v: Vec<String>| v.join(" ");
        let complex = self.is_complex();
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} {} {} {}{}",
            self.dimension(),
            join(self.shape.iter().map(|s| s.to_string()).collect()),
            join(self.origin.iter().map(|s| format!("{s:e}")).collect()),
            join(self.spacing.iter().map(|s| format!("{s:e}")).collect()),
            if complex { " complex" } else { "" }
        );
        let level = self.level();
        for v in &self.values {
            let e = v.embed(level);
            let mut row: Vec<String> = e.re.coeffs().iter().map(|c| format!("{c:e}")).collect();
            if complex {
                row.extend(e.im.coeffs().iter().map(|c| format!("{c:e}")));
            }
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let perr = |line: usize, m: String| Error::Parse { offset: 0, message: format!("line {}: {m}", line + 1) };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (hl, header) = lines.next().ok_or_else(|| perr(0, "empty grid file".into()))?;
        let mut nums: Vec<&str> = header.split_whitespace().collect();
        let complex = nums.last() == Some(&"complex");
        if complex {
            nums.pop();
        }
        let n: usize = nums.first().and_then(|s| s.parse().ok()).ok_or_else(|| perr(hl, "bad dimension".into()))?;
        if nums.len() != 1 + 3 * n {
            return Err(perr(hl, format!("header needs 1 + 3*{n} fields, found {}", nums.len())));
        }
        let shape = nums[1..=n]
            .iter()
            .map(|s| s.parse::<usize>().map_err(|e| perr(hl, e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        let float = |s: &&str| s.parse::<f64>().map_err(|e| perr(hl, e.to_string()));
        let origin = nums[1 + n..=2 * n].iter().map(float).collect::<Result<Vec<_>>>()?;
        let spacing = nums[1 + 2 * n..].iter().map(float).collect::<Result<Vec<_>>>()?;
        let values = lines
            .map(|(i, l)| {
                let mut c = l
                    .split(',')
                    .map(|s| s.trim().parse::<f64>().map_err(|e| perr(i, e.to_string())))
                    .collect::<Result<Vec<_>>>()?;
                if complex {
                    if c.len() % 2 != 0 {
                        return Err(perr(i, "complex rows need an even column count".into()));
                    }
                    let im = c.split_off(c.len() / 2);
                    let re = CdNumber::from_coeffs(c).map_err(|e| perr(i, e.to_string()))?;
                    let im = CdNumber::from_coeffs(im).map_err(|e| perr(i, e.to_string()))?;
                    Ok(Ccd::new(re, im))
                } else {
                    CdNumber::from_coeffs(c).map(Ccd::from_real).map_err(|e| perr(i, e.to_string()))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        GridField::new(shape, origin, spacing, values)
    }

    pub fn write(&self, path: &FsPath) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }

    pub fn read(path: &FsPath) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_text(&text)
    }
}
