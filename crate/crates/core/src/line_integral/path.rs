use std::path::Path as FsPath;

use crate::algebra::CdNumber;
use crate::error::{Error, Result};

/// Polyline through hypercomplex vertices; each segment carries its own
/// affinely mapped parameter interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    vertices: Vec<CdNumber>,
}

impl Path {
    pub fn new(vertices: Vec<CdNumber>) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::Spec("a path needs at least 2 vertices".into()));
        }
        let level = vertices.iter().map(CdNumber::level).max().unwrap_or(0);
        Ok(Path { vertices: vertices.iter().map(|v| v.embed(level)).collect() })
    }

    pub fn segment(a: CdNumber, b: CdNumber) -> Self {
        Path::new(vec![a, b]).expect("two vertices")
    }

    pub fn vertices(&self) -> &[CdNumber] {
        &self.vertices
    }

    pub fn level(&self) -> u32 {
        self.vertices[0].level()
    }

    pub fn start(&self) -> &CdNumber {
        &self.vertices[0]
    }

    pub fn end(&self) -> &CdNumber {
        &self.vertices[self.vertices.len() - 1]
    }

    pub fn segments(&self) -> impl Iterator<Item = (&CdNumber, &CdNumber)> {
        self.vertices.windows(2).map(|w| (&w[0], &w[1]))
    }

    /// Total variation; exact for a polyline.
    pub fn variation(&self) -> f64 {
        self.segments().map(|(a, b)| (b - a).norm()).sum()
    }

    pub fn reversed(&self) -> Path {
        let mut v = self.vertices.clone();
        v.reverse();
        Path { vertices: v }
    }

    /// `self` followed by `other`; the end of `self` must be the start of `other`.
    pub fn concat(&self, other: &Path) -> Result<Path> {
        if self.end().max_abs_diff(other.start()) > 0.0 {
            return Err(Error::Spec("concatenated paths must share the junction vertex".into()));
        }
        let mut v = self.vertices.clone();
        v.extend(other.vertices[1..].iter().cloned());
        Path::new(v)
    }

    /// One vertex per row, `2^v` comma-separated coefficients.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            let row: Vec<String> = v.coeffs().iter().map(|c| format!("{c:e}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Path> {
        let vertices = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
            .map(|(i, l)| {
                let perr = |m: String| Error::Parse { offset: 0, message: format!("line {}: {m}", i + 1) };
                let c = l
                    .split(',')
                    .map(|s| s.trim().parse::<f64>().map_err(|e| perr(format!("'{}': {e}", s.trim()))))
                    .collect::<Result<Vec<_>>>()?;
                CdNumber::from_coeffs(c).map_err(|e| perr(e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        let dims: Vec<usize> = vertices.iter().map(CdNumber::dim).collect();
        if dims.windows(2).any(|w| w[0] != w[1]) {
            return Err(Error::Parse { offset: 0, message: "path rows have differing column counts".into() });
        }
        Path::new(vertices)
    }

    pub fn read(path: &FsPath) -> Result<Path> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Path::from_csv(&text)
    }

    pub fn write(&self, path: &FsPath) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }
}
