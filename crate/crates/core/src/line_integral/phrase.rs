use std::fmt;

use crate::algebra::CdNumber;
use crate::error::{Error, Result};
use crate::factorize::parse_cd_literal;

/// Factor tree of one word; `Mul` fixes the bracketing.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(CdNumber),
    /// Left-nested power `((z z) z)...`, with `z^0 = 1`.
    Pow(u32),
    Mul(Box<Node>, Box<Node>),
}

impl Node {
    pub fn mul(a: Node, b: Node) -> Node {
        Node::Mul(Box::new(a), Box::new(b))
    }

    fn eval(&self, z: &CdNumber) -> CdNumber {
        match self {
            Node::Const(c) => c.clone(),
            Node::Pow(m) => z.powi(*m),
            Node::Mul(a, b) => a.eval(z).mul(&b.eval(z)),
        }
    }

    /// Value and derivative in the direction `h`.
    fn eval_d(&self, z: &CdNumber, h: &CdNumber) -> (CdNumber, CdNumber) {
        match self {
            Node::Const(c) => (c.clone(), CdNumber::zero(z.level())),
            Node::Pow(m) => {
                let mut v = CdNumber::one(z.level());
                let mut d = CdNumber::zero(z.level());
                for _ in 0..*m {
                    d = &d.mul(z) + &v.mul(h);
                    v = v.mul(z);
                }
                (v, d)
            }
            Node::Mul(a, b) => {
                let (va, da) = a.eval_d(z, h);
                let (vb, db) = b.eval_d(z, h);
                (va.mul(&vb), &da.mul(&vb) + &va.mul(&db))
            }
        }
    }

    fn powers(&self, out: &mut Vec<u32>) {
        match self {
            Node::Const(_) => {}
            Node::Pow(m) => out.push(*m),
            Node::Mul(a, b) => {
                a.powers(out);
                b.powers(out);
            }
        }
    }

    /// Replace the `k`-th power leaf (left to right) by `f(m)`.
    fn map_power(&self, k: &mut usize, f: &dyn Fn(u32) -> u32) -> Node {
        match self {
            Node::Const(_) => self.clone(),
            Node::Pow(m) => {
                let out = if *k == 0 { Node::Pow(f(*m)) } else { self.clone() };
                *k = k.wrapping_sub(1);
                out
            }
            Node::Mul(a, b) => {
                let a = a.map_power(k, f);
                Node::mul(a, b.map_power(k, f))
            }
        }
    }

    fn level(&self) -> u32 {
        match self {
            Node::Const(c) => c.level(),
            Node::Pow(_) => 0,
            Node::Mul(a, b) => a.level().max(b.level()),
        }
    }
}

/// `scale · { c, z^m }_q`.
#[derive(Debug, Clone, PartialEq)]
pub struct Word {
    pub scale: f64,
    pub tree: Node,
}

/// Finite sum of bracketed words in `z`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Phrase {
    pub words: Vec<Word>,
}

impl Phrase {
    pub fn new(words: Vec<Word>) -> Self {
        Phrase { words }
    }

    /// The phrase `z`.
    pub fn identity() -> Self {
        Phrase { words: vec![Word { scale: 1.0, tree: Node::Pow(1) }] }
    }

    pub fn constant(c: CdNumber) -> Self {
        Phrase { words: vec![Word { scale: 1.0, tree: Node::Const(c) }] }
    }

    /// Highest level among the constants.
    pub fn level(&self) -> u32 {
        self.words.iter().map(|w| w.tree.level()).max().unwrap_or(0)
    }

    pub fn degree(&self) -> u32 {
        self.words
            .iter()
            .map(|w| {
                let mut p = Vec::new();
                w.tree.powers(&mut p);
                p.iter().sum()
            })
            .max()
            .unwrap_or(0)
    }

    pub fn eval(&self, z: &CdNumber) -> CdNumber {
        let mut acc = CdNumber::zero(z.level().max(self.level()));
        for w in &self.words {
            acc += &w.tree.eval(z).scale(w.scale);
        }
        acc
    }

    /// `(dμ/dz).h`: the increment `h` is inserted into each power slot.
    pub fn derivative_apply(&self, z: &CdNumber, h: &CdNumber) -> CdNumber {
        let level = z.level().max(h.level()).max(self.level());
        let z = z.embed(level);
        let h = h.embed(level);
        let mut acc = CdNumber::zero(level);
        for w in &self.words {
            acc += &w.tree.eval_d(&z, &h).1.scale(w.scale);
        }
        acc
    }

    /// A phrase `κ` with `(dκ/dz).1 = μ`, by the left algorithm: the leftmost
    /// power of each word is raised and the other powers are removed by
    /// repeated integration by parts, keeping every bracketing.
    pub fn left_antiderivative(&self) -> Phrase {
        let mut out = Vec::new();
        for w in &self.words {
            left_word(w.scale, &w.tree, &mut out);
        }
        Phrase { words: out }
    }
}

fn left_word(scale: f64, tree: &Node, out: &mut Vec<Word>) {
    let mut powers = Vec::new();
    tree.powers(&mut powers);
    let Some(&m) = powers.first() else {
        out.push(Word { scale, tree: Node::mul(tree.clone(), Node::Pow(1)) });
        return;
    };
    let raised = tree.map_power(&mut 0, &|p| p + 1);
    let s = scale / (m + 1) as f64;
    out.push(Word { scale: s, tree: raised.clone() });
    for (k, &p) in powers.iter().enumerate().skip(1) {
        if p > 0 {
            let lowered = raised.map_power(&mut k.clone(), &|q| q - 1);
            left_word(-s * p as f64, &lowered, out);
        }
    }
}

fn fmt_node(n: &Node, f: &mut fmt::Formatter<'_>, nested: bool) -> fmt::Result {
    match n {
        Node::Const(c) => {
            if c.is_real() {
                write!(f, "{}", c.re())
            } else {
                write!(f, "[{c}]")
            }
        }
        Node::Pow(0) => write!(f, "z^0"),
        Node::Pow(1) => write!(f, "z"),
        Node::Pow(m) => write!(f, "z^{m}"),
        Node::Mul(a, b) => {
            if nested {
                write!(f, "(")?;
            }
            fmt_node(a, f, false)?;
            write!(f, "*")?;
            fmt_node(b, f, true)?;
            if nested {
                write!(f, ")")?;
            }
            Ok(())
        }
    }
}

impl fmt::Display for Phrase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.words.is_empty() {
            return write!(f, "0");
        }
        for (k, w) in self.words.iter().enumerate() {
            let s = if k == 0 {
                if w.scale < 0.0 {
                    "-"
                } else {
                    ""
                }
            } else if w.scale < 0.0 {
                " - "
            } else {
                " + "
            };
            write!(f, "{s}")?;
            let a = w.scale.abs();
            if a != 1.0 {
                write!(f, "{a}*")?;
                fmt_node(&w.tree, f, true)?;
            } else {
                fmt_node(&w.tree, f, false)?;
            }
        }
        Ok(())
    }
}

/// Parse a phrase such as `(i1*z)*(i2*z) + 0.5*z^2 - [1+i3]*z`.
///
/// Words are joined by `+`/`-`; factors by `*`, left-nested unless
/// parenthesized. A factor is `z`, `z^k`, a real number, a generator `i{k}`
/// or a bracketed constant `[...]` in the expression grammar.
pub fn parse_phrase(text: &str) -> Result<Phrase> {
    let mut p = Parser { src: text.as_bytes(), pos: 0 };
    let mut words = Vec::new();
    let mut sign = 1.0;
    p.skip_ws();
    if p.eat(b'-') {
        sign = -1.0;
    } else {
        p.eat(b'+');
    }
    loop {
        let tree = p.product()?;
        words.push(Word { scale: sign, tree });
        p.skip_ws();
        if p.eat(b'+') {
            sign = 1.0;
        } else if p.eat(b'-') {
            sign = -1.0;
        } else if p.pos == p.src.len() {
            return Ok(Phrase { words });
        } else {
            return Err(p.err("expected '+', '-' or end of phrase"));
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, m: &str) -> Error {
        Error::Parse { offset: self.pos, message: m.into() }
    }

    fn skip_ws(&mut self) {
        while self.src.get(self.pos).is_some_and(|c| c.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: u8) -> bool {
        self.skip_ws();
        if self.src.get(self.pos) == Some(&c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn product(&mut self) -> Result<Node> {
        let mut acc = self.atom()?;
        while self.eat(b'*') {
            acc = Node::mul(acc, self.atom()?);
        }
        Ok(acc)
    }

    fn digits(&mut self) -> &str {
        let start = self.pos;
        while self.src.get(self.pos).is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("")
    }

    fn atom(&mut self) -> Result<Node> {
        self.skip_ws();
        let Some(&c) = self.src.get(self.pos) else {
            return Err(self.err("unexpected end of phrase"));
        };
        match c {
            b'(' => {
                self.pos += 1;
                let n = self.product()?;
                if !self.eat(b')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(n)
            }
            b'[' => {
                let start = self.pos + 1;
                let Some(len) = self.src[start..].iter().position(|&b| b == b']') else {
                    return Err(self.err("unclosed '['"));
                };
                let body = std::str::from_utf8(&self.src[start..start + len]).unwrap_or("");
                let v = parse_cd_literal(body).map_err(|e| match e {
                    Error::Parse { offset, message } => Error::Parse { offset: start + offset, message },
                    other => other,
                })?;
                self.pos = start + len + 1;
                Ok(Node::Const(v))
            }
            b'z' => {
                self.pos += 1;
                if self.eat(b'^') {
                    self.skip_ws();
                    let d = self.digits();
                    let m = d.parse::<u32>().map_err(|_| self.err("expected a non-negative integer power"))?;
                    Ok(Node::Pow(m))
                } else {
                    Ok(Node::Pow(1))
                }
            }
            b'i' => {
                self.pos += 1;
                let d = self.digits();
                let k = d.parse::<usize>().map_err(|_| self.err("expected generator index after 'i'"))?;
                let level = (k + 1).next_power_of_two().trailing_zeros();
                if level > crate::algebra::DEFAULT_MAX_LEVEL {
                    return Err(self.err("generator index beyond the maximum level"));
                }
                Ok(Node::Const(CdNumber::basis(level, k)))
            }
            b'0'..=b'9' | b'.' => {
                let start = self.pos;
                while self.src.get(self.pos).is_some_and(|&b| b.is_ascii_digit() || b == b'.' || b == b'e' || b == b'E')
                    || (self.pos > start
                        && matches!(self.src[self.pos - 1], b'e' | b'E')
                        && matches!(self.src.get(self.pos), Some(b'+') | Some(b'-')))
                {
                    self.pos += 1;
                }
                let s = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
                let x = s
                    .parse::<f64>()
                    .map_err(|_| Error::Parse { offset: start, message: format!("bad number '{s}'") })?;
                Ok(Node::Const(CdNumber::real(0, x)))
            }
            _ => Err(self.err("expected a factor: z, z^k, number, i{k}, [...] or '('")),
        }
    }
}
