use super::{Expr, Func, MAX_COORD};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn err(offset: usize, message: impl Into<String>) -> Error {
        Error::Parse { offset, message: message.into() }
    }

    fn next(&mut self) -> Result<(usize, Tok)> {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(&c) = self.src.get(self.pos) else {
            return Ok((start, Tok::End));
        };
        let tok = match c {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'0'..=b'9' | b'.' => return self.number(start),
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let s = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
                return Ok((start, Tok::Ident(s.to_string())));
            }
            _ => return Err(Self::err(start, format!("unexpected character {:?}", c as char))),
        };
        self.pos += 1;
        Ok((start, tok))
    }

    fn number(&mut self, start: usize) -> Result<(usize, Tok)> {
        let s = self.src;
        let mut p = self.pos;
        while p < s.len() && (s[p].is_ascii_digit() || s[p] == b'.') {
            p += 1;
        }
        if p < s.len() && (s[p] == b'e' || s[p] == b'E') {
            let mut q = p + 1;
            if q < s.len() && (s[q] == b'+' || s[q] == b'-') {
                q += 1;
            }
            if q < s.len() && s[q].is_ascii_digit() {
                while q < s.len() && s[q].is_ascii_digit() {
                    q += 1;
                }
                p = q;
            }
        }
        let text = std::str::from_utf8(&s[start..p]).expect("ascii");
        let x: f64 = text.parse().map_err(|_| Self::err(start, format!("malformed number {text:?}")))?;
        self.pos = p;
        Ok((start, Tok::Num(x)))
    }
}

struct Parser<'a> {
    lex: Lexer<'a>,
    tok: Tok,
    at: usize,
    dimension: usize,
}

/// Parse an expression over coordinates `z0..z{dimension-1}`.
///
/// Precedence, tightest first: `^`, unary `-`, `* /`, `+ -`; binary operators
/// associate to the left.
pub fn parse(text: &str, dimension: usize) -> Result<Expr> {
    let mut lex = Lexer { src: text.as_bytes(), pos: 0 };
    let (at, tok) = lex.next()?;
    let mut p = Parser { lex, tok, at, dimension };
    let e = p.sum()?;
    if p.tok != Tok::End {
        return Err(Lexer::err(p.at, "unexpected trailing input"));
    }
    check_linear(&e)?;
    Ok(e)
}

impl Parser<'_> {
    fn bump(&mut self) -> Result<()> {
        let (at, tok) = self.lex.next()?;
        self.at = at;
        self.tok = tok;
        Ok(())
    }

    fn sum(&mut self) -> Result<Expr> {
        let mut lhs = self.product()?;
        loop {
            match self.tok {
                Tok::Plus => {
                    self.bump()?;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.product()?));
                }
                Tok::Minus => {
                    self.bump()?;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.product()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn product(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.tok {
                Tok::Star => {
                    self.bump()?;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Slash => {
                    self.bump()?;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.tok == Tok::Minus {
            self.bump()?;
            return Ok(Expr::neg(self.unary()?));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let mut base = self.primary()?;
        while self.tok == Tok::Caret {
            self.bump()?;
            let at = self.at;
            let n = match self.tok {
                Tok::Num(x) if x >= 0.0 && x.fract() == 0.0 && x <= u32::MAX as f64 => x as u32,
                _ => return Err(Lexer::err(at, "exponent must be a non-negative integer literal")),
            };
            self.bump()?;
            base = Expr::Pow(Box::new(base), n);
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr> {
        let at = self.at;
        match std::mem::replace(&mut self.tok, Tok::End) {
            Tok::Num(x) => {
                self.bump()?;
                Ok(Expr::Num(x))
            }
            Tok::LParen => {
                self.bump()?;
                let e = self.sum()?;
                if self.tok != Tok::RParen {
                    return Err(Lexer::err(self.at, "expected ')'"));
                }
                self.bump()?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump()?;
                self.ident(at, &name)
            }
            other => {
                self.tok = other;
                Err(Lexer::err(at, "expected a number, coordinate, generator or '('"))
            }
        }
    }

    fn ident(&mut self, at: usize, name: &str) -> Result<Expr> {
        if let Some(f) = Func::from_name(name) {
            if self.tok != Tok::LParen {
                return Err(Lexer::err(self.at, format!("expected '(' after {name}")));
            }
            self.bump()?;
            let arg = self.sum()?;
            if self.tok != Tok::RParen {
                return Err(Lexer::err(self.at, "expected ')'"));
            }
            self.bump()?;
            return Ok(Expr::Call(f, Box::new(arg)));
        }
        if name == "pi" {
            return Ok(Expr::Num(std::f64::consts::PI));
        }
        let index = |digits: &str| -> Option<usize> {
            if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
                return None;
            }
            digits.parse().ok()
        };
        if let Some(j) = name.strip_prefix('z').and_then(index) {
            if j > MAX_COORD {
                return Err(Lexer::err(at, format!("coordinate z{j} beyond z{MAX_COORD}")));
            }
            if j >= self.dimension {
                return Err(Lexer::err(at, format!("coordinate z{j} not below dimension {}", self.dimension)));
            }
            return Ok(Expr::Var(j));
        }
        if let Some(k) = name.strip_prefix('i').and_then(index) {
            if k >= 1 << crate::algebra::DEFAULT_MAX_LEVEL {
                return Err(Lexer::err(at, format!("generator i{k} beyond the maximum level")));
            }
            return Ok(Expr::Unit(k));
        }
        Err(Lexer::err(at, format!("unknown identifier {name:?}")))
    }
}

/// Generator literals may appear only in linear combinations with real weights.
fn check_linear(e: &Expr) -> Result<()> {
    let bad = |msg: &str| Err(Error::Parse { offset: 0, message: format!("{msg} in {e}") });
    match e {
        Expr::Num(_) | Expr::Var(_) | Expr::Unit(_) => Ok(()),
        Expr::Add(a, b) | Expr::Sub(a, b) => {
            check_linear(a)?;
            check_linear(b)
        }
        Expr::Neg(a) => check_linear(a),
        Expr::Mul(a, b) => {
            if !a.is_real() && !b.is_real() {
                return bad("product of generator literals");
            }
            check_linear(a)?;
            check_linear(b)
        }
        Expr::Div(a, b) => {
            if !b.is_real() {
                return bad("division by a generator literal");
            }
            check_linear(a)
        }
        Expr::Pow(a, _) | Expr::Call(_, a) => {
            if !a.is_real() {
                return bad("generator literal inside a power or function");
            }
            Ok(())
        }
    }
}
