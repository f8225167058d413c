//! Rational functions of the family parameter `k`, parsed from strings such
//! as `"1/k"`, `"k^2 + 1"` or `"(2*k - 1)/(k + 3)"`.

use std::fmt;

use heisgeo::{Error, Result};

/// Polynomial with coefficients in increasing degree.
#[derive(Debug, Clone, PartialEq)]
struct Poly(Vec<f64>);

impl Poly {
    fn constant(c: f64) -> Self {
        Poly(vec![c]).trimmed()
    }

    fn k() -> Self {
        Poly(vec![0.0, 1.0])
    }

    fn trimmed(mut self) -> Self {
        while self.0.last() == Some(&0.0) {
            self.0.pop();
        }
        self
    }

    fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    fn degree(&self) -> Option<usize> {
        self.0.len().checked_sub(1)
    }

    fn leading(&self) -> f64 {
        self.0.last().copied().unwrap_or(0.0)
    }

    fn eval(&self, k: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * k + c)
    }

    fn add(&self, other: &Self) -> Self {
        let len = self.0.len().max(other.0.len());
        let get = |p: &Poly, i: usize| p.0.get(i).copied().unwrap_or(0.0);
        Poly((0..len).map(|i| get(self, i) + get(other, i)).collect()).trimmed()
    }

    fn neg(&self) -> Self {
        Poly(self.0.iter().map(|c| -c).collect())
    }

    fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Poly(Vec::new());
        }
        let mut out = vec![0.0; self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly(out).trimmed()
    }
}

/// `num(k) / den(k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalFunction {
    num: Poly,
    den: Poly,
    source: String,
}

/// Behaviour as `k → ∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Limit {
    Finite(f64),
    Infinite,
}

impl RationalFunction {
    pub fn parse(src: &str) -> Result<Self> {
        let tokens = tokenize(src)?;
        let mut parser = Parser { tokens, pos: 0 };
        let (num, den) = parser.expr()?;
        if parser.pos != parser.tokens.len() {
            return Err(Error::Domain(format!(
                "unexpected trailing input in '{src}'"
            )));
        }
        if den.is_zero() {
            return Err(Error::Domain(format!("'{src}' has a zero denominator")));
        }
        Ok(Self {
            num,
            den,
            source: src.to_string(),
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, k: f64) -> Result<f64> {
        let d = self.den.eval(k);
        let v = self.num.eval(k) / d;
        if d == 0.0 || !v.is_finite() {
            return Err(Error::Domain(format!(
                "'{}' is undefined at k = {k}",
                self.source
            )));
        }
        Ok(v)
    }

    pub fn limit(&self) -> Limit {
        match (self.num.degree(), self.den.degree()) {
            (None, _) => Limit::Finite(0.0),
            (Some(p), Some(q)) if p < q => Limit::Finite(0.0),
            (Some(p), Some(q)) if p == q => Limit::Finite(self.num.leading() / self.den.leading()),
            _ => Limit::Infinite,
        }
    }
}

impl fmt::Display for RationalFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    K,
    Op(char),
    Open,
    Close,
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            ' ' | '\t' => i += 1,
            'k' => {
                out.push(Token::K);
                i += 1;
            }
            '+' | '-' | '*' | '/' | '^' => {
                out.push(Token::Op(c));
                i += 1;
            }
            '(' => {
                out.push(Token::Open);
                i += 1;
            }
            ')' => {
                out.push(Token::Close);
                i += 1;
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len()
                    && (chars[i].is_ascii_digit()
                        || chars[i] == '.'
                        || chars[i] == 'e'
                        || ((chars[i] == '-' || chars[i] == '+') && chars[i - 1] == 'e'))
                {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                let v: f64 = text
                    .parse()
                    .map_err(|_| Error::Domain(format!("bad number '{text}' in '{src}'")))?;
                out.push(Token::Num(v));
            }
            other => {
                return Err(Error::Domain(format!(
                    "unexpected character '{other}' in '{src}'"
                )))
            }
        }
    }
    Ok(out)
}

type Frac = (Poly, Poly);

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn expr(&mut self) -> Result<Frac> {
        let mut acc = self.term()?;
        while let Some(Token::Op(op @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.term()?;
            let rhs_num = if op == '-' { rhs.0.neg() } else { rhs.0 };
            acc = (
                acc.0.mul(&rhs.1).add(&rhs_num.mul(&acc.1)),
                acc.1.mul(&rhs.1),
            );
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Frac> {
        let mut acc = self.power()?;
        while let Some(Token::Op(op @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.power()?;
            acc = if op == '*' {
                (acc.0.mul(&rhs.0), acc.1.mul(&rhs.1))
            } else {
                (acc.0.mul(&rhs.1), acc.1.mul(&rhs.0))
            };
        }
        Ok(acc)
    }

    fn power(&mut self) -> Result<Frac> {
        let base = self.unary()?;
        if let Some(Token::Op('^')) = self.peek() {
            self.pos += 1;
            let negative = matches!(self.peek(), Some(Token::Op('-')));
            if negative {
                self.pos += 1;
            }
            let e = match self.peek() {
                Some(Token::Num(e)) if e.fract() == 0.0 && *e <= 64.0 => *e as u32,
                _ => return Err(Error::Domain("exponents must be small integers".into())),
            };
            self.pos += 1;
            let mut out = (Poly::constant(1.0), Poly::constant(1.0));
            for _ in 0..e {
                out = (out.0.mul(&base.0), out.1.mul(&base.1));
            }
            return Ok(if negative { (out.1, out.0) } else { out });
        }
        Ok(base)
    }

    fn unary(&mut self) -> Result<Frac> {
        if let Some(Token::Op('-')) = self.peek() {
            self.pos += 1;
            let (n, d) = self.unary()?;
            return Ok((n.neg(), d));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Frac> {
        let tok = self
            .peek()
            .cloned()
            .ok_or_else(|| Error::Domain("unexpected end of expression".into()))?;
        self.pos += 1;
        match tok {
            Token::Num(v) => Ok((Poly::constant(v), Poly::constant(1.0))),
            Token::K => Ok((Poly::k(), Poly::constant(1.0))),
            Token::Open => {
                let inner = self.expr()?;
                if self.peek() != Some(&Token::Close) {
                    return Err(Error::Domain("missing ')'".into()));
                }
                self.pos += 1;
                Ok(inner)
            }
            other => Err(Error::Domain(format!("unexpected token {other:?}"))),
        }
    }
}
