//! Local functions as polynomials in finitely many occupation variables, and
//! the expression grammar used to write them down.
//!
//! Grammar (whitespace is ignored):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '·' | '/') unary)*
//! unary  := ('+' | '-') unary | power
//! power  := atom ('^' integer)?
//! atom   := number | 'eta' '(' integer (',' integer)* ')' | '(' expr ')'
//! number := digits ('.' digits)? (('e' | 'E') ('+' | '-')? digits)?
//! ```
//!
//! `eta(x)` is the occupation of site `x` (one integer per dimension).
//! Division is only allowed by constants, so rationals are written `1/2`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::config::{check_dim, OccupationState, Site};
use crate::error::{Error, Result};

/// Product `∏ η_x^{e_x}`; the empty monomial is the constant 1.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Monomial(BTreeMap<Site, u32>);

impl Monomial {
    pub fn one() -> Self {
        Monomial::default()
    }

    pub fn var(site: Site) -> Self {
        Monomial(BTreeMap::from([(site, 1)]))
    }

    pub fn exponents(&self) -> impl Iterator<Item = (&Site, u32)> {
        self.0.iter().map(|(s, &e)| (s, e))
    }

    pub fn degree(&self) -> u32 {
        self.0.values().sum()
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        let mut out = self.0.clone();
        for (s, e) in &other.0 {
            *out.entry(s.clone()).or_insert(0) += e;
        }
        Monomial(out)
    }

    /// Value at `τ_x η`.
    fn eval_shifted(&self, eta: &OccupationState, shift: &[i64]) -> f64 {
        let window = eta.window();
        let mut coords = vec![0i64; shift.len()];
        let mut v = 1.0;
        for (site, e) in self.exponents() {
            for (c, (a, b)) in coords.iter_mut().zip(site.coords().iter().zip(shift)) {
                *c = a + b;
            }
            v *= (eta.counts()[window.wrap_coords(&coords)] as f64).powi(e as i32);
        }
        v
    }
}

/// Finite linear combination of monomials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalFunctionSpec {
    dim: usize,
    terms: BTreeMap<Monomial, f64>,
}

impl LocalFunctionSpec {
    pub fn constant(dim: usize, c: f64) -> Self {
        let mut terms = BTreeMap::new();
        if c != 0.0 {
            terms.insert(Monomial::one(), c);
        }
        LocalFunctionSpec { dim, terms }
    }

    /// `η_x`
    pub fn occupation(site: Site) -> Self {
        LocalFunctionSpec {
            dim: site.dim(),
            terms: BTreeMap::from([(Monomial::var(site), 1.0)]),
        }
    }

    pub fn from_terms(
        dim: usize,
        terms: impl IntoIterator<Item = (Monomial, f64)>,
    ) -> Result<Self> {
        let mut f = LocalFunctionSpec::constant(dim, 0.0);
        for (m, c) in terms {
            for (s, _) in m.exponents() {
                check_dim(dim, s.dim())?;
            }
            f.add_term(m, c);
        }
        Ok(f)
    }

    fn add_term(&mut self, m: Monomial, c: f64) {
        let entry = self.terms.entry(m.clone()).or_insert(0.0);
        *entry += c;
        if *entry == 0.0 {
            self.terms.remove(&m);
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn support(&self) -> BTreeSet<Site> {
        self.terms
            .keys()
            .flat_map(|m| m.0.keys().cloned())
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in other.terms() {
            out.add_term(m.clone(), c);
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = LocalFunctionSpec::constant(self.dim, 0.0);
        for (m, c) in self.terms() {
            out.add_term(m.clone(), c * s);
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = LocalFunctionSpec::constant(self.dim, 0.0);
        for (m1, c1) in self.terms() {
            for (m2, c2) in other.terms() {
                out.add_term(m1.mul(m2), c1 * c2);
            }
        }
        out
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut out = LocalFunctionSpec::constant(self.dim, 1.0);
        for _ in 0..e {
            out = out.mul(self);
        }
        out
    }

    fn as_constant(&self) -> Option<f64> {
        match self.terms.len() {
            0 => Some(0.0),
            1 => self.terms.get(&Monomial::one()).copied(),
            _ => None,
        }
    }

    pub fn eval(&self, eta: &OccupationState) -> f64 {
        self.eval_shifted(eta, &vec![0; self.dim])
    }

    /// `τ_x f(η) = f(τ_x η)` with `(τ_x η)_y = η_{y+x}`; sites wrap periodically.
    pub fn eval_shifted(&self, eta: &OccupationState, shift: &[i64]) -> f64 {
        self.terms()
            .map(|(m, c)| c * m.eval_shifted(eta, shift))
            .sum()
    }

    pub fn parse(input: &str, dim: usize) -> Result<Self> {
        let mut p = Parser {
            chars: input.chars().collect(),
            pos: 0,
            dim,
        };
        let f = p.expr()?;
        p.skip_ws();
        if p.pos < p.chars.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(f)
    }
}

impl fmt::Display for LocalFunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{c}")?;
            for (s, e) in m.exponents() {
                let coords: Vec<String> = s.coords().iter().map(|c| c.to_string()).collect();
                write!(f, "*eta({})", coords.join(","))?;
                if e > 1 {
                    write!(f, "^{e}")?;
                }
            }
        }
        Ok(())
    }
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
    dim: usize,
}

impl Parser {
    fn error(&self, msg: &str) -> Error {
        Error::Parse {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected '{c}'")))
        }
    }

    fn expr(&mut self) -> Result<LocalFunctionSpec> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some('+') => {
                    self.pos += 1;
                    acc = acc.add(&self.term()?);
                }
                Some('-') | Some('−') => {
                    self.pos += 1;
                    acc = acc.add(&self.term()?.scale(-1.0));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<LocalFunctionSpec> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some('*') | Some('·') => {
                    self.pos += 1;
                    acc = acc.mul(&self.unary()?);
                }
                Some('/') => {
                    self.pos += 1;
                    let at = self.pos;
                    let rhs = self.unary()?;
                    match rhs.as_constant() {
                        Some(c) if c != 0.0 => acc = acc.scale(1.0 / c),
                        Some(_) => {
                            return Err(Error::Parse {
                                pos: at,
                                msg: "division by zero".into(),
                            })
                        }
                        None => {
                            return Err(Error::Parse {
                                pos: at,
                                msg: "division is only allowed by constants".into(),
                            })
                        }
                    }
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<LocalFunctionSpec> {
        match self.peek() {
            Some('-') | Some('−') => {
                self.pos += 1;
                Ok(self.unary()?.scale(-1.0))
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<LocalFunctionSpec> {
        let base = self.atom()?;
        if self.peek() == Some('^') {
            self.pos += 1;
            self.skip_ws();
            let start = self.pos;
            let e = self.integer()?;
            if !(0..=64).contains(&e) {
                return Err(Error::Parse {
                    pos: start,
                    msg: "exponent must be in 0..=64".into(),
                });
            }
            return Ok(base.pow(e as u32));
        }
        Ok(base)
    }

    fn integer(&mut self) -> Result<i64> {
        self.skip_ws();
        let start = self.pos;
        if matches!(self.chars.get(self.pos), Some('-') | Some('+')) {
            self.pos += 1;
        }
        while self.pos < self.chars.len() && self.chars[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        text.parse::<i64>().map_err(|_| Error::Parse {
            pos: start,
            msg: "expected an integer".into(),
        })
    }

    fn atom(&mut self) -> Result<LocalFunctionSpec> {
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect(')')?;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some('e') => {
                let word: String = self.chars[self.pos..].iter().take(3).collect();
                if word != "eta" {
                    return Err(self.error("expected 'eta'"));
                }
                self.pos += 3;
                self.expect('(')?;
                let mut coords = vec![self.integer()?];
                while self.peek() == Some(',') {
                    self.pos += 1;
                    coords.push(self.integer()?);
                }
                if coords.len() != self.dim {
                    return Err(self.error(&format!(
                        "eta takes {} coordinate(s), got {}",
                        self.dim,
                        coords.len()
                    )));
                }
                self.expect(')')?;
                Ok(LocalFunctionSpec::occupation(Site::new(coords)))
            }
            Some(_) => Err(self.error("unexpected character")),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<LocalFunctionSpec> {
        let start = self.pos;
        let digits = |p: &mut Parser| {
            while p.pos < p.chars.len() && p.chars[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
        };
        digits(self);
        if self.chars.get(self.pos) == Some(&'.') {
            self.pos += 1;
            digits(self);
        }
        if matches!(self.chars.get(self.pos), Some('e') | Some('E'))
            && !matches!(self.chars.get(self.pos + 1), Some('t'))
        {
            self.pos += 1;
            if matches!(self.chars.get(self.pos), Some('+') | Some('-')) {
                self.pos += 1;
            }
            digits(self);
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        let v: f64 = text.parse().map_err(|_| Error::Parse {
            pos: start,
            msg: format!("bad number '{text}'"),
        })?;
        Ok(LocalFunctionSpec::constant(self.dim, v))
    }
}
