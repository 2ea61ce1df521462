//! Expression grammar for polynomials and trigonometric polynomials in
//! action-angle variables.
//!
//! ```text
//! expr   := sign? term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-' factor | atom ('^' uint)?
//! atom   := number | 'a' uint | ('cos' | 'sin') '(' combo ')' | '(' expr ')'
//! combo  := sign? cterm (('+' | '-') cterm)*
//! cterm  := (uint '*'?)? 'alpha' uint | uint
//! ```
//!
//! Numbers are exact: `0.25`, `1e-3` and `3/4` all denote rationals.
//! Variables are 1-based (`a1 .. an`, `alpha1 .. alphan`). Division is only
//! allowed by constants. A `uint` term inside `combo` must be zero.

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::fourier::{FourierSeries, MultiIndex};
use crate::poly::{ActionPolynomial, Rational};

/// Parse a trigonometric polynomial in `n` action-angle pairs.
pub fn parse_series(src: &str, n: usize) -> Result<FourierSeries> {
    let mut p = Parser::new(src, n);
    p.skip_ws();
    let s = p.expr()?;
    p.skip_ws();
    if !p.at_end() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(s)
}

/// Parse an expression that must not depend on the angles.
pub fn parse_polynomial(src: &str, n: usize) -> Result<ActionPolynomial> {
    let s = parse_series(src, n)?;
    if !s.is_angle_independent() {
        return Err(Error::Parse {
            line: 1,
            column: 1,
            message: format!("expected a polynomial in the actions, found angle dependence in \"{src}\""),
        });
    }
    Ok(s.mean())
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    n: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, n: usize) -> Self {
        Self { src, pos: 0, n }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.bump();
        }
    }

    fn error_at(&self, pos: usize, message: impl Into<String>) -> Error {
        let before = &self.src[..pos.min(self.src.len())];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        Error::Parse { line, column, message: message.into() }
    }

    fn error(&self, message: impl Into<String>) -> Error {
        self.error_at(self.pos, message)
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(format!("expected '{c}'")))
        }
    }

    fn expr(&mut self) -> Result<FourierSeries> {
        self.skip_ws();
        let mut acc = if self.eat('-') {
            -&self.term()?
        } else {
            self.eat('+');
            self.term()?
        };
        loop {
            if self.eat('+') {
                acc = &acc + &self.term()?;
            } else if self.eat('-') {
                acc = &acc - &self.term()?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<FourierSeries> {
        let mut acc = self.factor()?;
        loop {
            if self.eat('*') {
                acc = &acc * &self.factor()?;
            } else if self.eat('/') {
                let at = self.pos;
                let d = self.factor()?;
                let c = constant_value(&d).ok_or_else(|| self.error_at(at, "division is only allowed by constants"))?;
                if c.is_zero() {
                    return Err(self.error_at(at, "division by zero"));
                }
                acc = acc.scale(&c.recip());
            } else {
                return Ok(acc);
            }
        }
    }

    fn factor(&mut self) -> Result<FourierSeries> {
        self.skip_ws();
        if self.eat('-') {
            return Ok(-&self.factor()?);
        }
        let base = self.atom()?;
        if self.eat('^') {
            self.skip_ws();
            let at = self.pos;
            let k = self.uint()?.ok_or_else(|| self.error_at(at, "expected a non-negative integer exponent"))?;
            if k > 64 {
                return Err(self.error_at(at, "exponent too large"));
            }
            let mut out = FourierSeries::constant(self.n, Rational::one());
            for _ in 0..k {
                out = &out * &base;
            }
            return Ok(out);
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<FourierSeries> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            Some('(') => {
                self.bump();
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => {
                let q = self.number()?;
                Ok(FourierSeries::constant(self.n, q))
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let ident = self.ident();
                match ident {
                    "cos" | "sin" => {
                        self.expect('(')?;
                        let nu = self.combo()?;
                        self.expect(')')?;
                        let one = ActionPolynomial::one(self.n);
                        Ok(if ident == "cos" { FourierSeries::cos(nu, one) } else { FourierSeries::sin(nu, one) })
                    }
                    _ => {
                        if let Some(idx) = ident.strip_prefix('a').filter(|s| !s.starts_with('l')) {
                            let i = self.var_index(idx, start)?;
                            Ok(FourierSeries::from_poly(ActionPolynomial::variable(self.n, i)))
                        } else if ident.starts_with("alpha") {
                            Err(self.error_at(start, "angles may only appear inside cos(...) or sin(...)"))
                        } else {
                            Err(self.error_at(start, format!("unknown identifier \"{ident}\"")))
                        }
                    }
                }
            }
            Some(c) => Err(self.error(format!("unexpected character '{c}'"))),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn ident(&mut self) -> &'a str {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
            self.bump();
        }
        &self.src[start..self.pos]
    }

    fn var_index(&self, digits: &str, at: usize) -> Result<usize> {
        let i: usize = digits
            .parse()
            .map_err(|_| self.error_at(at, format!("malformed variable index \"{digits}\"")))?;
        if i == 0 || i > self.n {
            return Err(self.error_at(at, format!("variable index {i} outside 1..={}", self.n)));
        }
        Ok(i - 1)
    }

    fn uint(&mut self) -> Result<Option<u64>> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.bump();
        }
        if start == self.pos {
            return Ok(None);
        }
        self.src[start..self.pos]
            .parse()
            .map(Some)
            .map_err(|_| self.error_at(start, "integer too large"))
    }

    /// Exact decimal literal with optional fraction and exponent.
    fn number(&mut self) -> Result<Rational> {
        let start = self.pos;
        let mut digits = String::new();
        let mut frac_len = 0i64;
        while let Some(c) = self.peek().filter(|c| c.is_ascii_digit()) {
            digits.push(c);
            self.bump();
        }
        if self.peek() == Some('.') {
            self.bump();
            while let Some(c) = self.peek().filter(|c| c.is_ascii_digit()) {
                digits.push(c);
                frac_len += 1;
                self.bump();
            }
        }
        if digits.is_empty() {
            return Err(self.error_at(start, "malformed number"));
        }
        let mut exp = 0i64;
        if matches!(self.peek(), Some('e' | 'E')) {
            let save = self.pos;
            self.bump();
            let neg = match self.peek() {
                Some('-') => {
                    self.bump();
                    true
                }
                Some('+') => {
                    self.bump();
                    false
                }
                _ => false,
            };
            match self.uint()? {
                Some(e) => exp = if neg { -(e as i64) } else { e as i64 },
                None => self.pos = save,
            }
        }
        let mantissa: BigInt = digits.parse().map_err(|_| self.error_at(start, "malformed number"))?;
        let shift = exp - frac_len;
        let ten = BigInt::from(10);
        let q = if shift >= 0 {
            Rational::from_integer(mantissa * num_traits::pow(ten, shift as usize))
        } else {
            Rational::new(mantissa, num_traits::pow(ten, (-shift) as usize))
        };
        Ok(q)
    }

    fn combo(&mut self) -> Result<MultiIndex> {
        let mut nu = vec![0i64; self.n];
        self.skip_ws();
        let mut sign = if self.eat('-') {
            -1
        } else {
            self.eat('+');
            1
        };
        loop {
            self.skip_ws();
            let at = self.pos;
            let coef = self.uint()?;
            self.skip_ws();
            let explicit_mul = self.eat('*');
            self.skip_ws();
            let id_at = self.pos;
            let ident = self.ident();
            if let Some(idx) = ident.strip_prefix("alpha") {
                let i = self.var_index(idx, id_at)?;
                let k = coef.unwrap_or(1) as i64;
                nu[i] += sign * k;
            } else if ident.is_empty() && !explicit_mul {
                match coef {
                    Some(0) => {}
                    Some(_) => return Err(self.error_at(at, "constant phase offsets are not supported")),
                    None => return Err(self.error_at(at, "expected an integer combination of alpha variables")),
                }
            } else {
                return Err(self.error_at(id_at, "expected alpha<i>"));
            }
            if self.eat('+') {
                sign = 1;
            } else if self.eat('-') {
                sign = -1;
            } else {
                return Ok(MultiIndex(nu));
            }
        }
    }
}

fn constant_value(s: &FourierSeries) -> Option<Rational> {
    if !s.is_angle_independent() {
        return None;
    }
    s.mean().as_constant()
}
