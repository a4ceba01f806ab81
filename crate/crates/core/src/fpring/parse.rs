//! Polynomial grammar: `2*x^(3/4)*y - u^-1 + 1`.
//!
//! Terms are joined by `+`/`-`; factors by `*`; an exponent is an integer,
//! `-k`, or a parenthesized rational `(a/b)` / `(-a/b)`.

use crate::error::{Error, Result};
use num_rational::Rational64;

/// One parsed term: integer coefficient and `(variable name, exponent)` factors.
pub type ParsedTerm = (i64, Vec<(String, Rational64)>);

pub fn parse_poly(s: &str) -> Result<Vec<ParsedTerm>> {
    let mut p = Parser { b: s.as_bytes(), i: 0 };
    let out = p.poly()?;
    p.ws();
    if p.i != p.b.len() {
        return Err(p.err("trailing input"));
    }
    Ok(out)
}

struct Parser<'a> {
    b: &'a [u8],
    i: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse(format!("{msg} at byte {} of {:?}", self.i, String::from_utf8_lossy(self.b)))
    }

    fn ws(&mut self) {
        while self.i < self.b.len() && self.b[self.i].is_ascii_whitespace() {
            self.i += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.ws();
        self.b.get(self.i).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.i += 1;
            true
        } else {
            false
        }
    }

    fn int(&mut self) -> Result<i64> {
        self.ws();
        let start = self.i;
        while self.i < self.b.len() && self.b[self.i].is_ascii_digit() {
            self.i += 1;
        }
        if start == self.i {
            return Err(self.err("expected integer"));
        }
        std::str::from_utf8(&self.b[start..self.i])
            .unwrap()
            .parse()
            .map_err(|_| self.err("integer out of range"))
    }

    fn ident(&mut self) -> Result<String> {
        self.ws();
        let start = self.i;
        while self.i < self.b.len() && (self.b[self.i].is_ascii_alphanumeric() || self.b[self.i] == b'_') {
            if self.i == start && self.b[self.i].is_ascii_digit() {
                break;
            }
            self.i += 1;
        }
        if start == self.i {
            return Err(self.err("expected variable name"));
        }
        Ok(String::from_utf8_lossy(&self.b[start..self.i]).into_owned())
    }

    fn exponent(&mut self) -> Result<Rational64> {
        if self.eat(b'(') {
            let neg = self.eat(b'-');
            let a = self.int()?;
            let b = if self.eat(b'/') { self.int()? } else { 1 };
            if b == 0 {
                return Err(self.err("zero denominator"));
            }
            if !self.eat(b')') {
                return Err(self.err("expected ')'"));
            }
            Ok(Rational64::new(if neg { -a } else { a }, b))
        } else {
            let neg = self.eat(b'-');
            let a = self.int()?;
            Ok(Rational64::from_integer(if neg { -a } else { a }))
        }
    }

    fn term(&mut self) -> Result<ParsedTerm> {
        let mut coeff = 1i64;
        let mut factors = Vec::new();
        loop {
            match self.peek() {
                Some(c) if c.is_ascii_digit() => coeff *= self.int()?,
                Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                    let name = self.ident()?;
                    let e = if self.eat(b'^') { self.exponent()? } else { Rational64::from_integer(1) };
                    factors.push((name, e));
                }
                _ => return Err(self.err("expected coefficient or variable")),
            }
            if !self.eat(b'*') {
                break;
            }
        }
        Ok((coeff, factors))
    }

    fn poly(&mut self) -> Result<Vec<ParsedTerm>> {
        let mut out = Vec::new();
        let mut sign = 1;
        if self.eat(b'-') {
            sign = -1;
        } else {
            self.eat(b'+');
        }
        loop {
            let (c, f) = self.term()?;
            out.push((sign * c, f));
            if self.eat(b'+') {
                sign = 1;
            } else if self.eat(b'-') {
                sign = -1;
            } else {
                break;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractional_and_negative_exponents() {
        let t = parse_poly("2*x^(3/4)*y - u^-1 + 1").unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t[0].0, 2);
        assert_eq!(t[0].1[0], ("x".into(), Rational64::new(3, 4)));
        assert_eq!(t[1], (-1, vec![("u".into(), Rational64::from_integer(-1))]));
        assert_eq!(t[2], (1, vec![]));
        assert_eq!(parse_poly("x^(-1/2)").unwrap()[0].1[0].1, Rational64::new(-1, 2));
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_poly("x^").is_err());
        assert!(parse_poly("x + ").is_err());
        assert!(parse_poly("x^(1/0)").is_err());
        assert!(parse_poly("x y").is_err());
    }
}
