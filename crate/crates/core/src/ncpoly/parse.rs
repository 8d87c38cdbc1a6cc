//! One-pass recursive-descent parser for the polynomial grammar.
//!
//! ```text
//! poly   := [sign] term (('+'|'-') term)*
//! term   := coeff ('*' factor)* | factor ('*' factor)*
//! factor := atom ["'"] ["^" int]
//! atom   := 'x' [int] | '1' | '(' poly ')'
//! coeff  := float | float 'i' | 'i' | '(' float ('+'|'-') float 'i' ')'
//! ```
//!
//! Whitespace between tokens is ignored. A leading sign is accepted so that
//! formatted output with a negative first term parses back.

use num_complex::Complex64;

use super::NCPolynomial;
use crate::error::{Error, Result};

const MAX_POWER: u32 = 64;
const MAX_TERMS: usize = 200_000;

/// Parse `text` as a polynomial in `arity` letters.
pub fn parse(text: &str, arity: usize) -> Result<NCPolynomial> {
    if arity == 0 {
        return Err(Error::InvalidArgument("arity must be at least 1".into()));
    }
    if text.trim().is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        arity,
    };
    let poly = p.poly()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(poly)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    arity: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> Error {
        Error::Syntax {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, b: u8) -> bool {
        if self.peek() == Some(b) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn guard(&self, p: &NCPolynomial) -> Result<()> {
        if p.len() > MAX_TERMS {
            return Err(self.error("expansion exceeds the term limit"));
        }
        Ok(())
    }

    fn poly(&mut self) -> Result<NCPolynomial> {
        let mut negate = false;
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                negate = true;
            }
            Some(b'+') => self.pos += 1,
            _ => {}
        }
        let first = self.term()?;
        let mut acc = if negate { -&first } else { first };
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let t = self.term()?;
                    acc = &acc + &t;
                }
                Some(b'-') => {
                    self.pos += 1;
                    let t = self.term()?;
                    acc = &acc - &t;
                }
                _ => break,
            }
            self.guard(&acc)?;
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<NCPolynomial> {
        let start = match self.peek() {
            Some(b) if b.is_ascii_digit() || b == b'.' => {
                let c = self.real_or_imag_literal()?;
                NCPolynomial::constant(self.arity, c)
            }
            Some(b'(') => {
                let save = self.pos;
                match self.complex_literal() {
                    Some(c) => NCPolynomial::constant(self.arity, c),
                    None => {
                        self.pos = save;
                        self.factor()?
                    }
                }
            }
            Some(b'i') => {
                self.pos += 1;
                NCPolynomial::constant(self.arity, Complex64::new(0.0, 1.0))
            }
            Some(b'x') => self.factor()?,
            Some(_) => return Err(self.error("expected a coefficient or a factor")),
            None => return Err(self.error("unexpected end of input")),
        };
        let mut acc = start;
        while self.eat(b'*') {
            let f = self.factor()?;
            acc = &acc * &f;
            self.guard(&acc)?;
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<NCPolynomial> {
        let mut base = self.atom()?;
        if self.eat(b'\'') {
            base = base.adjoint();
        }
        if self.eat(b'^') {
            self.skip_ws();
            let at = self.pos;
            let k = self.unsigned_int().ok_or_else(|| self.error("expected an exponent"))?;
            if k == 0 || k > MAX_POWER as usize {
                self.pos = at;
                return Err(self.error("exponent must be a positive integer no larger than 64"));
            }
            base = base.pow(k as u32);
            self.guard(&base)?;
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<NCPolynomial> {
        match self.peek() {
            Some(b'x') => {
                let at = self.pos;
                self.pos += 1;
                let idx = self.unsigned_int();
                let index = match (idx, self.arity) {
                    (None, 1) => 0,
                    (None, _) => {
                        self.pos = at;
                        return Err(self.error("letter index required when arity exceeds 1"));
                    }
                    (Some(0), _) => {
                        self.pos = at;
                        return Err(self.error("letters are numbered from 1"));
                    }
                    (Some(i), m) if i > m => {
                        return Err(Error::LetterOutOfRange { index: i, arity: m });
                    }
                    (Some(i), _) => i - 1,
                };
                NCPolynomial::letter(self.arity, index, false)
            }
            Some(b'1') => {
                self.pos += 1;
                Ok(NCPolynomial::one(self.arity))
            }
            Some(b'(') => {
                self.pos += 1;
                let inner = self.poly()?;
                if !self.eat(b')') {
                    return Err(self.error("expected ')'"));
                }
                Ok(inner)
            }
            Some(_) => Err(self.error("expected 'x', '1' or '('")),
            None => Err(self.error("unexpected end of input")),
        }
    }

    /// Digits only, no whitespace skipping: `x12` is letter 12, `x 12` is not.
    fn unsigned_int(&mut self) -> Option<usize> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return None;
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .ok()?
            .parse()
            .ok()
    }

    /// Unsigned decimal float with optional fraction and exponent.
    fn float(&mut self) -> Option<f64> {
        self.skip_ws();
        let start = self.pos;
        let s = self.src;
        let mut i = self.pos;
        let mut digits = 0;
        while i < s.len() && s[i].is_ascii_digit() {
            i += 1;
            digits += 1;
        }
        if i < s.len() && s[i] == b'.' {
            i += 1;
            while i < s.len() && s[i].is_ascii_digit() {
                i += 1;
                digits += 1;
            }
        }
        if digits == 0 {
            return None;
        }
        if i < s.len() && (s[i] == b'e' || s[i] == b'E') {
            let mut j = i + 1;
            if j < s.len() && (s[j] == b'+' || s[j] == b'-') {
                j += 1;
            }
            let exp_start = j;
            while j < s.len() && s[j].is_ascii_digit() {
                j += 1;
            }
            if j > exp_start {
                i = j;
            }
        }
        let v = std::str::from_utf8(&s[start..i]).ok()?.parse().ok()?;
        self.pos = i;
        Some(v)
    }

    fn real_or_imag_literal(&mut self) -> Result<Complex64> {
        let v = self.float().ok_or_else(|| self.error("malformed number"))?;
        if self.pos < self.src.len() && self.src[self.pos] == b'i' {
            self.pos += 1;
            Ok(Complex64::new(0.0, v))
        } else {
            Ok(Complex64::new(v, 0.0))
        }
    }

    /// `(a+bi)` / `(a-bi)`; `a` may carry a sign. Returns `None` without
    /// reporting so the caller can fall back to a parenthesized polynomial.
    fn complex_literal(&mut self) -> Option<Complex64> {
        if !self.eat(b'(') {
            return None;
        }
        let neg_re = if self.eat(b'-') {
            true
        } else {
            self.eat(b'+');
            false
        };
        let re = self.float()?;
        let neg_im = match self.peek()? {
            b'+' => false,
            b'-' => true,
            _ => return None,
        };
        self.pos += 1;
        let im = self.float()?;
        if self.src.get(self.pos) != Some(&b'i') {
            return None;
        }
        self.pos += 1;
        if !self.eat(b')') {
            return None;
        }
        let re = if neg_re { -re } else { re };
        let im = if neg_im { -im } else { im };
        Some(Complex64::new(re, im))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ncpoly::{qn_family, Letter, Word};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn parses_q1() {
        let p = parse("x'*x + 1 - x*x'", 1).unwrap();
        assert_eq!(p, qn_family(1).unwrap());
        let x = Letter::new(0, false);
        let xs = Letter::new(0, true);
        assert_eq!(p.coefficient(&Word::new(vec![xs, x])), c(1.0, 0.0));
        assert_eq!(p.coefficient(&Word::unit()), c(1.0, 0.0));
        assert_eq!(p.coefficient(&Word::new(vec![x, xs])), c(-1.0, 0.0));
    }

    #[test]
    fn parses_unit() {
        let p = parse("1", 1).unwrap();
        assert_eq!(p.degree(), 0);
        assert_eq!(p, NCPolynomial::one(1));
    }

    #[test]
    fn parses_commutator() {
        let p = parse("x1*x2' - x2'*x1", 2).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.degree(), 2);
        assert_eq!(p.to_string(), "x1*x2' - x2'*x1");
    }

    #[test]
    fn complex_coefficients() {
        let p = parse("(1.5-0.5i)*x + 2i - 3", 1).unwrap();
        assert_eq!(p.coefficient(&Word::unit()), c(-3.0, 2.0));
        assert_eq!(p.coefficient(&Word::new(vec![Letter::new(0, false)])), c(1.5, -0.5));
        let q = parse("(-1+2i)", 1).unwrap();
        assert_eq!(q.coefficient(&Word::unit()), c(-1.0, 2.0));
    }

    #[test]
    fn powers_and_parentheses() {
        let p = parse("(x + x')^2", 1).unwrap();
        assert_eq!(p.len(), 4);
        let q = parse("x'^2*x^2", 1).unwrap();
        assert_eq!(q.to_string(), "x'^2*x^2");
        let r = parse("(x*x)'", 1).unwrap();
        assert_eq!(r.to_string(), "x'^2");
    }

    #[test]
    fn exponent_floats() {
        let p = parse("1e-3*x - 2.5E+2", 1).unwrap();
        assert_eq!(p.coefficient(&Word::unit()), c(-250.0, 0.0));
    }

    #[test]
    fn error_cases() {
        assert_eq!(parse("   ", 1), Err(Error::EmptyInput));
        assert_eq!(
            parse("x3 + x1", 2),
            Err(Error::LetterOutOfRange { index: 3, arity: 2 })
        );
        match parse("x + * x", 1) {
            Err(Error::Syntax { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse("x^0", 1), Err(Error::Syntax { .. })));
        assert!(matches!(parse("(x + 1", 1), Err(Error::Syntax { .. })));
        assert!(matches!(parse("x + x", 2), Err(Error::Syntax { .. })));
        assert!(matches!(parse("2x", 1), Err(Error::Syntax { .. })));
    }

    #[test]
    fn bare_imaginary_unit() {
        let p = parse("x1 + i*x2", 2).unwrap();
        assert_eq!(p.coefficient(&Word::new(vec![Letter::new(1, false)])), c(0.0, 1.0));
        assert_eq!(parse("-i", 1).unwrap().coefficient(&Word::unit()), c(0.0, -1.0));
    }

    #[test]
    fn leading_sign() {
        let p = parse("-x + 1", 1).unwrap();
        assert_eq!(p.to_string(), "1 - x");
    }
}
