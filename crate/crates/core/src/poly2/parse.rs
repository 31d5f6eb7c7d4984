//! Polynomial literals.
//!
//! ```text
//! poly   := term (sign term)*
//! term   := [sign] factor ('*' factor)*
//! factor := number | 'x' ['^' uint] | 'y' ['^' uint]
//! sign   := '+' | '-' | '−'
//! ```
//!
//! Whitespace is ignored everywhere. Numbers use Rust float syntax
//! (`1`, `0.5`, `2e-3`). A term with no numeric factor has coefficient 1.

use super::monomial::Monomial;
use super::PolyError;

pub fn parse_poly(src: &str) -> Result<Monomial, PolyError> {
    let chars: Vec<char> = src
        .chars()
        .filter(|c| !c.is_whitespace())
        .map(|c| if c == '−' { '-' } else { c })
        .collect();
    if chars.is_empty() {
        return Err(PolyError::Parse { pos: 0, msg: "empty literal".into() });
    }
    let mut p = Parser { chars: &chars, pos: 0 };
    let mut out = Monomial::zero();
    let mut first = true;
    while p.pos < chars.len() {
        let mut sign = 1.0;
        match p.peek() {
            Some('+') => {
                p.pos += 1;
            }
            Some('-') => {
                sign = -1.0;
                p.pos += 1;
            }
            _ if first => {}
            Some(c) => return Err(p.error(format!("expected '+' or '-', found '{c}'"))),
            None => unreachable!(),
        }
        first = false;
        let (c, e) = p.term()?;
        out.add_term(e, sign * c);
    }
    Ok(out)
}

struct Parser<'a> {
    chars: &'a [char],
    pos: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn error(&self, msg: String) -> PolyError {
        PolyError::Parse { pos: self.pos, msg }
    }

    fn term(&mut self) -> Result<(f64, (u32, u32)), PolyError> {
        let mut coeff = 1.0;
        let mut exps = (0u32, 0u32);
        loop {
            match self.peek() {
                Some('x') | Some('y') => {
                    let var = self.peek().unwrap();
                    self.pos += 1;
                    let e = if self.peek() == Some('^') {
                        self.pos += 1;
                        self.uint()?
                    } else {
                        1
                    };
                    if var == 'x' {
                        exps.0 += e;
                    } else {
                        exps.1 += e;
                    }
                }
                Some(c) if c.is_ascii_digit() || c == '.' => {
                    coeff *= self.number()?;
                }
                Some(c) => return Err(self.error(format!("unexpected '{c}'"))),
                None => return Err(self.error("unexpected end of literal".into())),
            }
            if self.peek() == Some('*') {
                self.pos += 1;
            } else {
                break;
            }
        }
        Ok((coeff, exps))
    }

    fn uint(&mut self) -> Result<u32, PolyError> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        let s: String = self.chars[start..self.pos].iter().collect();
        s.parse().map_err(|_| PolyError::Parse { pos: start, msg: "expected exponent".into() })
    }

    fn number(&mut self) -> Result<f64, PolyError> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            let exp_sign = matches!(c, '+' | '-')
                && self.pos > start
                && matches!(self.chars[self.pos - 1], 'e' | 'E');
            if c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E' || exp_sign {
                self.pos += 1;
            } else {
                break;
            }
        }
        let s: String = self.chars[start..self.pos].iter().collect();
        s.parse()
            .map_err(|_| PolyError::Parse { pos: start, msg: format!("bad number '{s}'") })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_explicit_exponents() {
        let p = parse_poly("−1*x^2*y^0 + 3*x*y - y^3").unwrap();
        assert_eq!(p.coeff(2, 0), -1.0);
        assert_eq!(p.coeff(1, 1), 3.0);
        assert_eq!(p.coeff(0, 3), -1.0);
        assert_eq!(p.len(), 3);
    }

    #[test]
    fn whitespace_and_scientific_numbers() {
        let p = parse_poly(" 2.5e-3 * x ^ 4 -x*x ").unwrap();
        assert_eq!(p.coeff(4, 0), 2.5e-3);
        assert_eq!(p.coeff(2, 0), -1.0);
    }

    #[test]
    fn cancelling_terms_leave_zero() {
        assert!(parse_poly("x*y - y*x").unwrap().is_zero());
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_poly("x + + y").is_err());
        assert!(parse_poly("z").is_err());
        assert!(parse_poly("").is_err());
        assert!(parse_poly("x y").is_err());
    }
}
