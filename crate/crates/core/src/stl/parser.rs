//! Recursive-descent parser for the formula grammar.
//!
//! ```text
//! or      := and ("or" and)*
//! and     := until ("and" until)*
//! until   := unary ("U" interval unary)*
//! unary   := "not" unary | "F" interval unary | "G" interval unary | primary
//! primary := "true" | x_<k> ("<=" | ">=") <float> | "(" or ")"
//! interval:= "[" <int> "," (<int> | "inf") "]"
//! ```
//!
//! Binding strength: `not` and the temporal unaries bind tighter than `U`,
//! which binds tighter than `and`, which binds tighter than `or`. Binary
//! operators associate to the left. Whitespace is insignificant.

use super::{Comparison, Formula, Interval};
use crate::error::{Error, Result};

pub fn parse(text: &str) -> Result<Formula> {
    let mut p = Parser { text, pos: 0 };
    let phi = p.parse_or()?;
    p.skip_ws();
    if p.pos < p.text.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(phi)
}

struct Parser<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn error(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn expect_char(&mut self, expected: char) -> Result<()> {
        self.skip_ws();
        if self.peek() == Some(expected) {
            self.pos += expected.len_utf8();
            Ok(())
        } else {
            Err(self.error(format!("expected '{}'", expected)))
        }
    }

    /// Consumes `kw` if present as a whole word (not a prefix of a longer one).
    fn eat_keyword(&mut self, kw: &str) -> bool {
        self.skip_ws();
        if let Some(after) = self.rest().strip_prefix(kw) {
            let boundary = after
                .chars()
                .next()
                .map_or(true, |c| !c.is_alphanumeric() && c != '_');
            if boundary {
                self.pos += kw.len();
                return true;
            }
        }
        false
    }

    /// Like `eat_keyword` but requires an immediately following `[`, so a
    /// signal named like `U` in other grammars cannot be misread; here it
    /// keeps `F`/`G`/`U` unambiguous from malformed atoms.
    fn eat_temporal(&mut self, kw: &str) -> bool {
        self.skip_ws();
        if let Some(after) = self.rest().strip_prefix(kw) {
            if after.trim_start().starts_with('[') {
                self.pos += kw.len();
                return true;
            }
        }
        false
    }

    fn parse_or(&mut self) -> Result<Formula> {
        let mut left = self.parse_and()?;
        while self.eat_keyword("or") {
            let right = self.parse_and()?;
            left = Formula::or(left, right);
        }
        Ok(left)
    }

    fn parse_and(&mut self) -> Result<Formula> {
        let mut left = self.parse_until()?;
        while self.eat_keyword("and") {
            let right = self.parse_until()?;
            left = Formula::and(left, right);
        }
        Ok(left)
    }

    fn parse_until(&mut self) -> Result<Formula> {
        let mut left = self.parse_unary()?;
        while self.eat_temporal("U") {
            let interval = self.parse_interval()?;
            let right = self.parse_unary()?;
            left = Formula::until(interval, left, right);
        }
        Ok(left)
    }

    fn parse_unary(&mut self) -> Result<Formula> {
        if self.eat_keyword("not") {
            let inner = self.parse_unary()?;
            return Ok(Formula::not(inner));
        }
        if self.eat_temporal("F") {
            let interval = self.parse_interval()?;
            let inner = self.parse_unary()?;
            return Ok(Formula::eventually(interval, inner));
        }
        if self.eat_temporal("G") {
            let interval = self.parse_interval()?;
            let inner = self.parse_unary()?;
            return Ok(Formula::globally(interval, inner));
        }
        self.parse_primary()
    }

    fn parse_primary(&mut self) -> Result<Formula> {
        self.skip_ws();
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let inner = self.parse_or()?;
                self.expect_char(')')?;
                Ok(inner)
            }
            Some(c) if c.is_alphabetic() || c == '_' => {
                if self.eat_keyword("true") {
                    return Ok(Formula::True);
                }
                self.parse_atom()
            }
            Some(c) => Err(self.error(format!("unexpected character '{}'", c))),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn parse_atom(&mut self) -> Result<Formula> {
        self.skip_ws();
        let start = self.pos;
        let ident = self.take_identifier()?;
        let var = match ident.strip_prefix("x_") {
            Some(digits) if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) => {
                digits.parse::<usize>().map_err(|_| Error::Parse {
                    offset: start,
                    message: format!("variable index too large in '{}'", ident),
                })?
            }
            _ => {
                return Err(Error::Parse {
                    offset: start,
                    message: format!("unknown variable name '{}' (expected x_<k>)", ident),
                })
            }
        };
        self.skip_ws();
        let cmp = if self.rest().starts_with("<=") {
            self.pos += 2;
            Comparison::Le
        } else if self.rest().starts_with(">=") {
            self.pos += 2;
            Comparison::Ge
        } else {
            return Err(self.error("expected '<=' or '>='"));
        };
        let threshold = self.parse_float()?;
        Ok(Formula::atom(var, cmp, threshold))
    }

    fn take_identifier(&mut self) -> Result<&'a str> {
        let start = self.pos;
        match self.peek() {
            Some(c) if c.is_alphabetic() || c == '_' => self.pos += c.len_utf8(),
            _ => return Err(self.error("expected identifier")),
        }
        while let Some(c) = self.peek() {
            if c.is_alphanumeric() || c == '_' {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
        Ok(&self.text[start..self.pos])
    }

    fn parse_float(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        if matches!(self.peek(), Some('+') | Some('-')) {
            self.pos += 1;
        }
        let mut digits = false;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
            digits = true;
        }
        if self.peek() == Some('.') {
            self.pos += 1;
            while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                self.pos += 1;
                digits = true;
            }
        }
        if !digits {
            self.pos = start;
            return Err(self.error("expected number"));
        }
        if matches!(self.peek(), Some('e') | Some('E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some('+') | Some('-')) {
                self.pos += 1;
            }
            let mut exp_digits = false;
            while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                self.pos += 1;
                exp_digits = true;
            }
            if !exp_digits {
                self.pos = mark;
            }
        }
        self.text[start..self.pos].parse::<f64>().map_err(|_| Error::Parse {
            offset: start,
            message: format!("invalid number '{}'", &self.text[start..self.pos]),
        })
    }

    fn parse_interval(&mut self) -> Result<Interval> {
        self.expect_char('[')?;
        let lo = self.parse_index()?;
        self.expect_char(',')?;
        self.skip_ws();
        let interval = if self.eat_keyword("inf") {
            Interval::unbounded(lo)
        } else {
            let at = self.pos;
            let hi = self.parse_index()?;
            Interval::bounded(lo, hi).map_err(|_| Error::Parse {
                offset: at,
                message: format!("malformed interval: lo {} > hi {}", lo, hi),
            })?
        };
        self.expect_char(']')?;
        Ok(interval)
    }

    fn parse_index(&mut self) -> Result<usize> {
        self.skip_ws();
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.error("expected non-negative integer"));
        }
        self.text[start..self.pos].parse::<usize>().map_err(|_| Error::Parse {
            offset: start,
            message: "integer out of range".into(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ivl(lo: usize, hi: usize) -> Interval {
        Interval::bounded(lo, hi).unwrap()
    }

    #[test]
    fn parses_globally_atom() {
        let phi = parse("G[0,24] (x_0 <= 37.3)").unwrap();
        assert_eq!(
            phi,
            Formula::globally(ivl(0, 24), Formula::atom(0, Comparison::Le, 37.3))
        );
    }

    #[test]
    fn parses_negated_until() {
        let phi = parse("not (x_0 <= 35.9 U[11,36] x_0 >= 31.5)").unwrap();
        assert_eq!(
            phi,
            Formula::not(Formula::until(
                ivl(11, 36),
                Formula::atom(0, Comparison::Le, 35.9),
                Formula::atom(0, Comparison::Ge, 31.5),
            ))
        );
    }

    #[test]
    fn parses_true() {
        assert_eq!(parse("true").unwrap(), Formula::True);
        assert_eq!(parse("  true  ").unwrap(), Formula::True);
    }

    #[test]
    fn parses_unbounded_interval() {
        let phi = parse("G[35,inf] x_0 <= 18.8").unwrap();
        assert_eq!(
            phi,
            Formula::globally(
                Interval::unbounded(35),
                Formula::atom(0, Comparison::Le, 18.8)
            )
        );
    }

    #[test]
    fn precedence_not_tighter_than_until() {
        let phi = parse("not x_0 <= 1 U[0,2] x_0 >= 3").unwrap();
        assert_eq!(
            phi,
            Formula::until(
                ivl(0, 2),
                Formula::not(Formula::atom(0, Comparison::Le, 1.0)),
                Formula::atom(0, Comparison::Ge, 3.0),
            )
        );
    }

    #[test]
    fn precedence_until_tighter_than_and_tighter_than_or() {
        let phi = parse("x_0 <= 1 U[0,2] x_0 >= 3 and x_1 <= 4 or true").unwrap();
        let until = Formula::until(
            ivl(0, 2),
            Formula::atom(0, Comparison::Le, 1.0),
            Formula::atom(0, Comparison::Ge, 3.0),
        );
        let and = Formula::and(until, Formula::atom(1, Comparison::Le, 4.0));
        assert_eq!(phi, Formula::or(and, Formula::True));
    }

    #[test]
    fn binary_operators_associate_left() {
        let phi = parse("x_0 <= 1 and x_0 <= 2 and x_0 <= 3").unwrap();
        assert_eq!(
            phi,
            Formula::and(
                Formula::and(
                    Formula::atom(0, Comparison::Le, 1.0),
                    Formula::atom(0, Comparison::Le, 2.0)
                ),
                Formula::atom(0, Comparison::Le, 3.0)
            )
        );
    }

    #[test]
    fn whitespace_insensitive() {
        let a = parse("G[0,24](x_0<=37.3)").unwrap();
        let b = parse("  G [ 0 , 24 ]  ( x_0  <=  37.3 ) ").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_unknown_variable() {
        let err = parse("y <= 3").unwrap_err();
        assert!(err.to_string().contains("unknown variable name"), "{err}");
    }

    #[test]
    fn rejects_malformed_interval() {
        let err = parse("G[5,2] x_0 <= 1").unwrap_err();
        assert!(err.to_string().contains("malformed interval"), "{err}");
    }

    #[test]
    fn reports_byte_offset() {
        let err = parse("x_0 <= 1 and ???").unwrap_err();
        match err {
            crate::Error::Parse { offset, .. } => assert_eq!(offset, 13),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn rejects_trailing_input() {
        assert!(parse("true true").is_err());
        assert!(parse("x_0 <= 1)").is_err());
    }

    #[test]
    fn negative_and_scientific_thresholds() {
        let phi = parse("x_0 >= -2.5").unwrap();
        assert_eq!(phi, Formula::atom(0, Comparison::Ge, -2.5));
        let phi = parse("x_1 <= 1.5e3").unwrap();
        assert_eq!(phi, Formula::atom(1, Comparison::Le, 1500.0));
    }

    #[test]
    fn roundtrip_examples() {
        for text in [
            "G[0,24] (x_0 <= 37.3)",
            "true",
            "not true",
            "not (x_0 <= 35.9 U[11,36] x_0 >= 31.5)",
            "F[21,51] (x_1 >= 28.38) and G[35,inf] (x_0 <= 18.8)",
            "x_0 <= 1 and (x_0 >= 2 or x_0 <= 3)",
            "not x_0 <= 1 U[0,2] not x_0 >= 3",
        ] {
            let phi = parse(text).unwrap();
            let rendered = phi.render();
            let reparsed = parse(&rendered).unwrap();
            assert_eq!(reparsed, phi, "text={text} rendered={rendered}");
            assert_eq!(parse(&reparsed.render()).unwrap(), phi);
        }
    }

    #[test]
    fn render_matches_expected_forms() {
        assert_eq!(
            parse("G[0,24] (x_0 <= 37.3)").unwrap().render(),
            "G[0,24] (x_0 <= 37.3)"
        );
        assert_eq!(Formula::True.render(), "true");
        assert_eq!(Formula::not(Formula::True).render(), "not true");
    }
}
