//! Recursive-descent parser for the expression grammar (see README).

use std::collections::BTreeMap;
use std::f64::consts::PI;

use thiserror::Error;

use super::expr::{Expr, MAX_VARS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier '{name}' at offset {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("'{name}' at offset {offset} takes {expected} argument(s), got {got}")]
    Arity { offset: usize, name: String, expected: usize, got: usize },
    #[error("argument {index} of '{name}' at offset {offset} must be {what}")]
    BadArgument { offset: usize, name: String, index: usize, what: &'static str },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::UnknownIdentifier { offset, .. }
            | ParseError::Arity { offset, .. }
            | ParseError::BadArgument { offset, .. } => *offset,
        }
    }
}

/// Space dimension plus named constants available to the parser.
#[derive(Clone, Debug, Default)]
pub struct ParseContext {
    pub dimension: usize,
    pub constants: BTreeMap<String, f64>,
}

impl ParseContext {
    pub fn new(dimension: usize) -> Self {
        ParseContext { dimension, constants: BTreeMap::new() }
    }

    pub fn with_constant(mut self, name: &str, value: f64) -> Self {
        self.constants.insert(name.to_string(), value);
        self
    }
}

pub fn parse_expression(text: &str, dimension: usize) -> Result<Expr, ParseError> {
    parse_with(text, &ParseContext::new(dimension))
}

pub fn parse_with(text: &str, ctx: &ParseContext) -> Result<Expr, ParseError> {
    assert!(ctx.dimension < MAX_VARS, "dimension {} exceeds the supported maximum", ctx.dimension);
    let mut p = Parser { src: text.as_bytes(), pos: 0, ctx };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.syntax(format!("unexpected '{}'", p.src[p.pos] as char)));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    ctx: &'a ParseContext,
}

impl Parser<'_> {
    fn syntax(&self, message: String) -> ParseError {
        ParseError::Syntax { offset: self.pos, message }
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

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            let found = self.peek().map_or("end of input".to_string(), |b| format!("'{}'", b as char));
            Err(self.syntax(format!("expected '{}', found {found}", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut acc = vec![self.term()?];
        loop {
            if self.eat(b'+') {
                acc.push(self.term()?);
            } else if self.eat(b'-') {
                acc.push(-self.term()?);
            } else {
                return Ok(Expr::sum(acc));
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = vec![self.unary()?];
        loop {
            if self.eat(b'*') {
                acc.push(self.unary()?);
            } else if self.peek() == Some(b'/') {
                let at = self.pos;
                self.pos += 1;
                let d = self.unary()?;
                if d.is_zero() {
                    return Err(ParseError::Syntax { offset: at, message: "division by the constant zero".into() });
                }
                acc.push(d.recip());
            } else {
                return Ok(Expr::product(acc));
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat(b'-') {
            return Ok(-self.unary()?);
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if !self.eat(b'^') {
            return Ok(base);
        }
        let at = self.pos;
        let negative = self.eat(b'-');
        let exp = if self.peek() == Some(b'(') {
            self.primary()?
        } else {
            self.number()?
        };
        let n = exp
            .as_const()
            .filter(|c| c.fract() == 0.0 && c.abs() <= i32::MAX as f64)
            .ok_or(ParseError::Syntax { offset: at, message: "exponent must be an integer constant".into() })?;
        let n = if negative { -(n as i32) } else { n as i32 };
        if base.is_zero() && n < 0 {
            return Err(ParseError::Syntax { offset: at, message: "negative power of zero".into() });
        }
        Ok(Expr::powi(base, n))
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let s = self.src;
        let digits = |p: &mut usize| {
            let b = *p;
            while *p < s.len() && s[*p].is_ascii_digit() {
                *p += 1;
            }
            *p > b
        };
        let mut p = self.pos;
        let int = digits(&mut p);
        let mut frac = false;
        if p < s.len() && s[p] == b'.' {
            p += 1;
            frac = digits(&mut p);
        }
        if !int && !frac {
            let found = s.get(start).map_or("end of input".to_string(), |b| format!("'{}'", *b as char));
            return Err(self.syntax(format!("expected a number, found {found}")));
        }
        if p < s.len() && (s[p] == b'e' || s[p] == b'E') {
            let mut q = p + 1;
            if q < s.len() && (s[q] == b'+' || s[q] == b'-') {
                q += 1;
            }
            if digits(&mut q) {
                p = q;
            }
        }
        let text = std::str::from_utf8(&s[start..p]).expect("ascii");
        let v: f64 = text.parse().map_err(|_| ParseError::Syntax { offset: start, message: format!("bad number '{text}'") })?;
        self.pos = p;
        Ok(Expr::constant(v))
    }

    fn ident(&mut self) -> Option<(usize, String)> {
        self.skip_ws();
        let start = self.pos;
        let s = self.src;
        if start < s.len() && (s[start].is_ascii_alphabetic() || s[start] == b'_') {
            let mut p = start + 1;
            while p < s.len() && (s[p].is_ascii_alphanumeric() || s[p] == b'_') {
                p += 1;
            }
            self.pos = p;
            return Some((start, String::from_utf8_lossy(&s[start..p]).into_owned()));
        }
        None
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            None => Err(self.syntax("expected an operand, found end of input".into())),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let (at, name) = self.ident().expect("identifier start");
                if self.peek() == Some(b'(') {
                    self.pos += 1;
                    let mut args = Vec::new();
                    if !self.eat(b')') {
                        loop {
                            args.push(self.expr()?);
                            if self.eat(b')') {
                                break;
                            }
                            self.expect(b',')?;
                        }
                    }
                    return self.call(at, &name, args);
                }
                self.atom(at, &name)
            }
            Some(c) => Err(self.syntax(format!("expected an operand, found '{}'", c as char))),
        }
    }

    fn atom(&self, at: usize, name: &str) -> Result<Expr, ParseError> {
        if name == "t" {
            return Ok(Expr::t());
        }
        if name == "pi" {
            return Ok(Expr::constant(PI));
        }
        if let Some(v) = self.space_var(name) {
            return Ok(Expr::x(v));
        }
        if let Some(&c) = self.ctx.constants.get(name) {
            return Ok(Expr::constant(c));
        }
        Err(ParseError::UnknownIdentifier { offset: at, name: name.to_string() })
    }

    fn space_var(&self, name: &str) -> Option<usize> {
        let k: usize = name.strip_prefix('x')?.parse().ok()?;
        (k >= 1 && k <= self.ctx.dimension).then_some(k)
    }

    fn call(&self, at: usize, name: &str, args: Vec<Expr>) -> Result<Expr, ParseError> {
        let arity = |expected: usize| {
            if args.len() == expected {
                Ok(())
            } else {
                Err(ParseError::Arity { offset: at, name: name.to_string(), expected, got: args.len() })
            }
        };
        let constant = |index: usize| {
            args[index].as_const().ok_or(ParseError::BadArgument { offset: at, name: name.to_string(), index, what: "a constant" })
        };
        let order = |index: usize| {
            constant(index).and_then(|c| {
                if c >= 0.0 && c.fract() == 0.0 && c <= 64.0 {
                    Ok(c as u32)
                } else {
                    Err(ParseError::BadArgument { offset: at, name: name.to_string(), index, what: "a derivative order in 0..=64" })
                }
            })
        };
        let variable = |index: usize| match args[index].kind() {
            super::expr::Kind::Var(v) => Ok(*v),
            _ => Err(ParseError::BadArgument { offset: at, name: name.to_string(), index, what: "a variable" }),
        };
        let interval = |lo_idx: usize| {
            let lo = constant(lo_idx)?;
            let hi = constant(lo_idx + 1)?;
            if lo < hi {
                Ok((lo, hi))
            } else {
                Err(ParseError::BadArgument { offset: at, name: name.to_string(), index: lo_idx + 1, what: "larger than the lower end" })
            }
        };
        match name {
            "sin" | "cos" | "exp" => {
                arity(1)?;
                let a = args[0].clone();
                Ok(match name {
                    "sin" => Expr::sin(a),
                    "cos" => Expr::cos(a),
                    _ => Expr::exp(a),
                })
            }
            "pow" => {
                arity(2)?;
                let n = constant(1)?;
                if n.fract() != 0.0 {
                    return Err(ParseError::BadArgument { offset: at, name: name.into(), index: 1, what: "an integer" });
                }
                Ok(Expr::powi(args[0].clone(), n as i32))
            }
            "bump" | "step" => {
                arity(3)?;
                let v = variable(0)?;
                let (lo, hi) = interval(1)?;
                Ok(if name == "bump" { Expr::bump(v, lo, hi) } else { Expr::step(v, lo, hi) })
            }
            "bump_d" | "step_d" => {
                arity(4)?;
                let v = variable(0)?;
                let (lo, hi) = interval(1)?;
                let k = order(3)?;
                Ok(if name == "bump_d" { Expr::bump_derivative(v, lo, hi, k) } else { Expr::step_derivative(v, lo, hi, k) })
            }
            "pbump" | "pbump_d" => {
                arity(if name == "pbump" { 4 } else { 5 })?;
                let v = variable(0)?;
                let (lo, hi) = interval(1)?;
                let p = order(3)?;
                if p == 0 {
                    return Err(ParseError::BadArgument { offset: at, name: name.into(), index: 3, what: "a positive integer" });
                }
                let k = if name == "pbump" { 0 } else { order(4)? };
                Ok(Expr::poly_bump_derivative(v, lo, hi, p, k))
            }
            "blend" => {
                arity(5)?;
                let v = variable(0)?;
                let (lo, hi) = interval(1)?;
                Ok(Expr::blend(v, lo, hi, args[3].clone(), args[4].clone()))
            }
            "integral" => {
                arity(4)?;
                let v = variable(1)?;
                let lower = constant(2)?;
                let tol = constant(3)?;
                if tol <= 0.0 {
                    return Err(ParseError::BadArgument { offset: at, name: name.into(), index: 3, what: "positive" });
                }
                Ok(Expr::integral(args[0].clone(), v, lower, tol))
            }
            _ => Err(ParseError::UnknownIdentifier { offset: at, name: name.to_string() }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn incomplete_sum_reports_offset() {
        let err = parse_expression("x1 +", 1).unwrap_err();
        assert!(matches!(err, ParseError::Syntax { offset: 4, .. }), "{err:?}");
    }

    #[test]
    fn unknown_identifier_and_arity() {
        assert!(matches!(parse_expression("x3", 2), Err(ParseError::UnknownIdentifier { .. })));
        assert!(matches!(parse_expression("sin(x1, x1)", 1), Err(ParseError::Arity { expected: 1, got: 2, .. })));
    }

    #[test]
    fn sine_node() {
        let e = parse_expression("sin(3*x1)", 1).unwrap();
        assert_eq!(e, Expr::sin(Expr::x(1) * 3.0));
    }

    #[test]
    fn bound_constants() {
        let ctx = ParseContext::new(1).with_constant("C1", 0.25);
        let e = parse_with("(-10*C1*exp(x1))/(sin(3*x1)+C1*exp(x1))", &ctx).unwrap();
        let x: f64 = 0.4;
        let exact = -10.0 * 0.25 * x.exp() / ((3.0 * x).sin() + 0.25 * x.exp());
        assert!((e.eval(&[0.0, x]).unwrap() - exact).abs() < 1e-14);
    }

    #[test]
    fn unary_minus_binds_looser_than_power() {
        let e = parse_expression("-x1^2", 1).unwrap();
        assert_eq!(e.eval(&[0.0, 3.0]).unwrap(), -9.0);
        let e = parse_expression("2^-1*x1", 1).unwrap();
        assert_eq!(e.eval(&[0.0, 3.0]).unwrap(), 1.5);
    }
}
