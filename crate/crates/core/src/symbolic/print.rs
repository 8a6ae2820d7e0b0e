//! Canonical printer. Output re-parses to the identical expression, except
//! for tabulated fields, which have no textual form.

use std::fmt::{self, Write};

use super::expr::{Expr, Kind};

/// Shortest decimal text that parses back to exactly `c`.
pub fn format_number(c: f64) -> String {
    let a = c.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{c}")
    } else {
        format!("{c:e}")
    }
}

fn var_name(v: usize) -> String {
    if v == 0 {
        "t".into()
    } else {
        format!("x{v}")
    }
}

#[derive(Clone, Copy, PartialEq, PartialOrd)]
enum Prec {
    Sum,
    Product,
    Power,
}

fn precedence(e: &Expr) -> Prec {
    match e.kind() {
        Kind::Sum(_) => Prec::Sum,
        Kind::Product(_) => Prec::Product,
        Kind::Const(c) if *c < 0.0 => Prec::Sum,
        Kind::Pow(_, n) if *n < 0 => Prec::Product,
        _ => Prec::Power,
    }
}

fn write_wrapped(out: &mut String, e: &Expr, min: Prec) -> fmt::Result {
    if precedence(e) < min {
        out.push('(');
        write_expr(out, e)?;
        out.push(')');
        Ok(())
    } else {
        write_expr(out, e)
    }
}

/// Splits a term into (negated, positive-coefficient remainder).
fn split_sign(e: &Expr) -> (bool, Option<Expr>) {
    match e.kind() {
        Kind::Const(c) if *c < 0.0 => (true, Some(Expr::constant(-c))),
        Kind::Product(fs) => match fs[0].as_const() {
            Some(c) if c < 0.0 => (true, Some(e.scale(-1.0))),
            _ => (false, None),
        },
        _ => (false, None),
    }
}

fn write_product(out: &mut String, fs: &[Expr]) -> fmt::Result {
    let mut num: Vec<Expr> = Vec::new();
    let mut den: Vec<Expr> = Vec::new();
    for f in fs {
        match f.kind() {
            Kind::Pow(b, n) if *n < 0 => den.push(Expr::powi(b.clone(), -n)),
            _ => num.push(f.clone()),
        }
    }
    if num.len() > 1 && num[0].as_const() == Some(-1.0) {
        num.remove(0);
        out.push('-');
    }
    if num.is_empty() {
        out.push('1');
    }
    for (i, f) in num.iter().enumerate() {
        if i > 0 {
            out.push('*');
        }
        write_wrapped(out, f, Prec::Power)?;
    }
    if !den.is_empty() {
        out.push('/');
        if den.len() == 1 {
            write_wrapped(out, &den[0], Prec::Power)?;
        } else {
            out.push('(');
            for (i, f) in den.iter().enumerate() {
                if i > 0 {
                    out.push('*');
                }
                write_wrapped(out, f, Prec::Power)?;
            }
            out.push(')');
        }
    }
    Ok(())
}

fn write_expr(out: &mut String, e: &Expr) -> fmt::Result {
    match e.kind() {
        Kind::Const(c) => out.push_str(&format_number(*c)),
        Kind::Var(v) => out.push_str(&var_name(*v)),
        Kind::Sum(ts) => {
            for (i, t) in ts.iter().enumerate() {
                let (neg, rest) = split_sign(t);
                match (i, neg) {
                    (0, _) => write_expr(out, t)?,
                    (_, true) => {
                        out.push_str(" - ");
                        write_wrapped(out, rest.as_ref().expect("negated term"), Prec::Product)?;
                    }
                    (_, false) => {
                        out.push_str(" + ");
                        write_expr(out, t)?;
                    }
                }
            }
        }
        Kind::Product(fs) => write_product(out, fs)?,
        Kind::Pow(b, n) => {
            if *n < 0 {
                write_product(out, std::slice::from_ref(e))?;
            } else {
                write_wrapped(out, b, Prec::Power)?;
                if matches!(b.kind(), Kind::Pow(..)) {
                    unreachable!("nested powers are merged");
                }
                write!(out, "^{n}")?;
            }
        }
        Kind::Sin(a) | Kind::Cos(a) | Kind::Exp(a) => {
            let name = match e.kind() {
                Kind::Sin(_) => "sin",
                Kind::Cos(_) => "cos",
                _ => "exp",
            };
            out.push_str(name);
            out.push('(');
            write_expr(out, a)?;
            out.push(')');
        }
        Kind::Bump(b) if b.power > 0 => {
            let (v, lo, hi) = (var_name(b.var), format_number(b.lo), format_number(b.hi));
            if b.order == 0 {
                write!(out, "pbump({v}, {lo}, {hi}, {})", b.power)?;
            } else {
                write!(out, "pbump_d({v}, {lo}, {hi}, {}, {})", b.power, b.order)?;
            }
        }
        Kind::Bump(b) => {
            if b.order == 0 {
                write!(out, "bump({}, {}, {})", var_name(b.var), format_number(b.lo), format_number(b.hi))?;
            } else {
                write!(out, "bump_d({}, {}, {}, {})", var_name(b.var), format_number(b.lo), format_number(b.hi), b.order)?;
            }
        }
        Kind::Step(s) => {
            if s.order == 0 {
                write!(out, "step({}, {}, {})", var_name(s.var), format_number(s.lo), format_number(s.hi))?;
            } else {
                write!(out, "step_d({}, {}, {}, {})", var_name(s.var), format_number(s.lo), format_number(s.hi), s.order)?;
            }
        }
        Kind::Integral(i) => {
            out.push_str("integral(");
            write_expr(out, &i.integrand)?;
            write!(out, ", {}, {}, {})", var_name(i.var), format_number(i.lower), format_number(i.tol))?;
        }
        Kind::Field(f) => {
            write!(out, "field:{}", f.field.name())?;
            if !f.order.is_zero() {
                write!(out, "[{}]", f.order)?;
            }
        }
    }
    Ok(())
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        write_expr(&mut s, self)?;
        f.write_str(&s)
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse::parse_expression;

    fn round_trip(text: &str) {
        let e = parse_expression(text, 2).unwrap();
        let printed = e.to_string();
        let again = parse_expression(&printed, 2).unwrap_or_else(|err| panic!("{printed}: {err}"));
        assert_eq!(e, again, "{text} -> {printed}");
    }

    #[test]
    fn round_trips() {
        for text in [
            "sin(3*x1)",
            "x1 - x2",
            "-2*x1*x2 + 0.1",
            "1/(x1 + 2) - 3/x2^2",
            "exp(-x1)*cos(t)",
            "bump(x1, 0.1, 0.5)*step_d(t, 0, 1, 2)",
            "integral(cos(3*x1)*x1, x1, 0, 1e-10) + 1e-20",
            "(x1 + x2)^3 - pow(x1, -2)",
            "-1",
            "-(x1*x2)/(x1 - 1)",
        ] {
            round_trip(text);
        }
    }

    #[test]
    fn quotient_prints_with_slash() {
        let e = parse_expression("x1/(x2+1)", 2).unwrap();
        assert_eq!(e.to_string(), "x1/(1 + x2)");
    }
}
