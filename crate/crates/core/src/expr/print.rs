use std::fmt::{self, Write};

use super::{Expr, Node};

const SUM: u8 = 1;
const PRODUCT: u8 = 2;
const UNARY: u8 = 3;
const POWER: u8 = 4;
const ATOM: u8 = 5;

fn prec(e: &Expr) -> u8 {
    match e.node() {
        Node::Const(c) if *c < 0.0 => UNARY,
        Node::Const(_) | Node::Var(_) | Node::Call(..) => ATOM,
        Node::Sum(_) => SUM,
        Node::Product(_) => PRODUCT,
        Node::Neg(_) => UNARY,
        Node::Pow(..) => POWER,
    }
}

fn is_reciprocal(e: &Expr) -> Option<&Expr> {
    match e.node() {
        Node::Pow(b, x) if x.as_const() == Some(-1.0) => Some(b),
        _ => None,
    }
}

fn wrap(e: &Expr, min: u8, f: &mut dyn Write) -> fmt::Result {
    if prec(e) < min {
        f.write_char('(')?;
        write_expr(e, f)?;
        f.write_char(')')
    } else {
        write_expr(e, f)
    }
}

pub(super) fn write_expr(e: &Expr, f: &mut dyn Write) -> fmt::Result {
    match e.node() {
        Node::Const(c) => write!(f, "{c}"),
        Node::Var(v) => f.write_str(v),
        Node::Call(func, a) => {
            write!(f, "{}(", func.name())?;
            write_expr(a, f)?;
            f.write_char(')')
        }
        Node::Neg(a) => {
            f.write_char('-')?;
            // a leading minus scopes over the whole product that follows
            match a.node() {
                Node::Product(_) => write_expr(a, f),
                _ => wrap(a, POWER, f),
            }
        }
        Node::Pow(b, x) => {
            wrap(b, ATOM, f)?;
            f.write_char('^')?;
            match x.node() {
                Node::Neg(a) if prec(a) >= POWER => write_expr(x, f),
                Node::Const(_) => write_expr(x, f),
                _ => wrap(x, POWER, f),
            }
        }
        Node::Product(fs) => {
            for (i, factor) in fs.iter().enumerate() {
                if i == 0 {
                    wrap(factor, POWER, f)?;
                } else if let Some(den) = is_reciprocal(factor) {
                    f.write_char('/')?;
                    wrap(den, POWER, f)?;
                } else {
                    f.write_char('*')?;
                    wrap(factor, POWER, f)?;
                }
            }
            Ok(())
        }
        Node::Sum(ts) => {
            for (i, t) in ts.iter().enumerate() {
                if i == 0 {
                    write_expr(t, f)?;
                    continue;
                }
                match t.node() {
                    Node::Neg(a) => {
                        f.write_str(" - ")?;
                        match a.node() {
                            Node::Product(_) => write_expr(a, f)?,
                            _ => wrap(a, POWER, f)?,
                        }
                    }
                    Node::Const(c) if *c < 0.0 => write!(f, " - {}", -c)?,
                    _ => {
                        f.write_str(" + ")?;
                        wrap(t, PRODUCT, f)?;
                    }
                }
            }
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::expr::{ex, Expr};

    #[test]
    fn prints_minimal_parentheses() {
        let x = Expr::var("x1");
        let y = Expr::var("y1");
        assert_eq!((&x * &y).to_string(), "x1*y1");
        assert_eq!((&x - &y * 2.0).to_string(), "x1 - 2*y1");
        assert_eq!((-(&x * &y)).to_string(), "-x1*y1");
        assert_eq!(((&x + 1.0) * &y).to_string(), "(x1 + 1)*y1");
        assert_eq!((&x / (&y + 1.0)).to_string(), "x1/(y1 + 1)");
        assert_eq!((&x - 1.0).to_string(), "x1 - 1");
        assert_eq!(x.powi(2).to_string(), "x1^2");
        assert_eq!(x.powi(-1).to_string(), "x1^-1");
        assert_eq!((-(x.powi(2))).to_string(), "-x1^2");
        assert_eq!(Expr::constant(0.5).to_string(), "0.5");
    }

    #[test]
    fn exact_round_trip_on_awkward_shapes() {
        for text in [
            "x1 + -2*y1",
            "-(-x1)",
            "(-2)*x1",
            "x1*(-y1)",
            "(x1*y1)^2",
            "x1^-y1^2",
            "2^x1^y1",
            "x1 - (y1 - 1)",
            "x1/(y1*k1)",
            "-(x1 + 1)*y1",
            "(-1)^x1",
            "sin(-x1)/-cos(x1)",
        ] {
            let e = ex(text);
            let back = ex(&e.to_string());
            assert_eq!(back, e, "{text} printed as {e}");
        }
    }
}
