use thiserror::Error;

use super::{Expr, Func};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax,
    UnknownFunction,
}

/// A parse failure; `line` and `column` are 1-based.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("{line}:{column}: {message}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

struct Lexer {
    toks: Vec<(Tok, usize, usize)>,
}

fn lex(text: &str) -> Result<Lexer, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut toks = Vec::new();
    let (mut line, mut col) = (1, 1);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let start = (line, col);
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let single = match c {
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(t) = single {
            toks.push((t, start.0, start.1));
            i += 1;
            col += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let j0 = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut k = i + 1;
                if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                    k += 1;
                }
                if k < chars.len() && chars[k].is_ascii_digit() {
                    while k < chars.len() && chars[k].is_ascii_digit() {
                        k += 1;
                    }
                    i = k;
                }
            }
            let s: String = chars[j0..i].iter().collect();
            let v: f64 = s.parse().map_err(|_| ParseError {
                kind: ParseErrorKind::Syntax,
                line: start.0,
                column: start.1,
                message: format!("malformed number {s:?}"),
            })?;
            if !v.is_finite() {
                return Err(ParseError {
                    kind: ParseErrorKind::Syntax,
                    line: start.0,
                    column: start.1,
                    message: format!("number {s:?} is not finite"),
                });
            }
            col += i - j0;
            toks.push((Tok::Num(v), start.0, start.1));
            continue;
        }
        if c.is_ascii_alphabetic() {
            let j0 = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - j0;
            toks.push((Tok::Ident(chars[j0..i].iter().collect()), start.0, start.1));
            continue;
        }
        return Err(ParseError {
            kind: ParseErrorKind::Syntax,
            line: start.0,
            column: start.1,
            message: format!("unexpected character {c:?}"),
        });
    }
    toks.push((Tok::End, line, col));
    Ok(Lexer { toks })
}

struct Parser {
    lx: Lexer,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.lx.toks[self.pos].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.lx.toks[self.pos].0.clone();
        if self.pos + 1 < self.lx.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: String) -> ParseError {
        let (_, line, column) = self.lx.toks[self.pos];
        ParseError {
            kind: ParseErrorKind::Syntax,
            line,
            column,
            message,
        }
    }

    fn describe(t: &Tok) -> String {
        match t {
            Tok::End => "end of input".into(),
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("identifier {s:?}"),
            other => format!("{other:?}").to_lowercase(),
        }
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut terms = vec![self.product()?];
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    terms.push(self.product()?);
                }
                Tok::Minus => {
                    self.bump();
                    terms.push(Expr::raw_neg(self.product()?));
                }
                _ => break,
            }
        }
        Ok(Expr::raw_sum(terms))
    }

    // A leading minus negates the whole product that follows it.
    fn product(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(Expr::raw_neg(self.product()?));
        }
        let mut factors = vec![self.unary()?];
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    factors.push(self.unary()?);
                }
                Tok::Slash => {
                    self.bump();
                    let d = self.unary()?;
                    factors.push(Expr::raw_pow(d, Expr::constant(-1.0)));
                }
                _ => break,
            }
        }
        Ok(Expr::raw_product(factors))
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(Expr::raw_neg(self.unary()?));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let exponent = self.unary()?;
            return Ok(Expr::raw_pow(base, exponent));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let (line, column) = {
            let (_, l, c) = self.lx.toks[self.pos];
            (l, c)
        };
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::constant(v))
            }
            Tok::Ident(name) => {
                self.bump();
                if *self.peek() == Tok::LParen {
                    let func = Func::from_name(&name).ok_or_else(|| ParseError {
                        kind: ParseErrorKind::UnknownFunction,
                        line,
                        column,
                        message: format!("unknown function {name:?}"),
                    })?;
                    self.bump();
                    let arg = self.sum()?;
                    self.expect_rparen()?;
                    Ok(Expr::raw_call(func, arg))
                } else {
                    Ok(Expr::var(&name))
                }
            }
            Tok::LParen => {
                self.bump();
                let e = self.sum()?;
                self.expect_rparen()?;
                Ok(e)
            }
            other => Err(self.error(format!(
                "expected an operand, found {}",
                Self::describe(&other)
            ))),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        if *self.peek() == Tok::RParen {
            self.bump();
            Ok(())
        } else {
            Err(self.error(format!(
                "expected ')', found {}",
                Self::describe(self.peek())
            )))
        }
    }
}

/// Parses an infix expression. Precedence from tightest: `^`
/// (right-associative), unary minus, `*` and `/`, `+` and `-`.
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    let mut p = Parser {
        lx: lex(text)?,
        pos: 0,
    };
    let e = p.sum()?;
    if *p.peek() != Tok::End {
        return Err(p.error(format!("unexpected {}", Parser::describe(p.peek()))));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Node;

    #[test]
    fn grammar_shapes() {
        let e = parse("x1^2 + 3*x2").unwrap();
        match e.node() {
            Node::Sum(ts) => {
                assert!(matches!(ts[0].node(), Node::Pow(b, x)
                    if b.as_var() == Some("x1") && x.as_const() == Some(2.0)));
                assert!(matches!(ts[1].node(), Node::Product(fs)
                    if fs[0].as_const() == Some(3.0) && fs[1].as_var() == Some("x2")));
            }
            _ => panic!("expected a sum, got {e}"),
        }
        let e = parse("sin(k1)*p2").unwrap();
        assert!(matches!(e.node(), Node::Product(fs)
            if matches!(fs[0].node(), Node::Call(Func::Sin, a) if a.as_var() == Some("k1"))
            && fs[1].as_var() == Some("p2")));
    }

    #[test]
    fn power_is_right_associative_and_binds_tighter_than_minus() {
        let e = parse("2^3^2").unwrap();
        assert_eq!(e.eval(&Default::default()).unwrap(), 512.0);
        let e = parse("-2^2").unwrap();
        assert_eq!(e.eval(&Default::default()).unwrap(), -4.0);
        let e = parse("2^-1").unwrap();
        assert_eq!(e.eval(&Default::default()).unwrap(), 0.5);
    }

    #[test]
    fn syntax_error_position() {
        let err = parse("x1 +").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::Syntax);
        assert_eq!((err.line, err.column), (1, 5));
        let err = parse("(x1\n  + ").unwrap_err();
        assert_eq!((err.line, err.column), (2, 5));
        let err = parse("x1 x2").unwrap_err();
        assert_eq!(err.column, 4);
    }

    #[test]
    fn unknown_function() {
        let err = parse("2*tanh(x1)").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnknownFunction);
        assert_eq!(err.column, 3);
    }

    #[test]
    fn numbers() {
        assert_eq!(parse("1.5e2").unwrap().as_const(), Some(150.0));
        assert_eq!(parse(".25").unwrap().as_const(), Some(0.25));
        assert!(parse("1.2.3").is_err());
    }
}
