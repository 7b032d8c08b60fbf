//! Symbolic expressions over named real variables.
//!
//! An [`Expr`] is an immutable, reference-counted tree. The arithmetic
//! operators build simplified trees (constant folding, 0/1 identities,
//! flattening); the parser builds normalized trees that print back to the
//! same text shape. Identity of two expressions is decided numerically by
//! [`equivalent`], never by simplification alone.

mod diff;
mod eval;
mod parse;
mod print;
mod sample;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops;
use std::sync::Arc;

pub use diff::{finite_difference, with_derivative_log, DerivativeRecord};
pub use eval::{Binding, Compiled, EvalError};
pub use parse::{parse, ParseError, ParseErrorKind};
pub use sample::{compare, equivalent, random_polynomial, Comparison, EquivalenceError, Sampler};

/// Unary functions understood by the grammar.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    /// Applies the function, returning `None` outside its real domain.
    pub fn apply(self, x: f64) -> Option<f64> {
        let v = match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Exp => x.exp(),
            Func::Log if x <= 0.0 => return None,
            Func::Log => x.ln(),
            Func::Sqrt if x < 0.0 => return None,
            Func::Sqrt => x.sqrt(),
        };
        v.is_finite().then_some(v)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Const(f64),
    Var(Arc<str>),
    Sum(Vec<Expr>),
    Product(Vec<Expr>),
    Pow(Expr, Expr),
    Neg(Expr),
    Call(Func, Expr),
}

#[derive(Clone, PartialEq)]
pub struct Expr(Arc<Node>);

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

impl Expr {
    pub fn node(&self) -> &Node {
        &self.0
    }

    fn from_node(node: Node) -> Expr {
        Expr(Arc::new(node))
    }

    /// A constant. Non-finite values are rejected with a panic because every
    /// constant in a tree must be a finite real.
    pub fn constant(c: f64) -> Expr {
        assert!(c.is_finite(), "non-finite constant {c}");
        // normalize -0.0 so structural equality and printing agree
        Expr::from_node(Node::Const(if c == 0.0 { 0.0 } else { c }))
    }

    pub fn zero() -> Expr {
        Expr::constant(0.0)
    }

    pub fn one() -> Expr {
        Expr::constant(1.0)
    }

    pub fn var(name: &str) -> Expr {
        assert!(!name.is_empty(), "empty variable name");
        Expr::from_node(Node::Var(Arc::from(name)))
    }

    pub fn as_const(&self) -> Option<f64> {
        match self.node() {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn as_var(&self) -> Option<&str> {
        match self.node() {
            Node::Var(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    pub fn is_one(&self) -> bool {
        self.as_const() == Some(1.0)
    }

    /// Simplifying sum: flattens nested sums, folds constants, drops zeros.
    pub fn sum<I: IntoIterator<Item = Expr>>(terms: I) -> Expr {
        let mut out = Vec::new();
        let mut c = 0.0;
        let mut stack: Vec<Expr> = terms.into_iter().collect();
        stack.reverse();
        while let Some(t) = stack.pop() {
            match t.node() {
                Node::Const(v) => c += v,
                Node::Sum(ts) => stack.extend(ts.iter().rev().cloned()),
                _ => out.push(t),
            }
        }
        if c != 0.0 && c.is_finite() {
            out.push(Expr::constant(c));
        }
        match out.len() {
            0 => Expr::zero(),
            1 => out.pop().unwrap(),
            _ => Expr::from_node(Node::Sum(out)),
        }
    }

    /// Simplifying product: flattens, folds constants into one leading
    /// factor, pulls the sign out as a negation, and collapses on zero.
    pub fn product<I: IntoIterator<Item = Expr>>(factors: I) -> Expr {
        let mut out = Vec::new();
        let mut c = 1.0;
        let mut stack: Vec<Expr> = factors.into_iter().collect();
        stack.reverse();
        while let Some(f) = stack.pop() {
            match f.node() {
                Node::Const(v) => c *= v,
                Node::Product(fs) => stack.extend(fs.iter().rev().cloned()),
                Node::Neg(a) => {
                    c = -c;
                    stack.push(a.clone());
                }
                _ => out.push(f),
            }
        }
        if c == 0.0 || !c.is_finite() {
            return Expr::zero();
        }
        let negative = c < 0.0;
        let c = c.abs();
        if out.is_empty() {
            return Expr::constant(if negative { -c } else { c });
        }
        if c != 1.0 {
            out.insert(0, Expr::constant(c));
        }
        let body = if out.len() == 1 {
            out.pop().unwrap()
        } else {
            Expr::from_node(Node::Product(out))
        };
        if negative {
            Expr::from_node(Node::Neg(body))
        } else {
            body
        }
    }

    pub fn pow(base: Expr, exponent: Expr) -> Expr {
        if exponent.is_zero() {
            return Expr::one();
        }
        if exponent.is_one() {
            return base;
        }
        if base.is_one() {
            return Expr::one();
        }
        if let (Some(b), Some(e)) = (base.as_const(), exponent.as_const()) {
            let v = b.powf(e);
            if v.is_finite() {
                return Expr::constant(v);
            }
        }
        if base.is_zero() && exponent.as_const().is_some_and(|e| e > 0.0) {
            return Expr::zero();
        }
        Expr::from_node(Node::Pow(base, exponent))
    }

    pub fn powi(&self, n: i32) -> Expr {
        Expr::pow(self.clone(), Expr::constant(n as f64))
    }

    fn negate(e: Expr) -> Expr {
        match e.node() {
            Node::Const(c) => Expr::constant(-c),
            Node::Neg(a) => a.clone(),
            _ => Expr::from_node(Node::Neg(e)),
        }
    }

    pub fn call(func: Func, arg: Expr) -> Expr {
        if let Some(c) = arg.as_const() {
            if let Some(v) = func.apply(c) {
                return Expr::constant(v);
            }
        }
        Expr::from_node(Node::Call(func, arg))
    }

    pub fn sin(&self) -> Expr {
        Expr::call(Func::Sin, self.clone())
    }
    pub fn cos(&self) -> Expr {
        Expr::call(Func::Cos, self.clone())
    }
    pub fn exp(&self) -> Expr {
        Expr::call(Func::Exp, self.clone())
    }
    pub fn ln(&self) -> Expr {
        Expr::call(Func::Log, self.clone())
    }
    pub fn sqrt(&self) -> Expr {
        Expr::call(Func::Sqrt, self.clone())
    }

    /// Rebuilds the tree bottom-up through the simplifying constructors.
    pub fn simplify(&self) -> Expr {
        match self.node() {
            Node::Const(_) | Node::Var(_) => self.clone(),
            Node::Sum(ts) => collect_sum(ts.iter().map(Expr::simplify)),
            Node::Product(fs) => collect_product(fs.iter().map(Expr::simplify)),
            Node::Pow(b, e) => {
                let (b, e) = (b.simplify(), e.simplify());
                match (b.node(), e.as_const()) {
                    (Node::Pow(bb, be), Some(_))
                        if be.as_const().is_some_and(|k| k.fract() == 0.0) =>
                    {
                        Expr::pow(bb.clone(), (be * &e).simplify())
                    }
                    _ => Expr::pow(b, e),
                }
            }
            Node::Neg(a) => Expr::negate(a.simplify()),
            Node::Call(f, a) => Expr::call(*f, a.simplify()),
        }
    }

    /// Free variables in sorted order.
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self.node() {
            Node::Const(_) => {}
            Node::Var(v) => {
                if !out.contains(&**v) {
                    out.insert(v.to_string());
                }
            }
            Node::Sum(xs) | Node::Product(xs) => xs.iter().for_each(|x| x.collect_vars(out)),
            Node::Pow(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Node::Neg(a) | Node::Call(_, a) => a.collect_vars(out),
        }
    }

    pub fn depends_on(&self, var: &str) -> bool {
        match self.node() {
            Node::Const(_) => false,
            Node::Var(v) => &**v == var,
            Node::Sum(xs) | Node::Product(xs) => xs.iter().any(|x| x.depends_on(var)),
            Node::Pow(a, b) => a.depends_on(var) || b.depends_on(var),
            Node::Neg(a) | Node::Call(_, a) => a.depends_on(var),
        }
    }

    /// Simultaneous substitution of variables by expressions.
    pub fn substitute(&self, s: &BTreeMap<String, Expr>) -> Expr {
        if s.is_empty() {
            return self.clone();
        }
        self.subst_with(&|v: &str| s.get(v).cloned())
    }

    /// Substitution driven by a lookup closure; variables the closure maps to
    /// `None` are kept.
    pub fn subst_with(&self, f: &dyn Fn(&str) -> Option<Expr>) -> Expr {
        match self.node() {
            Node::Const(_) => self.clone(),
            Node::Var(v) => f(v).unwrap_or_else(|| self.clone()),
            Node::Sum(ts) => Expr::sum(ts.iter().map(|t| t.subst_with(f))),
            Node::Product(fs) => Expr::product(fs.iter().map(|t| t.subst_with(f))),
            Node::Pow(b, e) => Expr::pow(b.subst_with(f), e.subst_with(f)),
            Node::Neg(a) => Expr::negate(a.subst_with(f)),
            Node::Call(func, a) => Expr::call(*func, a.subst_with(f)),
        }
    }

    /// Renames variables (a substitution by variables).
    pub fn rename(&self, pairs: &[(String, String)]) -> Expr {
        self.subst_with(&|v: &str| {
            pairs
                .iter()
                .find(|(from, _)| from == v)
                .map(|(_, to)| Expr::var(to))
        })
    }

    /// Number of nodes, used to keep generated expressions in check.
    pub fn size(&self) -> usize {
        match self.node() {
            Node::Const(_) | Node::Var(_) => 1,
            Node::Sum(xs) | Node::Product(xs) => 1 + xs.iter().map(Expr::size).sum::<usize>(),
            Node::Pow(a, b) => 1 + a.size() + b.size(),
            Node::Neg(a) | Node::Call(_, a) => 1 + a.size(),
        }
    }

    /// Normalized constructors used by the parser: they flatten and fold
    /// negated literals but keep every other node as written.
    pub(crate) fn raw_sum(terms: Vec<Expr>) -> Expr {
        let mut out = Vec::with_capacity(terms.len());
        for t in terms {
            match t.node() {
                Node::Sum(ts) => out.extend(ts.iter().cloned()),
                _ => out.push(t),
            }
        }
        if out.len() == 1 {
            return out.pop().unwrap();
        }
        Expr::from_node(Node::Sum(out))
    }

    pub(crate) fn raw_product(factors: Vec<Expr>) -> Expr {
        let mut out = Vec::with_capacity(factors.len());
        for f in factors {
            match f.node() {
                Node::Product(fs) => out.extend(fs.iter().cloned()),
                _ => out.push(f),
            }
        }
        if out.len() == 1 {
            return out.pop().unwrap();
        }
        Expr::from_node(Node::Product(out))
    }

    pub(crate) fn raw_neg(e: Expr) -> Expr {
        match e.node() {
            Node::Const(c) => Expr::constant(-c),
            _ => Expr::from_node(Node::Neg(e)),
        }
    }

    pub(crate) fn raw_pow(base: Expr, exponent: Expr) -> Expr {
        Expr::from_node(Node::Pow(base, exponent))
    }

    pub(crate) fn raw_call(func: Func, arg: Expr) -> Expr {
        Expr::from_node(Node::Call(func, arg))
    }

    /// The normal form the parser produces for a tree: printing and parsing
    /// back yields exactly this.
    pub fn normalize(&self) -> Expr {
        parse(&self.to_string()).expect("printed expressions always parse")
    }
}

impl From<f64> for Expr {
    fn from(c: f64) -> Expr {
        Expr::constant(c)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        print::write_expr(self, f)
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $body:expr) => {
        impl ops::$tr<Expr> for Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(self, rhs)
            }
        }
        impl ops::$tr<&Expr> for Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                ops::$tr::$m(self, rhs.clone())
            }
        }
        impl ops::$tr<Expr> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                ops::$tr::$m(self.clone(), rhs)
            }
        }
        impl ops::$tr<&Expr> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                ops::$tr::$m(self.clone(), rhs.clone())
            }
        }
        impl ops::$tr<f64> for Expr {
            type Output = Expr;
            fn $m(self, rhs: f64) -> Expr {
                ops::$tr::$m(self, Expr::constant(rhs))
            }
        }
        impl ops::$tr<f64> for &Expr {
            type Output = Expr;
            fn $m(self, rhs: f64) -> Expr {
                ops::$tr::$m(self.clone(), Expr::constant(rhs))
            }
        }
    };
}

binop!(Add, add, |a, b| Expr::sum([a, b]));
binop!(Sub, sub, |a, b| Expr::sum([a, Expr::negate(b)]));
binop!(Mul, mul, |a, b| Expr::product([a, b]));
binop!(Div, div, |a, b| match b.as_const() {
    Some(c) if c != 0.0 => Expr::product([a, Expr::constant(1.0 / c)]),
    _ => Expr::product([a, Expr::pow(b, Expr::constant(-1.0))]),
});

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::negate(self)
    }
}

impl ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::negate(self.clone())
    }
}

impl std::iter::Sum for Expr {
    fn sum<I: Iterator<Item = Expr>>(iter: I) -> Expr {
        Expr::sum(iter)
    }
}

/// Shorthand: parses a literal expression, panicking on malformed input.
/// Intended for tests and examples with hard-coded expressions.
pub fn ex(text: &str) -> Expr {
    parse(text).unwrap_or_else(|e| panic!("bad expression {text:?}: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smart_constructors_fold() {
        let x = Expr::var("x1");
        assert_eq!(&x * 0.0, Expr::zero());
        assert_eq!(&x * 1.0, x);
        assert_eq!(&x + 0.0, x);
        assert_eq!((Expr::constant(2.0) * 3.0).as_const(), Some(6.0));
        assert_eq!(Expr::pow(x.clone(), Expr::one()), x);
        assert_eq!(-(-x.clone()), x);
        assert_eq!((-x.clone()) * (-x.clone()), &x * &x);
    }

    #[test]
    fn substitution_is_simultaneous() {
        let e = ex("sin(k1) + k2");
        let mut s = BTreeMap::new();
        s.insert("k1".to_string(), ex("x2"));
        s.insert("k2".to_string(), ex("x1"));
        let r = e.substitute(&s);
        let b = Binding::from_pairs(&[("x1", 1.0), ("x2", 0.0)]);
        assert_eq!(r.eval(&b).unwrap(), 1.0);
        let id = ex("x1").substitute(&BTreeMap::new());
        assert_eq!(id, ex("x1"));
    }

    #[test]
    fn substitution_into_square() {
        let mut s = BTreeMap::new();
        s.insert("k1".to_string(), ex("x1 + 1"));
        let r = ex("k1^2").substitute(&s);
        assert_eq!(r.to_string(), "(x1 + 1)^2");
    }

    #[test]
    fn free_vars_sorted() {
        let v: Vec<_> = ex("y2*x1 + sin(k1)").free_vars().into_iter().collect();
        assert_eq!(v, ["k1", "x1", "y2"]);
    }
}

/// Splits a term into a numeric coefficient and its non-constant factors.
fn split_term(e: &Expr) -> (f64, Vec<Expr>) {
    match e.node() {
        Node::Const(c) => (*c, Vec::new()),
        Node::Neg(a) => {
            let (c, f) = split_term(a);
            (-c, f)
        }
        Node::Product(fs) => {
            let mut c = 1.0;
            let mut out = Vec::new();
            for f in fs {
                let (k, mut g) = split_term(f);
                c *= k;
                out.append(&mut g);
            }
            (c, out)
        }
        _ => (1.0, vec![e.clone()]),
    }
}

fn factor_key(factors: &[Expr]) -> String {
    let mut keys: Vec<String> = factors.iter().map(|f| f.to_string()).collect();
    keys.sort();
    keys.join("\u{1}")
}

/// Sums simplified terms, merging terms that differ only by a constant.
fn collect_sum(terms: impl IntoIterator<Item = Expr>) -> Expr {
    let mut order: Vec<(String, f64, Vec<Expr>)> = Vec::new();
    let mut index: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
    let mut push = |e: &Expr, order: &mut Vec<(String, f64, Vec<Expr>)>| {
        let (c, f) = split_term(e);
        let key = factor_key(&f);
        match index.get(&key) {
            Some(&i) => order[i].1 += c,
            None => {
                index.insert(key.clone(), order.len());
                order.push((key, c, f));
            }
        }
    };
    for t in terms {
        match t.node() {
            Node::Sum(inner) => inner.iter().for_each(|x| push(x, &mut order)),
            _ => push(&t, &mut order),
        }
    }
    Expr::sum(
        order
            .into_iter()
            .filter(|(_, c, _)| *c != 0.0)
            .map(|(_, c, mut f)| {
                f.insert(0, Expr::constant(c));
                Expr::product(f)
            }),
    )
}

/// Multiplies simplified factors, merging constant powers of equal bases.
fn collect_product(factors: impl IntoIterator<Item = Expr>) -> Expr {
    let mut coef = 1.0;
    let mut flat = Vec::new();
    for f in factors {
        let (c, mut g) = split_term(&f);
        coef *= c;
        flat.append(&mut g);
    }
    if coef == 0.0 {
        return Expr::zero();
    }
    let mut order: Vec<(String, Expr, Option<f64>, Vec<Expr>)> = Vec::new();
    for f in flat {
        let (base, exp) = match f.node() {
            Node::Pow(b, e) if e.as_const().is_some() => (b.clone(), e.as_const()),
            _ => (f.clone(), Some(1.0)),
        };
        let key = base.to_string();
        match order
            .iter_mut()
            .find(|(k, _, ex, _)| *k == key && ex.is_some())
        {
            Some(slot) => {
                slot.2 = Some(slot.2.unwrap() + exp.unwrap());
                slot.3.push(f);
            }
            None => order.push((key, base, exp, vec![f])),
        }
    }
    let mut out = vec![Expr::constant(coef)];
    for (_, base, exp, originals) in order {
        match exp {
            Some(k) if originals.len() > 1 => {
                if k != 0.0 {
                    out.push(Expr::pow(base, Expr::constant(k)));
                }
            }
            _ => out.extend(originals),
        }
    }
    Expr::product(out)
}
