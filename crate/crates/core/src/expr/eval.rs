use std::collections::BTreeMap;

use thiserror::Error;

use super::{Expr, Func, Node};

#[derive(Clone, Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("unbound variable {0:?}")]
    UnboundVariable(String),
    #[error("domain error: {0}")]
    Domain(String),
}

/// Values for named variables.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Binding {
    values: BTreeMap<String, f64>,
}

impl Binding {
    pub fn new() -> Binding {
        Binding::default()
    }

    pub fn from_pairs(pairs: &[(&str, f64)]) -> Binding {
        let mut b = Binding::new();
        for (k, v) in pairs {
            b.set(k, *v);
        }
        b
    }

    pub fn from_slices(names: &[String], values: &[f64]) -> Binding {
        let mut b = Binding::new();
        for (k, v) in names.iter().zip(values) {
            b.set(k, *v);
        }
        b
    }

    pub fn set(&mut self, name: &str, value: f64) {
        self.values.insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.values.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

fn pow(b: f64, e: f64) -> Result<f64, EvalError> {
    if b == 0.0 && e < 0.0 {
        return Err(EvalError::Domain(format!("0^{e}")));
    }
    if b < 0.0 && e.fract() != 0.0 {
        return Err(EvalError::Domain(format!("({b})^{e}")));
    }
    let v = if e.fract() == 0.0 && e.abs() <= 64.0 {
        b.powi(e as i32)
    } else {
        b.powf(e)
    };
    finite(v, || format!("({b})^{e}"))
}

fn finite(v: f64, what: impl FnOnce() -> String) -> Result<f64, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::Domain(format!("{} is not finite", what())))
    }
}

fn call(func: Func, x: f64) -> Result<f64, EvalError> {
    func.apply(x)
        .ok_or_else(|| EvalError::Domain(format!("{}({x})", func.name())))
}

impl Expr {
    /// Recursive evaluation under a binding.
    pub fn eval(&self, b: &Binding) -> Result<f64, EvalError> {
        match self.node() {
            Node::Const(c) => Ok(*c),
            Node::Var(v) => b
                .get(v)
                .ok_or_else(|| EvalError::UnboundVariable(v.to_string())),
            Node::Sum(ts) => {
                let mut s = 0.0;
                for t in ts {
                    s += t.eval(b)?;
                }
                finite(s, || "sum".into())
            }
            Node::Product(fs) => {
                let mut p = 1.0;
                for f in fs {
                    p *= f.eval(b)?;
                }
                finite(p, || "product".into())
            }
            Node::Pow(base, e) => pow(base.eval(b)?, e.eval(b)?),
            Node::Neg(a) => Ok(-a.eval(b)?),
            Node::Call(func, a) => call(*func, a.eval(b)?),
        }
    }

    /// Compiles against a fixed variable order for fast repeated evaluation.
    pub fn compile(&self, vars: &[String]) -> Result<Compiled, EvalError> {
        Ok(Compiled {
            root: lower(self, vars)?,
        })
    }
}

#[derive(Clone, Debug)]
enum CNode {
    Const(f64),
    Var(usize),
    Sum(Vec<CNode>),
    Product(Vec<CNode>),
    Powi(Box<CNode>, i32),
    Pow(Box<CNode>, Box<CNode>),
    Neg(Box<CNode>),
    Call(Func, Box<CNode>),
}

/// An expression lowered to positional variables.
#[derive(Clone, Debug)]
pub struct Compiled {
    root: CNode,
}

fn lower(e: &Expr, vars: &[String]) -> Result<CNode, EvalError> {
    Ok(match e.node() {
        Node::Const(c) => CNode::Const(*c),
        Node::Var(v) => CNode::Var(
            vars.iter()
                .position(|n| n.as_str() == &**v)
                .ok_or_else(|| EvalError::UnboundVariable(v.to_string()))?,
        ),
        Node::Sum(ts) => CNode::Sum(
            ts.iter()
                .map(|t| lower(t, vars))
                .collect::<Result<_, _>>()?,
        ),
        Node::Product(fs) => CNode::Product(
            fs.iter()
                .map(|t| lower(t, vars))
                .collect::<Result<_, _>>()?,
        ),
        Node::Pow(b, x) => match x.as_const() {
            Some(c) if c.fract() == 0.0 && c.abs() <= 64.0 => {
                CNode::Powi(Box::new(lower(b, vars)?), c as i32)
            }
            _ => CNode::Pow(Box::new(lower(b, vars)?), Box::new(lower(x, vars)?)),
        },
        Node::Neg(a) => CNode::Neg(Box::new(lower(a, vars)?)),
        Node::Call(f, a) => CNode::Call(*f, Box::new(lower(a, vars)?)),
    })
}

fn run(n: &CNode, x: &[f64]) -> Result<f64, EvalError> {
    match n {
        CNode::Const(c) => Ok(*c),
        CNode::Var(i) => Ok(x[*i]),
        CNode::Sum(ts) => {
            let mut s = 0.0;
            for t in ts {
                s += run(t, x)?;
            }
            finite(s, || "sum".into())
        }
        CNode::Product(fs) => {
            let mut p = 1.0;
            for f in fs {
                p *= run(f, x)?;
            }
            finite(p, || "product".into())
        }
        CNode::Powi(b, k) => {
            let v = run(b, x)?;
            if v == 0.0 && *k < 0 {
                return Err(EvalError::Domain(format!("0^{k}")));
            }
            finite(v.powi(*k), || format!("({v})^{k}"))
        }
        CNode::Pow(b, e) => pow(run(b, x)?, run(e, x)?),
        CNode::Neg(a) => Ok(-run(a, x)?),
        CNode::Call(f, a) => call(*f, run(a, x)?),
    }
}

impl Compiled {
    /// Evaluates at a point given in the variable order used to compile.
    pub fn eval(&self, point: &[f64]) -> Result<f64, EvalError> {
        run(&self.root, point)
    }
}
