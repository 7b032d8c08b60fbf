use std::cell::RefCell;
use std::collections::HashSet;

use super::{Binding, EvalError, Expr, Func, Node};

/// One call to [`Expr::diff`] captured by [`with_derivative_log`].
#[derive(Clone, Debug)]
pub struct DerivativeRecord {
    pub expr: Expr,
    pub var: String,
    pub derivative: Expr,
}

struct Log {
    seen: HashSet<(usize, String)>,
    records: Vec<DerivativeRecord>,
    cap: usize,
}

thread_local! {
    static LOG: RefCell<Option<Log>> = const { RefCell::new(None) };
}

/// Runs `f` while recording every distinct top-level derivative taken on this
/// thread (at most `cap` of them), so they can be replayed against an
/// independent oracle afterwards.
pub fn with_derivative_log<R>(cap: usize, f: impl FnOnce() -> R) -> (R, Vec<DerivativeRecord>) {
    let previous = LOG.with(|l| {
        l.borrow_mut().replace(Log {
            seen: HashSet::new(),
            records: Vec::new(),
            cap,
        })
    });
    let out = f();
    let log = LOG.with(|l| std::mem::replace(&mut *l.borrow_mut(), previous));
    (out, log.map(|l| l.records).unwrap_or_default())
}

impl Expr {
    /// Exact partial derivative with respect to `var`.
    pub fn diff(&self, var: &str) -> Expr {
        let d = derive(self, var);
        LOG.with(|l| {
            if let Some(log) = l.borrow_mut().as_mut() {
                if log.records.len() < log.cap
                    && log
                        .seen
                        .insert((std::sync::Arc::as_ptr(&self.0) as usize, var.to_string()))
                {
                    log.records.push(DerivativeRecord {
                        expr: self.clone(),
                        var: var.to_string(),
                        derivative: d.clone(),
                    });
                }
            }
        });
        d
    }
}

fn derive(e: &Expr, v: &str) -> Expr {
    if !e.depends_on(v) {
        return Expr::zero();
    }
    match e.node() {
        Node::Const(_) => Expr::zero(),
        Node::Var(_) => Expr::one(),
        Node::Sum(ts) => Expr::sum(ts.iter().map(|t| derive(t, v))),
        Node::Product(fs) => Expr::sum((0..fs.len()).filter(|&i| fs[i].depends_on(v)).map(|i| {
            Expr::product(
                fs.iter()
                    .enumerate()
                    .map(|(j, f)| if j == i { derive(f, v) } else { f.clone() }),
            )
        })),
        Node::Pow(b, x) => {
            if !x.depends_on(v) {
                let reduced = Expr::pow(b.clone(), x - 1.0);
                Expr::product([x.clone(), reduced, derive(b, v)])
            } else {
                // d(b^x) = b^x (x' ln b + x b'/b)
                let inner = Expr::sum([
                    derive(x, v) * b.ln(),
                    Expr::product([x.clone(), derive(b, v), b.powi(-1)]),
                ]);
                e * inner
            }
        }
        Node::Neg(a) => -derive(a, v),
        Node::Call(f, a) => {
            let da = derive(a, v);
            let outer = match f {
                Func::Sin => a.cos(),
                Func::Cos => -a.sin(),
                Func::Exp => a.exp(),
                Func::Log => a.powi(-1),
                Func::Sqrt => a.sqrt().powi(-1) * 0.5,
            };
            outer * da
        }
    }
}

/// Central finite difference of `e` in `var` at `at`.
pub fn finite_difference(e: &Expr, var: &str, at: &Binding, step: f64) -> Result<f64, EvalError> {
    let x0 = at
        .get(var)
        .ok_or_else(|| EvalError::UnboundVariable(var.to_string()))?;
    let mut b = at.clone();
    b.set(var, x0 + step);
    let fp = e.eval(&b)?;
    b.set(var, x0 - step);
    let fm = e.eval(&b)?;
    Ok((fp - fm) / (2.0 * step))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{equivalent, ex, Sampler};

    #[test]
    fn basic_rules() {
        assert_eq!(ex("x1^2").diff("x1").to_string(), "2*x1");
        assert_eq!(ex("x2").diff("x1"), Expr::zero());
        assert_eq!(ex("3").diff("x1"), Expr::zero());
    }

    #[test]
    fn product_rule_against_central_difference() {
        let e = ex("sin(x1)*x1");
        let b = Binding::from_pairs(&[("x1", 1.0)]);
        let exact = e.diff("x1").eval(&b).unwrap();
        let fd = finite_difference(&e, "x1", &b, 1e-6).unwrap();
        assert!((exact - 1.3818).abs() < 1e-4);
        assert!((exact - fd).abs() < 1e-8);
        assert!((exact - (1f64.cos() + 1f64.sin())).abs() < 1e-15);
    }

    #[test]
    fn function_rules_match_closed_forms() {
        let s = Sampler::new(40, 3).with_default_domain(0.2, 2.0);
        let cases = [
            ("log(x1)", "1/x1"),
            ("sqrt(x1)", "0.5/sqrt(x1)"),
            ("exp(2*x1)", "2*exp(2*x1)"),
            ("cos(x1^2)", "-2*x1*sin(x1^2)"),
            ("x1^x1", "x1^x1*(log(x1) + 1)"),
            ("1/(1 + x1^2)", "-2*x1/(1 + x1^2)^2"),
        ];
        for (f, d) in cases {
            assert!(
                equivalent(&ex(f).diff("x1"), &ex(d), &s, 1e-12).unwrap(),
                "{f}"
            );
        }
    }

    #[test]
    fn log_records_top_level_calls() {
        let e = ex("x1*y1");
        let (_, recs) = with_derivative_log(10, || {
            e.diff("x1");
            e.diff("x1");
            e.diff("y1");
        });
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[1].var, "y1");
        // logging is off again afterwards
        let (_, recs) = with_derivative_log(10, || ());
        assert!(recs.is_empty());
    }
}
