use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::{EvalError, Expr};

/// Deterministic point generator over a box, one interval per variable.
#[derive(Clone, Debug, PartialEq)]
pub struct Sampler {
    pub points: usize,
    pub seed: u64,
    pub default_domain: (f64, f64),
    pub domains: BTreeMap<String, (f64, f64)>,
    /// Variables whose sup-norm must stay at or above the given floor.
    pub floor: Option<(Vec<String>, f64)>,
}

impl Default for Sampler {
    fn default() -> Sampler {
        Sampler::new(100, 0)
    }
}

impl Sampler {
    pub fn new(points: usize, seed: u64) -> Sampler {
        Sampler {
            points,
            seed,
            default_domain: (-2.0, 2.0),
            domains: BTreeMap::new(),
            floor: None,
        }
    }

    pub fn with_default_domain(mut self, lo: f64, hi: f64) -> Sampler {
        self.default_domain = (lo, hi);
        self
    }

    pub fn with_domain(mut self, var: &str, lo: f64, hi: f64) -> Sampler {
        self.domains.insert(var.to_string(), (lo, hi));
        self
    }

    pub fn with_points(mut self, points: usize) -> Sampler {
        self.points = points;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Sampler {
        self.seed = seed;
        self
    }

    /// Keeps the given variables away from the origin: every sampled point has
    /// `max |v| >= floor` over them.
    pub fn with_floor(mut self, vars: &[String], floor: f64) -> Sampler {
        self.floor = Some((vars.to_vec(), floor));
        self
    }

    pub fn domain_of(&self, var: &str) -> (f64, f64) {
        self.domains
            .get(var)
            .copied()
            .unwrap_or(self.default_domain)
    }

    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(stream);
        r
    }

    /// The sample points for `vars`, in that coordinate order.
    pub fn generate(&self, vars: &[String]) -> Vec<Vec<f64>> {
        let mut rng = self.rng(0);
        let bounds: Vec<_> = vars.iter().map(|v| self.domain_of(v)).collect();
        let guarded: Vec<usize> = match &self.floor {
            Some((fv, _)) => vars
                .iter()
                .enumerate()
                .filter(|(_, v)| fv.contains(v))
                .map(|(i, _)| i)
                .collect(),
            None => Vec::new(),
        };
        let floor = self.floor.as_ref().map_or(0.0, |f| f.1);
        let mut out = Vec::with_capacity(self.points);
        while out.len() < self.points {
            let p: Vec<f64> = bounds
                .iter()
                .map(|&(lo, hi)| rng.gen_range(lo..=hi))
                .collect();
            if !guarded.is_empty() && guarded.iter().all(|&i| p[i].abs() < floor) {
                continue;
            }
            out.push(p);
        }
        out
    }
}

/// An evaluation failure at a specific sample point.
#[derive(Clone, Debug, Error, PartialEq)]
#[error("{source} at {}", fmt_point(.point))]
pub struct EquivalenceError {
    pub point: Vec<(String, f64)>,
    pub source: EvalError,
}

fn fmt_point(p: &[(String, f64)]) -> String {
    let parts: Vec<String> = p.iter().map(|(k, v)| format!("{k}={v}")).collect();
    parts.join(",")
}

/// Pointwise agreement of two expressions over a point set.
#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    /// max over points of |a-b| / (1 + max(|a|,|b|))
    pub worst_relative: f64,
    pub worst_absolute: f64,
    pub witness: Vec<(String, f64)>,
}

impl Comparison {
    pub fn exact() -> Comparison {
        Comparison {
            worst_relative: 0.0,
            worst_absolute: 0.0,
            witness: Vec::new(),
        }
    }

    /// Folds in one numeric observation `a` vs `b` at `point`.
    pub fn record(&mut self, vars: &[String], point: &[f64], a: f64, b: f64) {
        let abs = (a - b).abs();
        let rel = abs / (1.0 + a.abs().max(b.abs()));
        if self.witness.is_empty() || rel > self.worst_relative || rel.is_nan() {
            self.worst_relative = if rel.is_nan() { f64::INFINITY } else { rel };
            self.witness = label(vars, point);
        }
        self.worst_absolute =
            self.worst_absolute
                .max(if abs.is_nan() { f64::INFINITY } else { abs });
    }

    pub fn merge(&mut self, other: Comparison) {
        if self.witness.is_empty() || other.worst_relative > self.worst_relative {
            self.witness = other.witness;
            self.worst_relative = other.worst_relative;
        }
        self.worst_absolute = self.worst_absolute.max(other.worst_absolute);
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "residual {:.3e} at {}",
            self.worst_relative,
            fmt_point(&self.witness)
        )
    }
}

fn label(vars: &[String], p: &[f64]) -> Vec<(String, f64)> {
    vars.iter().cloned().zip(p.iter().copied()).collect()
}

/// Evaluates `a - b` on every point (coordinates ordered as `vars`).
pub fn compare(
    a: &Expr,
    b: &Expr,
    vars: &[String],
    points: &[Vec<f64>],
) -> Result<Comparison, EquivalenceError> {
    if a == b {
        return Ok(Comparison::exact());
    }
    let wrap = |e: EvalError, p: &[f64]| EquivalenceError {
        point: label(vars, p),
        source: e,
    };
    let fallback = points.first().map(Vec::as_slice).unwrap_or(&[]);
    let ca = a.compile(vars).map_err(|e| wrap(e, fallback))?;
    let cb = b.compile(vars).map_err(|e| wrap(e, fallback))?;
    let mut out = Comparison::exact();
    for p in points {
        let va = ca.eval(p).map_err(|e| wrap(e, p))?;
        let vb = cb.eval(p).map_err(|e| wrap(e, p))?;
        let abs = (va - vb).abs();
        let rel = abs / (1.0 + va.abs().max(vb.abs()));
        if out.witness.is_empty() || rel > out.worst_relative {
            out.worst_relative = rel;
            out.witness = label(vars, p);
        }
        out.worst_absolute = out.worst_absolute.max(abs);
    }
    Ok(out)
}

/// Random-point identity test: true iff `|e1 - e2| <= tol*(1 + max(|e1|,|e2|))`
/// at every sampled point over the union of the free variables.
pub fn equivalent(
    e1: &Expr,
    e2: &Expr,
    sampler: &Sampler,
    tol: f64,
) -> Result<bool, EquivalenceError> {
    if e1 == e2 || (e1 - e2).simplify().is_zero() {
        return Ok(true);
    }
    let mut vars = e1.free_vars();
    vars.extend(e2.free_vars());
    let vars: Vec<String> = vars.into_iter().collect();
    let points = sampler.generate(&vars);
    Ok(compare(e1, e2, &vars, &points)?.worst_relative <= tol)
}

/// A random polynomial of total degree at most `degree` (capped at 2) with
/// coefficients on a 0.01 grid in [-1, 1].
pub fn random_polynomial<R: Rng>(vars: &[String], degree: u32, rng: &mut R) -> Expr {
    let coef = |rng: &mut R| {
        let c: f64 = (rng.gen_range(-100i32..=100) as f64) / 100.0;
        if c == 0.0 {
            0.5
        } else {
            c
        }
    };
    let mut terms = vec![Expr::constant(coef(rng))];
    if degree >= 1 {
        for v in vars {
            if rng.gen_bool(0.75) {
                terms.push(Expr::var(v) * coef(rng));
            }
        }
    }
    if degree >= 2 && !vars.is_empty() {
        for _ in 0..2 {
            let i = rng.gen_range(0..vars.len());
            let j = rng.gen_range(0..vars.len());
            terms.push(Expr::product([
                Expr::constant(coef(rng)),
                Expr::var(&vars[i]),
                Expr::var(&vars[j]),
            ]));
        }
    }
    Expr::sum(terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::ex;

    #[test]
    fn identities() {
        let s = Sampler::default();
        assert!(equivalent(&ex("(x1+1)^2"), &ex("x1^2+2*x1+1"), &s, 1e-12).unwrap());
        assert!(!equivalent(&ex("x1"), &ex("x2"), &s, 1e-8).unwrap());
        let s3 = Sampler::new(100, 7).with_default_domain(-3.0, 3.0);
        assert!(equivalent(&ex("sin(2*x1)"), &ex("2*sin(x1)*cos(x1)"), &s3, 1e-12).unwrap());
    }

    #[test]
    fn errors_carry_the_point() {
        let s = Sampler::new(10, 1).with_domain("x1", -1.0, -0.5);
        let err = equivalent(&ex("log(x1)"), &ex("0"), &s, 1e-8).unwrap_err();
        assert_eq!(err.point[0].0, "x1");
        assert!(err.point[0].1 < 0.0);
    }

    #[test]
    fn sampler_is_deterministic_and_respects_box() {
        let vars = vec!["x1".to_string(), "y1".to_string()];
        let s = Sampler::new(50, 9).with_domain("y1", 1.0, 1.5);
        let a = s.generate(&vars);
        assert_eq!(a, s.generate(&vars));
        assert!(a
            .iter()
            .all(|p| (-2.0..=2.0).contains(&p[0]) && (1.0..=1.5).contains(&p[1])));
        assert_ne!(a, s.clone().with_seed(10).generate(&vars));
    }

    #[test]
    fn floor_excludes_neighbourhood_of_zero() {
        let vars = vec!["y1".to_string(), "y2".to_string()];
        let s = Sampler::new(200, 2)
            .with_default_domain(-0.2, 0.2)
            .with_floor(&vars, 0.1);
        assert!(s
            .generate(&vars)
            .iter()
            .all(|p| p[0].abs().max(p[1].abs()) >= 0.1));
    }

    #[test]
    fn witness_is_worst_point() {
        let vars = vec!["x1".to_string()];
        let pts = vec![vec![0.0], vec![3.0], vec![1.0]];
        let c = compare(&ex("x1^2"), &ex("0"), &vars, &pts).unwrap();
        assert_eq!(c.witness, vec![("x1".to_string(), 3.0)]);
        assert_eq!(c.worst_absolute, 9.0);
        assert!((c.worst_relative - 0.9).abs() < 1e-15);
    }
}
