//! Pass/fail records shared by every verification routine.

use std::fmt;

use crate::expr::{compare, Comparison, EquivalenceError, Expr};

/// Outcome of one identity tested over a point set.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    /// Name of the identity or equation family.
    pub family: String,
    /// 1-based index tuple identifying the component.
    pub index: Vec<usize>,
    pub pass: bool,
    /// Worst relative residual `|a-b| / (1 + max(|a|,|b|))`.
    pub worst_residual: f64,
    pub worst_absolute: f64,
    pub tolerance: f64,
    /// Point where the worst residual was observed.
    pub witness: Vec<(String, f64)>,
    pub note: Option<String>,
}

impl Check {
    pub fn from_comparison(family: &str, index: Vec<usize>, c: Comparison, tol: f64) -> Check {
        Check {
            family: family.to_string(),
            index,
            pass: c.worst_relative <= tol,
            worst_residual: c.worst_relative,
            worst_absolute: c.worst_absolute,
            tolerance: tol,
            witness: c.witness,
            note: None,
        }
    }

    /// A check that could not be evaluated; it counts as a failure.
    pub fn from_error(family: &str, index: Vec<usize>, err: &EquivalenceError, tol: f64) -> Check {
        Check {
            family: family.to_string(),
            index,
            pass: false,
            worst_residual: f64::INFINITY,
            worst_absolute: f64::INFINITY,
            tolerance: tol,
            witness: err.point.clone(),
            note: Some(err.source.to_string()),
        }
    }

    /// A boolean outcome with no residual attached.
    pub fn flag(family: &str, index: Vec<usize>, pass: bool, note: Option<String>) -> Check {
        Check {
            family: family.to_string(),
            index,
            pass,
            worst_residual: if pass { 0.0 } else { 1.0 },
            worst_absolute: if pass { 0.0 } else { 1.0 },
            tolerance: 0.0,
            witness: Vec::new(),
            note,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Check {
        self.note = Some(note.into());
        self
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.family
        )?;
        if !self.index.is_empty() {
            let idx: Vec<String> = self.index.iter().map(|i| i.to_string()).collect();
            write!(f, "[{}]", idx.join(","))?;
        }
        write!(f, " residual {:.3e}", self.worst_residual)?;
        if !self.pass && !self.witness.is_empty() {
            let w: Vec<String> = self
                .witness
                .iter()
                .map(|(k, v)| format!("{k}={v:.6}"))
                .collect();
            write!(f, " at {}", w.join(","))?;
        }
        if let Some(n) = &self.note {
            write!(f, " ({n})")?;
        }
        Ok(())
    }
}

/// An ordered collection of checks with an optional overall verdict.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub checks: Vec<Check>,
    pub verdict: Option<String>,
}

impl Report {
    pub fn new() -> Report {
        Report::default()
    }

    pub fn push(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn extend(&mut self, other: Report) {
        self.checks.extend(other.checks);
        if other.verdict.is_some() {
            self.verdict = other.verdict;
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn family(&self, name: &str) -> impl Iterator<Item = &Check> + '_ {
        let name = name.to_string();
        self.checks.iter().filter(move |c| c.family == name)
    }

    /// Largest residual among the checks of one family.
    pub fn worst(&self, name: &str) -> f64 {
        self.family(name)
            .map(|c| c.worst_residual)
            .fold(0.0, f64::max)
    }

    pub fn worst_overall(&self) -> f64 {
        self.checks
            .iter()
            .map(|c| c.worst_residual)
            .fold(0.0, f64::max)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        if let Some(v) = &self.verdict {
            writeln!(f, "verdict: {v}")?;
        }
        Ok(())
    }
}

/// A fixed point set in a fixed coordinate order, reused across many checks.
#[derive(Clone, Debug)]
pub struct Probe {
    pub vars: Vec<String>,
    pub points: Vec<Vec<f64>>,
    pub tol: f64,
}

impl Probe {
    pub fn new(vars: Vec<String>, points: Vec<Vec<f64>>, tol: f64) -> Probe {
        Probe { vars, points, tol }
    }

    pub fn compare(&self, a: &Expr, b: &Expr) -> Result<Comparison, EquivalenceError> {
        compare(a, b, &self.vars, &self.points)
    }

    /// Compares `a` against `b` and records the result.
    pub fn check(&self, family: &str, index: Vec<usize>, a: &Expr, b: &Expr) -> Check {
        match self.compare(a, b) {
            Ok(c) => Check::from_comparison(family, index, c, self.tol),
            Err(e) => Check::from_error(family, index, &e, self.tol),
        }
    }

    /// Folds several component comparisons into one check.
    pub fn check_all<'a, I>(&self, family: &str, index: Vec<usize>, pairs: I) -> Check
    where
        I: IntoIterator<Item = (&'a Expr, &'a Expr)>,
    {
        let mut acc = Comparison::exact();
        for (a, b) in pairs {
            match self.compare(a, b) {
                Ok(c) => acc.merge(c),
                Err(e) => return Check::from_error(family, index, &e, self.tol),
            }
        }
        Check::from_comparison(family, index, acc, self.tol)
    }

    /// Same as [`Probe::check_all`] over owned pairs.
    pub fn check_vec(&self, family: &str, index: Vec<usize>, pairs: &[(Expr, Expr)]) -> Check {
        self.check_all(family, index, pairs.iter().map(|(a, b)| (a, b)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::ex;

    #[test]
    fn probe_folds_components() {
        let p = Probe::new(vec!["x1".into()], vec![vec![1.0], vec![2.0]], 1e-9);
        let c = p.check_vec(
            "demo",
            vec![1],
            &[(ex("x1"), ex("x1")), (ex("x1^2"), ex("x1^2 + 0.5"))],
        );
        assert!(!c.pass);
        assert_eq!(c.worst_absolute, 0.5);
        assert_eq!(c.witness, vec![("x1".to_string(), 1.0)]);
        let ok = p.check("demo", vec![2], &ex("2*x1"), &ex("x1 + x1"));
        assert!(ok.pass);
    }

    #[test]
    fn evaluation_failures_count_as_failures() {
        let p = Probe::new(vec!["x1".into()], vec![vec![-1.0]], 1e-9);
        let c = p.check("log", vec![], &ex("log(x1)"), &ex("0"));
        assert!(!c.pass);
        assert!(c.note.unwrap().contains("domain"));
    }
}
