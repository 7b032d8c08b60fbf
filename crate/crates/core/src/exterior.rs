//! Differential forms on a vector bundle, wedge products, pull-backs along
//! bundle morphisms and the covariant Lie derivatives.

use std::fmt;

use thiserror::Error;

use crate::algebroid::{CoordSystem, GeneralizedLieAlgebroid, SectionF, SmoothMap};
use crate::check::{Check, Probe, Report};
use crate::expr::{Expr, Sampler};

/// Increasing index tuples of length `q` drawn from `0..r`, in lexicographic order.
pub fn combinations(r: usize, q: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, r: usize, q: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == q {
            out.push(cur.clone());
            return;
        }
        for i in start..r {
            cur.push(i);
            go(i + 1, r, q, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, r, q, &mut Vec::new(), &mut out);
    out
}

/// Sorts `idx` in place and returns the permutation sign, or `None` when an
/// index repeats.
fn sort_sign(idx: &mut [usize]) -> Option<f64> {
    let mut sign = 1.0;
    for i in 0..idx.len() {
        for j in 0..idx.len() - i - 1 {
            if idx[j] > idx[j + 1] {
                idx.swap(j, j + 1);
                sign = -sign;
            } else if idx[j] == idx[j + 1] {
                return None;
            }
        }
    }
    if idx.windows(2).any(|w| w[0] == w[1]) {
        return None;
    }
    Some(sign)
}

/// All permutations of `0..n` with their signs.
pub fn permutations(n: usize) -> Vec<(Vec<usize>, f64)> {
    fn go(cur: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == used.len() {
            out.push(cur.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                go(cur, used, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut perms = Vec::new();
    go(&mut Vec::new(), &mut vec![false; n], &mut perms);
    perms
        .into_iter()
        .map(|p| {
            let mut s = p.clone();
            let sign = sort_sign(&mut s).unwrap();
            (p, sign)
        })
        .collect()
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum FormError {
    #[error("forms live on bundles of different rank ({0} vs {1})")]
    RankMismatch(usize, usize),
    #[error("index {index} out of range for rank {rank}")]
    IndexOutOfRange { index: usize, rank: usize },
    #[error("form has degree {0} but {1} indices were given")]
    DegreeMismatch(usize, usize),
}

/// A q-form: one coefficient per increasing index tuple, antisymmetric by
/// construction.
#[derive(Clone, Debug, PartialEq)]
pub struct FormQ {
    pub degree: usize,
    pub rank: usize,
    coeffs: Vec<Expr>,
}

impl FormQ {
    pub fn zero(rank: usize, degree: usize) -> FormQ {
        let n = combinations(rank, degree).len();
        FormQ {
            degree,
            rank,
            coeffs: vec![Expr::zero(); n],
        }
    }

    /// A 0-form.
    pub fn function(rank: usize, f: Expr) -> FormQ {
        FormQ {
            degree: 0,
            rank,
            coeffs: vec![f],
        }
    }

    /// The dual basis covector `s^{a+1}`.
    pub fn covector(rank: usize, a: usize) -> FormQ {
        let mut w = FormQ::zero(rank, 1);
        w.coeffs[a] = Expr::one();
        w
    }

    /// A 1-form from its components.
    pub fn one_form(coeffs: Vec<Expr>) -> FormQ {
        FormQ {
            degree: 1,
            rank: coeffs.len(),
            coeffs,
        }
    }

    fn slot(&self, sorted: &[usize]) -> usize {
        combinations(self.rank, self.degree)
            .iter()
            .position(|c| c == sorted)
            .expect("sorted index tuple")
    }

    /// Component at an arbitrary index tuple (0-based), using antisymmetry.
    pub fn component(&self, idx: &[usize]) -> Expr {
        assert_eq!(idx.len(), self.degree);
        let mut s = idx.to_vec();
        match sort_sign(&mut s) {
            None => Expr::zero(),
            Some(sign) => {
                let c = &self.coeffs[self.slot(&s)];
                if sign < 0.0 {
                    -c
                } else {
                    c.clone()
                }
            }
        }
    }

    /// Sets the component at `idx` (and implicitly all its permutations).
    pub fn set(&mut self, idx: &[usize], value: Expr) -> Result<(), FormError> {
        if idx.len() != self.degree {
            return Err(FormError::DegreeMismatch(self.degree, idx.len()));
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= self.rank) {
            return Err(FormError::IndexOutOfRange {
                index: bad + 1,
                rank: self.rank,
            });
        }
        let mut s = idx.to_vec();
        match sort_sign(&mut s) {
            None if value.is_zero() => Ok(()),
            None => Err(FormError::DegreeMismatch(self.degree, idx.len())),
            Some(sign) => {
                let k = self.slot(&s);
                self.coeffs[k] = if sign < 0.0 { -value } else { value };
                Ok(())
            }
        }
    }

    /// Coefficients in the order of [`combinations`].
    pub fn coefficients(&self) -> &[Expr] {
        &self.coeffs
    }

    pub fn from_coefficients(rank: usize, degree: usize, coeffs: Vec<Expr>) -> FormQ {
        assert_eq!(coeffs.len(), combinations(rank, degree).len());
        FormQ {
            degree,
            rank,
            coeffs,
        }
    }

    pub fn map(&self, f: impl Fn(&Expr) -> Expr) -> FormQ {
        FormQ {
            degree: self.degree,
            rank: self.rank,
            coeffs: self.coeffs.iter().map(f).collect(),
        }
    }

    pub fn add(&self, other: &FormQ) -> FormQ {
        assert_eq!((self.rank, self.degree), (other.rank, other.degree));
        FormQ {
            degree: self.degree,
            rank: self.rank,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn scale(&self, f: &Expr) -> FormQ {
        self.map(|c| f * c)
    }

    /// `ω(u_1, ..., u_q)` for sections given by their coefficient vectors.
    pub fn evaluate(&self, sections: &[Vec<Expr>]) -> Expr {
        assert_eq!(sections.len(), self.degree);
        if self.degree == 0 {
            return self.coeffs[0].clone();
        }
        let perms = permutations(self.degree);
        let mut terms = Vec::new();
        for (slot, idx) in combinations(self.rank, self.degree).iter().enumerate() {
            let w = &self.coeffs[slot];
            if w.is_zero() {
                continue;
            }
            for (perm, sign) in &perms {
                let mut f = vec![w.clone(), Expr::constant(*sign)];
                for (k, &pk) in perm.iter().enumerate() {
                    f.push(sections[k][idx[pk]].clone());
                }
                terms.push(Expr::product(f));
            }
        }
        Expr::sum(terms)
    }
}

impl fmt::Display for FormQ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.degree == 0 {
            return write!(f, "{}", self.coeffs[0]);
        }
        let names: Vec<String> = combinations(self.rank, self.degree)
            .iter()
            .map(|c| {
                let parts: Vec<String> = c.iter().map(|i| format!("s^{}", i + 1)).collect();
                parts.join("∧")
            })
            .collect();
        crate::algebroid::write_combination(f, &self.coeffs, &names)
    }
}

/// Shuffle-sum exterior product.
pub fn wedge(w: &FormQ, t: &FormQ) -> Result<FormQ, FormError> {
    if w.rank != t.rank {
        return Err(FormError::RankMismatch(w.rank, t.rank));
    }
    let (q, s, r) = (w.degree, t.degree, w.rank);
    let mut out = FormQ::zero(r, q + s);
    for (slot, idx) in combinations(r, q + s).iter().enumerate() {
        let mut terms = Vec::new();
        for pick in combinations(q + s, q) {
            let rest: Vec<usize> = (0..q + s).filter(|i| !pick.contains(i)).collect();
            let mut order: Vec<usize> = pick.iter().chain(&rest).copied().collect();
            let sign = sort_sign(&mut order).unwrap();
            let j: Vec<usize> = pick.iter().map(|&i| idx[i]).collect();
            let k: Vec<usize> = rest.iter().map(|&i| idx[i]).collect();
            let (a, b) = (w.component(&j), t.component(&k));
            if a.is_zero() || b.is_zero() {
                continue;
            }
            terms.push(Expr::product([Expr::constant(sign), a, b]));
        }
        out.coeffs[slot] = Expr::sum(terms);
    }
    Ok(out)
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum MorphismError {
    #[error("fiber matrix must be {0}x{1}")]
    Shape(usize, usize),
    #[error("morphism is singular: {0}")]
    Singular(String),
    #[error("declared inverse does not invert the morphism: {0}")]
    BadInverse(String),
}

/// A vector bundle morphism `(phi, phi0)` between trivial bundles.
#[derive(Clone, Debug, PartialEq)]
pub struct BundleMorphism {
    /// Base map `phi0` from the source base to the target base.
    pub base: SmoothMap,
    pub source_rank: usize,
    pub target_rank: usize,
    /// `fiber[alpha][a] = phi_a^alpha`, functions on the source base.
    pub fiber: Vec<Vec<Expr>>,
}

impl BundleMorphism {
    pub fn new(base: SmoothMap, fiber: Vec<Vec<Expr>>) -> Result<BundleMorphism, MorphismError> {
        let target_rank = fiber.len();
        let source_rank = fiber.first().map_or(0, Vec::len);
        if fiber.iter().any(|row| row.len() != source_rank) || source_rank == 0 {
            return Err(MorphismError::Shape(target_rank, source_rank));
        }
        Ok(BundleMorphism {
            base,
            source_rank,
            target_rank,
            fiber,
        })
    }

    pub fn identity(chart: CoordSystem, rank: usize) -> BundleMorphism {
        let fiber = (0..rank)
            .map(|a| {
                (0..rank)
                    .map(|b| Expr::constant(if a == b { 1.0 } else { 0.0 }))
                    .collect()
            })
            .collect();
        BundleMorphism {
            base: SmoothMap::identity(chart.clone(), chart),
            source_rank: rank,
            target_rank: rank,
            fiber,
        }
    }

    /// `Γ(phi, phi0) u`: coefficients `(u^a phi_a^alpha) ∘ phi0⁻¹` on the target base.
    pub fn pushforward_section(&self, u: &[Expr]) -> Vec<Expr> {
        assert_eq!(u.len(), self.source_rank);
        (0..self.target_rank)
            .map(|al| {
                let s = Expr::sum(u.iter().zip(&self.fiber[al]).map(|(ua, g)| ua * g));
                self.base.push(&s)
            })
            .collect()
    }

    /// `(phi, phi0)^* ω`: evaluate ω on pushed sections; for functions `f ∘ phi0`.
    pub fn pullback_form(&self, w: &FormQ) -> FormQ {
        assert_eq!(w.rank, self.target_rank);
        let q = w.degree;
        if q == 0 {
            return FormQ::function(self.source_rank, self.base.pull(&w.coeffs[0]));
        }
        let on_source: Vec<Expr> = w.coeffs.iter().map(|c| self.base.pull(c)).collect();
        let perms = permutations(q);
        let target_tuples = combinations(self.target_rank, q);
        let coeffs = combinations(self.source_rank, q)
            .iter()
            .map(|src| {
                let mut terms = Vec::new();
                for (slot, tgt) in target_tuples.iter().enumerate() {
                    if on_source[slot].is_zero() {
                        continue;
                    }
                    // determinant of phi restricted to rows tgt, columns src
                    for (perm, sign) in &perms {
                        let mut f = vec![on_source[slot].clone(), Expr::constant(*sign)];
                        for (k, &pk) in perm.iter().enumerate() {
                            f.push(self.fiber[tgt[pk]][src[k]].clone());
                        }
                        terms.push(Expr::product(f));
                    }
                }
                Expr::sum(terms)
            })
            .collect();
        FormQ::from_coefficients(self.source_rank, q, coeffs)
    }
}

/// Symbolic determinant by cofactor expansion (intended for r <= 4).
pub fn determinant(m: &[Vec<Expr>]) -> Expr {
    let n = m.len();
    match n {
        0 => Expr::one(),
        1 => m[0][0].clone(),
        2 => &m[0][0] * &m[1][1] - &m[0][1] * &m[1][0],
        _ => Expr::sum((0..n).filter(|&j| !m[0][j].is_zero()).map(|j| {
            let minor = minor(m, 0, j);
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            Expr::product([Expr::constant(sign), m[0][j].clone(), determinant(&minor)])
        })),
    }
}

fn minor(m: &[Vec<Expr>], row: usize, col: usize) -> Vec<Vec<Expr>> {
    m.iter()
        .enumerate()
        .filter(|(i, _)| *i != row)
        .map(|(_, r)| {
            r.iter()
                .enumerate()
                .filter(|(j, _)| *j != col)
                .map(|(_, e)| e.clone())
                .collect()
        })
        .collect()
}

/// Symbolic inverse by adjugate over determinant. `None` when the
/// determinant simplifies to zero.
pub fn symbolic_inverse(m: &[Vec<Expr>]) -> Option<Vec<Vec<Expr>>> {
    let n = m.len();
    let det = determinant(m).simplify();
    if det.is_zero() {
        return None;
    }
    if n == 1 {
        return Some(vec![vec![Expr::one() / &det]]);
    }
    Some(
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        // inverse[i][j] = cofactor(j, i) / det
                        let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                        let c = determinant(&minor(m, j, i)) * sign;
                        if c.is_zero() {
                            Expr::zero()
                        } else {
                            c / &det
                        }
                    })
                    .collect()
            })
            .collect(),
    )
}

/// A bundle isomorphism together with its inverse morphism.
#[derive(Clone, Debug, PartialEq)]
pub struct InvertibleMorphism {
    pub forward: BundleMorphism,
    pub inverse: BundleMorphism,
    /// Declared inverse fiber matrix on the source base, `[a][alpha]`.
    pub inverse_fiber: Vec<Vec<Expr>>,
}

impl InvertibleMorphism {
    /// Pairs `forward` with a declared inverse matrix (`[a][alpha]`, on the
    /// source base) and checks `g̃ g = g g̃ = δ` at the sampled points.
    pub fn new(
        forward: BundleMorphism,
        inverse_fiber: Vec<Vec<Expr>>,
        sampler: &Sampler,
    ) -> Result<InvertibleMorphism, MorphismError> {
        let n = forward.target_rank;
        if forward.source_rank != n {
            return Err(MorphismError::Singular(format!(
                "fiber map {}x{} is not square",
                n, forward.source_rank
            )));
        }
        if inverse_fiber.len() != n || inverse_fiber.iter().any(|r| r.len() != n) {
            return Err(MorphismError::Shape(n, n));
        }
        let m = InvertibleMorphism::assemble(forward, inverse_fiber);
        let report = m.check_inverse(sampler, 1e-9);
        if let Some(bad) = report.failures().next() {
            return Err(if bad.worst_residual.is_finite() {
                MorphismError::BadInverse(bad.to_string())
            } else {
                MorphismError::Singular(bad.to_string())
            });
        }
        let det = determinant(&m.forward.fiber);
        let vars = m.forward.base.domain.vars.clone();
        for p in sampler.generate(&vars) {
            let d = det.compile(&vars).and_then(|c| c.eval(&p));
            if !matches!(d, Ok(v) if v.abs() > 1e-12) {
                return Err(MorphismError::Singular(format!("det = {d:?} at {p:?}")));
            }
        }
        Ok(m)
    }

    /// Pairs `forward` with its adjugate inverse.
    pub fn with_auto_inverse(
        forward: BundleMorphism,
        sampler: &Sampler,
    ) -> Result<InvertibleMorphism, MorphismError> {
        if forward.source_rank != forward.target_rank {
            return Err(MorphismError::Singular("fiber map is not square".into()));
        }
        let inv = symbolic_inverse(&forward.fiber)
            .ok_or_else(|| MorphismError::Singular("determinant vanishes identically".into()))?;
        InvertibleMorphism::new(forward, inv, sampler)
    }

    fn assemble(forward: BundleMorphism, inverse_fiber: Vec<Vec<Expr>>) -> InvertibleMorphism {
        let base = forward.base.inverted();
        let fiber = inverse_fiber
            .iter()
            .map(|row| row.iter().map(|e| forward.base.push(e)).collect())
            .collect();
        let inverse = BundleMorphism {
            base,
            source_rank: forward.target_rank,
            target_rank: forward.source_rank,
            fiber,
        };
        InvertibleMorphism {
            forward,
            inverse,
            inverse_fiber,
        }
    }

    /// `g̃ g = δ` and `g g̃ = δ` on the source base.
    pub fn check_inverse(&self, sampler: &Sampler, tol: f64) -> Report {
        let n = self.forward.source_rank;
        let vars = self.forward.base.domain.vars.clone();
        let probe = Probe::new(vars.clone(), sampler.generate(&vars), tol);
        let g = &self.forward.fiber;
        let gi = &self.inverse_fiber;
        let mut r = Report::new();
        let mut left = Vec::new();
        let mut right = Vec::new();
        for a in 0..n {
            for b in 0..n {
                let delta = Expr::constant(if a == b { 1.0 } else { 0.0 });
                left.push((
                    Expr::sum((0..n).map(|al| &gi[b][al] * &g[al][a])),
                    delta.clone(),
                ));
                right.push((Expr::sum((0..n).map(|c| &g[a][c] * &gi[c][b])), delta));
            }
        }
        r.push(probe.check_vec("inverse g̃·g", vec![], &left));
        r.push(probe.check_vec("inverse g·g̃", vec![], &right));
        r
    }
}

/// `L_z θ (z_1..z_q) = A(z)(θ(z_1..z_q)) - Σ_k θ(.., [z, z_k], ..)` on basis
/// sections of F.
pub fn lie_derivative_f(alg: &GeneralizedLieAlgebroid, z: &SectionF, theta: &FormQ) -> FormQ {
    let p = alg.rank();
    assert_eq!(theta.rank, p);
    let q = theta.degree;
    let brackets: Vec<SectionF> = (0..p)
        .map(|b| alg.bracket(z, &SectionF::basis(p, b)))
        .collect();
    let coeffs = combinations(p, q)
        .iter()
        .enumerate()
        .map(|(slot, idx)| {
            let mut terms = vec![alg.anchor_action(z, &theta.coefficients()[slot])];
            for k in 0..q {
                let w = &brackets[idx[k]];
                for (g, wg) in w.coeffs.iter().enumerate() {
                    if wg.is_zero() {
                        continue;
                    }
                    let mut j = idx.clone();
                    j[k] = g;
                    let c = theta.component(&j);
                    if !c.is_zero() {
                        terms.push(-(wg * c));
                    }
                }
            }
            Expr::sum(terms)
        })
        .collect();
    FormQ::from_coefficients(p, q, coeffs)
}

/// The (g,h)-conjugated Lie derivative `(g,h)^* L_{Γu} (g⁻¹,h⁻¹)^* ω` of a
/// form on E along a section `u` of E.
pub fn gh_lie_derivative(
    alg: &GeneralizedLieAlgebroid,
    gh: &InvertibleMorphism,
    u: &[Expr],
    w: &FormQ,
) -> FormQ {
    let pushed = SectionF::new(gh.forward.pushforward_section(u));
    let on_f = gh.inverse.pullback_form(w);
    let lie = lie_derivative_f(alg, &pushed, &on_f);
    gh.forward.pullback_form(&lie)
}

/// Derivation property `L_z(ω∧θ) = (L_z ω)∧θ + ω∧(L_z θ)`, reported per component.
pub fn check_wedge_derivation(
    alg: &GeneralizedLieAlgebroid,
    z: &SectionF,
    w: &FormQ,
    t: &FormQ,
    probe: &Probe,
) -> Check {
    let lhs = lie_derivative_f(alg, z, &wedge(w, t).unwrap());
    let rhs = wedge(&lie_derivative_f(alg, z, w), t)
        .unwrap()
        .add(&wedge(w, &lie_derivative_f(alg, z, t)).unwrap());
    probe.check_all(
        "wedge derivation",
        vec![],
        lhs.coefficients().iter().zip(rhs.coefficients()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebroid::Structure;
    use crate::expr::{equivalent, ex, random_polynomial};
    use rand::Rng;

    fn random_form<R: Rng>(vars: &[String], r: usize, q: usize, rng: &mut R) -> FormQ {
        let n = combinations(r, q).len();
        FormQ::from_coefficients(
            r,
            q,
            (0..n).map(|_| random_polynomial(vars, 2, rng)).collect(),
        )
    }

    /// Brute force over every permutation with the `1/(q! s!)` normalization.
    fn wedge_oracle(w: &FormQ, t: &FormQ, sections: &[Vec<Expr>]) -> Expr {
        let (q, s) = (w.degree, t.degree);
        let norm = (1..=q).product::<usize>() * (1..=s).product::<usize>();
        let mut terms = Vec::new();
        for (perm, sign) in permutations(q + s) {
            let a: Vec<Vec<Expr>> = perm[..q].iter().map(|&i| sections[i].clone()).collect();
            let b: Vec<Vec<Expr>> = perm[q..].iter().map(|&i| sections[i].clone()).collect();
            terms.push(Expr::product([
                Expr::constant(sign),
                w.evaluate(&a),
                t.evaluate(&b),
            ]));
        }
        Expr::sum(terms) / norm as f64
    }

    fn basis(r: usize, a: usize) -> Vec<Expr> {
        (0..r)
            .map(|i| Expr::constant(if i == a { 1.0 } else { 0.0 }))
            .collect()
    }

    #[test]
    fn wedge_of_covectors() {
        let w = wedge(&FormQ::covector(2, 0), &FormQ::covector(2, 1)).unwrap();
        assert_eq!(
            w.evaluate(&[basis(2, 0), basis(2, 1)]).as_const(),
            Some(1.0)
        );
        assert_eq!(
            w.evaluate(&[basis(2, 1), basis(2, 0)]).as_const(),
            Some(-1.0)
        );
        let oracle = wedge_oracle(
            &FormQ::covector(2, 0),
            &FormQ::covector(2, 1),
            &[basis(2, 0), basis(2, 1)],
        );
        assert_eq!(oracle.as_const(), Some(1.0));
    }

    #[test]
    fn wedge_matches_permutation_oracle() {
        let vars = vec!["x1".to_string(), "x2".to_string()];
        let s = Sampler::new(30, 2);
        let mut rng = s.rng(1);
        for (q, t) in [(1, 1), (1, 2), (2, 1), (0, 2)] {
            let w = random_form(&vars, 3, q, &mut rng);
            let th = random_form(&vars, 3, t, &mut rng);
            let wt = wedge(&w, &th).unwrap();
            let secs: Vec<Vec<Expr>> = (0..q + t)
                .map(|_| {
                    (0..3)
                        .map(|_| random_polynomial(&vars, 1, &mut rng))
                        .collect()
                })
                .collect();
            let a = wt.evaluate(&secs);
            let b = wedge_oracle(&w, &th, &secs);
            assert!(equivalent(&a, &b, &s, 1e-10).unwrap(), "degrees {q},{t}");
        }
    }

    #[test]
    fn graded_algebra_identities() {
        let vars = vec!["x1".to_string()];
        let s = Sampler::new(30, 3);
        let mut rng = s.rng(2);
        let r = 4;
        let w = random_form(&vars, r, 1, &mut rng);
        let w2 = random_form(&vars, r, 1, &mut rng);
        let t = random_form(&vars, r, 2, &mut rng);
        let e = random_form(&vars, r, 1, &mut rng);
        let f = random_polynomial(&vars, 2, &mut rng);
        let same = |a: &FormQ, b: &FormQ| {
            a.coefficients()
                .iter()
                .zip(b.coefficients())
                .all(|(x, y)| equivalent(x, y, &s, 1e-10).unwrap())
        };
        // ω∧ω = 0
        assert!(wedge(&w, &w)
            .unwrap()
            .coefficients()
            .iter()
            .all(|c| equivalent(c, &Expr::zero(), &s, 1e-12).unwrap()));
        // graded commutativity with sign (-1)^{1*2}
        assert!(same(&wedge(&w, &t).unwrap(), &wedge(&t, &w).unwrap()));
        assert!(same(
            &wedge(&w, &e).unwrap(),
            &wedge(&e, &w).unwrap().scale(&Expr::constant(-1.0))
        ));
        // associativity
        let l = wedge(&wedge(&w, &t).unwrap(), &e).unwrap();
        let rr = wedge(&w, &wedge(&t, &e).unwrap()).unwrap();
        assert!(same(&l, &rr));
        // bilinearity and function linearity
        assert!(same(
            &wedge(&w.add(&w2), &t).unwrap(),
            &wedge(&w, &t).unwrap().add(&wedge(&w2, &t).unwrap())
        ));
        assert!(same(
            &wedge(&w.scale(&f), &t).unwrap(),
            &wedge(&w, &t).unwrap().scale(&f)
        ));
        assert!(same(
            &wedge(&w, &t.scale(&f)).unwrap(),
            &wedge(&w, &t).unwrap().scale(&f)
        ));
    }

    #[test]
    fn wedge_output_is_alternating() {
        let vars = vec!["x1".to_string()];
        let s = Sampler::new(20, 4);
        let mut rng = s.rng(5);
        let wt = wedge(
            &random_form(&vars, 3, 1, &mut rng),
            &random_form(&vars, 3, 1, &mut rng),
        )
        .unwrap();
        let a: Vec<Vec<Expr>> = (0..2)
            .map(|_| {
                (0..3)
                    .map(|_| random_polynomial(&vars, 1, &mut rng))
                    .collect()
            })
            .collect();
        let swapped = vec![a[1].clone(), a[0].clone()];
        assert!(equivalent(&wt.evaluate(&a), &-wt.evaluate(&swapped), &s, 1e-12).unwrap());
    }

    fn shifted_morphism(fiber: &str) -> BundleMorphism {
        let xm = CoordSystem::numbered("M", "x", 1);
        let kn = CoordSystem::numbered("N", "k", 1);
        let h = SmoothMap::new(xm, kn, vec![ex("x1 + 1")], vec![ex("k1 - 1")]).unwrap();
        BundleMorphism::new(h, vec![vec![ex(fiber)]]).unwrap()
    }

    #[test]
    fn pushforward_examples() {
        let phi = shifted_morphism("1");
        let v = phi.pushforward_section(&[ex("x1")]);
        assert_eq!(v[0].to_string(), "k1 - 1");
        assert!(phi.pushforward_section(&[Expr::zero()])[0].is_zero());
        let id = BundleMorphism::identity(CoordSystem::numbered("M", "x", 2), 2);
        let u = vec![ex("x1*x2"), ex("sin(x1)")];
        assert_eq!(id.pushforward_section(&u), u);
    }

    #[test]
    fn pullback_examples() {
        let phi = shifted_morphism("2");
        let f = phi.pullback_form(&FormQ::function(1, ex("k1")));
        assert_eq!(f.coefficients()[0].to_string(), "x1 + 1");
        let w = phi.pullback_form(&FormQ::covector(1, 0));
        assert_eq!(w.coefficients()[0].as_const(), Some(2.0));
        let id = BundleMorphism::identity(CoordSystem::numbered("M", "x", 2), 2);
        let form = FormQ::one_form(vec![ex("x1"), ex("x2^2")]);
        assert_eq!(id.pullback_form(&form), form);
    }

    #[test]
    fn pullback_agrees_with_evaluation_on_pushed_sections() {
        let xm = CoordSystem::numbered("M", "x", 2);
        let kn = CoordSystem::numbered("N", "k", 2);
        let h = SmoothMap::new(
            xm,
            kn,
            vec![ex("x1 + x2"), ex("x2")],
            vec![ex("k1 - k2"), ex("k2")],
        )
        .unwrap();
        let phi = BundleMorphism::new(
            h.clone(),
            vec![vec![ex("1 + x1^2"), ex("x2")], vec![ex("x1"), ex("2")]],
        )
        .unwrap();
        let w = FormQ::from_coefficients(2, 2, vec![ex("k1*k2 + 1")]);
        let back = phi.pullback_form(&w);
        let u1 = vec![ex("x1"), ex("1")];
        let u2 = vec![ex("x2^2"), ex("x1 - 1")];
        let pushed1 = phi.pushforward_section(&u1);
        let pushed2 = phi.pushforward_section(&u2);
        // ω(Γu1, Γu2) is a function on N; compose with h to compare on M
        let rhs = h.pull(&w.evaluate(&[pushed1, pushed2]));
        let lhs = back.evaluate(&[u1, u2]);
        assert!(equivalent(&lhs, &rhs, &Sampler::new(40, 6), 1e-10).unwrap());
    }

    #[test]
    fn symbolic_inverse_and_singularity() {
        let m = vec![vec![ex("1 + x1^2"), ex("0")], vec![ex("x1"), ex("1")]];
        let inv = symbolic_inverse(&m).unwrap();
        let s = Sampler::default();
        assert!(equivalent(&inv[0][0], &ex("1/(1 + x1^2)"), &s, 1e-12).unwrap());
        assert!(equivalent(&inv[1][0], &ex("-x1/(1 + x1^2)"), &s, 1e-12).unwrap());
        assert!(symbolic_inverse(&[vec![ex("1"), ex("1")], vec![ex("1"), ex("1")]]).is_none());
        let chart = CoordSystem::numbered("M", "x", 1);
        let id = SmoothMap::identity(chart.clone(), CoordSystem::numbered("N", "k", 1));
        let fwd = BundleMorphism::new(
            id.clone(),
            vec![vec![ex("x1"), ex("x1^2")], vec![ex("1"), ex("x1")]],
        )
        .unwrap();
        assert!(matches!(
            InvertibleMorphism::with_auto_inverse(fwd, &s),
            Err(MorphismError::Singular(_))
        ));
        let fwd = BundleMorphism::new(id, vec![vec![ex("2")]]).unwrap();
        assert!(matches!(
            InvertibleMorphism::new(fwd, vec![vec![ex("1")]], &s),
            Err(MorphismError::BadInverse(_))
        ));
    }

    fn so3() -> GeneralizedLieAlgebroid {
        let xm = CoordSystem::numbered("M", "x", 1);
        let kn = CoordSystem::numbered("N", "k", 1);
        let h = SmoothMap::identity(xm, kn);
        let mut s = Structure::zero(3);
        s.set(0, 1, 2, ex("1")).unwrap();
        s.set(1, 2, 0, ex("1")).unwrap();
        s.set(2, 0, 1, ex("1")).unwrap();
        GeneralizedLieAlgebroid::new(h.clone(), h.inverted(), vec![vec![Expr::zero()]; 3], s)
            .unwrap()
    }

    #[test]
    fn lie_derivative_examples() {
        let a = so3();
        let theta = FormQ::covector(3, 0);
        let l = lie_derivative_f(&a, &SectionF::basis(3, 1), &theta);
        assert_eq!(l.evaluate(&[basis(3, 2)]).as_const(), Some(-1.0));

        let t = GeneralizedLieAlgebroid::tangent(2);
        let f = ex("k1^2*k2");
        let z = SectionF::new(vec![ex("k2"), ex("1")]);
        let l0 = lie_derivative_f(&t, &z, &FormQ::function(2, f.clone()));
        assert_eq!(l0.coefficients()[0], t.anchor_action(&z, &f));

        let c = lie_derivative_f(
            &t,
            &SectionF::new(vec![ex("2"), ex("-1")]),
            &FormQ::one_form(vec![ex("3"), ex("1")]),
        );
        assert!(c.coefficients().iter().all(Expr::is_zero));
    }

    #[test]
    fn lie_derivative_is_a_wedge_derivation() {
        let xm = CoordSystem::numbered("M", "x", 2);
        let kn = CoordSystem::numbered("N", "k", 2);
        let h = SmoothMap::identity(xm, kn);
        let mut st = Structure::zero(2);
        st.set(0, 1, 0, ex("k2")).unwrap();
        let a = GeneralizedLieAlgebroid::new(
            h.clone(),
            h.inverted(),
            vec![vec![ex("1"), ex("0")], vec![ex("k1*k2"), ex("1")]],
            st,
        )
        .unwrap();
        let s = Sampler::new(30, 8);
        let probe = Probe::new(a.k_vars().to_vec(), s.generate(a.k_vars()), 1e-9);
        let mut rng = s.rng(3);
        let z = a.random_section(&mut rng);
        let w = random_form(a.k_vars(), 2, 1, &mut rng);
        let t = random_form(a.k_vars(), 2, 1, &mut rng);
        assert!(check_wedge_derivation(&a, &z, &w, &t, &probe).pass);
    }

    #[test]
    fn gh_lie_derivative_trivial_case() {
        let t = GeneralizedLieAlgebroid::tangent(2);
        let gh = InvertibleMorphism::with_auto_inverse(
            BundleMorphism::new(
                t.h.clone(),
                vec![vec![ex("1"), ex("0")], vec![ex("0"), ex("1")]],
            )
            .unwrap(),
            &Sampler::default(),
        )
        .unwrap();
        let l = gh_lie_derivative(
            &t,
            &gh,
            &[ex("1"), ex("2")],
            &FormQ::one_form(vec![ex("3"), ex("-1")]),
        );
        assert!(l.coefficients().iter().all(Expr::is_zero));
    }
}
