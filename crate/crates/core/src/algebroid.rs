//! Generalized Lie algebroids over a pair of chart isomorphisms.
//!
//! The bundle `F -> N` has rank `p` with basis sections `t_1..t_p`. The base
//! `M` carries coordinates `x1..xm`, `N` carries `k1..km`, and `h: M -> N`,
//! `eta: N -> M` are isomorphisms given together with their inverses. Anchor
//! components `rho[a][i]` and structure functions `L[a,b]^c` are expressions
//! in the `k` coordinates; every composition with `h` is a substitution.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::check::{Check, Probe, Report};
use crate::expr::{equivalent, random_polynomial, Expr, Sampler};

#[derive(Clone, Debug, Error, PartialEq)]
pub enum AlgebroidError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("structure function L[{0},{1}]^{2} is not antisymmetric in its lower indices")]
    InconsistentAntisymmetry(usize, usize, usize),
    #[error("L[{0},{0}]^{1} must vanish")]
    NonzeroDiagonal(usize, usize),
    #[error("{what} uses variable {var:?}, which is not a coordinate of {space}")]
    ForeignVariable {
        what: String,
        var: String,
        space: String,
    },
}

/// A chart: an ordered list of coordinate names.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoordSystem {
    pub name: String,
    pub vars: Vec<String>,
}

impl CoordSystem {
    /// Coordinates `{prefix}1 .. {prefix}dim`.
    pub fn numbered(name: &str, prefix: &str, dim: usize) -> CoordSystem {
        assert!(dim >= 1, "a chart needs at least one coordinate");
        CoordSystem {
            name: name.to_string(),
            vars: (1..=dim).map(|i| format!("{prefix}{i}")).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.vars.len()
    }

    pub fn var(&self, i: usize) -> Expr {
        Expr::var(&self.vars[i])
    }

    pub fn contains(&self, name: &str) -> bool {
        self.vars.iter().any(|v| v == name)
    }

    /// Errors if `e` mentions a variable outside this chart.
    pub fn admit(&self, what: &str, e: &Expr) -> Result<(), AlgebroidError> {
        self.admit_with(what, e, &[])
    }

    pub fn admit_with(&self, what: &str, e: &Expr, extra: &[String]) -> Result<(), AlgebroidError> {
        for v in e.free_vars() {
            if !self.contains(&v) && !extra.contains(&v) {
                return Err(AlgebroidError::ForeignVariable {
                    what: what.to_string(),
                    var: v,
                    space: self.name.clone(),
                });
            }
        }
        Ok(())
    }
}

/// A diffeomorphism between charts with an explicitly supplied inverse.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothMap {
    pub domain: CoordSystem,
    pub codomain: CoordSystem,
    /// Codomain coordinates as functions of the domain coordinates.
    pub forward: Vec<Expr>,
    /// Domain coordinates as functions of the codomain coordinates.
    pub inverse: Vec<Expr>,
}

impl SmoothMap {
    pub fn new(
        domain: CoordSystem,
        codomain: CoordSystem,
        forward: Vec<Expr>,
        inverse: Vec<Expr>,
    ) -> Result<SmoothMap, AlgebroidError> {
        if forward.len() != codomain.dim() || inverse.len() != domain.dim() {
            return Err(AlgebroidError::DimensionMismatch(format!(
                "map {} -> {} needs {} forward and {} inverse components",
                domain.name,
                codomain.name,
                codomain.dim(),
                domain.dim()
            )));
        }
        for f in &forward {
            domain.admit("forward map component", f)?;
        }
        for f in &inverse {
            codomain.admit("inverse map component", f)?;
        }
        Ok(SmoothMap {
            domain,
            codomain,
            forward,
            inverse,
        })
    }

    /// Coordinate-wise identification of two charts of equal dimension.
    pub fn identity(domain: CoordSystem, codomain: CoordSystem) -> SmoothMap {
        assert_eq!(domain.dim(), codomain.dim());
        let forward = (0..domain.dim()).map(|i| domain.var(i)).collect();
        let inverse = (0..codomain.dim()).map(|i| codomain.var(i)).collect();
        SmoothMap {
            domain,
            codomain,
            forward,
            inverse,
        }
    }

    /// `f ∘ map`: a function on the codomain pulled back to the domain.
    pub fn pull(&self, f: &Expr) -> Expr {
        substitute_chart(f, &self.codomain, &self.forward)
    }

    /// `f ∘ map⁻¹`: a function on the domain pushed to the codomain.
    pub fn push(&self, f: &Expr) -> Expr {
        substitute_chart(f, &self.domain, &self.inverse)
    }

    pub fn inverted(&self) -> SmoothMap {
        SmoothMap {
            domain: self.codomain.clone(),
            codomain: self.domain.clone(),
            forward: self.inverse.clone(),
            inverse: self.forward.clone(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.forward
            .iter()
            .enumerate()
            .all(|(i, f)| f.as_var() == Some(&self.domain.vars[i]))
            && self
                .inverse
                .iter()
                .enumerate()
                .all(|(i, f)| f.as_var() == Some(&self.codomain.vars[i]))
    }

    /// Checks `forward ∘ inverse = id` and `inverse ∘ forward = id`.
    pub fn check_inverse(&self, label: &str, sampler: &Sampler, tol: f64) -> Report {
        let mut r = Report::new();
        let on_dom = Probe::new(
            self.domain.vars.clone(),
            sampler.generate(&self.domain.vars),
            tol,
        );
        let on_cod = Probe::new(
            self.codomain.vars.clone(),
            sampler.generate(&self.codomain.vars),
            tol,
        );
        for i in 0..self.domain.dim() {
            let back = substitute_chart(&self.inverse[i], &self.codomain, &self.forward);
            r.push(on_dom.check(
                &format!("{label} inverse∘forward"),
                vec![i + 1],
                &back,
                &self.domain.var(i),
            ));
        }
        for j in 0..self.codomain.dim() {
            let back = substitute_chart(&self.forward[j], &self.domain, &self.inverse);
            r.push(on_cod.check(
                &format!("{label} forward∘inverse"),
                vec![j + 1],
                &back,
                &self.codomain.var(j),
            ));
        }
        r
    }
}

/// Replaces the coordinates of `chart` in `f` by `values`.
pub fn substitute_chart(f: &Expr, chart: &CoordSystem, values: &[Expr]) -> Expr {
    f.subst_with(&|v: &str| {
        chart
            .vars
            .iter()
            .position(|n| n == v)
            .map(|i| values[i].clone())
    })
}

/// A section of F: coefficients on `t_1..t_p`, functions on N.
#[derive(Clone, Debug, PartialEq)]
pub struct SectionF {
    pub coeffs: Vec<Expr>,
}

impl SectionF {
    pub fn new(coeffs: Vec<Expr>) -> SectionF {
        SectionF { coeffs }
    }

    pub fn zero(p: usize) -> SectionF {
        SectionF::new(vec![Expr::zero(); p])
    }

    /// The basis section `t_{alpha+1}`.
    pub fn basis(p: usize, alpha: usize) -> SectionF {
        let mut s = SectionF::zero(p);
        s.coeffs[alpha] = Expr::one();
        s
    }

    pub fn rank(&self) -> usize {
        self.coeffs.len()
    }

    pub fn add(&self, other: &SectionF) -> SectionF {
        SectionF::new(
            self.coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    pub fn scale(&self, f: &Expr) -> SectionF {
        SectionF::new(self.coeffs.iter().map(|a| f * a).collect())
    }

    pub fn neg(&self) -> SectionF {
        SectionF::new(self.coeffs.iter().map(|a| -a).collect())
    }
}

impl fmt::Display for SectionF {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = (1..=self.rank()).map(|i| format!("t_{i}")).collect();
        write_combination(f, &self.coeffs, &names)
    }
}

/// Writes `c1*b1 + c2*b2 + ...` with simplified coefficients, skipping zeros.
pub fn write_combination(
    f: &mut fmt::Formatter<'_>,
    coeffs: &[Expr],
    basis: &[String],
) -> fmt::Result {
    let mut first = true;
    for (c, b) in coeffs.iter().zip(basis) {
        let c = &c.simplify();
        if c.is_zero() {
            continue;
        }
        let (negative, body) = match c.node() {
            crate::expr::Node::Neg(a) => (true, a.clone()),
            crate::expr::Node::Const(v) if *v < 0.0 => (true, Expr::constant(-v)),
            _ => (false, c.clone()),
        };
        match (first, negative) {
            (true, true) => f.write_str("-")?,
            (false, true) => f.write_str(" - ")?,
            (false, false) => f.write_str(" + ")?,
            (true, false) => {}
        }
        first = false;
        if body.is_one() {
            f.write_str(b)?;
        } else if matches!(body.node(), crate::expr::Node::Sum(_)) {
            write!(f, "({body})*{b}")?;
        } else {
            write!(f, "{body}*{b}")?;
        }
    }
    if first {
        f.write_str("0")?;
    }
    Ok(())
}

/// Structure functions, stored for `a < b` only.
#[derive(Clone, Debug, PartialEq)]
pub struct Structure {
    p: usize,
    /// `upper[pair(a,b)][c] = L[a,b]^c` for `a < b`.
    upper: Vec<Vec<Expr>>,
    set: Vec<Vec<bool>>,
}

fn pair_index(p: usize, a: usize, b: usize) -> usize {
    debug_assert!(a < b && b < p);
    a * p - a * (a + 1) / 2 + (b - a - 1)
}

impl Structure {
    pub fn zero(p: usize) -> Structure {
        let n = p * (p.saturating_sub(1)) / 2;
        Structure {
            p,
            upper: vec![vec![Expr::zero(); p]; n],
            set: vec![vec![false; p]; n],
        }
    }

    pub fn rank(&self) -> usize {
        self.p
    }

    /// Sets `L[a,b]^c` (0-based). Setting both orders is allowed only when
    /// the two values are negatives of each other.
    pub fn set(&mut self, a: usize, b: usize, c: usize, value: Expr) -> Result<(), AlgebroidError> {
        if a >= self.p || b >= self.p || c >= self.p {
            return Err(AlgebroidError::DimensionMismatch(format!(
                "L[{},{}]^{} exceeds rank {}",
                a + 1,
                b + 1,
                c + 1,
                self.p
            )));
        }
        if a == b {
            if value.is_zero() {
                return Ok(());
            }
            return Err(AlgebroidError::NonzeroDiagonal(a + 1, c + 1));
        }
        let (lo, hi, v) = if a < b { (a, b, value) } else { (b, a, -value) };
        let k = pair_index(self.p, lo, hi);
        if self.set[k][c] {
            let existing = &self.upper[k][c];
            let same = equivalent(existing, &v, &Sampler::default(), 1e-12).unwrap_or(false);
            if !same {
                return Err(AlgebroidError::InconsistentAntisymmetry(
                    a + 1,
                    b + 1,
                    c + 1,
                ));
            }
            return Ok(());
        }
        self.upper[k][c] = v;
        self.set[k][c] = true;
        Ok(())
    }

    /// Builds from a full `p×p×p` array, rejecting non-antisymmetric input.
    pub fn from_dense(l: &[Vec<Vec<Expr>>]) -> Result<Structure, AlgebroidError> {
        let p = l.len();
        let mut s = Structure::zero(p);
        for a in 0..p {
            for b in 0..p {
                for c in 0..p {
                    s.set(a, b, c, l[a][b][c].clone())?;
                }
            }
        }
        Ok(s)
    }

    /// `L[a,b]^c` (0-based), generated by antisymmetry.
    pub fn get(&self, a: usize, b: usize, c: usize) -> Expr {
        use std::cmp::Ordering::*;
        match a.cmp(&b) {
            Equal => Expr::zero(),
            Less => self.upper[pair_index(self.p, a, b)][c].clone(),
            Greater => -self.upper[pair_index(self.p, b, a)][c].clone(),
        }
    }

    /// Entries with `a < b` that are not identically zero.
    pub fn nonzero_upper(&self) -> Vec<(usize, usize, usize, Expr)> {
        let mut out = Vec::new();
        for a in 0..self.p {
            for b in a + 1..self.p {
                for c in 0..self.p {
                    let e = &self.upper[pair_index(self.p, a, b)][c];
                    if !e.is_zero() {
                        out.push((a, b, c, e.clone()));
                    }
                }
            }
        }
        out
    }
}

/// A generalized Lie algebroid `((F, nu, N), [,]_{F,h}, (rho, eta))`.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneralizedLieAlgebroid {
    pub base_m: CoordSystem,
    pub base_n: CoordSystem,
    pub h: SmoothMap,
    pub eta: SmoothMap,
    /// `anchor[a][i] = rho_a^i`, functions on N.
    pub anchor: Vec<Vec<Expr>>,
    pub structure: Structure,
    anchor_on_m: Vec<Vec<Expr>>,
}

impl GeneralizedLieAlgebroid {
    pub fn new(
        h: SmoothMap,
        eta: SmoothMap,
        anchor: Vec<Vec<Expr>>,
        structure: Structure,
    ) -> Result<GeneralizedLieAlgebroid, AlgebroidError> {
        let base_m = h.domain.clone();
        let base_n = h.codomain.clone();
        if base_m.dim() != base_n.dim() {
            return Err(AlgebroidError::DimensionMismatch(format!(
                "dim M = {} but dim N = {}",
                base_m.dim(),
                base_n.dim()
            )));
        }
        if eta.domain != base_n || eta.codomain != base_m {
            return Err(AlgebroidError::DimensionMismatch(
                "eta must map N to M".into(),
            ));
        }
        let p = structure.rank();
        if p == 0 || anchor.len() != p || anchor.iter().any(|row| row.len() != base_m.dim()) {
            return Err(AlgebroidError::DimensionMismatch(format!(
                "anchor must be {p}x{} for rank {p}",
                base_m.dim()
            )));
        }
        for (a, row) in anchor.iter().enumerate() {
            for (i, e) in row.iter().enumerate() {
                base_n.admit(&format!("rho[{}][{}]", a + 1, i + 1), e)?;
            }
        }
        for (a, b, c, e) in structure.nonzero_upper() {
            base_n.admit(&format!("L[{},{}]^{}", a + 1, b + 1, c + 1), &e)?;
        }
        let anchor_on_m = anchor
            .iter()
            .map(|row| row.iter().map(|e| h.pull(e)).collect())
            .collect();
        Ok(GeneralizedLieAlgebroid {
            base_m,
            base_n,
            h,
            eta,
            anchor,
            structure,
            anchor_on_m,
        })
    }

    /// The tangent algebroid of an m-dimensional chart: `rho = Id`, `L = 0`,
    /// `h = eta = Id`.
    pub fn tangent(m: usize) -> GeneralizedLieAlgebroid {
        let xm = CoordSystem::numbered("M", "x", m);
        let kn = CoordSystem::numbered("N", "k", m);
        let h = SmoothMap::identity(xm.clone(), kn.clone());
        let eta = SmoothMap::identity(kn, xm);
        let anchor = (0..m)
            .map(|a| {
                (0..m)
                    .map(|i| Expr::constant(if a == i { 1.0 } else { 0.0 }))
                    .collect()
            })
            .collect();
        GeneralizedLieAlgebroid::new(h, eta, anchor, Structure::zero(m)).expect("tangent algebroid")
    }

    pub fn rank(&self) -> usize {
        self.structure.rank()
    }

    pub fn dim(&self) -> usize {
        self.base_m.dim()
    }

    pub fn x_vars(&self) -> &[String] {
        &self.base_m.vars
    }

    pub fn k_vars(&self) -> &[String] {
        &self.base_n.vars
    }

    /// `L[a,b]^c` on N (0-based).
    pub fn l(&self, a: usize, b: usize, c: usize) -> Expr {
        self.structure.get(a, b, c)
    }

    /// `L[a,b]^c ∘ h` on M (0-based).
    pub fn l_on_m(&self, a: usize, b: usize, c: usize) -> Expr {
        self.h.pull(&self.structure.get(a, b, c))
    }

    /// `rho_a^i ∘ h` on M (0-based).
    pub fn rho_on_m(&self, a: usize, i: usize) -> &Expr {
        &self.anchor_on_m[a][i]
    }

    /// Derivative of `f ∘ h` in each M coordinate, pushed back to N.
    fn grad_through_h(&self, f: &Expr) -> Vec<Expr> {
        let fh = self.h.pull(f);
        self.base_m
            .vars
            .iter()
            .map(|x| self.h.push(&fh.diff(x)))
            .collect()
    }

    /// Anchor action `z^a rho_a^i (d(f∘h)/dx^i) ∘ h⁻¹`, a function on N.
    pub fn anchor_action(&self, z: &SectionF, f: &Expr) -> Expr {
        if !self.base_n.vars.iter().any(|k| f.depends_on(k)) {
            return Expr::zero();
        }
        let grad = self.grad_through_h(f);
        let mut terms = Vec::new();
        for (a, za) in z.coeffs.iter().enumerate() {
            if za.is_zero() {
                continue;
            }
            for (i, g) in grad.iter().enumerate() {
                let r = &self.anchor[a][i];
                if r.is_zero() || g.is_zero() {
                    continue;
                }
                terms.push(Expr::product([za.clone(), r.clone(), g.clone()]));
            }
        }
        Expr::sum(terms)
    }

    /// `[u,v]^c = A(u)(v^c) - A(v)(u^c) + u^a v^b L[a,b]^c`.
    pub fn bracket(&self, u: &SectionF, v: &SectionF) -> SectionF {
        let p = self.rank();
        let coeffs = (0..p)
            .map(|c| {
                let mut terms = vec![
                    self.anchor_action(u, &v.coeffs[c]),
                    -self.anchor_action(v, &u.coeffs[c]),
                ];
                for a in 0..p {
                    for b in 0..p {
                        if a == b || u.coeffs[a].is_zero() || v.coeffs[b].is_zero() {
                            continue;
                        }
                        let l = self.l(a, b, c);
                        if !l.is_zero() {
                            terms.push(Expr::product([
                                u.coeffs[a].clone(),
                                v.coeffs[b].clone(),
                                l,
                            ]));
                        }
                    }
                }
                Expr::sum(terms)
            })
            .collect();
        SectionF::new(coeffs)
    }

    /// A random section with polynomial coefficients on N.
    pub fn random_section<R: rand::Rng>(&self, rng: &mut R) -> SectionF {
        SectionF::new(
            (0..self.rank())
                .map(|_| random_polynomial(self.k_vars(), 2, rng))
                .collect(),
        )
    }

    fn probe_n(&self, sampler: &Sampler, tol: f64) -> Probe {
        Probe::new(self.k_vars().to_vec(), sampler.generate(self.k_vars()), tol)
    }

    /// Antisymmetry of the stored structure functions, checked symbolically.
    pub fn check_antisymmetry(&self) -> Report {
        let p = self.rank();
        let mut r = Report::new();
        let mut ok = true;
        for a in 0..p {
            for b in 0..p {
                for c in 0..p {
                    if !(self.l(a, b, c) + self.l(b, a, c)).simplify().is_zero() {
                        ok = false;
                    }
                }
            }
        }
        r.push(Check::flag("antisymmetry", vec![], ok, None));
        r
    }

    /// Compatibility of anchor and structure functions on M:
    /// `(L[a,b]^c∘h)(rho_c^k∘h) = (rho_a^i∘h) d_i(rho_b^k∘h) - (rho_b^j∘h) d_j(rho_a^k∘h)`,
    /// one check per `(a, b, k)` with `a < b`.
    pub fn check_compatibility(&self, sampler: &Sampler, tol: f64) -> Report {
        let (p, m) = (self.rank(), self.dim());
        let probe = Probe::new(self.x_vars().to_vec(), sampler.generate(self.x_vars()), tol);
        let mut r = Report::new();
        for a in 0..p {
            for b in a + 1..p {
                for k in 0..m {
                    let lhs = Expr::sum((0..p).map(|c| self.l_on_m(a, b, c) * self.rho_on_m(c, k)));
                    let rhs = Expr::sum((0..m).map(|i| {
                        self.rho_on_m(a, i) * self.rho_on_m(b, k).diff(&self.x_vars()[i])
                            - self.rho_on_m(b, i) * self.rho_on_m(a, k).diff(&self.x_vars()[i])
                    }));
                    r.push(probe.check("compatibility", vec![a + 1, b + 1, k + 1], &lhs, &rhs));
                }
            }
        }
        r
    }

    fn jacobiator(&self, u: &SectionF, v: &SectionF, w: &SectionF) -> SectionF {
        let a = self.bracket(u, &self.bracket(v, w));
        let b = self.bracket(v, &self.bracket(w, u));
        let c = self.bracket(w, &self.bracket(u, v));
        a.add(&b).add(&c)
    }

    /// Cyclic sum over all basis triples and `random` random triples.
    pub fn check_jacobi(&self, sampler: &Sampler, tol: f64, random: usize) -> Report {
        let p = self.rank();
        let probe = self.probe_n(sampler, tol);
        let mut triples = Vec::new();
        for a in 0..p {
            for b in a + 1..p {
                for c in b + 1..p {
                    triples.push((
                        SectionF::basis(p, a),
                        SectionF::basis(p, b),
                        SectionF::basis(p, c),
                    ));
                }
            }
        }
        let mut rng = sampler.rng(11);
        for _ in 0..random {
            triples.push((
                self.random_section(&mut rng),
                self.random_section(&mut rng),
                self.random_section(&mut rng),
            ));
        }
        let mut r = Report::new();
        let zero = Expr::zero();
        for (t, (u, v, w)) in triples.iter().enumerate() {
            let j = self.jacobiator(u, v, w);
            r.push(probe.check_all("jacobi", vec![t + 1], j.coeffs.iter().map(|c| (c, &zero))));
        }
        r
    }

    /// `[u, f v] = f [u,v] + A(u)(f) v` on random data.
    pub fn check_leibniz(&self, sampler: &Sampler, tol: f64, trials: usize) -> Report {
        let probe = self.probe_n(sampler, tol);
        let mut rng = sampler.rng(12);
        let mut r = Report::new();
        for t in 0..trials {
            let u = self.random_section(&mut rng);
            let v = self.random_section(&mut rng);
            let f = random_polynomial(self.k_vars(), 2, &mut rng);
            let lhs = self.bracket(&u, &v.scale(&f));
            let rhs = self
                .bracket(&u, &v)
                .scale(&f)
                .add(&v.scale(&self.anchor_action(&u, &f)));
            r.push(probe.check_all("leibniz", vec![t + 1], lhs.coeffs.iter().zip(&rhs.coeffs)));
        }
        r
    }

    /// The anchor action intertwines brackets:
    /// `A([u,v]) f = A(u) A(v) f - A(v) A(u) f`.
    pub fn check_anchor_morphism(&self, sampler: &Sampler, tol: f64, trials: usize) -> Report {
        let probe = self.probe_n(sampler, tol);
        let mut rng = sampler.rng(13);
        let mut r = Report::new();
        for t in 0..trials {
            let u = self.random_section(&mut rng);
            let v = self.random_section(&mut rng);
            let f = random_polynomial(self.k_vars(), 2, &mut rng);
            let lhs = self.anchor_action(&self.bracket(&u, &v), &f);
            let rhs = self.anchor_action(&u, &self.anchor_action(&v, &f))
                - self.anchor_action(&v, &self.anchor_action(&u, &f));
            r.push(probe.check("anchor morphism", vec![t + 1], &lhs, &rhs));
        }
        r
    }

    /// Inverse pairs, antisymmetry, compatibility, Jacobi and Leibniz.
    pub fn validate(&self, sampler: &Sampler, tol: f64) -> Report {
        let mut r = Report::new();
        r.extend(self.h.check_inverse("h", sampler, tol));
        r.extend(self.eta.check_inverse("eta", sampler, tol));
        r.extend(self.check_antisymmetry());
        r.extend(self.check_compatibility(sampler, tol));
        r.extend(self.check_jacobi(sampler, tol, 3));
        r.extend(self.check_leibniz(sampler, tol, 3));
        r
    }

    /// Substitution map sending each N coordinate to its expression on M.
    pub fn h_substitution(&self) -> BTreeMap<String, Expr> {
        self.base_n
            .vars
            .iter()
            .cloned()
            .zip(self.h.forward.iter().cloned())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{ex, Binding};

    fn chart_pair(m: usize) -> (CoordSystem, CoordSystem) {
        (
            CoordSystem::numbered("M", "x", m),
            CoordSystem::numbered("N", "k", m),
        )
    }

    fn build(
        m: usize,
        h_fwd: &[&str],
        h_inv: &[&str],
        anchor: &[&[&str]],
        l: &[(usize, usize, usize, &str)],
    ) -> GeneralizedLieAlgebroid {
        let (xm, kn) = chart_pair(m);
        let h = SmoothMap::new(
            xm.clone(),
            kn.clone(),
            h_fwd.iter().map(|s| ex(s)).collect(),
            h_inv.iter().map(|s| ex(s)).collect(),
        )
        .unwrap();
        let eta = h.inverted();
        let anchor: Vec<Vec<Expr>> = anchor
            .iter()
            .map(|r| r.iter().map(|s| ex(s)).collect())
            .collect();
        let mut s = Structure::zero(anchor.len());
        for &(a, b, c, e) in l {
            s.set(a, b, c, ex(e)).unwrap();
        }
        GeneralizedLieAlgebroid::new(h, eta, anchor, s).unwrap()
    }

    fn so3() -> GeneralizedLieAlgebroid {
        build(
            1,
            &["x1"],
            &["k1"],
            &[&["0"], &["0"], &["0"]],
            &[(0, 1, 2, "1"), (1, 2, 0, "1"), (2, 0, 1, "1")],
        )
    }

    #[test]
    fn anchor_action_examples() {
        let a = GeneralizedLieAlgebroid::tangent(2);
        let z = SectionF::basis(2, 0);
        assert_eq!(a.anchor_action(&z, &ex("k1^2")).to_string(), "2*k1");

        let zero_anchor = so3();
        let u = SectionF::new(vec![ex("k1"), ex("2"), ex("k1^2")]);
        assert!(zero_anchor.anchor_action(&u, &ex("sin(k1)")).is_zero());

        let lin = build(1, &["x1"], &["k1"], &[&["k1"]], &[]);
        let r = lin.anchor_action(&SectionF::basis(1, 0), &ex("k1"));
        assert!(equivalent(&r, &ex("k1"), &Sampler::new(10, 0), 1e-14).unwrap());
    }

    #[test]
    fn anchor_action_through_shifted_chart() {
        // h(x) = x + 1, rho_1 = k1^2: A(t_1)(k1^3) = k1^2 * 3 (x+1)^2 ∘ h⁻¹ = 3 k1^4
        let a = build(1, &["x1 + 1"], &["k1 - 1"], &[&["k1^2"]], &[]);
        let r = a.anchor_action(&SectionF::basis(1, 0), &ex("k1^3"));
        assert!(equivalent(&r, &ex("3*k1^4"), &Sampler::default(), 1e-12).unwrap());
    }

    #[test]
    fn bracket_examples() {
        let a = so3();
        let b = a.bracket(&SectionF::basis(3, 0), &SectionF::basis(3, 1));
        assert_eq!(b, SectionF::basis(3, 2));

        // brute-force cross product table
        for i in 0..3 {
            for j in 0..3 {
                let b = a.bracket(&SectionF::basis(3, i), &SectionF::basis(3, j));
                let mut e = [0.0; 3];
                let (ei, ej) = (unit(i), unit(j));
                let cross = [
                    ei[1] * ej[2] - ei[2] * ej[1],
                    ei[2] * ej[0] - ei[0] * ej[2],
                    ei[0] * ej[1] - ei[1] * ej[0],
                ];
                for c in 0..3 {
                    e[c] = b.coeffs[c].as_const().unwrap();
                }
                assert_eq!(e, cross);
            }
        }

        let t = GeneralizedLieAlgebroid::tangent(1);
        let u = SectionF::new(vec![ex("k1")]);
        let v = SectionF::new(vec![ex("k1^2")]);
        let w = t.bracket(&u, &v);
        assert!(equivalent(&w.coeffs[0], &ex("k1^2"), &Sampler::default(), 1e-14).unwrap());
    }

    fn unit(i: usize) -> [f64; 3] {
        let mut e = [0.0; 3];
        e[i] = 1.0;
        e
    }

    #[test]
    fn compatibility_examples() {
        let s = Sampler::default();
        let t = GeneralizedLieAlgebroid::tangent(2);
        let r = t.check_compatibility(&s, 1e-8);
        assert!(r.passed());
        assert_eq!(r.worst_overall(), 0.0);

        let good = build(
            2,
            &["x1", "x2"],
            &["k1", "k2"],
            &[&["1", "0"], &["k1", "0"]],
            &[(0, 1, 0, "1")],
        );
        assert!(good.check_compatibility(&s, 1e-8).passed());

        let bad = build(
            2,
            &["x1", "x2"],
            &["k1", "k2"],
            &[&["1", "0"], &["k1", "0"]],
            &[],
        );
        let r = bad.check_compatibility(&s, 1e-8);
        assert!(!r.passed());
        let c = r.checks.iter().find(|c| c.index == vec![1, 2, 1]).unwrap();
        assert_eq!(c.worst_absolute, 1.0);
        assert!(
            r.checks
                .iter()
                .find(|c| c.index == vec![1, 2, 2])
                .unwrap()
                .pass
        );
    }

    #[test]
    fn jacobi_examples() {
        let s = Sampler::new(30, 1);
        assert!(so3().check_jacobi(&s, 1e-8, 2).passed());

        // rank 3 with zero anchor: Jacobi is purely algebraic; L_12^3 = k1 alone
        // gives [[t1,t2],t3] = k1 [t3,t3] = 0 and the cyclic sum vanishes
        let a = build(
            1,
            &["x1"],
            &["k1"],
            &[&["0"], &["0"], &["0"]],
            &[(0, 1, 2, "k1")],
        );
        let oracle = {
            // brute-force cyclic sum on basis triples with constant-coefficient algebra
            let l = |i: usize, j: usize, k: usize| a.l(i, j, k);
            let mut worst: f64 = 0.0;
            let b = Binding::from_pairs(&[("k1", 0.7)]);
            for i in 0..3 {
                for j in 0..3 {
                    for k in 0..3 {
                        for out in 0..3 {
                            let mut s = 0.0;
                            for d in 0..3 {
                                s += l(j, k, d).eval(&b).unwrap() * l(i, d, out).eval(&b).unwrap()
                                    + l(k, i, d).eval(&b).unwrap() * l(j, d, out).eval(&b).unwrap()
                                    + l(i, j, d).eval(&b).unwrap() * l(k, d, out).eval(&b).unwrap();
                            }
                            worst = worst.max(s.abs());
                        }
                    }
                }
            }
            worst
        };
        assert_eq!(oracle, 0.0);
        assert!(a.check_jacobi(&s, 1e-8, 2).passed());

        // a rank-3 algebra that violates Jacobi: [t1,t2]=t1, [t2,t3]=t2, [t1,t3]=t3 fails
        let bad = build(
            1,
            &["x1"],
            &["k1"],
            &[&["0"], &["0"], &["0"]],
            &[(0, 1, 0, "1"), (1, 2, 1, "1"), (0, 2, 2, "1")],
        );
        assert!(!bad.check_jacobi(&s, 1e-8, 0).passed());
    }

    #[test]
    fn leibniz_on_shifted_chart() {
        let a = build(
            1,
            &["x1 + 1"],
            &["k1 - 1"],
            &[&["1"], &["k1^2"]],
            &[(0, 1, 0, "2*k1")],
        );
        let s = Sampler::new(50, 4);
        assert!(a.check_leibniz(&s, 1e-8, 3).passed());
        assert!(a.check_compatibility(&s, 1e-8).passed());
        assert!(a.check_anchor_morphism(&s, 1e-8, 3).passed());
        assert!(a.validate(&s, 1e-8).passed());
    }

    #[test]
    fn bracket_is_antisymmetric() {
        let a = build(
            2,
            &["x1", "x2"],
            &["k1", "k2"],
            &[&["1", "0"], &["k1*k2", "1"]],
            &[(0, 1, 0, "k2")],
        );
        let s = Sampler::new(40, 5);
        let mut rng = s.rng(99);
        let u = a.random_section(&mut rng);
        let v = a.random_section(&mut rng);
        let uv = a.bracket(&u, &v);
        let vu = a.bracket(&v, &u).neg();
        for c in 0..2 {
            assert!(equivalent(&uv.coeffs[c], &vu.coeffs[c], &s, 1e-12).unwrap());
        }
        assert!(a.validate(&s, 1e-8).passed());
    }

    #[test]
    fn antisymmetry_rejected_at_construction() {
        let mut s = Structure::zero(2);
        s.set(0, 1, 0, ex("1")).unwrap();
        assert_eq!(
            s.set(1, 0, 0, ex("1")),
            Err(AlgebroidError::InconsistentAntisymmetry(2, 1, 1))
        );
        assert!(s.set(1, 0, 0, ex("-1")).is_ok());
        assert!(matches!(
            s.set(0, 0, 1, ex("k1")),
            Err(AlgebroidError::NonzeroDiagonal(1, 2))
        ));
        let dense = vec![
            vec![vec![ex("0"), ex("0")], vec![ex("k1"), ex("0")]],
            vec![vec![ex("k1"), ex("0")], vec![ex("0"), ex("0")]],
        ];
        assert!(Structure::from_dense(&dense).is_err());
    }

    #[test]
    fn foreign_variables_rejected() {
        let (xm, kn) = chart_pair(1);
        let err = SmoothMap::new(xm, kn, vec![ex("k1")], vec![ex("k1")]).unwrap_err();
        assert!(matches!(err, AlgebroidError::ForeignVariable { .. }));
    }

    #[test]
    fn inverse_pair_checks() {
        let (xm, kn) = chart_pair(1);
        let s = Sampler::default();
        let good = SmoothMap::new(
            xm.clone(),
            kn.clone(),
            vec![ex("x1 + 1")],
            vec![ex("k1 - 1")],
        )
        .unwrap();
        assert!(good.check_inverse("h", &s, 1e-12).passed());
        let bad = SmoothMap::new(xm, kn, vec![ex("x1 + 1")], vec![ex("k1 + 1")]).unwrap();
        assert!(!bad.check_inverse("h", &s, 1e-12).passed());
    }
}
