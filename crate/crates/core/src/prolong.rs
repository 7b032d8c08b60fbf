//! The generalized tangent bundle of an anchored vector bundle (or its dual):
//! natural basis, anchor, bracket, vertical and complete lifts and the
//! bracket identities between them.

use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::algebroid::{AlgebroidError, GeneralizedLieAlgebroid, SectionF};
use crate::check::{Check, Probe, Report};
use crate::expr::{random_polynomial, Expr, Sampler};
use crate::exterior::{self, BundleMorphism, FormQ, InvertibleMorphism, MorphismError};

/// Whether the bundle is E (fiber coordinates `y`) or its dual E* (`p`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variance {
    Primal,
    Dual,
}

impl Variance {
    pub fn fiber_prefix(self) -> &'static str {
        match self {
            Variance::Primal => "y",
            Variance::Dual => "p",
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum ProlongError {
    #[error(transparent)]
    Morphism(#[from] MorphismError),
    #[error(transparent)]
    Algebroid(#[from] AlgebroidError),
    #[error("morphism has {found} rows but the algebroid has rank {rank}")]
    RankMismatch { found: usize, rank: usize },
}

/// A vector bundle over M with a locally invertible morphism into F over h.
#[derive(Clone, Debug, PartialEq)]
pub struct AnchoredBundle {
    pub algebroid: GeneralizedLieAlgebroid,
    pub variance: Variance,
    pub fiber_vars: Vec<String>,
    /// `g[alpha][b]` (primal `g_b^alpha`, dual `g^{alpha b}`) and its inverse.
    pub morphism: InvertibleMorphism,
}

/// A section of the generalized tangent bundle over the natural basis.
#[derive(Clone, Debug, PartialEq)]
pub struct ProlongSection {
    /// Coefficients `Z^alpha` of the horizontal basis.
    pub horizontal: Vec<Expr>,
    /// Coefficients of the vertical basis (`Y^a` or `Y_a`).
    pub vertical: Vec<Expr>,
}

/// A vector field on the total space over `(d_x^i, dot_y^a)`.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorFieldOnE {
    pub base: Vec<Expr>,
    pub fiber: Vec<Expr>,
}

impl ProlongSection {
    pub fn zero(p: usize, r: usize) -> ProlongSection {
        ProlongSection {
            horizontal: vec![Expr::zero(); p],
            vertical: vec![Expr::zero(); r],
        }
    }

    /// Horizontal basis section `∂̃_alpha` (0-based).
    pub fn horizontal_basis(p: usize, r: usize, alpha: usize) -> ProlongSection {
        let mut z = ProlongSection::zero(p, r);
        z.horizontal[alpha] = Expr::one();
        z
    }

    /// Vertical basis section `∂̇̃_a` (0-based).
    pub fn vertical_basis(p: usize, r: usize, a: usize) -> ProlongSection {
        let mut z = ProlongSection::zero(p, r);
        z.vertical[a] = Expr::one();
        z
    }

    pub fn coefficients(&self) -> impl Iterator<Item = &Expr> {
        self.horizontal.iter().chain(&self.vertical)
    }

    pub fn add(&self, o: &ProlongSection) -> ProlongSection {
        ProlongSection {
            horizontal: self
                .horizontal
                .iter()
                .zip(&o.horizontal)
                .map(|(a, b)| a + b)
                .collect(),
            vertical: self
                .vertical
                .iter()
                .zip(&o.vertical)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn scale(&self, f: &Expr) -> ProlongSection {
        ProlongSection {
            horizontal: self.horizontal.iter().map(|c| f * c).collect(),
            vertical: self.vertical.iter().map(|c| f * c).collect(),
        }
    }

    pub fn neg(&self) -> ProlongSection {
        self.scale(&Expr::constant(-1.0))
    }

    pub fn display(&self, variance: Variance) -> String {
        let mut names: Vec<String> = (1..=self.horizontal.len())
            .map(|a| format!("d~_{a}"))
            .collect();
        names.extend(
            (1..=self.vertical.len()).map(|a| format!("dot~_{}{a}", variance.fiber_prefix())),
        );
        let coeffs: Vec<Expr> = self.coefficients().cloned().collect();
        Combination(&coeffs, &names).to_string()
    }
}

impl VectorFieldOnE {
    /// Derivative of `f` along the field.
    pub fn apply(&self, f: &Expr, x_vars: &[String], fiber_vars: &[String]) -> Expr {
        let mut terms = Vec::new();
        for (c, v) in self
            .base
            .iter()
            .zip(x_vars)
            .chain(self.fiber.iter().zip(fiber_vars))
        {
            if !c.is_zero() && f.depends_on(v) {
                terms.push(c * f.diff(v));
            }
        }
        Expr::sum(terms)
    }

    /// Coordinate bracket of vector fields on the total space.
    pub fn bracket(
        &self,
        o: &VectorFieldOnE,
        x_vars: &[String],
        fiber_vars: &[String],
    ) -> VectorFieldOnE {
        let comp =
            |a: &Expr, b: &Expr| self.apply(b, x_vars, fiber_vars) - o.apply(a, x_vars, fiber_vars);
        VectorFieldOnE {
            base: self
                .base
                .iter()
                .zip(&o.base)
                .map(|(a, b)| comp(a, b))
                .collect(),
            fiber: self
                .fiber
                .iter()
                .zip(&o.fiber)
                .map(|(a, b)| comp(a, b))
                .collect(),
        }
    }

    pub fn coefficients(&self) -> impl Iterator<Item = &Expr> {
        self.base.iter().chain(&self.fiber)
    }

    pub fn display(&self, variance: Variance) -> String {
        let mut names: Vec<String> = (1..=self.base.len()).map(|i| format!("d_x{i}")).collect();
        names.extend((1..=self.fiber.len()).map(|a| format!("dot_{}{a}", variance.fiber_prefix())));
        let coeffs: Vec<Expr> = self.coefficients().cloned().collect();
        Combination(&coeffs, &names).to_string()
    }
}

struct Combination<'a>(&'a [Expr], &'a [String]);

impl fmt::Display for Combination<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        crate::algebroid::write_combination(f, self.0, self.1)
    }
}

impl AnchoredBundle {
    /// Builds the bundle from `g[alpha][b]` and an optional declared inverse
    /// `ginv[b][alpha]`; without one the adjugate inverse is used.
    pub fn new(
        algebroid: GeneralizedLieAlgebroid,
        variance: Variance,
        g: Vec<Vec<Expr>>,
        ginv: Option<Vec<Vec<Expr>>>,
        sampler: &Sampler,
    ) -> Result<AnchoredBundle, ProlongError> {
        if g.len() != algebroid.rank() {
            return Err(ProlongError::RankMismatch {
                found: g.len(),
                rank: algebroid.rank(),
            });
        }
        for row in g.iter().chain(ginv.iter().flatten()) {
            for e in row {
                algebroid.base_m.admit("morphism component", e)?;
            }
        }
        let forward = BundleMorphism::new(algebroid.h.clone(), g)?;
        let r = forward.source_rank;
        let morphism = match ginv {
            Some(inv) => InvertibleMorphism::new(forward, inv, sampler)?,
            None => InvertibleMorphism::with_auto_inverse(forward, sampler)?,
        };
        let fiber_vars = (1..=r)
            .map(|a| format!("{}{a}", variance.fiber_prefix()))
            .collect();
        Ok(AnchoredBundle {
            algebroid,
            variance,
            fiber_vars,
            morphism,
        })
    }

    /// The bundle F itself pulled back to M with `g = Id`.
    pub fn identity(algebroid: GeneralizedLieAlgebroid, variance: Variance) -> AnchoredBundle {
        let p = algebroid.rank();
        let id: Vec<Vec<Expr>> = (0..p)
            .map(|a| {
                (0..p)
                    .map(|b| Expr::constant(if a == b { 1.0 } else { 0.0 }))
                    .collect()
            })
            .collect();
        AnchoredBundle::new(
            algebroid,
            variance,
            id.clone(),
            Some(id),
            &Sampler::new(1, 0),
        )
        .expect("identity morphism is invertible")
    }

    pub fn rank(&self) -> usize {
        self.fiber_vars.len()
    }

    pub fn p(&self) -> usize {
        self.algebroid.rank()
    }

    pub fn m(&self) -> usize {
        self.algebroid.dim()
    }

    pub fn x_vars(&self) -> &[String] {
        self.algebroid.x_vars()
    }

    /// Coordinates of the total space: base then fiber.
    pub fn total_vars(&self) -> Vec<String> {
        self.x_vars()
            .iter()
            .chain(&self.fiber_vars)
            .cloned()
            .collect()
    }

    pub fn fiber_var(&self, a: usize) -> Expr {
        Expr::var(&self.fiber_vars[a])
    }

    pub fn g(&self, alpha: usize, b: usize) -> &Expr {
        &self.morphism.forward.fiber[alpha][b]
    }

    pub fn ginv(&self, b: usize, alpha: usize) -> &Expr {
        &self.morphism.inverse_fiber[b][alpha]
    }

    /// Probe over points of the total space.
    pub fn probe(&self, sampler: &Sampler, tol: f64) -> Probe {
        let vars = self.total_vars();
        Probe::new(vars.clone(), sampler.generate(&vars), tol)
    }

    /// Probe over points of M.
    pub fn probe_m(&self, sampler: &Sampler, tol: f64) -> Probe {
        let vars = self.x_vars().to_vec();
        Probe::new(vars.clone(), sampler.generate(&vars), tol)
    }

    pub fn random_section<R: Rng>(&self, rng: &mut R) -> Vec<Expr> {
        (0..self.rank())
            .map(|_| random_polynomial(self.x_vars(), 2, rng))
            .collect()
    }

    pub fn random_form<R: Rng>(&self, rng: &mut R) -> FormQ {
        FormQ::one_form(self.random_section(rng))
    }

    pub fn random_prolong_section<R: Rng>(&self, rng: &mut R) -> ProlongSection {
        let vars = self.total_vars();
        ProlongSection {
            horizontal: (0..self.p())
                .map(|_| random_polynomial(&vars, 2, rng))
                .collect(),
            vertical: (0..self.rank())
                .map(|_| random_polynomial(&vars, 2, rng))
                .collect(),
        }
    }

    /// `Γ(g,h) u`, a section of F.
    pub fn push(&self, u: &[Expr]) -> SectionF {
        SectionF::new(self.morphism.forward.pushforward_section(u))
    }

    /// `Γ(g⁻¹,h⁻¹) w`, a section of the bundle.
    pub fn pull_section(&self, w: &SectionF) -> Vec<Expr> {
        self.morphism.inverse.pushforward_section(&w.coeffs)
    }

    /// `(g u)^alpha` on M.
    fn gu(&self, u: &[Expr]) -> Vec<Expr> {
        (0..self.p())
            .map(|al| Expr::sum(u.iter().enumerate().map(|(c, uc)| self.g(al, c) * uc)))
            .collect()
    }

    /// `ρ̃(Z) = Z^alpha (rho_alpha^i∘h) d_i + Y^a dot_a`.
    pub fn rho_tilde(&self, z: &ProlongSection) -> VectorFieldOnE {
        let base = (0..self.m())
            .map(|i| {
                Expr::sum(
                    z.horizontal
                        .iter()
                        .enumerate()
                        .map(|(al, za)| za * self.algebroid.rho_on_m(al, i)),
                )
            })
            .collect();
        VectorFieldOnE {
            base,
            fiber: z.vertical.clone(),
        }
    }

    fn apply(&self, v: &VectorFieldOnE, f: &Expr) -> Expr {
        v.apply(f, self.x_vars(), &self.fiber_vars)
    }

    /// Bracket on the generalized tangent bundle.
    pub fn bracket_prolong(&self, z: &ProlongSection, w: &ProlongSection) -> ProlongSection {
        let (p, r) = (self.p(), self.rank());
        let rz = self.rho_tilde(z);
        let rw = self.rho_tilde(w);
        let horizontal = (0..p)
            .map(|g| {
                let mut terms = vec![
                    self.apply(&rz, &w.horizontal[g]),
                    -self.apply(&rw, &z.horizontal[g]),
                ];
                for a in 0..p {
                    for b in 0..p {
                        let l = self.algebroid.l_on_m(a, b, g);
                        if !l.is_zero() && !z.horizontal[a].is_zero() && !w.horizontal[b].is_zero()
                        {
                            terms.push(Expr::product([
                                z.horizontal[a].clone(),
                                w.horizontal[b].clone(),
                                l,
                            ]));
                        }
                    }
                }
                Expr::sum(terms)
            })
            .collect();
        let vertical = (0..r)
            .map(|a| self.apply(&rz, &w.vertical[a]) - self.apply(&rw, &z.vertical[a]))
            .collect();
        ProlongSection {
            horizontal,
            vertical,
        }
    }

    /// `f^∨ = f∘h∘π` for a function on N.
    pub fn vertical_lift_function(&self, f: &Expr) -> Expr {
        self.algebroid.h.pull(f)
    }

    /// `f^c = U^a (g_a^alpha∘π)(rho_alpha^i∘h∘π) d_i(f∘h∘π)` for a function on N.
    pub fn complete_lift_function(&self, f: &Expr) -> Expr {
        let fh = self.algebroid.h.pull(f);
        let grads: Vec<Expr> = self.x_vars().iter().map(|x| fh.diff(x)).collect();
        let mut terms = Vec::new();
        for a in 0..self.rank() {
            for al in 0..self.p() {
                let g = self.g(al, a);
                if g.is_zero() {
                    continue;
                }
                for (i, d) in grads.iter().enumerate() {
                    let rho = self.algebroid.rho_on_m(al, i);
                    if d.is_zero() || rho.is_zero() {
                        continue;
                    }
                    terms.push(Expr::product([
                        self.fiber_var(a),
                        g.clone(),
                        rho.clone(),
                        d.clone(),
                    ]));
                }
            }
        }
        Expr::sum(terms)
    }

    /// `u^∨ = (u^a∘π) dot_a`.
    pub fn vertical_lift_section(&self, u: &[Expr]) -> VectorFieldOnE {
        VectorFieldOnE {
            base: vec![Expr::zero(); self.m()],
            fiber: u.to_vec(),
        }
    }

    /// `u^V = 0 ⊕ u^∨`.
    pub fn vertical_lift_gh(&self, u: &[Expr]) -> ProlongSection {
        ProlongSection {
            horizontal: vec![Expr::zero(); self.p()],
            vertical: u.to_vec(),
        }
    }

    /// `K_a^gamma(u)` on N by the closed form, indexed `[a][gamma]`.
    pub fn k_coefficients(&self, u: &[Expr]) -> Vec<Vec<Expr>> {
        let (p, r, m) = (self.p(), self.rank(), self.m());
        let xs = self.x_vars();
        let gu = self.gu(u);
        let rho = |al: usize, i: usize| self.algebroid.rho_on_m(al, i).clone();
        // anchored image on M: (gu)^beta rho_beta^j
        let flow: Vec<Expr> = (0..m)
            .map(|j| Expr::sum((0..p).map(|b| &gu[b] * rho(b, j))))
            .collect();
        let dgu: Vec<Vec<Expr>> = gu
            .iter()
            .map(|e| xs.iter().map(|x| e.diff(x)).collect())
            .collect();
        (0..r)
            .map(|a| {
                (0..p)
                    .map(|g| {
                        let mut terms = Vec::new();
                        let gag = self.g(g, a);
                        for j in 0..m {
                            if !flow[j].is_zero() && gag.depends_on(&xs[j]) {
                                terms.push(&flow[j] * gag.diff(&xs[j]));
                            }
                        }
                        for al in 0..p {
                            let gaa = self.g(al, a);
                            if gaa.is_zero() {
                                continue;
                            }
                            for i in 0..m {
                                if !dgu[g][i].is_zero() {
                                    terms.push(-Expr::product([
                                        gaa.clone(),
                                        rho(al, i),
                                        dgu[g][i].clone(),
                                    ]));
                                }
                            }
                        }
                        for al in 0..p {
                            for b in 0..p {
                                let l = self.algebroid.l_on_m(al, b, g);
                                if !l.is_zero() && !gu[al].is_zero() && !self.g(b, a).is_zero() {
                                    terms.push(Expr::product([
                                        gu[al].clone(),
                                        l,
                                        self.g(b, a).clone(),
                                    ]));
                                }
                            }
                        }
                        self.algebroid.h.push(&Expr::sum(terms))
                    })
                    .collect()
            })
            .collect()
    }

    /// `K_a^gamma(u)` from `[Γ(g,h)u, Γ(g,h)s_a]_{F,h}`.
    pub fn k_coefficients_by_bracket(&self, u: &[Expr]) -> Vec<Vec<Expr>> {
        let r = self.rank();
        let pu = self.push(u);
        (0..r)
            .map(|a| {
                let sa: Vec<Expr> = (0..r)
                    .map(|b| Expr::constant(if a == b { 1.0 } else { 0.0 }))
                    .collect();
                self.algebroid.bracket(&pu, &self.push(&sa)).coeffs
            })
            .collect()
    }

    /// `-U^a (K_a^gamma∘h∘π)(g̃_gamma^b∘π)`, the vertical part of both complete lifts.
    fn complete_vertical(&self, u: &[Expr]) -> Vec<Expr> {
        let (p, r) = (self.p(), self.rank());
        let k: Vec<Vec<Expr>> = self
            .k_coefficients(u)
            .iter()
            .map(|row| row.iter().map(|e| self.algebroid.h.pull(e)).collect())
            .collect();
        (0..r)
            .map(|b| {
                let mut terms = Vec::new();
                for (a, row) in k.iter().enumerate() {
                    for (g, kag) in row.iter().enumerate().take(p) {
                        let gi = self.ginv(b, g);
                        if !kag.is_zero() && !gi.is_zero() {
                            terms.push(-Expr::product([
                                self.fiber_var(a),
                                kag.clone(),
                                gi.clone(),
                            ]));
                        }
                    }
                }
                Expr::sum(terms)
            })
            .collect()
    }

    /// The complete lift `u^c` as a vector field on the total space.
    pub fn complete_lift_section(&self, u: &[Expr]) -> VectorFieldOnE {
        let gu = self.gu(u);
        let base = (0..self.m())
            .map(|i| Expr::sum((0..self.p()).map(|al| &gu[al] * self.algebroid.rho_on_m(al, i))))
            .collect();
        VectorFieldOnE {
            base,
            fiber: self.complete_vertical(u),
        }
    }

    /// The complete lift `u^C` on the generalized tangent bundle.
    pub fn complete_lift_gh(&self, u: &[Expr]) -> ProlongSection {
        ProlongSection {
            horizontal: self.gu(u),
            vertical: self.complete_vertical(u),
        }
    }

    /// `ω̂ = U^a ω_a`.
    pub fn hat_form(&self, w: &FormQ) -> Expr {
        assert_eq!(w.degree, 1);
        Expr::sum(
            w.coefficients()
                .iter()
                .enumerate()
                .map(|(a, c)| self.fiber_var(a) * c),
        )
    }

    /// `𝒥(Z^alpha ∂̃_alpha + Y^b ∂̇̃_b) = (g̃_alpha^b∘π) Z^alpha ∂̇̃_b`.
    pub fn almost_tangent(&self, z: &ProlongSection) -> ProlongSection {
        let vertical = (0..self.rank())
            .map(|b| {
                Expr::sum(
                    z.horizontal
                        .iter()
                        .enumerate()
                        .map(|(al, za)| self.ginv(b, al) * za),
                )
            })
            .collect();
        ProlongSection {
            horizontal: vec![Expr::zero(); self.p()],
            vertical,
        }
    }

    /// The (g,h) covariant Lie derivative of a form along `u`.
    pub fn gh_lie_derivative(&self, u: &[Expr], w: &FormQ) -> FormQ {
        exterior::gh_lie_derivative(&self.algebroid, &self.morphism, u, w)
    }

    /// Closed form of the (g,h) Lie derivative of a 1-form:
    /// `(gu)^alpha (rho_alpha^i∘h) d_i ω_a - g̃_gamma^b ω_b (K_a^gamma∘h)`.
    pub fn gh_lie_derivative_one_form(&self, u: &[Expr], w: &FormQ) -> FormQ {
        assert_eq!(w.degree, 1);
        let flow = self.complete_lift_section(u).base;
        let k = self.k_coefficients(u);
        let coeffs = (0..self.rank())
            .map(|a| {
                let mut terms = Vec::new();
                for (i, x) in self.x_vars().iter().enumerate() {
                    terms.push(&flow[i] * w.coefficients()[a].diff(x));
                }
                for g in 0..self.p() {
                    let kag = self.algebroid.h.pull(&k[a][g]);
                    for b in 0..self.rank() {
                        terms.push(-Expr::product([
                            self.ginv(b, g).clone(),
                            w.coefficients()[b].clone(),
                            kag.clone(),
                        ]));
                    }
                }
                Expr::sum(terms)
            })
            .collect();
        FormQ::one_form(coeffs)
    }

    /// `A(Γ(g,h)u)(f)` for a function on N.
    pub fn anchored_action(&self, u: &[Expr], f: &Expr) -> Expr {
        self.algebroid.anchor_action(&self.push(u), f)
    }
}

/// Checks of the lift calculus on one bundle with a fixed point set.
pub struct LiftChecks<'a> {
    pub bundle: &'a AnchoredBundle,
    pub probe: Probe,
    pub probe_m: Probe,
    pub probe_n: Probe,
}

impl<'a> LiftChecks<'a> {
    pub fn new(bundle: &'a AnchoredBundle, sampler: &Sampler, tol: f64) -> LiftChecks<'a> {
        let n = bundle.algebroid.k_vars().to_vec();
        LiftChecks {
            bundle,
            probe: bundle.probe(sampler, tol),
            probe_m: bundle.probe_m(sampler, tol),
            probe_n: Probe::new(n.clone(), sampler.generate(&n), tol),
        }
    }

    fn family(&self, name: &str) -> String {
        match self.bundle.variance {
            Variance::Primal => name.to_string(),
            Variance::Dual => format!("{name}*"),
        }
    }

    fn cmp_prolong(
        &self,
        fam: &str,
        idx: Vec<usize>,
        a: &ProlongSection,
        b: &ProlongSection,
    ) -> Check {
        self.probe.check_all(
            &self.family(fam),
            idx,
            a.coefficients().zip(b.coefficients()),
        )
    }

    /// Both defining conditions of the complete lift for one `(u, ω)`.
    pub fn complete_lift_conditions(&self, t: usize, u: &[Expr], w: &FormQ) -> Report {
        let b = self.bundle;
        let mut r = Report::new();
        let uc = b.complete_lift_section(u);
        // T(h∘π)(u^c) against the anchored image of Γ(g,h)u at h(π(.)), both in TN
        let h = &b.algebroid.h;
        let pu = b.push(u);
        let mut pairs = Vec::new();
        for hk in &h.forward {
            let lhs = Expr::sum(b.x_vars().iter().zip(&uc.base).map(|(x, c)| c * hk.diff(x)));
            let rhs = Expr::sum((0..b.p()).map(|al| {
                let rho_dh = Expr::sum(
                    b.x_vars()
                        .iter()
                        .enumerate()
                        .map(|(i, x)| b.algebroid.rho_on_m(al, i) * hk.diff(x)),
                );
                h.pull(&pu.coeffs[al]) * rho_dh
            }));
            pairs.push((lhs, rhs));
        }
        r.push(
            self.probe
                .check_vec(&self.family("complete lift anchor"), vec![t], &pairs),
        );
        let lie = b.gh_lie_derivative(u, w);
        let lhs = uc.apply(&b.hat_form(w), b.x_vars(), &b.fiber_vars);
        r.push(self.probe.check(
            &self.family("complete lift on forms"),
            vec![t],
            &lhs,
            &b.hat_form(&lie),
        ));
        let closed = b.gh_lie_derivative_one_form(u, w);
        r.push(self.probe_m.check_all(
            &self.family("lie derivative closed form"),
            vec![t],
            lie.coefficients().iter().zip(closed.coefficients()),
        ));
        r
    }

    /// Lemma on vertical lifts: additivity, linearity over functions on M,
    /// and `u^∨(f^∨) = 0`.
    pub fn lemma_vertical(
        &self,
        t: usize,
        u: &[Expr],
        v: &[Expr],
        f_m: &Expr,
        f_n: &Expr,
    ) -> Report {
        let b = self.bundle;
        let mut r = Report::new();
        let sum: Vec<Expr> = u.iter().zip(v).map(|(a, c)| a + c).collect();
        let lhs = b.vertical_lift_section(&sum);
        let us = b.vertical_lift_section(u);
        let vs = b.vertical_lift_section(v);
        let rhs: Vec<Expr> = us.fiber.iter().zip(&vs.fiber).map(|(a, c)| a + c).collect();
        r.push(self.probe.check_all(
            &self.family("vertical lift additive"),
            vec![t],
            lhs.fiber.iter().zip(&rhs),
        ));
        let fu: Vec<Expr> = u.iter().map(|c| f_m * c).collect();
        let lhs = b.vertical_lift_section(&fu);
        let rhs: Vec<Expr> = us.fiber.iter().map(|c| f_m * c).collect();
        r.push(self.probe.check_all(
            &self.family("vertical lift linear"),
            vec![t],
            lhs.fiber.iter().zip(&rhs),
        ));
        let ann = b.apply(&us, &b.vertical_lift_function(f_n));
        r.push(self.probe.check(
            &self.family("vertical lift annihilates"),
            vec![t],
            &ann,
            &Expr::zero(),
        ));
        r
    }

    /// Lemmas on complete lifts of functions.
    pub fn lemma_complete(&self, t: usize, u: &[Expr], f1: &Expr, f2: &Expr) -> Report {
        let b = self.bundle;
        let mut r = Report::new();
        let c = |f: &Expr| b.complete_lift_function(f);
        let v = |f: &Expr| b.vertical_lift_function(f);
        r.push(self.probe.check(
            &self.family("complete lift additive"),
            vec![t],
            &c(&(f1 + f2)),
            &(c(f1) + c(f2)),
        ));
        r.push(self.probe.check(
            &self.family("complete lift product"),
            vec![t],
            &c(&(f1 * f2)),
            &(c(f1) * v(f2) + v(f1) * c(f2)),
        ));
        let act = b.anchored_action(u, f1);
        let lhs = b.apply(&b.vertical_lift_section(u), &c(f1));
        r.push(self.probe.check(
            &self.family("vertical on complete"),
            vec![t],
            &lhs,
            &v(&act),
        ));
        let lhs = b.apply(&b.complete_lift_section(u), &c(f1));
        r.push(self.probe.check(
            &self.family("complete on complete"),
            vec![t],
            &lhs,
            &c(&act),
        ));
        r
    }

    /// The three bracket identities between vertical and complete lifts.
    pub fn lift_brackets(&self, t: usize, u: &[Expr], v: &[Expr]) -> Report {
        let b = self.bundle;
        let mut r = Report::new();
        let (uv, vv) = (b.vertical_lift_gh(u), b.vertical_lift_gh(v));
        let (uc, vc) = (b.complete_lift_gh(u), b.complete_lift_gh(v));
        let zero = ProlongSection::zero(b.p(), b.rank());
        r.push(self.cmp_prolong("bracket VV", vec![t], &b.bracket_prolong(&uv, &vv), &zero));
        let w = b.pull_section(&b.algebroid.bracket(&b.push(u), &b.push(v)));
        r.push(self.cmp_prolong(
            "bracket VC",
            vec![t],
            &b.bracket_prolong(&uv, &vc),
            &b.vertical_lift_gh(&w),
        ));
        r.push(self.cmp_prolong(
            "bracket CC",
            vec![t],
            &b.bracket_prolong(&uc, &vc),
            &b.complete_lift_gh(&w),
        ));
        r
    }

    /// `𝒥(u^C) = u^V`, `ρ̃(u^C) = u^c` and `𝒥∘𝒥 = 0`.
    pub fn almost_tangent(&self, t: usize, u: &[Expr], z: &ProlongSection) -> Report {
        let b = self.bundle;
        let mut r = Report::new();
        let uc = b.complete_lift_gh(u);
        r.push(self.cmp_prolong(
            "almost tangent",
            vec![t],
            &b.almost_tangent(&uc),
            &b.vertical_lift_gh(u),
        ));
        let lhs = b.rho_tilde(&uc);
        let rhs = b.complete_lift_section(u);
        r.push(self.probe.check_all(
            &self.family("anchor of complete lift"),
            vec![t],
            lhs.coefficients().zip(rhs.coefficients()),
        ));
        let jj = b.almost_tangent(&b.almost_tangent(z));
        r.push(self.cmp_prolong(
            "almost tangent nilpotent",
            vec![t],
            &jj,
            &ProlongSection::zero(b.p(), b.rank()),
        ));
        r
    }

    /// Closed-form K against the bracket definition.
    pub fn k_oracle(&self, t: usize, u: &[Expr]) -> Check {
        let b = self.bundle;
        let closed = b.k_coefficients(u);
        let bracket = b.k_coefficients_by_bracket(u);
        self.probe_n.check_all(
            &self.family("K coefficients"),
            vec![t],
            closed.iter().flatten().zip(bracket.iter().flatten()),
        )
    }

    /// Antisymmetry and Jacobi of the bracket, plus agreement of its anchor
    /// image with the coordinate bracket of vector fields.
    pub fn bracket_axioms(
        &self,
        t: usize,
        z: &ProlongSection,
        w: &ProlongSection,
        y: &ProlongSection,
    ) -> Report {
        let b = self.bundle;
        let mut r = Report::new();
        let zw = b.bracket_prolong(z, w);
        r.push(self.cmp_prolong(
            "prolong antisymmetry",
            vec![t],
            &zw,
            &b.bracket_prolong(w, z).neg(),
        ));
        let j = b
            .bracket_prolong(z, &b.bracket_prolong(w, y))
            .add(&b.bracket_prolong(w, &b.bracket_prolong(y, z)))
            .add(&b.bracket_prolong(y, &zw));
        r.push(self.cmp_prolong(
            "prolong jacobi",
            vec![t],
            &j,
            &ProlongSection::zero(b.p(), b.rank()),
        ));
        let lhs = b.rho_tilde(&zw);
        let rhs = b
            .rho_tilde(z)
            .bracket(&b.rho_tilde(w), b.x_vars(), &b.fiber_vars);
        r.push(self.probe.check_all(
            &self.family("prolong anchor morphism"),
            vec![t],
            lhs.coefficients().zip(rhs.coefficients()),
        ));
        r
    }

    /// Every property above on `trials` random inputs drawn from `sampler`.
    pub fn all(&self, sampler: &Sampler, trials: usize) -> Report {
        let b = self.bundle;
        let mut rng = sampler.rng(21);
        let mut r = Report::new();
        for t in 1..=trials {
            let u = b.random_section(&mut rng);
            let v = b.random_section(&mut rng);
            let w = b.random_form(&mut rng);
            let fm = random_polynomial(b.x_vars(), 2, &mut rng);
            let f1 = random_polynomial(b.algebroid.k_vars(), 2, &mut rng);
            let f2 = random_polynomial(b.algebroid.k_vars(), 2, &mut rng);
            let z = b.random_prolong_section(&mut rng);
            r.extend(self.complete_lift_conditions(t, &u, &w));
            r.extend(self.lemma_vertical(t, &u, &v, &fm, &f1));
            r.extend(self.lemma_complete(t, &u, &f1, &f2));
            r.extend(self.lift_brackets(t, &u, &v));
            r.extend(self.almost_tangent(t, &u, &z));
            r.push(self.k_oracle(t, &u));
        }
        r
    }
}
