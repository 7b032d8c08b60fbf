//! Tangent applications of the Legendre morphisms, the lift implications,
//! the morphism conditions between the generalized tangent bundles of E and
//! E*, and the Legendre equivalence verdict.

use std::fmt;

use thiserror::Error;

use crate::check::{Check, Probe, Report};
use crate::expr::{Expr, Sampler};
use crate::legendre::{EnergyKind, FundamentalFunction};
use crate::prolong::{AnchoredBundle, ProlongSection, Variance};

/// Tolerance of the bracket commutation test in the equivalence verdict.
pub const COMMUTATION_TOL: f64 = 1e-8;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum DualityError {
    #[error("{0}")]
    Mismatch(String),
}

/// Which Legendre morphism a computation runs along.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// `φ_L`: from E to E*.
    Lagrange,
    /// `φ_H`: from E* to E.
    Hamilton,
}

impl Side {
    pub fn tag(self) -> &'static str {
        match self {
            Side::Lagrange => "phiL",
            Side::Hamilton => "phiH",
        }
    }
}

/// Which lift enters a lift implication.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Lift {
    Vertical,
    Complete,
}

/// A Lagrangian on E and a Hamiltonian on E* over one algebroid.
#[derive(Clone, Debug)]
pub struct LegendrePair {
    pub primal: AnchoredBundle,
    pub dual: AnchoredBundle,
    pub l: FundamentalFunction,
    pub h: FundamentalFunction,
    /// `φ_H` fiber components: `y^b` as expressions in `(x, p)`.
    pub phi_h: Vec<Expr>,
    /// `φ_L` fiber components: `p_b` as expressions in `(x, y)`.
    pub phi_l: Vec<Expr>,
}

impl LegendrePair {
    pub fn new(
        primal: AnchoredBundle,
        dual: AnchoredBundle,
        l: FundamentalFunction,
        h: FundamentalFunction,
    ) -> Result<LegendrePair, DualityError> {
        let bad = |m: String| Err(DualityError::Mismatch(m));
        if primal.variance != Variance::Primal || dual.variance != Variance::Dual {
            return bad("bundles must be primal and dual".into());
        }
        if primal.algebroid != dual.algebroid {
            return bad("bundles must share the algebroid".into());
        }
        if l.kind != EnergyKind::Lagrange || h.kind != EnergyKind::Hamilton {
            return bad("expected a Lagrangian and a Hamiltonian".into());
        }
        let dims = (primal.m(), primal.rank());
        if l.x_vars.len() != dims.0 || h.x_vars.len() != dims.0 {
            return bad(format!(
                "energies must live over a base of dimension {}",
                dims.0
            ));
        }
        if l.fiber_vars != primal.fiber_vars || h.fiber_vars != dual.fiber_vars {
            return bad(format!("energies must have fiber rank {}", dims.1));
        }
        let phi_h = h.phi_exprs();
        let phi_l = l.phi_exprs();
        Ok(LegendrePair {
            primal,
            dual,
            l,
            h,
            phi_h,
            phi_l,
        })
    }

    fn bundle(&self, side: Side) -> (&AnchoredBundle, &AnchoredBundle) {
        match side {
            Side::Lagrange => (&self.primal, &self.dual),
            Side::Hamilton => (&self.dual, &self.primal),
        }
    }

    fn energy(&self, side: Side) -> &FundamentalFunction {
        match side {
            Side::Lagrange => &self.l,
            Side::Hamilton => &self.h,
        }
    }

    /// Composition of a function on the source side with the inverse
    /// morphism (`∘φ_H` for the Lagrange side, `∘φ_L` for the Hamilton side).
    pub fn compose_back(&self, side: Side, e: &Expr) -> Expr {
        let (src, _) = self.bundle(side);
        let map = match side {
            Side::Lagrange => &self.phi_h,
            Side::Hamilton => &self.phi_l,
        };
        e.subst_with(&|v: &str| {
            src.fiber_vars
                .iter()
                .position(|f| f == v)
                .map(|a| map[a].clone())
        })
    }

    /// `(rho_alpha^i∘h) · d^2 S / dx^i d(fiber)_b` on the source side.
    fn anchored_mixed(&self, side: Side, alpha: usize, b: usize) -> Expr {
        let s = self.energy(side);
        let alg = &self.primal.algebroid;
        Expr::sum((0..alg.dim()).map(|i| alg.rho_on_m(alpha, i) * s.mixed(i, b)))
    }

    /// The tangent application of `φ_L` (Lagrange side, E → E*) or `φ_H`.
    pub fn tangent(&self, side: Side, z: &ProlongSection) -> ProlongSection {
        let s = self.energy(side);
        let (src, _) = self.bundle(side);
        let (p, r) = (src.p(), src.rank());
        let horizontal = z
            .horizontal
            .iter()
            .map(|c| self.compose_back(side, c))
            .collect();
        let vertical = (0..r)
            .map(|b| {
                let mut terms = Vec::new();
                for al in 0..p {
                    if !z.horizontal[al].is_zero() {
                        terms.push(&z.horizontal[al] * self.anchored_mixed(side, al, b));
                    }
                }
                for a in 0..r {
                    if !z.vertical[a].is_zero() {
                        terms.push(&z.vertical[a] * &s.hessian[a][b]);
                    }
                }
                self.compose_back(side, &Expr::sum(terms))
            })
            .collect();
        ProlongSection {
            horizontal,
            vertical,
        }
    }

    /// Probe over the target side of `side`, away from the zero section.
    fn target_probe(&self, side: Side, sampler: &Sampler, tol: f64) -> Probe {
        let (_, tgt) = self.bundle(side);
        tgt.probe(&sampler.clone().with_floor(&tgt.fiber_vars, 0.1), tol)
    }

    /// The four families of conditions for the tangent application of one
    /// side to be a morphism of Lie algebroids, with `A_alpha^b` and `B_b^a`
    /// the coefficient functions of the images of the natural basis.
    pub fn morphism_conditions(&self, side: Side, sampler: &Sampler, tol: f64) -> Report {
        let (src, tgt) = self.bundle(side);
        let alg = &src.algebroid;
        let (p, r, m) = (src.p(), src.rank(), src.m());
        let s = self.energy(side);
        let probe = self.target_probe(side, sampler, tol);
        let xs = alg.x_vars();
        let ts = &tgt.fiber_vars;
        let fam = |k: usize| format!("{}.{k}", side.tag());

        let a: Vec<Vec<Expr>> = (0..p)
            .map(|al| {
                (0..r)
                    .map(|b| self.compose_back(side, &self.anchored_mixed(side, al, b)))
                    .collect()
            })
            .collect();
        let bm: Vec<Vec<Expr>> = (0..r)
            .map(|b| {
                (0..r)
                    .map(|c| self.compose_back(side, &s.hessian[b][c]))
                    .collect()
            })
            .collect();
        // derivative along the anchored horizontal direction of the target plus its vertical shift
        let horiz = |al: usize, f: &Expr| -> Expr {
            let mut t: Vec<Expr> = (0..m)
                .map(|i| alg.rho_on_m(al, i) * f.diff(&xs[i]))
                .collect();
            t.extend((0..r).map(|c| &a[al][c] * f.diff(&ts[c])));
            Expr::sum(t)
        };
        let vert =
            |b: usize, f: &Expr| -> Expr { Expr::sum((0..r).map(|c| &bm[b][c] * f.diff(&ts[c]))) };

        let mut rep = Report::new();
        for al in 0..p {
            for be in 0..p {
                for g in 0..p {
                    let l = alg.l_on_m(al, be, g);
                    rep.push(probe.check(
                        &fam(1),
                        vec![al + 1, be + 1, g + 1],
                        &self.compose_back(side, &l),
                        &l,
                    ));
                }
            }
        }
        for al in 0..p {
            for be in al + 1..p {
                for b in 0..r {
                    let lhs = Expr::sum((0..p).map(|g| alg.l_on_m(al, be, g) * &a[g][b]));
                    let rhs = horiz(al, &a[be][b]) - horiz(be, &a[al][b]);
                    rep.push(probe.check(&fam(2), vec![al + 1, be + 1, b + 1], &lhs, &rhs));
                }
            }
        }
        for al in 0..p {
            for b in 0..r {
                for c in 0..r {
                    let rhs = horiz(al, &bm[b][c]) - vert(b, &a[al][c]);
                    rep.push(probe.check(&fam(3), vec![al + 1, b + 1, c + 1], &Expr::zero(), &rhs));
                }
            }
        }
        for a1 in 0..r {
            for b in a1 + 1..r {
                for d in 0..r {
                    let rhs = vert(a1, &bm[b][d]) - vert(b, &bm[a1][d]);
                    rep.push(probe.check(&fam(4), vec![a1 + 1, b + 1, d + 1], &Expr::zero(), &rhs));
                }
            }
        }
        rep
    }

    /// The reduced conditions for the classical case `(rho, eta, h) = Id`,
    /// written with plain second derivatives of the energy.
    pub fn classical_conditions(&self, side: Side, sampler: &Sampler, tol: f64) -> Report {
        let (src, tgt) = self.bundle(side);
        let (m, r) = (src.m(), src.rank());
        let s = self.energy(side);
        let probe = self.target_probe(side, sampler, tol);
        let xs = src.algebroid.x_vars();
        let ts = &tgt.fiber_vars;
        let mixed: Vec<Vec<Expr>> = (0..m)
            .map(|i| {
                (0..r)
                    .map(|k| self.compose_back(side, &s.mixed(i, k)))
                    .collect()
            })
            .collect();
        let fib: Vec<Vec<Expr>> = (0..r)
            .map(|j| {
                (0..r)
                    .map(|k| self.compose_back(side, &s.hessian[j][k]))
                    .collect()
            })
            .collect();
        let dt = |f: &Expr, h: usize| f.diff(&ts[h]);
        let fam = |k: usize| format!("{}.classical.{k}", side.tag());
        let mut rep = Report::new();
        for i in 0..m {
            for j in i + 1..m {
                for k in 0..r {
                    let mut t = vec![mixed[j][k].diff(&xs[i]), -mixed[i][k].diff(&xs[j])];
                    for h in 0..r {
                        t.push(&mixed[i][h] * dt(&mixed[j][k], h));
                        t.push(-(&mixed[j][h] * dt(&mixed[i][k], h)));
                    }
                    rep.push(probe.check(
                        &fam(1),
                        vec![i + 1, j + 1, k + 1],
                        &Expr::zero(),
                        &Expr::sum(t),
                    ));
                }
            }
        }
        for i in 0..m {
            for j in 0..r {
                for k in 0..r {
                    let mut t = vec![fib[j][k].diff(&xs[i])];
                    for h in 0..r {
                        t.push(&mixed[i][h] * dt(&fib[j][k], h));
                        t.push(-(&fib[j][h] * dt(&mixed[i][k], h)));
                    }
                    rep.push(probe.check(
                        &fam(2),
                        vec![i + 1, j + 1, k + 1],
                        &Expr::zero(),
                        &Expr::sum(t),
                    ));
                }
            }
        }
        for i in 0..r {
            for j in i + 1..r {
                for k in 0..r {
                    let t: Vec<Expr> = (0..r)
                        .flat_map(|h| {
                            [
                                &fib[i][h] * dt(&fib[j][k], h),
                                -(&fib[j][h] * dt(&fib[i][k], h)),
                            ]
                        })
                        .collect();
                    rep.push(probe.check(
                        &fam(3),
                        vec![i + 1, j + 1, k + 1],
                        &Expr::zero(),
                        &Expr::sum(t),
                    ));
                }
            }
        }
        rep
    }

    /// `T([Z,W]) = [T Z, T W]` on every pair of natural basis sections and on
    /// `random` pairs of random polynomial sections.
    pub fn bracket_commutation(
        &self,
        side: Side,
        sampler: &Sampler,
        random: usize,
        tol: f64,
    ) -> Report {
        let (src, tgt) = self.bundle(side);
        let (p, r) = (src.p(), src.rank());
        let probe = self.target_probe(side, sampler, tol);
        let mut sections: Vec<(ProlongSection, ProlongSection)> = Vec::new();
        let basis: Vec<ProlongSection> = (0..p)
            .map(|a| ProlongSection::horizontal_basis(p, r, a))
            .chain((0..r).map(|a| ProlongSection::vertical_basis(p, r, a)))
            .collect();
        for i in 0..basis.len() {
            for j in i + 1..basis.len() {
                sections.push((basis[i].clone(), basis[j].clone()));
            }
        }
        let mut rng = sampler.rng(31);
        for _ in 0..random {
            sections.push((
                src.random_prolong_section(&mut rng),
                src.random_prolong_section(&mut rng),
            ));
        }
        let fam = format!("{}.bracket", side.tag());
        let mut rep = Report::new();
        for (t, (z, w)) in sections.iter().enumerate() {
            let lhs = self.tangent(side, &src.bracket_prolong(z, w));
            let rhs = tgt.bracket_prolong(&self.tangent(side, z), &self.tangent(side, w));
            rep.push(probe.check_all(
                &fam,
                vec![t + 1],
                lhs.coefficients().zip(rhs.coefficients()),
            ));
        }
        rep
    }

    /// Morphism conditions and bracket commutation in both directions, with
    /// the verdict "equivalent" or "not equivalent".
    pub fn legendre_equivalence(&self, sampler: &Sampler, tol: f64) -> Report {
        let mut rep = Report::new();
        for side in [Side::Lagrange, Side::Hamilton] {
            rep.extend(self.morphism_conditions(side, sampler, tol));
            rep.extend(self.bracket_commutation(side, sampler, 3, COMMUTATION_TOL.max(tol)));
        }
        rep.verdict = Some(
            if rep.passed() {
                "equivalent"
            } else {
                "not equivalent"
            }
            .to_string(),
        );
        rep
    }

    /// The image of a section under the fiber morphism of `side`:
    /// `u^a(x) S_ab(x, u(x))`.
    pub fn push_section(&self, side: Side, u: &[Expr]) -> Vec<Expr> {
        let (src, _) = self.bundle(side);
        let s = self.energy(side);
        let on_u = |e: &Expr| {
            e.subst_with(&|v: &str| {
                src.fiber_vars
                    .iter()
                    .position(|f| f == v)
                    .map(|a| u[a].clone())
            })
        };
        (0..src.rank())
            .map(|b| Expr::sum((0..src.rank()).map(|a| &u[a] * on_u(&s.hessian[a][b]))))
            .collect()
    }

    /// The lift implication: premise `T(u^V) = (Γu)^V` (or with complete
    /// lifts) and the displayed conclusions, evaluated on the target side.
    pub fn section_implication(
        &self,
        side: Side,
        lift: Lift,
        u: &[Expr],
        sampler: &Sampler,
        tol: f64,
    ) -> Implication {
        let (src, tgt) = self.bundle(side);
        let (p, r) = (src.p(), src.rank());
        let s = self.energy(side);
        let probe = self.target_probe(side, sampler, tol);
        let pushed = self.push_section(side, u);
        let tag = side.tag();
        let (image, expected) = match lift {
            Lift::Vertical => (
                self.tangent(side, &src.vertical_lift_gh(u)),
                tgt.vertical_lift_gh(&pushed),
            ),
            Lift::Complete => (
                self.tangent(side, &src.complete_lift_gh(u)),
                tgt.complete_lift_gh(&pushed),
            ),
        };
        let premise = probe.check_all(
            &format!("{tag}.{}.premise", lift_tag(lift)),
            vec![],
            image.coefficients().zip(expected.coefficients()),
        );
        let on_source_u = |e: &Expr| {
            e.subst_with(&|v: &str| {
                src.fiber_vars
                    .iter()
                    .position(|f| f == v)
                    .map(|a| u[a].clone())
            })
        };
        let mut conclusions = Vec::new();
        match lift {
            Lift::Vertical => {
                let pairs: Vec<(Expr, Expr)> = u
                    .iter()
                    .map(|c| (self.compose_back(side, c), c.clone()))
                    .collect();
                conclusions.push(probe.check_vec(&format!("{tag}.V.conclusion.1"), vec![], &pairs));
                let pairs: Vec<(Expr, Expr)> = (0..r)
                    .flat_map(|a| (0..r).map(move |b| (a, b)))
                    .map(|(a, b)| {
                        (
                            self.compose_back(side, &s.hessian[a][b]),
                            on_source_u(&s.hessian[a][b]),
                        )
                    })
                    .collect();
                conclusions.push(probe.check_vec(&format!("{tag}.V.conclusion.2"), vec![], &pairs));
            }
            Lift::Complete => {
                // horizontal parts: (g u)^alpha on each side
                let src_h = src.complete_lift_gh(u).horizontal;
                let tgt_h = tgt.complete_lift_gh(&pushed).horizontal;
                let pairs: Vec<(Expr, Expr)> = (0..p)
                    .map(|al| (tgt_h[al].clone(), self.compose_back(side, &src_h[al])))
                    .collect();
                conclusions.push(probe.check_vec(&format!("{tag}.C.conclusion.1"), vec![], &pairs));
                // U(K∘h)g̃ on the target equals the displayed combination on the source, composed back
                let src_v = src.complete_lift_gh(u).vertical;
                let tgt_v = tgt.complete_lift_gh(&pushed).vertical;
                let pairs: Vec<(Expr, Expr)> = (0..r)
                    .map(|b| {
                        let mut t: Vec<Expr> =
                            (0..r).map(|c| -(&src_v[c] * &s.hessian[c][b])).collect();
                        for al in 0..p {
                            t.push(-(&src_h[al] * self.anchored_mixed(side, al, b)));
                        }
                        (-tgt_v[b].clone(), self.compose_back(side, &Expr::sum(t)))
                    })
                    .collect();
                conclusions.push(probe.check_vec(&format!("{tag}.C.conclusion.2"), vec![], &pairs));
            }
        }
        let status = if !premise.pass {
            ImplicationStatus::NotApplicable
        } else if conclusions.iter().all(|c| c.pass) {
            ImplicationStatus::Confirmed
        } else {
            ImplicationStatus::Violated
        };
        Implication {
            premise,
            conclusions,
            status,
        }
    }
}

fn lift_tag(l: Lift) -> &'static str {
    match l {
        Lift::Vertical => "V",
        Lift::Complete => "C",
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImplicationStatus {
    /// Premise and conclusions hold.
    Confirmed,
    /// Premise holds, a conclusion fails.
    Violated,
    /// Premise fails; nothing is claimed.
    NotApplicable,
}

impl fmt::Display for ImplicationStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ImplicationStatus::Confirmed => "confirmed",
            ImplicationStatus::Violated => "violated",
            ImplicationStatus::NotApplicable => "not-applicable",
        })
    }
}

/// Outcome of one lift implication.
#[derive(Clone, Debug)]
pub struct Implication {
    pub premise: Check,
    pub conclusions: Vec<Check>,
    pub status: ImplicationStatus,
}

impl Implication {
    /// As a report whose verdict is the status; only a violated implication
    /// counts as failing.
    pub fn to_report(&self) -> Report {
        let mut r = Report::new();
        let mut premise = self.premise.clone();
        premise.note = Some(format!(
            "premise {}",
            if premise.pass { "holds" } else { "fails" }
        ));
        premise.pass = true;
        r.push(premise);
        for c in &self.conclusions {
            let mut c = c.clone();
            if self.status == ImplicationStatus::NotApplicable {
                c.pass = true;
                c.note = Some("not applicable".into());
            }
            r.push(c);
        }
        r.verdict = Some(self.status.to_string());
        r
    }
}
