//! Lagrange and Hamilton fundamental functions, the Legendre bundle
//! morphisms, Newton-based Legendre transformations and Finsler/Cartan
//! diagnostics.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::check::{Check, Probe, Report};
use crate::expr::{Comparison, Compiled, EvalError, Expr, Sampler};

/// Which side of the duality a fiber energy lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnergyKind {
    /// A Lagrangian in `(x, y)`.
    Lagrange,
    /// A Hamiltonian in `(x, p)`.
    Hamilton,
}

impl EnergyKind {
    pub fn fiber_prefix(self) -> &'static str {
        match self {
            EnergyKind::Lagrange => "y",
            EnergyKind::Hamilton => "p",
        }
    }

    pub fn dual(self) -> EnergyKind {
        match self {
            EnergyKind::Lagrange => EnergyKind::Hamilton,
            EnergyKind::Hamilton => EnergyKind::Lagrange,
        }
    }

    /// Name of the positively homogeneous, positive-definite class.
    pub fn metric_name(self) -> &'static str {
        match self {
            EnergyKind::Lagrange => "Finsler",
            EnergyKind::Hamilton => "Cartan",
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum LegendreError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("singular Jacobian at iterate {last:?}")]
    SingularJacobian { last: Vec<f64> },
    #[error("no convergence after {iterations} iterations, residual {residual:.3e}, last iterate {last:?}")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        last: Vec<f64>,
    },
    #[error("registered inverse map does not invert the fiber map: {0}")]
    BadInverseMap(String),
}

/// A smooth function on the total space of E or E*, queried pointwise.
pub trait FiberEnergy: Send + Sync {
    fn kind(&self) -> EnergyKind;
    /// `(m, r)`: base dimension and fiber rank.
    fn dims(&self) -> (usize, usize);
    fn value(&self, x: &[f64], y: &[f64]) -> Result<f64, LegendreError>;
    /// Second fiber derivatives `L_ab`.
    fn hessian(&self, x: &[f64], y: &[f64]) -> Result<DMatrix<f64>, LegendreError>;
    /// `d L_ab / d y^c` for every `c`, when available exactly.
    fn hessian_derivative(
        &self,
        _x: &[f64],
        _y: &[f64],
    ) -> Option<Result<Vec<DMatrix<f64>>, LegendreError>> {
        None
    }
    /// Residual tolerance factor used when solving on this energy.
    fn solve_tolerance(&self) -> f64 {
        1e-10
    }
}

/// A fundamental function given by an expression, with its fiber derivatives.
#[derive(Clone, Debug)]
pub struct FundamentalFunction {
    pub kind: EnergyKind,
    pub expr: Expr,
    pub x_vars: Vec<String>,
    pub fiber_vars: Vec<String>,
    /// First fiber derivatives.
    pub gradient: Vec<Expr>,
    /// Second fiber derivatives `[a][b]`.
    pub hessian: Vec<Vec<Expr>>,
    compiled: Arc<CompiledEnergy>,
}

pub type Lagrangian = FundamentalFunction;
pub type Hamiltonian = FundamentalFunction;

#[derive(Debug)]
struct CompiledEnergy {
    value: Compiled,
    hessian: Vec<Vec<Compiled>>,
    /// `[c][a][b]`
    third: Vec<Vec<Vec<Compiled>>>,
}

impl FundamentalFunction {
    /// `expr` must only use `x1..xm` and the fiber coordinates of `kind`.
    pub fn new(
        kind: EnergyKind,
        expr: Expr,
        m: usize,
        r: usize,
    ) -> Result<FundamentalFunction, EvalError> {
        let x_vars: Vec<String> = (1..=m).map(|i| format!("x{i}")).collect();
        let fiber_vars: Vec<String> = (1..=r)
            .map(|a| format!("{}{a}", kind.fiber_prefix()))
            .collect();
        let all: Vec<String> = x_vars.iter().chain(&fiber_vars).cloned().collect();
        if let Some(v) = expr.free_vars().into_iter().find(|v| !all.contains(v)) {
            return Err(EvalError::UnboundVariable(v));
        }
        let gradient: Vec<Expr> = fiber_vars.iter().map(|v| expr.diff(v)).collect();
        let hessian: Vec<Vec<Expr>> = gradient
            .iter()
            .map(|g| fiber_vars.iter().map(|v| g.diff(v)).collect())
            .collect();
        let compile = |e: &Expr| e.compile(&all);
        let compiled = CompiledEnergy {
            value: compile(&expr)?,
            hessian: hessian
                .iter()
                .map(|row| row.iter().map(compile).collect::<Result<_, _>>())
                .collect::<Result<_, _>>()?,
            third: fiber_vars
                .iter()
                .map(|c| {
                    hessian
                        .iter()
                        .map(|row| {
                            row.iter()
                                .map(|e| compile(&e.diff(c)))
                                .collect::<Result<_, _>>()
                        })
                        .collect::<Result<_, _>>()
                })
                .collect::<Result<_, _>>()?,
        };
        Ok(FundamentalFunction {
            kind,
            expr,
            x_vars,
            fiber_vars,
            gradient,
            hessian,
            compiled: Arc::new(compiled),
        })
    }

    pub fn lagrangian(expr: Expr, m: usize, r: usize) -> Result<Lagrangian, EvalError> {
        FundamentalFunction::new(EnergyKind::Lagrange, expr, m, r)
    }

    pub fn hamiltonian(expr: Expr, m: usize, r: usize) -> Result<Hamiltonian, EvalError> {
        FundamentalFunction::new(EnergyKind::Hamilton, expr, m, r)
    }

    pub fn all_vars(&self) -> Vec<String> {
        self.x_vars
            .iter()
            .chain(&self.fiber_vars)
            .cloned()
            .collect()
    }

    /// Mixed derivative `d^2 / dx^i d(fiber)_b`.
    pub fn mixed(&self, i: usize, b: usize) -> Expr {
        self.gradient[b].diff(&self.x_vars[i])
    }

    /// The fiber map as expressions: `y^a L_ab` for each `b`.
    pub fn phi_exprs(&self) -> Vec<Expr> {
        let r = self.fiber_vars.len();
        (0..r)
            .map(|b| {
                Expr::sum((0..r).map(|a| Expr::var(&self.fiber_vars[a]) * &self.hessian[a][b]))
            })
            .collect()
    }

    fn point(x: &[f64], y: &[f64]) -> Vec<f64> {
        x.iter().chain(y).copied().collect()
    }
}

impl FiberEnergy for FundamentalFunction {
    fn kind(&self) -> EnergyKind {
        self.kind
    }

    fn dims(&self) -> (usize, usize) {
        (self.x_vars.len(), self.fiber_vars.len())
    }

    fn value(&self, x: &[f64], y: &[f64]) -> Result<f64, LegendreError> {
        Ok(self.compiled.value.eval(&Self::point(x, y))?)
    }

    fn hessian(&self, x: &[f64], y: &[f64]) -> Result<DMatrix<f64>, LegendreError> {
        let pt = Self::point(x, y);
        let r = y.len();
        let mut h = DMatrix::zeros(r, r);
        for a in 0..r {
            for b in 0..r {
                h[(a, b)] = self.compiled.hessian[a][b].eval(&pt)?;
            }
        }
        Ok(h)
    }

    fn hessian_derivative(
        &self,
        x: &[f64],
        y: &[f64],
    ) -> Option<Result<Vec<DMatrix<f64>>, LegendreError>> {
        let pt = Self::point(x, y);
        let r = y.len();
        let eval = || {
            self.compiled
                .third
                .iter()
                .map(|slab| {
                    let mut d = DMatrix::zeros(r, r);
                    for a in 0..r {
                        for b in 0..r {
                            d[(a, b)] = slab[a][b].eval(&pt)?;
                        }
                    }
                    Ok(d)
                })
                .collect()
        };
        Some(eval())
    }
}

/// Step for finite-difference Hessians of numeric energies.
const FD_HESSIAN_STEP: f64 = 1e-3;

/// Central-difference fiber Hessian of a pointwise value.
pub fn finite_difference_hessian(
    f: &dyn Fn(&[f64]) -> Result<f64, LegendreError>,
    y: &[f64],
    h: f64,
) -> Result<DMatrix<f64>, LegendreError> {
    let r = y.len();
    let mut out = DMatrix::zeros(r, r);
    let shifted = |a: usize, sa: f64, b: usize, sb: f64| {
        let mut z = y.to_vec();
        z[a] += sa * h;
        z[b] += sb * h;
        f(&z)
    };
    for a in 0..r {
        for b in a..r {
            let v =
                (shifted(a, 1.0, b, 1.0)? - shifted(a, 1.0, b, -1.0)? - shifted(a, -1.0, b, 1.0)?
                    + shifted(a, -1.0, b, -1.0)?)
                    / (4.0 * h * h);
            out[(a, b)] = v;
            out[(b, a)] = v;
        }
    }
    Ok(out)
}

/// Result of the fiber Hessian query.
#[derive(Clone, Debug, PartialEq)]
pub struct FiberHessian {
    pub matrix: DMatrix<f64>,
    pub inverse: Option<DMatrix<f64>>,
    pub regular: bool,
}

pub fn fiber_hessian(
    e: &dyn FiberEnergy,
    x: &[f64],
    y: &[f64],
) -> Result<FiberHessian, LegendreError> {
    let matrix = e.hessian(x, y)?;
    let r = matrix.nrows() as i32;
    let scale = matrix.amax().max(f64::MIN_POSITIVE).powi(r);
    let lu = matrix.clone().lu();
    let regular = lu.determinant().abs() > 1e-12 * scale;
    let inverse = if regular { lu.try_inverse() } else { None };
    Ok(FiberHessian {
        regular: inverse.is_some(),
        matrix,
        inverse,
    })
}

/// The Legendre morphism: `p_b = y^a L_ab(x, y)` (or `y^b = p_a H^ab`).
pub fn phi(e: &dyn FiberEnergy, x: &[f64], y: &[f64]) -> Result<Vec<f64>, LegendreError> {
    let h = e.hessian(x, y)?;
    Ok((h.transpose() * DVector::from_column_slice(y))
        .iter()
        .copied()
        .collect())
}

/// A converged fiber solve.
#[derive(Clone, Debug, PartialEq)]
pub struct FiberSolve {
    pub y: Vec<f64>,
    /// Number of Newton passes, counting the pass that detected convergence.
    pub iterations: usize,
    /// `‖y·Hessian − p‖∞` at the returned point.
    pub residual: f64,
}

const MAX_ITERATIONS: usize = 50;

fn residual_vector(
    e: &dyn FiberEnergy,
    x: &[f64],
    y: &[f64],
    p: &[f64],
) -> Result<DVector<f64>, LegendreError> {
    let image = phi(e, x, y)?;
    Ok(DVector::from_iterator(
        p.len(),
        image.iter().zip(p).map(|(a, b)| a - b),
    ))
}

fn jacobian(
    e: &dyn FiberEnergy,
    x: &[f64],
    y: &[f64],
    p: &[f64],
) -> Result<DMatrix<f64>, LegendreError> {
    let r = y.len();
    match e.hessian_derivative(x, y) {
        Some(d) => {
            let d = d?;
            let h = e.hessian(x, y)?;
            // J[b][c] = L_cb + y^a dL_ab/dy^c
            Ok(DMatrix::from_fn(r, r, |b, c| {
                h[(c, b)] + (0..r).map(|a| y[a] * d[c][(a, b)]).sum::<f64>()
            }))
        }
        None => {
            let step = 1e-5;
            let mut j = DMatrix::zeros(r, r);
            for c in 0..r {
                let mut yp = y.to_vec();
                let mut ym = y.to_vec();
                yp[c] += step;
                ym[c] -= step;
                let col = (residual_vector(e, x, &yp, p)? - residual_vector(e, x, &ym, p)?)
                    / (2.0 * step);
                j.set_column(c, &col);
            }
            Ok(j)
        }
    }
}

fn newton_direction(j: &DMatrix<f64>, f: &DVector<f64>) -> DVector<f64> {
    let scale = j.amax().max(1.0);
    let lu = j.clone().lu();
    if lu.determinant().abs() > 1e-14 * scale.powi(j.nrows() as i32) {
        if let Some(d) = lu.solve(f) {
            return -d;
        }
    }
    // Levenberg-Marquardt step on a singular Jacobian
    let jt = j.transpose();
    let lambda = 1e-8 * scale * scale;
    let a = &jt * j + DMatrix::identity(j.nrows(), j.nrows()) * lambda;
    match a.lu().solve(&(jt * f)) {
        Some(d) => -d,
        None => DVector::zeros(f.len()),
    }
}

/// Solves `y^a L_ab(x, y) = p_b` by damped Newton from `y0 = p`, falling back
/// to `hint` if the first attempt fails.
pub fn solve_fiber(
    e: &dyn FiberEnergy,
    x: &[f64],
    p: &[f64],
    hint: Option<&[f64]>,
) -> Result<FiberSolve, LegendreError> {
    match newton(e, x, p, p) {
        Ok(s) => Ok(s),
        Err(err) => match hint {
            Some(h) => newton(e, x, p, h),
            None => Err(err),
        },
    }
}

fn newton(
    e: &dyn FiberEnergy,
    x: &[f64],
    p: &[f64],
    y0: &[f64],
) -> Result<FiberSolve, LegendreError> {
    let pnorm = p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = e.solve_tolerance() * (1.0 + pnorm);
    let mut y = DVector::from_column_slice(y0);
    let mut f = residual_vector(e, x, y.as_slice(), p)?;
    for pass in 1..=MAX_ITERATIONS {
        let norm = f.amax();
        if norm <= tol {
            // one polishing step, kept only if it helps
            let j = jacobian(e, x, y.as_slice(), p)?;
            let cand = &y + newton_direction(&j, &f);
            if let Ok(fc) = residual_vector(e, x, cand.as_slice(), p) {
                if fc.amax() < norm {
                    y = cand;
                    f = fc;
                }
            }
            return Ok(FiberSolve {
                y: y.iter().copied().collect(),
                iterations: pass,
                residual: f.amax(),
            });
        }
        let j = jacobian(e, x, y.as_slice(), p)?;
        let d = newton_direction(&j, &f);
        if d.amax() == 0.0 {
            return Err(LegendreError::SingularJacobian {
                last: y.iter().copied().collect(),
            });
        }
        let mut t = 1.0;
        loop {
            let cand = &y + &d * t;
            if let Ok(fc) = residual_vector(e, x, cand.as_slice(), p) {
                if fc.amax() < norm || t < 1e-6 {
                    y = cand;
                    f = fc;
                    break;
                }
            }
            t *= 0.5;
            if t < 1e-6 {
                y += &d * t;
                f = residual_vector(e, x, y.as_slice(), p)?;
                break;
            }
        }
    }
    Err(LegendreError::NoConvergence {
        iterations: MAX_ITERATIONS,
        residual: f.amax(),
        last: y.iter().copied().collect(),
    })
}

/// The Legendre transformation `p·y − L(x, y)` with `y` from [`solve_fiber`],
/// as a numeric energy on the dual side.
#[derive(Clone)]
pub struct LegendreTransform {
    pub source: Arc<dyn FiberEnergy>,
}

impl LegendreTransform {
    pub fn new(source: Arc<dyn FiberEnergy>) -> LegendreTransform {
        LegendreTransform { source }
    }
}

impl FiberEnergy for LegendreTransform {
    fn kind(&self) -> EnergyKind {
        self.source.kind().dual()
    }

    fn dims(&self) -> (usize, usize) {
        self.source.dims()
    }

    fn value(&self, x: &[f64], p: &[f64]) -> Result<f64, LegendreError> {
        let s = solve_fiber(self.source.as_ref(), x, p, None)?;
        let py: f64 = p.iter().zip(&s.y).map(|(a, b)| a * b).sum();
        Ok(py - self.source.value(x, &s.y)?)
    }

    fn hessian(&self, x: &[f64], p: &[f64]) -> Result<DMatrix<f64>, LegendreError> {
        finite_difference_hessian(&|q| self.value(x, q), p, FD_HESSIAN_STEP)
    }

    fn solve_tolerance(&self) -> f64 {
        1e-8
    }
}

/// Symbolic Legendre transformation from a user-registered inverse of the
/// fiber map (`y^a` as expressions in `(x, p)`), validated at sampled points.
pub fn legendre_transform_symbolic(
    source: &FundamentalFunction,
    inverse_map: &[Expr],
    sampler: &Sampler,
) -> Result<FundamentalFunction, LegendreError> {
    let (m, r) = source.dims();
    let dual = source.kind.dual();
    let dual_fiber: Vec<String> = (1..=r)
        .map(|a| format!("{}{a}", dual.fiber_prefix()))
        .collect();
    let subst = |e: &Expr| {
        e.subst_with(&|v: &str| {
            source
                .fiber_vars
                .iter()
                .position(|f| f == v)
                .map(|a| inverse_map[a].clone())
        })
    };
    // the map must send (x, p) to a fiber point whose image is p
    let vars: Vec<String> = source.x_vars.iter().chain(&dual_fiber).cloned().collect();
    let probe = Probe::new(vars.clone(), sampler.generate(&vars), 1e-9);
    let pairs: Vec<(Expr, Expr)> = source
        .phi_exprs()
        .iter()
        .zip(&dual_fiber)
        .map(|(e, p)| (subst(e), Expr::var(p)))
        .collect();
    let c = probe.check_vec("inverse map", vec![], &pairs);
    if !c.pass {
        return Err(LegendreError::BadInverseMap(c.to_string()));
    }
    let py = Expr::sum(
        dual_fiber
            .iter()
            .zip(inverse_map)
            .map(|(p, y)| Expr::var(p) * y),
    );
    Ok(FundamentalFunction::new(
        dual,
        py - subst(&source.expr),
        m,
        r,
    )?)
}

fn fiber_sampler(sampler: &Sampler, fiber: &[String]) -> Sampler {
    sampler.clone().with_floor(fiber, 0.1)
}

fn split(point: &[f64], m: usize) -> (&[f64], &[f64]) {
    point.split_at(m)
}

/// Accumulates numeric comparisons into a check, recording solver failures.
struct NumericCheck {
    family: String,
    vars: Vec<String>,
    acc: Comparison,
    failure: Option<(Vec<f64>, String)>,
    tol: f64,
}

impl NumericCheck {
    fn new(family: &str, vars: Vec<String>, tol: f64) -> NumericCheck {
        NumericCheck {
            family: family.to_string(),
            vars,
            acc: Comparison::exact(),
            failure: None,
            tol,
        }
    }

    fn record(&mut self, pt: &[f64], got: Result<Vec<f64>, LegendreError>, want: &[f64]) {
        match got {
            Ok(v) => {
                for (a, b) in v.iter().zip(want) {
                    self.acc.record(&self.vars, pt, *a, *b);
                }
            }
            Err(e) => {
                if self.failure.is_none() {
                    self.failure = Some((pt.to_vec(), e.to_string()));
                }
            }
        }
    }

    fn finish(self) -> Check {
        match self.failure {
            None => Check::from_comparison(&self.family, vec![], self.acc, self.tol),
            Some((pt, note)) => Check {
                family: self.family,
                index: vec![],
                pass: false,
                worst_residual: f64::INFINITY,
                worst_absolute: f64::INFINITY,
                tolerance: self.tol,
                witness: self.vars.iter().cloned().zip(pt).collect(),
                note: Some(note),
            },
        }
    }
}

/// `φ_H∘φ_L = Id`, `φ_L∘φ_H = Id` and `L̃^ab = H^ab∘φ_L` at sampled points.
pub fn check_round_trip(
    l: &dyn FiberEnergy,
    h: &dyn FiberEnergy,
    sampler: &Sampler,
    tol: f64,
) -> Report {
    let (m, r) = l.dims();
    let xs: Vec<String> = (1..=m).map(|i| format!("x{i}")).collect();
    let names = |k: EnergyKind| -> Vec<String> {
        (1..=r)
            .map(|a| format!("{}{a}", k.fiber_prefix()))
            .collect()
    };
    let mut report = Report::new();
    for (first, second, fam) in [(l, h, "phiH∘phiL = Id"), (h, l, "phiL∘phiH = Id")] {
        let fiber = names(first.kind());
        let vars: Vec<String> = xs.iter().chain(&fiber).cloned().collect();
        let mut c = NumericCheck::new(fam, vars.clone(), tol);
        for pt in fiber_sampler(sampler, &fiber).generate(&vars) {
            let (x, y) = split(&pt, m);
            let back = phi(first, x, y).and_then(|q| phi(second, x, &q));
            c.record(&pt, back, y);
        }
        report.push(c.finish());
    }
    let fiber = names(l.kind());
    let vars: Vec<String> = xs.iter().chain(&fiber).cloned().collect();
    let mut c = NumericCheck::new("inverse hessian = dual hessian∘phiL", vars.clone(), tol);
    for pt in fiber_sampler(sampler, &fiber).generate(&vars) {
        let (x, y) = split(&pt, m);
        let info = fiber_hessian(l, x, y);
        let got = phi(l, x, y)
            .and_then(|q| h.hessian(x, &q))
            .map(|m| m.iter().copied().collect::<Vec<_>>());
        match info {
            Ok(FiberHessian {
                inverse: Some(inv), ..
            }) => {
                let want: Vec<f64> = inv.transpose().iter().copied().collect();
                c.record(&pt, got, &want);
            }
            Ok(_) => c.record(
                &pt,
                Err(LegendreError::SingularJacobian { last: y.to_vec() }),
                &[],
            ),
            Err(e) => c.record(&pt, Err(e), &[]),
        }
    }
    report.push(c.finish());
    report
}

/// `H∘φ_L = L` (or `L∘φ_H = H`) at sampled points.
pub fn check_transform_identity(
    l: &dyn FiberEnergy,
    h: &dyn FiberEnergy,
    sampler: &Sampler,
    tol: f64,
) -> Check {
    let (m, r) = l.dims();
    let fiber: Vec<String> = (1..=r)
        .map(|a| format!("{}{a}", l.kind().fiber_prefix()))
        .collect();
    let vars: Vec<String> = (1..=m)
        .map(|i| format!("x{i}"))
        .chain(fiber.iter().cloned())
        .collect();
    let fam = match l.kind() {
        EnergyKind::Lagrange => "H∘phiL = L",
        EnergyKind::Hamilton => "L∘phiH = H",
    };
    let mut c = NumericCheck::new(fam, vars.clone(), tol);
    for pt in fiber_sampler(sampler, &fiber).generate(&vars) {
        let (x, y) = split(&pt, m);
        let got = phi(l, x, y).and_then(|q| h.value(x, &q)).map(|v| vec![v]);
        match l.value(x, y) {
            Ok(want) => c.record(&pt, got, &[want]),
            Err(e) => c.record(&pt, Err(e), &[]),
        }
    }
    c.finish()
}

/// Euler identity for 2-homogeneity, positive-definiteness of the fiber
/// Hessian, and the fiber map equal to the fiber gradient. The verdict is
/// "Finsler"/"Cartan" or "not Finsler"/"not Cartan".
pub fn check_homogeneity(e: &FundamentalFunction, sampler: &Sampler, tol: f64) -> Report {
    let s = fiber_sampler(sampler, &e.fiber_vars);
    let vars = e.all_vars();
    let points = s.generate(&vars);
    let probe = Probe::new(vars.clone(), points.clone(), tol);
    let mut r = Report::new();
    let euler = Expr::sum(
        e.fiber_vars
            .iter()
            .zip(&e.gradient)
            .map(|(v, g)| Expr::var(v) * g),
    ) - e.expr.clone() * 2.0;
    r.push(probe.check("euler 2-homogeneity", vec![], &euler, &Expr::zero()));
    let m = e.x_vars.len();
    let mut pd = true;
    let mut witness = Vec::new();
    for pt in &points {
        let (x, y) = split(pt, m);
        let ok = match e.hessian(x, y) {
            Ok(h) => match h.cholesky() {
                Some(c) => c.l().diagonal().iter().all(|d| d * d > 1e-10),
                None => false,
            },
            Err(_) => false,
        };
        if !ok {
            pd = false;
            witness = vars.iter().cloned().zip(pt.iter().copied()).collect();
            break;
        }
    }
    let mut c = Check::flag("positive definite hessian", vec![], pd, None);
    c.witness = witness;
    r.push(c);
    let phi = e.phi_exprs();
    r.push(probe.check_all(
        "fiber map = fiber gradient",
        vec![],
        phi.iter().zip(&e.gradient),
    ));
    let name = e.kind.metric_name();
    // the fiber-gradient identity follows from homogeneity; it does not decide the verdict
    let accepted = r.checks[0].pass && r.checks[1].pass;
    r.verdict = Some(if accepted {
        name.to_string()
    } else {
        format!("not {name}")
    });
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::ex;

    fn lag(s: &str) -> Lagrangian {
        FundamentalFunction::lagrangian(ex(s), 1, 2).unwrap()
    }

    fn ham(s: &str) -> Hamiltonian {
        FundamentalFunction::hamiltonian(ex(s), 1, 2).unwrap()
    }

    #[test]
    fn hessians() {
        let e = fiber_hessian(&lag("0.5*(y1^2 + y2^2)"), &[0.3], &[1.0, 2.0]).unwrap();
        assert_eq!(e.matrix, DMatrix::identity(2, 2));
        assert_eq!(e.inverse.unwrap(), DMatrix::identity(2, 2));
        let d = fiber_hessian(&lag("0.5*(2*y1^2 + y2^2)"), &[0.0], &[1.0, 1.0]).unwrap();
        assert_eq!(
            d.inverse.unwrap(),
            DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 1.0])
        );
        let x = fiber_hessian(&lag("y1*y2"), &[0.0], &[0.5, -1.0]).unwrap();
        let swap = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(x.regular);
        assert_eq!(x.matrix, swap);
        assert_eq!(x.inverse.unwrap(), swap);
        let s = fiber_hessian(&lag("y1^2"), &[0.0], &[1.0, 1.0]).unwrap();
        assert!(!s.regular && s.inverse.is_none());
    }

    #[test]
    fn legendre_morphisms() {
        assert_eq!(
            phi(&lag("0.5*(y1^2 + y2^2)"), &[1.0], &[3.0, -2.0]).unwrap(),
            vec![3.0, -2.0]
        );
        assert_eq!(
            phi(&lag("0.5*(2*y1^2 + y2^2)"), &[1.0], &[1.0, 1.0]).unwrap(),
            vec![2.0, 1.0]
        );
        assert_eq!(
            phi(&ham("0.5*(0.5*p1^2 + p2^2)"), &[1.0], &[2.0, 1.0]).unwrap(),
            vec![1.0, 1.0]
        );
    }

    #[test]
    fn newton_examples() {
        let e = solve_fiber(&lag("0.5*(y1^2 + y2^2)"), &[0.0], &[3.0, -1.0], None).unwrap();
        assert_eq!(e.y, vec![3.0, -1.0]);
        assert_eq!(e.iterations, 1);
        let d = solve_fiber(&lag("0.5*(2*y1^2 + y2^2)"), &[0.0], &[2.0, 1.0], None).unwrap();
        assert!((d.y[0] - 1.0).abs() < 1e-12 && (d.y[1] - 1.0).abs() < 1e-12);
        assert!(d.iterations <= 2);
        // y1 * 3 y1^2 = 4
        let q = solve_fiber(&lag("0.25*(y1^4 + y2^4)"), &[0.0], &[4.0, 0.0], None).unwrap();
        assert!((q.y[0] - (4.0f64 / 3.0).cbrt()).abs() < 1e-9, "{:?}", q);
        assert!(q.y[1].abs() < 1e-6);
        assert!(q.iterations <= 15, "{}", q.iterations);
    }

    #[test]
    fn transforms() {
        let l = Arc::new(lag("0.5*(y1^2 + y2^2)"));
        let h = LegendreTransform::new(l.clone());
        assert!((h.value(&[0.0], &[3.0, 4.0]).unwrap() - 12.5).abs() < 1e-12);
        let v = Arc::new(FundamentalFunction::lagrangian(ex("0.5*y1^2 + x1^2"), 1, 1).unwrap());
        let hv = LegendreTransform::new(v.clone());
        assert!((hv.value(&[2.0], &[3.0]).unwrap() - (4.5 - 4.0)).abs() < 1e-12);
        let s = Sampler::new(20, 1);
        assert!(check_transform_identity(l.as_ref(), &h, &s, 1e-8).pass);
        let bad = check_transform_identity(v.as_ref(), &hv, &s, 1e-8);
        assert!(!bad.pass);
        assert!(bad.worst_absolute >= 1.0);
        // double transform returns to L on a convex quadratic
        let back = LegendreTransform::new(Arc::new(LegendreTransform::new(Arc::new(lag(
            "0.5*(2*y1^2 + y2^2) + y1*y2",
        )))));
        let want = 0.5 * (2.0 * 0.7f64.powi(2) + 0.25) + 0.7 * -0.5;
        assert!((back.value(&[0.1], &[0.7, -0.5]).unwrap() - want).abs() < 1e-6);
    }

    #[test]
    fn symbolic_transform_from_registered_inverse() {
        let l = lag("0.5*(2*y1^2 + y2^2)");
        let s = Sampler::new(30, 2);
        let h = legendre_transform_symbolic(&l, &[ex("0.5*p1"), ex("p2")], &s).unwrap();
        assert!(crate::expr::equivalent(&h.expr, &ex("0.5*(0.5*p1^2 + p2^2)"), &s, 1e-12).unwrap());
        assert!(matches!(
            legendre_transform_symbolic(&l, &[ex("p1"), ex("p2")], &s),
            Err(LegendreError::BadInverseMap(_))
        ));
    }

    #[test]
    fn round_trips() {
        let s = Sampler::new(40, 3);
        let r = check_round_trip(
            &lag("0.5*(y1^2 + y2^2)"),
            &ham("0.5*(p1^2 + p2^2)"),
            &s,
            1e-8,
        );
        assert!(r.passed(), "{r}");
        assert_eq!(r.worst_overall(), 0.0);
        let r = check_round_trip(
            &lag("0.5*(2*y1^2 + y2^2)"),
            &ham("0.5*(0.5*p1^2 + p2^2)"),
            &s,
            1e-8,
        );
        assert!(r.passed(), "{r}");
        let r = check_round_trip(
            &lag("0.5*(y1^2 + y2^2)"),
            &ham("0.5*(p1^2 + p2^2) + p1^3"),
            &s,
            1e-8,
        );
        assert!(!r.passed());
        // numeric transform pairs with its source
        let l = Arc::new(lag("0.5*(2*y1^2 + y2^2) + 0.25*y1*y2"));
        let h = LegendreTransform::new(l.clone());
        let r = check_round_trip(l.as_ref(), &h, &s.clone().with_points(10), 1e-6);
        assert!(r.passed(), "{r}");
    }

    #[test]
    fn homogeneity_verdicts() {
        let s = Sampler::new(40, 4);
        let r = check_homogeneity(&lag("0.5*(y1^2 + y2^2)"), &s, 1e-10);
        assert_eq!(r.verdict.as_deref(), Some("Finsler"));
        assert_eq!(r.worst("euler 2-homogeneity"), 0.0);
        let r = check_homogeneity(&lag("0.5*(y1^2 - y2^2)"), &s, 1e-10);
        assert_eq!(r.verdict.as_deref(), Some("not Finsler"));
        assert!(r.family("euler 2-homogeneity").all(|c| c.pass));
        let r = check_homogeneity(&lag("0.5*(y1^2 + y2^2) + x1*y1"), &s, 1e-10);
        assert_eq!(r.verdict.as_deref(), Some("not Finsler"));
        let r = check_homogeneity(&ham("0.5*(p1^2 + p2^2)"), &s, 1e-10);
        assert_eq!(r.verdict.as_deref(), Some("Cartan"));
    }
}
