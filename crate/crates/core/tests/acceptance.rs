//! Acceptance criteria 1 to 9, run in order on the bundled models. Each
//! criterion prints one PASS/FAIL line; the test fails if any criterion does.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use gla::check::Report;
use gla::duality::Side;
use gla::expr::{finite_difference, with_derivative_log, Binding, Expr, Sampler};
use gla::legendre::{
    check_homogeneity, check_round_trip, check_transform_identity, phi, solve_fiber, FiberEnergy,
};
use gla::modelio::{parse_model, print_model, ErrorCode, Model};
use gla::prolong::{LiftChecks, Variance};

const SEED: u64 = 2024;
const POINTS: usize = 100;

/// Models carrying the algebroid examples the lift criteria run on.
const LIFT_MODELS: &[&str] = &["classical", "liealgebroid", "generalized", "affine", "so3"];

fn models_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("models")
}

fn load(name: &str) -> Model {
    let path = models_dir().join(format!("{name}.model"));
    parse_model(&fs::read_to_string(&path).unwrap())
        .unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn valid_model_names() -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(models_dir())
        .unwrap()
        .filter_map(|e| {
            let p = e.unwrap().path();
            (p.extension()? == "model")
                .then(|| p.file_stem().unwrap().to_string_lossy().into_owned())
        })
        .collect();
    v.sort();
    v
}

fn sampler() -> Sampler {
    Sampler::new(POINTS, SEED)
}

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new() -> Outcome {
        Outcome {
            pass: true,
            detail: String::new(),
        }
    }

    fn require(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.pass = false;
            if self.detail.len() < 600 {
                self.detail.push_str(&format!("; {}", what.into()));
            }
        }
    }

    fn report(&mut self, label: &str, r: &Report) {
        for c in r.failures().take(2) {
            self.require(false, format!("{label}: {c}"));
        }
    }
}

fn run(n: usize, title: &str, budget: Duration, f: impl FnOnce(&mut Outcome)) -> bool {
    let start = Instant::now();
    let mut o = Outcome::new();
    f(&mut o);
    let elapsed = start.elapsed();
    o.require(
        elapsed <= budget,
        format!("took {elapsed:.2?}, budget {budget:?}"),
    );
    println!(
        "{} criterion {n}: {title} ({elapsed:.2?}){}",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail
    );
    o.pass
}

fn criterion1(o: &mut Outcome) {
    let s = sampler();
    for name in valid_model_names() {
        if name == "broken" {
            continue;
        }
        let a = load(&name).algebroid;
        let mut r = a.check_antisymmetry();
        r.extend(a.check_compatibility(&s, 1e-8));
        r.extend(a.check_jacobi(&s, 1e-8, 3));
        r.extend(a.check_leibniz(&s, 1e-8, 3));
        o.report(&name, &r);
    }
    let broken = load("broken").algebroid;
    let p1 = broken.check_compatibility(&s, 1e-8);
    let worst = p1.worst_overall();
    o.require(
        !p1.passed() && worst >= 0.5,
        format!("broken model compatibility residual {worst:.3e} < 0.5"),
    );
}

/// The complete lift on a Lie algebroid (`h = eta = Id`, g = Id):
/// `(u^a rho_a^i) d_i + y^b (rho_b^i d_i u^a + u^d L_bd^a) dot_a`.
fn lie_algebroid_display(m: &Model, u: &[Expr]) -> Vec<Expr> {
    let a = &m.algebroid;
    let (p, dim) = (a.rank(), a.dim());
    let xs = a.x_vars();
    let mut out: Vec<Expr> = (0..dim)
        .map(|i| Expr::sum((0..p).map(|al| &u[al] * a.rho_on_m(al, i))))
        .collect();
    for al in 0..p {
        out.push(Expr::sum((0..p).map(|b| {
            let y = Expr::var(&format!("y{}", b + 1));
            let drift = Expr::sum((0..dim).map(|i| a.rho_on_m(b, i) * u[al].diff(&xs[i])));
            let twist = Expr::sum((0..p).map(|d| &u[d] * a.l_on_m(b, d, al)));
            y * (drift + twist)
        })));
    }
    out
}

/// The classical complete lift `X^i d_i + y^j (d_j X^i) dot_i`.
fn classical_display(u: &[Expr]) -> Vec<Expr> {
    let m = u.len();
    let mut out = u.to_vec();
    for ui in u {
        out.push(Expr::sum((0..m).map(|j| {
            Expr::var(&format!("y{}", j + 1)) * ui.diff(&format!("x{}", j + 1))
        })));
    }
    out
}

fn criterion2(o: &mut Outcome) {
    let s = sampler();
    for name in LIFT_MODELS {
        let m = load(name);
        for v in [Variance::Primal, Variance::Dual] {
            let b = m.bundle(v);
            let checks = LiftChecks::new(b, &s, 1e-8);
            let mut rng = s.rng(2);
            let mut r = Report::new();
            for t in 1..=10 {
                let u = b.random_section(&mut rng);
                let w = b.random_form(&mut rng);
                r.extend(checks.complete_lift_conditions(t, &u, &w));
            }
            o.report(&format!("{name} {v:?}"), &r);
        }
    }
    for (name, display) in [("liealgebroid", 0), ("classical", 1)] {
        let m = load(name);
        let b = &m.primal;
        let probe = b.probe(&s, 1e-10);
        let mut rng = s.rng(12);
        for t in 1..=10 {
            let u = b.random_section(&mut rng);
            let lift = b.complete_lift_section(&u);
            let want = if display == 0 {
                lie_algebroid_display(&m, &u)
            } else {
                classical_display(&u)
            };
            let got: Vec<Expr> = lift.coefficients().cloned().collect();
            let pairs: Vec<(Expr, Expr)> = got.into_iter().zip(want).collect();
            let c = probe.check_vec(&format!("{name} displayed complete lift"), vec![t], &pairs);
            o.require(c.pass, c.to_string());
        }
    }
}

fn criterion3(o: &mut Outcome) {
    let s = sampler();
    for name in LIFT_MODELS {
        let m = load(name);
        for v in [Variance::Primal, Variance::Dual] {
            let b = m.bundle(v);
            let checks = LiftChecks::new(b, &s, 1e-8);
            let mut rng = s.rng(3);
            let mut r = Report::new();
            for t in 1..=10 {
                let u = b.random_section(&mut rng);
                let w = b.random_section(&mut rng);
                r.extend(checks.lift_brackets(t, &u, &w));
            }
            o.require(
                r.checks.len() == 30,
                format!("{name} {v:?}: expected 30 checks"),
            );
            o.report(&format!("{name} {v:?}"), &r);
        }
    }
}

fn criterion4(o: &mut Outcome) {
    let s = sampler();
    for name in LIFT_MODELS {
        let m = load(name);
        for v in [Variance::Primal, Variance::Dual] {
            let b = m.bundle(v);
            let checks = LiftChecks::new(b, &s, 1e-8);
            let mut rng = s.rng(4);
            let mut r = Report::new();
            for t in 1..=10 {
                let u = b.random_section(&mut rng);
                let w = b.random_section(&mut rng);
                let fm = gla::expr::random_polynomial(b.x_vars(), 2, &mut rng);
                let f1 = gla::expr::random_polynomial(b.algebroid.k_vars(), 2, &mut rng);
                let f2 = gla::expr::random_polynomial(b.algebroid.k_vars(), 2, &mut rng);
                r.extend(checks.lemma_vertical(t, &u, &w, &fm, &f1));
                r.extend(checks.lemma_complete(t, &u, &f1, &f2));
            }
            o.report(&format!("{name} {v:?}"), &r);
        }
    }
}

fn criterion5(o: &mut Outcome) {
    let s = sampler();
    for name in LIFT_MODELS {
        let m = load(name);
        for v in [Variance::Primal, Variance::Dual] {
            let b = m.bundle(v);
            let checks = LiftChecks::new(b, &s, 1e-10);
            let mut rng = s.rng(5);
            let mut r = Report::new();
            for t in 1..=10 {
                let u = b.random_section(&mut rng);
                let z = b.random_prolong_section(&mut rng);
                r.extend(checks.almost_tangent(t, &u, &z));
            }
            for fam in ["almost tangent", "anchor of complete lift"] {
                let fam = if v == Variance::Dual {
                    format!("{fam}*")
                } else {
                    fam.to_string()
                };
                o.require(
                    r.family(&fam).count() == 10,
                    format!("{name}: missing family {fam}"),
                );
            }
            o.report(&format!("{name} {v:?}"), &r);
        }
    }
}

fn max_iterations(e: &dyn FiberEnergy, s: &Sampler, floor: f64, o: &mut Outcome) -> usize {
    let (m, r) = e.dims();
    let vars: Vec<String> = (1..=m)
        .map(|i| format!("x{i}"))
        .chain((1..=r).map(|a| format!("p{a}")))
        .collect();
    let fiber: Vec<String> = vars[m..].to_vec();
    let mut worst = 0;
    for pt in s.clone().with_floor(&fiber, floor).generate(&vars) {
        let (x, p) = pt.split_at(m);
        match solve_fiber(e, x, p, None) {
            Ok(sol) => worst = worst.max(sol.iterations),
            Err(err) => o.require(false, format!("solve failed at {pt:?}: {err}")),
        }
    }
    worst
}

fn criterion6(o: &mut Outcome) {
    let s = sampler();
    for name in ["euclidean", "diag21"] {
        let m = load(name);
        let (l, h) = (m.lagrangian().unwrap(), m.hamiltonian().unwrap());
        let r = check_round_trip(&l, &h, &s, 1e-8);
        o.require(r.checks.len() == 3, format!("{name}: round trip families"));
        o.report(name, &r);
        let it = max_iterations(&l, &s, 0.1, o);
        o.require(it <= 2, format!("{name}: Newton took {it} iterations"));
        let it = max_iterations(&h, &s, 0.1, o);
        o.require(it <= 2, format!("{name} dual: Newton took {it} iterations"));
    }
    let quartic = load("quartic").lagrangian().unwrap();
    let it = max_iterations(&quartic, &s, 0.5, o);
    o.require(it <= 15, format!("quartic: Newton took {it} iterations"));
    // y^a L_ab = 3 y^3 = 4 on the first fiber axis
    match solve_fiber(&quartic, &[0.0, 0.0], &[4.0, 0.0], None) {
        Ok(sol) => {
            let want = (4.0f64 / 3.0).cbrt();
            o.require(
                (sol.y[0] - want).abs() < 1e-9 && sol.y[1].abs() < 1e-9,
                format!("quartic root {:?}", sol.y),
            );
        }
        Err(e) => o.require(false, format!("quartic root: {e}")),
    }
    let verdict = |name: &str| {
        check_homogeneity(&load(name).lagrangian().unwrap(), &s, 1e-8)
            .verdict
            .unwrap_or_default()
    };
    o.require(
        verdict("euclidean") == "Finsler",
        "euclidean not detected as Finsler",
    );
    o.require(
        verdict("indefinite") == "not Finsler",
        "indefinite accepted as Finsler",
    );
    o.require(
        verdict("tilted") == "not Finsler",
        "tilted accepted as Finsler",
    );
    let e = load("euclidean");
    let c = check_transform_identity(
        &e.lagrangian().unwrap(),
        &e.hamiltonian().unwrap(),
        &s,
        1e-8,
    );
    o.require(c.pass, c.to_string());
    let pot = load("potential");
    let (l, h) = (pot.lagrangian().unwrap(), pot.hamiltonian().unwrap());
    let c = check_transform_identity(&l, &h, &s, 1e-8);
    o.require(!c.pass, "potential: H∘phiL = L unexpectedly holds");
    let vars: Vec<String> = ["x1", "x2", "y1", "y2"]
        .iter()
        .map(|v| v.to_string())
        .collect();
    for pt in s.generate(&vars) {
        let (x, y) = pt.split_at(2);
        let gap = (h.value(x, &phi(&l, x, y).unwrap()).unwrap() - l.value(x, y).unwrap()).abs();
        o.require(
            gap >= x[0] * x[0] - 1e-12,
            format!("potential gap {gap} < x1^2 at {pt:?}"),
        );
    }
}

fn criterion7(o: &mut Outcome) {
    let s = sampler();
    let e = load("euclidean").pair().unwrap();
    for side in [Side::Lagrange, Side::Hamilton] {
        let r = e.morphism_conditions(side, &s, 1e-10);
        for k in 1..=4 {
            let fam = format!("{}.{k}", side.tag());
            o.require(r.family(&fam).count() > 0, format!("missing family {fam}"));
        }
        o.report("euclidean", &r);
    }
    let r = e.legendre_equivalence(&s, 1e-10);
    o.require(
        r.verdict.as_deref() == Some("equivalent"),
        format!("euclidean verdict {:?}", r.verdict),
    );
    let mismatched = load("mismatched").pair().unwrap();
    let r = mismatched.legendre_equivalence(&s, 1e-10);
    o.require(
        r.verdict.as_deref() == Some("not equivalent"),
        format!("mismatched verdict {:?}", r.verdict),
    );
}

/// Replays every logged derivative against central differences.
fn replay(records: &[gla::expr::DerivativeRecord], s: &Sampler, o: &mut Outcome) -> usize {
    let mut compared = 0;
    for (n, rec) in records.iter().enumerate() {
        let mut vars: Vec<String> = rec.expr.free_vars().into_iter().collect();
        if !vars.contains(&rec.var) {
            vars.push(rec.var.clone());
        }
        let pts = s
            .clone()
            .with_points(3)
            .with_seed(SEED + n as u64)
            .generate(&vars);
        for pt in pts {
            let b = Binding::from_slices(&vars, &pt);
            let (Ok(exact), Ok(fd)) = (
                rec.derivative.eval(&b),
                finite_difference(&rec.expr, &rec.var, &b, 1e-5),
            ) else {
                continue;
            };
            compared += 1;
            let rel = (exact - fd).abs() / (1.0 + exact.abs().max(fd.abs()));
            o.require(
                rel <= 1e-5,
                format!("d/d{} of {} : {exact} vs {fd}", rec.var, rec.expr),
            );
        }
    }
    compared
}

fn criterion8(o: &mut Outcome) {
    let s = sampler();
    let small = s.clone().with_points(10);
    let ((), records) = with_derivative_log(4000, || {
        for name in LIFT_MODELS {
            let m = load(name);
            let _ = m.algebroid.validate(&small, 1e-8);
            for v in [Variance::Primal, Variance::Dual] {
                let _ = LiftChecks::new(m.bundle(v), &small, 1e-8).all(&small, 2);
            }
        }
        let _ = load("broken").algebroid.validate(&small, 1e-8);
        for name in ["euclidean", "diag21", "mismatched"] {
            let _ = load(name)
                .pair()
                .unwrap()
                .legendre_equivalence(&small, 1e-10);
        }
        for name in ["euclidean", "quartic", "indefinite", "tilted", "potential"] {
            let _ = check_homogeneity(&load(name).lagrangian().unwrap(), &small, 1e-8);
        }
    });
    o.require(
        records.len() > 100,
        format!("only {} derivatives logged", records.len()),
    );
    let compared = replay(&records, &s, o);
    o.require(
        compared > 100,
        format!("only {compared} derivative comparisons"),
    );
    let k20 = s.clone().with_points(20);
    for name in LIFT_MODELS {
        let m = load(name);
        for v in [Variance::Primal, Variance::Dual] {
            let b = m.bundle(v);
            let checks = LiftChecks::new(b, &k20, 1e-10);
            let mut rng = k20.rng(8);
            for t in 1..=5 {
                let u = b.random_section(&mut rng);
                let c = checks.k_oracle(t, &u);
                o.require(c.pass, format!("{name} {v:?}: {c}"));
            }
        }
    }
}

fn criterion9(o: &mut Outcome) {
    for name in valid_model_names() {
        let m = load(&name);
        let printed = print_model(&m);
        match parse_model(&printed) {
            Ok(again) => {
                o.require(again == m, format!("{name}: round trip changes the model"));
                o.require(
                    print_model(&again) == printed,
                    format!("{name}: printing is not idempotent"),
                );
            }
            Err(e) => o.require(false, format!("{name}: printed model rejected: {e}")),
        }
    }
    let mut seen = 0;
    for entry in fs::read_dir(models_dir().join("invalid")).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        let expected = text
            .lines()
            .next()
            .and_then(|l| l.strip_prefix("# expect: "))
            .and_then(|c| ErrorCode::from_name(c.trim()));
        let Some(expected) = expected else {
            o.require(false, format!("{}: no `# expect:` header", path.display()));
            continue;
        };
        seen += 1;
        match parse_model(&text) {
            Ok(_) => o.require(false, format!("{} accepted", path.display())),
            Err(e) => o.require(
                e.code == expected,
                format!("{}: got {} expected {expected}", path.display(), e.code),
            ),
        }
    }
    o.require(seen >= 9, format!("negative corpus has {seen} files"));
}

#[test]
fn acceptance() {
    let s = |secs| Duration::from_secs(secs);
    let results = [
        run(1, "algebroid axioms", s(5), criterion1),
        run(
            2,
            "complete lift conditions and displayed specializations",
            s(10),
            criterion2,
        ),
        run(
            3,
            "bracket identities of lifts, both variances",
            s(20),
            criterion3,
        ),
        run(
            4,
            "lemmas on vertical and complete lifts",
            s(20),
            criterion4,
        ),
        run(
            5,
            "almost tangent structure and anchor compatibility",
            s(10),
            criterion5,
        ),
        run(
            6,
            "Legendre maps, Newton, Finsler detection",
            s(5),
            criterion6,
        ),
        run(
            7,
            "duality families and equivalence verdict",
            s(10),
            criterion7,
        ),
        run(8, "oracle cross-checks", s(30), criterion8),
        run(9, "model parser", Duration::from_millis(1000), criterion9),
    ];
    let failed: Vec<usize> = results
        .iter()
        .enumerate()
        .filter(|(_, ok)| !**ok)
        .map(|(i, _)| i + 1)
        .collect();
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
