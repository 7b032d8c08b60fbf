//! Command-line entry point over model files.
//!
//! Exit codes: 0 when every requested check passes, 1 when a check fails,
//! 2 on usage or model errors. Reports go to standard output, diagnostics
//! to standard error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::algebroid::GeneralizedLieAlgebroid;
use crate::check::Report;
use crate::duality::{Lift, Side};
use crate::expr::{Expr, Sampler};
use crate::legendre::{phi, solve_fiber, FiberEnergy};
use crate::modelio::{emit_report, parse_model, Json, Model, NamedSection};
use crate::prolong::{LiftChecks, Variance};

#[derive(Debug, Parser)]
#[command(
    name = "gla",
    version,
    about = "Lifts, brackets, Legendre maps and identity checks on generalized Lie algebroids"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Emit JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    /// Override the sampler seed of the model.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Override the number of sample points of the model.
    #[arg(long, global = true)]
    pub points: Option<usize>,
    /// Override the tolerance of the model.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check inverse pairs, antisymmetry, compatibility, Jacobi and Leibniz.
    Validate { model: PathBuf },
    /// Print the complete or vertical lift of a named section.
    Lift {
        model: PathBuf,
        section: String,
        #[arg(long, conflicts_with = "vertical")]
        complete: bool,
        #[arg(long)]
        vertical: bool,
        /// The lift as a section of the prolongation instead of a vector field.
        #[arg(long)]
        gh: bool,
        /// Lift to the dual bundle.
        #[arg(long)]
        dual: bool,
    },
    /// Bracket of two named sections (prolongation sections, or sections
    /// pushed to F).
    Bracket {
        model: PathBuf,
        z: String,
        w: String,
        /// Push base sections through the dual morphism.
        #[arg(long)]
        dual: bool,
    },
    /// Evaluate a Legendre map at a point given as `name=value,...`.
    Legendre {
        model: PathBuf,
        /// From E to E* (the default).
        #[arg(long, conflicts_with = "backward")]
        forward: bool,
        /// From E* to E.
        #[arg(long)]
        backward: bool,
        #[arg(long)]
        at: String,
    },
    /// Bracket identities of the lifts on random section pairs, both variances.
    CheckTheorem18 {
        model: PathBuf,
        #[arg(long, default_value_t = 10)]
        trials: usize,
    },
    /// Morphism conditions and the equivalence verdict for the declared pair.
    CheckDuality { model: PathBuf },
    /// Every check that applies to the model.
    ReportAll {
        model: PathBuf,
        #[arg(long, default_value_t = 3)]
        trials: usize,
    },
}

struct Failure {
    code: i32,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

struct Context {
    model: Model,
    sampler: Sampler,
    tol: f64,
    json: bool,
}

fn load(cli: &Cli, path: &PathBuf) -> Result<Context, Failure> {
    let text =
        std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let model = parse_model(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let sampler = model.sampler_with(cli.points, cli.seed);
    let tol = cli.tol.unwrap_or(model.tol);
    Ok(Context {
        model,
        sampler,
        tol,
        json: cli.json,
    })
}

/// Runs the command line, writing reports to `out` and diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    match dispatch(&cli, out) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "gla: {}", f.message);
            f.code
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<i32, Failure> {
    match &cli.command {
        Command::Validate { model } => {
            let c = load(cli, model)?;
            let mut r = c.model.algebroid.validate(&c.sampler, c.tol);
            r.verdict = Some(verdict(&r).into());
            emit(&c, &r, out)
        }
        Command::Lift {
            model,
            section,
            vertical,
            gh,
            dual,
            ..
        } => {
            let c = load(cli, model)?;
            lift(&c, section, *vertical, *gh, *dual, out)
        }
        Command::Bracket { model, z, w, dual } => {
            let c = load(cli, model)?;
            bracket(&c, z, w, *dual, out)
        }
        Command::Legendre {
            model,
            backward,
            at,
            ..
        } => {
            let c = load(cli, model)?;
            legendre(&c, *backward, at, out)
        }
        Command::CheckTheorem18 { model, trials } => {
            let c = load(cli, model)?;
            let mut r = Report::new();
            for v in [Variance::Primal, Variance::Dual] {
                r.extend(lift_brackets(&c, v, *trials));
            }
            r.verdict = Some(verdict(&r).into());
            emit(&c, &r, out)
        }
        Command::CheckDuality { model } => {
            let c = load(cli, model)?;
            let r = duality(&c)?;
            emit(&c, &r, out)
        }
        Command::ReportAll { model, trials } => {
            let c = load(cli, model)?;
            let r = report_all(&c, *trials);
            emit(&c, &r, out)
        }
    }
}

fn verdict(r: &Report) -> &'static str {
    if r.passed() {
        "pass"
    } else {
        "fail"
    }
}

fn emit(c: &Context, r: &Report, out: &mut dyn Write) -> Result<i32, Failure> {
    let written = if c.json {
        writeln!(out, "{}", emit_report(r))
    } else {
        write!(out, "{r}")
    };
    written.map_err(|e| usage(e.to_string()))?;
    Ok(if r.passed() { 0 } else { 1 })
}

fn print_value(c: &Context, text: &str, json: Json, out: &mut dyn Write) -> Result<i32, Failure> {
    let written = if c.json {
        writeln!(out, "{json}")
    } else {
        writeln!(out, "{text}")
    };
    written.map_err(|e| usage(e.to_string()))?;
    Ok(0)
}

fn exprs_json(v: &[Expr]) -> Json {
    Json::Arr(
        v.iter()
            .map(|e| Json::Str(e.simplify().to_string()))
            .collect(),
    )
}

fn base_section<'a>(c: &'a Context, name: &str) -> Result<&'a NamedSection, Failure> {
    c.model
        .section(name)
        .ok_or_else(|| usage(format!("model declares no section {name:?}")))
}

fn variance_of(dual: bool) -> Variance {
    if dual {
        Variance::Dual
    } else {
        Variance::Primal
    }
}

fn lift(
    c: &Context,
    name: &str,
    vertical: bool,
    gh: bool,
    dual: bool,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    let NamedSection::Base(u) = base_section(c, name)? else {
        return Err(usage(format!(
            "section {name:?} is not a section of the bundle; only `s[a]` sections can be lifted"
        )));
    };
    let v = variance_of(dual);
    let b = c.model.bundle(v);
    let kind = if vertical { "vertical" } else { "complete" };
    let (text, parts) = if gh {
        let z = if vertical {
            b.vertical_lift_gh(u)
        } else {
            b.complete_lift_gh(u)
        };
        (
            z.display(v),
            [
                ("horizontal", exprs_json(&z.horizontal)),
                ("vertical", exprs_json(&z.vertical)),
            ],
        )
    } else {
        let f = if vertical {
            b.vertical_lift_section(u)
        } else {
            b.complete_lift_section(u)
        };
        (
            f.display(v),
            [
                ("base", exprs_json(&f.base)),
                ("fiber", exprs_json(&f.fiber)),
            ],
        )
    };
    let mut fields = vec![
        ("section", Json::Str(name.to_string())),
        ("lift", Json::Str(kind.into())),
        ("bundle", Json::Str(if dual { "Edual" } else { "E" }.into())),
        ("prolongation", Json::Bool(gh)),
    ];
    fields.extend(parts);
    fields.push(("display", Json::Str(text.clone())));
    print_value(c, &text, Json::obj(fields), out)
}

fn bracket(c: &Context, z: &str, w: &str, dual: bool, out: &mut dyn Write) -> Result<i32, Failure> {
    let (a, b) = (base_section(c, z)?, base_section(c, w)?);
    let (text, json) = match (a, b) {
        (NamedSection::Prolong(v1, s1), NamedSection::Prolong(v2, s2)) => {
            if v1 != v2 {
                return Err(usage(format!(
                    "{z:?} and {w:?} live over different bundles"
                )));
            }
            let r = c.model.bundle(*v1).bracket_prolong(s1, s2);
            let text = r.display(*v1);
            let json = Json::obj([
                ("horizontal", exprs_json(&r.horizontal)),
                ("vertical", exprs_json(&r.vertical)),
                ("display", Json::Str(text.clone())),
            ]);
            (text, json)
        }
        (NamedSection::Base(u), NamedSection::Base(v)) => {
            let bundle = c.model.bundle(variance_of(dual));
            let r = c.model.algebroid.bracket(&bundle.push(u), &bundle.push(v));
            let text = r.to_string();
            let json = Json::obj([
                ("components", exprs_json(&r.coeffs)),
                ("display", Json::Str(text.clone())),
            ]);
            (text, json)
        }
        _ => {
            return Err(usage(
                "both sections must be bundle sections or both prolongation sections",
            ))
        }
    };
    print_value(c, &text, json, out)
}

/// Parses `name=value,...`; names must be coordinates in `vars`.
fn bindings(at: &str, vars: &[String]) -> Result<Vec<f64>, Failure> {
    let mut values = vec![0.0; vars.len()];
    for part in at.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let Some((name, value)) = part.split_once('=') else {
            return Err(usage(format!("expected name=value, found {part:?}")));
        };
        let name = name.trim();
        let Some(i) = vars.iter().position(|v| v == name) else {
            return Err(usage(format!("{name:?} is not one of {}", vars.join(", "))));
        };
        values[i] = value
            .trim()
            .parse()
            .map_err(|_| usage(format!("{value:?} is not a number")))?;
    }
    Ok(values)
}

fn legendre(c: &Context, backward: bool, at: &str, out: &mut dyn Write) -> Result<i32, Failure> {
    let model = &c.model;
    let (l, h) = (model.lagrangian(), model.hamiltonian());
    // the map goes from `from` coordinates to `to` coordinates
    let (from_energy, to_energy): (Option<&dyn FiberEnergy>, Option<&dyn FiberEnergy>) = if backward
    {
        (
            h.as_ref().map(|e| e as &dyn FiberEnergy),
            l.as_ref().map(|e| e as &dyn FiberEnergy),
        )
    } else {
        (
            l.as_ref().map(|e| e as &dyn FiberEnergy),
            h.as_ref().map(|e| e as &dyn FiberEnergy),
        )
    };
    let (m, r) = (model.m(), model.primal.rank());
    let (src, tgt) = if backward { ("p", "y") } else { ("y", "p") };
    let mut vars: Vec<String> = model.algebroid.x_vars().to_vec();
    vars.extend((1..=r).map(|a| format!("{src}{a}")));
    let point = bindings(at, &vars)?;
    let (x, fiber) = point.split_at(m);
    // prefer solving the dual map, which reports Newton iterations
    let (image, iterations, residual) = match (to_energy, from_energy) {
        (Some(dual), _) => match solve_fiber(dual, x, fiber, None) {
            Ok(s) => (s.y, s.iterations, s.residual),
            Err(e) => {
                return Err(Failure {
                    code: 1,
                    message: format!("fiber solve failed: {e}"),
                })
            }
        },
        (None, Some(e)) => match phi(e, x, fiber) {
            Ok(q) => (q, 0, 0.0),
            Err(e) => {
                return Err(Failure {
                    code: 1,
                    message: format!("evaluation failed: {e}"),
                })
            }
        },
        (None, None) => return Err(usage("model declares no lagrangian or hamiltonian")),
    };
    let names: Vec<String> = (1..=r).map(|a| format!("{tgt}{a}")).collect();
    let fmt = |n: &[String], v: &[f64]| {
        n.iter()
            .zip(v)
            .map(|(a, b)| format!("{a}={b}"))
            .collect::<Vec<_>>()
            .join(", ")
    };
    let text = format!(
        "point: {}\nimage: {}\niterations: {iterations}\nresidual: {residual:e}",
        fmt(&vars, &point),
        fmt(&names, &image)
    );
    let obj = |n: &[String], v: &[f64]| {
        Json::Obj(
            n.iter()
                .cloned()
                .zip(v.iter().map(|&x| Json::Num(x)))
                .collect(),
        )
    };
    let json = Json::obj([
        (
            "direction",
            Json::Str(if backward { "backward" } else { "forward" }.into()),
        ),
        ("point", obj(&vars, &point)),
        ("image", obj(&names, &image)),
        ("residual", Json::Num(residual)),
        ("iterations", Json::Int(iterations as i64)),
    ]);
    print_value(c, &text, json, out)
}

fn lift_brackets(c: &Context, v: Variance, trials: usize) -> Report {
    let b = c.model.bundle(v);
    let checks = LiftChecks::new(b, &c.sampler, c.tol);
    let mut rng = c.sampler.rng(18);
    let mut r = Report::new();
    for t in 1..=trials {
        let u = b.random_section(&mut rng);
        let w = b.random_section(&mut rng);
        r.extend(checks.lift_brackets(t, &u, &w));
    }
    r
}

fn is_classical(a: &GeneralizedLieAlgebroid) -> bool {
    let id = GeneralizedLieAlgebroid::tangent(a.dim());
    a.rank() == a.dim()
        && a.anchor == id.anchor
        && a.structure == id.structure
        && a.h.is_identity()
        && a.eta.is_identity()
}

fn duality(c: &Context) -> Result<Report, Failure> {
    let pair = c.model.pair().ok_or_else(|| {
        usage("check-duality needs both a [lagrangian] and a [hamiltonian] block")
    })?;
    let mut r = Report::new();
    for (_, s) in &c.model.sections {
        if let NamedSection::Base(u) = s {
            for side in [Side::Lagrange, Side::Hamilton] {
                for lift in [Lift::Vertical, Lift::Complete] {
                    r.extend(
                        pair.section_implication(side, lift, u, &c.sampler, c.tol)
                            .to_report(),
                    );
                }
            }
        }
    }
    if is_classical(&c.model.algebroid) {
        for side in [Side::Lagrange, Side::Hamilton] {
            r.extend(pair.classical_conditions(side, &c.sampler, c.tol));
        }
    }
    r.extend(pair.legendre_equivalence(&c.sampler, c.tol));
    Ok(r)
}

fn report_all(c: &Context, trials: usize) -> Report {
    let m = &c.model;
    let mut r = m.algebroid.validate(&c.sampler, c.tol);
    for v in [Variance::Primal, Variance::Dual] {
        r.extend(LiftChecks::new(m.bundle(v), &c.sampler, c.tol).all(&c.sampler, trials));
    }
    if let (Some(l), Some(h)) = (m.lagrangian(), m.hamiltonian()) {
        r.extend(crate::legendre::check_round_trip(&l, &h, &c.sampler, c.tol));
    }
    let mut verdict = None;
    if let Ok(d) = duality(c) {
        verdict = d.verdict.clone();
        r.extend(d);
    }
    let failed = r.failures().count();
    let summary = format!(
        "{} of {} checks pass",
        r.checks.len() - failed,
        r.checks.len()
    );
    r.verdict = Some(match verdict {
        Some(v) => format!("{summary}; {v}"),
        None => summary,
    });
    r
}
