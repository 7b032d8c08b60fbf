//! The model file format and JSON reports.
//!
//! A model is a sequence of blocks introduced by bracketed headers, each
//! holding `key = value` entries; `#` starts a comment. Coordinates are
//! reserved: `x1..xm` on M, `k1..km` on N, `y1..yr` on E and `p1..pr` on E*.
//!
//! | block | keys |
//! |---|---|
//! | `[base M]`, `[base N]` | `dim` |
//! | `[map h]` | `k<i>` (h as functions of x), `x<i>` (its inverse) |
//! | `[map eta]` | `x<i>` (eta as functions of k), `k<i>` (its inverse) |
//! | `[algebroid]` | `rank`, `rho[a][i]`, `L[a,b]^c` |
//! | `[bundle E]` | `rank`, `g = identity`, `g[b][alpha]`, `ginv = auto`, `ginv[alpha][b]` |
//! | `[bundle Edual]` | `rank`, `g = identity`, `g[alpha][b]`, `ginv = auto`, `ginv[b][alpha]` |
//! | `[section <name>]` | `s[a]` (a section of E or E*), or `dt[alpha]`, `dot[a]` (a section of the prolongation) |
//! | `[form <name>]` | `c[a1,..,aq]` for increasing tuples |
//! | `[lagrangian]`, `[hamiltonian]` | `L`, `H` |
//! | `[sampler]` | `points`, `seed`, `tol`, `domain = lo, hi`, `domain[var] = lo, hi` |
//!
//! Missing `[map h]` means the identity, missing `[map eta]` means `h⁻¹`,
//! and a missing bundle block means `g = Id`. Anchor, structure and
//! morphism entries not given are 0. Without declared `ginv` entries the
//! inverse is computed by the adjugate.

use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::algebroid::{
    AlgebroidError, CoordSystem, GeneralizedLieAlgebroid, SmoothMap, Structure,
};
use crate::check::{Check, Report};
use crate::duality::LegendrePair;
use crate::expr::{parse, Expr, Sampler};
use crate::exterior::{combinations, FormQ, MorphismError};
use crate::legendre::{FundamentalFunction, Hamiltonian, Lagrangian};
use crate::prolong::{AnchoredBundle, ProlongError, ProlongSection, Variance};

pub const DEFAULT_POINTS: usize = 100;
pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorCode {
    Syntax,
    UnknownBlock,
    UnknownKey,
    DuplicateKey,
    MissingKey,
    BadValue,
    BadExpression,
    UnknownFunction,
    UnknownVariable,
    DimensionMismatch,
    Antisymmetry,
    Singular,
    BadInverse,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::Syntax => "syntax",
            ErrorCode::UnknownBlock => "unknown_block",
            ErrorCode::UnknownKey => "unknown_key",
            ErrorCode::DuplicateKey => "duplicate_key",
            ErrorCode::MissingKey => "missing_key",
            ErrorCode::BadValue => "bad_value",
            ErrorCode::BadExpression => "bad_expression",
            ErrorCode::UnknownFunction => "unknown_function",
            ErrorCode::UnknownVariable => "unknown_variable",
            ErrorCode::DimensionMismatch => "dimension_mismatch",
            ErrorCode::Antisymmetry => "antisymmetry",
            ErrorCode::Singular => "singular",
            ErrorCode::BadInverse => "bad_inverse",
        }
    }

    pub fn from_name(s: &str) -> Option<ErrorCode> {
        use ErrorCode::*;
        [
            Syntax,
            UnknownBlock,
            UnknownKey,
            DuplicateKey,
            MissingKey,
            BadValue,
            BadExpression,
            UnknownFunction,
            UnknownVariable,
            DimensionMismatch,
            Antisymmetry,
            Singular,
            BadInverse,
        ]
        .into_iter()
        .find(|c| c.as_str() == s)
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A rejected model: an error code, the 1-based line (0 when the error
/// concerns the file as a whole) and a message.
#[derive(Clone, Debug, Error, PartialEq)]
#[error("line {line}: {code}: {message}")]
pub struct ModelError {
    pub code: ErrorCode,
    pub line: usize,
    pub message: String,
}

fn err<T>(code: ErrorCode, line: usize, message: impl Into<String>) -> Result<T, ModelError> {
    Err(ModelError {
        code,
        line,
        message: message.into(),
    })
}

fn from_algebroid(e: AlgebroidError, line: usize) -> ModelError {
    let code = match e {
        AlgebroidError::DimensionMismatch(_) => ErrorCode::DimensionMismatch,
        AlgebroidError::InconsistentAntisymmetry(..) | AlgebroidError::NonzeroDiagonal(..) => {
            ErrorCode::Antisymmetry
        }
        AlgebroidError::ForeignVariable { .. } => ErrorCode::UnknownVariable,
    };
    ModelError {
        code,
        line,
        message: e.to_string(),
    }
}

fn from_prolong(e: ProlongError, line: usize) -> ModelError {
    let code = match &e {
        ProlongError::Morphism(MorphismError::Singular(_)) => ErrorCode::Singular,
        ProlongError::Morphism(MorphismError::BadInverse(_)) => ErrorCode::BadInverse,
        ProlongError::Morphism(MorphismError::Shape(..)) | ProlongError::RankMismatch { .. } => {
            ErrorCode::DimensionMismatch
        }
        ProlongError::Algebroid(a) => return from_algebroid(a.clone(), line),
    };
    ModelError {
        code,
        line,
        message: e.to_string(),
    }
}

#[derive(Clone, Debug)]
struct Entry {
    key: String,
    value: String,
    line: usize,
}

#[derive(Clone, Debug)]
struct Block {
    kind: String,
    name: Option<String>,
    line: usize,
    entries: Vec<Entry>,
}

impl Block {
    fn title(&self) -> String {
        match &self.name {
            Some(n) => format!("[{} {n}]", self.kind),
            None => format!("[{}]", self.kind),
        }
    }

    fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }
}

const BLOCK_KINDS: &[&str] = &[
    "base",
    "map",
    "algebroid",
    "bundle",
    "section",
    "form",
    "lagrangian",
    "hamiltonian",
    "sampler",
];

fn split_blocks(text: &str) -> Result<Vec<Block>, ModelError> {
    let mut blocks: Vec<Block> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(inner) = content.strip_prefix('[') {
            let Some(inner) = inner.strip_suffix(']') else {
                return err(
                    ErrorCode::Syntax,
                    line,
                    format!("unterminated block header {content:?}"),
                );
            };
            let mut parts = inner.split_whitespace();
            let kind = parts.next().unwrap_or("").to_string();
            let name = parts.next().map(str::to_string);
            if parts.next().is_some() {
                return err(
                    ErrorCode::Syntax,
                    line,
                    format!("malformed block header {content:?}"),
                );
            }
            let known = match kind.as_str() {
                "base" => matches!(name.as_deref(), Some("M") | Some("N")),
                "map" => matches!(name.as_deref(), Some("h") | Some("eta")),
                "bundle" => matches!(name.as_deref(), Some("E") | Some("Edual")),
                "section" | "form" => name.as_deref().is_some_and(is_identifier),
                "algebroid" | "lagrangian" | "hamiltonian" | "sampler" => name.is_none(),
                _ => false,
            };
            if !known {
                let code = if BLOCK_KINDS.contains(&kind.as_str())
                    && (kind == "section" || kind == "form")
                {
                    ErrorCode::Syntax
                } else {
                    ErrorCode::UnknownBlock
                };
                return err(code, line, format!("unknown block {content}"));
            }
            let b = Block {
                kind,
                name,
                line,
                entries: Vec::new(),
            };
            if let Some(prev) = blocks.iter().find(|o| o.title() == b.title()) {
                return err(
                    ErrorCode::DuplicateKey,
                    line,
                    format!("block {} already declared on line {}", b.title(), prev.line),
                );
            }
            blocks.push(b);
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return err(
                ErrorCode::Syntax,
                line,
                format!("expected `key = value`, found {content:?}"),
            );
        };
        let Some(block) = blocks.last_mut() else {
            return err(ErrorCode::Syntax, line, "entry outside of any block");
        };
        let key: String = key.chars().filter(|c| !c.is_whitespace()).collect();
        if let Some(prev) = block.get(&key) {
            return err(
                ErrorCode::DuplicateKey,
                line,
                format!("key {key} already set on line {}", prev.line),
            );
        }
        block.entries.push(Entry {
            key,
            value: value.trim().to_string(),
            line,
        });
    }
    Ok(blocks)
}

fn is_identifier(s: &str) -> bool {
    let mut c = s.chars();
    c.next().is_some_and(|h| h.is_ascii_alphabetic())
        && c.all(|ch| ch.is_ascii_alphanumeric() || ch == '_')
}

/// A key such as `rho[2][1]`, `L[1,2]^3` or `domain[x1]`.
#[derive(Debug, PartialEq)]
struct Key {
    name: String,
    groups: Vec<Vec<String>>,
    sup: Option<String>,
}

fn parse_key(key: &str, line: usize) -> Result<Key, ModelError> {
    let bad = || err(ErrorCode::Syntax, line, format!("malformed key {key:?}"));
    let (head, sup) = match key.split_once('^') {
        Some((h, s)) => (h, Some(s.to_string())),
        None => (key, None),
    };
    let name_end = head.find('[').unwrap_or(head.len());
    let name = &head[..name_end];
    if !is_identifier(name) {
        return bad();
    }
    let mut groups = Vec::new();
    let mut rest = &head[name_end..];
    while !rest.is_empty() {
        let Some(inner) = rest.strip_prefix('[') else {
            return bad();
        };
        let Some(close) = inner.find(']') else {
            return bad();
        };
        groups.push(inner[..close].split(',').map(str::to_string).collect());
        rest = &inner[close + 1..];
    }
    Ok(Key {
        name: name.to_string(),
        groups,
        sup,
    })
}

/// A 1-based index within `1..=max`, converted to 0-based.
fn index(s: &str, max: usize, what: &str, line: usize) -> Result<usize, ModelError> {
    let i: usize = match s.parse() {
        Ok(i) => i,
        Err(_) => {
            return err(
                ErrorCode::Syntax,
                line,
                format!("index {s:?} of {what} is not a positive integer"),
            )
        }
    };
    if i == 0 || i > max {
        return err(
            ErrorCode::DimensionMismatch,
            line,
            format!("index {i} of {what} is outside 1..{max}"),
        );
    }
    Ok(i - 1)
}

fn expression(e: &Entry, allowed: &[&[String]], space: &str) -> Result<Expr, ModelError> {
    let ex = parse(&e.value).map_err(|p| {
        let code = match p.kind {
            crate::expr::ParseErrorKind::UnknownFunction => ErrorCode::UnknownFunction,
            crate::expr::ParseErrorKind::Syntax => ErrorCode::BadExpression,
        };
        ModelError {
            code,
            line: e.line,
            message: format!(
                "{} = {}: column {}: {}",
                e.key, e.value, p.column, p.message
            ),
        }
    })?;
    for v in ex.free_vars() {
        if !allowed.iter().any(|vs| vs.contains(&v)) {
            return err(
                ErrorCode::UnknownVariable,
                e.line,
                format!("{} uses {v}, which is not a coordinate of {space}", e.key),
            );
        }
    }
    Ok(ex)
}

fn count(e: &Entry) -> Result<usize, ModelError> {
    match e.value.parse::<usize>() {
        Ok(n) if n > 0 => Ok(n),
        _ => err(
            ErrorCode::BadValue,
            e.line,
            format!("{} must be a positive integer, found {:?}", e.key, e.value),
        ),
    }
}

fn number(e: &Entry, s: &str) -> Result<f64, ModelError> {
    if let Ok(v) = s.trim().parse::<f64>() {
        return Ok(v);
    }
    match parse(s).ok().and_then(|x| x.simplify().as_const()) {
        Some(v) => Ok(v),
        None => err(
            ErrorCode::BadValue,
            e.line,
            format!("{} must be a number, found {s:?}", e.key),
        ),
    }
}

fn unknown_key<T>(b: &Block, e: &Entry) -> Result<T, ModelError> {
    err(
        ErrorCode::UnknownKey,
        e.line,
        format!("unknown key {} in {}", e.key, b.title()),
    )
}

/// A named section declared in a model.
#[derive(Clone, Debug, PartialEq)]
pub enum NamedSection {
    /// Components `u^a` on M, usable as a section of E or of E*.
    Base(Vec<Expr>),
    /// A section of the prolongation over E or E*.
    Prolong(Variance, ProlongSection),
}

/// A parsed and validated model.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub algebroid: GeneralizedLieAlgebroid,
    pub primal: AnchoredBundle,
    pub dual: AnchoredBundle,
    pub sections: Vec<(String, NamedSection)>,
    pub forms: Vec<(String, FormQ)>,
    pub lagrangian: Option<Expr>,
    pub hamiltonian: Option<Expr>,
    pub sampler: Sampler,
    pub tol: f64,
    /// Whether the inverse of each bundle morphism (primal, dual) was computed.
    pub auto_inverse: [bool; 2],
}

impl Model {
    pub fn m(&self) -> usize {
        self.algebroid.dim()
    }

    pub fn bundle(&self, v: Variance) -> &AnchoredBundle {
        match v {
            Variance::Primal => &self.primal,
            Variance::Dual => &self.dual,
        }
    }

    pub fn section(&self, name: &str) -> Option<&NamedSection> {
        self.sections
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, s)| s)
    }

    pub fn form(&self, name: &str) -> Option<&FormQ> {
        self.forms.iter().find(|(n, _)| n == name).map(|(_, f)| f)
    }

    pub fn lagrangian(&self) -> Option<Lagrangian> {
        let l = self.lagrangian.as_ref()?;
        FundamentalFunction::lagrangian(l.clone(), self.m(), self.primal.rank()).ok()
    }

    pub fn hamiltonian(&self) -> Option<Hamiltonian> {
        let h = self.hamiltonian.as_ref()?;
        FundamentalFunction::hamiltonian(h.clone(), self.m(), self.dual.rank()).ok()
    }

    /// The Legendre pair when both energies are declared.
    pub fn pair(&self) -> Option<LegendrePair> {
        LegendrePair::new(
            self.primal.clone(),
            self.dual.clone(),
            self.lagrangian()?,
            self.hamiltonian()?,
        )
        .ok()
    }

    /// The sampler with the command-line overrides applied.
    pub fn sampler_with(&self, points: Option<usize>, seed: Option<u64>) -> Sampler {
        let mut s = self.sampler.clone();
        if let Some(p) = points {
            s = s.with_points(p);
        }
        if let Some(seed) = seed {
            s = s.with_seed(seed);
        }
        s
    }
}

fn block<'a>(blocks: &'a [Block], kind: &str, name: Option<&str>) -> Option<&'a Block> {
    blocks
        .iter()
        .find(|b| b.kind == kind && b.name.as_deref() == name)
}

fn parse_dim(b: Option<&Block>) -> Result<Option<(usize, usize)>, ModelError> {
    let Some(b) = b else { return Ok(None) };
    for e in &b.entries {
        if e.key != "dim" {
            return unknown_key(b, e);
        }
    }
    match b.get("dim") {
        Some(e) => Ok(Some((count(e)?, e.line))),
        None => err(
            ErrorCode::MissingKey,
            b.line,
            format!("{} needs `dim`", b.title()),
        ),
    }
}

/// Reads a map block whose forward keys are `fwd` coordinates and whose
/// inverse keys are `inv` coordinates.
fn parse_map(b: &Block, dom: &CoordSystem, cod: &CoordSystem) -> Result<SmoothMap, ModelError> {
    let mut forward = vec![None; cod.dim()];
    let mut inverse = vec![None; dom.dim()];
    for e in &b.entries {
        if let Some(j) = cod.vars.iter().position(|v| *v == e.key) {
            forward[j] = Some(expression(e, &[&dom.vars], &dom.name)?);
        } else if let Some(i) = dom.vars.iter().position(|v| *v == e.key) {
            inverse[i] = Some(expression(e, &[&cod.vars], &cod.name)?);
        } else {
            return unknown_key(b, e);
        }
    }
    let take =
        |v: Vec<Option<Expr>>, names: &[String], what: &str| -> Result<Vec<Expr>, ModelError> {
            v.into_iter()
                .zip(names)
                .map(|(e, n)| {
                    e.ok_or_else(|| ModelError {
                        code: ErrorCode::MissingKey,
                        line: b.line,
                        message: format!("{} needs {what} component {n}", b.title()),
                    })
                })
                .collect()
        };
    let forward = take(forward, &cod.vars, "forward")?;
    let inverse = take(inverse, &dom.vars, "inverse")?;
    SmoothMap::new(dom.clone(), cod.clone(), forward, inverse)
        .map_err(|e| from_algebroid(e, b.line))
}

fn parse_algebroid(blocks: &[Block], m: usize) -> Result<GeneralizedLieAlgebroid, ModelError> {
    let xm = CoordSystem::numbered("M", "x", m);
    let kn = CoordSystem::numbered("N", "k", m);
    let h = match block(blocks, "map", Some("h")) {
        Some(b) => parse_map(b, &xm, &kn)?,
        None => SmoothMap::identity(xm.clone(), kn.clone()),
    };
    let eta = match block(blocks, "map", Some("eta")) {
        Some(b) => parse_map(b, &kn, &xm)?,
        None => h.inverted(),
    };
    let Some(b) = block(blocks, "algebroid", None) else {
        return err(ErrorCode::MissingKey, 0, "model needs an [algebroid] block");
    };
    let Some(rank) = b.get("rank") else {
        return err(ErrorCode::MissingKey, b.line, "[algebroid] needs `rank`");
    };
    let p = count(rank)?;
    let mut anchor = vec![vec![Expr::zero(); m]; p];
    let mut structure = Structure::zero(p);
    for e in &b.entries {
        let k = parse_key(&e.key, e.line)?;
        match (k.name.as_str(), k.groups.as_slice(), &k.sup) {
            ("rank", [], None) => {}
            ("rho", [a, i], None) if a.len() == 1 && i.len() == 1 => {
                let a = index(&a[0], p, "rho", e.line)?;
                let i = index(&i[0], m, "rho", e.line)?;
                anchor[a][i] = expression(e, &[&kn.vars], "N")?;
            }
            ("L", [ab], Some(c)) if ab.len() == 2 => {
                let a = index(&ab[0], p, "L", e.line)?;
                let bb = index(&ab[1], p, "L", e.line)?;
                let c = index(c, p, "L", e.line)?;
                let v = expression(e, &[&kn.vars], "N")?;
                structure
                    .set(a, bb, c, v)
                    .map_err(|x| from_algebroid(x, e.line))?;
            }
            _ => return unknown_key(b, e),
        }
    }
    GeneralizedLieAlgebroid::new(h, eta, anchor, structure).map_err(|e| from_algebroid(e, b.line))
}

fn parse_bundle(
    blocks: &[Block],
    alg: &GeneralizedLieAlgebroid,
    variance: Variance,
    sampler: &Sampler,
) -> Result<(AnchoredBundle, bool), ModelError> {
    let name = match variance {
        Variance::Primal => "E",
        Variance::Dual => "Edual",
    };
    let Some(b) = block(blocks, "bundle", Some(name)) else {
        return Ok((AnchoredBundle::identity(alg.clone(), variance), false));
    };
    let p = alg.rank();
    let r = match b.get("rank") {
        Some(e) => count(e)?,
        None => {
            return err(
                ErrorCode::MissingKey,
                b.line,
                format!("{} needs `rank`", b.title()),
            )
        }
    };
    if r != p {
        return err(
            ErrorCode::DimensionMismatch,
            b.get("rank").map_or(b.line, |e| e.line),
            format!("bundle rank {r} differs from the algebroid rank {p}; the morphism into F must be invertible"),
        );
    }
    let x = alg.x_vars().to_vec();
    let mut g = vec![vec![Expr::zero(); r]; p];
    let mut ginv: Option<Vec<Vec<Expr>>> = None;
    let mut auto = false;
    if let Some(e) = b.get("g") {
        if e.value != "identity" {
            return err(
                ErrorCode::BadValue,
                e.line,
                format!("`g` must be `identity`, found {:?}", e.value),
            );
        }
        for (a, row) in g.iter_mut().enumerate() {
            row[a] = Expr::one();
        }
    }
    for e in &b.entries {
        let k = parse_key(&e.key, e.line)?;
        match (k.name.as_str(), k.groups.as_slice(), &k.sup) {
            ("rank", [], None) | ("g", [], None) => {}
            ("ginv", [], None) => {
                if e.value != "auto" {
                    return err(
                        ErrorCode::BadValue,
                        e.line,
                        format!("`ginv` must be `auto`, found {:?}", e.value),
                    );
                }
                auto = true;
            }
            ("g", [i, j], None) if i.len() == 1 && j.len() == 1 => {
                // primal keys are g[b][alpha] (g_b^alpha), dual keys g[alpha][b]
                let (al, bb) = match variance {
                    Variance::Primal => {
                        (index(&j[0], p, "g", e.line)?, index(&i[0], r, "g", e.line)?)
                    }
                    Variance::Dual => {
                        (index(&i[0], p, "g", e.line)?, index(&j[0], r, "g", e.line)?)
                    }
                };
                g[al][bb] = expression(e, &[&x], "M")?;
            }
            ("ginv", [i, j], None) if i.len() == 1 && j.len() == 1 => {
                let (bb, al) = match variance {
                    Variance::Primal => (
                        index(&j[0], r, "ginv", e.line)?,
                        index(&i[0], p, "ginv", e.line)?,
                    ),
                    Variance::Dual => (
                        index(&i[0], r, "ginv", e.line)?,
                        index(&j[0], p, "ginv", e.line)?,
                    ),
                };
                ginv.get_or_insert_with(|| vec![vec![Expr::zero(); p]; r])[bb][al] =
                    expression(e, &[&x], "M")?;
            }
            _ => return unknown_key(b, e),
        }
    }
    if auto && ginv.is_some() {
        return err(
            ErrorCode::DuplicateKey,
            b.line,
            format!("{} declares both `ginv = auto` and ginv entries", b.title()),
        );
    }
    let auto = ginv.is_none();
    let bundle = AnchoredBundle::new(alg.clone(), variance, g, ginv, sampler)
        .map_err(|e| from_prolong(e, b.line))?;
    Ok((bundle, auto))
}

fn parse_section(
    b: &Block,
    alg: &GeneralizedLieAlgebroid,
    r: usize,
) -> Result<NamedSection, ModelError> {
    let p = alg.rank();
    let x = alg.x_vars().to_vec();
    let y: Vec<String> = (1..=r).map(|a| format!("y{a}")).collect();
    let pv: Vec<String> = (1..=r).map(|a| format!("p{a}")).collect();
    let mut base: Option<Vec<Expr>> = None;
    let mut prolong: Option<ProlongSection> = None;
    let mut variance: Option<Variance> = None;
    for e in &b.entries {
        let k = parse_key(&e.key, e.line)?;
        let one = |g: &[Vec<String>]| g.len() == 1 && g[0].len() == 1;
        if k.sup.is_some() || !one(&k.groups) {
            return unknown_key(b, e);
        }
        let idx = &k.groups[0][0];
        match k.name.as_str() {
            "s" => {
                let a = index(idx, r, "s", e.line)?;
                base.get_or_insert_with(|| vec![Expr::zero(); r])[a] = expression(e, &[&x], "M")?;
            }
            "dt" | "dot" => {
                let v = expression(e, &[&x, &y, &pv], "E or E*")?;
                let fv = v.free_vars();
                let this = match (
                    fv.iter().any(|n| y.contains(n)),
                    fv.iter().any(|n| pv.contains(n)),
                ) {
                    (true, true) => {
                        return err(
                            ErrorCode::UnknownVariable,
                            e.line,
                            format!("{} mixes coordinates of E and E*", e.key),
                        )
                    }
                    (true, false) => Some(Variance::Primal),
                    (false, true) => Some(Variance::Dual),
                    (false, false) => None,
                };
                if let (Some(t), Some(prev)) = (this, variance) {
                    if t != prev {
                        return err(
                            ErrorCode::UnknownVariable,
                            e.line,
                            format!("{} mixes coordinates of E and E*", b.title()),
                        );
                    }
                }
                variance = variance.or(this);
                let s = prolong.get_or_insert_with(|| ProlongSection::zero(p, r));
                if k.name == "dt" {
                    s.horizontal[index(idx, p, "dt", e.line)?] = v;
                } else {
                    s.vertical[index(idx, r, "dot", e.line)?] = v;
                }
            }
            _ => return unknown_key(b, e),
        }
    }
    match (base, prolong) {
        (Some(_), Some(_)) => err(
            ErrorCode::Syntax,
            b.line,
            format!("{} mixes `s` keys with `dt`/`dot` keys", b.title()),
        ),
        (Some(u), None) => Ok(NamedSection::Base(u)),
        (None, Some(z)) => Ok(NamedSection::Prolong(
            variance.unwrap_or(Variance::Primal),
            z,
        )),
        (None, None) => Ok(NamedSection::Base(vec![Expr::zero(); r])),
    }
}

fn parse_form(b: &Block, alg: &GeneralizedLieAlgebroid, r: usize) -> Result<FormQ, ModelError> {
    let x = alg.x_vars().to_vec();
    let mut form: Option<FormQ> = None;
    for e in &b.entries {
        let k = parse_key(&e.key, e.line)?;
        if k.name != "c" || k.sup.is_some() || k.groups.len() != 1 {
            return unknown_key(b, e);
        }
        let idx = k.groups[0]
            .iter()
            .map(|s| index(s, r, "c", e.line))
            .collect::<Result<Vec<_>, _>>()?;
        let w = form.get_or_insert_with(|| FormQ::zero(r, idx.len()));
        if w.degree != idx.len() {
            return err(
                ErrorCode::DimensionMismatch,
                e.line,
                format!(
                    "{} has degree {} but {} has {} indices",
                    b.title(),
                    w.degree,
                    e.key,
                    idx.len()
                ),
            );
        }
        if idx.windows(2).any(|p| p[0] >= p[1]) {
            return err(
                ErrorCode::Antisymmetry,
                e.line,
                format!(
                    "form components are given on increasing index tuples, found {}",
                    e.key
                ),
            );
        }
        let v = expression(e, &[&x], "M")?;
        w.set(&idx, v).map_err(|x| ModelError {
            code: ErrorCode::DimensionMismatch,
            line: e.line,
            message: x.to_string(),
        })?;
    }
    match form {
        Some(w) => Ok(w),
        None => err(
            ErrorCode::MissingKey,
            b.line,
            format!("{} has no components", b.title()),
        ),
    }
}

fn parse_energy(
    b: &Block,
    key: &str,
    x: &[String],
    fiber: &[String],
    space: &str,
) -> Result<Expr, ModelError> {
    for e in &b.entries {
        if e.key != key {
            return unknown_key(b, e);
        }
    }
    match b.get(key) {
        Some(e) => expression(e, &[x, fiber], space),
        None => err(
            ErrorCode::MissingKey,
            b.line,
            format!("{} needs `{key}`", b.title()),
        ),
    }
}

fn parse_sampler(b: Option<&Block>, vars: &[String]) -> Result<(Sampler, f64), ModelError> {
    let mut s = Sampler::new(DEFAULT_POINTS, 0);
    let mut tol = DEFAULT_TOL;
    let Some(b) = b else { return Ok((s, tol)) };
    let interval = |e: &Entry| -> Result<(f64, f64), ModelError> {
        let parts: Vec<&str> = e.value.split(',').collect();
        if parts.len() != 2 {
            return err(
                ErrorCode::BadValue,
                e.line,
                format!("{} must be `lo, hi`", e.key),
            );
        }
        let (lo, hi) = (number(e, parts[0])?, number(e, parts[1])?);
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return err(
                ErrorCode::BadValue,
                e.line,
                format!("{} must satisfy lo < hi", e.key),
            );
        }
        Ok((lo, hi))
    };
    for e in &b.entries {
        let k = parse_key(&e.key, e.line)?;
        match (k.name.as_str(), k.groups.as_slice(), &k.sup) {
            ("points", [], None) => s = s.with_points(count(e)?),
            ("seed", [], None) => match e.value.parse::<u64>() {
                Ok(v) => s = s.with_seed(v),
                Err(_) => {
                    return err(
                        ErrorCode::BadValue,
                        e.line,
                        "seed must be a non-negative integer",
                    )
                }
            },
            ("tol", [], None) => {
                tol = number(e, &e.value)?;
                if tol.is_nan() || tol <= 0.0 {
                    return err(ErrorCode::BadValue, e.line, "tol must be positive");
                }
            }
            ("domain", [], None) => {
                let (lo, hi) = interval(e)?;
                s = s.with_default_domain(lo, hi);
            }
            ("domain", [v], None) if v.len() == 1 => {
                if !vars.contains(&v[0]) {
                    return err(
                        ErrorCode::UnknownVariable,
                        e.line,
                        format!("{} is not a coordinate of the model", v[0]),
                    );
                }
                let (lo, hi) = interval(e)?;
                s = s.with_domain(&v[0], lo, hi);
            }
            _ => return unknown_key(b, e),
        }
    }
    Ok((s, tol))
}

/// Parses and validates a model.
pub fn parse_model(text: &str) -> Result<Model, ModelError> {
    let blocks = split_blocks(text)?;
    let Some((m, _)) = parse_dim(block(&blocks, "base", Some("M")))? else {
        return err(ErrorCode::MissingKey, 0, "model needs a [base M] block");
    };
    if let Some((n, line)) = parse_dim(block(&blocks, "base", Some("N")))? {
        if n != m {
            return err(
                ErrorCode::DimensionMismatch,
                line,
                format!("dim N = {n} but dim M = {m}"),
            );
        }
    }
    let algebroid = parse_algebroid(&blocks, m)?;
    let r = algebroid.rank();
    let fiber = |pre: &str| -> Vec<String> { (1..=r).map(|a| format!("{pre}{a}")).collect() };
    let mut all_vars: Vec<String> = algebroid.x_vars().to_vec();
    all_vars.extend(algebroid.k_vars().iter().cloned());
    all_vars.extend(fiber("y"));
    all_vars.extend(fiber("p"));
    let (sampler, tol) = parse_sampler(block(&blocks, "sampler", None), &all_vars)?;
    let (primal, auto_p) = parse_bundle(&blocks, &algebroid, Variance::Primal, &sampler)?;
    let (dual, auto_d) = parse_bundle(&blocks, &algebroid, Variance::Dual, &sampler)?;
    let mut sections = Vec::new();
    let mut forms = Vec::new();
    for b in &blocks {
        let name = b.name.clone().unwrap_or_default();
        match b.kind.as_str() {
            "section" => sections.push((name, parse_section(b, &algebroid, r)?)),
            "form" => forms.push((name, parse_form(b, &algebroid, r)?)),
            _ => {}
        }
    }
    let x = algebroid.x_vars().to_vec();
    let lagrangian = block(&blocks, "lagrangian", None)
        .map(|b| parse_energy(b, "L", &x, &fiber("y"), "E"))
        .transpose()?;
    let hamiltonian = block(&blocks, "hamiltonian", None)
        .map(|b| parse_energy(b, "H", &x, &fiber("p"), "E*"))
        .transpose()?;
    Ok(Model {
        algebroid,
        primal,
        dual,
        sections,
        forms,
        lagrangian,
        hamiltonian,
        sampler,
        tol,
        auto_inverse: [auto_p, auto_d],
    })
}

/// Prints a model in the canonical form accepted by [`parse_model`].
pub fn print_model(model: &Model) -> String {
    let mut out = String::new();
    let alg = &model.algebroid;
    let (m, p) = (alg.dim(), alg.rank());
    let o = &mut out;
    let _ = writeln!(o, "[base M]\ndim = {m}\n\n[base N]\ndim = {m}");
    if !alg.h.is_identity() {
        let _ = writeln!(o, "\n[map h]");
        print_map(o, &alg.h);
    }
    if alg.eta != alg.h.inverted() {
        let _ = writeln!(o, "\n[map eta]");
        print_map(o, &alg.eta);
    }
    let _ = writeln!(o, "\n[algebroid]\nrank = {p}");
    for (a, row) in alg.anchor.iter().enumerate() {
        for (i, e) in row.iter().enumerate() {
            if !e.is_zero() {
                let _ = writeln!(o, "rho[{}][{}] = {e}", a + 1, i + 1);
            }
        }
    }
    for (a, b, c, e) in alg.structure.nonzero_upper() {
        let _ = writeln!(o, "L[{},{}]^{} = {e}", a + 1, b + 1, c + 1);
    }
    for (v, auto) in [
        (Variance::Primal, model.auto_inverse[0]),
        (Variance::Dual, model.auto_inverse[1]),
    ] {
        let bundle = model.bundle(v);
        if *bundle == AnchoredBundle::identity(alg.clone(), v) {
            continue;
        }
        let r = bundle.rank();
        let name = if v == Variance::Primal { "E" } else { "Edual" };
        let _ = writeln!(o, "\n[bundle {name}]\nrank = {r}");
        let key = |al: usize, b: usize| match v {
            Variance::Primal => format!("[{}][{}]", b + 1, al + 1),
            Variance::Dual => format!("[{}][{}]", al + 1, b + 1),
        };
        let ikey = |b: usize, al: usize| match v {
            Variance::Primal => format!("[{}][{}]", al + 1, b + 1),
            Variance::Dual => format!("[{}][{}]", b + 1, al + 1),
        };
        for al in 0..p {
            for b in 0..r {
                let e = bundle.g(al, b);
                if !e.is_zero() {
                    let _ = writeln!(o, "g{} = {e}", key(al, b));
                }
            }
        }
        if auto {
            let _ = writeln!(o, "ginv = auto");
        } else {
            for b in 0..r {
                for al in 0..p {
                    let e = bundle.ginv(b, al);
                    if !e.is_zero() {
                        let _ = writeln!(o, "ginv{} = {e}", ikey(b, al));
                    }
                }
            }
        }
    }
    for (name, s) in &model.sections {
        let _ = writeln!(o, "\n[section {name}]");
        match s {
            NamedSection::Base(u) => {
                for (a, e) in u.iter().enumerate() {
                    if !e.is_zero() {
                        let _ = writeln!(o, "s[{}] = {e}", a + 1);
                    }
                }
            }
            NamedSection::Prolong(_, z) => {
                for (a, e) in z.horizontal.iter().enumerate() {
                    if !e.is_zero() {
                        let _ = writeln!(o, "dt[{}] = {e}", a + 1);
                    }
                }
                for (a, e) in z.vertical.iter().enumerate() {
                    if !e.is_zero() {
                        let _ = writeln!(o, "dot[{}] = {e}", a + 1);
                    }
                }
            }
        }
    }
    for (name, w) in &model.forms {
        let _ = writeln!(o, "\n[form {name}]");
        let tuples = combinations(w.rank, w.degree);
        let nonzero: Vec<_> = tuples
            .iter()
            .zip(w.coefficients())
            .filter(|(_, e)| !e.is_zero())
            .collect();
        // a zero form still needs one entry to fix its degree
        let shown = if nonzero.is_empty() {
            vec![(&tuples[0], &w.coefficients()[0])]
        } else {
            nonzero
        };
        for (t, e) in shown {
            let idx: Vec<String> = t.iter().map(|i| (i + 1).to_string()).collect();
            let _ = writeln!(o, "c[{}] = {e}", idx.join(","));
        }
    }
    if let Some(l) = &model.lagrangian {
        let _ = writeln!(o, "\n[lagrangian]\nL = {l}");
    }
    if let Some(h) = &model.hamiltonian {
        let _ = writeln!(o, "\n[hamiltonian]\nH = {h}");
    }
    let s = &model.sampler;
    let _ = writeln!(
        o,
        "\n[sampler]\npoints = {}\nseed = {}\ntol = {:e}\ndomain = {}, {}",
        s.points, s.seed, model.tol, s.default_domain.0, s.default_domain.1
    );
    for (v, (lo, hi)) in &s.domains {
        let _ = writeln!(o, "domain[{v}] = {lo}, {hi}");
    }
    out
}

fn print_map(o: &mut String, map: &SmoothMap) {
    for (j, e) in map.forward.iter().enumerate() {
        let _ = writeln!(o, "{} = {e}", map.codomain.vars[j]);
    }
    for (i, e) in map.inverse.iter().enumerate() {
        let _ = writeln!(o, "{} = {e}", map.domain.vars[i]);
    }
}

/// A JSON value with fixed key order and 17 significant digits for floats.
#[derive(Clone, Debug, PartialEq)]
pub enum Json {
    Null,
    Bool(bool),
    Int(i64),
    Num(f64),
    Str(String),
    Arr(Vec<Json>),
    Obj(Vec<(String, Json)>),
}

impl Json {
    pub fn obj<I: IntoIterator<Item = (&'static str, Json)>>(pairs: I) -> Json {
        Json::Obj(pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }

    pub fn nums(v: &[f64]) -> Json {
        Json::Arr(v.iter().map(|&x| Json::Num(x)).collect())
    }
}

impl fmt::Display for Json {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Json::Null => f.write_str("null"),
            Json::Bool(b) => write!(f, "{b}"),
            Json::Int(i) => write!(f, "{i}"),
            Json::Num(x) if x.is_finite() => write!(f, "{x:.16e}"),
            Json::Num(_) => f.write_str("null"),
            Json::Str(s) => f.write_str(&serde_json::to_string(s).map_err(|_| fmt::Error)?),
            Json::Arr(v) => {
                f.write_char('[')?;
                for (i, x) in v.iter().enumerate() {
                    if i > 0 {
                        f.write_char(',')?;
                    }
                    write!(f, "{x}")?;
                }
                f.write_char(']')
            }
            Json::Obj(v) => {
                f.write_char('{')?;
                for (i, (k, x)) in v.iter().enumerate() {
                    if i > 0 {
                        f.write_char(',')?;
                    }
                    write!(f, "{}:{x}", Json::Str(k.clone()))?;
                }
                f.write_char('}')
            }
        }
    }
}

pub fn check_json(c: &Check) -> Json {
    let mut fields = vec![
        ("equationFamily", Json::Str(c.family.clone())),
        (
            "indexTuple",
            Json::Arr(c.index.iter().map(|&i| Json::Int(i as i64)).collect()),
        ),
        ("pass", Json::Bool(c.pass)),
        ("worstResidual", Json::Num(c.worst_residual)),
        ("worstAbsolute", Json::Num(c.worst_absolute)),
        ("tolerance", Json::Num(c.tolerance)),
    ];
    if !c.witness.is_empty() {
        fields.push((
            "witness",
            Json::Obj(
                c.witness
                    .iter()
                    .map(|(v, x)| (v.clone(), Json::Num(*x)))
                    .collect(),
            ),
        ));
    }
    if let Some(n) = &c.note {
        fields.push(("note", Json::Str(n.clone())));
    }
    Json::obj(fields)
}

pub fn report_json(r: &Report) -> Json {
    let mut fields = vec![(
        "checks",
        Json::Arr(r.checks.iter().map(check_json).collect()),
    )];
    if let Some(v) = &r.verdict {
        fields.push(("verdict", Json::Str(v.clone())));
    }
    Json::obj(fields)
}

/// The JSON text of a report.
pub fn emit_report(r: &Report) -> String {
    report_json(r).to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::ex;

    const CLASSICAL: &str = "[base M]\ndim = 1\n[algebroid]\nrank = 1\nrho[1][1] = 1\n";

    fn code(text: &str) -> ErrorCode {
        parse_model(text).unwrap_err().code
    }

    #[test]
    fn minimal_classical_model() {
        let m = parse_model(CLASSICAL).unwrap();
        assert_eq!(m.m(), 1);
        assert_eq!(m.algebroid, GeneralizedLieAlgebroid::tangent(1));
        assert_eq!(
            m.primal,
            AnchoredBundle::identity(m.algebroid.clone(), Variance::Primal)
        );
        assert!(m.algebroid.validate(&m.sampler, m.tol).passed());
        assert_eq!(m.sampler.points, DEFAULT_POINTS);
    }

    #[test]
    fn antisymmetry_conflict() {
        let t = "[base M]\ndim = 1\n[algebroid]\nrank = 2\nL[1,2]^1 = 1\nL[2,1]^1 = 1\n";
        let e = parse_model(t).unwrap_err();
        assert_eq!((e.code, e.line), (ErrorCode::Antisymmetry, 6));
        let ok = "[base M]\ndim = 1\n[algebroid]\nrank = 2\nL[1,2]^1 = 1\nL[2,1]^1 = -1\n";
        assert!(parse_model(ok).is_ok());
    }

    #[test]
    fn unknown_variable() {
        let t = "[base M]\ndim = 1\n[algebroid]\nrank = 2\n[lagrangian]\nL = y1^2 + y3^2\n";
        let e = parse_model(t).unwrap_err();
        assert_eq!((e.code, e.line), (ErrorCode::UnknownVariable, 6));
        assert!(e.message.contains("y3"));
        // the anchor lives on N, so x is foreign there
        assert_eq!(
            code("[base M]\ndim = 1\n[algebroid]\nrank = 1\nrho[1][1] = x1\n"),
            ErrorCode::UnknownVariable
        );
    }

    #[test]
    fn error_codes() {
        let base = "[base M]\ndim = 1\n[algebroid]\nrank = 1\n";
        assert_eq!(code(&format!("{base}rank = 2\n")), ErrorCode::DuplicateKey);
        assert_eq!(
            code(&format!("{base}rho[2][1] = 1\n")),
            ErrorCode::DimensionMismatch
        );
        assert_eq!(
            code(&format!("{base}rho[1][1] = 1 +\n")),
            ErrorCode::BadExpression
        );
        assert_eq!(
            code(&format!("{base}rho[1][1] = foo(k1)\n")),
            ErrorCode::UnknownFunction
        );
        assert_eq!(code(&format!("{base}[widget]\n")), ErrorCode::UnknownBlock);
        assert_eq!(code(&format!("{base}colour = 1\n")), ErrorCode::UnknownKey);
        assert_eq!(code("[base M]\ndim = 1\n"), ErrorCode::MissingKey);
        assert_eq!(
            code(&format!("{base}[map h]\nk1 = x1 + 1\n")),
            ErrorCode::MissingKey
        );
        assert_eq!(
            code(&format!("{base}[bundle E]\nrank = 1\ng[1][1] = 0\n")),
            ErrorCode::Singular
        );
        assert_eq!(
            code(&format!(
                "{base}[bundle E]\nrank = 1\ng[1][1] = 2\nginv[1][1] = 1\n"
            )),
            ErrorCode::BadInverse
        );
        assert_eq!(
            code(&format!("{base}[bundle E]\nrank = 2\ng = identity\n")),
            ErrorCode::DimensionMismatch
        );
        assert_eq!(
            code("[base M]\ndim = 1\n[base N]\ndim = 2\n[algebroid]\nrank = 1\n"),
            ErrorCode::DimensionMismatch
        );
        assert_eq!(code(&format!("{base}rho[1][1] 1\n")), ErrorCode::Syntax);
        assert_eq!(
            code(&format!("{base}[sampler]\npoints = -3\n")),
            ErrorCode::BadValue
        );
    }

    #[test]
    fn generalized_model_round_trips() {
        let t = "\
# generalized
[base M]
dim = 2
[map h]
k1 = x1 + 1
k2 = x2
x1 = k1 - 1
x2 = k2
[algebroid]
rank = 2
rho[1][1] = 1
rho[2][2] = k1^2
L[1,2]^1 = 2*k1
[bundle E]
rank = 2
g[1][1] = 1 + x1^2
g[1][2] = x1
g[2][2] = 1
[section u]
s[1] = x1*x2
[section Z]
dt[1] = y1
dot[2] = x1*y2
[form w]
c[1,2] = x1
[lagrangian]
L = 0.5*(y1^2 + y2^2)
[sampler]
points = 20
seed = 7
tol = 1e-9
domain = -1, 1
domain[x1] = 0.5, 2
";
        let m = parse_model(t).unwrap();
        assert_eq!(m.primal.g(1, 0), &ex("x1"));
        assert!(m.auto_inverse[0]);
        assert_eq!(
            m.section("u"),
            Some(&NamedSection::Base(vec![ex("x1*x2"), Expr::zero()]))
        );
        assert!(matches!(
            m.section("Z"),
            Some(NamedSection::Prolong(Variance::Primal, _))
        ));
        assert_eq!(m.form("w").unwrap().degree, 2);
        assert_eq!((m.sampler.points, m.sampler.seed, m.tol), (20, 7, 1e-9));
        assert_eq!(m.sampler.domain_of("x1"), (0.5, 2.0));
        let printed = print_model(&m);
        let again = parse_model(&printed).unwrap();
        assert_eq!(again, m, "{printed}");
        assert_eq!(print_model(&again), printed);
    }

    #[test]
    fn explicit_inverse_round_trips() {
        let t = "[base M]\ndim = 1\n[algebroid]\nrank = 2\n[bundle Edual]\nrank = 2\ng[1][1] = 2\ng[2][2] = 1\ng[1][2] = x1\nginv[1][1] = 0.5\nginv[2][2] = 1\nginv[1][2] = -0.5*x1\n";
        let m = parse_model(t).unwrap();
        assert!(!m.auto_inverse[1]);
        assert_eq!(m.dual.ginv(0, 1), &ex("-0.5*x1"));
        let again = parse_model(&print_model(&m)).unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn json_reports() {
        assert_eq!(emit_report(&Report::new()), r#"{"checks":[]}"#);
        let mut r = Report::new();
        r.push(Check::flag("identity", vec![1, 2], true, None));
        let v: serde_json::Value = serde_json::from_str(&emit_report(&r)).unwrap();
        assert_eq!(v["checks"][0]["pass"], true);
        assert_eq!(v["checks"][0]["indexTuple"], serde_json::json!([1, 2]));
        assert!(v["checks"][0].get("worstResidual").is_some());
        let s = Sampler::new(5, 1);
        let probe = crate::check::Probe::new(vec!["x1".into()], s.generate(&["x1".into()]), 1e-8);
        let mut f = Report::new();
        f.push(probe.check("broken", vec![], &ex("x1"), &ex("x1 + 1")));
        f.verdict = Some("failed".into());
        let text = emit_report(&f);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["checks"][0]["pass"], false);
        assert!(v["checks"][0]["witness"]["x1"].is_number());
        assert_eq!(v["verdict"], "failed");
        assert!(text.contains("e-1") || text.contains("e0"));
        assert_eq!(Json::Num(0.1).to_string(), "1.0000000000000001e-1");
    }
}
