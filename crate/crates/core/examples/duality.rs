//! Tangent applications of the Legendre maps, the morphism conditions and
//! the equivalence verdict; the mismatched pair is caught by bracket
//! commutation alone.

use gla::duality::{Lift, Side};
use gla::modelio::{parse_model, NamedSection};

fn main() {
    for (name, text) in [
        ("euclidean", include_str!("../models/euclidean.model")),
        ("diag21", include_str!("../models/diag21.model")),
        ("mismatched", include_str!("../models/mismatched.model")),
    ] {
        let m = parse_model(text).unwrap();
        let pair = m.pair().unwrap();
        let s = m.sampler.clone().with_points(30);
        let r = pair.legendre_equivalence(&s, 1e-10);
        println!("{name:10} verdict: {}", r.verdict.as_deref().unwrap_or(""));
        for c in r.failures().take(2) {
            println!("    {c}");
        }
    }
    let m = parse_model(include_str!("../models/mismatched.model")).unwrap();
    let pair = m.pair().unwrap();
    if let (Some(NamedSection::Prolong(_, z)), Some(NamedSection::Prolong(_, w))) =
        (m.section("Z"), m.section("W"))
    {
        let lhs = pair.tangent(Side::Lagrange, &pair.primal.bracket_prolong(z, w));
        let rhs = pair.dual.bracket_prolong(
            &pair.tangent(Side::Lagrange, z),
            &pair.tangent(Side::Lagrange, w),
        );
        println!("T[Z,W] = {}", lhs.display(gla::prolong::Variance::Dual));
        println!("[TZ,TW] = {}", rhs.display(gla::prolong::Variance::Dual));
    }
    let e = parse_model(include_str!("../models/euclidean.model")).unwrap();
    let pair = e.pair().unwrap();
    if let Some(NamedSection::Base(u)) = e.section("u") {
        for lift in [Lift::Vertical, Lift::Complete] {
            let i = pair.section_implication(Side::Lagrange, lift, u, &e.sampler, 1e-10);
            println!("lift implication {lift:?}: {}", i.status);
        }
    }
}
