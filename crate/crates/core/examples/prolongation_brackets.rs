//! Brackets on the prolongation: the lift identities for random sections
//! and the full battery of lift checks for each bundled model.

use gla::modelio::{parse_model, NamedSection};
use gla::prolong::{LiftChecks, Variance};

fn main() {
    let m = parse_model(include_str!("../models/classical.model")).unwrap();
    if let (Some(NamedSection::Prolong(v, z)), Some(NamedSection::Prolong(_, w))) =
        (m.section("Z"), m.section("W"))
    {
        println!("[Z, W] = {}", m.primal.bracket_prolong(z, w).display(*v));
    }
    for (name, text) in [
        ("classical", include_str!("../models/classical.model")),
        ("liealgebroid", include_str!("../models/liealgebroid.model")),
        ("generalized", include_str!("../models/generalized.model")),
    ] {
        let m = parse_model(text).unwrap();
        let s = m.sampler.clone().with_points(30);
        for v in [Variance::Primal, Variance::Dual] {
            let r = LiftChecks::new(m.bundle(v), &s, m.tol).all(&s, 3);
            println!(
                "{name:13} {v:?}: {} checks, passed: {}, worst {:.2e}",
                r.checks.len(),
                r.passed(),
                r.worst_overall()
            );
        }
    }
}
