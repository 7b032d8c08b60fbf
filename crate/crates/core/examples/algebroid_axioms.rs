//! Validate the axioms of the bundled algebroids; the broken model fails
//! the compatibility of the anchor with the bracket.

use gla::modelio::parse_model;

fn main() {
    for (name, text) in [
        ("classical", include_str!("../models/classical.model")),
        ("liealgebroid", include_str!("../models/liealgebroid.model")),
        ("generalized", include_str!("../models/generalized.model")),
        ("broken", include_str!("../models/broken.model")),
    ] {
        let m = parse_model(text).expect("bundled model parses");
        let r = m.algebroid.validate(&m.sampler, m.tol);
        let worst = r
            .checks
            .iter()
            .map(|c| c.worst_residual)
            .fold(0.0, f64::max);
        println!(
            "{name:13} {} checks, passed: {}, worst residual {worst:.3e}",
            r.checks.len(),
            r.passed()
        );
        for c in r.failures().take(3) {
            println!("    {c}");
        }
    }
    let m = parse_model(include_str!("../models/liealgebroid.model")).unwrap();
    let a = &m.algebroid;
    let (s1, s2) = (
        gla::algebroid::SectionF::basis(2, 0),
        gla::algebroid::SectionF::basis(2, 1),
    );
    println!("[s_1, s_2] = {}", a.bracket(&s1, &s2));
}
