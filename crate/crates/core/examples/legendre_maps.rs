//! Legendre maps: Newton inversion of the fiber derivative, round trips
//! and the Finsler classification.

use std::sync::Arc;

use gla::expr::parse;
use gla::legendre::{
    check_homogeneity, check_round_trip, check_transform_identity, phi, solve_fiber,
    FundamentalFunction, LegendreTransform,
};
use gla::modelio::parse_model;

fn main() {
    let e = parse_model(include_str!("../models/euclidean.model")).unwrap();
    let (l, h) = (e.lagrangian().unwrap(), e.hamiltonian().unwrap());
    println!(
        "phiL(0,0; 3,-1) = {:?}",
        phi(&l, &[0.0, 0.0], &[3.0, -1.0]).unwrap()
    );
    let s = solve_fiber(&h, &[0.0, 0.0], &[3.0, -1.0], None).unwrap();
    println!(
        "solve phiH(p) = (3,-1): p = {:?} in {} iterations",
        s.y, s.iterations
    );
    println!(
        "round trips pass: {}",
        check_round_trip(&l, &h, &e.sampler, 1e-8).passed()
    );

    let q = parse_model(include_str!("../models/quartic.model")).unwrap();
    let lq = q.lagrangian().unwrap();
    let s = solve_fiber(&lq, &[0.0, 0.0], &[4.0 / 3.0, 0.5], None).unwrap();
    println!(
        "quartic: y = {:?} after {} iterations, residual {:.1e}",
        s.y, s.iterations, s.residual
    );
    // p·y − L is the dual energy when L is 2-homogeneous in the fiber
    let finsler = FundamentalFunction::lagrangian(
        parse("0.5*(y1^2 + y2^2) + 0.5*sqrt(y1^4 + y2^4)").unwrap(),
        2,
        2,
    )
    .unwrap();
    let hf = LegendreTransform::new(Arc::new(finsler.clone()));
    for c in &check_round_trip(&finsler, &hf, &q.sampler.clone().with_points(20), 1e-5).checks {
        println!("numeric transform of 0.5*(y1^2 + y2^2) + 0.5*sqrt(y1^4 + y2^4): {c}");
    }

    for (name, text) in [
        ("euclidean", include_str!("../models/euclidean.model")),
        ("indefinite", include_str!("../models/indefinite.model")),
        ("tilted", include_str!("../models/tilted.model")),
    ] {
        let m = parse_model(text).unwrap();
        let r = check_homogeneity(&m.lagrangian().unwrap(), &m.sampler, 1e-8);
        println!("{name:10} {}", r.verdict.unwrap_or_default());
    }
    let p = parse_model(include_str!("../models/potential.model")).unwrap();
    let c = check_transform_identity(
        &p.lagrangian().unwrap(),
        &p.hamiltonian().unwrap(),
        &p.sampler,
        1e-8,
    );
    println!("potential: {c}");
}
