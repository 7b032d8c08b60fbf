//! Vertical and complete lifts of a section, the K coefficients, and the
//! almost tangent structure, on the classical and generalized models.

use gla::expr::ex;
use gla::modelio::{parse_model, NamedSection};
use gla::prolong::Variance;

fn main() {
    let classical = parse_model(include_str!("../models/classical.model")).unwrap();
    let Some(NamedSection::Base(u)) = classical.section("u") else {
        unreachable!()
    };
    let b = &classical.primal;
    println!("classical, u = x1 s_1");
    println!(
        "  u^v = {}",
        b.vertical_lift_section(u).display(Variance::Primal)
    );
    println!(
        "  u^c = {}",
        b.complete_lift_section(u).display(Variance::Primal)
    );
    println!(
        "  u^C = {}",
        b.complete_lift_gh(u).display(Variance::Primal)
    );
    println!(
        "  J(u^C) = {}",
        b.almost_tangent(&b.complete_lift_gh(u))
            .display(Variance::Primal)
    );

    let g = parse_model(include_str!("../models/generalized.model")).unwrap();
    let u = vec![ex("x1"), ex("1")];
    for v in [Variance::Primal, Variance::Dual] {
        let b = g.bundle(v);
        println!("generalized, {v:?}, u = x1 e_1 + e_2");
        println!("  u^c = {}", b.complete_lift_section(&u).display(v));
        for (a, row) in b.k_coefficients(&u).iter().enumerate() {
            for (c, k) in row.iter().enumerate() {
                println!("  K_{}^{} = {}", a + 1, c + 1, k);
            }
        }
    }
}
