//! Wedge products, contraction with sections, pullback by a bundle
//! morphism, and the Lie derivative along a section.

use gla::expr::ex;
use gla::exterior::{lie_derivative_f, wedge, FormQ};
use gla::modelio::parse_model;

fn main() {
    let s1 = FormQ::covector(2, 0);
    let s2 = FormQ::covector(2, 1);
    let w = wedge(&s1, &s2).unwrap();
    println!("s^1 ^ s^2 = {w}");
    let e1 = vec![ex("1"), ex("0")];
    let e2 = vec![ex("0"), ex("1")];
    println!(
        "(s^1 ^ s^2)(s_1, s_2) = {}",
        w.evaluate(&[e1.clone(), e2.clone()])
    );
    println!("(s^1 ^ s^2)(s_2, s_1) = {}", w.evaluate(&[e2, e1]));

    let m = parse_model(include_str!("../models/generalized.model")).unwrap();
    let g = &m.primal.morphism.forward;
    let theta = m.form("w").unwrap();
    println!("theta          = {theta}");
    println!("pullback by g  = {}", g.pullback_form(theta));
    let u = m.primal.push(&[ex("x1"), ex("1")]);
    let on_n = FormQ::one_form(vec![ex("k1"), ex("1")]);
    println!(
        "L_u (k1 s^1 + s^2) = {}",
        lie_derivative_f(&m.algebroid, &u, &on_n)
    );
}
