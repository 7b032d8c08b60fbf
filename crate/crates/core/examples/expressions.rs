//! Parse, simplify, differentiate and evaluate expressions; compare two
//! expressions at sampled points.

use gla::expr::{equivalent, parse, Binding, Sampler};

fn main() {
    let f = parse("x1^2*sin(x2) + 3*x1*x1 - x1^2").expect("valid expression");
    println!("f          = {f}");
    println!("simplified = {}", f.simplify());
    let dx1 = f.diff("x1");
    println!("df/dx1     = {}", dx1.simplify());
    let at = Binding::from_pairs(&[("x1", 1.5), ("x2", 0.25)]);
    println!("f(1.5, 0.25) = {}", f.eval(&at).unwrap());
    let g = parse("x1^2*(sin(x2) + 2)").unwrap();
    let s = Sampler::new(50, 1);
    println!(
        "f == x1^2*(sin(x2) + 2) at 50 points: {}",
        equivalent(&f, &g, &s, 1e-12).unwrap()
    );
    match parse("x1 + (x2") {
        Ok(_) => unreachable!(),
        Err(e) => println!("parse error: {e}"),
    }
}
