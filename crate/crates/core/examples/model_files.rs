//! Parse a model, print it canonically, reject a malformed one, and emit a
//! JSON report.

use gla::modelio::{emit_report, parse_model, print_model};

fn main() {
    let m = parse_model(include_str!("../models/generalized.model")).unwrap();
    let text = print_model(&m);
    println!("{text}");
    assert_eq!(parse_model(&text).unwrap(), m);
    match parse_model(include_str!("../models/invalid/antisymmetry.model")) {
        Ok(_) => unreachable!(),
        Err(e) => println!("rejected: {e} (code {})", e.code),
    }
    let r = m.algebroid.check_antisymmetry();
    println!("{}", emit_report(&r));
}
