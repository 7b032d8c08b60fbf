//! Drive the command line in-process, as the `gla` binary does.

fn main() {
    let model = concat!(env!("CARGO_MANIFEST_DIR"), "/models/classical.model");
    let euclid = concat!(env!("CARGO_MANIFEST_DIR"), "/models/euclidean.model");
    for args in [
        vec!["gla", "lift", model, "u", "--complete"],
        vec![
            "gla",
            "--json",
            "legendre",
            euclid,
            "--forward",
            "--at",
            "x1=0,y1=3,y2=-1",
        ],
        vec!["gla", "--points", "20", "check-duality", euclid],
    ] {
        println!("$ {}", args[1..].join(" "));
        let code = gla::cli::run(args, &mut std::io::stdout(), &mut std::io::stderr());
        println!("(exit {code})\n");
    }
}
