//! Prints the bench netlist of a preset, e.g.
//! `cargo run --example print_bench -- vgs4 1m`.

use latchsim::netlist::units::parse_number;
use latchsim::seltb::Preset;

fn main() {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "vgs5".into());
    let preset = match Preset::parse(&name) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(1);
        }
    };
    let mut params = preset.params();
    for t in args.filter_map(|a| parse_number(&a)) {
        params.inject_sel(t);
    }
    if preset.protected() {
        print!("{}", params.bench_netlist());
    } else {
        print!("{}", params.unprotected_netlist());
    }
}
