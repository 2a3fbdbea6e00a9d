use std::fmt::Write as _;

use super::{CardValue, CircuitDescription, Directive, SourceSpec};

/// Renders a description back to netlist text that [`super::parse`] reads
/// as an equal description.
pub fn to_netlist(desc: &CircuitDescription) -> String {
    let mut out = String::new();
    if !desc.title.is_empty() {
        let _ = writeln!(out, ".title {}", desc.title);
    }
    for d in &desc.directives {
        match d {
            Directive::Param { name, value } => {
                let _ = writeln!(out, ".param {name}={value}");
            }
            Directive::Temp(t) => {
                let _ = writeln!(out, ".temp {t}");
            }
            Directive::Tran { tstep, tstop, tmax } => {
                let _ = write!(out, ".tran {tstep} {tstop}");
                if let Some(m) = tmax {
                    let _ = write!(out, " {m}");
                }
                out.push('\n');
            }
        }
    }
    for m in desc.models.values() {
        let _ = write!(out, ".model {} {} (", m.name, m.kind.keyword());
        let params: Vec<String> = m.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let _ = writeln!(out, "{})", params.join(" "));
    }
    for e in &desc.elements {
        let _ = write!(out, "{} {}", e.name, e.nodes.join(" "));
        match &e.value {
            CardValue::Value(v) => {
                let _ = write!(out, " {v}");
            }
            CardValue::Model(m) => {
                let _ = write!(out, " {m}");
            }
            CardValue::Source(SourceSpec::Dc(v)) => {
                let _ = write!(out, " dc {v}");
            }
            CardValue::Source(SourceSpec::Pulse(p)) => {
                let _ = write!(
                    out,
                    " pulse({} {} {} {} {} {}",
                    p.v1, p.v2, p.delay, p.rise, p.fall, p.width
                );
                if let Some(per) = &p.period {
                    let _ = write!(out, " {per}");
                }
                out.push(')');
            }
            CardValue::Source(SourceSpec::Pwl(points)) => {
                let body: Vec<String> = points.iter().map(|(t, v)| format!("{t} {v}")).collect();
                let _ = write!(out, " pwl({})", body.join(" "));
            }
        }
        out.push('\n');
    }
    out.push_str(".end\n");
    out
}

#[cfg(test)]
mod tests {
    use super::super::parse;
    use super::*;

    #[test]
    fn round_trip_mixed() {
        let text = "\
.title mixed
.param vg=4
.model q nmos(k=0.1 vt0=2)
V1 a 0 pulse(0 5 1m 0 0 1m 4m)
V2 g 0 {vg}
R1 a b 10k
C1 b 0 1u
M1 b g 0 q
";
        let d = parse(text).unwrap();
        let again = parse(&to_netlist(&d)).unwrap();
        assert_eq!(d, again);
    }
}
