use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use latchsim::netlist::{
    elaborate, parse, to_netlist, CardValue, CircuitDescription, ElementCard, ElementKind, NetlistError, SourceSpec,
    Value,
};
use proptest::prelude::*;

struct Case {
    path: PathBuf,
    text: String,
    /// `None` means the file must parse and elaborate.
    error: Option<(String, Option<usize>)>,
    overrides: BTreeMap<String, f64>,
}

fn load(path: &Path) -> Case {
    let text = fs::read_to_string(path).unwrap();
    let mut error = None;
    let mut overrides = BTreeMap::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("* expect:") {
            let mut words = rest.split_whitespace();
            let what = words.next().expect("expectation");
            if what != "ok" {
                let line_no = words.find_map(|w| w.strip_prefix("line=")).map(|n| n.parse().unwrap());
                error = Some((what.to_string(), line_no));
            }
        } else if let Some(rest) = line.strip_prefix("* override:") {
            let (k, v) = rest.trim().split_once('=').unwrap();
            overrides.insert(k.to_string(), latchsim::netlist::units::parse_number(v).unwrap());
        }
    }
    Case {
        path: path.to_path_buf(),
        text,
        error,
        overrides,
    }
}

fn corpus() -> Vec<Case> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/corpus");
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "cir"))
        .collect();
    paths.sort();
    paths.iter().map(|p| load(p)).collect()
}

fn variant(e: &NetlistError) -> String {
    format!("{e:?}").split([' ', '{', '(']).next().unwrap().to_string()
}

fn front_end(case: &Case) -> Result<CircuitDescription, NetlistError> {
    let desc = parse(&case.text)?;
    elaborate(&desc, &case.overrides)?;
    Ok(desc)
}

#[test]
fn corpus_has_every_error_class() {
    let cases = corpus();
    assert!(cases.len() >= 20, "only {} corpus files", cases.len());
    let classes: Vec<String> = cases
        .iter()
        .filter_map(|c| c.error.as_ref().map(|e| e.0.clone()))
        .collect();
    for class in [
        "UnknownDeviceKind",
        "DuplicateName",
        "BadNumber",
        "MissingNodes",
        "MissingValue",
        "UnresolvedModel",
        "WrongModelKind",
        "UnknownParam",
        "Syntax",
        "NoGround",
        "FloatingNode",
        "OverrideUnknownParam",
        "UndefinedParam",
        "InvalidValue",
    ] {
        assert!(classes.iter().any(|c| c == class), "no corpus file for {class}");
    }
}

#[test]
fn corpus_outcomes_match_expectations() {
    for case in corpus() {
        let name = case.path.file_name().unwrap().to_string_lossy().to_string();
        match (&case.error, front_end(&case)) {
            (None, Ok(_)) => {}
            (None, Err(e)) => panic!("{name}: unexpected error {e}"),
            (Some((class, _)), Ok(_)) => panic!("{name}: expected {class}, parsed fine"),
            (Some((class, line)), Err(e)) => {
                assert_eq!(&variant(&e), class, "{name}: {e}");
                if line.is_some() {
                    assert_eq!(e.line(), *line, "{name}: {e}");
                    assert!(
                        e.to_string().starts_with(&format!("line {}:", line.unwrap())),
                        "{name}: {e}"
                    );
                }
            }
        }
    }
}

#[test]
fn corpus_round_trips() {
    for case in corpus().into_iter().filter(|c| c.error.is_none()) {
        let desc = parse(&case.text).unwrap();
        let text = to_netlist(&desc);
        let again = parse(&text).unwrap_or_else(|e| panic!("{}: {e}\n{text}", case.path.display()));
        assert_eq!(again, desc, "{}", case.path.display());
        assert_eq!(
            elaborate(&again, &case.overrides).unwrap(),
            elaborate(&desc, &case.overrides).unwrap()
        );
    }
}

fn value() -> impl Strategy<Value = Value> {
    prop_oneof![
        4 => (1e-15f64..1e9).prop_map(Value::Num),
        1 => Just(Value::Param("p".into())),
    ]
}

fn element(k: usize) -> impl Strategy<Value = ElementCard> {
    let nodes = prop::sample::select(vec!["0", "a", "b", "n_1", "out"]);
    (
        0..3usize,
        nodes.clone(),
        nodes,
        value(),
        prop::collection::vec(0.0f64..10.0, 4),
    )
        .prop_map(move |(kind, n1, n2, v, pts)| {
            let (kind, name, value) = match kind {
                0 => (ElementKind::Resistor, format!("R{k}"), CardValue::Value(v)),
                1 => (ElementKind::Capacitor, format!("C{k}"), CardValue::Value(v)),
                _ => {
                    let mut t = 0.0;
                    let pairs = pts
                        .iter()
                        .map(|p| {
                            t += p;
                            (Value::Num(t), Value::Num(*p - 5.0))
                        })
                        .collect();
                    (
                        ElementKind::VoltageSource,
                        format!("V{k}"),
                        CardValue::Source(SourceSpec::Pwl(pairs)),
                    )
                }
            };
            ElementCard {
                name,
                kind,
                nodes: vec![n1.to_string(), n2.to_string()],
                value,
                line: 0,
            }
        })
}

fn description() -> impl Strategy<Value = CircuitDescription> {
    (1..8usize)
        .prop_flat_map(|n| (0..n).map(element).collect::<Vec<_>>())
        .prop_map(|mut elements| {
            // ground must appear somewhere
            elements[0].nodes[1] = "0".into();
            CircuitDescription {
                title: "generated".into(),
                elements,
                directives: vec![latchsim::netlist::Directive::Param {
                    name: "p".into(),
                    value: Value::Num(4.7e3),
                }],
                ..CircuitDescription::default()
            }
        })
}

proptest! {
    #[test]
    fn written_netlists_parse_back(desc in description()) {
        let text = to_netlist(&desc);
        let again = parse(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(again, desc);
    }
}
