use std::collections::BTreeMap;

use latchsim::netlist::{elaborate, parse, Circuit};
use latchsim::solver::{dc_operating_point, transient, SolverConfig, SolverError, Waveforms};

fn circuit(text: &str) -> Circuit {
    elaborate(&parse(text).unwrap(), &BTreeMap::new()).unwrap()
}

const RC: &str = "\
.title rc step
V1 in 0 pulse(0 10 0 0 0 10)
R1 in out 10k
C1 out 0 10u
";

fn first_crossing(w: &Waveforms, name: &str, level: f64) -> Option<f64> {
    let v = w.get(name)?;
    (1..v.len()).find_map(|k| {
        (v[k - 1] < level && v[k] >= level).then(|| {
            let f = (level - v[k - 1]) / (v[k] - v[k - 1]);
            w.time[k - 1] + f * (w.time[k] - w.time[k - 1])
        })
    })
}

#[test]
fn rc_step_matches_exponential() {
    let w = transient(&circuit(RC), 0.5, &SolverConfig::default(), &[0.1]).unwrap();
    let at_tau = w.value_at("v(out)", 0.1).unwrap();
    let exact = 10.0 * (1.0 - (-1.0f64).exp());
    assert!((at_tau - exact).abs() / exact < 5e-3, "v(0.1) = {at_tau}");
    assert!((exact - 6.321).abs() < 1e-3);
    for (t, v) in w.time.iter().zip(w.get("v(out)").unwrap()) {
        let e = 10.0 * (1.0 - (-t / 0.1).exp());
        assert!((v - e).abs() <= 5e-3 * e.max(1.0), "t = {t}: {v} vs {e}");
    }
}

#[test]
fn rc_threshold_crossing_time() {
    let w = transient(&circuit(RC), 0.2, &SolverConfig::default(), &[]).unwrap();
    let tc = first_crossing(&w, "v(out)", 5.0).unwrap();
    let exact = 0.1 * 2.0f64.ln();
    assert!((tc - exact).abs() / exact < 5e-3, "crossing at {tc}");
}

#[test]
fn divider_is_exact_and_linear_in_one_iteration() {
    let c = circuit("V1 a 0 10\nR1 a m 1k\nR2 m 0 1k\n");
    let op = dc_operating_point(&c, &SolverConfig::default()).unwrap();
    assert!((op.voltage(&c, "m").unwrap() - 5.0).abs() < 1e-12);
    assert_eq!(op.iterations, 1);
    assert!((op.branch_current(&c, "V1").unwrap() + 5e-3).abs() < 1e-15);
}

#[test]
fn diode_from_zero_guess_converges() {
    let c = circuit("V1 a 0 5\nR1 a k 1\nD1 k 0 d\n");
    let op = dc_operating_point(&c, &SolverConfig::default()).unwrap();
    assert!(op.iterations <= 50, "{} iterations", op.iterations);
    let vd = op.voltage(&c, "k").unwrap();
    assert!(vd > 0.8 && vd < 1.5, "vd = {vd}");
    assert!(op.x.iter().all(|v| v.is_finite()));
}

#[test]
fn floating_subcircuit_reports_singular_or_is_rejected() {
    // sense-only gate between two sources keeps the matrix regular
    let c = circuit("V1 a 0 5\nR1 a 0 1k\nV2 g 0 3\nM1 a g 0 2n7000\n");
    assert!(dc_operating_point(&c, &SolverConfig::default()).is_ok());
    let bad = SolverConfig {
        reltol: -1.0,
        ..SolverConfig::default()
    };
    assert!(matches!(
        dc_operating_point(&c, &bad),
        Err(SolverError::InvalidConfig(_))
    ));
}
