use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn latchsim(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_latchsim"))
        .args(args)
        .current_dir(dir)
        .env_remove("LATCHSIM_OUT_DIR")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn key_values(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn num(kv: &BTreeMap<String, String>, key: &str) -> f64 {
    kv[key].parse().unwrap_or_else(|_| panic!("{key} = {}", kv[key]))
}

const RC: &str = ".title rc\nV1 in 0 pulse(0 10 0 1p 1p 10 20)\nR1 in out 10k\nC1 out 0 10u\n.tran 1m 0.5\n.end\n";

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|c| c.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn simulate_rc_matches_exponential() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("rc.cir"), RC).unwrap();
    let o = latchsim(&["simulate", "rc.cir", "--out", "rc.csv"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = read_csv(&dir.path().join("rc.csv"));
    assert_eq!(header, ["time", "v(in)", "v(out)", "i(v1)"]);
    assert!(rows.windows(2).all(|w| w[1][0] > w[0][0]), "time not increasing");
    assert_eq!(rows.last().unwrap()[0], 0.5);
    for row in rows.iter().filter(|r| r[0] > 1e-3) {
        let expect = 10.0 * (1.0 - (-row[0] / 0.1).exp());
        assert!(
            (row[2] - expect).abs() <= 0.005 * expect,
            "t = {}: {} vs {expect}",
            row[0],
            row[2]
        );
    }
}

#[test]
fn simulate_tstop_zero_writes_operating_point() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("div.cir"), "V1 a 0 10\nR1 a b 1k\nR2 b 0 1k\n").unwrap();
    let o = latchsim(&["simulate", "div.cir", "--tstop", "0", "--out-dir", "out"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = read_csv(&dir.path().join("out/div.csv"));
    assert_eq!(header, ["time", "v(a)", "v(b)", "i(v1)"]);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], 0.0);
    assert!((rows[0][2] - 5.0).abs() < 1e-9);
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("rc.cir"), RC).unwrap();
    for name in ["a.csv", "b.csv"] {
        assert!(latchsim(&["simulate", "rc.cir", "--out", name], dir.path())
            .status
            .success());
    }
    assert_eq!(
        fs::read(dir.path().join("a.csv")).unwrap(),
        fs::read(dir.path().join("b.csv")).unwrap()
    );
}

#[test]
fn precision_flag_sets_significant_digits() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("rc.cir"), RC).unwrap();
    let o = latchsim(
        &[
            "simulate",
            "rc.cir",
            "--tstop",
            "0",
            "--precision",
            "4",
            "--out",
            "p.csv",
        ],
        dir.path(),
    );
    assert!(o.status.success());
    let text = fs::read_to_string(dir.path().join("p.csv")).unwrap();
    assert_eq!(text.lines().nth(1).unwrap(), "0.000e0,0.000e0,0.000e0,0.000e0");
}

#[test]
fn malformed_netlist_exits_2_with_line() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.cir"), "V1 a 0 1\nR1 a 0 1k\nR2 a 0 ten\n").unwrap();
    let o = latchsim(&["simulate", "bad.cir", "--tstop", "1m"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(latchsim(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(
        latchsim(&["sel", "--preset", "vgs9"], dir.path()).status.code(),
        Some(1)
    );
    assert_eq!(latchsim(&["sel", "--set", "nope=1"], dir.path()).status.code(), Some(1));
    let o = latchsim(&["sweep", "--param", "vgs_q2", "--values", ""], dir.path());
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert_eq!(
        latchsim(&["sweep", "--param", "bogus", "--values", "1"], dir.path())
            .status
            .code(),
        Some(1)
    );
    fs::write(dir.path().join("rc.cir"), "V1 a 0 1\nR1 a 0 1k\n").unwrap();
    let o = latchsim(&["simulate", "rc.cir"], dir.path());
    assert_eq!(o.status.code(), Some(1), "no stop time anywhere");
    assert!(latchsim(&["--help"], dir.path()).status.success());
}

#[test]
fn missing_file_exits_5() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(latchsim(&["simulate", "absent.cir"], dir.path()).status.code(), Some(5));
    assert_eq!(
        latchsim(&["--config", "absent.cfg", "design", "offtime"], dir.path())
            .status
            .code(),
        Some(5)
    );
}

#[test]
fn design_offtime_reference_values() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "design", "offtime", "--r1", "10k", "--c1", "1u", "--vo", "8.8", "--vtq3", "2.1", "--r2", "10k", "--c2", "10u",
        "--vdd", "10", "--vref2", "5",
    ];
    let o = latchsim(&args, dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    let first = text.lines().next().unwrap();
    assert!(first.contains("t1=14.33ms") && first.contains("t2=69.31ms"), "{first}");
    let kv = key_values(&text);
    // the published total rounds the log terms slightly differently
    assert!((num(&kv, "total_s") - 83.645e-3).abs() < 5e-6, "{first}");
    assert!((num(&kv, "total_s") - num(&kv, "t1_s") - num(&kv, "t2_s")).abs() < 2e-10);
}

#[test]
fn design_domain_error_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let o = latchsim(&["design", "offtime", "--vo", "1"], dir.path());
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("v_o"), "{}", stderr(&o));
    let o = latchsim(&["design", "size-rc", "--target", "5m", "--free", "r2"], dir.path());
    assert_eq!(o.status.code(), Some(4));
    let o = latchsim(&["design", "fit", "--point", "3:1m", "--point", "3:2m"], dir.path());
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn design_window_reports_feasibility() {
    let dir = tempfile::tempdir().unwrap();
    let o = latchsim(&["design", "window", "--i-op", "10m", "--i-max", "450m"], dir.path());
    let kv = key_values(&stdout(&o));
    assert_eq!(kv["feasible"], "true");
    assert!((num(&kv, "lo") - 2.457).abs() < 1e-3);
    assert!((num(&kv, "hi") - 5.000).abs() < 1e-3);
    assert!(num(&kv, "guarded_lo") > num(&kv, "lo"));

    let o = latchsim(
        &[
            "design", "window", "--i-op", "100m", "--i-max", "120m", "--t-min", "-55", "--t-max", "125",
        ],
        dir.path(),
    );
    assert!(o.status.success());
    let kv = key_values(&stdout(&o));
    assert_eq!(kv["feasible"], "false");
    assert!(num(&kv, "shortfall") > 0.0);
    assert!(num(&kv, "i_max_needed") > 0.12);
    assert!(kv.contains_key("diagnostic"));
}

#[test]
fn design_fit_and_size_rc() {
    let dir = tempfile::tempdir().unwrap();
    let o = latchsim(
        &["design", "fit", "--point", "5:450m", "--point", "2.5:12m"],
        dir.path(),
    );
    let kv = key_values(&stdout(&o));
    assert!((num(&kv, "k") - 0.1008).abs() < 1e-4);
    assert!((num(&kv, "vt0") - 2.012).abs() < 1e-3);

    let o = latchsim(
        &["design", "size-rc", "--target", "83.6428618m", "--free", "c2"],
        dir.path(),
    );
    let kv = key_values(&stdout(&o));
    assert!((num(&kv, "c2") - 10e-6).abs() < 1e-12, "{kv:?}");
}

#[test]
fn sel_report_deltas_recompute_from_fields() {
    let dir = tempfile::tempdir().unwrap();
    // 17 digits print every field exactly
    let o = latchsim(
        &[
            "--precision",
            "17",
            "sel",
            "--preset",
            "vgs5",
            "--fire-at",
            "1ms",
            "--tstop",
            "200ms",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let kv = key_values(&stdout(&o));
    assert_eq!(kv["scenario"], "vgs5");
    let i = num(&kv, "i_limited");
    assert!((i - 0.450).abs() < 0.01 * 0.450);
    let t_off = num(&kv, "t_off");
    assert!((81.9e-3..85.3e-3).contains(&t_off), "{t_off}");
    for (m, p, a, r) in [
        ("i_limited", "predicted_limit", "limit_delta_abs", "limit_delta_rel"),
        (
            "t_off",
            "predicted_off_time",
            "off_time_delta_abs",
            "off_time_delta_rel",
        ),
    ] {
        let (m, p) = (num(&kv, m), num(&kv, p));
        assert_eq!(num(&kv, a), m - p);
        assert_eq!(num(&kv, r), (m - p) / p);
    }
    assert_eq!(kv["choreography_in_order"], "true");
    assert_eq!(kv["hazard"], "none");
    assert!(dir.path().join("vgs5.csv").exists());
    assert_eq!(fs::read_to_string(dir.path().join("vgs5.report")).unwrap(), stdout(&o));
}

#[test]
fn sel_unprotected_flags_hazard() {
    let dir = tempfile::tempdir().unwrap();
    let o = latchsim(
        &["sel", "--preset", "unprotected", "--fire-at", "1ms", "--tstop", "5ms"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let kv = key_values(&stdout(&o));
    assert_eq!(kv["hazard"], "unbounded-current");
    assert!(num(&kv, "i_peak") > 20.0 * num(&kv, "predicted_limit"));
}

#[test]
fn sel_fire_beyond_stop_has_no_event() {
    let dir = tempfile::tempdir().unwrap();
    let o = latchsim(&["sel", "--fire-at", "300ms", "--tstop", "200ms"], dir.path());
    assert!(o.status.success());
    let kv = key_values(&stdout(&o));
    assert_eq!(kv["fire_time"], "none");
    assert_eq!(kv["i_peak"], kv["i_op"]);
    assert_eq!(kv["choreography"], "none");
}

#[test]
fn config_file_and_env_resolution() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("run.cfg"),
        "# bench\npreset = vgs4\ntstop = 5m\nout_dir = from_cfg\n",
    )
    .unwrap();
    let o = latchsim(&["--config", "run.cfg", "sel"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(key_values(&stdout(&o))["scenario"], "vgs4");
    assert!(dir.path().join("from_cfg/vgs4.csv").exists());

    // flags beat the file
    let o = latchsim(
        &["--config", "run.cfg", "--out-dir", "flag", "sel", "--preset", "vgs3"],
        dir.path(),
    );
    assert!(o.status.success());
    assert!(dir.path().join("flag/vgs3.csv").exists());

    let o = Command::new(env!("CARGO_BIN_EXE_latchsim"))
        .args(["sel", "--tstop", "2ms"])
        .current_dir(dir.path())
        .env("LATCHSIM_OUT_DIR", dir.path().join("env"))
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("env/vgs5.csv").exists());

    fs::write(dir.path().join("bad.cfg"), "colour = blue\n").unwrap();
    assert_eq!(
        latchsim(&["--config", "bad.cfg", "sel"], dir.path()).status.code(),
        Some(1)
    );
}

#[test]
fn sweep_gate_drive_limits_increase() {
    let dir = tempfile::tempdir().unwrap();
    let o = latchsim(
        &["sweep", "--param", "vgs_q2", "--values", "2.5,3,4,5", "--tstop", "5ms"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = {
        let mut r = csv::Reader::from_path(dir.path().join("vgs5_sweep_vgs_q2.csv")).unwrap();
        let h: Vec<String> = r.headers().unwrap().iter().map(str::to_string).collect();
        let rows: Vec<Vec<String>> = r
            .records()
            .map(|x| x.unwrap().iter().map(str::to_string).collect())
            .collect();
        (h, rows)
    };
    assert_eq!(header, ["value", "i_limited", "t_off", "t_detect", "status"]);
    assert_eq!(rows.len(), 4);
    let limits: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(limits.windows(2).all(|w| w[1] > w[0]), "{limits:?}");
    assert!(rows.iter().all(|r| r[4] == "ok"));
    for k in 0..4 {
        assert!(dir.path().join(format!("vgs5_vgs_q2_{k}.csv")).exists());
    }
}

#[test]
fn sweep_c2_scales_recharge_linearly() {
    let dir = tempfile::tempdir().unwrap();
    let o = latchsim(
        &["sweep", "--param", "c2", "--values", "1u,10u,100u", "--tstop", "1"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let mut t2 = Vec::new();
    for k in 0..3 {
        let kv = key_values(&fs::read_to_string(dir.path().join(format!("vgs5_c2_{k}.report"))).unwrap());
        let t_off = num(&kv, "t_off");
        let predicted = num(&kv, "predicted_off_time");
        assert!(
            (t_off - predicted).abs() / predicted < 0.05,
            "c2 #{k}: {t_off} vs {predicted}"
        );
        t2.push(t_off);
    }
    // t_off = t1 + a·c2, so equal decades give equal ratios of differences
    let ratio = (t2[2] - t2[1]) / (t2[1] - t2[0]);
    assert!((ratio - 10.0).abs() < 0.5, "ratio {ratio}");
}
