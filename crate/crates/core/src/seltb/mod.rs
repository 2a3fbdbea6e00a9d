//! The latch-up protection test bench: parameter set, netlist generation,
//! SEL injection, scenario runs and waveform measurements.
//!
//! Protected topology (node names as they appear in the waveforms):
//!
//! ```text
//! vdd ─VPROBE─ dev ─LED─ led_k ─RSER─ q2d      SCR dev→q2d, gate pulse scr_g
//! q2d ─M2─ q2s ─M1─ 0                          VGS2 holds q2g at q2s + vgs_q2
//! X1: q2d vs q2s + vref1 → cmp1_out ─D1─ c1 (R1 ∥ C1 to 0, gate of M3)
//! vcc ─R2─ c2 (C2 to 0, M3 drain)    X2: c2 vs vref2 → q1g (gate of M1)
//! ```
//!
//! CMP1 senses the drain-source voltage of Q2, which rises only when Q2
//! enters saturation. Q2's gate drive is referenced to its own source so
//! the limit does not depend on Q1's drop.

mod measure;

pub use measure::{measure, ChoreographyStep, SelMeasurements};

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::design::{off_time, saturation_current, DesignError, OffTimeBreakdown, OffTimeParams};
use crate::devices::{ComparatorModel, DiodeModel, Level, MosfetModel, ScrModel};
use crate::netlist::units::format_number;
use crate::netlist::{elaborate, parse, Circuit, NetlistError};
use crate::solver::{transient, SolverConfig, SolverError, Waveforms};

/// SEL gate pulse.
pub const FIRE_AMPLITUDE: f64 = 1.0;
pub const FIRE_WIDTH: f64 = 10e-6;

/// Signal names used by the measurements.
pub const DEVICE_CURRENT: &str = "i(vprobe)";
pub const CMP1_OUT: &str = "v(cmp1_out)";
pub const CMP2_OUT: &str = "v(q1g)";
pub const V_C1: &str = "v(c1)";
pub const V_C2: &str = "v(c2)";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SelError {
    #[error("invalid bench parameters: {0}")]
    InvalidParams(String),
    #[error("unknown bench parameter `{0}`")]
    UnknownParam(String),
    #[error("unknown preset `{0}` (expected vgs5, vgs4, vgs3, vgs2p5 or unprotected)")]
    UnknownPreset(String),
    #[error("waveforms lack signal `{0}`")]
    SignalMissing(String),
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Design(#[from] DesignError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelBenchParams {
    pub vdd_device: f64,
    pub vcc_cmp: f64,
    pub vref1: f64,
    pub vref2: f64,
    pub r1: f64,
    pub r2: f64,
    pub c1: f64,
    pub c2: f64,
    pub vgs_q2: f64,
    pub q1: MosfetModel,
    pub q2: MosfetModel,
    pub q3: MosfetModel,
    pub d1: DiodeModel,
    pub led: DiodeModel,
    pub r_series: f64,
    pub scr: ScrModel,
    pub cmp: ComparatorModel,
    pub sel_fire_times: Vec<f64>,
    pub temperature: f64,
}

impl Default for SelBenchParams {
    fn default() -> Self {
        let fitted = MosfetModel::fitted_2n7000();
        Self {
            vdd_device: 12.0,
            vcc_cmp: 10.0,
            vref1: 5.0,
            vref2: 5.0,
            r1: 10e3,
            r2: 10e3,
            c1: 1e-6,
            c2: 10e-6,
            vgs_q2: 5.0,
            q1: fitted,
            q2: fitted,
            q3: fitted.with_vt0(2.1),
            d1: DiodeModel::d1_default(),
            led: DiodeModel::led_default(),
            r_series: 1e3,
            scr: ScrModel::default(),
            cmp: ComparatorModel::default(),
            sel_fire_times: Vec::new(),
            temperature: 25.0,
        }
    }
}

/// Keys accepted by [`SelBenchParams::set`].
pub const PARAM_KEYS: &[&str] = &[
    "vdd_device",
    "vcc_cmp",
    "vref1",
    "vref2",
    "r1",
    "r2",
    "c1",
    "c2",
    "vgs_q2",
    "r_series",
    "temperature",
    "q1_k",
    "q1_vt0",
    "q2_k",
    "q2_vt0",
    "q2_lambda",
    "q3_k",
    "q3_vt0",
    "vt_tempco",
    "d1_is",
    "d1_n",
    "led_is",
    "led_n",
    "scr_ihold",
    "scr_von",
    "scr_ron",
    "scr_roff",
    "scr_vgt",
    "cmp_tpd",
    "cmp_vohdrop",
    "cmp_vol",
    "cmp_rout",
    "cmp_hyst",
];

impl SelBenchParams {
    fn slot(&mut self, key: &str) -> Option<&mut f64> {
        Some(match key {
            "vdd_device" => &mut self.vdd_device,
            "vcc_cmp" => &mut self.vcc_cmp,
            "vref1" => &mut self.vref1,
            "vref2" => &mut self.vref2,
            "r1" => &mut self.r1,
            "r2" => &mut self.r2,
            "c1" => &mut self.c1,
            "c2" => &mut self.c2,
            "vgs_q2" => &mut self.vgs_q2,
            "r_series" => &mut self.r_series,
            "temperature" => &mut self.temperature,
            "q1_k" => &mut self.q1.k_gain,
            "q1_vt0" => &mut self.q1.vt0,
            "q2_k" => &mut self.q2.k_gain,
            "q2_vt0" => &mut self.q2.vt0,
            "q2_lambda" => &mut self.q2.lambda,
            "q3_k" => &mut self.q3.k_gain,
            "q3_vt0" => &mut self.q3.vt0,
            "vt_tempco" => &mut self.q2.vt_tempco,
            "d1_is" => &mut self.d1.i_sat,
            "d1_n" => &mut self.d1.emission,
            "led_is" => &mut self.led.i_sat,
            "led_n" => &mut self.led.emission,
            "scr_ihold" => &mut self.scr.i_hold,
            "scr_von" => &mut self.scr.v_on,
            "scr_ron" => &mut self.scr.r_on,
            "scr_roff" => &mut self.scr.r_off,
            "scr_vgt" => &mut self.scr.gate_threshold,
            "cmp_tpd" => &mut self.cmp.t_pd,
            "cmp_vohdrop" => &mut self.cmp.v_out_high_drop,
            "cmp_vol" => &mut self.cmp.v_out_low,
            "cmp_rout" => &mut self.cmp.r_out,
            "cmp_hyst" => &mut self.cmp.hysteresis,
            _ => return None,
        })
    }

    /// Sets one scalar by key (see [`PARAM_KEYS`]). `vt_tempco` applies to
    /// all three MOSFETs.
    pub fn set(&mut self, key: &str, value: f64) -> Result<(), SelError> {
        let key = key.to_ascii_lowercase();
        *self.slot(&key).ok_or_else(|| SelError::UnknownParam(key.clone()))? = value;
        if key == "vt_tempco" {
            self.q1.vt_tempco = value;
            self.q3.vt_tempco = value;
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.clone().slot(&key.to_ascii_lowercase()).map(|v| *v)
    }

    pub fn validate(&self) -> Result<(), SelError> {
        let bad = |m: String| Err(SelError::InvalidParams(m));
        let positive = [
            ("vdd_device", self.vdd_device),
            ("vcc_cmp", self.vcc_cmp),
            ("r1", self.r1),
            ("r2", self.r2),
            ("c1", self.c1),
            ("c2", self.c2),
            ("r_series", self.r_series),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.vref2 > 0.0 && self.vref2 < self.vcc_cmp) {
            return bad(format!(
                "vref2 must lie in (0, vcc_cmp = {}), got {}",
                self.vcc_cmp, self.vref2
            ));
        }
        if !(self.vref1 > 0.0 && self.vref1 < self.vdd_device) {
            return bad(format!("vref1 must lie in (0, vdd_device), got {}", self.vref1));
        }
        let vt = self.q2.threshold(self.temperature);
        if !(self.vgs_q2 > vt) {
            return bad(format!(
                "vgs_q2 = {} does not exceed Q2's threshold {vt:.4} V",
                self.vgs_q2
            ));
        }
        for (name, m) in [("q1", &self.q1), ("q2", &self.q2), ("q3", &self.q3)] {
            m.validate()
                .map_err(|e| SelError::InvalidParams(format!("{name}: {e}")))?;
        }
        for (name, m) in [("d1", &self.d1), ("led", &self.led)] {
            m.validate()
                .map_err(|e| SelError::InvalidParams(format!("{name}: {e}")))?;
        }
        self.scr
            .validate()
            .map_err(|e| SelError::InvalidParams(format!("scr: {e}")))?;
        self.cmp
            .validate()
            .map_err(|e| SelError::InvalidParams(format!("cmp: {e}")))?;
        if let Some(t) = self.sel_fire_times.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
            return bad(format!("fire time must be finite and non-negative, got {t}"));
        }
        Ok(())
    }

    /// Adds an SEL event at `t_fire`.
    pub fn inject_sel(&mut self, t_fire: f64) {
        self.sel_fire_times.push(t_fire);
        self.sel_fire_times.sort_by(f64::total_cmp);
    }

    /// Square-law saturation limit of Q2 at the bench temperature.
    pub fn current_limit(&self) -> f64 {
        saturation_current(&self.q2, self.vgs_q2, self.temperature)
    }

    /// Comparator output swing midpoint on the `vcc_cmp` rail.
    pub fn comparator_midpoint(&self) -> f64 {
        let hi = self.cmp.output_level(Level::High, self.vcc_cmp, 0.0);
        let lo = self.cmp.output_level(Level::Low, self.vcc_cmp, 0.0);
        0.5 * (hi + lo)
    }

    /// Off-time predicted from the timer values and a measured C1 peak.
    pub fn predicted_off_time(&self, v_o: f64) -> Result<OffTimeBreakdown, DesignError> {
        off_time(&OffTimeParams {
            r1: self.r1,
            c1: self.c1,
            v_o,
            vt_q3: self.q3.threshold(self.temperature),
            r2: self.r2,
            c2: self.c2,
            vdd: self.vcc_cmp,
            vref2: self.vref2,
        })
    }

    /// Disjoint gate pulses; a fire landing inside an earlier pulse extends it.
    fn gate_source(&self) -> String {
        let mut pulses: Vec<(f64, f64)> = Vec::new();
        for &t in &self.sel_fire_times {
            match pulses.last_mut() {
                Some(last) if t <= last.1 => last.1 = last.1.max(t + FIRE_WIDTH),
                _ => pulses.push((t, t + FIRE_WIDTH)),
            }
        }
        if pulses.is_empty() {
            return "dc 0".into();
        }
        let f = format_number;
        let mut s = String::from("pwl(0 0");
        for (a, b) in pulses {
            if a > 0.0 {
                let _ = write!(s, " {} 0", f(a));
            }
            let _ = write!(
                s,
                " {} {} {} {} {} 0",
                f(a),
                f(FIRE_AMPLITUDE),
                f(b),
                f(FIRE_AMPLITUDE),
                f(b)
            );
        }
        s.push(')');
        s
    }

    fn common_header(&self, out: &mut String, title: &str) {
        let f = format_number;
        let _ = writeln!(out, ".title {title}");
        let _ = writeln!(out, ".temp {}", f(self.temperature));
        let led = &self.led;
        let _ = writeln!(out, ".model led_m d(is={} n={})", f(led.i_sat), f(led.emission));
        let s = &self.scr;
        let _ = writeln!(
            out,
            ".model scr_m scr(ihold={} von={} ron={} roff={} vgt={})",
            f(s.i_hold),
            f(s.v_on),
            f(s.r_on),
            f(s.r_off),
            f(s.gate_threshold)
        );
        let _ = writeln!(out, ".param vdd_device={}", f(self.vdd_device));
        let _ = writeln!(out, ".param r_series={}", f(self.r_series));
    }

    /// Netlist text for the protected bench.
    pub fn bench_netlist(&self) -> String {
        let f = format_number;
        let mut out = String::new();
        self.common_header(&mut out, &format!("SEL protected bench, vgs_q2 = {} V", self.vgs_q2));
        let nmos = |m: &MosfetModel| {
            format!(
                "nmos(k={} vt0={} tc_vt={} lambda={})",
                f(m.k_gain),
                f(m.vt0),
                f(m.vt_tempco),
                f(m.lambda)
            )
        };
        let _ = writeln!(out, ".model q1_m {}", nmos(&self.q1));
        let _ = writeln!(out, ".model q2_m {}", nmos(&self.q2));
        let _ = writeln!(out, ".model q3_m {}", nmos(&self.q3));
        let _ = writeln!(out, ".model d1_m d(is={} n={})", f(self.d1.i_sat), f(self.d1.emission));
        let c = &self.cmp;
        let _ = writeln!(
            out,
            ".model cmp_m cmp(tpd={} vohdrop={} vol={} rout={} hyst={})",
            f(c.t_pd),
            f(c.v_out_high_drop),
            f(c.v_out_low),
            f(c.r_out),
            f(c.hysteresis)
        );
        for (name, v) in [
            ("vcc_cmp", self.vcc_cmp),
            ("vref1", self.vref1),
            ("vref2", self.vref2),
            ("vgs_q2", self.vgs_q2),
            ("r1", self.r1),
            ("c1", self.c1),
            ("r2", self.r2),
            ("c2", self.c2),
        ] {
            let _ = writeln!(out, ".param {name}={}", f(v));
        }
        out.push_str(
            "\
* device under protection
VDD vdd 0 {vdd_device}
VPROBE vdd dev 0
DLED dev led_k led_m
RSER led_k q2d {r_series}
SSEL dev q2d scr_g scr_m
",
        );
        let _ = writeln!(out, "VGATE scr_g q2d {}", self.gate_source());
        out.push_str(
            "\
* limiter and disconnect switch
M2 q2d q2g q2s q2_m
VGS2 q2g q2s {vgs_q2}
M1 q2s q1g 0 q1_m
* detection: CMP1 trips when Q2's drain-source voltage exceeds vref1
VREF1 cmp1_m q2s {vref1}
X1 q2d cmp1_m cmp1_out vcc 0 cmp_m
D1 cmp1_out c1 d1_m
R1 c1 0 {r1}
C1 c1 0 {c1}
* power-cycling timer
VCC vcc 0 {vcc_cmp}
M3 c2 c1 0 q3_m
R2 vcc c2 {r2}
C2 c2 0 {c2}
VREF2 vref2 0 {vref2}
X2 c2 vref2 q1g vcc 0 cmp_m
.end
",
        );
        out
    }

    /// Netlist text for the device alone across the supply.
    pub fn unprotected_netlist(&self) -> String {
        let mut out = String::new();
        self.common_header(&mut out, "SEL unprotected bench");
        out.push_str(
            "\
VDD vdd 0 {vdd_device}
VPROBE vdd dev 0
DLED dev led_k led_m
RSER led_k 0 {r_series}
SSEL dev 0 scr_g scr_m
",
        );
        let _ = writeln!(out, "VGATE scr_g 0 {}", self.gate_source());
        out.push_str(".end\n");
        out
    }
}

pub fn build_bench(params: &SelBenchParams) -> Result<Circuit, SelError> {
    params.validate()?;
    Ok(elaborate(&parse(&params.bench_netlist())?, &BTreeMap::new())?)
}

pub fn build_unprotected_bench(params: &SelBenchParams) -> Result<Circuit, SelError> {
    params.validate()?;
    Ok(elaborate(&parse(&params.unprotected_netlist())?, &BTreeMap::new())?)
}

/// Named scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Vgs5,
    Vgs4,
    Vgs3,
    Vgs2p5,
    Unprotected,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::Vgs5,
        Preset::Vgs4,
        Preset::Vgs3,
        Preset::Vgs2p5,
        Preset::Unprotected,
    ];
    pub const PROTECTED: [Preset; 4] = [Preset::Vgs5, Preset::Vgs4, Preset::Vgs3, Preset::Vgs2p5];

    pub fn parse(name: &str) -> Result<Self, SelError> {
        Ok(match name.to_ascii_lowercase().as_str() {
            "vgs5" => Preset::Vgs5,
            "vgs4" => Preset::Vgs4,
            "vgs3" => Preset::Vgs3,
            "vgs2p5" => Preset::Vgs2p5,
            "unprotected" => Preset::Unprotected,
            _ => return Err(SelError::UnknownPreset(name.to_string())),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Vgs5 => "vgs5",
            Preset::Vgs4 => "vgs4",
            Preset::Vgs3 => "vgs3",
            Preset::Vgs2p5 => "vgs2p5",
            Preset::Unprotected => "unprotected",
        }
    }

    pub fn protected(self) -> bool {
        self != Preset::Unprotected
    }

    /// Limit current reported for this gate drive on the original bench.
    pub fn reported_limit(self) -> Option<f64> {
        match self {
            Preset::Vgs5 => Some(0.450),
            Preset::Vgs4 => Some(0.150),
            Preset::Vgs3 => Some(0.050),
            Preset::Vgs2p5 => Some(0.012),
            Preset::Unprotected => None,
        }
    }

    pub fn params(self) -> SelBenchParams {
        let vgs = match self {
            Preset::Vgs5 | Preset::Unprotected => 5.0,
            Preset::Vgs4 => 4.0,
            Preset::Vgs3 => 3.0,
            Preset::Vgs2p5 => 2.5,
        };
        SelBenchParams {
            vgs_q2: vgs,
            ..SelBenchParams::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub circuit: Circuit,
    pub waves: Waveforms,
    pub measurements: SelMeasurements,
}

/// Builds, simulates and measures one bench run.
pub fn run_scenario(
    params: &SelBenchParams,
    protected: bool,
    t_stop: f64,
    config: &SolverConfig,
) -> Result<ScenarioResult, SelError> {
    let circuit = if protected {
        build_bench(params)?
    } else {
        build_unprotected_bench(params)?
    };
    let waves = transient(&circuit, t_stop, config, &params.sel_fire_times)?;
    let measurements = measure(&waves, params)?;
    Ok(ScenarioResult {
        circuit,
        waves,
        measurements,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::dc_operating_point;

    #[test]
    fn default_bench_operating_point() {
        let p = SelBenchParams::default();
        let c = build_bench(&p).unwrap();
        let op = dc_operating_point(&c, &SolverConfig::default()).unwrap();
        let i = op.branch_current(&c, "VPROBE").unwrap();
        assert!((i - 0.010).abs() < 0.5e-3, "i_op = {i}");
        assert!((op.voltage(&c, "c2").unwrap() - 10.0).abs() < 1e-6);
        let vc1 = op.voltage(&c, "c1").unwrap();
        assert!(vc1.abs() < 1e-3, "v(c1) = {vc1}");
        assert_eq!(op.comparator_level(&c, "X2"), Some(Level::High));
        assert_eq!(op.comparator_level(&c, "X1"), Some(Level::Low));
    }

    #[test]
    fn params_validation() {
        let p = SelBenchParams {
            vref2: 10.0,
            ..SelBenchParams::default()
        };
        assert!(matches!(build_bench(&p), Err(SelError::InvalidParams(_))));
        let p = SelBenchParams {
            vgs_q2: 1.5,
            ..SelBenchParams::default()
        };
        assert!(matches!(p.validate(), Err(SelError::InvalidParams(_))));
    }

    #[test]
    fn set_and_get_by_key() {
        let mut p = SelBenchParams::default();
        for key in PARAM_KEYS {
            let v = p.get(key).unwrap();
            p.set(key, v).unwrap();
        }
        assert_eq!(p, SelBenchParams::default());
        p.set("C2", 22e-6).unwrap();
        assert_eq!(p.get("c2"), Some(22e-6));
        assert!(matches!(p.set("nope", 1.0), Err(SelError::UnknownParam(_))));
    }

    #[test]
    fn overlapping_fires_merge_into_one_pulse() {
        let mut p = SelBenchParams::default();
        p.inject_sel(2e-3);
        p.inject_sel(2e-3 + 4e-6);
        p.inject_sel(5e-3);
        let g = p.gate_source();
        let merged_end = format_number(2e-3 + 4e-6 + FIRE_WIDTH);
        assert_eq!(g.matches(&merged_end).count(), 2, "{g}");
        assert_eq!(g.matches(&format_number(5e-3)).count(), 2, "{g}");
        assert!(build_bench(&p).is_ok(), "{}", p.bench_netlist());
    }

    #[test]
    fn limit_for_vgs4_follows_fitted_law() {
        let i = Preset::Vgs4.params().current_limit();
        assert!((i - 0.199).abs() < 1e-3, "{i}");
    }
}
