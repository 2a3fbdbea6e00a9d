//! Behavioral device models and their large-signal evaluation.
//!
//! Every nonlinear evaluation returns the branch current together with its
//! exact partial derivatives, which the solver uses for Newton linearization.
//! Switching devices (SCR latch, comparator output level) are not
//! differentiated: they are state machines advanced at accepted timepoints.

mod source;
pub(crate) mod stamp;

pub use source::Waveform;

/// Room-temperature thermal voltage kT/q at 25 °C.
pub const THERMAL_VOLTAGE_25C: f64 = 0.02585;
/// Reference temperature for model parameters.
pub const T_NOMINAL: f64 = 25.0;

/// Above this normalized junction voltage the diode exponential continues
/// linearly.
const EXP_LIMIT: f64 = 40.0;

/// Square-law (Shichman-Hodges) n-channel MOSFET.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MosfetModel {
    /// Transconductance parameter K = μ·Cox·W/L in A/V².
    pub k_gain: f64,
    /// Threshold voltage at 25 °C.
    pub vt0: f64,
    /// dV_T/dT in V/°C.
    pub vt_tempco: f64,
    /// Channel-length modulation in 1/V.
    pub lambda: f64,
}

impl MosfetModel {
    /// Limit at 5 V gate drive and at 2.5 V gate drive of the bench presets.
    pub const FIT_POINTS: [(f64, f64); 2] = [(5.0, 0.450), (2.5, 0.012)];

    /// Square law passing exactly through [`Self::FIT_POINTS`].
    pub fn fitted_2n7000() -> Self {
        let [(v_hi, i_hi), (v_lo, i_lo)] = Self::FIT_POINTS;
        let (s_hi, s_lo) = ((2.0 * i_hi).sqrt(), (2.0 * i_lo).sqrt());
        let slope = (s_hi - s_lo) / (v_hi - v_lo);
        Self {
            k_gain: slope * slope,
            vt0: v_hi - s_hi / slope,
            vt_tempco: -5e-3,
            lambda: 0.0,
        }
    }

    /// Fitted 2N7000 with a different room-temperature threshold.
    pub fn with_vt0(self, vt0: f64) -> Self {
        Self { vt0, ..self }
    }

    pub fn threshold(&self, temp: f64) -> f64 {
        self.vt0 + self.vt_tempco * (temp - T_NOMINAL)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.k_gain > 0.0) {
            return Err(format!("k must be positive, got {}", self.k_gain));
        }
        if !(self.lambda >= 0.0) {
            return Err(format!("lambda must be non-negative, got {}", self.lambda));
        }
        Ok(())
    }
}

impl Default for MosfetModel {
    fn default() -> Self {
        Self::fitted_2n7000()
    }
}

/// Drain current and small-signal conductances at one bias point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MosfetOp {
    pub ids: f64,
    pub gm: f64,
    pub gds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MosfetRegion {
    Cutoff,
    Triode,
    Saturation,
}

/// Forward evaluation for vds >= 0. Derivatives are with respect to
/// (vgs, vds) and the region is reported for diagnostics.
fn mosfet_forward(vgs: f64, vds: f64, m: &MosfetModel, vt: f64) -> (MosfetOp, MosfetRegion) {
    let vov = vgs - vt;
    if vov <= 0.0 {
        return (
            MosfetOp {
                ids: 0.0,
                gm: 0.0,
                gds: 0.0,
            },
            MosfetRegion::Cutoff,
        );
    }
    let k = m.k_gain;
    let clm = 1.0 + m.lambda * vds;
    if vds < vov {
        let core = vov * vds - 0.5 * vds * vds;
        (
            MosfetOp {
                ids: k * core * clm,
                gm: k * vds * clm,
                gds: k * (vov - vds) * clm + k * core * m.lambda,
            },
            MosfetRegion::Triode,
        )
    } else {
        let sat = 0.5 * k * vov * vov;
        (
            MosfetOp {
                ids: sat * clm,
                gm: k * vov * clm,
                gds: sat * m.lambda,
            },
            MosfetRegion::Saturation,
        )
    }
}

/// Square-law drain current from drain to source.
///
/// The threshold follows `vt0 + vt_tempco·(temp − 25)`. Channel-length
/// modulation multiplies both triode and saturation branches so the model
/// stays continuous at `vds = vgs − V_T` for any `lambda`. For `vds < 0` the
/// terminals swap roles (the device is symmetric) and the returned current
/// is negative.
pub fn mosfet_eval(vgs: f64, vds: f64, model: &MosfetModel, temp: f64) -> MosfetOp {
    mosfet_eval_region(vgs, vds, model, temp).0
}

pub fn mosfet_eval_region(vgs: f64, vds: f64, model: &MosfetModel, temp: f64) -> (MosfetOp, MosfetRegion) {
    let vt = model.threshold(temp);
    if vds >= 0.0 {
        return mosfet_forward(vgs, vds, model, vt);
    }
    // swapped: gate-to-"source" is now vgd, drain-source is -vds
    let (f, region) = mosfet_forward(vgs - vds, -vds, model, vt);
    (
        MosfetOp {
            ids: -f.ids,
            gm: -f.gm,
            gds: f.gm + f.gds,
        },
        region,
    )
}

/// Shockley junction diode. Also used for the LED inside the SEL-prone
/// device.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiodeModel {
    pub i_sat: f64,
    pub emission: f64,
    pub v_thermal: f64,
}

impl DiodeModel {
    /// Small-signal switching diode sized for about 0.8 V at 1 mA.
    pub fn d1_default() -> Self {
        Self::through_point(0.8, 1e-3, 1.8)
    }

    /// Indicator LED: 2 V forward drop at 10 mA.
    pub fn led_default() -> Self {
        Self::through_point(2.0, 10e-3, 2.0)
    }

    /// Diode whose characteristic passes through (`vd`, `id`).
    pub fn through_point(vd: f64, id: f64, emission: f64) -> Self {
        let vte = emission * THERMAL_VOLTAGE_25C;
        Self {
            i_sat: id / ((vd / vte).exp() - 1.0),
            emission,
            v_thermal: THERMAL_VOLTAGE_25C,
        }
    }

    pub fn n_vt(&self) -> f64 {
        self.emission * self.v_thermal
    }

    /// Junction voltage above which the exponential is continued linearly.
    pub fn v_crit(&self) -> f64 {
        EXP_LIMIT * self.n_vt()
    }

    /// Forward voltage at current `id`, inverting the exponential branch.
    pub fn forward_voltage(&self, id: f64) -> f64 {
        self.n_vt() * (id / self.i_sat + 1.0).ln()
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.i_sat > 0.0) {
            return Err(format!("is must be positive, got {}", self.i_sat));
        }
        if !(self.emission >= 1.0) {
            return Err(format!("n must be at least 1, got {}", self.emission));
        }
        Ok(())
    }
}

impl Default for DiodeModel {
    fn default() -> Self {
        Self::d1_default()
    }
}

/// Diode current and conductance at junction voltage `vd`.
pub fn diode_eval(vd: f64, model: &DiodeModel) -> (f64, f64) {
    let nvt = model.n_vt();
    let x = vd / nvt;
    if x > EXP_LIMIT {
        let e = EXP_LIMIT.exp();
        let id = model.i_sat * (e * (1.0 + x - EXP_LIMIT) - 1.0);
        (id, model.i_sat * e / nvt)
    } else {
        let e = x.exp();
        (model.i_sat * (e - 1.0), model.i_sat * e / nvt)
    }
}

/// Gate-triggered latch standing in for the parasitic PNPN structure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScrModel {
    pub i_hold: f64,
    pub v_on: f64,
    pub r_on: f64,
    pub r_off: f64,
    pub gate_threshold: f64,
}

impl Default for ScrModel {
    fn default() -> Self {
        Self {
            i_hold: 5e-3,
            v_on: 1.2,
            r_on: 1.0,
            r_off: 10e6,
            gate_threshold: 0.7,
        }
    }
}

impl ScrModel {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.i_hold > 0.0) {
            return Err(format!("ihold must be positive, got {}", self.i_hold));
        }
        if !(self.r_on > 0.0 && self.r_on < self.r_off) {
            return Err(format!(
                "need 0 < ron < roff, got ron={} roff={}",
                self.r_on, self.r_off
            ));
        }
        Ok(())
    }
}

/// Width of the knee that rounds the latched `v_on + r_on·i` characteristic
/// so that Newton sees a C¹ branch.
const SCR_KNEE: f64 = 0.02;

/// Anode current and conductance for the present latch state.
///
/// Blocking: `v_ak / r_off`. Latched: `v_on + r_on·i` above a rounded knee
/// at `v_on`, plus the blocking leak.
pub fn scr_branch(v_ak: f64, latched: bool, model: &ScrModel) -> (f64, f64) {
    let g_off = 1.0 / model.r_off;
    let mut i = v_ak * g_off;
    let mut g = g_off;
    if latched {
        let g_on = 1.0 / model.r_on;
        let u = (v_ak - model.v_on) / SCR_KNEE;
        // softplus(u) = ln(1 + e^u), logistic(u) = its derivative
        let (softplus, logistic) = if u > 40.0 {
            (u, 1.0)
        } else if u < -40.0 {
            (u.exp(), u.exp())
        } else {
            let e = u.exp();
            ((1.0 + e).ln(), e / (1.0 + e))
        };
        i += g_on * SCR_KNEE * softplus;
        g += g_on * logistic;
    }
    (i, g)
}

/// Latch transition at an accepted timepoint.
///
/// OFF→ON when `v_gk` exceeds the gate threshold. ON→OFF once the anode
/// current is below the holding current, provided the gate is no longer
/// driven (a driven gate keeps the structure conducting).
pub fn scr_step(v_gk: f64, i_anode: f64, latched: bool, model: &ScrModel) -> bool {
    let gate = v_gk > model.gate_threshold;
    if latched {
        !(i_anode < model.i_hold && !gate)
    } else {
        gate
    }
}

/// Two-state comparator with transport delay and a resistive output stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparatorModel {
    pub t_pd: f64,
    pub v_out_high_drop: f64,
    pub v_out_low: f64,
    pub r_out: f64,
    pub hysteresis: f64,
}

impl Default for ComparatorModel {
    fn default() -> Self {
        Self {
            t_pd: 100e-9,
            v_out_high_drop: 0.4,
            v_out_low: 0.2,
            r_out: 10.0,
            hysteresis: 0.0,
        }
    }
}

impl ComparatorModel {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.t_pd >= 0.0) {
            return Err(format!("tpd must be non-negative, got {}", self.t_pd));
        }
        if !(self.r_out > 0.0) {
            return Err(format!("rout must be positive, got {}", self.r_out));
        }
        if !(self.hysteresis >= 0.0) {
            return Err(format!("hyst must be non-negative, got {}", self.hysteresis));
        }
        Ok(())
    }

    /// Open-circuit output voltage for `level`, clamped to the supplies.
    pub fn output_level(&self, level: Level, v_vcc: f64, v_gnd: f64) -> f64 {
        let v = match level {
            Level::High => v_vcc - self.v_out_high_drop,
            Level::Low => v_gnd + self.v_out_low,
        };
        v.clamp(v_gnd.min(v_vcc), v_vcc.max(v_gnd))
    }

    /// Level the inputs ask for, given the current level. Inside the
    /// hysteresis band (or at exact equality) the level is kept.
    pub fn desired_level(&self, diff: f64, current: Level) -> Level {
        let half = 0.5 * self.hysteresis;
        match current {
            Level::Low if diff > half => Level::High,
            Level::High if diff < -half => Level::Low,
            other => other,
        }
    }

    /// Input difference relative to the switching point for `current`;
    /// changes sign where the output would toggle.
    pub fn switching_margin(&self, diff: f64, current: Level) -> f64 {
        let half = 0.5 * self.hysteresis;
        match current {
            Level::Low => diff - half,
            Level::High => diff + half,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Low,
    High,
}

/// Output level plus at most one scheduled edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparatorState {
    pub level: Level,
    pub pending: Option<(f64, Level)>,
}

impl ComparatorState {
    pub fn new(level: Level) -> Self {
        Self { level, pending: None }
    }

    /// Level in effect at `t`, counting a pending edge due at or before `t`.
    pub fn level_at(&self, t: f64) -> Level {
        match self.pending {
            Some((edge, lvl)) if edge <= t => lvl,
            _ => self.level,
        }
    }

    /// Level in effect just before `t`.
    pub fn level_before(&self, t: f64) -> Level {
        match self.pending {
            Some((edge, lvl)) if edge < t => lvl,
            _ => self.level,
        }
    }
}

/// Advances the comparator at an accepted timepoint `t_now`.
///
/// Applies a due edge, then compares the inputs. When the requested level
/// differs from the present one an edge is scheduled at `t_now + t_pd` and
/// its time returned (it becomes a solver breakpoint). If the inputs return
/// before a pending edge fires, the edge is cancelled.
pub fn comparator_step(
    v_plus: f64,
    v_minus: f64,
    t_now: f64,
    state: &mut ComparatorState,
    model: &ComparatorModel,
) -> Option<f64> {
    if let Some((edge, lvl)) = state.pending {
        if edge <= t_now {
            state.level = lvl;
            state.pending = None;
        }
    }
    let want = model.desired_level(v_plus - v_minus, state.level);
    match state.pending {
        Some((_, lvl)) if lvl == want => None,
        Some(_) => {
            // request reverted to the present level
            state.pending = None;
            None
        }
        None if want != state.level => {
            let edge = t_now + model.t_pd;
            state.pending = Some((edge, want));
            Some(edge)
        }
        None => None,
    }
}

/// Dynamic per-device state owned by one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub enum DeviceState {
    Stateless,
    /// Voltage and current at the last accepted timepoint.
    Capacitor {
        v: f64,
        i: f64,
    },
    Scr {
        latched: bool,
    },
    Comparator(ComparatorState),
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-12)
    }

    #[test]
    fn fitted_parameters() {
        let m = MosfetModel::fitted_2n7000();
        assert!((m.k_gain - 0.1008).abs() < 1e-4, "k = {}", m.k_gain);
        assert!((m.vt0 - 2.012).abs() < 1e-3, "vt0 = {}", m.vt0);
    }

    #[test]
    fn cutoff_boundary() {
        let m = MosfetModel::fitted_2n7000();
        for vds in [0.0, 0.5, 10.0] {
            assert_eq!(mosfet_eval(m.vt0, vds, &m, 25.0).ids, 0.0);
        }
    }

    #[test]
    fn saturation_endpoints() {
        let m = MosfetModel {
            k_gain: 0.1008,
            vt0: 2.012,
            vt_tempco: 0.0,
            lambda: 0.0,
        };
        let i5 = mosfet_eval(5.0, 10.0, &m, 25.0).ids;
        assert!((i5 - 0.450).abs() / 0.450 < 2e-3, "{i5}");
        let i3 = mosfet_eval(3.0, 10.0, &m, 25.0).ids;
        assert!((i3 - 0.0492).abs() < 1e-4, "{i3}");
    }

    #[test]
    fn mosfet_derivatives_match_finite_differences() {
        let m = MosfetModel {
            lambda: 0.02,
            ..MosfetModel::fitted_2n7000()
        };
        let h = 1e-6;
        for &(vgs, vds) in &[(5.0, 10.0), (5.0, 1.0), (8.8, 0.3), (3.0, -0.7), (4.0, -6.0)] {
            let op = mosfet_eval(vgs, vds, &m, 25.0);
            let gm = fd(|v| mosfet_eval(v, vds, &m, 25.0).ids, vgs, h);
            let gds = fd(|v| mosfet_eval(vgs, v, &m, 25.0).ids, vds, h);
            assert!(close(op.gm, gm, 1e-6), "gm {} vs {gm} at {vgs},{vds}", op.gm);
            assert!(close(op.gds, gds, 1e-6), "gds {} vs {gds} at {vgs},{vds}", op.gds);
        }
    }

    #[test]
    fn continuity_at_saturation_edge() {
        let m = MosfetModel::fitted_2n7000();
        let vgs = 4.0;
        let edge = vgs - m.vt0;
        let below = mosfet_eval(vgs, edge - 1e-9, &m, 25.0);
        let above = mosfet_eval(vgs, edge + 1e-9, &m, 25.0);
        assert!((below.ids - above.ids).abs() < 1e-9);
        assert!((below.gds - above.gds).abs() < 1e-8);
    }

    #[test]
    fn threshold_falls_with_temperature() {
        let m = MosfetModel::fitted_2n7000();
        assert!(m.threshold(85.0) < m.threshold(25.0));
        assert!(m.threshold(-40.0) > m.threshold(25.0));
    }

    #[test]
    fn diode_basics() {
        let d = DiodeModel::d1_default();
        assert_eq!(diode_eval(0.0, &d).0, 0.0);
        let (rev, _) = diode_eval(-1.0, &d);
        assert!((rev + d.i_sat).abs() <= d.i_sat * 1e-9);
        // analytic inversion oracle
        let v1ma = d.n_vt() * (1e-3 / d.i_sat + 1.0).ln();
        let (i, _) = diode_eval(v1ma, &d);
        assert!((i - 1e-3).abs() < 1e-12);
    }

    #[test]
    fn diode_derivative_and_overflow_guard() {
        let d = DiodeModel::led_default();
        for vd in [-0.5, 0.3, 1.9, 2.2, 50.0] {
            let (_, g) = diode_eval(vd, &d);
            let num = fd(|v| diode_eval(v, &d).0, vd, 1e-6);
            assert!(close(g, num, 1e-5), "{g} vs {num} at {vd}");
        }
        assert!(diode_eval(1e3, &d).0.is_finite());
        let led_v = d.forward_voltage(10e-3);
        assert!((led_v - 2.0).abs() < 1e-9);
    }

    #[test]
    fn scr_latch_rules() {
        let m = ScrModel::default();
        assert!(!scr_step(0.0, 0.0, false, &m));
        assert!(scr_step(1.0, 0.0, false, &m));
        assert!(!scr_step(0.0, m.i_hold / 2.0, true, &m));
        assert!(scr_step(0.0, 2.0 * m.i_hold, true, &m));
        // driven gate holds the latch even without anode current
        assert!(scr_step(1.0, 0.0, true, &m));
    }

    #[test]
    fn scr_branch_shape() {
        let m = ScrModel::default();
        let (i_off, _) = scr_branch(10.0, false, &m);
        assert!((i_off - 1e-6).abs() < 1e-12);
        // well above the knee: v_on + r_on·i
        let (i_on, g_on) = scr_branch(1.2 + 0.45, true, &m);
        assert!((i_on - 0.45).abs() < 1e-5);
        assert!((g_on - 1.0).abs() < 1e-6);
        for v in [0.5, 1.19, 1.21, 3.0] {
            let (_, g) = scr_branch(v, true, &m);
            let num = fd(|x| scr_branch(x, true, &m).0, v, 1e-7);
            assert!(close(g, num, 1e-5));
        }
    }

    #[test]
    fn comparator_schedules_edge() {
        let m = ComparatorModel::default();
        let mut s = ComparatorState::new(Level::Low);
        let edge = comparator_step(5.1, 5.0, 1e-3, &mut s, &m);
        assert_eq!(edge, Some(1e-3 + 100e-9));
        assert!((edge.unwrap() - 1.0001e-3).abs() < 1e-15);
        // pending, same request: nothing new
        assert_eq!(comparator_step(5.2, 5.0, 1.00005e-3, &mut s, &m), None);
        // edge due
        assert_eq!(comparator_step(5.2, 5.0, 1.0001e-3, &mut s, &m), None);
        assert_eq!(s.level, Level::High);
    }

    #[test]
    fn comparator_equal_inputs_and_hysteresis() {
        let m = ComparatorModel {
            hysteresis: 0.1,
            ..Default::default()
        };
        let mut s = ComparatorState::new(Level::Low);
        assert_eq!(comparator_step(5.0, 5.0, 0.0, &mut s, &m), None);
        assert_eq!(comparator_step(5.04, 5.0, 0.0, &mut s, &m), None);
        assert!(comparator_step(5.06, 5.0, 0.0, &mut s, &m).is_some());
        let ideal = ComparatorModel::default();
        let mut s = ComparatorState::new(Level::High);
        assert_eq!(comparator_step(2.0, 2.0, 0.0, &mut s, &ideal), None);
    }

    #[test]
    fn comparator_cancels_glitch() {
        let m = ComparatorModel::default();
        let mut s = ComparatorState::new(Level::Low);
        comparator_step(1.0, 0.0, 0.0, &mut s, &m);
        comparator_step(-1.0, 0.0, 50e-9, &mut s, &m);
        assert_eq!(s.pending, None);
        assert_eq!(s.level, Level::Low);
    }

    #[test]
    fn comparator_output_levels() {
        let m = ComparatorModel::default();
        assert!((m.output_level(Level::High, 10.0, 0.0) - 9.6).abs() < 1e-12);
        assert!((m.output_level(Level::Low, 10.0, 0.0) - 0.2).abs() < 1e-12);
        let clamp = ComparatorModel {
            v_out_high_drop: -1.0,
            ..m
        };
        assert_eq!(clamp.output_level(Level::High, 10.0, 0.0), 10.0);
    }
}
