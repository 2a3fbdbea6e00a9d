//! Scenario report: measurements next to the closed-form predictions.

use std::fmt::Write as _;

use crate::seltb::{SelBenchParams, SelMeasurements};

/// Peak current above the predicted limit by more than this fraction is
/// flagged as an unbounded-current hazard.
pub const HAZARD_MARGIN: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Delta {
    /// measured − predicted
    pub abs: f64,
    /// (measured − predicted) / predicted
    pub rel: f64,
}

impl Delta {
    pub fn new(measured: f64, predicted: f64) -> Self {
        let abs = measured - predicted;
        Self {
            abs,
            rel: abs / predicted,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub scenario: String,
    pub measurements: SelMeasurements,
    /// Saturation limit of Q2 at the bench gate drive.
    pub predicted_limit: f64,
    /// Off-time from the timer values and the measured C1 peak.
    pub predicted_off_time: Option<f64>,
    pub limit_delta: Option<Delta>,
    pub off_time_delta: Option<Delta>,
    pub hazard: bool,
}

impl Report {
    pub fn new(scenario: &str, params: &SelBenchParams, m: SelMeasurements) -> Self {
        let predicted_limit = params.current_limit();
        let predicted_off_time = m.v_o.and_then(|v| params.predicted_off_time(v).ok()).map(|b| b.total);
        let limit_delta = m.i_limited.map(|i| Delta::new(i, predicted_limit));
        let off_time_delta = match (m.t_off, predicted_off_time) {
            (Some(t), Some(p)) => Some(Delta::new(t, p)),
            _ => None,
        };
        Self {
            scenario: scenario.to_string(),
            hazard: m.i_peak > (1.0 + HAZARD_MARGIN) * predicted_limit,
            measurements: m,
            predicted_limit,
            predicted_off_time,
            limit_delta,
            off_time_delta,
        }
    }

    /// `key=value` lines; absent quantities print as `none`.
    pub fn render(&self, digits: usize) -> String {
        let p = digits.max(1) - 1;
        let num = |v: f64| format!("{v:.p$e}");
        let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), num);
        let m = &self.measurements;
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        line("scenario", self.scenario.clone());
        line("fire_time", opt(m.fire_time));
        line("i_op", num(m.i_op));
        line("i_peak", num(m.i_peak));
        line("i_limited", opt(m.i_limited));
        line("predicted_limit", num(self.predicted_limit));
        line("limit_delta_abs", opt(self.limit_delta.map(|d| d.abs)));
        line("limit_delta_rel", opt(self.limit_delta.map(|d| d.rel)));
        line("t_detect", opt(m.t_detect));
        line("t_power_off", opt(m.t_power_off));
        line("t_off", opt(m.t_off));
        line("v_o", opt(m.v_o));
        line("predicted_off_time", opt(self.predicted_off_time));
        line("off_time_delta_abs", opt(self.off_time_delta.map(|d| d.abs)));
        line("off_time_delta_rel", opt(self.off_time_delta.map(|d| d.rel)));
        line("t_restart", opt(m.t_restart));
        line("v_c2_min", opt(m.v_c2_min));
        line("i_final", num(m.i_final));
        let steps: Vec<String> = m
            .choreography
            .iter()
            .map(|(step, t)| format!("{}@{}", step.label(), num(*t)))
            .collect();
        line(
            "choreography",
            if steps.is_empty() {
                "none".into()
            } else {
                steps.join(",")
            },
        );
        line("choreography_in_order", m.choreography_in_order().to_string());
        line(
            "hazard",
            if self.hazard { "unbounded-current" } else { "none" }.to_string(),
        );
        s
    }
}
