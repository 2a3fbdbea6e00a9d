//! Closed-form design helpers for the limiter and the power-cycling timer.

use thiserror::Error;

use crate::devices::MosfetModel;

/// Default guard band as a fraction of the V_GS window width.
pub const DEFAULT_GUARD_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DesignError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("target {target:.6e} s is unreachable: the fixed term alone is {fixed:.6e} s")]
    Unreachable { target: f64, fixed: f64 },
    #[error("degenerate fit: {0}")]
    Degenerate(String),
}

/// Saturation current `(K/2)·max(0, vgs − V_T(temp))²`.
pub fn saturation_current(model: &MosfetModel, vgs: f64, temp: f64) -> f64 {
    let vov = (vgs - model.threshold(temp)).max(0.0);
    0.5 * model.k_gain * vov * vov
}

/// Protected device's current limits and qualification temperatures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceSafetySpec {
    /// Maximum normal operating current (A).
    pub i_op: f64,
    /// Absolute maximum current (A).
    pub i_max: f64,
    /// Temperature range (°C).
    pub t_min: f64,
    pub t_max: f64,
}

impl DeviceSafetySpec {
    pub fn validate(&self) -> Result<(), DesignError> {
        if !(self.i_op > 0.0 && self.i_op < self.i_max) {
            return Err(DesignError::Domain(format!(
                "need 0 < i_op < i_max, got i_op = {}, i_max = {}",
                self.i_op, self.i_max
            )));
        }
        if !(self.t_min <= self.t_max) {
            return Err(DesignError::Domain(format!(
                "need t_min <= t_max, got {} and {}",
                self.t_min, self.t_max
            )));
        }
        Ok(())
    }
}

/// Open interval of gate drives that limit below `i_max` yet pass `i_op`
/// at every temperature of the range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VgsWindow {
    pub lo: f64,
    pub hi: f64,
    pub feasible: bool,
    /// Highest threshold over the range (at `t_min`).
    pub vt_max: f64,
    /// Lowest threshold over the range (at `t_max`).
    pub vt_min: f64,
    /// Recommended bounds shrunk by the guard band; `None` when infeasible.
    pub guarded: Option<(f64, f64)>,
    /// `lo − hi` when infeasible, zero otherwise.
    pub shortfall: f64,
    /// Smallest `i_max` that would open the window at this temperature range.
    pub i_max_needed: f64,
    /// Threshold spread over the range that would still leave a window
    /// (`None` if even a single temperature is infeasible).
    pub vt_spread_allowed: Option<f64>,
}

pub fn vgs_window(model: &MosfetModel, spec: &DeviceSafetySpec) -> Result<VgsWindow, DesignError> {
    vgs_window_guarded(model, spec, DEFAULT_GUARD_FRACTION)
}

pub fn vgs_window_guarded(model: &MosfetModel, spec: &DeviceSafetySpec, guard: f64) -> Result<VgsWindow, DesignError> {
    spec.validate()?;
    if !(model.k_gain > 0.0) {
        return Err(DesignError::Domain(format!("K must be positive, got {}", model.k_gain)));
    }
    if !(0.0..0.5).contains(&guard) {
        return Err(DesignError::Domain(format!(
            "guard fraction must be in [0, 0.5), got {guard}"
        )));
    }
    let vt_a = model.threshold(spec.t_min);
    let vt_b = model.threshold(spec.t_max);
    let (vt_min, vt_max) = (vt_a.min(vt_b), vt_a.max(vt_b));
    let k = model.k_gain;
    let lo = vt_max + (2.0 * spec.i_op / k).sqrt();
    let hi = vt_min + (2.0 * spec.i_max / k).sqrt();
    let feasible = lo < hi;
    let width = hi - lo;
    // hi must reach lo: vt_min + sqrt(2 i/K) = lo
    let need = lo - vt_min;
    let i_max_needed = 0.5 * k * need * need;
    let gap = (2.0 * spec.i_max / k).sqrt() - (2.0 * spec.i_op / k).sqrt();
    Ok(VgsWindow {
        lo,
        hi,
        feasible,
        vt_max,
        vt_min,
        guarded: feasible.then_some((lo + guard * width, hi - guard * width)),
        shortfall: if feasible { 0.0 } else { lo - hi },
        i_max_needed,
        vt_spread_allowed: (gap > 0.0).then_some(gap),
    })
}

/// Off-time split into the Q3 conduction interval and the C2 recharge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffTimeBreakdown {
    pub t1: f64,
    pub t2: f64,
    pub total: f64,
}

/// Parameters of the power-cycling timer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffTimeParams {
    pub r1: f64,
    pub c1: f64,
    /// Peak voltage delivered to C1.
    pub v_o: f64,
    /// Q3 threshold.
    pub vt_q3: f64,
    pub r2: f64,
    pub c2: f64,
    /// Supply C2 recharges from.
    pub vdd: f64,
    pub vref2: f64,
}

impl OffTimeParams {
    /// Bench timer values with an 8.8 V peak on C1.
    pub fn reference() -> Self {
        Self {
            r1: 10e3,
            c1: 1e-6,
            v_o: 8.8,
            vt_q3: 2.1,
            r2: 10e3,
            c2: 10e-6,
            vdd: 10.0,
            vref2: 5.0,
        }
    }

    fn validate(&self) -> Result<(), DesignError> {
        for (name, v) in [("r1", self.r1), ("c1", self.c1), ("r2", self.r2), ("c2", self.c2)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(DesignError::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.vt_q3 > 0.0 && self.v_o >= self.vt_q3) {
            return Err(DesignError::Domain(format!(
                "need v_o >= vt_q3 > 0 (Q3 must turn on and later off), got v_o = {}, vt_q3 = {}",
                self.v_o, self.vt_q3
            )));
        }
        if !(self.vref2 >= 0.0 && self.vref2 < self.vdd) {
            return Err(DesignError::Domain(format!(
                "need 0 <= vref2 < vdd (C2 must recharge past vref2), got vref2 = {}, vdd = {}",
                self.vref2, self.vdd
            )));
        }
        Ok(())
    }
}

pub fn off_time(p: &OffTimeParams) -> Result<OffTimeBreakdown, DesignError> {
    p.validate()?;
    let t1 = p.r1 * p.c1 * (p.v_o / p.vt_q3).ln();
    let t2 = p.r2 * p.c2 * (p.vdd / (p.vdd - p.vref2)).ln();
    Ok(OffTimeBreakdown { t1, t2, total: t1 + t2 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FreeParam {
    R1,
    C1,
    R2,
    C2,
}

impl FreeParam {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s.to_ascii_lowercase().as_str() {
            "r1" => Self::R1,
            "c1" => Self::C1,
            "r2" => Self::R2,
            "c2" => Self::C2,
            _ => return None,
        })
    }
}

/// Value of `free` that makes the off-time equal `target`, the other fields
/// of `fixed` held. The value of `free` inside `fixed` is ignored.
pub fn solve_rc_for_off_time(target: f64, fixed: &OffTimeParams, free: FreeParam) -> Result<f64, DesignError> {
    let mut probe = *fixed;
    match free {
        FreeParam::R1 => probe.r1 = 1.0,
        FreeParam::C1 => probe.c1 = 1.0,
        FreeParam::R2 => probe.r2 = 1.0,
        FreeParam::C2 => probe.c2 = 1.0,
    }
    let b = off_time(&probe)?;
    let (fixed_term, unit_term) = match free {
        FreeParam::R1 | FreeParam::C1 => (b.t2, b.t1),
        FreeParam::R2 | FreeParam::C2 => (b.t1, b.t2),
    };
    if !(target > fixed_term) {
        return Err(DesignError::Unreachable {
            target,
            fixed: fixed_term,
        });
    }
    if !(unit_term > 0.0) {
        return Err(DesignError::Domain(
            "the free parameter's log factor is zero, so it cannot set the off-time".into(),
        ));
    }
    // The remaining term is linear in the free value.
    Ok((target - fixed_term) / unit_term)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SquareLawFit {
    pub k_gain: f64,
    pub vt0: f64,
    /// Measured minus fitted current per point (A).
    pub residuals: Vec<f64>,
    /// Root-mean-square residual (A).
    pub rms_residual: f64,
}

impl SquareLawFit {
    pub fn predict(&self, vgs: f64) -> f64 {
        let vov = (vgs - self.vt0).max(0.0);
        0.5 * self.k_gain * vov * vov
    }
}

/// Least-squares line through `(vgs, √(2·i))`: slope² is K and the
/// intercept on the vgs axis is V_T.
pub fn fit_square_law(points: &[(f64, f64)]) -> Result<SquareLawFit, DesignError> {
    if points.len() < 2 {
        return Err(DesignError::Degenerate(format!(
            "need at least 2 points, got {}",
            points.len()
        )));
    }
    if let Some(p) = points.iter().find(|p| !(p.1 > 0.0) || !p.0.is_finite()) {
        return Err(DesignError::Degenerate(format!(
            "current must be positive, got {} A at {} V",
            p.1, p.0
        )));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let ys: Vec<f64> = points.iter().map(|p| (2.0 * p.1).sqrt()).collect();
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().zip(&ys).map(|(p, y)| (p.0 - mx) * (y - my)).sum();
    if !(sxx > 1e-24 * mx.abs().max(1.0)) {
        return Err(DesignError::Degenerate("all gate voltages are equal".into()));
    }
    let slope = sxy / sxx;
    if !(slope > 0.0) {
        return Err(DesignError::Degenerate(
            "current does not increase with gate voltage".into(),
        ));
    }
    let intercept = my - slope * mx;
    let mut fit = SquareLawFit {
        k_gain: slope * slope,
        vt0: -intercept / slope,
        residuals: Vec::new(),
        rms_residual: 0.0,
    };
    fit.residuals = points.iter().map(|p| p.1 - fit.predict(p.0)).collect();
    fit.rms_residual = (fit.residuals.iter().map(|r| r * r).sum::<f64>() / n).sqrt();
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saturation_endpoints_of_fitted_model() {
        let m = MosfetModel::fitted_2n7000();
        assert!((saturation_current(&m, 5.0, 25.0) - 0.450).abs() < 1e-12);
        assert!((saturation_current(&m, 2.5, 25.0) - 0.012).abs() < 1e-12);
        assert_eq!(saturation_current(&m, 2.0, 25.0), 0.0);
    }

    #[test]
    fn window_single_temperature() {
        let m = MosfetModel::fitted_2n7000();
        let spec = DeviceSafetySpec {
            i_op: 0.010,
            i_max: 0.450,
            t_min: 25.0,
            t_max: 25.0,
        };
        let w = vgs_window(&m, &spec).unwrap();
        assert!((w.lo - 2.457).abs() < 1e-3, "lo = {}", w.lo);
        assert!((w.hi - 5.000).abs() < 1e-9, "hi = {}", w.hi);
        assert!(w.feasible);
        let (glo, ghi) = w.guarded.unwrap();
        assert!(glo > w.lo && ghi < w.hi);
    }

    #[test]
    fn window_collapses_when_limits_meet() {
        let m = MosfetModel::fitted_2n7000();
        let spec = DeviceSafetySpec {
            i_op: 0.1,
            i_max: 0.1 * (1.0 + 1e-12),
            t_min: 0.0,
            t_max: 0.0,
        };
        let w = vgs_window(&m, &spec).unwrap();
        assert!((w.hi - w.lo).abs() < 1e-9);
    }

    #[test]
    fn infeasible_window_reports_headroom() {
        let m = MosfetModel::fitted_2n7000();
        let spec = DeviceSafetySpec {
            i_op: 0.2,
            i_max: 0.25,
            t_min: -55.0,
            t_max: 125.0,
        };
        let w = vgs_window(&m, &spec).unwrap();
        assert!(!w.feasible);
        assert!(w.shortfall > 0.0);
        assert!(w.i_max_needed > spec.i_max);
        let wider = vgs_window(
            &m,
            &DeviceSafetySpec {
                i_max: w.i_max_needed * 1.001,
                ..spec
            },
        )
        .unwrap();
        assert!(wider.feasible);
    }

    #[test]
    fn reference_off_time() {
        let b = off_time(&OffTimeParams::reference()).unwrap();
        assert!((b.t1 - 14.328e-3).abs() < 1e-6, "t1 = {}", b.t1);
        assert!((b.t2 - 69.315e-3).abs() < 1e-6, "t2 = {}", b.t2);
        assert_eq!(b.total, b.t1 + b.t2);
    }

    #[test]
    fn off_time_domain_errors() {
        let bad = OffTimeParams {
            vref2: 10.0,
            ..OffTimeParams::reference()
        };
        assert!(matches!(off_time(&bad), Err(DesignError::Domain(_))));
        let bad = OffTimeParams {
            v_o: 1.0,
            ..OffTimeParams::reference()
        };
        assert!(matches!(off_time(&bad), Err(DesignError::Domain(_))));
    }

    #[test]
    fn solve_c2_for_reference_total() {
        let p = OffTimeParams::reference();
        let total = off_time(&p).unwrap().total;
        let c2 = solve_rc_for_off_time(total, &p, FreeParam::C2).unwrap();
        assert!((c2 - 10e-6).abs() / 10e-6 < 1e-9, "{c2}");
        assert!(matches!(
            solve_rc_for_off_time(5e-3, &p, FreeParam::R2),
            Err(DesignError::Unreachable { .. })
        ));
    }

    #[test]
    fn fit_two_endpoints() {
        let f = fit_square_law(&MosfetModel::FIT_POINTS).unwrap();
        let m = MosfetModel::fitted_2n7000();
        assert!((f.k_gain - m.k_gain).abs() < 1e-12);
        assert!((f.vt0 - m.vt0).abs() < 1e-12);
        assert!(f.rms_residual < 1e-12);
        assert!(matches!(
            fit_square_law(&[(3.0, 0.1), (3.0, 0.2)]),
            Err(DesignError::Degenerate(_))
        ));
    }
}
