//! Linearized device contributions to the nodal equations.

use super::{diode_eval, mosfet_eval, scr_branch, DeviceState, Level};
use crate::netlist::{DeviceInstance, NodeId};
use crate::solver::MnaSystem;

/// Per-iteration junction voltage step limits.
const MOSFET_VGS_STEP: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Integration {
    /// Operating point: capacitors open.
    Dc,
    BackwardEuler {
        h: f64,
    },
    Trapezoidal {
        h: f64,
    },
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct StampParams {
    pub t: f64,
    pub integration: Integration,
    /// Multiplies every independent source (source stepping).
    pub source_scale: f64,
    /// Conductance placed across every junction.
    pub gmin: f64,
    pub temp: f64,
    /// Evaluate sources and comparator edges as approached from earlier
    /// times (used on steps that end on a breakpoint).
    pub left_limit: bool,
}

/// Last junction voltages a nonlinear device was evaluated at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum JunctionMemory {
    None,
    Diode { vd: f64 },
    Mosfet { vgs: f64 },
}

impl JunctionMemory {
    pub fn seed(dev: &DeviceInstance, x: &[f64]) -> Self {
        match *dev {
            DeviceInstance::Diode { anode, cathode, .. } => JunctionMemory::Diode {
                vd: volt(x, anode) - volt(x, cathode),
            },
            DeviceInstance::Mosfet { gate, source, .. } => JunctionMemory::Mosfet {
                vgs: volt(x, gate) - volt(x, source),
            },
            _ => JunctionMemory::None,
        }
    }
}

pub(crate) fn volt(x: &[f64], n: NodeId) -> f64 {
    if n.is_ground() {
        0.0
    } else {
        x[n.0 - 1]
    }
}

/// Capacitor companion `i = geq·v + ieq` for the step being solved.
pub(crate) fn capacitor_companion(c: f64, state: &DeviceState, integ: Integration) -> Option<(f64, f64)> {
    let (v0, i0) = match *state {
        DeviceState::Capacitor { v, i } => (v, i),
        _ => (0.0, 0.0),
    };
    match integ {
        Integration::Dc => None,
        Integration::BackwardEuler { h } => {
            let g = c / h;
            Some((g, -g * v0))
        }
        Integration::Trapezoidal { h } => {
            let g = 2.0 * c / h;
            Some((g, -g * v0 - i0))
        }
    }
}

/// Stamps one device linearized at `x`. Returns `true` when junction
/// limiting moved the evaluation point away from `x`, in which case the
/// iterate must not be declared converged.
pub(crate) fn stamp(
    dev: &DeviceInstance,
    state: &DeviceState,
    mem: &mut JunctionMemory,
    x: &[f64],
    p: &StampParams,
    sys: &mut MnaSystem,
) -> bool {
    match dev {
        DeviceInstance::Resistor { a, b, resistance } => {
            sys.conductance(*a, *b, 1.0 / resistance);
            false
        }
        DeviceInstance::Capacitor { a, b, capacitance } => {
            if let Some((g, ieq)) = capacitor_companion(*capacitance, state, p.integration) {
                sys.conductance(*a, *b, g);
                sys.current(*a, *b, ieq);
            }
            false
        }
        DeviceInstance::VoltageSource {
            pos,
            neg,
            waveform,
            branch,
        } => {
            let v = match p.integration {
                Integration::Dc => waveform.initial(),
                _ if p.left_limit => waveform.value_before(p.t),
                _ => waveform.value_at(p.t),
            };
            sys.branch_incidence(*branch, *pos, *neg);
            sys.branch_voltage_term(*branch, *pos, 1.0);
            sys.branch_voltage_term(*branch, *neg, -1.0);
            sys.branch_rhs(*branch, v * p.source_scale);
            false
        }
        DeviceInstance::Comparator {
            out,
            vcc,
            gnd,
            model,
            branch,
            ..
        } => {
            let level = match state {
                DeviceState::Comparator(s) => match p.integration {
                    Integration::Dc => s.level,
                    _ if p.left_limit => s.level_before(p.t),
                    _ => s.level_at(p.t),
                },
                _ => Level::Low,
            };
            // out = ref + offset − r_out·j, j sourced into `out` from `gnd`
            let (reference, offset) = match level {
                Level::High => (*vcc, -model.v_out_high_drop.max(0.0)),
                Level::Low => (*gnd, model.v_out_low.max(0.0)),
            };
            sys.branch_incidence(*branch, *gnd, *out);
            sys.branch_voltage_term(*branch, *out, 1.0);
            sys.branch_voltage_term(*branch, reference, -1.0);
            sys.branch_current_term(*branch, model.r_out);
            sys.branch_rhs(*branch, offset * p.source_scale);
            false
        }
        DeviceInstance::Diode { anode, cathode, model } => {
            let mut vd = volt(x, *anode) - volt(x, *cathode);
            let mut limited = false;
            if let JunctionMemory::Diode { vd: old } = *mem {
                let step = 2.0 * model.n_vt();
                let vcrit = model.n_vt() * (model.n_vt() / (std::f64::consts::SQRT_2 * model.i_sat)).ln();
                if vd > vcrit && vd - old > step {
                    vd = old + step;
                    limited = true;
                }
            }
            *mem = JunctionMemory::Diode { vd };
            let (id, gd) = diode_eval(vd, model);
            let g = gd + p.gmin;
            sys.conductance(*anode, *cathode, g);
            sys.current(*anode, *cathode, id + p.gmin * vd - g * vd);
            limited
        }
        DeviceInstance::Mosfet {
            drain,
            gate,
            source,
            model,
        } => {
            let vt = model.threshold(p.temp);
            let mut vgs = volt(x, *gate) - volt(x, *source);
            let vds = volt(x, *drain) - volt(x, *source);
            let mut limited = false;
            if let JunctionMemory::Mosfet { vgs: old } = *mem {
                if (vgs - old).abs() > MOSFET_VGS_STEP && vgs.max(old) > vt {
                    vgs = old + MOSFET_VGS_STEP.copysign(vgs - old);
                    limited = true;
                }
            }
            *mem = JunctionMemory::Mosfet { vgs };
            let op = mosfet_eval(vgs, vds, model, p.temp);
            sys.conductance(*drain, *source, op.gds + p.gmin);
            sys.transconductance(*drain, *source, *gate, *source, op.gm);
            sys.current(*drain, *source, op.ids - op.gm * vgs - op.gds * vds);
            limited
        }
        DeviceInstance::Scr {
            anode, cathode, model, ..
        } => {
            let latched = matches!(state, DeviceState::Scr { latched: true });
            let vak = volt(x, *anode) - volt(x, *cathode);
            let (i, g) = scr_branch(vak, latched, model);
            sys.conductance(*anode, *cathode, g);
            sys.current(*anode, *cathode, i - g * vak);
            false
        }
    }
}
