use std::collections::VecDeque;

use super::engine::{comparator_diff, dc_operating_point, scr_request, Engine, OperatingPoint};
use super::{Event, EventKind, Method, SolverConfig, SolverError, Waveforms};
use crate::devices::stamp::{capacitor_companion, volt, Integration};
use crate::devices::{comparator_step, DeviceState, Level};
use crate::netlist::{Circuit, DeviceInstance};

/// Comparator crossings are located to within this interval (s).
const CROSSING_TOL: f64 = 1e-9;
const CROSSING_RETRIES: usize = 40;
/// Step reduction after a failed Newton solve.
const NEWTON_FAIL_SHRINK: f64 = 0.125;
const DEFAULT_SPAN_DIVISIONS: f64 = 50.0;
/// Rejections allowed at one timepoint before giving up.
const MAX_REJECTIONS: usize = 500;

/// Transient analysis from the operating point to `t_stop`. Every accepted
/// timepoint is recorded. `breakpoints` are extra times the integrator must
/// land on, in addition to the source corners.
pub fn transient(
    circuit: &Circuit,
    t_stop: f64,
    config: &SolverConfig,
    breakpoints: &[f64],
) -> Result<Waveforms, SolverError> {
    config.validate()?;
    if !(t_stop > 0.0 && t_stop.is_finite()) {
        return Err(SolverError::InvalidConfig(format!(
            "stop time must be positive, got {t_stop}"
        )));
    }
    let op = dc_operating_point(circuit, config)?;
    Run::new(circuit, config, t_stop, breakpoints, op).run()
}

/// The operating point as a one-row waveform set at t = 0.
pub fn operating_point_waveforms(circuit: &Circuit, config: &SolverConfig) -> Result<Waveforms, SolverError> {
    config.validate()?;
    let op = dc_operating_point(circuit, config)?;
    let mut out = Waveforms::new(signal_names(circuit));
    out.push(0.0, op.x.iter().copied(), op.kcl_residual);
    out.newton_iterations = op.iterations;
    Ok(out)
}

fn signal_names(circuit: &Circuit) -> Vec<String> {
    let mut names: Vec<String> = circuit.node_names.iter().map(|n| format!("v({n})")).collect();
    names.extend(
        circuit
            .branch_names()
            .iter()
            .map(|n| format!("i({})", n.to_ascii_lowercase())),
    );
    names
}

struct Run<'a> {
    engine: Engine<'a>,
    circuit: &'a Circuit,
    config: &'a SolverConfig,
    t_stop: f64,
    h_max: f64,
    breakpoints: Vec<f64>,
    /// Index of the first breakpoint not yet reached.
    next_bp: usize,
    capacitors: Vec<usize>,
    /// Accepted (time, capacitor voltages) since the last discontinuity.
    history: VecDeque<(f64, Vec<f64>)>,
    x: Vec<f64>,
    states: Vec<DeviceState>,
    /// KCL residual of `x`.
    residual: f64,
    t: f64,
    out: Waveforms,
}

impl<'a> Run<'a> {
    fn new(circuit: &'a Circuit, config: &'a SolverConfig, t_stop: f64, extra: &[f64], op: OperatingPoint) -> Self {
        let mut bps: Vec<f64> = extra.iter().copied().filter(|t| *t > 0.0 && *t < t_stop).collect();
        for d in &circuit.devices {
            if let DeviceInstance::VoltageSource { waveform, .. } = &d.instance {
                bps.extend(waveform.breakpoints(t_stop));
            }
        }
        bps.push(t_stop);
        bps.sort_by(f64::total_cmp);
        bps.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * b.abs().max(1e-9));

        let capacitors = circuit
            .devices
            .iter()
            .enumerate()
            .filter(|(_, d)| matches!(d.instance, DeviceInstance::Capacitor { .. }))
            .map(|(k, _)| k)
            .collect();

        let h_max = config.h_max.unwrap_or(t_stop / DEFAULT_SPAN_DIVISIONS).min(t_stop);
        let mut run = Self {
            engine: Engine::new(circuit, config),
            circuit,
            config,
            t_stop,
            h_max,
            breakpoints: bps,
            next_bp: 0,
            capacitors,
            history: VecDeque::new(),
            x: op.x,
            states: op.states,
            residual: op.kcl_residual,
            t: 0.0,
            out: Waveforms::new(signal_names(circuit)),
        };
        // comparators may already request a change at t = 0
        run.advance_comparators();
        run.record();
        run.restart_history();
        run
    }

    fn record(&mut self) {
        self.out.push(self.t, self.x.iter().copied(), self.residual);
    }

    fn cap_voltages(&self, x: &[f64]) -> Vec<f64> {
        self.capacitors
            .iter()
            .map(|&k| match self.circuit.devices[k].instance {
                DeviceInstance::Capacitor { a, b, .. } => volt(x, a) - volt(x, b),
                _ => 0.0,
            })
            .collect()
    }

    fn restart_history(&mut self) {
        self.history.clear();
        let v = self.cap_voltages(&self.x);
        self.history.push_back((self.t, v));
    }

    /// Earliest time the integrator must land on after `self.t`.
    fn next_stop(&mut self) -> f64 {
        let eps = 1e-15 * self.t.abs().max(1e-9);
        while self.next_bp < self.breakpoints.len() && self.breakpoints[self.next_bp] <= self.t + eps {
            self.next_bp += 1;
        }
        let mut stop = self.breakpoints.get(self.next_bp).copied().unwrap_or(self.t_stop);
        for s in &self.states {
            if let DeviceState::Comparator(c) = s {
                if let Some((edge, _)) = c.pending {
                    if edge > self.t + eps && edge < stop {
                        stop = edge;
                    }
                }
            }
        }
        stop
    }

    /// Applies due comparator edges and schedules new ones at the accepted
    /// point `self.t`. Returns whether any output level changed.
    fn advance_comparators(&mut self) -> bool {
        let mut changed = false;
        for (dev, state) in self.circuit.devices.iter().zip(self.states.iter_mut()) {
            let (DeviceInstance::Comparator { model, .. }, DeviceState::Comparator(s)) = (&dev.instance, state) else {
                continue;
            };
            let before = s.level;
            let due = s.pending.map(|p| p.0);
            comparator_step(comparator_diff(&dev.instance, &self.x), 0.0, self.t, s, model);
            if s.level != before {
                changed = true;
                self.out.events.push(Event {
                    time: due.unwrap_or(self.t),
                    device: dev.name.clone(),
                    kind: match s.level {
                        Level::High => EventKind::ComparatorRise,
                        Level::Low => EventKind::ComparatorFall,
                    },
                });
            }
        }
        changed
    }

    /// Earliest comparator input crossing inside `(self.t, t_new]` for
    /// comparators with no edge in flight, by linear interpolation of the
    /// switching margin.
    fn first_crossing(&self, x_new: &[f64], t_new: f64) -> Option<f64> {
        let mut first: Option<f64> = None;
        for (dev, state) in self.circuit.devices.iter().zip(&self.states) {
            let (DeviceInstance::Comparator { model, .. }, DeviceState::Comparator(s)) = (&dev.instance, state) else {
                continue;
            };
            if s.pending.is_some() {
                continue;
            }
            let new_diff = comparator_diff(&dev.instance, x_new);
            if model.desired_level(new_diff, s.level) == s.level {
                continue;
            }
            let m0 = model.switching_margin(comparator_diff(&dev.instance, &self.x), s.level);
            let m1 = model.switching_margin(new_diff, s.level);
            let frac = if m0 != m1 {
                (m0 / (m0 - m1)).clamp(0.0, 1.0)
            } else {
                1.0
            };
            let tc = self.t + frac * (t_new - self.t);
            first = Some(first.map_or(tc, |f: f64| f.min(tc)));
        }
        first
    }

    /// Truncation-error ratio (estimate / tolerance, worst capacitor) of a
    /// trial solution, or `None` when history is too short to estimate.
    fn lte_ratio(&self, v_new: &[f64], h: f64, order: usize) -> Option<f64> {
        let pts: Vec<&(f64, Vec<f64>)> = self.history.iter().rev().take(order + 1).collect();
        if pts.len() < order + 1 || v_new.is_empty() {
            return None;
        }
        let t_new = self.t + h;
        let ts: Vec<f64> = pts.iter().map(|p| p.0).collect();
        // Lagrange weights of the predictor at t_new
        let weights: Vec<f64> = (0..ts.len())
            .map(|i| {
                (0..ts.len())
                    .filter(|&j| j != i)
                    .map(|j| (t_new - ts[j]) / (ts[i] - ts[j]))
                    .product()
            })
            .collect();
        let h1 = ts[0] - ts.get(1).copied().unwrap_or(ts[0]);
        let factor = if order == 1 {
            let c = h * h / 2.0;
            c / (c + h * (h + h1) / 2.0)
        } else {
            let h2 = ts[1] - ts[2];
            let c = h * h * h / 12.0;
            c / (c + h * (h + h1) * (h + h1 + h2) / 6.0)
        };
        let mut worst = 0.0f64;
        for (k, v) in v_new.iter().enumerate() {
            let pred: f64 = pts.iter().zip(&weights).map(|(p, w)| w * p.1[k]).sum();
            let v_old = pts[0].1[k];
            let tol = self.config.lte_tol * v.abs().max(v_old.abs()) + self.config.lte_floor;
            worst = worst.max(factor * (v - pred).abs() / tol);
        }
        Some(worst)
    }

    fn run(mut self) -> Result<Waveforms, SolverError> {
        let mut h = self.config.h_start.min(self.h_max);
        let end_eps = 1e-12 * self.t_stop;
        let mut rejections = 0;
        while self.t < self.t_stop - end_eps {
            if rejections > MAX_REJECTIONS {
                return Err(SolverError::StepUnderflow { time: self.t, h });
            }
            let stop = self.next_stop();
            let mut t_new = self.t + h.min(self.h_max);
            let mut at_stop = false;
            if t_new >= stop {
                t_new = stop;
                at_stop = true;
            } else if t_new + 0.25 * (t_new - self.t) >= stop {
                // split the gap rather than stretch the step, which an LTE
                // rejection would only shrink back
                t_new = self.t + 0.5 * (stop - self.t);
            }
            let mut crossing_tries = 0;
            let accepted = loop {
                let h_try = t_new - self.t;
                if h_try < self.config.h_min {
                    return Err(SolverError::StepUnderflow { time: self.t, h: h_try });
                }
                match self.attempt(t_new, at_stop, crossing_tries < CROSSING_RETRIES) {
                    Ok(Attempt::Accepted {
                        x,
                        states,
                        residual,
                        flipped,
                        h_next,
                    }) => {
                        self.residual = residual;
                        break Some((x, states, flipped, h_next));
                    }
                    Ok(Attempt::Crossing(tc)) => {
                        crossing_tries += 1;
                        self.out.rejected_steps += 1;
                        t_new = (tc + 0.5 * CROSSING_TOL).min(t_new);
                        at_stop = false;
                    }
                    Ok(Attempt::Lte(h_next)) => {
                        self.out.rejected_steps += 1;
                        h = h_next;
                        break None;
                    }
                    Err(SolverError::NoConvergence { .. }) | Err(SolverError::SingularMatrix { .. })
                        if h_try * NEWTON_FAIL_SHRINK >= self.config.h_min =>
                    {
                        self.out.rejected_steps += 1;
                        h = h_try * NEWTON_FAIL_SHRINK;
                        break None;
                    }
                    Err(SolverError::NoConvergence { .. }) => {
                        return Err(SolverError::StepUnderflow {
                            time: self.t,
                            h: h_try * NEWTON_FAIL_SHRINK,
                        });
                    }
                    Err(e) => return Err(e),
                }
            };
            let Some((x, states, flipped, h_next)) = accepted else {
                rejections += 1;
                continue;
            };
            rejections = 0;
            self.commit(t_new, x, states);
            let changed = self.advance_comparators() || flipped;
            self.record();
            self.out.accepted_steps += 1;
            if at_stop || changed {
                self.restart_history();
                h = self.config.h_start;
            } else {
                let v = self.cap_voltages(&self.x);
                self.history.push_back((self.t, v));
                while self.history.len() > 3 {
                    self.history.pop_front();
                }
                h = h_next;
            }
        }
        self.out.newton_iterations = self.engine.solves;
        Ok(self.out)
    }

    fn attempt(&mut self, t_new: f64, at_stop: bool, locate: bool) -> Result<Attempt, SolverError> {
        let h = t_new - self.t;
        let order = match self.config.method {
            Method::Trapezoidal if self.history.len() >= 3 => 2,
            _ => 1,
        };
        let integration = if order == 2 {
            Integration::Trapezoidal { h }
        } else {
            Integration::BackwardEuler { h }
        };
        let mut p = self.engine.params(t_new, integration, 1.0);
        p.left_limit = at_stop;
        let mut states = self.states.clone();
        let mut flips = 0;
        let mut flipped_devices = Vec::new();
        let (x, residual) = loop {
            let r = self.engine.newton(&self.x, &states, &p, 0.0, Some(t_new))?;
            let mut any = false;
            for (k, (dev, state)) in self.circuit.devices.iter().zip(states.iter_mut()).enumerate() {
                if let DeviceState::Scr { latched } = state {
                    if let Some(want) = scr_request(&dev.instance, *latched, &r.x) {
                        if want != *latched {
                            *latched = want;
                            any = true;
                            flipped_devices.push((k, want));
                        }
                    }
                }
            }
            if !any {
                break (r.x, r.residual);
            }
            flips += 1;
            if flips > self.config.max_state_flips {
                let k = flipped_devices.last().map(|f| f.0).unwrap_or(0);
                return Err(SolverError::StateOscillation {
                    time: t_new,
                    device: self.circuit.devices[k].name.clone(),
                });
            }
        };

        if locate {
            if let Some(tc) = self.first_crossing(&x, t_new) {
                if t_new - tc > CROSSING_TOL {
                    return Ok(Attempt::Crossing(tc));
                }
            }
        }

        let flipped = !flipped_devices.is_empty();
        let p_exp = (order + 1) as f64;
        let h_next = match (flipped, self.lte_ratio(&self.cap_voltages(&x), h, order)) {
            (false, Some(ratio)) if ratio > 1.0 => {
                let shrink = (0.9 * ratio.powf(-1.0 / p_exp)).clamp(0.1, 0.9);
                return Ok(Attempt::Lte(h * shrink));
            }
            (_, Some(ratio)) if ratio > 0.0 => h * (0.9 * ratio.powf(-1.0 / p_exp)).clamp(0.5, 2.0),
            _ => h * 2.0,
        };
        for (k, latched) in flipped_devices {
            self.out.events.push(Event {
                time: t_new,
                device: self.circuit.devices[k].name.clone(),
                kind: if latched { EventKind::ScrOn } else { EventKind::ScrOff },
            });
        }
        // capacitor currents need the companion matching this step
        for &k in &self.capacitors {
            if let DeviceInstance::Capacitor { a, b, capacitance } = self.circuit.devices[k].instance {
                let v = volt(&x, a) - volt(&x, b);
                if let Some((g, ieq)) = capacitor_companion(capacitance, &states[k], integration) {
                    states[k] = DeviceState::Capacitor { v, i: g * v + ieq };
                }
            }
        }
        Ok(Attempt::Accepted {
            x,
            states,
            residual,
            flipped,
            h_next,
        })
    }

    fn commit(&mut self, t_new: f64, x: Vec<f64>, states: Vec<DeviceState>) {
        self.t = t_new;
        self.x = x;
        self.states = states;
    }
}

enum Attempt {
    Accepted {
        x: Vec<f64>,
        states: Vec<DeviceState>,
        residual: f64,
        flipped: bool,
        h_next: f64,
    },
    /// Reject: a comparator input crossed at the given time.
    Crossing(f64),
    /// Reject on truncation error, retry with the given step.
    Lte(f64),
}
