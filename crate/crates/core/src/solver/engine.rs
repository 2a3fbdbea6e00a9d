use super::{solve_linear, MnaSystem, SolverConfig, SolverError};
use crate::devices::stamp::{stamp, volt, Integration, JunctionMemory, StampParams};
use crate::devices::{scr_branch, scr_step, ComparatorState, DeviceState, Level};
use crate::netlist::{Circuit, DeviceInstance, NodeId};

/// Roundoff allowance on the KCL residual, relative to the largest current
/// term in the row.
/// Discrete-state settling passes at the operating point.
const DC_STATE_PASSES: usize = 10;
const SOURCE_STEPS: usize = 10;

/// How an operating point was reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DcStrategy {
    Direct,
    GminStepping,
    SourceStepping,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatingPoint {
    /// Node voltages then branch currents, in [`MnaSystem`] order.
    pub x: Vec<f64>,
    /// Newton iterations of the final solve.
    pub iterations: usize,
    pub strategy: DcStrategy,
    /// Largest node KCL residual (A).
    pub kcl_residual: f64,
    pub(crate) states: Vec<DeviceState>,
    node_count: usize,
}

impl OperatingPoint {
    pub fn voltage(&self, circuit: &Circuit, node: &str) -> Option<f64> {
        circuit.node(node).map(|n| volt(&self.x, n))
    }

    pub fn branch_current(&self, circuit: &Circuit, device: &str) -> Option<f64> {
        let b = circuit.device(device)?.instance.branch()?;
        Some(self.x[self.node_count + b])
    }

    /// Latch state of an SCR, `None` if `device` is not one.
    pub fn scr_latched(&self, circuit: &Circuit, device: &str) -> Option<bool> {
        let idx = circuit
            .devices
            .iter()
            .position(|d| d.name.eq_ignore_ascii_case(device))?;
        match self.states[idx] {
            DeviceState::Scr { latched } => Some(latched),
            _ => None,
        }
    }

    pub fn comparator_level(&self, circuit: &Circuit, device: &str) -> Option<Level> {
        let idx = circuit
            .devices
            .iter()
            .position(|d| d.name.eq_ignore_ascii_case(device))?;
        match self.states[idx] {
            DeviceState::Comparator(s) => Some(s.level),
            _ => None,
        }
    }
}

pub(crate) fn initial_states(circuit: &Circuit) -> Vec<DeviceState> {
    circuit
        .devices
        .iter()
        .map(|d| match d.instance {
            DeviceInstance::Capacitor { .. } => DeviceState::Capacitor { v: 0.0, i: 0.0 },
            DeviceInstance::Scr { .. } => DeviceState::Scr { latched: false },
            DeviceInstance::Comparator { .. } => DeviceState::Comparator(ComparatorState::new(Level::Low)),
            _ => DeviceState::Stateless,
        })
        .collect()
}

/// Anode current of an SCR at `x`.
pub(crate) fn scr_current(dev: &DeviceInstance, latched: bool, x: &[f64]) -> f64 {
    match dev {
        DeviceInstance::Scr {
            anode, cathode, model, ..
        } => scr_branch(volt(x, *anode) - volt(x, *cathode), latched, model).0,
        _ => 0.0,
    }
}

/// Latch state an SCR asks for at `x`, `None` for other devices.
pub(crate) fn scr_request(dev: &DeviceInstance, latched: bool, x: &[f64]) -> Option<bool> {
    match dev {
        DeviceInstance::Scr {
            cathode, gate, model, ..
        } => {
            let vgk = volt(x, *gate) - volt(x, *cathode);
            Some(scr_step(vgk, scr_current(dev, latched, x), latched, model))
        }
        _ => None,
    }
}

pub(crate) fn comparator_diff(dev: &DeviceInstance, x: &[f64]) -> f64 {
    match dev {
        DeviceInstance::Comparator { plus, minus, .. } => volt(x, *plus) - volt(x, *minus),
        _ => 0.0,
    }
}

pub(crate) struct Engine<'a> {
    pub circuit: &'a Circuit,
    pub config: &'a SolverConfig,
    sys: MnaSystem,
    mem: Vec<JunctionMemory>,
    /// Linear solves performed, for statistics.
    pub solves: usize,
}

pub(crate) struct NewtonResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

impl<'a> Engine<'a> {
    pub fn new(circuit: &'a Circuit, config: &'a SolverConfig) -> Self {
        Self {
            circuit,
            config,
            sys: MnaSystem::new(circuit.node_count(), circuit.branch_count),
            mem: vec![JunctionMemory::None; circuit.devices.len()],
            solves: 0,
        }
    }

    pub fn params(&self, t: f64, integration: Integration, source_scale: f64) -> StampParams {
        StampParams {
            t,
            integration,
            source_scale,
            gmin: self.config.gmin,
            temp: self.circuit.temperature,
            left_limit: false,
        }
    }

    fn assemble(&mut self, x: &[f64], states: &[DeviceState], p: &StampParams, shunt: f64) -> bool {
        self.sys.clear();
        let mut limited = false;
        for ((dev, state), mem) in self.circuit.devices.iter().zip(states).zip(self.mem.iter_mut()) {
            limited |= stamp(&dev.instance, state, mem, x, p, &mut self.sys);
        }
        if shunt > 0.0 {
            for n in 1..=self.sys.node_count() {
                self.sys.conductance(NodeId(n), NodeId::GROUND, shunt);
            }
        }
        limited
    }

    /// Largest KCL residual violation `|r| − tol` and its node row, for the
    /// linearization currently assembled, evaluated at `x`.
    fn residual(&self, x: &[f64]) -> (f64, f64, usize) {
        let dim = self.sys.dimension();
        let mut worst = (f64::NEG_INFINITY, 0.0, 0);
        for r in 0..self.sys.node_count() {
            let mut sum = -self.sys.rhs[r];
            for (g, xc) in self.sys.g[r * dim..(r + 1) * dim].iter().zip(x) {
                sum += g * xc;
            }
            let excess = sum.abs() - self.config.abstol;
            if excess > worst.0 {
                worst = (excess, sum.abs(), r);
            }
        }
        worst
    }

    fn step_small(&self, old: &[f64], new: &[f64]) -> bool {
        let nc = self.sys.node_count();
        old.iter().zip(new).enumerate().all(|(k, (a, b))| {
            let floor = if k < nc { self.config.vntol } else { self.config.abstol };
            (a - b).abs() <= floor + self.config.reltol * a.abs().max(b.abs())
        })
    }

    /// Newton iteration from `x0`. Converged when no junction was limited,
    /// every node KCL residual is below `abstol` and the update is within
    /// the voltage/current tolerances. The reported count excludes the
    /// confirming solve, so a linear circuit reports one iteration.
    pub fn newton(
        &mut self,
        x0: &[f64],
        states: &[DeviceState],
        p: &StampParams,
        shunt: f64,
        time: Option<f64>,
    ) -> Result<NewtonResult, SolverError> {
        for (mem, dev) in self.mem.iter_mut().zip(&self.circuit.devices) {
            *mem = JunctionMemory::seed(&dev.instance, x0);
        }
        let mut x = x0.to_vec();
        let mut last = (f64::INFINITY, 0usize);
        for k in 0..=self.config.max_newton_iters {
            let limited = self.assemble(&x, states, p, shunt);
            let (excess, residual, row) = self.residual(&x);
            last = (residual, row);
            let next = solve_linear(&self.sys)?;
            self.solves += 1;
            if next.iter().any(|v| !v.is_finite()) {
                break;
            }
            // x is returned rather than next: its residual is the one verified
            if k > 0 && !limited && excess < 0.0 && self.step_small(&x, &next) {
                return Ok(NewtonResult {
                    x,
                    iterations: k,
                    residual,
                });
            }
            x = next;
        }
        Err(SolverError::NoConvergence {
            time,
            node: self.circuit.node_name(NodeId(last.1 + 1)).to_string(),
            residual: last.0,
        })
    }

    /// Newton with gmin stepping then source stepping as fallbacks.
    pub fn solve_dc(&mut self, x0: &[f64], states: &[DeviceState]) -> Result<(NewtonResult, DcStrategy), SolverError> {
        let p = self.params(0.0, Integration::Dc, 1.0);
        let first = match self.newton(x0, states, &p, 0.0, None) {
            Ok(r) => return Ok((r, DcStrategy::Direct)),
            Err(e) => e,
        };
        if let Ok(r) = self.gmin_stepping(x0, states, &p) {
            return Ok((r, DcStrategy::GminStepping));
        }
        match self.source_stepping(x0, states) {
            Ok(r) => Ok((r, DcStrategy::SourceStepping)),
            Err(SolverError::SingularMatrix { pivot }) => Err(SolverError::SingularMatrix { pivot }),
            Err(_) => Err(first),
        }
    }

    fn gmin_stepping(
        &mut self,
        x0: &[f64],
        states: &[DeviceState],
        p: &StampParams,
    ) -> Result<NewtonResult, SolverError> {
        let mut x = x0.to_vec();
        let mut shunt = 1e-3;
        let floor = self.config.gmin.max(1e-15);
        while shunt >= floor {
            x = self.newton(&x, states, p, shunt, None)?.x;
            shunt /= 10.0;
        }
        self.newton(&x, states, p, 0.0, None)
    }

    fn source_stepping(&mut self, x0: &[f64], states: &[DeviceState]) -> Result<NewtonResult, SolverError> {
        let mut x = x0.to_vec();
        let mut result = None;
        for k in 1..=SOURCE_STEPS {
            let p = self.params(0.0, Integration::Dc, k as f64 / SOURCE_STEPS as f64);
            let r = self.newton(&x, states, &p, 0.0, None)?;
            x = r.x.clone();
            result = Some(r);
        }
        Ok(result.expect("at least one source step"))
    }
}

/// Operating point with capacitors open and sources at their initial
/// values. Comparator levels and SCR latches start low/blocking and are
/// re-solved until they agree with the node voltages.
pub fn dc_operating_point(circuit: &Circuit, config: &SolverConfig) -> Result<OperatingPoint, SolverError> {
    config.validate()?;
    let mut engine = Engine::new(circuit, config);
    let mut states = initial_states(circuit);
    let mut x = vec![0.0; circuit.dimension()];
    for _ in 0..DC_STATE_PASSES {
        let (r, strategy) = engine.solve_dc(&x, &states)?;
        x = r.x;
        let mut changed = false;
        for (dev, state) in circuit.devices.iter().zip(states.iter_mut()) {
            match state {
                DeviceState::Comparator(s) => {
                    if let DeviceInstance::Comparator { model, .. } = &dev.instance {
                        let want = model.desired_level(comparator_diff(&dev.instance, &x), s.level);
                        if want != s.level {
                            s.level = want;
                            changed = true;
                        }
                    }
                }
                DeviceState::Scr { latched } => {
                    let want = scr_request(&dev.instance, *latched, &x).unwrap_or(*latched);
                    if want != *latched {
                        *latched = want;
                        changed = true;
                    }
                }
                _ => {}
            }
        }
        if !changed {
            for (dev, state) in circuit.devices.iter().zip(states.iter_mut()) {
                if let (DeviceInstance::Capacitor { a, b, .. }, DeviceState::Capacitor { v, i }) =
                    (&dev.instance, state)
                {
                    *v = volt(&x, *a) - volt(&x, *b);
                    *i = 0.0;
                }
            }
            return Ok(OperatingPoint {
                x,
                iterations: r.iterations,
                strategy,
                kcl_residual: r.residual,
                states,
                node_count: circuit.node_count(),
            });
        }
    }
    let device = circuit
        .devices
        .iter()
        .find(|d| {
            matches!(
                d.instance,
                DeviceInstance::Comparator { .. } | DeviceInstance::Scr { .. }
            )
        })
        .map(|d| d.name.clone())
        .unwrap_or_default();
    Err(SolverError::StateOscillation { time: 0.0, device })
}
