use std::collections::{BTreeMap, HashMap};

use super::{
    CardValue, CircuitDescription, Directive, ElementCard, ElementKind, ModelKind, NetlistError, SourceSpec, Value,
};
use crate::devices::{ComparatorModel, DiodeModel, MosfetModel, ScrModel, Waveform, T_NOMINAL};

type Result<T> = std::result::Result<T, NetlistError>;

/// Dense node index; 0 is ground.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub usize);

impl NodeId {
    pub const GROUND: NodeId = NodeId(0);

    pub fn is_ground(self) -> bool {
        self.0 == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DeviceInstance {
    Resistor {
        a: NodeId,
        b: NodeId,
        resistance: f64,
    },
    Capacitor {
        a: NodeId,
        b: NodeId,
        capacitance: f64,
    },
    Diode {
        anode: NodeId,
        cathode: NodeId,
        model: DiodeModel,
    },
    Mosfet {
        drain: NodeId,
        gate: NodeId,
        source: NodeId,
        model: MosfetModel,
    },
    VoltageSource {
        pos: NodeId,
        neg: NodeId,
        waveform: Waveform,
        branch: usize,
    },
    Comparator {
        plus: NodeId,
        minus: NodeId,
        out: NodeId,
        vcc: NodeId,
        gnd: NodeId,
        model: ComparatorModel,
        branch: usize,
    },
    Scr {
        anode: NodeId,
        cathode: NodeId,
        gate: NodeId,
        model: ScrModel,
    },
}

impl DeviceInstance {
    /// Terminal pairs that carry current (used for the ground-path check).
    /// MOSFET gates, comparator inputs and SCR gates only sense voltage.
    fn conductive_pairs(&self) -> Vec<(NodeId, NodeId)> {
        match *self {
            DeviceInstance::Resistor { a, b, .. } | DeviceInstance::Capacitor { a, b, .. } => {
                vec![(a, b)]
            }
            DeviceInstance::Diode { anode, cathode, .. } | DeviceInstance::Scr { anode, cathode, .. } => {
                vec![(anode, cathode)]
            }
            DeviceInstance::Mosfet { drain, source, .. } => vec![(drain, source)],
            DeviceInstance::VoltageSource { pos, neg, .. } => vec![(pos, neg)],
            DeviceInstance::Comparator { out, vcc, gnd, .. } => vec![(out, gnd), (out, vcc)],
        }
    }

    pub fn branch(&self) -> Option<usize> {
        match *self {
            DeviceInstance::VoltageSource { branch, .. } | DeviceInstance::Comparator { branch, .. } => Some(branch),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Device {
    pub name: String,
    pub instance: DeviceInstance,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TranSpec {
    pub tstep: f64,
    pub tstop: f64,
    pub tmax: Option<f64>,
}

/// Elaborated, node-indexed circuit ready for the solver.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    pub title: String,
    /// Names of nodes 1..=node_count; ground is not listed.
    pub node_names: Vec<String>,
    pub devices: Vec<Device>,
    pub branch_count: usize,
    pub temperature: f64,
    pub tran: Option<TranSpec>,
}

impl Circuit {
    pub fn node_count(&self) -> usize {
        self.node_names.len()
    }

    /// Number of MNA unknowns.
    pub fn dimension(&self) -> usize {
        self.node_count() + self.branch_count
    }

    pub fn node(&self, name: &str) -> Option<NodeId> {
        let name = name.to_ascii_lowercase();
        if name == "0" {
            return Some(NodeId::GROUND);
        }
        self.node_names.iter().position(|n| *n == name).map(|i| NodeId(i + 1))
    }

    pub fn node_name(&self, id: NodeId) -> &str {
        if id.is_ground() {
            "0"
        } else {
            &self.node_names[id.0 - 1]
        }
    }

    pub fn device(&self, name: &str) -> Option<&Device> {
        self.devices.iter().find(|d| d.name.eq_ignore_ascii_case(name))
    }

    /// Names of branch-current unknowns in branch order.
    pub fn branch_names(&self) -> Vec<&str> {
        let mut names = vec![""; self.branch_count];
        for d in &self.devices {
            if let Some(b) = d.instance.branch() {
                names[b] = &d.name;
            }
        }
        names
    }
}

struct ParamTable {
    defs: HashMap<String, Value>,
}

impl ParamTable {
    fn resolve(&self, v: &Value) -> Result<f64> {
        self.resolve_depth(v, 0)
    }

    fn resolve_depth(&self, v: &Value, depth: usize) -> Result<f64> {
        match v {
            Value::Num(x) => Ok(*x),
            Value::Param(name) => {
                let def = self
                    .defs
                    .get(name)
                    .filter(|_| depth < 64)
                    .ok_or_else(|| NetlistError::UndefinedParam { name: name.clone() })?;
                self.resolve_depth(def, depth + 1)
            }
        }
    }
}

fn invalid(card: &ElementCard, message: String) -> NetlistError {
    NetlistError::InvalidValue {
        element: card.name.clone(),
        message,
    }
}

/// Model parameters with builtin defaults filled in.
fn model_params(
    desc: &CircuitDescription,
    name: &str,
    params: &ParamTable,
) -> Result<(ModelKind, String, HashMap<String, f64>)> {
    let mut out = HashMap::new();
    let (kind, base) = match desc.models.get(name) {
        Some(card) => {
            for (k, v) in &card.params {
                out.insert(k.clone(), params.resolve(v)?);
            }
            let base = match card.kind {
                ModelKind::Nmos => "nmos",
                ModelKind::Diode => "d",
                ModelKind::Scr => "scr",
                ModelKind::Comparator => "cmp",
            };
            (card.kind, base.to_string())
        }
        None => (
            super::builtin_model_kind(name).ok_or_else(|| NetlistError::UnresolvedModel {
                name: name.to_string(),
                line: 0,
            })?,
            name.to_string(),
        ),
    };
    Ok((kind, base, out))
}

fn get(p: &HashMap<String, f64>, key: &str, default: f64) -> f64 {
    p.get(key).copied().unwrap_or(default)
}

fn mosfet_model(p: &HashMap<String, f64>) -> MosfetModel {
    let d = MosfetModel::fitted_2n7000();
    MosfetModel {
        k_gain: get(p, "k", d.k_gain),
        vt0: get(p, "vt0", d.vt0),
        vt_tempco: get(p, "tc_vt", d.vt_tempco),
        lambda: get(p, "lambda", d.lambda),
    }
}

fn diode_model(base: &str, p: &HashMap<String, f64>) -> DiodeModel {
    let d = if base == "led" {
        DiodeModel::led_default()
    } else {
        DiodeModel::d1_default()
    };
    DiodeModel {
        i_sat: get(p, "is", d.i_sat),
        emission: get(p, "n", d.emission),
        v_thermal: d.v_thermal,
    }
}

fn scr_model(p: &HashMap<String, f64>) -> ScrModel {
    let d = ScrModel::default();
    ScrModel {
        i_hold: get(p, "ihold", d.i_hold),
        v_on: get(p, "von", d.v_on),
        r_on: get(p, "ron", d.r_on),
        r_off: get(p, "roff", d.r_off),
        gate_threshold: get(p, "vgt", d.gate_threshold),
    }
}

fn comparator_model(p: &HashMap<String, f64>) -> ComparatorModel {
    let d = ComparatorModel::default();
    ComparatorModel {
        t_pd: get(p, "tpd", d.t_pd),
        v_out_high_drop: get(p, "vohdrop", d.v_out_high_drop),
        v_out_low: get(p, "vol", d.v_out_low),
        r_out: get(p, "rout", d.r_out),
        hysteresis: get(p, "hyst", d.hysteresis),
    }
}

fn waveform(spec: &SourceSpec, params: &ParamTable) -> Result<Waveform> {
    Ok(match spec {
        SourceSpec::Dc(v) => Waveform::Dc(params.resolve(v)?),
        SourceSpec::Pulse(p) => Waveform::Pulse {
            v1: params.resolve(&p.v1)?,
            v2: params.resolve(&p.v2)?,
            delay: params.resolve(&p.delay)?,
            rise: params.resolve(&p.rise)?,
            fall: params.resolve(&p.fall)?,
            width: params.resolve(&p.width)?,
            period: p.period.as_ref().map(|v| params.resolve(v)).transpose()?,
        },
        SourceSpec::Pwl(points) => Waveform::Pwl(
            points
                .iter()
                .map(|(t, v)| Ok((params.resolve(t)?, params.resolve(v)?)))
                .collect::<Result<_>>()?,
        ),
    })
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Assigns node indices, substitutes parameters (then `overrides`), fills
/// model defaults and checks that every node has a path to ground.
pub fn elaborate(desc: &CircuitDescription, overrides: &BTreeMap<String, f64>) -> Result<Circuit> {
    let mut defs: HashMap<String, Value> = HashMap::new();
    for (name, value) in desc.params() {
        defs.insert(name.to_string(), value.clone());
    }
    for (name, value) in overrides {
        let key = name.to_ascii_lowercase();
        if !defs.contains_key(&key) {
            return Err(NetlistError::OverrideUnknownParam { name: name.clone() });
        }
        defs.insert(key, Value::Num(*value));
    }
    let params = ParamTable { defs };

    let mut temperature = T_NOMINAL;
    let mut tran = None;
    for d in &desc.directives {
        match d {
            Directive::Temp(t) => temperature = params.resolve(t)?,
            Directive::Tran { tstep, tstop, tmax } => {
                tran = Some(TranSpec {
                    tstep: params.resolve(tstep)?,
                    tstop: params.resolve(tstop)?,
                    tmax: tmax.as_ref().map(|v| params.resolve(v)).transpose()?,
                })
            }
            Directive::Param { .. } => {}
        }
    }

    let mut node_names: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut node = |name: &str| -> NodeId {
        if name == "0" {
            return NodeId::GROUND;
        }
        if let Some(&i) = index.get(name) {
            return NodeId(i);
        }
        node_names.push(name.to_string());
        index.insert(name.to_string(), node_names.len());
        NodeId(node_names.len())
    };

    let mut devices = Vec::with_capacity(desc.elements.len());
    let mut branch_count = 0;
    for card in &desc.elements {
        let n: Vec<NodeId> = card.nodes.iter().map(|s| node(s)).collect();
        let instance = match (card.kind, &card.value) {
            (ElementKind::Resistor, CardValue::Value(v)) => {
                let resistance = params.resolve(v)?;
                if !(resistance > 0.0) {
                    return Err(invalid(card, format!("resistance must be positive, got {resistance}")));
                }
                DeviceInstance::Resistor {
                    a: n[0],
                    b: n[1],
                    resistance,
                }
            }
            (ElementKind::Capacitor, CardValue::Value(v)) => {
                let capacitance = params.resolve(v)?;
                if !(capacitance > 0.0) {
                    return Err(invalid(
                        card,
                        format!("capacitance must be positive, got {capacitance}"),
                    ));
                }
                DeviceInstance::Capacitor {
                    a: n[0],
                    b: n[1],
                    capacitance,
                }
            }
            (ElementKind::VoltageSource, CardValue::Source(spec)) => {
                branch_count += 1;
                DeviceInstance::VoltageSource {
                    pos: n[0],
                    neg: n[1],
                    waveform: waveform(spec, &params)?,
                    branch: branch_count - 1,
                }
            }
            (kind, CardValue::Model(name)) => {
                let (model_kind, base, p) = model_params(desc, name, &params).map_err(|e| match e {
                    NetlistError::UnresolvedModel { name, .. } => {
                        NetlistError::UnresolvedModel { name, line: card.line }
                    }
                    other => other,
                })?;
                if Some(model_kind) != kind.model_kind() {
                    return Err(NetlistError::WrongModelKind {
                        name: name.clone(),
                        line: card.line,
                        expected: kind.model_kind().map_or("?", ModelKind::keyword),
                    });
                }
                let checked = |r: std::result::Result<(), String>| r.map_err(|m| invalid(card, m));
                match kind {
                    ElementKind::Diode => {
                        let model = diode_model(&base, &p);
                        checked(model.validate())?;
                        DeviceInstance::Diode {
                            anode: n[0],
                            cathode: n[1],
                            model,
                        }
                    }
                    ElementKind::Mosfet => {
                        let model = mosfet_model(&p);
                        checked(model.validate())?;
                        DeviceInstance::Mosfet {
                            drain: n[0],
                            gate: n[1],
                            source: n[2],
                            model,
                        }
                    }
                    ElementKind::Comparator => {
                        let model = comparator_model(&p);
                        checked(model.validate())?;
                        branch_count += 1;
                        DeviceInstance::Comparator {
                            plus: n[0],
                            minus: n[1],
                            out: n[2],
                            vcc: n[3],
                            gnd: n[4],
                            model,
                            branch: branch_count - 1,
                        }
                    }
                    ElementKind::Scr => {
                        let model = scr_model(&p);
                        checked(model.validate())?;
                        DeviceInstance::Scr {
                            anode: n[0],
                            cathode: n[1],
                            gate: n[2],
                            model,
                        }
                    }
                    _ => unreachable!("model cards only on D/M/X/S"),
                }
            }
            _ => return Err(invalid(card, "card value does not match its kind".into())),
        };
        devices.push(Device {
            name: card.name.clone(),
            instance,
        });
    }

    let mut uf = UnionFind((0..=node_names.len()).collect());
    for d in &devices {
        for (a, b) in d.instance.conductive_pairs() {
            uf.union(a.0, b.0);
        }
    }
    for i in 1..=node_names.len() {
        if uf.find(i) != 0 {
            return Err(NetlistError::FloatingNode {
                name: node_names[i - 1].clone(),
            });
        }
    }

    Ok(Circuit {
        title: desc.title.clone(),
        node_names,
        devices,
        branch_count,
        temperature,
        tran,
    })
}

#[cfg(test)]
mod tests {
    use super::super::parse;
    use super::*;

    fn none() -> BTreeMap<String, f64> {
        BTreeMap::new()
    }

    #[test]
    fn dense_node_indices() {
        let d = parse("R1 a b 1k\nR2 b 0 1k").unwrap();
        let c = elaborate(&d, &none()).unwrap();
        assert_eq!(c.node_count(), 2);
        assert_eq!(c.node("a"), Some(NodeId(1)));
        assert_eq!(c.node("b"), Some(NodeId(2)));
        assert_eq!(c.branch_count, 0);
    }

    #[test]
    fn floating_node() {
        let d = parse("R1 a 0 1k\nR2 x y 1k").unwrap();
        assert_eq!(
            elaborate(&d, &none()),
            Err(NetlistError::FloatingNode { name: "x".into() })
        );
        // a gate alone does not ground a node
        let d = parse("M1 d g 0 nmos\nR1 d 0 1k").unwrap();
        assert_eq!(
            elaborate(&d, &none()),
            Err(NetlistError::FloatingNode { name: "g".into() })
        );
    }

    #[test]
    fn params_and_overrides() {
        let d = parse(".param vg=5 vh={vg}\nV1 g 0 {vh}\nR1 g 0 1k").unwrap();
        let c = elaborate(&d, &none()).unwrap();
        match &c.devices[0].instance {
            DeviceInstance::VoltageSource { waveform, .. } => assert_eq!(*waveform, Waveform::Dc(5.0)),
            other => panic!("{other:?}"),
        }
        let mut o = none();
        o.insert("vg".into(), 4.0);
        let c = elaborate(&d, &o).unwrap();
        match &c.devices[0].instance {
            DeviceInstance::VoltageSource { waveform, .. } => assert_eq!(*waveform, Waveform::Dc(4.0)),
            other => panic!("{other:?}"),
        }
        o.insert("nosuch".into(), 1.0);
        assert_eq!(
            elaborate(&d, &o),
            Err(NetlistError::OverrideUnknownParam { name: "nosuch".into() })
        );
    }

    #[test]
    fn model_defaults_fill_in() {
        let d = parse(".model q3 nmos(vt0=2.1)\nM1 d g 0 q3\nV1 g 0 5\nR1 d 0 1").unwrap();
        let c = elaborate(&d, &none()).unwrap();
        match &c.devices[0].instance {
            DeviceInstance::Mosfet { model, .. } => {
                assert_eq!(model.vt0, 2.1);
                assert_eq!(model.k_gain, MosfetModel::fitted_2n7000().k_gain);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(c.branch_count, 1);
    }

    #[test]
    fn undefined_param() {
        let d = parse("R1 a 0 {nope}").unwrap();
        assert_eq!(
            elaborate(&d, &none()),
            Err(NetlistError::UndefinedParam { name: "nope".into() })
        );
    }

    #[test]
    fn deterministic() {
        let text = "V1 in 0 1\nR1 in mid 1k\nR2 mid out 1k\nC1 out 0 1u";
        let a = elaborate(&parse(text).unwrap(), &none()).unwrap();
        let b = elaborate(&parse(text).unwrap(), &none()).unwrap();
        assert_eq!(a.node_names, b.node_names);
        assert_eq!(a, b);
    }
}
