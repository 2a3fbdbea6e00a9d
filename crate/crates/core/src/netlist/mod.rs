//! Netlist front-end: a small SPICE-like text format, its parsed
//! description, and elaboration into a node-indexed [`Circuit`].
//!
//! Card summary (first letter selects the element, case-insensitive):
//!
//! ```text
//! .title <text>
//! R<name> n1 n2 <value>
//! C<name> n1 n2 <value>
//! D<name> anode cathode <model>
//! M<name> drain gate source <model>
//! V<name> n+ n- [dc] <value> | pulse(v1 v2 td tr tf pw [per]) | pwl(t1 v1 t2 v2 ...)
//! X<name> in+ in- out vcc gnd <model>        behavioral comparator
//! S<name> anode cathode gate <model>         latching SCR
//! .model <name> nmos|d|scr|cmp (key=value ...)
//! .param name=value ...
//! .tran tstep tstop [tmax]
//! .temp <celsius>
//! .end
//! ```
//!
//! Values accept engineering suffixes (`f p n u m k meg g t`) and `{name}`
//! references to `.param` definitions. `*` starts a comment line, `;` an
//! inline comment and a leading `+` continues the previous card.

mod elaborate;
mod parse;
pub mod units;
mod write;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

pub use elaborate::{elaborate, Circuit, Device, DeviceInstance, NodeId, TranSpec};
pub use parse::parse;
pub use write::to_netlist;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementKind {
    Resistor,
    Capacitor,
    Diode,
    Mosfet,
    VoltageSource,
    Comparator,
    Scr,
}

impl ElementKind {
    pub fn from_letter(c: char) -> Option<Self> {
        Some(match c.to_ascii_uppercase() {
            'R' => Self::Resistor,
            'C' => Self::Capacitor,
            'D' => Self::Diode,
            'M' => Self::Mosfet,
            'V' => Self::VoltageSource,
            'X' => Self::Comparator,
            'S' => Self::Scr,
            _ => return None,
        })
    }

    pub fn node_count(self) -> usize {
        match self {
            Self::Resistor | Self::Capacitor | Self::Diode | Self::VoltageSource => 2,
            Self::Mosfet | Self::Scr => 3,
            Self::Comparator => 5,
        }
    }

    /// Model kind required by the card, for elements that take a model.
    pub fn model_kind(self) -> Option<ModelKind> {
        match self {
            Self::Diode => Some(ModelKind::Diode),
            Self::Mosfet => Some(ModelKind::Nmos),
            Self::Comparator => Some(ModelKind::Comparator),
            Self::Scr => Some(ModelKind::Scr),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Nmos,
    Diode,
    Scr,
    Comparator,
}

impl ModelKind {
    pub fn keyword(self) -> &'static str {
        match self {
            Self::Nmos => "nmos",
            Self::Diode => "d",
            Self::Scr => "scr",
            Self::Comparator => "cmp",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        Some(match s.to_ascii_lowercase().as_str() {
            "nmos" => Self::Nmos,
            "d" => Self::Diode,
            "scr" => Self::Scr,
            "cmp" => Self::Comparator,
            _ => return None,
        })
    }

    /// Parameter names accepted in `.model` cards of this kind.
    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            Self::Nmos => &["k", "vt0", "tc_vt", "lambda"],
            Self::Diode => &["is", "n"],
            Self::Scr => &["ihold", "von", "ron", "roff", "vgt"],
            Self::Comparator => &["tpd", "vohdrop", "vol", "rout", "hyst"],
        }
    }
}

/// Model names usable without a `.model` card.
pub fn builtin_model_kind(name: &str) -> Option<ModelKind> {
    Some(match name {
        "nmos" | "2n7000" => ModelKind::Nmos,
        "d" | "1n4454" | "led" => ModelKind::Diode,
        "scr" => ModelKind::Scr,
        "cmp" | "ad8561" => ModelKind::Comparator,
        _ => return None,
    })
}

/// A numeric literal or a `{name}` reference resolved during elaboration.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Param(String),
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Num(v)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(v) => f.write_str(&units::format_number(*v)),
            Value::Param(name) => write!(f, "{{{name}}}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseSpec {
    pub v1: Value,
    pub v2: Value,
    pub delay: Value,
    pub rise: Value,
    pub fall: Value,
    pub width: Value,
    pub period: Option<Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SourceSpec {
    Dc(Value),
    Pulse(PulseSpec),
    /// Corner list; a repeated time denotes an ideal step.
    Pwl(Vec<(Value, Value)>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum CardValue {
    Value(Value),
    Model(String),
    Source(SourceSpec),
}

#[derive(Debug, Clone)]
pub struct ElementCard {
    pub name: String,
    pub kind: ElementKind,
    pub nodes: Vec<String>,
    pub value: CardValue,
    /// 1-based source line, 0 for programmatic cards.
    pub line: usize,
}

// Source positions are not part of a card's identity.
impl PartialEq for ElementCard {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.kind == other.kind && self.nodes == other.nodes && self.value == other.value
    }
}

#[derive(Debug, Clone)]
pub struct ModelCard {
    pub name: String,
    pub kind: ModelKind,
    pub params: BTreeMap<String, Value>,
    pub line: usize,
}

impl PartialEq for ModelCard {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.kind == other.kind && self.params == other.params
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Directive {
    Tran {
        tstep: Value,
        tstop: Value,
        tmax: Option<Value>,
    },
    Param {
        name: String,
        value: Value,
    },
    Temp(Value),
}

/// Parsed netlist in source order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CircuitDescription {
    pub title: String,
    pub elements: Vec<ElementCard>,
    /// Keyed by lower-cased model name.
    pub models: BTreeMap<String, ModelCard>,
    pub directives: Vec<Directive>,
}

impl CircuitDescription {
    pub fn element(&self, name: &str) -> Option<&ElementCard> {
        self.elements.iter().find(|e| e.name.eq_ignore_ascii_case(name))
    }

    /// `.param` definitions in declaration order.
    pub fn params(&self) -> impl Iterator<Item = (&str, &Value)> {
        self.directives.iter().filter_map(|d| match d {
            Directive::Param { name, value } => Some((name.as_str(), value)),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetlistError {
    #[error("line {line}: unknown device kind '{letter}'")]
    UnknownDeviceKind { line: usize, letter: char },
    #[error("line {line}: duplicate element name '{name}'")]
    DuplicateName { name: String, line: usize },
    #[error("line {line}: bad number '{token}'")]
    BadNumber { token: String, line: usize },
    #[error("line {line}: missing nodes")]
    MissingNodes { line: usize },
    #[error("line {line}: missing value")]
    MissingValue { line: usize },
    #[error("line {line}: unresolved model '{name}'")]
    UnresolvedModel { name: String, line: usize },
    #[error("line {line}: model '{name}' is not of kind {expected}")]
    WrongModelKind {
        name: String,
        line: usize,
        expected: &'static str,
    },
    #[error("line {line}: unknown parameter '{name}'")]
    UnknownParam { name: String, line: usize },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("no element connects to ground node 0")]
    NoGround,
    #[error("node '{name}' has no path to ground")]
    FloatingNode { name: String },
    #[error("override '{name}' does not name a .param")]
    OverrideUnknownParam { name: String },
    #[error("parameter '{name}' is not defined")]
    UndefinedParam { name: String },
    #[error("element '{element}': {message}")]
    InvalidValue { element: String, message: String },
}

impl NetlistError {
    /// 1-based source line, when the error is tied to one.
    pub fn line(&self) -> Option<usize> {
        match self {
            Self::UnknownDeviceKind { line, .. }
            | Self::DuplicateName { line, .. }
            | Self::BadNumber { line, .. }
            | Self::MissingNodes { line }
            | Self::MissingValue { line }
            | Self::UnresolvedModel { line, .. }
            | Self::WrongModelKind { line, .. }
            | Self::UnknownParam { line, .. }
            | Self::Syntax { line, .. } => Some(*line),
            _ => None,
        }
    }
}
