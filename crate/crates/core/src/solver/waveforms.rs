use std::io;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    ScrOn,
    ScrOff,
    ComparatorRise,
    ComparatorFall,
}

impl EventKind {
    pub fn label(self) -> &'static str {
        match self {
            EventKind::ScrOn => "scr-on",
            EventKind::ScrOff => "scr-off",
            EventKind::ComparatorRise => "comparator-rise",
            EventKind::ComparatorFall => "comparator-fall",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time: f64,
    pub device: String,
    pub kind: EventKind,
}

/// Sampled transient result: one column per node voltage `v(name)` and
/// per branch current `i(name)`, plus discrete events.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Waveforms {
    pub time: Vec<f64>,
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    pub events: Vec<Event>,
    /// Largest node KCL residual of each accepted solution (A).
    pub kcl_residual: Vec<f64>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub newton_iterations: usize,
}

impl Waveforms {
    pub(crate) fn new(names: Vec<String>) -> Self {
        let columns = vec![Vec::new(); names.len()];
        Self {
            names,
            columns,
            ..Self::default()
        }
    }

    pub(crate) fn push(&mut self, t: f64, values: impl IntoIterator<Item = f64>, residual: f64) {
        self.time.push(t);
        self.kcl_residual.push(residual);
        for (col, v) in self.columns.iter_mut().zip(values) {
            col.push(v);
        }
    }

    pub fn signal_names(&self) -> &[String] {
        &self.names
    }

    /// Column by name, case-insensitive (`"v(out)"`, `"i(vdd)"`).
    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n.eq_ignore_ascii_case(name))
            .map(|k| self.columns[k].as_slice())
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    /// Linear interpolation of a column at `t`, clamped to the ends. Where
    /// two samples share a timepoint the later one wins.
    pub fn value_at(&self, name: &str, t: f64) -> Option<f64> {
        let col = self.get(name)?;
        if col.is_empty() {
            return None;
        }
        let k = self.time.partition_point(|&s| s <= t);
        if k == 0 {
            return Some(col[0]);
        }
        if k == self.time.len() {
            return Some(col[k - 1]);
        }
        let (t0, t1) = (self.time[k - 1], self.time[k]);
        let f = if t1 > t0 { (t - t0) / (t1 - t0) } else { 1.0 };
        Some(col[k - 1] + f * (col[k] - col[k - 1]))
    }

    pub fn events_of<'a>(&'a self, device: &'a str) -> impl Iterator<Item = &'a Event> + 'a {
        self.events
            .iter()
            .filter(move |e| e.device.eq_ignore_ascii_case(device))
    }

    /// Writes `time` then every column, nine significant digits.
    pub fn write_csv<W: io::Write>(&self, out: W) -> io::Result<()> {
        self.write_csv_digits(out, 9)
    }

    /// As [`Waveforms::write_csv`] with `digits` significant digits (at least 1).
    pub fn write_csv_digits<W: io::Write>(&self, out: W, digits: usize) -> io::Result<()> {
        let p = digits.max(1) - 1;
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["time".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for (k, t) in self.time.iter().enumerate() {
            let mut row = vec![format!("{t:.p$e}")];
            row.extend(self.columns.iter().map(|c| format!("{:.p$e}", c[k])));
            w.write_record(&row)?;
        }
        w.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Waveforms {
        let mut w = Waveforms::new(vec!["v(a)".into()]);
        w.push(0.0, [0.0], 0.0);
        w.push(1.0, [2.0], 0.0);
        w.push(1.0, [4.0], 0.0);
        w.push(2.0, [6.0], 0.0);
        w
    }

    #[test]
    fn interpolates_and_clamps() {
        let w = sample();
        assert_eq!(w.value_at("V(A)", 0.5), Some(1.0));
        assert_eq!(w.value_at("v(a)", 1.5), Some(5.0));
        assert_eq!(w.value_at("v(a)", 1.0), Some(4.0));
        assert_eq!(w.value_at("v(a)", 9.0), Some(6.0));
        assert_eq!(w.value_at("v(b)", 0.0), None);
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        sample().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("time,v(a)"));
        assert_eq!(lines.next(), Some("0.00000000e0,0.00000000e0"));
        assert_eq!(text.lines().count(), 5);
    }
}
