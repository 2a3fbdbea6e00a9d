use super::{SelBenchParams, SelError, CMP1_OUT, CMP2_OUT, DEVICE_CURRENT, V_C1, V_C2};
use crate::solver::{EventKind, Waveforms};

/// Device current below this fraction of `i_op` counts as off.
pub const OFF_FRACTION: f64 = 0.01;
/// Device current within this fraction of `i_op` counts as restored.
pub const RESTORED_FRACTION: f64 = 0.01;

const SCR_NAME: &str = "SSEL";
const CMP1_NAME: &str = "X1";
const CMP2_NAME: &str = "X2";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChoreographyStep {
    ScrOn,
    Cmp1Rise,
    Q3On,
    Cmp2Fall,
    Cmp2Rise,
    CurrentRestored,
}

impl ChoreographyStep {
    pub const ORDER: [ChoreographyStep; 6] = [
        ChoreographyStep::ScrOn,
        ChoreographyStep::Cmp1Rise,
        ChoreographyStep::Q3On,
        ChoreographyStep::Cmp2Fall,
        ChoreographyStep::Cmp2Rise,
        ChoreographyStep::CurrentRestored,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ChoreographyStep::ScrOn => "scr-on",
            ChoreographyStep::Cmp1Rise => "cmp1-rise",
            ChoreographyStep::Q3On => "q3-on",
            ChoreographyStep::Cmp2Fall => "cmp2-fall",
            ChoreographyStep::Cmp2Rise => "cmp2-rise",
            ChoreographyStep::CurrentRestored => "current-restored",
        }
    }
}

/// Figures of merit of one bench run. Durations are measured from the
/// first SEL fire inside the run; fields that did not occur are `None`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SelMeasurements {
    pub fire_time: Option<f64>,
    /// Steady device current before the fire (A).
    pub i_op: f64,
    /// Maximum device current over the run (A).
    pub i_peak: f64,
    /// Median plateau current between the fire and power-off (A).
    pub i_limited: Option<f64>,
    /// Fire to CMP1 output crossing its half swing.
    pub t_detect: Option<f64>,
    /// Fire to device current below 1% of `i_op`.
    pub t_power_off: Option<f64>,
    /// Time the device current stays below 1% of `i_op`.
    pub t_off: Option<f64>,
    /// Fire to CMP2 output back above its half swing.
    pub t_restart: Option<f64>,
    /// Peak C1 voltage (V).
    pub v_o: Option<f64>,
    /// Lowest C2 voltage (V).
    pub v_c2_min: Option<f64>,
    /// Device current at the end of the run (A).
    pub i_final: f64,
    /// Time-ordered power-cycle milestones after the fire.
    pub choreography: Vec<(ChoreographyStep, f64)>,
}

impl SelMeasurements {
    pub fn step_time(&self, step: ChoreographyStep) -> Option<f64> {
        self.choreography.iter().find(|s| s.0 == step).map(|s| s.1)
    }

    /// All six milestones present, in narrative order (ties allowed).
    pub fn choreography_in_order(&self) -> bool {
        let times: Option<Vec<f64>> = ChoreographyStep::ORDER.iter().map(|s| self.step_time(*s)).collect();
        times.is_some_and(|t| t.windows(2).all(|w| w[0] <= w[1]))
    }
}

fn signal<'a>(w: &'a Waveforms, name: &str) -> Result<&'a [f64], SelError> {
    w.get(name).ok_or_else(|| SelError::SignalMissing(name.to_string()))
}

/// First crossing of `level` in direction `rising` at or after `from`,
/// linearly interpolated between samples.
pub(crate) fn crossing(time: &[f64], v: &[f64], level: f64, rising: bool, from: f64) -> Option<f64> {
    let start = time.partition_point(|&t| t < from).max(1);
    (start..time.len()).find_map(|k| {
        let (a, b) = (v[k - 1], v[k]);
        let hit = if rising {
            a < level && b >= level
        } else {
            a > level && b <= level
        };
        if !hit {
            return None;
        }
        let f = if b != a { (level - a) / (b - a) } else { 1.0 };
        let t = time[k - 1] + f * (time[k] - time[k - 1]);
        (t >= from).then_some(t)
    })
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Extracts the bench figures of merit. The device current is required;
/// the control-loop quantities are measured when the run has the
/// protection circuit.
pub fn measure(waves: &Waveforms, params: &SelBenchParams) -> Result<SelMeasurements, SelError> {
    let time = &waves.time;
    let current = signal(waves, DEVICE_CURRENT)?;
    if time.is_empty() {
        return Err(SelError::SignalMissing("time".into()));
    }
    let t_end = *time.last().unwrap();
    let fire = params.sel_fire_times.iter().copied().find(|&t| t <= t_end);

    let i_op = match fire {
        Some(tf) => {
            let k = time.partition_point(|&t| t < tf).max(1);
            current[k - 1]
        }
        None => current[0],
    };
    let i_peak = current.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut m = SelMeasurements {
        fire_time: fire,
        i_op,
        i_peak,
        i_final: *current.last().unwrap(),
        ..SelMeasurements::default()
    };
    let Some(tf) = fire else {
        return Ok(m);
    };

    let off_level = OFF_FRACTION * i_op;
    let off_at = crossing(time, current, off_level, false, tf);
    m.t_power_off = off_at.map(|t| t - tf);
    let on_again = off_at.and_then(|t| crossing(time, current, off_level, true, t));
    m.t_off = match (off_at, on_again) {
        (Some(a), Some(b)) => Some(b - a),
        _ => None,
    };
    let plateau_end = off_at.unwrap_or(f64::INFINITY);
    let mid = 0.5 * (i_op + i_peak);
    m.i_limited = median(
        time.iter()
            .zip(current)
            .filter(|(t, i)| **t >= tf && **t < plateau_end && **i > mid)
            .map(|(_, i)| *i)
            .collect(),
    );

    let protected = [CMP1_OUT, CMP2_OUT, V_C1, V_C2].iter().any(|n| waves.get(n).is_some());
    let mut steps = Vec::new();
    if let Some(e) = waves
        .events_of(SCR_NAME)
        .find(|e| e.kind == EventKind::ScrOn && e.time >= tf)
    {
        steps.push((ChoreographyStep::ScrOn, e.time));
    }
    if protected {
        let cmp1 = signal(waves, CMP1_OUT)?;
        let cmp2 = signal(waves, CMP2_OUT)?;
        let vc1 = signal(waves, V_C1)?;
        let vc2 = signal(waves, V_C2)?;
        let half = params.comparator_midpoint();
        m.t_detect = crossing(time, cmp1, half, true, tf).map(|t| t - tf);
        let cmp2_low = crossing(time, cmp2, half, false, tf);
        m.t_restart = cmp2_low
            .and_then(|t| crossing(time, cmp2, half, true, t))
            .map(|t| t - tf);
        m.v_o = vc1.iter().copied().reduce(f64::max);
        m.v_c2_min = vc2.iter().copied().reduce(f64::min);

        let rise1 = waves
            .events_of(CMP1_NAME)
            .find(|e| e.kind == EventKind::ComparatorRise && e.time >= tf);
        if let Some(e) = rise1 {
            steps.push((ChoreographyStep::Cmp1Rise, e.time));
        }
        let vt_q3 = params.q3.threshold(params.temperature);
        if let Some(t) = crossing(time, vc1, vt_q3, true, tf) {
            steps.push((ChoreographyStep::Q3On, t));
        }
        let fall2 = waves
            .events_of(CMP2_NAME)
            .find(|e| e.kind == EventKind::ComparatorFall && e.time >= tf);
        if let Some(f) = fall2 {
            steps.push((ChoreographyStep::Cmp2Fall, f.time));
            if let Some(r) = waves
                .events_of(CMP2_NAME)
                .find(|e| e.kind == EventKind::ComparatorRise && e.time > f.time)
            {
                steps.push((ChoreographyStep::Cmp2Rise, r.time));
                let tol = RESTORED_FRACTION * i_op.abs();
                let k0 = time.partition_point(|&t| t < r.time);
                if let Some(k) = (k0..time.len()).find(|&k| (current[k] - i_op).abs() <= tol) {
                    steps.push((ChoreographyStep::CurrentRestored, time[k]));
                }
            }
        }
    }
    m.choreography = steps;
    Ok(m)
}
