/// Time function of an independent voltage source.
///
/// Values are right-continuous: at an ideal step the value *after* the step
/// is returned. [`Waveform::initial`] gives the value just before t = 0,
/// which is what the operating point uses.
#[derive(Debug, Clone, PartialEq)]
pub enum Waveform {
    Dc(f64),
    Pulse {
        v1: f64,
        v2: f64,
        delay: f64,
        rise: f64,
        fall: f64,
        width: f64,
        period: Option<f64>,
    },
    /// Time-ordered corners; equal consecutive times encode a step.
    Pwl(Vec<(f64, f64)>),
}

impl Waveform {
    pub fn initial(&self) -> f64 {
        match self {
            Waveform::Dc(v) => *v,
            Waveform::Pulse { v1, .. } => *v1,
            Waveform::Pwl(p) => p.first().map_or(0.0, |c| c.1),
        }
    }

    pub fn value_at(&self, t: f64) -> f64 {
        match self {
            Waveform::Dc(v) => *v,
            Waveform::Pulse {
                v1,
                v2,
                delay,
                rise,
                fall,
                width,
                period,
            } => {
                if t < *delay {
                    return *v1;
                }
                let mut local = t - delay;
                if let Some(per) = period.filter(|p| *p > 0.0) {
                    local %= per;
                }
                if local < *rise {
                    v1 + (v2 - v1) * local / rise
                } else if local < rise + width {
                    *v2
                } else if local < rise + width + fall {
                    v2 + (v1 - v2) * (local - rise - width) / fall
                } else {
                    *v1
                }
            }
            Waveform::Pwl(points) => {
                let Some(first) = points.first() else {
                    return 0.0;
                };
                if t < first.0 {
                    return first.1;
                }
                // last corner with time <= t wins, giving right-continuity
                let idx = points.partition_point(|p| p.0 <= t);
                let (t0, v0) = points[idx - 1];
                match points.get(idx) {
                    Some(&(t1, v1)) if t1 > t0 => v0 + (v1 - v0) * (t - t0) / (t1 - t0),
                    _ => v0,
                }
            }
        }
    }

    /// Left limit at `t`: the value approached from earlier times.
    pub fn value_before(&self, t: f64) -> f64 {
        match self {
            Waveform::Dc(v) => *v,
            Waveform::Pulse {
                v1,
                v2,
                delay,
                rise,
                fall,
                width,
                period,
            } => {
                if t <= *delay {
                    return *v1;
                }
                let mut local = t - delay;
                if let Some(per) = period.filter(|p| *p > 0.0) {
                    local %= per;
                    if local == 0.0 {
                        local = per;
                    }
                }
                if local <= *rise {
                    v1 + (v2 - v1) * local / rise
                } else if local <= rise + width {
                    *v2
                } else if local <= rise + width + fall {
                    v2 + (v1 - v2) * (local - rise - width) / fall
                } else {
                    *v1
                }
            }
            Waveform::Pwl(points) => {
                let Some(first) = points.first() else {
                    return 0.0;
                };
                let idx = points.partition_point(|p| p.0 < t);
                if idx == 0 {
                    return first.1;
                }
                let (t0, v0) = points[idx - 1];
                match points.get(idx) {
                    Some(&(t1, v1)) if t1 > t0 => v0 + (v1 - v0) * (t - t0) / (t1 - t0),
                    _ => v0,
                }
            }
        }
    }

    /// Corner times in `(0, t_stop]` the integrator must land on.
    pub fn breakpoints(&self, t_stop: f64) -> Vec<f64> {
        let mut out = Vec::new();
        match self {
            Waveform::Dc(_) => {}
            Waveform::Pulse {
                delay,
                rise,
                fall,
                width,
                period,
                ..
            } => {
                let corners = [0.0, *rise, rise + width, rise + width + fall];
                let per = period.filter(|p| *p > 0.0);
                let mut start = *delay;
                loop {
                    for c in corners {
                        out.push(start + c);
                    }
                    match per {
                        Some(p) if start + p <= t_stop => start += p,
                        _ => break,
                    }
                }
            }
            Waveform::Pwl(points) => out.extend(points.iter().map(|p| p.0)),
        }
        out.retain(|&t| t > 0.0 && t <= t_stop);
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pwl_step_is_right_continuous() {
        let w = Waveform::Pwl(vec![(0.0, 0.0), (1e-3, 0.0), (1e-3, 1.0), (2e-3, 1.0), (2e-3, 0.0)]);
        assert_eq!(w.initial(), 0.0);
        assert_eq!(w.value_at(0.999e-3), 0.0);
        assert_eq!(w.value_at(1e-3), 1.0);
        assert_eq!(w.value_at(1.5e-3), 1.0);
        assert_eq!(w.value_at(2e-3), 0.0);
        assert_eq!(w.breakpoints(1.0), vec![1e-3, 2e-3]);
    }

    #[test]
    fn pulse_shape_and_period() {
        let w = Waveform::Pulse {
            v1: 0.0,
            v2: 10.0,
            delay: 1.0,
            rise: 1.0,
            fall: 1.0,
            width: 2.0,
            period: Some(10.0),
        };
        assert_eq!(w.value_at(0.5), 0.0);
        assert_eq!(w.value_at(1.5), 5.0);
        assert_eq!(w.value_at(3.0), 10.0);
        assert_eq!(w.value_at(4.5), 5.0);
        assert_eq!(w.value_at(11.5), 5.0);
        assert_eq!(w.breakpoints(12.0), vec![1.0, 2.0, 4.0, 5.0, 11.0, 12.0]);
    }

    #[test]
    fn zero_delay_step_starts_low() {
        let w = Waveform::Pulse {
            v1: 0.0,
            v2: 10.0,
            delay: 0.0,
            rise: 0.0,
            fall: 0.0,
            width: 1.0,
            period: None,
        };
        assert_eq!(w.initial(), 0.0);
        assert_eq!(w.value_at(1e-9), 10.0);
    }

    #[test]
    fn left_limits_at_steps() {
        let w = Waveform::Pwl(vec![(0.0, 0.0), (1e-3, 0.0), (1e-3, 1.0), (2e-3, 1.0), (2e-3, 0.0)]);
        assert_eq!(w.value_before(1e-3), 0.0);
        assert_eq!(w.value_before(2e-3), 1.0);
        assert_eq!(w.value_before(1.5e-3), 1.0);
        let p = Waveform::Pulse {
            v1: 0.0,
            v2: 10.0,
            delay: 1.0,
            rise: 0.0,
            fall: 0.0,
            width: 2.0,
            period: Some(5.0),
        };
        assert_eq!(p.value_before(1.0), 0.0);
        assert_eq!(p.value_at(1.0), 10.0);
        assert_eq!(p.value_before(3.0), 10.0);
        assert_eq!(p.value_at(3.0), 0.0);
        assert_eq!(p.value_before(6.0), 0.0);
    }
}
