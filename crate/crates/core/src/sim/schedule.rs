//! Piecewise-constant input and load schedules.

use crate::error::{Error, Result};
use crate::plant::{Disturbance, PlantInput};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    /// Start time [s]; the segment holds until the next start.
    pub start: f64,
    pub v_cm: f64,
    pub i_fc: f64,
}

/// Right-continuous piecewise-constant `(v_cm, I_fc)` over `[0, duration]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    segments: Vec<Segment>,
    duration: f64,
}

impl Profile {
    pub fn new(segments: Vec<Segment>, duration: f64) -> Result<Self> {
        let bad = |m: String| Err(Error::validation("profile", m));
        if segments.is_empty() {
            return bad("at least one segment is required".into());
        }
        if segments[0].start != 0.0 {
            return bad(format!("first segment must start at 0, got {}", segments[0].start));
        }
        for w in segments.windows(2) {
            if !(w[1].start > w[0].start) {
                return bad(format!("segment starts must increase ({} then {})", w[0].start, w[1].start));
            }
        }
        for s in &segments {
            if !s.v_cm.is_finite() || !(s.i_fc >= 0.0) || !s.i_fc.is_finite() {
                return bad(format!("segment at t = {} has invalid v_cm {} or I_fc {}", s.start, s.v_cm, s.i_fc));
            }
        }
        let last = segments[segments.len() - 1].start;
        if !(duration >= last) || !duration.is_finite() {
            return bad(format!("duration {duration} ends before the last segment at {last}"));
        }
        Ok(Self { segments, duration })
    }

    pub fn constant(v_cm: f64, i_fc: f64, duration: f64) -> Result<Self> {
        Self::new(vec![Segment { start: 0.0, v_cm, i_fc }], duration)
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        self.segments.iter().map(|s| s.start).collect()
    }

    fn index_at(&self, t: f64) -> usize {
        self.segments.partition_point(|s| s.start <= t).saturating_sub(1)
    }

    pub fn at(&self, t: f64) -> (PlantInput, Disturbance) {
        let s = self.segments[self.index_at(t)];
        (PlantInput { v_cm: s.v_cm }, Disturbance { i_fc: s.i_fc })
    }

    /// First breakpoint strictly after `t`, or the end of the profile.
    pub fn next_break(&self, t: f64) -> f64 {
        self.segments
            .get(self.index_at(t) + 1)
            .map_or(self.duration, |s| s.start)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ControlSchedule {
    Constant(f64),
    /// `(duration, v_cm)` levels; the last level is held past its end.
    Steps(Vec<(f64, f64)>),
}

/// Current levels `(duration, I_fc)` played back to back, with the motor
/// voltage following `v_cm`.
pub fn staircase_profile(levels: &[(f64, f64)], v_cm: &ControlSchedule) -> Result<Profile> {
    let starts = |steps: &[(f64, f64)], what: &str| -> Result<Vec<(f64, f64)>> {
        let mut t = 0.0;
        let mut out = Vec::with_capacity(steps.len());
        for &(dur, value) in steps {
            if !(dur > 0.0) {
                return Err(Error::validation(what, format!("level durations must be positive, got {dur}")));
            }
            out.push((t, value));
            t += dur;
        }
        Ok(out)
    };
    if levels.is_empty() {
        return Err(Error::validation("profile", "at least one current level is required"));
    }
    let current = starts(levels, "profile.levels")?;
    let duration: f64 = levels.iter().map(|l| l.0).sum();
    let voltage = match v_cm {
        ControlSchedule::Constant(v) => vec![(0.0, *v)],
        ControlSchedule::Steps(s) if s.is_empty() => {
            return Err(Error::validation("profile.v_cm", "at least one voltage level is required"))
        }
        ControlSchedule::Steps(s) => starts(s, "profile.v_cm")?,
    };
    let mut times: Vec<f64> = current
        .iter()
        .chain(&voltage)
        .map(|p| p.0)
        .filter(|&t| t < duration)
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let value_at = |steps: &[(f64, f64)], t: f64| steps[steps.partition_point(|s| s.0 <= t) - 1].1;
    let segments = times
        .into_iter()
        .map(|t| Segment { start: t, v_cm: value_at(&voltage, t), i_fc: value_at(&current, t) })
        .collect();
    Profile::new(segments, duration)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_level_is_constant() {
        let p = staircase_profile(&[(5.0, 3.0)], &ControlSchedule::Constant(6.0)).unwrap();
        assert_eq!(p, Profile::constant(6.0, 3.0, 5.0).unwrap());
        assert_eq!(p.at(0.0).1.i_fc, 3.0);
        assert_eq!(p.at(5.0).1.i_fc, 3.0);
    }

    #[test]
    fn fifteen_unit_steps() {
        let levels: Vec<_> = (1..=15).map(|i| (2.0, i as f64)).collect();
        let p = staircase_profile(&levels, &ControlSchedule::Constant(6.0)).unwrap();
        assert_eq!(p.breakpoints().len(), 15);
        assert_eq!(p.duration(), 30.0);
        assert_eq!(p.next_break(0.0), 2.0);
        assert_eq!(p.next_break(29.0), 30.0);
    }

    #[test]
    fn right_continuous_at_breakpoints() {
        let p = staircase_profile(&[(1.0, 0.0), (1.0, 4.0), (1.0, 8.0)], &ControlSchedule::Constant(5.0)).unwrap();
        // Query oracle: the value at a breakpoint equals the limit from the right.
        for b in p.breakpoints() {
            assert_eq!(p.at(b), p.at(b + 1e-9));
            if b > 0.0 {
                assert_ne!(p.at(b).1, p.at(b - 1e-9).1);
            }
        }
        assert_eq!(p.at(1.0).1.i_fc, 4.0);
        assert_eq!(p.at(0.999_999).1.i_fc, 0.0);
    }

    #[test]
    fn voltage_steps_merge_with_current_steps() {
        let p = staircase_profile(
            &[(2.0, 1.0), (2.0, 2.0)],
            &ControlSchedule::Steps(vec![(1.0, 5.0), (10.0, 7.0)]),
        )
        .unwrap();
        assert_eq!(p.breakpoints(), vec![0.0, 1.0, 2.0]);
        assert_eq!(p.at(1.5).0.v_cm, 7.0);
        assert_eq!(p.at(3.0), (PlantInput { v_cm: 7.0 }, Disturbance { i_fc: 2.0 }));
    }

    #[test]
    fn invalid_profiles() {
        assert!(staircase_profile(&[(0.0, 1.0)], &ControlSchedule::Constant(5.0)).is_err());
        assert!(staircase_profile(&[], &ControlSchedule::Constant(5.0)).is_err());
        assert!(staircase_profile(&[(1.0, -1.0)], &ControlSchedule::Constant(5.0)).is_err());
        assert!(Profile::constant(1.0, 1.0, -1.0).is_err());
        assert!(Profile::constant(1.0, 1.0, 0.0).is_ok());
    }
}
