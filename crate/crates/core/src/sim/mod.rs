//! Time integration of the plant and steady-state search.

mod rk;
mod schedule;
mod steady;

pub use rk::{dopri_step, rk4_step, DopriStep};
pub use schedule::{staircase_profile, ControlSchedule, Profile, Segment};
pub use steady::{find_steady_state, SteadyStateOptions, SteadyStateResult};

use crate::electrochem::VoltageBreakdown;
use crate::error::{Error, Result};
use crate::plant::{DerivedQuantities, Disturbance, Plant, PlantInput, PlantState, N_STATES};

/// Nominal rotor speed used to scale the speed state [rad/s].
pub const OMEGA_NOMINAL: f64 = 100.0;

/// Per-component magnitudes used to make norms and tolerances unit-free.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateScale(pub [f64; N_STATES]);

impl StateScale {
    /// The ambient state, with [`OMEGA_NOMINAL`] for the rotor.
    pub fn ambient(plant: &Plant) -> Self {
        let mut s = PlantState::ambient(&plant.params, &plant.conditions).to_array();
        s[0] = OMEGA_NOMINAL;
        Self(s)
    }

    /// `max_i |r_i| / scale_i`.
    pub fn norm(&self, r: &[f64; N_STATES]) -> f64 {
        r.iter().zip(self.0).map(|(v, s)| (v / s).abs()).fold(0.0, f64::max)
    }
}

/// Largest per-component relative difference `|a_i - b_i| / |b_i|`.
pub fn max_relative_difference(a: &PlantState, b: &PlantState) -> f64 {
    a.to_array()
        .iter()
        .zip(b.to_array())
        .map(|(x, y)| if x == &y { 0.0 } else { (x - y).abs() / y.abs() })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Rk4 { dt: f64 },
    /// Dormand-Prince 5(4). `abs_tol` is relative to the state scale.
    Rk45 { dt_min: f64, dt_max: f64, rel_tol: f64, abs_tol: f64 },
}

impl Method {
    pub const NAMES: &'static [&'static str] = &["rk4", "rk45"];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Rk4 { .. } => "rk4",
            Method::Rk45 { .. } => "rk45",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub method: Method,
    /// Keep every n-th accepted step; the first and last samples are always kept.
    pub record_stride: usize,
    /// Abort when any component exceeds this multiple of its scale.
    pub blowup_factor: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: Method::Rk45 { dt_min: 1e-12, dt_max: 0.5, rel_tol: 1e-6, abs_tol: 1e-9 },
            record_stride: 1,
            blowup_factor: 1e3,
            max_steps: 50_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn rk4(dt: f64) -> Self {
        Self { method: Method::Rk4 { dt }, ..Self::default() }
    }

    pub fn rk45(rel_tol: f64, abs_tol: f64) -> Self {
        let mut cfg = Self::default();
        if let Method::Rk45 { dt_min, dt_max, .. } = cfg.method {
            cfg.method = Method::Rk45 { dt_min, dt_max, rel_tol, abs_tol };
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::validation(key, format!("must be positive and finite, got {v}")))
            }
        };
        match self.method {
            Method::Rk4 { dt } => positive("integrator.dt", dt)?,
            Method::Rk45 { dt_min, dt_max, rel_tol, abs_tol } => {
                positive("integrator.dt_min", dt_min)?;
                positive("integrator.dt_max", dt_max)?;
                positive("integrator.rel_tol", rel_tol)?;
                positive("integrator.abs_tol", abs_tol)?;
                if dt_min > dt_max {
                    return Err(Error::validation("integrator.dt_min", "must not exceed dt_max"));
                }
            }
        }
        if self.record_stride == 0 {
            return Err(Error::validation("integrator.record_stride", "must be at least 1"));
        }
        positive("integrator.blowup_factor", self.blowup_factor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x: PlantState,
    pub u: PlantInput,
    pub d: Disturbance,
    pub q: DerivedQuantities,
    pub v: VoltageBreakdown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl Trajectory {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory always holds the initial sample")
    }
}

fn sample(plant: &Plant, t: f64, x: [f64; N_STATES], u: PlantInput, d: Disturbance) -> Result<Sample> {
    let x = PlantState::from_array(x);
    let (_, q) = plant.derivative(&x, u, d)?;
    let v = plant.stack_voltage(&q, d)?;
    Ok(Sample { t, x, u, d, q, v })
}

/// Rotor speed cannot go negative; stage states are projected before the
/// right-hand side sees them.
fn project(mut x: [f64; N_STATES]) -> [f64; N_STATES] {
    if x[0] < 0.0 {
        x[0] = 0.0;
    }
    x
}

struct Recorder<'a> {
    plant: &'a Plant,
    profile: &'a Profile,
    stride: usize,
    count: usize,
    samples: Vec<Sample>,
}

impl Recorder<'_> {
    // Inputs are logged right-continuously: a sample on a breakpoint shows
    // the level that starts there.
    fn push(&mut self, t: f64, x: [f64; N_STATES]) -> Result<()> {
        self.count += 1;
        if self.count.is_multiple_of(self.stride) {
            let (u, d) = self.profile.at(t);
            self.samples.push(sample(self.plant, t, x, u, d)?);
        }
        Ok(())
    }
}

/// Integrate from `x0` over the whole profile. Inputs are held constant
/// within each profile segment and steps never straddle a segment boundary.
pub fn integrate(
    plant: &Plant,
    x0: &PlantState,
    profile: &Profile,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    x0.check()?;
    let scale = StateScale::ambient(plant);
    let (u0, d0) = profile.at(0.0);
    let mut rec = Recorder {
        plant,
        profile,
        stride: cfg.record_stride,
        count: 0,
        samples: vec![sample(plant, 0.0, x0.to_array(), u0, d0)?],
    };
    let mut x = x0.to_array();
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    let mut last_recorded = true;

    let check_bounds = |t: f64, x: &[f64; N_STATES]| -> Result<()> {
        for (i, (v, s)) in x.iter().zip(scale.0).enumerate() {
            if !v.is_finite() || v.abs() > cfg.blowup_factor * s {
                return Err(Error::Integration {
                    t,
                    message: format!("state {} blew up ({v})", crate::plant::STATE_NAMES[i]),
                });
            }
        }
        Ok(())
    };

    let segments = profile.segments();
    for (k, seg) in segments.iter().enumerate() {
        let start = seg.start;
        let end = segments.get(k + 1).map_or(profile.duration(), |s| s.start);
        if end <= start {
            continue;
        }
        let u = PlantInput { v_cm: seg.v_cm };
        let d = Disturbance { i_fc: seg.i_fc };
        let f = |y: &[f64; N_STATES]| plant.rhs(&project(*y), u.v_cm, d.i_fc);
        match cfg.method {
            Method::Rk4 { dt } => {
                let len = end - start;
                let n = ((len / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
                let h = len / n as f64;
                for i in 1..=n {
                    let t = if i == n { end } else { start + i as f64 * h };
                    x = project(rk4_step(&x, h, f).map_err(|e| Error::Integration {
                        t,
                        message: e.to_string(),
                    })?);
                    check_bounds(t, &x)?;
                    accepted += 1;
                    if accepted > cfg.max_steps {
                        return Err(Error::Integration { t, message: "step limit reached".into() });
                    }
                    rec.push(t, x)?;
                    last_recorded = rec.count.is_multiple_of(rec.stride);
                }
            }
            Method::Rk45 { dt_min, dt_max, rel_tol, abs_tol } => {
                let mut t = start;
                let mut h = dt_max.min(1e-4).min(end - start);
                let mut k1 = f(&x)?;
                // Previous accepted error for the proportional-integral controller.
                let mut err_prev: f64 = 1e-4;
                while t < end {
                    let remaining = end - t;
                    let landing = h >= remaining * (1.0 - 1e-12);
                    let step = if landing { remaining } else { h };
                    let trial = dopri_step(&x, &k1, step, f);
                    let (err, s) = match trial {
                        Ok(s) => {
                            let e = s
                                .err
                                .iter()
                                .zip(x.iter().zip(s.x.iter()))
                                .zip(scale.0)
                                .map(|((e, (a, b)), sc)| e.abs() / (abs_tol * sc + rel_tol * a.abs().max(b.abs())))
                                .fold(0.0, f64::max);
                            (e, Some(s))
                        }
                        Err(_) => (f64::INFINITY, None),
                    };
                    match s {
                        Some(s) if err <= 1.0 => {
                            t = if landing { end } else { t + step };
                            let projected = project(s.x);
                            k1 = if projected == s.x { s.k_end } else { f(&projected)? };
                            x = projected;
                            check_bounds(t, &x)?;
                            accepted += 1;
                            if accepted > cfg.max_steps {
                                return Err(Error::Integration { t, message: "step limit reached".into() });
                            }
                            rec.push(t, x)?;
                            last_recorded = rec.count.is_multiple_of(rec.stride);
                            let e = err.max(1e-10);
                            let grow = (0.9 * e.powf(-0.17) * err_prev.powf(0.04)).clamp(0.2, 5.0);
                            err_prev = e;
                            h = (step * grow).min(dt_max);
                        }
                        _ => {
                            rejected += 1;
                            let shrink = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.9) } else { 0.25 };
                            h = step * shrink;
                            if h < dt_min {
                                return Err(Error::Integration {
                                    t,
                                    message: format!("step size {h:e} fell below dt_min {dt_min:e}"),
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    if !last_recorded {
        let t = profile.duration();
        let (u, d) = profile.at(t);
        rec.samples.push(sample(plant, t, x, u, d)?);
    }
    Ok(Trajectory { samples: rec.samples, accepted_steps: accepted, rejected_steps: rejected })
}
