//! Declarative experiments: polarization curves, sweeps over air flow,
//! cathode pressure or stack temperature, and load transients.
//!
//! A scenario file uses the parameter grammar. `experiment.*` keys describe
//! the run, every other key overrides the parameter set for this run only:
//!
//! ```text
//! experiment.kind = pressure_sweep
//! experiment.mode = static
//! experiment.current_range = 1, 15, 1 [A]
//! experiment.values = 0.5, 1.0, 1.5 [bar]
//! experiment.output = pressure
//! conditions.t_st = 60 [C]
//! ```

mod output;
mod scenario;

pub use output::{csv_header, emit_csv, emit_plot_script, emit_trajectory_csv, TRAJECTORY_HEADER};
pub use scenario::{load_scenario, EXPERIMENT_KEYS};

use rayon::prelude::*;

use crate::electrochem::{cell_voltage, VoltageBreakdown};
use crate::error::{Error, Result};
use crate::params::units::pa_to_atm;
use crate::params::ParameterSet;
use crate::plant::{DerivedQuantities, Disturbance, Plant, PlantInput, PlantState};
use crate::sim::{
    find_steady_state, integrate, staircase_profile, ControlSchedule, IntegratorConfig, StateScale,
    SteadyStateOptions, Trajectory,
};

macro_rules! named_enum {
    ($(#[$m:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq)]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const NAMES: &'static [&'static str] = &[$($text),+];

            pub fn name(&self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }

            pub fn from_name(s: &str) -> Option<Self> {
                match s { $($text => Some($name::$variant),)+ _ => None }
            }
        }
    };
}

named_enum!(ExperimentKind {
    Polarization => "polarization",
    FlowSweep => "flow_sweep",
    PressureSweep => "pressure_sweep",
    TemperatureSweep => "temperature_sweep",
    Transient => "transient",
});

named_enum!(
    /// `Static` evaluates the voltage model at the configured pressures;
    /// `Dynamic` takes the cathode oxygen pressure from the plant equilibrium.
    Mode {
        Static => "static",
        Dynamic => "dynamic",
    }
);

/// One swept level: `value` in the unit it was written in, `si` in Pa, K or
/// kg/s.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepValue {
    pub value: f64,
    pub unit: String,
    pub si: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub mode: Mode,
    /// Stack currents [A], ascending.
    pub currents: Vec<f64>,
    /// Swept levels, ascending; empty for polarization and transient runs.
    pub swept: Vec<SweepValue>,
    /// Parameters with the scenario's fixed overrides applied.
    pub params: ParameterSet,
    /// Compressor motor voltage held during dynamic runs [V].
    pub v_cm: f64,
    /// Base name of the output files.
    pub output: String,
    /// Largest pointwise voltage spread accepted across a flow sweep [V].
    pub marginality: f64,
    /// Time spent on each current level of a transient [s].
    pub dwell: f64,
    pub integrator: IntegratorConfig,
    pub steady: SteadyStateOptions,
    /// Relative tolerance on the compressor flow when matching a flow target.
    pub flow_tol: f64,
}

/// Outcome of a dynamic-mode point, written as `converged_flag`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointStatus {
    NotConverged,
    Converged,
    /// Converged, but the flow or a pressure left the plausible envelope.
    OutOfEnvelope,
}

impl PointStatus {
    pub fn code(&self) -> u8 {
        match self {
            PointStatus::NotConverged => 0,
            PointStatus::Converged => 1,
            PointStatus::OutOfEnvelope => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicPoint {
    pub x: PlantState,
    pub q: DerivedQuantities,
    pub v_cm: f64,
    pub status: PointStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolarizationRecord {
    pub sweep: Option<SweepValue>,
    pub i_fc: f64,
    pub v: VoltageBreakdown,
    pub dynamic: Option<DynamicPoint>,
}

/// One polarization curve; `notes` collects per-point failures.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub sweep: Option<SweepValue>,
    pub records: Vec<PolarizationRecord>,
    pub notes: Vec<String>,
}

pub const ENVELOPE_W_CP: (f64, f64) = (0.0, 0.1);
pub const ENVELOPE_PRESSURE: (f64, f64) = (0.3e5, 3e5);

fn within_envelope(x: &PlantState, q: &DerivedQuantities) -> bool {
    let (lo, hi) = ENVELOPE_PRESSURE;
    (ENVELOPE_W_CP.0..=ENVELOPE_W_CP.1).contains(&q.w_cp)
        && [x.p_sm, x.p_rm, q.p_ca].iter().all(|p| (lo..=hi).contains(p))
}

/// Parameters for one swept level.
pub fn params_for(spec: &ExperimentSpec, sweep: Option<&SweepValue>) -> Result<ParameterSet> {
    let mut p = spec.params;
    if let Some(s) = sweep {
        match spec.kind {
            ExperimentKind::PressureSweep => p.conditions.p_o2_polarization = s.si,
            ExperimentKind::TemperatureSweep => p.conditions.t_st = s.si,
            _ => {}
        }
    }
    p.validate()?;
    Ok(p)
}

fn static_point(p: &ParameterSet, i_fc: f64) -> Result<VoltageBreakdown> {
    let c = &p.conditions;
    cell_voltage(
        &p.electrochem,
        &p.constants,
        c.t_st,
        pa_to_atm(c.p_h2),
        pa_to_atm(c.p_o2_polarization),
        i_fc,
    )
}

struct Solver<'a> {
    plant: Plant,
    scale: StateScale,
    opts: &'a SteadyStateOptions,
}

impl Solver<'_> {
    fn solve(&self, guess: &PlantState, v_cm: f64, i_fc: f64) -> Result<(PlantState, DerivedQuantities, bool)> {
        let r = find_steady_state(
            &self.plant,
            guess,
            PlantInput { v_cm },
            Disturbance { i_fc },
            &self.scale,
            self.opts,
        )?;
        let (_, q) = self.plant.derivative(&r.x_star, PlantInput { v_cm }, Disturbance { i_fc })?;
        Ok((r.x_star, q, r.converged))
    }

    /// Secant search on `v_cm` so that the equilibrium compressor flow hits
    /// `target` [kg/s]. Returns the last iterate and whether it matched.
    fn match_flow(
        &self,
        guess: &PlantState,
        v_start: f64,
        i_fc: f64,
        target: f64,
        rel_tol: f64,
    ) -> Result<(f64, PlantState, DerivedQuantities, bool)> {
        let (mut x, mut q, ok) = self.solve(guess, v_start, i_fc)?;
        if !ok {
            return Ok((v_start, x, q, false));
        }
        let (mut v0, mut g0) = (v_start, q.w_cp - target);
        let mut v1 = v_start * 1.1 + 0.05;
        for _ in 0..40 {
            let (x1, q1, ok) = self.solve(&x, v1, i_fc)?;
            if !ok {
                return Ok((v1, x1, q1, false));
            }
            (x, q) = (x1, q1);
            let g1 = q.w_cp - target;
            if g1.abs() <= rel_tol * target {
                return Ok((v1, x, q, true));
            }
            if g1 == g0 {
                break;
            }
            let v2 = (v1 - g1 * (v1 - v0) / (g1 - g0)).max(0.0);
            (v0, g0, v1) = (v1, g1, v2);
        }
        Ok((v1, x, q, false))
    }
}

fn dynamic_curve(spec: &ExperimentSpec, p: &ParameterSet, sweep: Option<&SweepValue>) -> Result<Curve> {
    let plant = Plant::new(p, &p.conditions);
    let solver = Solver { scale: StateScale::ambient(&plant), plant, opts: &spec.steady };
    let target = match spec.kind {
        ExperimentKind::FlowSweep => sweep.map(|s| s.si),
        _ => None,
    };
    let mut guess = PlantState::nominal_guess(p, &p.conditions, spec.v_cm);
    let mut v_cm = spec.v_cm;
    let mut records = Vec::with_capacity(spec.currents.len());
    let mut notes = Vec::new();
    for &i_fc in &spec.currents {
        let (v_point, x, q, ok) = match target {
            Some(w) => solver.match_flow(&guess, v_cm, i_fc, w, spec.flow_tol)?,
            None => {
                let (x, q, ok) = solver.solve(&guess, v_cm, i_fc)?;
                (v_cm, x, q, ok)
            }
        };
        let volt = solver.plant.stack_voltage(&q, Disturbance { i_fc });
        let status = match (&volt, ok) {
            (Ok(_), true) if within_envelope(&x, &q) => PointStatus::Converged,
            (Ok(_), true) => PointStatus::OutOfEnvelope,
            _ => PointStatus::NotConverged,
        };
        match status {
            PointStatus::Converged => {
                guess = x;
                v_cm = v_point;
            }
            PointStatus::OutOfEnvelope => notes.push(format!("I = {i_fc} A: equilibrium outside the plausible envelope")),
            PointStatus::NotConverged if target.is_some() => {
                notes.push(format!("I = {i_fc} A: no motor voltage matched the target flow"))
            }
            PointStatus::NotConverged => notes.push(format!("I = {i_fc} A: steady state did not converge")),
        }
        let v = volt.unwrap_or(VoltageBreakdown {
            e_nernst: f64::NAN,
            v_act: f64::NAN,
            v_ohm: f64::NAN,
            v_conc: f64::NAN,
            v_cell: f64::NAN,
            v_stack: f64::NAN,
            activation_clamped: false,
        });
        records.push(PolarizationRecord {
            sweep: sweep.cloned(),
            i_fc,
            v,
            dynamic: Some(DynamicPoint { x, q, v_cm: v_point, status }),
        });
    }
    Ok(Curve { sweep: sweep.cloned(), records, notes })
}

fn curve(spec: &ExperimentSpec, sweep: Option<&SweepValue>) -> Result<Curve> {
    let p = params_for(spec, sweep)?;
    match spec.mode {
        Mode::Static => {
            let records = spec
                .currents
                .iter()
                .map(|&i_fc| {
                    Ok(PolarizationRecord { sweep: sweep.cloned(), i_fc, v: static_point(&p, i_fc)?, dynamic: None })
                })
                .collect::<Result<_>>()?;
            Ok(Curve { sweep: sweep.cloned(), records, notes: Vec::new() })
        }
        Mode::Dynamic => dynamic_curve(spec, &p, sweep),
    }
}

/// One record per current of `spec.currents`, using parameters `p` as they
/// are (no swept value applied).
pub fn run_polarization(spec: &ExperimentSpec, p: &ParameterSet) -> Result<Vec<PolarizationRecord>> {
    let spec = ExperimentSpec { kind: ExperimentKind::Polarization, swept: Vec::new(), params: *p, ..spec.clone() };
    Ok(curve(&spec, None)?.records)
}

/// One curve per swept value, in ascending order of the swept value. A
/// polarization spec yields a single curve.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<Vec<Curve>> {
    match spec.kind {
        ExperimentKind::Transient => Err(Error::validation("experiment.kind", "a transient is not a sweep")),
        ExperimentKind::Polarization => Ok(vec![curve(spec, None)?]),
        _ => spec.swept.par_iter().map(|s| curve(spec, Some(s))).collect(),
    }
}

/// Step through `spec.currents`, `spec.dwell` seconds each, starting from the
/// equilibrium at the first current.
pub fn run_transient(spec: &ExperimentSpec) -> Result<Trajectory> {
    let p = params_for(spec, None)?;
    let plant = Plant::new(&p, &p.conditions);
    let first = spec.currents[0];
    let guess = PlantState::nominal_guess(&p, &p.conditions, spec.v_cm);
    let r = find_steady_state(
        &plant,
        &guess,
        PlantInput { v_cm: spec.v_cm },
        Disturbance { i_fc: first },
        &StateScale::ambient(&plant),
        &spec.steady,
    )?;
    if !r.converged {
        return Err(Error::Convergence {
            message: format!("no equilibrium at the initial current {first} A (residual {:e})", r.residual_norm),
        });
    }
    let levels: Vec<_> = spec.currents.iter().map(|&i| (spec.dwell, i)).collect();
    let profile = staircase_profile(&levels, &ControlSchedule::Constant(spec.v_cm))?;
    integrate(&plant, &r.x_star, &profile, &spec.integrator)
}

/// Largest spread `max - min` of `v_cell` across curves at a shared current.
/// Points that failed in any curve are skipped.
pub fn max_pointwise_spread(curves: &[Curve]) -> f64 {
    let Some(first) = curves.first() else { return 0.0 };
    let mut spread: f64 = 0.0;
    for (k, r) in first.records.iter().enumerate() {
        let vs: Vec<f64> = curves
            .iter()
            .filter_map(|c| c.records.get(k))
            .filter(|s| s.i_fc == r.i_fc && usable(s))
            .map(|s| s.v.v_cell)
            .collect();
        if vs.len() == curves.len() {
            let hi = vs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = vs.iter().copied().fold(f64::INFINITY, f64::min);
            spread = spread.max(hi - lo);
        }
    }
    spread
}

fn usable(r: &PolarizationRecord) -> bool {
    r.v.v_cell.is_finite() && r.dynamic.is_none_or(|d| d.status == PointStatus::Converged)
}

/// True when every curve lies strictly above the previous one at every
/// current.
pub fn strictly_ordered(curves: &[Curve]) -> bool {
    curves.windows(2).all(|w| {
        w[0].records.len() == w[1].records.len()
            && w[0]
                .records
                .iter()
                .zip(&w[1].records)
                .all(|(a, b)| a.i_fc == b.i_fc && b.v.v_cell > a.v.v_cell)
    })
}
