//! Six-state air-supply and cathode dynamics.
//!
//! State `x = [omega_cp, P_sm, m_sm, m_O2, m_N2, P_rm]`, control `u = v_cm`
//! and measured disturbance `d = I_fc`. The right-hand side has the form
//! `f(x) + g * u + phi * d` with constant `g` and `phi`.

mod maps;

pub use maps::{compressor_flow, load_torque, return_manifold_outflow};

use crate::electrochem::{cell_voltage, VoltageBreakdown};
use crate::error::{Error, Result};
use crate::params::units::pa_to_atm;
use crate::params::{
    AuxiliaryParams, DerivedConstants, OperatingConditions, ParameterSet, PartialPressureForm,
    PhysicalConstants,
};

pub const N_STATES: usize = 6;

pub const STATE_NAMES: [&str; N_STATES] = ["omega_cp", "p_sm", "m_sm", "m_o2", "m_n2", "p_rm"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantState {
    /// Compressor rotor speed [rad/s].
    pub omega_cp: f64,
    /// Supply manifold pressure [Pa].
    pub p_sm: f64,
    /// Supply manifold air mass [kg].
    pub m_sm: f64,
    /// Cathode oxygen and nitrogen masses [kg].
    pub m_o2: f64,
    pub m_n2: f64,
    /// Return manifold pressure [Pa].
    pub p_rm: f64,
}

impl PlantState {
    pub fn to_array(&self) -> [f64; N_STATES] {
        [self.omega_cp, self.p_sm, self.m_sm, self.m_o2, self.m_n2, self.p_rm]
    }

    pub fn from_array(x: [f64; N_STATES]) -> Self {
        Self {
            omega_cp: x[0],
            p_sm: x[1],
            m_sm: x[2],
            m_o2: x[3],
            m_n2: x[4],
            p_rm: x[5],
        }
    }

    /// Checks the physical invariants: finite values, non-negative speed,
    /// positive masses and pressures.
    pub fn check(&self) -> Result<()> {
        let x = self.to_array();
        for (name, v) in STATE_NAMES.iter().zip(x) {
            if !v.is_finite() {
                return Err(Error::domain("state", format!("{name} is not finite ({v})")));
            }
        }
        if self.omega_cp < 0.0 {
            return Err(Error::domain("state", format!("omega_cp = {} is negative", self.omega_cp)));
        }
        for (name, v) in STATE_NAMES.iter().zip(x).skip(1) {
            if v <= 0.0 {
                return Err(Error::domain("state", format!("{name} = {v} must be positive")));
            }
        }
        Ok(())
    }

    /// Rotor at rest and every volume at ambient pressure, the cathode gas
    /// split in ambient proportions. A starting guess, not an equilibrium:
    /// the compressor map delivers a small flow even at zero speed.
    pub fn ambient(p: &ParameterSet, oc: &OperatingConditions) -> Self {
        let dc = p.derived(oc);
        let c = &p.constants;
        let m_sm = c.p_atm * p.aux.v_sm * dc.m_a_atm / (c.r_univ * oc.t_atm);
        let dry = (c.p_atm - dc.p_v_ca).max(0.0);
        Self {
            omega_cp: 0.0,
            p_sm: c.p_atm,
            m_sm,
            m_o2: c.x_o2 * dry / dc.c2,
            m_n2: (1.0 - c.x_o2) * dry / dc.c1,
            p_rm: c.p_atm,
        }
    }

    /// A rough starting point for the steady-state solver at motor voltage
    /// `v_cm`: rotor at the no-load speed, pressures a little above ambient.
    pub fn nominal_guess(p: &ParameterSet, oc: &OperatingConditions, v_cm: f64) -> Self {
        let mut x = Self::ambient(p, oc);
        let c = &p.constants;
        x.omega_cp = (v_cm / p.aux.k_v).max(0.0);
        x.p_sm = c.p_atm * 1.05;
        x.m_sm = x.p_sm * p.aux.v_sm * p.derived(oc).m_a_atm / (c.r_univ * oc.t_st);
        x.p_rm = c.p_atm * 1.02;
        x
    }
}

/// Compressor motor voltage [V].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantInput {
    pub v_cm: f64,
}

/// Stack current [A].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Disturbance {
    pub i_fc: f64,
}

/// Saturations and sign conditions met while evaluating the right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PlantFlags {
    /// Compressor map returned a negative flow and was clamped to zero.
    pub compressor_clamped: bool,
    /// Return-manifold outlet map was negative and clamped to zero.
    pub outlet_clamped: bool,
    /// Supply manifold nozzle flow reversed (cathode above manifold).
    pub supply_reversed: bool,
    /// Cathode nozzle flow reversed (return manifold above cathode).
    pub cathode_reversed: bool,
    /// Rotor held at rest because the net torque pushed it below zero speed.
    pub rotor_stopped: bool,
}

impl PlantFlags {
    pub fn any(&self) -> bool {
        self.compressor_clamped
            || self.outlet_clamped
            || self.supply_reversed
            || self.cathode_reversed
            || self.rotor_stopped
    }
}

/// Every intermediate quantity of one right-hand side evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DerivedQuantities {
    pub tau_cm: f64,
    pub tau_cp: f64,
    pub w_cp: f64,
    pub t_cp: f64,
    pub t_sm: f64,
    pub w_sm_out: f64,
    pub p_ca: f64,
    pub p_o2: f64,
    pub p_n2: f64,
    pub p_v_ca: f64,
    pub w_o2_in: f64,
    pub w_n2_in: f64,
    pub w_o2_out: f64,
    pub w_n2_out: f64,
    pub w_o2_reacted: f64,
    pub w_ca_out: f64,
    pub w_rm_out: f64,
    pub m_ca: f64,
    pub flags: PlantFlags,
}

pub fn motor_torque(v_cm: f64, omega_cp: f64, aux: &AuxiliaryParams) -> f64 {
    aux.eta_cm * aux.k_t / aux.r_cm * (v_cm - aux.k_v * omega_cp)
}

/// Temperature of the air leaving the compressor [K].
pub fn compressor_exit_temperature(
    p_sm: f64,
    c: &PhysicalConstants,
    aux: &AuxiliaryParams,
    t_atm: f64,
) -> Result<f64> {
    let ratio = p_sm / c.p_atm;
    if !(ratio > 0.0) {
        return Err(Error::domain(
            "compressor_exit_temperature",
            format!("pressure ratio must be positive, got {ratio}"),
        ));
    }
    let k = (c.gamma - 1.0) / c.gamma;
    Ok(t_atm + t_atm / aux.eta_cp * (ratio.powf(k) - 1.0))
}

/// Supply manifold gas temperature from the ideal gas law [K].
pub fn supply_manifold_temperature(
    p_sm: f64,
    m_sm: f64,
    p: &ParameterSet,
    dc: &DerivedConstants,
) -> Result<f64> {
    if !(m_sm > p.model.mass_floor) {
        return Err(Error::domain(
            "supply_manifold_temperature",
            format!("m_sm = {m_sm} kg is below the floor {}", p.model.mass_floor),
        ));
    }
    Ok(p_sm * p.aux.v_sm * dc.m_a_atm / (p.constants.r_univ * m_sm))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CathodePressure {
    pub p_ca: f64,
    pub p_o2: f64,
    pub p_n2: f64,
}

/// Dalton's law for the cathode. `SpecificGas` uses `P_i = c_i * m_i`;
/// `MolarDivided` additionally divides each mass by its molar mass.
pub fn cathode_pressure(
    m_o2: f64,
    m_n2: f64,
    p_v_ca: f64,
    dc: &DerivedConstants,
    form: PartialPressureForm,
    c: &PhysicalConstants,
) -> CathodePressure {
    let (p_o2, p_n2) = match form {
        PartialPressureForm::SpecificGas => (dc.c2 * m_o2, dc.c1 * m_n2),
        PartialPressureForm::MolarDivided => (dc.c2 * m_o2 / c.m_o2, dc.c1 * m_n2 / c.m_n2),
    };
    CathodePressure { p_ca: p_v_ca + p_o2 + p_n2, p_o2, p_n2 }
}

/// Oxygen and nitrogen inlet flows `(W_O2_in, W_N2_in)` for a humid supply
/// flow `w_sm_out`.
pub fn flow_splits(w_sm_out: f64, dc: &DerivedConstants) -> (f64, f64) {
    let dry = w_sm_out / (1.0 + dc.omega_atm);
    (dc.y_o2 * dry, dc.y_n2 * dry)
}

/// `(W_ca_out, W_O2_out, W_N2_out)` through the cathode outlet nozzle.
pub fn cathode_outflows(
    m_o2: f64,
    m_n2: f64,
    p_ca: f64,
    p_rm: f64,
    dc: &DerivedConstants,
    aux: &AuxiliaryParams,
) -> (f64, f64, f64) {
    let w = aux.k_ca_out * (p_ca - p_rm);
    let m_ca = m_o2 + m_n2 + dc.c3;
    (w, m_o2 / m_ca * w, m_n2 / m_ca * w)
}

pub fn oxygen_reacted(i_fc: f64, n_cells: u32, c: &PhysicalConstants) -> f64 {
    c.m_o2 * n_cells as f64 * i_fc / (4.0 * c.faraday)
}

/// The plant model bound to one parameter set and operating point.
#[derive(Debug, Clone)]
pub struct Plant {
    pub params: ParameterSet,
    pub conditions: OperatingConditions,
    pub derived: DerivedConstants,
}

impl Plant {
    pub fn new(params: &ParameterSet, conditions: &OperatingConditions) -> Self {
        Self {
            params: *params,
            conditions: *conditions,
            derived: params.derived(conditions),
        }
    }

    /// Uses the operating conditions stored in the parameter set.
    pub fn from_params(params: &ParameterSet) -> Self {
        Self::new(params, &params.conditions)
    }

    /// Input gain `g`: `d(dx/dt)/du`.
    pub fn input_gain(&self) -> [f64; N_STATES] {
        let a = &self.params.aux;
        [a.eta_cm * a.k_t / (a.j_cp * a.r_cm), 0.0, 0.0, 0.0, 0.0, 0.0]
    }

    /// Disturbance gain `phi`: `d(dx/dt)/dd`.
    pub fn disturbance_gain(&self) -> [f64; N_STATES] {
        let c = &self.params.constants;
        let n = self.params.electrochem.n_cells as f64;
        [0.0, 0.0, 0.0, -n * c.m_o2 / (4.0 * c.faraday), 0.0, 0.0]
    }

    pub fn derivative(
        &self,
        x: &PlantState,
        u: PlantInput,
        d: Disturbance,
    ) -> Result<([f64; N_STATES], DerivedQuantities)> {
        x.check()?;
        if !u.v_cm.is_finite() {
            return Err(Error::domain("input", format!("v_cm is not finite ({})", u.v_cm)));
        }
        if !(d.i_fc >= 0.0) || !d.i_fc.is_finite() {
            return Err(Error::domain("disturbance", format!("I_fc must be finite and >= 0, got {}", d.i_fc)));
        }
        let p = &self.params;
        let c = &p.constants;
        let aux = &p.aux;
        let dc = &self.derived;
        let oc = &self.conditions;
        let mut flags = PlantFlags::default();

        let tau_cm = motor_torque(u.v_cm, x.omega_cp, aux);
        let tau_cp = load_torque(x.omega_cp, x.p_sm, &p.maps);
        let mut d_omega = (tau_cm - tau_cp) / aux.j_cp;
        if x.omega_cp <= 0.0 && d_omega < 0.0 {
            d_omega = 0.0;
            flags.rotor_stopped = true;
        }

        let (w_cp, clamped) = compressor_flow(x.omega_cp, x.p_sm, &p.maps);
        flags.compressor_clamped = clamped;
        let t_cp = compressor_exit_temperature(x.p_sm, c, aux, oc.t_atm)?;
        let t_sm = supply_manifold_temperature(x.p_sm, x.m_sm, p, dc)?;

        let cp = cathode_pressure(x.m_o2, x.m_n2, dc.p_v_ca, dc, p.model.partial_pressure, c);
        let w_sm_out = aux.k_sm_out * (x.p_sm - cp.p_ca);
        flags.supply_reversed = w_sm_out < 0.0;
        let (w_o2_in, w_n2_in) = flow_splits(w_sm_out, dc);
        let (w_ca_out, w_o2_out, w_n2_out) =
            cathode_outflows(x.m_o2, x.m_n2, cp.p_ca, x.p_rm, dc, aux);
        flags.cathode_reversed = w_ca_out < 0.0;
        let w_o2_reacted = oxygen_reacted(d.i_fc, p.electrochem.n_cells, c);
        let (w_rm_out, clamped) = return_manifold_outflow(x.p_rm, &p.maps);
        flags.outlet_clamped = clamped;

        let rates = [
            d_omega,
            c.gamma * c.r_univ / (dc.m_a_atm * aux.v_sm) * (w_cp * t_cp - w_sm_out * t_sm),
            w_cp - w_sm_out,
            w_o2_in - w_o2_out - w_o2_reacted,
            w_n2_in - w_n2_out,
            c.r_air * oc.t_st / aux.v_rm * (w_ca_out - w_rm_out),
        ];
        let q = DerivedQuantities {
            tau_cm,
            tau_cp,
            w_cp,
            t_cp,
            t_sm,
            w_sm_out,
            p_ca: cp.p_ca,
            p_o2: cp.p_o2,
            p_n2: cp.p_n2,
            p_v_ca: dc.p_v_ca,
            w_o2_in,
            w_n2_in,
            w_o2_out,
            w_n2_out,
            w_o2_reacted,
            w_ca_out,
            w_rm_out,
            m_ca: x.m_o2 + x.m_n2 + dc.c3,
            flags,
        };
        Ok((rates, q))
    }

    /// Stack voltage with the oxygen partial pressure taken from the cathode
    /// state and hydrogen at the configured anode pressure.
    pub fn stack_voltage(&self, q: &DerivedQuantities, d: Disturbance) -> Result<VoltageBreakdown> {
        let oc = &self.conditions;
        cell_voltage(
            &self.params.electrochem,
            &self.params.constants,
            oc.t_st,
            pa_to_atm(oc.p_h2),
            pa_to_atm(q.p_o2),
            d.i_fc,
        )
    }

    /// Array form of [`Plant::derivative`], convenient for integrators.
    pub fn rhs(&self, x: &[f64; N_STATES], u: f64, d: f64) -> Result<[f64; N_STATES]> {
        self.derivative(&PlantState::from_array(*x), PlantInput { v_cm: u }, Disturbance { i_fc: d })
            .map(|(r, _)| r)
    }
}

/// Free-function form of [`Plant::derivative`].
pub fn state_derivative(
    x: &PlantState,
    u: PlantInput,
    d: Disturbance,
    p: &ParameterSet,
    oc: &OperatingConditions,
) -> Result<([f64; N_STATES], DerivedQuantities)> {
    Plant::new(p, oc).derivative(x, u, d)
}
