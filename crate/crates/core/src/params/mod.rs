//! Model constants, tunable parameters and operating conditions.
//!
//! A [`ParameterSet`] bundles every number the plant and the voltage model
//! consume. Defaults reproduce the published auxiliary-component and physical
//! tables; the electrochemical fit values are a local calibration (see
//! [`crate::calibration`]). All quantities are strict SI internally.

mod config;
pub mod units;

pub use config::{
    dump_defaults, find_key, load_parameters, parse_entries, parse_override, serialize, Entry,
    KeyInfo, KeyKind, KEYS,
};

use crate::error::{Error, Result};

/// Physical constants of air, water vapor and the electrochemical reaction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Ambient pressure [Pa].
    pub p_atm: f64,
    /// Ambient relative humidity [-].
    pub phi_atm: f64,
    /// Water saturation pressure at ambient temperature [Pa].
    pub p_sat_atm: f64,
    /// Ratio of specific heats of air [-].
    pub gamma: f64,
    /// Specific heat of air [J/kg/K]. Carried for completeness; no equation uses it.
    pub cp_air: f64,
    /// Specific gas constants [J/kg/K].
    pub r_air: f64,
    pub r_o2: f64,
    pub r_n2: f64,
    pub r_v: f64,
    /// Universal gas constant [J/mol/K].
    pub r_univ: f64,
    /// Faraday constant [C/mol].
    pub faraday: f64,
    /// Molar masses [kg/mol]. `m_air` is humid air and only enters the
    /// vapor/air ratio of the humidity ratio.
    pub m_air: f64,
    pub m_o2: f64,
    pub m_n2: f64,
    pub m_v: f64,
    /// Oxygen mole fraction in dry air [-].
    pub x_o2: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            p_atm: 101_325.0,
            phi_atm: 0.5,
            p_sat_atm: 3140.4,
            gamma: 1.4,
            cp_air: 1004.0,
            r_air: 286.9,
            r_o2: 259.8,
            r_n2: 296.8,
            r_v: 461.5,
            r_univ: 8.314,
            faraday: 96_485.0,
            m_air: 28.97e-3,
            m_o2: 32e-3,
            m_n2: 28e-3,
            m_v: 18.02e-3,
            x_o2: 0.21,
        }
    }
}

/// Compressor motor, manifold and nozzle parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxiliaryParams {
    /// Motor torque constant [N*m/A].
    pub k_t: f64,
    /// Motor winding resistance [ohm].
    pub r_cm: f64,
    /// Motor back-EMF constant [V*s/rad].
    pub k_v: f64,
    pub eta_cp: f64,
    pub eta_cm: f64,
    /// Compressor and motor inertia [kg*m^2].
    pub j_cp: f64,
    /// Supply manifold, cathode and return manifold volumes [m^3].
    pub v_sm: f64,
    pub v_ca: f64,
    pub v_rm: f64,
    /// Linearized nozzle constants [kg/s/Pa].
    pub k_sm_out: f64,
    pub k_ca_out: f64,
    /// Oxygen mole fraction at the cathode inlet [-]. Stored, not used: the
    /// inlet split works with mass fractions derived from `x_o2`.
    pub y_o2_in: f64,
    /// Compressor diameter [m]. Stored, not used.
    pub d_c: f64,
}

impl Default for AuxiliaryParams {
    fn default() -> Self {
        Self {
            k_t: 0.0153,
            r_cm: 0.82,
            k_v: 0.0153,
            eta_cp: 0.8,
            eta_cm: 0.98,
            j_cp: 5e-5,
            v_sm: 0.02,
            v_ca: 0.005,
            v_rm: 0.005,
            k_sm_out: 0.3629e-5,
            k_ca_out: 0.2177e-5,
            y_o2_in: 0.21,
            d_c: 0.2286,
        }
    }
}

/// Stack voltage model parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElectrochemParams {
    pub n_cells: u32,
    /// Gibbs free energy magnitude of the reaction [J/mol].
    pub delta_g: f64,
    /// Electrons transferred per reaction [-].
    pub n_e: f64,
    /// Charge transfer coefficient [-].
    pub alpha_ct: f64,
    /// Exchange current density [A/cm^2].
    pub i0: f64,
    /// Effective cell area [cm^2].
    pub a_eff: f64,
    /// Area-specific resistance [ohm*cm^2].
    pub r_ohm: f64,
    /// Mass-transfer loss amplitude [V] and exponent coefficient [1/A].
    pub m_mt: f64,
    pub n_mt: f64,
}

impl ElectrochemParams {
    /// Total ohmic resistance of one cell [ohm].
    pub fn ohmic_resistance(&self) -> f64 {
        self.r_ohm / self.a_eff
    }
}

impl Default for ElectrochemParams {
    fn default() -> Self {
        // alpha_ct, i0, r_ohm, m_mt, n_mt come from calibration::fit_reference.
        Self {
            n_cells: 1,
            delta_g: 237_340.0,
            n_e: 2.0,
            alpha_ct: FITTED_ALPHA_CT,
            i0: FITTED_I0,
            a_eff: 25.0,
            r_ohm: FITTED_R_OHM,
            m_mt: FITTED_M_MT,
            n_mt: FITTED_N_MT,
        }
    }
}

pub(crate) const FITTED_ALPHA_CT: f64 = 0.3073887990;
pub(crate) const FITTED_I0: f64 = 3.414509465e-5;
pub(crate) const FITTED_R_OHM: f64 = 0.2171819230;
pub(crate) const FITTED_M_MT: f64 = 7.904260770e-5;
pub(crate) const FITTED_N_MT: f64 = 0.4086767875;

/// Number of load-torque coefficients: `alpha0, alpha1` plus the six `alpha_ij`.
pub const N_ALPHA: usize = 8;

/// Fitted polynomial maps of the compressor and the return-manifold outlet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapCoefficients {
    /// Load torque, in order `alpha0, alpha1, alpha00, alpha10, alpha20,
    /// alpha01, alpha11, alpha02`. `alpha_ij` multiplies `P^i * w^j`.
    pub alpha: [f64; N_ALPHA],
    /// Compressor flow, in order `beta00, beta10, beta20, beta01, beta11,
    /// beta02`; `beta_ij` multiplies `P^i * w^j`.
    pub beta: [f64; 6],
    /// Return-manifold outlet polynomial `a0..a5`.
    pub pa: [f64; 6],
    /// Multiplier applied to the rotor speed before map evaluation.
    pub speed_scale: f64,
    /// Multiplier applied to pressures before map evaluation.
    pub pressure_scale: f64,
    /// Pressure at which the return-manifold outlet flow vanishes [Pa].
    pub rm_back_pressure: f64,
}

impl Default for MapCoefficients {
    fn default() -> Self {
        Self {
            // Alternates alpha11 = 3.92e-6, alpha01 = 4.1e-4 are also listed
            // for this compressor; override the keys to use them.
            alpha: [0.0, 0.0, 0.0, 0.0058, -0.0013, 3.25e-6, -2.80e-6, -1.37e-9],
            beta: [4.83e-5, -5.42e-5, 8.79e-6, 3.49e-7, 3.55e-13, -4.11e-10],
            pa: [1.248e-3, -1.96e-3, -1.52e-3, -2.12e-3, -27.7e-3, -78e-3],
            speed_scale: 1.0,
            pressure_scale: 1e-5,
            rm_back_pressure: 101_325.0,
        }
    }
}

/// Stack and ambient conditions held fixed during a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingConditions {
    /// Stack temperature [K].
    pub t_st: f64,
    /// Ambient (compressor inlet) temperature [K].
    pub t_atm: f64,
    pub phi_ca_in: f64,
    /// Relative humidity inside the cathode [-].
    pub phi_ca: f64,
    /// Anode hydrogen pressure [Pa].
    pub p_h2: f64,
    /// Oxygen pressure used by static polarization curves [Pa].
    pub p_o2_polarization: f64,
}

impl Default for OperatingConditions {
    fn default() -> Self {
        Self {
            t_st: 333.15,
            t_atm: 298.15,
            phi_ca_in: 0.75,
            phi_ca: 0.75,
            p_h2: 100_000.0,
            p_o2_polarization: 100_000.0,
        }
    }
}

/// How water saturation pressure is evaluated away from ambient temperature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SaturationModel {
    /// `ln p = ln p_ref + b (T - T_ref) + c (T - T_ref)(T - T_boil)`, pinned
    /// to the ambient table value at 298.15 K and to 101325 Pa at 373.15 K;
    /// `c` is [`ModelOptions::sat_curvature`].
    LogQuadratic,
    /// Ambient saturation pressure at every temperature.
    Constant,
}

impl SaturationModel {
    pub const NAMES: &'static [&'static str] = &["log-quadratic", "constant"];

    pub fn name(&self) -> &'static str {
        match self {
            SaturationModel::LogQuadratic => "log-quadratic",
            SaturationModel::Constant => "constant",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "log-quadratic" => Some(SaturationModel::LogQuadratic),
            "constant" => Some(SaturationModel::Constant),
            _ => None,
        }
    }
}

/// Curvature matching the 60 degC steam-table value (19946 Pa).
pub const DEFAULT_SAT_CURVATURE: f64 = -1.6249e-4;

const SAT_T_REF: f64 = 298.15;
const SAT_T_BOIL: f64 = 373.15;
const SAT_P_BOIL: f64 = 101_325.0;

/// Which partial-pressure relation maps cathode species masses to pressures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartialPressureForm {
    /// `P = m * R_gas * T / V` with specific gas constants.
    SpecificGas,
    /// `P = (m / M) * R_gas * T / V`; the molar-mass-divided variant. Not
    /// dimensionally consistent with specific gas constants, kept for comparison.
    MolarDivided,
}

impl PartialPressureForm {
    pub const NAMES: &'static [&'static str] = &["specific", "molar"];

    pub fn name(&self) -> &'static str {
        match self {
            PartialPressureForm::SpecificGas => "specific",
            PartialPressureForm::MolarDivided => "molar",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "specific" => Some(PartialPressureForm::SpecificGas),
            "molar" => Some(PartialPressureForm::MolarDivided),
            _ => None,
        }
    }
}

/// Modelling strategies that are not physical parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelOptions {
    pub saturation: SaturationModel,
    /// Curvature of the log-quadratic saturation correlation [1/K^2].
    pub sat_curvature: f64,
    pub partial_pressure: PartialPressureForm,
    /// Smallest supply-manifold mass accepted by the temperature relation [kg].
    pub mass_floor: f64,
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self {
            saturation: SaturationModel::LogQuadratic,
            sat_curvature: DEFAULT_SAT_CURVATURE,
            partial_pressure: PartialPressureForm::SpecificGas,
            mass_floor: 1e-9,
        }
    }
}

/// Everything the model needs. Immutable once validated.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ParameterSet {
    pub constants: PhysicalConstants,
    pub aux: AuxiliaryParams,
    pub electrochem: ElectrochemParams,
    pub maps: MapCoefficients,
    pub conditions: OperatingConditions,
    pub model: ModelOptions,
}

fn require(ok: bool, key: &str, message: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::validation(key, message()))
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    require(v.is_finite() && v > 0.0, key, || {
        format!("must be finite and > 0, got {v}")
    })
}

fn unit_interval(key: &str, v: f64) -> Result<()> {
    require((0.0..=1.0).contains(&v), key, || {
        format!("must lie in [0, 1], got {v}")
    })
}

fn finite(key: &str, v: f64) -> Result<()> {
    require(v.is_finite(), key, || format!("must be finite, got {v}"))
}

impl PhysicalConstants {
    pub fn validate(&self) -> Result<()> {
        let c = self;
        for (k, v) in [
            ("constants.p_atm", c.p_atm),
            ("constants.p_sat_atm", c.p_sat_atm),
            ("constants.cp_air", c.cp_air),
            ("constants.r_air", c.r_air),
            ("constants.r_o2", c.r_o2),
            ("constants.r_n2", c.r_n2),
            ("constants.r_v", c.r_v),
            ("constants.r_univ", c.r_univ),
            ("constants.faraday", c.faraday),
            ("constants.m_air", c.m_air),
            ("constants.m_o2", c.m_o2),
            ("constants.m_n2", c.m_n2),
            ("constants.m_v", c.m_v),
        ] {
            positive(k, v)?;
        }
        require(c.gamma.is_finite() && c.gamma > 1.0, "constants.gamma", || {
            format!("must be > 1, got {}", c.gamma)
        })?;
        unit_interval("constants.phi_atm", c.phi_atm)?;
        require(c.x_o2 > 0.0 && c.x_o2 < 1.0, "constants.x_o2", || {
            format!("must lie in (0, 1), got {}", c.x_o2)
        })?;
        require(c.p_sat_atm < c.p_atm, "constants.p_sat_atm", || {
            "must be below constants.p_atm".into()
        })?;
        for (k, r_gas, m) in [
            ("constants.r_o2", c.r_o2, c.m_o2),
            ("constants.r_n2", c.r_n2, c.m_n2),
            ("constants.r_v", c.r_v, c.m_v),
        ] {
            let rel = (c.r_univ / m - r_gas).abs() / r_gas;
            require(rel < 0.01, k, || {
                format!(
                    "inconsistent with r_univ / molar mass = {} (relative gap {rel:.3e})",
                    c.r_univ / m
                )
            })?;
        }
        Ok(())
    }
}

impl AuxiliaryParams {
    pub fn validate(&self) -> Result<()> {
        let a = self;
        for (k, v) in [
            ("aux.k_t", a.k_t),
            ("aux.r_cm", a.r_cm),
            ("aux.k_v", a.k_v),
            ("aux.eta_cp", a.eta_cp),
            ("aux.eta_cm", a.eta_cm),
            ("aux.j_cp", a.j_cp),
            ("aux.v_sm", a.v_sm),
            ("aux.v_ca", a.v_ca),
            ("aux.v_rm", a.v_rm),
            ("aux.k_sm_out", a.k_sm_out),
            ("aux.k_ca_out", a.k_ca_out),
            ("aux.y_o2_in", a.y_o2_in),
            ("aux.d_c", a.d_c),
        ] {
            positive(k, v)?;
        }
        require(a.eta_cp <= 1.0, "aux.eta_cp", || {
            format!("efficiency must be <= 1, got {}", a.eta_cp)
        })?;
        require(a.eta_cm <= 1.0, "aux.eta_cm", || {
            format!("efficiency must be <= 1, got {}", a.eta_cm)
        })?;
        require(a.y_o2_in < 1.0, "aux.y_o2_in", || {
            format!("mole fraction must be < 1, got {}", a.y_o2_in)
        })
    }
}

impl ElectrochemParams {
    pub fn validate(&self) -> Result<()> {
        let e = self;
        require(e.n_cells >= 1, "electrochem.n_cells", || "must be >= 1".into())?;
        for (k, v) in [
            ("electrochem.delta_g", e.delta_g),
            ("electrochem.n_e", e.n_e),
            ("electrochem.alpha_ct", e.alpha_ct),
            ("electrochem.i0", e.i0),
            ("electrochem.a_eff", e.a_eff),
        ] {
            positive(k, v)?;
        }
        require(e.r_ohm.is_finite() && e.r_ohm >= 0.0, "electrochem.r_ohm", || {
            format!("must be >= 0, got {}", e.r_ohm)
        })?;
        require(e.m_mt.is_finite() && e.m_mt >= 0.0, "electrochem.m_mt", || {
            format!("must be >= 0, got {}", e.m_mt)
        })?;
        finite("electrochem.n_mt", e.n_mt)
    }
}

impl MapCoefficients {
    pub fn validate(&self) -> Result<()> {
        for (i, v) in self.alpha.iter().enumerate() {
            finite(config::ALPHA_KEYS[i], *v)?;
        }
        for (i, v) in self.beta.iter().enumerate() {
            finite(config::BETA_KEYS[i], *v)?;
        }
        for (i, v) in self.pa.iter().enumerate() {
            finite(config::PA_KEYS[i], *v)?;
        }
        positive("maps.speed_scale", self.speed_scale)?;
        positive("maps.pressure_scale", self.pressure_scale)?;
        require(
            self.rm_back_pressure.is_finite() && self.rm_back_pressure >= 0.0,
            "maps.rm_back_pressure",
            || format!("must be >= 0, got {}", self.rm_back_pressure),
        )
    }
}

impl OperatingConditions {
    pub fn validate(&self) -> Result<()> {
        positive("conditions.t_st", self.t_st)?;
        positive("conditions.t_atm", self.t_atm)?;
        unit_interval("conditions.phi_ca_in", self.phi_ca_in)?;
        unit_interval("conditions.phi_ca", self.phi_ca)?;
        positive("conditions.p_h2", self.p_h2)?;
        positive("conditions.p_o2_polarization", self.p_o2_polarization)
    }
}

impl ModelOptions {
    pub fn validate(&self) -> Result<()> {
        finite("model.sat_curvature", self.sat_curvature)?;
        positive("model.mass_floor", self.mass_floor)
    }
}

impl ParameterSet {
    pub fn validate(&self) -> Result<()> {
        self.constants.validate()?;
        self.aux.validate()?;
        self.electrochem.validate()?;
        self.maps.validate()?;
        self.conditions.validate()?;
        self.model.validate()
    }

    /// Water saturation pressure at `t` [K], per the configured model.
    pub fn saturation_pressure(&self, t: f64) -> f64 {
        let p_ref = self.constants.p_sat_atm;
        match self.model.saturation {
            SaturationModel::Constant => p_ref,
            SaturationModel::LogQuadratic => {
                let slope = (SAT_P_BOIL / p_ref).ln() / (SAT_T_BOIL - SAT_T_REF);
                let dt = t - SAT_T_REF;
                let curvature = self.model.sat_curvature;
                (p_ref.ln() + slope * dt + curvature * dt * (t - SAT_T_BOIL)).exp()
            }
        }
    }

    pub fn derived(&self, oc: &OperatingConditions) -> DerivedConstants {
        DerivedConstants::new(self, oc)
    }
}

/// Quantities computed once per (parameters, conditions) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants {
    /// Nitrogen partial pressure per unit mass [Pa/kg].
    pub c1: f64,
    /// Oxygen partial pressure per unit mass [Pa/kg].
    pub c2: f64,
    /// Vapor mass held in the cathode [kg].
    pub c3: f64,
    /// Dry-air molar mass [kg/mol].
    pub m_a_atm: f64,
    /// Oxygen and nitrogen mass fractions of dry air [-].
    pub y_o2: f64,
    pub y_n2: f64,
    /// Ambient humidity ratio [-].
    pub omega_atm: f64,
    /// Saturation pressure at stack temperature [Pa].
    pub p_sat_st: f64,
    /// Cathode vapor partial pressure [Pa].
    pub p_v_ca: f64,
}

impl DerivedConstants {
    pub fn new(p: &ParameterSet, oc: &OperatingConditions) -> Self {
        let c = &p.constants;
        let v_ca = p.aux.v_ca;
        let m_a_atm = c.x_o2 * c.m_o2 + (1.0 - c.x_o2) * c.m_n2;
        let y_o2 = c.x_o2 * c.m_o2 / m_a_atm;
        let y_n2 = (1.0 - c.x_o2) * c.m_n2 / m_a_atm;
        let vapor_fraction = c.phi_atm * c.p_sat_atm / c.p_atm;
        let omega_atm = c.m_v / c.m_air * vapor_fraction / (1.0 - vapor_fraction);
        let p_sat_st = p.saturation_pressure(oc.t_st);
        let p_v_ca = oc.phi_ca * p_sat_st;
        Self {
            c1: c.r_n2 * oc.t_st / v_ca,
            c2: c.r_o2 * oc.t_st / v_ca,
            c3: v_ca * p_v_ca * c.m_v / (c.r_univ * oc.t_st),
            m_a_atm,
            y_o2,
            y_n2,
            omega_atm,
            p_sat_st,
            p_v_ca,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn defaults_validate() {
        ParameterSet::default().validate().unwrap();
    }

    #[test]
    fn dry_air_molar_mass_and_oxygen_fraction() {
        let p = ParameterSet::default();
        let dc = p.derived(&p.conditions);
        // 0.21 * 0.032 + 0.79 * 0.028 = 0.02884
        assert!(close(dc.m_a_atm, 0.02884, 1e-12));
        // 0.00672 / 0.02884
        assert!((dc.y_o2 - 0.2330).abs() < 5e-5);
        assert_eq!(dc.y_o2 + dc.y_n2, 1.0);
    }

    #[test]
    fn ambient_humidity_ratio() {
        let p = ParameterSet::default();
        let dc = p.derived(&p.conditions);
        // (18.02 / 28.97) * 0.015497 / 0.984503
        assert!((dc.omega_atm - 0.009791).abs() < 1e-6);

        let mut dry = p;
        dry.constants.phi_atm = 0.0;
        assert_eq!(dry.derived(&dry.conditions).omega_atm, 0.0);
    }

    #[test]
    fn saturation_anchors() {
        let p = ParameterSet::default();
        assert!(close(p.saturation_pressure(298.15), 3140.4, 1e-12));
        assert!(close(p.saturation_pressure(373.15), 101_325.0, 1e-12));
        // within 1 % of steam tables across the stack temperature range
        for (t, table) in [(318.15, 9_593.0), (328.15, 15_758.0), (333.15, 19_946.0), (343.15, 31_198.0)] {
            assert!(close(p.saturation_pressure(t), table, 0.012), "T = {t}");
        }
        let mut flat = p;
        flat.model.saturation = SaturationModel::Constant;
        assert_eq!(flat.saturation_pressure(340.0), 3140.4);
    }

    #[test]
    fn gas_constant_consistency_is_enforced() {
        let mut p = ParameterSet::default();
        p.constants.r_n2 = 310.0;
        match p.validate() {
            Err(Error::Validation { key, .. }) => assert_eq!(key, "constants.r_n2"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn efficiency_above_one_rejected() {
        let mut p = ParameterSet::default();
        p.aux.eta_cp = 1.2;
        let err = p.validate().unwrap_err().to_string();
        assert!(err.contains("aux.eta_cp"), "{err}");
    }

    proptest! {
        #[test]
        fn mass_fraction_closure(x in 1e-6f64..0.999_999) {
            let mut p = ParameterSet::default();
            p.constants.x_o2 = x;
            let dc = p.derived(&p.conditions);
            prop_assert!((dc.y_o2 + dc.y_n2 - 1.0).abs() <= 2.0 * f64::EPSILON);
        }

        #[test]
        fn cathode_constants_scale_with_temperature(t in 250.0f64..400.0) {
            let p = ParameterSet::default();
            let oc = OperatingConditions { t_st: t, ..p.conditions };
            let oc2 = OperatingConditions { t_st: 2.0 * t, ..p.conditions };
            let a = p.derived(&oc);
            let b = p.derived(&oc2);
            prop_assert!(a.c1 > 0.0 && a.c2 > 0.0 && a.c3 > 0.0);
            prop_assert!(close(b.c1, 2.0 * a.c1, 1e-14));
            prop_assert!(close(b.c2, 2.0 * a.c2, 1e-14));
        }
    }
}
