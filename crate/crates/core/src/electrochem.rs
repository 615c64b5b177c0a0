//! Static cell voltage: Nernst potential minus activation, ohmic and
//! concentration losses.
//!
//! Pressures handed to this module are in atm because the empirical
//! coefficients of the open-circuit correlation were fitted that way; callers
//! convert from Pa with [`crate::params::units::pa_to_atm`].

use crate::error::{Error, Result};
use crate::params::{ElectrochemParams, PhysicalConstants};

/// Cell and stack voltage with every contribution kept separate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VoltageBreakdown {
    pub e_nernst: f64,
    pub v_act: f64,
    pub v_ohm: f64,
    pub v_conc: f64,
    pub v_cell: f64,
    pub v_stack: f64,
    /// Set when the current density fell below the exchange current density
    /// and the activation loss was clamped to zero.
    pub activation_clamped: bool,
}

/// Reversible potential `delta_g / (n_e * F)` [V].
pub fn reversible_voltage(delta_g: f64, n_e: f64, faraday: f64) -> f64 {
    delta_g / (n_e * faraday)
}

/// Open-circuit potential [V] at `t_fc` [K] with partial pressures in atm.
pub fn nernst_voltage(t_fc: f64, p_h2_atm: f64, p_o2_atm: f64) -> Result<f64> {
    if !(p_h2_atm > 0.0 && p_o2_atm > 0.0) {
        return Err(Error::domain(
            "nernst_voltage",
            format!("partial pressures must be positive (P_H2 = {p_h2_atm} atm, P_O2 = {p_o2_atm} atm)"),
        ));
    }
    if !(t_fc > 0.0) {
        return Err(Error::domain("nernst_voltage", format!("temperature must be positive, got {t_fc} K")));
    }
    Ok(1.229 - 8.5e-4 * (t_fc - 298.15)
        + 4.3085e-5 * t_fc * (p_h2_atm.ln() + 0.5 * p_o2_atm.ln()))
}

/// Tafel activation loss [V] for current density `i` and exchange current
/// density `i0` (same units). Returns `(loss, clamped)`; below `i0` the loss
/// is clamped to zero.
pub fn activation_loss(
    t: f64,
    alpha_ct: f64,
    i: f64,
    i0: f64,
    r_univ: f64,
    faraday: f64,
) -> Result<(f64, bool)> {
    if !(i > 0.0) {
        return Err(Error::domain(
            "activation_loss",
            format!("current density must be positive, got {i}"),
        ));
    }
    if i < i0 {
        return Ok((0.0, true));
    }
    Ok((r_univ * t / (2.0 * alpha_ct * faraday) * (i / i0).ln(), false))
}

pub fn ohmic_loss(i_fc: f64, r_ohm_total: f64) -> f64 {
    i_fc * r_ohm_total
}

pub fn concentration_loss(i_fc: f64, m_mt: f64, n_mt: f64) -> f64 {
    m_mt * (n_mt * i_fc).exp()
}

/// Full breakdown at stack current `i_fc` [A]. At zero current the activation
/// term is taken as zero (open circuit).
pub fn cell_voltage(
    ec: &ElectrochemParams,
    pc: &PhysicalConstants,
    t_fc: f64,
    p_h2_atm: f64,
    p_o2_atm: f64,
    i_fc: f64,
) -> Result<VoltageBreakdown> {
    if !(i_fc >= 0.0) {
        return Err(Error::domain("cell_voltage", format!("stack current must be >= 0, got {i_fc} A")));
    }
    let e_nernst = nernst_voltage(t_fc, p_h2_atm, p_o2_atm)?;
    let (v_act, activation_clamped) = if i_fc == 0.0 {
        (0.0, false)
    } else {
        activation_loss(t_fc, ec.alpha_ct, i_fc / ec.a_eff, ec.i0, pc.r_univ, pc.faraday)?
    };
    let v_ohm = ohmic_loss(i_fc, ec.ohmic_resistance());
    let v_conc = concentration_loss(i_fc, ec.m_mt, ec.n_mt);
    let v_cell = e_nernst - v_act - v_ohm - v_conc;
    Ok(VoltageBreakdown {
        e_nernst,
        v_act,
        v_ohm,
        v_conc,
        v_cell,
        v_stack: ec.n_cells as f64 * v_cell,
        activation_clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ParameterSet;
    use proptest::prelude::*;
    use std::f64::consts::E;

    #[test]
    fn reversible_voltage_values() {
        let e0 = reversible_voltage(237_340.0, 2.0, 96_485.0);
        assert!((e0 - 1.2299).abs() < 5e-5, "{e0}");
        assert_eq!(reversible_voltage(0.0, 2.0, 96_485.0), 0.0);
        assert!((reversible_voltage(237_340.0, 4.0, 96_485.0) - 0.61496).abs() < 1e-5);
    }

    #[test]
    fn nernst_values() {
        assert_eq!(nernst_voltage(298.15, 1.0, 1.0).unwrap(), 1.229);
        // 1.229 - 8.5e-4 * 35
        assert!((nernst_voltage(333.15, 1.0, 1.0).unwrap() - 1.19925).abs() < 1e-12);
        let e = nernst_voltage(298.15, 1.0, E * E).unwrap();
        assert!((e - (1.229 + 4.3085e-5 * 298.15)).abs() < 1e-12);
        assert!((e - 1.24185).abs() < 5e-6);
        assert!(nernst_voltage(298.15, 0.0, 1.0).is_err());
        assert!(nernst_voltage(298.15, 1.0, -1.0).is_err());
    }

    #[test]
    fn activation_values() {
        let (v, clamped) = activation_loss(298.15, 0.5, 1e-3, 1e-3, 8.314, 96_485.0).unwrap();
        assert_eq!(v, 0.0);
        assert!(!clamped);
        let (v, _) = activation_loss(298.15, 0.5, E * 1e-3, 1e-3, 8.314, 96_485.0).unwrap();
        assert!((v - 8.314 * 298.15 / 96_485.0).abs() < 1e-15);
        assert!((v - 0.02569).abs() < 5e-6);
        let (half, _) = activation_loss(298.15, 1.0, E * 1e-3, 1e-3, 8.314, 96_485.0).unwrap();
        assert!((half - v / 2.0).abs() < 1e-16);

        assert_eq!(
            activation_loss(298.15, 0.5, 1e-4, 1e-3, 8.314, 96_485.0).unwrap(),
            (0.0, true)
        );
        assert!(activation_loss(298.15, 0.5, 0.0, 1e-3, 8.314, 96_485.0).is_err());
    }

    #[test]
    fn ohmic_and_concentration_values() {
        assert_eq!(ohmic_loss(0.0, 0.01), 0.0);
        assert!((ohmic_loss(10.0, 0.01) - 0.1).abs() < 1e-16);
        assert!((ohmic_loss(-5.0, 0.01) + 0.05).abs() < 1e-16);
        assert_eq!(concentration_loss(0.0, 3e-3, 0.2), 3e-3);
        assert!((concentration_loss(10.0, 1e-4, 0.1) - 2.7183e-4).abs() < 1e-8);
        assert_eq!(concentration_loss(12.0, 0.0, 0.5), 0.0);
    }

    #[test]
    fn open_circuit_at_reference() {
        let p = ParameterSet::default();
        let mut ec = p.electrochem;
        ec.m_mt = 0.0;
        let b = cell_voltage(&ec, &p.constants, 298.15, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(b.v_cell, 1.229);
        assert_eq!(b.v_stack, 1.229);
    }

    #[test]
    fn stack_scales_with_cells() {
        let p = ParameterSet::default();
        let one = cell_voltage(&p.electrochem, &p.constants, 333.15, 1.0, 0.5, 7.0).unwrap();
        let mut ec = p.electrochem;
        ec.n_cells = 3;
        let three = cell_voltage(&ec, &p.constants, 333.15, 1.0, 0.5, 7.0).unwrap();
        assert_eq!(three.v_cell, one.v_cell);
        assert_eq!(three.v_stack, 3.0 * one.v_cell);
    }

    #[test]
    fn negative_current_rejected() {
        let p = ParameterSet::default();
        assert!(cell_voltage(&p.electrochem, &p.constants, 333.15, 1.0, 1.0, -1.0).is_err());
    }

    proptest! {
        #[test]
        fn breakdown_identity(t in 280.0f64..360.0, ph2 in 0.1f64..3.0, po2 in 0.01f64..3.0, i in 0.0f64..20.0) {
            let p = ParameterSet::default();
            let b = cell_voltage(&p.electrochem, &p.constants, t, ph2, po2, i).unwrap();
            prop_assert_eq!(b.v_cell, b.e_nernst - b.v_act - b.v_ohm - b.v_conc);
            prop_assert_eq!(b.v_stack, b.v_cell);
            let floor = p.electrochem.i0 * p.electrochem.a_eff;
            if i >= floor {
                prop_assert!(b.v_act >= 0.0 && b.v_ohm >= 0.0 && b.v_conc >= 0.0);
            }
        }

        #[test]
        fn voltage_falls_with_current(t in 300.0f64..350.0, po2 in 0.2f64..2.0, i in 0.05f64..19.0, di in 1e-3f64..1.0) {
            let p = ParameterSet::default();
            let a = cell_voltage(&p.electrochem, &p.constants, t, 1.0, po2, i).unwrap();
            let b = cell_voltage(&p.electrochem, &p.constants, t, 1.0, po2, i + di).unwrap();
            prop_assert!(b.v_cell < a.v_cell);
        }

        #[test]
        fn voltage_rises_with_pressure(i in 0.1f64..15.0, p_lo in 0.1f64..2.0, dp in 1e-3f64..1.0) {
            let p = ParameterSet::default();
            let ec = &p.electrochem;
            let base = cell_voltage(ec, &p.constants, 333.15, 1.0, p_lo, i).unwrap();
            let more_o2 = cell_voltage(ec, &p.constants, 333.15, 1.0, p_lo + dp, i).unwrap();
            let more_h2 = cell_voltage(ec, &p.constants, 333.15, 1.0 + dp, p_lo, i).unwrap();
            prop_assert!(more_o2.v_cell > base.v_cell);
            prop_assert!(more_h2.v_cell > base.v_cell);
        }
    }
}
