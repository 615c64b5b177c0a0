//! Unit handling at the configuration boundary.
//!
//! Everything inside the library is SI. A configuration value may carry a
//! bracketed unit (`p_atm = 1 [atm]`); pressure and temperature keys accept a
//! handful of common units, every other key accepts only its canonical unit.

use crate::error::{Error, Result};

pub const PA_PER_ATM: f64 = 101_325.0;
pub const PA_PER_BAR: f64 = 100_000.0;
pub const KELVIN_OFFSET: f64 = 273.15;

/// Mass flow of one standard litre per minute of air at 1 atm and 25 C
/// [kg/s]: `p M / (R T) / 60000` with M = 28.97 g/mol.
pub const KG_S_PER_SLPM: f64 = PA_PER_ATM * 28.97e-3 / (8.314 * 298.15) / 60_000.0;

/// What a configuration key measures, and its canonical (SI) unit string.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Pressure,
    Temperature,
    Dimensionless,
    /// Any other SI quantity; only the canonical spelling is accepted.
    Fixed(&'static str),
}

impl Quantity {
    pub fn canonical(self) -> Option<&'static str> {
        match self {
            Quantity::Pressure => Some("Pa"),
            Quantity::Temperature => Some("K"),
            Quantity::Dimensionless => None,
            Quantity::Fixed(u) => Some(u),
        }
    }

    /// Convert `value` expressed in `unit` into the canonical unit.
    pub fn to_canonical(self, key: &str, value: f64, unit: Option<&str>) -> Result<f64> {
        let Some(unit) = unit else {
            return Ok(value);
        };
        let bad = || {
            Error::validation(
                key,
                format!(
                    "unit `{unit}` is not accepted here (expected {})",
                    self.canonical().unwrap_or("no unit")
                ),
            )
        };
        match self {
            Quantity::Pressure => pressure_to_pa(value, unit).ok_or_else(bad),
            Quantity::Temperature => temperature_to_kelvin(value, unit).ok_or_else(bad),
            Quantity::Dimensionless => match unit {
                "-" | "" => Ok(value),
                _ => Err(bad()),
            },
            Quantity::Fixed(canon) if unit == canon => Ok(value),
            Quantity::Fixed(_) => Err(bad()),
        }
    }
}

pub fn pressure_to_pa(value: f64, unit: &str) -> Option<f64> {
    match unit {
        "Pa" => Some(value),
        "kPa" => Some(value * 1e3),
        "bar" => Some(value * PA_PER_BAR),
        "atm" => Some(value * PA_PER_ATM),
        _ => None,
    }
}

pub fn temperature_to_kelvin(value: f64, unit: &str) -> Option<f64> {
    match unit {
        "K" => Some(value),
        "C" | "degC" => Some(value + KELVIN_OFFSET),
        _ => None,
    }
}

pub fn pa_to_atm(p: f64) -> f64 {
    p / PA_PER_ATM
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pressure_units() {
        assert_eq!(pressure_to_pa(1.5, "bar"), Some(150_000.0));
        assert_eq!(pressure_to_pa(1.0, "atm"), Some(101_325.0));
        assert_eq!(pressure_to_pa(2.0, "kPa"), Some(2_000.0));
        assert_eq!(pressure_to_pa(1.0, "psi"), None);
    }

    #[test]
    fn fixed_units_must_match_exactly() {
        let q = Quantity::Fixed("m^3");
        assert_eq!(q.to_canonical("aux.v_sm", 0.02, Some("m^3")).unwrap(), 0.02);
        assert!(q.to_canonical("aux.v_sm", 0.02, Some("L")).is_err());
        assert_eq!(q.to_canonical("aux.v_sm", 0.02, None).unwrap(), 0.02);
    }

    #[test]
    fn slpm_conversion() {
        assert!((KG_S_PER_SLPM - 1.9736e-5).abs() < 1e-9);
        // 0.2 Slpm is a few micrograms per second, not milligrams
        assert!((0.2 * KG_S_PER_SLPM - 3.947e-6).abs() < 1e-9);
    }

    #[test]
    fn celsius() {
        let k = Quantity::Temperature
            .to_canonical("conditions.t_st", 60.0, Some("C"))
            .unwrap();
        assert!((k - 333.15).abs() < 1e-12);
    }
}
