//! The `section.key = value [unit]` configuration grammar.
//!
//! ```text
//! # comment
//! aux.v_sm = 0.02 [m^3]
//! conditions.t_st = 60 [C]      # converted to kelvin on load
//! ```
//!
//! Keys are `section.name`, values are a single number (or a name for choice
//! keys), the bracketed unit is optional. Unknown and duplicated keys are
//! errors.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use super::units::Quantity;
use super::{ParameterSet, PartialPressureForm, SaturationModel};
use crate::error::{Error, Result};

/// One `key = value [unit]` line.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub unit: Option<String>,
    pub line: usize,
    pub origin: String,
}

impl Entry {
    pub fn section(&self) -> &str {
        self.key.split('.').next().unwrap_or("")
    }

    pub(crate) fn parse_error(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            origin: self.origin.clone(),
            line: self.line,
            message: message.into(),
        }
    }

    /// The value as a plain number, ignoring any unit.
    pub fn number(&self) -> Result<f64> {
        parse_number(&self.value).ok_or_else(|| {
            self.parse_error(format!("`{}`: expected a number, got `{}`", self.key, self.value))
        })
    }

    /// The value as a comma-separated list of numbers.
    pub fn numbers(&self) -> Result<Vec<f64>> {
        self.value
            .split(',')
            .map(|s| {
                parse_number(s.trim()).ok_or_else(|| {
                    self.parse_error(format!("`{}`: `{}` is not a number", self.key, s.trim()))
                })
            })
            .collect()
    }
}

fn parse_number(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn valid_key(key: &str) -> bool {
    let mut parts = key.split('.');
    let ok = |s: Option<&str>| {
        s.is_some_and(|s| {
            !s.is_empty()
                && s.chars()
                    .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
        })
    };
    ok(parts.next()) && ok(parts.next()) && parts.next().is_none()
}

/// Split configuration text into entries. Rejects duplicated keys.
pub fn parse_entries(text: &str, origin: &str) -> Result<Vec<Entry>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let err = |message: String| Error::Parse {
            origin: origin.to_string(),
            line,
            message,
        };
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let entry = parse_line(content).map_err(err)?;
        if !seen.insert(entry.0.clone()) {
            return Err(Error::Parse {
                origin: origin.to_string(),
                line,
                message: format!("duplicate key `{}`", entry.0),
            });
        }
        out.push(Entry {
            key: entry.0,
            value: entry.1,
            unit: entry.2,
            line,
            origin: origin.to_string(),
        });
    }
    Ok(out)
}

fn parse_line(content: &str) -> std::result::Result<(String, String, Option<String>), String> {
    let (key, rest) = content
        .split_once('=')
        .ok_or_else(|| format!("expected `section.key = value`, got `{content}`"))?;
    let key = key.trim();
    if !valid_key(key) {
        return Err(format!("malformed key `{key}` (expected lowercase `section.key`)"));
    }
    let rest = rest.trim();
    let (value, unit) = match rest.strip_suffix(']') {
        Some(head) => {
            let open = head
                .rfind('[')
                .ok_or_else(|| format!("unbalanced `]` in `{rest}`"))?;
            (head[..open].trim(), Some(head[open + 1..].trim().to_string()))
        }
        None => (rest, None),
    };
    if value.is_empty() {
        return Err(format!("missing value for `{key}`"));
    }
    if value.contains('[') || value.contains(']') {
        return Err(format!("malformed unit in `{rest}`"));
    }
    Ok((key.to_string(), value.to_string(), unit))
}

/// Parse a command-line override `key=value [unit]`.
pub fn parse_override(text: &str) -> Result<Entry> {
    let mut entries = parse_entries(text, "--override")?;
    match entries.len() {
        1 => Ok(entries.remove(0)),
        _ => Err(Error::Parse {
            origin: "--override".into(),
            line: 1,
            message: format!("expected a single `key=value`, got `{text}`"),
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyKind {
    Real(Quantity),
    Count,
    Choice(&'static [&'static str]),
}

/// Registry entry for one configuration key.
pub struct KeyInfo {
    pub name: &'static str,
    pub kind: KeyKind,
    pub doc: &'static str,
    get: fn(&ParameterSet) -> String,
    set: fn(&mut ParameterSet, &Entry, f64) -> Result<()>,
}

impl std::fmt::Debug for KeyInfo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KeyInfo")
            .field("name", &self.name)
            .field("kind", &self.kind)
            .finish()
    }
}

impl KeyInfo {
    /// Canonical textual value of this key in `p`.
    pub fn value_of(&self, p: &ParameterSet) -> String {
        (self.get)(p)
    }

    pub fn apply(&self, p: &mut ParameterSet, entry: &Entry) -> Result<()> {
        match self.kind {
            KeyKind::Real(q) => {
                let v = entry.number()?;
                let v = q.to_canonical(self.name, v, entry.unit.as_deref())?;
                (self.set)(p, entry, v)
            }
            KeyKind::Count => {
                if let Some(u) = &entry.unit {
                    return Err(Error::validation(self.name, format!("takes no unit, got `{u}`")));
                }
                let v = entry.number()?;
                if v.fract() != 0.0 || v < 0.0 || v > u32::MAX as f64 {
                    return Err(Error::validation(
                        self.name,
                        format!("must be a non-negative integer, got {}", entry.value),
                    ));
                }
                (self.set)(p, entry, v)
            }
            KeyKind::Choice(names) => {
                if !names.contains(&entry.value.as_str()) {
                    return Err(Error::validation(
                        self.name,
                        format!("`{}` is not one of {}", entry.value, names.join(", ")),
                    ));
                }
                (self.set)(p, entry, f64::NAN)
            }
        }
    }
}

/// Shortest text that parses back to exactly `v`.
pub(crate) fn format_real(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-3..1e7).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

macro_rules! real {
    ($name:literal, $q:expr, $doc:literal, $($field:tt)+) => {
        KeyInfo {
            name: $name,
            kind: KeyKind::Real($q),
            doc: $doc,
            get: |p| format_real(p.$($field)+),
            set: |p, _, v| {
                p.$($field)+ = v;
                Ok(())
            },
        }
    };
}

use Quantity::{Dimensionless as D, Fixed, Pressure as P, Temperature as T};

pub(crate) const ALPHA_KEYS: [&str; 8] = [
    "maps.alpha0",
    "maps.alpha1",
    "maps.alpha00",
    "maps.alpha10",
    "maps.alpha20",
    "maps.alpha01",
    "maps.alpha11",
    "maps.alpha02",
];
pub(crate) const BETA_KEYS: [&str; 6] = [
    "maps.beta00",
    "maps.beta10",
    "maps.beta20",
    "maps.beta01",
    "maps.beta11",
    "maps.beta02",
];
pub(crate) const PA_KEYS: [&str; 6] = [
    "maps.pa0", "maps.pa1", "maps.pa2", "maps.pa3", "maps.pa4", "maps.pa5",
];

/// Every accepted parameter key, in dump order.
pub static KEYS: &[KeyInfo] = &[
    real!("constants.p_atm", P, "ambient pressure", constants.p_atm),
    real!("constants.phi_atm", D, "ambient relative humidity", constants.phi_atm),
    real!("constants.p_sat_atm", P, "saturation pressure at 298.15 K", constants.p_sat_atm),
    real!("constants.gamma", D, "specific-heat ratio of air", constants.gamma),
    real!("constants.cp_air", Fixed("J/kg/K"), "specific heat of air (unused)", constants.cp_air),
    real!("constants.r_air", Fixed("J/kg/K"), "air gas constant", constants.r_air),
    real!("constants.r_o2", Fixed("J/kg/K"), "oxygen gas constant", constants.r_o2),
    real!("constants.r_n2", Fixed("J/kg/K"), "nitrogen gas constant", constants.r_n2),
    real!("constants.r_v", Fixed("J/kg/K"), "vapor gas constant", constants.r_v),
    real!("constants.r_univ", Fixed("J/mol/K"), "universal gas constant", constants.r_univ),
    real!("constants.faraday", Fixed("C/mol"), "Faraday constant", constants.faraday),
    real!("constants.m_air", Fixed("kg/mol"), "molar mass of humid air", constants.m_air),
    real!("constants.m_o2", Fixed("kg/mol"), "molar mass of oxygen", constants.m_o2),
    real!("constants.m_n2", Fixed("kg/mol"), "molar mass of nitrogen", constants.m_n2),
    real!("constants.m_v", Fixed("kg/mol"), "molar mass of water vapor", constants.m_v),
    real!("constants.x_o2", D, "oxygen mole fraction in dry air", constants.x_o2),
    real!("aux.k_t", Fixed("N*m/A"), "motor torque constant", aux.k_t),
    real!("aux.r_cm", Fixed("ohm"), "motor winding resistance", aux.r_cm),
    real!("aux.k_v", Fixed("V*s/rad"), "motor back-EMF constant", aux.k_v),
    real!("aux.eta_cp", D, "compressor efficiency", aux.eta_cp),
    real!("aux.eta_cm", D, "motor mechanical efficiency", aux.eta_cm),
    real!("aux.j_cp", Fixed("kg*m^2"), "compressor and motor inertia", aux.j_cp),
    real!("aux.v_sm", Fixed("m^3"), "supply manifold volume", aux.v_sm),
    real!("aux.v_ca", Fixed("m^3"), "cathode volume", aux.v_ca),
    real!("aux.v_rm", Fixed("m^3"), "return manifold volume", aux.v_rm),
    real!("aux.k_sm_out", Fixed("kg/s/Pa"), "supply manifold outlet orifice constant", aux.k_sm_out),
    real!("aux.k_ca_out", Fixed("kg/s/Pa"), "cathode outlet orifice constant", aux.k_ca_out),
    real!("aux.y_o2_in", D, "oxygen mole fraction at cathode inlet (unused)", aux.y_o2_in),
    real!("aux.d_c", Fixed("m"), "compressor diameter (unused)", aux.d_c),
    KeyInfo {
        name: "electrochem.n_cells",
        kind: KeyKind::Count,
        doc: "cells in series",
        get: |p| p.electrochem.n_cells.to_string(),
        set: |p, _, v| {
            p.electrochem.n_cells = v as u32;
            Ok(())
        },
    },
    real!("electrochem.delta_g", Fixed("J/mol"), "Gibbs free energy magnitude", electrochem.delta_g),
    real!("electrochem.n_e", D, "electrons per reaction", electrochem.n_e),
    real!("electrochem.alpha_ct", D, "charge transfer coefficient; fitted locally, not a published value", electrochem.alpha_ct),
    real!("electrochem.i0", Fixed("A/cm^2"), "exchange current density; fitted locally, not a published value", electrochem.i0),
    real!("electrochem.a_eff", Fixed("cm^2"), "effective cell area", electrochem.a_eff),
    real!("electrochem.r_ohm", Fixed("ohm*cm^2"), "area-specific resistance; fitted locally, not a published value", electrochem.r_ohm),
    real!("electrochem.m_mt", Fixed("V"), "mass-transfer loss amplitude; fitted locally, not a published value", electrochem.m_mt),
    real!("electrochem.n_mt", Fixed("1/A"), "mass-transfer exponent; fitted locally, not a published value", electrochem.n_mt),
    real!("maps.alpha0", D, "load torque, constant prefix term", maps.alpha[0]),
    real!("maps.alpha1", D, "load torque, speed prefix term", maps.alpha[1]),
    real!("maps.alpha00", D, "load torque, constant", maps.alpha[2]),
    real!("maps.alpha10", D, "load torque, P", maps.alpha[3]),
    real!("maps.alpha20", D, "load torque, P^2", maps.alpha[4]),
    real!("maps.alpha01", D, "load torque, w (alternate listing 4.1e-4)", maps.alpha[5]),
    real!("maps.alpha11", D, "load torque, P*w (alternate listing 3.92e-6)", maps.alpha[6]),
    real!("maps.alpha02", D, "load torque, w^2", maps.alpha[7]),
    real!("maps.beta00", D, "compressor flow, constant", maps.beta[0]),
    real!("maps.beta10", D, "compressor flow, P", maps.beta[1]),
    real!("maps.beta20", D, "compressor flow, P^2", maps.beta[2]),
    real!("maps.beta01", D, "compressor flow, w", maps.beta[3]),
    real!("maps.beta11", D, "compressor flow, P*w", maps.beta[4]),
    real!("maps.beta02", D, "compressor flow, w^2", maps.beta[5]),
    real!("maps.pa0", D, "return outlet polynomial a0 (excluded from the outflow sum)", maps.pa[0]),
    real!("maps.pa1", D, "return outlet polynomial a1", maps.pa[1]),
    real!("maps.pa2", D, "return outlet polynomial a2", maps.pa[2]),
    real!("maps.pa3", D, "return outlet polynomial a3", maps.pa[3]),
    real!("maps.pa4", D, "return outlet polynomial a4", maps.pa[4]),
    real!("maps.pa5", D, "return outlet polynomial a5", maps.pa[5]),
    real!("maps.speed_scale", D, "rotor speed multiplier before map evaluation", maps.speed_scale),
    real!("maps.pressure_scale", D, "pressure multiplier before map evaluation (1e-5: Pa -> bar)", maps.pressure_scale),
    real!("maps.rm_back_pressure", P, "pressure at which return outlet flow vanishes", maps.rm_back_pressure),
    real!("conditions.t_st", T, "stack temperature", conditions.t_st),
    real!("conditions.t_atm", T, "ambient temperature", conditions.t_atm),
    real!("conditions.phi_ca_in", D, "cathode inlet relative humidity", conditions.phi_ca_in),
    real!("conditions.phi_ca", D, "cathode relative humidity", conditions.phi_ca),
    real!("conditions.p_h2", P, "anode hydrogen pressure", conditions.p_h2),
    real!("conditions.p_o2_polarization", P, "oxygen pressure for static curves", conditions.p_o2_polarization),
    KeyInfo {
        name: "model.saturation",
        kind: KeyKind::Choice(SaturationModel::NAMES),
        doc: "saturation pressure correlation",
        get: |p| p.model.saturation.name().to_string(),
        set: |p, e, _| {
            p.model.saturation = SaturationModel::from_name(&e.value).expect("checked by apply");
            Ok(())
        },
    },
    real!("model.sat_curvature", Fixed("1/K^2"), "log-quadratic saturation curvature", model.sat_curvature),
    KeyInfo {
        name: "model.partial_pressure",
        kind: KeyKind::Choice(PartialPressureForm::NAMES),
        doc: "species mass to partial pressure relation",
        get: |p| p.model.partial_pressure.name().to_string(),
        set: |p, e, _| {
            p.model.partial_pressure =
                PartialPressureForm::from_name(&e.value).expect("checked by apply");
            Ok(())
        },
    },
    real!("model.mass_floor", Fixed("kg"), "smallest supply manifold mass accepted", model.mass_floor),
];

pub fn find_key(name: &str) -> Option<&'static KeyInfo> {
    KEYS.iter().find(|k| k.name == name)
}

impl ParameterSet {
    /// Apply parameter entries in order. Does not validate the result.
    pub fn apply_entries<'a>(&mut self, entries: impl IntoIterator<Item = &'a Entry>) -> Result<()> {
        for e in entries {
            let info = find_key(&e.key)
                .ok_or_else(|| e.parse_error(format!("unknown key `{}`", e.key)))?;
            info.apply(self, e)?;
        }
        Ok(())
    }

    /// Defaults overlaid with `text`, validated.
    pub fn from_config_str(text: &str, origin: &str) -> Result<Self> {
        let mut p = ParameterSet::default();
        p.apply_entries(&parse_entries(text, origin)?)?;
        p.validate()?;
        Ok(p)
    }
}

/// Load a configuration file over the defaults and validate the result.
pub fn load_parameters(path: impl AsRef<Path>) -> Result<ParameterSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ParameterSet::from_config_str(&text, &path.display().to_string())
}

const SECTIONS: &[(&str, &str)] = &[
    ("constants", "physical constants"),
    ("aux", "compressor, manifolds and nozzles"),
    ("electrochem", "stack voltage model"),
    ("maps", "fitted compressor and return-outlet maps; alpha_ij / beta_ij multiply P^i * w^j"),
    ("conditions", "operating conditions"),
    ("model", "modelling strategies"),
];

/// Render a complete configuration file for `p`. Loading it back yields `p`
/// bit for bit.
pub fn serialize(p: &ParameterSet) -> String {
    let mut out = String::new();
    for (section, title) in SECTIONS {
        let _ = writeln!(out, "\n# --- {section}: {title}");
        for k in KEYS.iter().filter(|k| k.name.split('.').next() == Some(section)) {
            let unit = match k.kind {
                KeyKind::Real(q) => q.canonical().map(|u| format!(" [{u}]")).unwrap_or_default(),
                _ => String::new(),
            };
            let mut options = String::new();
            if let KeyKind::Choice(names) = k.kind {
                options = format!(" ({})", names.join(" | "));
            }
            let _ = writeln!(out, "{} = {}{}  # {}{}", k.name, k.value_of(p), unit, k.doc, options);
        }
    }
    out
}

/// The full default parameter file.
pub fn dump_defaults() -> String {
    let mut out = String::from(
        "# pemfc parameter file\n\
         # grammar: section.key = value [unit]   ('#' starts a comment)\n\
         # pressure keys accept [Pa], [kPa], [bar], [atm]; temperature keys [K], [C]\n\
         # unknown keys are rejected; omitted keys take the values below\n",
    );
    out.push_str(&serialize(&ParameterSet::default()));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_file_gives_defaults() {
        let p = ParameterSet::from_config_str("", "test").unwrap();
        assert_eq!(p, ParameterSet::default());
        assert_eq!(p.aux.j_cp, 5e-5);
    }

    #[test]
    fn idempotent_override() {
        let p = ParameterSet::from_config_str("aux.v_sm = 0.02 [m^3]\n", "t").unwrap();
        assert_eq!(p, ParameterSet::default());
    }

    #[test]
    fn unphysical_efficiency_names_key() {
        let err = ParameterSet::from_config_str("aux.eta_cp = 1.2", "t").unwrap_err();
        assert!(matches!(&err, Error::Validation { key, .. } if key == "aux.eta_cp"), "{err}");
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = ParameterSet::from_config_str("aux.v_sn = 0.02", "cfg").unwrap_err();
        assert!(err.to_string().contains("unknown key `aux.v_sn`"), "{err}");
        assert!(err.to_string().starts_with("cfg:1:"), "{err}");
    }

    #[test]
    fn malformed_lines() {
        for bad in [
            "aux.v_sm 0.02",
            "v_sm = 0.02",
            "aux.v_sm =",
            "aux.v_sm = 0.02 [m^3",
            "aux.v_sm = abc",
            "Aux.v_sm = 1",
        ] {
            assert!(ParameterSet::from_config_str(bad, "t").is_err(), "{bad}");
        }
    }

    #[test]
    fn duplicates_rejected() {
        let err = parse_entries("aux.v_sm = 1\naux.v_sm = 2\n", "t").unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
    }

    #[test]
    fn units_are_converted_at_the_boundary() {
        let p = ParameterSet::from_config_str(
            "conditions.t_st = 60 [C]\nconditions.p_h2 = 1.5 [bar]\nconstants.p_atm = 1 [atm]",
            "t",
        )
        .unwrap();
        assert!((p.conditions.t_st - 333.15).abs() < 1e-12);
        assert_eq!(p.conditions.p_h2, 150_000.0);
        assert_eq!(p.constants.p_atm, 101_325.0);
        assert!(ParameterSet::from_config_str("aux.v_sm = 20 [L]", "t").is_err());
    }

    #[test]
    fn choices_and_counts() {
        let p = ParameterSet::from_config_str(
            "model.saturation = constant\nelectrochem.n_cells = 3\nmodel.partial_pressure = molar",
            "t",
        )
        .unwrap();
        assert_eq!(p.model.saturation, SaturationModel::Constant);
        assert_eq!(p.electrochem.n_cells, 3);
        assert_eq!(p.model.partial_pressure, PartialPressureForm::MolarDivided);
        assert!(ParameterSet::from_config_str("model.saturation = antoine", "t").is_err());
        assert!(ParameterSet::from_config_str("electrochem.n_cells = 2.5", "t").is_err());
        assert!(ParameterSet::from_config_str("electrochem.n_cells = 0", "t").is_err());
    }

    #[test]
    fn defaults_dump_reloads() {
        let text = dump_defaults();
        let p = ParameterSet::from_config_str(&text, "dump").unwrap();
        assert_eq!(p, ParameterSet::default());
        for k in KEYS {
            assert!(text.contains(&format!("{} = ", k.name)), "{}", k.name);
        }
    }

    #[test]
    fn override_parsing() {
        let e = parse_override("conditions.t_st=70 [C]").unwrap();
        assert_eq!(e.key, "conditions.t_st");
        assert_eq!(e.unit.as_deref(), Some("C"));
        assert!(parse_override("nonsense").is_err());
    }

    fn positive() -> impl Strategy<Value = f64> {
        (1e-12f64..1e9).prop_map(|v| v)
    }

    proptest! {
        #[test]
        fn serialize_round_trip_is_bitwise(
            v_sm in positive(), j_cp in positive(), k_ca in positive(),
            alpha in proptest::array::uniform8(-1e3f64..1e3),
            pa in proptest::array::uniform6(-1.0f64..1.0),
            t_st in 250.0f64..400.0, phi in 0.0f64..=1.0,
            i0 in positive(), n_mt in -10.0f64..10.0, cells in 1u32..500,
            curv in -1e-3f64..1e-3,
        ) {
            let mut p = ParameterSet::default();
            p.aux.v_sm = v_sm;
            p.aux.j_cp = j_cp;
            p.aux.k_ca_out = k_ca;
            p.maps.alpha = alpha;
            p.maps.pa = pa;
            p.conditions.t_st = t_st;
            p.conditions.phi_ca = phi;
            p.electrochem.i0 = i0;
            p.electrochem.n_mt = n_mt;
            p.electrochem.n_cells = cells;
            p.model.sat_curvature = curv;
            let back = ParameterSet::from_config_str(&serialize(&p), "rt").unwrap();
            prop_assert_eq!(back, p);
        }
    }
}
