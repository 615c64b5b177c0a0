use std::collections::BTreeMap;
use std::path::Path;

use super::{ExperimentKind, ExperimentSpec, Mode, SweepValue};
use crate::error::{Error, Result};
use crate::params::{parse_entries, Entry};
use crate::params::units::{pressure_to_pa, temperature_to_kelvin, KG_S_PER_SLPM};
use crate::params::ParameterSet;
use crate::sim::{IntegratorConfig, Method, SteadyStateOptions};

/// Accepted `experiment.*` keys with a short description.
pub const EXPERIMENT_KEYS: &[(&str, &str)] = &[
    ("experiment.kind", "polarization | flow_sweep | pressure_sweep | temperature_sweep | transient"),
    ("experiment.mode", "static | dynamic (default: dynamic for flow sweeps and transients)"),
    ("experiment.currents", "stack currents, comma separated [A]"),
    ("experiment.current_range", "start, stop, step [A]; alternative to currents"),
    ("experiment.values", "swept pressures [Pa|kPa|bar|atm] or temperatures [K|C]"),
    ("experiment.flow_kg_s", "swept air flows in kg/s"),
    ("experiment.flow_slpm", "swept air flows in standard litres per minute"),
    ("experiment.v_cm", "motor voltage for dynamic runs, start of the flow search [V]"),
    ("experiment.output", "base name of the output files"),
    ("experiment.marginality", "flow-sweep voltage spread threshold [V]"),
    ("experiment.dwell", "seconds per current level in a transient [s]"),
    ("experiment.integrator", "rk45 | rk4"),
    ("experiment.dt", "fixed step for rk4 [s]"),
    ("experiment.rel_tol", "rk45 relative tolerance"),
    ("experiment.abs_tol", "rk45 absolute tolerance, relative to the state scale"),
    ("experiment.record_stride", "keep every n-th integration step"),
    ("experiment.steady_tol", "steady-state residual tolerance [1/s]"),
    ("experiment.flow_tol", "relative tolerance when matching a flow target"),
];

struct Experiment<'a>(BTreeMap<&'a str, &'a Entry>);

impl<'a> Experiment<'a> {
    fn get(&self, key: &str) -> Option<&'a Entry> {
        self.0.get(key).copied()
    }

    fn unit_check(e: &Entry, allowed: &[&str]) -> Result<()> {
        match e.unit.as_deref() {
            Some(u) if !allowed.contains(&u) => Err(Error::validation(
                e.key.clone(),
                format!("unit `{u}` is not accepted here (expected {})", allowed.join(", ")),
            )),
            _ => Ok(()),
        }
    }

    fn number(&self, key: &str, default: f64, units: &[&str]) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(e) => {
                Self::unit_check(e, units)?;
                e.number()
            }
        }
    }

    fn positive(&self, key: &str, default: f64, units: &[&str]) -> Result<f64> {
        let v = self.number(key, default, units)?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(Error::validation(key, format!("must be positive, got {v}")))
        }
    }

    fn choice<T>(&self, key: &str, parse: fn(&str) -> Option<T>, names: &[&str]) -> Result<Option<T>> {
        self.get(key)
            .map(|e| {
                parse(&e.value).ok_or_else(|| {
                    Error::validation(key, format!("`{}` is not one of {}", e.value, names.join(", ")))
                })
            })
            .transpose()
    }
}

fn ascending_distinct(key: &str, mut v: Vec<f64>) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::validation(key, "must not be empty"));
    }
    v.sort_by(f64::total_cmp);
    if v.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::validation(key, "values must be distinct"));
    }
    Ok(v)
}

fn currents(exp: &Experiment) -> Result<Vec<f64>> {
    let values = match (exp.get("experiment.currents"), exp.get("experiment.current_range")) {
        (Some(_), Some(_)) => {
            return Err(Error::validation("experiment.currents", "give either currents or current_range, not both"))
        }
        (None, None) => return Err(Error::validation("experiment.currents", "a current grid is required")),
        (Some(e), None) => {
            Experiment::unit_check(e, &["A"])?;
            e.numbers()?
        }
        (None, Some(e)) => {
            Experiment::unit_check(e, &["A"])?;
            let &[start, stop, step] = e.numbers()?.as_slice() else {
                return Err(Error::validation(&e.key, "expected `start, stop, step`"));
            };
            if !(step > 0.0) || stop < start {
                return Err(Error::validation(&e.key, "needs step > 0 and stop >= start"));
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            (0..=n).map(|k| start + k as f64 * step).collect()
        }
    };
    if let Some(bad) = values.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::validation("experiment.currents", format!("currents must be >= 0, got {bad}")));
    }
    ascending_distinct("experiment.currents", values)
}

fn sweep_values(exp: &Experiment, kind: ExperimentKind) -> Result<Vec<SweepValue>> {
    let values = exp.get("experiment.values");
    let flows = [exp.get("experiment.flow_kg_s"), exp.get("experiment.flow_slpm")];
    let none_of = |keys: &[Option<&Entry>]| -> Result<()> {
        match keys.iter().flatten().next() {
            Some(e) => Err(Error::validation(&e.key, format!("not used by a {} experiment", kind.name()))),
            None => Ok(()),
        }
    };
    let convert = |e: &Entry, default_unit: &str, to_si: &dyn Fn(f64, &str) -> Option<f64>, range: (f64, f64)| {
        let unit = e.unit.clone().unwrap_or_else(|| default_unit.to_string());
        let mut out = Vec::new();
        for v in ascending_distinct(&e.key, e.numbers()?)? {
            let si = to_si(v, &unit)
                .ok_or_else(|| Error::validation(&e.key, format!("unit `{unit}` is not accepted here")))?;
            if !(range.0..=range.1).contains(&si) {
                return Err(Error::validation(
                    &e.key,
                    format!("{v} {unit} is outside the accepted range [{:e}, {:e}] (SI)", range.0, range.1),
                ));
            }
            out.push(SweepValue { value: v, unit: unit.clone(), si });
        }
        Ok(out)
    };
    let required = |key: &str| Error::validation(key, format!("required by a {} experiment", kind.name()));
    match kind {
        ExperimentKind::Polarization | ExperimentKind::Transient => {
            none_of(&[values, flows[0], flows[1]])?;
            Ok(Vec::new())
        }
        ExperimentKind::PressureSweep => {
            none_of(&flows)?;
            let e = values.ok_or_else(|| required("experiment.values"))?;
            convert(e, "Pa", &pressure_to_pa, (0.2e5, 5e5))
        }
        ExperimentKind::TemperatureSweep => {
            none_of(&flows)?;
            let e = values.ok_or_else(|| required("experiment.values"))?;
            convert(e, "K", &temperature_to_kelvin, (273.15, 373.15))
        }
        ExperimentKind::FlowSweep => {
            none_of(&[values])?;
            let range = (1e-9, 0.1);
            match flows {
                [Some(e), None] => {
                    Experiment::unit_check(e, &["kg/s"])?;
                    convert(e, "kg/s", &|v, _| Some(v), range)
                }
                [None, Some(e)] => {
                    Experiment::unit_check(e, &["Slpm"])?;
                    convert(e, "Slpm", &|v, _| Some(v * KG_S_PER_SLPM), range)
                }
                [Some(_), Some(_)] => {
                    Err(Error::validation("experiment.flow_kg_s", "give either flow_kg_s or flow_slpm, not both"))
                }
                [None, None] => Err(required("experiment.flow_slpm")),
            }
        }
    }
}

fn output_name(exp: &Experiment) -> Result<String> {
    let Some(e) = exp.get("experiment.output") else {
        return Ok("experiment".into());
    };
    let ok = !e.value.is_empty()
        && !e.value.starts_with('.')
        && e.value.chars().all(|c| c.is_ascii_alphanumeric() || "_-.".contains(c));
    if ok {
        Ok(e.value.clone())
    } else {
        Err(Error::validation("experiment.output", format!("`{}` is not a plain file name", e.value)))
    }
}

impl ExperimentSpec {
    /// Build a spec from scenario entries over `base`. Later entries win, so
    /// command-line overrides can simply be appended.
    pub fn from_entries(base: &ParameterSet, entries: &[Entry]) -> Result<Self> {
        let mut params = *base;
        let mut exp = BTreeMap::new();
        for e in entries {
            if e.section() == "experiment" {
                if !EXPERIMENT_KEYS.iter().any(|(k, _)| *k == e.key) {
                    return Err(e.parse_error(format!("unknown key `{}`", e.key)));
                }
                exp.insert(e.key.as_str(), e);
            } else {
                params.apply_entries([e])?;
            }
        }
        params.validate()?;
        let exp = Experiment(exp);

        let kind = exp
            .choice("experiment.kind", ExperimentKind::from_name, ExperimentKind::NAMES)?
            .ok_or_else(|| Error::validation("experiment.kind", "is required"))?;
        let default_mode = match kind {
            ExperimentKind::FlowSweep | ExperimentKind::Transient => Mode::Dynamic,
            _ => Mode::Static,
        };
        let mode = exp.choice("experiment.mode", Mode::from_name, Mode::NAMES)?.unwrap_or(default_mode);
        match (kind, mode) {
            (ExperimentKind::FlowSweep | ExperimentKind::Transient, Mode::Static) => {
                return Err(Error::validation(
                    "experiment.mode",
                    format!("a {} experiment needs the plant, use dynamic", kind.name()),
                ))
            }
            (ExperimentKind::PressureSweep, Mode::Dynamic) => {
                return Err(Error::validation(
                    "experiment.mode",
                    "the cathode pressure is a plant output in dynamic mode and cannot be swept, use static",
                ))
            }
            _ => {}
        }

        let v_cm = exp.number("experiment.v_cm", 6.0, &["V"])?;
        if !(v_cm >= 0.0) {
            return Err(Error::validation("experiment.v_cm", format!("must be >= 0, got {v_cm}")));
        }
        let record_stride = match exp.get("experiment.record_stride") {
            None => 1,
            Some(e) => {
                let v = e.number()?;
                if v < 1.0 || v.fract() != 0.0 {
                    return Err(Error::validation(&e.key, format!("must be a positive integer, got {v}")));
                }
                v as usize
            }
        };
        let method = match exp.choice("experiment.integrator", |s| Method::NAMES.contains(&s).then(|| s.to_string()), Method::NAMES)?
            .as_deref()
        {
            Some("rk4") => Method::Rk4 { dt: exp.positive("experiment.dt", 1e-3, &["s"])? },
            _ => {
                let default = IntegratorConfig::default();
                let Method::Rk45 { dt_min, dt_max, .. } = default.method else { unreachable!() };
                Method::Rk45 {
                    dt_min,
                    dt_max,
                    rel_tol: exp.positive("experiment.rel_tol", 1e-6, &[])?,
                    abs_tol: exp.positive("experiment.abs_tol", 1e-9, &[])?,
                }
            }
        };
        let integrator = IntegratorConfig { method, record_stride, ..IntegratorConfig::default() };
        integrator.validate()?;

        Ok(Self {
            kind,
            mode,
            currents: currents(&exp)?,
            swept: sweep_values(&exp, kind)?,
            params,
            v_cm,
            output: output_name(&exp)?,
            marginality: exp.positive("experiment.marginality", 0.02, &["V"])?,
            dwell: exp.positive("experiment.dwell", 1.0, &["s"])?,
            integrator,
            steady: SteadyStateOptions {
                tol: exp.positive("experiment.steady_tol", SteadyStateOptions::default().tol, &["1/s"])?,
                ..SteadyStateOptions::default()
            },
            flow_tol: exp.positive("experiment.flow_tol", 1e-8, &[])?,
        })
    }

    pub fn from_str(base: &ParameterSet, text: &str, origin: &str) -> Result<Self> {
        Self::from_entries(base, &parse_entries(text, origin)?)
    }
}

/// Read a scenario file; `overrides` are applied after its entries.
pub fn load_scenario(path: impl AsRef<Path>, base: &ParameterSet, overrides: &[Entry]) -> Result<ExperimentSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut entries = parse_entries(&text, &path.display().to_string())?;
    entries.extend(overrides.iter().cloned());
    ExperimentSpec::from_entries(base, &entries)
}
