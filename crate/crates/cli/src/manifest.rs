//! Run manifest: what went in, what came out, and hashes of both. Contains
//! no timestamps or absolute paths so identical runs give identical files.

use std::path::Path;

use pemfc::harness::{Curve, ExperimentSpec, PointStatus};
use pemfc::params::serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::{Common, Failure, Inputs};

fn sha256(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub struct Manifest {
    root: Map<String, Value>,
    outputs: Vec<Value>,
    curves: Vec<Value>,
    checks: Map<String, Value>,
}

impl Manifest {
    pub fn new(command: &str, common: &Common, inputs: &Inputs, spec: &ExperimentSpec) -> Self {
        let path = |p: &Option<std::path::PathBuf>| p.as_ref().map(|p| p.display().to_string());
        let file_hash = |p: &Option<std::path::PathBuf>| p.as_ref().and_then(|p| std::fs::read(p).ok()).map(|b| sha256(&b));
        let mut root = Map::new();
        root.insert("tool".into(), json!("pemfc"));
        root.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
        root.insert("command".into(), json!(command));
        root.insert(
            "inputs".into(),
            json!({
                "config": path(&common.config),
                "config_sha256": file_hash(&common.config),
                "scenario": path(&common.scenario),
                "scenario_sha256": file_hash(&common.scenario),
                "overrides": inputs.overrides.iter().map(|e| {
                    let unit = e.unit.as_ref().map(|u| format!(" [{u}]")).unwrap_or_default();
                    format!("{} = {}{unit}", e.key, e.value)
                }).collect::<Vec<_>>(),
            }),
        );
        root.insert("parameter_sha256".into(), json!(sha256(serialize(&inputs.params).as_bytes())));
        root.insert(
            "experiment".into(),
            json!({
                "kind": spec.kind.name(),
                "mode": spec.mode.name(),
                "currents_A": spec.currents,
                "swept": spec.swept.iter().map(|s| json!({"value": s.value, "unit": s.unit, "si": s.si})).collect::<Vec<_>>(),
                "v_cm_V": spec.v_cm,
                "integrator": spec.integrator.method.name(),
            }),
        );
        Self { root, outputs: Vec::new(), curves: Vec::new(), checks: Map::new() }
    }

    pub fn add_output(&mut self, path: &Path) -> Result<(), Failure> {
        let bytes = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        self.outputs.push(json!({"file": name, "bytes": bytes.len(), "sha256": sha256(&bytes)}));
        Ok(())
    }

    pub fn add_curve(&mut self, c: &Curve) {
        let count = |s: PointStatus| c.records.iter().filter(|r| r.dynamic.is_some_and(|d| d.status == s)).count();
        self.curves.push(json!({
            "sweep_value": c.sweep.as_ref().map(|s| s.value),
            "points": c.records.len(),
            "not_converged": count(PointStatus::NotConverged),
            "out_of_envelope": count(PointStatus::OutOfEnvelope),
        }));
    }

    pub fn check(&mut self, name: &str, value: Value) {
        self.checks.insert(name.into(), value);
    }

    pub fn write(mut self, path: &Path) -> Result<(), Failure> {
        self.root.insert("outputs".into(), Value::Array(self.outputs));
        if !self.curves.is_empty() {
            self.root.insert("curves".into(), Value::Array(self.curves));
        }
        self.root.insert("checks".into(), Value::Object(self.checks));
        let mut text = serde_json::to_string_pretty(&Value::Object(self.root)).expect("manifest is plain JSON");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
    }
}
