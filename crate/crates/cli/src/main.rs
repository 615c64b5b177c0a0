use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pemfc::harness::{self, ExperimentKind, ExperimentSpec, Mode};
use pemfc::params::{self, parse_entries, parse_override, Entry, ParameterSet};
use pemfc::plant::{Disturbance, Plant, PlantInput, PlantState, STATE_NAMES};
use pemfc::sim::{find_steady_state, StateScale, SteadyStateOptions};

mod manifest;

use manifest::Manifest;

#[derive(Parser)]
#[command(name = "pemfc", version, about = "PEM fuel cell air-supply plant and polarization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Parameter file layered over the defaults.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Experiment scenario file.
    #[arg(long, value_name = "FILE")]
    scenario: Option<PathBuf>,
    /// Output directory (default: current directory).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// `key=value [unit]`, applied after the config and scenario files.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Progress messages on stderr; repeat for more.
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a transient scenario and write the trajectory.
    Simulate(Common),
    /// Run a polarization or sweep scenario: one CSV per curve plus a plot script.
    Polarize(Common),
    /// Like `polarize`, but the scenario must sweep flow, pressure or temperature.
    Sweep(Common),
    /// Solve the plant equilibrium at one operating point and print it.
    Steady {
        #[command(flatten)]
        common: Common,
        /// Compressor motor voltage [V].
        #[arg(long, default_value_t = 6.0)]
        v_cm: f64,
        /// Stack current [A].
        #[arg(long, default_value_t = 0.0)]
        current: f64,
    },
    /// Print the complete default parameter file.
    DumpDefaults,
    /// Check a config (and scenario) and print the effective parameters.
    Validate(Common),
}

type Failure = String;

fn fail(e: impl std::fmt::Display) -> Failure {
    e.to_string()
}

struct Inputs {
    params: ParameterSet,
    spec: Option<ExperimentSpec>,
    overrides: Vec<Entry>,
}

fn load(common: &Common) -> Result<Inputs, Failure> {
    let overrides = common.overrides.iter().map(|o| parse_override(o)).collect::<Result<Vec<_>, _>>().map_err(fail)?;
    let mut params = ParameterSet::default();
    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        params.apply_entries(&parse_entries(&text, &path.display().to_string()).map_err(fail)?).map_err(fail)?;
    }
    let spec = match &common.scenario {
        Some(path) => Some(harness::load_scenario(path, &params, &overrides).map_err(fail)?),
        None => {
            if let Some(e) = overrides.iter().find(|e| e.section() == "experiment") {
                return Err(format!("`{}` needs --scenario", e.key));
            }
            params.apply_entries(&overrides).map_err(fail)?;
            params.validate().map_err(fail)?;
            None
        }
    };
    if let Some(s) = &spec {
        params = s.params;
    }
    Ok(Inputs { params, spec, overrides })
}

fn out_dir(common: &Common) -> Result<PathBuf, Failure> {
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    Ok(dir)
}

fn file_tag(v: &harness::SweepValue) -> String {
    format!("{}{}", v.value, v.unit)
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect()
}

fn polarize(common: &Common, sweep_only: bool) -> Result<(), Failure> {
    let inputs = load(common)?;
    let spec = inputs.spec.as_ref().ok_or("--scenario is required")?;
    match spec.kind {
        ExperimentKind::Transient => return Err("a transient scenario is run with `simulate`".into()),
        ExperimentKind::Polarization if sweep_only => {
            return Err("a polarization scenario sweeps nothing, use `polarize`".into())
        }
        _ => {}
    }
    let dir = out_dir(common)?;
    if common.verbose > 0 {
        eprintln!("running {} ({} mode, {} currents)", spec.kind.name(), spec.mode.name(), spec.currents.len());
    }
    let curves = harness::run_sweep(spec).map_err(fail)?;
    let mut manifest = Manifest::new(if sweep_only { "sweep" } else { "polarize" }, common, &inputs, spec);
    let mut csvs = Vec::new();
    for c in &curves {
        let name = match &c.sweep {
            Some(v) => format!("{}_{}.csv", spec.output, file_tag(v)),
            None => format!("{}.csv", spec.output),
        };
        let path = dir.join(&name);
        harness::emit_csv(&c.records, spec.mode, &path).map_err(fail)?;
        for n in &c.notes {
            eprintln!("warning: {name}: {n}");
        }
        manifest.add_curve(c);
        manifest.add_output(&path)?;
        csvs.push(path);
    }
    let script = dir.join(format!("{}_plot.py", spec.output));
    harness::emit_plot_script(&csvs, &spec.output, &script).map_err(fail)?;
    manifest.add_output(&script)?;
    if spec.kind == ExperimentKind::FlowSweep {
        let spread = harness::max_pointwise_spread(&curves);
        manifest.check("max_pointwise_spread_V", spread.into());
        manifest.check("marginal", (spread < spec.marginality).into());
        if spread >= spec.marginality {
            eprintln!("warning: voltage spread {spread:.4e} V exceeds the marginality threshold {} V", spec.marginality);
        }
    }
    if curves.len() > 1 {
        manifest.check("strictly_ordered", harness::strictly_ordered(&curves).into());
    }
    manifest.write(&dir.join(format!("{}_manifest.json", spec.output)))?;
    if common.verbose > 0 {
        eprintln!("wrote {} CSV files to {}", csvs.len(), dir.display());
    }
    Ok(())
}

fn simulate(common: &Common) -> Result<(), Failure> {
    let inputs = load(common)?;
    let spec = inputs.spec.as_ref().ok_or("--scenario is required")?;
    if spec.kind != ExperimentKind::Transient {
        return Err(format!("`simulate` runs transient scenarios, this one is a {}", spec.kind.name()));
    }
    let dir = out_dir(common)?;
    let traj = harness::run_transient(spec).map_err(fail)?;
    if common.verbose > 0 {
        eprintln!("{} accepted and {} rejected steps", traj.accepted_steps, traj.rejected_steps);
    }
    let path = dir.join(format!("{}.csv", spec.output));
    harness::emit_trajectory_csv(&traj, &path).map_err(fail)?;
    let mut manifest = Manifest::new("simulate", common, &inputs, spec);
    manifest.add_output(&path)?;
    manifest.check("accepted_steps", traj.accepted_steps.into());
    manifest.check("rejected_steps", traj.rejected_steps.into());
    manifest.write(&dir.join(format!("{}_manifest.json", spec.output)))
}

fn steady(common: &Common, v_cm: f64, i_fc: f64) -> Result<(), Failure> {
    if common.scenario.is_some() {
        return Err("`steady` takes no scenario".into());
    }
    let inputs = load(common)?;
    let p = inputs.params;
    let plant = Plant::new(&p, &p.conditions);
    let (u, d) = (PlantInput { v_cm }, Disturbance { i_fc });
    let guess = PlantState::nominal_guess(&p, &p.conditions, v_cm);
    let r = find_steady_state(&plant, &guess, u, d, &StateScale::ambient(&plant), &SteadyStateOptions::default())
        .map_err(fail)?;
    let (_, q) = plant.derivative(&r.x_star, u, d).map_err(fail)?;
    let v = plant.stack_voltage(&q, d).map_err(fail)?;
    let mut out = String::new();
    for (name, value) in STATE_NAMES.iter().zip(r.x_star.to_array()) {
        out += &format!("{name} = {value:.16e}\n");
    }
    for (name, value) in [("w_cp", q.w_cp), ("p_ca", q.p_ca), ("p_o2", q.p_o2), ("v_cell", v.v_cell), ("residual", r.residual_norm)] {
        out += &format!("{name} = {value:.16e}\n");
    }
    out += &format!("iterations = {}\nconverged = {}\n", r.iterations, r.converged);
    print!("{out}");
    if r.converged {
        Ok(())
    } else {
        Err(format!("steady state did not converge (residual {:e})", r.residual_norm))
    }
}

fn validate(common: &Common) -> Result<(), Failure> {
    let inputs = load(common)?;
    print!("{}", params::serialize(&inputs.params));
    if let Some(s) = &inputs.spec {
        eprintln!("scenario ok: {} in {} mode, {} currents, {} swept values", s.kind.name(), s.mode.name(), s.currents.len(), s.swept.len());
        if s.mode == Mode::Dynamic && common.verbose > 0 {
            eprintln!("dynamic runs hold v_cm = {} V", s.v_cm);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(c) => simulate(c),
        Command::Polarize(c) => polarize(c, false),
        Command::Sweep(c) => polarize(c, true),
        Command::Steady { common, v_cm, current } => steady(common, *v_cm, *current),
        Command::DumpDefaults => {
            print!("{}", params::dump_defaults());
            Ok(())
        }
        Command::Validate(c) => validate(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
