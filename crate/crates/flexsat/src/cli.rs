//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 validation or input error,
//! 3 divergence during integration, 4 verify-check failure.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::beam::BeamBasis;
use crate::dynamics::{equilibrium_state, KinematicsFlavor, RhsMode};
use crate::error::{Error, Result};
use crate::model::{Torque, TorqueSource};
use crate::output::create_csv_sink;
use crate::scenario::{load_scenario_file, InitialCondition, Scenario};
use crate::sim::{integrate, rk4_stability_limit, RhsContext};
use crate::verify::run_all_checks;

#[derive(Debug, Parser)]
#[command(
    name = "flexsat",
    version,
    about = "Attitude and flexible-boom dynamics for a satellite on a circular orbit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate a scenario and stream diagnostics to CSV.
    Simulate(SimulateArgs),
    /// Print the modal table of the boom discretization.
    Modes(CommonArgs),
    /// Run the built-in self-checks (seed via FLEXSAT_SEED, default 42).
    Verify(CommonArgs),
    /// Print the rest state and its right-hand-side residual.
    Equilibrium(CommonArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Scenario file describing the run.
    #[arg(long)]
    scenario: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Scenario file; the built-in defaults are used when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Args, Default)]
struct Overrides {
    /// Output CSV path (overrides the scenario's output.path).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dynamics variant to integrate.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Quaternion kinematics variant.
    #[arg(long, value_enum)]
    flavor: Option<FlavorArg>,
    /// Integrator step in seconds.
    #[arg(long)]
    dt: Option<f64>,
    /// Final time in seconds.
    #[arg(long)]
    t_end: Option<f64>,
    /// Retained modes per transverse plane (1..=12).
    #[arg(long)]
    modes: Option<usize>,
    /// Start from rest plus this multiple of the canonical perturbation
    /// template (replaces the scenario's initial condition).
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(Debug, Copy, Clone, ValueEnum)]
enum ModeArg {
    /// Feedback-controlled equations.
    Closed,
    /// Open loop with the slow cross terms dropped.
    OpenTrunc,
    /// Open loop with the full centrifugal coupling.
    OpenFull,
}

impl From<ModeArg> for RhsMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Closed => RhsMode::ClosedLoop,
            ModeArg::OpenTrunc => RhsMode::OpenLoopTruncated,
            ModeArg::OpenFull => RhsMode::OpenLoopFull,
        }
    }
}

#[derive(Debug, Copy, Clone, ValueEnum)]
enum FlavorArg {
    /// Rates measured relative to the orbital frame everywhere.
    Consistent,
    /// Fixed sign pattern kept for comparison runs; exactly norm-preserving
    /// but matches `consistent` only near zero roll and pitch.
    Legacy,
}

impl From<FlavorArg> for KinematicsFlavor {
    fn from(f: FlavorArg) -> Self {
        match f {
            FlavorArg::Consistent => KinematicsFlavor::Consistent,
            FlavorArg::Legacy => KinematicsFlavor::Legacy,
        }
    }
}

/// Parses `args` and runs the requested subcommand, returning the process
/// exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Divergence { .. } => 3,
                _ => 2,
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Simulate(args) => {
            let scenario = apply_overrides(load_scenario_file(&args.scenario)?, args.overrides)?;
            simulate_cmd(&scenario)?;
            Ok(0)
        }
        Command::Modes(common) => {
            modes_cmd(&common_scenario(common)?)?;
            Ok(0)
        }
        Command::Verify(common) => verify_cmd(&common_scenario(common)?),
        Command::Equilibrium(common) => {
            equilibrium_cmd(&common_scenario(common)?)?;
            Ok(0)
        }
    }
}

fn common_scenario(common: CommonArgs) -> Result<Scenario> {
    let scenario = match common.scenario {
        Some(path) => load_scenario_file(&path)?,
        None => Scenario::builtin_default(),
    };
    apply_overrides(scenario, common.overrides)
}

fn apply_overrides(mut sc: Scenario, o: Overrides) -> Result<Scenario> {
    if let Some(out) = o.out {
        sc.output_path = out;
    }
    if let Some(mode) = o.mode {
        sc.mode = mode.into();
    }
    if let Some(flavor) = o.flavor {
        sc.flavor = flavor.into();
    }
    if let Some(dt) = o.dt {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Config(format!("--dt must be positive, got {dt}")));
        }
        sc.integrator.dt = dt;
    }
    if let Some(t_end) = o.t_end {
        if !(t_end.is_finite() && t_end >= 0.0) {
            return Err(Error::Config(format!("--t-end must be nonnegative, got {t_end}")));
        }
        sc.integrator.t_end = t_end;
    }
    if let Some(delta) = o.delta {
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(Error::Config(format!("--delta must be nonnegative, got {delta}")));
        }
        sc.initial = InitialCondition::Delta(delta);
    }
    if let Some(modes) = o.modes {
        if !(1..=12).contains(&modes) {
            return Err(Error::Config(format!("--modes must be in 1..=12, got {modes}")));
        }
        if modes != sc.n_modes {
            if matches!(sc.initial, InitialCondition::Explicit(_)) {
                return Err(Error::Config(
                    "--modes conflicts with the scenario's explicit init.state; \
                     pass --delta to start from the template instead"
                        .into(),
                ));
            }
            sc.n_modes = modes;
        }
    }
    Ok(sc)
}

fn simulate_cmd(sc: &Scenario) -> Result<()> {
    for w in &sc.warnings {
        eprintln!("warning: {w}");
    }
    let basis = BeamBasis::build(&sc.params, sc.n_modes, sc.quad_points)?;
    let limit = rk4_stability_limit(&sc.params, &basis);
    if sc.integrator.dt > limit {
        eprintln!(
            "warning: dt {:.3e} s exceeds the RK4 stability bound {:.3e} s for the fastest \
             retained mode; expect divergence",
            sc.integrator.dt, limit
        );
    }
    let initial = sc.build_initial(&basis)?;
    let ctx = RhsContext {
        mode: sc.mode,
        flavor: sc.flavor,
        params: &sc.params,
        gains: &sc.gains,
        basis: &basis,
        external: Torque { components: sc.torque, source: TorqueSource::Control },
    };
    let mut sink = create_csv_sink(&sc.output_path, sc.n_modes)?;
    let summary = integrate(&initial, &sc.integrator, &ctx, &mut sink)?;
    sink.finish()?;
    println!("wrote {}", sc.output_path.display());
    println!(
        "steps {}   dt {:.6e} s   t_end {:.6e} s",
        summary.steps, sc.integrator.dt, sc.integrator.t_end
    );
    println!(
        "V {:.6e} -> {:.6e}   (min {:.6e}, max step increase {:.3e})",
        summary.initial_v, summary.final_v, summary.min_v, summary.max_v_step_increase
    );
    println!(
        "sup y {:.6e}   max |decay residual| {:.3e}   max q drift {:.3e}",
        summary.sup_y, summary.max_decay_residual, summary.max_q_drift
    );
    println!(
        "max |u| ({:.3e}, {:.3e}, {:.3e})",
        summary.max_abs_u[0], summary.max_abs_u[1], summary.max_abs_u[2]
    );
    Ok(())
}

fn modes_cmd(sc: &Scenario) -> Result<()> {
    let basis = BeamBasis::build(&sc.params, sc.n_modes, sc.quad_points)?;
    let c_sqrt = sc.params.stiffness_ratio().sqrt();
    println!(
        "{:>4}  {:>18}  {:>18}  {:>18}  {:>18}",
        "mode", "beta*l", "freq [rad/s]", "period [s]", "coupling b"
    );
    for k in 0..basis.n_modes {
        let freq = basis.beta[k].powi(2) * c_sqrt;
        println!(
            "{:>4}  {:>18.12}  {:>18.12}  {:>18.12}  {:>18.12}",
            k + 1,
            basis.beta_l[k],
            freq,
            2.0 * std::f64::consts::PI / freq,
            basis.b[k]
        );
    }
    println!(
        "RK4 stability bound: dt < {:.6e} s with {} retained modes",
        rk4_stability_limit(&sc.params, &basis),
        basis.n_modes
    );
    Ok(())
}

fn verify_cmd(sc: &Scenario) -> Result<i32> {
    let basis = BeamBasis::build(&sc.params, sc.n_modes, sc.quad_points)?;
    let seed = seed_from_env()?;
    println!("seed {seed}");
    let results = run_all_checks(&sc.params, &sc.gains, &basis, seed);
    let mut all_ok = true;
    for r in &results {
        let verdict = if r.passed { "PASS" } else { "FAIL" };
        println!("check {}: {verdict} ({})", r.name, r.detail);
        all_ok &= r.passed;
    }
    Ok(if all_ok { 0 } else { 4 })
}

fn equilibrium_cmd(sc: &Scenario) -> Result<()> {
    let basis = BeamBasis::build(&sc.params, sc.n_modes, sc.quad_points)?;
    let rest = equilibrium_state(&sc.params, &basis);
    let join = |v: &[f64]| {
        v.iter().map(|x| format!("{x:.16e}")).collect::<Vec<_>>().join(" ")
    };
    println!("a1 = {}", join(rest.beam.a1.as_slice()));
    println!("p1 = {}", join(rest.beam.p1.as_slice()));
    println!("a2 = {}", join(rest.beam.a2.as_slice()));
    println!("p2 = {}", join(rest.beam.p2.as_slice()));
    println!("omega = {}", join(rest.rigid.omega.as_slice()));
    println!(
        "q = {}",
        join(&[rest.rigid.q.v.x, rest.rigid.q.v.y, rest.rigid.q.v.z, rest.rigid.q.s])
    );
    let check = crate::verify::check_equilibrium(&sc.params, &sc.gains, &basis);
    let verdict = if check.passed { "PASS" } else { "FAIL" };
    println!("residual: {verdict} ({})", check.detail);
    Ok(())
}

/// Seed for the randomized checks: FLEXSAT_SEED when set, 42 otherwise.
fn seed_from_env() -> Result<u64> {
    match std::env::var("FLEXSAT_SEED") {
        Ok(raw) => raw.trim().parse::<u64>().map_err(|_| {
            Error::Config(format!("FLEXSAT_SEED must be a nonnegative integer, got `{raw}`"))
        }),
        Err(std::env::VarError::NotPresent) => Ok(42),
        Err(err) => Err(Error::Config(format!("FLEXSAT_SEED is unreadable: {err}"))),
    }
}
