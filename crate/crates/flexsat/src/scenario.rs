//! Scenario files: a line-oriented `section.key = value` format describing
//! one run (physics, gains, discretization, integrator, initial condition,
//! output).
//!
//! Parsing is strict: unknown keys, duplicates, and malformed values are
//! errors carrying the offending line number, so typos cannot silently fall
//! back to defaults. Keys not present fall back to the documented defaults;
//! the core physical parameters are mandatory.
//!
//! ```text
//! # comment
//! params.ell    = 2.0
//! params.ei     = 40.0
//! sim.mode      = closed_loop      # closed_loop | open_loop_truncated | open_loop_full
//! sim.flavor    = consistent      # consistent | legacy
//! init.delta    = 1e-3            # or: init.state = <4N+7 floats>
//! output.path   = flexsat_run.csv
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::{DVector, Vector3};

use crate::beam::{y_functional, BeamBasis};
use crate::dynamics::{FullState, KinematicsFlavor, RhsMode};
use crate::error::{Error, Result};
use crate::model::{Gains, PhysicalParams};
use crate::sim::{perturbed_initial, IntegratorConfig};
use crate::tol;

/// How the initial state is specified.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    /// Rest state plus delta times the canonical perturbation template.
    Delta(f64),
    /// Explicit flat state (a1 | p1 | a2 | p2 | omega | q), length 4N+7.
    /// The quaternion block is normalized on load unless it is already unit
    /// to within 1e-12 (so a re-ingested output row continues bit-exactly).
    Explicit(DVector<f64>),
}

/// A fully validated run description.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub params: PhysicalParams,
    pub gains: Gains,
    pub n_modes: usize,
    pub quad_points: usize,
    pub integrator: IntegratorConfig,
    pub mode: RhsMode,
    pub flavor: KinematicsFlavor,
    /// Constant external torque for the open-loop modes.
    pub torque: Vector3<f64>,
    pub initial: InitialCondition,
    pub output_path: PathBuf,
    /// Non-fatal findings from loading (e.g. a visibly drifted quaternion).
    pub warnings: Vec<String>,
}

impl Scenario {
    /// The defaults used when no scenario file is given: default physics,
    /// gains 0.5, four modes, dt 1e-3 over 200 s, closed loop, consistent
    /// kinematics, template perturbation 1e-3.
    pub fn builtin_default() -> Scenario {
        Scenario {
            params: PhysicalParams::default(),
            gains: Gains::default(),
            n_modes: 4,
            quad_points: 1001,
            integrator: IntegratorConfig::default(),
            mode: RhsMode::ClosedLoop,
            flavor: KinematicsFlavor::Consistent,
            torque: Vector3::zeros(),
            initial: InitialCondition::Delta(1e-3),
            output_path: PathBuf::from("flexsat_run.csv"),
            warnings: Vec::new(),
        }
    }

    /// Resolves the initial condition against a built basis.
    pub fn build_initial(&self, basis: &BeamBasis) -> Result<FullState> {
        match &self.initial {
            InitialCondition::Delta(delta) => {
                let template = default_template(basis)?;
                perturbed_initial(*delta, &template, &self.params, basis)
            }
            InitialCondition::Explicit(flat) => FullState::from_flat(self.n_modes, flat),
        }
    }
}

/// The canonical unit-y perturbation offset: first-mode deflection in the
/// first transverse plane, half as much first-mode velocity in the second,
/// and a pitch-rate offset of 0.3 before scaling; no attitude offset.
pub fn default_template(basis: &BeamBasis) -> Result<FullState> {
    let n = basis.n_modes;
    let dim = FullState::dim(n);
    let mut flat = DVector::zeros(dim);
    flat[0] = 1.0; // a1, mode 1
    flat[3 * n] = 0.5; // p2, mode 1
    flat[4 * n + 1] = 0.3; // omega_2 offset
    let state = FullState::from_flat(n, &flat)?;
    let y = y_functional(&state.beam, basis);
    if !(y.is_finite() && y > 0.0) {
        return Err(Error::Config("perturbation template has zero output functional".into()));
    }
    FullState::from_flat(n, &(flat / y))
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

struct RawScenario {
    entries: BTreeMap<String, (String, usize)>,
}

impl RawScenario {
    fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected `key = value`, got `{line}`"),
                });
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() || !key.contains('.') {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("key `{key}` is not of the form section.name"),
                });
            }
            if value.is_empty() {
                return Err(Error::Parse { line: line_no, msg: format!("key `{key}` has no value") });
            }
            if let Some((_, first_line)) = entries.get(&key) {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("duplicate key `{key}` (first set on line {first_line})"),
                });
            }
            entries.insert(key, (value, line_no));
        }
        Ok(RawScenario { entries })
    }

    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        self.entries.remove(key)
    }

    fn take_f64(&mut self, key: &str) -> Result<Option<f64>> {
        match self.take(key) {
            None => Ok(None),
            Some((v, line)) => v.parse::<f64>().map(Some).map_err(|_| Error::Parse {
                line,
                msg: format!("`{key}` expects a number, got `{v}`"),
            }),
        }
    }

    fn require_f64(&mut self, key: &str) -> Result<f64> {
        self.take_f64(key)?
            .ok_or_else(|| Error::Config(format!("scenario is missing mandatory key `{key}`")))
    }

    fn take_usize(&mut self, key: &str) -> Result<Option<usize>> {
        match self.take(key) {
            None => Ok(None),
            Some((v, line)) => v.parse::<usize>().map(Some).map_err(|_| Error::Parse {
                line,
                msg: format!("`{key}` expects a nonnegative integer, got `{v}`"),
            }),
        }
    }

    fn take_bool(&mut self, key: &str) -> Result<Option<bool>> {
        match self.take(key) {
            None => Ok(None),
            Some((v, line)) => match v.as_str() {
                "true" => Ok(Some(true)),
                "false" => Ok(Some(false)),
                _ => Err(Error::Parse {
                    line,
                    msg: format!("`{key}` expects true or false, got `{v}`"),
                }),
            },
        }
    }

    fn take_floats(&mut self, key: &str) -> Result<Option<(Vec<f64>, usize)>> {
        match self.take(key) {
            None => Ok(None),
            Some((v, line)) => {
                let mut out = Vec::new();
                for tok in v.split_whitespace() {
                    out.push(tok.parse::<f64>().map_err(|_| Error::Parse {
                        line,
                        msg: format!("`{key}` expects numbers, got `{tok}`"),
                    })?);
                }
                Ok(Some((out, line)))
            }
        }
    }
}

/// Parses and validates a scenario from text. See the module docs for the
/// format and the key vocabulary.
pub fn load_scenario(text: &str) -> Result<Scenario> {
    let mut raw = RawScenario::parse(text)?;
    let mut warnings = Vec::new();

    let params = PhysicalParams {
        ell: raw.require_f64("params.ell")?,
        ell0: raw.require_f64("params.ell0")?,
        ei: raw.require_f64("params.ei")?,
        rho_a: raw.require_f64("params.rho_a")?,
        i1: raw.require_f64("params.i1")?,
        i2: raw.require_f64("params.i2")?,
        i3: raw.require_f64("params.i3")?,
        omega0: raw.require_f64("params.omega0")?,
        kappa: raw.take_f64("params.kappa")?.unwrap_or(1.0),
        e_modulus: raw.take_f64("params.e_modulus")?,
        i_cs: raw.take_f64("params.i_cs")?,
        a_cs: raw.take_f64("params.a_cs")?,
        rho: raw.take_f64("params.rho")?,
    };
    params.validate()?;

    let nu1 = raw.take_f64("gains.nu1")?.unwrap_or(0.5);
    let nu2 = raw.take_f64("gains.nu2")?.unwrap_or(0.5);
    let nu3 = raw.take_f64("gains.nu3")?.unwrap_or(0.5);
    for (key, nu) in [("gains.nu1", nu1), ("gains.nu2", nu2), ("gains.nu3", nu3)] {
        if !(nu.is_finite() && nu > 0.0) {
            return Err(Error::Config(format!("`{key}` must be positive, got {nu}")));
        }
    }
    let gains = Gains::new(nu1, nu2, nu3)?;

    let n_modes = raw.take_usize("model.n_modes")?.unwrap_or(4);
    if !(1..=12).contains(&n_modes) {
        return Err(Error::Config(format!("`model.n_modes` must be in 1..=12, got {n_modes}")));
    }
    let quad_points = raw.take_usize("model.quad_points")?.unwrap_or(1001);
    if quad_points < 201 || quad_points % 2 == 0 {
        return Err(Error::Config(format!(
            "`model.quad_points` must be odd and >= 201, got {quad_points}"
        )));
    }

    let mut integrator = IntegratorConfig::default();
    if let Some(dt) = raw.take_f64("sim.dt")? {
        integrator.dt = dt;
    }
    if let Some(t_end) = raw.take_f64("sim.t_end")? {
        integrator.t_end = t_end;
    }
    if let Some(stride) = raw.take_usize("sim.record_every")? {
        integrator.record_every = stride;
    }
    if let Some(renorm) = raw.take_bool("sim.renormalize_q")? {
        integrator.renormalize_q = renorm;
    }
    if !(integrator.dt.is_finite() && integrator.dt > 0.0) {
        return Err(Error::Config(format!("`sim.dt` must be positive, got {}", integrator.dt)));
    }
    if !(integrator.t_end.is_finite() && integrator.t_end >= 0.0) {
        return Err(Error::Config(format!(
            "`sim.t_end` must be nonnegative, got {}",
            integrator.t_end
        )));
    }
    if integrator.record_every == 0 {
        return Err(Error::Config("`sim.record_every` must be at least 1".into()));
    }

    let mode = match raw.take("sim.mode") {
        None => RhsMode::ClosedLoop,
        Some((v, line)) => match v.as_str() {
            "closed_loop" => RhsMode::ClosedLoop,
            "open_loop_truncated" => RhsMode::OpenLoopTruncated,
            "open_loop_full" => RhsMode::OpenLoopFull,
            _ => {
                return Err(Error::Parse {
                    line,
                    msg: format!(
                        "`sim.mode` must be closed_loop, open_loop_truncated or open_loop_full, \
                         got `{v}`"
                    ),
                })
            }
        },
    };
    let flavor = match raw.take("sim.flavor") {
        None => KinematicsFlavor::Consistent,
        Some((v, line)) => match v.as_str() {
            "consistent" => KinematicsFlavor::Consistent,
            "legacy" => KinematicsFlavor::Legacy,
            _ => {
                return Err(Error::Parse {
                    line,
                    msg: format!("`sim.flavor` must be consistent or legacy, got `{v}`"),
                })
            }
        },
    };

    let torque = match raw.take_floats("sim.torque")? {
        None => Vector3::zeros(),
        Some((vals, line)) => {
            if vals.len() != 3 {
                return Err(Error::Parse {
                    line,
                    msg: format!("`sim.torque` expects exactly 3 numbers, got {}", vals.len()),
                });
            }
            Vector3::new(vals[0], vals[1], vals[2])
        }
    };

    let delta = raw.take_f64("init.delta")?;
    let explicit = raw.take_floats("init.state")?;
    let initial = match (delta, explicit) {
        (Some(_), Some((_, line))) => {
            return Err(Error::Parse {
                line,
                msg: "`init.delta` and `init.state` are mutually exclusive".into(),
            })
        }
        (Some(d), None) => {
            if !(d.is_finite() && d >= 0.0) {
                return Err(Error::Config(format!("`init.delta` must be nonnegative, got {d}")));
            }
            InitialCondition::Delta(d)
        }
        (None, None) => InitialCondition::Delta(1e-3),
        (None, Some((vals, line))) => {
            let dim = FullState::dim(n_modes);
            if vals.len() != dim {
                return Err(Error::Parse {
                    line,
                    msg: format!(
                        "`init.state` expects {dim} numbers for {n_modes} modes, got {}",
                        vals.len()
                    ),
                });
            }
            let mut flat = DVector::from_vec(vals);
            normalize_loaded_quaternion(&mut flat, n_modes, &mut warnings)?;
            InitialCondition::Explicit(flat)
        }
    };

    let output_path = match raw.take("output.path") {
        None => PathBuf::from("flexsat_run.csv"),
        Some((v, _)) => PathBuf::from(v),
    };

    if let Some((key, (_, line))) = raw.entries.iter().next() {
        return Err(Error::Parse { line: *line, msg: format!("unknown key `{key}`") });
    }

    Ok(Scenario {
        params,
        gains,
        n_modes,
        quad_points,
        integrator,
        mode,
        flavor,
        torque,
        initial,
        output_path,
        warnings,
    })
}

/// Scales the quaternion block of a flat state to unit norm. Drift at or
/// below 1e-12 is left untouched so that re-ingesting an emitted row
/// continues a run bit-exactly; drift above 1e-6 is reported as a warning.
fn normalize_loaded_quaternion(
    flat: &mut DVector<f64>,
    n_modes: usize,
    warnings: &mut Vec<String>,
) -> Result<()> {
    let r = 4 * n_modes + 3;
    let norm =
        (flat[r] * flat[r] + flat[r + 1] * flat[r + 1] + flat[r + 2] * flat[r + 2]
            + flat[r + 3] * flat[r + 3])
            .sqrt();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(Error::Config(format!(
            "`init.state` quaternion block has unusable norm {norm}"
        )));
    }
    let drift = (norm - 1.0).abs();
    if drift <= tol::QUAT_LOAD_SKIP {
        return Ok(());
    }
    if drift > tol::QUAT_LOAD_WARN {
        warnings
            .push(format!("initial quaternion norm off by {drift:.3e}; renormalizing"));
    }
    for idx in r..r + 4 {
        flat[idx] /= norm;
    }
    Ok(())
}

/// Loads a scenario from a file path.
pub fn load_scenario_file(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    load_scenario(&text)
}
