//! Fixed-step time integration with per-step diagnostics.
//!
//! Classical RK4 on the flat state vector. Every step evaluates the
//! diagnostic set (boom energy, its analytic rate, feedback functionals,
//! output functional, distances, torques); records go to a sink at a
//! configurable stride, and extrema are accumulated into a run summary.
//! Fixed order of operations end to end keeps runs bit-reproducible.

use nalgebra::DVector;

use crate::beam::{beam_energy, gamma_functionals, y_functional, BeamBasis, GammaValues};
use crate::control::feedback_torque;
use crate::dynamics::{
    check_state, energy_rate_along, equilibrium_state, rhs_for_mode, FullState, KinematicsFlavor,
    RhsMode,
};
use crate::error::{Error, Result};
use crate::model::{dist_x, gravity_torque_unchecked, Gains, PhysicalParams, Torque, TorqueSource};

/// Fixed-step integrator settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    /// Step size (s).
    pub dt: f64,
    /// Horizon (s); the run takes round(t_end/dt) steps. Zero runs no steps
    /// and reports the initial diagnostics only.
    pub t_end: f64,
    /// Rescale the quaternion to unit norm after every step (drift is
    /// measured before rescaling either way).
    pub renormalize_q: bool,
    /// Emit every record_every-th record; the final state is always emitted.
    pub record_every: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig { dt: 1e-3, t_end: 200.0, renormalize_q: true, record_every: 100 }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Config(format!("integrator.dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::Config(format!(
                "integrator.t_end must be nonnegative, got {}",
                self.t_end
            )));
        }
        if self.record_every == 0 {
            return Err(Error::Config("integrator.record_every must be at least 1".into()));
        }
        Ok(())
    }

    fn n_steps(&self) -> u64 {
        (self.t_end / self.dt).round() as u64
    }
}

/// Everything the right-hand side needs besides the state.
#[derive(Debug, Clone, Copy)]
pub struct RhsContext<'a> {
    pub mode: RhsMode,
    pub flavor: KinematicsFlavor,
    pub params: &'a PhysicalParams,
    pub gains: &'a Gains,
    pub basis: &'a BeamBasis,
    /// External torque for the open-loop modes; ignored in closed loop.
    pub external: Torque,
}

impl RhsContext<'_> {
    pub fn eval(&self, state: &FullState) -> Result<DVector<f64>> {
        rhs_for_mode(state, self.mode, self.flavor, self.params, self.gains, self.basis, &self.external)
    }

    fn eval_flat(&self, flat: &DVector<f64>) -> Result<DVector<f64>> {
        let state = FullState::from_flat(self.basis.n_modes, flat)?;
        self.eval(&state)
    }

    /// Torque applied at a state: the feedback law in closed loop, the
    /// configured external torque otherwise.
    pub fn applied_torque(&self, state: &FullState) -> Result<Torque> {
        match self.mode {
            RhsMode::ClosedLoop => feedback_torque(state, self.params, self.gains, self.basis),
            _ => Ok(self.external),
        }
    }
}

/// Diagnostics evaluated at one recorded instant.
#[derive(Debug, Clone)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub state: FullState,
    /// Boom energy V.
    pub v: f64,
    /// Analytic dV/dt: inner product of the energy gradient with the
    /// assembled derivative (not a finite difference).
    pub vdot: f64,
    pub gamma: GammaValues,
    /// vdot + nu1 g1^2 + nu2 g2^2 + nu3 g3^2; an algebraic zero of the
    /// closed loop.
    pub decay_residual: f64,
    /// Output functional y.
    pub y: f64,
    /// |q| - 1 before renormalization for the step that produced this state
    /// (zero for the initial state).
    pub q_drift: f64,
    /// Distance to the rest state in the energy-weighted state norm.
    pub dist_x: f64,
    /// Torque applied at this state.
    pub u: Torque,
    /// Gravity-gradient torque at this attitude.
    pub tau_g: Torque,
}

/// Receives records in time order within a run.
pub trait RecordSink {
    fn record(&mut self, rec: &DiagnosticsRecord) -> Result<()>;
}

/// Discards records; summaries only.
pub struct NullSink;

impl RecordSink for NullSink {
    fn record(&mut self, _rec: &DiagnosticsRecord) -> Result<()> {
        Ok(())
    }
}

/// Collects records in memory.
#[derive(Default)]
pub struct MemorySink {
    pub records: Vec<DiagnosticsRecord>,
}

impl RecordSink for MemorySink {
    fn record(&mut self, rec: &DiagnosticsRecord) -> Result<()> {
        self.records.push(rec.clone());
        Ok(())
    }
}

/// Extrema and endpoints of one integration.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub final_state: FullState,
    pub steps: u64,
    pub initial_v: f64,
    pub final_v: f64,
    pub min_v: f64,
    pub max_v: f64,
    /// Largest single-step increase of V (0 when V never increased).
    pub max_v_step_increase: f64,
    /// Largest |decay_residual| seen.
    pub max_decay_residual: f64,
    /// Largest pre-renormalization | |q| - 1 | per step.
    pub max_q_drift: f64,
    pub sup_y: f64,
    pub sup_dist_x: f64,
    pub max_abs_u: [f64; 3],
    /// Linear-stability step bound 2*sqrt(2)/omega_N for the fastest
    /// retained mode; dt above this is allowed but flagged.
    pub stability_limit_dt: f64,
}

/// Largest stable RK4 step for the fastest retained beam mode: the
/// undamped mode has purely imaginary eigenvalues +-i omega_N, and RK4 is
/// stable on the imaginary axis up to |omega dt| = 2*sqrt(2).
pub fn rk4_stability_limit(params: &PhysicalParams, basis: &BeamBasis) -> f64 {
    let omega_max = basis.beta[basis.n_modes - 1].powi(2) * params.stiffness_ratio().sqrt();
    2.0 * std::f64::consts::SQRT_2 / omega_max
}

/// One classical RK4 step; `k1` is the derivative at `state` (reused from
/// the diagnostics pass). Returns the next state and the signed quaternion
/// norm drift |q| - 1 measured before any renormalization.
pub fn rk4_step_with_k1(
    ctx: &RhsContext,
    state: &FullState,
    k1: &DVector<f64>,
    dt: f64,
    renormalize: bool,
) -> Result<(FullState, f64)> {
    let n = ctx.basis.n_modes;
    let y0 = state.to_flat();
    let k2 = ctx.eval_flat(&(&y0 + (0.5 * dt) * k1))?;
    let k3 = ctx.eval_flat(&(&y0 + (0.5 * dt) * &k2))?;
    let k4 = ctx.eval_flat(&(&y0 + dt * &k3))?;
    let mut y1 = &y0 + (dt / 6.0) * (k1 + 2.0 * &k2 + 2.0 * &k3 + &k4);
    let r = 4 * n;
    let qn = (y1[r + 3] * y1[r + 3]
        + y1[r + 4] * y1[r + 4]
        + y1[r + 5] * y1[r + 5]
        + y1[r + 6] * y1[r + 6])
        .sqrt();
    let drift = qn - 1.0;
    if !(qn.is_finite() && qn > 0.0) {
        return Err(Error::InvalidState("quaternion norm collapsed".into()));
    }
    if renormalize {
        let scale = 1.0 / qn;
        for idx in r + 3..r + 7 {
            y1[idx] *= scale;
        }
    }
    let next = FullState::from_flat(n, &y1)?;
    if !next.is_finite() {
        return Err(Error::InvalidState("state left the finite range".into()));
    }
    Ok((next, drift))
}

/// As [`rk4_step_with_k1`], evaluating the first stage internally.
pub fn rk4_step(
    ctx: &RhsContext,
    state: &FullState,
    dt: f64,
    renormalize: bool,
) -> Result<(FullState, f64)> {
    let k1 = ctx.eval(state)?;
    rk4_step_with_k1(ctx, state, &k1, dt, renormalize)
}

fn diagnostics(
    ctx: &RhsContext,
    reference: &FullState,
    t: f64,
    state: &FullState,
    deriv: &DVector<f64>,
    q_drift: f64,
) -> Result<DiagnosticsRecord> {
    let v = beam_energy(&state.beam, ctx.params, ctx.basis);
    let vdot = energy_rate_along(state, deriv, ctx.params, ctx.basis);
    let gamma = gamma_functionals(&state.beam, ctx.basis);
    let dissipation = ctx.gains.nu1 * gamma.gamma1 * gamma.gamma1
        + ctx.gains.nu2 * gamma.gamma2 * gamma.gamma2
        + ctx.gains.nu3 * gamma.gamma3 * gamma.gamma3;
    Ok(DiagnosticsRecord {
        t,
        state: state.clone(),
        v,
        vdot,
        gamma,
        decay_residual: vdot + dissipation,
        y: y_functional(&state.beam, ctx.basis),
        q_drift,
        dist_x: dist_x(state, reference, ctx.params, ctx.basis),
        u: ctx.applied_torque(state)?,
        tau_g: Torque {
            components: gravity_torque_unchecked(ctx.params, &state.rigid.q),
            source: TorqueSource::Gravity,
        },
    })
}

/// Integrates from `initial` for round(t_end/dt) fixed steps, streaming
/// records to `sink` and accumulating extrema. Time stamps are k*dt from
/// the step counter, never accumulated.
pub fn integrate(
    initial: &FullState,
    config: &IntegratorConfig,
    ctx: &RhsContext,
    sink: &mut dyn RecordSink,
) -> Result<RunSummary> {
    config.validate()?;
    check_state(initial, ctx.basis)?;
    let reference = equilibrium_state(ctx.params, ctx.basis);
    let n_steps = config.n_steps();
    let dt = config.dt;

    let mut state = initial.clone();
    let mut deriv = ctx.eval(&state)?;
    let mut q_drift = 0.0;
    let first = diagnostics(ctx, &reference, 0.0, &state, &deriv, q_drift)?;

    let mut min_v = first.v;
    let mut max_v = first.v;
    let initial_v = first.v;
    let mut prev_v = first.v;
    let mut max_v_step_increase = 0.0_f64;
    let mut max_decay_residual = first.decay_residual.abs();
    let mut max_q_drift = 0.0_f64;
    let mut sup_y = first.y;
    let mut sup_dist_x = first.dist_x;
    let mut max_abs_u = [0.0_f64; 3];
    fn update_u(m: &mut [f64; 3], u: &Torque) {
        for (acc, comp) in m.iter_mut().zip(u.components.iter()) {
            *acc = acc.max(comp.abs());
        }
    }
    update_u(&mut max_abs_u, &first.u);

    let mut last = first;
    for k in 0..n_steps {
        if k % config.record_every as u64 == 0 {
            sink.record(&last)?;
        }
        let (next, drift) = rk4_step_with_k1(ctx, &state, &deriv, dt, config.renormalize_q)
            .map_err(|_| Error::Divergence { t: (k + 1) as f64 * dt, step: k + 1 })?;
        state = next;
        q_drift = drift;
        deriv = ctx
            .eval(&state)
            .map_err(|_| Error::Divergence { t: (k + 1) as f64 * dt, step: k + 1 })?;
        let t = (k + 1) as f64 * dt;
        let rec = diagnostics(ctx, &reference, t, &state, &deriv, q_drift)?;
        min_v = min_v.min(rec.v);
        max_v = max_v.max(rec.v);
        max_v_step_increase = max_v_step_increase.max(rec.v - prev_v);
        prev_v = rec.v;
        max_decay_residual = max_decay_residual.max(rec.decay_residual.abs());
        max_q_drift = max_q_drift.max(drift.abs());
        sup_y = sup_y.max(rec.y);
        sup_dist_x = sup_dist_x.max(rec.dist_x);
        update_u(&mut max_abs_u, &rec.u);
        last = rec;
    }
    sink.record(&last)?;

    Ok(RunSummary {
        final_state: state,
        steps: n_steps,
        initial_v,
        final_v: last.v,
        min_v,
        max_v,
        max_v_step_increase,
        max_decay_residual,
        max_q_drift,
        sup_y,
        sup_dist_x,
        max_abs_u,
        stability_limit_dt: rk4_stability_limit(ctx.params, ctx.basis),
    })
}

// ---------------------------------------------------------------------------
// Perturbation sweep
// ---------------------------------------------------------------------------

/// Amplitude sweep around the rest state.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    /// Perturbation amplitudes, nonnegative and strictly ascending.
    pub deltas: Vec<f64>,
    /// State-space offset added to the rest state after scaling by delta;
    /// conventionally normalized to unit y.
    pub template: FullState,
    /// Horizon per run (s).
    pub horizon: f64,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.deltas.is_empty() {
            return Err(Error::Config("sweep needs at least one delta".into()));
        }
        if self.deltas.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::Config("sweep deltas must be nonnegative".into()));
        }
        if self.deltas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("sweep deltas must be strictly ascending".into()));
        }
        if !self.template.is_finite() {
            return Err(Error::InvalidState("sweep template has non-finite entries".into()));
        }
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return Err(Error::Config("sweep horizon must be nonnegative".into()));
        }
        Ok(())
    }
}

/// One sweep row. On divergence the suprema are NaN and the flag is set;
/// the sweep itself continues.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub delta: f64,
    pub initial_v: f64,
    pub sup_y: f64,
    pub sup_dist_x: f64,
    pub diverged: bool,
}

/// Builds the initial state for one sweep amplitude: rest state plus
/// delta times the template offset, quaternion rescaled to unit norm.
pub fn perturbed_initial(
    delta: f64,
    template: &FullState,
    params: &PhysicalParams,
    basis: &BeamBasis,
) -> Result<FullState> {
    let eq = equilibrium_state(params, basis).to_flat();
    let flat = &eq + delta * template.to_flat();
    let mut state = FullState::from_flat(basis.n_modes, &flat)?;
    let qn = state.rigid.q.norm();
    if !(qn.is_finite() && qn > 0.0) {
        return Err(Error::InvalidState("perturbed quaternion has zero norm".into()));
    }
    state.rigid.q = state.rigid.q.normalized();
    Ok(state)
}

/// Runs the amplitude sweep; rows come back in the deltas' order.
pub fn stability_sweep(
    sweep: &SweepConfig,
    config: &IntegratorConfig,
    ctx: &RhsContext,
) -> Result<Vec<SweepRow>> {
    sweep.validate()?;
    config.validate()?;
    let mut run_cfg = *config;
    run_cfg.t_end = sweep.horizon;
    let mut rows = Vec::with_capacity(sweep.deltas.len());
    for &delta in &sweep.deltas {
        let initial = perturbed_initial(delta, &sweep.template, ctx.params, ctx.basis)?;
        let initial_v = beam_energy(&initial.beam, ctx.params, ctx.basis);
        match integrate(&initial, &run_cfg, ctx, &mut NullSink) {
            Ok(summary) => rows.push(SweepRow {
                delta,
                initial_v,
                sup_y: summary.sup_y,
                sup_dist_x: summary.sup_dist_x,
                diverged: false,
            }),
            Err(Error::Divergence { .. }) => rows.push(SweepRow {
                delta,
                initial_v,
                sup_y: f64::NAN,
                sup_dist_x: f64::NAN,
                diverged: true,
            }),
            Err(other) => return Err(other),
        }
    }
    Ok(rows)
}
