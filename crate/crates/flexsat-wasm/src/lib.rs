//! Browser bindings for the flexsat dynamics: a small fixed-configuration
//! handle exposing the boom's mode shapes, closed-loop energy decay runs,
//! and reconstructed boom deflection frames. The page under `www/` drives
//! these three operations with sliders and canvases.
//!
//! Everything here is plain Rust over the `flexsat` crate; the methods
//! also run natively, which is what the unit tests do.

use wasm_bindgen::prelude::*;

use flexsat::beam::BeamBasis;
use flexsat::dynamics::{KinematicsFlavor, RhsMode};
use flexsat::model::{Gains, PhysicalParams, Torque, TorqueSource};
use flexsat::scenario::default_template;
use flexsat::sim::{
    integrate, perturbed_initial, rk4_stability_limit, IntegratorConfig, MemorySink, RhsContext,
};

/// Step used by the demo runs; well under the RK4 stability bound of the
/// fourth retained mode (about 1.6e-2 s for the default physics).
const DEMO_DT: f64 = 2e-3;

#[wasm_bindgen]
pub struct Demo {
    params: PhysicalParams,
    basis: BeamBasis,
}

fn err_str(e: flexsat::Error) -> String {
    e.to_string()
}

#[wasm_bindgen]
impl Demo {
    /// Builds the default configuration: four modes per transverse plane
    /// on the stock physics.
    #[wasm_bindgen(constructor)]
    pub fn new() -> Result<Demo, String> {
        let params = PhysicalParams::default();
        let basis = BeamBasis::build(&params, 4, 1001).map_err(err_str)?;
        Ok(Demo { params, basis })
    }

    pub fn mode_count(&self) -> usize {
        self.basis.n_modes
    }

    /// Boom length past the clamp (m).
    pub fn boom_length(&self) -> f64 {
        self.basis.ell
    }

    /// Natural frequency of one mode (rad/s); `mode` is 1-based.
    pub fn mode_frequency(&self, mode: usize) -> Result<f64, String> {
        let k = self.mode_index(mode)?;
        Ok(self.basis.beta[k].powi(2) * self.params.stiffness_ratio().sqrt())
    }

    /// Largest integrator step that keeps the fastest retained mode stable.
    pub fn stable_dt(&self) -> f64 {
        rk4_stability_limit(&self.params, &self.basis)
    }

    /// One mode shape sampled on an even grid over [0, length]; `mode` is
    /// 1-based. Values are scaled so the largest magnitude is 1.
    pub fn mode_shape(&self, mode: usize, n_points: usize) -> Result<Vec<f64>, String> {
        let k = self.mode_index(mode)?;
        if n_points < 2 {
            return Err("n_points must be at least 2".into());
        }
        let mut out = Vec::with_capacity(n_points);
        for i in 0..n_points {
            let zeta = self.basis.ell * i as f64 / (n_points - 1) as f64;
            out.push(self.basis.shape(k, zeta).map_err(err_str)?);
        }
        let peak = out.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if peak > 0.0 {
            for v in &mut out {
                *v /= peak;
            }
        }
        Ok(out)
    }

    /// Closed-loop run from rest plus `delta` times the canonical
    /// template, all three gains set to `nu`. Returns at most `max_points`
    /// samples flattened as [t, V, y] triples.
    pub fn run_decay(
        &self,
        nu: f64,
        delta: f64,
        t_end: f64,
        max_points: usize,
    ) -> Result<Vec<f64>, String> {
        if max_points < 2 {
            return Err("max_points must be at least 2".into());
        }
        let records = self.closed_loop_records(nu, delta, t_end, max_points)?;
        let mut out = Vec::with_capacity(records.len() * 3);
        for r in &records {
            out.extend([r.0, r.1, r.2]);
        }
        Ok(out)
    }

    /// First-plane boom deflection over time: `n_frames` profiles of
    /// w1(zeta) on an even `n_grid`-point grid, flattened frame-major.
    pub fn boom_frames(
        &self,
        nu: f64,
        delta: f64,
        t_end: f64,
        n_frames: usize,
        n_grid: usize,
    ) -> Result<Vec<f64>, String> {
        if n_frames < 2 || n_grid < 2 {
            return Err("n_frames and n_grid must be at least 2".into());
        }
        let (sink, _) = self.run_sink(nu, delta, t_end, n_frames.max(64))?;
        let records = &sink.records;
        let grid: Vec<f64> = (0..n_grid)
            .map(|i| self.basis.ell * i as f64 / (n_grid - 1) as f64)
            .collect();
        let mut out = Vec::with_capacity(n_frames * n_grid);
        for f in 0..n_frames {
            let idx = (f * (records.len() - 1)) / (n_frames - 1);
            let profile = self
                .basis
                .reconstruct(&records[idx].state.beam.a1, &grid)
                .map_err(err_str)?;
            out.extend(profile);
        }
        Ok(out)
    }

    fn mode_index(&self, mode: usize) -> Result<usize, String> {
        if mode == 0 || mode > self.basis.n_modes {
            return Err(format!("mode must be in 1..={}", self.basis.n_modes));
        }
        Ok(mode - 1)
    }

    fn closed_loop_records(
        &self,
        nu: f64,
        delta: f64,
        t_end: f64,
        max_points: usize,
    ) -> Result<Vec<(f64, f64, f64)>, String> {
        let (sink, _) = self.run_sink(nu, delta, t_end, max_points)?;
        Ok(sink.records.iter().map(|r| (r.t, r.v, r.y)).collect())
    }

    fn run_sink(
        &self,
        nu: f64,
        delta: f64,
        t_end: f64,
        max_points: usize,
    ) -> Result<(MemorySink, IntegratorConfig), String> {
        if !(nu.is_finite() && nu > 0.0) {
            return Err(format!("nu must be positive, got {nu}"));
        }
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(format!("delta must be nonnegative, got {delta}"));
        }
        if !(t_end.is_finite() && t_end > 0.0 && t_end <= 600.0) {
            return Err(format!("t_end must be in (0, 600], got {t_end}"));
        }
        let gains = Gains::new(nu, nu, nu).map_err(err_str)?;
        let template = default_template(&self.basis).map_err(err_str)?;
        let initial =
            perturbed_initial(delta, &template, &self.params, &self.basis).map_err(err_str)?;
        let n_steps = (t_end / DEMO_DT).round().max(1.0) as usize;
        let config = IntegratorConfig {
            dt: DEMO_DT,
            t_end,
            renormalize_q: true,
            record_every: (n_steps / (max_points - 1)).max(1),
        };
        let ctx = RhsContext {
            mode: RhsMode::ClosedLoop,
            flavor: KinematicsFlavor::Consistent,
            params: &self.params,
            gains: &gains,
            basis: &self.basis,
            external: Torque {
                components: nalgebra::Vector3::zeros(),
                source: TorqueSource::Control,
            },
        };
        let mut sink = MemorySink::default();
        integrate(&initial, &config, &ctx, &mut sink).map_err(err_str)?;
        Ok((sink, config))
    }
}
