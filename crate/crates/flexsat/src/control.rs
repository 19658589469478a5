//! Boom-damping feedback torque.
//!
//! The law cancels the gyroscopic and gravity-gradient terms of the angular
//! dynamics and injects damping proportional to the boom feedback
//! functionals, so that the boom energy decays as -nu1 g1^2 - nu2 g2^2
//! - nu3 g3^2 along closed-loop trajectories.

use nalgebra::Vector3;

use crate::beam::{gamma_functionals, BeamBasis};
use crate::dynamics::{check_state, FullState};
use crate::error::Result;
use crate::model::{Gains, PhysicalParams, Torque, TorqueSource};

/// Full-state feedback torque. The scalar part of the attitude is used as
/// stored, so the law stays well-defined on the whole quaternion sphere.
pub fn feedback_torque(
    state: &FullState,
    params: &PhysicalParams,
    gains: &Gains,
    basis: &BeamBasis,
) -> Result<Torque> {
    check_state(state, basis)?;
    let g = gamma_functionals(&state.beam, basis);
    let w = &state.rigid.omega;
    let (w1, w2, w3) = (w.x, w.y, w.z);
    let q = &state.rigid.q;
    let (q1, q2, q3, q4) = (q.v.x, q.v.y, q.v.z, q.s);
    let (i1, i2, i3) = (params.i1, params.i2, params.i3);
    let w0sq = params.omega0 * params.omega0;
    let roll_yaw = q1 * q4 + q2 * q3;
    let pitch_yaw = q1 * q3 - q2 * q4;
    let tilt = 2.0 * q1 * q1 + 2.0 * q2 * q2 - 1.0;
    let u1 = -gains.nu1 * i1 * g.gamma1
        + (i1 - i2 + i3) * (w2 * w3)
        + 6.0 * w0sq * (i3 - i2) * roll_yaw * tilt;
    let u2 = -gains.nu2 * i2 * g.gamma2
        + (i1 - i2 - i3) * (w1 * w3)
        + 6.0 * w0sq * (i1 - i3) * pitch_yaw * tilt;
    let u3 = -gains.nu3 * i3 * g.gamma3
        + (i2 - i1) * (w1 * w2)
        + 12.0 * w0sq * (i2 - i1) * roll_yaw * (q2 * q4 - q1 * q3);
    Ok(Torque { components: Vector3::new(u1, u2, u3), source: TorqueSource::Control })
}
